//! Adam behavior and checkpoint round-trips.

use std::collections::BTreeMap;

use cplab_tensor::{checkpoint, AdamHyper, NdArray, ParameterStore, TensorError};

fn store_with(name: &str, data: &[f64]) -> ParameterStore {
    let mut store = ParameterStore::new();
    store
        .insert(name, NdArray::from_vec(&[data.len()], data.to_vec()).unwrap())
        .unwrap();
    store
}

#[test]
fn zero_gradient_leaves_parameters_unchanged() {
    let mut store = store_with("w", &[1.0, -2.0, 3.0]);
    let mut grads = BTreeMap::new();
    grads.insert("w".to_string(), NdArray::zeros(&[3]));
    store.adam_step(&grads, AdamHyper::with_lr(0.1)).unwrap();
    assert_eq!(store.get("w").unwrap().data(), &[1.0, -2.0, 3.0]);
}

#[test]
fn first_step_moves_against_gradient_by_about_lr() {
    let mut store = store_with("w", &[0.0, 0.0]);
    let mut grads = BTreeMap::new();
    grads.insert("w".to_string(), NdArray::from_vec(&[2], vec![0.3, -0.7]).unwrap());
    let lr = 0.01;
    store.adam_step(&grads, AdamHyper::with_lr(lr)).unwrap();
    let w = store.get("w").unwrap().data();
    // bias correction makes the first step ≈ -lr * sign(g)
    assert!((w[0] + lr).abs() < 1e-6, "w0 = {}", w[0]);
    assert!((w[1] - lr).abs() < 1e-6, "w1 = {}", w[1]);
}

#[test]
fn missing_gradient_key_is_a_no_op_for_that_entry() {
    let mut store = store_with("a", &[1.0]);
    store.insert("b", NdArray::scalar(5.0)).unwrap();
    let mut grads = BTreeMap::new();
    grads.insert("a".to_string(), NdArray::from_vec(&[1], vec![1.0]).unwrap());
    store.adam_step(&grads, AdamHyper::with_lr(0.1)).unwrap();
    assert_eq!(store.get("b").unwrap().item(), 5.0);
    assert_eq!(store.entry("b").unwrap().step, 0);
    assert_eq!(store.entry("a").unwrap().step, 1);
}

#[test]
fn unknown_gradient_key_is_rejected() {
    let mut store = store_with("a", &[1.0]);
    let mut grads = BTreeMap::new();
    grads.insert("ghost".to_string(), NdArray::scalar(1.0));
    assert!(matches!(
        store.adam_step(&grads, AdamHyper::with_lr(0.1)),
        Err(TensorError::UnknownParam { .. })
    ));
}

#[test]
fn duplicate_insert_is_rejected() {
    let mut store = store_with("a", &[1.0]);
    assert!(matches!(
        store.insert("a", NdArray::scalar(0.0)),
        Err(TensorError::DuplicateParam { .. })
    ));
}

#[test]
fn quadratic_bowl_reaches_origin_within_2000_steps() {
    let mut store = store_with("x", &[5.0, -3.0, 2.0]);
    let hyper = AdamHyper::with_lr(0.05);
    for _ in 0..2000 {
        let x = store.get("x").unwrap().clone();
        let mut grads = BTreeMap::new();
        grads.insert("x".to_string(), x.map(|v| 2.0 * v));
        store.adam_step(&grads, hyper).unwrap();
    }
    for &v in store.get("x").unwrap().data() {
        assert!(v.abs() < 1e-3, "coordinate stuck at {v}");
    }
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");

    let mut store = ParameterStore::new();
    store
        .insert("layer.w", NdArray::from_vec(&[2, 3], vec![1.5, -0.25, 3e-17, 4.0, 5.0, -6.0]).unwrap())
        .unwrap();
    store.insert("layer.b", NdArray::from_vec(&[1, 3], vec![0.1, 0.2, 0.3]).unwrap()).unwrap();
    // run a step so moments and counts are non-trivial
    let mut grads = BTreeMap::new();
    grads.insert("layer.w".to_string(), NdArray::full(&[2, 3], 0.37));
    store.adam_step(&grads, AdamHyper::with_lr(0.01)).unwrap();

    checkpoint::save(&store, &path).unwrap();
    let loaded = checkpoint::load(&path).unwrap();

    assert_eq!(loaded.len(), store.len());
    for (name, entry) in store.iter() {
        let other = loaded.entry(name).unwrap();
        assert_eq!(entry.value.shape(), other.value.shape());
        assert_eq!(entry.value.data(), other.value.data(), "{name} values differ");
        assert_eq!(entry.m.data(), other.m.data(), "{name} first moments differ");
        assert_eq!(entry.v.data(), other.v.data(), "{name} second moments differ");
        assert_eq!(entry.step, other.step, "{name} step differs");
    }
}

#[test]
fn save_then_load_then_save_produces_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let p1 = dir.path().join("a.ckpt");
    let p2 = dir.path().join("b.ckpt");

    let mut store = ParameterStore::new();
    store.insert("z", NdArray::from_vec(&[4], vec![1.0, 2.0, 3.0, 4.0]).unwrap()).unwrap();
    store.insert("a", NdArray::scalar(-1.0)).unwrap();
    checkpoint::save(&store, &p1).unwrap();
    let loaded = checkpoint::load(&p1).unwrap();
    checkpoint::save(&loaded, &p2).unwrap();
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
}

#[test]
fn bad_magic_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("junk.ckpt");
    std::fs::write(&path, b"NOTMAGIC\x01\x00\x00\x00\x00\x00\x00\x00").unwrap();
    assert!(matches!(checkpoint::load(&path), Err(TensorError::Checkpoint(_))));
}

#[test]
fn truncated_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    let store = store_with("w", &[1.0, 2.0, 3.0, 4.0]);
    checkpoint::save(&store, &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
    assert!(checkpoint::load(&path).is_err());
}
