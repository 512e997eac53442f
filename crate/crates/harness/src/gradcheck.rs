//! Finite-difference audit of the whole differentiable stack.
//!
//! Every tape primitive is checked at random points with central
//! differences, then the composed networks (recurrent encoder, selection
//! on its smooth fixed-pick path, predictor, verifier) are checked
//! against every parameter. The per-crate test suites run the same kind
//! of sweep; this module packages it as a callable audit so the CLI and
//! the acceptance gate share one implementation and one set of
//! tolerances.

use cplab_nets::{
    encode_window, fixed_selection, fresh_store, predict, verify_pairwise, zero_state, BoundParams,
    FixedPick, NetConfig,
};
use cplab_tensor::tape::NodeId;
use cplab_tensor::{check_gradient, NdArray, ParameterStore, Result as TensorResult, SeededRng, Tape};
use serde::Serialize;
use std::time::Instant;

/// Max relative error allowed for a single primitive.
pub const PRIMITIVE_TOLERANCE: f64 = 1e-5;
/// Max relative error allowed for a composed network path.
pub const COMPOSITE_TOLERANCE: f64 = 1e-4;
/// Random evaluation points per checked function.
pub const POINTS: usize = 20;

const PRIMITIVE_STEP: f64 = 1e-6;
const COMPOSITE_STEP: f64 = 1e-5;
const OBS_DIM: usize = 20;

#[derive(Debug, Clone, Serialize)]
pub struct GradEntry {
    pub name: String,
    pub max_error: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradSuiteReport {
    pub primitives: Vec<GradEntry>,
    pub composites: Vec<GradEntry>,
    pub elapsed_secs: f64,
}

impl GradSuiteReport {
    pub fn max_primitive_error(&self) -> f64 {
        self.primitives.iter().map(|e| e.max_error).fold(0.0, f64::max)
    }

    pub fn max_composite_error(&self) -> f64 {
        self.composites.iter().map(|e| e.max_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_primitive_error() < PRIMITIVE_TOLERANCE
            && self.max_composite_error() < COMPOSITE_TOLERANCE
    }

    /// Entries over tolerance, worst first.
    pub fn failures(&self) -> Vec<&GradEntry> {
        let mut out: Vec<&GradEntry> = self
            .primitives
            .iter()
            .filter(|e| e.max_error >= PRIMITIVE_TOLERANCE)
            .chain(self.composites.iter().filter(|e| e.max_error >= COMPOSITE_TOLERANCE))
            .collect();
        out.sort_by(|a, b| b.max_error.total_cmp(&a.max_error));
        out
    }
}

/// Analytic gradient at `at`, then a central-difference sweep over every
/// coordinate with the graph rebuilt from scratch per evaluation.
fn primitive_error<F>(build: F, at: &NdArray) -> f64
where
    F: Fn(&mut Tape, NodeId) -> TensorResult<NodeId>,
{
    let mut tape = Tape::new();
    let x = tape.input(at.clone());
    let root = build(&mut tape, x).expect("build primitive graph");
    let grads = tape.backward(root).expect("backward");
    let analytic = grads
        .wrt(x)
        .cloned()
        .unwrap_or_else(|| NdArray::zeros(at.shape()));
    check_gradient(
        |p| {
            let mut t = Tape::new();
            let xi = t.input(p.clone());
            let r = build(&mut t, xi)?;
            Ok(t.value(r).item())
        },
        at,
        &analytic,
        PRIMITIVE_STEP,
    )
    .expect("finite differences")
    .max_error
}

/// Fixed weights that turn an array output into a non-degenerate scalar.
fn weighted_sum(tape: &mut Tape, y: NodeId) -> TensorResult<NodeId> {
    let n = tape.value(y).numel();
    let weights: Vec<f64> = (0..n).map(|i| 0.3 + 0.7 * (i as f64 * 1.3).sin()).collect();
    let w = tape.mask(y, &weights)?;
    Ok(tape.sum_all(w))
}

fn identity(v: f64) -> f64 {
    v
}

/// Keep points away from relu's kink so central differences stay two-sided.
fn away_from_zero(v: f64) -> f64 {
    if v.abs() < 0.05 {
        v + 0.1 * if v >= 0.0 { 1.0 } else { -1.0 }
    } else {
        v
    }
}

fn positive(v: f64) -> f64 {
    v.abs() + 0.5
}

fn sweep_primitive<F>(
    out: &mut Vec<GradEntry>,
    name: &str,
    rng: &mut SeededRng,
    shape: &[usize],
    prep: fn(f64) -> f64,
    build: F,
) where
    F: Fn(&mut Tape, NodeId) -> TensorResult<NodeId>,
{
    let mut worst = 0.0f64;
    for _ in 0..POINTS {
        let mut at = rng.uniform_array(shape, -2.0, 2.0);
        for v in at.data_mut() {
            *v = prep(*v);
        }
        worst = worst.max(primitive_error(&build, &at));
    }
    out.push(GradEntry { name: name.to_string(), max_error: worst, points: POINTS });
}

fn primitive_entries(rng: &mut SeededRng) -> Vec<GradEntry> {
    let mut out = Vec::new();

    sweep_primitive(&mut out, "tanh", rng, &[3, 4], identity, |t, x| {
        let y = t.tanh(x);
        weighted_sum(t, y)
    });
    sweep_primitive(&mut out, "sigmoid", rng, &[3, 4], identity, |t, x| {
        let y = t.sigmoid(x);
        weighted_sum(t, y)
    });
    sweep_primitive(&mut out, "relu", rng, &[3, 4], away_from_zero, |t, x| {
        let y = t.relu(x);
        weighted_sum(t, y)
    });
    sweep_primitive(&mut out, "exp", rng, &[3, 4], identity, |t, x| {
        let y = t.exp(x);
        weighted_sum(t, y)
    });
    sweep_primitive(&mut out, "log", rng, &[3, 4], positive, |t, x| {
        let y = t.log(x)?;
        weighted_sum(t, y)
    });
    sweep_primitive(&mut out, "neg", rng, &[3, 4], identity, |t, x| {
        let y = t.neg(x);
        weighted_sum(t, y)
    });
    sweep_primitive(&mut out, "scale", rng, &[3, 4], identity, |t, x| {
        let y = t.scale(x, -1.7);
        weighted_sum(t, y)
    });
    sweep_primitive(&mut out, "add_scalar", rng, &[3, 4], identity, |t, x| {
        let y = t.add_scalar(x, 2.5);
        weighted_sum(t, y)
    });
    sweep_primitive(&mut out, "softmax", rng, &[3, 5], identity, |t, x| {
        let y = t.softmax(x);
        weighted_sum(t, y)
    });
    sweep_primitive(&mut out, "reshape", rng, &[3, 4], identity, |t, x| {
        let y = t.reshape(x, &[2, 6])?;
        weighted_sum(t, y)
    });

    sweep_primitive(&mut out, "sum_axis0", rng, &[3, 4], identity, |t, x| {
        let y = t.sum_axis(x, 0)?;
        weighted_sum(t, y)
    });
    sweep_primitive(&mut out, "sum_axis1", rng, &[3, 4], identity, |t, x| {
        let y = t.sum_axis(x, 1)?;
        weighted_sum(t, y)
    });
    sweep_primitive(&mut out, "mean_axis0", rng, &[3, 4], identity, |t, x| {
        let y = t.mean_axis(x, 0)?;
        weighted_sum(t, y)
    });
    sweep_primitive(&mut out, "mean_axis1", rng, &[3, 4], identity, |t, x| {
        let y = t.mean_axis(x, 1)?;
        weighted_sum(t, y)
    });
    sweep_primitive(&mut out, "sum_all", rng, &[3, 4], identity, |t, x| Ok(t.sum_all(x)));
    sweep_primitive(&mut out, "mean_all", rng, &[3, 4], identity, |t, x| Ok(t.mean_all(x)));

    let other = NdArray::from_vec(&[3, 4], (0..12).map(|i| 0.4 + 0.2 * i as f64).collect())
        .expect("constant operand");
    let o = other.clone();
    sweep_primitive(&mut out, "add_lhs", rng, &[3, 4], identity, move |t, x| {
        let c = t.constant(o.clone());
        let y = t.add(x, c)?;
        weighted_sum(t, y)
    });
    let o = other.clone();
    sweep_primitive(&mut out, "sub_lhs", rng, &[3, 4], identity, move |t, x| {
        let c = t.constant(o.clone());
        let y = t.sub(x, c)?;
        weighted_sum(t, y)
    });
    let o = other.clone();
    sweep_primitive(&mut out, "sub_rhs", rng, &[3, 4], identity, move |t, x| {
        let c = t.constant(o.clone());
        let y = t.sub(c, x)?;
        weighted_sum(t, y)
    });
    let o = other.clone();
    sweep_primitive(&mut out, "mul_lhs", rng, &[3, 4], identity, move |t, x| {
        let c = t.constant(o.clone());
        let y = t.mul(x, c)?;
        weighted_sum(t, y)
    });
    let o = other.clone();
    sweep_primitive(&mut out, "mul_rhs", rng, &[3, 4], identity, move |t, x| {
        let c = t.constant(o.clone());
        let y = t.mul(c, x)?;
        weighted_sum(t, y)
    });
    sweep_primitive(&mut out, "add_row_broadcast", rng, &[1, 4], identity, |t, x| {
        let c = t.constant(
            NdArray::from_vec(&[3, 4], (0..12).map(|i| i as f64 * 0.25).collect()).unwrap(),
        );
        let y = t.add(c, x)?;
        weighted_sum(t, y)
    });
    sweep_primitive(&mut out, "mul_col_broadcast", rng, &[3, 1], identity, |t, x| {
        let c = t.constant(
            NdArray::from_vec(&[3, 4], (0..12).map(|i| 1.0 + i as f64 * 0.1).collect()).unwrap(),
        );
        let y = t.mul(c, x)?;
        weighted_sum(t, y)
    });
    let o = other.clone();
    sweep_primitive(&mut out, "squared_error_lhs", rng, &[3, 4], identity, move |t, x| {
        let c = t.constant(o.clone());
        t.squared_error(x, c)
    });
    let o = other;
    sweep_primitive(&mut out, "squared_error_rhs", rng, &[3, 4], identity, move |t, x| {
        let c = t.constant(o.clone());
        t.squared_error(c, x)
    });

    let b = rng.uniform_array(&[4, 3], -1.0, 1.0);
    let bb = b.clone();
    sweep_primitive(&mut out, "matmul_lhs", rng, &[2, 4], identity, move |t, x| {
        let c = t.constant(bb.clone());
        let y = t.matmul(x, c)?;
        weighted_sum(t, y)
    });
    let a = rng.uniform_array(&[2, 4], -1.0, 1.0);
    let aa = a.clone();
    sweep_primitive(&mut out, "matmul_rhs", rng, &[4, 3], identity, move |t, x| {
        let c = t.constant(aa.clone());
        let y = t.matmul(c, x)?;
        weighted_sum(t, y)
    });
    let bt = rng.uniform_array(&[3, 4], -1.0, 1.0);
    let bt2 = bt.clone();
    sweep_primitive(&mut out, "matmul_nt_lhs", rng, &[2, 4], identity, move |t, x| {
        let c = t.constant(bt2.clone());
        let y = t.matmul_nt(x, c)?;
        weighted_sum(t, y)
    });
    let aa = a;
    sweep_primitive(&mut out, "matmul_nt_rhs", rng, &[3, 4], identity, move |t, x| {
        let c = t.constant(aa.clone());
        let y = t.matmul_nt(c, x)?;
        weighted_sum(t, y)
    });

    sweep_primitive(&mut out, "concat_axis1", rng, &[3, 2], identity, |t, x| {
        let c = t.constant(NdArray::full(&[3, 3], 0.7));
        let y = t.concat(&[x, c], 1)?;
        weighted_sum(t, y)
    });
    sweep_primitive(&mut out, "concat_axis0", rng, &[2, 3], identity, |t, x| {
        let c = t.constant(NdArray::full(&[1, 3], -0.4));
        let y = t.concat(&[c, x], 0)?;
        weighted_sum(t, y)
    });
    sweep_primitive(&mut out, "gather_rows", rng, &[4, 3], identity, |t, x| {
        let y = t.gather_rows(x, &[2, 0, 2, 3])?;
        weighted_sum(t, y)
    });
    sweep_primitive(&mut out, "gather_cols", rng, &[3, 4], identity, |t, x| {
        let y = t.gather_cols(x, &[3, 1, 1])?;
        weighted_sum(t, y)
    });
    sweep_primitive(&mut out, "mask", rng, &[3, 4], identity, |t, x| {
        let m: Vec<f64> = (0..12).map(|i| if i % 3 == 0 { 0.0 } else { 1.5 }).collect();
        let y = t.mask(x, &m)?;
        weighted_sum(t, y)
    });
    sweep_primitive(&mut out, "cross_entropy_logits", rng, &[4, 5], identity, |t, x| {
        t.cross_entropy_logits(x, &[0, 3, 2, 2])
    });

    out
}

fn small_cfg() -> NetConfig {
    NetConfig {
        slots: 4,
        slot_width: 2,
        key_dim: 3,
        b_select: 2,
        value_bins: 4,
        enc_hidden: 6,
        enc_out: 5,
        score_hidden: 4,
        role_hidden: 3,
        predict_hidden: 4,
        verify_hidden: 4,
        ..NetConfig::default()
    }
}

fn picks() -> Vec<FixedPick> {
    vec![
        FixedPick { a_slot: 1, b_slots: vec![0, 3] },
        FixedPick { a_slot: 2, b_slots: vec![1, 3] },
    ]
}

struct CompositePoint {
    store: ParameterStore,
    obs: Vec<NdArray>,
    fut: Vec<NdArray>,
}

impl CompositePoint {
    fn draw(cfg: &NetConfig, rng: &mut SeededRng) -> Self {
        let store = fresh_store(cfg, OBS_DIM, rng).expect("parameter init");
        let window = |rng: &mut SeededRng| {
            (0..3).map(|_| rng.uniform_array(&[2, OBS_DIM], -1.0, 1.0)).collect()
        };
        let obs = window(rng);
        let fut = window(rng);
        CompositePoint { store, obs, fut }
    }
}

/// One loss graph built on a bound tape; `fut` is unused by the paths
/// that stop before the verifier.
type CompositeBuild = dyn Fn(&mut Tape, &BoundParams, &CompositePoint) -> NodeId;

fn encode_last(tape: &mut Tape, p: &BoundParams, cfg: &NetConfig, frames: &[NdArray]) -> NodeId {
    let ids: Vec<NodeId> = frames.iter().map(|o| tape.input(o.clone())).collect();
    let h0 = zero_state(tape, 2, cfg);
    let states = encode_window(tape, p, &ids, h0).expect("encode window");
    *states.last().expect("nonempty window")
}

/// Max finite-difference error over every parameter of the store at one
/// random point.
fn composite_error(point: &CompositePoint, build: &CompositeBuild) -> f64 {
    let mut tape = Tape::new();
    let p = BoundParams::bind(&mut tape, &point.store).expect("bind parameters");
    let root = build(&mut tape, &p, point);
    let grads = tape.backward(root).expect("backward").into_param_map();

    let mut worst = 0.0f64;
    for name in point.store.names().map(str::to_string).collect::<Vec<_>>() {
        let at = point.store.get(&name).expect("known parameter").clone();
        let zero = NdArray::zeros(at.shape());
        let analytic = grads.get(&name).unwrap_or(&zero);
        let report = check_gradient(
            |x| {
                let mut s2 = point.store.clone();
                s2.assign(&name, x.clone())?;
                let mut t = Tape::new();
                let p2 = BoundParams::bind(&mut t, &s2).expect("bind perturbed parameters");
                let moved = CompositePoint { store: s2, obs: point.obs.clone(), fut: point.fut.clone() };
                let r = build(&mut t, &p2, &moved);
                Ok(t.value(r).item())
            },
            &at,
            analytic,
            COMPOSITE_STEP,
        )
        .expect("composite finite differences");
        worst = worst.max(report.max_error);
    }
    worst
}

fn sweep_composite(
    out: &mut Vec<GradEntry>,
    name: &str,
    cfg: &NetConfig,
    rng: &mut SeededRng,
    build: &CompositeBuild,
) {
    let mut worst = 0.0f64;
    for _ in 0..POINTS {
        let point = CompositePoint::draw(cfg, rng);
        worst = worst.max(composite_error(&point, build));
    }
    out.push(GradEntry { name: name.to_string(), max_error: worst, points: POINTS });
}

fn composite_entries(rng: &mut SeededRng) -> Vec<GradEntry> {
    let cfg = small_cfg();
    let mut out = Vec::new();

    let c1 = cfg.clone();
    sweep_composite(&mut out, "recurrent-encoder", &cfg, rng, &move |t, p, pt| {
        let h = encode_last(t, p, &c1, &pt.obs);
        weighted_sum(t, h).expect("scalarize state")
    });

    let c2 = cfg.clone();
    sweep_composite(&mut out, "selection-smooth-path", &cfg, rng, &move |t, p, pt| {
        let h = encode_last(t, p, &c2, &pt.obs);
        let batch = fixed_selection(t, p, &c2, h, &picks()).expect("fixed selection");
        let rows: Vec<NodeId> = batch.samples.iter().map(|s| s.content).collect();
        let stacked = t.concat(&rows, 0).expect("stack content rows");
        let content = weighted_sum(t, stacked).expect("scalarize content");
        let pp = t.mul(batch.probs, batch.probs).expect("square probs");
        let smooth = t.mean_all(pp);
        let smooth = t.scale(smooth, 0.5);
        t.add(content, smooth).expect("combine")
    });

    let c3 = cfg.clone();
    sweep_composite(&mut out, "prediction-path", &cfg, rng, &move |t, p, pt| {
        let h = encode_last(t, p, &c3, &pt.obs);
        let batch = fixed_selection(t, p, &c3, h, &picks()).expect("fixed selection");
        let pred = predict(t, p, &batch).expect("predict");
        let ce = t.cross_entropy_logits(pred.logits, &[1, 3]).expect("cross entropy");
        let pp = t.mul(batch.probs, batch.probs).expect("square probs");
        let smooth = t.mean_all(pp);
        let smooth = t.scale(smooth, 0.1);
        t.add(ce, smooth).expect("combine")
    });

    let c4 = cfg.clone();
    sweep_composite(&mut out, "verifier-path", &cfg, rng, &move |t, p, pt| {
        let h = encode_last(t, p, &c4, &pt.obs);
        let batch = fixed_selection(t, p, &c4, h, &picks()).expect("fixed selection");
        let pred = predict(t, p, &batch).expect("predict");
        let futures = encode_last(t, p, &c4, &pt.fut);
        let scores =
            verify_pairwise(t, p, &c4, &batch, pred.probs, futures).expect("verifier scores");
        let sq = t.mul(scores, scores).expect("square scores");
        t.mean_all(sq)
    });

    out
}

/// Run the full audit. Deterministic for a given seed.
pub fn run_gradient_suite(seed: u64) -> GradSuiteReport {
    let start = Instant::now();
    let mut rng = SeededRng::new(seed ^ 0x67AD).fork("gradient-suite");
    let primitives = primitive_entries(&mut rng);
    let composites = composite_entries(&mut rng);
    GradSuiteReport { primitives, composites, elapsed_secs: start.elapsed().as_secs_f64() }
}
