//! Tight loops for the three matmul layouts the tape needs.
//!
//! The nn and tn kernels accumulate a 4-row by 8-column block of the output
//! in stack arrays so the compiler keeps the block in vector registers
//! across the whole reduction; the nt kernel transposes its right operand
//! above a size threshold and reuses the nn loop. Odd edges fall back to
//! plain loops.

const NR: usize = 8;

/// c[m,n] += a[m,k] * b[k,n]
pub fn mm_nn_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let m4 = m - m % 4;
    let n8 = n - n % NR;
    for i in (0..m4).step_by(4) {
        let a0 = &a[i * k..(i + 1) * k];
        let a1 = &a[(i + 1) * k..(i + 2) * k];
        let a2 = &a[(i + 2) * k..(i + 3) * k];
        let a3 = &a[(i + 3) * k..(i + 4) * k];
        let mut jb = 0;
        while jb < n8 {
            let mut acc0 = [0.0f64; NR];
            let mut acc1 = [0.0f64; NR];
            let mut acc2 = [0.0f64; NR];
            let mut acc3 = [0.0f64; NR];
            for p in 0..k {
                let bv: &[f64] = &b[p * n + jb..p * n + jb + NR];
                let (v0, v1, v2, v3) = (a0[p], a1[p], a2[p], a3[p]);
                for j in 0..NR {
                    acc0[j] += v0 * bv[j];
                    acc1[j] += v1 * bv[j];
                    acc2[j] += v2 * bv[j];
                    acc3[j] += v3 * bv[j];
                }
            }
            for j in 0..NR {
                c[i * n + jb + j] += acc0[j];
                c[(i + 1) * n + jb + j] += acc1[j];
                c[(i + 2) * n + jb + j] += acc2[j];
                c[(i + 3) * n + jb + j] += acc3[j];
            }
            jb += NR;
        }
        for j in n8..n {
            let mut s = [0.0f64; 4];
            for p in 0..k {
                let bv = b[p * n + j];
                s[0] += a0[p] * bv;
                s[1] += a1[p] * bv;
                s[2] += a2[p] * bv;
                s[3] += a3[p] * bv;
            }
            c[i * n + j] += s[0];
            c[(i + 1) * n + j] += s[1];
            c[(i + 2) * n + j] += s[2];
            c[(i + 3) * n + j] += s[3];
        }
    }
    for i in m4..m {
        let a_row = &a[i * k..(i + 1) * k];
        let c_row = &mut c[i * n..(i + 1) * n];
        for (p, &a_ip) in a_row.iter().enumerate() {
            let b_row = &b[p * n..(p + 1) * n];
            for (c_v, &b_v) in c_row.iter_mut().zip(b_row) {
                *c_v += a_ip * b_v;
            }
        }
    }
}

/// c[m,n] += a[m,k] * b[n,k]^T  (rows of a dotted with rows of b)
pub fn mm_nt_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    if m * k * n >= 1 << 14 {
        let mut bt = vec![0.0f64; k * n];
        transpose(b, &mut bt, n, k);
        mm_nn_acc(a, &bt, c, m, k, n);
        return;
    }
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let c_row = &mut c[i * n..(i + 1) * n];
        for (j, c_v) in c_row.iter_mut().enumerate() {
            *c_v += dot(a_row, &b[j * k..(j + 1) * k]);
        }
    }
}

/// c[k,n] += a[m,k]^T * b[m,n]  (outer accumulation over rows)
pub fn mm_tn_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    debug_assert_eq!(c.len(), k * n);
    let k4 = k - k % 4;
    let n8 = n - n % NR;
    let mut pb = 0;
    while pb < k4 {
        let mut jb = 0;
        while jb < n8 {
            let mut acc0 = [0.0f64; NR];
            let mut acc1 = [0.0f64; NR];
            let mut acc2 = [0.0f64; NR];
            let mut acc3 = [0.0f64; NR];
            for i in 0..m {
                let bv: &[f64] = &b[i * n + jb..i * n + jb + NR];
                let ar = &a[i * k + pb..i * k + pb + 4];
                for j in 0..NR {
                    acc0[j] += ar[0] * bv[j];
                    acc1[j] += ar[1] * bv[j];
                    acc2[j] += ar[2] * bv[j];
                    acc3[j] += ar[3] * bv[j];
                }
            }
            for j in 0..NR {
                c[pb * n + jb + j] += acc0[j];
                c[(pb + 1) * n + jb + j] += acc1[j];
                c[(pb + 2) * n + jb + j] += acc2[j];
                c[(pb + 3) * n + jb + j] += acc3[j];
            }
            jb += NR;
        }
        for j in n8..n {
            let mut s = [0.0f64; 4];
            for i in 0..m {
                let bv = b[i * n + j];
                s[0] += a[i * k + pb] * bv;
                s[1] += a[i * k + pb + 1] * bv;
                s[2] += a[i * k + pb + 2] * bv;
                s[3] += a[i * k + pb + 3] * bv;
            }
            c[pb * n + j] += s[0];
            c[(pb + 1) * n + j] += s[1];
            c[(pb + 2) * n + j] += s[2];
            c[(pb + 3) * n + j] += s[3];
        }
        pb += 4;
    }
    for p in k4..k {
        for i in 0..m {
            let a_ip = a[i * k + p];
            let b_row = &b[i * n..(i + 1) * n];
            let c_row = &mut c[p * n..(p + 1) * n];
            for (c_v, &b_v) in c_row.iter_mut().zip(b_row) {
                *c_v += a_ip * b_v;
            }
        }
    }
}

/// dst[cols, rows] = src[rows, cols]^T, in 8x8 tiles to keep both access
/// patterns within a cache line per tile.
pub fn transpose(src: &[f64], dst: &mut [f64], rows: usize, cols: usize) {
    debug_assert_eq!(src.len(), rows * cols);
    debug_assert_eq!(dst.len(), rows * cols);
    const B: usize = 8;
    let mut rb = 0;
    while rb < rows {
        let rend = (rb + B).min(rows);
        let mut cb = 0;
        while cb < cols {
            let cend = (cb + B).min(cols);
            for r in rb..rend {
                for c in cb..cend {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
            cb += B;
        }
        rb += B;
    }
}

/// Dot product with four accumulators so the reduction vectorizes.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..a.len() {
        tail += a[i] * b[i];
    }
    acc[0] + acc[1] + acc[2] + acc[3] + tail
}
