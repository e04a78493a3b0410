//! Small dense linear-algebra helpers shared by the encoders.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Deterministic generator for a (seed, stream) pair. Streams keep the
/// random draws of independent components (weights, sampling order, ...)
/// decoupled from each other.
pub fn seeded_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax(values: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn argmax_slice(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Sample covariance `XᵀX / (N-1)` of row-major samples, assuming the
/// columns are already centered.
pub fn covariance_centered(x: ArrayView2<f64>) -> Array2<f64> {
    let n = x.nrows().max(2) as f64;
    let mut c = x.t().dot(&x);
    c.mapv_inplace(|v| v / (n - 1.0));
    c
}

/// Sample covariance of row-major samples, centering with the column means.
pub fn covariance(x: ArrayView2<f64>) -> Array2<f64> {
    let mean = x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(x.ncols()));
    let centered = &x - &mean.insert_axis(Axis(0));
    covariance_centered(centered.view())
}

/// Eigen-decomposition of a symmetric matrix. Eigenvalues are sorted in
/// descending order; column `k` of the returned matrix is the eigenvector of
/// eigenvalue `k`.
pub fn symmetric_eigen(a: ArrayView2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (a[[i, j]] + a[[j, i]]));
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let values = Array1::from_iter(order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            vectors[[i, dst]] = eig.eigenvectors[(i, src)];
        }
    }
    (values, vectors)
}

/// Flips the sign of each row so that its largest-magnitude entry is
/// positive (first such entry on ties).
pub fn canonicalize_row_signs(rows: &mut Array2<f64>) {
    for mut row in rows.rows_mut() {
        let mut best = 0;
        for (i, v) in row.iter().enumerate() {
            if v.abs() > row[best].abs() {
                best = i;
            }
        }
        if !row.is_empty() && row[best] < 0.0 {
            row.mapv_inplace(|v| -v);
        }
    }
}

pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}
