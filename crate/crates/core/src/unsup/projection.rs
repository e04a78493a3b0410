//! Linear projections learned from data: PCA and FastICA.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, Axis};
use rand_distr::{Distribution, StandardNormal};

use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::linalg::{canonicalize_row_signs, covariance_centered, seeded_rng, symmetric_eigen};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionKind {
    Pca,
    Ica,
}

impl ProjectionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProjectionKind::Pca => "pca",
            ProjectionKind::Ica => "ica",
        }
    }
}

/// `y = P (x - mean)`. Rows of `p` are the components.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    pub p: Array2<f64>,
    pub kind: ProjectionKind,
    pub mean: Array1<f64>,
    /// `n × d` whitening transform applied before the ICA rotation.
    pub whitener: Option<Array2<f64>>,
    /// Variance captured by each component (PCA eigenvalues; 1 for ICA).
    pub explained_variance: Array1<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl ProjectionMatrix {
    pub fn n_components(&self) -> usize {
        self.p.nrows()
    }

    pub fn project_into(&self, x: ArrayView1<f64>, mut out: ArrayViewMut1<f64>) {
        let centered = &x - &self.mean;
        out.assign(&self.p.dot(&centered));
    }

    pub fn project(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let mut out = Array1::zeros(self.n_components());
        self.project_into(x, out.view_mut());
        out
    }
}

/// Linear projection, no threshold.
impl Encoder for ProjectionMatrix {
    fn input_dim(&self) -> usize {
        self.p.ncols()
    }

    fn output_dim(&self) -> usize {
        self.p.nrows()
    }

    fn encode_into(&self, x: ArrayView1<f64>, out: ArrayViewMut1<f64>) {
        self.project_into(x, out);
    }
}

fn check_components(n: usize, d: usize) -> Result<()> {
    if n == 0 || n > d {
        return Err(Error::argument(
            "n_components",
            format!("{n} components requested for input dimension {d}"),
        ));
    }
    Ok(())
}

fn centered(data: ArrayView2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    if data.nrows() < 2 {
        return Err(Error::argument("data", "need at least 2 samples"));
    }
    let mean = data.mean_axis(Axis(0)).expect("non-empty");
    let x = &data - &mean.view().insert_axis(Axis(0));
    Ok((mean, x))
}

/// Principal components of row-major samples, descending by eigenvalue.
pub fn fit_pca(data: ArrayView2<f64>, n_components: usize) -> Result<ProjectionMatrix> {
    check_components(n_components, data.ncols())?;
    let (mean, x) = centered(data)?;
    let (values, vectors) = symmetric_eigen(covariance_centered(x.view()).view());
    let mut p = vectors.slice(ndarray::s![.., ..n_components]).t().to_owned();
    canonicalize_row_signs(&mut p);
    Ok(ProjectionMatrix {
        p,
        kind: ProjectionKind::Pca,
        mean,
        whitener: None,
        explained_variance: values.slice(ndarray::s![..n_components]).mapv(|v| v.max(0.0)),
        converged: true,
        iterations: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcaOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for IcaOptions {
    fn default() -> Self {
        IcaOptions {
            max_iter: 200,
            tol: 1e-4,
            seed: 0,
        }
    }
}

/// `(M Mᵀ)^{-1/2} M`, making the rows of `M` orthonormal.
fn symmetric_decorrelate(m: &Array2<f64>) -> Array2<f64> {
    let (values, vectors) = symmetric_eigen(m.dot(&m.t()).view());
    let inv_sqrt = Array1::from_iter(values.iter().map(|&v| 1.0 / v.max(1e-300).sqrt()));
    let scaled = &vectors * &inv_sqrt.view().insert_axis(Axis(0));
    scaled.dot(&vectors.t()).dot(m)
}

/// Symmetric FastICA with the log-cosh contrast on PCA-whitened data.
///
/// A run that hits `max_iter` returns the current rotation with
/// `converged = false`.
pub fn fit_ica(data: ArrayView2<f64>, n_components: usize, opts: IcaOptions) -> Result<ProjectionMatrix> {
    check_components(n_components, data.ncols())?;
    let (mean, x) = centered(data)?;
    let (values, vectors) = symmetric_eigen(covariance_centered(x.view()).view());
    let floor = values[0].max(0.0) * 1e-12;
    if !(values[n_components - 1] > floor) {
        return Err(Error::argument(
            "n_components",
            format!("{n_components} components exceed the numerical rank of the data"),
        ));
    }
    let mut whitener = vectors.slice(ndarray::s![.., ..n_components]).t().to_owned();
    for (mut row, &v) in whitener.rows_mut().into_iter().zip(values.iter()) {
        row.mapv_inplace(|w| w / v.sqrt());
    }
    // Samples as columns: z is n × N.
    let z = whitener.dot(&x.t());
    let n = n_components;
    let samples = z.ncols() as f64;

    let mut rng = seeded_rng(opts.seed, 0x1ca);
    let init = Array2::from_shape_fn((n, n), |_| StandardNormal.sample(&mut rng));
    let mut w = symmetric_decorrelate(&init);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let wz = w.dot(&z);
        let g = wz.mapv(f64::tanh);
        let g_prime_mean = g.map_axis(Axis(1), |row| row.iter().map(|t| 1.0 - t * t).sum::<f64>() / samples);
        let mut next = g.dot(&z.t()) / samples;
        next -= &(&w * &g_prime_mean.view().insert_axis(Axis(1)));
        let next = symmetric_decorrelate(&next);
        let change = next
            .rows()
            .into_iter()
            .zip(w.rows())
            .map(|(a, b)| (a.dot(&b).abs() - 1.0).abs())
            .fold(0.0, f64::max);
        w = next;
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("FastICA did not converge in {} iterations", opts.max_iter);
    }
    let mut p = w.dot(&whitener);
    canonicalize_row_signs(&mut p);
    Ok(ProjectionMatrix {
        p,
        kind: ProjectionKind::Ica,
        mean,
        whitener: Some(whitener),
        explained_variance: Array1::ones(n),
        converged,
        iterations,
    })
}
