//! Unsupervised hidden layers: PCA, ICA and sparse coding, global or split
//! into localized populations.

pub mod localized;
pub mod projection;
pub mod sparse;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayViewMut1};

pub use localized::{
    encode_rows, fit_global, fit_localized, FitOptions, LocalizedEncoder, PopulationModel, PopulationPartition,
    UnsupMethod,
};
pub use projection::{fit_ica, fit_pca, IcaOptions, ProjectionKind, ProjectionMatrix};
pub use sparse::{fit_sc, sparsity, Inference, ScParams, SparseCoder};

use crate::checkpoint::{self, Tensor};
use crate::connectivity::ReceptiveFieldMap;
use crate::datasets::ImageDims;
use crate::encoder::Encoder;
use crate::error::{Error, Result};

/// A trained unsupervised encoder, global or localized.
#[derive(Debug, Clone, PartialEq)]
pub enum UnsupEncoder {
    Global(PopulationModel),
    Localized(LocalizedEncoder),
}

impl Encoder for UnsupEncoder {
    fn input_dim(&self) -> usize {
        match self {
            UnsupEncoder::Global(m) => m.input_dim(),
            UnsupEncoder::Localized(l) => l.input_dim(),
        }
    }

    fn output_dim(&self) -> usize {
        match self {
            UnsupEncoder::Global(m) => m.output_dim(),
            UnsupEncoder::Localized(l) => l.output_dim(),
        }
    }

    fn encode_into(&self, x: ArrayView1<f64>, out: ArrayViewMut1<f64>) {
        match self {
            UnsupEncoder::Global(m) => m.encode_into(x, out),
            UnsupEncoder::Localized(l) => l.encode_into(x, out),
        }
    }
}

fn model_tensors(prefix: &str, model: &PopulationModel, out: &mut Vec<Tensor>) {
    match model {
        PopulationModel::Projection(p) => {
            out.push(Tensor::from_matrix(format!("{prefix}W1"), &p.p));
            out.push(Tensor::from_vector(format!("{prefix}mean"), &p.mean));
            out.push(Tensor::from_vector(format!("{prefix}explained_variance"), &p.explained_variance));
            if let Some(w) = &p.whitener {
                out.push(Tensor::from_matrix(format!("{prefix}whitener"), w));
            }
            let status = Array1::from(vec![f64::from(u8::from(p.converged)), p.iterations as f64]);
            out.push(Tensor::from_vector(format!("{prefix}fit_status"), &status));
        }
        PopulationModel::Sparse(s) => {
            out.push(Tensor::from_matrix(format!("{prefix}W1"), &s.w));
            out.push(Tensor::from_matrix(format!("{prefix}V1"), &s.v));
            out.push(Tensor::from_vector(format!("{prefix}a_mav"), &s.a_mav));
        }
    }
}

fn model_metadata(model: &PopulationModel, meta: &mut Vec<(&'static str, String)>) {
    match model {
        PopulationModel::Projection(p) => meta.push(("kind", p.kind.as_str().into())),
        PopulationModel::Sparse(s) => {
            let sc = &s.params;
            meta.push(("lambda", sc.lambda.to_string()));
            meta.push(("alpha_w", sc.alpha_w.to_string()));
            meta.push(("alpha_v", sc.alpha_v.to_string()));
            meta.push(("step", sc.step.to_string()));
            meta.push(("n_iter", sc.n_iter.to_string()));
            meta.push(("tau_mav", sc.tau_mav.to_string()));
            meta.push(("presentations", sc.presentations.to_string()));
            meta.push(("seen", s.seen.to_string()));
        }
    }
}

fn method_of(model: &PopulationModel) -> UnsupMethod {
    match model {
        PopulationModel::Projection(p) if p.kind == ProjectionKind::Pca => UnsupMethod::Pca,
        PopulationModel::Projection(_) => UnsupMethod::Ica,
        PopulationModel::Sparse(_) => UnsupMethod::Sc,
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    s.into()
}

/// Writes `path` (SBNW1 tensors) and `path.meta` (key = value metadata).
pub fn save_encoder(path: &Path, enc: &UnsupEncoder) -> Result<()> {
    let mut tensors = Vec::new();
    let mut meta: Vec<(&'static str, String)> = Vec::new();
    match enc {
        UnsupEncoder::Global(m) => {
            meta.push(("method", method_of(m).as_str().into()));
            meta.push(("scope", "global".into()));
            model_tensors("", m, &mut tensors);
            model_metadata(m, &mut meta);
        }
        UnsupEncoder::Localized(l) => {
            let part = &l.partition;
            meta.push(("method", l.method.as_str().into()));
            meta.push(("scope", "localized".into()));
            meta.push(("n_pop", part.n_pop().to_string()));
            meta.push(("n_h", part.n_hidden().to_string()));
            meta.push(("patch_side", part.rf.patch_side.to_string()));
            let d = part.rf.dims;
            meta.push(("dims", format!("{} {} {}", d.height, d.width, d.channels)));
            let origins = Array2::from_shape_fn((part.n_pop(), 2), |(k, c)| {
                let o = part.rf.origins[k];
                (if c == 0 { o.0 } else { o.1 }) as f64
            });
            tensors.push(Tensor::from_matrix("origins", &origins));
            let sizes = Array1::from_iter(part.ranges.iter().map(|r| r.len() as f64));
            tensors.push(Tensor::from_vector("population_sizes", &sizes));
            for (k, m) in l.populations.iter().enumerate() {
                model_tensors(&format!("pop{k}."), m, &mut tensors);
            }
            if let Some(first) = l.populations.first() {
                model_metadata(first, &mut meta);
            }
        }
    }
    checkpoint::save(path, &tensors)?;
    let side = sidecar_path(path);
    fs::write(&side, checkpoint::format_key_values(meta)).map_err(|e| Error::io(&side, e))
}

fn meta_get<'a>(meta: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str> {
    meta.get(key)
        .map(String::as_str)
        .ok_or_else(|| Error::config(key, "missing from encoder metadata"))
}

fn meta_parse<T: std::str::FromStr>(meta: &BTreeMap<String, String>, key: &str) -> Result<T> {
    meta_get(meta, key)?
        .parse()
        .map_err(|_| Error::config(key, "unparsable value in encoder metadata"))
}

fn load_model(
    prefix: &str,
    method: UnsupMethod,
    tensors: &[Tensor],
    meta: &BTreeMap<String, String>,
) -> Result<PopulationModel> {
    let get = |name: &str| checkpoint::find(tensors, &format!("{prefix}{name}"));
    match method {
        UnsupMethod::Pca | UnsupMethod::Ica => {
            let whitener = match get("whitener") {
                Ok(t) => Some(t.to_matrix()?),
                Err(_) => None,
            };
            let status = get("fit_status")?.to_vector()?;
            if status.len() != 2 {
                return Err(Error::Dimension {
                    what: "fit_status",
                    expected: 2,
                    actual: status.len(),
                });
            }
            Ok(PopulationModel::Projection(ProjectionMatrix {
                p: get("W1")?.to_matrix()?,
                kind: if method == UnsupMethod::Pca {
                    ProjectionKind::Pca
                } else {
                    ProjectionKind::Ica
                },
                mean: get("mean")?.to_vector()?,
                whitener,
                explained_variance: get("explained_variance")?.to_vector()?,
                converged: status[0] != 0.0,
                iterations: status[1] as usize,
            }))
        }
        UnsupMethod::Sc => Ok(PopulationModel::Sparse(SparseCoder {
            w: get("W1")?.to_matrix()?,
            v: get("V1")?.to_matrix()?,
            a_mav: get("a_mav")?.to_vector()?,
            params: ScParams {
                lambda: meta_parse(meta, "lambda")?,
                alpha_w: meta_parse(meta, "alpha_w")?,
                alpha_v: meta_parse(meta, "alpha_v")?,
                step: meta_parse(meta, "step")?,
                n_iter: meta_parse(meta, "n_iter")?,
                tau_mav: meta_parse(meta, "tau_mav")?,
                presentations: meta_parse(meta, "presentations")?,
            },
            seen: meta_parse(meta, "seen")?,
        })),
    }
}

pub fn load_encoder(path: &Path) -> Result<UnsupEncoder> {
    let tensors = checkpoint::load(path)?;
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let meta = checkpoint::parse_key_values(&text)?;
    let method: UnsupMethod = meta_get(&meta, "method")?.parse()?;
    match meta_get(&meta, "scope")? {
        "global" => Ok(UnsupEncoder::Global(load_model("", method, &tensors, &meta)?)),
        "localized" => {
            let dims: Vec<usize> = meta_get(&meta, "dims")?
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| Error::config("dims", "expected three integers")))
                .collect::<Result<_>>()?;
            if dims.len() != 3 {
                return Err(Error::config("dims", "expected three integers"));
            }
            let dims = ImageDims::new(dims[0], dims[1], dims[2]);
            let patch_side: usize = meta_parse(&meta, "patch_side")?;
            let origins_t = checkpoint::find(&tensors, "origins")?.to_matrix()?;
            let origins = origins_t
                .rows()
                .into_iter()
                .map(|r| (r[0] as usize, r[1] as usize))
                .collect();
            let rf = ReceptiveFieldMap::from_origins(dims, patch_side, origins);
            let sizes = checkpoint::find(&tensors, "population_sizes")?.to_vector()?;
            let mut start = 0;
            let ranges = sizes
                .iter()
                .map(|&s| {
                    let r = start..start + s as usize;
                    start = r.end;
                    r
                })
                .collect();
            let populations = (0..rf.len())
                .map(|k| load_model(&format!("pop{k}."), method, &tensors, &meta))
                .collect::<Result<_>>()?;
            Ok(UnsupEncoder::Localized(LocalizedEncoder {
                method,
                partition: PopulationPartition { rf, ranges },
                populations,
            }))
        }
        other => Err(Error::config("scope", format!("unknown scope `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::seeded_rng;
    use rand::Rng as _;

    #[test]
    fn encoders_round_trip() {
        let dims = ImageDims::new(6, 6, 1);
        let mut rng = seeded_rng(0, 0);
        let data = Array2::from_shape_fn((50, 36), |_| rng.random_range(-0.5..0.5));
        let dir = tempfile::tempdir().unwrap();
        let opts = FitOptions {
            sc: ScParams {
                presentations: 50,
                ..ScParams::default()
            },
            ..FitOptions::default()
        };
        for method in [UnsupMethod::Pca, UnsupMethod::Ica, UnsupMethod::Sc] {
            let global = UnsupEncoder::Global(fit_global(data.view(), method, 5, opts).unwrap());
            let part = PopulationPartition::random(8, 3, dims, 3, 1).unwrap();
            let local = UnsupEncoder::Localized(fit_localized(data.view(), method, part, opts).unwrap());
            for (i, enc) in [global, local].into_iter().enumerate() {
                let path = dir.path().join(format!("{}-{i}.sbnw", method.as_str()));
                save_encoder(&path, &enc).unwrap();
                assert_eq!(load_encoder(&path).unwrap(), enc);
            }
        }
    }
}
