use std::io::{BufRead, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::als::RankOneFactor;
use super::design::{to_unit, Metric};
use super::legendre::legendre_all;
use crate::error::{Error, Result};
use crate::geometry::OfficeLayout;
use crate::scenario::{coordinate_ranges, latin_hypercube, NUM_COORDS};

const FORMAT_VERSION: u32 = 1;

/// A sum of weighted rank-one products of orthonormal Legendre expansions,
/// one per input dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct LraModel {
    pub metric: Metric,
    /// Maximum polynomial degree, shared by all dimensions.
    pub degree: usize,
    /// Weight of each rank-one term.
    pub b: Vec<f64>,
    pub factors: Vec<RankOneFactor>,
    /// Physical range of each input, mapped onto `[-1, 1]`.
    pub normalization: Vec<(f64, f64)>,
}

impl LraModel {
    pub fn rank(&self) -> usize {
        self.b.len()
    }

    pub fn dims(&self) -> usize {
        self.normalization.len()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dims() {
            return Err(Error::domain(format!(
                "model expects {} inputs, got {}",
                self.dims(),
                x.len()
            )));
        }
        if x.iter().any(|v| !(-1.0..=1.0).contains(v)) {
            return Err(Error::domain("model inputs must lie in [-1, 1]"));
        }
        Ok(())
    }

    /// Evaluates the expanded form, polynomial by polynomial.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        let mut basis = vec![0.0; self.degree + 1];
        let polys: Vec<Vec<f64>> = x
            .iter()
            .map(|&xi| {
                legendre_all(xi, &mut basis);
                basis.clone()
            })
            .collect();
        Ok(self
            .b
            .iter()
            .zip(&self.factors)
            .map(|(bl, f)| {
                bl * f
                    .z
                    .iter()
                    .zip(&polys)
                    .map(|(z, p)| z.iter().zip(p).map(|(a, b)| a * b).sum::<f64>())
                    .product::<f64>()
            })
            .sum())
    }

    /// Values of each rank-one term `w_l(x)` without its weight.
    pub fn rank_one_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut basis = vec![0.0; self.degree + 1];
        let mut w = vec![1.0; self.rank()];
        for (i, &xi) in x.iter().enumerate() {
            legendre_all(xi, &mut basis);
            for (wl, f) in w.iter_mut().zip(&self.factors) {
                *wl *= f.z[i].iter().zip(&basis).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        Ok(w)
    }

    /// Prediction from physical coordinates.
    pub fn predict_raw(&self, coords: &[f64]) -> Result<f64> {
        if coords.len() != self.dims() {
            return Err(Error::domain(format!(
                "model expects {} inputs, got {}",
                self.dims(),
                coords.len()
            )));
        }
        let mut x = Vec::with_capacity(coords.len());
        for (&c, &(lo, hi)) in coords.iter().zip(&self.normalization) {
            if !(lo..=hi).contains(&c) {
                return Err(Error::domain(format!("coordinate {c} outside [{lo}, {hi}]")));
            }
            x.push(to_unit(c, (lo, hi)));
        }
        self.predict(&x)
    }

    fn validate(&self) -> Result<()> {
        if self.b.len() != self.factors.len() || self.b.is_empty() {
            return Err(Error::config("model rank is inconsistent"));
        }
        for f in &self.factors {
            if f.z.len() != self.dims() || f.z.iter().any(|z| z.len() != self.degree + 1) {
                return Err(Error::config("model coefficient tensor has the wrong shape"));
            }
        }
        if self
            .b
            .iter()
            .chain(self.factors.iter().flat_map(|f| f.z.iter().flatten()))
            .any(|v| !v.is_finite())
        {
            return Err(Error::config("model coefficients must be finite"));
        }
        Ok(())
    }

    fn to_document(&self) -> ModelDocument {
        let mut z = Vec::new();
        for i in 0..self.dims() {
            for (l, f) in self.factors.iter().enumerate() {
                for (k, &v) in f.z[i].iter().enumerate() {
                    if v != 0.0 {
                        z.push((i, l, k, v));
                    }
                }
            }
        }
        ModelDocument {
            format_version: FORMAT_VERSION,
            metric: self.metric,
            dimensions: self.dims(),
            rank: self.rank(),
            degree: self.degree,
            normalization: self.normalization.iter().map(|&(lo, hi)| [lo, hi]).collect(),
            b: self.b.clone(),
            z,
        }
    }

    fn from_document(doc: ModelDocument) -> Result<Self> {
        if doc.format_version != FORMAT_VERSION {
            return Err(Error::config(format!(
                "unsupported model format version {}",
                doc.format_version
            )));
        }
        if doc.normalization.len() != doc.dimensions || doc.b.len() != doc.rank {
            return Err(Error::config("model header disagrees with its contents"));
        }
        let mut factors = vec![
            RankOneFactor {
                z: vec![vec![0.0; doc.degree + 1]; doc.dimensions]
            };
            doc.rank
        ];
        for (i, l, k, v) in doc.z {
            if i >= doc.dimensions || l >= doc.rank || k > doc.degree {
                return Err(Error::config(format!("coefficient index ({i}, {l}, {k}) out of range")));
            }
            factors[l].z[i][k] = v;
        }
        let model = Self {
            metric: doc.metric,
            degree: doc.degree,
            b: doc.b,
            factors,
            normalization: doc.normalization.iter().map(|r| (r[0], r[1])).collect(),
        };
        model.validate()?;
        Ok(model)
    }

    /// Writes the model as JSON preceded by the `provenance` comment line.
    pub fn write<W: Write>(&self, mut w: W, provenance: &str) -> std::io::Result<()> {
        writeln!(w, "{provenance}")?;
        serde_json::to_writer_pretty(&mut w, &self.to_document())?;
        writeln!(w)?;
        w.flush()
    }

    /// Reads a model, skipping leading `#` comment lines.
    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut body = String::new();
        let mut header = true;
        for line in r.lines() {
            let line = line.map_err(|e| Error::config(format!("cannot read model: {e}")))?;
            if header && line.trim_start().starts_with('#') {
                continue;
            }
            header = false;
            body.push_str(&line);
            body.push('\n');
        }
        let doc: ModelDocument =
            serde_json::from_str(&body).map_err(|e| Error::config(format!("malformed model document: {e}")))?;
        Self::from_document(doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(std::io::BufReader::new(file)).map_err(|e| match e {
            Error::Config(msg) => Error::config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    format_version: u32,
    metric: Metric,
    dimensions: usize,
    rank: usize,
    degree: usize,
    normalization: Vec<[f64; 2]>,
    b: Vec<f64>,
    /// Nonzero coefficients as `(dimension, rank term, degree, value)`.
    z: Vec<(usize, usize, usize, f64)>,
}

/// Predictions of `model` on `count` Latin-hypercube scenarios drawn with
/// `seed`, in draw order.
pub fn surrogate_sample(model: &LraModel, layout: &OfficeLayout, count: usize, seed: u64) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::domain("sample count must be at least 1"));
    }
    let ranges = coordinate_ranges(layout);
    if model.dims() != NUM_COORDS {
        return Err(Error::domain(format!(
            "model has {} inputs, scenarios have {NUM_COORDS}",
            model.dims()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    latin_hypercube(count, NUM_COORDS, &mut rng)
        .iter()
        .map(|u| {
            let coords: Vec<f64> = u
                .iter()
                .zip(&ranges)
                .map(|(v, (lo, hi))| lo + v * (hi - lo))
                .collect();
            model.predict_raw(&coords)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn constant_model(dims: usize, value: f64) -> LraModel {
        LraModel {
            metric: Metric::S95,
            degree: 2,
            b: vec![value],
            factors: vec![RankOneFactor::constant(dims, 2)],
            normalization: vec![(0.0, 10.0); dims],
        }
    }

    fn random_model(rng: &mut ChaCha8Rng, dims: usize, rank: usize, degree: usize) -> LraModel {
        LraModel {
            metric: Metric::Smean,
            degree,
            b: (0..rank).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            factors: (0..rank)
                .map(|_| RankOneFactor {
                    z: (0..dims)
                        .map(|_| {
                            (0..=degree)
                                .map(|_| if rng.gen::<f64>() < 0.3 { 0.0 } else { rng.gen_range(-1.0..1.0) })
                                .collect()
                        })
                        .collect(),
                })
                .collect(),
            normalization: (0..dims).map(|i| (i as f64, i as f64 + 10.0)).collect(),
        }
    }

    #[test]
    fn constant_factor_predicts_weight() {
        let m = constant_model(4, 2.0);
        assert_eq!(m.predict(&[0.3, -0.9, 1.0, -1.0]).unwrap(), 2.0);
    }

    #[test]
    fn sqrt3_x1() {
        let mut m = constant_model(3, 1.0);
        m.factors[0].z[0] = vec![0.0, 1.0, 0.0];
        let y = m.predict(&[0.4, 0.1, -0.2]).unwrap();
        assert!((y - 3f64.sqrt() * 0.4).abs() < 1e-15);
        assert!((y - 0.6928).abs() < 5e-5);
    }

    #[test]
    fn dimension_mismatch_is_domain_error() {
        let m = constant_model(3, 1.0);
        assert!(matches!(m.predict(&[0.0, 0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn product_and_expanded_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let m = random_model(&mut rng, 5, 3, 3);
            let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let w = m.rank_one_values(&x).unwrap();
            let product: f64 = m.b.iter().zip(&w).map(|(b, w)| b * w).sum();
            let expanded = m.predict(&x).unwrap();
            assert!((product - expanded).abs() <= 1e-13 * (1.0 + expanded.abs()));
        }
    }

    #[test]
    fn persistence_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let m = random_model(&mut rng, 6, 4, 3);
        let mut buf = Vec::new();
        m.write(&mut buf, "# emf-tradeoff test").unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# emf-tradeoff test\n"));
        assert!(text.contains("\"format_version\": 1"));
        let back = LraModel::read(buf.as_slice()).unwrap();
        assert_eq!(back, m);
        for _ in 0..10 {
            let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            assert_eq!(back.predict(&x).unwrap(), m.predict(&x).unwrap());
        }
    }

    #[test]
    fn rejects_bad_documents() {
        let m = constant_model(2, 1.0);
        let mut buf = Vec::new();
        m.write(&mut buf, "# x").unwrap();
        let text = String::from_utf8(buf).unwrap();
        let wrong_version = text.replace("\"format_version\": 1", "\"format_version\": 7");
        assert!(LraModel::read(wrong_version.as_bytes()).is_err());
        let out_of_range = r#"{"format_version": 1, "metric": "s95", "dimensions": 2, "rank": 1,
            "degree": 2, "normalization": [[0, 1], [0, 1]], "b": [1.0], "z": [[5, 0, 0, 1.0]]}"#;
        assert!(LraModel::read(out_of_range.as_bytes()).is_err());
    }

    #[test]
    fn constant_model_samples_are_constant() {
        let layout = OfficeLayout::default_office();
        let mut m = constant_model(NUM_COORDS, 0.25);
        m.normalization = coordinate_ranges(&layout);
        let s = surrogate_sample(&m, &layout, 100, 3).unwrap();
        assert!(s.iter().all(|v| *v == 0.25));
    }

    #[test]
    fn centered_model_has_zero_sample_mean() {
        let layout = OfficeLayout::default_office();
        let mut m = constant_model(NUM_COORDS, 1.0);
        m.normalization = coordinate_ranges(&layout);
        m.factors[0].z[0] = vec![0.0, 1.0, 0.0];
        let s = surrogate_sample(&m, &layout, 10_000, 5).unwrap();
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        assert!(mean.abs() < 0.02);
        assert_eq!(s, surrogate_sample(&m, &layout, 10_000, 5).unwrap());
    }
}
