//! Uniform random inputs and reproducible, level/sample-keyed draw streams.
//!
//! Every correction sample `(level, index)` owns its own ChaCha8 stream, so the
//! draws do not depend on evaluation order or on how work is split between
//! threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const INDEX_BITS: u32 = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformParam {
    pub name: String,
    pub mean: f64,
    pub half_width: f64,
}

impl UniformParam {
    pub fn new(name: impl Into<String>, mean: f64, half_width: f64) -> Self {
        Self {
            name: name.into(),
            mean,
            half_width,
        }
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width
    }

    /// Maps `u` in `[0, 1)` onto the support.
    pub fn map_unit(&self, u: f64) -> f64 {
        self.mean + (2.0 * u - 1.0) * self.half_width
    }
}

/// Independent uniform parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<UniformParam>", into = "Vec<UniformParam>")]
pub struct RandomInputModel {
    params: Vec<UniformParam>,
}

impl RandomInputModel {
    pub fn new(params: Vec<UniformParam>) -> Result<Self> {
        for p in &params {
            if !p.mean.is_finite() || !p.half_width.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "parameter '{}' is not finite",
                    p.name
                )));
            }
            if p.half_width < 0.0 {
                return Err(Error::InvalidModel(format!(
                    "parameter '{}' has negative half-width {}",
                    p.name, p.half_width
                )));
            }
        }
        Ok(Self { params })
    }

    pub fn params(&self) -> &[UniformParam] {
        &self.params
    }

    pub fn dimension(&self) -> usize {
        self.params.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    /// The mean input `mu_Y`.
    pub fn nominal(&self) -> SampleVector {
        SampleVector {
            values: self.params.iter().map(|p| p.mean).collect(),
            level: 0,
            index: 0,
        }
    }

    pub fn sample(&self, stream: &SeededStream) -> SampleVector {
        let mut rng = stream.rng();
        let values = self
            .params
            .iter()
            .map(|p| p.map_unit(rng.gen::<f64>()))
            .collect();
        SampleVector {
            values,
            level: stream.level,
            index: stream.index,
        }
    }

    /// Builds a sample from explicit unit-interval coordinates.
    pub fn sample_from_unit(&self, unit: &[f64], level: usize, index: u64) -> Result<SampleVector> {
        if unit.len() != self.params.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} unit coordinates, got {}",
                self.params.len(),
                unit.len()
            )));
        }
        Ok(SampleVector {
            values: self
                .params
                .iter()
                .zip(unit)
                .map(|(p, &u)| p.map_unit(u))
                .collect(),
            level,
            index,
        })
    }

    pub fn contains(&self, y: &SampleVector) -> bool {
        y.values.len() == self.params.len()
            && self
                .params
                .iter()
                .zip(&y.values)
                .all(|(p, &v)| v >= p.lower() && v <= p.upper())
    }
}

impl TryFrom<Vec<UniformParam>> for RandomInputModel {
    type Error = Error;
    fn try_from(v: Vec<UniformParam>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<RandomInputModel> for Vec<UniformParam> {
    fn from(m: RandomInputModel) -> Self {
        m.params
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleVector {
    pub values: Vec<f64>,
    pub level: usize,
    pub index: u64,
}

impl SampleVector {
    pub fn from_values(values: Vec<f64>) -> Self {
        Self {
            values,
            level: 0,
            index: 0,
        }
    }
}

/// Immutable key of one reproducible draw sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeededStream {
    pub master_seed: u64,
    pub level: usize,
    pub index: u64,
}

impl SeededStream {
    /// A fresh generator positioned at the start of the stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(((self.level as u64) << INDEX_BITS) | self.index);
        rng
    }

    pub fn uniforms(&self, n: usize) -> Vec<f64> {
        let mut rng = self.rng();
        (0..n).map(|_| rng.gen::<f64>()).collect()
    }
}

/// Stream for correction sample `index` on `level`.
///
/// Indices must stay below 2^40 and levels below 2^24.
pub fn substream(master_seed: u64, level: usize, index: u64) -> SeededStream {
    debug_assert!(index < (1 << INDEX_BITS));
    debug_assert!((level as u64) < (1 << (64 - INDEX_BITS)));
    SeededStream {
        master_seed,
        level,
        index,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coax_model() -> RandomInputModel {
        RandomInputModel::new(vec![
            UniformParam::new("r1", 12.7e-3, 2.54e-3),
            UniformParam::new("current", 100.0, 10.0),
            UniformParam::new("mu_r", 1000.0, 400.0),
        ])
        .unwrap()
    }

    #[test]
    fn midpoint_maps_to_mean() {
        let m = coax_model();
        let y = m.sample_from_unit(&[0.5, 0.5, 0.5], 0, 0).unwrap();
        assert_eq!(y.values, vec![12.7e-3, 100.0, 1000.0]);
    }

    #[test]
    fn zero_width_is_degenerate() {
        let m = RandomInputModel::new(vec![
            UniformParam::new("a", 3.0, 0.0),
            UniformParam::new("b", -1.5, 0.0),
        ])
        .unwrap();
        for i in 0..20 {
            assert_eq!(m.sample(&substream(9, 2, i)).values, vec![3.0, -1.5]);
        }
    }

    #[test]
    fn negative_half_width_rejected() {
        let err = RandomInputModel::new(vec![UniformParam::new("a", 1.0, -0.1)]).unwrap_err();
        assert!(matches!(err, Error::InvalidModel(_)));
    }

    #[test]
    fn coax_draws_stay_in_support() {
        let m = coax_model();
        for i in 0..5000 {
            let y = m.sample(&substream(1234, i as usize % 4, i));
            assert!(y.values[0] >= 10.16e-3 && y.values[0] <= 15.24e-3);
            assert!(y.values[1] >= 90.0 && y.values[1] <= 110.0);
            assert!(y.values[2] >= 600.0 && y.values[2] <= 1400.0);
            assert!(m.contains(&y));
        }
    }

    #[test]
    fn same_key_same_draws() {
        let a = substream(7, 0, 0).uniforms(64);
        let b = substream(7, 0, 0).uniforms(64);
        assert_eq!(
            a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn different_level_different_draws() {
        assert_ne!(substream(7, 1, 0).uniforms(8), substream(7, 0, 0).uniforms(8));
        assert_ne!(substream(8, 0, 0).uniforms(8), substream(7, 0, 0).uniforms(8));
    }

    #[test]
    fn neighbouring_indices_uncorrelated() {
        let n = 10_000;
        let a = substream(7, 0, 0).uniforms(n);
        let b = substream(7, 0, 1).uniforms(n);
        let ma = a.iter().sum::<f64>() / n as f64;
        let mb = b.iter().sum::<f64>() / n as f64;
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for (x, y) in a.iter().zip(&b) {
            sab += (x - ma) * (y - mb);
            saa += (x - ma) * (x - ma);
            sbb += (y - mb) * (y - mb);
        }
        let corr = sab / (saa * sbb).sqrt();
        assert!(corr.abs() < 0.05, "correlation {corr}");
    }

    #[test]
    fn empirical_means_within_bound() {
        let m = coax_model();
        let n = 100_000;
        let mut sums = [0.0; 3];
        for i in 0..n {
            let y = m.sample(&substream(42, 0, i as u64));
            for (s, v) in sums.iter_mut().zip(&y.values) {
                *s += v;
            }
        }
        for (p, s) in m.params().iter().zip(sums) {
            let bound = 4.0 * p.half_width / (12.0 * n as f64).sqrt();
            assert!((s / n as f64 - p.mean).abs() <= bound, "{}", p.name);
        }
    }

    #[test]
    fn model_roundtrips_through_json() {
        let m = coax_model();
        let s = serde_json::to_string(&m).unwrap();
        let back: RandomInputModel = serde_json::from_str(&s).unwrap();
        assert_eq!(m, back);
        assert!(serde_json::from_str::<RandomInputModel>(
            r#"[{"name":"a","mean":1.0,"half_width":-1.0}]"#
        )
        .is_err());
    }
}
