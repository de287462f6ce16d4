//! Reproducible sampling of spherical normal and multivariate t data.
//!
//! Every replication draws from its own ChaCha stream and every row starts at
//! a fixed word offset inside that stream, so a sample depends only on
//! `(seed, replication, row)` and never on how work is scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};

/// Stream words reserved per row.
const ROW_WORDS: u128 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Normal,
    /// Multivariate t with `df` degrees of freedom and identity scatter.
    T { df: u32 },
}

impl Family {
    pub fn label(&self) -> String {
        match self {
            Family::Normal => "normal".to_string(),
            Family::T { df } => format!("t{df}"),
        }
    }

    fn tag(&self) -> u64 {
        match self {
            Family::Normal => 0,
            Family::T { df } => 1 + u64::from(*df),
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "normal" {
            return Ok(Family::Normal);
        }
        let df = s
            .strip_prefix('t')
            .and_then(|d| d.parse::<u32>().ok())
            .filter(|d| *d >= 1)
            .ok_or_else(|| Error::InvalidInput(format!("unknown family {s:?}; use normal or tN")))?;
        Ok(Family::T { df })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimSpec {
    pub n: usize,
    pub p: usize,
    pub family: Family,
    pub seed: u64,
    pub replications: usize,
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 || self.p < 1 || self.replications < 1 {
            return Err(Error::InvalidInput(format!(
                "simulation needs positive n, p and replications: {self:?}"
            )));
        }
        if let Family::T { df: 0 } = self.family {
            return Err(Error::InvalidInput("t family needs df ≥ 1".into()));
        }
        Ok(())
    }
}

/// SplitMix64 finalizer, used to derive independent seeds from tags.
pub fn mix_seed(seed: u64, tags: &[u64]) -> u64 {
    let mut x = seed;
    for &t in tags {
        x = x.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(t);
        x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        x ^= x >> 31;
    }
    x
}

/// Marsaglia's polar method; yields standard normals in pairs.
struct PolarNormal<'a> {
    rng: &'a mut ChaCha8Rng,
    spare: Option<f64>,
}

impl PolarNormal<'_> {
    fn next(&mut self) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        loop {
            let u = 2.0 * self.rng.random::<f64>() - 1.0;
            let v = 2.0 * self.rng.random::<f64>() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * f);
                return u * f;
            }
        }
    }
}

/// Replication `replication` of `spec`, bit-identical for a fixed
/// `(seed, replication)`.
pub fn sample(spec: &SimSpec, replication: usize) -> Result<DataMatrix> {
    spec.validate()?;
    if spec.p < 2 {
        return Err(Error::InvalidInput("samples need p ≥ 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(replication as u64);
    let mut values = Vec::with_capacity(spec.n * spec.p);
    for row in 0..spec.n {
        rng.set_word_pos(row as u128 * ROW_WORDS);
        let mut normals = PolarNormal {
            rng: &mut rng,
            spare: None,
        };
        let start = values.len();
        values.extend((0..spec.p).map(|_| normals.next()));
        if let Family::T { df } = spec.family {
            let chi2: f64 = (0..df).map(|_| normals.next().powi(2)).sum();
            let scale = (chi2 / f64::from(df)).sqrt().recip();
            values[start..].iter_mut().for_each(|v| *v *= scale);
        }
    }
    DataMatrix::new(spec.n, spec.p, values)
}

/// Seed for one `(n, p, family)` cell of a study.
pub fn cell_seed(seed: u64, n: usize, p: usize, family: Family) -> u64 {
    mix_seed(seed, &[n as u64, p as u64, family.tag()])
}
