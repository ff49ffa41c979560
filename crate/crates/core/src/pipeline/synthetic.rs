//! Synthetic count tables for experiments.

use rand::Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Binomial, Distribution};

use crate::counts::CountTable;
use crate::error::{invalid, Result};
use crate::rng;

/// Generator for a synthetic table. Counts lie in `0..n()`.
#[derive(Clone, Debug, PartialEq)]
pub enum Synthetic {
    /// `records` draws from `Binomial(size, p)`.
    Binomial { size: u64, p: f64, records: usize },
    /// `records` uniform draws from `0..support`.
    Uniform { support: usize, records: usize },
    /// Geometric profile rising to the right: `P(i) = ratio P(i + 1)`.
    LeftSkewed { support: usize, ratio: f64, records: usize },
    /// Geometric profile falling to the right: `P(i + 1) = ratio P(i)`.
    RightSkewed { support: usize, ratio: f64, records: usize },
    /// `records_each` draws from each of `Binomial(size, p_high)` and `Binomial(size, p_low)`.
    Bimodal { size: u64, p_low: f64, p_high: f64, records_each: usize },
    /// Uniform draws plus extra zeros.
    ZeroInflated { support: usize, uniform_records: usize, zeros: usize },
    /// Uniform draws plus extra copies of the top value.
    TopInflated { support: usize, uniform_records: usize, tops: usize },
}

impl Synthetic {
    pub const PRESETS: [&'static str; 7] =
        ["binomial", "uniform", "left-skewed", "right-skewed", "bimodal", "zero-inflated", "top-inflated"];

    /// Named preset datasets.
    pub fn preset(name: &str) -> Result<Self> {
        Ok(match name {
            "binomial" => Synthetic::Binomial { size: 20, p: 0.5, records: 10_000 },
            "uniform" => Synthetic::Uniform { support: 30, records: 3000 },
            "left-skewed" => Synthetic::LeftSkewed { support: 70, ratio: 139.0 / 140.0, records: 10_000 },
            "right-skewed" => Synthetic::RightSkewed { support: 70, ratio: 139.0 / 140.0, records: 10_000 },
            "bimodal" => Synthetic::Bimodal { size: 39, p_low: 0.3, p_high: 0.7, records_each: 10_000 },
            "zero-inflated" => Synthetic::ZeroInflated { support: 80, uniform_records: 9800, zeros: 200 },
            "top-inflated" => Synthetic::TopInflated { support: 80, uniform_records: 9900, tops: 100 },
            other => return invalid(format!("unknown dataset {other:?}")),
        })
    }

    /// Number of count values, one more than the largest possible count.
    pub fn n(&self) -> usize {
        match *self {
            Synthetic::Binomial { size, .. } | Synthetic::Bimodal { size, .. } => size as usize + 1,
            Synthetic::Uniform { support, .. }
            | Synthetic::LeftSkewed { support, .. }
            | Synthetic::RightSkewed { support, .. }
            | Synthetic::ZeroInflated { support, .. }
            | Synthetic::TopInflated { support, .. } => support,
        }
    }

    pub fn generate(&self, seed: u64) -> Result<CountTable> {
        let mut r = rng::seeded(seed);
        let counts: Vec<u64> = match *self {
            Synthetic::Binomial { size, p, records } => binomial(size, p, records, &mut r)?,
            Synthetic::Uniform { support, records } => uniform(support, records, &mut r)?,
            Synthetic::LeftSkewed { support, ratio, records } => {
                geometric_profile(support, records, &mut r, |i| ratio.powi((support - 1 - i) as i32))?
            }
            Synthetic::RightSkewed { support, ratio, records } => {
                geometric_profile(support, records, &mut r, |i| ratio.powi(i as i32))?
            }
            Synthetic::Bimodal { size, p_low, p_high, records_each } => {
                let mut v = binomial(size, p_high, records_each, &mut r)?;
                v.extend(binomial(size, p_low, records_each, &mut r)?);
                v
            }
            Synthetic::ZeroInflated { support, uniform_records, zeros } => {
                let mut v = uniform(support, uniform_records, &mut r)?;
                v.extend(std::iter::repeat_n(0, zeros));
                v
            }
            Synthetic::TopInflated { support, uniform_records, tops } => {
                let mut v = uniform(support, uniform_records, &mut r)?;
                v.extend(std::iter::repeat_n((support - 1) as u64, tops));
                v
            }
        };
        CountTable::from_counts(&counts, self.n())
    }
}

fn binomial<R: Rng>(size: u64, p: f64, records: usize, r: &mut R) -> Result<Vec<u64>> {
    let d = Binomial::new(size, p).map_err(|e| crate::Error::InvalidInput(e.to_string()))?;
    Ok((0..records).map(|_| d.sample(r)).collect())
}

fn uniform<R: Rng>(support: usize, records: usize, r: &mut R) -> Result<Vec<u64>> {
    if support == 0 {
        return invalid("support must be positive");
    }
    Ok((0..records).map(|_| r.random_range(0..support as u64)).collect())
}

fn geometric_profile<R: Rng>(support: usize, records: usize, r: &mut R, weight: impl Fn(usize) -> f64) -> Result<Vec<u64>> {
    let d = WeightedIndex::new((0..support).map(weight)).map_err(|e| crate::Error::InvalidInput(e.to_string()))?;
    Ok((0..records).map(|_| d.sample(r) as u64).collect())
}
