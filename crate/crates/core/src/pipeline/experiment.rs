//! Replicated runs comparing constructors on one table.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{construct_stage, privatize_stage, run_two_stage, split_budget, ConstructorKind, PipelineConfig};
use crate::counts::{apply_mechanism, distribution_of, histogram_of, CountDistribution, CountTable};
use crate::error::Result;
use crate::metrics::distribution_distance;
use crate::rng;

/// Default number of replicates.
pub const DEFAULT_REPLICATES: usize = 100;

/// Outcome of one constructor on one replicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub replicate: usize,
    pub constructor: String,
    pub wasserstein1: f64,
    pub ks: f64,
    pub tv: f64,
    /// `<W, T>`; absent for the sampling baselines.
    pub expected_count_error: Option<f64>,
}

/// Runs every constructor on `replicates` independent seeds derived from
/// `base.seed`. Two-stage constructors in one replicate share the same
/// private estimate `z`.
pub fn run_experiment(
    table: &CountTable,
    constructors: &[ConstructorKind],
    base: &PipelineConfig,
    replicates: usize,
) -> Result<Vec<ExperimentRow>> {
    let hist = histogram_of(table, base.n)?;
    let zeta: CountDistribution<f64> = distribution_of(&hist)?;
    let records = table.len() as u64;
    let (_, e1, e2) = split_budget(base.epsilon_total, base.split)?;
    let mut rows = Vec::new();
    for rep in 0..replicates {
        let seed = rng::derive_seed(base.seed, rep as u64);
        let cfg = PipelineConfig { seed, ..base.clone() };
        let z = if constructors.iter().any(|c| c.is_two_stage()) {
            Some(privatize_stage(&zeta, records, e1, &cfg)?)
        } else {
            None
        };
        for &kind in constructors {
            let cfg = PipelineConfig { constructor: kind, ..cfg.clone() };
            let (released, expected) = if kind.is_two_stage() {
                let built = construct_stage(z.as_ref().expect("computed above"), e2, &cfg)?;
                let out = apply_mechanism(table, &built.matrix, rng::derive_seed(seed, 3))?;
                (out, Some(built.expected_count_error))
            } else {
                let out = run_two_stage(table, &cfg)?;
                (out.table, out.report.expected_count_error)
            };
            let dist: CountDistribution<f64> = distribution_of(&histogram_of(&released, base.n)?)?;
            let d = distribution_distance(zeta.probs(), dist.probs())?;
            rows.push(ExperimentRow {
                replicate: rep,
                constructor: kind.name().to_string(),
                wasserstein1: d.wasserstein1,
                ks: d.ks,
                tv: d.tv,
                expected_count_error: expected,
            });
        }
    }
    Ok(rows)
}

/// Writes rows as CSV.
pub fn write_experiment_csv<W: Write>(rows: &[ExperimentRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Median of a non-empty slice (mean of the middle pair for even lengths).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
