//! Runtime scaling of the constructors.
//!
//! For each `n`, a binomial table with support `0..n` is privatized and `z`
//! is floored so that every column is active; only the construction itself
//! is timed. A warm-up run is discarded and the median of the timed repeats
//! is reported.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::synthetic::Synthetic;
use super::{construct_stage, privatize_stage, split_budget, ConstructorKind, PipelineConfig};
use crate::counts::{distribution_of, histogram_of, CountDistribution};
use crate::error::{invalid, Result};
use crate::pipeline::experiment::median;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub constructor: String,
    pub n: usize,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub constructors: Vec<ConstructorKind>,
    pub n_values: Vec<usize>,
    pub epsilon_total: f64,
    pub seed: u64,
    pub records: usize,
    /// Timed repeats per point; the median is reported.
    pub repeats: usize,
}

/// Parses `a:b:step` into `a, a + step, ...` up to and including `b`.
pub fn parse_range(text: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = text.split(':').collect();
    let parse = |s: &str| s.trim().parse::<usize>().map_err(|_| crate::Error::InvalidInput(format!("bad range {text:?}")));
    let (a, b, step) = match parts.as_slice() {
        [a, b] => (parse(a)?, parse(b)?, 1),
        [a, b, s] => (parse(a)?, parse(b)?, parse(s)?),
        _ => return invalid(format!("range must be a:b or a:b:step, got {text:?}")),
    };
    if step == 0 || a == 0 || a > b {
        return invalid(format!("empty or invalid range {text:?}"));
    }
    Ok((a..=b).step_by(step).collect())
}

pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if cfg.repeats == 0 {
        return invalid("repeats must be positive");
    }
    let (_, e1, e2) = split_budget(cfg.epsilon_total, None)?;
    let mut rows = Vec::new();
    for &n in &cfg.n_values {
        let table = Synthetic::Binomial { size: (n - 1) as u64, p: 0.5, records: cfg.records }.generate(cfg.seed)?;
        let zeta: CountDistribution<f64> = distribution_of(&histogram_of(&table, n)?)?;
        let base = PipelineConfig { floor_z: true, ..PipelineConfig::new(cfg.epsilon_total, n, cfg.constructors[0], cfg.seed) };
        let z = privatize_stage(&zeta, cfg.records as u64, e1, &base)?;
        for &kind in &cfg.constructors {
            if !kind.is_two_stage() {
                return invalid(format!("{} is not a stage-two constructor", kind.name()));
            }
            let pc = PipelineConfig { constructor: kind, ..base.clone() };
            construct_stage(&z, e2, &pc)?;
            let mut times = Vec::with_capacity(cfg.repeats);
            for _ in 0..cfg.repeats {
                let t0 = Instant::now();
                construct_stage(&z, e2, &pc)?;
                times.push(t0.elapsed().as_secs_f64() * 1e3);
            }
            rows.push(BenchRow { constructor: kind.name().to_string(), n, wall_ms: median(&times) });
        }
    }
    Ok(rows)
}

/// Writes `constructor,n,wall_ms` CSV.
pub fn write_bench_csv<W: Write>(rows: &[BenchRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Least-squares slope of `ln(wall_ms)` against `ln(n)` for one constructor.
pub fn loglog_slope(rows: &[BenchRow], constructor: &str) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.constructor == constructor && r.wall_ms > 0.0)
        .map(|r| ((r.n as f64).ln(), r.wall_ms.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}
