//! Seeded random discrete instances.

use std::f64::consts::PI;

use bergman_core::measure::WeightFamily;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Check, MeasureDesc, Params, ScenarioConfig, SpanDesc};
use crate::error::HarnessError;
use crate::report::{RunMeta, RunReport, Tables};
use crate::runner::{merge, run_scenario, with_workers};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeBounds {
    pub min_nodes: usize,
    pub max_nodes: usize,
    /// `0` produces a single vanishing basis function, hence rank 0.
    pub max_dim: usize,
}

impl Default for SizeBounds {
    fn default() -> Self {
        Self {
            min_nodes: 2,
            max_nodes: 50,
            max_dim: 10,
        }
    }
}

pub const WEIGHT_RANGE: f64 = 2.0;
pub const MASS_RANGE: (f64, f64) = (0.1, 10.0);

pub const BATTERY_CHECKS: [Check; 4] = [Check::Structural, Check::Comparison, Check::Sweep, Check::Homotopy];

fn rng_for(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn disk_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f64; 2]> {
    (0..n)
        .map(|_| {
            let r = rng.random::<f64>().sqrt();
            let a = rng.random_range(0.0..2.0 * PI);
            [r * a.cos(), r * a.sin()]
        })
        .collect()
}

fn log_uniform_masses(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let (lo, hi) = (MASS_RANGE.0.ln(), MASS_RANGE.1.ln());
    (0..n).map(|_| rng.random_range(lo..hi).exp()).collect()
}

fn uniform_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-WEIGHT_RANGE..=WEIGHT_RANGE)).collect()
}

fn random_span(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> SpanDesc {
    if dim == 0 {
        return SpanDesc::Tabulated {
            values: vec![vec![[0.0, 0.0]]; n],
        };
    }
    if rng.random_bool(0.5) {
        SpanDesc::Monomials { degree: dim - 1 }
    } else {
        SpanDesc::Tabulated {
            values: (0..n)
                .map(|_| {
                    (0..dim)
                        .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
                        .collect()
                })
                .collect(),
        }
    }
}

/// Instance `index` of the battery seeded by `seed`. Independent of every
/// other index, so instances can be generated in any order.
pub fn generate_instance(seed: u64, index: u64, bounds: SizeBounds) -> ScenarioConfig {
    let mut rng = rng_for(seed, index);
    let n = rng.random_range(bounds.min_nodes.max(1)..=bounds.max_nodes.max(bounds.min_nodes.max(1)));
    let dim = if bounds.max_dim == 0 {
        0
    } else {
        rng.random_range(1..=bounds.max_dim)
    };
    let points = disk_points(&mut rng, n);
    let masses = log_uniform_masses(&mut rng, n);
    let phi = uniform_weights(&mut rng, n);
    let mut psi = uniform_weights(&mut rng, n);
    // A quarter of the instances tie the weights on some nodes.
    if rng.random_bool(0.25) {
        for (p, f) in psi.iter_mut().zip(&phi) {
            if rng.random_bool(0.5) {
                *p = *f;
            }
        }
    }
    let span = random_span(&mut rng, n, dim);
    ScenarioConfig {
        id: format!("battery-{seed}-{index:05}"),
        measure: MeasureDesc::Discrete { points, masses },
        span,
        phi: WeightFamily::Tabulated { values: phi },
        psi: WeightFamily::Tabulated { values: psi },
        checks: BATTERY_CHECKS.to_vec(),
        params: Params::default(),
        seed,
    }
}

/// Generates and checks `n_instances` instances. The first failing
/// instance is dumped in full.
pub fn run_battery(
    n_instances: usize,
    seed: u64,
    bounds: SizeBounds,
    tol_scale: f64,
    workers: Option<usize>,
) -> Result<RunReport, HarnessError> {
    if n_instances == 0 {
        return Err(HarnessError::Invalid("battery needs at least one instance".into()));
    }
    let results = with_workers(workers, || {
        (0..n_instances as u64)
            .into_par_iter()
            .map(|i| {
                let config = generate_instance(seed, i, bounds);
                run_scenario(&config, tol_scale).map(|o| (config, o))
            })
            .collect::<Vec<_>>()
    });
    let mut report = RunReport {
        meta: RunMeta::new("battery", Some(seed), n_instances, tol_scale),
        checks: Vec::new(),
        tables: Tables::default(),
        failure_dump: None,
        timings: Vec::new(),
    };
    for result in results {
        let (config, outcome) = result?;
        if report.failure_dump.is_none() && !outcome.passed() {
            report.failure_dump = Some(config.to_json());
        }
        merge(&mut report, outcome);
    }
    Ok(report)
}

/// Instance for the maximum-principle search: more nodes than basis
/// functions, `psi = phi + v` with `v` partly negative. Even indices let the
/// runner pick `Omega = {B_phi >= B_psi}`; odd indices draw a random proper
/// `Omega` and make `v >= 0` off it, so the boundary premise holds by
/// construction.
pub fn generate_max_principle_instance(seed: u64, index: u64) -> ScenarioConfig {
    let mut rng = rng_for(seed, index);
    let dim = rng.random_range(1..=SizeBounds::default().max_dim);
    let n = rng.random_range(dim + 1..=30);
    let points = disk_points(&mut rng, n);
    let masses = log_uniform_masses(&mut rng, n);
    let phi = uniform_weights(&mut rng, n);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let omega = if index.is_multiple_of(2) {
        None
    } else {
        let size = rng.random_range(1..n);
        let mut all: Vec<usize> = (0..n).collect();
        for i in 0..size {
            let j = rng.random_range(i..n);
            all.swap(i, j);
        }
        let mut omega = all[..size].to_vec();
        omega.sort_unstable();
        for (j, vj) in v.iter_mut().enumerate() {
            if omega.binary_search(&j).is_err() {
                *vj = vj.abs();
            }
        }
        Some(omega)
    };
    let psi = phi.iter().zip(&v).map(|(f, d)| f + d).collect();
    let span = random_span(&mut rng, n, dim);
    ScenarioConfig {
        id: format!("maxprinciple-{seed}-{index:05}"),
        measure: MeasureDesc::Discrete { points, masses },
        span,
        phi: WeightFamily::Tabulated { values: phi },
        psi: WeightFamily::Tabulated { values: psi },
        checks: vec![Check::Maxprinciple],
        params: Params {
            omega,
            ..Params::default()
        },
        seed,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxPrincipleSummary {
    pub instances: usize,
    /// Instances where both premises held, so the conclusion was tested.
    pub premises_hold: usize,
    pub counterexamples: usize,
    /// Instances where the two weights gave spaces of different rank.
    pub rank_mismatches: usize,
    /// First instance that failed for either reason.
    pub first_failure: Option<ScenarioConfig>,
}

impl MaxPrincipleSummary {
    pub fn passed(&self) -> bool {
        self.counterexamples == 0 && self.rank_mismatches == 0
    }
}

pub fn max_principle_search(
    n_instances: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<MaxPrincipleSummary, HarnessError> {
    let verdicts = with_workers(workers, || {
        (0..n_instances as u64)
            .into_par_iter()
            .map(|i| {
                let config = generate_max_principle_instance(seed, i);
                let mut outcome = run_scenario(&config, 1.0)?;
                let row = outcome.tables.maxprinciple.remove(0);
                Ok((config, row.verdict, outcome.passed()))
            })
            .collect::<Result<Vec<_>, HarnessError>>()
    })?;
    let mut summary = MaxPrincipleSummary {
        instances: n_instances,
        premises_hold: 0,
        counterexamples: 0,
        rank_mismatches: 0,
        first_failure: None,
    };
    for (config, verdict, passed) in verdicts {
        match verdict.as_str() {
            "conclusion-holds" => summary.premises_hold += 1,
            "counterexample" => {
                summary.premises_hold += 1;
                summary.counterexamples += 1;
            }
            "rank-mismatch" => summary.rank_mismatches += 1,
            _ => {}
        }
        if !passed {
            summary.first_failure.get_or_insert(config);
        }
    }
    Ok(summary)
}
