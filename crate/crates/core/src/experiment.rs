//! Sweeps and robustness runs over a [`Scenario`], producing flat result rows.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::bcd::{algorithm1, BcdConfig};
use crate::benchmarks::{dynamic_ris_baseline, pso_solve, quantized_search, single_layer_baseline, SingleLayerSolver};
use crate::design::Design;
use crate::error::{MisError, Result};
use crate::manifold::{rcg_solve_p5, rcg_solve_p7};
use crate::rate::{Objective, RateReport};
use crate::robustness::{degradation_curve, RobustnessSpec};
use crate::scenario::{Instance, Scenario, Scheme};

/// One CSV row. Column order is the output contract.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub scheme: String,
    pub sweep_axis: String,
    pub sweep_value: f64,
    pub seed: u64,
    /// Configured objective in bit/s/Hz: the minimum rate, or the sum of rates.
    pub objective_bits_hz: f64,
    pub min_rate: f64,
    /// `(T/K) Σ_k r_k`.
    pub throughput: f64,
    pub iters: usize,
    pub wall_ms: Option<f64>,
    pub converged: bool,
    pub notes: String,
}

/// Result of one scheme on one instance, before it is flattened into a row.
#[derive(Debug, Clone)]
pub struct Outcome {
    /// Static design; `None` for the per-user dynamic surface.
    pub design: Option<Design>,
    /// Jensen rate of each user.
    pub rates: Vec<f64>,
    pub iters: usize,
    pub converged: bool,
    pub notes: Vec<String>,
    pub wall_ms: f64,
}

/// Sum of rates or minimum rate of a rate vector.
pub fn objective_value(rates: &[f64], objective: Objective) -> f64 {
    match objective {
        Objective::MinRate => rates.iter().copied().fold(f64::INFINITY, f64::min),
        Objective::Throughput => rates.iter().sum(),
    }
}

fn bcd_cfg(scenario: &Scenario, objective: Objective) -> BcdConfig {
    BcdConfig {
        objective,
        ..scenario.solvers.bcd.clone()
    }
}

/// Run one scheme on a built instance.
pub fn solve(scenario: &Scenario, inst: &Instance, scheme: Scheme, seed: u64) -> Result<Outcome> {
    let clock = Instant::now();
    let obj = scenario.objective;
    let stats = &inst.stats;
    let mut notes = Vec::new();
    let (design, rates, iters, converged): (Option<Design>, Vec<f64>, usize, bool) = match scheme {
        Scheme::Bcd => {
            let r = algorithm1(stats, &inst.patterns, &bcd_cfg(scenario, obj), seed)?;
            if r.stalls > 0 {
                notes.push(format!("subsolver-stalls={}", r.stalls));
            }
            (Some(r.design), r.report.per_user, r.iterations, r.converged)
        }
        Scheme::Rcg => {
            if obj != Objective::Throughput {
                notes.push("rcg maximizes throughput".to_string());
            }
            let r = rcg_solve_p5(stats, &inst.patterns, &scenario.solvers.rcg, seed)?;
            (Some(r.design), r.report.per_user, r.iterations, r.converged)
        }
        Scheme::RcgElementwise => {
            if inst.n == 0 {
                return Err(MisError::config("rcg-elementwise needs an MS2"));
            }
            if obj != Objective::Throughput {
                notes.push("rcg-elementwise maximizes throughput".to_string());
            }
            // Warm start from the block design of the throughput variant of BCD.
            let warm = algorithm1(stats, &inst.patterns, &bcd_cfg(scenario, Objective::Throughput), seed)?;
            let r = rcg_solve_p7(stats, inst.n, &scenario.solvers.elementwise, seed, Some(&warm.design))?;
            if r.kept_warm {
                notes.push("kept-warm-start".to_string());
            }
            (Some(r.design), r.report.per_user, warm.iterations + r.iterations, r.converged)
        }
        Scheme::Pso => {
            let cfg = crate::benchmarks::PsoConfig {
                objective: obj,
                ..scenario.solvers.pso.clone()
            };
            let r = pso_solve(stats, &inst.patterns, &cfg, seed)?;
            (Some(r.design), r.report.per_user, cfg.iterations, true)
        }
        Scheme::Qsearch => {
            let cfg = crate::benchmarks::QuantizedSearchConfig {
                objective: obj,
                ..scenario.solvers.qsearch.clone()
            };
            let r = quantized_search(stats, &inst.patterns, &cfg, seed)?;
            if !r.exhaustive {
                notes.push(format!("sampled={}", r.evaluated));
            }
            (Some(r.design), r.report.per_user, r.evaluated as usize, true)
        }
        Scheme::Single => {
            let solver = match obj {
                Objective::MinRate => SingleLayerSolver::Bcd(scenario.solvers.bcd.clone()),
                Objective::Throughput => SingleLayerSolver::Rcg(scenario.solvers.rcg),
            };
            let r = single_layer_baseline(stats, &solver, obj, seed)?;
            (Some(r.design), r.report.per_user, 0, true)
        }
        Scheme::Dynamic => {
            let r = dynamic_ris_baseline(stats, &scenario.solvers.rcg, scenario.solvers.dynamic_starts, seed)?;
            (None, r.report.per_user, 0, true)
        }
    };
    Ok(Outcome {
        design,
        rates,
        iters,
        converged,
        notes,
        wall_ms: clock.elapsed().as_secs_f64() * 1e3,
    })
}

fn fmt_notes(notes: &[String]) -> String {
    notes.join(";")
}

fn row_from(scenario: &Scenario, scheme: Scheme, axis: &str, value: f64, seed: u64, out: Result<Outcome>, time: f64) -> Row {
    let wall = |ms: f64| scenario.output.record_wall_time.then_some(ms);
    match out {
        Ok(o) => {
            let report = RateReport::from_rates(o.rates.clone(), time);
            Row {
                scheme: scheme.name().to_string(),
                sweep_axis: axis.to_string(),
                sweep_value: value,
                seed,
                objective_bits_hz: objective_value(&o.rates, scenario.objective),
                min_rate: report.min_rate,
                throughput: report.throughput,
                iters: o.iters,
                wall_ms: wall(o.wall_ms),
                converged: o.converged,
                notes: fmt_notes(&o.notes),
            }
        }
        Err(e) => Row {
            scheme: scheme.name().to_string(),
            sweep_axis: axis.to_string(),
            sweep_value: value,
            seed,
            objective_bits_hz: f64::NAN,
            min_rate: f64::NAN,
            throughput: f64::NAN,
            iters: 0,
            wall_ms: None,
            converged: false,
            notes: format!("error: {e}"),
        },
    }
}

/// Ergodic (Monte Carlo) counterpart of an outcome's Jensen rates. The dynamic surface
/// keeps no static design and gets no note.
fn ergodic_note(inst: &Instance, o: &Outcome, trials: usize, seed: u64, objective: Objective) -> Result<String> {
    let Some(d) = &o.design else {
        return Ok(String::new());
    };
    let rates = d.ergodic(&inst.stats, trials, seed, inst.time)?.0.per_user;
    let r = RateReport::from_rates(rates.clone(), inst.time);
    Ok(format!(
        "ergodic_objective={};ergodic_min_rate={};ergodic_throughput={}",
        objective_value(&rates, objective),
        r.min_rate,
        r.throughput
    ))
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| MisError::config(format!("cannot start worker pool: {e}")))
}

/// Run every scheme at every sweep value and seed. Rows are ordered by sweep value, seed,
/// then scheme as configured, independent of the worker count.
pub fn run_sweep(scenario: &Scenario, workers: usize) -> Result<Vec<Row>> {
    scenario.validate()?;
    let axis = scenario.sweep.axis.name();
    let tasks: Vec<(f64, u64)> = scenario
        .sweep
        .values
        .iter()
        .flat_map(|&v| scenario.seeds.iter().map(move |&s| (v, s)))
        .collect();
    let run = || {
        tasks
            .par_iter()
            .map(|&(value, seed)| -> Result<Vec<Row>> {
                let point = scenario.at(value)?;
                let inst = point.instance(seed)?;
                Ok(point
                    .schemes
                    .iter()
                    .map(|&scheme| {
                        let mut out = solve(&point, &inst, scheme, seed);
                        if point.ergodic_trials > 0 {
                            if let Ok(o) = &mut out {
                                match ergodic_note(&inst, o, point.ergodic_trials, seed, point.objective) {
                                    Ok(n) if !n.is_empty() => o.notes.push(n),
                                    Ok(_) => {}
                                    Err(e) => o.notes.push(format!("ergodic error: {e}")),
                                }
                            }
                        }
                        row_from(&point, scheme, axis, value, seed, out, inst.time)
                    })
                    .collect())
            })
            .collect::<Result<Vec<_>>>()
    };
    let rows = if workers == 0 { run()? } else { pool(workers)?.install(run)? };
    Ok(rows.into_iter().flatten().collect())
}

/// Freeze the nominal design of each scheme (at the first sweep value) and report its mean
/// degradation over the magnitude grid of `spec`. The per-user dynamic surface has no static
/// design and is skipped with a note.
pub fn run_robustness(scenario: &Scenario, spec: &RobustnessSpec, workers: usize) -> Result<Vec<Row>> {
    scenario.validate()?;
    spec.validate()?;
    let point = scenario.at(scenario.sweep.values[0])?;
    let axis = spec.family.name();
    let run = || {
        point
            .seeds
            .par_iter()
            .map(|&seed| -> Result<Vec<Row>> {
                let inst = point.instance(seed)?;
                let mut rows = Vec::new();
                for &scheme in &point.schemes {
                    let nominal = solve(&point, &inst, scheme, seed);
                    let design = match nominal {
                        Ok(Outcome {
                            design: Some(d), iters, converged, ..
                        }) => (d, iters, converged),
                        Ok(_) => {
                            rows.push(row_from(
                                &point,
                                scheme,
                                axis,
                                f64::NAN,
                                seed,
                                Err(MisError::config("no static design to freeze")),
                                inst.time,
                            ));
                            continue;
                        }
                        Err(e) => {
                            rows.push(row_from(&point, scheme, axis, f64::NAN, seed, Err(e), inst.time));
                            continue;
                        }
                    };
                    let (d, iters, converged) = design;
                    let curve = degradation_curve(&point, &inst, &d, spec, seed)?;
                    for p in curve {
                        let k = inst.stats.users() as f64;
                        rows.push(Row {
                            scheme: scheme.name().to_string(),
                            sweep_axis: axis.to_string(),
                            sweep_value: p.magnitude,
                            seed,
                            objective_bits_hz: match point.objective {
                                Objective::MinRate => p.min_rate,
                                Objective::Throughput => p.throughput * k / inst.time,
                            },
                            min_rate: p.min_rate,
                            throughput: p.throughput,
                            iters,
                            wall_ms: None,
                            converged,
                            notes: format!("degradation={}", p.degradation),
                        });
                    }
                }
                Ok(rows)
            })
            .collect::<Result<Vec<_>>>()
    };
    let rows = if workers == 0 { run()? } else { pool(workers)?.install(run)? };
    Ok(rows.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::LayoutConfig;
    use crate::scenario::{Sweep, SweepAxis};

    fn small() -> Scenario {
        let mut s = Scenario::default();
        s.layout = LayoutConfig::new(3, 3, 2, 2);
        s.channel.users = 2;
        s.solvers.pso.swarm = 8;
        s.solvers.pso.iterations = 10;
        s.solvers.bcd.max_outer = 4;
        s.solvers.bcd.max_inner = 10;
        s
    }

    #[test]
    fn sweep_cardinality_and_order() {
        let mut s = small();
        s.schemes = vec![Scheme::Bcd, Scheme::Single];
        s.seeds = vec![3, 4];
        s.sweep = Sweep {
            axis: SweepAxis::PowerDbm,
            values: vec![24.0, 30.0, 34.0],
        };
        let rows = run_sweep(&s, 2).unwrap();
        assert_eq!(rows.len(), 12);
        assert_eq!(rows[0].scheme, "bcd");
        assert_eq!(rows[1].scheme, "single");
        assert_eq!(rows[2].seed, 4);
        assert_eq!(rows[4].sweep_value, 30.0);
        assert!(rows.iter().all(|r| r.wall_ms.is_none()));
        let again = run_sweep(&s, 1).unwrap();
        assert_eq!(rows, again);
    }

    #[test]
    fn failing_scheme_is_recorded_not_fatal() {
        let mut s = small();
        s.schemes = vec![Scheme::RcgElementwise, Scheme::Single];
        s.layout = LayoutConfig::new(3, 3, 0, 0);
        let rows = run_sweep(&s, 1).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].notes.starts_with("error"));
        assert!(!rows[0].converged);
        assert!(rows[1].min_rate.is_finite());
    }

    #[test]
    fn throughput_column_uses_time_budget() {
        let s = small();
        let inst = s.instance(0).unwrap();
        let o = solve(&s, &inst, Scheme::Single, 0).unwrap();
        let row = row_from(&s, Scheme::Single, "power-dbm", 30.0, 0, Ok(o.clone()), inst.time);
        let sum: f64 = o.rates.iter().sum();
        assert!((row.throughput - 100.0 / 2.0 * sum).abs() < 1e-9);
    }
}
