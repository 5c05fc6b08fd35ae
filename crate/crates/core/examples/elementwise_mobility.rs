//! How much of the gap between a block-shifted MS2 and a fully dynamic surface is closed
//! when every MS2 element can move on its own.

use mis_core::bcd::{algorithm1, BcdConfig};
use mis_core::benchmarks::{dynamic_ris_baseline, single_layer_baseline, SingleLayerSolver};
use mis_core::geometry::LayoutConfig;
use mis_core::manifold::{rcg_solve_p7, ElementwiseConfig, RcgConfig};
use mis_core::rate::Objective;
use mis_core::scenario::Scenario;

fn main() -> mis_core::Result<()> {
    println!("seed  single   block    element  dynamic  recovered");
    for seed in 0..5 {
        let mut s = Scenario::default();
        s.layout = LayoutConfig::new(5, 5, 3, 3);
        s.channel.random_placement = true;
        let inst = s.instance(seed)?;
        let st = &inst.stats;
        let single = single_layer_baseline(st, &SingleLayerSolver::Rcg(RcgConfig::default()), Objective::Throughput, seed)?;
        let cfg = BcdConfig {
            objective: Objective::Throughput,
            ..Default::default()
        };
        let block = algorithm1(st, &inst.patterns, &cfg, seed)?;
        let ew = rcg_solve_p7(st, inst.n, &ElementwiseConfig::default(), seed, Some(&block.design))?;
        let dynamic = dynamic_ris_baseline(st, &RcgConfig::default(), 5, seed)?;
        let sum = |r: &[f64]| r.iter().sum::<f64>();
        let (a, b, c, d) = (
            sum(&single.report.per_user),
            sum(&block.report.per_user),
            sum(&ew.report.per_user),
            sum(&dynamic.report.per_user),
        );
        println!("{seed:4}  {a:7.3}  {b:7.3}  {c:7.3}  {d:7.3}  {:8.0}%", 100.0 * (c - b) / (d - b));
    }
    Ok(())
}
