//! Total-throughput design on the product manifold (unit-modulus phases times a
//! row-stochastic schedule), next to the throughput variant of the block coordinate method.

use std::time::Instant;

use mis_core::bcd::{algorithm1, BcdConfig};
use mis_core::manifold::{rcg_solve_p5, RcgConfig};
use mis_core::rate::Objective;
use mis_core::scenario::Scenario;

fn main() -> mis_core::Result<()> {
    let mut s = Scenario::default();
    s.channel.users = 6;
    let inst = s.instance(0)?;

    let clock = Instant::now();
    let r = rcg_solve_p5(&inst.stats, &inst.patterns, &RcgConfig::default(), 0)?;
    let t_rcg = clock.elapsed();
    println!(
        "manifold: sum rate {:.4}, {} iterations, stationarity {:.1e}, threshold change {:.3}%, {t_rcg:?}",
        r.objective,
        r.iterations,
        r.grad_norm,
        100.0 * r.threshold_change()
    );

    let cfg = BcdConfig {
        objective: Objective::Throughput,
        ..Default::default()
    };
    let clock = Instant::now();
    let b = algorithm1(&inst.stats, &inst.patterns, &cfg, 0)?;
    println!("block coordinate: sum rate {:.4}, {:?}", b.objective, clock.elapsed());
    Ok(())
}
