//! Max-min rate of the proposed design against particle swarm, quantized search and the
//! single-layer surface, with wall time.

use std::time::Instant;

use mis_core::experiment::solve;
use mis_core::scenario::{Scenario, Scheme};

fn main() -> mis_core::Result<()> {
    let s = Scenario::default();
    let inst = s.instance(0)?;
    for scheme in [Scheme::Bcd, Scheme::Pso, Scheme::Qsearch, Scheme::Single] {
        let clock = Instant::now();
        let out = solve(&s, &inst, scheme, 0)?;
        let min = out.rates.iter().copied().fold(f64::INFINITY, f64::min);
        println!(
            "{:8} min rate {min:.4} bit/s/Hz  iterations {:5}  {:?} {}",
            scheme.name(),
            out.iters,
            clock.elapsed(),
            out.notes.join(" ")
        );
    }
    Ok(())
}
