//! Max-min design with the penalty-based block coordinate method, printing the outer loop
//! progress and the final pattern assignment.

use mis_core::bcd::{algorithm1, BcdConfig};
use mis_core::scenario::Scenario;

fn main() -> mis_core::Result<()> {
    let inst = Scenario::default().instance(0)?;
    let cfg = BcdConfig {
        starts: 4,
        ..Default::default()
    };
    let r = algorithm1(&inst.stats, &inst.patterns, &cfg, 0)?;
    let mut last_outer = usize::MAX;
    for row in r.trace.iter().filter(|t| t.start == 0) {
        if row.outer != last_outer {
            println!("outer {:2}: rho {:.1e}  mu {:.4}  h {:.2e}", row.outer, row.rho, row.mu, row.h);
            last_outer = row.outer;
        }
    }
    println!("converged {} after {} iterations, h(X) = {:.1e}", r.converged, r.iterations, r.h_final);
    println!("assignment {:?}", r.schedule.assignment());
    for (k, rate) in r.report.per_user.iter().enumerate() {
        println!("user {k}: {rate:.4} bit/s/Hz");
    }
    println!("minimum rate {:.4} bit/s/Hz", r.report.min_rate);
    Ok(())
}
