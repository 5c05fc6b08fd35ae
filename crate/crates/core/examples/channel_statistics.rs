//! Build the default deployment and compare each user's closed-form mean SNR `v^H Ξ v`
//! with a Monte Carlo average of the instantaneous SNR.

use mis_core::channel::substream;
use mis_core::linalg::random_phases;
use mis_core::oracle::xi_monte_carlo;
use mis_core::scenario::Scenario;

fn main() -> mis_core::Result<()> {
    let scenario = Scenario::default();
    let inst = scenario.instance(0)?;
    let stats = &inst.stats;
    println!(
        "MS1 {} elements, MS2 {} elements, {} beam patterns, {} BS antennas, {} users",
        stats.m(),
        inst.n,
        inst.patterns.len(),
        stats.l(),
        stats.users()
    );
    let v = random_phases(&mut substream(0, 1), stats.m());
    for k in 0..stats.users() {
        let check = xi_monte_carlo(stats, k, &v, 50_000, 7, 0.02)?;
        println!(
            "user {k}: closed form {:.4e}, sampled {:.4e}, relative error {:.3}%",
            check.value,
            check.reference,
            100.0 * check.error
        );
    }
    Ok(())
}
