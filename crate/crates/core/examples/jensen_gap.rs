//! Jensen upper bound against the Monte Carlo ergodic rate of an optimized design, for
//! several Rician factors. The gap shrinks as the LoS part grows.

use mis_core::bcd::{algorithm1, BcdConfig};
use mis_core::scenario::Scenario;

fn main() -> mis_core::Result<()> {
    println!("kappa_db  min_jensen  min_ergodic  mean_gap");
    for kappa in [-5.0, 0.0, 5.0, 10.0] {
        let mut s = Scenario::default();
        s.channel.users = 6;
        s.channel.kappa_db = kappa;
        let inst = s.instance(0)?;
        let r = algorithm1(&inst.stats, &inst.patterns, &BcdConfig::default(), 0)?;
        let jensen = r.design.report(&inst.stats, inst.time);
        let (ergodic, est) = r.design.ergodic(&inst.stats, 20_000, 1, inst.time)?;
        let k = est.len() as f64;
        let gap = jensen.per_user.iter().zip(&ergodic.per_user).map(|(j, e)| j - e).sum::<f64>() / k;
        println!(
            "{kappa:8.1}  {:10.4}  {:11.4}  {gap:8.4}",
            jensen.min_rate, ergodic.min_rate
        );
    }
    Ok(())
}
