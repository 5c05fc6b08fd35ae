//! Freeze a max-min design and measure its throughput loss under location drift, CSI
//! mismatch and phase errors.

use mis_core::bcd::{algorithm1, BcdConfig};
use mis_core::robustness::{degradation_curve, ErrorFamily, RobustnessSpec};
use mis_core::scenario::Scenario;

fn main() -> mis_core::Result<()> {
    let s = Scenario::default();
    let inst = s.instance(0)?;
    let design = algorithm1(&inst.stats, &inst.patterns, &BcdConfig::default(), 0)?.design;
    let grids = [
        (ErrorFamily::LocationGaussian, vec![0.5, 1.0, 2.0]),
        (ErrorFamily::LocationBounded, vec![1.0, 2.0, 4.0]),
        (ErrorFamily::CsiMix, vec![0.1, 0.2, 0.4]),
        (ErrorFamily::CsiBounded, vec![0.1, 0.2, 0.4]),
        (ErrorFamily::PhaseGaussian, vec![10.0, 20.0, 45.0]),
        (ErrorFamily::PhaseBounded, vec![10.0, 20.0, 45.0]),
    ];
    for (family, mags) in grids {
        let curve = degradation_curve(&s, &inst, &design, &RobustnessSpec::new(family, mags, 300), 0)?;
        let cells: Vec<String> = curve
            .iter()
            .map(|p| format!("{}: {:.2}%", p.magnitude, 100.0 * p.degradation))
            .collect();
        println!("{:18} {}", family.name(), cells.join("  "));
    }
    Ok(())
}
