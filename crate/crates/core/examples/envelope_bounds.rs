//! Envelope margins, edge coefficient, derived functionals and the
//! coefficient gates.

use ridgewave::bounds::{bounds_report, gate_thresholds, lemma_gate, physical_envelope, PhysicalFrame};
use ridgewave::profile::reference_profile;

fn main() -> ridgewave::Result<()> {
    let p = reference_profile(2001)?;
    let r = bounds_report(&p)?;
    println!("lower margin {:.3e} at eta = {:.6}", r.envelope.min_lower_margin, r.envelope.argmins[0]);
    println!("upper margin {:.3e} at eta = {:.6}", r.envelope.min_upper_margin, r.envelope.argmins[1]);
    println!(
        "edge coefficient {:.6} (sub-window spread {:.6}..{:.6})",
        r.edge_coefficient.estimate, r.edge_coefficient.interval[0], r.edge_coefficient.interval[1]
    );
    println!("mass {:.7}, envelope interval {:?}", r.mass.value, r.mass.interval);
    println!("slope norm {:.7}; at most 1/24: {}", r.slope_norm.value, r.slope_norm.satisfied);

    // A0^2 d^2 thresholds separating the gate classes.
    println!("gate thresholds {:?}", gate_thresholds(0.5));
    for a0 in [1.5, 2.0, 3.0, 3.5] {
        let g = lemma_gate(a0)?;
        println!("  A0 = {a0}: {:?} (scan agrees: {})", g.class, g.agree);
    }

    let frame = PhysicalFrame::new(1.0, 2.0)?;
    let x = frame.s1(0.1) + 0.5 * frame.w;
    let (lo, hi) = physical_envelope(x, 0.1, &frame)?;
    println!("lab frame theta = 2: w = {}, h({x}, 0.1) in [{lo:.5}, {hi:.5}]", frame.w);
    Ok(())
}
