//! Computes the wave profile with the kernel iteration, shooting and
//! collocation, then compares them.

use ridgewave::profile::{profile_diagnostics, solve, Method};
use ridgewave::Grid;

fn main() -> ridgewave::Result<()> {
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2001);
    let grid = Grid::standard(n)?;

    let methods = [Method::Kernel, Method::Shoot, Method::Collocation];
    let profiles = methods.iter().map(|&m| solve(m, &grid, 1e6)).collect::<ridgewave::Result<Vec<_>>>()?;

    println!("{:<12} {:>10} {:>10} {:>11} {:>11} {:>10}", "method", "max eta", "max phi", "res ode3", "res 1st", "phi'(d)");
    for (m, p) in methods.iter().zip(&profiles) {
        let d = profile_diagnostics(p);
        println!(
            "{:<12} {:>10.6} {:>10.7} {:>11.2e} {:>11.2e} {:>10.2e}",
            m.as_str(),
            d.max_eta,
            d.max_phi,
            d.residual_ode3_sup,
            d.residual_first_integral_sup,
            d.dphi_at_d
        );
    }
    for i in 0..3 {
        for j in i + 1..3 {
            let dist = profiles[i].sup_distance(&profiles[j], 0.01, 0.49);
            println!("{} vs {}: {dist:.2e}", methods[i].as_str(), methods[j].as_str());
        }
    }
    Ok(())
}
