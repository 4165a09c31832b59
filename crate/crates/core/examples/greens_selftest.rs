//! Evaluates the Green's kernel, its row integrals and the sign oracle.
//!
//! Run with `cargo run --example greens_selftest`.

use ridgewave::green_kernel::{kernel_eval, kernel_row_integrals, representation_check, selftest};

fn main() -> ridgewave::Result<()> {
    println!("G(eta, t) on a coarse grid:");
    for eta in [0.1, 0.25, 0.4] {
        let row: Vec<String> = [0.1, 0.25, 0.4].iter().map(|&t| format!("{:9.6}", kernel_eval(eta, t).unwrap())).collect();
        println!("  eta = {eta:4}: {}", row.join(" "));
    }
    let (l, r) = kernel_row_integrals(0.25)?;
    println!("row integrals at 0.25: left {l:.10}, right {r:.10}");

    for sign in [-1.0, 1.0] {
        let c = representation_check(6.0, 0.0, sign, 101)?;
        println!(
            "sign {sign:+}: u(0.25) = {:.6} (exact {:.6}), max deviation {:.2e}",
            c.value_at_mid, c.exact_at_mid, c.max_deviation
        );
    }

    let report = selftest()?;
    for c in &report.checks {
        println!("  {:<44} {:>5}  {:.3e}", c.name, c.passed, c.value);
    }
    println!(
        "c_value at 201 and 401 points: {:.2} and {:.2} (grows like 1/t near t = 0)",
        report.bounds.c_value, report.bounds_refined.c_value
    );
    Ok(())
}
