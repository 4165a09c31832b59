//! Runs the acceptance criteria and prints one line per criterion.
//! Pass `--fast` to skip the simulation criteria.

use ridgewave::validation::{validate, Mode};

fn main() {
    let mode = if std::env::args().any(|a| a == "--fast") { Mode::Fast } else { Mode::Full };
    let report = validate(mode);
    for c in &report.criteria {
        println!("{:>2} {:?} {:<70} {:?}", c.id, c.status, c.description, c.measured);
    }
    println!("overall pass: {} in {:.0} ms", report.pass, report.total_ms);
    std::process::exit(if report.pass { 0 } else { 1 });
}
