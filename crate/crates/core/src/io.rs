//! CSV and JSON file formats.
//!
//! Floats are written with `{:.16e}` (17 significant digits), enough to
//! round-trip any `f64`, so reruns are byte-identical and files read back
//! exactly.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::profile::diagnostics::pointwise_residuals;
use crate::profile::{Method, Profile};
use crate::simulator::{EnergyLedger, SimState};
use crate::{Error, Grading, Grid, Result, D_TRAVELING};

pub const PROFILE_HEADER: [&str; 5] = ["eta", "phi", "dphi", "residual_ode3", "residual_first_integral"];
pub const SNAPSHOT_HEADER: [&str; 2] = ["xi", "f"];
pub const LEDGER_HEADER: [&str; 8] = [
    "t",
    "mass",
    "energy",
    "dissipation",
    "boundary_term",
    "balance_residual",
    "sup_error_vs_wave",
    "slope_at_w",
];

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn table<const K: usize>(header: [&str; K], rows: impl Iterator<Item = [f64; K]>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    // Writing into a Vec cannot fail.
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r.map(num)).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn profile_csv(p: &Profile) -> Vec<u8> {
    let (r3, r1) = pointwise_residuals(p);
    let n = p.eta().len();
    table(PROFILE_HEADER, (0..n).map(|i| [p.eta()[i], p.phi()[i], p.dphi()[i], r3[i], r1[i]]))
}

pub fn snapshot_csv(xi: &[f64], state: &SimState) -> Vec<u8> {
    table(SNAPSHOT_HEADER, xi.iter().zip(&state.f).map(|(&x, &f)| [x, f]))
}

pub fn ledger_csv(ledger: &EnergyLedger) -> Vec<u8> {
    table(
        LEDGER_HEADER,
        ledger.rows.iter().map(|r| {
            [r.t, r.mass, r.energy, r.dissipation, r.boundary_term, r.balance_residual, r.sup_error_vs_wave, r.slope_at_w]
        }),
    )
}

/// Pretty JSON; key order follows struct declaration order and map keys
/// are sorted.
pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("report types serialize");
    out.push(b'\n');
    out
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
    }
    fs::write(path, bytes).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn malformed(path: &Path, reason: impl Into<String>) -> Error {
    Error::Malformed { path: path.to_path_buf(), reason: reason.into() }
}

/// Reads a profile written by [`profile_csv`]. The header must match
/// exactly and the last node must sit at `eta = 1/2`.
pub fn read_profile_csv(path: &Path) -> Result<Profile> {
    if !path.exists() {
        return Err(Error::Missing(path.display().to_string()));
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| malformed(path, e.to_string()))?;
    let header = r.headers().map_err(|e| malformed(path, e.to_string()))?.clone();
    if header.iter().ne(PROFILE_HEADER) {
        return Err(malformed(path, format!("header must be {}", PROFILE_HEADER.join(","))));
    }
    let (mut eta, mut phi, mut dphi) = (Vec::new(), Vec::new(), Vec::new());
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| malformed(path, e.to_string()))?;
        let field = |j: usize| -> Result<f64> {
            rec[j]
                .trim()
                .parse::<f64>()
                .map_err(|_| malformed(path, format!("row {}: cannot parse {:?}", line + 2, &rec[j])))
        };
        eta.push(field(0)?);
        phi.push(field(1)?);
        dphi.push(field(2)?);
    }
    let last = eta.last().copied().unwrap_or(f64::NAN);
    if (last - D_TRAVELING).abs() > 1e-9 {
        return Err(malformed(path, format!("last eta is {last}, expected {D_TRAVELING}")));
    }
    let grid = Grid::from_nodes(eta, Grading::Explicit).map_err(|e| malformed(path, e.to_string()))?;
    Profile::new(grid, phi, dphi, Method::External, None).map_err(|e| malformed(path, e.to_string()))
}

/// Lowercase hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// `<dir>/snapshot_0003.csv` style names.
pub fn snapshot_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("snapshot_{index:04}.csv"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::LedgerRow;

    fn sample() -> Profile {
        let g = Grid::standard(201).unwrap();
        Profile::envelope(&g, 2.5, Method::EnvelopeMax)
    }

    #[test]
    fn profile_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let p = sample();
        write_file(&path, &profile_csv(&p)).unwrap();
        let back = read_profile_csv(&path).unwrap();
        assert_eq!(back.eta(), p.eta());
        assert_eq!(back.phi(), p.phi());
        assert_eq!(back.dphi(), p.dphi());
        let text = String::from_utf8(profile_csv(&p)).unwrap();
        assert_eq!(text.lines().next().unwrap(), "eta,phi,dphi,residual_ode3,residual_first_integral");
        assert_eq!(text.lines().count(), 202);
    }

    #[test]
    fn twelve_significant_digits_at_least() {
        assert_eq!(num(std::f64::consts::PI), "3.1415926535897931e0");
        assert_eq!(num(-1.0 / 3.0), "-3.3333333333333331e-1");
    }

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn read_errors() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope.csv");
        assert!(matches!(read_profile_csv(&missing), Err(Error::Missing(_))));

        let bad = dir.path().join("bad.csv");
        fs::write(&bad, "eta,phi\n0,0\n").unwrap();
        assert!(matches!(read_profile_csv(&bad), Err(Error::Malformed { .. })));

        let text = String::from_utf8(profile_csv(&sample())).unwrap().replacen("0.0000000000000000e0", "zero", 1);
        fs::write(&bad, text).unwrap();
        assert!(matches!(read_profile_csv(&bad), Err(Error::Malformed { .. })));
    }

    #[test]
    fn ledger_header() {
        let row = LedgerRow {
            t: 0.0,
            mass: 1.0,
            energy: 2.0,
            dissipation: 3.0,
            boundary_term: 4.0,
            balance_residual: 0.0,
            sup_error_vs_wave: 0.0,
            slope_at_w: -1.0,
            slope_at_0: 1.0,
        };
        let text = String::from_utf8(ledger_csv(&EnergyLedger { rows: vec![row] })).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), LEDGER_HEADER.join(","));
        assert_eq!(lines.next().unwrap().split(',').count(), 8);
    }
}
