//! Property tests over randomized inputs.

use proptest::prelude::*;

use ridgewave::bounds::{gate_thresholds, lemma_gate, physical_envelope, Envelope, GateClass, PhysicalFrame};
use ridgewave::cli::parse_sim_config;
use ridgewave::green_kernel::kernel_eval;
use ridgewave::profile::{reference_profile, Profile};
use ridgewave::simulator::{build_initial, mass_of_state, run_simulation, Perturbation, SimConfig};
use ridgewave::D_TRAVELING;

fn wave() -> &'static Profile {
    static W: std::sync::OnceLock<Profile> = std::sync::OnceLock::new();
    W.get_or_init(|| reference_profile(1001).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gate_formula_matches_scan(a0 in 0.1f64..10.0) {
        let g = lemma_gate(a0).unwrap();
        let [t1, t2, t3] = gate_thresholds(D_TRAVELING);
        let q = g.a0sq_d2;
        // Skip a hair around each threshold where the scan cannot resolve
        // the sign of a margin that touches zero.
        prop_assume!([t1, t2, t3].iter().all(|t| (q - t).abs() > 1e-6));
        prop_assert!(g.agree, "{:?}", g);
        let expected = if q <= t1 {
            GateClass::LowerCertified
        } else if q < t2 {
            GateClass::SupersolutionOnly
        } else if q < t3 {
            GateClass::None
        } else {
            GateClass::UpperCertified
        };
        prop_assert_eq!(g.class, expected);
    }

    #[test]
    fn envelopes_are_ordered(eta in 0.0f64..=0.5) {
        let e = Envelope::default();
        prop_assert!(e.lower(eta) >= 0.0);
        prop_assert!(e.lower(eta) <= e.upper(eta));
    }

    #[test]
    fn kernel_is_nonnegative(eta in 0.0f64..=0.5, t in 0.0f64..=0.5) {
        prop_assert!(kernel_eval(eta, t).unwrap() >= -1e-15);
    }

    #[test]
    fn physical_frame_width(v in 0.1f64..10.0, theta in 0.1f64..10.0, s in 0.0f64..=1.0, t in 0.0f64..2.0) {
        let f = PhysicalFrame::new(v, theta).unwrap();
        prop_assert!((f.w - theta * theta * D_TRAVELING / v).abs() <= 1e-12 * f.w);
        prop_assert!((f.s2(t) - f.s1(t) - f.w).abs() <= 1e-12 * (1.0 + f.s2(t)));
        let x = (f.s1(t) + s * f.w).min(f.s2(t));
        let (lo, hi) = physical_envelope(x, t, &f).unwrap();
        prop_assert!(0.0 <= lo && lo <= hi);
    }

    #[test]
    fn config_round_trip(theta in 0.2f64..5.0, v in 0.2f64..5.0, n in 100usize..2000) {
        let text = format!("[sim]\ntheta = {theta:?}\nv = {v:?}\nn = {n}\n");
        let (cfg, warnings) = parse_sim_config(&text).unwrap();
        prop_assert!(warnings.is_empty());
        prop_assert_eq!(cfg.n, n);
        prop_assert!((cfg.frame.w - theta * theta * 0.5 / v).abs() <= 1e-14 * cfg.frame.w);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn mass_is_conserved(amp in -0.1f64..0.1, mode in 1u32..4) {
        let cfg = SimConfig {
            n: 120,
            t_end: 0.004,
            output_every: 0.002,
            perturbation: Perturbation::Sine { amp, mode },
            ..SimConfig::default()
        };
        let r = run_simulation(&cfg, wave()).unwrap();
        let m0 = mass_of_state(&build_initial(&cfg, wave()).unwrap(), cfg.h());
        prop_assert!(r.max_mass_drift <= 1e-10);
        for row in &r.ledger.rows {
            prop_assert!((row.mass - m0).abs() <= 1e-10 * m0);
        }
        prop_assert!(r.min_height >= 0.0);
    }
}
