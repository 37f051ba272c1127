use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use optosqueeze::analytic::{minimize_over_theta, quantum_variance};
use optosqueeze::hilbert::fock::{coherent_amplitudes, thermal_weights};
use optosqueeze::hilbert::*;
use optosqueeze::{FieldMoments, PhysicalParams};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn thetas() -> impl Iterator<Item = f64> {
    (0..8).map(|i| i as f64 * PI / 8.0)
}

#[test]
fn closed_pure_matches_closed_form() {
    let p = PhysicalParams::closed(2.0, 0.1);
    let np = default_np(p.alpha);
    let nm = default_nm_lab(&p, np);
    let trunc = Truncation::default();
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let tt = 5.0 * i as f64 / 49.0;
        let t = p.time_from_periods(tt);
        let s = evolve_closed_pure(&p, t, np, nm, &trunc).unwrap();
        assert!((s.norm() - 1.0).abs() < 1e-10);
        for th in thetas() {
            let v = field_variance_from_state(&s, th).unwrap();
            worst = worst.max(rel(v, quantum_variance(th, t, &p).unwrap()));
        }
    }
    assert!(worst < 1e-6, "{worst:e}");
}

#[test]
fn closed_thermal_matches_closed_form() {
    let p = PhysicalParams {
        nbar_q: 1.0,
        ..PhysicalParams::closed(2.0, 0.1)
    };
    let np = default_np(p.alpha);
    let trunc = Truncation::default();
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let tt = 5.0 * i as f64 / 49.0;
        let t = p.time_from_periods(tt);
        let s = evolve_closed(&p, t, np, None, &trunc).unwrap();
        assert!(matches!(s, ClosedState::Mixed(_)));
        for th in thetas() {
            let v = s.field_variance(th).unwrap();
            worst = worst.max(rel(v, quantum_variance(th, t, &p).unwrap()));
        }
    }
    assert!(worst < 1e-6, "{worst:e}");
}

#[test]
fn stepper_agrees_with_exact_propagation() {
    let p = PhysicalParams::closed(2.0, 0.1);
    let np = default_np(p.alpha);
    let nm = default_nm_lab(&p, np);
    let trunc = Truncation::default();
    let t = p.time_from_periods(1.3);
    let exact = evolve_closed_pure(&p, t, np, nm, &trunc).unwrap();
    let (stepped, diff) = evolve_closed_pure_stepper(&p, t, np, nm, 0.005, &trunc).unwrap();
    assert!(diff < 1e-8, "{diff:e}");
    for n in 0..=np {
        for m in 0..=nm {
            assert!((exact.amplitude(n, m) - stepped.amplitude(n, m)).norm() < 1e-8);
        }
    }
}

#[test]
fn no_coupling_leaves_coherent_state() {
    let p = PhysicalParams::closed(2.0, 0.0);
    let np = default_np(p.alpha);
    for tt in [0.0, 0.3, 1.0, 7.5] {
        let s = evolve_closed_pure(&p, p.time_from_periods(tt), np, 20, &Truncation::default()).unwrap();
        for th in thetas() {
            assert!((s.field_variance(th).unwrap() - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn field_decouples_at_whole_periods() {
    let p = PhysicalParams::closed(2.0, 0.1);
    let np = default_np(p.alpha);
    let nm = default_nm_lab(&p, np);
    for m in 1..=4 {
        let s = evolve_closed_pure(&p, p.time_from_periods(m as f64), np, nm, &Truncation::default()).unwrap();
        assert!((s.field_purity() - 1.0).abs() < 1e-8);
    }
    let s = evolve_closed_pure(&p, p.time_from_periods(0.5), np, nm, &Truncation::default()).unwrap();
    assert!(s.field_purity() < 0.99);
}

#[test]
fn photon_number_is_conserved() {
    let p = PhysicalParams::closed(2.0, 0.1);
    let np = default_np(p.alpha);
    let nm = default_nm_lab(&p, np);
    let n0 = evolve_closed_pure(&p, 0.0, np, nm, &Truncation::default()).unwrap().field_moments().mean_n;
    for i in 1..=20 {
        let t = p.time_from_periods(0.5 * i as f64);
        let s = evolve_closed_pure(&p, t, np, nm, &Truncation::default()).unwrap();
        assert!((s.field_moments().mean_n - n0).abs() < 1e-10);
    }
    let mut b = BlockState::initial(&p, np, 40, MechanicalInit::Vacuum, ChainSet::Moments).unwrap();
    b.advance_closed(p.time_from_periods(10.0)).unwrap();
    assert!((b.field_moments().mean_n - n0).abs() < 1e-10);
}

#[test]
fn whole_period_variance_independent_of_mechanical_temperature() {
    let base = PhysicalParams::closed(2.0, 0.1);
    let np = default_np(base.alpha);
    for m in [1.0, 2.0, 3.0] {
        let t = base.time_from_periods(m);
        let reference = evolve_closed(&base, t, np, None, &Truncation::default()).unwrap();
        for nbar in [0.5, 1.0, 2.0] {
            let p = PhysicalParams { nbar_q: nbar, ..base };
            let s = evolve_closed(&p, t, np, None, &Truncation::default()).unwrap();
            for th in thetas() {
                let a = reference.field_variance(th).unwrap();
                let b = s.field_variance(th).unwrap();
                assert!(rel(b, a) < 1e-9, "m={m} nbar={nbar}");
            }
        }
    }
}

#[test]
fn truncation_too_small_is_flagged() {
    let p = PhysicalParams::closed(2.0, 0.1);
    let err = evolve_closed_pure(&p, 1.0, 8, 20, &Truncation::default()).unwrap_err();
    assert!(matches!(err, optosqueeze::Error::Truncation { .. }));
}

#[test]
fn variance_of_reference_states() {
    let vac = DensityOperator::pure(&[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
    for th in thetas() {
        assert!((field_variance_from_state(&vac, th).unwrap() - 1.0).abs() < 1e-15);
    }
    for n in 0..6 {
        let mut v = vec![Complex64::new(0.0, 0.0); 8];
        v[n] = Complex64::new(1.0, 0.0);
        let fock = DensityOperator::pure(&v);
        for th in thetas() {
            assert!((fock.field_variance(th).unwrap() - (2 * n + 1) as f64).abs() < 1e-12);
        }
    }
    let c = coherent_amplitudes(2.0, 60);
    let diag = DMatrix::from_fn(61, 61, |i, j| if i == j { Complex64::new(c[i] * c[i], 0.0) } else { Complex64::new(0.0, 0.0) });
    let mix = DensityOperator::new(vec![61], diag).unwrap();
    for th in thetas() {
        assert!((mix.field_variance(th).unwrap() - 9.0).abs() < 1e-10);
    }
}

#[test]
fn checkpoint_round_trip() {
    let p = PhysicalParams::closed(1.0, 0.2);
    let opts = LindbladOptions {
        chain_set: ChainSet::Full,
        np: Some(12),
        verify_step: false,
        ..Default::default()
    };
    let run = evolve_lindblad(&p, &[0.7], &opts).unwrap();
    let rho = run.state.field_density().unwrap();
    rho.check_invariants(true).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rho.bin");
    rho.save(&path).unwrap();
    let back = DensityOperator::load(&path).unwrap();
    assert_eq!(rho, back);
    let mut bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..8], b"OSQRHO\0\0");
    assert_eq!(bytes.len(), 8 + 4 + 8 + 8 + 13 * 13 * 16);
    bytes[8] = 9;
    assert!(DensityOperator::read_checkpoint(&bytes[..]).is_err());
}

#[test]
fn block_field_density_matches_pure_state() {
    let p = PhysicalParams::closed(1.5, 0.15);
    let np = default_np(p.alpha);
    let t = p.time_from_periods(0.4);
    let pure = evolve_closed_pure(&p, t, np, default_nm_lab(&p, np), &Truncation::default()).unwrap();
    let mut b = BlockState::initial(&p, np, 40, MechanicalInit::Vacuum, ChainSet::Full).unwrap();
    b.advance_closed(t).unwrap();
    let rho = b.field_density().unwrap();
    rho.check_invariants(true).unwrap();
    assert!((rho.purity() - pure.field_purity()).abs() < 1e-10);
    let (a, c) = (rho.field_moments().unwrap(), pure.field_moments());
    assert!((a.mean_a - c.mean_a).norm() < 1e-10 && (a.mean_a2 - c.mean_a2).norm() < 1e-10);
}

#[test]
fn zero_damping_reproduces_closed_evolution() {
    let p = PhysicalParams::closed(2.0, 0.1);
    let times: Vec<f64> = (0..=10).map(|i| 0.5 * i as f64).collect();
    let run = evolve_lindblad_mech(&p, &times, &LindbladOptions::default()).unwrap();
    for (tt, m) in times.iter().zip(&run.moments) {
        let t = p.time_from_periods(*tt);
        for th in thetas() {
            assert!(rel(m.variance(th), quantum_variance(th, t, &p).unwrap()) < 1e-9);
        }
    }
}

#[test]
fn damped_oscillator_energy_decays_exponentially() {
    let p = PhysicalParams {
        gamma_m: 0.05,
        ..PhysicalParams::closed(0.0, 0.0)
    };
    let beta = Complex64::new(2.0, 0.0);
    let opts = LindbladOptions {
        mech_init: Some(MechanicalInit::Coherent(beta)),
        ..Default::default()
    };
    let times: Vec<f64> = (0..=10).map(|i| 2.0 * i as f64).collect();
    let run = evolve_lindblad_mech(&p, &times, &opts).unwrap();
    for (tt, e) in times.iter().zip(&run.mechanical_number) {
        let expected = 4.0 * (-p.gamma_m * p.time_from_periods(*tt)).exp();
        assert!(rel(*e, expected) < 0.01, "t={tt}: {e} vs {expected}");
    }
    assert!(run.step_difference < 1e-6);
}

#[test]
fn thermal_bath_relaxes_to_bath_occupation() {
    let p = PhysicalParams {
        gamma_m: 0.2,
        nbar_bath: 0.5,
        ..PhysicalParams::closed(0.0, 0.0)
    };
    let opts = LindbladOptions {
        nm: Some(30),
        ..Default::default()
    };
    let run = evolve_lindblad_mech(&p, &[0.0, 10.0], &opts).unwrap();
    assert!(run.mechanical_number[0].abs() < 1e-12);
    let expected = 0.5 * (1.0 - (-p.gamma_m * p.time_from_periods(10.0)).exp());
    assert!((run.mechanical_number[1] - expected).abs() < 1e-6);
}

#[test]
fn photon_loss_decays_intensity() {
    let p = PhysicalParams {
        kappa: 0.2,
        ..PhysicalParams::closed(2.0, 0.0)
    };
    let times: Vec<f64> = (0..=8).map(|i| 0.25 * i as f64).collect();
    let run = evolve_lindblad_cavity(&p, &times, &LindbladOptions::default()).unwrap();
    for (tt, m) in times.iter().zip(&run.moments) {
        let t = p.time_from_periods(*tt);
        let decay = (-0.5 * p.kappa * t).exp();
        // A decaying coherent state stays coherent.
        let expected = FieldMoments::coherent(Complex64::new(2.0 * decay, 0.0));
        assert!((m.mean_a - expected.mean_a).norm() < 1e-8);
        assert!((m.mean_n - expected.mean_n).abs() < 1e-8);
        for th in thetas() {
            assert!((m.variance(th) - 1.0).abs() < 1e-8);
        }
    }
    assert!(run.traces.iter().all(|t| (t - 1.0).abs() < 1e-10));
}

#[test]
fn strong_loss_empties_the_cavity() {
    let p = PhysicalParams {
        kappa: 2.0,
        ..PhysicalParams::closed(2.0, 0.1)
    };
    let run = evolve_lindblad_cavity(&p, &[3.0], &LindbladOptions::default()).unwrap();
    for th in thetas() {
        assert!((run.moments[0].variance(th) - 1.0).abs() < 1e-3);
    }
}

#[test]
fn lossy_quantum_model_squeezes_early() {
    let p = PhysicalParams {
        kappa: 0.3,
        ..PhysicalParams::closed(2.0, 0.1)
    };
    let times: Vec<f64> = (1..=60).map(|i| 0.05 * i as f64).collect();
    let run = evolve_lindblad_cavity(&p, &times, &LindbladOptions::default()).unwrap();
    let s = run.series("Q-kappa", &p, 256, 0.0).unwrap();
    let (_, vmin) = s.deepest().unwrap();
    assert!(vmin < 1.0, "{vmin}");
    for i in 0..run.moments.len() {
        let rho_ok = run.traces[i];
        assert!((rho_ok - 1.0).abs() < 1e-6);
    }
}

#[test]
fn invariants_hold_for_dissipative_field_state() {
    let p = PhysicalParams {
        kappa: 0.2,
        gamma_m: 0.05,
        nbar_bath: 0.5,
        ..PhysicalParams::closed(1.0, 0.2)
    };
    let opts = LindbladOptions {
        chain_set: ChainSet::Full,
        np: Some(12),
        nm: Some(24),
        ..Default::default()
    };
    for tt in [0.5, 1.0, 2.0] {
        let run = evolve_lindblad(&p, &[tt], &opts).unwrap();
        let rho = run.state.field_density().unwrap();
        rho.check_invariants(true).unwrap();
        let a = rho.field_moments().unwrap();
        let b = run.moments[0];
        assert!((a.mean_a - b.mean_a).norm() < 1e-12);
    }
}

#[test]
fn moments_only_refuses_field_density() {
    let p = PhysicalParams::closed(1.0, 0.1);
    let b = BlockState::initial(&p, 10, 20, MechanicalInit::Vacuum, ChainSet::Moments).unwrap();
    assert!(b.field_density().is_err());
}

#[test]
fn empty_time_grid_rejected() {
    let p = PhysicalParams::closed(1.0, 0.1);
    assert!(evolve_lindblad(&p, &[], &LindbladOptions::default()).is_err());
}

#[test]
fn coarse_step_fails_verification() {
    let p = PhysicalParams {
        gamma_m: 0.5,
        nbar_bath: 0.2,
        ..PhysicalParams::closed(1.0, 0.2)
    };
    let opts = LindbladOptions {
        dt: 2.0,
        step_fraction: 2.0,
        step_tolerance: 1e-12,
        np: Some(12),
        nm: Some(24),
        ..Default::default()
    };
    match evolve_lindblad_mech(&p, &[1.0], &opts) {
        Err(optosqueeze::Error::Convergence { difference, .. }) => assert!(difference > 1e-12),
        Err(e) => panic!("unexpected error {e}"),
        Ok(run) => panic!("accepted with step difference {:e}", run.step_difference),
    }
}

#[test]
fn thermal_weights_have_geometric_mean() {
    let w = thermal_weights(2.0).unwrap();
    let mean: f64 = w.iter().enumerate().map(|(j, p)| j as f64 * p).sum();
    assert!((mean - 2.0).abs() < 1e-7);
}

#[test]
fn minimum_of_lossless_block_series_matches_closed_form() {
    let p = PhysicalParams::closed(2.0, 0.1);
    let run = evolve_lindblad(&p, &[1.5], &LindbladOptions { verify_step: false, ..Default::default() }).unwrap();
    let s = run.series("Q", &p, 256, 0.0).unwrap();
    let t = p.time_from_periods(1.5);
    let exact = minimize_over_theta(|th| quantum_variance(th, t, &p), 256).unwrap();
    assert!(rel(s.var_min[0], exact.var_min) < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn pure_state_variance_matches_closed_form(
        alpha in 0.5f64..2.5,
        k in 0.0f64..0.2,
        tt in 0.0f64..3.0,
        th in 0.0f64..PI,
    ) {
        let p = PhysicalParams::closed(alpha, k);
        let np = default_np(alpha);
        let nm = default_nm_lab(&p, np);
        let t = p.time_from_periods(tt);
        let s = evolve_closed_pure(&p, t, np, nm, &Truncation::default()).unwrap();
        let v = s.field_variance(th).unwrap();
        prop_assert!(v > 0.0);
        prop_assert!(rel(v, quantum_variance(th, t, &p).unwrap()) < 1e-6);
        // Robertson bound for a pair of orthogonal quadratures.
        let w = s.field_variance(th + PI / 2.0).unwrap();
        prop_assert!(v * w >= 1.0 - 1e-9);
    }
}
