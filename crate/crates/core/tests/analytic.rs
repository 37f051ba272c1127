use std::f64::consts::PI;

use num_complex::Complex64;
use optosqueeze::analytic::*;
use optosqueeze::params::envelope_functions;
use optosqueeze::{FieldMoments, PhysicalParams, RandomSource};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Field moments of the quantum model from the Heisenberg-picture solution:
/// a(t) = e^{iA/2} D e^{iA n} a with a mechanical displacement D whose thermal
/// expectation is e^{-B/2}.
fn quantum_moments(t: f64, p: &PhysicalParams) -> FieldMoments {
    let e = envelope_functions(t, p).unwrap();
    let a2 = p.alpha * p.alpha;
    let ia = c(0.0, e.a);
    let mean_a = (ia * 0.5).exp() * (-0.5 * e.b).exp() * p.alpha * (a2 * ((ia).exp() - 1.0)).exp();
    let mean_a2 = (ia * 2.0).exp() * (-2.0 * e.b).exp() * a2 * (a2 * ((ia * 2.0).exp() - 1.0)).exp();
    FieldMoments {
        mean_a,
        mean_a2,
        mean_n: a2,
    }
}

fn mixture_moments(alpha: f64, m1: Complex64, m2: Complex64) -> FieldMoments {
    FieldMoments {
        mean_a: m1 * alpha,
        mean_a2: m2 * alpha * alpha,
        mean_n: alpha * alpha,
    }
}

#[test]
fn quantum_matches_heisenberg_moments() {
    let cases = [
        PhysicalParams::closed(20.0, 0.01),
        PhysicalParams::closed(2.0, 0.1),
        PhysicalParams::closed(50.0, 0.004),
        PhysicalParams {
            nbar_q: 3.0,
            ..PhysicalParams::closed(5.0, 0.05)
        },
    ];
    for p in cases {
        let scale = 2.0 * p.alpha * p.alpha + 1.0;
        for i in 0..400 {
            let t = p.time_from_periods(0.0137 * i as f64 + if i % 2 == 0 { 0.0 } else { 2493.0 });
            let m = quantum_moments(t, &p);
            for j in 0..8 {
                let th = j as f64 * 0.39;
                let v = quantum_variance(th, t, &p).unwrap();
                let o = m.variance(th);
                assert!((v - o).abs() < 1e-10 * scale, "alpha={} t={t} th={th}: {v} vs {o}", p.alpha);
            }
        }
    }
}

#[test]
fn quantum_trivial_points() {
    let p = PhysicalParams::closed(20.0, 0.01);
    for j in 0..10 {
        let th = j as f64 * 0.6;
        assert!((quantum_variance(th, 0.0, &p).unwrap() - 1.0).abs() < 1e-12);
        let v = quantum_variance(th, p.time_from_periods(1000.0), &p).unwrap();
        assert!((v - 801.0).abs() < 1e-6, "{v}");
    }
}

#[test]
fn quantum_rejects_bad_input() {
    let p = PhysicalParams::closed(2.0, 0.1);
    assert!(quantum_variance(f64::NAN, 1.0, &p).is_err());
    assert!(quantum_variance(0.0, -1.0, &p).is_err());
    assert!(quantum_variance(0.0, f64::INFINITY, &p).is_err());
    let bad = PhysicalParams { alpha: -1.0, ..p };
    assert!(quantum_variance(0.0, 1.0, &bad).is_err());
}

#[test]
fn thermal_occupation_drops_out_at_whole_periods() {
    for &(alpha, k) in &[(20.0, 0.01), (2.0, 0.1), (10.0, 0.02)] {
        for m in 1..=3 {
            let vals: Vec<f64> = [0.0, 1.0, 10.0, 100.0]
                .iter()
                .map(|&n| {
                    let p = PhysicalParams {
                        nbar_q: n,
                        ..PhysicalParams::closed(alpha, k)
                    };
                    quantum_variance(0.0, p.time_from_periods(m as f64), &p).unwrap()
                })
                .collect();
            for v in &vals[1..] {
                assert!((v - vals[0]).abs() <= 1e-9 * vals[0].abs());
            }
            let p = PhysicalParams::closed(alpha, k);
            let kerr = kerr_variance(0.0, p.time_from_periods(m as f64), &p).unwrap();
            assert!((kerr - vals[0]).abs() <= 1e-9 * vals[0].abs());
        }
    }
}

#[test]
fn thermal_noise_pulls_toward_stable_value_between_periods() {
    let p0 = PhysicalParams::closed(20.0, 0.01);
    let p100 = PhysicalParams { nbar_q: 100.0, ..p0 };
    let t = p0.time_from_periods(0.5);
    let v0 = quantum_variance(0.0, t, &p0).unwrap();
    let v100 = quantum_variance(0.0, t, &p100).unwrap();
    assert!((v100 - 801.0).abs() < (v0 - 801.0).abs());
}

/// Classical variance by 2D quadrature over the initial field noise, with the
/// oscillator noise entering as a Gaussian phase of variance C.
fn classical_oracle(theta: f64, t: f64, p: &PhysicalParams) -> f64 {
    let e = envelope_functions(t, p).unwrap();
    // canonical field quadratures of variance 1/2 -> real/imag parts of variance 1/4
    let s = 0.5;
    let n = 241;
    let half = 9.0 * s;
    let h = 2.0 * half / (n - 1) as f64;
    let dephase = (-0.5 * e.c).exp();
    let dephase2 = (-2.0 * e.c).exp();
    let (mut w_sum, mut m1, mut m2, mut mn) = (0.0, c(0.0, 0.0), c(0.0, 0.0), 0.0);
    for i in 0..n {
        let u = -half + i as f64 * h;
        for j in 0..n {
            let v = -half + j as f64 * h;
            let w = (-(u * u + v * v) / (2.0 * s * s)).exp();
            let a0 = c(p.alpha + u, v);
            let inten = a0.norm_sqr();
            let at = a0 * c(0.0, e.a * inten).exp();
            w_sum += w;
            m1 += at * w;
            m2 += at * at * w;
            mn += inten * w;
        }
    }
    let m = FieldMoments {
        mean_a: m1 / w_sum * dephase,
        mean_a2: m2 / w_sum * dephase2,
        mean_n: mn / w_sum,
    };
    // The classical quadrature carries no vacuum offset: subtract the +1 that
    // FieldMoments adds for operator ordering.
    m.variance(theta) - 1.0
}

#[test]
fn classical_matches_phase_space_quadrature() {
    for &(alpha, k, sigma2) in &[(2.0, 0.1, 0.5), (3.0, 0.05, 1.5), (2.0, 0.1, 0.0)] {
        let p = PhysicalParams {
            sigma2_cl: sigma2,
            ..PhysicalParams::closed(alpha, k)
        };
        for &tt in &[0.0, 0.3, 0.5, 1.0, 2.0, 3.7, 5.0] {
            let t = p.time_from_periods(tt);
            for &th in &[0.0, PI / 4.0, 1.3, 2.9] {
                let v = classical_variance(th, t, &p).unwrap();
                let o = classical_oracle(th, t, &p);
                assert!((v - o).abs() < 1e-9 * v.max(1.0), "t={tt} th={th}: {v} vs {o}");
            }
        }
    }
}

#[test]
fn classical_envelope_initial_values_and_ranges() {
    let p = PhysicalParams::closed(20.0, 0.01);
    let e0 = classical_envelope(0.0, &p).unwrap();
    assert_eq!(
        (e0.d1, e0.d2, e0.d3, e0.c1, e0.c2, e0.s1, e0.s2, e0.phi1, e0.phi2),
        (0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0)
    );
    for i in 0..2000 {
        let e = classical_envelope(p.time_from_periods(i as f64 * 3.1), &p).unwrap();
        assert!((0.0..2.0).contains(&e.d1) && (0.0..2.0).contains(&e.d2));
        assert!(e.d3 > 0.0 && e.d3 <= 1.0);
        let a = envelope_functions(p.time_from_periods(i as f64 * 3.1), &p).unwrap().a;
        assert!((e.d3 - 16.0 / (4.0 + a * a).powi(2)).abs() < 1e-15);
    }
}

#[test]
fn classical_trivial_points() {
    let p = PhysicalParams::closed(20.0, 0.01);
    for j in 0..10 {
        let th = j as f64 * 0.6;
        assert!((classical_variance(th, 0.0, &p).unwrap() - 1.0).abs() < 1e-12);
        let v = classical_variance(th, p.time_from_periods(5000.0), &p).unwrap();
        assert!((v - 801.0).abs() < 1e-6);
    }
}

#[test]
fn meanfield_constant_and_poisson_match_explicit_mixtures() {
    let p = PhysicalParams {
        sigma2_cl: 0.7,
        ..PhysicalParams::closed(3.0, 0.05)
    };
    let a2 = p.alpha * p.alpha;
    for &tt in &[0.0, 0.25, 0.9, 3.3, 41.0, 100.0, 1234.5] {
        let t = p.time_from_periods(tt);
        let e = envelope_functions(t, &p).unwrap();
        let d1 = (-0.5 * e.c).exp();
        let d2 = (-2.0 * e.c).exp();
        // Constant intensity.
        let m1 = c(0.0, e.a * a2).exp() * d1;
        let m2 = c(0.0, 2.0 * e.a * a2).exp() * d2;
        let sc1 = mixture_moments(p.alpha, m1, m2);
        // Poisson intensity, summed term by term.
        let (mut q1, mut q2) = (c(0.0, 0.0), c(0.0, 0.0));
        let mut pn = (-a2).exp();
        for n in 0..200 {
            if n > 0 {
                pn *= a2 / n as f64;
            }
            q1 += c(0.0, e.a * n as f64).exp() * pn;
            q2 += c(0.0, 2.0 * e.a * n as f64).exp() * pn;
        }
        let sc2 = mixture_moments(p.alpha, q1 * d1, q2 * d2);
        for &th in &[0.0, 0.5, 1.7, 3.0] {
            let v1 = meanfield_variance(th, t, &p, MeanFieldMode::Constant).unwrap();
            let v2 = meanfield_variance(th, t, &p, MeanFieldMode::Poisson).unwrap();
            assert!((v1 - sc1.variance(th)).abs() < 1e-10 * v1, "{tt}: {v1}");
            assert!((v2 - sc2.variance(th)).abs() < 1e-10 * v2, "{tt}: {v2}");
        }
    }
}

#[test]
fn meanfield_trivial_points() {
    let p = PhysicalParams {
        sigma2_cl: 0.0,
        ..PhysicalParams::closed(20.0, 0.01)
    };
    for i in 0..50 {
        let t = i as f64 * 7.3;
        let v = meanfield_variance(0.4, t, &p, MeanFieldMode::Constant).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }
    // A(t) = 2 pi
    let p = PhysicalParams {
        sigma2_cl: 0.0,
        ..PhysicalParams::closed(3.0, 0.2)
    };
    let wt = solve_phase(&p, 2.0 * PI);
    for j in 0..12 {
        let v = meanfield_variance(j as f64 * 0.5, wt / p.omega, &p, MeanFieldMode::Poisson).unwrap();
        assert!((v - 1.0).abs() < 1e-9, "{v}");
    }
}

/// omega t at which A(t) equals `target`, by bisection.
fn solve_phase(p: &PhysicalParams, target: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while envelope_functions(hi / p.omega, p).unwrap().a < target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if envelope_functions(mid / p.omega, p).unwrap().a < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn meanfield_gaussian_matches_monte_carlo() {
    let p = PhysicalParams::closed(20.0, 0.01);
    let t = p.time_from_periods(5.0);
    let e = envelope_functions(t, &p).unwrap();
    let wt = p.omega * t;
    let a2 = p.alpha * p.alpha;
    let n = 1_000_000;
    let blocks = 100;
    let per = n / blocks;
    let mut block_vals = Vec::with_capacity(blocks);
    let mut all = (c(0.0, 0.0), c(0.0, 0.0));
    for b in 0..blocks {
        let mut s = (c(0.0, 0.0), c(0.0, 0.0));
        for i in 0..per {
            let mut rng = RandomSource::new(2024, (b * per + i) as u64).stream();
            let inten = a2 + p.alpha * rng.normal();
            let x0 = p.sigma2_cl.sqrt() * rng.normal();
            let p0 = p.sigma2_cl.sqrt() * rng.normal();
            let phase = e.a * inten + 2f64.sqrt() * p.k * (x0 * wt.sin() + p0 * (1.0 - wt.cos()));
            let z = c(0.0, phase).exp();
            s.0 += z;
            s.1 += z * z;
        }
        all.0 += s.0;
        all.1 += s.1;
        block_vals.push(s);
    }
    let var_of = |s1: Complex64, s2: Complex64, count: f64| {
        mixture_moments(p.alpha, s1 / count, s2 / count).variance(0.0)
    };
    let est = var_of(all.0, all.1, n as f64);
    // Leave-one-block-out jackknife.
    let loo: Vec<f64> = block_vals
        .iter()
        .map(|s| var_of(all.0 - s.0, all.1 - s.1, (n - per) as f64))
        .collect();
    let mean = loo.iter().sum::<f64>() / blocks as f64;
    let se = ((blocks - 1) as f64 / blocks as f64 * loo.iter().map(|v| (v - mean).powi(2)).sum::<f64>()).sqrt();
    let exact = meanfield_variance(0.0, t, &p, MeanFieldMode::Gaussian).unwrap();
    assert!((est - exact).abs() < 3.0 * se, "{est} vs {exact} (se {se})");
}

#[test]
fn meanfield_never_squeezes_on_dense_grid() {
    let p = PhysicalParams::closed(20.0, 0.01);
    for mode in [MeanFieldMode::Constant, MeanFieldMode::Poisson, MeanFieldMode::Gaussian] {
        for i in 0..=2000 {
            let t = p.time_from_periods(i as f64 * 0.01);
            for j in 0..64 {
                let v = meanfield_variance(j as f64 * PI / 64.0, t, &p, mode).unwrap();
                assert!(v >= 1.0 - 1e-9, "{mode:?} t={t} v={v}");
            }
        }
    }
}

proptest! {
    #[test]
    fn meanfield_is_never_below_one(
        alpha in 0.0f64..50.0,
        k in 0.0f64..0.3,
        sigma2 in 0.0f64..5.0,
        tt in 0.0f64..6000.0,
        theta in 0.0f64..PI,
    ) {
        let p = PhysicalParams { sigma2_cl: sigma2, ..PhysicalParams::closed(alpha, k) };
        let t = p.time_from_periods(tt);
        for mode in [MeanFieldMode::Constant, MeanFieldMode::Poisson, MeanFieldMode::Gaussian] {
            let v = meanfield_variance(theta, t, &p, mode).unwrap();
            prop_assert!(v >= 1.0 - 1e-9 * (1.0 + alpha * alpha), "{:?} {}", mode, v);
        }
    }

    #[test]
    fn quantum_obeys_uncertainty_relation(
        alpha in 0.0f64..30.0,
        k in 0.0f64..0.3,
        nbar in 0.0f64..20.0,
        tt in 0.0f64..200.0,
        theta in 0.0f64..PI,
    ) {
        let p = PhysicalParams { nbar_q: nbar, ..PhysicalParams::closed(alpha, k) };
        let t = p.time_from_periods(tt);
        let v1 = quantum_variance(theta, t, &p).unwrap();
        let v2 = quantum_variance(theta + PI / 2.0, t, &p).unwrap();
        prop_assert!(v1 * v2 >= 1.0 - 1e-8 * (1.0 + alpha * alpha).powi(2));
        let v3 = quantum_variance(theta + PI, t, &p).unwrap();
        prop_assert!((v1 - v3).abs() <= 1e-9 * (1.0 + 2.0 * alpha * alpha));
    }

    #[test]
    fn minimizer_finds_single_harmonic_minimum(
        c0 in 1.0f64..100.0,
        amp in 0.0f64..0.99,
        phase in 0.0f64..(2.0 * PI),
    ) {
        let f = |th: f64| Ok(c0 * (1.0 + amp * (2.0 * th - phase).cos()));
        let m = minimize_over_theta(f, 256).unwrap();
        prop_assert!((m.var_min - c0 * (1.0 - amp)).abs() <= 1e-10 * c0);
        prop_assert!((0.0..PI).contains(&m.theta_star));
        if amp > 1e-3 {
            let expected = (phase + PI) / 2.0 % PI;
            let d = (m.theta_star - expected).rem_euclid(PI);
            prop_assert!(d.min(PI - d) < 1e-6 / amp.sqrt().min(1.0), "{} vs {}", m.theta_star, expected);
        }
    }
}

#[test]
fn minimizer_trivial_examples() {
    let m = minimize_over_theta(|_| Ok(1.0), 256).unwrap();
    assert_eq!((m.var_min, m.theta_star), (1.0, 0.0));
    let m = minimize_over_theta(|th| Ok(2.0 + (2.0 * th).cos()), 256).unwrap();
    assert!((m.var_min - 1.0).abs() < 1e-12);
    assert!((m.theta_star - PI / 2.0).abs() < 1e-6);
    assert!(minimize_over_theta(|_| Ok(1.0), 8).is_err());
    assert!(minimize_over_theta(|_| Ok(f64::NAN), 64).is_err());
}

#[test]
fn minimizer_matches_exhaustive_search_on_quantum_variance() {
    let p = PhysicalParams::closed(20.0, 0.01);
    for &tt in &[0.5, 0.05, 1.5, 2.0, 4999.0] {
        let t = p.time_from_periods(tt);
        let m = minimize_over_theta(|th| quantum_variance(th, t, &p), DEFAULT_THETA_GRID).unwrap();
        let n = 100_000;
        let (mut best_v, mut best_th) = (f64::INFINITY, 0.0);
        for i in 0..n {
            let th = PI * i as f64 / n as f64;
            let v = quantum_variance(th, t, &p).unwrap();
            if v < best_v {
                best_v = v;
                best_th = th;
            }
        }
        assert!(m.var_min <= best_v + 1e-12, "{tt}");
        let d = (m.theta_star - best_th).rem_euclid(PI);
        assert!(d.min(PI - d) < PI / n as f64 + 1e-6, "{tt}: {} vs {best_th}", m.theta_star);
    }
}

#[test]
fn revival_windows_and_approximations() {
    let p = PhysicalParams::closed(20.0, 0.01);
    let first = revival_centers(&p, Revival::First, 3).unwrap();
    let second = revival_centers(&p, Revival::Second, 2).unwrap();
    assert!((first[0] / p.tau() - 2500.0).abs() < 1e-9);
    assert!((first[1] / p.tau() - 7500.0).abs() < 1e-9);
    assert!((second[0] / p.tau() - 5000.0).abs() < 1e-9);

    for &th in &[0.0, 0.3, PI / 2.0, 2.0] {
        let v = revival_approximation(th, first[0], &p, Revival::First, DEFAULT_REVIVAL_HALF_WIDTH).unwrap();
        assert!(v >= 1.0);
    }
    for center in [first[0], second[0]] {
        let which = if center == first[0] { Revival::First } else { Revival::Second };
        let approx = revival_approximation(0.0, center, &p, which, 10.0).unwrap();
        let exact = quantum_variance(0.0, center, &p).unwrap();
        assert!((approx - exact).abs() <= 0.01 * exact, "{approx} vs {exact}");
    }
    // Both cosines coincide at the second centre for theta = 0.
    let v = revival_approximation(0.0, second[0], &p, Revival::Second, 10.0).unwrap();
    assert!((v - 1.0).abs() < 1e-9);

    let err = revival_approximation(0.0, p.time_from_periods(1000.0), &p, Revival::First, 10.0).unwrap_err();
    match err {
        optosqueeze::Error::OutOfWindow { nearest_center, .. } => {
            assert!((nearest_center - first[0]).abs() < 1e-6)
        }
        other => panic!("unexpected {other}"),
    }
    assert!(revival_approximation(0.0, p.time_from_periods(2509.0), &p, Revival::First, 10.0).is_ok());
    assert!(revival_approximation(0.0, p.time_from_periods(2511.0), &p, Revival::First, 10.0).is_err());
}

#[test]
fn sweep_entries() {
    let m = sweep_variance_at_tau(&[2.0, 10.0, 20.0, 40.0], &[0.0, 0.005, 0.01, 0.02, 0.1], 0.0).unwrap();
    for row in &m.values {
        assert_eq!(row[0], 0.0);
    }
    let a = 10f64.powf(m.get(20.0, 0.01).unwrap());
    let b = 10f64.powf(m.get(10.0, 0.02).unwrap());
    let c = 10f64.powf(m.get(40.0, 0.005).unwrap());
    assert!((a - b).abs() / a < 0.01 && (a - c).abs() / a < 0.01);
    let p = PhysicalParams::closed(2.0, 0.1);
    let direct = quantum_variance(0.0, p.tau(), &p).unwrap().log10();
    assert_eq!(m.get(2.0, 0.1).unwrap(), direct);
    assert!(sweep_variance_at_tau(&[], &[0.1], 0.0).is_err());
}

#[test]
fn blockade_examples() {
    let r = blockade_check(1.0, 1.0, 1.0, 0.5).unwrap();
    assert_eq!(r.blockade_ratio, 1.0);
    let g0 = 2f64.sqrt() * 0.1;
    let r = blockade_check(g0, 1.0, 1.0, 0.01).unwrap();
    assert!((r.blockade_ratio - 0.02).abs() < 1e-15);
    assert!((r.cooperativity - 4.0).abs() < 1e-12);
    assert!(!r.in_blockade && r.strong_cooperativity);
    let r = blockade_check(g0, 1.0, f64::INFINITY, 0.01).unwrap();
    assert_eq!((r.blockade_ratio, r.cooperativity), (0.0, 0.0));
    assert!(blockade_check(g0, 1.0, 0.0, 0.01).is_err());
    assert!(blockade_check(g0, 0.0, 1.0, 0.01).is_err());
}

#[test]
fn analytic_series_is_valid() {
    let p = PhysicalParams::closed(20.0, 0.01);
    let times: Vec<f64> = (0..=100).map(|i| i as f64 * 0.05).collect();
    for model in [
        AnalyticModel::Quantum,
        AnalyticModel::Classical,
        AnalyticModel::MeanField(MeanFieldMode::Poisson),
        AnalyticModel::Kerr,
    ] {
        let s = analytic_series(model, &p, &times, 256, 0.0).unwrap();
        assert_eq!(s.len(), times.len());
        assert!((s.var_min[0] - 1.0).abs() < 1e-12);
        assert_eq!(s.label, model.label());
    }
}
