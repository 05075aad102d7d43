use coupled_oamp::coupling::CouplingConfig;
use coupled_oamp::denoiser::BernoulliGaussian;
use coupled_oamp::se::{StateEvolution, DEFAULT_FP_TOL, DEFAULT_MAX_ITERATIONS};
use coupled_oamp::sensing::condition_number_profile;

#[test]
fn gaussian_prior_closed_form() {
    // ρ = 1, κ = 1: every s² = 1/δ, the B→A variance stays at 1 and
    // v̄_B = (1 - δ + δσ²)/(1 + δσ²) from the first step on
    for (n, m, sigma2) in [(1024, 512, 1e-3), (1024, 300, 0.1), (256, 64, 1.0)] {
        let c = CouplingConfig::new(1, 0, n, m, sigma2).unwrap();
        let se = StateEvolution::with_condition_number(&c, 1.0, BernoulliGaussian::new(1.0).unwrap()).unwrap();
        let traj = se.run(20, 1e-300).unwrap();
        let d = m as f64 / n as f64;
        let v_ab = (1.0 - d) / d + sigma2;
        let v_b = (1.0 - d + d * sigma2) / (1.0 + d * sigma2);
        assert_eq!(traj.states[0].v_b, vec![1.0]);
        for s in &traj.states[1..] {
            assert!((s.v_ab[0] - v_ab).abs() < 1e-12 * v_ab, "t={}", s.t);
            assert!((s.v_b[0] - v_b).abs() < 1e-12, "t={}", s.t);
            assert!((s.v_ba[0] - 1.0).abs() < 1e-12);
        }
    }
}

/// One uncoupled SE step in the B→A variance, written without the library recursion.
fn scalar_map(v_ba: f64, profile: &[f64], n: usize, sigma2: f64, prior: &BernoulliGaussian) -> f64 {
    let snr = sigma2 / v_ba;
    let eta = 1.0 - profile.iter().map(|s| s * s / (snr + s * s)).sum::<f64>() / n as f64;
    let v_ab = eta * v_ba / (1.0 - eta);
    let v_b = prior.mmse(v_ab).unwrap();
    1.0 / (1.0 / v_b - 1.0 / v_ab)
}

#[test]
fn fixed_point_matches_bisection() {
    let prior = BernoulliGaussian::new(0.1).unwrap();
    for (m, kappa) in [(512, 10.0), (700, 1.0), (350, 30.0)] {
        let n = 1024;
        let c = CouplingConfig::new(1, 0, n, m, 1e-3).unwrap();
        let profile = condition_number_profile(m, n, 1, kappa).unwrap();
        let se = StateEvolution::with_condition_number(&c, kappa, prior).unwrap();
        let traj = se.run(DEFAULT_MAX_ITERATIONS, 1e-13).unwrap();
        assert!(traj.converged_at.is_some());
        let g = |v: f64| scalar_map(v, profile.values(), n, 1e-3, &prior) - v;
        // the recursion decreases from v = 1 to the largest root below it
        let (mut lo, mut hi) = (traj.last().v_ba[0] * 0.5, traj.last().v_ba[0] * 1.5);
        assert!(g(lo) > 0.0 && g(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let root = 0.5 * (lo + hi);
        let got = traj.last().v_ba[0];
        assert!((got - root).abs() < 1e-9 * root, "m={m} kappa={kappa}: {got} vs {root}");
    }
}

#[test]
fn v_b_is_non_increasing() {
    let prior = BernoulliGaussian::new(0.1).unwrap();
    for (l, w, m) in [(1, 0, 230), (1, 0, 512), (8, 1, 205), (8, 1, 300), (16, 1, 230)] {
        let c = CouplingConfig::new(l, w, 1024, m, 1e-3).unwrap();
        let traj = StateEvolution::with_condition_number(&c, 10.0, prior).unwrap().run(300, DEFAULT_FP_TOL).unwrap();
        let bad = traj.monotonicity_violations(1e-14);
        assert!(bad.is_empty(), "(L, W, M) = ({l}, {w}, {m}): increases at {:?}", &bad[..bad.len().min(5)]);
    }
}

#[test]
fn depends_on_n_only_through_the_rate() {
    let prior = BernoulliGaussian::new(0.1).unwrap();
    let run = |n: usize| {
        let c = CouplingConfig::new(8, 1, n, n / 4, 1e-3).unwrap();
        StateEvolution::with_condition_number(&c, 10.0, prior).unwrap().run(60, DEFAULT_FP_TOL).unwrap()
    };
    let (a, b) = (run(1024), run(4096));
    for t in 1..=60 {
        for (x, y) in a.v_b_at(t).iter().zip(b.v_b_at(t)) {
            assert!((x - y).abs() < 0.02 * y.max(1e-3), "t={t}: {x} vs {y}");
        }
    }
}

#[test]
fn coupled_boundary_sections_lead() {
    // boundary columns are observed by fewer, less crowded rows and converge first
    let prior = BernoulliGaussian::new(0.1).unwrap();
    let c = CouplingConfig::new(8, 1, 1024, 205, 1e-3).unwrap();
    let traj = StateEvolution::with_condition_number(&c, 10.0, prior).unwrap().run(40, DEFAULT_FP_TOL).unwrap();
    let v = traj.v_b_at(40);
    assert!(v[0] < v[3] && v[7] < v[4], "{v:?}");
}
