use prob_integrate::gpr::{fit_gp, PriorMeanStrategy};
use prob_integrate::prob_richardson::{gp_richardson, AdaptiveConfig};
use prob_integrate::quad::{test_function, Integrand};

const EXACT: f64 = 0.189_302_131_687_783_83;

fn run(tau: f64, prior: PriorMeanStrategy) -> prob_integrate::prob_richardson::ProbEstimate {
    let f = Integrand::new(test_function, 0.0, 1.0).unwrap();
    gp_richardson(&f, &AdaptiveConfig { tau, ..Default::default() }, prior).unwrap()
}

#[test]
fn dataset_grows_by_one_with_distinct_steps() {
    let r = run(1e-4, PriorMeanStrategy::LastObservation);
    for (i, e) in r.history.iter().enumerate() {
        assert_eq!(e.dataset_size, 4 + i);
    }
    let mut hs: Vec<f64> = r.samples.iter().map(|s| s.h).collect();
    hs.sort_by(f64::total_cmp);
    assert!(hs.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn selected_steps_shrink_monotonically() {
    let r = run(1e-4, PriorMeanStrategy::LastObservation);
    let mut h_min = 0.25;
    for s in &r.samples[4..] {
        assert!(s.h > 0.0 && s.h < h_min, "{} not in (0, {h_min})", s.h);
        h_min = s.h;
    }
}

#[test]
fn refit_reproduces_sigma0() {
    for prior in [
        PriorMeanStrategy::Zero,
        PriorMeanStrategy::AverageOfObservations,
        PriorMeanStrategy::LastObservation,
    ] {
        let r = run(1e-3, prior);
        assert!(r.converged);
        let model = fit_gp(&r.samples, prior, &Default::default()).unwrap();
        assert!((model.posterior_at(0.0).sd - r.sigma0).abs() <= 1e-9);
    }
}

#[test]
fn calibration_band() {
    let r = run(1e-3, PriorMeanStrategy::LastObservation);
    let z = (r.estimate - EXACT).abs() / r.sigma0;
    if z > 3.0 {
        eprintln!("warning: estimate is {z:.2} standard deviations from the exact integral");
    }
    assert!(r.converged);
}

#[test]
fn two_augmentations_suffice_at_matching_tolerance() {
    let probe = run(1e-12, PriorMeanStrategy::LastObservation);
    let tau = probe.history[2].sigma0;
    let r = run(tau, PriorMeanStrategy::LastObservation);
    assert!(r.converged);
    assert_eq!(r.new_points(), 2);
    assert!((r.estimate - EXACT).abs() <= 2.0 * r.sigma0);
}
