use statrs::function::erf::erfc;
use tq_core::quad;
use tq_core::sim::{self, HitKind, McEstimate, RngStream, Simulator, Termination};
use tq_core::tq::{self, TqParams, TqState};

fn simulator(q: f64) -> Simulator {
    Simulator::new(TqParams::new(q).unwrap()).unwrap()
}

#[test]
fn holding_times_and_jump_directions() {
    let s = simulator(2.0);
    let mut rng = RngStream::new(3, 0).rng();
    let n = 200_000;
    let mut holds = Vec::with_capacity(n);
    let mut downs = 0usize;
    for _ in 0..n {
        let (dt, next) = s.step(0, &mut rng);
        holds.push(dt);
        downs += usize::from(next == -1);
    }
    let hold = McEstimate::from_samples(&holds);
    assert!(hold.z_score(1.0 / 3.0) < 4.0, "{hold:?}");
    let freq = downs as f64 / n as f64;
    let se = (2.0 / 9.0 / n as f64).sqrt();
    assert!((freq - 2.0 / 3.0).abs() < 4.0 * se, "{freq}");
}

#[test]
fn paths_are_reproducible_and_well_formed() {
    let s = simulator(1.5);
    let a = s.simulate_path(TqState::Negative(2), 50.0, -20, &mut RngStream::new(9, 4).rng()).unwrap();
    let b = s.simulate_path(TqState::Negative(2), 50.0, -20, &mut RngStream::new(9, 4).rng()).unwrap();
    assert_eq!(a, b);
    assert!(a.jump_times.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(a.states.len(), a.jump_times.len() + 1);
    for w in a.states.windows(2) {
        match (w[0], w[1]) {
            (TqState::Negative(i), TqState::Negative(j)) => assert_eq!((i - j).abs(), 1),
            (TqState::Negative(-20), TqState::Zero) => {}
            other => panic!("illegal transition {other:?}"),
        }
    }
    assert_eq!(a.state_at(0.0), TqState::Negative(2));
    if a.terminated_by == Termination::HitFloorSpliced {
        assert!(a.zero_time().is_none_or(|t| t <= 50.0));
    }
}

#[test]
fn estimates_do_not_depend_on_the_thread_count() {
    let s = simulator(2.0);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| s.estimate_laplace(HitKind::ToZero, 0, 0, 1.0, -12, 2000, 77).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn hitting_zero_transform_matches_closed_form() {
    let s = simulator(2.0);
    let p = s.params();
    for &(n, lam) in &[(0, 1.0), (1, 0.3), (-1, 2.0)] {
        let est = s.estimate_laplace(HitKind::ToZero, n, 0, lam, -25, 40_000, (1000 + n) as u64).unwrap();
        let want = tq::h_to_zero(n, lam, p).unwrap().value;
        assert!(est.z_score(want) < 4.0, "n={n}: {est:?} vs {want}");
    }
}

#[test]
fn hitting_time_of_zero_scales_with_the_level() {
    // τ from q^{n+1} has the law of q² τ from q^n.
    let q: f64 = 2.0;
    let s = simulator(q);
    let a: Vec<f64> = s.tau_zero_samples(1, 20_000, 41).iter().map(|t| t / (q * q)).collect();
    let b = s.tau_zero_samples(0, 20_000, 42);
    // 1% critical value of the two-sample KS statistic at these sizes.
    assert!(sim::ks_two_sample(&a, &b) < 1.63 * (2.0 / 20_000.0f64).sqrt());
}

#[test]
fn upward_transform_near_zero_lambda_is_the_escape_probability() {
    let s = simulator(2.0);
    let est = s.estimate_laplace(HitKind::Up, 0, 1, 1e-6, 0, 40_000, 5).unwrap();
    assert!(est.z_score(0.5) < 4.0, "{est:?}");
}

#[test]
fn downward_hit_is_certain() {
    let s = simulator(2.0);
    let est = s.estimate_laplace(HitKind::Down, 0, -1, 0.0, 0, 1000, 6).unwrap();
    assert_eq!(est.mean, 1.0);
    assert_eq!(est.std_error, 0.0);
}

#[test]
fn invalid_requests_are_refused() {
    let s = simulator(2.0);
    assert!(s.estimate_laplace(HitKind::Down, 0, 1, 1.0, 0, 1000, 1).is_err());
    assert!(s.estimate_laplace(HitKind::Up, 0, -1, 1.0, 0, 1000, 1).is_err());
    assert!(s.estimate_laplace(HitKind::ToZero, 0, 0, 1.0, -5, 10, 1).is_err());
    let mut rng = RngStream::new(1, 1).rng();
    assert!(s.simulate_path(TqState::Zero, 1.0, -5, &mut rng).is_err());
    assert!(s.simulate_path(TqState::Positive(0), 1.0, 3, &mut rng).is_err());
    assert!(sim::gumbel_limit_check(&[1.5], 100, 1).is_err());
}

#[test]
fn limit_density_is_a_probability_density() {
    let mass = quad::integrate(|x| Ok(sim::gumbel_target_density(x)), -8.0, 60.0, 1e-14, 1e-13, 10_000).unwrap();
    assert!((mass.value - 1.0).abs() < 1e-11);
}

#[test]
fn limit_cdf_matches_the_closed_form() {
    // The density is the law of -log(Z²) with Z standard normal, whose cdf
    // is erfc(sqrt(e^{-x}/2)).
    let xs: Vec<f64> = (0..60).map(|i| -4.0 + 0.25 * i as f64).collect();
    let cdf = sim::gumbel_target_cdf(&xs).unwrap();
    for (x, c) in xs.iter().zip(cdf) {
        let want = erfc(((-x).exp() / 2.0).sqrt());
        // statrs' erfc is accurate to about 5e-11 relative here.
        assert!((c - want).abs() < 1e-10, "x={x}: {c} vs {want}");
    }
    // C libm erfc(sqrt(e^{1/4}/2)).
    let c = sim::gumbel_target_cdf(&[-0.25]).unwrap()[0];
    assert!((c - 0.2571519167030837).abs() < 1e-15);
}

#[test]
fn ks_distance_examples() {
    assert_eq!(sim::ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
    assert_eq!(sim::ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
}
