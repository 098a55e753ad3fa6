use super::*;
use crate::domains::{membership, DomainSpec, FeaturePolytope};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(n, n) * 0.5
}

fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

fn fcfg() -> ForgettingConfig {
    ForgettingConfig::new(0.99, 0.98, 1.0 / 5000.0).unwrap()
}

fn antisparse_dcfg() -> DynamicsConfig {
    DynamicsConfig {
        nu_max: 500,
        tol: 1e-6,
        eta_y: StepSchedule { c: 0.9, floor: 0.0 },
        eta_lambda: 1.0,
        lambda_init: 0.0,
        warm_start: true,
    }
}

#[test]
fn gamma_y_plug_in() {
    let g = compute_gamma_y(&DMatrix::identity(3, 3), &DVector::zeros(3), 0.5, 2).unwrap();
    assert!((g - 2.0).abs() < 1e-15);
}

#[test]
fn gamma_y_large_k_limit() {
    let z = 0.99;
    let g = compute_gamma_y(&DMatrix::identity(2, 2), &DVector::zeros(2), z, 100_000).unwrap();
    assert!((g - (1.0 - z) / z).abs() < 1e-15);
}

#[test]
fn gamma_y_matches_dense_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let n = rng.random_range(1..6);
        let b = random_spd(n, &mut rng);
        let y = random_vec(n, &mut rng);
        let z: f64 = rng.random_range(0.5..0.999);
        let k = rng.random_range(1..400);
        let dense = 1.0 / ((z - z.powi(k as i32)) / (1.0 - z) + (y.transpose() * &b * &y)[(0, 0)]);
        let g = compute_gamma_y(&b, &y, z, k).unwrap();
        assert!(((g - dense) / dense).abs() < 1e-12);
    }
}

#[test]
fn gamma_at_first_sample_needs_nonzero_output() {
    let r = compute_gamma_y(&DMatrix::identity(2, 2), &DVector::zeros(2), 0.9, 1);
    assert!(matches!(r, Err(Error::DegenerateInput(_))));
    let y = DVector::from_vec(vec![1.0, 0.0]);
    assert!((compute_gamma_y(&DMatrix::identity(2, 2), &y, 0.9, 1).unwrap() - 1.0).abs() < 1e-15);
}

#[test]
fn gamma_e_scalar_identity() {
    let g = compute_gamma_e(&ErrorCorrelation::from_eps(1e-3), &DVector::zeros(4), 0.99, 100_000).unwrap();
    assert!((g - 0.01 / 0.99).abs() < 1e-12);
    let mut e = DVector::zeros(3);
    e[0] = 1.0;
    let g = compute_gamma_e(&ErrorCorrelation::from_eps(1.0), &e, 0.5, 2).unwrap();
    assert!((g - 2.0 / 3.0).abs() < 1e-15);
}

#[test]
fn gamma_e_shares_the_gamma_y_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let b = random_spd(3, &mut rng);
        let v = random_vec(3, &mut rng);
        let k = rng.random_range(2..50);
        let ge = compute_gamma_e(&ErrorCorrelation::ExactMatrix(b.clone()), &v, 0.9, k).unwrap();
        let gy = compute_gamma_y(&b, &v, 0.9, k).unwrap();
        assert_eq!(ge, gy);
        let eps = 0.3;
        let ge = compute_gamma_e(&ErrorCorrelation::from_eps(eps), &v, 0.9, k).unwrap();
        let gy = compute_gamma_y(&(DMatrix::identity(3, 3) / eps), &v, 0.9, k).unwrap();
        assert!((ge - gy).abs() < 1e-14 * gy);
    }
}

#[test]
fn gradient_vanishes_at_origin() {
    let s = NetworkState::identity_init(3, 4, 5.0, 1000.0, UpdateMode::Steady).unwrap();
    let g = grad_j(&s, &DVector::zeros(3), &DVector::zeros(3), 0.3, 0.7).unwrap();
    assert_eq!(g, DVector::zeros(3));
}

#[test]
fn two_layer_form_matches_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let w = DMatrix::from_fn(3, 5, |_, _| rng.random_range(-1.0..1.0));
        let s = NetworkState::new(
            w.clone(),
            random_spd(3, &mut rng),
            ErrorCorrelation::from_eps(1e-2),
            UpdateMode::Steady,
        )
        .unwrap();
        let x = random_vec(5, &mut rng);
        let y = random_vec(3, &mut rng);
        let e = &y - &w * &x;
        let (gy, ge) = gammas_for_state(&s, &y, &e, &fcfg()).unwrap();
        let a = grad_j(&s, &y, &e, gy, ge).unwrap();
        let b = grad_j_two_layer(&s, &y, &x, gy, ge).unwrap();
        assert!((a - b).amax() < 1e-12 * (1.0 + ge * 100.0));
    }
}

#[test]
fn update_w_cases() {
    let mut s = NetworkState::new(
        DMatrix::zeros(1, 1),
        DMatrix::identity(1, 1),
        ErrorCorrelation::from_eps(1.0),
        UpdateMode::Steady,
    )
    .unwrap();
    update_w(&mut s, &DVector::from_vec(vec![2.0]), &DVector::from_vec(vec![3.0]), 0.1).unwrap();
    assert!((s.w()[(0, 0)] - 0.6).abs() < 1e-15);
    let before = s.w().clone();
    update_w(&mut s, &DVector::zeros(1), &DVector::from_vec(vec![3.0]), 0.1).unwrap();
    assert_eq!(s.w(), &before);
}

#[test]
fn lms_drives_prediction_error_to_zero() {
    let x = DVector::from_vec(vec![0.8, -0.5]);
    let target = DVector::from_vec(vec![0.3]);
    let mu = 1.0 / x.norm_squared();
    let mut s = NetworkState::new(
        DMatrix::zeros(1, 2),
        DMatrix::identity(1, 1),
        ErrorCorrelation::from_eps(1.0),
        UpdateMode::Steady,
    )
    .unwrap();
    for _ in 0..100 {
        let e = &target - s.w() * &x;
        update_w(&mut s, &e, &x, mu).unwrap();
    }
    assert!((&target - s.w() * &x).norm() < 1e-12);
}

#[test]
fn steady_update_with_zero_output_inflates() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let b = random_spd(4, &mut rng);
    let mut s = NetworkState::new(DMatrix::identity(4, 4), b.clone(), ErrorCorrelation::from_eps(1.0), UpdateMode::Steady)
        .unwrap();
    let f = fcfg();
    update_by(&mut s, &DVector::zeros(4), &f, UpdateMode::Steady).unwrap();
    assert!((s.b_y() - &b / f.zeta_y).amax() < 1e-12);
    assert_eq!(s.k(), 2);
}

#[test]
fn exact_update_tracks_dense_inverse() {
    let n = 5;
    let (zeta, eps) = (0.99, 1e-3);
    let f = ForgettingConfig::new(zeta, 0.99, eps).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut s = NetworkState::new(
        DMatrix::identity(n, n),
        DMatrix::identity(n, n) / eps,
        ErrorCorrelation::from_eps(eps),
        UpdateMode::Exact,
    )
    .unwrap();
    let mut history = Vec::new();
    for k in 1..=200usize {
        let y = random_vec(n, &mut rng);
        history.push(y.clone());
        update_by(&mut s, &y, &f, UpdateMode::Exact).unwrap();
        let norm = (1.0 - zeta) / (1.0 - zeta.powi(k as i32));
        let mut r = DMatrix::zeros(n, n);
        for (i, v) in history.iter().enumerate() {
            r += v * v.transpose() * (norm * zeta.powi((k - 1 - i) as i32));
        }
        let eps_k = eps * zeta.powi(k as i32 - 1) * (1.0 - zeta) / (1.0 - zeta.powi(k as i32));
        let eps_k = if k == 1 { eps } else { eps_k };
        let oracle = (r + DMatrix::identity(n, n) * eps_k).try_inverse().unwrap();
        let rel = (s.b_y() - &oracle).norm() / oracle.norm();
        assert!(rel < 1e-8, "k={k}: {rel}");
        assert!(crate::linalg::asymmetry(s.b_y()) < 1e-10);
    }
}

#[test]
fn scalar_be_is_untouched() {
    let mut s = NetworkState::identity_init(2, 3, 5.0, 1000.0, UpdateMode::Steady).unwrap();
    let before = s.clone();
    update_be(&mut s, &DVector::from_vec(vec![3.0, -1.0]), &fcfg(), UpdateMode::Steady).unwrap();
    assert_eq!(s, before);
}

#[test]
fn exact_be_with_zero_error_inflates() {
    let f = fcfg();
    let b = DMatrix::identity(2, 2) * 7.0;
    let mut s = NetworkState::identity_init(2, 2, 5.0, 1000.0, UpdateMode::Exact)
        .unwrap()
        .with_exact_be(b.clone())
        .unwrap();
    s.set_counter(10).unwrap();
    update_be(&mut s, &DVector::zeros(2), &f, UpdateMode::Exact).unwrap();
    let z = f.zeta_e;
    let c = (1.0 - z.powi(10)) / (z - z.powi(10));
    let ErrorCorrelation::ExactMatrix(after) = s.b_e() else { unreachable!() };
    assert!((after - &b * c).amax() < 1e-12);
}

#[test]
fn zero_input_is_a_fixed_point() {
    let f = fcfg();
    let domains = vec![
        DomainSpec::antisparse(3),
        DomainSpec::nonneg_antisparse(3),
        DomainSpec::sparse(3),
        DomainSpec::nonneg_sparse(3),
        DomainSpec::feature(FeaturePolytope::new(3, &[0, 1], vec![vec![0, 1, 2]]).unwrap()),
        DomainSpec::hpolytope(crate::domains::feature_to_hrep(
            &FeaturePolytope::new(3, &[0, 1], vec![vec![0, 1, 2]]).unwrap(),
        )),
    ];
    for d in domains {
        let s = NetworkState::identity_init(3, 4, 5.0, 5000.0, UpdateMode::Steady).unwrap();
        let rec = run_dynamics(&s, &DVector::zeros(4), &d, &f, &antisparse_dcfg()).unwrap();
        assert!(rec.converged, "{}", d.name());
        assert!(rec.nu_used <= 2);
        assert_eq!(rec.y, DVector::zeros(3));
    }
}

#[test]
fn antisparse_iterates_stay_in_box() {
    let f = fcfg();
    let d = DomainSpec::antisparse(2);
    let s = NetworkState::identity_init(2, 2, 1.0, 5000.0, UpdateMode::Steady).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let x = DVector::from_fn(2, |_, _| rng.random_range(-3.0..3.0));
        for nu_max in 1..30 {
            let dc = DynamicsConfig { nu_max, ..antisparse_dcfg() };
            let rec = run_dynamics(&s, &x, &d, &f, &dc).unwrap();
            assert!(membership(&d, &rec.y, 0.0).unwrap());
        }
    }
}

#[test]
fn sparse_outputs_are_nearly_feasible() {
    let f = ForgettingConfig::new(0.99, 0.99, 1e-3).unwrap();
    let d = DomainSpec::sparse(3);
    let dc = DynamicsConfig {
        nu_max: 500,
        tol: 1e-6,
        eta_y: StepSchedule { c: 0.1, floor: 1e-3 },
        eta_lambda: 1.0,
        lambda_init: 0.0,
        warm_start: false,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let s = NetworkState::identity_init(3, 3, 1.0, 1000.0, UpdateMode::Steady).unwrap();
        let x = DVector::from_fn(3, |_, _| rng.random_range(-1.5..1.5));
        let rec = run_dynamics(&s, &x, &d, &f, &dc).unwrap();
        assert!(rec.y.iter().map(|v| v.abs()).sum::<f64>() <= 1.0 + 1e-2, "{}", rec.y);
    }
}

#[test]
fn error_is_consistent_with_input() {
    let f = fcfg();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let w = DMatrix::from_fn(3, 5, |_, _| rng.random_range(-1.0..1.0));
    let s = NetworkState::new(w.clone(), DMatrix::identity(3, 3), ErrorCorrelation::from_eps(1e-3), UpdateMode::Steady)
        .unwrap();
    let x = random_vec(5, &mut rng);
    let rec = run_dynamics(&s, &x, &DomainSpec::antisparse(3), &f, &antisparse_dcfg()).unwrap();
    assert!((&rec.e - (&rec.y - &w * &x)).amax() < 1e-12);
}

#[test]
fn empty_stream_returns_init() {
    let s = NetworkState::identity_init(2, 3, 5.0, 1000.0, UpdateMode::Steady).unwrap();
    let (out, recs) = fit_online(
        &DMatrix::zeros(3, 0),
        &DomainSpec::antisparse(2),
        &fcfg(),
        &antisparse_dcfg(),
        MuSchedule::Constant { mu: 0.03 },
        s.clone(),
    )
    .unwrap();
    assert_eq!(out, s);
    assert!(recs.is_empty());
}

#[test]
fn fit_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let xs = DMatrix::from_fn(4, 200, |_, _| rng.random_range(-1.0..1.0));
    let run = || {
        let s = NetworkState::identity_init(2, 4, 5.0, 5000.0, UpdateMode::Steady).unwrap();
        fit_online(&xs, &DomainSpec::antisparse(2), &fcfg(), &antisparse_dcfg(), MuSchedule::Constant { mu: 0.03 }, s)
            .unwrap()
    };
    let (a, ra) = run();
    let (b, rb) = run();
    assert_eq!(a, b);
    assert_eq!(ra, rb);
}

#[test]
fn divergence_reports_sample_index() {
    let s = NetworkState::identity_init(1, 1, 1.0, 1.0, UpdateMode::Steady).unwrap();
    let mut xs = DMatrix::zeros(1, 3);
    xs[(0, 2)] = 1e300;
    let dc = DynamicsConfig {
        eta_y: StepSchedule { c: 1e300, floor: 0.0 },
        ..antisparse_dcfg()
    };
    let h = DomainSpec::hpolytope(
        crate::domains::HPolytope::new(DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, 1.0)).unwrap(),
    );
    let err = fit_online(&xs, &h, &fcfg(), &dc, MuSchedule::Constant { mu: 0.0 }, s).unwrap_err();
    assert!(matches!(err, Error::Divergence { sample: Some(2), .. }), "{err:?}");
}

#[test]
fn checkpoint_round_trip_is_lossless() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let xs = DMatrix::from_fn(4, 50, |_, _| rng.random_range(-1.0..1.0));
    let s = NetworkState::identity_init(2, 4, 5.0, 5000.0, UpdateMode::Steady).unwrap();
    let (s, _) = fit_online(&xs, &DomainSpec::antisparse(2), &fcfg(), &antisparse_dcfg(), MuSchedule::Constant { mu: 0.03 }, s)
        .unwrap();
    let s = s.with_exact_be(random_spd(2, &mut rng)).unwrap();
    let ck = Checkpoint::new(s, fcfg());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.json");
    ck.save(&path).unwrap();
    assert_eq!(Checkpoint::load(&path).unwrap(), ck);
}
