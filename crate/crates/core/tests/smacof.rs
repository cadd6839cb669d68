use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spectral_mds::linalg::{centered, procrustes_align, rms_row_distance};
use spectral_mds::smacof::{
    rre_accelerate, rre_extrapolate, smacof_solve, smacof_solve_rre, smacof_step, FactoredV, DEFAULT_RRE_PERIOD,
};
use spectral_mds::{SolverOptions, StressProblem, Weights};

fn distances(x: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.nrows(), |i, j| (x.row(i) - x.row(j)).norm())
}

fn random_problem(n: usize, rng: &mut ChaCha8Rng) -> StressProblem {
    let pts = DMatrix::from_fn(n, 3, |_, _| rng.random_range(-1.0..1.0));
    let mut d = distances(&pts);
    for i in 0..n {
        for j in 0..i {
            d[(i, j)] *= rng.random_range(0.8..1.2);
            d[(j, i)] = d[(i, j)];
        }
    }
    if rng.random_bool(0.5) {
        StressProblem::unit(d).unwrap()
    } else {
        StressProblem::relative(d).unwrap()
    }
}

#[test]
fn two_point_step_by_hand() {
    let problem = StressProblem::unit(DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 2.0, 0.0])).unwrap();
    let x = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
    let next = smacof_step(&problem, &FactoredV::new(&problem).unwrap(), &x);
    assert_eq!(next, DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 1.0, 0.0]));
    assert_eq!(problem.stress(&next), 0.0);
}

#[test]
fn perfect_fit_is_fixed_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = centered(&DMatrix::from_fn(8, 2, |_, _| rng.random_range(-1.0..1.0)));
    let w = DMatrix::from_fn(8, 8, |i, j| if i == j { 0.0 } else { 1.0 + (i * j % 3) as f64 });
    let problem = StressProblem::new(distances(&x), Weights::Table(w)).unwrap();
    let next = smacof_step(&problem, &FactoredV::new(&problem).unwrap(), &x);
    assert!((&next - &x).amax() < 1e-12);
    assert!(problem.stress(&next) < 1e-24);
}

#[test]
fn unit_fast_path_matches_general_factorization() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for n in [3, 10, 40] {
        let pts = DMatrix::from_fn(n, 3, |_, _| rng.random_range(-1.0..1.0));
        let problem = StressProblem::unit(distances(&pts) * 1.1).unwrap();
        let x = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0));
        let fast = smacof_step(&problem, &FactoredV::new(&problem).unwrap(), &x);
        let general = smacof_step(&problem, &FactoredV::general(&problem).unwrap(), &x);
        assert!((centered(&fast) - centered(&general)).amax() < 1e-10);
    }
}

#[test]
fn recovers_euclidean_configuration() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let truth = DMatrix::from_fn(100, 3, |_, _| rng.random_range(-1.0..1.0));
    let d = distances(&truth);
    let diameter = d.max();
    let x0 = DMatrix::from_fn(100, 3, |i, k| truth[(i, k)] + 0.05 * diameter * rng.random_range(-1.0..1.0));
    let problem = StressProblem::unit(d.clone()).unwrap();
    let opts = SolverOptions {
        rel_tol: 1e-14,
        max_iter: 20000,
        ..Default::default()
    };
    let (x, log) = smacof_solve(&problem, &x0, &opts).unwrap();
    assert!(problem.stress(&x) <= 1e-6 * d.norm_squared() / 2.0);
    assert!(rms_row_distance(&procrustes_align(&x, &truth), &truth) <= 1e-3 * diameter);
    // near zero stress round-off can lift the last entry by a few ulps of σ₀
    let s = log.stresses();
    assert!(s.windows(2).all(|w| w[1] <= w[0] + 1e-12 * s[0]));
}

#[test]
fn single_iteration_logs_one_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let problem = random_problem(10, &mut rng);
    let x0 = DMatrix::from_fn(10, 2, |_, _| rng.random_range(-1.0..1.0));
    let opts = SolverOptions {
        max_iter: 1,
        ..Default::default()
    };
    let (_, log) = smacof_solve(&problem, &x0, &opts).unwrap();
    assert_eq!(log.iterations(), 1);
    let zero = SolverOptions {
        max_iter: 0,
        ..Default::default()
    };
    assert!(smacof_solve(&problem, &x0, &zero).is_err());
}

#[test]
fn logs_are_monotone_and_outputs_centered() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let n = rng.random_range(3..40);
        let problem = random_problem(n, &mut rng);
        let x0 = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0));
        let opts = SolverOptions {
            rel_tol: 1e-7,
            max_iter: 500,
            ..Default::default()
        };
        let (x, log) = smacof_solve(&problem, &x0, &opts).unwrap();
        let s = log.stresses();
        assert!(s.windows(2).all(|w| w[1] <= w[0]));
        for col in x.column_iter() {
            assert!(col.sum().abs() < 1e-9 * x.amax().max(1.0));
        }
        let step = smacof_step(&problem, &FactoredV::new(&problem).unwrap(), &x0);
        assert!(problem.stress(&step) < problem.stress(&x0));
    }
}

#[test]
fn rre_recovers_geometric_limit() {
    let limit = DMatrix::from_fn(6, 2, |i, k| (i as f64 + 1.0) * if k == 0 { 1.0 } else { -0.5 });
    let e = DMatrix::from_fn(6, 2, |i, k| ((i * 3 + k) as f64).cos());
    let history: Vec<DMatrix<f64>> = (0..6).map(|j| &limit + &e * (3.0 * 0.7f64.powi(j))).collect();
    let s = rre_extrapolate(&history).unwrap();
    assert!((s - limit).amax() < 1e-8);
}

#[test]
fn rre_safeguard() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let problem = random_problem(15, &mut rng);
    let same = DMatrix::from_fn(15, 2, |_, _| rng.random_range(-1.0..1.0));
    let out = rre_accelerate(&problem, &vec![same.clone(); 4]).unwrap();
    assert_eq!(out, same);

    let factored = FactoredV::new(&problem).unwrap();
    for _ in 0..20 {
        let mut history = vec![DMatrix::from_fn(15, 2, |_, _| rng.random_range(-1.0..1.0))];
        for _ in 0..DEFAULT_RRE_PERIOD {
            let next = smacof_step(&problem, &factored, history.last().unwrap());
            history.push(next);
        }
        let out = rre_accelerate(&problem, &history).unwrap();
        assert!(problem.stress(&out) <= problem.stress(history.last().unwrap()));
    }
}

#[test]
fn accelerated_solve_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let problem = random_problem(30, &mut rng);
    let x0 = DMatrix::from_fn(30, 2, |_, _| rng.random_range(-1.0..1.0));
    let (_, log) = smacof_solve_rre(&problem, &x0, &SolverOptions::default(), DEFAULT_RRE_PERIOD).unwrap();
    let s = log.stresses();
    assert!(s.windows(2).all(|w| w[1] <= w[0]));
    assert!(smacof_solve_rre(&problem, &x0, &SolverOptions::default(), 0).is_err());
}
