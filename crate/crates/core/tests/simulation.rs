use coopreg::analysis::{self, assemble_output_feedback, assemble_sharing_matrix};
use coopreg::examples;
use coopreg::linalg::{self, Matrix, Tolerances};
use coopreg::pipeline;
use coopreg::scenario::Scenario;
use coopreg::sim::{matched_single_state, sum_equivalence, ClosedLoopSystem, Metrics, SimError, Trajectory};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tol() -> Tolerances {
    Tolerances::default()
}

fn system(s: &Scenario, w: &[f64]) -> ClosedLoopSystem {
    let c = s.controller(&tol()).unwrap();
    ClosedLoopSystem::new(s.plant.realize(w).unwrap(), &s.exosystem, s.actuators, c).unwrap()
}

fn worst_w(s: &Scenario) -> Vec<f64> {
    pipeline::select_w(s, &s.controller(&tol()).unwrap()).unwrap()
}

fn max_abs_diff(a: &Trajectory, b: &Trajectory) -> f64 {
    a.states
        .iter()
        .zip(&b.states)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

#[test]
fn superposition_holds_statewise() {
    let s = examples::scenario("exp2-multi").unwrap();
    let sys = system(&s, &worst_w(&s));
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = sys.random_initial_state(&s.v0, 3.0, &mut rng).unwrap();
    let y = sys.random_initial_state(&[0.3, -0.7], 3.0, &mut rng).unwrap();
    let (alpha, beta) = (0.7, -1.3);
    let combo: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + beta * b).collect();
    let (tx, ty, tc) = (
        sys.simulate(&x, 1e-3, 30.0, 50).unwrap(),
        sys.simulate(&y, 1e-3, 30.0, 50).unwrap(),
        sys.simulate(&combo, 1e-3, 30.0, 50).unwrap(),
    );
    let mut worst: f64 = 0.0;
    for k in 0..tc.len() {
        for j in 0..sys.dim() {
            let expected = alpha * tx.states[k][j] + beta * ty.states[k][j];
            worst = worst.max((tc.states[k][j] - expected).abs());
        }
    }
    assert!(worst < 1e-9, "{worst:e}");
}

#[test]
fn rk4_error_drops_by_eight_when_step_halves() {
    let s = examples::scenario("exp1-single").unwrap();
    let sys = system(&s, &worst_w(&s));
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x0 = sys.random_initial_state(&s.v0, 3.0, &mut rng).unwrap();
    // common record grid every 0.04 s
    let run = |dt: f64, every: usize| sys.simulate(&x0, dt, 2.0, every).unwrap();
    let (coarse, mid, fine) = (run(4e-3, 10), run(2e-3, 20), run(1e-3, 40));
    assert_eq!(coarse.times.len(), fine.times.len());
    let e1 = max_abs_diff(&coarse, &mid);
    let e2 = max_abs_diff(&mid, &fine);
    assert!(e1 / e2 >= 8.0, "ratio {} ({e1:e} / {e2:e})", e1 / e2);
}

#[test]
fn steady_state_keeps_error_at_zero() {
    for name in examples::NAMES {
        let s = examples::scenario(name).unwrap();
        for w in [worst_w(&s), s.plant.w_box.center()] {
            let sys = system(&s, &w);
            let x0 = sys.steady_state(&s.v0, &tol()).unwrap();
            let traj = sys.simulate(&x0, 1e-3, 30.0, 1).unwrap();
            let worst = traj.e.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
            assert!(worst < 1e-6, "{name}: {worst:e}");
        }
    }
}

/// Random state whose controller blocks are identical across agents.
fn identical_agent_state(sys: &ClosedLoopSystem, v0: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut x = sys.random_initial_state(v0, 3.0, rng).unwrap();
    let lay = sys.layout;
    for i in 1..lay.agents {
        for j in 0..lay.l {
            x[lay.eta1_of(i) + j] = x[lay.eta1_of(0) + j];
            x[lay.eta2_of(i) + j] = x[lay.eta2_of(0) + j];
        }
        for j in 0..lay.r {
            x[lay.varsigma_of(i) + j] = x[lay.varsigma_of(0) + j];
        }
        x[lay.x + i] = x[lay.x];
    }
    x
}

#[test]
fn coupling_strength_does_not_affect_regulation() {
    for (name, scale) in [("exp1-multi", 10.0), ("exp2-multi", 10.0)] {
        let base = examples::scenario(name).unwrap();
        let mut strong = base.clone();
        strong.gains.sigma1 *= scale;
        strong.gains.sigma2 *= scale;
        for s in [&base, &strong] {
            assert!(pipeline::certify_scenario(s, &tol()).unwrap().1.passed());
        }
        let w = worst_w(&base);
        let (a, b) = (system(&base, &w), system(&strong, &w));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x0 = identical_agent_state(&a, &base.v0, &mut rng);
        let (ta, tb) = (a.simulate(&x0, 1e-3, 30.0, 10).unwrap(), b.simulate(&x0, 1e-3, 30.0, 10).unwrap());
        let worst = ta.e.iter().zip(&tb.e).fold(0.0_f64, |m, (p, q)| m.max((p - q).abs()));
        assert!(worst < 1e-8, "{name}: {worst:e}");
    }
}

fn sum_runs(name: &str, identical: bool, seed: u64) -> (ClosedLoopSystem, Trajectory, ClosedLoopSystem, Trajectory) {
    let multi = examples::scenario(name).unwrap();
    let single = multi.equivalent_single();
    let w = worst_w(&multi);
    let (ms, ss) = (system(&multi, &w), system(&single, &w));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x0 = ms.random_initial_state(&multi.v0, 3.0, &mut rng).unwrap();
    if identical {
        let lay = ms.layout;
        for i in 1..lay.agents {
            for j in 0..lay.r {
                x0[lay.varsigma_of(i) + j] = x0[lay.varsigma_of(0) + j];
            }
        }
    }
    let y0 = matched_single_state(&ms.layout, &ss.layout, &x0);
    let tm = ms.simulate(&x0, 1e-3, 30.0, 10).unwrap();
    let ts = ss.simulate(&y0, 1e-3, 30.0, 10).unwrap();
    (ms, tm, ss, ts)
}

#[test]
fn sums_follow_the_single_actuator_loop() {
    for name in ["exp1-multi", "exp2-multi"] {
        let (ms, tm, ss, ts) = sum_runs(name, true, 21);
        let dev = sum_equivalence(&ms, &tm, &ss, &ts).unwrap();
        assert!(dev.relative < 1e-8, "{name}: {dev:?}");
    }
}

#[test]
fn sum_equivalence_rejects_unmatched_setups() {
    let (ms, tm, ss, ts) = sum_runs("exp1-multi", false, 21);
    assert!(matches!(sum_equivalence(&ms, &tm, &ss, &ts), Err(SimError::ConfigMismatch(_))));

    let multi = examples::scenario("exp1-multi").unwrap();
    let mut single = multi.equivalent_single();
    single.gains.k1 = 1.9;
    let w = multi.plant.w_box.center();
    let (ms, ss) = (system(&multi, &w), system(&single, &w));
    let tm = ms.simulate(&vec![0.0; ms.dim()], 1e-3, 0.1, 1).unwrap();
    let ts = ss.simulate(&vec![0.0; ss.dim()], 1e-3, 0.1, 1).unwrap();
    assert!(matches!(sum_equivalence(&ms, &tm, &ss, &ts), Err(SimError::ConfigMismatch(_))));

    let ts2 = ss.simulate(&vec![0.0; ss.dim()], 5e-4, 0.1, 2).unwrap();
    let single_ok = system(&multi.equivalent_single(), &w);
    assert!(matches!(sum_equivalence(&ms, &tm, &single_ok, &ts2), Err(SimError::ConfigMismatch(_))));
}

#[test]
fn zero_initial_state_gives_zero_sum_deviation() {
    let multi = examples::scenario("exp1-multi").unwrap();
    let w = multi.plant.w_box.center();
    let (ms, ss) = (system(&multi, &w), system(&multi.equivalent_single(), &w));
    let tm = ms.simulate(&vec![0.0; ms.dim()], 1e-3, 5.0, 10).unwrap();
    let ts = ss.simulate(&vec![0.0; ss.dim()], 1e-3, 5.0, 10).unwrap();
    let dev = sum_equivalence(&ms, &tm, &ss, &ts).unwrap();
    assert_eq!(dev.absolute, 0.0);
}

/// Closed-loop matrix without the exosystem rows and columns.
fn regulated_block(sys: &ClosedLoopSystem) -> Matrix {
    let lay = sys.layout;
    let keep: Vec<usize> = (0..lay.dim).filter(|&k| k < lay.v || k >= lay.v + lay.q).collect();
    Matrix::from_fn(keep.len(), keep.len(), |i, j| sys.matrix()[(keep[i], keep[j])])
}

#[test]
fn full_loop_spectrum_matches_certified_blocks() {
    for name in ["exp1-multi", "exp2-multi"] {
        let s = examples::scenario(name).unwrap();
        let c = s.controller(&tol()).unwrap();
        for w in [worst_w(&s), s.plant.w_box.center()] {
            let sys = system(&s, &w);
            let full = linalg::spectral_abscissa(&regulated_block(&sys)).unwrap();
            let single = c.gains.equivalent_single(s.actuators.count);
            let plant = s.plant.realize(&w).unwrap();
            let mut expected = linalg::spectral_abscissa(
                &assemble_output_feedback(&plant, &s.actuators, &c.im, &c.observer, &single).unwrap(),
            )
            .unwrap();
            for lambda in s.graph.nonzero_laplacian_eigenvalues() {
                let m = assemble_sharing_matrix(&s.actuators, &c.im, &c.gains, lambda).unwrap();
                expected = expected.max(linalg::spectral_abscissa(&m).unwrap());
            }
            expected = expected.max(linalg::spectral_abscissa(&c.observer.a0).unwrap());
            assert!((full - expected).abs() < 1e-6, "{name}: {full} vs {expected}");
            assert!(full < 0.0);
        }
    }
}

#[test]
fn uncoupled_unstable_actuators_drift_apart() {
    let mut s = examples::scenario("exp2-multi").unwrap();
    s.gains.sigma1 = 0.0;
    s.gains.sigma2 = 0.0;
    let report = pipeline::certify_scenario(&s, &tol()).unwrap().1;
    assert!(report.failures().all(|r| r.matrix == analysis::SHARING));
    let sys = system(&s, &worst_w(&s));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x0 = sys.random_initial_state(&s.v0, 3.0, &mut rng).unwrap();
    let m = Metrics::compute(&sys.simulate(&x0, 1e-3, 30.0, 10).unwrap(), 0.02);
    assert!(m.tail_max_sharing > 1.0, "{m:?}");
    assert!(m.tail_max_error < 0.02, "{m:?}");
}

#[test]
fn seeded_runs_are_reproducible() {
    let s = examples::scenario("exp1-multi").unwrap();
    let c = s.controller(&tol()).unwrap();
    let w = worst_w(&s);
    let (_, a) = pipeline::simulate_at(&s, &c, &w).unwrap();
    let (_, b) = pipeline::simulate_at(&s, &c, &w).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn right_hand_side_is_linear(seed in any::<u64>(), alpha in -3.0..3.0f64, beta in -3.0..3.0f64) {
        let s = examples::scenario("exp2-multi").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w: Vec<f64> = (0..8).map(|_| rng.random_range(-0.5..0.5)).collect();
        let sys = system(&s, &w);
        let x: Vec<f64> = (0..sys.dim()).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y: Vec<f64> = (0..sys.dim()).map(|_| rng.random_range(-3.0..3.0)).collect();
        let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + beta * b).collect();
        let (mut fx, mut fy, mut fz) = (vec![0.0; sys.dim()], vec![0.0; sys.dim()], vec![0.0; sys.dim()]);
        sys.rhs(&x, &mut fx);
        sys.rhs(&y, &mut fy);
        sys.rhs(&z, &mut fz);
        for k in 0..sys.dim() {
            let expected = alpha * fx[k] + beta * fy[k];
            prop_assert!((fz[k] - expected).abs() <= 1e-9 * (1.0 + expected.abs()));
        }
    }

    #[test]
    fn sharing_metric_is_nonnegative(seed in any::<u64>()) {
        let s = examples::scenario("exp1-multi").unwrap();
        let sys = system(&s, &s.plant.w_box.center());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x0 = sys.random_initial_state(&s.v0, 3.0, &mut rng).unwrap();
        let m = Metrics::compute(&sys.simulate(&x0, 1e-3, 1.0, 50).unwrap(), 0.02);
        prop_assert!(m.tail_max_sharing >= 0.0 && m.tail_max_error >= 0.0);
        prop_assert!(m.error_energy >= 0.0 && m.input_energy >= 0.0);
    }
}
