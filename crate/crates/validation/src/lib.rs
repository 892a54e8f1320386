//! Independent reference computations used to check the library.
//!
//! The composition oracle rebuilds the single-actuator state-feedback loop
//! in its raw coordinates, applies the error-coordinate change numerically
//! and returns the matrix of the composed map. It shares no assembly code
//! with `coopreg::analysis`.

use coopreg::examples;
use coopreg::linalg::{self, companion_pair, Matrix, PolyCoeffs, Tolerances};
use coopreg::models::{ActuatorBank, Exosystem, RealizedPlant};
use coopreg::regulator::{GainSet, InternalModel, ObserverSpec};
use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn tol() -> Tolerances {
    Tolerances::default()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_hurwitz(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    if n == 0 {
        return Matrix::zeros(0, 0);
    }
    let a = random_matrix(rng, n, n);
    let shift = linalg::spectral_abscissa(&a).unwrap() + rng.random_range(0.2..1.0);
    a - Matrix::identity(n, n) * shift
}

fn put(m: &mut Matrix, row: usize, col: usize, block: &Matrix) {
    if !block.is_empty() {
        let cur = m.view((row, col), block.shape()).clone_owned();
        m.view_mut((row, col), block.shape()).copy_from(&(cur + block));
    }
}

/// Single-actuator loop data for the composition oracle.
pub struct Setup {
    pub plant: RealizedPlant,
    pub act: ActuatorBank,
    pub im: InternalModel,
    pub obs: ObserverSpec,
    pub gains: GainSet,
}

pub fn motor_setup(w: &[f64]) -> Setup {
    let s = examples::scenario("exp1-single").unwrap();
    Setup {
        plant: s.plant.realize(w).unwrap(),
        act: s.actuators,
        im: s.internal_model(&tol()).unwrap(),
        obs: s.observer().unwrap(),
        gains: s.gains,
    }
}

/// Raw state-feedback loop in `(z, ξ, x, η1, η2)` at `v = 0`, with the
/// observer replaced by the true `ξ`.
pub fn raw_state_feedback(s: &Setup) -> Matrix {
    let p = &s.plant;
    let (r, nz, l) = (p.r, p.nz(), s.im.l());
    let (a, b_a) = (s.act.a, s.act.b_a);
    let (k1, k2) = (s.gains.k1, s.gains.k2);
    let gamma = s.gains.gamma_row();
    let (oz, oxi, ox, oe1, oe2) = (0, nz, nz + r, nz + r + 1, nz + r + 1 + l);
    let dim = oe2 + l;
    let mut m = Matrix::zeros(dim, dim);
    put(&mut m, oz, oz, &p.a1);
    put(&mut m, oz, oxi, &p.a2);
    for i in 0..r - 1 {
        m[(oxi + i, oxi + i + 1)] = 1.0;
    }
    put(&mut m, oxi + r - 1, oz, &p.a3);
    for j in 0..r {
        m[(oxi + r - 1, oxi + j)] = p.c[j];
    }
    m[(oxi + r - 1, ox)] = p.b;
    // u = Q η2 − k2 (x − P η1 + k1 Γ1 ξ)
    let mut urow = Matrix::zeros(1, dim);
    put(&mut urow, 0, oe2, &s.im.psi_t2_inv);
    urow[(0, ox)] -= k2;
    put(&mut urow, 0, oe1, &(&s.im.psi_t1_inv * k2));
    put(&mut urow, 0, oxi, &(&gamma * (-k1 * k2)));
    m[(ox, ox)] += a;
    put(&mut m, ox, 0, &(&urow * b_a));
    put(&mut m, oe1, oe1, &s.im.m1);
    put(&mut m, oe1, ox, &s.im.n1);
    put(&mut m, oe2, oe2, &s.im.m2);
    put(&mut m, oe2, 0, &(&s.im.n2 * &urow));
    m
}

/// Coordinate change `(z, ξ, x, η1, η2) -> (ξ̄[r−1], z̄, η̃1, ζ1, η̃2, ζ2)`.
pub fn coordinate_map(s: &Setup) -> Matrix {
    let p = &s.plant;
    let (r, nz, l) = (p.r, p.nz(), s.im.l());
    let gamma = s.gains.gamma_row();
    let (oz, oxi, ox, oe1, oe2) = (0, nz, nz + r, nz + r + 1, nz + r + 1 + l);
    let dim = oe2 + l;
    let mut zeta1 = Matrix::zeros(1, dim);
    put(&mut zeta1, 0, oxi, &gamma);
    let mut zeta2 = zeta1.clone() * s.gains.k1;
    zeta2[(0, ox)] += 1.0;
    put(&mut zeta2, 0, oe1, &(-&s.im.psi_t1_inv));
    let mut t = Matrix::zeros(dim, dim);
    let (t_xi, t_z) = (0, r - 1);
    let (t_e1, t_z1) = (t_z + nz, t_z + nz + l);
    let (t_e2, t_z2) = (t_z1 + 1, t_z1 + 1 + l);
    for i in 0..r - 1 {
        t[(t_xi + i, oxi + i)] = 1.0;
    }
    for i in 0..nz {
        t[(t_z + i, oz + i)] = 1.0;
    }
    let mut e1 = Matrix::zeros(l, dim);
    put(&mut e1, 0, oe1, &Matrix::identity(l, l));
    put(&mut t, t_e1, 0, &(e1 - &s.im.n1 * &zeta1 / p.b));
    put(&mut t, t_z1, 0, &zeta1);
    let mut e2 = Matrix::zeros(l, dim);
    put(&mut e2, 0, oe2, &Matrix::identity(l, l));
    put(&mut t, t_e2, 0, &(e2 - &s.im.n2 * &zeta2 / s.act.b_a));
    put(&mut t, t_z2, 0, &zeta2);
    t
}

/// Matrix of `T ∘ raw ∘ T⁻¹`, built column by column from its action on
/// unit vectors.
pub fn composed(s: &Setup) -> Matrix {
    let raw = raw_state_feedback(s);
    let t = coordinate_map(s);
    let t_inv = t.clone().try_inverse().unwrap();
    let dim = raw.nrows();
    let mut out = Matrix::zeros(dim, dim);
    for j in 0..dim {
        let mut e = DVector::zeros(dim);
        e[j] = 1.0;
        let col = &t * (&raw * (&t_inv * e));
        out.set_column(j, &col);
    }
    out
}

/// Random single-actuator loop with `r ∈ 1..=3`, `nz ∈ 0..=2` and an
/// exosystem of dimension 1 to 3 with imaginary-axis modes.
pub fn random_setup(rng: &mut ChaCha8Rng) -> Setup {
    let r = rng.random_range(1..=3usize);
    let nz = rng.random_range(0..=2usize);
    let l = rng.random_range(1..=3usize);
    let q = l;
    let plant = RealizedPlant {
        n: nz + r,
        r,
        a1: random_hurwitz(rng, nz),
        a2: random_matrix(rng, nz, 1),
        a3: random_matrix(rng, 1, nz),
        e0: random_matrix(rng, nz, q),
        er: random_matrix(rng, 1, q),
        f: random_matrix(rng, 1, q),
        c: (0..r).map(|_| rng.random_range(-2.0..2.0)).collect(),
        b: rng.random_range(0.5..3.0),
        w: vec![],
    };
    let omega2 = rng.random_range(0.25..4.0);
    let lower = match l {
        1 => vec![0.0],
        2 => vec![omega2, 0.0],
        _ => vec![0.0, omega2, 0.0],
    };
    let poly = PolyCoeffs::monic(lower);
    let (phi, psi) = companion_pair(&poly);
    let exo = Exosystem {
        s: phi.clone(),
        poly,
        phi,
        psi,
    };
    let mut pairs = Vec::new();
    while pairs.len() < 2 {
        let m = random_hurwitz(rng, l);
        let n = random_matrix(rng, l, 1);
        if linalg::is_controllable(&m, &n, 1e-6)
            && linalg::condition_number(&linalg::controllability_matrix(&m, &n)) < 1e4
        {
            pairs.push((m, n));
        }
    }
    let (m2, n2) = pairs.pop().unwrap();
    let (m1, n1) = pairs.pop().unwrap();
    let im = InternalModel::build(&exo, m1, n1, m2, n2, &tol()).unwrap();
    let gammas: Vec<f64> = (0..r - 1).map(|_| rng.random_range(0.5..3.0)).collect();
    // (λ + 1)^r
    let deltas = match r {
        1 => vec![1.0],
        2 => vec![1.0, 2.0],
        _ => vec![1.0, 3.0, 3.0],
    };
    Setup {
        plant,
        act: ActuatorBank::new(rng.random_range(-5.0..2.0), rng.random_range(0.5..5.0), 1).unwrap(),
        im,
        obs: ObserverSpec::build(deltas, 1.0).unwrap(),
        gains: GainSet::single(gammas, rng.random_range(0.5..4.0), rng.random_range(0.5..4.0), 2.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use coopreg::analysis::{assemble_abar, assemble_output_feedback};
    use rand::SeedableRng;

    #[test]
    fn abar_matches_composition_oracle_on_random_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..20 {
            let s = random_setup(&mut rng);
            let assembled = assemble_abar(&s.plant, &s.act, &s.im, &s.gains).unwrap();
            let oracle = composed(&s);
            let scale = 1.0 + oracle.amax();
            assert!(
                (&assembled - &oracle).amax() <= 1e-8 * scale,
                "r = {}, nz = {}, diff =\n{}",
                s.plant.r,
                s.plant.nz(),
                assembled - oracle
            );
        }
    }

    #[test]
    fn abar_matches_composition_oracle_at_motor_vertices() {
        for w in examples::motor_plant().w_box.vertices() {
            let s = motor_setup(&w);
            let diff = assemble_abar(&s.plant, &s.act, &s.im, &s.gains).unwrap() - composed(&s);
            assert!(diff.amax() < 1e-8);
        }
    }

    #[test]
    fn random_setups_cover_all_relative_degrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut seen = [false; 3];
        for _ in 0..20 {
            seen[random_setup(&mut rng).plant.r - 1] = true;
        }
        assert_eq!(seen, [true; 3]);
    }

    #[test]
    fn large_observer_gain_recovers_state_feedback() {
        let mut s = motor_setup(&[0.0; 3]);
        let abar = assemble_abar(&s.plant, &s.act, &s.im, &s.gains).unwrap();
        let target = linalg::spectral_abscissa(&abar).unwrap();
        let mut gaps = Vec::new();
        for h in [50.0, 200.0, 800.0] {
            s.gains.h = h;
            s.obs = s.obs.with_gain(h).unwrap();
            let of = assemble_output_feedback(&s.plant, &s.act, &s.im, &s.obs, &s.gains).unwrap();
            gaps.push((linalg::spectral_abscissa(&of).unwrap() - target).abs());
        }
        assert!(gaps[2] < gaps[0] && gaps[2] < 1e-2, "{gaps:?}");
    }
}
