//! Closed-loop matrices, certification sweeps and the Lyapunov-based
//! coupling bound.
//!
//! Certification replaces the "for all `w`" conditions of the stability
//! analysis by spectral checks at finitely many samples of the uncertainty
//! box. It is evidence, not proof: the spectral abscissa of an affine
//! family is not determined by its vertices.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{self, LinalgError, Matrix, Tolerances};
use crate::models::{ActuatorBank, Graph, ModelError, RealizedPlant, UncertainPlant};
use crate::regulator::{observer_matrices, GainSet, InternalModel, ObserverSpec};

/// Default Hurwitz margin: a matrix passes when its spectral abscissa is
/// below `−DEFAULT_MARGIN`.
pub const DEFAULT_MARGIN: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("Laplacian eigenvalue {lambda} is not positive")]
    NonPositiveEigenvalue { lambda: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, AnalysisError>;

fn check_dims(plant: &RealizedPlant, im: &InternalModel, gains: &GainSet) -> Result<()> {
    if gains.gammas.len() + 1 != plant.r {
        return Err(AnalysisError::DimensionMismatch(format!(
            "{} gammas for relative degree {}",
            gains.gammas.len(),
            plant.r
        )));
    }
    let l = im.l();
    if im.m1.shape() != (l, l) || im.m2.shape() != (l, l) || im.n1.shape() != (l, 1) || im.n2.shape() != (l, 1)
    {
        return Err(AnalysisError::DimensionMismatch("internal model blocks".into()));
    }
    Ok(())
}

fn scalar(m: &Matrix) -> f64 {
    m[(0, 0)]
}

/// Writes `block` into `m` at `(row, col)`.
fn put(m: &mut Matrix, row: usize, col: usize, block: &Matrix) {
    if !block.is_empty() {
        m.view_mut((row, col), block.shape()).copy_from(block);
    }
}

/// State-feedback closed-loop matrix of the single-actuator loop in the
/// coordinates `(ξ̄1..ξ̄(r−1), z̄, η̃1, ζ1, η̃2, ζ2)`.
///
/// `gains.k1` and `gains.k2` are read as single-actuator gains; for a bank
/// of `N` agents pass [`GainSet::equivalent_single`].
pub fn assemble_abar(
    plant: &RealizedPlant,
    actuators: &ActuatorBank,
    im: &InternalModel,
    gains: &GainSet,
) -> Result<Matrix> {
    check_dims(plant, im, gains)?;
    let (r, nz, l) = (plant.r, plant.nz(), im.l());
    let r1 = r - 1;
    let (a, b_a) = (actuators.a, actuators.b_a);
    let (k1, k2) = (gains.k1, gains.k2);
    let b = plant.b;
    let c = &plant.c;
    let g = &gains.gammas;
    let p = &im.psi_t1_inv;
    let q = &im.psi_t2_inv;
    let (m1, n1, m2, n2) = (&im.m1, &im.n1, &im.m2, &im.n2);
    let eye = Matrix::identity(l, l);
    let pn1 = scalar(&(p * n1));
    let qn2 = scalar(&(q * n2));
    // c_r + γ_(r−2), with γ_(−1) = 0 when r = 1
    let cr_g = c[r - 1] + if r >= 2 { g[r - 2] } else { 0.0 };

    let mut cw = Matrix::zeros(1, r1);
    for s in 0..r1 {
        let prev = if s >= 1 { g[s - 1] } else { 0.0 };
        cw[(0, s)] = c[s] + prev - cr_g * g[s];
    }
    let mut lambda = Matrix::zeros(r1, r1);
    for i in 0..r1 {
        if i + 1 < r1 {
            lambda[(i, i + 1)] = 1.0;
        } else {
            for j in 0..r1 {
                lambda[(i, j)] = -g[j];
            }
        }
    }

    let c_tilde = cr_g - k1 * b + pn1;
    let a3_check = -(n1 * &plant.a3) / b;
    let c1_check = -(n1 * &cw) / b;
    let c2_check = (m1 * n1 - n1 * cr_g) / b;
    let a3_bar = &plant.a3 * k1;
    let c1_bar = &cw * k1;
    let c1_small_bar =
        k1 * (c_tilde - a + pn1) + scalar(&(p * (&eye * a - m1 - n1 * p) * n1)) / b;
    let c2_bar = p * (&eye * (a + k1 * b) - m1 - n1 * p);
    let c2_small_bar = a - pn1 + qn2 + k1 * b;
    let a3_hat = -(n2 * &a3_bar) / b_a;
    let c1_hat = -(n2 * &c1_bar) / b_a;
    let c2_hat = -(n2 * c1_small_bar) / b_a;
    let c3_hat = -(n2 * &c2_bar) / b_a;
    let c4_hat = ((m2 + n2 * q) * n2 - n2 * c2_small_bar) / b_a;

    let o_xi = 0;
    let o_z = r1;
    let o_e1 = o_z + nz;
    let o_z1 = o_e1 + l;
    let o_e2 = o_z1 + 1;
    let o_z2 = o_e2 + l;
    let dim = o_z2 + 1;
    let mut m = Matrix::zeros(dim, dim);

    // ξ̄ row
    put(&mut m, o_xi, o_xi, &lambda);
    if r1 > 0 {
        m[(o_xi + r1 - 1, o_z1)] = 1.0;
    }
    // z̄ row: A2 ξ̄1, where ξ̄1 = ζ1 when r = 1
    put(&mut m, o_z, o_z, &plant.a1);
    if r1 > 0 {
        put(&mut m, o_z, o_xi, &plant.a2);
    } else {
        put(&mut m, o_z, o_z1, &plant.a2);
    }
    // η̃1 row
    put(&mut m, o_e1, o_xi, &c1_check);
    put(&mut m, o_e1, o_z, &a3_check);
    put(&mut m, o_e1, o_e1, m1);
    put(&mut m, o_e1, o_z1, &c2_check);
    // ζ1 row
    put(&mut m, o_z1, o_xi, &cw);
    put(&mut m, o_z1, o_z, &plant.a3);
    put(&mut m, o_z1, o_e1, &(p * b));
    m[(o_z1, o_z1)] = c_tilde;
    m[(o_z1, o_z2)] = b;
    // η̃2 row
    put(&mut m, o_e2, o_xi, &c1_hat);
    put(&mut m, o_e2, o_z, &a3_hat);
    put(&mut m, o_e2, o_e1, &c3_hat);
    put(&mut m, o_e2, o_z1, &c2_hat);
    put(&mut m, o_e2, o_e2, m2);
    put(&mut m, o_e2, o_z2, &c4_hat);
    // ζ2 row
    put(&mut m, o_z2, o_xi, &c1_bar);
    put(&mut m, o_z2, o_z, &a3_bar);
    put(&mut m, o_z2, o_e1, &c2_bar);
    m[(o_z2, o_z1)] = c1_small_bar;
    put(&mut m, o_z2, o_e2, &(q * b_a));
    m[(o_z2, o_z2)] = c2_small_bar - k2 * b_a;
    Ok(m)
}

/// Output-feedback closed-loop matrix of the single-actuator loop in the
/// coordinates `(z̄, ξ̄, x̄, η̄1, η̄2, ψ)`, where `ψs = h^(r−s) (e^(s−1) − ςs)`
/// is the scaled observer error.
///
/// The observer gain is `gains.h`; for a bank of agents pass
/// [`GainSet::equivalent_single`].
pub fn assemble_output_feedback(
    plant: &RealizedPlant,
    actuators: &ActuatorBank,
    im: &InternalModel,
    observer: &ObserverSpec,
    gains: &GainSet,
) -> Result<Matrix> {
    check_dims(plant, im, gains)?;
    let (r, nz, l) = (plant.r, plant.nz(), im.l());
    if observer.r() != r {
        return Err(AnalysisError::DimensionMismatch(format!(
            "observer has r = {}, plant has r = {r}",
            observer.r()
        )));
    }
    let (a, b_a) = (actuators.a, actuators.b_a);
    let (k1, k2, h) = (gains.k1, gains.k2, gains.h);
    let b = plant.b;
    let p = &im.psi_t1_inv;
    let q = &im.psi_t2_inv;
    let (m1, n1, m2, n2) = (&im.m1, &im.n1, &im.m2, &im.n2);
    let eye = Matrix::identity(l, l);
    let gamma = gains.gamma_row();

    let o_z = 0;
    let o_xi = nz;
    let o_x = o_xi + r;
    let o_e1 = o_x + 1;
    let o_e2 = o_e1 + l;
    let o_psi = o_e2 + l;
    let dim = o_psi + r;
    let mut m = Matrix::zeros(dim, dim);

    // z̄ row
    put(&mut m, o_z, o_z, &plant.a1);
    put(&mut m, o_z, o_xi, &plant.a2);
    // ξ̄ rows: chain of integrators, last row carries the plant
    for s in 0..r - 1 {
        m[(o_xi + s, o_xi + s + 1)] = 1.0;
    }
    let last = o_xi + r - 1;
    put(&mut m, last, o_z, &plant.a3);
    for s in 0..r {
        m[(last, o_xi + s)] = plant.c[s];
    }
    m[(last, o_x)] = b;
    put(&mut m, last, o_e1, &(p * b));
    // x̄ row
    put(&mut m, o_x, o_xi, &(&gamma * (-b_a * k1 * k2)));
    m[(o_x, o_x)] = a - b_a * k2 - scalar(&(p * n1));
    put(&mut m, o_x, o_e1, &(p * (&eye * a - m1 - n1 * p)));
    put(&mut m, o_x, o_e2, &(q * b_a));
    // η̄1 row
    put(&mut m, o_e1, o_x, n1);
    put(&mut m, o_e1, o_e1, &(m1 + n1 * p));
    // η̄2 row
    put(&mut m, o_e2, o_xi, &(n2 * &gamma * (-k1 * k2)));
    put(&mut m, o_e2, o_x, &(n2 * (-k2)));
    put(&mut m, o_e2, o_e2, &(m2 + n2 * q));

    // coupling into the observer error: Γ1 D_h⁻¹
    let mut gamma_dh = gamma.clone();
    for s in 0..r {
        gamma_dh[(0, s)] /= h.powi((r - 1 - s) as i32);
    }
    put(&mut m, o_x, o_psi, &(&gamma_dh * (b_a * k1 * k2)));
    put(&mut m, o_e2, o_psi, &(n2 * &gamma_dh * (k1 * k2)));
    // ψr picks up ξ̄̇r
    let psi_last = o_psi + r - 1;
    for j in 0..o_psi {
        m[(psi_last, j)] = m[(last, j)];
    }
    let (a0_unit, _) = observer_matrices(&observer.deltas, 1.0);
    put(&mut m, o_psi, o_psi, &(a0_unit * h));
    Ok(m)
}

/// `A − λ J`, the per-mode disagreement matrix of the agents' states
/// `(xi, η1i, η2i)`, with `J = diag(0, σ1 I, σ2 I)`.
pub fn assemble_sharing_matrix(
    actuators: &ActuatorBank,
    im: &InternalModel,
    gains: &GainSet,
    lambda: f64,
) -> Result<Matrix> {
    if !(lambda > 0.0) {
        return Err(AnalysisError::NonPositiveEigenvalue { lambda });
    }
    let l = im.l();
    let (a, b_a, k2) = (actuators.a, actuators.b_a, gains.k2);
    let p = &im.psi_t1_inv;
    let q = &im.psi_t2_inv;
    let mut m = Matrix::zeros(2 * l + 1, 2 * l + 1);
    m[(0, 0)] = a - b_a * k2;
    put(&mut m, 0, 1, &(p * (b_a * k2)));
    put(&mut m, 0, 1 + l, &(q * b_a));
    put(&mut m, 1, 0, &im.n1);
    put(&mut m, 1, 1, &(&im.m1 - Matrix::identity(l, l) * (lambda * gains.sigma1)));
    put(&mut m, 1 + l, 0, &(&im.n2 * (-k2)));
    put(&mut m, 1 + l, 1, &(&im.n2 * p * k2));
    put(
        &mut m,
        1 + l,
        1 + l,
        &(&im.m2 + &im.n2 * q - Matrix::identity(l, l) * (lambda * gains.sigma2)),
    );
    Ok(m)
}

/// Where the certification samples come from.
#[derive(Debug, Clone, PartialEq)]
pub struct Sampling {
    pub points: Vec<Vec<f64>>,
    pub label: String,
    pub margin: f64,
}

impl Sampling {
    /// Vertices of the box plus its center, optionally followed by a tensor
    /// grid with `grid` points per axis.
    pub fn for_plant(plant: &UncertainPlant, grid: Option<usize>, margin: f64) -> Self {
        let mut points = plant.w_box.vertices_and_center();
        let mut label = format!("{} vertices + center", points.len() - 1);
        if let Some(res) = grid {
            let g = plant.w_box.grid(res);
            label = format!("{label} + {}-point grid ({res} per axis)", g.len());
            points.extend(g);
        }
        Self { points, label, margin }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub matrix: String,
    pub parameter: String,
    pub abscissa: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificationReport {
    pub sampling: String,
    pub margin: f64,
    pub records: Vec<CheckRecord>,
}

impl CertificationReport {
    pub fn passed(&self) -> bool {
        self.records.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.records.iter().filter(|r| !r.passed)
    }

    /// Largest spectral abscissa among records of the given matrix kind.
    pub fn worst(&self, matrix: &str) -> Option<&CheckRecord> {
        self.records
            .iter()
            .filter(|r| r.matrix == matrix)
            .max_by(|a, b| a.abscissa.total_cmp(&b.abscissa))
    }
}

impl fmt::Display for CertificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        writeln!(
            f,
            "# sampling: {}; margin: {:e}; verdict: {verdict}",
            self.sampling, self.margin
        )?;
        writeln!(f, "matrix\tparameter\tspectral_abscissa\tverdict")?;
        for r in &self.records {
            write!(
                f,
                "{}\t{}\t{:.9e}\t{}",
                r.matrix,
                r.parameter,
                r.abscissa,
                if r.passed { "PASS" } else { "FAIL" }
            )?;
            if let Some(note) = &r.note {
                write!(f, "\t{note}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

pub const OUTPUT_FEEDBACK: &str = "output-feedback";
pub const SHARING: &str = "sharing";
pub const GAIN_PRECONDITION: &str = "k2-precondition";

fn spectral_record(matrix: &str, parameter: String, m: Result<Matrix>, margin: f64) -> CheckRecord {
    let result = m.and_then(|m| Ok(linalg::spectral_abscissa(&m)?));
    match result {
        Ok(abscissa) => CheckRecord {
            matrix: matrix.into(),
            parameter,
            abscissa,
            passed: abscissa < -margin,
            note: None,
        },
        Err(e) => CheckRecord {
            matrix: matrix.into(),
            parameter,
            abscissa: f64::NAN,
            passed: false,
            note: Some(e.to_string()),
        },
    }
}

/// Spectral certification of a controller design.
///
/// * the output-feedback loop of the (sum) dynamics is Hurwitz at every
///   sampled `w`;
/// * for more than one agent, every `A − λi J` with `λi` a nonzero
///   Laplacian eigenvalue is Hurwitz and `k̄2 > a / b_a`.
pub fn certify(
    plant: &UncertainPlant,
    actuators: &ActuatorBank,
    graph: &Graph,
    im: &InternalModel,
    observer: &ObserverSpec,
    gains: &GainSet,
    sampling: &Sampling,
) -> CertificationReport {
    let n = actuators.count;
    let single = gains.equivalent_single(n);
    let margin = sampling.margin;
    let mut records: Vec<CheckRecord> = sampling
        .points
        .par_iter()
        .map(|w| {
            let m = plant
                .realize(w)
                .map_err(AnalysisError::from)
                .and_then(|p| assemble_output_feedback(&p, actuators, im, observer, &single));
            spectral_record(OUTPUT_FEEDBACK, format!("w={}", fmt_vec(w)), m, margin)
        })
        .collect();

    if n > 1 {
        let eigs = graph.laplacian_eigenvalues();
        let nonzero: Vec<f64> = eigs.into_iter().skip(1).collect();
        let sharing: Vec<CheckRecord> = nonzero
            .par_iter()
            .map(|&lambda| {
                spectral_record(
                    SHARING,
                    format!("lambda={lambda:.9}"),
                    assemble_sharing_matrix(actuators, im, gains, lambda),
                    margin,
                )
            })
            .collect();
        records.extend(sharing);
        let threshold = actuators.a / actuators.b_a;
        records.push(CheckRecord {
            matrix: GAIN_PRECONDITION.into(),
            parameter: format!("k2={} a/b_a={}", gains.k2, threshold),
            abscissa: actuators.a - actuators.b_a * gains.k2,
            passed: gains.k2 > threshold,
            note: (gains.k2 <= threshold).then(|| format!("k2 = {} must exceed a/b_a = {threshold}", gains.k2)),
        });
    }
    CertificationReport {
        sampling: sampling.label.clone(),
        margin,
        records,
    }
}

fn fmt_vec(w: &[f64]) -> String {
    let parts: Vec<String> = w.iter().map(|x| format!("{x}")).collect();
    format!("[{}]", parts.join(","))
}

/// Coupling bound for block systems
/// `[[M1, N1], [N2, N3 + μ2 M2]]` with `‖Ni‖ ≤ φi`:
/// `max over samples of 2 φ3 ‖Q‖ + 4 (φ1² ‖P‖² + φ2² ‖Q‖²)`, where
/// `M1ᵀP + P M1 = −I` and `M2ᵀQ + Q M2 = −I`. Any `μ2` above the bound
/// makes the block system Hurwitz at the sampled values.
pub fn bound_phi(samples: &[(Matrix, Matrix)], phis: [f64; 3], tol: &Tolerances) -> Result<f64> {
    let [phi1, phi2, phi3] = phis;
    let mut bound = 0.0_f64;
    for (m1, m2) in samples {
        let p = linalg::spectral_norm(&linalg::solve_lyapunov(m1, tol)?);
        let q = linalg::spectral_norm(&linalg::solve_lyapunov(m2, tol)?);
        let value = 2.0 * phi3 * q + 4.0 * (phi1 * phi1 * p * p + phi2 * phi2 * q * q);
        bound = bound.max(value);
    }
    Ok(bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples;
    use crate::linalg::from_rows;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    struct Setup {
        plant: RealizedPlant,
        act: ActuatorBank,
        im: InternalModel,
        obs: ObserverSpec,
        gains: GainSet,
    }

    fn motor(w: &[f64]) -> Setup {
        let s = examples::scenario("exp1-single").unwrap();
        Setup {
            plant: s.plant.realize(w).unwrap(),
            act: s.actuators,
            im: s.internal_model(&tol()).unwrap(),
            obs: s.observer().unwrap(),
            gains: s.gains,
        }
    }

    #[test]
    fn motor_abar_is_hurwitz() {
        let s = motor(&[0.0; 3]);
        let m = assemble_abar(&s.plant, &s.act, &s.im, &s.gains).unwrap();
        assert_eq!(m.nrows(), 1 + 0 + 3 + 1 + 3 + 1);
        assert!(linalg::spectral_abscissa(&m).unwrap() < 0.0);
    }

    #[test]
    fn abar_without_actuator_gain() {
        let s = motor(&[0.0; 3]);
        let mut g = s.gains.clone();
        let base = assemble_abar(&s.plant, &s.act, &s.im, &g).unwrap();
        g.k2 = 0.0;
        let open = assemble_abar(&s.plant, &s.act, &s.im, &g).unwrap();
        let last = base.nrows() - 1;
        // k2 only enters through −k2 b_a in the last diagonal entry
        assert!((base[(last, last)] - open[(last, last)] + 6.0 * 50.0).abs() < 1e-9);
        let mut diff = base - &open;
        diff[(last, last)] = 0.0;
        assert_eq!(diff.amax(), 0.0);
        let abscissa = linalg::spectral_abscissa(&open).unwrap();
        assert!(abscissa > 0.0, "abscissa {abscissa}");
    }

    #[test]
    fn output_feedback_observer_block() {
        let mut s = motor(&[0.0; 3]);
        s.gains.h = 7.0;
        let m = assemble_output_feedback(&s.plant, &s.act, &s.im, &s.obs, &s.gains).unwrap();
        let dim = m.nrows();
        assert_eq!(dim, 2 + 1 + 2 * 3 + 2);
        let (a0, _) = observer_matrices(&[4.0, 4.0], 1.0);
        let block = m.view((dim - 2, dim - 2), (2, 2)).clone_owned();
        assert!((block - a0 * 7.0).amax() < 1e-15);
    }

    #[test]
    fn motor_output_feedback_is_hurwitz_at_vertices() {
        let plant = examples::motor_plant();
        for w in plant.w_box.vertices() {
            let s = motor(&w);
            let m = assemble_output_feedback(&s.plant, &s.act, &s.im, &s.obs, &s.gains).unwrap();
            assert!(linalg::spectral_abscissa(&m).unwrap() < 0.0, "w = {w:?}");
        }
    }

    #[test]
    fn suspension_output_feedback_is_hurwitz() {
        let s = examples::scenario("exp2-single").unwrap();
        let plant = s.plant.realize(&[0.0; 8]).unwrap();
        let im = s.internal_model(&tol()).unwrap();
        let m = assemble_output_feedback(&plant, &s.actuators, &im, &s.observer().unwrap(), &s.gains).unwrap();
        assert!(linalg::spectral_abscissa(&m).unwrap() < 0.0);
    }

    #[test]
    fn sharing_matrix_cases() {
        for name in ["exp1-multi", "exp2-multi"] {
            let s = examples::scenario(name).unwrap();
            let im = s.internal_model(&tol()).unwrap();
            for lambda in s.graph.nonzero_laplacian_eigenvalues() {
                let m = assemble_sharing_matrix(&s.actuators, &im, &s.gains, lambda).unwrap();
                assert!(linalg::spectral_abscissa(&m).unwrap() < 0.0, "{name} lambda {lambda}");
                let mut strong = s.gains.clone();
                strong.sigma1 *= 10.0;
                strong.sigma2 *= 10.0;
                let m = assemble_sharing_matrix(&s.actuators, &im, &strong, lambda).unwrap();
                assert!(linalg::spectral_abscissa(&m).unwrap() < 0.0, "{name} lambda {lambda} x10");
            }
            let mut zero = s.gains.clone();
            zero.sigma1 = 0.0;
            zero.sigma2 = 0.0;
            let a1 = assemble_sharing_matrix(&s.actuators, &im, &zero, 0.5).unwrap();
            let a2 = assemble_sharing_matrix(&s.actuators, &im, &zero, 3.0).unwrap();
            assert_eq!(a1, a2);
            assert!(matches!(
                assemble_sharing_matrix(&s.actuators, &im, &s.gains, 0.0),
                Err(AnalysisError::NonPositiveEigenvalue { .. })
            ));
        }
    }

    fn certify_scenario(s: &crate::scenario::Scenario) -> CertificationReport {
        let im = s.internal_model(&tol()).unwrap();
        let sampling = Sampling::for_plant(&s.plant, None, DEFAULT_MARGIN);
        certify(&s.plant, &s.actuators, &s.graph, &im, &s.observer().unwrap(), &s.gains, &sampling)
    }

    #[test]
    fn certification_verdicts() {
        let report = certify_scenario(&examples::scenario("exp1-multi").unwrap());
        assert!(report.passed(), "{report}");
        assert_eq!(report.records.len(), 9 + 4 + 1);

        let mut s = examples::scenario("exp2-multi").unwrap();
        s.gains.sigma1 = 0.0;
        s.gains.sigma2 = 0.0;
        let report = certify_scenario(&s);
        assert!(!report.passed());
        assert!(report.failures().all(|r| r.matrix == SHARING));

        let mut s = examples::scenario("exp2-multi").unwrap();
        s.gains.k2 = s.actuators.a / s.actuators.b_a;
        let report = certify_scenario(&s);
        let pre = report.records.iter().find(|r| r.matrix == GAIN_PRECONDITION).unwrap();
        assert!(!pre.passed);
    }

    #[test]
    fn report_serializes_one_record_per_line() {
        let report = certify_scenario(&examples::scenario("exp1-single").unwrap());
        let text = report.to_string();
        assert_eq!(text.lines().count(), 2 + report.records.len());
        assert!(text.lines().nth(2).unwrap().starts_with("output-feedback\tw=["));
    }

    #[test]
    fn bound_phi_scalar_and_zero() {
        let one = Matrix::from_element(1, 1, -1.0);
        let b = bound_phi(&[(one.clone(), one.clone())], [1.0, 1.0, 1.0], &tol()).unwrap();
        assert!((b - 3.0).abs() < 1e-12);
        assert_eq!(bound_phi(&[(one.clone(), one)], [0.0; 3], &tol()).unwrap(), 0.0);
        let rot = from_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        assert!(bound_phi(&[(rot.clone(), rot)], [1.0; 3], &tol()).is_err());
    }

    #[test]
    fn bound_phi_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let m1 = random_hurwitz(&mut rng, 2);
            let m2 = random_hurwitz(&mut rng, 2);
            let phis = [rng.random_range(0.0..2.0), rng.random_range(0.0..2.0), rng.random_range(0.0..2.0)];
            let base = bound_phi(&[(m1.clone(), m2.clone())], phis, &tol()).unwrap();
            for k in 0..3 {
                let mut bigger = phis;
                bigger[k] += 0.5;
                let b = bound_phi(&[(m1.clone(), m2.clone())], bigger, &tol()).unwrap();
                assert!(b >= base);
            }
        }
    }

    fn random_hurwitz<R: Rng>(rng: &mut R, n: usize) -> Matrix {
        if n == 0 {
            return Matrix::zeros(0, 0);
        }
        let a = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let shift = linalg::spectral_abscissa(&a).unwrap() + rng.random_range(0.2..1.0);
        a - Matrix::identity(n, n) * shift
    }

    fn sorted_eigs(m: &Matrix) -> Vec<num_complex::Complex64> {
        let mut e = linalg::eigenvalues(m).unwrap();
        e.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        e
    }

    #[test]
    fn state_feedback_block_is_similar_to_abar() {
        // The leading block of the output-feedback matrix is the state
        // feedback loop in other coordinates.
        let s = motor(&[0.1, -0.2, 0.3]);
        let of = assemble_output_feedback(&s.plant, &s.act, &s.im, &s.obs, &s.gains).unwrap();
        let k = of.nrows() - s.plant.r;
        let a11 = of.view((0, 0), (k, k)).clone_owned();
        let abar = assemble_abar(&s.plant, &s.act, &s.im, &s.gains).unwrap();
        // char polys of similar matrices agree; compare via eigenvalue sums of powers
        let (mut pa, mut pb) = (a11.clone(), abar.clone());
        for power in 1..=k {
            let (tr_a, tr_b) = (pa.trace(), pb.trace());
            assert!((tr_a - tr_b).abs() <= 1e-6 * (1.0 + tr_a.abs()), "power {power}");
            pa = &pa * &a11;
            pb = &pb * &abar;
        }
        let ea = sorted_eigs(&a11);
        let eb = sorted_eigs(&abar);
        for (x, y) in ea.iter().zip(&eb) {
            assert!((x - y).norm() < 1e-4, "{ea:?} vs {eb:?}");
        }
    }
}
