//! Controller synthesis and the runtime controller dynamics.
//!
//! Every actuator agent `i` runs
//!
//! ```text
//! ui    = ΨT2⁻¹ η2i − k2 (xi − ΨT1⁻¹ η1i + k1 ζ̂1i),   ζ̂1i = Γ1 ς̂i
//! η̇1i   = M1 η1i + N1 xi + σ1 Σj aij (η1j − η1i)
//! η̇2i   = M2 η2i + N2 ui + σ2 Σj aij (η2j − η2i)
//! ς̂̇i    = A0(h) ς̂i + B0(h) e
//! ```
//!
//! With a single agent the coupling sums vanish and this is the
//! single-actuator law.

use nalgebra::DVector;
use thiserror::Error;

use crate::linalg::{self, LinalgError, Matrix, PolyCoeffs, Tolerances};
use crate::models::{ActuatorBank, Exosystem, Graph, RealizedPlant};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegulatorError {
    #[error("({which}) is not controllable")]
    NotControllable { which: &'static str },
    #[error("{which} is not Hurwitz (spectral abscissa {abscissa:.6e})")]
    NotHurwitz { which: &'static str, abscissa: f64 },
    #[error("spectra overlap (gap {gap:.3e})")]
    SpectraOverlap { gap: f64 },
    #[error("{which} is ill-conditioned (condition number {cond:.3e})")]
    IllConditioned { which: &'static str, cond: f64 },
    #[error("observer polynomial with coefficients {deltas:?} is not Hurwitz")]
    UnstableObserverPolynomial { deltas: Vec<f64> },
    #[error("invalid gains: {0}")]
    InvalidGains(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Linalg(LinalgError),
}

impl From<LinalgError> for RegulatorError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::SpectraOverlap { gap, .. } => Self::SpectraOverlap { gap },
            other => Self::Linalg(other),
        }
    }
}

pub type Result<T> = std::result::Result<T, RegulatorError>;

/// Solution of the regulator equations at one uncertainty value.
///
/// `(Z v, Π v, Ξ v)` is the steady state of `(z, ξ, x)` and `U v` the
/// steady-state actuator input, at which `e = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub z: Matrix,
    pub pi: Matrix,
    pub xi: Matrix,
    pub u: Matrix,
    pub w: Vec<f64>,
}

impl SteadyState {
    pub fn solve(
        plant: &RealizedPlant,
        exo: &Exosystem,
        actuators: &ActuatorBank,
        tol: &Tolerances,
    ) -> Result<Self> {
        let s = &exo.s;
        let q = exo.q();
        if plant.q() != q {
            return Err(RegulatorError::DimensionMismatch(format!(
                "plant expects a {}-dimensional exosystem, S is {q}x{q}",
                plant.q()
            )));
        }
        // Z S − A1 Z = A2 F + E0
        let rhs = &plant.a2 * &plant.f + &plant.e0;
        let z = linalg::solve_sylvester(&plant.a1, s, &rhs, tol)?;

        let r = plant.r;
        let mut pi = Matrix::zeros(r, q);
        let mut row = plant.f.clone();
        let mut acc = Matrix::zeros(1, q);
        for sidx in 0..r {
            pi.set_row(sidx, &row.row(0));
            acc += &row * plant.c[sidx];
            row = &row * s;
        }
        // row now holds F S^r
        let xi = (row - &plant.a3 * &z - acc - &plant.er) / plant.b;
        let u = (&xi * s - &xi * actuators.a) / actuators.b_a;
        Ok(Self {
            z,
            pi,
            xi,
            u,
            w: plant.w.clone(),
        })
    }

    /// Largest residual among the four defining relations.
    pub fn residual(&self, plant: &RealizedPlant, exo: &Exosystem, actuators: &ActuatorBank) -> f64 {
        let s = &exo.s;
        let z_res = (&self.z * s - &plant.a1 * &self.z - &plant.a2 * &plant.f - &plant.e0).amax();
        let mut pi_res: f64 = 0.0;
        let mut row = plant.f.clone();
        let mut acc = Matrix::zeros(1, exo.q());
        for sidx in 0..plant.r {
            pi_res = pi_res.max((self.pi.row(sidx) - row.row(0)).amax());
            acc += &row * plant.c[sidx];
            row = &row * s;
        }
        let xi_res = (&self.xi * plant.b - (row - &plant.a3 * &self.z - acc - &plant.er)).amax();
        let u_res = (&self.u * actuators.b_a - (&self.xi * s - &self.xi * actuators.a)).amax();
        z_res.max(pi_res).max(xi_res).max(u_res)
    }
}

/// Internal-model pair `(Mi, Ni)` together with the transforms `Ti`
/// solving `Ti Φ − Mi Ti = Ni Ψ` and the output rows `Ψ Ti⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct InternalModel {
    pub m1: Matrix,
    pub n1: Matrix,
    pub m2: Matrix,
    pub n2: Matrix,
    pub t1: Matrix,
    pub t2: Matrix,
    pub psi_t1_inv: Matrix,
    pub psi_t2_inv: Matrix,
    pub phi: Matrix,
    pub psi: Matrix,
}

const MAX_TRANSFORM_CONDITION: f64 = 1e8;

impl InternalModel {
    pub fn build(
        exo: &Exosystem,
        m1: Matrix,
        n1: Matrix,
        m2: Matrix,
        n2: Matrix,
        tol: &Tolerances,
    ) -> Result<Self> {
        let (t1, psi_t1_inv) = transform(exo, &m1, &n1, "M1, N1", "M1", "T1", tol)?;
        let (t2, psi_t2_inv) = transform(exo, &m2, &n2, "M2, N2", "M2", "T2", tol)?;
        Ok(Self {
            m1,
            n1,
            m2,
            n2,
            t1,
            t2,
            psi_t1_inv,
            psi_t2_inv,
            phi: exo.phi.clone(),
            psi: exo.psi.clone(),
        })
    }

    pub fn l(&self) -> usize {
        self.phi.nrows()
    }

    /// Largest residual of the two transform equations.
    pub fn residual(&self) -> f64 {
        let r1 = &self.t1 * &self.phi - &self.m1 * &self.t1 - &self.n1 * &self.psi;
        let r2 = &self.t2 * &self.phi - &self.m2 * &self.t2 - &self.n2 * &self.psi;
        r1.amax().max(r2.amax())
    }

    /// Steady-state internal-model states `(Θ1, Θ2)` as linear maps of `v`.
    pub fn steady_state_maps(&self, ss: &SteadyState, s: &Matrix) -> (Matrix, Matrix) {
        let l = self.l();
        let stack = |row: &Matrix| {
            let mut out = Matrix::zeros(l, row.ncols());
            let mut cur = row.clone();
            for k in 0..l {
                out.set_row(k, &cur.row(0));
                cur = &cur * s;
            }
            out
        };
        (&self.t1 * stack(&ss.xi), &self.t2 * stack(&ss.u))
    }
}

fn transform(
    exo: &Exosystem,
    m: &Matrix,
    n: &Matrix,
    pair: &'static str,
    m_name: &'static str,
    t_name: &'static str,
    tol: &Tolerances,
) -> Result<(Matrix, Matrix)> {
    let l = exo.l();
    if m.shape() != (l, l) || n.shape() != (l, 1) {
        return Err(RegulatorError::DimensionMismatch(format!(
            "({pair}) must be {l}x{l} and {l}x1, got {:?} and {:?}",
            m.shape(),
            n.shape()
        )));
    }
    let abscissa = linalg::spectral_abscissa(m)?;
    if abscissa >= 0.0 {
        return Err(RegulatorError::NotHurwitz {
            which: m_name,
            abscissa,
        });
    }
    if !linalg::is_controllable(m, n, tol.rank) {
        return Err(RegulatorError::NotControllable { which: pair });
    }
    let t = linalg::solve_sylvester(m, &exo.phi, &(n * &exo.psi), tol)?;
    let cond = linalg::condition_number(&t);
    if !(cond < MAX_TRANSFORM_CONDITION) {
        return Err(RegulatorError::IllConditioned { which: t_name, cond });
    }
    let t_inv = t
        .clone()
        .try_inverse()
        .ok_or(RegulatorError::IllConditioned { which: t_name, cond })?;
    let psi_t_inv = &exo.psi * t_inv;
    Ok((t, psi_t_inv))
}

/// High-gain observer `ς̂̇ = A0(h) ς̂ + B0(h) e` for the error and its first
/// `r − 1` derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverSpec {
    /// `δ0 … δ(r−1)`.
    pub deltas: Vec<f64>,
    pub h: f64,
    pub a0: Matrix,
    pub b0: Matrix,
}

impl ObserverSpec {
    pub fn build(deltas: Vec<f64>, h: f64) -> Result<Self> {
        if deltas.is_empty() {
            return Err(RegulatorError::DimensionMismatch("observer needs r >= 1 coefficients".into()));
        }
        if !(h > 0.0) {
            return Err(RegulatorError::InvalidGains(format!("observer gain h = {h} must be positive")));
        }
        let stable = deltas.iter().all(|d| d.is_finite())
            && PolyCoeffs::monic(deltas.clone()).is_hurwitz()?;
        if !stable {
            return Err(RegulatorError::UnstableObserverPolynomial { deltas });
        }
        let (a0, b0) = observer_matrices(&deltas, h);
        Ok(Self { deltas, h, a0, b0 })
    }

    pub fn r(&self) -> usize {
        self.deltas.len()
    }

    /// Same coefficients, different gain.
    pub fn with_gain(&self, h: f64) -> Result<Self> {
        Self::build(self.deltas.clone(), h)
    }
}

/// `A0(h)`: column one carries `−h^s δ(r−s)`, ones on the superdiagonal.
/// `B0(h)` is the negated first column.
pub fn observer_matrices(deltas: &[f64], h: f64) -> (Matrix, Matrix) {
    let r = deltas.len();
    let mut a0 = Matrix::zeros(r, r);
    let mut b0 = Matrix::zeros(r, 1);
    for i in 0..r {
        let coeff = h.powi(i as i32 + 1) * deltas[r - 1 - i];
        a0[(i, 0)] = -coeff;
        b0[(i, 0)] = coeff;
        if i + 1 < r {
            a0[(i, i + 1)] = 1.0;
        }
    }
    (a0, b0)
}

/// Controller gains. For `N > 1` these are the distributed gains
/// `(k̄1, k̄2, h̄, σ1, σ2)`; for a single actuator the coupling gains are
/// unused.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSet {
    /// `γ0 … γ(r−2)`.
    pub gammas: Vec<f64>,
    pub k1: f64,
    pub k2: f64,
    pub h: f64,
    pub sigma1: f64,
    pub sigma2: f64,
}

/// Default distributed gains from single-actuator gains: `k̄1 = k1/N`,
/// `k̄2 = k2`, `h̄ = h`.
pub fn gains_from_single(k1: f64, k2: f64, h: f64, n: usize) -> (f64, f64, f64) {
    (k1 / n as f64, k2, h)
}

impl GainSet {
    pub fn single(gammas: Vec<f64>, k1: f64, k2: f64, h: f64) -> Self {
        Self {
            gammas,
            k1,
            k2,
            h,
            sigma1: 0.0,
            sigma2: 0.0,
        }
    }

    pub fn from_single(
        gammas: Vec<f64>,
        k1: f64,
        k2: f64,
        h: f64,
        n: usize,
        sigma1: f64,
        sigma2: f64,
    ) -> Self {
        let (k1, k2, h) = gains_from_single(k1, k2, h, n);
        Self {
            gammas,
            k1,
            k2,
            h,
            sigma1,
            sigma2,
        }
    }

    /// Single-actuator gains whose loop coincides with the sum dynamics of
    /// `n` agents running these gains.
    pub fn equivalent_single(&self, n: usize) -> Self {
        Self::single(self.gammas.clone(), self.k1 * n as f64, self.k2, self.h)
    }

    /// `Γ1 = [γ0 … γ(r−2) 1]`.
    pub fn gamma_row(&self) -> Matrix {
        let r = self.gammas.len() + 1;
        let mut row = Matrix::zeros(1, r);
        for (j, g) in self.gammas.iter().enumerate() {
            row[(0, j)] = *g;
        }
        row[(0, r - 1)] = 1.0;
        row
    }

    /// Positivity of `k1, k2, h, γ`, nonnegative coupling, and stability of
    /// `f(λ) = λ^(r−1) + γ(r−2) λ^(r−2) + … + γ0`.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("k1", self.k1), ("k2", self.k2), ("h", self.h)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(RegulatorError::InvalidGains(format!("{name} = {v} must be positive")));
            }
        }
        for (name, v) in [("sigma1", self.sigma1), ("sigma2", self.sigma2)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(RegulatorError::InvalidGains(format!("{name} = {v} must be nonnegative")));
            }
        }
        if self.gammas.iter().any(|g| !(*g > 0.0)) {
            return Err(RegulatorError::InvalidGains(format!(
                "gammas {:?} must be positive",
                self.gammas
            )));
        }
        if !self.gammas.is_empty() && !PolyCoeffs::monic(self.gammas.clone()).is_hurwitz()? {
            return Err(RegulatorError::InvalidGains(format!(
                "polynomial with coefficients {:?} is not Hurwitz",
                self.gammas
            )));
        }
        Ok(())
    }
}

/// Controller state of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub eta1: DVector<f64>,
    pub eta2: DVector<f64>,
    pub varsigma: DVector<f64>,
}

impl AgentState {
    pub fn zeros(l: usize, r: usize) -> Self {
        Self {
            eta1: DVector::zeros(l),
            eta2: DVector::zeros(l),
            varsigma: DVector::zeros(r),
        }
    }
}

/// Control output and state derivative of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentDerivative {
    pub u: f64,
    pub eta1: DVector<f64>,
    pub eta2: DVector<f64>,
    pub varsigma: DVector<f64>,
}

/// The distributed dynamic output feedback law for `N` agents.
#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    pub im: InternalModel,
    pub observer: ObserverSpec,
    pub gains: GainSet,
    pub adjacency: Matrix,
    gamma_row: Matrix,
}

impl Controller {
    /// The observer is rebuilt at `gains.h`.
    pub fn new(im: InternalModel, observer: &ObserverSpec, gains: GainSet, graph: &Graph) -> Result<Self> {
        gains.validate()?;
        if gains.gammas.len() + 1 != observer.r() {
            return Err(RegulatorError::DimensionMismatch(format!(
                "{} gammas imply r = {}, the observer has r = {}",
                gains.gammas.len(),
                gains.gammas.len() + 1,
                observer.r()
            )));
        }
        let observer = observer.with_gain(gains.h)?;
        let gamma_row = gains.gamma_row();
        Ok(Self {
            im,
            observer,
            gains,
            adjacency: graph.weights().clone(),
            gamma_row,
        })
    }

    pub fn agents(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn l(&self) -> usize {
        self.im.l()
    }

    pub fn r(&self) -> usize {
        self.observer.r()
    }

    /// `ζ̂1 = Γ1 ς̂`.
    pub fn zeta_hat(&self, varsigma: &DVector<f64>) -> f64 {
        (&self.gamma_row * varsigma)[(0, 0)]
    }

    /// Actuator command of one agent.
    pub fn control(&self, agent: &AgentState, x: f64) -> f64 {
        let g = &self.gains;
        let p = (&self.im.psi_t1_inv * &agent.eta1)[(0, 0)];
        let q = (&self.im.psi_t2_inv * &agent.eta2)[(0, 0)];
        q - g.k2 * (x - p + g.k1 * self.zeta_hat(&agent.varsigma))
    }

    /// Commands and state derivatives of all agents given actuator states
    /// `x` and the regulated error `e`.
    pub fn derivatives(&self, agents: &[AgentState], x: &[f64], e: f64) -> Result<Vec<AgentDerivative>> {
        let n = self.agents();
        let (l, r) = (self.l(), self.r());
        if agents.len() != n || x.len() != n {
            return Err(RegulatorError::DimensionMismatch(format!(
                "expected {n} agents, got {} states and {} actuator values",
                agents.len(),
                x.len()
            )));
        }
        if let Some(bad) = agents
            .iter()
            .position(|a| a.eta1.len() != l || a.eta2.len() != l || a.varsigma.len() != r)
        {
            return Err(RegulatorError::DimensionMismatch(format!(
                "agent {} state has wrong dimensions (expected l = {l}, r = {r})",
                bad + 1
            )));
        }
        let im = &self.im;
        let out = (0..n)
            .map(|i| {
                let a = &agents[i];
                let u = self.control(a, x[i]);
                let (c1, c2) = self.coupling(agents, i);
                let eta1 = &im.m1 * &a.eta1 + im.n1.column(0) * x[i] + c1 * self.gains.sigma1;
                let eta2 = &im.m2 * &a.eta2 + im.n2.column(0) * u + c2 * self.gains.sigma2;
                let varsigma = &self.observer.a0 * &a.varsigma + self.observer.b0.column(0) * e;
                AgentDerivative { u, eta1, eta2, varsigma }
            })
            .collect();
        Ok(out)
    }

    /// `Σj aij (ηj − ηi)` for both internal-model states of agent `i`.
    pub fn coupling(&self, agents: &[AgentState], i: usize) -> (DVector<f64>, DVector<f64>) {
        let l = self.l();
        let mut c1 = DVector::zeros(l);
        let mut c2 = DVector::zeros(l);
        for (j, other) in agents.iter().enumerate() {
            let aij = self.adjacency[(i, j)];
            if aij != 0.0 {
                c1 += (&other.eta1 - &agents[i].eta1) * aij;
                c2 += (&other.eta2 - &agents[i].eta2) * aij;
            }
        }
        (c1, c2)
    }
}
