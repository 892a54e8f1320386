//! Fixed-step simulation of the full closed loop.
//!
//! The state is laid out as
//! `(z, ξ, v, x1..xN, η11..η1N, η21..η2N, ς̂1..ς̂N)`; since every block is
//! linear the right-hand side is one sparse matrix.

use std::io::{self, Write};

use log::warn;
use nalgebra::DVector;
use nalgebra_sparse::CsrMatrix;
use rand::Rng;
use thiserror::Error;

use crate::linalg::{self, Matrix, Tolerances};
use crate::models::{ActuatorBank, Exosystem, RealizedPlant};
use crate::regulator::{AgentState, Controller, RegulatorError, SteadyState};

/// Norm beyond which a run is declared divergent.
pub const DIVERGENCE_NORM: f64 = 1e12;
/// `dt · ρ(A)` at or above which a step-size warning is raised.
pub const RK4_STABILITY_LIMIT: f64 = 2.5;
/// Share of the horizon used for tail metrics.
pub const TAIL_FRACTION: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("state diverged at t = {time} (norm {norm:.3e})")]
    Diverged { time: f64, norm: f64 },
    #[error("invalid step: {0}")]
    InvalidStep(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),
    #[error(transparent)]
    Regulator(#[from] RegulatorError),
}

pub type Result<T> = std::result::Result<T, SimError>;

#[derive(Debug, Clone, PartialEq)]
pub enum SimWarning {
    StepTooLarge { dt: f64, spectral_radius: f64 },
}

/// Offsets of each block in the closed-loop state vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub nz: usize,
    pub r: usize,
    pub q: usize,
    pub l: usize,
    pub agents: usize,
    pub z: usize,
    pub xi: usize,
    pub v: usize,
    pub x: usize,
    pub eta1: usize,
    pub eta2: usize,
    pub varsigma: usize,
    pub dim: usize,
}

impl Layout {
    pub fn new(nz: usize, r: usize, q: usize, l: usize, agents: usize) -> Self {
        let z = 0;
        let xi = z + nz;
        let v = xi + r;
        let x = v + q;
        let eta1 = x + agents;
        let eta2 = eta1 + agents * l;
        let varsigma = eta2 + agents * l;
        let dim = varsigma + agents * r;
        Self {
            nz,
            r,
            q,
            l,
            agents,
            z,
            xi,
            v,
            x,
            eta1,
            eta2,
            varsigma,
            dim,
        }
    }

    pub fn eta1_of(&self, i: usize) -> usize {
        self.eta1 + i * self.l
    }

    pub fn eta2_of(&self, i: usize) -> usize {
        self.eta2 + i * self.l
    }

    pub fn varsigma_of(&self, i: usize) -> usize {
        self.varsigma + i * self.r
    }

    /// Splits a state vector into per-agent controller states.
    pub fn agents_of(&self, state: &[f64]) -> Vec<AgentState> {
        (0..self.agents)
            .map(|i| AgentState {
                eta1: DVector::from_column_slice(&state[self.eta1_of(i)..self.eta1_of(i) + self.l]),
                eta2: DVector::from_column_slice(&state[self.eta2_of(i)..self.eta2_of(i) + self.l]),
                varsigma: DVector::from_column_slice(&state[self.varsigma_of(i)..self.varsigma_of(i) + self.r]),
            })
            .collect()
    }
}

/// Plant, exosystem, actuator bank and controllers at one uncertainty value.
#[derive(Debug, Clone)]
pub struct ClosedLoopSystem {
    pub layout: Layout,
    pub plant: RealizedPlant,
    pub exosystem: Exosystem,
    pub actuators: ActuatorBank,
    pub controller: Controller,
    matrix: Matrix,
    csr: CsrMatrix<f64>,
    /// Row `i` maps the state to `ui`.
    u_rows: Matrix,
    e_row: Matrix,
}

fn put(m: &mut Matrix, row: usize, col: usize, block: &Matrix) {
    if !block.is_empty() {
        let cur = m.view((row, col), block.shape()).clone_owned();
        m.view_mut((row, col), block.shape()).copy_from(&(cur + block));
    }
}

impl ClosedLoopSystem {
    pub fn new(
        plant: RealizedPlant,
        exo: &Exosystem,
        actuators: ActuatorBank,
        controller: Controller,
    ) -> Result<Self> {
        let (nz, r, q, l) = (plant.nz(), plant.r, exo.q(), controller.l());
        let agents = actuators.count;
        if controller.agents() != agents {
            return Err(SimError::DimensionMismatch(format!(
                "{} controllers for {agents} actuators",
                controller.agents()
            )));
        }
        if controller.r() != r || plant.q() != q {
            return Err(SimError::DimensionMismatch(format!(
                "controller r = {}, plant r = {r}; plant q = {}, exosystem q = {q}",
                controller.r(),
                plant.q()
            )));
        }
        let lay = Layout::new(nz, r, q, l, agents);
        let dim = lay.dim;
        let mut m = Matrix::zeros(dim, dim);

        put(&mut m, lay.z, lay.z, &plant.a1);
        put(&mut m, lay.z, lay.xi, &plant.a2);
        put(&mut m, lay.z, lay.v, &plant.e0);
        for s in 0..r - 1 {
            m[(lay.xi + s, lay.xi + s + 1)] = 1.0;
        }
        let last = lay.xi + r - 1;
        put(&mut m, last, lay.z, &plant.a3);
        for s in 0..r {
            m[(last, lay.xi + s)] += plant.c[s];
        }
        put(&mut m, last, lay.v, &plant.er);
        for i in 0..agents {
            m[(last, lay.x + i)] += plant.b;
        }
        put(&mut m, lay.v, lay.v, &exo.s);

        let mut e_row = Matrix::zeros(1, dim);
        e_row[(0, lay.xi)] = 1.0;
        put(&mut e_row, 0, lay.v, &(-&plant.f));

        let c = &controller;
        let g = &c.gains;
        let im = &c.im;
        let gamma = g.gamma_row();
        let mut u_rows = Matrix::zeros(agents, dim);
        for i in 0..agents {
            let mut u = Matrix::zeros(1, dim);
            put(&mut u, 0, lay.eta2_of(i), &im.psi_t2_inv);
            u[(0, lay.x + i)] -= g.k2;
            put(&mut u, 0, lay.eta1_of(i), &(&im.psi_t1_inv * g.k2));
            put(&mut u, 0, lay.varsigma_of(i), &(&gamma * (-g.k2 * g.k1)));
            u_rows.set_row(i, &u.row(0));

            let xr = lay.x + i;
            m[(xr, xr)] += actuators.a;
            put(&mut m, xr, 0, &(&u * actuators.b_a));

            let (e1, e2) = (lay.eta1_of(i), lay.eta2_of(i));
            put(&mut m, e1, e1, &im.m1);
            put(&mut m, e1, xr, &im.n1);
            put(&mut m, e2, e2, &im.m2);
            put(&mut m, e2, 0, &(&im.n2 * &u));
            for j in 0..agents {
                let aij = c.adjacency[(i, j)];
                if aij != 0.0 && i != j {
                    let eye = Matrix::identity(l, l);
                    put(&mut m, e1, lay.eta1_of(j), &(&eye * (g.sigma1 * aij)));
                    put(&mut m, e1, e1, &(&eye * (-g.sigma1 * aij)));
                    put(&mut m, e2, lay.eta2_of(j), &(&eye * (g.sigma2 * aij)));
                    put(&mut m, e2, e2, &(&eye * (-g.sigma2 * aij)));
                }
            }
            let vs = lay.varsigma_of(i);
            put(&mut m, vs, vs, &c.observer.a0);
            put(&mut m, vs, 0, &(&c.observer.b0 * &e_row));
        }

        let csr = CsrMatrix::from(&m);
        Ok(Self {
            layout: lay,
            plant,
            exosystem: exo.clone(),
            actuators,
            controller,
            matrix: m,
            csr,
            u_rows,
            e_row,
        })
    }

    /// Dense closed-loop matrix.
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.layout.dim
    }

    /// `out = A x` using the sparse representation.
    pub fn rhs(&self, x: &[f64], out: &mut [f64]) {
        let offsets = self.csr.row_offsets();
        let cols = self.csr.col_indices();
        let vals = self.csr.values();
        for (row, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in offsets[row]..offsets[row + 1] {
                acc += vals[k] * x[cols[k]];
            }
            *o = acc;
        }
    }

    /// Right-hand side evaluated block by block through
    /// [`Controller::derivatives`]; used to cross-check the matrix.
    pub fn rhs_direct(&self, state: &[f64]) -> Result<Vec<f64>> {
        let lay = &self.layout;
        let p = &self.plant;
        let col = |off: usize, len: usize| DVector::from_column_slice(&state[off..off + len]);
        let z = col(lay.z, lay.nz);
        let xi = col(lay.xi, lay.r);
        let v = col(lay.v, lay.q);
        let x: Vec<f64> = state[lay.x..lay.x + lay.agents].to_vec();
        let e = xi[0] - (&p.f * &v)[(0, 0)];
        let agents = lay.agents_of(state);
        let derivs = self.controller.derivatives(&agents, &x, e)?;

        let mut out = vec![0.0; lay.dim];
        let dz = &p.a1 * &z + &p.a2 * xi[0] + &p.e0 * &v;
        out[lay.z..lay.z + lay.nz].copy_from_slice(dz.as_slice());
        for s in 0..lay.r - 1 {
            out[lay.xi + s] = xi[s + 1];
        }
        let up: f64 = x.iter().sum();
        let mut last = (&p.a3 * &z)[(0, 0)] + (&p.er * &v)[(0, 0)] + p.b * up;
        for s in 0..lay.r {
            last += p.c[s] * xi[s];
        }
        out[lay.xi + lay.r - 1] = last;
        let dv = &self.exosystem.s * &v;
        out[lay.v..lay.v + lay.q].copy_from_slice(dv.as_slice());
        for (i, d) in derivs.iter().enumerate() {
            out[lay.x + i] = self.actuators.a * x[i] + self.actuators.b_a * d.u;
            out[lay.eta1_of(i)..lay.eta1_of(i) + lay.l].copy_from_slice(d.eta1.as_slice());
            out[lay.eta2_of(i)..lay.eta2_of(i) + lay.l].copy_from_slice(d.eta2.as_slice());
            out[lay.varsigma_of(i)..lay.varsigma_of(i) + lay.r].copy_from_slice(d.varsigma.as_slice());
        }
        Ok(out)
    }

    pub fn error(&self, state: &[f64]) -> f64 {
        row_dot(&self.e_row, 0, state)
    }

    pub fn reference(&self, state: &[f64]) -> f64 {
        let lay = &self.layout;
        (0..lay.q).map(|j| self.plant.f[(0, j)] * state[lay.v + j]).sum()
    }

    pub fn inputs(&self, state: &[f64]) -> Vec<f64> {
        (0..self.layout.agents).map(|i| row_dot(&self.u_rows, i, state)).collect()
    }

    /// State at which `e ≡ 0` for the exosystem state `v`: the plant on
    /// `(Z v, Π v)`, each agent carrying `1/N` of `(Ξ v, Θ1 v, Θ2 v)` and
    /// every observer at zero.
    pub fn steady_state(&self, v: &[f64], tol: &Tolerances) -> Result<Vec<f64>> {
        let lay = self.layout;
        if v.len() != lay.q {
            return Err(SimError::DimensionMismatch(format!("v has {} entries, expected {}", v.len(), lay.q)));
        }
        let ss = SteadyState::solve(&self.plant, &self.exosystem, &self.actuators, tol)?;
        let (theta1, theta2) = self.controller.im.steady_state_maps(&ss, &self.exosystem.s);
        let v = DVector::from_column_slice(v);
        let n = lay.agents as f64;
        let mut x = vec![0.0; lay.dim];
        x[lay.z..lay.z + lay.nz].copy_from_slice((&ss.z * &v).as_slice());
        x[lay.xi..lay.xi + lay.r].copy_from_slice((&ss.pi * &v).as_slice());
        x[lay.v..lay.v + lay.q].copy_from_slice(v.as_slice());
        let xi = (&ss.xi * &v)[(0, 0)] / n;
        let t1 = &theta1 * &v / n;
        let t2 = &theta2 * &v / n;
        for i in 0..lay.agents {
            x[lay.x + i] = xi;
            x[lay.eta1_of(i)..lay.eta1_of(i) + lay.l].copy_from_slice(t1.as_slice());
            x[lay.eta2_of(i)..lay.eta2_of(i) + lay.l].copy_from_slice(t2.as_slice());
        }
        Ok(x)
    }

    /// Uniform draw in `[−range, range]` for every coordinate except the
    /// exosystem, which starts at `v0`.
    pub fn random_initial_state(&self, v0: &[f64], range: f64, rng: &mut impl Rng) -> Result<Vec<f64>> {
        let lay = &self.layout;
        if v0.len() != lay.q {
            return Err(SimError::DimensionMismatch(format!(
                "v0 has {} entries, the exosystem has {}",
                v0.len(),
                lay.q
            )));
        }
        let mut x: Vec<f64> = (0..lay.dim).map(|_| rng.random_range(-range..=range)).collect();
        x[lay.v..lay.v + lay.q].copy_from_slice(v0);
        Ok(x)
    }

    /// Classical RK4 with fixed step from `x0` over `[0, horizon]`, recording
    /// every `decimate`-th step and the final one.
    pub fn simulate(&self, x0: &[f64], dt: f64, horizon: f64, decimate: usize) -> Result<Trajectory> {
        if x0.len() != self.dim() {
            return Err(SimError::DimensionMismatch(format!(
                "initial state has {} entries, expected {}",
                x0.len(),
                self.dim()
            )));
        }
        let steps = step_count(dt, horizon)?;
        let mut warnings = Vec::new();
        let rho = linalg::eigenvalues(&self.matrix)
            .map_err(|e| SimError::InvalidStep(e.to_string()))?
            .iter()
            .fold(0.0_f64, |acc, z| acc.max(z.norm()));
        if dt * rho >= RK4_STABILITY_LIMIT {
            warn!("dt = {dt} is large for spectral radius {rho:.3} (dt*rho = {:.3})", dt * rho);
            warnings.push(SimWarning::StepTooLarge { dt, spectral_radius: rho });
        }
        let (times, states) = integrate(|x, out| self.rhs(x, out), x0, dt, steps, decimate.max(1))?;
        Ok(self.trajectory(times, states, dt, warnings))
    }

    fn trajectory(&self, times: Vec<f64>, states: Vec<Vec<f64>>, dt: f64, warnings: Vec<SimWarning>) -> Trajectory {
        let lay = self.layout;
        let mut e = Vec::with_capacity(states.len());
        let mut y0 = Vec::with_capacity(states.len());
        let mut y = Vec::with_capacity(states.len());
        let mut up = Vec::with_capacity(states.len());
        let mut yi = Vec::with_capacity(states.len());
        let mut ui = Vec::with_capacity(states.len());
        for s in &states {
            e.push(self.error(s));
            y0.push(self.reference(s));
            y.push(s[lay.xi]);
            let xs = s[lay.x..lay.x + lay.agents].to_vec();
            up.push(xs.iter().sum());
            yi.push(xs);
            ui.push(self.inputs(s));
        }
        Trajectory {
            layout: lay,
            dt,
            times,
            states,
            e,
            y0,
            y,
            u_p: up,
            y_i: yi,
            u_i: ui,
            warnings,
        }
    }
}

fn row_dot(m: &Matrix, row: usize, x: &[f64]) -> f64 {
    m.row(row).iter().zip(x).map(|(a, b)| a * b).sum()
}

fn step_count(dt: f64, horizon: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(SimError::InvalidStep(format!("dt = {dt} must be positive")));
    }
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(SimError::InvalidStep(format!("horizon = {horizon} must be nonnegative")));
    }
    Ok((horizon / dt).round() as usize)
}

/// Classical fourth-order Runge–Kutta for `ẋ = f(x)` with a fixed step.
///
/// Returns the recorded times and states (every `record_every` steps plus
/// the last one). Fails when the state norm exceeds [`DIVERGENCE_NORM`] or
/// becomes non-finite.
pub fn integrate<F>(
    mut f: F,
    x0: &[f64],
    dt: f64,
    steps: usize,
    record_every: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = x0.len();
    let record_every = record_every.max(1);
    let mut x = x0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    let mut times = vec![0.0];
    let mut states = vec![x.clone()];
    for step in 1..=steps {
        f(&x, &mut k1);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * dt * k1[i];
        }
        f(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * dt * k2[i];
        }
        f(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = x[i] + dt * k3[i];
        }
        f(&tmp, &mut k4);
        let mut norm2 = 0.0;
        for i in 0..n {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            norm2 += x[i] * x[i];
        }
        let norm = norm2.sqrt();
        let time = step as f64 * dt;
        if !norm.is_finite() || norm > DIVERGENCE_NORM {
            return Err(SimError::Diverged { time, norm });
        }
        if step % record_every == 0 || step == steps {
            times.push(time);
            states.push(x.clone());
        }
    }
    Ok((times, states))
}

/// Recorded closed-loop run with derived signals.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub layout: Layout,
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub e: Vec<f64>,
    pub y0: Vec<f64>,
    pub y: Vec<f64>,
    pub u_p: Vec<f64>,
    /// Actuator outputs per recorded time.
    pub y_i: Vec<Vec<f64>>,
    /// Actuator commands per recorded time.
    pub u_i: Vec<Vec<f64>>,
    pub warnings: Vec<SimWarning>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// CSV with columns `t,e,y0,y,u_p,y_1..y_N,u_1..u_N`, optionally followed
    /// by the full state as `s_0..s_(dim−1)`.
    pub fn write_csv<W: Write>(&self, mut w: W, full_state: bool) -> io::Result<()> {
        let n = self.layout.agents;
        let mut header: Vec<String> = ["t", "e", "y0", "y", "u_p"].iter().map(|s| s.to_string()).collect();
        header.extend((1..=n).map(|i| format!("y_{i}")));
        header.extend((1..=n).map(|i| format!("u_{i}")));
        if full_state {
            header.extend((0..self.layout.dim).map(|i| format!("s_{i}")));
        }
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.len() {
            let mut row = vec![self.times[k], self.e[k], self.y0[k], self.y[k], self.u_p[k]];
            row.extend(&self.y_i[k]);
            row.extend(&self.u_i[k]);
            if full_state {
                row.extend(&self.states[k]);
            }
            let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Regulation and input-sharing summary of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// Largest `|e|` over the last 20% of the horizon.
    pub tail_max_error: f64,
    /// Largest `max_i yi − min_i yi` over the last 20% (0 for one actuator).
    pub tail_max_sharing: f64,
    /// First time after which `|e|` stays below the threshold.
    pub settling_time: Option<f64>,
    /// `∫ e² dt`.
    pub error_energy: f64,
    /// `∫ Σ ui² dt`.
    pub input_energy: f64,
}

impl Metrics {
    pub fn compute(traj: &Trajectory, threshold: f64) -> Self {
        let n = traj.len();
        if n == 0 {
            return Self {
                tail_max_error: 0.0,
                tail_max_sharing: 0.0,
                settling_time: Some(0.0),
                error_energy: 0.0,
                input_energy: 0.0,
            };
        }
        let t0 = traj.times[0];
        let t_end = traj.times[n - 1];
        let tail_start = t_end - TAIL_FRACTION * (t_end - t0);
        let mut tail_max_error: f64 = 0.0;
        let mut tail_max_sharing: f64 = 0.0;
        for k in 0..n {
            if traj.times[k] >= tail_start - 1e-12 {
                tail_max_error = tail_max_error.max(traj.e[k].abs());
                let ys = &traj.y_i[k];
                if ys.len() > 1 {
                    let hi = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let lo = ys.iter().cloned().fold(f64::INFINITY, f64::min);
                    tail_max_sharing = tail_max_sharing.max(hi - lo);
                }
            }
        }
        let settling_time = match traj.e.iter().rposition(|e| e.abs() >= threshold) {
            None => Some(t0),
            Some(k) if k + 1 < n => Some(traj.times[k + 1]),
            Some(_) => None,
        };
        let mut error_energy = 0.0;
        let mut input_energy = 0.0;
        for k in 1..n {
            let h = traj.times[k] - traj.times[k - 1];
            error_energy += 0.5 * h * (traj.e[k].powi(2) + traj.e[k - 1].powi(2));
            let u2 = |k: usize| traj.u_i[k].iter().map(|u| u * u).sum::<f64>();
            input_energy += 0.5 * h * (u2(k) + u2(k - 1));
        }
        Self {
            tail_max_error,
            tail_max_sharing,
            settling_time,
            error_energy,
            input_energy,
        }
    }
}

/// Deviation between the sums of a multi-agent run and the equivalent
/// single-actuator run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumDeviation {
    pub absolute: f64,
    /// `absolute` divided by the largest magnitude of the compared single
    /// run quantities (or 1 when those vanish).
    pub relative: f64,
}

const MATCH_TOL: f64 = 1e-12;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= MATCH_TOL * (1.0 + a.abs().max(b.abs()))
}

/// Compares `(Σ xi, Σ η1i, Σ η2i)` of `multi` against `(x, η1, η2)` of
/// `single` at every recorded time.
///
/// The single loop must use `k1 = N k̄1`, `k2 = k̄2`, `h = h̄` and matched
/// initial conditions (sums of the actuator and internal-model states,
/// identical observer states).
pub fn sum_equivalence(
    multi_sys: &ClosedLoopSystem,
    multi: &Trajectory,
    single_sys: &ClosedLoopSystem,
    single: &Trajectory,
) -> Result<SumDeviation> {
    let (ml, sl) = (multi_sys.layout, single_sys.layout);
    let n = ml.agents;
    if sl.agents != 1 {
        return Err(SimError::ConfigMismatch(format!("single run has {} agents", sl.agents)));
    }
    let (gm, gs) = (&multi_sys.controller.gains, &single_sys.controller.gains);
    if !close(gs.k1, n as f64 * gm.k1) {
        return Err(SimError::ConfigMismatch(format!(
            "single k1 = {} but N k1 = {}",
            gs.k1,
            n as f64 * gm.k1
        )));
    }
    if !close(gs.k2, gm.k2) || !close(gs.h, gm.h) || gs.gammas != gm.gammas {
        return Err(SimError::ConfigMismatch("k2, h or gammas differ".into()));
    }
    if multi_sys.plant != single_sys.plant
        || multi_sys.actuators.a != single_sys.actuators.a
        || multi_sys.actuators.b_a != single_sys.actuators.b_a
        || multi_sys.controller.im != single_sys.controller.im
        || multi_sys.controller.observer.deltas != single_sys.controller.observer.deltas
    {
        return Err(SimError::ConfigMismatch("plant, actuator or internal model differ".into()));
    }
    if multi.dt != single.dt {
        return Err(SimError::ConfigMismatch(format!("dt {} vs {}", multi.dt, single.dt)));
    }
    if multi.times != single.times {
        return Err(SimError::ConfigMismatch("time grids differ".into()));
    }
    let (m0, s0) = (&multi.states[0], &single.states[0]);
    let shared = ml.x;
    if (0..shared).any(|k| !close(m0[k], s0[k])) {
        return Err(SimError::ConfigMismatch("plant or exosystem initial states differ".into()));
    }
    for j in 0..ml.r {
        if (0..n).any(|i| !close(m0[ml.varsigma_of(i) + j], s0[sl.varsigma + j])) {
            return Err(SimError::ConfigMismatch("observer initial states are not identical".into()));
        }
    }

    let sums = |s: &[f64]| -> Vec<f64> {
        let mut out = vec![(0..n).map(|i| s[ml.x + i]).sum::<f64>()];
        for j in 0..ml.l {
            out.push((0..n).map(|i| s[ml.eta1_of(i) + j]).sum());
        }
        for j in 0..ml.l {
            out.push((0..n).map(|i| s[ml.eta2_of(i) + j]).sum());
        }
        out
    };
    let singles = |s: &[f64]| -> Vec<f64> {
        let mut out = vec![s[sl.x]];
        out.extend_from_slice(&s[sl.eta1..sl.eta1 + sl.l]);
        out.extend_from_slice(&s[sl.eta2..sl.eta2 + sl.l]);
        out
    };
    let initial_gap = sums(m0)
        .iter()
        .zip(singles(s0))
        .any(|(a, b)| !close(*a, b));
    if initial_gap {
        return Err(SimError::ConfigMismatch("initial sums do not match the single run".into()));
    }

    let mut absolute: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (ms, ss) in multi.states.iter().zip(&single.states) {
        let a = sums(ms);
        let b = singles(ss);
        for (x, y) in a.iter().zip(&b) {
            absolute = absolute.max((x - y).abs());
            scale = scale.max(y.abs());
        }
    }
    let relative = if scale > 0.0 { absolute / scale } else { absolute };
    Ok(SumDeviation { absolute, relative })
}

/// Initial state of the single run matched to a multi-agent initial state
/// (the observer state is taken from agent 1).
pub fn matched_single_state(multi: &Layout, single: &Layout, x0: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; single.dim];
    out[..multi.x].copy_from_slice(&x0[..multi.x]);
    out[single.x] = (0..multi.agents).map(|i| x0[multi.x + i]).sum();
    for j in 0..multi.l {
        out[single.eta1 + j] = (0..multi.agents).map(|i| x0[multi.eta1_of(i) + j]).sum();
        out[single.eta2 + j] = (0..multi.agents).map(|i| x0[multi.eta2_of(i) + j]).sum();
    }
    out[single.varsigma..single.varsigma + multi.r]
        .copy_from_slice(&x0[multi.varsigma_of(0)..multi.varsigma_of(0) + multi.r]);
    out
}
