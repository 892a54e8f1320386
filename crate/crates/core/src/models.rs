//! Plant, exosystem, actuator bank and communication graph descriptions.
//!
//! The plant is in strict-feedback normal form with relative degree `r`:
//!
//! ```text
//! ż    = A1(w) z + A2(w) ξ1 + E0(w) v
//! ξ̇s   = ξ(s+1),                        s = 1..r-1
//! ξ̇r   = A3(w) z + Σ cs(w) ξs + Er(w) v + b(w) up
//! y    = ξ1,   e = y − F(w) v
//! ```
//!
//! Every uncertain quantity is affine in the parameter vector `w`, which
//! ranges over an axis-aligned box.

use std::fmt;

use log::warn;
use nalgebra::SymmetricEigen;
use thiserror::Error;

use crate::linalg::{self, LinalgError, Matrix, PolyCoeffs, Tolerances};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("control direction b(w) = {b} is not positive")]
    NonPositiveControlDirection { b: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid actuator bank: {0}")]
    InvalidActuator(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid uncertainty box: {0}")]
    InvalidBox(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Matrix-valued function `base + Σ wᵢ·deltaᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMatrix {
    base: Matrix,
    deltas: Vec<Matrix>,
}

impl AffineMatrix {
    /// Constant matrix over an `n_w`-dimensional parameter space.
    pub fn constant(base: Matrix, n_w: usize) -> Self {
        let deltas = vec![Matrix::zeros(base.nrows(), base.ncols()); n_w];
        Self { base, deltas }
    }

    pub fn new(base: Matrix, deltas: Vec<Matrix>) -> Result<Self, ModelError> {
        if let Some(bad) = deltas.iter().position(|d| d.shape() != base.shape()) {
            return Err(ModelError::Dimension(format!(
                "delta {bad} is {:?}, base is {:?}",
                deltas[bad].shape(),
                base.shape()
            )));
        }
        Ok(Self { base, deltas })
    }

    /// Adds `scale` at `(row, col)` of the delta for coordinate `index`.
    pub fn with_term(mut self, index: usize, row: usize, col: usize, scale: f64) -> Self {
        self.deltas[index][(row, col)] += scale;
        self
    }

    pub fn base(&self) -> &Matrix {
        &self.base
    }

    pub fn deltas(&self) -> &[Matrix] {
        &self.deltas
    }

    pub fn shape(&self) -> (usize, usize) {
        self.base.shape()
    }

    pub fn n_w(&self) -> usize {
        self.deltas.len()
    }

    pub fn eval(&self, w: &[f64]) -> Matrix {
        let mut out = self.base.clone();
        for (d, wi) in self.deltas.iter().zip(w) {
            if *wi != 0.0 {
                out += d * *wi;
            }
        }
        out
    }
}

/// Closed box `[lower, upper]` of admissible uncertainty values.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl UncertaintyBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, ModelError> {
        if lower.len() != upper.len() {
            return Err(ModelError::InvalidBox(format!(
                "{} lower bounds but {} upper bounds",
                lower.len(),
                upper.len()
            )));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(ModelError::InvalidBox("lower bound exceeds upper bound".into()));
        }
        Ok(Self { lower, upper })
    }

    /// `[-radius, radius]^dim`.
    pub fn symmetric(dim: usize, radius: f64) -> Self {
        Self {
            lower: vec![-radius; dim],
            upper: vec![radius; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    /// Vertex `k`: bit `i` of `k` selects the upper bound of coordinate `i`.
    pub fn vertex(&self, k: usize) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                if (k >> i) & 1 == 1 {
                    self.upper[i]
                } else {
                    self.lower[i]
                }
            })
            .collect()
    }

    /// All `2^dim` vertices.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        (0..(1usize << self.dim())).map(|k| self.vertex(k)).collect()
    }

    /// Vertices followed by the center.
    pub fn vertices_and_center(&self) -> Vec<Vec<f64>> {
        let mut v = self.vertices();
        v.push(self.center());
        v
    }

    /// Tensor grid with `resolution` points per axis (endpoints included).
    pub fn grid(&self, resolution: usize) -> Vec<Vec<f64>> {
        let res = resolution.max(2);
        let dim = self.dim();
        let total = res.pow(dim as u32);
        (0..total)
            .map(|mut k| {
                (0..dim)
                    .map(|i| {
                        let idx = k % res;
                        k /= res;
                        let t = idx as f64 / (res - 1) as f64;
                        self.lower[i] + t * (self.upper[i] - self.lower[i])
                    })
                    .collect()
            })
            .collect()
    }

    pub fn contains(&self, w: &[f64]) -> bool {
        w.len() == self.dim()
            && w
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (l, u))| *l <= *x && *x <= *u)
    }
}

/// Uncertain strict-feedback plant.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertainPlant {
    pub n: usize,
    pub r: usize,
    pub a1: AffineMatrix,
    pub a2: AffineMatrix,
    pub a3: AffineMatrix,
    pub e0: AffineMatrix,
    pub er: AffineMatrix,
    pub f: AffineMatrix,
    /// Row `[c1 … cr]`.
    pub c: AffineMatrix,
    /// 1×1 control direction.
    pub b: AffineMatrix,
    pub w_box: UncertaintyBox,
}

/// Plant matrices at one concrete uncertainty value.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizedPlant {
    pub n: usize,
    pub r: usize,
    pub a1: Matrix,
    pub a2: Matrix,
    pub a3: Matrix,
    pub e0: Matrix,
    pub er: Matrix,
    pub f: Matrix,
    pub c: Vec<f64>,
    pub b: f64,
    pub w: Vec<f64>,
}

impl RealizedPlant {
    /// Dimension of the zero dynamics, `n − r`.
    pub fn nz(&self) -> usize {
        self.n - self.r
    }

    pub fn q(&self) -> usize {
        self.f.ncols()
    }
}

impl UncertainPlant {
    /// Checks every shape against `(n, r)`, the exosystem dimension taken
    /// from `F`, and the box dimension.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.r == 0 || self.r > self.n {
            return Err(ModelError::Dimension(format!(
                "relative degree {} must be in 1..={}",
                self.r, self.n
            )));
        }
        let nz = self.n - self.r;
        let q = self.f.shape().1;
        let n_w = self.w_box.dim();
        let expect = [
            ("A1", &self.a1, (nz, nz)),
            ("A2", &self.a2, (nz, 1)),
            ("A3", &self.a3, (1, nz)),
            ("E0", &self.e0, (nz, q)),
            ("Er", &self.er, (1, q)),
            ("F", &self.f, (1, q)),
            ("c", &self.c, (1, self.r)),
            ("b", &self.b, (1, 1)),
        ];
        for (name, m, shape) in expect {
            if m.shape() != shape {
                return Err(ModelError::Dimension(format!(
                    "{name} is {:?}, expected {:?}",
                    m.shape(),
                    shape
                )));
            }
            if m.n_w() != n_w {
                return Err(ModelError::Dimension(format!(
                    "{name} depends on {} parameters, the box has {n_w}",
                    m.n_w()
                )));
            }
        }
        Ok(())
    }

    pub fn nz(&self) -> usize {
        self.n - self.r
    }

    pub fn q(&self) -> usize {
        self.f.shape().1
    }

    pub fn n_w(&self) -> usize {
        self.w_box.dim()
    }

    /// Evaluates every matrix at `w`. Values outside the box are accepted
    /// with a warning.
    pub fn realize(&self, w: &[f64]) -> Result<RealizedPlant, ModelError> {
        if w.len() != self.n_w() {
            return Err(ModelError::Dimension(format!(
                "w has {} entries, the box has {}",
                w.len(),
                self.n_w()
            )));
        }
        if !self.w_box.contains(w) {
            warn!("realizing plant outside the uncertainty box at w = {w:?}");
        }
        let b = self.b.eval(w)[(0, 0)];
        if !(b > 0.0) {
            return Err(ModelError::NonPositiveControlDirection { b });
        }
        Ok(RealizedPlant {
            n: self.n,
            r: self.r,
            a1: self.a1.eval(w),
            a2: self.a2.eval(w),
            a3: self.a3.eval(w),
            e0: self.e0.eval(w),
            er: self.er.eval(w),
            f: self.f.eval(w),
            c: self.c.eval(w).iter().copied().collect(),
            b,
            w: w.to_vec(),
        })
    }
}

/// Autonomous signal generator `v̇ = S v` together with the companion pair
/// built from the minimal polynomial of `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct Exosystem {
    pub s: Matrix,
    pub poly: PolyCoeffs,
    pub phi: Matrix,
    pub psi: Matrix,
}

impl Exosystem {
    pub fn new(s: Matrix, tol: &Tolerances) -> Result<Self, ModelError> {
        let poly = linalg::minimal_polynomial(&s, tol)?;
        let (phi, psi) = linalg::companion_pair(&poly);
        Ok(Self { s, poly, phi, psi })
    }

    pub fn q(&self) -> usize {
        self.s.nrows()
    }

    /// Degree of the minimal polynomial.
    pub fn l(&self) -> usize {
        self.poly.degree()
    }

    /// Smallest real part of the spectrum of `S`.
    pub fn min_real_part(&self) -> Result<f64, ModelError> {
        Ok(linalg::eigenvalues(&self.s)?
            .iter()
            .fold(f64::INFINITY, |acc, z| acc.min(z.re)))
    }
}

/// `N` identical first-order actuators `ẋi = a xi + b_a ui`, `up = Σ xi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorBank {
    pub a: f64,
    pub b_a: f64,
    pub count: usize,
}

impl ActuatorBank {
    pub fn new(a: f64, b_a: f64, count: usize) -> Result<Self, ModelError> {
        if !(b_a > 0.0) {
            return Err(ModelError::InvalidActuator(format!("b_a = {b_a} must be positive")));
        }
        if count == 0 {
            return Err(ModelError::InvalidActuator("need at least one actuator".into()));
        }
        Ok(Self { a, b_a, count })
    }
}

/// Undirected weighted communication graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    weights: Matrix,
}

impl Graph {
    pub fn new(weights: Matrix) -> Result<Self, ModelError> {
        let n = weights.nrows();
        if weights.ncols() != n || n == 0 {
            return Err(ModelError::InvalidGraph("adjacency must be square and nonempty".into()));
        }
        for i in 0..n {
            if weights[(i, i)] != 0.0 {
                return Err(ModelError::InvalidGraph(format!("nonzero self loop at node {}", i + 1)));
            }
            for j in 0..n {
                let a = weights[(i, j)];
                if !(a >= 0.0) || !a.is_finite() {
                    return Err(ModelError::InvalidGraph(format!("weight ({}, {}) = {a}", i + 1, j + 1)));
                }
                if a != weights[(j, i)] {
                    return Err(ModelError::InvalidGraph(format!(
                        "weights ({}, {}) and ({}, {}) differ",
                        i + 1,
                        j + 1,
                        j + 1,
                        i + 1
                    )));
                }
            }
        }
        Ok(Self { weights })
    }

    /// Unit-weight cycle 1–2–…–N–1. For N = 2 this is a single edge.
    pub fn ring(n: usize) -> Self {
        let mut w = Matrix::zeros(n, n);
        if n >= 2 {
            for i in 0..n {
                let j = (i + 1) % n;
                if i != j {
                    w[(i, j)] = 1.0;
                    w[(j, i)] = 1.0;
                }
            }
        }
        Self { weights: w }
    }

    pub fn complete(n: usize) -> Self {
        Self {
            weights: Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 }),
        }
    }

    pub fn empty(n: usize) -> Self {
        Self {
            weights: Matrix::zeros(n, n),
        }
    }

    pub fn node_count(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    /// `L = D − A`.
    pub fn laplacian(&self) -> Matrix {
        let n = self.node_count();
        let mut l = -self.weights.clone();
        for i in 0..n {
            l[(i, i)] = self.weights.row(i).sum();
        }
        l
    }

    /// Laplacian spectrum in ascending order.
    pub fn laplacian_eigenvalues(&self) -> Vec<f64> {
        let mut eigs: Vec<f64> = SymmetricEigen::new(self.laplacian())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        eigs
    }

    /// Second-smallest Laplacian eigenvalue (0 for a single node).
    pub fn algebraic_connectivity(&self) -> f64 {
        self.laplacian_eigenvalues().get(1).copied().unwrap_or(0.0)
    }

    pub fn is_connected(&self) -> bool {
        self.node_count() == 1 || self.algebraic_connectivity() > CONNECTIVITY_TOL
    }

    /// Laplacian eigenvalues above the connectivity tolerance.
    pub fn nonzero_laplacian_eigenvalues(&self) -> Vec<f64> {
        self.laplacian_eigenvalues()
            .into_iter()
            .filter(|&l| l > CONNECTIVITY_TOL)
            .collect()
    }
}

const CONNECTIVITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    fn push(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(AssumptionCheck {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{tag} {}: {}", c.name, c.detail)?;
        }
        Ok(())
    }
}

/// Standing assumptions, checked at the given uncertainty samples:
/// the exosystem has no strictly stable modes, the graph is connected, and
/// at each sample the zero dynamics are Hurwitz and `b(w) > 0`.
pub fn validate_assumptions(
    plant: &UncertainPlant,
    exo: &Exosystem,
    graph: &Graph,
    w_samples: &[Vec<f64>],
) -> AssumptionReport {
    let mut report = AssumptionReport::default();
    match exo.min_real_part() {
        Ok(re) => report.push(
            "exosystem spectrum nonnegative",
            re >= -1e-9,
            format!("min real part {re:.3e}"),
        ),
        Err(e) => report.push("exosystem spectrum nonnegative", false, e.to_string()),
    }
    let lambda2 = graph.algebraic_connectivity();
    report.push(
        "graph connected",
        graph.is_connected(),
        format!("N = {}, lambda_2 = {lambda2:.6}", graph.node_count()),
    );
    for w in w_samples {
        let b = plant.b.eval(w)[(0, 0)];
        report.push(format!("b(w) > 0 at w = {w:?}"), b > 0.0, format!("b = {b}"));
        match linalg::spectral_abscissa(&plant.a1.eval(w)) {
            Ok(abscissa) => report.push(
                format!("A1(w) Hurwitz at w = {w:?}"),
                abscissa < 0.0,
                format!("spectral abscissa {abscissa:.6}"),
            ),
            Err(e) => report.push(format!("A1(w) Hurwitz at w = {w:?}"), false, e.to_string()),
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples;
    use proptest::prelude::*;

    #[test]
    fn motor_plant_at_center_and_vertex() {
        let plant = examples::motor_plant();
        let p0 = plant.realize(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(p0.c[1], -2.0);
        assert_eq!(p0.b, 2.0);
        let pv = plant.realize(&[0.3, 0.3, 0.3]).unwrap();
        assert!((pv.c[1] + 1.7).abs() < 1e-15);
        assert!((pv.b - 2.3).abs() < 1e-15);
    }

    #[test]
    fn zero_control_direction_is_rejected() {
        let plant = examples::motor_plant();
        // b(w) = 2 + w2
        let err = plant.realize(&[0.0, -2.0, 0.0]).unwrap_err();
        assert_eq!(err, ModelError::NonPositiveControlDirection { b: 0.0 });
    }

    #[test]
    fn two_node_and_ring_laplacians() {
        let g = Graph::ring(2);
        assert_eq!(g.laplacian(), linalg::from_rows(&[&[1.0, -1.0], &[-1.0, 1.0]]));
        let eigs = g.laplacian_eigenvalues();
        assert!(eigs[0].abs() < 1e-12 && (eigs[1] - 2.0).abs() < 1e-12);

        let ring = Graph::ring(5);
        let l = ring.laplacian();
        for i in 0..5 {
            assert!(l.row(i).sum().abs() < 1e-12);
        }
        let expected = 2.0 - 2.0 * (2.0 * std::f64::consts::PI / 5.0).cos();
        assert!((ring.algebraic_connectivity() - expected).abs() < 1e-12);
    }

    #[test]
    fn empty_graph_is_disconnected() {
        let g = Graph::empty(3);
        assert_eq!(g.laplacian(), Matrix::zeros(3, 3));
        assert_eq!(g.algebraic_connectivity(), 0.0);
        assert!(!g.is_connected());
    }

    #[test]
    fn graph_validation() {
        let asym = linalg::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(Graph::new(asym).is_err());
        let selfloop = linalg::from_rows(&[&[1.0, 0.0], &[0.0, 0.0]]);
        assert!(Graph::new(selfloop).is_err());
    }

    #[test]
    fn motor_setup_satisfies_assumptions() {
        let plant = examples::motor_plant();
        let exo = examples::motor_exosystem();
        let report = validate_assumptions(
            &plant,
            &exo,
            &Graph::ring(5),
            &plant.w_box.vertices_and_center(),
        );
        assert!(report.passed(), "{report}");
        assert_eq!(report.checks.len(), 2 + 2 * 9);
    }

    #[test]
    fn assumption_failures_are_reported() {
        let plant = examples::motor_plant();
        let stable = Exosystem::new(Matrix::from_element(1, 1, -1.0), &Tolerances::default()).unwrap();
        let report = validate_assumptions(&plant, &stable, &Graph::ring(5), &[vec![0.0; 3]]);
        let failed: Vec<_> = report.failures().map(|c| c.name.as_str()).collect();
        assert_eq!(failed, vec!["exosystem spectrum nonnegative"]);

        let mut w = Matrix::zeros(4, 4);
        w[(0, 1)] = 1.0;
        w[(1, 0)] = 1.0;
        w[(2, 3)] = 1.0;
        w[(3, 2)] = 1.0;
        let split = Graph::new(w).unwrap();
        let report = validate_assumptions(&plant, &examples::motor_exosystem(), &split, &[vec![0.0; 3]]);
        let failed: Vec<_> = report.failures().map(|c| c.name.as_str()).collect();
        assert_eq!(failed, vec!["graph connected"]);
    }

    #[test]
    fn box_vertices_and_grid() {
        let b = UncertaintyBox::symmetric(3, 0.3);
        let v = b.vertices();
        assert_eq!(v.len(), 8);
        assert_eq!(v[0], vec![-0.3; 3]);
        assert_eq!(v[7], vec![0.3; 3]);
        assert_eq!(b.grid(3).len(), 27);
        assert!(b.contains(&b.center()));
        assert!(!b.contains(&[0.4, 0.0, 0.0]));
    }

    fn bfs_connected(w: &Matrix) -> bool {
        let n = w.nrows();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if w[(i, j)] > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn connectivity_matches_reachability(n in 1usize..=8, bits in proptest::collection::vec(0u8..4, 28)) {
            let mut w = Matrix::zeros(n, n);
            let mut k = 0;
            for i in 0..n {
                for j in (i + 1)..n {
                    // roughly one edge in four, with random weight
                    if bits[k] == 0 {
                        let weight = 0.5 + (k % 3) as f64;
                        w[(i, j)] = weight;
                        w[(j, i)] = weight;
                    }
                    k += 1;
                }
            }
            let g = Graph::new(w.clone()).unwrap();
            prop_assert_eq!(g.is_connected(), bfs_connected(&w));
            let l = g.laplacian();
            for i in 0..n {
                prop_assert!(l.row(i).sum().abs() < 1e-12);
            }
            let smallest = g.laplacian_eigenvalues()[0];
            prop_assert!(smallest.abs() <= 1e-9);
        }

        #[test]
        fn realization_is_affine(w1 in proptest::collection::vec(-0.5f64..0.5, 8),
                                 w2 in proptest::collection::vec(-0.5f64..0.5, 8)) {
            let plant = examples::suspension_plant();
            let sum: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| a + b).collect();
            let zero = vec![0.0; 8];
            let pairs = [
                (plant.a1.eval(&w1), plant.a1.eval(&w2), plant.a1.eval(&zero), plant.a1.eval(&sum)),
                (plant.c.eval(&w1), plant.c.eval(&w2), plant.c.eval(&zero), plant.c.eval(&sum)),
                (plant.e0.eval(&w1), plant.e0.eval(&w2), plant.e0.eval(&zero), plant.e0.eval(&sum)),
                (plant.b.eval(&w1), plant.b.eval(&w2), plant.b.eval(&zero), plant.b.eval(&sum)),
            ];
            for (a, b, z, s) in pairs {
                let lhs = a + b - z;
                prop_assert!((lhs - s).amax() < 1e-14);
            }
        }
    }
}
