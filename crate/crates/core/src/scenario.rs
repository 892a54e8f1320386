//! A fully resolved experiment: models, controller design choices and
//! simulation settings.

use crate::linalg::{Matrix, Tolerances};
use crate::models::{ActuatorBank, Exosystem, Graph, UncertainPlant};
use crate::regulator::{self, Controller, GainSet, InternalModel, ObserverSpec, RegulatorError};

/// Which uncertainty value a simulation uses.
#[derive(Debug, Clone, PartialEq)]
pub enum WPolicy {
    /// The vertex of the box with the largest closed-loop spectral abscissa.
    Vertex,
    Center,
    Values(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSettings {
    pub seed: u64,
    pub dt: f64,
    pub horizon: f64,
    pub w: WPolicy,
    /// Record every `decimate`-th step.
    pub decimate: usize,
    /// Initial conditions are drawn uniformly from `[−ic_range, ic_range]`.
    pub ic_range: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            seed: 1,
            dt: 1e-3,
            horizon: 30.0,
            w: WPolicy::Vertex,
            decimate: 10,
            ic_range: 3.0,
        }
    }
}

/// Pass thresholds on the tail metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Criteria {
    pub tail_error: f64,
    pub tail_sharing: f64,
}

impl Default for Criteria {
    fn default() -> Self {
        Self {
            tail_error: 0.02,
            tail_sharing: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub plant: UncertainPlant,
    pub exosystem: Exosystem,
    pub actuators: ActuatorBank,
    pub graph: Graph,
    pub m1: Matrix,
    pub n1: Matrix,
    pub m2: Matrix,
    pub n2: Matrix,
    /// Observer polynomial coefficients `δ0 … δ(r−1)`.
    pub deltas: Vec<f64>,
    pub gains: GainSet,
    pub v0: Vec<f64>,
    pub sim: SimSettings,
    pub criteria: Criteria,
    /// Optional dense grid resolution for certification.
    pub grid: Option<usize>,
    /// Hurwitz margin used by certification.
    pub margin: f64,
}

impl Scenario {
    pub fn internal_model(&self, tol: &Tolerances) -> regulator::Result<InternalModel> {
        InternalModel::build(
            &self.exosystem,
            self.m1.clone(),
            self.n1.clone(),
            self.m2.clone(),
            self.n2.clone(),
            tol,
        )
    }

    pub fn observer(&self) -> regulator::Result<ObserverSpec> {
        ObserverSpec::build(self.deltas.clone(), self.gains.h)
    }

    pub fn controller(&self, tol: &Tolerances) -> regulator::Result<Controller> {
        if self.graph.node_count() != self.actuators.count {
            return Err(RegulatorError::DimensionMismatch(format!(
                "graph has {} nodes for {} actuators",
                self.graph.node_count(),
                self.actuators.count
            )));
        }
        Controller::new(self.internal_model(tol)?, &self.observer()?, self.gains.clone(), &self.graph)
    }

    /// Single-actuator scenario whose loop matches the sum dynamics of this
    /// one.
    pub fn equivalent_single(&self) -> Self {
        let n = self.actuators.count;
        let mut out = self.clone();
        out.name = format!("{}-equivalent-single", self.name);
        out.actuators.count = 1;
        out.graph = Graph::ring(1);
        out.gains = self.gains.equivalent_single(n);
        out
    }
}
