//! Built-in benchmark setups.
//!
//! * `exp1-*`: a shaft with uncertain inertia and damping, driven by one or
//!   five DC motors (stable first-order actuators), tracking a unit
//!   sinusoid under a constant load torque.
//! * `exp2-*`: a third-order minimum-phase plant with eight uncertain
//!   parameters, driven by one or five unstable actuators.

use thiserror::Error;

use crate::linalg::{from_rows, Matrix, Tolerances};
use crate::models::{ActuatorBank, AffineMatrix, Exosystem, Graph, UncertainPlant, UncertaintyBox};
use crate::regulator::GainSet;
use crate::scenario::{Criteria, Scenario, SimSettings};

pub const NAMES: [&str; 4] = ["exp1-single", "exp1-multi", "exp2-single", "exp2-multi"];

#[derive(Debug, Error, Clone, PartialEq)]
#[error("unknown example '{0}' (expected one of exp1-single, exp1-multi, exp2-single, exp2-multi)")]
pub struct UnknownExample(pub String);

const J_P: f64 = 0.5;
const B_P: f64 = 1.0;
const R_A: f64 = 0.1;
const L_A: f64 = 0.01;
const K_A: f64 = 0.5;

fn scalar(v: f64) -> Matrix {
    Matrix::from_element(1, 1, v)
}

/// Shaft angle plant, `w ∈ [−0.3, 0.3]³`.
///
/// `ξ̇2 = (−Bp/Jp + w1) ξ2 + (1/Jp + w2) up + (−1/Jp + w3) TL`.
pub fn motor_plant() -> UncertainPlant {
    let nw = 3;
    UncertainPlant {
        n: 2,
        r: 2,
        a1: AffineMatrix::constant(Matrix::zeros(0, 0), nw),
        a2: AffineMatrix::constant(Matrix::zeros(0, 1), nw),
        a3: AffineMatrix::constant(Matrix::zeros(1, 0), nw),
        e0: AffineMatrix::constant(Matrix::zeros(0, 3), nw),
        er: AffineMatrix::constant(from_rows(&[&[0.0, 0.0, -1.0 / J_P]]), nw).with_term(2, 0, 2, 1.0),
        f: AffineMatrix::constant(from_rows(&[&[1.0, 0.0, 0.0]]), nw),
        c: AffineMatrix::constant(from_rows(&[&[0.0, -B_P / J_P]]), nw).with_term(0, 0, 1, 1.0),
        b: AffineMatrix::constant(scalar(1.0 / J_P), nw).with_term(1, 0, 0, 1.0),
        w_box: UncertaintyBox::symmetric(nw, 0.3),
    }
}

/// Unit-frequency sinusoid plus a constant, `v = (θr, θ̇r, TL)`.
pub fn motor_exosystem() -> Exosystem {
    let s = from_rows(&[&[0.0, 1.0, 0.0], &[-1.0, 0.0, 0.0], &[0.0, 0.0, 0.0]]);
    Exosystem::new(s, &Tolerances::default()).expect("fixed exosystem")
}

/// Armature dynamics `ẋ = −(Ra/La) x + (ka/La) u`.
pub fn motor_actuators(count: usize) -> ActuatorBank {
    ActuatorBank::new(-R_A / L_A, K_A / L_A, count).expect("fixed actuator")
}

/// `M` with characteristic polynomial `(λ + 2)³` in companion form, `N = e3`.
pub fn motor_internal_model_pair() -> (Matrix, Matrix) {
    (
        from_rows(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[-8.0, -12.0, -6.0]]),
        from_rows(&[&[0.0], &[0.0], &[1.0]]),
    )
}

/// Third-order plant, `w ∈ [−0.5, 0.5]⁸`.
pub fn suspension_plant() -> UncertainPlant {
    let nw = 8;
    UncertainPlant {
        n: 3,
        r: 2,
        a1: AffineMatrix::constant(scalar(-6.0), nw).with_term(0, 0, 0, 1.0),
        a2: AffineMatrix::constant(scalar(3.0), nw).with_term(1, 0, 0, 1.0),
        a3: AffineMatrix::constant(scalar(4.0), nw).with_term(2, 0, 0, 1.0),
        e0: AffineMatrix::constant(from_rows(&[&[1.0, 0.0]]), nw).with_term(6, 0, 0, 1.0),
        er: AffineMatrix::constant(from_rows(&[&[0.0, 1.0]]), nw).with_term(7, 0, 1, 1.0),
        f: AffineMatrix::constant(from_rows(&[&[1.0, 0.0]]), nw),
        c: AffineMatrix::constant(from_rows(&[&[-20.0, -9.0]]), nw)
            .with_term(3, 0, 0, 1.0)
            .with_term(4, 0, 1, 1.0),
        b: AffineMatrix::constant(scalar(2.0), nw).with_term(5, 0, 0, 1.0),
        w_box: UncertaintyBox::symmetric(nw, 0.5),
    }
}

/// Harmonic oscillator, reference `y0 = v1`.
pub fn suspension_exosystem() -> Exosystem {
    Exosystem::new(from_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]), &Tolerances::default()).expect("fixed exosystem")
}

/// Unstable actuators `ẋ = x + 10 u`.
pub fn suspension_actuators(count: usize) -> ActuatorBank {
    ActuatorBank::new(1.0, 10.0, count).expect("fixed actuator")
}

pub fn suspension_internal_model_pair() -> (Matrix, Matrix) {
    (
        from_rows(&[&[0.0, 1.0], &[-1.0, -2.0]]),
        from_rows(&[&[0.0], &[1.0]]),
    )
}

const AGENTS: usize = 5;

pub fn scenario(name: &str) -> Result<Scenario, UnknownExample> {
    let motor = |count: usize, gains: GainSet| {
        let (m, n) = motor_internal_model_pair();
        Scenario {
            name: name.to_string(),
            plant: motor_plant(),
            exosystem: motor_exosystem(),
            actuators: motor_actuators(count),
            graph: Graph::ring(count),
            m1: m.clone(),
            n1: n.clone(),
            m2: m,
            n2: n,
            deltas: vec![4.0, 4.0],
            gains,
            v0: vec![1.0, 0.0, 2.0],
            sim: SimSettings::default(),
            criteria: Criteria::default(),
            grid: None,
            margin: crate::analysis::DEFAULT_MARGIN,
        }
    };
    let suspension = |count: usize, gains: GainSet| {
        let (m, n) = suspension_internal_model_pair();
        Scenario {
            name: name.to_string(),
            plant: suspension_plant(),
            exosystem: suspension_exosystem(),
            actuators: suspension_actuators(count),
            graph: Graph::ring(count),
            m1: m.clone(),
            n1: n.clone(),
            m2: m,
            n2: n,
            deltas: vec![4.0, 4.0],
            gains,
            v0: vec![1.0, 0.0],
            sim: SimSettings::default(),
            criteria: Criteria::default(),
            grid: None,
            margin: crate::analysis::DEFAULT_MARGIN,
        }
    };
    let gammas = vec![1.0];
    Ok(match name {
        "exp1-single" => motor(1, GainSet::single(gammas, 2.0, 6.0, 14.0)),
        "exp1-multi" => motor(
            AGENTS,
            GainSet::from_single(gammas, 2.0, 6.0, 14.0, AGENTS, 1.0, 1.0),
        ),
        "exp2-single" => suspension(1, GainSet::single(gammas, 2.0, 3.0, 5.0)),
        "exp2-multi" => {
            let mut gains = GainSet::from_single(gammas, 2.0, 3.0, 5.0, AGENTS, 2.0, 3.0);
            gains.k2 = 3.5;
            gains.h = 5.5;
            suspension(AGENTS, gains)
        }
        other => return Err(UnknownExample(other.to_string())),
    })
}
