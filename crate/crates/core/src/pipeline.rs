//! End-to-end experiment: assumption checks, synthesis, certification,
//! simulation and metrics, with artifacts written to disk.

use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::analysis::{self, AnalysisError, CertificationReport, Sampling};
use crate::linalg::{self, Tolerances};
use crate::models::{self, AssumptionReport};
use crate::regulator::{Controller, RegulatorError};
use crate::scenario::{Scenario, WPolicy};
use crate::sim::{ClosedLoopSystem, Metrics, SimError, Trajectory};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("standing assumptions violated:\n{0}")]
    Assumptions(AssumptionReport),
    #[error("synthesis failed: {0}")]
    Synthesis(#[from] RegulatorError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("certification failed: {}", failure_summary(.0))]
    CertificationFailed(CertificationReport),
    #[error("simulation failed: {0}")]
    Simulation(#[from] SimError),
    #[error("invalid uncertainty value: {0}")]
    InvalidW(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, PipelineError>;

const LISTED_FAILURES: usize = 4;

/// Failed checks, gain precondition first, at most [`LISTED_FAILURES`].
fn failure_summary(report: &CertificationReport) -> String {
    let mut failed: Vec<_> = report.failures().collect();
    failed.sort_by_key(|r| r.matrix != analysis::GAIN_PRECONDITION);
    let mut parts: Vec<String> = failed
        .iter()
        .take(LISTED_FAILURES)
        .map(|r| match &r.note {
            Some(note) => format!("{} at {} ({note})", r.matrix, r.parameter),
            None => format!("{} at {} (abscissa {:.3e})", r.matrix, r.parameter, r.abscissa),
        })
        .collect();
    if failed.len() > LISTED_FAILURES {
        parts.push(format!("{} more", failed.len() - LISTED_FAILURES));
    }
    parts.join("; ")
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Simulate even when certification fails.
    pub force: bool,
    /// Directory for artifacts; nothing is written when `None`.
    pub out: Option<PathBuf>,
    /// Append the full state to the trajectory CSV.
    pub full_state: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    /// Simulation was forced past a failed certification and met the
    /// thresholds.
    CertificationFailed,
    ThresholdFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub name: String,
    pub seed: u64,
    pub dt: f64,
    pub horizon: f64,
    pub w: Vec<f64>,
    pub actuators: usize,
    pub certified: bool,
    pub tail_max_error: f64,
    pub tail_max_sharing: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub settling_time: Option<f64>,
    pub error_energy: f64,
    pub input_energy: f64,
    pub tail_error_threshold: f64,
    pub tail_sharing_threshold: f64,
    pub regulation_pass: bool,
    pub sharing_pass: bool,
    pub status: Status,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub assumptions: AssumptionReport,
    pub report: CertificationReport,
    pub summary: Summary,
    pub trajectory: Trajectory,
    pub artifacts: Vec<PathBuf>,
}

/// Checks the standing assumptions at the vertices and center of the box.
pub fn check_assumptions(scenario: &Scenario) -> Result<AssumptionReport> {
    let report = models::validate_assumptions(
        &scenario.plant,
        &scenario.exosystem,
        &scenario.graph,
        &scenario.plant.w_box.vertices_and_center(),
    );
    if report.passed() {
        Ok(report)
    } else {
        Err(PipelineError::Assumptions(report))
    }
}

/// Synthesizes the controller and certifies it over the scenario sampling.
pub fn certify_scenario(scenario: &Scenario, tol: &Tolerances) -> Result<(Controller, CertificationReport)> {
    let controller = scenario.controller(tol)?;
    let sampling = Sampling::for_plant(&scenario.plant, scenario.grid, scenario.margin);
    let report = analysis::certify(
        &scenario.plant,
        &scenario.actuators,
        &scenario.graph,
        &controller.im,
        &controller.observer,
        &controller.gains,
        &sampling,
    );
    Ok((controller, report))
}

/// Uncertainty value used for simulation. `Vertex` picks the vertex whose
/// output-feedback matrix has the largest spectral abscissa.
pub fn select_w(scenario: &Scenario, controller: &Controller) -> Result<Vec<f64>> {
    let plant = &scenario.plant;
    match &scenario.sim.w {
        WPolicy::Center => Ok(plant.w_box.center()),
        WPolicy::Values(v) => {
            if v.len() != plant.n_w() {
                return Err(PipelineError::InvalidW(format!("expected {} values, got {}", plant.n_w(), v.len())));
            }
            Ok(v.clone())
        }
        WPolicy::Vertex => {
            let single = controller.gains.equivalent_single(scenario.actuators.count);
            let mut best: Option<(f64, Vec<f64>)> = None;
            for w in plant.w_box.vertices() {
                let realized = plant.realize(&w).map_err(AnalysisError::from)?;
                let m = analysis::assemble_output_feedback(
                    &realized,
                    &scenario.actuators,
                    &controller.im,
                    &controller.observer,
                    &single,
                )?;
                let abscissa = linalg::spectral_abscissa(&m).map_err(AnalysisError::from)?;
                if best.as_ref().is_none_or(|(a, _)| abscissa > *a) {
                    best = Some((abscissa, w));
                }
            }
            Ok(best.map(|(_, w)| w).unwrap_or_else(|| plant.w_box.center()))
        }
    }
}

/// Closed loop at `w` with the scenario's seeded random initial state.
pub fn simulate_at(scenario: &Scenario, controller: &Controller, w: &[f64]) -> Result<(ClosedLoopSystem, Trajectory)> {
    let realized = scenario.plant.realize(w).map_err(AnalysisError::from)?;
    let system = ClosedLoopSystem::new(realized, &scenario.exosystem, scenario.actuators, controller.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.sim.seed);
    let x0 = system.random_initial_state(&scenario.v0, scenario.sim.ic_range, &mut rng)?;
    let s = &scenario.sim;
    let traj = system.simulate(&x0, s.dt, s.horizon, s.decimate)?;
    Ok((system, traj))
}

/// Runs the full pipeline. Simulation is skipped with
/// [`PipelineError::CertificationFailed`] unless `options.force` is set.
pub fn run(scenario: &Scenario, options: &RunOptions) -> Result<Outcome> {
    let tol = Tolerances::default();
    let assumptions = check_assumptions(scenario)?;
    let (controller, report) = certify_scenario(scenario, &tol)?;
    let mut artifacts = Vec::new();
    if let Some(dir) = &options.out {
        artifacts.push(write_report(dir, &scenario.name, &report)?);
    }
    if !report.passed() {
        if !options.force {
            return Err(PipelineError::CertificationFailed(report));
        }
        warn!("certification failed, simulating anyway: {}", failure_summary(&report));
    }

    let w = select_w(scenario, &controller)?;
    info!("simulating {} at w = {:?}", scenario.name, w);
    let (_, trajectory) = simulate_at(scenario, &controller, &w)?;
    let metrics = Metrics::compute(&trajectory, scenario.criteria.tail_error);
    let regulation_pass = metrics.tail_max_error < scenario.criteria.tail_error;
    let sharing_pass = metrics.tail_max_sharing < scenario.criteria.tail_sharing;
    let status = if !(regulation_pass && sharing_pass) {
        Status::ThresholdFailed
    } else if !report.passed() {
        Status::CertificationFailed
    } else {
        Status::Pass
    };
    let summary = Summary {
        name: scenario.name.clone(),
        seed: scenario.sim.seed,
        dt: scenario.sim.dt,
        horizon: scenario.sim.horizon,
        w,
        actuators: scenario.actuators.count,
        certified: report.passed(),
        tail_max_error: metrics.tail_max_error,
        tail_max_sharing: metrics.tail_max_sharing,
        settling_time: metrics.settling_time,
        error_energy: metrics.error_energy,
        input_energy: metrics.input_energy,
        tail_error_threshold: scenario.criteria.tail_error,
        tail_sharing_threshold: scenario.criteria.tail_sharing,
        regulation_pass,
        sharing_pass,
        status,
    };
    if let Some(dir) = &options.out {
        artifacts.push(write_trajectory(dir, &scenario.name, &trajectory, options.full_state)?);
        artifacts.push(write_summary(dir, &summary)?);
    }
    Ok(Outcome {
        assumptions,
        report,
        summary,
        trajectory,
        artifacts,
    })
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn prepare(dir: &Path, file: String) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    Ok(dir.join(file))
}

pub fn write_report(dir: &Path, name: &str, report: &CertificationReport) -> Result<PathBuf> {
    let path = prepare(dir, format!("{name}_certification.tsv"))?;
    fs::write(&path, report.to_string()).map_err(io_error(&path))?;
    Ok(path)
}

fn write_trajectory(dir: &Path, name: &str, traj: &Trajectory, full_state: bool) -> Result<PathBuf> {
    let path = prepare(dir, format!("{name}_trajectory.csv"))?;
    let file = fs::File::create(&path).map_err(io_error(&path))?;
    let mut writer = std::io::BufWriter::new(file);
    traj.write_csv(&mut writer, full_state).map_err(io_error(&path))?;
    std::io::Write::flush(&mut writer).map_err(io_error(&path))?;
    Ok(path)
}

fn write_summary(dir: &Path, summary: &Summary) -> Result<PathBuf> {
    let path = prepare(dir, format!("{}_metrics.toml", summary.name))?;
    let text = toml::to_string(summary).expect("summary serializes");
    fs::write(&path, text).map_err(io_error(&path))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples;
    use crate::models::Graph;

    fn short(name: &str) -> Scenario {
        let mut s = examples::scenario(name).unwrap();
        s.sim.horizon = 2.0;
        s
    }

    #[test]
    fn disconnected_graph_stops_early() {
        let mut s = short("exp1-multi");
        s.graph = Graph::empty(5);
        match run(&s, &RunOptions::default()) {
            Err(PipelineError::Assumptions(report)) => {
                let failed: Vec<_> = report.failures().map(|c| c.name.as_str()).collect();
                assert_eq!(failed, ["graph connected"]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn low_k2_names_the_precondition() {
        let mut s = short("exp2-multi");
        s.gains.k2 = 0.05;
        let err = run(&s, &RunOptions::default()).unwrap_err();
        assert!(err.to_string().contains(analysis::GAIN_PRECONDITION), "{err}");
    }

    #[test]
    fn forced_run_reports_certification_status() {
        let mut s = short("exp2-multi");
        s.gains.sigma1 = 0.0;
        s.gains.sigma2 = 0.0;
        assert!(matches!(run(&s, &RunOptions::default()), Err(PipelineError::CertificationFailed(_))));
        let forced = run(
            &s,
            &RunOptions {
                force: true,
                ..RunOptions::default()
            },
        )
        .unwrap();
        assert!(!forced.summary.certified);
        assert_ne!(forced.summary.status, Status::Pass);
    }

    #[test]
    fn vertex_policy_picks_worst_vertex() {
        let s = examples::scenario("exp1-single").unwrap();
        let c = s.controller(&Tolerances::default()).unwrap();
        let w = select_w(&s, &c).unwrap();
        assert!(w.iter().all(|x| x.abs() == 0.3));
        let report = certify_scenario(&s, &Tolerances::default()).unwrap().1;
        let worst = report.worst(analysis::OUTPUT_FEEDBACK).unwrap();
        let single = c.gains.equivalent_single(1);
        let m = analysis::assemble_output_feedback(&s.plant.realize(&w).unwrap(), &s.actuators, &c.im, &c.observer, &single)
            .unwrap();
        let abscissa = linalg::spectral_abscissa(&m).unwrap();
        assert!((abscissa - worst.abscissa).abs() < 1e-12);
    }

    #[test]
    fn artifacts_are_written() {
        let s = short("exp1-single");
        let dir = std::env::temp_dir().join(format!("coopreg-pipeline-{}", std::process::id()));
        let outcome = run(
            &s,
            &RunOptions {
                out: Some(dir.clone()),
                ..RunOptions::default()
            },
        )
        .unwrap();
        assert_eq!(outcome.artifacts.len(), 3);
        assert!(outcome.artifacts.iter().all(|p| p.exists()));
        fs::remove_dir_all(dir).ok();
    }
}
