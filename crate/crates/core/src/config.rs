//! TOML experiment descriptions.
//!
//! Matrices are written row by row as nested arrays. Each uncertain matrix
//! has a `base` value and a list of affine `terms`; a term
//! `{ w = k, row = i, col = j, scale = s }` adds `s · wk` at entry `(i, j)`
//! (`k` counts from 1, rows and columns from 0). Matrix shapes follow from
//! `plant.n`, `plant.r` and the exosystem dimension, so empty blocks may be
//! omitted.
//!
//! ```toml
//! name = "demo"
//!
//! [plant]
//! n = 2
//! r = 2
//! w_lower = [-0.3]
//! w_upper = [0.3]
//! c = { base = [[0.0, -2.0]], terms = [{ w = 1, row = 0, col = 1, scale = 1.0 }] }
//! b = { base = [[2.0]] }
//! er = { base = [[0.0, 0.0]] }
//! f = { base = [[1.0, 0.0]] }
//!
//! [exosystem]
//! s = [[0.0, 1.0], [-1.0, 0.0]]
//! v0 = [1.0, 0.0]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::DEFAULT_MARGIN;
use crate::linalg::{Matrix, Tolerances};
use crate::models::{ActuatorBank, AffineMatrix, Exosystem, Graph, ModelError, UncertainPlant, UncertaintyBox};
use crate::regulator::GainSet;
use crate::scenario::{Criteria, Scenario, SimSettings, WPolicy};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{}{key}: {message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Invalid {
        key: String,
        line: Option<usize>,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub plant: PlantConfig,
    pub exosystem: ExosystemConfig,
    pub actuator: ActuatorConfig,
    #[serde(default)]
    pub graph: GraphConfig,
    pub internal_model: InternalModelConfig,
    pub controller: ControllerConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub criteria: CriteriaConfig,
    #[serde(default)]
    pub certification: CertificationConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    pub n: usize,
    pub r: usize,
    pub w_lower: Vec<f64>,
    pub w_upper: Vec<f64>,
    #[serde(default)]
    pub a1: AffineConfig,
    #[serde(default)]
    pub a2: AffineConfig,
    #[serde(default)]
    pub a3: AffineConfig,
    #[serde(default)]
    pub e0: AffineConfig,
    pub er: AffineConfig,
    pub f: AffineConfig,
    pub c: AffineConfig,
    pub b: AffineConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineConfig {
    #[serde(default)]
    pub base: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<TermConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    /// 1-based uncertainty coordinate.
    pub w: usize,
    pub row: usize,
    pub col: usize,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExosystemConfig {
    pub s: Vec<Vec<f64>>,
    pub v0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActuatorConfig {
    pub a: f64,
    pub b_a: f64,
    #[serde(default = "one")]
    pub count: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    #[default]
    Ring,
    Complete,
    Empty,
    Explicit,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    #[serde(default)]
    pub kind: GraphKind,
    /// Symmetric weights, required for `kind = "explicit"`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub adjacency: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InternalModelConfig {
    pub m1: Vec<Vec<f64>>,
    pub n1: Vec<Vec<f64>>,
    pub m2: Vec<Vec<f64>>,
    pub n2: Vec<Vec<f64>>,
}

/// Per-actuator gains. For a single actuator `sigma1` and `sigma2` are
/// unused.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub gammas: Vec<f64>,
    pub deltas: Vec<f64>,
    pub k1: f64,
    pub k2: f64,
    pub h: f64,
    #[serde(default)]
    pub sigma1: f64,
    #[serde(default)]
    pub sigma2: f64,
}

/// `"vertex"`, `"center"` or an explicit array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WConfig {
    Named(String),
    Values(Vec<f64>),
}

impl Default for WConfig {
    fn default() -> Self {
        WConfig::Named("vertex".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub seed: u64,
    pub dt: f64,
    pub horizon: f64,
    pub w: WConfig,
    pub decimate: usize,
    pub ic_range: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        let s = SimSettings::default();
        Self {
            seed: s.seed,
            dt: s.dt,
            horizon: s.horizon,
            w: WConfig::default(),
            decimate: s.decimate,
            ic_range: s.ic_range,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CriteriaConfig {
    pub tail_error: f64,
    pub tail_sharing: f64,
}

impl Default for CriteriaConfig {
    fn default() -> Self {
        let c = Criteria::default();
        Self {
            tail_error: c.tail_error,
            tail_sharing: c.tail_sharing,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertificationConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    pub margin: f64,
}

impl Default for CertificationConfig {
    fn default() -> Self {
        Self {
            grid: None,
            margin: DEFAULT_MARGIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
    /// Append every state coordinate to the trajectory CSV.
    pub full_state: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            full_state: false,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(source: &str) -> Result<Self> {
        toml::from_str(source).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let source = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let config = Self::parse(&source)?;
        config.to_scenario().map_err(|e| anchor(e, &source))?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Builds and validates the scenario described by this configuration.
    pub fn to_scenario(&self) -> Result<Scenario> {
        let p = &self.plant;
        let s = matrix("exosystem.s", &self.exosystem.s, None)?;
        let q = s.nrows();
        if s.ncols() != q || q == 0 {
            return invalid("exosystem.s", "must be square and nonempty");
        }
        if p.r == 0 || p.n < p.r {
            return invalid("plant.r", format!("need 1 <= r <= n, got n = {}, r = {}", p.n, p.r));
        }
        let nz = p.n - p.r;
        let w_box = UncertaintyBox::new(p.w_lower.clone(), p.w_upper.clone())
            .map_err(|e| ConfigError::Invalid {
                key: "plant.w_lower".into(),
                line: None,
                message: e.to_string(),
            })?;
        let nw = w_box.dim();
        let aff = |key: &str, cfg: &AffineConfig, shape: (usize, usize)| affine(key, cfg, shape, nw);
        let plant = UncertainPlant {
            n: p.n,
            r: p.r,
            a1: aff("plant.a1", &p.a1, (nz, nz))?,
            a2: aff("plant.a2", &p.a2, (nz, 1))?,
            a3: aff("plant.a3", &p.a3, (1, nz))?,
            e0: aff("plant.e0", &p.e0, (nz, q))?,
            er: aff("plant.er", &p.er, (1, q))?,
            f: aff("plant.f", &p.f, (1, q))?,
            c: aff("plant.c", &p.c, (1, p.r))?,
            b: aff("plant.b", &p.b, (1, 1))?,
            w_box,
        };
        plant.validate().map_err(|e| model_error("plant", e))?;
        let exosystem = Exosystem::new(s, &Tolerances::default()).map_err(|e| model_error("exosystem.s", e))?;
        if self.exosystem.v0.len() != q {
            return invalid("exosystem.v0", format!("expected {q} entries, got {}", self.exosystem.v0.len()));
        }

        let a = &self.actuator;
        let actuators = ActuatorBank::new(a.a, a.b_a, a.count).map_err(|e| model_error("actuator", e))?;
        let graph = match self.graph.kind {
            GraphKind::Ring => Graph::ring(a.count),
            GraphKind::Complete => Graph::complete(a.count),
            GraphKind::Empty => Graph::empty(a.count),
            GraphKind::Explicit => {
                let w = matrix("graph.adjacency", &self.graph.adjacency, Some((a.count, a.count)))?;
                Graph::new(w).map_err(|e| model_error("graph.adjacency", e))?
            }
        };

        let l = exosystem.l();
        let im = &self.internal_model;
        let m1 = matrix("internal_model.m1", &im.m1, Some((l, l)))?;
        let n1 = matrix("internal_model.n1", &im.n1, Some((l, 1)))?;
        let m2 = matrix("internal_model.m2", &im.m2, Some((l, l)))?;
        let n2 = matrix("internal_model.n2", &im.n2, Some((l, 1)))?;

        let c = &self.controller;
        if c.deltas.len() != p.r {
            return invalid("controller.deltas", format!("expected r = {} entries, got {}", p.r, c.deltas.len()));
        }
        let gains = GainSet {
            gammas: c.gammas.clone(),
            k1: c.k1,
            k2: c.k2,
            h: c.h,
            sigma1: c.sigma1,
            sigma2: c.sigma2,
        };
        gains.validate().map_err(|e| ConfigError::Invalid {
            key: "controller".into(),
            line: None,
            message: e.to_string(),
        })?;
        if gains.gammas.len() + 1 != p.r {
            return invalid(
                "controller.gammas",
                format!("expected r - 1 = {} entries, got {}", p.r - 1, gains.gammas.len()),
            );
        }

        let sm = &self.simulation;
        let w = match &sm.w {
            WConfig::Named(s) => parse_w(s).map_err(|m| ConfigError::Invalid {
                key: "simulation.w".into(),
                line: None,
                message: m,
            })?,
            WConfig::Values(v) => WPolicy::Values(v.clone()),
        };
        if let WPolicy::Values(v) = &w {
            if v.len() != nw {
                return invalid("simulation.w", format!("expected {nw} values, got {}", v.len()));
            }
        }
        if !(sm.dt > 0.0) || !(sm.horizon >= 0.0) || sm.decimate == 0 || !(sm.ic_range >= 0.0) {
            return invalid("simulation", "dt must be positive, horizon and ic_range nonnegative, decimate >= 1");
        }
        let cert = &self.certification;
        if !(cert.margin >= 0.0) {
            return invalid("certification.margin", "must be nonnegative");
        }
        if cert.grid == Some(0) || cert.grid == Some(1) {
            return invalid("certification.grid", "needs at least 2 points per axis");
        }

        Ok(Scenario {
            name: self.name.clone(),
            plant,
            exosystem,
            actuators,
            graph,
            m1,
            n1,
            m2,
            n2,
            deltas: c.deltas.clone(),
            gains,
            v0: self.exosystem.v0.clone(),
            sim: SimSettings {
                seed: sm.seed,
                dt: sm.dt,
                horizon: sm.horizon,
                w,
                decimate: sm.decimate,
                ic_range: sm.ic_range,
            },
            criteria: Criteria {
                tail_error: self.criteria.tail_error,
                tail_sharing: self.criteria.tail_sharing,
            },
            grid: cert.grid,
            margin: cert.margin,
        })
    }

    /// Configuration describing `scenario`, writing outputs to `dir`.
    pub fn from_scenario(scenario: &Scenario, output: OutputConfig) -> Self {
        let p = &scenario.plant;
        let n = scenario.actuators.count;
        let graph = if *scenario.graph.weights() == *Graph::ring(n).weights() {
            GraphConfig::default()
        } else if *scenario.graph.weights() == *Graph::complete(n).weights() {
            GraphConfig {
                kind: GraphKind::Complete,
                adjacency: Vec::new(),
            }
        } else if *scenario.graph.weights() == *Graph::empty(n).weights() {
            GraphConfig {
                kind: GraphKind::Empty,
                adjacency: Vec::new(),
            }
        } else {
            GraphConfig {
                kind: GraphKind::Explicit,
                adjacency: rows(scenario.graph.weights()),
            }
        };
        let s = &scenario.sim;
        Self {
            name: scenario.name.clone(),
            plant: PlantConfig {
                n: p.n,
                r: p.r,
                w_lower: p.w_box.lower().to_vec(),
                w_upper: p.w_box.upper().to_vec(),
                a1: affine_config(&p.a1),
                a2: affine_config(&p.a2),
                a3: affine_config(&p.a3),
                e0: affine_config(&p.e0),
                er: affine_config(&p.er),
                f: affine_config(&p.f),
                c: affine_config(&p.c),
                b: affine_config(&p.b),
            },
            exosystem: ExosystemConfig {
                s: rows(&scenario.exosystem.s),
                v0: scenario.v0.clone(),
            },
            actuator: ActuatorConfig {
                a: scenario.actuators.a,
                b_a: scenario.actuators.b_a,
                count: n,
            },
            graph,
            internal_model: InternalModelConfig {
                m1: rows(&scenario.m1),
                n1: rows(&scenario.n1),
                m2: rows(&scenario.m2),
                n2: rows(&scenario.n2),
            },
            controller: ControllerConfig {
                gammas: scenario.gains.gammas.clone(),
                deltas: scenario.deltas.clone(),
                k1: scenario.gains.k1,
                k2: scenario.gains.k2,
                h: scenario.gains.h,
                sigma1: scenario.gains.sigma1,
                sigma2: scenario.gains.sigma2,
            },
            simulation: SimulationConfig {
                seed: s.seed,
                dt: s.dt,
                horizon: s.horizon,
                w: match &s.w {
                    WPolicy::Vertex => WConfig::Named("vertex".into()),
                    WPolicy::Center => WConfig::Named("center".into()),
                    WPolicy::Values(v) => WConfig::Values(v.clone()),
                },
                decimate: s.decimate,
                ic_range: s.ic_range,
            },
            criteria: CriteriaConfig {
                tail_error: scenario.criteria.tail_error,
                tail_sharing: scenario.criteria.tail_sharing,
            },
            certification: CertificationConfig {
                grid: scenario.grid,
                margin: scenario.margin,
            },
            output,
        }
    }
}

/// Parses `vertex`, `center` or a comma-separated list of numbers.
pub fn parse_w(text: &str) -> std::result::Result<WPolicy, String> {
    match text.trim() {
        "vertex" => Ok(WPolicy::Vertex),
        "center" => Ok(WPolicy::Center),
        other => other
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| format!("'{s}': {e}")))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(WPolicy::Values)
            .map_err(|e| format!("expected vertex, center or comma-separated numbers ({e})")),
    }
}

fn invalid<T>(key: &str, message: impl Into<String>) -> Result<T> {
    Err(ConfigError::Invalid {
        key: key.into(),
        line: None,
        message: message.into(),
    })
}

fn model_error(key: &str, e: ModelError) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        line: None,
        message: e.to_string(),
    }
}

fn matrix(key: &str, data: &[Vec<f64>], shape: Option<(usize, usize)>) -> Result<Matrix> {
    let nrows = data.len();
    let ncols = data.first().map_or(0, Vec::len);
    if let Some(bad) = data.iter().position(|row| row.len() != ncols) {
        return invalid(key, format!("row {bad} has {} entries, expected {ncols}", data[bad].len()));
    }
    let m = match shape {
        Some((r, c)) if nrows == 0 && (r == 0 || c == 0) => Matrix::zeros(r, c),
        Some((r, c)) if (nrows, ncols) != (r, c) => {
            return invalid(key, format!("expected a {r}x{c} matrix, got {nrows}x{ncols}"));
        }
        _ => Matrix::from_fn(nrows, ncols, |i, j| data[i][j]),
    };
    Ok(m)
}

fn affine(key: &str, cfg: &AffineConfig, shape: (usize, usize), nw: usize) -> Result<AffineMatrix> {
    let mut out = AffineMatrix::constant(matrix(key, &cfg.base, Some(shape))?, nw);
    for t in &cfg.terms {
        if t.w == 0 || t.w > nw || t.row >= shape.0 || t.col >= shape.1 {
            return invalid(
                key,
                format!(
                    "term (w = {}, row = {}, col = {}) outside w1..w{nw} or the {}x{} shape",
                    t.w, t.row, t.col, shape.0, shape.1
                ),
            );
        }
        out = out.with_term(t.w - 1, t.row, t.col, t.scale);
    }
    Ok(out)
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn affine_config(a: &AffineMatrix) -> AffineConfig {
    let mut terms = Vec::new();
    for (k, d) in a.deltas().iter().enumerate() {
        for i in 0..d.nrows() {
            for j in 0..d.ncols() {
                if d[(i, j)] != 0.0 {
                    terms.push(TermConfig {
                        w: k + 1,
                        row: i,
                        col: j,
                        scale: d[(i, j)],
                    });
                }
            }
        }
    }
    AffineConfig {
        base: rows(a.base()),
        terms,
    }
}

/// Attaches the source line of the offending key, if it can be found.
fn anchor(err: ConfigError, source: &str) -> ConfigError {
    match err {
        ConfigError::Invalid {
            key,
            line: None,
            message,
        } => {
            let line = locate(source, &key);
            ConfigError::Invalid { key, line, message }
        }
        other => other,
    }
}

/// 1-based line of `section.key` (or of `[section]` when the key is a
/// whole section) in a TOML source.
fn locate(source: &str, dotted: &str) -> Option<usize> {
    let (section, key) = match dotted.rsplit_once('.') {
        Some((s, k)) => (s, Some(k)),
        None => (dotted, None),
    };
    let mut current = String::new();
    let mut header_line = None;
    for (i, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if let Some(h) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = h.trim_matches(['[', ']']).trim().to_string();
            if current == dotted || (current == section && header_line.is_none()) {
                header_line = Some(i + 1);
                if current == dotted {
                    return header_line;
                }
            }
            continue;
        }
        if let (Some(k), true) = (key, current == section) {
            let name = line.split('=').next().unwrap_or("").trim();
            if name == k {
                return Some(i + 1);
            }
        }
    }
    header_line
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples;

    #[test]
    fn examples_round_trip() {
        for name in examples::NAMES {
            let scenario = examples::scenario(name).unwrap();
            let cfg = ExperimentConfig::from_scenario(&scenario, OutputConfig::default());
            let text = cfg.to_toml();
            let back = ExperimentConfig::parse(&text).unwrap();
            assert_eq!(back, cfg, "{name}");
            assert_eq!(back.to_scenario().unwrap(), scenario, "{name}");
        }
    }

    #[test]
    fn minimal_document_uses_defaults() {
        let text = r#"
            name = "tiny"
            [plant]
            n = 1
            r = 1
            w_lower = [-0.1]
            w_upper = [0.1]
            c = { base = [[-1.0]], terms = [{ w = 1, row = 0, col = 0, scale = 1.0 }] }
            b = { base = [[1.0]] }
            er = { base = [[0.0, 0.0]] }
            f = { base = [[1.0, 0.0]] }
            [exosystem]
            s = [[0.0, 1.0], [-1.0, 0.0]]
            v0 = [1.0, 0.0]
            [actuator]
            a = -1.0
            b_a = 1.0
            [internal_model]
            m1 = [[0.0, 1.0], [-1.0, -2.0]]
            n1 = [[0.0], [1.0]]
            m2 = [[0.0, 1.0], [-1.0, -2.0]]
            n2 = [[0.0], [1.0]]
            [controller]
            gammas = []
            deltas = [1.0]
            k1 = 1.0
            k2 = 1.0
            h = 2.0
        "#;
        let s = ExperimentConfig::parse(text).unwrap().to_scenario().unwrap();
        assert_eq!(s.actuators.count, 1);
        assert_eq!(s.plant.nz(), 0);
        assert_eq!(s.sim, SimSettings::default());
        assert_eq!(s.plant.c.deltas()[0][(0, 0)], 1.0);
    }

    #[test]
    fn syntax_errors_carry_a_line() {
        let err = ExperimentConfig::parse("name = \"x\"\n[plant\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn shape_errors_name_the_key_and_line() {
        let scenario = examples::scenario("exp2-single").unwrap();
        let mut cfg = ExperimentConfig::from_scenario(&scenario, OutputConfig::default());
        cfg.plant.c.base = vec![vec![1.0, 2.0, 3.0]];
        let text = cfg.to_toml();
        let dir = std::env::temp_dir().join(format!("coopreg-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.toml");
        std::fs::write(&path, &text).unwrap();
        let err = ExperimentConfig::load(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("plant.c") && msg.contains("1x2"), "{msg}");
        match err {
            ConfigError::Invalid { line: Some(l), .. } => {
                assert!(text.lines().nth(l - 1).unwrap().contains("c"), "line {l}");
            }
            other => panic!("unexpected {other:?}"),
        }
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn w_policies() {
        assert_eq!(parse_w("vertex").unwrap(), WPolicy::Vertex);
        assert_eq!(parse_w("center").unwrap(), WPolicy::Center);
        assert_eq!(parse_w("0.1, -0.2").unwrap(), WPolicy::Values(vec![0.1, -0.2]));
        assert!(parse_w("corner").is_err());
        let scenario = examples::scenario("exp1-single").unwrap();
        let mut cfg = ExperimentConfig::from_scenario(&scenario, OutputConfig::default());
        cfg.simulation.w = WConfig::Values(vec![0.0; 2]);
        assert!(cfg.to_scenario().is_err());
    }

    #[test]
    fn rejects_bad_terms_and_unknown_keys() {
        let scenario = examples::scenario("exp1-single").unwrap();
        let mut cfg = ExperimentConfig::from_scenario(&scenario, OutputConfig::default());
        cfg.plant.b.terms.push(TermConfig {
            w: 4,
            row: 0,
            col: 0,
            scale: 1.0,
        });
        assert!(cfg.to_scenario().is_err());
        let text = ExperimentConfig::from_scenario(&scenario, OutputConfig::default()).to_toml();
        let extra = text.replacen("[actuator]", "[actuator]\ngain = 3.0", 1);
        assert!(ExperimentConfig::parse(&extra).is_err());
    }

    #[test]
    fn explicit_graph() {
        let scenario = examples::scenario("exp1-multi").unwrap();
        let mut cfg = ExperimentConfig::from_scenario(&scenario, OutputConfig::default());
        cfg.graph.kind = GraphKind::Explicit;
        cfg.graph.adjacency = vec![vec![0.0; 5]; 5];
        let s = cfg.to_scenario().unwrap();
        assert!(!s.graph.is_connected());
        let back = ExperimentConfig::from_scenario(&s, OutputConfig::default());
        assert_eq!(back.graph.kind, GraphKind::Empty);
        cfg.graph.adjacency[0][1] = 1.0;
        assert!(cfg.to_scenario().is_err());
    }
}
