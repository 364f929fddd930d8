//! Versioned JSON reports and the run manifest.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub schema_version: u32,
    pub config_hash: String,
    #[serde(flatten)]
    pub report: Report,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Report {
    Probe(ProbeReport),
    Certificate(CertificateReport),
    FlowCert(FlowReport),
    Brackets(BracketsReport),
    Simulate(SimulateReport),
    Filter(FilterRunReport),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    /// `closed` or `exceeded-bound`.
    pub status: String,
    pub dimension: usize,
    pub bound: Option<usize>,
    pub bound_kind: Option<String>,
    pub rounds: usize,
    pub basis: Vec<BasisEntry>,
    pub log: Vec<LogEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisEntry {
    pub label: String,
    pub order: String,
    pub operator: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub round: usize,
    pub left: usize,
    pub right: usize,
    pub order: String,
    pub residual: f64,
    pub added: bool,
    pub rank: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub observation: usize,
    pub n: usize,
    pub fields: Vec<String>,
    pub points: Vec<Vec<f64>>,
    pub matrix: Vec<Vec<f64>>,
    pub min_abs_diagonal: f64,
    pub max_abs_below_diagonal: f64,
    pub determinant: f64,
    pub verdict: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    pub observation: usize,
    pub n: usize,
    pub k: usize,
    pub anchor: Vec<f64>,
    pub from: Vec<f64>,
    pub to: Vec<f64>,
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub matrix: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
    pub relative_sigma_min: f64,
    pub derivative_residual: f64,
    pub verdict: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BracketsReport {
    pub coordinates: Vec<String>,
    pub l0: String,
    pub b: Vec<String>,
    pub c: Vec<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub state_seed: u64,
    pub observation_seed: u64,
    pub scheme: String,
    pub dt: f64,
    pub steps: usize,
    pub initial_state: Vec<f64>,
    pub final_state: Vec<f64>,
    pub final_observation: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterRunReport {
    pub grid: Vec<usize>,
    pub dt_pde: Option<f64>,
    pub methods: Vec<MethodReport>,
    /// Pairwise cross-validation distances keyed `a/b:measure`.
    pub distances: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub times: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    pub masses: Vec<f64>,
    pub settings: BTreeMap<String, f64>,
    pub resamplings: usize,
}

impl Report {
    pub fn kind(&self) -> &'static str {
        match self {
            Report::Probe(_) => "probe",
            Report::Certificate(_) => "certificate",
            Report::FlowCert(_) => "flow-cert",
            Report::Brackets(_) => "brackets",
            Report::Simulate(_) => "simulate",
            Report::Filter(_) => "filter",
        }
    }

    /// Internal consistency beyond what the types enforce.
    pub fn validate(&self) -> Result<(), String> {
        let square = |m: &[Vec<f64>], rows: usize, cols: usize| m.len() == rows && m.iter().all(|r| r.len() == cols);
        match self {
            Report::Probe(p) => {
                if p.basis.len() != p.dimension {
                    return Err(format!("basis has {} elements, dimension says {}", p.basis.len(), p.dimension));
                }
                if !matches!(p.status.as_str(), "closed" | "exceeded-bound") {
                    return Err(format!("unknown probe status {:?}", p.status));
                }
            }
            Report::Certificate(c) => {
                if !square(&c.matrix, c.n, c.n) || c.points.len() != c.n || c.fields.len() != c.n {
                    return Err(format!("certificate of depth {} has inconsistent sizes", c.n));
                }
            }
            Report::FlowCert(f) => {
                if !square(&f.matrix, f.n, f.times.len()) || f.points.len() != f.times.len() {
                    return Err("flow certificate has inconsistent sizes".into());
                }
            }
            Report::Brackets(b) => {
                if b.c.len() != b.b.len() || b.c.iter().any(|r| r.len() != b.b.len()) {
                    return Err("C_ij table does not match the number of observations".into());
                }
            }
            Report::Simulate(s) => {
                if s.initial_state.len() != s.final_state.len() {
                    return Err("initial and final states differ in dimension".into());
                }
            }
            Report::Filter(f) => {
                for m in &f.methods {
                    let n = m.times.len();
                    if m.means.len() != n || m.variances.len() != n || m.masses.len() != n {
                        return Err(format!("method {} has inconsistent series lengths", m.method));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub tolerances: BTreeMap<String, f64>,
    pub config: String,
    /// Files written by each subcommand.
    pub commands: BTreeMap<String, Vec<String>>,
}

/// Parses a report and checks that it is a faithful, current-version one.
pub fn revalidate(text: &str) -> Result<Envelope, String> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let version = value.get("schema_version").and_then(serde_json::Value::as_u64);
    if version != Some(SCHEMA_VERSION as u64) {
        return Err(format!("schema_version {version:?}, expected {SCHEMA_VERSION}"));
    }
    let env: Envelope = serde_json::from_value(value.clone()).map_err(|e| e.to_string())?;
    let back = serde_json::to_value(&env).map_err(|e| e.to_string())?;
    if back != value {
        return Err("report does not round-trip (unknown or altered fields)".into());
    }
    env.report.validate()?;
    Ok(env)
}
