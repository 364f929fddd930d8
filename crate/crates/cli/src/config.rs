//! TOML run configuration and its validation.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use estalg_core::estalg::{FilteringSystem, ProbeSettings};
use estalg_core::filter::{LinearModel, Noise, Stepper};
use estalg_core::geometry::{Axis, Chart, DiffusionSpec, Matrix, Metric, VectorField};
use estalg_core::symb::parse;
use estalg_core::{Expr, Tolerances};
use serde::{Deserialize, Serialize};

/// Every problem found in a config, reported together.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub violations: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid config ({} problem{}):", self.violations.len(), if self.violations.len() == 1 { "" } else { "s" })?;
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub seed: Option<u64>,
    pub system: Option<RawSystem>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    pub probe: Option<RawProbe>,
    pub certificate: Option<RawCertificate>,
    pub flow: Option<RawFlow>,
    pub simulate: Option<RawSimulate>,
    pub filter: Option<RawFilter>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawSystem {
    pub manifold: Option<String>,
    pub dim: Option<usize>,
    pub half_width: Option<f64>,
    pub margin: Option<f64>,
    pub chart: Option<RawChart>,
    pub drift: Option<Vec<String>>,
    pub observations: Option<Vec<String>>,
    pub metric: Option<Vec<Vec<String>>>,
    pub diffusion: Option<Vec<Vec<String>>>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawChart {
    #[serde(default = "custom_name")]
    pub name: String,
    pub axes: Vec<RawAxis>,
    #[serde(default)]
    pub margin: f64,
    #[serde(default)]
    pub compact: bool,
}

fn custom_name() -> String {
    "custom".into()
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawAxis {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    #[serde(default)]
    pub periodic: bool,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawProbe {
    pub max_dim: Option<usize>,
    pub max_rounds: Option<usize>,
    pub samples: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawCertificate {
    pub observation: Option<usize>,
    pub n: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawFlow {
    pub observation: Option<usize>,
    pub n: Option<usize>,
    pub k: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawSimulate {
    pub x0: Option<Vec<f64>>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub noise: Option<String>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(untagged)]
pub enum GridShape {
    Uniform(usize),
    PerAxis(Vec<usize>),
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawFilter {
    pub grid: Option<GridShape>,
    pub dt_pde: Option<f64>,
    pub stepper: Option<String>,
    pub particles: Option<usize>,
    pub substeps: Option<usize>,
    pub prior: Option<String>,
    pub methods: Option<Vec<String>>,
    pub kalman: Option<RawKalman>,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawKalman {
    pub a: f64,
    pub c: f64,
    pub m0: f64,
    pub p0: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CertificateSettings {
    pub observation: usize,
    pub n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FlowSettings {
    pub observation: usize,
    pub n: usize,
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulateSettings {
    pub x0: Vec<f64>,
    pub t_end: f64,
    pub dt: f64,
    pub noise: Noise,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Robust,
    Direct,
    Particle,
    Kalman,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Robust => "robust",
            Method::Direct => "direct",
            Method::Particle => "particle",
            Method::Kalman => "kalman",
        }
    }
}

#[derive(Clone, Debug)]
pub struct FilterSettings {
    pub shape: Vec<usize>,
    /// `None` picks the largest stable step dividing the observation step.
    pub dt_pde: Option<f64>,
    pub stepper: Stepper,
    pub particles: usize,
    pub substeps: usize,
    pub prior: Option<Expr>,
    pub methods: Vec<Method>,
    pub kalman: Option<LinearModel>,
}

/// A validated configuration with the filtering system already built.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub raw: RawConfig,
    pub text: String,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub system: FilteringSystem,
    pub probe: ProbeSettings,
    pub certificate: CertificateSettings,
    pub flow: FlowSettings,
    pub simulate: SimulateSettings,
    pub filter: FilterSettings,
}

/// Command-line overrides applied before validation.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub tolerances: Vec<(String, f64)>,
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_with(text, &Overrides::default())
}

pub fn parse_config_with(text: &str, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError {
        violations: vec![format!("malformed config: {}", e.to_string().trim_end())],
    })?;
    let mut v = Vec::new();

    let mut tol = Tolerances::default();
    for (name, value) in raw.tolerances.iter().map(|(k, x)| (k.as_str(), *x)).chain(
        overrides.tolerances.iter().map(|(k, x)| (k.as_str(), *x)),
    ) {
        if let Err(e) = tol.set(name, value) {
            v.push(format!("tolerances.{name}: {e}"));
        }
    }
    let seed = overrides.seed.or(raw.seed).unwrap_or(0);

    let system = match &raw.system {
        None => {
            v.push("system: missing".into());
            None
        }
        Some(s) => build_system(s, &tol, &mut v),
    };

    let p = raw.probe.clone().unwrap_or_default();
    let mut probe = ProbeSettings { seed, ..ProbeSettings::default() };
    probe.max_dim = p.max_dim.unwrap_or(probe.max_dim);
    probe.max_rounds = p.max_rounds.unwrap_or(probe.max_rounds);
    probe.samples = p.samples.unwrap_or(probe.samples);
    positive(&mut v, "probe.max_dim", probe.max_dim);
    positive(&mut v, "probe.max_rounds", probe.max_rounds);
    positive(&mut v, "probe.samples", probe.samples);

    let m = system.as_ref().map_or(usize::MAX, |s| s.observations().len());
    let c = raw.certificate.clone().unwrap_or_default();
    let certificate = CertificateSettings { observation: c.observation.unwrap_or(0), n: c.n.unwrap_or(3) };
    positive(&mut v, "certificate.n", certificate.n);
    if certificate.observation >= m {
        v.push(format!("certificate.observation: index {} but only {m} observation(s)", certificate.observation));
    }

    let f = raw.flow.clone().unwrap_or_default();
    let flow = FlowSettings { observation: f.observation.unwrap_or(0), n: f.n.unwrap_or(5), k: f.k.unwrap_or(16) };
    positive(&mut v, "flow.n", flow.n);
    if flow.k < 2 * flow.n {
        v.push(format!("flow.k: needs at least 2n = {} sample times, got {}", 2 * flow.n, flow.k));
    }
    if flow.observation >= m {
        v.push(format!("flow.observation: index {} but only {m} observation(s)", flow.observation));
    }

    let simulate = simulate_settings(raw.simulate.clone().unwrap_or_default(), system.as_ref(), &mut v);
    let filter = filter_settings(raw.filter.clone().unwrap_or_default(), system.as_ref(), &mut v);

    match system {
        Some(system) if v.is_empty() => Ok(RunConfig {
            raw,
            text: text.to_string(),
            seed,
            tolerances: tol,
            system,
            probe,
            certificate,
            flow,
            simulate,
            filter,
        }),
        _ => Err(ConfigError { violations: v }),
    }
}

fn positive(v: &mut Vec<String>, field: &str, x: usize) {
    if x == 0 {
        v.push(format!("{field}: must be positive"));
    }
}

fn build_chart(s: &RawSystem, tol: &Tolerances, v: &mut Vec<String>) -> Option<(Arc<Chart>, Option<Matrix>)> {
    match (&s.manifold, &s.chart) {
        (Some(_), Some(_)) => {
            v.push("system: give either manifold or chart, not both".into());
            None
        }
        (None, None) => {
            v.push("system.manifold: missing (or give a custom system.chart)".into());
            None
        }
        (None, Some(c)) => {
            let axes = c.axes.iter().map(|a| Axis::new(&a.name, a.lower, a.upper, a.periodic)).collect();
            match Chart::new(&c.name, axes, c.margin, c.compact, tol) {
                Ok(chart) => Some((chart, None)),
                Err(e) => {
                    v.push(format!("system.chart: {e}"));
                    None
                }
            }
        }
        (Some(name), None) => {
            let flat = |n: usize| -> Matrix {
                (0..n).map(|i| (0..n).map(|j| Expr::int((i == j) as i64)).collect()).collect()
            };
            match name.as_str() {
                "circle" => Some((Chart::circle(tol), Some(flat(1)))),
                "torus2" => Some((Chart::torus2(tol), Some(flat(2)))),
                "sphere2" => {
                    let margin = s.margin.unwrap_or(1e-3);
                    if !(margin > 0.0 && margin < PI / 2.0) {
                        v.push(format!("system.margin: must lie in (0, π/2), got {margin}"));
                        return None;
                    }
                    let chart = Chart::sphere2(margin, tol);
                    let s2 = parse("sin(theta)^2", chart.names()).expect("builtin metric");
                    let g = vec![vec![Expr::int(1), Expr::int(0)], vec![Expr::int(0), s2]];
                    Some((chart, Some(g)))
                }
                "euclidean" => {
                    let n = s.dim.unwrap_or(1);
                    let w = s.half_width.unwrap_or(10.0);
                    match Chart::euclidean(n, w, tol) {
                        Ok(chart) if n > 0 => Some((chart, Some(flat(n)))),
                        Ok(_) => {
                            v.push("system.dim: must be positive".into());
                            None
                        }
                        Err(e) => {
                            v.push(format!("system.half_width: {e}"));
                            None
                        }
                    }
                }
                other => {
                    v.push(format!("system.manifold: unknown manifold {other:?} (circle, torus2, sphere2, euclidean)"));
                    None
                }
            }
        }
    }
}

fn parse_list(field: &str, src: &[String], chart: &Chart, v: &mut Vec<String>) -> Option<Vec<Expr>> {
    let mut out = Vec::with_capacity(src.len());
    let mut ok = true;
    for (i, s) in src.iter().enumerate() {
        match parse(s, chart.names()) {
            Ok(e) => out.push(e),
            Err(e) => {
                v.push(format!("{field}[{i}]: {e} in {s:?}"));
                ok = false;
            }
        }
    }
    ok.then_some(out)
}

fn parse_matrix(field: &str, src: &[Vec<String>], chart: &Chart, v: &mut Vec<String>) -> Option<Matrix> {
    let n = chart.dim();
    if src.len() != n || src.iter().any(|r| r.len() != n) {
        v.push(format!("{field}: must be a {n}×{n} matrix"));
        return None;
    }
    let mut out = Vec::with_capacity(n);
    let mut ok = true;
    for (i, row) in src.iter().enumerate() {
        let mut r = Vec::with_capacity(n);
        for (j, s) in row.iter().enumerate() {
            match parse(s, chart.names()) {
                Ok(e) => r.push(e),
                Err(e) => {
                    v.push(format!("{field}[{i}][{j}]: {e} in {s:?}"));
                    ok = false;
                }
            }
        }
        out.push(r);
    }
    ok.then_some(out)
}

fn build_system(s: &RawSystem, tol: &Tolerances, v: &mut Vec<String>) -> Option<FilteringSystem> {
    let before = v.len();
    let (chart, default_metric) = build_chart(s, tol, v)?;
    let n = chart.dim();
    let drift = match &s.drift {
        None => Some(vec![Expr::int(0); n]),
        Some(d) if d.len() != n => {
            v.push(format!("system.drift: expected {n} component(s), got {}", d.len()));
            None
        }
        Some(d) => parse_list("system.drift", d, &chart, v),
    };
    let h = match &s.observations {
        None => {
            v.push("system.observations: missing".into());
            None
        }
        Some(o) if o.is_empty() => {
            v.push("system.observations: needs at least one observation".into());
            None
        }
        Some(o) => parse_list("system.observations", o, &chart, v),
    };
    let metric = match (&s.metric, &s.diffusion) {
        (Some(_), Some(_)) => {
            v.push("system: give exactly one of metric and diffusion, not both".into());
            None
        }
        (None, None) if default_metric.is_none() => {
            v.push("system: a custom chart needs exactly one of metric and diffusion".into());
            None
        }
        (None, None) => default_metric.map(Ok),
        (Some(g), None) => parse_matrix("system.metric", g, &chart, v).map(Ok),
        (None, Some(a)) => parse_matrix("system.diffusion", a, &chart, v).map(Err),
    };
    let (drift, h, metric) = (drift?, h?, metric?);
    if v.len() > before {
        return None;
    }
    let built = match metric {
        Ok(g) => Metric::new(chart, g)
            .map_err(|e| format!("system.metric: {e}"))
            .and_then(|g| FilteringSystem::new(g, VectorField(drift), h, *tol).map_err(|e| format!("system: {e}"))),
        Err(a) => DiffusionSpec::new(chart, a, drift)
            .map_err(|e| format!("system.diffusion: {e} (the diffusion must be symmetric positive definite)"))
            .and_then(|d| FilteringSystem::from_diffusion(&d, h, *tol).map_err(|e| format!("system: {e}"))),
    };
    match built {
        Ok(sys) => Some(sys),
        Err(e) => {
            v.push(e);
            None
        }
    }
}

fn simulate_settings(s: RawSimulate, sys: Option<&FilteringSystem>, v: &mut Vec<String>) -> SimulateSettings {
    let x0 = match (s.x0, sys) {
        (Some(x), Some(sys)) => {
            if x.len() != sys.chart().dim() {
                v.push(format!("simulate.x0: expected {} coordinate(s), got {}", sys.chart().dim(), x.len()));
            } else if !sys.chart().contains(&x) {
                v.push(format!("simulate.x0: {x:?} lies outside the chart"));
            }
            x
        }
        (Some(x), None) => x,
        (None, Some(sys)) => (0..sys.chart().dim())
            .map(|i| {
                let (lo, hi) = sys.chart().interior(i);
                0.5 * (lo + hi)
            })
            .collect(),
        (None, None) => Vec::new(),
    };
    let t_end = s.t_end.unwrap_or(1.0);
    let dt = s.dt.unwrap_or(1e-3);
    if !(t_end > 0.0 && t_end.is_finite()) {
        v.push(format!("simulate.t_end: must be positive, got {t_end}"));
    }
    if !(dt > 0.0 && dt <= t_end) {
        v.push(format!("simulate.dt: must lie in (0, t_end], got {dt}"));
    }
    let noise = match s.noise.as_deref().unwrap_or("gaussian") {
        "gaussian" => Noise::Gaussian,
        "zero" => Noise::Zero,
        other => {
            v.push(format!("simulate.noise: unknown noise {other:?} (gaussian, zero)"));
            Noise::Gaussian
        }
    };
    SimulateSettings { x0, t_end, dt, noise }
}

fn filter_settings(f: RawFilter, sys: Option<&FilteringSystem>, v: &mut Vec<String>) -> FilterSettings {
    let dim = sys.map_or(1, |s| s.chart().dim());
    let shape = match f.grid.unwrap_or(GridShape::Uniform(128)) {
        GridShape::Uniform(n) => vec![n; dim],
        GridShape::PerAxis(s) => {
            if s.len() != dim {
                v.push(format!("filter.grid: expected {dim} resolution(s), got {}", s.len()));
            }
            s
        }
    };
    if let Some(dt) = f.dt_pde {
        if !(dt > 0.0 && dt.is_finite()) {
            v.push(format!("filter.dt_pde: must be positive, got {dt}"));
        }
    }
    let stepper = match f.stepper.as_deref().unwrap_or("rk4") {
        "rk4" => Stepper::Rk4,
        "heun" => Stepper::Heun,
        other => {
            v.push(format!("filter.stepper: unknown stepper {other:?} (rk4, heun)"));
            Stepper::Rk4
        }
    };
    let prior = match (f.prior, sys) {
        (Some(p), Some(sys)) => match parse(&p, sys.chart().names()) {
            Ok(e) => Some(e),
            Err(e) => {
                v.push(format!("filter.prior: {e} in {p:?}"));
                None
            }
        },
        _ => None,
    };
    let kalman = f.kalman.map(|k| LinearModel { a: k.a, c: k.c, m0: k.m0, p0: k.p0 });
    let names = f.methods.unwrap_or_else(|| {
        let mut m: Vec<String> = ["robust", "direct", "particle"].iter().map(|s| s.to_string()).collect();
        if kalman.is_some() {
            m.push("kalman".into());
        }
        m
    });
    let mut methods = Vec::new();
    for name in &names {
        match name.as_str() {
            "robust" => methods.push(Method::Robust),
            "direct" => methods.push(Method::Direct),
            "particle" => methods.push(Method::Particle),
            "kalman" => methods.push(Method::Kalman),
            other => v.push(format!("filter.methods: unknown method {other:?} (robust, direct, particle, kalman)")),
        }
    }
    methods.sort();
    methods.dedup();
    if methods.is_empty() {
        v.push("filter.methods: needs at least one method".into());
    }
    if methods.contains(&Method::Kalman) {
        match kalman {
            None => v.push("filter.kalman: missing, but the kalman method was requested".into()),
            Some(k) => {
                if dim != 1 || sys.is_some_and(|s| s.observations().len() != 1) {
                    v.push("filter.kalman: needs a scalar state and a single observation".into());
                }
                if !(k.p0 > 0.0) {
                    v.push(format!("filter.kalman.p0: must be positive, got {}", k.p0));
                }
            }
        }
    }
    FilterSettings {
        shape,
        dt_pde: f.dt_pde,
        stepper,
        particles: f.particles.unwrap_or(10_000),
        substeps: f.substeps.unwrap_or(1),
        prior,
        methods,
        kalman,
    }
}
