//! Subcommand execution, run directories and exit codes.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use estalg_core::estalg::{
    certificate_compact, certificate_flow, dimension_probe, Bound, ProbeStatus, Verdict,
};
use estalg_core::filter::{
    davis_coefficients, kalman_bucy, particle_filter, simulate_observation, simulate_state, solve_robust_dmz,
    solve_zakai_direct, stability_bound, FilterReport, Grid, GridOp, ObservationPath, ParticleSettings, PdeSettings,
    Prior, SamplePath,
};
use estalg_core::{Error, Tolerances};
use sha2::{Digest, Sha256};

use crate::config::{ConfigError, Method, RunConfig};
use crate::report::{
    revalidate, BasisEntry, BracketsReport, CertificateReport, Envelope, FilterRunReport, FlowReport, LogEntry,
    Manifest, MethodReport, ProbeReport, Report, SimulateReport, SCHEMA_VERSION,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Probe,
    Certificate,
    FlowCert,
    Brackets,
    Simulate,
    Filter,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Probe => "probe",
            Command::Certificate => "certificate",
            Command::FlowCert => "flow-cert",
            Command::Brackets => "brackets",
            Command::Simulate => "simulate",
            Command::Filter => "filter",
            Command::Report => "report",
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Core(Error),
    /// A certificate ran to completion but did not certify.
    Verdict(String),
    Io(String),
    InvalidReport(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Verdict(_) => 3,
            CliError::Core(e) => match e {
                Error::CertificateFailure { .. }
                | Error::ConstantObservation(_)
                | Error::DegenerateField
                | Error::FlowNotFound
                | Error::NoCriticalPointFound => 3,
                Error::NotCompact(_)
                | Error::NoSuchObservation { .. }
                | Error::InvalidArgument(_)
                | Error::DimensionMismatch { .. }
                | Error::ResolutionTooLow(_)
                | Error::StabilityViolation { .. } => 2,
                _ => 4,
            },
            CliError::Io(_) | CliError::InvalidReport(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Core(e) => write!(f, "error: {e}"),
            CliError::Verdict(s) => write!(f, "not certified: {s}"),
            CliError::Io(s) => write!(f, "i/o error: {s}"),
            CliError::InvalidReport(s) => write!(f, "invalid report: {s}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

fn io<E: fmt::Display>(what: &Path) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", what.display()))
}

fn tolerance_map(t: &Tolerances) -> BTreeMap<String, f64> {
    let values = [t.zero, t.zero_samples as f64, t.rank, t.crit, t.tri, t.diag, t.dedup];
    Tolerances::NAMES.iter().map(|n| n.to_string()).zip(values).collect()
}

/// Content hash of the config text together with the effective seed and
/// tolerances, so that overrides get their own directory.
pub fn config_hash(cfg: &RunConfig) -> String {
    let mut h = Sha256::new();
    h.update(cfg.text.as_bytes());
    h.update(format!("\0seed={}", cfg.seed).as_bytes());
    for (k, v) in tolerance_map(&cfg.tolerances) {
        h.update(format!("\0{k}={v:e}").as_bytes());
    }
    let hex = format!("{:x}", h.finalize());
    hex[..16].to_string()
}

pub struct RunDir {
    pub path: PathBuf,
    pub hash: String,
}

impl RunDir {
    pub fn new(root: &Path, cfg: &RunConfig) -> RunDir {
        let hash = config_hash(cfg);
        RunDir { path: root.join(&hash), hash }
    }

    fn create(&self) -> Result<(), CliError> {
        fs::create_dir_all(&self.path).map_err(io(&self.path))
    }

    fn write_report(&self, name: &str, report: Report) -> Result<(), CliError> {
        let env = Envelope { schema_version: SCHEMA_VERSION, config_hash: self.hash.clone(), report };
        let text = serde_json::to_string_pretty(&env).map_err(|e| CliError::Io(e.to_string()))?;
        let p = self.path.join(name);
        fs::write(&p, text + "\n").map_err(io(&p))
    }

    fn write_csv(&self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
        let p = self.path.join(name);
        let mut w = csv::Writer::from_path(&p).map_err(io(&p))?;
        w.write_record(header).map_err(io(&p))?;
        for r in rows {
            w.write_record(r).map_err(io(&p))?;
        }
        w.flush().map_err(io(&p))
    }

    fn record(&self, cfg: &RunConfig, command: Command, files: &[&str]) -> Result<(), CliError> {
        let p = self.path.join("manifest.json");
        let mut m = match fs::read_to_string(&p) {
            Ok(text) => serde_json::from_str::<Manifest>(&text).map_err(io(&p))?,
            Err(_) => Manifest {
                schema_version: SCHEMA_VERSION,
                tool_version: env!("CARGO_PKG_VERSION").into(),
                config_hash: self.hash.clone(),
                seed: cfg.seed,
                tolerances: tolerance_map(&cfg.tolerances),
                config: cfg.text.clone(),
                commands: BTreeMap::new(),
            },
        };
        m.commands.insert(command.name().into(), files.iter().map(|s| s.to_string()).collect());
        let text = serde_json::to_string_pretty(&m).map_err(|e| CliError::Io(e.to_string()))?;
        fs::write(&p, text + "\n").map_err(io(&p))
    }
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

/// Runs one subcommand, writing its artifacts into the run directory and
/// a human-readable summary to `out`.
pub fn run(command: Command, cfg: &RunConfig, dir: &RunDir, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    if command == Command::Report {
        return report(dir, out);
    }
    dir.create()?;
    let (files, result) = match command {
        Command::Probe => probe(cfg, dir, out)?,
        Command::Certificate => certificate(cfg, dir, out)?,
        Command::FlowCert => flow(cfg, dir, out)?,
        Command::Brackets => brackets(cfg, dir, out)?,
        Command::Simulate => simulate(cfg, dir, out)?,
        Command::Filter => filter(cfg, dir, out)?,
        Command::Report => unreachable!(),
    };
    dir.record(cfg, command, &files)?;
    writeln!(out, "run directory: {}", dir.path.display()).map_err(|e| CliError::Io(e.to_string()))?;
    result
}

type Outcome = (Vec<&'static str>, Result<(), CliError>);

macro_rules! say {
    ($out:expr, $($arg:tt)*) => {
        writeln!($out, $($arg)*).map_err(|e| CliError::Io(e.to_string()))?
    };
}

fn probe(cfg: &RunConfig, dir: &RunDir, out: &mut dyn std::io::Write) -> Result<Outcome, CliError> {
    let r = dimension_probe(&cfg.system, &cfg.probe)?;
    let (status, bound, kind) = match r.status {
        ProbeStatus::Closed { .. } => ("closed", None, None),
        ProbeStatus::ExceededBound { bound, kind, .. } => (
            "exceeded-bound",
            Some(bound),
            Some(match kind {
                Bound::Dimension => "dimension",
                Bound::Rounds => "rounds",
            }),
        ),
    };
    let rep = ProbeReport {
        status: status.into(),
        dimension: r.dimension(),
        bound,
        bound_kind: kind.map(String::from),
        rounds: r.rounds,
        basis: r
            .basis
            .iter()
            .map(|b| BasisEntry { label: b.label.clone(), order: b.op.order().to_string(), operator: b.op.pretty() })
            .collect(),
        log: r
            .log
            .iter()
            .map(|l| LogEntry {
                round: l.round,
                left: l.left,
                right: l.right,
                order: l.order.to_string(),
                residual: l.residual,
                added: l.added,
                rank: l.rank,
            })
            .collect(),
    };
    let rows: Vec<Vec<String>> = rep
        .log
        .iter()
        .map(|l| {
            vec![
                l.round.to_string(),
                l.left.to_string(),
                l.right.to_string(),
                l.order.clone(),
                num(l.residual),
                l.added.to_string(),
                l.rank.to_string(),
            ]
        })
        .collect();
    let header: Vec<String> =
        ["round", "left", "right", "order", "residual", "added", "rank"].iter().map(|s| s.to_string()).collect();
    dir.write_csv("probe_log.csv", &header, &rows)?;
    match r.status {
        ProbeStatus::Closed { dimension } => say!(out, "status: Closed dim {dimension} after {} round(s)", r.rounds),
        ProbeStatus::ExceededBound { bound, reached, .. } => {
            say!(out, "status: ExceededBound {} (bound {bound}, reached {reached})", kind.unwrap_or(""))
        }
    }
    for b in &rep.basis {
        say!(out, "  {} [order {}]: {}", b.label, b.order, b.operator);
    }
    dir.write_report("probe.json", Report::Probe(rep))?;
    Ok((vec!["probe.json", "probe_log.csv"], Ok(())))
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::InfiniteDimensional => "infinite-dimensional",
        Verdict::RankDeficient => "rank-deficient",
    }
}

fn certificate(cfg: &RunConfig, dir: &RunDir, out: &mut dyn std::io::Write) -> Result<Outcome, CliError> {
    let s = cfg.certificate;
    let c = certificate_compact(&cfg.system, s.observation, s.n)?;
    let names = cfg.system.chart().names();
    let header: Vec<String> = std::iter::once("i".to_string()).chain((0..c.n).map(|k| format!("x{k}"))).collect();
    let rows: Vec<Vec<String>> = c
        .matrix
        .iter()
        .enumerate()
        .map(|(i, r)| std::iter::once(i.to_string()).chain(r.iter().map(|v| num(*v))).collect())
        .collect();
    dir.write_csv("certificate_matrix.csv", &header, &rows)?;
    say!(out, "verdict: {} (n = {})", verdict_name(c.verdict), c.n);
    for (i, r) in c.matrix.iter().enumerate() {
        let cells: Vec<String> = r.iter().map(|v| format!("{v:>10.6}")).collect();
        say!(out, "  H_{i}: {}", cells.join(" "));
    }
    say!(out, "min |diag| {:e}, max |below| {:e}, det {:e}", c.min_abs_diagonal, c.max_abs_below_diagonal, c.determinant);
    let verdict = c.verdict;
    let rep = CertificateReport {
        observation: c.observation,
        n: c.n,
        fields: c.fields.iter().map(|f| f.pretty(names).to_string()).collect(),
        points: c.points,
        matrix: c.matrix,
        min_abs_diagonal: c.min_abs_diagonal,
        max_abs_below_diagonal: c.max_abs_below_diagonal,
        determinant: c.determinant,
        verdict: verdict_name(verdict).into(),
    };
    dir.write_report("certificate.json", Report::Certificate(rep))?;
    let result = match verdict {
        Verdict::InfiniteDimensional => Ok(()),
        Verdict::RankDeficient => Err(CliError::Verdict("certificate matrix is rank deficient".into())),
    };
    Ok((vec!["certificate.json", "certificate_matrix.csv"], result))
}

fn flow(cfg: &RunConfig, dir: &RunDir, out: &mut dyn std::io::Write) -> Result<Outcome, CliError> {
    let s = cfg.flow;
    let c = certificate_flow(&cfg.system, s.observation, s.n, s.k)?;
    let names = cfg.system.chart().names();
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain(names.iter().cloned())
        .chain((1..=s.n).map(|n| format!("A{n}")))
        .collect();
    let rows: Vec<Vec<String>> = c
        .times
        .iter()
        .enumerate()
        .map(|(k, t)| {
            std::iter::once(num(*t))
                .chain(c.points[k].iter().map(|x| num(*x)))
                .chain(c.matrix.iter().map(|r| num(r[k])))
                .collect()
        })
        .collect();
    dir.write_csv("flow_matrix.csv", &header, &rows)?;
    say!(out, "verdict: {} (N = {}, K = {})", verdict_name(c.verdict), s.n, s.k);
    say!(out, "flow {:?} -> {:?}", c.from, c.to);
    say!(out, "relative sigma_min {:e}, derivative residual {:e}", c.relative_sigma_min, c.derivative_residual);
    let verdict = c.verdict;
    let rep = FlowReport {
        observation: c.observation,
        n: s.n,
        k: s.k,
        anchor: c.anchor,
        from: c.from,
        to: c.to,
        times: c.times,
        points: c.points,
        matrix: c.matrix,
        singular_values: c.singular_values,
        relative_sigma_min: c.relative_sigma_min,
        derivative_residual: c.derivative_residual,
        verdict: verdict_name(verdict).into(),
    };
    dir.write_report("flow.json", Report::FlowCert(rep))?;
    let result = match verdict {
        Verdict::InfiniteDimensional => Ok(()),
        Verdict::RankDeficient => Err(CliError::Verdict("sampled flow matrix is rank deficient".into())),
    };
    Ok((vec!["flow.json", "flow_matrix.csv"], result))
}

fn brackets(cfg: &RunConfig, dir: &RunDir, out: &mut dyn std::io::Write) -> Result<Outcome, CliError> {
    let d = davis_coefficients(&cfg.system)?;
    let rep = BracketsReport {
        coordinates: cfg.system.chart().names().to_vec(),
        l0: d.l0.pretty(),
        b: d.b.iter().map(|b| b.pretty()).collect(),
        c: d.c.iter().map(|r| r.iter().map(|c| c.pretty()).collect()).collect(),
    };
    say!(out, "L0 = {}", rep.l0);
    for (i, b) in rep.b.iter().enumerate() {
        say!(out, "B_{i} = {b}");
    }
    for (i, r) in rep.c.iter().enumerate() {
        for (j, c) in r.iter().enumerate() {
            say!(out, "C_{i}{j} = {c}");
        }
    }
    dir.write_report("brackets.json", Report::Brackets(rep))?;
    Ok((vec!["brackets.json"], Ok(())))
}

fn seeds(cfg: &RunConfig) -> (u64, u64, u64) {
    (cfg.seed, cfg.seed.wrapping_add(1), cfg.seed.wrapping_add(2))
}

fn sample_paths(cfg: &RunConfig) -> Result<(SamplePath, ObservationPath), CliError> {
    let s = &cfg.simulate;
    let (xs, ys, _) = seeds(cfg);
    let path = simulate_state(&cfg.system, &s.x0, s.t_end, s.dt, xs, s.noise)?;
    let y = simulate_observation(&path, cfg.system.observations(), ys, s.noise)?;
    Ok((path, y))
}

fn simulate(cfg: &RunConfig, dir: &RunDir, out: &mut dyn std::io::Write) -> Result<Outcome, CliError> {
    let (path, y) = sample_paths(cfg)?;
    let names = cfg.system.chart().names();
    let m = y.channels();
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain(names.iter().cloned())
        .chain((0..m).map(|i| format!("y{i}")))
        .collect();
    let rows: Vec<Vec<String>> = path
        .times
        .iter()
        .zip(&path.states)
        .zip(&y.values)
        .map(|((t, x), yv)| std::iter::once(num(*t)).chain(x.iter().chain(yv).map(|v| num(*v))).collect())
        .collect();
    dir.write_csv("trajectory.csv", &header, &rows)?;
    let (xs, ys, _) = seeds(cfg);
    let rep = SimulateReport {
        state_seed: xs,
        observation_seed: ys,
        scheme: path.scheme.into(),
        dt: path.dt(),
        steps: path.times.len() - 1,
        initial_state: path.states[0].clone(),
        final_state: path.states.last().cloned().unwrap_or_default(),
        final_observation: y.values.last().cloned().unwrap_or_default(),
    };
    say!(out, "{} steps of {} with dt {:e}", rep.steps, rep.scheme, rep.dt);
    say!(out, "final state {:?}, final observation {:?}", rep.final_state, rep.final_observation);
    dir.write_report("simulate.json", Report::Simulate(rep))?;
    Ok((vec!["simulate.json", "trajectory.csv"], Ok(())))
}

fn method_report(r: &FilterReport) -> MethodReport {
    MethodReport {
        method: r.method.clone(),
        times: r.times.clone(),
        means: r.moments.iter().map(|m| m.mean.clone()).collect(),
        variances: r.moments.iter().map(|m| m.variance.clone()).collect(),
        masses: r.masses.clone(),
        settings: r.settings.iter().cloned().collect(),
        resamplings: r.resamplings,
    }
}

fn filter(cfg: &RunConfig, dir: &RunDir, out: &mut dyn std::io::Write) -> Result<Outcome, CliError> {
    let f = &cfg.filter;
    let sys = &cfg.system;
    let chart = sys.chart();
    let (_, y) = sample_paths(cfg)?;
    let (.., ps) = seeds(cfg);
    let mut reports: Vec<FilterReport> = Vec::new();
    let mut distances = BTreeMap::new();
    let mut density_cols: Vec<(String, Vec<f64>)> = Vec::new();
    let mut dt_used = None;

    let needs_grid = f.methods.iter().any(|m| matches!(m, Method::Robust | Method::Direct | Method::Particle));
    let grid = if needs_grid { Some(Grid::new(sys.metric(), &f.shape)?) } else { None };
    let prior = match &grid {
        Some(g) => Some(match (&f.prior, &f.kalman) {
            (Some(p), _) => g.eval(p)?,
            (None, Some(k)) => g.nodes().iter().map(|x| (-(x[0] - k.m0).powi(2) / (2.0 * k.p0)).exp()).collect(),
            (None, None) => vec![1.0; g.len()],
        }),
        None => None,
    };

    for &method in &f.methods {
        match method {
            Method::Robust | Method::Direct => {
                let (g, p) = (grid.as_ref().unwrap(), prior.as_ref().unwrap());
                let dt = match f.dt_pde {
                    Some(dt) => dt,
                    None => {
                        let bound = stability_bound(g, &GridOp::new(g, sys.l0())?);
                        let step = cfg.simulate.dt;
                        step / (step / bound).ceil().max(1.0)
                    }
                };
                dt_used = Some(dt);
                let settings = PdeSettings { stepper: f.stepper, ..PdeSettings::new(dt) };
                let fields = if method == Method::Robust {
                    solve_robust_dmz(sys, &y, g, p, &settings)?.sigma
                } else {
                    solve_zakai_direct(sys, &y, g, p, &settings)?
                };
                let mut r = FilterReport::from_densities(method.name(), g, &fields)?;
                r.settings.push(("dt_pde".into(), dt));
                density_cols.push((method.name().into(), fields.last().unwrap().normalized()?));
                reports.push(r);
            }
            Method::Particle => {
                let (g, p) = (grid.as_ref().unwrap(), prior.as_ref().unwrap());
                let settings = ParticleSettings { substeps: f.substeps, ..ParticleSettings::new(f.particles, ps) };
                reports.push(particle_filter(sys, &y, Prior::Grid { grid: g, values: p }, &settings)?);
            }
            Method::Kalman => reports.push(kalman_bucy(f.kalman.as_ref().unwrap(), &y)?),
        }
    }
    for (i, a) in reports.iter().enumerate() {
        for b in &reports[i + 1..] {
            distances.insert(format!("{}/{}:max_mean", a.method, b.method), a.max_mean_distance(b, chart)?);
        }
    }
    if let (Some(r), Some(d)) = (
        density_cols.iter().find(|(n, _)| n == "robust"),
        density_cols.iter().find(|(n, _)| n == "direct"),
    ) {
        let g = grid.as_ref().unwrap();
        let w = g.weights();
        let l1: f64 = r.1.iter().zip(&d.1).zip(w.iter()).map(|((a, b), w)| (a - b).abs() * w).sum();
        distances.insert("robust/direct:l1_final".into(), l1);
    }

    let mut header = vec!["method".to_string(), "t".to_string()];
    header.extend(chart.names().iter().map(|n| format!("mean_{n}")));
    header.extend(chart.names().iter().map(|n| format!("var_{n}")));
    header.push("mass".into());
    let mut rows = Vec::new();
    for r in &reports {
        for (k, t) in r.times.iter().enumerate() {
            let mut row = vec![r.method.clone(), num(*t)];
            row.extend(r.moments[k].mean.iter().chain(&r.moments[k].variance).map(|v| num(*v)));
            row.push(num(r.masses[k]));
            rows.push(row);
        }
    }
    dir.write_csv("moments.csv", &header, &rows)?;
    let mut files = vec!["filter.json", "moments.csv"];
    if let (Some(g), false) = (&grid, density_cols.is_empty()) {
        let mut header: Vec<String> = chart.names().to_vec();
        header.extend(density_cols.iter().map(|(n, _)| n.clone()));
        let rows: Vec<Vec<String>> = g
            .nodes()
            .iter()
            .enumerate()
            .map(|(k, x)| x.iter().map(|v| num(*v)).chain(density_cols.iter().map(|(_, c)| num(c[k]))).collect())
            .collect();
        dir.write_csv("density_final.csv", &header, &rows)?;
        files.push("density_final.csv");
    }

    for r in &reports {
        let last = r.moments.last().unwrap();
        say!(out, "{:>12}: final mean {:?}, variance {:?}", r.method, last.mean, last.variance);
    }
    for (k, v) in &distances {
        say!(out, "{k} = {v:e}");
    }
    let rep = FilterRunReport {
        grid: if needs_grid { f.shape.clone() } else { Vec::new() },
        dt_pde: dt_used,
        methods: reports.iter().map(method_report).collect(),
        distances,
    };
    dir.write_report("filter.json", Report::Filter(rep))?;
    Ok((files, Ok(())))
}

fn report(dir: &RunDir, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    let p = dir.path.join("manifest.json");
    let text = fs::read_to_string(&p).map_err(io(&p))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| CliError::InvalidReport(format!("manifest.json: {e}")))?;
    if m.schema_version != SCHEMA_VERSION {
        return Err(CliError::InvalidReport(format!("manifest schema_version {}", m.schema_version)));
    }
    if m.config_hash != dir.hash {
        return Err(CliError::InvalidReport("manifest belongs to a different config".into()));
    }
    say!(out, "run {} (seed {})", m.config_hash, m.seed);
    for (command, files) in &m.commands {
        for name in files.iter().filter(|f| f.ends_with(".json")) {
            let p = dir.path.join(name);
            let text = fs::read_to_string(&p).map_err(io(&p))?;
            let env = revalidate(&text).map_err(|e| CliError::InvalidReport(format!("{name}: {e}")))?;
            if env.report.kind() != command || env.config_hash != m.config_hash {
                return Err(CliError::InvalidReport(format!("{name}: does not belong to {command} of this run")));
            }
            say!(out, "  {command}: {name} ok ({})", summary(&env.report));
        }
    }
    Ok(())
}

fn summary(r: &Report) -> String {
    match r {
        Report::Probe(p) => format!("{} dim {}", p.status, p.dimension),
        Report::Certificate(c) => format!("{} n {}", c.verdict, c.n),
        Report::FlowCert(f) => format!("{} relative sigma_min {:e}", f.verdict, f.relative_sigma_min),
        Report::Brackets(b) => format!("{} observation(s)", b.b.len()),
        Report::Simulate(s) => format!("{} steps", s.steps),
        Report::Filter(f) => format!("{} method(s)", f.methods.len()),
    }
}
