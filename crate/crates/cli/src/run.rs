//! The `run` command: sweeps, oracle cross-checks and result files.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use serde::Serialize;
use thiserror::Error;
use vacdec_core::decoherence::{self, DecoherenceError, DecoherenceResult, SweepGrid};
use vacdec_core::oracle::{self, McConfig, OracleError};
use vacdec_core::scenario::{Method, Orientation, RawScenario, Scenario};
use vacdec_core::trajectories::TrajectorySpec;

use crate::config::{self, ConfigError, ScenarioFile};

/// Column order of the CSV output. Changing it is a format break.
pub const CSV_COLUMNS: [&str; 13] = [
    "scenario_id",
    "orientation",
    "z0",
    "method",
    "W_vac",
    "W_boundary",
    "W_total",
    "visibility",
    "emission_prob_equiv",
    "err_est",
    "mc_value",
    "mc_stderr",
    "mc_verdict",
];

/// Oracle agreement threshold in combined standard errors.
pub const VERDICT_SIGMAS: f64 = 3.0;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Dipole,
    Full,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Dipole => Method::DipoleApprox,
            MethodArg::Full => Method::Full,
        }
    }
}

/// `axis=a:b:n`, or `orientation=parallel,perpendicular`.
#[derive(Clone, Debug, PartialEq)]
pub enum SweepSpec {
    Range { axis: Axis, start: f64, end: f64, points: usize },
    Orientations(Vec<Orientation>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Z0,
    Tau,
    N,
}

impl Axis {
    fn label(self) -> &'static str {
        match self {
            Axis::Z0 => "z0",
            Axis::Tau => "tau",
            Axis::N => "N",
        }
    }
}

impl FromStr for SweepSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (axis, range) = s.split_once('=').ok_or_else(|| format!("expected axis=a:b:n, got `{s}`"))?;
        let axis = match axis.trim() {
            "z0" => Axis::Z0,
            "tau" => Axis::Tau,
            "N" => Axis::N,
            "orientation" => {
                let list = range
                    .split(',')
                    .map(|o| o.trim().parse::<Orientation>())
                    .collect::<Result<Vec<_>, _>>()?;
                return Ok(SweepSpec::Orientations(list));
            }
            other => return Err(format!("unknown sweep axis `{other}`; expected z0, tau, N or orientation")),
        };
        let parts: Vec<&str> = range.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected a:b:n after `{}=`, got `{range}`", axis.label()));
        }
        let bound = |p: &str| p.trim().parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| format!("bad bound `{p}`"));
        let points = parts[2].trim().parse::<usize>().map_err(|_| format!("bad point count `{}`", parts[2]))?;
        if points == 0 {
            return Err("a sweep needs at least one point".into());
        }
        Ok(SweepSpec::Range { axis, start: bound(parts[0])?, end: bound(parts[1])?, points })
    }
}

impl fmt::Display for SweepSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepSpec::Range { axis, start, end, points } => write!(f, "{}={start}:{end}:{points}", axis.label()),
            SweepSpec::Orientations(list) => {
                let names: Vec<&str> = list.iter().map(|o| o.label()).collect();
                write!(f, "orientation={}", names.join(","))
            }
        }
    }
}

impl SweepSpec {
    pub fn grid(&self, log_axis: bool) -> Result<SweepGrid, String> {
        let (axis, start, end, points) = match self {
            SweepSpec::Orientations(list) => return Ok(SweepGrid::Orientation(list.clone())),
            SweepSpec::Range { axis, start, end, points } => (*axis, *start, *end, *points),
        };
        if log_axis && !(start > 0.0 && end > 0.0) {
            return Err("--log-axis needs positive bounds".into());
        }
        let values: Vec<f64> = (0..points)
            .map(|i| {
                if i == 0 {
                    return start;
                }
                if i + 1 == points {
                    return end;
                }
                let f = i as f64 / (points - 1) as f64;
                if log_axis {
                    (start.ln() + f * (end / start).ln()).exp()
                } else {
                    start + f * (end - start)
                }
            })
            .collect();
        Ok(match axis {
            Axis::Z0 => SweepGrid::Z0(values),
            Axis::Tau => SweepGrid::Tau(values),
            Axis::N => {
                let counts: Vec<u32> = values.iter().map(|v| v.round().max(0.0) as u32).collect();
                if counts.windows(2).any(|w| w[0] == w[1]) {
                    return Err(format!("N sweep rounds to repeated counts {counts:?}"));
                }
                SweepGrid::Count(counts)
            }
        })
    }
}

#[derive(Args, Clone, Debug, Default)]
pub struct RunArgs {
    /// Scenario file.
    pub scenario: PathBuf,
    /// Parameter sweep, `z0=a:b:n`, `tau=a:b:n`, `N=a:b:n` or
    /// `orientation=parallel,perpendicular`.
    #[arg(long)]
    pub sweep: Option<SweepSpec>,
    /// Space sweep points geometrically instead of linearly.
    #[arg(long)]
    pub log_axis: bool,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Ramp time of a trapezoid trajectory.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Hard radial momentum cutoff.
    #[arg(long)]
    pub kmax: Option<f64>,
    /// Cross-check every row against the Monte Carlo oracle.
    #[arg(long)]
    pub oracle: bool,
    #[arg(long)]
    pub mc_samples: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write visibility curves for both orientations next to `--out`.
    #[arg(long)]
    pub emit_plot_data: bool,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("cannot write {path}: {source}")]
    Output { path: String, source: std::io::Error },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Usage(_) => 2,
            RunError::Numerical(_) => 3,
            RunError::Output { .. } => 1,
        }
    }
}

impl From<DecoherenceError> for RunError {
    fn from(e: DecoherenceError) -> RunError {
        match e {
            DecoherenceError::Scenario(_)
            | DecoherenceError::Sweep(_)
            | DecoherenceError::WrongCoupling { .. }
            | DecoherenceError::NoPlate => RunError::Usage(e.to_string()),
            DecoherenceError::Quadrature(_) | DecoherenceError::Kernel(_) | DecoherenceError::SignTable { .. } => {
                RunError::Numerical(e.to_string())
            }
        }
    }
}

impl From<OracleError> for RunError {
    fn from(e: OracleError) -> RunError {
        RunError::Numerical(format!("oracle: {e}"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub scenario_id: String,
    pub orientation: String,
    pub z0: Option<f64>,
    pub method: String,
    #[serde(rename = "W_vac")]
    pub w_vac: f64,
    #[serde(rename = "W_boundary")]
    pub w_boundary: f64,
    #[serde(rename = "W_total")]
    pub w_total: f64,
    pub visibility: f64,
    pub emission_prob_equiv: f64,
    pub err_est: f64,
    pub mc_value: Option<f64>,
    pub mc_stderr: Option<f64>,
    pub mc_verdict: Option<String>,
}

impl Row {
    fn new(scenario_id: String, s: &Scenario, r: &DecoherenceResult) -> Row {
        let g = s.geometry();
        Row {
            scenario_id,
            orientation: g.orientation().label().into(),
            z0: g.plate().then(|| g.z0()),
            method: r.method.label().into(),
            w_vac: r.w_vac,
            w_boundary: r.w_boundary,
            w_total: r.w_total,
            visibility: r.visibility,
            emission_prob_equiv: r.emission_prob_equiv,
            err_est: r.err_est,
            mc_value: None,
            mc_stderr: None,
            mc_verdict: None,
        }
    }

    fn csv_record(&self) -> Vec<String> {
        let num = |x: f64| format!("{x:e}");
        let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
        vec![
            self.scenario_id.clone(),
            self.orientation.clone(),
            opt(self.z0),
            self.method.clone(),
            num(self.w_vac),
            num(self.w_boundary),
            num(self.w_total),
            num(self.visibility),
            num(self.emission_prob_equiv),
            num(self.err_est),
            opt(self.mc_value),
            opt(self.mc_stderr),
            self.mc_verdict.clone().unwrap_or_default(),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CalibrationRecord {
    pub factor: f64,
    pub provenance: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegularizationRecord {
    pub ramp: Option<f64>,
    pub k_max: Option<f64>,
    pub calibration: Option<CalibrationRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleRecord {
    pub samples: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub scenario_id: String,
    pub config_hash: String,
    pub tool_version: String,
    pub timestamp: String,
    pub regularization: RegularizationRecord,
    pub method: String,
    pub sweep: Option<String>,
    pub log_axis: bool,
    pub oracle: Option<OracleRecord>,
    pub columns: Vec<String>,
}

/// One visibility curve for plotting.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub rows: Vec<Row>,
    pub manifest: RunManifest,
    /// Abscissa label and curves, when plot data was requested.
    pub plot: Option<(String, Vec<Curve>)>,
}

fn scenario_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "scenario".into())
}

/// Applies the command-line overrides to the file's scenario.
fn effective(raw: &RawScenario, args: &RunArgs) -> Result<RawScenario, RunError> {
    let mut raw = raw.clone();
    if let Some(m) = args.method {
        raw.numerics.method = m.into();
    }
    if let Some(k) = args.kmax {
        raw.numerics.quadrature.k_max = Some(k);
    }
    if let Some(tau) = args.tau {
        match raw.trajectory.as_mut() {
            Some(TrajectorySpec::PiecewiseTrapezoid { ramp, .. }) => *ramp = tau,
            _ => return Err(RunError::Usage("--tau needs a trapezoid trajectory".into())),
        }
    }
    if args.oracle || args.mc_samples.is_some() || args.seed.is_some() {
        let mut mc = raw.oracle.clone().unwrap_or_default();
        if let Some(n) = args.mc_samples {
            mc.samples = n;
        }
        if let Some(seed) = args.seed {
            mc.seed = seed;
        }
        raw.oracle = Some(mc);
    }
    Ok(raw)
}

fn grid_value_label(grid: &SweepGrid, i: usize) -> String {
    match grid {
        SweepGrid::Z0(v) | SweepGrid::Tau(v) => format!("{:e}", v[i]),
        SweepGrid::Count(v) => v[i].to_string(),
        SweepGrid::Orientation(v) => v[i].label().into(),
    }
}

fn grid_abscissa(grid: &SweepGrid, i: usize, s: &Scenario) -> f64 {
    match grid {
        SweepGrid::Z0(v) | SweepGrid::Tau(v) => v[i],
        SweepGrid::Count(v) => v[i] as f64,
        SweepGrid::Orientation(_) => s.geometry().z0(),
    }
}

type Points = Vec<(Scenario, DecoherenceResult, String, f64)>;

/// Engine results for every grid point (or the single scenario), in order.
fn evaluate(base: &Scenario, grid: Option<&SweepGrid>, id: &str) -> Result<Points, RunError> {
    let Some(grid) = grid else {
        let r = decoherence::compute(base)?;
        return Ok(vec![(base.clone(), r, id.to_string(), base.geometry().z0())]);
    };
    let points = decoherence::sweep(base, grid)?;
    let mut out = Vec::with_capacity(points.len());
    for p in points {
        let result = p.result.map_err(|e| {
            let label = grid_value_label(grid, p.index);
            match RunError::from(e) {
                RunError::Numerical(m) => RunError::Numerical(format!("{}={label}: {m}", grid.axis_label())),
                RunError::Usage(m) => RunError::Usage(format!("{}={label}: {m}", grid.axis_label())),
                other => other,
            }
        })?;
        let s = p.scenario.expect("computed points carry their scenario");
        let x = grid_abscissa(grid, p.index, &s);
        out.push((s, result, format!("{id}@{}={}", grid.axis_label(), grid_value_label(grid, p.index)), x));
    }
    Ok(out)
}

fn oracle_columns(row: &mut Row, s: &Scenario, cfg: &McConfig, err_est: f64) -> Result<(), RunError> {
    let est = oracle::mc_w_first_principles(s, cfg)?.total;
    let sigma = est.std_error.hypot(err_est);
    row.mc_value = Some(est.value);
    row.mc_stderr = Some(est.std_error);
    row.mc_verdict = Some(if (row.w_total - est.value).abs() <= VERDICT_SIGMAS * sigma { "agree" } else { "disagree" }.into());
    Ok(())
}

/// Everything `run` computes, without touching the filesystem beyond reading
/// the scenario.
pub fn execute(args: &RunArgs) -> Result<RunOutput, RunError> {
    let file = ScenarioFile::read(&args.scenario)?;
    file.validate()?;
    let raw = effective(&file.raw, args)?;
    let base = raw.clone().validate().map_err(|e| RunError::Usage(format!("after command-line overrides: {e}")))?;
    let id = scenario_id(&args.scenario);
    let grid = args.sweep.as_ref().map(|s| s.grid(args.log_axis)).transpose().map_err(RunError::Usage)?;
    if args.emit_plot_data && args.out.is_none() {
        return Err(RunError::Usage("--emit-plot-data needs --out".into()));
    }
    if args.workers == Some(0) {
        return Err(RunError::Usage("--workers must be at least 1".into()));
    }

    let points = evaluate(&base, grid.as_ref(), &id)?;
    let mut rows: Vec<Row> = points.iter().map(|(s, r, label, _)| Row::new(label.clone(), s, r)).collect();

    let mc = if args.oracle {
        let mut cfg = base.oracle().cloned().unwrap_or_default();
        cfg.workers = args.workers;
        Some(cfg)
    } else {
        None
    };
    if let Some(cfg) = &mc {
        for (row, (s, r, _, _)) in rows.iter_mut().zip(&points) {
            oracle_columns(row, s, cfg, r.err_est)?;
        }
    }

    let plot = if args.emit_plot_data { Some(plot_curves(&base, grid.as_ref(), &points, &id)?) } else { None };

    let reg = &points[0].1.regularization;
    let manifest = RunManifest {
        scenario_id: id,
        config_hash: config::config_hash(&raw),
        tool_version: TOOL_VERSION.into(),
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        regularization: RegularizationRecord {
            ramp: reg.ramp,
            k_max: reg.k_max,
            calibration: reg
                .calibration
                .as_ref()
                .map(|c| CalibrationRecord { factor: c.factor, provenance: c.provenance.into() }),
        },
        method: base.numerics().method.label().into(),
        sweep: args.sweep.as_ref().map(|s| s.to_string()),
        log_axis: args.log_axis,
        oracle: mc.as_ref().map(|c| OracleRecord { samples: c.samples, seed: c.seed }),
        columns: CSV_COLUMNS.iter().map(|c| c.to_string()).collect(),
    };
    Ok(RunOutput { rows, manifest, plot })
}

/// Visibility against the sweep abscissa (or `z0` for a single point) for
/// the parallel and perpendicular orientations.
fn plot_curves(base: &Scenario, grid: Option<&SweepGrid>, points: &Points, id: &str) -> Result<(String, Vec<Curve>), RunError> {
    let axis = match grid {
        Some(SweepGrid::Orientation(_)) | None => "z0",
        Some(g) => g.axis_label(),
    };
    let mut curves = Vec::new();
    for orientation in [Orientation::Parallel, Orientation::Perpendicular] {
        let pts: Vec<(f64, f64)> = match grid {
            Some(SweepGrid::Orientation(_)) => points
                .iter()
                .filter(|(s, ..)| s.geometry().orientation() == orientation)
                .map(|(_, r, _, x)| (*x, r.visibility))
                .collect(),
            _ if base.geometry().orientation() == orientation => points.iter().map(|(_, r, _, x)| (*x, r.visibility)).collect(),
            _ => {
                let mut raw = base.to_raw();
                raw.j_hat = orientation.canonical_direction().expect("symmetric orientation");
                let other = raw.validate().map_err(|e| RunError::Usage(e.to_string()))?;
                evaluate(&other, grid, id)?.iter().map(|(_, r, _, x)| (*x, r.visibility)).collect()
            }
        };
        if !pts.is_empty() {
            curves.push(Curve { name: orientation.label().into(), points: pts });
        }
    }
    Ok((axis.into(), curves))
}

pub fn write_csv<W: Write>(rows: &[Row], w: W) -> csv::Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(CSV_COLUMNS)?;
    for r in rows {
        out.write_record(r.csv_record())?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(rows: &[Row], mut w: W) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut w, rows)?;
    writeln!(w)
}

pub fn write_plot<W: Write>(axis: &str, curves: &[Curve], w: W) -> csv::Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(["curve", axis, "visibility"])?;
    for c in curves {
        for (x, y) in &c.points {
            out.write_record([c.name.clone(), format!("{x:e}"), format!("{y:e}")])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Rendered results table in the requested format.
pub fn render(rows: &[Row], format: Format) -> Vec<u8> {
    let mut buf = Vec::new();
    match format {
        Format::Csv => write_csv(rows, &mut buf).expect("writing to memory"),
        Format::Json => write_json(rows, &mut buf).expect("writing to memory"),
    }
    buf
}

/// `<out>.<suffix>` next to the output file.
pub fn companion(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(format!(".{suffix}"));
    out.with_file_name(name)
}

pub fn summary(rows: &[Row]) -> String {
    if let [r] = rows {
        return format!(
            "{}: W_vac={:.6e} W_boundary={:.6e} W_total={:.6e} visibility={:.9}",
            r.scenario_id, r.w_vac, r.w_boundary, r.w_total, r.visibility
        );
    }
    let range = |f: fn(&Row) -> f64| {
        let lo = rows.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = rows.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        format!("[{lo:.6e}, {hi:.6e}]")
    };
    let id = rows[0].scenario_id.split('@').next().unwrap_or_default();
    format!(
        "{id}: {} points, W_vac in {} W_boundary in {} W_total in {} visibility in {}",
        rows.len(),
        range(|r| r.w_vac),
        range(|r| r.w_boundary),
        range(|r| r.w_total),
        range(|r| r.visibility)
    )
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), RunError> {
    std::fs::write(path, bytes).map_err(|source| RunError::Output { path: path.display().to_string(), source })
}

/// Runs on a pool of `--workers` threads and writes the artifacts. Returns
/// the process exit code.
pub fn run(args: &RunArgs) -> i32 {
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(args.workers.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start workers: {e}");
            return 1;
        }
    };
    match pool.install(|| execute(args)).and_then(|out| emit(args, &out)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn emit(args: &RunArgs, out: &RunOutput) -> Result<(), RunError> {
    let table = render(&out.rows, args.format);
    let line = summary(&out.rows);
    match &args.out {
        Some(path) => {
            write_file(path, &table)?;
            let manifest = serde_json::to_vec_pretty(&out.manifest).expect("manifest serializes");
            write_file(&companion(path, "manifest.json"), &manifest)?;
            if let Some((axis, curves)) = &out.plot {
                let mut buf = Vec::new();
                write_plot(axis, curves, &mut buf).expect("writing to memory");
                write_file(&companion(path, "plot.csv"), &buf)?;
            }
            println!("{line}");
        }
        None => {
            std::io::stdout()
                .write_all(&table)
                .map_err(|source| RunError::Output { path: "<stdout>".into(), source })?;
            eprintln!("{line}");
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_spec_parsing() {
        assert_eq!(
            "z0=0.01:10:25".parse::<SweepSpec>().unwrap(),
            SweepSpec::Range { axis: Axis::Z0, start: 0.01, end: 10.0, points: 25 }
        );
        assert_eq!(
            "orientation=parallel,perpendicular".parse::<SweepSpec>().unwrap(),
            SweepSpec::Orientations(vec![Orientation::Parallel, Orientation::Perpendicular])
        );
        assert!("z0=1:2".parse::<SweepSpec>().is_err());
        assert!("x=1:2:3".parse::<SweepSpec>().is_err());
        assert!("z0=1:2:0".parse::<SweepSpec>().is_err());
    }

    #[test]
    fn log_grid_hits_both_ends() {
        let spec: SweepSpec = "z0=0.01:10:25".parse().unwrap();
        let SweepGrid::Z0(v) = spec.grid(true).unwrap() else { panic!() };
        assert_eq!(v.len(), 25);
        assert!((v[0] - 0.01).abs() < 1e-15 && (v[24] - 10.0).abs() < 1e-12);
        assert!((v[1] / v[0] - v[24] / v[23]).abs() < 1e-12);
        assert!(spec.grid(false).is_ok());
        assert!("z0=0:1:3".parse::<SweepSpec>().unwrap().grid(true).is_err());
    }

    #[test]
    fn count_grid_rejects_repeats() {
        let SweepGrid::Count(v) = "N=1:8:4".parse::<SweepSpec>().unwrap().grid(true).unwrap() else { panic!() };
        assert_eq!(v, vec![1, 2, 4, 8]);
        assert!("N=1:2:5".parse::<SweepSpec>().unwrap().grid(false).is_err());
    }

    #[test]
    fn companion_paths() {
        assert_eq!(companion(Path::new("/tmp/r.csv"), "plot.csv"), PathBuf::from("/tmp/r.csv.plot.csv"));
    }

    #[test]
    fn empty_oracle_cells() {
        let row = Row {
            scenario_id: "a,b".into(),
            orientation: "parallel".into(),
            z0: None,
            method: "dipole-approx".into(),
            w_vac: 1.0,
            w_boundary: 0.0,
            w_total: 1.0,
            visibility: (-1f64).exp(),
            emission_prob_equiv: 0.5,
            err_est: 0.0,
            mc_value: None,
            mc_stderr: None,
            mc_verdict: None,
        };
        let text = String::from_utf8(render(&[row], Format::Csv)).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_COLUMNS.join(","));
        assert!(lines[1].starts_with("\"a,b\",parallel,,dipole-approx,1e0,0e0,1e0,"));
        assert!(lines[1].ends_with(",,,"));
    }
}
