//! Command-line front end: parse configs and scenarios, run transient
//! simulations, pole analyses, and design-space sweeps, and emit CSV/JSON
//! artifacts.
//!
//! Exit codes: 0 success, 1 usage, 2 parse/IO, 3 model error or divergence.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use dldo::analysis::{
    closed_loop_poles, max_stable_gain, pole_locus_sweep, DefaultMapping, SmallSignalParams,
    SweepAxis, SweepMapping,
};
use dldo::config::{parse_config, parse_scenario, parse_si, FileConfig, LoadKind};
use dldo::engine::{measure, simulate, DldoConfig, Scenario, Waveform};
use dldo::io::{
    metrics_json, read_waveform_csv, write_pole_csv, write_sweep_csv, write_waveform_csv, SweepRow,
};
use dldo::plant::LoadModel;
use dldo::DldoError;

/// Regulation target assumed by `analyze` when no scenario supplies one.
const ANALYZE_DEFAULT_V_REF: f64 = 1.7;

#[derive(Parser)]
#[command(name = "dldo", version, about = "Dual-loop digital LDO simulator and stability analyzer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    #[value(name = "f_clk")]
    FClk,
    #[value(name = "c_load")]
    CLoad,
    #[value(name = "i_load")]
    ILoad,
}

impl From<AxisArg> for SweepAxis {
    fn from(a: AxisArg) -> SweepAxis {
        match a {
            AxisArg::FClk => SweepAxis::FClk,
            AxisArg::CLoad => SweepAxis::CLoad,
            AxisArg::ILoad => SweepAxis::ILoad,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a transient and write waveform.csv + metrics.json into --out.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Override both stream seeds.
        #[arg(long)]
        seed: Option<u64>,
        /// Settling band half-width (SI literal, e.g. 10m). Defaults to
        /// twice the one-fine-step voltage move per clock.
        #[arg(long)]
        band: Option<String>,
    },
    /// Closed-loop poles of the configured [analysis] point, or a locus
    /// along --axis/--grid; writes the pole CSV to --out.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        axis: Option<AxisArg>,
        /// Grid spec start:stop:points[:lin|:log] with SI literals.
        #[arg(long)]
        grid: Option<String>,
        /// Optional scenario; supplies v_ref for the load mapping.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// One transient per grid point plus a small-signal verdict, aggregated
    /// into a sweep CSV at --out.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        axis: AxisArg,
        /// Grid spec start:stop:points[:lin|:log] with SI literals.
        #[arg(long)]
        grid: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        band: Option<String>,
    },
    /// Re-measure an existing waveform CSV; prints metrics JSON or writes
    /// it to --out.
    Metrics {
        /// Path to a waveform.csv produced by `simulate`.
        waveform: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        band: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum CliError {
    Usage(String),
    Parse(String),
    Model(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Model(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Parse(m) | CliError::Model(m) => m,
        }
    }
}

impl From<DldoError> for CliError {
    fn from(e: DldoError) -> Self {
        match e {
            DldoError::Parse(_) | DldoError::Io(_) => CliError::Parse(e.to_string()),
            other => CliError::Model(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))
}

fn load_config(path: &Path) -> Result<FileConfig, CliError> {
    let text = read_file(path)?;
    parse_config(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn load_scenario(path: &Path, kind: LoadKind) -> Result<Scenario, CliError> {
    let text = read_file(path)?;
    parse_scenario(&text, kind).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn parse_band(flag: &Option<String>, cfg: &DldoConfig) -> Result<f64, CliError> {
    match flag {
        Some(text) => {
            let band = parse_si(text).map_err(|e| CliError::Usage(format!("--band: {e}")))?;
            if band <= 0.0 {
                return Err(CliError::Usage("--band must be positive".into()));
            }
            Ok(band)
        }
        None => Ok(cfg.default_settling_band()),
    }
}

fn apply_seed(cfg: &mut DldoConfig, seed: Option<u64>) {
    if let Some(s) = seed {
        cfg.comparator.seed = s;
        cfg.clock.seed = s.wrapping_add(1);
    }
}

/// Grid spec `start:stop:points[:lin|:log]`.
fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let usage = |m: String| CliError::Usage(format!("--grid '{spec}': {m}"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() < 3 || parts.len() > 4 {
        return Err(usage("expected start:stop:points[:lin|:log]".into()));
    }
    let start = parse_si(parts[0]).map_err(usage)?;
    let stop = parse_si(parts[1]).map_err(usage)?;
    let points: usize = parts[2].parse().map_err(|_| usage("bad point count".into()))?;
    let log = match parts.get(3) {
        None | Some(&"lin") => false,
        Some(&"log") => true,
        Some(other) => return Err(usage(format!("unknown spacing '{other}'"))),
    };
    if points == 0 {
        return Err(usage("point count must be >= 1".into()));
    }
    if log && (start <= 0.0 || stop <= 0.0) {
        return Err(usage("log spacing needs positive endpoints".into()));
    }
    if points == 1 {
        return Ok(vec![start]);
    }
    let n = (points - 1) as f64;
    Ok((0..points)
        .map(|k| {
            let frac = k as f64 / n;
            if log {
                (start.ln() + frac * (stop.ln() - start.ln())).exp()
            } else {
                start + frac * (stop - start)
            }
        })
        .collect())
}

/// Base load current demanded at the regulation point.
fn base_demand(model: &LoadModel, v_ref: f64) -> f64 {
    match model {
        LoadModel::ConstantCurrent { i_load } => *i_load,
        LoadModel::Resistive { r_load } => v_ref / r_load,
    }
}

fn default_mapping(cfg: &DldoConfig, v_ref: f64) -> DefaultMapping {
    DefaultMapping {
        v_ref,
        i_load: base_demand(&cfg.plant.load_model, v_ref),
        c_load: cfg.plant.c_load,
        i_unit: cfg.plant.i_unit_fine,
    }
}

/// Small-signal base point: the [analysis] section, or parameters derived
/// from the plant through the default mapping.
fn base_params(file_cfg: &FileConfig, v_ref: f64) -> SmallSignalParams {
    file_cfg.analysis.unwrap_or_else(|| {
        let m = default_mapping(&file_cfg.dldo, v_ref);
        let r = m.r_load();
        SmallSignalParams {
            g_c: 1.0,
            g_out: m.i_unit * r,
            omega_out: 1.0 / (r * m.c_load),
            f_clk: file_cfg.dldo.clock.f_clk,
        }
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, scenario, out, seed, band } => {
            cmd_simulate(&config, &scenario, &out, seed, &band)
        }
        Command::Analyze { config, out, axis, grid, scenario } => {
            cmd_analyze(&config, &out, axis, &grid, &scenario)
        }
        Command::Sweep { config, scenario, axis, grid, out, seed, band } => {
            cmd_sweep(&config, &scenario, axis, &grid, &out, seed, &band)
        }
        Command::Metrics { waveform, config, scenario, band, out } => {
            cmd_metrics(&waveform, &config, &scenario, &band, &out)
        }
    }
}

fn write_artifacts(
    out_dir: &Path,
    waveform: &Waveform,
    metrics: &Option<dldo::engine::TransientMetrics>,
) -> Result<(), CliError> {
    fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Parse(format!("cannot create {}: {e}", out_dir.display())))?;
    let wave_path = out_dir.join("waveform.csv");
    let mut file = fs::File::create(&wave_path)
        .map_err(|e| CliError::Parse(format!("cannot write {}: {e}", wave_path.display())))?;
    write_waveform_csv(&mut file, waveform)?;
    let metrics_path = out_dir.join("metrics.json");
    fs::write(&metrics_path, metrics_json(metrics))
        .map_err(|e| CliError::Parse(format!("cannot write {}: {e}", metrics_path.display())))?;
    Ok(())
}

fn cmd_simulate(
    config: &Path,
    scenario: &Path,
    out: &Path,
    seed: Option<u64>,
    band: &Option<String>,
) -> Result<(), CliError> {
    let file_cfg = load_config(config)?;
    let mut cfg = file_cfg.dldo;
    apply_seed(&mut cfg, seed);
    let scenario = load_scenario(scenario, LoadKind::of(&cfg.plant.load_model))?;
    let band = parse_band(band, &cfg)?;

    let waveform = match simulate(&cfg, &scenario) {
        Ok(w) => w,
        Err(DldoError::Diverged { at, waveform }) => {
            // keep the partial trace on disk for diagnosis
            write_artifacts(out, &waveform, &None)?;
            return Err(CliError::Model(format!("simulation diverged at t = {at:.6e} s")));
        }
        Err(e) => return Err(e.into()),
    };
    let metrics = measure(&waveform, &scenario, band, &cfg);
    write_artifacts(out, &waveform, &metrics)?;
    println!(
        "simulate: {} samples over {:.3e} s -> {}",
        waveform.samples.len(),
        scenario.duration,
        out.display()
    );
    Ok(())
}

fn cmd_analyze(
    config: &Path,
    out: &Path,
    axis: Option<AxisArg>,
    grid: &Option<String>,
    scenario: &Option<PathBuf>,
) -> Result<(), CliError> {
    let file_cfg = load_config(config)?;
    let params = file_cfg
        .analysis
        .ok_or_else(|| CliError::Parse(format!("{}: missing [analysis] section", config.display())))?;
    params.validate()?;

    let v_ref = match scenario {
        Some(path) => {
            load_scenario(path, LoadKind::of(&file_cfg.dldo.plant.load_model))?.v_ref
        }
        None => ANALYZE_DEFAULT_V_REF,
    };
    let mapping = default_mapping(&file_cfg.dldo, v_ref);

    let (axis, grid) = match (axis, grid) {
        (None, None) => (SweepAxis::FClk, vec![params.f_clk]),
        (Some(a), Some(g)) => (a.into(), parse_grid(g)?),
        _ => {
            return Err(CliError::Usage(
                "--axis and --grid must be given together".into(),
            ))
        }
    };

    let points = pole_locus_sweep(&params, axis, &grid, &mapping as &dyn SweepMapping);
    let mut file = fs::File::create(out)
        .map_err(|e| CliError::Parse(format!("cannot write {}: {e}", out.display())))?;
    write_pole_csv(&mut file, &points)?;

    let p = params.pole();
    let base = closed_loop_poles(&params);
    println!(
        "analyze: {} point(s) along {} -> {}",
        points.len(),
        axis.name(),
        out.display()
    );
    println!(
        "base point: p = {:.6}, loop gain = {:.6}, max stable gain = {:.6}, max |pole| = {:.6}, stable = {}",
        p,
        params.loop_gain(),
        max_stable_gain(p),
        base.max_magnitude,
        base.stable
    );
    Ok(())
}

fn cmd_sweep(
    config: &Path,
    scenario: &Path,
    axis: AxisArg,
    grid: &str,
    out: &Path,
    seed: Option<u64>,
    band: &Option<String>,
) -> Result<(), CliError> {
    let file_cfg = load_config(config)?;
    let mut cfg = file_cfg.dldo;
    apply_seed(&mut cfg, seed);
    let scenario = load_scenario(scenario, LoadKind::of(&cfg.plant.load_model))?;
    let band = parse_band(band, &cfg)?;
    let grid = parse_grid(grid)?;
    let axis: SweepAxis = axis.into();
    let params = base_params(&FileConfig { dldo: cfg, analysis: file_cfg.analysis }, scenario.v_ref);
    let mapping = default_mapping(&cfg, scenario.v_ref);

    let rows: Vec<SweepRow> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &value)| {
            let mut point_cfg = cfg;
            point_cfg.comparator.seed = cfg.comparator.seed.wrapping_add(i as u64);
            point_cfg.clock.seed = cfg.clock.seed.wrapping_add(i as u64);
            let applied = apply_axis(&mut point_cfg, axis, value, scenario.v_ref);
            let ss = mapping.map(&params, axis, value).map(|p| closed_loop_poles(&p));
            let (ss_max_mag, ss_stable) = match &ss {
                Ok(r) => (Some(r.max_magnitude), Some(r.stable)),
                Err(_) => (None, None),
            };
            let (status, metrics, td_stable) = match applied
                .and_then(|_| simulate(&point_cfg, &scenario))
            {
                Ok(w) => {
                    let m = measure(&w, &scenario, band, &point_cfg);
                    let settled = m.as_ref().is_some_and(|m| m.settling_time.is_some());
                    ("ok".to_string(), m, Some(settled))
                }
                Err(e) => (format!("error: {e}"), None, None),
            };
            SweepRow { axis_value: value, status, metrics, td_stable, ss_max_mag, ss_stable }
        })
        .collect();

    let mut file = fs::File::create(out)
        .map_err(|e| CliError::Parse(format!("cannot write {}: {e}", out.display())))?;
    write_sweep_csv(&mut file, &rows)?;
    println!("sweep: {} point(s) along {} -> {}", rows.len(), axis.name(), out.display());
    Ok(())
}

fn apply_axis(
    cfg: &mut DldoConfig,
    axis: SweepAxis,
    value: f64,
    v_ref: f64,
) -> Result<(), DldoError> {
    if !(value.is_finite() && value > 0.0) {
        return Err(DldoError::InvalidConfig(format!(
            "sweep value must be positive and finite, got {value}"
        )));
    }
    match axis {
        SweepAxis::FClk => cfg.clock.f_clk = value,
        SweepAxis::CLoad => cfg.plant.c_load = value,
        SweepAxis::ILoad => {
            cfg.plant.load_model = match cfg.plant.load_model {
                LoadModel::ConstantCurrent { .. } => LoadModel::ConstantCurrent { i_load: value },
                // a load-current axis on a resistive plant sets the
                // resistance drawing that current at the regulation point
                LoadModel::Resistive { .. } => LoadModel::Resistive { r_load: v_ref / value },
            };
        }
    }
    Ok(())
}

fn cmd_metrics(
    waveform: &Path,
    config: &Path,
    scenario: &Path,
    band: &Option<String>,
    out: &Option<PathBuf>,
) -> Result<(), CliError> {
    let file_cfg = load_config(config)?;
    let cfg = file_cfg.dldo;
    let scenario = load_scenario(scenario, LoadKind::of(&cfg.plant.load_model))?;
    let band = parse_band(band, &cfg)?;
    let text = read_file(waveform)?;
    let parsed = read_waveform_csv(text.as_bytes())
        .map_err(|e| CliError::Parse(format!("{}: {e}", waveform.display())))?;
    let metrics = measure(&parsed, &scenario, band, &cfg);
    let json = metrics_json(&metrics);
    match out {
        Some(path) => fs::write(path, json)
            .map_err(|e| CliError::Parse(format!("cannot write {}: {e}", path.display())))?,
        None => println!("{json}"),
    }
    Ok(())
}
