//! Declarative experiment runner.
//!
//! Each subcommand reads an optional JSON config (flags override file
//! keys), runs one experiment, and writes CSV data files, JSON reports,
//! and a plain-text manifest into the output directory. Every result file
//! embeds the fully resolved config, runs are seed-free and deterministic
//! (fixed float formatting, fixed iteration order, worker count never
//! affects values), and exit codes distinguish configuration errors (1)
//! from numerical-validation failures (2).

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use crate::analysis::{
    self, analytic_switch_seed, default_final_time, gate_report, momentum_read_time,
    momentum_spectrum, tune_switch_time, GateRunReport, TuneObjective,
};
use crate::analytic;
use crate::assembly::{
    build_gate_circuit, builtin_widget, load_widget_file, GateKind, RoleKind, WalkGraph,
};
use crate::error::{QslideError, Result};
use crate::jacobi::{build_chain, eigendecompose, krawtchouk_chain, ChainKind};
use crate::propagate::{evolve, make_switch_schedule, trajectory_csv, PacketState};
use crate::scatter;

#[derive(Parser)]
#[command(
    name = "qslide",
    version,
    about = "Wave-packet launching and scattering-gate experiments on engineered spin chains"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON experiment config; command-line flags override file keys.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory for result files (default: results).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads for sweeps (default: one per core). Results are
    /// identical for any worker count.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    /// Suppress the human-readable summary on stdout.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum GateArg {
    Ub,
    Uc,
}

impl From<GateArg> for GateKind {
    fn from(g: GateArg) -> GateKind {
        match g {
            GateArg::Ub => GateKind::Ub,
            GateArg::Uc => GateKind::Uc,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Packet momentum as a function of switch-off time, per field slope.
    MomentumMap,
    /// Evolve one gate circuit, snapshot it, and score it against the
    /// widget-free reference run.
    GateRun {
        /// Which gate circuit to run.
        #[arg(long, value_enum)]
        gate: Option<GateArg>,
        /// Slide length (sites on the launch chain).
        #[arg(long)]
        slide_len: Option<usize>,
        /// Fixed switch-off time in place of the default 0.226 pi.
        #[arg(long)]
        t_off: Option<f64>,
        /// Tune the switch-off time for peak transmission instead.
        #[arg(long, conflicts_with = "t_off")]
        tune: bool,
    },
    /// Transmission and fidelity across a ladder of slide lengths.
    FidelitySweep {
        #[arg(long, value_enum)]
        gate: Option<GateArg>,
        /// Truncate the ladder at this slide length.
        #[arg(long)]
        max_len: Option<usize>,
    },
    /// Plane-wave reflection/transmission table for one widget.
    ScatterSweep {
        /// Builtin widget name (ub, uc) or a description file path.
        #[arg(long)]
        widget: Option<String>,
    },
    /// Closed-form-vs-numerics oracle suite; fails (exit 2) on any
    /// tolerance violation.
    ValidateAnalytic,
}

fn d_a() -> f64 {
    -2.0
}
fn d_slide_len() -> usize {
    200
}
fn d_gate() -> GateKind {
    GateKind::Ub
}
fn d_t_off() -> SwitchTime {
    SwitchTime::Fixed(0.226 * PI)
}
fn d_a_values() -> Vec<f64> {
    vec![-4.0, -2.0, 0.0, 2.0, 4.0]
}
fn d_t_points() -> usize {
    400
}
fn d_k_points() -> usize {
    199
}
fn d_widget() -> String {
    "ub".to_string()
}
fn d_ladder() -> Vec<usize> {
    (1..=10).map(|i| 200 * i).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentumMapConfig {
    #[serde(default = "d_a_values")]
    pub a_values: Vec<f64>,
    /// Time samples per curve, spread over the open chain period.
    #[serde(default = "d_t_points")]
    pub t_points: usize,
    #[serde(default)]
    pub out_dir: Option<String>,
}

impl Default for MomentumMapConfig {
    fn default() -> Self {
        MomentumMapConfig {
            a_values: d_a_values(),
            t_points: d_t_points(),
            out_dir: None,
        }
    }
}

/// Switch-off time: a number fixes it, the string "auto" tunes it for
/// peak transmission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SwitchTime {
    Fixed(f64),
    Auto(AutoKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoKeyword {
    Auto,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateRunConfig {
    #[serde(default = "d_gate")]
    pub gate: GateKind,
    #[serde(default = "d_a")]
    pub a: f64,
    #[serde(default = "d_slide_len")]
    pub slide_len: usize,
    /// Default: 151 plus 25 sites per 200 slide sites beyond 200.
    #[serde(default)]
    pub input_len: Option<usize>,
    /// Default: 152 plus the same growth rule.
    #[serde(default)]
    pub output_len: Option<usize>,
    /// Default 0.226 pi, the tuned value for the default geometry.
    #[serde(default = "d_t_off")]
    pub t_off: SwitchTime,
    /// Absolute snapshot times; omitted means switch, momentum-read, and
    /// final (centroid at mid output wire).
    #[serde(default)]
    pub snapshot_times: Option<Vec<f64>>,
    /// Grid points for the automatic t_off search.
    #[serde(default)]
    pub tune_grid: Option<usize>,
    #[serde(default)]
    pub out_dir: Option<String>,
}

impl Default for GateRunConfig {
    fn default() -> Self {
        GateRunConfig {
            gate: d_gate(),
            a: d_a(),
            slide_len: d_slide_len(),
            input_len: None,
            output_len: None,
            t_off: d_t_off(),
            snapshot_times: None,
            tune_grid: None,
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FidelitySweepConfig {
    #[serde(default = "d_gate")]
    pub gate: GateKind,
    #[serde(default = "d_a")]
    pub a: f64,
    #[serde(default = "d_ladder")]
    pub slide_lengths: Vec<usize>,
    #[serde(default)]
    pub tune_grid: Option<usize>,
    #[serde(default)]
    pub out_dir: Option<String>,
}

impl Default for FidelitySweepConfig {
    fn default() -> Self {
        FidelitySweepConfig {
            gate: d_gate(),
            a: d_a(),
            slide_lengths: d_ladder(),
            tune_grid: None,
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScatterSweepConfig {
    /// Builtin widget name (ub, uc) or a description file path.
    #[serde(default = "d_widget")]
    pub widget: String,
    /// Grid points, evenly spaced strictly inside (-pi, 0). The default
    /// 199 puts a point exactly at k = -pi/4.
    #[serde(default = "d_k_points")]
    pub k_points: usize,
    #[serde(default)]
    pub out_dir: Option<String>,
}

impl Default for ScatterSweepConfig {
    fn default() -> Self {
        ScatterSweepConfig {
            widget: d_widget(),
            k_points: d_k_points(),
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ValidateAnalyticConfig {
    #[serde(default)]
    pub out_dir: Option<String>,
}

/// One experiment, self-describing: the `experiment` tag selects the
/// subcommand the config belongs to.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ExperimentConfig {
    MomentumMap(MomentumMapConfig),
    GateRun(GateRunConfig),
    FidelitySweep(FidelitySweepConfig),
    ScatterSweep(ScatterSweepConfig),
    ValidateAnalytic(ValidateAnalyticConfig),
}

impl ExperimentConfig {
    fn experiment_name(&self) -> &'static str {
        match self {
            ExperimentConfig::MomentumMap(_) => "momentum_map",
            ExperimentConfig::GateRun(_) => "gate_run",
            ExperimentConfig::FidelitySweep(_) => "fidelity_sweep",
            ExperimentConfig::ScatterSweep(_) => "scatter_sweep",
            ExperimentConfig::ValidateAnalytic(_) => "validate_analytic",
        }
    }
}

/// Output directory handle: collects written file names for the manifest.
struct RunDir {
    dir: PathBuf,
    files: Vec<String>,
    quiet: bool,
}

impl RunDir {
    fn new(dir: &Path, quiet: bool) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(RunDir {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            quiet,
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.dir.join(name), contents)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn note(&self, msg: &str) {
        if !self.quiet {
            println!("{msg}");
        }
    }

    fn finish(&self, experiment: &str, status: &str) -> Result<()> {
        let mut m = format!("qslide {experiment}\nstatus {status}\n");
        for f in &self.files {
            m.push_str(&format!("file {f}\n"));
        }
        fs::write(self.dir.join("manifest.txt"), m)?;
        Ok(())
    }
}

fn config_json(config: &ExperimentConfig) -> String {
    serde_json::to_string(config).expect("config serializes")
}

fn csv_head(config: &ExperimentConfig, columns: &str) -> String {
    format!("# config {}\n{columns}\n", config_json(config))
}

/// Wire lengths for a slide: 151/152 at length 200, growing by 25 sites
/// per additional 200 slide sites.
pub fn default_wire_lengths(slide_len: usize) -> (usize, usize) {
    let extra = ((slide_len as f64 - 200.0) / 200.0 * 25.0).round() as i64;
    let input = (151 + extra).max(16) as usize;
    let output = (152 + extra).max(16) as usize;
    (input, output)
}

/// Automatic t_off search range bracketing the analytic momentum seed.
fn auto_tune_range(a: f64) -> Result<(f64, f64)> {
    let seed = analytic_switch_seed(a).ok_or_else(|| {
        QslideError::Config(
            "launch momentum -pi/4 needs a negative field slope; give an explicit t_off".into(),
        )
    })?;
    let b = analytic::period_scale(a);
    let hi = (1.25 * seed).min(1.999 * b * PI);
    Ok((0.85 * seed, hi))
}

fn builtin_name(gate: GateKind) -> Result<&'static str> {
    match gate {
        GateKind::Ub => Ok("ub"),
        GateKind::Uc => Ok("uc"),
        GateKind::Reference => Err(QslideError::Config(
            "gate must be ub or uc; the reference run is produced automatically".into(),
        )),
    }
}

fn ideal_gate_for(gate: GateKind) -> [[num_complex::Complex64; 2]; 2] {
    match gate {
        GateKind::Uc => analysis::ideal_gate_c(),
        _ => analysis::ideal_gate_b(),
    }
}

struct GateSetup {
    graph: WalkGraph,
    reference: WalkGraph,
    input_len: usize,
    output_len: usize,
}

fn build_gate_setup(
    gate: GateKind,
    a: f64,
    slide_len: usize,
    input_len: Option<usize>,
    output_len: Option<usize>,
) -> Result<GateSetup> {
    let widget = builtin_widget(builtin_name(gate)?)?;
    let (di, do_) = default_wire_lengths(slide_len);
    let input_len = input_len.unwrap_or(di);
    let output_len = output_len.unwrap_or(do_);
    let graph = build_gate_circuit(gate, slide_len, input_len, output_len, a, Some(&widget))?;
    let reference = build_gate_circuit(
        GateKind::Reference,
        slide_len,
        input_len,
        output_len,
        a,
        Some(&widget),
    )?;
    Ok(GateSetup {
        graph,
        reference,
        input_len,
        output_len,
    })
}

fn resolve_t_off(cfg_t_off: SwitchTime, graph: &WalkGraph, a: f64, grid: usize) -> Result<f64> {
    match cfg_t_off {
        SwitchTime::Fixed(t) => Ok(t),
        SwitchTime::Auto(_) => {
            tune_switch_time(graph, TuneObjective::Transmission, auto_tune_range(a)?, grid)
        }
    }
}

fn run_momentum_map(cfg: MomentumMapConfig, rd: &mut RunDir) -> Result<()> {
    if cfg.t_points < 2 {
        return Err(QslideError::Config(format!(
            "t_points must be at least 2, got {}",
            cfg.t_points
        )));
    }
    let config = ExperimentConfig::MomentumMap(cfg.clone());
    let mut csv = csv_head(&config, "a,t,theta");
    for &a in &cfg.a_values {
        if !a.is_finite() {
            return Err(QslideError::Config(format!("field slope {a} is not finite")));
        }
        let b = analytic::period_scale(a);
        for j in 1..=cfg.t_points {
            let t = 2.0 * b * PI * j as f64 / (cfg.t_points + 1) as f64;
            let theta = analytic::momentum_theta(t, a)?;
            csv.push_str(&format!("{a:.16e},{t:.16e},{theta:.16e}\n"));
        }
    }
    rd.write("momentum_map.csv", &csv)?;
    rd.note(&format!(
        "momentum-map: {} slopes x {} times -> momentum_map.csv",
        cfg.a_values.len(),
        cfg.t_points
    ));
    Ok(())
}

#[derive(Serialize)]
struct GateRunRecord {
    config: ExperimentConfig,
    t_off: f64,
    snapshot_times: Vec<f64>,
    report: GateRunReport,
}

fn run_gate_run(cfg: GateRunConfig, rd: &mut RunDir) -> Result<()> {
    builtin_name(cfg.gate)?;
    let setup = build_gate_setup(cfg.gate, cfg.a, cfg.slide_len, cfg.input_len, cfg.output_len)?;
    let g = &setup.graph;
    let t_off = resolve_t_off(cfg.t_off, g, cfg.a, cfg.tune_grid.unwrap_or(12))?;
    let t_final = default_final_time(g, t_off)?;

    let mut samples = match &cfg.snapshot_times {
        Some(times) => times.clone(),
        None => vec![t_off, momentum_read_time(g, t_off)?, t_final],
    };
    if !samples.iter().any(|&s| (s - t_final).abs() < 1e-12) {
        samples.push(t_final);
    }
    samples.sort_by(|x, y| x.partial_cmp(y).expect("snapshot time NaN"));
    samples.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    let t_total = *samples.last().expect("non-empty samples");

    let resolved = ExperimentConfig::GateRun(GateRunConfig {
        input_len: Some(setup.input_len),
        output_len: Some(setup.output_len),
        t_off: SwitchTime::Fixed(t_off),
        snapshot_times: Some(samples.clone()),
        ..cfg.clone()
    });

    let schedule = make_switch_schedule(g, t_off, t_total, &samples)?;
    let initial = PacketState::delta(g.n_sites, 0);
    let states = evolve(&schedule, &initial)?;
    let ref_schedule = make_switch_schedule(&setup.reference, t_off, t_total, &samples)?;
    let ref_initial = PacketState::delta(setup.reference.n_sites, 0);
    let ref_states = evolve(&ref_schedule, &ref_initial)?;

    let mut traj = csv_head(&resolved, "");
    traj.truncate(traj.len() - 1);
    traj.push_str(&trajectory_csv(&states));
    rd.write("trajectory.csv", &traj)?;
    let mut ref_traj = csv_head(&resolved, "");
    ref_traj.truncate(ref_traj.len() - 1);
    ref_traj.push_str(&trajectory_csv(&ref_states));
    rd.write("reference_trajectory.csv", &ref_traj)?;

    let mut windows: Vec<(String, Vec<usize>)> = vec![(
        "input0".to_string(),
        g.role_range(RoleKind::InputWire, Some(0)),
    )];
    for rail in [0u8, 1] {
        let range = g.role_range(RoleKind::OutputWire, Some(rail));
        if !range.is_empty() {
            windows.push((format!("output{rail}"), range));
        }
    }
    for (i, state) in states.iter().enumerate() {
        for (name, range) in &windows {
            let spec = momentum_spectrum(state, range)?;
            let body = spec.to_csv();
            let contents = format!(
                "# config {}\n# t {:.16e}\n# window {name}\n{body}",
                config_json(&resolved),
                state.time
            );
            rd.write(&format!("momentum_{name}_s{i}.csv"), &contents)?;
        }
    }

    let report = gate_report(
        &states,
        g,
        &ref_states,
        &setup.reference,
        ideal_gate_for(cfg.gate),
    )?;
    let record = GateRunRecord {
        config: resolved,
        t_off,
        snapshot_times: samples.clone(),
        report,
    };
    rd.write(
        "report.json",
        &format!("{}\n", serde_json::to_string_pretty(&record).expect("report")),
    )?;

    let r = &record.report;
    rd.note(&format!(
        "gate-run {}: {} sites, t_off {:.4} ({:.4} pi), transmission {:.4}, fidelity {:.4}",
        cfg.gate,
        g.n_sites,
        t_off,
        t_off / PI,
        r.transmission,
        r.reference_overlap_fidelity
    ));
    if let Some(pk) = r.peak_momentum_at_switch {
        rd.note(&format!(
            "gate-run {}: input-wire momentum peak {:.4} pi",
            cfg.gate,
            pk / PI
        ));
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepRow {
    slide_len: usize,
    input_len: usize,
    output_len: usize,
    t_off: f64,
    report: GateRunReport,
}

fn sweep_point(gate: GateKind, a: f64, slide_len: usize, grid: usize) -> Result<SweepRow> {
    let setup = build_gate_setup(gate, a, slide_len, None, None)?;
    let g = &setup.graph;
    let t_off = tune_switch_time(g, TuneObjective::Transmission, auto_tune_range(a)?, grid)?;
    let t_final = default_final_time(g, t_off)?;
    let samples = [t_final];
    let schedule = make_switch_schedule(g, t_off, t_final, &samples)?;
    let states = evolve(&schedule, &PacketState::delta(g.n_sites, 0))?;
    let ref_schedule = make_switch_schedule(&setup.reference, t_off, t_final, &samples)?;
    let ref_states = evolve(&ref_schedule, &PacketState::delta(setup.reference.n_sites, 0))?;
    let report = gate_report(&states, g, &ref_states, &setup.reference, ideal_gate_for(gate))?;
    Ok(SweepRow {
        slide_len,
        input_len: setup.input_len,
        output_len: setup.output_len,
        t_off,
        report,
    })
}

#[derive(Serialize)]
struct SweepRecord {
    config: ExperimentConfig,
    rows: Vec<SweepRow>,
}

fn run_fidelity_sweep(cfg: FidelitySweepConfig, rd: &mut RunDir) -> Result<()> {
    builtin_name(cfg.gate)?;
    if cfg.slide_lengths.is_empty() {
        return Err(QslideError::Config("empty slide-length ladder".into()));
    }
    let config = ExperimentConfig::FidelitySweep(cfg.clone());
    let grid = cfg.tune_grid.unwrap_or(10);
    let results: Vec<Result<SweepRow>> = cfg
        .slide_lengths
        .par_iter()
        .map(|&l| sweep_point(cfg.gate, cfg.a, l, grid))
        .collect();

    let mut csv = csv_head(
        &config,
        "slide_len,input_len,output_len,t_off,transmission,reference_overlap_fidelity",
    );
    let mut rows = Vec::new();
    let mut failure = None;
    for result in results {
        match result {
            Ok(row) => {
                csv.push_str(&format!(
                    "{},{},{},{:.16e},{:.16e},{:.16e}\n",
                    row.slide_len,
                    row.input_len,
                    row.output_len,
                    row.t_off,
                    row.report.transmission,
                    row.report.reference_overlap_fidelity
                ));
                rd.note(&format!(
                    "fidelity-sweep {}: len {} t_off {:.4} pi transmission {:.4} fidelity {:.4}",
                    cfg.gate,
                    row.slide_len,
                    row.t_off / PI,
                    row.report.transmission,
                    row.report.reference_overlap_fidelity
                ));
                rows.push(row);
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    rd.write("fidelity_sweep.csv", &csv)?;
    let record = SweepRecord { config, rows };
    rd.write(
        "fidelity_sweep.json",
        &format!("{}\n", serde_json::to_string_pretty(&record).expect("record")),
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn run_scatter_sweep(cfg: ScatterSweepConfig, rd: &mut RunDir) -> Result<()> {
    if cfg.k_points == 0 {
        return Err(QslideError::Config("k_points must be positive".into()));
    }
    let widget = match cfg.widget.as_str() {
        "ub" | "uc" => builtin_widget(&cfg.widget)?,
        path => load_widget_file(Path::new(path))?,
    };
    let config = ExperimentConfig::ScatterSweep(cfg.clone());
    let ks: Vec<f64> = (1..=cfg.k_points)
        .map(|j| -PI + PI * j as f64 / (cfg.k_points + 1) as f64)
        .collect();
    let solutions: Vec<Result<scatter::ScatterSolution>> = ks
        .par_iter()
        .map(|&k| scatter::solve_plane_wave(&widget, k))
        .collect();

    let n_in = widget.input_ports().len();
    let n_out = widget.output_ports().len();
    let mut columns = String::from("k");
    for j in 0..n_in {
        columns.push_str(&format!(",r2_in{j},phase_in{j}"));
    }
    for j in 0..n_out {
        columns.push_str(&format!(",t2_out{j},phase_out{j}"));
    }
    columns.push_str(",flux");
    let mut csv = csv_head(&config, &columns);

    let mut fatal = None;
    for (k, solution) in ks.iter().zip(solutions) {
        match solution {
            Ok(sol) => {
                csv.push_str(&format!("{k:.16e}"));
                for r in &sol.reflection {
                    csv.push_str(&format!(",{:.16e},{:.16e}", r.norm_sqr(), r.arg()));
                }
                for t in &sol.transmission {
                    csv.push_str(&format!(",{:.16e},{:.16e}", t.norm_sqr(), t.arg()));
                }
                csv.push_str(&format!(",{:.16e}\n", sol.flux()));
            }
            Err(QslideError::Resonance { energy }) => {
                csv.push_str(&format!("# resonance at k {k:.16e} energy {energy:.16e}\n"));
            }
            Err(e) => {
                fatal = Some(e);
                break;
            }
        }
    }
    rd.write("scatter_sweep.csv", &csv)?;
    if let Some(e) = fatal {
        return Err(e);
    }
    rd.note(&format!(
        "scatter-sweep {}: {} momenta -> scatter_sweep.csv",
        cfg.widget, cfg.k_points
    ));
    Ok(())
}

#[derive(Serialize)]
struct CheckResult {
    name: &'static str,
    max_error: f64,
    tolerance: f64,
    pass: bool,
}

fn check_amplitude_vs_spectral() -> Result<f64> {
    let mut worst = 0.0f64;
    for &a in &[-2.0, 0.0, 1.0] {
        let b = analytic::period_scale(a);
        for &n in &[20usize, 40, 60] {
            let chain = build_chain(ChainKind::Field, n + 1, a, 0.0)?;
            let spectrum = eigendecompose(&chain)?;
            let mut init = vec![num_complex::Complex64::new(0.0, 0.0); n + 1];
            init[0] = num_complex::Complex64::new(1.0, 0.0);
            for j in 1..=10 {
                let t = 2.0 * b * PI * j as f64 / 11.0;
                let psi = spectrum.evolve(&init, t)?;
                for r in 0..=n {
                    let pred = analytic::amplitude(r, a, t, n)?.complex();
                    worst = worst.max((psi[r] - pred).norm());
                }
            }
        }
    }
    Ok(worst)
}

fn check_integer_spectrum() -> Result<f64> {
    let mut worst = 0.0f64;
    for &n in &[10usize, 30, 50] {
        for &p in &[0.1, 0.3, 0.5, 0.9] {
            let chain = krawtchouk_chain(n + 1, p)?;
            let spectrum = eigendecompose(&chain)?;
            for (j, &ev) in spectrum.eigenvalues.iter().enumerate() {
                worst = worst.max((ev - j as f64).abs());
            }
        }
    }
    Ok(worst)
}

fn check_full_period_return() -> Result<f64> {
    let mut worst = 0.0f64;
    for &a in &[-2.0, 1.0] {
        let n = 40usize;
        let chain = build_chain(ChainKind::Field, n + 1, a, 0.0)?;
        let spectrum = eigendecompose(&chain)?;
        let mut init = vec![num_complex::Complex64::new(0.0, 0.0); n + 1];
        init[0] = num_complex::Complex64::new(1.0, 0.0);
        let t = 2.0 * analytic::period_scale(a) * PI;
        let psi = spectrum.evolve(&init, t)?;
        worst = worst.max((psi[0].norm() - 1.0).abs());
    }
    Ok(worst)
}

fn check_theta_symmetry() -> Result<f64> {
    let mut worst = 0.0f64;
    for &a in &[-2.0, 1.0] {
        let b = analytic::period_scale(a);
        for j in 1..50 {
            let delta = b * PI * 0.999 * j as f64 / 50.0;
            let plus = analytic::momentum_theta(b * PI + delta, a)?;
            let minus = analytic::momentum_theta(b * PI - delta, a)?;
            worst = worst.max(analytic::wrap_phase(plus + minus).abs());
        }
    }
    Ok(worst)
}

fn check_plane_wave_limit() -> Result<f64> {
    let t = analytic::gaussian_transmission_b(-PI / 4.0, 1e-4)?;
    Ok((t - 1.0).abs())
}

fn check_widget_formula() -> Result<f64> {
    let widget = builtin_widget("ub")?;
    let mut worst = 0.0f64;
    for j in 1..=200 {
        let k = -PI + PI * j as f64 / 201.0;
        let sol = scatter::solve_plane_wave(&widget, k)?;
        let want = analytic::transmission_b(k)?;
        worst = worst.max((sol.transmission[0].norm_sqr() - want).abs());
    }
    Ok(worst)
}

fn check_beam_splitter_balance() -> Result<f64> {
    let widget = builtin_widget("uc")?;
    let sol = scatter::solve_plane_wave(&widget, -PI / 4.0)?;
    let mut worst = sol.reflection.iter().map(|r| r.norm_sqr()).sum::<f64>();
    for t in &sol.transmission {
        worst = worst.max((t.norm_sqr() - 0.5).abs());
    }
    Ok(worst)
}

#[derive(Serialize)]
struct ValidateRecord {
    config: ExperimentConfig,
    checks: Vec<CheckResult>,
}

fn run_validate_analytic(cfg: ValidateAnalyticConfig, rd: &mut RunDir) -> Result<()> {
    let config = ExperimentConfig::ValidateAnalytic(cfg);
    let suite: Vec<(&'static str, f64, fn() -> Result<f64>)> = vec![
        ("amplitude_vs_spectral", 1e-8, check_amplitude_vs_spectral),
        ("integer_spectrum", 1e-8, check_integer_spectrum),
        ("full_period_return", 1e-6, check_full_period_return),
        ("theta_symmetry", 1e-9, check_theta_symmetry),
        ("plane_wave_limit", 1e-6, check_plane_wave_limit),
        ("widget_formula", 1e-9, check_widget_formula),
        ("beam_splitter_balance", 1e-6, check_beam_splitter_balance),
    ];
    let mut checks = Vec::new();
    for (name, tolerance, f) in suite {
        let max_error = f()?;
        let pass = max_error <= tolerance;
        rd.note(&format!(
            "validate-analytic: {} {name}: max error {max_error:.3e} (tolerance {tolerance:.1e})",
            if pass { "PASS" } else { "FAIL" }
        ));
        checks.push(CheckResult {
            name,
            max_error,
            tolerance,
            pass,
        });
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    let record = ValidateRecord { config, checks };
    rd.write(
        "validate_analytic.json",
        &format!("{}\n", serde_json::to_string_pretty(&record).expect("record")),
    )?;
    if failed > 0 {
        return Err(QslideError::Numerical(format!(
            "{failed} analytic check(s) exceeded tolerance"
        )));
    }
    Ok(())
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| {
        QslideError::Config(format!("{}: {e}", path.display()))
    })
}

fn expect_kind<T>(
    loaded: Option<ExperimentConfig>,
    subcommand: &str,
    extract: impl FnOnce(ExperimentConfig) -> std::result::Result<T, ExperimentConfig>,
) -> Result<Option<T>> {
    match loaded {
        None => Ok(None),
        Some(config) => match extract(config) {
            Ok(c) => Ok(Some(c)),
            Err(other) => Err(QslideError::Config(format!(
                "config declares experiment '{}' but the subcommand is '{subcommand}'",
                other.experiment_name()
            ))),
        },
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let loaded = match &cli.config {
        Some(path) => Some(load_config(path)?),
        None => None,
    };
    let quiet = cli.quiet;
    let out_flag = cli.out.clone();
    let resolve_out = |config_dir: &Option<String>| -> PathBuf {
        out_flag
            .clone()
            .or_else(|| config_dir.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("results"))
    };

    match cli.command {
        Command::MomentumMap => {
            let cfg = expect_kind(loaded, "momentum-map", |c| match c {
                ExperimentConfig::MomentumMap(m) => Ok(m),
                other => Err(other),
            })?
            .unwrap_or_default();
            let mut rd = RunDir::new(&resolve_out(&cfg.out_dir), quiet)?;
            let result = run_momentum_map(cfg, &mut rd);
            finish(&mut rd, "momentum_map", result)
        }
        Command::GateRun {
            gate,
            slide_len,
            t_off,
            tune,
        } => {
            let mut cfg = expect_kind(loaded, "gate-run", |c| match c {
                ExperimentConfig::GateRun(g) => Ok(g),
                other => Err(other),
            })?
            .unwrap_or_default();
            if let Some(g) = gate {
                cfg.gate = g.into();
            }
            if let Some(l) = slide_len {
                cfg.slide_len = l;
            }
            if let Some(t) = t_off {
                cfg.t_off = SwitchTime::Fixed(t);
            }
            if tune {
                cfg.t_off = SwitchTime::Auto(AutoKeyword::Auto);
            }
            let mut rd = RunDir::new(&resolve_out(&cfg.out_dir), quiet)?;
            let result = run_gate_run(cfg, &mut rd);
            finish(&mut rd, "gate_run", result)
        }
        Command::FidelitySweep { gate, max_len } => {
            let mut cfg = expect_kind(loaded, "fidelity-sweep", |c| match c {
                ExperimentConfig::FidelitySweep(f) => Ok(f),
                other => Err(other),
            })?
            .unwrap_or_default();
            if let Some(g) = gate {
                cfg.gate = g.into();
            }
            if let Some(m) = max_len {
                cfg.slide_lengths.retain(|&l| l <= m);
            }
            let mut rd = RunDir::new(&resolve_out(&cfg.out_dir), quiet)?;
            let result = run_fidelity_sweep(cfg, &mut rd);
            finish(&mut rd, "fidelity_sweep", result)
        }
        Command::ScatterSweep { widget } => {
            let mut cfg = expect_kind(loaded, "scatter-sweep", |c| match c {
                ExperimentConfig::ScatterSweep(s) => Ok(s),
                other => Err(other),
            })?
            .unwrap_or_default();
            if let Some(w) = widget {
                cfg.widget = w;
            }
            let mut rd = RunDir::new(&resolve_out(&cfg.out_dir), quiet)?;
            let result = run_scatter_sweep(cfg, &mut rd);
            finish(&mut rd, "scatter_sweep", result)
        }
        Command::ValidateAnalytic => {
            let cfg = expect_kind(loaded, "validate-analytic", |c| match c {
                ExperimentConfig::ValidateAnalytic(v) => Ok(v),
                other => Err(other),
            })?
            .unwrap_or_default();
            let mut rd = RunDir::new(&resolve_out(&cfg.out_dir), quiet)?;
            let result = run_validate_analytic(cfg, &mut rd);
            finish(&mut rd, "validate_analytic", result)
        }
    }
}

fn finish(rd: &mut RunDir, experiment: &str, result: Result<()>) -> Result<()> {
    match result {
        Ok(()) => {
            rd.finish(experiment, "ok")?;
            Ok(())
        }
        Err(e) => {
            let _ = rd.finish(experiment, &format!("failed: {e}"));
            Err(e)
        }
    }
}

/// Parse arguments, run, and map errors to exit codes (0 success,
/// 1 configuration, 2 numerical validation).
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let workers = cli.workers;
    let body = move || dispatch(cli);
    let result = match workers {
        Some(w) if w > 0 => match rayon::ThreadPoolBuilder::new().num_threads(w).build() {
            Ok(pool) => pool.install(body),
            Err(e) => Err(QslideError::Config(format!("worker pool: {e}"))),
        },
        _ => body(),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
