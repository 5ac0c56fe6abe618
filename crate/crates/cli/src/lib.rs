//! Batch command-line driver: configuration loading, scenario execution and file output.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use antijam_core::analog::{AnalogOptions, AnalogOutcome, AnalogProblem, SolverFlags};
use antijam_core::array::{discretize_spec, AngleGrid};
use antijam_core::config::{ScenarioConfig, StepMode};
use antijam_core::digital::DigitalOutcome;
use antijam_core::io;
use antijam_core::linalg::CVec;
use antijam_core::manifold::ArmijoParams;
use antijam_core::metrics::{composite_pattern, normalized_gains_db, per_ap_steering, pattern_report_on, PatternReport};
use antijam_core::pipeline::{digital_and_report, synthesize, Synthesis};
use antijam_core::studies::{
    self, BenchRow, CompareRow, CompareSummary, EndToEndTiming, ImpairmentStudy, LinearFit, SinrRow,
};
use antijam_core::unfold::CvnnWeights;
use antijam_core::{Complex64, Error, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

/// Objective ratio to the converged Armijo solve that still counts as a match.
pub const COMPARE_RATIO_LIMIT: f64 = 1.25;
/// Share of compare instances that must meet [`COMPARE_RATIO_LIMIT`].
pub const COMPARE_MIN_SHARE: f64 = 0.9;
pub const BENCH_MIN_R2: f64 = 0.9;

#[derive(Debug, Parser)]
#[command(name = "antijam", version, about = "Anti-jamming beam pattern synthesis for distributed phased arrays")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-AP analog synthesis followed by the digital stage.
    Synthesize(CommonArgs),
    /// Recompute the pattern report and SINR table from saved weights.
    Evaluate(EvaluateArgs),
    /// Wall time of the full synthesis against the number of APs.
    BenchScaling(CommonArgs),
    /// Armijo line search against network-predicted step sizes on random subproblems.
    CompareStepsize(CommonArgs),
    /// Ideal, uncorrected and compensated UPA patterns under hardware impairments.
    ImpairmentStudy(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the configuration seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<StepMode>,
    /// Step-size network weights; the bundled 64-antenna network is used otherwise.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Output directory; defaults to `output.dir` of the configuration.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Analog weights CSV; defaults to `analog_weights.csv` in the output directory.
    #[arg(long)]
    pub analog: Option<PathBuf>,
    /// Digital weights CSV; defaults to `digital_weights.csv` in the output directory.
    #[arg(long)]
    pub digital: Option<PathBuf>,
}

fn parse_mode(s: &str) -> std::result::Result<StepMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Process exit status of a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass = 0,
    Usage = 1,
    Degenerate = 2,
    VerdictFailed = 3,
}

impl Status {
    pub fn code(self) -> i32 {
        self as i32
    }

    fn from_checks(pass: bool, degenerate: bool) -> Self {
        match (pass, degenerate) {
            (true, _) => Status::Pass,
            (false, true) => Status::Degenerate,
            (false, false) => Status::VerdictFailed,
        }
    }
}

/// Error to exit status: solver singularities are degeneracies, the rest are usage errors.
pub fn error_status(e: &Error) -> Status {
    match e {
        Error::Degenerate(_) => Status::Degenerate,
        _ => Status::Usage,
    }
}

/// Loaded configuration with command-line overrides applied.
#[derive(Debug, Clone)]
pub struct Context {
    pub cfg: ScenarioConfig,
    pub base_dir: PathBuf,
    pub out_dir: PathBuf,
    pub weights: Option<PathBuf>,
}

impl Context {
    pub fn load(args: &CommonArgs) -> Result<Self> {
        let mut cfg = ScenarioConfig::load(&args.config)?;
        if let Some(s) = args.seed {
            cfg.seed = s;
        }
        if let Some(m) = args.mode {
            cfg.unfolding.mode = m;
        }
        cfg.validate()?;
        let base_dir = args
            .config
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        let out_dir = args.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
        let weights = args.weights.clone().or_else(|| cfg.weights_path(Some(&base_dir)));
        Ok(Self {
            cfg,
            base_dir,
            out_dir,
            weights,
        })
    }

    fn out(&self, name: &str) -> Result<BufWriter<File>> {
        fs::create_dir_all(&self.out_dir)?;
        Ok(BufWriter::new(File::create(self.out_dir.join(name))?))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::create_dir_all(&self.out_dir)?;
        fs::write(self.out_dir.join(name), text)?;
        Ok(())
    }

    /// Network weights for compare runs: the configured or given file, else the bundled set.
    pub fn network(&self) -> Result<CvnnWeights> {
        match &self.weights {
            Some(p) => CvnnWeights::load(p).map_err(|e| {
                Error::Config(format!("cannot load step-size weights {}: {e}", p.display()))
            }),
            None => CvnnWeights::bundled(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ApSummary {
    pub ap: usize,
    pub orientation_deg: f64,
    pub violation_db: f64,
    pub epsilon_l: f64,
    pub best_start: usize,
    pub best_iteration: usize,
    pub flags: SolverFlags,
}

#[derive(Debug, Clone, Serialize)]
pub struct DigitalSummary {
    pub epsilon: f64,
    pub iterations: usize,
    pub converged: bool,
    pub ridge: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthesisReport {
    pub num_aps: usize,
    pub num_antennas: usize,
    pub seed: u64,
    pub pattern: PatternReport,
    pub all_pass: bool,
    pub degenerate: bool,
    pub aps: Vec<ApSummary>,
    pub digital: DigitalSummary,
}

fn ap_summaries(analog: &[AnalogOutcome], orientations: &[f64]) -> Vec<ApSummary> {
    analog
        .iter()
        .zip(orientations)
        .enumerate()
        .map(|(l, (a, &o))| ApSummary {
            ap: l,
            orientation_deg: o,
            violation_db: a.violation_db,
            epsilon_l: a.epsilon_l,
            best_start: a.start,
            best_iteration: a.iteration,
            flags: a.flags.clone(),
        })
        .collect()
}

fn digital_summary(d: &DigitalOutcome) -> DigitalSummary {
    DigitalSummary {
        epsilon: d.epsilon,
        iterations: d.trace.len(),
        converged: d.converged,
        ridge: d.ridge,
    }
}

/// Normalized composite pattern on a uniform grid over [-90, 90].
pub fn fine_pattern(ctx: &Context, analog_weights: &[CVec], w_bb: &[Complex64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let grid = AngleGrid::uniform(ctx.cfg.output.pattern_step_deg)?;
    let geom = ctx.cfg.geometry()?;
    let steering = per_ap_steering(&geom, &ctx.cfg.relative_orientations(), grid.angles())?;
    let response = composite_pattern(w_bb, analog_weights, &steering)?;
    Ok((grid.angles().to_vec(), normalized_gains_db(&response)))
}

pub struct SynthesizeOutput {
    pub synthesis: Synthesis,
    pub report: SynthesisReport,
    pub status: Status,
}

/// Writes analog and digital weights, both traces, the fine pattern and `report.json`.
pub fn cmd_synthesize(ctx: &Context) -> Result<SynthesizeOutput> {
    let cfg = &ctx.cfg;
    let source = cfg.step_source(ctx.weights.as_deref())?;
    let scn = cfg.scenario(source)?;
    let syn = synthesize(&scn)?;
    let weights = syn.analog_weights();
    io::write_analog_weights(ctx.out("analog_weights.csv")?, &weights)?;
    io::write_digital_weights(ctx.out("digital_weights.csv")?, &syn.digital.w_bb)?;
    let traces: Vec<&[_]> = syn.analog.iter().map(|a| a.trace.as_slice()).collect();
    io::write_analog_traces(ctx.out("analog_trace.csv")?, &traces)?;
    io::write_digital_trace(ctx.out("digital_trace.csv")?, &syn.digital.trace)?;
    let (angles, gains) = fine_pattern(ctx, &weights, &syn.digital.w_bb)?;
    io::write_pattern(ctx.out("pattern.csv")?, &angles, &gains)?;
    let degenerate = syn.degenerate();
    let report = SynthesisReport {
        num_aps: scn.num_aps(),
        num_antennas: scn.geom.num_antennas,
        seed: cfg.seed,
        pattern: syn.report.clone(),
        all_pass: syn.report.verdicts.all_pass(),
        degenerate,
        aps: ap_summaries(&syn.analog, &scn.orientations_deg),
        digital: digital_summary(&syn.digital),
    };
    ctx.write_json("report.json", &report)?;
    let status = Status::from_checks(report.all_pass, degenerate);
    Ok(SynthesizeOutput {
        synthesis: syn,
        report,
        status,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub num_aps: usize,
    pub num_antennas: usize,
    pub pattern: PatternReport,
    pub all_pass: bool,
    pub sinr: Vec<SinrRow>,
}

fn write_sinr(ctx: &Context, rows: &[SinrRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(ctx.out("sinr.csv")?);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Parse(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Rebuilds the report from weight files and tabulates SINR and sum rate without solving.
pub fn cmd_evaluate(ctx: &Context, analog: Option<&Path>, digital: Option<&Path>) -> Result<(EvaluationReport, Status)> {
    let analog_path = analog.map(Path::to_path_buf).unwrap_or_else(|| ctx.out_dir.join("analog_weights.csv"));
    let digital_path = digital.map(Path::to_path_buf).unwrap_or_else(|| ctx.out_dir.join("digital_weights.csv"));
    let open = |p: &Path| File::open(p).map_err(|e| Error::Config(format!("cannot open {}: {e}", p.display())));
    let weights = io::read_analog_weights(open(&analog_path)?)?;
    let w_bb = io::read_digital_weights(open(&digital_path)?)?;
    let cfg = &ctx.cfg;
    let geom = cfg.geometry()?;
    if weights.len() != cfg.system.num_aps || w_bb.len() != weights.len() {
        return Err(Error::Config(format!(
            "weights describe {} analog and {} digital APs, config has {}",
            weights.len(),
            w_bb.len(),
            cfg.system.num_aps
        )));
    }
    if weights[0].len() != geom.num_antennas {
        return Err(Error::Config(format!(
            "analog weights have {} antennas, config has {}",
            weights[0].len(),
            geom.num_antennas
        )));
    }
    let spec = cfg.spec()?;
    let orient = cfg.relative_orientations();
    let discrete = discretize_spec(&spec)?;
    let steering = per_ap_steering(&geom, &orient, &discrete.stacked())?;
    let response = composite_pattern(&w_bb, &weights, &steering)?;
    let pattern = pattern_report_on(&response, &discrete, &cfg.thresholds()?)?;
    let sinr = match &cfg.evaluate {
        Some(e) => studies::sinr_table(&geom, &orient, &weights, &w_bb, e)?,
        None => Vec::new(),
    };
    write_sinr(ctx, &sinr)?;
    let report = EvaluationReport {
        num_aps: weights.len(),
        num_antennas: geom.num_antennas,
        all_pass: pattern.verdicts.all_pass(),
        pattern,
        sinr,
    };
    ctx.write_json("evaluation.json", &report)?;
    let status = Status::from_checks(report.all_pass, false);
    Ok((report, status))
}

/// Report of [`cmd_synthesize`] recomputed from given weights, for consistency checks.
pub fn report_for_weights(ctx: &Context, weights: &[CVec]) -> Result<PatternReport> {
    let scn = ctx.cfg.scenario(antijam_core::analog::StepSource::Armijo)?;
    Ok(digital_and_report(&scn, weights)?.2)
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub fit: LinearFit,
    pub min_r_squared: f64,
    pub pass: bool,
}

/// Writes `bench_scaling.csv` and `bench_scaling.json`.
pub fn cmd_bench_scaling(ctx: &Context) -> Result<(BenchReport, Status)> {
    let cfg = &ctx.cfg;
    let bench = cfg.bench.clone().unwrap_or_default();
    let scn = cfg.scenario(cfg.step_source(ctx.weights.as_deref())?)?;
    let (rows, fit) = studies::bench_scaling(&scn, &bench)?;
    let mut w = csv::Writer::from_writer(ctx.out("bench_scaling.csv")?);
    for r in &rows {
        w.serialize(r).map_err(|e| Error::Parse(e.to_string()))?;
    }
    w.flush()?;
    let pass = fit.r_squared >= BENCH_MIN_R2 && fit.slope > 0.0;
    let report = BenchReport {
        rows,
        fit,
        min_r_squared: BENCH_MIN_R2,
        pass,
    };
    ctx.write_json("bench_scaling.json", &report)?;
    Ok((report, Status::from_checks(pass, false)))
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub summary: CompareSummary,
    /// Single-start analog synthesis of the configured spec under both rules.
    pub end_to_end: EndToEndTiming,
    pub min_share: f64,
    pub unfolded_faster: bool,
    pub pass: bool,
}

/// Writes `compare_stepsize.csv` and `compare_stepsize.json`.
pub fn cmd_compare_stepsize(ctx: &Context) -> Result<(Vec<CompareRow>, CompareReport, Status)> {
    let cfg = &ctx.cfg;
    let weights = ctx.network()?;
    let geom = cfg.geometry()?;
    if weights.num_antennas() != geom.num_antennas {
        return Err(Error::Config(format!(
            "weights were trained for {} antennas, config has {}",
            weights.num_antennas(),
            geom.num_antennas
        )));
    }
    let compare = cfg.compare.clone().unwrap_or_default();
    let instances = studies::subproblem_instances(
        &geom,
        &cfg.spec()?,
        (cfg.admm.rho, cfg.admm.itermax, cfg.admm.kappa),
        &compare,
        cfg.seed,
    )?;
    let armijo: ArmijoParams = cfg.analog.armijo;
    let (rows, summary) = studies::compare_stepsize(&instances, &weights, &armijo, &compare, COMPARE_RATIO_LIMIT)?;
    let mut w = csv::Writer::from_writer(ctx.out("compare_stepsize.csv")?);
    for r in &rows {
        w.serialize(r).map_err(|e| Error::Parse(e.to_string()))?;
    }
    w.flush()?;
    let problem = AnalogProblem::new(geom, cfg.spec()?)?;
    let options = AnalogOptions {
        armijo,
        seed: cfg.analog.seed.wrapping_add(cfg.seed),
        ..AnalogOptions::plain()
    };
    let end_to_end = studies::end_to_end_timing(
        &problem,
        &cfg.analog_params()?,
        &options,
        &Arc::new(weights),
        compare.timing_repeats,
    )?;
    let unfolded_faster = summary.unfolded_total_s < summary.armijo_total_s && end_to_end.unfolded_s < end_to_end.armijo_s;
    let pass = unfolded_faster && summary.within_ratio >= COMPARE_MIN_SHARE;
    let report = CompareReport {
        summary,
        end_to_end,
        min_share: COMPARE_MIN_SHARE,
        unfolded_faster,
        pass,
    };
    ctx.write_json("compare_stepsize.json", &report)?;
    Ok((rows, report, Status::from_checks(pass, false)))
}

#[derive(Debug, Clone, Serialize)]
pub struct ImpairmentReport {
    pub rows: usize,
    pub cols: usize,
    pub sigma_a: f64,
    pub sigma_p: f64,
    pub bits: Option<u32>,
    pub null_ideal_db: f64,
    pub null_uncorrected_db: f64,
    pub null_compensated_db: f64,
    pub null_improvement_db: f64,
    pub min_null_improvement_db: f64,
    pub pass: bool,
}

/// Writes three UPA cut CSVs and `impairment.json`.
pub fn cmd_impairment_study(ctx: &Context) -> Result<(ImpairmentStudy, ImpairmentReport, Status)> {
    let cfg = &ctx.cfg;
    let imp = cfg
        .impairment
        .clone()
        .ok_or_else(|| Error::Config("impairment-study needs an [impairment] section".into()))?;
    let mut options = cfg.analog.clone();
    options.seed = options.seed.wrapping_add(cfg.seed);
    let ideal = studies::design_upa_weights(&imp, &options)?;
    let model = studies::build_impairment_model(&imp, cfg.seed, Some(&ctx.base_dir))?;
    let study = studies::impairment_study(&imp, &ideal, &model)?;
    let pts = &study.pattern.points;
    io::write_upa_pattern(ctx.out("pattern_ideal.csv")?, pts, &study.ideal_db)?;
    io::write_upa_pattern(ctx.out("pattern_uncorrected.csv")?, pts, &study.uncorrected_db)?;
    io::write_upa_pattern(ctx.out("pattern_compensated.csv")?, pts, &study.compensated_db)?;
    let improvement = study.null_improvement_db();
    let pass = improvement >= imp.min_null_improvement_db;
    let report = ImpairmentReport {
        rows: imp.rows,
        cols: imp.cols,
        sigma_a: model.errors.sigma_a,
        sigma_p: model.errors.sigma_p,
        bits: model.bits,
        null_ideal_db: study.null_ideal_db,
        null_uncorrected_db: study.null_uncorrected_db,
        null_compensated_db: study.null_compensated_db,
        null_improvement_db: improvement,
        min_null_improvement_db: imp.min_null_improvement_db,
        pass,
    };
    ctx.write_json("impairment.json", &report)?;
    Ok((study, report, Status::from_checks(pass, false)))
}

/// Runs one parsed command line, printing a one-line summary; returns the exit status.
pub fn run(cli: Cli) -> Status {
    let result = match &cli.command {
        Command::Synthesize(a) => Context::load(a).and_then(|ctx| {
            let o = cmd_synthesize(&ctx)?;
            let p = &o.report.pattern;
            println!(
                "synthesize: ripple {:.3} dB, max sidelobe {:.3} dB, max null {:.3} dB, all_pass {}, degenerate {}",
                p.ripple_db, p.max_sidelobe_db, p.max_null_db, o.report.all_pass, o.report.degenerate
            );
            Ok(o.status)
        }),
        Command::Evaluate(a) => Context::load(&a.common).and_then(|ctx| {
            let (r, s) = cmd_evaluate(&ctx, a.analog.as_deref(), a.digital.as_deref())?;
            println!(
                "evaluate: ripple {:.3} dB, max sidelobe {:.3} dB, max null {:.3} dB, {} SINR rows",
                r.pattern.ripple_db,
                r.pattern.max_sidelobe_db,
                r.pattern.max_null_db,
                r.sinr.len()
            );
            Ok(s)
        }),
        Command::BenchScaling(a) => Context::load(a).and_then(|ctx| {
            let (r, s) = cmd_bench_scaling(&ctx)?;
            for row in &r.rows {
                println!("bench: L={} median {:.4} s", row.num_aps, row.median_s);
            }
            println!("bench: slope {:.4} s/AP, R^2 {:.4}", r.fit.slope, r.fit.r_squared);
            Ok(s)
        }),
        Command::CompareStepsize(a) => Context::load(a).and_then(|ctx| {
            let (_, r, s) = cmd_compare_stepsize(&ctx)?;
            let m = &r.summary;
            println!(
                "compare-stepsize: subproblems armijo {:.4} s, unfolded {:.4} s, speedup {:.2}x, {:.0}% within {}x",
                m.armijo_total_s,
                m.unfolded_total_s,
                m.speedup,
                100.0 * m.within_ratio,
                m.ratio_limit
            );
            let e = &r.end_to_end;
            println!(
                "compare-stepsize: analog synthesis armijo {:.4} s, unfolded {:.4} s, speedup {:.2}x",
                e.armijo_s, e.unfolded_s, e.speedup
            );
            Ok(s)
        }),
        Command::ImpairmentStudy(a) => Context::load(a).and_then(|ctx| {
            let (_, r, s) = cmd_impairment_study(&ctx)?;
            println!(
                "impairment-study: null ideal {:.2} dB, uncorrected {:.2} dB, compensated {:.2} dB, improvement {:.2} dB",
                r.null_ideal_db, r.null_uncorrected_db, r.null_compensated_db, r.null_improvement_db
            );
            Ok(s)
        }),
    };
    match result {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            error_status(&e)
        }
    }
}
