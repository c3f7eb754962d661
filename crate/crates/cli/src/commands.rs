use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use intentgate::harness::{
    bench_latency, generate_trials, kitchen_catalog, record_session, run_ablation_suite, run_experiment, ScenarioSpec,
};
use intentgate::intent::stream::{read_all, write_all, PosteriorReader, PosteriorRecord};
use intentgate::intent::IntentPosterior;
use intentgate::metrics::{default_grid, optimize_threshold, threshold_sweep, CalibrationReport, LabeledPrediction, ObjectiveWeights};
use intentgate::monitor::{
    read_trace, replay, run_session, ArtifactInput, CheckMask, FrameInput, Monitor, MonitorConfig, RejectedFrame, TraceWriter,
};
use intentgate::planner::{assets, DomainDef, LogicalRules, ProblemDef, TaskContext};
use intentgate::signal::{io as signal_io, preprocess, ArtifactScorer, BaselineStats, EegWindow, PreprocessConfig};
use serde::Serialize;

use crate::{BenchCmd, CalibrateCmd, ConfigArgs, GenerateCmd, MonitorCmd, NoiseTestCmd, ReplayCmd, ScenarioArgs, SweepCmd};

/// Bad flags or unreadable / malformed input files (exit code 2).
#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

/// A check the command exists to perform came out negative (exit code 1).
#[derive(Debug)]
pub struct Failure(pub String);

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Failure {}

fn input(msg: impl fmt::Display) -> anyhow::Error {
    InputError(msg.to_string()).into()
}

#[derive(Debug, Clone, Copy)]
pub struct Notes {
    pub quiet: bool,
}

impl Notes {
    fn say(&self, msg: impl fmt::Display) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| input(format!("cannot read {}: {e}", path.display())))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| input(format!("cannot open {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| input(format!("cannot create {}: {e}", path.display())))
}

fn emit<T: Serialize>(value: &T, output: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value).context("serializing output")?;
    match output {
        Some(p) => fs::write(p, text + "\n").map_err(|e| input(format!("cannot write {}: {e}", p.display()))),
        None => stdout(&(text + "\n")),
    }
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn stdout(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(anyhow::Error::new(e).context("writing to stdout")),
        _ => Ok(()),
    }
}

fn apply_config(args: &ConfigArgs, cfg: &mut MonitorConfig) -> Result<()> {
    if let Some(p) = &args.config {
        *cfg = toml::from_str(&read_text(p)?).map_err(|e| input(format!("{}: {e}", p.display())))?;
    }
    let set = |slot: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    set(&mut cfg.tau_h, args.tau_h);
    set(&mut cfg.tau_a, args.tau_a);
    set(&mut cfg.tau_omega, args.tau_omega);
    set(&mut cfg.alpha_m, args.alpha_m);
    if let Some(k) = args.k_frames {
        cfg.k_frames = k;
    }
    if let Some(w) = args.warmup_halt {
        cfg.warmup_halt = w;
    }
    cfg.validate().map_err(input)
}

fn apply_ablation(args: &ConfigArgs, mask: &mut CheckMask) -> Result<()> {
    for name in &args.ablate {
        mask.disable(name).map_err(input)?;
    }
    Ok(())
}

fn load_world(domain: Option<&Path>, problem: Option<&Path>) -> Result<(DomainDef, ProblemDef)> {
    let d = match domain {
        Some(p) => assets::load_domain(&read_text(p)?).map_err(|e| input(format!("{}: {e}", p.display())))?,
        None => assets::domain(),
    };
    let pr = match problem {
        Some(p) => ProblemDef::parse(&read_text(p)?, &d).map_err(|e| input(format!("{}: {e}", p.display())))?,
        None => ProblemDef::parse(assets::PROBLEM_TEXT, &d)
            .map_err(|e| input(format!("bundled kitchen problem does not fit this domain: {e}")))?,
    };
    Ok((d, pr))
}

fn frame_input(rec: PosteriorRecord, windows: Option<&[Arc<EegWindow>]>) -> Result<FrameInput, RejectedFrame> {
    let artifact = match windows {
        None => ArtifactInput::Absent,
        Some(ws) => match ws.get(rec.frame as usize) {
            Some(w) => ArtifactInput::Window(w.clone()),
            None => {
                return Err(RejectedFrame {
                    frame: rec.frame,
                    raw: Some(rec.probs),
                    label: rec.label,
                    reason: format!("no EEG window for frame {} (signal yields {})", rec.frame, ws.len()),
                })
            }
        },
    };
    Ok(FrameInput { frame: rec.frame, posterior: rec.probs, artifact, ctx: None, label: rec.label })
}

pub fn monitor(c: &MonitorCmd, notes: Notes) -> Result<()> {
    let (domain, problem) = load_world(c.domain.as_deref(), c.problem.as_deref())?;
    let mut cfg = MonitorConfig::default();
    apply_config(&c.config, &mut cfg)?;
    apply_ablation(&c.config, &mut cfg.checks)?;
    let overrides = TaskContext {
        robot: c.ctx.robot.clone(),
        item: c.ctx.item.clone(),
        location: c.ctx.location.clone(),
        orientation: c.ctx.orientation.clone(),
    };
    let ctx = TaskContext::first_objects(&problem, &domain).overridden_by(&overrides);
    let mut m = Monitor::new(cfg, Arc::new(domain), &problem.objects, problem.init.clone(), ctx, LogicalRules::default()).map_err(input)?;

    let windows = match &c.signal {
        None => None,
        Some(path) => {
            let raw = signal_io::read_path(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
            let pcfg = PreprocessConfig::default();
            let baseline = BaselineStats::from_session(&raw, &pcfg).map_err(|e| input(format!("{}: {e}", path.display())))?;
            m = m.with_scorer(ArtifactScorer::new(baseline, raw.sample_rate_hz()).map_err(input)?);
            let ws = preprocess(&raw, &pcfg).map_err(|e| input(format!("{}: {e}", path.display())))?;
            notes.say(format_args!("{}: {} EEG windows", path.display(), ws.len()));
            Some(ws.into_iter().map(Arc::new).collect::<Vec<_>>())
        }
    };

    let reader = open(&c.input)?;
    let writer = TraceWriter::spawn(create(&c.trace)?, &m.trace_header())?;
    let mut stream_error = None;
    let frames = PosteriorReader::new(reader).map_while(|r| match r {
        Ok(rec) => Some(frame_input(rec, windows.as_deref())),
        Err(e) => {
            stream_error = Some(e);
            None
        }
    });
    let summary = run_session(&mut m, frames, |r| writer.write(&r));
    // The trace is flushed even when the session stops early.
    let written = writer.finish().context("finishing trace")?;
    let summary = summary.context("monitor session")?;
    if let Some(e) = stream_error {
        return Err(input(format!("{}: {e} ({written} records before it were traced to {})", c.input.display(), c.trace.display())));
    }
    notes.say(format_args!(
        "{written} records → {}; intervention rate {:.4}; rejected {}",
        c.trace.display(),
        summary.intervention_rate(),
        summary.rejected
    ));
    emit(&summary, None)
}

fn labeled_predictions(path: &Path, notes: Notes) -> Result<Vec<LabeledPrediction>> {
    let records = read_all(open(path)?).map_err(|e| input(format!("{}: {e}", path.display())))?;
    let mut preds = Vec::with_capacity(records.len());
    let mut unlabeled = 0usize;
    for r in records {
        let Some(truth) = r.label else {
            unlabeled += 1;
            continue;
        };
        IntentPosterior::new(r.probs).map_err(|e| input(format!("{}: frame {}: {e}", path.display(), r.frame)))?;
        preds.push(LabeledPrediction::from_posterior(r.probs, truth));
    }
    if unlabeled > 0 {
        notes.say(format_args!("{}: skipped {unlabeled} unlabeled rows", path.display()));
    }
    if preds.is_empty() {
        return Err(input(format!("{}: no labeled rows", path.display())));
    }
    Ok(preds)
}

pub fn calibrate(c: &CalibrateCmd, notes: Notes) -> Result<()> {
    let preds = labeled_predictions(&c.input, notes)?;
    let report = CalibrationReport::compute(&preds, c.bins).map_err(input)?;
    notes.say(format_args!("n = {}: ECE {:.4}, MCE {:.4}, ACE {:.4}", report.n, report.ece, report.mce, report.ace));
    emit(&report, c.output.as_deref())
}

fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| input(format!("--grid: `{s}` is not a number")));
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            #[allow(clippy::neg_cmp_op_on_partial_ord)] // rejects NaN
            if !(step > 0.0) || stop < start {
                return Err(input("--grid: expected start:stop:step with step > 0 and stop ≥ start"));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9).collect())
        }
        [_] => text.split(',').map(num).collect(),
        _ => Err(input("--grid: expected a comma list or start:stop:step")),
    }
}

pub fn sweep(c: &SweepCmd, notes: Notes) -> Result<()> {
    let preds = labeled_predictions(&c.input, notes)?;
    let grid = match &c.grid {
        Some(g) => parse_grid(g)?,
        None => default_grid(),
    };
    let result = threshold_sweep(&preds, &grid).map_err(input)?;
    let mut value = serde_json::to_value(&result).context("serializing sweep")?;
    if let Some(w) = &c.weights {
        if w.len() != 3 {
            return Err(input(format!("--weights: expected three comma-separated numbers, got {}", w.len())));
        }
        let weights = ObjectiveWeights::new(w[0], w[1], w[2]);
        value["custom"] = serde_json::json!({ "weights": weights, "tau": optimize_threshold(&result.points, weights) });
    }
    for o in &result.optima {
        notes.say(format_args!("{:<16} τ* = {}", o.name, o.tau));
    }
    emit(&value, c.output.as_deref())
}

fn load_scenario(a: &ScenarioArgs, notes: Notes) -> Result<ScenarioSpec> {
    let mut spec = match &a.scenario {
        Some(p) => ScenarioSpec::from_toml(&read_text(p)?).map_err(|e| input(format!("{}: {e}", p.display())))?,
        None => ScenarioSpec::default(),
    };
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    if let Some(t) = a.trials {
        spec.trials = t;
    }
    if let Some(r) = a.repetitions {
        spec.repetitions = r;
    }
    if let Some(b) = a.bins {
        spec.calibration_bins = b;
    }
    apply_config(&a.config, &mut spec.monitor)?;
    apply_ablation(&a.config, &mut spec.ablation)?;
    spec.validate().map_err(input)?;
    notes.say(format_args!("scenario `{}`: seed {}, {} trials × {} repetitions", spec.name, spec.seed, spec.trials, spec.repetitions));
    Ok(spec)
}

pub fn noise_test(c: &NoiseTestCmd, notes: Notes) -> Result<()> {
    let spec = load_scenario(&c.scenario, notes)?;
    fs::create_dir_all(&c.out_dir).map_err(|e| input(format!("cannot create {}: {e}", c.out_dir.display())))?;
    let path = |name: &str| -> PathBuf { c.out_dir.join(name) };

    let result = run_experiment(&spec).context("running experiment")?;
    emit(&result, Some(&path("result.json")))?;
    let mut table = result.summary_table();

    let header = intentgate::harness::scenario_monitor(&spec, spec.ablation)?.trace_header();
    let writer = TraceWriter::spawn(create(&path("trace.jsonl"))?, &header)?;
    record_session(&spec, 0, |r| writer.write(&r)).context("recording trace")?;
    let traced = writer.finish()?;

    if c.ablation_suite {
        let ablation = run_ablation_suite(&spec).context("running ablation suite")?;
        emit(&ablation, Some(&path("ablation.json")))?;
        table.push('\n');
        table.push_str(&ablation.to_table());
    }
    fs::write(path("summary.txt"), &table).map_err(|e| input(format!("cannot write summary: {e}")))?;
    stdout(&table)?;
    notes.say(format_args!("digest {}; {traced} trace records; results in {}", result.digest(), c.out_dir.display()));
    Ok(())
}

pub fn bench(c: &BenchCmd, notes: Notes) -> Result<()> {
    let spec = load_scenario(&c.scenario, notes)?;
    let report = bench_latency(&spec, c.steps).context("benchmark")?;
    notes.say(format_args!(
        "{} steps: p50 {:.1} µs, p95 {:.1} µs, p99 {:.1} µs, {:.0} decisions/s",
        report.steps, report.latency.p50_us, report.latency.p95_us, report.latency.p99_us, report.decisions_per_sec
    ));
    emit(&report, c.output.as_deref())
}

pub fn replay_verify(c: &ReplayCmd, notes: Notes) -> Result<()> {
    let (header, records) = read_trace(open(&c.trace)?).map_err(|e| input(format!("{}: {e}", c.trace.display())))?;
    let report = replay(&header, &records).map_err(|e| Failure(format!("{}: cannot rebuild the monitor: {e}", c.trace.display())))?;
    match &report.divergence {
        None => {
            notes.say(format_args!(
                "{}: {} records, {} replayed identically, {} rejected",
                c.trace.display(),
                report.records,
                report.replayed,
                report.rejected
            ));
            Ok(())
        }
        Some(d) => Err(Failure(format!(
            "{}: diverged at record {} (frame {}), field `{}`:\n  recorded: {}\n  replayed: {}",
            c.trace.display(),
            d.index,
            d.frame,
            d.field,
            d.recorded,
            d.replayed
        ))
        .into()),
    }
}

pub fn generate(c: &GenerateCmd, notes: Notes) -> Result<()> {
    if c.scenario_template {
        return stdout(&ScenarioSpec::default().to_toml());
    }
    let spec = load_scenario(&c.scenario, notes)?;
    let out = c.output.as_deref().expect("required unless printing the template");
    let trials = generate_trials(&spec, &kitchen_catalog(), 0).context("generating trials")?;
    let records: Vec<PosteriorRecord> = trials
        .iter()
        .flat_map(|t| t.frames.iter())
        .map(|f| PosteriorRecord { frame: f.frame, probs: f.posterior, label: f.label })
        .collect();
    let mut file = std::io::BufWriter::new(create(out)?);
    write_all(&records, &mut file).and_then(|()| file.flush()).map_err(|e| input(format!("cannot write {}: {e}", out.display())))?;
    notes.say(format_args!("{} frames ({} trials) → {}", records.len(), trials.len(), out.display()));
    Ok(())
}
