use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::generate::{generate_trials, SyntheticEeg, SyntheticTrial, WorldCatalog};
use super::scenario::ScenarioSpec;
use super::HarnessError;
use crate::intent::{argmax, Action};
use crate::metrics::{paired_t_and_effect, CalibrationReport, LabeledPrediction, LedgerSummary, PairedTest, SafetyLedger};
use crate::monitor::{run_session, CheckMask, LatencyStats, Monitor, SessionSummary, TraceHeader, TraceRecord, Verdict};
use crate::planner::assets;
use crate::signal::ArtifactScorer;

/// Monitor over the bundled kitchen world, configured by the scenario with `checks` applied.
pub fn scenario_monitor(spec: &ScenarioSpec, checks: CheckMask) -> Result<Monitor, HarnessError> {
    let cfg = crate::monitor::MonitorConfig { checks, ..spec.monitor.clone() };
    let m = Monitor::for_problem(cfg, Arc::new(assets::domain()), &assets::problem())?;
    Ok(if spec.eeg_windows {
        let g = SyntheticEeg::new();
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        m.with_scorer(ArtifactScorer::new(g.baseline(40, &mut rng), g.sample_rate_hz)?)
    } else {
        m
    })
}

pub fn kitchen_catalog() -> WorldCatalog {
    WorldCatalog::from_problem(&assets::problem(), &assets::domain()).expect("bundled world has feasible objects")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinResult {
    pub snr_db: f64,
    pub trials: u64,
    pub accuracy: f64,
    #[serde(flatten)]
    pub summary: LedgerSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub name: String,
    pub checks: Option<CheckMask>,
    #[serde(flatten)]
    pub summary: LedgerSummary,
    pub bins: Vec<BinResult>,
    /// Halt causes over all frames, not only the scored ones.
    pub frame_causes: BTreeMap<String, u64>,
    pub latency: LatencyStats,
}

#[derive(Debug, Clone, Default)]
struct ConditionRun {
    ledger: SafetyLedger,
    bins: Vec<(SafetyLedger, u64)>,
    frame_causes: BTreeMap<String, u64>,
    latencies: Vec<f64>,
}

impl ConditionRun {
    fn new(bins: usize) -> Self {
        Self { bins: vec![(SafetyLedger::default(), 0); bins], ..Default::default() }
    }

    fn score(&mut self, trial: &SyntheticTrial, halted: bool, cause: &str) {
        let correct = Action::ALL[argmax(&trial.commit_posterior)] == trial.truth;
        self.ledger.record(correct, halted);
        let (bin, correct_count) = &mut self.bins[trial.bin];
        bin.record(correct, halted);
        *correct_count += u64::from(correct);
        if halted {
            self.ledger.record_cause(cause);
            bin.record_cause(cause);
        }
    }

    fn merge(&mut self, other: ConditionRun) {
        self.ledger.merge(&other.ledger);
        for ((a, ca), (b, cb)) in self.bins.iter_mut().zip(other.bins) {
            a.merge(&b);
            *ca += cb;
        }
        for (k, v) in other.frame_causes {
            *self.frame_causes.entry(k).or_default() += v;
        }
        self.latencies.extend(other.latencies);
    }

    fn finish(self, name: &str, checks: Option<CheckMask>, spec: &ScenarioSpec) -> ConditionResult {
        ConditionResult {
            name: name.into(),
            checks,
            summary: self.ledger.summary(),
            bins: self
                .bins
                .into_iter()
                .enumerate()
                .map(|(b, (l, correct))| BinResult {
                    snr_db: spec.snr.bin_snr(b),
                    trials: l.total(),
                    accuracy: if l.total() == 0 { 0.0 } else { correct as f64 / l.total() as f64 },
                    summary: l.summary(),
                })
                .collect(),
            frame_causes: self.frame_causes,
            latency: LatencyStats::from_samples(&self.latencies),
        }
    }
}

fn run_monitored(spec: &ScenarioSpec, checks: CheckMask, trials: &[SyntheticTrial]) -> Result<ConditionRun, HarnessError> {
    let mut monitor = scenario_monitor(spec, checks)?;
    let mut run = ConditionRun::new(spec.snr.bins);
    run.latencies.reserve(trials.len() * spec.dynamics.dwell_frames);
    for trial in trials {
        for f in &trial.frames {
            let (d, rec) = monitor.step(f)?;
            run.latencies.push(rec.latency_us);
            let halted = d.verdict == Verdict::Halt;
            if halted {
                *run.frame_causes.entry(d.cause.to_string()).or_default() += 1;
            }
            if f.label.is_some() {
                run.score(trial, halted, d.cause.as_str());
            }
        }
    }
    Ok(run)
}

fn run_unmonitored(spec: &ScenarioSpec, trials: &[SyntheticTrial]) -> ConditionRun {
    let mut run = ConditionRun::new(spec.snr.bins);
    for t in trials {
        run.score(t, false, "");
    }
    run
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionResult {
    pub repetition: usize,
    pub monitored_safety: f64,
    pub unmonitored_safety: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub name: String,
    pub trials_per_repetition: usize,
    pub repetitions: usize,
    pub monitored: ConditionResult,
    /// Every decode executed: safety equals decoder accuracy.
    pub unmonitored: ConditionResult,
    pub per_repetition: Vec<RepetitionResult>,
    /// Monitored minus unmonitored safety across repetitions; needs at least two.
    pub paired: Option<PairedTest>,
    /// Calibration of the scored frames' raw posteriors.
    pub calibration: CalibrationReport,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl ExperimentResult {
    /// Hash of the result with wall-clock latencies blanked: equal for equal (spec, seeds).
    pub fn digest(&self) -> String {
        let mut r = self.clone();
        r.monitored.latency = LatencyStats::default();
        r.unmonitored.latency = LatencyStats::default();
        sha256_hex(serde_json::to_string(&r).expect("result serializes").as_bytes())
    }

    pub fn summary_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} — {} trials × {} repetitions", self.name, self.trials_per_repetition, self.repetitions);
        let _ = writeln!(s, "{:>8} {:>8} {:>9} {:>9} {:>9} {:>9}", "SNR dB", "trials", "accuracy", "safety", "interv.", "F1");
        for b in &self.monitored.bins {
            let _ = writeln!(
                s,
                "{:>8.1} {:>8} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
                b.snr_db, b.trials, b.accuracy, b.summary.safety_rate, b.summary.intervention_rate, b.summary.f1
            );
        }
        let m = &self.monitored.summary;
        let _ = writeln!(
            s,
            "{:>8} {:>8} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
            "all", m.total, self.unmonitored.summary.safety_rate, m.safety_rate, m.intervention_rate, m.f1
        );
        let _ = writeln!(s, "halt causes (scored trials):");
        for (k, v) in &m.ledger.causes {
            let _ = writeln!(s, "  {k:<18} {v}");
        }
        if let Some(p) = &self.paired {
            let _ = writeln!(
                s,
                "monitored − unmonitored safety: mean {:+.4}, t({}) = {:.3}, p = {:.3e}, d = {:.3}",
                p.mean, p.dof, p.t, p.p_two_tailed, p.cohens_d
            );
        }
        let l = &self.monitored.latency;
        let _ = writeln!(s, "step latency µs: p50 {:.1}  p95 {:.1}  p99 {:.1}", l.p50_us, l.p95_us, l.p99_us);
        s
    }
}

fn all_trials(spec: &ScenarioSpec) -> Result<Vec<Vec<SyntheticTrial>>, HarnessError> {
    spec.validate()?;
    let catalog = kitchen_catalog();
    (0..spec.repetitions).into_par_iter().map(|rep| generate_trials(spec, &catalog, rep)).collect()
}

/// Runs every repetition through the monitor (with the scenario's ablation mask) and through
/// an always-execute baseline.
pub fn run_experiment(spec: &ScenarioSpec) -> Result<ExperimentResult, HarnessError> {
    let reps = all_trials(spec)?;
    let runs: Vec<(ConditionRun, ConditionRun)> = reps
        .par_iter()
        .map(|trials| Ok((run_monitored(spec, spec.ablation, trials)?, run_unmonitored(spec, trials))))
        .collect::<Result<_, HarnessError>>()?;

    let per_repetition: Vec<RepetitionResult> = runs
        .iter()
        .enumerate()
        .map(|(repetition, (m, u))| RepetitionResult {
            repetition,
            monitored_safety: m.ledger.safety_rate(),
            unmonitored_safety: u.ledger.safety_rate(),
        })
        .collect();
    let paired = if per_repetition.len() >= 2 {
        let deltas: Vec<f64> = per_repetition.iter().map(|r| r.monitored_safety - r.unmonitored_safety).collect();
        Some(paired_t_and_effect(&deltas)?)
    } else {
        None
    };
    let preds: Vec<LabeledPrediction> =
        reps.iter().flatten().map(|t| LabeledPrediction::from_posterior(t.commit_posterior, t.truth)).collect();
    let calibration = CalibrationReport::compute(&preds, spec.calibration_bins)?;

    let (mut monitored, mut unmonitored) = (ConditionRun::new(spec.snr.bins), ConditionRun::new(spec.snr.bins));
    for (m, u) in runs {
        monitored.merge(m);
        unmonitored.merge(u);
    }
    Ok(ExperimentResult {
        name: spec.name.clone(),
        trials_per_repetition: spec.trials,
        repetitions: spec.repetitions,
        monitored: monitored.finish("monitored", Some(spec.ablation), spec),
        unmonitored: unmonitored.finish("unmonitored", None, spec),
        per_repetition,
        paired,
        calibration,
    })
}

/// Ablation rows: the full system, each component disabled in turn, and a gate that only
/// thresholds the entropy of the raw posterior.
pub fn ablation_variants() -> Vec<(&'static str, CheckMask)> {
    let without = |f: fn(&mut CheckMask)| {
        let mut m = CheckMask::ALL;
        f(&mut m);
        m
    };
    vec![
        ("Full System", CheckMask::ALL),
        ("No Entropy Check", without(|m| m.entropy_check = false)),
        ("No Artifact Check", without(|m| m.artifact_check = false)),
        ("No Oscillation Check", without(|m| m.oscillation_check = false)),
        ("No Calibration Adjustment", without(|m| m.calibration_adjustment = false)),
        ("No Logical Check", without(|m| m.logical_check = false)),
        (
            "Only Confidence",
            CheckMask {
                entropy_check: true,
                artifact_check: false,
                oscillation_check: false,
                calibration_adjustment: false,
                logical_check: false,
            },
        ),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub checks: CheckMask,
    #[serde(flatten)]
    pub summary: LedgerSummary,
    /// Safety rate minus the full system's.
    pub delta_safety: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub name: String,
    pub trials: u64,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, name: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<26} {:>9} {:>9} {:>9} {:>9}", "configuration", "safety", "Δ", "interv.", "F1");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<26} {:>9.4} {:>+9.4} {:>9.4} {:>9.4}",
                r.name, r.summary.safety_rate, r.delta_safety, r.summary.intervention_rate, r.summary.f1
            );
        }
        s
    }
}

/// Every variant of [`ablation_variants`] on the same generated sessions (the scenario's own
/// ablation mask is ignored).
pub fn run_ablation_suite(spec: &ScenarioSpec) -> Result<AblationTable, HarnessError> {
    let reps = all_trials(spec)?;
    let variants = ablation_variants();
    let ledgers: Vec<SafetyLedger> = variants
        .par_iter()
        .map(|(_, mask)| {
            let mut total = SafetyLedger::default();
            for trials in &reps {
                total.merge(&run_monitored(spec, *mask, trials)?.ledger);
            }
            Ok(total)
        })
        .collect::<Result<_, HarnessError>>()?;
    let full = ledgers[0].safety_rate();
    let rows = variants
        .into_iter()
        .zip(ledgers)
        .map(|((name, checks), l)| AblationRow { name: name.into(), checks, delta_safety: l.safety_rate() - full, summary: l.summary() })
        .collect::<Vec<_>>();
    Ok(AblationTable { name: spec.name.clone(), trials: rows[0].summary.total, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub steps: usize,
    pub wall_seconds: f64,
    /// Measured over the whole run, wall clock.
    pub decisions_per_sec: f64,
    pub latency: LatencyStats,
}

/// Times `min_steps` or more monitor steps over the scenario's first repetition, repeated as
/// needed. One untimed pass fills the plan cache first.
pub fn bench_latency(spec: &ScenarioSpec, min_steps: usize) -> Result<BenchReport, HarnessError> {
    let trials = generate_trials(spec, &kitchen_catalog(), 0)?;
    let frames: Vec<_> = trials.iter().flat_map(|t| t.frames.iter().cloned()).collect();
    let mut monitor = scenario_monitor(spec, spec.ablation)?;
    for f in &frames {
        monitor.step(f)?;
    }
    let passes = min_steps.div_ceil(frames.len()).max(1);
    let mut latencies = Vec::with_capacity(passes * frames.len());
    let started = Instant::now();
    for _ in 0..passes {
        monitor.reset();
        for f in &frames {
            let (_, rec) = monitor.step(f)?;
            latencies.push(rec.latency_us);
        }
    }
    let wall = started.elapsed().as_secs_f64();
    Ok(BenchReport {
        steps: latencies.len(),
        wall_seconds: wall,
        decisions_per_sec: latencies.len() as f64 / wall,
        latency: LatencyStats::from_samples(&latencies),
    })
}

/// Runs repetition `rep` through a fully traced session, handing each record to `sink`.
pub fn record_session<F>(spec: &ScenarioSpec, rep: usize, sink: F) -> Result<(TraceHeader, SessionSummary), HarnessError>
where
    F: FnMut(TraceRecord) -> Result<(), crate::monitor::TraceError>,
{
    let trials = generate_trials(spec, &kitchen_catalog(), rep)?;
    let mut monitor = scenario_monitor(spec, spec.ablation)?;
    let header = monitor.trace_header();
    let summary = run_session(&mut monitor, trials.into_iter().flat_map(|t| t.frames).map(Ok), sink)?;
    Ok((header, summary))
}
