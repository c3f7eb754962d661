//! The runtime gate. Each frame the decoder posterior is calibrated, screened by the
//! physiological checks (entropy, artifact, oscillation), grounded to a goal, planned for, and
//! the plan screened by the logical checks. The first failing check halts the frame; otherwise
//! the next plan step executes and the world state advances.

mod config;
mod decision;
mod gate;
mod replay;
mod session;
mod trace;

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use thiserror::Error;

pub use config::{CheckMask, MonitorConfig};
pub use decision::{Cause, Measurements, MonitorDecision, Probs, Verdict};
pub use gate::{gate, Check, CheckOutcomes};
pub use replay::{replay, Divergence, ReplayReport};
pub use session::{run_session, LatencyStats, RejectedFrame, SessionSummary};
pub use trace::{domain_digest, read_trace, TraceError, TraceHeader, TraceRecord, TraceWriter, TRACE_FORMAT, TRACE_VERSION};

use crate::intent::{calibrate, Action, IntentError, IntentHistory, IntentPosterior};
use crate::planner::{
    check_logical, ground_to_goal, DomainDef, Goal, GroundTask, Invariant, LogicalRules, PlanOutcome, PlannerError, ProblemDef, StateBits,
    TaskContext, TypedName, WorldState,
};
use crate::signal::{ArtifactScorer, EegWindow, SignalError};

#[derive(Debug, Error)]
pub enum MonitorError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid posterior: {0}")]
    Posterior(#[from] IntentError),
    #[error("artifact score {0} is not finite")]
    ArtifactScore(f64),
    #[error("an EEG window was supplied but no artifact baseline is configured")]
    MissingBaseline,
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

impl MonitorError {
    /// Errors confined to one frame's input: the frame is rejected and the session continues.
    pub fn is_frame_error(&self) -> bool {
        matches!(self, MonitorError::Posterior(_) | MonitorError::ArtifactScore(_))
    }
}

/// What the frame offers for the artifact check.
#[derive(Debug, Clone, Default)]
pub enum ArtifactInput {
    /// Preprocessed window, scored against the configured baseline.
    Window(Arc<EegWindow>),
    /// Precomputed score (e.g. from a recorded trace).
    Score(f64),
    /// Posterior-only operation: the check is reported unmeasured and passes.
    #[default]
    Absent,
}

/// One decoder output to gate.
#[derive(Debug, Clone)]
pub struct FrameInput {
    pub frame: u64,
    pub posterior: [f64; 4],
    pub artifact: ArtifactInput,
    /// Per-frame overrides of the monitor's default task context.
    pub ctx: Option<TaskContext>,
    /// Ground-truth intent, when known; used only for scoring.
    pub label: Option<Action>,
}

impl FrameInput {
    pub fn posterior_only(frame: u64, posterior: [f64; 4]) -> Self {
        Self { frame, posterior, artifact: ArtifactInput::Absent, ctx: None, label: None }
    }
}

#[derive(Debug, Clone)]
struct SearchResult {
    outcome: PlanOutcome,
    /// Why no plan exists (budget overruns are reported as φ3).
    diagnosis: Option<Invariant>,
}

/// Frame period used for trace timestamps (100 Hz).
pub const FRAME_PERIOD_MS: u64 = 10;

/// A single-owner gate state machine over one world.
#[derive(Debug, Clone)]
pub struct Monitor {
    cfg: MonitorConfig,
    task: Arc<GroundTask>,
    init: WorldState,
    state: WorldState,
    bits: StateBits,
    default_ctx: TaskContext,
    history: IntentHistory,
    scorer: Option<ArtifactScorer>,
    frames_seen: u64,
    cache: HashMap<(Goal, StateBits), SearchResult>,
}

impl Monitor {
    pub fn new(
        cfg: MonitorConfig,
        domain: Arc<DomainDef>,
        objects: &[TypedName],
        init: WorldState,
        default_ctx: TaskContext,
        rules: LogicalRules,
    ) -> Result<Self, MonitorError> {
        cfg.validate()?;
        let task = Arc::new(GroundTask::new(domain, objects, rules)?);
        let bits = task.encode(&init)?;
        let history = IntentHistory::new(cfg.k_frames)?;
        Ok(Self { cfg, task, state: init.clone(), init, bits, default_ctx, history, scorer: None, frames_seen: 0, cache: HashMap::new() })
    }

    /// Monitor over a problem's objects and initial state, defaulting the task context to the
    /// first declared robot, item, location and orientation.
    pub fn for_problem(cfg: MonitorConfig, domain: Arc<DomainDef>, problem: &ProblemDef) -> Result<Self, MonitorError> {
        let ctx = TaskContext::first_objects(problem, &domain);
        Self::new(cfg, domain, &problem.objects, problem.init.clone(), ctx, LogicalRules::default())
    }

    pub fn with_scorer(mut self, scorer: ArtifactScorer) -> Self {
        self.scorer = Some(scorer);
        self
    }

    pub fn config(&self) -> &MonitorConfig {
        &self.cfg
    }

    pub fn domain(&self) -> &Arc<DomainDef> {
        self.task.domain()
    }

    pub fn objects(&self) -> &[TypedName] {
        self.task.objects()
    }

    pub fn rules(&self) -> &LogicalRules {
        self.task.rules()
    }

    pub fn initial_state(&self) -> &WorldState {
        &self.init
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn default_ctx(&self) -> &TaskContext {
        &self.default_ctx
    }

    pub fn history(&self) -> &IntentHistory {
        &self.history
    }

    pub fn frames_seen(&self) -> u64 {
        self.frames_seen
    }

    /// Back to the initial state with empty history; the plan cache is kept.
    pub fn reset(&mut self) {
        self.state = self.init.clone();
        self.bits = self.task.encode(&self.init).expect("initial state encoded at construction");
        self.history.clear();
        self.frames_seen = 0;
    }

    /// Header describing this monitor, for traces.
    pub fn trace_header(&self) -> TraceHeader {
        TraceHeader::new(self)
    }

    fn search(&mut self, goal: &Goal, goal_bits: &StateBits) -> SearchResult {
        let key = (goal.clone(), self.bits.clone());
        if let Some(hit) = self.cache.get(&key) {
            return hit.clone();
        }
        let outcome = self.task.search(&self.bits, goal_bits, self.cfg.limits, true);
        let diagnosis = match outcome {
            PlanOutcome::Found(_) => None,
            PlanOutcome::NoPlan => Some(self.task.diagnose(&self.bits, goal_bits, self.cfg.limits)),
            PlanOutcome::BudgetExceeded => Some(Invariant::Phi3),
        };
        let result = SearchResult { outcome, diagnosis };
        if self.cache.len() >= self.cfg.plan_cache_capacity {
            self.cache.clear();
        }
        self.cache.insert(key, result.clone());
        result
    }

    /// Gates one frame. Input errors leave the monitor untouched.
    pub fn step(&mut self, input: &FrameInput) -> Result<(MonitorDecision, TraceRecord), MonitorError> {
        let started = Instant::now();
        let raw = IntentPosterior::new(input.posterior)?;
        let cal = calibrate(&raw, self.cfg.effective_alpha())?;
        let artifact = match &input.artifact {
            ArtifactInput::Window(w) => Some(self.scorer.as_ref().ok_or(MonitorError::MissingBaseline)?.score(w)?),
            ArtifactInput::Score(s) if !s.is_finite() => return Err(MonitorError::ArtifactScore(*s)),
            ArtifactInput::Score(s) => Some(*s),
            ArtifactInput::Absent => None,
        };
        let ctx = match &input.ctx {
            Some(c) => self.default_ctx.overridden_by(c),
            None => self.default_ctx.clone(),
        };
        let intent = cal.argmax();
        // Grounding needs these fields whatever the checks say; a missing one is a setup error.
        let goal = ground_to_goal(intent, &ctx)?;

        self.frames_seen += 1;
        self.history.push(&cal);
        let checks = self.cfg.checks;
        let measurements = Measurements {
            entropy: cal.entropy(),
            artifact,
            oscillation: self.history.oscillation_index(),
            argmax: intent,
            max_prob: cal.max_prob(),
        };
        let warming_up = checks.oscillation_check && self.cfg.warmup_halt && self.frames_seen <= self.cfg.k_frames as u64;

        let mut outcomes = CheckOutcomes::ALL_PASS;
        outcomes.set(Check::Entropy, !checks.entropy_check || measurements.entropy < self.cfg.tau_h);
        outcomes.set(Check::Artifact, !checks.artifact_check || artifact.is_none_or(|a| a < self.cfg.tau_a));
        outcomes.set(Check::Oscillation, !checks.oscillation_check || (!warming_up && measurements.oscillation < self.cfg.tau_omega));

        let mut plan = None;
        let mut budget_exceeded = false;
        if outcomes.first_failure().is_none() {
            match self.task.encode_goal(&goal) {
                // The goal mentions atoms outside the grounded world: no valid transition reaches it.
                Err(_) => outcomes.set(Check::ValidTransition, !checks.logical_check),
                Ok(goal_bits) => {
                    let result = self.search(&goal, &goal_bits);
                    budget_exceeded = result.outcome == PlanOutcome::BudgetExceeded;
                    if let PlanOutcome::Found(p) = result.outcome {
                        if checks.logical_check {
                            if let Some(v) = check_logical(self.task.domain(), self.task.rules(), &self.state, &p).first() {
                                outcomes.set(Check::for_invariant(v.invariant), false);
                            }
                        }
                        plan = Some(p);
                    } else if let (true, Some(inv)) = (checks.logical_check, result.diagnosis) {
                        outcomes.set(Check::for_invariant(inv), false);
                    }
                }
            }
        }

        let cause = gate(&outcomes, warming_up);
        let action = match cause {
            None => plan.as_ref().and_then(|p| p.steps().first().cloned()),
            Some(_) => None,
        };
        if let Some(a) = &action {
            let next = self.state.apply(self.task.domain(), a)?;
            self.bits = self.task.encode(&next)?;
            self.state = next;
        }
        let decision = MonitorDecision {
            verdict: if cause.is_some() { Verdict::Halt } else { Verdict::Execute },
            cause: cause.unwrap_or(Cause::None),
            action,
            measurements,
            budget_exceeded,
        };
        let latency_us = started.elapsed().as_secs_f64() * 1e6;
        let record = TraceRecord {
            frame: input.frame,
            timestamp_ms: input.frame * FRAME_PERIOD_MS,
            raw: Some(input.posterior),
            calibrated: Some(*cal.probs()),
            decision: Some(decision.clone()),
            plan,
            latency_us,
            label: input.label,
            ctx: input.ctx.clone(),
            rejected: None,
        };
        Ok((decision, record))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intent::IntentPosterior;
    use crate::planner::{assets, Atom, GroundAction};
    use proptest::prelude::*;

    fn monitor(cfg: MonitorConfig) -> Monitor {
        Monitor::for_problem(cfg, Arc::new(assets::domain()), &assets::problem()).unwrap()
    }

    fn no_warmup() -> MonitorConfig {
        MonitorConfig { warmup_halt: false, ..Default::default() }
    }

    fn frame(i: u64, p: [f64; 4]) -> FrameInput {
        FrameInput::posterior_only(i, p)
    }

    const CONFIDENT_GRASP: [f64; 4] = [0.97, 0.01, 0.01, 0.01];

    #[test]
    fn uniform_posterior_halts_on_entropy() {
        let mut m = monitor(no_warmup());
        let (d, _) = m.step(&frame(0, [0.25; 4])).unwrap();
        assert_eq!((d.verdict, d.cause), (Verdict::Halt, Cause::LowConfidence));
        assert_eq!(d.measurements.entropy, 1.0);
    }

    #[test]
    fn confident_grasp_executes_and_advances_state() {
        let mut m = monitor(no_warmup());
        let (d, rec) = m.step(&frame(0, CONFIDENT_GRASP)).unwrap();
        assert_eq!(d.verdict, Verdict::Execute);
        assert_eq!(d.cause, Cause::None);
        assert_eq!(d.action, Some(GroundAction::new("grasp", ["r1", "cup", "table"])));
        assert!(d.measurements.entropy < 0.75);
        assert_eq!(d.measurements.artifact, None);
        assert!(m.state().contains(&Atom::new("holding", ["r1", "cup"])));
        assert_eq!(rec.plan.unwrap().len(), 1);
        // Goal now holds: execute with nothing left to do.
        let (d, _) = m.step(&frame(1, CONFIDENT_GRASP)).unwrap();
        assert_eq!((d.verdict, d.action), (Verdict::Execute, None));
    }

    #[test]
    fn artifact_score_above_threshold_halts() {
        let mut m = monitor(no_warmup());
        let before = m.state().clone();
        let input = FrameInput { artifact: ArtifactInput::Score(3.0), ..frame(0, CONFIDENT_GRASP) };
        let (d, _) = m.step(&input).unwrap();
        assert_eq!((d.verdict, d.cause), (Verdict::Halt, Cause::HighArtifact));
        assert_eq!(m.state(), &before);
    }

    #[test]
    fn oscillating_intent_halts() {
        let mut m = monitor(no_warmup());
        let a = CONFIDENT_GRASP;
        let b = [0.01, 0.01, 0.01, 0.97];
        m.step(&frame(0, a)).unwrap();
        m.step(&frame(1, b)).unwrap();
        m.step(&frame(2, a)).unwrap();
        let (d, _) = m.step(&frame(3, b)).unwrap();
        // Three flips over a ten-frame window.
        assert_eq!(d.measurements.oscillation, 3.0 / 9.0);
        assert_eq!(d.cause, Cause::HighOscillation);
    }

    #[test]
    fn warmup_halts_first_k_frames() {
        let mut m = monitor(MonitorConfig::default());
        for i in 0..10 {
            let (d, _) = m.step(&frame(i, CONFIDENT_GRASP)).unwrap();
            assert_eq!(d.cause, Cause::Warmup, "frame {i}");
        }
        let (d, _) = m.step(&frame(10, CONFIDENT_GRASP)).unwrap();
        assert_eq!(d.verdict, Verdict::Execute);
    }

    #[test]
    fn logical_causes() {
        let ctx = |l: &str, o: &str| Some(TaskContext { location: Some(l.into()), orientation: Some(o.into()), ..Default::default() });
        let mut m = monitor(no_warmup());
        let (d, _) = m.step(&FrameInput { ctx: ctx("stairs", "up"), ..frame(0, [0.01, 0.01, 0.97, 0.01]) }).unwrap();
        assert_eq!(d.cause, Cause::Logical(Invariant::Phi1));
        let mut m = monitor(no_warmup());
        let (d, _) = m.step(&FrameInput { ctx: ctx("table", "inverted"), ..frame(0, [0.01, 0.01, 0.01, 0.97]) }).unwrap();
        assert_eq!(d.cause, Cause::Logical(Invariant::Phi3));

        let mut problem = assets::problem();
        problem.init.remove(&Atom::new("safe-configuration", Vec::<&str>::new()));
        let mut m = Monitor::for_problem(no_warmup(), Arc::new(assets::domain()), &problem).unwrap();
        let (d, _) = m.step(&FrameInput { ctx: ctx("shelf", "up"), ..frame(0, [0.01, 0.01, 0.97, 0.01]) }).unwrap();
        assert_eq!(d.cause, Cause::Logical(Invariant::Phi2));
        // Grasping in place needs no safe configuration.
        let (d, _) = m.step(&frame(1, CONFIDENT_GRASP)).unwrap();
        assert_eq!(d.verdict, Verdict::Execute);
    }

    #[test]
    fn earlier_check_wins_when_several_fail() {
        let mut m = monitor(no_warmup());
        m.step(&frame(0, [0.01, 0.01, 0.97, 0.01])).unwrap();
        // High entropy, artifact, oscillation and an unreachable target all at once.
        let input = FrameInput {
            artifact: ArtifactInput::Score(9.0),
            ctx: Some(TaskContext { location: Some("stairs".into()), ..Default::default() }),
            ..frame(1, [0.3, 0.26, 0.22, 0.22])
        };
        let (d, _) = m.step(&input).unwrap();
        assert_eq!(d.cause, Cause::LowConfidence);
        let mut m2 = monitor(no_warmup());
        m2.step(&frame(0, [0.01, 0.01, 0.97, 0.01])).unwrap();
        let (d, _) = m2.step(&FrameInput { posterior: CONFIDENT_GRASP, ..input }).unwrap();
        assert_eq!(d.cause, Cause::HighArtifact);
    }

    #[test]
    fn disabled_checks_pass() {
        let mut cfg = no_warmup();
        cfg.checks.entropy_check = false;
        cfg.checks.logical_check = false;
        let mut m = monitor(cfg);
        let (d, _) = m.step(&frame(0, [0.25; 4])).unwrap();
        assert_eq!(d.verdict, Verdict::Execute);
        let ctx = Some(TaskContext { location: Some("stairs".into()), ..Default::default() });
        let (d, _) = m.step(&FrameInput { ctx, ..frame(1, [0.0, 0.0, 1.0, 0.0]) }).unwrap();
        assert_eq!((d.verdict, d.action), (Verdict::Execute, None));
    }

    #[test]
    fn tau_h_zero_halts_everything() {
        let mut m = monitor(MonitorConfig { tau_h: 0.0, ..no_warmup() });
        let (d, _) = m.step(&frame(0, [1.0, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(d.cause, Cause::LowConfidence);
    }

    #[test]
    fn budget_overrun_is_conservative() {
        let cfg = MonitorConfig { limits: crate::planner::SearchLimits { max_depth: 16, max_states: 1 }, ..no_warmup() };
        let mut m = monitor(cfg);
        let ctx = Some(TaskContext { location: Some("shelf".into()), ..Default::default() });
        let (d, _) = m.step(&FrameInput { ctx, ..frame(0, [0.01, 0.97, 0.01, 0.01]) }).unwrap();
        assert_eq!(d.cause, Cause::Logical(Invariant::Phi3));
        assert!(d.budget_exceeded);
    }

    #[test]
    fn invalid_input_leaves_monitor_untouched() {
        let mut m = monitor(no_warmup());
        assert!(matches!(m.step(&frame(0, [0.5, 0.5, 0.5, 0.5])), Err(MonitorError::Posterior(_))));
        let bad = FrameInput { artifact: ArtifactInput::Score(f64::NAN), ..frame(0, CONFIDENT_GRASP) };
        assert!(m.step(&bad).unwrap_err().is_frame_error());
        let window = EegWindow::new(vec![vec![0.0; 250]; 2], 250.0, 0).unwrap();
        let bad = FrameInput { artifact: ArtifactInput::Window(Arc::new(window)), ..frame(0, CONFIDENT_GRASP) };
        assert!(matches!(m.step(&bad), Err(MonitorError::MissingBaseline)));
        assert_eq!(m.frames_seen(), 0);
        assert!(m.history().is_empty());
    }

    #[test]
    fn window_input_is_scored_against_baseline() {
        use crate::signal::BaselineStats;
        let scorer = ArtifactScorer::new(BaselineStats::new(vec![0.0; 2], vec![1.0; 2]).unwrap(), 250.0).unwrap();
        let mut m = monitor(no_warmup()).with_scorer(scorer);
        let window = EegWindow::new(vec![vec![0.0; 250]; 2], 250.0, 0).unwrap();
        let input = FrameInput { artifact: ArtifactInput::Window(Arc::new(window)), ..frame(0, CONFIDENT_GRASP) };
        let (d, _) = m.step(&input).unwrap();
        assert_eq!(d.measurements.artifact, Some(0.0));
        let wrong = EegWindow::new(vec![vec![0.0; 250]; 3], 250.0, 0).unwrap();
        let input = FrameInput { artifact: ArtifactInput::Window(Arc::new(wrong)), ..frame(1, CONFIDENT_GRASP) };
        assert!(matches!(m.step(&input), Err(MonitorError::Signal(_))));
    }

    fn posterior() -> impl Strategy<Value = [f64; 4]> {
        prop::array::uniform4(0.0f64..1.0).prop_filter_map("nonzero", |w| {
            let s: f64 = w.iter().sum();
            (s > 1e-6).then(|| IntentPosterior::new(w.map(|x| x / s)).ok()).flatten().map(|p| *p.probs())
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn lowering_tau_h_never_unhalts(stream in prop::collection::vec(posterior(), 1..30), lo in 0.0f64..1.0, hi in 0.0f64..1.0) {
            let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
            let mut cfg = MonitorConfig::default();
            cfg.checks.logical_check = false;
            let mut strict = monitor(MonitorConfig { tau_h: lo, ..cfg.clone() });
            let mut loose = monitor(MonitorConfig { tau_h: hi, ..cfg });
            for (i, p) in stream.iter().enumerate() {
                let (a, _) = strict.step(&frame(i as u64, *p)).unwrap();
                let (b, _) = loose.step(&frame(i as u64, *p)).unwrap();
                prop_assert!(!(b.is_halt() && !a.is_halt()));
            }
        }

        #[test]
        fn execute_iff_cause_none(stream in prop::collection::vec(posterior(), 1..30)) {
            let mut m = monitor(MonitorConfig::default());
            for (i, p) in stream.iter().enumerate() {
                let (d, _) = m.step(&frame(i as u64, *p)).unwrap();
                prop_assert_eq!(d.verdict == Verdict::Execute, d.cause == Cause::None);
            }
        }
    }
}
