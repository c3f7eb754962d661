use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::model::{other_action, shaped_posterior, MAX_CONFIDENCE};
use super::scenario::ScenarioSpec;
use super::HarnessError;
use crate::intent::Action;
use crate::monitor::{ArtifactInput, FrameInput};
use crate::planner::{Atom, DomainDef, ProblemDef, TaskContext};
use crate::signal::{BaselineStats, EegWindow, SosFilter, EMG_BAND_HZ};

/// Objects of a problem sorted by whether intents naming them can ever succeed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldCatalog {
    pub robot: String,
    pub items: Vec<String>,
    pub hazard_items: Vec<String>,
    pub locations: Vec<String>,
    pub hazard_locations: Vec<String>,
    pub orientations: Vec<String>,
    pub hazard_orientations: Vec<String>,
}

impl WorldCatalog {
    /// Locations are feasible when `reachable` holds initially; items when they rest at a
    /// feasible location; orientations when some valid rotation mentions them.
    pub fn from_problem(problem: &ProblemDef, domain: &DomainDef) -> Result<Self, HarnessError> {
        let holds = |a: Atom| problem.init.contains(&a);
        let of = |ty: &str| problem.objects_of(domain, ty).map(str::to_string).collect::<Vec<_>>();
        let robot = of("robot").into_iter().next().ok_or_else(|| HarnessError::Scenario("problem declares no robot".into()))?;
        let (locations, hazard_locations): (Vec<_>, Vec<_>) =
            of("location").into_iter().partition(|l| holds(Atom::new("reachable", [l.as_str()])));
        let (items, hazard_items): (Vec<_>, Vec<_>) =
            of("item").into_iter().partition(|i| locations.iter().any(|l| holds(Atom::new("item-at", [i.as_str(), l.as_str()]))));
        let orients = of("orientation");
        let (orientations, hazard_orientations): (Vec<_>, Vec<_>) = orients.iter().cloned().partition(|o| {
            orients.iter().any(|p| {
                holds(Atom::new("valid-rotation", [o.as_str(), p.as_str()])) || holds(Atom::new("valid-rotation", [p.as_str(), o.as_str()]))
            })
        });
        if items.is_empty() || locations.is_empty() || orientations.is_empty() {
            return Err(HarnessError::Scenario("problem needs at least one feasible item, location and orientation".into()));
        }
        Ok(Self { robot, items, hazard_items, locations, hazard_locations, orientations, hazard_orientations })
    }

    /// Context for a trial: fields the true intent uses are feasible; each other field names an
    /// infeasible object with probability `hazard_rate` (when one exists).
    pub fn draw_context<R: Rng + ?Sized>(&self, truth: Action, hazard_rate: f64, rng: &mut R) -> TaskContext {
        let mut pick = |feasible: &[String], hazard: &[String], used: bool| -> String {
            let hazardous = !used && !hazard.is_empty() && rng.random_bool(hazard_rate);
            let pool = if hazardous { hazard } else { feasible };
            pool[rng.random_range(0..pool.len())].clone()
        };
        let item = pick(&self.items, &self.hazard_items, matches!(truth, Action::Grasp | Action::Release));
        let location = pick(&self.locations, &self.hazard_locations, matches!(truth, Action::Release | Action::MoveTo));
        let orientation = pick(&self.orientations, &self.hazard_orientations, truth == Action::Rotate);
        TaskContext { robot: Some(self.robot.clone()), item: Some(item), location: Some(location), orientation: Some(orientation) }
    }
}

/// One trial of a generated session.
#[derive(Debug, Clone)]
pub struct SyntheticTrial {
    pub index: usize,
    pub bin: usize,
    pub snr_db: f64,
    pub truth: Action,
    /// Class the decoder settles on (shown on the scored final frame).
    pub decoded: Action,
    pub artifact: bool,
    pub ctx: TaskContext,
    /// Raw posterior of the scored frame.
    pub commit_posterior: [f64; 4],
    pub frames: Vec<FrameInput>,
}

impl SyntheticTrial {
    pub fn correct(&self) -> bool {
        self.decoded == self.truth
    }
}

/// Synthetic multichannel EEG for exercising the artifact scorer: a 10 Hz rhythm in white
/// noise, plus band-limited (20–45 Hz) EMG at a chosen amplitude.
#[derive(Debug, Clone)]
pub struct SyntheticEeg {
    pub channels: usize,
    pub samples: usize,
    pub sample_rate_hz: f64,
    emg: SosFilter,
}

impl SyntheticEeg {
    pub const EMG_AMPLITUDE: f64 = 3.0;

    pub fn new() -> Self {
        let fs = 250.0;
        Self {
            channels: 4,
            samples: 250,
            sample_rate_hz: fs,
            emg: SosFilter::butter_bandpass(4, EMG_BAND_HZ.0, EMG_BAND_HZ.1, fs).expect("valid band"),
        }
    }

    pub fn window<R: Rng + ?Sized>(&self, emg_amplitude: f64, t_index: u64, rng: &mut R) -> EegWindow {
        let white = Normal::new(0.0, 1.0).expect("unit normal");
        let rows = (0..self.channels)
            .map(|_| {
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                let mut x: Vec<f64> = (0..self.samples)
                    .map(|n| (std::f64::consts::TAU * 10.0 * n as f64 / self.sample_rate_hz + phase).sin() + 0.5 * white.sample(rng))
                    .collect();
                if emg_amplitude > 0.0 {
                    let burst: Vec<f64> = (0..self.samples).map(|_| white.sample(rng)).collect();
                    for (xi, e) in x.iter_mut().zip(self.emg.filtfilt(&burst)) {
                        *xi += emg_amplitude * e;
                    }
                }
                x
            })
            .collect();
        EegWindow::new(rows, self.sample_rate_hz, t_index).expect("well-formed window")
    }

    /// Baseline statistics from clean windows.
    pub fn baseline<R: Rng + ?Sized>(&self, windows: usize, rng: &mut R) -> BaselineStats {
        let clean: Vec<EegWindow> = (0..windows).map(|i| self.window(0.0, i as u64, rng)).collect();
        BaselineStats::from_windows(&clean).expect("clean windows")
    }
}

impl Default for SyntheticEeg {
    fn default() -> Self {
        Self::new()
    }
}

/// Seeded generator for repetition `rep`, mixed with the decoder model's own seed.
pub fn session_rng(spec: &ScenarioSpec, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(rep as u64));
    rng.set_stream(spec.model.rng_seed);
    rng
}

/// Trials for one repetition. Each trial: a uniformly drawn true intent, a decode that is
/// correct with the model's accuracy at the trial's SNR (or the artifact accuracy during an EMG
/// episode), and `dwell_frames` frames of which only the last carries the label. Non-final
/// frames of a trial may flip to another class.
pub fn generate_trials(spec: &ScenarioSpec, catalog: &WorldCatalog, rep: usize) -> Result<Vec<SyntheticTrial>, HarnessError> {
    spec.validate()?;
    let mut rng = session_rng(spec, rep);
    let d = &spec.dynamics;
    let eeg = spec.eeg_windows.then(SyntheticEeg::new);
    let jitter = Normal::new(0.0, d.frame_jitter).map_err(|e| HarnessError::Scenario(e.to_string()))?;
    let clean_z = Normal::new(0.0, d.clean_z_sd).map_err(|e| HarnessError::Scenario(e.to_string()))?;
    let burst_z = Normal::new(d.artifact_z, d.artifact_z_sd).map_err(|e| HarnessError::Scenario(e.to_string()))?;

    let mut frame = 0u64;
    let mut trials = Vec::with_capacity(spec.trials);
    for index in 0..spec.trials {
        let bin = spec.snr.bin_of(index, spec.trials);
        let snr_db = spec.snr.bin_snr(bin);
        let truth = Action::ALL[rng.random_range(0..4)];
        let artifact = rng.random_bool(spec.artifact_rate(snr_db));
        let accuracy = if artifact { d.artifact_accuracy } else { spec.model.accuracy_at(snr_db) };
        let correct = rng.random_bool(accuracy);
        let decoded = if correct { truth } else { other_action(truth, &mut rng) };
        // High-power muscle features also keep the decoder confident, whatever the cortical SNR.
        let confidence_snr = if artifact { spec.model.reference_snr_db } else { snr_db };
        let confidence = spec.model.draw_confidence(correct, confidence_snr, &mut rng);
        let ctx = catalog.draw_context(truth, d.hazard_rate, &mut rng);
        // Muscle activity dominates the features during an episode, so the decode locks onto
        // whatever class it produced instead of wandering.
        let flip_rate = match (artifact, correct) {
            (true, _) => d.artifact_flip_rate,
            (false, true) => d.flip_rate_correct,
            (false, false) => d.flip_rate_wrong,
        };

        let mut frames = Vec::with_capacity(d.dwell_frames);
        let mut commit_posterior = [0.0; 4];
        for j in 0..d.dwell_frames {
            let last = j + 1 == d.dwell_frames;
            let posterior = if !last && rng.random_bool(flip_rate) {
                let shown = other_action(decoded, &mut rng);
                shaped_posterior(shown, spec.model.draw_confidence(false, confidence_snr, &mut rng), &mut rng)
            } else {
                shaped_posterior(decoded, (confidence + jitter.sample(&mut rng)).min(MAX_CONFIDENCE), &mut rng)
            };
            let artifact_input = match &eeg {
                Some(g) => {
                    ArtifactInput::Window(Arc::new(g.window(if artifact { SyntheticEeg::EMG_AMPLITUDE } else { 0.0 }, frame, &mut rng)))
                }
                None => ArtifactInput::Score(if artifact { burst_z.sample(&mut rng) } else { clean_z.sample(&mut rng) }),
            };
            if last {
                commit_posterior = posterior;
            }
            frames.push(FrameInput { frame, posterior, artifact: artifact_input, ctx: Some(ctx.clone()), label: last.then_some(truth) });
            frame += 1;
        }
        trials.push(SyntheticTrial { index, bin, snr_db, truth, decoded, artifact, ctx, commit_posterior, frames });
    }
    Ok(trials)
}

/// The frame stream of repetition 0.
pub fn generate_session(spec: &ScenarioSpec, catalog: &WorldCatalog) -> Result<Vec<FrameInput>, HarnessError> {
    Ok(generate_trials(spec, catalog, 0)?.into_iter().flat_map(|t| t.frames).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intent::argmax;
    use crate::planner::assets;
    use crate::signal::ArtifactScorer;

    fn catalog() -> WorldCatalog {
        WorldCatalog::from_problem(&assets::problem(), &assets::domain()).unwrap()
    }

    #[test]
    fn kitchen_catalog() {
        let c = catalog();
        assert_eq!(c.robot, "r1");
        assert_eq!(c.items, ["cup", "book"]);
        assert_eq!(c.hazard_items, ["kettle"]);
        assert_eq!(c.hazard_locations, ["stairs"]);
        assert_eq!(c.hazard_orientations, ["inverted"]);
        assert_eq!(c.orientations.len(), 3);
    }

    #[test]
    fn perfect_decoder_without_noise() {
        let spec = ScenarioSpec {
            trials: 500,
            snr: crate::harness::SnrSchedule::constant(20.0),
            model: crate::harness::SyntheticDecoderModel { base_accuracy: 1.0, ..Default::default() },
            ..Default::default()
        };
        for t in generate_trials(&spec, &catalog(), 0).unwrap() {
            assert_eq!(Action::ALL[argmax(&t.commit_posterior)], t.truth);
            assert!(!t.artifact);
            assert_eq!(t.frames.last().unwrap().label, Some(t.truth));
            assert!(t.frames[..9].iter().all(|f| f.label.is_none()));
        }
    }

    #[test]
    fn chance_decoder() {
        let spec = ScenarioSpec {
            trials: 10_000,
            seed: 11,
            snr: crate::harness::SnrSchedule::constant(20.0),
            model: crate::harness::SyntheticDecoderModel { base_accuracy: 0.25, ..Default::default() },
            dynamics: crate::harness::TrialDynamics { dwell_frames: 1, ..Default::default() },
            ..Default::default()
        };
        let trials = generate_trials(&spec, &catalog(), 0).unwrap();
        let acc = trials.iter().filter(|t| t.correct()).count() as f64 / trials.len() as f64;
        assert!((acc - 0.25).abs() <= 0.03, "{acc}");
    }

    #[test]
    fn accuracy_falls_along_the_ramp() {
        let spec = ScenarioSpec {
            trials: 10_000,
            dynamics: crate::harness::TrialDynamics { dwell_frames: 1, ..Default::default() },
            ..Default::default()
        };
        let trials = generate_trials(&spec, &catalog(), 0).unwrap();
        let acc: Vec<f64> = (0..spec.snr.bins)
            .map(|b| {
                let in_bin: Vec<_> = trials.iter().filter(|t| t.bin == b).collect();
                in_bin.iter().filter(|t| t.correct()).count() as f64 / in_bin.len() as f64
            })
            .collect();
        assert!(acc.windows(2).all(|w| w[1] <= w[0]), "{acc:?}");
    }

    #[test]
    fn contexts_keep_the_true_intent_feasible() {
        let c = catalog();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let truth = Action::ALL[rng.random_range(0..4)];
            let ctx = c.draw_context(truth, 1.0, &mut rng);
            let item_ok = c.items.contains(ctx.item.as_ref().unwrap());
            let loc_ok = c.locations.contains(ctx.location.as_ref().unwrap());
            let ori_ok = c.orientations.contains(ctx.orientation.as_ref().unwrap());
            match truth {
                Action::Grasp => assert!(item_ok && !loc_ok && !ori_ok),
                Action::Release => assert!(item_ok && loc_ok && !ori_ok),
                Action::MoveTo => assert!(!item_ok && loc_ok && !ori_ok),
                Action::Rotate => assert!(!item_ok && !loc_ok && ori_ok),
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = ScenarioSpec { trials: 50, ..Default::default() };
        let a = generate_trials(&spec, &catalog(), 1).unwrap();
        let b = generate_trials(&spec, &catalog(), 1).unwrap();
        let c = generate_trials(&spec, &catalog(), 2).unwrap();
        let posts = |v: &[SyntheticTrial]| v.iter().flat_map(|t| t.frames.iter().map(|f| f.posterior)).collect::<Vec<_>>();
        assert_eq!(posts(&a), posts(&b));
        assert_ne!(posts(&a), posts(&c));
    }

    #[test]
    fn synthetic_emg_raises_artifact_score() {
        let g = SyntheticEeg::new();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let scorer = ArtifactScorer::new(g.baseline(40, &mut rng), g.sample_rate_hz).unwrap();
        let clean: f64 = (0..20).map(|i| scorer.score(&g.window(0.0, i, &mut rng)).unwrap()).sum::<f64>() / 20.0;
        let dirty: f64 = (0..20).map(|i| scorer.score(&g.window(SyntheticEeg::EMG_AMPLITUDE, i, &mut rng)).unwrap()).sum::<f64>() / 20.0;
        assert!(clean.abs() < 1.0, "{clean}");
        assert!(dirty > 2.5, "{dirty}");
    }
}
