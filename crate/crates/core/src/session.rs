//! Control frames, trials, scoring and the training / testing schedules.

use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::partner::Partner;
use crate::physics::{FrameEvents, PhysicsError, TraySim, TrayState};
use crate::sac::{LossReport, ReplayBuffer, SacAgent, SacError, Transition};
use crate::scalar::Scalar;

pub const TRIAL_SCHEMA: &str = "co-maze-trial/v1";

pub const GOAL_REWARD: f64 = 10.0;
pub const STEP_REWARD: f64 = -1.0;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Sac(#[from] SacError),
    #[error("invalid session config: {0}")]
    Config(String),
}

/// `+10` on the frame the goal is reached, `-1` otherwise.
pub fn reward(events: &FrameEvents) -> f64 {
    if events.goal_reached {
        GOAL_REWARD
    } else {
        STEP_REWARD
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    /// A block of updates after every training trial.
    TrialWise,
    /// One update after every training frame.
    FrameWise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SessionConfig {
    pub frames_per_trial: usize,
    pub frame_duration: f64,
    pub trials_per_block: usize,
    pub blocks: usize,
    pub updates_per_trial_end: usize,
    pub buffer_trials: usize,
    pub mode: UpdateMode,
    /// `(play_frames, offline_updates)` phases of the preliminary schedule.
    pub offline_update_schedule: Vec<(usize, usize)>,
    pub realtime: bool,
    pub premodel_trials: usize,
    pub premodel_offline_updates: usize,
    /// Apply the per-trial updates during the pre-model trials as well.
    pub premodel_online_updates: bool,
    pub test_trials: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            frames_per_trial: 200,
            frame_duration: 0.2,
            trials_per_block: 10,
            blocks: 8,
            updates_per_trial_end: 200,
            buffer_trials: 5,
            mode: UpdateMode::TrialWise,
            offline_update_schedule: vec![(500, 20_000); 7],
            realtime: false,
            premodel_trials: 8,
            premodel_offline_updates: 30_000,
            premodel_online_updates: false,
            test_trials: 10,
        }
    }
}

impl SessionConfig {
    pub fn trials(&self) -> usize {
        self.trials_per_block * self.blocks
    }

    pub fn buffer_capacity(&self) -> usize {
        self.buffer_trials * self.frames_per_trial
    }

    pub fn trial_seconds(&self) -> f64 {
        self.frames_per_trial as f64 * self.frame_duration
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        let err = |m: &str| Err(SessionError::Config(m.to_string()));
        if self.frames_per_trial == 0 || self.trials_per_block == 0 || self.blocks == 0 {
            return err("frames_per_trial, trials_per_block and blocks must be positive");
        }
        if self.buffer_trials == 0 {
            return err("buffer_trials must be positive");
        }
        if !(self.frame_duration.is_finite() && self.frame_duration > 0.0) {
            return err("frame_duration must be positive");
        }
        if (self.trial_seconds() - 40.0).abs() > 1e-9 {
            return Err(SessionError::Config(format!(
                "a trial must last 40 s, got {} frames of {} s",
                self.frames_per_trial, self.frame_duration
            )));
        }
        Ok(())
    }
}

/// One control frame as logged: the state the actions were chosen in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameLog {
    pub state: [f64; 8],
    pub a_agent: f64,
    pub a_human: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: usize,
    pub spawn_corner: usize,
    pub partner: String,
    pub train: bool,
    pub success: bool,
    pub frames_used: usize,
    pub score: u32,
    /// Ended early by a partner failure, an abort, or a frame budget.
    pub aborted: bool,
    pub frames: Vec<FrameLog>,
    pub final_state: [f64; 8],
}

#[derive(Serialize)]
struct TrialLineOut<'a> {
    schema: &'a str,
    #[serde(flatten)]
    record: &'a TrialRecord,
}

#[derive(Deserialize)]
struct TrialLineIn {
    schema: String,
    #[serde(flatten)]
    record: TrialRecord,
}

/// `200 - frames_used` on success, otherwise zero.
pub fn score(success: bool, frames_used: usize, frames_per_trial: usize) -> u32 {
    if success {
        frames_per_trial.saturating_sub(frames_used) as u32
    } else {
        0
    }
}

impl TrialRecord {
    pub fn total_reward(&self) -> f64 {
        self.frames.iter().map(|f| f.reward).sum()
    }

    /// One line of the trial log, without the trailing newline.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&TrialLineOut {
            schema: TRIAL_SCHEMA,
            record: self,
        })
        .expect("trial records serialise")
    }

    pub fn from_json_line(line: &str) -> Result<Self, String> {
        let parsed: TrialLineIn = serde_json::from_str(line).map_err(|e| e.to_string())?;
        if parsed.schema != TRIAL_SCHEMA {
            return Err(format!("unsupported trial schema {:?}", parsed.schema));
        }
        Ok(parsed.record)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub trials_per_block: usize,
    pub successes: Vec<u32>,
    pub mean_scores: Vec<f64>,
}

impl LearningCurve {
    pub fn from_records(records: &[TrialRecord], trials_per_block: usize) -> Self {
        let mut successes = Vec::new();
        let mut mean_scores = Vec::new();
        for block in records.chunks(trials_per_block) {
            successes.push(block.iter().filter(|r| r.success).count() as u32);
            mean_scores.push(block.iter().map(|r| r.score as f64).sum::<f64>() / block.len() as f64);
        }
        Self {
            trials_per_block,
            successes,
            mean_scores,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("block,successes,trials,mean_score\n");
        for (i, (s, m)) in self.successes.iter().zip(&self.mean_scores).enumerate() {
            out.push_str(&format!("{},{},{},{}\n", i + 1, s, self.trials_per_block, m));
        }
        out
    }
}

/// What an attached UI or logger may ask of the running loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameControl {
    Continue,
    Abort,
}

/// Hooks for UI channels and logs. Every method has a no-op default.
pub trait SessionObserver<S> {
    fn trial_started(&mut self, _trial_index: usize, _spawn_corner: usize) {}

    fn frame(&mut self, _trial_index: usize, _frame: usize, _state: &TrayState<S>, _score_so_far: u32) -> FrameControl {
        FrameControl::Continue
    }

    fn trial_ended(&mut self, _record: &TrialRecord) {}

    fn block_ended(&mut self, _block: usize, _curve: &LearningCurve) {}

    fn updated(&mut self, _report: &LossReport) {}
}

impl<S> SessionObserver<S> for () {}

/// Who sits in the agent seat for a trial.
pub enum Seat<'a, S> {
    /// Stochastic actions, transitions stored, updates applied.
    Train {
        agent: &'a mut SacAgent<S>,
        buffer: &'a mut ReplayBuffer<S>,
    },
    /// Deterministic mean actions; nothing is mutated.
    Test(&'a SacAgent<S>),
}

impl<S> Seat<'_, S> {
    pub fn is_train(&self) -> bool {
        matches!(self, Seat::Train { .. })
    }
}

fn obs_f64<S: Scalar>(s: &TrayState<S>) -> [f64; 8] {
    s.observation().map(|v| v.as_f64())
}

/// Applies `n` gradient updates, reporting each to the observer.
pub fn apply_updates<S: Scalar, R: Rng>(
    agent: &mut SacAgent<S>,
    buffer: &ReplayBuffer<S>,
    n: usize,
    rng: &mut R,
    observer: &mut dyn SessionObserver<S>,
) -> Result<(), SessionError> {
    for _ in 0..n {
        let report = agent.gradient_update(buffer, rng)?;
        observer.updated(&report);
    }
    Ok(())
}

/// Plays one trial of at most `cfg.frames_per_trial` frames.
///
/// A partner failure or an abort request ends the trial early as a no-score
/// trial: it is recorded with `aborted` set and triggers no trial-end updates.
#[allow(clippy::too_many_arguments)]
pub fn run_trial<S: Scalar, R: Rng>(
    seat: Seat<'_, S>,
    partner: &mut Partner,
    sim: &TraySim<S>,
    cfg: &SessionConfig,
    trial_index: usize,
    rng: &mut R,
    observer: &mut dyn SessionObserver<S>,
) -> Result<TrialRecord, SessionError> {
    run_trial_limited(seat, partner, sim, cfg, trial_index, cfg.frames_per_trial, rng, observer)
}

#[allow(clippy::too_many_arguments)]
fn run_trial_limited<S: Scalar, R: Rng>(
    mut seat: Seat<'_, S>,
    partner: &mut Partner,
    sim: &TraySim<S>,
    cfg: &SessionConfig,
    trial_index: usize,
    frame_limit: usize,
    rng: &mut R,
    observer: &mut dyn SessionObserver<S>,
) -> Result<TrialRecord, SessionError> {
    let corner = trial_index % sim.geometry().spawn_corners.len();
    let mut state = sim.reset(trial_index);
    let train = seat.is_train();
    let frame_limit = frame_limit.min(cfg.frames_per_trial);
    let frame_time = Duration::from_secs_f64(cfg.frame_duration);
    observer.trial_started(trial_index, corner);

    let start = Instant::now();
    let mut frames = Vec::with_capacity(frame_limit);
    let mut success = false;
    let mut aborted = false;
    let mut partner_error = None;
    for f in 0..frame_limit {
        let a_human: S = match partner.action(&state) {
            Ok(a) => a,
            Err(e) => {
                aborted = true;
                partner_error = Some(e);
                break;
            }
        };
        let obs = state.observation();
        let a_agent = match &seat {
            Seat::Train { agent, .. } => agent.act_stochastic(&obs, rng)?.0,
            Seat::Test(agent) => agent.act_deterministic(&obs)?,
        };
        let (next, events) = sim.step_frame(&state, a_agent, a_human)?;
        let r = reward(&events);
        frames.push(FrameLog {
            state: obs_f64(&state),
            a_agent: a_agent.as_f64(),
            a_human: a_human.as_f64(),
            reward: r,
        });
        if let Seat::Train { agent, buffer } = &mut seat {
            buffer.push(Transition {
                state: obs,
                action: a_agent,
                reward: S::lit(r),
                next_state: next.observation(),
                done: events.goal_reached,
            });
            if cfg.mode == UpdateMode::FrameWise {
                apply_updates(agent, buffer, 1, rng, observer)?;
            }
        }
        state = next;
        let control = observer.frame(
            trial_index,
            f,
            &state,
            score(true, f + 1, cfg.frames_per_trial),
        );
        if cfg.realtime {
            let deadline = frame_time * (f as u32 + 1);
            if let Some(wait) = deadline.checked_sub(start.elapsed()) {
                std::thread::sleep(wait);
            }
        }
        if events.goal_reached {
            success = true;
            break;
        }
        if control == FrameControl::Abort {
            aborted = true;
            break;
        }
    }
    if frames.len() < frame_limit && !success {
        aborted = true;
    }

    let frames_used = frames.len();
    let record = TrialRecord {
        trial_index,
        spawn_corner: corner,
        partner: partner.identity(),
        train,
        success,
        frames_used,
        score: score(success, frames_used, cfg.frames_per_trial),
        aborted,
        frames,
        final_state: obs_f64(&state),
    };
    observer.trial_ended(&record);
    if let Some(e) = partner_error {
        log::warn!("trial {trial_index} aborted: {e}");
    }
    if let Seat::Train { agent, buffer } = seat {
        if cfg.mode == UpdateMode::TrialWise && !aborted {
            apply_updates(agent, buffer, cfg.updates_per_trial_end, rng, observer)?;
        }
    }
    Ok(record)
}

/// Result of a co-learning session.
#[derive(Debug, Clone)]
pub struct SessionOutcome<S> {
    pub records: Vec<TrialRecord>,
    pub curve: LearningCurve,
    pub buffer: ReplayBuffer<S>,
}

/// Trains `agent` with `partner` over `blocks x trials_per_block` trials,
/// with a fresh FIFO buffer of `buffer_trials` trials.
pub fn run_colearning_session<S: Scalar, R: Rng>(
    agent: &mut SacAgent<S>,
    partner: &mut Partner,
    sim: &TraySim<S>,
    cfg: &SessionConfig,
    rng: &mut R,
    observer: &mut dyn SessionObserver<S>,
) -> Result<SessionOutcome<S>, SessionError> {
    cfg.validate()?;
    if cfg.mode != UpdateMode::TrialWise {
        return Err(SessionError::Config("co-learning requires trial-wise updates".into()));
    }
    let mut buffer = ReplayBuffer::bounded(cfg.buffer_capacity());
    let mut records = Vec::with_capacity(cfg.trials());
    for t in 0..cfg.trials() {
        let seat = Seat::Train {
            agent: &mut *agent,
            buffer: &mut buffer,
        };
        records.push(run_trial(seat, partner, sim, cfg, t, rng, observer)?);
        if (t + 1) % cfg.trials_per_block == 0 {
            let curve = LearningCurve::from_records(&records, cfg.trials_per_block);
            observer.block_ended((t + 1) / cfg.trials_per_block - 1, &curve);
        }
    }
    let curve = LearningCurve::from_records(&records, cfg.trials_per_block);
    Ok(SessionOutcome {
        records,
        curve,
        buffer,
    })
}

/// Builds the seed agent: a fresh agent plays `premodel_trials` trials with
/// the expert partner into an unbounded buffer, then trains offline.
pub fn make_premodel<S: Scalar, R: Rng>(
    agent: SacAgent<S>,
    expert: &mut Partner,
    sim: &TraySim<S>,
    cfg: &SessionConfig,
    rng: &mut R,
    observer: &mut dyn SessionObserver<S>,
) -> Result<(SacAgent<S>, Vec<TrialRecord>), SessionError> {
    cfg.validate()?;
    let mut agent = agent;
    let mut buffer = ReplayBuffer::unbounded();
    let trial_cfg = SessionConfig {
        updates_per_trial_end: if cfg.premodel_online_updates {
            cfg.updates_per_trial_end
        } else {
            0
        },
        mode: UpdateMode::TrialWise,
        ..cfg.clone()
    };
    let mut records = Vec::with_capacity(cfg.premodel_trials);
    for t in 0..cfg.premodel_trials {
        let seat = Seat::Train {
            agent: &mut agent,
            buffer: &mut buffer,
        };
        records.push(run_trial(seat, expert, sim, &trial_cfg, t, rng, observer)?);
    }
    apply_updates(&mut agent, &buffer, cfg.premodel_offline_updates, rng, observer)?;
    Ok((agent, records))
}

/// Test trials with a frozen agent, consecutive trial indices from `first`.
#[allow(clippy::too_many_arguments)]
pub fn run_test_block<S: Scalar, R: Rng>(
    agent: &SacAgent<S>,
    partner: &mut Partner,
    sim: &TraySim<S>,
    cfg: &SessionConfig,
    first: usize,
    trials: usize,
    rng: &mut R,
    observer: &mut dyn SessionObserver<S>,
) -> Result<Vec<TrialRecord>, SessionError> {
    (first..first + trials)
        .map(|t| run_trial(Seat::Test(agent), partner, sim, cfg, t, rng, observer))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationBlock {
    pub agent: String,
    pub records: Vec<TrialRecord>,
}

impl EvaluationBlock {
    pub fn scores(&self) -> Vec<u32> {
        self.records.iter().map(|r| r.score).collect()
    }

    pub fn mean_score(&self) -> f64 {
        self.records.iter().map(|r| r.score as f64).sum::<f64>() / self.records.len().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub partner: String,
    pub blocks: Vec<EvaluationBlock>,
}

impl EvaluationReport {
    pub fn records(&self) -> impl Iterator<Item = &TrialRecord> {
        self.blocks.iter().flat_map(|b| &b.records)
    }

    /// Mean score per distinct agent over every block it appeared in.
    pub fn mean_by_agent(&self) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64, usize)> = Vec::new();
        for b in &self.blocks {
            let sum: f64 = b.records.iter().map(|r| r.score as f64).sum();
            match out.iter_mut().find(|(a, _, _)| *a == b.agent) {
                Some(e) => {
                    e.1 += sum;
                    e.2 += b.records.len();
                }
                None => out.push((b.agent.clone(), sum, b.records.len())),
            }
        }
        out.into_iter().map(|(a, s, n)| (a, s / n.max(1) as f64)).collect()
    }

    /// Columns: `block,agent,trial,spawn_corner,success,frames_used,score`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("block,agent,trial,spawn_corner,success,frames_used,score\n");
        for (i, b) in self.blocks.iter().enumerate() {
            for r in &b.records {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    i + 1,
                    b.agent,
                    r.trial_index,
                    r.spawn_corner,
                    r.success,
                    r.frames_used,
                    r.score
                ));
            }
        }
        out
    }
}

/// Own agent, each foreign agent in turn, then the own agent again; one
/// test block each.
pub fn run_evaluation_rotation<S: Scalar, R: Rng>(
    partner: &mut Partner,
    own: (&str, &SacAgent<S>),
    foreign: &[(&str, &SacAgent<S>)],
    sim: &TraySim<S>,
    cfg: &SessionConfig,
    rng: &mut R,
    observer: &mut dyn SessionObserver<S>,
) -> Result<EvaluationReport, SessionError> {
    cfg.validate()?;
    let order: Vec<(&str, &SacAgent<S>)> = std::iter::once(own)
        .chain(foreign.iter().copied())
        .chain(std::iter::once(own))
        .collect();
    let mut blocks = Vec::with_capacity(order.len());
    for (i, (name, agent)) in order.into_iter().enumerate() {
        let records = run_test_block(agent, partner, sim, cfg, i * cfg.test_trials, cfg.test_trials, rng, observer)?;
        blocks.push(EvaluationBlock {
            agent: name.to_string(),
            records,
        });
    }
    Ok(EvaluationReport {
        partner: partner.identity(),
        blocks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreliminaryPoint {
    pub phase: usize,
    pub online_frames: usize,
    pub online_updates: usize,
    pub offline_updates: usize,
    pub mean_test_score: f64,
    pub test_successes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreliminaryCurve {
    pub points: Vec<PreliminaryPoint>,
}

impl PreliminaryCurve {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("phase,online_frames,online_updates,offline_updates,mean_test_score,test_successes\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.phase, p.online_frames, p.online_updates, p.offline_updates, p.mean_test_score, p.test_successes
            ));
        }
        out
    }
}

/// Alternates frame-wise online play with offline update phases, testing
/// the frozen agent after each phase. The buffer is unbounded.
pub fn run_preliminary_schedule<S: Scalar, R: Rng>(
    agent: &mut SacAgent<S>,
    partner: &mut Partner,
    sim: &TraySim<S>,
    cfg: &SessionConfig,
    rng: &mut R,
    observer: &mut dyn SessionObserver<S>,
) -> Result<(PreliminaryCurve, Vec<TrialRecord>), SessionError> {
    cfg.validate()?;
    if cfg.mode != UpdateMode::FrameWise {
        return Err(SessionError::Config("the preliminary schedule requires frame-wise updates".into()));
    }
    let mut buffer = ReplayBuffer::unbounded();
    let mut records = Vec::new();
    let mut points = Vec::new();
    let (mut online_frames, mut offline) = (0usize, 0usize);
    let mut trial = 0usize;
    let mut test_index = 0usize;
    for (phase, &(play_frames, updates)) in cfg.offline_update_schedule.iter().enumerate() {
        let mut left = play_frames;
        while left > 0 {
            let seat = Seat::Train {
                agent: &mut *agent,
                buffer: &mut buffer,
            };
            let rec = run_trial_limited(seat, partner, sim, cfg, trial, left, rng, observer)?;
            if rec.frames_used == 0 {
                return Err(SessionError::Config("partner produced no frames".into()));
            }
            left -= rec.frames_used;
            online_frames += rec.frames_used;
            trial += 1;
            records.push(rec);
        }
        apply_updates(agent, &buffer, updates, rng, observer)?;
        offline += updates;
        let tests = run_test_block(agent, partner, sim, cfg, test_index, cfg.test_trials, rng, observer)?;
        test_index += cfg.test_trials;
        points.push(PreliminaryPoint {
            phase: phase + 1,
            online_frames,
            online_updates: online_frames,
            offline_updates: offline,
            mean_test_score: tests.iter().map(|r| r.score as f64).sum::<f64>() / tests.len().max(1) as f64,
            test_successes: tests.iter().filter(|r| r.success).count(),
        });
    }
    Ok((PreliminaryCurve { points }, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partner::{PartnerKind, PartnerSpec};
    use crate::physics::{PhysicsConfig, TrayGeometry};
    use crate::sac::SacConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sim() -> TraySim<f64> {
        TraySim::new(TrayGeometry::default(), PhysicsConfig::default()).unwrap()
    }

    fn null_agent() -> SacAgent<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut a = SacAgent::new(SacConfig::default(), &mut rng).unwrap();
        a.actor.trunk = a.actor.trunk.zeros_like();
        a
    }

    #[test]
    fn rewards() {
        let hit = FrameEvents {
            goal_reached: true,
            ..Default::default()
        };
        assert_eq!(reward(&hit), 10.0);
        assert_eq!(reward(&FrameEvents::default()), -1.0);
    }

    #[test]
    fn scores() {
        assert_eq!(score(true, 37, 200), 163);
        assert_eq!(score(false, 200, 200), 0);
    }

    #[test]
    fn default_config_is_forty_seconds() {
        let c = SessionConfig::default();
        c.validate().unwrap();
        assert_eq!(c.buffer_capacity(), 1000);
        assert_eq!(c.trials(), 80);
        let bad = SessionConfig {
            frames_per_trial: 100,
            ..c
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn nothing_moves_with_null_players() {
        let sim = sim();
        let agent = null_agent();
        let mut partner = Partner::new(PartnerSpec::of_kind(PartnerKind::Null), TrayGeometry::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = SessionConfig::default();
        let rec = run_trial(Seat::Test(&agent), &mut partner, &sim, &cfg, 0, &mut rng, &mut ()).unwrap();
        assert!(!rec.success);
        assert_eq!(rec.score, 0);
        assert_eq!(rec.frames_used, 200);
        assert_eq!(rec.total_reward(), -200.0);
        assert_eq!(rec.final_state[..2], [-0.21, -0.21]);
    }

    #[test]
    fn trial_line_round_trip() {
        let sim = sim();
        let agent = null_agent();
        let mut partner = Partner::new(PartnerSpec::default(), TrayGeometry::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = SessionConfig::default();
        let rec = run_trial(Seat::Test(&agent), &mut partner, &sim, &cfg, 4, &mut rng, &mut ()).unwrap();
        let line = rec.to_json_line();
        assert!(line.contains(TRIAL_SCHEMA));
        assert_eq!(TrialRecord::from_json_line(&line).unwrap(), rec);
        let wrong = line.replace(TRIAL_SCHEMA, "co-maze-trial/v0");
        assert!(TrialRecord::from_json_line(&wrong).is_err());
    }

    #[test]
    fn curve_blocks() {
        let mk = |success: bool, frames_used: usize| TrialRecord {
            trial_index: 0,
            spawn_corner: 0,
            partner: "x".into(),
            train: true,
            success,
            frames_used,
            score: score(success, frames_used, 200),
            aborted: false,
            frames: vec![],
            final_state: [0.0; 8],
        };
        let recs = vec![mk(true, 50), mk(false, 200), mk(true, 100), mk(true, 100)];
        let c = LearningCurve::from_records(&recs, 2);
        assert_eq!(c.successes, vec![1, 2]);
        assert_eq!(c.mean_scores, vec![75.0, 100.0]);
        assert!(c.to_csv().starts_with("block,successes,trials,mean_score\n1,1,2,75\n"));
    }
}
