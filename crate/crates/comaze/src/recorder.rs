//! Session observers that write logs and drive the live service.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Result;
use comaze_core::physics::TrayState;
use comaze_core::sac::LossReport;
use comaze_core::session::{FrameControl, LearningCurve, SessionObserver, TrialRecord};
use comaze_core::Scalar;

use crate::service::Service;
use crate::wire::ServerMessage;

pub const TRAINING_LOG_HEADER: &str = "phase,update,q1_loss,q2_loss,v_loss,actor_loss,alpha_loss,entropy,alpha";

/// Appends loss rows to `training_log.csv` and trial lines to a JSONL log.
pub struct Recorder {
    pub phase: &'static str,
    losses: BufWriter<File>,
    trials: Option<BufWriter<File>>,
    error: Option<std::io::Error>,
    /// Print a line per finished block.
    pub verbose: bool,
}

impl Recorder {
    pub fn create(training_log: &Path, phase: &'static str) -> Result<Self> {
        let mut losses = BufWriter::new(File::create(training_log)?);
        writeln!(losses, "{TRAINING_LOG_HEADER}")?;
        Ok(Self {
            phase,
            losses,
            trials: None,
            error: None,
            verbose: false,
        })
    }

    /// Routes subsequent trial records to `path`.
    pub fn trial_log(&mut self, path: &Path) -> Result<()> {
        self.flush_trials()?;
        self.trials = Some(BufWriter::new(File::create(path)?));
        Ok(())
    }

    fn flush_trials(&mut self) -> Result<()> {
        if let Some(mut t) = self.trials.take() {
            t.flush()?;
        }
        Ok(())
    }

    fn keep(&mut self, r: std::io::Result<()>) {
        if let Err(e) = r {
            self.error.get_or_insert(e);
        }
    }

    pub fn finish(mut self) -> Result<()> {
        self.flush_trials()?;
        self.losses.flush()?;
        match self.error {
            Some(e) => Err(e.into()),
            None => Ok(()),
        }
    }
}

impl<S: Scalar> SessionObserver<S> for Recorder {
    fn trial_ended(&mut self, record: &TrialRecord) {
        if let Some(t) = &mut self.trials {
            let r = writeln!(t, "{}", record.to_json_line());
            self.keep(r);
        }
    }

    fn block_ended(&mut self, block: usize, curve: &LearningCurve) {
        if self.verbose {
            println!(
                "block {}: {}/{} successes, mean score {:.1}",
                block + 1,
                curve.successes[block],
                curve.trials_per_block,
                curve.mean_scores[block]
            );
        }
    }

    fn updated(&mut self, r: &LossReport) {
        let line = writeln!(
            self.losses,
            "{},{},{},{},{},{},{},{},{}",
            self.phase,
            r.update,
            r.q1_loss,
            r.q2_loss,
            r.v_loss,
            r.actor_loss,
            r.alpha_loss,
            r.entropy_estimate,
            r.alpha
        );
        self.keep(line);
    }
}

/// Forwards session events to the service and gates trials on the player.
pub struct LiveObserver<'a, S> {
    pub service: &'a Service,
    pub inner: &'a mut dyn SessionObserver<S>,
}

impl<S: Scalar> SessionObserver<S> for LiveObserver<'_, S> {
    fn trial_started(&mut self, trial_index: usize, spawn_corner: usize) {
        self.service.wait_until_ready();
        self.service.broadcast(ServerMessage::trial_start(trial_index));
        self.inner.trial_started(trial_index, spawn_corner);
    }

    fn frame(&mut self, trial_index: usize, frame: usize, s: &TrayState<S>, score_so_far: u32) -> FrameControl {
        self.service.broadcast(state_message(trial_index, frame, s, score_so_far));
        let inner = self.inner.frame(trial_index, frame, s, score_so_far);
        if self.service.take_abort() {
            log::warn!("trial {trial_index} aborted by the player");
            return FrameControl::Abort;
        }
        inner
    }

    fn trial_ended(&mut self, record: &TrialRecord) {
        self.service
            .broadcast(ServerMessage::trial_end(record.trial_index, record.score));
        self.inner.trial_ended(record);
    }

    fn block_ended(&mut self, block: usize, curve: &LearningCurve) {
        self.service.broadcast(ServerMessage::SessionEvent {
            block,
            curve: curve.successes.clone(),
        });
        self.inner.block_ended(block, curve);
    }

    fn updated(&mut self, report: &LossReport) {
        self.inner.updated(report);
    }
}

pub fn state_message<S: Scalar>(trial: usize, frame: usize, s: &TrayState<S>, score_so_far: u32) -> ServerMessage {
    ServerMessage::State {
        frame,
        x: s.x.as_f64(),
        y: s.y.as_f64(),
        theta: s.theta.as_f64(),
        phi: s.phi.as_f64(),
        trial,
        score_so_far,
        captured: s.captured,
    }
}
