//! Whoever holds the partner axis: a live human through the proportional
//! tray mapping, or a scripted surrogate.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::physics::{TrayGeometry, TrayState};
use crate::scalar::Scalar;

/// Gain from handheld-tray angle error to partner action.
pub const PROPORTIONAL_GAIN: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartnerError {
    #[error("live partner disconnected")]
    Disconnected,
    #[error("invalid partner spec: {0}")]
    Spec(String),
}

/// `clamp(k_p * (phi_human - phi), -1, 1)` with `k_p = 2`.
pub fn proportional_action<S: Scalar>(phi_human: S, phi: S) -> S {
    let a = S::lit(PROPORTIONAL_GAIN) * (phi_human - phi);
    a.max(-S::one()).min(S::one())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartnerKind {
    Live,
    Oracle,
    Noisy,
    Lazy,
    Null,
}

impl PartnerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Live => "live",
            Self::Oracle => "oracle",
            Self::Noisy => "noisy",
            Self::Lazy => "lazy",
            Self::Null => "null",
        }
    }
}

impl std::str::FromStr for PartnerKind {
    type Err = PartnerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(Self::Live),
            "oracle" => Ok(Self::Oracle),
            "noisy" => Ok(Self::Noisy),
            "lazy" => Ok(Self::Lazy),
            "null" => Ok(Self::Null),
            other => Err(PartnerError::Spec(format!("unknown partner kind {other:?}"))),
        }
    }
}

/// Configuration of the partner seat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PartnerSpec {
    pub kind: PartnerKind,
    /// Position gain on the waypoint error, per metre.
    pub gain: f64,
    /// Velocity damping, s/m.
    pub damping: f64,
    /// Feedback on the partner's own tilt angle, per radian. Zero gives the
    /// plain PD law, which settles into a wall-to-wall cycle on x rather
    /// than at the waypoint; around 10 (with `damping` 2) it settles.
    pub tilt_damping: f64,
    pub noise_std: f64,
    pub lazy_probability: f64,
    pub seed: u64,
    /// Identity recorded in trial logs; defaults to the kind name.
    pub name: Option<String>,
}

impl Default for PartnerSpec {
    fn default() -> Self {
        Self {
            kind: PartnerKind::Oracle,
            gain: 4.0,
            damping: 1.0,
            tilt_damping: 0.0,
            noise_std: 0.3,
            lazy_probability: 0.5,
            seed: 0,
            name: None,
        }
    }
}

impl PartnerSpec {
    pub fn of_kind(kind: PartnerKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn identity(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| self.kind.as_str().to_string())
    }

    pub fn validate(&self) -> Result<(), PartnerError> {
        let vals = [
            self.gain,
            self.damping,
            self.tilt_damping,
            self.noise_std,
            self.lazy_probability,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(PartnerError::Spec("non-finite parameter".into()));
        }
        if self.noise_std < 0.0 {
            return Err(PartnerError::Spec("noise_std must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.lazy_probability) {
            return Err(PartnerError::Spec("lazy_probability outside [0, 1]".into()));
        }
        Ok(())
    }
}

/// The x coordinate the scripted partner steers toward: the barrier gap while
/// the ball is on the start side, the goal afterwards.
pub fn waypoint_x(x: f64, y: f64, geom: &TrayGeometry) -> f64 {
    if geom.on_start_side(x, y) {
        geom.gap_center()[0]
    } else {
        geom.goal_center[0]
    }
}

/// Scripted expert: feedback on the partner's own axis only.
///
/// `clamp(gain * (w_x - x) - damping * vx - tilt_damping * phi, -1, 1)`.
pub fn oracle_action<S: Scalar>(s: &TrayState<S>, geom: &TrayGeometry, spec: &PartnerSpec) -> S {
    let wx = S::lit(waypoint_x(s.x.as_f64(), s.y.as_f64(), geom));
    let a = S::lit(spec.gain) * (wx - s.x) - S::lit(spec.damping) * s.vx - S::lit(spec.tilt_damping) * s.phi;
    a.max(-S::one()).min(S::one())
}

/// A handheld-tray reading from a live player.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartnerCommand {
    pub phi_human: f64,
    pub timestamp: f64,
}

const EMPTY_SLOT: u64 = u64::MAX;

/// Single-slot, lock-free handoff of the latest live command.
///
/// Network handlers publish; the session loop reads once per frame. Values are
/// clamped to the tilt limit on the way in.
#[derive(Debug, Clone)]
pub struct CommandMailbox {
    inner: Arc<MailboxInner>,
}

#[derive(Debug)]
struct MailboxInner {
    phi_bits: AtomicU64,
    stamp_bits: AtomicU64,
    closed: AtomicBool,
    max_tilt: f64,
}

impl CommandMailbox {
    pub fn new(max_tilt: f64) -> Self {
        Self {
            inner: Arc::new(MailboxInner {
                phi_bits: AtomicU64::new(EMPTY_SLOT),
                stamp_bits: AtomicU64::new(0f64.to_bits()),
                closed: AtomicBool::new(false),
                max_tilt,
            }),
        }
    }

    /// Stores a command, returning the clamped angle, or `None` when rejected
    /// as non-finite.
    pub fn publish(&self, cmd: PartnerCommand) -> Option<f64> {
        if !cmd.phi_human.is_finite() {
            return None;
        }
        let m = self.inner.max_tilt;
        let phi = cmd.phi_human.clamp(-m, m);
        self.inner.stamp_bits.store(cmd.timestamp.to_bits(), Ordering::Relaxed);
        self.inner.phi_bits.store(phi.to_bits(), Ordering::Release);
        Some(phi)
    }

    /// Most recent command, if any has ever arrived.
    pub fn latest(&self) -> Option<PartnerCommand> {
        let bits = self.inner.phi_bits.load(Ordering::Acquire);
        (bits != EMPTY_SLOT).then(|| PartnerCommand {
            phi_human: f64::from_bits(bits),
            timestamp: f64::from_bits(self.inner.stamp_bits.load(Ordering::Relaxed)),
        })
    }

    pub fn close(&self) {
        self.inner.closed.store(true, Ordering::Release);
    }

    pub fn reopen(&self) {
        self.inner.closed.store(false, Ordering::Release);
    }

    pub fn is_closed(&self) -> bool {
        self.inner.closed.load(Ordering::Acquire)
    }

    pub fn clear(&self) {
        self.inner.phi_bits.store(EMPTY_SLOT, Ordering::Release);
    }
}

/// A partner instance with its own random stream.
#[derive(Debug, Clone)]
pub struct Partner {
    spec: PartnerSpec,
    geom: TrayGeometry,
    rng: ChaCha8Rng,
    mailbox: Option<CommandMailbox>,
    warned_silent: bool,
}

impl Partner {
    pub fn new(spec: PartnerSpec, geom: TrayGeometry) -> Result<Self, PartnerError> {
        spec.validate()?;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            spec,
            geom,
            mailbox: None,
            warned_silent: false,
        })
    }

    /// A live partner reading from `mailbox`.
    pub fn live(mut spec: PartnerSpec, geom: TrayGeometry, mailbox: CommandMailbox) -> Result<Self, PartnerError> {
        spec.kind = PartnerKind::Live;
        let mut p = Self::new(spec, geom)?;
        p.mailbox = Some(mailbox);
        Ok(p)
    }

    pub fn spec(&self) -> &PartnerSpec {
        &self.spec
    }

    pub fn identity(&self) -> String {
        self.spec.identity()
    }

    /// Partner action for the current state.
    pub fn action<S: Scalar>(&mut self, s: &TrayState<S>) -> Result<S, PartnerError> {
        let one = S::one();
        Ok(match self.spec.kind {
            PartnerKind::Null => S::zero(),
            PartnerKind::Oracle => oracle_action(s, &self.geom, &self.spec),
            PartnerKind::Noisy => {
                let z: f64 = self.rng.sample(StandardNormal);
                let a = oracle_action(s, &self.geom, &self.spec) + S::lit(self.spec.noise_std * z);
                a.max(-one).min(one)
            }
            PartnerKind::Lazy => {
                let u: f64 = self.rng.gen();
                if u < self.spec.lazy_probability {
                    oracle_action(s, &self.geom, &self.spec)
                } else {
                    S::zero()
                }
            }
            PartnerKind::Live => {
                let Some(mb) = &self.mailbox else {
                    return Err(PartnerError::Spec("live partner without a command source".into()));
                };
                if mb.is_closed() {
                    return Err(PartnerError::Disconnected);
                }
                match mb.latest() {
                    Some(cmd) => proportional_action(S::lit(cmd.phi_human), s.phi),
                    None => {
                        if !self.warned_silent {
                            log::warn!("no live command received yet; partner axis idle");
                            self.warned_silent = true;
                        }
                        S::zero()
                    }
                }
            }
        })
    }
}
