//! Versioned JSON persistence of a complete agent, optimizer state included.
//!
//! Numbers are written through their `f64` value. For `f64` agents that is
//! exact; `f32` values widen exactly and narrow back exactly, so a round trip
//! is bit-identical either way.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::agent::{Optimizers, SacAgent};
use super::policy::GaussianPolicy;
use super::SacConfig;
use crate::nn::{AdamState, Dense, Mlp};
use crate::scalar::Scalar;

pub const MODEL_SCHEMA: &str = "co-maze-agent/v1";

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("malformed model document: {0}")]
    Schema(String),
    #[error("unsupported schema {found:?}, expected {MODEL_SCHEMA:?}")]
    Version { found: String },
    #[error("model stores {found} values, expected {expected}")]
    Dtype { found: String, expected: &'static str },
    #[error("shape mismatch in {network}: {detail}")]
    Shape { network: String, detail: String },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid configuration in document: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerDoc {
    /// Row-major `(out, in)`.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDoc {
    pub sizes: Vec<usize>,
    pub layers: Vec<LayerDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerDoc {
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworksDoc {
    pub actor: NetworkDoc,
    pub q1: NetworkDoc,
    pub q2: NetworkDoc,
    pub v: NetworkDoc,
    pub v_target: NetworkDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizersDoc {
    pub actor: OptimizerDoc,
    pub q1: OptimizerDoc,
    pub q2: OptimizerDoc,
    pub v: OptimizerDoc,
    pub log_alpha: OptimizerDoc,
}

/// Serialized agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub schema: String,
    pub dtype: String,
    pub config: SacConfig,
    pub log_alpha: f64,
    pub update_count: u64,
    pub networks: NetworksDoc,
    pub optimizers: OptimizersDoc,
}

fn net_doc<S: Scalar>(net: &Mlp<S>) -> NetworkDoc {
    NetworkDoc {
        sizes: net.sizes(),
        layers: net
            .layers
            .iter()
            .map(|l| LayerDoc {
                weight: l.weight.iter().map(|v| v.as_f64()).collect(),
                bias: l.bias.iter().map(|v| v.as_f64()).collect(),
            })
            .collect(),
    }
}

fn opt_doc<S: Scalar>(st: &AdamState<S>) -> OptimizerDoc {
    let conv = |vs: &Vec<Vec<S>>| -> Vec<Vec<f64>> {
        vs.iter().map(|v| v.iter().map(|x| x.as_f64()).collect()).collect()
    };
    OptimizerDoc {
        step: st.step,
        m: conv(&st.m),
        v: conv(&st.v),
    }
}

fn to_scalars<S: Scalar>(vals: &[f64], what: &str) -> Result<Vec<S>, DocumentError> {
    vals.iter()
        .map(|&v| {
            if v.is_finite() {
                S::from_f64(v).ok_or_else(|| DocumentError::NonFinite(what.to_string()))
            } else {
                Err(DocumentError::NonFinite(what.to_string()))
            }
        })
        .collect()
}

fn net_from_doc<S: Scalar>(
    name: &str,
    doc: &NetworkDoc,
    expected: &[usize],
) -> Result<Mlp<S>, DocumentError> {
    let shape_err = |detail: String| DocumentError::Shape {
        network: name.to_string(),
        detail,
    };
    if doc.sizes != expected {
        return Err(shape_err(format!(
            "layer sizes {:?}, expected {:?}",
            doc.sizes, expected
        )));
    }
    if doc.layers.len() + 1 != expected.len() {
        return Err(shape_err(format!("{} layers", doc.layers.len())));
    }
    let mut layers = Vec::with_capacity(doc.layers.len());
    for (i, (ld, w)) in doc.layers.iter().zip(expected.windows(2)).enumerate() {
        let (inp, out) = (w[0], w[1]);
        if ld.weight.len() != inp * out || ld.bias.len() != out {
            return Err(shape_err(format!(
                "layer {i}: {} weights / {} biases for {inp}->{out}",
                ld.weight.len(),
                ld.bias.len()
            )));
        }
        let what = format!("{name} layer {i}");
        let weight = Array2::from_shape_vec((out, inp), to_scalars(&ld.weight, &what)?)
            .expect("length checked");
        let bias = Array1::from_vec(to_scalars(&ld.bias, &what)?);
        layers.push(Dense { weight, bias });
    }
    Ok(Mlp { layers })
}

fn opt_from_doc<S: Scalar>(
    name: &str,
    doc: &OptimizerDoc,
    lengths: &[usize],
) -> Result<AdamState<S>, DocumentError> {
    let found: Vec<usize> = doc.m.iter().map(Vec::len).collect();
    let found_v: Vec<usize> = doc.v.iter().map(Vec::len).collect();
    if found != lengths || found_v != lengths {
        return Err(DocumentError::Shape {
            network: format!("{name} optimizer"),
            detail: format!("moment lengths {found:?}, expected {lengths:?}"),
        });
    }
    let what = format!("{name} optimizer");
    Ok(AdamState {
        step: doc.step,
        m: doc
            .m
            .iter()
            .map(|v| to_scalars(v, &what))
            .collect::<Result<_, _>>()?,
        v: doc
            .v
            .iter()
            .map(|v| to_scalars(v, &what))
            .collect::<Result<_, _>>()?,
    })
}

fn slice_lengths<S: Scalar>(net: &Mlp<S>) -> Vec<usize> {
    net.param_slices().iter().map(|s| s.len()).collect()
}

impl ModelDocument {
    pub fn from_agent<S: Scalar>(agent: &SacAgent<S>) -> Self {
        Self {
            schema: MODEL_SCHEMA.to_string(),
            dtype: S::DTYPE.to_string(),
            config: agent.config.clone(),
            log_alpha: agent.log_alpha.as_f64(),
            update_count: agent.update_count(),
            networks: NetworksDoc {
                actor: net_doc(&agent.actor.trunk),
                q1: net_doc(&agent.q1),
                q2: net_doc(&agent.q2),
                v: net_doc(&agent.v),
                v_target: net_doc(&agent.v_target),
            },
            optimizers: OptimizersDoc {
                actor: opt_doc(&agent.opt.actor),
                q1: opt_doc(&agent.opt.q1),
                q2: opt_doc(&agent.opt.q2),
                v: opt_doc(&agent.opt.v),
                log_alpha: opt_doc(&agent.opt.log_alpha),
            },
        }
    }

    pub fn to_agent<S: Scalar>(&self) -> Result<SacAgent<S>, DocumentError> {
        if self.schema != MODEL_SCHEMA {
            return Err(DocumentError::Version {
                found: self.schema.clone(),
            });
        }
        if self.dtype != S::DTYPE {
            return Err(DocumentError::Dtype {
                found: self.dtype.clone(),
                expected: S::DTYPE,
            });
        }
        self.config
            .validate()
            .map_err(|e| DocumentError::Config(e.to_string()))?;
        if !self.log_alpha.is_finite() {
            return Err(DocumentError::NonFinite("log_alpha".into()));
        }
        let c = &self.config;
        let n = &self.networks;
        let trunk = net_from_doc::<S>("actor", &n.actor, &c.actor_sizes())?;
        let q1 = net_from_doc::<S>("q1", &n.q1, &c.critic_sizes())?;
        let q2 = net_from_doc::<S>("q2", &n.q2, &c.critic_sizes())?;
        let v = net_from_doc::<S>("v", &n.v, &c.value_sizes())?;
        let v_target = net_from_doc::<S>("v_target", &n.v_target, &c.value_sizes())?;
        let o = &self.optimizers;
        let opt = Optimizers {
            actor: opt_from_doc("actor", &o.actor, &slice_lengths(&trunk))?,
            q1: opt_from_doc("q1", &o.q1, &slice_lengths(&q1))?,
            q2: opt_from_doc("q2", &o.q2, &slice_lengths(&q2))?,
            v: opt_from_doc("v", &o.v, &slice_lengths(&v))?,
            log_alpha: opt_from_doc("log_alpha", &o.log_alpha, &[1])?,
        };
        let actor = GaussianPolicy::new(trunk, S::lit(c.log_std_min), S::lit(c.log_std_max));
        let mut agent = SacAgent::from_parts(
            c.clone(),
            actor,
            q1,
            q2,
            v,
            v_target,
            Some(opt),
            self.update_count,
        );
        agent.log_alpha = S::lit(self.log_alpha);
        Ok(agent)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec(self).expect("model document serializes");
        out.push(b'\n');
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DocumentError> {
        serde_json::from_slice(bytes).map_err(|e| DocumentError::Schema(e.to_string()))
    }
}

impl<S: Scalar> SacAgent<S> {
    pub fn to_document(&self) -> ModelDocument {
        ModelDocument::from_agent(self)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.to_document().to_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DocumentError> {
        ModelDocument::from_bytes(bytes)?.to_agent()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sac::{ReplayBuffer, Transition};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn trained<S: Scalar>() -> SacAgent<S> {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut a = SacAgent::<S>::new(SacConfig::default(), &mut rng).unwrap();
        let mut b = ReplayBuffer::bounded(50);
        for i in 0..50 {
            let x = S::lit(i as f64 * 0.004 - 0.1);
            b.push(Transition {
                state: [x; 8],
                action: S::lit(0.2),
                reward: S::lit(-1.0),
                next_state: [x; 8],
                done: false,
            });
        }
        for _ in 0..5 {
            a.gradient_update(&b, &mut rng).unwrap();
        }
        a
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let a = trained::<f64>();
        let bytes = a.to_bytes();
        let b = SacAgent::<f64>::from_bytes(&bytes).unwrap();
        assert_eq!(a, b);
        assert_eq!(bytes, b.to_bytes());
    }

    #[test]
    fn f32_round_trip_is_exact() {
        let a = trained::<f32>();
        let b = SacAgent::<f32>::from_bytes(&a.to_bytes()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn actions_survive_round_trip() {
        let a = trained::<f64>();
        let b = SacAgent::<f64>::from_bytes(&a.to_bytes()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let s: [f64; 8] = std::array::from_fn(|_| rng.gen_range(-0.5..0.5));
            assert_eq!(a.act_deterministic(&s).unwrap(), b.act_deterministic(&s).unwrap());
        }
    }

    #[test]
    fn truncated_document_rejected() {
        let bytes = trained::<f64>().to_bytes();
        let cut = &bytes[..bytes.len() / 2];
        assert!(matches!(
            SacAgent::<f64>::from_bytes(cut),
            Err(DocumentError::Schema(_))
        ));
    }

    #[test]
    fn version_and_dtype_checked() {
        let mut doc = trained::<f64>().to_document();
        assert!(matches!(doc.to_agent::<f32>(), Err(DocumentError::Dtype { .. })));
        doc.schema = "co-maze-agent/v0".into();
        assert!(matches!(doc.to_agent::<f64>(), Err(DocumentError::Version { .. })));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut doc = trained::<f64>().to_document();
        doc.networks.q1.layers[1].bias.pop();
        assert!(matches!(doc.to_agent::<f64>(), Err(DocumentError::Shape { .. })));
    }

    #[test]
    fn non_finite_values_rejected() {
        let mut doc = trained::<f64>().to_document();
        doc.networks.v.layers[0].weight[3] = f64::INFINITY;
        assert!(matches!(doc.to_agent::<f64>(), Err(DocumentError::NonFinite(_))));
        // JSON has no NaN; serde writes null, which fails to parse back.
        let mut doc = trained::<f64>().to_document();
        doc.networks.v.layers[0].weight[3] = f64::NAN;
        assert!(ModelDocument::from_bytes(&doc.to_bytes()).is_err());
    }
}
