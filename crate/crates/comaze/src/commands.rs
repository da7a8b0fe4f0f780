//! One function per subcommand. Each writes a run directory under
//! `output_dir`, created only after the inputs have been validated.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context, Result};
use comaze_core::fingerprint::{
    compute_fingerprint, correlation_matrix, spatial_map, Fingerprint, FingerprintGrid, FINGERPRINT_SCHEMA,
};
use comaze_core::partner::{Partner, PartnerKind, PartnerSpec};
use comaze_core::physics::TraySim;
use comaze_core::sac::{ModelDocument, SacAgent};
use comaze_core::session::{
    make_premodel, run_colearning_session, run_evaluation_rotation, run_preliminary_schedule, EvaluationReport,
    LearningCurve, PreliminaryCurve, SessionConfig, SessionObserver, TrialRecord, UpdateMode,
};
use comaze_core::Scalar;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{AppConfig, Dtype};
use crate::plot::write_heatmap;
use crate::recorder::{state_message, LiveObserver, Recorder};
use crate::service::Service;
use crate::wire::ServerMessage;

/// Independent random streams derived from the run seed.
pub mod stream {
    pub const AGENT_INIT: u64 = 1;
    pub const PREMODEL: u64 = 2;
    pub const SESSION: u64 = 3;
    pub const EVALUATION: u64 = 4;
    pub const PRELIMINARY: u64 = 5;
}

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub const PREMODEL_FILE: &str = "models/premodel.json";
pub const FINAL_MODEL_FILE: &str = "models/final.json";

/// Creates the run directory and writes the config snapshot.
pub fn create_run_dir(cfg: &AppConfig) -> Result<PathBuf> {
    let out = cfg.output_dir.clone();
    std::fs::create_dir_all(out.join("models")).with_context(|| format!("creating {}", out.display()))?;
    std::fs::write(out.join("config.toml"), cfg.to_toml())?;
    Ok(out)
}

fn sim<S: Scalar>(cfg: &AppConfig) -> Result<TraySim<S>> {
    Ok(TraySim::new(cfg.geometry.clone(), cfg.physics.clone())?)
}

pub fn load_agent<S: Scalar>(path: &Path) -> Result<SacAgent<S>> {
    let bytes = std::fs::read(path).with_context(|| format!("reading model {}", path.display()))?;
    SacAgent::from_bytes(&bytes).with_context(|| format!("loading model {}", path.display()))
}

fn write_records(path: &Path, records: &[TrialRecord]) -> Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&r.to_json_line());
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<TrialRecord>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| TrialRecord::from_json_line(l).map_err(|e| anyhow!("{}:{}: {e}", path.display(), i + 1)))
        .collect()
}

fn start_service_if_live(cfg: &AppConfig) -> Result<Option<Service>> {
    if cfg.partner.kind != PartnerKind::Live {
        return Ok(None);
    }
    Service::start(&cfg.service.host, cfg.service.port, cfg.physics.max_tilt).map(Some)
}

fn client_timeout(cfg: &AppConfig) -> Duration {
    Duration::from_secs_f64(cfg.service.client_timeout_secs)
}

/// Runs `body` with the configured partner: scripted partners headless,
/// the live partner through `service` with real-time pacing.
fn with_partner<S: Scalar, T>(
    cfg: &AppConfig,
    service: Option<&Service>,
    rec: &mut Recorder,
    body: impl FnOnce(&mut Partner, &SessionConfig, &mut dyn SessionObserver<S>) -> Result<T>,
) -> Result<T> {
    let geom = cfg.geometry.clone();
    match service {
        Some(svc) => {
            println!("waiting for a player on ws://{}", svc.local_addr());
            svc.wait_for_player(client_timeout(cfg))?;
            let mut partner = Partner::live(cfg.partner.clone(), geom, svc.mailbox())?;
            let session = SessionConfig {
                realtime: true,
                ..cfg.session.clone()
            };
            let mut obs = LiveObserver {
                service: svc,
                inner: rec,
            };
            let result = body(&mut partner, &session, &mut obs);
            svc.close(Duration::from_secs(2));
            result
        }
        None => {
            let mut partner = Partner::new(cfg.partner.clone(), geom)?;
            body(&mut partner, &cfg.session, rec)
        }
    }
}

/// The seed agent: loaded from `models.premodel` or built with an oracle
/// expert carrying the configured partner gains.
fn obtain_premodel<S: Scalar>(cfg: &AppConfig, sim: &TraySim<S>, out: &Path, rec: &mut Recorder) -> Result<SacAgent<S>> {
    if let Some(path) = &cfg.models.premodel {
        let agent = load_agent::<S>(path)?;
        if agent.config != cfg.agent {
            log::warn!("pre-model {} was trained with a different agent config", path.display());
        }
        std::fs::write(out.join(PREMODEL_FILE), agent.to_bytes())?;
        return Ok(agent);
    }
    let fresh = SacAgent::<S>::new(cfg.agent.clone(), &mut rng_for(cfg.seed, stream::AGENT_INIT))?;
    let expert_spec = PartnerSpec {
        kind: PartnerKind::Oracle,
        name: None,
        ..cfg.partner.clone()
    };
    let mut expert = Partner::new(expert_spec, cfg.geometry.clone())?;
    let mut rng = rng_for(cfg.seed, stream::PREMODEL);
    rec.phase = "premodel";
    let started = Instant::now();
    let (agent, records) = make_premodel(fresh, &mut expert, sim, &cfg.session, &mut rng, rec)?;
    log::info!(
        "pre-model: {} expert trials, {} updates in {:.1} s",
        records.len(),
        agent.update_count(),
        started.elapsed().as_secs_f64()
    );
    write_records(&out.join("premodel_trials.jsonl"), &records)?;
    std::fs::write(out.join(PREMODEL_FILE), agent.to_bytes())?;
    Ok(agent)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub out: PathBuf,
    pub records: Vec<TrialRecord>,
    pub curve: LearningCurve,
}

/// Pre-model (or load one), then a full co-learning session.
pub fn train<S: Scalar>(cfg: &AppConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let sim = sim::<S>(cfg)?;
    let service = start_service_if_live(cfg)?;
    let out = create_run_dir(cfg)?;
    let mut rec = Recorder::create(&out.join("training_log.csv"), "premodel")?;
    let mut agent = obtain_premodel(cfg, &sim, &out, &mut rec)?;

    rec.phase = "session";
    rec.verbose = true;
    rec.trial_log(&out.join("trials.jsonl"))?;
    let mut rng = rng_for(cfg.seed, stream::SESSION);
    let outcome = with_partner(cfg, service.as_ref(), &mut rec, |partner, session, obs| {
        Ok(run_colearning_session(&mut agent, partner, &sim, session, &mut rng, obs)?)
    })?;
    rec.finish()?;
    std::fs::write(out.join(FINAL_MODEL_FILE), agent.to_bytes())?;
    std::fs::write(out.join("curve.csv"), outcome.curve.to_csv())?;
    println!(
        "{} trials, {} successes; artifacts in {}",
        outcome.records.len(),
        outcome.records.iter().filter(|r| r.success).count(),
        out.display()
    );
    Ok(TrainOutcome {
        out,
        records: outcome.records,
        curve: outcome.curve,
    })
}

/// Builds and saves the seed agent only.
pub fn premodel<S: Scalar>(cfg: &AppConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let sim = sim::<S>(cfg)?;
    let cfg = AppConfig {
        models: Default::default(),
        ..cfg.clone()
    };
    let out = create_run_dir(&cfg)?;
    let mut rec = Recorder::create(&out.join("training_log.csv"), "premodel")?;
    obtain_premodel(&cfg, &sim, &out, &mut rec)?;
    rec.finish()?;
    let path = out.join(PREMODEL_FILE);
    println!("pre-model written to {}", path.display());
    Ok(path)
}

fn model_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Test rotation: own agent, each foreign agent, own agent again.
pub fn evaluate<S: Scalar>(cfg: &AppConfig) -> Result<EvaluationReport> {
    cfg.validate()?;
    let own_path = cfg
        .models
        .own
        .as_ref()
        .ok_or_else(|| anyhow!("evaluate needs models.own"))?;
    let own = load_agent::<S>(own_path)?;
    let foreign: Vec<(String, SacAgent<S>)> = cfg
        .models
        .foreign
        .iter()
        .map(|p| Ok((model_name(p), load_agent::<S>(p)?)))
        .collect::<Result<_>>()?;
    let sim = sim::<S>(cfg)?;
    let service = start_service_if_live(cfg)?;
    let out = create_run_dir(cfg)?;
    let mut rec = Recorder::create(&out.join("training_log.csv"), "evaluation")?;
    rec.trial_log(&out.join("trials.jsonl"))?;
    let mut rng = rng_for(cfg.seed, stream::EVALUATION);
    let own_name = model_name(own_path);
    let foreign_refs: Vec<(&str, &SacAgent<S>)> = foreign.iter().map(|(n, a)| (n.as_str(), a)).collect();
    let report = with_partner(cfg, service.as_ref(), &mut rec, |partner, session, obs| {
        Ok(run_evaluation_rotation(
            partner,
            (&own_name, &own),
            &foreign_refs,
            &sim,
            session,
            &mut rng,
            obs,
        )?)
    })?;
    rec.finish()?;
    std::fs::write(out.join("evaluation.csv"), report.to_csv())?;
    let mut summary = String::from("agent,mean_score\n");
    for (agent, mean) in report.mean_by_agent() {
        println!("{agent}: mean score {mean:.1}");
        summary.push_str(&format!("{agent},{mean}\n"));
    }
    std::fs::write(out.join("evaluation_summary.csv"), summary)?;
    Ok(report)
}

/// Frame-wise online play alternating with offline update phases.
pub fn preliminary<S: Scalar>(cfg: &AppConfig) -> Result<PreliminaryCurve> {
    cfg.validate()?;
    let sim = sim::<S>(cfg)?;
    let cfg = AppConfig {
        session: SessionConfig {
            mode: UpdateMode::FrameWise,
            ..cfg.session.clone()
        },
        ..cfg.clone()
    };
    let service = start_service_if_live(&cfg)?;
    let out = create_run_dir(&cfg)?;
    let mut rec = Recorder::create(&out.join("training_log.csv"), "preliminary")?;
    rec.trial_log(&out.join("trials.jsonl"))?;
    let mut agent = SacAgent::<S>::new(cfg.agent.clone(), &mut rng_for(cfg.seed, stream::AGENT_INIT))?;
    let mut rng = rng_for(cfg.seed, stream::PRELIMINARY);
    let (curve, _) = with_partner(&cfg, service.as_ref(), &mut rec, |partner, session, obs| {
        Ok(run_preliminary_schedule(&mut agent, partner, &sim, session, &mut rng, obs)?)
    })?;
    rec.finish()?;
    std::fs::write(out.join(FINAL_MODEL_FILE), agent.to_bytes())?;
    std::fs::write(out.join("preliminary_curve.csv"), curve.to_csv())?;
    for p in &curve.points {
        println!(
            "phase {}: {} offline updates, mean test score {:.1}",
            p.phase, p.offline_updates, p.mean_test_score
        );
    }
    Ok(curve)
}

fn fingerprint_one<S: Scalar>(doc: &ModelDocument, tag: &str, grid: &FingerprintGrid) -> Result<Vec<u8>> {
    let agent = doc.to_agent::<S>()?;
    Ok(compute_fingerprint(&agent, grid, tag)?.to_bytes(grid))
}

/// One fingerprint file per model, in the model's own precision.
pub fn fingerprint(cfg: &AppConfig, models: &[PathBuf]) -> Result<Vec<PathBuf>> {
    if models.is_empty() {
        bail!("no model files given");
    }
    let docs: Vec<(String, ModelDocument)> = models
        .iter()
        .map(|p| {
            let bytes = std::fs::read(p).with_context(|| format!("reading model {}", p.display()))?;
            let doc = ModelDocument::from_bytes(&bytes).with_context(|| format!("loading model {}", p.display()))?;
            Ok((model_name(p), doc))
        })
        .collect::<Result<_>>()?;
    let out = create_run_dir(cfg)?.join("fingerprints");
    std::fs::create_dir_all(&out)?;
    let grid = FingerprintGrid::standard();
    let mut written = Vec::new();
    for (tag, doc) in &docs {
        let started = Instant::now();
        let bytes = match doc.dtype.as_str() {
            "f32" => fingerprint_one::<f32>(doc, tag, &grid)?,
            "f64" => fingerprint_one::<f64>(doc, tag, &grid)?,
            other => bail!("model {tag} has unknown dtype {other:?}"),
        };
        let path = out.join(format!("{tag}.fp"));
        std::fs::write(&path, bytes)?;
        println!(
            "{tag}: {} actions in {:.1} s -> {}",
            grid.len(),
            started.elapsed().as_secs_f64(),
            path.display()
        );
        written.push(path);
    }
    Ok(written)
}

#[derive(serde::Deserialize)]
struct HeaderPeek {
    schema: String,
    dtype: String,
}

fn peek_dtype(bytes: &[u8]) -> Result<Dtype> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| anyhow!("missing header line"))?;
    let h: HeaderPeek = serde_json::from_slice(&bytes[..nl])?;
    if h.schema != FINGERPRINT_SCHEMA {
        bail!("unsupported schema {:?}", h.schema);
    }
    match h.dtype.as_str() {
        "f32" => Ok(Dtype::F32),
        "f64" => Ok(Dtype::F64),
        other => bail!("unknown dtype {other:?}"),
    }
}

fn compare_typed<S: Scalar>(files: &[(PathBuf, Vec<u8>)], grid: &FingerprintGrid, out: &Path) -> Result<Vec<Vec<f64>>> {
    let fps: Vec<Fingerprint<S>> = files
        .iter()
        .map(|(p, b)| Fingerprint::from_bytes(b, grid).with_context(|| format!("refusing {}", p.display())))
        .collect::<Result<_>>()?;
    let matrix = correlation_matrix(&fps)?;
    std::fs::write(out.join("correlation_matrix.csv"), matrix.to_csv())?;
    let cells: Vec<Vec<Option<f64>>> = matrix
        .values
        .iter()
        .map(|row| row.iter().map(|&v| Some(v)).collect())
        .collect();
    write_heatmap(&out.join("correlation_matrix.png"), &cells)?;
    let spatial = out.join("spatial");
    std::fs::create_dir_all(&spatial)?;
    for i in 0..fps.len() {
        for j in i + 1..fps.len() {
            let map = spatial_map(&fps[i], &fps[j], grid)?;
            let stem = format!("{}__{}", fps[i].tag, fps[j].tag);
            std::fs::write(spatial.join(format!("{stem}.csv")), map.to_csv())?;
            write_heatmap(&spatial.join(format!("{stem}.png")), &map.cells)?;
        }
    }
    Ok(matrix.values)
}

/// Correlation matrix over fingerprint files plus a spatial map per pair.
/// Repeated paths are compared once.
pub fn compare(cfg: &AppConfig, paths: &[PathBuf]) -> Result<Vec<Vec<f64>>> {
    let mut seen = HashSet::new();
    let mut files = Vec::new();
    for p in paths {
        let key = std::fs::canonicalize(p).with_context(|| format!("reading fingerprint {}", p.display()))?;
        if seen.insert(key) {
            let bytes = std::fs::read(p).with_context(|| format!("reading fingerprint {}", p.display()))?;
            files.push((p.clone(), bytes));
        }
    }
    if files.is_empty() {
        bail!("no fingerprint files given");
    }
    let dtypes: Vec<Dtype> = files
        .iter()
        .map(|(p, b)| peek_dtype(b).with_context(|| format!("refusing {}", p.display())))
        .collect::<Result<_>>()?;
    if dtypes.iter().any(|d| *d != dtypes[0]) {
        bail!("fingerprints mix f32 and f64 payloads");
    }
    let grid = FingerprintGrid::standard();
    // Validate every file before anything is written.
    match dtypes[0] {
        Dtype::F32 => validate_all::<f32>(&files, &grid)?,
        Dtype::F64 => validate_all::<f64>(&files, &grid)?,
    }
    let out = create_run_dir(cfg)?;
    let values = match dtypes[0] {
        Dtype::F32 => compare_typed::<f32>(&files, &grid, &out)?,
        Dtype::F64 => compare_typed::<f64>(&files, &grid, &out)?,
    };
    for row in &values {
        let cols: Vec<String> = row.iter().map(|v| format!("{v:.4}")).collect();
        println!("{}", cols.join("  "));
    }
    Ok(values)
}

fn validate_all<S: Scalar>(files: &[(PathBuf, Vec<u8>)], grid: &FingerprintGrid) -> Result<()> {
    for (p, b) in files {
        Fingerprint::<S>::from_bytes(b, grid).with_context(|| format!("refusing {}", p.display()))?;
    }
    Ok(())
}

/// The state after each frame of a logged trial.
fn replay_states(r: &TrialRecord) -> impl Iterator<Item = [f64; 8]> + '_ {
    r.frames.iter().skip(1).map(|f| f.state).chain(std::iter::once(r.final_state))
}

/// Streams a trial log to the first client at the logged frame rate.
pub fn replay(cfg: &AppConfig, log_path: &Path) -> Result<usize> {
    cfg.validate()?;
    let records = read_records(log_path)?;
    let service = Service::start(&cfg.service.host, cfg.service.port, cfg.physics.max_tilt)?;
    println!("replay server on ws://{}", service.local_addr());
    service.wait_for_client(client_timeout(cfg))?;
    let per_frame = Duration::from_secs_f64(cfg.session.frame_duration / cfg.service.replay_speed);
    let per_block = cfg.session.trials_per_block;
    for (k, r) in records.iter().enumerate() {
        service.broadcast(ServerMessage::trial_start(r.trial_index));
        let n = r.frames.len();
        for (f, s) in replay_states(r).take(n).enumerate() {
            let state = comaze_core::physics::TrayState {
                x: s[0],
                y: s[1],
                vx: s[2],
                vy: s[3],
                theta: s[4],
                phi: s[5],
                theta_rate: s[6],
                phi_rate: s[7],
                captured: r.success && f + 1 == n,
            };
            let score = comaze_core::session::score(true, f + 1, cfg.session.frames_per_trial);
            service.broadcast(state_message(r.trial_index, f, &state, score));
            std::thread::sleep(per_frame);
        }
        service.broadcast(ServerMessage::trial_end(r.trial_index, r.score));
        if (k + 1) % per_block == 0 {
            let curve = LearningCurve::from_records(&records[..=k], per_block);
            service.broadcast(ServerMessage::SessionEvent {
                block: (k + 1) / per_block - 1,
                curve: curve.successes,
            });
        }
    }
    service.close(Duration::from_secs(5));
    Ok(records.len())
}
