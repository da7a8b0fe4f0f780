use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};
use comaze_core::partner::PartnerKind;

use crate::commands;
use crate::config::{AppConfig, Dtype};

#[derive(Debug, Parser)]
#[command(name = "comaze", version, about = "Collaborative tilt-maze experiments")]
pub struct Cli {
    /// TOML configuration file; defaults apply to anything it omits.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory for this run.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub port: Option<u16>,
    /// oracle, noisy, lazy, null or live.
    #[arg(long, global = true)]
    pub partner: Option<PartnerKind>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pre-model plus an 80-trial co-learning session.
    Train,
    /// Build the seed agent only.
    Premodel,
    /// Test rotation over models.own and models.foreign.
    Evaluate,
    /// Frame-wise online play with offline update phases.
    Preliminary,
    /// Fingerprint model documents.
    Fingerprint {
        #[arg(required = true)]
        models: Vec<PathBuf>,
    },
    /// Correlate fingerprint files.
    Compare {
        #[arg(required = true)]
        fingerprints: Vec<PathBuf>,
    },
    /// Train with a live browser player.
    Serve,
    /// Play a trial log back over the socket.
    Replay { log: PathBuf },
}

impl Cli {
    /// The config file with command-line overrides applied, validated.
    pub fn resolve_config(&self) -> Result<AppConfig> {
        let mut cfg = match &self.config {
            Some(path) => AppConfig::load(path)?,
            None => AppConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
            cfg.partner.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(port) = self.port {
            cfg.service.port = port;
        }
        if let Some(kind) = self.partner {
            cfg.partner.kind = kind;
        }
        if matches!(self.command, Command::Serve) {
            cfg.partner.kind = PartnerKind::Live;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

macro_rules! by_dtype {
    ($cfg:expr, $f:ident) => {
        match $cfg.dtype {
            Dtype::F32 => commands::$f::<f32>(&$cfg).map(drop),
            Dtype::F64 => commands::$f::<f64>(&$cfg).map(drop),
        }
    };
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = cli.resolve_config()?;
    match &cli.command {
        Command::Train | Command::Serve => by_dtype!(cfg, train),
        Command::Premodel => by_dtype!(cfg, premodel),
        Command::Evaluate => by_dtype!(cfg, evaluate),
        Command::Preliminary => by_dtype!(cfg, preliminary),
        Command::Fingerprint { models } => commands::fingerprint(&cfg, models).map(drop),
        Command::Compare { fingerprints } => commands::compare(&cfg, fingerprints).map(drop),
        Command::Replay { log } => commands::replay(&cfg, log).map(drop),
    }
}
