//! File formats, experiment configuration and the command-line front end for
//! the `seqadapt-core` algorithms.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod conll;
pub mod error;
pub mod formats;
pub mod provenance;
pub mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use seqadapt_core::pipelines::Variant;

use crate::commands::{EvalMode, EvaluateArgs};
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "seqadapt", version, about = "Domain-adaptive fine-tuning experiments for sequence labeling")]
pub struct Cli {
    /// Experiment config file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides `paths.out`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    Frozen,
    #[value(name = "task_tuned")]
    TaskTuned,
    Adaptabert,
    Supervised,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Frozen => Variant::Frozen,
            VariantArg::TaskTuned => Variant::TaskTuned,
            VariantArg::Adaptabert => Variant::AdaptaBert,
            VariantArg::Supervised => Variant::Supervised,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Tagging,
    Segmentation,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the synthetic source/target benchmark and print OOV statistics.
    GenerateSynthetic,
    /// Train the subword vocabulary on the general corpus.
    BuildVocab,
    /// Masked-LM pretraining on the general corpus.
    Pretrain,
    /// Run one system variant and write a checkpoint per stage.
    Run {
        /// Defaults to the config's `variant`.
        #[arg(value_enum)]
        variant: Option<VariantArg>,
    },
    /// Score checkpoints on the test sets.
    Evaluate {
        #[arg(required = true)]
        checkpoints: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "tagging")]
        mode: ModeArg,
        /// Score on first-letter tags.
        #[arg(long)]
        coarse: bool,
        /// Also write the most frequent error pairs with example words.
        #[arg(long)]
        emit_confusion: bool,
        /// Fail on tags missing from the mapping table.
        #[arg(long)]
        strict_mapping: bool,
        /// Report file stem under `<out>/reports`.
        #[arg(long, default_value = "evaluation")]
        label: String,
    },
    /// Dump masked instances of the domain-tuning dataset for audit.
    MaskPreview {
        #[arg(long, default_value_t = 20)]
        limit: usize,
    },
}

/// Loads the config named by the flags and applies the overrides.
pub fn load_config(cli: &Cli) -> CliResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.paths.out = Some(std::env::current_dir().map_err(|e| CliError::io(".", e))?.join(o));
    }
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> CliResult<String> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::GenerateSynthetic => commands::generate_synthetic(&cfg),
        Command::BuildVocab => commands::build_vocab(&cfg),
        Command::Pretrain => commands::pretrain(&cfg),
        Command::Run { variant } => commands::run(&cfg, variant.map(Variant::from)),
        Command::Evaluate {
            checkpoints,
            mode,
            coarse,
            emit_confusion,
            strict_mapping,
            label,
        } => commands::evaluate(
            &cfg,
            &EvaluateArgs {
                checkpoints: checkpoints.clone(),
                mode: match mode {
                    ModeArg::Tagging => EvalMode::Tagging,
                    ModeArg::Segmentation => EvalMode::Segmentation,
                },
                coarse: *coarse,
                emit_confusion: *emit_confusion,
                strict_mapping: *strict_mapping,
                label: label.clone(),
            },
        ),
        Command::MaskPreview { limit } => commands::mask_preview(&cfg, *limit),
    }
}
