//! TOML experiment configuration.
//!
//! Every section and key is optional. Relative paths resolve against the
//! directory holding the config file. Stage seeds are derived from the
//! master seed and the stage name.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use seqadapt_core::encoder::EncoderConfig;
use seqadapt_core::hash::derive_seed;
use seqadapt_core::mlm::{ActionProbs, MaskingConfig};
use seqadapt_core::pipelines::{Objective, StageSchedule, Variant};
use seqadapt_core::shift::ShiftRule;
use seqadapt_core::synthetic::SyntheticConfig;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    pub data_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub general: Option<PathBuf>,
    pub source_train: Option<PathBuf>,
    pub source_test: Option<PathBuf>,
    pub target_unlabeled: Option<PathBuf>,
    pub target_test: Option<PathBuf>,
    /// Labeled target training data; only the supervised variant reads it.
    pub target_labeled: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub tags: Option<PathBuf>,
    /// Existing pretrained checkpoint; when unset, `run` pretrains first.
    pub pretrained: Option<PathBuf>,
    /// Tag mapping applied to predictions before scoring.
    pub mapping: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSection {
    pub grammar_seed: Option<u64>,
    /// Defaults to a seed derived from the master seed.
    pub shift_seed: Option<u64>,
    pub general_sentences: Option<usize>,
    pub source_sentences: Option<usize>,
    pub target_sentences: Option<usize>,
    pub source_test_fraction: Option<f64>,
    pub target_test_fraction: Option<f64>,
    pub target_rerank: Option<f64>,
    pub uv_alternation: Option<f64>,
    pub i_to_y: Option<f64>,
    pub silent_e: Option<f64>,
    pub capitalization: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VocabSection {
    pub size: usize,
    pub min_frequency: usize,
}

impl Default for VocabSection {
    fn default() -> Self {
        Self {
            size: 1000,
            min_frequency: 2,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderSection {
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub num_heads: usize,
    pub ffn_dim: usize,
    pub max_len: usize,
    pub dropout_rate: f64,
}

impl Default for EncoderSection {
    fn default() -> Self {
        let d = EncoderConfig::desk_scale(1, 1);
        Self {
            num_layers: d.num_layers,
            hidden_dim: d.hidden_dim,
            num_heads: d.num_heads,
            ffn_dim: d.ffn_dim,
            max_len: d.max_len,
            dropout_rate: d.dropout_rate,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaskingSection {
    pub rate: f64,
    pub maskings_per_instance: usize,
    pub whole_word: bool,
    pub mask_prob: f64,
    pub random_prob: f64,
    pub keep_prob: f64,
}

impl Default for MaskingSection {
    fn default() -> Self {
        let d = MaskingConfig::default();
        Self {
            rate: d.rate,
            maskings_per_instance: d.maskings_per_instance,
            whole_word: d.whole_word,
            mask_prob: d.actions.mask,
            random_prob: d.actions.random,
            keep_prob: d.actions.keep,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSection {
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub batch_size: Option<usize>,
    pub max_steps: Option<usize>,
    /// Gradient-norm clip; `0` disables clipping.
    pub clip_norm: Option<f64>,
    /// Overrides the derived stage seed.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// Whether the IV/OOV reference vocabulary distinguishes case.
    pub case_sensitive: bool,
    pub top_k: usize,
    pub examples: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            case_sensitive: true,
            top_k: 10,
            examples: 5,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub variant: Option<String>,
    #[serde(default)]
    pub paths: PathsSection,
    #[serde(default)]
    pub synthetic: SyntheticSection,
    #[serde(default)]
    pub vocab: VocabSection,
    #[serde(default)]
    pub encoder: EncoderSection,
    #[serde(default)]
    pub masking: MaskingSection,
    #[serde(default)]
    pub pretrain: StageSection,
    #[serde(default)]
    pub domain: StageSection,
    #[serde(default)]
    pub task: StageSection,
    #[serde(default)]
    pub eval: EvalSection,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn parse(text: &str, base_dir: &Path) -> CliResult<Self> {
        let mut c: ExperimentConfig = toml::from_str(text).map_err(|e| config_error(e.to_string()))?;
        c.base_dir = base_dir.to_path_buf();
        Ok(c)
    }

    /// Reads `path`, or returns the defaults rooted at the working directory.
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            None => Ok(Self {
                base_dir: PathBuf::from("."),
                ..Self::default()
            }),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| config_error(format!("{}: {e}", p.display())))?;
                let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
                Self::parse(&text, if base.as_os_str().is_empty() { Path::new(".") } else { &base })
            }
        }
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn data_dir(&self) -> PathBuf {
        self.resolve(self.paths.data_dir.as_deref().unwrap_or(Path::new("data")))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(self.paths.out.as_deref().unwrap_or(Path::new("out")))
    }

    fn data_path(&self, set: &Option<PathBuf>, default_name: &str) -> PathBuf {
        match set {
            Some(p) => self.resolve(p),
            None => self.data_dir().join(default_name),
        }
    }

    pub fn general_path(&self) -> PathBuf {
        self.data_path(&self.paths.general, "general.conll")
    }

    pub fn source_train_path(&self) -> PathBuf {
        self.data_path(&self.paths.source_train, "source_train.conll")
    }

    pub fn source_test_path(&self) -> PathBuf {
        self.data_path(&self.paths.source_test, "source_test.conll")
    }

    pub fn target_unlabeled_path(&self) -> PathBuf {
        self.data_path(&self.paths.target_unlabeled, "target_unlabeled.conll")
    }

    pub fn target_test_path(&self) -> PathBuf {
        self.data_path(&self.paths.target_test, "target_test.conll")
    }

    /// Only set explicitly; generated data ships it as
    /// `target_train_labeled.conll`.
    pub fn target_labeled_path(&self) -> Option<PathBuf> {
        self.paths.target_labeled.as_deref().map(|p| self.resolve(p))
    }

    pub fn vocab_path(&self) -> PathBuf {
        self.data_path(&self.paths.vocab, "vocab.txt")
    }

    pub fn tags_path(&self) -> PathBuf {
        self.data_path(&self.paths.tags, "tags.txt")
    }

    pub fn pretrained_path(&self) -> Option<PathBuf> {
        self.paths.pretrained.as_deref().map(|p| self.resolve(p))
    }

    pub fn mapping_path(&self) -> Option<PathBuf> {
        self.paths.mapping.as_deref().map(|p| self.resolve(p))
    }

    pub fn stage_seed(&self, stage: &str) -> u64 {
        derive_seed(self.seed, stage)
    }

    pub fn variant(&self) -> CliResult<Option<Variant>> {
        self.variant
            .as_deref()
            .map(|v| v.parse().map_err(|_| config_error(format!("unknown variant {v:?}"))))
            .transpose()
    }

    pub fn synthetic_config(&self) -> CliResult<SyntheticConfig> {
        let s = &self.synthetic;
        let d = SyntheticConfig::default();
        let rate = |rule: ShiftRule, set: Option<f64>| {
            let default = d.shift.iter().find(|(r, _)| *r == rule).map_or(0.0, |(_, p)| *p);
            (rule, set.unwrap_or(default))
        };
        let cfg = SyntheticConfig {
            grammar_seed: s.grammar_seed.unwrap_or(d.grammar_seed),
            shift_seed: s.shift_seed.unwrap_or_else(|| self.stage_seed("shift")),
            general_sentences: s.general_sentences.unwrap_or(d.general_sentences),
            source_sentences: s.source_sentences.unwrap_or(d.source_sentences),
            target_sentences: s.target_sentences.unwrap_or(d.target_sentences),
            source_test_fraction: s.source_test_fraction.unwrap_or(d.source_test_fraction),
            target_test_fraction: s.target_test_fraction.unwrap_or(d.target_test_fraction),
            target_rerank: s.target_rerank.unwrap_or(d.target_rerank),
            shift: vec![
                rate(ShiftRule::UvAlternation, s.uv_alternation),
                rate(ShiftRule::IToY, s.i_to_y),
                rate(ShiftRule::SilentE, s.silent_e),
                rate(ShiftRule::Capitalization, s.capitalization),
            ],
        };
        if cfg.general_sentences == 0 || cfg.source_sentences == 0 || cfg.target_sentences == 0 {
            return Err(config_error("[synthetic] sentence counts must be at least 1"));
        }
        let unit = |name: &str, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(config_error(format!("[synthetic] {name} = {x} outside [0, 1]")))
            }
        };
        unit("source_test_fraction", cfg.source_test_fraction)?;
        unit("target_test_fraction", cfg.target_test_fraction)?;
        unit("target_rerank", cfg.target_rerank)?;
        for (rule, p) in &cfg.shift {
            unit(rule.name(), *p)?;
        }
        Ok(cfg)
    }

    pub fn validate_vocab(&self) -> CliResult<()> {
        if self.vocab.size == 0 {
            return Err(config_error("[vocab] size must be at least 1"));
        }
        Ok(())
    }

    /// Encoder shape for a given vocabulary and tag count.
    pub fn encoder_config(&self, vocab_size: usize, num_tags: usize) -> CliResult<EncoderConfig> {
        let e = &self.encoder;
        let c = EncoderConfig {
            num_layers: e.num_layers,
            hidden_dim: e.hidden_dim,
            num_heads: e.num_heads,
            ffn_dim: e.ffn_dim,
            vocab_size,
            max_len: e.max_len,
            num_tags,
            dropout_rate: e.dropout_rate,
        };
        c.validate().map_err(|e| config_error(format!("[encoder] {e}")))?;
        if c.max_len < 3 {
            return Err(config_error("[encoder] max_len must leave room for a word between the special tokens"));
        }
        Ok(c)
    }

    pub fn masking_config(&self) -> CliResult<MaskingConfig> {
        let m = &self.masking;
        if !(m.rate > 0.0 && m.rate <= 1.0) {
            return Err(config_error(format!("[masking] rate {} outside (0, 1]", m.rate)));
        }
        if m.maskings_per_instance == 0 {
            return Err(config_error("[masking] maskings_per_instance must be at least 1"));
        }
        let actions = ActionProbs::new(m.mask_prob, m.random_prob, m.keep_prob)
            .map_err(|e| config_error(format!("[masking] {e}")))?;
        Ok(MaskingConfig {
            rate: m.rate,
            maskings_per_instance: m.maskings_per_instance,
            whole_word: m.whole_word,
            actions,
        })
    }

    fn schedule(
        &self,
        section: &StageSection,
        name: &str,
        objective: Objective,
        dataset: &str,
        epochs: usize,
        lr: f64,
    ) -> CliResult<StageSchedule> {
        let mut s = StageSchedule::new(
            objective,
            dataset,
            section.epochs.unwrap_or(epochs),
            section.lr.unwrap_or(lr),
            section.seed.unwrap_or_else(|| self.stage_seed(name)),
        );
        if let Some(b) = section.batch_size {
            s.batch_size = b;
        }
        s.max_steps = section.max_steps;
        if let Some(c) = section.clip_norm {
            s.clip_norm = (c > 0.0).then_some(c);
        }
        s.validate().map_err(|e| config_error(format!("[{name}] {e}")))?;
        Ok(s)
    }

    pub fn pretrain_schedule(&self) -> CliResult<StageSchedule> {
        self.schedule(&self.pretrain, "pretrain", Objective::Mlm, "general", 20, 1e-3)
    }

    pub fn domain_schedule(&self) -> CliResult<StageSchedule> {
        self.schedule(&self.domain, "domain", Objective::Mlm, "mixed", 3, 1e-3)
    }

    pub fn task_schedule(&self) -> CliResult<StageSchedule> {
        self.schedule(&self.task, "task", Objective::Tag, "labeled", 5, 3e-4)
    }

    pub fn validate_eval(&self) -> CliResult<()> {
        if self.eval.top_k == 0 {
            return Err(config_error("[eval] top_k must be at least 1"));
        }
        Ok(())
    }
}

/// Fails with a config error unless every path exists.
pub fn require_inputs<'a>(paths: impl IntoIterator<Item = (&'a str, &'a Path)>) -> CliResult<()> {
    for (what, p) in paths {
        if !p.exists() {
            return Err(config_error(format!("{what} not found: {}", p.display())));
        }
    }
    Ok(())
}
