//! Training stages and their composition into the four system variants.
//!
//! A stage takes a complete checkpoint and returns a new one; nothing is
//! mutated in place. All randomness comes from the stage schedule's seed.

use alloc::borrow::Cow;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use rand::seq::SliceRandom;

use crate::corpus::Corpus;
use crate::encoder::{
    forward, init_params, loss_and_gradients, predict_positions, Adam, AdamState, EncoderConfig,
    Example, Head, LossOptions, ModelParams, Tensor,
};
use crate::hash::{corpus_hash, derive_seed};
use crate::mlm::{
    build_masked_dataset, mask_instance, mix_domain_corpus, MaskedInstance, MaskingConfig, MixedUnlabeledSet,
};
use crate::tagmap::TagInventory;
use crate::tokenizer::{tokenize_corpus, SubwordVocabulary, TokenizedSentence};
use crate::{rng_from_seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Pretrained,
    DomainTuned,
    TaskTuned,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Pretrained => "pretrained",
            Stage::DomainTuned => "domain-tuned",
            Stage::TaskTuned => "task-tuned",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Stage::Pretrained, Stage::DomainTuned, Stage::TaskTuned]
            .into_iter()
            .find(|st| st.as_str() == s)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Tag head trained on a fixed encoder.
    Frozen,
    /// Encoder and head fine-tuned on source labels.
    TaskTuned,
    /// Masked-LM tuning on mixed source and target text, then task tuning.
    AdaptaBert,
    /// Task tuning on target-domain labels.
    Supervised,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Frozen,
        Variant::TaskTuned,
        Variant::AdaptaBert,
        Variant::Supervised,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Frozen => "frozen",
            Variant::TaskTuned => "task_tuned",
            Variant::AdaptaBert => "adaptabert",
            Variant::Supervised => "supervised",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(alloc::format!("unknown variant {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Mlm,
    Tag,
}

/// Hyperparameters of one training stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSchedule {
    pub objective: Objective,
    /// Name of the dataset the stage reads; recorded in provenance.
    pub dataset: String,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub freeze_encoder: bool,
    pub seed: u64,
    /// Optional cap on optimizer updates across all epochs.
    pub max_steps: Option<usize>,
    pub clip_norm: Option<f64>,
}

impl StageSchedule {
    pub fn new(objective: Objective, dataset: impl Into<String>, epochs: usize, lr: f64, seed: u64) -> Self {
        Self {
            objective,
            dataset: dataset.into(),
            epochs,
            batch_size: 16,
            lr,
            freeze_encoder: false,
            seed,
            max_steps: None,
            clip_norm: Some(1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidSchedule("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidSchedule("batch_size must be at least 1".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::InvalidSchedule(alloc::format!("learning rate {} must be positive", self.lr)));
        }
        if self.max_steps == Some(0) {
            return Err(Error::InvalidSchedule("max_steps must be at least 1".into()));
        }
        Ok(())
    }

    fn expect(&self, objective: Objective, stage: Stage) -> Result<()> {
        self.validate()?;
        if self.objective != objective {
            return Err(Error::InvalidSchedule(alloc::format!(
                "stage {stage} needs a {objective:?} schedule"
            )));
        }
        Ok(())
    }
}

/// The ordered stage list of one variant.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSchedule {
    pub stages: Vec<StageSchedule>,
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        self.stages.iter().try_for_each(StageSchedule::validate)
    }
}

/// What one stage did, for provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub stage: Stage,
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub freeze_encoder: bool,
    pub steps: usize,
    pub examples_per_epoch: usize,
    /// `(name, content hash)` of every dataset the stage read.
    pub datasets: Vec<(String, String)>,
    /// Loss of the first batch.
    pub initial_loss: f64,
    /// Mean batch loss per epoch.
    pub epoch_losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub stage: Stage,
    pub params: ModelParams<f32>,
    pub optimizer: Option<AdamState<f32>>,
    /// Set once a tag head has been trained.
    pub tag_inventory: Option<TagInventory>,
    /// Most frequent training tag, assigned to words lost to truncation.
    pub fallback_tag: Option<String>,
    /// Every stage that led to this checkpoint, oldest first.
    pub provenance: Vec<StageRecord>,
}

impl Checkpoint {
    pub fn stages(&self) -> Vec<Stage> {
        self.provenance.iter().map(|r| r.stage).collect()
    }
}

#[derive(Clone)]
struct TrainItem {
    ids: Vec<u32>,
    targets: Vec<Option<u32>>,
}

impl From<MaskedInstance> for TrainItem {
    fn from(m: MaskedInstance) -> Self {
        TrainItem {
            ids: m.input_ids,
            targets: m.targets,
        }
    }
}

struct LoopResult {
    state: AdamState<f32>,
    steps: usize,
    initial_loss: f64,
    epoch_losses: Vec<f64>,
}

/// Shuffled mini-batch Adam over the items produced for each epoch.
fn train_loop<'d>(
    params: &mut ModelParams<f32>,
    schedule: &StageSchedule,
    head: Head,
    stage: Stage,
    mut epoch_items: impl FnMut(usize) -> Result<Cow<'d, [TrainItem]>>,
) -> Result<LoopResult> {
    let adam = Adam {
        clip_norm: schedule.clip_norm,
        ..Adam::default()
    };
    let mut state = AdamState::new(params);
    let mut rng = rng_from_seed(derive_seed(schedule.seed, "batches"));
    let options = LossOptions {
        head,
        train_mode: !schedule.freeze_encoder,
        freeze_encoder: schedule.freeze_encoder,
    };
    let mut steps = 0;
    let mut initial_loss = f64::NAN;
    let mut epoch_losses = Vec::with_capacity(schedule.epochs);
    let diverged = |step| Error::Diverged {
        stage: stage.as_str().to_string(),
        step,
    };
    'epochs: for epoch in 0..schedule.epochs {
        let items = epoch_items(epoch)?;
        let mut order: Vec<usize> = (0..items.len()).collect();
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(schedule.batch_size) {
            if schedule.max_steps.is_some_and(|m| steps >= m) {
                break 'epochs;
            }
            let batch: Vec<Example<'_>> = chunk
                .iter()
                .map(|&i| Example {
                    piece_ids: &items[i].ids,
                    targets: &items[i].targets,
                })
                .collect();
            let (loss, grads) = match loss_and_gradients(params, &batch, options, &mut rng) {
                Err(Error::NoTargets) => continue,
                r => r?,
            };
            if !loss.is_finite() {
                return Err(diverged(steps));
            }
            adam.step(params, &grads, &mut state, schedule.lr).map_err(|e| match e {
                Error::NonFiniteGradient(_) => diverged(steps),
                e => e,
            })?;
            if steps == 0 {
                initial_loss = loss;
            }
            steps += 1;
            sum += loss;
            batches += 1;
        }
        epoch_losses.push(if batches > 0 { sum / batches as f64 } else { f64::NAN });
    }
    if !params.is_finite() {
        return Err(diverged(steps));
    }
    Ok(LoopResult {
        state,
        steps,
        initial_loss,
        epoch_losses,
    })
}

fn check_vocab(config: &EncoderConfig, vocab: &SubwordVocabulary) -> Result<()> {
    if config.vocab_size != vocab.len() {
        return Err(Error::InvalidConfig(alloc::format!(
            "encoder vocab_size {} differs from vocabulary size {}",
            config.vocab_size,
            vocab.len()
        )));
    }
    Ok(())
}

fn maskable(instances: Vec<TokenizedSentence>) -> Vec<TokenizedSentence> {
    instances
        .into_iter()
        .filter(|t| t.maskable_positions().next().is_some())
        .collect()
}

fn record(
    stage: Stage,
    schedule: &StageSchedule,
    examples_per_epoch: usize,
    datasets: Vec<(String, String)>,
    r: &LoopResult,
) -> StageRecord {
    StageRecord {
        stage,
        seed: schedule.seed,
        epochs: schedule.epochs,
        batch_size: schedule.batch_size,
        lr: schedule.lr,
        freeze_encoder: schedule.freeze_encoder,
        steps: r.steps,
        examples_per_epoch,
        datasets,
        initial_loss: r.initial_loss,
        epoch_losses: r.epoch_losses.clone(),
    }
}

/// Masked-LM training from a fresh initialization. Each epoch draws one new
/// masking per sentence; tags, if any, are ignored.
pub fn pretrain_general(
    config: &EncoderConfig,
    corpus: &Corpus,
    vocab: &SubwordVocabulary,
    schedule: &StageSchedule,
    masking: &MaskingConfig,
) -> Result<Checkpoint> {
    schedule.expect(Objective::Mlm, Stage::Pretrained)?;
    config.validate()?;
    check_vocab(config, vocab)?;
    let instances = maskable(tokenize_corpus(corpus, vocab, config.max_len)?);
    if instances.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut params = init_params::<f32>(config, derive_seed(schedule.seed, "init"))?;
    let result = train_loop(&mut params, schedule, Head::Mlm, Stage::Pretrained, |epoch| {
        let mut rng = rng_from_seed(derive_seed(schedule.seed, &alloc::format!("mask-{epoch}")));
        instances
            .iter()
            .map(|t| mask_instance(t, masking, vocab, &mut rng).map(TrainItem::from))
            .collect::<Result<Vec<_>>>()
            .map(Cow::Owned)
    })?;
    let rec = record(
        Stage::Pretrained,
        schedule,
        instances.len(),
        alloc::vec![(corpus.name.clone(), corpus_hash(corpus))],
        &result,
    );
    Ok(Checkpoint {
        stage: Stage::Pretrained,
        params,
        optimizer: Some(result.state),
        tag_inventory: None,
        fallback_tag: None,
        provenance: alloc::vec![rec],
    })
}

/// The mixed unlabeled set and its masked dataset exactly as domain tuning
/// with stage seed `seed` builds them.
pub fn domain_masked_dataset(
    target: &Corpus,
    source_unlabeled: &Corpus,
    vocab: &SubwordVocabulary,
    max_len: usize,
    seed: u64,
    masking: &MaskingConfig,
) -> Result<(MixedUnlabeledSet, Vec<MaskedInstance>)> {
    let target_tok = maskable(tokenize_corpus(target, vocab, max_len)?);
    let source_tok = maskable(tokenize_corpus(source_unlabeled, vocab, max_len)?);
    let mixed = mix_domain_corpus(&target_tok, &source_tok, derive_seed(seed, "mix"))?;
    let dataset = build_masked_dataset(&mixed, masking, vocab, derive_seed(seed, "mask"))?;
    Ok((mixed, dataset))
}

/// Mixes all target text with an equal amount of source text, builds the
/// static multi-masking dataset, and runs `schedule.epochs` passes of
/// masked-LM training over it. The tag head is left as is.
pub fn domain_tune(
    checkpoint: &Checkpoint,
    target: &Corpus,
    source_unlabeled: &Corpus,
    vocab: &SubwordVocabulary,
    schedule: &StageSchedule,
    masking: &MaskingConfig,
) -> Result<Checkpoint> {
    schedule.expect(Objective::Mlm, Stage::DomainTuned)?;
    check_vocab(&checkpoint.params.config, vocab)?;
    if target.is_empty() {
        return Err(Error::EmptyTarget);
    }
    let (mixed, dataset) = domain_masked_dataset(
        target,
        source_unlabeled,
        vocab,
        checkpoint.params.config.max_len,
        schedule.seed,
        masking,
    )?;
    let items: Vec<TrainItem> = dataset.into_iter().map(TrainItem::from).collect();
    let mut params = checkpoint.params.clone();
    // The masked dataset is static across epochs.
    let result = train_loop(&mut params, schedule, Head::Mlm, Stage::DomainTuned, |_| {
        Ok(Cow::Borrowed(&items[..]))
    })?;
    let mut provenance = checkpoint.provenance.clone();
    provenance.push(record(
        Stage::DomainTuned,
        schedule,
        mixed.instances.len() * masking.maskings_per_instance,
        alloc::vec![
            (target.name.clone(), corpus_hash(target)),
            (source_unlabeled.name.clone(), corpus_hash(source_unlabeled)),
        ],
        &result,
    ));
    Ok(Checkpoint {
        stage: Stage::DomainTuned,
        params,
        optimizer: Some(result.state),
        tag_inventory: checkpoint.tag_inventory.clone(),
        fallback_tag: checkpoint.fallback_tag.clone(),
        provenance,
    })
}

/// Piece ids plus a target at the first piece of every word.
pub fn first_piece_targets(tok: &TokenizedSentence, tag_ids: &[u32]) -> Vec<Option<u32>> {
    tok.word_start
        .iter()
        .zip(&tok.word_index)
        .map(|(&start, wi)| if start { wi.map(|w| tag_ids[w]) } else { None })
        .collect()
}

/// Most frequent tag id, lowest id on ties.
fn most_frequent(counts: &[usize]) -> u32 {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best as u32
}

/// Fits the tag head (and the encoder unless `schedule.freeze_encoder`) to
/// labeled data with loss at each word's first piece. A checkpoint without
/// a tag inventory gets a freshly initialized head sized to `inventory`.
pub fn task_tune(
    checkpoint: &Checkpoint,
    labeled: &Corpus,
    inventory: &TagInventory,
    vocab: &SubwordVocabulary,
    schedule: &StageSchedule,
) -> Result<Checkpoint> {
    schedule.expect(Objective::Tag, Stage::TaskTuned)?;
    check_vocab(&checkpoint.params.config, vocab)?;
    if !labeled.labeled() {
        return Err(Error::Unlabeled(labeled.name.clone()));
    }
    let mut params = checkpoint.params.clone();
    match &checkpoint.tag_inventory {
        Some(own) if own != inventory => return Err(Error::InventoryMismatch),
        Some(_) => {}
        None => fresh_tag_head(&mut params, inventory.len(), derive_seed(schedule.seed, "tag-head")),
    }

    let max_len = params.config.max_len;
    let mut counts = alloc::vec![0usize; inventory.len()];
    let mut items = Vec::with_capacity(labeled.len());
    for (si, s) in labeled.sentences().iter().enumerate() {
        let ids = inventory.encode(s.tags().unwrap_or_default(), si)?;
        for &i in &ids {
            counts[i as usize] += 1;
        }
        let tok = crate::tokenizer::tokenize_sentence(s, vocab, max_len)?;
        let targets = first_piece_targets(&tok, &ids);
        items.push(TrainItem {
            ids: tok.piece_ids,
            targets,
        });
    }
    let fallback = inventory
        .tag(most_frequent(&counts))
        .map(String::from)
        .ok_or(Error::EmptyCorpus)?;

    let n = items.len();
    let result = train_loop(&mut params, schedule, Head::Tag, Stage::TaskTuned, |_| {
        Ok(Cow::Borrowed(&items[..]))
    })?;

    let mut provenance = checkpoint.provenance.clone();
    provenance.push(record(
        Stage::TaskTuned,
        schedule,
        n,
        alloc::vec![(labeled.name.clone(), corpus_hash(labeled))],
        &result,
    ));
    Ok(Checkpoint {
        stage: Stage::TaskTuned,
        params,
        optimizer: Some(result.state),
        tag_inventory: Some(inventory.clone()),
        fallback_tag: Some(fallback),
        provenance,
    })
}

fn fresh_tag_head(params: &mut ModelParams<f32>, num_tags: usize, seed: u64) {
    use rand_distr::{Distribution, Normal};
    let h = params.config.hidden_dim;
    params.config.num_tags = num_tags;
    let normal = Normal::new(0.0f32, 0.02).expect("valid normal");
    let mut rng = rng_from_seed(seed);
    params.tag_weight = Tensor {
        shape: alloc::vec![num_tags, h],
        data: (0..num_tags * h).map(|_| normal.sample(&mut rng)).collect(),
    };
    params.tag_bias = Tensor::zeros(&[num_tags]);
}

/// Data a variant may read. Which fields are required depends on the variant.
#[derive(Debug, Clone, Copy)]
pub struct VariantInputs<'a> {
    pub vocab: &'a SubwordVocabulary,
    pub inventory: &'a TagInventory,
    /// Shared pretrained checkpoint; when absent, `general` is pretrained.
    pub pretrained: Option<&'a Checkpoint>,
    pub general: Option<&'a Corpus>,
    pub source_labeled: Option<&'a Corpus>,
    /// Pool of source text matched against the target during domain tuning.
    pub source_unlabeled: Option<&'a Corpus>,
    pub target_unlabeled: Option<&'a Corpus>,
    pub target_labeled: Option<&'a Corpus>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantSchedules {
    pub encoder: EncoderConfig,
    pub masking: MaskingConfig,
    pub pretrain: StageSchedule,
    pub domain: StageSchedule,
    pub task: StageSchedule,
}

/// Checkpoints of every stage of one variant, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantRun {
    pub variant: Variant,
    pub checkpoints: Vec<Checkpoint>,
}

impl VariantRun {
    pub fn last(&self) -> &Checkpoint {
        self.checkpoints.last().expect("a variant run has at least one stage")
    }
}

fn need<'a, T>(x: Option<&'a T>, what: &str, variant: Variant) -> Result<&'a T> {
    x.ok_or_else(|| Error::MissingInput(alloc::format!("variant {variant} needs {what}")))
}

/// Validates that `inputs` carry everything `variant` reads.
pub fn check_variant_inputs(variant: Variant, inputs: &VariantInputs<'_>) -> Result<()> {
    if inputs.pretrained.is_none() {
        need(inputs.general, "a general corpus or a pretrained checkpoint", variant)?;
    }
    match variant {
        Variant::Frozen | Variant::TaskTuned => {
            need(inputs.source_labeled, "labeled source data", variant)?;
        }
        Variant::AdaptaBert => {
            need(inputs.source_labeled, "labeled source data", variant)?;
            need(inputs.target_unlabeled, "unlabeled target data", variant)?;
            need(inputs.source_unlabeled, "unlabeled source data", variant)?;
        }
        Variant::Supervised => {
            need(inputs.target_labeled, "labeled target data", variant)?;
        }
    }
    Ok(())
}

/// frozen: pretrain → task tune with the encoder fixed;
/// task_tuned: pretrain → task tune;
/// adaptabert: pretrain → domain tune → task tune;
/// supervised: pretrain → task tune on target labels.
pub fn run_variant(
    variant: Variant,
    inputs: &VariantInputs<'_>,
    schedules: &VariantSchedules,
) -> Result<VariantRun> {
    check_variant_inputs(variant, inputs)?;
    let pretrained = match inputs.pretrained {
        Some(c) => c.clone(),
        None => pretrain_general(
            &schedules.encoder,
            need(inputs.general, "a general corpus", variant)?,
            inputs.vocab,
            &schedules.pretrain,
            &schedules.masking,
        )?,
    };
    let mut task = schedules.task.clone();
    task.freeze_encoder = variant == Variant::Frozen;
    let mut checkpoints = alloc::vec![pretrained];
    match variant {
        Variant::Frozen | Variant::TaskTuned => {
            let labeled = need(inputs.source_labeled, "labeled source data", variant)?;
            let c = task_tune(&checkpoints[0], labeled, inputs.inventory, inputs.vocab, &task)?;
            checkpoints.push(c);
        }
        Variant::AdaptaBert => {
            let d = domain_tune(
                &checkpoints[0],
                need(inputs.target_unlabeled, "unlabeled target data", variant)?,
                need(inputs.source_unlabeled, "unlabeled source data", variant)?,
                inputs.vocab,
                &schedules.domain,
                &schedules.masking,
            )?;
            let labeled = need(inputs.source_labeled, "labeled source data", variant)?;
            let c = task_tune(&d, labeled, inputs.inventory, inputs.vocab, &task)?;
            checkpoints.push(d);
            checkpoints.push(c);
        }
        Variant::Supervised => {
            let labeled = need(inputs.target_labeled, "labeled target data", variant)?;
            let c = task_tune(&checkpoints[0], labeled, inputs.inventory, inputs.vocab, &task)?;
            checkpoints.push(c);
        }
    }
    Ok(VariantRun {
        variant,
        checkpoints,
    })
}

/// Fraction of masked positions whose original piece is the MLM argmax.
pub fn masked_token_accuracy(params: &ModelParams<f32>, instances: &[MaskedInstance]) -> Result<Option<f64>> {
    let mut rng = rng_from_seed(0);
    let (mut hit, mut total) = (0usize, 0usize);
    for m in instances {
        let out = forward(params, &m.input_ids, false, &mut rng)?;
        let pred = predict_positions(params, &out, Head::Mlm);
        for (p, t) in m.targets.iter().enumerate() {
            if let Some(t) = t {
                total += 1;
                hit += (pred[p] == *t) as usize;
            }
        }
    }
    Ok((total > 0).then(|| hit as f64 / total as f64))
}

/// One fixed masking of every maskable sentence, for held-out MLM scoring.
pub fn heldout_masked_set(
    corpus: &Corpus,
    vocab: &SubwordVocabulary,
    max_len: usize,
    masking: &MaskingConfig,
    seed: u64,
) -> Result<Vec<MaskedInstance>> {
    let instances = maskable(tokenize_corpus(corpus, vocab, max_len)?);
    let mut rng = rng_from_seed(seed);
    instances
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut m = mask_instance(t, masking, vocab, &mut rng)?;
            m.source_instance_ref = i;
            Ok(m)
        })
        .collect()
}
