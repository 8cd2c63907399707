//! Masked-LM data preparation: mixing source and target text, choosing
//! positions, and the mask / random / keep replacement actions.

use alloc::vec::Vec;
use rand::seq::index;
use rand::Rng as _;

use crate::corpus::Domain;
use crate::tokenizer::{is_special, SubwordVocabulary, TokenizedSentence, MASK};
use crate::{rng_from_seed, Error, Result, Rng};

/// What happened to one selected position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MaskAction {
    Mask,
    Random,
    Keep,
}

/// Probabilities of the three replacement actions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionProbs {
    pub mask: f64,
    pub random: f64,
    pub keep: f64,
}

impl Default for ActionProbs {
    fn default() -> Self {
        Self {
            mask: 0.8,
            random: 0.1,
            keep: 0.1,
        }
    }
}

impl ActionProbs {
    pub fn new(mask: f64, random: f64, keep: f64) -> Result<Self> {
        let p = Self { mask, random, keep };
        let ok = [mask, random, keep].iter().all(|x| (0.0..=1.0).contains(x))
            && ((mask + random + keep) - 1.0).abs() < 1e-9;
        if ok {
            Ok(p)
        } else {
            Err(Error::InvalidConfig(alloc::format!(
                "action probabilities ({mask}, {random}, {keep}) must be in [0, 1] and sum to 1"
            )))
        }
    }

    fn draw(&self, rng: &mut Rng) -> MaskAction {
        let u: f64 = rng.random();
        if u < self.mask {
            MaskAction::Mask
        } else if u < self.mask + self.random {
            MaskAction::Random
        } else {
            MaskAction::Keep
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskedInstance {
    pub input_ids: Vec<u32>,
    /// Original id at selected positions, `None` elsewhere.
    pub targets: Vec<Option<u32>>,
    /// Action taken at each position; `None` where not selected.
    pub actions: Vec<Option<MaskAction>>,
    /// Index of the originating instance in its [`MixedUnlabeledSet`].
    pub source_instance_ref: usize,
    pub masking_index: usize,
}

impl MaskedInstance {
    pub fn masked_positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.targets.iter().enumerate().filter(|(_, t)| t.is_some()).map(|(i, _)| i)
    }
}

/// Target instances plus a matched amount of source instances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixedUnlabeledSet {
    pub instances: Vec<TokenizedSentence>,
    pub target_count: usize,
    pub source_count: usize,
}

/// Every target instance, then `|target|` source instances drawn without
/// replacement (the whole pool when it is smaller). Sampled source instances
/// keep their pool order.
pub fn mix_domain_corpus(
    target: &[TokenizedSentence],
    source_pool: &[TokenizedSentence],
    seed: u64,
) -> Result<MixedUnlabeledSet> {
    if target.is_empty() {
        return Err(Error::EmptyTarget);
    }
    let mut instances: Vec<TokenizedSentence> = target
        .iter()
        .cloned()
        .map(|mut t| {
            t.domain = Domain::Target;
            t
        })
        .collect();
    let mut chosen: Vec<usize> = if source_pool.len() >= target.len() {
        let mut rng = rng_from_seed(seed);
        index::sample(&mut rng, source_pool.len(), target.len()).into_vec()
    } else {
        (0..source_pool.len()).collect()
    };
    chosen.sort_unstable();
    instances.extend(chosen.iter().map(|&i| {
        let mut s = source_pool[i].clone();
        s.domain = Domain::Source;
        s
    }));
    Ok(MixedUnlabeledSet {
        instances,
        target_count: target.len(),
        source_count: chosen.len(),
    })
}

/// `max(1, round(rate · n))`, half away from zero.
pub fn mask_count(rate: f64, n: usize) -> usize {
    (libm::round(rate * n as f64) as usize).clamp(1, n.max(1))
}

/// Chooses `max(1, round(rate · N))` distinct non-special positions uniformly;
/// returned in ascending order.
pub fn select_mask_positions(
    instance: &TokenizedSentence,
    rate: f64,
    rng: &mut Rng,
) -> Result<Vec<usize>> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::InvalidRatio(rate));
    }
    let candidates: Vec<usize> = instance.maskable_positions().collect();
    if candidates.is_empty() {
        return Err(Error::NoMaskablePositions);
    }
    let k = mask_count(rate, candidates.len());
    let mut picked: Vec<usize> = index::sample(rng, candidates.len(), k)
        .into_iter()
        .map(|i| candidates[i])
        .collect();
    picked.sort_unstable();
    Ok(picked)
}

/// Whole-word variant: selects `max(1, round(rate · W))` words and returns
/// all of their pieces.
pub fn select_whole_word_positions(
    instance: &TokenizedSentence,
    rate: f64,
    rng: &mut Rng,
) -> Result<Vec<usize>> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::InvalidRatio(rate));
    }
    let words: Vec<usize> = instance.word_starts().map(|p| instance.word_index[p].unwrap_or(0)).collect();
    if words.is_empty() {
        return Err(Error::NoMaskablePositions);
    }
    let k = mask_count(rate, words.len());
    let chosen: Vec<usize> = index::sample(rng, words.len(), k).into_iter().map(|i| words[i]).collect();
    Ok(instance
        .maskable_positions()
        .filter(|&p| instance.word_index[p].is_some_and(|w| chosen.contains(&w)))
        .collect())
}

/// Applies an independent action draw at each selected position. Random
/// replacements are uniform over the non-special pieces.
pub fn apply_mask_actions(
    instance: &TokenizedSentence,
    positions: &[usize],
    vocab: &SubwordVocabulary,
    probs: &ActionProbs,
    rng: &mut Rng,
) -> MaskedInstance {
    let len = instance.len();
    let mut input_ids = instance.piece_ids.clone();
    let mut targets = alloc::vec![None; len];
    let mut actions = alloc::vec![None; len];
    let regular = vocab.regular_ids();
    for &p in positions {
        debug_assert!(!is_special(instance.piece_ids[p]));
        let action = probs.draw(rng);
        match action {
            MaskAction::Mask => input_ids[p] = MASK,
            MaskAction::Random => input_ids[p] = rng.random_range(regular.clone()),
            MaskAction::Keep => {}
        }
        targets[p] = Some(instance.piece_ids[p]);
        actions[p] = Some(action);
    }
    MaskedInstance {
        input_ids,
        targets,
        actions,
        source_instance_ref: 0,
        masking_index: 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskingConfig {
    pub rate: f64,
    pub maskings_per_instance: usize,
    pub whole_word: bool,
    pub actions: ActionProbs,
}

impl Default for MaskingConfig {
    fn default() -> Self {
        Self {
            rate: 0.15,
            maskings_per_instance: 10,
            whole_word: false,
            actions: ActionProbs::default(),
        }
    }
}

/// Masks one instance with the configured selection rule.
pub fn mask_instance(
    instance: &TokenizedSentence,
    config: &MaskingConfig,
    vocab: &SubwordVocabulary,
    rng: &mut Rng,
) -> Result<MaskedInstance> {
    let positions = if config.whole_word {
        select_whole_word_positions(instance, config.rate, rng)?
    } else {
        select_mask_positions(instance, config.rate, rng)?
    };
    Ok(apply_mask_actions(instance, &positions, vocab, &config.actions, rng))
}

/// `maskings_per_instance` independent maskings of every instance, grouped
/// by instance in input order.
pub fn build_masked_dataset(
    mixed: &MixedUnlabeledSet,
    config: &MaskingConfig,
    vocab: &SubwordVocabulary,
    seed: u64,
) -> Result<Vec<MaskedInstance>> {
    if config.maskings_per_instance == 0 {
        return Err(Error::InvalidConfig("maskings_per_instance must be at least 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(mixed.instances.len() * config.maskings_per_instance);
    for (i, inst) in mixed.instances.iter().enumerate() {
        for m in 0..config.maskings_per_instance {
            let mut masked = mask_instance(inst, config, vocab, &mut rng)?;
            masked.source_instance_ref = i;
            masked.masking_index = m;
            out.push(masked);
        }
    }
    Ok(out)
}
