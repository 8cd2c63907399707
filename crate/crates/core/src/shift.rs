//! Synthetic orthographic domain shift.
//!
//! Emulates historical spelling variation with four word-local rules:
//! u/v alternation, i→y substitution, a trailing silent `e`, and
//! inconsistent capitalization of the first letter.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::corpus::{Corpus, Domain, Sentence};
use crate::{rng_from_seed, Error, Result, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShiftRule {
    /// Word-initial `u` becomes `v`; word-internal `v` becomes `u`.
    UvAlternation,
    /// Every `i` becomes `y`.
    IToY,
    /// Append `e` to words of three or more letters ending in a consonant.
    SilentE,
    /// Toggle the case of the first letter.
    Capitalization,
}

impl ShiftRule {
    pub const ALL: [ShiftRule; 4] = [
        ShiftRule::UvAlternation,
        ShiftRule::IToY,
        ShiftRule::SilentE,
        ShiftRule::Capitalization,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ShiftRule::UvAlternation => "uv",
            ShiftRule::IToY => "iy",
            ShiftRule::SilentE => "silent_e",
            ShiftRule::Capitalization => "capitalization",
        }
    }

    fn apply(self, word: &str) -> String {
        match self {
            ShiftRule::UvAlternation => word
                .chars()
                .enumerate()
                .map(|(i, c)| match (i, c) {
                    (0, 'u') => 'v',
                    (0, 'U') => 'V',
                    (i, 'v') if i > 0 => 'u',
                    (i, 'V') if i > 0 => 'U',
                    (_, c) => c,
                })
                .collect(),
            ShiftRule::IToY => word
                .chars()
                .map(|c| match c {
                    'i' => 'y',
                    'I' => 'Y',
                    c => c,
                })
                .collect(),
            ShiftRule::SilentE => {
                let mut out = String::from(word);
                let last = word.chars().last();
                if word.chars().count() >= 3 && last.is_some_and(is_consonant) {
                    out.push(if last.is_some_and(char::is_uppercase) { 'E' } else { 'e' });
                }
                out
            }
            ShiftRule::Capitalization => {
                let mut chars = word.chars();
                match chars.next() {
                    Some(first) if first.is_alphabetic() => {
                        let mut out = String::with_capacity(word.len());
                        if first.is_uppercase() {
                            out.extend(first.to_lowercase());
                        } else {
                            out.extend(first.to_uppercase());
                        }
                        out.push_str(chars.as_str());
                        out
                    }
                    _ => String::from(word),
                }
            }
        }
    }
}

fn is_consonant(c: char) -> bool {
    c.is_ascii_alphabetic() && !matches!(c.to_ascii_lowercase(), 'a' | 'e' | 'i' | 'o' | 'u')
}

/// Ordered rules with firing probabilities, plus the generator seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftRuleSet {
    rules: Vec<(ShiftRule, f64)>,
    pub seed: u64,
}

impl ShiftRuleSet {
    pub fn new(rules: Vec<(ShiftRule, f64)>, seed: u64) -> Result<Self> {
        if let Some((_, p)) = rules.iter().find(|(_, p)| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidConfig(alloc::format!(
                "shift probability {p} outside [0, 1]"
            )));
        }
        Ok(Self { rules, seed })
    }

    /// Rules in canonical order, each with the same probability.
    pub fn uniform(probability: f64, seed: u64) -> Result<Self> {
        Self::new(ShiftRule::ALL.iter().map(|&r| (r, probability)).collect(), seed)
    }

    pub fn rules(&self) -> &[(ShiftRule, f64)] {
        &self.rules
    }
}

/// Passes one word through every rule in order. One uniform draw is consumed
/// per rule regardless of outcome, so the stream position depends only on
/// the number of words processed.
pub fn apply_shift(word: &str, rules: &ShiftRuleSet, rng: &mut Rng) -> String {
    let mut out = String::from(word);
    for &(rule, p) in &rules.rules {
        let draw: f64 = rng.random();
        if draw < p {
            out = rule.apply(&out);
        }
    }
    out
}

/// Shifts every word of `corpus` and relabels it as target-domain text.
pub fn generate_shifted_corpus(corpus: &Corpus, rules: &ShiftRuleSet) -> Result<Corpus> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut rng = rng_from_seed(rules.seed);
    let sentences = corpus
        .sentences()
        .iter()
        .map(|s| {
            let words = s.words().iter().map(|w| apply_shift(w, rules, &mut rng)).collect();
            let mut shifted = s.with_words(words)?;
            shifted.domain = Domain::Target;
            Ok(shifted)
        })
        .collect::<Result<Vec<Sentence>>>()?;
    Ok(Corpus::new(corpus.name.clone(), sentences))
}
