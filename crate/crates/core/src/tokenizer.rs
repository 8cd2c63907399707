//! Subword vocabulary training and greedy longest-match segmentation.
//!
//! Continuation pieces carry a `##` prefix. Only the first piece of a word
//! is tagged; continuation pieces and special tokens are ignored by the tag
//! loss and by prediction.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::{Corpus, Domain, Sentence};
use crate::{Error, Result};

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const CLS: u32 = 2;
pub const SEP: u32 = 3;
pub const MASK: u32 = 4;
pub const SPECIAL_TOKENS: [&str; 5] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"];
pub const NUM_SPECIALS: u32 = SPECIAL_TOKENS.len() as u32;
pub const CONTINUATION: &str = "##";
pub const DEFAULT_MAX_LEN: usize = 64;

pub fn is_special(id: u32) -> bool {
    id < NUM_SPECIALS
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubwordVocabulary {
    pieces: Vec<String>,
    piece_to_id: BTreeMap<String, u32>,
}

impl SubwordVocabulary {
    /// Builds a vocabulary from an id-ordered piece list. The five special
    /// tokens must come first, in their fixed order, and pieces must be unique.
    pub fn from_pieces(pieces: Vec<String>) -> Result<Self> {
        if pieces.len() < SPECIAL_TOKENS.len()
            || pieces.iter().zip(SPECIAL_TOKENS).any(|(p, s)| p != s)
        {
            return Err(Error::InvalidConfig(
                "vocabulary must start with [PAD] [UNK] [CLS] [SEP] [MASK]".into(),
            ));
        }
        let mut piece_to_id = BTreeMap::new();
        for (id, p) in pieces.iter().enumerate() {
            if p.is_empty() || p == CONTINUATION {
                return Err(Error::InvalidConfig(alloc::format!("invalid piece {p:?} at id {id}")));
            }
            if piece_to_id.insert(p.clone(), id as u32).is_some() {
                return Err(Error::InvalidConfig(alloc::format!("duplicate piece {p:?}")));
            }
        }
        Ok(Self {
            pieces,
            piece_to_id,
        })
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn pieces(&self) -> &[String] {
        &self.pieces
    }

    pub fn id(&self, piece: &str) -> Option<u32> {
        self.piece_to_id.get(piece).copied()
    }

    pub fn piece(&self, id: u32) -> Option<&str> {
        self.pieces.get(id as usize).map(String::as_str)
    }

    /// Ids of every non-special piece.
    pub fn regular_ids(&self) -> core::ops::Range<u32> {
        NUM_SPECIALS..self.pieces.len() as u32
    }
}

/// One training word as a sequence of symbols, with its frequency.
struct WordSymbols {
    symbols: Vec<String>,
    count: usize,
}

fn continuation(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push_str(CONTINUATION);
    out.push_str(s);
    out
}

fn surface(piece: &str) -> &str {
    piece.strip_prefix(CONTINUATION).unwrap_or(piece)
}

fn merge_pair(left: &str, right: &str) -> String {
    let mut out = String::from(left);
    out.push_str(surface(right));
    out
}

/// Trains a subword inventory by greedy pair merging over word counts.
///
/// The base inventory holds every observed character in both its
/// word-initial and `##` continuation form, so any word over the training
/// alphabet segments without `[UNK]`. Each merge adds one piece. The most
/// frequent adjacent pair is merged first; ties go to the merged piece whose
/// surface string sorts first, and then to the word-initial form.
pub fn train_subword_vocab(
    corpus: &Corpus,
    target_size: usize,
    min_frequency: usize,
) -> Result<SubwordVocabulary> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for w in corpus.sentences().iter().flat_map(|s| s.words()) {
        *counts.entry(w.as_str()).or_default() += 1;
    }

    let mut alphabet: Vec<char> = counts.keys().flat_map(|w| w.chars()).collect();
    alphabet.sort_unstable();
    alphabet.dedup();
    let mut pieces: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
    for &c in &alphabet {
        pieces.push(c.to_string());
        pieces.push(continuation(c.encode_utf8(&mut [0; 4])));
    }
    if target_size < pieces.len() {
        return Err(Error::VocabTooSmall {
            target: target_size,
            required: pieces.len(),
        });
    }

    let mut words: Vec<WordSymbols> = counts
        .iter()
        .map(|(w, &count)| WordSymbols {
            symbols: w
                .chars()
                .enumerate()
                .map(|(i, c)| {
                    let s = c.to_string();
                    if i == 0 { s } else { continuation(&s) }
                })
                .collect(),
            count,
        })
        .collect();

    let mut known: BTreeSet<String> = pieces.iter().cloned().collect();
    while pieces.len() < target_size {
        let mut pair_counts: BTreeMap<(&str, &str), usize> = BTreeMap::new();
        for w in &words {
            for pair in w.symbols.windows(2) {
                *pair_counts
                    .entry((pair[0].as_str(), pair[1].as_str()))
                    .or_default() += w.count;
            }
        }
        let best = pair_counts
            .iter()
            .filter(|(_, &c)| c >= min_frequency.max(1))
            .map(|(&(l, r), &c)| (c, merge_pair(l, r), l, r))
            .filter(|(_, merged, _, _)| !known.contains(merged))
            .min_by(|a, b| {
                b.0.cmp(&a.0)
                    .then_with(|| surface(&a.1).cmp(surface(&b.1)))
                    .then_with(|| a.1.len().cmp(&b.1.len()))
            });
        let Some((_, merged, left, right)) = best else {
            break;
        };
        let (left, right) = (left.to_string(), right.to_string());
        for w in &mut words {
            let mut i = 0;
            let mut out = Vec::with_capacity(w.symbols.len());
            while i < w.symbols.len() {
                if i + 1 < w.symbols.len() && w.symbols[i] == left && w.symbols[i + 1] == right {
                    out.push(merged.clone());
                    i += 2;
                } else {
                    out.push(core::mem::take(&mut w.symbols[i]));
                    i += 1;
                }
            }
            w.symbols = out;
        }
        known.insert(merged.clone());
        pieces.push(merged);
    }
    SubwordVocabulary::from_pieces(pieces)
}

/// Greedy longest-match-first segmentation. A word containing any stretch
/// that no piece covers becomes a single `[UNK]`.
pub fn segment_word(word: &str, vocab: &SubwordVocabulary) -> Vec<u32> {
    let bounds: Vec<usize> = word
        .char_indices()
        .map(|(i, _)| i)
        .chain(core::iter::once(word.len()))
        .collect();
    let n_chars = bounds.len() - 1;
    let mut out = Vec::new();
    let mut start = 0;
    let mut key = String::new();
    while start < n_chars {
        let mut found = None;
        for end in (start + 1..=n_chars).rev() {
            key.clear();
            if start > 0 {
                key.push_str(CONTINUATION);
            }
            key.push_str(&word[bounds[start]..bounds[end]]);
            if let Some(id) = vocab.id(&key) {
                found = Some((id, end));
                break;
            }
        }
        match found {
            Some((id, end)) => {
                out.push(id);
                start = end;
            }
            None => return vec![UNK],
        }
    }
    if out.is_empty() {
        out.push(UNK);
    }
    out
}

/// A sentence as piece ids with word alignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedSentence {
    pub piece_ids: Vec<u32>,
    /// True exactly at the first piece of each included word.
    pub word_start: Vec<bool>,
    /// Originating word per piece; `None` for special tokens.
    pub word_index: Vec<Option<usize>>,
    /// Number of leading words that fit within `max_len`.
    pub words_included: usize,
    pub truncated: bool,
    pub domain: Domain,
}

impl TokenizedSentence {
    pub fn len(&self) -> usize {
        self.piece_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.piece_ids.is_empty()
    }

    /// Positions holding regular (non-special) pieces.
    pub fn maskable_positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.piece_ids
            .iter()
            .enumerate()
            .filter(|(_, &id)| !is_special(id))
            .map(|(i, _)| i)
    }

    /// First-piece position of each included word.
    pub fn word_starts(&self) -> impl Iterator<Item = usize> + '_ {
        self.word_start.iter().enumerate().filter(|(_, &s)| s).map(|(i, _)| i)
    }
}

/// `[CLS]` + word pieces + `[SEP]`, truncated at a word boundary when the
/// pieces do not fit in `max_len - 2`.
pub fn tokenize_sentence(
    sentence: &Sentence,
    vocab: &SubwordVocabulary,
    max_len: usize,
) -> Result<TokenizedSentence> {
    if max_len < 3 {
        return Err(Error::InvalidConfig(alloc::format!("max_len {max_len} is below 3")));
    }
    let budget = max_len - 2;
    let mut piece_ids = vec![CLS];
    let mut word_start = vec![false];
    let mut word_index = vec![None];
    let mut words_included = 0;
    for (wi, word) in sentence.words().iter().enumerate() {
        let pieces = segment_word(word, vocab);
        if piece_ids.len() - 1 + pieces.len() > budget {
            break;
        }
        for (k, id) in pieces.into_iter().enumerate() {
            piece_ids.push(id);
            word_start.push(k == 0);
            word_index.push(Some(wi));
        }
        words_included += 1;
    }
    piece_ids.push(SEP);
    word_start.push(false);
    word_index.push(None);
    Ok(TokenizedSentence {
        piece_ids,
        word_start,
        word_index,
        words_included,
        truncated: words_included < sentence.len(),
        domain: sentence.domain,
    })
}

pub fn tokenize_corpus(
    corpus: &Corpus,
    vocab: &SubwordVocabulary,
    max_len: usize,
) -> Result<Vec<TokenizedSentence>> {
    corpus
        .sentences()
        .iter()
        .map(|s| tokenize_sentence(s, vocab, max_len))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::sentence;

    fn vocab(extra: &[&str]) -> SubwordVocabulary {
        let mut pieces: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
        pieces.extend(extra.iter().map(|s| s.to_string()));
        SubwordVocabulary::from_pieces(pieces).unwrap()
    }

    fn repeated(word: &str, n: usize) -> Corpus {
        Corpus::new("r", (0..n).map(|_| sentence(&[word], None, "d")).collect())
    }

    #[test]
    fn one_merge_on_abab_yields_ab() {
        // pair counts on [a ##b ##a ##b] x 5: (a,##b)=5 (##b,##a)=5 (##a,##b)=5;
        // surface strings ab, ba, ab tie-break to the word-initial "ab".
        let c = repeated("abab", 5);
        let base = 5 + 4;
        let v = train_subword_vocab(&c, base + 1, 1).unwrap();
        assert_eq!(v.len(), base + 1);
        assert_eq!(v.pieces().last().unwrap(), "ab");
    }

    #[test]
    fn zero_merge_budget_is_character_level() {
        let c = repeated("abab", 5);
        let v = train_subword_vocab(&c, 9, 1).unwrap();
        assert_eq!(&v.pieces()[5..], ["a", "##a", "b", "##b"]);
        assert_eq!(
            train_subword_vocab(&c, 8, 1),
            Err(Error::VocabTooSmall { target: 8, required: 9 })
        );
        assert_eq!(train_subword_vocab(&Corpus::new("e", vec![]), 50, 1), Err(Error::EmptyCorpus));
    }

    #[test]
    fn min_frequency_stops_merging() {
        let c = repeated("abab", 1);
        let v = train_subword_vocab(&c, 100, 2).unwrap();
        assert_eq!(v.len(), 9);
    }

    #[test]
    fn specials_have_fixed_ids() {
        let v = vocab(&["a"]);
        assert_eq!(v.id("[PAD]"), Some(PAD));
        assert_eq!(v.id("[MASK]"), Some(MASK));
        assert!(SubwordVocabulary::from_pieces(vec!["a".into()]).is_err());
    }

    #[test]
    fn silent_e_is_a_separate_piece() {
        let v = vocab(&["mead", "##e"]);
        assert_eq!(segment_word("meade", &v), vec![v.id("mead").unwrap(), v.id("##e").unwrap()]);
        assert_eq!(segment_word("mead", &v), vec![v.id("mead").unwrap()]);
        assert_eq!(segment_word("meadz", &v), vec![UNK]);
    }

    #[test]
    fn tokenize_structure_and_truncation() {
        let v = vocab(&["a", "b", "c", "##c"]);
        let s = sentence(&["a", "b"], None, "d");
        let t = tokenize_sentence(&s, &v, 64).unwrap();
        assert_eq!(t.piece_ids.len(), 4);
        assert_eq!(t.word_start, vec![false, true, true, false]);
        assert_eq!(t.word_index, vec![None, Some(0), Some(1), None]);

        let s = sentence(&["a", "ccc", "b"], None, "d");
        let t = tokenize_sentence(&s, &v, 64).unwrap();
        assert_eq!(t.word_start.iter().filter(|&&x| x).count(), 3);
        assert_eq!(t.word_index[2..5], [Some(1); 3]);

        // max_len 5 leaves room for 3 pieces: "a" fits, "ccc" does not.
        let t = tokenize_sentence(&s, &v, 5).unwrap();
        assert!(t.truncated);
        assert_eq!(t.words_included, 1);
        assert_eq!(t.word_start.iter().filter(|&&x| x).count(), 1);
        assert!(t.piece_ids.len() <= 5);
        assert!(tokenize_sentence(&s, &v, 2).is_err());
    }
}
