//! Sentences, corpora, document splits and word vocabularies.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;

use crate::{rng_from_seed, Error, Result};

/// Which side of the adaptation problem a sentence belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Domain {
    Source,
    Target,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Source => "source",
            Domain::Target => "target",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "source" => Ok(Domain::Source),
            "target" => Ok(Domain::Target),
            other => Err(Error::InvalidSentence(alloc::format!("unknown domain {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    words: Vec<String>,
    tags: Option<Vec<String>>,
    pub domain: Domain,
    pub doc_id: String,
}

impl Sentence {
    /// Builds a sentence, checking that words are non-empty, whitespace-free
    /// and that tags (when present) align one-to-one with words.
    pub fn new(
        words: Vec<String>,
        tags: Option<Vec<String>>,
        domain: Domain,
        doc_id: impl Into<String>,
    ) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::InvalidSentence("sentence has no words".into()));
        }
        if let Some(w) = words
            .iter()
            .find(|w| w.is_empty() || w.chars().any(char::is_whitespace))
        {
            return Err(Error::InvalidSentence(alloc::format!(
                "word {w:?} is empty or contains whitespace"
            )));
        }
        if let Some(t) = &tags {
            if t.len() != words.len() {
                return Err(Error::InvalidSentence(alloc::format!(
                    "{} tags for {} words",
                    t.len(),
                    words.len()
                )));
            }
        }
        Ok(Self {
            words,
            tags,
            domain,
            doc_id: doc_id.into(),
        })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn tags(&self) -> Option<&[String]> {
        self.tags.as_deref()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Replaces the tag sequence; the new tags must align with the words.
    pub fn with_tags(&self, tags: Option<Vec<String>>) -> Result<Self> {
        Self::new(self.words.clone(), tags, self.domain, self.doc_id.clone())
    }

    /// Replaces the surface forms, keeping tags, domain and document.
    pub fn with_words(&self, words: Vec<String>) -> Result<Self> {
        Self::new(words, self.tags.clone(), self.domain, self.doc_id.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub name: String,
    sentences: Vec<Sentence>,
    labeled: bool,
}

impl Corpus {
    pub fn new(name: impl Into<String>, sentences: Vec<Sentence>) -> Self {
        let labeled = !sentences.is_empty() && sentences.iter().all(|s| s.tags.is_some());
        Self {
            name: name.into(),
            sentences,
            labeled,
        }
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn into_sentences(self) -> Vec<Sentence> {
        self.sentences
    }

    pub fn labeled(&self) -> bool {
        self.labeled
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    /// Copy of the corpus with all tags dropped.
    pub fn unlabeled(&self) -> Corpus {
        let sentences = self
            .sentences
            .iter()
            .map(|s| Sentence {
                tags: None,
                ..s.clone()
            })
            .collect();
        Corpus::new(self.name.clone(), sentences)
    }

    pub fn doc_ids(&self) -> BTreeSet<&str> {
        self.sentences.iter().map(|s| s.doc_id.as_str()).collect()
    }

    /// Sentences whose document appears in `docs`, in corpus order.
    pub fn select_documents(&self, name: impl Into<String>, docs: &BTreeSet<String>) -> Corpus {
        let sentences = self
            .sentences
            .iter()
            .filter(|s| docs.contains(&s.doc_id))
            .cloned()
            .collect();
        Corpus::new(name, sentences)
    }
}

/// Document-level train/test assignment.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitManifest {
    pub train_doc_ids: BTreeSet<String>,
    pub test_doc_ids: BTreeSet<String>,
    pub train_token_count: usize,
    pub test_token_count: usize,
}

fn round_half_up(x: f64) -> usize {
    libm::floor(x + 0.5) as usize
}

/// Randomly assigns `round(test_fraction * #docs)` documents (at least one,
/// at most all but one) to the test side.
pub fn split_by_documents(corpus: &Corpus, test_fraction: f64, seed: u64) -> Result<SplitManifest> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidRatio(test_fraction));
    }
    let mut docs: Vec<String> = corpus.doc_ids().into_iter().map(ToString::to_string).collect();
    if docs.len() < 2 {
        return Err(Error::TooFewDocuments(docs.len()));
    }
    let n_test = round_half_up(test_fraction * docs.len() as f64).clamp(1, docs.len() - 1);
    let mut rng = rng_from_seed(seed);
    docs.shuffle(&mut rng);
    let test_doc_ids: BTreeSet<String> = docs[..n_test].iter().cloned().collect();
    let train_doc_ids: BTreeSet<String> = docs[n_test..].iter().cloned().collect();

    let mut manifest = SplitManifest {
        train_doc_ids,
        test_doc_ids,
        ..Default::default()
    };
    for s in corpus.sentences() {
        if manifest.test_doc_ids.contains(&s.doc_id) {
            manifest.test_token_count += s.len();
        } else {
            manifest.train_token_count += s.len();
        }
    }
    Ok(manifest)
}

/// Reference set for in-vocabulary / out-of-vocabulary decisions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordVocabulary {
    words: BTreeSet<String>,
    case_sensitive: bool,
}

impl WordVocabulary {
    pub fn from_words<I, S>(words: I, case_sensitive: bool) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let words = words
            .into_iter()
            .map(|w| fold(w.as_ref(), case_sensitive))
            .collect();
        Self {
            words,
            case_sensitive,
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        if self.case_sensitive {
            self.words.contains(word)
        } else {
            self.words.contains(&word.to_lowercase())
        }
    }

    pub fn case_sensitive(&self) -> bool {
        self.case_sensitive
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }

    /// Fraction of corpus tokens absent from the vocabulary.
    pub fn oov_rate(&self, corpus: &Corpus) -> Option<f64> {
        let total = corpus.token_count();
        if total == 0 {
            return None;
        }
        let oov = corpus
            .sentences()
            .iter()
            .flat_map(|s| s.words())
            .filter(|w| !self.contains(w))
            .count();
        Some(oov as f64 / total as f64)
    }
}

fn fold(word: &str, case_sensitive: bool) -> String {
    if case_sensitive {
        word.to_string()
    } else {
        word.to_lowercase()
    }
}

pub fn build_word_vocabulary(corpus: &Corpus, case_sensitive: bool) -> Result<WordVocabulary> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(WordVocabulary::from_words(
        corpus.sentences().iter().flat_map(|s| s.words()),
        case_sensitive,
    ))
}

/// Coverage of source-OOV test items by a target-domain training vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapStats {
    pub test_tokens: usize,
    pub oov_types: usize,
    pub oov_tokens: usize,
    pub covered_types: usize,
    pub covered_tokens: usize,
    /// `None` when the test set has no source-OOV tokens.
    pub type_coverage: Option<f64>,
    pub token_coverage: Option<f64>,
}

pub fn vocab_overlap_stats(
    test: &Corpus,
    source_vocab: &WordVocabulary,
    target_train_vocab: &WordVocabulary,
) -> Result<OverlapStats> {
    if test.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut oov: BTreeMap<&str, usize> = BTreeMap::new();
    let mut test_tokens = 0;
    for w in test.sentences().iter().flat_map(|s| s.words()) {
        test_tokens += 1;
        if !source_vocab.contains(w) {
            *oov.entry(w.as_str()).or_default() += 1;
        }
    }
    let oov_tokens: usize = oov.values().sum();
    let (covered_types, covered_tokens) = oov
        .iter()
        .filter(|(w, _)| target_train_vocab.contains(w))
        .fold((0, 0), |(t, n), (_, c)| (t + 1, n + c));
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    Ok(OverlapStats {
        test_tokens,
        oov_types: oov.len(),
        oov_tokens,
        covered_types,
        covered_tokens,
        type_coverage: ratio(covered_types, oov.len()),
        token_coverage: ratio(covered_tokens, oov_tokens),
    })
}

#[cfg(test)]
pub(crate) fn sentence(words: &[&str], tags: Option<&[&str]>, doc: &str) -> Sentence {
    Sentence::new(
        words.iter().map(|w| w.to_string()).collect(),
        tags.map(|t| t.iter().map(|x| x.to_string()).collect()),
        Domain::Source,
        doc,
    )
    .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;

    fn docs_corpus(n_docs: usize) -> Corpus {
        let sentences = (0..n_docs)
            .map(|d| sentence(&["a", "b"], None, &format!("d{d:03}")))
            .collect();
        Corpus::new("docs", sentences)
    }

    #[test]
    fn sentence_rejects_bad_words_and_misaligned_tags() {
        let words = vec!["a".to_string(), "b c".to_string()];
        assert!(Sentence::new(words, None, Domain::Source, "d").is_err());
        let words = vec!["a".to_string()];
        assert!(Sentence::new(words, Some(vec![]), Domain::Source, "d").is_err());
        assert!(Sentence::new(vec![], None, Domain::Source, "d").is_err());
    }

    #[test]
    fn labeled_flag_requires_all_sentences_tagged() {
        let c = Corpus::new(
            "c",
            vec![sentence(&["a"], Some(&["X"]), "d"), sentence(&["b"], None, "d")],
        );
        assert!(!c.labeled());
        let c = Corpus::new("c", vec![sentence(&["a"], Some(&["X"]), "d")]);
        assert!(c.labeled());
    }

    #[test]
    fn split_448_documents_rounds_to_112() {
        let m = split_by_documents(&docs_corpus(448), 0.25, 7).unwrap();
        assert_eq!(m.test_doc_ids.len(), 112);
        assert_eq!(m.train_doc_ids.len(), 336);
        assert_eq!(m.test_token_count, 224);
    }

    #[test]
    fn split_is_deterministic_for_a_seed() {
        let c = docs_corpus(4);
        let a = split_by_documents(&c, 0.25, 3).unwrap();
        let b = split_by_documents(&c, 0.25, 3).unwrap();
        assert_eq!(a.test_doc_ids.len(), 1);
        assert_eq!(a, b);
    }

    #[test]
    fn split_rejects_single_document_and_bad_fraction() {
        assert_eq!(
            split_by_documents(&docs_corpus(1), 0.25, 0),
            Err(Error::TooFewDocuments(1))
        );
        assert!(split_by_documents(&docs_corpus(4), 1.0, 0).is_err());
        assert!(split_by_documents(&docs_corpus(4), 0.0, 0).is_err());
    }

    #[test]
    fn word_vocabulary_case_handling() {
        let c = Corpus::new(
            "c",
            vec![
                sentence(&["The", "cat"], None, "d"),
                sentence(&["the", "dog"], None, "d"),
            ],
        );
        let v = build_word_vocabulary(&c, true).unwrap();
        assert_eq!(v.len(), 4);
        assert!(v.contains("The") && !v.contains("THE"));
        let v = build_word_vocabulary(&c, false).unwrap();
        assert_eq!(v.iter().collect::<Vec<_>>(), vec!["cat", "dog", "the"]);
        assert!(v.contains("THE"));
        assert_eq!(
            build_word_vocabulary(&Corpus::new("e", vec![]), true),
            Err(Error::EmptyCorpus)
        );
    }

    #[test]
    fn overlap_counts_types_and_tokens() {
        let test = Corpus::new("t", vec![sentence(&["a", "b", "b", "c"], None, "d")]);
        let src = WordVocabulary::from_words(["a"], true);
        let tgt = WordVocabulary::from_words(["b"], true);
        let s = vocab_overlap_stats(&test, &src, &tgt).unwrap();
        assert_eq!((s.oov_types, s.oov_tokens), (2, 3));
        assert_eq!(s.type_coverage, Some(0.5));
        assert!((s.token_coverage.unwrap() - 2.0 / 3.0).abs() < 1e-12);

        let all = WordVocabulary::from_words(["b", "c"], true);
        let s = vocab_overlap_stats(&test, &src, &all).unwrap();
        assert_eq!((s.type_coverage, s.token_coverage), (Some(1.0), Some(1.0)));

        let full = WordVocabulary::from_words(["a", "b", "c"], true);
        let s = vocab_overlap_stats(&test, &full, &tgt).unwrap();
        assert_eq!((s.type_coverage, s.token_coverage), (None, None));
    }
}
