//! Tagging accuracy with in/out-of-vocabulary strata, span segmentation
//! scores, and stagewise forgetting tables.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::corpus::{Corpus, WordVocabulary};
use crate::encoder::{forward, predict_positions, Head};
use crate::pipelines::Checkpoint;
use crate::tagmap::{with_tag_ids, TagInventory};
use crate::tokenizer::{tokenize_sentence, SubwordVocabulary};
use crate::{rng_from_seed, Error, Result};

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StratumCounts {
    pub total: usize,
    pub correct: usize,
}

impl StratumCounts {
    /// `None` when the stratum is empty.
    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.correct, self.total)
    }

    fn add(&mut self, correct: bool) {
        self.total += 1;
        self.correct += correct as usize;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggingReport {
    pub overall: StratumCounts,
    pub iv: StratumCounts,
    pub oov: StratumCounts,
    /// `(gold, predicted)` pair counts, including agreements.
    pub confusion: BTreeMap<(String, String), usize>,
    /// Surface forms behind each disagreeing pair.
    pub error_words: BTreeMap<(String, String), BTreeMap<String, usize>>,
    pub reference_vocab_name: String,
}

/// One disagreeing `(gold, predicted)` pair with its most frequent words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorPair {
    pub gold: String,
    pub predicted: String,
    pub count: usize,
    pub examples: Vec<(String, usize)>,
}

impl TaggingReport {
    pub fn overall_accuracy(&self) -> Option<f64> {
        self.overall.accuracy()
    }

    pub fn iv_accuracy(&self) -> Option<f64> {
        self.iv.accuracy()
    }

    pub fn oov_accuracy(&self) -> Option<f64> {
        self.oov.accuracy()
    }

    /// The `k` most frequent errors, count descending then pair ascending,
    /// each with up to `examples` words.
    pub fn top_errors(&self, k: usize, examples: usize) -> Vec<ErrorPair> {
        let mut pairs: Vec<_> = self
            .confusion
            .iter()
            .filter(|((g, p), _)| g != p)
            .map(|(pair, &c)| (pair, c))
            .collect();
        pairs.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        pairs
            .into_iter()
            .take(k)
            .map(|(pair, count)| {
                let mut words: Vec<(String, usize)> = self
                    .error_words
                    .get(pair)
                    .map(|m| m.iter().map(|(w, &c)| (w.clone(), c)).collect())
                    .unwrap_or_default();
                words.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                words.truncate(examples);
                ErrorPair {
                    gold: pair.0.clone(),
                    predicted: pair.1.clone(),
                    count,
                    examples: words,
                }
            })
            .collect()
    }
}

/// Token-level accuracy of `pred` against `gold`, split by whether each
/// gold surface form is in `reference`.
pub fn evaluate_tagging(
    pred: &Corpus,
    gold: &Corpus,
    reference: &WordVocabulary,
    reference_name: &str,
) -> Result<TaggingReport> {
    if pred.len() != gold.len() {
        return Err(Error::StructureMismatch {
            sentence: pred.len().min(gold.len()),
            detail: alloc::format!("{} predicted vs {} gold sentences", pred.len(), gold.len()),
        });
    }
    let mut report = TaggingReport {
        overall: StratumCounts::default(),
        iv: StratumCounts::default(),
        oov: StratumCounts::default(),
        confusion: BTreeMap::new(),
        error_words: BTreeMap::new(),
        reference_vocab_name: reference_name.to_string(),
    };
    for (si, (p, g)) in pred.sentences().iter().zip(gold.sentences()).enumerate() {
        if p.words() != g.words() {
            return Err(Error::StructureMismatch {
                sentence: si,
                detail: "word sequences differ".into(),
            });
        }
        let (Some(pt), Some(gt)) = (p.tags(), g.tags()) else {
            return Err(Error::StructureMismatch {
                sentence: si,
                detail: "sentence is untagged".into(),
            });
        };
        for ((w, pt), gt) in g.words().iter().zip(pt).zip(gt) {
            let ok = pt == gt;
            report.overall.add(ok);
            if reference.contains(w) {
                report.iv.add(ok);
            } else {
                report.oov.add(ok);
            }
            let key = (gt.clone(), pt.clone());
            if !ok {
                *report
                    .error_words
                    .entry(key.clone())
                    .or_default()
                    .entry(w.clone())
                    .or_default() += 1;
            }
            *report.confusion.entry(key).or_default() += 1;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bio {
    B,
    I,
    O,
}

/// Drops entity types: `B-X` → B, `I-X` → I, `O` → O.
pub fn strip_entity_types<S: AsRef<str>>(tags: &[S]) -> Result<Vec<Bio>> {
    tags.iter()
        .map(|t| {
            let t = t.as_ref();
            match t {
                "O" => Ok(Bio::O),
                "B" => Ok(Bio::B),
                "I" => Ok(Bio::I),
                _ if t.starts_with("B-") && t.len() > 2 => Ok(Bio::B),
                _ if t.starts_with("I-") && t.len() > 2 => Ok(Bio::I),
                _ => Err(Error::MalformedBio(t.to_string())),
            }
        })
        .collect()
}

/// Half-open word range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

/// Lenient decoding: a span opens at every B and at every I that follows O
/// or the sequence start, and runs through the following I tags.
pub fn bio_decode(tags: &[Bio]) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut open: Option<usize> = None;
    for (i, &t) in tags.iter().enumerate() {
        match t {
            Bio::B => {
                if let Some(s) = open.take() {
                    spans.push(Span { start: s, end: i });
                }
                open = Some(i);
            }
            Bio::I => {
                if open.is_none() {
                    open = Some(i);
                }
            }
            Bio::O => {
                if let Some(s) = open.take() {
                    spans.push(Span { start: s, end: i });
                }
            }
        }
    }
    if let Some(s) = open {
        spans.push(Span {
            start: s,
            end: tags.len(),
        });
    }
    spans
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentationReport {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

/// Harmonic mean `2PR/(P+R)`; `None` when `P + R = 0`.
pub fn f1_score(precision: f64, recall: f64) -> Option<f64> {
    let s = precision + recall;
    (s > 0.0).then(|| 2.0 * precision * recall / s)
}

impl SegmentationReport {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        // 2tp / (2tp + fp + fn) equals 2PR/(P+R) whenever both are defined.
        let f1 = match (precision, recall) {
            (Some(_), Some(_)) => ratio(2 * tp, 2 * tp + fp + fn_),
            _ => None,
        };
        Self {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
        }
    }
}

/// Exact-boundary span matching, micro-averaged over sentences.
pub fn evaluate_segmentation(pred: &[Vec<Span>], gold: &[Vec<Span>]) -> Result<SegmentationReport> {
    if pred.len() != gold.len() {
        return Err(Error::StructureMismatch {
            sentence: pred.len().min(gold.len()),
            detail: alloc::format!("{} predicted vs {} gold sentences", pred.len(), gold.len()),
        });
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (p, g) in pred.iter().zip(gold) {
        let gs: alloc::collections::BTreeSet<&Span> = g.iter().collect();
        let ps: alloc::collections::BTreeSet<&Span> = p.iter().collect();
        let hit = ps.intersection(&gs).count();
        tp += hit;
        fp += ps.len() - hit;
        fn_ += gs.len() - hit;
    }
    Ok(SegmentationReport::from_counts(tp, fp, fn_))
}

/// Spans of every sentence of a BIO-tagged corpus.
pub fn corpus_spans(corpus: &Corpus) -> Result<Vec<Vec<Span>>> {
    corpus
        .sentences()
        .iter()
        .map(|s| {
            let tags = s.tags().ok_or_else(|| Error::Unlabeled(corpus.name.clone()))?;
            Ok(bio_decode(&strip_entity_types(tags)?))
        })
        .collect()
}

/// Words that fell beyond `max_len` and received the fallback tag.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TruncationReport {
    pub sentences_truncated: usize,
    pub words_defaulted: usize,
}

/// Tags every word with the argmax of the tag head at its first piece
/// (lowest tag id on ties). Words cut off by truncation get the
/// checkpoint's fallback tag.
pub fn predict_tags(
    checkpoint: &Checkpoint,
    corpus: &Corpus,
    vocab: &SubwordVocabulary,
    inventory: &TagInventory,
) -> Result<(Corpus, TruncationReport)> {
    let (Some(own), Some(fallback)) = (&checkpoint.tag_inventory, &checkpoint.fallback_tag) else {
        return Err(Error::NoTagHead);
    };
    if own != inventory || checkpoint.params.config.num_tags != inventory.len() {
        return Err(Error::InventoryMismatch);
    }
    let fallback = inventory.id(fallback).ok_or(Error::InventoryMismatch)?;
    let params = &checkpoint.params;
    // Inference draws no random numbers; the RNG only satisfies the signature.
    let mut rng = rng_from_seed(0);
    let mut report = TruncationReport::default();
    let mut out = Vec::with_capacity(corpus.len());
    for s in corpus.sentences() {
        let tok = tokenize_sentence(s, vocab, params.config.max_len)?;
        let enc = forward(params, &tok.piece_ids, false, &mut rng)?;
        let per_piece = predict_positions(params, &enc, Head::Tag);
        let mut ids: Vec<u32> = tok.word_starts().map(|p| per_piece[p]).collect();
        if tok.truncated {
            report.sentences_truncated += 1;
            report.words_defaulted += s.len() - ids.len();
            ids.resize(s.len(), fallback);
        }
        out.push(with_tag_ids(s, &ids, inventory)?);
    }
    Ok((Corpus::new(corpus.name.clone(), out), report))
}

/// Source and target scores of one checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct ForgettingRow {
    pub stage: String,
    pub source: TaggingReport,
    pub target: TaggingReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForgettingReport {
    pub rows: Vec<ForgettingRow>,
}

/// Maps a corpus's tags before scoring (identity, coarsening, ...).
pub type TagTransform<'a> = &'a dyn Fn(&Corpus) -> Result<Corpus>;

/// Scores each `(label, checkpoint)` on both test sets with identical
/// settings; rows follow the given order.
#[allow(clippy::too_many_arguments)]
pub fn forgetting_report(
    checkpoints: &[(String, &Checkpoint)],
    source_test: &Corpus,
    target_test: &Corpus,
    vocab: &SubwordVocabulary,
    inventory: &TagInventory,
    reference: &WordVocabulary,
    reference_name: &str,
    transform: TagTransform<'_>,
) -> Result<ForgettingReport> {
    if checkpoints.len() < 2 {
        return Err(Error::MissingInput("a forgetting report needs at least two checkpoints".into()));
    }
    let score = |ck: &Checkpoint, test: &Corpus| -> Result<TaggingReport> {
        let (pred, _) = predict_tags(ck, test, vocab, inventory)?;
        evaluate_tagging(&transform(&pred)?, &transform(test)?, reference, reference_name)
    };
    let rows = checkpoints
        .iter()
        .map(|(label, ck)| {
            Ok(ForgettingRow {
                stage: label.clone(),
                source: score(ck, source_test)?,
                target: score(ck, target_test)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ForgettingReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::sentence;
    use alloc::vec;

    #[test]
    fn stratified_counting_example() {
        let words = ["a", "b", "c", "d", "e", "f", "g", "h", "i", "j"];
        let gold_tags = ["X"; 10];
        let mut pred_tags = ["X"; 10];
        // OOV words are g..j; two of them wrong
        pred_tags[6] = "Y";
        pred_tags[7] = "Y";
        let gold = Corpus::new("g", vec![sentence(&words, Some(&gold_tags), "d")]);
        let pred = Corpus::new("p", vec![sentence(&words, Some(&pred_tags), "d")]);
        let vocab = WordVocabulary::from_words(["a", "b", "c", "d", "e", "f"], true);
        let r = evaluate_tagging(&pred, &gold, &vocab, "src").unwrap();
        assert_eq!(r.overall_accuracy(), Some(0.8));
        assert_eq!(r.iv_accuracy(), Some(1.0));
        assert_eq!(r.oov_accuracy(), Some(0.5));
        let top = r.top_errors(3, 5);
        assert_eq!(top.len(), 1);
        assert_eq!((top[0].gold.as_str(), top[0].predicted.as_str(), top[0].count), ("X", "Y", 2));
        assert_eq!(top[0].examples, vec![("g".to_string(), 1), ("h".to_string(), 1)]);

        let all_iv = WordVocabulary::from_words(words, true);
        let r = evaluate_tagging(&gold, &gold, &all_iv, "all").unwrap();
        assert_eq!(r.oov_accuracy(), None);
        assert_eq!(r.overall_accuracy(), Some(1.0));
    }

    #[test]
    fn structure_mismatch_is_located() {
        let a = Corpus::new(
            "a",
            vec![sentence(&["x"], Some(&["N"]), "d"), sentence(&["y"], Some(&["N"]), "d")],
        );
        let b = Corpus::new(
            "b",
            vec![sentence(&["x"], Some(&["N"]), "d"), sentence(&["z"], Some(&["N"]), "d")],
        );
        let v = WordVocabulary::from_words(["x"], true);
        match evaluate_tagging(&a, &b, &v, "v") {
            Err(Error::StructureMismatch { sentence, .. }) => assert_eq!(sentence, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bio_examples() {
        use Bio::*;
        assert_eq!(strip_entity_types(&["B-PER", "I-PER", "O"]).unwrap(), vec![B, I, O]);
        assert_eq!(strip_entity_types(&["B-LOC", "I-PER"]).unwrap(), vec![B, I]);
        assert!(strip_entity_types(&["X-PER"]).is_err());
        assert!(strip_entity_types(&["B-"]).is_err());
        assert_eq!(
            bio_decode(&[B, I, O, B]),
            vec![Span { start: 0, end: 2 }, Span { start: 3, end: 4 }]
        );
        assert_eq!(bio_decode(&[O, I, I]), vec![Span { start: 1, end: 3 }]);
        assert_eq!(bio_decode(&[O, O]), vec![]);
        assert_eq!(
            bio_decode(&[B, B, I]),
            vec![Span { start: 0, end: 1 }, Span { start: 1, end: 3 }]
        );
    }

    #[test]
    fn segmentation_counting() {
        let s = |a, b| Span { start: a, end: b };
        let gold = vec![vec![s(0, 1), s(2, 4)], vec![s(0, 2), s(3, 5)]];
        let pred = vec![vec![s(0, 1), s(2, 3)], vec![s(0, 2), s(4, 5)]];
        let r = evaluate_segmentation(&pred, &gold).unwrap();
        assert_eq!((r.tp, r.fp, r.fn_), (2, 2, 2));
        assert_eq!((r.precision, r.recall, r.f1), (Some(0.5), Some(0.5), Some(0.5)));
        let r = evaluate_segmentation(&gold, &gold).unwrap();
        assert_eq!(r.f1, Some(1.0));
        let r = evaluate_segmentation(&[vec![]], &[vec![]]).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (None, None, None));
        assert!(evaluate_segmentation(&[], &gold).is_err());
    }
}
