use proptest::prelude::*;

use seqadapt_core::corpus::{build_word_vocabulary, split_by_documents, Corpus, Domain, Sentence, WordVocabulary};
use seqadapt_core::shift::{apply_shift, generate_shifted_corpus, ShiftRule, ShiftRuleSet};
use seqadapt_core::rng_from_seed;

fn word() -> impl Strategy<Value = String> {
    "[a-zA-Z]{1,9}"
}

fn corpus(max_docs: usize) -> impl Strategy<Value = Corpus> {
    prop::collection::vec(
        (prop::collection::vec((word(), "[A-Z]{1,3}"), 1..8), 0..max_docs),
        1..30,
    )
    .prop_map(|sents| {
        let sentences = sents
            .into_iter()
            .map(|(pairs, doc)| {
                let (w, t): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
                Sentence::new(w, Some(t), Domain::Source, format!("d{doc}")).unwrap()
            })
            .collect();
        Corpus::new("c", sentences)
    })
}

fn rules() -> impl Strategy<Value = ShiftRuleSet> {
    (prop::array::uniform4(0.0f64..=1.0), any::<u64>()).prop_map(|(p, seed)| {
        ShiftRuleSet::new(ShiftRule::ALL.into_iter().zip(p).collect(), seed).unwrap()
    })
}

proptest! {
    #[test]
    fn shift_preserves_structure_and_tags(c in corpus(5), r in rules()) {
        let s = generate_shifted_corpus(&c, &r).unwrap();
        prop_assert_eq!(s.len(), c.len());
        prop_assert_eq!(s.token_count(), c.token_count());
        for (a, b) in c.sentences().iter().zip(s.sentences()) {
            prop_assert_eq!(a.tags(), b.tags());
            prop_assert_eq!(a.len(), b.len());
            prop_assert_eq!(&a.doc_id, &b.doc_id);
            prop_assert_eq!(b.domain, Domain::Target);
        }
    }

    #[test]
    fn shift_is_deterministic_per_seed(c in corpus(5), r in rules()) {
        prop_assert_eq!(generate_shifted_corpus(&c, &r).unwrap(), generate_shifted_corpus(&c, &r).unwrap());
    }

    #[test]
    fn zero_probability_shift_is_identity(w in word(), seed in any::<u64>()) {
        let r = ShiftRuleSet::uniform(0.0, seed).unwrap();
        prop_assert_eq!(apply_shift(&w, &r, &mut rng_from_seed(seed)), w);
    }

    #[test]
    fn split_partitions_documents(c in corpus(12), frac in 0.05f64..0.95, seed in any::<u64>()) {
        let docs: std::collections::BTreeSet<String> = c.doc_ids().into_iter().map(String::from).collect();
        match split_by_documents(&c, frac, seed) {
            Err(_) => prop_assert!(docs.len() < 2),
            Ok(m) => {
                prop_assert!(m.train_doc_ids.is_disjoint(&m.test_doc_ids));
                let union: std::collections::BTreeSet<String> =
                    m.train_doc_ids.union(&m.test_doc_ids).cloned().collect();
                prop_assert_eq!(union, docs);
                prop_assert!(!m.train_doc_ids.is_empty() && !m.test_doc_ids.is_empty());
                prop_assert_eq!(m.train_token_count + m.test_token_count, c.token_count());
                prop_assert_eq!(split_by_documents(&c, frac, seed).unwrap(), m);
            }
        }
    }

    #[test]
    fn oov_rate_is_order_independent(c in corpus(5), vocab_words in prop::collection::vec(word(), 0..20)) {
        let v = WordVocabulary::from_words(vocab_words.iter().map(String::as_str), true);
        let mut reversed: Vec<Sentence> = c.sentences().to_vec();
        reversed.reverse();
        for s in &mut reversed {
            let mut w = s.words().to_vec();
            w.reverse();
            *s = Sentence::new(w, None, Domain::Target, "x").unwrap();
        }
        let r = Corpus::new("r", reversed);
        prop_assert_eq!(v.oov_rate(&c), v.oov_rate(&r));
        for w in c.sentences().iter().flat_map(|s| s.words()) {
            prop_assert_eq!(v.contains(w), vocab_words.contains(w));
        }
    }

    #[test]
    fn vocabulary_covers_its_corpus(c in corpus(5), case_sensitive in any::<bool>()) {
        let v = build_word_vocabulary(&c, case_sensitive).unwrap();
        prop_assert_eq!(v.oov_rate(&c), Some(0.0));
    }
}
