use std::collections::BTreeMap;

use proptest::prelude::*;

use seqadapt_core::corpus::{Corpus, Domain, Sentence};
use seqadapt_core::mlm::{
    apply_mask_actions, build_masked_dataset, mask_count, mix_domain_corpus, select_mask_positions, ActionProbs,
    MaskAction, MaskingConfig,
};
use seqadapt_core::rng_from_seed;
use seqadapt_core::tokenizer::{is_special, tokenize_corpus, train_subword_vocab, SubwordVocabulary, TokenizedSentence};

fn vocab() -> SubwordVocabulary {
    let s = Sentence::new(
        ["alpha", "beta", "gamma", "delta", "kappa", "omega"].map(String::from).to_vec(),
        None,
        Domain::Source,
        "d",
    )
    .unwrap();
    train_subword_vocab(&Corpus::new("v", vec![s]), 40, 1).unwrap()
}

fn instances(words: &[Vec<String>], vocab: &SubwordVocabulary, domain: Domain) -> Vec<TokenizedSentence> {
    let c = Corpus::new(
        "c",
        words
            .iter()
            .map(|w| Sentence::new(w.clone(), None, domain, "d").unwrap())
            .collect(),
    );
    tokenize_corpus(&c, vocab, 64).unwrap()
}

fn sentences(max: usize) -> impl Strategy<Value = Vec<Vec<String>>> {
    prop::collection::vec(prop::collection::vec("[abdeghklmopt]{1,7}", 1..12), 1..max)
}

proptest! {
    #[test]
    fn masked_count_and_specials(words in sentences(6), seed in any::<u64>(), rate in 0.01f64..0.99) {
        let v = vocab();
        let mut rng = rng_from_seed(seed);
        for inst in instances(&words, &v, Domain::Target) {
            let n = inst.maskable_positions().count();
            let pos = select_mask_positions(&inst, rate, &mut rng).unwrap();
            prop_assert_eq!(pos.len(), mask_count(rate, n));
            prop_assert_eq!(pos.len(), ((rate * n as f64).round() as usize).max(1));
            let m = apply_mask_actions(&inst, &pos, &v, &ActionProbs::default(), &mut rng);
            for (p, &orig) in inst.piece_ids.iter().enumerate() {
                let selected = m.targets[p].is_some();
                prop_assert!(!(selected && is_special(orig)));
                if selected {
                    prop_assert_eq!(m.targets[p], Some(orig));
                } else {
                    prop_assert_eq!(m.input_ids[p], orig);
                    prop_assert!(m.actions[p].is_none());
                }
                if m.actions[p] == Some(MaskAction::Keep) {
                    prop_assert_eq!(m.input_ids[p], orig);
                }
                if m.actions[p] == Some(MaskAction::Random) {
                    prop_assert!(!is_special(m.input_ids[p]));
                }
            }
        }
    }

    #[test]
    fn dataset_groups(words in sentences(8), k in 1usize..12, seed in any::<u64>()) {
        let v = vocab();
        let t = instances(&words, &v, Domain::Target);
        let mixed = mix_domain_corpus(&t, &[], 0).unwrap();
        let cfg = MaskingConfig { maskings_per_instance: k, ..MaskingConfig::default() };
        let ds = build_masked_dataset(&mixed, &cfg, &v, seed).unwrap();
        prop_assert_eq!(ds.len(), k * mixed.instances.len());
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for m in &ds {
            groups.entry(m.source_instance_ref).or_default().push(m.masking_index);
        }
        prop_assert_eq!(groups.len(), mixed.instances.len());
        for idx in groups.values() {
            let mut idx = idx.clone();
            idx.sort_unstable();
            prop_assert_eq!(idx, (0..k).collect::<Vec<_>>());
        }
        prop_assert_eq!(build_masked_dataset(&mixed, &cfg, &v, seed).unwrap(), ds);
    }

    #[test]
    fn mixing_takes_equal_amount_or_whole_pool(nt in 1usize..40, ns in 0usize..80, seed in any::<u64>()) {
        let v = vocab();
        let tw: Vec<Vec<String>> = (0..nt).map(|i| vec![format!("t{i}")]).collect();
        let sw: Vec<Vec<String>> = (0..ns).map(|i| vec![format!("s{i}")]).collect();
        let t = instances(&tw, &v, Domain::Source);
        let s = instances(&sw, &v, Domain::Source);
        let m = mix_domain_corpus(&t, &s, seed).unwrap();
        prop_assert_eq!(m.target_count, nt);
        prop_assert_eq!(m.source_count, nt.min(ns));
        prop_assert_eq!(m.instances.len(), nt + nt.min(ns));
        prop_assert!(m.instances[..nt].iter().all(|i| i.domain == Domain::Target));
        prop_assert!(m.instances[nt..].iter().all(|i| i.domain == Domain::Source));
        if ns <= nt {
            prop_assert_eq!(&m.instances[nt..].iter().map(|i| &i.piece_ids).collect::<Vec<_>>(), &s.iter().map(|i| &i.piece_ids).collect::<Vec<_>>());
        }
        prop_assert_eq!(mix_domain_corpus(&t, &s, seed).unwrap(), m);
    }
}

#[test]
fn degenerate_action_distributions() {
    let v = vocab();
    let inst = &instances(&[vec!["alpha".into(), "beta".into(), "gamma".into()]], &v, Domain::Source)[0];
    let pos: Vec<usize> = inst.maskable_positions().collect();
    let mut rng = rng_from_seed(1);
    let all_mask = apply_mask_actions(inst, &pos, &v, &ActionProbs::new(1.0, 0.0, 0.0).unwrap(), &mut rng);
    assert!(pos.iter().all(|&p| all_mask.input_ids[p] == 4));
    let keep = apply_mask_actions(inst, &pos, &v, &ActionProbs::new(0.0, 0.0, 1.0).unwrap(), &mut rng);
    assert_eq!(keep.input_ids, inst.piece_ids);
    assert!(pos.iter().all(|&p| keep.targets[p] == Some(inst.piece_ids[p])));
}

#[test]
fn mixing_rejects_empty_target() {
    assert!(mix_domain_corpus(&[], &[], 0).is_err());
}
