use seqadapt::checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, FORMAT_VERSION, MAGIC};
use seqadapt::error::CliError;
use seqadapt_core::corpus::{Corpus, Domain, Sentence};
use seqadapt_core::encoder::EncoderConfig;
use seqadapt_core::mlm::MaskingConfig;
use seqadapt_core::pipelines::{pretrain_general, task_tune, Checkpoint, Objective, StageSchedule};
use seqadapt_core::tagmap::TagInventory;
use seqadapt_core::tokenizer::train_subword_vocab;

fn toy() -> (Checkpoint, Checkpoint) {
    let sents = (0..12)
        .map(|i| {
            let words: Vec<String> = ["the", "dog", "ran", "home"].iter().map(|w| format!("{w}{}", i % 3)).collect();
            let tags = Some(vec!["DT".into(), "NN".into(), "VBD".into(), "NN".into()]);
            Sentence::new(words, tags, Domain::Source, "d").unwrap()
        })
        .collect();
    let corpus = Corpus::new("toy", sents);
    let vocab = train_subword_vocab(&corpus, 40, 1).unwrap();
    let mut cfg = EncoderConfig::desk_scale(vocab.len(), 1);
    cfg.hidden_dim = 8;
    cfg.num_heads = 2;
    cfg.ffn_dim = 16;
    cfg.max_len = 12;
    let pre = StageSchedule::new(Objective::Mlm, "toy", 1, 1e-3, 3);
    let p = pretrain_general(&cfg, &corpus, &vocab, &pre, &MaskingConfig::default()).unwrap();
    let inv = TagInventory::from_corpus(&corpus).unwrap();
    let task = StageSchedule::new(Objective::Tag, "toy", 1, 1e-3, 4);
    let t = task_tune(&p, &corpus, &inv, &vocab, &task).unwrap();
    (p, t)
}

#[test]
fn round_trip_is_exact() {
    let (p, t) = toy();
    for ck in [&p, &t] {
        let bytes = encode_checkpoint(ck);
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), FORMAT_VERSION);
        let back = decode_checkpoint(&bytes).unwrap();
        assert_eq!(&back, ck);
        assert_eq!(encode_checkpoint(&back), bytes);
    }
    let mut no_opt = t.clone();
    no_opt.optimizer = None;
    assert_eq!(decode_checkpoint(&encode_checkpoint(&no_opt)).unwrap(), no_opt);
}

#[test]
fn file_round_trip() {
    let (_, t) = toy();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sub/task-tuned.ckpt");
    write_checkpoint(&path, &t).unwrap();
    assert_eq!(read_checkpoint(&path).unwrap(), t);
}

#[test]
fn corrupt_input_is_rejected() {
    let (p, _) = toy();
    let bytes = encode_checkpoint(&p);
    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    assert!(decode_checkpoint(&bad_magic).is_err());
    let mut bad_version = bytes.clone();
    bad_version[8] = 99;
    assert!(decode_checkpoint(&bad_version).unwrap_err().contains("version"));
    assert!(decode_checkpoint(&bytes[..bytes.len() - 1]).is_err());
    let mut trailing = bytes.clone();
    trailing.push(0);
    assert!(decode_checkpoint(&trailing).unwrap_err().contains("trailing"));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.ckpt");
    std::fs::write(&path, &bad_magic).unwrap();
    assert!(matches!(read_checkpoint(&path), Err(CliError::Checkpoint { .. })));
}
