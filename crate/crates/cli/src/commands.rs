//! Subcommand implementations. Each validates its configuration and checks
//! that its inputs exist before writing anything, and returns the text it
//! prints on success.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use seqadapt_core::corpus::{build_word_vocabulary, Corpus, Domain, WordVocabulary};
use seqadapt_core::eval::{
    corpus_spans, evaluate_segmentation, evaluate_tagging, predict_tags, ForgettingReport, ForgettingRow,
    TaggingReport,
};
use seqadapt_core::mlm::MaskAction;
use seqadapt_core::pipelines::{
    domain_masked_dataset, pretrain_general, run_variant, Checkpoint, Variant, VariantInputs, VariantSchedules,
};
use seqadapt_core::synthetic::generate_benchmark;
use seqadapt_core::tagmap::{apply_mapping, coarsen_corpus, MappingTable, TagInventory};
use seqadapt_core::tokenizer::{train_subword_vocab, SubwordVocabulary};

use crate::checkpoint::{read_checkpoint, write_checkpoint};
use crate::config::{require_inputs, ExperimentConfig};
use crate::conll::{read_conll, write_conll};
use crate::error::{CliError, CliResult};
use crate::formats::{
    manifest_to_string, read_mapping, read_tag_inventory, read_vocab, tag_inventory_to_string, vocab_to_string,
    write_text,
};
use crate::provenance::provenance_to_string;
use crate::report::{
    confusion_record, examples_cell, forgetting_record, json_line, pct, segmentation_record, tagging_record, Table,
};

/// Placeholder tag count of a pretrained checkpoint; task tuning installs a
/// head sized to the real inventory.
const PRETRAIN_TAGS: usize = 1;

fn target_labeled_default(cfg: &ExperimentConfig) -> PathBuf {
    cfg.target_labeled_path()
        .unwrap_or_else(|| cfg.data_dir().join("target_train_labeled.conll"))
}

pub fn generate_synthetic(cfg: &ExperimentConfig) -> CliResult<String> {
    let synth = cfg.synthetic_config()?;
    let b = generate_benchmark(&synth)?;
    let mut tags: BTreeSet<String> = BTreeSet::new();
    for c in [&b.source_train, &b.source_test, &b.target_train, &b.target_test] {
        tags.extend(TagInventory::from_corpus(c)?.tags().iter().cloned());
    }
    let inventory = TagInventory::new(tags.into_iter().collect())?;

    write_conll(&cfg.general_path(), &b.general)?;
    write_conll(&cfg.source_train_path(), &b.source_train)?;
    write_conll(&cfg.source_test_path(), &b.source_test)?;
    write_conll(&cfg.target_unlabeled_path(), &b.target_train.unlabeled())?;
    write_conll(&target_labeled_default(cfg), &b.target_train)?;
    write_conll(&cfg.target_test_path(), &b.target_test)?;
    let dir = cfg.data_dir();
    write_text(&dir.join("source.manifest"), &manifest_to_string(&b.source_split))?;
    write_text(&dir.join("target.manifest"), &manifest_to_string(&b.target_split))?;
    write_text(&cfg.tags_path(), &tag_inventory_to_string(&inventory))?;

    let reference = build_word_vocabulary(&b.source_train, cfg.eval.case_sensitive)?;
    let mut t = Table::new(["corpus", "sentences", "tokens", "oov rate vs source train"]);
    for c in [&b.general, &b.source_train, &b.source_test, &b.target_train, &b.target_test] {
        t.row([
            c.name.clone(),
            c.len().to_string(),
            c.token_count().to_string(),
            pct(reference.oov_rate(c)),
        ]);
    }
    Ok(format!(
        "grammar seed {} shift seed {}\n{}",
        synth.grammar_seed,
        synth.shift_seed,
        t.render()
    ))
}

pub fn build_vocab(cfg: &ExperimentConfig) -> CliResult<String> {
    cfg.validate_vocab()?;
    let general = cfg.general_path();
    require_inputs([("general corpus", general.as_path())])?;
    let corpus = read_conll(&general, false, Domain::Source)?;
    let vocab = train_subword_vocab(&corpus, cfg.vocab.size, cfg.vocab.min_frequency)?;
    let path = cfg.vocab_path();
    write_text(&path, &vocab_to_string(&vocab))?;
    Ok(format!("wrote {} pieces to {}\n", vocab.len(), path.display()))
}

fn write_stage(dir: &Path, ck: &Checkpoint) -> CliResult<PathBuf> {
    let path = dir.join(format!("{}.ckpt", ck.stage));
    write_checkpoint(&path, ck)?;
    write_text(
        &dir.join(format!("{}.provenance.json", ck.stage)),
        &provenance_to_string(&ck.provenance),
    )?;
    Ok(path)
}

fn loss_summary(ck: &Checkpoint) -> String {
    let r = ck.provenance.last().expect("trained checkpoints carry provenance");
    let last = r.epoch_losses.last().copied().unwrap_or(f64::NAN);
    format!("{} steps, loss {:.4} -> {:.4}", r.steps, r.initial_loss, last)
}

pub fn pretrain(cfg: &ExperimentConfig) -> CliResult<String> {
    let schedule = cfg.pretrain_schedule()?;
    let masking = cfg.masking_config()?;
    cfg.encoder_config(1, PRETRAIN_TAGS)?;
    let (general, vocab_path) = (cfg.general_path(), cfg.vocab_path());
    require_inputs([("general corpus", general.as_path()), ("vocabulary", vocab_path.as_path())])?;
    let vocab = read_vocab(&vocab_path)?;
    let encoder = cfg.encoder_config(vocab.len(), PRETRAIN_TAGS)?;
    let corpus = read_conll(&general, false, Domain::Source)?;
    let ck = pretrain_general(&encoder, &corpus, &vocab, &schedule, &masking)?;
    let path = write_stage(&cfg.out_dir(), &ck)?;
    Ok(format!("{}: {}\n", path.display(), loss_summary(&ck)))
}

pub fn run(cfg: &ExperimentConfig, variant: Option<Variant>) -> CliResult<String> {
    let variant = match variant {
        Some(v) => v,
        None => cfg
            .variant()?
            .ok_or_else(|| CliError::Config("no variant given on the command line or in the config".into()))?,
    };
    let pretrain = cfg.pretrain_schedule()?;
    let domain = cfg.domain_schedule()?;
    let task = cfg.task_schedule()?;
    let masking = cfg.masking_config()?;
    cfg.encoder_config(1, PRETRAIN_TAGS)?;

    let vocab_path = cfg.vocab_path();
    let tags_path = cfg.tags_path();
    let pretrained_path = cfg.pretrained_path();
    let general = cfg.general_path();
    let source_train = cfg.source_train_path();
    let target_unlabeled = cfg.target_unlabeled_path();
    let mut inputs: Vec<(&str, &Path)> = vec![("vocabulary", &vocab_path), ("tag list", &tags_path)];
    match &pretrained_path {
        Some(p) => inputs.push(("pretrained checkpoint", p)),
        None => inputs.push(("general corpus", &general)),
    }
    let target_labeled = cfg.target_labeled_path();
    match variant {
        Variant::Frozen | Variant::TaskTuned => inputs.push(("source training corpus", &source_train)),
        Variant::AdaptaBert => {
            inputs.push(("source training corpus", &source_train));
            inputs.push(("unlabeled target corpus", &target_unlabeled));
            inputs.push(("general corpus", &general));
        }
        Variant::Supervised => match &target_labeled {
            Some(p) => inputs.push(("labeled target corpus", p)),
            None => {
                return Err(CliError::Config(
                    "variant supervised needs paths.target_labeled".into(),
                ))
            }
        },
    }
    require_inputs(inputs)?;

    let vocab = read_vocab(&vocab_path)?;
    let inventory = read_tag_inventory(&tags_path)?;
    let encoder = cfg.encoder_config(vocab.len(), PRETRAIN_TAGS)?;
    let pretrained = pretrained_path.as_deref().map(read_checkpoint).transpose()?;
    let needs_general = pretrained.is_none() || variant == Variant::AdaptaBert;
    let general_c = needs_general
        .then(|| read_conll(&general, false, Domain::Source))
        .transpose()?;
    let source_c = matches!(variant, Variant::Frozen | Variant::TaskTuned | Variant::AdaptaBert)
        .then(|| read_conll(&source_train, true, Domain::Source))
        .transpose()?;
    let target_u = (variant == Variant::AdaptaBert)
        .then(|| read_conll(&target_unlabeled, false, Domain::Target))
        .transpose()?;
    let target_l = match (variant, &target_labeled) {
        (Variant::Supervised, Some(p)) => Some(read_conll(p, true, Domain::Target)?),
        _ => None,
    };
    let inputs = VariantInputs {
        vocab: &vocab,
        inventory: &inventory,
        pretrained: pretrained.as_ref(),
        general: general_c.as_ref(),
        source_labeled: source_c.as_ref(),
        source_unlabeled: general_c.as_ref(),
        target_unlabeled: target_u.as_ref(),
        target_labeled: target_l.as_ref(),
    };
    let schedules = VariantSchedules {
        encoder,
        masking,
        pretrain,
        domain,
        task,
    };
    let result = run_variant(variant, &inputs, &schedules)?;
    let dir = cfg.out_dir().join(variant.as_str());
    let mut out = String::new();
    for ck in &result.checkpoints {
        let path = write_stage(&dir, ck)?;
        writeln!(out, "{}: {}", path.display(), loss_summary(ck)).unwrap();
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    Tagging,
    Segmentation,
}

#[derive(Debug, Clone)]
pub struct EvaluateArgs {
    pub checkpoints: Vec<PathBuf>,
    pub mode: EvalMode,
    pub coarse: bool,
    pub emit_confusion: bool,
    pub strict_mapping: bool,
    pub label: String,
}

/// `<parent dir>/<file stem>`, stable across output roots.
fn checkpoint_label(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("checkpoint");
    match path.parent().and_then(|p| p.file_name()).and_then(|s| s.to_str()) {
        Some(parent) => format!("{parent}/{stem}"),
        None => stem.to_string(),
    }
}

struct Scorer<'a> {
    vocab: &'a SubwordVocabulary,
    mapping: Option<&'a MappingTable>,
    strict: bool,
    coarse: bool,
}

impl Scorer<'_> {
    /// Predictions and gold, both ready for scoring, plus the truncation
    /// counts and any tags the mapping let through unchanged.
    fn predict(&self, ck: &Checkpoint, test: &Corpus) -> CliResult<(Corpus, Corpus, seqadapt_core::eval::TruncationReport, usize)> {
        let inventory = ck.tag_inventory.as_ref().ok_or(seqadapt_core::Error::NoTagHead)?;
        let (mut pred, trunc) = predict_tags(ck, test, self.vocab, inventory)?;
        let mut unmapped = 0;
        if let Some(table) = self.mapping {
            let (mapped, report) = apply_mapping(&pred, table, self.strict)?;
            pred = mapped;
            unmapped = report.unmapped_tokens();
        }
        let mut gold = test.clone();
        if self.coarse {
            pred = coarsen_corpus(&pred)?;
            gold = coarsen_corpus(&gold)?;
        }
        Ok((pred, gold, trunc, unmapped))
    }
}

pub fn evaluate(cfg: &ExperimentConfig, args: &EvaluateArgs) -> CliResult<String> {
    cfg.validate_eval()?;
    if args.checkpoints.is_empty() {
        return Err(CliError::Config("evaluate needs at least one checkpoint".into()));
    }
    if args.coarse && args.mode == EvalMode::Segmentation {
        return Err(CliError::Config("--coarse applies to tagging mode only".into()));
    }
    if args.label.is_empty() || args.label.contains(['/', '\\']) {
        return Err(CliError::Config(format!("invalid report label {:?}", args.label)));
    }
    let vocab_path = cfg.vocab_path();
    let source_train = cfg.source_train_path();
    let target_test = cfg.target_test_path();
    let source_test = cfg.source_test_path();
    let mapping_path = cfg.mapping_path();
    let mut inputs: Vec<(&str, &Path)> = vec![("vocabulary", &vocab_path), ("target test corpus", &target_test)];
    if args.mode == EvalMode::Tagging {
        inputs.push(("source training corpus", &source_train));
    }
    // The source test set is optional unless named explicitly.
    let use_source_test = cfg.paths.source_test.is_some() || source_test.exists();
    if use_source_test {
        inputs.push(("source test corpus", &source_test));
    }
    if let Some(p) = &mapping_path {
        inputs.push(("tag mapping", p));
    }
    for c in &args.checkpoints {
        inputs.push(("checkpoint", c));
    }
    require_inputs(inputs)?;

    let vocab = read_vocab(&vocab_path)?;
    let mapping = mapping_path.as_deref().map(read_mapping).transpose()?;
    let mut tests = vec![("target_test", read_conll(&target_test, true, Domain::Target)?)];
    if use_source_test {
        tests.push(("source_test", read_conll(&source_test, true, Domain::Source)?));
    }
    let checkpoints = args
        .checkpoints
        .iter()
        .map(|p| Ok((checkpoint_label(p), read_checkpoint(p)?)))
        .collect::<CliResult<Vec<_>>>()?;
    let scorer = Scorer {
        vocab: &vocab,
        mapping: mapping.as_ref(),
        strict: args.strict_mapping,
        coarse: args.coarse,
    };

    let mut text = String::new();
    let mut jsonl = String::new();
    let mut confusion = String::new();
    match args.mode {
        EvalMode::Tagging => {
            let reference = build_word_vocabulary(
                &read_conll(&source_train, true, Domain::Source)?,
                cfg.eval.case_sensitive,
            )?;
            tagging_reports(
                cfg,
                args,
                &checkpoints,
                &tests,
                &scorer,
                &reference,
                (&mut text, &mut jsonl, &mut confusion),
            )?;
        }
        EvalMode::Segmentation => {
            let mut t = Table::new(["checkpoint", "test set", "gold spans", "tp", "fp", "fn", "precision", "recall", "f1"]);
            for (label, ck) in &checkpoints {
                for (set, test) in &tests {
                    let (pred, gold, _, _) = scorer.predict(ck, test)?;
                    let r = evaluate_segmentation(&corpus_spans(&pred)?, &corpus_spans(&gold)?)?;
                    t.row([
                        label.clone(),
                        set.to_string(),
                        (r.tp + r.fn_).to_string(),
                        r.tp.to_string(),
                        r.fp.to_string(),
                        r.fn_.to_string(),
                        pct(r.precision),
                        pct(r.recall),
                        pct(r.f1),
                    ]);
                    jsonl.push_str(&json_line(&segmentation_record(label, ck.stage.as_str(), set, &r)));
                }
            }
            text.push_str("span segmentation (exact boundaries, entity types stripped)\n");
            text.push_str(&t.render());
        }
    }

    let dir = cfg.out_dir().join("reports");
    write_text(&dir.join(format!("{}.txt", args.label)), &text)?;
    write_text(&dir.join(format!("{}.jsonl", args.label)), &jsonl)?;
    if args.emit_confusion {
        write_text(&dir.join(format!("{}.confusion.txt", args.label)), &confusion)?;
    }
    Ok(text)
}

type Sinks<'a> = (&'a mut String, &'a mut String, &'a mut String);

fn tagging_reports(
    cfg: &ExperimentConfig,
    args: &EvaluateArgs,
    checkpoints: &[(String, Checkpoint)],
    tests: &[(&str, Corpus)],
    scorer: &Scorer<'_>,
    reference: &WordVocabulary,
    (text, jsonl, confusion): Sinks<'_>,
) -> CliResult<()> {
    let mut t = Table::new([
        "checkpoint",
        "test set",
        "tokens",
        "overall",
        "iv",
        "oov",
        "oov tokens",
        "truncated",
        "unmapped",
    ]);
    let mut per_ck: Vec<Vec<(String, TaggingReport)>> = Vec::new();
    for (label, ck) in checkpoints {
        let mut reports = Vec::new();
        for (set, test) in tests {
            let (pred, gold, trunc, unmapped) = scorer.predict(ck, test)?;
            let r = evaluate_tagging(&pred, &gold, reference, "source_train")?;
            t.row([
                label.clone(),
                set.to_string(),
                r.overall.total.to_string(),
                pct(r.overall_accuracy()),
                pct(r.iv_accuracy()),
                pct(r.oov_accuracy()),
                r.oov.total.to_string(),
                trunc.words_defaulted.to_string(),
                unmapped.to_string(),
            ]);
            jsonl.push_str(&json_line(&tagging_record(label, ck.stage.as_str(), set, args.coarse, &r, &trunc)));
            reports.push((set.to_string(), r));
        }
        per_ck.push(reports);
    }
    writeln!(
        text,
        "tagging accuracy ({} tags; iv/oov against source_train)",
        if args.coarse { "coarse" } else { "fine" }
    )
    .unwrap();
    text.push_str(&t.render());

    if checkpoints.len() >= 2 && tests.len() == 2 {
        let report = ForgettingReport {
            rows: checkpoints
                .iter()
                .zip(&per_ck)
                .map(|((label, _), r)| ForgettingRow {
                    stage: label.clone(),
                    target: r[0].1.clone(),
                    source: r[1].1.clone(),
                })
                .collect(),
        };
        let mut f = Table::new(["checkpoint", "stage", "source test", "target test"]);
        for (row, (_, ck)) in report.rows.iter().zip(checkpoints) {
            let (s, tg) = (row.source.overall_accuracy(), row.target.overall_accuracy());
            f.row([row.stage.clone(), ck.stage.to_string(), pct(s), pct(tg)]);
            jsonl.push_str(&json_line(&forgetting_record(&row.stage, ck.stage.as_str(), s, tg)));
        }
        text.push_str("\nforgetting (overall accuracy per checkpoint)\n");
        text.push_str(&f.render());
    }

    if args.emit_confusion {
        for ((label, _), reports) in checkpoints.iter().zip(&per_ck) {
            for (set, r) in reports {
                let mut c = Table::new(["gold", "predicted", "count", "examples"]);
                for e in r.top_errors(cfg.eval.top_k, cfg.eval.examples) {
                    c.row([e.gold.clone(), e.predicted.clone(), e.count.to_string(), examples_cell(&e)]);
                    jsonl.push_str(&json_line(&confusion_record(label, set, &e)));
                }
                writeln!(confusion, "{label} on {set}: top {} errors", cfg.eval.top_k).unwrap();
                confusion.push_str(&c.render());
                confusion.push('\n');
            }
        }
    }
    Ok(())
}

pub fn mask_preview(cfg: &ExperimentConfig, limit: usize) -> CliResult<String> {
    let schedule = cfg.domain_schedule()?;
    let masking = cfg.masking_config()?;
    cfg.encoder_config(1, PRETRAIN_TAGS)?;
    let (vocab_path, target, general) = (cfg.vocab_path(), cfg.target_unlabeled_path(), cfg.general_path());
    require_inputs([
        ("vocabulary", vocab_path.as_path()),
        ("unlabeled target corpus", target.as_path()),
        ("general corpus", general.as_path()),
    ])?;
    let vocab = read_vocab(&vocab_path)?;
    let target_c = read_conll(&target, false, Domain::Target)?;
    let general_c = read_conll(&general, false, Domain::Source)?;
    let (mixed, dataset) = domain_masked_dataset(
        &target_c,
        &general_c,
        &vocab,
        cfg.encoder.max_len,
        schedule.seed,
        &masking,
    )?;
    let piece = |id: u32| vocab.piece(id).unwrap_or("?").to_string();
    let mut out = format!(
        "mixed set: {} target + {} source instances; {} masked instances\n",
        mixed.target_count,
        mixed.source_count,
        dataset.len()
    );
    for m in dataset.iter().take(limit) {
        let domain = mixed.instances[m.source_instance_ref].domain;
        writeln!(out, "\ninstance {} ({domain}) masking {}", m.source_instance_ref, m.masking_index).unwrap();
        let mut t = Table::new(["position", "original", "input", "action"]);
        for p in m.masked_positions() {
            let action = match m.actions[p] {
                Some(MaskAction::Mask) => "mask",
                Some(MaskAction::Random) => "random",
                Some(MaskAction::Keep) => "keep",
                None => "-",
            };
            t.row([p.to_string(), piece(m.targets[p].unwrap_or(0)), piece(m.input_ids[p]), action.to_string()]);
        }
        out.push_str(&t.render());
    }
    write_text(&cfg.out_dir().join("mask-preview.txt"), &out)?;
    Ok(out)
}
