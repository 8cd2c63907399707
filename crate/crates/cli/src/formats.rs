//! Small plain-text formats: split manifests, vocabularies, tag lists and
//! mapping tables.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use seqadapt_core::corpus::SplitManifest;
use seqadapt_core::tagmap::{MappingTable, TagInventory};
use seqadapt_core::tokenizer::SubwordVocabulary;

use crate::error::{CliError, CliResult};

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> CliError {
    CliError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// `[train]` and `[test]` sections, one document id per line, followed by
/// token counts as `# tokens: <train> <test>`.
pub fn manifest_to_string(m: &SplitManifest) -> String {
    let mut s = format!("# tokens: {} {}\n[train]\n", m.train_token_count, m.test_token_count);
    for d in &m.train_doc_ids {
        s.push_str(d);
        s.push('\n');
    }
    s.push_str("[test]\n");
    for d in &m.test_doc_ids {
        s.push_str(d);
        s.push('\n');
    }
    s
}

pub fn parse_manifest(text: &str, path: &Path) -> CliResult<SplitManifest> {
    let mut train = BTreeSet::new();
    let mut test = BTreeSet::new();
    let mut counts = (0, 0);
    let mut section: Option<bool> = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("# tokens:") {
            let nums: Vec<usize> = rest.split_whitespace().filter_map(|x| x.parse().ok()).collect();
            if nums.len() != 2 {
                return Err(parse_error(path, i + 1, "expected two token counts"));
            }
            counts = (nums[0], nums[1]);
            continue;
        }
        match line {
            "" => {}
            _ if line.starts_with('#') => {}
            "[train]" => section = Some(true),
            "[test]" => section = Some(false),
            id => match section {
                Some(true) => {
                    train.insert(id.to_string());
                }
                Some(false) => {
                    test.insert(id.to_string());
                }
                None => return Err(parse_error(path, i + 1, "document id outside a section")),
            },
        }
    }
    if let Some(d) = train.intersection(&test).next() {
        return Err(parse_error(path, 0, format!("document {d:?} is in both sections")));
    }
    Ok(SplitManifest {
        train_doc_ids: train,
        test_doc_ids: test,
        train_token_count: counts.0,
        test_token_count: counts.1,
    })
}

/// One piece per line; the line number (from 0) is the id.
pub fn vocab_to_string(v: &SubwordVocabulary) -> String {
    let mut s = String::new();
    for p in v.pieces() {
        s.push_str(p);
        s.push('\n');
    }
    s
}

pub fn read_vocab(path: &Path) -> CliResult<SubwordVocabulary> {
    let text = read_text(path)?;
    let pieces: Vec<String> = text.lines().map(str::to_string).collect();
    Ok(SubwordVocabulary::from_pieces(pieces)?)
}

/// One tag per line; `#` comments and blank lines skipped.
pub fn parse_tag_list(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

pub fn read_tag_inventory(path: &Path) -> CliResult<TagInventory> {
    Ok(TagInventory::new(parse_tag_list(&read_text(path)?))?)
}

pub fn tag_inventory_to_string(inv: &TagInventory) -> String {
    inv.tags().iter().map(|t| format!("{t}\n")).collect()
}

/// `SOURCE<TAB>TARGET` per line with `#` comments.
pub fn parse_mapping(text: &str, path: &Path, name: &str) -> CliResult<MappingTable> {
    let mut entries = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let l = line.trim_end_matches('\r');
        if l.trim().is_empty() || l.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = l.split('\t').collect();
        if fields.len() != 2 || fields.iter().any(|f| f.trim().is_empty()) {
            return Err(parse_error(path, i + 1, "expected SOURCE<TAB>TARGET"));
        }
        let (src, tgt) = (fields[0].trim().to_string(), fields[1].trim().to_string());
        if entries.insert(src.clone(), tgt).is_some() {
            return Err(parse_error(path, i + 1, format!("tag {src:?} mapped twice")));
        }
    }
    Ok(MappingTable::new(name, entries)?)
}

pub fn read_mapping(path: &Path) -> CliResult<MappingTable> {
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("mapping");
    parse_mapping(&read_text(path)?, path, name)
}
