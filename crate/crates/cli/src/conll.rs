//! Token-per-line corpus files: `word[\ttag]`, blank line between sentences,
//! `# doc: <id>` sets the document of the following sentences and other
//! lines starting with `# ` are comments. A bare `#` is a token.

use std::path::Path;

use seqadapt_core::corpus::{Corpus, Domain, Sentence};

use crate::error::{CliError, CliResult};

/// Parses corpus text. `default_doc` is used until a `# doc:` line appears.
pub fn parse_conll(
    text: &str,
    path: &Path,
    name: &str,
    default_doc: &str,
    labeled: bool,
    domain: Domain,
) -> CliResult<Corpus> {
    let err = |line: usize, message: String| CliError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut sentences = Vec::new();
    let mut doc = default_doc.to_string();
    let mut words = Vec::new();
    let mut tags: Vec<Option<String>> = Vec::new();
    let mut start = 0;

    let mut flush = |words: &mut Vec<String>, tags: &mut Vec<Option<String>>, doc: &str, line: usize| {
        if words.is_empty() {
            return Ok(());
        }
        let tags_out = if labeled {
            Some(tags.drain(..).map(|t| t.unwrap_or_default()).collect())
        } else {
            tags.clear();
            None
        };
        let s = Sentence::new(std::mem::take(words), tags_out, domain, doc)
            .map_err(|e| err(line, e.to_string()))?;
        sentences.push(s);
        Ok::<(), CliError>(())
    };

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            flush(&mut words, &mut tags, &doc, start)?;
            continue;
        }
        if let Some(rest) = line.strip_prefix("# ") {
            if let Some(id) = rest.trim_start().strip_prefix("doc:") {
                flush(&mut words, &mut tags, &doc, start)?;
                doc = id.trim().to_string();
                if doc.is_empty() {
                    return Err(err(lineno, "empty document id".into()));
                }
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() > 2 {
            return Err(err(lineno, format!("expected at most 2 tab-separated fields, found {}", fields.len())));
        }
        if words.is_empty() {
            start = lineno;
        }
        let tag = fields.get(1).map(|t| t.trim()).filter(|t| !t.is_empty());
        if labeled && tag.is_none() {
            return Err(err(lineno, format!("token {:?} has no tag", fields[0])));
        }
        words.push(fields[0].trim().to_string());
        tags.push(tag.map(str::to_string));
    }
    flush(&mut words, &mut tags, &doc, start)?;
    Ok(Corpus::new(name, sentences))
}

/// Reads a corpus file; its stem names the corpus and is the default doc id.
pub fn read_conll(path: &Path, labeled: bool, domain: Domain) -> CliResult<Corpus> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("corpus");
    parse_conll(&text, path, stem, stem, labeled, domain)
}

/// Serializes with a `# doc:` line whenever the document changes.
pub fn write_conll_string(corpus: &Corpus) -> String {
    let mut out = String::new();
    let mut doc: Option<&str> = None;
    for s in corpus.sentences() {
        if doc != Some(s.doc_id.as_str()) {
            out.push_str("# doc: ");
            out.push_str(&s.doc_id);
            out.push('\n');
            doc = Some(&s.doc_id);
        }
        for (i, w) in s.words().iter().enumerate() {
            out.push_str(w);
            if let Some(t) = s.tags() {
                out.push('\t');
                out.push_str(&t[i]);
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

pub fn write_conll(path: &Path, corpus: &Corpus) -> CliResult<()> {
    crate::formats::write_text(path, &write_conll_string(corpus))
}
