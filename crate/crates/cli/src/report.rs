//! Report rendering: aligned plain-text tables and JSON lines.

use serde_json::{json, Value};

use seqadapt_core::eval::{ErrorPair, SegmentationReport, TaggingReport, TruncationReport};

/// Text table; numeric columns are right-aligned, the rest left-aligned.
#[derive(Debug, Clone, Default)]
pub struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        Self {
            headers: headers.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row<S: Into<String>>(&mut self, cells: impl IntoIterator<Item = S>) {
        self.rows.push(cells.into_iter().map(Into::into).collect());
    }

    pub fn render(&self) -> String {
        let n = self.headers.len();
        let mut width: Vec<usize> = self.headers.iter().map(|h| h.chars().count()).collect();
        for r in &self.rows {
            for (i, c) in r.iter().enumerate().take(n) {
                width[i] = width[i].max(c.chars().count());
            }
        }
        let numeric: Vec<bool> = (0..n)
            .map(|i| {
                i > 0
                    && self.rows.iter().all(|r| {
                        r.get(i).is_none_or(|c| c == "-" || c.parse::<f64>().is_ok())
                    })
            })
            .collect();
        let line = |cells: &[String]| {
            let parts: Vec<String> = (0..n)
                .map(|i| {
                    let c = cells.get(i).map_or("", String::as_str);
                    if numeric[i] {
                        format!("{c:>w$}", w = width[i])
                    } else {
                        format!("{c:<w$}", w = width[i])
                    }
                })
                .collect();
            let mut s = parts.join("  ").trim_end().to_string();
            s.push('\n');
            s
        };
        let mut out = line(&self.headers);
        let rule: Vec<String> = width.iter().map(|w| "-".repeat(*w)).collect();
        out.push_str(&line(&rule));
        for r in &self.rows {
            out.push_str(&line(r));
        }
        out
    }
}

/// Four-decimal rendering, `-` when undefined.
pub fn pct(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

pub fn json_line(v: &Value) -> String {
    let mut s = serde_json::to_string(v).expect("report serializes");
    s.push('\n');
    s
}

pub fn tagging_record(
    checkpoint: &str,
    stage: &str,
    test_set: &str,
    coarse: bool,
    r: &TaggingReport,
    t: &TruncationReport,
) -> Value {
    json!({
        "record": "tagging",
        "checkpoint": checkpoint,
        "stage": stage,
        "test_set": test_set,
        "coarse": coarse,
        "reference": r.reference_vocab_name,
        "tokens": r.overall.total,
        "correct": r.overall.correct,
        "overall": r.overall_accuracy(),
        "iv_tokens": r.iv.total,
        "iv": r.iv_accuracy(),
        "oov_tokens": r.oov.total,
        "oov": r.oov_accuracy(),
        "sentences_truncated": t.sentences_truncated,
        "words_defaulted": t.words_defaulted,
    })
}

pub fn segmentation_record(checkpoint: &str, stage: &str, test_set: &str, r: &SegmentationReport) -> Value {
    json!({
        "record": "segmentation",
        "checkpoint": checkpoint,
        "stage": stage,
        "test_set": test_set,
        "tp": r.tp,
        "fp": r.fp,
        "fn": r.fn_,
        "precision": r.precision,
        "recall": r.recall,
        "f1": r.f1,
    })
}

pub fn forgetting_record(checkpoint: &str, stage: &str, source: Option<f64>, target: Option<f64>) -> Value {
    json!({
        "record": "forgetting",
        "checkpoint": checkpoint,
        "stage": stage,
        "source": source,
        "target": target,
    })
}

pub fn confusion_record(checkpoint: &str, test_set: &str, e: &ErrorPair) -> Value {
    json!({
        "record": "confusion",
        "checkpoint": checkpoint,
        "test_set": test_set,
        "gold": e.gold,
        "predicted": e.predicted,
        "count": e.count,
        "examples": e.examples.iter().map(|(w, n)| json!({"word": w, "count": n})).collect::<Vec<_>>(),
    })
}

/// `word×n` list for the text confusion table.
pub fn examples_cell(e: &ErrorPair) -> String {
    e.examples
        .iter()
        .map(|(w, n)| format!("{w}×{n}"))
        .collect::<Vec<_>>()
        .join(", ")
}
