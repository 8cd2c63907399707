//! Tag inventories, first-letter coarsening and tag-to-tag mapping tables.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::corpus::{Corpus, Sentence};
use crate::{Error, Result};

/// Ordered tag set with ids `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagInventory {
    tags: Vec<String>,
    index: BTreeMap<String, u32>,
}

impl TagInventory {
    pub fn new(tags: Vec<String>) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, t) in tags.iter().enumerate() {
            if t.is_empty() {
                return Err(Error::EmptyTag);
            }
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::DuplicateTag(t.clone()));
            }
        }
        Ok(Self { tags, index })
    }

    /// Distinct tags of a labeled corpus in sorted order.
    pub fn from_corpus(corpus: &Corpus) -> Result<Self> {
        if !corpus.labeled() {
            return Err(Error::Unlabeled(corpus.name.clone()));
        }
        let mut set = alloc::collections::BTreeSet::new();
        for s in corpus.sentences() {
            set.extend(s.tags().into_iter().flatten().cloned());
        }
        Self::new(set.into_iter().collect())
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn id(&self, tag: &str) -> Option<u32> {
        self.index.get(tag).copied()
    }

    pub fn tag(&self, id: u32) -> Option<&str> {
        self.tags.get(id as usize).map(String::as_str)
    }

    /// Tag ids for one sentence; errors on the first unknown tag.
    pub fn encode(&self, tags: &[String], sentence: usize) -> Result<Vec<u32>> {
        tags.iter()
            .map(|t| {
                self.id(t).ok_or_else(|| Error::UnknownTag {
                    tag: t.clone(),
                    sentence,
                })
            })
            .collect()
    }
}

/// First character of an alphanumeric-initial tag; symbol tags are returned
/// whole.
pub fn coarsen_tag(tag: &str) -> Result<String> {
    let first = tag.chars().next().ok_or(Error::EmptyTag)?;
    if first.is_alphanumeric() {
        Ok(first.to_string())
    } else {
        Ok(tag.to_string())
    }
}

fn relabel(
    corpus: &Corpus,
    name: String,
    mut f: impl FnMut(&str, usize) -> Result<String>,
) -> Result<Corpus> {
    if !corpus.labeled() {
        return Err(Error::Unlabeled(corpus.name.clone()));
    }
    let mut out = Vec::with_capacity(corpus.len());
    for (si, s) in corpus.sentences().iter().enumerate() {
        let tags = s.tags().unwrap_or_default();
        let new: Result<Vec<String>> = tags.iter().map(|t| f(t, si)).collect();
        out.push(s.with_tags(Some(new?))?);
    }
    Ok(Corpus::new(name, out))
}

pub fn coarsen_corpus(corpus: &Corpus) -> Result<Corpus> {
    relabel(corpus, corpus.name.clone(), |t, _| coarsen_tag(t))
}

/// Source-scheme to target-scheme tag table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingTable {
    pub name: String,
    entries: BTreeMap<String, String>,
}

impl MappingTable {
    pub fn new(name: impl Into<String>, entries: BTreeMap<String, String>) -> Result<Self> {
        if entries.iter().any(|(k, v)| k.is_empty() || v.is_empty()) {
            return Err(Error::EmptyTag);
        }
        Ok(Self {
            name: name.into(),
            entries,
        })
    }

    pub fn get(&self, tag: &str) -> Option<&str> {
        self.entries.get(tag).map(String::as_str)
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }
}

/// Tags that passed through a lenient mapping unchanged, with counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MappingReport {
    pub unmapped: BTreeMap<String, usize>,
}

impl MappingReport {
    pub fn unmapped_tokens(&self) -> usize {
        self.unmapped.values().sum()
    }
}

/// Rewrites every tag through `table`. In strict mode the first unmapped tag
/// is an error; otherwise it is kept as is and counted.
pub fn apply_mapping(
    corpus: &Corpus,
    table: &MappingTable,
    strict: bool,
) -> Result<(Corpus, MappingReport)> {
    let mut report = MappingReport::default();
    let mapped = relabel(corpus, corpus.name.clone(), |t, si| match table.get(t) {
        Some(m) => Ok(m.to_string()),
        None if strict => Err(Error::UnmappedTag {
            tag: t.to_string(),
            sentence: si,
            table: table.name.clone(),
        }),
        None => {
            *report.unmapped.entry(t.to_string()).or_default() += 1;
            Ok(t.to_string())
        }
    })?;
    Ok((mapped, report))
}

/// Copy of `sentence` tagged with the inventory names of `ids`.
pub fn with_tag_ids(sentence: &Sentence, ids: &[u32], inventory: &TagInventory) -> Result<Sentence> {
    let tags = ids
        .iter()
        .map(|&i| {
            inventory.tag(i).map(String::from).ok_or(Error::IdOutOfRange {
                id: i,
                vocab_size: inventory.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    sentence.with_tags(Some(tags))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::sentence;
    use alloc::vec;

    #[test]
    fn coarsening_examples() {
        assert_eq!(coarsen_tag("VBD").unwrap(), "V");
        assert_eq!(coarsen_tag("V").unwrap(), "V");
        assert_eq!(coarsen_tag("NNS").unwrap(), "N");
        assert_eq!(coarsen_tag("vbd").unwrap(), "v");
        assert_eq!(coarsen_tag(",").unwrap(), ",");
        assert_eq!(coarsen_tag("-LRB-").unwrap(), "-LRB-");
        assert_eq!(coarsen_tag(""), Err(Error::EmptyTag));
    }

    #[test]
    fn coarsen_corpus_is_idempotent_and_structure_preserving() {
        let c = Corpus::new(
            "c",
            vec![sentence(&["ran", "dog", "the", "."], Some(&["VBD", "NN", "DT", "."]), "d")],
        );
        let once = coarsen_corpus(&c).unwrap();
        assert_eq!(once.sentences()[0].tags().unwrap(), ["V", "N", "D", "."]);
        assert_eq!(coarsen_corpus(&once).unwrap(), once);
        assert_eq!(once.token_count(), c.token_count());
        assert!(coarsen_corpus(&c.unlabeled()).is_err());
    }

    #[test]
    fn inventory_round_trip_and_errors() {
        let inv = TagInventory::new(vec!["B".into(), "A".into()]).unwrap();
        for id in 0..2 {
            assert_eq!(inv.id(inv.tag(id).unwrap()), Some(id));
        }
        assert_eq!(
            TagInventory::new(vec!["A".into(), "A".into()]),
            Err(Error::DuplicateTag("A".into()))
        );
        assert_eq!(
            inv.encode(&["A".into(), "Z".into()], 3),
            Err(Error::UnknownTag {
                tag: "Z".into(),
                sentence: 3
            })
        );
    }

    #[test]
    fn mapping_modes() {
        let c = Corpus::new("c", vec![sentence(&["x", "y"], Some(&["A", "A"]), "d")]);
        let t = MappingTable::new("t", [("A".into(), "B".into())].into()).unwrap();
        let (m, r) = apply_mapping(&c, &t, true).unwrap();
        assert_eq!(m.sentences()[0].tags().unwrap(), ["B", "B"]);
        assert_eq!(r.unmapped_tokens(), 0);

        let id = MappingTable::new("id", [("A".into(), "A".into())].into()).unwrap();
        assert_eq!(apply_mapping(&c, &id, true).unwrap().0, c);

        let c2 = Corpus::new("c", vec![sentence(&["x", "y"], Some(&["A", "C"]), "d")]);
        match apply_mapping(&c2, &t, true) {
            Err(Error::UnmappedTag { tag, sentence, .. }) => assert_eq!((tag.as_str(), sentence), ("C", 0)),
            other => panic!("{other:?}"),
        }
        let (m, r) = apply_mapping(&c2, &t, false).unwrap();
        assert_eq!(m.sentences()[0].tags().unwrap(), ["B", "C"]);
        assert_eq!(r.unmapped.get("C"), Some(&1));
    }
}
