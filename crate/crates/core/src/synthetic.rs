//! Synthetic source/target benchmark: a small probabilistic English grammar
//! with Penn-style tags, Zipf-weighted lexicons, and an orthographically
//! shifted target domain.
//!
//! The grammar seed fixes every tag sequence and every unshifted word; the
//! shift seed only changes target spellings.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::corpus::{split_by_documents, Corpus, Domain, Sentence, SplitManifest};
use crate::hash::derive_seed;
use crate::shift::{generate_shifted_corpus, ShiftRule, ShiftRuleSet};
use crate::{rng_from_seed, Error, Result, Rng};

const DT_SG: &[&str] = &["the", "a", "this", "that", "every", "no", "each", "some", "another"];
const DT_PL: &[&str] = &["the", "these", "those", "some", "all", "no"];
const PRP_SUBJ_SG: &[&str] = &["he", "it", "she"];
const PRP_SUBJ_PL: &[&str] = &["they", "we", "you"];
const PRP_OBJ: &[&str] = &["him", "it", "them", "her", "us", "me", "you"];
const PRP_POSS: &[&str] = &["his", "their", "her", "our", "my", "your", "its"];
const MD: &[&str] = &["will", "shall", "may", "must", "would", "should", "might", "can", "could"];
const IN: &[&str] = &[
    "in", "of", "with", "upon", "unto", "from", "by", "for", "into", "under", "over", "without",
    "within", "against", "at", "on", "after", "before", "until", "above", "beside", "among",
];
const CC: &[&str] = &["and", "but", "or", "yet"];
const CD: &[&str] = &["two", "three", "seven", "five", "four", "six", "ten", "twenty", "many"];
const RB: &[&str] = &[
    "now", "then", "never", "ever", "also", "still", "often", "again", "here", "there", "very",
    "well", "soon", "only", "even", "truly", "always", "likewise", "indeed", "twice", "forth",
    "together", "perhaps", "verily", "quickly", "humbly", "justly", "openly", "alone",
];
const JJ: &[&str] = &[
    "good", "great", "old", "young", "little", "long", "high", "true", "poor", "rich", "wise",
    "evil", "fair", "noble", "holy", "dear", "strong", "heavy", "bright", "dark", "vain", "free",
    "gentle", "humble", "silver", "bitter", "sweet", "private", "public", "civil", "divine",
    "valiant", "virtuous", "vile", "quiet", "just", "mighty", "faithful", "ancient", "curious",
    "diligent", "excellent", "famous", "glorious", "grievous", "honest", "invisible", "lively",
    "lusty", "merry", "naked", "open", "pitiful", "royal", "sinful", "sudden", "swift", "unkind",
    "weary", "worthy", "wicked", "wild", "brave", "cruel", "deep", "dull", "equal", "foul", "idle",
    "kind", "plain", "proud", "pure", "rude", "sick", "simple", "solemn", "vast", "warm",
];
const NN: &[&str] = &[
    "king", "man", "time", "day", "life", "lord", "house", "word", "mind", "wife", "land",
    "church", "heaven", "love", "fear", "hand", "night", "light", "fire", "wine", "voice", "river",
    "valley", "city", "world", "servant", "master", "friend", "letter", "book", "horse", "ship",
    "sea", "field", "water", "bread", "gold", "silver", "money", "sword", "crown", "death",
    "spirit", "soul", "truth", "grace", "mercy", "virtue", "vision", "village", "visit", "answer",
    "order", "promise", "praise", "wish", "help", "use", "walk", "show", "turn", "desire",
    "return", "watch", "play", "journey", "justice", "kingdom", "knight", "lady", "queen",
    "prince", "priest", "bishop", "court", "council", "parliament", "army", "battle", "victory",
    "wind", "sun", "moon", "star", "tree", "garden", "flower", "fruit", "stone", "hill", "mountain",
    "island", "cause", "matter", "manner", "nature", "reason", "sin", "pity", "prison", "sickness",
    "physician", "medicine", "evening", "morning", "summer", "winter", "subject", "office",
    "duty", "service", "covenant", "devil", "minister", "vessel", "covering", "universe",
];
/// Base form and past tense; third person is derived.
const VERBS: &[(&str, &str)] = &[
    ("love", "loved"), ("give", "gave"), ("live", "lived"), ("serve", "served"),
    ("move", "moved"), ("prove", "proved"), ("leave", "left"), ("have", "had"),
    ("take", "took"), ("see", "saw"), ("find", "found"), ("make", "made"), ("know", "knew"),
    ("hear", "heard"), ("keep", "kept"), ("bring", "brought"), ("write", "wrote"),
    ("speak", "spoke"), ("send", "sent"), ("tell", "told"), ("hold", "held"), ("lose", "lost"),
    ("win", "won"), ("visit", "visited"), ("answer", "answered"), ("order", "ordered"),
    ("promise", "promised"), ("praise", "praised"), ("wish", "wished"), ("help", "helped"),
    ("use", "used"), ("walk", "walked"), ("show", "showed"), ("turn", "turned"),
    ("desire", "desired"), ("return", "returned"), ("watch", "watched"), ("play", "played"),
    ("fear", "feared"), ("receive", "received"), ("deliver", "delivered"), ("follow", "followed"),
    ("call", "called"), ("kill", "killed"), ("fill", "filled"), ("believe", "believed"),
    ("remember", "remembered"), ("forgive", "forgave"), ("punish", "punished"),
    ("destroy", "destroyed"), ("defend", "defended"), ("require", "required"),
    ("perceive", "perceived"), ("provide", "provided"), ("discover", "discovered"),
    ("pursue", "pursued"), ("trust", "trusted"), ("suffer", "suffered"), ("govern", "governed"),
    ("invite", "invited"), ("build", "built"), ("bless", "blessed"), ("commit", "committed"),
    ("divide", "divided"), ("inherit", "inherited"), ("obtain", "obtained"), ("offer", "offered"),
    ("rule", "ruled"), ("save", "saved"), ("seek", "sought"), ("sing", "sang"), ("think", "thought"),
    ("thank", "thanked"), ("visit", "visited"),
];
const NNP: &[&str] = &[
    "John", "Mary", "London", "Thomas", "William", "Richard", "Edward", "Henry", "Elizabeth",
    "Oxford", "Kent", "York", "Peter", "Paul", "Anne", "Jane", "Robert", "Walter", "Hugh",
    "Alice", "Margaret", "Dover", "Bristol", "Lincoln", "Wales", "France", "Spain", "Rome",
    "Venice", "Christ", "David", "Susan", "Francis", "Nicholas", "Oliver", "Isabel", "Philip",
    "Giles", "Lucy", "Vincent",
];

/// Weighted choice over a word list.
#[derive(Debug, Clone)]
struct Lexicon {
    words: Vec<String>,
    cumulative: Vec<f64>,
}

impl Lexicon {
    /// Weight `1 / (rank + 1)` in list order.
    fn zipf(words: Vec<String>) -> Self {
        let mut cumulative = Vec::with_capacity(words.len());
        let mut acc = 0.0;
        for k in 0..words.len() {
            acc += 1.0 / (k as f64 + 1.0);
            cumulative.push(acc);
        }
        Self { words, cumulative }
    }

    fn from_strs(words: &[&str]) -> Self {
        let mut seen = alloc::collections::BTreeSet::new();
        Self::zipf(
            words
                .iter()
                .filter(|w| seen.insert(**w))
                .map(|w| w.to_string())
                .collect(),
        )
    }

    fn pick(&self, rng: &mut Rng) -> usize {
        let total = *self.cumulative.last().expect("non-empty lexicon");
        let u = rng.random::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= u).min(self.words.len() - 1)
    }

    /// Re-ranks a random subset of positions, shifting which words are frequent.
    fn reranked(&self, fraction: f64, rng: &mut Rng) -> Self {
        let mut words = self.words.clone();
        let chosen: Vec<usize> = (0..words.len()).filter(|_| rng.random_bool(fraction)).collect();
        let mut moved: Vec<String> = chosen.iter().map(|&i| words[i].clone()).collect();
        moved.shuffle(rng);
        for (&i, w) in chosen.iter().zip(moved) {
            words[i] = w;
        }
        Self::zipf(words)
    }
}

fn plural(noun: &str) -> String {
    let b = noun.as_bytes();
    let n = b.len();
    if noun.ends_with('s') || noun.ends_with('x') || noun.ends_with("ch") || noun.ends_with("sh") {
        alloc::format!("{noun}es")
    } else if n >= 2 && b[n - 1] == b'y' && !b"aeiou".contains(&b[n - 2]) {
        alloc::format!("{}ies", &noun[..n - 1])
    } else if noun == "man" {
        "men".into()
    } else if noun == "wife" {
        "wives".into()
    } else if noun == "life" {
        "lives".into()
    } else {
        alloc::format!("{noun}s")
    }
}

fn third_person(verb: &str) -> String {
    match verb {
        "have" => "has".into(),
        _ => plural(verb),
    }
}

/// Lexicons of every open and closed word class.
#[derive(Debug, Clone)]
pub struct Grammar {
    dt_sg: Lexicon,
    dt_pl: Lexicon,
    prp_subj_sg: Lexicon,
    prp_subj_pl: Lexicon,
    prp_obj: Lexicon,
    prp_poss: Lexicon,
    md: Lexicon,
    prep: Lexicon,
    cc: Lexicon,
    cd: Lexicon,
    rb: Lexicon,
    jj: Lexicon,
    nn: Lexicon,
    nns: Lexicon,
    nnp: Lexicon,
    /// Indices into the verb table, shared by the three verb forms.
    verbs: Lexicon,
    vb: Vec<String>,
    vbz: Vec<String>,
    vbd: Vec<String>,
}

impl Default for Grammar {
    fn default() -> Self {
        Self::english()
    }
}

impl Grammar {
    pub fn english() -> Self {
        let mut seen = alloc::collections::BTreeSet::new();
        let verbs: Vec<(&str, &str)> = VERBS.iter().copied().filter(|(b, _)| seen.insert(*b)).collect();
        let nns: Vec<String> = NN.iter().map(|n| plural(n)).collect();
        Self {
            dt_sg: Lexicon::from_strs(DT_SG),
            dt_pl: Lexicon::from_strs(DT_PL),
            prp_subj_sg: Lexicon::from_strs(PRP_SUBJ_SG),
            prp_subj_pl: Lexicon::from_strs(PRP_SUBJ_PL),
            prp_obj: Lexicon::from_strs(PRP_OBJ),
            prp_poss: Lexicon::from_strs(PRP_POSS),
            md: Lexicon::from_strs(MD),
            prep: Lexicon::from_strs(IN),
            cc: Lexicon::from_strs(CC),
            cd: Lexicon::from_strs(CD),
            rb: Lexicon::from_strs(RB),
            jj: Lexicon::from_strs(JJ),
            nn: Lexicon::from_strs(NN),
            nns: Lexicon::zipf(nns),
            nnp: Lexicon::from_strs(NNP),
            verbs: Lexicon::zipf((0..verbs.len()).map(|i| i.to_string()).collect()),
            vb: verbs.iter().map(|(b, _)| b.to_string()).collect(),
            vbz: verbs.iter().map(|(b, _)| third_person(b)).collect(),
            vbd: verbs.iter().map(|(_, p)| p.to_string()).collect(),
        }
    }

    /// Same word classes with a fraction of each open class re-ranked, so the
    /// frequent vocabulary differs between domains.
    pub fn reranked(&self, fraction: f64, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let mut g = self.clone();
        for lex in [&mut g.jj, &mut g.nn, &mut g.nns, &mut g.nnp, &mut g.rb, &mut g.verbs] {
            *lex = lex.reranked(fraction, &mut rng);
        }
        g
    }

    fn push(&self, out: &mut Vec<(String, &'static str)>, lex: &Lexicon, tag: &'static str, rng: &mut Rng) {
        out.push((lex.words[lex.pick(rng)].clone(), tag));
    }

    fn verb(&self, form: &'static str, out: &mut Vec<(String, &'static str)>, rng: &mut Rng) {
        let i: usize = self.verbs.words[self.verbs.pick(rng)].parse().expect("verb index");
        let w = match form {
            "VB" => &self.vb[i],
            "VBZ" => &self.vbz[i],
            _ => &self.vbd[i],
        };
        out.push((w.clone(), form));
    }

    /// Noun phrase; returns whether it is plural.
    fn noun_phrase(&self, out: &mut Vec<(String, &'static str)>, object: bool, rng: &mut Rng) -> bool {
        let r: f64 = rng.random();
        if r < 0.2 {
            if object {
                self.push(out, &self.prp_obj, "PRP", rng);
                false
            } else if rng.random_bool(0.5) {
                self.push(out, &self.prp_subj_sg, "PRP", rng);
                false
            } else {
                self.push(out, &self.prp_subj_pl, "PRP", rng);
                true
            }
        } else if r < 0.3 {
            self.push(out, &self.nnp, "NNP", rng);
            false
        } else if r < 0.7 {
            if rng.random_bool(0.75) {
                self.push(out, &self.dt_sg, "DT", rng);
            } else {
                self.push(out, &self.prp_poss, "PRP$", rng);
            }
            if rng.random_bool(0.4) {
                self.push(out, &self.jj, "JJ", rng);
            }
            self.push(out, &self.nn, "NN", rng);
            false
        } else {
            match rng.random_range(0..4) {
                0 => self.push(out, &self.cd, "CD", rng),
                1 => self.push(out, &self.prp_poss, "PRP$", rng),
                2 => {}
                _ => self.push(out, &self.dt_pl, "DT", rng),
            }
            if rng.random_bool(0.4) {
                self.push(out, &self.jj, "JJ", rng);
            }
            self.push(out, &self.nns, "NNS", rng);
            true
        }
    }

    fn object(&self, out: &mut Vec<(String, &'static str)>, rng: &mut Rng) {
        self.noun_phrase(out, true, rng);
        if rng.random_bool(0.25) {
            self.push(out, &self.prep, "IN", rng);
            self.noun_phrase(out, true, rng);
        }
    }

    fn clause(&self, out: &mut Vec<(String, &'static str)>, rng: &mut Rng) {
        let plural = self.noun_phrase(out, false, rng);
        let r: f64 = rng.random();
        if r < 0.45 {
            self.verb("VBD", out, rng);
            match rng.random_range(0..5) {
                0 => {
                    self.push(out, &self.rb, "RB", rng);
                    self.push(out, &self.prep, "IN", rng);
                    self.noun_phrase(out, true, rng);
                }
                1 => {
                    out.push(("to".into(), "TO"));
                    self.verb("VB", out, rng);
                    self.object(out, rng);
                }
                _ => self.object(out, rng),
            }
        } else if r < 0.7 && !plural {
            self.verb("VBZ", out, rng);
            self.object(out, rng);
        } else {
            self.push(out, &self.md, "MD", rng);
            if rng.random_bool(0.2) {
                self.push(out, &self.rb, "RB", rng);
            }
            self.verb("VB", out, rng);
            self.object(out, rng);
        }
        if rng.random_bool(0.2) {
            self.push(out, &self.rb, "RB", rng);
        }
    }

    /// One sentence as `(word, tag)` pairs, first letter capitalized.
    pub fn sentence(&self, rng: &mut Rng) -> Vec<(String, &'static str)> {
        let mut out = Vec::new();
        if rng.random_bool(0.1) {
            self.push(&mut out, &self.rb, "RB", rng);
            out.push((",".into(), ","));
        }
        self.clause(&mut out, rng);
        if rng.random_bool(0.3) {
            out.push((",".into(), ","));
            self.push(&mut out, &self.cc, "CC", rng);
            self.clause(&mut out, rng);
        }
        out.push((".".into(), "."));
        let first = &mut out[0].0;
        let mut chars = first.chars();
        if let Some(c) = chars.next() {
            *first = c.to_uppercase().chain(chars).collect();
        }
        out
    }

    /// `sentences` sentences grouped into documents of 10 to 30 sentences.
    pub fn corpus(&self, name: &str, sentences: usize, domain: Domain, rng: &mut Rng) -> Result<Corpus> {
        let mut out = Vec::with_capacity(sentences);
        let mut doc = 0usize;
        while out.len() < sentences {
            let size = rng.random_range(10..=30).min(sentences - out.len());
            let doc_id = alloc::format!("{name}-{doc:04}");
            for _ in 0..size {
                let (words, tags): (Vec<String>, Vec<String>) = self
                    .sentence(rng)
                    .into_iter()
                    .map(|(w, t)| (w, t.to_string()))
                    .unzip();
                out.push(Sentence::new(words, Some(tags), domain, doc_id.clone())?);
            }
            doc += 1;
        }
        Ok(Corpus::new(name, out))
    }

    /// `sentences` sentences of at most `max_words` words in one document,
    /// for memorization checks.
    pub fn short_corpus(&self, name: &str, sentences: usize, max_words: usize, rng: &mut Rng) -> Result<Corpus> {
        // The shortest sentence is subject, verb, object and full stop.
        if max_words < 4 {
            return Err(Error::InvalidConfig(alloc::format!("max_words {max_words} is below 4")));
        }
        let mut out = Vec::with_capacity(sentences);
        while out.len() < sentences {
            let s = self.sentence(rng);
            if s.len() <= max_words {
                let (words, tags) = s.into_iter().map(|(w, t)| (w, t.to_string())).unzip();
                out.push(Sentence::new(words, Some(tags), Domain::Source, name)?);
            }
        }
        Ok(Corpus::new(name, out))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    /// Fixes sentence structure, tags and unshifted words.
    pub grammar_seed: u64,
    /// Fixes which target words are respelled.
    pub shift_seed: u64,
    pub general_sentences: usize,
    pub source_sentences: usize,
    pub target_sentences: usize,
    pub source_test_fraction: f64,
    pub target_test_fraction: f64,
    /// Fraction of open-class lexicon ranks reshuffled for the target domain.
    pub target_rerank: f64,
    pub shift: Vec<(ShiftRule, f64)>,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            grammar_seed: 1,
            shift_seed: 1,
            general_sentences: 4000,
            source_sentences: 2500,
            target_sentences: 2500,
            source_test_fraction: 0.2,
            target_test_fraction: 0.2,
            target_rerank: 0.5,
            shift: alloc::vec![
                (ShiftRule::UvAlternation, 0.9),
                (ShiftRule::IToY, 0.8),
                (ShiftRule::SilentE, 0.4),
                (ShiftRule::Capitalization, 0.15),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBenchmark {
    /// Unlabeled source-domain text for pretraining.
    pub general: Corpus,
    pub source_train: Corpus,
    pub source_test: Corpus,
    /// Shifted and labeled; variants that use it unlabeled drop the tags.
    pub target_train: Corpus,
    pub target_test: Corpus,
    pub source_split: SplitManifest,
    pub target_split: SplitManifest,
}

pub fn generate_benchmark(config: &SyntheticConfig) -> Result<SyntheticBenchmark> {
    if config.general_sentences == 0 || config.source_sentences == 0 || config.target_sentences == 0 {
        return Err(Error::EmptyCorpus);
    }
    let g = config.grammar_seed;
    let source_grammar = Grammar::english();
    let target_grammar = source_grammar.reranked(config.target_rerank, derive_seed(g, "target-lexicon"));

    let mut rng = rng_from_seed(derive_seed(g, "general"));
    let general = source_grammar
        .corpus("general", config.general_sentences, Domain::Source, &mut rng)?
        .unlabeled();

    let mut rng = rng_from_seed(derive_seed(g, "source"));
    let source = source_grammar.corpus("source", config.source_sentences, Domain::Source, &mut rng)?;
    let source_split = split_by_documents(&source, config.source_test_fraction, derive_seed(g, "source-split"))?;

    let mut rng = rng_from_seed(derive_seed(g, "target"));
    let clean = target_grammar.corpus("target", config.target_sentences, Domain::Target, &mut rng)?;
    let rules = ShiftRuleSet::new(config.shift.clone(), config.shift_seed)?;
    let target = generate_shifted_corpus(&clean, &rules)?;
    let target_split = split_by_documents(&target, config.target_test_fraction, derive_seed(g, "target-split"))?;

    Ok(SyntheticBenchmark {
        general,
        source_train: source.select_documents("source-train", &source_split.train_doc_ids),
        source_test: source.select_documents("source-test", &source_split.test_doc_ids),
        target_train: target.select_documents("target-train", &target_split.train_doc_ids),
        target_test: target.select_documents("target-test", &target_split.test_doc_ids),
        source_split,
        target_split,
    })
}
