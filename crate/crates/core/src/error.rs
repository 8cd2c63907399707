use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("invalid sentence: {0}")]
    InvalidSentence(String),
    #[error("cannot split by document: corpus has {0} distinct document(s)")]
    TooFewDocuments(usize),
    #[error("ratio {0} is outside the open interval (0, 1)")]
    InvalidRatio(f64),
    #[error("vocabulary target size {target} is smaller than alphabet plus specials ({required})")]
    VocabTooSmall { target: usize, required: usize },
    #[error("invalid encoder config: {0}")]
    InvalidConfig(String),
    #[error("piece id {id} out of range for vocabulary of size {vocab_size}")]
    IdOutOfRange { id: u32, vocab_size: usize },
    #[error("sequence of {len} pieces exceeds max_len {max_len}")]
    SequenceTooLong { len: usize, max_len: usize },
    #[error("targets have length {targets} but sequence has {pieces} pieces")]
    TargetMisaligned { pieces: usize, targets: usize },
    #[error("every position in the batch is ignored")]
    NoTargets,
    #[error("non-finite gradient in tensor {0}")]
    NonFiniteGradient(String),
    #[error("training diverged: non-finite loss at step {step} of stage {stage}")]
    Diverged { stage: String, step: usize },
    #[error("gradient set does not match parameter shapes")]
    ShapeMismatch,
    #[error("instance has no maskable (non-special) positions")]
    NoMaskablePositions,
    #[error("target set is empty")]
    EmptyTarget,
    #[error("tag is empty")]
    EmptyTag,
    #[error("corpus {0} is not labeled")]
    Unlabeled(String),
    #[error("tag {tag:?} in sentence {sentence} is not in the tag inventory")]
    UnknownTag { tag: String, sentence: usize },
    #[error("duplicate tag {0:?} in inventory")]
    DuplicateTag(String),
    #[error("tag {tag:?} in sentence {sentence} has no mapping in table {table}")]
    UnmappedTag {
        tag: String,
        sentence: usize,
        table: String,
    },
    #[error("malformed BIO tag {0:?}")]
    MalformedBio(String),
    #[error("structure mismatch at sentence {sentence}: {detail}")]
    StructureMismatch { sentence: usize, detail: String },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("checkpoint tag inventory does not match the supplied inventory")]
    InventoryMismatch,
    #[error("checkpoint has no trained tag head")]
    NoTagHead,
}
