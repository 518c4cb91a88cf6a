use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("weight ({level}, {pre}, {post}) is masked and cannot be written")]
    MaskedWeight {
        level: usize,
        pre: usize,
        post: usize,
    },

    #[error("delay queue overflow: capacity {capacity} events, peak occupancy {peak}")]
    QueueOverflow { capacity: usize, peak: usize },

    #[error("delay {delay} does not fit a ring buffer with {slots} slots")]
    RingConfig { delay: usize, slots: usize },

    #[error(
        "connection {connection} is not axonal: neuron {neuron} has {levels} delay levels with nonzero weights"
    )]
    NotAxonal {
        connection: usize,
        neuron: usize,
        levels: usize,
    },

    #[error("training diverged (non-finite loss) at batch {batch}")]
    Divergence { batch: usize },

    #[error("prune target {requested} exceeds the {available} available {unit}")]
    PruneTarget {
        requested: usize,
        available: usize,
        unit: &'static str,
    },

    #[error("sample {0} has no label")]
    MissingLabel(usize),

    #[error("trace sets differ in length: {reference} vs {test}")]
    LengthMismatch { reference: usize, test: usize },

    #[error("unsupported model file version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
