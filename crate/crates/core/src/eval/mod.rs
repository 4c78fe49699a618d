//! Toy-domain metric suite: inference success rate, accent match rate via a
//! pluggable classifier, speaker similarity from timbre-histogram
//! embeddings, content error rate from edit distance, and CSV/JSON reports.

mod classifier;
mod metrics;
mod report;

pub use classifier::{train_attr_classifier, AttrClassifier, ClassifierReport};
pub use metrics::{
    amr, content_error_rate, cosine_sim, isr, levenshtein, speaker_embedding, AmrResult,
    AttrTarget,
};
pub use report::{format_csv, parse_csv, write_report, EvalRow, ReportMeta, CSV_HEADER};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("sequence has no timbre symbols; speaker embedding undefined")]
    NoTimbreSymbols,
    #[error("classifier training needs both classes present")]
    SingleClassCorpus,
    #[error("malformed csv at line {0}")]
    BadCsv(usize),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
