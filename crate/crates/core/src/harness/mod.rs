//! Train-on-source, test-on-target experiments, synthetic corpora and
//! result export.

mod heatmap;
mod manifest;
mod matrix;
mod protocol;
mod synthetic;

pub use heatmap::export_gate_heatmap;
pub use manifest::{content_hash, file_hash, InputFile, RunManifest};
pub use matrix::{
    format_timing_table, run_matrix, timing_report, write_timing_csv, CrossDomainMatrix, MatrixRow, RunRecord,
    TimingRow,
};
pub use protocol::{
    encode, run_pair, train_on_source, EmbeddingSource, ExperimentSettings, ModelSpec, PairMode, PairResult,
    TrainedModel,
};
pub use synthetic::{generate_synthetic, PolarityLexicon, SyntheticCorpusSpec, SyntheticDomain};
