//! File formats, synthetic data, cross-validation and reports.

mod report;
mod synthetic;
mod text;
mod xval;

pub use report::{append_embeddings, template_stats, write_history_csv, EmbeddingMatrix, TemplateStats};
pub use synthetic::{default_pattern, generate_planted, matches_pattern, GeneratorConfig, ELEMENTS};
pub use text::{
    parse_atom, parse_body, parse_examples, parse_examples_with, parse_template, read_examples, read_template,
    serialize_template, write_examples, ParseOptions,
};
pub use xval::{cross_validate, stratified_folds, CrossValidation, FoldResult};
