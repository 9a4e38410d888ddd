use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("predicate {predicate} used with arity {found}, previously {expected}")]
    Arity { predicate: String, expected: usize, found: usize },

    #[error("query atom {0} is not ground")]
    NonGroundQuery(String),

    #[error("template is cyclic through atom {0}")]
    Cycle(String),

    #[error("{0} requires at least one input")]
    EmptyInput(&'static str),

    #[error("no query atom occurs in any grounding, nothing to train")]
    NothingTrainable,

    #[error("no unary predicates in the data")]
    NoUnaryPredicates,

    #[error("rule has {found} variables, latent arity {needed} needs at least that many")]
    TooFewVariables { needed: usize, found: usize },

    #[error("cannot reach class balance within {attempts} sampled molecules")]
    Unbalanced { attempts: usize },

    #[error("cross-validation: {0}")]
    Folds(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
