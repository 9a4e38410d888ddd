//! Lifted relational neural networks.
//!
//! A template of weighted definite clauses is grounded against each example
//! into a feed-forward network whose weights are shared across examples.
//! Weights are trained by gradient descent, and the template itself can be
//! learned by stacked structure learning: beam search over target-predicate
//! rules interleaved with invention of latent predicates.

pub mod autodiff;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod io;
pub mod logic;
pub mod network;
pub mod structure;
pub mod symbol;
pub mod template;
pub mod train;
pub mod weights;

pub use autodiff::{ActivationParams, NetworkParams, RuleWeightPlacement};
pub use dataset::{Dataset, Example, Query, QuerySet, WeightedFact};
pub use error::{Error, Result};
pub use exec::Execution;
pub use logic::{Atom, Clause, Substitution, Term};
pub use network::GroundNetwork;
pub use symbol::Symbol;
pub use template::{HeadKind, Template, WeightKey, WeightedClause};
pub use weights::WeightStore;
