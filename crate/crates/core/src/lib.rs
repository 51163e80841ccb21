//! Ordinal data analysis from triplet comparisons: lens depth, medoid and
//! outlier estimation, approximate k-relative neighborhood graphs, and the
//! classification and clustering procedures built on them.

pub mod classify;
pub mod cluster;
pub mod depth;
pub mod error;
pub mod metrics;
pub mod oracle;
pub mod proxgraph;
pub mod statements;

pub use error::{Error, Result};
pub use statements::{ObjectId, Statement, StatementCollection, StatementKind};
