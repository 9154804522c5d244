//! Truth-aware decoding: oracle-guarded greedy generation, verification
//! agents, semantic metrics and performance accounting.

pub mod agents;
pub mod decoder;
pub mod error;
pub mod exec;
pub mod kb;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod json;
pub mod perf;
pub mod scenario;
pub mod sweep;
pub mod types;

pub use error::{Error, Result};
pub use exec::Exec;
pub use types::{Fact, Token, TokenId, Trace, Vocabulary};
