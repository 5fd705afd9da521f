mod corpus;
mod probe;
mod semantics;
mod syntax;

pub use corpus::{generate, stats};
pub use probe::{sweep, train_probe};
pub use semantics::semantics;
pub use syntax::{ged, syntax, train_structural};

use anyhow::Result;

use crate::config::ExperimentConfig;
use crate::run::Run;

/// Standalone parse: the probe comes from `[parse] probe`.
pub fn parse(cfg: &ExperimentConfig, run: &mut Run) -> Result<()> {
    syntax::parse(cfg, run, None).map(|_| ())
}
