//! Sources of per-claim checker outputs.

mod fixture;
mod heuristic;
mod remote;

pub use fixture::{FixtureBackend, FixtureTable};
pub use heuristic::{tokenize, HeuristicBackend};
pub use remote::{render_prompt, RemoteBackend, RemoteCheckerConfig, NLI_TEMPLATE_ID};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{CheckerOutput, Claim, Passage};

/// A checker that labels one claim against a set of passages.
pub trait CheckerBackend: Send + Sync {
    fn checker_id(&self) -> &str;

    fn classify(&self, claim: &Claim, passages: &[Passage]) -> Result<CheckerOutput>;
}

/// Classifies every job with at most `max_in_flight` concurrent calls. The
/// result order matches `jobs`, independent of scheduling.
pub fn classify_all<B: CheckerBackend + ?Sized>(
    backend: &B,
    jobs: &[(&Claim, &[Passage])],
    max_in_flight: usize,
) -> Result<Vec<CheckerOutput>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(max_in_flight.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    pool.install(|| {
        jobs.par_iter()
            .map(|(claim, passages)| backend.classify(claim, passages))
            .collect()
    })
}
