//! Sequences of sub-protocols and everything built on top of them:
//! trajectories, noise thresholds, sequence search, adaptive switching and
//! yield accounting.

mod adaptive;
mod criteria;
mod search;
mod sequence;
mod threshold;
mod yields;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::hypergraph::{Color, Coloring, EdgeSet, HypergraphError};
use crate::purify::{PurifyError, Subprotocol};
use crate::states::StatesError;

pub use adaptive::{adaptive_run, AdaptiveConfig, AdaptiveOutcome, AdaptivePolicy, Estimator, SwitchEvent};
pub use criteria::{run_policy, run_sequence, Convergence, FixedPolicy, Policy, StepRecord, Trajectory, Verdict};
pub use search::{search_sequences, triple_permutations, SearchEntry, SearchSpace};
pub use sequence::Sequence;
pub use threshold::{find_threshold, PolicySpec, ThresholdOptions, ThresholdReport};
pub use yields::{
    recycle_compare, white_noise_parameter, yield_estimate, Cohort, LedgerRound, RecycleRow, YieldLedger, YieldMode, YieldOptions,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error(transparent)]
    Purify(#[from] PurifyError),

    #[error(transparent)]
    States(#[from] StatesError),

    #[error(transparent)]
    Hypergraph(#[from] HypergraphError),

    #[error("invalid sequence: {0}")]
    Sequence(String),

    #[error("color {0} does not occur in the coloring")]
    UnknownColor(Color),

    #[error("threshold bracket [{lo}, {hi}] does not straddle the purifiable region")]
    BadBracket { lo: f64, hi: f64 },

    #[error("purifiability is not monotone: p = {failing} fails above p_min = {p_min}")]
    NonMonotone { p_min: f64, failing: f64 },

    #[error("monte-carlo pool exhausted at step {step}: {remaining} states left")]
    PoolExhausted { step: usize, remaining: u64 },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type ScheduleResult<T> = Result<T, ScheduleError>;

/// A target with a coloring and one prepared sub-protocol per color.
#[derive(Clone, Debug)]
pub struct Protocol {
    target: EdgeSet,
    coloring: Coloring,
    plans: BTreeMap<Color, Subprotocol>,
}

impl Protocol {
    pub fn new(target: &EdgeSet, coloring: &Coloring) -> ScheduleResult<Self> {
        let mut plans = BTreeMap::new();
        for c in coloring.palette() {
            plans.insert(c, Subprotocol::new(target, coloring, c)?);
        }
        Ok(Protocol {
            target: target.clone(),
            coloring: coloring.clone(),
            plans,
        })
    }

    pub fn target(&self) -> &EdgeSet {
        &self.target
    }

    pub fn coloring(&self) -> &Coloring {
        &self.coloring
    }

    pub fn plan(&self, color: Color) -> ScheduleResult<&Subprotocol> {
        self.plans.get(&color).ok_or(ScheduleError::UnknownColor(color))
    }

    /// Checks that every step of `seq` names a color of this coloring.
    pub fn check_sequence(&self, seq: &Sequence) -> ScheduleResult<()> {
        seq.steps().iter().try_for_each(|&c| self.plan(c).map(|_| ()))
    }
}
