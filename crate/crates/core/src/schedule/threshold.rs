use serde::{Deserialize, Serialize};

use super::adaptive::{AdaptiveConfig, AdaptivePolicy, Estimator};
use super::criteria::{run_policy, Convergence, FixedPolicy, Policy};
use super::{Protocol, ScheduleError, ScheduleResult, Sequence};
use crate::purify::PurifyError;
use crate::states::{HBState, NoiseKind, NoiseSpec};

/// What to run at each noise level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicySpec {
    Fixed(Sequence),
    Adaptive(AdaptiveConfig),
}

impl PolicySpec {
    fn build(&self) -> Box<dyn Policy> {
        match self {
            PolicySpec::Fixed(s) => Box::new(FixedPolicy::new(s.clone())),
            PolicySpec::Adaptive(cfg) => Box::new(AdaptivePolicy::new(cfg.clone(), Estimator::Exact)),
        }
    }

    fn check(&self, protocol: &Protocol) -> ScheduleResult<()> {
        match self {
            PolicySpec::Fixed(s) => protocol.check_sequence(s),
            PolicySpec::Adaptive(cfg) => {
                protocol.check_sequence(&cfg.s1)?;
                protocol.check_sequence(&cfg.s2)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdOptions {
    pub lo: f64,
    pub hi: f64,
    pub resolution: f64,
    pub convergence: Convergence,
    /// Offsets above `p_min`, in units of `resolution`, re-checked afterwards.
    pub probes: Vec<f64>,
    /// Fail on a probe that does not purify instead of only reporting it.
    pub strict: bool,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        ThresholdOptions {
            lo: 0.0,
            hi: 1.0,
            resolution: 1e-4,
            convergence: Convergence::default(),
            probes: vec![2.0, 5.0, 10.0, 20.0, 50.0, 100.0],
            strict: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub noise: NoiseKind,
    pub p_min: f64,
    /// Largest probed noise parameter that did not purify.
    pub p_fail: f64,
    pub evaluations: usize,
    /// Probe points above `p_min` that failed to purify.
    pub violations: Vec<f64>,
}

/// Whether `E(|H_0⟩⟨H_0|, p)` purifies under `spec`. A collapsed keep branch
/// counts as failure.
pub fn purifiable(protocol: &Protocol, kind: NoiseKind, p: f64, spec: &PolicySpec, conv: &Convergence) -> ScheduleResult<bool> {
    let sigma = HBState::noisy_target(protocol.target(), NoiseSpec::new(kind, p)?)?;
    let mut policy = spec.build();
    match run_policy(protocol, &sigma, policy.as_mut(), conv, false) {
        Ok(t) => Ok(t.verdict.purified()),
        Err(ScheduleError::Purify(PurifyError::ImpossibleBranch)) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Bisection for the smallest purifiable noise parameter.
pub fn find_threshold(protocol: &Protocol, kind: NoiseKind, spec: &PolicySpec, opts: &ThresholdOptions) -> ScheduleResult<ThresholdReport> {
    spec.check(protocol)?;
    let conv = &opts.convergence;
    let (mut lo, mut hi) = (opts.lo, opts.hi);
    let bad = ScheduleError::BadBracket { lo, hi };
    if !(lo < hi) || !(opts.resolution > 0.0) {
        return Err(bad);
    }
    let mut evaluations = 2;
    if !purifiable(protocol, kind, hi, spec, conv)? || purifiable(protocol, kind, lo, spec, conv)? {
        return Err(bad);
    }
    while hi - lo > opts.resolution {
        let mid = 0.5 * (lo + hi);
        evaluations += 1;
        if purifiable(protocol, kind, mid, spec, conv)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut violations = Vec::new();
    for off in &opts.probes {
        let p = hi + off * opts.resolution;
        if p >= opts.hi {
            continue;
        }
        evaluations += 1;
        if !purifiable(protocol, kind, p, spec, conv)? {
            if opts.strict {
                return Err(ScheduleError::NonMonotone { p_min: hi, failing: p });
            }
            violations.push(p);
        }
    }
    Ok(ThresholdReport {
        noise: kind,
        p_min: hi,
        p_fail: lo,
        evaluations,
        violations,
    })
}
