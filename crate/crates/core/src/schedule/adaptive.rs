use std::collections::{BTreeMap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::criteria::{run_policy, Convergence, Policy, Trajectory};
use super::{Protocol, ScheduleError, ScheduleResult, Sequence};
use crate::hypergraph::Color;
use crate::purify::SubprotocolResult;
use crate::states::{HBState, NoiseKind};

/// Switch permanently from `s1` to `s2` once `a·x > b`, where `x` are the
/// last three `-1` probabilities of the party just measured (oldest first).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveConfig {
    pub s1: Sequence,
    pub s2: Sequence,
    pub a: [f64; 3],
    pub b: f64,
    /// Sub-protocols run before the rule is consulted; defaults to `s1.len()`.
    #[serde(default)]
    pub warmup_steps: Option<usize>,
}

impl AdaptiveConfig {
    /// Tabulated configuration for each noise model on the three-qubit target.
    pub fn preset(kind: NoiseKind) -> Self {
        let (s1, s2, a, b) = match kind {
            NoiseKind::White => ("ABC-CBA-ABC", "BAB-CAB-ABA", [0.33, 0.35, 0.32], 0.35),
            NoiseKind::Dephasing => ("ABC-CBA-CBA", "CCC-ACB-CBC", [0.35, 0.43, 0.21], 0.39),
            NoiseKind::Depolarizing => ("ABC-CAB-BCA", "BBB-BCB-BBB-BAB", [0.35, 0.34, 0.31], 0.44),
        };
        AdaptiveConfig {
            s1: s1.parse().expect("valid literal"),
            s2: s2.parse().expect("valid literal"),
            a,
            b,
            warmup_steps: None,
        }
    }

    pub fn warmup(&self) -> usize {
        self.warmup_steps.unwrap_or(self.s1.len())
    }

    pub fn score(&self, x: &[f64; 3]) -> f64 {
        self.a.iter().zip(x).map(|(a, x)| a * x).sum()
    }

    pub fn should_switch(&self, x: &[f64; 3]) -> bool {
        self.score(x) > self.b
    }
}

/// Source of the `-1` probability fed into the buffers.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Estimator {
    Exact,
    /// Observed frequency from a finite pool of noisy copies.
    MonteCarlo {
        pool: u64,
        seed: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchEvent {
    /// Index of the sub-protocol after which the switch happened.
    pub step: usize,
    pub color: String,
    pub x: [f64; 3],
    pub score: f64,
}

#[derive(Clone, Debug)]
struct Pool {
    rng: ChaCha8Rng,
    count: u64,
}

#[derive(Clone, Debug)]
pub struct AdaptivePolicy {
    cfg: AdaptiveConfig,
    buffers: BTreeMap<Color, VecDeque<f64>>,
    switched: Option<SwitchEvent>,
    pos: usize,
    steps: usize,
    pool: Option<Pool>,
}

impl AdaptivePolicy {
    pub fn new(cfg: AdaptiveConfig, estimator: Estimator) -> Self {
        let pool = match estimator {
            Estimator::Exact => None,
            Estimator::MonteCarlo { pool, seed } => Some(Pool {
                rng: ChaCha8Rng::seed_from_u64(seed),
                count: pool,
            }),
        };
        AdaptivePolicy {
            cfg,
            buffers: BTreeMap::new(),
            switched: None,
            pos: 0,
            steps: 0,
            pool,
        }
    }

    pub fn switch_event(&self) -> Option<&SwitchEvent> {
        self.switched.as_ref()
    }

    pub fn buffer(&self, color: Color) -> Vec<f64> {
        self.buffers.get(&color).map(|b| b.iter().copied().collect()).unwrap_or_default()
    }

    fn active(&self) -> &Sequence {
        if self.switched.is_some() {
            &self.cfg.s2
        } else {
            &self.cfg.s1
        }
    }

    fn estimate(&mut self, result: &SubprotocolResult) -> ScheduleResult<f64> {
        let step = self.steps;
        let Some(pool) = self.pool.as_mut() else {
            return Ok(result.p_minus);
        };
        let pairs = pool.count / 2;
        let exhausted = |remaining| ScheduleError::PoolExhausted { step, remaining };
        if pairs == 0 {
            return Err(exhausted(pool.count));
        }
        let p0 = result.p_reduce[0].probability.clamp(0.0, 1.0);
        let reduced = sample(&mut pool.rng, pairs, p0);
        if reduced == 0 {
            return Err(exhausted(0));
        }
        let kept = sample(&mut pool.rng, reduced, result.p_keep.clamp(0.0, 1.0));
        pool.count = kept;
        Ok(1.0 - kept as f64 / reduced as f64)
    }
}

fn sample(rng: &mut ChaCha8Rng, n: u64, p: f64) -> u64 {
    Binomial::new(n, p).map(|d| d.sample(rng)).unwrap_or(0)
}

impl Policy for AdaptivePolicy {
    fn next_color(&mut self) -> Color {
        let c = self.active().cyclic(self.pos);
        self.pos += 1;
        c
    }

    fn observe(&mut self, color: Color, result: &SubprotocolResult) -> ScheduleResult<bool> {
        let x = self.estimate(result)?;
        self.steps += 1;
        if self.switched.is_some() {
            return Ok(false);
        }
        let buf = self.buffers.entry(color).or_default();
        buf.push_back(x);
        if buf.len() > 3 {
            buf.pop_front();
        }
        if self.steps <= self.cfg.warmup() || buf.len() < 3 {
            return Ok(false);
        }
        let xs = [buf[0], buf[1], buf[2]];
        if !self.cfg.should_switch(&xs) {
            return Ok(false);
        }
        self.switched = Some(SwitchEvent {
            step: self.steps - 1,
            color: color.to_string(),
            x: xs,
            score: self.cfg.score(&xs),
        });
        self.pos = 0;
        Ok(true)
    }

    fn period(&self) -> usize {
        self.active().len()
    }
}

#[derive(Clone, Debug)]
pub struct AdaptiveOutcome {
    pub trajectory: Trajectory,
    pub switch: Option<SwitchEvent>,
}

pub fn adaptive_run(
    protocol: &Protocol,
    sigma0: &HBState,
    cfg: &AdaptiveConfig,
    estimator: Estimator,
    conv: &Convergence,
) -> ScheduleResult<AdaptiveOutcome> {
    protocol.check_sequence(&cfg.s1)?;
    protocol.check_sequence(&cfg.s2)?;
    let mut policy = AdaptivePolicy::new(cfg.clone(), estimator);
    let trajectory = run_policy(protocol, sigma0, &mut policy, conv, false)?;
    Ok(AdaptiveOutcome {
        trajectory,
        switch: policy.switched,
    })
}
