use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Protocol, ScheduleError, ScheduleResult, Sequence};
use crate::states::{HBState, NoiseKind, NoiseSpec};

/// Fidelity slack when comparing against the reference fidelity.
const FIDELITY_SLACK: f64 = 1e-12;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum YieldMode {
    /// Expected (real-valued) counts per input copy.
    Expected,
    /// Binomial outcome counts from a finite number of inputs.
    MonteCarlo { inputs: u64, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct YieldOptions {
    pub rounds: usize,
    pub recycle: bool,
    pub mode: YieldMode,
    /// Sub-protocols a recycled lineage may take before it is abandoned.
    pub max_steps: usize,
    /// Minimum output fidelity; defaults to the fidelity reached without recycling.
    pub reference_fidelity: Option<f64>,
}

impl Default for YieldOptions {
    fn default() -> Self {
        YieldOptions {
            rounds: 3,
            recycle: false,
            mode: YieldMode::Expected,
            max_steps: 12,
            reference_fidelity: None,
        }
    }
}

/// A group of identical states at one point of the sequence.
#[derive(Clone, Debug)]
pub struct Cohort {
    pub state: HBState,
    pub count: f64,
    /// Position in the (cyclic) sequence.
    pub stage: usize,
    /// Sub-protocols this lineage has gone through.
    pub steps: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LedgerRound {
    pub round: usize,
    pub color: String,
    pub consumed: f64,
    pub pairs: f64,
    pub unpaired: f64,
    pub kept: f64,
    pub discarded: f64,
    pub recycled: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YieldLedger {
    pub sequence: Sequence,
    pub rounds: usize,
    pub recycle: bool,
    pub inputs: f64,
    pub outputs: f64,
    pub inputs_per_output: f64,
    pub initial_fidelity: f64,
    /// Fidelity of the non-recycled lineage after each round.
    pub fidelities: Vec<f64>,
    pub reference_fidelity: f64,
    /// States left in lineages that hit the step cap or ran dry.
    pub abandoned: f64,
    pub per_round: Vec<LedgerRound>,
}

enum Counter {
    Expected,
    Sampled(ChaCha8Rng),
}

impl Counter {
    fn pairs(&self, count: f64) -> (f64, f64) {
        match self {
            Counter::Expected => (count / 2.0, 0.0),
            Counter::Sampled(_) => {
                let p = (count / 2.0).floor();
                (p, count - 2.0 * p)
            }
        }
    }

    fn split(&mut self, n: f64, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        match self {
            Counter::Expected => n * p,
            Counter::Sampled(rng) => Binomial::new(n as u64, p).map(|d| d.sample(rng) as f64).unwrap_or(0.0),
        }
    }

    fn alive(&self, count: f64, scale: f64) -> bool {
        match self {
            Counter::Expected => count > 1e-300 * scale,
            Counter::Sampled(_) => count >= 2.0,
        }
    }
}

fn main_line(protocol: &Protocol, sigma0: &HBState, seq: &Sequence, rounds: usize) -> ScheduleResult<Vec<f64>> {
    let mut s = sigma0.clone();
    let mut f = Vec::with_capacity(rounds);
    for r in 0..rounds {
        s = protocol.plan(seq.cyclic(r))?.keep(&s)?.kept;
        f.push(s.fidelity()?);
    }
    Ok(f)
}

/// Runs a population of copies of `sigma0` through `rounds` sub-protocols of
/// `seq` and counts the outputs.
pub fn yield_estimate(protocol: &Protocol, sigma0: &HBState, seq: &Sequence, opts: &YieldOptions) -> ScheduleResult<YieldLedger> {
    protocol.check_sequence(seq)?;
    if opts.rounds == 0 {
        return Err(ScheduleError::Config("yield needs at least one round".into()));
    }
    let fidelities = main_line(protocol, sigma0, seq, opts.rounds)?;
    let reference = opts.reference_fidelity.unwrap_or(fidelities[opts.rounds - 1]);
    let (inputs, mut counter) = match opts.mode {
        YieldMode::Expected => (1.0, Counter::Expected),
        YieldMode::MonteCarlo { inputs, seed } => (inputs as f64, Counter::Sampled(ChaCha8Rng::seed_from_u64(seed))),
    };

    let mut per_round: Vec<LedgerRound> = Vec::new();
    let mut outputs = 0.0;
    let mut abandoned = 0.0;
    let mut queue = VecDeque::from([Cohort {
        state: sigma0.clone(),
        count: inputs,
        stage: 0,
        steps: 0,
    }]);
    while let Some(c) = queue.pop_front() {
        if c.stage >= opts.rounds && c.state.fidelity()? >= reference - FIDELITY_SLACK {
            outputs += c.count;
            continue;
        }
        if !counter.alive(c.count, inputs) || c.steps >= opts.max_steps.max(opts.rounds) || (!opts.recycle && c.stage >= opts.rounds) {
            abandoned += c.count;
            continue;
        }
        let color = seq.cyclic(c.stage);
        let plan = protocol.plan(color)?;
        let res = plan.keep(&c.state)?;
        let (pairs, unpaired) = counter.pairs(c.count);
        let reduced = counter.split(pairs, res.p_reduce[0].probability);
        let kept = counter.split(reduced, res.p_keep);
        let rejected = pairs - reduced;
        if per_round.len() <= c.stage {
            per_round.resize_with(c.stage + 1, LedgerRound::default);
        }
        let row = &mut per_round[c.stage];
        row.round = c.stage;
        row.color = color.to_string();
        row.consumed += 2.0 * pairs;
        row.pairs += pairs;
        row.unpaired += unpaired;
        row.kept += kept;
        row.discarded += reduced - kept;
        abandoned += unpaired;
        if opts.recycle {
            row.recycled += rejected;
        } else {
            row.discarded += rejected;
        }
        queue.push_back(Cohort {
            state: res.kept,
            count: kept,
            stage: c.stage + 1,
            steps: c.steps + 1,
        });
        if opts.recycle && counter.alive(rejected, inputs) {
            let branches = plan.recycle_branches(&c.state, false)?;
            let total: f64 = branches.iter().map(|b| b.probability).sum();
            let parts = branches.iter().filter(|b| !b.impossible).map(|b| (b.probability / total, &b.state));
            let state = HBState::mixture(protocol.target(), parts)?;
            queue.push_back(Cohort {
                state,
                count: rejected,
                stage: c.stage,
                steps: c.steps + 1,
            });
        } else if opts.recycle {
            abandoned += rejected;
        }
    }
    Ok(YieldLedger {
        sequence: seq.clone(),
        rounds: opts.rounds,
        recycle: opts.recycle,
        inputs,
        outputs,
        inputs_per_output: if outputs > 0.0 { inputs / outputs } else { f64::INFINITY },
        initial_fidelity: sigma0.fidelity()?,
        fidelities,
        reference_fidelity: reference,
        abandoned,
        per_round,
    })
}

/// `p` such that white noise on an `n`-vertex target has fidelity `f0`.
pub fn white_noise_parameter(n: usize, f0: f64) -> f64 {
    let d = (1u64 << n) as f64;
    (f0 - 1.0 / d) / (1.0 - 1.0 / d)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecycleRow {
    pub f0: f64,
    pub p: f64,
    pub reference_fidelity: f64,
    pub outputs_plain: f64,
    pub outputs_recycled: f64,
    pub extra_fraction: f64,
}

/// Output gain of recycling on white-noise inputs of fidelity `f0`.
pub fn recycle_compare(
    protocol: &Protocol,
    seq: &Sequence,
    f0_grid: &[f64],
    rounds: usize,
    max_steps: usize,
) -> ScheduleResult<Vec<RecycleRow>> {
    f0_grid
        .par_iter()
        .map(|&f0| {
            let p = white_noise_parameter(protocol.target().n_vertices(), f0);
            let sigma = HBState::noisy_target(protocol.target(), NoiseSpec::new(NoiseKind::White, p)?)?;
            let base = YieldOptions {
                rounds,
                max_steps,
                ..YieldOptions::default()
            };
            let plain = yield_estimate(protocol, &sigma, seq, &base)?;
            let recycled = yield_estimate(
                protocol,
                &sigma,
                seq,
                &YieldOptions {
                    recycle: true,
                    reference_fidelity: Some(plain.reference_fidelity),
                    ..base
                },
            )?;
            Ok(RecycleRow {
                f0,
                p,
                reference_fidelity: plain.reference_fidelity,
                outputs_plain: plain.outputs,
                outputs_recycled: recycled.outputs,
                extra_fraction: recycled.outputs / plain.outputs - 1.0,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::{Coloring, EdgeSet};

    fn protocol() -> Protocol {
        let e: EdgeSet = "3; {1,2,3}".parse().unwrap();
        let c: Coloring = "ABC".parse().unwrap();
        Protocol::new(&e, &c).unwrap()
    }

    #[test]
    fn pure_target_costs_eight_per_round() {
        let p = protocol();
        let s = HBState::pure_target(p.target());
        for rounds in 1..=4 {
            let opts = YieldOptions {
                rounds,
                ..YieldOptions::default()
            };
            let l = yield_estimate(&p, &s, &"ABC".parse().unwrap(), &opts).unwrap();
            assert!((l.inputs_per_output - 8f64.powi(rounds as i32)).abs() < 1e-9 * l.inputs_per_output);
        }
    }

    #[test]
    fn expected_ledger_conserves_pairs() {
        let p = protocol();
        let s = HBState::noisy_target(
            p.target(),
            NoiseSpec {
                kind: NoiseKind::White,
                p: 0.9,
            },
        )
        .unwrap();
        for recycle in [false, true] {
            let opts = YieldOptions {
                recycle,
                ..YieldOptions::default()
            };
            let l = yield_estimate(&p, &s, &"ABC".parse().unwrap(), &opts).unwrap();
            for r in &l.per_round {
                assert!((r.pairs - r.kept - r.discarded - r.recycled).abs() < 1e-12);
                assert!((r.consumed - 2.0 * r.pairs).abs() < 1e-15);
            }
            if !recycle {
                assert_eq!(l.per_round[0].consumed, 1.0);
            }
        }
    }

    #[test]
    fn sampled_ledger_conserves_exactly() {
        let p = protocol();
        let s = HBState::noisy_target(
            p.target(),
            NoiseSpec {
                kind: NoiseKind::White,
                p: 0.9,
            },
        )
        .unwrap();
        let opts = YieldOptions {
            recycle: true,
            mode: YieldMode::MonteCarlo {
                inputs: 1_000_001,
                seed: 9,
            },
            ..YieldOptions::default()
        };
        let l = yield_estimate(&p, &s, &"ABC".parse().unwrap(), &opts).unwrap();
        let r0 = &l.per_round[0];
        assert!(r0.unpaired >= 1.0);
        for r in &l.per_round {
            assert_eq!(r.pairs, r.kept + r.discarded + r.recycled);
            assert_eq!(r.consumed, 2.0 * r.pairs);
            assert_eq!(r.kept.fract(), 0.0);
        }
        assert_eq!(yield_estimate(&p, &s, &"ABC".parse().unwrap(), &opts).unwrap(), l);
    }

    #[test]
    fn white_noise_parameter_inverts_fidelity() {
        let p = white_noise_parameter(3, 0.93);
        assert!((p + (1.0 - p) / 8.0 - 0.93).abs() < 1e-15);
    }
}
