use serde::{Deserialize, Serialize};

use super::{Protocol, ScheduleResult, Sequence};
use crate::hypergraph::Color;
use crate::purify::SubprotocolResult;
use crate::states::HBState;

/// When a run counts as purified and when it is abandoned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Convergence {
    pub target_fidelity: f64,
    pub max_repetitions: usize,
    /// Stop when a repetition changes the fidelity by less than this...
    pub stagnation_delta: f64,
    /// ...while the fidelity is still below this.
    pub stagnation_ceiling: f64,
    /// Stop after this many consecutive decreasing repetitions; 0 disables.
    pub decreasing_repetitions: usize,
}

impl Default for Convergence {
    fn default() -> Self {
        Convergence {
            target_fidelity: 1.0 - 1e-6,
            max_repetitions: 500,
            stagnation_delta: 1e-9,
            stagnation_ceiling: 0.99,
            decreasing_repetitions: 10,
        }
    }
}

impl Convergence {
    /// Only the fidelity target and the repetition cap.
    pub fn without_stagnation(self) -> Self {
        Convergence {
            stagnation_delta: 0.0,
            decreasing_repetitions: 0,
            ..self
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict", content = "repetitions")]
pub enum Verdict {
    Purified(usize),
    Stagnated(usize),
    Decreasing(usize),
    Exhausted(usize),
}

impl Verdict {
    pub fn purified(self) -> bool {
        matches!(self, Verdict::Purified(_))
    }

    pub fn repetitions(self) -> usize {
        match self {
            Verdict::Purified(r) | Verdict::Stagnated(r) | Verdict::Decreasing(r) | Verdict::Exhausted(r) => r,
        }
    }
}

/// Chooses the color of each sub-protocol.
pub trait Policy {
    fn next_color(&mut self) -> Color;

    /// Sees every sub-protocol result; returns `true` when the policy
    /// restarted itself and repetition counting should start over.
    fn observe(&mut self, color: Color, result: &SubprotocolResult) -> ScheduleResult<bool>;

    /// Number of sub-protocols in one repetition of the active sequence.
    fn period(&self) -> usize;
}

/// Repeats one sequence forever.
#[derive(Clone, Debug)]
pub struct FixedPolicy {
    seq: Sequence,
    pos: usize,
}

impl FixedPolicy {
    pub fn new(seq: Sequence) -> Self {
        FixedPolicy { seq, pos: 0 }
    }
}

impl Policy for FixedPolicy {
    fn next_color(&mut self) -> Color {
        let c = self.seq.cyclic(self.pos);
        self.pos += 1;
        c
    }

    fn observe(&mut self, _: Color, _: &SubprotocolResult) -> ScheduleResult<bool> {
        Ok(false)
    }

    fn period(&self) -> usize {
        self.seq.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub repetition: usize,
    pub color: String,
    pub fidelity: f64,
    pub keep_probability: f64,
    pub p_keep: f64,
    pub p_minus: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub initial_fidelity: f64,
    pub steps: Vec<StepRecord>,
    /// Fidelity after each completed repetition.
    pub repetition_fidelities: Vec<f64>,
    /// State after each completed repetition, when requested.
    pub states: Vec<HBState>,
    pub verdict: Verdict,
    pub final_state: HBState,
}

/// Runs `policy` from `sigma0` until `conv` reaches a verdict.
pub fn run_policy<P: Policy + ?Sized>(
    protocol: &Protocol,
    sigma0: &HBState,
    policy: &mut P,
    conv: &Convergence,
    keep_states: bool,
) -> ScheduleResult<Trajectory> {
    let initial_fidelity = sigma0.fidelity()?;
    let mut state = sigma0.clone();
    let mut steps = Vec::new();
    let mut rep_f = Vec::new();
    let mut states = Vec::new();
    let mut in_rep = 0;
    let mut prev = initial_fidelity;
    let mut decreasing = 0;
    let verdict = loop {
        let color = policy.next_color();
        let result = protocol.plan(color)?.keep(&state)?;
        let restarted = policy.observe(color, &result)?;
        state = result.kept;
        let fidelity = state.fidelity()?;
        steps.push(StepRecord {
            step: steps.len(),
            repetition: rep_f.len(),
            color: color.to_string(),
            fidelity,
            keep_probability: result.keep_probability,
            p_keep: result.p_keep,
            p_minus: result.p_minus,
        });
        in_rep += 1;
        if restarted {
            in_rep = 0;
        }
        if in_rep < policy.period() {
            continue;
        }
        in_rep = 0;
        rep_f.push(fidelity);
        if keep_states {
            states.push(state.clone());
        }
        let reps = rep_f.len();
        if fidelity >= conv.target_fidelity {
            break Verdict::Purified(reps);
        }
        if (fidelity - prev).abs() < conv.stagnation_delta && fidelity < conv.stagnation_ceiling {
            break Verdict::Stagnated(reps);
        }
        decreasing = if fidelity < prev { decreasing + 1 } else { 0 };
        if conv.decreasing_repetitions > 0 && decreasing >= conv.decreasing_repetitions {
            break Verdict::Decreasing(reps);
        }
        if reps >= conv.max_repetitions {
            break Verdict::Exhausted(reps);
        }
        prev = fidelity;
    };
    Ok(Trajectory {
        initial_fidelity,
        steps,
        repetition_fidelities: rep_f,
        states,
        verdict,
        final_state: state,
    })
}

/// Repeats `seq` from `sigma0` until `conv` reaches a verdict.
pub fn run_sequence(
    protocol: &Protocol,
    sigma0: &HBState,
    seq: &Sequence,
    conv: &Convergence,
    keep_states: bool,
) -> ScheduleResult<Trajectory> {
    protocol.check_sequence(seq)?;
    run_policy(protocol, sigma0, &mut FixedPolicy::new(seq.clone()), conv, keep_states)
}
