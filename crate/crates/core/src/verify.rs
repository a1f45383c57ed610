//! Oracle-equivalence sweeps: graphical rules, stabilizer/basis identities
//! and the coefficient-space protocol maps, each checked against explicit
//! matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::hypergraph::{Coloring, Edge, EdgeSet, Sign};
use crate::oracle::{self, Branch, Gate, PauliBasis, PureState, C64};
use crate::purify::Subprotocol;
use crate::states::HBState;

/// Failures listed verbatim in a report.
const MAX_LISTED: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyOptions {
    /// Every edge set on up to this many vertices is checked.
    pub exhaustive_max_n: usize,
    /// Random edge sets per vertex count in `random_n`.
    pub random_cases: usize,
    pub random_n: Vec<usize>,
    /// Random mixed states for the protocol-map check, three qubits.
    pub protocol_states: usize,
    /// Random mixed states on the four-vertex chain.
    pub protocol_states_chain: usize,
    pub seed: u64,
    pub rewrite_tolerance: f64,
    pub protocol_tolerance: f64,
    pub completeness_tolerance: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            exhaustive_max_n: 4,
            random_cases: 500,
            random_n: vec![5, 6],
            protocol_states: 200,
            protocol_states_chain: 20,
            seed: 0,
            rewrite_tolerance: 1e-10,
            protocol_tolerance: 1e-9,
            completeness_tolerance: 1e-10,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub cases: usize,
    pub checks: usize,
    pub mismatches: usize,
    pub max_error: f64,
    pub failures: Vec<String>,
}

impl Tally {
    fn record(&mut self, err: f64, tol: f64, what: impl FnOnce() -> String) {
        self.checks += 1;
        if err.is_nan() || err > self.max_error {
            self.max_error = err;
        }
        if !(err <= tol) {
            self.mismatches += 1;
            if self.failures.len() < MAX_LISTED {
                self.failures.push(format!("{} (error {err:e})", what()));
            }
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.cases += other.cases;
        self.checks += other.checks;
        self.mismatches += other.mismatches;
        self.max_error = self.max_error.max(other.max_error);
        let room = MAX_LISTED.saturating_sub(self.failures.len());
        self.failures.extend(other.failures.into_iter().take(room));
        self
    }

    pub fn passed(&self) -> bool {
        self.mismatches == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub rewrites: Tally,
    pub stabilizers: Tally,
    pub protocol: Tally,
    pub completeness: Tally,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.rewrites.passed() && self.stabilizers.passed() && self.protocol.passed() && self.completeness.passed()
    }

    pub fn summary(&self) -> String {
        format!(
            "rewrite/oracle mismatches: {}\nstabilizer/basis mismatches: {}\nprotocol/oracle mismatches: {}\nprobability completeness mismatches: {}\n",
            self.rewrites.mismatches, self.stabilizers.mismatches, self.protocol.mismatches, self.completeness.mismatches
        )
    }
}

/// Edge set `k` of the `2^(2^n - 1)` edge sets on `n` vertices.
pub fn edge_set_from_index(n: usize, k: u64) -> EdgeSet {
    let mut e = EdgeSet::new(n).expect("small n");
    for mask in 1..(1u64 << n) {
        if k & (1 << (mask - 1)) != 0 {
            e.toggle_edge(Edge::from_mask(mask)).expect("in range");
        }
    }
    e
}

/// Uniformly random edge set, including the global sign.
pub fn random_edge_set<R: Rng + ?Sized>(n: usize, rng: &mut R) -> EdgeSet {
    let mut e = EdgeSet::new(n).expect("small n");
    for mask in 1..(1u64 << n) {
        if rng.random_bool(0.5) {
            e.toggle_edge(Edge::from_mask(mask)).expect("in range");
        }
    }
    if rng.random_bool(0.5) {
        e = e.with_sign(Sign::Minus);
    }
    e
}

fn all_edge_sets(max_n: usize) -> Vec<EdgeSet> {
    (0..=max_n)
        .flat_map(|n| {
            let count = 1u64 << ((1u64 << n) - 1);
            (0..count).flat_map(move |k| {
                let e = edge_set_from_index(n, k);
                let minus = e.clone().with_sign(Sign::Minus);
                [e, minus]
            })
        })
        .collect()
}

fn state(e: &EdgeSet) -> PureState {
    oracle::build_state(e).expect("within oracle limit")
}

fn vec_err(a: &PureState, b: &PureState) -> f64 {
    if a.amplitudes().len() != b.amplitudes().len() {
        return f64::INFINITY;
    }
    a.max_diff(b)
}

/// `K|ψ⟩` renormalized, or `None` when the outcome has zero probability.
fn project(k: &oracle::Matrix, psi: &PureState) -> Option<PureState> {
    let out = k * psi.amplitudes();
    let norm = out.norm();
    (norm > 1e-12).then(|| PureState::from_amplitudes(out / C64::new(norm, 0.0)).expect("power of two"))
}

fn project_or_zero(k: &oracle::Matrix, psi: &PureState, e: &EdgeSet) -> f64 {
    match project(k, psi) {
        Some(p) => vec_err(&p, &state(e)),
        None => f64::INFINITY,
    }
}

/// Graphical rules against explicit gates for one edge set.
pub fn check_rewrites(e: &EdgeSet, tol: f64) -> Tally {
    let n = e.n_vertices();
    let psi = state(e);
    let mut t = Tally {
        cases: 1,
        ..Tally::default()
    };
    let ctx = |op: String| move || format!("{op} on {e}");
    for v in 0..n {
        let got = state(&e.apply_z(v).expect("valid"));
        t.record(
            vec_err(&got, &psi.apply(&Gate::Z(v)).expect("valid")),
            tol,
            ctx(format!("Z_{}", v + 1)),
        );
        let got = state(&e.apply_x(v).expect("valid"));
        t.record(
            vec_err(&got, &psi.apply(&Gate::X(v)).expect("valid")),
            tol,
            ctx(format!("X_{}", v + 1)),
        );
        let (e0, e1) = e.z_split(v).expect("valid");
        for (outcome, branch) in [(false, &e0), (true, &e1)] {
            let k = oracle::measurement_kraus(n, v, PauliBasis::Z, outcome).expect("valid");
            t.record(
                project_or_zero(&k, &psi, branch),
                tol,
                ctx(format!("z_split({}) branch {}", v + 1, outcome as u8)),
            );
        }
        for w in (0..n).filter(|&w| w != v) {
            let got = state(&e.apply_cnot(v, w).expect("valid"));
            let want = psi.apply(&Gate::Cnot { control: v, target: w }).expect("valid");
            t.record(vec_err(&got, &want), tol, ctx(format!("CNOT_{},{}", v + 1, w + 1)));
            let k = oracle::reduction_kraus(n, v, w, false).expect("valid");
            t.record(
                project_or_zero(&k, &psi, &e.reduce(v, w).expect("valid")),
                tol,
                ctx(format!("reduce({},{})", v + 1, w + 1)),
            );
        }
    }
    t
}

/// `S_i|H_k⟩ = (-1)^{k_i}|H_k⟩` and `⟨H_k|H_k'⟩ = δ` for one edge set.
pub fn check_stabilizers(e: &EdgeSet, tol: f64) -> Tally {
    let n = e.n_vertices();
    let mut t = Tally {
        cases: 1,
        ..Tally::default()
    };
    let b = oracle::basis_matrix(e).expect("small n");
    let dim = 1 << n;
    let gram = b.adjoint() * &b;
    let gram_err = oracle::max_abs_diff(&gram, &oracle::Matrix::identity(dim, dim));
    t.record(gram_err, tol, || format!("basis of {e} is not orthonormal"));
    for i in 0..n {
        let s = oracle::stabilizer(e, i).expect("small n").matrix;
        for k in 0..dim {
            let col = b.column(k);
            let sign = if k & oracle::vertex_bit(n, i) != 0 { -1.0 } else { 1.0 };
            let err = (&s * col - col * C64::new(sign, 0.0)).iter().map(|z| z.norm()).fold(0.0, f64::max);
            t.record(err, tol, || format!("S_{} on H_{k:0n$b} of {e}", i + 1));
        }
    }
    t
}

/// Keep branch and every recycle branch against the dense two-copy oracle.
pub fn check_protocol(sigma: &HBState, coloring: &Coloring, tol: f64, completeness_tol: f64) -> (Tally, Tally) {
    let e = sigma.target();
    let mut maps = Tally {
        cases: 1,
        ..Tally::default()
    };
    let mut sums = Tally {
        cases: 1,
        ..Tally::default()
    };
    let rho = sigma.to_dense().expect("small n");
    let pair = rho.tensor(&rho).expect("small n");
    for color in coloring.palette() {
        let plan = Subprotocol::new(e, coloring, color).expect("supported target");
        let (keep, branches) = plan.recycle(sigma).expect("valid state");
        let dense = oracle::subprotocol_dense(&pair, e, coloring, color, Branch::KEEP).expect("valid");
        maps.record((dense.probability - keep.keep_probability).abs(), tol, || {
            format!("keep probability, color {color}")
        });
        let kept = HBState::to_hbasis(&dense.state, e).expect("dims");
        maps.record(kept.max_diff(&keep.kept), tol, || format!("keep state, color {color}"));

        let measured_mask = plan.measured().iter().fold(0u64, |m, &v| m | (1 << v));
        let mut total = 0.0;
        let mut minus = measured_mask;
        loop {
            // every subset of the measured vertices as σ_x outcomes
            let d = oracle::subprotocol_dense(&pair, e, coloring, color, Branch::SigmaX { minus }).expect("valid");
            total += d.probability;
            if minus == 0 {
                break;
            }
            minus = (minus - 1) & measured_mask;
        }
        let p0 = keep.p_reduce[0].probability;
        maps.record((total - p0).abs(), tol, || format!("all-P pattern probability, color {color}"));
        for b in &branches {
            let sel = Branch::SigmaZ {
                perp: b.perp,
                minus: b.z_minus,
                corrections: b.correction_mask(),
            };
            let d = oracle::subprotocol_dense(&pair, e, coloring, color, sel).expect("valid");
            let label = || format!("color {color}, perp {:#b}, z {:#b}", b.perp, b.z_minus);
            maps.record((d.probability - b.probability).abs(), tol, || format!("probability, {}", label()));
            if !b.impossible {
                let s = HBState::to_hbasis(&d.state, e).expect("dims");
                maps.record(s.max_diff(&b.state), tol, || format!("state, {}", label()));
            }
            total += d.probability;
        }
        for pat in &keep.p_reduce[1..] {
            let sum: f64 = branches.iter().filter(|b| b.perp == pat.perp).map(|b| b.probability).sum();
            maps.record((sum - pat.probability).abs(), tol, || {
                format!("pattern {:#b} probability, color {color}", pat.perp)
            });
        }
        sums.record((total - 1.0).abs(), completeness_tol, || {
            format!("branch probabilities, color {color}")
        });
    }
    (maps, sums)
}

pub fn verify_rewrites(opts: &VerifyOptions) -> Tally {
    let exhaustive = all_edge_sets(opts.exhaustive_max_n)
        .par_iter()
        .map(|e| check_rewrites(e, opts.rewrite_tolerance))
        .reduce(Tally::default, Tally::merge);
    let random = random_sets(opts)
        .par_iter()
        .map(|e| check_rewrites(e, opts.rewrite_tolerance))
        .reduce(Tally::default, Tally::merge);
    exhaustive.merge(random)
}

fn random_sets(opts: &VerifyOptions) -> Vec<EdgeSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    opts.random_n
        .iter()
        .flat_map(|&n| (0..opts.random_cases).map(|_| random_edge_set(n, &mut rng)).collect::<Vec<_>>())
        .collect()
}

pub fn verify_stabilizers(opts: &VerifyOptions) -> Tally {
    all_edge_sets(opts.exhaustive_max_n)
        .par_iter()
        .map(|e| check_stabilizers(e, opts.rewrite_tolerance))
        .reduce(Tally::default, Tally::merge)
}

/// Random states on the three-vertex target and on the four-vertex chain.
pub fn verify_protocol(opts: &VerifyOptions) -> (Tally, Tally) {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37_79b9_7f4a_7c15);
    let triple = EdgeSet::linear_chain(3).expect("valid");
    let chain = EdgeSet::linear_chain(4).expect("valid");
    let mut cases = Vec::new();
    for _ in 0..opts.protocol_states {
        cases.push((triple.clone(), oracle::random_density(3, &mut rng)));
    }
    for _ in 0..opts.protocol_states_chain {
        cases.push((chain.clone(), oracle::random_density(4, &mut rng)));
    }
    cases
        .par_iter()
        .map(|(e, rho)| {
            let coloring = Coloring::cyclic(e.n_vertices(), 3);
            let sigma = HBState::to_hbasis(rho, e).expect("dims");
            check_protocol(&sigma, &coloring, opts.protocol_tolerance, opts.completeness_tolerance)
        })
        .reduce(|| (Tally::default(), Tally::default()), |(a, b), (c, d)| (a.merge(c), b.merge(d)))
}

pub fn verify_all(opts: &VerifyOptions) -> VerifyReport {
    let (protocol, completeness) = verify_protocol(opts);
    VerifyReport {
        rewrites: verify_rewrites(opts),
        stabilizers: verify_stabilizers(opts),
        protocol,
        completeness,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_set_enumeration() {
        assert_eq!(all_edge_sets(2).len(), 2 * (1 + 2 + 8));
        assert_eq!(edge_set_from_index(3, 0b100_0000).to_string(), "3; {1,2,3}");
    }

    #[test]
    fn small_sweep_passes() {
        let opts = VerifyOptions {
            exhaustive_max_n: 2,
            random_cases: 3,
            random_n: vec![4],
            protocol_states: 2,
            protocol_states_chain: 1,
            ..VerifyOptions::default()
        };
        let r = verify_all(&opts);
        assert!(r.passed(), "{}", r.summary());
        assert!(r.rewrites.checks > 0 && r.protocol.checks > 0);
        assert!(r.summary().starts_with("rewrite/oracle mismatches: 0"));
    }

    #[test]
    fn tally_reports_failures() {
        let mut t = Tally::default();
        t.record(1.0, 0.5, || "bad".into());
        t.record(f64::NAN, 0.5, || "nan".into());
        assert_eq!(t.mismatches, 2);
        assert!(!t.passed());
    }
}
