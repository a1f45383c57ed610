//! Coefficient-space sub-protocol maps.
//!
//! One sub-protocol consumes two copies of a state, compares the hypergraph
//! indices of one color class `M` by CNOT + σ_x measurement, and merges the
//! remaining vertices `R` with reduction operators. In the hypergraph basis
//! the kept branch is
//!
//! ```text
//! |H_a⟩|H_b⟩ → 2^{-|R|/2} δ(a_M, b_M) |H_{(b_M, a_R ⊕ b_R)}⟩
//! ```
//!
//! which is an XOR self-convolution on every `(M, M')` block of the
//! coefficient matrix, evaluated with a Walsh-Hadamard transform.
//!
//! When some reductions report `P⊥` the pair can be recycled: `M` is then
//! measured in σ_z and local Z corrections restore
//! `|H_a⟩|H_b⟩ → |H_{(b_M, a_R ⊕ b_R)}⟩` up to branch phases.

use thiserror::Error;

use crate::hypergraph::{Color, Coloring, EdgeSet, HypergraphError};
use crate::oracle::{vertex_bit, Matrix, C64, IMPOSSIBLE_BRANCH};
use crate::states::{HBState, StatesError};

/// Allowed deviation of the input trace from one.
pub const TRACE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PurifyError {
    #[error(transparent)]
    Hypergraph(#[from] HypergraphError),

    #[error(transparent)]
    States(#[from] StatesError),

    #[error("invalid coloring: {0}")]
    InvalidColoring(String),

    #[error("unsupported target: {0}")]
    UnsupportedTarget(String),

    #[error("input state is not normalized (trace {0})")]
    NotNormalized(f64),

    #[error("keep branch has zero probability")]
    ImpossibleBranch,
}

pub type PurifyResult<T> = Result<T, PurifyError>;

/// Probability of one reduction outcome pattern before the measurement of `M`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReductionPattern {
    /// Vertices that reported `P⊥` (bit `v` = vertex `v`).
    pub perp: u64,
    pub probability: f64,
}

#[derive(Clone, Debug)]
pub struct SubprotocolResult {
    /// Normalized kept state.
    pub kept: HBState,
    /// Joint probability of the kept branch: all `P`, then all σ_x `+1`.
    pub keep_probability: f64,
    /// One entry per reduction pattern; entry 0 is the all-`P` pattern.
    pub p_reduce: Vec<ReductionPattern>,
    /// σ_x `+1` probability given the all-`P` pattern.
    pub p_keep: f64,
    pub p_minus: f64,
}

impl SubprotocolResult {
    /// Probability that the pair is dropped: all `P` but some σ_x `-1`.
    pub fn discard_probability(&self) -> f64 {
        self.p_reduce[0].probability - self.keep_probability
    }

    /// Probability that some reduction reports `P⊥`.
    pub fn recycle_probability(&self) -> f64 {
        self.p_reduce[1..].iter().map(|r| r.probability).sum()
    }
}

#[derive(Clone, Debug)]
pub struct RecycleBranch {
    /// Vertices whose reduction reported `P⊥`.
    pub perp: u64,
    /// Measured vertices with σ_z outcome `-1`.
    pub z_minus: u64,
    /// Vertices receiving a Z correction, ascending.
    pub corrections: Vec<usize>,
    /// Normalized post-correction state; zero matrix when impossible.
    pub state: HBState,
    pub probability: f64,
    pub impossible: bool,
}

impl RecycleBranch {
    pub fn correction_mask(&self) -> u64 {
        self.corrections.iter().fold(0, |m, &v| m | (1 << v))
    }
}

/// Precomputed index bookkeeping for one `(target, coloring, color)`.
#[derive(Clone, Debug)]
pub struct Subprotocol {
    target: EdgeSet,
    color: Color,
    n: usize,
    measured: Vec<usize>,
    reduced: Vec<usize>,
    /// `index[m][r]` = basis index with `M` part `m` and `R` part `r`.
    index: Vec<Vec<usize>>,
    /// For each `M` vertex position and `R` vertex position: whether some
    /// edge has that `M` vertex and that `R` vertex as a partner pair.
    partners: Vec<(usize, usize, usize)>,
}

impl Subprotocol {
    pub fn new(target: &EdgeSet, coloring: &Coloring, color: Color) -> PurifyResult<Self> {
        let n = target.n_vertices();
        coloring.validate_for(target)?;
        if !target.is_colorable(coloring) {
            return Err(PurifyError::InvalidColoring(format!(
                "{coloring} is not a proper coloring of {target}"
            )));
        }
        let measured = coloring.vertices_of(color);
        if measured.is_empty() {
            return Err(PurifyError::InvalidColoring(format!("no vertex has color {color}")));
        }
        let reduced: Vec<usize> = (0..n).filter(|v| !measured.contains(v)).collect();
        for e in target.edges() {
            if e.vertices().filter(|v| measured.contains(v)).count() != 1 {
                return Err(PurifyError::UnsupportedTarget(format!(
                    "edge {e} does not contain exactly one vertex of color {color}"
                )));
            }
        }
        let mut index = vec![vec![0usize; 1 << reduced.len()]; 1 << measured.len()];
        for (m, row) in index.iter_mut().enumerate() {
            for (r, k) in row.iter_mut().enumerate() {
                *k = compose(n, &measured, m) | compose(n, &reduced, r);
            }
        }
        let mut partners = Vec::new();
        for e in target.edges() {
            let mi = measured.iter().position(|&v| e.contains(v)).unwrap_or(0);
            let rs: Vec<usize> = reduced.iter().enumerate().filter(|(_, &v)| e.contains(v)).map(|(i, _)| i).collect();
            if let [r1, r2] = rs[..] {
                partners.push((mi, r1, r2));
                partners.push((mi, r2, r1));
            }
        }
        Ok(Subprotocol {
            target: target.clone(),
            color,
            n,
            measured,
            reduced,
            index,
            partners,
        })
    }

    pub fn color(&self) -> Color {
        self.color
    }

    pub fn measured(&self) -> &[usize] {
        &self.measured
    }

    pub fn reduced(&self) -> &[usize] {
        &self.reduced
    }

    fn check_input(&self, sigma: &HBState) -> PurifyResult<()> {
        if sigma.target() != &self.target {
            return Err(PurifyError::UnsupportedTarget(format!(
                "state is written in the basis of {}, protocol targets {}",
                sigma.target(),
                self.target
            )));
        }
        let t = sigma.trace();
        if (t - 1.0).abs() > TRACE_TOLERANCE {
            return Err(PurifyError::NotNormalized(t));
        }
        Ok(())
    }

    fn n_r(&self) -> usize {
        self.reduced.len()
    }

    /// Block `A_{m,m'}[r,r'] = C_{(m,r),(m',r')}`, flattened as `r·L + r'`.
    fn block(&self, c: &Matrix, m: usize, m2: usize) -> Vec<C64> {
        let l = 1 << self.n_r();
        let mut out = Vec::with_capacity(l * l);
        for r in 0..l {
            for r2 in 0..l {
                out.push(c[(self.index[m][r], self.index[m2][r2])]);
            }
        }
        out
    }

    fn store(&self, out: &mut Matrix, m: usize, m2: usize, block: &[C64]) {
        let l = 1 << self.n_r();
        for r in 0..l {
            for r2 in 0..l {
                out[(self.index[m][r], self.index[m2][r2])] = block[r * l + r2];
            }
        }
    }

    /// `S(d) = Σ_m Σ_{r ⊕ r' = d} A_{m,m}[r,r']`.
    fn diagonal_xor_sums(&self, c: &Matrix) -> Vec<C64> {
        let l = 1 << self.n_r();
        let mut s = vec![C64::new(0.0, 0.0); l];
        for row in &self.index {
            for r in 0..l {
                for r2 in 0..l {
                    s[r ^ r2] += c[(row[r], row[r2])];
                }
            }
        }
        s
    }

    /// Reduction-pattern probabilities `P(t) = 2^{-|R|} Σ_d (-1)^{d·t} S(d)²`.
    fn pattern_probabilities(&self, c: &Matrix) -> Vec<ReductionPattern> {
        let l = 1 << self.n_r();
        let mut h: Vec<C64> = self.diagonal_xor_sums(c).into_iter().map(|s| s * s).collect();
        wht(&mut h);
        let scale = 1.0 / l as f64;
        h.iter()
            .enumerate()
            .map(|(t, z)| ReductionPattern {
                perp: self.vertex_mask(&self.reduced, t),
                probability: z.re * scale,
            })
            .collect()
    }

    fn vertex_mask(&self, vertices: &[usize], compact: usize) -> u64 {
        vertices
            .iter()
            .enumerate()
            .filter(|(i, _)| compact & (1 << (vertices.len() - 1 - i)) != 0)
            .fold(0, |m, (_, &v)| m | (1 << v))
    }

    fn compact(&self, vertices: &[usize], mask: u64) -> usize {
        vertices
            .iter()
            .enumerate()
            .filter(|(_, &v)| mask & (1 << v) != 0)
            .fold(0, |c, (i, _)| c | (1 << (vertices.len() - 1 - i)))
    }

    /// Unnormalized kept branch and its probability.
    fn keep_unnormalized(&self, c: &Matrix) -> (Matrix, f64) {
        let nr = self.n_r();
        let l2 = 1usize << (2 * nr);
        let scale = C64::new(1.0 / ((1u64 << nr) as f64 * l2 as f64), 0.0);
        let nm = self.index.len();
        let mut out = Matrix::zeros(c.nrows(), c.ncols());
        for m in 0..nm {
            for m2 in 0..nm {
                let mut a = self.block(c, m, m2);
                wht(&mut a);
                for z in a.iter_mut() {
                    *z = *z * *z;
                }
                wht(&mut a);
                for z in a.iter_mut() {
                    *z *= scale;
                }
                self.store(&mut out, m, m2, &a);
            }
        }
        let p = out.trace().re;
        (out, p)
    }

    /// Single sub-protocol, kept branch only.
    pub fn keep(&self, sigma: &HBState) -> PurifyResult<SubprotocolResult> {
        self.check_input(sigma)?;
        let c = sigma.coeffs();
        let p_reduce = self.pattern_probabilities(c);
        let (out, keep_probability) = self.keep_unnormalized(c);
        if keep_probability < IMPOSSIBLE_BRANCH {
            return Err(PurifyError::ImpossibleBranch);
        }
        let p0 = p_reduce[0].probability;
        let p_keep = keep_probability / p0;
        let kept = HBState::from_coeffs(self.target.clone(), out / C64::new(keep_probability, 0.0))?;
        Ok(SubprotocolResult {
            kept,
            keep_probability,
            p_reduce,
            p_keep,
            p_minus: 1.0 - p_keep,
        })
    }

    /// σ_x `-1` probability given the all-`P` pattern.
    pub fn minus_one_probability(&self, sigma: &HBState) -> PurifyResult<f64> {
        self.check_input(sigma)?;
        let c = sigma.coeffs();
        let p0 = self.pattern_probabilities(c)[0].probability;
        let (_, pk) = self.keep_unnormalized(c);
        if p0 < IMPOSSIBLE_BRANCH {
            return Err(PurifyError::ImpossibleBranch);
        }
        Ok(1.0 - pk / p0)
    }

    /// Z corrections for a branch, as a basis-index mask.
    fn correction_vertices(&self, t: usize, u: usize) -> Vec<usize> {
        let nm = self.measured.len();
        let nr = self.n_r();
        let mut w = 0usize;
        for &(mi, q, other) in &self.partners {
            let um = u & (1 << (nm - 1 - mi)) != 0;
            let to = t & (1 << (nr - 1 - other)) != 0;
            if um && to {
                w ^= 1 << q;
            }
        }
        (0..nr).filter(|q| w & (1 << q) != 0).map(|q| self.reduced[q]).collect()
    }

    /// Kept branch plus every branch with at least one `P⊥`, resolved by a
    /// σ_z measurement of `M` and Z corrections.
    pub fn recycle(&self, sigma: &HBState) -> PurifyResult<(SubprotocolResult, Vec<RecycleBranch>)> {
        let kept = self.keep(sigma)?;
        let branches = self.recycle_branches(sigma, false)?;
        Ok((kept, branches))
    }

    /// All σ_z branches; `include_all_p` also emits the all-`P` pattern.
    pub fn recycle_branches(&self, sigma: &HBState, include_all_p: bool) -> PurifyResult<Vec<RecycleBranch>> {
        self.check_input(sigma)?;
        let c = sigma.coeffs();
        if self
            .target
            .edges()
            .any(|e| e.vertices().filter(|v| self.reduced.contains(v)).count() > 2)
        {
            return Err(PurifyError::UnsupportedTarget(format!(
                "recycling needs at most two reduced vertices per edge, color {}",
                self.color
            )));
        }
        let n = self.n;
        let nm = self.measured.len();
        let nr = self.n_r();
        let l = 1usize << nr;
        let l2 = l * l;
        let blocks_m = 1usize << nm;

        let mut blocks = Vec::with_capacity(blocks_m * blocks_m);
        for m in 0..blocks_m {
            for m2 in 0..blocks_m {
                let mut a = self.block(c, m, m2);
                wht(&mut a);
                blocks.push(a);
            }
        }
        let norm = C64::new(1.0 / ((1u64 << n) as f64 * l2 as f64), 0.0);
        let mut out = Vec::new();
        for t in (if include_all_p { 0 } else { 1 })..l {
            // Pattern phase (-1)^{(r ⊕ r')·t} shifts the transform index by (t, t).
            let shift = (t << nr) | t;
            for u in 0..blocks_m {
                let mut b = vec![C64::new(0.0, 0.0); l2];
                for m in 0..blocks_m {
                    for m2 in 0..blocks_m {
                        let sign = parity((m ^ m2) & u);
                        for (acc, z) in b.iter_mut().zip(&blocks[m * blocks_m + m2]) {
                            if sign {
                                *acc -= z;
                            } else {
                                *acc += z;
                            }
                        }
                    }
                }
                let mut coeffs = Matrix::zeros(c.nrows(), c.ncols());
                for m in 0..blocks_m {
                    for m2 in 0..blocks_m {
                        let a = &blocks[m * blocks_m + m2];
                        let mut prod: Vec<C64> = (0..l2).map(|k| b[k ^ shift] * a[k]).collect();
                        wht(&mut prod);
                        let s = if parity((m ^ m2) & u) { -norm } else { norm };
                        for z in prod.iter_mut() {
                            *z *= s;
                        }
                        self.store(&mut coeffs, m, m2, &prod);
                    }
                }
                let probability = coeffs.trace().re;
                let impossible = probability < IMPOSSIBLE_BRANCH;
                let coeffs = if impossible {
                    Matrix::zeros(c.nrows(), c.ncols())
                } else {
                    coeffs / C64::new(probability, 0.0)
                };
                out.push(RecycleBranch {
                    perp: self.vertex_mask(&self.reduced, t),
                    z_minus: self.vertex_mask(&self.measured, u),
                    corrections: self.correction_vertices(t, u),
                    state: HBState::from_coeffs(self.target.clone(), coeffs)?,
                    probability,
                    impossible,
                });
            }
        }
        Ok(out)
    }

    /// Maps a vertex mask over `R` to the compact pattern index.
    pub fn pattern_index(&self, perp: u64) -> usize {
        self.compact(&self.reduced, perp)
    }
}

fn compose(n: usize, vertices: &[usize], compact: usize) -> usize {
    vertices
        .iter()
        .enumerate()
        .filter(|(i, _)| compact & (1 << (vertices.len() - 1 - i)) != 0)
        .fold(0, |k, (_, &v)| k | vertex_bit(n, v))
}

fn parity(x: usize) -> bool {
    x.count_ones() % 2 == 1
}

/// Unnormalized in-place Walsh-Hadamard transform; length must be a power of two.
pub fn wht(a: &mut [C64]) {
    let len = a.len();
    let mut h = 1;
    while h < len {
        for i in (0..len).step_by(2 * h) {
            for j in i..i + h {
                let (x, y) = (a[j], a[j + h]);
                a[j] = x + y;
                a[j + h] = x - y;
            }
        }
        h *= 2;
    }
}

pub fn subprotocol_keep(sigma: &HBState, color: Color, coloring: &Coloring) -> PurifyResult<SubprotocolResult> {
    Subprotocol::new(sigma.target(), coloring, color)?.keep(sigma)
}

pub fn subprotocol_recycle(sigma: &HBState, color: Color, coloring: &Coloring) -> PurifyResult<(SubprotocolResult, Vec<RecycleBranch>)> {
    Subprotocol::new(sigma.target(), coloring, color)?.recycle(sigma)
}

pub fn minus_one_probability(sigma: &HBState, color: Color, coloring: &Coloring) -> PurifyResult<f64> {
    Subprotocol::new(sigma.target(), coloring, color)?.minus_one_probability(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{self, Branch};
    use crate::states::{NoiseKind, NoiseSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn triple() -> (EdgeSet, Coloring) {
        ("3; {1,2,3}".parse().unwrap(), "ABC".parse().unwrap())
    }

    #[test]
    fn wht_of_delta_is_flat() {
        let mut a = vec![C64::new(0.0, 0.0); 8];
        a[0] = C64::new(1.0, 0.0);
        wht(&mut a);
        assert!(a.iter().all(|z| (z.re - 1.0).abs() < 1e-15));
        wht(&mut a);
        assert!((a[0].re - 8.0).abs() < 1e-15 && a[1..].iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn pure_target_is_a_fixed_point() {
        let (e, col) = triple();
        for c in [Color::A, Color::B, Color::C] {
            let r = subprotocol_keep(&HBState::pure_target(&e), c, &col).unwrap();
            assert!((r.p_keep - 1.0).abs() < 1e-12);
            assert!((r.keep_probability - 0.25).abs() < 1e-12);
            assert!(r.kept.max_diff(&HBState::pure_target(&e)) < 1e-12);
            assert!(r.p_reduce.iter().all(|p| (p.probability - 0.25).abs() < 1e-12));
        }
    }

    #[test]
    fn mismatched_basis_pair_is_discarded() {
        let (e, col) = triple();
        let s = HBState::basis_mixture(&e, &[(0b000, 0.5), (0b100, 0.5)]);
        let r = subprotocol_keep(&s, Color::A, &col).unwrap();
        assert!((r.p_keep - 0.5).abs() < 1e-12);
        // Only equal Alice indices survive; both give Alice index unchanged.
        assert!((r.kept.fidelity().unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn half_mixture_depends_on_color() {
        let (e, col) = triple();
        let s = HBState::basis_mixture(&e, &[(0b000, 0.5), (0b001, 0.5)]);
        assert!((minus_one_probability(&s, Color::C, &col).unwrap() - 0.5).abs() < 1e-12);
        for c in [Color::A, Color::B] {
            let r = subprotocol_keep(&s, c, &col).unwrap();
            assert!((r.p_keep - 1.0).abs() < 1e-12);
            assert!(r.kept.max_diff(&s) < 1e-12);
        }
    }

    #[test]
    fn rejects_unnormalized_and_foreign_states() {
        let (e, col) = triple();
        let s = HBState::pure_target(&e).scaled(0.5);
        assert_eq!(subprotocol_keep(&s, Color::A, &col).unwrap_err(), PurifyError::NotNormalized(0.5));
        let other = HBState::pure_target(&"3; {1,2}".parse().unwrap());
        let p = Subprotocol::new(&e, &col, Color::A).unwrap();
        assert!(matches!(p.keep(&other), Err(PurifyError::UnsupportedTarget(_))));
    }

    #[test]
    fn rejects_bad_colorings_and_targets() {
        let (e, _) = triple();
        let same: Coloring = "AAC".parse().unwrap();
        assert!(matches!(
            Subprotocol::new(&e, &same, Color::A),
            Err(PurifyError::InvalidColoring(_))
        ));
        let short: Coloring = "AB".parse().unwrap();
        assert!(matches!(Subprotocol::new(&e, &short, Color::A), Err(PurifyError::Hypergraph(_))));
        let col: Coloring = "ABC".parse().unwrap();
        let pair: EdgeSet = "3; {1,2,3},{2,3}".parse().unwrap();
        assert!(matches!(
            Subprotocol::new(&pair, &col, Color::A),
            Err(PurifyError::UnsupportedTarget(_))
        ));
        assert!(Subprotocol::new(&pair, &col, Color::B).is_ok());
    }

    #[test]
    fn recycle_corrections_for_two_partner_edges() {
        let (e, col) = triple();
        let p = Subprotocol::new(&e, &col, Color::A).unwrap();
        let branches = p.recycle_branches(&HBState::pure_target(&e), false).unwrap();
        let find = |perp: u64, z: u64| branches.iter().find(|b| b.perp == perp && b.z_minus == z).unwrap();
        assert_eq!(find(0b100, 0b001).corrections, vec![1]);
        assert_eq!(find(0b010, 0b001).corrections, vec![2]);
        assert_eq!(find(0b110, 0b001).corrections, vec![1, 2]);
        for perp in [0b010, 0b100, 0b110] {
            assert!(find(perp, 0).corrections.is_empty());
        }
        assert_eq!(branches.len(), 6);
        for b in &branches {
            assert!(b.state.max_diff(&HBState::pure_target(&e)) < 1e-12);
        }
    }

    #[test]
    fn keep_and_branches_match_dense_oracle() {
        let (e, col) = triple();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let rho = oracle::random_density(3, &mut rng);
            let sigma = HBState::to_hbasis(&rho, &e).unwrap();
            let pair = rho.tensor(&rho).unwrap();
            for color in [Color::A, Color::B, Color::C] {
                let p = Subprotocol::new(&e, &col, color).unwrap();
                let (keep, branches) = p.recycle(&sigma).unwrap();
                let dense = oracle::subprotocol_dense(&pair, &e, &col, color, Branch::KEEP).unwrap();
                assert!((dense.probability - keep.keep_probability).abs() < 1e-12);
                let dense_kept = HBState::to_hbasis(&dense.state, &e).unwrap();
                assert!(dense_kept.max_diff(&keep.kept) < 1e-10);
                for b in &branches {
                    let sel = Branch::SigmaZ {
                        perp: b.perp,
                        minus: b.z_minus,
                        corrections: b.correction_mask(),
                    };
                    let d = oracle::subprotocol_dense(&pair, &e, &col, color, sel).unwrap();
                    assert!((d.probability - b.probability).abs() < 1e-12, "{color} {b:?}");
                    let ds = HBState::to_hbasis(&d.state, &e).unwrap();
                    assert!(ds.max_diff(&b.state) < 1e-10, "{color} perp {:b} z {:b}", b.perp, b.z_minus);
                }
                let total = keep.p_reduce[0].probability + branches.iter().map(|b| b.probability).sum::<f64>();
                assert!((total - 1.0).abs() < 1e-12);
                assert!((keep.recycle_probability() + keep.p_reduce[0].probability - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn white_noise_improves_over_one_round() {
        let (e, col) = triple();
        let s0 = HBState::noisy_target(
            &e,
            NoiseSpec {
                kind: NoiseKind::White,
                p: 0.7,
            },
        )
        .unwrap();
        let mut s = s0.clone();
        for c in [Color::A, Color::B, Color::C] {
            s = subprotocol_keep(&s, c, &col).unwrap().kept;
        }
        assert!(s.fidelity().unwrap() > s0.fidelity().unwrap());
    }
}
