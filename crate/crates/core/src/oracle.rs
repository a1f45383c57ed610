//! Brute-force computational-basis simulator.
//!
//! Everything here works with explicit `2^n`-dimensional vectors and
//! matrices and is written to be obviously correct rather than fast. It is
//! the ground truth the graphical rules and the coefficient-space protocol
//! maps are checked against.
//!
//! Basis index convention: vertex 0 is the most significant bit.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::hypergraph::{Color, Coloring, Edge, EdgeSet};

pub type C64 = Complex64;
pub type Matrix = DMatrix<C64>;
pub type Vector = DVector<C64>;

/// Resource guard for state construction.
pub const MAX_ORACLE_QUBITS: usize = 12;

/// Branch probabilities below this are reported as impossible.
pub const IMPOSSIBLE_BRANCH: f64 = 1e-14;

const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("{0} qubits exceed the oracle limit of {MAX_ORACLE_QUBITS}")]
    TooLarge(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid gate target: {0}")]
    InvalidTarget(String),

    #[error("invalid coloring: {0}")]
    InvalidColoring(String),
}

pub type OracleResult<T> = Result<T, OracleError>;

/// Bit of vertex `v` inside a basis index on `n` qubits.
pub fn vertex_bit(n: usize, v: usize) -> usize {
    1 << (n - 1 - v)
}

/// Converts a vertex mask (bit `v` = vertex `v`) into a basis-index mask.
pub fn index_mask(n: usize, vertices: u64) -> usize {
    (0..n).filter(|&v| vertices & (1 << v) != 0).fold(0, |m, v| m | vertex_bit(n, v))
}

fn check_size(n: usize) -> OracleResult<()> {
    if n > MAX_ORACLE_QUBITS {
        Err(OracleError::TooLarge(n))
    } else {
        Ok(())
    }
}

fn qubits_of_dim(dim: usize) -> OracleResult<usize> {
    if dim.is_power_of_two() {
        Ok(dim.trailing_zeros() as usize)
    } else {
        Err(OracleError::DimensionMismatch {
            expected: dim.next_power_of_two(),
            got: dim,
        })
    }
}

/// Diagonal of `U_ph`: `(-1)^{#edges fully contained in x}` times the sign.
fn phase_diagonal(e: &EdgeSet) -> Vec<f64> {
    let n = e.n_vertices();
    let masks: Vec<usize> = e.edges().map(|ed| index_mask(n, ed.mask())).collect();
    (0..1usize << n)
        .map(|x| {
            let odd = masks.iter().filter(|&&m| x & m == m).count() % 2 == 1;
            e.sign().value() * if odd { -1.0 } else { 1.0 }
        })
        .collect()
}

/// A pure state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    n: usize,
    amps: Vector,
}

impl PureState {
    pub fn from_amplitudes(amps: Vector) -> OracleResult<Self> {
        let n = qubits_of_dim(amps.len())?;
        Ok(PureState { n, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &Vector {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    pub fn inner(&self, other: &PureState) -> C64 {
        self.amps.dotc(&other.amps)
    }

    pub fn to_density(&self) -> DenseState {
        DenseState {
            n: self.n,
            rho: &self.amps * self.amps.adjoint(),
        }
    }

    pub fn apply(&self, gate: &Gate) -> OracleResult<PureState> {
        let (perm, phase) = gate.monomial(self.n)?;
        let mut out = Vector::zeros(self.amps.len());
        for x in 0..self.amps.len() {
            out[perm[x]] += phase[x] * self.amps[x];
        }
        Ok(PureState { n: self.n, amps: out })
    }

    /// Largest entrywise deviation.
    pub fn max_diff(&self, other: &PureState) -> f64 {
        (&self.amps - &other.amps).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// `∏_e C_e |+⟩^{⊗n}`, times the global sign.
pub fn build_state(e: &EdgeSet) -> OracleResult<PureState> {
    let n = e.n_vertices();
    check_size(n)?;
    let amp = (0.5f64).powf(n as f64 / 2.0);
    let amps = Vector::from_iterator(1 << n, phase_diagonal(e).into_iter().map(|s| C64::new(s * amp, 0.0)));
    Ok(PureState { n, amps })
}

/// `|H_k⟩ = Z^k |H_0⟩` for a bit vector `k` in vertex order.
pub fn basis_state(e: &EdgeSet, k: &[bool]) -> OracleResult<PureState> {
    if k.len() != e.n_vertices() {
        return Err(OracleError::DimensionMismatch {
            expected: e.n_vertices(),
            got: k.len(),
        });
    }
    let mut state = build_state(e)?;
    for (v, _) in k.iter().enumerate().filter(|(_, &b)| b) {
        state = state.apply(&Gate::Z(v))?;
    }
    Ok(state)
}

/// `|H_k⟩` with `k` given as a basis index (vertex 0 is the top bit).
pub fn basis_state_index(e: &EdgeSet, k: usize) -> OracleResult<PureState> {
    let n = e.n_vertices();
    let bits: Vec<bool> = (0..n).map(|v| k & vertex_bit(n, v) != 0).collect();
    basis_state(e, &bits)
}

/// Matrix whose column `k` is `|H_k⟩`.
pub fn basis_matrix(e: &EdgeSet) -> OracleResult<Matrix> {
    let n = e.n_vertices();
    check_size(n)?;
    let dim = 1 << n;
    let mut b = Matrix::zeros(dim, dim);
    for k in 0..dim {
        b.set_column(k, basis_state_index(e, k)?.amplitudes());
    }
    Ok(b)
}

/// A stabilizing operator `S_i = U_ph X_i U_ph†`.
#[derive(Clone, Debug)]
pub struct StabilizerOp {
    pub vertex: usize,
    pub matrix: Matrix,
}

pub fn stabilizer(e: &EdgeSet, i: usize) -> OracleResult<StabilizerOp> {
    let n = e.n_vertices();
    check_size(n)?;
    let diag = phase_diagonal(e);
    let u = Matrix::from_diagonal(&Vector::from_iterator(1 << n, diag.into_iter().map(|s| C64::new(s, 0.0))));
    let x = Gate::X(i).matrix(n)?;
    Ok(StabilizerOp {
        vertex: i,
        matrix: &u * x * u.adjoint(),
    })
}

/// Gates the protocols and tests need. All of them are monomial matrices.
#[derive(Clone, Debug, PartialEq)]
pub enum Gate {
    /// Generalized controlled-Z on the listed qubits.
    Ce(Vec<usize>),
    Z(usize),
    X(usize),
    Y(usize),
    Cnot {
        control: usize,
        target: usize,
    },
    Identity,
}

impl Gate {
    fn check(&self, n: usize) -> OracleResult<()> {
        let bad = |q: usize| q >= n;
        let err = || Err(OracleError::InvalidTarget(format!("{self:?} on {n} qubits")));
        match self {
            Gate::Ce(qs) if qs.is_empty() || qs.iter().any(|&q| bad(q)) => err(),
            Gate::Z(q) | Gate::X(q) | Gate::Y(q) if bad(*q) => err(),
            Gate::Cnot { control, target } if bad(*control) || bad(*target) || control == target => err(),
            _ => Ok(()),
        }
    }

    /// `U|x⟩ = phase[x] |perm[x]⟩`.
    fn monomial(&self, n: usize) -> OracleResult<(Vec<usize>, Vec<C64>)> {
        self.check(n)?;
        let dim = 1usize << n;
        let mut perm: Vec<usize> = (0..dim).collect();
        let mut phase = vec![ONE; dim];
        match *self {
            Gate::Ce(ref qs) => {
                let m = qs.iter().fold(0, |m, &q| m | vertex_bit(n, q));
                for x in 0..dim {
                    if x & m == m {
                        phase[x] = -ONE;
                    }
                }
            }
            Gate::Z(q) => {
                for x in 0..dim {
                    if x & vertex_bit(n, q) != 0 {
                        phase[x] = -ONE;
                    }
                }
            }
            Gate::X(q) => {
                for (x, p) in perm.iter_mut().enumerate() {
                    *p = x ^ vertex_bit(n, q);
                }
            }
            Gate::Y(q) => {
                // Y|0⟩ = i|1⟩, Y|1⟩ = -i|0⟩
                for x in 0..dim {
                    perm[x] = x ^ vertex_bit(n, q);
                    phase[x] = if x & vertex_bit(n, q) == 0 {
                        C64::new(0.0, 1.0)
                    } else {
                        C64::new(0.0, -1.0)
                    };
                }
            }
            Gate::Cnot { control, target } => {
                for (x, p) in perm.iter_mut().enumerate() {
                    if x & vertex_bit(n, control) != 0 {
                        *p = x ^ vertex_bit(n, target);
                    }
                }
            }
            Gate::Identity => {}
        }
        Ok((perm, phase))
    }

    pub fn matrix(&self, n: usize) -> OracleResult<Matrix> {
        let (perm, phase) = self.monomial(n)?;
        let dim = 1 << n;
        let mut u = Matrix::zeros(dim, dim);
        for x in 0..dim {
            u[(perm[x], x)] = phase[x];
        }
        Ok(u)
    }
}

/// A density matrix on `n` qubits, possibly subnormalized.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseState {
    n: usize,
    rho: Matrix,
}

impl DenseState {
    pub fn from_matrix(rho: Matrix) -> OracleResult<Self> {
        if rho.nrows() != rho.ncols() {
            return Err(OracleError::DimensionMismatch {
                expected: rho.nrows(),
                got: rho.ncols(),
            });
        }
        let n = qubits_of_dim(rho.nrows())?;
        Ok(DenseState { n, rho })
    }

    pub fn maximally_mixed(n: usize) -> OracleResult<Self> {
        check_size(n)?;
        let dim = 1 << n;
        Ok(DenseState {
            n,
            rho: Matrix::identity(dim, dim) / C64::new(dim as f64, 0.0),
        })
    }

    pub fn zero(n: usize) -> Self {
        DenseState {
            n,
            rho: Matrix::zeros(1 << n, 1 << n),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &Matrix {
        &self.rho
    }

    pub fn into_matrix(self) -> Matrix {
        self.rho
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn normalized(&self) -> DenseState {
        let t = self.trace();
        DenseState {
            n: self.n,
            rho: &self.rho / C64::new(t, 0.0),
        }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (&self.rho - self.rho.adjoint()).iter().all(|z| z.norm() <= tol)
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.rho)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn max_diff(&self, other: &DenseState) -> f64 {
        max_abs_diff(&self.rho, &other.rho)
    }

    /// `ρ ⊗ σ`, with `self` on the leading qubits.
    pub fn tensor(&self, other: &DenseState) -> OracleResult<DenseState> {
        check_size(self.n + other.n)?;
        Ok(DenseState {
            n: self.n + other.n,
            rho: self.rho.kronecker(&other.rho),
        })
    }

    /// `U ρ U†`.
    pub fn apply_unitary(&self, gate: &Gate) -> OracleResult<DenseState> {
        let (perm, phase) = gate.monomial(self.n)?;
        let dim = self.rho.nrows();
        let mut out = Matrix::zeros(dim, dim);
        for j in 0..dim {
            for i in 0..dim {
                out[(perm[i], perm[j])] = phase[i] * self.rho[(i, j)] * phase[j].conj();
            }
        }
        Ok(DenseState { n: self.n, rho: out })
    }

    /// `K ρ K†` and its trace; the caller normalizes.
    pub fn apply_kraus(&self, k: &Matrix) -> OracleResult<(DenseState, f64)> {
        let (rho, p) = apply_kraus(&self.rho, k)?;
        let n = qubits_of_dim(rho.nrows())?;
        Ok((DenseState { n, rho }, p))
    }

    /// Mixture `Σ_g w_g U_g ρ U_g†`.
    fn mix(&self, terms: &[(f64, Gate)]) -> OracleResult<DenseState> {
        let mut out = Matrix::zeros(self.rho.nrows(), self.rho.ncols());
        for (w, g) in terms {
            out += self.apply_unitary(g)?.rho * C64::new(*w, 0.0);
        }
        Ok(DenseState { n: self.n, rho: out })
    }

    /// `p ρ + (1-p) tr(ρ) 1/2^n`.
    pub fn white_noise(&self, p: f64) -> DenseState {
        let dim = self.rho.nrows();
        let id = Matrix::identity(dim, dim) * C64::new((1.0 - p) * self.trace() / dim as f64, 0.0);
        DenseState {
            n: self.n,
            rho: &self.rho * C64::new(p, 0.0) + id,
        }
    }

    /// Single-site dephasing `p ρ + (1-p)/2 (ρ + Z ρ Z)` on every qubit.
    pub fn dephasing(&self, p: f64) -> OracleResult<DenseState> {
        let mut state = self.clone();
        for q in 0..self.n {
            state = state.mix(&[(p + (1.0 - p) / 2.0, Gate::Identity), ((1.0 - p) / 2.0, Gate::Z(q))])?;
        }
        Ok(state)
    }

    /// Single-site depolarizing `p ρ + (1-p)/4 (ρ + XρX + YρY + ZρZ)` on
    /// every qubit.
    pub fn depolarizing(&self, p: f64) -> OracleResult<DenseState> {
        let mut state = self.clone();
        let q4 = (1.0 - p) / 4.0;
        for q in 0..self.n {
            state = state.mix(&[(p + q4, Gate::Identity), (q4, Gate::X(q)), (q4, Gate::Y(q)), (q4, Gate::Z(q))])?;
        }
        Ok(state)
    }

    /// Comma-separated `re,im` pairs, one matrix row per line.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for i in 0..self.rho.nrows() {
            let row: Vec<String> = (0..self.rho.ncols())
                .map(|j| format!("{},{}", self.rho[(i, j)].re, self.rho[(i, j)].im))
                .collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn hermitian_eigenvalues(m: &Matrix) -> Vec<f64> {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `½ ‖a - b‖₁` for Hermitian `a`, `b`.
pub fn trace_distance(a: &Matrix, b: &Matrix) -> f64 {
    0.5 * hermitian_eigenvalues(&(a - b)).iter().map(|x| x.abs()).sum::<f64>()
}

/// `K ρ K†` and its trace.
pub fn apply_kraus(rho: &Matrix, k: &Matrix) -> OracleResult<(Matrix, f64)> {
    if k.ncols() != rho.nrows() || rho.nrows() != rho.ncols() {
        return Err(OracleError::DimensionMismatch {
            expected: rho.nrows(),
            got: k.ncols(),
        });
    }
    let out = k * rho * k.adjoint();
    let p = out.trace().re;
    Ok((out, p))
}

/// Reduction operator on qubits `(v1, v2)` of an `n`-qubit register:
/// `|0⟩⟨00| + |1⟩⟨11|`, or `|0⟩⟨10| + |1⟩⟨01|` when `perp` is set. Qubit
/// `v1` disappears and the surviving qubit carries the value of `v2`.
pub fn reduction_kraus(n: usize, v1: usize, v2: usize, perp: bool) -> OracleResult<Matrix> {
    if v1 >= n || v2 >= n || v1 == v2 {
        return Err(OracleError::InvalidTarget(format!("reduction ({v1},{v2}) on {n} qubits")));
    }
    let mut k = Matrix::zeros(1 << (n - 1), 1 << n);
    let (b1, b2) = (vertex_bit(n, v1), vertex_bit(n, v2));
    for x in 0..1usize << n {
        let equal = (x & b1 != 0) == (x & b2 != 0);
        if equal != perp {
            k[(remove_bit(x, n - 1 - v1), x)] = ONE;
        }
    }
    Ok(k)
}

/// Removes bit position `pos` (LSB = 0) from `x`.
fn remove_bit(x: usize, pos: usize) -> usize {
    let low = x & ((1 << pos) - 1);
    ((x >> (pos + 1)) << pos) | low
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum PauliBasis {
    X,
    Z,
}

/// Projective single-qubit measurement on qubit `q` that also removes the
/// qubit: `⟨±|_q` for `X`, `⟨0|_q`/`⟨1|_q` for `Z`; `minus` picks the `-1`
/// outcome.
pub fn measurement_kraus(n: usize, q: usize, basis: PauliBasis, minus: bool) -> OracleResult<Matrix> {
    if q >= n {
        return Err(OracleError::InvalidTarget(format!("measurement of {q} on {n} qubits")));
    }
    let mut k = Matrix::zeros(1 << (n - 1), 1 << n);
    let b = vertex_bit(n, q);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for x in 0..1usize << n {
        let one = x & b != 0;
        let amp = match basis {
            PauliBasis::X if one && minus => -h,
            PauliBasis::X => h,
            PauliBasis::Z if one == minus => 1.0,
            PauliBasis::Z => 0.0,
        };
        if amp != 0.0 {
            k[(remove_bit(x, n - 1 - q), x)] = C64::new(amp, 0.0);
        }
    }
    Ok(k)
}

/// Which outcome of a two-copy sub-protocol to post-select on.
///
/// Masks are vertex masks (bit `v` = vertex `v`) of the single-copy target.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Branch {
    /// All reductions gave `P`; the measured-color qubits of the first copy
    /// are measured in `σ_x`, with `-1` on the vertices in `minus`.
    SigmaX { minus: u64 },
    /// Reductions gave `P⊥` on the vertices in `perp` (and `P` elsewhere);
    /// the measured-color qubits are measured in `σ_z` with `-1` on `minus`;
    /// afterwards `Z` is applied on every vertex in `corrections`.
    SigmaZ { perp: u64, minus: u64, corrections: u64 },
}

impl Branch {
    pub const KEEP: Branch = Branch::SigmaX { minus: 0 };
}

/// Outcome of [`subprotocol_dense`].
#[derive(Clone, Debug)]
pub struct DenseBranch {
    /// Normalized post-selected state, or the zero matrix if impossible.
    pub state: DenseState,
    pub probability: f64,
    pub impossible: bool,
}

/// Runs one sub-protocol on a joint `2n`-qubit state by explicit matrices.
///
/// The first copy occupies qubits `0..n`, the second `n..2n`. For every
/// vertex `v` of the measured color a `CNOT(v, v+n)` is applied and qubit
/// `v` is measured; every other vertex is reduced onto its second-copy
/// partner. The result lives on the second copy.
pub fn subprotocol_dense(
    pair: &DenseState,
    target: &EdgeSet,
    coloring: &Coloring,
    measured: Color,
    branch: Branch,
) -> OracleResult<DenseBranch> {
    let n = target.n_vertices();
    if pair.n_qubits() != 2 * n {
        return Err(OracleError::DimensionMismatch {
            expected: 2 * n,
            got: pair.n_qubits(),
        });
    }
    if !target.is_colorable(coloring) {
        return Err(OracleError::InvalidColoring(format!("{coloring} for {target}")));
    }
    let measured_mask = coloring.vertices_of(measured).into_iter().fold(0u64, |m, v| m | (1 << v));
    if measured_mask == 0 {
        return Err(OracleError::InvalidColoring(format!("no vertex has color {measured}")));
    }
    let (basis, minus, perp, corrections) = match branch {
        Branch::SigmaX { minus } => (PauliBasis::X, minus, 0, 0),
        Branch::SigmaZ { perp, minus, corrections } => (PauliBasis::Z, minus, perp, corrections),
    };
    if minus & !measured_mask != 0 || perp & measured_mask != 0 || corrections >> n != 0 {
        return Err(OracleError::InvalidTarget(format!("branch {branch:?} for color {measured}")));
    }

    let mut state = pair.clone();
    for v in 0..n {
        if measured_mask & (1 << v) != 0 {
            state = state.apply_unitary(&Gate::Cnot { control: v, target: v + n })?;
        }
    }
    // Remove first-copy qubits from the top down so lower labels stay put.
    // With qubits 0..=v of the first copy left, the partner of v sits at 2v+1.
    let mut rho = state.into_matrix();
    for v in (0..n).rev() {
        let qubits = v + 1 + n;
        let k = if measured_mask & (1 << v) != 0 {
            measurement_kraus(qubits, v, basis, minus & (1 << v) != 0)?
        } else {
            reduction_kraus(qubits, v, 2 * v + 1, perp & (1 << v) != 0)?
        };
        rho = apply_kraus(&rho, &k)?.0;
    }
    let mut out = DenseState { n, rho };
    for v in 0..n {
        if corrections & (1 << v) != 0 {
            out = out.apply_unitary(&Gate::Z(v))?;
        }
    }
    let probability = out.trace();
    if probability < IMPOSSIBLE_BRANCH {
        return Ok(DenseBranch {
            state: DenseState::zero(n),
            probability,
            impossible: true,
        });
    }
    Ok(DenseBranch {
        state: out.normalized(),
        probability,
        impossible: false,
    })
}

/// A random full-rank density matrix `G G† / tr(G G†)` with Gaussian `G`.
pub fn random_density<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DenseState {
    let dim = 1 << n;
    let g = Matrix::from_fn(dim, dim, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let rho = &g * g.adjoint();
    let t = rho.trace();
    DenseState { n, rho: rho / t }
}

/// Edge containing every vertex of the list; convenience for `Gate::Ce`.
pub fn ce_gate(e: Edge) -> Gate {
    Gate::Ce(e.vertices().collect())
}
