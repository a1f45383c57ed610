//! Mixed states written in the hypergraph basis of a target state, and the
//! three noise channels used to prepare protocol inputs.
//!
//! `c_{k,k'}` is stored as a dense matrix indexed by the integer form of the
//! bit-vectors `k`, `k'` (vertex 0 is the most significant bit).

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hypergraph::{EdgeSet, HypergraphError};
use crate::oracle::{self, DenseState, Matrix, OracleError, C64};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatesError {
    #[error(transparent)]
    Oracle(#[from] OracleError),

    #[error(transparent)]
    Hypergraph(#[from] HypergraphError),

    #[error("coefficient matrix is {rows}x{cols}, expected {dim}x{dim}")]
    DimensionMismatch { dim: usize, rows: usize, cols: usize },

    #[error("state has zero trace")]
    ZeroTrace,

    #[error("noise parameter {0} is outside [0, 1]")]
    NoiseParameter(f64),

    #[error("malformed snapshot: {0}")]
    Snapshot(String),
}

pub type StatesResult<T> = Result<T, StatesError>;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    White,
    Dephasing,
    Depolarizing,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 3] = [NoiseKind::White, NoiseKind::Dephasing, NoiseKind::Depolarizing];
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::White => "white",
            NoiseKind::Dephasing => "dephasing",
            NoiseKind::Depolarizing => "depolarizing",
        })
    }
}

/// A noise channel with weight `p` on the undisturbed state.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub p: f64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, p: f64) -> StatesResult<Self> {
        let spec = NoiseSpec { kind, p };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> StatesResult<()> {
        if (0.0..=1.0).contains(&self.p) {
            Ok(())
        } else {
            Err(StatesError::NoiseParameter(self.p))
        }
    }
}

/// A (possibly subnormalized) state in the hypergraph basis of `target`.
#[derive(Clone, Debug, PartialEq)]
pub struct HBState {
    target: EdgeSet,
    coeffs: Matrix,
}

impl HBState {
    pub fn from_coeffs(target: EdgeSet, coeffs: Matrix) -> StatesResult<Self> {
        let dim = 1usize << target.n_vertices();
        if coeffs.nrows() != dim || coeffs.ncols() != dim {
            return Err(StatesError::DimensionMismatch {
                dim,
                rows: coeffs.nrows(),
                cols: coeffs.ncols(),
            });
        }
        Ok(HBState { target, coeffs })
    }

    /// `|H_0⟩⟨H_0|`.
    pub fn pure_target(target: &EdgeSet) -> Self {
        Self::basis_projector(target, 0)
    }

    /// `|H_k⟩⟨H_k|` for a basis index `k`.
    pub fn basis_projector(target: &EdgeSet, k: usize) -> Self {
        Self::basis_mixture(target, &[(k, 1.0)])
    }

    /// `Σ w |H_k⟩⟨H_k|`.
    pub fn basis_mixture(target: &EdgeSet, terms: &[(usize, f64)]) -> Self {
        let dim = 1 << target.n_vertices();
        let mut coeffs = Matrix::zeros(dim, dim);
        for &(k, w) in terms {
            coeffs[(k, k)] += C64::new(w, 0.0);
        }
        HBState {
            target: target.clone(),
            coeffs,
        }
    }

    /// The noisy target `E(|H_0⟩⟨H_0|, p)`.
    pub fn noisy_target(target: &EdgeSet, noise: NoiseSpec) -> StatesResult<Self> {
        Self::pure_target(target).apply_noise(noise)
    }

    /// `c_{k,k'} = ⟨H_k|ρ|H_k'⟩`.
    pub fn to_hbasis(rho: &DenseState, target: &EdgeSet) -> StatesResult<Self> {
        let dim = 1usize << target.n_vertices();
        if rho.matrix().nrows() != dim {
            return Err(StatesError::DimensionMismatch {
                dim,
                rows: rho.matrix().nrows(),
                cols: rho.matrix().ncols(),
            });
        }
        let b = oracle::basis_matrix(target)?;
        Ok(HBState {
            target: target.clone(),
            coeffs: b.adjoint() * rho.matrix() * &b,
        })
    }

    /// `ρ = Σ c_{k,k'} |H_k⟩⟨H_k'|`.
    pub fn to_dense(&self) -> StatesResult<DenseState> {
        let b = oracle::basis_matrix(&self.target)?;
        Ok(DenseState::from_matrix(&b * &self.coeffs * b.adjoint())?)
    }

    pub fn target(&self) -> &EdgeSet {
        &self.target
    }

    pub fn n_vertices(&self) -> usize {
        self.target.n_vertices()
    }

    pub fn dim(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn coeffs(&self) -> &Matrix {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Matrix {
        self.coeffs
    }

    pub fn coeff(&self, k: usize, k2: usize) -> C64 {
        self.coeffs[(k, k2)]
    }

    pub fn trace(&self) -> f64 {
        self.coeffs.trace().re
    }

    /// `Re c_{0,0} / tr C`.
    pub fn fidelity(&self) -> StatesResult<f64> {
        let t = self.trace();
        if t.abs() < f64::MIN_POSITIVE {
            return Err(StatesError::ZeroTrace);
        }
        Ok(self.coeffs[(0, 0)].re / t)
    }

    pub fn normalized(&self) -> StatesResult<Self> {
        let t = self.trace();
        if t.abs() < f64::MIN_POSITIVE {
            return Err(StatesError::ZeroTrace);
        }
        Ok(self.scaled(1.0 / t))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        HBState {
            target: self.target.clone(),
            coeffs: &self.coeffs * C64::new(factor, 0.0),
        }
    }

    /// Probability-weighted sum of states sharing a target.
    pub fn mixture<'a, I>(target: &EdgeSet, parts: I) -> StatesResult<Self>
    where
        I: IntoIterator<Item = (f64, &'a HBState)>,
    {
        let dim = 1usize << target.n_vertices();
        let mut coeffs = Matrix::zeros(dim, dim);
        for (w, s) in parts {
            if s.dim() != dim {
                return Err(StatesError::DimensionMismatch {
                    dim,
                    rows: s.dim(),
                    cols: s.dim(),
                });
            }
            coeffs += &s.coeffs * C64::new(w, 0.0);
        }
        Ok(HBState {
            target: target.clone(),
            coeffs,
        })
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (&self.coeffs - self.coeffs.adjoint()).iter().all(|z| z.norm() <= tol)
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        oracle::hermitian_eigenvalues(&self.coeffs).first().is_none_or(|&e| e >= -tol)
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        let d = self.dim();
        (0..d).all(|i| (0..d).all(|j| i == j || self.coeffs[(i, j)].norm() <= tol))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.coeffs[(k, k)].re).collect()
    }

    pub fn max_diff(&self, other: &HBState) -> f64 {
        oracle::max_abs_diff(&self.coeffs, &other.coeffs)
    }

    pub fn trace_distance(&self, other: &HBState) -> f64 {
        oracle::trace_distance(&self.coeffs, &other.coeffs)
    }

    pub fn apply_noise(&self, noise: NoiseSpec) -> StatesResult<Self> {
        noise.validate()?;
        let p = noise.p;
        match noise.kind {
            NoiseKind::White => {
                let dim = self.dim();
                let mix = Matrix::identity(dim, dim) * C64::new((1.0 - p) * self.trace() / dim as f64, 0.0);
                Ok(HBState {
                    target: self.target.clone(),
                    coeffs: &self.coeffs * C64::new(p, 0.0) + mix,
                })
            }
            NoiseKind::Dephasing => {
                // Z_i |H_k⟩ = |H_{k ⊕ e_i}⟩ turns each site into an index flip.
                let n = self.n_vertices();
                let dim = self.dim();
                let (stay, flip) = ((1.0 + p) / 2.0, (1.0 - p) / 2.0);
                let mut c = self.coeffs.clone();
                for v in 0..n {
                    let bit = oracle::vertex_bit(n, v);
                    c = Matrix::from_fn(dim, dim, |i, j| c[(i, j)] * stay + c[(i ^ bit, j ^ bit)] * flip);
                }
                Ok(HBState {
                    target: self.target.clone(),
                    coeffs: c,
                })
            }
            NoiseKind::Depolarizing => {
                let dense = self.to_dense()?.depolarizing(p)?;
                Self::to_hbasis(&dense, &self.target)
            }
        }
    }

    pub fn snapshot(&self) -> StatesResult<StateSnapshot> {
        Ok(StateSnapshot {
            n: self.n_vertices(),
            edges: self.target.to_string(),
            trace: self.trace(),
            fidelity: self.fidelity()?,
            c_matrix: self.coeffs.transpose().iter().map(|z| [z.re, z.im]).collect(),
        })
    }

    pub fn from_snapshot(s: &StateSnapshot) -> StatesResult<Self> {
        let target: EdgeSet = s.edges.parse()?;
        if target.n_vertices() != s.n {
            return Err(StatesError::Snapshot(format!(
                "n = {} but edges describe {} vertices",
                s.n,
                target.n_vertices()
            )));
        }
        let dim = 1usize << s.n;
        if s.c_matrix.len() != dim * dim {
            return Err(StatesError::Snapshot(format!(
                "{} coefficients for dimension {dim}",
                s.c_matrix.len()
            )));
        }
        let coeffs = Matrix::from_row_iterator(dim, dim, s.c_matrix.iter().map(|[re, im]| C64::new(*re, *im)));
        Ok(HBState { target, coeffs })
    }
}

/// JSON form of an [`HBState`]; `c_matrix` is row-major `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub n: usize,
    pub edges: String,
    pub trace: f64,
    pub fidelity: f64,
    pub c_matrix: Vec<[f64; 2]>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn triple() -> EdgeSet {
        "3; {1,2,3}".parse().unwrap()
    }

    #[test]
    fn pure_target_round_trip() {
        let e = triple();
        let dense = oracle::build_state(&e).unwrap().to_density();
        let hb = HBState::to_hbasis(&dense, &e).unwrap();
        assert!(hb.max_diff(&HBState::pure_target(&e)) < 1e-12);
        assert!((hb.fidelity().unwrap() - 1.0).abs() < 1e-12);
        assert!(hb.to_dense().unwrap().max_diff(&dense) < 1e-12);
    }

    #[test]
    fn maximally_mixed_is_basis_independent() {
        let e = triple();
        let hb = HBState::to_hbasis(&DenseState::maximally_mixed(3).unwrap(), &e).unwrap();
        assert!(oracle::max_abs_diff(hb.coeffs(), &(Matrix::identity(8, 8) / C64::new(8.0, 0.0))) < 1e-12);
    }

    #[test]
    fn white_noise_fidelity() {
        let e = triple();
        for p in [0.0, 0.3, 0.7, 1.0] {
            let s = HBState::noisy_target(&e, NoiseSpec::new(NoiseKind::White, p).unwrap()).unwrap();
            assert!((s.fidelity().unwrap() - (p + (1.0 - p) / 8.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn half_mixture_fidelity() {
        let s = HBState::basis_mixture(&triple(), &[(0, 0.5), (1, 0.5)]);
        assert!((s.fidelity().unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_trace_is_an_error() {
        let s = HBState::from_coeffs(triple(), Matrix::zeros(8, 8)).unwrap();
        assert_eq!(s.fidelity(), Err(StatesError::ZeroTrace));
        assert_eq!(s.normalized(), Err(StatesError::ZeroTrace));
    }

    #[test]
    fn coefficient_shape_is_checked() {
        assert!(matches!(
            HBState::from_coeffs(triple(), Matrix::zeros(4, 4)),
            Err(StatesError::DimensionMismatch { dim: 8, .. })
        ));
    }

    #[test]
    fn noise_parameter_range() {
        assert_eq!(NoiseSpec::new(NoiseKind::White, 1.5), Err(StatesError::NoiseParameter(1.5)));
        let s = HBState::pure_target(&triple());
        let bad = NoiseSpec {
            kind: NoiseKind::Dephasing,
            p: -0.1,
        };
        assert_eq!(s.apply_noise(bad), Err(StatesError::NoiseParameter(-0.1)));
    }

    #[test]
    fn p_one_is_identity_for_all_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let e = triple();
        let s = HBState::to_hbasis(&oracle::random_density(3, &mut rng), &e).unwrap();
        for kind in NoiseKind::ALL {
            let out = s.apply_noise(NoiseSpec { kind, p: 1.0 }).unwrap();
            assert!(out.max_diff(&s) < 1e-12, "{kind}");
        }
    }

    #[test]
    fn dephasing_matches_dense_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let e: EdgeSet = "3; {1,2,3},{1}".parse().unwrap();
        let rho = oracle::random_density(3, &mut rng);
        let fast = HBState::to_hbasis(&rho, &e)
            .unwrap()
            .apply_noise(NoiseSpec {
                kind: NoiseKind::Dephasing,
                p: 0.4,
            })
            .unwrap();
        let slow = HBState::to_hbasis(&rho.dephasing(0.4).unwrap(), &e).unwrap();
        assert!(fast.max_diff(&slow) < 1e-12);
    }

    #[test]
    fn depolarizing_creates_coherences() {
        let e = triple();
        let s = HBState::noisy_target(
            &e,
            NoiseSpec {
                kind: NoiseKind::Depolarizing,
                p: 0.8,
            },
        )
        .unwrap();
        assert!(!s.is_diagonal(1e-6));
        assert!(s.is_hermitian(1e-12));
        assert!(s.is_psd(1e-10));
        assert!((s.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn snapshot_round_trip() {
        let e = triple();
        let s = HBState::noisy_target(
            &e,
            NoiseSpec {
                kind: NoiseKind::Depolarizing,
                p: 0.9,
            },
        )
        .unwrap();
        let snap = s.snapshot().unwrap();
        assert_eq!(snap.n, 3);
        assert_eq!(snap.edges, "3; {1,2,3}");
        let json = serde_json::to_string(&snap).unwrap();
        let back: StateSnapshot = serde_json::from_str(&json).unwrap();
        assert_eq!(HBState::from_snapshot(&back).unwrap(), s);
        assert_eq!(snap.c_matrix[1], [s.coeff(0, 1).re, s.coeff(0, 1).im]);
    }

    #[test]
    fn noise_kind_serde_names() {
        assert_eq!(serde_json::to_string(&NoiseKind::Depolarizing).unwrap(), "\"depolarizing\"");
        let spec: NoiseSpec = serde_json::from_str(r#"{"kind":"white","p":0.6}"#).unwrap();
        assert_eq!(
            spec,
            NoiseSpec {
                kind: NoiseKind::White,
                p: 0.6
            }
        );
    }
}
