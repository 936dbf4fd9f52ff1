//! The trajectory-averaged dynamics as a linear map on vectorized density
//! matrices.
//!
//! A density matrix `ρ = Σ ρ_ab |a⟩⟨b|` is stored as `|ρ⟩⟩ = Σ ρ_ab |a⟩⊗|b⟩`
//! and a Kraus term `K ρ K†` becomes `(K ⊗ K*) |ρ⟩⟩`. One elementary step of
//! the circuit is the superoperator
//!
//! ```text
//! 𝒞 = p_s/(L-1) Σ_i [(Π⁺_i)⊗² + (σᶻ_i Π⁻_i)⊗²]
//!   + 1/(2L) Σ_i [(1 - p_s) 𝟙⊗² + Σ_μ p_μ (σ^μ_i)⊗²]
//! ```
//!
//! Every entry of `𝒞` is real in the computational basis (including the
//! `σʸ ⊗ σʸ*` terms), so matrices are stored as `f64`; vectors stay complex.
//!
//! Symmetry blocks shrink the problem:
//! * [`Block::Charge`]: `Q_ket = Q_bra = Q`, invariant when `p_x = p_y = 0`
//!   (every Kraus operator commutes with `Σ Sᶻ`).
//! * [`Block::Balanced`]: `Q_ket = Q_bra` for any `Q`, invariant when
//!   `p_x = p_y`, since `σˣρσˣ + σʸρσʸ` is covariant under rotations about z.

mod eigen;
mod sparse;

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

pub use eigen::{complex_schur, dense_eigenvalues, krylov_schur, sort_by_modulus, KrylovOptions, KrylovResult};
pub use sparse::CsrMatrix;

use crate::error::{domain, Error, Result};
use crate::hilbert::{swap_bits, z_sign, PureState, SectorBasis};
use crate::ops::Axis;
use crate::trajectory::ModelParams;

/// Largest doubled-space dimension that may be assembled (`4^9`).
pub const MAX_DOUBLED_DIM: usize = 1 << 18;
/// Steady states below this dimension use a dense linear solve.
pub const DENSE_STEADY_LIMIT: usize = 1500;
/// Spectra below this dimension use a dense Schur decomposition.
pub const DENSE_SPECTRUM_LIMIT: usize = 256;
/// Eigenvalues with modulus above `1 - UNIT_CIRCLE_TOL` count as steady.
pub const UNIT_CIRCLE_TOL: f64 = 1e-9;

/// Which block of the doubled Hilbert space is represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Block {
    /// All `4^L` pairs `(a, b)`.
    Full,
    /// Ket and bra both have `up` up spins.
    Charge { up: usize },
    /// Ket and bra have equal (arbitrary) numbers of up spins.
    Balanced,
}

/// Index maps between positions in a block and bitstring pairs `(a, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubledBasis {
    sites: usize,
    block: Block,
    /// Sectors making up the block, with their offsets.
    sectors: Vec<(usize, Arc<SectorBasis>)>,
    dim: usize,
}

impl DoubledBasis {
    pub fn new(sites: usize, block: Block) -> Result<Self> {
        if sites == 0 || sites > 12 {
            return Err(domain!("doubled basis supports 1 ≤ L ≤ 12, got {sites}"));
        }
        let (sectors, dim) = match block {
            Block::Full => (Vec::new(), 1usize << (2 * sites)),
            Block::Charge { up } => {
                let s = Arc::new(SectorBasis::new(sites, up)?);
                let d = s.len() * s.len();
                (vec![(0, s)], d)
            }
            Block::Balanced => {
                let mut off = 0;
                let mut v = Vec::new();
                for up in 0..=sites {
                    let s = Arc::new(SectorBasis::new(sites, up)?);
                    let d = s.len() * s.len();
                    v.push((off, s));
                    off += d;
                }
                (v, off)
            }
        };
        Ok(Self {
            sites,
            block,
            sectors,
            dim,
        })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn block(&self) -> Block {
        self.block
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Position of `|a⟩⟨b|`, or `None` outside the block.
    #[inline]
    pub fn index(&self, a: u64, b: u64) -> Option<usize> {
        match self.block {
            Block::Full => {
                let l = self.sites;
                (a >> l == 0 && b >> l == 0).then(|| ((a as usize) << l) | b as usize)
            }
            Block::Charge { .. } => {
                let s = &self.sectors[0].1;
                Some(s.index_of(a)? * s.len() + s.index_of(b)?)
            }
            Block::Balanced => {
                let up = a.count_ones() as usize;
                let (off, s) = self.sectors.get(up)?;
                Some(off + s.index_of(a)? * s.len() + s.index_of(b)?)
            }
        }
    }

    /// Bitstring pair stored at position `k`.
    #[inline]
    pub fn pair(&self, k: usize) -> (u64, u64) {
        match self.block {
            Block::Full => {
                let l = self.sites;
                ((k >> l) as u64, (k & ((1 << l) - 1)) as u64)
            }
            Block::Charge { .. } => {
                let s = &self.sectors[0].1;
                (s.state(k / s.len()), s.state(k % s.len()))
            }
            Block::Balanced => {
                let pos = self.sectors.partition_point(|(off, _)| *off <= k) - 1;
                let (off, s) = &self.sectors[pos];
                let r = k - off;
                (s.state(r / s.len()), s.state(r % s.len()))
            }
        }
    }

    /// `|𝟙⟩⟩` restricted to the block.
    pub fn identity_vector(&self) -> Vec<Complex64> {
        (0..self.dim)
            .map(|k| {
                let (a, b) = self.pair(k);
                Complex64::new(if a == b { 1.0 } else { 0.0 }, 0.0)
            })
            .collect()
    }
}

/// A vectorized operator `|ρ⟩⟩` on one block of the doubled space, in
/// row-major (ket-major) order.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubledVector {
    basis: Arc<DoubledBasis>,
    data: Vec<Complex64>,
}

impl DoubledVector {
    pub fn new(basis: Arc<DoubledBasis>, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != basis.dim() {
            return Err(domain!(
                "vector length {} does not match block dimension {}",
                data.len(),
                basis.dim()
            ));
        }
        Ok(Self { basis, data })
    }

    pub fn basis(&self) -> &Arc<DoubledBasis> {
        &self.basis
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// `|ψ⟩⟨ψ|`. Fails if the state has weight outside the block.
    pub fn projector(basis: Arc<DoubledBasis>, state: &PureState) -> Result<Self> {
        if state.sites() != basis.sites() {
            return Err(domain!("state and basis have different numbers of sites"));
        }
        let full = state.to_full();
        let amps = full.amplitudes();
        let mut data = vec![Complex64::new(0.0, 0.0); basis.dim()];
        let mut captured = 0.0;
        for (k, d) in data.iter_mut().enumerate() {
            let (a, b) = basis.pair(k);
            *d = amps[a as usize] * amps[b as usize].conj();
            captured += d.norm_sqr();
        }
        let total = full.norm_sqr().powi(2);
        if (total - captured).abs() > 1e-10 {
            return Err(domain!("state has weight outside the {:?} block", basis.block()));
        }
        Self::new(basis, data)
    }

    /// `⟨⟨𝟙|ρ⟩⟩ = Tr ρ`.
    pub fn trace(&self) -> Complex64 {
        (0..self.data.len())
            .filter(|&k| {
                let (a, b) = self.basis.pair(k);
                a == b
            })
            .map(|k| self.data[k])
            .sum()
    }

    /// `⟨⟨self|other⟩⟩ = Tr(self† other)`.
    pub fn inner(&self, other: &DoubledVector) -> Result<Complex64> {
        if self.basis != other.basis {
            return Err(domain!("vectors live in different blocks"));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum())
    }

    /// `|ρ†⟩⟩ = (T|ρ⟩⟩)*` where `T` exchanges the two copies.
    pub fn dagger(&self) -> DoubledVector {
        let data = (0..self.data.len())
            .map(|k| {
                let (a, b) = self.basis.pair(k);
                let t = self.basis.index(b, a).expect("blocks are closed under transposition");
                self.data[t].conj()
            })
            .collect();
        DoubledVector {
            basis: self.basis.clone(),
            data,
        }
    }

    /// Largest entry of `|ρ⟩⟩ - |ρ†⟩⟩`.
    pub fn hermiticity_defect(&self) -> f64 {
        self.dagger()
            .data
            .iter()
            .zip(&self.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Dense `2^L × 2^L` matrix, zero outside the block.
    pub fn to_full_matrix(&self) -> DMatrix<Complex64> {
        let d = 1usize << self.basis.sites();
        let mut m = DMatrix::zeros(d, d);
        for (k, v) in self.data.iter().enumerate() {
            let (a, b) = self.basis.pair(k);
            m[(a as usize, b as usize)] = *v;
        }
        m
    }

    fn scaled(mut self, s: Complex64) -> Self {
        self.data.iter_mut().for_each(|x| *x *= s);
        self
    }
}

/// `|ρ⟩⟩` for a matrix given in the block's native indexing: `2^L × 2^L`
/// for [`Block::Full`] and [`Block::Balanced`] (entries outside the block
/// must vanish), sector dimension for [`Block::Charge`].
pub fn vectorize(basis: Arc<DoubledBasis>, rho: &DMatrix<Complex64>) -> Result<DoubledVector> {
    if rho.nrows() != rho.ncols() {
        return Err(domain!("density matrix must be square"));
    }
    let native = native_dim(&basis);
    if rho.nrows() != native {
        return Err(domain!(
            "matrix dimension {} does not match {native} for block {:?}",
            rho.nrows(),
            basis.block()
        ));
    }
    let data = match basis.block() {
        Block::Full => {
            let d = native;
            (0..d * d).map(|k| rho[(k / d, k % d)]).collect()
        }
        Block::Charge { .. } => {
            let d = native;
            (0..d * d).map(|k| rho[(k / d, k % d)]).collect()
        }
        Block::Balanced => {
            let mut inside = 0.0;
            let data: Vec<Complex64> = (0..basis.dim())
                .map(|k| {
                    let (a, b) = basis.pair(k);
                    let v = rho[(a as usize, b as usize)];
                    inside += v.norm_sqr();
                    v
                })
                .collect();
            if (rho.norm_squared() - inside).abs() > 1e-20 + 1e-12 * inside {
                return Err(domain!("matrix has weight outside the balanced block"));
            }
            data
        }
    };
    DoubledVector::new(basis, data)
}

/// Inverse of [`vectorize`].
pub fn unvectorize(v: &DoubledVector) -> DMatrix<Complex64> {
    match v.basis.block() {
        Block::Charge { .. } => {
            let d = native_dim(&v.basis);
            DMatrix::from_fn(d, d, |r, c| v.data[r * d + c])
        }
        _ => v.to_full_matrix(),
    }
}

fn native_dim(basis: &DoubledBasis) -> usize {
    match basis.block() {
        Block::Charge { .. } => (basis.dim() as f64).sqrt().round() as usize,
        _ => 1usize << basis.sites(),
    }
}

/// Kraus operators of one elementary step (before weighting).
#[derive(Debug, Clone, Copy, PartialEq)]
enum Kraus {
    Identity,
    /// `Π⁺` on bond `i`.
    Even(usize),
    /// `σᶻ_i Π⁻` on bond `i`.
    OddWithFeedback(usize),
    Pauli(usize, Axis),
}

impl Kraus {
    /// Nonzero entries `(a, K_{c a})` of row `c`.
    fn row(self, c: u64, out: &mut Vec<(u64, Complex64)>) {
        out.clear();
        let one = Complex64::new(1.0, 0.0);
        match self {
            Kraus::Identity => out.push((c, one)),
            Kraus::Even(i) => {
                let s = swap_bits(c, i, i + 1);
                if s == c {
                    out.push((c, one));
                } else {
                    out.push((c, one * 0.5));
                    out.push((s, one * 0.5));
                }
            }
            Kraus::OddWithFeedback(i) => {
                let s = swap_bits(c, i, i + 1);
                if s != c {
                    let z = z_sign(c, i);
                    out.push((c, one * (0.5 * z)));
                    out.push((s, one * (-0.5 * z)));
                }
            }
            Kraus::Pauli(i, Axis::X) => out.push((c ^ 1 << i, one)),
            Kraus::Pauli(i, Axis::Y) => {
                // ⟨↑|σʸ|↓⟩ = -i, ⟨↓|σʸ|↑⟩ = i
                let v = if c >> i & 1 == 1 {
                    Complex64::new(0.0, -1.0)
                } else {
                    Complex64::new(0.0, 1.0)
                };
                out.push((c ^ 1 << i, v));
            }
            Kraus::Pauli(i, Axis::Z) => out.push((c, one * z_sign(c, i))),
        }
    }
}

fn kraus_terms(params: &ModelParams) -> Vec<(f64, Kraus)> {
    let l = params.sites;
    let mut terms = Vec::new();
    if params.p_s > 0.0 {
        let w = params.p_s / (l - 1) as f64;
        for i in 0..l - 1 {
            terms.push((w, Kraus::Even(i)));
            terms.push((w, Kraus::OddWithFeedback(i)));
        }
    }
    if params.p_s < 1.0 {
        terms.push(((1.0 - params.p_s) / 2.0, Kraus::Identity));
    }
    for (axis, p) in [(Axis::X, params.p_x), (Axis::Y, params.p_y), (Axis::Z, params.p_z)] {
        if p > 0.0 {
            for i in 0..l {
                terms.push((p / (2 * l) as f64, Kraus::Pauli(i, axis)));
            }
        }
    }
    terms
}

/// The elementary-step channel restricted to one block.
#[derive(Debug, Clone)]
pub struct Superoperator {
    basis: Arc<DoubledBasis>,
    params: ModelParams,
    matrix: CsrMatrix,
}

/// Assemble `𝒞` (or `𝒞′`) for `params` on `block`.
pub fn build_superoperator(params: &ModelParams, block: Block) -> Result<Superoperator> {
    params.validate()?;
    match block {
        Block::Charge { .. } if !params.conserves_charge() => {
            return Err(domain!(
                "a charge block needs p_x = p_y = 0 (got p_x = {}, p_y = {})",
                params.p_x,
                params.p_y
            ))
        }
        Block::Balanced if params.p_x != params.p_y => {
            return Err(domain!(
                "the balanced block needs p_x = p_y (got {} and {})",
                params.p_x,
                params.p_y
            ))
        }
        _ => {}
    }
    if params.sites > 12 {
        return Err(Error::Resource(format!(
            "L = {} is too large for a channel",
            params.sites
        )));
    }
    let dim = match block {
        Block::Full => 1usize << (2 * params.sites),
        Block::Charge { up } => {
            let d = crate::hilbert::binomial(params.sites, up.min(params.sites)) as usize;
            d * d
        }
        Block::Balanced => crate::hilbert::binomial(2 * params.sites, params.sites) as usize,
    };
    if dim > MAX_DOUBLED_DIM {
        return Err(Error::Resource(format!(
            "block dimension {dim} exceeds the budget of {MAX_DOUBLED_DIM}"
        )));
    }
    let basis = Arc::new(DoubledBasis::new(params.sites, block)?);
    let terms = kraus_terms(params);

    // Row (c, d): S_{(c,d),(a,b)} = Σ_K w K_{ca} conj(K_{db}).
    let rows: Vec<Vec<(u32, f64)>> = (0..basis.dim())
        .into_par_iter()
        .with_min_len(64)
        .map_init(
            || (Vec::new(), Vec::new()),
            |(rc, rd), row| {
                let (c, d) = basis.pair(row);
                let mut entries = Vec::new();
                for &(w, k) in &terms {
                    k.row(c, rc);
                    k.row(d, rd);
                    for &(a, ka) in rc.iter() {
                        for &(b, kb) in rd.iter() {
                            let v = ka * kb.conj() * w;
                            debug_assert!(v.im.abs() < 1e-14);
                            // Outside the balanced block the σˣ and σʸ terms
                            // cancel pairwise (p_x = p_y was checked above).
                            if let Some(col) = basis.index(a, b) {
                                entries.push((col as u32, v.re));
                            }
                        }
                    }
                }
                entries
            },
        )
        .collect();
    let matrix = CsrMatrix::from_rows(basis.dim(), rows);
    Ok(Superoperator {
        basis,
        params: *params,
        matrix,
    })
}

impl Superoperator {
    pub fn basis(&self) -> &Arc<DoubledBasis> {
        &self.basis
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// One elementary step `𝒞|ρ⟩⟩`.
    pub fn apply(&self, rho: &DoubledVector) -> Result<DoubledVector> {
        if rho.basis != self.basis {
            return Err(domain!("vector and superoperator live in different blocks"));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim()];
        self.matrix.mul_vec(&rho.data, &mut out);
        DoubledVector::new(self.basis.clone(), out)
    }

    /// `𝒞^steps |ρ⟩⟩`.
    pub fn evolve(&self, rho: &DoubledVector, steps: usize) -> Result<DoubledVector> {
        let mut cur = rho.clone();
        for _ in 0..steps {
            cur = self.apply(&cur)?;
        }
        Ok(cur)
    }

    /// `⟨⟨𝟙|𝒞` as a vector; equals `⟨⟨𝟙|` for a trace-preserving map.
    pub fn left_trace_row(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim()];
        for r in 0..self.dim() {
            let (c, d) = self.basis.pair(r);
            if c == d {
                for (col, v) in self.matrix.row(r) {
                    acc[col] += v;
                }
            }
        }
        acc
    }

    /// Largest deviation of `⟨⟨𝟙|𝒞` from `⟨⟨𝟙|`.
    pub fn trace_defect(&self) -> f64 {
        let ident = self.basis.identity_vector();
        self.left_trace_row()
            .iter()
            .zip(&ident)
            .map(|(a, b)| (a - b.re).abs())
            .fold(0.0, f64::max)
    }

    /// Dense real matrix (small blocks only).
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        if self.dim() > 5000 {
            return Err(Error::Resource(format!(
                "dense superoperator of dimension {} is too large",
                self.dim()
            )));
        }
        Ok(self.matrix.to_dense())
    }
}

/// Result of [`steady_state`].
#[derive(Debug, Clone)]
pub struct SteadyState {
    pub rho: DoubledVector,
    /// `‖𝒞ρ - ρ‖₁` over vector entries.
    pub residual: f64,
    /// More than one eigenvalue on the unit circle was detected.
    pub degenerate: bool,
}

fn residual_l1(s: &Superoperator, rho: &DoubledVector) -> Result<f64> {
    let next = s.apply(rho)?;
    Ok(next.data.iter().zip(&rho.data).map(|(a, b)| (a - b).norm()).sum())
}

fn normalize_trace(mut v: DoubledVector) -> Result<DoubledVector> {
    let tr = v.trace();
    if tr.norm() < 1e-300 {
        return Err(Error::Numerical("steady-state candidate is traceless".into()));
    }
    v = v.scaled(Complex64::new(1.0, 0.0) / tr);
    // Symmetrize away round-off.
    let dag = v.dagger();
    v.data.iter_mut().zip(&dag.data).for_each(|(a, b)| *a = (*a + b) * 0.5);
    Ok(v)
}

/// Trace-one fixed point of `s`.
///
/// Small blocks solve `(𝟙 - 𝒞 + |v⟩⟩⟨⟨𝟙|) x = |v⟩⟩` densely; larger blocks use
/// Krylov-Schur for the unit eigenvalue. When the unit eigenvalue is
/// degenerate, the fixed point reached from the maximally mixed state by
/// repeated application is returned instead.
pub fn steady_state(s: &Superoperator) -> Result<SteadyState> {
    let n = s.dim();
    let ident = s.basis.identity_vector();
    let d = ident.iter().filter(|x| x.re != 0.0).count() as f64;

    if n <= DENSE_STEADY_LIMIT {
        let mut a = s.to_dense()?.map(|x| -x);
        for i in 0..n {
            a[(i, i)] += 1.0;
        }
        let v: Vec<f64> = ident.iter().map(|x| x.re / d).collect();
        for r in 0..n {
            if v[r] != 0.0 {
                for c in 0..n {
                    a[(r, c)] += v[r] * ident[c].re;
                }
            }
        }
        let rhs = nalgebra::DVector::from_vec(v);
        if let Some(x) = a.lu().solve(&rhs) {
            let cand = normalize_trace(DoubledVector::new(
                s.basis.clone(),
                x.iter().map(|&e| Complex64::new(e, 0.0)).collect(),
            )?)?;
            let residual = residual_l1(s, &cand)?;
            if residual < 1e-10 {
                return Ok(SteadyState {
                    rho: cand,
                    residual,
                    degenerate: false,
                });
            }
        }
        return power_steady_state(s, true);
    }

    let opts = KrylovOptions {
        nev: 2,
        ncv: 30,
        tol: 1e-14,
        ..Default::default()
    };
    let res = krylov_schur(n, |x, y| s.matrix.mul_vec(x, y), &opts, true)?;
    if res.values[1].norm() > 1.0 - UNIT_CIRCLE_TOL {
        return power_steady_state(s, true);
    }
    let cand = normalize_trace(DoubledVector::new(s.basis.clone(), res.vectors[0].clone())?)?;
    let mut rho = cand;
    let mut residual = residual_l1(s, &rho)?;
    // A few refinement sweeps clean up Krylov round-off.
    for _ in 0..20 {
        if residual < 1e-12 {
            break;
        }
        rho = normalize_trace(s.apply(&rho)?)?;
        residual = residual_l1(s, &rho)?;
    }
    if residual >= 1e-10 {
        return Err(Error::Numerical(format!(
            "steady state residual {residual:e} above 1e-10"
        )));
    }
    Ok(SteadyState {
        rho,
        residual,
        degenerate: false,
    })
}

fn power_steady_state(s: &Superoperator, degenerate: bool) -> Result<SteadyState> {
    let ident = s.basis.identity_vector();
    let d = ident.iter().filter(|x| x.re != 0.0).count() as f64;
    let mut rho = DoubledVector::new(s.basis.clone(), ident.iter().map(|x| x / d).collect())?;
    let mut residual = residual_l1(s, &rho)?;
    let cap = 2_000_000usize;
    let mut it = 0;
    while residual >= 1e-11 && it < cap {
        for _ in 0..64 {
            rho = s.apply(&rho)?;
        }
        it += 64;
        residual = residual_l1(s, &rho)?;
    }
    if residual >= 1e-10 {
        return Err(Error::Numerical(format!(
            "power iteration stalled with residual {residual:e}"
        )));
    }
    Ok(SteadyState {
        rho: normalize_trace(rho)?,
        residual,
        degenerate,
    })
}

/// Spectral gap of an elementary-step channel.
#[derive(Debug, Clone)]
pub struct GapReport {
    /// Largest-modulus eigenvalue strictly inside the unit disk.
    pub lambda2: Complex64,
    /// `1 - |λ₂|` for one elementary step.
    pub elementary_gap: f64,
    /// `1 - |λ₂|^L` for one circuit step of `L` elementary steps.
    pub circuit_gap: f64,
    /// Eigenvalues found with modulus above `1 - UNIT_CIRCLE_TOL`.
    pub steady_count: usize,
    /// Leading eigenvalues, decreasing in modulus.
    pub leading: Vec<Complex64>,
    /// Set when a charge block shows more than one steady eigenvalue.
    pub degenerate_flag: bool,
}

impl GapReport {
    /// Non-normal channels can relax more slowly than `1/Δ` suggests
    /// (transient growth); the gap bounds only the asymptotic rate.
    pub const NON_NORMALITY_CAVEAT: &'static str =
        "asymptotic decay rate only; non-normal transients are not bounded by the gap";
}

/// `Δ = 1 - |λ₂|` of `s`, where `λ₂` is the largest eigenvalue with modulus
/// below `1 - 1e-9`.
///
/// Above [`DENSE_SPECTRUM_LIMIT`] the eigenvalues come from Krylov-Schur,
/// which resolves each distinct eigenvalue once; `steady_count` is then a
/// lower bound on the multiplicity. Use [`spectrum`] for exact counts.
pub fn spectral_gap(s: &Superoperator) -> Result<GapReport> {
    let n = s.dim();
    let leading = if n <= DENSE_SPECTRUM_LIMIT {
        dense_eigenvalues(&s.to_dense()?)?
    } else {
        let mut nev = 6;
        loop {
            let opts = KrylovOptions {
                nev,
                ncv: (2 * nev + 24).max(40),
                tol: 1e-11,
                ..Default::default()
            };
            let res = krylov_schur(n, |x, y| s.matrix.mul_vec(x, y), &opts, false)?;
            let inside = res.values.iter().filter(|v| v.norm() <= 1.0 - UNIT_CIRCLE_TOL).count();
            // Require a little headroom so conjugate pairs are complete.
            if inside >= 2 || nev >= n || nev >= 96 {
                break res.values;
            }
            nev *= 2;
        }
    };
    let steady_count = leading.iter().filter(|v| v.norm() > 1.0 - UNIT_CIRCLE_TOL).count();
    let lambda2 = *leading
        .iter()
        .find(|v| v.norm() <= 1.0 - UNIT_CIRCLE_TOL)
        .ok_or_else(|| Error::Numerical("no eigenvalue found inside the unit disk".into()))?;
    let m = lambda2.norm();
    Ok(GapReport {
        lambda2,
        elementary_gap: 1.0 - m,
        circuit_gap: 1.0 - m.powi(s.params.sites as i32),
        steady_count,
        leading: leading.into_iter().take(12).collect(),
        degenerate_flag: matches!(s.basis.block(), Block::Charge { .. }) && steady_count > 1,
    })
}

/// Full spectrum of a small block, decreasing in modulus.
pub fn spectrum(s: &Superoperator) -> Result<Vec<Complex64>> {
    if s.dim() > DENSE_SPECTRUM_LIMIT * 4 {
        return Err(Error::Resource(format!(
            "dense spectrum of dimension {} is too large",
            s.dim()
        )));
    }
    dense_eigenvalues(&s.to_dense()?)
}

/// A sum of Pauli strings with complex coefficients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Operator {
    terms: Vec<(Complex64, Vec<(usize, Axis)>)>,
}

impl Operator {
    pub fn identity() -> Self {
        Self {
            terms: vec![(Complex64::new(1.0, 0.0), Vec::new())],
        }
    }

    /// Add `coef · Π σ^axis_site`. Sites within a term must be distinct.
    pub fn term(mut self, coef: f64, factors: &[(usize, Axis)]) -> Self {
        self.terms.push((Complex64::new(coef, 0.0), factors.to_vec()));
        self
    }

    pub fn plus(mut self, other: Operator) -> Self {
        self.terms.extend(other.terms);
        self
    }

    /// `Sᶻ_i Sᶻ_j`.
    pub fn zz(i: usize, j: usize) -> Self {
        Self::default().term(0.25, &[(i, Axis::Z), (j, Axis::Z)])
    }

    /// `Sˣ_i Sˣ_j + Sʸ_i Sʸ_j`.
    pub fn xy(i: usize, j: usize) -> Self {
        Self::default()
            .term(0.25, &[(i, Axis::X), (j, Axis::X)])
            .term(0.25, &[(i, Axis::Y), (j, Axis::Y)])
    }

    /// `S_i · S_j` (`3/4` when `i = j`).
    pub fn spin_spin(i: usize, j: usize) -> Self {
        if i == j {
            return Self::default().term(0.75, &[]);
        }
        Self::xy(i, j).plus(Self::zz(i, j))
    }

    /// `χ = (1/L) Σ_ij S_i · S_j`.
    pub fn susceptibility(sites: usize) -> Self {
        let mut op = Self::default().term(0.75, &[]);
        let w = 2.0 / sites as f64;
        for i in 0..sites {
            for j in i + 1..sites {
                for axis in [Axis::X, Axis::Y, Axis::Z] {
                    op = op.term(0.25 * w, &[(i, axis), (j, axis)]);
                }
            }
        }
        op
    }

    /// Total `Sᶻ`.
    pub fn total_sz(sites: usize) -> Self {
        (0..sites).fold(Self::default(), |op, i| op.term(0.5, &[(i, Axis::Z)]))
    }

    /// `O|a⟩` for one term: `(phase, a')`.
    fn act(factors: &[(usize, Axis)], a: u64) -> (Complex64, u64) {
        let mut phase = Complex64::new(1.0, 0.0);
        let mut bits = a;
        // Rightmost factor acts first.
        for &(site, axis) in factors.iter().rev() {
            let up = bits >> site & 1 == 1;
            match axis {
                Axis::X => bits ^= 1 << site,
                Axis::Y => {
                    // σʸ|↑⟩ = i|↓⟩, σʸ|↓⟩ = -i|↑⟩
                    phase *= if up {
                        Complex64::new(0.0, 1.0)
                    } else {
                        Complex64::new(0.0, -1.0)
                    };
                    bits ^= 1 << site;
                }
                Axis::Z => {
                    if !up {
                        phase = -phase;
                    }
                }
            }
        }
        (phase, bits)
    }
}

/// `Tr[O ρ] = ⟨⟨O†|ρ⟩⟩`. The imaginary part must stay below `1e-9`.
pub fn channel_expectation(rho: &DoubledVector, op: &Operator) -> Result<f64> {
    let l = rho.basis.sites();
    for (_, factors) in &op.terms {
        if factors.iter().any(|&(s, _)| s >= l) {
            return Err(domain!("operator acts on a site outside the chain of {l}"));
        }
    }
    let mut total = Complex64::new(0.0, 0.0);
    for (k, r) in rho.data.iter().enumerate() {
        if r.norm_sqr() == 0.0 {
            continue;
        }
        let (a, b) = rho.basis.pair(k);
        for (coef, factors) in &op.terms {
            let (phase, a2) = Operator::act(factors, a);
            if a2 == b {
                total += coef * phase * r;
            }
        }
    }
    if total.im.abs() > 1e-9 {
        return Err(domain!(
            "expectation has imaginary part {:e}; operator is not Hermitian",
            total.im
        ));
    }
    Ok(total.re)
}

/// `P = Tr ρ² = ⟨⟨ρ|ρ⟩⟩` for Hermitian `ρ`.
pub fn purity(rho: &DoubledVector) -> f64 {
    rho.data.iter().map(|x| x.norm_sqr()).sum()
}

/// Fit `Δ ∝ L^{-z}` by least squares on `(ln L, ln Δ)`; returns `(z, stderr)`.
pub fn gap_exponent_fit(points: &[(usize, f64)]) -> Result<(f64, f64)> {
    if points.len() < 3 {
        return Err(domain!("need at least 3 points, got {}", points.len()));
    }
    if points.iter().any(|&(l, d)| d <= 0.0 || l == 0) {
        return Err(domain!("gaps and sizes must be positive"));
    }
    let xs: Vec<f64> = points.iter().map(|&(l, _)| (l as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, d)| d.ln()).collect();
    let fit = linear_fit(&xs, &ys)?;
    Ok((-fit.slope, fit.slope_stderr))
}

/// Ordinary least-squares line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub r_squared: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return Err(domain!("linear fit needs at least two paired points"));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(domain!("all abscissae coincide"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let slope_stderr = if n > 2 { (ssr / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ssr / syy };
    Ok(LineFit {
        slope,
        intercept,
        slope_stderr,
        r_squared,
    })
}

#[cfg(test)]
mod tests;
