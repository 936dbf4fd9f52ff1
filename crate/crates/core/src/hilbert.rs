//! Computational-basis bookkeeping for chains of qubits.
//!
//! A basis state is a `u64` bitstring. Bit `k` holds site `k`; a set bit is
//! spin up. Charge sectors are the sets of bitstrings with a fixed number of
//! up spins `N`, i.e. fixed `Q = N - L/2`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{domain, Error, Result};

/// Largest chain handled by dense statevectors (2^24 amplitudes, 256 MiB).
pub const MAX_SITES: usize = 24;

/// `binomial(n, k)` for `n <= 64`, exact in `u64` for every case used here.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) is always an integer at this point.
        acc = acc * (n - i) as u64 / (i + 1) as u64;
    }
    acc
}

/// Number of up spins in `bits`.
#[inline]
pub fn weight(bits: u64) -> usize {
    bits.count_ones() as usize
}

/// `+1` if site `site` of `bits` is up, `-1` otherwise.
#[inline]
pub fn z_sign(bits: u64, site: usize) -> f64 {
    if bits >> site & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Exchange the values of sites `i` and `j` in `bits`.
#[inline]
pub fn swap_bits(bits: u64, i: usize, j: usize) -> u64 {
    let x = (bits >> i ^ bits >> j) & 1;
    bits ^ (x << i | x << j)
}

/// All `L`-bit strings of Hamming weight `N`, in increasing integer order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectorBasis {
    sites: usize,
    up: usize,
    states: Vec<u64>,
    /// `choose[n][k] = binomial(n, k)`, used for combinadic ranking.
    choose: Vec<Vec<u64>>,
}

impl SectorBasis {
    pub fn new(sites: usize, up: usize) -> Result<Self> {
        if sites > MAX_SITES {
            return Err(domain!("L = {sites} exceeds the maximum of {MAX_SITES}"));
        }
        if up > sites {
            return Err(domain!("N = {up} out of range for L = {sites}"));
        }
        let choose: Vec<Vec<u64>> = (0..=sites)
            .map(|n| (0..=up + 1).map(|k| binomial(n, k)).collect())
            .collect();
        let mut states = Vec::with_capacity(binomial(sites, up) as usize);
        if up == 0 {
            states.push(0);
        } else {
            // Gosper's hack enumerates fixed-weight words in increasing order.
            let mut v: u64 = (1u64 << up) - 1;
            let limit = 1u64 << sites;
            while v < limit {
                states.push(v);
                let t = v | (v - 1);
                v = (t + 1) | (((!t & (!t).wrapping_neg()) - 1) >> (v.trailing_zeros() + 1));
            }
        }
        Ok(Self {
            sites,
            up,
            states,
            choose,
        })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    /// Number of up spins `N`.
    pub fn up(&self) -> usize {
        self.up
    }

    /// Charge `Q = N - L/2`.
    pub fn charge(&self) -> f64 {
        self.up as f64 - self.sites as f64 / 2.0
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }

    #[inline]
    pub fn state(&self, index: usize) -> u64 {
        self.states[index]
    }

    /// Ordinal of `bits` in [`states`](Self::states), or `None` when it lies
    /// outside the sector.
    #[inline]
    pub fn index_of(&self, bits: u64) -> Option<usize> {
        if bits >> self.sites != 0 || weight(bits) != self.up {
            return None;
        }
        // Colexicographic rank: sum over set bits p_1 < p_2 < ... of C(p_j, j).
        let mut rank = 0u64;
        let mut rest = bits;
        let mut j = 1;
        while rest != 0 {
            let p = rest.trailing_zeros() as usize;
            rank += self.choose[p][j];
            rest &= rest - 1;
            j += 1;
        }
        Some(rank as usize)
    }
}

/// The basis a [`PureState`] is expanded in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Basis {
    /// All `2^L` bitstrings; index equals the bitstring.
    Full { sites: usize },
    /// A single charge sector.
    Sector(Arc<SectorBasis>),
}

impl Basis {
    pub fn sites(&self) -> usize {
        match self {
            Basis::Full { sites } => *sites,
            Basis::Sector(b) => b.sites(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Basis::Full { sites } => 1usize << sites,
            Basis::Sector(b) => b.len(),
        }
    }

    #[inline]
    pub fn bits(&self, index: usize) -> u64 {
        match self {
            Basis::Full { .. } => index as u64,
            Basis::Sector(b) => b.state(index),
        }
    }

    #[inline]
    pub fn index_of(&self, bits: u64) -> Option<usize> {
        match self {
            Basis::Full { sites } => (bits >> sites == 0).then_some(bits as usize),
            Basis::Sector(b) => b.index_of(bits),
        }
    }

    pub fn is_full(&self) -> bool {
        matches!(self, Basis::Full { .. })
    }
}

/// A pure state of `L` qubits as a vector of complex amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    basis: Basis,
    amps: Vec<Complex64>,
}

impl PureState {
    /// Wrap an amplitude vector. The vector is not normalized.
    pub fn from_amplitudes(basis: Basis, amps: Vec<Complex64>) -> Result<Self> {
        if basis.sites() > MAX_SITES {
            return Err(Error::Resource(format!(
                "L = {} exceeds the dense statevector limit of {MAX_SITES}",
                basis.sites()
            )));
        }
        if amps.len() != basis.dim() {
            return Err(domain!(
                "amplitude vector has length {} but the basis has dimension {}",
                amps.len(),
                basis.dim()
            ));
        }
        Ok(Self { basis, amps })
    }

    /// The computational basis state `|bits⟩` on `sites` qubits.
    pub fn product(sites: usize, bits: u64) -> Result<Self> {
        if sites > MAX_SITES {
            return Err(Error::Resource(format!(
                "L = {sites} exceeds the dense statevector limit of {MAX_SITES}"
            )));
        }
        if bits >> sites != 0 {
            return Err(domain!("bitstring {bits:#b} does not fit in {sites} sites"));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << sites];
        amps[bits as usize] = Complex64::new(1.0, 0.0);
        Ok(Self {
            basis: Basis::Full { sites },
            amps,
        })
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn sites(&self) -> usize {
        self.basis.sites()
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    /// Amplitude of computational basis state `bits` (zero outside the basis).
    pub fn amplitude(&self, bits: u64) -> Complex64 {
        self.basis
            .index_of(bits)
            .map_or(Complex64::new(0.0, 0.0), |k| self.amps[k])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Scale to unit norm. Fails on a (numerically) null vector.
    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sqr().sqrt();
        if n < 1e-300 {
            return Err(Error::Numerical("cannot normalize a null state".into()));
        }
        let inv = 1.0 / n;
        self.amps.iter_mut().for_each(|a| *a *= inv);
        Ok(())
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    /// `⟨self|other⟩`. Both states must live in the same basis.
    pub fn inner(&self, other: &PureState) -> Result<Complex64> {
        if self.basis != other.basis {
            return Err(domain!("states are expanded in different bases"));
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// `|⟨self|other⟩|²` for normalized states, comparing through the full
    /// basis when the two bases differ.
    pub fn fidelity(&self, other: &PureState) -> Result<f64> {
        if self.sites() != other.sites() {
            return Err(domain!("states have different numbers of sites"));
        }
        if self.basis == other.basis {
            return Ok(self.inner(other)?.norm_sqr());
        }
        Ok(self.to_full().inner(&other.to_full())?.norm_sqr())
    }

    /// Re-expand in the full `2^L` basis.
    pub fn to_full(&self) -> PureState {
        match &self.basis {
            Basis::Full { .. } => self.clone(),
            Basis::Sector(b) => {
                let mut amps = vec![Complex64::new(0.0, 0.0); 1 << b.sites()];
                for (k, &a) in self.amps.iter().enumerate() {
                    amps[b.state(k) as usize] = a;
                }
                PureState {
                    basis: Basis::Full { sites: b.sites() },
                    amps,
                }
            }
        }
    }

    /// Restrict to a charge sector. Fails if any amplitude outside the sector
    /// exceeds `tol` in modulus.
    pub fn to_sector(&self, sector: Arc<SectorBasis>, tol: f64) -> Result<PureState> {
        if sector.sites() != self.sites() {
            return Err(domain!("sector has a different number of sites"));
        }
        let full = self.to_full();
        let mut inside = 0.0;
        let amps: Vec<Complex64> = sector
            .states()
            .iter()
            .map(|&b| {
                let a = full.amps[b as usize];
                inside += a.norm_sqr();
                a
            })
            .collect();
        let outside = (full.norm_sqr() - inside).max(0.0).sqrt();
        if outside > tol {
            return Err(domain!(
                "state has weight {outside:e} outside the N = {} sector",
                sector.up()
            ));
        }
        PureState::from_amplitudes(Basis::Sector(sector), amps)
    }
}

/// Half-filled Néel state `|↑↓↑↓…↑↓⟩` (site 0 up). Requires even `L`.
pub fn neel_state(sites: usize) -> Result<PureState> {
    if !sites.is_multiple_of(2) {
        return Err(domain!("the half-filled Néel state needs an even L, got {sites}"));
    }
    alternating_state(sites)
}

/// Alternating product state `|↑↓↑…⟩` with site 0 up, for any `L >= 1`.
/// Coincides with [`neel_state`] for even `L`.
pub fn alternating_state(sites: usize) -> Result<PureState> {
    if sites == 0 {
        return Err(domain!("need at least one site"));
    }
    let bits = (0..sites).step_by(2).fold(0u64, |acc, k| acc | 1 << k);
    PureState::product(sites, bits)
}

/// Uniform superposition of all weight-`N` bitstrings, i.e. the maximal-spin
/// state `|L/2, N - L/2⟩`, expanded in the full basis.
pub fn dicke_state(sites: usize, up: usize) -> Result<PureState> {
    Ok(dicke_state_in_sector(Arc::new(SectorBasis::new(sites, up)?)).to_full())
}

/// [`dicke_state`] expanded in its own charge sector.
pub fn dicke_state_in_sector(sector: Arc<SectorBasis>) -> PureState {
    let amp = Complex64::new(1.0 / (sector.len() as f64).sqrt(), 0.0);
    let amps = vec![amp; sector.len()];
    PureState {
        basis: Basis::Sector(sector),
        amps,
    }
}

/// Expectation of `Σ_i Sᶻ_i` for a normalized state.
pub fn total_sz(state: &PureState) -> f64 {
    // Accumulate weight per charge so a single-sector state gives N - L/2 exactly.
    let l = state.sites();
    let mut by_charge = vec![0.0; l + 1];
    for (k, a) in state.amps.iter().enumerate() {
        by_charge[weight(state.basis.bits(k))] += a.norm_sqr();
    }
    let total: f64 = by_charge.iter().sum();
    let half = l as f64 / 2.0;
    by_charge
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0)
        .map(|(n, p)| (p / total) * (n as f64 - half))
        .sum()
}
