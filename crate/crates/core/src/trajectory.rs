//! Stochastic pure-state trajectories of the SWAP-feedback circuit and its
//! Pauli-perturbed variant, plus the observables sampled along them.
//!
//! One elementary step applies a single randomly placed event. One circuit
//! step is `L` elementary steps; observables are sampled only at circuit-step
//! boundaries.
//!
//! Every trajectory owns a ChaCha8 generator. Each elementary step draws, in
//! this order: a uniform branch selector, a uniform location, and a uniform
//! Born sample.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::hilbert::{swap_bits, weight, z_sign, Basis, PureState};
use crate::ops::{pauli_measure, swap_measure_with_feedback, Axis, MeasurementOutcome};

/// Default number of trajectories per ensemble.
pub const DEFAULT_TRAJECTORIES: usize = 100;

/// Probabilities of the four elementary events on an `L`-site chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub sites: usize,
    /// SWAP measurement with feedback at a random bond.
    pub p_s: f64,
    pub p_x: f64,
    pub p_y: f64,
    pub p_z: f64,
}

impl ModelParams {
    pub fn new(sites: usize, p_s: f64, p_x: f64, p_y: f64, p_z: f64) -> Result<Self> {
        let params = Self {
            sites,
            p_s,
            p_x,
            p_y,
            p_z,
        };
        params.validate()?;
        Ok(params)
    }

    /// Pure SWAP-with-feedback dynamics (`p_s = 1`).
    pub fn baseline(sites: usize) -> Result<Self> {
        Self::new(sites, 1.0, 0.0, 0.0, 0.0)
    }

    /// Charge-conserving perturbation by `σᶻ` measurements.
    pub fn with_z(sites: usize, p_z: f64) -> Result<Self> {
        Self::new(sites, 1.0 - p_z, 0.0, 0.0, p_z)
    }

    /// Symmetry-breaking perturbation along `p = p_x = p_y`, `p_z = 0`.
    pub fn with_xy(sites: usize, p: f64) -> Result<Self> {
        Self::new(sites, 1.0 - 2.0 * p, p, p, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let ps = [self.p_s, self.p_x, self.p_y, self.p_z];
        if ps.iter().any(|p| !(0.0..=1.0).contains(p) || p.is_nan()) {
            return Err(domain!("probabilities must lie in [0, 1], got {ps:?}"));
        }
        let total: f64 = ps.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(domain!("probabilities sum to {total}, not 1"));
        }
        if self.sites < 2 && self.p_s > 0.0 {
            return Err(domain!("SWAP measurements need at least two sites"));
        }
        if self.sites == 0 {
            return Err(domain!("need at least one site"));
        }
        Ok(())
    }

    /// True when every Kraus operator commutes with `Σ Sᶻ` (`p_x = p_y = 0`).
    pub fn conserves_charge(&self) -> bool {
        self.p_x == 0.0 && self.p_y == 0.0
    }
}

/// What happened in one elementary step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Event {
    Swap {
        bond: usize,
        outcome: MeasurementOutcome,
    },
    Pauli {
        site: usize,
        axis: Axis,
        outcome: MeasurementOutcome,
    },
}

/// One elementary step: with probability `p_s` a SWAP measurement with
/// feedback on a uniformly random bond, otherwise a Born-sampled Pauli
/// measurement (axis chosen with weights `p_x : p_y : p_z`) on a uniformly
/// random site.
pub fn elementary_step<R: Rng + ?Sized>(
    state: &PureState,
    params: &ModelParams,
    rng: &mut R,
) -> Result<(PureState, Event)> {
    let l = params.sites;
    if state.sites() != l {
        return Err(domain!("state has {} sites but the model has {l}", state.sites()));
    }
    let u: f64 = rng.random();
    let mut acc = params.p_s;
    if u < acc {
        let bond = rng.random_range(0..l - 1);
        let (post, outcome) = swap_measure_with_feedback(state, bond, rng)?;
        return Ok((post, Event::Swap { bond, outcome }));
    }
    let mut axis = Axis::Z;
    for (a, p) in [(Axis::X, params.p_x), (Axis::Y, params.p_y)] {
        acc += p;
        if u < acc {
            axis = a;
            break;
        }
    }
    let site = rng.random_range(0..l);
    let (post, outcome) = pauli_measure(state, site, axis, rng)?;
    Ok((post, Event::Pauli { site, axis, outcome }))
}

/// Observables sampled along a trajectory. Site indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Observable {
    /// `⟨S_i · S_j⟩`
    SpinSpin(usize, usize),
    /// `χ = (1/L) Σ_ij ⟨S_i · S_j⟩`
    Susceptibility,
    /// `⟨Sˣ_i Sˣ_j + Sʸ_i Sʸ_j⟩`
    XyCorrelation(usize, usize),
    /// Von Neumann entropy of the first `L/2` sites, in nats.
    HalfChainEntropy,
    TotalSz,
}

impl Observable {
    pub fn evaluate(&self, state: &PureState) -> Result<f64> {
        match *self {
            Observable::SpinSpin(i, j) => spin_spin(state, i, j),
            Observable::Susceptibility => Ok(susceptibility(state)),
            Observable::XyCorrelation(i, j) => xy_correlation(state, i, j),
            Observable::HalfChainEntropy => half_chain_entropy(state),
            Observable::TotalSz => Ok(crate::hilbert::total_sz(state)),
        }
    }

    /// Parse the names produced by `Display`, plus the shorthands `s1sl` and
    /// `xy1l` for the end-to-end correlators of an `L`-site chain.
    pub fn parse(name: &str, sites: usize) -> Result<Self> {
        let pair = |body: &str| -> Result<(usize, usize)> {
            let (a, b) = body
                .split_once(',')
                .ok_or_else(|| domain!("expected two site indices in {name:?}"))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| domain!("bad site index {s:?} in {name:?}"))
            };
            Ok((parse(a)?, parse(b)?))
        };
        let name = name.trim();
        let last = sites.saturating_sub(1);
        Ok(match name {
            "susceptibility" | "chi" => Observable::Susceptibility,
            "half_chain_entropy" | "entropy" => Observable::HalfChainEntropy,
            "total_sz" | "sz" => Observable::TotalSz,
            "s1sl" => Observable::SpinSpin(0, last),
            "xy1l" => Observable::XyCorrelation(0, last),
            _ => {
                if let Some(body) = name.strip_prefix("spin_spin(").and_then(|s| s.strip_suffix(')')) {
                    let (i, j) = pair(body)?;
                    Observable::SpinSpin(i, j)
                } else if let Some(body) = name.strip_prefix("xy_correlation(").and_then(|s| s.strip_suffix(')')) {
                    let (i, j) = pair(body)?;
                    Observable::XyCorrelation(i, j)
                } else {
                    return Err(domain!("unknown observable {name:?}"));
                }
            }
        })
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::SpinSpin(i, j) => write!(f, "spin_spin({i},{j})"),
            Observable::Susceptibility => f.write_str("susceptibility"),
            Observable::XyCorrelation(i, j) => write!(f, "xy_correlation({i},{j})"),
            Observable::HalfChainEntropy => f.write_str("half_chain_entropy"),
            Observable::TotalSz => f.write_str("total_sz"),
        }
    }
}

/// An observable and its sampling period in circuit steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservableSpec {
    pub observable: Observable,
    pub period: usize,
}

impl ObservableSpec {
    pub fn new(observable: Observable, period: usize) -> Result<Self> {
        if period == 0 {
            return Err(domain!("sampling period must be at least one circuit step"));
        }
        Ok(Self { observable, period })
    }

    pub fn every_step(observable: Observable) -> Self {
        Self { observable, period: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Circuit steps elapsed.
    pub time: usize,
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub params: ModelParams,
    pub series: Vec<Sample>,
    /// FNV-1a over the bit patterns of the final amplitudes.
    pub final_state_digest: u64,
}

impl TrajectoryRecord {
    /// `(time, value)` pairs for one observable.
    pub fn values<'a>(&'a self, name: &'a str) -> impl Iterator<Item = (usize, f64)> + 'a {
        self.series
            .iter()
            .filter(move |s| s.name == name)
            .map(|s| (s.time, s.value))
    }
}

fn digest(state: &PureState) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for a in state.amplitudes() {
        for word in [a.re.to_bits(), a.im.to_bits()] {
            for byte in word.to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
    }
    h
}

/// Seed of trajectory `index` in an ensemble with `master` seed
/// (SplitMix64 finalizer over the pair).
pub fn trajectory_seed(master: u64, index: u64) -> u64 {
    let mix = |mut z: u64| {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    };
    mix(master.wrapping_add(mix(index.wrapping_add(0x9e37_79b9_7f4a_7c15))))
}

/// Run `steps` circuit steps from `initial`, sampling `observables` at every
/// circuit-step boundary that is a multiple of their period (including
/// `t = 0`). Charge-breaking models expand sector states into the full basis.
pub fn run_trajectory(
    params: &ModelParams,
    initial: &PureState,
    steps: usize,
    observables: &[ObservableSpec],
    seed: u64,
) -> Result<TrajectoryRecord> {
    params.validate()?;
    if initial.sites() != params.sites {
        return Err(domain!(
            "initial state has {} sites but the model has {}",
            initial.sites(),
            params.sites
        ));
    }
    if observables.iter().any(|o| o.period == 0) {
        return Err(domain!("sampling period must be at least one circuit step"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = if params.conserves_charge() {
        initial.clone()
    } else {
        initial.to_full()
    };
    let mut series = Vec::new();
    let sample = |t: usize, state: &PureState, series: &mut Vec<Sample>| -> Result<()> {
        for spec in observables {
            if t.is_multiple_of(spec.period) {
                series.push(Sample {
                    time: t,
                    name: spec.observable.to_string(),
                    value: spec.observable.evaluate(state)?,
                });
            }
        }
        Ok(())
    };
    sample(0, &state, &mut series)?;
    for t in 1..=steps {
        for _ in 0..params.sites {
            state = elementary_step(&state, params, &mut rng)?.0;
        }
        sample(t, &state, &mut series)?;
    }
    Ok(TrajectoryRecord {
        seed,
        params: *params,
        series,
        final_state_digest: digest(&state),
    })
}

/// `count` independent trajectories seeded by [`trajectory_seed`], run in
/// parallel. The output is ordered by trajectory index.
pub fn run_ensemble(
    params: &ModelParams,
    initial: &PureState,
    steps: usize,
    observables: &[ObservableSpec],
    master_seed: u64,
    count: usize,
) -> Result<Vec<TrajectoryRecord>> {
    (0..count as u64)
        .into_par_iter()
        .map(|k| run_trajectory(params, initial, steps, observables, trajectory_seed(master_seed, k)))
        .collect()
}

/// `⟨SWAP_ij⟩`.
fn swap_expectation(state: &PureState, i: usize, j: usize) -> f64 {
    let basis = state.basis();
    let amps = state.amplitudes();
    amps.iter()
        .enumerate()
        .map(|(k, a)| {
            let partner = basis
                .index_of(swap_bits(basis.bits(k), i, j))
                .expect("swap preserves charge");
            (a.conj() * amps[partner]).re
        })
        .sum()
}

fn zz_expectation(state: &PureState, i: usize, j: usize) -> f64 {
    let basis = state.basis();
    state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let b = basis.bits(k);
            a.norm_sqr() * z_sign(b, i) * z_sign(b, j)
        })
        .sum::<f64>()
        / 4.0
}

fn check_pair(state: &PureState, i: usize, j: usize) -> Result<()> {
    let l = state.sites();
    if i == j {
        return Err(domain!("two-site correlator needs distinct sites, got {i} twice"));
    }
    if i >= l || j >= l {
        return Err(domain!("sites ({i}, {j}) out of range for L = {l}"));
    }
    Ok(())
}

/// `⟨S_i · S_j⟩ = (2⟨SWAP_ij⟩ - 1) / 4` for `i ≠ j`.
pub fn spin_spin(state: &PureState, i: usize, j: usize) -> Result<f64> {
    check_pair(state, i, j)?;
    Ok((2.0 * swap_expectation(state, i, j) - 1.0) / 4.0)
}

/// `χ = (1/L) Σ_ij ⟨S_i · S_j⟩`, diagonal terms (`3/4` each) included.
pub fn susceptibility(state: &PureState) -> f64 {
    let l = state.sites();
    let mut off = 0.0;
    for i in 0..l {
        for j in i + 1..l {
            off += (2.0 * swap_expectation(state, i, j) - 1.0) / 4.0;
        }
    }
    (0.75 * l as f64 + 2.0 * off) / l as f64
}

/// `⟨Sˣ_i Sˣ_j + Sʸ_i Sʸ_j⟩ = ⟨S_i · S_j⟩ - ⟨Sᶻ_i Sᶻ_j⟩`.
pub fn xy_correlation(state: &PureState, i: usize, j: usize) -> Result<f64> {
    check_pair(state, i, j)?;
    Ok((2.0 * swap_expectation(state, i, j) - 1.0) / 4.0 - zz_expectation(state, i, j))
}

/// `⟨Sᶻ_i Sᶻ_j⟩` for `i ≠ j`.
pub fn zz_correlation(state: &PureState, i: usize, j: usize) -> Result<f64> {
    check_pair(state, i, j)?;
    Ok(zz_expectation(state, i, j))
}

/// Von Neumann entropy (nats) of the first `L/2` sites, from the spectrum of
/// the reduced density matrix `M M†` with `M[a, b] = ψ(a + 2^{L/2} b)`.
pub fn half_chain_entropy(state: &PureState) -> Result<f64> {
    let l = state.sites();
    if !l.is_multiple_of(2) {
        return Err(domain!("half-chain entropy needs an even L, got {l}"));
    }
    let half = l / 2;
    let da = 1usize << half;
    let full;
    let amps = match state.basis() {
        Basis::Full { .. } => state.amplitudes(),
        Basis::Sector(_) => {
            full = state.to_full();
            full.amplitudes()
        }
    };
    let m = DMatrix::from_fn(da, da, |a, b| amps[a + (b << half)]);
    let rho = &m * m.adjoint();
    let eig = rho.symmetric_eigenvalues();
    Ok(entropy_of_spectrum(eig.iter().copied()))
}

pub(crate) fn entropy_of_spectrum(values: impl Iterator<Item = f64>) -> f64 {
    values.filter(|&p| p > 1e-300).map(|p| -p * p.ln()).sum()
}

/// Mean and standard error of one observable across an ensemble at each
/// sampled time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsemblePoint {
    pub time: usize,
    pub mean: f64,
    pub stderr: f64,
}

/// Pairwise (cascade) summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        n if n <= 8 => values.iter().sum(),
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Sample mean and standard error of the mean (`s / √n`, zero for `n = 1`).
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Pointwise ensemble mean and standard error of `observable`.
pub fn ensemble_average(records: &[TrajectoryRecord], observable: &str) -> Result<Vec<EnsemblePoint>> {
    let first = records
        .first()
        .ok_or_else(|| domain!("cannot average an empty ensemble"))?;
    let times: Vec<usize> = first.values(observable).map(|(t, _)| t).collect();
    if times.is_empty() {
        return Err(domain!("observable {observable:?} was not recorded"));
    }
    let mut columns = vec![Vec::with_capacity(records.len()); times.len()];
    for r in records {
        if r.params != first.params {
            return Err(domain!("records were produced with different parameters"));
        }
        let mut n = 0;
        for (k, (t, v)) in r.values(observable).enumerate() {
            if k >= times.len() || times[k] != t {
                return Err(domain!("records have mismatched sampling schedules"));
            }
            columns[k].push(v);
            n += 1;
        }
        if n != times.len() {
            return Err(domain!("records have mismatched sampling schedules"));
        }
    }
    Ok(times
        .iter()
        .zip(&columns)
        .map(|(&time, col)| {
            let (mean, stderr) = mean_and_stderr(col);
            EnsemblePoint { time, mean, stderr }
        })
        .collect())
}

/// Saturation test on an averaged time series: the mean over the last
/// quarter differs from the mean over the preceding quarter by less than one
/// combined standard error.
pub fn is_saturated(series: &[EnsemblePoint]) -> bool {
    let n = series.len();
    if n < 8 {
        return false;
    }
    let q = n / 4;
    let window = |s: &[EnsemblePoint]| {
        let m = s.iter().map(|p| p.mean).sum::<f64>() / s.len() as f64;
        let e = (s.iter().map(|p| p.stderr * p.stderr).sum::<f64>()).sqrt() / s.len() as f64;
        (m, e)
    };
    let (m_last, e_last) = window(&series[n - q..]);
    let (m_prev, e_prev) = window(&series[n - 2 * q..n - q]);
    (m_last - m_prev).abs() <= (e_last * e_last + e_prev * e_prev).sqrt().max(1e-12)
}

/// Initial states accepted by the runner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InitialState {
    /// `|↑↓↑…⟩` (Néel for even `L`).
    Alternating,
    /// Maximal-spin state with `N` up spins.
    Dicke(usize),
    /// Computational basis state.
    Product(u64),
}

impl InitialState {
    /// Build the state, in its charge sector when the model conserves charge.
    pub fn build(&self, params: &ModelParams) -> Result<PureState> {
        let l = params.sites;
        let full = match *self {
            InitialState::Alternating => crate::hilbert::alternating_state(l)?,
            InitialState::Dicke(n) => crate::hilbert::dicke_state(l, n)?,
            InitialState::Product(bits) => PureState::product(l, bits)?,
        };
        if !params.conserves_charge() {
            return Ok(full);
        }
        let n = match *self {
            InitialState::Alternating => l.div_ceil(2),
            InitialState::Dicke(n) => n,
            InitialState::Product(bits) => weight(bits),
        };
        let sector = Arc::new(crate::hilbert::SectorBasis::new(l, n)?);
        full.to_sector(sector, 1e-12)
    }
}

/// Haar-random pure state on the full `2^L` space.
pub fn random_state<R: Rng + ?Sized>(sites: usize, rng: &mut R) -> Result<PureState> {
    let gauss = |rng: &mut R| -> f64 { rng.sample(StandardNormal) };
    let amps = (0..1usize << sites)
        .map(|_| Complex64::new(gauss(rng), gauss(rng)))
        .collect();
    PureState::from_amplitudes(Basis::Full { sites }, amps)?
        .normalized()
        .map_err(|e| Error::Internal(e.to_string()))
}
