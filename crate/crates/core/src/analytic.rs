//! Closed-form steady-state and entanglement results.

use statrs::function::gamma::ln_gamma;

use crate::channel::CsrMatrix;
use crate::error::{domain, Result};
use crate::hilbert::swap_bits;

/// `χ = (L + 2)/4` for the pure permutation-symmetric steady states.
pub fn steady_chi(sites: usize) -> f64 {
    (sites as f64 + 2.0) / 4.0
}

/// Steady `⟨Sᶻ_i Sᶻ_j⟩ = (4Q² - L) / (4L(L-1))` for `i ≠ j` at total charge `Q`.
pub fn steady_zz(sites: usize, charge: f64) -> Result<f64> {
    if sites < 2 {
        return Err(domain!("need L ≥ 2, got {sites}"));
    }
    let l = sites as f64;
    if charge.abs() > l / 2.0 + 1e-12 || ((charge + l / 2.0).fract()).abs() > 1e-12 {
        return Err(domain!("charge {charge} is not allowed for L = {sites}"));
    }
    Ok((4.0 * charge * charge - l) / (4.0 * l * (l - 1.0)))
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

fn ln_factorial(n: usize) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

/// Schmidt weights of the Dicke state `|L, N⟩` across a cut `A | B`.
#[derive(Debug, Clone, PartialEq)]
pub struct EntanglementSpectrum {
    pub sites: usize,
    pub up: usize,
    pub a_size: usize,
    /// `(K, p_K)` for every `K` with nonzero weight.
    pub weights: Vec<(usize, f64)>,
}

impl EntanglementSpectrum {
    pub fn entropy(&self) -> f64 {
        -self
            .weights
            .iter()
            .filter(|(_, p)| *p > 0.0)
            .map(|(_, p)| p * p.ln())
            .sum::<f64>()
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().map(|(_, p)| p).sum()
    }
}

/// `p_K = C(A, K) C(B, N-K) / C(L, N)`.
pub fn entanglement_spectrum(sites: usize, up: usize, a_size: usize) -> Result<EntanglementSpectrum> {
    if up > sites {
        return Err(domain!("N = {up} exceeds L = {sites}"));
    }
    if a_size == 0 || a_size >= sites {
        return Err(domain!("subsystem size must satisfy 1 ≤ A ≤ L-1, got {a_size}"));
    }
    let b = sites - a_size;
    let lo = up.saturating_sub(b);
    let hi = up.min(a_size);
    let norm = ln_binomial(sites, up);
    if lo == hi {
        return Ok(EntanglementSpectrum {
            sites,
            up,
            a_size,
            weights: vec![(lo, 1.0)],
        });
    }
    let weights = (lo..=hi)
        .map(|k| (k, (ln_binomial(a_size, k) + ln_binomial(b, up - k) - norm).exp()))
        .collect();
    Ok(EntanglementSpectrum {
        sites,
        up,
        a_size,
        weights,
    })
}

/// `-Σ_K p_K ln p_K` in nats.
pub fn exact_entropy(sites: usize, up: usize, a_size: usize) -> Result<f64> {
    Ok(entanglement_spectrum(sites, up, a_size)?.entropy())
}

/// `½ ln L + ½ (ln(2π a b n(1-n)) + 1)` with `b = 1 - a`.
pub fn asymptotic_entropy(sites: f64, a: f64, n: f64) -> Result<f64> {
    if !(a > 0.0 && a < 1.0 && n > 0.0 && n < 1.0) {
        return Err(domain!("need 0 < a < 1 and 0 < n < 1, got a = {a}, n = {n}"));
    }
    if !(sites > 0.0) {
        return Err(domain!("L must be positive"));
    }
    let b = 1.0 - a;
    Ok(0.5 * sites.ln() + 0.5 * ((2.0 * std::f64::consts::PI * a * b * n * (1.0 - n)).ln() + 1.0))
}

/// Lower and upper bounds on `p_K` from Robbins' bounds
/// `√(2πx)(x/e)^x e^{1/(12x+1)} < x! < √(2πx)(x/e)^x e^{1/(12x)}`.
///
/// Every factorial argument (`A, B, N, L-N, K, A-K, N-K, B-N+K`) must be ≥ 1.
pub fn stirling_sandwich(sites: usize, up: usize, a_size: usize, k: usize) -> Result<(f64, f64)> {
    if a_size == 0 || a_size >= sites || up == 0 || up >= sites {
        return Err(domain!("need 1 ≤ A, N ≤ L-1"));
    }
    let b = sites - a_size;
    if k == 0 || k >= a_size || k >= up || up - k >= b {
        return Err(domain!("K = {k} is a boundary term; use the exact weight"));
    }
    let num = [a_size, b, up, sites - up];
    let den = [k, a_size - k, up - k, b + k - up, sites];
    // ln of √(2πx)(x/e)^x
    let stirling = |x: usize| {
        let x = x as f64;
        0.5 * (2.0 * std::f64::consts::PI * x).ln() + x * x.ln() - x
    };
    let core: f64 = num.iter().map(|&x| stirling(x)).sum::<f64>() - den.iter().map(|&x| stirling(x)).sum::<f64>();
    let lo_corr = |x: usize| 1.0 / (12.0 * x as f64 + 1.0);
    let hi_corr = |x: usize| 1.0 / (12.0 * x as f64);
    let r1: f64 = num.iter().map(|&x| lo_corr(x)).sum::<f64>() - den.iter().map(|&x| hi_corr(x)).sum::<f64>();
    let r2: f64 = num.iter().map(|&x| hi_corr(x)).sum::<f64>() - den.iter().map(|&x| lo_corr(x)).sum::<f64>();
    Ok(((core + r1).exp(), (core + r2).exp()))
}

/// `𝒞̃′ = (1 + p_z)/2 · 𝟙 + (1 - p_z)/(2(L-1)) · Σ_i SWAP_{i,i+1}` on bitstrings.
///
/// This is the action of the U(1) channel on the diagonal vectors `⟨⟨b,b|`
/// from the left.
pub fn projected_channel_matrix(sites: usize, p_z: f64) -> Result<CsrMatrix> {
    if !(2..=12).contains(&sites) {
        return Err(domain!("need 2 ≤ L ≤ 12, got {sites}"));
    }
    if !(0.0..=1.0).contains(&p_z) {
        return Err(domain!("p_z = {p_z} is outside [0, 1]"));
    }
    let d = 1usize << sites;
    let w = (1.0 - p_z) / (2.0 * (sites - 1) as f64);
    let rows = (0..d as u64)
        .map(|b| {
            let mut row = vec![(b as u32, (1.0 + p_z) / 2.0)];
            for i in 0..sites - 1 {
                row.push((swap_bits(b, i, i + 1) as u32, w));
            }
            row
        })
        .collect();
    Ok(CsrMatrix::from_rows(d, rows))
}
