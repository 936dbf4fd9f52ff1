//! Finite-size scaling collapse `y(L, p) = F(L^{1/ν} p)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{domain, Result};
use crate::trajectory::trajectory_seed;

pub const NU_MIN: f64 = 0.1;
pub const NU_MAX: f64 = 2.0;
pub const BOOTSTRAP_RESAMPLES: usize = 200;
const WEIGHT_EPS: f64 = 1e-12;
const GRID_POINTS: usize = 96;

/// One measured value `y ± sigma` at system size `sites` and perturbation `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapsePoint {
    pub sites: usize,
    pub p: f64,
    pub y: f64,
    pub sigma: f64,
}

impl CollapsePoint {
    pub fn new(sites: usize, p: f64, y: f64, sigma: f64) -> Result<Self> {
        if sites < 2 {
            return Err(domain!("collapse points need L ≥ 2, got {sites}"));
        }
        if !(p >= 0.0) || !(sigma >= 0.0) || !y.is_finite() {
            return Err(domain!(
                "invalid collapse point (L={sites}, p={p}, y={y}, sigma={sigma})"
            ));
        }
        Ok(Self { sites, p, y, sigma })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollapseResult {
    pub nu: f64,
    pub cost: f64,
    /// Standard deviation of `ν` over bootstrap resamples.
    pub nu_stderr: f64,
    /// Another local minimum of the cost lies within a factor 2 of the best.
    pub ambiguous: bool,
    /// Residuals that entered the cost at the optimum.
    pub used: usize,
    /// Points with no bracketing data from any other size.
    pub skipped: usize,
}

/// Cost with bookkeeping of how many residuals entered it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostDetail {
    pub cost: f64,
    pub used: usize,
    pub skipped: usize,
}

struct Curve {
    sites: usize,
    /// `(x, y, sigma)` sorted by `x`.
    nodes: Vec<(f64, f64, f64)>,
}

impl Curve {
    fn interpolate(&self, x: f64) -> Option<(f64, f64)> {
        let n = &self.nodes;
        if n.len() < 2 || x < n[0].0 || x > n[n.len() - 1].0 {
            return None;
        }
        let hi = n.partition_point(|node| node.0 < x).max(1);
        let (x0, y0, s0) = n[hi - 1];
        let (x1, y1, s1) = n[hi];
        if x1 == x0 {
            return Some((y0, s0));
        }
        let t = (x - x0) / (x1 - x0);
        Some((y0 + t * (y1 - y0), s0 + t * (s1 - s0)))
    }
}

fn curves(points: &[CollapsePoint], nu: f64) -> Vec<Curve> {
    let mut sizes: Vec<usize> = points.iter().map(|p| p.sites).collect();
    sizes.sort_unstable();
    sizes.dedup();
    sizes
        .into_iter()
        .map(|l| {
            let scale = (l as f64).powf(1.0 / nu);
            let mut nodes: Vec<_> = points
                .iter()
                .filter(|p| p.sites == l)
                .map(|p| (scale * p.p, p.y, p.sigma))
                .collect();
            nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
            Curve { sites: l, nodes }
        })
        .collect()
}

/// Weighted mean squared distance of every point from the piecewise-linear
/// curves of the other sizes at the same scaled abscissa.
pub fn collapse_cost_detail(points: &[CollapsePoint], nu: f64) -> Result<CostDetail> {
    let mut sizes: Vec<usize> = points.iter().map(|p| p.sites).collect();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 2 || points.len() < 4 {
        return Err(domain!(
            "collapse needs at least 2 sizes and 4 points, got {} and {}",
            sizes.len(),
            points.len()
        ));
    }
    if !(nu > 0.0) {
        return Err(domain!("nu must be positive, got {nu}"));
    }
    let curves = curves(points, nu);
    let (mut num, mut den) = (0.0, 0.0);
    let (mut used, mut skipped) = (0, 0);
    for p in points {
        let x = (p.sites as f64).powf(1.0 / nu) * p.p;
        let mut any = false;
        for c in curves.iter().filter(|c| c.sites != p.sites) {
            if let Some((y, s)) = c.interpolate(x) {
                let w = 1.0 / (p.sigma * p.sigma + s * s + WEIGHT_EPS);
                num += w * (p.y - y).powi(2);
                den += w;
                used += 1;
                any = true;
            }
        }
        if !any {
            skipped += 1;
        }
    }
    if used < 2 {
        return Err(domain!("only {used} bracketed residuals at nu = {nu}"));
    }
    Ok(CostDetail {
        cost: num / den,
        used,
        skipped,
    })
}

pub fn collapse_cost(points: &[CollapsePoint], nu: f64) -> Result<f64> {
    Ok(collapse_cost_detail(points, nu)?.cost)
}

fn cost_or_inf(points: &[CollapsePoint], nu: f64) -> f64 {
    collapse_cost(points, nu).unwrap_or(f64::INFINITY)
}

fn grid() -> Vec<f64> {
    (0..GRID_POINTS)
        .map(|i| NU_MIN + (NU_MAX - NU_MIN) * i as f64 / (GRID_POINTS - 1) as f64)
        .collect()
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-7 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

struct Minimum {
    nu: f64,
    cost: f64,
    ambiguous: bool,
}

fn minimize(points: &[CollapsePoint]) -> Option<Minimum> {
    let g = grid();
    let costs: Vec<f64> = g.iter().map(|&nu| cost_or_inf(points, nu)).collect();
    let n = g.len();
    // Local minima on the grid, endpoints included.
    let locals: Vec<usize> = (0..n)
        .filter(|&i| {
            costs[i].is_finite() && (i == 0 || costs[i] <= costs[i - 1]) && (i + 1 == n || costs[i] <= costs[i + 1])
        })
        .collect();
    let best = *locals.iter().min_by(|&&a, &&b| costs[a].total_cmp(&costs[b]))?;
    let lo = g[best.saturating_sub(1)];
    let hi = g[(best + 1).min(n - 1)];
    let (nu, cost) = golden_section(|nu| cost_or_inf(points, nu), lo, hi);
    let (nu, cost) = if cost <= costs[best] {
        (nu, cost)
    } else {
        (g[best], costs[best])
    };
    let ambiguous = locals
        .iter()
        .filter(|&&i| i.abs_diff(best) > 1)
        .any(|&i| costs[i] < 2.0 * cost.max(f64::MIN_POSITIVE));
    Some(Minimum { nu, cost, ambiguous })
}

/// Minimize [`collapse_cost`] over `ν ∈ [0.1, 2]` and bootstrap the spread.
///
/// `seed` drives the bootstrap resampling only; the point estimate does not
/// depend on it.
pub fn collapse_fit(points: &[CollapsePoint], seed: u64) -> Result<CollapseResult> {
    collapse_cost_detail(points, 1.0).or_else(|_| collapse_cost_detail(points, 0.5))?;
    let best =
        minimize(points).ok_or_else(|| domain!("collapse cost is undefined for every nu in [{NU_MIN}, {NU_MAX}]"))?;
    let detail = collapse_cost_detail(points, best.nu)?;

    let boot: Vec<f64> = (0..BOOTSTRAP_RESAMPLES as u64)
        .into_par_iter()
        .filter_map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(trajectory_seed(seed, i));
            let sample: Vec<CollapsePoint> = (0..points.len())
                .map(|_| points[rng.random_range(0..points.len())])
                .collect();
            minimize(&sample).map(|m| m.nu)
        })
        .collect();
    let nu_stderr = if boot.len() > 1 {
        let m = boot.iter().sum::<f64>() / boot.len() as f64;
        (boot.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (boot.len() - 1) as f64).sqrt()
    } else {
        f64::NAN
    };
    Ok(CollapseResult {
        nu: best.nu,
        cost: best.cost,
        nu_stderr,
        ambiguous: best.ambiguous,
        used: detail.used,
        skipped: detail.skipped,
    })
}
