//! Eigenvalues of non-Hermitian operators.
//!
//! Small matrices go through a dense complex Schur decomposition. Large
//! operators, available only as matrix-vector products, use a complex
//! Krylov-Schur iteration for the eigenvalues of largest modulus.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);

/// Complex Schur form `A = Z T Z^H` with `T` upper triangular.
pub fn complex_schur(a: DMatrix<C>) -> Result<(DMatrix<C>, DMatrix<C>)> {
    let n = a.nrows();
    let (z, mut t) = [1e-15, 1e-14, 1e-13]
        .iter()
        .find_map(|&eps| Schur::try_new(a.clone(), eps, 100 * n.max(10)))
        .ok_or_else(|| Error::Numerical("dense Schur decomposition did not converge".into()))?
        .unpack();
    for j in 0..n {
        for i in j + 1..n {
            t[(i, j)] = ZERO;
        }
    }
    Ok((z, t))
}

/// All eigenvalues of a dense real matrix, sorted by decreasing modulus.
pub fn dense_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<C>> {
    let n = a.nrows();
    // Machine epsilon is too strict a deflation threshold for nalgebra's
    // QR sweep to terminate on these matrices.
    let schur = |m: DMatrix<f64>| {
        [1e-15, 1e-14, 1e-13]
            .iter()
            .find_map(|&eps| Schur::try_new(m.clone(), eps, 100 * n.max(10)).map(|s| s.complex_eigenvalues()))
    };
    // Francis QR can cycle on permutation-like matrices; a random orthogonal
    // similarity breaks the structure without changing the spectrum.
    let eig = schur(a.clone()).or_else(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let g = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        let q = g.qr().q();
        schur(q.transpose() * a * q)
    });
    let mut vals: Vec<C> = eig
        .ok_or_else(|| Error::Numerical("dense Schur decomposition did not converge".into()))?
        .iter()
        .copied()
        .collect();
    sort_by_modulus(&mut vals);
    Ok(vals)
}

/// Decreasing modulus; ties broken by decreasing real part, then imaginary.
pub fn sort_by_modulus(vals: &mut [C]) {
    vals.sort_by(|a, b| {
        b.norm()
            .total_cmp(&a.norm())
            .then(b.re.total_cmp(&a.re))
            .then(b.im.total_cmp(&a.im))
    });
}

/// Rotation `[c s; -s̄ c]` mapping `(f, g)` to `(r, 0)`, `c` real.
fn givens(f: C, g: C) -> (f64, C) {
    if g.norm() == 0.0 {
        return (1.0, ZERO);
    }
    if f.norm() == 0.0 {
        return (0.0, g.conj() / g.norm());
    }
    let norm = (f.norm_sqr() + g.norm_sqr()).sqrt();
    let phase = f / f.norm();
    (f.norm() / norm, phase * g.conj() / norm)
}

/// `x ← c x + s y`, `y ← c y - s̄ x` elementwise.
fn rot(x: &mut [C], y: &mut [C], c: f64, s: C) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let t = *a * c + s * *b;
        *b = *b * c - s.conj() * *a;
        *a = t;
    }
}

/// Exchange diagonal entries `k` and `k + 1` of the upper triangular `t`,
/// updating the Schur vectors `z` so that `z t z^H` is unchanged.
fn swap_adjacent(t: &mut DMatrix<C>, z: &mut DMatrix<C>, k: usize) {
    let n = t.nrows();
    let t11 = t[(k, k)];
    let t22 = t[(k + 1, k + 1)];
    let (c, s) = givens(t[(k, k + 1)], t22 - t11);
    if k + 2 < n {
        let mut rk: Vec<C> = (k + 2..n).map(|j| t[(k, j)]).collect();
        let mut rk1: Vec<C> = (k + 2..n).map(|j| t[(k + 1, j)]).collect();
        rot(&mut rk, &mut rk1, c, s);
        for (idx, j) in (k + 2..n).enumerate() {
            t[(k, j)] = rk[idx];
            t[(k + 1, j)] = rk1[idx];
        }
    }
    if k > 0 {
        let mut ck: Vec<C> = (0..k).map(|i| t[(i, k)]).collect();
        let mut ck1: Vec<C> = (0..k).map(|i| t[(i, k + 1)]).collect();
        rot(&mut ck, &mut ck1, c, s.conj());
        for i in 0..k {
            t[(i, k)] = ck[i];
            t[(i, k + 1)] = ck1[i];
        }
    }
    t[(k, k)] = t22;
    t[(k + 1, k + 1)] = t11;
    let m = z.nrows();
    let mut zk: Vec<C> = (0..m).map(|i| z[(i, k)]).collect();
    let mut zk1: Vec<C> = (0..m).map(|i| z[(i, k + 1)]).collect();
    rot(&mut zk, &mut zk1, c, s.conj());
    for i in 0..m {
        z[(i, k)] = zk[i];
        z[(i, k + 1)] = zk1[i];
    }
}

/// Reorder a complex Schur form so the diagonal decreases in modulus.
pub fn sort_schur(t: &mut DMatrix<C>, z: &mut DMatrix<C>) {
    let n = t.nrows();
    for end in (1..n).rev() {
        let mut swapped = false;
        for k in 0..end {
            if t[(k + 1, k + 1)].norm() > t[(k, k)].norm() {
                swap_adjacent(t, z, k);
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }
}

/// Eigenvector of upper triangular `t` for its `i`-th diagonal entry.
fn triangular_eigenvector(t: &DMatrix<C>, i: usize) -> Vec<C> {
    let n = t.nrows();
    let lambda = t[(i, i)];
    let mut y = vec![ZERO; n];
    y[i] = C::new(1.0, 0.0);
    for r in (0..i).rev() {
        let mut acc = ZERO;
        for c in r + 1..=i {
            acc += t[(r, c)] * y[c];
        }
        let mut d = t[(r, r)] - lambda;
        if d.norm() < 1e-14 {
            d = C::new(1e-14, 0.0);
        }
        y[r] = -acc / d;
    }
    let norm = y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    y.iter_mut().for_each(|v| *v /= norm);
    y
}

#[derive(Debug, Clone)]
pub struct KrylovOptions {
    /// Number of eigenvalues wanted.
    pub nev: usize,
    /// Maximum Krylov subspace size.
    pub ncv: usize,
    /// Relative residual tolerance.
    pub tol: f64,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            nev: 6,
            ncv: 40,
            tol: 1e-13,
            max_restarts: 5000,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KrylovResult {
    /// Ritz values, decreasing in modulus.
    pub values: Vec<C>,
    /// Unit-norm Ritz vectors, if requested.
    pub vectors: Vec<Vec<C>>,
    /// `‖A x - θ x‖` estimates.
    pub residuals: Vec<f64>,
    pub matvecs: usize,
    pub restarts: usize,
}

fn dot(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn random_unit<R: Rng>(n: usize, rng: &mut R) -> Vec<C> {
    let mut v: Vec<C> = (0..n).map(|_| C::new(rng.random::<f64>() - 0.5, 0.0)).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    v
}

/// Classical Gram-Schmidt with one reorthogonalization pass.
fn orthogonalize(basis: &[Vec<C>], w: &mut [C]) -> Vec<C> {
    let mut h = vec![ZERO; basis.len()];
    for _ in 0..2 {
        let coeffs: Vec<C> = basis.iter().map(|v| dot(v, w)).collect();
        for (v, c) in basis.iter().zip(&coeffs) {
            for (x, y) in w.iter_mut().zip(v) {
                *x -= *c * y;
            }
        }
        for (a, c) in h.iter_mut().zip(&coeffs) {
            *a += c;
        }
    }
    h
}

/// The `nev` eigenvalues of largest modulus of the `n × n` operator `op`
/// (`op(x, y)` writes `A x` into `y`).
pub fn krylov_schur<F>(n: usize, op: F, opts: &KrylovOptions, want_vectors: bool) -> Result<KrylovResult>
where
    F: Fn(&[C], &mut [C]),
{
    if n == 0 {
        return Err(Error::Domain("empty operator".into()));
    }
    let nev = opts.nev.min(n);
    let ncv = opts.ncv.max(2 * nev + 2).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    // A V[0..m] = V[0..m+1] H̄, H̄ stored in `h` ((ncv+1) × ncv).
    let mut v: Vec<Vec<C>> = vec![random_unit(n, &mut rng)];
    let mut h = DMatrix::<C>::zeros(ncv + 1, ncv);
    let mut k = 0;
    let mut matvecs = 0;
    let mut w = vec![ZERO; n];

    for restart in 0..=opts.max_restarts {
        for j in k..ncv {
            op(&v[j], &mut w);
            matvecs += 1;
            let coeffs = orthogonalize(&v, &mut w);
            for (i, c) in coeffs.iter().enumerate() {
                h[(i, j)] += *c;
            }
            let beta = norm(&w);
            let scale = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt().max(beta);
            if j + 1 == n {
                // Complete basis: the factorization is exact.
                h[(j + 1, j)] = ZERO;
                v.push(vec![ZERO; n]);
            } else if beta <= 1e-12 * scale.max(1e-300) {
                // Invariant subspace: continue from a fresh orthogonal direction.
                h[(j + 1, j)] = ZERO;
                let mut fresh = random_unit(n, &mut rng);
                orthogonalize(&v, &mut fresh);
                let nf = norm(&fresh);
                fresh.iter_mut().for_each(|x| *x /= nf);
                v.push(fresh);
            } else {
                h[(j + 1, j)] = C::new(beta, 0.0);
                v.push(w.iter().map(|x| x / beta).collect());
            }
        }
        let m = ncv;
        let hm = h.view((0, 0), (m, m)).into_owned();
        let (mut z, mut t) = complex_schur(hm)?;
        sort_schur(&mut t, &mut z);

        // Residual row b = H̄[m, :] Z.
        let b: Vec<C> = (0..m).map(|i| (0..m).map(|j| h[(m, j)] * z[(j, i)]).sum()).collect();
        let mut residuals = Vec::with_capacity(nev);
        let mut ys = Vec::with_capacity(nev);
        let mut converged = true;
        for i in 0..nev {
            let y = triangular_eigenvector(&t, i);
            let r = dot(&b.iter().map(|x| x.conj()).collect::<Vec<_>>(), &y).norm();
            let theta = t[(i, i)].norm().max(1e-12);
            if r > opts.tol * theta {
                converged = false;
            }
            residuals.push(r);
            ys.push(y);
        }

        if converged || restart == opts.max_restarts {
            if !converged {
                return Err(Error::Numerical(format!(
                    "Krylov-Schur did not converge after {restart} restarts; residuals {residuals:?}"
                )));
            }
            let values = (0..nev).map(|i| t[(i, i)]).collect();
            let vectors = if want_vectors {
                ys.iter()
                    .map(|y| {
                        let zy: Vec<C> = (0..m).map(|r| (0..m).map(|c| z[(r, c)] * y[c]).sum()).collect();
                        let mut x = vec![ZERO; n];
                        for (vj, coef) in v.iter().zip(&zy) {
                            for (xi, vi) in x.iter_mut().zip(vj) {
                                *xi += *coef * vi;
                            }
                        }
                        let nx = norm(&x);
                        x.iter_mut().for_each(|e| *e /= nx);
                        x
                    })
                    .collect()
            } else {
                Vec::new()
            };
            return Ok(KrylovResult {
                values,
                vectors,
                residuals,
                matvecs,
                restarts: restart,
            });
        }

        // Keep roughly half of the non-wanted directions as well.
        let keep = (nev + (m - nev) / 2).min(m - 1);
        let mut kept: Vec<Vec<C>> = (0..keep)
            .map(|i| {
                let mut x = vec![ZERO; n];
                for (vj, j) in v.iter().zip(0..m) {
                    let coef = z[(j, i)];
                    for (xi, vi) in x.iter_mut().zip(vj) {
                        *xi += coef * vi;
                    }
                }
                x
            })
            .collect();
        kept.push(v[m].clone());
        v = kept;
        h.fill(ZERO);
        for i in 0..keep {
            for j in i..keep {
                h[(i, j)] = t[(i, j)];
            }
            h[(keep, i)] = b[i];
        }
        k = keep;
    }
    unreachable!("loop returns on its final iteration")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_matrix(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5)
    }

    #[test]
    fn reordered_schur_reconstructs_matrix() {
        let a = random_matrix(12, 1).map(|x| C::new(x, 0.0));
        let (mut z, mut t) = complex_schur(a.clone()).unwrap();
        sort_schur(&mut t, &mut z);
        let back = &z * &t * z.adjoint();
        assert!((back - &a).norm() < 1e-12);
        for i in 0..11 {
            assert!(t[(i, i)].norm() >= t[(i + 1, i + 1)].norm() - 1e-14);
            for j in 0..i {
                assert_eq!(t[(i, j)], ZERO);
            }
        }
        assert!((z.adjoint() * &z - DMatrix::identity(12, 12)).norm() < 1e-12);
    }

    #[test]
    fn dense_eigenvalues_of_known_matrix() {
        // Rotation by 90° scaled by 2, plus a real eigenvalue 0.5.
        let a = DMatrix::from_row_slice(3, 3, &[0.0, -2.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.5]);
        let ev = dense_eigenvalues(&a).unwrap();
        assert!((ev[0].norm() - 2.0).abs() < 1e-12);
        assert!((ev[1].norm() - 2.0).abs() < 1e-12);
        assert!((ev[2] - C::new(0.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn krylov_matches_dense_on_random_matrix() {
        let n = 300;
        let mut a = random_matrix(n, 2);
        // Plant a few well-separated outliers.
        for (i, s) in [(0, 9.0), (1, 8.0), (2, -7.5)] {
            a[(i, i)] += s;
        }
        let dense = dense_eigenvalues(&a).unwrap();
        let opts = KrylovOptions {
            nev: 4,
            ..Default::default()
        };
        let res = krylov_schur(
            n,
            |x, y| {
                for r in 0..n {
                    y[r] = (0..n).map(|c| x[c] * a[(r, c)]).sum();
                }
            },
            &opts,
            true,
        )
        .unwrap();
        for i in 0..4 {
            assert!(
                (res.values[i] - dense[i]).norm() < 1e-9,
                "{} vs {}",
                res.values[i],
                dense[i]
            );
            let x = &res.vectors[i];
            let ax: Vec<C> = (0..n).map(|r| (0..n).map(|c| x[c] * a[(r, c)]).sum()).collect();
            let resid: f64 = ax
                .iter()
                .zip(x)
                .map(|(p, q)| (p - res.values[i] * q).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(resid < 1e-8);
        }
    }

    #[test]
    fn krylov_on_tiny_operator_is_exact() {
        let a = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.1, 0.9]);
        let res = krylov_schur(
            2,
            |x, y| {
                y[0] = x[0] * a[(0, 0)] + x[1] * a[(0, 1)];
                y[1] = x[0] * a[(1, 0)] + x[1] * a[(1, 1)];
            },
            &KrylovOptions {
                nev: 2,
                ..Default::default()
            },
            false,
        )
        .unwrap();
        assert!((res.values[0] - C::new(1.0, 0.0)).norm() < 1e-13);
        assert!((res.values[1] - C::new(0.8, 0.0)).norm() < 1e-13);
    }
}
