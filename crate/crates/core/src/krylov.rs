//! Restarted GMRES for complex, matrix-free operators.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmresOptions {
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            restart: 50,
            max_iter: 2000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmresStats {
    pub iterations: usize,
    /// `||b - K x|| / ||b||`, recomputed from the returned iterate.
    pub residual: f64,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Solves `K x = b` from `x = 0`. `apply(v, out)` must overwrite `out` with `K v`.
pub fn gmres<F>(apply: F, b: &[Complex64], opts: &GmresOptions) -> Result<(Vec<Complex64>, GmresStats)>
where
    F: Fn(&[Complex64], &mut [Complex64]),
{
    if !(opts.tol > 0.0) || opts.restart == 0 || opts.max_iter == 0 {
        return Err(invalid("solver", "tol, restart and max_iter must be positive"));
    }
    let n = b.len();
    let mut x = vec![ZERO; n];
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok((
            x,
            GmresStats {
                iterations: 0,
                residual: 0.0,
            },
        ));
    }
    let m = opts.restart;
    let mut w = vec![ZERO; n];
    let mut r: Vec<Complex64> = b.to_vec();
    let mut iterations = 0;

    loop {
        let beta = norm(&r);
        let rel = beta / b_norm;
        if rel <= opts.tol {
            return Ok((
                x,
                GmresStats {
                    iterations,
                    residual: rel,
                },
            ));
        }
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence {
                iterations,
                residual: rel,
            });
        }

        let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|z| z / beta).collect());
        // Column-major Hessenberg, already rotated.
        let mut h: Vec<Vec<Complex64>> = Vec::with_capacity(m);
        let mut cs: Vec<f64> = Vec::with_capacity(m);
        let mut sn: Vec<Complex64> = Vec::with_capacity(m);
        let mut g = vec![ZERO; m + 1];
        g[0] = Complex64::new(beta, 0.0);
        let mut k = 0;

        while k < m && iterations < opts.max_iter {
            apply(&basis[k], &mut w);
            let mut col = vec![ZERO; k + 2];
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(v, &w);
                col[i] = hij;
                w.iter_mut().zip(v).for_each(|(wj, vj)| *wj -= hij * vj);
            }
            let h_next = norm(&w);
            col[k + 1] = Complex64::new(h_next, 0.0);

            for i in 0..k {
                let (a, b) = (col[i], col[i + 1]);
                col[i] = cs[i] * a + sn[i] * b;
                col[i + 1] = -sn[i].conj() * a + cs[i] * b;
            }
            let (a, b) = (col[k], col[k + 1]);
            let denom = (a.norm_sqr() + b.norm_sqr()).sqrt();
            let (c, s) = if denom == 0.0 {
                (1.0, ZERO)
            } else if a.norm() == 0.0 {
                (0.0, b.conj() / b.norm())
            } else {
                let c = a.norm() / denom;
                (c, (a / a.norm()) * b.conj() / denom)
            };
            col[k] = c * a + s * b;
            col[k + 1] = ZERO;
            cs.push(c);
            sn.push(s);
            g[k + 1] = -s.conj() * g[k];
            g[k] *= c;
            h.push(col);
            iterations += 1;
            k += 1;

            let estimate = g[k].norm() / b_norm;
            if estimate <= opts.tol || h_next == 0.0 {
                break;
            }
            basis.push(w.iter().map(|z| z / h_next).collect());
        }

        // Back substitution on the triangular system.
        let mut y = vec![ZERO; k];
        for i in (0..k).rev() {
            let mut acc = g[i];
            for j in i + 1..k {
                acc -= h[j][i] * y[j];
            }
            y[i] = acc / h[i][i];
        }
        for (yi, v) in y.iter().zip(&basis) {
            x.iter_mut().zip(v).for_each(|(xj, vj)| *xj += yi * vj);
        }
        apply(&x, &mut w);
        r.iter_mut()
            .zip(b.iter().zip(&w))
            .for_each(|(rj, (bj, kj))| *rj = bj - kj);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_converges_in_one_step() {
        let b: Vec<_> = (0..20).map(|k| c(k as f64, 1.0)).collect();
        let (x, stats) = gmres(|v, out| out.copy_from_slice(v), &b, &GmresOptions::default()).unwrap();
        assert_eq!(stats.iterations, 1);
        for (a, b) in x.iter().zip(&b) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn solves_nonsymmetric_complex_system() {
        let n = 60;
        // I + K with a strictly lower-banded complex K.
        let apply = |v: &[Complex64], out: &mut [Complex64]| {
            for i in 0..n {
                let mut acc = v[i];
                for d in 1..4 {
                    if i >= d {
                        acc += c(0.3 / d as f64, -0.2) * v[i - d];
                    }
                }
                if i + 1 < n {
                    acc += c(0.0, 0.1) * v[i + 1];
                }
                out[i] = acc;
            }
        };
        let b: Vec<_> = (0..n).map(|k| c((k as f64).sin(), (k as f64 * 0.3).cos())).collect();
        let opts = GmresOptions {
            restart: 7,
            ..GmresOptions::default()
        };
        let (x, stats) = gmres(apply, &b, &opts).unwrap();
        let mut kx = vec![ZERO; n];
        apply(&x, &mut kx);
        let res: f64 = kx.iter().zip(&b).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        assert!(res <= 1e-8 * norm(&b) * 1.0001);
        assert!((stats.residual - res / norm(&b)).abs() < 1e-12);
    }

    #[test]
    fn reports_non_convergence() {
        // Rotation-like operator stalls restarted GMRES(1).
        let apply = |v: &[Complex64], out: &mut [Complex64]| {
            out[0] = v[1];
            out[1] = -v[0];
        };
        let opts = GmresOptions {
            tol: 1e-10,
            restart: 1,
            max_iter: 20,
        };
        let res = gmres(apply, &[c(1.0, 0.0), ZERO], &opts);
        assert!(matches!(res, Err(Error::NoConvergence { .. })));
    }
}
