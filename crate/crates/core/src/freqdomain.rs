//! Stationary scattering on a line `Im omega = sigma` of the frequency plane.
//!
//! The time transform `u^(x, omega) = int u(t, x) e^{i omega t} dt` turns the
//! memory equation into `(D_x^2 - omega^2 + A) u = 0` with
//! `A = a(x, D_omega) omega / (omega + i gamma)`, where `a(x, D_omega)` acts by
//! convolution with `(1/2pi) a^(x, .)`. For an incoming profile `f` the
//! outgoing coefficients are
//!
//! ```text
//! T f(omega)  = f(omega) + (i / 2 omega) int e^{-i omega y} w(y, omega) dy
//! R+ f(omega) =            (i / 2 omega) int e^{+i omega y} w(y, omega) dy
//! ```
//!
//! with `w = (I + A R0 rho1)^{-1} rho1 F` and `F = f [D_x^2, rho] e^{i omega x}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::Grid1D;
use crate::krylov::{gmres, GmresOptions, GmresStats};
use crate::potential::{PermittivityModel, StepPotential};
use crate::scattering::Spectrum;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Relative size of `a^` at the convolution cut-off.
pub const KERNEL_CUTOFF: f64 = 1e-12;
/// Largest admissible relative L1 mass lost by truncating and sampling `a^`.
pub const KERNEL_TAIL_TOL: f64 = 1e-8;

/// Samples `omega_k + i sigma`, `omega_k = -omega_max + k d_omega`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyLine {
    pub sigma: f64,
    pub omega_max: f64,
    pub n_omega: usize,
    /// Replaces `sigma` in the `1/omega` factors when `sigma = 0`.
    pub epsilon: f64,
}

impl FrequencyLine {
    pub fn new(sigma: f64, omega_max: f64, n_omega: usize) -> Result<Self> {
        let line = Self {
            sigma,
            omega_max,
            n_omega,
            epsilon: 1e-3,
        };
        line.validate()?;
        Ok(line)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(invalid("sigma", format!("must be >= 0, got {}", self.sigma)));
        }
        if !(self.omega_max > 0.0) || !self.omega_max.is_finite() {
            return Err(invalid("omega_max", "must be positive"));
        }
        if self.n_omega < 2 || !self.n_omega.is_multiple_of(2) {
            return Err(invalid(
                "n_omega",
                format!("must be even and at least 2, got {}", self.n_omega),
            ));
        }
        if !(self.epsilon > 0.0) {
            return Err(invalid("epsilon", "must be positive"));
        }
        Ok(())
    }

    pub fn d_omega(&self) -> f64 {
        2.0 * self.omega_max / (self.n_omega - 1) as f64
    }

    pub fn omega(&self, k: usize) -> f64 {
        -self.omega_max + k as f64 * self.d_omega()
    }

    pub fn omegas(&self) -> Vec<f64> {
        (0..self.n_omega).map(|k| self.omega(k)).collect()
    }

    pub fn z(&self, k: usize) -> Complex64 {
        Complex64::new(self.omega(k), self.sigma)
    }

    /// The sample used in `1/omega` factors.
    pub fn z_reg(&self, k: usize) -> Complex64 {
        if self.sigma > 0.0 {
            self.z(k)
        } else {
            Complex64::new(self.omega(k), self.epsilon)
        }
    }

    fn check_away_from_zero(&self) -> Result<()> {
        for k in 0..self.n_omega {
            let modulus = self.z_reg(k).norm();
            if modulus < self.epsilon {
                return Err(Error::OmegaNearZero {
                    modulus,
                    epsilon: self.epsilon,
                });
            }
        }
        Ok(())
    }

    pub fn with_sigma(&self, sigma: f64) -> Self {
        Self { sigma, ..*self }
    }
}

/// Values on `grid x line`, stored frequency-major: `values[k * n_x + j]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeField {
    pub n_x: usize,
    pub n_omega: usize,
    pub values: Vec<Complex64>,
}

impl LatticeField {
    pub fn zeros(n_x: usize, n_omega: usize) -> Self {
        Self {
            n_x,
            n_omega,
            values: vec![ZERO; n_x * n_omega],
        }
    }

    pub fn for_lattice(grid: &Grid1D, line: &FrequencyLine) -> Self {
        Self::zeros(grid.len(), line.n_omega)
    }

    pub fn get(&self, j: usize, k: usize) -> Complex64 {
        self.values[k * self.n_x + j]
    }

    pub fn row(&self, k: usize) -> &[Complex64] {
        &self.values[k * self.n_x..(k + 1) * self.n_x]
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    fn check(&self, grid: &Grid1D, line: &FrequencyLine) -> Result<()> {
        if self.n_x != grid.len() || self.n_omega != line.n_omega || self.values.len() != self.n_x * self.n_omega {
            return Err(Error::Dimension(format!(
                "field is {}x{}, lattice is {}x{}",
                self.n_x,
                self.n_omega,
                grid.len(),
                line.n_omega
            )));
        }
        Ok(())
    }
}

/// `S(s) = psi(s) / (psi(s) + psi(1 - s))`, `psi(s) = e^{-1/s}`, with its
/// first two derivatives.
fn smooth_step(s: f64) -> (f64, f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if s >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let q = 1.0 / s - 1.0 / (1.0 - s);
    let step = if q > 0.0 {
        let e = (-q).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + q.exp())
    };
    let both = step * (1.0 - step);
    let h = 1.0 / (s * s) + 1.0 / ((1.0 - s) * (1.0 - s));
    let dh = -2.0 / (s * s * s) + 2.0 / ((1.0 - s) * (1.0 - s) * (1.0 - s));
    let d1 = both * h;
    let d2 = d1 * (1.0 - 2.0 * step) * h + both * dh;
    (step, d1, d2)
}

/// Even plateau `1` on `|x| <= a`, falling smoothly to `0` at `|x| = a + w`.
fn plateau(x: f64, a: f64, w: f64) -> (f64, f64, f64) {
    let sign = x.signum();
    let (s, d1, d2) = smooth_step((x.abs() - a) / w);
    (1.0 - s, -sign * d1 / w, -d2 / (w * w))
}

/// Cut-offs with `rho = 1` on `|x| <= R + delta`, `rho1 = 1` on
/// `|x| <= R + 2 delta`, and `supp rho1` inside `|x| <= R + 3 delta`,
/// where `delta = (R1 - R) / 4`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffPair {
    pub r: f64,
    pub r1: f64,
}

impl CutoffPair {
    pub fn new(r: f64, r1: f64) -> Result<Self> {
        if !(r > 0.0) || !(r1 > r) || !r1.is_finite() {
            return Err(invalid("R1", format!("need 0 < R < R1, got R = {r}, R1 = {r1}")));
        }
        Ok(Self { r, r1 })
    }

    pub fn delta(&self) -> f64 {
        (self.r1 - self.r) / 4.0
    }

    /// `(rho, rho', rho'')` at `x`.
    pub fn rho_jet(&self, x: f64) -> (f64, f64, f64) {
        let d = self.delta();
        plateau(x, self.r + d, d)
    }

    pub fn rho(&self, x: f64) -> f64 {
        self.rho_jet(x).0
    }

    pub fn rho1(&self, x: f64) -> f64 {
        let d = self.delta();
        plateau(x, self.r + 2.0 * d, d).0
    }
}

fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    w[0] *= 0.5;
    w[n - 1] *= 0.5;
    w
}

/// One frequency row of `R0 f = (i / 2z) int e^{iz|x-y|} f(y) dy`, by the
/// trapezoid rule with prefix and suffix recurrences.
fn resolvent_row(f: &[Complex64], weights: &[f64], dx: f64, z: Complex64, z_reg: Complex64, out: &mut [Complex64]) {
    let n = f.len();
    let step = (I * z * dx).exp();
    let scale = I / (2.0 * z_reg);
    let mut acc = ZERO;
    for j in 0..n {
        acc = step * acc + weights[j] * f[j];
        out[j] = acc;
    }
    acc = ZERO;
    for j in (0..n).rev() {
        acc = step * acc + weights[j] * f[j];
        out[j] = scale * (out[j] + acc - weights[j] * f[j]);
    }
}

pub fn free_resolvent_apply(f: &LatticeField, line: &FrequencyLine, grid: &Grid1D) -> Result<LatticeField> {
    f.check(grid, line)?;
    line.check_away_from_zero()?;
    let mut out = LatticeField::for_lattice(grid, line);
    apply_resolvent_into(&f.values, line, grid, &mut out.values);
    Ok(out)
}

fn apply_resolvent_into(f: &[Complex64], line: &FrequencyLine, grid: &Grid1D, out: &mut [Complex64]) {
    let n_x = grid.len();
    let weights = trapezoid_weights(n_x, grid.dx());
    out.par_chunks_mut(n_x)
        .zip(f.par_chunks(n_x))
        .enumerate()
        .for_each(|(k, (o, fk))| resolvent_row(fk, &weights, grid.dx(), line.z(k), line.z_reg(k), o));
}

/// `a^(x, tau) = int a(x, t) e^{i tau t} dt`.
pub fn hat_a(model: &PermittivityModel, x: f64, tau: f64) -> Result<Complex64> {
    if !(model.alpha_p > 0.0) {
        return Err(invalid("alpha_p", "the transform needs alpha_p > 0"));
    }
    Ok(model.eval_a(x, model.t0) * time_symbol(model, tau))
}

/// `int exp(-alpha_p (t - t0)^2) e^{i tau t} dt`.
fn time_symbol(model: &PermittivityModel, tau: f64) -> Complex64 {
    let a = model.alpha_p;
    Complex64::from_polar((PI / a).sqrt() * (-tau * tau / (4.0 * a)).exp(), tau * model.t0)
}

/// Radius beyond which `|a^| < KERNEL_CUTOFF |a^(0)|`.
pub fn kernel_radius(alpha_p: f64) -> f64 {
    2.0 * (alpha_p * (1.0 / KERNEL_CUTOFF).ln()).sqrt()
}

/// `A = a(x, D_omega) omega / (omega + i gamma)` on a lattice, with the
/// convolution kernel sampled once.
#[derive(Clone, Debug)]
pub struct MemoryOperator {
    /// Lattice nodes where `a` is nonzero, with the cell-averaged `V`.
    nodes: Vec<(usize, Complex64)>,
    /// `z / (z + i gamma)` per frequency sample.
    multiplier: Vec<Complex64>,
    /// `(1/2pi) a^(m d_omega) d_omega / V` for `|m| <= half_width`; empty
    /// when `a` is constant in time.
    kernel: Vec<Complex64>,
    half_width: usize,
    n_x: usize,
    n_omega: usize,
    /// Relative L1 mass of the time symbol not represented by `kernel`.
    pub tail: f64,
}

impl MemoryOperator {
    pub fn new(model: &PermittivityModel, grid: &Grid1D, line: &FrequencyLine) -> Result<Self> {
        model.validate()?;
        line.validate()?;
        let dx = grid.dx();
        let nodes = grid
            .points()
            .enumerate()
            .filter(|(_, x)| x.abs() <= model.r)
            .map(|(j, x)| (j, model.potential.cell_average(x, dx)))
            .filter(|(_, v)| v.norm() > 0.0)
            .collect();
        let multiplier = (0..line.n_omega)
            .map(|k| {
                let z = line.z_reg(k);
                z / (z + I * model.gamma)
            })
            .collect();
        let (kernel, half_width, tail) = if model.alpha_p > 0.0 {
            let dw = line.d_omega();
            let half = ((kernel_radius(model.alpha_p) / dw).ceil() as usize).min(line.n_omega - 1);
            let kernel: Vec<Complex64> = (0..=2 * half)
                .map(|i| {
                    let tau = (i as f64 - half as f64) * dw;
                    time_symbol(model, tau) * dw / (2.0 * PI)
                })
                .collect();
            // The exact symbol has unit L1 mass after the 1/2pi.
            let mass: f64 = kernel.iter().map(|z| z.norm()).sum();
            (kernel, half, (1.0 - mass).abs())
        } else {
            (Vec::new(), 0, 0.0)
        };
        if tail > KERNEL_TAIL_TOL {
            return Err(Error::KernelTruncated { tail });
        }
        Ok(Self {
            nodes,
            multiplier,
            kernel,
            half_width,
            n_x: grid.len(),
            n_omega: line.n_omega,
            tail,
        })
    }

    pub fn is_zero(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Overwrites `out` with `A u`.
    pub fn apply_into(&self, u: &[Complex64], out: &mut [Complex64]) {
        out.iter_mut().for_each(|z| *z = ZERO);
        let (n_x, n_w) = (self.n_x, self.n_omega);
        let columns: Vec<(usize, Vec<Complex64>)> = self
            .nodes
            .par_iter()
            .map(|&(j, v)| {
                let col: Vec<Complex64> = (0..n_w).map(|l| u[l * n_x + j] * self.multiplier[l]).collect();
                if self.kernel.is_empty() {
                    return (j, col.into_iter().map(|z| v * z).collect());
                }
                let h = self.half_width as isize;
                let res = (0..n_w as isize)
                    .map(|k| {
                        let lo = (k - h).max(0);
                        let hi = (k + h).min(n_w as isize - 1);
                        let mut acc = ZERO;
                        for l in lo..=hi {
                            let w = if l == 0 || l == n_w as isize - 1 { 0.5 } else { 1.0 };
                            acc += self.kernel[(k - l + h) as usize] * (w * col[l as usize]);
                        }
                        v * acc
                    })
                    .collect();
                (j, res)
            })
            .collect();
        for (j, col) in columns {
            for (k, z) in col.into_iter().enumerate() {
                out[k * n_x + j] = z;
            }
        }
    }

    /// Largest row and column sums of `|A|` over the lattice, for the Schur test.
    pub fn schur_sums(&self) -> (f64, f64) {
        let vmax = self.nodes.iter().map(|(_, v)| v.norm()).fold(0.0, f64::max);
        let mmax = self.multiplier.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if self.kernel.is_empty() {
            return (vmax * mmax, vmax * mmax);
        }
        let n_w = self.n_omega as isize;
        let h = self.half_width as isize;
        let mut rows = vec![0.0f64; self.n_omega];
        let mut cols = vec![0.0f64; self.n_omega];
        for k in 0..n_w {
            for l in (k - h).max(0)..=(k + h).min(n_w - 1) {
                let w = if l == 0 || l == n_w - 1 { 0.5 } else { 1.0 };
                let entry = self.kernel[(k - l + h) as usize].norm() * w * self.multiplier[l as usize].norm();
                rows[k as usize] += entry;
                cols[l as usize] += entry;
            }
        }
        let max = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
        (vmax * max(&rows), vmax * max(&cols))
    }
}

pub fn apply_a(
    u: &LatticeField,
    model: &PermittivityModel,
    line: &FrequencyLine,
    grid: &Grid1D,
) -> Result<LatticeField> {
    u.check(grid, line)?;
    let op = MemoryOperator::new(model, grid, line)?;
    let mut out = LatticeField::for_lattice(grid, line);
    op.apply_into(&u.values, &mut out.values);
    Ok(out)
}

fn check_spectrum(f: &Spectrum, line: &FrequencyLine) -> Result<()> {
    if f.len() != line.n_omega || f.omega.len() != line.n_omega {
        return Err(Error::Dimension(format!(
            "spectrum has {} samples, line has {}",
            f.len(),
            line.n_omega
        )));
    }
    let dw = line.d_omega();
    if (f.sigma - line.sigma).abs() > 1e-12 * (1.0 + line.sigma)
        || f.omega
            .iter()
            .enumerate()
            .any(|(k, w)| (w - line.omega(k)).abs() > 1e-9 * dw)
    {
        return Err(Error::Dimension("spectrum is not sampled on the frequency line".into()));
    }
    Ok(())
}

/// `F = f [D_h^2, rho] e^{i z x}` with the lattice second difference
/// `D_h^2 = -delta^2 / dx^2`.
pub fn commutator_source(f: &Spectrum, cut: &CutoffPair, grid: &Grid1D, line: &FrequencyLine) -> Result<LatticeField> {
    check_spectrum(f, line)?;
    let n_x = grid.len();
    let rho: Vec<f64> = grid.points().map(|x| cut.rho(x)).collect();
    let inv_dx2 = 1.0 / (grid.dx() * grid.dx());
    let mut out = LatticeField::for_lattice(grid, line);
    out.values.par_chunks_mut(n_x).enumerate().for_each(|(k, row)| {
        let z = line.z(k);
        let phi: Vec<Complex64> = grid.points().map(|x| (I * z * x).exp()).collect();
        for j in 1..n_x - 1 {
            let (dl, dr) = (rho[j - 1] - rho[j], rho[j + 1] - rho[j]);
            if dl != 0.0 || dr != 0.0 {
                row[j] = -f.values[k] * (dr * phi[j + 1] + dl * phi[j - 1]) * inv_dx2;
            }
        }
    });
    Ok(out)
}

/// `f (-rho'' - 2 i z rho') e^{i z x}`, the continuum commutator.
pub fn commutator_source_exact(
    f: &Spectrum,
    cut: &CutoffPair,
    grid: &Grid1D,
    line: &FrequencyLine,
) -> Result<LatticeField> {
    check_spectrum(f, line)?;
    let n_x = grid.len();
    let mut out = LatticeField::for_lattice(grid, line);
    out.values.par_chunks_mut(n_x).enumerate().for_each(|(k, row)| {
        let z = line.z(k);
        for (j, x) in grid.points().enumerate() {
            let (_, d1, d2) = cut.rho_jet(x);
            if d1 != 0.0 || d2 != 0.0 {
                row[j] = f.values[k] * (-d2 - 2.0 * I * z * d1) * (I * z * x).exp();
            }
        }
    });
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FredholmSolution {
    pub w: LatticeField,
    pub stats: GmresStats,
}

/// Solves `(I + A R0 rho1) w = rho1 F`.
///
/// `rho1 = 1` on the support of `F`, so `w` is also the solution with the
/// inner cut-off `rho` replaced by any cut-off equal to one there.
pub fn solve_fredholm(
    source: &LatticeField,
    model: &PermittivityModel,
    cut: &CutoffPair,
    line: &FrequencyLine,
    grid: &Grid1D,
    opts: &GmresOptions,
) -> Result<FredholmSolution> {
    source.check(grid, line)?;
    line.check_away_from_zero()?;
    if cut.r + 1e-12 < model.r {
        return Err(invalid("R", "cut-off plateau must cover the support of a"));
    }
    let n_x = grid.len();
    let rho1: Vec<f64> = grid.points().map(|x| cut.rho1(x)).collect();
    let mask = |v: &[Complex64], out: &mut [Complex64]| {
        out.par_chunks_mut(n_x).zip(v.par_chunks(n_x)).for_each(|(o, vk)| {
            for j in 0..n_x {
                o[j] = rho1[j] * vk[j];
            }
        });
    };
    let mut b = vec![ZERO; source.values.len()];
    mask(&source.values, &mut b);

    let op = MemoryOperator::new(model, grid, line)?;
    let scratch = std::sync::Mutex::new((vec![ZERO; b.len()], vec![ZERO; b.len()]));
    let apply = |v: &[Complex64], out: &mut [Complex64]| {
        let mut guard = scratch.lock().expect("scratch lock");
        let (masked, resolved) = &mut *guard;
        mask(v, masked);
        apply_resolvent_into(masked, line, grid, resolved);
        op.apply_into(resolved, out);
        out.iter_mut().zip(v).for_each(|(o, vi)| *o += vi);
    };
    let (w, stats) = gmres(apply, &b, opts)?;
    Ok(FredholmSolution {
        w: LatticeField {
            n_x,
            n_omega: line.n_omega,
            values: w,
        },
        stats,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatteringOutput {
    pub t_of_f: Spectrum,
    pub rplus_of_f: Spectrum,
    pub f: Spectrum,
    pub iterations: usize,
    pub residual: f64,
}

pub fn compute_t_rplus(
    f: &Spectrum,
    model: &PermittivityModel,
    cut: &CutoffPair,
    line: &FrequencyLine,
    grid: &Grid1D,
    opts: &GmresOptions,
) -> Result<ScatteringOutput> {
    let (out, _) = compute_t_rplus_with_solution(f, model, cut, line, grid, opts)?;
    Ok(out)
}

/// As [`compute_t_rplus`], also returning the Fredholm solution.
pub fn compute_t_rplus_with_solution(
    f: &Spectrum,
    model: &PermittivityModel,
    cut: &CutoffPair,
    line: &FrequencyLine,
    grid: &Grid1D,
    opts: &GmresOptions,
) -> Result<(ScatteringOutput, FredholmSolution)> {
    let source = commutator_source(f, cut, grid, line)?;
    let sol = solve_fredholm(&source, model, cut, line, grid, opts)?;
    let weights = trapezoid_weights(grid.len(), grid.dx());
    let xs: Vec<f64> = grid.points().collect();
    let (t, r): (Vec<Complex64>, Vec<Complex64>) = (0..line.n_omega)
        .into_par_iter()
        .map(|k| {
            let z = line.z(k);
            let row = sol.w.row(k);
            let (mut minus, mut plus) = (ZERO, ZERO);
            for j in 0..xs.len() {
                if row[j] != ZERO {
                    let e = (I * z * xs[j]).exp();
                    plus += weights[j] * row[j] * e;
                    minus += weights[j] * row[j] / e;
                }
            }
            let scale = I / (2.0 * line.z_reg(k));
            (f.values[k] + scale * minus, scale * plus)
        })
        .unzip();
    let omega = line.omegas();
    let out = ScatteringOutput {
        t_of_f: Spectrum {
            sigma: line.sigma,
            omega: omega.clone(),
            values: t,
        },
        rplus_of_f: Spectrum {
            sigma: line.sigma,
            omega,
            values: r,
        },
        f: f.clone(),
        iterations: sol.stats.iterations,
        residual: sol.stats.residual,
    };
    Ok((out, sol))
}

/// Classical scattering matrix of `-u'' + V u = lambda^2 u`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SMatrix {
    pub t: Complex64,
    pub r_plus: Complex64,
    pub r_minus: Complex64,
}

/// `(cos qd, sin(qd)/q, -q sin qd)`, even in `q`.
fn propagator(q2: Complex64, d: f64) -> (Complex64, Complex64, Complex64) {
    let q = q2.sqrt();
    let qd = q * d;
    let sinc = if qd.norm() < 1e-4 {
        let x2 = qd * qd;
        d * (ONE - x2 / 6.0 + x2 * x2 / 120.0)
    } else {
        qd.sin() / q
    };
    (qd.cos(), sinc, -q2 * sinc)
}

/// Carries `(u, u')` across the cells, left to right (`forward`) or back.
fn propagate(
    v: &StepPotential,
    lambda: Complex64,
    mut u: Complex64,
    mut du: Complex64,
    forward: bool,
) -> (Complex64, Complex64) {
    let bp = v.breakpoints();
    let cells: Vec<usize> = if forward {
        (0..v.values().len()).collect()
    } else {
        (0..v.values().len()).rev().collect()
    };
    for j in cells {
        let d = bp[j + 1] - bp[j];
        let (c, s, m) = propagator(lambda * lambda - v.values()[j], if forward { d } else { -d });
        let (nu, ndu) = (c * u + s * du, m * u + c * du);
        u = nu;
        du = ndu;
    }
    (u, du)
}

/// Amplitudes `(A, B)` of `u = A e^{i lambda x} + B e^{-i lambda x}` at `x`.
fn decompose(lambda: Complex64, x: f64, u: Complex64, du: Complex64) -> (Complex64, Complex64) {
    let d = du / (I * lambda);
    (
        0.5 * (u + d) * (-I * lambda * x).exp(),
        0.5 * (u - d) * (I * lambda * x).exp(),
    )
}

pub fn transfer_matrix_smatrix(v: &StepPotential, lambda: f64) -> Result<SMatrix> {
    if !v.is_real() {
        return Err(invalid(
            "potential",
            "the classical scattering matrix needs a real potential",
        ));
    }
    transfer_matrix_smatrix_complex(v, Complex64::new(lambda, 0.0))
}

/// Continuation to complex `lambda` (and complex `V`).
pub fn transfer_matrix_smatrix_complex(v: &StepPotential, lambda: Complex64) -> Result<SMatrix> {
    if lambda.norm() == 0.0 {
        return Err(invalid("lambda", "lambda = 0 is excluded"));
    }
    let (a, b) = v.support();
    // From the right: u = e^{i lambda x} for x > b.
    let e = (I * lambda * b).exp();
    let (u, du) = propagate(v, lambda, e, I * lambda * e, false);
    let (inc, refl) = decompose(lambda, a, u, du);
    let t = ONE / inc;
    let r_plus = refl / inc;
    // From the left: u = e^{-i lambda x} for x < a.
    let e = (-I * lambda * a).exp();
    let (u, du) = propagate(v, lambda, e, -I * lambda * e, true);
    let (refl, inc) = decompose(lambda, b, u, du);
    let r_minus = refl / inc;
    Ok(SMatrix { t, r_plus, r_minus })
}

/// `max_sigma e^{-2 sigma alpha_h} int |f(lambda + i sigma)|^2 d lambda`,
/// trapezoid in `lambda`.
pub fn hardy_norm_estimate<F>(f: F, alpha_h: f64, sigmas: &[f64], omega: &[f64]) -> f64
where
    F: Fn(Complex64) -> Complex64 + Sync,
{
    sigmas
        .iter()
        .map(|&s| {
            let spec = Spectrum::from_fn(s, omega, &f);
            (-2.0 * s * alpha_h).exp() * spec.l2_norm().powi(2)
        })
        .fold(0.0, f64::max)
}
