//! Splitting of probe recordings into incident, reflected and transmitted
//! profiles, and the transform `h -> int h(s) e^{i z s} ds` on a line
//! `Im z = sigma` in the upper half plane.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timedomain::{ProbeSeries, Trajectory};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Samples `h(s0 + k ds)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub s0: f64,
    pub ds: f64,
    pub values: Vec<Complex64>,
}

impl TimeSeries {
    pub fn s(&self, k: usize) -> f64 {
        self.s0 + k as f64 * self.ds
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Trapezoid approximation of `int |h|^2 ds`.
    pub fn energy(&self) -> f64 {
        let n = self.values.len();
        self.values
            .iter()
            .enumerate()
            .map(|(k, z)| {
                let w = if k == 0 || k + 1 == n { 0.5 } else { 1.0 };
                w * z.norm_sqr()
            })
            .sum::<f64>()
            * self.ds
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            values: self.values.iter().map(|z| z * c).collect(),
            ..self.clone()
        }
    }
}

/// Samples of a transform on `omega_k + i sigma`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub sigma: f64,
    pub omega: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl Spectrum {
    pub fn z(&self, k: usize) -> Complex64 {
        Complex64::new(self.omega[k], self.sigma)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn from_fn(sigma: f64, omega: &[f64], f: impl Fn(Complex64) -> Complex64 + Sync) -> Self {
        Self {
            sigma,
            omega: omega.to_vec(),
            values: omega.par_iter().map(|&w| f(Complex64::new(w, sigma))).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Trapezoid approximation of `int |h|^2 d omega`.
    pub fn l2_norm(&self) -> f64 {
        l2_norm_trapezoid(&self.omega, &self.values)
    }
}

pub(crate) fn l2_norm_trapezoid(omega: &[f64], values: &[Complex64]) -> f64 {
    let n = values.len();
    let mut acc = 0.0;
    for k in 0..n {
        let left = if k > 0 { omega[k] - omega[k - 1] } else { 0.0 };
        let right = if k + 1 < n { omega[k + 1] - omega[k] } else { 0.0 };
        acc += 0.5 * (left + right) * values[k].norm_sqr();
    }
    acc.sqrt()
}

/// `||a - b|| / ||b||` in the trapezoid norm over the common grid.
pub fn relative_l2(a: &Spectrum, b: &Spectrum) -> f64 {
    let diff: Vec<Complex64> = a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect();
    l2_norm_trapezoid(&b.omega, &diff) / b.l2_norm()
}

/// Threshold for the decay check, relative to the series maximum.
pub const WINDOW_DECAY_TOL: f64 = 1e-6;

/// `h^(omega + i sigma) = int h(s) e^{-sigma s} e^{i omega s} ds` by the
/// trapezoid rule over the sample window.
pub fn time_to_frequency(series: &TimeSeries, omega: &[f64], sigma: f64) -> Result<Spectrum> {
    check_decay(series, sigma)?;
    Ok(time_to_frequency_unchecked(series, omega, sigma))
}

pub fn time_to_frequency_unchecked(series: &TimeSeries, omega: &[f64], sigma: f64) -> Spectrum {
    let n = series.len();
    let weighted: Vec<Complex64> = series
        .values
        .iter()
        .enumerate()
        .map(|(k, h)| {
            let w = if k == 0 || k + 1 == n { 0.5 } else { 1.0 };
            h * (w * series.ds * (-sigma * series.s(k)).exp())
        })
        .collect();
    let values = omega
        .par_iter()
        .map(|&w| {
            // e^{i w s_k} by recurrence from s0, refreshed to keep round-off flat.
            let step = Complex64::from_polar(1.0, w * series.ds);
            let mut phase = Complex64::from_polar(1.0, w * series.s0);
            let mut acc = ZERO;
            for (k, h) in weighted.iter().enumerate() {
                if k % 256 == 0 {
                    phase = Complex64::from_polar(1.0, w * series.s(k));
                }
                acc += h * phase;
                phase *= step;
            }
            acc
        })
        .collect();
    Spectrum {
        sigma,
        omega: omega.to_vec(),
        values,
    }
}

/// Largest admissible variation over the final stretch of a series whose
/// constant tail is extrapolated.
pub const TAIL_FLATNESS_TOL: f64 = 1e-4;

/// As [`time_to_frequency`] for `sigma > 0`, continuing a series that has
/// settled to a constant `h_N` by `int_{s_N}^inf h_N e^{izs} ds = i h_N e^{i z s_N} / z`.
///
/// Returns the spectrum and the L2 size of the added tail relative to it.
pub fn time_to_frequency_with_tail(series: &TimeSeries, omega: &[f64], sigma: f64) -> Result<(Spectrum, f64)> {
    if !(sigma > 0.0) {
        return Err(crate::error::invalid("sigma", "tail extrapolation needs sigma > 0"));
    }
    let n = series.len();
    let peak = series.max_abs();
    if n < 20 || peak == 0.0 {
        return Ok((time_to_frequency_unchecked(series, omega, sigma), 0.0));
    }
    let last = series.values[n - 1];
    let flat = series.values[n - n / 20..]
        .iter()
        .map(|h| (h - last).norm())
        .fold(0.0, f64::max)
        / peak;
    if flat > TAIL_FLATNESS_TOL {
        return Err(Error::WindowNotDecayed {
            side: "right",
            ratio: flat,
        });
    }
    if (series.values[0].norm() / peak) > WINDOW_DECAY_TOL {
        return Err(Error::WindowNotDecayed {
            side: "left",
            ratio: series.values[0].norm() / peak,
        });
    }
    let mut spec = time_to_frequency_unchecked(series, omega, sigma);
    let s_end = series.s(n - 1);
    let tails: Vec<Complex64> = omega
        .iter()
        .map(|&w| {
            let z = Complex64::new(w, sigma);
            Complex64::i() * last * (Complex64::i() * z * s_end).exp() / z
        })
        .collect();
    spec.values.iter_mut().zip(&tails).for_each(|(h, t)| *h += t);
    let size = l2_norm_trapezoid(omega, &tails) / spec.l2_norm().max(f64::MIN_POSITIVE);
    Ok((spec, size))
}

fn check_decay(series: &TimeSeries, sigma: f64) -> Result<()> {
    if series.is_empty() {
        return Ok(());
    }
    let weighted = |k: usize| series.values[k].norm() * (-sigma * series.s(k)).exp();
    let peak = (0..series.len()).map(weighted).fold(0.0, f64::max);
    if peak == 0.0 {
        return Ok(());
    }
    let right = weighted(series.len() - 1) / peak;
    if right > WINDOW_DECAY_TOL {
        return Err(Error::WindowNotDecayed {
            side: "right",
            ratio: right,
        });
    }
    if sigma == 0.0 {
        let left = weighted(0) / peak;
        if left > WINDOW_DECAY_TOL {
            return Err(Error::WindowNotDecayed {
                side: "left",
                ratio: left,
            });
        }
    }
    Ok(())
}

/// Profiles along the characteristics: the incident wave `h(t - x_L)`, the
/// reflected wave `G(t + x_L)` and the transmitted wave `F(t - x_R)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatteringRecord {
    pub incident: TimeSeries,
    pub reflected_g: TimeSeries,
    pub transmitted_f: TimeSeries,
    pub r: f64,
    pub probe_left: f64,
    pub probe_right: f64,
    /// `int |D_t u|^2 dx` between the probes at the final time, relative to
    /// `int |G'|^2 + |F'|^2 ds`.
    pub pending_fraction: f64,
}

/// What is subtracted at the left probe to isolate the reflected wave.
#[derive(Clone, Copy, Debug)]
pub enum IncidentReference<'a> {
    /// The exact free solution `g(x_L - t)`.
    Analytic,
    /// Probe values of a run with `a = 0` on the same grid, which carries the
    /// same numerical dispersion as the run being split.
    Simulated(&'a ProbeSeries),
}

/// Largest admissible `pending_fraction`.
pub const WINDOW_PENDING_TOL: f64 = 0.01;

pub fn split_fields(traj: &Trajectory) -> Result<ScatteringRecord> {
    split_fields_with(traj, IncidentReference::Analytic)
}

pub fn split_fields_with(traj: &Trajectory, reference: IncidentReference) -> Result<ScatteringRecord> {
    let rec = split_fields_unchecked(traj, reference)?;
    if rec.pending_fraction > WINDOW_PENDING_TOL {
        return Err(Error::WindowTooShort {
            fraction: rec.pending_fraction,
        });
    }
    Ok(rec)
}

/// As [`split_fields_with`] but without the window-length check.
pub fn split_fields_unchecked(traj: &Trajectory, reference: IncidentReference) -> Result<ScatteringRecord> {
    let cfg = &traj.config;
    let p = &traj.probes;
    let r = cfg.model.r;
    for probe in [p.x_left, p.x_right] {
        if probe.abs() <= r {
            return Err(Error::ProbeInsideSupport { probe, r });
        }
    }
    let dt = p.dt;
    let n = p.left.len();
    let incident: Vec<Complex64> = match reference {
        IncidentReference::Analytic => (0..n).map(|k| cfg.packet.eval(p.x_left - k as f64 * dt)).collect(),
        IncidentReference::Simulated(free) => {
            if free.left.len() != n || free.x_left != p.x_left || free.dt != dt {
                return Err(Error::Dimension(
                    "reference probes differ from the run being split".into(),
                ));
            }
            free.left.clone()
        }
    };
    let reflected: Vec<Complex64> = p.left.iter().zip(&incident).map(|(u, h)| u - h).collect();

    let incident = TimeSeries {
        s0: -p.x_left,
        ds: dt,
        values: incident,
    };
    let reflected_g = TimeSeries {
        s0: p.x_left,
        ds: dt,
        values: reflected,
    };
    let transmitted_f = TimeSeries {
        s0: -p.x_right,
        ds: dt,
        values: p.right.clone(),
    };

    // Wave energy still between the probes, measured through v = D_t u so
    // that a static plateau left behind by the scattering does not count.
    let grid = &cfg.grid;
    let pending: f64 = grid
        .points()
        .zip(&traj.final_state.v)
        .filter(|(x, _)| *x > p.x_left && *x < p.x_right)
        .map(|(_, v)| v.norm_sqr())
        .sum::<f64>()
        * grid.dx();
    let recorded = derivative_energy(&reflected_g) + derivative_energy(&transmitted_f);
    let pending_fraction = if recorded > 0.0 {
        pending / recorded
    } else if pending > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };

    Ok(ScatteringRecord {
        incident,
        reflected_g,
        transmitted_f,
        r,
        probe_left: p.x_left,
        probe_right: p.x_right,
        pending_fraction,
    })
}

/// `int |h'|^2 ds` by centred differences.
fn derivative_energy(ts: &TimeSeries) -> f64 {
    let n = ts.len();
    if n < 3 {
        return 0.0;
    }
    (1..n - 1)
        .map(|k| ((ts.values[k + 1] - ts.values[k - 1]) / (2.0 * ts.ds)).norm_sqr())
        .sum::<f64>()
        * ts.ds
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportReport {
    pub max_reflected_before: f64,
    pub max_transmitted_before: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Largest `|G(s)|`, `|F(s)|` over `s < -R` relative to the record maximum.
pub fn support_check(rec: &ScatteringRecord, tol: f64) -> SupportReport {
    let scale = rec
        .reflected_g
        .max_abs()
        .max(rec.transmitted_f.max_abs())
        .max(rec.incident.max_abs());
    let before = |ts: &TimeSeries| {
        let m = (0..ts.len())
            .filter(|&k| ts.s(k) < -rec.r)
            .map(|k| ts.values[k].norm())
            .fold(0.0, f64::max);
        if scale > 0.0 {
            m / scale
        } else {
            0.0
        }
    };
    let g = before(&rec.reflected_g);
    let f = before(&rec.transmitted_f);
    SupportReport {
        max_reflected_before: g,
        max_transmitted_before: f,
        tol,
        pass: g < tol && f < tol,
    }
}

/// `(G^, F^)` on `omega + i sigma`.
pub fn empirical_coefficients(rec: &ScatteringRecord, omega: &[f64], sigma: f64) -> Result<(Spectrum, Spectrum)> {
    Ok((
        time_to_frequency(&rec.reflected_g, omega, sigma)?,
        time_to_frequency(&rec.transmitted_f, omega, sigma)?,
    ))
}

/// Relative threshold below which `|g^|` is treated as out of band.
pub const BAND_MASK: f64 = 0.01;

/// `num / den` where `|den| > BAND_MASK max |den|`.
pub fn masked_ratio(num: &Spectrum, den: &Spectrum) -> Vec<Option<Complex64>> {
    let cut = BAND_MASK * den.max_abs();
    num.values
        .iter()
        .zip(&den.values)
        .map(|(a, b)| (b.norm() > cut).then(|| a / b))
        .collect()
}
