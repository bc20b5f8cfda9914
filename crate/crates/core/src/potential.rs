use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Piecewise constant `V(x) = V_j` on `(x_j, x_{j+1}]`, zero elsewhere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepPotential {
    breakpoints: Vec<f64>,
    values: Vec<Complex64>,
}

impl StepPotential {
    pub fn new(breakpoints: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if breakpoints.len() != values.len() + 1 {
            return Err(invalid(
                "breakpoints",
                format!(
                    "need len(values) + 1 = {} breakpoints, got {}",
                    values.len() + 1,
                    breakpoints.len()
                ),
            ));
        }
        if values.is_empty() {
            return Err(invalid("values", "need at least one cell"));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("breakpoints", "must be strictly increasing"));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) || values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(invalid("potential", "entries must be finite"));
        }
        Ok(Self { breakpoints, values })
    }

    pub fn real(breakpoints: Vec<f64>, values: &[f64]) -> Result<Self> {
        Self::new(breakpoints, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    /// `v0` on `(a, b]`.
    pub fn barrier(a: f64, b: f64, v0: Complex64) -> Result<Self> {
        Self::new(vec![a, b], vec![v0])
    }

    pub fn zero() -> Self {
        Self {
            breakpoints: vec![-1.0, 1.0],
            values: vec![Complex64::new(0.0, 0.0)],
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn support(&self) -> (f64, f64) {
        (self.breakpoints[0], *self.breakpoints.last().unwrap())
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == Complex64::new(0.0, 0.0))
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        // `(x_j, x_{j+1}]`: the first breakpoint >= x closes the cell.
        let k = self.breakpoints.partition_point(|&b| b < x);
        if k == 0 || k == self.breakpoints.len() {
            Complex64::new(0.0, 0.0)
        } else {
            self.values[k - 1]
        }
    }

    /// Mean of `V` over `[x - h/2, x + h/2]`.
    pub fn cell_average(&self, x: f64, h: f64) -> Complex64 {
        let (lo, hi) = (x - h / 2.0, x + h / 2.0);
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, v) in self.values.iter().enumerate() {
            let a = self.breakpoints[j].max(lo);
            let b = self.breakpoints[j + 1].min(hi);
            if b > a {
                acc += v * (b - a);
            }
        }
        acc / h
    }
}

pub fn eval_potential(v: &StepPotential, x: f64) -> Complex64 {
    v.eval(x)
}

/// `a(x, t) = V(x) exp(-alpha_p (t - t0)^2)` with exponential memory rate `gamma`.
///
/// In the time stepper the memory integral of `D_t u` is multiplied by the
/// coupling `i a(x, t)`; in frequency space the same model acts as
/// `a(x, D_omega) omega / (omega + i gamma)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PermittivityModel {
    pub potential: StepPotential,
    pub alpha_p: f64,
    pub t0: f64,
    pub gamma: f64,
    /// Half-width `R` of the spatial support.
    pub r: f64,
}

impl PermittivityModel {
    pub fn new(potential: StepPotential, alpha_p: f64, t0: f64, gamma: f64, r: f64) -> Result<Self> {
        let m = Self {
            potential,
            alpha_p,
            t0,
            gamma,
            r,
        };
        m.validate()?;
        Ok(m)
    }

    /// Model with `a` identically zero.
    pub fn free(r: f64) -> Self {
        Self {
            potential: StepPotential {
                breakpoints: vec![-r, r],
                values: vec![Complex64::new(0.0, 0.0)],
            },
            alpha_p: 0.0,
            t0: 0.0,
            gamma: 0.0,
            r,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0) || !self.r.is_finite() {
            return Err(invalid("R", format!("must be positive, got {}", self.r)));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(invalid("gamma", format!("must be >= 0, got {}", self.gamma)));
        }
        if !(self.alpha_p >= 0.0) || !self.alpha_p.is_finite() {
            return Err(invalid("alpha_p", format!("must be >= 0, got {}", self.alpha_p)));
        }
        if !self.t0.is_finite() {
            return Err(invalid("t0", "must be finite"));
        }
        let (lo, hi) = self.potential.support();
        if lo < -self.r || hi > self.r {
            return Err(invalid(
                "R",
                format!("potential support [{lo}, {hi}] exceeds [-{0}, {0}]", self.r),
            ));
        }
        Ok(())
    }

    pub fn time_profile(&self, t: f64) -> f64 {
        let s = t - self.t0;
        (-self.alpha_p * s * s).exp()
    }

    pub fn eval_a(&self, x: f64, t: f64) -> Complex64 {
        if x.abs() > self.r {
            return Complex64::new(0.0, 0.0);
        }
        self.potential.eval(x) * self.time_profile(t)
    }

    /// Coefficient multiplying the memory integral in the `v` update.
    pub fn coupling(&self, x: f64, t: f64) -> Complex64 {
        Complex64::i() * self.eval_a(x, t)
    }

    pub fn is_free(&self) -> bool {
        self.potential.is_zero()
    }
}

pub fn eval_a(m: &PermittivityModel, x: f64, t: f64) -> Complex64 {
    m.eval_a(x, t)
}
