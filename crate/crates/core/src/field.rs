use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid1D;

/// The pair `(u, v = D_t u)` at one time level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub u: Vec<Complex64>,
    pub v: Vec<Complex64>,
    pub t: f64,
}

impl FieldState {
    pub fn zeros(grid: &Grid1D, t: f64) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); grid.len()];
        Self { u: z.clone(), v: z, t }
    }

    pub fn new(u: Vec<Complex64>, v: Vec<Complex64>, t: f64) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::Dimension(format!(
                "u has {} entries, v has {}",
                u.len(),
                v.len()
            )));
        }
        Ok(Self { u, v, t })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.u
            .iter()
            .chain(&self.v)
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn max_abs_u(&self) -> f64 {
        self.u.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Recursive memory integral `M_n = sum_k e^{-gamma (t_n - t_k)} dt v_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryAccumulator {
    pub m: Vec<Complex64>,
    pub t: f64,
    pub gamma: f64,
}

impl MemoryAccumulator {
    pub fn zeros(n: usize, gamma: f64, t: f64) -> Self {
        Self {
            m: vec![Complex64::new(0.0, 0.0); n],
            t,
            gamma,
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}
