use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Uniform grid `x_j = x_min + j dx`, `j = 0..n_x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    x_min: f64,
    dx: f64,
    n_x: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, dx: f64, n_x: usize) -> Result<Self> {
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(invalid("dx", format!("must be positive, got {dx}")));
        }
        if !x_min.is_finite() {
            return Err(invalid("x_min", "must be finite"));
        }
        if n_x < 3 {
            return Err(invalid("n_x", format!("need at least 3 points, got {n_x}")));
        }
        Ok(Self { x_min, dx, n_x })
    }

    /// Points `a, a + dx, ...` up to and including `b` (with round-off slack),
    /// the same node set as Matlab's `a:dx:b`.
    pub fn colon(a: f64, dx: f64, b: f64) -> Result<Self> {
        if !(dx > 0.0) {
            return Err(invalid("dx", format!("must be positive, got {dx}")));
        }
        if !(b > a) {
            return Err(invalid("x_max", "must exceed x_min"));
        }
        let steps = ((b - a) / dx * (1.0 + 1e-12)).floor() as usize;
        Self::new(a, dx, steps + 1)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.n_x - 1)
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.n_x
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n_x).map(move |j| self.x(j))
    }

    /// Index of the node nearest to `x`, if `x` lies inside the grid.
    pub fn nearest(&self, x: f64) -> Option<usize> {
        let s = (x - self.x_min) / self.dx;
        if s < -0.5 || s > self.n_x as f64 - 0.5 {
            return None;
        }
        Some((s.round() as usize).min(self.n_x - 1))
    }

    /// The grid with half the spacing over the same nodes.
    pub fn refined(&self) -> Self {
        Self {
            x_min: self.x_min,
            dx: self.dx / 2.0,
            n_x: 2 * self.n_x - 1,
        }
    }
}

/// Uniform time levels `t_n = n dt`, `n = 0..n_t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeAxis {
    dt: f64,
    n_t: usize,
}

impl TimeAxis {
    pub fn new(dt: f64, n_t: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(invalid("dt", format!("must be positive, got {dt}")));
        }
        if n_t < 2 {
            return Err(invalid("n_t", "need at least two time levels"));
        }
        Ok(Self { dt, n_t })
    }

    /// Levels `0:dt:t_final`, as in Matlab.
    pub fn until(t_final: f64, dt: f64) -> Result<Self> {
        if !(t_final > 0.0) {
            return Err(invalid("T", format!("must be positive, got {t_final}")));
        }
        if !(dt > 0.0) {
            return Err(invalid("dt", format!("must be positive, got {dt}")));
        }
        let steps = (t_final / dt * (1.0 + 1e-12)).floor() as usize;
        Self::new(dt, steps + 1)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    #[inline]
    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn t_final(&self) -> f64 {
        self.t(self.n_t - 1)
    }

    pub fn cfl(&self, grid: &Grid1D) -> f64 {
        self.dt / grid.dx()
    }

    pub fn refined(&self) -> Self {
        Self {
            dt: self.dt / 2.0,
            n_t: 2 * self.n_t - 1,
        }
    }
}
