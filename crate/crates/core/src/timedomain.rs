//! Leapfrog evolution of the first-order system
//!
//! ```text
//! D_t u = v,   D_t v = D_x^2 u + i a(x, t) M,   M(t) = int_{-inf}^t e^{-gamma (t - s)} v(s) ds
//! ```
//!
//! with `D = -i d` and the frozen-boundary second difference for `D_x^2`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{FieldState, MemoryAccumulator};
use crate::grid::{Grid1D, TimeAxis};
use crate::packet::WavePacket;
use crate::potential::PermittivityModel;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Arrays shorter than this are stepped on the calling thread.
const PAR_MIN_LEN: usize = 4096;

/// Largest stable `dt/dx`: the two-level system has eigenvalues up to
/// `2/dx`, and leapfrog needs `|lambda dt| <= 1`.
pub const MAX_CFL: f64 = 0.5;

/// Blow-up threshold relative to the initial amplitude.
const INSTABILITY_FACTOR: f64 = 1e6;

/// `u -> -(u_{j+1} - 2 u_j + u_{j-1}) / dx^2` with zero first and last rows.
#[derive(Clone, Copy, Debug)]
pub struct Laplacian {
    n: usize,
    inv_dx2: f64,
}

impl Laplacian {
    pub fn new(grid: &Grid1D) -> Self {
        Self {
            n: grid.len(),
            inv_dx2: 1.0 / (grid.dx() * grid.dx()),
        }
    }

    #[inline]
    pub fn at(&self, u: &[Complex64], j: usize) -> Complex64 {
        if j == 0 || j + 1 >= self.n {
            ZERO
        } else {
            -(u[j + 1] - 2.0 * u[j] + u[j - 1]) * self.inv_dx2
        }
    }

    pub fn apply(&self, u: &[Complex64]) -> Vec<Complex64> {
        (0..self.n).map(|j| self.at(u, j)).collect()
    }
}

pub fn build_laplacian_apply(grid: &Grid1D) -> impl Fn(&[Complex64]) -> Vec<Complex64> {
    let lap = Laplacian::new(grid);
    move |u| lap.apply(u)
}

/// Whether `simulate` enforces the light-cone and packet-placement checks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPolicy {
    #[default]
    Strict,
    /// Run even if signals may reach the frozen boundary; the largest
    /// amplitude seen next to the boundary is reported instead.
    Unchecked,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub grid: Grid1D,
    pub time: TimeAxis,
    pub packet: WavePacket,
    pub model: PermittivityModel,
    pub prehistory_horizon: f64,
    pub probe_left: f64,
    pub probe_right: f64,
    /// Keep every `stride`-th level in the trajectory.
    pub stride: usize,
    pub boundary: BoundaryPolicy,
}

impl SimulationConfig {
    /// Defaults: horizon 10, stride 4, probes half a unit outside the support.
    pub fn new(grid: Grid1D, time: TimeAxis, packet: WavePacket, model: PermittivityModel) -> Self {
        let r = model.r;
        Self {
            grid,
            time,
            packet,
            model,
            prehistory_horizon: 10.0,
            probe_left: -r - 0.5,
            probe_right: r + 0.5,
            stride: 4,
            boundary: BoundaryPolicy::Strict,
        }
    }

    pub fn with_model(&self, model: PermittivityModel) -> Self {
        Self { model, ..self.clone() }
    }

    /// Same configuration with `a = 0`.
    pub fn free(&self) -> Self {
        self.with_model(PermittivityModel::free(self.model.r))
    }

    pub fn validate(&self) -> Result<()> {
        self.packet.validate()?;
        self.model.validate()?;
        let ratio = self.time.cfl(&self.grid);
        if ratio > MAX_CFL * (1.0 + 1e-12) {
            return Err(Error::Cfl { ratio, limit: MAX_CFL });
        }
        if self.stride == 0 {
            return Err(invalid("stride", "must be at least 1"));
        }
        let r = self.model.r;
        let front = self.packet.x0 + self.packet.support_radius();
        if front >= -r {
            return Err(invalid(
                "x0",
                format!("packet front {front} must lie left of -R = {}", -r),
            ));
        }
        let (lo, hi) = (self.grid.x_min(), self.grid.x_max());
        for (p, left) in [(self.probe_left, true), (self.probe_right, false)] {
            if !(p > lo && p < hi) {
                return Err(invalid("probe", format!("probe {p} outside the grid ({lo}, {hi})")));
            }
            if (left && p >= -r) || (!left && p <= r) {
                return Err(Error::ProbeInsideSupport { probe: p, r });
            }
        }
        if self.model.gamma > 0.0 && self.prehistory_horizon < 5.0 / self.model.gamma {
            return Err(Error::HorizonTooShort {
                horizon: self.prehistory_horizon,
                required: 5.0 / self.model.gamma,
            });
        }
        if !(self.prehistory_horizon > 0.0) {
            return Err(invalid("prehistory_horizon", "must be positive"));
        }
        if self.boundary == BoundaryPolicy::Strict {
            self.check_cone()?;
        }
        Ok(())
    }

    /// Speed-one reach of the incident packet and of anything scattered
    /// from `[-R, R]`, compared with the grid ends.
    pub fn check_cone(&self) -> Result<()> {
        let t = self.time.t_final();
        let w = self.packet.support_radius();
        let r = self.model.r;
        let (lo, hi) = (self.grid.x_min(), self.grid.x_max());
        let right = self.packet.x0 + w + t;
        let left = (self.packet.x0 - w).min(self.packet.x0 + w - 2.0 * r - t);
        if right >= hi {
            return Err(Error::ConeViolation {
                reach: right,
                boundary: hi,
            });
        }
        if left <= lo {
            return Err(Error::ConeViolation {
                reach: left,
                boundary: lo,
            });
        }
        Ok(())
    }
}

/// Field values at the two probe nodes, recorded at every time level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSeries {
    pub x_left: f64,
    pub x_right: f64,
    pub dt: f64,
    pub left: Vec<Complex64>,
    pub right: Vec<Complex64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory {
    pub config: SimulationConfig,
    pub states: Vec<FieldState>,
    pub probes: ProbeSeries,
    pub final_state: FieldState,
    /// Largest `|u|` seen on the nodes next to the frozen rows.
    pub boundary_amplitude: f64,
}

impl Trajectory {
    pub fn stride(&self) -> usize {
        self.config.stride
    }
}

/// Precomputed per-node data for one configuration.
struct Stepper {
    lap: Laplacian,
    dt: f64,
    decay: f64,
    /// `a(x_j, t0)`, zero outside `[-R, R]`.
    a_nodes: Vec<Complex64>,
    alpha_p: f64,
    t0: f64,
}

impl Stepper {
    fn new(cfg: &SimulationConfig) -> Self {
        let m = &cfg.model;
        Self {
            lap: Laplacian::new(&cfg.grid),
            dt: cfg.time.dt(),
            decay: (-m.gamma * cfg.time.dt()).exp(),
            a_nodes: cfg.grid.points().map(|x| m.eval_a(x, m.t0)).collect(),
            alpha_p: m.alpha_p,
            t0: m.t0,
        }
    }

    fn profile(&self, t: f64) -> f64 {
        let s = t - self.t0;
        (-self.alpha_p * s * s).exp()
    }

    fn startup(&self, s0: &FieldState, m0: &[Complex64]) -> FieldState {
        let n = s0.len();
        let h = I * self.dt;
        let p = self.profile(s0.t);
        let mut out = FieldState {
            u: vec![ZERO; n],
            v: vec![ZERO; n],
            t: s0.t + self.dt,
        };
        for j in 0..n {
            out.u[j] = s0.u[j] + h * s0.v[j];
            let c = I * self.a_nodes[j] * p;
            out.v[j] = s0.v[j] + h * (self.lap.at(&s0.u, j) + c * m0[j]);
        }
        out
    }

    fn leapfrog_into(&self, prev: &FieldState, cur: &FieldState, m: &[Complex64], out: &mut FieldState) {
        let h = 2.0 * I * self.dt;
        let p = self.profile(cur.t);
        let kernel = |j: usize, (u, v): (&mut Complex64, &mut Complex64)| {
            *u = prev.u[j] + h * cur.v[j];
            let c = I * self.a_nodes[j] * p;
            *v = prev.v[j] + h * (self.lap.at(&cur.u, j) + c * m[j]);
        };
        if out.u.len() >= PAR_MIN_LEN {
            out.u
                .par_iter_mut()
                .zip(out.v.par_iter_mut())
                .enumerate()
                .with_min_len(PAR_MIN_LEN / 2)
                .for_each(|(j, uv)| kernel(j, uv));
        } else {
            out.u
                .iter_mut()
                .zip(out.v.iter_mut())
                .enumerate()
                .for_each(|(j, uv)| kernel(j, uv));
        }
        out.t = cur.t + self.dt;
    }

    fn update_memory(&self, m: &mut [Complex64], v: &[Complex64]) {
        let (decay, dt) = (self.decay, self.dt);
        if m.len() >= PAR_MIN_LEN {
            m.par_iter_mut()
                .zip(v.par_iter())
                .with_min_len(PAR_MIN_LEN / 2)
                .for_each(|(m, v)| *m = decay * *m + dt * v);
        } else {
            m.iter_mut().zip(v).for_each(|(m, v)| *m = decay * *m + dt * v);
        }
    }
}

/// `u(0) = g`, `v(0) = i g'`.
pub fn initial_state(cfg: &SimulationConfig) -> FieldState {
    let g = &cfg.packet;
    FieldState {
        u: cfg.grid.points().map(|x| g.eval(x)).collect(),
        v: cfg.grid.points().map(|x| I * g.derivative(x)).collect(),
        t: 0.0,
    }
}

/// `M_0(x) = int_0^H e^{-gamma s} i g'(x + s) ds` by the trapezoid rule on
/// `s = 0:dt:H`, using the free pre-history `u(t, x) = g(x - t)`.
pub fn init_prehistory(cfg: &SimulationConfig) -> Result<MemoryAccumulator> {
    let gamma = cfg.model.gamma;
    let h = cfg.prehistory_horizon;
    if gamma > 0.0 && h < 5.0 / gamma {
        return Err(Error::HorizonTooShort {
            horizon: h,
            required: 5.0 / gamma,
        });
    }
    let ds = cfg.time.dt();
    let last = (h / ds * (1.0 + 1e-12)).floor() as usize;
    let g = cfg.packet;
    // |g'| underflows beyond this distance from x0.
    let reach = (750.0 * g.sigma_g).sqrt();
    let weight = |k: usize| {
        let w = (-gamma * k as f64 * ds).exp() * ds;
        if k == 0 || k == last {
            0.5 * w
        } else {
            w
        }
    };
    let m: Vec<Complex64> = cfg
        .grid
        .points()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&x| {
            let lo = ((g.x0 - reach - x) / ds).ceil().max(0.0);
            let hi = ((g.x0 + reach - x) / ds).floor().min(last as f64);
            if hi < lo {
                return ZERO;
            }
            let mut acc = ZERO;
            for k in lo as usize..=hi as usize {
                acc += weight(k) * g.derivative(x + k as f64 * ds);
            }
            I * acc
        })
        .collect();
    Ok(MemoryAccumulator { m, t: 0.0, gamma })
}

/// `M_n = e^{-gamma dt} M_{n-1} + dt v_n`.
pub fn update_memory(m: &MemoryAccumulator, v_n: &[Complex64], dt: f64) -> Result<MemoryAccumulator> {
    if m.len() != v_n.len() {
        return Err(Error::Dimension(format!(
            "memory has {} nodes, field has {}",
            m.len(),
            v_n.len()
        )));
    }
    let decay = (-m.gamma * dt).exp();
    Ok(MemoryAccumulator {
        m: m.m.iter().zip(v_n).map(|(m, v)| decay * m + dt * v).collect(),
        t: m.t + dt,
        gamma: m.gamma,
    })
}

/// Forward Euler step from level 0, coupling evaluated at `t = s0.t`.
pub fn step_startup(s0: &FieldState, m0: &MemoryAccumulator, cfg: &SimulationConfig) -> FieldState {
    Stepper::new(cfg).startup(s0, &m0.m)
}

/// `u_{n+1} = u_{n-1} + 2i dt v_n`, `v_{n+1} = v_{n-1} + 2i dt (D_x^2 u_n + i a(t_n) M_n)`.
pub fn step_leapfrog(
    prev: &FieldState,
    cur: &FieldState,
    m_n: &MemoryAccumulator,
    cfg: &SimulationConfig,
) -> FieldState {
    let mut out = FieldState {
        u: vec![ZERO; cur.len()],
        v: vec![ZERO; cur.len()],
        t: 0.0,
    };
    Stepper::new(cfg).leapfrog_into(prev, cur, &m_n.m, &mut out);
    out
}

pub fn simulate(cfg: &SimulationConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let grid = &cfg.grid;
    let n_t = cfg.time.n_t();
    let stepper = Stepper::new(cfg);
    let jl = grid.nearest(cfg.probe_left).expect("probe validated inside grid");
    let jr = grid.nearest(cfg.probe_right).expect("probe validated inside grid");
    let edge = [1, grid.len() - 2];

    let s0 = initial_state(cfg);
    let limit = INSTABILITY_FACTOR * s0.max_abs_u().max(f64::MIN_POSITIVE);
    let mut memory = init_prehistory(cfg)?;

    let mut probes = ProbeSeries {
        x_left: grid.x(jl),
        x_right: grid.x(jr),
        dt: cfg.time.dt(),
        left: Vec::with_capacity(n_t),
        right: Vec::with_capacity(n_t),
    };
    let mut states = Vec::with_capacity(n_t.div_ceil(cfg.stride));
    let mut boundary_amplitude = 0.0f64;
    let mut observe = |k: usize, s: &FieldState, states: &mut Vec<FieldState>| -> Result<()> {
        probes.left.push(s.u[jl]);
        probes.right.push(s.u[jr]);
        for &j in &edge {
            boundary_amplitude = boundary_amplitude.max(s.u[j].norm());
        }
        if k.is_multiple_of(cfg.stride) {
            states.push(s.clone());
        }
        if k.is_multiple_of(16) || k + 1 == n_t {
            let max_abs = s.max_abs_u();
            if !(max_abs <= limit) {
                return Err(Error::Instability { t: s.t, max_abs, limit });
            }
        }
        Ok(())
    };

    observe(0, &s0, &mut states)?;
    let s1 = stepper.startup(&s0, &memory.m);
    observe(1, &s1, &mut states)?;
    let (mut prev, mut cur) = (s0, s1);
    let mut next = FieldState::zeros(grid, 0.0);
    for k in 1..n_t - 1 {
        stepper.update_memory(&mut memory.m, &cur.v);
        memory.t = cur.t;
        stepper.leapfrog_into(&prev, &cur, &memory.m, &mut next);
        // Levels are t_k = k dt exactly, not accumulated sums.
        next.t = cfg.time.t(k + 1);
        observe(k + 1, &next, &mut states)?;
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }

    Ok(Trajectory {
        config: cfg.clone(),
        states,
        probes,
        final_state: cur,
        boundary_amplitude,
    })
}
