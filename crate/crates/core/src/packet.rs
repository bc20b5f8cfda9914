use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Gaussian wave packet `g(x) = exp(-(x-x0)^2/sigma_g) exp(i lambda (x-x0))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WavePacket {
    pub x0: f64,
    pub sigma_g: f64,
    pub lambda: f64,
}

impl WavePacket {
    pub fn new(x0: f64, sigma_g: f64, lambda: f64) -> Result<Self> {
        let p = Self { x0, sigma_g, lambda };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_g > 0.0) || !self.sigma_g.is_finite() {
            return Err(invalid("sigma_g", format!("must be positive, got {}", self.sigma_g)));
        }
        if !self.x0.is_finite() || !self.lambda.is_finite() {
            return Err(invalid("packet", "x0 and lambda must be finite"));
        }
        Ok(())
    }

    /// Radius `6 sqrt(sigma_g)` outside which `|g| < e^{-36}`.
    pub fn support_radius(&self) -> f64 {
        6.0 * self.sigma_g.sqrt()
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        let y = x - self.x0;
        Complex64::from_polar((-y * y / self.sigma_g).exp(), self.lambda * y)
    }

    pub fn derivative(&self, x: f64) -> Complex64 {
        let y = x - self.x0;
        Complex64::new(-2.0 * y / self.sigma_g, self.lambda) * self.eval(x)
    }

    /// Time transform `int g(-t) e^{i z t} dt` of the incident signal seen at
    /// `x = 0`, continued to complex `z`.
    pub fn incident_transform(&self, z: Complex64) -> Complex64 {
        let i = Complex64::i();
        let d = self.lambda - z;
        (-i * z * self.x0 - self.sigma_g * d * d / 4.0).exp() * (std::f64::consts::PI * self.sigma_g).sqrt()
    }
}

pub fn eval_packet(p: &WavePacket, x: f64) -> Complex64 {
    p.eval(x)
}

pub fn eval_packet_derivative(p: &WavePacket, x: f64) -> Complex64 {
    p.derivative(x)
}
