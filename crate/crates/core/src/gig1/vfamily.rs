//! Lyapunov functions `V` for heavy-tailed increments and the induced `phi(t) = kappa V'(V^{-1}(t))`.

use serde::Serialize;

use crate::drift::{Phi, PowerPhi};
use crate::error::{domain, Error, Result};

/// One of the three standard choices of `V`, each with its shift `x0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum VFamily {
    /// `V(x) = exp(c0 (x + x0)^alpha)`.
    ModeratelyExponential { c0: f64, alpha: f64, x0: f64 },
    /// `V(x) = (x + x0)^beta0`.
    Polynomial { beta0: f64, x0: f64 },
    /// `V(x) = (x + x0) log(x + x0)^gamma0`.
    Logarithmic { gamma0: f64, x0: f64 },
}

impl VFamily {
    pub fn moderately_exponential(c0: f64, alpha: f64, x0: f64) -> Result<Self> {
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(domain(format!("c0 must be positive, got {c0}")));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(domain(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        let min_x0 = (alpha * c0).powf(-1.0 / alpha);
        if !(x0 >= min_x0) || !x0.is_finite() {
            return Err(domain(format!("x0 must be at least 1/(alpha c0)^(1/alpha) = {min_x0}, got {x0}")));
        }
        Ok(VFamily::ModeratelyExponential { c0, alpha, x0 })
    }

    pub fn polynomial(beta0: f64, x0: f64) -> Result<Self> {
        if !(beta0 > 1.0 && beta0.is_finite()) {
            return Err(domain(format!("beta0 must exceed 1, got {beta0}")));
        }
        if !(x0 > 0.0 && x0.is_finite()) {
            return Err(domain(format!("x0 must be positive, got {x0}")));
        }
        if x0.powf(beta0) < 1.0 {
            return Err(domain(format!("V(0) = x0^beta0 = {} is below 1", x0.powf(beta0))));
        }
        Ok(VFamily::Polynomial { beta0, x0 })
    }

    pub fn logarithmic(gamma0: f64, x0: f64) -> Result<Self> {
        if !(gamma0 > 0.0 && gamma0.is_finite()) {
            return Err(domain(format!("gamma0 must be positive, got {gamma0}")));
        }
        let e2 = std::f64::consts::E * std::f64::consts::E;
        if !(x0 >= e2) || !x0.is_finite() {
            return Err(domain(format!("x0 must be at least e^2, got {x0}")));
        }
        Ok(VFamily::Logarithmic { gamma0, x0 })
    }

    /// Tail exponent `alpha` of the drift window `delta k^{1 - alpha}`.
    pub fn alpha(&self) -> f64 {
        match *self {
            VFamily::ModeratelyExponential { alpha, .. } => alpha,
            _ => 0.0,
        }
    }

    pub fn x0(&self) -> f64 {
        match *self {
            VFamily::ModeratelyExponential { x0, .. }
            | VFamily::Polynomial { x0, .. }
            | VFamily::Logarithmic { x0, .. } => x0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            VFamily::ModeratelyExponential { .. } => "moderately-exponential",
            VFamily::Polynomial { .. } => "polynomial",
            VFamily::Logarithmic { .. } => "logarithmic",
        }
    }

    /// `log V(x)`; finite where `V` itself would overflow.
    pub fn ln_v(&self, x: f64) -> f64 {
        let y = x + self.x0();
        match *self {
            VFamily::ModeratelyExponential { c0, alpha, .. } => c0 * y.powf(alpha),
            VFamily::Polynomial { beta0, .. } => beta0 * y.ln(),
            VFamily::Logarithmic { gamma0, .. } => y.ln() + gamma0 * y.ln().ln(),
        }
    }

    pub fn v(&self, x: f64) -> f64 {
        let y = x + self.x0();
        match *self {
            VFamily::ModeratelyExponential { .. } => self.ln_v(x).exp(),
            VFamily::Polynomial { beta0, .. } => y.powf(beta0),
            VFamily::Logarithmic { gamma0, .. } => y * y.ln().powf(gamma0),
        }
    }

    /// `log V'(x)`.
    pub fn ln_dv(&self, x: f64) -> f64 {
        let y = x + self.x0();
        match *self {
            VFamily::ModeratelyExponential { c0, alpha, .. } => {
                (alpha * c0).ln() + (alpha - 1.0) * y.ln() + c0 * y.powf(alpha)
            }
            VFamily::Polynomial { beta0, .. } => beta0.ln() + (beta0 - 1.0) * y.ln(),
            VFamily::Logarithmic { gamma0, .. } => {
                let l = y.ln();
                (gamma0 - 1.0) * l.ln() + (l + gamma0).ln()
            }
        }
    }

    pub fn dv(&self, x: f64) -> f64 {
        let y = x + self.x0();
        match *self {
            VFamily::ModeratelyExponential { .. } => self.ln_dv(x).exp(),
            VFamily::Polynomial { beta0, .. } => beta0 * y.powf(beta0 - 1.0),
            VFamily::Logarithmic { gamma0, .. } => {
                let l = y.ln();
                l.powf(gamma0 - 1.0) * (l + gamma0)
            }
        }
    }

    /// `V''(x) / V'(x)`.
    pub fn d2v_over_dv(&self, x: f64) -> f64 {
        let y = x + self.x0();
        match *self {
            VFamily::ModeratelyExponential { c0, alpha, .. } => {
                (alpha * c0 * y.powf(alpha) - (1.0 - alpha)) / y
            }
            VFamily::Polynomial { beta0, .. } => (beta0 - 1.0) / y,
            VFamily::Logarithmic { gamma0, .. } => {
                let l = y.ln();
                gamma0 / (y * l) * (l + gamma0 - 1.0) / (l + gamma0)
            }
        }
    }

    pub fn d2v(&self, x: f64) -> f64 {
        self.d2v_over_dv(x) * self.dv(x)
    }

    /// `V^{-1}(t)` for `t >= V(0)`.
    pub fn v_inv(&self, t: f64) -> Result<f64> {
        let v0 = self.v(0.0);
        if !(t >= v0 * (1.0 - 1e-15)) {
            return Err(domain(format!("V^-1 is defined on [V(0), inf) = [{v0}, inf), got {t}")));
        }
        let x0 = self.x0();
        let x = match *self {
            VFamily::ModeratelyExponential { c0, alpha, .. } => (t.ln() / c0).powf(1.0 / alpha) - x0,
            VFamily::Polynomial { beta0, .. } => t.powf(1.0 / beta0) - x0,
            VFamily::Logarithmic { .. } => {
                // Newton on log V(x) = log t, which is concave and increasing in x.
                let target = t.ln();
                let mut x = (t / t.ln().max(1.0)).max(0.0);
                for _ in 0..200 {
                    let f = self.ln_v(x) - target;
                    let df = self.dv(x) / self.v(x);
                    let step = f / df;
                    let next = (x - step).max(0.0);
                    if (next - x).abs() <= 1e-15 * (1.0 + x) {
                        x = next;
                        break;
                    }
                    x = next;
                }
                x
            }
        };
        Ok(x.max(0.0))
    }

    /// `phi(t) = kappa V'(V^{-1}(t))`, extended below `V(0)` by its tangent at `V(0)`.
    pub fn phi(&self, kappa: f64) -> Result<std::sync::Arc<dyn Phi>> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(domain(format!("kappa must be positive, got {kappa}")));
        }
        match *self {
            // kappa V'(V^{-1}(t)) = kappa beta0 t^{1 - 1/beta0} for every x0.
            VFamily::Polynomial { beta0, .. } => Ok(std::sync::Arc::new(PowerPhi::new(kappa, beta0)?)),
            _ => {
                let v0 = self.v(0.0);
                let phi0 = kappa * self.dv(0.0);
                let slope0 = kappa * self.d2v_over_dv(0.0);
                let at_one = phi0 - slope0 * (v0 - 1.0);
                if !(at_one > 0.0) || slope0 < 0.0 {
                    return Err(Error::AssumptionUnverified(format!(
                        "tangent extension of phi below V(0) = {v0} is not positive on [1, V(0)]"
                    )));
                }
                Ok(std::sync::Arc::new(VFamilyPhi { family: *self, kappa, v0, phi0, slope0 }))
            }
        }
    }
}

/// `phi` of a non-polynomial family; see [`VFamily::phi`].
#[derive(Debug, Clone, Copy)]
pub struct VFamilyPhi {
    family: VFamily,
    kappa: f64,
    v0: f64,
    phi0: f64,
    slope0: f64,
}

impl Phi for VFamilyPhi {
    fn phi(&self, t: f64) -> f64 {
        if t <= self.v0 {
            return self.phi0 + self.slope0 * (t - self.v0);
        }
        match self.family.v_inv(t) {
            Ok(x) => self.kappa * self.family.dv(x),
            Err(_) => f64::NAN,
        }
    }

    fn phi_prime(&self, t: f64) -> f64 {
        if t <= self.v0 {
            return self.slope0;
        }
        match self.family.v_inv(t) {
            Ok(x) => self.kappa * self.family.d2v_over_dv(x),
            Err(_) => f64::NAN,
        }
    }
}
