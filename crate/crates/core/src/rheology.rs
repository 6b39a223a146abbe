//! Regularized Casson viscosity and its concentration-dependent variants.
//!
//! The effective viscosity is
//! `μ(c, J₂) = (√(τ_y/2) + √η(c) Ĵ^{1/4})² Ĵ^{-1/2}` with `Ĵ = J₂ + ε_J`,
//! evaluated in the expanded form `a²Ĵ^{-1/2} + 2a√η Ĵ^{-1/4} + η` so that
//! the yield-free case returns `η(c)` bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative floor applied to the linear law, `η ≥ η₀·1e-6`.
const LINEAR_LAW_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum ViscosityLaw {
    /// `η(c) = eta`
    Constant { eta: f64 },
    /// `μ(J₂) = (k0 + k1 Ĵ^{1/4})² Ĵ^{-1/2}`, independent of `c` and of the yield stress.
    CassonK { k0: f64, k1: f64 },
    /// `η(c) = eta0 (1 + k c)`
    LinearC { eta0: f64, k: f64 },
    /// `η(c) = a e^{b c}`
    ExpC { a: f64, b: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViscosityModel {
    #[serde(flatten)]
    pub law: ViscosityLaw,
    #[serde(default)]
    pub yield_stress: f64,
    #[serde(default = "default_eps_j")]
    pub eps_j: f64,
}

pub fn default_eps_j() -> f64 {
    1e-10
}

/// Viscosity and its partial derivatives at one `(c, J₂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViscosityEval {
    pub mu: f64,
    pub dmu_dc: f64,
    pub dmu_dj2: f64,
}

/// `J₂ = 2(∂u₁/∂x)² + 2(∂u₂/∂y)² + (∂u₁/∂y + ∂u₂/∂x)²` for `grad_u[i][j] = ∂u_i/∂x_j`.
pub fn compute_j2(grad_u: [[f64; 2]; 2]) -> f64 {
    let shear = grad_u[0][1] + grad_u[1][0];
    2.0 * grad_u[0][0].powi(2) + 2.0 * grad_u[1][1].powi(2) + shear * shear
}

impl ViscosityModel {
    pub fn newtonian(eta: f64) -> Self {
        ViscosityModel {
            law: ViscosityLaw::Constant { eta },
            yield_stress: 0.0,
            eps_j: default_eps_j(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let params: &[(&str, f64)] = match self.law {
            ViscosityLaw::Constant { eta } => &[("eta", eta)],
            ViscosityLaw::CassonK { k0, k1 } => &[("k0", k0), ("k1", k1)],
            ViscosityLaw::LinearC { eta0, k } => &[("eta0", eta0), ("k", k)],
            ViscosityLaw::ExpC { a, b } => &[("a", a), ("b", b)],
        };
        for (name, v) in params.iter().chain(&[("yield_stress", self.yield_stress)]) {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "viscosity parameter {name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if !(self.eps_j > 0.0) || !self.eps_j.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "eps_j must be positive, got {}",
                self.eps_j
            )));
        }
        let positive = match self.law {
            ViscosityLaw::Constant { eta } => eta > 0.0,
            ViscosityLaw::CassonK { k0, k1 } => k0 > 0.0 || k1 > 0.0,
            ViscosityLaw::LinearC { eta0, .. } => eta0 > 0.0,
            ViscosityLaw::ExpC { a, .. } => a > 0.0,
        };
        if !positive {
            return Err(Error::InvalidParameter("viscosity law evaluates to zero".into()));
        }
        Ok(())
    }

    /// Plastic viscosity `η(c)` and `dη/dc`.
    pub fn eta_with_derivative(&self, c: f64) -> (f64, f64) {
        match self.law {
            ViscosityLaw::Constant { eta } => (eta, 0.0),
            ViscosityLaw::CassonK { k1, .. } => (k1 * k1, 0.0),
            ViscosityLaw::LinearC { eta0, k } => {
                let raw = eta0 * (1.0 + k * c);
                let floor = eta0 * LINEAR_LAW_FLOOR;
                if raw > floor {
                    (raw, eta0 * k)
                } else {
                    (floor, 0.0)
                }
            }
            ViscosityLaw::ExpC { a, b } => {
                let v = a * (b * c).exp();
                (v, b * v)
            }
        }
    }

    pub fn eta_of_c(&self, c: f64) -> f64 {
        self.eta_with_derivative(c).0
    }

    /// Coefficients `(a, √η, ∂√η/∂c)` of `μ = (a + √η Ĵ^{1/4})² Ĵ^{-1/2}`.
    fn casson_terms(&self, c: f64) -> (f64, f64, f64, f64) {
        match self.law {
            ViscosityLaw::CassonK { k0, k1 } => (k0, k1, k1 * k1, 0.0),
            _ => {
                let (eta, deta) = self.eta_with_derivative(c);
                let sq = eta.sqrt();
                let dsq = if sq > 0.0 { 0.5 * deta / sq } else { 0.0 };
                ((0.5 * self.yield_stress).sqrt(), sq, eta, dsq)
            }
        }
    }

    pub fn effective_viscosity(&self, c: f64, j2: f64) -> Result<f64> {
        Ok(self.evaluate(c, j2)?.mu)
    }

    pub fn evaluate(&self, c: f64, j2: f64) -> Result<ViscosityEval> {
        if !c.is_finite() || !j2.is_finite() {
            return Err(Error::NonFinite("viscosity input"));
        }
        let jh = j2.max(0.0) + self.eps_j;
        let (a, sq, eta, dsq) = self.casson_terms(c);
        let j_m12 = jh.powf(-0.5);
        let j_m14 = jh.powf(-0.25);
        let mu = if a == 0.0 {
            eta
        } else {
            a * a * j_m12 + 2.0 * a * sq * j_m14 + eta
        };
        // d/dc of (2a√η Ĵ^{-1/4} + η) and d/dĴ of (a²Ĵ^{-1/2} + 2a√η Ĵ^{-1/4})
        let dmu_dc = 2.0 * a * dsq * j_m14 + 2.0 * sq * dsq;
        let dmu_dj2 = if j2 < 0.0 {
            0.0
        } else {
            -0.5 * a * a * j_m12 / jh - 0.5 * a * sq * j_m14 / jh
        };
        if !mu.is_finite() || !(mu > 0.0) {
            return Err(Error::NonFinite("effective viscosity"));
        }
        Ok(ViscosityEval {
            mu,
            dmu_dc,
            dmu_dj2,
        })
    }
}
