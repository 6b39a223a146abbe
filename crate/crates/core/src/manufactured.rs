//! Closed-form manufactured solution and the forcing that makes it exact.
//!
//! With `g(s) = s²(s-1)²` and `E = e^{-t}`:
//! `u = E/2·(g(x)g'(y), -g'(x)g(y))`, `p = E(3x²+3y²-2)`, `c = E·x(x-1)y(y-1)`.

use std::sync::Arc;

use crate::assembly::{BoundaryData, Forcing, SpaceTimeScalar, C, U1, U2};
use crate::mesh::{Point, SideSet};
use crate::rheology::ViscosityModel;

/// Values and derivatives of an exact solution at one space-time point.
/// `hess_u[i][j][k] = ∂²uᵢ/∂xⱼ∂xₖ`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExactJet {
    pub u: [f64; 2],
    pub du_dt: [f64; 2],
    pub grad_u: [[f64; 2]; 2],
    pub hess_u: [[[f64; 2]; 2]; 2],
    pub p: f64,
    pub grad_p: [f64; 2],
    pub c: f64,
    pub dc_dt: f64,
    pub grad_c: [f64; 2],
    pub hess_c: [[f64; 2]; 2],
}

pub trait ExactSolution: Send + Sync {
    fn jet(&self, x: Point, t: f64) -> ExactJet;

    /// `[u1, u2, p, c]`.
    fn values(&self, x: Point, t: f64) -> [f64; 4] {
        let j = self.jet(x, t);
        [j.u[0], j.u[1], j.p, j.c]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ZeroSolution;

impl ExactSolution for ZeroSolution {
    fn jet(&self, _: Point, _: f64) -> ExactJet {
        ExactJet::default()
    }
}

fn g(s: f64) -> [f64; 4] {
    let q = s * (s - 1.0);
    [
        q * q,
        2.0 * q * (2.0 * s - 1.0),
        2.0 * (6.0 * s * s - 6.0 * s + 1.0),
        12.0 * (2.0 * s - 1.0),
    ]
}

/// The polynomial-exponential solution used by every convergence scenario.
#[derive(Debug, Clone, Copy, Default)]
pub struct PolynomialSolution;

impl ExactSolution for PolynomialSolution {
    fn jet(&self, x: Point, t: f64) -> ExactJet {
        let e = (-t).exp();
        let h = 0.5 * e;
        let [gx, gx1, gx2, gx3] = g(x[0]);
        let [gy, gy1, gy2, gy3] = g(x[1]);
        let u = [h * gx * gy1, -h * gx1 * gy];
        let grad_u = [[h * gx1 * gy1, h * gx * gy2], [-h * gx2 * gy, -h * gx1 * gy1]];
        let u1xy = h * gx1 * gy2;
        let u2xy = -h * gx2 * gy1;
        let hess_u = [
            [[h * gx2 * gy1, u1xy], [u1xy, h * gx * gy3]],
            [[-h * gx3 * gy, u2xy], [u2xy, -h * gx1 * gy2]],
        ];
        let p = e * (3.0 * x[0] * x[0] + 3.0 * x[1] * x[1] - 2.0);
        let (qx, qy) = (x[0] * (x[0] - 1.0), x[1] * (x[1] - 1.0));
        let (qx1, qy1) = (2.0 * x[0] - 1.0, 2.0 * x[1] - 1.0);
        let c = e * qx * qy;
        let cxy = e * qx1 * qy1;
        ExactJet {
            u,
            du_dt: [-u[0], -u[1]],
            grad_u,
            hess_u,
            p,
            grad_p: [6.0 * e * x[0], 6.0 * e * x[1]],
            c,
            dc_dt: -c,
            grad_c: [e * qx1 * qy, e * qx * qy1],
            hess_c: [[2.0 * e * qy, cxy], [cxy, 2.0 * e * qx]],
        }
    }
}

/// `D₁ = e^{-t} g(x)² g'(y)² / 4`.
#[derive(Debug, Clone, Copy)]
pub struct VariableD1;

/// `D₂ = e^{-t} g(y)² g'(x)² / 4`.
#[derive(Debug, Clone, Copy)]
pub struct VariableD2;

impl SpaceTimeScalar for VariableD1 {
    fn value(&self, x: Point, t: f64) -> f64 {
        let (gx, gy) = (g(x[0]), g(x[1]));
        0.25 * (-t).exp() * gx[0] * gx[0] * gy[1] * gy[1]
    }
    fn gradient(&self, x: Point, t: f64) -> [f64; 2] {
        let (gx, gy) = (g(x[0]), g(x[1]));
        let e = 0.25 * (-t).exp();
        [
            e * 2.0 * gx[0] * gx[1] * gy[1] * gy[1],
            e * gx[0] * gx[0] * 2.0 * gy[1] * gy[2],
        ]
    }
}

impl SpaceTimeScalar for VariableD2 {
    fn value(&self, x: Point, t: f64) -> f64 {
        VariableD1.value([x[1], x[0]], t)
    }
    fn gradient(&self, x: Point, t: f64) -> [f64; 2] {
        let [a, b] = VariableD1.gradient([x[1], x[0]], t);
        [b, a]
    }
}

/// Dirichlet data taken from an exact solution.
#[derive(Clone)]
pub struct ExactBoundary(pub Arc<dyn ExactSolution>);

impl BoundaryData for ExactBoundary {
    fn value(&self, var: usize, x: Point, _: SideSet, t: f64) -> f64 {
        let v = self.0.values(x, t);
        match var {
            U1 | U2 | C => v[var],
            _ => 0.0,
        }
    }
}

/// `f_F = ρ∂ₜu + ρ(u·∇)u + ∇p - ∇·(2μD(u))`, `f_T = ∂ₜc - ∇·(D̃∇c) + u·∇c + αc`,
/// with `μ = μ(c, J₂(u))` and the unclamped diffusion coefficients.
#[derive(Clone)]
pub struct ManufacturedForcing {
    pub solution: Arc<dyn ExactSolution>,
    pub rho: f64,
    pub alpha: f64,
    pub viscosity: ViscosityModel,
    pub diffusion: [Arc<dyn SpaceTimeScalar>; 2],
}

impl ManufacturedForcing {
    pub fn evaluate(&self, x: Point, t: f64) -> ([f64; 2], f64) {
        let j = self.solution.jet(x, t);
        let gu = j.grad_u;
        let hu = j.hess_u;
        let j2 = crate::rheology::compute_j2(gu);
        let visc = match self.viscosity.evaluate(j.c, j2) {
            Ok(v) => v,
            Err(_) => return ([f64::NAN; 2], f64::NAN),
        };
        // ∂ₖJ₂ = 4u₁ₓ∂ₖu₁ₓ + 4u₂ᵧ∂ₖu₂ᵧ + 2(u₁ᵧ+u₂ₓ)(∂ₖu₁ᵧ+∂ₖu₂ₓ)
        let shear = gu[0][1] + gu[1][0];
        let dj2 = [0, 1].map(|k| {
            4.0 * gu[0][0] * hu[0][0][k] + 4.0 * gu[1][1] * hu[1][1][k] + 2.0 * shear * (hu[0][1][k] + hu[1][0][k])
        });
        let dmu = [0, 1].map(|k| visc.dmu_dc * j.grad_c[k] + visc.dmu_dj2 * dj2[k]);

        let mut f = [0.0; 2];
        for i in 0..2 {
            let conv = j.u[0] * gu[i][0] + j.u[1] * gu[i][1];
            let mut div_stress = 0.0;
            for k in 0..2 {
                let d_ik = gu[i][k] + gu[k][i];
                let dd_ik = hu[i][k][k] + hu[k][i][k];
                div_stress += dmu[k] * d_ik + visc.mu * dd_ik;
            }
            f[i] = self.rho * j.du_dt[i] + self.rho * conv + j.grad_p[i] - div_stress;
        }

        let d1 = &self.diffusion[0];
        let d2 = &self.diffusion[1];
        let div_flux = d1.gradient(x, t)[0] * j.grad_c[0]
            + d1.value(x, t) * j.hess_c[0][0]
            + d2.gradient(x, t)[1] * j.grad_c[1]
            + d2.value(x, t) * j.hess_c[1][1];
        let ft = j.dc_dt - div_flux + j.u[0] * j.grad_c[0] + j.u[1] * j.grad_c[1] + self.alpha * j.c;
        (f, ft)
    }
}

impl Forcing for ManufacturedForcing {
    fn eval(&self, x: Point, t: f64) -> ([f64; 2], f64) {
        self.evaluate(x, t)
    }
}
