//! Stabilization parameters, strong residuals and the dynamic subscale update.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::CoefficientSet;
use crate::error::{Error, Result};
use crate::fe::{eval_field_at_qp, FieldState, QuadratureRule};
use crate::mesh::Mesh;
use crate::rheology::compute_j2;

/// Algorithmic constants of the stabilization parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StabConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// When false every τ is zero and the plain Galerkin scheme is assembled.
    pub enabled: bool,
}

impl Default for StabConstants {
    fn default() -> Self {
        StabConstants {
            c1: 4.0,
            c2: 2.0,
            c3: 1.0,
            enabled: true,
        }
    }
}

impl StabConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("c1", self.c1), ("c2", self.c2), ("c3", self.c3)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Taus {
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
}

/// Per-element stabilization parameters, with the time-discrete `τ̄`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StabParams {
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
    pub tau_bar1: f64,
    pub tau_bar2: f64,
    pub tau_bar3: f64,
}

/// Inputs of the parameter formulas, sampled once per element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementScales {
    pub h: f64,
    pub speed: f64,
    pub eta0: f64,
    pub d_m: f64,
}

/// `τ₁ = (c₁η₀/h² + c₂ρ|u|/h)⁻¹`, `τ₂ = h²/(c₁τ₁)`, `τ₃ = c₃(9D_m/(4h²) + 3|u|/(2h) + α)⁻¹`.
pub fn compute_tau(
    h: f64,
    speed: f64,
    eta0: f64,
    rho: f64,
    d_m: f64,
    alpha: f64,
    consts: &StabConstants,
) -> Result<Taus> {
    let inputs = [h, speed, eta0, rho, d_m, alpha];
    if inputs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("stabilization inputs"));
    }
    if !(h > 0.0) || inputs.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidParameter(
            "stabilization inputs must be non-negative with h > 0".into(),
        ));
    }
    let inv1 = consts.c1 * eta0 / (h * h) + consts.c2 * rho * speed / h;
    if !(inv1 > 0.0) {
        return Err(Error::UnboundedTau("tau1 (zero viscosity and zero velocity)"));
    }
    let inv3 = 9.0 * d_m / (4.0 * h * h) + 1.5 * speed / h + alpha;
    if !(inv3 > 0.0) {
        return Err(Error::UnboundedTau("tau3 (zero diffusion, velocity and reaction)"));
    }
    let tau1 = 1.0 / inv1;
    Ok(Taus {
        tau1,
        tau2: h * h / (consts.c1 * tau1),
        tau3: consts.c3 / inv3,
    })
}

/// `τ̄ = (M/dt + τ⁻¹)⁻¹` with `M = diag(ρ, ρ, 0, 1)`.
pub fn compute_tau_bar(taus: Taus, rho: f64, dt: f64) -> StabParams {
    let bar = |tau: f64, m: f64| {
        if tau == 0.0 {
            0.0
        } else {
            tau * dt / (dt + m * tau)
        }
    };
    StabParams {
        tau1: taus.tau1,
        tau2: taus.tau2,
        tau3: taus.tau3,
        tau_bar1: bar(taus.tau1, rho),
        tau_bar2: taus.tau2,
        tau_bar3: bar(taus.tau3, 1.0),
    }
}

/// Centroid samples of `|u|`, `η₀ = 2μ` (previous level) and `D_m` (new time).
pub fn element_scales(
    mesh: &Mesh,
    prev: &FieldState,
    coeffs: &CoefficientSet,
    t_new: f64,
    k: usize,
) -> Result<ElementScales> {
    let v = eval_field_at_qp(mesh, prev, k, [1.0 / 3.0; 3]);
    let x = mesh.centroid(k);
    let mu = coeffs
        .viscosity
        .effective_viscosity(v.c, compute_j2(v.grad_u))?;
    let d = coeffs.diffusion_at(x, t_new);
    Ok(ElementScales {
        h: mesh.geometry[k].diameter,
        speed: v.u[0].hypot(v.u[1]),
        eta0: 2.0 * mu,
        d_m: d[0].value.abs().max(d[1].value.abs()),
    })
}

/// Parameters for every element; all zero when stabilization is disabled.
pub fn element_params(
    mesh: &Mesh,
    prev: &FieldState,
    coeffs: &CoefficientSet,
    consts: &StabConstants,
    dt: f64,
    t_new: f64,
) -> Result<Vec<StabParams>> {
    if !consts.enabled {
        return Ok(vec![StabParams::default(); mesh.n_elements()]);
    }
    (0..mesh.n_elements())
        .into_par_iter()
        .map(|k| {
            let s = element_scales(mesh, prev, coeffs, t_new, k)?;
            let taus = compute_tau(s.h, s.speed, s.eta0, coeffs.rho, s.d_m, coeffs.alpha, consts)?;
            Ok(compute_tau_bar(taus, coeffs.rho, dt))
        })
        .collect()
}

/// Strong residual `R_h = F - M∂ₜU_h - L(u_h^n, μ^n; U_h)` at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ResidualSample {
    pub r1: [f64; 2],
    pub r2: f64,
    pub r3: f64,
}

impl ResidualSample {
    pub fn norm_sq(&self) -> f64 {
        self.r1[0].powi(2) + self.r1[1].powi(2) + self.r2.powi(2) + self.r3.powi(2)
    }
}

/// Residual at barycentric point `bary` of element `k`, with convection lagged
/// at `prev` and unknowns taken from `new`. Second derivatives of P1 fields vanish,
/// so the viscous term drops; the first-order part of `∇·(D̃∇c)` is kept.
pub fn strong_residual(
    mesh: &Mesh,
    prev: &FieldState,
    new: &FieldState,
    coeffs: &CoefficientSet,
    dt: f64,
    k: usize,
    bary: [f64; 3],
) -> Result<ResidualSample> {
    let a = eval_field_at_qp(mesh, prev, k, bary);
    let v = eval_field_at_qp(mesh, new, k, bary);
    let x = mesh.map_point(k, bary);
    let (f_f, f_t) = coeffs.forcing.eval(x, new.t);
    let d = coeffs.diffusion_at(x, new.t);
    let rho = coeffs.rho;

    let mut r1 = [0.0; 2];
    for i in 0..2 {
        let conv = a.u[0] * v.grad_u[i][0] + a.u[1] * v.grad_u[i][1];
        r1[i] = f_f[i] - rho * (v.u[i] - a.u[i]) / dt - rho * conv - v.grad_p[i];
    }
    let r2 = -v.divergence();
    let r3 = f_t - (v.c - a.c) / dt - (a.u[0] * v.grad_c[0] + a.u[1] * v.grad_c[1])
        - coeffs.alpha * v.c
        + d[0].gradient[0] * v.grad_c[0]
        + d[1].gradient[1] * v.grad_c[1];
    let sample = ResidualSample { r1, r2, r3 };
    if !sample.norm_sq().is_finite() {
        return Err(Error::NonFinite("strong residual"));
    }
    Ok(sample)
}

/// Residuals at every quadrature point, element-major.
pub fn residual_field(
    mesh: &Mesh,
    rule: &QuadratureRule,
    prev: &FieldState,
    new: &FieldState,
    coeffs: &CoefficientSet,
    dt: f64,
) -> Result<Vec<ResidualSample>> {
    let per_element: Vec<Vec<ResidualSample>> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|k| {
            rule.points
                .iter()
                .map(|&b| strong_residual(mesh, prev, new, coeffs, dt, k, b))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(per_element.into_iter().flatten().collect())
}

/// Subscales `(ũ₁, ũ₂, p̃, c̃)` at every quadrature point of every element.
#[derive(Debug, Clone, PartialEq)]
pub struct SubscaleField {
    pub values: Vec<[f64; 4]>,
    pub n_qp: usize,
}

impl SubscaleField {
    pub fn zeros(n_elements: usize, n_qp: usize) -> Self {
        SubscaleField {
            values: vec![[0.0; 4]; n_elements * n_qp],
            n_qp,
        }
    }

    pub fn n_elements(&self) -> usize {
        self.values.len() / self.n_qp.max(1)
    }

    pub fn at(&self, k: usize, q: usize) -> [f64; 4] {
        self.values[k * self.n_qp + q]
    }

    /// `(Σ ũ·ũ, Σ c̃²)` integrated with the given rule.
    pub fn l2_sq(&self, mesh: &Mesh, rule: &QuadratureRule) -> (f64, f64) {
        let mut u = 0.0;
        let mut c = 0.0;
        for k in 0..mesh.n_elements() {
            let area = mesh.geometry[k].area;
            for (q, w) in rule.weights.iter().enumerate() {
                let s = self.at(k, q);
                u += w * area * (s[0] * s[0] + s[1] * s[1]);
                c += w * area * s[3] * s[3];
            }
        }
        (u, c)
    }
}

/// One backward-Euler step of `M(Ũⁿ⁺¹ - Ũⁿ)/dt + τ⁻¹Ũⁿ⁺¹ = R`; the pressure
/// subscale has no inertia and is quasi-static.
pub fn advance_point(prev: [f64; 4], r: &ResidualSample, p: &StabParams, rho: f64, dt: f64) -> [f64; 4] {
    [
        p.tau_bar1 * (r.r1[0] + rho / dt * prev[0]),
        p.tau_bar1 * (r.r1[1] + rho / dt * prev[1]),
        p.tau_bar2 * r.r2,
        p.tau_bar3 * (r.r3 + prev[3] / dt),
    ]
}

pub fn advance_subscales(
    prev: &SubscaleField,
    residuals: &[ResidualSample],
    params: &[StabParams],
    rho: f64,
    dt: f64,
) -> SubscaleField {
    assert_eq!(prev.values.len(), residuals.len(), "subscale/residual shape mismatch");
    let n_qp = prev.n_qp;
    let values = prev
        .values
        .par_iter()
        .zip(residuals)
        .enumerate()
        .map(|(i, (s, r))| advance_point(*s, r, &params[i / n_qp], rho, dt))
        .collect();
    SubscaleField { values, n_qp }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn tau_hand_values() {
        let consts = StabConstants::default();
        let t = compute_tau(0.1, 1.0, 1.0, 1.0, 0.01, 0.01, &consts).unwrap();
        // c1 η₀/h² = 400, c2 ρ|u|/h = 20
        assert!(close(t.tau1, 1.0 / 420.0, 1e-14));
        assert!(close(t.tau2, 1.05, 1e-14));
        // 9·0.01/0.04 + 15 + 0.01 = 17.26
        assert!(close(t.tau3, 1.0 / 17.26, 1e-14));
        assert!((t.tau3 - 5.7937e-2).abs() < 1e-6);
    }

    #[test]
    fn tau_errors() {
        let consts = StabConstants::default();
        assert!(compute_tau(0.1, 0.0, 0.0, 1.0, 0.01, 0.01, &consts).is_err());
        assert!(compute_tau(0.1, 0.0, 1.0, 1.0, 0.0, 0.0, &consts).is_err());
        assert!(compute_tau(0.0, 1.0, 1.0, 1.0, 0.0, 0.0, &consts).is_err());
        assert!(compute_tau(0.1, f64::NAN, 1.0, 1.0, 0.0, 0.0, &consts).is_err());
    }

    #[test]
    fn tau_bar_values_and_limits() {
        let taus = Taus {
            tau1: 1.0 / 420.0,
            tau2: 1.05,
            tau3: 0.05,
        };
        let p = compute_tau_bar(taus, 1.0, 0.1);
        // (1/420)(0.1)/(0.1 + 1/420) = 1/430
        assert!(close(p.tau_bar1, 1.0 / 430.0, 1e-14));
        assert!((p.tau_bar1 - 2.3256e-3).abs() < 1e-7);
        assert_eq!(p.tau_bar2, 1.05);
        assert!(p.tau_bar1 < p.tau1.min(0.1) && p.tau_bar3 < p.tau3.min(0.1));

        let slow = compute_tau_bar(taus, 1.0, 1e9);
        assert!(close(slow.tau_bar1, taus.tau1, 1e-6));
        let stiff = compute_tau_bar(Taus { tau1: 1e9, ..taus }, 2.0, 0.1);
        assert!(close(stiff.tau_bar1, 0.1 / 2.0, 1e-6));
    }

    #[test]
    fn scalar_subscale_toy() {
        // ρ = 1, dt = 1, τ = 1 → τ̄ = 0.5
        let p = compute_tau_bar(Taus { tau1: 1.0, tau2: 1.0, tau3: 1.0 }, 1.0, 1.0);
        assert_eq!(p.tau_bar1, 0.5);
        let r = ResidualSample { r1: [2.0, 0.0], r2: 0.0, r3: 2.0 };
        let mut s = [0.0; 4];
        s = advance_point(s, &r, &p, 1.0, 1.0);
        assert_eq!(s[0], 1.0);
        assert_eq!(s[3], 1.0);
        let mut err = (s[0] - 2.0).abs();
        for _ in 0..60 {
            s = advance_point(s, &r, &p, 1.0, 1.0);
            let e = (s[0] - 2.0).abs();
            assert!(e <= 0.5 * err + 1e-15);
            err = e;
        }
        assert!(err < 1e-10);
    }

    #[test]
    fn zero_residual_keeps_zero_and_decays() {
        let p = compute_tau_bar(Taus { tau1: 0.3, tau2: 0.2, tau3: 0.7 }, 1.5, 0.05);
        let r = ResidualSample::default();
        assert_eq!(advance_point([0.0; 4], &r, &p, 1.5, 0.05), [0.0; 4]);
        let s = advance_point([1.0, -2.0, 5.0, 3.0], &r, &p, 1.5, 0.05);
        let ratio1 = 1.5 * p.tau_bar1 / 0.05;
        assert!(ratio1 < 1.0);
        assert!(close(s[0], ratio1, 1e-14));
        assert_eq!(s[2], 0.0);
        assert!(s[3].abs() < 3.0);
    }

    #[test]
    fn tau_scales_like_h_squared() {
        let consts = StabConstants::default();
        let hs = [0.1, 0.05, 0.025, 0.0125];
        let logs: Vec<(f64, f64, f64)> = hs
            .iter()
            .map(|&h| {
                let t = compute_tau(h, 1e-4, 0.02, 1.0, 0.1, 0.0, &consts).unwrap();
                (h.ln(), t.tau1.ln(), t.tau3.ln())
            })
            .collect();
        let slope = |f: fn(&(f64, f64, f64)) -> f64| {
            let n = logs.len() as f64;
            let mx = logs.iter().map(|l| l.0).sum::<f64>() / n;
            let my = logs.iter().map(f).sum::<f64>() / n;
            let sxy: f64 = logs.iter().map(|l| (l.0 - mx) * (f(l) - my)).sum();
            let sxx: f64 = logs.iter().map(|l| (l.0 - mx).powi(2)).sum();
            sxy / sxx
        };
        assert!((slope(|l| l.1) - 2.0).abs() < 0.1);
        assert!((slope(|l| l.2) - 2.0).abs() < 0.1);
    }

    #[test]
    fn tau_monotonicity() {
        let consts = StabConstants::default();
        let base = compute_tau(0.05, 0.5, 0.1, 1.0, 0.01, 0.01, &consts).unwrap();
        let faster = compute_tau(0.05, 1.0, 0.1, 1.0, 0.01, 0.01, &consts).unwrap();
        let stickier = compute_tau(0.05, 0.5, 0.2, 1.0, 0.02, 0.05, &consts).unwrap();
        assert!(faster.tau1 <= base.tau1 && faster.tau3 <= base.tau3);
        assert!(stickier.tau1 <= base.tau1 && stickier.tau3 <= base.tau3);
        assert!(stickier.tau2 >= base.tau2);
        // τ₂ = η₀ + (c₂/c₁)ρ|u|h
        assert!(close(base.tau2, 0.1 + 0.5 * 0.5 * 0.05, 1e-12));
    }
}
