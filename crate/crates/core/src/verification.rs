//! Trajectory error norms, convergence tables, the scenario registry and the
//! residual-based element indicator.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::assembly::{CoefficientSet, Constant, SpaceTimeScalar};
use crate::error::{Error, Result};
use crate::fe::{squared_error_parts, FieldState, QuadratureRule};
use crate::manufactured::{
    ExactBoundary, ExactSolution, ManufacturedForcing, PolynomialSolution, VariableD1, VariableD2,
};
use crate::mesh::{Mesh, Point};
use crate::rheology::{ViscosityLaw, ViscosityModel};
use crate::solver::{Observer, StepInfo, TransientRun};
use crate::stabilization::strong_residual;

/// Running `P̄`/`Q̄` sums for one field.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrajectoryNorm {
    /// `max_n ‖fⁿ⁺¹‖²`
    pub max_l2_sq: f64,
    /// `dt Σ (‖fⁿ⁺¹‖² + ‖∂ₓfⁿ⁺¹‖² + ‖∂ᵧfⁿ⁺¹‖²)`
    pub accum_h1_sq: f64,
    /// `dt Σ ‖fⁿ⁺¹‖²`
    pub qbar_sq: f64,
}

impl TrajectoryNorm {
    pub fn add_level(&mut self, dt: f64, l2_sq: f64, grad_sq: [f64; 2]) {
        self.max_l2_sq = self.max_l2_sq.max(l2_sq);
        self.accum_h1_sq += dt * (l2_sq + grad_sq[0] + grad_sq[1]);
        self.qbar_sq += dt * l2_sq;
    }

    pub fn pbar_sq(&self) -> f64 {
        self.max_l2_sq + self.accum_h1_sq
    }

    pub fn pbar(&self) -> f64 {
        self.pbar_sq().sqrt()
    }

    pub fn qbar(&self) -> f64 {
        self.qbar_sq.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub e_u: f64,
    pub e_p: f64,
    pub e_c: f64,
    /// `√(e_u² + e_p² + e_c²)`
    pub total: f64,
    /// `e_u + e_p + e_c`
    pub total_sum: f64,
    /// Pressure error in the `P̄` norm (gradient included); diagnostic only.
    pub e_p_pbar: Option<f64>,
}

impl ErrorReport {
    pub fn new(e_u: f64, e_p: f64, e_c: f64) -> Self {
        ErrorReport {
            e_u,
            e_p,
            e_c,
            total: (e_u * e_u + e_p * e_p + e_c * e_c).sqrt(),
            total_sum: e_u + e_p + e_c,
            e_p_pbar: None,
        }
    }
}

/// Accumulates errors against an exact solution level by level.
#[derive(Clone)]
pub struct ErrorAccumulator {
    pub exact: Arc<dyn ExactSolution>,
    pub u: TrajectoryNorm,
    pub p: TrajectoryNorm,
    pub c: TrajectoryNorm,
    pub levels: usize,
}

impl std::fmt::Debug for ErrorAccumulator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ErrorAccumulator")
            .field("u", &self.u)
            .field("p", &self.p)
            .field("c", &self.c)
            .field("levels", &self.levels)
            .finish()
    }
}

impl ErrorAccumulator {
    pub fn new(exact: Arc<dyn ExactSolution>) -> Self {
        ErrorAccumulator {
            exact,
            u: TrajectoryNorm::default(),
            p: TrajectoryNorm::default(),
            c: TrajectoryNorm::default(),
            levels: 0,
        }
    }

    pub fn add_level(&mut self, mesh: &Mesh, rule: &QuadratureRule, state: &FieldState, dt: f64) {
        let t = state.t;
        let ex = &self.exact;
        let part = |field: &[f64], pick: &dyn Fn(Point) -> (f64, [f64; 2])| {
            squared_error_parts(mesh, rule, field, Some(pick))
        };
        let u1 = part(&state.u1, &|x| {
            let j = ex.jet(x, t);
            (j.u[0], j.grad_u[0])
        });
        let u2 = part(&state.u2, &|x| {
            let j = ex.jet(x, t);
            (j.u[1], j.grad_u[1])
        });
        let p = part(&state.p, &|x| {
            let j = ex.jet(x, t);
            (j.p, j.grad_p)
        });
        let c = part(&state.c, &|x| {
            let j = ex.jet(x, t);
            (j.c, j.grad_c)
        });
        self.u.add_level(dt, u1.0 + u2.0, [u1.1[0] + u2.1[0], u1.1[1] + u2.1[1]]);
        self.p.add_level(dt, p.0, p.1);
        self.c.add_level(dt, c.0, c.1);
        self.levels += 1;
    }

    pub fn report(&self) -> ErrorReport {
        ErrorReport {
            e_p_pbar: Some(self.p.pbar()),
            ..ErrorReport::new(self.u.pbar(), self.p.qbar(), self.c.pbar())
        }
    }
}

impl Observer for ErrorAccumulator {
    fn observe(&mut self, mesh: &Mesh, rule: &QuadratureRule, info: &StepInfo<'_>) -> Result<()> {
        self.add_level(mesh, rule, info.state, info.dt);
        Ok(())
    }
}

/// Error norms of a retained trajectory (levels `1..=N` are measured).
pub fn trajectory_error_norms(mesh: &Mesh, run: &TransientRun, exact: Arc<dyn ExactSolution>) -> Result<ErrorReport> {
    let n = crate::solver::step_count(run.dt, run.t_final)?;
    if run.states.len() != n + 1 {
        return Err(Error::InvalidParameter(format!(
            "trajectory has {} levels, expected {}",
            run.states.len(),
            n + 1
        )));
    }
    let rule = QuadratureRule::degree4();
    let mut acc = ErrorAccumulator::new(exact);
    for s in &run.states[1..] {
        acc.add_level(mesh, &rule, s, run.dt);
    }
    Ok(acc.report())
}

/// `log₂(coarse / fine)`.
pub fn rate_of_convergence(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub case: String,
    pub n_div: usize,
    pub dt: f64,
    pub errors: Option<ErrorReport>,
    /// RoC of `(e_u, e_c, e_p, total)` against the previous row.
    pub roc: Option<[f64; 4]>,
    pub failure: Option<String>,
}

/// One refinement level: `(n_div, dt, errors or failure message)`.
pub type RefinementResult = (usize, f64, std::result::Result<ErrorReport, String>);

/// Rows in refinement order; rates are against the previous row when it succeeded
/// at half the resolution.
pub fn roc_table(case: &str, runs: &[RefinementResult]) -> Vec<TableRow> {
    let mut rows = Vec::with_capacity(runs.len());
    let mut prev: Option<(usize, ErrorReport)> = None;
    for (n_div, dt, res) in runs {
        let (errors, failure) = match res {
            Ok(r) => (Some(*r), None),
            Err(e) => (None, Some(e.clone())),
        };
        let roc = match (prev, errors) {
            (Some((pn, p)), Some(r)) if *n_div == 2 * pn => Some([
                rate_of_convergence(p.e_u, r.e_u),
                rate_of_convergence(p.e_c, r.e_c),
                rate_of_convergence(p.e_p, r.e_p),
                rate_of_convergence(p.total, r.total),
            ]),
            _ => None,
        };
        prev = errors.map(|r| (*n_div, r));
        rows.push(TableRow {
            case: case.to_string(),
            n_div: *n_div,
            dt: *dt,
            errors,
            roc,
            failure,
        });
    }
    rows
}

/// Convergence scenarios with the polynomial-exponential exact solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Scenario {
    WeakConst { re: f64 },
    WeakCassonK,
    StrongLinearC,
    StrongExpC,
}

impl Scenario {
    pub fn label(&self) -> String {
        match self {
            Scenario::WeakConst { re } => format!("Re={re}"),
            Scenario::WeakCassonK => "weak_casson_k".into(),
            Scenario::StrongLinearC => "strong_linear_c".into(),
            Scenario::StrongExpC => "strong_exp_c".into(),
        }
    }

    pub fn default_case(&self) -> ManufacturedCase {
        let (viscosity, diffusion) = match *self {
            Scenario::WeakConst { re } => (ViscosityModel::newtonian(1.0 / re), DiffusionSpec::Constant { value: 0.01 }),
            Scenario::WeakCassonK => (
                ViscosityModel {
                    law: ViscosityLaw::CassonK { k0: 0.1937, k1: 0.055 },
                    yield_stress: 0.0,
                    eps_j: crate::rheology::default_eps_j(),
                },
                DiffusionSpec::Constant { value: 0.01 },
            ),
            Scenario::StrongLinearC => (
                ViscosityModel {
                    law: ViscosityLaw::LinearC { eta0: 0.16, k: 0.25 },
                    yield_stress: 0.0,
                    eps_j: crate::rheology::default_eps_j(),
                },
                DiffusionSpec::Variable,
            ),
            Scenario::StrongExpC => (
                ViscosityModel {
                    law: ViscosityLaw::ExpC { a: 0.129, b: 0.101 },
                    yield_stress: 0.0,
                    eps_j: crate::rheology::default_eps_j(),
                },
                DiffusionSpec::Variable,
            ),
        };
        ManufacturedCase {
            scenario: *self,
            rho: 1.0,
            alpha: 0.01,
            viscosity,
            diffusion,
            d_floor: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiffusionSpec {
    Constant { value: f64 },
    /// The space-time `D₁`, `D₂` of the strong-coupling cases.
    Variable,
}

impl DiffusionSpec {
    pub fn functions(&self) -> [Arc<dyn SpaceTimeScalar>; 2] {
        match *self {
            DiffusionSpec::Constant { value } => [Arc::new(Constant(value)), Arc::new(Constant(value))],
            DiffusionSpec::Variable => [Arc::new(VariableD1), Arc::new(VariableD2)],
        }
    }
}

/// Scenario plus the physical parameters that define its forcing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManufacturedCase {
    pub scenario: Scenario,
    pub rho: f64,
    pub alpha: f64,
    pub viscosity: ViscosityModel,
    pub diffusion: DiffusionSpec,
    pub d_floor: f64,
}

impl ManufacturedCase {
    pub fn exact(&self) -> Arc<dyn ExactSolution> {
        Arc::new(PolynomialSolution)
    }

    pub fn forcing(&self) -> ManufacturedForcing {
        ManufacturedForcing {
            solution: self.exact(),
            rho: self.rho,
            alpha: self.alpha,
            viscosity: self.viscosity,
            diffusion: self.diffusion.functions(),
        }
    }

    pub fn coefficients(&self) -> CoefficientSet {
        CoefficientSet {
            rho: self.rho,
            alpha: self.alpha,
            diffusion: self.diffusion.functions(),
            d_floor: self.d_floor,
            forcing: Arc::new(self.forcing()),
            dirichlet: Arc::new(ExactBoundary(self.exact())),
            viscosity: self.viscosity,
        }
    }
}

/// `η_k = h_k (∫_k |R|²)^{1/2}` with the residual of the step `prev → new`.
pub fn error_indicator(
    mesh: &Mesh,
    rule: &QuadratureRule,
    prev: &FieldState,
    new: &FieldState,
    coeffs: &CoefficientSet,
    dt: f64,
) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    (0..mesh.n_elements())
        .into_par_iter()
        .map(|k| {
            let geo = &mesh.geometry[k];
            let mut sq = 0.0;
            for (b, w) in rule.points.iter().zip(&rule.weights) {
                sq += w * geo.area * strong_residual(mesh, prev, new, coeffs, dt, k, *b)?.norm_sq();
            }
            Ok(geo.diameter * sq.sqrt())
        })
        .collect()
}
