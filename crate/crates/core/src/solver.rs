//! Backward-Euler time stepping with dynamic subscales, and the pseudo-transient
//! steady driver used for the cavity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{apply_dirichlet, dirichlet_constraints, dof, Assembler, CoefficientSet, U1, U2};
use crate::error::{Error, Result};
use crate::fe::{mean_value, FieldState, QuadratureRule};
use crate::linsolve::{LinearSolver, SolverOptions};
use crate::manufactured::ExactSolution;
use crate::mesh::Mesh;
use crate::stabilization::{advance_subscales, residual_field, StabConstants, StabParams, SubscaleField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSettings {
    pub dt: f64,
    pub stab: StabConstants,
    pub solver: SolverOptions,
    /// Probe the Galerkin convection block for skew-symmetry every step.
    pub skew_check: bool,
}

impl StepSettings {
    pub fn new(dt: f64) -> Self {
        StepSettings {
            dt,
            stab: StabConstants::default(),
            solver: SolverOptions::default(),
            skew_check: false,
        }
    }
}

/// What observers see after each completed step.
#[derive(Debug)]
pub struct StepInfo<'a> {
    /// 1-based index of the level just computed.
    pub step: usize,
    pub dt: f64,
    pub state: &'a FieldState,
    pub previous: &'a FieldState,
    pub subscales: &'a SubscaleField,
    pub params: &'a [StabParams],
    /// `(Σ_k ∫_k |R|²)^{1/2}` of the strong residual with the new state.
    pub residual_norm: f64,
    /// `max |vᵀCv| / ‖v‖²` over the probes, when requested.
    pub skew_ratio: Option<f64>,
}

pub trait Observer {
    fn observe(&mut self, mesh: &Mesh, rule: &QuadratureRule, info: &StepInfo<'_>) -> Result<()>;
}

impl<F> Observer for F
where
    F: FnMut(&Mesh, &QuadratureRule, &StepInfo<'_>) -> Result<()>,
{
    fn observe(&mut self, mesh: &Mesh, rule: &QuadratureRule, info: &StepInfo<'_>) -> Result<()> {
        self(mesh, rule, info)
    }
}

/// `N = T/dt`, required to be a positive integer.
pub fn step_count(dt: f64, t_final: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) || !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidParameter(format!("need dt > 0 and T > 0, got dt={dt}, T={t_final}")));
    }
    let n = (t_final / dt).round();
    if n < 1.0 || (n * dt - t_final).abs() > 1e-9 * t_final {
        return Err(Error::InvalidParameter(format!("T/dt must be a positive integer, got {}", t_final / dt)));
    }
    Ok(n as usize)
}

/// Interpolant of `exact` at `t = 0`, or zeros with boundary data imposed.
pub fn initial_state(mesh: &Mesh, coeffs: &CoefficientSet, exact: Option<&dyn ExactSolution>) -> FieldState {
    match exact {
        Some(e) => FieldState::interpolate(mesh, 0.0, |x| e.values(x, 0.0)),
        None => {
            let mut s = FieldState::zeros(mesh.n_nodes(), 0.0);
            let mut blocked = s.to_blocked();
            for (d, v) in dirichlet_constraints(mesh, coeffs, 0.0) {
                blocked[d] = v;
            }
            s = FieldState::from_blocked(&blocked, 0.0);
            s
        }
    }
}

/// Mutable stepping context: state, subscales and the reusable linear algebra.
pub struct Stepper<'m> {
    pub assembler: Assembler<'m>,
    pub coeffs: CoefficientSet,
    pub settings: StepSettings,
    pub state: FieldState,
    pub subscales: SubscaleField,
    solver: LinearSolver,
    steps_taken: usize,
    probe_rng: ChaCha8Rng,
}

impl std::fmt::Debug for Stepper<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stepper")
            .field("t", &self.state.t)
            .field("steps_taken", &self.steps_taken)
            .finish_non_exhaustive()
    }
}

impl<'m> Stepper<'m> {
    pub fn new(mesh: &'m Mesh, coeffs: CoefficientSet, settings: StepSettings, initial: FieldState) -> Result<Self> {
        coeffs.validate()?;
        settings.stab.validate()?;
        if !(settings.dt > 0.0 && settings.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", settings.dt)));
        }
        if initial.n_nodes() != mesh.n_nodes() {
            return Err(Error::InvalidParameter("initial state does not match mesh".into()));
        }
        let rule = QuadratureRule::degree4();
        let subscales = SubscaleField::zeros(mesh.n_elements(), rule.len());
        let assembler = Assembler::new(mesh, rule);
        let solver = LinearSolver::new(assembler.pattern(), mesh.n_div, settings.solver)?;
        Ok(Stepper {
            assembler,
            coeffs,
            settings,
            state: initial,
            subscales,
            solver,
            steps_taken: 0,
            probe_rng: ChaCha8Rng::seed_from_u64(0x5eed),
        })
    }

    pub fn mesh(&self) -> &'m Mesh {
        self.assembler.mesh
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    /// Advances one step and reports to `observers`.
    pub fn step(&mut self, observers: &mut [&mut dyn Observer]) -> Result<()> {
        let index = self.steps_taken + 1;
        self.try_step(observers).map_err(|e| match e {
            Error::Step { .. } => e,
            other => Error::Step {
                step: index,
                source: Box::new(other),
            },
        })
    }

    fn try_step(&mut self, observers: &mut [&mut dyn Observer]) -> Result<()> {
        let mesh = self.assembler.mesh;
        let dt = self.settings.dt;
        let t_new = self.state.t + dt;

        let skew_ratio = if self.settings.skew_check {
            Some(self.skew_probe()?)
        } else {
            None
        };

        let mut system = self.assembler.assemble_step(
            &self.state,
            &self.subscales,
            &self.coeffs,
            &self.settings.stab,
            dt,
            t_new,
        )?;
        let constraints = dirichlet_constraints(mesh, &self.coeffs, t_new);
        apply_dirichlet(&mut system, &constraints, (0, 0.0))?;
        let guess = self.state.to_blocked();
        let x = self.solver.solve(&system.matrix, &system.rhs, Some(&guess))?;
        let mut next = FieldState::from_blocked(&x, t_new);
        let p_mean = mean_value(mesh, &next.p);
        for p in &mut next.p {
            *p -= p_mean;
        }
        if !next.is_finite() {
            return Err(Error::NonFinite("solution"));
        }

        let rule = &self.assembler.rule;
        let residuals = residual_field(mesh, rule, &self.state, &next, &self.coeffs, dt)?;
        let subs = advance_subscales(&self.subscales, &residuals, &system.params, self.coeffs.rho, dt);
        let mut res_sq = 0.0;
        for k in 0..mesh.n_elements() {
            let area = mesh.geometry[k].area;
            for (q, w) in rule.weights.iter().enumerate() {
                res_sq += w * area * residuals[k * rule.len() + q].norm_sq();
            }
        }

        let previous = std::mem::replace(&mut self.state, next);
        self.subscales = subs;
        self.steps_taken += 1;
        let info = StepInfo {
            step: self.steps_taken,
            dt,
            state: &self.state,
            previous: &previous,
            subscales: &self.subscales,
            params: &system.params,
            residual_norm: res_sq.sqrt(),
            skew_ratio,
        };
        for obs in observers.iter_mut() {
            obs.observe(mesh, rule, &info)?;
        }
        Ok(())
    }

    /// `max |vᵀCv|/‖v‖²` for three random vectors supported on interior velocity dofs.
    fn skew_probe(&mut self) -> Result<f64> {
        let mesh = self.assembler.mesh;
        let block = self.assembler.convection_block(&self.state, self.coeffs.rho)?;
        let mut worst = 0.0f64;
        for _ in 0..3 {
            let mut v = vec![0.0; self.assembler.n_dofs()];
            for node in (0..mesh.n_nodes()).filter(|&n| !mesh.is_boundary(n)) {
                v[dof(node, U1)] = self.probe_rng.gen_range(-1.0..1.0);
                v[dof(node, U2)] = self.probe_rng.gen_range(-1.0..1.0);
            }
            let vv: f64 = v.iter().map(|x| x * x).sum();
            if vv > 0.0 {
                worst = worst.max(block.quadratic_form(&v).abs() / vv);
            }
        }
        Ok(worst)
    }
}

#[derive(Debug, Clone)]
pub struct TransientRun {
    pub dt: f64,
    pub t_final: f64,
    /// Levels `0..=N` when retained, otherwise only the final level.
    pub states: Vec<FieldState>,
    pub subscales: SubscaleField,
}

impl TransientRun {
    pub fn final_state(&self) -> &FieldState {
        self.states.last().expect("at least one level")
    }
}

/// Runs `N = T/dt` steps from `initial`.
pub fn run_transient(
    mesh: &Mesh,
    coeffs: CoefficientSet,
    initial: FieldState,
    settings: StepSettings,
    t_final: f64,
    retain: bool,
    observers: &mut [&mut dyn Observer],
) -> Result<TransientRun> {
    let n = step_count(settings.dt, t_final)?;
    let mut stepper = Stepper::new(mesh, coeffs, settings, initial)?;
    let mut states = vec![stepper.state.clone()];
    for _ in 0..n {
        stepper.step(observers)?;
        if retain {
            states.push(stepper.state.clone());
        }
    }
    if !retain {
        states = vec![stepper.state.clone()];
    }
    // land exactly on T despite accumulated rounding in t
    if let Some(last) = states.last_mut() {
        last.t = t_final;
    }
    Ok(TransientRun {
        dt: settings.dt,
        t_final,
        states,
        subscales: stepper.subscales,
    })
}

#[derive(Debug, Clone)]
pub struct SteadyRun {
    pub state: FieldState,
    pub steps: usize,
    /// `‖uⁿ⁺¹ - uⁿ‖_∞ / dt` per step.
    pub history: Vec<f64>,
}

/// Pseudo-transient march until `‖uⁿ⁺¹ - uⁿ‖_∞ < tol·dt`.
pub fn run_steady(
    mesh: &Mesh,
    coeffs: CoefficientSet,
    initial: FieldState,
    settings: StepSettings,
    tol: f64,
    max_steps: usize,
) -> Result<SteadyRun> {
    if !(tol > 0.0) || max_steps == 0 {
        return Err(Error::InvalidParameter("steady tolerance and max_steps must be positive".into()));
    }
    let mut stepper = Stepper::new(mesh, coeffs, settings, initial)?;
    let mut history = Vec::new();
    for _ in 0..max_steps {
        let before = stepper.state.clone();
        stepper.step(&mut [])?;
        let change = before
            .u1
            .iter()
            .zip(&stepper.state.u1)
            .chain(before.u2.iter().zip(&stepper.state.u2))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        history.push(change / settings.dt);
        if change < tol * settings.dt {
            return Ok(SteadyRun {
                steps: stepper.steps_taken(),
                state: stepper.state,
                history,
            });
        }
    }
    Err(Error::SteadyNotReached {
        steps: max_steps,
        last: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::LidDriven;
    use crate::fe::l2_and_h1_seminorm;
    use crate::manufactured::{ExactBoundary, ManufacturedForcing, PolynomialSolution};
    use crate::rheology::ViscosityModel;
    use std::sync::Arc;

    #[test]
    fn step_count_requires_integer_ratio() {
        assert_eq!(step_count(0.1, 1.0).unwrap(), 10);
        assert_eq!(step_count(1.0 / 80.0, 1.0).unwrap(), 80);
        assert!(step_count(0.3, 1.0).is_err());
        assert!(step_count(0.0, 1.0).is_err());
    }

    #[test]
    fn zero_data_stays_zero() {
        let mesh = Mesh::structured(4).unwrap();
        let coeffs = CoefficientSet::simple(1.0, 0.01, 0.01, ViscosityModel::newtonian(0.01));
        let init = initial_state(&mesh, &coeffs, None);
        let run = run_transient(&mesh, coeffs, init, StepSettings::new(0.25), 1.0, true, &mut []).unwrap();
        assert_eq!(run.states.len(), 5);
        for s in &run.states {
            assert!(s.u1.iter().chain(&s.u2).chain(&s.p).chain(&s.c).all(|&v| v == 0.0));
        }
    }

    fn manufactured(re: f64) -> CoefficientSet {
        let mut coeffs = CoefficientSet::simple(1.0, 0.01, 0.01, ViscosityModel::newtonian(1.0 / re));
        let sol: Arc<dyn ExactSolution> = Arc::new(PolynomialSolution);
        coeffs.forcing = Arc::new(ManufacturedForcing {
            solution: sol.clone(),
            rho: coeffs.rho,
            alpha: coeffs.alpha,
            viscosity: coeffs.viscosity,
            diffusion: coeffs.diffusion.clone(),
        });
        coeffs.dirichlet = Arc::new(ExactBoundary(sol));
        coeffs
    }

    fn final_velocity_error(n: usize, dt: f64) -> (f64, FieldState) {
        let mesh = Mesh::structured(n).unwrap();
        let coeffs = manufactured(100.0);
        let init = initial_state(&mesh, &coeffs, Some(&PolynomialSolution));
        let run = run_transient(&mesh, coeffs, init, StepSettings::new(dt), 1.0, false, &mut []).unwrap();
        let s = run.final_state();
        let ex = |x: crate::mesh::Point| {
            let j = PolynomialSolution.jet(x, 1.0);
            (j.u[0], j.grad_u[0])
        };
        let (l2, _) = l2_and_h1_seminorm(&mesh, &QuadratureRule::degree4(), &s.u1, Some(&ex));
        (l2, s.clone())
    }

    #[test]
    fn manufactured_run_is_finite_and_close() {
        let (e10, s) = final_velocity_error(10, 0.1);
        assert!(s.is_finite());
        assert!(e10 < 5e-3, "{e10}");
        let (e20, _) = final_velocity_error(20, 0.05);
        assert!(e20 < e10, "{e20} vs {e10}");
    }

    #[test]
    fn halving_dt_changes_solution_by_order_dt() {
        let mesh = Mesh::structured(8).unwrap();
        let rule = QuadratureRule::degree4();
        let finals: Vec<FieldState> = [0.25, 0.125, 0.0625]
            .iter()
            .map(|&dt| {
                let coeffs = manufactured(100.0);
                let init = initial_state(&mesh, &coeffs, Some(&PolynomialSolution));
                run_transient(&mesh, coeffs, init, StepSettings::new(dt), 1.0, false, &mut [])
                    .unwrap()
                    .final_state()
                    .clone()
            })
            .collect();
        let diff = |a: &FieldState, b: &FieldState| {
            let d: Vec<f64> = a.c.iter().zip(&b.c).map(|(x, y)| x - y).collect();
            crate::fe::integrate_scalar(&mesh, &rule, |x, k| {
                let bary = mesh.barycentric(k, x);
                crate::fe::eval_scalar(&mesh, &d, k, bary).powi(2)
            })
            .sqrt()
        };
        let d1 = diff(&finals[0], &finals[1]);
        let d2 = diff(&finals[1], &finals[2]);
        let ratio = d1 / d2;
        assert!(ratio > 1.5 && ratio < 2.7, "ratio {ratio}");
    }

    #[test]
    fn observers_see_every_step_and_skew_holds() {
        let mesh = Mesh::structured(5).unwrap();
        let coeffs = manufactured(100.0);
        let init = initial_state(&mesh, &coeffs, Some(&PolynomialSolution));
        let mut settings = StepSettings::new(0.2);
        settings.skew_check = true;
        let mut seen = Vec::new();
        let mut obs = |_: &Mesh, _: &QuadratureRule, info: &StepInfo<'_>| {
            seen.push((info.step, info.skew_ratio.unwrap()));
            Ok(())
        };
        run_transient(&mesh, coeffs, init, settings, 1.0, false, &mut [&mut obs]).unwrap();
        assert_eq!(seen.iter().map(|s| s.0).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
        assert!(seen.iter().all(|s| s.1 <= 1e-12));
    }

    #[test]
    fn lid_driven_steady_state_converges_on_coarse_grid() {
        let mesh = Mesh::structured(8).unwrap();
        let mut coeffs = CoefficientSet::simple(1.0, 0.01, 0.01, ViscosityModel::newtonian(0.1));
        coeffs.dirichlet = Arc::new(LidDriven { speed: 1.0 });
        let init = initial_state(&mesh, &coeffs, None);
        let run = run_steady(&mesh, coeffs, init, StepSettings::new(0.5), 1e-6, 400).unwrap();
        assert!(run.state.u1.iter().all(|v| v.is_finite()));
        // flow under the lid moves right, return flow near the bottom moves left
        let mid = 4;
        assert!(run.state.u1[7 * 9 + mid] > 0.0);
        assert!(run.state.u1[2 * 9 + mid] < 0.0);
    }
}
