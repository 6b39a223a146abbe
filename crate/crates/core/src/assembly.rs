//! Per-step assembly of the semi-implicit stabilized system.
//!
//! Unknowns are node-blocked: dof `4·node + var` with `var` in
//! [`U1`], [`U2`], [`P`], [`C`]. Convection velocity and viscosity are frozen at
//! the previous level; the subscale at the new level is eliminated through
//! `Ũⁿ⁺¹ = τ̄(Rⁿ⁺¹ + (M/dt)Ũⁿ)` and enters the coarse equation as `(Ũⁿ⁺¹, L*V)`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fe::{eval_scalar, grad_scalar, FieldState, QuadratureRule};
use crate::mesh::{Mesh, Point, SideSet};
use crate::rheology::{compute_j2, ViscosityModel};
use crate::sparse::CsrMatrix;
use crate::stabilization::{element_params, StabConstants, StabParams, SubscaleField};

pub const U1: usize = 0;
pub const U2: usize = 1;
pub const P: usize = 2;
pub const C: usize = 3;
pub const VARS: usize = 4;

const LOCAL: usize = 3 * VARS;

pub fn dof(node: usize, var: usize) -> usize {
    VARS * node + var
}

/// Scalar coefficient depending on space and time.
pub trait SpaceTimeScalar: Send + Sync {
    fn value(&self, x: Point, t: f64) -> f64;
    fn gradient(&self, x: Point, t: f64) -> [f64; 2];
}

#[derive(Debug, Clone, Copy)]
pub struct Constant(pub f64);

impl SpaceTimeScalar for Constant {
    fn value(&self, _: Point, _: f64) -> f64 {
        self.0
    }
    fn gradient(&self, _: Point, _: f64) -> [f64; 2] {
        [0.0; 2]
    }
}

/// Momentum body force and solute source.
pub trait Forcing: Send + Sync {
    fn eval(&self, x: Point, t: f64) -> ([f64; 2], f64);
}

#[derive(Debug, Clone, Copy)]
pub struct ZeroForcing;

impl Forcing for ZeroForcing {
    fn eval(&self, _: Point, _: f64) -> ([f64; 2], f64) {
        ([0.0; 2], 0.0)
    }
}

/// Dirichlet data for `u1`, `u2` and `c` on boundary nodes.
pub trait BoundaryData: Send + Sync {
    fn value(&self, var: usize, x: Point, sides: SideSet, t: f64) -> f64;
}

#[derive(Debug, Clone, Copy)]
pub struct Homogeneous;

impl BoundaryData for Homogeneous {
    fn value(&self, _: usize, _: Point, _: SideSet, _: f64) -> f64 {
        0.0
    }
}

/// Unit-speed lid on the top side; the lid value also holds at the two top corners.
#[derive(Debug, Clone, Copy)]
pub struct LidDriven {
    pub speed: f64,
}

impl BoundaryData for LidDriven {
    fn value(&self, var: usize, _: Point, sides: SideSet, _: f64) -> f64 {
        if var == U1 && sides.contains(crate::mesh::Side::Top) {
            self.speed
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionSample {
    pub value: f64,
    pub gradient: [f64; 2],
}

#[derive(Clone)]
pub struct CoefficientSet {
    pub rho: f64,
    pub alpha: f64,
    /// `D₁` and `D₂`.
    pub diffusion: [Arc<dyn SpaceTimeScalar>; 2],
    /// Lower clamp applied to `D₁`, `D₂` wherever they are evaluated.
    pub d_floor: f64,
    pub forcing: Arc<dyn Forcing>,
    pub dirichlet: Arc<dyn BoundaryData>,
    pub viscosity: ViscosityModel,
}

impl fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("rho", &self.rho)
            .field("alpha", &self.alpha)
            .field("d_floor", &self.d_floor)
            .field("viscosity", &self.viscosity)
            .finish_non_exhaustive()
    }
}

impl CoefficientSet {
    /// Constant-coefficient set with zero forcing and homogeneous boundary data.
    pub fn simple(rho: f64, alpha: f64, diffusion: f64, viscosity: ViscosityModel) -> Self {
        CoefficientSet {
            rho,
            alpha,
            diffusion: [Arc::new(Constant(diffusion)), Arc::new(Constant(diffusion))],
            d_floor: 1e-8,
            forcing: Arc::new(ZeroForcing),
            dirichlet: Arc::new(Homogeneous),
            viscosity,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::InvalidParameter(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "alpha must be non-negative, got {}",
                self.alpha
            )));
        }
        if !(self.d_floor > 0.0) || !self.d_floor.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "d_floor must be positive, got {}",
                self.d_floor
            )));
        }
        self.viscosity.validate()
    }

    /// `D₁`, `D₂` clamped below by `d_floor` (the gradient vanishes where the clamp is active).
    pub fn diffusion_at(&self, x: Point, t: f64) -> [DiffusionSample; 2] {
        let sample = |d: &Arc<dyn SpaceTimeScalar>| {
            let v = d.value(x, t);
            if v >= self.d_floor {
                DiffusionSample {
                    value: v,
                    gradient: d.gradient(x, t),
                }
            } else {
                DiffusionSample {
                    value: self.d_floor,
                    gradient: [0.0; 2],
                }
            }
        };
        [sample(&self.diffusion[0]), sample(&self.diffusion[1])]
    }
}

#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// `(dof, value)` pairs eliminated by [`apply_dirichlet`].
    pub constrained: Vec<(usize, f64)>,
    /// Element stabilization parameters used for this step.
    pub params: Vec<StabParams>,
}

/// Which contributions an assembly pass includes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terms {
    All,
    Galerkin,
    Stabilization,
    /// Only the skew-symmetrized Galerkin convection of the velocity.
    Convection,
}

struct Local {
    a: [[f64; LOCAL]; LOCAL],
    b: [f64; LOCAL],
}

/// Reusable assembly context: mesh, quadrature and the time-invariant pattern.
#[derive(Debug, Clone)]
pub struct Assembler<'m> {
    pub mesh: &'m Mesh,
    pub rule: QuadratureRule,
    template: CsrMatrix,
    scatter: Vec<[usize; LOCAL * LOCAL]>,
}

impl<'m> Assembler<'m> {
    pub fn new(mesh: &'m Mesh, rule: QuadratureRule) -> Self {
        let adj = mesh.node_neighbours();
        let mut rows = Vec::with_capacity(VARS * mesh.n_nodes());
        for nbrs in &adj {
            let cols: Vec<usize> = nbrs
                .iter()
                .flat_map(|&j| (0..VARS).map(move |v| dof(j, v)))
                .collect();
            for _ in 0..VARS {
                rows.push(cols.clone());
            }
        }
        let template = CsrMatrix::from_pattern(VARS * mesh.n_nodes(), &rows);
        let scatter = mesh
            .triangles
            .iter()
            .map(|t| {
                let mut s = [0; LOCAL * LOCAL];
                for li in 0..LOCAL {
                    for lj in 0..LOCAL {
                        let gi = dof(t[li / VARS], li % VARS);
                        let gj = dof(t[lj / VARS], lj % VARS);
                        s[li * LOCAL + lj] = template.position(gi, gj).expect("pattern covers elements");
                    }
                }
                s
            })
            .collect();
        Assembler {
            mesh,
            rule,
            template,
            scatter,
        }
    }

    pub fn n_dofs(&self) -> usize {
        VARS * self.mesh.n_nodes()
    }

    pub fn pattern(&self) -> &CsrMatrix {
        &self.template
    }

    /// Full step system (before boundary conditions).
    #[allow(clippy::too_many_arguments)]
    pub fn assemble_step(
        &self,
        prev: &FieldState,
        subs: &SubscaleField,
        coeffs: &CoefficientSet,
        consts: &StabConstants,
        dt: f64,
        t_new: f64,
    ) -> Result<AssembledSystem> {
        self.assemble_terms(prev, subs, coeffs, consts, dt, t_new, Terms::All)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn assemble_terms(
        &self,
        prev: &FieldState,
        subs: &SubscaleField,
        coeffs: &CoefficientSet,
        consts: &StabConstants,
        dt: f64,
        t_new: f64,
        terms: Terms,
    ) -> Result<AssembledSystem> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        if subs.n_qp != self.rule.len() || subs.n_elements() != self.mesh.n_elements() {
            return Err(Error::InvalidParameter("subscale field does not match mesh/rule".into()));
        }
        let params = element_params(self.mesh, prev, coeffs, consts, dt, t_new)?;
        let locals: Vec<Local> = (0..self.mesh.n_elements())
            .into_par_iter()
            .map(|k| self.element_system(k, prev, subs, coeffs, &params[k], dt, t_new, terms))
            .collect::<Result<_>>()?;

        let mut matrix = self.template.clone();
        let mut rhs = vec![0.0; self.n_dofs()];
        // deterministic reduction in element order
        for (k, local) in locals.iter().enumerate() {
            let t = self.mesh.triangles[k];
            let scatter = &self.scatter[k];
            for li in 0..LOCAL {
                for lj in 0..LOCAL {
                    matrix.values[scatter[li * LOCAL + lj]] += local.a[li][lj];
                }
                rhs[dof(t[li / VARS], li % VARS)] += local.b[li];
            }
        }
        if !matrix.is_finite() || rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("assembled system"));
        }
        Ok(AssembledSystem {
            matrix,
            rhs,
            constrained: Vec::new(),
            params,
        })
    }

    /// Galerkin convection block `C(uⁿ)` alone, including the `(ρ/2)(∇·uⁿ)` skew term.
    pub fn convection_block(&self, prev: &FieldState, rho: f64) -> Result<CsrMatrix> {
        let coeffs = CoefficientSet::simple(rho, 0.0, 1.0, ViscosityModel::newtonian(1.0));
        let subs = SubscaleField::zeros(self.mesh.n_elements(), self.rule.len());
        let consts = StabConstants {
            enabled: false,
            ..StabConstants::default()
        };
        Ok(self
            .assemble_terms(prev, &subs, &coeffs, &consts, 1.0, prev.t, Terms::Convection)?
            .matrix)
    }

    #[allow(clippy::too_many_arguments)]
    fn element_system(
        &self,
        k: usize,
        prev: &FieldState,
        subs: &SubscaleField,
        coeffs: &CoefficientSet,
        params: &StabParams,
        dt: f64,
        t_new: f64,
        terms: Terms,
    ) -> Result<Local> {
        let mesh = self.mesh;
        let geo = &mesh.geometry[k];
        let g = &geo.gradients;
        let rho = coeffs.rho;
        let alpha = coeffs.alpha;

        let grad_u = [grad_scalar(mesh, &prev.u1, k), grad_scalar(mesh, &prev.u2, k)];
        let div_a = grad_u[0][0] + grad_u[1][1];
        let j2 = compute_j2(grad_u);

        let galerkin = matches!(terms, Terms::All | Terms::Galerkin);
        let stab = matches!(terms, Terms::All | Terms::Stabilization);
        let convection_only = terms == Terms::Convection;

        let mut a = [[0.0; LOCAL]; LOCAL];
        let mut b = [0.0; LOCAL];
        let li = |node: usize, var: usize| VARS * node + var;

        for (q, (n, w)) in self.rule.points.iter().zip(&self.rule.weights).enumerate() {
            let wa = w * geo.area;
            let x = mesh.map_point(k, *n);
            let adv = [eval_scalar(mesh, &prev.u1, k, *n), eval_scalar(mesh, &prev.u2, k, *n)];
            let conv = [0, 1, 2].map(|i| adv[0] * g[i][0] + adv[1] * g[i][1]);

            if convection_only {
                for i in 0..3 {
                    for j in 0..3 {
                        let v = wa * rho * (conv[j] * n[i] + 0.5 * div_a * n[i] * n[j]);
                        a[li(i, U1)][li(j, U1)] += v;
                        a[li(i, U2)][li(j, U2)] += v;
                    }
                }
                continue;
            }

            let c_prev = eval_scalar(mesh, &prev.c, k, *n);
            let mu = coeffs.viscosity.effective_viscosity(c_prev, j2)?;
            let d = coeffs.diffusion_at(x, t_new);
            let (f_f, f_t) = coeffs.forcing.eval(x, t_new);
            if !(f_f[0].is_finite() && f_f[1].is_finite() && f_t.is_finite()) {
                return Err(Error::NonFinite("forcing"));
            }
            let hist = subs.at(k, q);

            if galerkin {
                for i in 0..3 {
                    let (gi, ni) = (g[i], n[i]);
                    for j in 0..3 {
                        let (gj, nj) = (g[j], n[j]);
                        let mass = ni * nj;
                        let m = wa * (rho / dt * mass + rho * conv[j] * ni + 0.5 * rho * div_a * mass);
                        a[li(i, U1)][li(j, U1)] += m + wa * mu * (2.0 * gj[0] * gi[0] + gj[1] * gi[1]);
                        a[li(i, U1)][li(j, U2)] += wa * mu * gj[0] * gi[1];
                        a[li(i, U2)][li(j, U1)] += wa * mu * gj[1] * gi[0];
                        a[li(i, U2)][li(j, U2)] += m + wa * mu * (gj[0] * gi[0] + 2.0 * gj[1] * gi[1]);
                        // -b(v, p) and b(u, q)
                        a[li(i, U1)][li(j, P)] -= wa * gi[0] * nj;
                        a[li(i, U2)][li(j, P)] -= wa * gi[1] * nj;
                        a[li(i, P)][li(j, U1)] += wa * gj[0] * ni;
                        a[li(i, P)][li(j, U2)] += wa * gj[1] * ni;
                        a[li(i, C)][li(j, C)] += wa
                            * (mass / dt
                                + d[0].value * gj[0] * gi[0]
                                + d[1].value * gj[1] * gi[1]
                                + alpha * mass
                                + conv[j] * ni);
                    }
                    b[li(i, U1)] += wa * ni * (f_f[0] + rho / dt * adv[0]);
                    b[li(i, U2)] += wa * ni * (f_f[1] + rho / dt * adv[1]);
                    b[li(i, C)] += wa * ni * (f_t + c_prev / dt);
                }
            }

            if stab {
                let tb1 = params.tau_bar1;
                let tau2 = params.tau_bar2;
                let tb3 = params.tau_bar3;
                let dgrad = [d[0].gradient[0], d[1].gradient[1]];
                let mom_hist = [
                    f_f[0] + rho / dt * (adv[0] + hist[0]),
                    f_f[1] + rho / dt * (adv[1] + hist[1]),
                ];
                let tr_hist = f_t + (c_prev + hist[3]) / dt;

                for i in 0..3 {
                    // adjoint L*V for the three momentum-subscale test functions of node i
                    let adj_v = -rho * conv[i];
                    let adj_q = [-g[i][0], -g[i][1]];
                    let adj_d = -conv[i] + alpha * n[i] - (dgrad[0] * g[i][0] + dgrad[1] * g[i][1]);

                    b[li(i, U1)] -= wa * tb1 * mom_hist[0] * adj_v;
                    b[li(i, U2)] -= wa * tb1 * mom_hist[1] * adj_v;
                    b[li(i, P)] -= wa * tb1 * (mom_hist[0] * adj_q[0] + mom_hist[1] * adj_q[1]);
                    b[li(i, C)] -= wa * tb3 * tr_hist * adj_d;

                    for j in 0..3 {
                        // momentum operator (ρ/dt + ρ a·∇) u + ∇p applied to trial functions of node j
                        let op_u = rho / dt * n[j] + rho * conv[j];
                        let op_p = g[j];
                        a[li(i, U1)][li(j, U1)] -= wa * tb1 * op_u * adj_v;
                        a[li(i, U2)][li(j, U2)] -= wa * tb1 * op_u * adj_v;
                        a[li(i, U1)][li(j, P)] -= wa * tb1 * op_p[0] * adj_v;
                        a[li(i, U2)][li(j, P)] -= wa * tb1 * op_p[1] * adj_v;
                        a[li(i, P)][li(j, U1)] -= wa * tb1 * op_u * adj_q[0];
                        a[li(i, P)][li(j, U2)] -= wa * tb1 * op_u * adj_q[1];
                        a[li(i, P)][li(j, P)] -= wa * tb1 * (op_p[0] * adj_q[0] + op_p[1] * adj_q[1]);

                        // pressure subscale: τ₂ (∇·u, ∇·v)
                        for r in 0..2 {
                            for s in 0..2 {
                                a[li(i, r)][li(j, s)] += wa * tau2 * g[j][s] * g[i][r];
                            }
                        }

                        let op_c = n[j] / dt + conv[j] + alpha * n[j]
                            - (dgrad[0] * g[j][0] + dgrad[1] * g[j][1]);
                        a[li(i, C)][li(j, C)] -= wa * tb3 * op_c * adj_d;
                    }
                }
            }
        }
        Ok(Local { a, b })
    }
}

/// Dirichlet constraints for `u1`, `u2`, `c` on every boundary node at time `t`.
pub fn dirichlet_constraints(mesh: &Mesh, coeffs: &CoefficientSet, t: f64) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    for node in mesh.boundary_nodes() {
        let x = mesh.nodes[node];
        let sides = mesh.boundary[node];
        for var in [U1, U2, C] {
            out.push((dof(node, var), coeffs.dirichlet.value(var, x, sides, t)));
        }
    }
    out
}

/// Row/column elimination of `constraints` plus one pinned pressure node.
pub fn apply_dirichlet(
    system: &mut AssembledSystem,
    constraints: &[(usize, f64)],
    pressure_pin: (usize, f64),
) -> Result<()> {
    let n = system.rhs.len();
    let mut fixed: Vec<Option<f64>> = vec![None; n];
    let pin_dof = dof(pressure_pin.0, P);
    if pin_dof >= n {
        return Err(Error::InvalidParameter(format!(
            "pressure pin node {} out of range",
            pressure_pin.0
        )));
    }
    for &(d, v) in constraints.iter().chain(std::iter::once(&(pin_dof, pressure_pin.1))) {
        if d >= n {
            return Err(Error::InvalidParameter(format!("constrained dof {d} out of range")));
        }
        match fixed[d] {
            Some(old) if old != v || d == pin_dof => return Err(Error::ConstraintConflict(d)),
            _ => fixed[d] = Some(v),
        }
    }

    let m = &mut system.matrix;
    for i in 0..m.n_rows {
        let range = m.row_offsets[i]..m.row_offsets[i + 1];
        if let Some(g) = fixed[i] {
            for p in range {
                m.values[p] = if m.col_indices[p] == i { 1.0 } else { 0.0 };
            }
            system.rhs[i] = g;
        } else {
            for p in range {
                if let Some(g) = fixed[m.col_indices[p]] {
                    system.rhs[i] -= m.values[p] * g;
                    m.values[p] = 0.0;
                }
            }
        }
    }
    system.constrained = fixed
        .iter()
        .enumerate()
        .filter_map(|(d, v)| v.map(|v| (d, v)))
        .collect();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize) -> Mesh {
        Mesh::structured(n).unwrap()
    }

    fn random_state(mesh: &Mesh, seed: u64) -> FieldState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = FieldState::zeros(mesh.n_nodes(), 0.0);
        for var in 0..4 {
            for v in s.field_mut(var) {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
        s
    }

    #[test]
    fn pattern_is_symmetric_and_sized() {
        let mesh = setup(3);
        let asm = Assembler::new(&mesh, QuadratureRule::degree4());
        assert_eq!(asm.pattern().n_rows, 4 * 16);
        assert!(asm.pattern().pattern_is_symmetric());
    }

    #[test]
    fn zero_data_gives_zero_system_solution() {
        let mesh = setup(4);
        let asm = Assembler::new(&mesh, QuadratureRule::degree4());
        let coeffs = CoefficientSet::simple(1.0, 0.0, 0.01, ViscosityModel::newtonian(0.1));
        let prev = FieldState::zeros(mesh.n_nodes(), 0.0);
        let subs = SubscaleField::zeros(mesh.n_elements(), 6);
        let mut sys = asm
            .assemble_step(&prev, &subs, &coeffs, &StabConstants::default(), 0.1, 0.1)
            .unwrap();
        assert!(sys.rhs.iter().all(|&v| v == 0.0));
        let cons = dirichlet_constraints(&mesh, &coeffs, 0.1);
        apply_dirichlet(&mut sys, &cons, (0, 0.0)).unwrap();
        assert!(sys.rhs.iter().all(|&v| v == 0.0));
        for &(d, _) in &sys.constrained {
            let (cols, vals) = sys.matrix.row(d);
            for (c, v) in cols.iter().zip(vals) {
                assert_eq!(*v, if *c == d { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn skew_symmetric_convection() {
        let mesh = setup(6);
        let asm = Assembler::new(&mesh, QuadratureRule::degree4());
        let prev = random_state(&mesh, 3);
        let cblock = asm.convection_block(&prev, 1.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..3 {
            let mut v = vec![0.0; asm.n_dofs()];
            for node in 0..mesh.n_nodes() {
                if !mesh.is_boundary(node) {
                    v[dof(node, U1)] = rng.gen_range(-1.0..1.0);
                    v[dof(node, U2)] = rng.gen_range(-1.0..1.0);
                }
            }
            let q = cblock.quadratic_form(&v);
            let vv: f64 = v.iter().map(|x| x * x).sum();
            assert!(q.abs() <= 1e-12 * vv, "vᵀCv = {q}");
        }
    }

    #[test]
    fn stabilization_terms_are_additive() {
        let mesh = setup(2);
        let asm = Assembler::new(&mesh, QuadratureRule::degree4());
        let mut coeffs = CoefficientSet::simple(1.0, 0.01, 0.01, ViscosityModel::newtonian(0.05));
        coeffs.forcing = Arc::new(ConstForce);
        let prev = random_state(&mesh, 5);
        let mut subs = SubscaleField::zeros(mesh.n_elements(), 6);
        for (i, s) in subs.values.iter_mut().enumerate() {
            *s = [0.01 * i as f64, -0.02, 0.0, 0.03];
        }
        let on = StabConstants::default();
        let off = StabConstants {
            enabled: false,
            ..on
        };
        let full = asm.assemble_step(&prev, &subs, &coeffs, &on, 0.1, 0.1).unwrap();
        let plain = asm.assemble_step(&prev, &subs, &coeffs, &off, 0.1, 0.1).unwrap();
        let galerkin = asm
            .assemble_terms(&prev, &subs, &coeffs, &on, 0.1, 0.1, Terms::Galerkin)
            .unwrap();
        let stab = asm
            .assemble_terms(&prev, &subs, &coeffs, &on, 0.1, 0.1, Terms::Stabilization)
            .unwrap();
        assert_eq!(plain.matrix, galerkin.matrix);
        assert_eq!(plain.rhs, galerkin.rhs);
        let mut max_stab = 0.0f64;
        for p in 0..full.matrix.nnz() {
            let diff = full.matrix.values[p] - plain.matrix.values[p];
            assert!((diff - stab.matrix.values[p]).abs() < 1e-12);
            max_stab = max_stab.max(stab.matrix.values[p].abs());
        }
        assert!(max_stab > 0.0);
        for i in 0..full.rhs.len() {
            assert!((full.rhs[i] - plain.rhs[i] - stab.rhs[i]).abs() < 1e-12);
        }
    }

    struct ConstForce;
    impl Forcing for ConstForce {
        fn eval(&self, x: Point, _: f64) -> ([f64; 2], f64) {
            ([1.0 + x[0], -0.5], 0.25)
        }
    }

    #[test]
    fn assembly_is_bitwise_reproducible() {
        let mesh = setup(5);
        let asm = Assembler::new(&mesh, QuadratureRule::degree4());
        let coeffs = CoefficientSet::simple(1.0, 0.01, 0.01, ViscosityModel::newtonian(0.01));
        let prev = random_state(&mesh, 9);
        let subs = SubscaleField::zeros(mesh.n_elements(), 6);
        let a = asm.assemble_step(&prev, &subs, &coeffs, &StabConstants::default(), 0.05, 0.05).unwrap();
        let b = asm.assemble_step(&prev, &subs, &coeffs, &StabConstants::default(), 0.05, 0.05).unwrap();
        assert_eq!(a.matrix.values, b.matrix.values);
        assert_eq!(a.rhs, b.rhs);
        assert_eq!(a.matrix.col_indices, asm.pattern().col_indices);
    }

    #[test]
    fn lid_constraints() {
        let mesh = setup(4);
        let mut coeffs = CoefficientSet::simple(1.0, 0.01, 0.01, ViscosityModel::newtonian(0.01));
        coeffs.dirichlet = Arc::new(LidDriven { speed: 1.0 });
        let cons = dirichlet_constraints(&mesh, &coeffs, 0.0);
        for (d, v) in cons {
            let node = d / VARS;
            let top = mesh.nodes[node][1] == 1.0;
            let expected = if d % VARS == U1 && top { 1.0 } else { 0.0 };
            assert_eq!(v, expected, "node {node} var {}", d % VARS);
        }
        // corners on the lid take the lid value
        let top_left = 4 * 5;
        assert_eq!(coeffs.dirichlet.value(U1, mesh.nodes[top_left], mesh.boundary[top_left], 0.0), 1.0);
    }

    #[test]
    fn elimination_moves_columns_to_rhs() {
        let mesh = setup(1);
        let asm = Assembler::new(&mesh, QuadratureRule::degree4());
        let mut sys = AssembledSystem {
            matrix: asm.pattern().clone(),
            rhs: vec![0.0; asm.n_dofs()],
            constrained: vec![],
            params: vec![],
        };
        sys.matrix.values.fill(1.0);
        apply_dirichlet(&mut sys, &[(dof(1, U1), 2.0)], (0, 0.0)).unwrap();
        // unconstrained row 3 (node 0, c) had A[3, dof(1,U1)] = 1 → rhs -= 2
        assert_eq!(sys.rhs[dof(0, C)], -2.0);
        assert_eq!(sys.rhs[dof(1, U1)], 2.0);
        assert_eq!(sys.matrix.get(dof(0, C), dof(1, U1)), 0.0);
    }

    #[test]
    fn conflicting_pin_is_rejected() {
        let mesh = setup(1);
        let asm = Assembler::new(&mesh, QuadratureRule::degree4());
        let mut sys = AssembledSystem {
            matrix: asm.pattern().clone(),
            rhs: vec![0.0; asm.n_dofs()],
            constrained: vec![],
            params: vec![],
        };
        let err = apply_dirichlet(&mut sys, &[(dof(0, P), 1.0)], (0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::ConstraintConflict(_)));
    }
}
