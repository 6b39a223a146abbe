//! P1 fields on triangles: quadrature, pointwise evaluation and norms.

use crate::mesh::{Mesh, Point};

/// Quadrature rule on the reference triangle in barycentric coordinates.
/// Weights are normalized to sum to one, so `area * Σ w f` integrates `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    /// Symmetric 6-point rule, exact for polynomials of degree 4.
    pub fn degree4() -> Self {
        const A: f64 = 0.445_948_490_915_964_886_32;
        const WA: f64 = 0.223_381_589_678_011_465_70;
        const B: f64 = 0.091_576_213_509_770_743_46;
        const WB: f64 = 0.109_951_743_655_321_867_64;
        let ca = 1.0 - 2.0 * A;
        let cb = 1.0 - 2.0 * B;
        QuadratureRule {
            points: vec![
                [ca, A, A],
                [A, ca, A],
                [A, A, ca],
                [cb, B, B],
                [B, cb, B],
                [B, B, cb],
            ],
            weights: vec![WA, WA, WA, WB, WB, WB],
            degree: 4,
        }
    }

    /// One-point centroid rule (degree 1).
    pub fn centroid() -> Self {
        QuadratureRule {
            points: vec![[1.0 / 3.0; 3]],
            weights: vec![1.0],
            degree: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self::degree4()
    }
}

/// Nodal coefficients of `(u1, u2, p, c)` at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub p: Vec<f64>,
    pub c: Vec<f64>,
    pub t: f64,
}

impl FieldState {
    pub fn zeros(n_nodes: usize, t: f64) -> Self {
        FieldState {
            u1: vec![0.0; n_nodes],
            u2: vec![0.0; n_nodes],
            p: vec![0.0; n_nodes],
            c: vec![0.0; n_nodes],
            t,
        }
    }

    /// Nodal interpolant of `f(x, y) -> [u1, u2, p, c]`.
    pub fn interpolate(mesh: &Mesh, t: f64, f: impl Fn(Point) -> [f64; 4]) -> Self {
        let mut s = FieldState::zeros(mesh.n_nodes(), t);
        for (i, &x) in mesh.nodes.iter().enumerate() {
            let v = f(x);
            s.u1[i] = v[0];
            s.u2[i] = v[1];
            s.p[i] = v[2];
            s.c[i] = v[3];
        }
        s
    }

    pub fn n_nodes(&self) -> usize {
        self.u1.len()
    }

    pub fn field(&self, var: usize) -> &[f64] {
        match var {
            0 => &self.u1,
            1 => &self.u2,
            2 => &self.p,
            _ => &self.c,
        }
    }

    pub fn field_mut(&mut self, var: usize) -> &mut Vec<f64> {
        match var {
            0 => &mut self.u1,
            1 => &mut self.u2,
            2 => &mut self.p,
            _ => &mut self.c,
        }
    }

    /// Node-blocked vector `[u1, u2, p, c]` per node.
    pub fn to_blocked(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(4 * self.n_nodes());
        for i in 0..self.n_nodes() {
            out.extend_from_slice(&[self.u1[i], self.u2[i], self.p[i], self.c[i]]);
        }
        out
    }

    pub fn from_blocked(x: &[f64], t: f64) -> Self {
        let n = x.len() / 4;
        let mut s = FieldState::zeros(n, t);
        for i in 0..n {
            s.u1[i] = x[4 * i];
            s.u2[i] = x[4 * i + 1];
            s.p[i] = x[4 * i + 2];
            s.c[i] = x[4 * i + 3];
        }
        s
    }

    pub fn is_finite(&self) -> bool {
        [&self.u1, &self.u2, &self.p, &self.c]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// Values and gradients of all four fields at one point of an element.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PointValues {
    pub u: [f64; 2],
    pub p: f64,
    pub c: f64,
    /// `grad_u[i][j] = ∂u_i/∂x_j`
    pub grad_u: [[f64; 2]; 2],
    pub grad_p: [f64; 2],
    pub grad_c: [f64; 2],
}

impl PointValues {
    pub fn divergence(&self) -> f64 {
        self.grad_u[0][0] + self.grad_u[1][1]
    }
}

/// Interpolated value of a nodal scalar at barycentric coordinates of element `k`.
pub fn eval_scalar(mesh: &Mesh, field: &[f64], k: usize, bary: [f64; 3]) -> f64 {
    let t = mesh.triangles[k];
    bary[0] * field[t[0]] + bary[1] * field[t[1]] + bary[2] * field[t[2]]
}

/// Elementwise-constant gradient of a nodal scalar on element `k`.
pub fn grad_scalar(mesh: &Mesh, field: &[f64], k: usize) -> [f64; 2] {
    let t = mesh.triangles[k];
    let g = &mesh.geometry[k].gradients;
    let mut out = [0.0; 2];
    for a in 0..3 {
        out[0] += field[t[a]] * g[a][0];
        out[1] += field[t[a]] * g[a][1];
    }
    out
}

pub fn eval_field_at_qp(mesh: &Mesh, state: &FieldState, k: usize, bary: [f64; 3]) -> PointValues {
    let gu1 = grad_scalar(mesh, &state.u1, k);
    let gu2 = grad_scalar(mesh, &state.u2, k);
    PointValues {
        u: [
            eval_scalar(mesh, &state.u1, k, bary),
            eval_scalar(mesh, &state.u2, k, bary),
        ],
        p: eval_scalar(mesh, &state.p, k, bary),
        c: eval_scalar(mesh, &state.c, k, bary),
        grad_u: [gu1, gu2],
        grad_p: grad_scalar(mesh, &state.p, k),
        grad_c: grad_scalar(mesh, &state.c, k),
    }
}

/// `Σ_k area_k Σ_q w_q density(x_q, k)`.
pub fn integrate_scalar(
    mesh: &Mesh,
    rule: &QuadratureRule,
    density: impl Fn(Point, usize) -> f64,
) -> f64 {
    let mut total = 0.0;
    for k in 0..mesh.n_elements() {
        let area = mesh.geometry[k].area;
        let mut local = 0.0;
        for (bary, w) in rule.points.iter().zip(&rule.weights) {
            local += w * density(mesh.map_point(k, *bary), k);
        }
        total += area * local;
    }
    total
}

/// Closed-form reference value and gradient at a point.
pub type ExactScalar<'a> = &'a dyn Fn(Point) -> (f64, [f64; 2]);

/// L² norm and H¹ seminorm of a nodal field, or of `field - exact` when given.
pub fn l2_and_h1_seminorm(
    mesh: &Mesh,
    rule: &QuadratureRule,
    field: &[f64],
    exact: Option<ExactScalar<'_>>,
) -> (f64, f64) {
    let (l2_sq, h1_sq) = squared_error_parts(mesh, rule, field, exact);
    (l2_sq.sqrt(), (h1_sq[0] + h1_sq[1]).sqrt())
}

/// `(‖e‖², [‖∂e/∂x‖², ‖∂e/∂y‖²])` with `e = field - exact`.
pub fn squared_error_parts(
    mesh: &Mesh,
    rule: &QuadratureRule,
    field: &[f64],
    exact: Option<ExactScalar<'_>>,
) -> (f64, [f64; 2]) {
    let mut l2 = 0.0;
    let mut h1 = [0.0; 2];
    for k in 0..mesh.n_elements() {
        let area = mesh.geometry[k].area;
        let g = grad_scalar(mesh, field, k);
        for (bary, w) in rule.points.iter().zip(&rule.weights) {
            let v = eval_scalar(mesh, field, k, *bary);
            let (ev, eg) = match exact {
                Some(f) => f(mesh.map_point(k, *bary)),
                None => (0.0, [0.0; 2]),
            };
            let wa = w * area;
            l2 += wa * (v - ev).powi(2);
            h1[0] += wa * (g[0] - eg[0]).powi(2);
            h1[1] += wa * (g[1] - eg[1]).powi(2);
        }
    }
    (l2, h1)
}

/// Domain mean of a nodal field (exact for P1 fields).
pub fn mean_value(mesh: &Mesh, field: &[f64]) -> f64 {
    let mut total = 0.0;
    let mut area = 0.0;
    for (k, t) in mesh.triangles.iter().enumerate() {
        let a = mesh.geometry[k].area;
        total += a * (field[t[0]] + field[t[1]] + field[t[2]]) / 3.0;
        area += a;
    }
    total / area
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(|i| i as f64).product()
    }

    #[test]
    fn degree4_rule_weights_and_exactness() {
        let rule = QuadratureRule::degree4();
        let s: f64 = rule.weights.iter().sum();
        assert!((s - 1.0).abs() < 1e-14);
        // reference triangle (0,0),(1,0),(0,1): ∫ x^a y^b = a! b! / (a+b+2)!
        for a in 0..=4u32 {
            for b in 0..=(4 - a) {
                let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                let approx: f64 = 0.5
                    * rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(l, w)| w * l[1].powi(a as i32) * l[2].powi(b as i32))
                        .sum::<f64>();
                assert!((approx - exact).abs() < 1e-13, "x^{a} y^{b}: {approx} vs {exact}");
            }
        }
    }

    #[test]
    fn integrate_simple_densities() {
        let mesh = Mesh::structured(4).unwrap();
        let rule = QuadratureRule::degree4();
        assert!((integrate_scalar(&mesh, &rule, |_, _| 1.0) - 1.0).abs() < 1e-14);
        assert!((integrate_scalar(&mesh, &rule, |p, _| p[0] + p[1]) - 1.0).abs() < 1e-14);
        let v = integrate_scalar(&mesh, &rule, |p, _| p[0] * p[0] * p[1] * p[1]);
        assert!((v - 1.0 / 9.0).abs() < 1e-13);
    }

    #[test]
    fn constant_and_linear_reproduction() {
        let mesh = Mesh::structured(3).unwrap();
        let s = FieldState::interpolate(&mesh, 0.0, |p| [1.0, p[0], 2.0 * p[0] - 3.0 * p[1], 0.5]);
        for k in 0..mesh.n_elements() {
            let v = eval_field_at_qp(&mesh, &s, k, [0.2, 0.3, 0.5]);
            assert!((v.u[0] - 1.0).abs() < 1e-15);
            assert_eq!(v.grad_u[0], [0.0, 0.0]);
            assert!((v.grad_u[1][0] - 1.0).abs() < 1e-12 && v.grad_u[1][1].abs() < 1e-12);
            assert!((v.grad_p[0] - 2.0).abs() < 1e-12 && (v.grad_p[1] + 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn xy_at_centroids_matches_barycentric_formula() {
        let mesh = Mesh::structured(4).unwrap();
        let f: Vec<f64> = mesh.nodes.iter().map(|p| p[0] * p[1]).collect();
        for k in 0..mesh.n_elements() {
            let [a, b, c] = mesh.vertices(k);
            let expected = (a[0] * a[1] + b[0] * b[1] + c[0] * c[1]) / 3.0;
            let got = eval_scalar(&mesh, &f, k, [1.0 / 3.0; 3]);
            assert!((got - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn norms_of_linear_field() {
        let mesh = Mesh::structured(5).unwrap();
        let rule = QuadratureRule::degree4();
        let zero = vec![0.0; mesh.n_nodes()];
        assert_eq!(l2_and_h1_seminorm(&mesh, &rule, &zero, Some(&|_| (0.0, [0.0; 2]))), (0.0, 0.0));
        let x: Vec<f64> = mesh.nodes.iter().map(|p| p[0]).collect();
        let (l2, h1) = l2_and_h1_seminorm(&mesh, &rule, &x, None);
        assert!((l2 - (1.0f64 / 3.0).sqrt()).abs() < 1e-13);
        assert!((h1 - 1.0).abs() < 1e-13);
        // linear functions are reproduced exactly
        let lin = |p: Point| (2.0 * p[0] - p[1] + 0.25, [2.0, -1.0]);
        let f: Vec<f64> = mesh.nodes.iter().map(|&p| lin(p).0).collect();
        let (e0, e1) = l2_and_h1_seminorm(&mesh, &rule, &f, Some(&lin));
        assert!(e0 < 1e-12 && e1 < 1e-12);
    }

    #[test]
    fn interpolation_error_is_second_order_in_l2() {
        use std::f64::consts::PI;
        let rule = QuadratureRule::degree4();
        let exact = |p: Point| {
            let (sx, sy) = ((PI * p[0]).sin(), (PI * p[1]).sin());
            (
                sx * sy,
                [PI * (PI * p[0]).cos() * sy, PI * sx * (PI * p[1]).cos()],
            )
        };
        let err = |n: usize| {
            let mesh = Mesh::structured(n).unwrap();
            let f: Vec<f64> = mesh.nodes.iter().map(|&p| exact(p).0).collect();
            l2_and_h1_seminorm(&mesh, &rule, &f, Some(&exact))
        };
        let (c0, c1) = err(16);
        let (f0, f1) = err(32);
        assert!((c0 / f0 - 4.0).abs() < 0.2, "L2 ratio {}", c0 / f0);
        assert!((c1 / f1 - 2.0).abs() < 0.1, "H1 ratio {}", c1 / f1);
    }

    #[test]
    fn blocked_round_trip() {
        let mesh = Mesh::structured(2).unwrap();
        let s = FieldState::interpolate(&mesh, 0.5, |p| [p[0], p[1], p[0] * p[1], 1.0]);
        assert_eq!(FieldState::from_blocked(&s.to_blocked(), 0.5), s);
    }

    #[test]
    fn mean_of_linear_field() {
        let mesh = Mesh::structured(3).unwrap();
        let f: Vec<f64> = mesh.nodes.iter().map(|p| p[0] + 2.0 * p[1]).collect();
        assert!((mean_value(&mesh, &f) - 1.5).abs() < 1e-14);
    }
}
