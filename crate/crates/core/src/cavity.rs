//! Lid-driven cavity post-processing: streamfunction, vortex centre, centreline profiles.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fe::{eval_scalar, grad_scalar, FieldState};
use crate::linsolve::DirectSolver;
use crate::mesh::{Mesh, Point};
use crate::sparse::{gmres, CsrMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct StreamFunction {
    pub psi: Vec<f64>,
    /// Node with the largest `|ψ|`.
    pub extremum_node: usize,
    pub extremum_location: Point,
    pub extremum_value: f64,
}

impl StreamFunction {
    pub fn distance_to_centre(&self) -> f64 {
        let p = self.extremum_location;
        (p[0] - 0.5).hypot(p[1] - 0.5)
    }

    /// `x,y,psi` rows.
    pub fn to_csv(&self, mesh: &Mesh) -> String {
        let mut s = String::from("x,y,psi\n");
        for (x, psi) in mesh.nodes.iter().zip(&self.psi) {
            writeln!(s, "{:.6},{:.6},{:.10e}", x[0], x[1], psi).expect("write to string");
        }
        s
    }
}

/// Elementwise `ω = ∂u₂/∂x - ∂u₁/∂y`.
pub fn element_vorticity(mesh: &Mesh, u1: &[f64], u2: &[f64]) -> Vec<f64> {
    (0..mesh.n_elements())
        .map(|k| grad_scalar(mesh, u2, k)[0] - grad_scalar(mesh, u1, k)[1])
        .collect()
}

/// Area-weighted average of element values at the nodes.
pub fn lump_to_nodes(mesh: &Mesh, values: &[f64]) -> Vec<f64> {
    let mut sum = vec![0.0; mesh.n_nodes()];
    let mut weight = vec![0.0; mesh.n_nodes()];
    for (k, tri) in mesh.triangles.iter().enumerate() {
        let a = mesh.geometry[k].area;
        for &n in tri {
            sum[n] += a * values[k];
            weight[n] += a;
        }
    }
    sum.iter().zip(&weight).map(|(s, w)| s / w).collect()
}

/// Solves `-Δψ = ω` with `ψ = 0` on the boundary, P1 stiffness and consistent mass.
pub fn compute_streamfunction(mesh: &Mesh, u1: &[f64], u2: &[f64]) -> Result<StreamFunction> {
    if u1.len() != mesh.n_nodes() || u2.len() != mesh.n_nodes() {
        return Err(Error::InvalidParameter("velocity does not match mesh".into()));
    }
    let omega = lump_to_nodes(mesh, &element_vorticity(mesh, u1, u2));
    let mut k = CsrMatrix::from_pattern(mesh.n_nodes(), &mesh.node_neighbours());
    let mut rhs = vec![0.0; mesh.n_nodes()];
    for (e, tri) in mesh.triangles.iter().enumerate() {
        let geo = &mesh.geometry[e];
        for i in 0..3 {
            for j in 0..3 {
                let g = &geo.gradients;
                k.add(tri[i], tri[j], geo.area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]));
                let m = if i == j { geo.area / 6.0 } else { geo.area / 12.0 };
                rhs[tri[i]] += m * omega[tri[j]];
            }
        }
    }
    let fixed: Vec<bool> = (0..mesh.n_nodes()).map(|n| mesh.is_boundary(n)).collect();
    for i in 0..k.n_rows {
        for p in k.row_offsets[i]..k.row_offsets[i + 1] {
            let j = k.col_indices[p];
            if fixed[i] {
                k.values[p] = if i == j { 1.0 } else { 0.0 };
            } else if fixed[j] {
                k.values[p] = 0.0;
            }
        }
        if fixed[i] {
            rhs[i] = 0.0;
        }
    }
    let psi = if mesh.n_div <= crate::linsolve::DIRECT_LIMIT {
        DirectSolver::new(&k)?.solve(&k, &rhs)?
    } else {
        gmres(&k, &rhs, None, 50, 1e-12, 20_000)?.0
    };
    let (extremum_node, extremum_value) = psi
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0f64), |best, (i, v)| if v.abs() > best.1.abs() { (i, v) } else { best });
    Ok(StreamFunction {
        extremum_location: mesh.nodes[extremum_node],
        psi,
        extremum_node,
        extremum_value,
    })
}

/// Samples a nodal field along a line; points outside the mesh are an error.
fn sample(mesh: &Mesh, field: &[f64], pts: impl Iterator<Item = Point>) -> Result<Vec<(Point, f64)>> {
    pts.map(|p| {
        let (k, bary) = mesh
            .locate(p)
            .ok_or_else(|| Error::InvalidParameter(format!("sample point {p:?} outside mesh")))?;
        Ok((p, eval_scalar(mesh, field, k, bary)))
    })
    .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CenterlineProfiles {
    /// `(y, u1(0.5, y))`
    pub vertical: Vec<(f64, f64)>,
    /// `(x, u2(x, 0.5))`
    pub horizontal: Vec<(f64, f64)>,
}

impl CenterlineProfiles {
    pub fn vertical_csv(&self) -> String {
        profile_csv("y,u1", &self.vertical)
    }

    pub fn horizontal_csv(&self) -> String {
        profile_csv("x,u2", &self.horizontal)
    }
}

fn profile_csv(header: &str, rows: &[(f64, f64)]) -> String {
    let mut s = format!("{header}\n");
    for (a, b) in rows {
        writeln!(s, "{a:.6},{b:.10e}").expect("write to string");
    }
    s
}

/// Profiles sampled at the mesh lines `s = j/n_div`.
pub fn centerline_profiles(mesh: &Mesh, state: &FieldState) -> Result<CenterlineProfiles> {
    let n = mesh.n_div;
    let coords = (0..=n).map(move |j| j as f64 / n as f64);
    let vertical = sample(mesh, &state.u1, coords.clone().map(|y| [0.5, y]))?
        .into_iter()
        .map(|(p, v)| (p[1], v))
        .collect();
    let horizontal = sample(mesh, &state.u2, coords.map(|x| [x, 0.5]))?
        .into_iter()
        .map(|(p, v)| (p[0], v))
        .collect();
    Ok(CenterlineProfiles { vertical, horizontal })
}

/// `(∫ max(u₁,0) dy, ∫ min(u₁,0) dy)` along `x = 0.5` (trapezoidal on the profile).
pub fn centerline_fluxes(profiles: &CenterlineProfiles) -> (f64, f64) {
    let v = &profiles.vertical;
    let mut pos = 0.0;
    let mut neg = 0.0;
    for w in v.windows(2) {
        let dy = w[1].0 - w[0].0;
        let f = 0.5 * dy * (w[0].1 + w[1].1);
        if f >= 0.0 {
            pos += f;
        } else {
            neg += f;
        }
    }
    (pos, neg)
}
