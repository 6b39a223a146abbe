//! Structured triangulations of the unit square.
//!
//! Nodes are numbered lexicographically by `(y, x)`: node `j * (n_div + 1) + i`
//! sits at `(i / n_div, j / n_div)`. Every grid cell is cut along its SW–NE
//! diagonal into two counter-clockwise triangles.

use std::fmt::Write as _;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Side of the unit square a boundary node lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    fn bit(self) -> u8 {
        match self {
            Side::Left => 1,
            Side::Right => 2,
            Side::Bottom => 4,
            Side::Top => 8,
        }
    }
}

/// Set of sides a node belongs to. Corner nodes carry two tags.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct SideSet(u8);

impl SideSet {
    pub fn empty() -> Self {
        SideSet(0)
    }

    pub fn insert(&mut self, side: Side) {
        self.0 |= side.bit();
    }

    pub fn contains(self, side: Side) -> bool {
        self.0 & side.bit() != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Side> {
        Side::ALL.into_iter().filter(move |s| self.contains(*s))
    }
}

/// Area, barycentric gradients and diameter of one triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    pub area: f64,
    /// `gradients[i]` is the (constant) gradient of the i-th barycentric function.
    pub gradients: [[f64; 2]; 3],
    pub diameter: f64,
}

impl ElementGeometry {
    /// Geometry of the triangle with the given counter-clockwise vertices.
    pub fn from_vertices(v: [Point; 3]) -> Result<Self> {
        let [a, b, c] = v;
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        if !(det > 0.0) || !det.is_finite() {
            return Err(Error::DegenerateElement { signed_area: 0.5 * det });
        }
        let inv = 1.0 / det;
        // grad λ_i = perp(opposite edge) / (2 area)
        let gradients = [
            [(b[1] - c[1]) * inv, (c[0] - b[0]) * inv],
            [(c[1] - a[1]) * inv, (a[0] - c[0]) * inv],
            [(a[1] - b[1]) * inv, (b[0] - a[0]) * inv],
        ];
        let dist = |p: Point, q: Point| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
        let diameter = dist(a, b).max(dist(b, c)).max(dist(c, a));
        Ok(ElementGeometry {
            area: 0.5 * det,
            gradients,
            diameter,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub nodes: Vec<Point>,
    /// Counter-clockwise node triples.
    pub triangles: Vec<[usize; 3]>,
    /// Side tags per node; empty for interior nodes.
    pub boundary: Vec<SideSet>,
    pub geometry: Vec<ElementGeometry>,
    /// Largest element diameter.
    pub h: f64,
    pub n_div: usize,
}

impl Mesh {
    /// Uniform `n_div × n_div` grid of the unit square, two triangles per cell.
    pub fn structured(n_div: usize) -> Result<Self> {
        if n_div == 0 {
            return Err(Error::InvalidParameter("n_div must be at least 1".into()));
        }
        let n = n_div;
        let step = 1.0 / n as f64;
        let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
        let mut boundary = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                // exact endpoints so that boundary coordinates are exactly 0 or 1
                let x = if i == n { 1.0 } else { i as f64 * step };
                let y = if j == n { 1.0 } else { j as f64 * step };
                nodes.push([x, y]);
                let mut tags = SideSet::empty();
                if i == 0 {
                    tags.insert(Side::Left);
                }
                if i == n {
                    tags.insert(Side::Right);
                }
                if j == 0 {
                    tags.insert(Side::Bottom);
                }
                if j == n {
                    tags.insert(Side::Top);
                }
                boundary.push(tags);
            }
        }

        let id = |i: usize, j: usize| j * (n + 1) + i;
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let sw = id(i, j);
                let se = id(i + 1, j);
                let ne = id(i + 1, j + 1);
                let nw = id(i, j + 1);
                triangles.push([sw, se, ne]);
                triangles.push([sw, ne, nw]);
            }
        }

        let geometry = triangles
            .iter()
            .map(|t| ElementGeometry::from_vertices([nodes[t[0]], nodes[t[1]], nodes[t[2]]]))
            .collect::<Result<Vec<_>>>()?;
        let h = geometry.iter().map(|g| g.diameter).fold(0.0, f64::max);

        Ok(Mesh {
            nodes,
            triangles,
            boundary,
            geometry,
            h,
            n_div,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.triangles.len()
    }

    pub fn element_geometry(&self, k: usize) -> &ElementGeometry {
        &self.geometry[k]
    }

    pub fn vertices(&self, k: usize) -> [Point; 3] {
        let t = self.triangles[k];
        [self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]]
    }

    pub fn centroid(&self, k: usize) -> Point {
        let [a, b, c] = self.vertices(k);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Physical point for barycentric coordinates on element `k`.
    pub fn map_point(&self, k: usize, bary: [f64; 3]) -> Point {
        let [a, b, c] = self.vertices(k);
        [
            bary[0] * a[0] + bary[1] * b[0] + bary[2] * c[0],
            bary[0] * a[1] + bary[1] * b[1] + bary[2] * c[1],
        ]
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        !self.boundary[node].is_empty()
    }

    pub fn boundary_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_nodes()).filter(|&i| self.is_boundary(i))
    }

    /// Element containing `p` and the barycentric coordinates of `p` in it.
    /// Points on shared edges resolve to the lower-indexed cell.
    pub fn locate(&self, p: Point) -> Option<(usize, [f64; 3])> {
        let [x, y] = p;
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return None;
        }
        let n = self.n_div;
        let ci = ((x * n as f64).floor() as usize).min(n - 1);
        let cj = ((y * n as f64).floor() as usize).min(n - 1);
        let cell = cj * n + ci;
        for k in [2 * cell, 2 * cell + 1] {
            let bary = self.barycentric(k, p);
            if bary.iter().all(|&l| l >= -1e-12) {
                return Some((k, bary));
            }
        }
        None
    }

    pub fn barycentric(&self, k: usize, p: Point) -> [f64; 3] {
        let [a, _, _] = self.vertices(k);
        let g = &self.geometry[k].gradients;
        let d = [p[0] - a[0], p[1] - a[1]];
        let l1 = g[1][0] * d[0] + g[1][1] * d[1];
        let l2 = g[2][0] * d[0] + g[2][1] * d[1];
        [1.0 - l1 - l2, l1, l2]
    }

    /// Node adjacency (including self) in ascending order; used for sparsity patterns.
    pub fn node_neighbours(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_nodes()];
        for t in &self.triangles {
            for &a in t {
                for &b in t {
                    adj[a].push(b);
                }
            }
        }
        for row in &mut adj {
            row.sort_unstable();
            row.dedup();
        }
        adj
    }

    /// Plain-text listing of nodes and elements for debugging.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "nodes {}", self.n_nodes());
        for (i, p) in self.nodes.iter().enumerate() {
            let tags: Vec<String> = self.boundary[i].iter().map(|s| format!("{s:?}")).collect();
            let _ = writeln!(out, "{i} {:.17e} {:.17e} {}", p[0], p[1], tags.join(","));
        }
        let _ = writeln!(out, "triangles {}", self.n_elements());
        for (k, t) in self.triangles.iter().enumerate() {
            let _ = writeln!(out, "{k} {} {} {}", t[0], t[1], t[2]);
        }
        out
    }
}
