//! Legacy ASCII VTK for triangle meshes with `(u1, u2)`, `p`, `c` point data.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fe::FieldState;
use crate::mesh::{Mesh, Point};

const VTK_TRIANGLE: u32 = 5;

pub fn to_vtk_string(mesh: &Mesh, state: &FieldState, title: &str) -> Result<String> {
    if state.n_nodes() != mesh.n_nodes() {
        return Err(Error::InvalidParameter(format!(
            "state has {} nodes, mesh has {}",
            state.n_nodes(),
            mesh.n_nodes()
        )));
    }
    let title: String = title.chars().filter(|c| *c != '\n' && *c != '\r').take(255).collect();
    let n = mesh.n_nodes();
    let m = mesh.n_elements();
    let mut s = String::with_capacity(64 * n);
    let w = &mut s;
    // writes into a String cannot fail
    let _ = writeln!(w, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(w, "POINTS {n} double");
    for x in &mesh.nodes {
        let _ = writeln!(w, "{:e} {:e} 0", x[0], x[1]);
    }
    let _ = writeln!(w, "CELLS {m} {}", 4 * m);
    for t in &mesh.triangles {
        let _ = writeln!(w, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(w, "CELL_TYPES {m}");
    for _ in 0..m {
        let _ = writeln!(w, "{VTK_TRIANGLE}");
    }
    let _ = writeln!(w, "POINT_DATA {n}\nVECTORS velocity double");
    for i in 0..n {
        let _ = writeln!(w, "{:e} {:e} 0", state.u1[i], state.u2[i]);
    }
    for (name, field) in [("p", &state.p), ("c", &state.c)] {
        let _ = writeln!(w, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in field {
            let _ = writeln!(w, "{v:e}");
        }
    }
    Ok(s)
}

pub fn write_vtk(path: &Path, mesh: &Mesh, state: &FieldState, title: &str) -> Result<()> {
    let text = to_vtk_string(mesh, state, title)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Contents of a file produced by [`to_vtk_string`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VtkData {
    pub title: String,
    pub points: Vec<Point>,
    pub cells: Vec<[usize; 3]>,
    pub velocity: Vec<[f64; 2]>,
    pub p: Vec<f64>,
    pub c: Vec<f64>,
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
    total: usize,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Result<&'a str> {
        loop {
            let (i, l) = self.inner.next().ok_or_else(|| self.err("unexpected end of file"))?;
            self.line = i + 1;
            let l = l.trim();
            if !l.is_empty() {
                return Ok(l);
            }
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            message: message.into(),
        }
    }

    /// Header `KEYWORD count ...`; returns the count and the remaining tokens.
    fn header(&mut self, keyword: &str) -> Result<(usize, Vec<&'a str>)> {
        let l = self.next_line()?;
        let mut tok = l.split_whitespace();
        if tok.next() != Some(keyword) {
            return Err(self.err(format!("expected `{keyword}`, found `{l}`")));
        }
        let count = self.count(tok.next())?;
        Ok((count, tok.collect()))
    }

    fn count(&self, tok: Option<&str>) -> Result<usize> {
        let n: usize = tok
            .ok_or_else(|| self.err("missing count"))?
            .parse()
            .map_err(|_| self.err("invalid count"))?;
        // every entry needs at least one line, which bounds allocations on hostile input
        if n > self.total - self.line {
            return Err(self.err(format!("count {n} exceeds remaining input")));
        }
        Ok(n)
    }

    fn numbers<T: std::str::FromStr>(&mut self, expected: usize) -> Result<Vec<T>> {
        let l = self.next_line()?;
        let v = l
            .split_whitespace()
            .map(|t| t.parse::<T>().map_err(|_| self.err(format!("invalid number `{t}`"))))
            .collect::<Result<Vec<T>>>()?;
        if v.len() != expected {
            return Err(self.err(format!("expected {expected} values, found {}", v.len())));
        }
        Ok(v)
    }
}

pub fn parse_vtk(text: &str) -> Result<VtkData> {
    let mut it = Lines {
        inner: text.lines().enumerate(),
        line: 0,
        total: text.lines().count(),
    };
    let first = it.next_line()?;
    if !first.starts_with("# vtk DataFile") {
        return Err(it.err("missing `# vtk DataFile` header"));
    }
    let title = it.next_line()?.to_string();
    if it.next_line()? != "ASCII" {
        return Err(it.err("only ASCII files are supported"));
    }
    if it.next_line()? != "DATASET UNSTRUCTURED_GRID" {
        return Err(it.err("expected `DATASET UNSTRUCTURED_GRID`"));
    }

    let (n, _) = it.header("POINTS")?;
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let v: Vec<f64> = it.numbers(3)?;
        points.push([v[0], v[1]]);
    }

    let (m, rest) = it.header("CELLS")?;
    if rest.first().and_then(|t| t.parse::<usize>().ok()) != m.checked_mul(4) {
        return Err(it.err("CELLS size must be 4 per triangle"));
    }
    let mut cells = Vec::with_capacity(m);
    for _ in 0..m {
        let v: Vec<usize> = it.numbers(4)?;
        if v[0] != 3 {
            return Err(it.err("only triangles are supported"));
        }
        if v[1..].iter().any(|&i| i >= n) {
            return Err(it.err("cell index out of range"));
        }
        cells.push([v[1], v[2], v[3]]);
    }

    let (mt, _) = it.header("CELL_TYPES")?;
    if mt != m {
        return Err(it.err("CELL_TYPES count differs from CELLS"));
    }
    for _ in 0..m {
        let v: Vec<u32> = it.numbers(1)?;
        if v[0] != VTK_TRIANGLE {
            return Err(it.err(format!("unsupported cell type {}", v[0])));
        }
    }

    let (np, _) = it.header("POINT_DATA")?;
    if np != n {
        return Err(it.err("POINT_DATA count differs from POINTS"));
    }
    if it.next_line()? != "VECTORS velocity double" {
        return Err(it.err("expected `VECTORS velocity double`"));
    }
    let mut velocity = Vec::with_capacity(n);
    for _ in 0..n {
        let v: Vec<f64> = it.numbers(3)?;
        velocity.push([v[0], v[1]]);
    }
    let mut scalars = Vec::new();
    for name in ["p", "c"] {
        if it.next_line()? != format!("SCALARS {name} double 1") {
            return Err(it.err(format!("expected `SCALARS {name} double 1`")));
        }
        if it.next_line()? != "LOOKUP_TABLE default" {
            return Err(it.err("expected `LOOKUP_TABLE default`"));
        }
        let mut field = Vec::with_capacity(n);
        for _ in 0..n {
            field.push(it.numbers::<f64>(1)?[0]);
        }
        scalars.push(field);
    }
    let c = scalars.pop().unwrap_or_default();
    let p = scalars.pop().unwrap_or_default();
    Ok(VtkData {
        title,
        points,
        cells,
        velocity,
        p,
        c,
    })
}
