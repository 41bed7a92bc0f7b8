#![allow(dead_code)]

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector, Point2};
use rand::Rng;
use vem2d::assembly::{
    assemble_loads, element_data, internal_force_from, scatter, solve_with, spmv, GlobalSystem, LoadCase,
    SolverOptions,
};
use vem2d::element::Formulation;
use vem2d::geometry::Polygon;
use vem2d::mesh::Mesh;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Labelled blocks of a text dump: a line starting with a non-numeric token
/// opens a block (remaining tokens form its first row), numeric lines add
/// rows.
pub fn parse_dump(text: &str) -> Vec<(String, Vec<Vec<f64>>)> {
    let mut out: Vec<(String, Vec<Vec<f64>>)> = Vec::new();
    for line in text.lines() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        let Some(first) = toks.first() else { continue };
        if first.parse::<f64>().is_ok() {
            let row = toks.iter().map(|t| t.parse().unwrap()).collect();
            out.last_mut().expect("numbers before a label").1.push(row);
        } else {
            let rest: Vec<f64> = toks[1..].iter().filter_map(|t| t.parse().ok()).collect();
            let rows = if rest.is_empty() { vec![] } else { vec![rest] };
            out.push((first.to_string(), rows));
        }
    }
    out
}

pub fn block(dump: &[(String, Vec<Vec<f64>>)], name: &str) -> DMatrix<f64> {
    let rows = &dump
        .iter()
        .find(|(n, _)| n == name)
        .unwrap_or_else(|| panic!("no block {name}"))
        .1;
    DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

/// Random simple CCW polygon with 3–12 vertices: vertices at sorted random
/// angles around a centre, on a circle (convex) or at random radii (generally
/// concave), then scaled, stretched, rotated and shifted.
pub fn random_polygon(rng: &mut impl Rng, convex: bool) -> Polygon {
    loop {
        let n = rng.gen_range(3..=12);
        let gaps: Vec<f64> = (0..n).map(|_| rng.gen_range(0.3..1.0)).collect();
        let total: f64 = gaps.iter().sum();
        let mut theta = rng.gen_range(0.0..std::f64::consts::TAU);
        let scale = 10f64.powf(rng.gen_range(-2.0..2.0));
        let stretch = rng.gen_range(0.4..1.0);
        let rot = rng.gen_range(0.0..std::f64::consts::TAU);
        let shift = Point2::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0));
        let pts: Vec<Point2<f64>> = gaps
            .iter()
            .map(|g| {
                theta += g / total * std::f64::consts::TAU;
                let r = if convex { 1.0 } else { rng.gen_range(0.35..1.0) };
                let (x, y) = (r * theta.cos(), stretch * r * theta.sin());
                let (c, s) = (rot.cos(), rot.sin());
                Point2::new(shift.x + scale * (c * x - s * y), shift.y + scale * (s * x + c * y))
            })
            .collect();
        if let Ok(p) = Polygon::new(pts) {
            if p.check_simple().is_ok() {
                return p;
            }
        }
    }
}

/// A solved system with the quantities the equilibrium checks need.
pub struct Solved {
    pub u: DVector<f64>,
    pub f: DVector<f64>,
    pub ku: DVector<f64>,
    pub f_int: DVector<f64>,
    pub constrained: Vec<usize>,
}

impl Solved {
    /// Largest per-component `|Σ R + Σ F|`, relative to `Σ |R| + Σ |F|`
    /// over both components.
    pub fn equilibrium_error(&self) -> f64 {
        let mut sum = [0.0; 2];
        let mut scale = 0.0;
        for (i, &f) in self.f.iter().enumerate() {
            sum[i % 2] += f;
            scale += f.abs();
        }
        for &i in &self.constrained {
            let r = self.ku[i] - self.f[i];
            sum[i % 2] += r;
            scale += r.abs();
        }
        if scale == 0.0 {
            0.0
        } else {
            sum[0].abs().max(sum[1].abs()) / scale
        }
    }

    /// `‖F_int − K u‖ / ‖K u‖`.
    pub fn internal_force_error(&self) -> f64 {
        let n = self.ku.norm();
        if n == 0.0 {
            self.f_int.norm()
        } else {
            (&self.f_int - &self.ku).norm() / n
        }
    }
}

pub fn solve_case(mesh: &Mesh, formulation: &Formulation, lc: &LoadCase) -> Solved {
    let data = element_data(mesh, formulation).expect("element evaluation");
    let system = GlobalSystem {
        k: scatter(mesh, &data),
        f: assemble_loads(mesh, lc).expect("loads"),
        constraints: lc.dirichlet.clone(),
    };
    let (u, _) = solve_with(&system, &SolverOptions::default()).expect("solve");
    let ku = spmv(&system.k, &u);
    let f_int = internal_force_from(mesh, &data, &u);
    Solved {
        f: system.f,
        ku,
        f_int,
        constrained: lc.constrained_dofs(),
        u,
    }
}

/// Nodes on the boundary of an axis-aligned rectangular mesh.
pub fn boundary_nodes(mesh: &Mesh) -> Vec<usize> {
    let mut ids: Vec<usize> = ["left", "right", "bottom", "top"]
        .iter()
        .flat_map(|s| mesh.node_sets[*s].iter().copied())
        .collect();
    ids.sort_unstable();
    ids.dedup();
    ids
}
