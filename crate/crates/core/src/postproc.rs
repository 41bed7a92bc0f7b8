//! Field recovery, scalar results and file export.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DVector, Point2, Vector3};
use rayon::prelude::*;

use crate::assembly::{element_data, ElementData};
use crate::element::{element_strain, element_stress, Formulation};
use crate::material::Material;
use crate::mesh::Mesh;
use crate::{Error, Result};

/// Nodal displacements with per-element constant strain and stress (Voigt,
/// engineering shear strain).
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionField {
    pub displacements: DVector<f64>,
    pub strains: Vec<Vector3<f64>>,
    pub stresses: Vec<Vector3<f64>>,
}

impl SolutionField {
    pub fn node_displacement(&self, node: usize) -> [f64; 2] {
        [self.displacements[2 * node], self.displacements[2 * node + 1]]
    }
}

pub fn recover_fields(mesh: &Mesh, formulation: &Formulation, u: &DVector<f64>) -> Result<SolutionField> {
    let data = element_data(mesh, formulation)?;
    recover_from(mesh, &data, &formulation.material, u)
}

/// Field recovery reusing already evaluated element data.
pub fn recover_from(
    mesh: &Mesh,
    data: &[ElementData],
    material: &Material,
    u: &DVector<f64>,
) -> Result<SolutionField> {
    if u.len() != mesh.num_dofs() {
        return Err(Error::Invalid(format!(
            "displacement vector has length {}, expected {}",
            u.len(),
            mesh.num_dofs()
        )));
    }
    let strains = data
        .par_iter()
        .enumerate()
        .map(|(e, d)| {
            let dofs = mesh.element_dofs(e);
            let u_e = DVector::from_iterator(dofs.len(), dofs.iter().map(|&i| u[i]));
            element_strain(&d.projectors, &d.geometry.frame, &u_e)
                .map_err(|source| Error::Element { element: e + 1, source })
        })
        .collect::<Result<Vec<_>>>()?;
    let stresses = strains.iter().map(|s| element_stress(material, s)).collect();
    Ok(SolutionField {
        displacements: u.clone(),
        strains,
        stresses,
    })
}

/// `½ Σ_E u_Eᵀ k_E u_E`.
pub fn strain_energy(mesh: &Mesh, data: &[ElementData], u: &DVector<f64>) -> f64 {
    data.iter()
        .enumerate()
        .map(|(e, d)| {
            let dofs = mesh.element_dofs(e);
            let u_e = DVector::from_iterator(dofs.len(), dofs.iter().map(|&i| u[i]));
            0.5 * u_e.dot(&(&d.stiffness * &u_e))
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeResult {
    pub node: usize,
    pub position: Point2<f64>,
    pub displacement: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub probe: Option<ProbeResult>,
    /// Component-wise maxima of the element stresses `(σx, σy, τxy)`.
    pub max_stress: Vector3<f64>,
    pub min_stress: Vector3<f64>,
    /// Largest `|σx|` over elements.
    pub max_abs_sxx: f64,
    pub max_displacement: f64,
}

impl Metrics {
    /// Flat `key=value` lines.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        if let Some(p) = &self.probe {
            let _ = writeln!(s, "probe_node={}", p.node + 1);
            let _ = writeln!(s, "probe_x={}", p.position.x);
            let _ = writeln!(s, "probe_y={}", p.position.y);
            let _ = writeln!(s, "probe_ux={}", p.displacement[0]);
            let _ = writeln!(s, "probe_uy={}", p.displacement[1]);
        }
        for (i, c) in ["sxx", "syy", "sxy"].iter().enumerate() {
            let _ = writeln!(s, "max_{c}={}", self.max_stress[i]);
            let _ = writeln!(s, "min_{c}={}", self.min_stress[i]);
        }
        let _ = writeln!(s, "max_abs_sxx={}", self.max_abs_sxx);
        let _ = writeln!(s, "max_displacement={}", self.max_displacement);
        s
    }
}

/// Stress extremes and, when `probe` is given, the displacement of the node
/// nearest to it.
pub fn scalar_metrics(field: &SolutionField, mesh: &Mesh, probe: Option<Point2<f64>>) -> Result<Metrics> {
    if mesh.num_elements() == 0 || mesh.num_nodes() == 0 {
        return Err(Error::Invalid("metrics need a non-empty mesh".into()));
    }
    let mut max = Vector3::repeat(f64::NEG_INFINITY);
    let mut min = Vector3::repeat(f64::INFINITY);
    for s in &field.stresses {
        max = max.sup(s);
        min = min.inf(s);
    }
    let probe = probe.and_then(|p| mesh.nearest_node(&p)).map(|n| ProbeResult {
        node: n,
        position: mesh.nodes[n],
        displacement: field.node_displacement(n),
    });
    let max_displacement = (0..mesh.num_nodes())
        .map(|n| {
            let [x, y] = field.node_displacement(n);
            x.hypot(y)
        })
        .fold(0.0, f64::max);
    Ok(Metrics {
        probe,
        max_stress: max,
        min_stress: min,
        max_abs_sxx: max.x.abs().max(min.x.abs()),
        max_displacement,
    })
}

/// Tip deflection `P L³ / (3 E I)` of an end-loaded cantilever.
pub fn beam_theory_tip(p: f64, l: f64, e: f64, i: f64) -> f64 {
    p * l.powi(3) / (3.0 * e * i)
}

/// Bending stress `M c / I` at the support of an end-loaded cantilever of
/// rectangular section `thickness × depth`.
pub fn beam_theory_max_stress(p: f64, l: f64, depth: f64, thickness: f64) -> f64 {
    let i = thickness * depth.powi(3) / 12.0;
    p * l * 0.5 * depth / i
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    VtkLegacy,
    Csv,
}

/// Writes `solution.vtk`, or `elements.csv` and `nodes.csv`, into `dir`.
pub fn export(field: &SolutionField, mesh: &Mesh, format: ExportFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    if mesh.num_elements() == 0 {
        return Err(Error::Invalid("nothing to export: mesh has no elements".into()));
    }
    let write = |name: &str, text: String| -> Result<PathBuf> {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    };
    match format {
        ExportFormat::VtkLegacy => Ok(vec![write("solution.vtk", vtk_string(field, mesh))?]),
        ExportFormat::Csv => Ok(vec![
            write("elements.csv", elements_csv(field, mesh))?,
            write("nodes.csv", nodes_csv(field, mesh))?,
        ]),
    }
}

pub fn vtk_string(field: &SolutionField, mesh: &Mesh) -> String {
    let mut s = String::new();
    let n = mesh.num_nodes();
    let m = mesh.num_elements();
    s.push_str("# vtk DataFile Version 3.0\nvem2d solution\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {n} double");
    for p in &mesh.nodes {
        let _ = writeln!(s, "{} {} 0", p.x, p.y);
    }
    let size: usize = mesh.elements.iter().map(|e| e.len() + 1).sum();
    let _ = writeln!(s, "CELLS {m} {size}");
    for e in &mesh.elements {
        let _ = write!(s, "{}", e.len());
        for id in e {
            let _ = write!(s, " {id}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "CELL_TYPES {m}");
    for _ in 0..m {
        s.push_str("7\n");
    }
    let _ = writeln!(s, "POINT_DATA {n}");
    s.push_str("VECTORS displacement double\n");
    for i in 0..n {
        let [x, y] = field.node_displacement(i);
        let _ = writeln!(s, "{x} {y} 0");
    }
    let _ = writeln!(s, "CELL_DATA {m}");
    let tensor = |s: &mut String, name: &str, v: &[Vector3<f64>], shear: f64| {
        let _ = writeln!(s, "TENSORS {name} double");
        for t in v {
            let xy = shear * t.z;
            let _ = writeln!(s, "{} {} 0\n{} {} 0\n0 0 0", t.x, xy, xy, t.y);
        }
    };
    tensor(&mut s, "stress", &field.stresses, 1.0);
    // tensor strain carries half the engineering shear
    tensor(&mut s, "strain", &field.strains, 0.5);
    for (i, name) in ["stress_xx", "stress_yy", "stress_xy"].iter().enumerate() {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for t in &field.stresses {
            let _ = writeln!(s, "{}", t[i]);
        }
    }
    s
}

pub const ELEMENT_CSV_HEADER: &str =
    "element,centroid_x,centroid_y,area,strain_xx,strain_yy,strain_xy,stress_xx,stress_yy,stress_xy";
pub const NODE_CSV_HEADER: &str = "node,x,y,ux,uy";

pub fn elements_csv(field: &SolutionField, mesh: &Mesh) -> String {
    let mut s = String::new();
    s.push_str(ELEMENT_CSV_HEADER);
    s.push('\n');
    for e in 0..mesh.num_elements() {
        let (c, a) = match mesh.element_polygon(e) {
            Ok(p) => (p.centroid(), p.area()),
            Err(_) => (Point2::new(f64::NAN, f64::NAN), f64::NAN),
        };
        let (eps, sig) = (&field.strains[e], &field.stresses[e]);
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            e + 1,
            c.x,
            c.y,
            a,
            eps.x,
            eps.y,
            eps.z,
            sig.x,
            sig.y,
            sig.z
        );
    }
    s
}

pub fn nodes_csv(field: &SolutionField, mesh: &Mesh) -> String {
    let mut s = String::new();
    s.push_str(NODE_CSV_HEADER);
    s.push('\n');
    for (i, p) in mesh.nodes.iter().enumerate() {
        let [ux, uy] = field.node_displacement(i);
        let _ = writeln!(s, "{},{},{},{},{}", i + 1, p.x, p.y, ux, uy);
    }
    s
}

/// One parsed row of an elements CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementRow {
    pub element: usize,
    pub centroid: Point2<f64>,
    pub area: f64,
    pub strain: Vector3<f64>,
    pub stress: Vector3<f64>,
}

pub fn parse_elements_csv(text: &str) -> Result<Vec<ElementRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(ELEMENT_CSV_HEADER) {
        return Err(Error::Invalid("elements CSV: unexpected header".into()));
    }
    lines
        .enumerate()
        .map(|(i, l)| {
            let bad = || Error::Invalid(format!("elements CSV row {}: malformed", i + 1));
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 10 {
                return Err(bad());
            }
            let element = f[0].parse().map_err(|_| bad())?;
            let v = f[1..]
                .iter()
                .map(|t| t.parse::<f64>().map_err(|_| bad()))
                .collect::<Result<Vec<_>>>()?;
            Ok(ElementRow {
                element,
                centroid: Point2::new(v[0], v[1]),
                area: v[2],
                strain: Vector3::new(v[3], v[4], v[5]),
                stress: Vector3::new(v[6], v[7], v[8]),
            })
        })
        .collect()
}
