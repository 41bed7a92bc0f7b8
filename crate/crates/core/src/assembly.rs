//! Global assembly, constraint elimination and the sparse solve.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use sprs::{CsMat, TriMat};
use sprs_ldl::Ldl;
use thiserror::Error;

use crate::element::{element_stiffness, ElementError, ElementGeometry, Formulation, ProjectorSet};
use crate::mesh::Mesh;
use crate::{Error, Result};

/// Default relative residual tolerance for the reduced solve.
pub const SOLVER_TOLERANCE: f64 = 1e-10;

/// An LDLᵀ pivot below this fraction of the largest diagonal entry of the
/// reduced matrix marks it as singular.
const PIVOT_TOLERANCE: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(
        "singular reduced stiffness (pivot {pivot:e} at free dof {dof}): insufficient restraints or disconnected mesh"
    )]
    Singular { dof: usize, pivot: f64 },
    #[error("iterative solver did not converge: relative residual {residual:e} after {iterations} iterations")]
    NotConverged { residual: f64, iterations: usize },
    #[error("vector has length {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
}

/// Point loads and prescribed displacements, keyed by 0-based node and
/// global dof (`2 node + component`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadCase {
    pub point_loads: BTreeMap<usize, [f64; 2]>,
    pub dirichlet: BTreeMap<usize, f64>,
}

impl LoadCase {
    pub fn add_load(&mut self, node: usize, fx: f64, fy: f64) {
        let f = self.point_loads.entry(node).or_insert([0.0; 2]);
        f[0] += fx;
        f[1] += fy;
    }

    /// `component` is 0 for x, 1 for y. Overrides any earlier value.
    pub fn constrain(&mut self, node: usize, component: usize, value: f64) {
        assert!(component < 2);
        self.dirichlet.insert(2 * node + component, value);
    }

    pub fn fix(&mut self, node: usize) {
        self.constrain(node, 0, 0.0);
        self.constrain(node, 1, 0.0);
    }

    pub fn constrained_dofs(&self) -> Vec<usize> {
        self.dirichlet.keys().copied().collect()
    }

    pub fn check(&self, num_nodes: usize) -> Result<()> {
        if let Some(&n) = self.point_loads.keys().find(|&&n| n >= num_nodes) {
            return Err(Error::Invalid(format!("load on unknown node {}", n + 1)));
        }
        if let Some(&d) = self.dirichlet.keys().find(|&&d| d >= 2 * num_nodes) {
            return Err(Error::Invalid(format!("constraint on unknown node {}", d / 2 + 1)));
        }
        for (&n, f) in &self.point_loads {
            for (c, &v) in f.iter().enumerate() {
                if v != 0.0 && self.dirichlet.contains_key(&(2 * n + c)) {
                    return Err(Error::Invalid(format!(
                        "node {} dof {} is both loaded and constrained",
                        n + 1,
                        ["ux", "uy"][c]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Element stiffness with the data it was derived from.
#[derive(Debug, Clone)]
pub struct ElementData {
    pub geometry: ElementGeometry,
    pub stiffness: DMatrix<f64>,
    pub projectors: ProjectorSet,
}

/// Evaluates every element in parallel; results keep element order.
pub fn element_data(mesh: &Mesh, formulation: &Formulation) -> Result<Vec<ElementData>> {
    (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let wrap = |source: ElementError| Error::Element {
                element: e + 1,
                source,
            };
            let polygon = mesh.element_polygon(e).map_err(|g| wrap(g.into()))?;
            let geometry = ElementGeometry::new(polygon);
            let (stiffness, projectors) = element_stiffness(&geometry, formulation).map_err(wrap)?;
            Ok(ElementData {
                geometry,
                stiffness,
                projectors,
            })
        })
        .collect()
}

/// Assembled stiffness, load vector and prescribed dofs.
#[derive(Debug, Clone)]
pub struct GlobalSystem {
    /// Full symmetric storage, CSR.
    pub k: CsMat<f64>,
    pub f: DVector<f64>,
    pub constraints: BTreeMap<usize, f64>,
}

impl GlobalSystem {
    pub fn num_dofs(&self) -> usize {
        self.f.len()
    }

    /// Support reactions `K u − F` restricted to the constrained dofs (zero
    /// elsewhere).
    pub fn reactions(&self, u: &DVector<f64>) -> DVector<f64> {
        let r = spmv(&self.k, u) - &self.f;
        DVector::from_fn(r.len(), |i, _| {
            if self.constraints.contains_key(&i) {
                r[i]
            } else {
                0.0
            }
        })
    }
}

/// Scatters element matrices in element order into a CSR matrix.
pub fn scatter(mesh: &Mesh, elements: &[ElementData]) -> CsMat<f64> {
    let n = mesh.num_dofs();
    let nnz: usize = elements.iter().map(|e| e.stiffness.len()).sum();
    let mut tri = TriMat::with_capacity((n, n), nnz);
    for (e, data) in elements.iter().enumerate() {
        let dofs = mesh.element_dofs(e);
        for (a, &i) in dofs.iter().enumerate() {
            for (b, &j) in dofs.iter().enumerate() {
                tri.add_triplet(i, j, data.stiffness[(a, b)]);
            }
        }
    }
    tri.to_csr()
}

pub fn assemble_stiffness(mesh: &Mesh, formulation: &Formulation) -> Result<CsMat<f64>> {
    Ok(scatter(mesh, &element_data(mesh, formulation)?))
}

pub fn assemble_loads(mesh: &Mesh, loads: &LoadCase) -> Result<DVector<f64>> {
    loads.check(mesh.num_nodes())?;
    let mut f = DVector::zeros(mesh.num_dofs());
    for (&n, v) in &loads.point_loads {
        f[2 * n] += v[0];
        f[2 * n + 1] += v[1];
    }
    Ok(f)
}

pub fn assemble(mesh: &Mesh, formulation: &Formulation, loads: &LoadCase) -> Result<GlobalSystem> {
    Ok(GlobalSystem {
        k: assemble_stiffness(mesh, formulation)?,
        f: assemble_loads(mesh, loads)?,
        constraints: loads.dirichlet.clone(),
    })
}

pub fn spmv(k: &CsMat<f64>, u: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(k.rows());
    for (i, row) in k.outer_iterator().enumerate() {
        out[i] = row.iter().map(|(j, v)| v * u[j]).sum();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative residual `‖K_red u − F_red‖ / ‖F_red‖` to reach.
    pub tolerance: f64,
    /// Above this many free dofs the conjugate gradient solver is used
    /// directly.
    pub direct_limit: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: SOLVER_TOLERANCE,
            direct_limit: 200_000,
        }
    }
}

/// Solver diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub free_dofs: usize,
    pub relative_residual: f64,
    pub cg_iterations: usize,
}

pub fn solve(system: &GlobalSystem) -> Result<DVector<f64>, SolveError> {
    solve_with(system, &SolverOptions::default()).map(|(u, _)| u)
}

/// Eliminates constrained dofs and solves the reduced system.
pub fn solve_with(
    system: &GlobalSystem,
    options: &SolverOptions,
) -> Result<(DVector<f64>, SolveReport), SolveError> {
    let n = system.num_dofs();
    let mut u = DVector::zeros(n);
    let mut reduced = vec![usize::MAX; n];
    let mut free = Vec::new();
    for i in 0..n {
        match system.constraints.get(&i) {
            Some(&v) => u[i] = v,
            None => {
                reduced[i] = free.len();
                free.push(i);
            }
        }
    }
    let m = free.len();
    let mut report = SolveReport {
        free_dofs: m,
        relative_residual: 0.0,
        cg_iterations: 0,
    };
    if m == 0 {
        return Ok((u, report));
    }

    let mut f_red = DVector::from_iterator(m, free.iter().map(|&i| system.f[i]));
    let mut tri = TriMat::new((m, m));
    for (ri, &i) in free.iter().enumerate() {
        let row = system.k.outer_view(i).expect("row in range");
        for (j, &v) in row.iter() {
            if reduced[j] != usize::MAX {
                tri.add_triplet(ri, reduced[j], v);
            } else {
                f_red[ri] -= v * u[j];
            }
        }
    }
    let k_red: CsMat<f64> = tri.to_csr();
    let f_norm = f_red.norm();
    if f_norm == 0.0 {
        // the reduced matrix must still be checked for singularity
        if m <= options.direct_limit {
            factor(&k_red)?;
        }
        return Ok((u, report));
    }
    let rel = |x: &DVector<f64>| (spmv(&k_red, x) - &f_red).norm() / f_norm;

    let mut x = if m <= options.direct_limit {
        let ldl = factor(&k_red)?;
        let mut x = DVector::from_vec(ldl.solve(f_red.as_slice().to_vec()));
        for _ in 0..2 {
            if rel(&x) <= options.tolerance {
                break;
            }
            let r = &f_red - spmv(&k_red, &x);
            x += DVector::from_vec(ldl.solve(r.as_slice().to_vec()));
        }
        x
    } else {
        DVector::zeros(m)
    };
    report.relative_residual = rel(&x);
    if report.relative_residual > options.tolerance {
        let (its, res) = conjugate_gradient(&k_red, &f_red, &mut x, options.tolerance, 10 * m + 100);
        report.cg_iterations = its;
        report.relative_residual = res;
        if res > options.tolerance {
            return Err(SolveError::NotConverged {
                residual: res,
                iterations: its,
            });
        }
    }
    for (ri, &i) in free.iter().enumerate() {
        u[i] = x[ri];
    }
    Ok((u, report))
}

fn factor(k: &CsMat<f64>) -> Result<sprs_ldl::LdlNumeric<f64, usize>, SolveError> {
    let max_diag = k.diag().iter().fold(0.0_f64, |a, (_, &v)| a.max(v.abs()));
    let singular = |dof, pivot| SolveError::Singular { dof, pivot };
    let ldl = Ldl::new()
        .check_symmetry(sprs::SymmetryCheck::DontCheckSymmetry)
        .numeric(k.view())
        .map_err(|_| singular(0, 0.0))?;
    let threshold = PIVOT_TOLERANCE * max_diag;
    if let Some((i, &p)) = ldl.d().iter().enumerate().find(|(_, &p)| !(p > threshold)) {
        return Err(singular(i, p));
    }
    Ok(ldl)
}

/// Jacobi-preconditioned conjugate gradients from the initial guess `x`.
/// Returns the iteration count and final relative residual.
pub fn conjugate_gradient(
    k: &CsMat<f64>,
    f: &DVector<f64>,
    x: &mut DVector<f64>,
    tolerance: f64,
    max_iterations: usize,
) -> (usize, f64) {
    let f_norm = f.norm();
    if f_norm == 0.0 {
        x.fill(0.0);
        return (0, 0.0);
    }
    let inv_diag = DVector::from_fn(k.rows(), |i, _| match k.get(i, i) {
        Some(&d) if d > 0.0 => 1.0 / d,
        _ => 1.0,
    });
    let mut r = f - spmv(k, x);
    let mut z = r.component_mul(&inv_diag);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    for it in 0..max_iterations {
        let res = r.norm() / f_norm;
        if res <= tolerance {
            return (it, res);
        }
        let kp = spmv(k, &p);
        let pkp = p.dot(&kp);
        if !(pkp > 0.0) {
            return (it, res);
        }
        let alpha = rz / pkp;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &kp, 1.0);
        z = r.component_mul(&inv_diag);
        let rz_new = r.dot(&z);
        p = &z + (rz_new / rz) * &p;
        rz = rz_new;
    }
    (max_iterations, r.norm() / f_norm)
}

/// `F_int = Σ scatter(k_E u_E)`.
pub fn global_internal_force(
    mesh: &Mesh,
    formulation: &Formulation,
    u: &DVector<f64>,
) -> Result<DVector<f64>> {
    if u.len() != mesh.num_dofs() {
        return Err(SolveError::Dimension {
            expected: mesh.num_dofs(),
            got: u.len(),
        }
        .into());
    }
    let data = element_data(mesh, formulation)?;
    Ok(internal_force_from(mesh, &data, u))
}

pub fn internal_force_from(mesh: &Mesh, data: &[ElementData], u: &DVector<f64>) -> DVector<f64> {
    let mut f = DVector::zeros(mesh.num_dofs());
    for (e, d) in data.iter().enumerate() {
        let dofs = mesh.element_dofs(e);
        let u_e = DVector::from_iterator(dofs.len(), dofs.iter().map(|&i| u[i]));
        let q = &d.stiffness * u_e;
        for (a, &i) in dofs.iter().enumerate() {
            f[i] += q[a];
        }
    }
    f
}
