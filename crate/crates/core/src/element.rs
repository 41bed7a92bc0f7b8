//! Element-level virtual element machinery for k = 1.
//!
//! For a polygon with `n_v` vertices the element carries `2 n_v` degrees of
//! freedom, interleaved per vertex as `(u1x, u1y, u2x, u2y, ...)` in CCW
//! vertex order. The matrices built here are
//!
//! | symbol | shape        | meaning                                             |
//! |--------|--------------|-----------------------------------------------------|
//! | `D`    | 2n_v × 6     | basis functions evaluated at the vertex dofs        |
//! | `B̃`    | 6 × 2n_v     | `a_E(p_α, φ_i)` by boundary quadrature              |
//! | `B̆`    | 3 × 2n_v     | vertex-average rows fixing the rigid modes          |
//! | `B̄`    | 6 × 2n_v     | `B̃` with rows 1–3 replaced by `B̆`                   |
//! | `G`    | 6 × 6        | `B̄ D`                                               |
//! | `G̃`    | 6 × 6        | `G` with rows 1–3 zeroed, i.e. `a_E(p_α, p_β)`      |
//! | `Π̃`    | 6 × 2n_v     | `G⁻¹ B̄`, the energy projector in the monomial basis |
//! | `Π`    | 2n_v × 2n_v  | `D Π̃`, the same projector in the dof basis          |
//!
//! The stiffness is `k_E = t (Π̃ᵀ G̃ Π̃ + k_s)` where the stability part
//! `k_s` acts only on `(I - Π)`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Matrix6, Vector2, Vector3};
use thiserror::Error;

use crate::geometry::{Edge, GeometryError, Polygon};
use crate::material::Material;
use crate::polybasis::{ScaledFrame, N_K, N_RIGID};

/// Largest accepted condition number of the row-equilibrated `G`.
pub const MAX_G_CONDITION: f64 = 1e12;

/// Relative tolerance of the `--verify` cross-checks.
pub const VERIFY_TOLERANCE: f64 = 1e-9;

pub type ElementDofVector = DVector<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ElementError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("projection matrix G is singular or ill-conditioned (condition estimate {0:e})")]
    IllConditioned(f64),
    #[error("element dof vector has length {got}, expected {expected}")]
    DofLength { expected: usize, got: usize },
    #[error("verification failed: {what} differs by {error:e} (relative)")]
    Verification { what: &'static str, error: f64 },
}

/// Stabilization term added to the consistency stiffness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stabilization {
    /// `τ tr(k_c) (I - Π)ᵀ (I - Π)`.
    TraceScaled { tau: f64 },
    /// `τ tr(k_c) / (2 n_v) (I - Π)ᵀ (I - Π)`: the trace scaling averaged
    /// over the element dofs.
    DofAveragedTrace { tau: f64 },
    /// `(I - Π)ᵀ S (I - Π)` with diagonal `S_ii = max(α₀ tr(C) / 3, (k_c)_ii)`.
    DiagonalMax { alpha0: f64 },
}

impl Default for Stabilization {
    fn default() -> Self {
        Stabilization::DofAveragedTrace { tau: 0.5 }
    }
}

impl fmt::Display for Stabilization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stabilization::TraceScaled { tau } => write!(f, "trace:{tau}"),
            Stabilization::DofAveragedTrace { tau } => write!(f, "dof-trace:{tau}"),
            Stabilization::DiagonalMax { alpha0 } => write!(f, "diag:{alpha0}"),
        }
    }
}

impl FromStr for Stabilization {
    type Err = String;

    /// Parses `trace:τ`, `dof-trace:τ` or `diag:α₀`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, value) = s
            .split_once(':')
            .ok_or_else(|| format!("expected KIND:VALUE, got '{s}'"))?;
        let value: f64 = value
            .parse()
            .map_err(|_| format!("invalid stabilization parameter '{value}'"))?;
        if !(value.is_finite() && value > 0.0) {
            return Err(format!("stabilization parameter must be positive, got {value}"));
        }
        match kind {
            "trace" => Ok(Stabilization::TraceScaled { tau: value }),
            "dof-trace" => Ok(Stabilization::DofAveragedTrace { tau: value }),
            "diag" => Ok(Stabilization::DiagonalMax { alpha0: value }),
            _ => Err(format!("unknown stabilization '{kind}' (trace, dof-trace or diag)")),
        }
    }
}

/// Everything needed to turn a polygon into an element stiffness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Formulation {
    pub material: Material,
    pub thickness: f64,
    pub stabilization: Stabilization,
    /// Cross-check `B̃ D` against direct vertex quadrature of `G̃` and the
    /// projector identities on every element.
    pub verify: bool,
}

impl Formulation {
    pub fn new(material: Material) -> Self {
        Self {
            material,
            thickness: 1.0,
            stabilization: Stabilization::default(),
            verify: false,
        }
    }

    pub fn with_thickness(mut self, thickness: f64) -> Self {
        self.thickness = thickness;
        self
    }

    pub fn with_stabilization(mut self, stabilization: Stabilization) -> Self {
        self.stabilization = stabilization;
        self
    }

    pub fn with_verify(mut self, verify: bool) -> Self {
        self.verify = verify;
        self
    }
}

/// A polygon together with its scaled frame and edge data.
#[derive(Debug, Clone)]
pub struct ElementGeometry {
    pub polygon: Polygon,
    pub frame: ScaledFrame,
    pub edges: Vec<Edge>,
}

impl ElementGeometry {
    pub fn new(polygon: Polygon) -> Self {
        let frame = ScaledFrame::of_polygon(&polygon);
        let edges = polygon.edges();
        Self {
            polygon,
            frame,
            edges,
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.polygon.num_vertices()
    }

    pub fn num_dofs(&self) -> usize {
        2 * self.polygon.num_vertices()
    }

    /// Trapezoidal weight vector at vertex `j`: half of each adjacent edge's
    /// length times its outward normal.
    fn vertex_normal_weight(&self, j: usize) -> Vector2<f64> {
        let n = self.edges.len();
        let prev = &self.edges[(j + n - 1) % n];
        let next = &self.edges[j];
        0.5 * prev.length * prev.normal + 0.5 * next.length * next.normal
    }
}

/// Per-element projector matrices.
#[derive(Debug, Clone)]
pub struct ProjectorSet {
    pub d: DMatrix<f64>,
    pub b_tilde: DMatrix<f64>,
    pub b_bar: DMatrix<f64>,
    pub g_tilde: Matrix6<f64>,
    pub g: Matrix6<f64>,
    pub pi_tilde: DMatrix<f64>,
    pub pi: DMatrix<f64>,
}

impl ProjectorSet {
    pub fn build(geom: &ElementGeometry, c: &Matrix3<f64>) -> Result<Self, ElementError> {
        let d = compute_d(geom);
        let b_tilde = compute_b_tilde(geom, c);
        let b_breve = compute_b_breve(&d);
        let b_bar = compute_b_bar(&b_tilde, &b_breve);
        let g = compute_g(&b_bar, &d);
        let g_tilde = compute_g_tilde(&g);
        let pi_tilde = compute_pi_tilde(&g, &b_bar)?;
        let pi = compute_pi(&d, &pi_tilde);
        Ok(Self {
            d,
            b_tilde,
            b_bar,
            g_tilde,
            g,
            pi_tilde,
            pi,
        })
    }

    pub fn num_dofs(&self) -> usize {
        self.d.nrows()
    }
}

/// `D_{iα} = dof_i(p_α)`; rows `2j` and `2j + 1` hold the x and y
/// components of the basis at vertex `j`.
pub fn compute_d(geom: &ElementGeometry) -> DMatrix<f64> {
    let n = geom.num_vertices();
    let mut d = DMatrix::zeros(2 * n, N_K);
    for (j, v) in geom.polygon.vertices().iter().enumerate() {
        let p = geom.frame.eval_basis(v);
        d.fixed_view_mut::<2, N_K>(2 * j, 0).copy_from(&p);
    }
    d
}

/// Stress tensor `[[σx, σxy], [σxy, σy]]` of each basis function.
fn basis_stress_tensors(frame: &ScaledFrame, c: &Matrix3<f64>) -> [Matrix2<f64>; N_K] {
    let strains = frame.basis_strains();
    std::array::from_fn(|a| {
        let s = c * strains.column(a);
        Matrix2::new(s[0], s[2], s[2], s[1])
    })
}

/// `B̃_{αi} = ∫_∂E φ_i · σ(p_α) n`, evaluated with the vertex rule, which is
/// exact because `φ_i` is linear on every edge and `σ(p_α)` is constant.
/// Rows 1–3 are zero.
pub fn compute_b_tilde(geom: &ElementGeometry, c: &Matrix3<f64>) -> DMatrix<f64> {
    let n = geom.num_vertices();
    let stresses = basis_stress_tensors(&geom.frame, c);
    let mut b = DMatrix::zeros(N_K, 2 * n);
    for j in 0..n {
        let w = geom.vertex_normal_weight(j);
        for (a, sigma) in stresses.iter().enumerate().skip(N_RIGID) {
            let t = sigma * w;
            b[(a, 2 * j)] = t.x;
            b[(a, 2 * j + 1)] = t.y;
        }
    }
    b
}

/// `B̆_{αI} = D_{Iα} / n_v` for the three rigid modes.
pub fn compute_b_breve(d: &DMatrix<f64>) -> DMatrix<f64> {
    let n_v = (d.nrows() / 2) as f64;
    d.columns(0, N_RIGID).transpose() / n_v
}

/// Rows 1–3 from `B̆`, rows 4–6 from `B̃`.
pub fn compute_b_bar(b_tilde: &DMatrix<f64>, b_breve: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(b_tilde.ncols(), b_breve.ncols());
    let mut b = b_tilde.clone();
    b.rows_mut(0, N_RIGID).copy_from(b_breve);
    b
}

pub fn compute_g(b_bar: &DMatrix<f64>, d: &DMatrix<f64>) -> Matrix6<f64> {
    let g = b_bar * d;
    Matrix6::from_fn(|r, c| g[(r, c)])
}

pub fn compute_g_tilde(g: &Matrix6<f64>) -> Matrix6<f64> {
    let mut gt = *g;
    gt.fixed_rows_mut::<N_RIGID>(0).fill(0.0);
    gt
}

/// Condition number of `G` after scaling each row to unit max-norm.
pub fn g_condition_estimate(g: &Matrix6<f64>) -> f64 {
    let mut scaled = *g;
    for mut row in scaled.row_iter_mut() {
        let m = row.amax();
        if m > 0.0 {
            row /= m;
        }
    }
    let sv = scaled.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    }
}

/// Solves `G Π̃ = B̄` column by column through an LU factorization.
pub fn compute_pi_tilde(g: &Matrix6<f64>, b_bar: &DMatrix<f64>) -> Result<DMatrix<f64>, ElementError> {
    let cond = g_condition_estimate(g);
    if !(cond <= MAX_G_CONDITION) {
        return Err(ElementError::IllConditioned(cond));
    }
    let lu = DMatrix::from_column_slice(N_K, N_K, g.as_slice()).lu();
    lu.solve(b_bar).ok_or(ElementError::IllConditioned(f64::INFINITY))
}

pub fn compute_pi(d: &DMatrix<f64>, pi_tilde: &DMatrix<f64>) -> DMatrix<f64> {
    d * pi_tilde
}

/// `k_c = Π̃ᵀ G̃ Π̃`.
pub fn stiffness_consistency(pi_tilde: &DMatrix<f64>, g_tilde: &Matrix6<f64>) -> DMatrix<f64> {
    let gt = DMatrix::from_column_slice(N_K, N_K, g_tilde.as_slice());
    pi_tilde.transpose() * gt * pi_tilde
}

pub fn stiffness_stability(
    pi: &DMatrix<f64>,
    k_c: &DMatrix<f64>,
    c: &Matrix3<f64>,
    variant: Stabilization,
) -> DMatrix<f64> {
    let n = pi.nrows();
    let i_minus_pi = DMatrix::identity(n, n) - pi;
    match variant {
        Stabilization::TraceScaled { tau } => {
            tau * k_c.trace() * i_minus_pi.transpose() * &i_minus_pi
        }
        Stabilization::DofAveragedTrace { tau } => {
            tau * k_c.trace() / n as f64 * i_minus_pi.transpose() * &i_minus_pi
        }
        Stabilization::DiagonalMax { alpha0 } => {
            let floor = alpha0 * c.trace() / 3.0;
            let s = DVector::from_iterator(n, k_c.diagonal().iter().map(|&k| k.max(floor)));
            let scaled = DMatrix::from_diagonal(&s) * &i_minus_pi;
            i_minus_pi.transpose() * scaled
        }
    }
}

/// `k_E = t (k_c + k_s)` together with the projectors it was built from.
pub fn element_stiffness(
    geom: &ElementGeometry,
    formulation: &Formulation,
) -> Result<(DMatrix<f64>, ProjectorSet), ElementError> {
    let c = formulation.material.moduli_matrix();
    let proj = ProjectorSet::build(geom, &c)?;
    if formulation.verify {
        verify_projectors(geom, &c, &proj)?;
    }
    let k_c = stiffness_consistency(&proj.pi_tilde, &proj.g_tilde);
    let k_s = stiffness_stability(&proj.pi, &k_c, &c, formulation.stabilization);
    let k = (k_c + k_s) * formulation.thickness;
    // exact symmetry keeps the assembled matrix symmetric bit for bit
    let k = (&k + k.transpose()) * 0.5;
    Ok((k, proj))
}

/// `G̃_{αβ}` by direct vertex quadrature of `∫_∂E p_β · σ(p_α) n`.
pub fn g_tilde_by_quadrature(geom: &ElementGeometry, c: &Matrix3<f64>) -> Matrix6<f64> {
    let stresses = basis_stress_tensors(&geom.frame, c);
    let mut g = Matrix6::zeros();
    for (j, v) in geom.polygon.vertices().iter().enumerate() {
        let w = geom.vertex_normal_weight(j);
        let p = geom.frame.eval_basis(v);
        for (a, sigma) in stresses.iter().enumerate().skip(N_RIGID) {
            let t = sigma * w;
            for b in 0..N_K {
                g[(a, b)] += p.column(b).dot(&t);
            }
        }
    }
    g
}

fn relative_difference(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = a.amax().max(b.amax()).max(f64::MIN_POSITIVE);
    (a - b).amax() / scale
}

/// Checks `G̃ = B̃ D` against vertex quadrature, `Π̃ D = I` and `Π² = Π`.
pub fn verify_projectors(
    geom: &ElementGeometry,
    c: &Matrix3<f64>,
    proj: &ProjectorSet,
) -> Result<(), ElementError> {
    let direct = g_tilde_by_quadrature(geom, c);
    let via_b = &proj.b_tilde * &proj.d;
    let direct = DMatrix::from_column_slice(N_K, N_K, direct.as_slice());
    let err = relative_difference(&direct, &via_b);
    if err > VERIFY_TOLERANCE {
        return Err(ElementError::Verification {
            what: "G̃ (quadrature vs B̃D)",
            error: err,
        });
    }
    let err = (&proj.pi_tilde * &proj.d - DMatrix::<f64>::identity(N_K, N_K)).amax();
    if err > VERIFY_TOLERANCE {
        return Err(ElementError::Verification {
            what: "Π̃D vs identity",
            error: err,
        });
    }
    let err = (&proj.pi * &proj.pi - &proj.pi).amax();
    if err > VERIFY_TOLERANCE {
        return Err(ElementError::Verification {
            what: "Π² vs Π",
            error: err,
        });
    }
    Ok(())
}

/// Constant Voigt strain of the projected displacement, `ε[P1] Π̃ u_E`.
pub fn element_strain(
    proj: &ProjectorSet,
    frame: &ScaledFrame,
    u_e: &ElementDofVector,
) -> Result<Vector3<f64>, ElementError> {
    if u_e.len() != proj.num_dofs() {
        return Err(ElementError::DofLength {
            expected: proj.num_dofs(),
            got: u_e.len(),
        });
    }
    let coeffs = &proj.pi_tilde * u_e;
    Ok(frame.basis_strains() * coeffs.fixed_rows::<N_K>(0))
}

pub fn element_stress(material: &Material, strain: &Vector3<f64>) -> Vector3<f64> {
    material.moduli_matrix() * strain
}

/// `q = k_E u_E`.
pub fn internal_force(k_e: &DMatrix<f64>, u_e: &ElementDofVector) -> ElementDofVector {
    k_e * u_e
}

/// Dof vectors of the three rigid-body modes (columns 1–3 of `D`).
pub fn rigid_modes(proj: &ProjectorSet) -> DMatrix<f64> {
    proj.d.columns(0, N_RIGID).into_owned()
}
