//! Scaled monomial basis of `[P1(E)]^2`.
//!
//! With `ξ = (x - x̄) / h` and `η = (y - ȳ) / h` the six vector monomials are
//!
//! ```text
//! p1 = (1, 0)   p2 = (0, 1)   p3 = (-η, ξ)
//! p4 = (η, ξ)   p5 = (ξ, 0)   p6 = (0, η)
//! ```
//!
//! The first three are the infinitesimal rigid-body motions; the order is
//! fixed and every projector matrix is indexed by it.

use nalgebra::{Point2, SMatrix};

use crate::geometry::Polygon;

/// Number of vector monomials for k = 1.
pub const N_K: usize = 6;

/// Number of rigid-body modes among the basis functions.
pub const N_RIGID: usize = 3;

/// Columns are the basis functions evaluated at one point.
pub type BasisEval = SMatrix<f64, 2, N_K>;

/// Columns are the (constant) Voigt strains of the basis functions.
pub type BasisStrains = SMatrix<f64, 3, N_K>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledFrame {
    pub centroid: Point2<f64>,
    pub diameter: f64,
}

impl ScaledFrame {
    pub fn new(centroid: Point2<f64>, diameter: f64) -> Self {
        assert!(diameter > 0.0, "scaled frame needs a positive diameter");
        Self { centroid, diameter }
    }

    pub fn of_polygon(polygon: &Polygon) -> Self {
        Self::new(polygon.centroid(), polygon.diameter())
    }

    pub fn scaled_coords(&self, point: &Point2<f64>) -> (f64, f64) {
        (
            (point.x - self.centroid.x) / self.diameter,
            (point.y - self.centroid.y) / self.diameter,
        )
    }

    pub fn eval_basis(&self, point: &Point2<f64>) -> BasisEval {
        let (xi, eta) = self.scaled_coords(point);
        BasisEval::new(
            1.0, 0.0, -eta, eta, xi, 0.0, //
            0.0, 1.0, xi, xi, 0.0, eta,
        )
    }

    /// `(εx, εy, γxy)` of each basis function; independent of position.
    pub fn basis_strains(&self) -> BasisStrains {
        let s = 1.0 / self.diameter;
        let mut e = BasisStrains::zeros();
        e[(2, 3)] = 2.0 * s;
        e[(0, 4)] = s;
        e[(1, 5)] = s;
        e
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;
    use proptest::prelude::*;

    fn pentagon_frame() -> ScaledFrame {
        ScaledFrame::new(Point2::new(19.0 / 14.0, 38.0 / 21.0), 5.0)
    }

    #[test]
    fn at_centroid_only_translations_survive() {
        let f = pentagon_frame();
        let b = f.eval_basis(&f.centroid);
        let mut expected = BasisEval::zeros();
        expected[(0, 0)] = 1.0;
        expected[(1, 1)] = 1.0;
        assert_eq!(b, expected);
    }

    #[test]
    fn pentagon_vertices() {
        let f = pentagon_frame();
        let (xi, eta) = f.scaled_coords(&Point2::new(0.0, 0.0));
        assert!((xi + 0.2714).abs() < 1e-4 && (eta + 0.3619).abs() < 1e-4);
        let b = f.eval_basis(&Point2::new(0.0, 0.0));
        assert!((b[(0, 2)] - 0.3619).abs() < 1e-4);
        assert!((b[(1, 2)] + 0.2714).abs() < 1e-4);
        let (xi, eta) = f.scaled_coords(&Point2::new(1.5, 4.0));
        assert!((xi - 0.0286).abs() < 1e-4 && (eta - 0.4381).abs() < 1e-4);
    }

    #[test]
    fn strains_of_basis() {
        let e = pentagon_frame().basis_strains();
        for a in 0..N_RIGID {
            assert_eq!(e.column(a).into_owned(), Vector3::zeros());
        }
        assert_eq!(e.column(4).into_owned(), Vector3::new(0.2, 0.0, 0.0));
        assert_eq!(e.column(3).into_owned(), Vector3::new(0.0, 0.0, 0.4));
        assert_eq!(e.column(5).into_owned(), Vector3::new(0.0, 0.2, 0.0));
    }

    proptest! {
        #[test]
        fn strains_scale_inversely_with_diameter(h in 1e-3f64..1e3) {
            let a = ScaledFrame::new(Point2::origin(), h).basis_strains();
            let b = ScaledFrame::new(Point2::origin(), 2.0 * h).basis_strains();
            prop_assert!((a - 2.0 * b).amax() <= 1e-12 * a.amax());
            let zero_cols = (0..N_K).filter(|&c| a.column(c).amax() == 0.0).count();
            prop_assert_eq!(zero_cols, N_RIGID);
        }

        #[test]
        fn points_differ_only_in_linear_columns(
            x1 in -10.0f64..10.0, y1 in -10.0f64..10.0,
            x2 in -10.0f64..10.0, y2 in -10.0f64..10.0,
        ) {
            let f = ScaledFrame::new(Point2::new(0.3, -0.2), 1.7);
            let d = f.eval_basis(&Point2::new(x1, y1)) - f.eval_basis(&Point2::new(x2, y2));
            prop_assert_eq!(d.column(0).amax(), 0.0);
            prop_assert_eq!(d.column(1).amax(), 0.0);
        }

        /// Finite differences of the evaluated basis reproduce the analytic strains.
        #[test]
        fn strains_match_finite_differences(x in -2.0f64..2.0, y in -2.0f64..2.0, h in 0.5f64..3.0) {
            let f = ScaledFrame::new(Point2::new(0.1, 0.4), h);
            let d = 1e-4;
            let dx = (f.eval_basis(&Point2::new(x + d, y)) - f.eval_basis(&Point2::new(x - d, y))) / (2.0 * d);
            let dy = (f.eval_basis(&Point2::new(x, y + d)) - f.eval_basis(&Point2::new(x, y - d))) / (2.0 * d);
            let e = f.basis_strains();
            for a in 0..N_K {
                prop_assert!((e[(0, a)] - dx[(0, a)]).abs() < 1e-9);
                prop_assert!((e[(1, a)] - dy[(1, a)]).abs() < 1e-9);
                prop_assert!((e[(2, a)] - (dy[(0, a)] + dx[(1, a)])).abs() < 1e-9);
            }
        }
    }
}
