//! Isotropic linear elastic material in plane stress or plane strain.

use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix3;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MaterialError {
    #[error("Young's modulus must be positive and finite, got {0}")]
    YoungsModulus(f64),
    #[error("Poisson's ratio must lie in (-1, 0.5), got {0}")]
    PoissonRatio(f64),
    #[error("unknown plane mode '{0}' (expected plane_stress or plane_strain)")]
    PlaneMode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlaneMode {
    PlaneStress,
    PlaneStrain,
}

impl fmt::Display for PlaneMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlaneMode::PlaneStress => "plane_stress",
            PlaneMode::PlaneStrain => "plane_strain",
        })
    }
}

impl FromStr for PlaneMode {
    type Err = MaterialError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plane_stress" => Ok(PlaneMode::PlaneStress),
            "plane_strain" => Ok(PlaneMode::PlaneStrain),
            other => Err(MaterialError::PlaneMode(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    youngs_modulus: f64,
    poisson_ratio: f64,
    plane_mode: PlaneMode,
}

impl Material {
    pub fn new(
        youngs_modulus: f64,
        poisson_ratio: f64,
        plane_mode: PlaneMode,
    ) -> Result<Self, MaterialError> {
        if !(youngs_modulus.is_finite() && youngs_modulus > 0.0) {
            return Err(MaterialError::YoungsModulus(youngs_modulus));
        }
        if !(poisson_ratio > -1.0 && poisson_ratio < 0.5) {
            return Err(MaterialError::PoissonRatio(poisson_ratio));
        }
        Ok(Self {
            youngs_modulus,
            poisson_ratio,
            plane_mode,
        })
    }

    pub fn youngs_modulus(&self) -> f64 {
        self.youngs_modulus
    }

    pub fn poisson_ratio(&self) -> f64 {
        self.poisson_ratio
    }

    pub fn plane_mode(&self) -> PlaneMode {
        self.plane_mode
    }

    /// Voigt moduli `C` mapping `(εx, εy, γxy)` to `(σx, σy, σxy)`, with
    /// engineering shear strain.
    pub fn moduli_matrix(&self) -> Matrix3<f64> {
        let (e, nu) = (self.youngs_modulus, self.poisson_ratio);
        match self.plane_mode {
            PlaneMode::PlaneStress => {
                let f = e / (1.0 - nu * nu);
                Matrix3::new(
                    f,
                    f * nu,
                    0.0,
                    f * nu,
                    f,
                    0.0,
                    0.0,
                    0.0,
                    f * 0.5 * (1.0 - nu),
                )
            }
            PlaneMode::PlaneStrain => {
                let f = e / ((1.0 + nu) * (1.0 - 2.0 * nu));
                Matrix3::new(
                    f * (1.0 - nu),
                    f * nu,
                    0.0,
                    f * nu,
                    f * (1.0 - nu),
                    0.0,
                    0.0,
                    0.0,
                    f * 0.5 * (1.0 - 2.0 * nu),
                )
            }
        }
    }
}
