//! Finite-difference solver for the Kirchhoff-Love plate equation
//!
//!     rho*H w_tt = -K w + T lap(w) - D lap^2(w) + f
//!
//! on composite overlapping grids (logically rectangular curvilinear
//! components coupled by interpolation), with clamped / simply-supported /
//! free boundary conditions and four second-order time-stepping schemes
//! (explicit central, upwind-style predictor-corrector, Adams
//! predictor-corrector, and implicit Newmark-beta), each stabilized against
//! the weak interpolation-boundary instability by a fourth-difference
//! hyper-dissipation term.
//!
//! The crate also ships the supporting analysis tools: frozen-coefficient
//! symbol / time-step / amplification-root formulas, a 1D two-grid beam
//! eigenvalue diagnostic for the weak instability, and exact solutions
//! (manufactured cosine families and circular-plate Bessel modes) for
//! verification.

pub mod beam1d;
pub mod boundary;
pub mod compgrid;
pub mod discretization;
pub mod driver;
pub mod error;
pub mod exactsol;
pub mod mapping;
pub mod stability;
pub mod stepping;

pub use error::Error;

/// The four time-stepping schemes.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Scheme {
    /// Explicit central differencing of w_tt with lagged dissipation.
    C2,
    /// C2 predictor plus an upwind-style dissipation corrector.
    Upc2,
    /// Adams-Bashforth / Adams-Moulton predictor-corrector on the
    /// first-order (displacement, velocity) system.
    Pc22,
    /// Implicit Newmark-beta (beta=1/4, gamma=1/2) solved for acceleration.
    Nb2,
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "c2" => Ok(Scheme::C2),
            "upc2" => Ok(Scheme::Upc2),
            "pc22" => Ok(Scheme::Pc22),
            "nb2" => Ok(Scheme::Nb2),
            other => Err(Error::Config(format!("unknown scheme '{other}'"))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::C2 => "c2",
            Scheme::Upc2 => "upc2",
            Scheme::Pc22 => "pc22",
            Scheme::Nb2 => "nb2",
        })
    }
}

impl serde::Serialize for Scheme {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> serde::Deserialize<'de> for Scheme {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = <String as serde::Deserialize>::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Physical parameters of the plate model
/// rho*H w_tt = -K w + T lap(w) - D lap^2(w) + f.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlateParams {
    /// Density rho.
    pub rho: f64,
    /// Plate thickness H.
    pub thickness: f64,
    /// Linear spring (elastic foundation) coefficient K.
    pub k_spring: f64,
    /// Membrane tension T.
    pub tension: f64,
    /// Flexural rigidity D.
    pub d_flex: f64,
    /// Poisson ratio (enters moment/shear boundary conditions only).
    pub nu: f64,
}

impl PlateParams {
    /// Build from Young's modulus instead of rigidity:
    /// D = E H^3 / (12 (1 - nu^2)).
    pub fn from_youngs(rho: f64, thickness: f64, youngs: f64, nu: f64, k_spring: f64, tension: f64) -> Self {
        let d_flex = youngs * thickness.powi(3) / (12.0 * (1.0 - nu * nu));
        PlateParams { rho, thickness, k_spring, tension, d_flex, nu }
    }

    /// Areal mass rho*H (the coefficient of w_tt).
    pub fn mass(&self) -> f64 {
        self.rho * self.thickness
    }
}
