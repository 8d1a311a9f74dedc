//! Immutable problem description shared by the engine and the oracles.
//!
//! Units are natural (ℏ = c = 1): lengths and times share one unit, wave
//! numbers carry inverse-time units and the charge coupling `e2` is a bare
//! dimensionless prefactor. Every decoherence factor is dimensionless.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

use crate::oracle::McConfig;
use crate::quadrature::QuadratureConfig;
use crate::trajectories::TrajectorySpec;

/// `e²` in natural (Heaviside–Lorentz) units, `4π α`. Provided for
/// convenience only; it is never applied implicitly.
pub const E2_PHYSICAL: f64 = 4.0 * PI / 137.036;

/// Tolerance on `|j_hat|` before it is renormalized.
pub const DIRECTION_NORM_TOLERANCE: f64 = 1e-6;

/// Speeds above this are rejected; the model is non-relativistic.
pub const MAX_SPEED: f64 = 0.3;
/// Speeds above this are accepted with a warning.
pub const WARN_SPEED: f64 = 0.1;

const ORIENTATION_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn is_zero(self) -> bool {
        self.x == 0.0 && self.y == 0.0 && self.z == 0.0
    }

    /// Unit vector along `self`, or `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0).then(|| self * (1.0 / n))
    }

    /// Norm of the in-plane (x, y) part.
    pub fn in_plane_norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.x, self.y, self.z)
    }
}

/// Mirror image of a position or polar direction in the plate plane `z = 0`.
pub fn reflect_geometric(v: Vec3) -> Vec3 {
    Vec3::new(v.x, v.y, -v.z)
}

/// Image of an electric dipole: in-plane components flip, the normal
/// component is kept.
pub fn reflect_electric_dipole(p: Vec3) -> Vec3 {
    Vec3::new(-p.x, -p.y, p.z)
}

/// Image of a magnetic dipole (a pseudovector): in-plane components are
/// kept, the normal component flips.
pub fn reflect_magnetic_dipole(m: Vec3) -> Vec3 {
    Vec3::new(m.x, m.y, -m.z)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Coupling {
    /// Point charge with coupling `e2 = e²`.
    Charge { e2: f64 },
    /// Neutral particle with constant electric (`p`) and magnetic (`m`)
    /// dipole moments.
    Dipole { p: Vec3, m: Vec3 },
}

impl Coupling {
    pub fn label(&self) -> &'static str {
        match self {
            Coupling::Charge { .. } => "charge",
            Coupling::Dipole { .. } => "dipole",
        }
    }
}

/// Orientation of the trajectory direction relative to the plate (normal ẑ).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Orientation {
    Parallel,
    Perpendicular,
    Oblique,
}

impl Orientation {
    pub fn classify(j_hat: Vec3) -> Orientation {
        let c = j_hat.z.abs();
        if c <= ORIENTATION_EPS {
            Orientation::Parallel
        } else if (1.0 - c).abs() <= ORIENTATION_EPS {
            Orientation::Perpendicular
        } else {
            Orientation::Oblique
        }
    }

    /// Canonical trajectory direction for the two symmetric orientations.
    pub fn canonical_direction(self) -> Option<Vec3> {
        match self {
            Orientation::Parallel => Some(Vec3::X),
            Orientation::Perpendicular => Some(Vec3::Z),
            Orientation::Oblique => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Orientation::Parallel => "parallel",
            Orientation::Perpendicular => "perpendicular",
            Orientation::Oblique => "oblique",
        }
    }

    pub fn is_symmetric(self) -> bool {
        self != Orientation::Oblique
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Orientation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "parallel" => Ok(Orientation::Parallel),
            "perpendicular" => Ok(Orientation::Perpendicular),
            "oblique" => Ok(Orientation::Oblique),
            other => Err(format!("unknown orientation `{other}`")),
        }
    }
}

/// Whether an axis lies in the plate plane or along its normal.
pub(crate) fn axis_is_symmetric(v: Vec3) -> bool {
    let n = v.norm();
    if n == 0.0 {
        return true;
    }
    let c = (v.z / n).abs();
    c <= ORIENTATION_EPS || (1.0 - c).abs() <= ORIENTATION_EPS
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Geometry {
    plate: bool,
    z0: f64,
    j_hat: Vec3,
    orientation: Orientation,
}

impl Geometry {
    pub fn plate(&self) -> bool {
        self.plate
    }

    /// Distance of the trajectory midpoint from the plate.
    pub fn z0(&self) -> f64 {
        self.z0
    }

    pub fn j_hat(&self) -> Vec3 {
        self.j_hat
    }

    pub fn j_reflected(&self) -> Vec3 {
        reflect_geometric(self.j_hat)
    }

    /// `ĵ·ĵ′`: +1 for parallel, −1 for perpendicular trajectories.
    pub fn reflection_overlap(&self) -> f64 {
        self.j_hat.dot(self.j_reflected())
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn center(&self) -> Vec3 {
        Vec3::Z * self.z0
    }
}

/// Numerical method for the engine.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    /// Small-excursion expansion of the source spectra with closed angular
    /// reductions.
    DipoleApprox,
    /// Full (k, u, φ) quadrature of the exact source spectra.
    Full,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::DipoleApprox => "dipole-approx",
            Method::Full => "full",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dipole" | "dipole-approx" => Ok(Method::DipoleApprox),
            "full" => Ok(Method::Full),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

/// Engine knobs: method selection plus the quadrature configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct NumericsConfig {
    pub method: Method,
    pub quadrature: QuadratureConfig,
    /// Radial cutoff used for ramp-regularized trajectories when no explicit
    /// `k_max` is configured: `k_max = kmax_per_inverse_tau / tau`.
    pub kmax_per_inverse_tau: f64,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        NumericsConfig {
            method: Method::DipoleApprox,
            quadrature: QuadratureConfig::default(),
            kmax_per_inverse_tau: 400.0,
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum Violation {
    #[error("j_hat has norm {norm}, expected 1 within {DIRECTION_NORM_TOLERANCE}")]
    NonUnitDirection { norm: f64 },
    #[error("plate distance z0 = {z0} is negative")]
    NegativeDistance { z0: f64 },
    #[error("no coupling given")]
    MissingCoupling,
    #[error("no trajectory given")]
    MissingTrajectory,
    #[error("charge coupling e2 = {e2} must be positive")]
    NonPositiveCharge { e2: f64 },
    #[error("inconsistent trajectory: {0}")]
    InconsistentTrajectory(String),
    #[error("peak speed {speed} exceeds the non-relativistic limit {MAX_SPEED}")]
    Relativistic { speed: f64 },
    #[error("invalid numerics: {0}")]
    InvalidNumerics(String),
}

#[derive(Clone, Debug, Error, PartialEq)]
pub struct ValidationError {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "invalid scenario: {}", parts.join("; "))
    }
}

/// Unvalidated scenario fields, as produced by a config parser.
#[derive(Clone, Debug, PartialEq)]
pub struct RawScenario {
    pub coupling: Option<Coupling>,
    pub trajectory: Option<TrajectorySpec>,
    pub plate: bool,
    pub z0: f64,
    pub j_hat: Vec3,
    pub numerics: NumericsConfig,
    pub oracle: Option<McConfig>,
}

impl Default for RawScenario {
    fn default() -> Self {
        RawScenario {
            coupling: None,
            trajectory: None,
            plate: false,
            z0: 0.0,
            j_hat: Vec3::X,
            numerics: NumericsConfig::default(),
            oracle: None,
        }
    }
}

impl RawScenario {
    pub fn new(coupling: Coupling, trajectory: TrajectorySpec) -> Self {
        RawScenario {
            coupling: Some(coupling),
            trajectory: Some(trajectory),
            ..Default::default()
        }
    }

    pub fn with_plate(mut self, z0: f64, j_hat: Vec3) -> Self {
        self.plate = true;
        self.z0 = z0;
        self.j_hat = j_hat;
        self
    }

    pub fn with_direction(mut self, j_hat: Vec3) -> Self {
        self.j_hat = j_hat;
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.numerics.method = method;
        self
    }

    pub fn with_numerics(mut self, numerics: NumericsConfig) -> Self {
        self.numerics = numerics;
        self
    }

    pub fn with_oracle(mut self, oracle: McConfig) -> Self {
        self.oracle = Some(oracle);
        self
    }

    pub fn validate(self) -> Result<Scenario, ValidationError> {
        Scenario::validate(self)
    }
}

/// A validated, immutable scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    coupling: Coupling,
    trajectory: TrajectorySpec,
    geometry: Geometry,
    numerics: NumericsConfig,
    oracle: Option<McConfig>,
}

impl Scenario {
    pub fn validate(raw: RawScenario) -> Result<Scenario, ValidationError> {
        let mut violations = Vec::new();

        match raw.coupling {
            None => violations.push(Violation::MissingCoupling),
            Some(Coupling::Charge { e2 }) if !(e2 > 0.0 && e2.is_finite()) => {
                violations.push(Violation::NonPositiveCharge { e2 })
            }
            Some(Coupling::Dipole { p, m })
                if !(p.norm().is_finite() && m.norm().is_finite()) =>
            {
                violations.push(Violation::InconsistentTrajectory(
                    "dipole moments must be finite".into(),
                ))
            }
            _ => {}
        }

        match &raw.trajectory {
            None => violations.push(Violation::MissingTrajectory),
            Some(spec) => {
                if let Err(msg) = spec.check() {
                    violations.push(Violation::InconsistentTrajectory(msg));
                } else {
                    let speed = spec.max_speed();
                    if speed >= MAX_SPEED {
                        violations.push(Violation::Relativistic { speed });
                    } else if speed > WARN_SPEED {
                        log::warn!("peak speed {speed:.3} is only marginally non-relativistic");
                    }
                }
            }
        }

        if raw.z0 < 0.0 || !raw.z0.is_finite() {
            violations.push(Violation::NegativeDistance { z0: raw.z0 });
        }

        let norm = raw.j_hat.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > DIRECTION_NORM_TOLERANCE {
            violations.push(Violation::NonUnitDirection { norm });
        }

        if let Err(msg) = raw.numerics.quadrature.check() {
            violations.push(Violation::InvalidNumerics(msg));
        }
        if !(raw.numerics.kmax_per_inverse_tau > 0.0) {
            violations.push(Violation::InvalidNumerics(
                "kmax_per_inverse_tau must be positive".into(),
            ));
        }
        if let Some(mc) = &raw.oracle {
            if let Err(msg) = mc.check() {
                violations.push(Violation::InvalidNumerics(msg));
            }
        }

        if !violations.is_empty() {
            return Err(ValidationError { violations });
        }

        let j_hat = raw.j_hat * (1.0 / norm);
        Ok(Scenario {
            coupling: raw.coupling.expect("checked above"),
            trajectory: raw.trajectory.expect("checked above"),
            geometry: Geometry {
                plate: raw.plate,
                z0: if raw.plate { raw.z0 } else { 0.0 },
                j_hat,
                orientation: Orientation::classify(j_hat),
            },
            numerics: raw.numerics,
            oracle: raw.oracle,
        })
    }

    pub fn coupling(&self) -> &Coupling {
        &self.coupling
    }

    pub fn trajectory(&self) -> &TrajectorySpec {
        &self.trajectory
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn numerics(&self) -> &NumericsConfig {
        &self.numerics
    }

    pub fn oracle(&self) -> Option<&McConfig> {
        self.oracle.as_ref()
    }

    /// Back to the raw form, for deriving modified scenarios.
    pub fn to_raw(&self) -> RawScenario {
        RawScenario {
            coupling: Some(self.coupling),
            trajectory: Some(self.trajectory.clone()),
            plate: self.geometry.plate,
            z0: self.geometry.z0,
            j_hat: self.geometry.j_hat,
            numerics: self.numerics.clone(),
            oracle: self.oracle.clone(),
        }
    }

    /// Radial cutoff in effect: the configured `k_max`, else
    /// `kmax_per_inverse_tau / tau` for ramp-regularized trajectories.
    pub fn radial_cutoff(&self) -> Option<f64> {
        self.numerics
            .quadrature
            .k_max
            .or_else(|| self.trajectory.ramp().map(|tau| self.numerics.kmax_per_inverse_tau / tau))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn charge() -> RawScenario {
        RawScenario::new(
            Coupling::Charge { e2: 1.0 },
            TrajectorySpec::Adiabatic { amplitude: 0.01, width: 1.0 },
        )
    }

    #[test]
    fn orientation_from_direction() {
        let s = charge().with_plate(0.1, Vec3::Z).validate().unwrap();
        assert_eq!(s.geometry().orientation(), Orientation::Perpendicular);
        let s = charge().with_plate(0.1, Vec3::X).validate().unwrap();
        assert_eq!(s.geometry().orientation(), Orientation::Parallel);
        let d = Vec3::new(1.0, 0.0, 1.0) * (0.5f64).sqrt();
        let s = charge().with_plate(0.1, d).validate().unwrap();
        assert_eq!(s.geometry().orientation(), Orientation::Oblique);
    }

    #[test]
    fn negative_distance_rejected() {
        let err = charge().with_plate(-1.0, Vec3::X).validate().unwrap_err();
        assert!(err.violations.contains(&Violation::NegativeDistance { z0: -1.0 }));
    }

    #[test]
    fn direction_is_renormalized_within_tolerance() {
        let s = charge()
            .with_plate(0.0, Vec3::new(1.0 + 5e-7, 0.0, 0.0))
            .validate()
            .unwrap();
        assert_eq!(s.geometry().j_hat().norm(), 1.0);
        let err = charge()
            .with_plate(0.0, Vec3::new(1.0 + 1e-5, 0.0, 0.0))
            .validate()
            .unwrap_err();
        assert!(matches!(err.violations[0], Violation::NonUnitDirection { .. }));
    }

    #[test]
    fn violations_are_collected() {
        let raw = RawScenario {
            z0: -2.0,
            j_hat: Vec3::new(0.0, 2.0, 0.0),
            ..Default::default()
        };
        let err = raw.validate().unwrap_err();
        assert!(err.violations.contains(&Violation::MissingCoupling));
        assert!(err.violations.contains(&Violation::MissingTrajectory));
        assert_eq!(err.violations.len(), 4);
    }

    #[test]
    fn inconsistent_ramp() {
        let raw = RawScenario::new(
            Coupling::Charge { e2: 1.0 },
            TrajectorySpec::PiecewiseTrapezoid { speed: 0.01, duration: 1.0, ramp: 1.0 },
        );
        let err = raw.validate().unwrap_err();
        assert!(matches!(err.violations[0], Violation::InconsistentTrajectory(_)));
    }

    #[test]
    fn relativistic_speed_rejected() {
        let raw = RawScenario::new(
            Coupling::Charge { e2: 1.0 },
            TrajectorySpec::PiecewiseTrapezoid { speed: 0.5, duration: 1.0, ramp: 0.1 },
        );
        let err = raw.validate().unwrap_err();
        assert!(matches!(err.violations[0], Violation::Relativistic { .. }));
    }

    #[test]
    fn absent_plate_zeroes_distance() {
        let mut raw = charge();
        raw.z0 = 3.0;
        let s = raw.validate().unwrap();
        assert!(!s.geometry().plate());
        assert_eq!(s.geometry().z0(), 0.0);
    }

    #[test]
    fn reflection_examples() {
        assert_eq!(reflect_geometric(Vec3::X), Vec3::X);
        assert_eq!(reflect_geometric(Vec3::Z), Vec3::new(0.0, 0.0, -1.0));
        assert_eq!(reflect_geometric(Vec3::new(3.0, 4.0, 5.0)), Vec3::new(3.0, 4.0, -5.0));

        assert_eq!(reflect_electric_dipole(Vec3::X), Vec3::new(-1.0, 0.0, 0.0));
        assert_eq!(reflect_electric_dipole(Vec3::Z), Vec3::Z);
        assert_eq!(reflect_electric_dipole(Vec3::ZERO), Vec3::ZERO);

        assert_eq!(reflect_magnetic_dipole(Vec3::Z), Vec3::new(0.0, 0.0, -1.0));
        assert_eq!(reflect_magnetic_dipole(Vec3::X), Vec3::X);
        assert_eq!(reflect_magnetic_dipole(Vec3::Y), Vec3::Y);
    }

    #[test]
    fn trajectory_direction_overlap_sign() {
        let par = charge().with_plate(0.1, Vec3::Y).validate().unwrap();
        assert_eq!(par.geometry().reflection_overlap(), 1.0);
        let perp = charge().with_plate(0.1, Vec3::Z).validate().unwrap();
        assert_eq!(perp.geometry().reflection_overlap(), -1.0);
    }

    fn vec3() -> impl Strategy<Value = Vec3> {
        (-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn geometric_reflection_is_involution(v in vec3()) {
            prop_assert_eq!(reflect_geometric(reflect_geometric(v)), v);
        }

        #[test]
        fn electric_image_overlap(v in vec3()) {
            let p = reflect_electric_dipole(v).dot(v);
            let expected = v.z * v.z - v.x * v.x - v.y * v.y;
            prop_assert!((p - expected).abs() <= 1e-12 * v.norm_sq().max(1.0));
            if let Some(u) = v.normalized() {
                let q = reflect_electric_dipole(u).dot(u);
                prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&q));
            }
        }

        #[test]
        fn scenario_equality_is_structural(z0 in 0.0..5.0f64) {
            let a = charge().with_plate(z0, Vec3::X).validate().unwrap();
            let b = charge().with_plate(z0, Vec3::X).validate().unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
