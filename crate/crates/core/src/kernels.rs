//! Momentum-space photon kernels: the vacuum and image contractions used by
//! the Monte Carlo oracle, polarization projectors, and the closed angular
//! reductions behind the dipole-approximation fast path.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::scenario::{axis_is_symmetric, Orientation, Vec3};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("kernel evaluated at k = {k}; k must be positive")]
    NonPositiveWavenumber { k: f64 },
    #[error("no closed angular reduction for {0}; use the full quadrature path")]
    UnsupportedCase(String),
}

/// A wave vector in spherical coordinates about the plate normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KPoint {
    pub k: f64,
    /// Cosine of the polar angle from `ẑ`.
    pub u: f64,
    pub phi: f64,
}

impl KPoint {
    pub fn new(k: f64, u: f64, phi: f64) -> Self {
        KPoint { k, u: u.clamp(-1.0, 1.0), phi }
    }

    pub fn from_vector(v: Vec3) -> Self {
        let k = v.norm();
        if k == 0.0 {
            return KPoint { k: 0.0, u: 1.0, phi: 0.0 };
        }
        KPoint { k, u: (v.z / k).clamp(-1.0, 1.0), phi: v.y.atan2(v.x) }
    }

    pub fn direction(&self) -> Vec3 {
        let s = (1.0 - self.u * self.u).max(0.0).sqrt();
        let (sp, cp) = self.phi.sin_cos();
        Vec3::new(s * cp, s * sp, self.u)
    }

    pub fn vector(&self) -> Vec3 {
        self.direction() * self.k
    }

    pub fn k_z(&self) -> f64 {
        self.k * self.u
    }

    /// Component of the wave vector along `axis` (e.g. `k_j` for `ĵ`).
    pub fn along(&self, axis: Vec3) -> f64 {
        self.vector().dot(axis)
    }

    /// Mirror image `(k_x, k_y, −k_z)`.
    pub fn reflected(&self) -> KPoint {
        KPoint { k: self.k, u: -self.u, phi: self.phi }
    }
}

/// `1/((2π)³·2k)`, the mode density of the symmetric two-point function.
pub fn vacuum_kernel_weight(kp: &KPoint) -> Result<f64, KernelError> {
    if !(kp.k > 0.0) {
        return Err(KernelError::NonPositiveWavenumber { k: kp.k });
    }
    Ok(1.0 / (16.0 * PI.powi(3) * kp.k))
}

/// Real part of the image phase `e^{2 i k_z z0}`.
pub fn image_phase(kp: &KPoint, z0: f64) -> f64 {
    (2.0 * kp.k_z() * z0).cos()
}

/// Transverse projector `1 − (k̂·axis)²` for a unit axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolarizationFactor {
    pub axis: Vec3,
    pub transverse_weight: f64,
}

impl PolarizationFactor {
    pub fn new(kp: &KPoint, axis: Vec3) -> Self {
        let c = kp.direction().dot(axis);
        PolarizationFactor { axis, transverse_weight: (1.0 - c * c).clamp(0.0, 1.0) }
    }
}

/// Above this `β` the closed antiderivatives are used; below it the Taylor
/// series. At 0.1 the closed form of the `u⁴` moment has already lost about
/// eight digits, so the switch sits much higher.
pub const SERIES_CROSSOVER: f64 = 2.0;

fn moment_series(n: usize, beta: f64, skip_first: bool) -> f64 {
    let b2 = beta * beta;
    let mut term = 1.0; // β^{2m}/(2m)! with sign
    let mut sum = 0.0;
    for m in 0..60 {
        if m > 0 {
            term *= -b2 / ((2 * m - 1) * (2 * m)) as f64;
        }
        if m == 0 && skip_first {
            continue;
        }
        let t = term * 2.0 / (2 * n + 2 * m + 1) as f64;
        sum += t;
        if t.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// `I_n(β) = ∫_{-1}^{1} u^{2n} cos(βu) du` for `n ∈ {0, 1, 2}`.
pub fn cos_moment(n: usize, beta: f64) -> f64 {
    assert!(n <= 2, "moments above u^4 are not needed");
    let b = beta.abs();
    if b <= SERIES_CROSSOVER {
        return moment_series(n, b, false);
    }
    let (s, c) = b.sin_cos();
    match n {
        0 => 2.0 * s / b,
        1 => 2.0 * (s / b + 2.0 * c / b.powi(2) - 2.0 * s / b.powi(3)),
        _ => {
            2.0 * (s / b + 4.0 * c / b.powi(2) - 12.0 * s / b.powi(3) - 24.0 * c / b.powi(4)
                + 24.0 * s / b.powi(5))
        }
    }
}

/// `J_n(β) = ∫_{-1}^{1} u^{2n} (1 − cos βu) du`, accurate as `β → 0`.
pub fn one_minus_cos_moment(n: usize, beta: f64) -> f64 {
    let b = beta.abs();
    if b <= SERIES_CROSSOVER {
        -moment_series(n, b, true)
    } else {
        2.0 / (2 * n + 1) as f64 - cos_moment(n, b)
    }
}

/// Azimuthally integrated angular weight `c₀ + c₁u² + c₂u⁴` (the `2π` from
/// the `φ` integral is included).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AngularPolynomial {
    pub coeffs: [f64; 3],
}

/// `⟨(k̂·a)²⟩_φ` as coefficients in `u²`.
fn q2(a: Vec3) -> [f64; 3] {
    let ap2 = a.x * a.x + a.y * a.y;
    [0.5 * ap2, a.z * a.z - 0.5 * ap2, 0.0]
}

/// `⟨(k̂·a)²(k̂·b)²⟩_φ` as coefficients in `u²`.
fn q22(a: Vec3, b: Vec3) -> [f64; 3] {
    let ap2 = a.x * a.x + a.y * a.y;
    let bp2 = b.x * b.x + b.y * b.y;
    let apb = a.x * b.x + a.y * b.y;
    let s4 = ap2 * bp2 / 8.0 + apb * apb / 4.0;
    let s2u2 = 0.5 * a.z * a.z * bp2 + 0.5 * b.z * b.z * ap2 + 2.0 * a.z * b.z * apb;
    let u4 = a.z * a.z * b.z * b.z;
    [s4, s2u2 - 2.0 * s4, s4 - s2u2 + u4]
}

impl AngularPolynomial {
    pub fn new(coeffs: [f64; 3]) -> Self {
        AngularPolynomial { coeffs }
    }

    /// Charge weight `1 − (k̂·ĵ)²`.
    pub fn charge(j_hat: Vec3) -> Self {
        let q = q2(j_hat);
        AngularPolynomial::new([1.0 - q[0], -q[1], -q[2]]).scale(2.0 * PI)
    }

    /// Dipole weight `(k̂·ĵ)²(1 − (k̂·â)²)` for a unit dipole axis `â`.
    pub fn dipole(axis: Vec3, j_hat: Vec3) -> Self {
        let q = q2(j_hat);
        let qq = q22(axis, j_hat);
        AngularPolynomial::new([q[0] - qq[0], q[1] - qq[1], q[2] - qq[2]]).scale(2.0 * PI)
    }

    pub fn scale(self, s: f64) -> Self {
        AngularPolynomial::new(self.coeffs.map(|c| c * s))
    }

    pub fn add(self, other: Self) -> Self {
        let c = self.coeffs;
        let o = other.coeffs;
        AngularPolynomial::new([c[0] + o[0], c[1] + o[1], c[2] + o[2]])
    }

    pub fn eval(&self, u: f64) -> f64 {
        let u2 = u * u;
        self.coeffs[0] + u2 * (self.coeffs[1] + u2 * self.coeffs[2])
    }

    /// `∫_{-1}^{1} P(u) du`.
    pub fn integral(&self) -> f64 {
        self.coeffs[0] * 2.0 + self.coeffs[1] * 2.0 / 3.0 + self.coeffs[2] * 2.0 / 5.0
    }

    /// `∫_{-1}^{1} P(u) cos(βu) du`.
    pub fn cos_integral(&self, beta: f64) -> f64 {
        (0..3).map(|n| self.coeffs[n] * cos_moment(n, beta)).sum()
    }

    /// `∫_{-1}^{1} P(u) (1 − cos βu) du`.
    pub fn one_minus_cos_integral(&self, beta: f64) -> f64 {
        (0..3).map(|n| self.coeffs[n] * one_minus_cos_moment(n, beta)).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AngularPart {
    Vacuum,
    Boundary,
}

/// Which closed angular integral to evaluate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AngularCase {
    /// Weight `1 − (k̂·ĵ)²` with `ĵ` along the canonical direction of the
    /// orientation (`x̂` or `ẑ`).
    Charge { trajectory: Orientation, part: AngularPart },
    /// Weight `(k̂·ĵ)²(1 − (k̂·â)²)`.
    Dipole { j_hat: Vec3, axis: Vec3, part: AngularPart },
}

/// Closed-form `∫dΩ w(k̂)` (vacuum) or `∫dΩ w(k̂) cos(βu)` (boundary). The sign
/// `ĵ·ĵ′` and the image-dipole overlaps are applied by the caller.
pub fn angular_reduction(case: AngularCase, beta: f64) -> Result<f64, KernelError> {
    let (poly, part) = match case {
        AngularCase::Charge { trajectory, part } => {
            let j = trajectory
                .canonical_direction()
                .ok_or_else(|| KernelError::UnsupportedCase("oblique trajectory".into()))?;
            (AngularPolynomial::charge(j), part)
        }
        AngularCase::Dipole { j_hat, axis, part } => {
            if !axis_is_symmetric(j_hat) || !axis_is_symmetric(axis) {
                return Err(KernelError::UnsupportedCase("oblique trajectory or dipole axis".into()));
            }
            let a = axis.normalized().unwrap_or(Vec3::ZERO);
            (AngularPolynomial::dipole(a, j_hat), part)
        }
    };
    Ok(match part {
        AngularPart::Vacuum => poly.integral(),
        AngularPart::Boundary => poly.cos_integral(beta),
    })
}

/// Contravariant four-component amplitude `(a⁰, a¹, a², a³)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FourAmplitude(pub [Complex64; 4]);

impl FourAmplitude {
    pub fn zero() -> Self {
        FourAmplitude([Complex64::new(0.0, 0.0); 4])
    }

    pub fn scale(self, s: Complex64) -> Self {
        FourAmplitude(self.0.map(|c| c * s))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelPart {
    /// Free-space propagator, Feynman gauge: `−η_{μν}`.
    Vacuum,
    /// Image propagator `η_{μν} + 2 n_μ n_ν` with `n = ẑ`; the second
    /// amplitude must be taken at the reflected wave vector.
    Image,
}

/// Decoherence density per `d³k`: `½·w(k)·G_{μν} a^μ b^ν*` with `w` the
/// vacuum kernel weight and `G` the metric structure of `part`.
///
/// Amplitudes are space-time Fourier transforms (at `ω = k`) of conserved
/// four-currents; a dipole tensor enters through its effective current
/// `j^ν = 2i k_μ P^{μν}`. The form is sesquilinear, so swapping arguments
/// conjugates the result.
pub fn field_strength_contraction(
    kp: &KPoint,
    a: &FourAmplitude,
    b: &FourAmplitude,
    part: KernelPart,
) -> Result<Complex64, KernelError> {
    let w = vacuum_kernel_weight(kp)?;
    let g: [f64; 4] = match part {
        KernelPart::Vacuum => [-1.0, 1.0, 1.0, 1.0],
        KernelPart::Image => [1.0, -1.0, -1.0, 1.0],
    };
    let mut sum = Complex64::new(0.0, 0.0);
    for mu in 0..4 {
        sum += g[mu] * a.0[mu] * b.0[mu].conj();
    }
    Ok(0.5 * w * sum)
}
