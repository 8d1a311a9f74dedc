//! Relative-motion profiles `x(t)` (branch positions `±x(t)ĵ` about the
//! midpoint) and their oscillatory time transforms.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::quadrature::{gauss_legendre, integrate_panels, uniform_breaks, QuadError, QuadratureConfig, SpectralDecay};

/// Gaussian profiles are truncated this many widths from each pulse centre.
pub const SUPPORT_WIDTHS: f64 = 8.0;

/// Below `k·T` of this size the trapezoid spectrum switches to its Taylor
/// series, where the closed form cancels.
const TRAPEZOID_SERIES_KT: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub enum TrajectorySpec {
    /// `x(t) = R exp(−t²/T²)`.
    Adiabatic { amplitude: f64, width: f64 },
    /// Velocity ramps `0 → v` over `τ`, coasts, reverses through `−v` over
    /// `2τ` at `T/2`, coasts, and ramps back to rest at `T`.
    PiecewiseTrapezoid { speed: f64, duration: f64, ramp: f64 },
    /// `count` Gaussian pulses of width `width` centred at `n·separation`,
    /// optionally modulated by `cos(Ω(t − t_n))`.
    PulseTrain { amplitude: f64, width: f64, separation: f64, count: u32, carrier: Option<f64> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SpectrumMode {
    /// `∫ ẋ cos(k_j x) e^{ikt} dt`.
    Charge,
    /// `∫ sin(k_j x) e^{ikt} dt`.
    Dipole,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SourceSpectrum {
    pub value: Complex64,
    pub k: f64,
    pub k_j: f64,
    pub mode: SpectrumMode,
    pub est_error: f64,
}

struct Knots {
    t: [f64; 6],
    v: [f64; 6],
    x: [f64; 6],
    /// Acceleration on each of the five segments.
    a: [f64; 5],
}

fn trapezoid_knots(v: f64, big_t: f64, tau: f64) -> Knots {
    let t = [0.0, tau, 0.5 * big_t - tau, 0.5 * big_t + tau, big_t - tau, big_t];
    let vel = [0.0, v, v, -v, -v, 0.0];
    let a = [v / tau, 0.0, -v / tau, 0.0, v / tau];
    let mut x = [0.0; 6];
    for i in 0..5 {
        let dt = t[i + 1] - t[i];
        x[i + 1] = x[i] + vel[i] * dt + 0.5 * a[i] * dt * dt;
    }
    // The profile is closed by construction; remove rounding residue.
    x[5] = 0.0;
    Knots { t, v: vel, x, a }
}

impl TrajectorySpec {
    pub fn kind_label(&self) -> &'static str {
        match self {
            TrajectorySpec::Adiabatic { .. } => "adiabatic",
            TrajectorySpec::PiecewiseTrapezoid { .. } => "trapezoid",
            TrajectorySpec::PulseTrain { .. } => "pulse_train",
        }
    }

    /// Structural consistency, independent of the speed limit.
    pub fn check(&self) -> Result<(), String> {
        let finite_pos = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(format!("{name} = {x} must be positive"))
            }
        };
        let finite_nonneg = |name: &str, x: f64| {
            if x >= 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(format!("{name} = {x} must be non-negative"))
            }
        };
        match *self {
            TrajectorySpec::Adiabatic { amplitude, width } => {
                finite_nonneg("R", amplitude)?;
                finite_pos("T", width)
            }
            TrajectorySpec::PiecewiseTrapezoid { speed, duration, ramp } => {
                finite_nonneg("v", speed)?;
                finite_pos("T", duration)?;
                finite_pos("tau", ramp)?;
                if ramp >= 0.25 * duration {
                    return Err(format!("tau = {ramp} must be below T/4 = {}", 0.25 * duration));
                }
                Ok(())
            }
            TrajectorySpec::PulseTrain { amplitude, width, separation, count, carrier } => {
                finite_nonneg("R", amplitude)?;
                finite_pos("T_pulse", width)?;
                finite_pos("T_sep", separation)?;
                if count == 0 {
                    return Err("pulse count N must be at least 1".into());
                }
                if let Some(omega) = carrier {
                    finite_nonneg("Omega", omega)?;
                }
                Ok(())
            }
        }
    }

    /// Time window outside which the profile is (numerically) at rest.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            TrajectorySpec::Adiabatic { width, .. } => (-SUPPORT_WIDTHS * width, SUPPORT_WIDTHS * width),
            TrajectorySpec::PiecewiseTrapezoid { duration, .. } => (0.0, duration),
            TrajectorySpec::PulseTrain { width, separation, count, .. } => (
                -SUPPORT_WIDTHS * width,
                (count - 1) as f64 * separation + SUPPORT_WIDTHS * width,
            ),
        }
    }

    /// `T` of the profile: Gaussian width, total duration, or pulse width.
    pub fn characteristic_time(&self) -> f64 {
        match *self {
            TrajectorySpec::Adiabatic { width, .. } => width,
            TrajectorySpec::PiecewiseTrapezoid { duration, .. } => duration,
            TrajectorySpec::PulseTrain { width, .. } => width,
        }
    }

    pub fn ramp(&self) -> Option<f64> {
        match *self {
            TrajectorySpec::PiecewiseTrapezoid { ramp, .. } => Some(ramp),
            _ => None,
        }
    }

    pub fn carrier(&self) -> f64 {
        match *self {
            TrajectorySpec::PulseTrain { carrier: Some(omega), .. } => omega,
            _ => 0.0,
        }
    }

    /// Upper bound on `|ẋ|`.
    pub fn max_speed(&self) -> f64 {
        // max |d/ds e^{-s²/T²}| = √2 e^{-1/2} / T
        let gauss_peak = 2f64.sqrt() * (-0.5f64).exp();
        match *self {
            TrajectorySpec::Adiabatic { amplitude, width } => amplitude * gauss_peak / width,
            TrajectorySpec::PiecewiseTrapezoid { speed, .. } => speed,
            TrajectorySpec::PulseTrain { amplitude, width, carrier, .. } => {
                amplitude * (gauss_peak / width + carrier.unwrap_or(0.0))
            }
        }
    }

    /// Upper bound on `|x|`.
    pub fn max_excursion(&self) -> f64 {
        match *self {
            TrajectorySpec::Adiabatic { amplitude, .. } => amplitude,
            TrajectorySpec::PiecewiseTrapezoid { speed, duration, ramp } => {
                trapezoid_knots(speed, duration, ramp).x[2].max(trapezoid_knots(speed, duration, ramp).x[3])
                    + speed * ramp
            }
            TrajectorySpec::PulseTrain { amplitude, width, separation, count, .. } => {
                // Overlapping pulses can pile up.
                let per_width = (2.0 * SUPPORT_WIDTHS * width / separation).ceil() + 1.0;
                amplitude * per_width.min(count as f64)
            }
        }
    }

    pub fn is_smooth(&self) -> bool {
        !matches!(self, TrajectorySpec::PiecewiseTrapezoid { .. })
    }

    /// Large-`k` behaviour of the source spectra.
    pub fn spectral_decay(&self) -> SpectralDecay {
        match *self {
            TrajectorySpec::PiecewiseTrapezoid { .. } => SpectralDecay::Algebraic,
            _ => SpectralDecay::Exponential { scale: self.characteristic_time(), peak: self.carrier() },
        }
    }

    /// Largest time separation that shows up as a phase `e^{ikΔt}` in
    /// `|spectrum|²`.
    pub fn oscillation_time(&self) -> f64 {
        match *self {
            TrajectorySpec::Adiabatic { .. } => 0.0,
            TrajectorySpec::PiecewiseTrapezoid { duration, .. } => duration,
            TrajectorySpec::PulseTrain { separation, count, .. } => (count - 1) as f64 * separation,
        }
    }

    /// Intervals on which the profile is smooth and not negligible.
    pub fn windows(&self) -> Vec<(f64, f64)> {
        match *self {
            TrajectorySpec::Adiabatic { .. } => vec![self.support()],
            TrajectorySpec::PiecewiseTrapezoid { speed, duration, ramp } => {
                let k = trapezoid_knots(speed, duration, ramp);
                k.t.windows(2).map(|w| (w[0], w[1])).collect()
            }
            TrajectorySpec::PulseTrain { width, separation, count, .. } => {
                let half = SUPPORT_WIDTHS * width;
                let mut out: Vec<(f64, f64)> = Vec::new();
                for n in 0..count {
                    let c = n as f64 * separation;
                    match out.last_mut() {
                        Some(last) if last.1 >= c - half => last.1 = c + half,
                        _ => out.push((c - half, c + half)),
                    }
                }
                out
            }
        }
    }

    pub fn position(&self, t: f64) -> f64 {
        match *self {
            TrajectorySpec::Adiabatic { amplitude, width } => amplitude * (-(t / width).powi(2)).exp(),
            TrajectorySpec::PiecewiseTrapezoid { speed, duration, ramp } => {
                if t <= 0.0 || t >= duration {
                    return 0.0;
                }
                let k = trapezoid_knots(speed, duration, ramp);
                let i = (0..5).rev().find(|&i| t >= k.t[i]).unwrap_or(0);
                let dt = t - k.t[i];
                k.x[i] + k.v[i] * dt + 0.5 * k.a[i] * dt * dt
            }
            TrajectorySpec::PulseTrain { amplitude, width, separation, count, carrier } => {
                let omega = carrier.unwrap_or(0.0);
                (0..count)
                    .map(|n| {
                        let s = t - n as f64 * separation;
                        (-(s / width).powi(2)).exp() * (omega * s).cos()
                    })
                    .sum::<f64>()
                    * amplitude
            }
        }
    }

    /// `ẋ(t)`; right limit at the trapezoid knots.
    pub fn velocity(&self, t: f64) -> f64 {
        match *self {
            TrajectorySpec::Adiabatic { amplitude, width } => {
                -2.0 * t / (width * width) * amplitude * (-(t / width).powi(2)).exp()
            }
            TrajectorySpec::PiecewiseTrapezoid { speed, duration, ramp } => {
                if t < 0.0 || t >= duration {
                    return 0.0;
                }
                let k = trapezoid_knots(speed, duration, ramp);
                let i = (0..5).rev().find(|&i| t >= k.t[i]).unwrap_or(0);
                k.v[i] + k.a[i] * (t - k.t[i])
            }
            TrajectorySpec::PulseTrain { amplitude, width, separation, count, carrier } => {
                let omega = carrier.unwrap_or(0.0);
                (0..count)
                    .map(|n| {
                        let s = t - n as f64 * separation;
                        let g = (-(s / width).powi(2)).exp();
                        let (sn, cs) = (omega * s).sin_cos();
                        g * (-2.0 * s / (width * width) * cs - omega * sn)
                    })
                    .sum::<f64>()
                    * amplitude
            }
        }
    }

    /// `x̂(k) = ∫ x(t) e^{ikt} dt`.
    pub fn position_transform(&self, k: f64) -> Complex64 {
        match *self {
            TrajectorySpec::Adiabatic { amplitude, width } => {
                Complex64::new(amplitude * PI.sqrt() * width * (-(k * width).powi(2) / 4.0).exp(), 0.0)
            }
            TrajectorySpec::PiecewiseTrapezoid { .. } => {
                if k * self.characteristic_time() < TRAPEZOID_SERIES_KT {
                    // x̂ = i v̂ / k with the series of v̂ shifted by one power.
                    self.trapezoid_series(k, 1)
                } else {
                    Complex64::i() * self.velocity_transform(k) / k
                }
            }
            TrajectorySpec::PulseTrain { amplitude, width, separation, count, carrier } => {
                let g = |q: f64| PI.sqrt() * width * (-(q * width).powi(2) / 4.0).exp();
                let single = match carrier {
                    Some(omega) => 0.5 * (g(k + omega) + g(k - omega)),
                    None => g(k),
                };
                let comb: Complex64 = (0..count)
                    .map(|n| Complex64::from_polar(1.0, k * n as f64 * separation))
                    .sum();
                comb * amplitude * single
            }
        }
    }

    /// `v̂(k) = ∫ ẋ(t) e^{ikt} dt`.
    pub fn velocity_transform(&self, k: f64) -> Complex64 {
        match *self {
            TrajectorySpec::PiecewiseTrapezoid { speed, duration, ramp } => {
                if k * duration < TRAPEZOID_SERIES_KT {
                    return self.trapezoid_series(k, 0);
                }
                let kn = trapezoid_knots(speed, duration, ramp);
                // Two integrations by parts: v̂ = −k⁻² Σ Δa_i e^{ikt_i}.
                let mut sum = Complex64::new(0.0, 0.0);
                let mut prev = 0.0;
                for i in 0..6 {
                    let next = if i < 5 { kn.a[i] } else { 0.0 };
                    sum += (next - prev) * Complex64::from_polar(1.0, k * kn.t[i]);
                    prev = next;
                }
                -sum / (k * k)
            }
            // Boundary terms vanish, so v̂ = −ik x̂.
            _ => Complex64::new(0.0, -k) * self.position_transform(k),
        }
    }

    /// Taylor series of `v̂` (`shift = 0`) or `x̂` (`shift = 1`) in `k`,
    /// built from the jump moments `M_n = Σ Δa_i t_i^n`.
    fn trapezoid_series(&self, k: f64, shift: i32) -> Complex64 {
        let TrajectorySpec::PiecewiseTrapezoid { speed, duration, ramp } = *self else {
            unreachable!("trapezoid only");
        };
        let kn = trapezoid_knots(speed, duration, ramp);
        let mut jumps = [0.0; 6];
        let mut prev = 0.0;
        for (i, j) in jumps.iter_mut().enumerate() {
            let next = if i < 5 { kn.a[i] } else { 0.0 };
            *j = next - prev;
            prev = next;
        }
        // v̂ = −Σ_{n≥3} iⁿ k^{n−2} M_n / n!, x̂ = i v̂ / k.
        let mut sum = Complex64::new(0.0, 0.0);
        let mut fact = 2.0;
        for n in 3..40 {
            fact *= n as f64;
            let m_n: f64 = jumps.iter().zip(kn.t.iter()).map(|(d, t)| d * t.powi(n)).sum();
            let i_pow = Complex64::i().powi(n + shift);
            sum -= i_pow * k.powi(n - 2 - shift) * (m_n / fact);
        }
        sum
    }
}

pub fn position(spec: &TrajectorySpec, t: f64) -> f64 {
    spec.position(t)
}

pub fn velocity(spec: &TrajectorySpec, t: f64) -> f64 {
    spec.velocity(t)
}

/// `∫ ẋ cos(k_j x) e^{ikt}` (charge) or `∫ sin(k_j x) e^{ikt}` (dipole) over
/// the support, by adaptive quadrature split at the profile's breakpoints.
pub fn source_spectrum(
    spec: &TrajectorySpec,
    k: f64,
    k_j: f64,
    mode: SpectrumMode,
    cfg: &QuadratureConfig,
) -> Result<SourceSpectrum, QuadError> {
    let zero = SourceSpectrum { value: Complex64::new(0.0, 0.0), k, k_j, mode, est_error: 0.0 };
    if spec.max_excursion() == 0.0 || (mode == SpectrumMode::Dipole && k_j == 0.0) {
        return Ok(zero);
    }
    let rate = k + k_j.abs() * spec.max_speed() + spec.carrier();
    let width = spec.characteristic_time();
    let integrand = |t: f64| {
        let x = spec.position(t);
        let phase = Complex64::from_polar(1.0, k * t);
        match mode {
            SpectrumMode::Charge => phase * (spec.velocity(t) * (k_j * x).cos()),
            SpectrumMode::Dipole => phase * (k_j * x).sin(),
        }
    };
    let mut value = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    for (a, b) in spec.windows() {
        let len = b - a;
        let n = ((len * rate / PI).ceil() as usize).max((len / width).ceil() as usize).max(2);
        let est = integrate_panels(integrand, &uniform_breaks(a, b, n), cfg.rel_tol * 1e-2, 0.0, cfg.max_subdivisions)?;
        value += est.value;
        err += est.err_est.re.hypot(est.err_est.im);
    }
    Ok(SourceSpectrum { value, k, k_j, mode, est_error: err })
}

/// Small-excursion limit: `v̂(k)` in charge mode; in dipole mode `x̂(k)`, to
/// be multiplied by `k_j` by the caller.
pub fn dipole_approx_spectrum(spec: &TrajectorySpec, k: f64, mode: SpectrumMode) -> SourceSpectrum {
    let value = match mode {
        SpectrumMode::Charge => spec.velocity_transform(k),
        SpectrumMode::Dipole => spec.position_transform(k),
    };
    SourceSpectrum { value, k, k_j: 0.0, mode, est_error: 0.0 }
}

/// One sample point of a [`TimeGrid`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridNode {
    pub t: f64,
    pub weight: f64,
    pub x: f64,
    pub v: f64,
}

/// Contiguous block of nodes; uniform blocks allow a phase recurrence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridRun {
    pub start: usize,
    pub len: usize,
    pub step: Option<f64>,
}

/// Fixed quadrature grid for many transforms `∫ g(t) e^{iωt}` of the same
/// profile, accurate for `ω ≤ omega_max` and `|k_j| ≤ kj_max`.
///
/// Smooth profiles use the trapezoid rule on a uniform lattice, which is
/// spectrally accurate for integrands that decay smoothly at both ends;
/// piecewise profiles use Gauss–Legendre panels inside each segment.
#[derive(Clone, Debug)]
pub struct TimeGrid {
    nodes: Vec<GridNode>,
    runs: Vec<GridRun>,
    omega_max: f64,
}

impl TimeGrid {
    pub fn new(spec: &TrajectorySpec, omega_max: f64, kj_max: f64) -> TimeGrid {
        let mut nodes = Vec::new();
        let mut runs = Vec::new();
        let width = spec.characteristic_time();
        let band = omega_max + kj_max * spec.max_speed() + spec.carrier();
        if spec.is_smooth() {
            // v·x^n from expanding sin/cos(k_j x) has a Gaussian spectrum
            // √(n+1) wider, shifted by (n+1)Ω. Each term gets the aliasing
            // margin q with (a^n/n!)·exp(−q²T²/4(n+1)) below 1e-16.
            let a = kj_max * spec.max_excursion();
            let floor = 1e-16f64.ln();
            let (mut h_inv, mut log_coef) = (0.0f64, 0.0f64);
            for n in 0..200u32 {
                if n > 0 {
                    log_coef += a.ln() - (n as f64).ln();
                }
                let slack = log_coef - floor;
                if slack <= 0.0 {
                    break;
                }
                let m = (n + 1) as f64;
                let margin = 2.0 * (m * slack).sqrt() / width;
                h_inv = h_inv.max(omega_max + m * spec.carrier() + margin);
            }
            let h = 2.0 * PI / h_inv;
            for (a, b) in spec.windows() {
                let count = ((b - a) / h).ceil() as usize + 1;
                let start = nodes.len();
                for i in 0..count {
                    let t = a + i as f64 * h;
                    nodes.push(GridNode { t, weight: h, x: spec.position(t), v: spec.velocity(t) });
                }
                runs.push(GridRun { start, len: count, step: Some(h) });
            }
        } else {
            let (gx, gw) = gauss_legendre(8);
            for (a, b) in spec.windows() {
                let panels = (((b - a) * band / 3.0).ceil() as usize).max(1);
                let start = nodes.len();
                for p in 0..panels {
                    let lo = a + (b - a) * p as f64 / panels as f64;
                    let hi = a + (b - a) * (p + 1) as f64 / panels as f64;
                    let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
                    for (x, w) in gx.iter().zip(&gw) {
                        let t = c + h * x;
                        nodes.push(GridNode { t, weight: h * w, x: spec.position(t), v: spec.velocity(t) });
                    }
                }
                runs.push(GridRun { start, len: nodes.len() - start, step: None });
            }
        }
        TimeGrid { nodes, runs, omega_max }
    }

    pub fn omega_max(&self) -> f64 {
        self.omega_max
    }

    pub fn nodes(&self) -> &[GridNode] {
        &self.nodes
    }

    pub fn runs(&self) -> &[GridRun] {
        &self.runs
    }

    /// Calls `f(node, e^{iωt})` for every node, using a phase recurrence on
    /// uniform runs.
    pub fn for_each_phase<F: FnMut(&GridNode, Complex64)>(&self, omega: f64, mut f: F) {
        for run in &self.runs {
            let nodes = &self.nodes[run.start..run.start + run.len];
            match run.step {
                Some(h) => {
                    let step = Complex64::from_polar(1.0, omega * h);
                    let mut z = Complex64::from_polar(1.0, omega * nodes[0].t);
                    for (i, node) in nodes.iter().enumerate() {
                        // Re-anchor now and then to stop rounding drift.
                        if i > 0 && i % 64 == 0 {
                            z = Complex64::from_polar(1.0, omega * node.t);
                        }
                        f(node, z);
                        z *= step;
                    }
                }
                None => {
                    for node in nodes {
                        f(node, Complex64::from_polar(1.0, omega * node.t));
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn adiabatic(r: f64, t: f64) -> TrajectorySpec {
        TrajectorySpec::Adiabatic { amplitude: r, width: t }
    }

    fn trapezoid() -> TrajectorySpec {
        TrajectorySpec::PiecewiseTrapezoid { speed: 0.01, duration: 1.0, ramp: 0.05 }
    }

    fn tight() -> QuadratureConfig {
        QuadratureConfig { rel_tol: 1e-10, abs_tol: 0.0, ..Default::default() }
    }

    #[test]
    fn position_examples() {
        let s = adiabatic(1.0, 1.0);
        assert_eq!(s.position(0.0), 1.0);
        assert!(s.position(40.0) < 1e-300);
        let p = trapezoid();
        assert_eq!(p.position(0.0), 0.0);
        assert_eq!(p.position(1.0), 0.0);
        assert!(p.position(0.999_999).abs() < 1e-12);
    }

    #[test]
    fn velocity_examples() {
        let s = adiabatic(1.0, 1.0);
        assert_eq!(s.velocity(0.0), 0.0);
        let expected = -2.0 * (-1.0f64).exp();
        assert!((s.velocity(1.0) - expected).abs() < 1e-15);
        let h = 1e-5;
        let fd = (s.position(1.0 + h) - s.position(1.0 - h)) / (2.0 * h);
        assert!((fd - expected).abs() < 1e-9);
        assert!((expected + 0.73576).abs() < 1e-5);

        let p = trapezoid();
        assert_eq!(p.velocity(0.2), 0.01);
        assert_eq!(p.velocity(0.8), -0.01);
    }

    #[test]
    fn trapezoid_velocity_is_derivative() {
        let p = trapezoid();
        for &t in &[0.02, 0.3, 0.47, 0.51, 0.6, 0.97] {
            let h = 1e-6;
            let fd = (p.position(t + h) - p.position(t - h)) / (2.0 * h);
            assert!((fd - p.velocity(t)).abs() < 1e-9, "t = {t}");
        }
    }

    #[test]
    fn pulse_train_profile() {
        let s = TrajectorySpec::PulseTrain { amplitude: 0.5, width: 1.0, separation: 50.0, count: 3, carrier: None };
        assert!((s.position(100.0) - 0.5).abs() < 1e-15);
        assert!(s.position(25.0).abs() < 1e-100);
        let h = 1e-5;
        let fd = (s.position(50.3 + h) - s.position(50.3 - h)) / (2.0 * h);
        assert!((fd - s.velocity(50.3)).abs() < 1e-9);
        assert_eq!(s.windows().len(), 3);
    }

    #[test]
    fn dipole_mode_vanishes_without_projection() {
        let s = adiabatic(0.3, 1.0);
        let v = source_spectrum(&s, 2.0, 0.0, SpectrumMode::Dipole, &tight()).unwrap();
        assert_eq!(v.value, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn adiabatic_charge_spectrum() {
        let (r, t) = (0.4, 1.3);
        let s = adiabatic(r, t);
        for &k in &[0.1, 1.0, 2.0, 5.0] {
            let num = source_spectrum(&s, k, 0.0, SpectrumMode::Charge, &tight()).unwrap();
            let closed = Complex64::new(0.0, -k * r * PI.sqrt() * t * (-(k * t).powi(2) / 4.0).exp());
            assert!((num.value - closed).norm() < 1e-10, "k = {k}");
            // Purely imaginary by parity.
            assert!(num.value.re.abs() < 1e-12);
        }
    }

    #[test]
    fn zero_amplitude_spectrum() {
        let s = adiabatic(0.0, 1.0);
        let v = source_spectrum(&s, 1.0, 0.5, SpectrumMode::Charge, &tight()).unwrap();
        assert_eq!(v.value.norm(), 0.0);
    }

    #[test]
    fn dipole_approx_examples() {
        let s = adiabatic(1.0, 1.0);
        let v0 = dipole_approx_spectrum(&s, 0.0, SpectrumMode::Charge);
        assert_eq!(v0.value.norm(), 0.0);
        let v2 = dipole_approx_spectrum(&s, 2.0, SpectrumMode::Charge);
        assert!((v2.value.norm() - 2.0 * PI.sqrt() * (-1.0f64).exp()).abs() < 1e-12);
        assert!((v2.value.norm() - 1.3041).abs() < 1e-4);
    }

    #[test]
    fn trapezoid_transforms_match_quadrature() {
        let p = trapezoid();
        for &k in &[1e-4, 5e-3, 0.3, 4.0, 60.0] {
            let num = source_spectrum(&p, k, 0.0, SpectrumMode::Charge, &tight()).unwrap();
            let closed = dipole_approx_spectrum(&p, k, SpectrumMode::Charge).value;
            assert!((num.value - closed).norm() < 1e-12 + 1e-9 * closed.norm(), "k = {k}: {} vs {}", num.value, closed);

            let xhat = integrate_panels(
                |t: f64| Complex64::from_polar(p.position(t), k * t),
                &[0.0, 0.05, 0.45, 0.55, 0.95, 1.0],
                1e-12,
                0.0,
                100_000,
            )
            .unwrap()
            .value;
            let closed_x = p.position_transform(k);
            assert!((xhat - closed_x).norm() < 1e-13 + 1e-9 * closed_x.norm(), "x̂ at k = {k}");
        }
    }

    #[test]
    fn trapezoid_series_continuity() {
        let p = trapezoid();
        let k = TRAPEZOID_SERIES_KT;
        let below = p.velocity_transform(k * (1.0 - 1e-12));
        let above = p.velocity_transform(k * (1.0 + 1e-12));
        assert!((below - above).norm() < 1e-10 * above.norm());
    }

    #[test]
    fn pulse_train_transform_with_carrier() {
        let s = TrajectorySpec::PulseTrain { amplitude: 0.1, width: 1.0, separation: 3.0, count: 2, carrier: Some(4.0) };
        for &k in &[0.5, 3.9, 7.0] {
            let num = integrate_panels(
                |t: f64| Complex64::from_polar(s.position(t), k * t),
                &uniform_breaks(-8.0, 11.0, 40),
                1e-12,
                0.0,
                100_000,
            )
            .unwrap()
            .value;
            assert!((num - s.position_transform(k)).norm() < 1e-11);
        }
    }

    #[test]
    fn small_argument_agreement() {
        // k_j·max|x| < 0.03 ⇒ exact and dipole-approximated spectra agree.
        let s = adiabatic(0.004, 1.0);
        for &k in &[0.5, 1.5, 3.0] {
            let kj = 0.9 * k;
            let c = source_spectrum(&s, k, kj, SpectrumMode::Charge, &tight()).unwrap().value;
            let ca = dipole_approx_spectrum(&s, k, SpectrumMode::Charge).value;
            assert!((c - ca).norm() < 1e-3 * ca.norm());
            let d = source_spectrum(&s, k, kj, SpectrumMode::Dipole, &tight()).unwrap().value;
            let da = dipole_approx_spectrum(&s, k, SpectrumMode::Dipole).value * kj;
            assert!((d - da).norm() < 1e-3 * da.norm());
        }
    }

    #[test]
    fn dipole_approx_error_is_quadratic() {
        // Halving R should cut the relative error by four.
        let err = |r: f64| {
            let s = adiabatic(r, 1.0);
            let (k, kj) = (2.0, 1.5);
            let exact = source_spectrum(&s, k, kj, SpectrumMode::Charge, &tight()).unwrap().value;
            let approx = dipole_approx_spectrum(&s, k, SpectrumMode::Charge).value;
            (exact - approx).norm() / approx.norm()
        };
        let ratio = err(0.02) / err(0.01);
        assert!((ratio - 4.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn time_grid_reproduces_transforms() {
        let specs = [
            adiabatic(0.05, 1.0),
            TrajectorySpec::PulseTrain { amplitude: 0.05, width: 0.7, separation: 20.0, count: 3, carrier: None },
            trapezoid(),
        ];
        for s in &specs {
            let grid = TimeGrid::new(s, 12.0, 12.0);
            for &(k, kj) in &[(0.3, 0.1), (4.0, -2.5), (11.5, 11.0)] {
                let mut acc = Complex64::new(0.0, 0.0);
                grid.for_each_phase(k, |n, z| acc += z * (n.weight * n.v * (kj * n.x).cos()));
                let reference = source_spectrum(s, k, kj, SpectrumMode::Charge, &tight()).unwrap().value;
                assert!((acc - reference).norm() < 1e-10 * (1.0 + reference.norm()), "{} at k = {k}: {acc} vs {reference}", s.kind_label());
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn spectrum_reality_pairing(k in 0.05..6.0f64, frac in -1.0..1.0f64) {
            let s = adiabatic(0.2, 1.0);
            let kj = frac * k;
            for mode in [SpectrumMode::Charge, SpectrumMode::Dipole] {
                let plus = source_spectrum(&s, k, kj, mode, &tight()).unwrap().value;
                let minus = source_spectrum(&s, -k, kj, mode, &tight()).unwrap().value;
                prop_assert!((minus - plus.conj()).norm() < 1e-11);
            }
        }

        #[test]
        fn tightening_changes_less_than_error(k in 0.05..6.0f64) {
            let s = trapezoid();
            let loose = QuadratureConfig { rel_tol: 1e-4, ..Default::default() };
            let a = source_spectrum(&s, k, 0.5 * k, SpectrumMode::Charge, &loose).unwrap();
            let b = source_spectrum(&s, k, 0.5 * k, SpectrumMode::Charge, &loose.tightened(0.1)).unwrap();
            prop_assert!((a.value - b.value).norm() <= a.est_error.max(1e-16));
        }
    }
}
