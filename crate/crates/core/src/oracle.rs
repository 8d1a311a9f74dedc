//! Independent ground truth: a Monte Carlo contraction of the space-time
//! source against the vacuum and image kernels, closed-form limits, and the
//! fitting helpers used on sweeps.
//!
//! The Monte Carlo never touches the reduced radial/angular formulas the
//! engine uses. Each sample draws a wave vector, builds the conserved
//! four-current (or dipole effective current) of the two-branch difference
//! source by direct time integration, and contracts it with the kernels.

use std::f64::consts::PI;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::kernels::{field_strength_contraction, FourAmplitude, KPoint, KernelPart};
use crate::quadrature::{integrate_panels, linear_fit, uniform_breaks, QuadError};
use crate::scenario::{reflect_electric_dipole, reflect_geometric, reflect_magnetic_dipole, Coupling, Orientation, Scenario, Vec3};
use crate::trajectories::{source_spectrum, SpectrumMode, TimeGrid, TrajectorySpec};

/// Samples per random substream. Block `b` always uses stream `b`, so the
/// estimate does not depend on how blocks are spread over workers.
pub const BLOCK_SAMPLES: u64 = 4096;

/// `se(all)/se(first quarter)` above this flags a non-converging estimator
/// (the healthy value is 0.5).
const BLOWUP_RATIO: f64 = 0.8;

/// Smooth profiles are tabulated on a time grid good up to this `k·T`.
const SMOOTH_OMEGA_MAX: f64 = 12.0;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("Monte Carlo standard error is not shrinking like 1/sqrt(N) (ratio {ratio:.3} over a 4x sample increase)")]
    McVarianceBlowup { ratio: f64 },
    #[error("unknown analytic case `{0}`")]
    UnknownCase(String),
    #[error("need at least {needed} samples: {detail}")]
    InsufficientSamples { needed: usize, detail: String },
    #[error("samples are not monotone in |W| at index {index}; extract the envelope first")]
    NonMonotoneEnvelope { index: usize },
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct McConfig {
    pub samples: u64,
    pub seed: u64,
    /// Worker threads; `None` uses the machine's parallelism. Does not
    /// affect the result.
    pub workers: Option<usize>,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { samples: 4_000_000, seed: 0, workers: None }
    }
}

impl McConfig {
    pub fn check(&self) -> Result<(), String> {
        if self.samples < 2 {
            return Err(format!("mc samples = {} must be at least 2", self.samples));
        }
        if self.workers == Some(0) {
            return Err("mc workers must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples_used: u64,
}

impl McEstimate {
    /// `|value − reference| ≤ n·std_error`.
    pub fn agrees_with(&self, reference: f64, n_sigma: f64) -> bool {
        (self.value - reference).abs() <= n_sigma * self.std_error
    }
}

/// Vacuum and boundary parts, each with its own error, and their sum
/// (whose error accounts for the correlation between the two).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleEstimate {
    pub vacuum: McEstimate,
    pub boundary: McEstimate,
    pub total: McEstimate,
}

/// Multipliers of `x(t)ĵ` for the two branches; the physical pair is
/// `(+1, −1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchSigns {
    pub first: f64,
    pub second: f64,
}

impl Default for BranchSigns {
    fn default() -> Self {
        BranchSigns { first: 1.0, second: -1.0 }
    }
}

/// Fourier amplitude of the difference source at one wave vector (`ω = k`),
/// without the `e^{−ik_z z0}` offset phase.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentumSource {
    pub k: KPoint,
    pub current: FourAmplitude,
}

impl MomentumSource {
    /// `|ω j⁰ − k·j| / (|ω j⁰| + |k·j|)`, zero for a conserved current.
    pub fn conservation_residual(&self) -> f64 {
        let kv = self.k.vector();
        let j = &self.current.0;
        let time = self.k.k * j[0];
        let space = kv.x * j[1] + kv.y * j[2] + kv.z * j[3];
        let scale = time.norm() + space.norm();
        if scale == 0.0 {
            0.0
        } else {
            (time - space).norm() / scale
        }
    }
}

/// Builds [`MomentumSource`]s for one scenario from a precomputed time grid.
pub struct MomentumSampler<'a> {
    spec: &'a TrajectorySpec,
    coupling: Coupling,
    j_hat: Vec3,
    branches: BranchSigns,
    grid: TimeGrid,
    kj_max: f64,
}

impl<'a> MomentumSampler<'a> {
    /// Grid accurate up to `omega_max`; larger wave numbers fall back to
    /// adaptive time quadrature.
    pub fn new(s: &'a Scenario, branches: BranchSigns, omega_max: f64) -> Self {
        let spec = s.trajectory();
        MomentumSampler {
            spec,
            coupling: *s.coupling(),
            j_hat: s.geometry().j_hat(),
            branches,
            grid: TimeGrid::new(spec, omega_max, omega_max),
            kj_max: omega_max,
        }
    }

    /// `D₀ = ∫e^{iωt}(e^{−ik_j c₁x} − e^{−ik_j c₂x})` and
    /// `D₁ = ∫e^{iωt} ẋ (c₁e^{−ik_j c₁x} − c₂e^{−ik_j c₂x})`.
    fn branch_integrals(&self, omega: f64, kj: f64) -> Result<[Complex64; 2], QuadError> {
        let (c1, c2) = (self.branches.first, self.branches.second);
        let mirrored = c2 == -c1;
        let on_grid = omega <= self.grid.omega_max() && kj.abs() <= self.kj_max;
        if on_grid && mirrored {
            // e1 − e2 = −2i sin(k_j c₁x), c₁e1 − c₂e2 = 2c₁cos(k_j c₁x).
            let (mut s_acc, mut c_acc) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
            self.grid.for_each_phase(omega, |n, z| {
                let (sn, cs) = (kj * c1 * n.x).sin_cos();
                s_acc += z * (n.weight * sn);
                c_acc += z * (n.weight * n.v * cs);
            });
            return Ok([Complex64::new(0.0, -2.0) * s_acc, 2.0 * c1 * c_acc]);
        }
        let terms = |x: f64, v: f64| {
            let e1 = Complex64::from_polar(1.0, -kj * c1 * x);
            let e2 = if mirrored { e1.conj() } else { Complex64::from_polar(1.0, -kj * c2 * x) };
            (e1 - e2, (c1 * e1 - c2 * e2) * v)
        };
        if on_grid {
            let mut d = [Complex64::new(0.0, 0.0); 2];
            self.grid.for_each_phase(omega, |n, z| {
                let (a, b) = terms(n.x, n.v);
                let zw = z * n.weight;
                d[0] += zw * a;
                d[1] += zw * b;
            });
            return Ok(d);
        }
        let rate = omega + kj.abs() * self.spec.max_speed() + self.spec.carrier();
        let width = self.spec.characteristic_time();
        let mut out = [0.0; 4];
        for (a, b) in self.spec.windows() {
            let n = (((b - a) * rate / PI).ceil() as usize).max(((b - a) / width).ceil() as usize).max(2);
            let est = integrate_panels(
                |t: f64| {
                    let (p, q) = terms(self.spec.position(t), self.spec.velocity(t));
                    let z = Complex64::from_polar(1.0, omega * t);
                    let (p, q) = (z * p, z * q);
                    [p.re, p.im, q.re, q.im]
                },
                &uniform_breaks(a, b, n),
                1e-10,
                1e-300,
                1_000_000,
            )?;
            for (o, v) in out.iter_mut().zip(est.value) {
                *o += v;
            }
        }
        Ok([Complex64::new(out[0], out[1]), Complex64::new(out[2], out[3])])
    }

    fn assemble(&self, kvec: Vec3, d: [Complex64; 2]) -> MomentumSource {
        let kp = KPoint::from_vector(kvec);
        let [d0, d1] = d;
        let current = match self.coupling {
            Coupling::Charge { e2 } => {
                let e = e2.sqrt();
                let j = self.j_hat;
                FourAmplitude([e * d0, e * j.x * d1, e * j.y * d1, e * j.z * d1])
            }
            Coupling::Dipole { p, m } => {
                let i = Complex64::i();
                let kxm = kvec.cross(m);
                let rho = -i * kvec.dot(p) * d0;
                let jv = |pc: f64, kxmc: f64| (-i * kp.k * pc + i * kxmc) * d0;
                FourAmplitude([rho, jv(p.x, kxm.x), jv(p.y, kxm.y), jv(p.z, kxm.z)])
            }
        };
        MomentumSource { k: kp, current }
    }

    pub fn source(&self, kvec: Vec3) -> Result<MomentumSource, QuadError> {
        let d = self.branch_integrals(kvec.norm(), kvec.dot(self.j_hat))?;
        Ok(self.assemble(kvec, d))
    }

    /// Vacuum and image densities per `d³k` at `kvec` (image including the
    /// `e^{−2ik_z z0}` phase). The image part is skipped when `z0` is `None`.
    pub fn densities(&self, kvec: Vec3, z0: Option<f64>) -> Result<[f64; 2], QuadError> {
        let kj = kvec.dot(self.j_hat);
        let d = self.branch_integrals(kvec.norm(), kj)?;
        let a = self.assemble(kvec, d);
        let vac = field_strength_contraction(&a.k, &a.current, &a.current, KernelPart::Vacuum)
            .expect("sampled wave numbers are positive")
            .re;
        let Some(z0) = z0 else {
            return Ok([vac, 0.0]);
        };
        let rk = reflect_geometric(kvec);
        let kj_image = rk.dot(self.j_hat);
        let mirrored = self.branches.second == -self.branches.first;
        // For mirrored branches D₀ is odd and D₁ even in k_j.
        let d_image = if mirrored && kj_image == kj {
            d
        } else if mirrored && kj_image == -kj {
            [-d[0], d[1]]
        } else {
            self.branch_integrals(kvec.norm(), kj_image)?
        };
        let b = self.assemble(rk, d_image);
        let phase = Complex64::from_polar(1.0, -2.0 * kvec.z * z0);
        let img = field_strength_contraction(&a.k, &a.current, &b.current, KernelPart::Image)
            .expect("sampled wave numbers are positive");
        Ok([vac, (img * phase).re])
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum RadialProposal {
    /// `k² ~ Gamma(2, θ)`: density `2k³e^{−k²/θ}/θ²`.
    Gamma { theta: f64 },
    Uniform { k_max: f64 },
}

impl RadialProposal {
    fn for_scenario(s: &Scenario) -> Self {
        let spec = s.trajectory();
        let t = spec.characteristic_time();
        if let Some(k_max) = s.radial_cutoff() {
            return RadialProposal::Uniform { k_max };
        }
        if spec.carrier() > 0.0 {
            return RadialProposal::Uniform { k_max: spec.carrier() + SMOOTH_OMEGA_MAX / t };
        }
        RadialProposal::Gamma { theta: 4.0 / (t * t) }
    }

    fn omega_max(&self, s: &Scenario) -> f64 {
        match *self {
            RadialProposal::Uniform { k_max } => k_max,
            RadialProposal::Gamma { .. } => SMOOTH_OMEGA_MAX / s.trajectory().characteristic_time(),
        }
    }

    /// Returns `(k, pdf(k))`.
    fn sample(&self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        match *self {
            RadialProposal::Gamma { theta } => {
                let u1: f64 = 1.0 - rng.gen::<f64>();
                let u2: f64 = 1.0 - rng.gen::<f64>();
                let s = -theta * (u1.ln() + u2.ln());
                let k = s.sqrt();
                (k, 2.0 * k.powi(3) * (-s / theta).exp() / (theta * theta))
            }
            RadialProposal::Uniform { k_max } => (k_max * (1.0 - rng.gen::<f64>()), 1.0 / k_max),
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Moments {
    n: u64,
    sum: [f64; 3],
    sumsq: [f64; 3],
}

impl Moments {
    fn merge(a: Moments, b: Moments) -> Moments {
        let mut out = Moments { n: a.n + b.n, ..Default::default() };
        for c in 0..3 {
            out.sum[c] = a.sum[c] + b.sum[c];
            out.sumsq[c] = a.sumsq[c] + b.sumsq[c];
        }
        out
    }

    fn estimate(&self, c: usize) -> McEstimate {
        let n = self.n as f64;
        let mean = self.sum[c] / n;
        let var = ((self.sumsq[c] - n * mean * mean) / (n - 1.0)).max(0.0);
        McEstimate { value: mean, std_error: (var / n).sqrt(), samples_used: self.n }
    }
}

/// Order-preserving pairwise reduction, so rounding does not depend on the
/// schedule.
fn pairwise(blocks: &[Moments]) -> Moments {
    match blocks.len() {
        0 => Moments::default(),
        1 => blocks[0],
        n => Moments::merge(pairwise(&blocks[..n / 2]), pairwise(&blocks[n / 2..])),
    }
}

fn run_block(
    sampler: &MomentumSampler<'_>,
    proposal: RadialProposal,
    z0: Option<f64>,
    seed: u64,
    block: u64,
    count: u64,
) -> Result<Moments, QuadError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    let mut m = Moments::default();
    for _ in 0..count {
        let (k, pdf) = proposal.sample(&mut rng);
        let u: f64 = 2.0 * rng.gen::<f64>() - 1.0;
        let phi: f64 = 2.0 * PI * rng.gen::<f64>();
        let weight = k * k * 4.0 * PI / pdf;
        let [vac, img] = sampler.densities(KPoint::new(k, u, phi).vector(), z0)?;
        let x = [vac * weight, img * weight, (vac + img) * weight];
        for c in 0..3 {
            m.sum[c] += x[c];
            m.sumsq[c] += x[c] * x[c];
        }
        m.n += 1;
    }
    Ok(m)
}

/// Monte Carlo estimate of `W` for the physical branch pair.
pub fn mc_w_first_principles(s: &Scenario, cfg: &McConfig) -> Result<OracleEstimate, OracleError> {
    mc_w_with_branches(s, cfg, BranchSigns::default())
}

/// Monte Carlo estimate of `W` with arbitrary branch multipliers.
pub fn mc_w_with_branches(s: &Scenario, cfg: &McConfig, branches: BranchSigns) -> Result<OracleEstimate, OracleError> {
    cfg.check().map_err(|detail| OracleError::InsufficientSamples { needed: 2, detail })?;
    let proposal = RadialProposal::for_scenario(s);
    let sampler = MomentumSampler::new(s, branches, proposal.omega_max(s));
    let z0 = s.geometry().plate().then(|| s.geometry().z0());

    let n_blocks = cfg.samples.div_ceil(BLOCK_SAMPLES);
    let work = |b: u64| {
        let count = BLOCK_SAMPLES.min(cfg.samples - b * BLOCK_SAMPLES);
        run_block(&sampler, proposal, z0, cfg.seed, b, count)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.unwrap_or(0))
        .build()
        .map_err(|e| OracleError::Pool(e.to_string()))?;
    let blocks: Vec<Moments> =
        pool.install(|| (0..n_blocks).into_par_iter().map(work).collect::<Result<Vec<_>, _>>())?;

    let all = pairwise(&blocks);
    let out = OracleEstimate { vacuum: all.estimate(0), boundary: all.estimate(1), total: all.estimate(2) };

    if blocks.len() >= 4 {
        let quarter = pairwise(&blocks[..blocks.len() / 4]).estimate(2);
        if quarter.std_error > 0.0 {
            let ratio = out.total.std_error / quarter.std_error;
            if ratio > BLOWUP_RATIO {
                return Err(OracleError::McVarianceBlowup { ratio });
            }
        }
    }
    Ok(out)
}

/// Catalogue of closed-form results.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LimitCase {
    /// Gaussian profile, no plate: `2e²v²/(3π)` with `v = R/T`.
    AdiabaticVacuum { e2: f64, speed: f64 },
    /// Coefficient of `ln(T/τ)` for the ramped trapezoid: `2e²v²/π²`.
    LogSlope { e2: f64, speed: f64 },
    /// `W_total/W_vac` at contact.
    ContactRatio { orientation: Orientation },
    /// Trapezoid vacuum value in the dipole approximation, no cutoff.
    TrapezoidVacuum { e2: f64, speed: f64, duration: f64, ramp: f64 },
    /// `C` in `W_d/W_c = C·p²/(e²T²)` for an electric dipole at angle `θ` to
    /// the motion on a Gaussian profile: `(8 − 4cos²θ)/5`.
    DipoleChargeRatio { cos2_theta: f64 },
    /// `c` in `W_total ≈ c·z0²` for a parallel charge on a Gaussian profile:
    /// `32e²v²/(15πT²)`.
    SmallDistanceCoefficient { e2: f64, speed: f64, width: f64 },
}

impl LimitCase {
    /// Looks a case up by name with positional parameters.
    pub fn parse(name: &str, params: &[f64]) -> Result<LimitCase, OracleError> {
        let need = |n: usize| {
            if params.len() == n {
                Ok(())
            } else {
                Err(OracleError::UnknownCase(format!("{name} takes {n} parameters, got {}", params.len())))
            }
        };
        match name {
            "adiabatic" => need(2).map(|_| LimitCase::AdiabaticVacuum { e2: params[0], speed: params[1] }),
            "log-slope" => need(2).map(|_| LimitCase::LogSlope { e2: params[0], speed: params[1] }),
            "contact-ratio-parallel" => need(0).map(|_| LimitCase::ContactRatio { orientation: Orientation::Parallel }),
            "contact-ratio-perpendicular" => {
                need(0).map(|_| LimitCase::ContactRatio { orientation: Orientation::Perpendicular })
            }
            "trapezoid" => need(4).map(|_| LimitCase::TrapezoidVacuum {
                e2: params[0],
                speed: params[1],
                duration: params[2],
                ramp: params[3],
            }),
            "dipole-charge-ratio" => need(1).map(|_| LimitCase::DipoleChargeRatio { cos2_theta: params[0] }),
            "small-distance" => need(3).map(|_| LimitCase::SmallDistanceCoefficient {
                e2: params[0],
                speed: params[1],
                width: params[2],
            }),
            other => Err(OracleError::UnknownCase(other.to_string())),
        }
    }
}

impl FromStr for LimitCase {
    type Err = OracleError;
    /// `name` or `name:p1,p2,...`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let params = rest
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|p| p.trim().parse::<f64>().map_err(|_| OracleError::UnknownCase(s.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        LimitCase::parse(name.trim(), &params)
    }
}

/// `½ Σ_{ij} Δa_i Δa_j d_ij² ln d_ij` over the acceleration jumps of the
/// trapezoid, times `e²/(3π²)`.
fn trapezoid_closed_form(e2: f64, v: f64, big_t: f64, tau: f64) -> f64 {
    let t = [0.0, tau, 0.5 * big_t - tau, 0.5 * big_t + tau, big_t - tau, big_t];
    let da = [1.0, -1.0, -1.0, 1.0, 1.0, -1.0].map(|s| s * v / tau);
    let mut sum = 0.0;
    for i in 0..6 {
        for j in 0..6 {
            let d = (t[i] - t[j]).abs();
            if d > 0.0 {
                sum += da[i] * da[j] * d * d * d.ln();
            }
        }
    }
    e2 / (3.0 * PI * PI) * 0.5 * sum
}

pub fn analytic_limits(case: LimitCase) -> Result<f64, OracleError> {
    Ok(match case {
        LimitCase::AdiabaticVacuum { e2, speed } => 2.0 * e2 * speed * speed / (3.0 * PI),
        LimitCase::LogSlope { e2, speed } => 2.0 * e2 * speed * speed / (PI * PI),
        LimitCase::ContactRatio { orientation } => match orientation {
            Orientation::Parallel => 0.0,
            Orientation::Perpendicular => 2.0,
            Orientation::Oblique => return Err(OracleError::UnknownCase("contact ratio for an oblique trajectory".into())),
        },
        LimitCase::TrapezoidVacuum { e2, speed, duration, ramp } => trapezoid_closed_form(e2, speed, duration, ramp),
        LimitCase::DipoleChargeRatio { cos2_theta } => (8.0 - 4.0 * cos2_theta) / 5.0,
        LimitCase::SmallDistanceCoefficient { e2, speed, width } => 32.0 * e2 * speed * speed / (15.0 * PI * width * width),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    pub min_points: usize,
    /// Minimum span of the abscissae in decades.
    pub min_decades: f64,
    /// Reduce oscillatory data to its local maxima before fitting.
    pub extract_envelope: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { min_points: 6, min_decades: 1.0, extract_envelope: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub amplitude: f64,
    /// Largest relative deviation of a fitted point from the model.
    pub residual: f64,
}

/// Local maxima of `|y|` (endpoints included when they dominate their single
/// neighbour).
fn envelope(samples: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let n = samples.len();
    (0..n)
        .filter(|&i| {
            let y = samples[i].1.abs();
            let left = i == 0 || y >= samples[i - 1].1.abs();
            let right = i + 1 == n || y >= samples[i + 1].1.abs();
            left && right
        })
        .map(|i| (samples[i].0, samples[i].1.abs()))
        .collect()
}

/// Log-log least squares of `|W|` against `x`: `|W| ≈ amplitude·x^exponent`.
pub fn fit_power_law(samples: &[(f64, f64)], opts: FitOptions) -> Result<PowerLawFit, OracleError> {
    let mut pts: Vec<(f64, f64)> = samples.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if opts.extract_envelope {
        pts = envelope(&pts);
    } else {
        let mags: Vec<f64> = pts.iter().map(|p| p.1.abs()).collect();
        let rising = mags.windows(2).all(|w| w[1] >= w[0]);
        let falling = mags.windows(2).all(|w| w[1] <= w[0]);
        if !rising && !falling {
            let index = (1..mags.len().saturating_sub(1))
                .find(|&i| (mags[i] - mags[i - 1]) * (mags[i + 1] - mags[i]) < 0.0)
                .unwrap_or(0);
            return Err(OracleError::NonMonotoneEnvelope { index });
        }
    }
    if pts.len() < opts.min_points {
        return Err(OracleError::InsufficientSamples {
            needed: opts.min_points,
            detail: format!("got {} usable points", pts.len()),
        });
    }
    if let Some(p) = pts.iter().find(|p| !(p.0 > 0.0) || p.1 == 0.0 || !p.1.is_finite()) {
        return Err(OracleError::InsufficientSamples {
            needed: opts.min_points,
            detail: format!("point ({}, {}) cannot be log-transformed", p.0, p.1),
        });
    }
    let decades = (pts[pts.len() - 1].0 / pts[0].0).log10();
    if decades < opts.min_decades - 1e-9 {
        return Err(OracleError::InsufficientSamples {
            needed: opts.min_points,
            detail: format!("abscissae span {decades:.2} decades, need {}", opts.min_decades),
        });
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.abs().ln()).collect();
    let (slope, intercept) = linear_fit(&xs, &ys);
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| ((slope * x + intercept - y).exp() - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(PowerLawFit { exponent: slope, amplitude: intercept.exp(), residual })
}

/// Leading large-distance behaviour `W_boundary ≈ amplitude·z0^exponent`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Asymptote {
    pub exponent: f64,
    pub amplitude: f64,
    /// Leading small-`k` power of the radial weight.
    pub radial_power: i32,
}

/// Large-`z0` expansion of the boundary term in the small-excursion limit.
///
/// With a radial weight `ρ(k) ≈ c·k^a` (odd `a`) and an azimuthally averaged
/// angular weight `Σ c_n u^{2n}`, the finite-part integrals
/// `∫₀^∞ k^a cos(βk) dk = a!(−1)^{(a+1)/2}/β^{a+1}` and
/// `∫ u^{2n}|u|^{−a−1} du = 2/(2n−a)` give
/// `W_B ≈ s·c·Σ c_n a!(−1)^{(a+1)/2}·2/(2n−a) / (2z0)^{a+1}`.
/// `c` and `c_n` are obtained numerically from the trajectory and the
/// projectors, not from the engine's closed forms.
pub fn large_distance_asymptote(s: &Scenario) -> Result<Asymptote, OracleError> {
    let g = s.geometry();
    let j = g.j_hat();
    let jr = reflect_geometric(j);
    let spec = s.trajectory();
    let t = spec.characteristic_time();
    let tight = crate::quadrature::QuadratureConfig { rel_tol: 1e-12, abs_tol: 0.0, ..Default::default() };

    // Position transform by direct quadrature.
    let xhat_sq = |k: f64| -> Result<f64, OracleError> {
        let mut acc = [0.0; 2];
        for (a, b) in spec.windows() {
            let n = (((b - a) * k / PI).ceil() as usize).max(((b - a) / t).ceil() as usize).max(2);
            let est = integrate_panels(
                |tt: f64| {
                    let z = Complex64::from_polar(spec.position(tt), k * tt);
                    [z.re, z.im]
                },
                &uniform_breaks(a, b, n),
                1e-13,
                0.0,
                1_000_000,
            )?;
            acc[0] += est.value[0];
            acc[1] += est.value[1];
        }
        Ok(acc[0] * acc[0] + acc[1] * acc[1])
    };

    type Weight = Box<dyn Fn(Vec3) -> f64>;
    let (rho, weight, sign): (Box<dyn Fn(f64) -> Result<f64, OracleError>>, Weight, f64) = match *s.coupling() {
        Coupling::Charge { e2 } => (
            Box::new(move |k| {
                let v = source_spectrum(spec, k, 0.0, SpectrumMode::Charge, &tight)?.value;
                Ok(e2 * k * v.norm_sqr() / (8.0 * PI.powi(3)))
            }),
            Box::new(move |n: Vec3| 1.0 - n.dot(j).powi(2)),
            -j.dot(jr),
        ),
        Coupling::Dipole { p, m } => {
            let (pp, mm) = (p.dot(reflect_electric_dipole(p)), m.dot(reflect_magnetic_dipole(m)));
            let (ph, mh) = (p.normalized().unwrap_or(Vec3::ZERO), m.normalized().unwrap_or(Vec3::ZERO));
            (
                Box::new(move |k| Ok(k.powi(5) * xhat_sq(k)? / (8.0 * PI.powi(3)))),
                Box::new(move |n: Vec3| {
                    n.dot(j).powi(2) * (pp * (1.0 - n.dot(ph).powi(2)) + mm * (1.0 - n.dot(mh).powi(2)))
                }),
                j.dot(jr),
            )
        }
    };

    let (k1, k2) = (1e-2 / t, 2e-2 / t);
    let (r1, r2) = (rho(k1)?, rho(k2)?);
    if !(r1 > 0.0 && r2 > 0.0) {
        return Err(OracleError::UnknownCase("radial weight vanishes at small k".into()));
    }
    let a = (r2 / r1).log2().round() as i32;
    if a % 2 == 0 {
        return Err(OracleError::UnknownCase(format!("even leading radial power k^{a}")));
    }
    // Richardson step removes the O(k²) correction.
    let c = (4.0 * r1 / k1.powi(a) - r2 / k2.powi(a)) / 3.0;

    // φ-averaged angular weight sampled at u² ∈ {0, ½, 1}, solved exactly.
    let avg = |u: f64| {
        let n = 64;
        let sin_t = (1.0 - u * u).max(0.0).sqrt();
        (0..n)
            .map(|i| {
                let phi = 2.0 * PI * i as f64 / n as f64;
                weight(Vec3::new(sin_t * phi.cos(), sin_t * phi.sin(), u))
            })
            .sum::<f64>()
            * 2.0
            * PI
            / n as f64
    };
    let (g0, gh, g1) = (avg(0.0), avg(0.5f64.sqrt()), avg(1.0));
    // g(u²) = c0 + c1·u² + c2·u⁴
    let c0 = g0;
    let c2 = 2.0 * (g1 - 2.0 * gh + g0);
    let c1 = g1 - c0 - c2;

    let fact: f64 = (1..=a).map(|i| i as f64).product();
    let parity = if ((a + 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
    let moment: f64 = [c0, c1, c2]
        .iter()
        .enumerate()
        .map(|(n, cn)| cn * fact * parity * 2.0 / (2 * n as i32 - a) as f64)
        .sum();
    let amplitude = sign * c * moment / 2f64.powi(a + 1);
    Ok(Asymptote { exponent: -(a + 1) as f64, amplitude, radial_power: a })
}
