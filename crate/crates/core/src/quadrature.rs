//! Adaptive Gauss–Kronrod integration for the radial, angular and time
//! integrals, plus the small least-squares fits used on sweeps.
//!
//! The driver is a global-priority bisection scheme: every panel carries a
//! 21-point Kronrod estimate and a QUADPACK-style error, and the panel with
//! the largest scaled error is split until all components meet tolerance.
//! Vector-valued integrands are supported so that several integrals sharing
//! one expensive spectrum can be refined together.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::fmt::Debug;

use num_complex::Complex64;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Hard radial cutoff. Required when the spectrum decays only
    /// algebraically; when set it is honoured for every trajectory.
    pub k_max: Option<f64>,
    /// Upper bound on the number of panels a single integral may use.
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            rel_tol: 1e-6,
            abs_tol: 1e-12,
            k_max: None,
            max_subdivisions: 4_000_000,
        }
    }
}

impl QuadratureConfig {
    pub fn check(&self) -> Result<(), String> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(format!("rel_tol = {} must lie in (0, 1)", self.rel_tol));
        }
        if !(self.abs_tol >= 0.0) {
            return Err(format!("abs_tol = {} must be non-negative", self.abs_tol));
        }
        if let Some(k) = self.k_max {
            if !(k > 0.0 && k.is_finite()) {
                return Err(format!("k_max = {k} must be positive"));
            }
        }
        if self.max_subdivisions < 16 {
            return Err("max_subdivisions must be at least 16".into());
        }
        Ok(())
    }

    /// Same settings with both tolerances scaled by `factor`.
    pub fn tightened(&self, factor: f64) -> Self {
        QuadratureConfig {
            rel_tol: self.rel_tol * factor,
            abs_tol: self.abs_tol * factor,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum QuadError {
    #[error("quadrature failed to reach tolerance: {reason} (error {err:e} after {panels} panels)")]
    QuadratureFailure { reason: String, err: f64, panels: usize },
    #[error("integrand decays algebraically; a radial cutoff k_max is required")]
    CutoffRequired,
    #[error("need at least {needed} samples spanning {decades} decades: {detail}")]
    InsufficientSpan { needed: usize, decades: f64, detail: String },
    #[error("non-finite integrand value at x = {x}")]
    NonFinite { x: f64 },
}

/// Values the integrator can accumulate: a fixed number of real components.
pub trait QuadValue: Copy + Send + Sync + Debug {
    const DIM: usize;
    fn zero() -> Self;
    fn add(self, other: Self) -> Self;
    fn scale(self, s: f64) -> Self;
    fn get(&self, i: usize) -> f64;
    fn set(&mut self, i: usize, v: f64);

    fn is_finite(&self) -> bool {
        (0..Self::DIM).all(|i| self.get(i).is_finite())
    }

    fn max_abs(&self) -> f64 {
        (0..Self::DIM).map(|i| self.get(i).abs()).fold(0.0, f64::max)
    }
}

impl QuadValue for f64 {
    const DIM: usize = 1;
    fn zero() -> Self {
        0.0
    }
    fn add(self, other: Self) -> Self {
        self + other
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn get(&self, _: usize) -> f64 {
        *self
    }
    fn set(&mut self, _: usize, v: f64) {
        *self = v;
    }
}

impl QuadValue for Complex64 {
    const DIM: usize = 2;
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn add(self, other: Self) -> Self {
        self + other
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn get(&self, i: usize) -> f64 {
        if i == 0 {
            self.re
        } else {
            self.im
        }
    }
    fn set(&mut self, i: usize, v: f64) {
        if i == 0 {
            self.re = v
        } else {
            self.im = v
        }
    }
}

impl<const N: usize> QuadValue for [f64; N] {
    const DIM: usize = N;
    fn zero() -> Self {
        [0.0; N]
    }
    fn add(mut self, other: Self) -> Self {
        for (a, b) in self.iter_mut().zip(other) {
            *a += b;
        }
        self
    }
    fn scale(mut self, s: f64) -> Self {
        for a in self.iter_mut() {
            *a *= s;
        }
        self
    }
    fn get(&self, i: usize) -> f64 {
        self[i]
    }
    fn set(&mut self, i: usize, v: f64) {
        self[i] = v;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegralEstimate<V> {
    pub value: V,
    /// Absolute error estimate per component.
    pub err_est: V,
    pub evaluations: usize,
    pub truncation_note: Option<String>,
}

impl<V: QuadValue> IntegralEstimate<V> {
    pub fn max_err(&self) -> f64 {
        self.err_est.max_abs()
    }
}

// 21-point Kronrod abscissae (descending, centre last) and weights, with the
// embedded 10-point Gauss weights for the odd-indexed abscissae.
const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208091337163,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

const MAX_DIM: usize = 8;

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        scaled = scaled.max(50.0 * f64::EPSILON * res_abs);
    }
    scaled
}

#[derive(Clone, Copy, Debug)]
struct Panel<V> {
    a: f64,
    b: f64,
    value: V,
    err: [f64; MAX_DIM],
    l1: [f64; MAX_DIM],
}

fn gk21<V: QuadValue, F: FnMut(f64) -> V>(f: &mut F, a: f64, b: f64) -> Result<Panel<V>, QuadError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let habs = half.abs();

    let mut fv = [V::zero(); 21];
    fv[10] = f(center);
    for j in 0..10 {
        let dx = half * XGK[j];
        fv[j] = f(center - dx);
        fv[20 - j] = f(center + dx);
    }
    for (j, v) in fv.iter().enumerate() {
        if !v.is_finite() {
            let x = if j <= 10 { center - half * XGK[j] } else { center + half * XGK[20 - j] };
            return Err(QuadError::NonFinite { x });
        }
    }

    let mut value = V::zero();
    let mut err = [0.0; MAX_DIM];
    let mut l1 = [0.0; MAX_DIM];
    for c in 0..V::DIM {
        let fc = fv[10].get(c);
        let mut kron = WGK[10] * fc;
        let mut gauss = 0.0;
        let mut res_abs = WGK[10] * fc.abs();
        for j in 0..10 {
            let f1 = fv[j].get(c);
            let f2 = fv[20 - j].get(c);
            kron += WGK[j] * (f1 + f2);
            res_abs += WGK[j] * (f1.abs() + f2.abs());
            if j % 2 == 1 {
                gauss += WG[j / 2] * (f1 + f2);
            }
        }
        let mean = 0.5 * kron;
        let mut res_asc = WGK[10] * (fc - mean).abs();
        for j in 0..10 {
            res_asc += WGK[j] * ((fv[j].get(c) - mean).abs() + (fv[20 - j].get(c) - mean).abs());
        }
        value.set(c, kron * half);
        err[c] = rescale_error((kron - gauss) * half, res_abs * habs, res_asc * habs);
        l1[c] = res_abs * habs;
    }
    Ok(Panel { a, b, value, err, l1 })
}

struct Ranked<V> {
    priority: f64,
    panel: Panel<V>,
}

impl<V> PartialEq for Ranked<V> {
    fn eq(&self, other: &Self) -> bool {
        self.priority.total_cmp(&other.priority) == Ordering::Equal
    }
}
impl<V> Eq for Ranked<V> {}
impl<V> PartialOrd for Ranked<V> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<V> Ord for Ranked<V> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority.total_cmp(&other.priority)
    }
}

/// Tolerance a component must meet. The `l1` floor stops the driver from
/// chasing digits lost to cancellation between positive and negative lobes.
fn component_tol(rel: f64, abs: f64, value: f64, l1: f64) -> f64 {
    abs.max(rel * value.abs()).max(1e3 * f64::EPSILON * l1)
}

/// Adaptive integration over consecutive intervals of `breaks`.
pub fn integrate_panels<V, F>(
    mut f: F,
    breaks: &[f64],
    rel_tol: f64,
    abs_tol: f64,
    max_panels: usize,
) -> Result<IntegralEstimate<V>, QuadError>
where
    V: QuadValue,
    F: FnMut(f64) -> V,
{
    assert!(V::DIM <= MAX_DIM);
    assert!(breaks.len() >= 2, "need at least one interval");

    let mut evaluations = 0usize;
    let mut panels = Vec::with_capacity(breaks.len() - 1);
    for w in breaks.windows(2) {
        panels.push(gk21(&mut f, w[0], w[1])?);
        evaluations += 21;
    }

    let totals = |items: &mut dyn Iterator<Item = &Panel<V>>| {
        let mut value = V::zero();
        let mut err = [0.0; MAX_DIM];
        let mut l1 = [0.0; MAX_DIM];
        for p in items {
            value = value.add(p.value);
            for c in 0..V::DIM {
                err[c] += p.err[c];
                l1[c] += p.l1[c];
            }
        }
        (value, err, l1)
    };

    let (mut value, mut err, mut l1) = totals(&mut panels.iter());
    let mut weight = [0.0; MAX_DIM];
    for c in 0..V::DIM {
        let t = component_tol(rel_tol, abs_tol, value.get(c), l1[c]);
        weight[c] = if t > 0.0 { 1.0 / t } else { f64::MAX };
    }
    let rank = |p: &Panel<V>| {
        (0..V::DIM)
            .map(|c| (p.err[c] * weight[c]).min(f64::MAX))
            .fold(0.0, f64::max)
    };

    let mut heap: BinaryHeap<Ranked<V>> = panels
        .into_iter()
        .map(|panel| Ranked { priority: rank(&panel), panel })
        .collect();

    let converged = |value: &V, err: &[f64; MAX_DIM], l1: &[f64; MAX_DIM]| {
        (0..V::DIM).all(|c| err[c] <= component_tol(rel_tol, abs_tol, value.get(c), l1[c]))
    };

    let mut since_resum = 0usize;
    while !converged(&value, &err, &l1) {
        if heap.len() >= max_panels {
            return Err(QuadError::QuadratureFailure {
                reason: "subdivision budget exhausted".into(),
                err: err[..V::DIM].iter().copied().fold(0.0, f64::max),
                panels: heap.len(),
            });
        }
        let worst = heap.pop().expect("heap is never empty").panel;
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a.min(worst.b) && mid < worst.a.max(worst.b)) {
            return Err(QuadError::QuadratureFailure {
                reason: format!("panel at {} cannot be split further", worst.a),
                err: err[..V::DIM].iter().copied().fold(0.0, f64::max),
                panels: heap.len() + 1,
            });
        }
        let left = gk21(&mut f, worst.a, mid)?;
        let right = gk21(&mut f, mid, worst.b)?;
        evaluations += 42;

        value = value.add(worst.value.scale(-1.0)).add(left.value).add(right.value);
        for c in 0..V::DIM {
            err[c] += left.err[c] + right.err[c] - worst.err[c];
            l1[c] += left.l1[c] + right.l1[c] - worst.l1[c];
        }
        heap.push(Ranked { priority: rank(&left), panel: left });
        heap.push(Ranked { priority: rank(&right), panel: right });

        since_resum += 1;
        if since_resum >= 4096 {
            since_resum = 0;
            (value, err, l1) = totals(&mut heap.iter().map(|r| &r.panel));
        }
    }

    // Final sums in a fixed order so the result does not depend on the
    // running-update history.
    let mut done: Vec<Panel<V>> = heap.into_iter().map(|r| r.panel).collect();
    done.sort_by(|p, q| p.a.total_cmp(&q.a));
    let (value, err, _) = totals(&mut done.iter());
    let mut err_est = V::zero();
    for (c, e) in err.iter().enumerate().take(V::DIM) {
        err_est.set(c, *e);
    }
    Ok(IntegralEstimate { value, err_est, evaluations, truncation_note: None })
}

/// Uniform break points over `[a, b]` with `n` intervals.
pub fn uniform_breaks(a: f64, b: f64, n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..=n)
        .map(|i| if i == n { b } else { a + (b - a) * i as f64 / n as f64 })
        .collect()
}

/// Number of panels giving roughly two per oscillation of `e^{i k t}` with
/// `t` up to `osc_time`, over a `k` interval of length `len`.
fn panels_for(len: f64, osc_time: f64, min: usize) -> usize {
    let n = (len * osc_time / PI).ceil();
    if n.is_finite() {
        (n as usize).max(min)
    } else {
        min
    }
}

/// How the radial integrand behaves at large `k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpectralDecay {
    /// Gaussian-type decay on the wavenumber scale `1/scale`, beyond a
    /// spectral peak at `peak` (0 for baseband sources).
    Exponential { scale: f64, peak: f64 },
    /// Power-law decay; a cutoff is mandatory.
    Algebraic,
}

/// Integral over `k ∈ (0, ∞)` or `(0, k_max)`.
///
/// `osc_time` is the largest time separation appearing as a phase `e^{ikt}`
/// in the integrand (0 for non-oscillatory integrands); it seeds the initial
/// partition so that fast oscillations are not aliased away.
pub fn integrate_radial<V, F>(
    mut f: F,
    decay: SpectralDecay,
    osc_time: f64,
    cfg: &QuadratureConfig,
) -> Result<IntegralEstimate<V>, QuadError>
where
    V: QuadValue,
    F: FnMut(f64) -> V,
{
    if let Some(k_max) = cfg.k_max {
        let n = panels_for(k_max, osc_time, 8);
        if n > cfg.max_subdivisions {
            return Err(QuadError::QuadratureFailure {
                reason: format!("{n} initial panels needed to resolve oscillations up to k_max = {k_max}"),
                err: f64::INFINITY,
                panels: 0,
            });
        }
        let mut est = integrate_panels(f, &uniform_breaks(0.0, k_max, n), cfg.rel_tol, cfg.abs_tol, cfg.max_subdivisions)?;
        est.truncation_note = Some(format!("hard cutoff at k_max = {k_max}"));
        return Ok(est);
    }

    let (scale, peak) = match decay {
        SpectralDecay::Algebraic => return Err(QuadError::CutoffRequired),
        SpectralDecay::Exponential { scale, peak } => (scale, peak),
    };

    let mut lo = 0.0;
    let mut hi = peak.max(0.0) + 8.0 / scale;
    let mut value = V::zero();
    let mut err = V::zero();
    let mut evaluations = 0;
    for _ in 0..24 {
        let n = panels_for(hi - lo, osc_time, 4);
        let piece = integrate_panels(&mut f, &uniform_breaks(lo, hi, n), cfg.rel_tol, cfg.abs_tol, cfg.max_subdivisions)?;
        evaluations += piece.evaluations;
        value = value.add(piece.value);
        err = err.add(piece.err_est);
        let negligible = (0..V::DIM).all(|c| {
            let tol = component_tol(cfg.rel_tol, cfg.abs_tol, value.get(c), 0.0);
            piece.value.get(c).abs() <= 0.1 * tol || piece.value.get(c) == 0.0
        });
        if negligible && lo > 0.0 {
            return Ok(IntegralEstimate {
                value,
                err_est: err,
                evaluations,
                truncation_note: Some(format!("tail truncated at k = {hi}")),
            });
        }
        lo = hi;
        hi *= 2.0;
    }
    Err(QuadError::QuadratureFailure {
        reason: "tail did not decay while doubling the radial domain".into(),
        err: err.max_abs(),
        panels: 0,
    })
}

/// Symmetry of an angular integrand `f(u, φ)`, `u = cos θ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AngularSymmetry {
    None,
    /// Independent of `φ`.
    Azimuthal,
    /// Even in `u`, and invariant under `φ → −φ` and `φ → π − φ`.
    Quadrant,
}

/// `∫_{-1}^{1} du ∫_0^{2π} dφ f(u, φ)`.
///
/// The `u` axis is pre-split into at least four panels per period `2π/β`.
pub fn integrate_angular<V, F>(
    mut f: F,
    beta: f64,
    symmetry: AngularSymmetry,
    cfg: &QuadratureConfig,
) -> Result<IntegralEstimate<V>, QuadError>
where
    V: QuadValue,
    F: FnMut(f64, f64) -> V,
{
    let (u_lo, u_factor, phi_hi, phi_factor) = match symmetry {
        AngularSymmetry::None => (-1.0, 1.0, 2.0 * PI, 1.0),
        AngularSymmetry::Azimuthal => (-1.0, 1.0, 0.0, 2.0 * PI),
        AngularSymmetry::Quadrant => (0.0, 2.0, 0.5 * PI, 4.0),
    };
    let periods = (1.0 - u_lo) * beta.abs() / (2.0 * PI);
    let n_u = ((4.0 * periods).ceil() as usize).max(2);
    let inner = cfg.tightened(0.1);

    let mut failure = None;
    let mut evaluations = 0usize;
    let outer = integrate_panels(
        |u| {
            if failure.is_some() {
                return V::zero();
            }
            if phi_hi == 0.0 {
                evaluations += 1;
                return f(u, 0.0);
            }
            match integrate_panels(|phi| f(u, phi), &uniform_breaks(0.0, phi_hi, 2), inner.rel_tol, inner.abs_tol, inner.max_subdivisions) {
                Ok(est) => {
                    evaluations += est.evaluations;
                    est.value
                }
                Err(e) => {
                    failure = Some(e);
                    V::zero()
                }
            }
        },
        &uniform_breaks(u_lo, 1.0, n_u),
        cfg.rel_tol,
        cfg.abs_tol,
        cfg.max_subdivisions,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let outer = outer?;
    let factor = u_factor * phi_factor;
    Ok(IntegralEstimate {
        value: outer.value.scale(factor),
        err_est: outer.err_est.scale(factor),
        evaluations,
        truncation_note: None,
    })
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on
/// `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Least-squares line `y = slope·x + intercept`.
pub(crate) fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogFit {
    /// Coefficient of `ln(T/τ)`.
    pub slope: f64,
    pub intercept: f64,
    /// Largest relative deviation of a sample from the fitted line.
    pub residual: f64,
}

/// Fit `W = slope·ln(T/τ) + intercept` to ramp-regularized samples.
pub fn regularized_log_fit(samples: &[(f64, f64)], duration: f64) -> Result<LogFit, QuadError> {
    let span_err = |detail: String| QuadError::InsufficientSpan { needed: 5, decades: 2.0, detail };
    if samples.len() < 5 {
        return Err(span_err(format!("got {} samples", samples.len())));
    }
    if let Some((tau, _)) = samples.iter().find(|(tau, _)| !(*tau > 0.0 && tau / duration <= 0.02)) {
        return Err(span_err(format!("tau/T = {} outside (0, 0.02]", tau / duration)));
    }
    let xs: Vec<f64> = samples.iter().map(|(tau, _)| (duration / tau).ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if (hi - lo) / std::f64::consts::LN_10 < 2.0 - 1e-9 {
        return Err(span_err(format!("T/tau spans only {:.2} decades", (hi - lo) / std::f64::consts::LN_10)));
    }
    let (slope, intercept) = linear_fit(&xs, &ys);
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let fit = slope * x + intercept;
            if *y == 0.0 {
                (fit - y).abs()
            } else {
                ((fit - y) / y).abs()
            }
        })
        .fold(0.0, f64::max);
    Ok(LogFit { slope, intercept, residual })
}
