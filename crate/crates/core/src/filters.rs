//! Filter functions and filtered integrals of a noise PSD.
//!
//! All integrals are over the full real line against the two-sided PSD:
//!
//! - Γ1 = ∫(t−u) C(u) cos Ωu du
//! - Δ1 = ∫(t−u) C(u) sin Ωu du
//! - Γ2 = ∫∫ C(t′−t″) cos Ω(t′+t″)
//! - Δ2 = ∫∫ C(t′−t″) sin Ω(t′+t″)
//!
//! The double integrals run over t″ < t′ < t. ΔΓ1 is the amplitude-noise
//! decay ∫∫ C_Ω(t′−t″) over the full square.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noisegen::NoisePsd;
use crate::quad::{integrate_intervals, QuadResult};

const REL_TOL: f64 = 1e-10;
const MAX_PANELS: usize = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FilteredPoint {
    /// Rabi frequency, rad/s.
    pub omega: f64,
    pub t: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub dgamma1: f64,
}

impl FilteredPoint {
    pub fn zero(omega: f64, t: f64) -> Self {
        FilteredPoint { omega, t, ..Default::default() }
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.gamma1, self.gamma2, self.delta1, self.delta2, self.dgamma1]
    }

    /// Copy with the non-Markovian integrals Γ2, Δ2 set to zero.
    pub fn markovian(&self) -> Self {
        FilteredPoint { gamma2: 0.0, delta2: 0.0, ..*self }
    }

    pub fn without_amplitude(&self) -> Self {
        FilteredPoint { dgamma1: 0.0, ..*self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilteredIntegrals {
    pub omega: f64,
    pub points: Vec<FilteredPoint>,
}

impl FilteredIntegrals {
    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }
}

fn sinc(y: f64) -> f64 {
    if y.abs() < 1e-4 {
        let y2 = y * y;
        1.0 - y2 / 6.0 + y2 * y2 / 120.0
    } else {
        y.sin() / y
    }
}

// (1 − cos xt)/x²
fn one_minus_cos_over_sq(x: f64, t: f64) -> f64 {
    let s = sinc(0.5 * x * t);
    0.5 * t * t * s * s
}

// (sin xt − xt)/x², odd and smooth in x.
fn sin_minus_lin_over_sq(x: f64, t: f64) -> f64 {
    let y = x * t;
    if y.abs() < 1e-2 {
        let y2 = y * y;
        t * t * y * (-1.0 / 6.0 + y2 * (1.0 / 120.0 - y2 / 5040.0))
    } else {
        (y.sin() - y) / (x * x)
    }
}

/// Decay filter (1/4π)[(1−cos(ω−Ω)t)/(ω−Ω)² + (1−cos(ω+Ω)t)/(ω+Ω)²].
///
/// Equivalently (t/4)(η(Ω−ω) + η(Ω+ω)) with η_ε(x) = ε sin²(x/ε)/(πx²), ε = 2/t.
pub fn filter_gamma1(omega: f64, rabi: f64, t: f64) -> f64 {
    (one_minus_cos_over_sq(omega - rabi, t) + one_minus_cos_over_sq(omega + rabi, t)) / (4.0 * PI)
}

/// Coherent filter Ωt/(2π(Ω²−ω²)) + (1/4π)[sin(ω−Ω)t/(ω−Ω)² − sin(ω+Ω)t/(ω+Ω)²].
///
/// The poles at ω = ±Ω cancel; the grouping below is free of them.
pub fn filter_delta1(omega: f64, rabi: f64, t: f64) -> f64 {
    (sin_minus_lin_over_sq(omega - rabi, t) - sin_minus_lin_over_sq(omega + rabi, t)) / (4.0 * PI)
}

// (cos Ωt − cos ωt)/(ω² − Ω²), written with two sincs.
fn cos_difference_kernel(omega: f64, rabi: f64, t: f64) -> f64 {
    0.5 * t * t * sinc(0.5 * (omega - rabi) * t) * sinc(0.5 * (omega + rabi) * t)
}

/// cos Ωt (cos Ωt − cos ωt) / (2π(ω² − Ω²)).
pub fn filter_gamma2(omega: f64, rabi: f64, t: f64) -> f64 {
    (rabi * t).cos() * cos_difference_kernel(omega, rabi, t) / (2.0 * PI)
}

/// sin Ωt (cos Ωt − cos ωt) / (2π(ω² − Ω²)).
pub fn filter_delta2(omega: f64, rabi: f64, t: f64) -> f64 {
    (rabi * t).sin() * cos_difference_kernel(omega, rabi, t) / (2.0 * PI)
}

/// Amplitude-noise filter (1 − cos ωt)/(πω²) = t·η_{2/t}(ω).
pub fn filter_amplitude(omega: f64, t: f64) -> f64 {
    one_minus_cos_over_sq(omega, t) / PI
}

/// Slowly varying envelope g(ω) of a term g(ω) cos(ωt + φ).
struct OscTerm {
    component: usize,
    phase: f64,
    envelope: Box<dyn Fn(f64) -> f64>,
}

// Large-ω decomposition F = P(ω) + Σ g(ω) cos(ωt+φ) of the five filters.
fn tail_parts(rabi: f64, t: f64) -> (impl Fn(f64) -> [f64; 5], Vec<OscTerm>) {
    let (s, c) = (rabi * t).sin_cos();
    let smooth = move |w: f64| {
        let xm = w - rabi;
        let xp = w + rabi;
        [
            (1.0 / (xm * xm) + 1.0 / (xp * xp)) / (4.0 * PI),
            c * c / (2.0 * PI * xp * xm),
            t * (1.0 / xp - 1.0 / xm) / (4.0 * PI),
            s * c / (2.0 * PI * xp * xm),
            1.0 / (PI * w * w),
        ]
    };
    let minus = -rabi * t;
    let plus = rabi * t;
    let half_pi = 0.5 * PI;
    let terms = vec![
        OscTerm { component: 0, phase: minus, envelope: Box::new(move |w| -1.0 / (4.0 * PI * (w - rabi).powi(2))) },
        OscTerm { component: 0, phase: plus, envelope: Box::new(move |w| -1.0 / (4.0 * PI * (w + rabi).powi(2))) },
        OscTerm { component: 1, phase: 0.0, envelope: Box::new(move |w| -c / (2.0 * PI * (w * w - rabi * rabi))) },
        OscTerm {
            component: 2,
            phase: minus - half_pi,
            envelope: Box::new(move |w| 1.0 / (4.0 * PI * (w - rabi).powi(2))),
        },
        OscTerm {
            component: 2,
            phase: plus - half_pi,
            envelope: Box::new(move |w| -1.0 / (4.0 * PI * (w + rabi).powi(2))),
        },
        OscTerm { component: 3, phase: 0.0, envelope: Box::new(move |w| -s / (2.0 * PI * (w * w - rabi * rabi))) },
        OscTerm { component: 4, phase: 0.0, envelope: Box::new(move |w| -1.0 / (PI * w * w)) },
    ];
    (smooth, terms)
}

// ∫_X^∞ h(ω) cos(ωt+φ) dω for slowly varying h, by repeated integration by parts.
fn oscillatory_tail(h: impl Fn(f64) -> f64, x: f64, t: f64, phase: f64) -> f64 {
    let d = 1e-3 * x;
    let (hm, h0, hp) = (h(x - d), h(x), h(x + d));
    let h1 = (hp - hm) / (2.0 * d);
    let h2 = (hp - 2.0 * h0 + hm) / (d * d);
    let (sn, cs) = (x * t + phase).sin_cos();
    -h0 * sn / t - h1 * cs / (t * t) + h2 * sn / (t * t * t)
}

/// Raw quadrature result with the L1 scale of each integrand.
#[derive(Debug, Clone, Copy)]
pub struct FilteredQuadrature {
    pub point: FilteredPoint,
    pub error: [f64; 5],
    pub abs: [f64; 5],
}

/// Filtered integrals at one time, with error estimates.
pub fn filtered_point_detailed(
    psd: &NoisePsd,
    amp_psd: Option<&NoisePsd>,
    rabi: f64,
    t: f64,
) -> Result<FilteredQuadrature> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("time must be finite and >= 0, got {t}")));
    }
    if !(rabi >= 0.0 && rabi.is_finite()) {
        return Err(Error::InvalidInput(format!("Rabi frequency must be finite and >= 0, got {rabi}")));
    }
    let amp = amp_psd.filter(|p| !p.is_zero());
    let zero = FilteredQuadrature { point: FilteredPoint::zero(rabi, t), error: [0.0; 5], abs: [0.0; 5] };
    if t == 0.0 || (psd.is_zero() && amp.is_none()) {
        return Ok(zero);
    }
    let amp_scale = amp.map_or(0.0, |p| p.scale());
    let x_max = (8.0 * rabi.max(psd.scale()).max(amp_scale)).max(400.0 / t);

    let mut cuts = vec![0.0, x_max];
    if rabi < x_max {
        cuts.push(rabi);
    }
    for b in psd.breakpoints().into_iter().chain(amp.map(|p| p.breakpoints()).unwrap_or_default()) {
        if b < x_max {
            cuts.push(b);
        }
    }
    let width = PI / t;
    let n_uniform = (x_max / width).ceil() as usize;
    cuts.extend((1..n_uniform).map(|k| k as f64 * width));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let intervals: Vec<(f64, f64)> = cuts.windows(2).map(|w| (w[0], w[1])).collect();

    let integrand = |w: f64| {
        let s = psd.eval(w);
        let sa = amp.map_or(0.0, |p| p.eval(w));
        [
            2.0 * s * filter_gamma1(w, rabi, t),
            2.0 * s * filter_gamma2(w, rabi, t),
            2.0 * s * filter_delta1(w, rabi, t),
            2.0 * s * filter_delta2(w, rabi, t),
            2.0 * sa * filter_amplitude(w, t),
        ]
    };
    let body: QuadResult<5> = integrate_intervals(integrand, &intervals, REL_TOL, 0.0, MAX_PANELS)?;

    let (smooth, osc) = tail_parts(rabi, t);
    let density = |k: usize, w: f64| if k == 4 { amp.map_or(0.0, |p| p.eval(w)) } else { psd.eval(w) };
    let tail_smooth: QuadResult<5> = integrate_intervals(
        |u: f64| {
            let w = x_max / u;
            let jac = 2.0 * x_max / (u * u);
            let p = smooth(w);
            let mut out = [0.0; 5];
            for k in 0..5 {
                out[k] = jac * density(k, w) * p[k];
            }
            out
        },
        &[(0.0, 0.5), (0.5, 1.0)],
        1e-12,
        0.0,
        100_000,
    )?;
    let mut value = [0.0; 5];
    let mut error = [0.0; 5];
    let mut abs = [0.0; 5];
    for k in 0..5 {
        value[k] = body.value[k] + tail_smooth.value[k];
        error[k] = body.error[k] + tail_smooth.error[k];
        abs[k] = body.abs[k] + tail_smooth.abs[k];
    }
    for term in &osc {
        let k = term.component;
        let v = 2.0 * oscillatory_tail(|w| density(k, w) * (term.envelope)(w), x_max, t, term.phase);
        value[k] += v;
        abs[k] += v.abs();
    }
    if value.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure(format!("non-finite filtered integral at t={t}, Ω={rabi}")));
    }
    let point = FilteredPoint {
        omega: rabi,
        t,
        gamma1: value[0],
        gamma2: value[1],
        delta1: value[2],
        delta2: value[3],
        dgamma1: value[4],
    };
    Ok(FilteredQuadrature { point, error, abs })
}

pub fn filtered_point(psd: &NoisePsd, amp_psd: Option<&NoisePsd>, rabi: f64, t: f64) -> Result<FilteredPoint> {
    filtered_point_detailed(psd, amp_psd, rabi, t).map(|q| q.point)
}

/// Filtered integrals on a time grid, evaluated in parallel.
pub fn filtered_integrals(
    psd: &NoisePsd,
    amp_psd: Option<&NoisePsd>,
    rabi: f64,
    times: &[f64],
) -> Result<FilteredIntegrals> {
    psd.validate()?;
    if let Some(a) = amp_psd {
        a.validate()?;
    }
    let points = times
        .par_iter()
        .map(|&t| filtered_point(psd, amp_psd, rabi, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(FilteredIntegrals { omega: rabi, points })
}

/// Closed-form OU integrals, the reference for the quadrature path.
pub fn ou_closed_form(c: f64, tau: f64, rabi: f64, t: f64) -> FilteredPoint {
    let s = c * tau * tau / (1.0 + (rabi * tau).powi(2));
    let a = rabi * tau;
    let e = (-t / tau).exp();
    let (sn, cs) = (rabi * t).sin_cos();
    let q = 1.0 + a * a;
    // sin(Ωt)/Ω, finite as Ω → 0.
    let sin_over = if rabi == 0.0 { t } else { sn / rabi };
    FilteredPoint {
        omega: rabi,
        t,
        gamma1: 0.5 * s * (t - tau * 2.0 * a / q * e * sn - tau * (1.0 - a * a) / q * (1.0 - e * cs)),
        gamma2: 0.5 * s * cs * (sin_over - tau * cs + tau * e),
        delta1: 0.5 * s * (t * a + tau * (1.0 - a * a) / q * e * sn - tau * 2.0 * a / q * (1.0 - e * cs)),
        delta2: 0.5 * s * sn * (sin_over - tau * cs + tau * e),
        dgamma1: 0.0,
    }
}

/// ΔΓ1 for an OU amplitude-noise process.
pub fn ou_amplitude_closed_form(c: f64, tau: f64, t: f64) -> f64 {
    c * tau * tau * (t - tau * (-(t / tau)).exp_m1().abs())
}

/// Time-local kernels (γ1, γ2, δ1, δ2, δγ1) at time s.
///
/// These are the rates whose time integrals are the filtered integrals:
/// γ1 = ∫₀ˢ C(u) cos Ωu du, γ2 = ∫₀ˢ C(u) cos Ω(2s−u) du, and likewise for
/// the δ's with sines, and δγ1 = 2∫₀ˢ C_Ω(u) du.
pub fn kernels(
    autocov: &(dyn Fn(f64) -> f64 + Sync),
    amp_autocov: Option<&(dyn Fn(f64) -> f64 + Sync)>,
    rabi: f64,
    s: f64,
) -> Result<[f64; 5]> {
    if s <= 0.0 {
        return Ok([0.0; 5]);
    }
    let n = ((rabi * s / PI).ceil() as usize).clamp(1, 100_000);
    let intervals: Vec<(f64, f64)> =
        (0..n).map(|k| (s * k as f64 / n as f64, s * (k + 1) as f64 / n as f64)).collect();
    let res = integrate_intervals(
        |u| {
            let cu = autocov(u);
            let (sa, ca) = (rabi * u).sin_cos();
            let (sb, cb) = (rabi * (2.0 * s - u)).sin_cos();
            let ca_amp = amp_autocov.map_or(0.0, |f| 2.0 * f(u));
            [cu * ca, cu * cb, cu * sa, cu * sb, ca_amp]
        },
        &intervals,
        1e-13,
        0.0,
        1_000_000,
    )?;
    Ok(res.value)
}

/// Nested time-domain evaluation of the filtered integrals.
///
/// Kernels are integrated over each grid interval and accumulated, so the
/// grid may be arbitrary. This path is independent of the frequency domain.
pub fn filtered_integrals_timedomain(
    autocov: &(dyn Fn(f64) -> f64 + Sync),
    amp_autocov: Option<&(dyn Fn(f64) -> f64 + Sync)>,
    rabi: f64,
    times: &[f64],
) -> Result<FilteredIntegrals> {
    if times.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::InvalidInput("times must be >= 0".into()));
    }
    let mut sorted: Vec<f64> = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut edges = vec![0.0];
    edges.extend(sorted.iter().copied().filter(|&t| t > 0.0));
    let pieces = edges
        .par_windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let n = ((rabi * (b - a) / PI).ceil() as usize).clamp(1, 100_000);
            let intervals: Vec<(f64, f64)> =
                (0..n).map(|k| (a + (b - a) * k as f64 / n as f64, a + (b - a) * (k + 1) as f64 / n as f64)).collect();
            let mut failure = None;
            let res = integrate_intervals(
                |s| match kernels(autocov, amp_autocov, rabi, s) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.get_or_insert(e);
                        [0.0; 5]
                    }
                },
                &intervals,
                1e-11,
                0.0,
                100_000,
            )?;
            match failure {
                Some(e) => Err(e),
                None => Ok(res.value),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut acc = [0.0; 5];
    let mut table = vec![(0.0, acc)];
    for (piece, &t) in pieces.iter().zip(&edges[1..]) {
        for k in 0..5 {
            acc[k] += piece[k];
        }
        table.push((t, acc));
    }
    let points = times
        .iter()
        .map(|&t| {
            let idx = table.iter().position(|(tt, _)| *tt == t).unwrap();
            let v = table[idx].1;
            FilteredPoint { omega: rabi, t, gamma1: v[0], gamma2: v[1], delta1: v[2], delta2: v[3], dgamma1: v[4] }
        })
        .collect();
    Ok(FilteredIntegrals { omega: rabi, points })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eta(eps: f64, x: f64) -> f64 {
        if x == 0.0 {
            1.0 / (PI * eps)
        } else {
            eps / (PI * x * x) * (x / eps).sin().powi(2)
        }
    }

    #[test]
    fn gamma1_matches_eta_form() {
        let (rabi, t) = (3.0, 2.5);
        for &w in &[0.0, 0.7, 2.9, 3.0, 3.1, 9.0, -4.0] {
            let expect = t / 4.0 * (eta(2.0 / t, rabi - w) + eta(2.0 / t, rabi + w));
            assert!((filter_gamma1(w, rabi, t) - expect).abs() < 1e-12 * expect.abs().max(1.0));
        }
    }

    #[test]
    fn delta1_matches_raw_form_away_from_poles() {
        let (rabi, t) = (3.0, 2.5);
        for &w in &[0.0, 0.7, 2.5, 3.6, 9.0, -4.0] {
            let raw = rabi * t / (2.0 * PI * (rabi * rabi - w * w))
                + ((w - rabi) * t).sin() / (4.0 * PI * (w - rabi).powi(2))
                - ((w + rabi) * t).sin() / (4.0 * PI * (w + rabi).powi(2));
            assert!((filter_delta1(w, rabi, t) - raw).abs() < 1e-11);
        }
        // Continuous through the removable singularity.
        let a = filter_delta1(3.0 - 1e-7, rabi, t);
        let b = filter_delta1(3.0, rabi, t);
        assert!((a - b).abs() < 1e-6);
    }

    #[test]
    fn gamma2_delta2_forms() {
        let (rabi, t) = (2.0f64, 1.3f64);
        for &w in &[0.0f64, 0.5, 3.0, 7.0] {
            let raw = ((rabi * t).cos() - (w * t).cos()) / (2.0 * PI * (w * w - rabi * rabi));
            assert!((filter_gamma2(w, rabi, t) - (rabi * t).cos() * raw).abs() < 1e-12);
            assert!((filter_delta2(w, rabi, t) - (rabi * t).sin() * raw).abs() < 1e-12);
        }
        assert_eq!(filter_gamma2(1.0, 2.0, 0.0), 0.0);
        assert!(filter_gamma2(1.7, 2.0, PI / 4.0).abs() < 1e-16);
    }

    #[test]
    fn amplitude_filter_at_zero() {
        let t = 0.3;
        assert!((filter_amplitude(0.0, t) - t * t / (2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn zero_psd_gives_zero() {
        let p = filtered_point(&NoisePsd::Zero, None, 3.0, 1.0).unwrap();
        assert_eq!(p.as_array(), [0.0; 5]);
    }

    #[test]
    fn ou_quadrature_matches_closed_form() {
        let (c, tau) = (1.6e9, 5e-4);
        let psd = NoisePsd::Ou { c, tau };
        for &(a, s) in &[(0.5, 3.0), (2.0, 10.0), (10.0, 1.3)] {
            let rabi = a / tau;
            let t = s * tau;
            let q = filtered_point(&psd, None, rabi, t).unwrap();
            let e = ou_closed_form(c, tau, rabi, t);
            for (x, y) in q.as_array().iter().zip(e.as_array()).take(4) {
                assert!((x - y).abs() <= 1e-8 * y.abs(), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn amplitude_closed_form() {
        let (c, tau, t) = (2e8, 5e-4, 3e-3);
        let psd = NoisePsd::Ou { c, tau };
        let q = filtered_point(&NoisePsd::Zero, Some(&psd), 100.0, t).unwrap();
        let e = ou_amplitude_closed_form(c, tau, t);
        assert!((q.dgamma1 - e).abs() < 1e-8 * e);
    }
}
