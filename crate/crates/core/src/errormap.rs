//! Analytic error channels built from filtered integrals.
//!
//! The physical evolution is `ρ(t) = U Λ(ρ0) U†` with `U = exp(−iΩtσx/2)`.
//! Λ is the error map in the toggling frame, and the process matrices below
//! describe it in the unnormalized Pauli basis (I, σx, σy, σz), so the
//! identity channel is diag(1, 0, 0, 0). Read as error-after-ideal, the
//! same χ applies with every Pauli conjugated by U.

use num_complex::ComplexFloat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{kernels, FilteredPoint};
use crate::linalg::{
    self, apply_chi, c, chi_to_superop, hermitian_eigenvalues4, id2, kraus_to_superop, r, sx, sy, sz,
    unitary_superop, Mat2, Mat4, C64, I,
};
use crate::noisegen::NoisePsd;

/// Θ and the complex axis n with Θ n·σ = −Δ1σx + iΔ2σy − iΓ2σz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationSpec {
    pub theta: C64,
    pub axis: [C64; 3],
}

impl RotationSpec {
    pub fn new(p: &FilteredPoint) -> Self {
        let theta = C64::new(theta_squared(p), 0.0).sqrt();
        let gen = [c(-p.delta1, 0.0), c(0.0, p.delta2), c(0.0, -p.gamma2)];
        let axis = if theta.norm() > 0.0 {
            gen.map(|g| g / theta)
        } else {
            [C64::new(0.0, 0.0); 3]
        };
        RotationSpec { theta, axis }
    }
}

/// Θ² = Δ1² − Δ2² − Γ2², the squared rotation angle. May be negative.
pub fn theta_squared(p: &FilteredPoint) -> f64 {
    p.delta1 * p.delta1 - p.delta2 * p.delta2 - p.gamma2 * p.gamma2
}

/// (cos(Θ/2), sin(Θ/2)/Θ) as real functions of Θ².
///
/// Both are entire in Θ², so a negative radicand turns them hyperbolic and
/// the result stays real.
pub fn half_angle(theta2: f64) -> (f64, f64) {
    if theta2.abs() < 1e-8 {
        let x = theta2;
        (1.0 - x / 8.0 + x * x / 384.0, 0.5 - x / 48.0 + x * x / 3840.0)
    } else if theta2 > 0.0 {
        let th = theta2.sqrt();
        ((0.5 * th).cos(), (0.5 * th).sin() / th)
    } else {
        let k = (-theta2).sqrt();
        ((0.5 * k).cosh(), (0.5 * k).sinh() / k)
    }
}

fn select(p: &FilteredPoint, with_amplitude: bool) -> FilteredPoint {
    if with_amplitude {
        *p
    } else {
        p.without_amplitude()
    }
}

/// Coherence prefactor e^{−(Γ1+ΔΓ1)/2}.
fn coherence_factor(p: &FilteredPoint) -> f64 {
    (-0.5 * (p.gamma1 + p.dgamma1)).exp()
}

fn dressed_basis() -> Mat2 {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    Mat2::new(r(h), r(h), r(h), r(-h))
}

/// Toggling-frame error map Λ applied to ρ0.
pub fn toggling_map(rho0: &Mat2, p: &FilteredPoint) -> Mat2 {
    let pd = dressed_basis();
    let d = pd.adjoint() * rho0 * pd;
    let pop = (d[(0, 0)] - d[(1, 1)]) * (-p.gamma1).exp();
    let tr = d[(0, 0)] + d[(1, 1)];
    // ξ = (ξ−, ξ+) with ξ± = ρ−+ ± ρ+−.
    let (pm, mp) = (d[(0, 1)], d[(1, 0)]);
    let xi = [mp - pm, mp + pm];
    let (co, so) = half_angle(theta_squared(p));
    let e = coherence_factor(p);
    let m = [
        [r(co - so * p.gamma2), I * (so * (p.delta1 - p.delta2))],
        [I * (so * (p.delta1 + p.delta2)), r(co + so * p.gamma2)],
    ];
    let x0 = (m[0][0] * xi[0] + m[0][1] * xi[1]) * e;
    let x1 = (m[1][0] * xi[0] + m[1][1] * xi[1]) * e;
    let mp = (x0 + x1) * 0.5;
    let pm = (x1 - x0) * 0.5;
    let dn = Mat2::new((tr + pop) * 0.5, pm, mp, (tr - pop) * 0.5);
    pd * dn * pd.adjoint()
}

/// State at time t under the analytic non-Markovian map.
pub fn dressed_evolve(rho0: &Mat2, p: &FilteredPoint, with_amplitude: bool) -> Mat2 {
    let u = linalg::drive_unitary(p.omega, 0.0, p.t);
    u * toggling_map(rho0, &select(p, with_amplitude)) * u.adjoint()
}

/// Time-ordered solution of the same dressed-state equations.
///
/// The closed form exponentiates the integrated generator, which is exact
/// only when the generators at different times commute. Here the kernels are
/// integrated step by step with RK4 instead. Returns states at `times`.
pub fn dressed_evolve_ordered(
    rho0: &Mat2,
    autocov: &(dyn Fn(f64) -> f64 + Sync),
    amp_autocov: Option<&(dyn Fn(f64) -> f64 + Sync)>,
    rabi: f64,
    times: &[f64],
) -> Result<Vec<Mat2>> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.iter().any(|t| *t < 0.0) {
        return Err(Error::InvalidInput("times must be nonnegative and nondecreasing".into()));
    }
    let t_end = times.last().copied().unwrap_or(0.0);
    let h_max = (0.05 / rabi.max(1e-300)).min(t_end / 4000.0).max(t_end * 1e-7);
    let pd = dressed_basis();
    let d = pd.adjoint() * rho0 * pd;
    let tr = d[(0, 0)] + d[(1, 1)];
    // State: (population difference, ξ−, ξ+).
    let mut y = [d[(0, 0)] - d[(1, 1)], d[(1, 0)] - d[(0, 1)], d[(1, 0)] + d[(0, 1)]];
    let deriv = |s: f64, y: &[C64; 3]| -> Result<[C64; 3]> {
        let k = kernels(autocov, amp_autocov, rabi, s)?;
        let (g1, g2, d1, d2, dg) = (k[0], k[1], k[2], k[3], k[4]);
        // Generator of ξ: −½(γ1+δγ1) − ½(γ2 σz − i δ1 σx − δ2 σy).
        let a00 = -0.5 * (g1 + dg + g2);
        let a11 = -0.5 * (g1 + dg - g2);
        let a01 = 0.5 * I * (d1 - d2);
        let a10 = 0.5 * I * (d1 + d2);
        Ok([-g1 * y[0], a00 * y[1] + a01 * y[2], a10 * y[1] + a11 * y[2]])
    };
    let mut out = Vec::with_capacity(times.len());
    let mut s = 0.0;
    for &t in times {
        let span = t - s;
        let n = (span / h_max).ceil().max(if span > 0.0 { 1.0 } else { 0.0 }) as usize;
        for _ in 0..n {
            let h = span / n as f64;
            let add = |a: &[C64; 3], b: &[C64; 3], f: f64| [a[0] + b[0] * f, a[1] + b[1] * f, a[2] + b[2] * f];
            let k1 = deriv(s, &y)?;
            let k2 = deriv(s + 0.5 * h, &add(&y, &k1, 0.5 * h))?;
            let k3 = deriv(s + 0.5 * h, &add(&y, &k2, 0.5 * h))?;
            let k4 = deriv(s + h, &add(&y, &k3, h))?;
            for j in 0..3 {
                y[j] += (k1[j] + k2[j] * 2.0 + k3[j] * 2.0 + k4[j]) * (h / 6.0);
            }
            s += h;
        }
        s = t;
        let mp = (y[1] + y[2]) * 0.5;
        let pm = (y[2] - y[1]) * 0.5;
        let dn = Mat2::new((tr + y[0]) * 0.5, pm, mp, (tr - y[0]) * 0.5);
        let u = linalg::drive_unitary(rabi, 0.0, t);
        out.push(u * pd * dn * pd.adjoint() * u.adjoint());
    }
    Ok(out)
}

/// Kraus operators of the Markovian (Γ2 = Δ2 = 0) channel, applied after
/// the ideal rotation.
pub fn kraus_nc(p: &FilteredPoint, with_amplitude: bool) -> Result<Vec<Mat2>> {
    let p = select(p, with_amplitude);
    let eps = 1.0 - (-p.gamma1).exp();
    if !(-1e-12..=1.0 + 1e-12).contains(&eps) {
        return Err(Error::NumericalFailure(format!("decay 1−e^(−Γ1) = {eps} outside [0,1]")));
    }
    let eps = eps.clamp(0.0, 1.0);
    let plus = linalg::ket_plus();
    let minus = linalg::ket_minus();
    let pm = plus * minus.adjoint();
    let mp = minus * plus.adjoint();
    let pp = plus * plus.adjoint();
    let mm = minus * minus.adjoint();
    let (sn, cs) = (p.omega * p.t).sin_cos();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let k1 = (pm * r(cs) + mp * c(0.0, sn)) * r(h * eps.sqrt());
    let k2 = (mp * r(cs) + pm * c(0.0, sn)) * r(h * eps.sqrt());
    let (s4, c4) = (0.25 * p.delta1).sin_cos();
    if !with_amplitude {
        let rot = id2() * r(c4) - sx() * c(0.0, s4);
        let keep = (1.0 - eps).sqrt();
        let k3 = rot * (mm * r(keep) + pp) * r(h);
        let k4 = rot * (pp * r(keep) + mm) * r(h);
        return Ok(vec![k1, k2, k3, k4]);
    }
    let e = (-p.gamma1).exp();
    let ef = coherence_factor(&p);
    let xi_minus = (1.0 + e - 2.0 * ef).max(0.0);
    let xi_plus = 1.0 + e + 2.0 * ef;
    let k3 = (id2() * r(s4) + sx() * c(0.0, c4)) * r(0.5 * xi_minus.sqrt());
    let k4 = (id2() * r(c4) - sx() * c(0.0, s4)) * r(0.5 * xi_plus.sqrt());
    Ok(vec![k1, k2, k3, k4])
}

/// Block-diagonal process matrix of Λ, without the positivity check.
pub fn chi_nm_unchecked(p: &FilteredPoint, with_amplitude: bool) -> Mat4 {
    let p = select(p, with_amplitude);
    let e = (-p.gamma1).exp();
    let ef = coherence_factor(&p);
    let (co, so) = half_angle(theta_squared(&p));
    let a = id2() * r(1.0 + e) + sz() * r(2.0 * ef * co) - sy() * r(2.0 * ef * p.delta1 * so);
    let b = id2() * r(1.0 - e) - sz() * r(2.0 * ef * p.gamma2 * so) + sx() * r(2.0 * ef * p.delta2 * so);
    let mut chi = Mat4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            chi[(i, j)] = a[(i, j)] * 0.25;
            chi[(i + 2, j + 2)] = b[(i, j)] * 0.25;
        }
    }
    chi
}

/// Block-diagonal non-Markovian process matrix of Λ.
pub fn chi_nm(p: &FilteredPoint, with_amplitude: bool) -> Result<Mat4> {
    let chi = chi_nm_unchecked(p, with_amplitude);
    let min_eig = hermitian_eigenvalues4(&chi)[0];
    if min_eig < -1e-8 {
        return Err(Error::CpViolation { min_eig, zeta: None });
    }
    Ok(chi)
}

/// Process matrix of the full map U∘Λ at the point's time.
pub fn chi_full(p: &FilteredPoint, with_amplitude: bool) -> Mat4 {
    let u = linalg::drive_unitary(p.omega, 0.0, p.t);
    let s = unitary_superop(&u) * chi_to_superop(&chi_nm_unchecked(p, with_amplitude));
    linalg::superop_to_chi(&s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PauliRates {
    pub p_x: f64,
    pub p_y: f64,
    pub p_z: f64,
    pub p: f64,
}

impl PauliRates {
    pub fn new(p_x: f64, p_y: f64, p_z: f64) -> Self {
        PauliRates { p_x, p_y, p_z, p: p_x + p_y + p_z }
    }

    /// Process matrix diag(1−p, p_x, p_y, p_z).
    pub fn chi(&self) -> Mat4 {
        Mat4::from_diagonal(&nalgebra::Vector4::new(r(1.0 - self.p), r(self.p_x), r(self.p_y), r(self.p_z)))
    }

    /// Pauli transfer matrix diagonal (1, λx, λy, λz).
    pub fn ptm_diagonal(&self) -> [f64; 4] {
        [
            1.0,
            1.0 - 2.0 * (self.p_y + self.p_z),
            1.0 - 2.0 * (self.p_x + self.p_z),
            1.0 - 2.0 * (self.p_x + self.p_y),
        ]
    }
}

/// Pauli-twirled channel: the diagonal of [`chi_nm`].
pub fn pauli_twirl(p: &FilteredPoint, with_amplitude: bool) -> PauliRates {
    let p = select(p, with_amplitude);
    let e = (-p.gamma1).exp();
    let ef = coherence_factor(&p);
    let (co, so) = half_angle(theta_squared(&p));
    PauliRates::new(
        0.25 * (1.0 + e - 2.0 * ef * co),
        0.25 * (1.0 - e - 2.0 * ef * p.gamma2 * so),
        0.25 * (1.0 - e + 2.0 * ef * p.gamma2 * so),
    )
}

/// Depolarizing probability ¾(1 − e^{−Γ1}).
pub fn depolarizing_rate(p: &FilteredPoint) -> f64 {
    0.75 * (1.0 - (-p.gamma1).exp())
}

/// Process matrix of the depolarizing channel with probability p_d.
pub fn depolarizing_chi(p_d: f64) -> Mat4 {
    PauliRates::new(p_d / 3.0, p_d / 3.0, p_d / 3.0).chi()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateModel {
    D,
    NC,
    NM,
    NcI,
    NmI,
}

impl GateModel {
    pub const ALL: [GateModel; 5] = [GateModel::D, GateModel::NC, GateModel::NM, GateModel::NcI, GateModel::NmI];

    pub fn name(&self) -> &'static str {
        match self {
            GateModel::D => "D",
            GateModel::NC => "NC",
            GateModel::NM => "NM",
            GateModel::NcI => "NC_I",
            GateModel::NmI => "NM_I",
        }
    }
}

/// Closed-form average gate error of each model.
pub fn gate_error(p: &FilteredPoint, model: GateModel) -> f64 {
    let e = (-p.gamma1).exp();
    let half = (-0.5 * p.gamma1).exp();
    let full = coherence_factor(p);
    match model {
        GateModel::D => 0.5 * (1.0 - e),
        GateModel::NC => 0.5 - (e + 2.0 * half * (0.5 * p.delta1).cos()) / 6.0,
        GateModel::NM => 0.5 - (e + 2.0 * half * half_angle(theta_squared(&p.without_amplitude())).0) / 6.0,
        GateModel::NcI => (3.0 - e - 2.0 * full * (0.5 * p.delta1).cos()) / 6.0,
        GateModel::NmI => (3.0 - e - 2.0 * full * half_angle(theta_squared(p)).0) / 6.0,
    }
}

#[derive(Debug, Clone)]
pub enum Channel {
    Chi(Mat4),
    Kraus(Vec<Mat2>),
    Superop(Mat4),
}

impl Channel {
    pub fn superop(&self) -> Mat4 {
        match self {
            Channel::Chi(chi) => chi_to_superop(chi),
            Channel::Kraus(ks) => kraus_to_superop(ks),
            Channel::Superop(s) => *s,
        }
    }

    pub fn apply(&self, rho: &Mat2) -> Mat2 {
        match self {
            Channel::Chi(chi) => apply_chi(chi, rho),
            Channel::Kraus(ks) => ks.iter().map(|k| k * rho * k.adjoint()).sum(),
            Channel::Superop(s) => linalg::apply_superop(s, rho),
        }
    }
}

/// F = ½ + (1/12) Σ_j tr(V σ_j V† E(σ_j)).
pub fn avg_gate_fidelity(channel: &Channel, target: &Mat2) -> f64 {
    let s = channel.superop();
    let mut acc = 0.0;
    for sigma in [sx(), sy(), sz()] {
        let out = linalg::apply_superop(&s, &sigma);
        acc += (target * sigma * target.adjoint() * out).trace().re;
    }
    0.5 + acc / 12.0
}

/// Uhlmann fidelity (tr√(√a b √a))² of two qubit states.
pub fn state_fidelity(a: &Mat2, b: &Mat2) -> f64 {
    let overlap = (a * b).trace().re;
    let det = (a.determinant().re * b.determinant().re).max(0.0);
    (overlap + 2.0 * det.sqrt()).clamp(0.0, 1.0)
}

/// ζ = sqrt(τ_c/T2,eff) with T2,eff = 2/S(Ω), the cumulant-truncation parameter.
pub fn validity_zeta(psd: &NoisePsd, rabi: f64) -> Option<f64> {
    match psd {
        NoisePsd::Ou { tau, .. } => {
            let t2 = 2.0 / psd.eval(rabi);
            Some((tau / t2).sqrt())
        }
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmCurve {
    pub omega: f64,
    pub times: Vec<f64>,
    /// Canonical rate γ̄− at each time.
    pub gamma_minus: Vec<f64>,
    pub n_cp: Vec<f64>,
}

impl NmCurve {
    /// Earliest time after which γ̄− stays nonnegative, if any.
    pub fn saturation_time(&self) -> Option<f64> {
        let scale = self.gamma_minus.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let tol = 1e-9 * scale;
        let last_negative = self.gamma_minus.iter().rposition(|&g| g < -tol);
        match last_negative {
            None => Some(0.0),
            Some(i) if i + 1 < self.times.len() => Some(self.times[i + 1]),
            Some(_) => None,
        }
    }
}

/// Non-Markovianity 𝒩_CP(t) = ½∫(|γ̄−| − γ̄−) from an autocovariance.
///
/// With z = ∫₀ᵗ C(u) e^{−iΩu} du, γ1 = Re z and sqrt(γ2² + δ2²) = |z|.
/// `markovian` drops the γ2, δ2 contribution.
pub fn nm_measure_autocov(
    autocov: &(dyn Fn(f64) -> f64 + Sync),
    amp_autocov: Option<&(dyn Fn(f64) -> f64 + Sync)>,
    rabi: f64,
    t_max: f64,
    grid: usize,
    markovian: bool,
) -> Result<NmCurve> {
    if grid < 2 || !(t_max > 0.0) {
        return Err(Error::InvalidInput("need grid >= 2 and t_max > 0".into()));
    }
    let times: Vec<f64> = (0..grid).map(|i| t_max * i as f64 / (grid - 1) as f64).collect();
    let mut z = C64::new(0.0, 0.0);
    let mut amp = 0.0;
    let mut gamma_minus = vec![0.0];
    for w in times.windows(2) {
        let (a, b) = (w[0], w[1]);
        let n = ((rabi * (b - a) / std::f64::consts::PI).ceil() as usize).clamp(1, 10_000);
        let iv: Vec<(f64, f64)> = (0..n).map(|k| (a + (b - a) * k as f64 / n as f64, a + (b - a) * (k + 1) as f64 / n as f64)).collect();
        let res = crate::quad::integrate_intervals(
            |u| {
                let cu = autocov(u);
                let (s, co) = (rabi * u).sin_cos();
                [cu * co, -cu * s, amp_autocov.map_or(0.0, |f| 2.0 * f(u))]
            },
            &iv,
            1e-12,
            0.0,
            100_000,
        )?;
        z += C64::new(res.value[0], res.value[1]);
        amp += res.value[2];
        let g1 = z.re + amp;
        let mix = if markovian { 0.0 } else { z.abs() };
        gamma_minus.push(0.5 * g1 - 0.5 * mix);
    }
    let mut n_cp = vec![0.0];
    for i in 1..times.len() {
        let f = |g: f64| 0.5 * (g.abs() - g);
        let dt = times[i] - times[i - 1];
        let inc = 0.5 * dt * (f(gamma_minus[i - 1]) + f(gamma_minus[i]));
        n_cp.push(n_cp[i - 1] + inc);
    }
    Ok(NmCurve { omega: rabi, times, gamma_minus, n_cp })
}

/// [`nm_measure_autocov`] for PSDs with a closed-form autocovariance.
pub fn nm_measure(psd: &NoisePsd, amp_psd: Option<&NoisePsd>, rabi: f64, t_max: f64, grid: usize) -> Result<NmCurve> {
    let c = psd
        .autocov()
        .ok_or_else(|| Error::InvalidInput("non-Markovianity needs a PSD with a closed-form autocovariance".into()))?;
    let a = match amp_psd {
        Some(p) => Some(p.autocov().ok_or_else(|| {
            Error::InvalidInput("amplitude PSD needs a closed-form autocovariance".into())
        })?),
        None => None,
    };
    nm_measure_autocov(&*c, a.as_deref().map(|f| f as _), rabi, t_max, grid, false)
}
