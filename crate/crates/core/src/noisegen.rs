//! Stationary Gaussian noise: spectral densities and trajectory generators.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two-sided power spectral density in angular frequency, rad²/s.
///
/// The autocovariance is `C(t) = ∫ dω/2π S(ω) e^{iωt}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoisePsd {
    Zero,
    /// Ornstein–Uhlenbeck: `S = c τ²/(1 + ω²τ²)`.
    Ou { c: f64, tau: f64 },
    /// Frequency-independent density.
    Flat { level: f64 },
    Tabulated(TabulatedPsd),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TabulatedRaw", into = "TabulatedRaw")]
pub struct TabulatedPsd {
    omega: Vec<f64>,
    density: Vec<f64>,
    low_plateau: f64,
    high_plateau: f64,
    excluded: Vec<(f64, f64)>,
    // Samples left after dropping excluded bands.
    kept_omega: Vec<f64>,
    kept_log: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TabulatedRaw {
    omega: Vec<f64>,
    density: Vec<f64>,
    low_plateau: f64,
    high_plateau: f64,
    #[serde(default)]
    excluded: Vec<(f64, f64)>,
}

impl TryFrom<TabulatedRaw> for TabulatedPsd {
    type Error = Error;
    fn try_from(raw: TabulatedRaw) -> Result<Self> {
        TabulatedPsd::new(raw.omega, raw.density, raw.low_plateau, raw.high_plateau, raw.excluded)
    }
}

impl From<TabulatedPsd> for TabulatedRaw {
    fn from(t: TabulatedPsd) -> Self {
        TabulatedRaw {
            omega: t.omega,
            density: t.density,
            low_plateau: t.low_plateau,
            high_plateau: t.high_plateau,
            excluded: t.excluded,
        }
    }
}

impl TabulatedPsd {
    /// Samples are (ω in rad/s, two-sided density). Frequencies must be
    /// positive and strictly increasing.
    pub fn new(
        omega: Vec<f64>,
        density: Vec<f64>,
        low_plateau: f64,
        high_plateau: f64,
        excluded: Vec<(f64, f64)>,
    ) -> Result<Self> {
        if omega.len() != density.len() {
            return Err(Error::InvalidInput("frequency and density lengths differ".into()));
        }
        if omega.len() < 2 {
            return Err(Error::InvalidInput("tabulated PSD needs at least 2 samples".into()));
        }
        if omega.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidInput("tabulated frequencies must be positive and finite".into()));
        }
        if let Some(i) = omega.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(format!(
                "tabulated frequencies not strictly increasing at row {}",
                i + 1
            )));
        }
        if density.iter().chain([&low_plateau, &high_plateau]).any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::InvalidInput("densities and plateaus must be finite and nonnegative".into()));
        }
        for &(a, b) in &excluded {
            if !(a < b) {
                return Err(Error::InvalidInput(format!("excluded band ({a}, {b}) is empty")));
            }
        }
        let inside = |w: f64| excluded.iter().any(|&(a, b)| w > a && w < b);
        let mut kept_omega = Vec::new();
        let mut kept_log = Vec::new();
        for (&w, &s) in omega.iter().zip(&density) {
            if !inside(w) {
                kept_omega.push(w);
                kept_log.push((w.ln(), s));
            }
        }
        if kept_omega.len() < 2 {
            return Err(Error::InvalidInput("fewer than 2 samples outside excluded bands".into()));
        }
        Ok(TabulatedPsd { omega, density, low_plateau, high_plateau, excluded, kept_omega, kept_log })
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.omega.iter().copied().zip(self.density.iter().copied())
    }

    pub fn low_plateau(&self) -> f64 {
        self.low_plateau
    }

    pub fn high_plateau(&self) -> f64 {
        self.high_plateau
    }

    pub fn excluded(&self) -> &[(f64, f64)] {
        &self.excluded
    }

    pub fn min_omega(&self) -> f64 {
        self.kept_omega[0]
    }

    pub fn max_omega(&self) -> f64 {
        *self.kept_omega.last().unwrap()
    }

    pub fn eval(&self, omega: f64) -> f64 {
        let w = omega.abs();
        if w < self.min_omega() {
            return self.low_plateau;
        }
        if w > self.max_omega() {
            return self.high_plateau;
        }
        let k = self.kept_omega.partition_point(|&x| x <= w).clamp(1, self.kept_omega.len() - 1);
        let (l0, s0) = self.kept_log[k - 1];
        let (l1, s1) = self.kept_log[k];
        let f = (w.ln() - l0) / (l1 - l0);
        if s0 > 0.0 && s1 > 0.0 {
            (s0.ln() + f * (s1.ln() - s0.ln())).exp()
        } else {
            s0 + f * (s1 - s0)
        }
    }

    /// Frequencies at which the interpolant has kinks.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = self.kept_omega.clone();
        b.extend(self.excluded.iter().flat_map(|&(a, c)| [a, c]));
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }
}

impl NoisePsd {
    pub fn ou(c: f64, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && c >= 0.0 && c.is_finite() && tau.is_finite()) {
            return Err(Error::InvalidInput(format!("OU needs tau > 0 and c >= 0, got c={c}, tau={tau}")));
        }
        Ok(NoisePsd::Ou { c, tau })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            NoisePsd::Ou { c, tau } => NoisePsd::ou(*c, *tau).map(|_| ()),
            NoisePsd::Flat { level } if !(*level >= 0.0 && level.is_finite()) => {
                Err(Error::InvalidInput("flat PSD level must be nonnegative".into()))
            }
            _ => Ok(()),
        }
    }

    /// Density at ω. Parity-even for every kind.
    pub fn eval(&self, omega: f64) -> f64 {
        match self {
            NoisePsd::Zero => 0.0,
            NoisePsd::Ou { c, tau } => c * tau * tau / (1.0 + (omega * tau).powi(2)),
            NoisePsd::Flat { level } => *level,
            NoisePsd::Tabulated(t) => t.eval(omega),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            NoisePsd::Zero => true,
            NoisePsd::Ou { c, .. } => *c == 0.0,
            NoisePsd::Flat { level } => *level == 0.0,
            NoisePsd::Tabulated(t) => {
                t.low_plateau == 0.0 && t.high_plateau == 0.0 && t.density.iter().all(|&s| s == 0.0)
            }
        }
    }

    /// Angular frequency above which the density is smooth and slowly varying.
    pub fn scale(&self) -> f64 {
        match self {
            NoisePsd::Ou { tau, .. } => 1.0 / tau,
            NoisePsd::Tabulated(t) => t.max_omega(),
            _ => 0.0,
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            NoisePsd::Tabulated(t) => t.breakpoints(),
            _ => Vec::new(),
        }
    }

    /// Closed-form autocovariance where one exists.
    pub fn autocov(&self) -> Option<Box<dyn Fn(f64) -> f64 + Send + Sync>> {
        match *self {
            NoisePsd::Zero => Some(Box::new(|_| 0.0)),
            NoisePsd::Ou { c, tau } => Some(Box::new(move |u: f64| 0.5 * c * tau * (-u.abs() / tau).exp())),
            _ => None,
        }
    }
}

pub fn psd_eval(psd: &NoisePsd, omega: f64) -> f64 {
    psd.eval(omega)
}

/// Exact Ornstein–Uhlenbeck update over a step of any length.
pub fn ou_step(eta: f64, dt: f64, tau: f64, c: f64, u: f64) -> f64 {
    let decay = (-dt / tau).exp();
    let sd = (0.5 * c * tau * (1.0 - (-2.0 * dt / tau).exp())).sqrt();
    eta * decay + sd * u
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseTrajectory {
    pub dt: f64,
    pub values: Vec<f64>,
    pub seed: Option<u64>,
    pub stream: Option<u64>,
}

/// Symmetric covariance matrix over a uniform time grid.
#[derive(Debug, Clone)]
pub struct Covariance {
    pub dt: f64,
    pub matrix: DMatrix<f64>,
}

impl Covariance {
    pub fn new(dt: f64, matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::InvalidInput("covariance must be square and nonempty".into()));
        }
        let n = matrix.nrows();
        let scale = matrix.amax();
        for i in 0..n {
            for j in 0..i {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidInput(format!("covariance not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(Covariance { dt, matrix })
    }

    /// Stationary covariance `C_ij = C(|t_i − t_j|)`.
    pub fn stationary(n: usize, dt: f64, autocov: impl Fn(f64) -> f64) -> Self {
        let matrix = DMatrix::from_fn(n, n, |i, j| autocov((i as f64 - j as f64) * dt));
        Covariance { dt, matrix }
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Lower-triangular factor of a covariance, reusable across trajectories.
#[derive(Debug, Clone)]
pub struct FranklinFactor {
    pub dt: f64,
    pub lower: DMatrix<f64>,
    pub jitter: f64,
}

impl FranklinFactor {
    pub fn new(cov: &Covariance) -> Result<Self> {
        let norm = cov.matrix.amax();
        if norm == 0.0 {
            return Ok(FranklinFactor { dt: cov.dt, lower: cov.matrix.clone(), jitter: 0.0 });
        }
        if let Some(ch) = Cholesky::new(cov.matrix.clone()) {
            return Ok(FranklinFactor { dt: cov.dt, lower: ch.l(), jitter: 0.0 });
        }
        let tol = 1e-10 * norm;
        let min_eig = SymmetricEigen::new(cov.matrix.clone()).eigenvalues.min();
        if min_eig < -tol {
            return Err(Error::NotPositiveSemidefinite { min_eig });
        }
        let mut jitter = 1e-12 * norm;
        let n = cov.len();
        while jitter <= tol {
            let shifted = &cov.matrix + DMatrix::identity(n, n) * jitter;
            if let Some(ch) = Cholesky::new(shifted) {
                return Ok(FranklinFactor { dt: cov.dt, lower: ch.l(), jitter });
            }
            jitter *= 10.0;
        }
        Err(Error::NumericalFailure("Cholesky factorization failed even with diagonal jitter".into()))
    }

    pub fn len(&self) -> usize {
        self.lower.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn trajectory(&self, u: &[f64]) -> Result<NoiseTrajectory> {
        if u.len() != self.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} normal draws, got {}",
                self.len(),
                u.len()
            )));
        }
        let values = &self.lower * DVector::from_column_slice(u);
        Ok(NoiseTrajectory { dt: self.dt, values: values.as_slice().to_vec(), seed: None, stream: None })
    }
}

pub fn franklin_trajectory(cov: &Covariance, u: &[f64]) -> Result<NoiseTrajectory> {
    FranklinFactor::new(cov)?.trajectory(u)
}

/// Number of unit-normal draws consumed by [`percival_trajectory`].
pub fn percival_draws(m_f: usize) -> usize {
    m_f + 2
}

/// Fourier-series trajectory on `m_f` points spanning `[t0, tf)`.
///
/// Coefficients use the two-sided density at f_m = m/(tf−t0), so the sample
/// covariance equals the trapezoid sum of the one-sided cosine transform up
/// to the Nyquist frequency. The series is periodic in `tf − t0`.
pub fn percival_trajectory(psd: &NoisePsd, m_f: usize, t0: f64, tf: f64, draws: &[f64]) -> Result<NoiseTrajectory> {
    if m_f < 4 || m_f % 2 != 0 {
        return Err(Error::InvalidInput(format!("m_f must be even and >= 4, got {m_f}")));
    }
    if !(tf > t0) {
        return Err(Error::InvalidInput("tf must exceed t0".into()));
    }
    if draws.len() < percival_draws(m_f) {
        return Err(Error::InvalidInput(format!(
            "need {} draws, got {}",
            percival_draws(m_f),
            draws.len()
        )));
    }
    let span = tf - t0;
    let half = m_f / 2;
    let mut nu = vec![Complex::new(0.0, 0.0); m_f];
    for m in 0..=half {
        let s = psd.eval(2.0 * std::f64::consts::PI * m as f64 / span);
        let a = Complex::new(draws[2 * m], draws[2 * m + 1]) * (0.5 * s).sqrt();
        if m == 0 || m == half {
            nu[m] = Complex::new(2f64.sqrt() * a.re, 0.0);
        } else {
            nu[m] = a;
            nu[m_f - m] = a.conj();
        }
    }
    FftPlanner::new().plan_fft_forward(m_f).process(&mut nu);
    let norm = span.recip().sqrt();
    let values = nu.iter().map(|z| z.re * norm).collect();
    Ok(NoiseTrajectory { dt: span / m_f as f64, values, seed: None, stream: None })
}

/// Independent reproducible stream for a given purpose and trajectory index.
pub fn stream_rng(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(index);
    rng
}

pub fn normals<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Noise source feeding the Langevin integrator.
#[derive(Debug, Clone)]
pub enum NoiseSource {
    Zero,
    Constant(f64),
    /// Stationary OU chain with exact updates.
    Ou { c: f64, tau: f64 },
    /// Percival synthesis from an arbitrary PSD.
    Psd(NoisePsd),
    /// Franklin synthesis from a precomputed covariance factor.
    Franklin(std::sync::Arc<FranklinFactor>),
}

impl NoiseSource {
    pub fn from_psd(psd: &NoisePsd) -> Self {
        match *psd {
            NoisePsd::Zero => NoiseSource::Zero,
            NoisePsd::Ou { c, tau } => NoiseSource::Ou { c, tau },
            _ => NoiseSource::Psd(psd.clone()),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            NoiseSource::Zero => true,
            NoiseSource::Constant(v) => *v == 0.0,
            NoiseSource::Ou { c, .. } => *c == 0.0,
            NoiseSource::Psd(p) => p.is_zero(),
            NoiseSource::Franklin(f) => f.lower.amax() == 0.0,
        }
    }

    /// `n` samples spaced by `dt`, starting in the stationary state.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, dt: f64, rng: &mut R) -> Result<Vec<f64>> {
        match self {
            NoiseSource::Zero => Ok(vec![0.0; n]),
            NoiseSource::Constant(v) => Ok(vec![*v; n]),
            NoiseSource::Ou { c, tau } => {
                let mut eta = (0.5 * c * tau).sqrt() * rng.sample::<f64, _>(StandardNormal);
                let mut out = Vec::with_capacity(n);
                for _ in 0..n {
                    out.push(eta);
                    eta = ou_step(eta, dt, *tau, *c, rng.sample(StandardNormal));
                }
                Ok(out)
            }
            NoiseSource::Psd(psd) => {
                let m_f = (2 * n).max(4);
                let m_f = m_f + m_f % 2;
                let draws = normals(rng, percival_draws(m_f));
                let tr = percival_trajectory(psd, m_f, 0.0, m_f as f64 * dt, &draws)?;
                Ok(tr.values[..n].to_vec())
            }
            NoiseSource::Franklin(f) => {
                if f.len() < n {
                    return Err(Error::InvalidInput(format!(
                        "covariance grid has {} points, trajectory needs {n}",
                        f.len()
                    )));
                }
                if (f.dt - dt).abs() > 1e-12 * dt {
                    return Err(Error::InvalidInput("covariance grid spacing differs from dt".into()));
                }
                let u = normals(rng, f.len());
                Ok(f.trajectory(&u)?.values[..n].to_vec())
            }
        }
    }
}
