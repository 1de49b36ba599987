//! Stochastic reference simulator for the driven qubit.
//!
//! Each trajectory integrates the state vector under one noise realization
//! with a Heun step; ensemble means give the density matrix. Trajectories run
//! in fixed chunks and are reduced in index order, so results do not depend
//! on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{bloch, c, hermitian_eigenvalues2, kron, sx, sy, sz, Mat2, Mat4, Vec2, C64};
use crate::noisegen::{stream_rng, NoiseSource};

const CHUNK: usize = 256;
const FREQ_STREAM: u64 = 1;
const AMP_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveConfig {
    pub omega: f64,
    pub phi: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub m_mc: usize,
}

impl DriveConfig {
    pub fn new(omega: f64, phi: f64, dt: f64, n_steps: usize, m_mc: usize) -> Result<Self> {
        let d = DriveConfig { omega, phi, dt, n_steps, m_mc };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(Error::InvalidInput(format!("Rabi frequency must be positive, got {}", self.omega)));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidInput(format!("dt must be positive, got {}", self.dt)));
        }
        if self.m_mc == 0 {
            return Err(Error::InvalidInput("need at least one trajectory".into()));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.n_steps as f64
    }
}

/// 0.05·min(τ_c, 2π/Ω), further capped at Ωdt = 0.01.
///
/// Heun's phase error per step is ~(Ωdt)³/48, which at Ωdt ≈ 0.3 already
/// dominates small gate infidelities after a few flops.
pub fn default_dt(omega: f64, tau_c: f64) -> f64 {
    let base = 0.05 * tau_c.min(2.0 * std::f64::consts::PI / omega);
    if omega > 0.0 {
        base.min(0.01 / omega)
    } else {
        base
    }
}

fn step_generator(drive: &DriveConfig, dephasing_inc: f64, amplitude_inc: f64) -> [[C64; 2]; 2] {
    // G = −(i/2)[(Ω dt + a) σφ + w σz]
    let rot = 0.5 * (drive.omega * drive.dt + amplitude_inc);
    let (s, co) = drive.phi.sin_cos();
    let hw = 0.5 * dephasing_inc;
    let off = c(0.0, -rot) * C64::new(co, -s);
    let off_low = c(0.0, -rot) * C64::new(co, s);
    [[c(0.0, -hw), off], [off_low, c(0.0, hw)]]
}

fn apply(g: &[[C64; 2]; 2], v: &Vec2) -> Vec2 {
    Vec2::new(g[0][0] * v[0] + g[0][1] * v[1], g[1][0] * v[0] + g[1][1] * v[1])
}

/// One Heun step and the norm drift it removed.
pub fn heun_step_checked(v: &Vec2, drive: &DriveConfig, dephasing_inc: f64, amplitude_inc: f64) -> (Vec2, f64) {
    let g = step_generator(drive, dephasing_inc, amplitude_inc);
    let k1 = apply(&g, v);
    let pred = v + k1;
    let k2 = apply(&g, &pred);
    let out = v + (k1 + k2) * C64::new(0.5, 0.0);
    let norm = out.norm();
    (out / C64::new(norm, 0.0), (norm - v.norm()).abs())
}

/// One Heun update with drift −(i/2)(Ω+δΩ)σφ and diffusion −(i/2)σz δω.
///
/// The increments are the noise integrated over the step. The result is
/// renormalized. `_t` is accepted for drives with explicit time dependence.
pub fn heun_step(v: &Vec2, _t: f64, drive: &DriveConfig, dephasing_inc: f64, amplitude_inc: f64) -> Vec2 {
    heun_step_checked(v, drive, dephasing_inc, amplitude_inc).0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Mat2>,
    pub expectations: Vec<[f64; 3]>,
    pub std_errors: Vec<[f64; 3]>,
    pub m_mc: usize,
    pub max_norm_drift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PauliPoint {
    pub t: f64,
    pub mean: [f64; 3],
    pub se: [f64; 3],
}

pub fn pauli_expectations(traj: &DensityTrajectory) -> Vec<PauliPoint> {
    traj.times
        .iter()
        .zip(&traj.expectations)
        .zip(&traj.std_errors)
        .map(|((&t, &mean), &se)| PauliPoint { t, mean, se })
        .collect()
}

/// Integrated noise over each step, trapezoid in the sampled values.
fn increments(src: &NoiseSource, n_steps: usize, dt: f64, seed: u64, stream: u64, index: u64) -> Result<Vec<f64>> {
    if src.is_zero() {
        return Ok(vec![0.0; n_steps]);
    }
    let mut rng = stream_rng(seed, stream, index);
    let eta = src.sample(n_steps + 1, dt, &mut rng)?;
    if eta.len() != n_steps + 1 {
        return Err(Error::InvalidInput(format!(
            "noise trajectory has {} samples, need {}",
            eta.len(),
            n_steps + 1
        )));
    }
    Ok(eta.windows(2).map(|w| 0.5 * dt * (w[0] + w[1])).collect())
}

struct Run<'a> {
    drive: &'a DriveConfig,
    freq: &'a NoiseSource,
    amp: Option<&'a NoiseSource>,
    seed: u64,
    record_every: usize,
}

impl Run<'_> {
    fn n_records(&self) -> usize {
        self.drive.n_steps / self.record_every + 1
    }

    fn times(&self) -> Vec<f64> {
        (0..self.n_records()).map(|k| (k * self.record_every) as f64 * self.drive.dt).collect()
    }

    /// Propagates `init` along one trajectory and hands each record to `visit`.
    fn trajectory(&self, index: usize, init: &[Vec2], mut visit: impl FnMut(usize, &[Vec2])) -> Result<f64> {
        let d = self.drive;
        let w = increments(self.freq, d.n_steps, d.dt, self.seed, FREQ_STREAM, index as u64)?;
        let a = match self.amp {
            Some(src) => increments(src, d.n_steps, d.dt, self.seed, AMP_STREAM, index as u64)?,
            None => vec![0.0; d.n_steps],
        };
        let mut vs = init.to_vec();
        let mut drift = 0.0f64;
        visit(0, &vs);
        for step in 0..d.n_steps {
            for v in vs.iter_mut() {
                let (next, dn) = heun_step_checked(v, d, w[step], a[step]);
                *v = next;
                drift = drift.max(dn);
            }
            if (step + 1) % self.record_every == 0 {
                visit((step + 1) / self.record_every, &vs);
            }
        }
        Ok(drift)
    }

    /// Chunked deterministic reduction of per-record accumulators.
    fn reduce<T, F>(&self, init: &[Vec2], zero: T, add: F) -> Result<(Vec<T>, f64)>
    where
        T: Clone + Send + Sync + std::ops::AddAssign,
        F: Fn(&mut T, &[Vec2]) + Sync,
    {
        let m = self.drive.m_mc;
        let n_chunks = m.div_ceil(CHUNK);
        let parts: Vec<Result<(Vec<T>, f64)>> = (0..n_chunks)
            .into_par_iter()
            .map(|ch| {
                let mut acc = vec![zero.clone(); self.n_records()];
                let mut drift = 0.0f64;
                for idx in ch * CHUNK..((ch + 1) * CHUNK).min(m) {
                    let dr = self.trajectory(idx, init, |k, vs| add(&mut acc[k], vs))?;
                    drift = drift.max(dr);
                }
                Ok((acc, drift))
            })
            .collect();
        let mut total = vec![zero; self.n_records()];
        let mut drift = 0.0f64;
        for part in parts {
            let (acc, dr) = part?;
            for (t, a) in total.iter_mut().zip(acc) {
                *t += a;
            }
            drift = drift.max(dr);
        }
        Ok((total, drift))
    }
}

#[derive(Clone, Copy)]
struct StateAcc {
    rho: Mat2,
    sq: [f64; 3],
}

impl std::ops::AddAssign for StateAcc {
    fn add_assign(&mut self, o: Self) {
        self.rho += o.rho;
        for j in 0..3 {
            self.sq[j] += o.sq[j];
        }
    }
}

fn check_state(rho0: &Mat2) -> Result<()> {
    let herm = (rho0 - rho0.adjoint()).iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let tr = rho0.trace();
    if herm > 1e-12 || (tr - C64::new(1.0, 0.0)).norm() > 1e-12 {
        return Err(Error::InvalidInput("initial state must be Hermitian with unit trace".into()));
    }
    if hermitian_eigenvalues2(rho0)[0] < -1e-10 {
        return Err(Error::InvalidInput("initial state is not positive semidefinite".into()));
    }
    Ok(())
}

/// Eigen-ensemble of a density matrix: weights and unit vectors.
fn eigen_ensemble(rho: &Mat2) -> (Vec<f64>, Vec<Vec2>) {
    let eig = rho.symmetric_eigen();
    let mut w = Vec::new();
    let mut vs = Vec::new();
    for k in 0..2 {
        if eig.eigenvalues[k] > 1e-14 {
            w.push(eig.eigenvalues[k]);
            vs.push(eig.eigenvectors.column(k).into_owned());
        }
    }
    (w, vs)
}

/// Ensemble-averaged density matrices every `record_every` steps.
///
/// Mixed initial states are split into their eigenvectors, which share the
/// noise realization of each trajectory.
pub fn evolve_ensemble(
    rho0: &Mat2,
    drive: &DriveConfig,
    freq_noise: &NoiseSource,
    amp_noise: Option<&NoiseSource>,
    seed: u64,
    record_every: usize,
) -> Result<DensityTrajectory> {
    drive.validate()?;
    check_state(rho0)?;
    if record_every == 0 {
        return Err(Error::InvalidInput("record_every must be positive".into()));
    }
    let run = Run { drive, freq: freq_noise, amp: amp_noise, seed, record_every };
    let (weights, init) = eigen_ensemble(rho0);
    let paulis = [sx(), sy(), sz()];
    let zero = StateAcc { rho: Mat2::zeros(), sq: [0.0; 3] };
    let (acc, drift) = run.reduce(&init, zero, |a, vs| {
        let mut rho = Mat2::zeros();
        for (w, v) in weights.iter().zip(vs) {
            rho += v * v.adjoint() * C64::new(*w, 0.0);
        }
        for (j, p) in paulis.iter().enumerate() {
            let e = (p * rho).trace().re;
            a.sq[j] += e * e;
        }
        a.rho += rho;
    })?;
    let m = drive.m_mc as f64;
    let mut states = Vec::with_capacity(acc.len());
    let mut expectations = Vec::with_capacity(acc.len());
    let mut std_errors = Vec::with_capacity(acc.len());
    for a in acc {
        let rho = a.rho / C64::new(m, 0.0);
        let mean = bloch(&rho);
        let mut se = [0.0; 3];
        if drive.m_mc > 1 {
            for j in 0..3 {
                let var = ((a.sq[j] - m * mean[j] * mean[j]) / (m - 1.0)).max(0.0);
                se[j] = (var / m).sqrt();
            }
        }
        states.push(rho);
        expectations.push(mean);
        std_errors.push(se);
    }
    Ok(DensityTrajectory { times: run.times(), states, expectations, std_errors, m_mc: drive.m_mc, max_norm_drift: drift })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperopTrajectory {
    pub times: Vec<f64>,
    pub superops: Vec<Mat4>,
    pub max_norm_drift: f64,
}

/// Ensemble mean of Ū⊗U, the simulated channel in the column-major vec basis.
pub fn ensemble_superops(
    drive: &DriveConfig,
    freq_noise: &NoiseSource,
    amp_noise: Option<&NoiseSource>,
    seed: u64,
    record_every: usize,
) -> Result<SuperopTrajectory> {
    drive.validate()?;
    if record_every == 0 {
        return Err(Error::InvalidInput("record_every must be positive".into()));
    }
    let run = Run { drive, freq: freq_noise, amp: amp_noise, seed, record_every };
    let init = [Vec2::new(c(1.0, 0.0), c(0.0, 0.0)), Vec2::new(c(0.0, 0.0), c(1.0, 0.0))];
    let (acc, drift) = run.reduce(&init, Mat4::zeros(), |a, vs| {
        let u = Mat2::from_columns(&[vs[0], vs[1]]);
        *a += kron(&u.conjugate(), &u);
    })?;
    let m = C64::new(drive.m_mc as f64, 0.0);
    Ok(SuperopTrajectory { times: run.times(), superops: acc.into_iter().map(|s| s / m).collect(), max_norm_drift: drift })
}
