//! Simulated process tomography and randomized benchmarking.
//!
//! Four input states and the six-outcome Pauli POVM (weights 1/3) give 24
//! probabilities p_{s,μ} = tr(D_{sμ} χ). Process matrices use the
//! unnormalized Pauli basis of [`crate::errormap`].

mod mh;
mod mle;
pub mod rb;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, paulis, projector, r, Mat2, Mat4, C64};

pub use mh::{mh_chain, restricted_posterior_grid, summarize, ChiPosterior, MhOptions, PosteriorSummary};
pub use mle::{mle_fit, mle_from_frequencies, MleResult};

pub const N_STATES: usize = 4;
pub const N_OUTCOMES: usize = 6;
pub const N_BASES: usize = 3;

/// Probabilities indexed [state][outcome], outcomes ordered x+, x−, y+, y−, z+, z−.
pub type Probs = [[f64; N_OUTCOMES]; N_STATES];

#[derive(Debug, Clone)]
pub struct TomographySetup {
    pub states: [Mat2; N_STATES],
    pub povm: [Mat2; N_OUTCOMES],
    /// D_{sμ}[β][α] = tr(M_μ P_α ρ_s P_β).
    pub d: [[Mat4; N_OUTCOMES]; N_STATES],
}

impl Default for TomographySetup {
    fn default() -> Self {
        Self::new()
    }
}

impl TomographySetup {
    pub fn new() -> Self {
        let states = [
            projector(&linalg::ket0()),
            projector(&linalg::ket1()),
            projector(&linalg::ket_plus()),
            projector(&linalg::ket_plus_i()),
        ];
        let third = r(1.0 / 3.0);
        let povm = [
            projector(&linalg::ket_plus()) * third,
            projector(&linalg::ket_minus()) * third,
            projector(&linalg::ket_plus_i()) * third,
            projector(&linalg::ket_minus_i()) * third,
            projector(&linalg::ket0()) * third,
            projector(&linalg::ket1()) * third,
        ];
        let p = paulis();
        let mut d = [[Mat4::zeros(); N_OUTCOMES]; N_STATES];
        for s in 0..N_STATES {
            for mu in 0..N_OUTCOMES {
                for a in 0..4 {
                    for b in 0..4 {
                        d[s][mu][(b, a)] = (povm[mu] * p[a] * states[s] * p[b]).trace();
                    }
                }
            }
        }
        TomographySetup { states, povm, d }
    }
}

/// Born probabilities p_{s,μ} = tr(D_{sμ} χ).
pub fn born_probs(chi: &Mat4, setup: &TomographySetup) -> Probs {
    let mut p = [[0.0; N_OUTCOMES]; N_STATES];
    for s in 0..N_STATES {
        for mu in 0..N_OUTCOMES {
            p[s][mu] = (setup.d[s][mu] * chi).trace().re;
        }
    }
    p
}

/// Hermitian basis for the 16 real parameters of χ.
fn hermitian_basis() -> Vec<Mat4> {
    let mut out = Vec::with_capacity(16);
    for i in 0..4 {
        let mut m = Mat4::zeros();
        m[(i, i)] = r(1.0);
        out.push(m);
    }
    for i in 0..4 {
        for j in i + 1..4 {
            let mut re = Mat4::zeros();
            re[(i, j)] = r(1.0);
            re[(j, i)] = r(1.0);
            out.push(re);
            let mut im = Mat4::zeros();
            im[(i, j)] = c(0.0, -1.0);
            im[(j, i)] = c(0.0, 1.0);
            out.push(im);
        }
    }
    out
}

/// Unconstrained least-squares χ from probabilities or frequencies.
///
/// Noisy input can produce a χ with negative eigenvalues; it is returned as is.
pub fn linear_inversion(p: &Probs, setup: &TomographySetup) -> Result<Mat4> {
    let basis = hermitian_basis();
    let mut a = DMatrix::<f64>::zeros(N_STATES * N_OUTCOMES, 16);
    let mut y = DVector::<f64>::zeros(N_STATES * N_OUTCOMES);
    for s in 0..N_STATES {
        for mu in 0..N_OUTCOMES {
            let row = s * N_OUTCOMES + mu;
            y[row] = p[s][mu];
            for (k, h) in basis.iter().enumerate() {
                a[(row, k)] = (setup.d[s][mu] * h).trace().re;
            }
        }
    }
    let x = a
        .svd(true, true)
        .solve(&y, 1e-12)
        .map_err(|e| Error::NumericalFailure(format!("linear inversion: {e}")))?;
    Ok(basis.iter().zip(x.iter()).fold(Mat4::zeros(), |acc, (h, v)| acc + h * r(*v)))
}

/// Counts for one time: [state][basis] = (n_plus, n_minus).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub time: f64,
    pub counts: [[(u64, u64); N_BASES]; N_STATES],
}

impl CountRecord {
    pub fn shots(&self, s: usize, b: usize) -> u64 {
        self.counts[s][b].0 + self.counts[s][b].1
    }

    /// Frequencies normalized per basis and scaled to the 1/3-weighted POVM.
    pub fn frequencies(&self) -> Result<Probs> {
        let mut f = [[0.0; N_OUTCOMES]; N_STATES];
        for s in 0..N_STATES {
            for b in 0..N_BASES {
                let n = self.shots(s, b);
                if n == 0 {
                    return Err(Error::DegenerateData(format!("no shots for state {s}, basis {b}")));
                }
                f[s][2 * b] = self.counts[s][b].0 as f64 / n as f64 / 3.0;
                f[s][2 * b + 1] = self.counts[s][b].1 as f64 / n as f64 / 3.0;
            }
        }
        Ok(f)
    }
}

/// Bernoulli shots per (state, basis): a uniform u ∈ [0,1) counts as "+" when u < 3p₊.
pub fn sample_shots<R: Rng + ?Sized>(p: &Probs, shots: u64, time: f64, rng: &mut R) -> CountRecord {
    let mut counts = [[(0u64, 0u64); N_BASES]; N_STATES];
    for s in 0..N_STATES {
        for b in 0..N_BASES {
            let success = (3.0 * p[s][2 * b]).clamp(0.0, 1.0);
            let plus = (0..shots).filter(|_| rng.random::<f64>() < success).count() as u64;
            counts[s][b] = (plus, shots - plus);
        }
    }
    CountRecord { time, counts }
}

/// Block Cholesky parameters (ℓ11, ℓ12, ℓ22, ℓ33, ℓ34, ℓ44).
pub type Cholesky = [f64; 6];

/// χ = diag(L_A L_A†, L_B L_B†) / ‖ℓ‖² with L_A = [[ℓ11,0],[iℓ12,ℓ22]], L_B = [[ℓ33,0],[ℓ34,ℓ44]].
pub fn cholesky_chi(l: &Cholesky) -> Mat4 {
    let n2: f64 = l.iter().map(|x| x * x).sum();
    let mut chi = Mat4::zeros();
    if n2 == 0.0 {
        return chi;
    }
    chi[(0, 0)] = r(l[0] * l[0]);
    chi[(0, 1)] = c(0.0, -l[0] * l[1]);
    chi[(1, 0)] = c(0.0, l[0] * l[1]);
    chi[(1, 1)] = r(l[1] * l[1] + l[2] * l[2]);
    chi[(2, 2)] = r(l[3] * l[3]);
    chi[(2, 3)] = r(l[3] * l[4]);
    chi[(3, 2)] = r(l[3] * l[4]);
    chi[(3, 3)] = r(l[4] * l[4] + l[5] * l[5]);
    chi / r(n2)
}

/// Unit-norm ℓ with nonnegative diagonal.
pub fn normalize_cholesky(l: &Cholesky) -> Cholesky {
    let mut out = *l;
    if out[0] < 0.0 {
        out[0] = -out[0];
        out[1] = -out[1];
    }
    out[2] = out[2].abs();
    if out[3] < 0.0 {
        out[3] = -out[3];
        out[4] = -out[4];
    }
    out[5] = out[5].abs();
    let n = out.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        out.iter_mut().for_each(|x| *x /= n);
    }
    out
}

/// Cholesky parameters of the block-structured part of a Hermitian χ.
///
/// Off-block entries and components that break trace preservation are
/// dropped, and negative pivots are clipped to zero.
pub fn cholesky_from_chi(chi: &Mat4) -> Cholesky {
    let block = |a: C64, off: f64, d: C64| {
        let l0 = a.re.max(0.0).sqrt();
        let l1 = if l0 > 1e-12 { off / l0 } else { 0.0 };
        let l2 = (d.re - l1 * l1).max(0.0).sqrt();
        (l0, l1, l2)
    };
    let (a0, a1, a2) = block(chi[(0, 0)], chi[(1, 0)].im, chi[(1, 1)]);
    let (b0, b1, b2) = block(chi[(2, 2)], chi[(3, 2)].re, chi[(3, 3)]);
    let l = [a0, a1, a2, b0, b1, b2];
    if l.iter().all(|x| *x == 0.0) {
        return [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    }
    normalize_cholesky(&l)
}

/// Random block χ that is completely positive and trace preserving.
pub fn random_block_chi<R: Rng + ?Sized>(rng: &mut R) -> Mat4 {
    let l: Cholesky = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
    cholesky_chi(&l)
}

/// Quadratic forms Q with ℓᵀ Q ℓ = tr(D χ_raw(ℓ)) for the unnormalized χ.
pub(crate) fn quadratic_forms(setup: &TomographySetup) -> Vec<[[f64; 6]; 6]> {
    let mut out = Vec::with_capacity(N_STATES * N_OUTCOMES);
    let unit = |i: usize| {
        let mut l = [0.0; 6];
        l[i] = 1.0;
        l
    };
    // χ_raw is a quadratic polynomial in ℓ; recover the symmetric form by polarization.
    let raw = |l: &Cholesky| cholesky_chi(l) * r(l.iter().map(|x| x * x).sum::<f64>());
    for s in 0..N_STATES {
        for mu in 0..N_OUTCOMES {
            let f = |l: &Cholesky| (setup.d[s][mu] * raw(l)).trace().re;
            let mut q = [[0.0; 6]; 6];
            for i in 0..6 {
                q[i][i] = f(&unit(i));
            }
            for i in 0..6 {
                for j in i + 1..6 {
                    let mut l = [0.0; 6];
                    l[i] = 1.0;
                    l[j] = 1.0;
                    let v = 0.5 * (f(&l) - q[i][i] - q[j][j]);
                    q[i][j] = v;
                    q[j][i] = v;
                }
            }
            out.push(q);
        }
    }
    out
}

/// Gate error 1 − F of a process matrix against the target unitary.
pub fn gate_error_of(chi: &Mat4, target: &Mat2) -> f64 {
    1.0 - crate::errormap::avg_gate_fidelity(&crate::errormap::Channel::Chi(*chi), target)
}
