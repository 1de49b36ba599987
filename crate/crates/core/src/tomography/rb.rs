//! Single-qubit randomized benchmarking with ±π/2 pulses about x and y.

use std::collections::{HashMap, VecDeque};

use nalgebra::{Matrix4, Vector4};
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::errormap::PauliRates;
use crate::linalg::{paulis, rotation, Mat2};
use crate::noisegen::stream_rng;

const RB_STREAM: u64 = 0x5242;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pulse {
    XPlus,
    XMinus,
    YPlus,
    YMinus,
}

impl Pulse {
    pub const ALL: [Pulse; 4] = [Pulse::XPlus, Pulse::XMinus, Pulse::YPlus, Pulse::YMinus];

    pub fn unitary(&self) -> Mat2 {
        let h = std::f64::consts::FRAC_PI_2;
        match self {
            Pulse::XPlus => rotation(h, [1.0, 0.0, 0.0]),
            Pulse::XMinus => rotation(-h, [1.0, 0.0, 0.0]),
            Pulse::YPlus => rotation(h, [0.0, 1.0, 0.0]),
            Pulse::YMinus => rotation(-h, [0.0, 1.0, 0.0]),
        }
    }

    fn is_y(&self) -> bool {
        matches!(self, Pulse::YPlus | Pulse::YMinus)
    }
}

/// Pauli transfer matrix R_ij = ½ tr(P_i U P_j U†).
pub fn unitary_ptm(u: &Mat2) -> Matrix4<f64> {
    let p = paulis();
    Matrix4::from_fn(|i, j| 0.5 * (p[i] * u * p[j] * u.adjoint()).trace().re)
}

fn key(m: &Matrix4<f64>) -> [i8; 16] {
    std::array::from_fn(|k| m[(k / 4, k % 4)].round() as i8)
}

#[derive(Debug, Clone)]
pub struct CliffordTable {
    pub ptms: Vec<Matrix4<f64>>,
    pub pulses: Vec<Vec<Pulse>>,
    index: HashMap<[i8; 16], usize>,
}

impl CliffordTable {
    /// Breadth-first enumeration, so each element gets a shortest pulse word.
    pub fn generate() -> Self {
        let gens: Vec<(Pulse, Matrix4<f64>)> = Pulse::ALL.iter().map(|p| (*p, unitary_ptm(&p.unitary()))).collect();
        let mut ptms = vec![Matrix4::identity()];
        let mut pulses = vec![Vec::new()];
        let mut index = HashMap::from([(key(&Matrix4::identity()), 0)]);
        let mut queue = VecDeque::from([0usize]);
        while let Some(i) = queue.pop_front() {
            for (p, g) in &gens {
                let next = g * ptms[i];
                let k = key(&next);
                if !index.contains_key(&k) {
                    index.insert(k, ptms.len());
                    let mut word = pulses[i].clone();
                    word.push(*p);
                    ptms.push(next.map(f64::round));
                    pulses.push(word);
                    queue.push_back(ptms.len() - 1);
                }
            }
        }
        CliffordTable { ptms, pulses, index }
    }

    pub fn len(&self) -> usize {
        self.ptms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ptms.is_empty()
    }

    pub fn find(&self, ptm: &Matrix4<f64>) -> Option<usize> {
        self.index.get(&key(ptm)).copied()
    }

    pub fn mean_pulses(&self) -> f64 {
        self.pulses.iter().map(Vec::len).sum::<usize>() as f64 / self.len() as f64
    }
}

/// Per-pulse noise as Pauli transfer matrices, applied before each pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseNoise {
    pub x: Matrix4<f64>,
    pub y: Matrix4<f64>,
}

impl PulseNoise {
    pub fn noiseless() -> Self {
        PulseNoise { x: Matrix4::identity(), y: Matrix4::identity() }
    }

    /// (1−p)ρ + (p/3)(XρX + YρY + ZρZ) on every pulse.
    pub fn depolarizing(p: f64) -> Self {
        let l = 1.0 - 4.0 * p / 3.0;
        let m = Matrix4::from_diagonal(&Vector4::new(1.0, l, l, l));
        PulseNoise { x: m, y: m }
    }

    /// Pauli channel computed for an x drive; y pulses swap the x and y rates.
    pub fn from_x_drive_rates(rates: &PauliRates) -> Self {
        let swapped = PauliRates::new(rates.p_y, rates.p_x, rates.p_z);
        let diag = |r: &PauliRates| Matrix4::from_diagonal(&Vector4::from(r.ptm_diagonal()));
        PulseNoise { x: diag(rates), y: diag(&swapped) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbOptions {
    pub lengths: Vec<usize>,
    pub n_seq: usize,
    pub shots: u64,
    pub seed: u64,
}

impl Default for RbOptions {
    fn default() -> Self {
        RbOptions { lengths: (0..=10).map(|k| 1usize << k).collect(), n_seq: 100, shots: 100, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbResult {
    pub lengths: Vec<usize>,
    pub survival_mean: Vec<f64>,
    pub survival_se: Vec<f64>,
    pub lambda: f64,
    pub amplitude: f64,
    /// Average Clifford infidelity (d−1)(1−λ)/d.
    pub epsilon_rb: f64,
    /// 4(d−1)λ/(3d) + 1/d evaluated literally.
    pub epsilon_literal: f64,
    /// ε_RB divided by the mean pulse count per Clifford.
    pub pulse_proxy: f64,
    pub pulses_per_clifford: f64,
}

fn survival(table: &CliffordTable, noisy: &[Matrix4<f64>], seq: &[usize]) -> Result<f64> {
    let mut ideal = Matrix4::identity();
    let mut state = Vector4::new(1.0, 0.0, 0.0, 1.0);
    let apply = |state: &mut Vector4<f64>, c: usize| {
        for p in &table.pulses[c] {
            let k = Pulse::ALL.iter().position(|q| q == p).unwrap_or(0);
            *state = noisy[k] * *state;
        }
    };
    for &c in seq {
        apply(&mut state, c);
        ideal = table.ptms[c] * ideal;
    }
    let inv = table
        .find(&ideal.transpose())
        .ok_or_else(|| Error::NumericalFailure("inverse Clifford not in table".into()))?;
    apply(&mut state, inv);
    Ok((0.5 * (state[0] + state[3])).clamp(0.0, 1.0))
}

/// Profiled least squares for s = ½ + (A/2)λ^N; returns (λ, A, sse).
pub fn fit_decay(lengths: &[usize], survival: &[f64]) -> Result<(f64, f64, f64)> {
    if lengths.len() != survival.len() || lengths.len() < 2 {
        return Err(Error::FitError("need at least two lengths with survival data".into()));
    }
    let y: Vec<f64> = survival.iter().map(|s| 2.0 * (s - 0.5)).collect();
    let sse = |lam: f64| {
        let (mut sy, mut s2) = (0.0, 0.0);
        for (n, yi) in lengths.iter().zip(&y) {
            let v = lam.powi(*n as i32);
            sy += yi * v;
            s2 += v * v;
        }
        let a = if s2 > 0.0 { sy / s2 } else { 0.0 };
        let e: f64 = lengths.iter().zip(&y).map(|(n, yi)| (yi - a * lam.powi(*n as i32)).powi(2)).sum();
        (e, a)
    };
    // Scan in log(1−λ), then golden-section refinement.
    let mut grid: Vec<f64> = (0..=400).map(|k| 1.0 - 10f64.powf(-8.0 + 8.0 * k as f64 / 400.0)).collect();
    grid.push(1.0);
    grid.push(0.0);
    grid.sort_by(f64::total_cmp);
    let best = (0..grid.len()).min_by(|&i, &j| sse(grid[i]).0.total_cmp(&sse(grid[j]).0)).unwrap_or(0);
    let (mut lo, mut hi) = (grid[best.saturating_sub(1)], grid[(best + 1).min(grid.len() - 1)]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if sse(a).0 < sse(b).0 {
            hi = b;
        } else {
            lo = a;
        }
    }
    let mut lam = 0.5 * (lo + hi);
    if sse(grid[best]).0 < sse(lam).0 {
        lam = grid[best];
    }
    let (e, a) = sse(lam);
    if !(a > 0.0) || !lam.is_finite() {
        return Err(Error::FitError(format!("no decaying signal (A = {a:.3e})")));
    }
    Ok((lam, a, e))
}

/// Decay of the Clifford-averaged depolarizing channel, mean over Cliffords of λ_p^{k}.
pub fn analytic_depolarizing_lambda(p: f64, table: &CliffordTable) -> f64 {
    let l = 1.0 - 4.0 * p / 3.0;
    table.pulses.iter().map(|w| l.powi(w.len() as i32)).sum::<f64>() / table.len() as f64
}

/// Random Clifford sequences with an inverting gate, binomial shot noise and a decay fit.
pub fn rb_simulate(noise: &PulseNoise, opts: &RbOptions) -> Result<RbResult> {
    if opts.lengths.is_empty() || opts.n_seq == 0 || opts.shots == 0 {
        return Err(Error::InvalidInput("need lengths, sequences and shots".into()));
    }
    let table = CliffordTable::generate();
    let noisy: Vec<Matrix4<f64>> = Pulse::ALL
        .iter()
        .map(|p| unitary_ptm(&p.unitary()) * if p.is_y() { noise.y } else { noise.x })
        .collect();
    let jobs: Vec<(usize, usize)> = (0..opts.lengths.len()).flat_map(|i| (0..opts.n_seq).map(move |j| (i, j))).collect();
    let results: Vec<f64> = jobs
        .par_iter()
        .map(|&(i, j)| {
            let mut rng = stream_rng(opts.seed, RB_STREAM, (i * opts.n_seq + j) as u64);
            let seq: Vec<usize> = (0..opts.lengths[i]).map(|_| rng.random_range(0..table.len())).collect();
            let s = survival(&table, &noisy, &seq)?;
            let hits = Binomial::new(opts.shots, s)
                .map_err(|e| Error::NumericalFailure(format!("binomial: {e}")))?
                .sample(&mut rng);
            Ok(hits as f64 / opts.shots as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut mean = vec![0.0; opts.lengths.len()];
    let mut se = vec![0.0; opts.lengths.len()];
    for i in 0..opts.lengths.len() {
        let vals = &results[i * opts.n_seq..(i + 1) * opts.n_seq];
        let n = vals.len() as f64;
        let m = vals.iter().sum::<f64>() / n;
        let var = if vals.len() > 1 { vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        mean[i] = m;
        se[i] = (var / n).sqrt();
    }
    let (lambda, amplitude, _) = fit_decay(&opts.lengths, &mean)?;
    let epsilon_rb = 0.5 * (1.0 - lambda);
    let ppc = table.mean_pulses();
    Ok(RbResult {
        lengths: opts.lengths.clone(),
        survival_mean: mean,
        survival_se: se,
        lambda,
        amplitude,
        epsilon_rb,
        epsilon_literal: 2.0 * lambda / 3.0 + 0.5,
        pulse_proxy: epsilon_rb / ppc,
        pulses_per_clifford: ppc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twenty_four_cliffords() {
        let t = CliffordTable::generate();
        assert_eq!(t.len(), 24);
        assert!((t.mean_pulses() - 52.0 / 24.0).abs() < 1e-12);
        for m in &t.ptms {
            assert!(t.find(&m.transpose()).is_some());
        }
    }

    #[test]
    fn noiseless_survival_is_one() {
        let res = rb_simulate(&PulseNoise::noiseless(), &RbOptions { n_seq: 10, ..Default::default() }).unwrap();
        assert!(res.survival_mean.iter().all(|s| *s == 1.0));
        assert!((res.lambda - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_decay_is_fitted() {
        let lengths: Vec<usize> = (0..=10).map(|k| 1 << k).collect();
        let s: Vec<f64> = lengths.iter().map(|n| 0.5 + 0.45 * 0.997f64.powi(*n as i32)).collect();
        let (lam, a, _) = fit_decay(&lengths, &s).unwrap();
        assert!((lam - 0.997).abs() < 1e-9 && (a - 0.9).abs() < 1e-7);
    }

    #[test]
    fn flat_half_is_fit_error() {
        let lengths = vec![1, 2, 4, 8];
        assert!(matches!(fit_decay(&lengths, &[0.4, 0.4, 0.4, 0.4]), Err(Error::FitError(_))));
    }
}
