use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::mle::{mle_fit, Objective};
use super::{cholesky_chi, gate_error_of, normalize_cholesky, Cholesky, CountRecord, Probs, TomographySetup};
use crate::error::{Error, Result};
use crate::linalg::Mat2;
use crate::noisegen::stream_rng;

const MH_STREAM: u64 = 0x4d48;
const DIAGONAL: [bool; 6] = [true, false, true, true, false, true];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MhOptions {
    pub steps: usize,
    /// Initial proposal width, shared by all free coordinates.
    pub width: f64,
    pub burn_frac: f64,
    pub target_acceptance: f64,
    pub seed: u64,
    /// Coordinates that move; the rest stay at the start value.
    pub free: [bool; 6],
    pub start: Option<Cholesky>,
    pub quantiles: (f64, f64),
}

impl Default for MhOptions {
    fn default() -> Self {
        MhOptions {
            steps: 100_000,
            width: 0.02,
            burn_frac: 0.1,
            target_acceptance: 0.3,
            seed: 0,
            free: [true; 6],
            start: None,
            quantiles: (0.025, 0.975),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub mode: f64,
    pub mean: f64,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiPosterior {
    /// Recorded chain states, normalized to unit norm.
    pub samples: Vec<Cholesky>,
    pub gate_errors: Vec<f64>,
    pub acceptance: f64,
    pub width: f64,
    pub summary: PosteriorSummary,
    pub warning: Option<String>,
}

fn bounds(i: usize) -> (f64, f64) {
    if DIAGONAL[i] {
        (0.0, 1.0)
    } else {
        (-1.0, 1.0)
    }
}

/// Mass of N(x, w²) inside the box for coordinate i.
fn log_mass(i: usize, x: f64, w: f64) -> f64 {
    let (lo, hi) = bounds(i);
    let above = 0.5 * erfc((hi - x) / (w * std::f64::consts::SQRT_2));
    let below = 0.5 * erfc((x - lo) / (w * std::f64::consts::SQRT_2));
    (1.0 - above - below).max(1e-300).ln()
}

fn truncated_normal<R: Rng + ?Sized>(rng: &mut R, i: usize, x: f64, w: f64) -> f64 {
    let (lo, hi) = bounds(i);
    loop {
        let z: f64 = rng.sample(StandardNormal);
        let y = x + w * z;
        let inside = if DIAGONAL[i] { y >= lo && y <= hi } else { y > lo && y < hi };
        if inside {
            return y;
        }
    }
}

/// Quantile by linear interpolation of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] + (pos - i as f64) * (sorted[j] - sorted[i])
}

fn histogram_mode(sorted: &[f64]) -> f64 {
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    if hi <= lo {
        return lo;
    }
    let bins = ((sorted.len() as f64).sqrt() as usize).clamp(20, 200);
    let mut counts = vec![0usize; bins];
    for &v in sorted {
        let k = (((v - lo) / (hi - lo)) * bins as f64) as usize;
        counts[k.min(bins - 1)] += 1;
    }
    let k = counts.iter().enumerate().max_by_key(|(i, c)| (**c, usize::MAX - i)).map(|(i, _)| i).unwrap_or(0);
    lo + (k as f64 + 0.5) * (hi - lo) / bins as f64
}

pub fn summarize(values: &[f64], quantiles: (f64, f64)) -> PosteriorSummary {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    PosteriorSummary {
        mode: histogram_mode(&sorted),
        mean: values.iter().sum::<f64>() / values.len() as f64,
        median: quantile(&sorted, 0.5),
        lower: quantile(&sorted, quantiles.0),
        upper: quantile(&sorted, quantiles.1),
    }
}

fn count_weights(counts: &CountRecord) -> Probs {
    let mut w = [[0.0; 6]; 4];
    for s in 0..4 {
        for b in 0..3 {
            w[s][2 * b] = counts.counts[s][b].0 as f64;
            w[s][2 * b + 1] = counts.counts[s][b].1 as f64;
        }
    }
    w
}

/// Metropolis–Hastings over the block Cholesky parameters.
///
/// The chain moves the unnormalized ℓ inside the box (diagonal in [0,1],
/// off-diagonal in (−1,1)) with truncated Gaussian proposals; the likelihood
/// only sees ℓ/‖ℓ‖. Recorded samples are normalized. Proposal widths adapt
/// toward the target acceptance during burn-in and stay fixed afterwards.
pub fn mh_chain(counts: &CountRecord, setup: &TomographySetup, target: &Mat2, opts: &MhOptions) -> Result<ChiPosterior> {
    if opts.steps < 10 {
        return Err(Error::InvalidInput("chain needs at least 10 steps".into()));
    }
    if !(opts.width > 0.0) {
        return Err(Error::InvalidInput("proposal width must be positive".into()));
    }
    counts.frequencies()?;
    let obj = Objective::new(&count_weights(counts), setup);
    let mut x = match opts.start {
        Some(l) => l,
        None => mle_fit(counts, setup)?.ell,
    };
    for (i, v) in x.iter_mut().enumerate() {
        let (lo, hi) = bounds(i);
        *v = v.clamp(lo, hi);
        if !DIAGONAL[i] {
            *v = v.clamp(-1.0 + 1e-12, 1.0 - 1e-12);
        }
    }
    let mut ll = obj.log_likelihood(&x);
    if !ll.is_finite() {
        return Err(Error::NumericalFailure("chain start has zero likelihood".into()));
    }
    let mut rng = stream_rng(opts.seed, MH_STREAM, 0);
    let burn = (opts.burn_frac * opts.steps as f64).round() as usize;
    let mut log_w = opts.width.ln();
    let mut accepted = 0usize;
    let mut samples = Vec::with_capacity(opts.steps - burn);
    for k in 0..opts.steps {
        let w = log_w.exp();
        let mut y = x;
        let mut log_q = 0.0;
        for i in 0..6 {
            if opts.free[i] {
                y[i] = truncated_normal(&mut rng, i, x[i], w);
                log_q += log_mass(i, x[i], w) - log_mass(i, y[i], w);
            }
        }
        let ll_y = obj.log_likelihood(&y);
        let log_a = ll_y - ll + log_q;
        let accept = ll_y.is_finite() && (log_a >= 0.0 || rng.random::<f64>().ln() < log_a);
        if accept {
            x = y;
            ll = ll_y;
        }
        if k < burn {
            let gain = 1.0 / (k as f64 + 1.0).powf(0.6);
            log_w += gain * (f64::from(u8::from(accept)) - opts.target_acceptance);
            log_w = log_w.min(0.0);
        } else {
            accepted += usize::from(accept);
            samples.push(normalize_cholesky(&x));
        }
    }
    let gate_errors: Vec<f64> = samples.iter().map(|l| gate_error_of(&cholesky_chi(l), target)).collect();
    let acceptance = accepted as f64 / samples.len() as f64;
    let warning = (!(0.1..=0.6).contains(&acceptance))
        .then(|| format!("acceptance rate {acceptance:.3} outside [0.1, 0.6]; proposal width may need tuning"));
    Ok(ChiPosterior {
        summary: summarize(&gate_errors, opts.quantiles),
        samples,
        gate_errors,
        acceptance,
        width: log_w.exp(),
        warning,
    })
}

/// Gate-error quantiles of the posterior restricted to two free coordinates,
/// by direct midpoint integration over their box.
pub fn restricted_posterior_grid(
    counts: &CountRecord,
    setup: &TomographySetup,
    target: &Mat2,
    base: &Cholesky,
    free: [usize; 2],
    n: usize,
    quantiles: &[f64],
) -> Result<Vec<f64>> {
    let obj = Objective::new(&count_weights(counts), setup);
    let (a0, a1) = bounds(free[0]);
    let (b0, b1) = bounds(free[1]);
    let mut cells = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut l = *base;
            l[free[0]] = a0 + (a1 - a0) * (i as f64 + 0.5) / n as f64;
            l[free[1]] = b0 + (b1 - b0) * (j as f64 + 0.5) / n as f64;
            let ll = obj.log_likelihood(&l);
            if ll.is_finite() {
                cells.push((gate_error_of(&cholesky_chi(&l), target), ll));
            }
        }
    }
    if cells.is_empty() {
        return Err(Error::NumericalFailure("posterior vanishes on the grid".into()));
    }
    let max = cells.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    let weights: Vec<f64> = cells.iter().map(|c| (c.1 - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut out = Vec::with_capacity(quantiles.len());
    for &q in quantiles {
        let goal = q * total;
        let mut acc = 0.0;
        let mut value = cells[cells.len() - 1].0;
        for (c, w) in cells.iter().zip(&weights) {
            if acc + w >= goal {
                value = c.0;
                break;
            }
            acc += w;
        }
        out.push(value);
    }
    Ok(out)
}
