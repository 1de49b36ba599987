use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    cholesky_chi, cholesky_from_chi, linear_inversion, normalize_cholesky, quadratic_forms, Cholesky, CountRecord,
    Probs, TomographySetup, N_OUTCOMES,
};
use crate::error::{Error, Result};
use crate::linalg::Mat4;
use crate::noisegen::stream_rng;

const STARTS: usize = 8;
const GRAD_TOL: f64 = 1e-9;
const MAX_ITER: usize = 2000;
const MLE_STREAM: u64 = 0x4d4c45;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleResult {
    pub chi: Mat4,
    pub ell: Cholesky,
    /// −Σ f log p at the optimum.
    pub nll: f64,
    pub grad_norm: f64,
    pub converged: bool,
}

/// Scale-invariant negative log-likelihood in ℓ.
pub(crate) struct Objective {
    terms: Vec<(f64, [[f64; 6]; 6])>,
    total: f64,
}

fn quad(q: &[[f64; 6]; 6], l: &Cholesky) -> (f64, [f64; 6]) {
    let mut ql = [0.0; 6];
    for i in 0..6 {
        ql[i] = (0..6).map(|j| q[i][j] * l[j]).sum();
    }
    ((0..6).map(|i| l[i] * ql[i]).sum(), ql)
}

impl Objective {
    pub(crate) fn new(f: &Probs, setup: &TomographySetup) -> Self {
        let qs = quadratic_forms(setup);
        let mut terms = Vec::new();
        let mut total = 0.0;
        for (k, q) in qs.into_iter().enumerate() {
            let w = f[k / N_OUTCOMES][k % N_OUTCOMES];
            if w > 0.0 {
                terms.push((w, q));
                total += w;
            }
        }
        Objective { terms, total }
    }

    /// Σ w log p(ℓ), using the weights given at construction.
    pub(crate) fn log_likelihood(&self, l: &Cholesky) -> f64 {
        let n2: f64 = l.iter().map(|x| x * x).sum();
        let mut acc = -self.total * n2.ln();
        for (w, q) in &self.terms {
            let p = quad(q, l).0;
            if p <= 0.0 {
                return f64::NEG_INFINITY;
            }
            acc += w * p.ln();
        }
        acc
    }

    fn value_grad(&self, l: &Cholesky) -> (f64, [f64; 6]) {
        let n2: f64 = l.iter().map(|x| x * x).sum();
        let mut v = self.total * n2.ln();
        let mut g: [f64; 6] = std::array::from_fn(|i| 2.0 * self.total * l[i] / n2);
        for (w, q) in &self.terms {
            let (p, ql) = quad(q, l);
            if p <= 0.0 {
                return (f64::INFINITY, [0.0; 6]);
            }
            v -= w * p.ln();
            for i in 0..6 {
                g[i] -= 2.0 * w * ql[i] / p;
            }
        }
        (v, g)
    }
}

fn norm(v: &[f64; 6]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn unit(l: &Cholesky) -> Cholesky {
    let n = norm(l);
    l.map(|x| x / n)
}

/// BFGS with backtracking; the iterate is put back on the unit sphere after each step.
fn bfgs(obj: &Objective, start: &Cholesky) -> (Cholesky, f64, f64, bool) {
    let mut x = unit(start);
    let (mut f, mut g) = obj.value_grad(&x);
    let mut h = [[0.0; 6]; 6];
    let reset = |h: &mut [[f64; 6]; 6]| {
        for (i, row) in h.iter_mut().enumerate() {
            *row = [0.0; 6];
            row[i] = 1.0;
        }
    };
    reset(&mut h);
    for _ in 0..MAX_ITER {
        if !f.is_finite() {
            return (x, f, f64::INFINITY, false);
        }
        if norm(&g) < GRAD_TOL {
            return (x, f, norm(&g), true);
        }
        let mut d: [f64; 6] = std::array::from_fn(|i| -(0..6).map(|j| h[i][j] * g[j]).sum::<f64>());
        let mut slope: f64 = (0..6).map(|i| d[i] * g[i]).sum();
        if slope >= 0.0 {
            reset(&mut h);
            d = g.map(|v| -v);
            slope = -norm(&g).powi(2);
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-20 {
            let trial: Cholesky = std::array::from_fn(|i| x[i] + alpha * d[i]);
            let (ft, gt) = obj.value_grad(&trial);
            if ft <= f + 1e-4 * alpha * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            alpha *= 0.5;
        }
        let Some((trial, ft, _)) = accepted else {
            return (x, f, norm(&g), norm(&g) < GRAD_TOL);
        };
        let xn = unit(&trial);
        let (fn_, gn) = obj.value_grad(&xn);
        let s: [f64; 6] = std::array::from_fn(|i| xn[i] - x[i]);
        let y: [f64; 6] = std::array::from_fn(|i| gn[i] - g[i]);
        let sy: f64 = (0..6).map(|i| s[i] * y[i]).sum();
        if sy > 1e-300 {
            let hy: [f64; 6] = std::array::from_fn(|i| (0..6).map(|j| h[i][j] * y[j]).sum());
            let yhy: f64 = (0..6).map(|i| y[i] * hy[i]).sum();
            let rho = 1.0 / sy;
            for i in 0..6 {
                for j in 0..6 {
                    h[i][j] += (1.0 + yhy * rho) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }
        let stalled = (f - fn_).abs() <= 1e-16 * f.abs().max(1.0) && (ft - fn_).abs() < 1e-12;
        x = xn;
        f = fn_;
        g = gn;
        if stalled && norm(&s) < 1e-15 {
            break;
        }
    }
    let gn = norm(&g);
    (x, f, gn, gn < GRAD_TOL)
}

/// Maximum-likelihood block χ from frequencies p_{s,μ} (normalized per basis, scaled by 1/3).
pub fn mle_from_frequencies(f: &Probs, setup: &TomographySetup, seed: u64) -> Result<MleResult> {
    let obj = Objective::new(f, setup);
    let mut starts = vec![cholesky_from_chi(&linear_inversion(f, setup)?)];
    let mut rng = stream_rng(seed, MLE_STREAM, 0);
    while starts.len() < STARTS {
        let l: Cholesky = std::array::from_fn(|i| {
            let v: f64 = rng.random_range(-1.0..1.0);
            if matches!(i, 0 | 2 | 3 | 5) {
                v.abs()
            } else {
                v
            }
        });
        starts.push(l);
    }
    let mut best: Option<(Cholesky, f64, f64, bool)> = None;
    for s in &starts {
        let cand = bfgs(&obj, s);
        if cand.1.is_finite() && best.as_ref().is_none_or(|b| cand.1 < b.1) {
            best = Some(cand);
        }
    }
    let (ell, nll, grad_norm, converged) =
        best.ok_or_else(|| Error::NumericalFailure("no start reached a finite likelihood".into()))?;
    let ell = normalize_cholesky(&ell);
    Ok(MleResult { chi: cholesky_chi(&ell), ell, nll, grad_norm, converged })
}

/// Maximum-likelihood fit of one time's counts, with fixed multi-start seeds.
pub fn mle_fit(counts: &CountRecord, setup: &TomographySetup) -> Result<MleResult> {
    mle_from_frequencies(&counts.frequencies()?, setup, 0)
}
