//! Adaptive Gauss–Kronrod (7/15) quadrature for vector-valued integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct Panel<const N: usize> {
    pub a: f64,
    pub b: f64,
    pub value: [f64; N],
    pub error: [f64; N],
    pub abs: [f64; N],
}

/// One 15-point Kronrod panel with the embedded 7-point Gauss error estimate.
pub fn gk15<const N: usize, F: FnMut(f64) -> [f64; N]>(f: &mut F, a: f64, b: f64) -> Panel<N> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut k = [0.0; N];
    let mut g = [0.0; N];
    let mut abs = [0.0; N];
    for n in 0..N {
        k[n] = WGK[7] * fc[n];
        g[n] = WG[3] * fc[n];
        abs[n] = WGK[7] * fc[n].abs();
    }
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        for n in 0..N {
            let s = f1[n] + f2[n];
            k[n] += WGK[j] * s;
            abs[n] += WGK[j] * (f1[n].abs() + f2[n].abs());
            if j % 2 == 1 {
                g[n] += WG[j / 2] * s;
            }
        }
    }
    let mut value = [0.0; N];
    let mut error = [0.0; N];
    for n in 0..N {
        value[n] = k[n] * half;
        error[n] = ((k[n] - g[n]) * half).abs();
        abs[n] *= half.abs();
    }
    Panel { a, b, value, error, abs }
}

struct Keyed<const N: usize> {
    key: f64,
    panel: Panel<N>,
}

impl<const N: usize> PartialEq for Keyed<N> {
    fn eq(&self, other: &Self) -> bool {
        self.key.total_cmp(&other.key) == Ordering::Equal
    }
}
impl<const N: usize> Eq for Keyed<N> {}
impl<const N: usize> PartialOrd for Keyed<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const N: usize> Ord for Keyed<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.total_cmp(&other.key)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult<const N: usize> {
    pub value: [f64; N],
    pub error: [f64; N],
    /// Integral of |f|, the scale against which relative accuracy is judged.
    pub abs: [f64; N],
    pub evals: usize,
}

/// Globally adaptive integration over the union of the given intervals.
///
/// Each component converges when its error estimate drops below
/// `max(abs_tol, rel_tol·∫|f|)`. The L1 scale keeps components that cancel to
/// nearly zero from forcing endless refinement.
pub fn integrate_intervals<const N: usize, F: FnMut(f64) -> [f64; N]>(
    mut f: F,
    intervals: &[(f64, f64)],
    rel_tol: f64,
    abs_tol: f64,
    max_panels: usize,
) -> Result<QuadResult<N>> {
    let mut heap: BinaryHeap<Keyed<N>> = BinaryHeap::new();
    let mut value = [0.0; N];
    let mut error = [0.0; N];
    let mut abs = [0.0; N];
    let mut evals = 0;
    let push = |p: Panel<N>, heap: &mut BinaryHeap<Keyed<N>>, error_scale: &[f64; N]| {
        let key = (0..N)
            .map(|n| p.error[n] / error_scale[n].max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        heap.push(Keyed { key, panel: p });
    };
    let mut panels = Vec::with_capacity(intervals.len());
    for &(a, b) in intervals {
        if b > a {
            let p = gk15(&mut f, a, b);
            evals += 15;
            for n in 0..N {
                value[n] += p.value[n];
                error[n] += p.error[n];
                abs[n] += p.abs[n];
            }
            panels.push(p);
        }
    }
    let scale = |abs: &[f64; N]| {
        let mut s = [0.0; N];
        for n in 0..N {
            s[n] = (rel_tol * abs[n]).max(abs_tol);
        }
        s
    };
    let s0 = scale(&abs);
    for p in panels {
        push(p, &mut heap, &s0);
    }
    loop {
        let tol = scale(&abs);
        if (0..N).all(|n| error[n] <= tol[n]) {
            return Ok(QuadResult { value, error, abs, evals });
        }
        if heap.len() >= max_panels {
            return Err(Error::NumericalFailure(format!(
                "quadrature did not converge after {} panels: error {:?} vs tolerance {:?}",
                heap.len(),
                error,
                tol
            )));
        }
        let worst = match heap.pop() {
            Some(w) => w.panel,
            None => return Ok(QuadResult { value, error, abs, evals }),
        };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::NumericalFailure(format!(
                "quadrature panel collapsed at {}",
                worst.a
            )));
        }
        let left = gk15(&mut f, worst.a, mid);
        let right = gk15(&mut f, mid, worst.b);
        evals += 30;
        for n in 0..N {
            value[n] += left.value[n] + right.value[n] - worst.value[n];
            error[n] += left.error[n] + right.error[n] - worst.error[n];
            abs[n] += left.abs[n] + right.abs[n] - worst.abs[n];
        }
        push(left, &mut heap, &tol);
        push(right, &mut heap, &tol);
    }
}

/// Scalar adaptive integral on [a, b].
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> Result<f64> {
    let res = integrate_intervals(|x| [f(x)], &[(a, b)], rel_tol, abs_tol, 100_000)?;
    Ok(res.value[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let v = integrate(|x| x.powi(5) - 2.0 * x, 0.0, 2.0, 1e-14, 0.0).unwrap();
        assert!((v - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
    }

    #[test]
    fn oscillatory_and_peaked() {
        let v = integrate(|x| (50.0 * x).cos(), 0.0, 3.0, 1e-12, 0.0).unwrap();
        assert!((v - (150.0f64).sin() / 50.0).abs() < 1e-12);
        let v = integrate(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-12, 0.0).unwrap();
        let exact = 2.0 * (1.0 / 1e-2f64).atan() / 1e-2;
        assert!((v / exact - 1.0).abs() < 1e-11);
    }

    #[test]
    fn vector_components_share_nodes() {
        let res = integrate_intervals(|x| [x.sin(), x.cos(), 1.0], &[(0.0, 1.0), (1.0, 2.0)], 1e-13, 0.0, 1000)
            .unwrap();
        assert!((res.value[0] - (1.0 - 2f64.cos())).abs() < 1e-13);
        assert!((res.value[1] - 2f64.sin()).abs() < 1e-13);
        assert!((res.value[2] - 2.0).abs() < 1e-14);
    }
}
