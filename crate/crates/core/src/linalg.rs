//! Small dense complex matrices for single-qubit states and channels.
//!
//! Superoperators act on column-stacked density matrices, so that
//! `vec(A ρ B) = (Bᵀ ⊗ A) vec(ρ)`. nalgebra stores matrices column-major,
//! which makes `as_slice` the column stacking.

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex64;
pub type Mat2 = Matrix2<C64>;
pub type Mat4 = Matrix4<C64>;
pub type Vec2 = Vector2<C64>;

pub const I: C64 = C64::new(0.0, 1.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const ZERO: C64 = C64::new(0.0, 0.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn id2() -> Mat2 {
    Mat2::identity()
}

pub fn sx() -> Mat2 {
    Mat2::new(ZERO, ONE, ONE, ZERO)
}

pub fn sy() -> Mat2 {
    Mat2::new(ZERO, -I, I, ZERO)
}

pub fn sz() -> Mat2 {
    Mat2::new(ONE, ZERO, ZERO, -ONE)
}

/// Pauli basis in the order (I, σx, σy, σz).
pub fn paulis() -> [Mat2; 4] {
    [id2(), sx(), sy(), sz()]
}

pub fn projector(v: &Vec2) -> Mat2 {
    v * v.adjoint()
}

pub fn ket0() -> Vec2 {
    Vec2::new(ONE, ZERO)
}

pub fn ket1() -> Vec2 {
    Vec2::new(ZERO, ONE)
}

pub fn ket_plus() -> Vec2 {
    Vec2::new(ONE, ONE).unscale(2f64.sqrt())
}

pub fn ket_minus() -> Vec2 {
    Vec2::new(ONE, -ONE).unscale(2f64.sqrt())
}

pub fn ket_plus_i() -> Vec2 {
    Vec2::new(ONE, I).unscale(2f64.sqrt())
}

pub fn ket_minus_i() -> Vec2 {
    Vec2::new(ONE, -I).unscale(2f64.sqrt())
}

/// exp(−i θ n·σ/2) for a real unit axis n.
pub fn rotation(theta: f64, axis: [f64; 3]) -> Mat2 {
    let (s, co) = (0.5 * theta).sin_cos();
    let g = sx() * r(axis[0]) + sy() * r(axis[1]) + sz() * r(axis[2]);
    id2() * r(co) - g * c(0.0, s)
}

/// Ideal Rabi rotation exp(−iΩtσφ/2) with σφ = cosφ σx + sinφ σy.
pub fn drive_unitary(omega: f64, phi: f64, t: f64) -> Mat2 {
    rotation(omega * t, [phi.cos(), phi.sin(), 0.0])
}

/// Kronecker product of two 2×2 matrices.
pub fn kron(a: &Mat2, b: &Mat2) -> Mat4 {
    let mut out = Mat4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[(2 * i + k, 2 * j + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}

pub fn vec_of(m: &Mat2) -> Vector4<C64> {
    Vector4::new(m[(0, 0)], m[(1, 0)], m[(0, 1)], m[(1, 1)])
}

pub fn unvec(v: &Vector4<C64>) -> Mat2 {
    Mat2::new(v[0], v[2], v[1], v[3])
}

/// Superoperator of ρ ↦ U ρ U†.
pub fn unitary_superop(u: &Mat2) -> Mat4 {
    kron(&u.map(|z| z.conj()), u)
}

pub fn apply_superop(s: &Mat4, rho: &Mat2) -> Mat2 {
    unvec(&(s * vec_of(rho)))
}

/// ρ ↦ Σ χ_ab P_a ρ P_b† in the unnormalized Pauli basis.
pub fn apply_chi(chi: &Mat4, rho: &Mat2) -> Mat2 {
    let p = paulis();
    let mut out = Mat2::zeros();
    for a in 0..4 {
        for b in 0..4 {
            if chi[(a, b)] != ZERO {
                out += p[a] * rho * p[b].adjoint() * chi[(a, b)];
            }
        }
    }
    out
}

pub fn chi_to_superop(chi: &Mat4) -> Mat4 {
    let p = paulis();
    let mut s = Mat4::zeros();
    for a in 0..4 {
        for b in 0..4 {
            s += kron(&p[b].map(|z| z.conj()), &p[a]) * chi[(a, b)];
        }
    }
    s
}

pub fn superop_to_chi(s: &Mat4) -> Mat4 {
    let p = paulis();
    let mut chi = Mat4::zeros();
    for a in 0..4 {
        for b in 0..4 {
            let basis = kron(&p[b].map(|z| z.conj()), &p[a]);
            chi[(a, b)] = (basis.adjoint() * s).trace() / 4.0;
        }
    }
    chi
}

pub fn kraus_to_superop(ks: &[Mat2]) -> Mat4 {
    ks.iter().map(unitary_superop).sum()
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues4(m: &Mat4) -> [f64; 4] {
    let h = (m + m.adjoint()) * r(0.5);
    let e = h.symmetric_eigenvalues();
    let mut v = [e[0], e[1], e[2], e[3]];
    v.sort_by(f64::total_cmp);
    v
}

pub fn hermitian_eigenvalues2(m: &Mat2) -> [f64; 2] {
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let b = 0.5 * (m[(0, 1)] + m[(1, 0)].conj());
    let mean = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    [mean - rad, mean + rad]
}

pub fn max_abs2(m: &Mat2) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs4(m: &Mat4) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Bloch vector (⟨σx⟩, ⟨σy⟩, ⟨σz⟩).
pub fn bloch(rho: &Mat2) -> [f64; 3] {
    [
        2.0 * rho[(0, 1)].re,
        -2.0 * rho[(0, 1)].im,
        (rho[(0, 0)] - rho[(1, 1)]).re,
    ]
}

pub fn from_bloch(v: [f64; 3]) -> Mat2 {
    (id2() + sx() * r(v[0]) + sy() * r(v[1]) + sz() * r(v[2])) * r(0.5)
}

/// Haar-random pure state.
pub fn haar_state<R: Rng + ?Sized>(rng: &mut R) -> Vec2 {
    let mut g = || -> f64 { rng.sample(StandardNormal) };
    let v = Vec2::new(c(g(), g()), c(g(), g()));
    v.unscale(v.norm())
}
