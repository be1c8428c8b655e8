//! Velocity recovery from vorticity.
//!
//! Two independent routes: the torus-spectral inversion used by the solver,
//! and a free-space quadrature oracle that measures the periodization error
//! instead of assuming it away. The gradient additionally splits into near
//! and far kernel contributions with a smooth radial cutoff.

use rayon::prelude::*;
use rustfft::num_complex::Complex;

use crate::fields::spectral::{forward, inverse_real, wavenumbers, wavenumbers_odd};
use crate::fields::{spectral_derivative, Axis, ScalarField, VelocityField};
use crate::{Error, Real, Result};

/// The four gradient components, `[i][j]` holding d u_{i+1} / d x_{j+1}.
pub type VelocityGradient<T> = [[ScalarField<T>; 2]; 2];

/// u = perp-gradient of the inverse Laplacian of omega, on the torus.
///
/// The zero wavenumber is dropped, so the inversion acts on omega minus its
/// mean and the returned velocity has zero mean. The gradient components are
/// produced from the same spectrum, so they agree with spectral derivatives
/// of u1, u2 to roundoff.
pub fn velocity_spectral<T: Real>(omega: &ScalarField<T>) -> VelocityField<T> {
    let grid = omega.grid();
    let n = grid.n();
    let spec = forward(omega);
    let kf = wavenumbers(&grid);
    let ko = wavenumbers_odd(&grid);

    let zero = Complex::new(T::zero(), T::zero());
    let mut u1 = vec![zero; n * n];
    let mut u2 = vec![zero; n * n];
    for i in 0..n {
        for j in 0..n {
            let denom = kf[i] * kf[i] + kf[j] * kf[j];
            if denom == T::zero() {
                continue;
            }
            let w = spec[i * n + j];
            // u1_hat = i k2 w / |k|^2, u2_hat = -i k1 w / |k|^2
            let a = ko[j] / denom;
            let b = ko[i] / denom;
            u1[i * n + j] = Complex::new(-a * w.im, a * w.re);
            u2[i * n + j] = Complex::new(b * w.im, -b * w.re);
        }
    }

    let times_ik = |spec: &[Complex<T>], axis: Axis| {
        let mut out = spec.to_vec();
        for i in 0..n {
            for j in 0..n {
                let kk = match axis {
                    Axis::X1 => ko[i],
                    Axis::X2 => ko[j],
                };
                let z = out[i * n + j];
                out[i * n + j] = Complex::new(-z.im * kk, z.re * kk);
            }
        }
        out
    };

    let d1u1 = inverse_real(grid, times_ik(&u1, Axis::X1));
    let d2u1 = inverse_real(grid, times_ik(&u1, Axis::X2));
    let d1u2 = inverse_real(grid, times_ik(&u2, Axis::X1));
    let d2u2 = inverse_real(grid, times_ik(&u2, Axis::X2));
    VelocityField {
        u1: inverse_real(grid, u1),
        u2: inverse_real(grid, u2),
        grad: [[d1u1, d2u1], [d1u2, d2u2]],
    }
}

/// Spectral velocity gradient alone; see [`velocity_spectral`].
pub fn velocity_gradient<T: Real>(omega: &ScalarField<T>) -> VelocityGradient<T> {
    velocity_spectral(omega).grad
}

const DIRECT_MAX_N: usize = 128;

fn ensure_oracle_scale(n: usize) -> Result<()> {
    if n > DIRECT_MAX_N {
        return Err(Error::Config(format!(
            "free-space quadrature is an O(n^4) oracle, refusing n = {n} > {DIRECT_MAX_N}"
        )));
    }
    Ok(())
}

/// Both kernel components tabulated over all free-space node offsets,
/// scaled by `weight(|z|)`. The zero offset is zero: the kernel is odd, so
/// the singular cell integrates to zero at leading order.
fn kernel_tables<T: Real>(
    grid: &crate::fields::Grid2D<T>,
    weight: impl Fn(f64) -> f64,
) -> (Vec<T>, Vec<T>) {
    let n = grid.n() as isize;
    let dx = grid.dx().as_f64();
    let side = (2 * n - 1) as usize;
    let mut k1 = vec![T::zero(); side * side];
    let mut k2 = vec![T::zero(); side * side];
    let norm = 1.0 / (2.0 * std::f64::consts::PI);
    for di in -(n - 1)..=(n - 1) {
        for dj in -(n - 1)..=(n - 1) {
            if di == 0 && dj == 0 {
                continue;
            }
            let z1 = di as f64 * dx;
            let z2 = dj as f64 * dx;
            let r2 = z1 * z1 + z2 * z2;
            let w = weight(r2.sqrt()) * norm / r2;
            let idx = (di + n - 1) as usize * side + (dj + n - 1) as usize;
            k1[idx] = T::of(-z2 * w);
            k2[idx] = T::of(z1 * w);
        }
    }
    (k1, k2)
}

/// Plain quadrature of the kernel table against `src` over every target
/// node. Each target accumulates in a fixed order, so the result does not
/// depend on the thread count.
fn free_space_convolution<T: Real>(tab: &[T], src: &ScalarField<T>) -> ScalarField<T> {
    let grid = src.grid();
    let n = grid.n();
    let side = 2 * n - 1;
    let cell = grid.cell_area();
    let values = src.values();
    let mut out = vec![T::zero(); n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(ia, dst)| {
        for ib in 0..n {
            let tab_row = &tab[(ia + n - 1 - ib) * side..];
            let src_row = &values[ib * n..(ib + 1) * n];
            for (ja, d) in dst.iter_mut().enumerate() {
                let tab_off = &tab_row[ja..ja + n];
                let mut acc = T::zero();
                // tab index ja - jb + n - 1 = (ja + n - 1) - jb
                for jb in 0..n {
                    acc = acc + tab_off[n - 1 - jb] * src_row[jb];
                }
                *d = *d + acc;
            }
        }
        for d in dst.iter_mut() {
            *d = *d * cell;
        }
    });
    ScalarField::from_values(grid, out).expect("buffer sized to grid")
}

/// Second-order periodic centered differences, kept deliberately free of
/// the transform machinery: the singular-cell correction below must stay
/// independent of the spectral route it helps to audit.
fn centered_gradient<T: Real>(f: &ScalarField<T>) -> (ScalarField<T>, ScalarField<T>) {
    let grid = f.grid();
    let n = grid.n();
    let inv2h = T::one() / (T::of(2.0) * grid.dx());
    let mut g1 = vec![T::zero(); n * n];
    let mut g2 = vec![T::zero(); n * n];
    for i in 0..n {
        let (ip, im) = ((i + 1) % n, (i + n - 1) % n);
        for j in 0..n {
            let (jp, jm) = ((j + 1) % n, (j + n - 1) % n);
            g1[i * n + j] = (f.get(ip, j) - f.get(im, j)) * inv2h;
            g2[i * n + j] = (f.get(i, jp) - f.get(i, jm)) * inv2h;
        }
    }
    (
        ScalarField::from_values(grid, g1).expect("buffer sized to grid"),
        ScalarField::from_values(grid, g2).expect("buffer sized to grid"),
    )
}

/// Free-space Biot-Savart oracle: direct quadrature of K * omega with
/// K(z) = z_perp / (2 pi |z|^2) over the truncated plane. O(n^4), so the
/// grid is capped; this is the reference the spectral route is measured
/// against.
///
/// The singular cell's kernel integral vanishes by oddness; its first
/// moment against grad(omega) does not, and is restored analytically:
/// u1 += dx^2/(4 pi) d2(omega), u2 -= dx^2/(4 pi) d1(omega). Without it
/// the velocity error is dx^2 |grad omega| / (4 pi), an order of magnitude
/// above the oracle budget. The gradient components stay pure punctured
/// sums so the near/far split reproduces them exactly.
pub fn velocity_direct<T: Real>(omega: &ScalarField<T>) -> Result<VelocityField<T>> {
    ensure_oracle_scale(omega.grid().n())?;
    let grid = omega.grid();
    let (k1, k2) = kernel_tables(&grid, |_| 1.0);
    let d1 = spectral_derivative(omega, Axis::X1, 1)?;
    let d2 = spectral_derivative(omega, Axis::X2, 1)?;
    let (c1, c2) = centered_gradient(omega);
    let moment = grid.dx() * grid.dx() / T::of(4.0 * std::f64::consts::PI);
    let u1 = free_space_convolution(&k1, omega).zip_with(&c2, |u, d| u + moment * d)?;
    let u2 = free_space_convolution(&k2, omega).zip_with(&c1, |u, d| u - moment * d)?;
    Ok(VelocityField {
        u1,
        u2,
        grad: [
            [
                free_space_convolution(&k1, &d1),
                free_space_convolution(&k1, &d2),
            ],
            [
                free_space_convolution(&k2, &d1),
                free_space_convolution(&k2, &d2),
            ],
        ],
    })
}

/// Radial cutoff: 1 on [0, 1/2], 0 on [1, infinity), quintic in between.
/// The transition is C^2 with slope bounded by 3.75.
#[derive(Clone, Copy, Debug, Default)]
pub struct KernelCutoff;

impl KernelCutoff {
    pub fn standard() -> Self {
        KernelCutoff
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r <= 0.5 {
            1.0
        } else if r >= 1.0 {
            0.0
        } else {
            let s = 2.0 * r - 1.0;
            // clamp: the polynomial can stray below 0 by an ulp near r = 1
            (1.0 - s * s * s * (10.0 + s * (-15.0 + 6.0 * s))).clamp(0.0, 1.0)
        }
    }
}

/// Gradient contributions of the kernel acting on grad(omega), split at
/// unit distance by the cutoff: near carries weight phi, far carries
/// 1 - phi. By construction near + far equals velocity_direct's gradient
/// up to roundoff.
pub fn near_far_split<T: Real>(
    omega: &ScalarField<T>,
    cutoff: KernelCutoff,
) -> Result<(VelocityGradient<T>, VelocityGradient<T>)> {
    ensure_oracle_scale(omega.grid().n())?;
    let grid = omega.grid();
    let d1 = spectral_derivative(omega, Axis::X1, 1)?;
    let d2 = spectral_derivative(omega, Axis::X2, 1)?;
    let (n1, n2) = kernel_tables(&grid, |r| cutoff.eval(r));
    let (f1, f2) = kernel_tables(&grid, |r| 1.0 - cutoff.eval(r));
    let near = [
        [
            free_space_convolution(&n1, &d1),
            free_space_convolution(&n1, &d2),
        ],
        [
            free_space_convolution(&n2, &d1),
            free_space_convolution(&n2, &d2),
        ],
    ];
    let far = [
        [
            free_space_convolution(&f1, &d1),
            free_space_convolution(&f1, &d2),
        ],
        [
            free_space_convolution(&f2, &d1),
            free_space_convolution(&f2, &d2),
        ],
    ];
    Ok((near, far))
}

/// Sup over nodes of the operator norm of a gradient quadruple.
pub fn gradient_sup<T: Real>(grad: &VelocityGradient<T>) -> T {
    let a = grad[0][0].values();
    let b = grad[0][1].values();
    let c = grad[1][0].values();
    let d = grad[1][1].values();
    let mut best = T::zero();
    for k in 0..a.len() {
        best = best.max(crate::fields::spectral_norm_2x2([
            [a[k], b[k]],
            [c[k], d[k]],
        ]));
    }
    best
}
