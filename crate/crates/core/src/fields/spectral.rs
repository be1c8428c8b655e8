//! FFT plumbing and spectral differentiation on the periodic square.
//!
//! Wavenumbers are k = (pi/L) * m with integer m in (-n/2, n/2]. Odd-order
//! derivative factors zero the Nyquist line m = n/2, which has no signed
//! representative; even orders keep it.

use std::any::{Any, TypeId};
use std::collections::HashMap;
use std::sync::{Arc, LazyLock, Mutex};

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{Grid2D, ScalarField};
use crate::{Error, Real, Result};

/// Which coordinate to differentiate along.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X1,
    X2,
}

/// Process-wide plan cache, keyed by scalar type, transform length and
/// direction. Plans are immutable once built and safe to share; the mutex
/// only guards the map itself.
type PlanCache = HashMap<(TypeId, usize, bool), Arc<dyn Any + Send + Sync>>;
static PLANS: LazyLock<Mutex<PlanCache>> = LazyLock::new(Mutex::default);

fn plan<T: Real>(n: usize, inverse: bool) -> Arc<dyn Fft<T>> {
    let key = (TypeId::of::<T>(), n, inverse);
    let slot = {
        let mut map = PLANS.lock().expect("plan cache lock");
        map.entry(key)
            .or_insert_with(|| {
                let mut planner = FftPlanner::<T>::new();
                let fft = if inverse {
                    planner.plan_fft_inverse(n)
                } else {
                    planner.plan_fft_forward(n)
                };
                Arc::new(fft) as Arc<dyn Any + Send + Sync>
            })
            .clone()
    };
    slot.downcast::<Arc<dyn Fft<T>>>()
        .expect("plan cache entry type")
        .as_ref()
        .clone()
}

fn transpose_square<T: Copy>(n: usize, a: &mut [T]) {
    for i in 0..n {
        for j in (i + 1)..n {
            a.swap(i * n + j, j * n + i);
        }
    }
}

/// In-place 2D transform of a row-major n x n complex buffer. The inverse
/// carries the 1/n^2 normalization.
pub(crate) fn fft2<T: Real>(n: usize, data: &mut [Complex<T>], inverse: bool) {
    debug_assert_eq!(data.len(), n * n);
    let fft = plan::<T>(n, inverse);
    let scratch = fft.get_inplace_scratch_len();
    let pass = |buf: &mut [Complex<T>]| {
        buf.par_chunks_exact_mut(n).for_each_init(
            || vec![Complex::new(T::zero(), T::zero()); scratch],
            |sc, row| fft.process_with_scratch(row, sc),
        );
    };
    pass(data);
    transpose_square(n, data);
    pass(data);
    transpose_square(n, data);
    if inverse {
        let s = T::one() / T::of_usize(n * n);
        for z in data.iter_mut() {
            *z = Complex::new(z.re * s, z.im * s);
        }
    }
}

pub(crate) fn forward<T: Real>(field: &ScalarField<T>) -> Vec<Complex<T>> {
    let n = field.grid().n();
    let mut data: Vec<Complex<T>> = field
        .values()
        .iter()
        .map(|&v| Complex::new(v, T::zero()))
        .collect();
    fft2(n, &mut data, false);
    data
}

/// Inverse transform keeping the real part; the imaginary residue of a
/// conjugate-symmetric spectrum is pure roundoff.
pub(crate) fn inverse_real<T: Real>(grid: Grid2D<T>, mut spec: Vec<Complex<T>>) -> ScalarField<T> {
    fft2(grid.n(), &mut spec, true);
    let values = spec.into_iter().map(|z| z.re).collect();
    ScalarField::from_values(grid, values).expect("spectrum length matches grid")
}

/// Signed wavenumbers (pi/L) * (0, 1, ..., n/2, -(n/2 - 1), ..., -1).
pub(crate) fn wavenumbers<T: Real>(grid: &Grid2D<T>) -> Vec<T> {
    let n = grid.n();
    let k0 = T::PI() / grid.half_width();
    (0..n)
        .map(|i| {
            let m = if i <= n / 2 {
                i as isize
            } else {
                i as isize - n as isize
            };
            k0 * T::of(m as f64)
        })
        .collect()
}

/// Wavenumbers for odd-order derivative factors: Nyquist zeroed.
pub(crate) fn wavenumbers_odd<T: Real>(grid: &Grid2D<T>) -> Vec<T> {
    let n = grid.n();
    let mut k = wavenumbers(grid);
    k[n / 2] = T::zero();
    k
}

/// Spectral partial derivative of order 1 or 2 along one axis.
pub fn spectral_derivative<T: Real>(
    f: &ScalarField<T>,
    axis: Axis,
    order: u32,
) -> Result<ScalarField<T>> {
    if order != 1 && order != 2 {
        return Err(Error::Config(format!(
            "derivative order must be 1 or 2, got {order}"
        )));
    }
    let grid = f.grid();
    let n = grid.n();
    let mut spec = forward(f);
    match order {
        1 => {
            let k = wavenumbers_odd(&grid);
            for i in 0..n {
                for j in 0..n {
                    let kk = match axis {
                        Axis::X1 => k[i],
                        Axis::X2 => k[j],
                    };
                    let z = spec[i * n + j];
                    // multiply by i*k
                    spec[i * n + j] = Complex::new(-z.im * kk, z.re * kk);
                }
            }
        }
        _ => {
            let k = wavenumbers(&grid);
            for i in 0..n {
                for j in 0..n {
                    let kk = match axis {
                        Axis::X1 => k[i],
                        Axis::X2 => k[j],
                    };
                    let m = -kk * kk;
                    let z = spec[i * n + j];
                    spec[i * n + j] = Complex::new(z.re * m, z.im * m);
                }
            }
        }
    }
    Ok(inverse_real(grid, spec))
}

/// Evaluate the trigonometric interpolant of `f` on a finer grid of the
/// same box. Exact for band-limited data up to the source Nyquist row,
/// which is dropped (it has no signed-frequency identity).
pub fn spectral_resample<T: Real>(f: &ScalarField<T>, new_n: usize) -> Result<ScalarField<T>> {
    let grid = f.grid();
    let n = grid.n();
    if new_n < n {
        return Err(Error::Config(format!(
            "resample target {new_n} is below the source resolution {n}"
        )));
    }
    let target = Grid2D::new(new_n, grid.half_width())?;
    if new_n == n {
        return Ok(f.clone());
    }
    let spec = forward(f);
    let scale = T::of_usize(new_n * new_n) / T::of_usize(n * n);
    let zero = Complex::new(T::zero(), T::zero());
    let mut big = vec![zero; new_n * new_n];
    let signed = |i: usize| -> isize {
        if i <= n / 2 {
            i as isize
        } else {
            i as isize - n as isize
        }
    };
    for i in 0..n {
        let m1 = signed(i);
        if m1.unsigned_abs() == n / 2 {
            continue;
        }
        let ti = if m1 >= 0 {
            m1 as usize
        } else {
            (new_n as isize + m1) as usize
        };
        for j in 0..n {
            let m2 = signed(j);
            if m2.unsigned_abs() == n / 2 {
                continue;
            }
            let tj = if m2 >= 0 {
                m2 as usize
            } else {
                (new_n as isize + m2) as usize
            };
            let z = spec[i * n + j];
            big[ti * new_n + tj] = Complex::new(z.re * scale, z.im * scale);
        }
    }
    Ok(inverse_real(target, big))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, l: f64) -> Grid2D<f64> {
        Grid2D::new(n, l).unwrap()
    }

    #[test]
    fn resample_reproduces_band_limited_data_exactly() {
        let g = grid(32, 2.0);
        let b = std::f64::consts::PI / 2.0;
        let f = |[x, y]: [f64; 2]| (3.0 * b * x).sin() * (2.0 * b * y).cos() + (b * y).sin();
        let coarse = ScalarField::from_fn(g, f);
        let fine = spectral_resample(&coarse, 64).unwrap();
        let exact = ScalarField::from_fn(grid(64, 2.0), f);
        let err = fine.try_sub(&exact).unwrap().sup_abs();
        assert!(err <= 1e-12, "resample error {err}");
        assert!(spectral_resample(&coarse, 16).is_err());
        let same = spectral_resample(&coarse, 32).unwrap();
        assert_eq!(same.values(), coarse.values());
    }

    #[test]
    fn derivative_of_torus_mode_is_exact() {
        // f = sin(k1 x1) cos(k2 x2) with k = pi/L multiples is periodic on
        // the box; spectral differentiation is exact to roundoff.
        let g = grid(64, 2.0);
        let k1 = std::f64::consts::PI / 2.0 * 3.0;
        let k2 = std::f64::consts::PI / 2.0 * 2.0;
        let f = ScalarField::from_fn(g, |[x, y]| (k1 * x).sin() * (k2 * y).cos());
        let d1 = spectral_derivative(&f, Axis::X1, 1).unwrap();
        let d2 = spectral_derivative(&f, Axis::X2, 1).unwrap();
        let d11 = spectral_derivative(&f, Axis::X1, 2).unwrap();
        let mut worst = 0.0_f64;
        for i in 0..64 {
            for j in 0..64 {
                let [x, y] = g.node(i, j);
                let e1 = d1.get(i, j) - k1 * (k1 * x).cos() * (k2 * y).cos();
                let e2 = d2.get(i, j) + k2 * (k1 * x).sin() * (k2 * y).sin();
                let e11 = d11.get(i, j) + k1 * k1 * (k1 * x).sin() * (k2 * y).cos();
                worst = worst.max(e1.abs()).max(e2.abs()).max(e11.abs());
            }
        }
        assert!(worst < 1e-10, "worst pointwise error {worst:e}");
    }

    #[test]
    fn derivative_of_gaussian_matches_closed_form() {
        let g = grid(256, 2.0 * std::f64::consts::PI);
        let f = ScalarField::from_fn(g, |[x, y]| (-(x * x + y * y)).exp());
        let d1 = spectral_derivative(&f, Axis::X1, 1).unwrap();
        let mut worst = 0.0_f64;
        for i in 0..256 {
            for j in 0..256 {
                let [x, y] = g.node(i, j);
                let want = -2.0 * x * (-(x * x + y * y)).exp();
                worst = worst.max((d1.get(i, j) - want).abs());
            }
        }
        assert!(worst < 1e-8, "worst pointwise error {worst:e}");
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let g = grid(16, 1.0);
        let f = ScalarField::from_fn(g, |_| 0.7);
        for order in [1, 2] {
            let d = spectral_derivative(&f, Axis::X1, order).unwrap();
            assert!(d.sup_abs() < 1e-13);
        }
    }

    #[test]
    fn bad_order_is_rejected() {
        let g = grid(16, 1.0);
        let f = ScalarField::zeros(g);
        assert!(spectral_derivative(&f, Axis::X1, 0).is_err());
        assert!(spectral_derivative(&f, Axis::X2, 3).is_err());
    }

    #[test]
    fn f32_instantiation_works_at_loose_tolerance() {
        let g = Grid2D::<f32>::new(64, 2.0).unwrap();
        let k = std::f32::consts::PI / 2.0;
        let f = ScalarField::from_fn(g, |[x, _]| (k * x).sin());
        let d = spectral_derivative(&f, Axis::X1, 1).unwrap();
        let mut worst = 0.0_f32;
        for i in 0..64 {
            let x = g.coord(i);
            worst = worst.max((d.get(i, 0) - k * (k * x).cos()).abs());
        }
        assert!(worst < 1e-3, "worst f32 error {worst:e}");
    }
}
