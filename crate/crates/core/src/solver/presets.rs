//! Named initial vorticity profiles.
//!
//! Every preset is a fixed continuum function sampled on the requested
//! grid, so the same name at two resolutions yields two samplings of one
//! field. Random band-limited data draws its coefficients from the seed
//! alone for the same reason.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;

use crate::fields::spectral::inverse_real;
use crate::fields::{Grid2D, ScalarField};
use crate::{Error, Real, Result};

pub fn zero<T: Real>(grid: Grid2D<T>) -> ScalarField<T> {
    ScalarField::zeros(grid)
}

/// Radial Gaussian; induces the steady vortex used as the exact oracle.
pub fn gaussian<T: Real>(grid: Grid2D<T>) -> ScalarField<T> {
    ScalarField::from_fn(grid, |[x, y]| (-(x * x + y * y)).exp())
}

/// d/dx1 of the Gaussian: the simplest genuinely unsteady zero-mean datum.
pub fn dipole<T: Real>(grid: Grid2D<T>) -> ScalarField<T> {
    let two = T::of(2.0);
    ScalarField::from_fn(grid, |[x, y]| -two * x * (-(x * x + y * y)).exp())
}

/// Elliptical patch with a tanh edge; non-radial, so it both rotates and
/// sheds filaments, exercising the shear terms of the advection.
pub fn shear_patch_smoothed<T: Real>(grid: Grid2D<T>) -> ScalarField<T> {
    let half = T::of(0.5);
    let edge = T::of(0.15);
    let a = T::of(1.0 / 1.44); // 1/1.2^2
    let b = T::of(1.0 / 0.36); // 1/0.6^2
    ScalarField::from_fn(grid, |[x, y]| {
        let q = a * x * x + b * y * y;
        half * (T::one() - ((q - T::one()) / edge).tanh())
    })
}

fn unit_from_bits<T: Real>(bits: u64) -> T {
    // uniform in [-1, 1) from the top 53 bits
    let u = (bits >> 11) as f64 / (1u64 << 53) as f64;
    T::of(2.0 * u - 1.0)
}

/// Zero-mean random trigonometric polynomial with modes |m1|, |m2| <= kmax,
/// normalized to unit sup norm. Deterministic in (seed, kmax) and
/// independent of the grid resolution.
pub fn random_bandlimited<T: Real>(
    grid: Grid2D<T>,
    seed: u64,
    kmax: usize,
) -> Result<ScalarField<T>> {
    let n = grid.n();
    if kmax == 0 || 3 * kmax > n {
        return Err(Error::Config(format!(
            "band limit must satisfy 1 <= kmax <= n/3, got kmax = {kmax} at n = {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zero = Complex::new(T::zero(), T::zero());
    let mut spec = vec![zero; n * n];
    let scale = T::of_usize(n * n);
    let half = T::of(0.5);
    let km = kmax as isize;
    // one coefficient per half-plane mode, mirrored conjugately
    for m1 in 0..=km {
        for m2 in -km..=km {
            if m1 == 0 && m2 <= 0 {
                continue;
            }
            let a: T = unit_from_bits(rng.next_u64());
            let b: T = unit_from_bits(rng.next_u64());
            let decay = T::one() / T::of((1 + m1 * m1 + m2 * m2) as f64);
            let c = Complex::new(a * half * decay, -b * half * decay);
            let i = m1 as usize;
            let j = if m2 >= 0 {
                m2 as usize
            } else {
                (n as isize + m2) as usize
            };
            let i_neg = if m1 == 0 { 0 } else { n - i };
            let j_neg = if m2 == 0 { 0 } else { n - j };
            spec[i * n + j] = Complex::new(c.re * scale, c.im * scale);
            spec[i_neg * n + j_neg] = Complex::new(c.re * scale, -c.im * scale);
        }
    }
    let raw = inverse_real(grid, spec);
    let sup = raw.sup_abs();
    Ok(raw.scaled(T::one() / sup))
}

/// Preset lookup for config files; `random_bandlimited` reads its two
/// parameters from the remaining arguments.
pub fn by_name<T: Real>(
    grid: Grid2D<T>,
    name: &str,
    seed: u64,
    kmax: usize,
) -> Result<ScalarField<T>> {
    match name {
        "zero" => Ok(zero(grid)),
        "gaussian" => Ok(gaussian(grid)),
        "dipole" => Ok(dipole(grid)),
        "shear_patch_smoothed" => Ok(shear_patch_smoothed(grid)),
        "random_bandlimited" => random_bandlimited(grid, seed, kmax),
        other => Err(Error::Config(format!(
            "unknown preset `{other}`; valid names: zero, gaussian, dipole, \
             shear_patch_smoothed, random_bandlimited"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::l1_norm;

    fn grid(n: usize, l: f64) -> Grid2D<f64> {
        Grid2D::new(n, l).unwrap()
    }

    #[test]
    fn band_limited_field_is_deterministic_and_zero_mean() {
        let g = grid(64, 2.0);
        let a = random_bandlimited(g, 7, 5).unwrap();
        let b = random_bandlimited(g, 7, 5).unwrap();
        assert_eq!(a.values(), b.values());
        assert!(a.mean().abs() <= 1e-12);
        assert!((a.sup_abs() - 1.0).abs() <= 1e-12);
        let c = random_bandlimited(g, 8, 5).unwrap();
        assert!(c.try_sub(&a).unwrap().sup_abs() > 1e-3, "seeds must differ");
    }

    #[test]
    fn band_limited_field_is_resolution_independent() {
        // same continuum function: sampling at 2n then restricting to the
        // even-index sublattice reproduces the n-grid samples
        let coarse = random_bandlimited(grid(32, 2.0), 3, 6).unwrap();
        let fine = random_bandlimited(grid(64, 2.0), 3, 6).unwrap();
        let mut worst = 0.0_f64;
        for i in 0..32 {
            for j in 0..32 {
                worst = worst.max((coarse.get(i, j) - fine.get(2 * i, 2 * j)).abs());
            }
        }
        assert!(worst <= 1e-12, "restriction mismatch {worst}");
    }

    #[test]
    fn band_limit_validation() {
        let g = grid(32, 2.0);
        assert!(random_bandlimited(g, 0, 0).is_err());
        assert!(random_bandlimited(g, 0, 11).is_err());
        assert!(random_bandlimited(g, 0, 10).is_ok());
    }

    #[test]
    fn named_lookup_matches_direct_constructors() {
        let g = grid(32, 4.0);
        assert_eq!(
            by_name(g, "dipole", 0, 0).unwrap().values(),
            dipole(g).values()
        );
        assert!(by_name(g, "vortex_soup", 0, 0).is_err());
        assert_eq!(l1_norm(&by_name(g, "zero", 0, 0).unwrap()), 0.0);
    }

    #[test]
    fn dipole_has_zero_mean_and_odd_symmetry() {
        let g = grid(64, 2.0 * std::f64::consts::PI);
        let d = dipole(g);
        assert!(d.mean().abs() <= 1e-15);
        // odd in x1: node (i, j) pairs with (n - i, j) for i >= 1
        for i in 1..64 {
            for j in [0usize, 17, 40] {
                let sum = d.get(i, j) + d.get(64 - i, j);
                assert!(sum.abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn patch_is_order_one_and_decays_at_the_boundary() {
        let g = grid(64, 2.0 * std::f64::consts::PI);
        let p = shear_patch_smoothed(g);
        // the tanh profile sits 1.6e-6 below 1 at the center by design
        assert!((p.get(32, 32) - 1.0).abs() <= 1e-5, "interior value near 1");
        assert!(p.get(0, 0).abs() <= 1e-12, "corner value negligible");
        assert!(p.values().iter().all(|v| v.is_finite() && *v >= -1e-12));
    }
}
