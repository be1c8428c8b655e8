//! Discrete mollification on the torus.
//!
//! The kernel is the standard radial bump, sampled on the grid and then
//! renormalized so its grid sum is exactly one. Convolution happens in
//! Fourier space, so smoothing commutes with spectral derivatives to
//! roundoff and the Young-inequality facts hold at the discrete level
//! rather than up to quadrature error.

use rustfft::num_complex::Complex;

use crate::fields::spectral::{forward, inverse_real};
use crate::fields::{Grid2D, ScalarField};
use crate::real::kahan_sum;
use crate::{Error, Real, Result};

pub struct Mollifier<T> {
    grid: Grid2D<T>,
    eps: T,
    kernel: ScalarField<T>,
    /// Forward transform of the kernel rolled so the bump center sits at
    /// index (0, 0); multiplying spectra by this implements convolution.
    stencil: Vec<Complex<T>>,
}

fn bump<T: Real>(r2_over_eps2: T) -> T {
    if r2_over_eps2 < T::one() {
        (-(T::one() / (T::one() - r2_over_eps2))).exp()
    } else {
        T::zero()
    }
}

impl<T: Real> Mollifier<T> {
    /// pre: 0 < eps <= L/4 where L is the box half-width.
    pub fn new(grid: Grid2D<T>, eps: T) -> Result<Self> {
        let quarter = grid.half_width() / T::of(4.0);
        if !eps.is_finite() || eps <= T::zero() || eps > quarter {
            return Err(Error::Config(format!(
                "mollification radius must lie in (0, {quarter}], got {eps}"
            )));
        }
        let period = T::of(2.0) * grid.half_width();
        let torus_r2 = |a: T, b: T| {
            let da = a.abs().min(period - a.abs());
            let db = b.abs().min(period - b.abs());
            da * da + db * db
        };
        let eps2 = eps * eps;
        let raw = ScalarField::from_fn(grid, |[x, y]| bump(torus_r2(x, y) / eps2));
        let mass = kahan_sum(raw.values().iter().copied()) * grid.cell_area();
        let kernel = raw.scaled(T::one() / mass);
        // same kernel with the center moved from the box midpoint to
        // index (0, 0), which is what index-space convolution pairs with
        let n = grid.n();
        let dx = grid.dx();
        let mut rolled = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let d1 = T::of_usize(i.min(n - i)) * dx;
                let d2 = T::of_usize(j.min(n - j)) * dx;
                rolled.push(bump((d1 * d1 + d2 * d2) / eps2) / mass);
            }
        }
        let rolled = ScalarField::from_values(grid, rolled)?;
        let stencil = forward(&rolled);
        Ok(Mollifier {
            grid,
            eps,
            kernel,
            stencil,
        })
    }

    pub fn eps(&self) -> T {
        self.eps
    }

    /// The normalized kernel centered at the origin.
    pub fn kernel(&self) -> &ScalarField<T> {
        &self.kernel
    }

    pub fn apply(&self, f: &ScalarField<T>) -> Result<ScalarField<T>> {
        self.grid.ensure_same(&f.grid(), "mollification")?;
        let mut spec = forward(f);
        let area = self.grid.cell_area();
        for (z, s) in spec.iter_mut().zip(&self.stencil) {
            *z = Complex::new(
                (z.re * s.re - z.im * s.im) * area,
                (z.re * s.im + z.im * s.re) * area,
            );
        }
        Ok(inverse_real(self.grid, spec))
    }
}

pub fn mollify<T: Real>(f: &ScalarField<T>, eps: T) -> Result<ScalarField<T>> {
    Mollifier::new(f.grid(), eps)?.apply(f)
}
