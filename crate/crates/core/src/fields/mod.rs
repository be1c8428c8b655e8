//! Periodic grids and sampled fields on the square [-L, L)^2.

mod interp;
mod io;
pub(crate) mod spectral;

pub use interp::BicubicSpline;
pub use io::{read_field_csv, read_snapshot, write_field_csv, write_snapshot};
pub use spectral::{spectral_derivative, spectral_resample, Axis};

use crate::real::kahan_sum;
use crate::{Error, Real, Result};

/// Uniform n x n grid on the periodic square [-L, L)^2 with nodes
/// x_i = -L + i dx, dx = 2L/n. n is a power of two so the grid is FFT-ready.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid2D<T> {
    n: usize,
    half_width: T,
}

impl<T: Real> Grid2D<T> {
    pub fn new(n: usize, half_width: T) -> Result<Self> {
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::Config(format!(
                "grid size must be a power of two >= 16, got {n}"
            )));
        }
        if !half_width.is_finite() || half_width <= T::zero() {
            return Err(Error::Config(format!(
                "grid half-width must be positive and finite, got {half_width}"
            )));
        }
        Ok(Grid2D { n, half_width })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn half_width(&self) -> T {
        self.half_width
    }

    #[inline]
    pub fn dx(&self) -> T {
        T::of(2.0) * self.half_width / T::of_usize(self.n)
    }

    /// Quadrature weight of one node.
    #[inline]
    pub fn cell_area(&self) -> T {
        self.dx() * self.dx()
    }

    /// Measure of the whole square, (2L)^2.
    #[inline]
    pub fn area(&self) -> T {
        let side = T::of(2.0) * self.half_width;
        side * side
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn coord(&self, i: usize) -> T {
        -self.half_width + T::of_usize(i) * self.dx()
    }

    /// Node position for row-major index pair (i, j) = (x1 index, x2 index).
    #[inline]
    pub fn node(&self, i: usize, j: usize) -> [T; 2] {
        [self.coord(i), self.coord(j)]
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    pub(crate) fn ensure_same(&self, other: &Self, what: &str) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{what}: {}x{} on [-{}, {}) vs {}x{} on [-{}, {})",
                self.n,
                self.n,
                self.half_width,
                self.half_width,
                other.n,
                other.n,
                other.half_width,
                other.half_width
            )))
        }
    }
}

/// Scalar samples at the grid nodes, row-major in the first coordinate:
/// `values[i * n + j] = f(x1_i, x2_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T> {
    grid: Grid2D<T>,
    values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn zeros(grid: Grid2D<T>) -> Self {
        ScalarField {
            grid,
            values: vec![T::zero(); grid.node_count()],
        }
    }

    pub fn from_fn(grid: Grid2D<T>, f: impl Fn([T; 2]) -> T) -> Self {
        let n = grid.n();
        let mut values = Vec::with_capacity(grid.node_count());
        for i in 0..n {
            for j in 0..n {
                values.push(f(grid.node(i, j)));
            }
        }
        ScalarField { grid, values }
    }

    pub fn from_values(grid: Grid2D<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::Config(format!(
                "value buffer has {} entries, grid needs {}",
                values.len(),
                grid.node_count()
            )));
        }
        Ok(ScalarField { grid, values })
    }

    #[inline]
    pub fn grid(&self) -> Grid2D<T> {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[self.grid.idx(i, j)]
    }

    /// Rectangle-rule integral dx^2 * sum of samples; spectrally accurate for
    /// smooth periodic data. Compensated summation keeps the roundoff floor
    /// below the 1e-10 identities checked against it.
    pub fn integrate(&self) -> T {
        kahan_sum(self.values.iter().copied()) * self.grid.cell_area()
    }

    pub fn mean(&self) -> T {
        kahan_sum(self.values.iter().copied()) / T::of_usize(self.values.len())
    }

    pub fn sup_abs(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |acc, v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination; the grids must agree.
    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.grid.ensure_same(&other.grid, "field combination")?;
        Ok(ScalarField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scaled(&self, c: T) -> Self {
        self.map(|v| c * v)
    }

    /// Periodic bicubic interpolant of this field; exact at the nodes.
    pub fn interpolant(&self) -> BicubicSpline<T> {
        BicubicSpline::new(self)
    }

    /// Bicubic samples at arbitrary points (periodic wrap).
    pub fn sample(&self, points: &[[T; 2]]) -> Vec<T> {
        self.interpolant().eval_many(points)
    }
}

/// Velocity on the grid together with the four gradient components;
/// `grad[i][j]` holds d u_{i+1} / d x_{j+1}.
#[derive(Clone, Debug)]
pub struct VelocityField<T> {
    pub u1: ScalarField<T>,
    pub u2: ScalarField<T>,
    pub grad: [[ScalarField<T>; 2]; 2],
}

impl<T: Real> VelocityField<T> {
    pub fn grid(&self) -> Grid2D<T> {
        self.u1.grid()
    }

    /// Max over nodes of |u| (Euclidean).
    pub fn sup_speed(&self) -> T {
        self.u1
            .values()
            .iter()
            .zip(self.u2.values())
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a * a + b * b).sqrt()))
    }

    /// Max over nodes of the spectral (operator 2-) norm of the gradient
    /// matrix. The same matrix norm is used by the flow-map bounds so the
    /// Gronwall comparisons are like for like.
    pub fn sup_gradient(&self) -> T {
        let a = self.grad[0][0].values();
        let b = self.grad[0][1].values();
        let c = self.grad[1][0].values();
        let d = self.grad[1][1].values();
        let mut best = T::zero();
        for k in 0..a.len() {
            best = best.max(spectral_norm_2x2([[a[k], b[k]], [c[k], d[k]]]));
        }
        best
    }

    /// Max over nodes of |d1 u1 + d2 u2|; the reconstruction is divergence
    /// free up to roundoff.
    pub fn sup_divergence(&self) -> T {
        self.grad[0][0]
            .values()
            .iter()
            .zip(self.grad[1][1].values())
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a + b).abs()))
    }
}

/// Largest singular value of a 2x2 matrix, in closed form.
#[inline]
pub fn spectral_norm_2x2<T: Real>(m: [[T; 2]; 2]) -> T {
    let half = T::of(0.5);
    let s = ((m[0][0] + m[1][1]).powi(2) + (m[0][1] - m[1][0]).powi(2)).sqrt();
    let d = ((m[0][0] - m[1][1]).powi(2) + (m[0][1] + m[1][0]).powi(2)).sqrt();
    half * (s + d)
}

/// Smallest singular value of a 2x2 matrix.
#[inline]
pub fn smallest_singular_value_2x2<T: Real>(m: [[T; 2]; 2]) -> T {
    let half = T::of(0.5);
    let s = ((m[0][0] + m[1][1]).powi(2) + (m[0][1] - m[1][0]).powi(2)).sqrt();
    let d = ((m[0][0] - m[1][1]).powi(2) + (m[0][1] + m[1][0]).powi(2)).sqrt();
    (half * (s - d)).abs()
}
