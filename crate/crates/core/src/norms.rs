//! Integral norms, sup-type moduli, and the per-checkpoint norm report.
//!
//! Everything here reduces to three primitives: rectangle-rule quadrature
//! (spectrally accurate for smooth periodic integrands), spectral
//! differentiation, and a discrete disk min-filter for sup-type moduli.

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::fields::{spectral_derivative, Axis, ScalarField};
use crate::real::kahan_sum;
use crate::rearrange::lorentz_norm;
use crate::{Error, Real, Result};

pub fn l1_norm<T: Real>(f: &ScalarField<T>) -> T {
    kahan_sum(f.values().iter().map(|v| v.abs())) * f.grid().cell_area()
}

pub fn l2_norm<T: Real>(f: &ScalarField<T>) -> T {
    (kahan_sum(f.values().iter().map(|v| *v * *v)) * f.grid().cell_area()).sqrt()
}

pub fn sup_norm<T: Real>(f: &ScalarField<T>) -> T {
    f.sup_abs()
}

/// Mixed second derivative d1 d2 f, the quantity controlling sup|f|
/// for compactly supported fields.
pub fn mixed_derivative<T: Real>(f: &ScalarField<T>) -> Result<ScalarField<T>> {
    spectral_derivative(&spectral_derivative(f, Axis::X2, 1)?, Axis::X1, 1)
}

/// Pointwise Euclidean magnitude of the gradient.
pub fn gradient_magnitude<T: Real>(f: &ScalarField<T>) -> Result<ScalarField<T>> {
    let d1 = spectral_derivative(f, Axis::X1, 1)?;
    let d2 = spectral_derivative(f, Axis::X2, 1)?;
    d1.zip_with(&d2, |a, b| (a * a + b * b).sqrt())
}

/// All distinct partial derivatives up to `max_order`, `f` itself first,
/// then d1, d2, then d11, d12, d22.
fn derivative_stack<T: Real>(f: &ScalarField<T>, max_order: usize) -> Result<Vec<ScalarField<T>>> {
    let mut stack = vec![f.clone()];
    if max_order >= 1 {
        stack.push(spectral_derivative(f, Axis::X1, 1)?);
        stack.push(spectral_derivative(f, Axis::X2, 1)?);
    }
    if max_order >= 2 {
        stack.push(spectral_derivative(f, Axis::X1, 2)?);
        stack.push(mixed_derivative(f)?);
        stack.push(spectral_derivative(f, Axis::X2, 2)?);
    }
    Ok(stack)
}

/// W^{k,1} norm: sum of the L1 norms of all partial derivatives of
/// order <= k, each mixed multi-index counted once.
pub fn sobolev_norm<T: Real>(f: &ScalarField<T>, k: usize) -> Result<T> {
    if k > 2 {
        return Err(Error::Config(format!(
            "Sobolev order {k} is unsupported, only k <= 2 is implemented"
        )));
    }
    let stack = derivative_stack(f, k)?;
    Ok(kahan_sum(stack.iter().map(l1_norm)))
}

/// Both sides of sup|f| <= ||d1 d2 f||_L1, which holds for compactly
/// supported f. `conclusive` is false when f carries mass near the box
/// boundary, where periodization invalidates the comparison.
#[derive(Clone, Copy, Debug)]
pub struct SupMixedCheck<T> {
    pub sup: T,
    pub mixed_l1: T,
    pub ok: bool,
    pub conclusive: bool,
}

pub fn sup_via_mixed_derivative<T: Real>(f: &ScalarField<T>) -> Result<SupMixedCheck<T>> {
    let sup = f.sup_abs();
    let mixed_l1 = l1_norm(&mixed_derivative(f)?);
    let half = f.grid().half_width() * T::of(0.5);
    let tail = tail_mass(f, half, 0)?;
    let conclusive = tail <= T::of(1e-8) * l1_norm(f);
    Ok(SupMixedCheck {
        sup,
        mixed_l1,
        ok: sup <= mixed_l1 + T::of(1e-8),
        conclusive,
    })
}

/// Minimum of `row` over the circular window [j - m, j + m] for every j.
fn sliding_row_min<T: Real>(row: &[T], m: usize, out: &mut [T]) {
    let n = row.len();
    if m == 0 {
        out.copy_from_slice(row);
        return;
    }
    if 2 * m + 1 >= n {
        let lo = row.iter().copied().fold(row[0], T::min);
        out.fill(lo);
        return;
    }
    // Monotone deque over the circularly extended index range, values
    // increasing front to back, so the front is always the window min.
    let mut deque: VecDeque<(usize, T)> = VecDeque::with_capacity(2 * m + 2);
    for e in 0..n + 2 * m {
        let v = row[(e + n - m) % n];
        while deque.back().is_some_and(|&(_, bv)| bv >= v) {
            deque.pop_back();
        }
        deque.push_back((e, v));
        if e >= 2 * m {
            let j = e - 2 * m;
            while deque.front().expect("nonempty").0 < j {
                deque.pop_front();
            }
            out[j] = deque.front().expect("nonempty").1;
        }
    }
}

/// Pointwise minimum over the discrete disk of squared radius `rho2`
/// (grid-cell units). Offsets are genuine torus offsets, so radii up to
/// the box diameter are handled.
fn disk_min_filter<T: Real>(f: &ScalarField<T>, rho2: f64) -> Vec<T> {
    let n = f.grid().n();
    // admit lattice points sitting exactly on the radius despite roundoff
    let rho2 = rho2 + 1e-9;
    let half = (n / 2) as isize;
    let p = rho2.sqrt().floor() as isize;
    let rows: Vec<isize> = if p >= half {
        (-half..half).collect()
    } else {
        (-p..=p).collect()
    };
    let mut out = vec![T::infinity(); n * n];
    let mut scratch = vec![T::zero(); n * n];
    for &di in &rows {
        let m = (rho2 - (di * di) as f64).sqrt().floor() as usize;
        scratch
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(s, dst)| sliding_row_min(&f.values()[s * n..(s + 1) * n], m, dst));
        out.par_chunks_mut(n).enumerate().for_each(|(i, dst)| {
            let s = (i as isize + di).rem_euclid(n as isize) as usize;
            for (d, w) in dst.iter_mut().zip(&scratch[s * n..(s + 1) * n]) {
                *d = d.min(*w);
            }
        });
    }
    out
}

fn modulus_from_rho2<T: Real>(f: &ScalarField<T>, rho2: f64) -> T {
    let mins = disk_min_filter(f, rho2);
    f.values()
        .iter()
        .zip(&mins)
        .map(|(v, m)| *v - *m)
        .fold(T::zero(), T::max)
}

/// sup_{|x-y| <= r} |f(x) - f(y)| over grid-representable pairs.
///
/// The sup is symmetric in the pair, so scanning f(x) minus the disk
/// minimum around x covers both signs.
pub fn modulus_of_continuity<T: Real>(f: &ScalarField<T>, r: T) -> Result<T> {
    let dx = f.grid().dx();
    let two_l = f.grid().half_width() * T::of(2.0);
    if !r.is_finite() || r < dx - T::of(1e-12) || r > two_l {
        return Err(Error::Config(format!(
            "modulus radius must lie in [dx, 2L] = [{dx}, {two_l}], got {r}"
        )));
    }
    let rho = (r / dx).as_f64();
    Ok(modulus_from_rho2(f, rho * rho))
}

/// Dini seminorm: integral of modulus(r)/r over (0, 1].
///
/// Below one cell the modulus is modeled as linear, which integrates to
/// exactly modulus(dx); from dx to 1 the integrand is trapezoided in
/// log r over 64 nodes.
pub fn dini_seminorm<T: Real>(f: &ScalarField<T>) -> Result<T> {
    let dx = f.grid().dx().as_f64();
    let at_dx = modulus_of_continuity(f, f.grid().dx())?;
    if dx >= 1.0 {
        // the whole unit range sits inside the linear small-r model
        return Ok(at_dx * T::of(1.0 / dx));
    }
    let nodes = 64;
    let step = -dx.ln() / (nodes - 1) as f64;
    let mut prev = at_dx;
    let mut acc = T::zero();
    for k in 1..nodes {
        let r = (dx.ln() + step * k as f64).exp();
        let cur = modulus_from_rho2(f, (r / dx).powi(2));
        acc = acc + (prev + cur) * T::of(step * 0.5);
        prev = cur;
    }
    Ok(at_dx + acc)
}

/// L1 distance between f and its translate by h. Grid-aligned shifts are
/// exact index rolls; anything else goes through the spline interpolant.
pub fn translation_modulus<T: Real>(f: &ScalarField<T>, h: (T, T)) -> Result<T> {
    let grid = f.grid();
    let n = grid.n();
    let dx = grid.dx();
    let k1 = (h.0 / dx).round();
    let k2 = (h.1 / dx).round();
    let aligned = (h.0 - k1 * dx).abs() <= T::of(1e-9) * dx
        && (h.1 - k2 * dx).abs() <= T::of(1e-9) * dx;
    let shifted = if aligned {
        let k1 = k1.as_f64() as i64;
        let k2 = k2.as_f64() as i64;
        ScalarField::from_values(
            grid,
            (0..n * n)
                .map(|idx| {
                    let i = (idx / n) as i64;
                    let j = (idx % n) as i64;
                    let si = (i + k1).rem_euclid(n as i64) as usize;
                    let sj = (j + k2).rem_euclid(n as i64) as usize;
                    f.get(si, sj)
                })
                .collect(),
        )?
    } else {
        let spline = f.interpolant();
        let points: Vec<[T; 2]> = (0..n * n)
            .map(|idx| {
                let [x1, x2] = grid.node(idx / n, idx % n);
                [x1 + h.0, x2 + h.1]
            })
            .collect();
        ScalarField::from_values(grid, spline.eval_many(&points))?
    };
    let diff = shifted.try_sub(f)?;
    Ok(l1_norm(&diff))
}

/// Mass of f and its derivatives up to `max_order` outside the disk of
/// radius R.
pub fn tail_mass<T: Real>(f: &ScalarField<T>, radius: T, max_order: usize) -> Result<T> {
    let grid = f.grid();
    if !radius.is_finite() || radius < T::zero() || radius > grid.half_width() {
        return Err(Error::Config(format!(
            "tail radius must lie in [0, L] = [0, {}], got {radius}",
            grid.half_width()
        )));
    }
    if max_order > 2 {
        return Err(Error::Config(format!(
            "tail moment order {max_order} is unsupported, only <= 2"
        )));
    }
    let stack = derivative_stack(f, max_order)?;
    tail_mass_of_stack(&stack, radius)
}

fn tail_mass_of_stack<T: Real>(stack: &[ScalarField<T>], radius: T) -> Result<T> {
    let grid = stack[0].grid();
    let n = grid.n();
    let r2 = radius * radius;
    let outside: Vec<usize> = (0..n * n)
        .filter(|idx| {
            let [x1, x2] = grid.node(idx / n, idx % n);
            x1 * x1 + x2 * x2 >= r2
        })
        .collect();
    let total = kahan_sum(stack.iter().map(|g| {
        kahan_sum(outside.iter().map(|&idx| g.values()[idx].abs())) * grid.cell_area()
    }));
    Ok(total)
}

/// Every norm the verification ledger consumes, at one checkpoint time.
#[derive(Clone, Debug)]
pub struct NormReport<T> {
    pub time: T,
    pub l1: T,
    pub l2: T,
    pub linf: T,
    pub w11: T,
    pub w21: T,
    pub mixed_l1: T,
    pub dini: T,
    pub grad_lorentz21: T,
    /// (radius, mass of f and derivatives up to order 2 beyond it)
    pub tails: Vec<(T, T)>,
}

pub const NORM_REPORT_CSV_HEADER: &str = "t,l1,l2,linf,w11,w21,mixed,dini,grad_lorentz21";

impl<T: Real> NormReport<T> {
    pub fn compute(f: &ScalarField<T>, time: T, tail_radii: &[T]) -> Result<Self> {
        let stack = derivative_stack(f, 2)?;
        let l1 = l1_norm(f);
        let w11 = l1 + l1_norm(&stack[1]) + l1_norm(&stack[2]);
        let w21 = w11 + l1_norm(&stack[3]) + l1_norm(&stack[4]) + l1_norm(&stack[5]);
        let grad = stack[1].zip_with(&stack[2], |a, b| (a * a + b * b).sqrt())?;
        let mut tails = Vec::with_capacity(tail_radii.len());
        for &r in tail_radii {
            if !r.is_finite() || r < T::zero() || r > f.grid().half_width() {
                return Err(Error::Config(format!("tail radius {r} out of [0, L]")));
            }
            tails.push((r, tail_mass_of_stack(&stack, r)?));
        }
        Ok(NormReport {
            time,
            l1,
            l2: l2_norm(f),
            linf: f.sup_abs(),
            w11,
            w21,
            mixed_l1: l1_norm(&stack[4]),
            dini: dini_seminorm(f)?,
            grad_lorentz21: lorentz_norm(&grad, 2.0, 1.0)?,
            tails,
        })
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.time.as_f64(),
            self.l1.as_f64(),
            self.l2.as_f64(),
            self.linf.as_f64(),
            self.w11.as_f64(),
            self.w21.as_f64(),
            self.mixed_l1.as_f64(),
            self.dini.as_f64(),
            self.grad_lorentz21.as_f64()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid2D;
    use proptest::prelude::*;
    use rand_core::RngCore;

    fn grid(n: usize, l: f64) -> Grid2D<f64> {
        Grid2D::new(n, l).unwrap()
    }

    fn gaussian(n: usize, l: f64) -> ScalarField<f64> {
        ScalarField::from_fn(grid(n, l), |[x, y]| (-(x * x + y * y)).exp())
    }

    /// Band-limited random field, reproducible from the seed.
    fn random_smooth(n: usize, l: f64, seed: u64, kmax: i32) -> ScalarField<f64> {
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut unit = move || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0;
        let mut modes = Vec::new();
        for k1 in -kmax..=kmax {
            for k2 in -kmax..=kmax {
                modes.push((k1 as f64, k2 as f64, unit(), unit()));
            }
        }
        let base = std::f64::consts::PI / l;
        ScalarField::from_fn(grid(n, l), move |[x, y]| {
            modes
                .iter()
                .map(|&(k1, k2, a, b)| {
                    let phase = base * (k1 * x + k2 * y);
                    a * phase.cos() + b * phase.sin()
                })
                .sum::<f64>()
        })
    }

    #[test]
    fn gaussian_first_order_sobolev_norm() {
        // ||f||_1 = pi, ||d_i f||_1 = 2 sqrt(pi) each. The absolute values
        // put kinks on grid lines, so the quadrature is second order here,
        // not spectral; the tolerance reflects that.
        let exact = std::f64::consts::PI + 4.0 * std::f64::consts::PI.sqrt();
        let coarse = (sobolev_norm(&gaussian(256, 2.0 * std::f64::consts::PI), 1).unwrap()
            - exact)
            .abs();
        let fine = (sobolev_norm(&gaussian(512, 2.0 * std::f64::consts::PI), 1).unwrap() - exact)
            .abs();
        assert!(coarse < 1e-2, "coarse error {coarse}");
        assert!(fine < coarse / 2.0, "no refinement: {fine} vs {coarse}");
    }

    #[test]
    fn sobolev_rejects_high_order_and_orders_nest() {
        let f = random_smooth(64, 1.0, 7, 3);
        assert!(sobolev_norm(&f, 3).is_err());
        let s0 = sobolev_norm(&f, 0).unwrap();
        let s1 = sobolev_norm(&f, 1).unwrap();
        let s2 = sobolev_norm(&f, 2).unwrap();
        assert!(s0 <= s1 && s1 <= s2);
    }

    #[test]
    fn gaussian_sup_vs_mixed_derivative() {
        // int |4 x1 x2| e^{-|x|^2} = 4; sup f = 1 at the origin node.
        // The box is widened to 3 pi so the tail precondition holds.
        let f = gaussian(256, 3.0 * std::f64::consts::PI);
        let check = sup_via_mixed_derivative(&f).unwrap();
        assert!(check.conclusive);
        assert!(check.ok);
        assert!((check.sup - 1.0).abs() < 1e-12, "sup {}", check.sup);
        assert!((check.mixed_l1 - 4.0).abs() < 0.05, "mixed {}", check.mixed_l1);
    }

    #[test]
    fn tail_heavy_field_is_flagged_inconclusive() {
        // At L = 2 pi the Gaussian keeps ~1e-4 of its mass beyond L/2.
        let f = gaussian(128, 2.0 * std::f64::consts::PI);
        let check = sup_via_mixed_derivative(&f).unwrap();
        assert!(!check.conclusive);
    }

    #[test]
    fn zero_field_sup_check_is_trivially_ok() {
        let f = ScalarField::zeros(grid(32, 1.0));
        let check = sup_via_mixed_derivative(&f).unwrap();
        assert!(check.ok && check.conclusive);
        assert_eq!(check.sup, 0.0);
        assert_eq!(check.mixed_l1, 0.0);
    }

    #[test]
    fn constant_has_zero_modulus_and_dini() {
        let f = ScalarField::from_fn(grid(64, 1.0), |_| 3.0);
        assert_eq!(modulus_of_continuity(&f, 0.5).unwrap(), 0.0);
        assert_eq!(dini_seminorm(&f).unwrap(), 0.0);
    }

    #[test]
    fn hat_modulus_realizes_the_lipschitz_slope() {
        let g = grid(256, 2.0);
        let f = ScalarField::from_fn(g, |[x, y]| (1.0 - (x * x + y * y).sqrt()).max(0.0));
        let dx = g.dx();
        for r in [0.1, 0.3, 0.7, 1.0] {
            let m = modulus_of_continuity(&f, r).unwrap();
            assert!(m <= r + 1e-9, "r={r} m={m}");
            assert!(m >= r - 1.5 * dx, "r={r} m={m}");
        }
    }

    #[test]
    fn hat_dini_seminorm_is_near_one() {
        let f = ScalarField::from_fn(grid(256, 2.0), |[x, y]| {
            (1.0 - (x * x + y * y).sqrt()).max(0.0)
        });
        let d = dini_seminorm(&f).unwrap();
        assert!((d - 1.0).abs() < 0.03, "dini {d}");
    }

    #[test]
    fn dini_is_positively_homogeneous() {
        let f = random_smooth(64, 1.0, 11, 4);
        let base = dini_seminorm(&f).unwrap();
        let scaled = dini_seminorm(&f.scaled(7.0)).unwrap();
        assert!((scaled - 7.0 * base).abs() <= 1e-10 * base.max(1.0));
    }

    #[test]
    fn holder_function_dini_is_bounded_by_a_over_alpha() {
        // f = d(x)^alpha with d the torus distance to the origin is
        // alpha-Holder with constant 1, so dini <= 1/alpha up to the
        // trapezoid overshoot.
        let l = 1.0;
        let alpha = 0.5;
        let f = ScalarField::from_fn(grid(128, l), |[x, y]| {
            let dx = x.abs().min(2.0 * l - x.abs());
            let dy = y.abs().min(2.0 * l - y.abs());
            (dx * dx + dy * dy).sqrt().powf(alpha)
        });
        let d = dini_seminorm(&f).unwrap();
        assert!(d <= 1.0 / alpha * 1.05, "dini {d}");
        assert!(d >= 1.7, "dini suspiciously small: {d}");
    }

    #[test]
    fn modulus_rejects_out_of_range_radii() {
        let f = random_smooth(64, 1.0, 3, 3);
        let dx = f.grid().dx();
        assert!(modulus_of_continuity(&f, dx * 0.5).is_err());
        assert!(modulus_of_continuity(&f, 2.1).is_err());
        assert!(modulus_of_continuity(&f, f64::NAN).is_err());
    }

    #[test]
    fn aligned_translation_of_indicator_is_exact() {
        // Unit square indicator shifted by 8 cells: symmetric difference
        // has measure exactly 2 * 0.25.
        let g = grid(128, 2.0);
        let f = ScalarField::from_fn(g, |[x, y]| {
            if (-0.5..0.5).contains(&x) && (-0.5..0.5).contains(&y) {
                1.0
            } else {
                0.0
            }
        });
        let tm = translation_modulus(&f, (0.25, 0.0)).unwrap();
        assert!((tm - 0.5).abs() < 1e-12, "tm {tm}");
        assert_eq!(translation_modulus(&f, (0.0, 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn translation_is_controlled_by_the_gradient() {
        let f = gaussian(128, 2.0 * std::f64::consts::PI);
        let h = (0.013, -0.007);
        let tm = translation_modulus(&f, h).unwrap();
        let len = (h.0 * h.0 + h.1 * h.1).sqrt();
        let w11 = sobolev_norm(&f, 1).unwrap();
        assert!(tm <= len * w11 * 1.01 + 1e-8, "tm {tm}");
        assert!(tm > 0.0);
    }

    #[test]
    fn tail_mass_at_zero_radius_is_the_sobolev_norm() {
        let f = random_smooth(64, 1.0, 5, 4);
        let t = tail_mass(&f, 0.0, 2).unwrap();
        let s = sobolev_norm(&f, 2).unwrap();
        assert!((t - s).abs() <= 1e-12 * s.max(1.0));
    }

    #[test]
    fn gaussian_tail_is_small_and_tails_nest() {
        let f = gaussian(256, 2.0 * std::f64::consts::PI);
        assert!(tail_mass(&f, 4.0, 0).unwrap() <= 1e-5);
        let t1 = tail_mass(&f, 1.0, 2).unwrap();
        let t2 = tail_mass(&f, 2.0, 2).unwrap();
        let t3 = tail_mass(&f, 3.0, 2).unwrap();
        assert!(t1 >= t2 && t2 >= t3);
        assert!(tail_mass(&f, 100.0, 0).is_err());
        assert!(tail_mass(&f, -1.0, 0).is_err());
    }

    #[test]
    fn norm_report_row_shape_and_internal_orderings() {
        let f = gaussian(128, 2.0 * std::f64::consts::PI);
        let report = NormReport::compute(&f, 0.25, &[1.0, 2.0]).unwrap();
        assert_eq!(NORM_REPORT_CSV_HEADER.split(',').count(), 9);
        assert_eq!(report.csv_row().split(',').count(), 9);
        assert!(report.w11 <= report.w21);
        assert!(report.l1 > 0.0 && report.dini > 0.0 && report.grad_lorentz21 > 0.0);
        assert_eq!(report.tails.len(), 2);
        assert!(report.tails[0].1 >= report.tails[1].1);
        // compactly supported data: the mixed-derivative bound applies
        assert!(report.linf <= report.mixed_l1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn modulus_is_monotone_in_r(seed in 0u64..500) {
            let f = random_smooth(64, 1.0, seed, 4);
            let dx = f.grid().dx();
            let mut prev = 0.0;
            for k in [1usize, 2, 5, 9, 16, 30] {
                let m = modulus_of_continuity(&f, k as f64 * dx).unwrap();
                prop_assert!(m >= prev - 1e-12);
                prev = m;
            }
        }

        #[test]
        fn modulus_is_subadditive_up_to_one_cell(seed in 0u64..500, k in 1usize..16) {
            // Any pair at distance <= 2r splits through the lattice point
            // nearest the midpoint, which costs at most dx/sqrt(2) extra
            // on each half. So subadditivity holds with the inner radius
            // inflated by one cell.
            let f = random_smooth(64, 1.0, seed, 4);
            let dx = f.grid().dx();
            let small = modulus_of_continuity(&f, (k + 1) as f64 * dx).unwrap();
            let large = modulus_of_continuity(&f, 2.0 * k as f64 * dx).unwrap();
            prop_assert!(large <= 2.0 * small + 1e-12, "large {large} small {small}");
        }
    }
}
