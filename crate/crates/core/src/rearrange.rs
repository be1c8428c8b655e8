//! Decreasing rearrangement and Lorentz functionals.
//!
//! A sampled field induces the step function f*(t) = v_(k) for
//! t in [k dx^2, (k+1) dx^2), where v_(0) >= v_(1) >= ... are the sorted
//! absolute samples, each carrying measure dx^2. Every functional here is
//! evaluated in closed form over that step profile, so the layer-cake
//! identities hold to roundoff rather than to quadrature error.

use crate::fields::ScalarField;
use crate::real::kahan_sum;
use crate::{Error, Real, Result};

/// Sorted absolute samples with their common cell measure.
#[derive(Clone, Debug)]
pub struct RearrangementProfile<T> {
    values: Vec<T>,
    cell: T,
}

/// Distribution function d_f(alpha) = |{ |f| > alpha }| (strict).
pub fn distribution_function<T: Real>(f: &ScalarField<T>, alpha: T) -> T {
    let count = f.values().iter().filter(|v| v.abs() > alpha).count();
    T::of_usize(count) * f.grid().cell_area()
}

pub fn decreasing_rearrangement<T: Real>(f: &ScalarField<T>) -> Result<RearrangementProfile<T>> {
    if !f.is_finite() {
        return Err(Error::Config(
            "rearrangement requires finite samples".into(),
        ));
    }
    let mut values: Vec<T> = f.values().iter().map(|v| v.abs()).collect();
    values.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite samples"));
    Ok(RearrangementProfile {
        values,
        cell: f.grid().cell_area(),
    })
}

impl<T: Real> RearrangementProfile<T> {
    /// f*(t); right-continuous, zero beyond the total measure.
    pub fn eval(&self, t: T) -> T {
        if t < T::zero() {
            return self.values.first().copied().unwrap_or_else(T::zero);
        }
        let k = (t / self.cell).floor().to_usize().unwrap_or(usize::MAX);
        self.values.get(k).copied().unwrap_or_else(T::zero)
    }

    pub fn cell_measure(&self) -> T {
        self.cell
    }

    pub fn total_measure(&self) -> T {
        T::of_usize(self.values.len()) * self.cell
    }

    /// Sorted absolute samples, largest first.
    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// CSV rows `t,fstar` at the left edge of each step.
    pub fn write_csv(&self, out: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(out, "t,fstar")?;
        for (k, v) in self.values.iter().enumerate() {
            writeln!(
                out,
                "{},{}",
                (T::of_usize(k) * self.cell).as_f64(),
                v.as_f64()
            )?;
        }
        Ok(())
    }

    /// Lorentz norm over the step profile, exact per step.
    ///
    /// For finite q this is
    ///   ( sum_k v_k^q * (p/q) * (t_{k+1}^{q/p} - t_k^{q/p}) )^{1/q},
    /// for q = infinity the standard sup_t t^{1/p} f*(t), attained at the
    /// right edge of a step.
    pub fn lorentz(&self, p: f64, q: f64) -> Result<T> {
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::Config(format!(
                "Lorentz first exponent must lie in (0, inf), got {p}"
            )));
        }
        if q.is_nan() || q <= 0.0 {
            return Err(Error::Config(format!(
                "Lorentz second exponent must lie in (0, inf], got {q}"
            )));
        }
        if q.is_infinite() {
            let inv_p = T::of(1.0 / p);
            let mut best = T::zero();
            for (k, &v) in self.values.iter().enumerate() {
                if v == T::zero() {
                    // sorted: nothing larger follows
                    break;
                }
                let t_hi = T::of_usize(k + 1) * self.cell;
                best = best.max(t_hi.powf(inv_p) * v);
            }
            return Ok(best);
        }
        let qp = T::of(q / p);
        let p_over_q = T::of(p / q);
        let qq = T::of(q);
        let terms = self.values.iter().enumerate().filter_map(|(k, &v)| {
            if v == T::zero() {
                return None;
            }
            let t_lo = T::of_usize(k) * self.cell;
            let t_hi = T::of_usize(k + 1) * self.cell;
            Some(v.powf(qq) * p_over_q * (t_hi.powf(qp) - t_lo.powf(qp)))
        });
        Ok(kahan_sum(terms).powf(T::one() / qq))
    }
}

/// Lorentz norm of a field; see [`RearrangementProfile::lorentz`].
pub fn lorentz_norm<T: Real>(f: &ScalarField<T>, p: f64, q: f64) -> Result<T> {
    decreasing_rearrangement(f)?.lorentz(p, q)
}

/// Largest mass |f| can put on a set of measure delta:
/// integral of f* over [0, delta], exact for the step profile.
pub fn small_set_concentration<T: Real>(f: &ScalarField<T>, delta: T) -> Result<T> {
    if !delta.is_finite() || delta < T::zero() {
        return Err(Error::Config(format!(
            "set measure must be finite and nonnegative, got {delta}"
        )));
    }
    let profile = decreasing_rearrangement(f)?;
    let cell = profile.cell;
    let full = (delta / cell)
        .floor()
        .to_usize()
        .unwrap_or(profile.values.len())
        .min(profile.values.len());
    let mut mass = kahan_sum(profile.values[..full].iter().copied()) * cell;
    if full < profile.values.len() {
        let rest = delta - T::of_usize(full) * cell;
        if rest > T::zero() {
            mass = mass + rest * profile.values[full];
        }
    }
    Ok(mass)
}
