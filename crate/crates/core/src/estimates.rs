//! The inequality ledger.
//!
//! Each operation renders one analytic estimate as a named comparison over
//! trajectory checkpoints. Constants are never assumed: a check either
//! fits the smallest constant that works (the constant is the deliverable,
//! refinement stability is its test) or verifies a closed-form envelope
//! with a stated tolerance.

use crate::biot_savart::velocity_spectral;
use crate::fields::{spectral_derivative, Axis, ScalarField};
use crate::norms::{
    dini_seminorm, gradient_magnitude, l1_norm, sobolev_norm, sup_norm, tail_mass,
    translation_modulus,
};
use crate::rearrange::{lorentz_norm, small_set_concentration};
use crate::solver::{Mollifier, Trajectory};
use crate::{Error, Real, Result};

/// One ledger row group: an inequality sampled over time (or over ensemble
/// index), its margin, and the fitted constant when the estimate has one.
#[derive(Clone, Debug)]
pub struct InequalityCheck<T> {
    pub name: String,
    /// Sample coordinates: checkpoint times, ensemble indices, or set
    /// sizes, depending on the check; `notes` says which.
    pub times: Vec<T>,
    pub lhs: Vec<T>,
    pub rhs: Vec<T>,
    pub fitted_constant: Option<T>,
    /// min over samples of rhs - lhs.
    pub margin: T,
    pub pass: bool,
    pub notes: String,
}

impl<T: Real> InequalityCheck<T> {
    fn assemble(
        name: &str,
        times: Vec<T>,
        lhs: Vec<T>,
        rhs: Vec<T>,
        fitted_constant: Option<T>,
        tolerance: T,
        notes: String,
    ) -> Self {
        debug_assert_eq!(times.len(), lhs.len());
        debug_assert_eq!(times.len(), rhs.len());
        let margin = lhs
            .iter()
            .zip(&rhs)
            .map(|(&l, &r)| r - l)
            .fold(T::infinity(), T::min);
        let margin = if margin.is_finite() { margin } else { T::zero() };
        InequalityCheck {
            name: name.into(),
            times,
            lhs,
            rhs,
            fitted_constant,
            margin,
            pass: margin >= -tolerance,
            notes,
        }
    }

    /// Constructor for callers composing their own ledger rows (a runner's
    /// conservation check, say); margin and pass derive from the samples
    /// exactly as for the built-in checks.
    pub fn from_samples(
        name: &str,
        times: Vec<T>,
        lhs: Vec<T>,
        rhs: Vec<T>,
        fitted_constant: Option<T>,
        tolerance: T,
        notes: String,
    ) -> Self {
        Self::assemble(name, times, lhs, rhs, fitted_constant, tolerance, notes)
    }
}

/// Rows `check,t,lhs,rhs,margin,fitted_C,pass`; one row per sample.
pub fn write_ledger_csv<T: Real>(
    checks: &[InequalityCheck<T>],
    out: &mut impl std::io::Write,
) -> std::io::Result<()> {
    writeln!(out, "check,t,lhs,rhs,margin,fitted_C,pass")?;
    for c in checks {
        let fitted = c
            .fitted_constant
            .map(|v| format!("{}", v.as_f64()))
            .unwrap_or_default();
        for k in 0..c.times.len() {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                c.name,
                c.times[k].as_f64(),
                c.lhs[k].as_f64(),
                c.rhs[k].as_f64(),
                (c.rhs[k] - c.lhs[k]).as_f64(),
                fitted,
                c.pass
            )?;
        }
        if c.times.is_empty() {
            writeln!(out, "{},,,,,{},{}", c.name, fitted, c.pass)?;
        }
    }
    Ok(())
}

fn cumulative_trapezoid<T: Real>(times: &[T], vals: &[T]) -> Vec<T> {
    let half = T::of(0.5);
    let mut acc = T::zero();
    let mut out = Vec::with_capacity(times.len());
    out.push(T::zero());
    for k in 1..times.len() {
        acc = acc + half * (vals[k] + vals[k - 1]) * (times[k] - times[k - 1]);
        out.push(acc);
    }
    out
}

fn ensure_sampled<T: Real>(what: &str, times: &[T], series: &[&[T]]) -> Result<()> {
    if times.len() < 2 {
        return Err(Error::Config(format!(
            "{what} needs at least 2 samples, got {}",
            times.len()
        )));
    }
    for pair in times.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::Config(format!(
                "{what}: sample times must increase strictly"
            )));
        }
    }
    for s in series {
        if s.len() != times.len() {
            return Err(Error::Config(format!(
                "{what}: series length {} does not match {} times",
                s.len(),
                times.len()
            )));
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("{what}: series contains NaN/Inf")));
        }
    }
    Ok(())
}

/// Integral-inequality envelope: if L(t) <= alpha(t) + int_0^t beta L on the
/// samples, then L(t) <= alpha(t) exp(int_0^t beta) must hold. A violated
/// premise makes the conclusion vacuous, which is reported in the notes
/// rather than as a failure.
pub fn gronwall_envelope<T: Real>(
    times: &[T],
    l: &[T],
    alpha: &[T],
    beta: &[T],
) -> Result<InequalityCheck<T>> {
    ensure_sampled("gronwall_envelope", times, &[l, alpha, beta])?;
    for pair in alpha.windows(2) {
        if pair[1] < pair[0] - T::of(1e-12) * (T::one() + pair[0].abs()) {
            return Err(Error::Config(
                "gronwall_envelope: alpha must be nondecreasing".into(),
            ));
        }
    }
    let beta_l: Vec<T> = beta.iter().zip(l).map(|(&b, &v)| b * v).collect();
    let premise_int = cumulative_trapezoid(times, &beta_l);
    let mut premise_ok = true;
    for k in 0..times.len() {
        let bound = alpha[k] + premise_int[k];
        let slack = T::of(1e-9) * (T::one() + bound.abs());
        if l[k] > bound + slack {
            premise_ok = false;
            break;
        }
    }
    let beta_int = cumulative_trapezoid(times, beta);
    let rhs: Vec<T> = alpha
        .iter()
        .zip(&beta_int)
        .map(|(&a, &bi)| a * bi.exp())
        .collect();
    let notes = if premise_ok {
        "premise holds on the samples".to_string()
    } else {
        "premise-not-satisfied".to_string()
    };
    let mut check = InequalityCheck::assemble(
        "gronwall",
        times.to_vec(),
        l.to_vec(),
        rhs,
        None,
        T::of(1e-9),
        notes,
    );
    if !premise_ok {
        // vacuous, not failed
        check.pass = true;
    }
    Ok(check)
}

/// Osgood envelope for the modulus mu(r) = r^mu_exponent.
///
/// Exponent 1 is the exponential bound, exponent 2 the reciprocal bound
/// behind the a priori estimate; other exponents are verified in the
/// phi-form phi(beta) - phi(rho(t)) <= int_0^t gamma with
/// phi(x) = int_x^1 dr/mu(r).
pub fn osgood_envelope<T: Real>(
    times: &[T],
    rho: &[T],
    beta: T,
    gamma: &[T],
    mu_exponent: T,
) -> Result<InequalityCheck<T>> {
    ensure_sampled("osgood_envelope", times, &[rho, gamma])?;
    if !beta.is_finite() || beta <= T::zero() {
        return Err(Error::Config(format!(
            "osgood_envelope: beta must be positive, got {beta}"
        )));
    }
    if !mu_exponent.is_finite() || mu_exponent < T::one() {
        return Err(Error::Config(format!(
            "osgood_envelope: mu exponent must be >= 1, got {mu_exponent}"
        )));
    }
    if rho.iter().any(|&r| r <= T::zero()) {
        return Err(Error::Config(
            "osgood_envelope: rho samples must be positive".into(),
        ));
    }
    let g = cumulative_trapezoid(times, gamma);
    let one = T::one();
    let blow_up = |threshold: T| -> Option<T> {
        for k in 1..times.len() {
            if g[k] >= threshold {
                let frac = (threshold - g[k - 1]) / (g[k] - g[k - 1]);
                return Some(times[k - 1] + frac * (times[k] - times[k - 1]));
            }
        }
        None
    };
    let tol = T::of(1e-9);
    if mu_exponent == one {
        let rhs: Vec<T> = g.iter().map(|&gi| beta * gi.exp()).collect();
        return Ok(InequalityCheck::assemble(
            "osgood",
            times.to_vec(),
            rho.to_vec(),
            rhs,
            None,
            tol,
            "mu(r) = r: exponential envelope".into(),
        ));
    }
    if mu_exponent == T::of(2.0) {
        let mut t_adm = Vec::new();
        let mut lhs = Vec::new();
        let mut rhs = Vec::new();
        for k in 0..times.len() {
            if beta * g[k] < one {
                t_adm.push(times[k]);
                lhs.push(rho[k]);
                rhs.push(beta / (one - beta * g[k]));
            }
        }
        let notes = match blow_up(one / beta) {
            Some(t) => format!("envelope predicts blow-up at t = {}", t.as_f64()),
            None => "envelope finite over the horizon".into(),
        };
        return Ok(InequalityCheck::assemble(
            "osgood", t_adm, lhs, rhs, None, tol, notes,
        ));
    }
    // phi(x) = (x^(1-m) - 1)/(m - 1), decreasing; the bound saturates as
    // rho grows, so every sample stays comparable
    let m1 = mu_exponent - one;
    let phi = |x: T| (x.powf(-m1) - one) / m1;
    let lhs: Vec<T> = rho.iter().map(|&r| phi(beta) - phi(r)).collect();
    let notes = match blow_up(phi(beta) + one / m1) {
        Some(t) => format!("envelope predicts blow-up at t = {}", t.as_f64()),
        None => "phi-form comparison".into(),
    };
    Ok(InequalityCheck::assemble(
        "osgood",
        times.to_vec(),
        lhs,
        g,
        None,
        tol,
        notes,
    ))
}

fn w21_norms<T: Real>(traj: &Trajectory<T>) -> Result<Vec<T>> {
    traj.fields().iter().map(|f| sobolev_norm(f, 2)).collect()
}

/// Fits the smallest C with dW/dt <= C ||grad u||_inf W at the interior
/// checkpoints, W the second-order norm, time derivative by centered
/// differences. Passes by construction; the constant is the result.
pub fn check_criticality<T: Real>(traj: &Trajectory<T>) -> Result<InequalityCheck<T>> {
    if traj.len() < 5 {
        return Err(Error::Config(format!(
            "criticality fit needs at least 5 checkpoints, got {}",
            traj.len()
        )));
    }
    let w = w21_norms(traj)?;
    let times = traj.times();
    let gs = traj.sup_velocity_gradient();
    let mut t_fit = Vec::new();
    let mut lhs = Vec::new();
    let mut scale = Vec::new();
    let mut c = T::zero();
    for k in 1..traj.len() - 1 {
        let dwdt = (w[k + 1] - w[k - 1]) / (times[k + 1] - times[k - 1]);
        let denom = gs[k] * w[k];
        if denom > T::zero() {
            c = c.max(dwdt / denom);
        }
        t_fit.push(times[k]);
        lhs.push(dwdt);
        scale.push(denom);
    }
    let c = c.max(T::zero());
    let rhs: Vec<T> = scale.iter().map(|&s| c * s).collect();
    Ok(InequalityCheck::assemble(
        "criticality",
        t_fit,
        lhs,
        rhs,
        Some(c),
        T::of(1e-12),
        format!("fit over {} interior checkpoints", traj.len() - 2),
    ))
}

/// Verifies W(t) <= W(0) / (1 - C t W(0)) at the admissible checkpoints
/// t < 1/(C W(0)), and evaluates the uniform bound M for the horizon.
pub fn check_apriori_envelope<T: Real>(traj: &Trajectory<T>, c: T) -> Result<InequalityCheck<T>> {
    if !c.is_finite() || c <= T::zero() {
        return Err(Error::Config(format!(
            "apriori envelope needs C > 0, got {c}"
        )));
    }
    let w = w21_norms(traj)?;
    let w0 = w[0];
    let one = T::one();
    let mut t_adm = Vec::new();
    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    for (k, &t) in traj.times().iter().enumerate() {
        let denom = one - c * t * w0;
        if denom > T::zero() {
            t_adm.push(t);
            lhs.push(w[k]);
            rhs.push(w0 / denom);
        }
    }
    if t_adm.is_empty() {
        return Ok(InequalityCheck {
            name: "apriori_envelope".into(),
            times: Vec::new(),
            lhs: Vec::new(),
            rhs: Vec::new(),
            fitted_constant: Some(c),
            margin: T::zero(),
            pass: true,
            notes: "empty-range".into(),
        });
    }
    let horizon = traj.horizon();
    let horizon_denom = one - c * horizon * w0;
    let m_note = if horizon_denom > T::zero() {
        format!(
            "uniform bound M = {} at T = {}",
            (w0 / horizon_denom).as_f64(),
            horizon.as_f64()
        )
    } else {
        format!(
            "horizon T = {} is past the admissible range (C T W(0) >= 1); \
             last admissible checkpoint t = {}",
            horizon.as_f64(),
            t_adm.last().expect("nonempty").as_f64()
        )
    };
    Ok(InequalityCheck::assemble(
        "apriori_envelope",
        t_adm,
        lhs,
        rhs,
        Some(c),
        T::of(1e-12),
        m_note,
    ))
}

/// Max over the ensemble of ||grad u||_inf / ||omega||_W21: the empirical
/// constant of the velocity-gradient bound. Zero fields are skipped.
pub fn check_lemma28<T: Real>(fields: &[ScalarField<T>]) -> Result<InequalityCheck<T>> {
    if fields.len() < 10 {
        return Err(Error::Config(format!(
            "ensemble constant needs at least 10 fields, got {}",
            fields.len()
        )));
    }
    let mut idx = Vec::new();
    let mut lhs = Vec::new();
    let mut scale = Vec::new();
    let mut skipped = 0usize;
    for (k, f) in fields.iter().enumerate() {
        let w = sobolev_norm(f, 2)?;
        if w == T::zero() {
            skipped += 1;
            continue;
        }
        let gs = velocity_spectral(f).sup_gradient();
        idx.push(T::of_usize(k));
        lhs.push(gs);
        scale.push(w);
    }
    if lhs.is_empty() {
        return Err(Error::Config(
            "ensemble constant undefined: every field is zero".into(),
        ));
    }
    let c = lhs
        .iter()
        .zip(&scale)
        .map(|(&g, &w)| g / w)
        .fold(T::zero(), T::max);
    let rhs: Vec<T> = scale.iter().map(|&w| c * w).collect();
    Ok(InequalityCheck::assemble(
        "lemma28",
        idx,
        lhs,
        rhs,
        Some(c),
        T::of(1e-12),
        format!(
            "sample coordinate is the ensemble index; {skipped} zero fields skipped"
        ),
    ))
}

/// integral |f g| <= ||f||_{L^{2,1}} ||g||_{L^{2,inf}} over an ensemble of
/// pairs. The constant is exactly one: sorting both factors decreasingly
/// can only increase the product sum, and the step-profile norms are
/// evaluated in closed form, so the bound holds to roundoff on the grid.
pub fn check_holder_lorentz<T: Real>(
    pairs: &[(ScalarField<T>, ScalarField<T>)],
) -> Result<InequalityCheck<T>> {
    if pairs.len() < 10 {
        return Err(Error::Config(format!(
            "ensemble bound needs at least 10 pairs, got {}",
            pairs.len()
        )));
    }
    let mut idx = Vec::new();
    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    for (k, (f, g)) in pairs.iter().enumerate() {
        idx.push(T::of_usize(k));
        lhs.push(f.zip_with(g, |a, b| (a * b).abs())?.integrate());
        rhs.push(lorentz_norm(f, 2.0, 1.0)? * lorentz_norm(g, 2.0, f64::INFINITY)?);
    }
    Ok(InequalityCheck::assemble(
        "holder_lorentz",
        idx,
        lhs,
        rhs,
        None,
        T::of(1e-12),
        "constant-one product bound; sample coordinate is the pair index".into(),
    ))
}

/// ||f||_{L^{2,1}} <= C ||grad f||_{L^1} with the flat-space extremal
/// constant C = 1/sqrt(pi) (radially decreasing profiles attain it; smooth
/// periodic samples sit strictly inside). The fitted constant is the
/// empirical ratio without C, for refinement-stability comparisons.
pub fn check_sobolev_lorentz<T: Real>(fields: &[ScalarField<T>]) -> Result<InequalityCheck<T>> {
    if fields.len() < 10 {
        return Err(Error::Config(format!(
            "ensemble bound needs at least 10 fields, got {}",
            fields.len()
        )));
    }
    let c_sharp = T::of(1.0 / std::f64::consts::PI.sqrt());
    let mut idx = Vec::new();
    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    let mut fitted = T::zero();
    for (k, f) in fields.iter().enumerate() {
        let l = lorentz_norm(f, 2.0, 1.0)?;
        let g = l1_norm(&gradient_magnitude(f)?);
        if g == T::zero() && l == T::zero() {
            // constants are outside the estimate; a zero field is vacuous
            continue;
        }
        idx.push(T::of_usize(k));
        lhs.push(l);
        rhs.push(c_sharp * g);
        if g > T::zero() {
            fitted = fitted.max(l / g);
        }
    }
    if lhs.is_empty() {
        return Err(Error::Config(
            "ensemble bound undefined: every field is zero".into(),
        ));
    }
    Ok(InequalityCheck::assemble(
        "sobolev_lorentz",
        idx,
        lhs,
        rhs,
        Some(fitted),
        T::of(1e-12),
        "rhs carries the extremal constant 1/sqrt(pi); fitted constant is \
         the raw ratio; sample coordinate is the ensemble index"
            .into(),
    ))
}

fn dini_budget<T: Real>(omega0: &ScalarField<T>) -> Result<(T, T)> {
    let b = l1_norm(omega0) + sup_norm(omega0) + dini_seminorm(omega0)?;
    Ok((b, sup_norm(omega0)))
}

/// Fits the smallest C with ||grad u(t)||_inf <= C B exp(C S t), where
/// B = ||w0||_1 + ||w0||_inf + the Dini seminorm and S = ||w0||_inf.
/// The right side is monotone in C, so bisection finds the constant.
pub fn check_dini_velocity<T: Real>(traj: &Trajectory<T>) -> Result<InequalityCheck<T>> {
    let (b, s) = dini_budget(&traj.fields()[0])?;
    let g = traj.sup_velocity_gradient();
    let times = traj.times();
    let g_max = g.iter().fold(T::zero(), |acc, &v| acc.max(v));
    let fitted = if g_max == T::zero() {
        T::zero()
    } else if b == T::zero() {
        return Err(Error::Config(
            "velocity gradient is nonzero but the initial budget is zero".into(),
        ));
    } else {
        let satisfied = |c: T| -> bool {
            times
                .iter()
                .zip(g)
                .all(|(&t, &gv)| c * b * (c * s * t).exp() >= gv)
        };
        let mut hi = T::one();
        while !satisfied(hi) {
            hi = hi * T::of(2.0);
        }
        let mut lo = T::zero();
        for _ in 0..200 {
            let mid = (lo + hi) * T::of(0.5);
            if satisfied(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let rhs: Vec<T> = times
        .iter()
        .map(|&t| fitted * b * (fitted * s * t).exp())
        .collect();
    Ok(InequalityCheck::assemble(
        "dini_velocity",
        times.to_vec(),
        g.to_vec(),
        rhs,
        Some(fitted),
        T::of(1e-12),
        format!("B = {}, S = {}", b.as_f64(), s.as_f64()),
    ))
}

/// Verifies the double-exponential envelope for the second-order norm,
/// with the rate constant taken from the Dini velocity fit.
pub fn check_double_exponential<T: Real>(traj: &Trajectory<T>) -> Result<InequalityCheck<T>> {
    if traj.horizon() < T::one() - T::of(1e-12) {
        return Err(Error::Config(format!(
            "double-exponential check expects a horizon of at least 1, got {}",
            traj.horizon().as_f64()
        )));
    }
    let (b, s) = dini_budget(&traj.fields()[0])?;
    let w = w21_norms(traj)?;
    if s == T::zero() {
        let zeros = vec![T::zero(); traj.len()];
        return Ok(InequalityCheck::assemble(
            "double_exponential",
            traj.times().to_vec(),
            w,
            zeros,
            None,
            T::of(1e-12),
            "degenerate zero initial datum: trivial pass".into(),
        ));
    }
    let c = check_dini_velocity(traj)?
        .fitted_constant
        .expect("dini fit always reports a constant");
    let rhs: Vec<T> = traj
        .times()
        .iter()
        .map(|&t| w[0] * ((b / s) * (c * s * t).exp()).exp())
        .collect();
    Ok(InequalityCheck::assemble(
        "double_exponential",
        traj.times().to_vec(),
        w,
        rhs,
        Some(c),
        T::of(1e-12),
        format!("rate constant from the Dini velocity fit; B = {}", b.as_f64()),
    ))
}

/// Uniform-in-epsilon compactness diagnostics over the smoothed snapshots:
/// tail transport, translation smallness, and small-set concentration of
/// the second derivatives.
pub fn check_compactness_diagnostics<T: Real>(
    traj: &Trajectory<T>,
    eps_list: &[T],
) -> Result<Vec<InequalityCheck<T>>> {
    let grid = traj.grid();
    let lo = T::of(4.0) * grid.dx();
    let hi = grid.half_width() / T::of(4.0);
    if eps_list.is_empty() {
        return Err(Error::Config("smoothing radius list is empty".into()));
    }
    for &e in eps_list {
        if !(e > lo && e < hi) {
            return Err(Error::Config(format!(
                "smoothing radius {e} outside the admissible range ({lo}, {hi})"
            )));
        }
    }
    let m_vel = traj
        .sup_speed()
        .iter()
        .fold(T::zero(), |acc, &v| acc.max(v));
    let times = traj.times();
    let radius = grid.half_width() * T::of(0.5);
    // exact transport conserves mass, so the run's own L1 drift measures the
    // scheme noise that leaks into otherwise near-zero tail masses
    let l1_initial = l1_norm(&traj.fields()[0]);
    let l1_drift = traj
        .fields()
        .iter()
        .map(|f| (l1_norm(f) - l1_initial).abs())
        .fold(T::zero(), |a, v| a.max(v));
    let two = T::of(2.0);
    let deltas = [T::of(0.04), T::of(0.02), T::of(0.01)];
    let mut out = Vec::new();
    let mut conc_final = vec![T::zero(); deltas.len()];
    let mut conc_initial = vec![T::zero(); deltas.len()];
    let second_mag = |f: &ScalarField<T>| -> Result<ScalarField<T>> {
        let d11 = spectral_derivative(f, Axis::X1, 2)?;
        let d22 = spectral_derivative(f, Axis::X2, 2)?;
        let d12 = crate::norms::mixed_derivative(f)?;
        let mut acc = d11.map(|v| v.abs());
        acc = acc.zip_with(&d12, |a, b| a + b.abs())?;
        acc.zip_with(&d22, |a, b| a + b.abs())
    };
    for &eps in eps_list {
        let moll = Mollifier::new(grid, eps)?;
        let smoothed: Vec<ScalarField<T>> = traj
            .fields()
            .iter()
            .map(|f| moll.apply(f))
            .collect::<Result<_>>()?;
        // (a) tails move no faster than the velocity bound allows: smoothing
        // spreads mass by eps and transport carries it by at most M t, so the
        // smoothed tail beyond R is dominated by the raw initial tail beyond
        // R - eps - 2 M t (the factor two is deliberate headroom)
        let mut tail_lhs = Vec::with_capacity(times.len());
        let mut tail_rhs = Vec::with_capacity(times.len());
        for (k, &t) in times.iter().enumerate() {
            tail_lhs.push(tail_mass(&smoothed[k], radius, 2)?);
            let pulled = (radius - eps - two * m_vel * t).max(T::zero());
            tail_rhs.push(tail_mass(&traj.fields()[0], pulled, 2)?);
        }
        let tol = T::of(1e-9) * (T::one() + tail_rhs.iter().fold(T::zero(), |a, &v| a.max(v)))
            + l1_drift;
        out.push(InequalityCheck::assemble(
            &format!("equitightness(eps={})", eps.as_f64()),
            times.to_vec(),
            tail_lhs,
            tail_rhs,
            None,
            tol,
            format!(
                "tail radius {} pulled by eps + 2 M t, velocity bound M = {}, scheme drift budget {}",
                radius.as_f64(),
                m_vel.as_f64(),
                l1_drift.as_f64()
            ),
        ));
        // (b) translation modulus against |h| times the gradient's L1 norm,
        // the translation-invariance bound in integral form
        let h = (two * grid.dx(), T::zero());
        let h_len = h.0;
        let mut grad_bound = T::zero();
        let mut tr_lhs = Vec::with_capacity(times.len());
        for f in &smoothed {
            let gm = crate::norms::gradient_magnitude(f)?;
            grad_bound = grad_bound.max(crate::norms::l1_norm(&gm));
            tr_lhs.push(translation_modulus(f, h)?);
        }
        let tr_rhs: Vec<T> = vec![h_len * grad_bound; times.len()];
        let tol = T::of(1e-6) * (T::one() + h_len * grad_bound);
        out.push(InequalityCheck::assemble(
            &format!("equicontinuity(eps={})", eps.as_f64()),
            times.to_vec(),
            tr_lhs,
            tr_rhs,
            None,
            tol,
            format!(
                "shift |h| = {}, gradient L1 bound M = {}",
                h_len.as_f64(),
                grad_bound.as_f64()
            ),
        ));
        // (c) concentration of the second derivatives, tracked for the
        // cross-eps table below
        let s0 = second_mag(&smoothed[0])?;
        let st = second_mag(smoothed.last().expect("nonempty trajectory"))?;
        for (j, &d) in deltas.iter().enumerate() {
            conc_initial[j] = conc_initial[j].max(small_set_concentration(&s0, d)?);
            conc_final[j] = conc_final[j].max(small_set_concentration(&st, d)?);
        }
    }
    let factor = T::of(10.0);
    let rhs: Vec<T> = conc_initial.iter().map(|&v| factor * v).collect();
    let mut table = String::from("delta -> sup over eps at the final time: ");
    for (j, &d) in deltas.iter().enumerate() {
        table.push_str(&format!("{}: {}; ", d.as_f64(), conc_final[j].as_f64()));
    }
    let tol = T::of(1e-12) * (T::one() + rhs.iter().fold(T::zero(), |a, &v| a.max(v)));
    out.push(InequalityCheck::assemble(
        "equiintegrability",
        deltas.to_vec(),
        conc_final,
        rhs,
        None,
        tol,
        format!(
            "sample coordinate is the small-set measure delta; envelope is \
             10x the initial-time value; {table}"
        ),
    ));
    Ok(out)
}

// ------------------------------------------------------------ weak solution

#[derive(Clone, Copy, Debug)]
pub enum TimeProfile {
    Constant,
    Cosine,
    ExpDecay,
    Quadratic,
    DoubleSine,
}

impl TimeProfile {
    fn value<T: Real>(self, t: T) -> T {
        match self {
            TimeProfile::Constant => T::one(),
            TimeProfile::Cosine => t.cos(),
            TimeProfile::ExpDecay => (-t).exp(),
            TimeProfile::Quadratic => T::one() + t * t * T::of(0.5),
            TimeProfile::DoubleSine => T::one() + (t * T::of(2.0)).sin(),
        }
    }

    fn rate<T: Real>(self, t: T) -> T {
        match self {
            TimeProfile::Constant => T::zero(),
            TimeProfile::Cosine => -t.sin(),
            TimeProfile::ExpDecay => -(-t).exp(),
            TimeProfile::Quadratic => t,
            TimeProfile::DoubleSine => T::of(2.0) * (t * T::of(2.0)).cos(),
        }
    }
}

/// Separable test function a(t) psi(x): a smooth bump supported in the ball
/// of the given radius, scaled by a C^1 time profile.
#[derive(Clone, Debug)]
pub struct TestFunction<T> {
    pub name: String,
    pub center: [T; 2],
    pub radius: T,
    pub profile: TimeProfile,
}

impl<T: Real> TestFunction<T> {
    fn bump(&self, x: [T; 2]) -> T {
        let dx = x[0] - self.center[0];
        let dy = x[1] - self.center[1];
        let q = (dx * dx + dy * dy) / (self.radius * self.radius);
        if q < T::one() - T::of(1e-12) {
            (-(T::one() / (T::one() - q))).exp()
        } else {
            T::zero()
        }
    }

    pub fn value(&self, t: T, x: [T; 2]) -> T {
        self.profile.value(t) * self.bump(x)
    }

    pub fn time_derivative(&self, t: T, x: [T; 2]) -> T {
        self.profile.rate(t) * self.bump(x)
    }

    pub fn gradient(&self, t: T, x: [T; 2]) -> [T; 2] {
        let dx = x[0] - self.center[0];
        let dy = x[1] - self.center[1];
        let r2 = self.radius * self.radius;
        let q = (dx * dx + dy * dy) / r2;
        if q >= T::one() - T::of(1e-12) {
            return [T::zero(), T::zero()];
        }
        let one = T::one();
        let psi = (-(one / (one - q))).exp();
        let chain = -psi / ((one - q) * (one - q)) * self.profile.value(t);
        let two = T::of(2.0);
        [chain * two * dx / r2, chain * two * dy / r2]
    }
}

/// Five bumps of varied center, width, and time profile, all compactly
/// supported inside a box of the given half-width.
pub fn standard_test_functions<T: Real>(half_width: T) -> Vec<TestFunction<T>> {
    let l = half_width;
    let mk = |name: &str, cx: f64, cy: f64, r: f64, profile: TimeProfile| TestFunction {
        name: name.into(),
        center: [l * T::of(cx), l * T::of(cy)],
        radius: l * T::of(r),
        profile,
    };
    vec![
        mk("centered_steady", 0.0, 0.0, 0.55, TimeProfile::Constant),
        mk("offset_cosine", 0.25, -0.15, 0.35, TimeProfile::Cosine),
        mk("small_decay", -0.3, 0.2, 0.25, TimeProfile::ExpDecay),
        mk("wide_quadratic", 0.1, 0.1, 0.5, TimeProfile::Quadratic),
        mk("narrow_wave", -0.15, -0.3, 0.3, TimeProfile::DoubleSine),
    ]
}

/// Residual of the weak-form identity against each test function:
/// |int phi(T) w(T) - int phi(0) w(0) - int_0^T int (dphi/dt + u . grad phi) w|.
/// Time integration is the trapezoid rule over the checkpoints.
pub fn check_weak_solution<T: Real>(
    traj: &Trajectory<T>,
    test_functions: &[TestFunction<T>],
) -> Result<InequalityCheck<T>> {
    let grid = traj.grid();
    let l = grid.half_width();
    for tf in test_functions {
        if tf.radius <= T::zero() {
            return Err(Error::Config(format!(
                "test function {} has nonpositive radius",
                tf.name
            )));
        }
        if tf.center[0].abs() + tf.radius >= l || tf.center[1].abs() + tf.radius >= l {
            return Err(Error::Config(format!(
                "test function {} touches the box boundary",
                tf.name
            )));
        }
    }
    let times = traj.times();
    let velocities: Vec<_> = traj.fields().iter().map(velocity_spectral).collect();
    let w11_0 = sobolev_norm(&traj.fields()[0], 1)?;
    let mut idx = Vec::with_capacity(test_functions.len());
    let mut lhs = Vec::with_capacity(test_functions.len());
    let mut rhs = Vec::with_capacity(test_functions.len());
    let mut names = Vec::new();
    for (j, tf) in test_functions.iter().enumerate() {
        let mut phi_c1 = T::zero();
        let mut integrand = Vec::with_capacity(times.len());
        for (k, &t) in times.iter().enumerate() {
            let vel = &velocities[k];
            let mut sup_phi = T::zero();
            let mut sup_dt = T::zero();
            let mut sup_grad = T::zero();
            let field = ScalarField::from_fn(grid, |p| tf.value(t, p));
            let n = grid.n();
            let mut vals = Vec::with_capacity(n * n);
            for i in 0..n {
                for jj in 0..n {
                    let p = grid.node(i, jj);
                    let phi = field.get(i, jj);
                    let dphi = tf.time_derivative(t, p);
                    let gphi = tf.gradient(t, p);
                    sup_phi = sup_phi.max(phi.abs());
                    sup_dt = sup_dt.max(dphi.abs());
                    sup_grad = sup_grad.max((gphi[0] * gphi[0] + gphi[1] * gphi[1]).sqrt());
                    vals.push(dphi + vel.u1.get(i, jj) * gphi[0] + vel.u2.get(i, jj) * gphi[1]);
                }
            }
            phi_c1 = phi_c1.max(sup_phi + sup_dt + sup_grad);
            let advected = ScalarField::from_values(grid, vals)?;
            integrand.push(advected.zip_with(&traj.fields()[k], |a, b| a * b)?.integrate());
        }
        let half = T::of(0.5);
        let mut time_int = T::zero();
        for k in 1..times.len() {
            time_int = time_int + half * (integrand[k] + integrand[k - 1]) * (times[k] - times[k - 1]);
        }
        let boundary = |k: usize| -> Result<T> {
            let t = times[k];
            let phi = ScalarField::from_fn(grid, |p| tf.value(t, p));
            Ok(phi.zip_with(&traj.fields()[k], |a, b| a * b)?.integrate())
        };
        let residual =
            (boundary(times.len() - 1)? - boundary(0)? - time_int).abs();
        idx.push(T::of_usize(j));
        lhs.push(residual);
        rhs.push(T::of(1e-3) * phi_c1 * w11_0);
        names.push(tf.name.clone());
    }
    Ok(InequalityCheck::assemble(
        "weak_solution",
        idx,
        lhs,
        rhs,
        None,
        T::zero(),
        format!(
            "sample coordinate is the test-function index: [{}]",
            names.join(", ")
        ),
    ))
}
