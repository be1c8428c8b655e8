//! Time evolution of the advected vorticity.
//!
//! Two deliberately different integrators: a pseudo-spectral RK4 scheme
//! with 2/3-rule dealiasing, and a semi-Lagrangian scheme that composes
//! backward characteristics against the initial data. They share nothing
//! past the velocity inversion, which is what makes their agreement a
//! meaningful consistency oracle (`cross_validate`).

pub mod mollifier;
pub mod presets;

pub use mollifier::{mollify, Mollifier};

use rayon::prelude::*;
use rustfft::num_complex::Complex;

use crate::biot_savart::velocity_spectral;
use crate::fields::spectral::{fft2, forward, inverse_real, wavenumbers, wavenumbers_odd};
use crate::fields::{
    spectral_derivative, spectral_resample, Axis, BicubicSpline, Grid2D, ScalarField,
};
use crate::flow::VelocitySampler;
use crate::{Error, Real, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Spectral,
    SemiLagrangian,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(Method::Spectral),
            "semi_lagrangian" => Ok(Method::SemiLagrangian),
            other => Err(Error::Config(format!(
                "unknown method `{other}`; valid: spectral, semi_lagrangian"
            ))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Spectral => "spectral",
            Method::SemiLagrangian => "semi_lagrangian",
        })
    }
}

/// Checkpointed solution path. Fields hold the vorticity at the checkpoint
/// times; the velocity extrema ride along for the inequality ledger.
#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    grid: Grid2D<T>,
    method: Method,
    dt: T,
    omega_mean: T,
    times: Vec<T>,
    fields: Vec<ScalarField<T>>,
    sup_speed: Vec<T>,
    sup_velocity_gradient: Vec<T>,
}

impl<T: Real> Trajectory<T> {
    pub fn grid(&self) -> Grid2D<T> {
        self.grid
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    /// Mean of the initial data; the velocity inversion works on the
    /// mean-subtracted field, so a nonzero value here flags that the run
    /// evolved an offset datum.
    pub fn omega_mean(&self) -> T {
        self.omega_mean
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn fields(&self) -> &[ScalarField<T>] {
        &self.fields
    }

    pub fn sup_speed(&self) -> &[T] {
        &self.sup_speed
    }

    pub fn sup_velocity_gradient(&self) -> &[T] {
        &self.sup_velocity_gradient
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> T {
        *self.times.last().expect("trajectory has at least one time")
    }

    /// Time-interpolating velocity sampler over the checkpoint snapshots.
    pub fn sampler(&self, with_hessians: bool) -> Result<TrajectorySampler<T>> {
        TrajectorySampler::new(self, with_hessians, 1)
    }

    /// Sampler whose spatial interpolants live on a `refine`-times finer
    /// grid (exact trigonometric upsampling). Cuts the interpolation bias
    /// of the cubic splines, which matters when flow Jacobians are audited
    /// at the 1e-6 level.
    pub fn sampler_refined(
        &self,
        with_hessians: bool,
        refine: usize,
    ) -> Result<TrajectorySampler<T>> {
        TrajectorySampler::new(self, with_hessians, refine)
    }
}

/// `count` evenly spaced checkpoint times from 0 to `t_end` inclusive.
pub fn even_checkpoint_times<T: Real>(t_end: T, count: usize) -> Result<Vec<T>> {
    if count < 2 {
        return Err(Error::Config(format!(
            "need at least 2 checkpoint times, got {count}"
        )));
    }
    if !t_end.is_finite() || t_end <= T::zero() {
        return Err(Error::Config(format!("horizon must be positive, got {t_end}")));
    }
    let mut times: Vec<T> = (0..count)
        .map(|k| t_end * T::of_usize(k) / T::of_usize(count - 1))
        .collect();
    times[0] = T::zero();
    times[count - 1] = t_end;
    Ok(times)
}

fn validate_schedule<T: Real>(t_end: T, dt: T, checkpoints: &[T]) -> Result<()> {
    if !t_end.is_finite() || t_end <= T::zero() {
        return Err(Error::Config(format!("horizon must be positive, got {t_end}")));
    }
    if !dt.is_finite() || dt <= T::zero() {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    let Some(&first) = checkpoints.first() else {
        return Err(Error::Config("checkpoint list is empty".into()));
    };
    if first.abs() > T::of(1e-12) {
        return Err(Error::Config(format!(
            "checkpoints must start at time 0, got {first}"
        )));
    }
    let slack = T::of(1e-12) * (T::one() + t_end);
    for pair in checkpoints.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::Config(format!(
                "checkpoint times must increase strictly: {} then {}",
                pair[0], pair[1]
            )));
        }
    }
    if *checkpoints.last().expect("nonempty") > t_end + slack {
        return Err(Error::Config(format!(
            "last checkpoint {} exceeds the horizon {t_end}",
            checkpoints.last().expect("nonempty")
        )));
    }
    Ok(())
}

fn check_cfl<T: Real>(omega0: &ScalarField<T>, dt: T) -> Result<()> {
    let vel = velocity_spectral(omega0);
    let sup = vel.sup_speed();
    let dx = omega0.grid().dx();
    let cfl = dt * sup / dx;
    if cfl > T::of(0.5) {
        return Err(Error::TimeStepTooLarge {
            cfl: cfl.as_f64(),
            suggested_dt: (T::of(0.5) * dx / sup).as_f64(),
        });
    }
    Ok(())
}

fn segment_steps<T: Real>(ta: T, tb: T, dt: T) -> (T, usize) {
    let span = tb - ta;
    let m = ((span / dt) - T::of(1e-9))
        .ceil()
        .to_usize()
        .unwrap_or(1)
        .max(1);
    (span / T::of_usize(m), m)
}

/// Evolve the vorticity to the last checkpoint, recording a snapshot and
/// the velocity extrema at every checkpoint time.
pub fn simulate<T: Real>(
    omega0: &ScalarField<T>,
    t_end: T,
    dt: T,
    checkpoints: &[T],
    method: Method,
) -> Result<Trajectory<T>> {
    validate_schedule(t_end, dt, checkpoints)?;
    if !omega0.is_finite() {
        return Err(Error::Config("initial vorticity contains NaN or Inf".into()));
    }
    check_cfl(omega0, dt)?;
    let fields = match method {
        Method::Spectral => spectral_run(omega0, dt, checkpoints)?,
        Method::SemiLagrangian => semi_lagrangian_run(omega0, dt, checkpoints)?,
    };
    let mut sup_speed = Vec::with_capacity(fields.len());
    let mut sup_grad = Vec::with_capacity(fields.len());
    for f in &fields {
        let vel = velocity_spectral(f);
        sup_speed.push(vel.sup_speed());
        sup_grad.push(vel.sup_gradient());
    }
    Ok(Trajectory {
        grid: omega0.grid(),
        method,
        dt,
        omega_mean: omega0.mean(),
        times: checkpoints.to_vec(),
        fields,
        sup_speed,
        sup_velocity_gradient: sup_grad,
    })
}

/// L1 distance of the two methods' endpoints, relative to the initial mass.
pub fn cross_validate<T: Real>(omega0: &ScalarField<T>, t_end: T, dt: T) -> Result<T> {
    let mass = crate::norms::l1_norm(omega0);
    if mass == T::zero() {
        return Ok(T::zero());
    }
    let times = [T::zero(), t_end];
    let a = simulate(omega0, t_end, dt, &times, Method::Spectral)?;
    let b = simulate(omega0, t_end, dt, &times, Method::SemiLagrangian)?;
    let diff = a.fields[1].try_sub(&b.fields[1])?;
    Ok(crate::norms::l1_norm(&diff) / mass)
}

// ---------------------------------------------------------------- spectral

struct SpectralEngine<T> {
    grid: Grid2D<T>,
    /// 2/3-rule survivor flags, row-major over modes.
    keep: Vec<bool>,
    ko: Vec<T>,
    kf: Vec<T>,
}

impl<T: Real> SpectralEngine<T> {
    fn new(grid: Grid2D<T>) -> Self {
        let n = grid.n();
        let cut = n / 3;
        let band = |i: usize| -> bool {
            let m = if i <= n / 2 { i } else { n - i };
            m <= cut
        };
        let mut keep = vec![false; n * n];
        for i in 0..n {
            for j in 0..n {
                keep[i * n + j] = band(i) && band(j);
            }
        }
        SpectralEngine {
            grid,
            keep,
            ko: wavenumbers_odd(&grid),
            kf: wavenumbers(&grid),
        }
    }

    fn mask(&self, spec: &mut [Complex<T>]) {
        let zero = Complex::new(T::zero(), T::zero());
        for (z, &k) in spec.iter_mut().zip(&self.keep) {
            if !k {
                *z = zero;
            }
        }
    }

    /// Minus the dealiased advection term, in spectral form.
    fn rhs(&self, spec: &[Complex<T>]) -> Vec<Complex<T>> {
        let n = self.grid.n();
        let zero = Complex::new(T::zero(), T::zero());
        let mut u1 = vec![zero; n * n];
        let mut u2 = vec![zero; n * n];
        let mut w1 = vec![zero; n * n];
        let mut w2 = vec![zero; n * n];
        for i in 0..n {
            for j in 0..n {
                let idx = i * n + j;
                let z = spec[idx];
                let k1f = self.kf[i];
                let k2f = self.kf[j];
                let denom = k1f * k1f + k2f * k2f;
                if denom > T::zero() {
                    let a = self.ko[j] / denom;
                    let b = self.ko[i] / denom;
                    u1[idx] = Complex::new(-a * z.im, a * z.re);
                    u2[idx] = Complex::new(b * z.im, -b * z.re);
                }
                w1[idx] = Complex::new(-self.ko[i] * z.im, self.ko[i] * z.re);
                w2[idx] = Complex::new(-self.ko[j] * z.im, self.ko[j] * z.re);
            }
        }
        fft2(n, &mut u1, true);
        fft2(n, &mut u2, true);
        fft2(n, &mut w1, true);
        fft2(n, &mut w2, true);
        let mut q: Vec<Complex<T>> = (0..n * n)
            .map(|m| Complex::new(u1[m].re * w1[m].re + u2[m].re * w2[m].re, T::zero()))
            .collect();
        fft2(n, &mut q, false);
        self.mask(&mut q);
        for z in q.iter_mut() {
            *z = Complex::new(-z.re, -z.im);
        }
        q
    }

    fn rk4_step(&self, spec: &mut [Complex<T>], h: T) {
        let half = T::of(0.5);
        let sixth = T::of(1.0 / 6.0);
        let two = T::of(2.0);
        let stage = |base: &[Complex<T>], k: &[Complex<T>], c: T| -> Vec<Complex<T>> {
            base.iter()
                .zip(k)
                .map(|(b, d)| Complex::new(b.re + c * d.re, b.im + c * d.im))
                .collect()
        };
        let k1 = self.rhs(spec);
        let k2 = self.rhs(&stage(spec, &k1, h * half));
        let k3 = self.rhs(&stage(spec, &k2, h * half));
        let k4 = self.rhs(&stage(spec, &k3, h));
        for idx in 0..spec.len() {
            let s = spec[idx];
            let re = s.re
                + h * sixth * (k1[idx].re + two * k2[idx].re + two * k3[idx].re + k4[idx].re);
            let im = s.im
                + h * sixth * (k1[idx].im + two * k2[idx].im + two * k3[idx].im + k4[idx].im);
            spec[idx] = Complex::new(re, im);
        }
    }
}

fn spectral_run<T: Real>(
    omega0: &ScalarField<T>,
    dt: T,
    checkpoints: &[T],
) -> Result<Vec<ScalarField<T>>> {
    let grid = omega0.grid();
    let engine = SpectralEngine::new(grid);
    let mut spec = forward(omega0);
    engine.mask(&mut spec);
    let mut out = Vec::with_capacity(checkpoints.len());
    out.push(inverse_real(grid, spec.clone()));
    for pair in checkpoints.windows(2) {
        let (h, m) = segment_steps(pair[0], pair[1], dt);
        for step in 0..m {
            engine.rk4_step(&mut spec, h);
            if !(spec[0].re.is_finite() && spec[0].im.is_finite()) {
                return Err(Error::Unstable {
                    last_good_time: (pair[0] + h * T::of_usize(step)).as_f64(),
                });
            }
        }
        out.push(inverse_real(grid, spec.clone()));
    }
    Ok(out)
}

// ---------------------------------------------------------- semi-Lagrangian

/// Velocity frozen over one step, spline-sampled in space.
struct FrozenVelocity<T> {
    lo: T,
    hi: T,
    u1: BicubicSpline<T>,
    u2: BicubicSpline<T>,
}

impl<T: Real> VelocitySampler<T> for FrozenVelocity<T> {
    fn time_range(&self) -> (T, T) {
        (self.lo, self.hi)
    }
    fn velocity(&self, _t: T, x: [T; 2]) -> [T; 2] {
        [self.u1.eval(x), self.u2.eval(x)]
    }
    fn gradient(&self, _t: T, _x: [T; 2]) -> [[T; 2]; 2] {
        [[T::zero(); 2]; 2]
    }
    fn hessian(&self, _t: T, _x: [T; 2]) -> [[[T; 2]; 2]; 2] {
        [[[T::zero(); 2]; 2]; 2]
    }
}

fn semi_lagrangian_run<T: Real>(
    omega0: &ScalarField<T>,
    dt: T,
    checkpoints: &[T],
) -> Result<Vec<ScalarField<T>>> {
    let grid = omega0.grid();
    let n = grid.n();
    let nodes: Vec<[T; 2]> = (0..n * n).map(|idx| grid.node(idx / n, idx % n)).collect();
    let w0 = BicubicSpline::new(omega0);
    let mut disp = vec![[T::zero(); 2]; n * n];
    let mut w_cur = omega0.clone();
    let mut out = Vec::with_capacity(checkpoints.len());
    out.push(omega0.clone());
    for pair in checkpoints.windows(2) {
        let (h, m) = segment_steps(pair[0], pair[1], dt);
        for step in 0..m {
            let t = pair[0] + h * T::of_usize(step);
            let vel = velocity_spectral(&w_cur);
            let frozen = FrozenVelocity {
                lo: t,
                hi: t + h,
                u1: BicubicSpline::new(&vel.u1),
                u2: BicubicSpline::new(&vel.u2),
            };
            // one backward step of the characteristics from every node
            let feet = crate::flow::integrate_points(&frozen, &nodes, t + h, t, h)?;
            let d1 = ScalarField::from_values(grid, disp.iter().map(|d| d[0]).collect())
                .map_err(|_| Error::Unstable {
                    last_good_time: t.as_f64(),
                })?;
            let d2 = ScalarField::from_values(grid, disp.iter().map(|d| d[1]).collect())
                .map_err(|_| Error::Unstable {
                    last_good_time: t.as_f64(),
                })?;
            let sd1 = BicubicSpline::new(&d1);
            let sd2 = BicubicSpline::new(&d2);
            let next: Vec<([T; 2], T)> = feet
                .par_iter()
                .zip(&nodes)
                .map(|(&y, &x)| {
                    let d = [sd1.eval(y) + y[0] - x[0], sd2.eval(y) + y[1] - x[1]];
                    let v = w0.eval([x[0] + d[0], x[1] + d[1]]);
                    (d, v)
                })
                .collect();
            let values: Vec<T> = next.iter().map(|(_, v)| *v).collect();
            w_cur = ScalarField::from_values(grid, values).map_err(|_| Error::Unstable {
                last_good_time: t.as_f64(),
            })?;
            for (slot, (d, _)) in disp.iter_mut().zip(&next) {
                *slot = *d;
            }
        }
        out.push(w_cur.clone());
    }
    Ok(out)
}

// ------------------------------------------------------------- the sampler

struct CheckpointSplines<T> {
    u: [BicubicSpline<T>; 2],
    /// [d1u1, d2u1, d1u2, d2u2]
    g: [BicubicSpline<T>; 4],
    /// [d11u1, d12u1, d22u1, d11u2, d12u2, d22u2]
    h: Option<[BicubicSpline<T>; 6]>,
}

/// Spline-in-space, linear-in-time velocity built from a trajectory's
/// checkpoint snapshots, for flow-map integration.
pub struct TrajectorySampler<T> {
    times: Vec<T>,
    snaps: Vec<CheckpointSplines<T>>,
}

impl<T: Real> TrajectorySampler<T> {
    fn new(traj: &Trajectory<T>, with_hessians: bool, refine: usize) -> Result<Self> {
        if !(1..=4).contains(&refine) {
            return Err(Error::Config(format!(
                "sampler refinement factor must be 1..=4, got {refine}"
            )));
        }
        let fine_n = traj.grid.n() * refine;
        let lift = |f: &ScalarField<T>| -> Result<BicubicSpline<T>> {
            let fine = if refine == 1 {
                f.clone()
            } else {
                spectral_resample(f, fine_n)?
            };
            Ok(BicubicSpline::new(&fine))
        };
        let mut snaps = Vec::with_capacity(traj.len());
        for f in &traj.fields {
            let vel = velocity_spectral(f);
            let u = [lift(&vel.u1)?, lift(&vel.u2)?];
            let g = [
                lift(&vel.grad[0][0])?,
                lift(&vel.grad[0][1])?,
                lift(&vel.grad[1][0])?,
                lift(&vel.grad[1][1])?,
            ];
            let h = if with_hessians {
                let mut parts = Vec::with_capacity(6);
                for (ui, d1ui) in [(&vel.u1, &vel.grad[0][0]), (&vel.u2, &vel.grad[1][0])] {
                    parts.push(lift(&spectral_derivative(ui, Axis::X1, 2)?)?);
                    parts.push(lift(&spectral_derivative(d1ui, Axis::X2, 1)?)?);
                    parts.push(lift(&spectral_derivative(ui, Axis::X2, 2)?)?);
                }
                let arr: [BicubicSpline<T>; 6] = parts
                    .try_into()
                    .unwrap_or_else(|_| unreachable!("six hessian parts"));
                Some(arr)
            } else {
                None
            };
            snaps.push(CheckpointSplines { u, g, h });
        }
        Ok(TrajectorySampler {
            times: traj.times.clone(),
            snaps,
        })
    }

    /// Bracketing segment index and interpolation weight, clamped to the
    /// stored horizon.
    fn locate(&self, t: T) -> (usize, T) {
        let last = self.times.len() - 1;
        if last == 0 || t <= self.times[0] {
            return (0, T::zero());
        }
        if t >= self.times[last] {
            return (last - 1, T::one());
        }
        let mut k = self.times.partition_point(|&s| s <= t);
        k = k.clamp(1, last);
        let (ta, tb) = (self.times[k - 1], self.times[k]);
        (k - 1, (t - ta) / (tb - ta))
    }

    fn blend(&self, t: T, x: [T; 2], pick: impl Fn(&CheckpointSplines<T>) -> &BicubicSpline<T>) -> T {
        let (k, th) = self.locate(t);
        let a = pick(&self.snaps[k]).eval(x);
        if th == T::zero() && self.snaps.len() == 1 {
            return a;
        }
        let b = pick(&self.snaps[(k + 1).min(self.snaps.len() - 1)]).eval(x);
        a + th * (b - a)
    }
}

impl<T: Real> VelocitySampler<T> for TrajectorySampler<T> {
    fn time_range(&self) -> (T, T) {
        (self.times[0], *self.times.last().expect("nonempty"))
    }

    fn velocity(&self, t: T, x: [T; 2]) -> [T; 2] {
        [
            self.blend(t, x, |s| &s.u[0]),
            self.blend(t, x, |s| &s.u[1]),
        ]
    }

    fn gradient(&self, t: T, x: [T; 2]) -> [[T; 2]; 2] {
        [
            [self.blend(t, x, |s| &s.g[0]), self.blend(t, x, |s| &s.g[1])],
            [self.blend(t, x, |s| &s.g[2]), self.blend(t, x, |s| &s.g[3])],
        ]
    }

    fn hessian(&self, t: T, x: [T; 2]) -> [[[T; 2]; 2]; 2] {
        let part = |idx: usize| {
            self.blend(t, x, |s| {
                &s.h.as_ref().expect("sampler built with hessians")[idx]
            })
        };
        let (h11_1, h12_1, h22_1) = (part(0), part(1), part(2));
        let (h11_2, h12_2, h22_2) = (part(3), part(4), part(5));
        [
            [[h11_1, h12_1], [h12_1, h22_1]],
            [[h11_2, h12_2], [h12_2, h22_2]],
        ]
    }
}
