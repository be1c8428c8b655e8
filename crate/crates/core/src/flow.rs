//! Particle trajectories and their seed gradients.
//!
//! Flow maps are integrated with classical RK4 from every grid node.
//! The first seed gradient rides along via the variational equation
//! dG/dt = (grad u) G, the optional second gradient via its analogue, and
//! the inverse flow is just backward time integration, so no pointwise map
//! inversion ever happens.

use rayon::prelude::*;

use crate::fields::{spectral_norm_2x2, Grid2D, ScalarField};
use crate::real::kahan_sum;
use crate::{Error, Real, Result};

/// Velocity field as a function of time and position, queryable anywhere.
/// Implementations must be cheap per point; the integrator calls these once
/// per node per RK stage. `hessian` is only queried when second gradients
/// are requested.
pub trait VelocitySampler<T: Real>: Sync {
    /// Closed interval of times on which the sampler is valid.
    fn time_range(&self) -> (T, T);
    fn velocity(&self, t: T, x: [T; 2]) -> [T; 2];
    /// `[i][j]` holds d u_{i+1} / d x_{j+1}.
    fn gradient(&self, t: T, x: [T; 2]) -> [[T; 2]; 2];
    /// `[i][j][k]` holds d_j d_k u_{i+1}.
    fn hessian(&self, t: T, x: [T; 2]) -> [[[T; 2]; 2]; 2];
}

type Mat2<T> = [[T; 2]; 2];
type Tens2<T> = [[[T; 2]; 2]; 2];

/// Particle positions seeded at the grid nodes at time t0, evolved to t1,
/// with seed gradients and Jacobian determinants.
#[derive(Clone, Debug)]
pub struct FlowMap<T> {
    grid: Grid2D<T>,
    t0: T,
    t1: T,
    positions: Vec<[T; 2]>,
    grad: Vec<Mat2<T>>,
    grad2: Option<Vec<Tens2<T>>>,
    jac: Vec<T>,
}

impl<T: Real> FlowMap<T> {
    pub fn grid(&self) -> Grid2D<T> {
        self.grid
    }

    pub fn t0(&self) -> T {
        self.t0
    }

    pub fn t1(&self) -> T {
        self.t1
    }

    pub fn positions(&self) -> &[[T; 2]] {
        &self.positions
    }

    pub fn grad(&self) -> &[Mat2<T>] {
        &self.grad
    }

    pub fn grad2(&self) -> Option<&[Tens2<T>]> {
        self.grad2.as_deref()
    }

    pub fn jac(&self) -> &[T] {
        &self.jac
    }

    /// Max over nodes of |det grad - 1|; zero for an exactly
    /// measure-preserving map.
    pub fn sup_jacobian_defect(&self) -> T {
        self.jac
            .iter()
            .fold(T::zero(), |acc, &d| acc.max((d - T::one()).abs()))
    }

    /// Rows `a1,a2,x1,x2,j11,j12,j21,j22,det`.
    pub fn write_csv(&self, out: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(out, "a1,a2,x1,x2,j11,j12,j21,j22,det")?;
        let n = self.grid.n();
        for idx in 0..self.positions.len() {
            let [a1, a2] = self.grid.node(idx / n, idx % n);
            let [x1, x2] = self.positions[idx];
            let g = self.grad[idx];
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                a1.as_f64(),
                a2.as_f64(),
                x1.as_f64(),
                x2.as_f64(),
                g[0][0].as_f64(),
                g[0][1].as_f64(),
                g[1][0].as_f64(),
                g[1][1].as_f64(),
                self.jac[idx].as_f64()
            )?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
struct NodeState<T> {
    x: [T; 2],
    g: Mat2<T>,
    h: Tens2<T>,
}

impl<T: Real> NodeState<T> {
    fn seed(x: [T; 2]) -> Self {
        let zero = T::zero();
        let one = T::one();
        NodeState {
            x,
            g: [[one, zero], [zero, one]],
            h: [[[zero; 2]; 2]; 2],
        }
    }

    fn add_scaled(&self, d: &NodeState<T>, c: T) -> Self {
        let mut out = *self;
        for i in 0..2 {
            out.x[i] = out.x[i] + c * d.x[i];
            for j in 0..2 {
                out.g[i][j] = out.g[i][j] + c * d.g[i][j];
                for l in 0..2 {
                    out.h[i][j][l] = out.h[i][j][l] + c * d.h[i][j][l];
                }
            }
        }
        out
    }
}

// index form mirrors the chain rule; iterators would bury it
#[allow(clippy::needless_range_loop)]
fn state_derivative<T: Real, S: VelocitySampler<T> + ?Sized>(
    sampler: &S,
    t: T,
    s: &NodeState<T>,
    with_second: bool,
) -> NodeState<T> {
    let u = sampler.velocity(t, s.x);
    let gu = sampler.gradient(t, s.x);
    let mut d = NodeState {
        x: u,
        g: [[T::zero(); 2]; 2],
        h: [[[T::zero(); 2]; 2]; 2],
    };
    for i in 0..2 {
        for j in 0..2 {
            d.g[i][j] = gu[i][0] * s.g[0][j] + gu[i][1] * s.g[1][j];
        }
    }
    if with_second {
        let hu = sampler.hessian(t, s.x);
        for i in 0..2 {
            for j in 0..2 {
                for l in 0..2 {
                    let mut acc = gu[i][0] * s.h[0][j][l] + gu[i][1] * s.h[1][j][l];
                    for k in 0..2 {
                        for m in 0..2 {
                            acc = acc + hu[i][k][m] * s.g[k][j] * s.g[m][l];
                        }
                    }
                    d.h[i][j][l] = acc;
                }
            }
        }
    }
    d
}

/// One trajectory, all steps. Err carries the last good time if the state
/// leaves the finite range.
fn integrate_node<T: Real, S: VelocitySampler<T> + ?Sized>(
    sampler: &S,
    seed: [T; 2],
    t0: T,
    h: T,
    steps: usize,
    with_second: bool,
) -> std::result::Result<NodeState<T>, T> {
    let mut s = NodeState::seed(seed);
    let half = T::of(0.5);
    let sixth = T::of(1.0 / 6.0);
    let two = T::of(2.0);
    for step in 0..steps {
        let t = t0 + h * T::of_usize(step);
        let k1 = state_derivative(sampler, t, &s, with_second);
        let k2 = state_derivative(sampler, t + h * half, &s.add_scaled(&k1, h * half), with_second);
        let k3 = state_derivative(sampler, t + h * half, &s.add_scaled(&k2, h * half), with_second);
        let k4 = state_derivative(sampler, t + h, &s.add_scaled(&k3, h), with_second);
        let incr = k1
            .add_scaled(&k2, two)
            .add_scaled(&k3, two)
            .add_scaled(&k4, T::one());
        // incr.x started from k1, so the scaling below is (k1+2k2+2k3+k4)/6
        s = s.add_scaled(&incr, h * sixth);
        if !(s.x[0].is_finite() && s.x[1].is_finite()) {
            return Err(t);
        }
    }
    Ok(s)
}

fn check_time_step<T: Real>(dt: T) -> Result<()> {
    if !dt.is_finite() || dt <= T::zero() {
        return Err(Error::Config(format!(
            "flow integration step must be positive, got {dt}"
        )));
    }
    Ok(())
}

fn check_range<T: Real, S: VelocitySampler<T> + ?Sized>(sampler: &S, t0: T, t1: T) -> Result<()> {
    let (lo, hi) = sampler.time_range();
    let slack = T::of(1e-12);
    if t0.min(t1) < lo - slack || t0.max(t1) > hi + slack {
        return Err(Error::Config(format!(
            "flow over [{}, {}] leaves the sampler's time range [{lo}, {hi}]",
            t0.min(t1),
            t0.max(t1)
        )));
    }
    Ok(())
}

fn step_count<T: Real>(t0: T, t1: T, dt: T) -> (T, usize) {
    let total = t1 - t0;
    if total == T::zero() {
        return (T::zero(), 0);
    }
    let steps = (total.abs() / dt).ceil().to_usize().unwrap_or(1).max(1);
    (total / T::of_usize(steps), steps)
}

/// Integrate the flow of the sampled velocity from every node of `grid`
/// over [t0, t1], carrying first (and optionally second) seed gradients.
/// t1 < t0 integrates backward and yields the inverse flow map.
pub fn advance_flow<T: Real, S: VelocitySampler<T> + ?Sized>(
    grid: Grid2D<T>,
    sampler: &S,
    t0: T,
    t1: T,
    dt: T,
    with_second_gradient: bool,
) -> Result<FlowMap<T>> {
    check_time_step(dt)?;
    check_range(sampler, t0, t1)?;
    let (h, steps) = step_count(t0, t1, dt);
    let n = grid.n();
    let seeds: Vec<[T; 2]> = (0..n * n).map(|idx| grid.node(idx / n, idx % n)).collect();
    let results: Vec<std::result::Result<NodeState<T>, T>> = seeds
        .par_iter()
        .map(|&seed| integrate_node(sampler, seed, t0, h, steps, with_second_gradient))
        .collect();
    let mut positions = Vec::with_capacity(n * n);
    let mut grad = Vec::with_capacity(n * n);
    let mut grad2 = with_second_gradient.then(|| Vec::with_capacity(n * n));
    let mut jac = Vec::with_capacity(n * n);
    let mut first_failure: Option<T> = None;
    for r in results {
        match r {
            Ok(s) => {
                positions.push(s.x);
                jac.push(s.g[0][0] * s.g[1][1] - s.g[0][1] * s.g[1][0]);
                grad.push(s.g);
                if let Some(v) = grad2.as_mut() {
                    v.push(s.h);
                }
            }
            Err(t) => {
                let worse = match first_failure {
                    Some(prev) => (t - t0).abs() < (prev - t0).abs(),
                    None => true,
                };
                if worse {
                    first_failure = Some(t);
                }
            }
        }
    }
    if let Some(t) = first_failure {
        return Err(Error::Unstable {
            last_good_time: t.as_f64(),
        });
    }
    Ok(FlowMap {
        grid,
        t0,
        t1,
        positions,
        grad,
        grad2,
        jac,
    })
}

/// Positions only, from arbitrary seed points. Used to continue
/// trajectories (e.g. a round trip) without re-seeding at grid nodes.
pub fn integrate_points<T: Real, S: VelocitySampler<T> + ?Sized>(
    sampler: &S,
    seeds: &[[T; 2]],
    t0: T,
    t1: T,
    dt: T,
) -> Result<Vec<[T; 2]>> {
    check_time_step(dt)?;
    check_range(sampler, t0, t1)?;
    let (h, steps) = step_count(t0, t1, dt);
    let results: Vec<std::result::Result<NodeState<T>, T>> = seeds
        .par_iter()
        .map(|&seed| integrate_node(sampler, seed, t0, h, steps, false))
        .collect();
    let mut out = Vec::with_capacity(seeds.len());
    for r in results {
        match r {
            Ok(s) => out.push(s.x),
            Err(t) => {
                return Err(Error::Unstable {
                    last_good_time: t.as_f64(),
                })
            }
        }
    }
    Ok(out)
}

/// omega(t, x) = omega0(X^{-t}(x)): interpolate the initial data at the
/// flow's arrival points. The flow should end at the time omega0 lives at.
pub fn transport_by_characteristics<T: Real>(
    omega0: &ScalarField<T>,
    inverse_flow: &FlowMap<T>,
) -> Result<ScalarField<T>> {
    omega0
        .grid()
        .ensure_same(&inverse_flow.grid(), "transport by characteristics")?;
    let values = omega0.sample(inverse_flow.positions());
    ScalarField::from_values(omega0.grid(), values)
}

/// (sup operator norm of grad X, L2 norm of the second gradient).
/// The second entry requires the flow to carry second gradients.
pub fn flow_gradient_bounds<T: Real>(flow: &FlowMap<T>) -> Result<(T, T)> {
    let sup_grad = flow
        .grad
        .iter()
        .fold(T::zero(), |acc, g| acc.max(spectral_norm_2x2(*g)));
    let h = flow.grad2().ok_or_else(|| {
        Error::Config("flow carries no second gradients; integrate with them enabled".into())
    })?;
    let cell = flow.grid.cell_area();
    let sq = kahan_sum(h.iter().map(|t| {
        t.iter()
            .flatten()
            .flatten()
            .fold(T::zero(), |acc, &v| acc + v * v)
    }));
    Ok((sup_grad, (sq * cell).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Still;

    impl VelocitySampler<f64> for Still {
        fn time_range(&self) -> (f64, f64) {
            (0.0, 1e9)
        }
        fn velocity(&self, _t: f64, _x: [f64; 2]) -> [f64; 2] {
            [0.0, 0.0]
        }
        fn gradient(&self, _t: f64, _x: [f64; 2]) -> [[f64; 2]; 2] {
            [[0.0, 0.0], [0.0, 0.0]]
        }
        fn hessian(&self, _t: f64, _x: [f64; 2]) -> [[[f64; 2]; 2]; 2] {
            [[[0.0; 2]; 2]; 2]
        }
    }

    /// u = x_perp: rigid rotation, X(t) = R(t) alpha.
    struct Rotation;

    impl VelocitySampler<f64> for Rotation {
        fn time_range(&self) -> (f64, f64) {
            (-1e9, 1e9)
        }
        fn velocity(&self, _t: f64, x: [f64; 2]) -> [f64; 2] {
            [-x[1], x[0]]
        }
        fn gradient(&self, _t: f64, _x: [f64; 2]) -> [[f64; 2]; 2] {
            [[0.0, -1.0], [1.0, 0.0]]
        }
        fn hessian(&self, _t: f64, _x: [f64; 2]) -> [[[f64; 2]; 2]; 2] {
            [[[0.0; 2]; 2]; 2]
        }
    }

    /// u = (sin(pi y), sin(pi x)): divergence free, steady, genuinely
    /// nonlinear in space. Periodic on [-1, 1)^2.
    struct Shear;

    impl VelocitySampler<f64> for Shear {
        fn time_range(&self) -> (f64, f64) {
            (0.0, 10.0)
        }
        fn velocity(&self, _t: f64, x: [f64; 2]) -> [f64; 2] {
            let p = std::f64::consts::PI;
            [(p * x[1]).sin(), (p * x[0]).sin()]
        }
        fn gradient(&self, _t: f64, x: [f64; 2]) -> [[f64; 2]; 2] {
            let p = std::f64::consts::PI;
            [[0.0, p * (p * x[1]).cos()], [p * (p * x[0]).cos(), 0.0]]
        }
        fn hessian(&self, _t: f64, x: [f64; 2]) -> [[[f64; 2]; 2]; 2] {
            let p = std::f64::consts::PI;
            let mut h = [[[0.0; 2]; 2]; 2];
            h[0][1][1] = -p * p * (p * x[1]).sin();
            h[1][0][0] = -p * p * (p * x[0]).sin();
            h
        }
    }

    fn grid(n: usize, l: f64) -> Grid2D<f64> {
        Grid2D::new(n, l).unwrap()
    }

    #[test]
    fn still_flow_is_the_identity() {
        let g = grid(16, 1.0);
        let flow = advance_flow(g, &Still, 0.0, 1.0, 1e-2, true).unwrap();
        for idx in 0..g.node_count() {
            let node = g.node(idx / 16, idx % 16);
            assert_eq!(flow.positions()[idx], node);
            assert_eq!(flow.jac()[idx], 1.0);
        }
        let (sup, l2h) = flow_gradient_bounds(&flow).unwrap();
        assert_eq!(sup, 1.0);
        assert_eq!(l2h, 0.0);
        assert_eq!(flow.sup_jacobian_defect(), 0.0);
    }

    #[test]
    fn rigid_rotation_reproduces_the_closed_form() {
        let g = grid(16, 1.0);
        let t = std::f64::consts::FRAC_PI_4;
        let flow = advance_flow(g, &Rotation, 0.0, t, 1e-3, false).unwrap();
        let (c, s) = (t.cos(), t.sin());
        let mut worst: f64 = 0.0;
        for idx in 0..g.node_count() {
            let [a1, a2] = g.node(idx / 16, idx % 16);
            let [x1, x2] = flow.positions()[idx];
            worst = worst.max((x1 - (c * a1 - s * a2)).abs());
            worst = worst.max((x2 - (s * a1 + c * a2)).abs());
            // grad X is the rotation matrix itself
            let gm = flow.grad()[idx];
            worst = worst.max((gm[0][0] - c).abs().max((gm[0][1] + s).abs()));
        }
        assert!(worst <= 1e-8, "closed-form error {worst}");
        assert!(flow.sup_jacobian_defect() <= 1e-10);
        let (sup, _) = flow_gradient_bounds(
            &advance_flow(g, &Rotation, 0.0, t, 1e-3, true).unwrap(),
        )
        .unwrap();
        assert!((sup - 1.0).abs() <= 1e-10, "rotations are isometries");
    }

    #[test]
    fn forward_then_backward_returns_to_the_seeds() {
        let g = grid(16, 1.0);
        let flow = advance_flow(g, &Shear, 0.0, 0.4, 1e-3, false).unwrap();
        let back = integrate_points(&Shear, flow.positions(), 0.4, 0.0, 1e-3).unwrap();
        let mut worst: f64 = 0.0;
        for (idx, b) in back.iter().enumerate() {
            let a = g.node(idx / 16, idx % 16);
            worst = worst.max((b[0] - a[0]).abs().max((b[1] - a[1]).abs()));
        }
        assert!(worst <= 1e-6, "round trip error {worst}");
    }

    #[test]
    fn variational_gradient_matches_finite_differences() {
        let n = 64;
        let g = grid(n, 1.0);
        let flow = advance_flow(g, &Shear, 0.0, 0.3, 1e-3, true).unwrap();
        let dx = g.dx();
        let mut worst_g: f64 = 0.0;
        let mut worst_h: f64 = 0.0;
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                for k in 0..2 {
                    // d X_k / d alpha_1 against the i +/- 1 neighbors
                    let fd =
                        (flow.positions()[g.idx(i + 1, j)][k] - flow.positions()[g.idx(i - 1, j)][k])
                            / (2.0 * dx);
                    worst_g = worst_g.max((flow.grad()[g.idx(i, j)][k][0] - fd).abs());
                    let fdh = (flow.grad()[g.idx(i + 1, j)][k][0]
                        - flow.grad()[g.idx(i - 1, j)][k][0])
                        / (2.0 * dx);
                    worst_h =
                        worst_h.max((flow.grad2().unwrap()[g.idx(i, j)][k][0][0] - fdh).abs());
                }
            }
        }
        assert!(worst_g <= 1e-2, "gradient vs FD: {worst_g}");
        assert!(worst_h <= 5e-2, "second gradient vs FD: {worst_h}");
    }

    #[test]
    fn nonlinear_flow_preserves_measure_and_gronwall_structure() {
        let g = grid(32, 1.0);
        let t = 0.5;
        let flow = advance_flow(g, &Shear, 0.0, t, 1e-3, false).unwrap();
        assert!(flow.sup_jacobian_defect() <= 1e-8, "defect {}", flow.sup_jacobian_defect());
        // sup grad X <= exp(int ||grad u||): steady field, sup norm pi
        let sup = flow
            .grad()
            .iter()
            .fold(0.0_f64, |acc, m| acc.max(spectral_norm_2x2(*m)));
        assert!(sup <= (std::f64::consts::PI * t).exp());
        assert!(sup > 1.0, "shear must actually deform");
    }

    #[test]
    fn transport_through_identity_flow_is_exact() {
        let g = grid(32, 1.0);
        let w = ScalarField::from_fn(g, |[x, y]| (std::f64::consts::PI * (x + 2.0 * y)).sin());
        let flow = advance_flow(g, &Still, 1.0, 0.0, 1e-2, false).unwrap();
        let moved = transport_by_characteristics(&w, &flow).unwrap();
        assert!(moved.try_sub(&w).unwrap().sup_abs() <= 1e-12);
    }

    #[test]
    fn radial_data_is_steady_under_its_own_rotation() {
        // The Gaussian vortex turns each circle rigidly; transporting the
        // radial profile along the induced flow must return the profile.
        struct Vortex;
        impl VelocitySampler<f64> for Vortex {
            fn time_range(&self) -> (f64, f64) {
                (0.0, 2.0)
            }
            fn velocity(&self, _t: f64, x: [f64; 2]) -> [f64; 2] {
                let r2 = x[0] * x[0] + x[1] * x[1];
                let a = if r2 < 1e-24 {
                    0.5
                } else {
                    (1.0 - (-r2).exp()) / (2.0 * r2)
                };
                [-a * x[1], a * x[0]]
            }
            fn gradient(&self, _t: f64, x: [f64; 2]) -> [[f64; 2]; 2] {
                let r2 = x[0] * x[0] + x[1] * x[1];
                let (a, da_dr2) = if r2 < 1e-12 {
                    (0.5, -0.25)
                } else {
                    let e = (-r2).exp();
                    ((1.0 - e) / (2.0 * r2), (e * (1.0 + r2) - 1.0) / (2.0 * r2 * r2))
                };
                // u = a(r^2) x_perp; d_j u_i = a J_ij + 2 da/dr2 x_j xperp_i
                let xp = [-x[1], x[0]];
                let mut m = [[0.0, -a], [a, 0.0]];
                for i in 0..2 {
                    for j in 0..2 {
                        m[i][j] += 2.0 * da_dr2 * xp[i] * x[j];
                    }
                }
                m
            }
            fn hessian(&self, _t: f64, _x: [f64; 2]) -> [[[f64; 2]; 2]; 2] {
                [[[0.0; 2]; 2]; 2]
            }
        }
        let g = grid(128, 2.0 * std::f64::consts::PI);
        let w0 = ScalarField::from_fn(g, |[x, y]| (-(x * x + y * y)).exp());
        let inverse = advance_flow(g, &Vortex, 1.0, 0.0, 2e-3, false).unwrap();
        let w1 = transport_by_characteristics(&w0, &inverse).unwrap();
        let rel = crate::norms::l1_norm(&w1.try_sub(&w0).unwrap()) / crate::norms::l1_norm(&w0);
        assert!(rel <= 1e-4, "radial drift {rel}");
        // L^p conservation through the measure-preserving map
        for p in [1.0, 2.0] {
            let a = crate::rearrange::lorentz_norm(&w1, p, p).unwrap();
            let b = crate::rearrange::lorentz_norm(&w0, p, p).unwrap();
            assert!((a - b).abs() / b <= 1e-3, "L^{p} drift");
        }
    }

    #[test]
    fn validation_of_step_range_and_gradient_availability() {
        let g = grid(16, 1.0);
        assert!(advance_flow(g, &Shear, 0.0, 0.1, 0.0, false).is_err());
        assert!(advance_flow(g, &Shear, 0.0, 0.1, -0.1, false).is_err());
        assert!(advance_flow(g, &Shear, -1.0, 0.1, 1e-2, false).is_err());
        assert!(advance_flow(g, &Shear, 0.0, 11.0, 1e-2, false).is_err());
        let without = advance_flow(g, &Shear, 0.0, 0.1, 1e-2, false).unwrap();
        assert!(flow_gradient_bounds(&without).is_err());
        let mismatched = ScalarField::zeros(grid(32, 1.0));
        assert!(matches!(
            transport_by_characteristics(&mismatched, &without),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn csv_export_shape() {
        let g = grid(16, 1.0);
        let flow = advance_flow(g, &Rotation, 0.0, 0.1, 1e-2, false).unwrap();
        let mut buf = Vec::new();
        flow.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "a1,a2,x1,x2,j11,j12,j21,j22,det");
        assert_eq!(lines.count(), 256);
    }
}
