//! Critical points of the action: the scalar ground state by radial
//! shooting, and the mountain-pass solution with charge by path descent
//! followed by Newton's method.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrete::Discretization;
use crate::error::{Error, Result};
use crate::field::{read_profile, FieldState, RadialGrid};
use crate::functional::{dtheta, energy, extended_energy, verify, VerificationReport};
use crate::greens::{xi, Dimension, GreenKernel, InteractionStrength};
use crate::linalg::{BorderedLu, BorderedMatrix};
use crate::nonlinearity::{Nonlinearity, NonlinearitySpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedProfile {
    Bump,
    ScalarGroundState,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub path_knots: usize,
    /// Initial step of the Riesz steepest descent; adapted during the run.
    pub descent_step: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub newton_tol: f64,
    /// Path descent hands over to Newton once the maximizer's gradient norm drops below this.
    pub descent_tol: f64,
    /// Hand over to Newton once the best maximizer gradient norm has not improved for this many iterations.
    pub stall_iters: usize,
    pub max_newton_iters: usize,
    #[serde(rename = "dilation_T")]
    pub dilation_t: f64,
    /// Largest dilation tried when looking for a negative-energy endpoint.
    pub dilation_cap: f64,
    pub seed_profile: SeedProfile,
    pub theta_mode: bool,
    /// Charge added at mid-path, tapered by `sin(πk/K)`.
    pub q_amplitude: f64,
    /// Keep `q = 0` throughout (scalar problem).
    pub freeze_charge: bool,
    /// Knots are redistributed to equal `H¹_{α,λ}` arclength every this many iterations.
    pub reparam_every: usize,
    /// Overrides the default spectral shift `max(ω, 1.01 ω_α)`.
    pub lambda: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            path_knots: 32,
            descent_step: 0.5,
            max_iters: 3000,
            grad_tol: 1e-8,
            newton_tol: 1e-10,
            descent_tol: 1e-3,
            stall_iters: 300,
            max_newton_iters: 30,
            dilation_t: 4.0,
            dilation_cap: 256.0,
            seed_profile: SeedProfile::Bump,
            theta_mode: false,
            q_amplitude: 0.1,
            freeze_charge: false,
            reparam_every: 5,
            lambda: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.path_knots < 16 {
            return bad(format!("path_knots must be at least 16, got {}", self.path_knots));
        }
        for (name, v) in [
            ("descent_step", self.descent_step),
            ("grad_tol", self.grad_tol),
            ("newton_tol", self.newton_tol),
            ("descent_tol", self.descent_tol),
            ("dilation_T", self.dilation_t),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.dilation_cap < self.dilation_t {
            return bad(format!("dilation_cap {} is below dilation_T {}", self.dilation_cap, self.dilation_t));
        }
        if self.stall_iters == 0 {
            return bad("stall_iters must be at least 1".into());
        }
        if self.reparam_every == 0 {
            return bad("reparam_every must be at least 1".into());
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0) {
                return bad(format!("lambda must be positive, got {l}"));
            }
        }
        Ok(())
    }
}

/// `max(ω, 1.01 ω_α)` unless overridden.
pub fn target_lambda(spec: &NonlinearitySpec, strength: &InteractionStrength, config: &SolverConfig) -> f64 {
    config.lambda.unwrap_or_else(|| spec.omega.max(1.01 * strength.omega_alpha()))
}

/// `target_lambda`, snapped to the grid's reference shift when they agree to
/// rounding, which makes `G_λ - G_ref` vanish identically.
pub fn solve_lambda(spec: &NonlinearitySpec, strength: &InteractionStrength, config: &SolverConfig, grid: &RadialGrid) -> f64 {
    let lambda = target_lambda(spec, strength, config);
    let lref = grid.reference_lambda();
    if (lambda - lref).abs() <= 1e-12 * lambda {
        lref
    } else {
        lambda
    }
}

/// Whether a 3D weak solution is known to solve the original problem
/// (`p < 5/2`) or only the weak formulation (`5/2 <= p < 3`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularityRegime {
    Strong,
    WeakOnly,
}

pub fn regularity_regime(dim: Dimension, p: f64) -> RegularityRegime {
    match dim {
        Dimension::Three if p >= 2.5 => RegularityRegime::WeakOnly,
        _ => RegularityRegime::Strong,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub sigma: f64,
    pub gradient_norm: f64,
    pub charge: f64,
    /// Mean knot spacing in the `H¹_{α,λ}` metric; slides and reparametrizations move
    /// the maximizer by at most about this much, which bounds any rise of `sigma`.
    pub spacing: f64,
}

pub fn write_trace(path: &Path, trace: &[TraceRecord]) -> Result<()> {
    let mut out = String::from("iteration,sigma,gradient_norm,q\n");
    for t in trace {
        writeln!(out, "{},{:e},{:e},{:e}", t.iteration, t.sigma, t.gradient_norm, t.charge).expect("writing to a String");
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub state: FieldState,
    pub sigma_estimate: f64,
    pub m0_estimate: Option<f64>,
    pub report: VerificationReport,
    pub iterations: usize,
    pub newton_history: Vec<f64>,
    pub converged: bool,
    pub trace: Vec<TraceRecord>,
    pub regime: RegularityRegime,
}

// ---------------------------------------------------------------------------
// Scalar ground state

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shot {
    /// `u` crossed zero.
    Over,
    /// `u'` turned positive while `u > 0`.
    Under,
    /// Reached the end of the grid.
    Undecided,
}

/// Integrates `u'' + (N-1)/r u' + g(u) = 0`, `u(0) = a`, `u'(0) = 0` node to
/// node with RK4 substeps. Returns the nodal values reached and the outcome.
fn shoot(nl: &dyn Nonlinearity, dim: Dimension, nodes: &[f64], a: f64, h_max: f64) -> (Vec<f64>, Shot) {
    let n = dim.as_f64();
    let rhs = |r: f64, u: f64, v: f64| -> (f64, f64) {
        let acc = if r == 0.0 { -nl.g_real(u) / n } else { -(n - 1.0) / r * v - nl.g_real(u) };
        (v, acc)
    };
    let mut u = a;
    let mut v = 0.0;
    let mut out = vec![a];
    for w in nodes.windows(2) {
        let steps = ((w[1] - w[0]) / h_max).ceil().max(1.0) as usize;
        let h = (w[1] - w[0]) / steps as f64;
        for s in 0..steps {
            let r = w[0] + s as f64 * h;
            let (k1u, k1v) = rhs(r, u, v);
            let (k2u, k2v) = rhs(r + 0.5 * h, u + 0.5 * h * k1u, v + 0.5 * h * k1v);
            let (k3u, k3v) = rhs(r + 0.5 * h, u + 0.5 * h * k2u, v + 0.5 * h * k2v);
            let (k4u, k4v) = rhs(r + h, u + h * k3u, v + h * k3v);
            u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
            v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            if u < 0.0 {
                return (out, Shot::Over);
            }
            if v > 0.0 {
                return (out, Shot::Under);
            }
        }
        out.push(u);
    }
    (out, Shot::Undecided)
}

/// First positive zero of `G`, i.e. the smallest admissible central value.
fn primitive_zero(spec: &NonlinearitySpec) -> Result<f64> {
    let mut lo = 1e-8;
    while spec.big_g(lo) <= 0.0 {
        lo *= 1.5;
        if lo > 1e12 {
            return Err(Error::Nonlinearity("G stays nonpositive; no ground state".into()));
        }
    }
    let mut a = lo / 1.5;
    let mut b = lo;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if spec.big_g(m) > 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    Ok(b)
}

/// Positive radial ground state of `-Δu = g(u)` on `grid` and its energy
/// `m₀ = ½‖∇u‖² - ∫G(u)`. Shooting fixes the profile up to the point where
/// the bracketing trajectories separate; beyond it the decaying linear
/// solution `∝ G_ω` is used, and Newton's method (with `q = 0`) makes the
/// profile an exact critical point of the discrete functional.
pub fn scalar_ground_state(spec: &NonlinearitySpec, dim: Dimension, grid: Arc<RadialGrid>) -> Result<(FieldState, f64)> {
    if grid.dim() != dim {
        return Err(Error::GridMismatch);
    }
    let nodes = grid.nodes().to_vec();
    let h_max = 0.01 / spec.omega.sqrt();
    let zeta = primitive_zero(spec)?;
    let mut trace = Vec::new();
    let mut hi = 2.0 * zeta;
    loop {
        let (_, shot) = shoot(spec, dim, &nodes, hi, h_max);
        trace.push((hi, format!("{shot:?}")));
        if shot == Shot::Over {
            break;
        }
        hi *= 2.0;
        if hi > zeta * 2f64.powi(40) {
            return Err(Error::Shooting { message: "no overshooting central value found".into(), trace });
        }
    }
    let mut lo = zeta;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match shoot(spec, dim, &nodes, mid, h_max).1 {
            Shot::Over => hi = mid,
            _ => lo = mid,
        }
    }
    let (u_lo, _) = shoot(spec, dim, &nodes, lo, h_max);
    let (u_hi, _) = shoot(spec, dim, &nodes, hi, h_max);
    let common = u_lo.len().min(u_hi.len());
    let cut = (1..common)
        .find(|&i| (u_lo[i] - u_hi[i]).abs() > 1e-3 * u_lo[i].abs())
        .unwrap_or(common)
        .saturating_sub(1)
        .max(1);
    let tail = GreenKernel::new(dim, spec.omega)?;
    let rc = nodes[cut];
    let profile: Vec<f64> = nodes
        .iter()
        .enumerate()
        .map(|(i, &r)| if i <= cut { u_lo[i] } else { u_lo[cut] * tail.eval(r) / tail.eval(rc) })
        .collect();
    let lambda = grid.reference_lambda();
    let start = FieldState::new(
        grid,
        lambda,
        Complex64::new(0.0, 0.0),
        profile.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
    )?;
    let strength = InteractionStrength::new(0.0, dim);
    let config = SolverConfig { freeze_charge: true, ..SolverConfig::default() };
    let refined = newton_refine(&start, spec, &strength, &config)?.state;
    let m0 = energy(&refined, spec, &strength)?.total;
    Ok((refined, m0))
}

// ---------------------------------------------------------------------------
// Newton

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub state: FieldState,
    /// Dual gradient norm before each iteration and at the end.
    pub history: Vec<f64>,
}

/// Removes the charge unknown from a bordered system (`q` held fixed).
fn decouple(m: &mut BorderedMatrix) {
    m.col.iter_mut().for_each(|v| *v = 0.0);
    m.row.iter_mut().for_each(|v| *v = 0.0);
    m.corner = 1.0;
}

struct Metric {
    disc: Discretization,
    gram_matrix: BorderedMatrix,
    gram: BorderedLu,
    freeze: bool,
}

impl Metric {
    fn new(disc: Discretization, freeze: bool) -> Result<Self> {
        let mut g = disc.gram();
        if freeze {
            decouple(&mut g);
        }
        Ok(Self { gram: g.clone().factor()?, gram_matrix: g, disc, freeze })
    }

    /// Real gradient in coordinates (charge component dropped when frozen).
    fn gradient(&self, x: &[f64], nl: &dyn Nonlinearity) -> Result<Vec<f64>> {
        let st = self.disc.real_state(x)?;
        let mut f: Vec<f64> = self.disc.gradient(&st, nl)?.iter().map(|z| z.re).collect();
        if self.freeze {
            *f.last_mut().expect("nonempty") = 0.0;
        }
        Ok(f)
    }

    /// `(A⁻¹F, sqrt(F·A⁻¹F))`.
    fn riesz(&self, f: &[f64]) -> (Vec<f64>, f64) {
        let r = self.gram.solve(f);
        let n = f.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt();
        (r, n)
    }

    fn norm(&self, x: &[f64]) -> f64 {
        let ax = self.gram_matrix.matvec(x);
        x.iter().zip(&ax).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt()
    }
}

/// Damped Newton on the weak Euler-Lagrange system in `(φ, q)`, with the
/// dual gradient norm as merit function. The state must be real.
pub fn newton_refine(
    state: &FieldState,
    nl: &dyn Nonlinearity,
    strength: &InteractionStrength,
    config: &SolverConfig,
) -> Result<NewtonOutcome> {
    if !state.is_real() {
        return Err(Error::Domain("newton_refine needs a gauge-fixed real state".into()));
    }
    let metric = Metric::new(Discretization::for_state(state, strength)?, config.freeze_charge)?;
    let disc = &metric.disc;
    let mut x: Vec<f64> = disc.coordinates(state)?.iter().map(|z| z.re).collect();
    let mut f = metric.gradient(&x, nl)?;
    let mut norm = metric.riesz(&f).1;
    let mut history = vec![norm];
    for _ in 0..config.max_newton_iters {
        if norm <= config.newton_tol {
            return Ok(NewtonOutcome { state: disc.real_state(&x)?, history });
        }
        let mut h = disc.hessian(&disc.real_state(&x)?, nl)?;
        if metric.freeze {
            decouple(&mut h);
        }
        let neg: Vec<f64> = f.iter().map(|v| -v).collect();
        let step = h.factor().map_err(|_| Error::Newton { message: "singular Jacobian".into(), history: history.clone() })?.solve(&neg);
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + t * b).collect();
            let ft = metric.gradient(&trial, nl)?;
            let nt = metric.riesz(&ft).1;
            if nt < (1.0 - 1e-4 * t) * norm {
                x = trial;
                f = ft;
                norm = nt;
                break;
            }
            t *= 0.5;
            if t < 1e-6 {
                if norm <= config.grad_tol {
                    // Stagnation at round-off below the acceptance tolerance.
                    return Ok(NewtonOutcome { state: disc.real_state(&x)?, history });
                }
                return Err(Error::Newton { message: "line search failed".into(), history });
            }
        }
        history.push(norm);
    }
    if norm <= config.newton_tol || norm <= config.grad_tol {
        Ok(NewtonOutcome { state: disc.real_state(&x)?, history })
    } else {
        Err(Error::Newton { message: format!("no convergence in {} iterations", config.max_newton_iters), history })
    }
}

// ---------------------------------------------------------------------------
// Mountain pass

fn bump_seed(spec: &NonlinearitySpec, grid: &Arc<RadialGrid>, lambda: f64) -> Result<FieldState> {
    let amp = 2.0 * primitive_zero(spec)?;
    let width = 2.0 / spec.omega.sqrt();
    FieldState::from_real_profile(grid.clone(), lambda, 0.0, |r| amp * (-(r / width).powi(2)).exp())
}

fn seed_state(
    spec: &NonlinearitySpec,
    strength: &InteractionStrength,
    grid: &Arc<RadialGrid>,
    lambda: f64,
    config: &SolverConfig,
) -> Result<(FieldState, Option<f64>)> {
    let (w, m0) = match &config.seed_profile {
        SeedProfile::Bump => (bump_seed(spec, grid, lambda)?, None),
        SeedProfile::ScalarGroundState => {
            let (w, m0) = scalar_ground_state(spec, strength.dim, grid.clone())?;
            (w.change_lambda(lambda)?, Some(m0))
        }
        SeedProfile::File(path) => (read_profile(path)?.change_lambda(lambda)?.resample(grid.clone())?, None),
    };
    // With I(w) < 0 (so ∫G(w) > 0) the dilation T = dilation_T already
    // gives a negative endpoint, and z stays well inside the grid.
    let mut w = w;
    for _ in 0..80 {
        if energy(&w, spec, strength)?.total < 0.0 {
            return Ok((w, m0));
        }
        w = w.scale(Complex64::new(1.25, 0.0));
    }
    Err(Error::EndpointNotFound { t_max: config.dilation_cap })
}

/// Knots `(k/K) z` with `z = w(·/T)` of negative energy, plus the charge bump
/// `q_amplitude · sin(πk/K)` on the interior knots.
pub fn initial_path(
    spec: &NonlinearitySpec,
    strength: &InteractionStrength,
    grid: Arc<RadialGrid>,
    config: &SolverConfig,
) -> Result<Vec<FieldState>> {
    let lambda = solve_lambda(spec, strength, config, &grid);
    let (w, _) = seed_state(spec, strength, &grid, lambda, config)?;
    Ok(path_from_seed(spec, strength, &grid, lambda, &w, config)?.0)
}

fn path_from_seed(
    spec: &NonlinearitySpec,
    strength: &InteractionStrength,
    grid: &Arc<RadialGrid>,
    lambda: f64,
    w: &FieldState,
    config: &SolverConfig,
) -> Result<(Vec<FieldState>, f64)> {
    let mut t = config.dilation_t;
    let z = loop {
        let z = w.dilate_onto(t, grid.clone(), lambda)?;
        if energy(&z, spec, strength)?.total < 0.0 {
            break z;
        }
        t *= 2.0;
        if t > config.dilation_cap {
            return Err(Error::EndpointNotFound { t_max: config.dilation_cap });
        }
    };
    let k_max = config.path_knots;
    let q_amp = if config.freeze_charge { 0.0 } else { config.q_amplitude };
    let knots = (0..=k_max)
        .map(|k| {
            let s = k as f64 / k_max as f64;
            let mut knot = z.scale(Complex64::new(s, 0.0));
            if k > 0 && k < k_max && q_amp != 0.0 {
                let bump = q_amp * (std::f64::consts::PI * s).sin();
                let mut x: Vec<f64> = knot.reference_profile().iter().map(|c| c.re).collect();
                x.push(knot.charge().re + bump);
                let n = x.len() - 1;
                knot = FieldState::from_reference_profile(
                    grid.clone(),
                    lambda,
                    Complex64::new(x[n], 0.0),
                    &x[..n].iter().map(|&v| Complex64::new(v, 0.0)).collect::<Vec<_>>(),
                )?;
            }
            Ok(knot)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((knots, t))
}

/// A path knot in coordinates, with its dilation parameter in θ-mode.
#[derive(Debug, Clone)]
struct Knot {
    x: Vec<f64>,
    theta: f64,
    energy: f64,
}

struct Zero;

impl Nonlinearity for Zero {
    fn g(&self, _: f64) -> f64 {
        0.0
    }
    fn dg(&self, _: f64) -> f64 {
        0.0
    }
    fn big_g(&self, _: f64) -> f64 {
        0.0
    }
}

struct PathProblem<'a> {
    spec: &'a NonlinearitySpec,
    strength: &'a InteractionStrength,
    metric: Metric,
    theta_mode: bool,
    /// Squared length of a unit θ-step: the dilation generator has norm comparable to `‖u‖`.
    theta_weight: f64,
}

impl PathProblem<'_> {
    fn energy(&self, x: &[f64], theta: f64) -> Result<f64> {
        let st = self.metric.disc.real_state(x)?;
        if self.theta_mode {
            extended_energy(theta, &st, self.spec, self.strength)
        } else {
            Ok(energy(&st, self.spec, self.strength)?.total)
        }
    }

    /// Gradient in `x` of the knot energy, and `∂_θ J` in θ-mode.
    fn gradient(&self, x: &[f64], theta: f64) -> Result<(Vec<f64>, f64)> {
        if !self.theta_mode {
            return Ok((self.metric.gradient(x, self.spec)?, 0.0));
        }
        // J(θ,u) = e^{(N-2)θ} Q(u) + e^{2(N-2)θ} ½(α+ξ_θ)q² - e^{Nθ} P(u).
        let st = self.metric.disc.real_state(x)?;
        let full = self.metric.gradient(x, self.spec)?;
        let free = self.metric.gradient(x, &Zero)?;
        let n = self.strength.dim.as_f64();
        let lambda = self.metric.disc.lambda();
        let coef = self.metric.disc.charge_coefficient();
        let coef_t = self.strength.alpha + xi(self.strength.dim, (-2.0 * theta).exp() * lambda)?;
        let (a, c) = (((n - 2.0) * theta).exp(), (n * theta).exp());
        let q = st.charge().re;
        let last = full.len() - 1;
        let g = (0..full.len())
            .map(|i| {
                let charge = if i == last { coef * q } else { 0.0 };
                let charge_t = if i == last { a * a * coef_t * q } else { 0.0 };
                a * (free[i] - charge) + charge_t - c * (free[i] - full[i])
            })
            .collect();
        Ok((g, dtheta(theta, &st, self.spec, self.strength)?))
    }

    /// Moves knot `m` to the highest point of the polyline through its
    /// neighbours (golden section on the side that rises), so that it sits
    /// on the ridge rather than beside it.
    fn slide_to_local_max(&self, knots: &mut [Knot], m: usize) -> Result<()> {
        let at = |side: usize, s: f64| -> (Vec<f64>, f64) {
            let (a, b) = (&knots[m], &knots[side]);
            (a.x.iter().zip(&b.x).map(|(u, v)| u + s * (v - u)).collect(), a.theta + s * (b.theta - a.theta))
        };
        let eval = |side: usize, s: f64| -> f64 {
            let (x, t) = at(side, s);
            self.energy(&x, t).unwrap_or(f64::NEG_INFINITY)
        };
        let e0 = knots[m].energy;
        let (left, right) = (eval(m - 1, 0.5), eval(m + 1, 0.5));
        if left <= e0 && right <= e0 {
            return Ok(());
        }
        let side = if left > right { m - 1 } else { m + 1 };
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (0.0, 1.0);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (eval(side, c), eval(side, d));
        for _ in 0..16 {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = eval(side, c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = eval(side, d);
            }
        }
        let s = 0.5 * (a + b);
        let (x, theta) = at(side, s);
        let energy = self.energy(&x, theta)?;
        if energy > e0 {
            knots[m] = Knot { x, theta, energy };
        }
        Ok(())
    }

    fn segments(&self, knots: &[Knot]) -> Vec<f64> {
        knots
            .windows(2)
            .map(|w| {
                let d: Vec<f64> = w[1].x.iter().zip(&w[0].x).map(|(a, b)| a - b).collect();
                (self.metric.norm(&d).powi(2) + self.theta_weight * (w[1].theta - w[0].theta).powi(2)).sqrt()
            })
            .collect()
    }

    fn path_length(&self, knots: &[Knot]) -> f64 {
        self.segments(knots).iter().sum()
    }

    /// Redistributes interior knots to equal arclength in the `H¹_{α,λ}` metric
    /// along the path up to its first negative-energy knot past the maximum,
    /// which becomes the new endpoint (the path stays admissible).
    fn reparametrize(&self, knots: &mut [Knot]) -> Result<()> {
        let m = path_max(knots);
        let k_max = knots.len() - 1;
        let end = (m + 1..=k_max).find(|&k| knots[k].energy < 0.0).unwrap_or(k_max);
        if end < k_max {
            let tail = knots[end].clone();
            for k in knots.iter_mut().skip(end + 1) {
                *k = tail.clone();
            }
        }
        let seg = self.segments(knots);
        let total: f64 = seg.iter().sum();
        if !(total > 0.0) {
            return Ok(());
        }
        let mut cum = vec![0.0];
        for s in &seg {
            cum.push(cum.last().expect("nonempty") + s);
        }
        let old = knots.to_vec();
        for (k, knot) in knots.iter_mut().enumerate().take(k_max).skip(1) {
            let target = total * k as f64 / k_max as f64;
            let i = cum.partition_point(|&c| c <= target).clamp(1, k_max) - 1;
            let s = if seg[i] > 0.0 { (target - cum[i]) / seg[i] } else { 0.0 };
            knot.x = old[i].x.iter().zip(&old[i + 1].x).map(|(a, b)| a + s * (b - a)).collect();
            knot.theta = old[i].theta + s * (old[i + 1].theta - old[i].theta);
        }
        let energies: Vec<f64> = knots[1..k_max]
            .par_iter()
            .map(|k| self.energy(&k.x, k.theta))
            .collect::<Result<_>>()?;
        for (k, e) in knots[1..k_max].iter_mut().zip(energies) {
            k.energy = e;
        }
        Ok(())
    }
}

/// Mountain-pass solution on `grid`: path descent from `initial_path`
/// followed by Newton refinement. Non-convergence is reported through
/// `converged = false` with the best state found.
pub fn mountain_pass(
    spec: &NonlinearitySpec,
    strength: &InteractionStrength,
    grid: Arc<RadialGrid>,
    config: &SolverConfig,
) -> Result<SolveResult> {
    config.validate()?;
    let lambda = solve_lambda(spec, strength, config, &grid);
    let omega_alpha = strength.omega_alpha();
    if !(lambda > omega_alpha) {
        return Err(Error::NotCoercive { lambda, omega_alpha });
    }
    let (w, mut m0) = seed_state(spec, strength, &grid, lambda, config)?;
    let (path, _) = path_from_seed(spec, strength, &grid, lambda, &w, config)?;
    let disc = Discretization::new(grid.clone(), lambda, strength)?;
    let metric = Metric::new(disc, config.freeze_charge)?;
    let end: Vec<f64> = metric.disc.coordinates(path.last().expect("nonempty"))?.iter().map(|z| z.re).collect();
    let theta_weight = metric.norm(&end).powi(2).max(1.0);
    let problem = PathProblem { spec, strength, metric, theta_mode: config.theta_mode, theta_weight };
    let mut knots: Vec<Knot> = path
        .par_iter()
        .map(|st| {
            let x: Vec<f64> = problem.metric.disc.coordinates(st)?.iter().map(|z| z.re).collect();
            let energy = problem.energy(&x, 0.0)?;
            Ok(Knot { x, theta: 0.0, energy })
        })
        .collect::<Result<_>>()?;

    let mut trace = Vec::new();
    let mut base_step = config.descent_step;
    let mut iterations = 0;
    let k_max = knots.len() - 1;
    // The maximizer with the smallest gradient norm seen so far starts Newton.
    let mut best_knot: Option<(f64, Knot)> = None;
    let mut since_best = 0;
    for it in 0..config.max_iters {
        iterations = it + 1;
        if it > 0 && it % config.reparam_every == 0 {
            problem.reparametrize(&mut knots)?;
        }
        let m = path_max(&knots);
        problem.slide_to_local_max(&mut knots, m)?;
        let sigma = knots[m].energy;
        let (f, ft) = problem.gradient(&knots[m].x, knots[m].theta)?;
        let (r, gnorm) = problem.metric.riesz(&f);
        let gnorm_total = (gnorm * gnorm + ft * ft / problem.theta_weight).sqrt();
        let spacing = problem.path_length(&knots) / k_max as f64;
        trace.push(TraceRecord {
            iteration: it,
            sigma,
            gradient_norm: gnorm_total,
            charge: *knots[m].x.last().expect("nonempty"),
            spacing,
        });
        if best_knot.as_ref().is_none_or(|(g, _)| gnorm_total < *g) {
            best_knot = Some((gnorm_total, knots[m].clone()));
            since_best = 0;
        } else {
            since_best += 1;
        }
        if gnorm_total <= config.descent_tol || since_best >= config.stall_iters {
            break;
        }
        // A move longer than half a mean segment could jump across the ridge.
        let reach = 0.5 * spacing;
        let mut step = base_step.min(reach / gnorm_total);
        // Backtracking on the knot energy (Armijo).
        loop {
            let x: Vec<f64> = knots[m].x.iter().zip(&r).map(|(a, b)| a - step * b).collect();
            let theta = knots[m].theta - step * ft / problem.theta_weight;
            // A trial that leaves the domain of the functional counts as a rejected step.
            let e = problem.energy(&x, theta).unwrap_or(f64::INFINITY);
            if e <= sigma - 1e-4 * step * gnorm_total * gnorm_total {
                knots[m] = Knot { x, theta, energy: e };
                break;
            }
            step *= 0.5;
            if step < 1e-12 {
                break;
            }
        }
        base_step = if step < base_step { step.max(1e-3 * config.descent_step) } else { (base_step * 1.25).min(8.0 * config.descent_step) };
    }

    // θ is folded back by dilation.
    let knot = match best_knot {
        Some((_, k)) => k,
        None => knots[path_max(&knots)].clone(),
    };
    let mut best = problem.metric.disc.real_state(&knot.x)?;
    if config.theta_mode && knot.theta != 0.0 {
        best = best.dilate_onto(knot.theta.exp(), grid.clone(), lambda)?;
    }

    let (state, newton_history) = match newton_refine(&best, spec, strength, config) {
        Ok(out) => (out.state, out.history),
        Err(Error::Newton { history, .. }) => (best, history),
        Err(e) => return Err(e),
    };
    let state = gauge_real(&state);
    let report = verify(&state, spec, strength)?;
    if m0.is_none() && config.seed_profile != SeedProfile::ScalarGroundState {
        m0 = scalar_ground_state(spec, strength.dim, grid.clone()).ok().map(|(_, m)| m);
    }
    Ok(SolveResult {
        sigma_estimate: report.energy.total,
        converged: passes_gates(&report, strength, config.grad_tol)?,
        state,
        m0_estimate: m0,
        report,
        iterations,
        newton_history,
        trace,
        regime: regularity_regime(strength.dim, spec.p_growth),
    })
}

/// Gradient, Pohozaev, boundary and alternate-Pohozaev gates of a converged nontrivial state.
pub fn passes_gates(report: &VerificationReport, strength: &InteractionStrength, grad_tol: f64) -> Result<bool> {
    let scale = 1.0 + report.energy.total.abs();
    let charge = (strength.alpha + xi(strength.dim, report.lambda)?) * report.charge.norm();
    let alt = report.pohozaev_residual_alt.is_none_or(|a| (a - report.pohozaev_residual).abs() <= 1e-12 * scale);
    let nontrivial = (2.0 * (report.energy.kinetic + report.energy.charge_block.abs())).sqrt() > 1e-6;
    Ok(nontrivial
        && report.gradient_norm <= grad_tol
        && report.pohozaev_residual.abs() <= 100.0 * grad_tol * scale
        && report.boundary_residual.norm() <= 100.0 * grad_tol * (1.0 + charge)
        && alt)
}

/// Interior knot of highest energy; the smallest index wins ties.
fn path_max(knots: &[Knot]) -> usize {
    let k_max = knots.len() - 1;
    (1..k_max).fold(1, |best, i| if knots[i].energy > knots[best].energy { i } else { best })
}

/// Real gauge with `q >= 0`.
fn gauge_real(state: &FieldState) -> FieldState {
    if state.charge().re < 0.0 {
        state.scale(Complex64::new(-1.0, 0.0))
    } else {
        state.clone()
    }
}
