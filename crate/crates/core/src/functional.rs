//! The action functional
//! `I(u) = ½‖∇φ_λ‖² + (λ/2)(‖φ_λ‖² - ‖u‖²) + ½(α+ξ_λ)|q|² - ∫G(u)`,
//! its derivative, the dilated functional `J(θ, u) = I(u(e^{-θ}·))`, and the
//! residuals used to certify solutions.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrete::Discretization;
use crate::error::{Error, Result};
use crate::field::FieldState;
use crate::greens::{xi, Dimension, InteractionStrength};
use crate::nonlinearity::Nonlinearity;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// `½‖∇φ_λ‖²`
    pub kinetic: f64,
    /// `(λ/2)(‖φ_λ‖² - ‖u‖²)`
    pub l2_block: f64,
    /// `½(α+ξ_λ)|q|²`
    pub charge_block: f64,
    /// `∫G(u)`
    pub potential: f64,
    pub total: f64,
}

/// Every scalar the energy, Pohozaev and dilation formulas need.
#[derive(Debug, Clone, Copy)]
struct Pieces {
    dim: Dimension,
    lambda: f64,
    alpha: f64,
    xi: f64,
    green_norm_sq: f64,
    grad_phi_sq: f64,
    l2_gap: f64,
    charge_sq: f64,
    potential: f64,
}

fn pieces(state: &FieldState, nl: &dyn Nonlinearity, strength: &InteractionStrength) -> Result<Pieces> {
    let dim = state.grid().dim();
    if dim != strength.dim {
        return Err(Error::GridMismatch);
    }
    let s = state.samples();
    let quad = state.grid().quadrature();
    let qp = state.quadratic_pieces(&s);
    let potential: f64 = quad.par_iter().zip(s.u.par_iter()).map(|(p, u)| p.w * nl.big_g(u.norm())).sum();
    if !potential.is_finite() {
        return Err(Error::Nonlinearity("∫G(u) is not finite on this state".into()));
    }
    let kernel = state.kernel();
    Ok(Pieces {
        dim,
        lambda: state.lambda(),
        alpha: strength.alpha,
        xi: kernel.xi(),
        green_norm_sq: kernel.l2_norm_sq(),
        grad_phi_sq: qp.grad_phi_sq,
        l2_gap: qp.l2_gap,
        charge_sq: state.charge().norm_sqr(),
        potential,
    })
}

impl Pieces {
    fn breakdown(&self) -> EnergyBreakdown {
        let kinetic = 0.5 * self.grad_phi_sq;
        let l2_block = 0.5 * self.lambda * self.l2_gap;
        let charge_block = 0.5 * (self.alpha + self.xi) * self.charge_sq;
        EnergyBreakdown {
            kinetic,
            l2_block,
            charge_block,
            potential: self.potential,
            total: kinetic + l2_block + charge_block - self.potential,
        }
    }

    fn n(&self) -> f64 {
        self.dim.as_f64()
    }

    fn pohozaev(&self) -> f64 {
        let n = self.n();
        (n - 2.0) / 2.0 * self.grad_phi_sq + (n - 2.0) * self.lambda / 2.0 * self.l2_gap
            - self.lambda * self.green_norm_sq * self.charge_sq
            + (n - 2.0) * (self.alpha + self.xi) * self.charge_sq
            - n * self.potential
    }

    fn pohozaev_alt(&self) -> Option<f64> {
        (self.dim == Dimension::Three).then_some(
            0.5 * self.grad_phi_sq
                + 0.5 * self.lambda * self.l2_gap
                + 0.5 * (self.alpha + self.xi) * self.charge_sq
                + 0.5 * self.alpha * self.charge_sq
                - 3.0 * self.potential
        )
    }

    /// `(J, ∂_θ J)` at `θ`.
    fn dilated(&self, theta: f64) -> Result<(f64, f64)> {
        let n = self.n();
        let a = ((n - 2.0) * theta).exp();
        let b = a * a;
        let c = (n * theta).exp();
        let xi_t = xi(self.dim, (-2.0 * theta).exp() * self.lambda)?;
        let quad = 0.5 * self.grad_phi_sq + 0.5 * self.lambda * self.l2_gap;
        let charge = 0.5 * (self.alpha + xi_t) * self.charge_sq;
        let dxi = -2.0 / a * self.lambda * self.green_norm_sq;
        let j = a * quad + b * charge - c * self.potential;
        let dj = (n - 2.0) * a * quad + 2.0 * (n - 2.0) * b * charge + b * 0.5 * dxi * self.charge_sq
            - n * c * self.potential;
        Ok((j, dj))
    }
}

/// `I(u)` split into its blocks. `λ` need not exceed `ω_α`.
pub fn energy(state: &FieldState, nl: &dyn Nonlinearity, strength: &InteractionStrength) -> Result<EnergyBreakdown> {
    Ok(pieces(state, nl, strength)?.breakdown())
}

/// `I'(u)[v] = Re{⟨∇φ,∇ψ⟩ + λ⟨φ,ψ⟩ - λ⟨u,v⟩ + (α+ξ_λ) q q̄_v - ∫g(u)v̄}`.
pub fn derivative(
    state: &FieldState,
    direction: &FieldState,
    nl: &dyn Nonlinearity,
    strength: &InteractionStrength,
) -> Result<f64> {
    if !state.grid().same_as(direction.grid()) {
        return Err(Error::GridMismatch);
    }
    if state.lambda() != direction.lambda() {
        return Err(Error::LambdaMismatch(state.lambda(), direction.lambda()));
    }
    let su = state.samples();
    let sv = direction.samples();
    let kernel = state.kernel();
    let (q, qv) = (state.charge(), direction.charge());
    let lambda = state.lambda();
    let mut grad = Complex64::new(0.0, 0.0);
    let mut phi_g = Complex64::new(0.0, 0.0);
    let mut g_psi = Complex64::new(0.0, 0.0);
    let mut nonlinear = Complex64::new(0.0, 0.0);
    for (k, p) in state.grid().quadrature().iter().enumerate() {
        grad += p.w * su.dphi[k] * sv.dphi[k].conj();
        phi_g += p.w * su.phi[k] * su.green[k];
        g_psi += p.w * su.green[k] * sv.phi[k].conj();
        nonlinear += p.w * nl.g_complex(su.u[k]) * sv.u[k].conj();
    }
    // λ⟨φ,ψ⟩ - λ⟨u,v⟩ = -λ(q̄_v⟨φ,G⟩ + q⟨G,ψ⟩ + q q̄_v ‖G‖²)
    let l2 = -lambda * (qv.conj() * phi_g + q * g_psi + q * qv.conj() * kernel.l2_norm_sq());
    let charge = (strength.alpha + kernel.xi()) * q * qv.conj();
    Ok((grad + l2 + charge - nonlinear).re)
}

/// `J(θ, u) = I(u(e^{-θ}·))`, evaluated from the base state's norms.
pub fn extended_energy(
    theta: f64,
    state: &FieldState,
    nl: &dyn Nonlinearity,
    strength: &InteractionStrength,
) -> Result<f64> {
    Ok(pieces(state, nl, strength)?.dilated(theta)?.0)
}

/// `∂_θ J(θ, u)`.
pub fn dtheta(theta: f64, state: &FieldState, nl: &dyn Nonlinearity, strength: &InteractionStrength) -> Result<f64> {
    Ok(pieces(state, nl, strength)?.dilated(theta)?.1)
}

/// `(N-2)/2 ‖∇φ‖² + (N-2)λ/2 (‖φ‖² - ‖u‖²) - λ‖G_λ‖²|q|² + (N-2)(α+ξ_λ)|q|² - N∫G(u)`.
pub fn pohozaev_residual(state: &FieldState, nl: &dyn Nonlinearity, strength: &InteractionStrength) -> Result<f64> {
    Ok(pieces(state, nl, strength)?.pohozaev())
}

/// The 3D rewriting `½‖∇φ‖² + (λ/2)(‖φ‖² - ‖u‖²) + ½(α+ξ_λ)|q|² + ½α|q|² - 3∫G(u)`; `None` in 2D.
pub fn pohozaev_residual_alt(
    state: &FieldState,
    nl: &dyn Nonlinearity,
    strength: &InteractionStrength,
) -> Result<Option<f64>> {
    Ok(pieces(state, nl, strength)?.pohozaev_alt())
}

/// `φ_λ(0) - (α+ξ_λ) q`.
pub fn boundary_residual(state: &FieldState, strength: &InteractionStrength) -> Result<Complex64> {
    let x = xi(state.grid().dim(), state.lambda())?;
    Ok(state.phi_at_origin() - (strength.alpha + x) * state.charge())
}

/// Strong-form residuals of the Euler-Lagrange system at a real state.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSystem {
    /// `-φ'' - (N-1)/r φ' - λ q G_λ - g(u)` at every node. With `q ≠ 0` the
    /// source is singular at the origin and the entry for `r = 0` is 0.
    pub profile: Vec<f64>,
    /// `(α+ξ_λ) q - λ⟨u, G_λ⟩ - ∫g(u) G_λ`.
    pub charge: f64,
}

impl GradientSystem {
    pub fn max_abs(&self) -> f64 {
        self.profile.iter().fold(self.charge.abs(), |m, v| m.max(v.abs()))
    }
}

/// Second-order finite differences on the graded nodes. The origin uses the
/// even reflection `φ(-r₁) = φ(r₁)`, i.e. `Δφ(0) ≈ 2N(φ₁ - φ₀)/r₁²`; past
/// `r_max` the profile is taken as 0.
pub fn gradient_system(
    state: &FieldState,
    nl: &dyn Nonlinearity,
    strength: &InteractionStrength,
) -> Result<GradientSystem> {
    if !state.is_real() {
        return Err(Error::Domain("gradient_system needs a gauge-fixed real state".into()));
    }
    let dim = state.grid().dim();
    let n = dim.as_f64();
    let r = state.grid().nodes();
    let phi: Vec<f64> = state.phi().iter().map(|z| z.re).collect();
    let q = state.charge().re;
    let kernel = state.kernel();
    let lambda = state.lambda();
    let m = r.len() - 1;
    let mut profile = vec![0.0; m + 1];
    if q == 0.0 {
        profile[0] = -2.0 * n * (phi[1] - phi[0]) / (r[1] * r[1]) - nl.g_real(phi[0]);
    }
    for i in 1..=m {
        let (hm, hp) = (r[i] - r[i - 1], if i < m { r[i + 1] - r[i] } else { r[m] - r[m - 1] });
        let next = if i < m { phi[i + 1] } else { 0.0 };
        let d2 = 2.0 * ((next - phi[i]) / hp - (phi[i] - phi[i - 1]) / hm) / (hp + hm);
        let d1 = (hm * hm * next + (hp * hp - hm * hm) * phi[i] - hp * hp * phi[i - 1]) / (hm * hp * (hm + hp));
        let g = kernel.eval(r[i]);
        let u = phi[i] + q * g;
        profile[i] = -d2 - (n - 1.0) / r[i] * d1 - lambda * q * g - nl.g_real(u);
    }
    let s = state.samples();
    let mut phi_g = 0.0;
    let mut source = 0.0;
    for (k, p) in state.grid().quadrature().iter().enumerate() {
        phi_g += p.w * s.phi[k].re * s.green[k];
        source += p.w * nl.g_real(s.u[k].re) * s.green[k];
    }
    let u_g = phi_g + q * kernel.l2_norm_sq();
    let charge = (strength.alpha + kernel.xi()) * q - lambda * u_g - source;
    Ok(GradientSystem { profile, charge })
}

/// Minimum number of nodes in the blow-up fit.
const BLOWUP_MIN_NODES: usize = 6;

/// Least-squares slope of `log|φ_λ'|` against `log r` over the innermost
/// decade `r₁ <= r <= 10 r₁`, widened to the first six interior nodes when
/// the decade holds fewer.
pub fn blowup_diagnostic(state: &FieldState) -> Result<f64> {
    let r = state.grid().nodes();
    let phi: Vec<f64> = state.phi().iter().map(|z| z.norm() * z.re.signum()).collect();
    let m = r.len() - 1;
    let decade = r[1..m].iter().take_while(|&&x| x <= 10.0 * r[1]).count();
    let count = decade.max(BLOWUP_MIN_NODES);
    if count + 1 > m {
        return Err(Error::Unavailable("too few inner nodes for the blow-up fit".into()));
    }
    let mut pts = Vec::with_capacity(count);
    for i in 1..=count {
        let (hm, hp) = (r[i] - r[i - 1], r[i + 1] - r[i]);
        let d1 = (hm * hm * phi[i + 1] + (hp * hp - hm * hm) * phi[i] - hp * hp * phi[i - 1]) / (hm * hp * (hm + hp));
        if d1 == 0.0 || !d1.is_finite() {
            return Err(Error::Unavailable(format!("φ' vanishes at r = {}", r[i])));
        }
        pts.push((r[i].ln(), d1.abs().ln()));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Dual norm of `I'(u)` in `(H¹_{α,λ})'` at the state's own `λ`.
pub fn gradient_norm(state: &FieldState, nl: &dyn Nonlinearity, strength: &InteractionStrength) -> Result<f64> {
    let omega_alpha = strength.omega_alpha();
    if !(state.lambda() > omega_alpha) {
        return Err(Error::NotCoercive { lambda: state.lambda(), omega_alpha });
    }
    let disc = Discretization::for_state(state, strength)?;
    let gram = disc.factor_gram()?;
    let f = disc.gradient(state, nl)?;
    Ok(disc.dual_norm(&gram, &f))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub energy: EnergyBreakdown,
    pub gradient_norm: f64,
    pub pohozaev_residual: f64,
    /// `|pohozaev_residual| / (1 + |I(u)|)`
    pub pohozaev_relative: f64,
    pub pohozaev_residual_alt: Option<f64>,
    pub boundary_residual: Complex64,
    /// `|boundary_residual| / ((α+ξ_λ)|q|)`, absent when `q = 0`.
    pub boundary_relative: Option<f64>,
    pub charge: Complex64,
    pub lambda: f64,
    pub blowup_exponent: Option<f64>,
}

pub fn verify(
    state: &FieldState,
    nl: &dyn Nonlinearity,
    strength: &InteractionStrength,
) -> Result<VerificationReport> {
    let p = pieces(state, nl, strength)?;
    let energy = p.breakdown();
    let pohozaev = p.pohozaev();
    let boundary = boundary_residual(state, strength)?;
    let scale = (p.alpha + p.xi).abs() * state.charge().norm();
    Ok(VerificationReport {
        energy,
        gradient_norm: gradient_norm(state, nl, strength)?,
        pohozaev_residual: pohozaev,
        pohozaev_relative: pohozaev.abs() / (1.0 + energy.total.abs()),
        pohozaev_residual_alt: p.pohozaev_alt(),
        boundary_residual: boundary,
        boundary_relative: (scale > 0.0).then(|| boundary.norm() / scale),
        charge: state.charge(),
        lambda: state.lambda(),
        blowup_exponent: blowup_diagnostic(state).ok(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::make_grid;
    use crate::linalg::BandMatrix;
    use crate::nonlinearity::NonlinearitySpec;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn power() -> NonlinearitySpec {
        NonlinearitySpec::power(1.0, 2.5).unwrap()
    }

    fn random_state(rng: &mut ChaCha8Rng, grid: &Arc<RadialGrid>, lambda: f64, complex: bool) -> FieldState {
        let a: f64 = rng.gen_range(0.2..1.5);
        let b: f64 = rng.gen_range(0.2..1.0);
        let c: f64 = rng.gen_range(-0.5..0.5);
        let phase = if complex { rng.gen_range(0.0..6.0) } else { 0.0 };
        let q = Complex64::from_polar(rng.gen_range(0.0..0.6), phase * 0.7);
        let rot = Complex64::from_polar(1.0, phase);
        let phi = grid
            .nodes()
            .iter()
            .map(|&r| rot * (a * (-b * r * r).exp() + c * (-r).exp() * (r * 0.5).cos()))
            .collect();
        FieldState::new(grid.clone(), lambda, q, phi).unwrap()
    }

    use crate::field::RadialGrid;

    #[test]
    fn zero_state_has_zero_energy() {
        for dim in [Dimension::Two, Dimension::Three] {
            let grid = Arc::new(make_grid(dim, 10.0, 64, 2.0).unwrap());
            let z = FieldState::zero(grid, 1.0).unwrap();
            let s = InteractionStrength::new(1.0, dim);
            let e = energy(&z, &power(), &s).unwrap();
            assert_eq!(e.total, 0.0);
            assert_eq!(pohozaev_residual(&z, &power(), &s).unwrap(), 0.0);
            assert_eq!(boundary_residual(&z, &s).unwrap(), Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn breakdown_total_is_sum_of_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let grid = Arc::new(make_grid(Dimension::Three, 14.0, 128, 2.0).unwrap());
        let st = random_state(&mut rng, &grid, 1.0, true);
        let e = energy(&st, &power(), &InteractionStrength::new(0.3, Dimension::Three)).unwrap();
        assert!((e.total - (e.kinetic + e.l2_block + e.charge_block - e.potential)).abs() <= 1e-14 * e.kinetic.abs().max(1.0));
    }

    #[test]
    fn regular_state_matches_plain_h1_evaluator() {
        // q = 0, φ = e^{-r²}: ½‖∇φ‖² - ∫G(φ) by a fine composite Simpson rule.
        let nl = power();
        for dim in [Dimension::Two, Dimension::Three] {
            let grid = Arc::new(make_grid(dim, 8.0, 512, 2.0).unwrap());
            let st = FieldState::from_real_profile(grid, 1.7, 0.0, |r| (-r * r).exp()).unwrap();
            let e = energy(&st, &nl, &InteractionStrength::new(0.0, dim)).unwrap();
            let n = 400_000;
            let h = 8.0 / n as f64;
            let f = |r: f64| {
                let phi = (-r * r).exp();
                (0.5 * (2.0 * r * phi).powi(2) - nl.big_g(phi)) * dim.measure(r)
            };
            let mut acc = f(0.0) + f(8.0);
            for k in 1..n {
                acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
            }
            let want = acc * h / 3.0;
            assert!((e.total - want).abs() < 1e-7 * want.abs(), "{dim:?}: {} vs {want}", e.total);
            assert!(e.l2_block.abs() < 1e-15 && e.charge_block == 0.0);
        }
    }

    #[test]
    fn energy_is_independent_of_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for dim in [Dimension::Two, Dimension::Three] {
            let grid = Arc::new(make_grid(dim, 16.0, 256, 2.0).unwrap());
            let s = InteractionStrength::new(0.4, dim);
            let st = random_state(&mut rng, &grid, 1.0, true);
            let e1 = energy(&st, &power(), &s).unwrap().total;
            let e3 = energy(&st.change_lambda(3.0).unwrap(), &power(), &s).unwrap().total;
            assert!((e1 - e3).abs() <= 1e-8, "{dim:?}: {e1} vs {e3}");
        }
    }

    #[test]
    fn derivative_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let nl = NonlinearitySpec::double_power(1.0, 0.5, 2.4, 1.0, 2.8).unwrap();
        for dim in [Dimension::Two, Dimension::Three] {
            let grid = Arc::new(make_grid(dim, 14.0, 128, 2.0).unwrap());
            let s = InteractionStrength::new(0.7, dim);
            for _ in 0..5 {
                let u = random_state(&mut rng, &grid, 1.2, true);
                let v = random_state(&mut rng, &grid, 1.2, true);
                let d = derivative(&u, &v, &nl, &s).unwrap();
                let eps = 1e-5;
                let ep = energy(&u.axpy(Complex64::new(eps, 0.0), &v).unwrap(), &nl, &s).unwrap().total;
                let em = energy(&u.axpy(Complex64::new(-eps, 0.0), &v).unwrap(), &nl, &s).unwrap().total;
                let fd = (ep - em) / (2.0 * eps);
                assert!((fd - d).abs() <= 1e-6 * (1.0 + d.abs()), "{dim:?}: {fd} vs {d}");
            }
        }
    }

    #[test]
    fn derivative_agrees_with_assembled_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let nl = power();
        for dim in [Dimension::Two, Dimension::Three] {
            let grid = Arc::new(make_grid(dim, 14.0, 128, 2.0).unwrap());
            let s = InteractionStrength::new(0.7, dim);
            let u = random_state(&mut rng, &grid, 1.2, true);
            let v = random_state(&mut rng, &grid, 1.2, true);
            let disc = Discretization::for_state(&u, &s).unwrap();
            let f = disc.gradient(&u, &nl).unwrap();
            let y = disc.coordinates(&v).unwrap();
            let via_grad: f64 = f.iter().zip(&y).map(|(a, b)| (a * b.conj()).re).sum();
            let d = derivative(&u, &v, &nl, &s).unwrap();
            assert!((via_grad - d).abs() < 1e-10 * (1.0 + d.abs()));
        }
    }

    #[test]
    fn charge_direction_isolates_charge_equation() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let nl = power();
        let grid = Arc::new(make_grid(Dimension::Three, 14.0, 128, 2.0).unwrap());
        let s = InteractionStrength::new(0.7, Dimension::Three);
        // At the grid's reference shift v = G_λ is represented exactly: φ_λ(v) = 0, q(v) = 1.
        let lambda = grid.reference_lambda();
        let u = random_state(&mut rng, &grid, lambda, false);
        let v = FieldState::new(grid.clone(), lambda, Complex64::new(1.0, 0.0), vec![Complex64::new(0.0, 0.0); 129]).unwrap();
        let d = derivative(&u, &v, &nl, &s).unwrap();
        let sys = gradient_system(&u, &nl, &s).unwrap();
        assert!((d - sys.charge).abs() < 1e-10 * (1.0 + d.abs()));
    }

    #[test]
    fn dilated_energy_matches_energy_of_dilated_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let nl = power();
        for dim in [Dimension::Two, Dimension::Three] {
            let grid = Arc::new(make_grid(dim, 14.0, 256, 2.0).unwrap());
            let s = InteractionStrength::new(0.2, dim);
            let u = random_state(&mut rng, &grid, 1.0, true);
            let i0 = energy(&u, &nl, &s).unwrap().total;
            assert!((extended_energy(0.0, &u, &nl, &s).unwrap() - i0).abs() < 1e-14 * (1.0 + i0.abs()));
            for theta in [-0.5, 0.3] {
                let j = extended_energy(theta, &u, &nl, &s).unwrap();
                let direct = energy(&u.dilate(theta.exp()).unwrap(), &nl, &s).unwrap().total;
                assert!((j - direct).abs() < 1e-7 * (1.0 + j.abs()), "{dim:?} θ={theta}: {j} vs {direct}");
            }
        }
    }

    #[test]
    fn dtheta_is_pohozaev_and_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let nl = power();
        for dim in [Dimension::Two, Dimension::Three] {
            let grid = Arc::new(make_grid(dim, 14.0, 128, 2.0).unwrap());
            let s = InteractionStrength::new(-0.05, dim);
            let u = random_state(&mut rng, &grid, 1.0, true);
            let d0 = dtheta(0.0, &u, &nl, &s).unwrap();
            let poh = pohozaev_residual(&u, &nl, &s).unwrap();
            assert!((d0 - poh).abs() < 1e-8 * (1.0 + poh.abs()));
            for theta in [-0.4, 0.0, 0.6] {
                let h = 1e-5;
                let fd = (extended_energy(theta + h, &u, &nl, &s).unwrap() - extended_energy(theta - h, &u, &nl, &s).unwrap())
                    / (2.0 * h);
                let d = dtheta(theta, &u, &nl, &s).unwrap();
                assert!((fd - d).abs() < 1e-7 * (1.0 + d.abs()));
            }
        }
    }

    #[test]
    fn three_dimensional_pohozaev_rewriting_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let grid = Arc::new(make_grid(Dimension::Three, 14.0, 128, 2.0).unwrap());
        let s = InteractionStrength::new(0.9, Dimension::Three);
        for _ in 0..10 {
            let u = random_state(&mut rng, &grid, 2.0, true);
            let a = pohozaev_residual(&u, &power(), &s).unwrap();
            let b = pohozaev_residual_alt(&u, &power(), &s).unwrap().unwrap();
            assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
        let g2 = Arc::new(make_grid(Dimension::Two, 14.0, 64, 2.0).unwrap());
        let z = FieldState::zero(g2, 1.0).unwrap();
        assert_eq!(pohozaev_residual_alt(&z, &power(), &InteractionStrength::new(0.0, Dimension::Two)).unwrap(), None);
    }

    #[test]
    fn dilation_expansion_in_t() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let nl = power();
        for dim in [Dimension::Two, Dimension::Three] {
            let grid = Arc::new(make_grid(dim, 14.0, 256, 2.0).unwrap());
            let s = InteractionStrength::new(0.5, dim);
            let u = random_state(&mut rng, &grid, 1.0, false);
            let e = energy(&u, &nl, &s).unwrap();
            let n = dim.value();
            for t in [0.5f64, 2.0] {
                let ut = u.dilate(t).unwrap();
                let xi_t = xi(dim, 1.0 / (t * t)).unwrap();
                let want = t.powi(n - 2) * (e.kinetic + e.l2_block)
                    + t.powi(2 * (n - 2)) * 0.5 * (0.5 + xi_t) * u.charge().norm_sqr()
                    - t.powi(n) * e.potential;
                let got = energy(&ut, &nl, &s).unwrap().total;
                assert!((got - want).abs() < 1e-6 * (1.0 + want.abs()), "{dim:?} t={t}");
            }
        }
    }

    #[test]
    fn boundary_residual_cases() {
        let grid = Arc::new(make_grid(Dimension::Three, 10.0, 64, 2.0).unwrap());
        let s = InteractionStrength::new(0.3, Dimension::Three);
        let x = xi(Dimension::Three, 1.0).unwrap();
        let mut phi = vec![Complex64::new(0.0, 0.0); 65];
        phi[0] = Complex64::new(0.3 + x, 0.0);
        let st = FieldState::new(grid.clone(), 1.0, Complex64::new(1.0, 0.0), phi).unwrap();
        assert!(boundary_residual(&st, &s).unwrap().norm() < 1e-15);
        let regular = FieldState::from_real_profile(grid, 1.0, 0.0, |r| (-r * r).exp()).unwrap();
        assert_eq!(boundary_residual(&regular, &s).unwrap(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn gaussian_has_unit_blowup_slope() {
        let grid = Arc::new(make_grid(Dimension::Three, 10.0, 512, 2.0).unwrap());
        let st = FieldState::from_real_profile(grid, 1.0, 0.0, |r| (-r * r).exp()).unwrap();
        let slope = blowup_diagnostic(&st).unwrap();
        assert!((slope - 1.0).abs() < 1e-3, "{slope}");
        let zero = FieldState::zero(st.grid().clone(), 1.0).unwrap();
        assert!(matches!(blowup_diagnostic(&zero), Err(Error::Unavailable(_))));
    }

    /// `g̃(s) = (2N + 4 ln s) s`, so that `-Δ e^{-r²} = g̃(e^{-r²})`.
    struct Manufactured(f64);

    impl Nonlinearity for Manufactured {
        fn g(&self, s: f64) -> f64 {
            if s == 0.0 { 0.0 } else { (2.0 * self.0 + 4.0 * s.ln()) * s }
        }
        fn dg(&self, s: f64) -> f64 {
            2.0 * self.0 + 4.0 + 4.0 * s.ln()
        }
        fn big_g(&self, s: f64) -> f64 {
            if s == 0.0 { 0.0 } else { (self.0 - 1.0 + 2.0 * s.ln()) * s * s }
        }
    }

    #[test]
    fn manufactured_residual_is_second_order() {
        for dim in [Dimension::Two, Dimension::Three] {
            let nl = Manufactured(dim.as_f64());
            let s = InteractionStrength::new(0.0, dim);
            let res: Vec<f64> = [128, 256, 512]
                .iter()
                .map(|&m| {
                    let grid = Arc::new(make_grid(dim, 6.0, m, 2.0).unwrap());
                    let st = FieldState::from_real_profile(grid, 1.0, 0.0, |r| (-r * r).exp()).unwrap();
                    gradient_system(&st, &nl, &s).unwrap().profile.iter().fold(0.0f64, |a, v| a.max(v.abs()))
                })
                .collect();
            for w in res.windows(2) {
                assert!((w[0] / w[1]).log2() >= 1.9, "{dim:?}: {res:?}");
            }
        }
    }

    /// `g(s) = μ s` (the linear problem with frequency `-μ`).
    struct Linear(f64);

    impl Nonlinearity for Linear {
        fn g(&self, s: f64) -> f64 {
            self.0 * s
        }
        fn dg(&self, _: f64) -> f64 {
            self.0
        }
        fn big_g(&self, s: f64) -> f64 {
            0.5 * self.0 * s * s
        }
    }

    #[test]
    fn discrete_eigenprofile_has_zero_linear_residual() {
        // Lowest eigenpair of the finite-difference radial operator by shifted inverse iteration.
        let grid = Arc::new(make_grid(Dimension::Three, 10.0, 128, 2.0).unwrap());
        let r = grid.nodes();
        let m = r.len() - 1;
        let mut a = BandMatrix::zeros(m + 1, 1, 1);
        a.add(0, 0, 6.0 / (r[1] * r[1]));
        a.add(0, 1, -6.0 / (r[1] * r[1]));
        for i in 1..=m {
            let hm = r[i] - r[i - 1];
            let hp = if i < m { r[i + 1] - r[i] } else { hm };
            let c2 = 2.0 / (hp + hm);
            let c1 = 2.0 / (r[i] * hm * hp * (hm + hp));
            a.add(i, i - 1, -c2 / hm + c1 * hp * hp);
            a.add(i, i, c2 * (1.0 / hp + 1.0 / hm) - c1 * (hp * hp - hm * hm));
            if i < m {
                a.add(i, i + 1, -c2 / hp - c1 * hm * hm);
            }
        }
        let apply = a.clone();
        let mut shifted = a;
        for i in 0..=m {
            shifted.add(i, i, -0.05);
        }
        let lu = shifted.factor().unwrap();
        let mut v: Vec<f64> = r.iter().map(|&x| (-x).exp()).collect();
        for _ in 0..200 {
            lu.solve_in_place(&mut v);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
        }
        let av = apply.matvec(&v);
        let mu: f64 = av.iter().zip(&v).map(|(a, b)| a * b).sum();
        let st = FieldState::new(grid, 1.0, Complex64::new(0.0, 0.0), v.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .unwrap();
        let sys = gradient_system(&st, &Linear(mu), &InteractionStrength::new(0.0, Dimension::Three)).unwrap();
        let worst = sys.profile.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn mountain_pass_geometry_sampled() {
        let nl = power();
        let dim = Dimension::Three;
        let s = InteractionStrength::new(1.0, dim);
        let grid = Arc::new(make_grid(dim, 20.0, 256, 2.0).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let rho: f64 = 0.05;
        for _ in 0..20 {
            let u = random_state(&mut rng, &grid, 1.0, false);
            let norm = u.h1_alpha_norm_sq(&s).unwrap().total.sqrt();
            let v = u.scale(Complex64::new(rho / norm, 0.0));
            assert!(energy(&v, &nl, &s).unwrap().total > 0.0);
        }
        let w = FieldState::from_real_profile(grid, 1.0, 0.0, |r| 6.0 * (-r * r / 4.0).exp()).unwrap();
        assert!(energy(&w, &nl, &s).unwrap().potential > 0.0);
        assert!(energy(&w.dilate(4.0).unwrap(), &nl, &s).unwrap().total < 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn gauge_invariance(theta in 0.0f64..std::f64::consts::TAU, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let grid = Arc::new(make_grid(Dimension::Three, 14.0, 64, 2.0).unwrap());
            let s = InteractionStrength::new(0.5, Dimension::Three);
            let u = random_state(&mut rng, &grid, 1.0, true);
            let a = energy(&u, &power(), &s).unwrap().total;
            let b = energy(&u.scale(Complex64::from_polar(1.0, theta)), &power(), &s).unwrap().total;
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }

        #[test]
        fn derivative_is_linear_in_direction(a in -2.0f64..2.0, b in -2.0f64..2.0, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let grid = Arc::new(make_grid(Dimension::Two, 14.0, 64, 2.0).unwrap());
            let s = InteractionStrength::new(0.5, Dimension::Two);
            let u = random_state(&mut rng, &grid, 1.0, true);
            let v = random_state(&mut rng, &grid, 1.0, true);
            let w = random_state(&mut rng, &grid, 1.0, true);
            let combo = v.scale(Complex64::new(a, 0.0)).axpy(Complex64::new(b, 0.0), &w).unwrap();
            let lhs = derivative(&u, &combo, &power(), &s).unwrap();
            let rhs = a * derivative(&u, &v, &power(), &s).unwrap() + b * derivative(&u, &w, &power(), &s).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        }
    }
}
