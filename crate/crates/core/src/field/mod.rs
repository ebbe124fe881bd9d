//! Energy-space elements `u = φ_λ + q G_λ` on a graded radial grid.
//!
//! A state stores the nodal values of `φ_λ` for its own `λ`. Internally the
//! represented function is `u = Π φ_ref + q G_ref`, where `φ_ref` is the
//! piecewise-quadratic interpolant of `φ_λ + q (G_λ - G_ref)` and `G_ref` is
//! the kernel at the grid's reference shift. Changing `λ` therefore moves
//! only the bookkeeping, never the function `u`.

mod grid;
mod io;

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::greens::{green_difference, green_difference_derivative, xi, GreenKernel, InteractionStrength};
use crate::interp::MonotoneCubic;

pub use grid::{default_grading, default_r_max, make_grid, GridParams, QuadPoint, RadialGrid, MIN_INTERVALS};
pub use io::{read_profile, sidecar_path, write_profile, ProfileMeta};

#[derive(Debug, Clone)]
pub struct FieldState {
    grid: Arc<RadialGrid>,
    lambda: f64,
    charge: Complex64,
    phi: Vec<Complex64>,
}

/// The pieces of `‖u‖²_{H¹_{α,λ}} = ‖∇φ_λ‖² + λ‖φ_λ‖² + (α+ξ_λ)|q|²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFormValue {
    pub grad_phi_sq: f64,
    pub phi_sq: f64,
    pub u_sq: f64,
    pub charge_term: f64,
    pub total: f64,
}

/// Values of a state at the grid's quadrature points.
#[derive(Debug, Clone)]
pub struct Samples {
    pub phi: Vec<Complex64>,
    pub dphi: Vec<Complex64>,
    pub u: Vec<Complex64>,
    /// `G_λ` at the state's `λ`.
    pub green: Vec<f64>,
}

impl FieldState {
    pub fn new(grid: Arc<RadialGrid>, lambda: f64, charge: Complex64, phi: Vec<Complex64>) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
        }
        if phi.len() != grid.nodes().len() {
            return Err(Error::InvalidGrid(format!(
                "profile has {} values but the grid has {} nodes",
                phi.len(),
                grid.nodes().len()
            )));
        }
        if !charge.re.is_finite() || !charge.im.is_finite() {
            return Err(Error::Domain("charge must be finite".into()));
        }
        if let Some(i) = phi.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Domain(format!("profile value at node {i} is not finite")));
        }
        Ok(Self { grid, lambda, charge, phi })
    }

    pub fn zero(grid: Arc<RadialGrid>, lambda: f64) -> Result<Self> {
        let n = grid.nodes().len();
        Self::new(grid, lambda, Complex64::new(0.0, 0.0), vec![Complex64::new(0.0, 0.0); n])
    }

    /// A real state with `φ_λ(r_i) = f(r_i)`.
    pub fn from_real_profile(grid: Arc<RadialGrid>, lambda: f64, charge: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let phi = grid.nodes().iter().map(|&r| Complex64::new(f(r), 0.0)).collect();
        Self::new(grid, lambda, Complex64::new(charge, 0.0), phi)
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn charge(&self) -> Complex64 {
        self.charge
    }

    pub fn phi(&self) -> &[Complex64] {
        &self.phi
    }

    /// `φ_λ(0)`.
    pub fn phi_at_origin(&self) -> Complex64 {
        self.phi[0]
    }

    pub fn kernel(&self) -> GreenKernel {
        GreenKernel::new(self.grid.dim(), self.lambda).expect("lambda validated on construction")
    }

    pub fn is_real(&self) -> bool {
        self.charge.im == 0.0 && self.phi.iter().all(|z| z.im == 0.0)
    }

    /// Nodal values of the reference-shift profile `φ_ref = φ_λ + q (G_λ - G_ref)`.
    pub fn reference_profile(&self) -> Vec<Complex64> {
        let dim = self.grid.dim();
        let lref = self.grid.reference_lambda();
        self.grid
            .nodes()
            .iter()
            .zip(&self.phi)
            .map(|(&r, &p)| p + self.charge * green_difference(dim, self.lambda, lref, r))
            .collect()
    }

    /// Inverse of [`reference_profile`](Self::reference_profile).
    pub fn from_reference_profile(
        grid: Arc<RadialGrid>,
        lambda: f64,
        charge: Complex64,
        reference: &[Complex64],
    ) -> Result<Self> {
        let dim = grid.dim();
        let lref = grid.reference_lambda();
        let phi = grid
            .nodes()
            .iter()
            .zip(reference)
            .map(|(&r, &p)| p + charge * green_difference(dim, lref, lambda, r))
            .collect();
        Self::new(grid, lambda, charge, phi)
    }

    /// Evaluate `φ_λ`, `φ_λ'`, `u` and `G_λ` at every quadrature point.
    pub fn samples(&self) -> Samples {
        let grid = &self.grid;
        let dim = grid.dim();
        let lref = grid.reference_lambda();
        let reference = self.reference_profile();
        let q = self.charge;
        let n = grid.quadrature().len();
        let mut out = Samples {
            phi: Vec::with_capacity(n),
            dphi: Vec::with_capacity(n),
            u: Vec::with_capacity(n),
            green: Vec::with_capacity(n),
        };
        for p in grid.quadrature() {
            let j = 2 * p.elem;
            let c = &reference[j..j + 3];
            let val = c[0] * p.basis[0] + c[1] * p.basis[1] + c[2] * p.basis[2];
            let der = c[0] * p.dbasis[0] + c[1] * p.dbasis[1] + c[2] * p.dbasis[2];
            let d = green_difference(dim, lref, self.lambda, p.r);
            let dd = green_difference_derivative(dim, lref, self.lambda, p.r);
            out.phi.push(val + q * d);
            out.dphi.push(der + q * dd);
            out.u.push(val + q * p.green_ref);
            out.green.push(p.green_ref - d);
        }
        out
    }

    fn check_compatible(&self, other: &FieldState) -> Result<()> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        if self.lambda != other.lambda {
            return Err(Error::LambdaMismatch(self.lambda, other.lambda));
        }
        Ok(())
    }

    /// Change the spectral shift: `φ_new = φ + q (G_λ - G_new)`, charge untouched.
    pub fn change_lambda(&self, lambda_new: f64) -> Result<FieldState> {
        if !(lambda_new > 0.0 && lambda_new.is_finite()) {
            return Err(Error::Domain(format!("lambda must be positive, got {lambda_new}")));
        }
        if lambda_new == self.lambda {
            return Ok(self.clone());
        }
        let dim = self.grid.dim();
        let phi = self
            .grid
            .nodes()
            .iter()
            .zip(&self.phi)
            .map(|(&r, &p)| p + self.charge * green_difference(dim, self.lambda, lambda_new, r))
            .collect();
        Self::new(self.grid.clone(), lambda_new, self.charge, phi)
    }

    /// `u(·/t)`: lives on the grid scaled by `t`, with `λ/t²` and charge `t^{N-2} q`.
    /// On the scaled grid the nodal profile is carried over unchanged.
    pub fn dilate(&self, t: f64) -> Result<FieldState> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Domain(format!("dilation factor must be positive, got {t}")));
        }
        if t == 1.0 {
            return Ok(self.clone());
        }
        let grid = Arc::new(self.grid.scaled(t)?);
        let factor = t.powi(self.grid.dim().value() - 2);
        Self::new(grid, self.lambda / (t * t), self.charge * factor, self.phi.clone())
    }

    /// Transfer to another grid of the same dimension by monotone cubic
    /// interpolation of `φ_λ`; beyond the source radius `φ_λ` is taken as 0.
    pub fn resample(&self, grid: Arc<RadialGrid>) -> Result<FieldState> {
        if grid.dim() != self.grid.dim() {
            return Err(Error::GridMismatch);
        }
        if grid.same_as(&self.grid) {
            return Ok(self.clone());
        }
        let src = self.grid.nodes();
        let re: Vec<f64> = self.phi.iter().map(|z| z.re).collect();
        let im: Vec<f64> = self.phi.iter().map(|z| z.im).collect();
        let f_re = MonotoneCubic::new(src, &re);
        let f_im = MonotoneCubic::new(src, &im);
        let r_max = self.grid.r_max();
        let phi = grid
            .nodes()
            .iter()
            .map(|&r| if r > r_max { Complex64::new(0.0, 0.0) } else { Complex64::new(f_re.eval(r), f_im.eval(r)) })
            .collect();
        Self::new(grid, self.lambda, self.charge, phi)
    }

    /// `u(·/t)` transferred onto `grid` at the shift `lambda`.
    pub fn dilate_onto(&self, t: f64, grid: Arc<RadialGrid>, lambda: f64) -> Result<FieldState> {
        self.dilate(t)?.change_lambda(lambda)?.resample(grid)
    }

    pub fn add(&self, other: &FieldState) -> Result<FieldState> {
        self.axpy(Complex64::new(1.0, 0.0), other)
    }

    /// `self + a · other`.
    pub fn axpy(&self, a: Complex64, other: &FieldState) -> Result<FieldState> {
        self.check_compatible(other)?;
        let phi = self.phi.iter().zip(&other.phi).map(|(x, y)| x + a * y).collect();
        Self::new(self.grid.clone(), self.lambda, self.charge + a * other.charge, phi)
    }

    pub fn scale(&self, a: Complex64) -> FieldState {
        FieldState {
            grid: self.grid.clone(),
            lambda: self.lambda,
            charge: self.charge * a,
            phi: self.phi.iter().map(|z| z * a).collect(),
        }
    }

    /// Multiply by the unit phase that makes the charge a nonnegative real.
    pub fn gauge_fix(&self) -> FieldState {
        let q = self.charge;
        let m = q.norm();
        if m == 0.0 {
            return self.clone();
        }
        let mut out = self.scale(q.conj() / m);
        out.charge = Complex64::new(m, 0.0);
        out
    }

    /// `⟨u_a, u_b⟩` with `⟨f, g⟩ = ∫ f ḡ`; `‖G_λ‖²` enters in closed form.
    pub fn l2_inner(&self, other: &FieldState) -> Result<Complex64> {
        self.check_compatible(other)?;
        let sa = self.samples();
        let sb = other.samples();
        Ok(inner_from_samples(self, &sa, other, &sb))
    }

    pub fn l2_norm_sq(&self) -> f64 {
        let s = self.samples();
        inner_from_samples(self, &s, self, &s).re
    }

    /// `‖∇φ_λ‖²`, `‖φ_λ‖²`, `‖u‖²` and `(α+ξ_λ)|q|²`; errors when `λ <= ω_α`.
    pub fn h1_alpha_norm_sq(&self, strength: &InteractionStrength) -> Result<QuadraticFormValue> {
        let omega_alpha = strength.omega_alpha();
        if !(self.lambda > omega_alpha) {
            return Err(Error::NotCoercive { lambda: self.lambda, omega_alpha });
        }
        let s = self.samples();
        let q = self.quadratic_pieces(&s);
        let charge_term = (strength.alpha + xi(self.grid.dim(), self.lambda)?) * self.charge.norm_sqr();
        Ok(QuadraticFormValue {
            grad_phi_sq: q.grad_phi_sq,
            phi_sq: q.phi_sq,
            u_sq: q.u_sq,
            charge_term,
            total: q.grad_phi_sq + self.lambda * q.phi_sq + charge_term,
        })
    }

    pub(crate) fn quadratic_pieces(&self, s: &Samples) -> QuadraticPieces {
        let quad = self.grid.quadrature();
        let mut grad = 0.0;
        let mut phi_sq = 0.0;
        let mut cross = Complex64::new(0.0, 0.0);
        for (k, p) in quad.iter().enumerate() {
            grad += p.w * s.dphi[k].norm_sqr();
            phi_sq += p.w * s.phi[k].norm_sqr();
            cross += p.w * s.phi[k] * s.green[k];
        }
        let g2 = self.kernel().l2_norm_sq();
        let q = self.charge;
        // ‖u‖² - ‖φ‖² = 2 Re(q̄ ⟨φ, G⟩) + |q|² ‖G‖²
        let extra = 2.0 * (q.conj() * cross).re + q.norm_sqr() * g2;
        QuadraticPieces { grad_phi_sq: grad, phi_sq, u_sq: phi_sq + extra, l2_gap: -extra }
    }
}

pub(crate) struct QuadraticPieces {
    pub grad_phi_sq: f64,
    pub phi_sq: f64,
    pub u_sq: f64,
    /// `‖φ_λ‖² - ‖u‖²`, computed without cancellation.
    pub l2_gap: f64,
}

fn inner_from_samples(a: &FieldState, sa: &Samples, b: &FieldState, sb: &Samples) -> Complex64 {
    let quad = a.grid.quadrature();
    let mut pp = Complex64::new(0.0, 0.0);
    let mut pg = Complex64::new(0.0, 0.0);
    let mut gp = Complex64::new(0.0, 0.0);
    for (k, p) in quad.iter().enumerate() {
        pp += p.w * sa.phi[k] * sb.phi[k].conj();
        pg += p.w * sa.phi[k] * sa.green[k];
        gp += p.w * sb.green[k] * sb.phi[k].conj();
    }
    let g2 = a.kernel().l2_norm_sq();
    pp + b.charge.conj() * pg + a.charge * gp + a.charge * b.charge.conj() * g2
}
