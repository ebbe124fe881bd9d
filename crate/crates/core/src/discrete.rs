//! Finite-element coordinates of a state: the nodal reference profile `c`
//! and the charge `q`, so that `u = Πc + q G_ref` and `φ_λ = Πc + q D` with
//! `D = G_ref - G_λ`. Assembles the `H¹_{α,λ}` Gram matrix, the weak
//! gradient of the functional and its Hessian in these coordinates.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{FieldState, RadialGrid};
use crate::greens::{green_difference, green_difference_derivative, GreenKernel, InteractionStrength};
use crate::linalg::{BorderedLu, BorderedMatrix};
use crate::nonlinearity::Nonlinearity;

/// Per-grid, per-`λ` data shared by every state with that grid and shift.
#[derive(Debug, Clone)]
pub struct Discretization {
    grid: Arc<RadialGrid>,
    lambda: f64,
    alpha: f64,
    xi: f64,
    green_norm_sq: f64,
    /// `D`, `D'` and `G_λ` at the quadrature points.
    d: Vec<f64>,
    dd: Vec<f64>,
    green: Vec<f64>,
}

impl Discretization {
    pub fn new(grid: Arc<RadialGrid>, lambda: f64, strength: &InteractionStrength) -> Result<Self> {
        if grid.dim() != strength.dim {
            return Err(Error::GridMismatch);
        }
        let dim = grid.dim();
        let kernel = GreenKernel::new(dim, lambda)?;
        let lref = grid.reference_lambda();
        let mut d = Vec::with_capacity(grid.quadrature().len());
        let mut dd = Vec::with_capacity(grid.quadrature().len());
        let mut green = Vec::with_capacity(grid.quadrature().len());
        for p in grid.quadrature() {
            let v = green_difference(dim, lref, lambda, p.r);
            d.push(v);
            dd.push(green_difference_derivative(dim, lref, lambda, p.r));
            green.push(p.green_ref - v);
        }
        Ok(Self {
            grid,
            lambda,
            alpha: strength.alpha,
            xi: kernel.xi(),
            green_norm_sq: kernel.l2_norm_sq(),
            d,
            dd,
            green,
        })
    }

    pub fn for_state(state: &FieldState, strength: &InteractionStrength) -> Result<Self> {
        Self::new(state.grid().clone(), state.lambda(), strength)
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `α + ξ_λ`.
    pub fn charge_coefficient(&self) -> f64 {
        self.alpha + self.xi
    }

    /// Number of unknowns: `M + 1` nodal values and the charge.
    pub fn unknowns(&self) -> usize {
        self.grid.nodes().len() + 1
    }

    fn check(&self, state: &FieldState) -> Result<()> {
        if !state.grid().same_as(&self.grid) {
            return Err(Error::GridMismatch);
        }
        if state.lambda() != self.lambda {
            return Err(Error::LambdaMismatch(state.lambda(), self.lambda));
        }
        Ok(())
    }

    pub fn coordinates(&self, state: &FieldState) -> Result<Vec<Complex64>> {
        self.check(state)?;
        let mut x = state.reference_profile();
        x.push(state.charge());
        Ok(x)
    }

    pub fn state(&self, x: &[Complex64]) -> Result<FieldState> {
        let n = self.grid.nodes().len();
        FieldState::from_reference_profile(self.grid.clone(), self.lambda, x[n], &x[..n])
    }

    pub fn real_state(&self, x: &[f64]) -> Result<FieldState> {
        let z: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.state(&z)
    }

    /// `u` at the quadrature points from coordinates.
    fn u_values(&self, x: &[Complex64]) -> Vec<Complex64> {
        let q = x[x.len() - 1];
        self.grid
            .quadrature()
            .iter()
            .map(|p| {
                let j = 2 * p.elem;
                x[j] * p.basis[0] + x[j + 1] * p.basis[1] + x[j + 2] * p.basis[2] + q * p.green_ref
            })
            .collect()
    }

    /// Gram matrix of `⟨u, v⟩ = ∫φ'ψ' + λ∫φψ + (α+ξ_λ) q q_v`.
    pub fn gram(&self) -> BorderedMatrix {
        self.quadratic_matrix(|_, _| 0.0, self.lambda, self.charge_coefficient())
    }

    /// Hessian of the functional at a real state.
    pub fn hessian(&self, state: &FieldState, nl: &dyn Nonlinearity) -> Result<BorderedMatrix> {
        let x = self.coordinates(state)?;
        let u = self.u_values(&x);
        let quad = self.grid.quadrature();
        let gp: Vec<f64> = u.iter().map(|z| nl.dg(z.norm())).collect();
        let lambda = self.lambda;
        let mut m = self.quadratic_matrix(|k, _| gp[k], 0.0, self.charge_coefficient());
        // λ enters the quadratic part of the functional only through the charge couplings.
        let mut corner = -lambda * self.green_norm_sq;
        for (k, p) in quad.iter().enumerate() {
            let j = 2 * p.elem;
            for a in 0..3 {
                m.col[j + a] -= p.w * lambda * p.basis[a] * self.green[k];
                m.row[j + a] -= p.w * lambda * p.basis[a] * self.green[k];
            }
            corner -= 2.0 * lambda * p.w * self.d[k] * self.green[k];
        }
        m.corner += corner;
        Ok(m)
    }

    /// Assembles `∫φ'ψ' + mass ∫φψ - ∫w φ_u ψ_u + charge q q_v`, where
    /// `w(k, r)` weights the `u`-product at quadrature point `k`.
    fn quadratic_matrix(&self, w: impl Fn(usize, f64) -> f64, mass: f64, charge: f64) -> BorderedMatrix {
        let n = self.grid.nodes().len();
        let mut m = BorderedMatrix::zeros(n, 2, 2);
        let mut corner = charge;
        for (k, p) in self.grid.quadrature().iter().enumerate() {
            let j = 2 * p.elem;
            let wk = w(k, p.r);
            let (d, dd, g) = (self.d[k], self.dd[k], p.green_ref);
            for a in 0..3 {
                for b in 0..3 {
                    let v = p.dbasis[a] * p.dbasis[b] + mass * p.basis[a] * p.basis[b] - wk * p.basis[a] * p.basis[b];
                    m.band.add(j + a, j + b, p.w * v);
                }
                let c = p.dbasis[a] * dd + mass * p.basis[a] * d - wk * p.basis[a] * g;
                m.col[j + a] += p.w * c;
                m.row[j + a] += p.w * c;
            }
            corner += p.w * (dd * dd + mass * d * d - wk * g * g);
        }
        m.corner = corner;
        m
    }

    /// Complex weak gradient `F` with `I'(u)[e_k] = Re F_k` and `I'(u)[i e_k] = Im F_k`.
    pub fn gradient(&self, state: &FieldState, nl: &dyn Nonlinearity) -> Result<Vec<Complex64>> {
        let x = self.coordinates(state)?;
        let n = self.grid.nodes().len();
        let q = x[n];
        let lambda = self.lambda;
        let mut f = vec![Complex64::new(0.0, 0.0); n + 1];
        let mut fq = (self.charge_coefficient() - lambda * self.green_norm_sq) * q;
        for (k, p) in self.grid.quadrature().iter().enumerate() {
            let j = 2 * p.elem;
            let c = &x[j..j + 3];
            let ref_val = c[0] * p.basis[0] + c[1] * p.basis[1] + c[2] * p.basis[2];
            let ref_der = c[0] * p.dbasis[0] + c[1] * p.dbasis[1] + c[2] * p.dbasis[2];
            let phi = ref_val + q * self.d[k];
            let dphi = ref_der + q * self.dd[k];
            let u = ref_val + q * p.green_ref;
            let gu = nl.g_complex(u);
            let gl = self.green[k];
            for a in 0..3 {
                f[j + a] += p.w * (dphi * p.dbasis[a] - (lambda * q * gl + gu) * p.basis[a]);
            }
            fq += p.w * (dphi * self.dd[k] - lambda * (phi * gl + q * gl * self.d[k]) - gu * p.green_ref);
        }
        f[n] = fq;
        Ok(f)
    }

    pub fn factor_gram(&self) -> Result<BorderedLu> {
        self.gram().factor()
    }

    /// Riesz representative `A⁻¹F` of a complex gradient (real and imaginary parts separately).
    pub fn riesz(&self, gram: &BorderedLu, f: &[Complex64]) -> Vec<Complex64> {
        let re: Vec<f64> = f.iter().map(|z| z.re).collect();
        let im: Vec<f64> = f.iter().map(|z| z.im).collect();
        let a = gram.solve(&re);
        let b = if im.iter().any(|&v| v != 0.0) { gram.solve(&im) } else { vec![0.0; im.len()] };
        a.into_iter().zip(b).map(|(r, i)| Complex64::new(r, i)).collect()
    }

    /// Dual norm `sqrt(Fᵀ A⁻¹ F)` of the gradient.
    pub fn dual_norm(&self, gram: &BorderedLu, f: &[Complex64]) -> f64 {
        let r = self.riesz(gram, f);
        f.iter().zip(&r).map(|(a, b)| a.re * b.re + a.im * b.im).sum::<f64>().max(0.0).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::make_grid;
    use crate::greens::Dimension;
    use crate::nonlinearity::NonlinearitySpec;

    fn setup(dim: Dimension) -> (Discretization, FieldState) {
        let grid = Arc::new(make_grid(dim, 12.0, 128, 2.0).unwrap());
        let strength = InteractionStrength::new(0.5, dim);
        let st = FieldState::from_real_profile(grid, 1.3, 0.4, |r| 0.8 * (-0.5 * r * r).exp()).unwrap();
        (Discretization::for_state(&st, &strength).unwrap(), st)
    }

    #[test]
    fn gram_reproduces_h1_alpha_norm() {
        for dim in [Dimension::Two, Dimension::Three] {
            let (disc, st) = setup(dim);
            let strength = InteractionStrength::new(0.5, dim);
            let x: Vec<f64> = disc.coordinates(&st).unwrap().iter().map(|z| z.re).collect();
            let ax = disc.gram().matvec(&x);
            let quadratic: f64 = x.iter().zip(&ax).map(|(a, b)| a * b).sum();
            let want = st.h1_alpha_norm_sq(&strength).unwrap().total;
            assert!((quadratic - want).abs() < 1e-10 * want, "{dim:?}: {quadratic} vs {want}");
        }
    }

    #[test]
    fn hessian_is_derivative_of_gradient() {
        // g' of a non-integer power is not Lipschitz at 0, which spoils central differences where u changes sign.
        let nl = NonlinearitySpec::power(1.0, 4.0).unwrap();
        for dim in [Dimension::Two, Dimension::Three] {
            let (disc, st) = setup(dim);
            let x: Vec<f64> = disc.coordinates(&st).unwrap().iter().map(|z| z.re).collect();
            let h = disc.hessian(&st, &nl).unwrap();
            let dir: Vec<f64> = (0..x.len()).map(|i| ((i * 7919) % 13) as f64 / 13.0 - 0.4).collect();
            let hv = h.matvec(&dir);
            let eps = 1e-6;
            let shifted = |s: f64| {
                let y: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + s * b).collect();
                disc.gradient(&disc.real_state(&y).unwrap(), &nl).unwrap()
            };
            let (fp, fm) = (shifted(eps), shifted(-eps));
            let scale = hv.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for i in 0..x.len() {
                let fd = (fp[i].re - fm[i].re) / (2.0 * eps);
                assert!((fd - hv[i]).abs() < 1e-6 * scale, "{dim:?} i={i}: {fd} vs {}", hv[i]);
            }
        }
    }
}
