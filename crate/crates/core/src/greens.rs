//! Green's function of `-Δ + λ` in two and three dimensions and the scalar
//! quantities built from it: `ξ_λ`, the threshold `ω_α`, closed-form norms.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{
    bessel_i0_series, bessel_k0, bessel_k1, gauss_legendre, k0_regular_series, z_k1_minus_one_series, EULER_GAMMA,
    SERIES_SWITCH,
};

/// Spatial dimension. Only 2 and 3 are constructible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum Dimension {
    Two,
    Three,
}

impl Dimension {
    pub fn new(n: i64) -> Result<Self> {
        match n {
            2 => Ok(Dimension::Two),
            3 => Ok(Dimension::Three),
            other => Err(Error::Dimension(other)),
        }
    }

    pub fn value(self) -> i32 {
        match self {
            Dimension::Two => 2,
            Dimension::Three => 3,
        }
    }

    pub fn as_f64(self) -> f64 {
        self.value() as f64
    }

    /// Surface area of the unit sphere `S^{N-1}`.
    pub fn sphere_area(self) -> f64 {
        match self {
            Dimension::Two => 2.0 * PI,
            Dimension::Three => 4.0 * PI,
        }
    }

    /// Radial measure density `|S^{N-1}| r^{N-1}`.
    pub fn measure(self, r: f64) -> f64 {
        match self {
            Dimension::Two => 2.0 * PI * r,
            Dimension::Three => 4.0 * PI * r * r,
        }
    }

    /// Volume of the ball of radius `r`.
    pub fn ball_volume(self, r: f64) -> f64 {
        match self {
            Dimension::Two => PI * r * r,
            Dimension::Three => 4.0 / 3.0 * PI * r * r * r,
        }
    }
}

impl TryFrom<i64> for Dimension {
    type Error = Error;
    fn try_from(n: i64) -> Result<Self> {
        Dimension::new(n)
    }
}

impl From<Dimension> for i64 {
    fn from(d: Dimension) -> i64 {
        d.value() as i64
    }
}

/// The kernel `G_λ` for a given dimension and spectral shift `λ > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenKernel {
    dim: Dimension,
    lambda: f64,
}

/// Interaction strength `α` of the point interaction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionStrength {
    pub alpha: f64,
    pub dim: Dimension,
}

impl InteractionStrength {
    pub fn new(alpha: f64, dim: Dimension) -> Self {
        Self { alpha, dim }
    }

    pub fn omega_alpha(&self) -> f64 {
        omega_alpha(self)
    }
}

/// Result of an `L^p` norm query. Outside the integrability range the norm is
/// reported as a typed signal instead of a number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LpNorm {
    Finite(f64),
    NotIntegrable { p: f64, dim: Dimension },
}

impl LpNorm {
    pub fn finite(self) -> Option<f64> {
        match self {
            LpNorm::Finite(v) => Some(v),
            LpNorm::NotIntegrable { .. } => None,
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("lambda must be positive, got {lambda}")))
    }
}

impl GreenKernel {
    pub fn new(dim: Dimension, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self { dim, lambda })
    }

    pub fn dim(&self) -> Dimension {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Decay rate `√λ`.
    pub fn kappa(&self) -> f64 {
        self.lambda.sqrt()
    }

    /// `G_λ(r)` for `r > 0`; panics in debug builds on `r <= 0`. See [`green_value`].
    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        debug_assert!(r > 0.0);
        let k = self.kappa();
        match self.dim {
            Dimension::Three => (-k * r).exp() / (4.0 * PI * r),
            Dimension::Two => bessel_k0(k * r) / (2.0 * PI),
        }
    }

    /// `dG_λ/dr`. Diagnostic only in two dimensions near the origin.
    pub fn derivative(&self, r: f64) -> f64 {
        let k = self.kappa();
        match self.dim {
            Dimension::Three => -(-k * r).exp() * (1.0 + k * r) / (4.0 * PI * r * r),
            Dimension::Two => -k * bessel_k1(k * r) / (2.0 * PI),
        }
    }

    pub fn xi(&self) -> f64 {
        xi_unchecked(self.dim, self.lambda)
    }

    /// `‖G_λ‖²₂` in closed form.
    pub fn l2_norm_sq(&self) -> f64 {
        match self.dim {
            Dimension::Three => self.xi() / (2.0 * self.lambda),
            Dimension::Two => 1.0 / (4.0 * PI * self.lambda),
        }
    }

    /// `G_λ(x) - G_sing(x)` as `x -> 0`, equal to `-ξ_λ`.
    pub fn regular_part_at_origin(&self) -> f64 {
        -self.xi()
    }

    /// `‖G_λ‖_p`, or the not-integrable signal outside `1 <= p < 3` (N=3) / `1 <= p < ∞` (N=2).
    pub fn lp_norm(&self, p: f64) -> Result<LpNorm> {
        if !(p >= 1.0) {
            return Err(Error::Domain(format!("p must be >= 1, got {p}")));
        }
        match self.dim {
            Dimension::Three => {
                if p >= 3.0 {
                    return Ok(LpNorm::NotIntegrable { p, dim: self.dim });
                }
                let k = self.kappa();
                let gamma = statrs::function::gamma::gamma(3.0 - p);
                let inner = gamma / (p * k).powf(3.0 - p);
                Ok(LpNorm::Finite((4.0 * PI).powf((1.0 - p) / p) * inner.powf(1.0 / p)))
            }
            Dimension::Two => {
                if !p.is_finite() {
                    return Ok(LpNorm::NotIntegrable { p, dim: self.dim });
                }
                let integral = k0_power_moment(p);
                let total = (2.0 * PI).powf(1.0 - p) / self.lambda * integral;
                Ok(LpNorm::Finite(total.powf(1.0 / p)))
            }
        }
    }
}

/// `∫_0^∞ K0(s)^p s ds` by the trapezoid rule in `x = ln s`, halving the step
/// until successive estimates agree.
fn k0_power_moment(p: f64) -> f64 {
    let lo = -60.0;
    let hi = (60.0 / p).ln() + 2.0;
    let f = |x: f64| {
        let s = x.exp();
        bessel_k0(s).powf(p) * s * s
    };
    let mut n = 256usize;
    let mut prev = f64::NAN;
    loop {
        let h = (hi - lo) / n as f64;
        let mut sum = 0.5 * (f(lo) + f(hi));
        for i in 1..n {
            sum += f(lo + i as f64 * h);
        }
        let est = sum * h;
        if (est - prev).abs() <= 1e-14 * est.abs() || n > 1 << 20 {
            return est;
        }
        prev = est;
        n *= 2;
    }
}

/// `‖G_λ‖²₂` by Gauss-Legendre quadrature in `s = √λ r`: dyadic cells on
/// `(0, 1]`, where the planar kernel is log-singular, then unit cells up to `s = 40`.
pub fn l2_norm_sq_by_quadrature(kernel: &GreenKernel) -> f64 {
    let (x, w) = gauss_legendre(20);
    let k = kernel.kappa();
    let mut cells: Vec<(f64, f64)> = (0..60).map(|j| (2f64.powi(-j - 1), 2f64.powi(-j))).collect();
    cells.extend((1..40).map(|j| (j as f64, j as f64 + 1.0)));
    let mut total = 0.0;
    for (a, b) in cells {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        for (xi, wi) in x.iter().zip(&w) {
            let r = (mid + half * xi) / k;
            total += wi * half / k * kernel.dim.measure(r) * kernel.eval(r).powi(2);
        }
    }
    total
}

/// `lim_{r→0} (G_λ(r) - G_sing(r))` from point values: one Richardson step
/// in three dimensions, where the remainder is `O(r)`; a direct value at
/// `√λ r = 10⁻⁷` in two, where it is `O(r² ln r)`.
pub fn regular_part_by_limit(kernel: &GreenKernel) -> f64 {
    let f = |r: f64| kernel.eval(r) - singular_part(kernel.dim, r);
    match kernel.dim {
        Dimension::Three => {
            let r = 1e-5 / kernel.kappa();
            2.0 * f(0.5 * r) - f(r)
        }
        Dimension::Two => f(1e-7 / kernel.kappa()),
    }
}

/// `G_λ(r)`; the kernel is singular at the origin so `r <= 0` is a domain error.
pub fn green_value(kernel: &GreenKernel, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!(
            "G_lambda is singular at the origin; r must be positive, got {r}"
        )));
    }
    Ok(kernel.eval(r))
}

fn xi_unchecked(dim: Dimension, lambda: f64) -> f64 {
    match dim {
        Dimension::Three => lambda.sqrt() / (4.0 * PI),
        Dimension::Two => ((0.5 * lambda.sqrt()).ln() + EULER_GAMMA) / (2.0 * PI),
    }
}

/// `ξ_λ`, minus the regular part of `G_λ` at the origin. May be negative for N=2.
pub fn xi(dim: Dimension, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(xi_unchecked(dim, lambda))
}

/// `ω_α`, the magnitude of the negative eigenvalue (0 for N=3, α ≥ 0).
pub fn omega_alpha(strength: &InteractionStrength) -> f64 {
    let a = strength.alpha;
    match strength.dim {
        Dimension::Two => 4.0 * (-4.0 * PI * a - 2.0 * EULER_GAMMA).exp(),
        Dimension::Three => {
            if a < 0.0 {
                (4.0 * PI * a).powi(2)
            } else {
                0.0
            }
        }
    }
}

/// `G_{λ1}(r) - G_{λ2}(r)`, evaluated without cancellation near the origin.
/// Bounded as `r -> 0` with limit `ξ_{λ2} - ξ_{λ1}`; `r = 0` returns that limit.
pub fn green_difference(dim: Dimension, lambda1: f64, lambda2: f64, r: f64) -> f64 {
    if lambda1 == lambda2 {
        return 0.0;
    }
    if r == 0.0 {
        return xi_unchecked(dim, lambda2) - xi_unchecked(dim, lambda1);
    }
    let a = lambda1.sqrt();
    let b = lambda2.sqrt();
    match dim {
        Dimension::Three => {
            // e^{-ar} - e^{-br} = -e^{-ar} expm1(-(b-a) r)
            -(-a * r).exp() * (-(b - a) * r).exp_m1() / (4.0 * PI * r)
        }
        Dimension::Two => {
            let (za, zb) = (a * r, b * r);
            if za.max(zb) <= SERIES_SWITCH {
                let i0a = bessel_i0_series(za);
                let i0b = bessel_i0_series(zb);
                let v = -(0.5 * za).ln() * (i0a - i0b) - (a / b).ln() * i0b
                    + k0_regular_series(za)
                    - k0_regular_series(zb);
                v / (2.0 * PI)
            } else {
                (bessel_k0(za) - bessel_k0(zb)) / (2.0 * PI)
            }
        }
    }
}

/// `d/dr [G_{λ1}(r) - G_{λ2}(r)]`, accurate near the origin.
pub fn green_difference_derivative(dim: Dimension, lambda1: f64, lambda2: f64, r: f64) -> f64 {
    if lambda1 == lambda2 {
        return 0.0;
    }
    let a = lambda1.sqrt();
    let b = lambda2.sqrt();
    match dim {
        Dimension::Three => {
            if a.max(b) * r < 0.5 {
                // (1/4π) Σ_{k≥2} ((-a)^k - (-b)^k) (k-1) r^{k-2} / k!
                let mut pa = a * a;
                let mut pb = b * b;
                let mut rk = 1.0;
                let mut fact = 2.0;
                let mut sum = 0.0;
                for k in 2..40 {
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    let term = sign * (pa - pb) * (k as f64 - 1.0) * rk / fact;
                    sum += term;
                    if term.abs() < 1e-18 * sum.abs().max(1e-300) {
                        break;
                    }
                    pa *= a;
                    pb *= b;
                    rk *= r;
                    fact *= (k + 1) as f64;
                }
                sum / (4.0 * PI)
            } else {
                let ga = GreenKernel { dim, lambda: lambda1 };
                let gb = GreenKernel { dim, lambda: lambda2 };
                ga.derivative(r) - gb.derivative(r)
            }
        }
        Dimension::Two => {
            let (za, zb) = (a * r, b * r);
            if za.max(zb) <= SERIES_SWITCH {
                (z_k1_minus_one_series(zb) - z_k1_minus_one_series(za)) / (2.0 * PI * r)
            } else {
                (-a * bessel_k1(za) + b * bessel_k1(zb)) / (2.0 * PI)
            }
        }
    }
}

/// Fundamental solution of `-Δ` (the λ-independent singular part of `G_λ`).
pub fn singular_part(dim: Dimension, r: f64) -> f64 {
    match dim {
        Dimension::Three => 1.0 / (4.0 * PI * r),
        Dimension::Two => -r.ln() / (2.0 * PI),
    }
}
