//! Nonlinearities `g(s) = -ωs + Σ terms`, their primitives, the truncated
//! `h(s) = max{ω₁s + g(s), 0}`, and sampled checks of the structural
//! assumptions used by the existence theory.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::greens::{Dimension, InteractionStrength};
use crate::special::gauss_legendre;

/// The pointwise interface the functional needs. `s` is a magnitude (`s >= 0`);
/// complex arguments use the gauge-invariant extension `g(u) = g(|u|) u/|u|`.
pub trait Nonlinearity: Sync {
    fn g(&self, s: f64) -> f64;
    /// `g'(s)`.
    fn dg(&self, s: f64) -> f64;
    /// `G(s) = ∫_0^s g`.
    fn big_g(&self, s: f64) -> f64;

    fn g_complex(&self, u: Complex64) -> Complex64 {
        let m = u.norm();
        if m == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            u * (self.g(m) / m)
        }
    }

    /// Odd extension to the real line.
    fn g_real(&self, u: f64) -> f64 {
        if u < 0.0 { -self.g(-u) } else { self.g(u) }
    }
}

/// One contribution `coeff · s^{p-1} · f(s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Term {
    /// `coeff s^{p-1}`
    Power { coeff: f64, exponent: f64 },
    /// `coeff s^{p-1} ln(1 + s)`
    LogPower { coeff: f64, exponent: f64 },
    /// `coeff s^{p-1} / (1 + s^{p-q})`
    Saturating { coeff: f64, exponent: f64, q: f64 },
}

impl Term {
    fn exponent(&self) -> f64 {
        match *self {
            Term::Power { exponent, .. } | Term::LogPower { exponent, .. } | Term::Saturating { exponent, .. } => {
                exponent
            }
        }
    }

    fn value(&self, s: f64) -> f64 {
        if s == 0.0 {
            return 0.0;
        }
        match *self {
            Term::Power { coeff, exponent } => coeff * s.powf(exponent - 1.0),
            Term::LogPower { coeff, exponent } => coeff * s.powf(exponent - 1.0) * s.ln_1p(),
            Term::Saturating { coeff, exponent, q } => coeff * s.powf(exponent - 1.0) / (1.0 + s.powf(exponent - q)),
        }
    }

    fn derivative(&self, s: f64) -> f64 {
        if s == 0.0 {
            // Every admissible exponent exceeds 2, so the term is o(s) at the origin.
            return 0.0;
        }
        match *self {
            Term::Power { coeff, exponent } => coeff * (exponent - 1.0) * s.powf(exponent - 2.0),
            Term::LogPower { coeff, exponent } => {
                coeff * ((exponent - 1.0) * s.powf(exponent - 2.0) * s.ln_1p() + s.powf(exponent - 1.0) / (1.0 + s))
            }
            Term::Saturating { coeff, exponent, q } => {
                let a = s.powf(exponent - q);
                let d = 1.0 + a;
                coeff * s.powf(exponent - 2.0) * ((exponent - 1.0) * d - (exponent - q) * a) / (d * d)
            }
        }
    }

    fn primitive(&self, s: f64) -> f64 {
        match *self {
            Term::Power { coeff, exponent } => coeff * s.powf(exponent) / exponent,
            _ => integrate_from_zero(|t| self.value(t), s),
        }
    }

    fn validate(&self) -> Result<()> {
        let p = self.exponent();
        if !(p > 2.0) || !p.is_finite() {
            return Err(Error::Nonlinearity(format!("term exponents must exceed 2, got {p}")));
        }
        if let Term::Saturating { q, .. } = *self {
            if !(q > 2.0) || !(q < p) {
                return Err(Error::Nonlinearity(format!("saturating term needs 2 < q < p, got q = {q}")));
            }
        }
        Ok(())
    }
}

/// `∫_0^s f` on the geometric cells `[s 2^{-k-1}, s 2^{-k}]`, which resolves
/// non-integer powers at the origin.
fn integrate_from_zero(f: impl Fn(f64) -> f64, s: f64) -> f64 {
    thread_local! {
        static RULE: (Vec<f64>, Vec<f64>) = gauss_legendre(12);
    }
    if s == 0.0 {
        return 0.0;
    }
    RULE.with(|(x, w)| {
        let mut total = 0.0;
        let mut b = s;
        for _ in 0..64 {
            let a = 0.5 * b;
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            total += x.iter().zip(w).map(|(xi, wi)| wi * f(mid + half * xi)).sum::<f64>() * half;
            b = a;
        }
        total
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySpec {
    pub omega: f64,
    pub terms: Vec<Term>,
    pub p_growth: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta_hint: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega1: Option<f64>,
}

impl NonlinearitySpec {
    pub fn new(omega: f64, terms: Vec<Term>, p_growth: f64) -> Result<Self> {
        let spec = Self { omega, terms, p_growth, beta: None, zeta_hint: None, omega1: None };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::Nonlinearity(format!("omega must be positive, got {}", self.omega)));
        }
        if self.terms.is_empty() {
            return Err(Error::Nonlinearity("at least one nonlinear term is required".into()));
        }
        for t in &self.terms {
            t.validate()?;
        }
        if !(self.p_growth > 2.0) {
            return Err(Error::Nonlinearity(format!("growth exponent must exceed 2, got {}", self.p_growth)));
        }
        if let Some(b) = self.beta {
            if !(b > 2.0) {
                return Err(Error::Nonlinearity(format!("beta must exceed 2, got {b}")));
            }
        }
        if let Some(z) = self.zeta_hint {
            if !(z > 0.0) {
                return Err(Error::Nonlinearity(format!("zeta hint must be positive, got {z}")));
            }
        }
        Ok(())
    }

    /// `g(s) = -ωs + s^{p-1}`; pure powers satisfy the superquadratic condition with `β = p`.
    pub fn power(omega: f64, p: f64) -> Result<Self> {
        let mut s = Self::new(omega, vec![Term::Power { coeff: 1.0, exponent: p }], p)?;
        s.beta = Some(p);
        Ok(s)
    }

    /// `g(s) = -ωs + μ s^{p1-1} + σ s^{p2-1}` with `σ = ±1`.
    pub fn double_power(omega: f64, mu: f64, p1: f64, sign: f64, p2: f64) -> Result<Self> {
        if !(p1 < p2) {
            return Err(Error::Nonlinearity(format!("double power needs p1 < p2, got {p1}, {p2}")));
        }
        Self::new(
            omega,
            vec![Term::Power { coeff: mu, exponent: p1 }, Term::Power { coeff: sign.signum(), exponent: p2 }],
            p2,
        )
    }

    /// `g(s) = -ωs + s^{p-1} ln(1+s)`. The log factor pushes the growth
    /// exponent just above `p`; `p_growth` is set to `p + 0.05`.
    pub fn log_power(omega: f64, p: f64) -> Result<Self> {
        Self::new(omega, vec![Term::LogPower { coeff: 1.0, exponent: p }], p + 0.05)
    }

    /// `g(s) = -ωs + s^{p-1}/(1 + s^{p-q})`, which grows like `s^{q-1}`.
    pub fn saturating(omega: f64, p: f64, q: f64) -> Result<Self> {
        Self::new(omega, vec![Term::Saturating { coeff: 1.0, exponent: p, q }], p.max(q))
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = Some(beta);
        self
    }

    pub fn with_omega1(mut self, omega1: f64) -> Self {
        self.omega1 = Some(omega1);
        self
    }

    /// The configured `ω₁`, or the midpoint of `(ω_α, ω)`.
    pub fn omega1(&self, strength: &InteractionStrength) -> f64 {
        self.omega1.unwrap_or_else(|| 0.5 * (strength.omega_alpha() + self.omega))
    }

    /// `h(s) = max{ω₁s + g(s), 0}`.
    pub fn h(&self, s: f64, omega1: f64) -> f64 {
        (omega1 * s + self.g(s)).max(0.0)
    }

    /// `H(s) = ∫_0^s h`: the primitive of `ω₁t + g(t)` summed over the
    /// intervals where it is positive.
    pub fn big_h(&self, s: f64, omega1: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let f = |t: f64| omega1 * t + self.g(t);
        let prim = |t: f64| 0.5 * omega1 * t * t + self.big_g(t);
        // Sign changes of f on a log-spaced scan, refined by bisection.
        let mut breaks = vec![0.0];
        let n = 400;
        let lo = (s * 1e-12).ln();
        let mut prev_t = 0.0;
        let mut prev_pos = false;
        for k in 0..=n {
            let t = (lo + (s.ln() - lo) * k as f64 / n as f64).exp();
            let pos = f(t) > 0.0;
            if k > 0 && pos != prev_pos {
                let (mut a, mut b) = (prev_t, t);
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    if (f(m) > 0.0) == prev_pos {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                breaks.push(0.5 * (a + b));
            }
            prev_t = t;
            prev_pos = pos;
        }
        breaks.push(s);
        breaks
            .windows(2)
            .filter(|w| f(0.5 * (w[0] + w[1])) > 0.0)
            .map(|w| prim(w[1]) - prim(w[0]))
            .sum()
    }

    /// `h(s) = g(s) + ωs` and its primitive, used by the superquadratic condition.
    pub fn h_shifted(&self, s: f64) -> f64 {
        self.terms.iter().map(|t| t.value(s)).sum()
    }

    pub fn big_h_shifted(&self, s: f64) -> f64 {
        self.terms.iter().map(|t| t.primitive(s)).sum()
    }

    /// Largest term exponent (the leading power at infinity for pure powers).
    pub fn leading_exponent(&self) -> f64 {
        self.terms.iter().map(Term::exponent).fold(f64::NEG_INFINITY, f64::max)
    }
}

impl Nonlinearity for NonlinearitySpec {
    fn g(&self, s: f64) -> f64 {
        -self.omega * s + self.terms.iter().map(|t| t.value(s)).sum::<f64>()
    }

    fn dg(&self, s: f64) -> f64 {
        -self.omega + self.terms.iter().map(|t| t.derivative(s)).sum::<f64>()
    }

    fn big_g(&self, s: f64) -> f64 {
        -0.5 * self.omega * s * s + self.terms.iter().map(|t| t.primitive(s)).sum::<f64>()
    }
}

/// `|g(s)| <= c1 s + c2 s^{p-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthBounds {
    pub c1: f64,
    pub c2: f64,
}

fn log_samples(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(move |k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
}

/// Constants from samples on `[1e-8, 1e8]`: `c1` bounds `|g|/s` below 1, `c2` bounds `|g|/s^{p-1}` above.
pub fn growth_bounds(spec: &NonlinearitySpec) -> GrowthBounds {
    let p = spec.p_growth;
    let mut c1: f64 = 0.0;
    let mut c2: f64 = 0.0;
    for s in log_samples(1e-8, 1e8, 801) {
        let g = spec.g(s).abs();
        if s <= 1.0 {
            c1 = c1.max(g / s);
        } else {
            c2 = c2.max(g / s.powf(p - 1.0));
        }
    }
    GrowthBounds { c1, c2: c2.max(f64::MIN_POSITIVE) }
}

/// Smallest `C_ε` with `h(s) <= εs + C_ε s^{p-1}` on the sample grid.
pub fn h_envelope(spec: &NonlinearitySpec, omega1: f64, eps: f64) -> f64 {
    let p = spec.p_growth;
    log_samples(1e-8, 1e8, 801)
        .map(|s| ((spec.h(s, omega1) - eps * s) / s.powf(p - 1.0)).max(0.0))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Outcome of the sampled assumption checks. `repulsive_regime` covers
/// `N = 3, α > 0` under (g1)-(g4); `superquadratic_regime` covers
/// `N = 3, α <= 0` or `N = 2` under (g1)-(g3) and (g5).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub entries: Vec<CheckEntry>,
    pub omega_alpha: f64,
    pub omega1: f64,
    pub zeta: Option<f64>,
    pub repulsive_regime: bool,
    pub superquadratic_regime: bool,
}

impl AssumptionReport {
    pub fn passed(&self, name: &str) -> bool {
        self.entries.iter().any(|e| e.name == name && e.passed)
    }

    pub fn any_existence_result_applies(&self) -> bool {
        self.repulsive_regime || self.superquadratic_regime
    }
}

/// Tolerance for sampled limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckThresholds {
    pub small_slope_tol: f64,
    pub large_ratio_tol: f64,
}

impl Default for CheckThresholds {
    fn default() -> Self {
        Self { small_slope_tol: 1e-3, large_ratio_tol: 1e-6 }
    }
}

pub fn check_assumptions(spec: &NonlinearitySpec, strength: &InteractionStrength) -> AssumptionReport {
    check_assumptions_with(spec, strength, CheckThresholds::default())
}

pub fn check_assumptions_with(
    spec: &NonlinearitySpec,
    strength: &InteractionStrength,
    tol: CheckThresholds,
) -> AssumptionReport {
    let dim = strength.dim;
    let omega_alpha = strength.omega_alpha();
    let omega1 = spec.omega1(strength);
    let mut entries = Vec::new();
    let mut push = |name: &str, passed: bool, detail: String| {
        entries.push(CheckEntry { name: name.into(), passed, detail });
    };

    let finite = log_samples(1e-8, 1e8, 401).all(|s| spec.g(s).is_finite());
    push("g1", spec.g(0.0) == 0.0 && finite, format!("g(0) = {}, finite on samples: {finite}", spec.g(0.0)));

    let slopes: Vec<f64> = [1e-4, 1e-6, 1e-8].iter().map(|&s| spec.g(s) / s).collect();
    let limit_ok = (slopes[2] + spec.omega).abs() <= tol.small_slope_tol * spec.omega;
    let above = spec.omega > omega_alpha;
    push(
        "g2",
        limit_ok && above,
        format!(
            "g(s)/s at s = 1e-4, 1e-6, 1e-8: {slopes:?}; omega = {} {} omega_alpha = {omega_alpha}",
            spec.omega,
            if above { ">" } else { "<=" }
        ),
    );

    let p = spec.p_growth;
    let (p_ok, range) = match dim {
        Dimension::Three => (p > 2.0 && p < 3.0, "2 < p < 3"),
        Dimension::Two => (p > 2.0, "p > 2"),
    };
    let ratios: Vec<f64> = [1e6, 1e7, 1e8].iter().map(|&s| spec.g(s) / s.powf(p - 1.0)).collect();
    let bounded = ratios.iter().all(|r| r.is_finite()) && ratios[2] > -1e12;
    // A positive finite limit still satisfies the condition for every slightly larger admissible p.
    let sign_ok = ratios[2] <= tol.large_ratio_tol || p_ok;
    push(
        "g3",
        p_ok && bounded && sign_ok,
        format!("p = {p} (need {range}); g(s)/s^(p-1) at s = 1e6, 1e7, 1e8: {ratios:?}"),
    );

    let zeta = match spec.zeta_hint {
        Some(z) if spec.big_g(z) > 0.0 => Some(z),
        _ => log_samples(1e-3, 1e6, 2001).find(|&s| spec.big_g(s) > 0.0),
    };
    push(
        "g4",
        zeta.is_some(),
        match zeta {
            Some(z) => format!("G({z}) = {} > 0", spec.big_g(z)),
            None => "no zeta with G(zeta) > 0 found on [1e-3, 1e6]".into(),
        },
    );

    match spec.beta {
        Some(beta) => {
            let mut worst = f64::NEG_INFINITY;
            let mut positive = true;
            for s in log_samples(1e-6, 1e6, 601) {
                let bh = beta * spec.big_h_shifted(s);
                let hs = spec.h_shifted(s) * s;
                positive &= bh > 0.0;
                worst = worst.max((bh - hs) / hs.abs().max(f64::MIN_POSITIVE));
            }
            let ok = beta > 2.0 && positive && worst <= 1e-10;
            push("g5", ok, format!("beta = {beta}; max relative excess of beta*H over h*s: {worst:e}"));
        }
        None => push("g5", false, "beta not provided".into()),
    }

    let omega1_ok = omega1 > omega_alpha && omega1 < spec.omega;
    push("omega1", omega1_ok, format!("omega1 = {omega1} in ({omega_alpha}, {})", spec.omega));

    let ok = |n: &str| entries.iter().any(|e| e.name == n && e.passed);
    let base = ok("g1") && ok("g2") && ok("g3");
    let repulsive_regime = dim == Dimension::Three && strength.alpha > 0.0 && base && ok("g4");
    let superquadratic_regime = (dim == Dimension::Two || strength.alpha <= 0.0) && base && ok("g5");
    AssumptionReport { entries, omega_alpha, omega1, zeta, repulsive_regime, superquadratic_regime }
}
