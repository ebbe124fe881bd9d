//! Modified Bessel functions of order zero and one, plus Gauss-Legendre rules.
//!
//! `K0`/`K1` use the ascending series for `z <= 2` and Steed's continued
//! fraction (Temme's CF2) above. Both branches agree to ~1e-15 relative at
//! the switch point. The series forms are also exposed with their logarithmic
//! part split off so that differences of Green's functions stay accurate near
//! the origin.

/// Euler-Mascheroni constant to 20 significant digits.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Argument at which `K0`/`K1` switch from the power series to the continued fraction.
pub const SERIES_SWITCH: f64 = 2.0;

const MAX_TERMS: usize = 200;

/// `I0(z)` by its power series. Accurate for moderate `z` (used for `z <= 2`).
pub fn bessel_i0_series(z: f64) -> f64 {
    let t = 0.25 * z * z;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        term *= t / (kf * kf);
        sum += term;
        if term < f64::EPSILON * sum {
            break;
        }
    }
    sum
}

/// `I1(z)` by its power series.
pub fn bessel_i1_series(z: f64) -> f64 {
    let t = 0.25 * z * z;
    let mut term = 0.5 * z;
    let mut sum = term;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        term *= t / (kf * (kf + 1.0));
        sum += term;
        if term.abs() < f64::EPSILON * sum.abs() {
            break;
        }
    }
    sum
}

/// The non-logarithmic part of `K0`: `K0(z) = -ln(z/2) I0(z) + k0_regular_series(z)`.
///
/// Equals `sum_k psi(k+1) (z^2/4)^k / (k!)^2`.
pub fn k0_regular_series(z: f64) -> f64 {
    let t = 0.25 * z * z;
    let mut coeff = 1.0; // t^k / (k!)^2
    let mut psi = -EULER_GAMMA;
    let mut sum = psi;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        coeff *= t / (kf * kf);
        psi += 1.0 / kf;
        let term = coeff * psi;
        sum += term;
        if term.abs() < f64::EPSILON * sum.abs().max(f64::MIN_POSITIVE) && k > 2 {
            break;
        }
    }
    sum
}

/// `z K1(z) - 1` from the ascending series; well defined and `O(z^2 ln z)` at zero.
pub fn z_k1_minus_one_series(z: f64) -> f64 {
    if z == 0.0 {
        return 0.0;
    }
    let t = 0.25 * z * z;
    // sum_k (psi(k+1) + psi(k+2)) t^k / (k! (k+1)!)
    let mut coeff = 1.0;
    let mut psi1 = -EULER_GAMMA;
    let mut psi2 = 1.0 - EULER_GAMMA;
    let mut sum = psi1 + psi2;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        coeff *= t / (kf * (kf + 1.0));
        psi1 += 1.0 / kf;
        psi2 += 1.0 / (kf + 1.0);
        let term = coeff * (psi1 + psi2);
        sum += term;
        if term.abs() < f64::EPSILON * sum.abs() && k > 2 {
            break;
        }
    }
    z * (0.5 * z).ln() * bessel_i1_series(z) - t * sum
}

fn k0_series(z: f64) -> f64 {
    -(0.5 * z).ln() * bessel_i0_series(z) + k0_regular_series(z)
}

fn k1_series(z: f64) -> f64 {
    (1.0 + z_k1_minus_one_series(z)) / z
}

/// Steed's algorithm for `(e^z K0(z), e^z K1(z))`, valid for `z >= 1`.
fn k01_scaled_cf2(z: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + z);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut a = -a1;
    let mut c = a1;
    let mut q = c;
    let mut s = 1.0 + q * delh;
    for i in 2..10_000 {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < f64::EPSILON {
            break;
        }
    }
    h *= a1;
    let k0 = (std::f64::consts::PI / (2.0 * z)).sqrt() / s;
    let k1 = k0 * (z + 0.5 - h) / z;
    (k0, k1)
}

/// Modified Bessel function of the second kind, order zero. Requires `z > 0`.
pub fn bessel_k0(z: f64) -> f64 {
    debug_assert!(z > 0.0);
    if z <= SERIES_SWITCH {
        k0_series(z)
    } else {
        k01_scaled_cf2(z).0 * (-z).exp()
    }
}

/// Modified Bessel function of the second kind, order one. Requires `z > 0`.
pub fn bessel_k1(z: f64) -> f64 {
    debug_assert!(z > 0.0);
    if z <= SERIES_SWITCH {
        k1_series(z)
    } else {
        k01_scaled_cf2(z).1 * (-z).exp()
    }
}

/// Series branch of `K0`, exposed for cross-checks.
pub fn bessel_k0_by_series(z: f64) -> f64 {
    k0_series(z)
}

/// Continued-fraction branch of `K0`, exposed for cross-checks (`z >= 1`).
pub fn bessel_k0_by_continued_fraction(z: f64) -> f64 {
    k01_scaled_cf2(z).0 * (-z).exp()
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * x * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (x * p0 - p1) / (x * x - 1.0);
            let dx = p0 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent oracle: K0(z) = int_0^inf exp(-z cosh t) dt, trapezoid rule
    // (exponentially convergent for this integrand).
    fn k0_integral(z: f64) -> f64 {
        let h: f64 = 1.0 / 64.0;
        let mut sum = 0.5 * (-z).exp();
        let mut t = h;
        loop {
            let v = (-z * t.cosh()).exp();
            sum += v;
            if v < 1e-300 || t > 40.0 {
                break;
            }
            t += h;
        }
        sum * h
    }

    fn k1_integral(z: f64) -> f64 {
        let h: f64 = 1.0 / 64.0;
        let mut sum = 0.5 * (-z).exp();
        let mut t = h;
        loop {
            let v = (-z * t.cosh()).exp() * t.cosh();
            sum += v;
            if v < 1e-300 || t > 40.0 {
                break;
            }
            t += h;
        }
        sum * h
    }

    #[test]
    fn k0_matches_integral_representation() {
        for &z in &[1e-6, 1e-3, 0.1, 0.5, 1.0, 1.5, 1.999, 2.0, 2.001, 3.0, 5.0, 10.0, 25.0, 60.0] {
            let want = k0_integral(z);
            let got = bessel_k0(z);
            assert!(((got - want) / want).abs() < 1e-12, "z={z}: {got} vs {want}");
        }
    }

    #[test]
    fn k1_matches_integral_representation() {
        for &z in &[1e-2, 0.1, 1.0, 2.0, 2.5, 7.0, 30.0] {
            let want = k1_integral(z);
            let got = bessel_k1(z);
            assert!(((got - want) / want).abs() < 1e-12, "z={z}: {got} vs {want}");
        }
    }

    #[test]
    fn branches_agree_at_switch() {
        for &z in &[1.5, 1.8, 2.0, 2.2, 2.5] {
            let a = bessel_k0_by_series(z);
            let b = bessel_k0_by_continued_fraction(z);
            assert!(((a - b) / b).abs() < 1e-12, "z={z}");
        }
    }

    #[test]
    fn k0_at_one() {
        // DLMF tabulated value.
        assert!((bessel_k0(1.0) - 0.421_024_438_240_708_3).abs() < 1e-15);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }
}
