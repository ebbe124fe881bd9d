//! Monotone piecewise-cubic Hermite interpolation (Fritsch-Carlson slopes).

#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    /// `x` must be strictly increasing with at least two points.
    pub fn new(x: &[f64], y: &[f64]) -> Self {
        assert!(x.len() >= 2 && x.len() == y.len());
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        d[0] = end_slope(h[0], h.get(1).copied(), delta[0], delta.get(1).copied());
        d[n - 1] = end_slope(
            h[n - 2],
            n.checked_sub(3).map(|i| h[i]),
            delta[n - 2],
            n.checked_sub(3).map(|i| delta[i]),
        );
        for i in 1..n - 1 {
            if delta[i - 1] * delta[i] > 0.0 {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        Self { x: x.to_vec(), y: y.to_vec(), d }
    }

    /// Evaluate at `t`; outside the node range the end value is held constant.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0];
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let i = self.x.partition_point(|&v| v <= t) - 1;
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1]
    }
}

// Three-point one-sided slope, limited so the end interval stays monotone.
fn end_slope(h0: f64, h1: Option<f64>, del0: f64, del1: Option<f64>) -> f64 {
    let (Some(h1), Some(del1)) = (h1, del1) else {
        return del0;
    };
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d * del0 <= 0.0 {
        0.0
    } else if del0 * del1 <= 0.0 && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reproduces_nodes_and_cubics_on_uniform_data() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| (-v).exp()).collect();
        let f = MonotoneCubic::new(&x, &y);
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(f.eval(*xi), *yi);
        }
        let err = (f.eval(2.05) - (-2.05f64).exp()).abs();
        assert!(err < 1e-5, "{err}");
    }

    proptest! {
        #[test]
        fn preserves_monotonicity(steps in proptest::collection::vec(0.0f64..1.0, 5..30), t in 0.0f64..1.0) {
            let x: Vec<f64> = (0..steps.len()).map(|i| i as f64).collect();
            let mut acc = 0.0;
            let y: Vec<f64> = steps.iter().map(|s| { acc += s; acc }).collect();
            let f = MonotoneCubic::new(&x, &y);
            let a = t * (x.len() - 1) as f64;
            let b = (a + 0.01).min((x.len() - 1) as f64);
            prop_assert!(f.eval(b) >= f.eval(a) - 1e-12);
        }
    }
}
