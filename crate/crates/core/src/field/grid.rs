use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::greens::{Dimension, GreenKernel};
use crate::special::gauss_legendre;

pub const MIN_INTERVALS: usize = 64;

/// Gauss points per quadrature cell.
const GAUSS_ORDER: usize = 10;

/// The first element is split into cells `[h 2^{-k-1}, h 2^{-k}]`, `k < levels`.
/// In 3D `G(qG_λ)` behaves like `r^{-p}` with `p` up to 3, so the uncovered
/// core `[0, h 2^{-levels}]` contributes `O(2^{-levels (3-p)})`.
fn first_cell_levels(dim: Dimension) -> i32 {
    match dim {
        Dimension::Two => 48,
        Dimension::Three => 128,
    }
}

/// Decay lengths of the reference kernel that fit into the grid: `λ_ref = (20 / r_max)²`.
const REFERENCE_DECAY_LENGTHS: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    pub dim: Dimension,
    pub r_max: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub grading_exponent: f64,
}

/// A quadrature point with the measure `|S^{N-1}| r^{N-1}` folded into `w`.
/// `basis`/`dbasis` are the three local quadratic shape functions of element
/// `elem` (nodes `2 elem`, `2 elem + 1`, `2 elem + 2`) and their r-derivatives.
#[derive(Debug, Clone, Copy)]
pub struct QuadPoint {
    pub r: f64,
    pub w: f64,
    pub elem: usize,
    pub basis: [f64; 3],
    pub dbasis: [f64; 3],
    /// `G_{λ_ref}(r)`.
    pub green_ref: f64,
}

/// Graded radial mesh `r_i = r_max (i/M)^γ`, carrying quadratic elements on
/// consecutive node pairs. `M` must be even.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    params: GridParams,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    quad: Vec<QuadPoint>,
    reference_lambda: f64,
}

impl PartialEq for RadialGrid {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
    }
}

/// Default grading: `max(2, 1/(3-p))` for growth exponent `p < 3`, otherwise 2.
pub fn default_grading(p: Option<f64>) -> f64 {
    match p {
        Some(p) if p < 3.0 => (1.0 / (3.0 - p)).max(2.0),
        _ => 2.0,
    }
}

/// Default truncation radius `20 / √λ_min`.
pub fn default_r_max(lambda_min: f64) -> f64 {
    REFERENCE_DECAY_LENGTHS / lambda_min.sqrt()
}

pub fn make_grid(dim: Dimension, r_max: f64, m: usize, grading_exponent: f64) -> Result<RadialGrid> {
    RadialGrid::new(GridParams { dim, r_max, m, grading_exponent })
}

impl RadialGrid {
    pub fn new(params: GridParams) -> Result<Self> {
        let GridParams { dim, r_max, m, grading_exponent } = params;
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(Error::InvalidGrid(format!("r_max must be positive, got {r_max}")));
        }
        if m < MIN_INTERVALS {
            return Err(Error::InvalidGrid(format!("M must be at least {MIN_INTERVALS}, got {m}")));
        }
        if m % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "M must be even (quadratic elements span node pairs), got {m}"
            )));
        }
        if !(grading_exponent >= 1.0 && grading_exponent.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "grading exponent must be >= 1, got {grading_exponent}"
            )));
        }
        let nodes: Vec<f64> = (0..=m)
            .map(|i| if i == m { r_max } else { r_max * (i as f64 / m as f64).powf(grading_exponent) })
            .collect();
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidGrid("nodes are not strictly increasing".into()));
        }
        let reference_lambda = (REFERENCE_DECAY_LENGTHS / r_max).powi(2);
        let weights = hat_weights(dim, &nodes);
        let kernel = GreenKernel::new(dim, reference_lambda)?;
        let quad = build_quadrature(dim, &nodes, &kernel);
        Ok(Self { params, nodes, weights, quad, reference_lambda })
    }

    pub fn params(&self) -> GridParams {
        self.params
    }

    pub fn dim(&self) -> Dimension {
        self.params.dim
    }

    pub fn r_max(&self) -> f64 {
        self.params.r_max
    }

    /// Number of intervals `M` (there are `M + 1` nodes).
    pub fn intervals(&self) -> usize {
        self.params.m
    }

    pub fn grading_exponent(&self) -> f64 {
        self.params.grading_exponent
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Positive nodal weights `∫ hat_i |S| r^{N-1} dr`; they integrate
    /// constants exactly over the ball.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn quadrature(&self) -> &[QuadPoint] {
        &self.quad
    }

    /// Integral of the piecewise-quadratic interpolant of nodal values, with measure.
    pub fn integrate_interpolant(&self, values: &[f64]) -> f64 {
        self.quad
            .iter()
            .map(|p| {
                let j = 2 * p.elem;
                p.w * (p.basis[0] * values[j] + p.basis[1] * values[j + 1] + p.basis[2] * values[j + 2])
            })
            .sum()
    }

    pub fn elements(&self) -> usize {
        self.params.m / 2
    }

    /// The spectral shift in which profiles are stored internally; fixed by `r_max`.
    pub fn reference_lambda(&self) -> f64 {
        self.reference_lambda
    }

    /// Same `M` and grading on `[0, t r_max]`.
    pub fn scaled(&self, t: f64) -> Result<Self> {
        RadialGrid::new(GridParams { r_max: self.params.r_max * t, ..self.params })
    }

    pub fn same_as(&self, other: &RadialGrid) -> bool {
        self.params == other.params
    }
}

fn hat_weights(dim: Dimension, nodes: &[f64]) -> Vec<f64> {
    // ∫_a^b |S| r^{N-1} (linear hat) dr in closed form per interval.
    let s = dim.sphere_area();
    let n = dim.value();
    let mut w = vec![0.0; nodes.len()];
    for i in 0..nodes.len() - 1 {
        let (a, b) = (nodes[i], nodes[i + 1]);
        let h = b - a;
        // ∫ r^{n-1} (b - r)/h and ∫ r^{n-1} (r - a)/h
        let (left, right) = if n == 2 {
            (h * (2.0 * a + b) / 6.0, h * (a + 2.0 * b) / 6.0)
        } else {
            (
                h * (3.0 * a * a + 2.0 * a * b + b * b) / 12.0,
                h * (a * a + 2.0 * a * b + 3.0 * b * b) / 12.0,
            )
        };
        w[i] += s * left;
        w[i + 1] += s * right;
    }
    w
}

fn build_quadrature(dim: Dimension, nodes: &[f64], kernel: &GreenKernel) -> Vec<QuadPoint> {
    let (gx, gw) = gauss_legendre(GAUSS_ORDER);
    let mut quad = Vec::new();
    for e in 0..(nodes.len() - 1) / 2 {
        let x = [nodes[2 * e], nodes[2 * e + 1], nodes[2 * e + 2]];
        let mut push = |a: f64, b: f64| {
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (xi, wi) in gx.iter().zip(&gw) {
                let r = mid + half * xi;
                let (basis, dbasis) = shape(&x, r);
                quad.push(QuadPoint {
                    r,
                    w: wi * half * dim.measure(r),
                    elem: e,
                    basis,
                    dbasis,
                    green_ref: kernel.eval(r),
                });
            }
        };
        if e == 0 {
            let h = x[2];
            for k in (0..first_cell_levels(dim)).rev() {
                push(h * 0.5f64.powi(k + 1), h * 0.5f64.powi(k));
            }
        } else {
            // Geometric cells with ratio <= 2 keep r^{-s} integrands resolved on strongly graded meshes.
            let cells = (x[2] / x[0]).log2().ceil().max(1.0) as i32;
            let q = (x[2] / x[0]).powf(1.0 / cells as f64);
            let mut a = x[0];
            for k in 0..cells {
                let b = if k == cells - 1 { x[2] } else { a * q };
                push(a, b);
                a = b;
            }
        }
    }
    quad
}

/// Quadratic Lagrange shape functions through `x` and their derivatives at `r`.
pub(crate) fn shape(x: &[f64; 3], r: f64) -> ([f64; 3], [f64; 3]) {
    let [x0, x1, x2] = *x;
    let d0 = (x0 - x1) * (x0 - x2);
    let d1 = (x1 - x0) * (x1 - x2);
    let d2 = (x2 - x0) * (x2 - x1);
    let b = [
        (r - x1) * (r - x2) / d0,
        (r - x0) * (r - x2) / d1,
        (r - x0) * (r - x1) / d2,
    ];
    let db = [
        (2.0 * r - x1 - x2) / d0,
        (2.0 * r - x0 - x2) / d1,
        (2.0 * r - x0 - x1) / d2,
    ];
    (b, db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn nodes_follow_grading_law() {
        let g = make_grid(Dimension::Three, 20.0, 512, 2.0).unwrap();
        for (i, r) in g.nodes().iter().enumerate() {
            let want = 20.0 * (i as f64 / 512.0).powi(2);
            assert!((r - want).abs() <= 1e-15 * want.max(1.0));
        }
        let u = make_grid(Dimension::Two, 30.0, 1024, 1.0).unwrap();
        let h = u.nodes()[1];
        for w in u.nodes().windows(2) {
            assert!((w[1] - w[0] - h).abs() < 1e-12);
        }
    }

    #[test]
    fn weights_integrate_ball_volume() {
        let g = make_grid(Dimension::Three, 20.0, 512, 2.0).unwrap();
        assert!(g.weights().iter().all(|&w| w > 0.0));
        let vol: f64 = g.weights().iter().sum();
        assert!((vol - 4.0 / 3.0 * PI * 8000.0).abs() < 1e-10 * vol);
        let q: f64 = g.quadrature().iter().map(|p| p.w).sum();
        assert!((q - vol).abs() < 1e-10 * vol);
        let g2 = make_grid(Dimension::Two, 30.0, 1024, 1.0).unwrap();
        let vol: f64 = g2.weights().iter().sum();
        assert!((vol - PI * 900.0).abs() < 1e-10 * vol);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(make_grid(Dimension::Three, 20.0, 32, 2.0).is_err());
        assert!(make_grid(Dimension::Three, 20.0, 65, 2.0).is_err());
        assert!(make_grid(Dimension::Three, -1.0, 64, 2.0).is_err());
        assert!(make_grid(Dimension::Three, 20.0, 64, 0.5).is_err());
    }

    #[test]
    fn shape_functions_partition_unity() {
        let x = [0.0, 0.3, 1.1];
        for r in [0.0, 0.2, 0.7, 1.1] {
            let (b, db) = shape(&x, r);
            assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(db.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn default_grading_resolves_blowup() {
        assert_eq!(default_grading(Some(2.5)), 2.0);
        assert!((default_grading(Some(2.8)) - 5.0).abs() < 1e-12);
        assert_eq!(default_grading(Some(4.0)), 2.0);
        assert_eq!(default_grading(None), 2.0);
    }
}
