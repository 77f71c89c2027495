//! Composite Gauss–Legendre quadrature on the open unit interval.
//!
//! Panels are dyadic and mirrored at both ends,
//! `[1/4,1/2], [1/8,1/4], …, [0,2^-depth]` and their reflections about 1/2,
//! so that integrands with integrable endpoint singularities (heavy-tailed
//! quantile functions) are resolved. Every node carries its complement
//! `1 - u` computed without cancellation.

use std::f64::consts::PI;

/// A quadrature node on (0,1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint {
    pub u: f64,
    /// `1 - u`, accurate even when `u` is within rounding of 1.
    pub complement: f64,
    pub weight: f64,
}

/// A concrete set of nodes and weights on (0,1).
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    order: usize,
    depth: u32,
    subpanels: usize,
    points: Vec<QuadPoint>,
}

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub converged: bool,
    pub panels: usize,
    pub evaluations: usize,
}

const MAX_DEPTH: u32 = 512;
const TOL: f64 = 1e-10;

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let n = order as f64;
    for i in 0..order.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if order == 1 {
                p0 = 1.0;
                p1 = x;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

impl QuadratureRule {
    /// Dyadic rule with `depth` levels per half and `subpanels` equal panels
    /// inside each dyadic piece, each carrying an `order`-point GL rule.
    pub fn dyadic(order: usize, depth: u32, subpanels: usize) -> Self {
        assert!(order >= 1 && depth >= 1 && subpanels >= 1);
        let depth = depth.min(MAX_DEPTH);
        let (gx, gw) = gauss_legendre(order);
        // pieces of the left half (0, 1/2], as (a, b)
        let mut pieces = Vec::with_capacity(depth as usize);
        for k in 1..depth {
            pieces.push((0.5f64.powi(k as i32 + 1), 0.5f64.powi(k as i32)));
        }
        pieces.push((0.0, 0.5f64.powi(depth as i32)));

        let mut left = Vec::with_capacity(pieces.len() * subpanels * order);
        for &(a, b) in &pieces {
            let h = (b - a) / subpanels as f64;
            for j in 0..subpanels {
                let lo = a + h * j as f64;
                for (x, w) in gx.iter().zip(&gw) {
                    let u = lo + 0.5 * h * (x + 1.0);
                    left.push((u, 0.5 * h * w));
                }
            }
        }
        let mut points = Vec::with_capacity(2 * left.len());
        for &(u, w) in &left {
            points.push(QuadPoint { u, complement: 1.0 - u, weight: w });
            points.push(QuadPoint { u: 1.0 - u, complement: u, weight: w });
        }
        Self { order, depth, subpanels, points }
    }

    /// Next rule in the refinement sequence: dyadic depth doubles, which
    /// doubles the panel count and pushes the endpoint pieces toward 0 and 1.
    pub fn refined(&self) -> Self {
        Self::dyadic(self.order, self.depth * 2, self.subpanels)
    }

    pub fn points(&self) -> &[QuadPoint] {
        &self.points
    }

    pub fn panels(&self) -> usize {
        2 * self.depth as usize * self.subpanels
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn apply(&self, f: impl Fn(QuadPoint) -> f64) -> f64 {
        self.points.iter().map(|&p| p.weight * f(p)).sum()
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self::dyadic(20, 8, 1)
    }
}

/// Integrate over (0,1) starting from `rule`, doubling the panel count until
/// successive estimates agree to 1e-10 (relative for large values) or the
/// depth cap is hit.
pub fn integrate_unit_interval_with(
    f: impl Fn(QuadPoint) -> f64,
    rule: &QuadratureRule,
) -> QuadResult {
    let mut current = rule.clone();
    let mut evaluations = current.points.len();
    let mut prev = current.apply(&f);
    loop {
        if current.depth >= MAX_DEPTH {
            return QuadResult {
                value: prev,
                converged: false,
                panels: current.panels(),
                evaluations,
            };
        }
        let next = current.refined();
        let value = next.apply(&f);
        evaluations += next.points.len();
        if (value - prev).abs() <= TOL * value.abs().max(1.0) {
            return QuadResult { value, converged: true, panels: next.panels(), evaluations };
        }
        prev = value;
        current = next;
    }
}

/// Integrate a plain function of `u` over (0,1).
pub fn integrate_unit_interval(f: impl Fn(f64) -> f64, rule: &QuadratureRule) -> QuadResult {
    integrate_unit_interval_with(|p| f(p.u), rule)
}
