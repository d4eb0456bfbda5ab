//! Gauss-Legendre rules and an adaptive integrator built on them.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Rule with `n >= 1` nodes, found by Newton iteration on `P_n`
    /// from Chebyshev-like initial guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "a Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let half = n.div_ceil(2);
        for i in 0..half {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d.is_finite() {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            weights[i] = w;
            nodes[n - 1 - i] = x;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integral of `f` over `[a, b]`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 1..n {
        let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Adaptive bisection with a 20-point Gauss-Legendre rule: an interval is
/// accepted when the rule on it agrees with the sum over its halves.
#[derive(Debug, Clone)]
pub struct AdaptiveIntegrator {
    rule: GaussLegendre,
    abs_tol: f64,
    max_depth: usize,
}

impl AdaptiveIntegrator {
    pub fn new(abs_tol: f64) -> Self {
        AdaptiveIntegrator {
            rule: GaussLegendre::new(20),
            abs_tol,
            max_depth: 40,
        }
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> Result<f64> {
        if a == b {
            return Ok(0.0);
        }
        let whole = self.rule.integrate(a, b, &f);
        self.recurse(&f, a, b, whole, self.abs_tol, 0)
    }

    fn recurse<F: Fn(f64) -> f64>(
        &self,
        f: &F,
        a: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let left = self.rule.integrate(a, m, f);
        let right = self.rule.integrate(m, b, f);
        let refined = left + right;
        if !refined.is_finite() {
            return Err(Error::Numeric("non-finite integrand".into()));
        }
        if (refined - whole).abs() <= tol {
            return Ok(refined);
        }
        if depth >= self.max_depth {
            return Err(Error::Numeric(format!(
                "adaptive quadrature did not converge on [{a}, {b}]"
            )));
        }
        Ok(self.recurse(f, a, m, left, 0.5 * tol, depth + 1)?
            + self.recurse(f, m, b, right, 0.5 * tol, depth + 1)?)
    }
}
