//! Gauss-Legendre rules and dyadically graded composite rules.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// `n`-point rule on `[-1, 1]` by Newton iteration on `P_n`.
    pub fn new(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..(n + 1) / 2 {
            let mut x = libm::cos(core::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5));
            let mut dp = 0.0;
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
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn integrate(&self, f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(mid + half * x);
        }
        s * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Which endpoints of an interval carry an integrable singularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grade {
    None,
    Left,
    Right,
    Both,
}

/// Composite rule on `[a, b]` with cells halving toward graded endpoints.
pub fn graded(rule: &GaussLegendre, levels: usize, f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, grade: Grade) -> f64 {
    match grade {
        Grade::None => rule.integrate(f, a, b),
        Grade::Both => {
            let m = 0.5 * (a + b);
            graded(rule, levels, f, a, m, Grade::Left) + graded(rule, levels, f, m, b, Grade::Right)
        }
        Grade::Left | Grade::Right => {
            let len = b - a;
            let mut s = 0.0;
            let mut outer = 1.0;
            for _ in 0..levels {
                let inner = 0.5 * outer;
                let (lo, hi) = if grade == Grade::Left {
                    (a + inner * len, a + outer * len)
                } else {
                    (b - outer * len, b - inner * len)
                };
                s += rule.integrate(f, lo, hi);
                outer = inner;
            }
            let (lo, hi) = if grade == Grade::Left { (a, a + outer * len) } else { (b - outer * len, b) };
            s + rule.integrate(f, lo, hi)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_for_polynomials() {
        let g = GaussLegendre::new(5);
        let v = g.integrate(&mut |x| x.powi(8) + 3.0 * x.powi(3), 0.0, 2.0);
        assert_relative_eq!(v, 512.0 / 9.0 + 12.0, max_relative = 1e-13);
        assert_relative_eq!(g.weights.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn graded_handles_endpoint_power() {
        let g = GaussLegendre::new(10);
        let v = graded(&g, 60, &mut |x| libm::pow(x, -0.5), 0.0, 1.0, Grade::Left);
        assert_relative_eq!(v, 2.0, max_relative = 1e-8);
    }
}
