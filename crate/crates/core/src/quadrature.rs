//! Gauss–Legendre rules and composite panel layouts graded toward an endpoint.

use crate::dd::Scalar;

/// Nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre<S> {
    pub nodes: Vec<S>,
    pub weights: Vec<S>,
}

// P_n(x) and P_{n-1}(x) by the three-term recurrence.
fn legendre_pair<S: Scalar>(n: usize, x: S) -> (S, S) {
    let mut p0 = S::one();
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = (S::from_f64(2.0 * kf - 1.0) * x * p1 - S::from_f64(kf - 1.0) * p0) / S::from_f64(kf);
        p0 = p1;
        p1 = p2;
    }
    (p1, p0)
}

impl<S: Scalar> GaussLegendre<S> {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "rule needs at least one node");
        let nf = n as f64;
        let mut nodes = vec![S::zero(); n];
        let mut weights = vec![S::zero(); n];
        for i in 0..n.div_ceil(2) {
            let guess = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut x = S::from_f64(guess);
            let mut dp = S::one();
            for _ in 0..100 {
                let (p, pm1) = legendre_pair(n, x);
                dp = S::from_f64(nf) * (x * p - pm1) / (x * x - S::one());
                let dx = p / dp;
                x -= dx;
                if dx.abs().to_f64() <= 4.0 * S::EPSILON {
                    let (p, pm1) = legendre_pair(n, x);
                    dp = S::from_f64(nf) * (x * p - pm1) / (x * x - S::one());
                    break;
                }
            }
            let w = S::from_f64(2.0) / ((S::one() - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = S::zero();
        }
        GaussLegendre { nodes, weights }
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate<F: FnMut(S) -> S>(&self, a: S, b: S, mut f: F) -> S {
        let half = (b - a) / S::from_f64(2.0);
        let mid = (a + b) / S::from_f64(2.0);
        let mut s = S::zero();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += *w * f(mid + half * *x);
        }
        s * half
    }

    /// Integrates over a list of panels.
    pub fn integrate_panels<F: FnMut(S) -> S>(&self, panels: &[(f64, f64)], mut f: F) -> S {
        let mut s = S::zero();
        for &(a, b) in panels {
            s += self.integrate(S::from_f64(a), S::from_f64(b), &mut f);
        }
        s
    }
}

/// Panels on `[0, t_end]` whose widths start at `first` next to `t_end` and
/// double moving left. Suited to integrands dominated by `e^{c (t - t_end)}`.
pub fn panels_graded_right(t_end: f64, first: f64) -> Vec<(f64, f64)> {
    let mut panels = Vec::new();
    let mut b = t_end;
    let mut w = first.min(t_end).max(t_end * 1e-12);
    while b > 0.0 {
        let a = (b - w).max(0.0);
        // avoid a sliver at the far end
        let a = if a < 0.25 * w { 0.0 } else { a };
        panels.push((a, b));
        b = a;
        w *= 2.0;
    }
    panels.reverse();
    panels
}

/// Panels on `[0, 1]`: `uniform` equal panels with the first one split
/// geometrically `levels` times toward 0.
pub fn panels_graded_left(uniform: usize, levels: usize) -> Vec<(f64, f64)> {
    let h = 1.0 / uniform as f64;
    let mut panels = Vec::with_capacity(uniform + levels);
    let mut lo = h * 0.5f64.powi(levels as i32);
    panels.push((0.0, lo));
    for _ in 0..levels {
        panels.push((lo, 2.0 * lo));
        lo *= 2.0;
    }
    for i in 1..uniform {
        panels.push((i as f64 * h, (i + 1) as f64 * h));
    }
    panels
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dd::DoubleDouble;

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 7, 20, 64] {
            let g = GaussLegendre::<f64>::new(n);
            let s: f64 = g.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn exact_for_polynomials() {
        let g = GaussLegendre::<f64>::new(5);
        // degree 9 is the highest exact degree
        let v = g.integrate(0.0, 1.0, |x| x.powi(9));
        assert!((v - 0.1).abs() < 1e-15);
    }

    #[test]
    fn double_double_rule_integrates_exponential() {
        let g = GaussLegendre::<DoubleDouble>::new(32);
        let v = g.integrate(DoubleDouble::ZERO, DoubleDouble::ONE, |x| x.exp());
        let exact = DoubleDouble::ONE.exp() - DoubleDouble::ONE;
        assert!((v - exact).to_f64().abs() < 1e-29);
    }

    #[test]
    fn graded_panels_cover_interval() {
        let p = panels_graded_right(4.0, 0.01);
        assert_eq!(p.first().unwrap().0, 0.0);
        assert_eq!(p.last().unwrap().1, 4.0);
        for w in p.windows(2) {
            assert_eq!(w[0].1, w[1].0);
        }
        let q = panels_graded_left(10, 30);
        assert_eq!(q[0].0, 0.0);
        assert_eq!(q.last().unwrap().1, 1.0);
        for w in q.windows(2) {
            assert!((w[0].1 - w[1].0).abs() < 1e-15);
        }
    }

    #[test]
    fn graded_left_handles_endpoint_singularity() {
        let g = GaussLegendre::<f64>::new(20);
        let v = g.integrate_panels(&panels_graded_left(4, 40), |x: f64| x.sqrt().ln());
        assert!((v + 0.5).abs() < 1e-12, "{v}");
    }
}
