//! Shared numerical kernels: Gauss-Legendre rules, finite-difference /
//! interpolation weights on arbitrary nodes, and upper convex hulls.

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
///
/// Newton iteration on the Legendre polynomial from the Chebyshev-based
/// initial guess; converges to machine precision in a handful of steps.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // evaluate P_n and P_n' by the three-term recurrence
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
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
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre rule over consecutive panels `breaks[i]..breaks[i+1]`.
pub fn gl_on_panels(breaks: &[f64], order: usize) -> (Vec<f64>, Vec<f64>) {
    let (xg, wg) = gauss_legendre(order);
    let mut nodes = Vec::with_capacity(order * (breaks.len() - 1));
    let mut weights = Vec::with_capacity(order * (breaks.len() - 1));
    for win in breaks.windows(2) {
        let (a, b) = (win[0], win[1]);
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        for (x, w) in xg.iter().zip(&wg) {
            nodes.push(mid + half * x);
            weights.push(half * w);
        }
    }
    (nodes, weights)
}

/// Finite-difference weights for the `m`-th derivative at `x0` over the
/// nodes `xs` (Fornberg's recurrence). `m = 0` yields Lagrange interpolation
/// weights at `x0`.
pub fn fd_weights(x0: f64, xs: &[f64], m: usize) -> Vec<f64> {
    let n = xs.len();
    assert!(n > m);
    // d[k][j] holds the weight of node j for derivative order k
    let mut d = vec![vec![0.0; n]; m + 1];
    let mut d_prev = vec![vec![0.0; n]; m + 1];
    d[0][0] = 1.0;
    let mut c1 = 1.0;
    for i in 1..n {
        std::mem::swap(&mut d, &mut d_prev);
        for k in 0..=m {
            d[k][i] = 0.0;
        }
        let mut c2 = 1.0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            for k in (0..=m.min(i)).rev() {
                let lower = if k > 0 { d_prev[k - 1][j] } else { 0.0 };
                d[k][j] = ((xs[i] - x0) * d_prev[k][j] - k as f64 * lower) / c3;
            }
        }
        for k in (0..=m.min(i)).rev() {
            let lower = if k > 0 { d_prev[k - 1][i - 1] } else { 0.0 };
            d[k][i] = c1 / c2 * (k as f64 * lower - (xs[i - 1] - x0) * d_prev[k][i - 1]);
        }
        c1 = c2;
    }
    d[m].clone()
}

/// Upper convex hull of points sorted by `x` (strictly increasing).
/// Returns indices into the input slice; the chain is concave from above,
/// so every input point lies on or below each hull edge's line.
pub fn upper_hull(x: &[f64], y: &[f64]) -> Vec<usize> {
    let mut hull: Vec<usize> = Vec::new();
    for i in 0..x.len() {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // pop b if it lies on or below chord a->i
            if (y[b] - y[a]) * (x[i] - x[a]) <= (y[i] - y[a]) * (x[b] - x[a]) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    hull
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_integrates_polynomials_exactly() {
        // n-point rule is exact through degree 2n-1
        let (x, w) = gauss_legendre(5);
        for deg in 0..=9 {
            let num: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
            let exact = if deg % 2 == 0 {
                2.0 / (deg as f64 + 1.0)
            } else {
                0.0
            };
            assert!((num - exact).abs() < 1e-14, "deg {deg}: {num} vs {exact}");
        }
    }

    #[test]
    fn gl_nodes_match_reference() {
        let (x, w) = gauss_legendre(5);
        let x_ref = [
            -0.906_179_845_938_664,
            -0.538_469_310_105_683_1,
            0.0,
            0.538_469_310_105_683_1,
            0.906_179_845_938_664,
        ];
        let w_ref = [
            0.236_926_885_056_189_08,
            0.478_628_670_499_366_47,
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_47,
            0.236_926_885_056_189_08,
        ];
        for i in 0..5 {
            assert!((x[i] - x_ref[i]).abs() < 1e-15);
            assert!((w[i] - w_ref[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn panels_integrate_exp() {
        let breaks = [0.0, 0.3, 1.0, 2.0];
        let (x, w) = gl_on_panels(&breaks, 12);
        let num: f64 = x.iter().zip(&w).map(|(x, w)| w * x.exp()).sum();
        assert!((num - (2f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn fd_weights_interpolation_row() {
        // m = 0 reproduces polynomial values exactly
        let xs = [0.0, 0.7, 1.1, 2.0, 3.2];
        let w = fd_weights(1.4, &xs, 0);
        let f = |x: f64| 3.0 - x + 2.0 * x * x + 0.5 * x * x * x * x;
        let num: f64 = xs.iter().zip(&w).map(|(x, w)| w * f(*x)).sum();
        assert!((num - f(1.4)).abs() < 1e-12);
    }

    #[test]
    fn fd_weights_second_derivative() {
        let xs = [-0.2, -0.1, 0.0, 0.1, 0.2];
        let w = fd_weights(0.0, &xs, 2);
        let f = |x: f64| (2.0 * x).sin() + x * x;
        let num: f64 = xs.iter().zip(&w).map(|(x, w)| w * f(*x)).sum();
        // f'' at 0 = 2
        assert!((num - 2.0).abs() < 1e-3);
        // exact on quadratics
        let num2: f64 = xs.iter().zip(&w).map(|(x, w)| w * (3.0 * x * x)).sum();
        assert!((num2 - 6.0).abs() < 1e-10);
    }

    #[test]
    fn hull_of_concave_points_keeps_all() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [0.0, 0.9, 1.2, 1.25];
        assert_eq!(upper_hull(&x, &y), vec![0, 1, 2, 3]);
    }

    #[test]
    fn hull_of_convex_points_is_chord() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [0.0, -1.0, -1.8, -2.0];
        assert_eq!(upper_hull(&x, &y), vec![0, 3]);
    }
}
