//! Finite-difference semigroup oracles.
//!
//! Independent numeric ground truth for heat kernels: Crank-Nicolson in one
//! dimension, Peaceman-Rachford ADI in two. These never share code with the
//! symbolic paths they validate.

/// Tridiagonal solve (Thomas algorithm).
fn thomas(a: &[f64], b: &[f64], c: &[f64], d: &mut [f64]) {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = c[0] / b[0];
    dp[0] = d[0] / b[0];
    for i in 1..n {
        let m = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / m;
        dp[i] = (d[i] - a[i] * dp[i - 1]) / m;
    }
    d[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        d[i] = dp[i] - cp[i] * d[i + 1];
    }
}

/// Diagonal heat kernel of -d^2/dx^2 + V on a Dirichlet box [-l, l],
/// K(x0, x0, t), by Crank-Nicolson from a narrow Gaussian start.
pub fn heat_diag_1d(
    v: impl Fn(f64) -> f64,
    x0: f64,
    t: f64,
    half_box: f64,
    grid: usize,
    steps: usize,
) -> f64 {
    let n = grid;
    let h = 2.0 * half_box / (n as f64 + 1.0);
    let xs: Vec<f64> = (0..n).map(|i| -half_box + (i as f64 + 1.0) * h).collect();
    // start from the exact free kernel at a t0 the grid can resolve
    // (the Gaussian width must span a few cells; V contributes O(t0))
    let t0 = (4.0 * h * h).min(0.5 * t);
    let mut u: Vec<f64> = xs
        .iter()
        .map(|&x| (-((x - x0) * (x - x0)) / (4.0 * t0)).exp() / (4.0 * std::f64::consts::PI * t0).sqrt())
        .collect();
    let dt = (t - t0) / steps as f64;
    let r = dt / (2.0 * h * h);
    // (I + dt/2 L) u^{n+1} = (I - dt/2 L) u^n with L = -D2 + V
    let lower = vec![-r; n];
    let upper = vec![-r; n];
    let diag: Vec<f64> = xs.iter().map(|&x| 1.0 + 2.0 * r + 0.5 * dt * v(x)).collect();
    for _ in 0..steps {
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            let lap = (if i > 0 { u[i - 1] } else { 0.0 }) + (if i + 1 < n { u[i + 1] } else { 0.0 })
                - 2.0 * u[i];
            rhs[i] = u[i] + r * lap - 0.5 * dt * v(xs[i]) * u[i];
        }
        thomas(&lower, &diag, &upper, &mut rhs);
        u = rhs;
    }
    // interpolate at x0
    let pos = (x0 + half_box) / h - 1.0;
    let i = pos.floor().max(0.0) as usize;
    let frac = pos - i as f64;
    u[i] * (1.0 - frac) + u[(i + 1).min(n - 1)] * frac
}

/// Heat kernel value K((x0,y0),(x0,y0),t) of the plane model operator
/// H = -sum_i (d_i - (1/4)(A x)_i)^2 with A = [[0, b], [-b, 0]], by ADI.
///
/// Expanded, -H = Laplacian - (1/2)(A x).grad + (b^2/16)|x|^2, which splits
/// into two one-dimensional operators for Peaceman-Rachford stepping.
pub fn mehler_diag_2d_oracle(b: f64, t: f64, half_box: f64, grid: usize, steps: usize) -> f64 {
    let n = grid;
    let h = 2.0 * half_box / (n as f64 + 1.0);
    let xs: Vec<f64> = (0..n).map(|i| -half_box + (i as f64 + 1.0) * h).collect();
    // free 2-D kernel at a grid-resolved t0, centered at the origin
    let t0 = (4.0 * h * h).min(0.5 * t);
    let mut u = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            let r2 = xs[i] * xs[i] + xs[j] * xs[j];
            u[i * n + j] = (-r2 / (4.0 * t0)).exp() / (4.0 * std::f64::consts::PI * t0);
        }
    }
    let dt = (t - t0) / steps as f64;
    // L1 acts in x (index i): d_xx - (b/2) y d_x + (b^2/32)(x^2+y^2)
    // L2 acts in y (index j): d_yy + (b/2) x d_y + (b^2/32)(x^2+y^2)
    // (drift signs: (Ax)_1 = b y, (Ax)_2 = -b x)
    let apply_l = |u: &[f64], dir: usize, out: &mut Vec<f64>| {
        for i in 0..n {
            for j in 0..n {
                let x = xs[i];
                let y = xs[j];
                let (c, m, p) = if dir == 0 {
                    (
                        u[i * n + j],
                        if i > 0 { u[(i - 1) * n + j] } else { 0.0 },
                        if i + 1 < n { u[(i + 1) * n + j] } else { 0.0 },
                    )
                } else {
                    (
                        u[i * n + j],
                        if j > 0 { u[i * n + j - 1] } else { 0.0 },
                        if j + 1 < n { u[i * n + j + 1] } else { 0.0 },
                    )
                };
                let second = (p - 2.0 * c + m) / (h * h);
                let first = (p - m) / (2.0 * h);
                let drift = if dir == 0 { -(b / 2.0) * y } else { (b / 2.0) * x };
                let pot = b * b / 32.0 * (x * x + y * y);
                out[i * n + j] = second + drift * first + pot * c;
            }
        }
    };
    let mut l_buf = vec![0.0; n * n];
    for _ in 0..steps {
        // (I - dt/2 L1) u* = (I + dt/2 L2) u
        apply_l(&u, 1, &mut l_buf);
        let mut star = vec![0.0; n * n];
        for k in 0..n * n {
            star[k] = u[k] + 0.5 * dt * l_buf[k];
        }
        for j in 0..n {
            let y = xs[j];
            let mut rhs = vec![0.0; n];
            let mut lower = vec![0.0; n];
            let mut upper = vec![0.0; n];
            let mut diag = vec![0.0; n];
            for i in 0..n {
                let x = xs[i];
                let drift = -(b / 2.0) * y;
                let pot = b * b / 32.0 * (x * x + y * y);
                lower[i] = -0.5 * dt * (1.0 / (h * h) - drift / (2.0 * h));
                upper[i] = -0.5 * dt * (1.0 / (h * h) + drift / (2.0 * h));
                diag[i] = 1.0 - 0.5 * dt * (-2.0 / (h * h) + pot);
                rhs[i] = star[i * n + j];
            }
            thomas(&lower, &diag, &upper, &mut rhs);
            for i in 0..n {
                star[i * n + j] = rhs[i];
            }
        }
        // (I - dt/2 L2) u^{n+1} = (I + dt/2 L1) u*
        apply_l(&star, 0, &mut l_buf);
        let mut next = vec![0.0; n * n];
        for k in 0..n * n {
            next[k] = star[k] + 0.5 * dt * l_buf[k];
        }
        for i in 0..n {
            let x = xs[i];
            let mut rhs = vec![0.0; n];
            let mut lower = vec![0.0; n];
            let mut upper = vec![0.0; n];
            let mut diag = vec![0.0; n];
            for j in 0..n {
                let y = xs[j];
                let drift = (b / 2.0) * x;
                let pot = b * b / 32.0 * (x * x + y * y);
                lower[j] = -0.5 * dt * (1.0 / (h * h) - drift / (2.0 * h));
                upper[j] = -0.5 * dt * (1.0 / (h * h) + drift / (2.0 * h));
                diag[j] = 1.0 - 0.5 * dt * (-2.0 / (h * h) + pot);
                rhs[j] = next[i * n + j];
            }
            thomas(&lower, &diag, &upper, &mut rhs);
            for j in 0..n {
                next[i * n + j] = rhs[j];
            }
        }
        u = next;
    }
    // value at the origin by bilinear interpolation on the cell around 0
    let pos = half_box / h - 1.0;
    let i = pos.floor() as usize;
    let f = pos - i as f64;
    let val = |i: usize, j: usize| u[i * n + j];
    (1.0 - f) * (1.0 - f) * val(i, i)
        + f * (1.0 - f) * (val(i + 1, i) + val(i, i + 1))
        + f * f * val(i + 1, i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_kernel_1d() {
        let t = 0.05;
        let k = heat_diag_1d(|_| 0.0, 0.3, t, 6.0, 1200, 160);
        let exact = 1.0 / (4.0 * std::f64::consts::PI * t).sqrt();
        assert!((k - exact).abs() / exact < 2e-4, "k={k} exact={exact}");
    }

    #[test]
    fn free_kernel_2d() {
        let t = 0.05;
        let k = mehler_diag_2d_oracle(0.0, t, 4.0, 192, 60);
        let exact = 1.0 / (4.0 * std::f64::consts::PI * t);
        assert!((k - exact).abs() / exact < 1e-3, "k={k} exact={exact}");
    }
}
