//! Quadrature helpers: Gauss-Legendre nodes, ordered-simplex tensor rules,
//! and one-dimensional adaptive Simpson integration.

/// Gauss-Legendre nodes and weights on [0, 1].
pub fn gauss_legendre_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n {
        // initial guess (Chebyshev-like), then Newton on P_n
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(n, x);
        nodes[k] = 0.5 * (1.0 - x); // reverse so nodes ascend on [0,1]
        weights[k] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Integrate over the ordered simplex {0 <= s_1 <= ... <= s_k <= 1} with a
/// tensor Gauss-Legendre rule of the given order per axis, using the
/// substitution s_j = v_j s_{j+1} whose Jacobian is prod_l v_l^(l-1).
pub fn simplex_quadrature<T>(
    k: usize,
    order: usize,
    mut f: impl FnMut(&[f64]) -> T,
    add: impl Fn(T, T) -> T,
    scale: impl Fn(T, f64) -> T,
    zero: T,
) -> T {
    if k == 0 {
        return f(&[]);
    }
    let (nodes, weights) = gauss_legendre_01(order);
    let mut acc = zero;
    let mut idx = vec![0usize; k];
    let mut s = vec![0.0f64; k];
    loop {
        let mut w = 1.0;
        // s_k = v_k, s_{k-1} = v_{k-1} v_k, ...
        let mut carry = 1.0;
        for j in (0..k).rev() {
            let v = nodes[idx[j]];
            carry *= v;
            s[j] = carry;
            w *= weights[idx[j]];
            // Jacobian factor v_l^(l-1) with l the 1-based axis index
            w *= v.powi(j as i32);
        }
        acc = add(acc, scale(f(&s), w));
        // advance
        let mut i = 0;
        loop {
            if i == k {
                return acc;
            }
            idx[i] += 1;
            if idx[i] < order {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// Adaptive Simpson on [a, b] to the requested absolute tolerance.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
                + rec(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    rec(f, a, fa, b, fb, whole, m, fm, tol, 40)
}
