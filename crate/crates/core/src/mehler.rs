//! Closed-form heat kernels for the curvature model operator
//! F = -sum_i (d_i - (1/4) sum_j A_ij x_j)^2 and the equivariant Gaussian
//! fixed-point localization built on them.
//!
//! The closed form, with Theta = t A / 2:
//!
//! ```text
//! K_t(x,y) = (4 pi t)^{-n/2} det^{1/2}(Theta/sinh Theta)
//!            exp( -(1/4t) <Theta coth Theta (x-y), (x-y)> - (1/2t) <Theta x, y> )
//! ```
//!
//! It was derived by conjugating the drift away in a rotating frame (the
//! remaining operator is an inverted harmonic oscillator solved by the
//! classical one-dimensional kernel) and is validated against the
//! finite-difference semigroup oracle in `oracle`; the diagonal at t = 1
//! reduces to (4 pi)^{-n/2} A-hat(A).

use crate::charforms::{a_hat, matrix_function, FormMat};
use crate::error::{Error, Result};
use crate::graded::{
    equivariant_supertrace_sigma, spinor_lift, AlgebraContext, FiberRep, FixedPointFrame,
    GradedElement, PiScaled,
};
use crate::matrix::Mat;
use crate::scalar::{factorial, Scalar};

/// Model operator data: dimension and the antisymmetric coefficient matrix
/// (nilpotent graded entries in symbolic mode, real scalars in numeric mode).
#[derive(Clone, Debug)]
pub struct MehlerData<S: Scalar> {
    pub n: usize,
    pub a: FormMat<S>,
}

impl<S: Scalar> MehlerData<S> {
    pub fn new(n: usize, a: FormMat<S>) -> Result<Self> {
        if a.size != n {
            return Err(Error::InvalidInput(format!(
                "matrix size {} != dimension {n}",
                a.size
            )));
        }
        if !a.is_antisymmetric() {
            return Err(Error::InvalidInput(
                "model coefficient matrix must be antisymmetric".into(),
            ));
        }
        Ok(MehlerData { n, a })
    }

    pub fn free(n: usize) -> Self {
        MehlerData {
            n,
            a: FormMat::zeros(n),
        }
    }
}

/// cosh(M) for strictly nilpotent M.
fn cosh_nilpotent<S: Scalar>(m: &FormMat<S>, ctx: &AlgebraContext) -> Result<FormMat<S>> {
    let m2 = m.mul(m, ctx)?;
    matrix_function(
        |k| {
            factorial::<S>(2 * k as u32)
                .try_inv()
                .unwrap()
        },
        &m2,
        ctx,
    )
}

/// sinh(M)/M for strictly nilpotent M.
fn sinhc_nilpotent<S: Scalar>(m: &FormMat<S>, ctx: &AlgebraContext) -> Result<FormMat<S>> {
    let m2 = m.mul(m, ctx)?;
    matrix_function(
        |k| {
            factorial::<S>(2 * k as u32 + 1)
                .try_inv()
                .unwrap()
        },
        &m2,
        ctx,
    )
}

/// (I + P)^{-1} for strictly nilpotent P.
fn neumann_inverse<S: Scalar>(p: &FormMat<S>, ctx: &AlgebraContext) -> Result<FormMat<S>> {
    matrix_function(
        |k| if k % 2 == 0 { S::one() } else { -S::one() },
        p,
        ctx,
    )
}

/// Theta coth(Theta) = cosh(Theta) (sinh(Theta)/Theta)^{-1}, nilpotent Theta.
fn theta_coth_theta<S: Scalar>(theta: &FormMat<S>, ctx: &AlgebraContext) -> Result<FormMat<S>> {
    let cosh = cosh_nilpotent(theta, ctx)?;
    let sinhc = sinhc_nilpotent(theta, ctx)?;
    let inv = neumann_inverse(&sinhc.positive_degree(), ctx)?;
    cosh.mul(&inv, ctx)
}

fn quadratic_form<S: Scalar>(
    m: &FormMat<S>,
    x: &[S],
    y: &[S],
    _ctx: &AlgebraContext,
) -> Result<GradedElement<S>> {
    let mut acc = GradedElement::zero(FiberRep::Exterior);
    for i in 0..m.size {
        for j in 0..m.size {
            let e = m.get(i, j);
            if e.is_zero() {
                continue;
            }
            acc = acc.add(&e.scale(&(x[i].clone() * y[j].clone())));
        }
    }
    Ok(acc)
}

/// Scalar-exponential of a graded element: exp of the degree-0 part (where
/// the scalar mode supports it) times the finite nilpotent exponential.
fn exp_graded<S: Scalar>(e: &GradedElement<S>, ctx: &AlgebraContext) -> Result<GradedElement<S>> {
    let c0 = e.scalar_part();
    let lead = c0.try_exp().ok_or_else(|| {
        Error::NotRepresentable(
            "transcendental exponent; evaluate on the diagonal or use float mode".into(),
        )
    })?;
    let rest = e.filter(|m| m.total_degree() > 0);
    Ok(crate::charforms::exp_elem(&rest, ctx)?.scale(&lead))
}

/// The Mehler heat kernel with nilpotent coefficient matrix, as a graded
/// element times the formal (4 pi t)^{-n/2} normalization. `t` must be
/// positive; in exact mode the numeric part of the exponent must vanish
/// (diagonal evaluation) or the value is not representable.
pub fn mehler_kernel<S: Scalar>(
    data: &MehlerData<S>,
    x: &[S],
    y: &[S],
    t: &S,
    ctx: &AlgebraContext,
) -> Result<PiScaled<S>> {
    if t.to_c64().re <= 0.0 || t.to_c64().im != 0.0 {
        return Err(Error::InvalidInput("time must be positive".into()));
    }
    if x.len() != data.n || y.len() != data.n {
        return Err(Error::InvalidInput("point dimension mismatch".into()));
    }
    if !data.a.is_nilpotent_input() {
        return Err(Error::InvalidInput(
            "mehler_kernel expects nilpotent entries; use mehler_kernel_numeric".into(),
        ));
    }
    let n = data.n;
    let t_inv = t.try_inv().unwrap();
    let half_t = t.clone() * S::from_ratio(1, 2);
    let theta = data.a.scale(&half_t);
    // det^(1/2)(Theta/sinh Theta) = A-hat(t A)
    let det_half = a_hat(&data.a.scale(t), ctx)?;
    let m = theta_coth_theta(&theta, ctx)?;
    let diff: Vec<S> = x.iter().zip(y).map(|(a, b)| a.clone() - b.clone()).collect();
    let mut exponent = quadratic_form(&m, &diff, &diff, ctx)?
        .scale(&(S::from_ratio(-1, 4) * t_inv.clone()));
    exponent = exponent.add(
        &quadratic_form(&theta, x, y, ctx)?.scale(&(S::from_ratio(-1, 2) * t_inv.clone())),
    );
    let gauss = exp_graded(&exponent, ctx)?;
    // rational part of (4 t)^{-n/2}: n even -> exact; n odd needs sqrt(t)
    let scale = if n % 2 == 0 {
        (S::from_int(4) * t.clone()).pow_i64(-((n / 2) as i64)).unwrap()
    } else {
        let root = (S::from_int(4) * t.clone())
            .try_sqrt()
            .ok_or_else(|| Error::NotRepresentable("sqrt(4t) not exact".into()))?;
        root.pow_i64(-(n as i64)).unwrap()
    };
    Ok(PiScaled::new(
        -(n as i32),
        det_half.mul(&gauss, ctx)?.scale(&scale),
    ))
}

/// Numeric Mehler kernel for a real antisymmetric matrix, evaluated through
/// the symmetric eigendecomposition of Theta^2 (even matrix functions only,
/// valid for t |lambda(A)| / 2 < pi).
pub fn mehler_kernel_numeric(a: &[Vec<f64>], x: &[f64], y: &[f64], t: f64) -> Result<f64> {
    let n = a.len();
    if t <= 0.0 {
        return Err(Error::InvalidInput("time must be positive".into()));
    }
    for (i, row) in a.iter().enumerate() {
        if row.len() != n {
            return Err(Error::InvalidInput("ragged matrix".into()));
        }
        for (j, &v) in row.iter().enumerate() {
            if (v + a[j][i]).abs() > 1e-12 {
                return Err(Error::InvalidInput("matrix must be antisymmetric".into()));
            }
        }
    }
    // theta = t a / 2; theta^2 symmetric negative semidefinite
    let mut theta2 = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += (t / 2.0) * a[i][k] * (t / 2.0) * a[k][j];
            }
            theta2[i][j] = acc;
        }
    }
    let (vals, vecs) = jacobi_eigen(&theta2);
    // each eigenvalue is -s^2 with s = t |lambda| / 2
    let mut det_half = 1.0;
    let mut coth_diag = vec![0.0; n];
    for (k, &lam) in vals.iter().enumerate() {
        let s = (-lam).max(0.0).sqrt();
        if s >= std::f64::consts::PI {
            return Err(Error::Numeric(
                "t |A|/2 beyond the first conjugate point".into(),
            ));
        }
        let (sinc, coth) = if s < 1e-8 {
            (1.0 - s * s / 6.0, 1.0 + s * s / 3.0)
        } else {
            (s.sin() / s, s * s.cos() / s.sin())
        };
        det_half *= (1.0 / sinc).sqrt();
        coth_diag[k] = coth;
    }
    // M = V diag(coth) V^T, quadratic forms in the eigenbasis
    let to_eigen = |v: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|k| (0..n).map(|i| vecs[i][k] * v[i]).sum())
            .collect()
    };
    let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let d_e = to_eigen(&diff);
    let q1: f64 = (0..n).map(|k| coth_diag[k] * d_e[k] * d_e[k]).sum();
    // cross term <Theta x, y> directly
    let mut q2 = 0.0;
    for i in 0..n {
        for j in 0..n {
            q2 += (t / 2.0) * a[i][j] * x[j] * y[i];
        }
    }
    let norm = (4.0 * std::f64::consts::PI * t).powf(-(n as f64) / 2.0);
    Ok(norm * det_half * (-(q1 / (4.0 * t)) - q2 / (2.0 * t)).exp())
}

/// Jacobi eigendecomposition of a small symmetric matrix; returns
/// (eigenvalues, column eigenvectors).
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[i][j] * m[i][j];
            }
        }
        if off < 1e-28 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[p][q].abs() < 1e-15 {
                    continue;
                }
                let phi = 0.5 * (2.0 * m[p][q]).atan2(m[q][q] - m[p][p]);
                let (c, s) = (phi.cos(), phi.sin());
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| m[i][i]).collect(), v)
}

/// Fixed-point data for the localization integral: tangential dimension,
/// normal rotation frame and the model matrix split block-diagonally along
/// the tangential/normal decomposition.
pub struct FixedPointGeometry<S: Scalar> {
    pub frame: FixedPointFrame<S>,
}

impl<S: Scalar> FixedPointGeometry<S> {
    fn phi_normal(&self) -> Mat<S> {
        let a = self.frame.tangential_dim;
        let b = self.frame.normal_dim();
        let mut m = Mat::zeros(b, b);
        for r in &self.frame.rotations {
            let c = r.cos_full();
            let s = r.sin_full();
            let (p, q) = (r.axis1 - a - 1, r.axis2 - a - 1);
            m[(p, p)] = c.clone();
            m[(q, q)] = c;
            m[(p, q)] = -s.clone();
            m[(q, p)] = s;
        }
        m
    }
}

/// Gaussian moment E[v_{i_1} ... v_{i_{2k}}] for a centered normal vector
/// with covariance `cov`, by Isserlis pairing.
fn gaussian_moment<S: Scalar>(cov: &Mat<S>, idx: &[usize]) -> S {
    if idx.is_empty() {
        return S::one();
    }
    if idx.len() % 2 == 1 {
        return S::zero();
    }
    let mut acc = S::zero();
    let first = idx[0];
    for j in 1..idx.len() {
        let mut rest: Vec<usize> = Vec::with_capacity(idx.len() - 2);
        rest.extend_from_slice(&idx[1..j]);
        rest.extend_from_slice(&idx[j + 1..]);
        acc = acc + cov[(first, idx[j])].clone() * gaussian_moment(cov, &rest);
    }
    acc
}

/// Localization integral at a fixed point: the full normal-space Gaussian
/// integral of the model kernel between v and phi v,
/// int K((0,v),(0,phi v),t) dv, with nilpotent corrections by moment
/// expansion. The coefficient matrix must be block diagonal along the
/// tangential/normal split.
pub fn fixed_point_integral<S: Scalar>(
    geom: &FixedPointGeometry<S>,
    data: &MehlerData<S>,
    t: &S,
    ctx: &AlgebraContext,
) -> Result<PiScaled<S>> {
    let n = data.n;
    let a_dim = geom.frame.tangential_dim;
    let b = geom.frame.normal_dim();
    if a_dim + b != n {
        return Err(Error::InvalidInput("splitting does not match dimension".into()));
    }
    if !data.a.is_nilpotent_input() {
        return Err(Error::InvalidInput(
            "fixed_point_integral expects nilpotent coefficients".into(),
        ));
    }
    for i in 0..a_dim {
        for j in a_dim..n {
            if !data.a.get(i, j).is_zero() || !data.a.get(j, i).is_zero() {
                return Err(Error::InvalidInput(
                    "coefficient matrix must be block diagonal in the splitting".into(),
                ));
            }
        }
    }
    let t_inv = t.try_inv().unwrap();
    let theta = data.a.scale(&(t.clone() * S::from_ratio(1, 2)));
    let det_half = a_hat(&data.a.scale(t), ctx)?;
    let m_full = theta_coth_theta(&theta, ctx)?;
    let m_n = m_full.submatrix(a_dim, n);
    let theta_n = theta.submatrix(a_dim, n);
    let phi = geom.phi_normal();

    // quadratic form in v: C = -(1/4t) (1-phi)^T M_N (1-phi)
    //                        - (1/4t) (Theta_N^T phi + phi^T Theta_N)
    let one_minus_phi = &Mat::identity(b) - &phi;
    let omp = FormMat::from_scalar_mat(&one_minus_phi);
    let ompt = FormMat::from_scalar_mat(&one_minus_phi.transpose());
    let phi_f = FormMat::from_scalar_mat(&phi);
    let phi_t = FormMat::from_scalar_mat(&phi.transpose());
    let quarter = S::from_ratio(-1, 4) * t_inv.clone();
    let c_mat = ompt
        .mul(&m_n, ctx)?
        .mul(&omp, ctx)?
        .add(&theta_n.transpose().mul(&phi_f, ctx)?.add(&phi_t.mul(&theta_n, ctx)?))
        .scale(&quarter);

    // numeric part and covariance of the Gaussian: -C0 positive definite,
    // covariance (-2 C0)^{-1}
    let c0 = c_mat.degree0();
    let neg2c0 = c0.scale(&S::from_int(-2));
    let cov = neg2c0
        .inverse()
        .ok_or_else(|| Error::Degenerate("degenerate normal action".into()))?;
    // int exp(v^T C0 v) dv = pi^{b/2} det(-C0)^{-1/2}
    let det_negc0 = c0.map(|x| -x.clone()).det();
    let det_root = det_negc0
        .try_sqrt()
        .ok_or_else(|| Error::NotRepresentable("Gaussian determinant root".into()))?;
    let gauss_norm = det_root
        .try_inv()
        .ok_or_else(|| Error::Degenerate("vanishing Gaussian determinant".into()))?;

    // nilpotent part of the quadratic form: list of (i, j, coeff)
    let mut c_plus: Vec<(usize, usize, GradedElement<S>)> = Vec::new();
    for i in 0..b {
        for j in 0..b {
            let e = c_mat.get(i, j).filter(|m| m.total_degree() > 0);
            if !e.is_zero() {
                c_plus.push((i, j, e));
            }
        }
    }
    // E[exp(v^T C+ v)] = sum_k (1/k!) E[(v^T C+ v)^k], finite by nilpotency
    let mut moment_sum = GradedElement::one();
    let mut power_terms: Vec<(Vec<usize>, GradedElement<S>)> =
        vec![(vec![], GradedElement::one())];
    for k in 1..=((ctx.n + ctx.q_bar) / 2 + 1) as u32 {
        let mut next: Vec<(Vec<usize>, GradedElement<S>)> = Vec::new();
        for (idx, coeff) in &power_terms {
            for (i, j, e) in &c_plus {
                let c = coeff.mul(e, ctx)?;
                if c.is_zero() {
                    continue;
                }
                let mut nidx = idx.clone();
                nidx.push(*i);
                nidx.push(*j);
                next.push((nidx, c));
            }
        }
        if next.is_empty() {
            break;
        }
        let inv_fact = factorial::<S>(k).try_inv().unwrap();
        for (idx, coeff) in &next {
            let mom = gaussian_moment(&cov, idx);
            if mom.is_zero() {
                continue;
            }
            moment_sum = moment_sum.add(&coeff.scale(&(mom * inv_fact.clone())));
        }
        power_terms = next;
    }

    // assemble: (4 t)^{-n/2} pi^{-n/2} * det_half * pi^{b/2} * gauss_norm * moments
    let scale = (S::from_int(4) * t.clone())
        .pow_i64(-((n / 2) as i64))
        .unwrap();
    let value = det_half
        .mul(&moment_sum, ctx)?
        .scale(&(scale * gauss_norm));
    Ok(PiScaled::new(-(n as i32) + b as i32, value))
}

/// The model-side equivariant density: Str[phi~ psi_t I_Q(t)] evaluated
/// through the fixed-point decomposition of the supertrace. For the model
/// operator this is t-independent and equals the characteristic-form density
/// A-hat nu_phi with its (-i)^{n/2} (2 pi)^{-a/2} normalization.
pub fn equivariant_model_density<S: Scalar>(
    geom: &FixedPointGeometry<S>,
    data: &MehlerData<S>,
    t: &S,
    inv_sqrt_t: &S,
    ctx: &AlgebraContext,
) -> Result<PiScaled<S>> {
    let lift = spinor_lift(&geom.frame, ctx)?;
    let integral = fixed_point_integral(geom, data, t, ctx)?;
    let rescaled = integral.map_value(|v| v.psi_rescale(inv_sqrt_t));
    let split = equivariant_supertrace_sigma(&lift.element, &rescaled.value, &geom.frame, ctx)?;
    Ok(PiScaled::new(rescaled.pi_half, split.total()))
}
