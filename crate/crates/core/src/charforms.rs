//! Characteristic forms over nilpotent even coefficient rings: the A-roof
//! genus, the localization factor nu_phi of the normal bundle, Chern
//! characters, and the assembled equivariant index density.
//!
//! Curvature matrices carry even graded elements as entries (fiber 2-forms,
//! base 2-forms, or mixed). Nilpotency makes every series finite, so the
//! exact mode computes these forms with no truncation error; square roots of
//! determinants use the continuity branch prod_j 2 sin(theta_j/2) fixed by
//! the spinor lift.

use crate::error::{Error, Result};
use crate::graded::{
    AlgebraContext, BerezinMode, FiberRep, GradedElement, PiScaled, PlaneRotation,
};
use crate::matrix::Mat;
use crate::scalar::{factorial, i_pow, Scalar};

/// Square matrix with even graded-element entries.
#[derive(Clone, PartialEq, Debug)]
pub struct FormMat<S: Scalar> {
    pub size: usize,
    entries: Vec<GradedElement<S>>,
}

impl<S: Scalar> FormMat<S> {
    pub fn zeros(size: usize) -> Self {
        FormMat {
            size,
            entries: vec![GradedElement::zero(FiberRep::Exterior); size * size],
        }
    }

    pub fn identity(size: usize) -> Self {
        let mut m = Self::zeros(size);
        for i in 0..size {
            m.set(i, i, GradedElement::one());
        }
        m
    }

    pub fn from_scalar_mat(m: &Mat<S>) -> Self {
        assert!(m.is_square());
        let mut out = Self::zeros(m.rows);
        for i in 0..m.rows {
            for j in 0..m.rows {
                out.set(i, j, GradedElement::scalar(m[(i, j)].clone()));
            }
        }
        out
    }

    pub fn get(&self, i: usize, j: usize) -> &GradedElement<S> {
        &self.entries[i * self.size + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: GradedElement<S>) {
        self.entries[i * self.size + j] = v;
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.size, rhs.size);
        let mut out = Self::zeros(self.size);
        for k in 0..self.entries.len() {
            out.entries[k] = self.entries[k].add(&rhs.entries[k]);
        }
        out
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.neg())
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for e in &mut out.entries {
            *e = e.neg();
        }
        out
    }

    pub fn scale(&self, s: &S) -> Self {
        let mut out = self.clone();
        for e in &mut out.entries {
            *e = e.scale(s);
        }
        out
    }

    pub fn scale_elem(&self, g: &GradedElement<S>, ctx: &AlgebraContext) -> Result<Self> {
        let mut out = Self::zeros(self.size);
        for i in 0..self.size {
            for j in 0..self.size {
                out.set(i, j, g.mul(self.get(i, j), ctx)?);
            }
        }
        Ok(out)
    }

    pub fn mul(&self, rhs: &Self, ctx: &AlgebraContext) -> Result<Self> {
        assert_eq!(self.size, rhs.size);
        let mut out = Self::zeros(self.size);
        for i in 0..self.size {
            for k in 0..self.size {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..self.size {
                    let b = rhs.get(k, j);
                    if b.is_zero() {
                        continue;
                    }
                    let prod = a.mul(b, ctx)?;
                    out.set(i, j, out.get(i, j).add(&prod));
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.size);
        for i in 0..self.size {
            for j in 0..self.size {
                out.set(i, j, self.get(j, i).clone());
            }
        }
        out
    }

    pub fn trace(&self) -> GradedElement<S> {
        let mut acc = GradedElement::zero(FiberRep::Exterior);
        for i in 0..self.size {
            acc = acc.add(self.get(i, i));
        }
        acc
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|e| e.is_zero())
    }

    pub fn is_antisymmetric(&self) -> bool {
        self.add(&self.transpose()).is_zero()
    }

    /// Degree-0 (scalar) part as a numeric matrix.
    pub fn degree0(&self) -> Mat<S> {
        Mat::from_fn(self.size, self.size, |i, j| self.get(i, j).scalar_part())
    }

    /// Strictly positive-degree part.
    pub fn positive_degree(&self) -> Self {
        let mut out = Self::zeros(self.size);
        for i in 0..self.size {
            for j in 0..self.size {
                out.set(
                    i,
                    j,
                    self.get(i, j).filter(|m| m.total_degree() > 0),
                );
            }
        }
        out
    }

    pub fn is_nilpotent_input(&self) -> bool {
        self.degree0().is_zero()
    }

    /// Square submatrix on an index range.
    pub fn submatrix(&self, lo: usize, hi: usize) -> Self {
        let mut out = Self::zeros(hi - lo);
        for i in lo..hi {
            for j in lo..hi {
                out.set(i - lo, j - lo, self.get(i, j).clone());
            }
        }
        out
    }

    /// Leibniz determinant; entries must be even (hence central).
    pub fn det(&self, ctx: &AlgebraContext) -> Result<GradedElement<S>> {
        let n = self.size;
        if n == 0 {
            return Ok(GradedElement::one());
        }
        let mut perm: Vec<usize> = (0..n).collect();
        let mut acc = GradedElement::zero(FiberRep::Exterior);
        loop {
            // sign of perm
            let mut sign = 1i32;
            let mut seen = vec![false; n];
            for s in 0..n {
                if seen[s] {
                    continue;
                }
                let mut len = 0;
                let mut t = s;
                while !seen[t] {
                    seen[t] = true;
                    t = perm[t];
                    len += 1;
                }
                if len % 2 == 0 {
                    sign = -sign;
                }
            }
            let mut prod = GradedElement::one();
            for (i, &j) in perm.iter().enumerate() {
                prod = prod.mul(self.get(i, j), ctx)?;
                if prod.is_zero() {
                    break;
                }
            }
            if sign < 0 {
                prod = prod.neg();
            }
            acc = acc.add(&prod);
            // next permutation (lexicographic)
            let mut i = n as isize - 2;
            while i >= 0 && perm[i as usize] >= perm[i as usize + 1] {
                i -= 1;
            }
            if i < 0 {
                break;
            }
            let i = i as usize;
            let mut j = n - 1;
            while perm[j] <= perm[i] {
                j -= 1;
            }
            perm.swap(i, j);
            perm[i + 1..].reverse();
        }
        Ok(acc)
    }
}

/// Scalar exponential of a strictly positive-degree graded element.
pub fn exp_elem<S: Scalar>(x: &GradedElement<S>, ctx: &AlgebraContext) -> Result<GradedElement<S>> {
    if !x.scalar_part().is_zero() {
        return Err(Error::InvalidInput(
            "exp_elem needs a strictly positive-degree argument".into(),
        ));
    }
    let mut acc = GradedElement::one();
    let mut pow = GradedElement::one();
    let mut k = 0u32;
    loop {
        pow = pow.mul(x, ctx)?;
        k += 1;
        if pow.is_zero() || k > 64 {
            break;
        }
        let inv_fact = factorial::<S>(k).try_inv().unwrap();
        acc = acc.add(&pow.scale(&inv_fact));
    }
    Ok(acc)
}

/// Evaluate a scalar power series sum_k coeff(k) M^k on a strictly nilpotent
/// matrix; the sum terminates because positive form degrees are nilpotent.
pub fn matrix_function<S: Scalar>(
    coeff: impl Fn(usize) -> S,
    m: &FormMat<S>,
    ctx: &AlgebraContext,
) -> Result<FormMat<S>> {
    if !m.is_nilpotent_input() {
        return Err(Error::InvalidInput(
            "matrix_function needs a strictly positive-degree matrix".into(),
        ));
    }
    let mut acc = FormMat::identity(m.size).scale(&coeff(0));
    let mut pow = FormMat::identity(m.size);
    for k in 1..=128 {
        pow = pow.mul(m, ctx)?;
        if pow.is_zero() {
            break;
        }
        acc = acc.add(&pow.scale(&coeff(k)));
    }
    Ok(acc)
}

/// exp(M) for strictly nilpotent M.
pub fn exp_nilpotent<S: Scalar>(m: &FormMat<S>, ctx: &AlgebraContext) -> Result<FormMat<S>> {
    matrix_function(
        |k| factorial::<S>(k as u32).try_inv().unwrap(),
        m,
        ctx,
    )
}

/// log(I + P) for strictly nilpotent P.
pub fn log_one_plus<S: Scalar>(p: &FormMat<S>, ctx: &AlgebraContext) -> Result<FormMat<S>> {
    matrix_function(
        |k| {
            if k == 0 {
                S::zero()
            } else {
                let s = S::from_ratio(1, k as i64);
                if k % 2 == 0 {
                    -s
                } else {
                    s
                }
            }
        },
        p,
        ctx,
    )
}

/// det^(1/2) of M = M0 + (positive degree), M0 numerically invertible with a
/// representable square root of its determinant; the nilpotent correction is
/// exp((1/2) tr log(I + M0^{-1} N)).
pub fn det_sqrt<S: Scalar>(m: &FormMat<S>, ctx: &AlgebraContext) -> Result<GradedElement<S>> {
    let m0 = m.degree0();
    let d0 = m0.det();
    let root = d0.try_sqrt().ok_or_else(|| {
        Error::NotRepresentable("det has no exact square root; use float mode".into())
    })?;
    let inv0 = m0
        .inverse()
        .ok_or_else(|| Error::Degenerate("singular numeric part in det_sqrt".into()))?;
    let n_part = m.positive_degree();
    let x = FormMat::from_scalar_mat(&inv0).mul(&n_part, ctx)?;
    let tr_log = log_one_plus(&x, ctx)?.trace();
    let corr = exp_elem(&tr_log.scale(&S::from_ratio(1, 2)), ctx)?;
    Ok(corr.scale(&root))
}

/// A-roof genus det^(1/2)((R/2)/sinh(R/2)) of an antisymmetric curvature
/// matrix with nilpotent even entries; exact, with unit constant term.
pub fn a_hat<S: Scalar>(r: &FormMat<S>, ctx: &AlgebraContext) -> Result<GradedElement<S>> {
    if !r.is_antisymmetric() {
        return Err(Error::InvalidInput("a_hat needs an antisymmetric matrix".into()));
    }
    if !r.is_nilpotent_input() {
        return Err(Error::InvalidInput(
            "a_hat expects strictly positive-degree curvature entries".into(),
        ));
    }
    if r.size == 0 {
        return Ok(GradedElement::one());
    }
    // G = sinh(R/2)/(R/2) = I + sum_{k>=1} R^{2k} / (4^k (2k+1)!)
    let r2 = r.mul(r, ctx)?;
    let mut g = FormMat::identity(r.size);
    let mut pow = FormMat::identity(r.size);
    for k in 1..=32u32 {
        pow = pow.mul(&r2, ctx)?;
        if pow.is_zero() {
            break;
        }
        let denom = factorial::<S>(2 * k + 1) * S::from_int(4).pow_i64(k as i64).unwrap();
        g = g.add(&pow.scale(&denom.try_inv().unwrap()));
    }
    let p = g.positive_degree();
    let tr_log = log_one_plus(&p, ctx)?.trace();
    exp_elem(&tr_log.scale(&S::from_ratio(-1, 2)), ctx)
}

/// Normal rotation data for the localization factor: ordered 2x2 blocks,
/// block j acting on normal coordinates (2j-1, 2j), angles through their
/// half-angle values (continuity branch of all square roots).
#[derive(Clone, Debug)]
pub struct IsometryNormalAction<S> {
    pub blocks: Vec<RotationBlock<S>>,
}

#[derive(Clone, Debug)]
pub struct RotationBlock<S> {
    pub cos_half: S,
    pub sin_half: S,
}

impl RotationBlock<crate::scalar::C64> {
    pub fn from_angle(theta: f64) -> Self {
        RotationBlock {
            cos_half: crate::scalar::C64::new((theta / 2.0).cos(), 0.0),
            sin_half: crate::scalar::C64::new((theta / 2.0).sin(), 0.0),
        }
    }
}

impl<S: Scalar> IsometryNormalAction<S> {
    pub fn identity() -> Self {
        IsometryNormalAction { blocks: vec![] }
    }

    pub fn normal_dim(&self) -> usize {
        2 * self.blocks.len()
    }

    /// phi^N as a numeric matrix (block rotations by the full angles).
    pub fn matrix(&self) -> Mat<S> {
        let b = self.normal_dim();
        let mut m = Mat::zeros(b, b);
        for (j, blk) in self.blocks.iter().enumerate() {
            let c = S::one() - S::from_int(2) * blk.sin_half.clone() * blk.sin_half.clone();
            let s = S::from_int(2) * blk.sin_half.clone() * blk.cos_half.clone();
            let (p, q) = (2 * j, 2 * j + 1);
            m[(p, p)] = c.clone();
            m[(q, q)] = c;
            m[(p, q)] = -s.clone();
            m[(q, p)] = s;
        }
        m
    }

    /// Continuity branch of det^(1/2)(1 - phi^N) = prod_j 2 sin(theta_j/2).
    pub fn det_half(&self) -> Result<S> {
        let mut acc = S::one();
        for blk in &self.blocks {
            if blk.sin_half.is_zero() {
                return Err(Error::Degenerate(
                    "normal rotation block with eigenvalue 1".into(),
                ));
            }
            acc = acc * S::from_int(2) * blk.sin_half.clone();
        }
        Ok(acc)
    }

    /// View on the fiber axes following a tangential block of dimension `a`.
    pub fn to_frame(&self, a: usize, ctx: &AlgebraContext) -> Result<crate::graded::FixedPointFrame<S>> {
        let rotations = self
            .blocks
            .iter()
            .enumerate()
            .map(|(j, blk)| PlaneRotation {
                axis1: a + 2 * j + 1,
                axis2: a + 2 * j + 2,
                cos_half: blk.cos_half.clone(),
                sin_half: blk.sin_half.clone(),
            })
            .collect();
        crate::graded::FixedPointFrame::new(a, rotations, ctx)
    }
}

/// Localization factor nu_phi = det^(-1/2)(1 - phi^N exp(-R^N)).
pub fn nu_phi<S: Scalar>(
    action: &IsometryNormalAction<S>,
    r_n: &FormMat<S>,
    ctx: &AlgebraContext,
) -> Result<GradedElement<S>> {
    let b = action.normal_dim();
    if r_n.size != b {
        return Err(Error::InvalidInput(format!(
            "normal curvature size {} does not match normal dimension {b}",
            r_n.size
        )));
    }
    if b == 0 {
        return Ok(GradedElement::one());
    }
    if !r_n.is_antisymmetric() || !r_n.is_nilpotent_input() {
        return Err(Error::InvalidInput(
            "normal curvature must be antisymmetric with positive-degree entries".into(),
        ));
    }
    let det_half0 = action.det_half()?;
    let phi = action.matrix();
    let e = exp_nilpotent(&r_n.neg(), ctx)?;
    // M = (I - phi) - phi (E - I); correction from det(I + (I-phi)^{-1} N)
    let a0 = &Mat::identity(b) - &phi;
    let a0_inv = a0
        .inverse()
        .ok_or_else(|| Error::Degenerate("1 - phi^N singular".into()))?;
    let n_part = FormMat::from_scalar_mat(&phi)
        .mul(&e.sub(&FormMat::identity(b)), ctx)?
        .neg();
    let x = FormMat::from_scalar_mat(&a0_inv).mul(&n_part, ctx)?;
    let tr_log = log_one_plus(&x, ctx)?.trace();
    let corr = exp_elem(&tr_log.scale(&S::from_ratio(-1, 2)), ctx)?;
    let lead = det_half0
        .try_inv()
        .ok_or_else(|| Error::Degenerate("vanishing det^(1/2)(1 - phi^N)".into()))?;
    Ok(corr.scale(&lead))
}

/// Chern character Tr exp(-C) for a nilpotent twist curvature.
pub fn chern_character<S: Scalar>(c: &FormMat<S>, ctx: &AlgebraContext) -> Result<GradedElement<S>> {
    if !c.is_nilpotent_input() {
        return Err(Error::InvalidInput(
            "chern_character expects strictly positive-degree curvature".into(),
        ));
    }
    exp_nilpotent(&c.neg(), ctx).map(|e| e.trace())
}

/// The assembled equivariant index density
/// (-i)^(n/2) (2 pi)^(-a/2) | A-hat(R_fix) nu_phi(R_N) ch(twist) |^(a).
///
/// Fiber generators with index <= a are the tangential directions entering
/// the Berezin pairing; the pi power rides along formally.
pub fn equivariant_index_density<S: Scalar>(
    r_fix: &FormMat<S>,
    action: &IsometryNormalAction<S>,
    r_n: &FormMat<S>,
    a: usize,
    n: usize,
    twist: Option<&FormMat<S>>,
    ctx: &AlgebraContext,
) -> Result<PiScaled<S>> {
    let b = action.normal_dim();
    if a + b != n || n % 2 != 0 || a % 2 != 0 {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: a={a} b={b} n={n}"
        )));
    }
    let ahat = a_hat(r_fix, ctx)?;
    let nu = nu_phi(action, r_n, ctx)?;
    let mut density = ahat.mul(&nu, ctx)?;
    if let Some(tw) = twist {
        density = density.mul(&chern_character(tw, ctx)?, ctx)?;
    }
    let paired = density.berezin(a, BerezinMode::StarZero, ctx)?;
    // (-i)^(n/2) 2^(-a/2), with pi^(-a/2) tracked formally
    let pref = i_pow::<S>(-((n / 2) as i64)) * S::from_ratio(1, 1i64 << (a / 2));
    Ok(PiScaled::new(-(a as i32), paired.scale(&pref)))
}

/// The phi = id density in its (2 i pi)^(-n/2) A-hat normalization; the
/// equivariant density at a = n must coincide with it exactly.
pub fn index_density_untwisted<S: Scalar>(
    r: &FormMat<S>,
    n: usize,
    ctx: &AlgebraContext,
) -> Result<PiScaled<S>> {
    if n % 2 != 0 {
        return Err(Error::InvalidInput("even fiber dimension required".into()));
    }
    let ahat = a_hat(r, ctx)?;
    let paired = ahat.berezin(n, BerezinMode::Full, ctx)?;
    // (2 i pi)^(-n/2) = 2^(-n/2) i^(-n/2) pi^(-n/2)
    let pref = i_pow::<S>(-((n / 2) as i64)) * S::from_ratio(1, 1i64 << (n / 2));
    Ok(PiScaled::new(-(n as i32), paired.scale(&pref)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{C64, Exact};
    use num_traits::{One, Zero};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn ctx(n: usize, q: usize) -> AlgebraContext {
        AlgebraContext::new(n, q, &[]).unwrap()
    }

    fn base2form(i: usize, j: usize, c: &AlgebraContext) -> GradedElement<Exact> {
        GradedElement::base_gen(i, c)
            .unwrap()
            .mul(&GradedElement::base_gen(j, c).unwrap(), c)
            .unwrap()
    }

    #[test]
    fn matrix_function_exp_of_zero() {
        let c = ctx(2, 2);
        let m = FormMat::<Exact>::zeros(3);
        let e = exp_nilpotent(&m, &c).unwrap();
        assert_eq!(e, FormMat::identity(3));
    }

    #[test]
    fn matrix_function_exp_inverse() {
        let c = ctx(2, 4);
        let mut m = FormMat::<Exact>::zeros(2);
        m.set(0, 1, base2form(1, 2, &c));
        m.set(1, 0, base2form(3, 4, &c).neg());
        let e = exp_nilpotent(&m, &c).unwrap();
        let e_inv = exp_nilpotent(&m.neg(), &c).unwrap();
        assert_eq!(e.mul(&e_inv, &c).unwrap(), FormMat::identity(2));
    }

    #[test]
    fn matrix_function_log_exp_roundtrip() {
        let c = ctx(2, 4);
        let mut m = FormMat::<Exact>::zeros(2);
        m.set(0, 0, base2form(1, 2, &c));
        m.set(0, 1, base2form(1, 3, &c).scale(&Exact::from_int(2)));
        m.set(1, 1, base2form(2, 4, &c));
        let l = log_one_plus(&m, &c).unwrap();
        let back = exp_nilpotent(&l, &c).unwrap();
        assert_eq!(back, FormMat::identity(2).add(&m));
    }

    #[test]
    fn a_hat_of_zero_is_one() {
        let c = ctx(2, 2);
        let r = FormMat::<Exact>::zeros(2);
        assert_eq!(a_hat(&r, &c).unwrap(), GradedElement::one());
    }

    /// One-variable series oracle: the coefficients of (x/2)/sin(x/2)
    /// computed by reciprocal-series division, compared against a_hat of the
    /// single 2x2 block whose entry is a formal even nilpotent built from
    /// disjoint base 2-forms.
    #[test]
    fn a_hat_single_block_matches_series_oracle() {
        // sin(y)/y = 1 - y^2/6 + y^4/120 - ... with y = x/2;
        // invert the power series in x^2 up to x^8.
        let half = |k: i64| Exact::from_ratio(1, k); // helper
        // series of sin(x/2)/(x/2) in powers of x^2: a_k = (-1)^k / (4^k (2k+1)!)
        let mut s = vec![Exact::one(); 5];
        for k in 1..5i64 {
            let mut denom = Exact::one();
            for j in 2..=(2 * k + 1) {
                denom = denom * Exact::from_int(j);
            }
            denom = denom * Exact::from_int(4).pow_i64(k).unwrap();
            s[k as usize] = half(1) * denom.try_inv().unwrap()
                * (if k % 2 == 0 { Exact::one() } else { -Exact::one() });
        }
        // reciprocal series r with r*s = 1
        let mut r = vec![Exact::zero(); 5];
        r[0] = Exact::one();
        for k in 1..5 {
            let mut acc = Exact::zero();
            for j in 1..=k {
                acc = acc + s[j].clone() * r[k - j].clone();
            }
            r[k] = -acc;
        }
        // r[1] should be 1/24, r[2] = 7/5760
        assert_eq!(r[1], Exact::from_ratio(1, 24));
        assert_eq!(r[2], Exact::from_ratio(7, 5760));

        // u = sum of 4 disjoint base 2-form blocks so u^4 != 0
        let c = ctx(2, 8);
        let mut u = GradedElement::<Exact>::zero(FiberRep::Exterior);
        for j in 0..4 {
            u = u.add(&base2form(2 * j + 1, 2 * j + 2, &c));
        }
        let mut rmat = FormMat::<Exact>::zeros(2);
        rmat.set(0, 1, u.clone());
        rmat.set(1, 0, u.neg());
        let ahat = a_hat(&rmat, &c).unwrap();
        // coefficient of w1 w2 (mask dy1 dy2 dy3 dy4): u^2 has it with weight 2
        let w12 = base2form(1, 2, &c).mul(&base2form(3, 4, &c), &c).unwrap();
        let mask12 = *w12.terms().next().unwrap().0;
        assert_eq!(ahat.coeff(&mask12), Exact::from_int(2) * r[1].clone());
        // coefficient of w1 w2 w3 w4: u^4 carries it with weight 4! = 24
        let w1234 = w12
            .mul(&base2form(5, 6, &c), &c)
            .unwrap()
            .mul(&base2form(7, 8, &c), &c)
            .unwrap();
        let mask1234 = *w1234.terms().next().unwrap().0;
        assert_eq!(
            ahat.coeff(&mask1234),
            Exact::from_int(24) * r[2].clone()
        );
    }

    #[test]
    fn a_hat_multiplicative_on_block_sums() {
        let c = ctx(2, 8);
        let u = base2form(1, 2, &c).add(&base2form(3, 4, &c));
        let v = base2form(5, 6, &c).add(&base2form(7, 8, &c));
        let mut r1 = FormMat::<Exact>::zeros(2);
        r1.set(0, 1, u.clone());
        r1.set(1, 0, u.neg());
        let mut r2 = FormMat::<Exact>::zeros(2);
        r2.set(0, 1, v.clone());
        r2.set(1, 0, v.neg());
        let mut sum = FormMat::<Exact>::zeros(4);
        sum.set(0, 1, u.clone());
        sum.set(1, 0, u.neg());
        sum.set(2, 3, v.clone());
        sum.set(3, 2, v.neg());
        let lhs = a_hat(&sum, &c).unwrap();
        let rhs = a_hat(&r1, &c)
            .unwrap()
            .mul(&a_hat(&r2, &c).unwrap(), &c)
            .unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn a_hat_degree_support() {
        // only degrees = 0 mod 4 appear for antisymmetric degree-2 input
        let c = ctx(2, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let k = 3;
            let mut r = FormMat::<Exact>::zeros(k);
            for i in 0..k {
                for j in (i + 1)..k {
                    let mut entry = GradedElement::zero(FiberRep::Exterior);
                    for _ in 0..2 {
                        let a = rng.gen_range(1..=8);
                        let b = rng.gen_range(1..=8);
                        if a != b {
                            let f = base2form(a.min(b), a.max(b), &c)
                                .scale(&Exact::from_int(rng.gen_range(-3..=3)));
                            entry = entry.add(&f);
                        }
                    }
                    r.set(i, j, entry.clone());
                    r.set(j, i, entry.neg());
                }
            }
            let ahat = a_hat(&r, &c).unwrap();
            assert_eq!(ahat.scalar_part(), Exact::one());
            for (m, _) in ahat.terms() {
                assert_eq!(m.total_degree() % 4, 0, "degree {}", m.total_degree());
            }
        }
    }

    #[test]
    fn det_sqrt_squares_to_det() {
        let c = ctx(2, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let k = 3;
            // numeric part: unitriangular (det 1) so the root is exact
            let mut m = FormMat::<Exact>::zeros(k);
            for i in 0..k {
                m.set(i, i, GradedElement::one());
                for j in (i + 1)..k {
                    m.set(
                        i,
                        j,
                        GradedElement::scalar(Exact::from_int(rng.gen_range(-3..=3))),
                    );
                }
            }
            for i in 0..k {
                for j in 0..k {
                    let a = rng.gen_range(1..=6);
                    let b = rng.gen_range(1..=6);
                    if a < b {
                        let f = base2form(a, b, &c).scale(&Exact::from_int(rng.gen_range(-2..=2)));
                        m.set(i, j, m.get(i, j).add(&f));
                    }
                }
            }
            let root = det_sqrt(&m, &c).unwrap();
            let square = root.mul(&root, &c).unwrap();
            assert_eq!(square, m.det(&c).unwrap());
        }
    }

    #[test]
    fn nu_phi_theta_pi_is_half() {
        let c = ctx(2, 2);
        let action = IsometryNormalAction::<Exact> {
            blocks: vec![RotationBlock {
                cos_half: Exact::zero(),
                sin_half: Exact::one(),
            }],
        };
        let nu = nu_phi(&action, &FormMat::zeros(2), &c).unwrap();
        assert_eq!(nu, GradedElement::scalar(Exact::from_ratio(1, 2)));
    }

    #[test]
    fn nu_phi_matches_inverse_sine_products() {
        let c = ctx(2, 2);
        for angles in [vec![0.7], vec![2.1, 0.4], vec![std::f64::consts::FRAC_PI_2]] {
            let action = IsometryNormalAction::<C64> {
                blocks: angles.iter().map(|&t| RotationBlock::from_angle(t)).collect(),
            };
            let b = action.normal_dim();
            let nu = nu_phi(&action, &FormMat::zeros(b), &c).unwrap();
            let expected: f64 = angles
                .iter()
                .map(|t| 1.0 / (2.0 * (t / 2.0).sin()))
                .product();
            assert!((nu.scalar_part().re - expected).abs() < 1e-12);
            assert!(nu.scalar_part().im.abs() < 1e-14);
        }
    }

    #[test]
    fn nu_phi_nilpotent_expansion_vs_symbolic_determinant() {
        // theta = pi, R_N a single block u: compare against brute-force
        // 2x2 determinant plus scalar (1+x)^(-1/2) expansion
        let c = ctx(2, 2);
        let u = base2form(1, 2, &c);
        let action = IsometryNormalAction::<Exact> {
            blocks: vec![RotationBlock {
                cos_half: Exact::zero(),
                sin_half: Exact::one(),
            }],
        };
        let mut r_n = FormMat::<Exact>::zeros(2);
        r_n.set(0, 1, u.clone());
        r_n.set(1, 0, u.neg());
        let nu = nu_phi(&action, &r_n, &c).unwrap();

        // brute force: M = I - phi e^{-R}, phi = -I; e^{-R} = I - R (u^2 = 0)
        // M = I + (I - R) = 2I - R; det = 4 + u^2 - ... expand by hand:
        // det = (2)(2) - (-u)(u) = 4 + u^2 = 4 (u^2=0 at q_bar=2)... keep general:
        let e = exp_nilpotent(&r_n.neg(), &c).unwrap();
        let m = FormMat::identity(2).add(&e); // I - (-I) e^{-R}
        let det = m.det(&c).unwrap();
        // det = 4 (1 + x) with x nilpotent; det^{-1/2} = (1/2)(1 - x/2 + 3x^2/8 ...)
        let x = det
            .scale(&Exact::from_ratio(1, 4))
            .sub(&GradedElement::one());
        let mut series = GradedElement::one();
        let mut pow = GradedElement::one();
        let coeffs = [
            Exact::from_ratio(-1, 2),
            Exact::from_ratio(3, 8),
            Exact::from_ratio(-5, 16),
        ];
        for cf in coeffs {
            pow = pow.mul(&x, &c).unwrap();
            if pow.is_zero() {
                break;
            }
            series = series.add(&pow.scale(&cf));
        }
        let brute = series.scale(&Exact::from_ratio(1, 2));
        assert_eq!(nu, brute);
    }

    #[test]
    fn chern_character_examples() {
        let c = ctx(2, 4);
        // zero curvature of rank r gives r
        let z = FormMat::<Exact>::zeros(3);
        assert_eq!(
            chern_character(&z, &c).unwrap(),
            GradedElement::scalar(Exact::from_int(3))
        );
        // rank 1 with 2-form entry: 1 - c + c^2/2
        let f = base2form(1, 2, &c);
        let mut m = FormMat::<Exact>::zeros(1);
        m.set(0, 0, f.clone());
        let ch = chern_character(&m, &c).unwrap();
        let expected = GradedElement::one()
            .sub(&f)
            .add(&f.mul(&f, &c).unwrap().scale(&Exact::from_ratio(1, 2)));
        assert_eq!(ch, expected);
        // block diagonal additivity
        let g = base2form(3, 4, &c);
        let mut blk = FormMat::<Exact>::zeros(2);
        blk.set(0, 0, f.clone());
        blk.set(1, 1, g.clone());
        let mut m2 = FormMat::<Exact>::zeros(1);
        m2.set(0, 0, g);
        assert_eq!(
            chern_character(&blk, &c).unwrap(),
            chern_character(&m, &c).unwrap().add(&chern_character(&m2, &c).unwrap())
        );
    }

    #[test]
    fn density_point_fixed_point_value() {
        // a=0, n=2, theta=pi, zero curvature: (-i) * (1/2)
        let c = ctx(2, 0);
        let action = IsometryNormalAction::<Exact> {
            blocks: vec![RotationBlock {
                cos_half: Exact::zero(),
                sin_half: Exact::one(),
            }],
        };
        let d = equivariant_index_density(
            &FormMat::zeros(0),
            &action,
            &FormMat::zeros(2),
            0,
            2,
            None,
            &c,
        )
        .unwrap();
        assert_eq!(d.pi_half, 0);
        assert_eq!(
            d.value.scalar_part(),
            -Exact::i() * Exact::from_ratio(1, 2)
        );
    }

    #[test]
    fn density_identity_reduction_matches_untwisted_form() {
        let c = ctx(4, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let mut r = FormMat::<Exact>::zeros(4);
            for i in 0..4 {
                for j in (i + 1)..4 {
                    // mixed fiber/base 2-form entries
                    let mut entry = GradedElement::<Exact>::zero(FiberRep::Exterior);
                    let fi = rng.gen_range(1..=4);
                    let fj = rng.gen_range(1..=4);
                    if fi != fj {
                        let f = GradedElement::exterior_gen(fi.min(fj), &c)
                            .unwrap()
                            .mul(&GradedElement::exterior_gen(fi.max(fj), &c).unwrap(), &c)
                            .unwrap()
                            .scale(&Exact::from_int(rng.gen_range(-2..=2)));
                        entry = entry.add(&f);
                    }
                    let bi = rng.gen_range(1..=4);
                    let bj = rng.gen_range(1..=4);
                    if bi != bj {
                        let f = base2form(bi.min(bj), bi.max(bj), &c)
                            .scale(&Exact::from_int(rng.gen_range(-2..=2)));
                        entry = entry.add(&f);
                    }
                    r.set(i, j, entry.clone());
                    r.set(j, i, entry.neg());
                }
            }
            let lhs = equivariant_index_density(
                &r,
                &IsometryNormalAction::identity(),
                &FormMat::zeros(0),
                4,
                4,
                None,
                &c,
            )
            .unwrap();
            let rhs = index_density_untwisted(&r, 4, &c).unwrap();
            assert!(lhs.eq_exact(&rhs), "lhs {:?} rhs {:?}", lhs, rhs);
        }
    }
}
