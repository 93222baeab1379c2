//! Volterra pseudodifferential symbol calculus with graded coefficients:
//! parabolic homogeneity, exact asymptotic composition, parametrix
//! construction, diagonal heat-coefficient extraction, and the Getzler
//! order/model-operator machinery.
//!
//! Symbols live in the span of `coeff * x^alpha xi^beta u^j` with
//! `u = i tau + |xi|^2`; these monomials are linearly independent, so normal
//! forms are unique, the class is closed under composition and derivatives,
//! and negative powers of `u` are automatically holomorphic on the lower
//! half tau-plane (the Volterra property). Parabolic homogeneity of a term
//! is `|beta| + 2 j`.

use crate::error::{Error, Result};
use crate::graded::{multi_factorial, AlgebraContext, FiberRep, GradedElement, PiScaled};
use crate::scalar::{double_factorial_odd, i_pow, Scalar};
use std::collections::BTreeMap;
use std::fmt::Write as _;

pub type Multi = Vec<u32>;

fn multi_add(a: &[u32], b: &[u32]) -> Multi {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn multi_total(a: &[u32]) -> u32 {
    a.iter().sum()
}

fn binom(n: u32, k: u32) -> i64 {
    let mut acc = 1i64;
    for j in 0..k.min(n - k.min(n)) {
        let _ = j;
    }
    let k = k.min(n - k);
    for j in 0..k {
        acc = acc * (n - j) as i64 / (j + 1) as i64;
    }
    acc
}

/// One canonical symbol term `coeff * x^alpha xi^beta u^upow`.
#[derive(Clone, Debug)]
pub struct SymbolTerm<S: Scalar> {
    pub coeff: GradedElement<S>,
    pub x_pow: Multi,
    pub xi_pow: Multi,
    pub u_pow: i32,
}

impl<S: Scalar> SymbolTerm<S> {
    pub fn homogeneity(&self) -> i32 {
        multi_total(&self.xi_pow) as i32 + 2 * self.u_pow
    }
}

/// Finite sum of symbol terms in canonical form.
#[derive(Clone, Debug)]
pub struct GradedSymbol<S: Scalar> {
    pub dim: usize,
    pub terms: Vec<SymbolTerm<S>>,
    pub declared_order: i32,
}

impl<S: Scalar> GradedSymbol<S> {
    pub fn zero(dim: usize, order: i32) -> Self {
        GradedSymbol {
            dim,
            terms: vec![],
            declared_order: order,
        }
    }

    pub fn constant(dim: usize, coeff: GradedElement<S>) -> Self {
        GradedSymbol {
            dim,
            terms: vec![SymbolTerm {
                coeff,
                x_pow: vec![0; dim],
                xi_pow: vec![0; dim],
                u_pow: 0,
            }],
            declared_order: 0,
        }
        .normalized()
    }

    /// The resolvent power u^{-m} (or any power of u).
    pub fn u_power(dim: usize, j: i32) -> Self {
        GradedSymbol {
            dim,
            terms: vec![SymbolTerm {
                coeff: GradedElement::one(),
                x_pow: vec![0; dim],
                xi_pow: vec![0; dim],
                u_pow: j,
            }],
            declared_order: 2 * j,
        }
    }

    /// Build a term from the external (tau-power, resolvent-power) data by
    /// expanding tau = -i (u - |xi|^2).
    pub fn from_tau_res(
        dim: usize,
        coeff: GradedElement<S>,
        x_pow: Multi,
        xi_pow: Multi,
        tau_pow: u32,
        res_pow: u32,
    ) -> Self {
        let mut out = GradedSymbol::zero(dim, 0);
        // tau^k = (-i)^k sum_r C(k,r) u^r (-|xi|^2)^(k-r)
        for r in 0..=tau_pow {
            let c = i_pow::<S>(-(tau_pow as i64))
                * S::from_int(binom(tau_pow, r))
                * (if (tau_pow - r) % 2 == 1 {
                    -S::one()
                } else {
                    S::one()
                });
            // (|xi|^2)^(k-r) expanded by multinomials
            for (extra_xi, mult) in xi_square_power(dim, tau_pow - r) {
                let term = SymbolTerm {
                    coeff: coeff.scale(&(c.clone() * S::from_int(mult))),
                    x_pow: x_pow.clone(),
                    xi_pow: multi_add(&xi_pow, &extra_xi),
                    u_pow: r as i32 - res_pow as i32,
                };
                out.terms.push(term);
            }
        }
        let order = out
            .terms
            .iter()
            .map(|t| t.homogeneity())
            .max()
            .unwrap_or(0);
        out.declared_order = order;
        out.normalized()
    }

    pub fn normalized(mut self) -> Self {
        let mut map: BTreeMap<(Multi, Multi, i32), GradedElement<S>> = BTreeMap::new();
        for t in self.terms.drain(..) {
            if t.coeff.is_zero() {
                continue;
            }
            let key = (t.x_pow.clone(), t.xi_pow.clone(), t.u_pow);
            match map.get_mut(&key) {
                Some(acc) => *acc = acc.add(&t.coeff),
                None => {
                    map.insert(key, t.coeff);
                }
            }
        }
        self.terms = map
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|((x_pow, xi_pow, u_pow), coeff)| SymbolTerm {
                coeff,
                x_pow,
                xi_pow,
                u_pow,
            })
            .collect();
        self
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.coeff.is_zero())
    }

    pub fn add(&self, rhs: &Self) -> Self {
        let mut out = self.clone();
        out.terms.extend(rhs.terms.iter().cloned());
        out.declared_order = self.declared_order.max(rhs.declared_order);
        out.normalized()
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.scale_all(&-S::one()))
    }

    pub fn scale_all(&self, s: &S) -> Self {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.coeff = t.coeff.scale(s);
        }
        out
    }

    pub fn max_homogeneity(&self) -> Option<i32> {
        self.terms.iter().map(|t| t.homogeneity()).max()
    }

    /// Terms of one parabolic homogeneity.
    pub fn homogeneous_part(&self, h: i32) -> Self {
        let mut out = self.clone();
        out.terms.retain(|t| t.homogeneity() == h);
        out
    }

    pub fn d_xi(&self, i: usize) -> Self {
        let mut out = GradedSymbol::zero(self.dim, self.declared_order - 1);
        for t in &self.terms {
            if t.xi_pow[i] > 0 {
                let mut xi = t.xi_pow.clone();
                xi[i] -= 1;
                out.terms.push(SymbolTerm {
                    coeff: t.coeff.scale(&S::from_int(t.xi_pow[i] as i64)),
                    x_pow: t.x_pow.clone(),
                    xi_pow: xi,
                    u_pow: t.u_pow,
                });
            }
            if t.u_pow != 0 {
                let mut xi = t.xi_pow.clone();
                xi[i] += 1;
                out.terms.push(SymbolTerm {
                    coeff: t.coeff.scale(&S::from_int(2 * t.u_pow as i64)),
                    x_pow: t.x_pow.clone(),
                    xi_pow: xi,
                    u_pow: t.u_pow - 1,
                });
            }
        }
        out.normalized()
    }

    pub fn d_x(&self, i: usize) -> Self {
        let mut out = GradedSymbol::zero(self.dim, self.declared_order);
        for t in &self.terms {
            if t.x_pow[i] > 0 {
                let mut x = t.x_pow.clone();
                x[i] -= 1;
                out.terms.push(SymbolTerm {
                    coeff: t.coeff.scale(&S::from_int(t.x_pow[i] as i64)),
                    x_pow: x,
                    xi_pow: t.xi_pow.clone(),
                    u_pow: t.u_pow,
                });
            }
        }
        out.normalized()
    }

    pub fn d_tau(&self) -> Self {
        let mut out = GradedSymbol::zero(self.dim, self.declared_order - 2);
        for t in &self.terms {
            if t.u_pow != 0 {
                out.terms.push(SymbolTerm {
                    coeff: t.coeff.scale(&(S::from_int(t.u_pow as i64) * S::i())),
                    x_pow: t.x_pow.clone(),
                    xi_pow: t.xi_pow.clone(),
                    u_pow: t.u_pow - 1,
                });
            }
        }
        out.normalized()
    }

    fn term_mul(a: &SymbolTerm<S>, b: &SymbolTerm<S>, ctx: &AlgebraContext) -> Result<SymbolTerm<S>> {
        Ok(SymbolTerm {
            coeff: a.coeff.mul(&b.coeff, ctx)?,
            x_pow: multi_add(&a.x_pow, &b.x_pow),
            xi_pow: multi_add(&a.xi_pow, &b.xi_pow),
            u_pow: a.u_pow + b.u_pow,
        })
    }

    /// Pointwise product of symbols (no composition expansion).
    pub fn pointwise_mul(&self, rhs: &Self, ctx: &AlgebraContext) -> Result<Self> {
        let mut out = GradedSymbol::zero(self.dim, self.declared_order + rhs.declared_order);
        for a in &self.terms {
            for b in &rhs.terms {
                out.terms.push(Self::term_mul(a, b, ctx)?);
            }
        }
        Ok(out.normalized())
    }

    /// Maximum x-degree per coordinate.
    fn x_degree_bounds(&self) -> Multi {
        let mut bounds = vec![0u32; self.dim];
        for t in &self.terms {
            for (b, &p) in bounds.iter_mut().zip(&t.x_pow) {
                *b = (*b).max(p);
            }
        }
        bounds
    }
}

/// Exact composition sum_alpha (1/alpha!) d_xi^alpha q1 . D_x^alpha q2;
/// terminates because q2 has polynomial x-dependence.
pub fn compose<S: Scalar>(
    q1: &GradedSymbol<S>,
    q2: &GradedSymbol<S>,
    ctx: &AlgebraContext,
) -> Result<GradedSymbol<S>> {
    assert_eq!(q1.dim, q2.dim);
    let dim = q1.dim;
    let bounds = q2.x_degree_bounds();
    let mut out = GradedSymbol::zero(dim, q1.declared_order + q2.declared_order);
    // iterate alpha <= bounds componentwise
    let mut alpha = vec![0u32; dim];
    loop {
        // d_xi^alpha q1
        let mut dq1 = q1.clone();
        for (i, &a) in alpha.iter().enumerate() {
            for _ in 0..a {
                dq1 = dq1.d_xi(i);
            }
        }
        if !dq1.is_zero() {
            // D_x^alpha q2 = (-i)^{|alpha|} d_x^alpha q2
            let mut dq2 = q2.clone();
            for (i, &a) in alpha.iter().enumerate() {
                for _ in 0..a {
                    dq2 = dq2.d_x(i);
                }
            }
            let total = multi_total(&alpha);
            let scale = i_pow::<S>(-(total as i64))
                * multi_factorial::<S>(&alpha).try_inv().unwrap();
            let piece = dq1.pointwise_mul(&dq2, ctx)?.scale_all(&scale);
            out = out.add(&piece);
        }
        // advance alpha
        let mut i = 0;
        loop {
            if i == dim {
                return Ok(out.normalized());
            }
            alpha[i] += 1;
            if alpha[i] <= bounds[i] {
                break;
            }
            alpha[i] = 0;
            i += 1;
        }
    }
}

/// (|xi|^2)^p expanded into xi monomials with multinomial weights.
fn xi_square_power(dim: usize, p: u32) -> Vec<(Multi, i64)> {
    let mut out = Vec::new();
    // compositions of p into dim parts
    fn rec(dim: usize, left: u32, idx: usize, cur: &mut Vec<u32>, out: &mut Vec<(Multi, i64)>) {
        if idx == dim - 1 {
            cur.push(left);
            let mult = {
                // p! / prod(parts!)
                let p: u32 = cur.iter().sum();
                let mut num = 1i64;
                for j in 2..=p as i64 {
                    num *= j;
                }
                for &part in cur.iter() {
                    for j in 2..=part as i64 {
                        num /= j;
                    }
                }
                num
            };
            out.push((cur.iter().map(|&c| 2 * c).collect(), mult));
            cur.pop();
            return;
        }
        for take in 0..=left {
            cur.push(take);
            rec(dim, left - take, idx + 1, cur, out);
            cur.pop();
        }
    }
    if dim == 0 {
        if p == 0 {
            out.push((vec![], 1));
        }
        return out;
    }
    rec(dim, p, 0, &mut Vec::new(), &mut out);
    out
}

/// The heat symbol i tau + sigma(P) = u + (sigma(P) - |xi|^2) of d_t + P.
pub fn heat_symbol<S: Scalar>(op: &DiffOp<S>, ctx: &AlgebraContext) -> Result<GradedSymbol<S>> {
    let dim = op.dim;
    let mut s = op.symbol(ctx)?;
    s = s.add(&GradedSymbol::from_tau_res(
        dim,
        GradedElement::one(),
        vec![0; dim],
        vec![0; dim],
        1,
        0,
    ).scale_all(&S::i()));
    Ok(s)
}

/// Volterra parametrix of `a = symbol(d_t + P)` to depth N:
/// compose(a, q) = 1 + (homogeneity < -N). Requires the homogeneity-2 part
/// of `a` to be exactly u (Laplacian-type principal part).
pub fn parametrix<S: Scalar>(
    a: &GradedSymbol<S>,
    depth: i32,
    ctx: &AlgebraContext,
) -> Result<GradedSymbol<S>> {
    let dim = a.dim;
    let top = a.homogeneous_part(2);
    let ok = top.terms.len() == 1 && {
        let t = &top.terms[0];
        t.u_pow == 1
            && multi_total(&t.x_pow) == 0
            && multi_total(&t.xi_pow) == 0
            && t.coeff == GradedElement::one()
    };
    if !ok || a.max_homogeneity() != Some(2) {
        return Err(Error::NonParabolic(
            "leading symbol must be i tau + |xi|^2".into(),
        ));
    }
    let one = GradedSymbol::constant(dim, GradedElement::one());
    let u_inv = GradedSymbol::u_power(dim, -1);
    let mut q = u_inv.clone();
    for _ in 0..(depth as usize + 4) * 4 {
        let residual = compose(a, &q, ctx)?.sub(&one);
        let Some(h) = residual.max_homogeneity() else {
            break;
        };
        if h < -depth {
            break;
        }
        let top = residual.homogeneous_part(h);
        // delta = -u^{-1} * top cancels the leading residual
        let delta = u_inv.pointwise_mul(&top, ctx)?.scale_all(&-S::one());
        q = q.add(&delta);
    }
    q.declared_order = -2;
    Ok(q)
}

/// Diagonal value of a homogeneous symbol piece: the inverse Fourier
/// transform at (x, y=0, t=1). A term coeff x^alpha xi^beta u^{-m} gives
/// coeff x^alpha / (m-1)! * prod_i (beta_i - 1)!! 2^{-beta_i/2} * (4 pi)^{-n/2}
/// (zero for odd beta_i); polynomial u-powers have no smooth diagonal and
/// are rejected.
#[derive(Clone, Debug)]
pub struct DiagXPoly<S: Scalar> {
    pub pi_half: i32,
    pub terms: BTreeMap<Multi, GradedElement<S>>,
}

impl<S: Scalar> DiagXPoly<S> {
    pub fn zero(pi_half: i32) -> Self {
        DiagXPoly {
            pi_half,
            terms: BTreeMap::new(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.values().all(|v| v.is_zero())
    }

    fn insert_add(&mut self, x: Multi, v: GradedElement<S>) {
        if v.is_zero() {
            return;
        }
        match self.terms.get_mut(&x) {
            Some(acc) => {
                *acc = acc.add(&v);
                if acc.is_zero() {
                    self.terms.remove(&x);
                }
            }
            None => {
                self.terms.insert(x, v);
            }
        }
    }

    /// Value at x = 0.
    pub fn constant_part(&self) -> PiScaled<S> {
        let zero_key: Multi = self.terms.keys().next().map(|k| vec![0; k.len()]).unwrap_or_default();
        let v = self
            .terms
            .get(&zero_key)
            .cloned()
            .unwrap_or_else(|| GradedElement::zero(FiberRep::Exterior));
        PiScaled::new(self.pi_half, v)
    }

    /// True when no x-dependent term remains.
    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|k| multi_total(k) == 0)
    }
}

pub fn kernel_diagonal<S: Scalar>(
    piece: &GradedSymbol<S>,
    n: usize,
) -> Result<DiagXPoly<S>> {
    let mut out = DiagXPoly::zero(-(n as i32));
    for t in &piece.terms {
        if t.u_pow >= 0 {
            if t.coeff.is_zero() {
                continue;
            }
            return Err(Error::InvalidInput(
                "kernel_diagonal needs resolvent powers u^{-m}, m >= 1".into(),
            ));
        }
        if t.xi_pow.iter().any(|&b| b % 2 == 1) {
            continue; // odd Gaussian moment
        }
        let m = (-t.u_pow) as u32;
        let mut factor = crate::scalar::factorial::<S>(m - 1).try_inv().unwrap();
        // (4 pi)^{-n/2} rational part:
        factor = factor * S::from_ratio(1, 1i64 << n);
        let mut shift = 0u32;
        for &b in &t.xi_pow {
            if b > 0 {
                factor = factor * double_factorial_odd::<S>(b - 1);
                shift += b / 2;
            }
        }
        factor = factor * S::from_ratio(1, 1i64 << shift);
        out.insert_add(t.x_pow.clone(), t.coeff.scale(&factor));
    }
    Ok(out)
}

/// Heat coefficients a_l of d_t + P from the parametrix diagonal:
/// k_t(x,x) ~ t^{-n/2} sum_l t^l a_l(x).
pub fn heat_coefficients<S: Scalar>(
    op: &DiffOp<S>,
    l_max: usize,
    ctx: &AlgebraContext,
) -> Result<Vec<DiagXPoly<S>>> {
    let a = heat_symbol(op, ctx)?;
    let q = parametrix(&a, 2 * l_max as i32 + 1, ctx)?;
    let mut out = Vec::with_capacity(l_max + 1);
    for l in 0..=l_max {
        let piece = q.homogeneous_part(-2 - 2 * l as i32);
        out.push(kernel_diagonal(&piece, op.dim)?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Differential operators and the Getzler grading
// ---------------------------------------------------------------------------

/// coeff * x^alpha * d_x^beta * d_t^k with a constant graded coefficient.
#[derive(Clone, Debug)]
pub struct DiffTerm<S: Scalar> {
    pub coeff: GradedElement<S>,
    pub x_pow: Multi,
    pub d_pow: Multi,
    pub dt_pow: u32,
}

#[derive(Clone, Debug)]
pub struct DiffOp<S: Scalar> {
    pub dim: usize,
    pub terms: Vec<DiffTerm<S>>,
}

impl<S: Scalar> DiffOp<S> {
    pub fn zero(dim: usize) -> Self {
        DiffOp { dim, terms: vec![] }
    }

    pub fn term(dim: usize, coeff: GradedElement<S>, x_pow: Multi, d_pow: Multi, dt_pow: u32) -> Self {
        DiffOp {
            dim,
            terms: vec![DiffTerm {
                coeff,
                x_pow,
                d_pow,
                dt_pow,
            }],
        }
    }

    pub fn partial(dim: usize, i: usize) -> Self {
        let mut d = vec![0; dim];
        d[i] = 1;
        Self::term(dim, GradedElement::one(), vec![0; dim], d, 0)
    }

    pub fn coordinate(dim: usize, i: usize) -> Self {
        let mut x = vec![0; dim];
        x[i] = 1;
        Self::term(dim, GradedElement::one(), x, vec![0; dim], 0)
    }

    pub fn add(&self, rhs: &Self) -> Self {
        let mut out = self.clone();
        out.terms.extend(rhs.terms.iter().cloned());
        out.normalized()
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.scale(&-S::one()))
    }

    pub fn scale(&self, s: &S) -> Self {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.coeff = t.coeff.scale(s);
        }
        out
    }

    pub fn normalized(mut self) -> Self {
        let mut map: BTreeMap<(Multi, Multi, u32), GradedElement<S>> = BTreeMap::new();
        for t in self.terms.drain(..) {
            if t.coeff.is_zero() {
                continue;
            }
            let key = (t.x_pow.clone(), t.d_pow.clone(), t.dt_pow);
            match map.get_mut(&key) {
                Some(acc) => *acc = acc.add(&t.coeff),
                None => {
                    map.insert(key, t.coeff);
                }
            }
        }
        self.terms = map
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|((x_pow, d_pow, dt_pow), coeff)| DiffTerm {
                coeff,
                x_pow,
                d_pow,
                dt_pow,
            })
            .collect();
        self
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.coeff.is_zero())
    }

    /// Operator composition by the Leibniz rule (coefficients are constant
    /// graded elements, so they commute with derivatives but not with each
    /// other).
    pub fn mul(&self, rhs: &Self, ctx: &AlgebraContext) -> Result<Self> {
        assert_eq!(self.dim, rhs.dim);
        let dim = self.dim;
        let mut out = DiffOp::zero(dim);
        for t1 in &self.terms {
            for t2 in &rhs.terms {
                // d^{beta1} (x^{alpha2} ...) = sum_gamma C(beta1,gamma)
                //   (alpha2)_gamma x^{alpha2-gamma} d^{beta1-gamma}(...)
                let mut gamma = vec![0u32; dim];
                loop {
                    let admissible = gamma
                        .iter()
                        .zip(&t1.d_pow)
                        .zip(&t2.x_pow)
                        .all(|((&g, &b), &a)| g <= b && g <= a);
                    if admissible {
                        let mut factor = 1i64;
                        for i in 0..dim {
                            let g = gamma[i];
                            factor *= binom(t1.d_pow[i], g);
                            // falling factorial alpha2_i (alpha2_i -1) ...
                            for j in 0..g {
                                factor *= (t2.x_pow[i] - j) as i64;
                            }
                        }
                        let coeff = t1
                            .coeff
                            .mul(&t2.coeff, ctx)?
                            .scale(&S::from_int(factor));
                        let x_pow: Multi = t1
                            .x_pow
                            .iter()
                            .zip(&t2.x_pow)
                            .zip(&gamma)
                            .map(|((&a1, &a2), &g)| a1 + a2 - g)
                            .collect();
                        let d_pow: Multi = t1
                            .d_pow
                            .iter()
                            .zip(&t2.d_pow)
                            .zip(&gamma)
                            .map(|((&b1, &b2), &g)| b1 + b2 - g)
                            .collect();
                        out.terms.push(DiffTerm {
                            coeff,
                            x_pow,
                            d_pow,
                            dt_pow: t1.dt_pow + t2.dt_pow,
                        });
                    }
                    // next gamma below elementwise min(d_pow1, x_pow2)
                    let mut i = 0;
                    loop {
                        if i == dim {
                            break;
                        }
                        gamma[i] += 1;
                        if gamma[i] <= t1.d_pow[i].min(t2.x_pow[i]) {
                            break;
                        }
                        gamma[i] = 0;
                        i += 1;
                    }
                    if gamma.iter().all(|&g| g == 0) {
                        break;
                    }
                }
            }
        }
        Ok(out.normalized())
    }

    /// Apply to a polynomial with graded coefficients (no time dependence;
    /// terms with d_t are rejected). Ground truth for the symbol calculus.
    pub fn apply(&self, poly: &XPoly<S>, ctx: &AlgebraContext) -> Result<XPoly<S>> {
        let mut out = XPoly::zero(self.dim);
        for t in &self.terms {
            if t.dt_pow > 0 {
                return Err(Error::InvalidInput(
                    "apply: time-independent polynomials only".into(),
                ));
            }
            for (mono, c) in &poly.terms {
                // differentiate mono by d_pow
                let mut factor = 1i64;
                let mut ok = true;
                let mut new_mono = mono.clone();
                for i in 0..self.dim {
                    let b = t.d_pow[i];
                    if new_mono[i] < b {
                        ok = false;
                        break;
                    }
                    for j in 0..b {
                        factor *= (new_mono[i] - j) as i64;
                    }
                    new_mono[i] -= b;
                }
                if !ok {
                    continue;
                }
                let coeff = t.coeff.mul(c, ctx)?.scale(&S::from_int(factor));
                out.insert_add(multi_add(&t.x_pow, &new_mono), coeff);
            }
        }
        Ok(out)
    }

    /// Full symbol: x^alpha (i xi)^beta (i tau)^k with i tau = u - |xi|^2.
    pub fn symbol(&self, _ctx: &AlgebraContext) -> Result<GradedSymbol<S>> {
        let dim = self.dim;
        let mut out = GradedSymbol::zero(dim, 0);
        for t in &self.terms {
            let ibeta = i_pow::<S>(multi_total(&t.d_pow) as i64);
            // (i tau)^k = (u - |xi|^2)^k
            for r in 0..=t.dt_pow {
                let c = S::from_int(binom(t.dt_pow, r))
                    * (if (t.dt_pow - r) % 2 == 1 {
                        -S::one()
                    } else {
                        S::one()
                    });
                for (extra_xi, mult) in xi_square_power(dim, t.dt_pow - r) {
                    out.terms.push(SymbolTerm {
                        coeff: t
                            .coeff
                            .scale(&(ibeta.clone() * c.clone() * S::from_int(mult))),
                        x_pow: t.x_pow.clone(),
                        xi_pow: multi_add(&t.d_pow, &extra_xi),
                        u_pow: r as i32,
                    });
                }
            }
        }
        let order = out.terms.iter().map(|t| t.homogeneity()).max().unwrap_or(0);
        out.declared_order = order;
        Ok(out.normalized())
    }

    /// Getzler order: max over terms and coefficient monomials of
    /// |beta| + 2k + (fiber + base + aux degree) - |alpha|.
    pub fn getzler_order(&self) -> Option<i32> {
        let mut best = None;
        for t in &self.terms {
            for (m, _) in t.coeff.terms() {
                let deg = multi_total(&t.d_pow) as i32 + 2 * t.dt_pow as i32
                    + m.total_degree() as i32
                    - multi_total(&t.x_pow) as i32;
                best = Some(best.map_or(deg, |b: i32| b.max(deg)));
            }
        }
        best
    }

    /// Model operator: the top Getzler-degree part with Clifford generators
    /// replaced by exterior multiplication (the symbol map on coefficients).
    pub fn model_operator(&self) -> Result<DiffOp<S>> {
        let Some(order) = self.getzler_order() else {
            return Ok(DiffOp::zero(self.dim));
        };
        let mut out = DiffOp::zero(self.dim);
        for t in &self.terms {
            let base_deg = multi_total(&t.d_pow) as i32 + 2 * t.dt_pow as i32
                - multi_total(&t.x_pow) as i32;
            let kept = t
                .coeff
                .filter(|m| base_deg + m.total_degree() as i32 == order);
            if kept.is_zero() {
                continue;
            }
            out.terms.push(DiffTerm {
                coeff: kept.symbol_map()?,
                x_pow: t.x_pow.clone(),
                d_pow: t.d_pow.clone(),
                dt_pow: t.dt_pow,
            });
        }
        Ok(out.normalized())
    }
}

/// Getzler weights: d_i and fiber/base odd generators have degree 1, d_t has
/// degree 2 and the coordinate x^i degree -1. `getzler_order` and
/// `model_operator` apply this assignment to every term.
pub fn getzler_symbol_order<S: Scalar>(q: &GradedSymbol<S>) -> Option<i32> {
    let mut best = None;
    for t in &q.terms {
        for (m, _) in t.coeff.terms() {
            let deg = t.homogeneity() + m.total_degree() as i32 - multi_total(&t.x_pow) as i32;
            best = Some(best.map_or(deg, |b: i32| b.max(deg)));
        }
    }
    best
}

/// Checks that the model operator of a product is the product of model
/// operators whenever the right-hand side is nonzero (Getzler orders add).
pub fn model_compose_check<S: Scalar>(
    q1: &DiffOp<S>,
    q2: &DiffOp<S>,
    ctx: &AlgebraContext,
) -> Result<bool> {
    let m1 = q1.model_operator()?;
    let m2 = q2.model_operator()?;
    let rhs = m1.mul(&m2, ctx)?;
    // keep only the additive-order part of rhs: orders may drop on multiply
    let (Some(o1), Some(o2)) = (q1.getzler_order(), q2.getzler_order()) else {
        return Ok(true);
    };
    let rhs_top = keep_getzler_degree(&rhs, o1 + o2)?;
    if rhs_top.is_zero() {
        return Ok(true);
    }
    let lhs = q1.mul(q2, ctx)?.model_operator()?;
    Ok(ops_equal(&lhs, &rhs_top))
}

fn keep_getzler_degree<S: Scalar>(op: &DiffOp<S>, order: i32) -> Result<DiffOp<S>> {
    let mut out = DiffOp::zero(op.dim);
    for t in &op.terms {
        let base_deg = multi_total(&t.d_pow) as i32 + 2 * t.dt_pow as i32
            - multi_total(&t.x_pow) as i32;
        let kept = t
            .coeff
            .filter(|m| base_deg + m.total_degree() as i32 == order);
        if !kept.is_zero() {
            out.terms.push(DiffTerm {
                coeff: kept,
                x_pow: t.x_pow.clone(),
                d_pow: t.d_pow.clone(),
                dt_pow: t.dt_pow,
            });
        }
    }
    Ok(out.normalized())
}

fn ops_equal<S: Scalar>(a: &DiffOp<S>, b: &DiffOp<S>) -> bool {
    a.sub(b).is_zero()
}

/// The curvature-model Laplacian -sum_i (d_i - (1/4) sum_j A_ij x_j)^2 as a
/// differential operator; A_ij are (even) graded coefficients.
pub fn curvature_laplacian<S: Scalar>(
    a: &crate::charforms::FormMat<S>,
    ctx: &AlgebraContext,
) -> Result<DiffOp<S>> {
    let n = a.size;
    let mut total = DiffOp::zero(n);
    for i in 0..n {
        let mut factor = DiffOp::partial(n, i);
        for j in 0..n {
            let entry = a.get(i, j);
            if entry.is_zero() {
                continue;
            }
            let mut x = vec![0; n];
            x[j] = 1;
            let term = DiffOp::term(
                n,
                entry.scale(&S::from_ratio(-1, 4)),
                x,
                vec![0; n],
                0,
            );
            factor = factor.add(&term);
        }
        total = total.add(&factor.mul(&factor, ctx)?);
    }
    Ok(total.scale(&-S::one()))
}

// ---------------------------------------------------------------------------
// Rescaled diagonal parity structure
// ---------------------------------------------------------------------------

/// One nonvanishing diagonal contribution in the rescaled small-time
/// expansion: t-power (in half units, psi_t included), base and fiber form
/// degrees.
#[derive(Clone, Debug, PartialEq)]
pub struct ParityRow {
    /// Twice the power of t carried by this contribution.
    pub t_half_power: i32,
    pub base_degree: u32,
    pub fiber_degree: u32,
}

#[derive(Clone, Debug)]
pub struct ParityReport {
    pub rows: Vec<ParityRow>,
    pub pass: bool,
}

/// Structural check of the rescaled diagonal: half-integer t-powers must
/// carry odd base-form degree and integer powers even (fiber rank even).
pub fn rescaled_parity_check<S: Scalar>(q: &GradedSymbol<S>, n: usize) -> Result<ParityReport> {
    let mut rows = Vec::new();
    let mut pass = true;
    for t in &q.terms {
        if t.u_pow >= 0 {
            continue;
        }
        if t.xi_pow.iter().any(|&b| b % 2 == 1) {
            continue; // vanishing diagonal moment
        }
        let d = t.homogeneity();
        for (m, _) in t.coeff.terms() {
            let l = m.base_degree() + m.aux_degree();
            let t_half = -(d + n as i32 + 2) - l as i32;
            let row = ParityRow {
                t_half_power: t_half,
                base_degree: l,
                fiber_degree: m.fiber_degree(),
            };
            let half_integer = t_half.rem_euclid(2) == 1;
            if half_integer != (l % 2 == 1) {
                pass = false;
            }
            if !rows.contains(&row) {
                rows.push(row);
            }
        }
    }
    rows.sort_by_key(|r| (r.t_half_power, r.base_degree, r.fiber_degree));
    Ok(ParityReport { rows, pass })
}

// ---------------------------------------------------------------------------
// Text serialization: one term per line `coeff | x^a | xi^b | tau^k | res^m`
// ---------------------------------------------------------------------------

fn format_scalar<S: Scalar>(s: &S) -> String {
    s.to_wire()
}

/// Serialize into the exchange format; positive u-powers are expanded back
/// into tau and |xi|^2 monomials so only resolvent powers appear.
pub fn format_symbol<S: Scalar>(q: &GradedSymbol<S>) -> String {
    let mut out = String::new();
    for t in &q.terms {
        // expand u^j (j>0) into (i tau + |xi|^2)^j
        let expansions: Vec<(S, Multi, u32, u32)> = if t.u_pow > 0 {
            let j = t.u_pow as u32;
            let mut v = Vec::new();
            for r in 0..=j {
                let c = S::from_int(binom(j, r)) * i_pow::<S>(r as i64);
                for (extra, mult) in xi_square_power(t.xi_pow.len(), j - r) {
                    v.push((
                        c.clone() * S::from_int(mult),
                        multi_add(&t.xi_pow, &extra),
                        r,
                        0,
                    ));
                }
            }
            v
        } else {
            vec![(S::one(), t.xi_pow.clone(), 0, (-t.u_pow) as u32)]
        };
        for (scale, xi, tau, res) in expansions {
            for (mask, coeff) in t.coeff.terms() {
                let c = coeff.clone() * scale.clone();
                if c.is_zero() {
                    continue;
                }
                let mut gens = Vec::new();
                for i in 0..64 {
                    if mask.fiber >> i & 1 == 1 {
                        gens.push(format!("e{}", i + 1));
                    }
                }
                for i in 0..64 {
                    if mask.base >> i & 1 == 1 {
                        gens.push(format!("dy{}", i + 1));
                    }
                }
                let gen_str = if gens.is_empty() {
                    String::new()
                } else {
                    format!(" {}", gens.join(" "))
                };
                let xs: Vec<String> = t.x_pow.iter().map(|p| p.to_string()).collect();
                let xis: Vec<String> = xi.iter().map(|p| p.to_string()).collect();
                let _ = writeln!(
                    out,
                    "{}{} | {} | {} | {} | {}",
                    format_scalar(&c),
                    gen_str,
                    xs.join(" "),
                    xis.join(" "),
                    tau,
                    res
                );
            }
        }
    }
    out
}

/// Parse the exchange format. Scalars are `p/q`, decimals, or `re,im` pairs;
/// generators are `e<i>` and `dy<j>` names after the scalar.
pub fn parse_symbol<S: Scalar>(
    text: &str,
    dim: usize,
    ctx: &AlgebraContext,
) -> Result<GradedSymbol<S>> {
    let mut acc = GradedSymbol::zero(dim, 0);
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('|').map(|f| f.trim()).collect();
        if fields.len() != 5 {
            return Err(Error::Parse(format!(
                "line {}: expected 5 pipe-separated fields",
                lineno + 1
            )));
        }
        let mut coeff_parts = fields[0].split_whitespace();
        let scalar_txt = coeff_parts
            .next()
            .ok_or_else(|| Error::Parse(format!("line {}: empty coefficient", lineno + 1)))?;
        let scalar = parse_scalar::<S>(scalar_txt)
            .ok_or_else(|| Error::Parse(format!("line {}: bad scalar {scalar_txt}", lineno + 1)))?;
        let mut coeff = GradedElement::scalar(scalar);
        for g in coeff_parts {
            let gen = if let Some(idx) = g.strip_prefix("dy") {
                GradedElement::base_gen(
                    idx.parse::<usize>()
                        .map_err(|_| Error::Parse(format!("bad generator {g}")))?,
                    ctx,
                )?
            } else if let Some(idx) = g.strip_prefix('e') {
                GradedElement::clifford_gen(
                    idx.parse::<usize>()
                        .map_err(|_| Error::Parse(format!("bad generator {g}")))?,
                    ctx,
                )?
            } else {
                return Err(Error::Parse(format!("unknown generator {g}")));
            };
            coeff = coeff.mul(&gen, ctx)?;
        }
        let parse_multi = |s: &str| -> Result<Multi> {
            if s.is_empty() {
                return Ok(vec![0; dim]);
            }
            let v: std::result::Result<Multi, _> =
                s.split_whitespace().map(|p| p.parse::<u32>()).collect();
            let v = v.map_err(|_| Error::Parse(format!("bad multi-index {s}")))?;
            if v.len() != dim {
                return Err(Error::Parse(format!(
                    "multi-index length {} != dim {dim}",
                    v.len()
                )));
            }
            Ok(v)
        };
        let x_pow = parse_multi(fields[1])?;
        let xi_pow = parse_multi(fields[2])?;
        let tau: u32 = fields[3]
            .parse()
            .map_err(|_| Error::Parse(format!("bad tau power {}", fields[3])))?;
        let res: u32 = fields[4]
            .parse()
            .map_err(|_| Error::Parse(format!("bad resolvent power {}", fields[4])))?;
        acc = acc.add(&GradedSymbol::from_tau_res(dim, coeff, x_pow, xi_pow, tau, res));
    }
    Ok(acc)
}

fn parse_scalar<S: Scalar>(s: &str) -> Option<S> {
    let parse_real = |txt: &str| -> Option<S> {
        if let Some((p, q)) = txt.split_once('/') {
            Some(S::from_ratio(p.parse().ok()?, q.parse().ok()?))
        } else if let Ok(int) = txt.parse::<i64>() {
            Some(S::from_int(int))
        } else {
            // decimal: scale to a ratio over a power of ten
            let f: f64 = txt.parse().ok()?;
            let den = 1_000_000_000i64;
            Some(S::from_ratio((f * den as f64).round() as i64, den))
        }
    };
    if let Some((re, im)) = s.split_once(',') {
        Some(parse_real(re)? + S::i() * parse_real(im)?)
    } else {
        parse_real(s)
    }
}


/// Polynomial in x with graded coefficients; the operator-application ground
/// truth for the symbol calculus.
#[derive(Clone, Debug)]
pub struct XPoly<S: Scalar> {
    pub dim: usize,
    pub terms: BTreeMap<Multi, GradedElement<S>>,
}

impl<S: Scalar> XPoly<S> {
    pub fn zero(dim: usize) -> Self {
        XPoly {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn insert_add(&mut self, mono: Multi, coeff: GradedElement<S>) {
        if coeff.is_zero() {
            return;
        }
        match self.terms.get_mut(&mono) {
            Some(acc) => {
                *acc = acc.add(&coeff);
                if acc.is_zero() {
                    self.terms.remove(&mono);
                }
            }
            None => {
                self.terms.insert(mono, coeff);
            }
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.insert_add(m.clone(), c.neg());
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.values().all(|c| c.is_zero())
    }
}
