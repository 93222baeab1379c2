//! Bigraded coefficient algebra Cl(n) (x) Lambda(base) (x) Lambda(aux).
//!
//! Elements are sparse sums of canonical basis monomials
//! `e_{i1}..e_{ik} dy_{a1}..dy_{al} z_{..}` (each index set ascending, fiber
//! generators first, then base, then auxiliary odd generators). All
//! generators are odd and anticommute across sectors (Koszul convention);
//! within the fiber sector the product is either the Clifford product
//! (`e_i e_j + e_j e_i = -2 delta_ij`) or the exterior product, selected by
//! the element's [`FiberRep`]. The quantization/symbol maps `c`/`sigma` are
//! mask-identities that flip the representation.
//!
//! The sign conventions are pinned by the matrix oracle in the tests: the
//! spinor representation plus exterior creation operators on a parity-twisted
//! tensor product must reproduce every product in this module.

use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::scalar::{factorial, i_pow, Scalar};
use std::collections::BTreeMap;
use std::fmt;

/// Ambient algebra dimensions: fiber Clifford rank `n`, base odd generator
/// count `q_bar`, named auxiliary odd generators (e.g. "z", "dt").
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlgebraContext {
    pub n: usize,
    pub q_bar: usize,
    pub aux: Vec<String>,
}

impl AlgebraContext {
    pub fn new(n: usize, q_bar: usize, aux: &[&str]) -> Result<Self> {
        if n == 0 || n > 32 || q_bar > 32 || aux.len() > 8 {
            return Err(Error::InvalidInput(format!(
                "unsupported context size n={n} q_bar={q_bar} aux={}",
                aux.len()
            )));
        }
        let mut names: Vec<String> = aux.iter().map(|s| s.to_string()).collect();
        let len = names.len();
        names.dedup();
        if names.len() != len {
            return Err(Error::InvalidInput("duplicate aux generator names".into()));
        }
        Ok(AlgebraContext {
            n,
            q_bar,
            aux: names,
        })
    }

    pub fn fiber_full(&self) -> u64 {
        mask_full(self.n)
    }

    fn check_mask(&self, m: &BasisMask) -> Result<()> {
        if m.fiber & !mask_full(self.n) != 0
            || m.base & !mask_full(self.q_bar) != 0
            || m.aux & !mask_full(self.aux.len()) != 0
        {
            return Err(Error::ContextMismatch(format!(
                "mask {m:?} outside context (n={}, q_bar={}, aux={})",
                self.n,
                self.q_bar,
                self.aux.len()
            )));
        }
        Ok(())
    }
}

fn mask_full(k: usize) -> u64 {
    if k == 0 {
        0
    } else {
        (!0u64) >> (64 - k)
    }
}

/// Canonical basis monomial: bit i set means generator i+1 present.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct BasisMask {
    pub fiber: u64,
    pub base: u64,
    pub aux: u64,
}

impl BasisMask {
    pub const SCALAR: BasisMask = BasisMask {
        fiber: 0,
        base: 0,
        aux: 0,
    };

    pub fn fiber_degree(&self) -> u32 {
        self.fiber.count_ones()
    }
    pub fn base_degree(&self) -> u32 {
        self.base.count_ones()
    }
    pub fn aux_degree(&self) -> u32 {
        self.aux.count_ones()
    }
    pub fn total_degree(&self) -> u32 {
        self.fiber_degree() + self.base_degree() + self.aux_degree()
    }
    pub fn parity(&self) -> u32 {
        self.total_degree() % 2
    }
}

/// How the fiber sector multiplies.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum FiberRep {
    /// Clifford contraction: e_i e_i = -1.
    Clifford,
    /// Exterior product: e_i e_i = 0 (the symbol side).
    Exterior,
}

/// Parity of the permutation moving every generator of `b` left past the
/// larger generators of `a`: (-1)^(#{(i,j): i in a, j in b, i > j}).
fn reorder_sign(a: u64, b: u64) -> i32 {
    let mut shifted = a >> 1;
    let mut total = 0u32;
    while shifted != 0 {
        total += (shifted & b).count_ones();
        shifted >>= 1;
    }
    if total % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Product of two canonical exterior monomials: (sign, mask) or None if zero.
fn ext_mul(a: u64, b: u64) -> Option<(i32, u64)> {
    if a & b != 0 {
        None
    } else {
        Some((reorder_sign(a, b), a | b))
    }
}

/// Product of two canonical Clifford monomials with e_i^2 = -1.
fn clifford_mul(a: u64, b: u64) -> (i32, u64) {
    let mut sign = reorder_sign(a, b);
    let common = (a & b).count_ones();
    if common % 2 == 1 {
        sign = -sign;
    }
    (sign, a ^ b)
}

/// Sparse element of the bigraded algebra.
#[derive(Clone)]
pub struct GradedElement<S> {
    rep: FiberRep,
    terms: BTreeMap<BasisMask, S>,
}

impl<S: PartialEq> PartialEq for GradedElement<S> {
    fn eq(&self, other: &Self) -> bool {
        if self.terms != other.terms {
            return false;
        }
        // the fiber representation only matters when fiber content exists
        let fiber = |e: &Self| e.terms.keys().any(|m| m.fiber != 0);
        self.rep == other.rep || (!fiber(self) && !fiber(other))
    }
}

impl<S: Scalar> GradedElement<S> {
    pub fn zero(rep: FiberRep) -> Self {
        GradedElement {
            rep,
            terms: BTreeMap::new(),
        }
    }

    pub fn scalar(s: S) -> Self {
        let mut e = Self::zero(FiberRep::Clifford);
        if !s.is_zero() {
            e.terms.insert(BasisMask::SCALAR, s);
        }
        e
    }

    pub fn one() -> Self {
        Self::scalar(S::one())
    }

    pub fn monomial(rep: FiberRep, mask: BasisMask, coeff: S) -> Self {
        let mut e = Self::zero(rep);
        if !coeff.is_zero() {
            e.terms.insert(mask, coeff);
        }
        e
    }

    /// c(e_i), 1-based.
    pub fn clifford_gen(i: usize, ctx: &AlgebraContext) -> Result<Self> {
        if i == 0 || i > ctx.n {
            return Err(Error::ContextMismatch(format!("fiber generator {i}")));
        }
        Ok(Self::monomial(
            FiberRep::Clifford,
            BasisMask {
                fiber: 1 << (i - 1),
                base: 0,
                aux: 0,
            },
            S::one(),
        ))
    }

    /// e^i as an exterior generator, 1-based.
    pub fn exterior_gen(i: usize, ctx: &AlgebraContext) -> Result<Self> {
        let mut e = Self::clifford_gen(i, ctx)?;
        e.rep = FiberRep::Exterior;
        Ok(e)
    }

    /// dy_alpha, 1-based.
    pub fn base_gen(alpha: usize, ctx: &AlgebraContext) -> Result<Self> {
        if alpha == 0 || alpha > ctx.q_bar {
            return Err(Error::ContextMismatch(format!("base generator {alpha}")));
        }
        Ok(Self::monomial(
            FiberRep::Clifford,
            BasisMask {
                fiber: 0,
                base: 1 << (alpha - 1),
                aux: 0,
            },
            S::one(),
        ))
    }

    /// Named auxiliary odd generator.
    pub fn aux_gen(name: &str, ctx: &AlgebraContext) -> Result<Self> {
        let idx = ctx
            .aux
            .iter()
            .position(|a| a == name)
            .ok_or_else(|| Error::ContextMismatch(format!("aux generator {name}")))?;
        Ok(Self::monomial(
            FiberRep::Clifford,
            BasisMask {
                fiber: 0,
                base: 0,
                aux: 1 << idx,
            },
            S::one(),
        ))
    }

    pub fn rep(&self) -> FiberRep {
        self.rep
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&BasisMask, &S)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, mask: &BasisMask) -> S {
        self.terms.get(mask).cloned().unwrap_or_else(S::zero)
    }

    pub fn scalar_part(&self) -> S {
        self.coeff(&BasisMask::SCALAR)
    }

    fn has_fiber(&self) -> bool {
        self.terms.keys().any(|m| m.fiber != 0)
    }

    pub fn insert_add(&mut self, mask: BasisMask, coeff: S) {
        if coeff.is_zero() {
            return;
        }
        let entry = self.terms.entry(mask).or_insert_with(S::zero);
        *entry = entry.clone() + coeff;
        if entry.is_zero() {
            self.terms.remove(&mask);
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        let rep = match (self.has_fiber(), rhs.has_fiber()) {
            (true, true) => {
                assert_eq!(self.rep, rhs.rep, "adding mixed fiber representations");
                self.rep
            }
            (false, true) => rhs.rep,
            _ => self.rep,
        };
        let mut out = self.clone();
        out.rep = rep;
        for (m, c) in &rhs.terms {
            out.insert_add(*m, c.clone());
        }
        out
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.neg())
    }

    pub fn neg(&self) -> Self {
        self.map_coeffs(|c| -c.clone())
    }

    pub fn scale(&self, s: &S) -> Self {
        self.map_coeffs(|c| c.clone() * s.clone())
    }

    pub fn map_coeffs(&self, f: impl Fn(&S) -> S) -> Self {
        let mut out = Self::zero(self.rep);
        for (m, c) in &self.terms {
            out.insert_add(*m, f(c));
        }
        out
    }

    /// Keep only the terms whose mask satisfies the predicate.
    pub fn filter(&self, pred: impl Fn(&BasisMask) -> bool) -> Self {
        let mut out = Self::zero(self.rep);
        for (m, c) in &self.terms {
            if pred(m) {
                out.terms.insert(*m, c.clone());
            }
        }
        out
    }

    /// Graded product. Representations must agree unless one side has no
    /// fiber content (scalars and pure base/aux elements are rep-agnostic).
    pub fn mul(&self, rhs: &Self, ctx: &AlgebraContext) -> Result<Self> {
        let rep = match (self.has_fiber(), rhs.has_fiber()) {
            (true, true) if self.rep != rhs.rep => {
                return Err(Error::ContextMismatch(
                    "mixing Clifford and exterior fiber representations".into(),
                ))
            }
            (true, _) => self.rep,
            (false, true) => rhs.rep,
            (false, false) => self.rep,
        };
        let mut out = Self::zero(rep);
        for (m1, c1) in &self.terms {
            ctx.check_mask(m1)?;
            for (m2, c2) in &rhs.terms {
                ctx.check_mask(m2)?;
                // Koszul crossings between sectors: rhs fiber past lhs
                // base+aux, then rhs base past lhs aux.
                let crossings = m2.fiber.count_ones() * (m1.base_degree() + m1.aux_degree())
                    + m2.base.count_ones() * m1.aux_degree();
                let mut sign = if crossings % 2 == 0 { 1 } else { -1 };
                let fiber = match rep {
                    FiberRep::Clifford => {
                        let (s, m) = clifford_mul(m1.fiber, m2.fiber);
                        sign *= s;
                        m
                    }
                    FiberRep::Exterior => match ext_mul(m1.fiber, m2.fiber) {
                        Some((s, m)) => {
                            sign *= s;
                            m
                        }
                        None => continue,
                    },
                };
                let Some((s, base)) = ext_mul(m1.base, m2.base) else {
                    continue;
                };
                sign *= s;
                let Some((s, aux)) = ext_mul(m1.aux, m2.aux) else {
                    continue;
                };
                sign *= s;
                let mut coeff = c1.clone() * c2.clone();
                if sign < 0 {
                    coeff = -coeff;
                }
                out.insert_add(BasisMask { fiber, base, aux }, coeff);
            }
        }
        Ok(out)
    }

    /// Symbol map sigma: canonical Clifford monomials to exterior monomials.
    pub fn symbol_map(&self) -> Result<Self> {
        if self.has_fiber() && self.rep != FiberRep::Clifford {
            return Err(Error::InvalidInput(
                "symbol_map expects a Clifford-representation element".into(),
            ));
        }
        let mut out = self.clone();
        out.rep = FiberRep::Exterior;
        Ok(out)
    }

    /// Quantization map c = sigma^{-1}.
    pub fn quantize(&self) -> Result<Self> {
        if self.has_fiber() && self.rep != FiberRep::Exterior {
            return Err(Error::InvalidInput(
                "quantize expects an exterior-representation element".into(),
            ));
        }
        let mut out = self.clone();
        out.rep = FiberRep::Clifford;
        Ok(out)
    }

    /// Supertrace over the even-rank Clifford factor: kills every fiber
    /// monomial except the top one, which maps to (-2i)^(n/2); base and aux
    /// factors pass through.
    pub fn supertrace(&self, ctx: &AlgebraContext) -> Result<Self> {
        if ctx.n % 2 != 0 {
            return Err(Error::InvalidInput(
                "supertrace needs even fiber rank; use trace_odd".into(),
            ));
        }
        let full = ctx.fiber_full();
        let norm = S::from_int(-2).pow_i64(ctx.n as i64 / 2).unwrap()
            * i_pow::<S>(ctx.n as i64 / 2);
        let mut out = Self::zero(self.rep);
        for (m, c) in &self.terms {
            ctx.check_mask(m)?;
            if m.fiber == full {
                out.insert_add(
                    BasisMask {
                        fiber: 0,
                        base: m.base,
                        aux: m.aux,
                    },
                    c.clone() * norm.clone(),
                );
            }
        }
        Ok(out)
    }

    /// Odd-rank Clifford trace: 1 -> 2^((n-1)/2), top monomial ->
    /// (-i)^((n-1)/2 + 1) 2^((n-1)/2), everything in between -> 0.
    pub fn trace_odd(&self, ctx: &AlgebraContext) -> Result<Self> {
        if ctx.n % 2 != 1 {
            return Err(Error::InvalidInput(
                "trace_odd needs odd fiber rank; use supertrace".into(),
            ));
        }
        let half = (ctx.n / 2) as i64;
        let dim = S::from_int(2).pow_i64(half).unwrap();
        let full = ctx.fiber_full();
        let top_norm = i_pow::<S>(-(half + 1)) * dim.clone();
        let mut out = Self::zero(self.rep);
        for (m, c) in &self.terms {
            ctx.check_mask(m)?;
            let reduced = BasisMask {
                fiber: 0,
                base: m.base,
                aux: m.aux,
            };
            if m.fiber == 0 {
                out.insert_add(reduced, c.clone() * dim.clone());
            } else if m.fiber == full {
                out.insert_add(reduced, c.clone() * top_norm.clone());
            }
        }
        Ok(out)
    }

    /// Berezin integral in the fiber variables: coefficient of
    /// e^1 ^ ... ^ e^fixed_dim, base/aux factors retained.
    ///
    /// `StarZero` is the bigraded variant: it reads the same coefficient but
    /// documents that components with normal-direction factors (indices above
    /// `fixed_dim`) are projected away first.
    pub fn berezin(&self, fixed_dim: usize, mode: BerezinMode, ctx: &AlgebraContext) -> Result<Self> {
        if fixed_dim > ctx.n {
            return Err(Error::InvalidInput(format!(
                "berezin degree {fixed_dim} exceeds fiber rank {}",
                ctx.n
            )));
        }
        if self.has_fiber() && self.rep != FiberRep::Exterior {
            return Err(Error::InvalidInput(
                "berezin expects exterior fiber coefficients (apply symbol_map first)".into(),
            ));
        }
        let _ = mode;
        let target = mask_full(fixed_dim);
        let mut out = Self::zero(FiberRep::Exterior);
        for (m, c) in &self.terms {
            ctx.check_mask(m)?;
            if m.fiber == target {
                out.insert_add(
                    BasisMask {
                        fiber: 0,
                        base: m.base,
                        aux: m.aux,
                    },
                    c.clone(),
                );
            }
        }
        Ok(out)
    }

    /// Rescaling map: multiply each base-form degree-l coefficient by
    /// `inv_sqrt_t^l` (the psi_t rescaling with inv_sqrt_t = t^{-1/2}).
    pub fn psi_rescale(&self, inv_sqrt_t: &S) -> Self {
        let mut out = Self::zero(self.rep);
        for (m, c) in &self.terms {
            let factor = inv_sqrt_t
                .pow_i64(m.base_degree() as i64)
                .expect("nonzero rescale factor");
            out.insert_add(*m, c.clone() * factor);
        }
        out
    }

    /// Maximum base-form degree present.
    pub fn max_base_degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|m| m.base_degree())
            .max()
            .unwrap_or(0)
    }

    /// Numeric max-norm of the coefficients.
    pub fn max_abs(&self) -> f64 {
        self.terms
            .values()
            .map(|c| c.to_c64().norm())
            .fold(0.0, f64::max)
    }

    /// Entrywise numeric distance to another element.
    pub fn distance(&self, rhs: &Self) -> f64 {
        self.sub(rhs).max_abs()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BerezinMode {
    Full,
    StarZero,
}

impl<S: Scalar> fmt::Display for GradedElement<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return writeln!(f, "1 -> 0");
        }
        for (m, c) in &self.terms {
            let mut parts = Vec::new();
            for i in 0..64 {
                if m.fiber >> i & 1 == 1 {
                    parts.push(format!("e{}", i + 1));
                }
            }
            for i in 0..64 {
                if m.base >> i & 1 == 1 {
                    parts.push(format!("dy{}", i + 1));
                }
            }
            for i in 0..8 {
                if m.aux >> i & 1 == 1 {
                    parts.push(format!("w{}", i + 1));
                }
            }
            let name = if parts.is_empty() {
                "1".to_string()
            } else {
                parts.join(" ")
            };
            writeln!(f, "{name} -> {c}")?;
        }
        Ok(())
    }
}

impl<S: Scalar> fmt::Debug for GradedElement<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GradedElement[{:?}]\n{}", self.rep, self)
    }
}

// ---------------------------------------------------------------------------
// Spinor representation
// ---------------------------------------------------------------------------

/// Complex spinor representation of Cl(n) built from iterated 2x2 blocks,
/// with gamma_i = i * Gamma_i for Hermitian Gamma_i so that
/// gamma_i gamma_j + gamma_j gamma_i = -2 delta_ij.
pub struct SpinorRep<S> {
    pub n: usize,
    pub gens: Vec<Mat<S>>,
    /// Grading operator for even n.
    pub chirality: Option<Mat<S>>,
}

impl<S: Scalar> SpinorRep<S> {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1 && n <= 12, "spinor representation size");
        let m = n / 2;
        let dim = 1usize << m;
        let s1 = Mat::from_rows(&[&[S::zero(), S::one()], &[S::one(), S::zero()]]);
        let s2 = Mat::from_rows(&[&[S::zero(), -S::i()], &[S::i(), S::zero()]]);
        let s3 = Mat::from_rows(&[&[S::one(), S::zero()], &[S::zero(), -S::one()]]);
        let id2 = Mat::<S>::identity(2);
        // Hermitian anticommuting Gamma_1..Gamma_{2m}
        let mut gammas: Vec<Mat<S>> = Vec::new();
        for k in 0..m {
            let mut a = Mat::<S>::identity(1);
            let mut b = Mat::<S>::identity(1);
            for j in 0..m {
                let (fa, fb) = if j < k {
                    (&s3, &s3)
                } else if j == k {
                    (&s1, &s2)
                } else {
                    (&id2, &id2)
                };
                a = a.kron(fa);
                b = b.kron(fb);
            }
            gammas.push(a);
            gammas.push(b);
        }
        // chirality of the even part: (-i)^m Gamma_1 .. Gamma_{2m}
        let mut prod = Mat::<S>::identity(dim);
        for g in &gammas {
            prod = &prod * g;
        }
        let chir = prod.scale(&i_pow::<S>(-(m as i64)));
        if n % 2 == 1 {
            // extra generator fixed so that the odd trace identity
            // Tr[c(e^1)..c(e^n)] = (-i)^(floor(n/2)+1) 2^(floor(n/2)) holds
            gammas.push(chir.scale(&(-S::one())));
        }
        let gens = gammas
            .iter()
            .map(|g| g.scale(&S::i()))
            .collect::<Vec<_>>();
        SpinorRep {
            n,
            gens,
            chirality: if n % 2 == 0 { Some(chir) } else { None },
        }
    }

    pub fn dim(&self) -> usize {
        1 << (self.n / 2)
    }

    /// Matrix of a pure-fiber element (errors on base/aux content).
    pub fn represent(&self, elem: &GradedElement<S>, ctx: &AlgebraContext) -> Result<Mat<S>> {
        if elem.rep() != FiberRep::Clifford && elem.has_fiber() {
            return Err(Error::InvalidInput(
                "spinor representation of exterior-side element".into(),
            ));
        }
        if ctx.n != self.n {
            return Err(Error::ContextMismatch("spinor rep rank".into()));
        }
        let mut out = Mat::<S>::zeros(self.dim(), self.dim());
        for (m, c) in elem.terms() {
            if m.base != 0 || m.aux != 0 {
                return Err(Error::InvalidInput(
                    "element has base/aux factors; represent the fiber part only".into(),
                ));
            }
            let mut acc = Mat::<S>::identity(self.dim());
            for i in 0..self.n {
                if m.fiber >> i & 1 == 1 {
                    acc = &acc * &self.gens[i];
                }
            }
            out = &out + &acc.scale(c);
        }
        Ok(out)
    }

    pub fn matrix_supertrace(&self, m: &Mat<S>) -> S {
        let chir = self.chirality.as_ref().expect("even rank");
        (chir * m).trace()
    }
}

// ---------------------------------------------------------------------------
// Fixed-point frames, spinor lifts and the equivariant supertrace
// ---------------------------------------------------------------------------

/// Rotation by angle theta in the oriented fiber plane (axis1, axis2),
/// recorded through the half angle so the exact mode can express theta = pi.
/// The spinor lift is exp((theta/2) e_{axis1} e_{axis2}); its sign is the
/// continuity branch from theta = 0 (flip `sin_half`/`cos_half` jointly for
/// the other sheet).
#[derive(Clone, Debug)]
pub struct PlaneRotation<S> {
    pub axis1: usize,
    pub axis2: usize,
    pub cos_half: S,
    pub sin_half: S,
}

impl PlaneRotation<crate::scalar::C64> {
    pub fn from_angle(axis1: usize, axis2: usize, theta: f64) -> Self {
        PlaneRotation {
            axis1,
            axis2,
            cos_half: crate::scalar::C64::new((theta / 2.0).cos(), 0.0),
            sin_half: crate::scalar::C64::new((theta / 2.0).sin(), 0.0),
        }
    }
}

impl<S: Scalar> PlaneRotation<S> {
    /// cos(theta) from the half angle.
    pub fn cos_full(&self) -> S {
        S::one() - S::from_int(2) * self.sin_half.clone() * self.sin_half.clone()
    }
    /// sin(theta) from the half angle.
    pub fn sin_full(&self) -> S {
        S::from_int(2) * self.sin_half.clone() * self.cos_half.clone()
    }
}

/// Splitting of the fiber at a fixed point: axes 1..a are tangential, the
/// rest are normal and carry the rotation blocks.
#[derive(Clone, Debug)]
pub struct FixedPointFrame<S> {
    pub tangential_dim: usize,
    pub rotations: Vec<PlaneRotation<S>>,
}

impl<S: Scalar> FixedPointFrame<S> {
    pub fn new(
        tangential_dim: usize,
        rotations: Vec<PlaneRotation<S>>,
        ctx: &AlgebraContext,
    ) -> Result<Self> {
        let b = 2 * rotations.len();
        if tangential_dim + b != ctx.n {
            return Err(Error::InvalidInput(format!(
                "fixed-point splitting {tangential_dim}+{b} != n={}",
                ctx.n
            )));
        }
        let mut seen = 0u64;
        for r in &rotations {
            for ax in [r.axis1, r.axis2] {
                if ax <= tangential_dim || ax > ctx.n {
                    return Err(Error::InvalidInput(format!(
                        "rotation axis {ax} outside the normal range"
                    )));
                }
                if seen >> (ax - 1) & 1 == 1 {
                    return Err(Error::InvalidInput(format!("repeated rotation axis {ax}")));
                }
                seen |= 1 << (ax - 1);
            }
            if r.sin_half.is_zero() {
                return Err(Error::Degenerate(
                    "rotation block with eigenvalue 1 on the normal bundle".into(),
                ));
            }
        }
        Ok(FixedPointFrame {
            tangential_dim,
            rotations,
        })
    }

    pub fn normal_dim(&self) -> usize {
        2 * self.rotations.len()
    }

    /// Continuity branch of det^(1/2)(1 - phi^N): prod_j 2 sin(theta_j / 2).
    pub fn det_half(&self) -> S {
        let mut acc = S::one();
        for r in &self.rotations {
            acc = acc * S::from_int(2) * r.sin_half.clone();
        }
        acc
    }

    fn normal_mask(&self, ctx: &AlgebraContext) -> u64 {
        ctx.fiber_full() & !mask_full(self.tangential_dim)
    }
}

/// Spinor lift of the frame's normal rotation, with its continuity sign.
pub struct SpinorLift<S> {
    pub element: GradedElement<S>,
    /// +1 for the continuity branch from theta = 0 on every block.
    pub sign: i8,
}

pub fn spinor_lift<S: Scalar>(
    frame: &FixedPointFrame<S>,
    ctx: &AlgebraContext,
) -> Result<SpinorLift<S>> {
    let mut acc = GradedElement::one();
    for r in &frame.rotations {
        let ei = GradedElement::clifford_gen(r.axis1, ctx)?;
        let ej = GradedElement::clifford_gen(r.axis2, ctx)?;
        let bivec = ei.mul(&ej, ctx)?;
        let factor = GradedElement::scalar(r.cos_half.clone())
            .add(&bivec.scale(&r.sin_half));
        acc = acc.mul(&factor, ctx)?;
    }
    Ok(SpinorLift {
        element: acc,
        sign: 1,
    })
}

/// Str[phi~ A] split as in the fixed-point localization: a leading term
/// (-2i)^(n/2) 2^(-b/2) det^(1/2)(1-phi^N) |sigma(A)|^(a,0) plus the
/// lower normal-degree corrections.
pub struct EquivariantStr<S> {
    pub leading: GradedElement<S>,
    pub correction: GradedElement<S>,
}

impl<S: Scalar> EquivariantStr<S> {
    pub fn total(&self) -> GradedElement<S> {
        self.leading.add(&self.correction)
    }
}

pub fn equivariant_supertrace<S: Scalar>(
    phi_lift: &GradedElement<S>,
    a_elem: &GradedElement<S>,
    frame: &FixedPointFrame<S>,
    ctx: &AlgebraContext,
) -> Result<EquivariantStr<S>> {
    equivariant_supertrace_sigma(phi_lift, &a_elem.symbol_map()?, frame, ctx)
}

/// Variant of [`equivariant_supertrace`] taking sigma(A) directly; useful
/// when the element is already on the exterior (symbol) side, as for Getzler
/// model heat kernels.
pub fn equivariant_supertrace_sigma<S: Scalar>(
    phi_lift: &GradedElement<S>,
    sigma_a: &GradedElement<S>,
    frame: &FixedPointFrame<S>,
    ctx: &AlgebraContext,
) -> Result<EquivariantStr<S>> {
    if ctx.n % 2 != 0 {
        return Err(Error::InvalidInput("even fiber rank required".into()));
    }
    let a = frame.tangential_dim;
    let b = frame.normal_dim();
    if a + b != ctx.n || b % 2 != 0 {
        return Err(Error::InvalidInput("inconsistent fixed-point frame".into()));
    }
    let pref = S::from_int(-2).pow_i64(ctx.n as i64 / 2).unwrap()
        * i_pow::<S>(ctx.n as i64 / 2);
    let two_pow = S::from_ratio(1, 1 << (b / 2));
    let sigma_a = sigma_a.clone();
    let sigma_phi = phi_lift.symbol_map()?;
    let tangential_full = mask_full(a);
    let normal = frame.normal_mask(ctx);

    // leading term
    let restricted = sigma_a.berezin(a, BerezinMode::StarZero, ctx)?;
    let leading = restricted.scale(&(pref.clone() * two_pow * frame.det_half()));

    // corrections: sum over normal degrees b' < b of
    // |sigma(phi)^(0,b') sigma(A)^(a, b-b')|^(n)
    let mut correction = GradedElement::zero(FiberRep::Exterior);
    for bp in 0..b as u32 {
        let phi_comp = sigma_phi.filter(|m| {
            m.fiber & !normal == 0 && m.fiber.count_ones() == bp
        });
        let a_comp = sigma_a.filter(|m| {
            m.fiber & mask_full(a) == tangential_full
                && (m.fiber & normal).count_ones() == b as u32 - bp
        });
        if phi_comp.is_zero() || a_comp.is_zero() {
            continue;
        }
        let prod = phi_comp.mul(&a_comp, ctx)?;
        let top = prod.berezin(ctx.n, BerezinMode::Full, ctx)?;
        correction = correction.add(&top);
    }
    let correction = correction.scale(&pref);
    Ok(EquivariantStr {
        leading,
        correction,
    })
}

/// Direct route Str[phi~ A] through the graded product, for cross-checks.
pub fn equivariant_supertrace_direct<S: Scalar>(
    phi_lift: &GradedElement<S>,
    a_elem: &GradedElement<S>,
    ctx: &AlgebraContext,
) -> Result<GradedElement<S>> {
    phi_lift.mul(a_elem, ctx)?.supertrace(ctx)
}

/// alpha! for a multi-index.
pub fn multi_factorial<S: Scalar>(alpha: &[u32]) -> S {
    let mut acc = S::one();
    for &a in alpha {
        acc = acc * factorial::<S>(a);
    }
    acc
}

/// A graded element times a formal power of sqrt(pi).
///
/// Heat-kernel normalizations like (4 pi t)^(-n/2) and (2 pi)^(-a/2) carry
/// powers of pi that the exact-rational mode cannot absorb; they are tracked
/// here as an integer exponent of sqrt(pi) so that identities stay exact.
#[derive(Clone, Debug, PartialEq)]
pub struct PiScaled<S: Scalar> {
    /// Power of sqrt(pi): the represented value is `value * pi^(pi_half/2)`.
    pub pi_half: i32,
    pub value: GradedElement<S>,
}

impl<S: Scalar> PiScaled<S> {
    pub fn new(pi_half: i32, value: GradedElement<S>) -> Self {
        PiScaled { pi_half, value }
    }

    pub fn zero() -> Self {
        PiScaled {
            pi_half: 0,
            value: GradedElement::zero(FiberRep::Exterior),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        if self.is_zero() {
            return Ok(rhs.clone());
        }
        if rhs.is_zero() {
            return Ok(self.clone());
        }
        if self.pi_half != rhs.pi_half {
            return Err(Error::InvalidInput(format!(
                "adding incompatible pi powers {} and {}",
                self.pi_half, rhs.pi_half
            )));
        }
        Ok(PiScaled {
            pi_half: self.pi_half,
            value: self.value.add(&rhs.value),
        })
    }

    pub fn mul(&self, rhs: &Self, ctx: &AlgebraContext) -> Result<Self> {
        Ok(PiScaled {
            pi_half: self.pi_half + rhs.pi_half,
            value: self.value.mul(&rhs.value, ctx)?,
        })
    }

    pub fn scale(&self, s: &S) -> Self {
        PiScaled {
            pi_half: self.pi_half,
            value: self.value.scale(s),
        }
    }

    pub fn map_value(&self, f: impl FnOnce(&GradedElement<S>) -> GradedElement<S>) -> Self {
        PiScaled {
            pi_half: self.pi_half,
            value: f(&self.value),
        }
    }

    /// Equality with the pi exponent normalized away on zero values.
    pub fn eq_exact(&self, rhs: &Self) -> bool {
        (self.is_zero() && rhs.is_zero())
            || (self.pi_half == rhs.pi_half && self.value == rhs.value)
    }

    /// Materialize numerically, folding the pi power into the coefficients.
    pub fn to_c64_element(&self) -> GradedElement<crate::scalar::C64> {
        let factor = std::f64::consts::PI.powf(self.pi_half as f64 / 2.0);
        let mut out = GradedElement::zero(self.value.rep());
        for (m, c) in self.value.terms() {
            out.insert_add(*m, c.to_c64() * crate::scalar::C64::new(factor, 0.0));
        }
        out
    }

    pub fn distance(&self, rhs: &Self) -> f64 {
        self.to_c64_element().sub(&rhs.to_c64_element()).max_abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{C64, Exact};
    use num_traits::{One, Zero};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn ctx(n: usize, q: usize) -> AlgebraContext {
        AlgebraContext::new(n, q, &["z"]).unwrap()
    }

    fn gen_c(i: usize, c: &AlgebraContext) -> GradedElement<Exact> {
        GradedElement::clifford_gen(i, c).unwrap()
    }

    #[test]
    fn clifford_relations() {
        let c = ctx(4, 0);
        for i in 1..=4 {
            for j in 1..=4 {
                let ei = gen_c(i, &c);
                let ej = gen_c(j, &c);
                let anti = ei.mul(&ej, &c).unwrap().add(&ej.mul(&ei, &c).unwrap());
                let expected = if i == j {
                    GradedElement::scalar(Exact::from_int(-2))
                } else {
                    GradedElement::zero(FiberRep::Clifford)
                };
                assert_eq!(anti, expected, "i={i} j={j}");
            }
        }
    }

    #[test]
    fn square_of_generator_is_minus_one() {
        let c = ctx(2, 0);
        let e1 = gen_c(1, &c);
        assert_eq!(
            e1.mul(&e1, &c).unwrap(),
            GradedElement::scalar(Exact::from_int(-1))
        );
    }

    #[test]
    fn base_generators_anticommute_and_square_to_zero() {
        let c = ctx(2, 2);
        let d1 = GradedElement::<Exact>::base_gen(1, &c).unwrap();
        let d2 = GradedElement::<Exact>::base_gen(2, &c).unwrap();
        assert!(d1.mul(&d1, &c).unwrap().is_zero());
        let anti = d1.mul(&d2, &c).unwrap().add(&d2.mul(&d1, &c).unwrap());
        assert!(anti.is_zero());
    }

    #[test]
    fn symbol_and_quantize_invert_each_other() {
        let c = ctx(4, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let x = random_element(&c, &mut rng, FiberRep::Clifford);
            let y = x.symbol_map().unwrap().quantize().unwrap();
            assert_eq!(x, y);
        }
    }

    #[test]
    fn symbol_of_top_products() {
        // sigma(c(e1)c(e2)) = e1 ^ e2, sigma(c(e1)c(e1)) = -1
        let c = ctx(2, 0);
        let e1 = gen_c(1, &c);
        let e2 = gen_c(2, &c);
        let p = e1.mul(&e2, &c).unwrap().symbol_map().unwrap();
        let expected = GradedElement::<Exact>::exterior_gen(1, &c)
            .unwrap()
            .mul(&GradedElement::exterior_gen(2, &c).unwrap(), &c)
            .unwrap();
        assert_eq!(p, expected);
        let sq = e1.mul(&e1, &c).unwrap().symbol_map().unwrap();
        assert_eq!(sq.scalar_part(), Exact::from_int(-1));
    }

    fn random_element(
        c: &AlgebraContext,
        rng: &mut ChaCha8Rng,
        rep: FiberRep,
    ) -> GradedElement<Exact> {
        let mut e = GradedElement::zero(rep);
        for _ in 0..4 {
            let mask = BasisMask {
                fiber: rng.gen_range(0..(1u64 << c.n)),
                base: if c.q_bar > 0 {
                    rng.gen_range(0..(1u64 << c.q_bar))
                } else {
                    0
                },
                aux: rng.gen_range(0..(1u64 << c.aux.len())),
            };
            let coeff = Exact::from_int(rng.gen_range(-5..=5));
            e.insert_add(mask, coeff);
        }
        e
    }

    #[test]
    fn product_is_associative_and_distributive() {
        let c = ctx(3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let x = random_element(&c, &mut rng, FiberRep::Clifford);
            let y = random_element(&c, &mut rng, FiberRep::Clifford);
            let z = random_element(&c, &mut rng, FiberRep::Clifford);
            let xy_z = x.mul(&y, &c).unwrap().mul(&z, &c).unwrap();
            let x_yz = x.mul(&y.mul(&z, &c).unwrap(), &c).unwrap();
            assert_eq!(xy_z, x_yz);
            let lhs = x.mul(&y.add(&z), &c).unwrap();
            let rhs = x.mul(&y, &c).unwrap().add(&x.mul(&z, &c).unwrap());
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn spinor_rep_satisfies_relations() {
        for n in [2usize, 3, 4, 5, 6] {
            let rep = SpinorRep::<Exact>::new(n);
            let dim = rep.dim();
            for i in 0..n {
                for j in 0..n {
                    let anti = &(&rep.gens[i] * &rep.gens[j]) + &(&rep.gens[j] * &rep.gens[i]);
                    let expected = if i == j {
                        Mat::identity(dim).scale(&Exact::from_int(-2))
                    } else {
                        Mat::zeros(dim, dim)
                    };
                    assert_eq!(anti, expected, "n={n} i={i} j={j}");
                }
            }
            if n % 2 == 0 {
                let chir = rep.chirality.as_ref().unwrap();
                assert_eq!(chir * chir, Mat::identity(dim), "chirality squares to 1");
                for g in &rep.gens {
                    let anti = &(chir * g) + &(g * chir);
                    assert!(anti.is_zero(), "chirality anticommutes, n={n}");
                }
            }
        }
    }

    #[test]
    fn supertrace_matches_matrix_supertrace() {
        // formula (top monomial -> (-2i)^(n/2), everything else -> 0)
        // against Tr[chirality * rho(monomial)] for every basis monomial
        for n in [2usize, 4, 6] {
            let c = AlgebraContext::new(n, 0, &[]).unwrap();
            let rep = SpinorRep::<Exact>::new(n);
            for mask in 0u64..(1 << n) {
                let elem = GradedElement::monomial(
                    FiberRep::Clifford,
                    BasisMask {
                        fiber: mask,
                        base: 0,
                        aux: 0,
                    },
                    Exact::one(),
                );
                let formula = elem.supertrace(&c).unwrap().scalar_part();
                let matrix = rep.matrix_supertrace(&rep.represent(&elem, &c).unwrap());
                assert_eq!(formula, matrix, "n={n} mask={mask:b}");
            }
        }
    }

    #[test]
    fn supertrace_examples() {
        let c = ctx(2, 0);
        let one = GradedElement::<Exact>::one();
        assert!(one.supertrace(&c).unwrap().is_zero());
        let e12 = gen_c(1, &c).mul(&gen_c(2, &c), &c).unwrap();
        let st = e12.supertrace(&c).unwrap().scalar_part();
        assert_eq!(st, Exact::from_int(-2) * Exact::i());
    }

    #[test]
    fn odd_trace_matches_matrix_trace() {
        for n in [3usize, 5] {
            let c = AlgebraContext::new(n, 0, &[]).unwrap();
            let rep = SpinorRep::<Exact>::new(n);
            for mask in 0u64..(1 << n) {
                let elem = GradedElement::monomial(
                    FiberRep::Clifford,
                    BasisMask {
                        fiber: mask,
                        base: 0,
                        aux: 0,
                    },
                    Exact::one(),
                );
                let formula = elem.trace_odd(&c).unwrap().scalar_part();
                let matrix = rep.represent(&elem, &c).unwrap().trace();
                assert_eq!(formula, matrix, "n={n} mask={mask:b}");
            }
        }
    }

    #[test]
    fn odd_trace_examples() {
        let c = AlgebraContext::new(3, 0, &[]).unwrap();
        let one = GradedElement::<Exact>::one();
        assert_eq!(one.trace_odd(&c).unwrap().scalar_part(), Exact::from_int(2));
        let e1 = gen_c(1, &c);
        assert!(e1.trace_odd(&c).unwrap().is_zero());
        let top = gen_c(1, &c)
            .mul(&gen_c(2, &c), &c)
            .unwrap()
            .mul(&gen_c(3, &c), &c)
            .unwrap();
        assert_eq!(
            top.trace_odd(&c).unwrap().scalar_part(),
            Exact::from_int(-2)
        );
    }

    #[test]
    fn supertrace_of_supercommutator_vanishes() {
        let c = ctx(4, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..40 {
            // homogeneous-parity elements
            let x = random_element(&c, &mut rng, FiberRep::Clifford)
                .filter(|m| m.parity() == 0);
            let y = random_element(&c, &mut rng, FiberRep::Clifford);
            let y_even = y.filter(|m| m.parity() == 0);
            let y_odd = y.filter(|m| m.parity() == 1);
            for (y_h, sign) in [(y_even, 1i64), (y_odd, 1i64)] {
                // x even: [x, y] = xy - yx regardless of y parity
                let comm = x
                    .mul(&y_h, &c)
                    .unwrap()
                    .sub(&y_h.mul(&x, &c).unwrap().scale(&Exact::from_int(sign)));
                assert!(comm.supertrace(&c).unwrap().is_zero());
            }
        }
        // odd-odd: str(xy + yx) = 0
        for _ in 0..40 {
            let x = random_element(&c, &mut rng, FiberRep::Clifford)
                .filter(|m| m.parity() == 1);
            let y = random_element(&c, &mut rng, FiberRep::Clifford)
                .filter(|m| m.parity() == 1);
            let anti = x.mul(&y, &c).unwrap().add(&y.mul(&x, &c).unwrap());
            assert!(anti.supertrace(&c).unwrap().is_zero());
        }
    }

    /// Build the faithful tensor-product representation: exterior creation
    /// operators on Lambda(base+aux) times the spinor matrices, with the
    /// parity twist making all odd generators anticommute.
    struct TensorOracle {
        mats: Vec<Mat<Exact>>, // indexed: fiber gens, then base, then aux
        dim: usize,
        c: AlgebraContext,
    }

    impl TensorOracle {
        fn new(c: &AlgebraContext) -> Self {
            let rep = SpinorRep::<Exact>::new(c.n);
            let k = c.q_bar + c.aux.len();
            let ext_dim = 1usize << k;
            let sdim = rep.dim();
            // creation operator for generator g on Lambda basis
            let creation = |g: usize| {
                Mat::<Exact>::from_fn(ext_dim, ext_dim, |row, col| {
                    if col & (1 << g) == 0 && row == col | (1 << g) {
                        let below = (col & ((1 << g) - 1)).count_ones();
                        if below % 2 == 0 {
                            Exact::one()
                        } else {
                            -Exact::one()
                        }
                    } else {
                        Exact::zero()
                    }
                })
            };
            let parity = Mat::<Exact>::from_fn(ext_dim, ext_dim, |r, cc| {
                if r == cc {
                    if (r as u64).count_ones() % 2 == 0 {
                        Exact::one()
                    } else {
                        -Exact::one()
                    }
                } else {
                    Exact::zero()
                }
            });
            let mut mats = Vec::new();
            for g in &rep.gens {
                mats.push(parity.kron(g));
            }
            for j in 0..k {
                mats.push(creation(j).kron(&Mat::identity(sdim)));
            }
            TensorOracle {
                mats,
                dim: ext_dim * sdim,
                c: c.clone(),
            }
        }

        fn represent(&self, e: &GradedElement<Exact>) -> Mat<Exact> {
            let mut out = Mat::<Exact>::zeros(self.dim, self.dim);
            for (m, coeff) in e.terms() {
                let mut acc = Mat::<Exact>::identity(self.dim);
                for i in 0..self.c.n {
                    if m.fiber >> i & 1 == 1 {
                        acc = &acc * &self.mats[i];
                    }
                }
                for j in 0..self.c.q_bar {
                    if m.base >> j & 1 == 1 {
                        acc = &acc * &self.mats[self.c.n + j];
                    }
                }
                for j in 0..self.c.aux.len() {
                    if m.aux >> j & 1 == 1 {
                        acc = &acc * &self.mats[self.c.n + self.c.q_bar + j];
                    }
                }
                out = &out + &acc.scale(coeff);
            }
            out
        }
    }

    #[test]
    fn koszul_signs_match_tensor_representation() {
        let c = ctx(2, 2);
        let oracle = TensorOracle::new(&c);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..60 {
            let x = random_element(&c, &mut rng, FiberRep::Clifford);
            let y = random_element(&c, &mut rng, FiberRep::Clifford);
            let lhs = oracle.represent(&x.mul(&y, &c).unwrap());
            let rhs = &oracle.represent(&x) * &oracle.represent(&y);
            assert_eq!(lhs, rhs);
        }
        // the named example: (dy1 c(e1)) (dy2 c(e2)) = -dy1 dy2 c(e1) c(e2)
        let d1 = GradedElement::<Exact>::base_gen(1, &c).unwrap();
        let d2 = GradedElement::<Exact>::base_gen(2, &c).unwrap();
        let e1 = gen_c(1, &c);
        let e2 = gen_c(2, &c);
        let lhs = d1
            .mul(&e1, &c)
            .unwrap()
            .mul(&d2.mul(&e2, &c).unwrap(), &c)
            .unwrap();
        let canonical = e1
            .mul(&e2, &c)
            .unwrap()
            .mul(&d1.mul(&d2, &c).unwrap(), &c)
            .unwrap();
        assert_eq!(lhs, canonical.neg());
        let m1 = oracle.represent(&d1.mul(&e1, &c).unwrap());
        let m2 = oracle.represent(&d2.mul(&e2, &c).unwrap());
        assert_eq!(oracle.represent(&lhs), &m1 * &m2);
    }

    #[test]
    fn berezin_examples() {
        let c = ctx(3, 1);
        let e1 = GradedElement::<Exact>::exterior_gen(1, &c).unwrap();
        let e2 = GradedElement::<Exact>::exterior_gen(2, &c).unwrap();
        let e3 = GradedElement::<Exact>::exterior_gen(3, &c).unwrap();
        let e12 = e1.mul(&e2, &c).unwrap();
        assert_eq!(
            e12.berezin(2, BerezinMode::Full, &c).unwrap().scalar_part(),
            Exact::one()
        );
        assert!(e1.berezin(2, BerezinMode::Full, &c).unwrap().is_zero());
        let e13 = e1.mul(&e3, &c).unwrap();
        assert!(e13.berezin(1, BerezinMode::StarZero, &c).unwrap().is_zero());
    }

    #[test]
    fn equivariant_supertrace_n2_theta_pi_exact() {
        // phi^N = -I2 (theta = pi, half angle pi/2: cos 0, sin 1)
        let c = AlgebraContext::new(2, 0, &[]).unwrap();
        let frame = FixedPointFrame::new(
            0,
            vec![PlaneRotation {
                axis1: 1,
                axis2: 2,
                cos_half: Exact::zero(),
                sin_half: Exact::one(),
            }],
            &c,
        )
        .unwrap();
        let lift = spinor_lift(&frame, &c).unwrap();
        for a_elem in [
            GradedElement::<Exact>::one(),
            gen_c(1, &c).mul(&gen_c(2, &c), &c).unwrap(),
            gen_c(1, &c),
        ] {
            let split = equivariant_supertrace(&lift.element, &a_elem, &frame, &c).unwrap();
            let direct = equivariant_supertrace_direct(&lift.element, &a_elem, &c).unwrap();
            assert_eq!(split.total(), direct);
        }
        // and against the matrix supertrace
        let rep = SpinorRep::<Exact>::new(2);
        let direct = equivariant_supertrace_direct(
            &lift.element,
            &GradedElement::one(),
            &c,
        )
        .unwrap();
        let m = &rep.represent(&lift.element, &c).unwrap()
            * &rep.represent(&GradedElement::one(), &c).unwrap();
        assert_eq!(direct.scalar_part(), rep.matrix_supertrace(&m));
    }

    #[test]
    fn equivariant_supertrace_reduces_to_plain_for_identity() {
        let c = AlgebraContext::new(2, 0, &[]).unwrap();
        let frame = FixedPointFrame::<Exact> {
            tangential_dim: 2,
            rotations: vec![],
        };
        let lift = GradedElement::<Exact>::one();
        let a_elem = gen_c(1, &c).mul(&gen_c(2, &c), &c).unwrap();
        let split = equivariant_supertrace(&lift, &a_elem, &frame, &c).unwrap();
        assert_eq!(split.total(), a_elem.supertrace(&c).unwrap());
    }

    #[test]
    fn equivariant_supertrace_n4_float() {
        // n=4, a=2, rotation theta=pi/2 in the (3,4) plane, A = c(e1)c(e2)
        let c = AlgebraContext::new(4, 0, &[]).unwrap();
        let frame = FixedPointFrame::new(
            2,
            vec![PlaneRotation::<C64>::from_angle(3, 4, std::f64::consts::FRAC_PI_2)],
            &c,
        )
        .unwrap();
        let lift = spinor_lift(&frame, &c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let mut a_elem = GradedElement::<C64>::zero(FiberRep::Clifford);
            for _ in 0..3 {
                a_elem.insert_add(
                    BasisMask {
                        fiber: rng.gen_range(0..16),
                        base: 0,
                        aux: 0,
                    },
                    C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)),
                );
            }
            let split = equivariant_supertrace(&lift.element, &a_elem, &frame, &c).unwrap();
            let direct = equivariant_supertrace_direct(&lift.element, &a_elem, &c).unwrap();
            assert!(
                split.total().distance(&direct) < 1e-12,
                "split {:?} direct {:?}",
                split.total(),
                direct
            );
        }
        let e12 = GradedElement::<C64>::clifford_gen(1, &c)
            .unwrap()
            .mul(&GradedElement::clifford_gen(2, &c).unwrap(), &c)
            .unwrap();
        let split = equivariant_supertrace(&lift.element, &e12, &frame, &c).unwrap();
        let direct = equivariant_supertrace_direct(&lift.element, &e12, &c).unwrap();
        assert!(split.total().distance(&direct) < 1e-12);
    }

    #[test]
    fn dump_format_is_one_term_per_line() {
        let c = ctx(2, 1);
        let e = gen_c(1, &c)
            .mul(&GradedElement::base_gen(1, &c).unwrap(), &c)
            .unwrap()
            .add(&GradedElement::one());
        let dump = format!("{e}");
        assert_eq!(dump.lines().count(), 2);
        assert!(dump.contains("->"));
    }
}
