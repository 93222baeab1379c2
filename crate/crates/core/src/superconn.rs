//! Finite-dimensional superconnection laboratory: matrix-valued base forms
//! with polynomial coefficients, Duhamel expansions of the heat exponential,
//! rescaled Chern forms, JLO cochains, the Grassmann-variable exponential
//! identity, and eta-form integrands.
//!
//! Elements live in Lambda(R^q) (x) End(V) with an optional super-grading on
//! V; products carry the Koszul sign between odd matrices and positive-degree
//! forms. A faithful "flattening" onto End(Lambda (x) V) provides the matrix
//! exponential and serves as the independent oracle for the Duhamel modes.

use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::quad::simplex_quadrature;
use crate::scalar::{factorial, Scalar, C64};
use std::collections::BTreeMap;

type YMono = Vec<u32>;
type Key = (u64, YMono);

fn mask_degree(m: u64) -> u32 {
    m.count_ones()
}

/// Sign of dy_A ^ dy_B, None when they collide.
fn wedge(a: u64, b: u64) -> Option<(f64, u64)> {
    if a & b != 0 {
        return None;
    }
    let mut shifted = a >> 1;
    let mut swaps = 0u32;
    while shifted != 0 {
        swaps += (shifted & b).count_ones();
        shifted >>= 1;
    }
    Some((if swaps % 2 == 0 { 1.0 } else { -1.0 }, a | b))
}

// ---------------------------------------------------------------------------
// Scalar-valued polynomial forms on the base
// ---------------------------------------------------------------------------

/// Sum of `c * y^gamma dy_mask` terms.
#[derive(Clone, Debug, PartialEq)]
pub struct FormPoly<S: Scalar> {
    pub y_dim: usize,
    pub terms: BTreeMap<Key, S>,
}

impl<S: Scalar> FormPoly<S> {
    pub fn zero(y_dim: usize) -> Self {
        FormPoly {
            y_dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn insert_add(&mut self, key: Key, v: S) {
        if v.is_zero() {
            return;
        }
        match self.terms.get_mut(&key) {
            Some(acc) => {
                *acc = acc.clone() + v;
                if acc.is_zero() {
                    self.terms.remove(&key);
                }
            }
            None => {
                self.terms.insert(key, v);
            }
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        let mut out = self.clone();
        for (k, v) in &rhs.terms {
            out.insert_add(k.clone(), v.clone());
        }
        out
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        let mut out = self.clone();
        for (k, v) in &rhs.terms {
            out.insert_add(k.clone(), -v.clone());
        }
        out
    }

    pub fn scale(&self, s: &S) -> Self {
        let mut out = Self::zero(self.y_dim);
        for (k, v) in &self.terms {
            out.insert_add(k.clone(), v.clone() * s.clone());
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.values().all(|v| v.is_zero())
    }

    pub fn max_abs(&self) -> f64 {
        self.terms
            .values()
            .map(|v| v.to_c64().norm())
            .fold(0.0, f64::max)
    }

    pub fn component(&self, degree: u32) -> Self {
        let mut out = Self::zero(self.y_dim);
        for ((m, g), v) in &self.terms {
            if mask_degree(*m) == degree {
                out.insert_add((*m, g.clone()), v.clone());
            }
        }
        out
    }

    pub fn max_degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|(m, _)| mask_degree(*m))
            .max()
            .unwrap_or(0)
    }

    /// Exterior derivative of the polynomial coefficients.
    pub fn exterior_d(&self) -> Self {
        let mut out = Self::zero(self.y_dim);
        for ((mask, gamma), v) in &self.terms {
            for alpha in 0..self.y_dim {
                if gamma[alpha] == 0 {
                    continue;
                }
                let bit = 1u64 << alpha;
                let Some((sign, new_mask)) = wedge(bit, *mask) else {
                    continue;
                };
                let mut g = gamma.clone();
                g[alpha] -= 1;
                let c = v.clone()
                    * S::from_int(gamma[alpha] as i64)
                    * (if sign > 0.0 { S::one() } else { -S::one() });
                out.insert_add((new_mask, g), c);
            }
        }
        out
    }

    /// Koszul homotopy on R^q: for closed omega of positive degree,
    /// d(homotopy(omega)) = omega.
    pub fn koszul_homotopy(&self) -> Self {
        let mut out = Self::zero(self.y_dim);
        for ((mask, gamma), v) in &self.terms {
            let k = mask_degree(*mask);
            if k == 0 {
                continue;
            }
            let total: u32 = gamma.iter().sum();
            let denom = S::from_int((total + k) as i64).try_inv().unwrap();
            // sum over generators of the mask with alternating signs
            let mut pos = 0u32;
            for alpha in 0..self.y_dim {
                if mask >> alpha & 1 == 0 {
                    continue;
                }
                let mut g = gamma.clone();
                g[alpha] += 1;
                let sign = if pos % 2 == 0 { S::one() } else { -S::one() };
                out.insert_add(
                    (mask & !(1u64 << alpha), g),
                    v.clone() * sign * denom.clone(),
                );
                pos += 1;
            }
        }
        out
    }

    /// psi_t on even-degree components with rational powers: degree 2k is
    /// scaled by inv_t^k. Errors if odd-degree terms are present.
    pub fn psi_even_rescale(&self, inv_t: &S) -> Result<Self> {
        let mut out = Self::zero(self.y_dim);
        for ((m, g), v) in &self.terms {
            let d = mask_degree(*m);
            if d % 2 == 1 {
                return Err(Error::InvalidInput(
                    "odd-degree component in an even rescale".into(),
                ));
            }
            let factor = inv_t.pow_i64((d / 2) as i64).unwrap();
            out.insert_add((*m, g.clone()), v.clone() * factor);
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Matrix-valued forms
// ---------------------------------------------------------------------------

/// Matrix-valued polynomial base form with an optional super-grading.
#[derive(Clone, Debug, PartialEq)]
pub struct FormMatrix<S: Scalar> {
    pub dim: usize,
    pub y_dim: usize,
    /// Diagonal +1/-1 grading; `None` for the ungraded (odd fiber) theory.
    pub grading: Option<Vec<i8>>,
    pub terms: BTreeMap<Key, Mat<S>>,
}

impl<S: Scalar> FormMatrix<S> {
    pub fn zero(dim: usize, y_dim: usize, grading: Option<Vec<i8>>) -> Self {
        FormMatrix {
            dim,
            y_dim,
            grading,
            terms: BTreeMap::new(),
        }
    }

    pub fn from_matrix(m: Mat<S>, y_dim: usize, grading: Option<Vec<i8>>) -> Self {
        let dim = m.rows;
        let mut out = Self::zero(dim, y_dim, grading);
        out.insert_add((0, vec![0; y_dim]), m);
        out
    }

    pub fn identity(dim: usize, y_dim: usize, grading: Option<Vec<i8>>) -> Self {
        Self::from_matrix(Mat::identity(dim), y_dim, grading)
    }

    pub fn insert_add(&mut self, key: Key, m: Mat<S>) {
        if m.is_zero() {
            return;
        }
        match self.terms.get_mut(&key) {
            Some(acc) => {
                *acc = &*acc + &m;
                if acc.is_zero() {
                    self.terms.remove(&key);
                }
            }
            None => {
                self.terms.insert(key, m);
            }
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        let mut out = self.clone();
        for (k, v) in &rhs.terms {
            out.insert_add(k.clone(), v.clone());
        }
        out
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.neg())
    }

    pub fn neg(&self) -> Self {
        self.map(|m| -m)
    }

    pub fn scale(&self, s: &S) -> Self {
        self.map(|m| m.scale(s))
    }

    pub fn map(&self, f: impl Fn(&Mat<S>) -> Mat<S>) -> Self {
        let mut out = Self::zero(self.dim, self.y_dim, self.grading.clone());
        for (k, m) in &self.terms {
            out.insert_add(k.clone(), f(m));
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.values().all(|m| m.is_zero())
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|m| m.max_abs()).fold(0.0, f64::max)
    }

    pub fn form_component(&self, degree: u32) -> Self {
        let mut out = Self::zero(self.dim, self.y_dim, self.grading.clone());
        for ((m, g), v) in &self.terms {
            if mask_degree(*m) == degree {
                out.insert_add((*m, g.clone()), v.clone());
            }
        }
        out
    }

    pub fn positive_degree(&self) -> Self {
        let mut out = Self::zero(self.dim, self.y_dim, self.grading.clone());
        for ((m, g), v) in &self.terms {
            if *m != 0 {
                out.insert_add((*m, g.clone()), v.clone());
            }
        }
        out
    }

    pub fn degree0(&self) -> Self {
        self.form_component(0)
    }

    fn grading_mat(&self) -> Option<Mat<S>> {
        self.grading.as_ref().map(|g| {
            Mat::from_fn(self.dim, self.dim, |i, j| {
                if i == j {
                    if g[i] > 0 {
                        S::one()
                    } else {
                        -S::one()
                    }
                } else {
                    S::zero()
                }
            })
        })
    }

    fn matrix_parity_split(&self, m: &Mat<S>) -> (Mat<S>, Mat<S>) {
        match self.grading_mat() {
            Some(g) => {
                let conj = &(&g * m) * &g;
                let even = (&*m + &conj).scale(&S::from_ratio(1, 2));
                let odd = (&*m - &conj).scale(&S::from_ratio(1, 2));
                (even, odd)
            }
            None => (m.clone(), Mat::zeros(self.dim, self.dim)),
        }
    }

    /// Product with the Koszul rule: an odd matrix moving past a form of
    /// degree d picks up (-1)^d.
    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim);
        let mut out = Self::zero(self.dim, self.y_dim, self.grading.clone());
        for ((m1, g1), a) in &self.terms {
            let (a_even, a_odd) = self.matrix_parity_split(a);
            for ((m2, g2), b) in &rhs.terms {
                let Some((sign, mask)) = wedge(*m1, *m2) else {
                    continue;
                };
                let gamma: YMono = g1.iter().zip(g2).map(|(x, y)| x + y).collect();
                let s_even = S::from_int(sign as i64);
                let s_odd = if mask_degree(*m2) % 2 == 1 {
                    -s_even.clone()
                } else {
                    s_even.clone()
                };
                let mut m = (&a_even * b).scale(&s_even);
                if !a_odd.is_zero() {
                    m = &m + &(&a_odd * b).scale(&s_odd);
                }
                out.insert_add((mask, gamma), m);
            }
        }
        out
    }

    /// Supertrace (requires the grading): a base form.
    pub fn supertrace(&self) -> Result<FormPoly<S>> {
        let g = self
            .grading
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("supertrace needs a grading".into()))?;
        let mut out = FormPoly::zero(self.y_dim);
        for ((m, gamma), mat) in &self.terms {
            let mut tr = S::zero();
            for i in 0..self.dim {
                let sign = if g[i] > 0 { S::one() } else { -S::one() };
                tr = tr + sign * mat[(i, i)].clone();
            }
            out.insert_add((*m, gamma.clone()), tr);
        }
        Ok(out)
    }

    /// Ordinary trace as a base form.
    pub fn trace(&self) -> FormPoly<S> {
        let mut out = FormPoly::zero(self.y_dim);
        for ((m, gamma), mat) in &self.terms {
            out.insert_add((*m, gamma.clone()), mat.trace());
        }
        out
    }

    /// Trace restricted to even-degree form coefficients.
    pub fn trace_even(&self) -> FormPoly<S> {
        let mut out = FormPoly::zero(self.y_dim);
        for ((m, gamma), mat) in &self.terms {
            if mask_degree(*m) % 2 == 0 {
                out.insert_add((*m, gamma.clone()), mat.trace());
            }
        }
        out
    }

    /// Exterior derivative of the polynomial coefficients (acting from the
    /// left; matrices are unaffected).
    pub fn exterior_d(&self) -> Self {
        let mut out = Self::zero(self.dim, self.y_dim, self.grading.clone());
        for ((mask, gamma), mat) in &self.terms {
            for alpha in 0..self.y_dim {
                if gamma[alpha] == 0 {
                    continue;
                }
                let Some((sign, new_mask)) = wedge(1u64 << alpha, *mask) else {
                    continue;
                };
                let mut g = gamma.clone();
                g[alpha] -= 1;
                let c = S::from_int(gamma[alpha] as i64)
                    * (if sign > 0.0 { S::one() } else { -S::one() });
                out.insert_add((new_mask, g), mat.scale(&c));
            }
        }
        out
    }

    /// psi_t: scale a form-degree-k coefficient by inv_sqrt_t^k.
    pub fn psi_rescale(&self, inv_sqrt_t: &S) -> Self {
        let mut out = Self::zero(self.dim, self.y_dim, self.grading.clone());
        for ((m, g), mat) in &self.terms {
            let f = inv_sqrt_t.pow_i64(mask_degree(*m) as i64).unwrap();
            out.insert_add((*m, g.clone()), mat.scale(&f));
        }
        out
    }

    /// Supercommutator [a, x] with `self` odd overall; x is split into its
    /// total-parity components.
    pub fn super_commutator(&self, x: &Self) -> Self {
        let mut out = Self::zero(self.dim, self.y_dim, self.grading.clone());
        for ((m, g), mat) in &x.terms {
            let (even_m, odd_m) = x.matrix_parity_split(mat);
            let form_parity = mask_degree(*m) % 2;
            for (mat_part, mat_parity) in [(even_m, 0u32), (odd_m, 1u32)] {
                if mat_part.is_zero() {
                    continue;
                }
                let mut piece = Self::zero(self.dim, self.y_dim, self.grading.clone());
                piece.insert_add((*m, g.clone()), mat_part);
                let total_odd = (form_parity + mat_parity) % 2 == 1;
                let ax = self.mul(&piece);
                let xa = piece.mul(self);
                out = out.add(&if total_odd { ax.add(&xa) } else { ax.sub(&xa) });
            }
        }
        out
    }

    /// True when no term carries polynomial y-dependence.
    pub fn is_y_constant(&self) -> bool {
        self.terms.keys().all(|(_, g)| g.iter().all(|&p| p == 0))
    }

    /// Exponential of a strictly positive form-degree element (finite sum).
    pub fn exp_positive_degree(&self) -> Result<Self> {
        if !self.degree0().is_zero() {
            return Err(Error::InvalidInput(
                "exp_positive_degree needs vanishing degree-0 part".into(),
            ));
        }
        let mut acc = Self::identity(self.dim, self.y_dim, self.grading.clone());
        let mut pow = acc.clone();
        for k in 1..=(self.y_dim.max(1) as u32 * 64) {
            pow = pow.mul(self);
            if pow.is_zero() {
                break;
            }
            acc = acc.add(&pow.scale(&factorial::<S>(k).try_inv().unwrap()));
        }
        Ok(acc)
    }
}

impl FormMatrix<C64> {
    /// Faithful representation on Lambda(R^q) (x) V: forms act by exterior
    /// multiplication, matrices are twisted by grading^(form degree) so the
    /// Koszul signs become ordinary matrix products. y-independent only.
    pub fn flatten(&self) -> Result<Mat<C64>> {
        if !self.is_y_constant() {
            return Err(Error::InvalidInput(
                "flatten needs constant coefficients".into(),
            ));
        }
        let q = self.y_dim;
        let ext = 1usize << q;
        let n = self.dim * ext;
        let mut out = Mat::zeros(n, n);
        let grading = self.grading_mat();
        for ((mask, _), mat) in &self.terms {
            // twisted matrix factor
            let twisted = match (&grading, mask_degree(*mask) % 2) {
                (Some(g), 1) => g * mat,
                _ => mat.clone(),
            };
            for src in 0..ext as u64 {
                let Some((sign, dst)) = wedge(*mask, src) else {
                    continue;
                };
                for i in 0..self.dim {
                    for j in 0..self.dim {
                        let v = twisted[(i, j)] * C64::new(sign, 0.0);
                        let r = dst as usize * self.dim + i;
                        let c = src as usize * self.dim + j;
                        out[(r, c)] = out[(r, c)] + v;
                    }
                }
            }
        }
        Ok(out)
    }

    fn unflatten(
        big: &Mat<C64>,
        dim: usize,
        y_dim: usize,
        grading: Option<Vec<i8>>,
    ) -> FormMatrix<C64> {
        let mut out = FormMatrix::zero(dim, y_dim, grading);
        let template = FormMatrix::<C64>::zero(dim, y_dim, out.grading.clone());
        for mask in 0..(1u64 << y_dim) {
            // read off the (mask <- empty) block
            let mut m = Mat::zeros(dim, dim);
            for i in 0..dim {
                for j in 0..dim {
                    m[(i, j)] = big[(mask as usize * dim + i, j)];
                }
            }
            if m.is_zero() {
                continue;
            }
            // undo the grading twist
            let m = match (&template.grading_mat(), mask_degree(mask) % 2) {
                (Some(g), 1) => g * &m,
                _ => m,
            };
            out.insert_add((mask, vec![0; y_dim]), m);
        }
        out
    }

    /// e^{-t F} through the flattened matrix exponential (the oracle and
    /// workhorse path; constant coefficients).
    pub fn heat_exp(&self, t: f64) -> Result<FormMatrix<C64>> {
        let flat = self.flatten()?;
        let e = flat.scale(&C64::new(-t, 0.0)).expm()?;
        Ok(Self::unflatten(
            &e,
            self.dim,
            self.y_dim,
            self.grading.clone(),
        ))
    }
}

// ---------------------------------------------------------------------------
// Superconnections
// ---------------------------------------------------------------------------

/// B = D + A_[+]: an odd degree-0 matrix plus strictly positive form-degree
/// terms.
#[derive(Clone, Debug)]
pub struct Superconnection<S: Scalar> {
    pub d0: FormMatrix<S>,
    pub a_plus: FormMatrix<S>,
}

impl<S: Scalar> Superconnection<S> {
    pub fn new(d0: FormMatrix<S>, a_plus: FormMatrix<S>) -> Result<Self> {
        if !d0.positive_degree().is_zero() {
            return Err(Error::InvalidInput("D must be a degree-0 matrix".into()));
        }
        if !a_plus.degree0().is_zero() {
            return Err(Error::InvalidInput(
                "A_[+] must have strictly positive form degree".into(),
            ));
        }
        Ok(Superconnection { d0, a_plus })
    }

    pub fn total(&self) -> FormMatrix<S> {
        self.d0.add(&self.a_plus)
    }

    /// Curvature F = B^2 split into the degree-0 part D^2 and F_[+].
    pub fn curvature(&self) -> CurvatureSplit<S> {
        let full = self.total().mul(&self.total());
        CurvatureSplit {
            degree0: full.degree0(),
            positive: full.positive_degree(),
            full,
        }
    }

    /// Curvature of d + B for polynomial-coefficient families: dB + B^2.
    pub fn curvature_with_base_d(&self) -> CurvatureSplit<S> {
        let b = self.total();
        let full = b.exterior_d().add(&b.mul(&b));
        CurvatureSplit {
            degree0: full.degree0(),
            positive: full.positive_degree(),
            full,
        }
    }

    /// sqrt(t) psi_t(B): degree-k part scaled by t^((1-k)/2).
    pub fn rescaled(&self, sqrt_t: &S) -> FormMatrix<S> {
        let inv = sqrt_t.try_inv().unwrap();
        self.total().psi_rescale(&inv).scale(sqrt_t)
    }

    /// Exact time derivative of the rescaled superconnection:
    /// d/dt B_t = sum_k ((1-k)/2) t^((-1-k)/2) B^(k).
    pub fn rescaled_derivative(&self, sqrt_t: &S) -> FormMatrix<S> {
        let t_inv = (sqrt_t.clone() * sqrt_t.clone()).try_inv().unwrap();
        let mut out = FormMatrix::zero(self.d0.dim, self.d0.y_dim, self.d0.grading.clone());
        let b = self.total();
        let max_deg = b.terms.keys().map(|(m, _)| mask_degree(*m)).max().unwrap_or(0);
        for k in 0..=max_deg {
            let comp = b.form_component(k);
            if comp.is_zero() {
                continue;
            }
            // ((1-k)/2) t^((1-k)/2) / t = ((1-k)/2) t^((-1-k)/2)
            let power = sqrt_t.pow_i64(1 - k as i64).unwrap() * t_inv.clone();
            let coeff = S::from_ratio(1 - k as i64, 2) * power;
            out = out.add(&comp.scale(&coeff));
        }
        out
    }
}

pub struct CurvatureSplit<S: Scalar> {
    pub full: FormMatrix<S>,
    pub degree0: FormMatrix<S>,
    pub positive: FormMatrix<S>,
}

// ---------------------------------------------------------------------------
// Duhamel modes
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub enum DuhamelMode {
    /// Closed form for commuting structure: e^{-tF0} e^{-tF+}; requires
    /// [F0, F+] = 0.
    Exact,
    /// Simplex quadrature of the iterated integrals, with the given
    /// Gauss-Legendre order per axis.
    Simplex(usize),
}

/// e^{-tF} by the requested Duhamel mode.
pub fn duhamel_exp(f: &FormMatrix<C64>, t: f64, mode: DuhamelMode) -> Result<FormMatrix<C64>> {
    let f0 = f.degree0();
    let fp = f.positive_degree();
    match mode {
        DuhamelMode::Exact => {
            let comm = f0.mul(&fp).sub(&fp.mul(&f0));
            if comm.max_abs() > 1e-10 {
                return Err(Error::InvalidInput(
                    "exact Duhamel mode needs [F0, F+] = 0; use Simplex".into(),
                ));
            }
            let e0 = f0.heat_exp(t)?;
            let ep = fp.scale(&C64::new(-t, 0.0)).exp_positive_degree()?;
            Ok(e0.mul(&ep))
        }
        DuhamelMode::Simplex(order) => {
            let e0 = f0.heat_exp(t)?;
            let mut acc = e0.clone();
            let max_k = f.y_dim + 1;
            for k in 1..=max_k {
                let term = duhamel_term(&f0, &fp, t, k, order)?;
                let tk = (-t).powi(k as i32);
                acc = acc.add(&term.scale(&C64::new(tk, 0.0)));
            }
            Ok(acc)
        }
    }
}

/// I_k = int_{Delta_k} e^{-s0 t F0} F+ e^{-s1 t F0} ... F+ e^{-sk t F0} ds
/// with (s0, .., sk) the gaps of the ordered simplex.
pub fn duhamel_term(
    f0: &FormMatrix<C64>,
    fp: &FormMatrix<C64>,
    t: f64,
    k: usize,
    order: usize,
) -> Result<FormMatrix<C64>> {
    let flat0 = f0.flatten()?;
    let heat = |tau: f64| -> Result<Mat<C64>> { flat0.scale(&C64::new(-tau * t, 0.0)).expm() };
    let flat_p = fp.flatten()?;
    let zero = Mat::<C64>::zeros(flat0.rows, flat0.cols);
    let result = simplex_quadrature(
        k,
        order,
        |s| {
            // gaps: s_1, s_2 - s_1, ..., 1 - s_k
            let mut gaps = Vec::with_capacity(k + 1);
            gaps.push(s[0]);
            for j in 1..k {
                gaps.push(s[j] - s[j - 1]);
            }
            gaps.push(1.0 - s[k - 1]);
            let mut acc = heat(gaps[0]).unwrap();
            for gap in &gaps[1..] {
                acc = &acc * &flat_p;
                acc = &acc * &heat(*gap).unwrap();
            }
            acc
        },
        |a, b| &a + &b,
        |a, w| a.scale(&C64::new(w, 0.0)),
        zero,
    );
    Ok(FormMatrix::unflatten(
        &result,
        f0.dim,
        f0.y_dim,
        f0.grading.clone(),
    ))
}

/// Residual of the heat equation (d_t + F) e^{-tF} measured with a 5-point
/// stencil derivative; quadrature-quality diagnostic.
pub fn heat_equation_residual(
    f: &FormMatrix<C64>,
    t: f64,
    mode: DuhamelMode,
) -> Result<f64> {
    let h = 4e-3 * t;
    let e = |tt: f64| duhamel_exp(f, tt, mode);
    let e1 = e(t - 2.0 * h)?;
    let e2 = e(t - h)?;
    let e3 = e(t + h)?;
    let e4 = e(t + 2.0 * h)?;
    // O(h^4) derivative
    let ddt = e1
        .sub(&e4)
        .scale(&C64::new(1.0, 0.0))
        .add(&e3.sub(&e2).scale(&C64::new(8.0, 0.0)))
        .scale(&C64::new(1.0 / (12.0 * h), 0.0));
    let res = ddt.add(&f.mul(&duhamel_exp(f, t, mode)?));
    Ok(res.max_abs())
}

// ---------------------------------------------------------------------------
// Chern forms and JLO cochains
// ---------------------------------------------------------------------------

/// psi_t Str[phi e^{-tF}] for constant-coefficient models (numeric path).
pub fn chern_form(
    b: &Superconnection<C64>,
    t: f64,
    phi: &Mat<C64>,
) -> Result<FormPoly<C64>> {
    let f = b.curvature().full;
    let heat = f.heat_exp(t)?;
    let phi_m = FormMatrix::from_matrix(phi.clone(), b.d0.y_dim, b.d0.grading.clone());
    let str_form = phi_m.mul(&heat).supertrace()?;
    let inv_sqrt = C64::new(1.0 / t.sqrt(), 0.0);
    let mut out = FormPoly::zero(str_form.y_dim);
    for ((m, g), v) in &str_form.terms {
        out.insert_add((*m, g.clone()), *v * inv_sqrt.powu(mask_degree(*m)));
    }
    Ok(out)
}

/// Exact Chern form for the scalar-curvature toy family: requires D^2 to be
/// a scalar mu times the identity, so that
/// psi_t Str[phi e^{-tF}] = e^{-t mu} * W(t) with W exact. Returns
/// (mu, W(t)); the transcendental factor e^{-t mu} stays symbolic.
pub fn chern_form_exact<S: Scalar>(
    b: &Superconnection<S>,
    t: &S,
    phi: &Mat<S>,
    with_base_d: bool,
) -> Result<(S, FormPoly<S>)> {
    let curv = if with_base_d {
        b.curvature_with_base_d()
    } else {
        b.curvature()
    };
    // degree-0 part must be mu I
    let d0 = curv.degree0;
    let key = (0u64, vec![0; b.d0.y_dim]);
    let mu = d0
        .terms
        .get(&key)
        .map(|m| m[(0, 0)].clone())
        .unwrap_or_else(S::zero);
    let check = d0.sub(&FormMatrix::from_matrix(
        Mat::identity(b.d0.dim).scale(&mu),
        b.d0.y_dim,
        b.d0.grading.clone(),
    ));
    if !check.is_zero() {
        return Err(Error::InvalidInput(
            "chern_form_exact needs D^2 = mu I".into(),
        ));
    }
    let ep = curv.positive.scale(&-t.clone()).exp_positive_degree()?;
    let phi_m = FormMatrix::from_matrix(phi.clone(), b.d0.y_dim, b.d0.grading.clone());
    let w = phi_m.mul(&ep).supertrace()?;
    // odd components vanish for genuine superconnections; rescale the rest
    for ((m, _), v) in &w.terms {
        if mask_degree(*m) % 2 == 1 && !v.is_zero() {
            return Err(Error::Numeric(
                "odd-degree supertrace component should vanish".into(),
            ));
        }
    }
    let w = w.psi_even_rescale(&t.try_inv().unwrap())?;
    Ok((mu, w))
}

/// The equivariant bivariant JLO cochain
/// t^k int_{Delta_2k} Str[psi_t phi T0 e^{-t s1 F} T1 ... T_{2k} e^{-t(1-s_{2k})F}] ds
/// with T_j = dX_j + [B, X_j] for j >= 1 and T_0 = X_0.
pub fn jlo_cochain(
    b: &Superconnection<C64>,
    t: f64,
    phi: &Mat<C64>,
    inputs: &[FormMatrix<C64>],
    k: usize,
    order: usize,
) -> Result<FormPoly<C64>> {
    if inputs.len() != 2 * k + 1 {
        return Err(Error::InvalidInput(format!(
            "need 2k+1 = {} inputs, got {}",
            2 * k + 1,
            inputs.len()
        )));
    }
    let f = b.curvature().full;
    let flat_f = f.flatten()?;
    let b_total = b.total();
    let mut factors: Vec<Mat<C64>> = Vec::with_capacity(2 * k + 1);
    factors.push(inputs[0].flatten()?);
    for x in &inputs[1..] {
        let t_j = x.exterior_d().add(&b_total.super_commutator(x));
        factors.push(t_j.flatten()?);
    }
    let phi_m = FormMatrix::from_matrix(phi.clone(), b.d0.y_dim, b.d0.grading.clone());
    let flat_phi = phi_m.flatten()?;
    let n = flat_f.rows;
    let heat = |tau: f64| flat_f.scale(&C64::new(-tau * t, 0.0)).expm().unwrap();
    let integrand = |s: &[f64]| -> Mat<C64> {
        let mut gaps = Vec::with_capacity(2 * k + 1);
        if k == 0 {
            gaps.push(1.0);
        } else {
            gaps.push(s[0]);
            for j in 1..2 * k {
                gaps.push(s[j] - s[j - 1]);
            }
            gaps.push(1.0 - s[2 * k - 1]);
        }
        let mut acc = &flat_phi * &factors[0];
        for (j, gap) in gaps.iter().enumerate() {
            acc = &acc * &heat(*gap);
            if j + 1 < factors.len() {
                acc = &acc * &factors[j + 1];
            }
        }
        acc
    };
    let total = simplex_quadrature(
        2 * k,
        order,
        integrand,
        |a, b| &a + &b,
        |a, w| a.scale(&C64::new(w, 0.0)),
        Mat::<C64>::zeros(n, n),
    );
    let unflat = FormMatrix::unflatten(&total, b.d0.dim, b.d0.y_dim, b.d0.grading.clone());
    let str_form = unflat.supertrace()?;
    let inv_sqrt = C64::new(1.0 / t.sqrt(), 0.0);
    let mut out = FormPoly::zero(str_form.y_dim);
    let tk = C64::new(t.powi(k as i32), 0.0);
    for ((m, g), v) in &str_form.terms {
        out.insert_add((*m, g.clone()), *v * inv_sqrt.powu(mask_degree(*m)) * tk);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Grassmann dual numbers
// ---------------------------------------------------------------------------

/// Matrix over the dual extension by a central nilpotent z (z^2 = 0).
#[derive(Clone, Debug)]
pub struct DualMat {
    pub body: Mat<C64>,
    pub soul: Mat<C64>,
}

impl DualMat {
    pub fn new(body: Mat<C64>, soul: Mat<C64>) -> Self {
        DualMat { body, soul }
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        DualMat {
            body: &self.body * &rhs.body,
            soul: &(&self.body * &rhs.soul) + &(&self.soul * &rhs.body),
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        DualMat {
            body: &self.body + &rhs.body,
            soul: &self.soul + &rhs.soul,
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        DualMat {
            body: self.body.scale(&s),
            soul: self.soul.scale(&s),
        }
    }

    /// exp by scaling and squaring in dual arithmetic.
    pub fn expm(&self) -> Result<Self> {
        let n = self.body.rows;
        let norm = (self.body.max_abs() + self.soul.max_abs()) * n as f64;
        let mut squarings = 0u32;
        let mut scale = 1.0;
        while norm * scale > 0.5 {
            scale *= 0.5;
            squarings += 1;
            if squarings > 64 {
                return Err(Error::Numeric("dual expm scaling overflow".into()));
            }
        }
        let a = self.scale(C64::new(scale, 0.0));
        let mut term = DualMat::new(Mat::identity(n), Mat::zeros(n, n));
        let mut sum = term.clone();
        for k in 1..=24 {
            term = term.mul(&a);
            term = term.scale(C64::new(1.0 / k as f64, 0.0));
            sum = sum.add(&term);
            if term.body.max_abs() + term.soul.max_abs() < 1e-18 {
                break;
            }
        }
        let mut acc = sum;
        for _ in 0..squarings {
            acc = acc.mul(&acc);
        }
        Ok(acc)
    }
}

/// Evaluates both sides of exp(-t(D^2 - z D)) = exp(-tD^2) + z t D exp(-tD^2)
/// in dual-number arithmetic (z central, z^2 = 0) and reports the maximum
/// entrywise deviation of the z-components.
pub fn grassmann_exp_identity(d: &Mat<C64>, t: f64) -> Result<f64> {
    let d2 = d * d;
    let lhs = DualMat::new(
        d2.scale(&C64::new(-t, 0.0)),
        d.scale(&C64::new(t, 0.0)),
    )
    .expm()?;
    let e = d2.scale(&C64::new(-t, 0.0)).expm()?;
    let rhs_soul = (d * &e).scale(&C64::new(t, 0.0));
    let body_dev = lhs.body.sub(&e);
    let soul_dev = lhs.soul.sub(&rhs_soul);
    Ok(body_dev.max_abs().max(soul_dev.max_abs()))
}

// ---------------------------------------------------------------------------
// Eta-form integrands
// ---------------------------------------------------------------------------

/// Tr^even[phi (dB_t/dt) e^{-B_t^2}]: the integrand of the eta form in its
/// superconnection definition, with the exact t-derivative of B_t.
pub fn eta_form_integrand(
    b: &Superconnection<C64>,
    t: f64,
    phi: &Mat<C64>,
) -> Result<FormPoly<C64>> {
    let sqrt_t = C64::new(t.sqrt(), 0.0);
    let b_t = b.rescaled(&sqrt_t);
    let db_dt = b.rescaled_derivative(&sqrt_t);
    let f_t = b_t.mul(&b_t);
    let heat = f_t.heat_exp(1.0)?; // e^{-B_t^2} (t already inside B_t)
    let phi_m = FormMatrix::from_matrix(phi.clone(), b.d0.y_dim, b.d0.grading.clone());
    Ok(phi_m.mul(&db_dt).mul(&heat).trace_even())
}

/// (1/(2 sqrt t)) Tr^even[psi_t phi (D + c_t4) e^{-tF}]: the rewritten
/// integrand with the optional torsion-type odd perturbation supplied by the
/// caller.
pub fn eta_form_integrand_rewritten(
    b: &Superconnection<C64>,
    t: f64,
    phi: &Mat<C64>,
    c_t4: Option<&FormMatrix<C64>>,
) -> Result<FormPoly<C64>> {
    let f = b.curvature().full;
    let heat = f.heat_exp(t)?;
    let mut front = b.d0.clone();
    if let Some(extra) = c_t4 {
        front = front.add(extra);
    }
    let phi_m = FormMatrix::from_matrix(phi.clone(), b.d0.y_dim, b.d0.grading.clone());
    let inside = phi_m.mul(&front).mul(&heat);
    let inv_sqrt = C64::new(1.0 / t.sqrt(), 0.0);
    let rescaled = inside.psi_rescale(&inv_sqrt);
    let pref = C64::new(1.0 / (2.0 * t.sqrt()), 0.0);
    Ok(rescaled.trace_even().scale(&pref))
}
