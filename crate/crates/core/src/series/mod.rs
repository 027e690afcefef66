//! Truncated bivariate power series over a finite field.
//!
//! A [`TruncSeries`] stores the coefficients of all monomials `x^a y^b` whose
//! weighted degree `wx*a + wy*b` is at most `prec`; everything above is
//! unknown. The default weights `(1, 1)` give ordinary total-degree
//! truncation. Every operation computes the precision of its result from the
//! precisions of its inputs and never invents coefficients it cannot know.

mod format;
mod shifted;

pub use format::SeriesJson;
pub use shifted::ShiftedSeries;

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{Field, FieldElem};

pub type Exp = (u32, u32);

/// Grading used for truncation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Weights {
    pub x: u32,
    pub y: u32,
}

impl Default for Weights {
    fn default() -> Self {
        Weights { x: 1, y: 1 }
    }
}

impl Weights {
    pub fn new(x: u32, y: u32) -> Self {
        assert!(x > 0 && y > 0, "weights must be positive");
        Weights { x, y }
    }
    #[inline]
    pub fn of(&self, (a, b): Exp) -> u64 {
        self.x as u64 * a as u64 + self.y as u64 * b as u64
    }
}

/// Which of the two variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
}

#[derive(Clone, PartialEq, Eq)]
pub struct TruncSeries {
    field: Arc<Field>,
    vars: Arc<[String; 2]>,
    weights: Weights,
    prec: u64,
    terms: BTreeMap<Exp, u32>,
}

impl std::fmt::Debug for TruncSeries {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.to_text())
    }
}

pub fn vars(x: &str, y: &str) -> Arc<[String; 2]> {
    Arc::new([x.to_string(), y.to_string()])
}

impl TruncSeries {
    /// Builds a series from explicit terms, dropping zeros and everything above `prec`.
    pub fn make(
        field: &Arc<Field>,
        vars: &Arc<[String; 2]>,
        terms: impl IntoIterator<Item = (Exp, u32)>,
        prec: u64,
    ) -> Result<Self> {
        Self::make_weighted(field, vars, Weights::default(), terms, prec)
    }

    pub fn make_weighted(
        field: &Arc<Field>,
        vars: &Arc<[String; 2]>,
        weights: Weights,
        terms: impl IntoIterator<Item = (Exp, u32)>,
        prec: u64,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (e, c) in terms {
            if c >= field.order() {
                return Err(Error::InvalidField(format!("coefficient {c} outside F_{}", field.name())));
            }
            if map.insert(e, c).is_some() {
                return Err(Error::DuplicateExponent(e.0, e.1));
            }
        }
        map.retain(|&e, c| *c != 0 && weights.of(e) <= prec);
        Ok(TruncSeries { field: field.clone(), vars: vars.clone(), weights, prec, terms: map })
    }

    /// Same as [`make`](Self::make) but with integer coefficients reduced mod p.
    pub fn from_ints(
        field: &Arc<Field>,
        vars: &Arc<[String; 2]>,
        terms: &[(Exp, i64)],
        prec: u64,
    ) -> Result<Self> {
        Self::make(field, vars, terms.iter().map(|&(e, c)| (e, field.from_int(c))), prec)
    }

    pub fn zero_like(&self, prec: u64) -> Self {
        TruncSeries { field: self.field.clone(), vars: self.vars.clone(), weights: self.weights, prec, terms: BTreeMap::new() }
    }

    pub fn zero(field: &Arc<Field>, vars: &Arc<[String; 2]>, weights: Weights, prec: u64) -> Self {
        TruncSeries { field: field.clone(), vars: vars.clone(), weights, prec, terms: BTreeMap::new() }
    }

    pub fn constant(field: &Arc<Field>, vars: &Arc<[String; 2]>, weights: Weights, c: u32, prec: u64) -> Self {
        Self::monomial(field, vars, weights, (0, 0), c, prec)
    }

    pub fn monomial(field: &Arc<Field>, vars: &Arc<[String; 2]>, weights: Weights, e: Exp, c: u32, prec: u64) -> Self {
        let mut s = Self::zero(field, vars, weights, prec);
        if c != 0 && weights.of(e) <= prec {
            s.terms.insert(e, c);
        }
        s
    }

    /// `c * x^e.0 * y^e.1` in the same ring as `self`.
    pub fn monomial_like(&self, e: Exp, c: u32, prec: u64) -> Self {
        Self::monomial(&self.field, &self.vars, self.weights, e, c, prec)
    }

    pub fn field(&self) -> &Arc<Field> {
        &self.field
    }
    pub fn vars(&self) -> &Arc<[String; 2]> {
        &self.vars
    }
    pub fn weights(&self) -> Weights {
        self.weights
    }
    pub fn prec(&self) -> u64 {
        self.prec
    }
    pub fn terms(&self) -> &BTreeMap<Exp, u32> {
        &self.terms
    }
    /// Number of stored terms.
    pub fn len(&self) -> usize {
        self.terms.len()
    }
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
    pub fn coeff(&self, e: Exp) -> u32 {
        self.terms.get(&e).copied().unwrap_or(0)
    }
    pub fn coeff_elem(&self, e: Exp) -> FieldElem {
        FieldElem { field: self.field.clone(), value: self.coeff(e) }
    }
    pub fn constant_term(&self) -> u32 {
        self.coeff((0, 0))
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.field != other.field {
            return Err(Error::FieldMismatch(self.field.name(), other.field.name()));
        }
        if self.vars != other.vars {
            return Err(Error::VariableMismatch((*self.vars).clone(), (*other.vars).clone()));
        }
        if self.weights != other.weights {
            return Err(Error::InvalidFrame(format!(
                "weight mismatch {:?} vs {:?}",
                self.weights, other.weights
            )));
        }
        Ok(())
    }

    /// Weighted order: least weighted degree of a stored term, `None` for zero.
    pub fn weighted_order(&self) -> Option<u64> {
        self.terms.keys().map(|&e| self.weights.of(e)).min()
    }

    /// Weighted order, with the zero series counted as "beyond precision".
    fn order_bound(&self) -> u64 {
        self.weighted_order().unwrap_or(self.prec + 1)
    }

    /// Minimum total degree of a stored term.
    pub fn order(&self) -> Result<u32> {
        self.terms
            .keys()
            .map(|&(a, b)| a + b)
            .min()
            .ok_or_else(|| Error::Indeterminate("order of a series that vanishes to its precision".into()))
    }

    /// Least exponent of `x` over stored terms and whether `x^c` itself occurs,
    /// i.e. whether the series is `x^c` times a unit up to precision.
    pub fn x_ideal_exponent(&self) -> Result<(u32, bool)> {
        let c = self
            .terms
            .keys()
            .map(|&(a, _)| a)
            .min()
            .ok_or_else(|| Error::Indeterminate("x-exponent of a series that vanishes to its precision".into()))?;
        Ok((c, self.terms.contains_key(&(c, 0))))
    }

    /// Lowers the precision bound, dropping terms above it.
    pub fn truncate(&self, prec: u64) -> Self {
        let prec = prec.min(self.prec);
        let w = self.weights;
        TruncSeries {
            field: self.field.clone(),
            vars: self.vars.clone(),
            weights: w,
            prec,
            terms: self.terms.iter().filter(|(&e, _)| w.of(e) <= prec).map(|(&e, &c)| (e, c)).collect(),
        }
    }

    /// Re-grades the series; the new bound is the largest one whose region is
    /// contained in the known region of the old grading.
    pub fn reweight(&self, weights: Weights) -> Self {
        let old = self.weights;
        // region {x'a + y'b <= N'} inside {xa + yb <= N}  <=>  N' * max(x/x', y/y') <= N
        let lhs_x = old.x as u128 * weights.y as u128;
        let lhs_y = old.y as u128 * weights.x as u128;
        // compare x/x' vs y/y' using cross multiplication
        let (num, den) = if lhs_x >= lhs_y { (old.x, weights.x) } else { (old.y, weights.y) };
        let prec = (self.prec as u128 * den as u128 / num as u128) as u64;
        TruncSeries {
            field: self.field.clone(),
            vars: self.vars.clone(),
            weights,
            prec,
            terms: self.terms.iter().filter(|(&e, _)| weights.of(e) <= prec).map(|(&e, &c)| (e, c)).collect(),
        }
    }

    pub fn rename(&self, vars: &Arc<[String; 2]>) -> Self {
        let mut s = self.clone();
        s.vars = vars.clone();
        s
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let prec = self.prec.min(other.prec);
        let mut out = self.truncate(prec);
        let f = &self.field;
        for (&e, &c) in &other.terms {
            if self.weights.of(e) > prec {
                continue;
            }
            let s = f.add(out.coeff(e), c);
            if s == 0 {
                out.terms.remove(&e);
            } else {
                out.terms.insert(e, s);
            }
        }
        Ok(out)
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = self.field.neg(*c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: u32) -> Self {
        if c == 0 {
            return self.zero_like(self.prec);
        }
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            *v = self.field.mul(*v, c);
        }
        out
    }

    /// Multiplies by the monomial `x^e.0 y^e.1`.
    pub fn mul_monomial(&self, e: Exp) -> Self {
        let shift = self.weights.of(e);
        TruncSeries {
            field: self.field.clone(),
            vars: self.vars.clone(),
            weights: self.weights,
            prec: self.prec + shift,
            terms: self.terms.iter().map(|(&(a, b), &c)| ((a + e.0, b + e.1), c)).collect(),
        }
    }

    /// Divides by `x^e.0 y^e.1`; every stored term must be divisible.
    pub fn div_monomial(&self, e: Exp) -> Result<Self> {
        let shift = self.weights.of(e);
        if shift > self.prec {
            return Err(Error::precision(shift as i64, self.prec as i64));
        }
        let mut terms = BTreeMap::new();
        for (&(a, b), &c) in &self.terms {
            if a < e.0 || b < e.1 {
                return Err(Error::InvalidFrame(format!("x^{a} y^{b} is not divisible by x^{} y^{}", e.0, e.1)));
            }
            terms.insert((a - e.0, b - e.1), c);
        }
        Ok(TruncSeries { field: self.field.clone(), vars: self.vars.clone(), weights: self.weights, prec: self.prec - shift, terms })
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.mul_capped(other, u64::MAX)
    }

    /// Product truncated to at most `cap`. The natural precision of a product
    /// is `min(prec_f + ord g, prec_g + ord f)`.
    pub fn mul_capped(&self, other: &Self, cap: u64) -> Result<Self> {
        self.check_compatible(other)?;
        let prec = (self.prec + other.order_bound()).min(other.prec + self.order_bound()).min(cap);
        Ok(self.mul_raw(other, prec))
    }

    fn mul_raw(&self, other: &Self, prec: u64) -> Self {
        let w = self.weights;
        let f = &self.field;
        let mut lhs: Vec<(u64, Exp, u32)> = self.terms.iter().map(|(&e, &c)| (w.of(e), e, c)).collect();
        let mut rhs: Vec<(u64, Exp, u32)> = other.terms.iter().map(|(&e, &c)| (w.of(e), e, c)).collect();
        lhs.sort_unstable_by_key(|t| t.0);
        rhs.sort_unstable_by_key(|t| t.0);
        let mut acc: HashMap<Exp, u32> = HashMap::with_capacity(lhs.len().max(rhs.len()) * 2);
        let p = f.p() as u64;
        let prime = f.n() == 1;
        for &(wa, (a1, b1), ca) in &lhs {
            if wa > prec {
                break;
            }
            for &(wb, (a2, b2), cb) in &rhs {
                if wa + wb > prec {
                    break;
                }
                let slot = acc.entry((a1 + a2, b1 + b2)).or_insert(0);
                *slot = if prime { ((*slot as u64 + ca as u64 * cb as u64) % p) as u32 } else { f.add(*slot, f.mul(ca, cb)) };
            }
        }
        TruncSeries {
            field: self.field.clone(),
            vars: self.vars.clone(),
            weights: w,
            prec,
            terms: acc.into_iter().filter(|&(_, c)| c != 0).collect(),
        }
    }

    pub fn pow(&self, e: u64) -> Result<Self> {
        self.pow_capped(e, u64::MAX)
    }

    /// Binary exponentiation, truncating after each multiplication.
    pub fn pow_capped(&self, mut e: u64, cap: u64) -> Result<Self> {
        let cap = cap.min(self.natural_pow_prec(e));
        let mut acc = self.monomial_like((0, 0), 1, cap);
        let mut base = self.truncate(cap);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul_capped(&base, cap)?;
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_capped(&base, cap)?;
            }
        }
        Ok(acc)
    }

    fn natural_pow_prec(&self, e: u64) -> u64 {
        if e == 0 {
            return u64::MAX;
        }
        // f^e = (lead + err)^e: error term has order >= prec + (e-1) ord f
        self.prec.saturating_add((e - 1).saturating_mul(self.order_bound()))
    }

    /// Formal partial derivative. Precision drops by the weight of the variable.
    pub fn partial(&self, var: Var) -> Result<Self> {
        let w = match var {
            Var::X => self.weights.x,
            Var::Y => self.weights.y,
        } as u64;
        if self.prec < w {
            return Err(Error::precision(w as i64, self.prec as i64));
        }
        let f = &self.field;
        let mut terms = BTreeMap::new();
        for (&(a, b), &c) in &self.terms {
            let (k, e) = match var {
                Var::X if a > 0 => (a, (a - 1, b)),
                Var::Y if b > 0 => (b, (a, b - 1)),
                _ => continue,
            };
            let v = f.mul(c, f.from_int(k as i64));
            if v != 0 {
                terms.insert(e, v);
            }
        }
        Ok(TruncSeries { field: f.clone(), vars: self.vars.clone(), weights: self.weights, prec: self.prec - w, terms })
    }

    /// Partial derivative with respect to a variable given by name.
    pub fn partial_by_name(&self, name: &str) -> Result<Self> {
        if self.vars[0] == name {
            self.partial(Var::X)
        } else if self.vars[1] == name {
            self.partial(Var::Y)
        } else {
            Err(Error::UnknownVariable(name.to_string()))
        }
    }

    /// Inverse of a series with nonzero constant term, by Newton iteration.
    pub fn invert_unit(&self) -> Result<Self> {
        let c0 = self.constant_term();
        let c0_inv = self.field.inv(c0).ok_or(Error::NotAUnit)?;
        let prec = self.prec;
        let mut inv = self.monomial_like((0, 0), c0_inv, prec);
        let rest = self.sub(&self.monomial_like((0, 0), c0, prec))?;
        let step = rest.weighted_order().unwrap_or(prec + 1);
        // inv is exact below weight `known`
        let mut known = step;
        let one = self.monomial_like((0, 0), 1, prec);
        while known <= prec {
            let target = (2 * known).min(prec + 1).saturating_sub(1).min(prec);
            let fs = self.truncate(target).mul_capped(&inv, target)?;
            let err = one.truncate(target).sub(&fs)?;
            inv = inv.add(&inv.mul_capped(&err, target)?.with_prec(target))?.with_prec(prec);
            known *= 2;
        }
        Ok(inv.truncate(prec).with_prec(prec))
    }

    /// Sets the precision without touching the terms (caller guarantees validity).
    pub(crate) fn with_prec(mut self, prec: u64) -> Self {
        self.prec = prec;
        let w = self.weights;
        self.terms.retain(|&e, _| w.of(e) <= prec);
        self
    }

    /// Composition `f(g, h)`. The result lives in the ring of `g` and `h`.
    pub fn substitute(&self, g: &Self, h: &Self) -> Result<Self> {
        self.substitute_capped(g, h, u64::MAX)
    }

    /// Composition truncated to at most `cap`.
    ///
    /// An unknown term of `f` has weighted degree above `prec_f`; its image has
    /// order above `prec_f * min(ord g / wx, ord h / wy)`, which bounds the
    /// precision together with the precisions of `g` and `h`.
    pub fn substitute_capped(&self, g: &Self, h: &Self, cap: u64) -> Result<Self> {
        g.check_compatible(h)?;
        if self.field != g.field {
            return Err(Error::FieldMismatch(self.field.name(), g.field.name()));
        }
        if g.constant_term() != 0 || h.constant_term() != 0 {
            return Err(Error::NotLocal);
        }
        let og = g.order_bound();
        let oh = h.order_bound();
        let w = self.weights;
        // floor(prec_f * min(og/wx, oh/wy)) computed exactly
        let rho_x = self.prec as u128 * og as u128 / w.x as u128;
        let rho_y = self.prec as u128 * oh as u128 / w.y as u128;
        let propagated = rho_x.min(rho_y).min(u64::MAX as u128) as u64;
        let mut prec = propagated.min(cap);
        let uses_x = self.terms.keys().any(|&(a, _)| a > 0) || self.prec >= w.x as u64;
        let uses_y = self.terms.keys().any(|&(_, b)| b > 0) || self.prec >= w.y as u64;
        if uses_x {
            prec = prec.min(g.prec);
        }
        if uses_y {
            prec = prec.min(h.prec);
        }

        let mut by_x: BTreeMap<u32, Vec<(u32, u32)>> = BTreeMap::new();
        for (&(a, b), &c) in &self.terms {
            if a as u64 * og + b as u64 * oh <= prec {
                by_x.entry(a).or_default().push((b, c));
            }
        }
        let mut h_pows: Vec<Self> = vec![g.monomial_like((0, 0), 1, prec)];
        let mut g_pow = g.monomial_like((0, 0), 1, prec);
        let mut g_exp = 0u32;
        let g_t = g.truncate(prec);
        let h_t = h.truncate(prec);
        let mut out = g.zero_like(prec);
        for (a, row) in by_x {
            while g_exp < a {
                g_pow = g_pow.mul_capped(&g_t, prec)?;
                g_exp += 1;
            }
            let inner_cap = prec.saturating_sub(a as u64 * og);
            let mut inner = g.zero_like(inner_cap);
            for (b, c) in row {
                while h_pows.len() <= b as usize {
                    let next = h_pows.last().unwrap().mul_capped(&h_t, prec)?;
                    h_pows.push(next);
                }
                inner = inner.add(&h_pows[b as usize].truncate(inner_cap).scale(c).with_prec_at_least(inner_cap))?;
            }
            out = out.add(&g_pow.mul_capped(&inner, prec)?.with_prec_at_least(prec))?;
        }
        Ok(out.with_prec(prec))
    }

    fn with_prec_at_least(mut self, prec: u64) -> Self {
        if self.prec < prec {
            self.prec = prec;
        }
        self
    }

    /// Terms involving only `x`, as `(exponent, coefficient)`.
    pub fn pure_x_part(&self) -> Vec<(u32, u32)> {
        self.terms.iter().filter(|(&(_, b), _)| b == 0).map(|(&(a, _), &c)| (a, c)).collect()
    }

    /// Coefficient slice at fixed `x`-exponent, as a map `b -> coeff`.
    pub fn x_slice(&self, a: u32) -> BTreeMap<u32, u32> {
        self.terms.range((a, 0)..=(a, u32::MAX)).map(|(&(_, b), &c)| (b, c)).collect()
    }

    /// Least `x`-exponent among stored terms.
    pub fn x_order(&self) -> Option<u32> {
        self.terms.keys().map(|&(a, _)| a).min()
    }

    /// Evaluates the univariate polynomial `sum c_i t^i` at this series.
    pub fn compose_univariate(&self, poly: &[(u32, u32)], cap: u64) -> Result<Self> {
        let mut out = self.zero_like(cap.min(self.prec));
        for &(i, c) in poly {
            let t = self.pow_capped(i as u64, cap)?.scale(c);
            out = out.add(&t.with_prec_at_least(out.prec))?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(p: u32) -> Arc<Field> {
        Field::prime(p).unwrap()
    }
    fn xy() -> Arc<[String; 2]> {
        vars("x", "y")
    }

    #[test]
    fn make_series_examples() {
        let k = f(5);
        let z = TruncSeries::make(&k, &xy(), [], 5).unwrap();
        assert!(z.is_zero());
        let s = TruncSeries::make(&k, &xy(), [((0, 0), 1), ((1, 0), 1)], 1).unwrap();
        assert_eq!(s.to_text(), "1 + 1 * x + O(1)");
        let d = TruncSeries::make(&k, &xy(), [((3, 3), 2)], 5).unwrap();
        assert!(d.is_zero());
        let dup = TruncSeries::make(&k, &xy(), [((1, 1), 2), ((1, 1), 3)], 5);
        assert_eq!(dup, Err(Error::DuplicateExponent(1, 1)));
    }

    #[test]
    fn ring_examples() {
        let k = f(5);
        let a = TruncSeries::from_ints(&k, &xy(), &[((0, 0), 1), ((1, 0), 1)], 6).unwrap();
        let b = TruncSeries::from_ints(&k, &xy(), &[((0, 0), 1), ((1, 0), -1)], 6).unwrap();
        let prod = a.mul(&b).unwrap();
        assert_eq!(prod, TruncSeries::from_ints(&k, &xy(), &[((0, 0), 1), ((2, 0), -1)], 6).unwrap());

        let k2 = f(2);
        let c = TruncSeries::from_ints(&k2, &xy(), &[((0, 0), 1), ((1, 0), 1)], 6).unwrap();
        assert_eq!(c.mul(&c).unwrap(), TruncSeries::from_ints(&k2, &xy(), &[((0, 0), 1), ((2, 0), 1)], 6).unwrap());

        let s = TruncSeries::from_ints(&k, &xy(), &[((0, 1), 1), ((2, 0), 1)], 6).unwrap();
        let t = TruncSeries::from_ints(&k, &xy(), &[((0, 1), -1)], 4).unwrap();
        let sum = s.add(&t).unwrap();
        assert_eq!(sum.terms().len(), 1);
        assert_eq!(sum.coeff((2, 0)), 1);
        assert_eq!(sum.prec(), 4);
    }

    #[test]
    fn mismatched_variables_are_rejected() {
        let k = f(3);
        let s = TruncSeries::from_ints(&k, &xy(), &[((1, 0), 1)], 4).unwrap();
        let t = TruncSeries::from_ints(&k, &vars("u", "v"), &[((1, 0), 1)], 4).unwrap();
        assert!(matches!(s.add(&t), Err(Error::VariableMismatch(..))));
        assert!(matches!(s.mul(&t), Err(Error::VariableMismatch(..))));
    }

    #[test]
    fn partial_examples() {
        let k = f(3);
        let s = TruncSeries::from_ints(&k, &xy(), &[((0, 3), 1), ((2, 1), -1)], 10).unwrap();
        let d = s.partial(Var::Y).unwrap();
        assert_eq!(d, TruncSeries::from_ints(&k, &xy(), &[((2, 0), -1)], 9).unwrap());
        let y = TruncSeries::from_ints(&k, &xy(), &[((0, 1), 1)], 10).unwrap();
        assert!(y.partial(Var::X).unwrap().is_zero());
        let xp = TruncSeries::from_ints(&k, &xy(), &[((3, 0), 1)], 10).unwrap();
        assert!(xp.partial(Var::X).unwrap().is_zero());
        assert_eq!(s.partial_by_name("z"), Err(Error::UnknownVariable("z".into())));
    }

    #[test]
    fn invert_unit_examples() {
        let k = f(2);
        let s = TruncSeries::from_ints(&k, &xy(), &[((0, 0), 1), ((1, 0), 1)], 3).unwrap();
        let inv = s.invert_unit().unwrap();
        assert_eq!(inv, TruncSeries::from_ints(&k, &xy(), &[((0, 0), 1), ((1, 0), 1), ((2, 0), 1), ((3, 0), 1)], 3).unwrap());
        let k5 = f(5);
        let two = TruncSeries::from_ints(&k5, &xy(), &[((0, 0), 2)], 4).unwrap();
        assert_eq!(two.invert_unit().unwrap().constant_term(), 3);
        let x = TruncSeries::from_ints(&k5, &xy(), &[((1, 0), 1)], 4).unwrap();
        assert_eq!(x.invert_unit(), Err(Error::NotAUnit));
    }

    #[test]
    fn substitute_examples() {
        let k = f(3);
        let x1 = vars("x1", "y1");
        let fx = TruncSeries::from_ints(&k, &xy(), &[((1, 0), 1)], 10).unwrap();
        let g = TruncSeries::from_ints(&k, &x1, &[((2, 0), 1), ((2, 1), 1)], 10).unwrap();
        let h = TruncSeries::from_ints(&k, &x1, &[((0, 1), 1)], 10).unwrap();
        let r = fx.substitute(&g, &h).unwrap();
        assert_eq!(r.coeff((2, 0)), 1);
        assert_eq!(r.coeff((2, 1)), 1);
        assert_eq!(r.len(), 2);

        let v = TruncSeries::from_ints(&k, &xy(), &[((0, 3), 1), ((2, 1), -1)], 10).unwrap();
        let g = TruncSeries::from_ints(&k, &x1, &[((3, 0), 1)], 40).unwrap();
        let h = TruncSeries::from_ints(&k, &x1, &[((2, 0), 1)], 40).unwrap();
        let r = v.substitute(&g, &h).unwrap();
        // propagated precision min(10*3, 10*2) = 20
        assert_eq!(r.prec(), 20);
        assert_eq!(r, TruncSeries::from_ints(&k, &x1, &[((6, 0), 1), ((8, 0), -1)], 20).unwrap());

        let bad = TruncSeries::from_ints(&k, &x1, &[((0, 0), 1), ((1, 0), 1)], 10).unwrap();
        assert_eq!(fx.substitute(&bad, &h), Err(Error::NotLocal));
    }

    #[test]
    fn x_ideal_exponent_and_order() {
        let k = f(3);
        let s = TruncSeries::from_ints(&k, &xy(), &[((2, 0), -1)], 10).unwrap();
        assert_eq!(s.x_ideal_exponent().unwrap(), (2, true));
        let t = TruncSeries::from_ints(&k, &xy(), &[((2, 1), 1), ((3, 0), 1)], 10).unwrap();
        assert_eq!(t.x_ideal_exponent().unwrap(), (2, false));
        let u = TruncSeries::from_ints(&k, &xy(), &[((0, 0), 1), ((1, 1), 1)], 10).unwrap();
        assert_eq!(u.x_ideal_exponent().unwrap(), (0, true));
        assert!(matches!(s.zero_like(3).x_ideal_exponent(), Err(Error::Indeterminate(_))));

        assert_eq!(TruncSeries::from_ints(&k, &xy(), &[((2, 1), 1)], 10).unwrap().order().unwrap(), 3);
        assert_eq!(TruncSeries::from_ints(&k, &xy(), &[((0, 0), 1), ((1, 0), 1)], 10).unwrap().order().unwrap(), 0);
        assert_eq!(TruncSeries::from_ints(&k, &xy(), &[((5, 0), 1), ((0, 7), 1)], 10).unwrap().order().unwrap(), 5);
        assert!(s.zero_like(3).order().is_err());
    }

    #[test]
    fn weighted_truncation_and_reweight() {
        let k = f(2);
        let w = Weights::new(1, 5);
        let s = TruncSeries::make_weighted(&k, &xy(), w, [((12, 0), 1), ((3, 1), 1), ((0, 3), 1)], 12).unwrap();
        assert_eq!(s.len(), 2); // y^3 has weight 15 > 12
        let r = s.reweight(Weights::default());
        // {a + b <= N'} inside {a + 5b <= 12}: N' = 12 / 5 = 2
        assert_eq!(r.prec(), 2);
        assert!(r.is_zero());
    }
}
