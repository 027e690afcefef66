use super::{Exp, TruncSeries};
use crate::error::{Error, Result};

/// `x^shift.0 * y^shift.1 * body` with possibly negative shifts.
///
/// Used to invert monomial relations such as `u1 = u^d * v^(-c)` where the
/// factors are monomials times units.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShiftedSeries {
    pub shift: (i64, i64),
    pub body: TruncSeries,
}

impl ShiftedSeries {
    /// Pulls the common monomial factor of `s` into the shift.
    pub fn from_series(s: &TruncSeries) -> Result<Self> {
        if s.is_zero() {
            return Err(Error::Indeterminate("cannot factor a series that vanishes to its precision".into()));
        }
        let a = s.terms().keys().map(|e| e.0).min().unwrap();
        let b = s.terms().keys().map(|e| e.1).min().unwrap();
        Ok(ShiftedSeries { shift: (a as i64, b as i64), body: s.div_monomial((a, b))? })
    }

    pub fn is_unit_body(&self) -> bool {
        self.body.constant_term() != 0
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        Ok(ShiftedSeries {
            shift: (self.shift.0 + other.shift.0, self.shift.1 + other.shift.1),
            body: self.body.mul(&other.body)?,
        })
    }

    /// Integer power; negative exponents need a unit body.
    pub fn pow(&self, k: i64) -> Result<Self> {
        self.pow_capped(k, u64::MAX)
    }

    pub fn pow_capped(&self, k: i64, cap: u64) -> Result<Self> {
        let base = if k < 0 {
            if !self.is_unit_body() {
                return Err(Error::NotAUnit);
            }
            self.body.truncate(cap).invert_unit()?
        } else {
            self.body.truncate(cap)
        };
        Ok(ShiftedSeries {
            shift: (self.shift.0 * k, self.shift.1 * k),
            body: base.pow_capped(k.unsigned_abs(), cap)?,
        })
    }

    /// Back to an ordinary series; fails on a negative shift.
    pub fn into_series(self) -> Result<TruncSeries> {
        if self.shift.0 < 0 || self.shift.1 < 0 {
            return Err(Error::InvalidFrame(format!("negative monomial shift {:?}", self.shift)));
        }
        let e: Exp = (self.shift.0 as u32, self.shift.1 as u32);
        Ok(self.body.mul_monomial(e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Field;
    use crate::series::vars;

    #[test]
    fn monomial_cramer_inversion() {
        let k = Field::prime(3).unwrap();
        let xy = vars("x", "y");
        // u = x^2 (1 + y), v = x^3 (2 + x)
        let u = TruncSeries::from_ints(&k, &xy, &[((2, 0), 1), ((2, 1), 1)], 20).unwrap();
        let v = TruncSeries::from_ints(&k, &xy, &[((3, 0), 2), ((4, 0), 1)], 20).unwrap();
        let su = ShiftedSeries::from_series(&u).unwrap();
        let sv = ShiftedSeries::from_series(&v).unwrap();
        assert_eq!(su.shift, (2, 0));
        // u^-3 v^2 has zero x-shift
        let w = su.pow(-3).unwrap().mul(&sv.pow(2).unwrap()).unwrap();
        assert_eq!(w.shift, (0, 0));
        assert!(w.is_unit_body());
        // (u^-3 v^2) * u^3 = v^2
        let back = w.mul(&su.pow(3).unwrap()).unwrap().into_series().unwrap();
        let v2 = v.mul(&v).unwrap();
        let p = back.prec().min(v2.prec());
        assert_eq!(back.truncate(p), v2.truncate(p));
    }

    #[test]
    fn negative_power_needs_unit() {
        let k = Field::prime(2).unwrap();
        let xy = vars("x", "y");
        let s = TruncSeries::from_ints(&k, &xy, &[((1, 0), 1), ((0, 1), 1)], 5).unwrap();
        let sh = ShiftedSeries::from_series(&s).unwrap();
        assert_eq!(sh.pow(-1), Err(Error::NotAUnit));
    }
}
