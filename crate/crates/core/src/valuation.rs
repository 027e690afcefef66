//! Exact-rational bookkeeping of the valuation along a quadratic-transform
//! sequence, cut values and the distance verdict.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// `n/d` in lowest terms, `n` alone when `d = 1`.
pub fn rat_string(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn parse_rat(s: &str) -> Result<BigRational> {
    let bad = || Error::Parse(format!("rational `{s}`"));
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            Ok(BigRational::new(n, d))
        }
        None => Ok(BigRational::from_integer(s.trim().parse().map_err(|_| bad())?)),
    }
}

/// Values along one transform sequence, normalized by `ω(x_0) = 1`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValueLedger {
    /// `M_i = m_1 ⋯ m_i`, starting with `M_0 = 1`.
    pub cum: Vec<BigInt>,
    pub steps: Vec<u64>,
    /// `q_{i+1}` as recorded, used for the value of `y_i`.
    pub qs: Vec<u64>,
    /// `(c_i / M_i) / (p - 1)`
    pub jac_values: Vec<BigRational>,
    pub jac_exps: Vec<u64>,
    pub running_inf: Option<BigRational>,
}

impl ValueLedger {
    pub fn new() -> Self {
        ValueLedger { cum: vec![BigInt::one()], ..Default::default() }
    }

    pub fn depth(&self) -> usize {
        self.cum.len() - 1
    }

    /// Records a step with exponents `(m, q)`; `x_i = x_{i+1}^m ⋅ unit`.
    pub fn extend(&self, m: u64, q: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidStep("m must be positive".into()));
        }
        let mut out = self.clone();
        out.cum.push(self.cum.last().unwrap() * BigInt::from(m));
        out.steps.push(m);
        out.qs.push(q);
        Ok(out)
    }

    /// `ω(x_i) = 1 / M_i`.
    pub fn x_value(&self, level: usize) -> Result<BigRational> {
        let m = self.cum.get(level).ok_or(Error::LevelOutOfRange(level))?;
        Ok(BigRational::new(BigInt::one(), m.clone()))
    }

    /// `ω(y_i) = q_{i+1} / M_{i+1}`.
    pub fn y_value(&self, level: usize) -> Result<BigRational> {
        let q = self.qs.get(level).ok_or(Error::LevelOutOfRange(level))?;
        Ok(BigRational::new(BigInt::from(*q), self.cum[level + 1].clone()))
    }

    /// `a ω(x_i) + b ω(y_i)`, with the value of `y_i` supplied by the caller.
    pub fn monomial_value(&self, level: usize, (a, b): (u64, u64), y_value: &BigRational) -> Result<BigRational> {
        Ok(self.x_value(level)? * BigInt::from(a) + y_value * BigInt::from(b))
    }

    /// Monomial value with `ω(y_i)` taken from the step history.
    pub fn monomial_value_at(&self, level: usize, e: (u64, u64)) -> Result<BigRational> {
        let yv = if e.1 == 0 { BigRational::zero() } else { self.y_value(level)? };
        self.monomial_value(level, e, &yv)
    }

    /// Appends `(c_i / M_i) / (p - 1)` for the next unrecorded level.
    pub fn record_jacobian(&self, c: u64, p: u32) -> Result<Self> {
        let level = self.jac_values.len();
        let m = self.cum.get(level).ok_or(Error::LevelOutOfRange(level))?;
        let val = BigRational::new(BigInt::from(c), m * BigInt::from(p - 1));
        let mut out = self.clone();
        out.running_inf = Some(match &self.running_inf {
            Some(r) if *r <= val => r.clone(),
            _ => val.clone(),
        });
        out.jac_values.push(val);
        out.jac_exps.push(c);
        Ok(out)
    }

    /// One-sided: certifies a vanishing distance once the infimum drops below `2^-r`.
    pub fn distance_verdict(&self, r: u32) -> Verdict {
        let bound = BigRational::new(BigInt::one(), BigInt::from(2).pow(r));
        match &self.running_inf {
            Some(inf) if *inf < bound => {
                let level = self.jac_values.iter().position(|v| v == inf).unwrap();
                Verdict::Independent { level, value: inf.clone(), bound }
            }
            other => Verdict::Inconclusive { inf: other.clone() },
        }
    }

    /// `i, m_i, M_i, c_i, (c_i/M_i)/(p-1), running_inf` per recorded level.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,m_i,M_i,c_i,value,running_inf\n");
        let mut inf: Option<BigRational> = None;
        for (i, v) in self.jac_values.iter().enumerate() {
            inf = Some(match inf {
                Some(r) if r <= *v => r,
                _ => v.clone(),
            });
            let m_i = if i == 0 { "1".to_string() } else { self.steps[i - 1].to_string() };
            out.push_str(&format!(
                "{i},{m_i},{},{},{},{}\n",
                self.cum[i],
                self.jac_exps[i],
                rat_string(v),
                rat_string(inf.as_ref().unwrap())
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Independent { level: usize, value: BigRational, bound: BigRational },
    Inconclusive { inf: Option<BigRational> },
}

impl Verdict {
    pub fn is_independent(&self) -> bool {
        matches!(self, Verdict::Independent { .. })
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Independent { level, value, bound } => {
                write!(f, "independent (inf <= {} at level {level}, below {})", rat_string(value), rat_string(bound))
            }
            Verdict::Inconclusive { inf: Some(v) } => write!(f, "inconclusive (inf = {})", rat_string(v)),
            Verdict::Inconclusive { inf: None } => write!(f, "inconclusive (no data)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    Minus,
    Exact,
}

/// The cut `r⁻` (just below `r`) or `r⁺ = r`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CutValue {
    pub r: BigRational,
    pub side: Side,
}

impl CutValue {
    pub fn minus(r: BigRational) -> Self {
        CutValue { r, side: Side::Minus }
    }
    pub fn exact(r: BigRational) -> Self {
        CutValue { r, side: Side::Exact }
    }

    /// `-(r⁻) = (-r)⁺` and `-(r⁺) = (-r)⁻`.
    pub fn negate(&self) -> Self {
        let side = match self.side {
            Side::Minus => Side::Exact,
            Side::Exact => Side::Minus,
        };
        CutValue { r: -self.r.clone(), side }
    }

    pub fn scale(&self, k: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidStep("cuts scale by positive integers only".into()));
        }
        Ok(CutValue { r: &self.r * BigInt::from(k), side: self.side })
    }

    /// `δ = p δ`.
    pub fn is_fixed_by(&self, p: u32) -> bool {
        self.scale(p as u64).map(|s| s == *self).unwrap_or(false)
    }
}

impl PartialOrd for CutValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for CutValue {
    fn cmp(&self, other: &Self) -> Ordering {
        self.r.cmp(&other.r).then(self.side.cmp(&other.side))
    }
}

impl fmt::Display for CutValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = rat_string(&self.r);
        match self.side {
            Side::Minus => write!(f, "{s}-"),
            Side::Exact => write!(f, "{s}+"),
        }
    }
}

/// `true` when the distance cut signals an independent (vanishing-distance) extension.
pub fn independence_test(delta: &CutValue, p: u32) -> bool {
    delta.is_fixed_by(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extend_examples() {
        let l = ValueLedger::new();
        assert_eq!(l.x_value(0).unwrap(), rat(1, 1));
        let l2 = l.extend(4, 11).unwrap().extend(2, 3).unwrap();
        assert_eq!(l2.x_value(2).unwrap(), rat(1, 8));
        let l3 = l2.extend(1, 1).unwrap();
        assert_eq!(l3.x_value(3).unwrap(), l2.x_value(2).unwrap());
        assert!(l.extend(0, 1).is_err());
    }

    #[test]
    fn monomial_values() {
        let l = ValueLedger::new().extend(4, 11).unwrap();
        assert_eq!(l.monomial_value_at(0, (0, 1)).unwrap(), rat(11, 4));
        assert_eq!(l.monomial_value_at(0, (1, 0)).unwrap(), rat(1, 1));
        assert_eq!(l.monomial_value_at(0, (2, 1)).unwrap(), rat(2, 1) + rat(11, 4));
        assert!(matches!(l.monomial_value_at(3, (1, 0)), Err(Error::LevelOutOfRange(3))));
    }

    #[test]
    fn record_and_verdict() {
        let l = ValueLedger::new().extend(2, 1).unwrap().extend(2, 1).unwrap().extend(2, 1).unwrap();
        assert!(matches!(l.distance_verdict(0), Verdict::Inconclusive { inf: None }));
        // pad levels 0..2 so that the record lands at M = 8
        let mut r = l.clone();
        r.jac_values = vec![rat(1, 1), rat(1, 1), rat(1, 1)];
        r.jac_exps = vec![1, 2, 4];
        r.running_inf = Some(rat(1, 1));
        let r = r.record_jacobian(3, 2).unwrap();
        assert_eq!(r.jac_values[3], rat(3, 8));
        let single = ValueLedger::new().extend(8, 1).unwrap();
        let mut s = single.clone();
        s.cum = vec![BigInt::from(8)];
        let s = s.record_jacobian(3, 2).unwrap();
        assert_eq!(s.running_inf, Some(rat(3, 8)));
        assert!(!s.distance_verdict(2).is_independent());
        let zero = ValueLedger::new().record_jacobian(0, 2).unwrap();
        assert_eq!(zero.running_inf, Some(rat(0, 1)));
        assert!(zero.distance_verdict(40).is_independent());
    }

    #[test]
    fn running_inf_is_min() {
        let mut l = ValueLedger::new();
        l.cum = vec![BigInt::from(8), BigInt::from(8)];
        let l = l.record_jacobian(3, 2).unwrap().record_jacobian(2, 2).unwrap();
        assert_eq!(l.running_inf, Some(rat(1, 4)));
    }

    #[test]
    fn cut_examples() {
        let d = CutValue::minus(rat(0, 1));
        assert!(independence_test(&d, 2));
        assert_eq!(d.scale(2).unwrap(), d);
        let d = CutValue::minus(rat(-1, 1));
        assert_eq!(d.scale(2).unwrap(), CutValue::minus(rat(-2, 1)));
        assert!(!independence_test(&d, 2));
        assert_eq!(CutValue::minus(rat(0, 1)).negate(), CutValue::exact(rat(0, 1)));
        assert!(CutValue::minus(rat(1, 2)) < CutValue::exact(rat(1, 2)));
        assert!(CutValue::exact(rat(1, 3)) < CutValue::minus(rat(1, 2)));
        assert_eq!(CutValue::minus(rat(-3, 2)).to_string(), "-3/2-");
    }

    #[test]
    fn csv_layout() {
        let l = ValueLedger::new().record_jacobian(3, 2).unwrap();
        assert_eq!(l.to_csv(), "i,m_i,M_i,c_i,value,running_inf\n0,1,1,3,3,3\n");
        assert_eq!(parse_rat("6/4").unwrap(), rat(3, 2));
        assert!(parse_rat("1/0").is_err());
    }
}
