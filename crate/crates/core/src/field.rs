//! Finite fields F_{p^n} with small order.
//!
//! Elements are encoded as integers in `0..p^n` whose base-`p` digits are the
//! coefficients of a polynomial in the generator `t` modulo a primitive
//! polynomial. For `n = 1` this is the usual residue. Multiplication for
//! `n > 1` goes through discrete log tables.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Largest field order we are willing to tabulate.
pub const MAX_ORDER: u32 = 1 << 16;

pub fn is_prime(p: u32) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u32;
    while d * d <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

#[derive(Debug)]
pub struct Field {
    p: u32,
    n: u32,
    order: u32,
    /// Coefficients of the primitive polynomial below the leading term (only for n > 1).
    modulus: Vec<u32>,
    exp: Vec<u32>,
    log: Vec<u32>,
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.n == other.n && self.modulus == other.modulus
    }
}
impl Eq for Field {}

impl Field {
    pub fn new(p: u32, n: u32) -> Result<Arc<Field>> {
        if !is_prime(p) {
            return Err(Error::InvalidField(format!("p must be prime, got {p}")));
        }
        if n == 0 {
            return Err(Error::InvalidField("extension degree must be >= 1".into()));
        }
        let order = (p as u64).checked_pow(n).filter(|&q| q <= MAX_ORDER as u64).ok_or_else(|| {
            Error::InvalidField(format!("{p}^{n} exceeds the supported order {MAX_ORDER}"))
        })? as u32;
        if n == 1 {
            return Ok(Arc::new(Field { p, n, order, modulus: Vec::new(), exp: Vec::new(), log: Vec::new() }));
        }
        // Search monic polynomials of degree n for one whose root generates F^*.
        for code in 0..order {
            let modulus: Vec<u32> = digits(code, p, n);
            if modulus[0] == 0 {
                continue;
            }
            if let Some((exp, log)) = tabulate(p, n, order, &modulus) {
                return Ok(Arc::new(Field { p, n, order, modulus, exp, log }));
            }
        }
        Err(Error::InvalidField(format!("no primitive polynomial of degree {n} over F_{p}")))
    }

    pub fn prime(p: u32) -> Result<Arc<Field>> {
        Field::new(p, 1)
    }

    #[inline]
    pub fn p(&self) -> u32 {
        self.p
    }
    #[inline]
    pub fn n(&self) -> u32 {
        self.n
    }
    #[inline]
    pub fn order(&self) -> u32 {
        self.order
    }

    #[inline]
    pub fn add(&self, a: u32, b: u32) -> u32 {
        if self.n == 1 {
            let s = a + b;
            if s >= self.p {
                s - self.p
            } else {
                s
            }
        } else {
            let (mut a, mut b, mut out, mut place) = (a, b, 0, 1);
            while a > 0 || b > 0 {
                out += ((a % self.p + b % self.p) % self.p) * place;
                a /= self.p;
                b /= self.p;
                place *= self.p;
            }
            out
        }
    }

    #[inline]
    pub fn neg(&self, a: u32) -> u32 {
        if self.n == 1 {
            if a == 0 {
                0
            } else {
                self.p - a
            }
        } else {
            let (mut a, mut out, mut place) = (a, 0, 1);
            while a > 0 {
                out += ((self.p - a % self.p) % self.p) * place;
                a /= self.p;
                place *= self.p;
            }
            out
        }
    }

    #[inline]
    pub fn sub(&self, a: u32, b: u32) -> u32 {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        if a == 0 || b == 0 {
            return 0;
        }
        if self.n == 1 {
            ((a as u64 * b as u64) % self.p as u64) as u32
        } else {
            let l = (self.log[a as usize] + self.log[b as usize]) % (self.order - 1);
            self.exp[l as usize]
        }
    }

    pub fn inv(&self, a: u32) -> Option<u32> {
        if a == 0 {
            return None;
        }
        if self.n == 1 {
            Some(self.pow(a, (self.p - 2) as u64))
        } else {
            let l = (self.order - 1 - self.log[a as usize]) % (self.order - 1);
            Some(self.exp[l as usize])
        }
    }

    pub fn pow(&self, a: u32, mut e: u64) -> u32 {
        let (mut base, mut acc) = (a, 1);
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Image of an integer under Z -> F_p -> F_{p^n}.
    pub fn from_int(&self, v: i64) -> u32 {
        v.rem_euclid(self.p as i64) as u32
    }

    /// Nonzero elements in increasing code order.
    pub fn nonzero(&self) -> impl Iterator<Item = u32> {
        1..self.order
    }

    pub fn name(&self) -> String {
        if self.n == 1 {
            format!("{}", self.p)
        } else {
            format!("{}^{}", self.p, self.n)
        }
    }

    pub fn elem(self: &Arc<Self>, code: u32) -> Result<FieldElem> {
        if code >= self.order {
            return Err(Error::InvalidField(format!("code {code} outside F_{}", self.name())));
        }
        Ok(FieldElem { field: self.clone(), value: code })
    }
}

fn digits(mut code: u32, p: u32, n: u32) -> Vec<u32> {
    (0..n)
        .map(|_| {
            let d = code % p;
            code /= p;
            d
        })
        .collect()
}

fn undigits(ds: &[u32], p: u32) -> u32 {
    ds.iter().rev().fold(0, |acc, &d| acc * p + d)
}

/// Powers of `t` modulo `t^n + modulus(t)`; returns tables when `t` is primitive.
fn tabulate(p: u32, n: u32, order: u32, modulus: &[u32]) -> Option<(Vec<u32>, Vec<u32>)> {
    let n = n as usize;
    let mut exp = Vec::with_capacity(order as usize - 1);
    let mut log = vec![u32::MAX; order as usize];
    let mut cur = vec![0u32; n];
    cur[0] = 1;
    for k in 0..order - 1 {
        let code = undigits(&cur, p);
        if log[code as usize] != u32::MAX {
            return None;
        }
        log[code as usize] = k;
        exp.push(code);
        // multiply by t
        let top = cur[n - 1];
        for i in (1..n).rev() {
            cur[i] = cur[i - 1];
        }
        cur[0] = 0;
        for i in 0..n {
            cur[i] = (cur[i] + (p - modulus[i]) * top) % p;
        }
    }
    let back_to_one = cur[0] == 1 && cur[1..].iter().all(|&d| d == 0);
    back_to_one.then_some((exp, log))
}

/// An element of a finite field together with its field.
#[derive(Clone, PartialEq, Eq)]
pub struct FieldElem {
    pub field: Arc<Field>,
    pub value: u32,
}

impl FieldElem {
    pub fn is_zero(&self) -> bool {
        self.value == 0
    }
    pub fn inv(&self) -> Option<FieldElem> {
        self.field.inv(self.value).map(|value| FieldElem { field: self.field.clone(), value })
    }
}

impl fmt::Debug for FieldElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}∈F_{}", self.value, self.field.name())
    }
}

impl fmt::Display for FieldElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_composite_characteristic() {
        assert!(matches!(Field::new(4, 1), Err(Error::InvalidField(_))));
        assert!(Field::new(1, 1).is_err());
    }

    #[test]
    fn prime_field_inverse() {
        let f = Field::prime(5).unwrap();
        assert_eq!(f.inv(2), Some(3));
        assert_eq!(f.inv(0), None);
        assert_eq!(f.neg(2), 3);
    }

    #[test]
    fn extension_field_axioms() {
        for (p, n) in [(2, 2), (2, 3), (3, 2), (5, 2)] {
            let f = Field::new(p, n).unwrap();
            let q = f.order();
            for a in 0..q {
                assert_eq!(f.add(a, f.neg(a)), 0);
                if a != 0 {
                    assert_eq!(f.mul(a, f.inv(a).unwrap()), 1);
                }
                for b in 0..q {
                    for c in [1 % q, q - 1, (q / 2).max(1)] {
                        assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
                    }
                }
            }
            // Frobenius is additive in characteristic p.
            for a in 0..q {
                for b in 0..q {
                    assert_eq!(f.pow(f.add(a, b), p as u64), f.add(f.pow(a, p as u64), f.pow(b, p as u64)));
                }
            }
        }
    }
}
