//! Strong monomialization checks for the composite arrows `R_s -> T_s`.
//!
//! For every ring `T'` between `T_s` and `T_{s+1}` reached by single quadratic
//! transforms, the composite `u_s = α z_s^p, v_s = β w_s^p + Ω` is rewritten in
//! the parameters of `T'` and tested for a strongly monomial form
//! `u' = λ z'^m, v' = w'`. The substitution `z_s = z̄^a w̄^b, w_s = z̄^c w̄^d` is
//! unimodular, hence injective on exponents, so the decision only needs the
//! exponent pattern of the stored terms.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{ExtType, ExtensionFrame};
use crate::series::{Exp, TruncSeries};
use crate::tower::TowerState;
use crate::valuation::rat_string;

/// `z_s = z̄^a w̄^b`, `w_s = z̄^c w̄^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntermediateRing {
    pub position: usize,
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl IntermediateRing {
    pub fn identity() -> Self {
        IntermediateRing { position: 0, a: 1, b: 0, c: 0, d: 1 }
    }

    pub fn det(&self) -> i64 {
        (self.a * self.d) as i64 - (self.b * self.c) as i64
    }

    /// Exponent of `z̄, w̄` in the image of `z_s^i w_s^j`.
    pub fn image(&self, (i, j): Exp) -> (u64, u64) {
        let (i, j) = (i as u64, j as u64);
        (self.a * i + self.c * j, self.b * i + self.d * j)
    }
}

/// Rings visited by the Euclidean factorization of the monomial part of a
/// step with exponents `(m, q)`, from `T_s` itself up to the last ring before
/// the translation that lands in `T_{s+1}`.
pub fn intermediate_rings(m: u64, q: u64) -> Vec<IntermediateRing> {
    let mut ring = IntermediateRing::identity();
    let (mut vz, mut vw) = (m, q);
    let mut out = Vec::new();
    loop {
        out.push(ring);
        if vz == vw || vz == 0 || vw == 0 {
            return out;
        }
        if vz < vw {
            // w = z̄ w̄
            ring.a += ring.b;
            ring.c += ring.d;
            vw -= vz;
        } else {
            // z = z̄ w̄
            ring.b += ring.a;
            ring.d += ring.c;
            vz -= vw;
        }
        ring.position += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// `u_s` is not `α z^p` with `v_s = β w^p + Ω`.
    NotStable,
    /// `c >= a`, `d >= b`: `u_s | v_s`, and the quotient is not a parameter.
    Divides,
    /// `c <= a`, `d <= b`: rewrite by `u_s / v_s` and re-enter once.
    Rewrite,
    /// `(c - a)(d - b) < 0`: neither divides the other.
    Incomparable,
}

impl Branch {
    pub fn tag(&self) -> &'static str {
        match self {
            Branch::NotStable => "not-stable",
            Branch::Divides => "i",
            Branch::Rewrite => "ii",
            Branch::Incomparable => "iii",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum MonomializationVerdict {
    StronglyMonomial { m: u64, witness: String },
    Obstruction { branch: Branch, detail: String },
}

impl MonomializationVerdict {
    pub fn is_obstruction(&self) -> bool {
        matches!(self, MonomializationVerdict::Obstruction { .. })
    }
}

impl fmt::Display for MonomializationVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MonomializationVerdict::StronglyMonomial { m, witness } => write!(f, "strongly monomial (m = {m}; {witness})"),
            MonomializationVerdict::Obstruction { branch, detail } => write!(f, "obstruction [{}] {detail}", branch.tag()),
        }
    }
}

/// Values `μ(z_s)`, `μ(w_s)` of the upper parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValueView {
    pub z: BigRational,
    pub w: BigRational,
}

impl ValueView {
    fn of(&self, (i, j): Exp) -> BigRational {
        &self.z * BigInt::from(i) + &self.w * BigInt::from(j)
    }
}

/// `u_s = α z^p`, `v_s = β w^p + ε z^e w + M` read off a composite frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StableForm {
    pub p: u32,
    /// Exponent `e` of the leading mixed term `ε z^e w` of `Ω`.
    pub e: u32,
    /// `μ(w^p)` and `μ(z^e w)` as exact fractions; the first is smaller.
    pub value_wp: String,
    pub value_lead: String,
}

/// Terms of `v` that belong to `β w^p`.
fn in_beta_part((_, j): Exp, p: u32) -> bool {
    j >= p
}

pub fn stable_form(frame: &ExtensionFrame, view: &ValueView) -> Result<Option<StableForm>> {
    let p = frame.p();
    let (u, v) = (&frame.u, &frame.v);
    let u_ok = u.coeff((p, 0)) != 0 && u.terms().keys().all(|&(a, _)| a >= p);
    if !u_ok || v.coeff((0, p)) == 0 || v.x_slice(0).keys().next() != Some(&p) {
        return Ok(None);
    }
    let lead = v.terms().keys().filter(|&&(i, j)| j == 1 && i > 0).map(|&(i, _)| i).min();
    let Some(e) = lead else { return Ok(None) };
    let lead_value = view.of((e, 1));
    let wp = view.of((0, p));
    if wp == lead_value {
        return Err(Error::ValueTie((0, p as i64), (e as i64, 1)));
    }
    if wp > lead_value {
        return Ok(None);
    }
    // M: the remaining terms below w^p must have order at least e in z
    if v.terms().keys().any(|&(i, j)| !in_beta_part((i, j), p) && i < e) {
        return Ok(None);
    }
    Ok(Some(StableForm { p, e, value_wp: rat_string(&wp), value_lead: rat_string(&lead_value) }))
}

/// Images of the stored terms of `s` under `ring`, with coefficients.
fn image_terms(s: &TruncSeries, ring: &IntermediateRing) -> BTreeMap<(u64, u64), u32> {
    s.terms().iter().map(|(&e, &c)| (ring.image(e), c)).collect()
}

/// Checks that every monomial of `frame.v` whose image could reach total
/// degree `target` is within precision.
fn covered(v: &TruncSeries, ring: &IntermediateRing, target: u64) -> Result<()> {
    let (sa, sc) = (ring.a + ring.b, ring.c + ring.d);
    let w = v.weights();
    let mut need = 0u64;
    for i in 0..=target / sa.max(1) {
        let j = (target - i * sa) / sc.max(1);
        need = need.max(w.of((i as u32, 0))).max(w.of((i as u32, j as u32)));
    }
    if need >= v.prec() {
        return Err(Error::PrecisionExhausted { needed: need as i64 + 1, available: v.prec() as i64 });
    }
    Ok(())
}

/// The sanity direction: an arrow with `u = λ z^m` and `v = τ w + h(z)` is
/// already strongly monomial with `z' = z`, `w' = v`.
fn direct_witness(frame: &ExtensionFrame) -> Option<MonomializationVerdict> {
    let (u, v) = (&frame.u, &frame.v);
    let (m, unit) = u.x_ideal_exponent().ok()?;
    if !unit || m == 0 || v.coeff((0, 1)) == 0 || v.constant_term() != 0 {
        return None;
    }
    // λ = u / z^m must be a unit
    if u.coeff((m, 0)) == 0 {
        return None;
    }
    Some(MonomializationVerdict::StronglyMonomial {
        m: m as u64,
        witness: format!("u' = u = λ z^{m} with λ = u / z^{m} a unit; v' = v = w' is a parameter since ∂v/∂w is a unit"),
    })
}

/// Decides whether `R' -> T'` can be strongly monomial, `T'` given by `ring`.
pub fn is_strongly_monomial(frame: &ExtensionFrame, ring: &IntermediateRing, view: &ValueView) -> Result<MonomializationVerdict> {
    if ring.det().abs() != 1 {
        return Err(Error::InvalidStep(format!("matrix {ring:?} is not unimodular")));
    }
    if frame.ext_type == ExtType::Type0 {
        if let Some(v) = direct_witness(frame) {
            return Ok(v);
        }
    }
    let Some(form) = stable_form(frame, view)? else {
        if ring.position == 0 {
            if let Some(v) = direct_witness(frame) {
                return Ok(v);
            }
        }
        return Ok(MonomializationVerdict::Obstruction {
            branch: Branch::NotStable,
            detail: "not of the shape u = α z^p, v = β w^p + ε z^e w + M".into(),
        });
    };
    let p = form.p as u64;
    let IntermediateRing { a, b, c, d, .. } = *ring;
    let u_exp = (a * p, b * p);
    let v_img = image_terms(&frame.v, ring);

    if c >= a && d >= b {
        if a != 0 && b != 0 {
            return Ok(MonomializationVerdict::Obstruction {
                branch: Branch::Divides,
                detail: format!("u_s = α z̄^{} w̄^{} involves both parameters", u_exp.0, u_exp.1),
            });
        }
        // z' is the parameter occurring in u_s; v_s / u_s must be linear in the other one
        let wanted = if a == 0 { (1, 0) } else { (0, 1) };
        covered(&frame.v, ring, 1 + p * (a + b))?;
        let mut linear = false;
        for &(x, y) in v_img.keys() {
            if x < u_exp.0 || y < u_exp.1 {
                return Ok(MonomializationVerdict::Obstruction {
                    branch: Branch::Divides,
                    detail: format!("u_s does not divide the term z̄^{x} w̄^{y} of v_s"),
                });
            }
            linear |= (x - u_exp.0, y - u_exp.1) == wanted;
        }
        if linear {
            return Ok(MonomializationVerdict::StronglyMonomial {
                m: u_exp.0 + u_exp.1,
                witness: format!("v_s / u_s has a linear term in the parameter missing from u_s at matrix {ring:?}"),
            });
        }
        return Ok(MonomializationVerdict::Obstruction {
            branch: Branch::Divides,
            detail: format!(
                "v_s / u_s has no linear term: the leading mixed term z^{} w gives exponent {:?}, and μ(w^p) = {} < {} = μ(z^{} w) forces p <= {}",
                form.e,
                {
                    let (x, y) = ring.image((form.e, 1));
                    (x as i64 - u_exp.0 as i64, y as i64 - u_exp.1 as i64)
                },
                form.value_wp,
                form.value_lead,
                form.e,
                form.e
            ),
        });
    }
    if c <= a && d <= b {
        let v_exp = (c * p, d * p);
        let divisible = v_img.keys().all(|&(x, y)| x >= v_exp.0 && y >= v_exp.1);
        let detail = if divisible {
            // (v_s, u_s / v_s) are both unit multiples of p-th powers of monomials,
            // so neither can be a parameter and the rewrite ends here
            format!(
                "v_s = γ z̄^{} w̄^{} and u_s / v_s = α γ^-1 z̄^{} w̄^{}: both p-th powers, no parameter",
                v_exp.0,
                v_exp.1,
                (a - c) * p,
                (b - d) * p
            )
        } else {
            "v_s is not a monomial times a unit, and u_s does not divide it".to_string()
        };
        return Ok(MonomializationVerdict::Obstruction { branch: Branch::Rewrite, detail });
    }
    Ok(MonomializationVerdict::Obstruction {
        branch: Branch::Incomparable,
        detail: format!("(c - a)(d - b) = {} < 0: neither of u_s, v_s divides the other", (c as i64 - a as i64) * (d as i64 - b as i64)),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub level: i64,
    pub ring: IntermediateRing,
    pub verdict: MonomializationVerdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepReport {
    pub entries: Vec<SweepEntry>,
    /// Verdict on the injected type 0 control.
    pub control: MonomializationVerdict,
    pub passes: bool,
}

impl SweepReport {
    /// Levels × positions, `✓` for an obstruction and `✗` for a monomial form.
    pub fn to_text(&self) -> String {
        let mut rows: BTreeMap<i64, Vec<String>> = BTreeMap::new();
        for e in &self.entries {
            let mark = match &e.verdict {
                MonomializationVerdict::Obstruction { branch, .. } => format!("✓{}", branch.tag()),
                MonomializationVerdict::StronglyMonomial { .. } => "✗".to_string(),
            };
            rows.entry(e.level).or_default().push(mark);
        }
        let mut out = String::new();
        for (level, marks) in rows {
            out.push_str(&format!("level {level:>3}: {}\n", marks.join(" ")));
        }
        out.push_str(&format!("control: {}\n", self.control));
        out.push_str(&format!("sweep {}\n", if self.passes { "PASSES" } else { "FAILS" }));
        out
    }
}

/// Verdicts for every intermediate ring above every composite in `levels`,
/// plus the type 0 control.
pub fn sweep(state: &TowerState, levels: std::ops::Range<i64>) -> Result<SweepReport> {
    let mut entries = Vec::new();
    for level in levels {
        let frame = state.rt(level)?;
        let step = state.steps.iter().find(|s| s.from == level).ok_or(Error::LevelOutOfRange(level as usize))?;
        let upper = step.upper.as_ref().ok_or(Error::LevelOutOfRange(level as usize))?;
        let i = level as usize;
        let view = ValueView { z: state.mu.x_value(i)?, w: state.mu.y_value(i)? };
        for ring in intermediate_rings(upper.m, upper.q) {
            let verdict = is_strongly_monomial(frame, &ring, &view)?;
            entries.push(SweepEntry { level, ring, verdict });
        }
    }
    let control = type0_control(state)?;
    let passes = entries.iter().all(|e| e.verdict.is_obstruction()) && !control.is_obstruction();
    Ok(SweepReport { entries, control, passes })
}

/// `u = z(1 + w)`, `v = w + z^2` over the tower's field.
pub fn type0_control(state: &TowerState) -> Result<MonomializationVerdict> {
    let frame = crate::frames::identity_frame(&state.field, 8)?;
    let like = &frame.u;
    let u = like.monomial_like((1, 0), 1, 8).add(&like.monomial_like((1, 1), 1, 8))?;
    let v = like.monomial_like((0, 1), 1, 8).add(&like.monomial_like((2, 0), 1, 8))?;
    let control = ExtensionFrame::from_series(0, frame.tier, frame.lower_params.clone(), u, v, Vec::new())?;
    let view = ValueView { z: crate::valuation::rat(1, 1), w: crate::valuation::rat(1, 1) };
    is_strongly_monomial(&control, &IntermediateRing::identity(), &view)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Field;
    use crate::frames::Tier;
    use crate::series::vars;
    use crate::valuation::rat;

    fn frame(p: u32, u: &[(Exp, i64)], v: &[(Exp, i64)], prec: u64) -> ExtensionFrame {
        let k = Field::prime(p).unwrap();
        let vs = vars("z", "w");
        let u = TruncSeries::from_ints(&k, &vs, u, prec).unwrap();
        let v = TruncSeries::from_ints(&k, &vs, v, prec).unwrap();
        ExtensionFrame::from_series(0, Tier::Composite, crate::frames::param_names("u", "v"), u, v, Vec::new()).unwrap()
    }

    #[test]
    fn euclid_lengths() {
        assert_eq!(intermediate_rings(2, 1).len(), 2);
        assert_eq!(intermediate_rings(1, 1).len(), 1);
        assert_eq!(intermediate_rings(3, 2).len(), 3);
        for (m, q) in [(3, 2), (4, 7), (2, 41), (8, 3)] {
            let rings = intermediate_rings(m, q);
            let last = rings.last().unwrap();
            assert_eq!((last.a + last.b, last.c + last.d), (m, q));
            assert!(rings.iter().all(|r| r.det().abs() == 1));
        }
    }

    #[test]
    fn already_monomial() {
        let f = frame(2, &[((1, 0), 1)], &[((0, 1), 1)], 10);
        let view = ValueView { z: rat(1, 1), w: rat(1, 1) };
        let v = is_strongly_monomial(&f, &IntermediateRing::identity(), &view).unwrap();
        assert!(matches!(v, MonomializationVerdict::StronglyMonomial { m: 1, .. }));
    }

    #[test]
    fn stable_shape_is_obstructed() {
        // u = z^2, v = w^2 + z^2 w with μ(z) = 1, μ(w) = 5/2 < 2 + 5/2 ... c' = 2
        let f = frame(2, &[((2, 0), 1), ((3, 0), 1)], &[((0, 2), 1), ((2, 1), 1), ((9, 0), 1)], 30);
        let view = ValueView { z: rat(1, 1), w: rat(5, 4) };
        for ring in intermediate_rings(4, 5) {
            let v = is_strongly_monomial(&f, &ring, &view).unwrap();
            assert!(v.is_obstruction(), "{ring:?}: {v}");
        }
    }

    #[test]
    fn incomparable_branch() {
        let f = frame(2, &[((2, 0), 1), ((3, 0), 1)], &[((0, 2), 1), ((3, 1), 1)], 40);
        let ring = IntermediateRing { position: 1, a: 1, b: 1, c: 0, d: 1 };
        let view = ValueView { z: rat(2, 1), w: rat(1, 1) };
        let v = is_strongly_monomial(&f, &ring, &view).unwrap();
        assert!(matches!(v, MonomializationVerdict::Obstruction { branch: Branch::Rewrite | Branch::Incomparable, .. }));
        let ring = IntermediateRing { position: 1, a: 2, b: 1, c: 1, d: 1 };
        let v = is_strongly_monomial(&f, &ring, &view).unwrap();
        assert!(matches!(v, MonomializationVerdict::Obstruction { branch: Branch::Rewrite, .. }));
    }
}
