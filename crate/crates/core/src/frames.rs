//! Extensions `R -> S` of two-dimensional regular local rings, presented by
//! the series expressing the parameters `(u, v)` of `R` in the parameters
//! `(x, y)` of `S`, and the quadratic-transform step engines that move such a
//! frame one level up while recomputing its Jacobian exponent from scratch.

use std::fmt;
use std::sync::Arc;

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::series::{vars, SeriesJson, ShiftedSeries, TruncSeries, Var, Weights};

/// Shape of an arrow with respect to its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExtType {
    /// `u = γx, v = yτ + xΩ`
    Type0,
    /// `u = γx, v = y^pτ + xΩ`
    Type1,
    /// `u = γx^p, v = yτ + xΩ`
    Type2,
    Unclassified,
}

impl ExtType {
    pub fn index(self) -> Option<u8> {
        match self {
            ExtType::Type0 => Some(0),
            ExtType::Type1 => Some(1),
            ExtType::Type2 => Some(2),
            ExtType::Unclassified => None,
        }
    }
}

impl fmt::Display for ExtType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.index() {
            Some(i) => write!(f, "type {i}"),
            None => write!(f, "unclassified"),
        }
    }
}

/// Which field extension a frame belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tier {
    /// `K -> L`, rings `R_i -> S_i`
    Lower,
    /// `L -> M`, rings `S_i -> T_i`
    Upper,
    /// `K -> M`, rings `R_i -> T_i`
    Composite,
}

/// `[L:K] = e f δ g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefectData {
    pub degree: u64,
    pub e: u64,
    pub f: u64,
    pub g: u64,
    pub defect: u64,
}

impl DefectData {
    pub fn new(p: u32, degree: u64, e: u64, f: u64, g: u64, defect: u64) -> Result<Self> {
        let d = DefectData { degree, e, f, g, defect };
        d.check(p)?;
        Ok(d)
    }

    /// Immediate Artin-Schreier extension of degree `p` with a unique extension of the valuation.
    pub fn artin_schreier_defect(p: u32) -> Self {
        DefectData { degree: p as u64, e: 1, f: 1, g: 1, defect: p as u64 }
    }

    pub fn check(&self, p: u32) -> Result<()> {
        if self.e * self.f * self.defect * self.g != self.degree {
            return Err(Error::InvalidFrame(format!("e*f*defect*g != degree in {self:?}")));
        }
        let mut d = self.defect;
        while d.is_multiple_of(p as u64) {
            d /= p as u64;
        }
        if d != 1 {
            return Err(Error::InvalidFrame(format!("defect {} is not a power of {p}", self.defect)));
        }
        Ok(())
    }

    /// Data of a tower of two extensions (multiplicativity of all invariants).
    pub fn tower(&self, upper: &DefectData) -> DefectData {
        DefectData {
            degree: self.degree * upper.degree,
            e: self.e * upper.e,
            f: self.f * upper.f,
            g: self.g * upper.g,
            defect: self.defect * upper.defect,
        }
    }
}

/// Which of the two step engines a transform feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Flavor {
    /// starts from a type 1 arrow
    TheoremA,
    /// starts from a type 2 arrow
    TheoremB,
}

/// Smallest `(a, b)` in ℕ² with `m*b - q*a = 1`.
pub fn bezout(m: u64, q: u64) -> Result<(u64, u64)> {
    if m == 0 || q == 0 || m.gcd(&q) != 1 {
        return Err(Error::InvalidStep(format!("gcd({m}, {q}) must be 1")));
    }
    if m == 1 {
        return Ok((0, 1));
    }
    // q*a ≡ -1 (mod m)
    let inv = mod_inverse(q % m, m).expect("coprime");
    let a = (m - inv) % m;
    let b = (1 + q * a) / m;
    debug_assert_eq!(m * b - q * a, 1);
    Ok((a, b))
}

fn mod_inverse(a: u64, m: u64) -> Option<u64> {
    let e = (a as i128).extended_gcd(&(m as i128));
    (e.gcd == 1).then(|| e.x.rem_euclid(m as i128) as u64)
}

/// One quadratic-transform sequence: the upper substitution
/// `x = x1^m (y1+α)^a', y = x1^q (y1+α)^b'` and the induced lower one
/// `u = u1^m̄ (v1+β)^c', v̄ = u1^q̄ (v1+β)^d'`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformStep {
    pub flavor: Flavor,
    pub p: u32,
    pub m: u64,
    pub q: u64,
    pub alpha: u32,
    pub a_prime: u64,
    pub b_prime: u64,
    pub sigma: u64,
    pub m_bar: u64,
    pub q_bar: u64,
    pub c_prime: u64,
    pub d_prime: u64,
    /// Filled in once the step has been carried out.
    pub beta: Option<u32>,
}

impl TransformStep {
    pub fn new(flavor: Flavor, p: u32, m: u64, q: u64, alpha: u32) -> Result<Self> {
        if alpha == 0 {
            return Err(Error::InvalidStep("alpha must be nonzero".into()));
        }
        let (a_prime, b_prime) = bezout(m, q)?;
        let pp = p as u64;
        let (sigma, m_bar, q_bar) = match flavor {
            Flavor::TheoremA => {
                if m <= 1 {
                    return Err(Error::InvalidStep(format!("m = {m} must exceed 1")));
                }
                let s = m.gcd(&(pp * q));
                (s, m / s, pp * q / s)
            }
            Flavor::TheoremB => {
                let s = (pp * m).gcd(&q);
                (s, pp * m / s, q / s)
            }
        };
        let (c_prime, d_prime) = bezout(m_bar, q_bar)?;
        let step = TransformStep { flavor, p, m, q, alpha, a_prime, b_prime, sigma, m_bar, q_bar, c_prime, d_prime, beta: None };
        step.check_invariants()?;
        Ok(step)
    }

    pub fn check_invariants(&self) -> Result<()> {
        let (m, q, pp) = (self.m, self.q, self.p as u64);
        let fail = |what: &str| Err(Error::InvalidStep(format!("{what} violated by {self:?}")));
        if m.gcd(&q) != 1 {
            return fail("gcd(m, q) = 1");
        }
        if m * self.b_prime != q * self.a_prime + 1 {
            return fail("m b' - q a' = 1");
        }
        if self.m_bar * self.d_prime != self.q_bar * self.c_prime + 1 {
            return fail("m̄ d' - q̄ c' = 1");
        }
        match self.flavor {
            Flavor::TheoremA => {
                if self.sigma != m.gcd(&(pp * q)) || m != self.sigma * self.m_bar || pp * q != self.sigma * self.q_bar {
                    return fail("m = σ m̄, pq = σ q̄");
                }
            }
            Flavor::TheoremB => {
                if self.sigma != (pp * m).gcd(&q) || pp * m != self.sigma * self.m_bar || q != self.sigma * self.q_bar {
                    return fail("pm = σ m̄, q = σ q̄");
                }
            }
        }
        if self.sigma != 1 && self.sigma != pp {
            return fail("σ ∈ {1, p}");
        }
        Ok(())
    }
}

/// What the transform theorems predict for the new arrow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Predicted {
    Type0,
    Typed { ext_type: ExtType, c1: u64 },
}

/// Closed-form outcome of a step applied to an arrow with Jacobian exponent `c_bar`.
pub fn predict(flavor: Flavor, p: u32, c_bar: u64, m: u64, q: u64) -> Result<Predicted> {
    let pm1 = p as u64 - 1;
    if !c_bar.is_multiple_of(pm1) {
        return Err(Error::InvalidStep(format!("c̄ = {c_bar} is not a multiple of p - 1 = {pm1}")));
    }
    let k = c_bar / pm1;
    let pp = p as u64;
    match flavor {
        Flavor::TheoremA => {
            // case 0 when q/m >= c̄/(p-1)
            if q >= k * m {
                return Ok(Predicted::Type0);
            }
            let sigma = m.gcd(&(pp * q));
            let base = k * m - q;
            Ok(if sigma == 1 {
                Predicted::Typed { ext_type: ExtType::Type1, c1: pm1 * base }
            } else {
                Predicted::Typed { ext_type: ExtType::Type2, c1: pm1 * (base + 1) }
            })
        }
        Flavor::TheoremB => {
            let sigma = (pp * m).gcd(&q);
            if k * m < m {
                return Err(Error::InvalidStep("c̄ must be positive".into()));
            }
            let base = k * m - m;
            Ok(if sigma == 1 {
                Predicted::Typed { ext_type: ExtType::Type1, c1: pm1 * base }
            } else {
                Predicted::Typed { ext_type: ExtType::Type2, c1: pm1 * (base + 1) }
            })
        }
    }
}

/// Data recorded by a step so that exponents survive degenerate determinants.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub step: TransformStep,
    pub input_jac_exp: u64,
    /// x1-orders of the images of `u` and of the normalized `v`.
    pub k_u: u64,
    pub k_v: u64,
    /// Lower exponents actually used (`m̄, q̄, c', d'`).
    pub lower: (u64, u64, u64, u64),
    /// Normalization `v̄ = v - Σ e_i u^i` as `(i, e_i)`.
    pub normalization: Vec<(u32, u32)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtensionFrame {
    pub level: i64,
    pub tier: Tier,
    pub lower_params: [String; 2],
    pub u: TruncSeries,
    pub v: TruncSeries,
    pub ext_type: ExtType,
    pub jac_exp: u64,
    pub provenance: Vec<Provenance>,
    pub defect: Option<DefectData>,
}

impl ExtensionFrame {
    /// Frame from raw series; type and Jacobian exponent are computed, not trusted.
    pub fn from_series(
        level: i64,
        tier: Tier,
        lower_params: [String; 2],
        u: TruncSeries,
        v: TruncSeries,
        provenance: Vec<Provenance>,
    ) -> Result<Self> {
        if u.vars() != v.vars() {
            return Err(Error::VariableMismatch((**u.vars()).clone(), (**v.vars()).clone()));
        }
        let mut frame = ExtensionFrame {
            level,
            tier,
            lower_params,
            u,
            v,
            ext_type: ExtType::Unclassified,
            jac_exp: 0,
            provenance,
            defect: None,
        };
        frame.ext_type = classify_type(&frame);
        frame.jac_exp = jacobian_exponent(&frame)?;
        Ok(frame)
    }

    pub fn field(&self) -> &Arc<Field> {
        self.u.field()
    }
    pub fn p(&self) -> u32 {
        self.u.field().p()
    }
    pub fn upper_params(&self) -> &Arc<[String; 2]> {
        self.u.vars()
    }
    pub fn prec(&self) -> u64 {
        self.u.prec().min(self.v.prec())
    }

    /// Jacobian exponent divided by `p - 1` when that is exact.
    pub fn jac_ratio(&self) -> Option<u64> {
        let d = self.p() as u64 - 1;
        self.jac_exp.is_multiple_of(d).then_some(self.jac_exp / d)
    }

    pub fn to_json_value(&self) -> FrameJson {
        FrameJson {
            level: self.level,
            tier: self.tier,
            r#type: self.ext_type.index(),
            jac_exp: self.jac_exp,
            lower_params: self.lower_params.clone(),
            u_series: self.u.to_json_value(),
            v_series: self.v.to_json_value(),
            provenance: self.provenance.clone(),
        }
    }
}

/// Canonical JSON dump of a frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameJson {
    pub level: i64,
    pub tier: Tier,
    pub r#type: Option<u8>,
    pub jac_exp: u64,
    pub lower_params: [String; 2],
    pub u_series: SeriesJson,
    pub v_series: SeriesJson,
    pub provenance: Vec<Provenance>,
}

pub fn param_names(x: &str, y: &str) -> [String; 2] {
    [x.to_string(), y.to_string()]
}

/// The arrow `u = x, v = y^p - x^{e(p-1)} y` given by adjoining a root of
/// `X^p - X - v u^{-pe}` and setting `y = u^e Θ`.
pub fn bootstrap_artin_schreier(p: u32, n: u32, e: u64, prec: u64) -> Result<ExtensionFrame> {
    bootstrap_with(&Field::new(p, n)?, e, prec, Weights::default(), -2, Tier::Lower, ("u", "v"), ("x", "y"))
}

#[allow(clippy::too_many_arguments)]
pub fn bootstrap_with(
    field: &Arc<Field>,
    e: u64,
    prec: u64,
    weights: Weights,
    level: i64,
    tier: Tier,
    lower: (&str, &str),
    upper: (&str, &str),
) -> Result<ExtensionFrame> {
    let p = field.p() as u64;
    if e == 0 {
        return Err(Error::InvalidFrame("e must be positive".into()));
    }
    let c = e * (p - 1);
    let needed = weights.of((0, p as u32)).max(weights.of((c as u32, 1)));
    if prec < needed {
        return Err(Error::precision(needed as i64, prec as i64));
    }
    let vs = vars(upper.0, upper.1);
    let u = TruncSeries::make_weighted(field, &vs, weights, [((1, 0), 1)], prec)?;
    let v = TruncSeries::make_weighted(field, &vs, weights, [((0, p as u32), 1), ((c as u32, 1), field.neg(1))], prec)?;
    let mut frame = ExtensionFrame::from_series(level, tier, param_names(lower.0, lower.1), u, v, Vec::new())?;
    frame.defect = Some(DefectData::artin_schreier_defect(field.p()));
    Ok(frame)
}

/// Type 1 arrow `u = x, v = y^p + x^c̄ y` with Jacobian `x^c̄`.
pub fn synthetic_type1(field: &Arc<Field>, c_bar: u64, prec: u64) -> Result<ExtensionFrame> {
    let p = field.p();
    let vs = vars("x", "y");
    let u = TruncSeries::make(field, &vs, [((1, 0), 1)], prec)?;
    let v = TruncSeries::make(field, &vs, [((0, p), 1), ((c_bar as u32, 1), 1)], prec)?;
    ExtensionFrame::from_series(0, Tier::Lower, param_names("u", "v"), u, v, Vec::new())
}

/// Type 2 arrow `u = x^p (1 + x^s), v = y` with Jacobian `s x^c̄`, `s = c̄ - p + 1`.
///
/// A type 2 arrow has `J = x^p ∂γ/∂x` after making `v = y`, so `c̄ >= p` and
/// `c̄ ≢ -1 (mod p)`; other exponents are rejected.
pub fn synthetic_type2(field: &Arc<Field>, c_bar: u64, prec: u64) -> Result<ExtensionFrame> {
    let p = field.p() as u64;
    if c_bar < p || (c_bar + 1).is_multiple_of(p) {
        return Err(Error::InvalidFrame(format!("no type 2 arrow has Jacobian exponent {c_bar} in characteristic {p}")));
    }
    let s = c_bar - p + 1;
    let vs = vars("x", "y");
    let u = TruncSeries::make(field, &vs, [((p as u32, 0), 1), (((p + s) as u32, 0), 1)], prec)?;
    let v = TruncSeries::make(field, &vs, [((0, 1), 1)], prec)?;
    ExtensionFrame::from_series(0, Tier::Lower, param_names("u", "v"), u, v, Vec::new())
}

pub fn identity_frame(field: &Arc<Field>, prec: u64) -> Result<ExtensionFrame> {
    let vs = vars("x", "y");
    let u = TruncSeries::make(field, &vs, [((1, 0), 1)], prec)?;
    let v = TruncSeries::make(field, &vs, [((0, 1), 1)], prec)?;
    ExtensionFrame::from_series(0, Tier::Lower, param_names("u", "v"), u, v, Vec::new())
}

/// `x^k` times a unit, with every stored term divisible by `x^k`.
fn is_x_power_times_unit(s: &TruncSeries, k: u32) -> bool {
    s.coeff((k, 0)) != 0 && s.terms().keys().all(|&(a, _)| a >= k)
}

/// Least `j` with `y^j` present in `s(0, y)`, if known within precision.
fn y_order_at_x_zero(s: &TruncSeries) -> Option<u32> {
    s.x_slice(0).keys().next().copied()
}

pub fn classify_type(frame: &ExtensionFrame) -> ExtType {
    let p = frame.p();
    let (u, v) = (&frame.u, &frame.v);
    let w = v.weights();
    let known = |b: u32| w.of((0, b)) <= v.prec();
    let v_order = y_order_at_x_zero(v);
    let u_linear = is_x_power_times_unit(u, 1);
    let u_pth = is_x_power_times_unit(u, p);
    match v_order {
        Some(1) if known(1) => {
            if u_linear {
                ExtType::Type0
            } else if u_pth {
                ExtType::Type2
            } else {
                ExtType::Unclassified
            }
        }
        Some(j) if j == p && known(p) && u_linear => ExtType::Type1,
        _ => ExtType::Unclassified,
    }
}

/// `∂u/∂x ∂v/∂y - ∂u/∂y ∂v/∂x` in the upper parameters.
pub fn jacobian_of_frame(frame: &ExtensionFrame) -> Result<TruncSeries> {
    jacobian(&frame.u, &frame.v)
}

pub fn jacobian(u: &TruncSeries, v: &TruncSeries) -> Result<TruncSeries> {
    let ux = u.partial(Var::X)?;
    let uy = u.partial(Var::Y)?;
    let vx = v.partial(Var::X)?;
    let vy = v.partial(Var::Y)?;
    ux.mul(&vy)?.sub(&uy.mul(&vx)?)
}

/// Exponent `c` with `J(S/R) = (x^c)`.
///
/// Computed from the determinant when it does not vanish to precision;
/// otherwise from the recorded step via the product formula
/// `J(S1/R1) · J(R1/R) = J(S/R) · J(S1/S)`.
pub fn jacobian_exponent(frame: &ExtensionFrame) -> Result<u64> {
    let det = jacobian_of_frame(frame)?;
    if det.is_zero() {
        return match frame.provenance.last() {
            Some(pv) => chain_exponent(pv),
            None => Err(Error::Indeterminate("Jacobian determinant vanishes and the frame has no recorded step".into())),
        };
    }
    let (c, unit) = det.x_ideal_exponent()?;
    if !unit {
        return Err(Error::NotPrincipalPowerOfX(c));
    }
    Ok(c as u64)
}

/// Exponent of `J(S1/R1)` from the input exponent and the monomial data of a step.
pub fn chain_exponent(pv: &Provenance) -> Result<u64> {
    let (m_bar, q_bar, c_prime, d_prime) = pv.lower;
    let _ = (m_bar, q_bar);
    let s = &pv.step;
    let u1_order = (d_prime * pv.k_u) as i128 - (c_prime * pv.k_v) as i128;
    let c1 = (pv.input_jac_exp * s.m + s.m + s.q) as i128 - 1 + u1_order - pv.k_u as i128 - pv.k_v as i128;
    u64::try_from(c1).map_err(|_| Error::FormulaMismatch(format!("negative chain exponent {c1}")))
}

/// Precision and grading requested for a step's output.
#[derive(Debug, Clone)]
pub struct StepOptions {
    pub weights: Weights,
    pub prec: u64,
    pub upper_vars: Arc<[String; 2]>,
    pub lower_params: [String; 2],
    pub level: i64,
}

impl StepOptions {
    /// Total-degree output with enough room to read the new Jacobian exponent.
    pub fn standard(frame: &ExtensionFrame, step: &TransformStep) -> Self {
        let p = step.p as u64;
        StepOptions {
            weights: Weights::default(),
            prec: frame.jac_exp * step.m + step.m + step.q + 2 * p + 4,
            upper_vars: vars("x1", "y1"),
            lower_params: param_names("u1", "v1"),
            level: frame.level + 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub frame: ExtensionFrame,
    pub step: TransformStep,
    pub predicted: Predicted,
}

/// `(t + α)^k` in the ring of `like`, truncated at `cap`.
fn translate_pow(like: &TruncSeries, alpha: u32, k: u64, cap: u64) -> Result<TruncSeries> {
    let base = like.monomial_like((0, 0), alpha, cap).add(&like.monomial_like((0, 1), 1, cap))?;
    base.pow_capped(k, cap)
}

/// `x1^k (y1+α)^j` in the output ring.
fn monomial_unit(like: &TruncSeries, k: u64, alpha: u32, j: u64, cap: u64) -> Result<TruncSeries> {
    let w = like.weights().of((k as u32, 0));
    let t = translate_pow(like, alpha, j, cap.saturating_sub(w))?;
    Ok(t.mul_monomial((k as u32, 0)).truncate(cap))
}

/// x1-order estimate of `s(x1^m ·, x1^q ·)` from the stored terms.
fn image_order(s: &TruncSeries, m: u64, q: u64) -> u64 {
    s.terms().keys().map(|&(a, b)| m * a as u64 + q * b as u64).min().unwrap_or(0)
}

/// Carries out the quadratic-transform sequence of `step` on `frame`.
///
/// The upper substitution is applied to the frame's own parameters, `v` is
/// normalized by subtracting powers of `u` until its image is a power of `x1`
/// times a unit, and the lower parameters are recovered by inverting the
/// monomial relations. Nothing about the new arrow is assumed: its type and
/// Jacobian exponent are recomputed from the resulting series.
pub fn apply_step(frame: &ExtensionFrame, step: &TransformStep, opts: &StepOptions) -> Result<(ExtensionFrame, TransformStep)> {
    let field = frame.field().clone();
    let w = opts.weights;
    let wx = w.x as u64;
    let est_u = image_order(&frame.u, step.m, step.q);
    let kv_bound = match step.flavor {
        Flavor::TheoremA => step.p as u64 * step.q,
        Flavor::TheoremB => step.q,
    };
    let cap = opts.prec + wx * (est_u + kv_bound) + wx;

    let proto = TruncSeries::zero(&field, &opts.upper_vars, w, cap);
    let g = monomial_unit(&proto, step.m, step.alpha, step.a_prime, cap)?;
    let h = monomial_unit(&proto, step.q, step.alpha, step.b_prime, cap)?;
    let big_u = frame.u.substitute_capped(&g, &h, cap)?;
    let mut big_v = frame.v.substitute_capped(&g, &h, cap)?;

    let k_u = big_u.x_order().ok_or_else(|| Error::precision(cap as i64, big_u.prec() as i64))? as u64;
    if !is_x_power_times_unit(&big_u, k_u as u32) {
        return Err(Error::InvalidFrame(format!("image of u is not x1^{k_u} times a unit")));
    }

    // v̄ = v - Σ e_i u^i, removing slices of v that are proportional to powers of u
    let mut normalization = Vec::new();
    loop {
        let k = big_v.x_order().ok_or_else(|| Error::precision(cap as i64, big_v.prec() as i64))? as u64;
        if k >= kv_bound || !k.is_multiple_of(k_u) {
            break;
        }
        let i = k / k_u;
        let ui = big_u.pow_capped(i, big_v.prec())?;
        let target = big_v.x_slice(k as u32);
        let basis = ui.x_slice(k as u32);
        let (&b0, &c_basis) = basis.iter().next().expect("u^i has its leading slice");
        let c_target = target.get(&b0).copied().unwrap_or(0);
        if c_target == 0 {
            break;
        }
        let e = field.mul(c_target, field.inv(c_basis).unwrap());
        let candidate = big_v.sub(&ui.scale(e))?;
        if candidate.x_order().map(|o| o as u64) <= Some(k) && candidate.x_slice(k as u32).len() >= target.len() {
            break;
        }
        normalization.push((i as u32, e));
        big_v = candidate;
    }
    let k_v = big_v.x_order().ok_or_else(|| Error::precision(cap as i64, big_v.prec() as i64))? as u64;
    if !is_x_power_times_unit(&big_v, k_v as u32) {
        return Err(Error::NotNormalizable(format!(
            "normalized image of v is not x1^{k_v} times a unit (slice {:?})",
            big_v.x_slice(k_v as u32).into_iter().take(4).collect::<Vec<_>>()
        )));
    }

    let g_xy = k_u.gcd(&k_v);
    let (m_bar, q_bar) = (k_u / g_xy, k_v / g_xy);
    let (c_prime, d_prime) = bezout(m_bar, q_bar)?;

    let su = ShiftedSeries::from_series(&big_u)?;
    let sv = ShiftedSeries::from_series(&big_v)?;
    let body_cap = su.body.prec().min(sv.body.prec());
    let translated = su.pow_capped(-(q_bar as i64), body_cap)?.mul(&sv.pow_capped(m_bar as i64, body_cap)?)?;
    debug_assert_eq!(translated.shift, (0, 0));
    let beta = translated.body.constant_term();
    if beta == 0 {
        return Err(Error::DegenerateTranslation);
    }
    let v1 = translated.body.sub(&translated.body.monomial_like((0, 0), beta, translated.body.prec()))?;
    let u1 = su
        .pow_capped(d_prime as i64, body_cap)?
        .mul(&sv.pow_capped(-(c_prime as i64), body_cap)?)?
        .into_series()?;

    let available = u1.prec().min(v1.prec());
    if available < opts.prec {
        return Err(Error::precision(opts.prec as i64, available as i64));
    }
    let u1 = u1.truncate(opts.prec);
    let v1 = v1.truncate(opts.prec);

    // re-verify u = u1^m̄ (v1+β)^c' and v̄ = u1^q̄ (v1+β)^d'
    let vb = v1.add(&v1.monomial_like((0, 0), beta, v1.prec()))?;
    let check = |lhs: &TruncSeries, e1: u64, e2: u64| -> Result<()> {
        let rhs = u1.pow_capped(e1, opts.prec)?.mul_capped(&vb.pow_capped(e2, opts.prec)?, opts.prec)?;
        let pr = lhs.prec().min(rhs.prec());
        if lhs.truncate(pr) != rhs.truncate(pr) {
            return Err(Error::FormulaMismatch("monomial relations between lower parameters do not re-verify".into()));
        }
        Ok(())
    };
    check(&big_u, m_bar, c_prime)?;
    check(&big_v, q_bar, d_prime)?;

    let mut done = step.clone();
    done.beta = Some(beta);
    let mut provenance = frame.provenance.clone();
    provenance.push(Provenance {
        step: done.clone(),
        input_jac_exp: frame.jac_exp,
        k_u,
        k_v,
        lower: (m_bar, q_bar, c_prime, d_prime),
        normalization,
    });
    let new_frame = ExtensionFrame::from_series(opts.level, frame.tier, opts.lower_params.clone(), u1, v1, provenance)?;
    Ok((new_frame, done))
}

fn run_checked(frame: &ExtensionFrame, step: &TransformStep, opts: &StepOptions, expected: ExtType) -> Result<StepOutcome> {
    if frame.ext_type == ExtType::Unclassified {
        let needed = frame.v.weights().of((0, frame.p())) + frame.v.weights().x as u64;
        if needed > frame.prec() {
            return Err(Error::PrecisionExhausted { needed: needed as i64, available: frame.prec() as i64 });
        }
    }
    if frame.ext_type != expected {
        return Err(Error::InvalidFrame(format!("step needs a {expected} arrow, got {}", frame.ext_type)));
    }
    step.check_invariants()?;
    let predicted = predict(step.flavor, step.p, frame.jac_exp, step.m, step.q)?;
    let (new_frame, done) = apply_step(frame, step, opts)?;
    match predicted {
        Predicted::Type0 => {
            if new_frame.ext_type != ExtType::Type0 {
                return Err(Error::FormulaMismatch(format!("predicted type 0, recomputed {}", new_frame.ext_type)));
            }
        }
        Predicted::Typed { ext_type, c1 } => {
            if new_frame.ext_type != ext_type || new_frame.jac_exp != c1 {
                return Err(Error::FormulaMismatch(format!(
                    "predicted {ext_type} with c1 = {c1}, recomputed {} with c1 = {}",
                    new_frame.ext_type, new_frame.jac_exp
                )));
            }
        }
    }
    Ok(StepOutcome { frame: new_frame, step: done, predicted })
}

/// Step from a type 1 arrow; the prediction is checked against the recomputed frame.
pub fn step_type1(frame: &ExtensionFrame, step: &TransformStep, opts: &StepOptions) -> Result<StepOutcome> {
    if step.flavor != Flavor::TheoremA {
        return Err(Error::InvalidStep("type 1 arrows take the first transform flavor".into()));
    }
    run_checked(frame, step, opts, ExtType::Type1)
}

/// Step from a type 2 arrow, using `y` itself as the second parameter.
pub fn step_type2(frame: &ExtensionFrame, step: &TransformStep, opts: &StepOptions) -> Result<StepOutcome> {
    if step.flavor != Flavor::TheoremB {
        return Err(Error::InvalidStep("type 2 arrows take the second transform flavor".into()));
    }
    run_checked(frame, step, opts, ExtType::Type2)
}

/// Takes `v` itself as the second upper parameter: solves `v(x, Y) = ȳ` for
/// `Y(x, ȳ)` and rewrites `u` in `(x, ȳ)`. The Jacobian exponent is unchanged
/// since `dx ∧ dȳ = ∂v/∂y · dx ∧ dy` with `∂v/∂y` a unit.
pub fn straighten_type2(frame: &ExtensionFrame) -> Result<ExtensionFrame> {
    let v = &frame.v;
    let field = frame.field().clone();
    let tau0 = v.coeff((0, 1));
    if tau0 == 0 || v.constant_term() != 0 {
        return Err(Error::InvalidFrame("second parameter is not y times a unit plus a multiple of x".into()));
    }
    let inv = field.inv(tau0).unwrap();
    let y = v.monomial_like((0, 1), 1, v.prec());
    let x = v.monomial_like((1, 0), 1, v.prec());
    let v_y = v.partial(Var::Y)?;
    // Newton on v(x, Y) = ȳ, doubling the known order each round
    let mut big_y = y.scale(inv);
    for _ in 0..64 {
        let resid = v.substitute(&x, &big_y)?.sub(&y)?;
        let slope = v_y.substitute(&x, &big_y)?.invert_unit()?;
        let next = big_y.sub(&resid.mul(&slope)?)?;
        let pr = next.prec().min(big_y.prec());
        let done = next.truncate(pr) == big_y.truncate(pr);
        big_y = next;
        if done {
            break;
        }
    }
    let u = frame.u.substitute(&x, &big_y)?;
    let v_new = u.monomial_like((0, 1), 1, u.prec());
    let mut out = ExtensionFrame::from_series(frame.level, frame.tier, frame.lower_params.clone(), u, v_new, frame.provenance.clone())?;
    out.defect = frame.defect;
    if out.jac_exp != frame.jac_exp {
        return Err(Error::FormulaMismatch(format!(
            "straightening changed the Jacobian exponent from {} to {}",
            frame.jac_exp, out.jac_exp
        )));
    }
    Ok(out)
}

/// Tries the nonzero field elements in order as translation constant.
pub fn step_any_alpha(
    frame: &ExtensionFrame,
    flavor: Flavor,
    m: u64,
    q: u64,
    opts: impl Fn(&TransformStep) -> StepOptions,
) -> Result<StepOutcome> {
    let field = frame.field().clone();
    let mut last = None;
    for alpha in field.nonzero() {
        let step = TransformStep::new(flavor, field.p(), m, q, alpha)?;
        let o = opts(&step);
        let r = match flavor {
            Flavor::TheoremA => step_type1(frame, &step, &o),
            Flavor::TheoremB => step_type2(frame, &step, &o),
        };
        match r {
            Err(e @ (Error::DegenerateTranslation | Error::NotNormalizable(_))) => last = Some(e),
            other => return other,
        }
    }
    Err(Error::FieldTooSmall {
        p: field.p(),
        n: field.n(),
        reason: format!("no translation constant works for m = {m}, q = {q}: {}", last.map(|e| e.to_string()).unwrap_or_default()),
    })
}

/// `R -> S -> T` as one arrow `R -> T`.
pub fn compose(lower: &ExtensionFrame, upper: &ExtensionFrame) -> Result<ExtensionFrame> {
    if **lower.upper_params() != upper.lower_params {
        return Err(Error::ParameterMismatch(format!(
            "upper parameters {:?} of the first arrow are not the lower parameters {:?} of the second",
            lower.upper_params(),
            upper.lower_params
        )));
    }
    let u = lower.u.substitute(&upper.u, &upper.v)?;
    let v = lower.v.substitute(&upper.u, &upper.v)?;
    let mut frame = match ExtensionFrame::from_series(lower.level, Tier::Composite, lower.lower_params.clone(), u.clone(), v.clone(), Vec::new()) {
        Err(Error::Indeterminate(_)) => {
            // J(T/R) = J(T/S) · J(S/R)∘(upper), and x_S = z^k · unit upstairs
            let (k, unit) = upper.u.x_ideal_exponent()?;
            if !unit {
                return Err(Error::Indeterminate("first upper parameter is not a power of x times a unit".into()));
            }
            let mut f = ExtensionFrame {
                level: lower.level,
                tier: Tier::Composite,
                lower_params: lower.lower_params.clone(),
                u,
                v,
                ext_type: ExtType::Unclassified,
                jac_exp: upper.jac_exp + k as u64 * lower.jac_exp,
                provenance: Vec::new(),
                defect: None,
            };
            f.ext_type = classify_type(&f);
            f
        }
        other => other?,
    };
    frame.defect = match (lower.defect, upper.defect) {
        (Some(a), Some(b)) => Some(a.tower(&b)),
        _ => None,
    };
    Ok(frame)
}

/// Re-expresses a frame after the change of upper parameter `y = ȳ + Σ e_i x^i`.
pub fn shift_upper_y(frame: &ExtensionFrame, poly: &[(u32, u32)]) -> Result<ExtensionFrame> {
    if poly.is_empty() {
        return Ok(frame.clone());
    }
    let like = &frame.u;
    let cap = frame.prec();
    let x = like.monomial_like((1, 0), 1, cap);
    let mut y = like.monomial_like((0, 1), 1, cap);
    for &(i, e) in poly {
        y = y.add(&like.monomial_like((i, 0), e, cap))?;
    }
    let u = frame.u.substitute_capped(&x, &y, cap)?;
    let v = frame.v.substitute_capped(&x, &y, cap)?;
    let mut out = ExtensionFrame::from_series(frame.level, frame.tier, frame.lower_params.clone(), u, v, frame.provenance.clone())?;
    out.defect = frame.defect;
    Ok(out)
}

/// Clears the pure part of `v` below `j * m <= kv` by upper changes
/// `y = ȳ + b x^k`, which add `σ0 b^p x^(pk)` since `(ȳ + b x^k)^p = ȳ^p + b^p x^(pk)`.
/// Only exponents divisible by `p` can be cleared this way.
pub fn clear_pure_powers(frame: &ExtensionFrame, m: u64, kv: u64) -> Result<ExtensionFrame> {
    let field = frame.field().clone();
    let p = field.p();
    let root_exp = (p as u64).pow(field.n() - 1);
    let mut out = frame.clone();
    let mut last = 0u32;
    loop {
        let Some(&(j, fj)) = out.v.pure_x_part().first() else { return Ok(out) };
        if j as u64 * m > kv {
            return Ok(out);
        }
        let sigma0 = out.v.coeff((0, p));
        let need = out.v.weights().of((0, p)).max(out.v.weights().of((j, 0)));
        if need >= out.prec() {
            return Err(Error::PrecisionExhausted { needed: need as i64 + 1, available: out.prec() as i64 });
        }
        let why = if j % p != 0 {
            "is not a p-th power"
        } else if sigma0 == 0 {
            "has no y^p term to absorb it"
        } else if j <= last {
            "survives clearing"
        } else {
            ""
        };
        if !why.is_empty() {
            return Err(Error::SideCondition(format!(
                "pure term x^{j} of the second parameter lies below {kv}/{m} and {why}"
            )));
        }
        last = j;
        let b = field.pow(field.neg(field.mul(fj, field.inv(sigma0).unwrap())), root_exp);
        out = shift_upper_y(&out, &[(j / p, b)])?;
    }
}

/// One configuration of the oracle sweep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleRecord {
    pub p: u32,
    pub flavor: Flavor,
    pub ratio: u64,
    pub m: u64,
    pub q: u64,
    pub predicted: Predicted,
    pub computed_type: ExtType,
    pub computed_c1: u64,
    pub agrees: bool,
}

/// Runs both step engines on synthetic arrows for all coprime `m, q <= bound`
/// and Jacobian ratios `1..=max_ratio`, comparing predictions with recomputation.
/// Configurations without a type 2 arrow of the requested exponent are skipped.
pub fn oracle_sweep(p: u32, max_ratio: u64, bound: u64, prec_limit: u64) -> Result<Vec<OracleRecord>> {
    let field = Field::prime(p)?;
    let mut out = Vec::new();
    for flavor in [Flavor::TheoremA, Flavor::TheoremB] {
        for ratio in 1..=max_ratio {
            let c_bar = ratio * (p as u64 - 1);
            let frame = match flavor {
                Flavor::TheoremA => synthetic_type1(&field, c_bar, prec_limit)?,
                Flavor::TheoremB => match synthetic_type2(&field, c_bar, prec_limit) {
                    Ok(f) => f,
                    Err(Error::InvalidFrame(_)) => continue,
                    Err(e) => return Err(e),
                },
            };
            for m in 1..=bound {
                for q in 1..=bound {
                    if m.gcd(&q) != 1 || (flavor == Flavor::TheoremA && m == 1) {
                        continue;
                    }
                    let predicted = predict(flavor, p, c_bar, m, q)?;
                    let opts = |s: &TransformStep| {
                        let mut o = StepOptions::standard(&frame, s);
                        o.prec = o.prec.min(prec_limit);
                        o
                    };
                    let (computed_type, computed_c1, agrees) = match step_any_alpha(&frame, flavor, m, q, opts) {
                        Ok(o) => (o.frame.ext_type, o.frame.jac_exp, true),
                        Err(Error::FormulaMismatch(_)) => {
                            let step = TransformStep::new(flavor, p, m, q, 1)?;
                            let (f1, _) = apply_step(&frame, &step, &opts(&step))?;
                            (f1.ext_type, f1.jac_exp, false)
                        }
                        Err(e) => return Err(e),
                    };
                    out.push(OracleRecord { p, flavor, ratio, m, q, predicted, computed_type, computed_c1, agrees });
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(p: u32) -> Arc<Field> {
        Field::prime(p).unwrap()
    }

    #[test]
    fn bezout_is_minimal() {
        assert_eq!(bezout(3, 5).unwrap(), (1, 2));
        assert_eq!(bezout(2, 1).unwrap(), (1, 1));
        assert_eq!(bezout(1, 7).unwrap(), (0, 1));
        assert!(bezout(4, 6).is_err());
        for m in 1..15u64 {
            for q in 1..15u64 {
                if let Ok((a, b)) = bezout(m, q) {
                    assert_eq!(m * b - q * a, 1);
                    assert!(a < m.max(1));
                }
            }
        }
    }

    #[test]
    fn bootstrap_examples() {
        let f = bootstrap_artin_schreier(3, 1, 1, 16).unwrap();
        assert_eq!(f.v, TruncSeries::from_ints(f.field(), f.upper_params(), &[((0, 3), 1), ((2, 1), -1)], 16).unwrap());
        assert_eq!(f.jac_exp, 2);
        assert_eq!(f.ext_type, ExtType::Type1);
        let f2 = bootstrap_artin_schreier(2, 1, 1, 16).unwrap();
        assert_eq!(f2.v.to_text(), "1 * x * y + 1 * y^2 + O(16)");
        assert_eq!(f2.jac_exp, 1);
        assert_eq!(bootstrap_artin_schreier(2, 1, 3, 16).unwrap().jac_exp, 3);
        assert_eq!(bootstrap_artin_schreier(3, 1, 2, 16).unwrap().jac_exp, 4);
        assert!(matches!(bootstrap_artin_schreier(3, 1, 2, 3), Err(Error::PrecisionExhausted { .. })));
        let d = f.defect.unwrap();
        assert_eq!((d.degree, d.e, d.f, d.g, d.defect), (3, 1, 1, 1, 3));
    }

    #[test]
    fn classify_examples() {
        let f = k(3);
        assert_eq!(identity_frame(&f, 8).unwrap().ext_type, ExtType::Type0);
        let vs = vars("x", "y");
        let k2 = k(2);
        let u = TruncSeries::from_ints(&k2, &vs, &[((2, 0), 1)], 8).unwrap();
        let v = TruncSeries::from_ints(&k2, &vs, &[((0, 1), 1)], 8).unwrap();
        let frame = ExtensionFrame {
            level: 0,
            tier: Tier::Lower,
            lower_params: param_names("u", "v"),
            u,
            v,
            ext_type: ExtType::Unclassified,
            jac_exp: 0,
            provenance: vec![],
            defect: None,
        };
        assert_eq!(classify_type(&frame), ExtType::Type2);
        // naive determinant vanishes in characteristic 2
        assert!(jacobian_of_frame(&frame).unwrap().is_zero());
        assert!(matches!(jacobian_exponent(&frame), Err(Error::Indeterminate(_))));
    }

    #[test]
    fn jacobian_examples() {
        let f = k(3);
        let id = identity_frame(&f, 8).unwrap();
        assert_eq!(jacobian_of_frame(&id).unwrap().to_text(), "1 + O(7)");
        assert_eq!(id.jac_exp, 0);
        let b = bootstrap_artin_schreier(3, 1, 1, 12).unwrap();
        let j = jacobian_of_frame(&b).unwrap();
        assert_eq!(j.terms().iter().map(|(&e, &c)| (e, c)).collect::<Vec<_>>(), vec![((2, 0), 2)]);
    }

    #[test]
    fn transform_step_invariants() {
        let s = TransformStep::new(Flavor::TheoremA, 2, 2, 1, 1).unwrap();
        assert_eq!((s.sigma, s.m_bar, s.q_bar), (2, 1, 1));
        let s = TransformStep::new(Flavor::TheoremB, 2, 3, 2, 1).unwrap();
        assert_eq!((s.sigma, s.m_bar, s.q_bar), (2, 3, 1));
        assert!(TransformStep::new(Flavor::TheoremA, 2, 1, 1, 1).is_err());
        assert!(TransformStep::new(Flavor::TheoremA, 2, 4, 2, 1).is_err());
        assert!(TransformStep::new(Flavor::TheoremA, 2, 3, 5, 0).is_err());
    }

    #[test]
    fn predictions() {
        assert_eq!(predict(Flavor::TheoremA, 2, 2, 3, 5).unwrap(), Predicted::Typed { ext_type: ExtType::Type1, c1: 1 });
        assert_eq!(predict(Flavor::TheoremA, 2, 2, 2, 1).unwrap(), Predicted::Typed { ext_type: ExtType::Type2, c1: 4 });
        assert_eq!(predict(Flavor::TheoremA, 2, 1, 2, 3).unwrap(), Predicted::Type0);
        assert_eq!(predict(Flavor::TheoremB, 2, 4, 3, 5).unwrap(), Predicted::Typed { ext_type: ExtType::Type1, c1: 9 });
        assert_eq!(predict(Flavor::TheoremB, 2, 4, 3, 2).unwrap(), Predicted::Typed { ext_type: ExtType::Type2, c1: 10 });
    }

    #[test]
    fn step_examples_match_oracle() {
        let f = k(2);
        let cases = [
            (Flavor::TheoremA, 2u64, 3u64, 5u64, ExtType::Type1, Some(1u64)),
            (Flavor::TheoremA, 2, 2, 1, ExtType::Type2, Some(4)),
            (Flavor::TheoremA, 1, 2, 3, ExtType::Type0, None),
            (Flavor::TheoremB, 4, 3, 5, ExtType::Type1, Some(9)),
            (Flavor::TheoremB, 4, 3, 2, ExtType::Type2, Some(10)),
        ];
        for (flavor, ratio, m, q, ty, c1) in cases {
            let frame = match flavor {
                Flavor::TheoremA => synthetic_type1(&f, ratio, 64).unwrap(),
                Flavor::TheoremB => synthetic_type2(&f, ratio, 64).unwrap(),
            };
            let out = step_any_alpha(&frame, flavor, m, q, |s| StepOptions::standard(&frame, s)).unwrap();
            assert_eq!(out.frame.ext_type, ty, "{flavor:?} {m} {q}");
            if let Some(c1) = c1 {
                assert_eq!(out.frame.jac_exp, c1);
            }
        }
    }

    #[test]
    fn type2_boundary_is_unrealizable() {
        // c̄/(p-1) = 1 gives c̄ = p - 1 < p
        assert!(matches!(synthetic_type2(&k(2), 1, 32), Err(Error::InvalidFrame(_))));
        assert!(matches!(synthetic_type2(&k(3), 2, 32), Err(Error::InvalidFrame(_))));
        assert!(synthetic_type2(&k(3), 4, 32).is_ok());
    }

    #[test]
    fn degenerate_type2_uses_provenance() {
        let f = k(2);
        let frame = synthetic_type1(&f, 2, 64).unwrap();
        let out = step_any_alpha(&frame, Flavor::TheoremA, 2, 1, |s| StepOptions::standard(&frame, s)).unwrap();
        let pv = out.frame.provenance.last().unwrap();
        assert_eq!(chain_exponent(pv).unwrap(), out.frame.jac_exp);
    }

    #[test]
    fn compose_with_identity() {
        let f = k(3);
        let b = bootstrap_artin_schreier(3, 1, 1, 20).unwrap();
        let mut id = identity_frame(&f, 20).unwrap();
        id.lower_params = param_names("s", "t");
        id.u = id.u.rename(&vars("u", "v"));
        id.v = id.v.rename(&vars("u", "v"));
        let mut upper_id = identity_frame(&f, 20).unwrap();
        upper_id.lower_params = param_names("x", "y");
        let c = compose(&b, &upper_id).unwrap();
        assert_eq!(c.u, b.u);
        assert_eq!(c.v, b.v);
        assert_eq!(c.jac_exp, b.jac_exp);
        let c2 = compose(&id, &b).unwrap();
        assert_eq!(c2.v, b.v);
        assert!(matches!(compose(&b, &b), Err(Error::ParameterMismatch(_))));
    }

    #[test]
    fn straightening_keeps_exponent() {
        let f = k(2);
        let vs = vars("x", "y");
        // u = x^2 (1 + y), v = x + y + xy
        let u = TruncSeries::from_ints(&f, &vs, &[((2, 0), 1), ((2, 1), 1)], 24).unwrap();
        let v = TruncSeries::from_ints(&f, &vs, &[((1, 0), 1), ((0, 1), 1), ((1, 1), 1)], 24).unwrap();
        let frame = ExtensionFrame::from_series(0, Tier::Lower, param_names("u", "v"), u, v, vec![]).unwrap();
        let s = straighten_type2(&frame).unwrap();
        assert_eq!(s.v.terms().len(), 1);
        assert_eq!(s.jac_exp, frame.jac_exp);
        assert_eq!(s.ext_type, ExtType::Type2);
        // u(x, Y(x, v(x, y))) = u(x, y)
        let x = frame.u.monomial_like((1, 0), 1, 24);
        let back = s.u.substitute(&x, &frame.v).unwrap();
        let pr = back.prec().min(frame.u.prec());
        assert_eq!(back.truncate(pr), frame.u.truncate(pr));
    }

    #[test]
    fn defect_bookkeeping() {
        let a = DefectData::artin_schreier_defect(2);
        let t = a.tower(&a);
        assert_eq!(t.degree, 4);
        t.check(2).unwrap();
        assert!(DefectData::new(2, 4, 1, 1, 1, 3).is_err());
        assert!(DefectData::new(3, 6, 2, 1, 1, 3).is_ok());
    }
}
