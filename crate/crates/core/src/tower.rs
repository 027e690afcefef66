//! The two-level tower `R_i -> S_i -> T_i` built by linked quadratic-transform
//! steps, starting from two Artin-Schreier bootstraps.
//!
//! All step parameters are planned up front from the closed-form exponent
//! recursion; the frames are then computed explicitly and every exponent is
//! recomputed from the series and compared with the plan.

use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::frames::{
    apply_step, bootstrap_with, clear_pure_powers, compose, predict, shift_upper_y, step_any_alpha, straighten_type2, step_type1, step_type2, ExtType,
    ExtensionFrame, Flavor, Predicted, StepOptions, StepOutcome, Tier, TransformStep,
};
use crate::series::{vars, Weights};
use crate::valuation::{rat_string, ValueLedger};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TowerConfig {
    pub p: u32,
    pub n: u32,
    pub e: u64,
    /// Number of double steps after the preamble.
    pub steps: u32,
    pub lambda_max: u32,
    /// Largest working precision any frame may need.
    pub prec: u64,
}

impl Default for TowerConfig {
    fn default() -> Self {
        TowerConfig { p: 2, n: 1, e: 1, steps: 6, lambda_max: 4, prec: 1 << 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    EvenStep,
    OddStep,
}

/// Parameters of one step, chosen as the smallest `λ`, then smallest `q`, with
/// `K > q / p^λ > K - width` and `p ∤ q`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepChoice {
    pub lambda: u32,
    pub q: u64,
    pub which_level: Parity,
    /// `p^λ`
    pub m: u64,
    pub upper: String,
    pub lower: String,
    pub ratio: String,
}

/// Searches `λ = 2..=lambda_max` for the open interval `(K - width, K)`.
pub fn choose_step_params(p: u32, k: u64, width: &BigRational, lambda_max: u32, which_level: Parity) -> Result<StepChoice> {
    choose_step_params_from(p, k, width, 2, lambda_max, which_level)
}

pub fn choose_step_params_from(
    p: u32,
    k: u64,
    width: &BigRational,
    lambda_min: u32,
    lambda_max: u32,
    which_level: Parity,
) -> Result<StepChoice> {
    let kk = BigRational::from_integer(BigInt::from(k));
    let low = &kk - width;
    let mut widths = Vec::new();
    for lambda in lambda_min.max(2)..=lambda_max {
        let m = (p as u64).checked_pow(lambda).ok_or_else(|| Error::SearchExhausted("p^λ overflows".into()))?;
        let mb = BigInt::from(m);
        let lo = (&low * &mb).floor().to_integer();
        let mut q = lo + BigInt::one();
        if q < BigInt::one() {
            q = BigInt::one();
        }
        let hi = BigInt::from(k) * &mb;
        widths.push(format!("λ={lambda}: ({}, {})", rat_string(&(&low * &mb)), hi));
        while q < hi {
            if &q % p != BigInt::zero() {
                let qv = u64::try_from(&q).map_err(|_| Error::SearchExhausted("q overflows".into()))?;
                let ratio = BigRational::new(q.clone(), mb.clone());
                debug_assert!(ratio < kk && ratio > low);
                return Ok(StepChoice {
                    lambda,
                    q: qv,
                    which_level,
                    m,
                    upper: rat_string(&kk),
                    lower: rat_string(&low),
                    ratio: rat_string(&ratio),
                });
            }
            q += 1;
        }
    }
    Err(Error::SearchExhausted(format!(
        "no (λ, q) with λ <= {lambda_max} in ({}, {k}); scaled intervals: {}",
        rat_string(&low),
        if widths.is_empty() { "none".to_string() } else { widths.join(", ") }
    )))
}

/// Free choices left open by the construction, searched deterministically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanChoices {
    /// `(m, q)` of the first lower step, with `gcd(m, pq) = p`.
    pub pre_lower: (u64, u64),
    /// `(m_0, q_0)` of the linked step reaching level 0, with `gcd(p m_0, q_0) = 1`.
    pub pre_link: (u64, u64),
    /// Per-level minimum for `λ`, as `(level, λ)`.
    pub lambda_min: Vec<(i64, u32)>,
    /// Per-level precision multiplier, as `(level, factor)`; straightening and
    /// changes of the middle parameters cost precision.
    pub prec_boost: Vec<(i64, u64)>,
    /// Per-level, per-tier cap on the y-weight of frames, as `(level, upper, w_y)`.
    /// A lighter `y` keeps more of its powers, so a later change `y = ȳ + h(x)`
    /// loses no precision.
    #[serde(default)]
    pub y_weight: Vec<(i64, bool, u32)>,
}

impl PlanChoices {
    fn lambda_min(&self, level: i64) -> u32 {
        self.lambda_min.iter().find(|(l, _)| *l == level).map_or(2, |&(_, v)| v.max(2))
    }

    fn boost(&self, level: i64) -> u64 {
        self.prec_boost.iter().find(|(l, _)| *l == level).map_or(1, |&(_, f)| f)
    }

    fn y_weight(&self, level: i64, upper: bool) -> Option<u32> {
        self.y_weight.iter().find(|&&(l, u, _)| l == level && u == upper).map(|&(_, _, w)| w)
    }

    fn cap_y_weight(&mut self, level: i64, upper: bool, w: u32) {
        let w = self.y_weight(level, upper).map_or(w, |old| old.min(w));
        self.y_weight.retain(|&(l, u, _)| !(l == level && u == upper));
        self.y_weight.push((level, upper, w));
    }

    fn raise_boost(&mut self, level: i64, factor: u64) -> u64 {
        let next = self.boost(level) * factor.max(2).next_power_of_two();
        self.prec_boost.retain(|(l, _)| *l != level);
        self.prec_boost.push((level, next));
        self.prec_boost.sort();
        next
    }

    fn bump(&mut self, level: i64) -> u32 {
        let next = self.lambda_min(level) + 1;
        self.lambda_min.retain(|(l, _)| *l != level);
        self.lambda_min.push((level, next));
        self.lambda_min.sort();
        next
    }
}

/// Candidates for the two preamble steps, smallest first.
pub fn preamble_candidates(p: u32, e: u64, limit: usize) -> Vec<PlanChoices> {
    let pp = p as u64;
    let mut lower = Vec::new();
    let mut m = pp;
    while lower.len() < limit {
        for q in 1..m {
            if num_integer::gcd(m, pp * q) == pp && q < e * m && lower.len() < limit {
                lower.push((m, q));
            }
        }
        m += pp;
    }
    let mut link = Vec::new();
    let mut total = 2;
    while link.len() < limit {
        for m0 in 1..total {
            let q0 = total - m0;
            if num_integer::gcd(pp * m0, q0) == 1 && q0 < e * pp * m0 && link.len() < limit {
                link.push((m0, q0));
            }
        }
        total += 1;
    }
    let mut out = Vec::new();
    for &pre_lower in &lower {
        for &pre_link in &link {
            out.push(PlanChoices { pre_lower, pre_link, lambda_min: Vec::new(), prec_boost: Vec::new(), y_weight: Vec::new() });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierStep {
    pub flavor: Flavor,
    pub m: u64,
    pub q: u64,
}

impl TierStep {
    fn weights(&self) -> Weights {
        Weights::new(self.m as u32, self.q as u32)
    }
    /// x1-orders of the images of `u` and `v`.
    fn orders(&self, p: u32) -> (u64, u64) {
        match self.flavor {
            Flavor::TheoremA => (self.m, p as u64 * self.q),
            Flavor::TheoremB => (p as u64 * self.m, self.q),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedTransition {
    pub from: i64,
    pub lower_tier: TierStep,
    pub upper_tier: Option<TierStep>,
    pub choice: Option<StepChoice>,
}

/// Predicted exponents, step parameters and precisions for every level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub choices: PlanChoices,
    pub first_level: i64,
    pub last_level: i64,
    /// Indexed by `level - first_level`; the last entry only supplies gradings.
    pub transitions: Vec<PlannedTransition>,
    pub c: Vec<u64>,
    pub c_prime: Vec<Option<u64>>,
    pub prec_rs: Vec<u64>,
    pub prec_st: Vec<Option<u64>>,
}

const FIRST: i64 = -2;

fn idx(level: i64) -> usize {
    (level - FIRST) as usize
}

fn predicted_c(flavor: Flavor, p: u32, c: u64, m: u64, q: u64) -> Result<u64> {
    match predict(flavor, p, c, m, q)? {
        Predicted::Typed { c1, .. } => Ok(c1),
        Predicted::Type0 => Err(Error::InvalidStep(format!("planned step (m, q) = ({m}, {q}) leaves the tower")))
    }
}

impl Plan {
    pub fn new(cfg: &TowerConfig, choices: &PlanChoices) -> Result<Self> {
        let p = cfg.p;
        let pp = p as u64;
        let last = 2 * cfg.steps as i64;
        let base = cfg.e * (pp - 1);
        let mut c = vec![base];
        let mut c_prime = vec![None, Some(base)];
        let mut transitions = Vec::new();

        // smallest (m, q) with gcd(m, pq) = p, then the linked (1, 1) / (p, 1) step
        let (ma, qa) = choices.pre_lower;
        let (m0, q0) = choices.pre_link;
        let a = TierStep { flavor: Flavor::TheoremA, m: ma, q: qa };
        transitions.push(PlannedTransition { from: -2, lower_tier: a, upper_tier: None, choice: None });
        c.push(predicted_c(a.flavor, p, c[0], a.m, a.q)?);
        let b = TierStep { flavor: Flavor::TheoremB, m: m0, q: q0 };
        let t = TierStep { flavor: Flavor::TheoremA, m: pp * m0, q: q0 };
        transitions.push(PlannedTransition { from: -1, lower_tier: b, upper_tier: Some(t), choice: None });
        c.push(predicted_c(b.flavor, p, c[1], b.m, b.q)?);
        c_prime.push(Some(predicted_c(t.flavor, p, base, t.m, t.q)?));

        let mut cum = BigInt::one();
        let mut cum_prime = BigInt::one();
        for r in 0..=last {
            let i = idx(r);
            let (cr, cpr) = (c[i], c_prime[i].unwrap());
            let two = BigInt::from(2).pow((r + 1) as u32);
            let (lower_tier, upper_tier, choice) = if r % 2 == 0 {
                let width = BigRational::new(cum.clone(), two);
                let ch = choose_step_params_from(p, cr / (pp - 1), &width, choices.lambda_min(r), cfg.lambda_max, Parity::EvenStep)?;
                let lt = TierStep { flavor: Flavor::TheoremA, m: ch.m, q: ch.q };
                let ut = TierStep { flavor: Flavor::TheoremB, m: ch.m / pp, q: ch.q };
                (lt, ut, ch)
            } else {
                let width = BigRational::new(cum_prime.clone(), two);
                let ch = choose_step_params_from(p, cpr / (pp - 1), &width, choices.lambda_min(r), cfg.lambda_max, Parity::OddStep)?;
                let ut = TierStep { flavor: Flavor::TheoremA, m: ch.m, q: ch.q };
                let lt = TierStep { flavor: Flavor::TheoremB, m: ch.m / pp, q: ch.q };
                (lt, ut, ch)
            };
            transitions.push(PlannedTransition { from: r, lower_tier, upper_tier: Some(upper_tier), choice: Some(choice) });
            if r < last {
                c.push(predicted_c(lower_tier.flavor, p, cr, lower_tier.m, lower_tier.q)?);
                c_prime.push(Some(predicted_c(upper_tier.flavor, p, cpr, upper_tier.m, upper_tier.q)?));
                cum *= lower_tier.m;
                cum_prime *= upper_tier.m;
            }
        }

        let n = c.len();
        let floor = |cc: u64, s: &TierStep| (cc * s.m + s.q).max(pp * s.q) + s.m + s.q + 2;
        let mut prec_rs = vec![0u64; n];
        let mut prec_st = vec![None; n];
        // the top level is only classified, in unit weights
        prec_rs[n - 1] = c[n - 1] + pp + 4;
        prec_st[n - 1] = Some(c_prime[n - 1].unwrap() + pp + 4);
        let x_weight = |i: usize, t: &TierStep| if i == n - 1 { 1 } else { t.m };
        for i in (0..n - 1).rev() {
            let s = &transitions[i].lower_tier;
            let next = &transitions[i + 1].lower_tier;
            let (ku, kv) = s.orders(p);
            prec_rs[i] = floor(c[i], s).max(prec_rs[i + 1].div_ceil(x_weight(i + 1, next)) + ku + kv + 2) * choices.boost(i as i64 + FIRST);
            if let (Some(s), Some(next), Some(c1)) = (&transitions[i].upper_tier, &transitions[i + 1].upper_tier, c_prime[i]) {
                let (ku, kv) = s.orders(p);
                let need = floor(c1, s).max(prec_st[i + 1].unwrap().div_ceil(x_weight(i + 1, next)) + ku + kv + 2);
                prec_st[i] = Some(need * choices.boost(i as i64 + FIRST));
            }
        }
        Ok(Plan { choices: choices.clone(), first_level: FIRST, last_level: last, transitions, c, c_prime, prec_rs, prec_st })
    }

    pub fn transition(&self, level: i64) -> Result<&PlannedTransition> {
        self.transitions.get(idx(level)).ok_or(Error::LevelOutOfRange(idx(level)))
    }

    /// Largest working precision over all frames.
    pub fn max_prec(&self) -> u64 {
        self.prec_rs.iter().copied().chain(self.prec_st.iter().flatten().copied()).max().unwrap_or(0)
    }
}

fn name(letter: &str, level: i64) -> String {
    if level < 0 {
        format!("{letter}m{}", -level)
    } else {
        format!("{letter}{level}")
    }
}

fn names(a: &str, b: &str, level: i64) -> [String; 2] {
    [name(a, level), name(b, level)]
}

/// `ord f > 2 k_v / m` for the pure-`x` part `f` of the second parameter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SideCondition {
    pub level: i64,
    pub tier: Tier,
    /// `None` when the pure part vanishes to precision.
    pub order: Option<u64>,
    pub bound: String,
    pub holds: bool,
    /// False when normalizing only moves the bottom ring's parameters, so a
    /// failure is harmless.
    #[serde(default = "yes")]
    pub required: bool,
}

fn yes() -> bool {
    true
}

fn side_condition(frame: &ExtensionFrame, s: &TransformStep) -> SideCondition {
    let kv = match s.flavor {
        Flavor::TheoremA => s.p as u64 * s.q,
        Flavor::TheoremB => s.q,
    };
    let order = frame.v.pure_x_part().first().map(|&(a, _)| a as u64);
    let holds = order.is_none_or(|o| o * s.m > kv);
    SideCondition {
        level: frame.level,
        tier: frame.tier,
        order,
        bound: rat_string(&BigRational::new(BigInt::from(kv), BigInt::from(s.m))),
        holds,
        required: true,
    }
}

/// The two steps that move both tiers from `from` to `from + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkedStep {
    pub from: i64,
    pub choice: Option<StepChoice>,
    pub lower: TransformStep,
    pub upper: Option<TransformStep>,
    /// Change `y = ȳ + Σ e_i x^i` forced on the middle ring by the upper step.
    pub middle_shift: Vec<(u32, u32)>,
}

#[derive(Debug, Clone)]
pub struct TowerState {
    pub config: TowerConfig,
    pub field: Arc<Field>,
    pub plan: Plan,
    /// Current level; frames exist for all levels up to it.
    pub level: i64,
    /// `R_i -> S_i` for `i >= -2`, indexed by `i + 2`.
    pub frames_rs: Vec<ExtensionFrame>,
    /// `S_i -> T_i` for `i >= -1`, indexed by `i + 2` (slot 0 unused).
    pub frames_st: Vec<Option<ExtensionFrame>>,
    /// `R_i -> T_i` for `i >= 0`, indexed by `i`.
    pub frames_rt: Vec<ExtensionFrame>,
    pub steps: Vec<LinkedStep>,
    pub nu: ValueLedger,
    pub omega: ValueLedger,
    pub mu: ValueLedger,
    pub side_conditions: Vec<SideCondition>,
    /// Largest planned precision left unused by the run.
    pub prec_budget: u64,
}

impl TowerState {
    pub fn p(&self) -> u32 {
        self.config.p
    }

    pub fn rs(&self, level: i64) -> Result<&ExtensionFrame> {
        self.frames_rs.get(idx(level)).ok_or(Error::LevelOutOfRange(idx(level)))
    }

    pub fn st(&self, level: i64) -> Result<&ExtensionFrame> {
        self.frames_st.get(idx(level)).and_then(|f| f.as_ref()).ok_or(Error::LevelOutOfRange(idx(level)))
    }

    pub fn rt(&self, level: i64) -> Result<&ExtensionFrame> {
        usize::try_from(level).ok().and_then(|l| self.frames_rt.get(l)).ok_or(Error::LevelOutOfRange(level.max(0) as usize))
    }

    /// `R_i -> T_i` for every level `0..=self.level`, from the final coordinates.
    pub fn fill_composites(&mut self) -> Result<()> {
        self.frames_rt.clear();
        for l in 0..=self.level {
            let c = compose(self.rs(l)?, self.st(l)?)?;
            self.frames_rt.push(c);
        }
        Ok(())
    }

    fn capped(&self, w: Weights, level: i64, upper: bool) -> Weights {
        if level == self.plan.last_level {
            return Weights::default();
        }
        match self.plan.choices.y_weight(level, upper) {
            Some(cap) if cap < w.y => Weights::new(w.x, cap.max(1)),
            _ => w,
        }
    }

    fn options(&self, level: i64, tier: Tier) -> Result<StepOptions> {
        let tr = self.plan.transition(level)?;
        let i = idx(level);
        Ok(match tier {
            Tier::Lower => StepOptions {
                weights: self.capped(tr.lower_tier.weights(), level, false),
                prec: self.plan.prec_rs[i],
                upper_vars: vars(&name("x", level), &name("y", level)),
                lower_params: names("u", "v", level),
                level,
            },
            _ => StepOptions {
                weights: self.capped(tr.upper_tier.as_ref().ok_or(Error::LevelOutOfRange(i))?.weights(), level, true),
                prec: self.plan.prec_st[i].ok_or(Error::LevelOutOfRange(i))?,
                upper_vars: vars(&name("z", level), &name("w", level)),
                lower_params: names("x", "y", level),
                level,
            },
        })
    }
}

fn run_flavor(frame: &ExtensionFrame, step: &TransformStep, opts: &StepOptions) -> Result<StepOutcome> {
    match step.flavor {
        Flavor::TheoremA => step_type1(frame, step, opts),
        Flavor::TheoremB => step_type2(frame, step, opts),
    }
}

fn expect_type(frame: &ExtensionFrame, t: ExtType) -> Result<()> {
    if frame.ext_type != t {
        return Err(Error::FormulaMismatch(format!(
            "level {} {:?} arrow is {}, expected {t}",
            frame.level, frame.tier, frame.ext_type
        )));
    }
    Ok(())
}

/// Errors after which a different plan may still succeed.
fn retryable(e: &Error) -> bool {
    matches!(e, Error::NotNormalizable(_) | Error::FieldTooSmall { .. } | Error::DegenerateTranslation | Error::SideCondition(_))
}

/// Bootstraps and the steps up to `R_0 -> S_0 -> T_0`, trying the preamble
/// candidates in order.
pub fn preamble(config: &TowerConfig) -> Result<TowerState> {
    let mut last = None;
    for choices in preamble_candidates(config.p, config.e, PREAMBLE_CANDIDATES) {
        match preamble_with(config, &choices) {
            Err(e) if retryable(&e) => last = Some(e),
            other => return other,
        }
    }
    Err(last.unwrap_or_else(|| Error::SearchExhausted("no preamble candidates".into())))
}

const PREAMBLE_CANDIDATES: usize = 6;

pub fn preamble_with(config: &TowerConfig, choices: &PlanChoices) -> Result<TowerState> {
    let field = Field::new(config.p, config.n)?;
    let p = config.p as u64;
    if config.e == 0 {
        return Err(Error::InvalidStep("e must be positive".into()));
    }
    let bootstrap_need = p.max(config.e * (p - 1) + 1) * p;
    if config.prec < bootstrap_need {
        return Err(Error::precision(bootstrap_need as i64, config.prec as i64));
    }
    let plan = Plan::new(config, choices)?;
    let needed = plan.max_prec();
    if needed > config.prec {
        return Err(Error::precision(needed as i64, config.prec as i64));
    }
    let mut state = TowerState {
        config: config.clone(),
        field: field.clone(),
        level: -2,
        frames_rs: Vec::new(),
        frames_st: Vec::new(),
        frames_rt: Vec::new(),
        steps: Vec::new(),
        nu: ValueLedger::new(),
        omega: ValueLedger::new(),
        mu: ValueLedger::new(),
        side_conditions: Vec::new(),
        prec_budget: config.prec - needed,
        plan,
    };

    let o = state.options(-2, Tier::Lower)?;
    let r2 = bootstrap_with(&field, config.e, o.prec, o.weights, -2, Tier::Lower, ("um2", "vm2"), ("xm2", "ym2"))?;
    expect_type(&r2, ExtType::Type1)?;
    state.frames_rs.push(r2);
    state.frames_st.push(None);

    // R_{-2} -> R_{-1}: nothing above yet, so any translation constant will do
    let tr = state.plan.transition(-2)?.clone();
    let next = state.options(-1, Tier::Lower)?;
    let r2 = state.rs(-2)?.clone();
    let cond = side_condition(&r2, &TransformStep::new(tr.lower_tier.flavor, config.p, tr.lower_tier.m, tr.lower_tier.q, 1)?);
    check_side(&cond)?;
    state.side_conditions.push(cond);
    let out = step_any_alpha(&r2, tr.lower_tier.flavor, tr.lower_tier.m, tr.lower_tier.q, |_| next.clone())?;
    expect_type(&out.frame, ExtType::Type2)?;
    // v itself becomes the second parameter of S_{-1}; the bootstrap above uses it
    state.frames_rs.push(straighten_type2(&out.frame)?);
    state.steps.push(LinkedStep { from: -2, choice: None, lower: out.step, upper: None, middle_shift: Vec::new() });

    let o = state.options(-1, Tier::Upper)?;
    let t1 = bootstrap_with(&field, config.e, o.prec, o.weights, -1, Tier::Upper, ("xm1", "ym1"), ("zm1", "wm1"))?;
    expect_type(&t1, ExtType::Type1)?;
    state.frames_st.push(Some(t1));
    state.level = -1;

    linked_transition(&mut state)?;
    expect_type(state.rs(0)?, ExtType::Type1)?;
    expect_type(state.st(0)?, ExtType::Type2)?;
    state.omega = ValueLedger::new().record_jacobian(state.rs(0)?.jac_exp, config.p)?;
    state.mu = ValueLedger::new().record_jacobian(state.st(0)?.jac_exp, config.p)?;
    Ok(state)
}

fn check_side(c: &SideCondition) -> Result<()> {
    if c.holds {
        Ok(())
    } else {
        Err(Error::SideCondition(format!(
            "level {} {:?}: pure part has order {:?}, needs more than {}",
            c.level, c.tier, c.order, c.bound
        )))
    }
}

/// Upper step first (its translation constant fixes the middle ring's),
/// then the middle change of coordinates, then the lower step.
/// Smallest pure `x`-exponent of `v` divisible by `d`, divided by `d`.
fn first_pure(frame: &ExtensionFrame, d: u32) -> Option<u32> {
    frame.v.pure_x_part().into_iter().map(|(j, _)| j).find(|j| j % d == 0).map(|j| j / d)
}

/// A change `y = ȳ + O(x^k)` keeps the precision of a frame iff `k w_x >= w_y`.
fn light_enough(frame: &ExtensionFrame, k: Option<u32>, level: i64) -> Result<()> {
    let w = frame.v.weights();
    match k {
        Some(k) if k * w.x < w.y => Err(Error::WeightsTooCoarse {
            level,
            tier: format!("{:?}", frame.tier).to_lowercase(),
            y_weight: k * w.x,
        }),
        _ => Ok(()),
    }
}

fn linked_transition(state: &mut TowerState) -> Result<()> {
    let level = state.level;
    let p = state.p();
    let tr = state.plan.transition(level)?.clone();
    let ut = tr.upper_tier.ok_or(Error::LevelOutOfRange(idx(level)))?;
    let lt = tr.lower_tier;
    let opts_t = state.options(level + 1, Tier::Upper)?;
    let opts_r = state.options(level + 1, Tier::Lower)?;
    let mut t_frame = state.st(level)?.clone();
    let mut r_frame = state.rs(level)?.clone();
    let probe = |f: &ExtensionFrame, t: &TierStep| -> Result<SideCondition> {
        Ok(side_condition(f, &TransformStep::new(t.flavor, p, t.m, t.q, 1)?))
    };
    if ut.flavor == Flavor::TheoremB && !probe(&t_frame, &ut)?.holds {
        // the upper ring is free to change its own parameters
        light_enough(&t_frame, first_pure(&t_frame, 1), level)?;
        t_frame = straighten_type2(&t_frame)?;
    }
    if lt.flavor == Flavor::TheoremB && !probe(&r_frame, &lt)?.holds {
        // take v of the lower arrow as the middle parameter and carry the
        // change into the upper arrow, then clear what it leaves below the bound
        light_enough(&r_frame, first_pure(&r_frame, 1), level)?;
        let y_mid = r_frame.v.substitute(&t_frame.u, &t_frame.v)?;
        r_frame = straighten_type2(&r_frame)?;
        let mut t = ExtensionFrame::from_series(
            t_frame.level,
            t_frame.tier,
            t_frame.lower_params.clone(),
            t_frame.u.clone(),
            y_mid,
            t_frame.provenance.clone(),
        )?;
        t.defect = t_frame.defect;
        if t.jac_exp != t_frame.jac_exp {
            return Err(Error::FormulaMismatch(format!(
                "changing the middle parameter moved the exponent from {} to {}",
                t_frame.jac_exp, t.jac_exp
            )));
        }
        t_frame = t;
    }
    if ut.flavor == Flavor::TheoremA {
        let kv = p as u64 * ut.q;
        let below = first_pure(&t_frame, p).filter(|&k| (k * p) as u64 * ut.m <= kv);
        light_enough(&t_frame, below, level)?;
        t_frame = clear_pure_powers(&t_frame, ut.m, kv)?;
    }
    let mut conds = [probe(&t_frame, &ut)?, probe(&r_frame, &lt)?];
    // normalizing the lower arrow only moves the bottom ring's parameters
    conds[1].required = lt.flavor == Flavor::TheoremB;
    for c in &conds {
        if c.required {
            check_side(c)?;
        }
    }
    let mut last_err = None;
    for alpha in state.field.nonzero() {
        let step_t = TransformStep::new(ut.flavor, p, ut.m, ut.q, alpha)?;
        let out_t = match run_flavor(&t_frame, &step_t, &opts_t) {
            Err(e @ (Error::DegenerateTranslation | Error::NotNormalizable(_))) => {
                last_err = Some(e);
                continue;
            }
            r => r?,
        };
        let pv = out_t.frame.provenance.last().expect("step records provenance").clone();
        let shifted = shift_upper_y(&r_frame, &pv.normalization)?;
        let beta = out_t.step.beta.expect("step sets beta");
        let step_r = TransformStep::new(lt.flavor, p, lt.m, lt.q, beta)?;
        if (step_r.m, step_r.q, step_r.a_prime, step_r.b_prime) != pv.lower {
            return Err(Error::ParameterMismatch(format!(
                "middle substitution ({}, {}, {}, {}) differs from the upper step's lower data {:?}",
                step_r.m, step_r.q, step_r.a_prime, step_r.b_prime, pv.lower
            )));
        }
        let out_r = match run_flavor(&shifted, &step_r, &opts_r) {
            Err(e @ Error::DegenerateTranslation) => {
                last_err = Some(e);
                continue;
            }
            r => r?,
        };
        state.side_conditions.extend(conds);
        state.frames_rs[idx(level)] = shifted;
        state.frames_st[idx(level)] = Some(t_frame.clone());
        state.frames_rs.push(out_r.frame);
        state.frames_st.push(Some(out_t.frame));
        state.steps.push(LinkedStep {
            from: level,
            choice: tr.choice.clone(),
            lower: out_r.step,
            upper: Some(out_t.step),
            middle_shift: pv.normalization,
        });
        state.level = level + 1;
        return Ok(());
    }
    Err(Error::FieldTooSmall {
        p,
        n: state.field.n(),
        reason: format!("no translation constant links level {level}: {}", last_err.map(|e| e.to_string()).unwrap_or_default()),
    })
}

fn single_step(state: &mut TowerState) -> Result<()> {
    let from = state.level;
    linked_transition(state)?;
    let to = from + 1;
    let p = state.p();
    let (rs, st) = (state.rs(to)?.clone(), state.st(to)?.clone());
    let (want_rs, want_st) = if to % 2 == 0 { (ExtType::Type1, ExtType::Type2) } else { (ExtType::Type2, ExtType::Type1) };
    expect_type(&rs, want_rs)?;
    expect_type(&st, want_st)?;
    if rs.jac_exp != state.plan.c[idx(to)] || Some(st.jac_exp) != state.plan.c_prime[idx(to)] {
        return Err(Error::FormulaMismatch(format!(
            "level {to}: exponents ({}, {}) differ from the planned ({}, {:?})",
            rs.jac_exp,
            st.jac_exp,
            state.plan.c[idx(to)],
            state.plan.c_prime[idx(to)]
        )));
    }
    let step = state.steps.last().unwrap().clone();
    let upper = step.upper.as_ref().unwrap();
    state.omega = state.omega.extend(step.lower.m, step.lower.q)?.record_jacobian(rs.jac_exp, p)?;
    state.mu = state.mu.extend(upper.m, upper.q)?.record_jacobian(st.jac_exp, p)?;
    let lower_pv = rs.provenance.last().unwrap();
    state.nu = state.nu.extend(lower_pv.lower.0, lower_pv.lower.1)?;
    Ok(())
}

/// Double step from an even level `r` to `r + 2`.
pub fn advance(state: &mut TowerState) -> Result<()> {
    if state.level % 2 != 0 || state.level < 0 {
        return Err(Error::InvalidStep(format!("double steps start at even levels, not {}", state.level)));
    }
    if state.level + 2 > state.plan.last_level {
        return Err(Error::InvalidStep(format!("the plan ends at level {}", state.plan.last_level)));
    }
    single_step(state)?;
    single_step(state)
}

/// Preamble plus `config.steps` double steps.
///
/// The construction leaves several choices open ("λ arbitrarily large"). When
/// a step fails, the plan is adjusted deterministically and rebuilt:
/// a side condition failing at level `r` raises `λ` of the step into `r`,
/// other step failures raise `λ` of the step itself, precision shortfalls
/// raise the working precision at that level by the missing factor, and failures inside the
/// preamble move on to the next preamble candidate.
pub fn build(config: &TowerConfig) -> Result<TowerState> {
    let mut last_err = None;
    for base in preamble_candidates(config.p, config.e, PREAMBLE_CANDIDATES) {
        let mut choices = base;
        for _ in 0..MAX_REPLANS {
            let err = match attempt(config, &mut choices) {
                Ok(mut state) => {
                    state.fill_composites()?;
                    return Ok(state);
                }
                Err(e) => e,
            };
            let (level, err) = err;
            let next_candidate = match &err {
                Error::PrecisionExhausted { needed, available } if level >= -1 => {
                    let factor = (*needed as u64).div_ceil((*available).max(1) as u64);
                    if choices.raise_boost(level, factor) > MAX_BOOST {
                        return Err(err);
                    }
                    false
                }
                Error::SideCondition(_) if level >= 1 => bump_or_fail(&mut choices, level - 1, config, &err)?,
                e if retryable(e) && level >= 0 => bump_or_fail(&mut choices, level, config, &err)?,
                e if retryable(e) => true,
                _ => return Err(err),
            };
            if next_candidate {
                last_err = Some(err);
                break;
            }
        }
    }
    Err(last_err.unwrap_or_else(|| Error::SearchExhausted("no preamble candidate leads to a tower".into())))
}

const MAX_REPLANS: usize = 64;
const MAX_BOOST: u64 = 256;

fn bump_or_fail(choices: &mut PlanChoices, level: i64, config: &TowerConfig, err: &Error) -> Result<bool> {
    if level < 0 {
        return Ok(true);
    }
    if choices.bump(level) > config.lambda_max {
        return Err(Error::SearchExhausted(format!("level {level} needs λ > {}: {err}", config.lambda_max)));
    }
    Ok(false)
}

/// Runs the plan; a frame found too heavy in `y` is recomputed from the
/// previous level with the lighter weight.
fn attempt(config: &TowerConfig, choices: &mut PlanChoices) -> std::result::Result<TowerState, (i64, Error)> {
    let target = 2 * config.steps as i64;
    'restart: loop {
        let mut state = preamble_with(config, choices).map_err(|e| (-2, e))?;
        let mut snaps = vec![state.clone()];
        while state.level < target {
            match single_step(&mut state) {
                Ok(()) => snaps.push(state.clone()),
                Err(Error::WeightsTooCoarse { level, tier, y_weight }) => {
                    choices.cap_y_weight(level, tier == "upper", y_weight);
                    if level <= 0 {
                        continue 'restart;
                    }
                    snaps.truncate(level as usize);
                    state = snaps[level as usize - 1].clone();
                    state.plan.choices = choices.clone();
                }
                Err(e) => return Err((state.level, e)),
            }
        }
        return Ok(state);
    }
}

/// Recomputes one planned step without the tower context; used by the CLI.
pub fn replay_step(frame: &ExtensionFrame, step: &TransformStep, opts: &StepOptions) -> Result<ExtensionFrame> {
    Ok(apply_step(frame, step, opts)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::valuation::rat;

    #[test]
    fn choice_example() {
        let ch = choose_step_params(2, 3, &rat(1, 2), 4, Parity::EvenStep).unwrap();
        assert_eq!((ch.lambda, ch.q), (2, 11));
        let err = choose_step_params(2, 3, &rat(1, 2), 1, Parity::EvenStep).unwrap_err();
        assert!(matches!(err, Error::SearchExhausted(_)));
    }

    #[test]
    fn preamble_types() {
        for p in [2, 3] {
            let cfg = TowerConfig { p, steps: 1, prec: 1 << 14, ..Default::default() };
            let s = preamble(&cfg).unwrap();
            assert_eq!(s.rs(0).unwrap().ext_type, ExtType::Type1);
            assert_eq!(s.st(0).unwrap().ext_type, ExtType::Type2);
        }
        let cfg = TowerConfig { prec: 4, ..Default::default() };
        assert!(matches!(preamble(&cfg), Err(Error::PrecisionExhausted { .. })));
    }
}
