//! Decaying oscillating potentials
//!
//! ```text
//! V(n) = Σ_j λ_j cos(φ_j(n)) / n^{α_j} + V_0(n)
//! ```
//!
//! with phases `φ_j = φ_j^0 + φ_j^1`, where `φ^0(x) = πωx^β + Σ c_i x^{e_i}`
//! is smooth with lower-order corrections and `φ^1` is a rough part whose
//! increments decay like `n^{-γ}`. The rough part is realized by the family
//! `ζ x^{1-γ} / (1-γ)` (`ζ log x` for `γ = 1`).

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dd::{wrap_angle, DoubleDouble, PI_DD};
use crate::error::{Error, Result};

/// Above this magnitude of `ω x^β` (in half-turns) phases are reduced in
/// double-double arithmetic; below it plain doubles are within 1e-11 rad.
pub const SPLIT_THRESHOLD: f64 = 65_536.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Validated,
    /// Only finiteness is enforced; used for phase-diagram exploration
    /// outside the regime where the class conditions hold.
    Exploratory,
}

/// How phases are evaluated before taking cosines.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Reduction {
    /// Plain double arithmetic on the unreduced phase.
    Plain,
    /// Reduction modulo 2π with `ω x^β` carried in double-double.
    #[default]
    Split,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpec {
    pub omega: f64,
    pub beta: f64,
    /// `(coefficient, exponent)` pairs of the lower-order part of `φ^0`, in radians.
    #[serde(default)]
    pub lower_order: Vec<(f64, f64)>,
    /// `ζ` of the rough part.
    #[serde(default)]
    pub rough_coeff: f64,
    /// `γ` of the rough part.
    #[serde(default = "one")]
    pub rough_gamma: f64,
}

fn one() -> f64 {
    1.0
}

/// `e (e-1) ... (e-k+1)`
#[inline]
fn falling(e: f64, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (e - f64::from(i)))
}

impl PhaseSpec {
    /// `π ω x^β` with no corrections.
    pub fn pure(omega: f64, beta: f64) -> Self {
        Self {
            omega,
            beta,
            lower_order: Vec::new(),
            rough_coeff: 0.0,
            rough_gamma: 1.0,
        }
    }

    pub fn with_lower_order(mut self, coeff: f64, exponent: f64) -> Self {
        self.lower_order.push((coeff, exponent));
        self
    }

    pub fn with_rough(mut self, zeta: f64, gamma: f64) -> Self {
        self.rough_coeff = zeta;
        self.rough_gamma = gamma;
        self
    }

    /// Copy of this phase with the rough part removed.
    pub fn smooth_part(&self) -> Self {
        Self {
            rough_coeff: 0.0,
            rough_gamma: 1.0,
            ..self.clone()
        }
    }

    pub fn has_rough(&self) -> bool {
        self.rough_coeff != 0.0
    }

    /// Exponent `1 - γ` of the rough part, or `None` in the logarithmic case.
    fn rough_exponent(&self) -> Option<f64> {
        if self.rough_gamma == 1.0 {
            None
        } else {
            Some(1.0 - self.rough_gamma)
        }
    }

    /// `φ^0(x)` in plain doubles.
    pub fn smooth_value(&self, x: f64) -> f64 {
        PI * self.omega * x.powf(self.beta)
            + self
                .lower_order
                .iter()
                .map(|&(c, e)| c * x.powf(e))
                .sum::<f64>()
    }

    /// `φ^1(x)` in plain doubles.
    pub fn rough_value(&self, x: f64) -> f64 {
        if self.rough_coeff == 0.0 {
            return 0.0;
        }
        match self.rough_exponent() {
            None => self.rough_coeff * x.ln(),
            Some(e) => self.rough_coeff / e * x.powf(e),
        }
    }

    /// `φ(x) = φ^0(x) + φ^1(x)` in plain doubles.
    pub fn value(&self, x: f64) -> f64 {
        self.smooth_value(x) + self.rough_value(x)
    }

    /// `∂^k φ^0(x)` for `k >= 1`.
    pub fn smooth_derivative(&self, x: f64, k: u32) -> f64 {
        if k == 0 {
            return self.smooth_value(x);
        }
        PI * self.omega * falling(self.beta, k) * x.powf(self.beta - f64::from(k))
            + self
                .lower_order
                .iter()
                .map(|&(c, e)| c * falling(e, k) * x.powf(e - f64::from(k)))
                .sum::<f64>()
    }

    /// `∂^k φ^1(x)` for `k >= 1`.
    pub fn rough_derivative(&self, x: f64, k: u32) -> f64 {
        if k == 0 {
            return self.rough_value(x);
        }
        if self.rough_coeff == 0.0 {
            return 0.0;
        }
        match self.rough_exponent() {
            // d^k log x = (-1)^{k-1} (k-1)! / x^k
            None => {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                self.rough_coeff * sign * falling(f64::from(k - 1), k - 1) / x.powi(k as i32)
            }
            Some(e) => self.rough_coeff / e * falling(e, k) * x.powf(e - f64::from(k)),
        }
    }

    /// `∂^k φ(x)` for `k >= 1` (smooth plus rough part).
    pub fn derivative(&self, x: f64, k: u32) -> f64 {
        self.smooth_derivative(x, k) + self.rough_derivative(x, k)
    }

    fn leading_half_turns(&self, x: f64) -> DoubleDouble {
        DoubleDouble::powf(x, self.beta).mul_f64(self.omega)
    }

    /// Sum of the non-leading terms of `φ` in radians, as double-double.
    fn corrections_dd(&self, x: f64, include_rough: bool) -> DoubleDouble {
        let mut acc = DoubleDouble::ZERO;
        for &(c, e) in &self.lower_order {
            acc = acc + DoubleDouble::powf(x, e).mul_f64(c);
        }
        if include_rough && self.rough_coeff != 0.0 {
            acc = acc
                + match self.rough_exponent() {
                    None => DoubleDouble::from_f64(x).ln().mul_f64(self.rough_coeff),
                    Some(e) => DoubleDouble::powf(x, e).mul_f64(self.rough_coeff / e),
                };
        }
        acc
    }

    fn reduced_impl(&self, x: f64, include_rough: bool) -> f64 {
        let leading = self.omega * x.powf(self.beta);
        let lead_angle = if leading.abs() < SPLIT_THRESHOLD {
            wrap_angle(PI * leading.rem_euclid(2.0))
        } else {
            wrap_angle(PI * self.leading_half_turns(x).rem_pow2(2.0))
        };
        if self.lower_order.is_empty() && !(include_rough && self.rough_coeff != 0.0) {
            return lead_angle;
        }
        wrap_angle(lead_angle + self.corrections_dd(x, include_rough).rem_two_pi())
    }

    /// `φ(x) mod 2π` in `[-π, π)`, accurate to ~1e-12 rad even when the
    /// unreduced phase is far beyond 2^53.
    pub fn reduced_value(&self, x: f64) -> f64 {
        self.reduced_impl(x, true)
    }

    /// `φ^0(x) mod 2π` in `[-π, π)`.
    pub fn reduced_smooth_value(&self, x: f64) -> f64 {
        self.reduced_impl(x, false)
    }

    /// `φ'(x) mod 2π` as a double-double, with `ω β x^{β-1}` carried in
    /// double-double before reduction.
    pub(crate) fn reduced_first_derivative(&self, x: f64) -> DoubleDouble {
        let lead = (DoubleDouble::powf(x, self.beta) * DoubleDouble::from_prod(self.omega, self.beta))
            .div_f64(x)
            .rem_pow2_dd(2.0);
        let mut acc = PI_DD * lead;
        for &(c, e) in &self.lower_order {
            acc = acc + (DoubleDouble::powf(x, e) * DoubleDouble::from_prod(c, e)).div_f64(x);
        }
        if self.rough_coeff != 0.0 {
            acc = acc
                + match self.rough_exponent() {
                    None => DoubleDouble::from_f64(self.rough_coeff).div_f64(x),
                    Some(e) => DoubleDouble::powf(x, e).mul_f64(self.rough_coeff).div_f64(x),
                };
        }
        acc.rem_two_pi_dd()
    }

    /// `Σ |∂^k t(x)|` over the individual terms `t` of `φ`; an upper bound
    /// for `|∂^k φ|` on `[x, ∞)` since every term derivative decays in `x`.
    pub(crate) fn derivative_abs_sum(&self, x: f64, k: u32) -> f64 {
        let kf = f64::from(k);
        let mut acc = (PI * self.omega * falling(self.beta, k)).abs() * x.powf(self.beta - kf);
        for &(c, e) in &self.lower_order {
            acc += (c * falling(e, k)).abs() * x.powf(e - kf);
        }
        acc + self.rough_derivative(x, k).abs()
    }
}

/// Evaluates `∂^order φ^0(x)` (order 1, 2) or `φ(x)` (order 0).
///
/// With `reduce` set, order 0 is returned modulo 2π in `[-π, π)` using the
/// split double-double representation of `ω x^β`.
pub fn phase_value(phase: &PhaseSpec, x: f64, order: u32, reduce: bool) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("phase argument x = {x} must be positive")));
    }
    match order {
        0 if reduce => Ok(phase.reduced_value(x)),
        0 => Ok(phase.value(x)),
        1 | 2 => Ok(phase.smooth_derivative(x, order)),
        _ => Err(Error::Domain(format!("derivative order {order} not in 0..=2"))),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscTerm {
    pub lambda: f64,
    pub alpha: f64,
    pub phase: PhaseSpec,
}

impl OscTerm {
    #[inline]
    pub fn value(&self, n: f64, reduction: Reduction) -> f64 {
        if self.lambda == 0.0 {
            return 0.0;
        }
        let angle = match reduction {
            Reduction::Split => self.phase.reduced_value(n),
            Reduction::Plain => self.phase.value(n),
        };
        self.lambda * angle.cos() / n.powf(self.alpha)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TailKind {
    #[default]
    None,
    /// `V_0(n) = values[n-1]` for `n <= len`, zero beyond.
    Explicit { values: Vec<f64> },
    /// `V_0(n) = c n^{-p}`.
    Power { c: f64, p: f64 },
}

/// The summable part `V_0`, including oscillating terms with `α > 1` that
/// were folded into it during validation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Tail {
    pub kind: TailKind,
    pub folded: Vec<OscTerm>,
    /// `Σ |V_0(n)|`: exact for the explicit/power part, plus `|λ| ζ(α)`
    /// upper bounds for folded terms.
    pub l1_norm: f64,
}

impl Tail {
    #[inline]
    pub fn value(&self, n: u64, reduction: Reduction) -> f64 {
        let base = match &self.kind {
            TailKind::None => 0.0,
            TailKind::Explicit { values } => values.get((n - 1) as usize).copied().unwrap_or(0.0),
            TailKind::Power { c, p } => c * (n as f64).powf(-p),
        };
        let x = n as f64;
        base + self
            .folded
            .iter()
            .map(|t| t.value(x, reduction))
            .sum::<f64>()
    }

    pub fn is_zero(&self) -> bool {
        self.folded.is_empty()
            && match &self.kind {
                TailKind::None => true,
                TailKind::Explicit { values } => values.iter().all(|&v| v == 0.0),
                TailKind::Power { c, .. } => *c == 0.0,
            }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationCode {
    NonFinite,
    OmegaZero,
    AlphaOutOfRange,
    BetaOutOfRange,
    LowerOrderExponent,
    GammaOutOfRange,
    GammaTooSmall,
    TailNotSummable,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::NonFinite => "NON_FINITE",
            ViolationCode::OmegaZero => "OMEGA_ZERO",
            ViolationCode::AlphaOutOfRange => "ALPHA_OUT_OF_RANGE",
            ViolationCode::BetaOutOfRange => "BETA_OUT_OF_RANGE",
            ViolationCode::LowerOrderExponent => "LOWER_ORDER_EXPONENT",
            ViolationCode::GammaOutOfRange => "GAMMA_OUT_OF_RANGE",
            ViolationCode::GammaTooSmall => "GAMMA_TOO_SMALL",
            ViolationCode::TailNotSummable => "TAIL_NOT_SUMMABLE",
        }
    }
}

/// A violated class condition; `term` is the index in the input order.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub code: ViolationCode,
    pub term: Option<usize>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.term {
            Some(j) => write!(f, "{} (term {}): {}", self.code.as_str(), j, self.detail),
            None => write!(f, "{} (tail): {}", self.code.as_str(), self.detail),
        }
    }
}

impl std::error::Error for Violation {}

/// Serialized form of a potential, as read from TOML.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RawSpec {
    #[serde(default)]
    pub terms: Vec<RawTerm>,
    #[serde(default)]
    pub tail: TailKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawTerm {
    pub lambda: f64,
    pub alpha: f64,
    pub omega: f64,
    pub beta: f64,
    #[serde(default)]
    pub lower_order: Vec<(f64, f64)>,
    #[serde(default)]
    pub zeta: f64,
    #[serde(default = "one")]
    pub gamma: f64,
}

impl RawSpec {
    pub fn from_toml(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PotentialSpec {
    /// Oscillating terms with `α ∈ (1/2, 1]`, sorted by `α`.
    pub terms: Vec<OscTerm>,
    pub tail: Tail,
    pub mode: Mode,
}

fn violation(code: ViolationCode, term: Option<usize>, detail: String) -> Violation {
    Violation { code, term, detail }
}

/// Riemann zeta for real `p > 1` by Euler–Maclaurin with cutoff 64.
pub(crate) fn zeta(p: f64) -> f64 {
    const N: u32 = 64;
    let n = f64::from(N);
    let head: f64 = (1..N).rev().map(|i| f64::from(i).powf(-p)).sum();
    let np = n.powf(-p);
    // Bernoulli corrections B2/2!, B4/4!, B6/6!
    let t1 = p * np / n / 12.0;
    let t2 = p * (p + 1.0) * (p + 2.0) * np / n.powi(3) / 720.0;
    let t3 = p * (p + 1.0) * (p + 2.0) * (p + 3.0) * (p + 4.0) * np / n.powi(5) / 30240.0;
    head + n.powf(1.0 - p) / (p - 1.0) + np / 2.0 + t1 - t2 + t3
}

fn all_finite(t: &RawTerm) -> bool {
    [t.lambda, t.alpha, t.omega, t.beta, t.zeta, t.gamma]
        .iter()
        .all(|v| v.is_finite())
        && t.lower_order.iter().all(|(c, e)| c.is_finite() && e.is_finite())
}

/// Checks the class conditions and builds a [`PotentialSpec`].
///
/// In [`Mode::Validated`], terms with `α > 1` are summable and are moved into
/// the tail; the remaining terms must satisfy `α ∈ (1/2, 1]`, `β ∈ (1, 2α)`,
/// lower-order exponents `< β`, `γ ∈ (0, 1]` and `γ > 1 - α`.
pub fn validate_spec(raw: &RawSpec, mode: Mode) -> std::result::Result<PotentialSpec, Violation> {
    let mut terms: Vec<OscTerm> = Vec::new();
    let mut folded: Vec<OscTerm> = Vec::new();

    for (j, t) in raw.terms.iter().enumerate() {
        let at = Some(j);
        if !all_finite(t) {
            return Err(violation(ViolationCode::NonFinite, at, "non-finite field".into()));
        }
        let term = OscTerm {
            lambda: t.lambda,
            alpha: t.alpha,
            phase: PhaseSpec {
                omega: t.omega,
                beta: t.beta,
                lower_order: t.lower_order.clone(),
                rough_coeff: t.zeta,
                rough_gamma: t.gamma,
            },
        };
        if mode == Mode::Exploratory {
            terms.push(term);
            continue;
        }
        if t.alpha > 1.0 {
            folded.push(term);
            continue;
        }
        if t.omega == 0.0 {
            return Err(violation(ViolationCode::OmegaZero, at, "omega must be nonzero".into()));
        }
        if !(t.alpha > 0.5) {
            return Err(violation(
                ViolationCode::AlphaOutOfRange,
                at,
                format!("alpha = {} not in (1/2, 1]", t.alpha),
            ));
        }
        if !(t.beta > 1.0 && t.beta < 2.0 * t.alpha) {
            return Err(violation(
                ViolationCode::BetaOutOfRange,
                at,
                format!("beta = {} not in (1, 2 alpha = {})", t.beta, 2.0 * t.alpha),
            ));
        }
        if let Some(&(_, e)) = t.lower_order.iter().find(|&&(_, e)| e >= t.beta) {
            return Err(violation(
                ViolationCode::LowerOrderExponent,
                at,
                format!("lower-order exponent {e} >= beta = {}", t.beta),
            ));
        }
        if !(t.gamma > 0.0 && t.gamma <= 1.0) {
            return Err(violation(
                ViolationCode::GammaOutOfRange,
                at,
                format!("gamma = {} not in (0, 1]", t.gamma),
            ));
        }
        if !(t.gamma > 1.0 - t.alpha) {
            return Err(violation(
                ViolationCode::GammaTooSmall,
                at,
                format!("gamma = {} <= 1 - alpha = {}", t.gamma, 1.0 - t.alpha),
            ));
        }
        terms.push(term);
    }

    let base_l1 = match &raw.tail {
        TailKind::None => 0.0,
        TailKind::Explicit { values } => {
            if values.iter().any(|v| !v.is_finite()) {
                return Err(violation(ViolationCode::NonFinite, None, "non-finite tail value".into()));
            }
            values.iter().map(|v| v.abs()).sum()
        }
        TailKind::Power { c, p } => {
            if !c.is_finite() || !p.is_finite() {
                return Err(violation(ViolationCode::NonFinite, None, "non-finite tail parameter".into()));
            }
            if *c == 0.0 {
                0.0
            } else if *p <= 1.0 {
                return Err(violation(
                    ViolationCode::TailNotSummable,
                    None,
                    format!("c n^-p with p = {p} <= 1 is not summable"),
                ));
            } else {
                c.abs() * zeta(*p)
            }
        }
    };
    let folded_l1: f64 = folded.iter().map(|t| t.lambda.abs() * zeta(t.alpha)).sum();

    terms.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    Ok(PotentialSpec {
        terms,
        tail: Tail {
            kind: raw.tail.clone(),
            folded,
            l1_norm: base_l1 + folded_l1,
        },
        mode,
    })
}

impl PotentialSpec {
    pub fn zero() -> Self {
        Self {
            terms: Vec::new(),
            tail: Tail::default(),
            mode: Mode::Validated,
        }
    }

    /// `λ cos(π ω n^β) / n^α`.
    pub fn canonical(lambda: f64, omega: f64, alpha: f64, beta: f64, mode: Mode) -> std::result::Result<Self, Violation> {
        validate_spec(
            &RawSpec {
                terms: vec![RawTerm {
                    lambda,
                    alpha,
                    omega,
                    beta,
                    lower_order: Vec::new(),
                    zeta: 0.0,
                    gamma: 1.0,
                }],
                tail: TailKind::None,
            },
            mode,
        )
    }

    /// A pure tail potential `V = V_0`.
    pub fn tail_only(kind: TailKind) -> std::result::Result<Self, Violation> {
        validate_spec(&RawSpec { terms: Vec::new(), tail: kind }, Mode::Validated)
    }

    pub fn from_toml(text: &str, mode: Mode) -> std::result::Result<Self, String> {
        let raw = RawSpec::from_toml(text).map_err(|e| format!("PARSE: {e}"))?;
        validate_spec(&raw, mode).map_err(|v| v.to_string())
    }

    pub fn tail_l1_norm(&self) -> f64 {
        self.tail.l1_norm
    }

    /// Smallest decay exponent among the oscillating terms.
    pub fn alpha_min(&self) -> Option<f64> {
        self.terms.first().map(|t| t.alpha)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.lambda == 0.0) && self.tail.is_zero()
    }

    /// `V(n)` for `n >= 1`, with the phase evaluated per `reduction`.
    #[inline]
    pub fn value_with(&self, n: u64, reduction: Reduction) -> f64 {
        let x = n as f64;
        self.terms.iter().map(|t| t.value(x, reduction)).sum::<f64>() + self.tail.value(n, reduction)
    }

    #[inline]
    pub fn value(&self, n: u64) -> f64 {
        self.value_with(n, Reduction::Split)
    }

    #[inline]
    pub fn tail_value(&self, n: u64) -> f64 {
        self.tail.value(n, Reduction::Split)
    }

    /// `[V(1), ..., V(len)]`.
    pub fn table(&self, len: usize) -> Vec<f64> {
        (1..=len as u64).map(|n| self.value(n)).collect()
    }

    /// Re-asserts the class conditions on an accepted validated spec.
    pub fn conditions_hold(&self) -> bool {
        self.terms.iter().all(|t| {
            t.phase.beta < 2.0 * t.alpha
                && t.phase.rough_gamma > 1.0 - t.alpha
                && t.alpha > 0.5
                && t.alpha <= 1.0
        }) && self.terms.windows(2).all(|w| w[0].alpha <= w[1].alpha)
    }
}

/// `V(n)` for `n >= 1`.
pub fn eval_potential(spec: &PotentialSpec, n: i64) -> Result<f64> {
    if n < 1 {
        return Err(Error::Domain(format!("site n = {n} must be >= 1")));
    }
    Ok(spec.value(n as u64))
}
