//! Almost Mathieu approximation of the sparse-resonance potential.
//!
//! On dyadic blocks next to `[2^k, 2^{k+1}]` the potential
//! `λ cos(2πωn^β) / n^α` is uniformly close, on a short interval around a
//! resonant site `m̂`, to `2λ' cos(2π(φ + ω'n))`. Note the `2π` phase
//! convention used throughout this module.

use std::f64::consts::PI;
use std::io::{self, Write};

use rayon::prelude::*;

use crate::dd::DoubleDouble;
use crate::error::{Error, Result};

/// Exponents within this distance of an integer are snapped before `2^x`.
const SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Minus,
    Plus,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Minus => "-",
            Side::Plus => "+",
        }
    }
}

/// `Λ_k^- ∪ Λ_k^0 ∪ Λ_k^+`, closed integer intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DyadicBlocks {
    pub k: u32,
    pub lam0: (u64, u64),
    pub lam_minus: (u64, u64),
    pub lam_plus: (u64, u64),
}

impl DyadicBlocks {
    pub fn side(&self, side: Side) -> (u64, u64) {
        match side {
            Side::Minus => self.lam_minus,
            Side::Plus => self.lam_plus,
        }
    }

    /// Hull of the three blocks.
    pub fn hull(&self) -> (u64, u64) {
        (self.lam_minus.0, self.lam_plus.1)
    }
}

pub fn dyadic_blocks(k: u32) -> Result<DyadicBlocks> {
    if !(2..=60).contains(&k) {
        return Err(Error::Precondition(format!("dyadic scale k = {k} outside [2, 60]")));
    }
    let p = 1u64 << k;
    Ok(DyadicBlocks {
        k,
        lam0: (p, 2 * p),
        lam_minus: (p / 2, p - 1),
        lam_plus: (2 * p + 1, 2 * p + p / 2),
    })
}

/// `2^x`, with `x` snapped to the nearest integer when within [`SNAP`].
fn pow2_snapped(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= SNAP {
        2f64.powi(r as i32)
    } else {
        x.exp2()
    }
}

/// `ε = (2 - β - 2α)/6`
pub fn approx_eps(alpha: f64, beta: f64) -> f64 {
    (2.0 - beta - 2.0 * alpha) / 6.0
}

/// `ℓ = ⌈2^{(α+ε)k}⌉`
pub fn half_length(alpha: f64, beta: f64, k: u32) -> u64 {
    pow2_snapped((alpha + approx_eps(alpha, beta)) * k as f64).ceil() as u64
}

/// Distance of `x` to the nearest integer.
fn circle_dist(x: f64) -> f64 {
    let f = x - x.floor();
    f.min(1.0 - f)
}

/// Outcome of the resonance search on one block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resonance {
    pub mhat: u64,
    pub center: u64,
    /// Integers actually scanned.
    pub window: (u64, u64),
    /// True when the nominal window had to be cut to fit the block.
    pub clipped: bool,
    /// `‖ω_{m̂} - ω'‖` on the circle.
    pub dist: f64,
    /// `2^{(k-1)(β-2)}`
    pub target: f64,
    pub fitted_c: f64,
}

/// Scans the window `c ± 2^{(2-β+δ)k}` of block `side` for the site whose
/// frequency `ω_m = ωβ m^{β-1}` is closest to `ω'` modulo 1.
///
/// The window is intersected with the block shrunk by `margin` on both
/// ends; only an empty intersection is an error. Ties go to the site
/// nearest the center, then to the smaller site.
pub fn find_resonant_center(
    omega: f64,
    beta: f64,
    omegaprime: f64,
    k: u32,
    side: Side,
    delta: f64,
    margin: u64,
) -> Result<Resonance> {
    if !(beta > 1.0 && beta < 2.0) {
        return Err(Error::Precondition(format!("beta = {beta} outside (1, 2)")));
    }
    if !(0.0..1.0).contains(&omegaprime) {
        return Err(Error::Precondition(format!("omega' = {omegaprime} outside [0, 1)")));
    }
    if !(delta > 0.0 && delta < beta - 1.0) {
        return Err(Error::Precondition(format!("delta = {delta} outside (0, beta - 1)")));
    }
    if !omega.is_finite() || omega == 0.0 {
        return Err(Error::Precondition(format!("omega = {omega}")));
    }
    let blocks = dyadic_blocks(k)?;
    let (lo, hi) = blocks.side(side);
    let center = (lo + hi) / 2;
    let half = pow2_snapped((2.0 - beta + delta) * k as f64).floor() as u64;
    let nominal = (center.saturating_sub(half), center + half);
    let (a, b) = (lo + margin, hi.saturating_sub(margin));
    let window = (nominal.0.max(a), nominal.1.min(b));
    if window.0 > window.1 {
        return Err(Error::WindowOverflow(format!(
            "k = {k}, side {}: block [{lo}, {hi}] leaves no room for margin {margin}",
            side.as_str()
        )));
    }
    let clipped = window != nominal;

    let scale = omega * beta;
    let mut best = (f64::INFINITY, u64::MAX, 0u64);
    for m in window.0..=window.1 {
        let d = circle_dist(scale * (m as f64).powf(beta - 1.0) - omegaprime);
        let off = m.abs_diff(center);
        if d < best.0 || (d == best.0 && off < best.1) {
            best = (d, off, m);
        }
    }
    let target = ((k as f64 - 1.0) * (beta - 2.0)).exp2();
    if best.0 > 10.0 * target {
        return Err(Error::NoResonance { best: best.0, target });
    }
    Ok(Resonance {
        mhat: best.2,
        center,
        window,
        clipped,
        dist: best.0,
        target,
        fitted_c: best.0 / target,
    })
}

/// Parameters of one approximation family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrugerParams {
    pub lambda: f64,
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    pub omegaprime: f64,
    /// Overrides `δ = (β-1)/2`.
    pub delta: Option<f64>,
}

impl KrugerParams {
    pub fn new(lambda: f64, omega: f64, alpha: f64, beta: f64, omegaprime: f64) -> Self {
        Self { lambda, omega, alpha, beta, omegaprime, delta: None }
    }

    pub fn eps(&self) -> f64 {
        approx_eps(self.alpha, self.beta)
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or((self.beta - 1.0) / 2.0)
    }

    fn check(&self) -> Result<()> {
        let (alpha, beta) = (self.alpha, self.beta);
        if !(beta > 1.0 && beta < 2.0) {
            return Err(Error::Precondition(format!("beta = {beta} outside (1, 2)")));
        }
        if !(alpha > 0.0 && alpha < (2.0 - beta) / 2.0) {
            return Err(Error::Precondition(format!(
                "alpha = {alpha} outside (0, (2 - beta)/2); eps = {} must be positive",
                self.eps()
            )));
        }
        let worst = (2.0 - beta + self.delta()).max(alpha + self.eps());
        if worst >= 1.0 {
            return Err(Error::Precondition(format!("max(2 - beta + delta, alpha + eps) = {worst} >= 1")));
        }
        if !self.lambda.is_finite() {
            return Err(Error::Precondition(format!("lambda = {}", self.lambda)));
        }
        Ok(())
    }
}

/// The interval `I^± = [m̂-ℓ, m̂+ℓ]` and its almost Mathieu data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrugerInterval {
    pub k: u32,
    pub side: Side,
    pub params: KrugerParams,
    pub center_c: u64,
    pub mhat: u64,
    pub ell: u64,
    pub interval: (u64, u64),
    /// `ωm̂^β - ω'm̂` reduced to `[0, 1)`.
    pub phi: f64,
    /// `λ / (2m̂^α)`
    pub lamprime: f64,
    pub eps: f64,
    pub delta: f64,
    pub resonance: Resonance,
}

impl KrugerInterval {
    pub fn len(&self) -> u64 {
        self.interval.1 - self.interval.0 + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `|#I - 2^{(α+ε)k+1}|`
    pub fn length_defect(&self) -> f64 {
        let a = self.params.alpha;
        (self.len() as f64 - pow2_snapped((a + self.eps) * self.k as f64 + 1.0)).abs()
    }

    /// The values `λ/2^{(k-2)α}` and `λ/2^{(k+1)α}`, ordered.
    pub fn nominal_lamprime_bracket(&self) -> (f64, f64) {
        let (l, a, k) = (self.params.lambda, self.params.alpha, self.k as f64);
        let (x, y) = (l / ((k - 2.0) * a).exp2(), l / ((k + 1.0) * a).exp2());
        (x.min(y), x.max(y))
    }

    /// Range of `λ/(2m^α)` over the block containing the interval.
    pub fn block_lamprime_bracket(&self) -> (f64, f64) {
        let (l, a) = (self.params.lambda, self.params.alpha);
        let (lo, hi) = dyadic_blocks(self.k).map(|b| b.side(self.side)).unwrap_or(self.interval);
        let (x, y) = (l / (2.0 * (hi as f64).powf(a)), l / (2.0 * (lo as f64).powf(a)));
        (x.min(y), x.max(y))
    }

    pub fn nominal_bracket_holds(&self) -> bool {
        within(self.lamprime, self.nominal_lamprime_bracket())
    }

    pub fn block_bracket_holds(&self) -> bool {
        within(self.lamprime, self.block_lamprime_bracket())
    }
}

fn within(x: f64, (lo, hi): (f64, f64)) -> bool {
    let tol = 1e-12 * hi.abs();
    x >= lo - tol && x <= hi + tol
}

pub fn build_approx_interval(p: &KrugerParams, k: u32, side: Side) -> Result<KrugerInterval> {
    p.check()?;
    let eps = p.eps();
    let delta = p.delta();
    let ell = half_length(p.alpha, p.beta, k);
    let res = find_resonant_center(p.omega, p.beta, p.omegaprime, k, side, delta, ell)?;
    let mhat = res.mhat;
    let interval = (mhat.saturating_sub(ell), mhat + ell);
    let (lo, hi) = dyadic_blocks(k)?.side(side);
    if interval.0 < lo || interval.1 > hi || mhat < ell {
        return Err(Error::Containment(format!(
            "[{}, {}] not inside block [{lo}, {hi}]",
            interval.0, interval.1
        )));
    }
    let m = mhat as f64;
    let phi = (DoubleDouble::powf(m, p.beta).mul_f64(p.omega) - DoubleDouble::from_prod(p.omegaprime, m)).rem_pow2(1.0);
    Ok(KrugerInterval {
        k,
        side,
        params: *p,
        center_c: res.center,
        mhat,
        ell,
        interval,
        phi,
        lamprime: p.lambda / (2.0 * m.powf(p.alpha)),
        eps,
        delta,
        resonance: res,
    })
}

/// `|λcos(2πωn^β)/n^α - 2λ'cos(2π(φ + ω'n))|` at site `n`.
pub fn pointwise_error(iv: &KrugerInterval, n: u64) -> f64 {
    let p = &iv.params;
    let x = n as f64;
    let phase = DoubleDouble::powf(x, p.beta).mul_f64(p.omega).rem_pow2(1.0);
    let exact = p.lambda * (2.0 * PI * phase).cos() / x.powf(p.alpha);
    let am = DoubleDouble::from_prod(p.omegaprime, x).add_f64(iv.phi).rem_pow2(1.0);
    (exact - 2.0 * iv.lamprime * (2.0 * PI * am).cos()).abs()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verification {
    pub linf: f64,
    /// `2^{-(α+4ε)k}`
    pub target: f64,
    pub ratio: f64,
}

/// Sup of [`pointwise_error`] over the interval against `2^{-(α+4ε)k}`.
pub fn verify_approximation(iv: &KrugerInterval) -> Verification {
    let linf = (iv.interval.0..=iv.interval.1).map(|n| pointwise_error(iv, n)).fold(0.0, f64::max);
    let target = (-(iv.params.alpha + 4.0 * iv.eps) * iv.k as f64).exp2();
    Verification { linf, target, ratio: linf / target }
}

/// One row of the report; `outcome` holds the build error if it failed.
#[derive(Debug, Clone, PartialEq)]
pub struct KrugerRecord {
    pub k: u32,
    pub side: Side,
    pub outcome: Result<(KrugerInterval, Verification)>,
}

impl KrugerRecord {
    pub fn passed(&self) -> bool {
        self.outcome.is_ok()
    }
}

/// Builds and verifies every `(k, side)` pair, in parallel, in input order
/// (`k` outer, minus side first).
pub fn kruger_report(p: &KrugerParams, ks: &[u32]) -> Vec<KrugerRecord> {
    let jobs: Vec<(u32, Side)> = ks.iter().flat_map(|&k| [(k, Side::Minus), (k, Side::Plus)]).collect();
    jobs.par_iter()
        .map(|&(k, side)| KrugerRecord {
            k,
            side,
            outcome: build_approx_interval(p, k, side).map(|iv| (iv, verify_approximation(&iv))),
        })
        .collect()
}

/// Smallest `k` of the report from which every later build succeeds on
/// both sides.
pub fn smallest_passing_k(records: &[KrugerRecord]) -> Option<u32> {
    let mut ks: Vec<u32> = records.iter().map(|r| r.k).collect();
    ks.sort_unstable();
    ks.dedup();
    let ok = |k: u32| records.iter().filter(|r| r.k == k).all(KrugerRecord::passed);
    let mut first = None;
    for &k in ks.iter().rev() {
        if !ok(k) {
            break;
        }
        first = Some(k);
    }
    first
}

/// CSV with columns `k,side,mhat,ell,phi,lamprime,linf,target,ratio`.
/// Failed builds keep their `k` and side and leave the other fields empty.
pub fn write_kruger_csv<W: Write>(records: &[KrugerRecord], mut w: W) -> io::Result<()> {
    writeln!(w, "k,side,mhat,ell,phi,lamprime,linf,target,ratio")?;
    for r in records {
        match &r.outcome {
            Ok((iv, v)) => writeln!(
                w,
                "{},{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.k,
                r.side.as_str(),
                iv.mhat,
                iv.ell,
                iv.phi,
                iv.lamprime,
                v.linf,
                v.target,
                v.ratio
            )?,
            Err(_) => writeln!(w, "{},{},,,,,,,", r.k, r.side.as_str())?,
        }
    }
    Ok(())
}
