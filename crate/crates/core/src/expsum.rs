//! Oscillatory sums
//!
//! ```text
//! S = Σ_{a<n≤b} e^{i(φ(n) + h(n))} / n^ρ
//! ```
//!
//! around the resonance points `Y_l` where `φ'(Y_l) = sgn(ω) 2πl`, together
//! with the Kuzmin–Landau and block bounds they are compared against.
//!
//! Long sums are evaluated in chunks. On each chunk the phase is replaced by
//! its quartic Taylor polynomial anchored at a precisely reduced value and
//! first derivative, and the terms are generated by forward-difference
//! rotations, re-seeded from the polynomial every [`RESEED`] terms. Chunk
//! lengths keep the quintic remainder below 1e-13 rad.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dd::{wrap_angle, DoubleDouble};
use crate::error::{Error, Result};
use crate::potentials::PhaseSpec;
use crate::pruefer::PrueferTrajectory;
use crate::summation::ComplexSum;

const MAX_CHUNK: f64 = 65_536.0;
const MIN_CHUNK: u64 = 64;
pub const RESEED: usize = 128;
const LANES: usize = 4;
/// Terms per independently summed segment; fixed so that results do not
/// depend on the number of worker threads.
const SEGMENT: u64 = 1 << 22;
const KAPPA_MIN: f64 = 1e-12;

#[inline]
fn cis(x: f64) -> Complex64 {
    let (s, c) = x.sin_cos();
    Complex64::new(c, s)
}

/// The perturbation `h` added to the phase.
#[derive(Clone, Debug, PartialEq)]
pub enum Perturbation {
    None,
    /// `ζ n^{1-γ} / (1-γ)`, or `ζ log n` for `γ = 1`.
    Rough { zeta: f64, gamma: f64 },
    /// Recorded values, `h(first + i) = values[i]`.
    Samples { first: u64, values: Vec<f64> },
}

impl Perturbation {
    /// `h(n) = factor · η(n)`, e.g. `±2η` from a Prüfer trajectory.
    pub fn from_eta(traj: &PrueferTrajectory, factor: f64) -> Self {
        Perturbation::Samples {
            first: 1,
            values: traj.eta.iter().map(|e| factor * e).collect(),
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match self {
            Perturbation::Rough { gamma, .. } => Some(*gamma),
            _ => None,
        }
    }

    fn as_phase(&self) -> Option<PhaseSpec> {
        match self {
            Perturbation::Rough { zeta, gamma } if *zeta != 0.0 => Some(PhaseSpec::pure(0.0, 1.0).with_rough(*zeta, *gamma)),
            _ => None,
        }
    }

    fn samples(&self, lo: u64, hi: u64) -> Result<Option<(&[f64], u64)>> {
        match self {
            Perturbation::Samples { first, values } => {
                let last = first + values.len() as u64;
                if lo < *first || hi >= last {
                    return Err(Error::Length {
                        need: (hi + 1 - first.min(&lo)) as usize,
                        got: values.len(),
                    });
                }
                Ok(Some((values.as_slice(), *first)))
            }
            _ => Ok(None),
        }
    }
}

/// Smooth phase plus the smooth part of the perturbation.
struct TotalPhase<'a> {
    main: &'a PhaseSpec,
    extra: Option<PhaseSpec>,
}

impl<'a> TotalPhase<'a> {
    fn new(main: &'a PhaseSpec, h: &Perturbation) -> Self {
        Self { main, extra: h.as_phase() }
    }

    #[inline]
    fn reduced(&self, x: f64) -> f64 {
        match &self.extra {
            None => self.main.reduced_value(x),
            Some(e) => wrap_angle(self.main.reduced_value(x) + e.reduced_value(x)),
        }
    }

    fn reduced_d1(&self, x: f64) -> DoubleDouble {
        let d = self.main.reduced_first_derivative(x);
        match &self.extra {
            None => d,
            Some(e) => (d + e.reduced_first_derivative(x)).rem_two_pi_dd(),
        }
    }

    fn derivative(&self, x: f64, k: u32) -> f64 {
        self.main.derivative(x, k) + self.extra.as_ref().map_or(0.0, |e| e.derivative(x, k))
    }

    fn abs_derivative(&self, x: f64, k: u32) -> f64 {
        self.main.derivative_abs_sum(x, k) + self.extra.as_ref().map_or(0.0, |e| e.derivative_abs_sum(x, k))
    }
}

#[inline]
fn exact_term(ph: &TotalPhase, samples: Option<(&[f64], u64)>, rho: f64, n: u64) -> Complex64 {
    let x = n as f64;
    let mut angle = ph.reduced(x);
    if let Some((s, first)) = samples {
        angle += s[(n - first) as usize];
    }
    let amp = if rho == 0.0 { 1.0 } else { x.powf(-rho) };
    cis(angle) * amp
}

fn chunk_len(ph: &TotalPhase, rho: f64, x0: f64) -> u64 {
    let mut len = MAX_CHUNK;
    if rho != 0.0 {
        len = len.min(2e-4 * x0);
    }
    let d2 = ph.abs_derivative(x0, 2) / 2.0;
    if d2 > 0.0 {
        len = len.min((1e3 / d2).sqrt());
    }
    let d3 = ph.abs_derivative(x0, 3) / 6.0;
    if d3 > 0.0 {
        len = len.min((1e3 / d3).cbrt());
    }
    let d4 = ph.abs_derivative(x0, 4) / 24.0;
    if d4 > 0.0 {
        len = len.min((1e3 / d4).powf(0.25));
    }
    let d5 = ph.abs_derivative(x0, 5) / 120.0;
    if d5 > 0.0 {
        len = len.min((1e-13 / d5).powf(0.2));
    }
    len.floor() as u64
}

/// Quartic Taylor data of the phase and cubic data of the amplitude on one
/// chunk.
struct Chunk<'s> {
    c0: f64,
    c1: f64,
    c1lo: f64,
    c2: f64,
    c3: f64,
    c4: f64,
    a0: f64,
    inv: f64,
    p: [f64; 3],
    samples: Option<&'s [f64]>,
}

impl Chunk<'_> {
    /// `e^{iP(j)}` and `e^{iΔ^k P(j)}` for `k = 1, 2, 3` at offset `j`.
    #[inline]
    fn seed(&self, j: usize) -> [Complex64; 4] {
        let (c1, c2, c3, c4) = (self.c1, self.c2, self.c3, self.c4);
        let jf = j as f64;
        let j2 = jf * jf;
        let poly = DoubleDouble::from_prod(c1, jf)
            .add_f64(self.c0)
            .add_f64(self.c1lo * jf + (c2 + (c3 + c4 * jf) * jf) * j2)
            .rem_two_pi();
        let d1 = c1
            + c2 * (2.0 * jf + 1.0)
            + c3 * (3.0 * j2 + 3.0 * jf + 1.0)
            + c4 * (((4.0 * jf + 6.0) * jf + 4.0) * jf + 1.0);
        let d2 = 2.0 * c2 + c3 * (6.0 * jf + 6.0) + c4 * ((12.0 * jf + 24.0) * jf + 14.0);
        let d3 = 6.0 * c3 + c4 * (24.0 * jf + 36.0);
        [cis(poly), cis(d1), cis(d2), cis(d3)]
    }

    #[inline]
    fn amp(&self, j: usize) -> f64 {
        let t = j as f64 * self.inv;
        self.a0 * (1.0 + t * (self.p[0] + t * (self.p[1] + t * self.p[2])))
    }

    /// One run of at most [`RESEED`] terms starting at offset `j0`.
    fn run(&self, j0: usize, stop: usize) -> Complex64 {
        let [mut z, mut w1, mut w2, w3] = self.seed(j0);
        let mut block = Complex64::new(0.0, 0.0);
        for j in j0..stop {
            let mut term = z * self.amp(j);
            if let Some(s) = self.samples {
                term *= cis(s[j]);
            }
            block += term;
            z *= w1;
            w1 *= w2;
            w2 *= w3;
        }
        block
    }

    /// `LANES` full runs starting at `j0`, `j0 + RESEED`, ... advanced in
    /// lockstep so the rotation chains overlap. Without `CUBIC` the second
    /// difference is held fixed within a run; the third always is.
    fn runs<const CUBIC: bool>(&self, j0: usize, out: &mut [Complex64; LANES]) {
        let mut zr = [0.0; LANES];
        let mut zi = [0.0; LANES];
        let mut ar = [0.0; LANES];
        let mut ai = [0.0; LANES];
        let mut br = [0.0; LANES];
        let mut bi = [0.0; LANES];
        let mut sr = [0.0; LANES];
        let mut si = [0.0; LANES];
        let mut cr = [0.0; LANES];
        let mut ci = [0.0; LANES];
        let mut t = [0.0; LANES];
        for lane in 0..LANES {
            let j = j0 + lane * RESEED;
            let [z, w1, w2, w3] = self.seed(j);
            (zr[lane], zi[lane]) = (z.re, z.im);
            (ar[lane], ai[lane]) = (w1.re, w1.im);
            (br[lane], bi[lane]) = (w2.re, w2.im);
            (cr[lane], ci[lane]) = (w3.re, w3.im);
            t[lane] = j as f64 * self.inv;
        }
        let (a0, inv, [p1, p2, p3]) = (self.a0, self.inv, self.p);
        for _ in 0..RESEED {
            for lane in 0..LANES {
                let u = t[lane];
                let amp = a0 * (1.0 + u * (p1 + u * (p2 + u * p3)));
                t[lane] = u + inv;
                sr[lane] += zr[lane] * amp;
                si[lane] += zi[lane] * amp;
                let (r, i) = (zr[lane], zi[lane]);
                zr[lane] = r * ar[lane] - i * ai[lane];
                zi[lane] = r * ai[lane] + i * ar[lane];
                let (r, i) = (ar[lane], ai[lane]);
                ar[lane] = r * br[lane] - i * bi[lane];
                ai[lane] = r * bi[lane] + i * br[lane];
                if CUBIC {
                    let (r, i) = (br[lane], bi[lane]);
                    br[lane] = r * cr[lane] - i * ci[lane];
                    bi[lane] = r * ci[lane] + i * cr[lane];
                }
            }
        }
        for lane in 0..LANES {
            out[lane] = Complex64::new(sr[lane], si[lane]);
        }
    }
}

/// Adds `Σ_{j<len} A(n0+j) e^{iΦ(n0+j)}` to `acc` using the Taylor kernel.
fn chunk_sum(ph: &TotalPhase, samples: Option<(&[f64], u64)>, rho: f64, n0: u64, len: u64, acc: &mut ComplexSum) {
    let x0 = n0 as f64;
    let c1dd = ph.reduced_d1(x0);
    let chunk = Chunk {
        c0: ph.reduced(x0),
        c1: c1dd.hi,
        c1lo: c1dd.lo,
        c2: ph.derivative(x0, 2) / 2.0,
        c3: ph.derivative(x0, 3) / 6.0,
        c4: ph.derivative(x0, 4) / 24.0,
        // (1 + t)^{-ρ} to third order in t = j / n0
        a0: if rho == 0.0 { 1.0 } else { x0.powf(-rho) },
        inv: 1.0 / x0,
        p: [
            -rho,
            rho * (rho + 1.0) / 2.0,
            -rho * (rho + 1.0) * (rho + 2.0) / 6.0,
        ],
        samples: samples.map(|(s, first)| &s[(n0 - first) as usize..]),
    };
    let len = len as usize;
    let mut j0 = 0usize;
    if chunk.samples.is_none() {
        let mut out = [Complex64::new(0.0, 0.0); LANES];
        // size of the local cubic coefficient over a run
        let cubic = (chunk.c3.abs() + 4.0 * chunk.c4.abs() * len as f64) * (RESEED as f64).powi(3) > 1e-14;
        while j0 + LANES * RESEED <= len {
            if cubic {
                chunk.runs::<true>(j0, &mut out);
            } else {
                chunk.runs::<false>(j0, &mut out);
            }
            for v in &out {
                acc.add(*v);
            }
            j0 += LANES * RESEED;
        }
    }
    while j0 < len {
        let stop = (j0 + RESEED).min(len);
        acc.add(chunk.run(j0, stop));
        j0 = stop;
    }
}

/// `Σ_{lo ≤ n ≤ hi}` of the terms, serially.
fn sum_range(ph: &TotalPhase, samples: Option<(&[f64], u64)>, rho: f64, lo: u64, hi: u64, exact: bool) -> Complex64 {
    let mut acc = ComplexSum::new();
    let mut n = lo;
    while n <= hi {
        let remaining = hi - n + 1;
        let len = if exact { 0 } else { chunk_len(ph, rho, n as f64).min(remaining) };
        if len < MIN_CHUNK {
            let stop = if exact { hi } else { (n + MIN_CHUNK - 1).min(hi) };
            for m in n..=stop {
                acc.add(exact_term(ph, samples, rho, m));
            }
            n = stop + 1;
            continue;
        }
        chunk_sum(ph, samples, rho, n, len, &mut acc);
        n += len;
    }
    acc.value()
}

/// How [`direct_exp_sum_with`] evaluates the terms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SumMethod {
    /// Chunked Taylor kernel where admissible, per-term elsewhere.
    #[default]
    Auto,
    /// Every term from a precisely reduced phase.
    Exact,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpSumResult {
    pub value: Complex64,
    pub abs: f64,
    /// NaN until a bound is attached.
    pub predicted_bound: f64,
    pub ratio: f64,
    pub range: (f64, f64),
    pub rho: f64,
    /// `γ` of the rough perturbation, NaN when there is none.
    pub gamma: f64,
    /// `Σ |h(n+1) - h(n)|` over the range, rough part of the phase included.
    pub v_l1: f64,
    /// Number of terms.
    pub terms: u64,
}

impl ExpSumResult {
    pub fn with_bound(mut self, bound: f64) -> Self {
        self.predicted_bound = bound;
        self.ratio = self.abs / bound;
        self
    }
}

fn integer_range(a: f64, b: f64) -> Option<(u64, u64)> {
    let lo = (a.floor() + 1.0).max(1.0) as u64;
    let hi = b.floor() as u64;
    (b >= 1.0 && lo <= hi).then_some((lo, hi))
}

/// `Σ |h(n+1) - h(n)|` for `lo ≤ n < hi`, over the perturbation and the
/// rough part of the phase.
pub fn increment_norm(phase: &PhaseSpec, h: &Perturbation, lo: u64, hi: u64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    // the parametric families are monotone, so their variation telescopes
    let (xl, xh) = (lo as f64, hi as f64);
    let mut total = (phase.rough_value(xh) - phase.rough_value(xl)).abs();
    match h {
        Perturbation::None => {}
        Perturbation::Rough { zeta, gamma } => {
            let p = PhaseSpec::pure(0.0, 1.0).with_rough(*zeta, *gamma);
            total += (p.rough_value(xh) - p.rough_value(xl)).abs();
        }
        Perturbation::Samples { first, values } => {
            let from = lo.max(*first);
            let to = hi.min(first + values.len() as u64 - 1);
            for n in from..to {
                let i = (n - first) as usize;
                total += (values[i + 1] - values[i]).abs();
            }
        }
    }
    total
}

/// `Σ_{a<n≤b} e^{i(φ(n)+h(n))} / n^ρ` for `0 ≤ a ≤ b`.
pub fn direct_exp_sum(phase: &PhaseSpec, h: &Perturbation, rho: f64, a: f64, b: f64) -> Result<ExpSumResult> {
    direct_exp_sum_with(phase, h, rho, a, b, SumMethod::Auto)
}

pub fn direct_exp_sum_with(
    phase: &PhaseSpec,
    h: &Perturbation,
    rho: f64,
    a: f64,
    b: f64,
    method: SumMethod,
) -> Result<ExpSumResult> {
    if !(a >= 0.0) || !b.is_finite() || !rho.is_finite() {
        return Err(Error::Domain(format!("need 0 <= a and finite b, rho (got a = {a}, b = {b}, rho = {rho})")));
    }
    let gamma = h
        .gamma()
        .or(phase.has_rough().then_some(phase.rough_gamma))
        .unwrap_or(f64::NAN);
    let empty = ExpSumResult {
        value: Complex64::new(0.0, 0.0),
        abs: 0.0,
        predicted_bound: f64::NAN,
        ratio: f64::NAN,
        range: (a, b),
        rho,
        gamma,
        v_l1: 0.0,
        terms: 0,
    };
    let Some((lo, hi)) = integer_range(a, b) else {
        return Ok(empty);
    };
    let samples = h.samples(lo, hi)?;
    let ph = TotalPhase::new(phase, h);
    let exact = method == SumMethod::Exact;
    let segments: Vec<(u64, u64)> = (0..=(hi - lo) / SEGMENT)
        .map(|s| {
            let start = lo + s * SEGMENT;
            (start, (start + SEGMENT - 1).min(hi))
        })
        .collect();
    let partial: Vec<Complex64> = segments
        .par_iter()
        .map(|&(s, e)| sum_range(&ph, samples, rho, s, e, exact))
        .collect();
    let mut acc = ComplexSum::new();
    for p in &partial {
        acc.add(*p);
    }
    let value = acc.value();
    Ok(ExpSumResult {
        value,
        abs: value.norm(),
        v_l1: increment_norm(phase, h, lo, hi),
        terms: hi - lo + 1,
        ..empty
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResonancePoint {
    pub l: u64,
    pub y: f64,
}

/// `(2l / (β|ω|))^{1/(β-1)}`, the resonance point of `πωx^β`.
pub fn closed_form_resonance(omega: f64, beta: f64, l: u64) -> f64 {
    (2.0 * l as f64 / (beta * omega.abs())).powf(1.0 / (beta - 1.0))
}

fn resonance_point(phase: &PhaseSpec, l: u64) -> Result<f64> {
    let target = phase.omega.signum() * 2.0 * PI * l as f64;
    let g = |x: f64| phase.smooth_derivative(x, 1) - target;
    let guess = closed_form_resonance(phase.omega, phase.beta, l);
    let (mut lo, mut hi) = (0.5 * guess, 1.5 * guess);
    let mut tries = 0;
    while g(lo).signum() == g(hi).signum() {
        tries += 1;
        if tries > 60 || !hi.is_finite() {
            return Err(Error::NotMonotone(format!("no sign change of phi' - 2 pi l near Y_{l} = {guess:e}")));
        }
        lo *= 0.5;
        hi *= 2.0;
    }
    // φ'' must keep one sign on the bracket
    let samples = 64;
    let s0 = phase.smooth_derivative(lo, 2).signum();
    for i in 0..=samples {
        let x = lo + (hi - lo) * f64::from(i) / f64::from(samples);
        let d2 = phase.smooth_derivative(x, 2);
        if d2 == 0.0 || d2.signum() != s0 {
            return Err(Error::NotMonotone(format!("phi'' changes sign near x = {x:e} (l = {l})")));
        }
    }
    let increasing = g(hi) > 0.0;
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if (g(mid) > 0.0) == increasing {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..3 {
        let step = g(x) / phase.smooth_derivative(x, 2);
        let next = x - step;
        if !((next - x).abs() <= hi - lo) || step == 0.0 {
            break;
        }
        x = next;
    }
    let resid = g(x).abs();
    if resid > 1e-10 * l as f64 {
        return Err(Error::NotMonotone(format!("residual {resid:e} at Y_{l}")));
    }
    Ok(x)
}

/// The resonance points `Y_l` for `l_min ≤ l ≤ l_max`, by bracketing around
/// the closed-form asymptote, bisection and Newton polishing.
pub fn resonance_points(phase: &PhaseSpec, l_min: u64, l_max: u64) -> Result<Vec<ResonancePoint>> {
    if l_min == 0 || l_max < l_min {
        return Err(Error::Range(format!("need 1 <= l_min <= l_max (got {l_min}, {l_max})")));
    }
    if phase.omega == 0.0 || !(phase.beta > 1.0) {
        return Err(Error::Domain("resonance points need omega != 0 and beta > 1".into()));
    }
    let mut out = Vec::with_capacity((l_max - l_min + 1) as usize);
    for l in l_min..=l_max {
        let y = resonance_point(phase, l)?;
        if let Some(prev) = out.last().map(|p: &ResonancePoint| p.y) {
            if !(y > prev) {
                return Err(Error::NotMonotone(format!("Y_{l} = {y} not above Y_{} = {prev}", l - 1)));
            }
        }
        out.push(ResonancePoint { l, y });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KuzminLandau {
    pub kappa: f64,
    pub abs_sum: f64,
    pub ratio: f64,
}

/// Evaluates `|Σ_{a<n≤b} e^{2πi f(n)}|` against `1/κ`, where `κ` is the
/// distance of `f'` on `[a, b]` to the integers.
pub fn kuzmin_landau_check<F, G>(f: F, fprime: G, a: f64, b: f64) -> Result<KuzminLandau>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Range(format!("need a < b (got {a}, {b})")));
    }
    let samples = 256;
    let vals: Vec<f64> = (0..=samples)
        .map(|i| fprime(a + (b - a) * f64::from(i) / f64::from(samples)))
        .collect();
    let up = vals.windows(2).all(|w| w[1] >= w[0]);
    let down = vals.windows(2).all(|w| w[1] <= w[0]);
    if !up && !down {
        return Err(Error::NotMonotone("f' is not monotone on [a, b]".into()));
    }
    let (lo, hi) = (vals[0].min(vals[samples as usize]), vals[0].max(vals[samples as usize]));
    let dist = |v: f64| (v - v.round()).abs();
    let kappa = if lo.floor() != hi.floor() || lo == lo.floor() {
        0.0
    } else {
        dist(lo).min(dist(hi))
    };
    if kappa <= KAPPA_MIN {
        return Err(Error::KappaZero(kappa));
    }
    let mut acc = ComplexSum::new();
    if let Some((nlo, nhi)) = integer_range(a.max(0.0), b) {
        for n in nlo..=nhi {
            let v = f(n as f64);
            acc.add(cis(2.0 * PI * (v - v.round())));
        }
    }
    let abs_sum = acc.value().norm();
    Ok(KuzminLandau {
        kappa,
        abs_sum,
        ratio: abs_sum * kappa,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LemmaBound {
    pub abs_sum: f64,
    pub bound: f64,
    pub ratio: f64,
    /// Distance of `[a, b]` to `{Y_l, Y_{l+1}}`.
    pub dist: f64,
    pub y_l: f64,
    pub y_l1: f64,
}

fn resonance_pair(phase: &PhaseSpec, l: u64) -> Result<(f64, f64)> {
    let pts = resonance_points(phase, l, l + 1)?;
    Ok((pts[0].y, pts[1].y))
}

fn lemma_range(y_l: f64, y_l1: f64, a: f64, b: f64) -> Result<f64> {
    if !(y_l < a && a < b && b < y_l1) {
        return Err(Error::Range(format!(
            "[{a}, {b}] must lie strictly inside (Y_l, Y_l+1) = ({y_l}, {y_l1})"
        )));
    }
    Ok((a - y_l).min(y_l1 - b))
}

/// `|Σ_{a<n≤b} e^{iφ(n)}|` against `l^{(2-β)/(β-1)} / dist`. Any rough part
/// of `phase` is dropped.
pub fn lemma_bound_pure(phase: &PhaseSpec, l: u64, a: f64, b: f64) -> Result<LemmaBound> {
    let smooth = phase.smooth_part();
    let (y_l, y_l1) = resonance_pair(&smooth, l)?;
    let dist = lemma_range(y_l, y_l1, a, b)?;
    let beta = smooth.beta;
    let bound = (l as f64).powf((2.0 - beta) / (beta - 1.0)) / dist;
    let abs_sum = direct_exp_sum(&smooth, &Perturbation::None, 0.0, a, b)?.abs;
    Ok(LemmaBound {
        abs_sum,
        bound,
        ratio: abs_sum / bound,
        dist,
        y_l,
        y_l1,
    })
}

/// `|Σ_{a<n≤b} e^{i(φ(n)+h(n))} / n^ρ|` against
/// `(1 + ‖δh‖) l^{(2-β-ρ)/(β-1)} / dist`; resonance points come from the
/// smooth part of `phase`.
pub fn lemma_bound_decay(phase: &PhaseSpec, h: &Perturbation, rho: f64, l: u64, a: f64, b: f64) -> Result<LemmaBound> {
    let (y_l, y_l1) = resonance_pair(&phase.smooth_part(), l)?;
    let dist = lemma_range(y_l, y_l1, a, b)?;
    let beta = phase.beta;
    let res = direct_exp_sum(phase, h, rho, a, b)?;
    let bound = (1.0 + res.v_l1) * (l as f64).powf((2.0 - beta - rho) / (beta - 1.0)) / dist;
    Ok(LemmaBound {
        abs_sum: res.abs,
        bound,
        ratio: res.abs / bound,
        dist,
        y_l,
        y_l1,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionSpec {
    pub beta: f64,
    pub eps: f64,
    pub sigma: Vec<f64>,
    /// Number of schedule steps `K`.
    pub k: usize,
}

/// The schedule `σ_k = σ_1 + (k-1)(2-β)/(2K(β-1))` with
/// `σ_1 = (2-β)/(2(β-1))` and the smallest `K` making the step `≤ ε`.
pub fn partition_schedule(beta: f64, eps: f64) -> Result<PartitionSpec> {
    if !(beta > 1.0 && beta < 2.0) || !(eps > 0.0) {
        return Err(Error::Domain(format!("need beta in (1, 2) and eps > 0 (got {beta}, {eps})")));
    }
    let sigma1 = (2.0 - beta) / (2.0 * (beta - 1.0));
    let k = ((sigma1 / eps) - 1e-12).ceil().max(1.0) as usize;
    let sigma = (1..=k).map(|i| sigma1 * (1.0 + (i - 1) as f64 / k as f64)).collect();
    Ok(PartitionSpec { beta, eps, sigma, k })
}

/// A piece `(lo, hi]` of a resonance block.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Subinterval {
    pub lo: f64,
    pub hi: f64,
    /// Position in the schedule: 0 touches a resonance point, `K` touches the midpoint.
    pub index: usize,
    /// `false` on the half adjacent to `Y_l`, `true` on the half adjacent to `Y_{l+1}`.
    pub right: bool,
}

/// Splits `(Y_l, Y_{l+1}]` into `I_0 = (Y_l, Y_l + l^{σ_1}]`,
/// `I_k = (Y_l + l^{σ_k}, Y_l + l^{σ_{k+1}}]`, `I_K` up to the midpoint, and
/// the mirror image on the right half. Offsets beyond the midpoint are
/// clamped and empty pieces dropped.
pub fn build_partition(phase: &PhaseSpec, eps: f64, l: u64) -> Result<(PartitionSpec, Vec<Subinterval>)> {
    let spec = partition_schedule(phase.beta, eps)?;
    let (y_l, y_l1) = resonance_pair(&phase.smooth_part(), l)?;
    let mid = 0.5 * (y_l + y_l1);
    let lf = l as f64;
    let offsets: Vec<f64> = spec.sigma.iter().map(|&s| lf.powf(s)).collect();

    let mut left_cuts = vec![y_l];
    left_cuts.extend(offsets.iter().map(|&o| (y_l + o).min(mid)));
    left_cuts.push(mid);
    let mut right_cuts = vec![y_l1];
    right_cuts.extend(offsets.iter().map(|&o| (y_l1 - o).max(mid)));
    right_cuts.push(mid);

    let mut pieces = Vec::new();
    for (i, w) in left_cuts.windows(2).enumerate() {
        if w[1] > w[0] {
            pieces.push(Subinterval { lo: w[0], hi: w[1], index: i, right: false });
        }
    }
    let mut right = Vec::new();
    for (i, w) in right_cuts.windows(2).enumerate() {
        if w[0] > w[1] {
            right.push(Subinterval { lo: w[1], hi: w[0], index: i, right: true });
        }
    }
    right.reverse();
    pieces.extend(right);
    Ok((spec, pieces))
}

/// `(1 + v + l^{(2-β-2γ)/(2(β-1)) + ε}) · l^{(2-β-2ρ)/(2(β-1))}`.
pub fn theorem_bound(phase: &PhaseSpec, rho: f64, gamma: f64, v_l1: f64, eps: f64, l: u64) -> f64 {
    let beta = phase.beta;
    let lf = l as f64;
    let denom = 2.0 * (beta - 1.0);
    (1.0 + v_l1 + lf.powf((2.0 - beta - 2.0 * gamma) / denom + eps)) * lf.powf((2.0 - beta - 2.0 * rho) / denom)
}

/// `l^{(2-β-2ρ)/(2(β-1))}`, the leading scale of a resonance block sum.
pub fn block_scale(beta: f64, rho: f64, l: u64) -> f64 {
    (l as f64).powf((2.0 - beta - 2.0 * rho) / (2.0 * (beta - 1.0)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockConfig {
    pub rho: f64,
    pub gamma: f64,
    pub v_l1: f64,
    pub eps: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockReport {
    pub l: u64,
    pub y_l: f64,
    pub y_l1: f64,
    pub abs_sum: f64,
    pub bound: f64,
    pub ratio: f64,
    pub rho: f64,
    pub gamma: f64,
    pub beta: f64,
    pub omega: f64,
    pub eps: f64,
}

impl BlockReport {
    /// `|S_l| / l^{(2-β-2ρ)/(2(β-1))}`
    pub fn normalized(&self) -> f64 {
        self.abs_sum / block_scale(self.beta, self.rho, self.l)
    }
}

/// `S_l = Σ_{Y_l < n ≤ Y_{l+1}}` compared with [`theorem_bound`].
pub fn block_sum(phase: &PhaseSpec, h: &Perturbation, l: u64, cfg: BlockConfig) -> Result<BlockReport> {
    let (y_l, y_l1) = resonance_pair(&phase.smooth_part(), l)?;
    let res = direct_exp_sum(phase, h, cfg.rho, y_l, y_l1)?;
    let bound = theorem_bound(phase, cfg.rho, cfg.gamma, cfg.v_l1, cfg.eps, l);
    Ok(BlockReport {
        l,
        y_l,
        y_l1,
        abs_sum: res.abs,
        bound,
        ratio: res.abs / bound,
        rho: cfg.rho,
        gamma: cfg.gamma,
        beta: phase.beta,
        omega: phase.omega,
        eps: cfg.eps,
    })
}

/// [`block_sum`] for each `l`, in parallel, returned in input order.
pub fn block_sums(phase: &PhaseSpec, h: &Perturbation, ls: &[u64], cfg: BlockConfig) -> Result<Vec<BlockReport>> {
    ls.par_iter().map(|&l| block_sum(phase, h, l, cfg)).collect()
}

/// CSV with columns `l,Y_l,Y_l1,abs_sum,bound,ratio,rho,gamma,beta,omega,eps`.
pub fn write_block_csv<W: Write>(rows: &[BlockReport], mut w: W) -> io::Result<()> {
    writeln!(w, "l,Y_l,Y_l1,abs_sum,bound,ratio,rho,gamma,beta,omega,eps")?;
    for r in rows {
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.l, r.y_l, r.y_l1, r.abs_sum, r.bound, r.ratio, r.rho, r.gamma, r.beta, r.omega, r.eps
        )?;
    }
    Ok(())
}
