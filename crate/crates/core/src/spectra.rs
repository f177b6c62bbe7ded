//! Spectral diagnostics built on the Prüfer evolution: dyadic oscillation of
//! `log R`, the oscillatory decomposition of its first-order sum, a
//! subordinacy ratio, and a regime classifier with a parameter sweep.
//!
//! None of these decide spectral type. They are finite-`N` proxies with
//! explicit, configurable thresholds.

use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expsum::{direct_exp_sum, Perturbation};
use crate::operator::BoundaryCondition;
use crate::potentials::{Mode, PotentialSpec};
use crate::pruefer::{check_k_window, init_pruefer, step_exact, PrueferTrajectory, DEFAULT_K_MIN};
use crate::summation::NeumaierSum;

/// Rescale threshold for the streamed solutions.
const STREAM_GUARD: f64 = 1e100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RegimeLabel {
    AcConsistent,
    Growing,
    Inconclusive,
}

impl RegimeLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            RegimeLabel::AcConsistent => "AC_CONSISTENT",
            RegimeLabel::Growing => "GROWING",
            RegimeLabel::Inconclusive => "INCONCLUSIVE",
        }
    }
}

/// Classification thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Largest fitted per-window decay factor of the oscillation for
    /// `AC_CONSISTENT`.
    pub decay: f64,
    /// Smallest fitted `log R` increase per window for `GROWING`.
    pub slope: f64,
    /// Allowed relative increase of the oscillation from one window to the
    /// next in the monotonicity test.
    pub tolerance: f64,
    /// Whether `AC_CONSISTENT` also needs the window-by-window test.
    pub require_monotone: bool,
    /// Number of trailing windows used.
    pub windows: usize,
    /// Fewer complete windows than this give `INCONCLUSIVE`.
    pub min_windows: usize,
    /// Oscillations at or below this count as zero.
    pub quiet: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            decay: 0.9,
            slope: 0.1,
            tolerance: 0.1,
            require_monotone: false,
            windows: 6,
            min_windows: 4,
            quiet: 1e-12,
        }
    }
}

/// `log R` over one window `[M, 2M]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DyadicWindow {
    #[serde(rename = "M")]
    pub m: usize,
    /// `max - min` of `log R` over the window.
    pub osc: f64,
    pub log_r_start: f64,
    pub log_r_end: f64,
}

/// Streamed summary of `log R(n)`, `1 ≤ n ≤ N`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadiusReport {
    pub k: f64,
    pub mu: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "logR_first")]
    pub log_r_first: f64,
    #[serde(rename = "logR_final")]
    pub log_r_final: f64,
    /// `η(N) - η(⌊N/2⌋)`
    pub eta_drift: f64,
    pub windows: Vec<DyadicWindow>,
}

impl RadiusReport {
    pub fn osc(&self) -> Vec<f64> {
        self.windows.iter().map(|w| w.osc).collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }
}

fn evolve_with<F: FnMut(usize) -> f64>(mut v: F, bc: BoundaryCondition, k: f64, n_max: usize) -> Result<RadiusReport> {
    check_k_window(k, DEFAULT_K_MIN)?;
    if n_max == 0 {
        return Err(Error::Range("N must be positive".into()));
    }
    let inv_sin = 1.0 / k.sin();
    let mut st = init_pruefer(bc, k)?;
    let log_r_first = st.log_r;
    let mut windows = Vec::new();
    let mut open = DyadicWindow { m: 1, osc: 0.0, log_r_start: st.log_r, log_r_end: st.log_r };
    let (mut hi, mut lo) = (st.log_r, st.log_r);
    let mut eta_half = st.eta;
    for n in 1..n_max {
        st = step_exact(&st, -v(n) * inv_sin);
        let x = st.log_r;
        hi = hi.max(x);
        lo = lo.min(x);
        if n + 1 == n_max / 2 {
            eta_half = st.eta;
        }
        if n + 1 == 2 * open.m {
            windows.push(DyadicWindow { osc: hi - lo, log_r_end: x, ..open });
            open = DyadicWindow { m: n + 1, osc: 0.0, log_r_start: x, log_r_end: x };
            (hi, lo) = (x, x);
        }
    }
    if n_max == 1 {
        eta_half = st.eta;
    }
    Ok(RadiusReport {
        k,
        mu: bc.mu,
        n: n_max,
        log_r_first,
        log_r_final: st.log_r,
        eta_drift: st.eta - eta_half,
        windows,
    })
}

/// Exact Prüfer evolution to site `N`, keeping only the dyadic checkpoints
/// and the oscillation of `log R` over each complete window `[M, 2M]`.
pub fn evolve_log_radius(spec: &PotentialSpec, bc: BoundaryCondition, k: f64, n_max: usize) -> Result<RadiusReport> {
    evolve_with(|n| spec.value(n as u64), bc, k, n_max)
}

/// [`evolve_log_radius`] over a table `v[n-1] = V(n)` of length `N`.
pub fn evolve_log_radius_table(v: &[f64], bc: BoundaryCondition, k: f64) -> Result<RadiusReport> {
    evolve_with(|n| v[n - 1], bc, k, v.len())
}

/// Least-squares slope of `ys` against `xs`.
pub fn regression_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len()) as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

/// The statistics behind a label.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Evidence {
    pub label: RegimeLabel,
    /// Fitted `log R` increase per window.
    pub slope: f64,
    /// Fitted per-window factor of the oscillation.
    pub decay: f64,
    pub monotone: bool,
    pub windows_used: usize,
    pub osc_last: f64,
}

/// Labels a report from its trailing dyadic windows.
///
/// `AC_CONSISTENT` needs a fitted decay factor of at most `decay` and a
/// `log R` slope below `slope`; with `require_monotone` also no window
/// exceeding its predecessor by more than `tolerance`. `GROWING` needs a slope of at least `slope` with a
/// non-decaying oscillation. Everything else is `INCONCLUSIVE`.
pub fn classify_report(report: &RadiusReport, th: &Thresholds) -> Evidence {
    let all = &report.windows;
    let used = &all[all.len().saturating_sub(th.windows)..];
    let osc_last = used.last().map_or(0.0, |w| w.osc);
    let mut ev = Evidence {
        label: RegimeLabel::Inconclusive,
        slope: f64::NAN,
        decay: f64::NAN,
        monotone: false,
        windows_used: used.len(),
        osc_last,
    };
    if used.len() < th.min_windows.max(2) {
        return ev;
    }
    let idx: Vec<f64> = (0..=used.len()).map(|i| i as f64).collect();
    let mut log_r = vec![used[0].log_r_start];
    log_r.extend(used.iter().map(|w| w.log_r_end));
    ev.slope = regression_slope(&idx, &log_r);
    ev.monotone = used.windows(2).all(|p| p[1].osc <= (1.0 + th.tolerance) * p[0].osc + th.quiet);
    if used.iter().all(|w| w.osc <= th.quiet) {
        ev.decay = 0.0;
        ev.label = RegimeLabel::AcConsistent;
        return ev;
    }
    let ln_osc: Vec<f64> = used.iter().map(|w| w.osc.max(th.quiet).ln()).collect();
    ev.decay = regression_slope(&idx[..used.len()], &ln_osc).exp();
    ev.label = if ev.decay <= th.decay && (ev.monotone || !th.require_monotone) && ev.slope < th.slope {
        RegimeLabel::AcConsistent
    } else if ev.slope >= th.slope && ev.decay >= 1.0 {
        RegimeLabel::Growing
    } else {
        RegimeLabel::Inconclusive
    };
    ev
}

/// One solution of `ψ_{n+1} = (E - V(n))ψ_n - ψ_{n-1}` with a running
/// `Σ ψ_n²`, all scaled by `e^{ln_scale}`.
struct Stream {
    prev: f64,
    cur: f64,
    ln_scale: f64,
    sum2: f64,
}

impl Stream {
    fn new(psi0: f64, psi1: f64) -> Self {
        Self { prev: psi0, cur: psi1, ln_scale: 0.0, sum2: psi1 * psi1 }
    }

    #[inline]
    fn step(&mut self, a: f64) {
        let next = a * self.cur - self.prev;
        self.prev = self.cur;
        self.cur = next;
        self.sum2 += next * next;
        if self.sum2 > STREAM_GUARD {
            let s = STREAM_GUARD.sqrt();
            self.prev /= s;
            self.cur /= s;
            self.sum2 /= STREAM_GUARD;
            self.ln_scale += s.ln();
        }
    }

    fn ln_norm(&self) -> f64 {
        0.5 * self.sum2.ln() + self.ln_scale
    }
}

/// `‖ψ^D‖_L / ‖ψ^N‖_L` for each `L` in `ls`, where `ψ^D` has
/// `(ψ_0, ψ_1) = (0, 1)` and `ψ^N` has `(ψ_0, ψ_1) = (1, 0)`, over the table
/// `v[n-1] = V(n)`.
pub fn subordinacy_profile(v: &[f64], k: f64, ls: &[usize]) -> Result<Vec<(usize, f64)>> {
    check_k_window(k, DEFAULT_K_MIN)?;
    let max = ls.iter().copied().max().unwrap_or(0);
    if ls.iter().any(|&l| l < 10) {
        return Err(Error::Range("subordinacy length L must be >= 10".into()));
    }
    if v.len() < max {
        return Err(Error::Length { need: max, got: v.len() });
    }
    let e = 2.0 * k.cos();
    let mut d = Stream::new(0.0, 1.0);
    let mut o = Stream::new(1.0, 0.0);
    let mut at = Vec::with_capacity(max);
    // at[n-1] = ratio over [1, n]
    for n in 1..=max {
        if n > 1 {
            let a = e - v[n - 2];
            d.step(a);
            o.step(a);
        }
        at.push((d.ln_norm() - o.ln_norm()).exp());
    }
    Ok(ls.iter().map(|&l| (l, at[l - 1])).collect())
}

/// Ratio of the truncated `ℓ²` norms over `[1, L]` of the solutions with
/// `μ = 0` and with `(ψ_0, ψ_1) = (1, 0)`.
pub fn subordinacy_ratio(spec: &PotentialSpec, k: f64, l: usize) -> Result<f64> {
    let v = spec.table(l);
    Ok(subordinacy_profile(&v, k, &[l])?[0].1)
}

/// The pair of sums for one oscillating term of the potential.
#[derive(Clone, Debug, PartialEq)]
pub struct TermSums {
    pub term: usize,
    pub lambda: f64,
    /// `Σ e^{i(φ_j(n) + 2θ(n))} / n^{α_j}`
    pub plus: Complex64,
    /// `Σ e^{i(φ_j(n) - 2θ(n))} / n^{α_j}`
    pub minus: Complex64,
    /// `(Im S₊ - Im S₋) / 2`
    pub reconstructed: f64,
    /// `Σ cos φ_j(n) sin 2θ(n) / n^{α_j}` summed directly.
    pub direct: f64,
    /// `λ_j · reconstructed`
    pub weighted: f64,
    /// `max |h(n+1) - h(n)| / (n^{-min(γ_j, α_1)} + |V_0(n)|)` for
    /// `h = φ_j^1 ± 2η`.
    pub h_constant: f64,
}

/// Splits `Σ cos φ_j(n) sin 2θ(n) / n^{α_j}` over `[N1, N2]` into the two
/// exponential sums with phases `φ_j ± 2θ`, for every term `j`.
pub fn oscillatory_decomposition(traj: &PrueferTrajectory, spec: &PotentialSpec, n1: usize, n2: usize) -> Result<Vec<TermSums>> {
    if !(1 <= n1 && n1 <= n2 && n2 <= traj.len()) {
        return Err(Error::Range(format!(
            "need 1 <= N1 <= N2 <= N = {} (got N1 = {n1}, N2 = {n2})",
            traj.len()
        )));
    }
    let sites = n1..=n2;
    let twice_theta: Vec<f64> = sites.clone().map(|n| 2.0 * traj.theta_at(n)).collect();
    let alpha1 = spec.alpha_min().unwrap_or(1.0);
    let mut out = Vec::with_capacity(spec.terms.len());
    for (j, term) in spec.terms.iter().enumerate() {
        let (a, b) = ((n1 - 1) as f64, n2 as f64);
        let mut sums = [Complex64::new(0.0, 0.0); 2];
        for (slot, sign) in [(0, 1.0), (1, -1.0)] {
            let h = Perturbation::Samples { first: n1 as u64, values: twice_theta.iter().map(|t| sign * t).collect() };
            sums[slot] = direct_exp_sum(&term.phase, &h, term.alpha, a, b)?.value;
        }
        let mut direct = NeumaierSum::new();
        for (i, n) in sites.clone().enumerate() {
            let x = n as f64;
            direct.add(term.phase.reduced_value(x).cos() * twice_theta[i].sin() / x.powf(term.alpha));
        }
        let expo = if term.phase.has_rough() { term.phase.rough_gamma.min(alpha1) } else { alpha1 };
        let mut h_constant: f64 = 0.0;
        for n in n1..n2 {
            let x = n as f64;
            let rough = term.phase.rough_value(x + 1.0) - term.phase.rough_value(x);
            let deta = traj.eta_at(n + 1) - traj.eta_at(n);
            let dh = rough.abs() + 2.0 * deta.abs();
            let scale = x.powf(-expo) + spec.tail_value(n as u64).abs();
            h_constant = h_constant.max(dh / scale);
        }
        let reconstructed = (sums[0].im - sums[1].im) / 2.0;
        out.push(TermSums {
            term: j,
            lambda: term.lambda,
            plus: sums[0],
            minus: sums[1],
            reconstructed,
            direct: direct.value(),
            weighted: term.lambda * reconstructed,
            h_constant,
        });
    }
    Ok(out)
}

/// Label and statistics for one parameter point.
#[derive(Clone, Debug, PartialEq)]
pub struct PointClass {
    pub evidence: Evidence,
    pub report: RadiusReport,
}

/// Classifies `λ cos(πωn^β)/n^α` (exploratory mode, any `α, β > 0`) at
#[allow(clippy::too_many_arguments)]
/// `k, μ` from the first `N` sites.
pub fn classify_point(
    alpha: f64,
    beta: f64,
    lambda: f64,
    omega: f64,
    k: f64,
    mu: f64,
    n: usize,
    th: &Thresholds,
) -> Result<PointClass> {
    let spec = PotentialSpec::canonical(lambda, omega, alpha, beta, Mode::Exploratory)?;
    let report = evolve_log_radius(&spec, BoundaryCondition::normalized(mu), k, n)?;
    Ok(PointClass { evidence: classify_report(&report, th), report })
}

/// Grid of a sweep. Every field is a list of values; the grid is their
/// product, ordered with `alpha` outermost and `N` innermost. When `points`
/// is non-empty it replaces the `alpha × beta` product by explicit pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub beta: Vec<f64>,
    #[serde(default)]
    pub points: Vec<(f64, f64)>,
    #[serde(default = "one")]
    pub lambda: Vec<f64>,
    #[serde(default = "one")]
    pub omega: Vec<f64>,
    #[serde(default = "one")]
    pub k: Vec<f64>,
    #[serde(default = "zero")]
    pub mu: Vec<f64>,
    #[serde(rename = "N")]
    pub n: Vec<usize>,
    #[serde(default)]
    pub thresholds: Thresholds,
}

fn one() -> Vec<f64> {
    vec![1.0]
}

fn zero() -> Vec<f64> {
    vec![0.0]
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| format!("PARSE: {e}"))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Grid nodes in row order.
    pub fn nodes(&self) -> Vec<SweepNode> {
        let pairs: Vec<(f64, f64)> = if self.points.is_empty() {
            self.alpha.iter().flat_map(|&a| self.beta.iter().map(move |&b| (a, b))).collect()
        } else {
            self.points.clone()
        };
        let mut out = Vec::new();
        for &(alpha, beta) in &pairs {
            for &lambda in &self.lambda {
                for &omega in &self.omega {
                    for &k in &self.k {
                        for &mu in &self.mu {
                            for &n in &self.n {
                                out.push(SweepNode { alpha, beta, lambda, omega, k, mu, n });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepNode {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub omega: f64,
    pub k: f64,
    pub mu: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub node: SweepNode,
    pub outcome: Result<SweepStats>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepStats {
    pub evidence: Evidence,
    /// [`subordinacy_ratio`] at `L = N`.
    pub subord_ratio: f64,
}

fn run_node(node: &SweepNode, th: &Thresholds) -> Result<SweepStats> {
    let spec = PotentialSpec::canonical(node.lambda, node.omega, node.alpha, node.beta, Mode::Exploratory)?;
    let v = spec.table(node.n);
    let report = evolve_log_radius_table(&v, BoundaryCondition::normalized(node.mu), node.k)?;
    let subord_ratio = if node.n >= 10 { subordinacy_profile(&v, node.k, &[node.n])?[0].1 } else { f64::NAN };
    Ok(SweepStats { evidence: classify_report(&report, th), subord_ratio })
}

/// Classifies every grid node. Nodes run in parallel on the current rayon
/// pool, each single-threaded; rows come back in grid order and failures
/// are kept in their row.
pub fn sweep(cfg: &SweepConfig) -> Vec<SweepRow> {
    let th = cfg.thresholds;
    cfg.nodes()
        .par_iter()
        .map(|node| SweepRow { node: *node, outcome: run_node(node, &th) })
        .collect()
}

/// CSV with columns
/// `alpha,beta,lambda,omega,k,mu,N,label,slope,osc_last,subord_ratio,error`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> io::Result<()> {
    writeln!(w, "alpha,beta,lambda,omega,k,mu,N,label,slope,osc_last,subord_ratio,error")?;
    for r in rows {
        let p = &r.node;
        write!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},",
            p.alpha, p.beta, p.lambda, p.omega, p.k, p.mu, p.n
        )?;
        match &r.outcome {
            Ok(s) => writeln!(
                w,
                "{},{:.16e},{:.16e},{:.16e},",
                s.evidence.label.as_str(),
                s.evidence.slope,
                s.evidence.osc_last,
                s.subord_ratio
            )?,
            Err(e) => writeln!(w, ",,,,{}", e.to_string().replace([',', '\n'], ";"))?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::TailKind;
    use crate::pruefer::evolve_spec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn free_operator_is_flat() {
        let r = evolve_log_radius(&PotentialSpec::zero(), BoundaryCondition::normalized(0.3), 1.1, 5000).unwrap();
        assert!(r.osc().iter().all(|&o| o == 0.0));
        assert_eq!(r.log_r_final, r.log_r_first);
        assert_eq!(r.windows.len(), 12);
        assert_eq!(r.windows[11].m, 2048);
        let ev = classify_report(&r, &Thresholds::default());
        assert_eq!(ev.label, RegimeLabel::AcConsistent);
    }

    #[test]
    fn streamed_windows_match_trajectory() {
        let spec = PotentialSpec::canonical(1.0, 1.0, 0.7, 1.2, Mode::Validated).unwrap();
        let bc = BoundaryCondition::normalized(-0.5);
        let r = evolve_log_radius(&spec, bc, 0.9, 3000).unwrap();
        let t = evolve_spec(&spec, bc, 0.9, 3000).unwrap();
        let stored = t.dyadic_oscillations();
        assert_eq!(r.windows.len(), stored.len());
        for (w, (m, o)) in r.windows.iter().zip(stored) {
            assert_eq!(w.m, m);
            assert_eq!(w.osc, o);
            assert_eq!(w.log_r_end, t.log_r_at(2 * m));
        }
        assert_eq!(r.log_r_final, t.log_r_at(3000));
        assert_eq!(r.eta_drift, t.eta_at(3000) - t.eta_at(1500));
    }

    #[test]
    fn summable_tail_oscillation_follows_tail_sum() {
        let spec = PotentialSpec::tail_only(TailKind::Power { c: 1.0, p: 1.5 }).unwrap();
        let r = evolve_log_radius(&spec, BoundaryCondition::normalized(0.0), 1.3, 1 << 16).unwrap();
        // |Δ log R(n)| ≤ |ν(n)| + O(ν²), so the window oscillation is at most
        // the tail sum beyond M, about 2 M^{-1/2} / sin k
        for w in r.windows.iter().filter(|w| w.m >= 16) {
            let bound = 2.0 * (w.m as f64).powf(-0.5) / 1.3f64.sin();
            assert!(w.osc <= 1.1 * bound, "M {} osc {} bound {bound}", w.m, w.osc);
        }
        let tail: Vec<_> = r.windows.iter().filter(|w| w.m >= 64).collect();
        let xs: Vec<f64> = tail.iter().map(|w| (w.m as f64).ln()).collect();
        let ys: Vec<f64> = tail.iter().map(|w| w.osc.ln()).collect();
        let s = regression_slope(&xs, &ys);
        assert!(s < -0.4, "slope {s}");
    }

    #[test]
    fn regression_slope_of_a_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        assert!((regression_slope(&xs, &ys) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn free_subordinacy_ratio_from_closed_form() {
        let k = 0.8;
        let v = vec![0.0; 20_000];
        let ls = [10, 100, 1000, 20_000];
        let prof = subordinacy_profile(&v, k, &ls).unwrap();
        for (l, r) in prof {
            // ψ^D_n = sin(kn)/sin k, ψ^N_n = -sin(k(n-1))/sin k
            let a: f64 = (1..=l).map(|n| (k * n as f64).sin().powi(2)).sum();
            let b: f64 = (1..=l).map(|n| (k * (n - 1) as f64).sin().powi(2)).sum();
            assert!((r - (a / b).sqrt()).abs() < 1e-9 * r, "L {l}");
        }
        assert!(subordinacy_profile(&v, k, &[5]).is_err());
    }

    #[test]
    fn subordinacy_survives_rescaling() {
        // constant V = 3 puts E = 2cos k - 3 outside the spectrum: ψ grows
        let v = vec![3.0; 50_000];
        let r = subordinacy_profile(&v, 1.0, &[50_000]).unwrap()[0].1;
        assert!(r.is_finite() && r > 0.0);
    }

    #[test]
    fn decomposition_reconstructs_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..4 {
            let alpha = rng.gen_range(0.6..1.0);
            let beta = rng.gen_range(1.05..(2.0f64 * alpha).min(1.95));
            let spec = PotentialSpec::canonical(rng.gen_range(0.2..2.0), rng.gen_range(0.3..2.0), alpha, beta, Mode::Validated).unwrap();
            let k = rng.gen_range(0.3..2.8);
            let traj = evolve_spec(&spec, BoundaryCondition::normalized(rng.gen_range(-1.0..1.0)), k, 10_000).unwrap();
            for t in oscillatory_decomposition(&traj, &spec, 1, 10_000).unwrap() {
                assert!((t.reconstructed - t.direct).abs() <= 1e-10, "{} vs {}", t.reconstructed, t.direct);
                let trivial: f64 = (1..=10_000).map(|n| (n as f64).powf(-alpha)).sum();
                assert!(t.plus.norm() <= trivial && t.minus.norm() <= trivial);
                assert!(t.h_constant.is_finite());
            }
        }
    }

    #[test]
    fn zero_coupling_term_has_zero_weight() {
        let spec = PotentialSpec::canonical(0.0, 1.0, 0.8, 1.3, Mode::Validated).unwrap();
        let traj = evolve_spec(&spec, BoundaryCondition::normalized(0.0), 1.0, 2000).unwrap();
        let t = &oscillatory_decomposition(&traj, &spec, 10, 2000).unwrap()[0];
        assert_eq!(t.weighted, 0.0);
        let trivial: f64 = (10..=2000).map(|n| (n as f64).powf(-0.8)).sum();
        assert!(t.plus.norm() <= trivial);
        assert!(oscillatory_decomposition(&traj, &spec, 10, 2001).is_err());
    }

    #[test]
    fn zero_coupling_point_is_ac() {
        let c = classify_point(0.3, 1.5, 0.0, 1.0, 1.0, 0.0, 5000, &Thresholds::default()).unwrap();
        assert_eq!(c.evidence.label, RegimeLabel::AcConsistent);
    }

    #[test]
    fn too_few_windows_is_inconclusive() {
        let c = classify_point(0.7, 1.2, 1.0, 1.0, 1.0, 0.0, 8, &Thresholds::default()).unwrap();
        assert_eq!(c.evidence.label, RegimeLabel::Inconclusive);
    }

    #[test]
    fn sweep_grid_order_and_errors() {
        let cfg = SweepConfig::from_toml(
            "alpha = [0.7, 0.8]\nbeta = [1.2]\nk = [1.0, 3.1]\nN = [2000]\n[thresholds]\nslope = 0.2\n",
        )
        .unwrap();
        assert_eq!(cfg.thresholds.slope, 0.2);
        assert_eq!(cfg.thresholds.decay, 0.9);
        let rows = sweep(&cfg);
        let keys: Vec<(f64, f64)> = rows.iter().map(|r| (r.node.alpha, r.node.k)).collect();
        assert_eq!(keys, vec![(0.7, 1.0), (0.7, 3.1), (0.8, 1.0), (0.8, 3.1)]);
        assert!(rows[0].outcome.is_ok());
        assert_eq!(rows[1].outcome.as_ref().unwrap_err().code(), "K_OUT_OF_RANGE");
        let mut out = Vec::new();
        write_sweep_csv(&rows, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let line = text.lines().nth(2).unwrap();
        assert_eq!(line.split(',').count(), 12);
        assert!(line.contains(",,,,K_OUT_OF_RANGE"));
    }

    #[test]
    fn single_point_sweep_matches_classify() {
        let cfg = SweepConfig::from_toml("points = [[0.7, 1.2]]\nk = [1.2]\nmu = [0.5]\nN = [4096]\n").unwrap();
        let rows = sweep(&cfg);
        assert_eq!(rows.len(), 1);
        let c = classify_point(0.7, 1.2, 1.0, 1.0, 1.2, 0.5, 4096, &Thresholds::default()).unwrap();
        assert_eq!(rows[0].outcome.as_ref().unwrap().evidence, c.evidence);
        assert!(SweepConfig::from_toml("N = [1]\nbogus = 1\n").is_err());
    }
}
