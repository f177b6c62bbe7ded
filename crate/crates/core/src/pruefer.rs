//! Modified Prüfer variables
//!
//! ```text
//! R(n) cos(η(n) + k(n-1)) = ψ_n - cos k ψ_{n-1}
//! R(n) sin(η(n) + k(n-1)) = sin k ψ_{n-1}
//! ```
//!
//! with `θ(n) = η(n) + kn`, so that `sin k ψ_n = R(n) sin θ(n)`. One step of
//! the recursion is the linear map `(cos θ, sin θ) ↦ (cos θ + ν sin θ, sin θ)`
//! with `ν = -V(n) / sin k`.

use std::f64::consts::PI;
use std::io::{self, Write};

use serde::Serialize;

use crate::dd::{angle_plus_linear, wrap_angle};
use crate::error::{Error, Result};
use crate::operator::{check_k, BoundaryCondition, EigenSolution};
use crate::potentials::PotentialSpec;
use crate::summation::NeumaierSum;

pub const DEFAULT_K_MIN: f64 = 0.05;

/// Constant used for `errbound` when none is configured.
pub const DEFAULT_RESIDUAL_CONSTANT: f64 = 5.0;

/// Below this `|sin θ|` the cotangent cross-check is not trusted.
pub const COT_SINGULAR: f64 = 1e-8;

/// Checks `k ∈ [k_min, π - k_min]`.
pub fn check_k_window(k: f64, k_min: f64) -> Result<()> {
    if k >= k_min && k <= PI - k_min {
        Ok(())
    } else {
        Err(Error::KOutOfRange {
            k,
            lo: k_min,
            hi: PI - k_min,
        })
    }
}

/// Maps an `atan2` result from `(-π, π]` onto `[-π, π)`.
#[inline]
fn half_open(a: f64) -> f64 {
    if a >= PI {
        -PI
    } else {
        a
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrueferState {
    pub n: usize,
    pub log_r: f64,
    /// Unwrapped angle; increments lie in `[-π, π)`.
    pub eta: f64,
    /// `η + kn` reduced to `[-π, π)`.
    pub theta: f64,
    pub k: f64,
}

impl PrueferState {
    pub fn new(n: usize, log_r: f64, eta: f64, k: f64) -> Self {
        Self {
            n,
            log_r,
            eta,
            theta: angle_plus_linear(eta, k, n as f64),
            k,
        }
    }

    pub fn radius(&self) -> f64 {
        self.log_r.exp()
    }
}

/// `R(1)` and `η(1)` from `ψ_0 = μ ψ_1`.
///
/// The angle is taken from both defining equations, so it is negative when
/// `μ ψ_1 < 0`.
pub fn init_pruefer(bc: BoundaryCondition, k: f64) -> Result<PrueferState> {
    check_k(k)?;
    let (s, c) = k.sin_cos();
    let d = (bc.mu - c).powi(2) + s * s;
    if d == 0.0 || !d.is_finite() {
        return Err(Error::Degenerate { mu: bc.mu, k });
    }
    let log_r = bc.psi1.abs().ln() + 0.5 * d.ln();
    let eta = half_open((bc.mu * bc.psi1 * s).atan2(bc.psi1 * (1.0 - bc.mu * c)));
    Ok(PrueferState::new(1, log_r, eta, k))
}

/// One step of the exact recursion through the linear map.
#[inline]
pub fn step_exact(state: &PrueferState, nu: f64) -> PrueferState {
    let (s, c) = state.theta.sin_cos();
    let deta = half_open((-nu * s * s).atan2(1.0 + nu * s * c));
    let dlog = 0.5 * (nu * (2.0 * s * c + nu * s * s)).ln_1p();
    PrueferState::new(state.n + 1, state.log_r + dlog, state.eta + deta, state.k)
}

/// The same step through `cot(η(n+1) + kn) = cot θ(n) + ν`. Returns `None`
/// within [`COT_SINGULAR`] of the singular set.
pub fn step_cotangent(state: &PrueferState, nu: f64) -> Option<PrueferState> {
    let (s, c) = state.theta.sin_cos();
    if s.abs() < COT_SINGULAR {
        return None;
    }
    let cot_next = c / s + nu;
    // arccot in (0, π); the admissible branch has sin of the same sign as sin θ
    let base = 1f64.atan2(cot_next);
    let next = if s > 0.0 { base } else { base - PI };
    let deta = half_open(wrap_angle(next - state.theta));
    let ratio2 = 1.0 + nu * (2.0 * s * c) + nu * nu * s * s;
    Some(PrueferState::new(
        state.n + 1,
        state.log_r + 0.5 * ratio2.ln(),
        state.eta + deta,
        state.k,
    ))
}

/// Leading terms `(dlogR, deta) = ((ν/2) sin 2θ, -ν/2 + (ν/2) cos 2θ)`.
pub fn step_asymptotic(state: &PrueferState, nu: f64) -> Result<(f64, f64)> {
    if !(nu.abs() < 0.5) {
        return Err(Error::NuTooLarge(nu.abs()));
    }
    let (s2, c2) = (2.0 * state.theta).sin_cos();
    Ok((0.5 * nu * s2, -0.5 * nu + 0.5 * nu * c2))
}

/// `R, η, θ, ν` at sites `n = 1, ..., N`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrueferTrajectory {
    pub k: f64,
    pub mu: f64,
    pub log_r: Vec<f64>,
    pub eta: Vec<f64>,
    pub theta: Vec<f64>,
    /// `ν(n) = -V(n) / sin k`.
    pub nu: Vec<f64>,
}

impl PrueferTrajectory {
    fn with_capacity(k: f64, mu: f64, len: usize) -> Self {
        Self {
            k,
            mu,
            log_r: Vec::with_capacity(len),
            eta: Vec::with_capacity(len),
            theta: Vec::with_capacity(len),
            nu: Vec::with_capacity(len),
        }
    }

    fn push(&mut self, st: &PrueferState, nu: f64) {
        self.log_r.push(st.log_r);
        self.eta.push(st.eta);
        self.theta.push(st.theta);
        self.nu.push(nu);
    }

    /// Largest site `N`.
    pub fn len(&self) -> usize {
        self.log_r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_r.is_empty()
    }

    pub fn state(&self, n: usize) -> PrueferState {
        PrueferState {
            n,
            log_r: self.log_r[n - 1],
            eta: self.eta[n - 1],
            theta: self.theta[n - 1],
            k: self.k,
        }
    }

    pub fn log_r_at(&self, n: usize) -> f64 {
        self.log_r[n - 1]
    }

    pub fn eta_at(&self, n: usize) -> f64 {
        self.eta[n - 1]
    }

    pub fn theta_at(&self, n: usize) -> f64 {
        self.theta[n - 1]
    }

    /// Largest `η` increment magnitude, with its sign convention checked.
    pub fn branch_ok(&self) -> bool {
        self.eta.windows(2).all(|w| {
            let d = w[1] - w[0];
            (-PI..PI).contains(&d)
        })
    }

    /// Dyadic oscillations `max - min` of `log R` over `[2^j, 2^{j+1}]`
    /// for every window inside the trajectory.
    pub fn dyadic_oscillations(&self) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        let mut m = 1usize;
        while 2 * m <= self.len() {
            let w = &self.log_r[m - 1..2 * m];
            let hi = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = w.iter().copied().fold(f64::INFINITY, f64::min);
            out.push((m, hi - lo));
            m *= 2;
        }
        out
    }

    pub fn summary(&self) -> TrajectorySummary {
        TrajectorySummary {
            k: self.k,
            mu: self.mu,
            n: self.len(),
            log_r_final: self.log_r.last().copied().unwrap_or(f64::NAN),
            eta_final: self.eta.last().copied().unwrap_or(f64::NAN),
            osc_windows: self.dyadic_oscillations().into_iter().map(|(_, o)| o).collect(),
        }
    }

    /// CSV with columns `n,R,logR,eta,theta,nu`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "n,R,logR,eta,theta,nu")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                i + 1,
                self.log_r[i].exp(),
                self.log_r[i],
                self.eta[i],
                self.theta[i],
                self.nu[i]
            )?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectorySummary {
    pub k: f64,
    pub mu: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "logR_final")]
    pub log_r_final: f64,
    pub eta_final: f64,
    pub osc_windows: Vec<f64>,
}

impl TrajectorySummary {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("summary serializes")
    }
}

/// Prüfer variables read off a computed solution for `n = 1, ..., N`.
pub fn pruefer_from_solution(sol: &EigenSolution, spec: &PotentialSpec) -> Result<PrueferTrajectory> {
    pruefer_from_solution_with(sol, |n| spec.value(n as u64))
}

/// [`pruefer_from_solution`] over a table `v[n-1] = V(n)`.
pub fn pruefer_from_solution_table(sol: &EigenSolution, v: &[f64]) -> Result<PrueferTrajectory> {
    if v.len() < sol.len() {
        return Err(Error::Length { need: sol.len(), got: v.len() });
    }
    pruefer_from_solution_with(sol, |n| v[n - 1])
}

fn pruefer_from_solution_with<F: Fn(usize) -> f64>(sol: &EigenSolution, v: F) -> Result<PrueferTrajectory> {
    let n_max = sol.len();
    let k = sol.k;
    let (s, c) = k.sin_cos();
    let mut traj = PrueferTrajectory::with_capacity(k, sol.mu, n_max);
    let mut prev_eta = 0.0;
    for n in 1..=n_max {
        let (p, q) = sol.pair(n);
        let x = q - c * p;
        let y = s * p;
        if x == 0.0 && y == 0.0 {
            return Err(Error::ZeroRadius { n });
        }
        let log_r = x.hypot(y).ln() + sol.ln_scale(n);
        // η(n) ≡ atan2(y, x) - k(n-1)  (mod 2π)
        let raw = angle_plus_linear(y.atan2(x), -k, (n - 1) as f64);
        let eta = if n == 1 {
            half_open(raw)
        } else {
            prev_eta + half_open(wrap_angle(raw - prev_eta))
        };
        prev_eta = eta;
        let st = PrueferState::new(n, log_r, eta, k);
        traj.push(&st, -v(n) / s);
    }
    Ok(traj)
}

/// Chains [`step_exact`] from the boundary condition over `v[n-1] = V(n)`,
/// producing sites `1..=n_max`.
pub fn evolve_exact(v: &[f64], bc: BoundaryCondition, k: f64, n_max: usize) -> Result<PrueferTrajectory> {
    if v.len() < n_max {
        return Err(Error::Length { need: n_max, got: v.len() });
    }
    let mut st = init_pruefer(bc, k)?;
    let inv_sin = 1.0 / k.sin();
    let mut traj = PrueferTrajectory::with_capacity(k, bc.mu, n_max);
    for n in 1..=n_max {
        let nu = -v[n - 1] * inv_sin;
        traj.push(&st, nu);
        if n < n_max {
            st = step_exact(&st, nu);
        }
    }
    Ok(traj)
}

/// [`evolve_exact`] evaluating the potential from `spec`.
pub fn evolve_spec(spec: &PotentialSpec, bc: BoundaryCondition, k: f64, n_max: usize) -> Result<PrueferTrajectory> {
    evolve_exact(&spec.table(n_max), bc, k, n_max)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IteratedResidual {
    /// `log R(N2+1) - log R(N1)`
    pub lhs: f64,
    /// `-Σ_j Σ_n λ_j cos φ_j(n) sin 2θ(n) / (2 sin k n^{α_j})`
    pub mainsum: f64,
    /// `Σ_n (n^{-2α_1} + |V_0(n)|)`
    pub weight: f64,
    /// Smallest constant for which the bound holds on this range.
    pub fitted_c: f64,
    /// `constant · weight`
    pub errbound: f64,
}

/// Compares the change of `log R` over `[N1, N2]` with its first-order sum.
pub fn iterated_residual(
    traj: &PrueferTrajectory,
    spec: &PotentialSpec,
    n1: usize,
    n2: usize,
    constant: f64,
) -> Result<IteratedResidual> {
    if !(1 <= n1 && n1 < n2 && n2 < traj.len()) {
        return Err(Error::Range(format!(
            "need 1 <= N1 < N2 < N = {} (got N1 = {n1}, N2 = {n2})",
            traj.len()
        )));
    }
    let sin_k = traj.k.sin();
    let alpha1 = spec.alpha_min();
    let mut main = NeumaierSum::new();
    let mut weight = NeumaierSum::new();
    for n in n1..=n2 {
        let x = n as f64;
        let s2 = (2.0 * traj.theta_at(n)).sin();
        let osc: f64 = spec.terms.iter().map(|t| t.value(x, Default::default())).sum();
        main.add(-osc * s2 / (2.0 * sin_k));
        let decay = alpha1.map_or(0.0, |a| x.powf(-2.0 * a));
        weight.add(decay + spec.tail_value(n as u64).abs());
    }
    let lhs = traj.log_r_at(n2 + 1) - traj.log_r_at(n1);
    let mainsum = main.value();
    let weight = weight.value();
    let gap = (lhs - mainsum).abs();
    let fitted_c = if weight > 0.0 {
        gap / weight
    } else if gap == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(IteratedResidual {
        lhs,
        mainsum,
        weight,
        fitted_c,
        errbound: constant * weight,
    })
}

/// `max_n |η(n+1) - η(n)| / (n^{-α_1} + |V_0(n)|)` over the trajectory.
pub fn continuity_constant(traj: &PrueferTrajectory, spec: &PotentialSpec) -> f64 {
    let alpha1 = spec.alpha_min();
    let mut worst: f64 = 0.0;
    for n in 1..traj.len() {
        let d = (traj.eta_at(n + 1) - traj.eta_at(n)).abs();
        if d == 0.0 {
            continue;
        }
        let scale = alpha1.map_or(0.0, |a| (n as f64).powf(-a)) + spec.tail_value(n as u64).abs();
        worst = worst.max(if scale > 0.0 { d / scale } else { f64::INFINITY });
    }
    worst
}

/// Maximal relative defects of the two defining equations along `traj`
/// against the solution it was built from, for `n = 1..=N`.
pub fn defining_identity_defects(traj: &PrueferTrajectory, sol: &EigenSolution) -> (f64, f64) {
    let k = traj.k;
    let (s, c) = k.sin_cos();
    let mut worst = (0.0f64, 0.0f64);
    for n in 1..=traj.len().min(sol.len()) {
        let scale = sol.ln_scale(n);
        let r = (traj.log_r_at(n) - scale).exp();
        let (p, q) = sol.pair(n);
        let angle = angle_plus_linear(traj.eta_at(n), k, (n - 1) as f64);
        let (sa, ca) = angle.sin_cos();
        let norm = r.max(f64::MIN_POSITIVE);
        worst.0 = worst.0.max((r * ca - (q - c * p)).abs() / norm);
        worst.1 = worst.1.max((r * sa - s * p).abs() / norm);
    }
    worst
}
