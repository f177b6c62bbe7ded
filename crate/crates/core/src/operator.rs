//! The half-line operator
//!
//! ```text
//! (Hψ)(1) = ψ(2) + (V(1) + μ) ψ(1),   (Hψ)(n) = ψ(n+1) + ψ(n-1) + V(n) ψ(n)
//! ```
//!
//! and forward solutions of `Hψ = Eψ` at `E = 2 cos k`.

use std::f64::consts::PI;
use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::potentials::PotentialSpec;

/// Mantissas are rescaled by `2^-RESCALE_BITS` once they exceed this.
pub const OVERFLOW_GUARD: f64 = 1e150;
const RESCALE_BITS: i32 = 500;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryCondition {
    pub mu: f64,
    pub psi1: f64,
}

impl BoundaryCondition {
    pub fn new(mu: f64, psi1: f64) -> Result<Self> {
        if !mu.is_finite() || !psi1.is_finite() || psi1 == 0.0 {
            return Err(Error::Domain(format!("boundary condition needs finite mu and nonzero psi1, got ({mu}, {psi1})")));
        }
        Ok(Self { mu, psi1 })
    }

    /// `ψ_1 = 1`.
    pub fn normalized(mu: f64) -> Self {
        Self { mu, psi1: 1.0 }
    }
}

pub(crate) fn check_k(k: f64) -> Result<()> {
    if k > 0.0 && k < PI {
        Ok(())
    } else {
        Err(Error::KOutOfRange { k, lo: 0.0, hi: PI })
    }
}

/// A generalized eigenfunction `ψ_0, ..., ψ_N`.
///
/// Values are stored as mantissas together with the sites at which the
/// working pair was rescaled, so `ψ_n = mantissa(n) · 2^{500 · level(n)}`.
/// Without overflow every level is zero and mantissas are the plain values.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenSolution {
    pub k: f64,
    pub energy: f64,
    /// `ψ_0 / ψ_1` (infinite when `ψ_1 = 0`).
    pub mu: f64,
    mantissa: Vec<f64>,
    /// Sorted sites whose mantissa is the first one at a new level.
    rescale_at: Vec<usize>,
}

impl EigenSolution {
    /// Largest site index `N`.
    pub fn len(&self) -> usize {
        self.mantissa.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.mantissa.len() <= 1
    }

    pub fn mantissas(&self) -> &[f64] {
        &self.mantissa
    }

    pub fn level(&self, n: usize) -> i32 {
        self.rescale_at.partition_point(|&s| s <= n) as i32
    }

    pub fn rescale_sites(&self) -> &[usize] {
        &self.rescale_at
    }

    pub fn mantissa(&self, n: usize) -> f64 {
        self.mantissa[n]
    }

    /// `ψ_n` as a double (infinite once the true value leaves the range).
    pub fn psi(&self, n: usize) -> f64 {
        let level = self.level(n);
        if level == 0 {
            self.mantissa[n]
        } else {
            self.mantissa[n] * 2f64.powi(RESCALE_BITS).powi(level)
        }
    }

    pub fn ln_abs_psi(&self, n: usize) -> f64 {
        self.mantissa[n].abs().ln() + self.ln_scale(n)
    }

    /// `ln` of the factor relating `mantissa(n)` to `ψ_n`.
    pub fn ln_scale(&self, n: usize) -> f64 {
        f64::from(self.level(n) * RESCALE_BITS) * std::f64::consts::LN_2
    }

    /// `ψ_0, ..., ψ_N` as doubles.
    pub fn values(&self) -> Vec<f64> {
        (0..self.mantissa.len()).map(|n| self.psi(n)).collect()
    }

    /// `(ψ_{n-1}, ψ_n)` with both mantissas brought to the level of `ψ_n`.
    pub fn pair(&self, n: usize) -> (f64, f64) {
        let prev = self.mantissa[n - 1];
        let shift = self.level(n) - self.level(n - 1);
        let prev = if shift == 0 { prev } else { prev * 2f64.powi(-RESCALE_BITS * shift) };
        (prev, self.mantissa[n])
    }

    /// Relative residual of `ψ_{n+1} + ψ_{n-1} + (V(n) - E) ψ_n = 0` for
    /// `1 <= n <= N-1`, where `v` is `V(n)`.
    pub fn relative_residual(&self, n: usize, v: f64) -> f64 {
        let target = self.level(n + 1);
        let at = |m: usize| self.mantissa[m] * 2f64.powi(-RESCALE_BITS * (target - self.level(m)));
        let (a, b, c) = (at(n + 1), at(n - 1), (v - self.energy) * at(n));
        let scale = a.abs() + b.abs() + c.abs();
        if scale == 0.0 {
            0.0
        } else {
            (a + b + c).abs() / scale
        }
    }

    /// CSV with columns `n,psi`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "n,psi")?;
        for n in 0..self.mantissa.len() {
            writeln!(w, "{},{:.16e}", n, self.psi(n))?;
        }
        Ok(())
    }
}

/// Forward recursion from `(ψ_0, ψ_1)` with `v[n-1] = V(n)`.
pub fn solve_from_initial(v: &[f64], psi0: f64, psi1: f64, k: f64, n_max: usize) -> Result<EigenSolution> {
    check_k(k)?;
    if n_max < 2 {
        return Err(Error::Length { need: 2, got: n_max });
    }
    if v.len() + 1 < n_max {
        return Err(Error::Length { need: n_max - 1, got: v.len() });
    }
    let energy = 2.0 * k.cos();
    let mut mantissa = Vec::with_capacity(n_max + 1);
    mantissa.push(psi0);
    mantissa.push(psi1);
    let mut rescale_at = Vec::new();
    let (mut prev, mut cur) = (psi0, psi1);
    let down = 2f64.powi(-RESCALE_BITS);
    for n in 1..n_max {
        let mut next = (energy - v[n - 1]) * cur - prev;
        if next.abs() > OVERFLOW_GUARD {
            next *= down;
            cur *= down;
            rescale_at.push(n + 1);
        }
        mantissa.push(next);
        prev = cur;
        cur = next;
    }
    Ok(EigenSolution {
        k,
        energy,
        mu: if psi1 == 0.0 { f64::INFINITY } else { psi0 / psi1 },
        mantissa,
        rescale_at,
    })
}

/// Solves `ψ_{n+1} = (E - V(n)) ψ_n - ψ_{n-1}` with `ψ_0 = μ ψ_1` up to `ψ_N`.
pub fn solve_eigen_recursion(spec: &PotentialSpec, bc: BoundaryCondition, k: f64, n_max: usize) -> Result<EigenSolution> {
    check_k(k)?;
    if n_max < 2 {
        return Err(Error::Length { need: 2, got: n_max });
    }
    let v = spec.table(n_max - 1);
    solve_from_initial(&v, bc.mu * bc.psi1, bc.psi1, k, n_max)
}

/// Applies `H` to `psi[0] = ψ_1, psi[1] = ψ_2, ...`, taking `ψ` to vanish
/// past the last entry.
pub fn apply_hamiltonian(spec: &PotentialSpec, mu: f64, psi: &[f64]) -> Result<Vec<f64>> {
    if psi.len() < 2 {
        return Err(Error::Length { need: 2, got: psi.len() });
    }
    let len = psi.len();
    let out = (0..len)
        .map(|i| {
            let n = i as u64 + 1;
            let next = psi.get(i + 1).copied().unwrap_or(0.0);
            let v = spec.value(n);
            if i == 0 {
                next + (v + mu) * psi[0]
            } else {
                next + psi[i - 1] + v * psi[i]
            }
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{Mode, TailKind};

    #[test]
    fn free_recursion_has_period_four_at_zero_energy() {
        let sol = solve_eigen_recursion(&PotentialSpec::zero(), BoundaryCondition::normalized(0.0), PI / 2.0, 4).unwrap();
        let psi = sol.values();
        let expect = [0.0, 1.0, 0.0, -1.0, 0.0];
        for (a, b) in psi.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn boundary_parameter_enters_first_step() {
        let sol = solve_eigen_recursion(&PotentialSpec::zero(), BoundaryCondition::normalized(1.0), PI / 2.0, 3).unwrap();
        assert_eq!(sol.psi(0), 1.0);
        assert!((sol.psi(2) + 1.0).abs() < 1e-15);
        assert!((sol.psi(3) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_k() {
        for k in [0.0, PI, -1.0, 4.0] {
            let err = solve_eigen_recursion(&PotentialSpec::zero(), BoundaryCondition::normalized(0.0), k, 5).unwrap_err();
            assert_eq!(err.code(), "K_OUT_OF_RANGE");
        }
    }

    #[test]
    fn rejects_zero_psi1() {
        assert!(BoundaryCondition::new(0.0, 0.0).is_err());
    }

    #[test]
    fn canonical_solution_satisfies_recursion() {
        let spec = PotentialSpec::canonical(1.0, 1.0, 0.7, 1.2, Mode::Validated).unwrap();
        let n_max = 10_000;
        let sol = solve_eigen_recursion(&spec, BoundaryCondition::normalized(0.0), 1.0, n_max).unwrap();
        let v = spec.table(n_max);
        let worst = (1..n_max).map(|n| sol.relative_residual(n, v[n - 1])).fold(0.0, f64::max);
        assert!(worst <= 1e-12, "worst residual {worst}");
    }

    #[test]
    fn hamiltonian_examples() {
        let zero = PotentialSpec::zero();
        let out = apply_hamiltonian(&zero, 0.0, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(out, vec![0.0, 1.0, 0.0, 0.0]);
        let out = apply_hamiltonian(&zero, 5.0, &[1.0; 6]).unwrap();
        assert_eq!(out[0], 6.0);
        assert_eq!(apply_hamiltonian(&zero, 0.0, &[1.0]).unwrap_err().code(), "LENGTH");
    }

    #[test]
    fn eigen_solution_is_an_eigenvector_in_the_interior() {
        let spec = validate_with_tail();
        let mu = 0.3;
        let sol = solve_eigen_recursion(&spec, BoundaryCondition::new(mu, 2.0).unwrap(), 2.2, 500).unwrap();
        let psi = sol.values();
        let h = apply_hamiltonian(&spec, mu, &psi[1..]).unwrap();
        for n in 1..sol.len() {
            let e = sol.energy * psi[n];
            assert!((h[n - 1] - e).abs() <= 1e-12 * (e.abs() + psi[n + 1].abs() + psi[n - 1].abs()), "n={n}");
        }
    }

    fn validate_with_tail() -> PotentialSpec {
        let mut spec = PotentialSpec::canonical(0.8, 1.3, 0.8, 1.4, Mode::Validated).unwrap();
        spec.tail = PotentialSpec::tail_only(TailKind::Power { c: 0.4, p: 2.0 }).unwrap().tail;
        spec
    }

    #[test]
    fn free_solution_is_trigonometric() {
        let k = 0.9;
        let n_max = 100_000;
        let sol = solve_eigen_recursion(&PotentialSpec::zero(), BoundaryCondition::new(0.4, 1.0).unwrap(), k, n_max).unwrap();
        // ψ_n = a cos(kn) + b sin(kn) fitted at n = 1, 2
        let (c1, s1, c2, s2) = (k.cos(), k.sin(), (2.0 * k).cos(), (2.0 * k).sin());
        let det = c1 * s2 - c2 * s1;
        let a = (sol.psi(1) * s2 - sol.psi(2) * s1) / det;
        let b = (c1 * sol.psi(2) - c2 * sol.psi(1)) / det;
        let worst = (1..=n_max)
            .map(|n| {
                let x = k * n as f64;
                (sol.psi(n) - (a * x.cos() + b * x.sin())).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst <= 1e-9, "max deviation {worst}");
    }

    #[test]
    fn growing_solution_is_rescaled_not_overflowed() {
        // A large constant potential puts E outside the spectrum: exponential growth.
        let spec = PotentialSpec::tail_only(TailKind::Explicit { values: vec![10.0; 2000] }).unwrap();
        let sol = solve_eigen_recursion(&spec, BoundaryCondition::normalized(0.0), 1.0, 1000).unwrap();
        assert!(!sol.rescale_sites().is_empty());
        assert!(sol.mantissas().iter().all(|m| m.is_finite() && m.abs() <= OVERFLOW_GUARD));
        assert!(sol.ln_abs_psi(1000) > 1500.0);
        let worst = (1..1000).map(|n| sol.relative_residual(n, 10.0)).fold(0.0, f64::max);
        assert!(worst <= 1e-12);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let sol = solve_eigen_recursion(&PotentialSpec::zero(), BoundaryCondition::normalized(0.0), 1.0, 3).unwrap();
        let mut buf = Vec::new();
        sol.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "n,psi");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[2], "1,1.0000000000000000e0");
    }
}
