//! Acceptance suite. Runs every criterion in sequence (so wall times are
//! not skewed by other tests) and writes one PASS/FAIL line per criterion
//! straight to stderr.

use std::f64::consts::{PI, SQRT_2};
use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use osclab::dd::wrap_angle;
use osclab::expsum::{block_sums, closed_form_resonance, kuzmin_landau_check, resonance_points, BlockConfig, Perturbation};
use osclab::kruger::{half_length, kruger_report, KrugerParams, Side};
use osclab::operator::{solve_from_initial, BoundaryCondition};
use osclab::pruefer::{defining_identity_defects, evolve_exact, iterated_residual, pruefer_from_solution_table};
use osclab::spectra::{
    evolve_log_radius_table, regression_slope, subordinacy_profile, sweep, write_sweep_csv, RegimeLabel, SweepConfig,
};
use osclab::{validate_spec, Mode, PhaseSpec, PotentialSpec, RawSpec, RawTerm, TailKind};

struct Outcome {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn report(o: &Outcome, took: Duration) {
    let tag = if o.pass { "PASS" } else { "FAIL" };
    let line = format!("criterion {:>2} {tag}  {}: {} [{:.1?}]\n", o.id, o.name, o.detail, took);
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn random_spec(rng: &mut ChaCha8Rng) -> PotentialSpec {
    loop {
        let terms = (0..rng.gen_range(1..=2))
            .map(|_| {
                let alpha: f64 = rng.gen_range(0.55..=1.0);
                let beta = rng.gen_range(1.02..(2.0 * alpha).min(1.98));
                let lower_order = if rng.gen_bool(0.3) {
                    vec![(rng.gen_range(-1.0..1.0), rng.gen_range(0.2..beta - 0.05))]
                } else {
                    Vec::new()
                };
                let (zeta, gamma) = if rng.gen_bool(0.3) {
                    (rng.gen_range(-0.5..0.5), rng.gen_range((1.0 - alpha + 0.05).min(1.0)..=1.0))
                } else {
                    (0.0, 1.0)
                };
                RawTerm {
                    lambda: rng.gen_range(-1.5..1.5),
                    alpha,
                    omega: rng.gen_range(0.3..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
                    beta,
                    lower_order,
                    zeta,
                    gamma,
                }
            })
            .collect();
        let tail = if rng.gen_bool(0.3) {
            TailKind::Power { c: rng.gen_range(-1.0..1.0), p: rng.gen_range(1.2..3.0) }
        } else {
            TailKind::None
        };
        if let Ok(spec) = validate_spec(&RawSpec { terms, tail }, Mode::Validated) {
            return spec;
        }
    }
}

/// Criteria 1 and 2 share the corpus of trajectories.
fn pruefer_corpus() -> (Outcome, Outcome) {
    const SETS: usize = 200;
    const N: usize = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let (mut r_err, mut eta_err): (f64, f64) = (0.0, 0.0);
    let (mut def_err, mut res_err): (f64, f64) = (0.0, 0.0);
    let mut c1_time = Duration::ZERO;
    let mut table_time = Duration::ZERO;
    for _ in 0..SETS {
        let spec = random_spec(&mut rng);
        let k = rng.gen_range(0.1..PI - 0.1);
        let mu = rng.gen_range(-2.0..2.0);
        let psi1 = rng.gen_range(0.5..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let bc = BoundaryCondition::new(mu, psi1).unwrap();
        let t = Instant::now();
        let v = spec.table(N);
        table_time += t.elapsed();
        let t = Instant::now();
        let chained = evolve_exact(&v, bc, k, N).unwrap();
        let sol = solve_from_initial(&v, mu * psi1, psi1, k, N).unwrap();
        let read = pruefer_from_solution_table(&sol, &v).unwrap();
        for n in 1..=N {
            let dr = (chained.log_r_at(n) - read.log_r_at(n)).exp_m1().abs();
            r_err = r_err.max(dr);
            eta_err = eta_err.max(wrap_angle(chained.eta_at(n) - read.eta_at(n)).abs());
        }
        c1_time += t.elapsed();
        let (d1, d2) = defining_identity_defects(&chained, &sol);
        def_err = def_err.max(d1).max(d2);
        for n in 1..N {
            res_err = res_err.max(sol.relative_residual(n, v[n - 1]));
        }
    }
    let c1 = Outcome {
        id: 1,
        name: "Prüfer chaining vs solution read-off",
        pass: r_err <= 1e-9 && eta_err <= 1e-9 && c1_time <= Duration::from_secs(60),
        detail: format!(
            "{SETS} sets, N = {N}: max rel R {r_err:.2e}, max |Δη| mod 2π {eta_err:.2e} (tol 1e-9); \
             evolution and comparison {c1_time:.1?} (need <= 60 s), potential tables {table_time:.1?}"
        ),
    };
    let c2 = Outcome {
        id: 2,
        name: "defining equations and three-term residual",
        pass: def_err <= 1e-10 && res_err <= 1e-10,
        detail: format!("max defining-equation defect {def_err:.2e}, max recursion residual {res_err:.2e} (tol 1e-10)"),
    };
    (c1, c2)
}

fn criterion_3() -> Outcome {
    const N2: usize = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(0xC3);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let alpha = 0.55 + 0.45 * i as f64 / 19.0;
        let beta = rng.gen_range(1.02..(2.0 * alpha).min(1.95));
        let mut terms = vec![RawTerm {
            lambda: rng.gen_range(0.5..1.5),
            alpha,
            omega: rng.gen_range(0.5..2.0),
            beta,
            lower_order: Vec::new(),
            zeta: 0.0,
            gamma: 1.0,
        }];
        if i % 3 == 1 {
            let a2 = rng.gen_range(alpha..=1.0);
            terms.push(RawTerm {
                lambda: rng.gen_range(-1.0..1.0),
                alpha: a2,
                omega: rng.gen_range(0.5..2.0),
                beta: rng.gen_range(1.02..(2.0 * a2).min(1.95)),
                lower_order: Vec::new(),
                zeta: 0.0,
                gamma: 1.0,
            });
        }
        let tail = if i % 4 == 2 { TailKind::Power { c: 0.5, p: 1.5 } } else { TailKind::None };
        let spec = validate_spec(&RawSpec { terms, tail }, Mode::Validated).unwrap();
        let k = rng.gen_range(0.4..PI - 0.4);
        let bc = BoundaryCondition::normalized(rng.gen_range(-1.0..1.0));
        let v = spec.table(N2 + 1);
        let traj = evolve_exact(&v, bc, k, N2 + 1).unwrap();
        let r = iterated_residual(&traj, &spec, 1, N2, 5.0).unwrap();
        worst = worst.max(r.fitted_c);
    }
    Outcome {
        id: 3,
        name: "iterated residual against first-order sum",
        pass: worst <= 5.0,
        detail: format!("20 cases, alpha_1 in [0.55, 1], N2 = {N2}: fitted C = {worst:.3} (need <= 5)"),
    }
}

fn criterion_4() -> Outcome {
    const N: usize = 1 << 20;
    let spec = PotentialSpec::canonical(1.0, 1.0, 0.7, 1.2, Mode::Validated).unwrap();
    let v = spec.table(N);
    let (mut worst_step, mut worst_final): (f64, f64) = (0.0, 0.0);
    let mut worst_c: f64 = 0.0;
    let ls: Vec<usize> = [1e3, 2e3, 5e3, 1e4, 2e4, 5e4, 1e5, 2e5, 5e5, 1e6].iter().map(|&x| x as usize).collect();
    for k in [0.5, 1.0, 1.5, 2.0, 2.5] {
        for mu in [-1.0, 0.0, 1.0] {
            let rep = evolve_log_radius_table(&v, BoundaryCondition::normalized(mu), k).unwrap();
            let osc: Vec<f64> = rep.windows.iter().filter(|w| (1 << 10..=1 << 19).contains(&w.m)).map(|w| w.osc).collect();
            assert_eq!(osc.len(), 10);
            let step = osc.windows(2).map(|p| p[1] / p[0]).fold(0.0, f64::max);
            worst_step = worst_step.max(step);
            worst_final = worst_final.max(osc[9] / osc[0]);
        }
        for (_, r) in subordinacy_profile(&v, k, &ls).unwrap() {
            worst_c = worst_c.max(r).max(1.0 / r);
        }
    }
    Outcome {
        id: 4,
        name: "dyadic oscillation decay and subordinacy",
        pass: worst_step <= 1.1 && worst_final <= 0.5 && worst_c <= 10.0,
        detail: format!(
            "max window-to-window factor {worst_step:.3} (need <= 1.1), max last/first {worst_final:.3} (need <= 0.5), subordinacy C {worst_c:.3} (need <= 10)"
        ),
    }
}

fn criterion_5() -> Outcome {
    let mut worst: f64 = 0.0;
    for beta in [1.2, 1.5, 1.8] {
        for omega in [1.0, SQRT_2] {
            let pts = resonance_points(&PhaseSpec::pure(omega, beta), 10, 10_000).unwrap();
            for p in pts {
                let c = closed_form_resonance(omega, beta, p.l);
                worst = worst.max((p.y - c).abs() / c);
            }
        }
    }
    let y3 = resonance_points(&PhaseSpec::pure(1.0, 1.5), 3, 3).unwrap()[0].y;
    let y3_err = (y3 - 16.0).abs() / 16.0;
    Outcome {
        id: 5,
        name: "resonance points",
        pass: worst <= 1e-12 && y3_err <= 1e-12,
        detail: format!("max rel closed-form vs root-finder {worst:.2e}, Y_3(1, 3/2) = {y3:.17} (rel err {y3_err:.1e})"),
    }
}

fn criterion_6() -> Outcome {
    let ls = [100, 215, 464, 1000, 2154, 4642, 10_000];
    let cfg = BlockConfig { rho: 0.7, gamma: 1.0, v_l1: 0.0, eps: 0.05 };
    let rows = block_sums(&PhaseSpec::pure(1.0, 1.3), &Perturbation::None, &ls, cfg).unwrap();
    let norm: Vec<f64> = rows.iter().map(|r| r.normalized()).collect();
    let sup = norm.iter().cloned().fold(0.0, f64::max);
    let inf = norm.iter().cloned().fold(f64::INFINITY, f64::min);
    let listed: Vec<String> = ls.iter().zip(&norm).map(|(l, x)| format!("{l}:{x:.3}")).collect();
    Outcome {
        id: 6,
        name: "block sum scaling",
        pass: sup / inf <= 30.0,
        detail: format!("normalized |S_l| {} ; sup/inf {:.3} (need <= 30)", listed.join(" "), sup / inf),
    }
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC7);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let a: f64 = rng.gen_range(0.0..1e4);
        let b = a + rng.gen_range(1.0..1e4);
        let j = f64::from(rng.gen_range(-3..=3));
        let r = if i % 2 == 0 {
            let theta = rng.gen_range(0.01..0.99) + j;
            kuzmin_landau_check(|x| theta * x, |_| theta, a, b).unwrap()
        } else {
            let (u, w) = (rng.gen_range(0.02..0.98f64), rng.gen_range(0.02..0.98f64));
            let (start, end) = if i % 4 == 1 { (u.min(w), u.max(w)) } else { (u.max(w), u.min(w)) };
            let (start, end) = (start + j, end + j);
            let c = (end - start) / (2.0 * (b - a));
            kuzmin_landau_check(|x| start * (x - a) + c * (x - a) * (x - a), |x| start + 2.0 * c * (x - a), a, b).unwrap()
        };
        worst = worst.max(r.ratio);
    }
    Outcome {
        id: 7,
        name: "Kuzmin-Landau",
        pass: worst <= 3.0,
        detail: format!("1000 linear/quadratic phases: max abs_sum * kappa = {worst:.4} (need <= 3)"),
    }
}

/// Smallest integer `ℓ` with `ℓ^15 ≥ 2^{4k}`, i.e. `⌈2^{4k/15}⌉`.
fn ell_oracle(k: u32) -> u64 {
    let target = 1u128 << (4 * k);
    (1u64..).find(|&l| (l as u128).pow(15) >= target).unwrap()
}

fn criterion_8() -> Outcome {
    let (alpha, beta) = (0.2, 1.2);
    let eps = (2.0 - beta - 2.0 * alpha) / 6.0;
    let slope_cap = -(alpha + 4.0 * eps) + 0.05;
    let ks: Vec<u32> = (16..=26).collect();
    let (mut built, mut total) = (0, 0);
    let mut worst_slope = f64::NEG_INFINITY;
    let (mut ell_ok, mut nominal_ok, mut block_ok) = (true, true, true);
    for omegaprime in [0.0, 0.3, 0.7] {
        let p = KrugerParams::new(1.0, SQRT_2, alpha, beta, omegaprime);
        let rec = kruger_report(&p, &ks);
        for side in [Side::Minus, Side::Plus] {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for r in rec.iter().filter(|r| r.side == side) {
                total += 1;
                let Ok((iv, ver)) = &r.outcome else { continue };
                built += 1;
                let ell = ell_oracle(r.k);
                ell_ok &= iv.ell == ell && iv.len() == 2 * ell + 1 && half_length(alpha, beta, r.k) == ell;
                nominal_ok &= iv.nominal_bracket_holds();
                block_ok &= iv.block_bracket_holds();
                xs.push(f64::from(r.k));
                ys.push(ver.linf.log2());
            }
            if xs.len() >= 2 {
                worst_slope = worst_slope.max(regression_slope(&xs, &ys));
            }
        }
    }
    Outcome {
        id: 8,
        name: "almost Mathieu approximation",
        pass: built == total && worst_slope <= slope_cap && ell_ok && nominal_ok,
        detail: format!(
            "builds {built}/{total}; worst slope of log2 linf {worst_slope:.4} (need <= {slope_cap:.4}); #I = 2l+1 exact: {ell_ok}; \
             lambda' in [lambda/2^((k+1)a), lambda/2^((k-2)a)]: {nominal_ok}; lambda' within its block range: {block_ok}"
        ),
    }
}

fn criterion_9() -> Outcome {
    let cfg = SweepConfig::from_toml("points = [[0.7, 1.2], [0.2, 1.5]]\nk = [1.0]\nmu = [0.0]\nN = [1000000]\n").unwrap();
    let rows = sweep(&cfg);
    let labels: Vec<String> = rows
        .iter()
        .map(|r| r.outcome.as_ref().map_or_else(|e| e.code().to_string(), |s| s.evidence.label.as_str().to_string()))
        .collect();
    let want = [RegimeLabel::AcConsistent, RegimeLabel::Growing];
    let pass = rows.iter().zip(want).all(|(r, w)| r.outcome.as_ref().is_ok_and(|s| s.evidence.label == w));
    Outcome {
        id: 9,
        name: "regime split",
        pass,
        detail: format!("(0.7, 1.2) -> {}, (0.2, 1.5) -> {} at N = 10^6", labels[0], labels[1]),
    }
}

fn criterion_10() -> Outcome {
    let cfg = SweepConfig::from_toml(
        "alpha = [0.3, 0.6, 0.9]\nbeta = [0.8, 1.3, 1.7]\nk = [0.7, 2.2]\nmu = [0.0, 0.5]\nN = [20000]\nlambda = [1.0, 3.0]\n",
    )
    .unwrap();
    let mut outputs = Vec::new();
    for jobs in [1, 2, 3, 8] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().unwrap();
        let rows = pool.install(|| sweep(&cfg));
        let mut bytes = Vec::new();
        write_sweep_csv(&rows, &mut bytes).unwrap();
        outputs.push(bytes);
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    Outcome {
        id: 10,
        name: "determinism across worker counts",
        pass: same,
        detail: format!("{}-node sweep with 1, 2, 3, 8 workers: byte-identical CSV: {same}", cfg.nodes().len()),
    }
}

#[test]
fn acceptance_criteria() {
    let mut failed = Vec::new();
    let mut record = |o: Outcome, took: Duration| {
        report(&o, took);
        if !o.pass {
            failed.push(o.id);
        }
    };

    let t = Instant::now();
    let (c1, c2) = pruefer_corpus();
    let took = t.elapsed();
    let _ = std::io::stderr().write_all(b"\n");
    record(c1, took);
    record(c2, took);

    type Criterion = fn() -> Outcome;
    let rest: [(Criterion, Option<u64>); 8] = [
        (criterion_3, None),
        (criterion_4, Some(300)),
        (criterion_5, None),
        (criterion_6, Some(300)),
        (criterion_7, None),
        (criterion_8, Some(300)),
        (criterion_9, None),
        (criterion_10, None),
    ];
    for (f, limit) in rest {
        let t = Instant::now();
        let mut o = f();
        let took = t.elapsed();
        if let Some(secs) = limit {
            if took > Duration::from_secs(secs) {
                o.pass = false;
                o.detail.push_str(&format!("; runtime over {secs} s"));
            }
        }
        record(o, took);
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
