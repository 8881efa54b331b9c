//! End-to-end acceptance checks. Runs without the libtest harness so that every
//! check reports a PASS/FAIL line even when an earlier one fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use glt_core::glt::{laplacian_coefficients, shift_coefficients};
use glt_core::symbol::p_m_hat_of_values;
use glt_core::*;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = std::result::Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn lift<T>(r: glt_core::Result<T>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn re(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

/// `min(1, min_i (i/n + s_i))` over descending `s`, by exhaustive enumeration.
fn brute_p(values: &[f64]) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, v)| i as f64 / n + v)
        .fold(1.0, f64::min)
}

/// Singular values of the tridiagonal `T_n(2 - 2 cos)`, which is symmetric positive definite.
fn laplacian_sigma(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|j| 2.0 - 2.0 * (j as f64 * PI / (n + 1) as f64).cos())
        .collect()
}

/// Measure fraction of `{theta : 2 - 2 cos(theta) <= t}`.
fn laplacian_cdf(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 4.0 {
        1.0
    } else {
        (1.0 - t / 2.0).acos() / PI
    }
}

/// Minimizes the convex `t -> 1 - cdf(t) + t` on `[0, 1]` by ternary search.
fn laplacian_p_m_oracle() -> f64 {
    let g = |t: f64| 1.0 - laplacian_cdf(t) + t;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let (a, b) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
        if g(a) <= g(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    g(0.5 * (lo + hi)).min(1.0)
}

fn rho_equals_pm() -> Outcome {
    let grid = SymbolGrid::default();
    let shift = toeplitz_pair("e^it", shift_coefficients());
    let r = lift(check_rho_equals_pm(
        &shift,
        &[128, 256, 512, 1024],
        grid,
        1.0 / 1024.0,
        3,
    ))?;
    for (&n, &v) in r.rho.index_grid.iter().zip(&r.rho.values) {
        ensure!(
            v == (n - 1) as f64 / n as f64,
            "shift p_hat at n={n} is {v}"
        );
    }
    ensure!(r.p_m == 1.0, "shift p_m = {}", r.p_m);
    ensure!(r.gap <= 1.0 / 1024.0, "shift gap {} > 1/1024", r.gap);

    let lap = toeplitz_pair("2-2cos", laplacian_coefficients());
    let r2 = lift(check_rho_equals_pm(&lap, &[512, 1024, 2048], grid, 0.02, 3))?;
    let oracle = laplacian_p_m_oracle();
    for (&n, &v) in r2.rho.index_grid.iter().zip(&r2.rho.values) {
        let closed = brute_p(&laplacian_sigma(n));
        ensure!(
            (v - closed).abs() < 1e-12,
            "laplacian p_hat at n={n}: {v} vs closed form {closed}"
        );
    }
    let oracle_gap = (r2.rho.tail_estimate - oracle).abs();
    ensure!(
        (r2.p_m - oracle).abs() < 0.01,
        "sampled p_m {} vs oracle {oracle}",
        r2.p_m
    );
    ensure!(
        r2.gap <= 0.02 && oracle_gap <= 0.02,
        "laplacian gaps {} / {oracle_gap}",
        r2.gap
    );
    Ok(format!(
        "shift gap {:.3e}; laplacian rho tail {:.6} p_m {:.6} oracle {:.6} gap {:.3e}",
        r.gap,
        r2.rho.tail_estimate,
        r2.p_m,
        oracle,
        oracle_gap.max(r2.gap)
    ))
}

fn duality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let lengths = [1usize, 2, 17, 256, 65536];
    let per_length = 2000;
    let mut checked = 0;
    for &len in &lengths {
        for trial in 0..per_length {
            let scale = [0.01, 1.0, 100.0][trial % 3];
            let v: Vec<f64> = (0..len)
                .map(|_| {
                    let u: f64 = rng.gen();
                    if rng.gen_bool(0.1) {
                        0.0
                    } else {
                        scale * u * u * u
                    }
                })
                .collect();
            let lhs = lift(p_hat(&lift(Matrix::from_real_diagonal(&v))?))?;
            let rhs = lift(p_m_hat_of_values(&v))?;
            ensure!(
                lhs.to_bits() == rhs.to_bits(),
                "length {len} trial {trial}: {lhs:e} != {rhs:e}"
            );
            checked += 1;
        }
    }
    Ok(format!("{checked} vectors bit-identical"))
}

/// `f(theta) = sum_{k >= 1} 2^{-k} cos(k theta)` truncated to degree `m`.
fn truncation(m: usize) -> FourierData {
    FourierData::from_real_pairs((1..=m as i64).flat_map(|k| {
        let c = 0.5_f64.powi(k as i32 + 1);
        [(k, c), (-k, c)]
    }))
    .expect("finite")
}

fn completeness_splice() -> Outcome {
    let family = AcsFamily::new("cos truncations", |m, n| toeplitz(&truncation(m), n));
    let members: Vec<usize> = (1..=8).collect();
    let probe = [64, 128, 256, 512, 1024];
    let cauchy = lift(is_cauchy(
        &family,
        &members,
        &[64, 128, 256],
        2,
        CauchyCriteria::default(),
    ))?;
    ensure!(cauchy.verdict, "family not Cauchy: {:?}", cauchy.sup_tail);
    let splice = lift(splice_limit(
        &family,
        &members,
        &probe,
        &geometric_rates(&members),
    ))?;
    let mut worst = 0.0_f64;
    for m in 1..=6 {
        let d = lift(d_acs_ladder(&family.member(m), &splice.sequence, &probe, 3))?;
        let bound = 4.0 * 0.5_f64.powi(m as i32);
        ensure!(
            d.tail_estimate <= bound,
            "m={m}: tail {} > {bound}",
            d.tail_estimate
        );
        worst = worst.max(d.tail_estimate / bound);
    }
    Ok(format!(
        "thresholds {:?}; max tail/bound ratio {worst:.4}",
        splice.thresholds
    ))
}

fn laplacian_distribution() -> Outcome {
    let pair = toeplitz_pair("2-2cos", laplacian_coefficients());
    let n_grid = [128, 256, 512, 1024];
    let report = lift(check_sigma_distribution(
        &pair,
        &n_grid,
        SymbolGrid::default(),
        0.05,
    ))?;
    let t_grid = lift(threshold_grid(report.t_grid_max, verify::KS_GRID_POINTS))?;
    let mut closed = Vec::new();
    for &n in &n_grid {
        let sigma = lift(singular_values(&lift(pair.sequence.at(n))?))?;
        let mut exact = laplacian_sigma(n);
        exact.sort_by(|a, b| b.total_cmp(a));
        let err = sigma
            .values()
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        ensure!(
            err < 1e-12,
            "n={n}: singular values off closed form by {err:e}"
        );
        closed.push(lift(ks_against_cdf(
            sigma.values(),
            &t_grid,
            laplacian_cdf,
        ))?);
    }
    let non_increasing = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0]);
    ensure!(closed[3] <= 0.05, "closed-form KS {} > 0.05", closed[3]);
    ensure!(
        non_increasing(&closed),
        "closed-form KS not monotone: {closed:?}"
    );
    ensure!(report.verdict, "sampled-symbol KS {:?}", report.ks_values);
    ensure!(
        non_increasing(&report.ks_values),
        "sampled-symbol KS not monotone: {:?}",
        report.ks_values
    );
    ensure!(
        report.functional_verdict,
        "hat gap {}",
        report.tail_functional_gap()
    );
    Ok(format!(
        "KS vs closed form {:.5?}; vs sampled symbol {:.5?}",
        closed, report.ks_values
    ))
}

fn zero_distributed() -> Outcome {
    let n_grid = [64, 128, 256, 512, 1024, 2048, 4096];
    let low = lift(zero_pair(ZeroKind::LowRank {
        rank: RankProfile::Sqrt,
        seed: 11,
    }))?;
    let r = lift(rho_ladder(&low.sequence, &n_grid, 1))?;
    for (&n, &v) in n_grid.iter().zip(&r.values) {
        ensure!(
            v <= 1.0 / (n as f64).sqrt(),
            "low rank n={n}: {v} > 1/sqrt(n)"
        );
    }
    ensure!(
        r.tail_estimate <= 0.0157,
        "low rank value at n=4096 is {}",
        r.tail_estimate
    );

    let small = lift(zero_pair(ZeroKind::SmallNorm {
        norm: NormProfile::InverseLog,
        seed: 12,
    }))?;
    let s = lift(rho_ladder(&small.sequence, &n_grid, 3))?;
    let mut worst = 0.0_f64;
    for (&n, &v) in n_grid.iter().zip(&s.values) {
        let expected = (1.0 / (n as f64).ln()).min(1.0);
        worst = worst.max((v - expected).abs());
    }
    ensure!(worst <= 1e-10, "small norm ladder off by {worst:e}");
    Ok(format!(
        "low-rank ladder {:.5?}; small-norm max deviation {worst:.1e}",
        r.values
    ))
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let rank = rng.gen_range(0..=n / 2);
    let big = rng.gen_range(0.5..4.0) / (rank.max(1) as f64).sqrt();
    let noise = rng.gen_range(0.0..0.6) / (n as f64).sqrt();
    let complex = rng.gen_bool(0.5);
    let mut g = |s: f64| {
        let im = if complex {
            rng.gen_range(-1.0..1.0)
        } else {
            0.0
        };
        Complex64::new(rng.gen_range(-1.0..1.0), im) * s
    };
    let l: Vec<Complex64> = (0..n * rank).map(|_| g(big)).collect();
    let r: Vec<Complex64> = (0..rank * n).map(|_| g(1.0)).collect();
    let e: Vec<Complex64> = (0..n * n).map(|_| g(noise)).collect();
    Matrix::from_fn(n, |i, j| {
        (0..rank)
            .map(|k| l[i * rank + k] * r[k * n + j])
            .sum::<Complex64>()
            + e[i * n + j]
    })
    .expect("finite")
}

fn random_symbol(rng: &mut ChaCha8Rng, scale: f64) -> SymbolFunction {
    let c: Vec<Complex64> = (0..6)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale)
        .collect();
    let step = rng.gen_range(0.0..1.0);
    SymbolFunction::new("random", move |x, t| {
        let jump = if x < step { c[5] } else { re(0.0) };
        c[0] + c[1] * x
            + c[2] * x * x
            + c[3] * Complex64::new(t.cos(), t.sin())
            + c[4] * (2.0 * t).cos()
            + jump
    })
}

/// Three symbols at random mutual distances, so that near-equality cases occur.
fn random_triple(rng: &mut ChaCha8Rng) -> [SymbolFunction; 3] {
    let k = random_symbol(rng, 1.0);
    let mut scale = || 10f64.powf(rng.gen_range(-3.0..0.5));
    let (s1, s2) = (scale(), scale());
    let g = k.add(&random_symbol(rng, s1));
    let h = g.add(&random_symbol(rng, s2));
    [k, g, h]
}

fn metric_axioms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = f64::NEG_INFINITY;
    for trial in 0..1000 {
        let n = [8, 32, 128][trial % 3];
        let a = random_matrix(&mut rng, n);
        let b = random_matrix(&mut rng, n);
        let lhs = lift(p_hat(&lift(a.add(&b))?))?;
        let rhs = lift(p_hat(&a))? + lift(p_hat(&b))?;
        worst = worst.max(lhs - rhs);
        ensure!(
            lhs <= rhs + 1e-10,
            "triangle violated at trial {trial}: {lhs} > {rhs}"
        );
        let ab = lift(p_hat(&lift(a.sub(&b))?))?;
        let ba = lift(p_hat(&lift(b.sub(&a))?))?;
        ensure!(
            ab.to_bits() == ba.to_bits(),
            "asymmetric at trial {trial}: {ab} vs {ba}"
        );
    }
    let grid = SymbolGrid::new(32, 32).map_err(|e| e.to_string())?;
    let mut worst_m = f64::NEG_INFINITY;
    for trial in 0..1000 {
        let [k, g, h] = random_triple(&mut rng);
        let kh = lift(d_m_hat(&k, &h, grid))?;
        let via = lift(d_m_hat(&k, &g, grid))? + lift(d_m_hat(&g, &h, grid))?;
        worst_m = worst_m.max(kh - via);
        ensure!(
            kh <= via + 1e-12,
            "d_m triangle violated at trial {trial}: {kh} > {via}"
        );
    }
    Ok(format!(
        "max p_hat excess {worst:.3e}; max d_m excess {worst_m:.3e}; symmetry exact"
    ))
}

fn catalog() -> Vec<GltPair> {
    let lap = toeplitz_pair("2-2cos", laplacian_coefficients());
    let x = diag_pair("x", re);
    vec![
        lap.clone(),
        toeplitz_pair("e^it", shift_coefficients()),
        x.clone(),
        pair_mul(&x, &lap),
        toeplitz_pair(
            "1",
            FourierData::from_real_pairs([(0, 1.0)]).expect("finite"),
        ),
    ]
}

fn isometry() -> Outcome {
    let pairs = catalog();
    let grid = SymbolGrid::default();
    let mut worst = 0.0_f64;
    let mut count = 0;
    for i in 0..pairs.len() {
        for j in i + 1..pairs.len() {
            let (p, q) = (&pairs[i], &pairs[j]);
            let seq = lift(d_acs_ladder(&p.sequence, &q.sequence, &[2048], 1))?.tail_estimate;
            let sym = lift(d_m_hat(&p.symbol, &q.symbol, grid))?;
            let gap = (seq - sym).abs();
            ensure!(
                gap <= 0.05,
                "{} vs {}: d_acs {seq} d_m {sym}",
                p.label(),
                q.label()
            );
            worst = worst.max(gap);
            count += 1;
        }
    }
    Ok(format!("{count} pairs, max |d_acs - d_m| {worst:.3e}"))
}

fn density() -> Outcome {
    let k = SymbolFunction::new("x e^it", |x, t| x * Complex64::new(t.cos(), t.sin()));
    let grid = SymbolGrid::default();
    let m_grid: Vec<usize> = (1..=6).collect();
    let mut approximants = Vec::new();
    let mut ladder = Vec::new();
    for &m in &m_grid {
        let p = lift(dense_symbol_approximant(&k, m))?;
        ladder.push(lift(d_m_hat(&p.symbol, &k, grid))?);
        approximants.push(p);
    }
    ensure!(
        ladder.windows(2).all(|w| w[1] <= w[0]),
        "d_m ladder not monotone: {ladder:?}"
    );
    ensure!(ladder[5] <= 0.05, "d_m at m=6 is {}", ladder[5]);

    let members = approximants.clone();
    let family = AcsFamily::new("approximants", move |m, n| members[m - 1].sequence.at(n));
    let cauchy = lift(is_cauchy(
        &family,
        &m_grid,
        &[128, 256, 512],
        2,
        CauchyCriteria::default(),
    ))?;
    ensure!(
        cauchy.verdict,
        "approximant family not Cauchy: {:?}",
        cauchy.sup_tail
    );
    let probe = [128, 256, 512, 1024];
    let splice = lift(splice_limit(
        &family,
        &m_grid,
        &probe,
        &geometric_rates(&m_grid),
    ))?;
    let limit = GltPair::new(splice.sequence, k);
    let report = lift(check_sigma_distribution(
        &limit,
        &[256, 512, 1024],
        grid,
        0.07,
    ))?;
    ensure!(report.verdict, "KS {:?}", report.ks_values);
    Ok(format!(
        "d_m ladder {:.5?}; KS at n=1024 {:.3e}",
        ladder,
        report.tail_ks()
    ))
}

fn bitwise_equal(a: &DistributionReport, b: &DistributionReport) -> bool {
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    a.n_grid == b.n_grid
        && bits(&a.ks_values) == bits(&b.ks_values)
        && a.functional_gaps.len() == b.functional_gaps.len()
        && a.functional_gaps
            .iter()
            .zip(&b.functional_gaps)
            .all(|(x, y)| bits(x) == bits(y))
        && a.t_grid_max.to_bits() == b.t_grid_max.to_bits()
        && a.verdict == b.verdict
        && a.functional_verdict == b.functional_verdict
}

fn rearrangement() -> Outcome {
    let lap = toeplitz_pair("2-2cos", laplacian_coefficients());
    let pair = pair_mul(&diag_pair("x", re), &lap);
    let n_grid = [128, 256, 512, 1024];
    let grid = SymbolGrid::default();
    let base = lift(check_sigma_distribution(&pair, &n_grid, grid, 0.05))?;
    for which in [Rearrangement::ReflectX, Rearrangement::ReflectTheta] {
        let moved = pair.with_symbol(rearrange(&pair.symbol, which));
        let other = lift(check_sigma_distribution(&moved, &n_grid, grid, 0.05))?;
        ensure!(bitwise_equal(&base, &other), "{which:?} changed the report");
    }
    ensure!(base.verdict, "KS {:?}", base.ks_values);
    Ok(format!("reports bit-identical; KS {:.5?}", base.ks_values))
}

fn main() {
    let checks: [Check; 9] = [
        ("rho equals p_m", rho_equals_pm),
        ("diagonal / sample duality", duality),
        ("completeness splice", completeness_splice),
        (
            "laplacian singular value distribution",
            laplacian_distribution,
        ),
        ("zero-distributed ladders", zero_distributed),
        ("metric axioms", metric_axioms),
        ("sequence/symbol isometry", isometry),
        ("density of approximants", density),
        ("rearrangement invariance", rearrangement),
    ];
    let total = checks.len();
    let mut failures = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS [{}/{total}] {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL [{}/{total}] {name} ({secs:.1}s): {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", total - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
