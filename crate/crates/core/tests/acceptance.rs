//! Acceptance checks. Runs without the libtest harness and prints one
//! PASS/FAIL line per criterion; exits nonzero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use votecount::bounds::{inference_lp_bounds_with, lp_extremes, LpBackend};
use votecount::construct::max_gap_lp;
use votecount::curves::{voter_counts, worst_case_rate_exact};
use votecount::estimate::variance_comparison;
use votecount::exactmath::{basis_error_rate, basis_error_rate_exact, delta_v, delta_v_exact};
use votecount::sim::simulate_vote_rate;
use votecount::sim::suite::random_cells;
use votecount::{
    binomial_box_constraints, build_basis, error_curve, run_suite, theorem4_distribution,
    worst_case_all_voting, EmpiricalErrorCounts, ErrorCountDistribution, Suite, SuiteConfig,
};

type Check = std::result::Result<String, String>;

fn big_binom(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let mut acc = BigUint::one();
    for j in 0..k {
        acc = acc * BigUint::from(n - j) / BigUint::from(j + 1);
    }
    acc
}

/// Hypergeometric majority-error tail, rebuilt here from scratch.
fn oracle_r(m: usize, i: usize, v: usize) -> BigRational {
    let mut num = BigUint::zero();
    for j in v.div_ceil(2)..=v {
        num += big_binom(i as u64, j as u64) * big_binom((m - i) as u64, (v - j) as u64);
    }
    BigRational::new(num.into(), big_binom(m as u64, v as u64).into())
}

fn ratio_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap()
}

fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).unwrap()
}

fn c1_subset_enumeration() -> Check {
    let mut cells = 0;
    for m in 1..=9usize {
        for i in 0..=m {
            for v in (1..=m).step_by(2) {
                // classifiers 0..i are the wrong ones
                let (mut bad, mut total) = (0u64, 0u64);
                for mask in 0u32..(1 << m) {
                    if mask.count_ones() as usize != v {
                        continue;
                    }
                    total += 1;
                    let wrong = (mask & ((1u32 << i) - 1)).count_ones() as usize;
                    if 2 * wrong > v {
                        bad += 1;
                    }
                }
                let brute = BigRational::new(bad.into(), total.into());
                let got = basis_error_rate_exact(m, i, v).map_err(|e| e.to_string())?;
                if got != brute {
                    return Err(format!("r({m},{i},{v}) = {got}, enumeration gives {brute}"));
                }
                let f = basis_error_rate(m, i, v).map_err(|e| e.to_string())?;
                if f != ratio_f64(&brute) {
                    return Err(format!("float r({m},{i},{v}) = {f} vs {}", ratio_f64(&brute)));
                }
                cells += 1;
            }
        }
    }
    Ok(format!("{cells} cells match exhaustive enumeration"))
}

fn c2_point_values() -> Check {
    let r = basis_error_rate_exact(101, 51, 1).map_err(|e| e.to_string())?;
    if r != BigRational::new(51.into(), 101.into()) {
        return Err(format!("r(101,51,1) = {r}"));
    }
    let all = basis_error_rate(101, 51, 101).map_err(|e| e.to_string())?;
    if all != 1.0 {
        return Err(format!("r(101,51,101) = {all}"));
    }
    // 0.1 has no binary representation, so exactness is checked in
    // rational arithmetic and the float path to the nearest ulp
    let exact = worst_case_rate_exact(3, &BigRational::new(1.into(), 10.into())).map_err(|e| e.to_string())?;
    if exact != BigRational::new(3.into(), 20.into()) {
        return Err(format!("exact worst case (3, 1/10) = {exact}"));
    }
    let worst = worst_case_all_voting(3, 0.1).map_err(|e| e.to_string())?;
    if (worst.rate - 0.15).abs() > f64::EPSILON * 0.15 {
        return Err(format!("worst case (3, 0.1) = {}", worst.rate));
    }
    // the witness reaches the bound exactly
    let witness_rate = oracle_r(3, 2, 3) * rational(worst.witness.get(2));
    if ratio_f64(&witness_rate) != worst.rate {
        return Err(format!("witness error {} != {}", ratio_f64(&witness_rate), worst.rate));
    }
    Ok(format!(
        "r(101,51,1)=51/101, r(101,51,101)=1, worst(3,1/10)=3/20 exactly (float path {})",
        worst.rate
    ))
}

fn c3_delta_signs() -> Check {
    let mut checked = 0;
    for m in 3..=25usize {
        for i in 0..=m {
            for v in (1..=m - 2).step_by(2) {
                let half = v.div_ceil(2);
                let expected = if i < half || m - i < half || 2 * i == m {
                    0
                } else if 2 * i < m {
                    -1
                } else {
                    1
                };
                let exact = delta_v_exact(m, i, v).map_err(|e| e.to_string())?;
                let diff = oracle_r(m, i, v + 2) - oracle_r(m, i, v);
                if exact != diff {
                    return Err(format!("closed form differs at ({m},{i},{v})"));
                }
                let float = delta_v(m, i, v).map_err(|e| e.to_string())?;
                let sign = |x: f64| (x > 0.0) as i32 - (x < 0.0) as i32;
                let exact_sign = if exact.is_zero() {
                    0
                } else if exact > BigRational::zero() {
                    1
                } else {
                    -1
                };
                if exact_sign != expected || sign(float) != expected {
                    return Err(format!(
                        "({m},{i},{v}): expected sign {expected}, exact {exact_sign}, float {float}"
                    ));
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} (m,i,v) signs, zero counterexamples"))
}

fn c4_constructive_argmin() -> Check {
    let m = 101;
    let rows: Vec<Vec<BigRational>> = (0..=m)
        .map(|i| voter_counts(m).map(|v| oracle_r(m, i, v)).collect())
        .collect();
    let basis = build_basis(m).map_err(|e| e.to_string())?;
    for vmin in (1..=m).step_by(2) {
        let w = theorem4_distribution(m, vmin).map_err(|e| format!("vmin={vmin}: {e}"))?;
        let curve = error_curve(&w, &basis).map_err(|e| e.to_string())?;
        if curve.argmin_v() != vmin {
            return Err(format!("vmin={vmin}: float argmin {}", curve.argmin_v()));
        }
        // exact curve of the (dyadic) weights
        let exact: Vec<BigRational> = (0..voter_counts(m).count())
            .map(|k| {
                w.support()
                    .iter()
                    .map(|&i| rational(w.get(i)) * &rows[i][k])
                    .fold(BigRational::zero(), |a, b| a + b)
            })
            .collect();
        let best = &exact[(vmin - 1) / 2];
        for (k, value) in exact.iter().enumerate() {
            if k != (vmin - 1) / 2 && value <= best {
                return Err(format!("vmin={vmin}: exact curve at v={} is not above", 2 * k + 1));
            }
        }
    }
    Ok("all 51 odd vmin are strict exact argmins".into())
}

fn c5_max_gap() -> Check {
    let m = 101;
    let (p, cap) = (0.3, 0.5);
    let basis = build_basis(m).map_err(|e| e.to_string())?;
    let r: Vec<Vec<f64>> = (0..=m)
        .map(|i| (0..=m).map(|v| if v % 2 == 1 { ratio_f64(&oracle_r(m, i, v)) } else { f64::NAN }).collect())
        .collect();
    let mut with_support = 0;
    let mut count = 0;
    let mut worst_residual: f64 = 0.0;
    for vmin in (1..=99).step_by(2) {
        let cert = max_gap_lp(&basis, vmin, p, cap).map_err(|e| format!("vmin={vmin}: {e}"))?;
        let w = cert.w.weights();
        let curve = |v: usize| -> f64 { (0..=m).map(|i| w[i] * r[i][v]).sum() };
        let mut residuals = vec![
            (w.iter().sum::<f64>() - 1.0).abs(),
            ((0..=m).map(|i| w[i] * i as f64 / m as f64).sum::<f64>() - p).abs(),
            (curve(m) - cap).max(0.0),
        ];
        residuals.extend(w.iter().map(|&x| (-x).max(0.0)));
        let mut neighbours = vec![vmin + 2];
        if vmin > 1 {
            neighbours.push(1);
        }
        if vmin > 3 {
            neighbours.push(vmin - 2);
        }
        for &u in &neighbours {
            residuals.push((curve(vmin) - curve(u)).max(0.0));
        }
        let residual = residuals.into_iter().fold(0.0, f64::max);
        worst_residual = worst_residual.max(residual);
        let gap = curve(m) - curve(vmin);
        if residual > 1e-8 {
            return Err(format!("vmin={vmin}: residual {residual:e}"));
        }
        if gap.is_nan() || gap <= 0.0 || !cert.locally_optimal {
            return Err(format!("vmin={vmin}: gap {gap}, locally optimal {}", cert.locally_optimal));
        }
        if (gap - cert.gap).abs() > 1e-8 {
            return Err(format!("vmin={vmin}: reported gap {} vs recomputed {gap}", cert.gap));
        }
        if w[0] > 0.0 && w[51] > 0.0 {
            with_support += 1;
        }
        count += 1;
    }
    let share = with_support as f64 / count as f64;
    if share < 0.8 {
        return Err(format!("w_0 and w_51 both positive for only {with_support}/{count}"));
    }
    Ok(format!(
        "{count} feasible certificates, max residual {worst_residual:.1e}, w_0 & w_51 support in {with_support}/{count}"
    ))
}

fn random_w(m: usize, rng: &mut ChaCha8Rng) -> ErrorCountDistribution {
    let sparse = rng.random_bool(0.5);
    let mut w: Vec<f64> = (0..=m)
        .map(|_| if sparse && rng.random_bool(0.7) { 0.0 } else { rng.random::<f64>() })
        .collect();
    if w.iter().all(|&x| x == 0.0) {
        w[rng.random_range(0..=m)] = 1.0;
    }
    let total: f64 = w.iter().sum();
    ErrorCountDistribution::new(w.into_iter().map(|x| x / total).collect()).unwrap()
}

fn c6_variance() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut violations = 0;
    for _ in 0..1000 {
        let m = rng.random_range(1..=25usize);
        let basis = build_basis(m).map_err(|e| e.to_string())?;
        let w = random_w(m, &mut rng);
        let v = 2 * rng.random_range(0..m.div_ceil(2)) + 1;
        let cmp = variance_comparison(&w, &basis, v).map_err(|e| e.to_string())?;
        let r: Vec<f64> = (0..=m).map(|i| ratio_f64(&oracle_r(m, i, v))).collect();
        let p: f64 = (0..=m).map(|i| w.get(i) * r[i]).sum();
        let second: f64 = (0..=m).map(|i| w.get(i) * r[i] * r[i]).sum();
        if (cmp.direct - (p - p * p)).abs() > 1e-12 || (cmp.inference - (second - p * p)).abs() > 1e-12 {
            return Err(format!("variance formulas disagree with oracle at m={m}, v={v}"));
        }
        if cmp.inference > cmp.direct {
            violations += 1;
        }
    }
    if violations > 0 {
        return Err(format!("{violations} analytic violations"));
    }
    let config = SuiteConfig {
        seed: 2024,
        ..SuiteConfig::default()
    };
    let reports = run_suite(Suite::Variance, &config).map_err(|e| e.to_string())?;
    let report = &reports[0];
    let order: Vec<_> = report.rows.iter().filter(|r| r.check == "variance-order").collect();
    if let Some(bad) = order.iter().find(|r| !r.passed) {
        return Err(format!(
            "empirical ordering fails at v={:?}: excess {} > envelope {}",
            bad.v, bad.observed, bad.envelope
        ));
    }
    Ok(format!(
        "1000 analytic cases, 0 violations; empirical ordering holds at {} voter counts ({} replications); full report {}",
        order.len(),
        report.replications,
        if report.passed() { "passes" } else { "has statistical misses" }
    ))
}

fn c7_coverage() -> Check {
    let config = SuiteConfig {
        seed: 2024,
        m: 11,
        n: Some(500),
        delta: 0.1,
        replications: Some(2000),
        ..SuiteConfig::default()
    };
    let reports = run_suite(Suite::Coverage, &config).map_err(|e| e.to_string())?;
    let rows: Vec<_> = reports[0].rows.iter().filter(|r| r.check.starts_with("coverage:")).collect();
    if rows.len() != 3 {
        return Err(format!("expected 3 coverage rows, found {}", rows.len()));
    }
    let detail = rows
        .iter()
        .map(|r| format!("{}={:.4}", &r.check["coverage:".len()..], r.observed))
        .collect::<Vec<_>>()
        .join(", ");
    match rows.iter().find(|r| !r.passed) {
        Some(r) => Err(format!("{} below {:.4}: {detail}", r.check, r.expected - r.envelope)),
        None => Ok(detail),
    }
}

fn c8_monte_carlo() -> Check {
    let reps = 100_000;
    let cells = random_cells(200, 101, 2024);
    let mut worst: f64 = 0.0;
    let results: Vec<std::result::Result<f64, String>> = {
        use rayon::prelude::*;
        cells
            .par_iter()
            .enumerate()
            .map(|(k, &(m, i, v))| {
                let exact = ratio_f64(&oracle_r(m, i, v));
                let got = simulate_vote_rate(m, i, v, reps, 2024 + k as u64).map_err(|e| e.to_string())?;
                let sigma = (exact * (1.0 - exact) / reps as f64).sqrt();
                let z = if sigma == 0.0 {
                    if got == exact { 0.0 } else { f64::INFINITY }
                } else {
                    (got - exact).abs() / sigma
                };
                if z > 3.0 {
                    Err(format!("r({m},{i},{v}) = {exact}, simulated {got} ({z:.2} sd)"))
                } else {
                    Ok(z)
                }
            })
            .collect()
    };
    let mut misses = Vec::new();
    for r in results {
        match r {
            Ok(z) => worst = worst.max(z),
            Err(e) => misses.push(e),
        }
    }
    if misses.is_empty() {
        Ok(format!("200 cells within 3 sd (largest {worst:.2} sd)"))
    } else {
        Err(misses.join("; "))
    }
}

/// Greedy oracle for `max/min sum w_i r_i` over the box and the simplex.
fn greedy(r: &[f64], lo: &[f64], hi: &[f64], maximize: bool) -> f64 {
    let mut order: Vec<usize> = (0..r.len()).collect();
    order.sort_by(|&a, &b| r[a].partial_cmp(&r[b]).unwrap());
    if maximize {
        order.reverse();
    }
    let mut w = lo.to_vec();
    let mut left = 1.0 - lo.iter().sum::<f64>();
    for i in order {
        let add = left.min(hi[i] - lo[i]).max(0.0);
        w[i] += add;
        left -= add;
    }
    w.iter().zip(r).map(|(a, b)| a * b).sum()
}

fn c9_lp_cross_check() -> Check {
    use rayon::prelude::*;
    let worst = (0..500u64)
        .into_par_iter()
        .map(|k| -> std::result::Result<f64, String> {
            let mut rng = ChaCha8Rng::seed_from_u64(9_000 + k);
            let m = rng.random_range(1..=31usize);
            let n = rng.random_range(1..=2000u64);
            let delta = rng.random_range(0.01..0.5);
            let w = random_w(m, &mut rng);
            let mut counts = vec![0u64; m + 1];
            for _ in 0..n {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let i = (0..=m)
                    .find(|&i| {
                        acc += w.get(i);
                        u < acc
                    })
                    .unwrap_or(m);
                counts[i] += 1;
            }
            let counts = EmpiricalErrorCounts::new(counts).map_err(|e| e.to_string())?;
            let boxes = binomial_box_constraints(&counts, delta).map_err(|e| e.to_string())?;
            let basis = build_basis(m).map_err(|e| e.to_string())?;
            let simplex = lp_extremes(&boxes, &basis, LpBackend::Simplex).map_err(|e| e.to_string())?;
            let fill = lp_extremes(&boxes, &basis, LpBackend::WaterFilling).map_err(|e| e.to_string())?;
            let band_s = inference_lp_bounds_with(&boxes, &basis, LpBackend::Simplex).map_err(|e| e.to_string())?;
            let band_f = inference_lp_bounds_with(&boxes, &basis, LpBackend::WaterFilling).map_err(|e| e.to_string())?;
            let mut worst: f64 = 0.0;
            for (idx, v) in voter_counts(m).enumerate() {
                let r = basis.column(v);
                let oracle = (
                    greedy(&r, &boxes.lower, &boxes.upper, false),
                    greedy(&r, &boxes.lower, &boxes.upper, true),
                );
                let (s, f) = (simplex[idx], fill[idx]);
                let (bs, bf) = (&band_s.entries[idx], &band_f.entries[idx]);
                for d in [
                    s.0 - f.0,
                    s.1 - f.1,
                    s.0 - oracle.0,
                    s.1 - oracle.1,
                    bs.lower - bf.lower,
                    bs.upper - bf.upper,
                ] {
                    worst = worst.max(d.abs());
                }
            }
            if worst > 1e-9 {
                return Err(format!("instance {k} (m={m}, n={n}): simplex and water-filling differ by {worst:e}"));
            }
            Ok(worst)
        })
        .collect::<std::result::Result<Vec<f64>, String>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(format!("500 instances, max difference {worst:.1e}"))
}

fn c10_determinism() -> Check {
    let config = SuiteConfig {
        seed: 77,
        replications: Some(400),
        cells: 20,
        analytic_cases: 50,
        ..SuiteConfig::default()
    };
    let render = |suite| -> std::result::Result<String, String> {
        Ok(run_suite(suite, &config)
            .map_err(|e| e.to_string())?
            .iter()
            .map(|r| r.to_csv())
            .collect())
    };
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| e.to_string())?;
    for suite in [Suite::Theorem1, Suite::Coverage, Suite::Variance, Suite::MonteCarlo] {
        let a = render(suite)?;
        let b = render(suite)?;
        let c = single.install(|| render(suite))?;
        if a != b || a != c {
            return Err(format!("{suite} report differs between runs"));
        }
    }
    Ok("theorem1, coverage, variance and montecarlo reports are byte-identical across reruns and thread counts".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("1 subset enumeration", c1_subset_enumeration),
        ("2 point values", c2_point_values),
        ("3 difference signs", c3_delta_signs),
        ("4 constructive argmin", c4_constructive_argmin),
        ("5 max-gap certificates", c5_max_gap),
        ("6 variance ordering", c6_variance),
        ("7 band coverage", c7_coverage),
        ("8 monte carlo agreement", c8_monte_carlo),
        ("9 lp cross-check", c9_lp_cross_check),
        ("10 determinism", c10_determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {name} ({secs:.2}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name} ({secs:.2}s): {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
