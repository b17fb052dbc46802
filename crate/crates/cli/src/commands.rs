use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};

use votecount::bounds::{binomial_box_constraints_with, inference_lp_bounds};
use votecount::construct::{max_gap_lp, theorem4_distribution_with};
use votecount::estimate::direct_curve;
use votecount::exactmath::BinomialInversion;
use votecount::{
    build_basis, direct_hoeffding_band, error_curve, inference_estimate, inference_hoeffding_band,
    run_suite, select_voters, BandMethod, BasisMatrix, ConfidenceBand, Error, ErrorCountDistribution,
    ErrorCurve, EstimatorMethod, LpError, Selection, Suite, SuiteConfig, ValidationSample,
};

use crate::io::{read_sample, read_weights, writer};
use crate::{
    ConstructArgs, ConstructMethod, CurveArgs, Estimator, Outcome, SelectArgs, SuiteArg,
    VerifyArgs,
};

fn finish(mut out: Box<dyn Write>, path: Option<&Path>) -> Result<()> {
    out.flush().with_context(|| match path {
        Some(p) => format!("cannot write {}", p.display()),
        None => "cannot write stdout".into(),
    })
}

/// Long-form basis table, rows ordered by `i` then `v`.
pub fn basis(m: usize, output: Option<&Path>) -> Result<Outcome> {
    let basis = build_basis(m)?;
    let mut out = writer(output)?;
    writeln!(out, "i,v,r")?;
    for i in 0..=m {
        for (v, r) in basis.voter_counts().zip(basis.row(i)) {
            writeln!(out, "{i},{v},{r}")?;
        }
    }
    finish(out, output)?;
    Ok(Outcome::Success)
}

/// Parses `7`, `1,3,9`, `1..99` or a mix of those, keeping odd values.
pub fn parse_vmin(spec: &str, m: usize) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (lo, hi) = match part.split_once("..") {
            Some((a, b)) => (a.trim().parse::<usize>()?, b.trim().trim_start_matches('=').parse::<usize>()?),
            None => {
                let v = part.parse::<usize>().with_context(|| format!("bad vmin {part:?}"))?;
                if v % 2 == 0 {
                    bail!("vmin {v} is even");
                }
                (v, v)
            }
        };
        if hi > m {
            bail!("vmin {hi} exceeds m={m}");
        }
        out.extend((lo..=hi).filter(|v| v % 2 == 1));
    }
    if out.is_empty() {
        bail!("no odd vmin in {spec:?}");
    }
    Ok(out)
}

struct Construction {
    vmin: usize,
    status: String,
    w: Option<ErrorCountDistribution>,
    curve: Option<ErrorCurve>,
    locally_optimal: Option<bool>,
    globally_optimal: Option<bool>,
    max_residual: Option<f64>,
}

fn construct_one(basis: &BasisMatrix, a: &ConstructArgs, vmin: usize) -> Result<Construction> {
    let empty = |status: String| Construction {
        vmin,
        status,
        w: None,
        curve: None,
        locally_optimal: None,
        globally_optimal: None,
        max_residual: None,
    };
    match a.method {
        ConstructMethod::Lp => match max_gap_lp(basis, vmin, a.p, a.cap) {
            Ok(cert) => Ok(Construction {
                vmin,
                status: "ok".into(),
                w: Some(cert.w),
                curve: Some(cert.curve),
                locally_optimal: Some(cert.locally_optimal),
                globally_optimal: Some(cert.globally_optimal),
                max_residual: Some(cert.max_residual),
            }),
            Err(Error::Lp(LpError::Infeasible { .. })) => Ok(empty("infeasible".into())),
            Err(Error::Lp(LpError::Unbounded)) => Ok(empty("unbounded".into())),
            Err(Error::Verification(msg)) => Ok(empty(format!("failed: {msg}"))),
            Err(e) => Err(e.into()),
        },
        ConstructMethod::Theorem4 => match theorem4_distribution_with(basis, vmin) {
            Ok(w) => {
                let curve = error_curve(&w, basis)?;
                let strict = curve.argmin_v() == vmin && curve.is_strict_argmin(vmin);
                Ok(Construction {
                    vmin,
                    status: "ok".into(),
                    locally_optimal: Some(strict),
                    globally_optimal: Some(strict),
                    max_residual: None,
                    w: Some(w),
                    curve: Some(curve),
                })
            }
            Err(Error::Verification(msg)) => Ok(empty(format!("failed: {msg}"))),
            Err(e) => Err(e.into()),
        },
    }
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|x| x.to_string()).unwrap_or_default()
}

pub fn construct(a: &ConstructArgs) -> Result<Outcome> {
    let m = a.m;
    let basis = build_basis(m)?;
    let top = match a.method {
        ConstructMethod::Lp => m.saturating_sub(1),
        ConstructMethod::Theorem4 => m,
    };
    let vmins = match &a.vmin {
        Some(spec) => parse_vmin(spec, m)?,
        None => (1..=top).step_by(2).collect(),
    };
    let results = vmins
        .iter()
        .map(|&v| construct_one(&basis, a, v))
        .collect::<Result<Vec<_>>>()?;

    let mut out = writer(a.output.as_deref())?;
    writeln!(
        out,
        "vmin,status,argmin_v,gap,locally_optimal,globally_optimal,max_residual,mean_error,support"
    )?;
    let mut failed = false;
    for c in &results {
        if c.status.starts_with("failed") {
            failed = true;
        }
        if c.status != "ok" {
            eprintln!("vmin={}: {}", c.vmin, c.status);
        }
        let support = c
            .w
            .as_ref()
            .map(|w| {
                w.support()
                    .iter()
                    .map(usize::to_string)
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            c.vmin,
            c.status.replace(',', ";"),
            opt(c.curve.as_ref().map(|k| k.argmin_v())),
            opt(c.curve.as_ref().map(|k| k.value(m) - k.value(c.vmin))),
            opt(c.locally_optimal),
            opt(c.globally_optimal),
            opt(c.max_residual),
            opt(c.w.as_ref().map(|w| w.mean_error_rate())),
            support
        )?;
    }
    finish(out, a.output.as_deref())?;

    if let Some(path) = &a.curves {
        let mut out = writer(Some(path))?;
        writeln!(out, "vmin,v,error")?;
        for c in &results {
            if let Some(curve) = &c.curve {
                for (v, e) in curve.points() {
                    writeln!(out, "{},{v},{e}", c.vmin)?;
                }
            }
        }
        finish(out, Some(path))?;
    }
    if let Some(path) = &a.weights {
        let mut out = writer(Some(path))?;
        writeln!(out, "vmin,i,w")?;
        for c in &results {
            if let Some(w) = &c.w {
                for (i, x) in w.weights().iter().enumerate() {
                    writeln!(out, "{},{i},{x}", c.vmin)?;
                }
            }
        }
        finish(out, Some(path))?;
    }
    let ok = results.iter().filter(|c| c.status == "ok").count();
    eprintln!("{ok} of {} vmin values constructed", results.len());
    Ok(if failed {
        Outcome::VerificationFailed
    } else {
        Outcome::Success
    })
}

pub fn curve(a: &CurveArgs) -> Result<Outcome> {
    let w = read_weights(&a.input, a.vmin, a.m)?;
    let basis = build_basis(w.m())?;
    let curve = error_curve(&w, &basis)?;
    let mut out = writer(a.output.as_deref())?;
    writeln!(out, "v,error")?;
    for (v, e) in curve.points() {
        writeln!(out, "{v},{e}")?;
    }
    finish(out, a.output.as_deref())?;
    eprintln!("argmin v={} error={}", curve.argmin_v(), curve.min_value());
    Ok(Outcome::Success)
}

pub fn select(a: &SelectArgs) -> Result<Outcome> {
    let sample = read_sample(&a.input, a.format, a.m)?;
    let m = sample.m();
    let n = sample.n() as u64;
    let basis = build_basis(m)?;
    let method = match a.method {
        Estimator::Direct => EstimatorMethod::Direct,
        Estimator::Inference => EstimatorMethod::Inference,
    };
    let selection = select_voters(&sample, &basis, method, a.seed)?;

    let band = band_for(BandMethod::from(a.bound), &sample, &basis, &selection, a)?;
    let mut out = writer(a.output.as_deref())?;
    writeln!(out, "v,estimate,lower,center,upper,selected")?;
    for ((v, est), entry) in selection.curve.points().zip(&band.entries) {
        writeln!(
            out,
            "{v},{est},{},{},{},{}",
            entry.lower,
            entry.estimate,
            entry.upper,
            u8::from(v == selection.v)
        )?;
    }
    finish(out, a.output.as_deref())?;
    eprintln!(
        "selected v={} (estimate {}, {} estimator, seed {}); {} band at delta={} over n={}: mean width {:.6}, width at v {:.6}",
        selection.v,
        selection.curve.value(selection.v),
        match a.method {
            Estimator::Direct => "direct",
            Estimator::Inference => "inference",
        },
        a.seed,
        BandMethod::from(a.bound),
        a.delta,
        n,
        band.mean_width(),
        band.entry(selection.v).width()
    );

    // every band the sample supports, for a side by side comparison
    let mut widths = Vec::new();
    for method in BandMethod::ALL {
        if method == BandMethod::DirectHoeffding && sample.matrix().is_none() {
            continue;
        }
        let b = if method == band.method { band.clone() } else { band_for(method, &sample, &basis, &selection, a)? };
        widths.push(format!(
            "{method} {:.6} (at v {:.6})",
            b.mean_width(),
            b.entry(selection.v).width()
        ));
    }
    eprintln!("mean band widths: {}", widths.join(", "));
    Ok(Outcome::Success)
}

fn band_for(
    method: BandMethod,
    sample: &ValidationSample,
    basis: &BasisMatrix,
    selection: &Selection,
    a: &SelectArgs,
) -> Result<ConfidenceBand> {
    let m = sample.m();
    let n = sample.n() as u64;
    Ok(match method {
        BandMethod::DirectHoeffding => {
            let k = match &selection.direct_errors {
                Some(k) => k.clone(),
                None => direct_curve(sample, a.seed)
                    .context("the direct Hoeffding band needs a full error matrix")?
                    .1,
            };
            direct_hoeffding_band(&k, n, m, a.delta)?
        }
        BandMethod::InferenceHoeffding => {
            let curve = inference_estimate(sample, basis)?;
            inference_hoeffding_band(&curve, n, a.delta)?
        }
        BandMethod::InferenceBoxLp => {
            let counts = sample.empirical();
            let per = a.delta / (2 * (m + 1)) as f64;
            let inversion = BinomialInversion {
                tolerance: a.tolerance,
            };
            let boxes = binomial_box_constraints_with(&counts, a.delta, &vec![per; m + 1], inversion)?;
            inference_lp_bounds(&boxes, basis)?
        }
    })
}

pub fn verify(a: &VerifyArgs) -> Result<Outcome> {
    let suite = match a.suite {
        SuiteArg::Theorem1 => Suite::Theorem1,
        SuiteArg::Coverage => Suite::Coverage,
        SuiteArg::Variance => Suite::Variance,
        SuiteArg::Montecarlo => Suite::MonteCarlo,
        SuiteArg::All => Suite::All,
    };
    let config = SuiteConfig {
        seed: a.seed,
        replications: a.replications,
        m: a.m,
        n: a.n,
        delta: a.delta,
        sigmas: a.sigmas,
        ..SuiteConfig::default()
    };
    let reports = run_suite(suite, &config)?;
    let mut out = writer(a.output.as_deref())?;
    writeln!(out, "{}", votecount::sim::REPORT_HEADER)?;
    for r in &reports {
        write!(out, "{}", r.csv_rows())?;
    }
    finish(out, a.output.as_deref())?;
    let mut passed = true;
    for r in &reports {
        eprintln!("{}", r.summary());
        for row in r.failures() {
            eprintln!(
                "  failed {} v={}: observed {} expected {} envelope {}",
                row.check,
                opt(row.v),
                row.observed,
                row.expected,
                row.envelope
            );
        }
        passed &= r.passed();
    }
    Ok(if passed {
        Outcome::Success
    } else {
        Outcome::VerificationFailed
    })
}
