//! Combinatorial kernels for subset voting.
//!
//! Everything here is a pure function of its arguments. The hypergeometric
//! voting error `r(m, i, v)` is available in two arithmetic modes: exact
//! big-integer rationals and log-space floating point with compensated
//! summation. [`Arithmetic::auto`] picks exact for `m <= 64`.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use statrs::function::factorial::ln_binomial;
use statrs::function::gamma::gamma_lr;

use crate::error::{check_unit_open, Error, Result};

/// Largest ensemble size for which [`Arithmetic::auto`] selects exact rationals.
pub const EXACT_LIMIT: usize = 64;

/// Arithmetic used to evaluate hypergeometric sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arithmetic {
    /// Big-integer numerator and denominator, rounded once to `f64`.
    Exact,
    /// `exp` of log-binomials, summed with Neumaier compensation.
    LogSpace,
}

impl Arithmetic {
    pub fn auto(m: usize) -> Self {
        if m <= EXACT_LIMIT {
            Arithmetic::Exact
        } else {
            Arithmetic::LogSpace
        }
    }
}

/// Compensated (Neumaier) summation.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Exact binomial coefficient `C(n, k)`; zero when `k < 0` or `k > n`.
pub fn binom(n: u64, k: i64) -> BigUint {
    if k < 0 || k as u64 > n {
        return BigUint::zero();
    }
    let k = (k as u64).min(n - k as u64);
    let mut acc = BigUint::one();
    for j in 1..=k {
        // acc * (n - k + j) is always divisible by j at this point
        acc *= n - k + j;
        acc /= j;
    }
    acc
}

/// `ln C(n, k)`, or `-inf` outside the support.
pub fn ln_binom(n: u64, k: i64) -> f64 {
    if k < 0 || k as u64 > n {
        f64::NEG_INFINITY
    } else {
        ln_binomial(n, k as u64)
    }
}

pub(crate) fn check_voters(m: usize, v: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::EmptyEnsemble);
    }
    if v == 0 || v.is_multiple_of(2) || v > m {
        return Err(Error::InvalidVoterCount { m, v });
    }
    Ok(())
}

pub(crate) fn check_errors(m: usize, i: usize) -> Result<()> {
    if i > m {
        Err(Error::InvalidErrorCount { m, i })
    } else {
        Ok(())
    }
}

/// Returns `Some(0.0)` or `Some(1.0)` when the incorrect (or correct) voters can
/// never (or always) form a majority.
fn saturated(m: usize, i: usize, v: usize) -> Option<f64> {
    let majority = v.div_ceil(2);
    if i < majority {
        Some(0.0)
    } else if m - i < majority {
        Some(1.0)
    } else {
        None
    }
}

/// Expected majority-vote error rate when `v` voters are drawn without
/// replacement from `m` classifiers of which `i` are in error.
pub fn basis_error_rate(m: usize, i: usize, v: usize) -> Result<f64> {
    basis_error_rate_with(Arithmetic::auto(m), m, i, v)
}

pub fn basis_error_rate_with(mode: Arithmetic, m: usize, i: usize, v: usize) -> Result<f64> {
    check_voters(m, v)?;
    check_errors(m, i)?;
    if let Some(r) = saturated(m, i, v) {
        return Ok(r);
    }
    Ok(match mode {
        Arithmetic::Exact => ratio_to_f64(&basis_ratio(m, i, v)),
        Arithmetic::LogSpace => basis_log_space(m, i, v),
    })
}

/// `r(m, i, v)` as an exact rational.
pub fn basis_error_rate_exact(m: usize, i: usize, v: usize) -> Result<BigRational> {
    check_voters(m, v)?;
    check_errors(m, i)?;
    Ok(basis_ratio(m, i, v))
}

fn basis_ratio(m: usize, i: usize, v: usize) -> BigRational {
    let (m64, i64_, v64) = (m as u64, i as u64, v as i64);
    let mut numer = BigUint::zero();
    for j in v.div_ceil(2)..=v.min(i) {
        numer += binom(i64_, j as i64) * binom(m64 - i64_, v64 - j as i64);
    }
    BigRational::new(BigInt::from(numer), BigInt::from(binom(m64, v64)))
}

fn basis_log_space(m: usize, i: usize, v: usize) -> f64 {
    let (m64, i64_) = (m as u64, i as u64);
    let ln_total = ln_binom(m64, v as i64);
    let lo = v.div_ceil(2).max(v.saturating_sub(m - i));
    let hi = v.min(i);
    let r = compensated_sum((lo..=hi).map(|j| {
        (ln_binom(i64_, j as i64) + ln_binom(m64 - i64_, (v - j) as i64) - ln_total).exp()
    }));
    r.clamp(0.0, 1.0)
}

pub(crate) fn ratio_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Change in voting error from adding two voters, `r(m,i,v+2) - r(m,i,v)`,
/// evaluated through the factored closed form whose only signed factor is
/// `2i - m`.
pub fn delta_v(m: usize, i: usize, v: usize) -> Result<f64> {
    delta_v_with(Arithmetic::auto(m), m, i, v)
}

pub fn delta_v_with(mode: Arithmetic, m: usize, i: usize, v: usize) -> Result<f64> {
    match mode {
        Arithmetic::Exact => delta_v_exact(m, i, v).map(|d| ratio_to_f64(&d)),
        Arithmetic::LogSpace => {
            check_delta(m, i, v)?;
            Ok(delta_log_space(m, i, v))
        }
    }
}

fn check_delta(m: usize, i: usize, v: usize) -> Result<()> {
    check_voters(m, v)?;
    check_errors(m, i)?;
    if v + 2 > m {
        return Err(Error::InvalidVoterCount { m, v: v + 2 });
    }
    Ok(())
}

/// Zero factor test shared by both arithmetic paths.
fn delta_vanishes(m: usize, i: usize, v: usize) -> bool {
    let half = (v - 1) / 2;
    i == 0 || i == m || i - 1 < half || m - i - 1 < half || 2 * i == m
}

pub fn delta_v_exact(m: usize, i: usize, v: usize) -> Result<BigRational> {
    check_delta(m, i, v)?;
    if delta_vanishes(m, i, v) {
        return Ok(BigRational::zero());
    }
    let half = ((v - 1) / 2) as i64;
    let (m64, i64_) = (m as u64, i as u64);
    let numer = BigInt::from(i64_)
        * BigInt::from(binom(i64_ - 1, half))
        * BigInt::from(m64 - i64_)
        * BigInt::from(binom(m64 - i64_ - 1, half))
        * BigInt::from(2 * i as i64 - m as i64);
    let denom = BigInt::from(binom(m64, v as i64))
        * BigInt::from(half as u64 + 1)
        * BigInt::from((m - v) as u64)
        * BigInt::from((m - v - 1) as u64);
    Ok(BigRational::new(numer, denom))
}

fn delta_log_space(m: usize, i: usize, v: usize) -> f64 {
    if delta_vanishes(m, i, v) {
        return 0.0;
    }
    let half = ((v - 1) / 2) as i64;
    let (mf, f) = (m as f64, i as f64);
    let signed = 2.0 * f - mf;
    let ln_mag = f.ln() + ln_binom(i as u64 - 1, half) + (mf - f).ln()
        + ln_binom((m - i - 1) as u64, half)
        + signed.abs().ln()
        - ln_binom(m as u64, v as i64)
        - ((half + 1) as f64).ln()
        - ((m - v) as f64).ln()
        - ((m - v - 1) as f64).ln();
    signed.signum() * ln_mag.exp()
}

fn ln_binom_pmf(n: u64, j: u64, ln_q: f64, ln_1mq: f64) -> f64 {
    ln_binomial(n, j) + j as f64 * ln_q + (n - j) as f64 * ln_1mq
}

/// `P(Bin(n, q) <= k)`.
pub fn binomial_cdf(n: u64, k: u64, q: f64) -> f64 {
    if k >= n || q <= 0.0 {
        return 1.0;
    }
    if q >= 1.0 {
        return 0.0;
    }
    let (ln_q, ln_1mq) = (q.ln(), (-q).ln_1p());
    compensated_sum((0..=k).map(|j| ln_binom_pmf(n, j, ln_q, ln_1mq).exp())).clamp(0.0, 1.0)
}

/// `P(Bin(n, q) >= k)`, summed directly over the upper tail.
pub fn binomial_sf(n: u64, k: u64, q: f64) -> f64 {
    if k == 0 || q >= 1.0 {
        return if k <= n { 1.0 } else { 0.0 };
    }
    if k > n || q <= 0.0 {
        return 0.0;
    }
    let (ln_q, ln_1mq) = (q.ln(), (-q).ln_1p());
    compensated_sum((k..=n).map(|j| ln_binom_pmf(n, j, ln_q, ln_1mq).exp())).clamp(0.0, 1.0)
}

/// Binomial tail inversion by bisection on the success probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinomialInversion {
    /// Absolute bisection tolerance on `q`.
    pub tolerance: f64,
}

impl Default for BinomialInversion {
    fn default() -> Self {
        Self { tolerance: 1e-10 }
    }
}

impl BinomialInversion {
    fn check(n: u64, k: u64, delta: f64) -> Result<()> {
        check_unit_open("delta", delta)?;
        if n == 0 {
            return Err(Error::EmptySample);
        }
        if k > n {
            return Err(Error::OutOfRange {
                name: "k",
                value: k as f64,
                range: "0..=n",
            });
        }
        Ok(())
    }

    /// Smallest `q >= k/n` with `P(Bin(n, q) <= k) <= delta`.
    pub fn upper(&self, n: u64, k: u64, delta: f64) -> Result<f64> {
        Self::check(n, k, delta)?;
        if k == n {
            return Ok(1.0);
        }
        let (mut lo, mut hi) = (k as f64 / n as f64, 1.0);
        if binomial_cdf(n, k, lo) <= delta {
            return Ok(lo);
        }
        while hi - lo > self.tolerance {
            let mid = 0.5 * (lo + hi);
            if binomial_cdf(n, k, mid) <= delta {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// Largest `q <= k/n` with `P(Bin(n, q) >= k) <= delta`.
    pub fn lower(&self, n: u64, k: u64, delta: f64) -> Result<f64> {
        Self::check(n, k, delta)?;
        if k == 0 {
            return Ok(0.0);
        }
        let (mut lo, mut hi) = (0.0, k as f64 / n as f64);
        if binomial_sf(n, k, hi) <= delta {
            return Ok(hi);
        }
        while hi - lo > self.tolerance {
            let mid = 0.5 * (lo + hi);
            if binomial_sf(n, k, mid) <= delta {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }
}

/// PAC upper bound `u(n, k, delta)` at the default tolerance.
pub fn binomial_upper(n: u64, k: u64, delta: f64) -> Result<f64> {
    BinomialInversion::default().upper(n, k, delta)
}

/// PAC lower bound `t(n, k, delta)` at the default tolerance.
pub fn binomial_lower(n: u64, k: u64, delta: f64) -> Result<f64> {
    BinomialInversion::default().lower(n, k, delta)
}

/// Half-width `sqrt((ln(m+1) - ln delta) / 2n)` of the simultaneous Hoeffding
/// band over all `(m+1)/2` voter counts.
pub fn hoeffding_margin(n: u64, m: usize, delta: f64) -> Result<f64> {
    check_unit_open("delta", delta)?;
    if n == 0 {
        return Err(Error::EmptySample);
    }
    Ok(((((m + 1) as f64).ln() - delta.ln()) / (2.0 * n as f64)).sqrt())
}

/// Pearson statistic; a zero hypothesised weight with nonzero observed weight
/// makes it infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PearsonX2 {
    Finite(f64),
    Infinite,
}

impl PearsonX2 {
    pub fn value(self) -> f64 {
        match self {
            PearsonX2::Finite(x) => x,
            PearsonX2::Infinite => f64::INFINITY,
        }
    }
}

/// `(m+1) * sum_i (w_hat_i - w_i)^2 / w_i`, terms with `w_i = w_hat_i = 0` skipped.
pub fn pearson_x2(w: &[f64], w_hat: &[f64]) -> Result<PearsonX2> {
    if w.len() != w_hat.len() {
        return Err(Error::LengthMismatch {
            expected: w.len(),
            actual: w_hat.len(),
        });
    }
    if w.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let mut terms = Vec::with_capacity(w.len());
    for (&p, &q) in w.iter().zip(w_hat) {
        if p == 0.0 {
            if q != 0.0 {
                return Ok(PearsonX2::Infinite);
            }
            continue;
        }
        terms.push((q - p) * (q - p) / p);
    }
    Ok(PearsonX2::Finite(w.len() as f64 * compensated_sum(terms)))
}

/// Chi-squared CDF with `df` degrees of freedom.
pub fn chi_squared_cdf(df: usize, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x.is_infinite() {
        1.0
    } else {
        gamma_lr(df as f64 / 2.0, x / 2.0)
    }
}

/// Critical value `c` with `P(chi2_df > c) = alpha`, by bisection.
pub fn chi_squared_critical(df: usize, alpha: f64) -> Result<f64> {
    check_unit_open("alpha", alpha)?;
    if df == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let target = 1.0 - alpha;
    let mut hi = df.max(1) as f64;
    while chi_squared_cdf(df, hi) < target {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > 1e-10 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if chi_squared_cdf(df, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
