//! Exploration-round planning.
//!
//! Fusing by thresholding the per-cell observation mean succeeds with
//! per-cell confidence `d` once enough rounds have been collected. Under
//! the Gaussian approximation of the mean, both failure modes (obstacle
//! read free, free read obstacle) are controlled by the standard-normal
//! tail bounds `a = quantile(1-d) < 0` and `b = -a`, giving the minimal
//! round count
//!
//! ```text
//! N(d) = ceil( ((b*sqrt(1-q') - a*sqrt(p)) / (p + q' - 1))^2 )
//! ```
//!
//! and, for any `n >= N(d)`, the admissible threshold interval
//!
//! ```text
//! b*sqrt(1-q')/sqrt(n) + 1-q'  <=  C  <=  a*sqrt(p)/sqrt(n) + p .
//! ```
//!
//! When only `n < N(d)` rounds are available, the symmetric threshold
//! equalizes the two tails and yields the best degraded confidence `d'`.
//! Exact binomial tails quantify how far the Gaussian approximation is
//! from the truth at small `n`.

use serde::Serialize;

use crate::error::{Error, Result};

const SQRT_2: f64 = core::f64::consts::SQRT_2;

/// Validated planning inputs.
///
/// `p + q' > 1` is required: otherwise the threshold window `(1-q', p)`
/// is empty and no number of rounds separates the two cases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceParams {
    p: f64,
    q_prime: f64,
    d: f64,
}

impl ConfidenceParams {
    pub fn new(p: f64, q_prime: f64, d: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Parameter("p must lie in (0,1)"));
        }
        if !(q_prime > 0.0 && q_prime < 1.0) {
            return Err(Error::Parameter("q' must lie in (0,1)"));
        }
        if !(d > 0.0 && d < 1.0) { // planning additionally needs d > 0.5
            return Err(Error::Parameter("d must lie in (0,1)"));
        }
        if p + q_prime <= 1.0 {
            return Err(Error::Parameter("p + q' must exceed 1"));
        }
        Ok(Self { p, q_prime, d })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q_prime(&self) -> f64 {
        self.q_prime
    }

    pub fn d(&self) -> f64 {
        self.d
    }
}

/// Standard normal CDF, absolute error well below `1e-9`.
pub fn std_normal_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain("cdf argument must be finite"));
    }
    Ok(0.5 * libm::erfc(-x / SQRT_2))
}

fn std_normal_pdf(x: f64) -> f64 {
    libm::exp(-0.5 * x * x) / libm::sqrt(2.0 * core::f64::consts::PI)
}

// Rational approximation coefficients (Acklam), |relative error| < 1.15e-9
// before refinement.
const A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.383577518672690e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
const C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549732539343734e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const D: [f64; 4] = [
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e+00,
    3.754408661907416e+00,
];
const P_LOW: f64 = 0.02425;

fn quantile_approx(u: f64) -> f64 {
    if u < P_LOW {
        let q = libm::sqrt(-2.0 * libm::log(u));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if u <= 1.0 - P_LOW {
        let q = u - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = libm::sqrt(-2.0 * libm::log(1.0 - u));
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Inverse of [`std_normal_cdf`]: rational approximation plus one Halley
/// step against the CDF, so `|cdf(quantile(u)) - u| <= 1e-9` throughout.
pub fn std_normal_quantile(prob: f64) -> Result<f64> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::Domain("quantile argument must lie in (0,1)"));
    }
    let x = quantile_approx(prob);
    let pdf = std_normal_pdf(x);
    if pdf == 0.0 {
        // Deep in a tail the density underflows; the approximation alone
        // already pins the CDF to within absolute 1e-9 there.
        return Ok(x);
    }
    let err = 0.5 * libm::erfc(-x / SQRT_2) - prob;
    let r = err / pdf;
    Ok(x - r / (1.0 + 0.5 * x * r))
}

/// Symmetric tail bounds for target confidence `d`:
/// `a = quantile(1-d) < 0`, `b = -a`. Needs `0.5 < d < 1`.
pub fn tail_bounds(d: f64) -> Result<(f64, f64)> {
    if !(d > 0.5 && d < 1.0) {
        return Err(Error::Parameter(
            "confidence d must lie in (0.5, 1) so that a(d) < 0",
        ));
    }
    let a = std_normal_quantile(1.0 - d)?;
    Ok((a, -a))
}

/// Round `v` to 12 significant decimal digits. Applied before the ceiling
/// so last-bit noise cannot inflate the round count.
fn round_sig12(v: f64) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    let exp = libm::floor(libm::log10(libm::fabs(v)));
    let scale = libm::pow(10.0, 11.0 - exp);
    libm::round(v * scale) / scale
}

/// Minimal number of exploration rounds for confidence `d` (at least 1).
pub fn required_rounds(params: &ConfidenceParams) -> Result<u32> {
    let (a, b) = tail_bounds(params.d)?;
    let numerator = b * libm::sqrt(1.0 - params.q_prime) - a * libm::sqrt(params.p);
    let inner = numerator / (params.p + params.q_prime - 1.0);
    let n = libm::ceil(round_sig12(inner * inner));
    if n > u32::MAX as f64 {
        return Err(Error::Parameter("required round count exceeds u32 range"));
    }
    Ok((n as u32).max(1))
}

/// The admissible threshold interval `[c_low, c_high]` for `n` rounds.
/// Empty (inverted) intervals signal `n < N(d)`.
pub fn threshold_interval(params: &ConfidenceParams, n: u32) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::Parameter("round count must be at least 1"));
    }
    let (a, b) = tail_bounds(params.d)?;
    let sqrt_n = libm::sqrt(n as f64);
    let c_low = b * libm::sqrt(1.0 - params.q_prime) / sqrt_n + (1.0 - params.q_prime);
    let c_high = a * libm::sqrt(params.p) / sqrt_n + params.p;
    if c_low > c_high {
        return Err(Error::InfeasibleRounds {
            rounds: n,
            required: required_rounds(params)?,
        });
    }
    Ok((c_low, c_high))
}

/// Midpoint of an admissible interval: equidistant from both failure modes.
pub fn choose_threshold(c_low: f64, c_high: f64) -> Result<f64> {
    if c_low > c_high {
        return Err(Error::Parameter("threshold interval is empty (c_low > c_high)"));
    }
    Ok(0.5 * (c_low + c_high))
}

/// Best achievable confidence with a fixed round budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DegradedPlan {
    /// Confidence reached by `n` rounds under the symmetric threshold.
    pub d_prime: f64,
    /// The tail-equalizing threshold.
    pub c: f64,
}

/// When only `n < N(d)` rounds fit the budget, the symmetric threshold
///
/// ```text
/// C = (p*sqrt(1-q') + (1-q')*sqrt(p)) / (sqrt(p) + sqrt(1-q'))
/// ```
///
/// makes both error tails equal and achieves the best obtainable
/// confidence `d' = 1 - cdf((1-p-q')*sqrt(n)/(sqrt(p)+sqrt(1-q')))`.
pub fn achievable_confidence(p: f64, q_prime: f64, n: u32) -> Result<DegradedPlan> {
    if !(p > 0.0 && p < 1.0) || !(q_prime > 0.0 && q_prime < 1.0) {
        return Err(Error::Parameter("p and q' must lie in (0,1)"));
    }
    if p + q_prime <= 1.0 {
        return Err(Error::Parameter("p + q' must exceed 1"));
    }
    if n == 0 {
        return Err(Error::Parameter("round count must be at least 1"));
    }
    let sp = libm::sqrt(p);
    let sq = libm::sqrt(1.0 - q_prime);
    let c = (p * sq + (1.0 - q_prime) * sp) / (sp + sq);
    let z = (1.0 - p - q_prime) * libm::sqrt(n as f64) / (sp + sq);
    let d_prime = 1.0 - std_normal_cdf(z)?;
    Ok(DegradedPlan { d_prime, c })
}

/// Smallest per-cell count `k` with `k/n >= c`; `n+1` when no count
/// reaches the threshold. Uses the same floating comparison as mean-map
/// fusion, so both views of the rule agree bit for bit.
pub fn count_threshold(c: f64, n: u32) -> u32 {
    for k in 0..=n {
        if k as f64 / n as f64 >= c {
            return k;
        }
    }
    n + 1
}

fn ln_choose(n: u32, k: u32) -> f64 {
    libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0)
        - libm::lgamma((n - k) as f64 + 1.0)
}

/// `P(Bin(n, p) >= k)`, summed in log space. Exact-tail guards keep the
/// degenerate probabilities 0 and 1 exact.
pub fn binomial_tail_ge(n: u32, p: f64, k: u32) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let ln_p = libm::log(p);
    let ln_1mp = libm::log(1.0 - p);
    let mut total = 0.0;
    for j in k..=n {
        total += libm::exp(ln_choose(n, j) + j as f64 * ln_p + (n - j) as f64 * ln_1mp);
    }
    if total > 1.0 {
        1.0
    } else {
        total
    }
}

/// Exact per-cell confidences of threshold fusion at `(n, c)`, bypassing
/// the Gaussian approximation:
/// obstacle side `P(Bin(n,p)/n >= c)`, free side `P(Bin(n,1-q')/n < c)`.
pub fn exact_confidence(params: &ConfidenceParams, n: u32, c: f64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::Parameter("round count must be at least 1"));
    }
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::Parameter("threshold must lie in (0,1)"));
    }
    let k = count_threshold(c, n);
    let obstacle = binomial_tail_ge(n, params.p, k);
    let free = 1.0 - binomial_tail_ge(n, 1.0 - params.q_prime, k);
    Ok((obstacle, free))
}

/// Complete plan for a target confidence: round count, threshold interval,
/// chosen threshold, tail bounds, and exact binomial diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanResult {
    pub n_required: u32,
    pub c_low: f64,
    pub c_high: f64,
    pub c_chosen: f64,
    pub a: f64,
    pub b: f64,
    /// Count threshold implied by `c_chosen` at `n_required` rounds.
    pub count_threshold: u32,
    pub exact_confidence_obstacle: f64,
    pub exact_confidence_free: f64,
}

pub fn make_plan(params: &ConfidenceParams) -> Result<PlanResult> {
    let (a, b) = tail_bounds(params.d)?;
    let n_required = required_rounds(params)?;
    let (c_low, c_high) = threshold_interval(params, n_required)?;
    let c_chosen = choose_threshold(c_low, c_high)?;
    let (exact_obstacle, exact_free) = exact_confidence(params, n_required, c_chosen)?;
    Ok(PlanResult {
        n_required,
        c_low,
        c_high,
        c_chosen,
        a,
        b,
        count_threshold: count_threshold(c_chosen, n_required),
        exact_confidence_obstacle: exact_obstacle,
        exact_confidence_free: exact_free,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_at_zero_is_half() {
        assert_eq!(std_normal_cdf(0.0).unwrap(), 0.5);
    }

    #[test]
    fn cdf_frozen_values() {
        // Frozen from high-precision quadrature of the Gaussian density.
        assert!((std_normal_cdf(1.414214).unwrap() - 0.921350460702).abs() < 1e-9);
        assert!((std_normal_cdf(-2.326348).unwrap() - 0.00999999664292).abs() < 1e-9);
    }

    #[test]
    fn cdf_symmetry() {
        for i in 0..=60 {
            let x = -6.0 + 0.2 * i as f64;
            let left = std_normal_cdf(-x).unwrap();
            let right = 1.0 - std_normal_cdf(x).unwrap();
            assert!((left - right).abs() <= 1e-12, "x={x}");
        }
    }

    #[test]
    fn cdf_rejects_non_finite() {
        assert!(std_normal_cdf(f64::NAN).is_err());
        assert!(std_normal_cdf(f64::INFINITY).is_err());
    }

    #[test]
    fn quantile_frozen_values() {
        // Frozen from bisection against the quadrature CDF oracle.
        assert_eq!(std_normal_quantile(0.5).unwrap(), 0.0);
        assert!((std_normal_quantile(0.99).unwrap() - 2.32634787404).abs() < 1e-8);
        assert!((std_normal_quantile(0.975).unwrap() - 1.95996398454).abs() < 1e-8);
    }

    #[test]
    fn quantile_rejects_out_of_range() {
        assert!(std_normal_quantile(0.0).is_err());
        assert!(std_normal_quantile(1.0).is_err());
        assert!(std_normal_quantile(-0.2).is_err());
    }

    #[test]
    fn quantile_cdf_residual_below_1e9() {
        for i in 1..=999 {
            let u = i as f64 / 1000.0;
            let x = std_normal_quantile(u).unwrap();
            assert!((std_normal_cdf(x).unwrap() - u).abs() <= 1e-9, "u={u}");
        }
    }

    #[test]
    fn tail_bounds_symmetric() {
        let (a, b) = tail_bounds(0.99).unwrap();
        assert!((a + 2.32634787404).abs() < 1e-8);
        assert_eq!(b, -a);
        let (a, b) = tail_bounds(0.95).unwrap();
        assert!((a + 1.64485362695).abs() < 1e-8);
        assert_eq!(b, -a);
    }

    #[test]
    fn tail_bounds_degenerate_limit() {
        let (a, b) = tail_bounds(0.5 + 1e-9).unwrap();
        assert!(a < 0.0 && b > 0.0);
        assert!(a.abs() < 1e-5 && b.abs() < 1e-5);
    }

    #[test]
    fn tail_bounds_rejects_low_confidence() {
        assert!(matches!(tail_bounds(0.5), Err(Error::Parameter(_))));
        assert!(matches!(tail_bounds(0.3), Err(Error::Parameter(_))));
    }

    #[test]
    fn required_rounds_frozen_examples() {
        let n = |p, q, d| required_rounds(&ConfidenceParams::new(p, q, d).unwrap()).unwrap();
        assert_eq!(n(0.9, 0.9, 0.99), 14);
        assert_eq!(n(0.9, 0.9625, 0.99), 10);
        assert_eq!(n(0.9, 0.9, 0.95), 7);
    }

    #[test]
    fn params_reject_infeasible_pairs() {
        assert!(matches!(
            ConfidenceParams::new(0.9, 0.05, 0.9),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            ConfidenceParams::new(0.5, 0.5, 0.9),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn threshold_interval_frozen_examples() {
        let params = ConfidenceParams::new(0.9, 0.9625, 0.99).unwrap();
        let (lo, hi) = threshold_interval(&params, 10).unwrap();
        assert!((lo - 0.1799591314).abs() < 1e-9);
        assert!((hi - 0.2020956378).abs() < 1e-9);

        let params = ConfidenceParams::new(0.9, 0.9, 0.99).unwrap();
        let (lo, hi) = threshold_interval(&params, 14).unwrap();
        assert!((lo - 0.2966122804).abs() < 1e-9);
        assert!((hi - 0.3101631589).abs() < 1e-9);
    }

    #[test]
    fn threshold_interval_infeasible_when_rounds_too_few() {
        let params = ConfidenceParams::new(0.9, 0.9, 0.99).unwrap();
        match threshold_interval(&params, 5) {
            Err(Error::InfeasibleRounds { rounds: 5, required: 14 }) => {}
            other => panic!("expected InfeasibleRounds, got {other:?}"),
        }
    }

    #[test]
    fn choose_threshold_midpoint() {
        let c = choose_threshold(0.2966122804, 0.3101631589).unwrap();
        assert!((c - 0.3033877196).abs() < 1e-9);
        assert_eq!(choose_threshold(0.3, 0.3).unwrap(), 0.3);
        assert!(choose_threshold(0.31, 0.30).is_err());
    }

    #[test]
    fn achievable_confidence_frozen_examples() {
        let plan = achievable_confidence(0.9, 0.9, 5).unwrap();
        assert!((plan.c - 0.3).abs() < 1e-9);
        assert!((plan.d_prime - 0.9213503965).abs() < 1e-9);

        let plan = achievable_confidence(0.9, 0.9, 14).unwrap();
        assert!((plan.d_prime - 0.9910197612).abs() < 1e-9);
        assert!(plan.d_prime >= 0.99);

        let plan = achievable_confidence(0.9, 0.9, 1).unwrap();
        assert!((plan.d_prime - 0.7364553716).abs() < 1e-9);
    }

    #[test]
    fn achievable_confidence_rejects_bad_params() {
        assert!(achievable_confidence(0.9, 0.05, 5).is_err());
        assert!(achievable_confidence(0.9, 0.9, 0).is_err());
    }

    #[test]
    fn exact_confidence_frozen_examples() {
        // Frozen from exact rational-arithmetic binomial sums.
        let params = ConfidenceParams::new(0.9, 0.9, 0.95).unwrap();
        let (obstacle, free) = exact_confidence(&params, 7, 0.303386).unwrap();
        assert!((obstacle - 0.9998235).abs() < 1e-6);
        assert!((free - 0.9743085).abs() < 1e-6);

        let params = ConfidenceParams::new(0.9, 0.9625, 0.95).unwrap();
        let (obstacle, free) = exact_confidence(&params, 5, 0.191).unwrap();
        assert!((obstacle - 0.99999).abs() < 1e-9);
        // The free side drops below the nominal 0.95 at this small n.
        assert!((free - 0.8260449698).abs() < 1e-6);
        assert!(free < 0.95);
    }

    #[test]
    fn exact_confidence_single_round() {
        let params = ConfidenceParams::new(0.9, 0.8, 0.95).unwrap();
        let (obstacle, free) = exact_confidence(&params, 1, 0.5).unwrap();
        assert!((obstacle - 0.9).abs() < 1e-12);
        assert!((free - 0.8).abs() < 1e-12);
    }

    #[test]
    fn count_threshold_matches_mean_comparison() {
        assert_eq!(count_threshold(0.303386, 7), 3);
        assert_eq!(count_threshold(0.191, 5), 1);
        assert_eq!(count_threshold(0.5, 2), 1);
        assert_eq!(count_threshold(1.0, 4), 4);
    }

    #[test]
    fn make_plan_is_consistent() {
        let params = ConfidenceParams::new(0.9, 0.9625, 0.99).unwrap();
        let plan = make_plan(&params).unwrap();
        assert_eq!(plan.n_required, 10);
        assert!(plan.c_low <= plan.c_chosen && plan.c_chosen <= plan.c_high);
        assert!(1.0 - params.q_prime() < plan.c_chosen && plan.c_chosen < params.p());
        assert_eq!(plan.a, -plan.b);
        assert!((plan.c_chosen - 0.1910273846).abs() < 1e-9);
    }
}
