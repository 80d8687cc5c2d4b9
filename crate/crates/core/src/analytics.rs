//! Closed-form estimators: incomplete gamma, Poisson tails, resonant-set sizes,
//! the degree/Poisson coupling bound and the first-order Stirling ratio.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::weights::{empirical_moment, WeightSequence, DEFAULT_DELTA};

const EPS: f64 = 1e-16;
const MAX_TERMS: usize = 100_000;
/// Largest integer `s` for which the finite-sum closed form is used as reference.
pub const INTEGER_CLOSED_FORM_MAX: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaValue {
    pub s: f64,
    pub x: f64,
    pub value: f64,
}

/// Regularized pair `(P(s,x), Q(s,x))` with `P + Q = 1`; the smaller of the
/// two is computed directly so neither suffers cancellation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizedGamma {
    pub lower: f64,
    pub upper: f64,
    /// `ln Q(s,x)`, finite even when `upper` underflows.
    pub ln_upper: f64,
    /// `ln P(s,x)`.
    pub ln_lower: f64,
}

fn check_args(s: f64, x: f64) -> Result<()> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Domain(format!("s = {s} must be positive and finite")));
    }
    if !(x >= 0.0) || x.is_nan() {
        return Err(Error::Domain(format!("x = {x} must be nonnegative")));
    }
    Ok(())
}

// ln of Σ_{n≥0} x^n / (s(s+1)…(s+n)), so that γ(s,x) = x^s e^{-x} · series.
fn ln_lower_series(s: f64, x: f64) -> f64 {
    let mut term = 1.0 / s;
    let mut sum = term;
    let mut a = s;
    for _ in 0..MAX_TERMS {
        a += 1.0;
        term *= x / a;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum.ln()
}

// Modified Lentz evaluation of the continued fraction with Γ(s,x) = x^s e^{-x} · cf.
fn ln_upper_cf(s: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_TERMS {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h.ln()
}

pub fn regularized_gamma(s: f64, x: f64) -> Result<RegularizedGamma> {
    check_args(s, x)?;
    if x == 0.0 {
        return Ok(RegularizedGamma {
            lower: 0.0,
            upper: 1.0,
            ln_upper: 0.0,
            ln_lower: f64::NEG_INFINITY,
        });
    }
    let prefactor = s * x.ln() - x - ln_gamma(s);
    if x < s + 1.0 {
        let ln_p = prefactor + ln_lower_series(s, x);
        let p = ln_p.exp();
        let ln_q = (-p).ln_1p();
        Ok(RegularizedGamma {
            lower: p,
            upper: ln_q.exp(),
            ln_upper: ln_q,
            ln_lower: ln_p,
        })
    } else {
        let ln_q = prefactor + ln_upper_cf(s, x);
        let q = ln_q.exp();
        Ok(RegularizedGamma {
            lower: 1.0 - q,
            upper: q,
            ln_upper: ln_q,
            ln_lower: (-q).ln_1p(),
        })
    }
}

/// `ln Γ(s, x)`.
pub fn log_upper_incomplete_gamma(s: f64, x: f64) -> Result<f64> {
    Ok(ln_gamma(s) + regularized_gamma(s, x)?.ln_upper)
}

/// `Γ(s, x) = ∫_x^∞ t^{s-1} e^{-t} dt`. Overflows to `inf` for large `s`;
/// use [`log_upper_incomplete_gamma`] there.
pub fn upper_incomplete_gamma(s: f64, x: f64) -> Result<f64> {
    log_upper_incomplete_gamma(s, x).map(f64::exp)
}

pub fn gamma_value(s: f64, x: f64) -> Result<GammaValue> {
    Ok(GammaValue {
        s,
        x,
        value: upper_incomplete_gamma(s, x)?,
    })
}

fn ln_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// `ln Γ(n, x) = ln (n-1)! - x + ln Σ_{k<n} x^k/k!` for integer `n ≥ 1`.
pub fn log_upper_incomplete_gamma_integer(n: u64, x: f64) -> Result<f64> {
    if n == 0 || n > INTEGER_CLOSED_FORM_MAX {
        return Err(Error::Domain(format!(
            "integer closed form needs 1 <= n <= {INTEGER_CLOSED_FORM_MAX}, got {n}"
        )));
    }
    check_args(n as f64, x)?;
    let mut ln_fact = 0.0;
    let mut terms = Vec::with_capacity(n as usize);
    for k in 0..n {
        if k > 0 {
            ln_fact += (k as f64).ln();
        }
        let t = if k == 0 {
            0.0
        } else if x == 0.0 {
            f64::NEG_INFINITY
        } else {
            k as f64 * x.ln() - ln_fact
        };
        terms.push(t);
    }
    // ln_fact now holds ln (n-1)!
    Ok(ln_fact - x + ln_sum_exp(&terms))
}

/// `ln P(Pois(w) = k)`.
pub fn poisson_ln_pmf(w: f64, k: u64) -> f64 {
    k as f64 * w.ln() - w - ln_gamma(k as f64 + 1.0)
}

/// `P(Pois(w) ≤ k) = Γ(k+1, w)/Γ(k+1)`.
pub fn poisson_cdf(w: f64, k: u64) -> Result<f64> {
    Ok(regularized_gamma(k as f64 + 1.0, w)?.upper)
}

/// `P(Pois(w) ≥ k) = γ(k, w)/Γ(k)`, with `P(Pois(w) ≥ 0) = 1`.
pub fn poisson_sf(w: f64, k: u64) -> Result<f64> {
    if k == 0 {
        return Ok(1.0);
    }
    Ok(regularized_gamma(k as f64, w)?.lower)
}

/// `P(lo ≤ Pois(w) ≤ hi)`. `hi = u64::MAX` means no upper limit.
///
/// Evaluated as a difference of lower-tail or upper-tail regularized gammas,
/// whichever side of the mean the interval sits on.
pub fn poisson_interval_prob(w: f64, lo: u64, hi: u64) -> Result<f64> {
    if !(w > 0.0 && w.is_finite()) {
        return Err(Error::InvalidParameter(format!("w = {w} must be positive")));
    }
    if lo > hi {
        return Err(Error::InvalidInterval { lo, hi });
    }
    let unbounded = hi == u64::MAX;
    let p = if (lo as f64) > w {
        let upper_hi = if unbounded { 0.0 } else { poisson_sf(w, hi + 1)? };
        poisson_sf(w, lo)? - upper_hi
    } else {
        let cdf_hi = if unbounded { 1.0 } else { poisson_cdf(w, hi)? };
        let cdf_lo = if lo == 0 { 0.0 } else { poisson_cdf(w, lo - 1)? };
        cdf_hi - cdf_lo
    };
    Ok(p.clamp(0.0, 1.0))
}

/// `L_N = ⌊(λ-η)²⌋` and `U_N = ⌈(λ+η)²⌉`.
pub fn resonant_degree_window(lambda: f64, eta: f64) -> Result<(u64, u64)> {
    if !(lambda > eta && eta >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need lambda > eta >= 0, got lambda = {lambda}, eta = {eta}"
        )));
    }
    Ok((((lambda - eta).powi(2)).floor() as u64, ((lambda + eta).powi(2)).ceil() as u64))
}

/// `w_x² / (m₁ N) · (1 + 2 m₂/m₁)`.
pub fn poisson_coupling_tv_bound(ws: &WeightSequence, x: usize) -> Result<f64> {
    if x >= ws.n() {
        return Err(Error::InvalidVertex { vertex: x, n: ws.n() });
    }
    let m1 = empirical_moment(ws, 1);
    let m2 = empirical_moment(ws, 2);
    Ok(coupling_tv_formula(ws.weight(x), m1, m2, ws.n()))
}

pub fn coupling_tv_formula(wx: f64, m1: f64, m2: f64, n: usize) -> f64 {
    wx * wx / (m1 * n as f64) * (1.0 + 2.0 * m2 / m1)
}

/// Leading term plus the additive `(log N)^{2δ}` slack, kept apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeEstimate {
    pub leading: f64,
    pub slack: f64,
}

pub fn log_slack(n: usize, delta: f64) -> f64 {
    (n as f64).ln().powf(2.0 * delta)
}

/// Second-moment estimate `m₂ N / (λ-η)⁴`.
pub fn expected_w_generic(ws: &WeightSequence, lambda: f64, eta: f64) -> Result<f64> {
    Ok(generic_formula(empirical_moment(ws, 2), ws.n(), lambda, eta)?)
}

pub fn generic_formula(m2: f64, n: usize, lambda: f64, eta: f64) -> Result<f64> {
    if !(lambda > eta) {
        return Err(Error::InvalidParameter(format!("need lambda > eta, got {lambda} <= {eta}")));
    }
    Ok(m2 * n as f64 / (lambda - eta).powi(4))
}

/// `N α / (α+1)^{⌊(λ-η)²⌋ - 1}` for exponential quantile weights.
pub fn expected_w_exponential(n: usize, alpha: f64, lambda: f64, eta: f64) -> Result<SizeEstimate> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must be positive")));
    }
    let (l, _) = resonant_degree_window(lambda, eta)?;
    let exponent = l as f64 - 1.0;
    Ok(SizeEstimate {
        leading: n as f64 * alpha / (alpha + 1.0).powf(exponent),
        slack: log_slack(n, DEFAULT_DELTA),
    })
}

/// `N η / λ^{2α+3}` for power-law quantile weights with bounded slowly varying part.
pub fn expected_w_powerlaw(n: usize, alpha: f64, lambda: f64, eta: f64) -> Result<SizeEstimate> {
    if !(alpha > 2.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must exceed 2")));
    }
    if !(lambda > eta && eta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need lambda > eta > 0, got lambda = {lambda}, eta = {eta}"
        )));
    }
    Ok(SizeEstimate {
        leading: n as f64 * eta / lambda.powf(2.0 * alpha + 3.0),
        slack: log_slack(n, DEFAULT_DELTA),
    })
}

/// `Σ_x P((λ-η)² ≤ Pois(w_x) ≤ (λ+η)²)`: the Poisson proxy for `E #W_{λ,η}`.
pub fn expected_w_poisson(ws: &WeightSequence, lambda: f64, eta: f64) -> Result<f64> {
    if !(lambda > eta && eta >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need lambda > eta >= 0, got lambda = {lambda}, eta = {eta}"
        )));
    }
    let lo = ((lambda - eta).powi(2)).ceil() as u64;
    let hi = ((lambda + eta).powi(2)).floor() as u64;
    if lo > hi {
        return Ok(0.0);
    }
    ws.weights().iter().map(|&w| poisson_interval_prob(w, lo, hi)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StirlingRatio {
    /// `Γ(x-t)/Γ(x)`.
    pub exact: f64,
    /// `x^{-t} e^{t/(2x)}`.
    pub approx: f64,
    pub rel_error: f64,
    /// `x^{-t} e^{-t/(2x)}`, the minus-sign variant.
    pub approx_minus: f64,
    pub rel_error_minus: f64,
}

pub fn stirling_ratio(x: f64, t: f64) -> Result<StirlingRatio> {
    if !(t >= 0.0 && x > t) || !x.is_finite() {
        return Err(Error::Domain(format!("need x > t >= 0, got x = {x}, t = {t}")));
    }
    let ln_exact = if t.fract() == 0.0 && t <= 1e6 {
        -(1..=t as u64).map(|k| (x - k as f64).ln()).sum::<f64>()
    } else {
        ln_gamma(x - t) - ln_gamma(x)
    };
    let ln_base = -t * x.ln();
    let exact = ln_exact.exp();
    let approx = (ln_base + t / (2.0 * x)).exp();
    let approx_minus = (ln_base - t / (2.0 * x)).exp();
    Ok(StirlingRatio {
        exact,
        approx,
        rel_error: ((ln_base + t / (2.0 * x)) - ln_exact).exp_m1().abs(),
        approx_minus,
        rel_error_minus: ((ln_base - t / (2.0 * x)) - ln_exact).exp_m1().abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaSandwich {
    pub lower_bound: f64,
    pub value: f64,
    pub upper_bound: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

impl GammaSandwich {
    pub fn holds(&self) -> bool {
        self.lower_ok && self.upper_ok
    }
}

/// `Γ(s) - x^{s-1} ≤ Γ(s,x) ≤ Γ(s)` for `s ≥ 1`, `x > 0`, compared up to
/// a few ulps of `Γ(s)`.
pub fn gamma_sandwich(s: f64, x: f64) -> Result<GammaSandwich> {
    if !(s >= 1.0) || !(x > 0.0) {
        return Err(Error::Domain(format!("need s >= 1 and x > 0, got s = {s}, x = {x}")));
    }
    let g = statrs::function::gamma::gamma(s);
    let value = g * regularized_gamma(s, x)?.upper;
    let lower_bound = g - x.powf(s - 1.0);
    let slack = 8.0 * f64::EPSILON * g;
    Ok(GammaSandwich {
        lower_bound,
        value,
        upper_bound: g,
        lower_ok: lower_bound <= value + slack,
        upper_ok: value <= g + slack,
    })
}

pub fn gamma_sandwich_check(s: f64, x: f64) -> Result<bool> {
    gamma_sandwich(s, x).map(|r| r.holds())
}

/// `Γ(s,x) / (x^{s-1} e^{-x})`, which tends to 1 as `x → ∞`.
pub fn gamma_asymptotic_ratio(s: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("x = {x} must be positive")));
    }
    Ok((log_upper_incomplete_gamma(s, x)? - (s - 1.0) * x.ln() + x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{make_exponential_quantile, make_power_law_quantile, ParamCheck};
    use proptest::prelude::*;
    use rand::Rng;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    // Composite Gauss-Legendre style oracle: adaptive Simpson on [x, x + 60 + 2s].
    fn quad_upper_gamma(s: f64, x: f64) -> f64 {
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let flm = f(lm);
            let frm = f(rm);
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() < 1e-15 * (left + right).abs() {
                return left + right + (left + right - whole) / 15.0;
            }
            simpson(f, a, m, fa, flm, fm, left, depth - 1) + simpson(f, m, b, fm, frm, fb, right, depth - 1)
        }
        let f = |t: f64| t.powf(s - 1.0) * (-t).exp();
        let b = x + 80.0 + 4.0 * s;
        let m = 0.5 * (x + b);
        let (fa, fm, fb) = (f(x), f(m), f(b));
        let whole = (b - x) / 6.0 * (fa + 4.0 * fm + fb);
        simpson(&f, x, b, fa, fm, fb, whole, 40)
    }

    #[test]
    fn exponential_integral_case() {
        assert!(rel(upper_incomplete_gamma(1.0, 2.0).unwrap(), (-2.0f64).exp()) < 1e-14);
    }

    #[test]
    fn value_at_zero_is_complete_gamma() {
        assert!(rel(upper_incomplete_gamma(4.0, 0.0).unwrap(), 6.0) < 1e-14);
        let gv = gamma_value(4.0, 0.0).unwrap();
        assert!((gv.value - 6.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_three_two() {
        let expect = 10.0 * (-2.0f64).exp();
        let v = upper_incomplete_gamma(3.0, 2.0).unwrap();
        assert!(rel(v, expect) < 1e-13);
        assert!((v - 1.35335).abs() < 1e-5);
        let closed = log_upper_incomplete_gamma_integer(3, 2.0).unwrap().exp();
        assert!(rel(closed, expect) < 1e-14);
        assert!(rel(quad_upper_gamma(3.0, 2.0), expect) < 1e-10);
    }

    #[test]
    fn series_and_fraction_match_integer_closed_form_on_grid() {
        let mut worst: f64 = 0.0;
        for s in 1..=50u64 {
            for x in 0..=100u64 {
                let a = log_upper_incomplete_gamma(s as f64, x as f64).unwrap();
                let b = log_upper_incomplete_gamma_integer(s, x as f64).unwrap();
                worst = worst.max((a - b).exp_m1().abs());
            }
        }
        assert!(worst < 1e-12, "worst relative error {worst:e}");
    }

    #[test]
    fn non_integer_s_matches_quadrature() {
        for &(s, x) in &[(0.5, 0.3), (2.5, 1.0), (7.3, 9.0), (12.75, 4.0), (3.2, 20.0)] {
            let v = upper_incomplete_gamma(s, x).unwrap();
            let q = quad_upper_gamma(s, x);
            assert!(rel(v, q) < 1e-9, "s={s} x={x}: {v} vs {q}");
        }
    }

    #[test]
    fn agrees_with_statrs_regularized_gamma() {
        for &(s, x) in &[(1.5, 0.5), (10.0, 3.0), (10.0, 30.0), (40.0, 41.0)] {
            let ours = regularized_gamma(s, x).unwrap().upper;
            let theirs = statrs::function::gamma::gamma_ur(s, x);
            assert!((ours - theirs).abs() < 1e-12, "s={s} x={x}");
        }
    }

    #[test]
    fn log_space_survives_large_arguments() {
        let v = log_upper_incomplete_gamma(400.0, 900.0).unwrap();
        let c = log_upper_incomplete_gamma_integer(400, 900.0).unwrap();
        assert!(v.is_finite());
        assert!((v - c).abs() < 1e-10 * c.abs());
        assert!(upper_incomplete_gamma(400.0, 900.0).unwrap().is_infinite());
    }

    #[test]
    fn domain_errors() {
        assert!(upper_incomplete_gamma(0.0, 1.0).is_err());
        assert!(upper_incomplete_gamma(1.0, -1.0).is_err());
        assert!(log_upper_incomplete_gamma_integer(0, 1.0).is_err());
    }

    fn pmf_sum(w: f64, lo: u64, hi: u64) -> f64 {
        (lo..=hi).map(|k| poisson_ln_pmf(w, k).exp()).sum()
    }

    #[test]
    fn poisson_trivial_cases() {
        assert!((poisson_interval_prob(3.0, 0, u64::MAX).unwrap() - 1.0).abs() < 1e-15);
        assert!((poisson_interval_prob(1.0, 0, 0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert!(matches!(poisson_interval_prob(1.0, 3, 2), Err(Error::InvalidInterval { .. })));
    }

    #[test]
    fn poisson_interval_matches_pmf_sum() {
        let v = poisson_interval_prob(5.0, 3, 7).unwrap();
        assert!((v - pmf_sum(5.0, 3, 7)).abs() < 1e-13);
    }

    #[test]
    fn poisson_interval_matches_pmf_sum_on_grid() {
        let mut worst: f64 = 0.0;
        for w in [0.5, 1.0, 3.0, 10.0, 37.5, 80.0, 150.0, 200.0] {
            for lo in (0..=500u64).step_by(23) {
                for hi in [lo, lo + 1, lo + 7, lo + 60, 500] {
                    if hi < lo {
                        continue;
                    }
                    let d = (poisson_interval_prob(w, lo, hi).unwrap() - pmf_sum(w, lo, hi)).abs();
                    worst = worst.max(d);
                }
            }
        }
        assert!(worst < 1e-12, "worst {worst:e}");
    }

    #[test]
    fn coupling_bound_examples() {
        assert!((coupling_tv_formula(2.0, 1.0, 2.0, 1000) - 0.02).abs() < 1e-15);
        let a = coupling_tv_formula(1.5, 1.2, 3.0, 500);
        let b = coupling_tv_formula(3.0, 1.2, 3.0, 500);
        assert!((b / a - 4.0).abs() < 1e-12);
        let ws = make_exponential_quantile(100, 1.0).unwrap();
        assert!(poisson_coupling_tv_bound(&ws, 100).is_err());
    }

    #[test]
    fn coupling_bound_dominates_monte_carlo_total_variation() {
        use rand::SeedableRng;
        let ws = make_power_law_quantile(2000, 2.5, 1.0, ParamCheck::Strict).unwrap();
        // a vertex of moderate weight, where the bound is informative
        let x = (0..ws.n()).find(|&x| ws.weight(x) < 5.0).unwrap();
        let bound = poisson_coupling_tv_bound(&ws, x).unwrap();
        assert!(bound < 0.2);
        let probs: Vec<f64> = (0..ws.n())
            .filter(|&y| y != x)
            .map(|y| crate::weights::edge_probability(&ws, x, y, crate::Model::Grg).unwrap())
            .collect();
        let reps = 20_000usize;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut counts = vec![0usize; 64];
        for _ in 0..reps {
            let d = probs.iter().filter(|&&p| rng.random::<f64>() < p).count();
            counts[d.min(63)] += 1;
        }
        let w = ws.weight(x);
        let mut tv = 0.0;
        let mut noise = 0.0;
        for (k, &c) in counts.iter().enumerate() {
            let p = poisson_ln_pmf(w, k as u64).exp();
            tv += (c as f64 / reps as f64 - p).abs();
            noise += 3.0 * (p * (1.0 - p) / reps as f64).sqrt();
        }
        tv *= 0.5;
        assert!(tv <= bound + 0.5 * noise, "tv {tv} bound {bound} noise {noise}");
    }

    #[test]
    fn generic_estimator() {
        assert!((generic_formula(1.0, 1000, 10f64.sqrt() + 0.5, 0.5).unwrap() - 10.0).abs() < 1e-9);
        let a = generic_formula(2.0, 1000, 6.0, 1.0).unwrap();
        let b = generic_formula(2.0, 1000, 7.0, 1.0).unwrap();
        assert!(b < a);
        assert!(generic_formula(2.0, 1000, 1.0, 1.0).is_err());
    }

    #[test]
    fn exponential_estimator() {
        let e = expected_w_exponential(1000, 1.0, 3.0, 1.0).unwrap();
        assert!((e.leading - 125.0).abs() < 1e-12);
        assert!((e.slack - (1000f64).ln().powf(0.2)).abs() < 1e-12);
        let near = expected_w_exponential(1000, 1.0, 3.0, 3.0 - 1e-9).unwrap();
        assert!((near.leading - 2000.0).abs() < 1e-9);
        assert!(expected_w_exponential(1000, 1.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn powerlaw_estimator() {
        let e = expected_w_powerlaw(10_000, 3.0, 10.0, 1.0).unwrap();
        assert!(rel(e.leading, 1e-5) < 1e-12);
        let d = expected_w_powerlaw(10_000, 3.0, 10.0, 2.0).unwrap();
        assert!(rel(d.leading, 2.0 * e.leading) < 1e-12);
        assert!(expected_w_powerlaw(10_000, 2.0, 10.0, 1.0).is_err());
    }

    #[test]
    fn degree_window() {
        assert_eq!(resonant_degree_window(3.0, 1.0).unwrap(), (4, 16));
        assert_eq!(resonant_degree_window(2.5, 0.3).unwrap(), (4, 8));
    }

    #[test]
    fn poisson_proxy_is_sum_of_interval_probabilities() {
        let ws = WeightSequence::new(vec![1.0, 4.0, 9.0]).unwrap();
        let v = expected_w_poisson(&ws, 3.0, 1.0).unwrap();
        let direct: f64 = [1.0, 4.0, 9.0].iter().map(|&w| pmf_sum(w, 4, 16)).sum();
        assert!((v - direct).abs() < 1e-13);
    }

    #[test]
    fn stirling_examples() {
        let r = stirling_ratio(5.0, 0.0).unwrap();
        assert_eq!((r.exact, r.approx), (1.0, 1.0));
        let r = stirling_ratio(100.0, 1.0).unwrap();
        assert!(rel(r.exact, 1.0 / 99.0) < 1e-14);
        assert!(rel(r.approx, (1.0f64 / 200.0).exp() / 100.0) < 1e-14);
        assert!(r.rel_error < 1e-2);
        assert!(r.rel_error_minus > 1e-2);
        assert!(stirling_ratio(1.0, 2.0).is_err());
    }

    #[test]
    fn stirling_error_decreases() {
        let mut prev = f64::INFINITY;
        let mut x = 100.0;
        while x <= 1e6 {
            let e = stirling_ratio(x, 1.0).unwrap().rel_error;
            assert!(e < prev, "x = {x}");
            prev = e;
            x *= 10f64.sqrt();
        }
        let fractional = stirling_ratio(1e4, 0.5).unwrap();
        assert!(fractional.rel_error < 1e-4);
    }

    #[test]
    fn sandwich_examples() {
        let s1 = gamma_sandwich(1.0, 0.7).unwrap();
        assert!(s1.lower_bound.abs() < 1e-15);
        assert!(s1.holds());
        let s3 = gamma_sandwich(3.0, 2.0).unwrap();
        assert!((s3.lower_bound + 2.0).abs() < 1e-12);
        assert!((s3.upper_bound - 2.0).abs() < 1e-12);
        assert!(s3.holds());
    }

    #[test]
    fn sandwich_on_grid() {
        for s in 1..=50 {
            for xi in 1..=200 {
                let x = xi as f64 * 0.5;
                assert!(gamma_sandwich_check(s as f64, x).unwrap(), "s={s} x={x}");
            }
        }
    }

    #[test]
    fn asymptotic_ratio_tends_to_one() {
        for s in [2.0, 5.0, 10.0] {
            let mut prev = f64::INFINITY;
            for x in [20.0, 50.0, 100.0, 200.0, 500.0, 1000.0] {
                let r = gamma_asymptotic_ratio(s, x).unwrap();
                assert!(r >= 1.0 && r < prev);
                prev = r;
            }
            assert!(prev - 1.0 < 0.01);
        }
    }

    proptest! {
        #[test]
        fn gamma_decreasing_in_x(s in 0.2f64..60.0, x in 0.0f64..150.0, dx in 0.01f64..5.0) {
            let a = log_upper_incomplete_gamma(s, x).unwrap();
            let b = log_upper_incomplete_gamma(s, x + dx).unwrap();
            prop_assert!(b <= a);
            let r = regularized_gamma(s, x).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.upper));
            prop_assert!((r.lower + r.upper - 1.0).abs() < 1e-14);
        }

        #[test]
        fn interval_probabilities_are_additive(w in 0.1f64..100.0, lo in 0u64..200, a in 0u64..50, b in 0u64..50) {
            let mid = lo + a;
            let hi = mid + 1 + b;
            let whole = poisson_interval_prob(w, lo, hi).unwrap();
            let parts = poisson_interval_prob(w, lo, mid).unwrap() + poisson_interval_prob(w, mid + 1, hi).unwrap();
            prop_assert!((whole - parts).abs() < 1e-13);
        }
    }
}
