//! Closed-form transforms and distributions of the n-th drawdown times.
//!
//! Transform-domain functions take [`LaplaceCoeffs`] and are generic over
//! [`Scalar`], so the same code runs at real `lambda > 0` and at the complex
//! abscissae used by [`crate::inversion`]. Probability-domain functions
//! (`prob_*`) are the `lambda -> 0+` limits written directly in terms of
//! `kappa`, never evaluated through a tiny `lambda`.
//!
//! Sums of the form `x (x + j a)^{j-1} w^j / j!` appear throughout; their
//! `j = 0` term is taken to be 1.

use crate::error::{Error, Result};
use crate::model::{
    checked_probability, expected_tau, tilt_ratio, AdjustmentRate, DrawdownSpec, LaplaceCoeffs, ModelParams,
    PROBABILITY_TOLERANCE,
};
use crate::scalar::Scalar;
use crate::DrawdownKind;
use serde::Serialize;

/// Hard cap on generalized-Poisson truncation.
pub const MAX_POISSON_TERMS: usize = 100_000;
/// Terms below this are negligible once the sum is past its bulk.
pub const POISSON_TERM_CUTOFF: f64 = 1e-14;

/// Complements at least this large are taken as `1 - partial sum`, losing at
/// most two digits.
pub const DIRECT_COMPLEMENT: f64 = 1e-2;

fn check_index(name: &'static str, n: u32) -> Result<()> {
    if n == 0 {
        return Err(Error::param(name, 0.0, "episode index starts at 1"));
    }
    Ok(())
}

fn check_positive(name: &'static str, x: f64) -> Result<()> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::param(name, x, "must be finite and > 0"));
    }
    Ok(())
}

/// `x (x + j a)^{j-1} w^j / j!`, built as a product so neither the power nor
/// the factorial overflows for large `j`.
fn lagrange_term<T: Scalar>(w: T, x: f64, a: f64, j: u32) -> T {
    if j == 0 {
        return T::one();
    }
    let base = x + j as f64 * a;
    let mut acc = T::from_f64(x / base);
    for i in 1..=j {
        acc = acc * w * (base / i as f64);
    }
    acc
}

fn lagrange_sum<T: Scalar>(w: T, x: f64, a: f64, terms: u32) -> T {
    (0..terms).fold(T::zero(), |acc, j| acc + lagrange_term(w, x, a, j))
}

/// `sum_{m<n} (rate x)^m / m! e^{-rate x}` for `x >= 0`, 1 for `x <= 0`.
pub fn erlang_survival<T: Scalar>(shape: u32, rate: T, x: f64) -> T {
    if x <= 0.0 {
        return T::one();
    }
    let rx = rate * x;
    let mut term = T::one();
    let mut sum = T::one();
    for m in 1..shape {
        term = term * rx / m as f64;
        sum = sum + term;
    }
    sum * (-rx).exp()
}

/// Erlang law of `shape` exponentials with common `rate`, translated by `shift`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErlangTail {
    pub shape: u32,
    pub rate: f64,
    pub shift: f64,
}

impl ErlangTail {
    pub fn new(shape: u32, rate: f64, shift: f64) -> Result<Self> {
        check_index("shape", shape)?;
        check_positive("rate", rate)?;
        Ok(Self { shape, rate, shift })
    }

    /// Below the mean the survival is computed as one minus the Poisson
    /// upper tail, so values near 1 keep full relative accuracy in the
    /// complement and stay monotone.
    pub fn survival(&self, x: f64) -> f64 {
        let x = x - self.shift;
        let rx = self.rate * x;
        if x <= 0.0 || rx >= self.shape as f64 {
            return erlang_survival(self.shape, self.rate, x).clamp(0.0, 1.0);
        }
        let n = self.shape as f64;
        let mut term = (n * rx.ln() - rx - libm::lgamma(n + 1.0)).exp();
        let mut cdf = 0.0;
        let mut m = n;
        while term > 1e-17 * cdf {
            cdf += term;
            m += 1.0;
            term *= rx / m;
        }
        (1.0 - cdf).clamp(0.0, 1.0)
    }

    pub fn mean(&self) -> f64 {
        self.shift + self.shape as f64 / self.rate
    }
}

/// Generalized (Lagrangian) Poisson law
/// `p(m) = theta (theta + lam m)^{m-1} e^{-theta - lam m} / m!`.
///
/// Proper for `lam <= 1`. For `lam > 1` the same mass function is defective;
/// [`GeneralizedPoisson::total_mass`] returns the mass it carries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneralizedPoisson {
    pub theta: f64,
    pub lam: f64,
}

/// Result of an adaptively truncated generalized-Poisson sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncatedSum {
    pub sum: f64,
    /// Number of mass-function terms included.
    pub terms: usize,
    /// False when the term cap was reached before the cutoff.
    pub converged: bool,
}

impl GeneralizedPoisson {
    pub fn new(theta: f64, lam: f64) -> Result<Self> {
        check_positive("theta", theta)?;
        check_positive("lam", lam)?;
        Ok(Self { theta, lam })
    }

    pub fn ln_pmf(&self, m: u64) -> f64 {
        let mf = m as f64;
        self.theta.ln() + (mf - 1.0) * (self.theta + self.lam * mf).ln()
            - self.theta
            - self.lam * mf
            - libm::lgamma(mf + 1.0)
    }

    pub fn pmf(&self, m: u64) -> f64 {
        self.ln_pmf(m).exp()
    }

    pub fn partial_sum(&self, upto: u64) -> f64 {
        (0..=upto).map(|m| self.pmf(m)).sum()
    }

    /// Sum until a term drops below [`POISSON_TERM_CUTOFF`] after the bulk of
    /// the law (past the mean `theta / (1 - lam)`, or past the mode when the
    /// mean is infinite), capped at [`MAX_POISSON_TERMS`].
    pub fn truncated_sum(&self) -> TruncatedSum {
        let centre = if self.lam < 1.0 {
            self.theta / (1.0 - self.lam)
        } else {
            f64::INFINITY
        };
        let mut sum = 0.0;
        let mut prev = f64::INFINITY;
        for m in 0..MAX_POISSON_TERMS as u64 {
            let p = self.pmf(m);
            sum += p;
            let past_bulk = (m as f64) > centre || (centre.is_infinite() && p < prev);
            if p < POISSON_TERM_CUTOFF && past_bulk {
                return TruncatedSum {
                    sum,
                    terms: m as usize + 1,
                    converged: true,
                };
            }
            prev = p;
        }
        TruncatedSum {
            sum,
            terms: MAX_POISSON_TERMS,
            converged: false,
        }
    }

    /// Total mass `sum_m p(m)`: 1 for `lam <= 1`, otherwise
    /// `exp(theta (w - 1))` with `w < 1` the smaller root of `w = e^{lam (w - 1)}`.
    pub fn total_mass(&self) -> f64 {
        if self.lam <= 1.0 {
            return 1.0;
        }
        (self.theta * (self.smaller_root() - 1.0)).exp()
    }

    /// `1 - total_mass()`, accurate when the deficit is small.
    pub fn deficit(&self) -> f64 {
        if self.lam <= 1.0 {
            return 0.0;
        }
        -(self.theta * (self.smaller_root() - 1.0)).exp_m1()
    }

    /// Newton on `ln w = lam (w - 1)` from `e^{-lam}`, which lies left of the
    /// root on a concave function, so iterates increase monotonically.
    fn smaller_root(&self) -> f64 {
        let lam = self.lam;
        let mut w = (-lam).exp();
        for _ in 0..200 {
            let step = (w.ln() - lam * (w - 1.0)) / (1.0 / w - lam);
            let next = w - step;
            if !(next > w) {
                break;
            }
            w = next;
            if step.abs() <= 1e-17 * w {
                break;
            }
        }
        w.min(1.0 / lam)
    }

    /// `sum_{m >= from} p(m)` when the terms decay geometrically fast enough
    /// for the cutoff to be reached; `None` otherwise.
    pub fn tail_sum(&self, from: u64) -> Option<f64> {
        if self.lam == 1.0 {
            return None;
        }
        let centre = self.theta / (1.0 - self.lam).abs();
        let mut sum = 0.0;
        for m in from..from + MAX_POISSON_TERMS as u64 {
            let p = self.pmf(m);
            sum += p;
            if (m as f64) > centre && p <= 1e-18 * sum {
                return Some(sum);
            }
        }
        None
    }

    /// `1 - sum_{m <= upto} p(m)`. Below [`DIRECT_COMPLEMENT`] the subtraction
    /// would cancel, so the tail is summed instead.
    pub fn complement(&self, upto: u64) -> f64 {
        let direct = 1.0 - self.partial_sum(upto);
        if direct >= DIRECT_COMPLEMENT {
            return direct;
        }
        match self.tail_sum(upto + 1) {
            Some(tail) => tail + self.deficit(),
            None => direct,
        }
    }
}

/// Weights of `M_{tau^n}` as a mixture of Erlang(k, kappa) laws.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixedErlangWeights {
    pub n: u32,
    /// `D_{k,n} = P{ recovery count by tau^n > k }` for `k = 0..n-1`.
    pub survival: Vec<f64>,
    /// `d_{k,n} = D_{k-1,n} - D_{k,n}` for `k = 1..n`, stored at index `k - 1`.
    pub weights: Vec<f64>,
}

/// `E[e^{-lambda tau_a}] = c / b`.
pub fn lt_tau<T: Scalar>(coeffs: &LaplaceCoeffs<T>) -> T {
    coeffs.ratio()
}

/// `E[e^{-lambda tau^n}] = (c / b)^n`.
pub fn lt_tau_n<T: Scalar>(coeffs: &LaplaceCoeffs<T>, n: u32) -> Result<T> {
    check_index("n", n)?;
    Ok(coeffs.ratio().powi(n as i32))
}

/// `E[e^{-lambda tilde-tau^n}] = (c / b)^n e^{-(n-1) beta_plus a}`.
pub fn lt_tau_tilde_n<T: Scalar>(coeffs: &LaplaceCoeffs<T>, n: u32) -> Result<T> {
    check_index("n", n)?;
    let recoveries = (-coeffs.beta_plus * ((n - 1) as f64 * coeffs.a)).exp();
    Ok(coeffs.ratio().powi(n as i32) * recoveries)
}

/// `P{tilde-tau^n < infinity}`: 1 unless the drift is negative, when each
/// recovery of the running maximum succeeds with probability `e^{gamma a}`.
pub fn prob_tilde_finite(params: &ModelParams, spec: &DrawdownSpec, n: u32) -> Result<f64> {
    check_index("n", n)?;
    if params.mu() >= 0.0 {
        return Ok(1.0);
    }
    Ok(((n - 1) as f64 * params.gamma() * spec.a()).exp())
}

/// `E[e^{-lambda tilde-tau^n}; M_{tilde-tau^n} > x]`.
pub fn lt_tau_tilde_n_max_tail<T: Scalar>(coeffs: &LaplaceCoeffs<T>, n: u32, x: f64) -> Result<T> {
    if !(x >= 0.0) {
        return Err(Error::param("x", x, "running-maximum level must be >= 0"));
    }
    Ok(lt_tau_tilde_n(coeffs, n)? * erlang_survival(n, coeffs.b, x))
}

/// `E[e^{-lambda tilde-tau^n}; X_{tilde-tau^n} > x]` for `x >= -a`; the value
/// process sits exactly `a` below the maximum at every recovery episode.
pub fn lt_tilde_value_tail<T: Scalar>(coeffs: &LaplaceCoeffs<T>, n: u32, x: f64) -> Result<T> {
    if !(x >= -coeffs.a) {
        return Err(Error::param("x", x, "value level must be >= -a"));
    }
    lt_tau_tilde_n_max_tail(coeffs, n, x + coeffs.a)
}

/// `E[e^{-lambda tau^n}; X_{tau^n} > x]`: `X_{tau^n} + n a` is Erlang(n, b).
pub fn lt_tau_n_value_tail<T: Scalar>(coeffs: &LaplaceCoeffs<T>, n: u32, x: f64) -> Result<T> {
    let shifted = x + n as f64 * coeffs.a;
    Ok(lt_tau_n(coeffs, n)? * erlang_survival(n, coeffs.b, shifted))
}

/// `E[e^{-lambda T_x^+}; T_x^+ < tau^n]` for the first passage above `x > 0`.
pub fn constrained_passage_lt<T: Scalar>(coeffs: &LaplaceCoeffs<T>, x: f64, n: u32) -> Result<T> {
    check_positive("x", x)?;
    check_index("n", n)?;
    let w = coeffs.c * (-coeffs.b * coeffs.a).exp();
    Ok((-coeffs.b * x).exp() * lagrange_sum(w, x, coeffs.a, n))
}

/// Density in `y` of `E[e^{-lambda tau^n}; M_{tau^n} > x, X_{tau^n} in dy]`.
///
/// For `n = 1` all mass lies on `y = M - a`, and the expression reduces to
/// `c e^{-b (y + a)}` on `y >= x - a`, which is the density of `M_{tau_a} - a`.
pub fn joint_density_max_value<T: Scalar>(coeffs: &LaplaceCoeffs<T>, n: u32, x: f64, y: f64) -> Result<T> {
    check_index("n", n)?;
    check_positive("x", x)?;
    let a = coeffs.a;
    let mut sum = 0.0;
    for m in 0..n {
        let gap = y - x + (n - m) as f64 * a;
        if gap < 0.0 {
            continue;
        }
        let rest = n - m - 1;
        let tail = gap.powi(rest as i32) / factorial(rest);
        sum += lagrange_term(1.0, x, a, m) * tail;
    }
    Ok(coeffs.c.powi(n as i32) * (-coeffs.b * (y + n as f64 * a)).exp() * sum)
}

fn factorial(k: u32) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

/// `E[e^{-lambda tau^n}; M_{tau^n} > x]`; reduces to `(c / b) e^{-b x}` at `n = 1`.
pub fn lt_tau_n_max_tail<T: Scalar>(coeffs: &LaplaceCoeffs<T>, n: u32, x: f64) -> Result<T> {
    check_positive("x", x)?;
    let w = coeffs.b * (-coeffs.b * coeffs.a).exp();
    Ok(lt_tau_n(coeffs, n)? * (-coeffs.b * x).exp() * lagrange_sum(w, x, coeffs.a, n))
}

/// The `lambda`-parameter `gamma a / (e^{gamma a} - 1) = kappa a` of the
/// recovery-count laws.
pub fn recovery_lambda(params: &ModelParams, spec: &DrawdownSpec) -> f64 {
    tilt_ratio(params.gamma() * spec.a())
}

/// `P{M_{tau^n} > x}` as a Lagrange-type sum in `kappa`.
pub fn prob_max_tail(params: &ModelParams, spec: &DrawdownSpec, n: u32, x: f64) -> Result<f64> {
    check_index("n", n)?;
    check_positive("x", x)?;
    let kappa = AdjustmentRate::new(params, spec).kappa;
    let a = spec.a();
    let raw = (-kappa * x).exp() * lagrange_sum(kappa * (-kappa * a).exp(), x, a, n);
    checked_probability(raw, PROBABILITY_TOLERANCE)
}

/// `P{M_{tau^n} > x}` as the mixed-Erlang survival `sum_k D_{k,n} Erlang(k+1, kappa)`-increments.
pub fn prob_max_tail_mixed_erlang(params: &ModelParams, spec: &DrawdownSpec, n: u32, x: f64) -> Result<f64> {
    check_positive("x", x)?;
    let weights = mixed_erlang_weights(params, spec, n)?;
    let kx = AdjustmentRate::new(params, spec).kappa * x;
    let mut term = 1.0;
    let mut sum = 0.0;
    for (k, d) in weights.survival.iter().enumerate() {
        if k > 0 {
            term *= kx / k as f64;
        }
        sum += d * term;
    }
    checked_probability(sum * (-kx).exp(), PROBABILITY_TOLERANCE)
}

/// `P{M_{tilde-tau^n} > x, tilde-tau^n < infinity}`.
pub fn prob_tilde_max_tail(params: &ModelParams, spec: &DrawdownSpec, n: u32, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::param("x", x, "running-maximum level must be >= 0"));
    }
    let kappa = AdjustmentRate::new(params, spec).kappa;
    let raw = prob_tilde_finite(params, spec, n)? * erlang_survival(n, kappa, x);
    checked_probability(raw, PROBABILITY_TOLERANCE)
}

/// `P{X_{tau^n} >= x}`: Erlang(n, kappa) translated by `-n a`.
pub fn prob_value_tail(params: &ModelParams, spec: &DrawdownSpec, n: u32, x: f64) -> Result<f64> {
    check_index("n", n)?;
    let kappa = AdjustmentRate::new(params, spec).kappa;
    ErlangTail::new(n, kappa, -(n as f64) * spec.a()).map(|e| e.survival(x))
}

/// Mixed-Erlang weights of `M_{tau^n}`.
pub fn mixed_erlang_weights(params: &ModelParams, spec: &DrawdownSpec, n: u32) -> Result<MixedErlangWeights> {
    check_index("n", n)?;
    let lam = recovery_lambda(params, spec);
    // Weights come from the complements 1 - D_k: near 1 the survivals
    // themselves carry no information about their differences.
    let mut survival = Vec::with_capacity(n as usize);
    let mut complement = Vec::with_capacity(n as usize + 1);
    survival.push(1.0);
    complement.push(0.0);
    for k in 1..n {
        let law = GeneralizedPoisson::new(k as f64 * lam, lam)?;
        let upto = (n - 1 - k) as u64;
        survival.push(law.partial_sum(upto));
        complement.push(law.complement(upto));
    }
    complement.push(1.0);
    let weights = complement.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(MixedErlangWeights { n, survival, weights })
}

/// `P{tilde-tau^k = tau^{k+m}}`: `m` non-recovered drawdowns occur before the
/// `k`-th drawdown with recovery.
pub fn recovery_link_pmf(params: &ModelParams, spec: &DrawdownSpec, k: u32, m: u64) -> Result<f64> {
    check_index("k", k)?;
    if k == 1 {
        return Ok(if m == 0 { 1.0 } else { 0.0 });
    }
    Ok(recovery_link_law(params, spec, k)?.pmf(m))
}

/// The generalized-Poisson law of `N_{tilde-tau^k} - k` for `k >= 2`.
pub fn recovery_link_law(params: &ModelParams, spec: &DrawdownSpec, k: u32) -> Result<GeneralizedPoisson> {
    if k < 2 {
        return Err(Error::param("k", k as f64, "generalized-Poisson link needs k >= 2"));
    }
    let lam = recovery_lambda(params, spec);
    GeneralizedPoisson::new((k - 1) as f64 * lam, lam)
}

/// `int_0^inf e^{-b y} y (y + m a)^{m-1} dy`, expanded binomially into gamma
/// integrals; `1 / b` at `m = 0`.
pub fn magnitude_inner_integral<T: Scalar>(b: T, m: u32, a: f64) -> T {
    if m == 0 {
        return T::one() / b;
    }
    let shift = m as f64 * a;
    let mut binom = 1.0;
    let mut sum = T::zero();
    let mut b_pow = b * b;
    for j in 0..m {
        if j > 0 {
            binom *= (m - j) as f64 / j as f64;
        }
        let coeff = binom * shift.powi((m - 1 - j) as i32) * factorial(j + 1);
        sum = sum + T::from_f64(coeff) / b_pow;
        b_pow = b_pow * b;
    }
    sum
}

/// `E[e^{-lambda tau^n}; M_{tau^n} - X_{tau^n} <= x]` for `a <= x <= n a`.
///
/// The drawdown at `tau^n` has an atom at `a` (the last episode set a new
/// maximum); the boundary indicator is taken strictly so the result is the
/// right-continuous distribution function including that atom.
pub fn lt_drawdown_magnitude_cdf<T: Scalar>(coeffs: &LaplaceCoeffs<T>, n: u32, x: f64) -> Result<T> {
    check_index("n", n)?;
    let a = coeffs.a;
    let top = n as f64 * a;
    if !(x >= a && x <= top) {
        return Err(Error::param("x", x, "drawdown magnitude must lie in [a, n a]"));
    }
    let b = coeffs.b;
    let slack = top - x;
    let mut sum = T::zero();
    for m in 0..n {
        let lead = T::from_f64(slack.powi(m as i32) / factorial(m)) / b.powi((n - m) as i32);
        sum = sum + lead;
        let edge = (n - m) as f64 * a - x;
        if edge > 0.0 || (edge == 0.0 && n - m - 1 > 0) {
            let rest = n - m - 1;
            let weight = edge.powi(rest as i32) / (factorial(m) * factorial(rest));
            sum = sum - magnitude_inner_integral(b, m, a) * weight;
        }
    }
    Ok(coeffs.c.powi(n as i32) * (-b * slack).exp() * sum)
}

/// Long-run number of drawdowns per unit time.
pub fn freq_rate(params: &ModelParams, spec: &DrawdownSpec, kind: DrawdownKind) -> Result<f64> {
    match kind {
        DrawdownKind::WithRecovery => {
            if params.mu() <= 0.0 {
                Ok(0.0)
            } else {
                // 2 mu^2 / (sigma^2 (e^{gamma a} - 1)) = mu kappa.
                Ok(params.mu() * AdjustmentRate::new(params, spec).kappa)
            }
        }
        DrawdownKind::WithoutRecovery => Ok(1.0 / expected_tau(params, spec)?),
    }
}
