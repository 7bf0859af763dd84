//! Bilateral birth-and-death chains and their one-step hitting transforms.
//!
//! `H_n↓(λ) = E^n[e^{-λ τ_{n-1}}]` and `H_n↑(λ) = E^n[e^{-λ τ_{n+1}}]` are the
//! ratios of consecutive terms of minimal solutions of three-term recurrences.
//! Only the directions in which the continued fraction is known to converge
//! to the right value are exposed; the caller certifies this with a
//! [`TailRegime`].

use std::fmt;
use std::sync::Arc;

use crate::contfrac::{self, Coefficient, Direction, RecurrenceSpec};
use crate::error::{Error, Result};
use crate::laplace::{LaplaceValue, Method};

/// Up-rates `β_n` and down-rates `δ_n` indexed by ℤ.
#[derive(Clone)]
pub struct BirthDeathRates {
    beta: Coefficient,
    delta: Coefficient,
}

impl fmt::Debug for BirthDeathRates {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BirthDeathRates").finish_non_exhaustive()
    }
}

impl BirthDeathRates {
    pub fn new(
        beta: impl Fn(i64) -> f64 + Send + Sync + 'static,
        delta: impl Fn(i64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        BirthDeathRates {
            beta: Arc::new(beta),
            delta: Arc::new(delta),
        }
    }

    /// Rates of the process `X` on `T_q` restricted to the positive half:
    /// `β_n = q^{-2n}`, `δ_n = q^{-2n+1}`.
    pub fn tq(q: f64) -> Result<Self> {
        if !(q > 1.0 && q.is_finite()) {
            return Err(Error::domain(format!("q must exceed 1, got {q}")));
        }
        let lq = q.ln();
        Ok(BirthDeathRates::new(
            move |n| (-2.0 * n as f64 * lq).exp(),
            move |n| ((1.0 - 2.0 * n as f64) * lq).exp(),
        ))
    }

    /// `(β_n, δ_n)`; both must be positive and finite.
    pub fn at(&self, n: i64) -> Result<(f64, f64)> {
        let (b, d) = ((self.beta)(n), (self.delta)(n));
        if b > 0.0 && d > 0.0 && b.is_finite() && d.is_finite() {
            Ok((b, d))
        } else {
            Err(Error::domain(format!(
                "rates at {n} must be positive and finite, got beta = {b}, delta = {d}"
            )))
        }
    }

    pub fn beta(&self, n: i64) -> Result<f64> {
        self.at(n).map(|r| r.0)
    }

    pub fn delta(&self, n: i64) -> Result<f64> {
        self.at(n).map(|r| r.1)
    }

    /// `ρ_n = δ_n / β_n`.
    pub fn rho(&self, n: i64) -> Result<f64> {
        self.at(n).map(|(b, d)| d / b)
    }

    /// Rates of the chain run at `factor` times the speed.
    pub fn time_scaled(&self, factor: f64) -> Self {
        let (b, d) = (self.beta.clone(), self.delta.clone());
        BirthDeathRates::new(move |n| factor * b(n), move |n| factor * d(n))
    }
}

/// Rates of the chain embedded in a strictly increasing sequence of points
/// `t_n` of a scattered time scale.
pub fn rates_from_scattered_scale(
    points: impl Fn(i64) -> f64 + Send + Sync + 'static,
) -> BirthDeathRates {
    let t: Coefficient = Arc::new(points);
    let t2 = t.clone();
    BirthDeathRates::new(
        move |n| {
            let (lo, mid, hi) = (t(n - 1), t(n), t(n + 1));
            if lo < mid && mid < hi {
                1.0 / ((hi - mid) * (hi - lo))
            } else {
                f64::NAN
            }
        },
        move |n| {
            let (lo, mid, hi) = (t2(n - 1), t2(n), t2(n + 1));
            if lo < mid && mid < hi {
                1.0 / ((mid - lo) * (hi - lo))
            } else {
                f64::NAN
            }
        },
    )
}

/// Caller-certified tail behaviour of the rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailRegime {
    /// Common limit of `ρ_n` in both tails; must lie in `(1, ∞)`.
    pub rho_limit_down: f64,
    /// `β_{-n} → ∞` as `n → ∞`.
    pub beta_divergence_down: bool,
    /// `β_n, δ_n → 0` as `n → ∞`.
    pub rates_vanish_up: bool,
}

impl TailRegime {
    /// The regime satisfied by the rates of `X` on `T_q`.
    pub fn tq(q: f64) -> Self {
        TailRegime {
            rho_limit_down: q,
            beta_divergence_down: true,
            rates_vanish_up: true,
        }
    }

    fn rho(&self) -> Result<f64> {
        let r = self.rho_limit_down;
        if r > 1.0 && r.is_finite() {
            Ok(r)
        } else {
            Err(Error::Regime(format!("rho limit must lie in (1, inf), got {r}")))
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("lambda must be positive and finite, got {lambda}")))
    }
}

/// Recurrence whose minimal solution (positive direction) has ratio
/// `β_{n-1} H_n↓(λ)` at `n`.
pub fn down_recurrence(rates: &BirthDeathRates, lambda: f64) -> RecurrenceSpec {
    // Ratio form: a_k = ρ_k, b_k = 1 + ρ_k + λ/β_k. Its coefficients blow up as
    // β_k → 0, so the equivalent form with c_k = β_k is used instead.
    let (r1, r2) = (rates.clone(), rates.clone());
    let ratio = RecurrenceSpec::new(
        move |k| r1.rho(k).unwrap_or(f64::NAN),
        move |k| match r2.at(k) {
            Ok((b, d)) => 1.0 + d / b + lambda / b,
            Err(_) => f64::NAN,
        },
        Direction::Positive,
    );
    let r3 = rates.clone();
    contfrac::equivalence_transform(&ratio, move |k| r3.beta(k).unwrap_or(f64::NAN))
        .with_limit(0.0, lambda)
}

/// Recurrence whose minimal solution (negative direction) has ratio
/// `H_n↑(λ)` at `n`.
pub fn up_recurrence(rates: &BirthDeathRates, lambda: f64, rho_limit: f64) -> RecurrenceSpec {
    let (r1, r2) = (rates.clone(), rates.clone());
    RecurrenceSpec::new(
        move |k| r1.rho(k).map(|r| 1.0 / r).unwrap_or(f64::NAN),
        move |k| match r2.at(k) {
            Ok((b, d)) => 1.0 + b / d + lambda / d,
            Err(_) => f64::NAN,
        },
        Direction::Negative,
    )
    .with_limit(1.0 / rho_limit, 1.0 + 1.0 / rho_limit)
}

/// `H_n↓(λ)`, the transform of the time to step from `n` to `n - 1`.
pub fn h_down(
    rates: &BirthDeathRates,
    regime: &TailRegime,
    n: i64,
    lambda: f64,
    tol: f64,
) -> Result<LaplaceValue> {
    check_lambda(lambda)?;
    regime.rho()?;
    if !regime.rates_vanish_up {
        return Err(Error::Regime(
            "downward transforms need rates vanishing in the upper tail".into(),
        ));
    }
    let rec = down_recurrence(rates, lambda);
    let cf = contfrac::minimal_solution_ratio(&rec, n, contfrac::MAX_DEPTH, tol)?;
    let scale = rates.beta(n - 1)?;
    Ok(LaplaceValue::new(
        cf.value / scale,
        Method::ContinuedFraction,
        cf.error_estimate / scale,
    ))
}

/// `H_n↑(λ)`, the transform of the time to step from `n` to `n + 1`, with the
/// chain killed on reaching the accumulation point of the lower tail.
pub fn h_up(
    rates: &BirthDeathRates,
    regime: &TailRegime,
    n: i64,
    lambda: f64,
    tol: f64,
) -> Result<LaplaceValue> {
    check_lambda(lambda)?;
    let rho = regime.rho()?;
    if !regime.beta_divergence_down {
        return Err(Error::Regime(
            "upward transforms need up-rates diverging in the lower tail".into(),
        ));
    }
    let rec = up_recurrence(rates, lambda, rho);
    let cf = contfrac::minimal_solution_ratio(&rec, n, contfrac::MAX_DEPTH, tol)?;
    Ok(LaplaceValue::new(
        cf.value,
        Method::ContinuedFraction,
        cf.error_estimate,
    ))
}

/// `H_{n,m}(λ)` as a telescoped product of one-step transforms.
pub fn h_path(
    rates: &BirthDeathRates,
    regime: &TailRegime,
    n: i64,
    m: i64,
    lambda: f64,
    tol: f64,
) -> Result<LaplaceValue> {
    check_lambda(lambda)?;
    let factors: Vec<LaplaceValue> = if m < n {
        ((m + 1)..=n)
            .map(|k| h_down(rates, regime, k, lambda, tol))
            .collect::<Result<_>>()?
    } else {
        (n..m)
            .map(|k| h_up(rates, regime, k, lambda, tol))
            .collect::<Result<_>>()?
    };
    let mut log_sum = 0.0;
    let mut rel = 0.0;
    for f in &factors {
        log_sum += f.value.ln();
        rel += f.error_estimate / f.value;
    }
    let value = log_sum.exp();
    Ok(LaplaceValue::new(value, Method::ContinuedFraction, rel * value))
}
