//! Closed forms for the process `X = ξ(c_q ·)` on `T_q = {±q^k} ∪ {0}`.
//!
//! The process parameter is `q > 1`; every series below runs in the base
//! `p = q^{-2}` (or `q^{-1}` for the `₀φ₁` forms), and [`TqParams`] owns that
//! translation. On the positive half, `X` is the birth-and-death chain with
//! `β_n = q^{-2n}` and `δ_n = q^{-2n+1}` at `q^n`.

use serde::Serialize;

use crate::contfrac::{self, Direction, RecurrenceSpec};
use crate::error::{Error, Result};
use crate::laplace::{LaplaceValue, Method};
use crate::qpoisson::QPoisson;
use crate::qseries::{self, Extent, LogSigned, QBase, SeriesControl, SeriesSum};

/// Process parameter `q > 1` with its derived constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TqParams {
    q: f64,
    base: f64,
    c_q: f64,
}

impl TqParams {
    pub fn new(q: f64) -> Result<Self> {
        if !(q > 1.0 && q.is_finite()) {
            return Err(Error::domain(format!("q must exceed 1, got {q}")));
        }
        Ok(TqParams {
            q,
            base: 1.0 / (q * q),
            c_q: (q - 1.0).powi(2) * (1.0 + q) / q,
        })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// `p = q^{-2}`.
    pub fn base(&self) -> QBase {
        QBase::new(self.base).expect("q > 1")
    }

    fn base_inv_q(&self) -> QBase {
        QBase::new(1.0 / self.q).expect("q > 1")
    }

    /// `c_q = q^{-1}(q - 1)²(1 + q)`.
    pub fn c_q(&self) -> f64 {
        self.c_q
    }

    /// `q^k` computed through the logarithm, for integer or real `k`.
    #[inline]
    pub fn pow(&self, k: f64) -> f64 {
        (k * self.q.ln()).exp()
    }

    /// Speed-measure atom `(q^{n+1} - q^{n-1}) / 2` at `±q^n`.
    pub fn mu_atom(&self, n: i64) -> f64 {
        0.5 * self.pow((n - 1) as f64) * (self.q * self.q - 1.0)
    }

    /// Holding rate `β_n + δ_n` at `±q^n`.
    pub fn hold_rate(&self, n: i64) -> f64 {
        self.pow(-2.0 * n as f64) * (1.0 + self.q)
    }

    /// Probability that a jump from `±q^n` moves towards 0.
    pub fn down_probability(&self) -> f64 {
        self.q / (1.0 + self.q)
    }
}

/// A point of `T_q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TqState {
    Zero,
    Positive(i64),
    Negative(i64),
}

impl TqState {
    pub fn value(self, p: &TqParams) -> f64 {
        match self {
            TqState::Zero => 0.0,
            TqState::Positive(n) => p.pow(n as f64),
            TqState::Negative(n) => -p.pow(n as f64),
        }
    }

    pub fn exponent(self) -> Option<i64> {
        match self {
            TqState::Zero => None,
            TqState::Positive(n) | TqState::Negative(n) => Some(n),
        }
    }

    pub fn sign(self) -> i8 {
        match self {
            TqState::Zero => 0,
            TqState::Positive(_) => 1,
            TqState::Negative(_) => -1,
        }
    }

    pub fn mirror(self) -> TqState {
        match self {
            TqState::Zero => TqState::Zero,
            TqState::Positive(n) => TqState::Negative(n),
            TqState::Negative(n) => TqState::Positive(n),
        }
    }

    /// Speed-measure mass of the state; 0 carries none.
    pub fn mu(self, p: &TqParams) -> f64 {
        self.exponent().map_or(0.0, |n| p.mu_atom(n))
    }
}

/// Which closed form to use for downward hitting transforms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    Phi01,
    Phi11,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("lambda must be positive and finite, got {lambda}")))
    }
}

/// `λ^a q^b` via logarithms.
fn lam_q(p: &TqParams, lambda: f64, a: f64, b: f64) -> f64 {
    (a * lambda.ln() + b * p.q.ln()).exp()
}

fn phi11(p: &TqParams, b: f64, z: f64) -> Result<SeriesSum> {
    qseries::rphis_detailed(&[0.0], &[b], p.base(), z, &SeriesControl::default())
}

fn phi01(p: &TqParams, z: f64) -> Result<SeriesSum> {
    qseries::rphis_detailed(&[], &[0.0], p.base_inv_q(), z, &SeriesControl::default())
}

fn rel_error(s: &SeriesSum) -> f64 {
    s.error_estimate(SeriesControl::default().rel_tol()) / s.value.abs()
}

/// `prefactor · num / den` with relative errors added.
fn assemble(prefactor: LogSigned, num: SeriesSum, den: SeriesSum, method: Method) -> LaplaceValue {
    let value = (prefactor * num.value / den.value).to_f64();
    let rel = rel_error(&num) + rel_error(&den);
    LaplaceValue::new(value, method, rel * value.abs())
}

/// `H_0↓(λ)`: transform of the time to reach `1/q` from `1`.
pub fn h0_down(lambda: f64, p: &TqParams, form: Form) -> Result<LaplaceValue> {
    h_nm_with_form(0, -1, lambda, p, form)
}

/// `H_0↑(λ)`: transform of the time to reach `q` from `1`, killed at 0.
pub fn h0_up(lambda: f64, p: &TqParams) -> Result<LaplaceValue> {
    h_nm(0, 1, lambda, p)
}

/// `H_0↓(λ)` from the continued fraction `q/(1 + q + λ - q/(1 + q + λq² - ...))`.
pub fn h0_down_cf(lambda: f64, p: &TqParams, tol: f64) -> Result<LaplaceValue> {
    check_lambda(lambda)?;
    let (q, lq, ll) = (p.q, p.q.ln(), lambda.ln());
    let rec = RecurrenceSpec::new(
        move |_| q,
        move |k| 1.0 + q + (ll + 2.0 * k as f64 * lq).exp(),
        Direction::Positive,
    );
    let cf = contfrac::minimal_solution_ratio(&rec, 0, contfrac::MAX_DEPTH, tol)?;
    Ok(LaplaceValue::new(cf.value, Method::ContinuedFraction, cf.error_estimate))
}

/// `H_0↑(λ)` from the continued fraction
/// `1/(1 + q + λ - q/(1 + q + λq^{-2} - q/(1 + q + λq^{-4} - ...)))`.
pub fn h0_up_cf(lambda: f64, p: &TqParams, tol: f64) -> Result<LaplaceValue> {
    check_lambda(lambda)?;
    let (q, lq, ll) = (p.q, p.q.ln(), lambda.ln());
    let rec = RecurrenceSpec::new(
        move |k| if k == 0 { 1.0 } else { q },
        move |k| 1.0 + q + (ll - 2.0 * k as f64 * lq).exp(),
        Direction::Positive,
    )
    .with_limit(q, 1.0 + q);
    let cf = contfrac::minimal_solution_ratio(&rec, 0, contfrac::MAX_DEPTH, tol)?;
    Ok(LaplaceValue::new(cf.value, Method::ContinuedFraction, cf.error_estimate))
}

/// `H_0↓(λ) = q / (q + λ ₁φ₁(0; -1/(qλ); p; -1/λ) / ₁φ₁(0; -1/(qλ); p; -1/(q²λ)))`.
pub fn h0_down_alt(lambda: f64, p: &TqParams) -> Result<LaplaceValue> {
    check_lambda(lambda)?;
    let b = -lam_q(p, lambda, -1.0, -1.0);
    let num = phi11(p, b, -1.0 / lambda)?;
    let den = phi11(p, b, -lam_q(p, lambda, -1.0, -2.0))?;
    let r = num.value / den.value;
    let value = p.q / (p.q + lambda * r);
    let rel_r = rel_error(&num) + rel_error(&den);
    let err = value * (lambda * r / (p.q + lambda * r)) * rel_r;
    Ok(LaplaceValue::new(value, Method::Phi11Ratio, err))
}

/// `H_0↑(λ) = 1 - ₁φ₁(0; -λ/q; p; 1/q) / ₁φ₁(0; -λ/q; p; q^{-3})`.
pub fn h0_up_alt(lambda: f64, p: &TqParams) -> Result<LaplaceValue> {
    check_lambda(lambda)?;
    let b = -lambda / p.q;
    let num = phi11(p, b, 1.0 / p.q)?;
    let den = phi11(p, b, p.pow(-3.0))?;
    let r = num.value / den.value;
    let err = r.abs() * (rel_error(&num) + rel_error(&den)) + f64::EPSILON;
    Ok(LaplaceValue::new(1.0 - r, Method::Phi11Ratio, err))
}

/// `H_{n,m}(λ) = E^{q^n}[e^{-λ τ_{q^m}}]`, killed at 0 when `m > n`.
pub fn h_nm(n: i64, m: i64, lambda: f64, p: &TqParams) -> Result<LaplaceValue> {
    h_nm_with_form(n, m, lambda, p, Form::Phi11)
}

/// [`h_nm`] with an explicit choice of closed form for `m < n`; the upward
/// case has a single `₁φ₁` form and ignores `form`.
pub fn h_nm_with_form(
    n: i64,
    m: i64,
    lambda: f64,
    p: &TqParams,
    form: Form,
) -> Result<LaplaceValue> {
    check_lambda(lambda)?;
    if m == n {
        return Ok(LaplaceValue::new(1.0, Method::Phi11Ratio, 0.0));
    }
    let (nf, qb) = (n as f64, p.base());
    if m > n {
        let s = (m - n) as f64;
        let arg = lam_q(p, lambda, 1.0, 2.0 * nf + 2.0 * s - 3.0);
        let prefactor = (LogSigned::from_pow(p.q, s)
            * qseries::qpoch(-arg, qb, m - n)?)
        .recip();
        let num = phi11(p, -lam_q(p, lambda, 1.0, 2.0 * nf - 3.0), p.pow(-3.0))?;
        let den = phi11(p, -arg, p.pow(-3.0))?;
        return Ok(assemble(prefactor, num, den, Method::Phi11Ratio));
    }
    let s = (n - m) as f64;
    match form {
        Form::Phi01 => {
            let prefactor = LogSigned::from_pow(p.q, s * s - 2.0 * s * nf)
                * LogSigned::from_pow(lambda, -s);
            let num = phi01(p, lam_q(p, lambda, -1.0, -(2.0 * nf + 1.0)))?;
            let den = phi01(p, lam_q(p, lambda, -1.0, -(2.0 * (nf - s) + 1.0)))?;
            Ok(assemble(prefactor, num, den, Method::Phi01Ratio))
        }
        Form::Phi11 => {
            let prefactor =
                qseries::qpoch(-lam_q(p, lambda, 1.0, 2.0 * nf - 1.0), qb, n - m)?.recip();
            let num = phi11(
                p,
                -lam_q(p, lambda, -1.0, -(2.0 * nf + 1.0)),
                -lam_q(p, lambda, -1.0, -(2.0 * nf + 2.0)),
            )?;
            let den = phi11(
                p,
                -lam_q(p, lambda, -1.0, 2.0 * s - 2.0 * nf - 1.0),
                -lam_q(p, lambda, -1.0, 2.0 * s - 2.0 * nf - 2.0),
            )?;
            Ok(assemble(prefactor, num, den, Method::Phi11Ratio))
        }
    }
}

/// `H_{n,-∞}(λ)`, the transform of the hitting time of 0 from `q^n`:
/// `₁φ₁(0; -1/(λq^{2n+1}); p; -1/(λq^{2n+2})) e_p(-λq^{2n-1}) / e_p(1/q)`.
pub fn h_to_zero(n: i64, lambda: f64, p: &TqParams) -> Result<LaplaceValue> {
    check_lambda(lambda)?;
    let nf = n as f64;
    let series = phi11(
        p,
        -lam_q(p, lambda, -1.0, -(2.0 * nf + 1.0)),
        -lam_q(p, lambda, -1.0, -(2.0 * nf + 2.0)),
    )?;
    let qb = p.base();
    // e_p(z) = 1/(z; p)_inf, used in product form for any z < 0.
    let ratio = qseries::qpoch(1.0 / p.q, qb, Extent::Infinite)?
        / qseries::qpoch(-lam_q(p, lambda, 1.0, 2.0 * nf - 1.0), qb, Extent::Infinite)?;
    let value = (ratio * series.value).to_f64();
    Ok(LaplaceValue::new(
        value,
        Method::Phi11Ratio,
        value * (rel_error(&series) + 16.0 * f64::EPSILON),
    ))
}

/// Density `f` of `Y = Σ_{i≥0} q^{-2i} T_i` with `T_i` independent unit
/// exponentials, as `(value, absolute error estimate)`.
///
/// `f(t) = (p; p)_∞^{-1} Σ_j (-1)^j q^{-j(j-1)} e^{-q^{2j} t} / (p; p)_j`.
/// The alternating sum loses relative precision for small `t`, where `f` is
/// itself tiny; the error estimate tracks the absolute loss.
pub fn exp_functional_density_detailed(
    t: f64,
    p: &TqParams,
    ctrl: &SeriesControl,
) -> Result<(f64, f64)> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("t must be positive and finite, got {t}")));
    }
    let lq = p.q.ln();
    let log_pp_inf = qseries::qpoch(p.base, p.base(), Extent::Infinite)?.log_magnitude();
    let mut log_pp = 0.0; // log (p; p)_j
    let mut pj = 1.0;
    let mut sum = 0.0;
    let mut abs_sum = 0.0;
    let mut run = 0;
    for j in 0..ctrl.max_terms() {
        if j > 0 {
            pj *= p.base;
            log_pp += (-pj).ln_1p();
        }
        let jf = j as f64;
        let exponent = -jf * (jf - 1.0) * lq - (2.0 * jf * lq).exp() * t - log_pp;
        let mag = exponent.exp();
        let term = if j % 2 == 0 { mag } else { -mag };
        sum += term;
        abs_sum += mag;
        if mag <= 1e-17 * abs_sum {
            run += 1;
            if run >= 3 {
                let scale = (-log_pp_inf).exp();
                let err = 8.0 * f64::EPSILON * abs_sum * scale;
                return Ok((sum * scale, err));
            }
        } else {
            run = 0;
        }
    }
    Err(Error::no_convergence("alternating density series", ctrl.max_terms()))
}

pub fn exp_functional_density(t: f64, p: &TqParams) -> Result<f64> {
    exp_functional_density_detailed(t, p, &SeriesControl::default()).map(|r| r.0)
}

/// Density of the hitting time of 0, with the q-Poisson table cached.
#[derive(Debug, Clone)]
pub struct TauZeroDensity {
    params: TqParams,
    law: QPoisson,
    ctrl: SeriesControl,
}

impl TauZeroDensity {
    pub fn new(params: TqParams, ctrl: SeriesControl) -> Result<Self> {
        Ok(TauZeroDensity {
            law: QPoisson::new(params.q)?,
            params,
            ctrl,
        })
    }

    /// `(value, absolute error estimate)` of the density at `t` from `q^n`:
    /// `Σ_m w_m s_m^{-1} f(t / s_m)` with `s_m = q^{2(n+m)-1}` and `w_m` the
    /// q-Poisson weights.
    pub fn eval_detailed(&self, n: i64, t: f64) -> Result<(f64, f64)> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::domain(format!("t must be positive and finite, got {t}")));
        }
        let p = &self.params;
        let mut sum = 0.0;
        let mut err = 0.0;
        for (m, &w) in self.law.weights().iter().enumerate() {
            let s = p.pow((2 * (n + m as i64) - 1) as f64);
            let (f, e) = exp_functional_density_detailed(t / s, p, &self.ctrl)?;
            sum += w * f / s;
            err += w * e / s;
            // f is a density of a variable with an Exp(1) summand, so f <= 1.
            let tail = (1.0 - self.law.cdf(m)).max(0.0) / (s * p.q * p.q);
            if tail <= self.ctrl.rel_tol() * sum.abs() || tail < 1e-300 {
                return Ok((sum, err + tail));
            }
        }
        Ok((sum, err))
    }

    pub fn eval(&self, n: i64, t: f64) -> Result<f64> {
        let (v, e) = self.eval_detailed(n, t)?;
        if e >= v.abs() {
            return Err(Error::no_convergence(
                format!("density at t = {t}: error {e:e} exceeds value {v:e}"),
                self.ctrl.max_terms(),
            ));
        }
        Ok(v)
    }

    /// Upper bound on `P(τ ≤ eps)` from `q^n`, via
    /// `P(Y ≤ y) ≤ Π_i (1 - e^{-q^{2i} y})`.
    pub fn lower_tail_bound(&self, n: i64, eps: f64) -> f64 {
        let p = &self.params;
        let y = eps / p.pow((2 * n - 1) as f64);
        let mut prod = 1.0;
        let mut scale = 1.0;
        loop {
            let factor = -(-scale * y).exp_m1();
            prod *= factor;
            if factor > 1.0 - 1e-16 || prod == 0.0 {
                return prod;
            }
            scale *= p.q * p.q;
        }
    }
}

/// Density of the hitting time of 0 from `q^n` at time `t`.
pub fn tau_zero_density(n: i64, t: f64, p: &TqParams, ctrl: &SeriesControl) -> Result<f64> {
    TauZeroDensity::new(*p, *ctrl)?.eval(n, t)
}

/// Laplace exponent of the inverse local time at 0:
/// `ψ(λ) = λ(q² - 1)(-1/λ, -λq^{-2}; p)_∞ / (q (-λ/q, -1/(λq); p)_∞)`.
pub fn psi_exponent(lambda: f64, p: &TqParams) -> Result<f64> {
    check_lambda(lambda)?;
    let qb = p.base();
    let inf = Extent::Infinite;
    let num = qseries::qpoch(-1.0 / lambda, qb, inf)?
        * qseries::qpoch(-lambda * p.base, qb, inf)?;
    let den = qseries::qpoch(-lambda / p.q, qb, inf)?
        * qseries::qpoch(-1.0 / (lambda * p.q), qb, inf)?;
    Ok((num / den * (lambda * (p.q * p.q - 1.0) / p.q)).to_f64())
}

/// `2λ Σ_{|n| ≤ window}` of entrance-law transforms; converges to `ψ(λ)`.
pub fn psi_exponent_sum(lambda: f64, p: &TqParams, window: i64) -> Result<f64> {
    let mut s = 0.0;
    for n in -window..=window {
        s += entrance_law_lt(n, lambda, p)?;
    }
    Ok(2.0 * lambda * s)
}

/// `∫ e^{-λt} n_t({±q^n}) dt = μ({q^n}) H_{n,-∞}(λ)`.
pub fn entrance_law_lt(n: i64, lambda: f64, p: &TqParams) -> Result<f64> {
    Ok(p.mu_atom(n) * h_to_zero(n, lambda, p)?.value)
}

fn killed_diagonal(n: i64, lambda: f64, p: &TqParams) -> Result<f64> {
    let q = p.q;
    let up = h0_up(lam_q(p, lambda, 1.0, 2.0 * (n - 1) as f64), p)?.value;
    let down = h0_down(lam_q(p, lambda, 1.0, 2.0 * (n + 1) as f64), p, Form::Phi11)?.value;
    let rate = p.hold_rate(n);
    Ok(1.0 / (lambda + rate * (1.0 - (q / (q + 1.0)) * up - down / (q + 1.0))))
}

/// `R̂_λ(q^m, {q^n})` for the process killed at 0.
pub fn resolvent_killed(m: i64, n: i64, lambda: f64, p: &TqParams) -> Result<f64> {
    check_lambda(lambda)?;
    let diag = killed_diagonal(n, lambda, p)?;
    if m == n {
        Ok(diag)
    } else {
        Ok(h_nm(m, n, lambda, p)?.value * diag)
    }
}

/// `R_λ(x, {y})` for the full process, built from the killed resolvent, the
/// hitting transform of 0 and `R_λ(0, {y}) = ∫ e^{-λt} n_t({y}) dt / ψ(λ)`.
pub fn resolvent_full(x: TqState, y: TqState, lambda: f64, p: &TqParams) -> Result<f64> {
    check_lambda(lambda)?;
    match (x, y) {
        (_, TqState::Zero) => Ok(0.0),
        (TqState::Zero, y) => {
            let n = y.exponent().expect("nonzero state");
            Ok(entrance_law_lt(n, lambda, p)? / psi_exponent(lambda, p)?)
        }
        (TqState::Negative(_), _) => resolvent_full(x.mirror(), y.mirror(), lambda, p),
        (TqState::Positive(m), y) => {
            let through_zero =
                h_to_zero(m, lambda, p)?.value * resolvent_full(TqState::Zero, y, lambda, p)?;
            match y {
                TqState::Positive(n) => Ok(resolvent_killed(m, n, lambda, p)? + through_zero),
                _ => Ok(through_zero),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p2() -> TqParams {
        TqParams::new(2.0).unwrap()
    }

    #[test]
    fn params() {
        let p = p2();
        assert_eq!(p.base().get(), 0.25);
        assert!((p.c_q() - 1.5).abs() < 1e-15);
        assert!((p.mu_atom(1) - 1.5).abs() < 1e-15);
        assert!(TqParams::new(1.0).is_err());
    }

    #[test]
    fn theorem_forms_agree_with_fractions() {
        let p = p2();
        let a = h0_down(1.0, &p, Form::Phi01).unwrap().value;
        let b = h0_down(1.0, &p, Form::Phi11).unwrap().value;
        let c = h0_down_cf(1.0, &p, 1e-14).unwrap().value;
        let d = h0_down_alt(1.0, &p).unwrap().value;
        for v in [b, c, d] {
            assert!((a - v).abs() < 1e-12, "{a} {v}");
        }
        assert!((a - 0.539_095_662_989_877).abs() < 1e-12);
        let u = h0_up(1.0, &p).unwrap().value;
        let v = h0_up_cf(1.0, &p, 1e-14).unwrap().value;
        let w = h0_up_alt(1.0, &p).unwrap().value;
        assert!((u - v).abs() < 1e-12 && (u - w).abs() < 1e-10, "{u} {v} {w}");
    }

    #[test]
    fn hitting_zero_reference_value() {
        let v = h_to_zero(0, 1.0, &p2()).unwrap().value;
        assert!((v - 0.294_720_285_633_735_2).abs() < 1e-12);
    }

    #[test]
    fn density_series_reference_values() {
        let p = p2();
        // Laplace transform of f at 1 is 1/(-1; p)_inf.
        let f = exp_functional_density(0.3, &p).unwrap();
        assert!(f > 0.0 && f < 1.0);
        let (tiny, err) = exp_functional_density_detailed(1e-3, &p, &SeriesControl::default()).unwrap();
        assert!(tiny.abs() < 1e-8 && err < 1e-14);
    }

    #[test]
    fn states() {
        let p = p2();
        assert_eq!(TqState::Negative(2).value(&p), -4.0);
        assert_eq!(TqState::Positive(-1).mirror(), TqState::Negative(-1));
        assert_eq!(TqState::Zero.mu(&p), 0.0);
    }
}
