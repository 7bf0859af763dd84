//! Continued fractions attached to three-term recurrences.
//!
//! A [`RecurrenceSpec`] in the positive direction encodes
//! `U_{k+1} = b_k U_k - a_k U_{k-1}`; in the negative direction the roles of
//! `k + 1` and `k - 1` are swapped. Approximants are built from the maps
//! `s_k(z) = -a_k / (b_k + z)` composed by backward substitution, starting at
//! `start` and stepping in the recurrence direction.
//!
//! [`minimal_solution_ratio`] returns `W = a/(b - a/(b - ...))`, the negated
//! composition value, which is the ratio of consecutive terms of the minimal
//! solution.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Denominators below this magnitude are reported as poles.
const POLE_EPS: f64 = 1e-300;

const START_DEPTH: usize = 16;
/// Default depth budget for [`minimal_solution_ratio`].
pub const MAX_DEPTH: usize = 1 << 16;

pub type Coefficient = Arc<dyn Fn(i64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Positive,
    Negative,
}

impl Direction {
    #[inline]
    fn step(self) -> i64 {
        match self {
            Direction::Positive => 1,
            Direction::Negative => -1,
        }
    }
}

/// Coefficients `(a_k, b_k)` of a three-term recurrence.
#[derive(Clone)]
pub struct RecurrenceSpec {
    a: Coefficient,
    b: Coefficient,
    direction: Direction,
    /// `(lim a_k, lim b_k)` along the direction, when known.
    limit: Option<(f64, f64)>,
}

impl fmt::Debug for RecurrenceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RecurrenceSpec")
            .field("direction", &self.direction)
            .field("limit", &self.limit)
            .finish_non_exhaustive()
    }
}

impl RecurrenceSpec {
    pub fn new(
        a: impl Fn(i64) -> f64 + Send + Sync + 'static,
        b: impl Fn(i64) -> f64 + Send + Sync + 'static,
        direction: Direction,
    ) -> Self {
        RecurrenceSpec {
            a: Arc::new(a),
            b: Arc::new(b),
            direction,
            limit: None,
        }
    }

    /// Constant coefficients; the limit is recorded automatically.
    pub fn constant(a: f64, b: f64, direction: Direction) -> Self {
        RecurrenceSpec::new(move |_| a, move |_| b, direction).with_limit(a, b)
    }

    pub fn with_limit(mut self, a_lim: f64, b_lim: f64) -> Self {
        self.limit = Some((a_lim, b_lim));
        self
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn limit(&self) -> Option<(f64, f64)> {
        self.limit
    }

    /// `(a_k, b_k)`, rejecting zero or non-finite coefficients.
    pub fn coefficients(&self, k: i64) -> Result<(f64, f64)> {
        let (a, b) = ((self.a)(k), (self.b)(k));
        if a == 0.0 || b == 0.0 || !a.is_finite() || !b.is_finite() {
            return Err(Error::domain(format!(
                "recurrence coefficients must be finite and nonzero, got a_{k} = {a}, b_{k} = {b}"
            )));
        }
        Ok((a, b))
    }

    fn index(&self, start: i64, offset: usize) -> i64 {
        start + self.direction.step() * offset as i64
    }
}

/// Limits `β±` of the fixed points of the tail map in `W` coordinates, that is
/// the roots of `w² - b w + a = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoxodromicTail {
    pub beta_minus: f64,
    pub beta_plus: f64,
}

/// Value of a continued fraction together with its convergence record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CFValue {
    pub value: f64,
    pub depth_used: usize,
    /// Seed placed at the truncation point, in `W` coordinates.
    pub tail_seed: f64,
    /// Absolute difference between the last two accepted approximants.
    pub error_estimate: f64,
}

pub fn tail_fixed_points(a_lim: f64, b_lim: f64) -> Result<LoxodromicTail> {
    let disc = b_lim * b_lim - 4.0 * a_lim;
    if !(disc > 0.0) {
        return Err(Error::domain(format!(
            "tail is not loxodromic: b^2 - 4a = {disc} for a = {a_lim}, b = {b_lim}"
        )));
    }
    let root = disc.sqrt();
    // Avoid cancellation in the smaller root.
    let big = 0.5 * (b_lim + b_lim.signum() * root);
    let small = if big != 0.0 { a_lim / big } else { 0.5 * (b_lim - root) };
    let (beta_minus, beta_plus) = if small.abs() <= big.abs() {
        (small, big)
    } else {
        (big, small)
    };
    if beta_minus.abs() == beta_plus.abs() {
        return Err(Error::domain(format!(
            "fixed points have equal modulus for a = {a_lim}, b = {b_lim}"
        )));
    }
    Ok(LoxodromicTail {
        beta_minus,
        beta_plus,
    })
}

/// `S^depth(0)`, the classical approximant.
pub fn classical_approximant(rec: &RecurrenceSpec, start: i64, depth: usize) -> Result<f64> {
    modified_approximant(rec, start, depth, 0.0)
}

/// `S^depth(tail) = s_start ∘ ... ∘ s_{start+depth-1}(tail)`, with `tail` in the
/// same (z) coordinates as the maps.
pub fn modified_approximant(
    rec: &RecurrenceSpec,
    start: i64,
    depth: usize,
    tail: f64,
) -> Result<f64> {
    if depth == 0 {
        return Err(Error::domain("continued-fraction depth must be positive"));
    }
    let mut z = tail;
    for offset in (0..depth).rev() {
        let k = rec.index(start, offset);
        let (a, b) = rec.coefficients(k)?;
        let den = b + z;
        if den.abs() < POLE_EPS {
            return Err(Error::pole(format!(
                "denominator b_{k} + z vanishes during backward substitution"
            )));
        }
        z = -a / den;
    }
    Ok(z)
}

/// Attractive fixed point of the local map `w ↦ a_k / (b_k - w)` if it is
/// loxodromic at index `k`.
fn local_seed(rec: &RecurrenceSpec, k: i64) -> Option<f64> {
    let (a, b) = rec.coefficients(k).ok()?;
    tail_fixed_points(a, b).ok().map(|t| t.beta_minus)
}

/// Value `W` at the start index of the fraction `a/(b - a/(b - ...))`, i.e. the
/// ratio `Ũ_at / Ũ_{at-1}` of the minimal solution (`Ũ_at / Ũ_{at+1}` in the
/// negative direction).
///
/// Depth is doubled from 16 up to `max_depth`; the tail is seeded with the
/// attractive fixed point at the truncation index (falling back to the limit
/// data, then to 0). Convergence requires two successive relative
/// differences below `tol`.
pub fn minimal_solution_ratio(
    rec: &RecurrenceSpec,
    at: i64,
    max_depth: usize,
    tol: f64,
) -> Result<CFValue> {
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
    }
    let limit_seed = rec
        .limit
        .and_then(|(a, b)| tail_fixed_points(a, b).ok())
        .map(|t| t.beta_minus);
    adaptive(rec, at, max_depth.max(START_DEPTH), tol, |depth| {
        local_seed(rec, rec.index(at, depth))
            .or(limit_seed)
            .unwrap_or(0.0)
    })
}

/// Classical value `-S^n(0)` with the same adaptive schedule as
/// [`minimal_solution_ratio`]; used to compare convergence speed.
pub fn classical_value(
    rec: &RecurrenceSpec,
    at: i64,
    max_depth: usize,
    tol: f64,
) -> Result<CFValue> {
    adaptive(rec, at, max_depth.max(START_DEPTH), tol, |_| 0.0)
}

fn adaptive(
    rec: &RecurrenceSpec,
    at: i64,
    max_depth: usize,
    tol: f64,
    seed: impl Fn(usize) -> f64,
) -> Result<CFValue> {
    let mut depth = START_DEPTH;
    let mut prev: Option<f64> = None;
    let mut hits = 0;
    let mut last_diff = f64::INFINITY;
    loop {
        let w_tail = seed(depth);
        let value = -modified_approximant(rec, at, depth, -w_tail)?;
        if let Some(p) = prev {
            last_diff = (value - p).abs();
            let scale = value.abs().max(f64::MIN_POSITIVE);
            if last_diff <= tol * scale {
                hits += 1;
                if hits >= 2 {
                    return Ok(CFValue {
                        value,
                        depth_used: depth,
                        tail_seed: w_tail,
                        error_estimate: last_diff.max(f64::EPSILON * value.abs()),
                    });
                }
            } else {
                hits = 0;
            }
        }
        prev = Some(value);
        if depth >= max_depth {
            break;
        }
        depth = (depth * 2).min(max_depth);
    }
    Err(Error::no_convergence(
        format!("continued fraction at index {at}, last difference {last_diff:e}"),
        depth,
    ))
}

/// Equivalence transformation `a'_k = c_{k'} c_k a_k`, `b'_k = c_k b_k`, where
/// `k'` is the previous index in the recurrence direction.
///
/// Approximants transform as `z'_start = c_{start'} z_start`, so
/// `minimal_solution_ratio` values scale by the same factor.
pub fn equivalence_transform(
    rec: &RecurrenceSpec,
    c: impl Fn(i64) -> f64 + Send + Sync + 'static,
) -> RecurrenceSpec {
    let c: Coefficient = Arc::new(c);
    let step = rec.direction.step();
    let (a, b) = (rec.a.clone(), rec.b.clone());
    let (ca, cb) = (c.clone(), c);
    RecurrenceSpec {
        a: Arc::new(move |k| {
            let (ck, cp) = (ca(k), ca(k - step));
            if ck == 0.0 || cp == 0.0 {
                f64::NAN
            } else {
                cp * ck * a(k)
            }
        }),
        b: Arc::new(move |k| {
            let ck = cb(k);
            if ck == 0.0 {
                f64::NAN
            } else {
                ck * b(k)
            }
        }),
        direction: rec.direction,
        limit: None,
    }
}
