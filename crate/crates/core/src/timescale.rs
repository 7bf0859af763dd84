//! Closed subsets of ℝ described by a finite union of symbolic blocks.
//!
//! Membership, `ρ` and `σ` are decided from the block descriptions, never by
//! enumerating points, so classification does not depend on float noise.
//! Geometric and lattice blocks identify indices with relative tolerance
//! `1e-12`.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::error::{Error, Result};

const INDEX_TOL: f64 = 1e-12;

/// One building block of a time scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Block {
    /// Closed interval `[lo, hi]`; either end may be infinite.
    Interval { lo: f64, hi: f64 },
    /// `{sign · q^k : k ∈ ℤ} ∪ {0}` with `q > 1`, `sign = ±1`.
    Geometric { q: f64, sign: f64 },
    /// `{offset + k · step : k ∈ ℤ}` with `step > 0`.
    Lattice { step: f64, offset: f64 },
    Point(f64),
}

fn near_integer(r: f64) -> Option<i64> {
    let k = r.round();
    ((r - k).abs() <= INDEX_TOL * r.abs().max(1.0)).then_some(k as i64)
}

impl Block {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Block::Interval { lo, hi } => lo <= hi && !lo.is_nan() && !hi.is_nan() && lo < f64::INFINITY && hi > f64::NEG_INFINITY,
            Block::Geometric { q, sign } => q > 1.0 && q.is_finite() && (sign == 1.0 || sign == -1.0),
            Block::Lattice { step, offset } => step > 0.0 && step.is_finite() && offset.is_finite(),
            Block::Point(v) => v.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("invalid time-scale block {self:?}")))
        }
    }

    fn contains(&self, x: f64) -> bool {
        match *self {
            Block::Interval { lo, hi } => lo <= x && x <= hi,
            Block::Point(v) => x == v,
            Block::Lattice { step, offset } => near_integer((x - offset) / step).is_some(),
            Block::Geometric { q, sign } => {
                x == 0.0 || (x * sign > 0.0 && near_integer(x.abs().ln() / q.ln()).is_some())
            }
        }
    }

    /// `sup {y ∈ block : y < x}`, or `None` when that set is empty.
    fn sup_below(&self, x: f64) -> Option<f64> {
        match *self {
            Block::Interval { lo, hi } => (x > lo).then(|| x.min(hi)),
            Block::Point(v) => (v < x).then_some(v),
            Block::Lattice { step, offset } => {
                let r = (x - offset) / step;
                let k = near_integer(r).map_or(r.floor(), |k| (k - 1) as f64);
                Some(offset + k * step)
            }
            Block::Geometric { q, sign } => {
                if sign > 0.0 {
                    if x <= 0.0 {
                        return None;
                    }
                    let r = x.ln() / q.ln();
                    let k = near_integer(r).map_or(r.floor() as i64, |k| k - 1);
                    Some(q.powi(k as i32))
                } else if x >= 0.0 {
                    Some(0.0)
                } else {
                    let r = (-x).ln() / q.ln();
                    let k = near_integer(r).map_or(r.ceil() as i64, |k| k + 1);
                    Some(-q.powi(k as i32))
                }
            }
        }
    }

    fn reflected(&self) -> Block {
        match *self {
            Block::Interval { lo, hi } => Block::Interval { lo: -hi, hi: -lo },
            Block::Point(v) => Block::Point(-v),
            Block::Lattice { step, offset } => Block::Lattice { step, offset: -offset },
            Block::Geometric { q, sign } => Block::Geometric { q, sign: -sign },
        }
    }

    fn inf_above(&self, x: f64) -> Option<f64> {
        self.reflected().sup_below(-x).map(|y| -y)
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Block::Interval { lo, hi } => write!(f, "interval {lo} {hi}"),
            Block::Geometric { q, sign } => write!(f, "geometric {q} {sign}"),
            Block::Lattice { step, offset } => write!(f, "lattice {step} {offset}"),
            Block::Point(v) => write!(f, "point {v}"),
        }
    }
}

/// Left/right scattered (`s`) or dense (`d`) classification of a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointClass {
    Ss,
    Sd,
    Ds,
    Dd,
}

impl PointClass {
    pub fn as_str(self) -> &'static str {
        match self {
            PointClass::Ss => "ss",
            PointClass::Sd => "sd",
            PointClass::Ds => "ds",
            PointClass::Dd => "dd",
        }
    }
}

/// A closed subset of ℝ given as a finite union of blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeScale {
    blocks: Vec<Block>,
}

impl TimeScale {
    pub fn new(blocks: Vec<Block>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::domain("a time scale needs at least one block"));
        }
        for b in &blocks {
            b.validate()?;
        }
        Ok(TimeScale { blocks })
    }

    pub fn real_line() -> Self {
        TimeScale {
            blocks: vec![Block::Interval {
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
            }],
        }
    }

    pub fn integers() -> Self {
        TimeScale {
            blocks: vec![Block::Lattice {
                step: 1.0,
                offset: 0.0,
            }],
        }
    }

    /// `T_q = {±q^k : k ∈ ℤ} ∪ {0}`.
    pub fn tq(q: f64) -> Result<Self> {
        TimeScale::new(vec![
            Block::Geometric { q, sign: 1.0 },
            Block::Geometric { q, sign: -1.0 },
        ])
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Parses the line format `interval lo hi`, `geometric q sign`,
    /// `lattice step offset`, `point v`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut blocks = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse { line: i + 1, msg };
            let mut words = line.split_whitespace();
            let kind = words.next().expect("non-empty line");
            let nums: Vec<f64> = words
                .map(|w| f64::from_str(w).map_err(|e| err(format!("bad number {w:?}: {e}"))))
                .collect::<Result<_>>()?;
            let want = if kind == "point" { 1 } else { 2 };
            if nums.len() != want {
                return Err(err(format!("{kind} takes {want} numbers, got {}", nums.len())));
            }
            let block = match kind {
                "interval" => Block::Interval { lo: nums[0], hi: nums[1] },
                "geometric" => Block::Geometric { q: nums[0], sign: nums[1] },
                "lattice" => Block::Lattice { step: nums[0], offset: nums[1] },
                "point" => Block::Point(nums[0]),
                other => return Err(err(format!("unknown block kind {other:?}"))),
            };
            block.validate().map_err(|e| err(e.to_string()))?;
            blocks.push(block);
        }
        TimeScale::new(blocks).map_err(|e| Error::Parse { line: 0, msg: e.to_string() })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for b in &self.blocks {
            writeln!(s, "{b}").expect("writing to a String");
        }
        s
    }

    pub fn contains(&self, x: f64) -> bool {
        x.is_finite() && self.blocks.iter().any(|b| b.contains(x))
    }

    pub fn unbounded_above(&self) -> bool {
        self.inf_above(f64::MAX).is_some()
    }

    pub fn unbounded_below(&self) -> bool {
        self.sup_below(f64::MIN).is_some()
    }

    fn check(&self, x: f64) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::Membership(x))
        }
    }

    /// `sup {y ∈ T : y < x}` for any real `x`.
    pub fn sup_below(&self, x: f64) -> Option<f64> {
        self.blocks
            .iter()
            .filter_map(|b| b.sup_below(x))
            .fold(None, |acc: Option<f64>, y| Some(acc.map_or(y, |a| a.max(y))))
    }

    /// `inf {y ∈ T : y > x}` for any real `x`.
    pub fn inf_above(&self, x: f64) -> Option<f64> {
        self.blocks
            .iter()
            .filter_map(|b| b.inf_above(x))
            .fold(None, |acc: Option<f64>, y| Some(acc.map_or(y, |a| a.min(y))))
    }

    /// `(ρ(x), σ(x))`; an empty side yields `x` itself. Signed zeros are
    /// normalised to `+0`.
    pub fn rho_sigma(&self, x: f64) -> Result<(f64, f64)> {
        self.check(x)?;
        Ok((
            self.sup_below(x).unwrap_or(x) + 0.0,
            self.inf_above(x).unwrap_or(x) + 0.0,
        ))
    }

    pub fn classify(&self, x: f64) -> Result<PointClass> {
        let (r, s) = self.rho_sigma(x)?;
        Ok(match (r < x, s > x) {
            (true, true) => PointClass::Ss,
            (true, false) => PointClass::Sd,
            (false, true) => PointClass::Ds,
            (false, false) => PointClass::Dd,
        })
    }

    fn ordered(&self, u: f64, v: f64) -> Result<()> {
        self.check(u)?;
        self.check(v)?;
        if u < v {
            Ok(())
        } else {
            Err(Error::Order(u, v))
        }
    }

    /// `μ((u, v)) = v - u - (σ(u) - u)/2 - (v - ρ(v))/2`.
    pub fn mu_mass(&self, u: f64, v: f64) -> Result<f64> {
        self.ordered(u, v)?;
        let (_, su) = self.rho_sigma(u)?;
        let (rv, _) = self.rho_sigma(v)?;
        Ok(v - u - 0.5 * (su - u) - 0.5 * (v - rv))
    }

    /// `∫_{(u,v)} a μ(da) = (v² - u²)/2 - u(σ(u) - u)/2 - v(v - ρ(v))/2`.
    pub fn mu_first_moment(&self, u: f64, v: f64) -> Result<f64> {
        self.ordered(u, v)?;
        let (_, su) = self.rho_sigma(u)?;
        let (rv, _) = self.rho_sigma(v)?;
        Ok(0.5 * (v * v - u * u) - 0.5 * u * (su - u) - 0.5 * v * (v - rv))
    }

    /// The generator `G` at `x`, using caller-supplied derivatives on dense
    /// sides.
    pub fn generator_apply(&self, f: &TestFunction<'_>, x: f64) -> Result<f64> {
        let (r, s) = self.rho_sigma(x)?;
        let fx = (f.f)(x);
        match self.classify(x)? {
            PointClass::Ss => Ok((f.f)(r) / ((x - r) * (s - r)) - fx / ((x - r) * (s - x))
                + (f.f)(s) / ((s - x) * (s - r))),
            PointClass::Sd => {
                let d1 = f.first(x)?;
                Ok(((f.f)(r) - fx) / ((x - r) * (x - r)) + d1 / (x - r))
            }
            PointClass::Ds => {
                let d1 = f.first(x)?;
                Ok(-d1 / (s - x) + ((f.f)(s) - fx) / ((s - x) * (s - x)))
            }
            PointClass::Dd => Ok(0.5 * f.second(x)?),
        }
    }

    /// Exit distribution and mean exit time from `(ρ(x - r), σ(x + r))`
    /// started at `x`: `(p_down, p_up, mean_time)`.
    pub fn exit_law(&self, x: f64, r: f64) -> Result<(f64, f64, f64)> {
        self.check(x)?;
        if !(r > 0.0) {
            return Err(Error::domain(format!("radius must be positive, got {r}")));
        }
        let y = self
            .sup_below(x - r)
            .ok_or_else(|| Error::Unbounded(format!("no point of the time scale below {}", x - r)))?;
        let z = self
            .inf_above(x + r)
            .ok_or_else(|| Error::Unbounded(format!("no point of the time scale above {}", x + r)))?;
        Ok(((z - x) / (z - y), (x - y) / (z - y), (x - y) * (z - x)))
    }
}

/// A function on ℝ with optional first and second derivatives.
pub struct TestFunction<'a> {
    pub f: &'a dyn Fn(f64) -> f64,
    pub d1: Option<&'a dyn Fn(f64) -> f64>,
    pub d2: Option<&'a dyn Fn(f64) -> f64>,
}

impl TestFunction<'_> {
    fn first(&self, x: f64) -> Result<f64> {
        self.d1
            .map(|d| d(x))
            .ok_or_else(|| Error::MissingDerivative(format!("f' needed at dense side of {x}")))
    }

    fn second(&self, x: f64) -> Result<f64> {
        self.d2
            .map(|d| d(x))
            .ok_or_else(|| Error::MissingDerivative(format!("f'' needed at two-sided dense point {x}")))
    }
}

/// Speed measure restricted to an open window `(u, v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedMeasure {
    /// `(x, (σ(x) - ρ(x))/2)` for every non-`dd` point strictly inside.
    pub atoms: Vec<(f64, f64)>,
    /// Maximal dense segments inside the window.
    pub lebesgue_on: Vec<(f64, f64)>,
}

impl SpeedMeasure {
    /// Walks the window from `u` to `v`. Fails with `Unbounded` if more than
    /// `max_atoms` atoms are met or a dense side is not part of an interval
    /// block (an accumulation point of scattered points).
    pub fn on_window(ts: &TimeScale, u: f64, v: f64, max_atoms: usize) -> Result<Self> {
        ts.ordered(u, v)?;
        let mut atoms = Vec::new();
        let mut lebesgue_on = Vec::new();
        let visit = |y: f64, atoms: &mut Vec<(f64, f64)>| -> Result<()> {
            let (r, s) = ts.rho_sigma(y)?;
            if s > r {
                atoms.push((y, 0.5 * (s - r)));
            }
            Ok(())
        };
        let mut x = u;
        while x < v {
            if atoms.len() > max_atoms {
                return Err(Error::Unbounded(format!(
                    "more than {max_atoms} atoms in ({u}, {v})"
                )));
            }
            let (_, s) = ts.rho_sigma(x)?;
            if s > x {
                if s >= v {
                    break;
                }
                x = s;
                visit(x, &mut atoms)?;
                continue;
            }
            let hi = ts
                .blocks
                .iter()
                .filter_map(|b| match *b {
                    Block::Interval { lo, hi } if lo <= x && x < hi => Some(hi),
                    _ => None,
                })
                .fold(f64::NEG_INFINITY, f64::max);
            if hi == f64::NEG_INFINITY {
                return Err(Error::Unbounded(format!(
                    "accumulation of scattered points at {x}"
                )));
            }
            let end = hi.min(v);
            lebesgue_on.push((x, end));
            x = end;
            if x < v {
                visit(x, &mut atoms)?;
            }
        }
        Ok(SpeedMeasure { atoms, lebesgue_on })
    }

    pub fn mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum::<f64>()
            + self.lebesgue_on.iter().map(|(a, b)| b - a).sum::<f64>()
    }

    pub fn first_moment(&self) -> f64 {
        self.atoms.iter().map(|(x, m)| x * m).sum::<f64>()
            + self
                .lebesgue_on
                .iter()
                .map(|(a, b)| 0.5 * (b * b - a * a))
                .sum::<f64>()
    }
}

/// `(q; q)_k / (q; q)_m = ∏_{i=m+1}^{k} (1 - q^i)` for `q > 1`, as a finite
/// product.
fn qpoch_ratio_above_one(q: f64, m: u32, k: u32) -> f64 {
    let lq = q.ln();
    (m + 1..=k).map(|i| -(i as f64 * lq).exp_m1()).product()
}

/// `E^x[ξ_t^k]` for the process `ξ` on `T_q`:
/// `Σ_{m ≡ k (2)} c_q^{-(k-m)/2} (q;q)_k/(q;q)_m q^{(m²-k²)/4} t^{(k-m)/2} / ((k-m)/2)! x^m`.
pub fn moment_formula(x: f64, k: u32, t: f64, q: f64) -> Result<f64> {
    if !(q > 1.0 && q.is_finite()) {
        return Err(Error::domain(format!("q must exceed 1, got {q}")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("t must be nonnegative, got {t}")));
    }
    let ts = TimeScale::tq(q)?;
    ts.check(x)?;
    let c_q = (q - 1.0).powi(2) * (1.0 + q) / q;
    let mut sum = 0.0;
    for m in (k % 2..=k).step_by(2) {
        let j = (k - m) / 2;
        let fact: f64 = (1..=j).map(f64::from).product();
        let coeff = qpoch_ratio_above_one(q, m, k) * c_q.powi(-(j as i32))
            * q.powf((f64::from(m * m) - f64::from(k * k)) / 4.0)
            / fact;
        sum += coeff * t.powi(j as i32) * x.powi(m as i32);
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_sigma_examples() {
        let r = TimeScale::real_line();
        assert_eq!(r.rho_sigma(1.3).unwrap(), (1.3, 1.3));
        let z = TimeScale::integers();
        assert_eq!(z.rho_sigma(3.0).unwrap(), (2.0, 4.0));
        let t = TimeScale::tq(2.0).unwrap();
        assert_eq!(t.rho_sigma(1.0).unwrap(), (0.5, 2.0));
        assert_eq!(t.rho_sigma(0.0).unwrap(), (0.0, 0.0));
        assert_eq!(t.rho_sigma(-4.0).unwrap(), (-8.0, -2.0));
        assert!(matches!(t.rho_sigma(3.0), Err(Error::Membership(_))));
    }

    #[test]
    fn classification() {
        let ts = TimeScale::new(vec![
            Block::Interval { lo: 0.0, hi: 1.0 },
            Block::Point(2.0),
            Block::Interval { lo: 3.0, hi: 4.0 },
        ])
        .unwrap();
        assert_eq!(ts.classify(0.5).unwrap(), PointClass::Dd);
        assert_eq!(ts.classify(1.0).unwrap(), PointClass::Ds);
        assert_eq!(ts.classify(2.0).unwrap(), PointClass::Ss);
        assert_eq!(ts.classify(3.0).unwrap(), PointClass::Sd);
        // Nothing below 0: ρ(0) = 0.
        assert_eq!(ts.classify(0.0).unwrap(), PointClass::Dd);
        assert_eq!(TimeScale::tq(2.0).unwrap().classify(0.0).unwrap(), PointClass::Dd);
    }

    #[test]
    fn mixed_window_measure() {
        let ts = TimeScale::new(vec![
            Block::Interval { lo: 0.0, hi: 1.0 },
            Block::Point(2.0),
            Block::Interval { lo: 3.0, hi: 4.0 },
        ])
        .unwrap();
        let sm = SpeedMeasure::on_window(&ts, 0.5, 3.5, 100).unwrap();
        assert!((sm.mass() - ts.mu_mass(0.5, 3.5).unwrap()).abs() < 1e-14);
        assert!((sm.first_moment() - ts.mu_first_moment(0.5, 3.5).unwrap()).abs() < 1e-13);
    }

    #[test]
    fn measure_examples() {
        assert_eq!(TimeScale::real_line().mu_mass(0.0, 1.0).unwrap(), 1.0);
        assert_eq!(TimeScale::integers().mu_mass(0.0, 3.0).unwrap(), 2.0);
        let t = TimeScale::tq(2.0).unwrap();
        assert_eq!(t.mu_mass(1.0, 4.0).unwrap(), 1.5);
        assert_eq!(TimeScale::integers().mu_first_moment(0.0, 3.0).unwrap(), 3.0);
        assert_eq!(t.mu_first_moment(1.0, 4.0).unwrap(), 3.0);
        assert!(matches!(t.mu_mass(4.0, 1.0), Err(Error::Order(..))));
    }

    #[test]
    fn generator_examples() {
        let sq = |x: f64| x * x;
        let two = |_: f64| 2.0;
        let id = |x: f64| x;
        let f = TestFunction { f: &sq, d1: None, d2: Some(&two) };
        assert_eq!(TimeScale::real_line().generator_apply(&f, 0.7).unwrap(), 1.0);
        let t = TimeScale::tq(2.0).unwrap();
        let g = TestFunction { f: &id, d1: None, d2: None };
        assert!(t.generator_apply(&g, 1.0).unwrap().abs() < 1e-12);
        assert!((t.generator_apply(&f, 8.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            TimeScale::real_line().generator_apply(&g, 0.0),
            Err(Error::MissingDerivative(_))
        ));
    }

    #[test]
    fn exit_examples() {
        assert_eq!(TimeScale::integers().exit_law(0.0, 0.5).unwrap(), (0.5, 0.5, 1.0));
        assert_eq!(TimeScale::real_line().exit_law(0.0, 1.0).unwrap(), (0.5, 0.5, 1.0));
        let (d, u, m) = TimeScale::tq(2.0).unwrap().exit_law(1.0, 0.4).unwrap();
        assert!((d - 2.0 / 3.0).abs() < 1e-15 && (u - 1.0 / 3.0).abs() < 1e-15 && (m - 0.5).abs() < 1e-15);
        let half = TimeScale::new(vec![Block::Interval { lo: 0.0, hi: f64::INFINITY }]).unwrap();
        assert!(matches!(half.exit_law(0.0, 1.0), Err(Error::Unbounded(_))));
    }

    #[test]
    fn text_round_trip() {
        let ts = TimeScale::new(vec![
            Block::Interval { lo: f64::NEG_INFINITY, hi: -1.0 },
            Block::Geometric { q: 1.5, sign: 1.0 },
            Block::Lattice { step: 0.5, offset: 0.25 },
            Block::Point(-0.5),
        ])
        .unwrap();
        assert_eq!(TimeScale::parse(&ts.to_text()).unwrap(), ts);
        let err = TimeScale::parse("# comment\ninterval 0 1\nblob 2").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        assert!(TimeScale::parse("geometric 0.5 1").is_err());
    }

    #[test]
    fn moment_examples() {
        for &q in &[1.5, 2.0, 3.0] {
            assert!((moment_formula(q, 1, 2.5, q).unwrap() - q).abs() < 1e-12);
            assert!((moment_formula(0.0, 2, 1.7, q).unwrap() - 1.7).abs() < 1e-12);
        }
        let m4 = moment_formula(0.0, 4, 1.0, 1.0 + 1e-4).unwrap();
        assert!((m4 / 3.0 - 1.0).abs() < 1e-3);
        assert!(moment_formula(0.0, 2, 1.0, 1.0).is_err());
        assert!(matches!(moment_formula(3.0, 2, 1.0, 2.0), Err(Error::Membership(_))));
    }
}
