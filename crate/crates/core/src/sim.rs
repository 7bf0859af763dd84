//! Exact-in-distribution simulation of `X` on `T_q`.
//!
//! Paths are run on the embedded jump chain. The origin is reached only after
//! infinitely many jumps, so on reaching a floor level `q^D` the remaining
//! time to 0 is drawn from its exact law,
//! `τ = q^{2D + 2N - 1} Σ_i q^{-2i} T_i` with `N` q-Poisson and `T_i` unit
//! exponentials, and the path ends at 0.
//!
//! Replicas use one [`RngStream`] each and are reduced in index order, so
//! results do not depend on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::qpoisson::QPoisson;
use crate::quad;
use crate::tq::{TqParams, TqState};

/// `λt` beyond which `e^{-λt}` underflows.
const EXP_UNDERFLOW: f64 = 745.0;

/// Reproducible substream `stream_index` of the generator seeded by
/// `master_seed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        RngStream {
            master_seed,
            stream_index,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.master_seed);
        r.set_stream(self.stream_index);
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    TimeHorizon,
    HitTarget,
    HitFloorSpliced,
}

/// A simulated path. `states[0]` is the start; `states[i + 1]` is entered at
/// `jump_times[i]`. After a splice the floor state is held until the final
/// jump to 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathRecord {
    pub jump_times: Vec<f64>,
    pub states: Vec<TqState>,
    pub terminated_by: Termination,
}

impl PathRecord {
    /// State occupied at time `t` (right-continuous).
    pub fn state_at(&self, t: f64) -> TqState {
        let i = self.jump_times.partition_point(|&s| s <= t);
        self.states[i]
    }

    /// Time at which 0 was reached, if it was.
    pub fn zero_time(&self) -> Option<f64> {
        match self.states.last() {
            Some(TqState::Zero) => self.jump_times.last().copied(),
            _ => None,
        }
    }
}

/// Mean and standard error of a Monte Carlo sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

impl McEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        McEstimate {
            mean,
            std_error: (var / n as f64).sqrt(),
            n_samples: n,
        }
    }

    /// `|mean - target|` in units of the standard error (∞ if the error is 0
    /// and the mean misses).
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }
}

/// Which hitting time a Laplace estimate targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HitKind {
    Down,
    Up,
    ToZero,
}

/// Simulator for `X` with a cached q-Poisson table.
#[derive(Debug, Clone)]
pub struct Simulator {
    params: TqParams,
    law: QPoisson,
}

impl Simulator {
    pub fn new(params: TqParams) -> Result<Self> {
        Ok(Simulator {
            law: QPoisson::new(params.q())?,
            params,
        })
    }

    pub fn params(&self) -> &TqParams {
        &self.params
    }

    /// One holding time at `±q^n` and the next exponent.
    pub fn step<R: Rng + ?Sized>(&self, n: i64, rng: &mut R) -> (f64, i64) {
        let e: f64 = Exp1.sample(rng);
        let dt = e / self.params.hold_rate(n);
        let down = rng.random::<f64>() < self.params.down_probability();
        (dt, if down { n - 1 } else { n + 1 })
    }

    /// One draw of the hitting time of 0 from `q^n`; the series is cut once
    /// the expected remainder `q^{-2(I+1)}/(1 - q^{-2})` is below
    /// `tail_tol` times the partial sum.
    pub fn sample_tau_zero<R: Rng + ?Sized>(&self, n: i64, rng: &mut R, tail_tol: f64) -> f64 {
        let big_n = self.law.quantile(rng.random::<f64>()) as i64;
        let p = self.params.base().get();
        let mut sum = 0.0;
        let mut w = 1.0;
        loop {
            let e: f64 = Exp1.sample(rng);
            sum += w * e;
            w *= p;
            if w / (1.0 - p) < tail_tol * sum {
                break;
            }
        }
        self.params.pow((2 * n + 2 * big_n - 1) as f64) * sum
    }

    fn run<R: Rng + ?Sized>(
        &self,
        start: TqState,
        horizon: f64,
        floor: i64,
        target: Option<i64>,
        splice: bool,
        rng: &mut R,
    ) -> Result<PathRecord> {
        let (sign, mut n) = match start {
            TqState::Zero => return Err(Error::domain("paths must start away from 0")),
            TqState::Positive(n) => (1, n),
            TqState::Negative(n) => (-1, n),
        };
        if floor >= n {
            return Err(Error::domain(format!(
                "floor exponent {floor} must lie below the start exponent {n}"
            )));
        }
        if !(horizon > 0.0) {
            return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
        }
        let mk = |k: i64| if sign > 0 { TqState::Positive(k) } else { TqState::Negative(k) };
        let mut rec = PathRecord {
            jump_times: Vec::new(),
            states: vec![start],
            terminated_by: Termination::TimeHorizon,
        };
        let mut t = 0.0;
        loop {
            let (dt, next) = self.step(n, rng);
            if t + dt > horizon {
                return Ok(rec);
            }
            t += dt;
            n = next;
            rec.jump_times.push(t);
            rec.states.push(mk(n));
            if Some(n) == target {
                rec.terminated_by = Termination::HitTarget;
                return Ok(rec);
            }
            if n == floor {
                if splice {
                    t += self.sample_tau_zero(n, rng, 1e-17);
                    if t <= horizon {
                        rec.jump_times.push(t);
                        rec.states.push(TqState::Zero);
                    }
                }
                rec.terminated_by = Termination::HitFloorSpliced;
                return Ok(rec);
            }
        }
    }

    /// Simulates from `start` until `horizon`, splicing the exact residual
    /// hitting time of 0 once exponent `floor_exponent` is reached. If the
    /// spliced time exceeds the horizon the record ends at the floor state.
    pub fn simulate_path<R: Rng + ?Sized>(
        &self,
        start: TqState,
        horizon: f64,
        floor_exponent: i64,
        rng: &mut R,
    ) -> Result<PathRecord> {
        self.run(start, horizon, floor_exponent, None, true, rng)
    }

    /// Hitting time of 0 from `q^n` via a path to `q^floor` plus one splice.
    pub fn sample_hitting_zero<R: Rng + ?Sized>(&self, n: i64, floor: i64, rng: &mut R) -> Result<f64> {
        let rec = self.run(TqState::Positive(n), f64::INFINITY, floor, None, true, rng)?;
        Ok(rec.zero_time().expect("infinite horizon always reaches 0"))
    }

    /// One draw of `e^{-λτ}` for the requested hitting time; killed or
    /// underflowing draws contribute 0.
    fn laplace_draw<R: Rng + ?Sized>(
        &self,
        kind: HitKind,
        n: i64,
        m: i64,
        lambda: f64,
        floor: i64,
        rng: &mut R,
    ) -> Result<f64> {
        let horizon = if lambda > 0.0 {
            EXP_UNDERFLOW / lambda
        } else {
            f64::INFINITY
        };
        let start = TqState::Positive(n);
        let value = match kind {
            HitKind::Down | HitKind::Up => {
                let rec = self.run(start, horizon, floor, Some(m), false, rng)?;
                match rec.terminated_by {
                    Termination::HitTarget => (-lambda * rec.jump_times.last().copied().unwrap_or(0.0)).exp(),
                    _ => 0.0,
                }
            }
            HitKind::ToZero => {
                let rec = self.run(start, horizon, floor, None, true, rng)?;
                rec.zero_time().map_or(0.0, |t| (-lambda * t).exp())
            }
        };
        Ok(value)
    }

    /// Monte Carlo estimate of `E^{q^n}[e^{-λτ}]`.
    ///
    /// `Down` needs `m < n`; `Up` needs `m > n` and kills paths that reach
    /// the floor `q^D` with `q^{D-n} ≤ 1e-16`, below which a return is
    /// negligible; `ToZero` ignores `m` and splices at `floor`.
    #[allow(clippy::too_many_arguments)]
    pub fn estimate_laplace(
        &self,
        kind: HitKind,
        n: i64,
        m: i64,
        lambda: f64,
        floor: i64,
        n_samples: usize,
        master_seed: u64,
    ) -> Result<McEstimate> {
        if n_samples < 100 {
            return Err(Error::domain(format!("need at least 100 samples, got {n_samples}")));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::domain(format!("lambda must be nonnegative, got {lambda}")));
        }
        let floor = match kind {
            HitKind::Down => {
                if m >= n {
                    return Err(Error::domain("downward target must lie below the start"));
                }
                m - 1
            }
            HitKind::Up => {
                if m <= n {
                    return Err(Error::domain("upward target must lie above the start"));
                }
                n - (16.0 * 10f64.ln() / self.params.q().ln()).ceil() as i64
            }
            HitKind::ToZero => floor.min(n - 1),
        };
        let draws: Vec<f64> = (0..n_samples as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = RngStream::new(master_seed, i).rng();
                self.laplace_draw(kind, n, m, lambda, floor, &mut rng)
            })
            .collect::<Result<_>>()?;
        Ok(McEstimate::from_samples(&draws))
    }

    /// Estimate of `E[g(path)]` over independent paths from `start` to
    /// `horizon`.
    pub fn estimate_path_functional(
        &self,
        start: TqState,
        horizon: f64,
        floor: i64,
        n_samples: usize,
        master_seed: u64,
        g: impl Fn(&PathRecord) -> f64 + Sync,
    ) -> Result<McEstimate> {
        let draws: Vec<f64> = (0..n_samples as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = RngStream::new(master_seed, i).rng();
                self.simulate_path(start, horizon, floor, &mut rng).map(|p| g(&p))
            })
            .collect::<Result<_>>()?;
        Ok(McEstimate::from_samples(&draws))
    }

    /// `n_samples` draws of the hitting time of 0 from `q^n`, one stream each.
    pub fn hitting_zero_samples(
        &self,
        n: i64,
        floor: i64,
        n_samples: usize,
        master_seed: u64,
    ) -> Result<Vec<f64>> {
        (0..n_samples as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = RngStream::new(master_seed, i).rng();
                self.sample_hitting_zero(n, floor, &mut rng)
            })
            .collect()
    }

    /// `n_samples` direct draws from the hitting-time-of-0 representation.
    pub fn tau_zero_samples(&self, n: i64, n_samples: usize, master_seed: u64) -> Vec<f64> {
        (0..n_samples as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = RngStream::new(master_seed, i).rng();
                self.sample_tau_zero(n, &mut rng, 1e-17)
            })
            .collect()
    }
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Limit density `(2π)^{-1/2} exp(-(x + e^{-x})/2)`.
pub fn gumbel_target_density(x: f64) -> f64 {
    (-(x + (-x).exp()) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Left end below which the limit density is negligible (`< e^{-190}`).
const GUMBEL_LEFT: f64 = -6.0;

/// Cdf of the limit law at each point of the increasing sequence `xs`,
/// accumulated by quadrature between consecutive points.
pub fn gumbel_target_cdf(xs: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    let mut prev = GUMBEL_LEFT;
    for &x in xs {
        if x < prev {
            if x < GUMBEL_LEFT {
                out.push(0.0);
                continue;
            }
            return Err(Error::domain("cdf points must be increasing"));
        }
        if x > prev {
            acc += quad::integrate(|s| Ok(gumbel_target_density(s)), prev, x, 1e-15, 1e-13, 10_000)?.value;
            prev = x;
        }
        out.push(acc.min(1.0));
    }
    Ok(out)
}

/// KS distance between the law of `2 log(q) N + log(q - 1)`, `N` q-Poisson,
/// estimated from `n_samples` draws, and the limit law; one value per `q`.
pub fn gumbel_limit_check(q_values: &[f64], n_samples: usize, master_seed: u64) -> Result<Vec<(f64, f64)>> {
    q_values
        .iter()
        .enumerate()
        .map(|(idx, &q)| {
            if !(q > 1.0 && q <= 1.2) {
                return Err(Error::domain(format!("q must lie in (1, 1.2], got {q}")));
            }
            let law = QPoisson::new(q)?;
            let mut rng = RngStream::new(master_seed, idx as u64).rng();
            let mut counts = vec![0usize; law.len()];
            for _ in 0..n_samples {
                counts[law.quantile(rng.random::<f64>())] += 1;
            }
            let xs: Vec<f64> = (0..law.len())
                .map(|k| 2.0 * q.ln() * k as f64 + (q - 1.0).ln())
                .collect();
            let cdf = gumbel_target_cdf(&xs)?;
            let mut below = 0usize;
            let mut d = 0.0f64;
            for (k, &c) in counts.iter().enumerate() {
                let left = below as f64 / n_samples as f64;
                below += c;
                let right = below as f64 / n_samples as f64;
                d = d.max((left - cdf[k]).abs()).max((right - cdf[k]).abs());
            }
            Ok((q, d))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let draw = |s: RngStream| -> Vec<u64> {
            let mut r = s.rng();
            (0..4).map(|_| r.random()).collect()
        };
        let (a, b, c) = (draw(RngStream::new(7, 1)), draw(RngStream::new(7, 1)), draw(RngStream::new(7, 2)));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn paths_are_skip_free() {
        let sim = Simulator::new(TqParams::new(2.0).unwrap()).unwrap();
        let mut rng = RngStream::new(3, 0).rng();
        for _ in 0..200 {
            let p = sim.simulate_path(TqState::Negative(1), 5.0, -8, &mut rng).unwrap();
            for w in p.states.windows(2) {
                if let (Some(a), Some(b)) = (w[0].exponent(), w[1].exponent()) {
                    assert_eq!((a - b).abs(), 1);
                    assert_eq!(w[0].sign(), w[1].sign());
                }
            }
            assert!(p.jump_times.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn ks_identical_samples() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        assert_eq!(ks_two_sample(&[0.0, 1.0], &[2.0, 3.0]), 1.0);
    }

    #[test]
    fn invalid_inputs() {
        let sim = Simulator::new(TqParams::new(2.0).unwrap()).unwrap();
        let mut rng = RngStream::new(1, 0).rng();
        assert!(sim.simulate_path(TqState::Zero, 1.0, -5, &mut rng).is_err());
        assert!(sim.simulate_path(TqState::Positive(0), 1.0, 2, &mut rng).is_err());
        assert!(sim.estimate_laplace(HitKind::Down, 0, -1, 1.0, -10, 10, 1).is_err());
        assert!(gumbel_limit_check(&[1.5], 10_000, 1).is_err());
    }
}
