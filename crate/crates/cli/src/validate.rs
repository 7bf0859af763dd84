//! Named validation suites. Each check compares two independent routes to
//! the same quantity on a fixed grid, so results are deterministic.

use tq_core::birthdeath::{self, BirthDeathRates, TailRegime};
use tq_core::qseries::{self, Extent, QBase, SeriesControl};
use tq_core::sim::{self, HitKind, Simulator};
use tq_core::timescale::{moment_formula, SpeedMeasure, TestFunction, TimeScale};
use tq_core::tq::{self, Form, TauZeroDensity, TqParams, TqState};
use tq_core::{quad, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Identities,
    Hitting,
    Excursion,
    Montecarlo,
    All,
}

impl Suite {
    fn members(self) -> &'static [Suite] {
        match self {
            Suite::All => &[Suite::Identities, Suite::Hitting, Suite::Excursion, Suite::Montecarlo],
            Suite::Identities => &[Suite::Identities],
            Suite::Hitting => &[Suite::Hitting],
            Suite::Excursion => &[Suite::Excursion],
            Suite::Montecarlo => &[Suite::Montecarlo],
        }
    }

    fn name(self) -> &'static str {
        match self {
            Suite::Identities => "identities",
            Suite::Hitting => "hitting",
            Suite::Excursion => "excursion",
            Suite::Montecarlo => "montecarlo",
            Suite::All => "all",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub suite: &'static str,
    pub name: &'static str,
    pub error: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.error < self.tolerance
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Monte Carlo settings for the `montecarlo` suite.
#[derive(Debug, Clone, Copy)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
}

pub fn run(suite: Suite, mc: McConfig) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for &s in suite.members() {
        let checks: Vec<(&'static str, f64, f64)> = match s {
            Suite::Identities => identities()?,
            Suite::Hitting => hitting()?,
            Suite::Excursion => excursion()?,
            Suite::Montecarlo => montecarlo(mc)?,
            Suite::All => unreachable!("expanded above"),
        };
        out.extend(checks.into_iter().map(|(name, error, tolerance)| Check {
            suite: s.name(),
            name,
            error,
            tolerance,
        }));
    }
    Ok(out)
}

fn identities() -> Result<Vec<(&'static str, f64, f64)>> {
    let ctrl = SeriesControl::default();
    let grid_q = [0.1, 0.3, 0.5, 0.7, 0.9];
    let grid_x = [-0.8, -0.3, 0.2, 0.6];

    let mut binom = 0.0f64;
    let mut recip = 0.0f64;
    let mut additivity = 0.0f64;
    for &q in &grid_q {
        let qb = QBase::new(q)?;
        for &a in &grid_x {
            for &z in &grid_x {
                let prod = |x: f64| qseries::qpoch(x, qb, Extent::Infinite);
                let rhs = (prod(a * z)? / prod(z)?).to_f64();
                // Σ|t_k| equals the same ratio at (-|a|, |z|); skip points
                // whose cancellation f64 summation cannot resolve.
                let abs_sum = (prod(-(a * z).abs())? / prod(z.abs())?).to_f64();
                if abs_sum > 1e5 * rhs.abs() {
                    continue;
                }
                let lhs = qseries::rphis(&[a], &[], qb, z, &ctrl)?;
                binom = binom.max(rel(lhs, rhs));
            }
        }
        for &z in &grid_x {
            let p = qseries::eq_exp(z, qb)? * qseries::Eq_exp(-z, qb)?;
            recip = recip.max((p - 1.0).abs());
            // The series alternates for z < 0 and is compared only for z > 0.
            if z > 0.0 {
                let s = qseries::eq_exp_series(z, qb)?;
                recip = recip.max(rel(s, qseries::eq_exp(z, qb)?));
            }
            for m in -3i64..=3 {
                for n in -3i64..=3 {
                    let whole = qseries::qpoch(z, qb, m + n)?;
                    let split = qseries::qpoch(z, qb, m)? * qseries::qpoch(z * q.powi(m as i32), qb, n)?;
                    additivity = additivity.max(rel(split.to_f64(), whole.to_f64()));
                }
            }
        }
    }

    let mut limits = 0.0f64;
    let big = 1e8;
    for &q in &[0.2, 0.4, 0.6] {
        let qb = QBase::new(q)?;
        for &(a, b, z) in &[(0.3, 0.1, 0.2), (-0.5, 0.4, -0.6), (0.7, -0.2, 0.5)] {
            let l = qseries::rphis(&[big, a], &[b], qb, z / big, &ctrl)?;
            let r = qseries::rphis(&[a], &[b], qb, z, &ctrl)?;
            limits = limits.max(rel(l, r));
            let zz = z * q / 2.0;
            let l = qseries::rphis(&[a], &[big], qb, big * zz, &ctrl)?;
            let r = qseries::rphis(&[a], &[], qb, zz, &ctrl)?;
            limits = limits.max(rel(l, r));
        }
    }

    let mut triple = 0.0f64;
    for &q in &[0.2, 0.5, 0.7] {
        let qb = QBase::new(q)?;
        // For z > 0 the product has zeros at powers of q and the bilateral
        // sum cancels near them; z < 0 keeps both sides well conditioned.
        for &(c, z) in &[(0.1, -0.45), (-0.3, -0.85), (0.0, -1.7), (0.4, -2.5)] {
            let p = qseries::psi01(c, qb, z, &ctrl)?;
            let s = qseries::psi01_bilateral_sum(c, qb, z, &ctrl)?;
            triple = triple.max(rel(p, s));
        }
    }

    let mut measure = 0.0f64;
    for (ts, windows) in [
        (TimeScale::integers(), vec![(-3.0, 4.0), (5.0, 40.0)]),
        (TimeScale::tq(2.0)?, vec![(0.125, 64.0), (-8.0, -0.25)]),
    ] {
        for (u, v) in windows {
            let sm = SpeedMeasure::on_window(&ts, u, v, 10_000)?;
            measure = measure
                .max((sm.mass() - ts.mu_mass(u, v)?).abs() / sm.mass().max(1.0))
                .max((sm.first_moment() - ts.mu_first_moment(u, v)?).abs() / sm.first_moment().abs().max(1.0));
        }
    }

    let ts = TimeScale::tq(2.0)?;
    let sq = |x: f64| x * x;
    let mut generator = 0.0f64;
    for n in -4..=4 {
        let g = ts.generator_apply(&TestFunction { f: &sq, d1: None, d2: None }, 2f64.powi(n))?;
        generator = generator.max((g - 1.0).abs());
    }

    let gaussian = [1.0, 0.0, 1.0, 0.0, 3.0, 0.0, 15.0];
    let mut brownian = 0.0f64;
    for (k, &g) in gaussian.iter().enumerate() {
        let m = moment_formula(0.0, k as u32, 1.0, 1.0 + 1e-4)?;
        brownian = brownian.max(if g == 0.0 { m.abs() } else { rel(m, g) });
    }

    Ok(vec![
        ("q_binomial", binom, 1e-9),
        ("qpoch_index_additivity", additivity, 1e-11),
        ("q_exponential_reciprocity", recip, 1e-12),
        ("limit_relations", limits, 1e-6),
        ("triple_product", triple, 1e-10),
        ("speed_measure_atom_sums", measure, 1e-12),
        ("generator_on_squares", generator, 1e-12),
        ("brownian_moment_limit", brownian, 1e-3),
    ])
}

fn hitting() -> Result<Vec<(&'static str, f64, f64)>> {
    let mut forms = 0.0f64;
    let mut cf = 0.0f64;
    let mut scaling = 0.0f64;
    let mut paths = 0.0f64;
    for &q in &[1.5, 2.0, 4.0] {
        let p = TqParams::new(q)?;
        let rates = BirthDeathRates::tq(q)?;
        let regime = TailRegime::tq(q);
        for &lam in &[0.1, 1.0, 10.0] {
            let a = tq::h0_down(lam, &p, Form::Phi01)?.value;
            let b = tq::h0_down(lam, &p, Form::Phi11)?.value;
            forms = forms.max((a - b).abs()).max((tq::h0_down_alt(lam, &p)?.value - b).abs());
            cf = cf
                .max((tq::h0_down_cf(lam, &p, 1e-15)?.value - b).abs())
                .max((tq::h0_up_cf(lam, &p, 1e-15)?.value - tq::h0_up(lam, &p)?.value).abs());
            for &(n, m) in &[(0, -2), (1, 3), (-2, 0)] {
                let x = tq::h_nm(n + 1, m + 1, lam, &p)?.value;
                let y = tq::h_nm(n, m, q * q * lam, &p)?.value;
                scaling = scaling.max(rel(x, y));
                let z = birthdeath::h_path(&rates, &regime, n, m, lam, 1e-14)?.value;
                paths = paths.max(rel(z, tq::h_nm(n, m, lam, &p)?.value));
            }
        }
    }
    let p = TqParams::new(2.0)?;
    let small = (1.0 - tq::h0_down(1e-8, &p, Form::Phi11)?.value)
        .abs()
        .max((tq::h0_up(1e-8, &p)?.value - 0.5).abs());
    Ok(vec![
        ("down_closed_forms_agree", forms, 1e-9),
        ("continued_fractions_vs_closed_forms", cf, 1e-9),
        ("level_scaling", scaling, 1e-11),
        ("birth_death_paths_vs_closed_forms", paths, 1e-10),
        ("small_lambda_limits", small, 1e-4),
    ])
}

fn excursion() -> Result<Vec<(&'static str, f64, f64)>> {
    let p = TqParams::new(2.0)?;
    let mut psi_scaling = 0.0f64;
    let mut entrance = 0.0f64;
    for &lam in &[0.25, 1.0, 4.0] {
        let psi = tq::psi_exponent(lam, &p)?;
        psi_scaling = psi_scaling
            .max(rel(tq::psi_exponent(lam / 4.0, &p)?, psi / 2.0))
            .max(rel(tq::psi_exponent(1.0 / lam, &p)?, psi / lam));
        entrance = entrance.max((tq::psi_exponent_sum(lam, &p, 40)? - psi).abs());
    }

    let dens = TauZeroDensity::new(p, SeriesControl::default())?;
    let mut eps = 1.0;
    while dens.lower_tail_bound(0, eps) > 1e-14 {
        eps /= 2.0;
    }
    let t_max: f64 = 1e20;
    let integral = |lam: f64| {
        quad::integrate(
            |u| {
                let t = u.exp();
                Ok(dens.eval_detailed(0, t)?.0 * t * (-lam * t).exp())
            },
            eps.ln(),
            t_max.ln(),
            1e-11,
            1e-11,
            20_000,
        )
    };
    let mass = (integral(0.0)?.value - 1.0).abs();
    let lt = (integral(1.0)?.value - tq::h_to_zero(0, 1.0, &p)?.value).abs();

    let lam = 1.0;
    let window: Vec<TqState> = (-2..=2)
        .flat_map(|n| [TqState::Positive(n), TqState::Negative(n)])
        .collect();
    let mut balance = 0.0f64;
    for &x in &window {
        for &y in &window {
            let a = x.mu(&p) * tq::resolvent_full(x, y, lam, &p)?;
            let b = y.mu(&p) * tq::resolvent_full(y, x, lam, &p)?;
            balance = balance.max(rel(a, b));
        }
    }
    let mut total = 0.0;
    for n in -80..=80 {
        for y in [TqState::Positive(n), TqState::Negative(n)] {
            total += tq::resolvent_full(TqState::Positive(0), y, lam, &p)?;
        }
    }
    Ok(vec![
        ("psi_scaling", psi_scaling, 1e-12),
        ("entrance_laws_vs_psi", entrance, 1e-8),
        ("density_mass", mass, 1e-6),
        ("density_laplace_transform", lt, 1e-6),
        ("resolvent_detailed_balance", balance, 1e-9),
        ("resolvent_total_mass", (lam * total - 1.0).abs(), 1e-5),
    ])
}

/// Errors are z-scores (tolerance 4) or KS distances against the 1%
/// critical value of the two-sample test.
fn montecarlo(mc: McConfig) -> Result<Vec<(&'static str, f64, f64)>> {
    let p = TqParams::new(2.0)?;
    let s = Simulator::new(p)?;
    let n = mc.samples;
    let lam = 1.0;
    let down = s
        .estimate_laplace(HitKind::Down, 0, -1, lam, 0, n, mc.seed)?
        .z_score(tq::h0_down(lam, &p, Form::Phi11)?.value);
    let up = s
        .estimate_laplace(HitKind::Up, 0, 1, lam, 0, n, mc.seed.wrapping_add(1))?
        .z_score(tq::h0_up(lam, &p)?.value);
    let zero = s
        .estimate_laplace(HitKind::ToZero, 0, 0, lam, -30, n, mc.seed.wrapping_add(2))?
        .z_score(tq::h_to_zero(0, lam, &p)?.value);
    let a = s.hitting_zero_samples(0, -6, n, mc.seed.wrapping_add(3))?;
    let b = s.hitting_zero_samples(0, -10, n, mc.seed.wrapping_add(4))?;
    let ks = sim::ks_two_sample(&a, &b);
    let ks_crit = 1.63 * (2.0 / n as f64).sqrt();
    Ok(vec![
        ("mc_down_transform_z", down, 4.0),
        ("mc_up_transform_z", up, 4.0),
        ("mc_hitting_zero_transform_z", zero, 4.0),
        ("floor_splice_ks", ks, ks_crit),
    ])
}
