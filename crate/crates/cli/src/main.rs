//! `tq`: evaluate hitting transforms, densities, excursion quantities and
//! simulations of the process on `T_q`, and run the validation suites.
//!
//! Exit codes: 0 success, 2 bad flags or parameters, 3 numerical failure
//! (non-convergence or a pole), 4 a validation check failed.

mod grid;
mod table;
mod validate;

use std::fs;
use std::io::{self, Read, Write};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use tq_core::birthdeath::{self, BirthDeathRates, TailRegime};
use tq_core::contfrac;
use tq_core::laplace::LaplaceValue;
use tq_core::qseries::{self, Extent, QBase, SeriesControl};
use tq_core::sim::{HitKind, RngStream, Simulator};
use tq_core::timescale::TimeScale;
use tq_core::tq::{self, Form, TauZeroDensity, TqParams, TqState};
use tq_core::Error;

use grid::parse_grid;
use table::{col, col_unit, Cell, Output, Table};

const CF_TOL: f64 = 1e-14;

#[derive(Parser)]
#[command(name = "tq", version, about = "Hitting times and excursions of the q-scaled birth-death process")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Output format.
    #[arg(long, value_enum, default_value = "csv", global = true)]
    output: Output,
}

#[derive(Args, Clone)]
struct LambdaArgs {
    /// Single transform argument λ > 0.
    #[arg(long, conflicts_with = "lambda_grid")]
    lambda: Option<f64>,
    /// Comma list or geometric `lo:hi:n` range of λ values.
    #[arg(long)]
    lambda_grid: Option<String>,
}

impl LambdaArgs {
    fn values(&self) -> Result<Vec<f64>, CliError> {
        let v = match (&self.lambda, &self.lambda_grid) {
            (Some(l), _) => vec![*l],
            (None, Some(g)) => parse_grid(g).map_err(CliError::Usage)?,
            (None, None) => vec![1.0],
        };
        if let Some(bad) = v.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(CliError::Usage(format!("lambda must be positive and finite, got {bad}")));
        }
        Ok(v)
    }
}

#[derive(Subcommand)]
enum Command {
    /// q-Pochhammer symbols, basic hypergeometric series and q-exponentials.
    Qseries(QseriesArgs),
    /// One-step hitting transforms from their continued fractions, with depths.
    Cf(CfArgs),
    /// Laplace transforms of hitting times.
    Hit(HitArgs),
    /// Density of the hitting time of 0.
    Density(DensityArgs),
    /// Laplace exponent of the inverse local time at 0.
    Psi(PsiArgs),
    /// Laplace transforms of the entrance laws of the excursion measure.
    Entrance(EntranceArgs),
    /// Resolvent densities with respect to the speed measure.
    Resolvent(ResolventArgs),
    /// Monte Carlo estimates and sample paths.
    Simulate(SimulateArgs),
    /// Run a validation suite.
    Validate(ValidateArgs),
    /// Classify points of a time scale read from a block file.
    Timescale(TimescaleArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SeriesFn {
    /// `(z; base)_n`
    Qpoch,
    /// `rφs(a; b; base; z)`
    Phi,
    /// `e_base(z)`
    SmallE,
    /// `E_base(z)`
    BigE,
    /// `₀ψ₁(-; c; base; z)`
    Psi01,
}

#[derive(Args)]
struct QseriesArgs {
    #[arg(long = "fn", value_enum)]
    function: SeriesFn,
    /// Series base in (0, 1).
    #[arg(long)]
    base: f64,
    /// Comma list of arguments z.
    #[arg(long, allow_hyphen_values = true, default_value = "0")]
    z: String,
    /// Numerator parameters (comma list) for `phi`.
    #[arg(long, allow_hyphen_values = true, default_value = "")]
    a: String,
    /// Denominator parameters (comma list) for `phi`.
    #[arg(long, allow_hyphen_values = true, default_value = "")]
    b: String,
    /// Length for `qpoch`: an integer or `inf`.
    #[arg(long, allow_hyphen_values = true, default_value = "inf")]
    n: String,
    /// Denominator parameter for `psi01`.
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    c: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StepKind {
    Down,
    Up,
}

#[derive(Args)]
struct CfArgs {
    #[arg(long, value_enum)]
    kind: StepKind,
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    /// Level exponent of the starting state `q^n`.
    #[arg(long, allow_hyphen_values = true, default_value_t = 0)]
    n: i64,
    #[command(flatten)]
    lambda: LambdaArgs,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum HitKindArg {
    Down,
    Up,
    Zero,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormArg {
    Phi01,
    Phi11,
    Cf,
    /// The two independent routes available for the kind.
    Both,
}

#[derive(Args)]
struct HitArgs {
    #[arg(long, value_enum)]
    kind: HitKindArg,
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    /// Start exponent: the chain starts at `q^n`.
    #[arg(long, allow_hyphen_values = true, default_value_t = 0)]
    n: i64,
    /// Target exponent; defaults to `n - 1` (down) or `n + 1` (up).
    #[arg(long, allow_hyphen_values = true)]
    m: Option<i64>,
    #[arg(long, value_enum, default_value = "phi11")]
    form: FormArg,
    #[command(flatten)]
    lambda: LambdaArgs,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct DensityArgs {
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0)]
    n: i64,
    /// Comma list or geometric `lo:hi:n` range of times.
    #[arg(long, default_value = "1")]
    t: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct PsiArgs {
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    #[command(flatten)]
    lambda: LambdaArgs,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct EntranceArgs {
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0)]
    n: i64,
    #[command(flatten)]
    lambda: LambdaArgs,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Side {
    Pos,
    Neg,
    Zero,
}

fn state(side: Side, k: i64) -> TqState {
    match side {
        Side::Pos => TqState::Positive(k),
        Side::Neg => TqState::Negative(k),
        Side::Zero => TqState::Zero,
    }
}

fn state_label(s: TqState) -> String {
    match s {
        TqState::Zero => "0".into(),
        TqState::Positive(k) => format!("+q^{k}"),
        TqState::Negative(k) => format!("-q^{k}"),
    }
}

#[derive(Args)]
struct ResolventArgs {
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    /// Exponent of the start state.
    #[arg(long, allow_hyphen_values = true, default_value_t = 0)]
    n: i64,
    /// Exponent of the end state.
    #[arg(long, allow_hyphen_values = true, default_value_t = 0)]
    m: i64,
    #[arg(long, value_enum, default_value = "pos")]
    from: Side,
    #[arg(long, value_enum, default_value = "pos")]
    to: Side,
    /// Resolvent of the chain killed at 0 (both states on the positive side).
    #[arg(long)]
    killed: bool,
    #[command(flatten)]
    lambda: LambdaArgs,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SimKind {
    Down,
    Up,
    Zero,
    /// One sample path.
    Path,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    kind: SimKind,
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0)]
    n: i64,
    /// Target exponent for `down`/`up`; defaults to `n ∓ 1`.
    #[arg(long, allow_hyphen_values = true)]
    m: Option<i64>,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Exponent at which the residual time to 0 is spliced in.
    #[arg(long, allow_hyphen_values = true, default_value_t = -30)]
    floor: i64,
    /// Horizon of a sample path.
    #[arg(long, default_value_t = 10.0)]
    t: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, value_enum, default_value = "all")]
    suite: validate::Suite,
    /// Samples per Monte Carlo check.
    #[arg(long, default_value_t = 20_000)]
    samples: usize,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct TimescaleArgs {
    /// Block file, or `-` for standard input.
    #[arg(long)]
    file: String,
    /// Comma list of points to classify.
    #[arg(long, allow_hyphen_values = true)]
    points: Option<String>,
    /// `u,v`: report the speed-measure mass and first moment of (u, v).
    #[arg(long, allow_hyphen_values = true, conflicts_with = "points")]
    window: Option<String>,
    #[command(flatten)]
    common: Common,
}

enum CliError {
    Usage(String),
    Core(Error),
    Validation(usize),
    Io(io::Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

type CliResult<T> = Result<T, CliError>;

fn params(q: f64) -> CliResult<TqParams> {
    TqParams::new(q).map_err(|e| CliError::Usage(e.to_string()))
}

fn laplace_cells(v: &LaplaceValue) -> [Cell; 3] {
    [v.method.as_str().into(), v.value.into(), v.error_estimate.into()]
}

fn cmd_qseries(a: &QseriesArgs) -> CliResult<Table> {
    let base = QBase::new(a.base)?;
    let list = |s: &str| -> CliResult<Vec<f64>> {
        if s.trim().is_empty() {
            Ok(Vec::new())
        } else {
            parse_grid(s).map_err(CliError::Usage)
        }
    };
    let zs = list(&a.z)?;
    let (pa, pb) = (list(&a.a)?, list(&a.b)?);
    let n = match a.n.trim() {
        "inf" => Extent::Infinite,
        s => Extent::Finite(
            s.parse()
                .map_err(|e| CliError::Usage(format!("--n must be an integer or inf: {e}")))?,
        ),
    };
    let ctrl = SeriesControl::default();
    let mut t = Table::new(vec![col("fn"), col("z"), col("value"), col("method"), col("error_estimate")]);
    let name = a.function.to_possible_value().expect("no skipped variants").get_name().to_owned();
    for &z in &zs {
        let (value, method, err): (f64, &str, Option<f64>) = match a.function {
            SeriesFn::Qpoch => (qseries::qpoch_ctrl(z, base, n, &ctrl)?.to_f64(), "product", None),
            SeriesFn::Phi => {
                let s = qseries::rphis_detailed(&pa, &pb, base, z, &ctrl)?;
                (s.value, "series", Some(s.error_estimate(ctrl.rel_tol())))
            }
            SeriesFn::SmallE => (qseries::eq_exp(z, base)?, "product", None),
            SeriesFn::BigE => (qseries::Eq_exp(z, base)?, "product", None),
            SeriesFn::Psi01 => (qseries::psi01(a.c, base, z, &ctrl)?, "product", None),
        };
        t.push(vec![name.clone().into(), z.into(), value.into(), method.into(), err.into()]);
    }
    Ok(t)
}

fn cmd_cf(a: &CfArgs) -> CliResult<Table> {
    params(a.q)?;
    let rates = BirthDeathRates::tq(a.q)?;
    let lambdas = a.lambda.values()?;
    let rows: Vec<Vec<Cell>> = lambdas
        .par_iter()
        .map(|&lam| -> CliResult<Vec<Cell>> {
            let (cf_spec, scale) = match a.kind {
                StepKind::Down => (birthdeath::down_recurrence(&rates, lam), rates.beta(a.n - 1)?),
                StepKind::Up => (birthdeath::up_recurrence(&rates, lam, a.q), 1.0),
            };
            let seeded = contfrac::minimal_solution_ratio(&cf_spec, a.n, contfrac::MAX_DEPTH, CF_TOL)?;
            // The classical fraction may need more depth than allowed.
            let classical = contfrac::classical_value(&cf_spec, a.n, contfrac::MAX_DEPTH, CF_TOL)
                .ok()
                .map(|c| c.depth_used);
            Ok(vec![
                a.q.into(),
                a.n.into(),
                lam.into(),
                (seeded.value / scale).into(),
                seeded.depth_used.into(),
                classical.into(),
                seeded.tail_seed.into(),
                "continued_fraction".into(),
                (seeded.error_estimate / scale).into(),
            ])
        })
        .collect::<CliResult<_>>()?;
    let mut t = Table::new(vec![
        col("q"),
        col("n"),
        col_unit("lambda", "1/time"),
        col("value"),
        col("depth_used"),
        col("classical_depth"),
        col("tail_seed"),
        col("method"),
        col("error_estimate"),
    ]);
    rows.into_iter().for_each(|r| t.push(r));
    Ok(t)
}

fn cmd_hit(a: &HitArgs) -> CliResult<Table> {
    let p = params(a.q)?;
    let (kind, m) = match a.kind {
        HitKindArg::Down => ("down", a.m.unwrap_or(a.n - 1)),
        HitKindArg::Up => ("up", a.m.unwrap_or(a.n + 1)),
        HitKindArg::Zero => ("zero", i64::MIN),
    };
    match a.kind {
        HitKindArg::Down if m >= a.n => return Err(CliError::Usage(format!("down needs m < n, got m = {m}"))),
        HitKindArg::Up if m <= a.n => return Err(CliError::Usage(format!("up needs m > n, got m = {m}"))),
        _ => {}
    }
    let forms: Vec<FormArg> = match (a.kind, a.form) {
        (HitKindArg::Down, FormArg::Both) => vec![FormArg::Phi01, FormArg::Phi11],
        (HitKindArg::Up, FormArg::Both) => vec![FormArg::Phi11, FormArg::Cf],
        (HitKindArg::Zero, FormArg::Both | FormArg::Phi11) => vec![FormArg::Phi11],
        (HitKindArg::Up, FormArg::Phi01) => {
            return Err(CliError::Usage("upward transforms have no phi01 form".into()))
        }
        (HitKindArg::Zero, _) => {
            return Err(CliError::Usage("the hitting time of 0 has only the phi11 form".into()))
        }
        (_, f) => vec![f],
    };
    let rates = BirthDeathRates::tq(a.q)?;
    let regime = TailRegime::tq(a.q);
    let lambdas = a.lambda.values()?;
    let jobs: Vec<(f64, FormArg)> = lambdas
        .iter()
        .flat_map(|&l| forms.iter().map(move |&f| (l, f)))
        .collect();
    let rows: Vec<Vec<Cell>> = jobs
        .par_iter()
        .map(|&(lam, form)| -> CliResult<Vec<Cell>> {
            let v = match (a.kind, form) {
                (HitKindArg::Zero, _) => tq::h_to_zero(a.n, lam, &p)?,
                (_, FormArg::Phi01) => tq::h_nm_with_form(a.n, m, lam, &p, Form::Phi01)?,
                (_, FormArg::Phi11) => tq::h_nm_with_form(a.n, m, lam, &p, Form::Phi11)?,
                (_, _) => birthdeath::h_path(&rates, &regime, a.n, m, lam, CF_TOL)?,
            };
            let m_cell: Cell = if a.kind == HitKindArg::Zero { Cell::Null } else { m.into() };
            let mut row = vec![kind.into(), a.q.into(), a.n.into(), m_cell, lam.into()];
            row.extend(laplace_cells(&v));
            Ok(row)
        })
        .collect::<CliResult<_>>()?;
    let mut t = Table::new(vec![
        col("kind"),
        col("q"),
        col("n"),
        col("m"),
        col_unit("lambda", "1/time"),
        col("method"),
        col("value"),
        col("error_estimate"),
    ]);
    rows.into_iter().for_each(|r| t.push(r));
    Ok(t)
}

fn cmd_density(a: &DensityArgs) -> CliResult<Table> {
    let p = params(a.q)?;
    let ts = parse_grid(&a.t).map_err(CliError::Usage)?;
    if let Some(bad) = ts.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(CliError::Usage(format!("t must be positive and finite, got {bad}")));
    }
    let dens = TauZeroDensity::new(p, SeriesControl::default())?;
    let rows: Vec<Vec<Cell>> = ts
        .par_iter()
        .map(|&t| -> CliResult<Vec<Cell>> {
            let v = dens.eval(a.n, t)?;
            let (_, err) = dens.eval_detailed(a.n, t)?;
            Ok(vec![a.q.into(), a.n.into(), t.into(), v.into(), "alternating_series".into(), err.into()])
        })
        .collect::<CliResult<_>>()?;
    let mut t = Table::new(vec![
        col("q"),
        col("n"),
        col_unit("t", "time"),
        col_unit("density", "1/time"),
        col("method"),
        col("error_estimate"),
    ]);
    rows.into_iter().for_each(|r| t.push(r));
    Ok(t)
}

fn cmd_psi(a: &PsiArgs) -> CliResult<Table> {
    let p = params(a.q)?;
    let rows: Vec<Vec<Cell>> = a
        .lambda
        .values()?
        .par_iter()
        .map(|&lam| -> CliResult<Vec<Cell>> {
            let v = tq::psi_exponent(lam, &p)?;
            Ok(vec![a.q.into(), lam.into(), v.into(), "q_product".into(), Cell::Null])
        })
        .collect::<CliResult<_>>()?;
    let mut t = Table::new(vec![
        col("q"),
        col_unit("lambda", "1/time"),
        col_unit("psi", "1/time"),
        col("method"),
        col("error_estimate"),
    ]);
    rows.into_iter().for_each(|r| t.push(r));
    Ok(t)
}

fn cmd_entrance(a: &EntranceArgs) -> CliResult<Table> {
    let p = params(a.q)?;
    let rows: Vec<Vec<Cell>> = a
        .lambda
        .values()?
        .par_iter()
        .map(|&lam| -> CliResult<Vec<Cell>> {
            let v = tq::entrance_law_lt(a.n, lam, &p)?;
            Ok(vec![a.q.into(), a.n.into(), lam.into(), v.into(), "phi11_ratio".into(), Cell::Null])
        })
        .collect::<CliResult<_>>()?;
    let mut t = Table::new(vec![
        col("q"),
        col("n"),
        col_unit("lambda", "1/time"),
        col("value"),
        col("method"),
        col("error_estimate"),
    ]);
    rows.into_iter().for_each(|r| t.push(r));
    Ok(t)
}

fn cmd_resolvent(a: &ResolventArgs) -> CliResult<Table> {
    let p = params(a.q)?;
    if a.killed && (a.from != Side::Pos || a.to != Side::Pos) {
        return Err(CliError::Usage("--killed needs both states on the positive side".into()));
    }
    let (x, y) = (state(a.from, a.n), state(a.to, a.m));
    let rows: Vec<Vec<Cell>> = a
        .lambda
        .values()?
        .par_iter()
        .map(|&lam| -> CliResult<Vec<Cell>> {
            let v = if a.killed {
                tq::resolvent_killed(a.n, a.m, lam, &p)?
            } else {
                tq::resolvent_full(x, y, lam, &p)?
            };
            Ok(vec![
                a.q.into(),
                state_label(x).into(),
                state_label(y).into(),
                a.killed.into(),
                lam.into(),
                v.into(),
                "closed_form".into(),
                Cell::Null,
            ])
        })
        .collect::<CliResult<_>>()?;
    let mut t = Table::new(vec![
        col("q"),
        col("from"),
        col("to"),
        col("killed"),
        col_unit("lambda", "1/time"),
        col_unit("value", "time"),
        col("method"),
        col("error_estimate"),
    ]);
    rows.into_iter().for_each(|r| t.push(r));
    Ok(t)
}

fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> CliResult<()> {
    let p = params(a.q)?;
    let sim = Simulator::new(p)?;
    if a.kind == SimKind::Path {
        let mut rng = RngStream::new(a.seed, 0).rng();
        let rec = sim.simulate_path(TqState::Positive(a.n), a.t, a.floor, &mut rng)?;
        let mut t = Table::new(vec![col("jump_time"), col("state_value"), col("exponent"), col("sign")]);
        let times = std::iter::once(0.0).chain(rec.jump_times.iter().copied());
        for (time, s) in times.zip(&rec.states) {
            t.push(vec![time.into(), s.value(&p).into(), s.exponent().into(), i64::from(s.sign()).into()]);
        }
        t.write(out, a.common.output)?;
        return Ok(());
    }
    let (kind, m) = match a.kind {
        SimKind::Down => (HitKind::Down, a.m.unwrap_or(a.n - 1)),
        SimKind::Up => (HitKind::Up, a.m.unwrap_or(a.n + 1)),
        _ => (HitKind::ToZero, a.n),
    };
    let est = sim.estimate_laplace(kind, a.n, m, a.lambda, a.floor, a.samples, a.seed)?;
    let kind_name = match kind {
        HitKind::Down => "down",
        HitKind::Up => "up",
        HitKind::ToZero => "zero",
    };
    match a.common.output {
        Output::Json => {
            let mut params = json!({"q": a.q, "n": a.n, "lambda": a.lambda, "floor": a.floor});
            if kind != HitKind::ToZero {
                params["m"] = json!(m);
            }
            let doc = json!({
                "kind": kind_name,
                "params": params,
                "estimate": est.mean,
                "std_error": est.std_error,
                "n_samples": est.n_samples,
                "seed": a.seed,
            });
            serde_json::to_writer_pretty(&mut *out, &doc).map_err(io::Error::from)?;
            writeln!(out)?;
        }
        Output::Csv => {
            let m_cell: Cell = if kind == HitKind::ToZero { Cell::Null } else { m.into() };
            let mut t = Table::new(vec![
                col("kind"),
                col("q"),
                col("n"),
                col("m"),
                col_unit("lambda", "1/time"),
                col("floor"),
                col("estimate"),
                col("std_error"),
                col("n_samples"),
                col("seed"),
            ]);
            t.push(vec![
                kind_name.into(),
                a.q.into(),
                a.n.into(),
                m_cell,
                a.lambda.into(),
                a.floor.into(),
                est.mean.into(),
                est.std_error.into(),
                est.n_samples.into(),
                Cell::Text(a.seed.to_string()),
            ]);
            t.write(out, Output::Csv)?;
        }
    }
    Ok(())
}

fn cmd_validate(a: &ValidateArgs) -> CliResult<(Table, usize)> {
    if a.samples < 100 {
        return Err(CliError::Usage(format!("--samples must be at least 100, got {}", a.samples)));
    }
    let checks = validate::run(a.suite, validate::McConfig { samples: a.samples, seed: a.seed })?;
    let mut t = Table::new(vec![col("suite"), col("check"), col("error"), col("tolerance"), col("passed")]);
    let mut failed = 0;
    for c in &checks {
        failed += usize::from(!c.passed());
        t.push(vec![c.suite.into(), c.name.into(), c.error.into(), c.tolerance.into(), c.passed().into()]);
    }
    Ok((t, failed))
}

fn cmd_timescale(a: &TimescaleArgs) -> CliResult<Table> {
    let text = if a.file == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        s
    } else {
        fs::read_to_string(&a.file).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", a.file)))?
    };
    let ts = TimeScale::parse(&text)?;
    if let Some(w) = &a.window {
        let uv = parse_grid(w).map_err(CliError::Usage)?;
        let [u, v] = uv[..] else {
            return Err(CliError::Usage(format!("--window takes u,v, got {w:?}")));
        };
        let mut t = Table::new(vec![col("u"), col("v"), col("mu_mass"), col("mu_first_moment")]);
        t.push(vec![u.into(), v.into(), ts.mu_mass(u, v)?.into(), ts.mu_first_moment(u, v)?.into()]);
        return Ok(t);
    }
    let points = match &a.points {
        Some(p) => parse_grid(p).map_err(CliError::Usage)?,
        None => return Err(CliError::Usage("timescale needs --points or --window".into())),
    };
    let mut t = Table::new(vec![col("x"), col("class"), col("rho"), col("sigma"), col("graininess")]);
    for x in points {
        let (r, s) = ts.rho_sigma(x)?;
        let class = ts.classify(x)?;
        t.push(vec![x.into(), class.as_str().into(), r.into(), s.into(), (s - x).into()]);
    }
    Ok(t)
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    let (table, format) = match &cli.command {
        Command::Qseries(a) => (cmd_qseries(a)?, a.common.output),
        Command::Cf(a) => (cmd_cf(a)?, a.common.output),
        Command::Hit(a) => (cmd_hit(a)?, a.common.output),
        Command::Density(a) => (cmd_density(a)?, a.common.output),
        Command::Psi(a) => (cmd_psi(a)?, a.common.output),
        Command::Entrance(a) => (cmd_entrance(a)?, a.common.output),
        Command::Resolvent(a) => (cmd_resolvent(a)?, a.common.output),
        Command::Timescale(a) => (cmd_timescale(a)?, a.common.output),
        Command::Simulate(a) => return cmd_simulate(a, out),
        Command::Validate(a) => {
            let (t, failed) = cmd_validate(a)?;
            t.write(out, a.common.output)?;
            return if failed > 0 { Err(CliError::Validation(failed)) } else { Ok(()) };
        }
    };
    table.write(out, format)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match dispatch(&cli, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        // A closed reader (e.g. `| head`) is not an error.
        Err(CliError::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            let _ = out.flush();
            let (code, msg) = match e {
                CliError::Usage(m) => (2, m),
                CliError::Core(e @ (Error::NonConvergence { .. } | Error::Pole(_))) => (3, e.to_string()),
                CliError::Core(e) => (2, e.to_string()),
                CliError::Validation(n) => (4, format!("{n} validation check(s) failed")),
                CliError::Io(e) => (1, e.to_string()),
            };
            eprintln!("tq: {msg}");
            ExitCode::from(code)
        }
    }
}
