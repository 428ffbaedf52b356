use crate::args::*;
use crate::output::{Cell, Format, Table};
use crate::tables::{self, Checked, Which};
use clap::ValueEnum;
use drawdown_core::analytics::*;
use drawdown_core::inversion::{cdf_drawdown_time, InversionConfig};
use drawdown_core::model::{beta_roots, expected_tau, kappa, laplace_coeffs};
use drawdown_core::montecarlo::{
    estimate_cdf_extrapolated, estimate_cdf_strided, estimate_rates, estimate_rates_extrapolated, ingest_csv_series,
    simulate_episodes, write_episodes_csv, write_episodes_json, CdfTarget, Estimate, PathConfig, PathEpisodes,
    SeriesMode,
};
use drawdown_core::pricing::{alpha_bar, price, price_series_sum, ContractSpec, PayoffType, RiskNeutralModel};
use drawdown_core::{DrawdownKind, DrawdownSpec, Error, LaplaceCoeffs, ModelParams};
use std::path::{Path, PathBuf};

/// A failed run and its exit status.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, parameters or input files (exit 1).
    Usage(String),
    /// A numerical routine failed (exit 2).
    Numeric(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Numeric(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Numeric(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. }
            | Error::InvalidArgument(_)
            | Error::Input { .. }
            | Error::Csv(_)
            | Error::Io(_)
            | Error::Json(_) => Failure::Usage(e.to_string()),
            _ => Failure::Numeric(e.to_string()),
        }
    }
}

impl From<tables::CellError> for Failure {
    fn from(e: tables::CellError) -> Self {
        let message = e.to_string();
        match Failure::from(e.source) {
            Failure::Usage(_) => Failure::Usage(message),
            Failure::Numeric(_) => Failure::Numeric(message),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// One output produced by a command; `path` is `None` for the main output.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub path: Option<PathBuf>,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub main: Vec<u8>,
    pub extra: Vec<Artifact>,
    pub seed: Option<u64>,
    /// Set when a `--check` failed.
    pub check_failure: Option<String>,
}

impl RunOutput {
    fn text(main: String) -> Self {
        Self {
            main: main.into_bytes(),
            extra: Vec::new(),
            seed: None,
            check_failure: None,
        }
    }
}

pub fn execute(command: &Command, format: Format, digits: usize) -> Outcome<RunOutput> {
    match command {
        Command::Eval(a) => Ok(RunOutput::text(eval(a)?.render(format, digits))),
        Command::Tables(a) => run_tables(a, format, digits),
        Command::Simulate(a) => simulate(a, format, digits),
        Command::Empirical(a) => empirical(a, format, digits),
        Command::Price(a) => Ok(RunOutput::text(run_price(a)?.render(format, digits))),
        Command::Replay(_) => Err(Failure::Usage("replay cannot be nested".into())),
    }
}

fn model(m: &ModelArgs) -> Outcome<(ModelParams, DrawdownSpec)> {
    Ok((ModelParams::with_x0(m.mu, m.sigma, m.x0)?, DrawdownSpec::new(m.a)?))
}

fn kind_of(recovery: bool) -> DrawdownKind {
    if recovery {
        DrawdownKind::WithRecovery
    } else {
        DrawdownKind::WithoutRecovery
    }
}

fn scalar(column: &str, v: f64) -> Table {
    let mut t = Table::new([column]);
    t.push(vec![v.into()]);
    t
}

fn eval(args: &EvalArgs) -> Outcome<Table> {
    let (params, spec) = model(&args.model)?;
    let id = args.formula;
    fn need<T: Copy>(id: FormulaId, flag: &str, v: Option<T>) -> Outcome<T> {
        v.ok_or_else(|| {
            let name = id
                .to_possible_value()
                .map_or_else(String::new, |p| p.get_name().to_string());
            Failure::Usage(format!("formula `{name}` needs --{flag}"))
        })
    }
    let lambda = || need(id, "lambda", args.lambda);
    let n = || need(id, "n", args.n);
    let x = || need(id, "x", args.x);
    let coeffs = || -> Outcome<LaplaceCoeffs> { Ok(laplace_coeffs(&params, &spec, lambda()?)?) };
    let value = match id {
        FormulaId::BetaRoots => {
            let (plus, minus) = beta_roots(&params, lambda()?)?;
            let mut t = Table::new(["beta_plus", "beta_minus"]);
            t.push(vec![plus.into(), minus.into()]);
            return Ok(t);
        }
        FormulaId::Coeffs => {
            let c = coeffs()?;
            let mut t = Table::new(["b", "c"]);
            t.push(vec![c.b.into(), c.c.into()]);
            return Ok(t);
        }
        FormulaId::MixedErlangWeights => {
            let w = mixed_erlang_weights(&params, &spec, n()?)?;
            let mut t = Table::new(["k", "weight", "survival_before"]);
            for (k, (d, s)) in w.weights.iter().zip(&w.survival).enumerate() {
                t.push(vec![(k + 1).into(), (*d).into(), (*s).into()]);
            }
            return Ok(t);
        }
        FormulaId::Cdf => {
            let t_eval = need(id, "t", args.t)?;
            let inv = cdf_drawdown_time(
                &params,
                &spec,
                kind_of(args.recovery),
                n()?,
                t_eval,
                &args.inversion.config()?,
            )?;
            let mut t = Table::new(["value", "error_estimate"]);
            t.push(vec![inv.value.into(), inv.error_estimate.into()]);
            return Ok(t);
        }
        FormulaId::Gamma => params.gamma(),
        FormulaId::Kappa => kappa(&params, &spec),
        FormulaId::ExpectedTau => expected_tau(&params, &spec)?,
        FormulaId::LtTau => lt_tau(&coeffs()?),
        FormulaId::LtTauN => lt_tau_n(&coeffs()?, n()?)?,
        FormulaId::LtTauTildeN => lt_tau_tilde_n(&coeffs()?, n()?)?,
        FormulaId::ProbTildeFinite => prob_tilde_finite(&params, &spec, n()?)?,
        FormulaId::LtTauNMaxTail => lt_tau_n_max_tail(&coeffs()?, n()?, x()?)?,
        FormulaId::LtTauTildeNMaxTail => lt_tau_tilde_n_max_tail(&coeffs()?, n()?, x()?)?,
        FormulaId::LtTauNValueTail => lt_tau_n_value_tail(&coeffs()?, n()?, x()?)?,
        FormulaId::LtTauTildeNValueTail => lt_tilde_value_tail(&coeffs()?, n()?, x()?)?,
        FormulaId::ConstrainedPassageLt => constrained_passage_lt(&coeffs()?, x()?, n()?)?,
        FormulaId::JointDensityMaxValue => joint_density_max_value(&coeffs()?, n()?, x()?, need(id, "y", args.y)?)?,
        FormulaId::ProbMaxTail => prob_max_tail(&params, &spec, n()?, x()?)?,
        FormulaId::ProbMaxTailMixedErlang => prob_max_tail_mixed_erlang(&params, &spec, n()?, x()?)?,
        FormulaId::ProbTildeMaxTail => prob_tilde_max_tail(&params, &spec, n()?, x()?)?,
        FormulaId::ProbValueTail => prob_value_tail(&params, &spec, n()?, x()?)?,
        FormulaId::GenPoissonLink => recovery_link_pmf(&params, &spec, need(id, "k", args.k)?, need(id, "m", args.m)?)?,
        FormulaId::LtMagnitudeCdf => lt_drawdown_magnitude_cdf(&coeffs()?, n()?, x()?)?,
        FormulaId::FreqRate => freq_rate(&params, &spec, kind_of(args.recovery))?,
    };
    Ok(scalar("value", value))
}

fn run_tables(args: &TablesArgs, format: Format, digits: usize) -> Outcome<RunOutput> {
    let which: Which = args.which.parse().map_err(Failure::Usage)?;
    let config = args.inversion.config()?;
    let (table, failures) = match which {
        Which::Distribution41 | Which::Distribution42 => {
            let (sigma, published) = if which == Which::Distribution41 {
                (0.2, &tables::PUBLISHED_4_1)
            } else {
                (0.12, &tables::PUBLISHED_4_2)
            };
            let cells = tables::distribution_table(sigma, published, &config)?;
            let mut t = Table::new([
                "sigma",
                "mu",
                "n",
                "kind",
                "value",
                "err_estimate",
                "published",
                "abs_diff",
                "ok",
            ]);
            let mut bad = Vec::new();
            for c in &cells {
                if !c.within_tolerance() {
                    bad.push(format!("mu={} n={} kind={}", c.mu, c.n, c.kind));
                }
                t.push(vec![
                    c.sigma.into(),
                    c.mu.into(),
                    c.n.into(),
                    c.kind.as_str().into(),
                    c.value.into(),
                    c.error_estimate.into(),
                    c.published.into(),
                    c.deviation().into(),
                    c.within_tolerance().into(),
                ]);
            }
            (t, bad)
        }
        Which::Prices51 => {
            let cells = tables::price_table(&config)?;
            let mut t = Table::new([
                "type",
                "recovery",
                "alpha",
                "r",
                "sigma",
                "T",
                "price",
                "err_estimate",
                "published",
                "abs_diff",
                "ok",
            ]);
            let mut bad = Vec::new();
            for c in &cells {
                let recovery = c.contract.recovery == DrawdownKind::WithRecovery;
                let number = c.contract.payoff_type.number();
                if !c.within_tolerance() {
                    bad.push(format!(
                        "type={number} recovery={recovery} sigma={} T={}",
                        c.sigma, c.contract.maturity
                    ));
                }
                t.push(vec![
                    (number as u32).into(),
                    recovery.into(),
                    c.contract.alpha.into(),
                    c.contract.r.into(),
                    c.sigma.into(),
                    c.contract.maturity.into(),
                    c.value.into(),
                    c.error_estimate.into(),
                    c.published.into(),
                    c.deviation().into(),
                    c.within_tolerance().into(),
                ]);
            }
            (t, bad)
        }
    };
    let mut out = RunOutput::text(table.render(format, digits));
    if args.check && !failures.is_empty() {
        out.check_failure = Some(format!(
            "table {}: {} cell(s) outside {:e}: {}",
            which.name(),
            failures.len(),
            tables::CELL_TOLERANCE,
            failures.join("; ")
        ));
    }
    Ok(out)
}

fn simulate(args: &SimulateArgs, format: Format, digits: usize) -> Outcome<RunOutput> {
    let (params, spec) = model(&args.model)?;
    let config = PathConfig::new(args.dt, args.horizon, args.paths, args.seed)?;
    let t = args.t.unwrap_or(args.horizon);
    if args.n_max == 0 {
        return Err(Failure::Usage("--n-max must be >= 1".into()));
    }
    let inversion = args.inversion.config()?;
    let targets: Vec<CdfTarget> = DrawdownKind::BOTH
        .into_iter()
        .flat_map(|kind| (1..=args.n_max).map(move |n| CdfTarget { kind, n }))
        .collect();
    let coarse = match (args.extrapolate, args.strides.as_slice()) {
        (false, _) => None,
        (true, [1, .., last]) if *last > 1 => Some(*last),
        (true, _) => {
            return Err(Failure::Usage(
                "--extrapolate needs --strides starting at 1 and ending above 1, e.g. 1,4".into(),
            ))
        }
    };
    let (grid, extrapolated) = if coarse.is_some() {
        let study = estimate_cdf_extrapolated(&params, &spec, &targets, t, &config, &args.strides)?;
        (study.raw, Some(study.extrapolated))
    } else {
        (
            estimate_cdf_strided(&params, &spec, &targets, t, &config, &args.strides)?,
            None,
        )
    };

    let mut columns = vec!["quantity", "kind", "n", "dt", "t", "estimate", "std_error", "samples"];
    if args.compare_analytic {
        columns.extend(["analytic", "z_score"]);
    }
    let mut table = Table::new(columns);
    let exact: Vec<f64> = if args.compare_analytic {
        targets
            .iter()
            .map(|g| Ok(cdf_drawdown_time(&params, &spec, g.kind, g.n, t, &inversion)?.value))
            .collect::<Outcome<_>>()?
    } else {
        Vec::new()
    };
    let mut push =
        |quantity: &str, kind: DrawdownKind, n: Cell, dt: f64, at: f64, est: &Estimate, exact: Option<f64>| {
            let mut cells: Vec<Cell> = vec![
                quantity.into(),
                kind.as_str().into(),
                n,
                dt.into(),
                at.into(),
                est.mean.into(),
                est.std_error.into(),
                est.samples.into(),
            ];
            if let Some(x) = exact {
                cells.extend([x.into(), est.z_score(x).into()]);
            }
            table.push(cells);
        };
    let exact_at = |i: usize| exact.get(i).copied();
    for (row, &stride) in grid.iter().zip(&args.strides) {
        for (i, (est, target)) in row.iter().zip(&targets).enumerate() {
            push(
                "cdf",
                target.kind,
                target.n.into(),
                args.dt * stride as f64,
                t,
                est,
                exact_at(i),
            );
        }
    }
    if let Some(extrapolated) = &extrapolated {
        for (i, (est, target)) in extrapolated.iter().zip(&targets).enumerate() {
            push(
                "cdf-extrapolated",
                target.kind,
                target.n.into(),
                0.0,
                t,
                est,
                exact_at(i),
            );
        }
    }
    if args.rates {
        let rate_exact = |kind| -> Outcome<Option<f64>> {
            Ok(if args.compare_analytic {
                Some(freq_rate(&params, &spec, kind)?)
            } else {
                None
            })
        };
        let (fine, extrapolated) = match coarse {
            Some(stride) => {
                let study = estimate_rates_extrapolated(&params, &spec, &config, stride)?;
                (study.fine, Some(study.extrapolated))
            }
            None => (estimate_rates(&params, &spec, &config)?, None),
        };
        for (est, kind) in fine.iter().zip(DrawdownKind::BOTH) {
            push("rate", kind, "".into(), args.dt, args.horizon, est, rate_exact(kind)?);
        }
        if let Some(extrapolated) = extrapolated {
            for (est, kind) in extrapolated.iter().zip(DrawdownKind::BOTH) {
                push(
                    "rate-extrapolated",
                    kind,
                    "".into(),
                    0.0,
                    args.horizon,
                    est,
                    rate_exact(kind)?,
                );
            }
        }
    }
    let mut out = RunOutput::text(table.render(format, digits));
    out.seed = Some(args.seed);
    if let Some(path) = &args.episodes {
        let episodes = simulate_episodes(&params, &spec, &config)?;
        out.extra.push(Artifact {
            path: Some(path.clone()),
            bytes: episode_bytes(&episodes, episode_format(path), digits)?,
        });
    }
    Ok(out)
}

fn episode_format(path: &Path) -> Format {
    if path.extension().is_some_and(|e| e == "json") {
        Format::Json
    } else {
        Format::Csv
    }
}

fn episode_bytes(episodes: &[PathEpisodes], format: Format, digits: usize) -> Outcome<Vec<u8>> {
    let mut buf = Vec::new();
    match format {
        Format::Json => {
            write_episodes_json(&mut buf, episodes)?;
            buf.push(b'\n');
        }
        Format::Csv => write_episodes_csv(&mut buf, episodes)?,
        Format::Table => {
            let mut t = Table::new(["path", "kind", "index", "time", "running_max", "value"]);
            for p in episodes {
                for e in p.without_recovery.iter().chain(&p.with_recovery) {
                    t.push(vec![
                        p.path.into(),
                        e.kind.as_str().into(),
                        e.index.into(),
                        e.time.into(),
                        e.running_max.into(),
                        e.value.into(),
                    ]);
                }
            }
            buf = t.render(Format::Table, digits).into_bytes();
        }
    }
    Ok(buf)
}

fn empirical(args: &EmpiricalArgs, format: Format, digits: usize) -> Outcome<RunOutput> {
    let (mode, threshold) = match (args.log, args.alpha, args.a) {
        (true, Some(alpha), None) => (SeriesMode::Log, alpha_bar(alpha)?),
        (true, None, Some(a)) => (SeriesMode::Log, a),
        (false, None, Some(a)) => (SeriesMode::Arithmetic, a),
        (false, Some(_), None) => return Err(Failure::Usage("--alpha is a relative drop and requires --log".into())),
        _ => {
            return Err(Failure::Usage(
                "give the drawdown size with --alpha (and --log) or --a".into(),
            ))
        }
    };
    let spec = DrawdownSpec::new(threshold)?;
    let file = std::fs::File::open(&args.input)
        .map_err(|e| Failure::Usage(format!("cannot open {}: {e}", args.input.display())))?;
    let episodes = ingest_csv_series(std::io::BufReader::new(file), &spec, mode)
        .map_err(|e| Failure::Usage(format!("{}: {e}", args.input.display())))?;
    let bytes = episode_bytes(std::slice::from_ref(&episodes), format, digits)?;
    Ok(RunOutput {
        main: bytes,
        extra: Vec::new(),
        seed: None,
        check_failure: None,
    })
}

fn contract_from(args: &PriceArgs) -> Outcome<ContractSpec> {
    let base: Option<ContractSpec> = match &args.contract {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
            Some(
                serde_json::from_str(&text)
                    .map_err(|e| Failure::Usage(format!("{}: invalid contract: {e}", path.display())))?,
            )
        }
        None => None,
    };
    let missing = |flag: &str| Failure::Usage(format!("missing --{flag} (or a --contract document)"));
    let payoff_type = match &args.payoff {
        Some(s) => s.parse::<PayoffType>()?,
        None => base.map(|c| c.payoff_type).ok_or_else(|| missing("type"))?,
    };
    let recovery = match args.recovery {
        Some(b) => kind_of(b),
        None => base.map(|c| c.recovery).ok_or_else(|| missing("recovery"))?,
    };
    let alpha = args.alpha.or(base.map(|c| c.alpha)).ok_or_else(|| missing("alpha"))?;
    let r = args.r.or(base.map(|c| c.r)).ok_or_else(|| missing("r"))?;
    let maturity = args.maturity.or(base.map(|c| c.maturity)).ok_or_else(|| missing("T"))?;
    Ok(ContractSpec::new(alpha, r, maturity, payoff_type, recovery)?)
}

fn run_price(args: &PriceArgs) -> Outcome<Table> {
    let contract = contract_from(args)?;
    let model = RiskNeutralModel::new(contract.r, args.sigma, args.s0)?;
    let config: InversionConfig = args.inversion.config()?;
    let (value, err) = if args.series {
        let s = price_series_sum(&contract, &model, &config, args.series_tolerance)?;
        (s.price, s.error_estimate)
    } else {
        let inv = price(&contract, &model, &config)?;
        (inv.value, inv.error_estimate)
    };
    let mut t = Table::new(["type", "recovery", "alpha", "r", "sigma", "T", "price", "err_estimate"]);
    t.push(vec![
        (contract.payoff_type.number() as u32).into(),
        (contract.recovery == DrawdownKind::WithRecovery).into(),
        contract.alpha.into(),
        contract.r.into(),
        model.sigma.into(),
        contract.maturity.into(),
        value.into(),
        err.into(),
    ]);
    Ok(t)
}
