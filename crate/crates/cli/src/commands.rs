//! Subcommand implementations. Each returns the rendered JSON for stdout
//! plus an exit code, or a [`CliError`] that the shell layer maps to a code.

use crate::io::{parse_count_file, parse_count_list, parse_number_list, parse_unit_csv, ParseError};
use crate::report::{
    AttainOutput, AttainSide, BoundsOutput, CiOutput, EstimateOutput, OracleCheckOutput,
    OracleTrial, Provenance,
};
use crate::{CiArgs, Cli, Command, EstimateArgs, MarginalArgs, OracleCheckArgs};
use ordibound_core::{
    attaining_matrix_lower, attaining_matrix_upper, bootstrap_interval, bounds_report,
    estimate_bounds, gamma_lower, gamma_upper, lp_gamma_bounds, validate_attainment, BootError,
    BoundsError, CounterRng, DataError, Dataset, Design, EstimateError, MarginalDistribution,
    FILL_TOLERANCE,
};
use serde::Serialize;
use std::path::Path;
use thiserror::Error;

/// Deviation allowed between the closed forms and the transportation oracle.
pub const ORACLE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Parse(_) => "parse",
            CliError::Io { .. } => "io",
            CliError::Data(_) => "data",
            CliError::Numerical(_) => "numerical",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Parse(_) | CliError::Io { .. } | CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn to_stderr_json(&self) -> String {
        serde_json::json!({
            "error": { "kind": self.kind(), "message": self.to_string() }
        })
        .to_string()
    }
}

impl From<BoundsError> for CliError {
    fn from(e: BoundsError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<EstimateError> for CliError {
    fn from(e: EstimateError) -> Self {
        match e {
            EstimateError::Data(inner) => CliError::Data(inner.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<BootError> for CliError {
    fn from(e: BootError) -> Self {
        match e {
            BootError::BadAlpha(_) | BootError::NoReplicates => CliError::Usage(e.to_string()),
            BootError::Estimate(inner) => inner.into(),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

/// What the shell layer should emit. Oracle checks that find disagreements
/// still print their report, so the exit code travels with the output.
pub struct CommandOutput {
    pub stdout: String,
    pub stderr: Option<String>,
    pub exit_code: i32,
}

impl CommandOutput {
    fn success(stdout: String) -> Self {
        CommandOutput { stdout, stderr: None, exit_code: 0 }
    }
}

pub fn dispatch(cli: &Cli) -> Result<CommandOutput, CliError> {
    match &cli.command {
        Command::Bounds(args) => run_bounds(args, cli.pretty),
        Command::Attain(args) => run_attain(args, cli.pretty),
        Command::Estimate(args) => run_estimate(args, cli.pretty),
        Command::Ci(args) => run_ci(args, cli.pretty),
        Command::OracleCheck(args) => run_oracle_check(args, cli.pretty),
    }
}

fn render<T: Serialize>(value: &T, pretty: bool) -> String {
    if pretty {
        serde_json::to_string_pretty(value).expect("report serialization cannot fail")
    } else {
        serde_json::to_string(value).expect("report serialization cannot fail")
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// A validated marginal pair plus the provenance ingredients.
struct MarginalInput {
    treated: MarginalDistribution,
    control: MarginalDistribution,
    source: String,
    raw: Vec<u8>,
}

fn load_marginals(args: &MarginalArgs) -> Result<MarginalInput, CliError> {
    match (
        &args.treated_probs,
        &args.control_probs,
        &args.treated_counts,
        &args.control_counts,
        &args.counts_file,
    ) {
        (Some(t), Some(c), None, None, None) => {
            let treated = MarginalDistribution::new(parse_number_list(t)?)?;
            let control = MarginalDistribution::new(parse_number_list(c)?)?;
            let raw = format!("treated:{t}\ncontrol:{c}\n").into_bytes();
            Ok(MarginalInput { treated, control, source: "inline".into(), raw })
        }
        (None, None, Some(t), Some(c), None) => {
            let treated = MarginalDistribution::from_counts(&parse_count_list(t)?)?;
            let control = MarginalDistribution::from_counts(&parse_count_list(c)?)?;
            let raw = format!("treated:{t}\ncontrol:{c}\n").into_bytes();
            Ok(MarginalInput { treated, control, source: "inline".into(), raw })
        }
        (None, None, None, None, Some(path)) => {
            let raw = read_file(path)?;
            let text = String::from_utf8_lossy(&raw);
            let (t, c) = parse_count_file(&text)?;
            let treated = MarginalDistribution::from_counts(&t)?;
            let control = MarginalDistribution::from_counts(&c)?;
            Ok(MarginalInput { treated, control, source: format!("file:{}", path.display()), raw })
        }
        _ => Err(CliError::Usage(
            "provide exactly one input: --treated-probs with --control-probs, \
             --treated-counts with --control-counts, or --counts-file"
                .into(),
        )),
    }
}

fn run_bounds(args: &MarginalArgs, pretty: bool) -> Result<CommandOutput, CliError> {
    let input = load_marginals(args)?;
    let bounds = bounds_report(&input.treated, &input.control)?;
    let out = BoundsOutput {
        provenance: Provenance::new("bounds", input.source, &input.raw),
        num_categories: input.treated.num_categories(),
        treated_marginal: input.treated.probs().to_vec(),
        control_marginal: input.control.probs().to_vec(),
        bounds,
    };
    Ok(CommandOutput::success(render(&out, pretty)))
}

fn run_attain(args: &MarginalArgs, pretty: bool) -> Result<CommandOutput, CliError> {
    let input = load_marginals(args)?;
    let upper = attaining_matrix_upper(&input.treated, &input.control)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let lower = attaining_matrix_lower(&input.treated, &input.control)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let upper_check = validate_attainment(
        &upper.matrix,
        &input.treated,
        &input.control,
        upper.target,
        FILL_TOLERANCE,
    );
    let lower_check = validate_attainment(
        &lower.matrix,
        &input.treated,
        &input.control,
        lower.target,
        FILL_TOLERANCE,
    );
    let out = AttainOutput {
        provenance: Provenance::new("attain", input.source, &input.raw),
        num_categories: input.treated.num_categories(),
        treated_marginal: input.treated.probs().to_vec(),
        control_marginal: input.control.probs().to_vec(),
        upper: AttainSide::new(&upper.matrix, upper.tuple, upper.target, upper_check),
        lower: AttainSide::new(&lower.matrix, lower.tuple, lower.target, lower_check),
    };
    if !out.upper.validation.ok || !out.lower.validation.ok {
        return Err(CliError::Numerical(
            "constructed coupling failed validation against its marginals".into(),
        ));
    }
    Ok(CommandOutput::success(render(&out, pretty)))
}

fn load_dataset(path: &Path, categories: Option<usize>) -> Result<(Dataset, Vec<u8>), CliError> {
    let raw = read_file(path)?;
    let (units, _covariates) = parse_unit_csv(raw.as_slice())?;
    let dataset = match categories {
        Some(k) => Dataset::new(units, k)?,
        None => Dataset::with_inferred_categories(units)?,
    };
    Ok((dataset, raw))
}

fn run_estimate(args: &EstimateArgs, pretty: bool) -> Result<CommandOutput, CliError> {
    let (dataset, raw) = load_dataset(&args.data, args.categories)?;
    let estimate = estimate_bounds(&dataset, args.design.into())?;
    let out = EstimateOutput {
        provenance: Provenance::new(
            "estimate",
            format!("file:{}", args.data.display()),
            &raw,
        ),
        estimate,
    };
    Ok(CommandOutput::success(render(&out, pretty)))
}

fn run_ci(args: &CiArgs, pretty: bool) -> Result<CommandOutput, CliError> {
    let (dataset, source, raw) = match (&args.data, &args.counts_file) {
        (Some(_), Some(_)) | (None, None) => {
            return Err(CliError::Usage(
                "provide exactly one of --data or --counts-file".into(),
            ))
        }
        (Some(path), None) => {
            let (dataset, raw) = load_dataset(path, args.categories)?;
            (dataset, format!("file:{}", path.display()), raw)
        }
        (None, Some(path)) => {
            let raw = read_file(path)?;
            let text = String::from_utf8_lossy(&raw);
            let (t, c) = parse_count_file(&text)?;
            let dataset = Dataset::from_counts(&t, &c)?;
            (dataset, format!("file:{}", path.display()), raw)
        }
    };
    let interval =
        bootstrap_interval(&dataset, args.design.into(), args.alpha, args.boot, args.seed)?;
    let out = CiOutput {
        provenance: Provenance::new("ci", source, &raw),
        interval,
    };
    Ok(CommandOutput::success(render(&out, pretty)))
}

/// Random point on the probability simplex, occasionally with hard zeros so
/// the degenerate paths get exercised.
pub fn random_marginal(rng: &mut CounterRng, categories: usize) -> MarginalDistribution {
    loop {
        let mut probs: Vec<f64> = (0..categories)
            .map(|_| -(1.0 - rng.next_f64()).ln())
            .collect();
        if rng.next_f64() < 0.25 {
            let zeros = 1 + rng.next_index(categories - 1);
            for _ in 0..zeros {
                let k = rng.next_index(categories);
                probs[k] = 0.0;
            }
        }
        let total: f64 = probs.iter().sum();
        if total > 1e-12 {
            for p in &mut probs {
                *p /= total;
            }
            return MarginalDistribution::new(probs).expect("normalized simplex point is valid");
        }
    }
}

fn run_oracle_check(args: &OracleCheckArgs, pretty: bool) -> Result<CommandOutput, CliError> {
    if args.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    if args.max_categories < 2 {
        return Err(CliError::Usage("--max-categories must be at least 2".into()));
    }
    let mut failures = Vec::new();
    let mut max_upper_deviation = 0.0f64;
    let mut max_lower_deviation = 0.0f64;
    for trial in 0..args.trials {
        let mut rng = CounterRng::from_key(args.seed, trial as u64);
        let categories = 2 + rng.next_index(args.max_categories - 1);
        let p1 = random_marginal(&mut rng, categories);
        let p0 = random_marginal(&mut rng, categories);
        let (upper, _) = gamma_upper(&p1, &p0).map_err(|e| CliError::Numerical(e.to_string()))?;
        let (lower, _) = gamma_lower(&p1, &p0).map_err(|e| CliError::Numerical(e.to_string()))?;
        let (lp_lower, lp_upper) = lp_gamma_bounds(p1.probs(), p0.probs())
            .map_err(|e| CliError::Numerical(format!("oracle trial {trial}: {e}")))?;
        let upper_deviation = (upper - lp_upper).abs();
        let lower_deviation = (lower - lp_lower).abs();
        max_upper_deviation = max_upper_deviation.max(upper_deviation);
        max_lower_deviation = max_lower_deviation.max(lower_deviation);
        let upper_attainment = attaining_matrix_upper(&p1, &p0)
            .map_err(|e| CliError::Numerical(format!("oracle trial {trial}: {e}")))?;
        let lower_attainment = attaining_matrix_lower(&p1, &p0)
            .map_err(|e| CliError::Numerical(format!("oracle trial {trial}: {e}")))?;
        let upper_ok =
            validate_attainment(&upper_attainment.matrix, &p1, &p0, upper, FILL_TOLERANCE).ok;
        let lower_ok =
            validate_attainment(&lower_attainment.matrix, &p1, &p0, lower, FILL_TOLERANCE).ok;
        if upper_deviation > ORACLE_TOLERANCE
            || lower_deviation > ORACLE_TOLERANCE
            || !upper_ok
            || !lower_ok
        {
            failures.push(OracleTrial {
                trial,
                num_categories: categories,
                upper_deviation,
                lower_deviation,
                upper_attainment_ok: upper_ok,
                lower_attainment_ok: lower_ok,
            });
        }
    }
    let ok = failures.is_empty();
    let input = format!(
        "trials={};max_categories={};seed={}",
        args.trials, args.max_categories, args.seed
    );
    let out = OracleCheckOutput {
        provenance: Provenance::new("oracle-check", "generated".into(), input.as_bytes()),
        trials: args.trials,
        max_categories: args.max_categories,
        seed: args.seed,
        tolerance: ORACLE_TOLERANCE,
        max_upper_deviation,
        max_lower_deviation,
        failures,
        ok,
    };
    let stdout = render(&out, pretty);
    if ok {
        Ok(CommandOutput::success(stdout))
    } else {
        let stderr = CliError::Numerical(format!(
            "oracle check found {} disagreeing trials",
            out.failures.len()
        ))
        .to_stderr_json();
        Ok(CommandOutput { stdout, stderr: Some(stderr), exit_code: 3 })
    }
}

/// Clap-facing mirror of the estimation designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DesignArg {
    Cre,
    Ipw,
    OutcomeRegression,
    Sharpened,
}

impl From<DesignArg> for Design {
    fn from(value: DesignArg) -> Self {
        match value {
            DesignArg::Cre => Design::Cre,
            DesignArg::Ipw => Design::Ipw,
            DesignArg::OutcomeRegression => Design::OutcomeRegression,
            DesignArg::Sharpened => Design::Sharpened,
        }
    }
}
