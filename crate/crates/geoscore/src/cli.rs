//! `geoscore` subcommands.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use geoscore_core::engine::{
    self, hoeffding_bound, hoeffding_half_width, hoeffding_replicates, weights_label, GeometricScorer,
    RDenominator, ScoreEstimate, DEFAULT_EPSILON, DEFAULT_REPLICATES, DEFAULT_TAIL_BOUND,
};
use geoscore_core::{AggregateProfile, AreaPopulation, ClassScoreScale, EffortWeights, WeightPreset};

use crate::error::{InputError, Result};
use crate::io::{self, Outcome, PopulationTable, TotalPolicy};
use crate::parallel;
use crate::report::{Cell, Format, Table};

/// Exit status when `validate` finds problems.
pub const EXIT_ISSUES: i32 = 1;
/// Exit status for any error.
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "geoscore", version, about = "Geometric scoring of graded assessment outcomes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Weighted path distance of each aggregate's observed outcome.
    Delta(DeltaArgs),
    /// Monte-Carlo geometric score of each aggregate.
    Score(ScoreArgs),
    /// R score and geometric score rankings side by side.
    Rank(RankArgs),
    /// Replicates needed for a Hoeffding error bound.
    Nreps(NrepsArgs),
    /// Check input files and list every problem found.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PopulationArgs {
    #[arg(long)]
    pub population: PathBuf,
    /// Accept rows whose class counts disagree with expected_total, using
    /// the count sum and printing a warning per row.
    #[arg(long)]
    pub trust_counts: bool,
}

#[derive(Debug, Args)]
pub struct WeightArgs {
    /// Preset A, B or C, or a comma list such as 1,1,1.5,1. Repeatable.
    /// Defaults to A, B and C for five classes and unit weights otherwise.
    #[arg(long = "weights")]
    pub weights: Vec<String>,
}

#[derive(Debug, Args)]
pub struct DeltaArgs {
    #[arg(long)]
    pub outcomes: PathBuf,
    /// Optional population whose class labels the outcomes must match.
    #[arg(long)]
    pub population: Option<PathBuf>,
    #[command(flatten)]
    pub weights: WeightArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub population: PopulationArgs,
    #[arg(long)]
    pub profiles: PathBuf,
    #[arg(long)]
    pub outcomes: PathBuf,
    #[command(flatten)]
    pub weights: WeightArgs,
    /// Replicate count, or `auto` to size it from --epsilon and --tail-bound.
    #[arg(long, default_value_t = Replicates::Fixed(DEFAULT_REPLICATES))]
    pub replicates: Replicates,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_TAIL_BOUND)]
    pub tail_bound: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, env = "GEOSCORE_THREADS")]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[command(flatten)]
    pub score: ScoreArgs,
    #[arg(long, value_enum, default_value_t = Denominator::StratumWeighted)]
    pub r_denominator: Denominator,
    /// Class scores, best first, as a comma list. Defaults to 1,0.7,0.4,0.1,0.
    #[arg(long)]
    pub scale: Option<String>,
}

#[derive(Debug, Args)]
pub struct NrepsArgs {
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_TAIL_BOUND)]
    pub tail_bound: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub population: PathBuf,
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    #[arg(long)]
    pub outcomes: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Denominator {
    Area,
    StratumWeighted,
}

impl From<Denominator> for RDenominator {
    fn from(d: Denominator) -> Self {
        match d {
            Denominator::Area => RDenominator::Area,
            Denominator::StratumWeighted => RDenominator::StratumWeighted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Replicates {
    Fixed(u64),
    Auto,
}

impl FromStr for Replicates {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Replicates::Auto);
        }
        match s.parse::<u64>() {
            Ok(0) | Err(_) => Err(format!("`{s}` is neither `auto` nor a positive integer")),
            Ok(n) => Ok(Replicates::Fixed(n)),
        }
    }
}

impl std::fmt::Display for Replicates {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Replicates::Fixed(n) => write!(f, "{n}"),
            Replicates::Auto => f.write_str("auto"),
        }
    }
}

/// Parses `A`, `b`, or `1,1,1.5,1`.
pub fn parse_weights(spec: &str) -> Result<EffortWeights> {
    if let Ok(preset) = WeightPreset::from_str(spec) {
        return Ok(preset.weights());
    }
    let values = parse_list(spec, "weights")?;
    Ok(EffortWeights::new(values)?)
}

fn parse_list(spec: &str, what: &str) -> Result<Vec<f64>> {
    spec.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| InputError::Usage(format!("{what}: `{spec}` is not a preset or a comma list of numbers")))
        })
        .collect()
}

fn resolve_weights(args: &WeightArgs, classes: usize) -> Result<Vec<EffortWeights>> {
    let weights: Vec<EffortWeights> = if args.weights.is_empty() {
        if classes == 5 {
            WeightPreset::ALL.iter().map(|p| p.weights()).collect()
        } else {
            vec![EffortWeights::unit(classes)?]
        }
    } else {
        args.weights.iter().map(|s| parse_weights(s)).collect::<Result<_>>()?
    };
    for w in &weights {
        if w.classes() != classes {
            return Err(InputError::Usage(format!(
                "weights {} have {} entries, the data has {} classes so {} are needed",
                weights_label(w),
                w.classes() - 1,
                classes,
                classes - 1
            )));
        }
    }
    Ok(weights)
}

fn file_name(path: &Path) -> String {
    path.display().to_string()
}

fn load_population(args: &PopulationArgs, stderr: &mut dyn Write) -> Result<AreaPopulation> {
    let name = file_name(&args.population);
    let table = PopulationTable::read(&name, io::open(&args.population)?)?;
    let policy = if args.trust_counts {
        TotalPolicy::TrustCounts
    } else {
        TotalPolicy::Strict
    };
    let (pop, discrepancies) = table.into_population(policy)?;
    for d in discrepancies {
        writeln!(
            stderr,
            "warning: {name}:{}: stratum `{}` counts sum to {}, printed total {}; using {}",
            d.line, d.stratum, d.count_sum, d.printed_total, d.count_sum
        )?;
    }
    Ok(pop)
}

fn load_outcomes(path: &Path, labels: Option<&[String]>) -> Result<Vec<Outcome>> {
    io::load_outcomes(&file_name(path), io::open(path)?, labels)
}

fn load_scored_inputs(args: &ScoreArgs, stderr: &mut dyn Write) -> Result<(AreaPopulation, Vec<AggregateProfile>)> {
    let pop = load_population(&args.population, stderr)?;
    let mut profiles = io::load_profiles(&file_name(&args.profiles), io::open(&args.profiles)?, &pop)?;
    let outcomes = load_outcomes(&args.outcomes, Some(pop.class_labels()))?;
    io::attach_outcomes(&file_name(&args.outcomes), &mut profiles, outcomes, &pop)?;
    if let Some(missing) = profiles.iter().find(|p| p.observed().is_none()) {
        return Err(InputError::Usage(format!(
            "{}: no outcome row for aggregate `{}`",
            file_name(&args.outcomes),
            missing.id()
        )));
    }
    Ok((pop, profiles))
}

fn replicate_count(args: &ScoreArgs) -> Result<u64> {
    match args.replicates {
        Replicates::Fixed(n) => Ok(n),
        Replicates::Auto => Ok(hoeffding_replicates(args.epsilon, args.tail_bound)?),
    }
}

/// Scores every profile under every weight vector. The outer vector follows
/// the weights, the inner one the profiles.
fn estimates(
    args: &ScoreArgs,
    pop: &AreaPopulation,
    profiles: &[AggregateProfile],
    weights: &[EffortWeights],
    replicates: u64,
) -> Result<Vec<Vec<ScoreEstimate>>> {
    let pool = parallel::pool(args.threads)?;
    weights
        .iter()
        .map(|w| {
            profiles
                .iter()
                .map(|p| {
                    let scorer = GeometricScorer::new(p, pop, w)?;
                    Ok(parallel::estimate(&pool, &scorer, args.seed, replicates))
                })
                .collect()
        })
        .collect()
}

fn emit(table: &Table, out: &OutputArgs, stdout: &mut dyn Write) -> Result<()> {
    match &out.output {
        Some(path) => {
            let file = File::create(path).map_err(|source| InputError::Open {
                path: path.clone(),
                source,
            })?;
            let mut w = BufWriter::new(file);
            table.write(out.format, &mut w)?;
            w.flush()?;
            Ok(())
        }
        None => table.write(out.format, stdout),
    }
}

pub fn cmd_delta(args: &DeltaArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let labels = match &args.population {
        Some(path) => {
            let pop = load_population(
                &PopulationArgs {
                    population: path.clone(),
                    trust_counts: true,
                },
                stderr,
            )?;
            Some(pop.class_labels().to_vec())
        }
        None => None,
    };
    let outcomes = load_outcomes(&args.outcomes, labels.as_deref())?;
    let classes = match (&labels, outcomes.first()) {
        (Some(l), _) => l.len(),
        (None, Some(o)) => o.counts.classes(),
        (None, None) => 5,
    };
    let weights = resolve_weights(&args.weights, classes)?;
    let mut table = Table::new(["aggregate", "weights", "delta"]);
    for o in &outcomes {
        for w in &weights {
            let d = w.delta_counts(o.counts.as_slice())?;
            table.push(vec![o.aggregate.as_str().into(), weights_label(w).into(), d.into()])?;
        }
    }
    emit(&table, &args.output, stdout)
}

pub fn cmd_score(args: &ScoreArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let (pop, profiles) = load_scored_inputs(args, stderr)?;
    let weights = resolve_weights(&args.weights, pop.classes())?;
    let replicates = replicate_count(args)?;
    let half_width = hoeffding_half_width(replicates, args.tail_bound)?;
    let all = estimates(args, &pop, &profiles, &weights, replicates)?;
    let mut table = Table::new([
        "aggregate",
        "weights",
        "products",
        "delta",
        "worse",
        "replicates",
        "geo_score",
        "half_width",
        "tail_bound",
        "seed",
    ]);
    // input order: aggregate first, then weights
    for (i, p) in profiles.iter().enumerate() {
        for per_weight in &all {
            let e = &per_weight[i];
            table.push(vec![
                e.aggregate_id.as_str().into(),
                e.weights_preset.as_str().into(),
                p.total_demand().into(),
                e.delta_value.into(),
                e.worse.into(),
                e.replicates.into(),
                e.geo_score.into(),
                half_width.into(),
                args.tail_bound.into(),
                e.master_seed.into(),
            ])?;
        }
    }
    emit(&table, &args.output, stdout)
}

pub fn cmd_rank(args: &RankArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let score = &args.score;
    let (pop, profiles) = load_scored_inputs(score, stderr)?;
    let weights = resolve_weights(&score.weights, pop.classes())?;
    let scale = match &args.scale {
        Some(spec) => ClassScoreScale::new(parse_list(spec, "scale")?)?,
        None => ClassScoreScale::vqr(),
    };
    let r_scores = profiles
        .iter()
        .map(|p| engine::r_score_with(p, &pop, &scale, args.r_denominator.into()))
        .collect::<geoscore_core::Result<Vec<f64>>>()?;
    let replicates = replicate_count(score)?;
    let all = estimates(score, &pop, &profiles, &weights, replicates)?;
    let tables = all
        .iter()
        .map(|e| engine::rank(e, &r_scores))
        .collect::<geoscore_core::Result<Vec<_>>>()?;

    let mut headers: Vec<String> = vec!["aggregate".into(), "R".into(), "R_rank".into()];
    for w in &weights {
        let l = weights_label(w);
        headers.extend([format!("delta_{l}"), format!("geo_score_{l}"), format!("geo_rank_{l}")]);
    }
    let mut table = Table::new(headers);
    let lookup: Vec<BTreeMap<&str, &engine::RankRow>> = tables
        .iter()
        .map(|t| t.rows.iter().map(|r| (r.aggregate_id.as_str(), r)).collect())
        .collect();
    // every table shares the R ordering, so the first one fixes row order
    for row in &tables[0].rows {
        let mut cells: Vec<Cell> = vec![row.aggregate_id.as_str().into(), row.r_score.into(), row.r_rank.into()];
        for by_id in &lookup {
            let r = by_id[row.aggregate_id.as_str()];
            cells.extend([r.delta_value.into(), r.geo_score.into(), r.geo_rank.into()]);
        }
        table.push(cells)?;
    }
    emit(&table, &score.output, stdout)
}

pub fn cmd_nreps(args: &NrepsArgs, stdout: &mut dyn Write) -> Result<()> {
    let n = hoeffding_replicates(args.epsilon, args.tail_bound)?;
    let mut table = Table::new(["epsilon", "tail_bound", "replicates", "achieved_bound"]);
    table.push(vec![
        args.epsilon.into(),
        args.tail_bound.into(),
        n.into(),
        hoeffding_bound(n, args.epsilon).into(),
    ])?;
    emit(&table, &args.output, stdout)
}

/// Lists every problem on stdout. Returns the number found.
pub fn cmd_validate(args: &ValidateArgs, stdout: &mut dyn Write) -> Result<usize> {
    let name = file_name(&args.population);
    let table = PopulationTable::read(&name, io::open(&args.population)?)?;
    let mut issues: Vec<String> = table.issues().iter().map(ToString::to_string).collect();
    // keep checking the other files against the count sums so one bad row
    // does not hide the rest
    let pop = table.into_population(TotalPolicy::TrustCounts).ok().map(|(p, _)| p);
    let mut profiles = None;
    if let (Some(path), Some(pop)) = (&args.profiles, &pop) {
        match io::load_profiles(&file_name(path), io::open(path)?, pop) {
            Ok(p) => profiles = Some(p),
            Err(e) => issues.push(e.to_string()),
        }
    }
    if let Some(path) = &args.outcomes {
        match load_outcomes(path, pop.as_ref().map(|p| p.class_labels())) {
            Ok(outcomes) => {
                if let (Some(profiles), Some(pop)) = (profiles.as_mut(), &pop) {
                    if let Err(e) = io::attach_outcomes(&file_name(path), profiles, outcomes, pop) {
                        issues.push(e.to_string());
                    }
                }
            }
            Err(e) => issues.push(e.to_string()),
        }
    }
    for issue in &issues {
        writeln!(stdout, "{issue}")?;
    }
    if issues.is_empty() {
        let strata = pop.as_ref().map_or(0, |p| p.strata().len());
        writeln!(stdout, "{name}: ok, {strata} strata")?;
    }
    Ok(issues.len())
}

/// Runs the command line `args` (program name first) and returns the exit
/// status.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                return EXIT_ERROR;
            }
            let _ = write!(stdout, "{text}");
            return 0;
        }
    };
    let outcome = match &cli.command {
        Command::Delta(a) => cmd_delta(a, stdout, stderr).map(|_| 0),
        Command::Score(a) => cmd_score(a, stdout, stderr).map(|_| 0),
        Command::Rank(a) => cmd_rank(a, stdout, stderr).map(|_| 0),
        Command::Nreps(a) => cmd_nreps(a, stdout).map(|_| 0),
        Command::Validate(a) => cmd_validate(a, stdout).map(|n| if n == 0 { 0 } else { EXIT_ISSUES }),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_ERROR
        }
    }
}
