//! Command-line front end. Every subcommand writes tidy CSV plus a
//! `manifest.txt` into the output directory.
//!
//! Exit status: 0 on success, 1 when a theory check fails, 2 on a
//! configuration error, 3 on any other failure.

mod config;
mod manifest;

use std::fs;
use std::io::BufWriter;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};

pub use config::{FileConfig, Values};
pub use manifest::{config_digest, RunManifest};

use crate::attacks::{train_meta_with, train_shadows, AttackMode, AttackReport, AttackTask};
use crate::datagen::{DistributionFamily, ExpAParams, FeatureSampler, IndexSet};
use crate::error::{Error, Result};
use crate::experiments::{
    membership_trainer, run, write_results_csv, ExperimentConfig, ExperimentName, ModelVariant, ResultRow,
};
use crate::game::{advantage, d_zero, play_game, DistanceKind, TrainerConfig};
use crate::numerics::SeededRng;
use crate::theory::{run_subsampling, run_theory, write_report_csv, CheckRow, Outcome, TheoryConfig};

#[derive(Debug, Parser)]
#[command(name = "distleak", version, about = "Distribution inference experiments and leakage checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Configuration file (TOML sections of key = value lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides `[run] seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, created when missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Overrides the trial count of the subcommand.
    #[arg(long, global = true)]
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Attack accuracy over the teacher perturbation grid.
    #[command(name = "expA")]
    ExpA,
    /// Attack accuracy over early-stopping targets at a fixed perturbation.
    #[command(name = "expA-earlystop")]
    ExpAEarlystop,
    /// Attacks on shifted-feature data over early-stopping targets.
    #[command(name = "expB")]
    ExpB,
    /// Attacks on shifted-feature data over training-set sizes.
    #[command(name = "expC")]
    ExpC,
    /// Distributional membership inference against ERM, causal ERM and IRM.
    #[command(name = "membership")]
    Membership,
    /// Least-squares leakage checks and the subsampling gap.
    #[command(name = "theory")]
    Theory,
    /// Subsampling gap only.
    #[command(name = "subsampling")]
    Subsampling,
    /// One distribution inference game with a shadow-model adversary.
    #[command(name = "game")]
    Game,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::ExpA => "expA",
            Command::ExpAEarlystop => "expA-earlystop",
            Command::ExpB => "expB",
            Command::ExpC => "expC",
            Command::Membership => "membership",
            Command::Theory => "theory",
            Command::Subsampling => "subsampling",
            Command::Game => "game",
        }
    }
}

/// Parses `args` (program name first), runs, and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let command_line = args.iter().map(|a| a.to_string_lossy().into_owned()).collect::<Vec<_>>().join(" ");
    match execute(&cli, &command_line) {
        Ok(passed) => {
            if passed {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidConfiguration(_) | Error::InvalidParameter(_) | Error::Parse(_) => 2,
        _ => 3,
    }
}

/// Runs one subcommand; `Ok(false)` means a theory check failed.
pub fn execute(cli: &Cli, command_line: &str) -> Result<bool> {
    let start = unix_now();
    let (file, bytes) = match &cli.config {
        Some(path) => {
            let bytes = fs::read(path).map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
            let text = std::str::from_utf8(&bytes).map_err(|_| Error::config("config file is not UTF-8"))?;
            (FileConfig::parse(text)?, bytes)
        }
        None => (FileConfig::default(), Vec::new()),
    };
    let seed = cli.seed.or(file.run.seed).unwrap_or(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| Error::config(format!("threads: {e}")))?;
    let (outputs, passed) = pool.install(|| dispatch(cli, &file, seed))?;
    fs::create_dir_all(&cli.out)?;
    let mut written = Vec::new();
    for (name, contents) in &outputs {
        fs::write(cli.out.join(name), contents)?;
        written.push(name.clone());
    }
    let manifest = RunManifest {
        command_line: command_line.to_string(),
        subcommand: cli.command.as_str().to_string(),
        config_path: cli.config.as_ref().map(|p| p.display().to_string()),
        config_digest: config_digest(&bytes),
        master_seed: seed,
        threads: cli.threads,
        version: env!("CARGO_PKG_VERSION").to_string(),
        start_unix: start,
        end_unix: unix_now(),
        outputs: written,
    };
    manifest.write(&cli.out.join("manifest.txt"))?;
    Ok(passed)
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

type Outputs = Vec<(String, Vec<u8>)>;

fn dispatch(cli: &Cli, file: &FileConfig, seed: u64) -> Result<(Outputs, bool)> {
    match cli.command {
        Command::Theory | Command::Subsampling => {
            let config = theory_config(file, cli.trials)?;
            let rng = SeededRng::new(seed, 0);
            let (rows, name) = if cli.command == Command::Theory {
                (run_theory(&config, &rng)?, "theory.csv")
            } else {
                (run_subsampling(&config, &rng)?, "subsampling.csv")
            };
            let passed = rows.iter().all(|r| r.outcome != Outcome::Fail);
            Ok((vec![(name.to_string(), check_csv(&rows)?)], passed))
        }
        Command::Game => {
            let config = experiment_config(Command::ExpA, file, cli.trials, seed)?;
            let (trials_csv, rows) = run_game(file, &config)?;
            Ok((vec![("game.csv".into(), trials_csv), ("results.csv".into(), results_csv(&rows)?)], true))
        }
        cmd => {
            let config = experiment_config(cmd, file, cli.trials, seed)?;
            let outcome = run(&config)?;
            Ok((vec![("results.csv".into(), results_csv(&outcome.rows())?)], true))
        }
    }
}

fn check_csv(rows: &[CheckRow]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_report_csv(rows, BufWriter::new(&mut buf))?;
    Ok(buf)
}

fn results_csv(rows: &[ResultRow]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_results_csv(rows, BufWriter::new(&mut buf))?;
    Ok(buf)
}

fn parse_key<T: std::str::FromStr<Err = Error>>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|e: Error| Error::config(format!("{key}: {e}")))
}

fn positive(key: &str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::config(format!("{key}: must be > 0, got {value}")))
    }
}

/// Experiment configuration for a subcommand: defaults, then the file, then flags.
pub fn experiment_config(cmd: Command, file: &FileConfig, trials: Option<usize>, seed: u64) -> Result<ExperimentConfig> {
    let name = match cmd {
        Command::ExpA | Command::Game => ExperimentName::ExpAEpsSweep,
        Command::ExpAEarlystop => ExperimentName::ExpAMseSweep,
        Command::ExpB => ExperimentName::ExpBMseSweep,
        Command::ExpC => ExperimentName::ExpCSizeSweep,
        Command::Membership => ExperimentName::Membership,
        Command::Theory | Command::Subsampling => {
            return Err(Error::config(format!("{} is not an attack experiment", cmd.as_str())))
        }
    };
    let mut c = ExperimentConfig::new(name);
    c.seed = seed;
    if let Some(t) = file.run.trials {
        c.trials = t;
    }
    let a = &file.attack;
    if let Some(v) = a.shadows {
        c.shadows = v;
    }
    if let Some(v) = a.meta_l2 {
        c.meta_l2 = v;
    }
    if let Some(modes) = &a.modes {
        c.modes = modes.iter().map(|m| parse_key("modes", m)).collect::<Result<_>>()?;
    }
    let t = &file.training;
    if let Some(v) = t.learning_rate {
        c.learning_rate = v;
    }
    if let Some(v) = t.batch_size {
        c.batch_size = v;
    }
    if let Some(v) = t.epochs {
        c.epochs = v;
    }
    if let Some(v) = t.max_epochs {
        c.max_epochs = v;
    }
    if let Some(v) = &t.hidden {
        c.hidden = v.clone();
    }
    if let Some(v) = t.n {
        c.n = v;
    }
    if let Some(v) = t.teacher_seed {
        c.teacher_seed = v;
    }
    match name {
        ExperimentName::ExpAEpsSweep => {
            if let Some(v) = &file.exp_a.eps {
                c.sweep = v.to_vec();
            }
        }
        ExperimentName::ExpAMseSweep => {
            let s = &file.exp_a_earlystop;
            if let Some(v) = s.eps {
                c.eps = v;
            }
            if let Some(v) = &s.target_mse {
                c.sweep = v.to_vec();
            }
        }
        ExperimentName::ExpBMseSweep => {
            let s = &file.exp_b;
            if let Some(v) = &s.target_mse {
                c.sweep = v.to_vec();
            }
            if let Some(v) = &s.task {
                c.task = parse_key("task", v)?;
            }
        }
        ExperimentName::ExpCSizeSweep => {
            let s = &file.exp_c;
            if let Some(v) = &s.sizes {
                c.sweep = v.to_vec();
            }
            if let Some(v) = &s.task {
                c.task = parse_key("task", v)?;
            }
        }
        ExperimentName::Membership => {
            let s = &file.membership;
            let m = &mut c.membership;
            if let Some(v) = s.parties {
                m.parties = v;
            }
            if let Some(v) = s.records_per_party {
                m.records_per_party = v;
            }
            if let Some(v) = s.target_party {
                m.target_party = v;
            }
            if let Some(v) = s.target_models {
                m.target_models = v;
            }
            if let Some(v) = s.eval_records_per_party {
                m.eval_records_per_party = v;
            }
            if let Some(v) = &s.variants {
                m.variants = v.iter().map(|x| parse_key::<ModelVariant>("variants", x)).collect::<Result<_>>()?;
            }
            if let Some(v) = &s.hidden {
                m.hidden = v.clone();
            }
            if let Some(v) = s.epochs {
                m.epochs = v;
            }
            if let Some(v) = s.irm_penalty {
                m.irm_penalty = v;
            }
            if let Some(v) = s.irm_warmup_epochs {
                m.irm_warmup_epochs = v;
            }
            if let Some(v) = s.attacks {
                c.trials = v;
            }
            c.sweep = vec![m.target_party as f64];
        }
    }
    if let Some(v) = trials {
        c.trials = v;
    }
    c.validate()?;
    Ok(c)
}

/// Theory settings from the `[theory]` and `[subsampling]` sections.
pub fn theory_config(file: &FileConfig, trials: Option<usize>) -> Result<TheoryConfig> {
    let mut c = TheoryConfig::default();
    let t = &file.theory;
    if let Some(v) = t.trials {
        c.setup.trials = v;
    }
    if let Some(v) = t.reason1_trials {
        c.reason1_trials = v;
    }
    if let Some(v) = trials {
        c.setup.trials = v;
        c.reason1_trials = v;
    }
    if c.setup.trials < 100 || c.reason1_trials < 100 {
        return Err(Error::config("trials: at least 100 Monte Carlo trials are required"));
    }
    if let Some(v) = t.n {
        if v < 2 {
            return Err(Error::config(format!("n: at least 2 records are required, got {v}")));
        }
        c.setup.n = v;
    }
    if let Some(v) = t.noise_variance {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::config(format!("noise_variance: must be >= 0, got {v}")));
        }
        c.setup.noise_variance = v;
    }
    if let Some(v) = t.scale {
        c.scale = positive("scale", v)?;
    }
    if let Some(v) = &t.beta1 {
        match v.as_slice() {
            [a, b] => c.beta1_pair = (*a, *b),
            _ => return Err(Error::config("beta1: expected two slopes")),
        }
    }
    if t.feature_mean.is_some() || t.feature_variance.is_some() {
        let variance = t.feature_variance.unwrap_or(1.0);
        if !(variance >= 0.0 && variance.is_finite()) {
            return Err(Error::config(format!("feature_variance: must be >= 0, got {variance}")));
        }
        c.setup.feature_sampler = FeatureSampler::Normal { mean: t.feature_mean.unwrap_or(1.0), variance };
    }
    let s = &file.subsampling;
    for (key, value) in [("p0", s.p0), ("p1", s.p1)] {
        if let Some(v) = value {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("{key}: must lie in [0, 1], got {v}")));
            }
        }
    }
    if let Some(v) = s.p0 {
        c.p0 = v;
    }
    if let Some(v) = s.p1 {
        c.p1 = v;
    }
    if let Some(v) = s.n {
        if v == 0 {
            return Err(Error::config("n: subsample size must be at least 1"));
        }
        c.subsample_n = v;
    }
    Ok(c)
}

/// Plays one game: a shadow-model meta-model against freshly trained targets.
fn run_game(file: &FileConfig, base: &ExperimentConfig) -> Result<(Vec<u8>, Vec<ResultRow>)> {
    let g = &file.game;
    let family_name = g.family.as_deref().unwrap_or("expA");
    let task: AttackTask = match &g.task {
        Some(t) => parse_key("task", t)?,
        None if family_name == "expB" => AttackTask::Regress,
        None => AttackTask::Classify,
    };
    let mode: AttackMode = parse_key("mode", g.mode.as_deref().unwrap_or("blackbox"))?;
    let distance = match g.distance.as_deref().unwrap_or("absolute") {
        "absolute" => DistanceKind::Absolute,
        "squared" => DistanceKind::Squared,
        other => return Err(Error::config(format!("distance: unknown distance {other:?}"))),
    };
    let eps = g.eps.unwrap_or(base.eps);
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::config(format!("eps: perturbation must be finite and >= 0, got {eps}")));
    }
    let (family, trainer): (DistributionFamily, TrainerConfig) = match family_name {
        "expA" => (
            DistributionFamily::exp_a(ExpAParams { weight_noise_std: eps, teacher_seed: base.teacher_seed, n: base.n })?,
            TrainerConfig::erm(base.hidden.clone(), base.options(None)),
        ),
        "expB" => {
            let index = if task == AttackTask::Regress { IndexSet::Interval } else { IndexSet::Binary };
            (
                DistributionFamily::exp_b(base.teacher_seed, base.n, index),
                TrainerConfig::erm(base.hidden.clone(), base.options(None)),
            )
        }
        "membership" => {
            let mut m = ExperimentConfig::new(ExperimentName::Membership);
            m.learning_rate = base.learning_rate;
            m.batch_size = base.batch_size;
            let parties = (0..m.membership.parties)
                .map(|i| crate::datagen::PartySpec {
                    party_index: i,
                    records_per_party: m.membership.records_per_party,
                    inverted_correlation: false,
                })
                .collect();
            (
                DistributionFamily::membership(parties, m.membership.target_party)?,
                membership_trainer(&m, ModelVariant::ErmFull),
            )
        }
        other => return Err(Error::config(format!("family: unknown family {other:?}"))),
    };
    if task == AttackTask::Regress && family.index_set() != IndexSet::Interval {
        return Err(Error::config(format!("task: {family_name} has a binary index; use classify")));
    }
    let rng = SeededRng::new(base.seed, 0).derive("game", 0);
    let shadows = train_shadows(&family, &trainer, base.shadows, task, &rng)?;
    let meta = train_meta_with(&shadows.corpus(mode)?, base.meta_l2)?;
    let trials = play_game(&family, &trainer, &meta, &distance, base.trials, &rng)?;
    let d0 = d_zero(family.index_set(), &distance)?;
    let adv = advantage(&trials, d0)?;
    let mut csv = String::from("ordinal,r,r_hat,distance\n");
    for t in &trials {
        csv.push_str(&format!("{},{:?},{:?},{:?}\n", t.ordinal, t.true_r, t.guess_r, t.distance));
    }
    let n = trials.len();
    let row = |metric: &str, value: f64, ci95: f64| ResultRow {
        experiment: "game".into(),
        variant: family_name.to_string(),
        sweep_param: if family_name == "expA" { "eps" } else { "none" }.into(),
        sweep_value: if family_name == "expA" { eps } else { f64::NAN },
        attack_mode: mode.to_string(),
        task: task.to_string(),
        metric: metric.to_string(),
        value,
        ci95,
        n,
    };
    let mut rows = vec![
        row("d0", d0, 0.0),
        row("mean_distance", adv.mean_distance, adv.ci95_halfwidth),
        row("advantage", adv.advantage, adv.ci95_halfwidth),
    ];
    if distance == DistanceKind::Absolute {
        let report = AttackReport::from_trials(task, d0, trials)?;
        rows.push(row(report.metric(), report.value, report.ci95_halfwidth));
    }
    Ok((csv.into_bytes(), rows))
}
