mod input;
mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pbcert::charroots::{count_roots_right_of, RootCount};
use pbcert::ddesim::{detect_limit, integrate, DdeProblem, DetectConfig, GoodwinRhs, OrbitVerdict, Section};
use pbcert::freqcheck::{
    check_circle_condition_with, check_gain_condition_with, FreqError, FrequencySweepReport, SweepConfig, SystemLine,
};
use pbcert::goodwin::{classify_point, stationary_point, sweep_region, AxisRange, ClassifyConfig, Label, PointClassification, Reason, RegionSummary};
use pbcert::parabolic::{spectral_gap_check, GapReport};
use serde::Serialize;
use thiserror::Error;

use input::{read_parabolic, read_system, GoodwinInput, LurjeInput, SystemInput};
use report::{certified_ledger, HypothesisLedger, HypothesisWitness, Outcome, Report};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid value for '{field}': {message}")]
    Invalid { field: String, message: String },
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Parser)]
#[command(name = "pbcert", version, about = "Certify frequency-domain conditions for delay equations in Lur'e form")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Input JSON document.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// τ axis as start:end:count.
    #[arg(long, global = true, default_value = "0.05:3:120")]
    tau_range: String,
    /// λ axis as start:end:count.
    #[arg(long, global = true, default_value = "0.05:1.5:120")]
    lambda_range: String,
    /// Lur'e shifts to try instead of the default scan.
    #[arg(long, global = true, value_delimiter = ',')]
    rho_set: Option<Vec<f64>>,
    /// Values of β to try.
    #[arg(long, global = true, value_delimiter = ',')]
    beta_set: Option<Vec<f64>>,
    /// Worker threads.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Absolute safety margin for strict frequency inequalities.
    #[arg(long, global = true, default_value_t = 1e-6)]
    margin: f64,
    /// Simulation horizon (default 500τ).
    #[arg(long, global = true)]
    horizon: Option<f64>,
    /// Requested integration step (default τ/50).
    #[arg(long, global = true)]
    step: Option<f64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Check dichotomy and frequency conditions for a generic Lur'e system.
    CertifyDelay,
    /// Classify one Goodwin parameter point.
    GoodwinCheck,
    /// Classify a (τ, λ) lattice and draw the region chart.
    GoodwinRegion,
    /// Integrate the Goodwin system and detect its limit behaviour.
    Simulate,
    /// Spectral gap condition for a diagonal parabolic model.
    ParabolicGap,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::CertifyDelay => "certify-delay",
            Command::GoodwinCheck => "goodwin-check",
            Command::GoodwinRegion => "goodwin-region",
            Command::Simulate => "simulate",
            Command::ParabolicGap => "parabolic-gap",
        }
    }
}

/// Configuration echoed into every report.
#[derive(Debug, Clone, Serialize)]
pub struct RunEcho {
    command: &'static str,
    input: Option<String>,
    out: String,
    tau_range: Option<AxisRange>,
    lambda_range: Option<AxisRange>,
    rho_set: Option<Vec<f64>>,
    beta_set: Vec<f64>,
    workers: usize,
    margin: f64,
    horizon: Option<f64>,
    step: Option<f64>,
}

fn invalid(field: &str, message: impl Into<String>) -> CliError {
    CliError::Invalid { field: field.into(), message: message.into() }
}

struct Run {
    cli: Cli,
    echo: RunEcho,
    classify: ClassifyConfig,
}

impl Run {
    fn new(cli: Cli) -> Result<Self, CliError> {
        let workers = cli.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        if workers == 0 {
            return Err(invalid("--workers", "must be at least 1"));
        }
        if !(cli.margin.is_finite() && cli.margin > 0.0) {
            return Err(invalid("--margin", "must be positive"));
        }
        for (name, v) in [("--horizon", cli.horizon), ("--step", cli.step)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(invalid(name, "must be positive"));
                }
            }
        }
        if let Some(set) = &cli.rho_set {
            if set.is_empty() || set.iter().any(|r| !r.is_finite()) {
                return Err(invalid("--rho-set", "must be a non-empty list of finite values"));
            }
        }
        let mut classify = ClassifyConfig { rho_set: cli.rho_set.clone(), ..ClassifyConfig::default() };
        if let Some(set) = &cli.beta_set {
            if set.is_empty() || set.iter().any(|b| !(b.is_finite() && *b > 1.0)) {
                return Err(invalid("--beta-set", "values must exceed 1"));
            }
            classify.beta_set = set.clone();
        }
        classify.sweep.safety_margin = cli.margin;

        let region = matches!(cli.command, Command::GoodwinRegion);
        let axis = |s: &str, field: &str| s.parse::<AxisRange>().map_err(|e| invalid(field, e.to_string()));
        let (tau_range, lambda_range) = if region {
            (Some(axis(&cli.tau_range, "--tau-range")?), Some(axis(&cli.lambda_range, "--lambda-range")?))
        } else {
            (None, None)
        };
        let echo = RunEcho {
            command: cli.command.name(),
            input: cli.input.as_ref().map(|p| p.display().to_string()),
            out: cli.out.display().to_string(),
            tau_range,
            lambda_range,
            rho_set: cli.rho_set.clone(),
            beta_set: classify.beta_set.clone(),
            workers,
            margin: cli.margin,
            horizon: cli.horizon,
            step: cli.step,
        };
        Ok(Self { cli, echo, classify })
    }

    fn input(&self) -> Result<&Path, CliError> {
        self.cli.input.as_deref().ok_or_else(|| invalid("--input", "this command needs an input file"))
    }

    fn goodwin_input(&self) -> Result<GoodwinInput, CliError> {
        match read_system(self.input()?)? {
            SystemInput::Goodwin(g) => {
                g.validate()?;
                Ok(g)
            }
            SystemInput::Lurje(_) => Err(invalid("system", "this command expects a goodwin system")),
        }
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        fs::create_dir_all(&self.cli.out)?;
        fs::write(self.cli.out.join(name), contents)?;
        Ok(())
    }

    fn finish<R: Serialize>(&self, outcome: Outcome, result: R) -> Result<Outcome, CliError> {
        let report = Report::new(self.echo.command, self.echo.clone(), outcome, result);
        let json = serde_json::to_string_pretty(&report).expect("reports serialize");
        self.write("report.json", &(json + "\n"))?;
        Ok(outcome)
    }

    fn execute(&self) -> Result<Outcome, CliError> {
        match self.cli.command {
            Command::CertifyDelay => self.certify_delay(),
            Command::GoodwinCheck => self.goodwin_check(),
            Command::GoodwinRegion => self.goodwin_region(),
            Command::Simulate => self.simulate(),
            Command::ParabolicGap => self.parabolic_gap(),
        }
    }

    fn certify_delay(&self) -> Result<Outcome, CliError> {
        let input: LurjeInput = match read_system(self.input()?)? {
            SystemInput::Lurje(l) => l,
            SystemInput::Goodwin(_) => return Err(invalid("system", "certify-delay expects a lurje system")),
        };
        let sys = input.build()?;
        let sweep = SweepConfig { safety_margin: self.cli.margin, ..SweepConfig::default() };

        let dichotomy = count_roots_right_of(sys.quasi_polynomial(), -input.nu);
        let gain = check_gain_condition_with(&sys, input.nu, &sweep);
        let circle = input.circle.map(|c| {
            SystemLine::new(&sys, input.nu).and_then(|line| check_circle_condition_with(&line, c.a, c.b, &sweep))
        });

        let count = dichotomy.as_ref().ok().map(|rc| rc.count);
        let passing = [gain.as_ref().ok(), circle.as_ref().and_then(|c| c.as_ref().ok())]
            .into_iter()
            .flatten()
            .filter(|r| r.passed)
            .max_by(|a, b| a.margin.total_cmp(&b.margin))
            .copied();
        let ledger = match (passing, count) {
            (Some(r), Some(c)) if c == input.j => certified_ledger(HypothesisWitness {
                nu: input.nu,
                j: input.j,
                margin: r.margin,
                condition: if r.threshold == 0.0 { "circle" } else { "gain" },
            }),
            _ => HypothesisLedger::new(),
        };

        let inconclusive_freq = |e: &FreqError| {
            matches!(e, FreqError::TailBoundUnavailable { .. } | FreqError::SingularAtP(_) | FreqError::PoleOnLine { .. })
        };
        let outcome = if !ledger.is_empty() {
            Outcome::Certified
        } else if dichotomy.is_err()
            || gain.as_ref().is_err_and(inconclusive_freq)
            || circle.as_ref().is_some_and(|c| c.as_ref().is_err_and(inconclusive_freq))
        {
            Outcome::Inconclusive
        } else {
            Outcome::Refuted
        };

        #[derive(Serialize)]
        struct CertifyResult {
            nu: f64,
            j: usize,
            root_count_method: &'static str,
            dichotomy: Option<RootCount>,
            dichotomy_error: Option<String>,
            gain: Option<FrequencySweepReport>,
            gain_error: Option<String>,
            circle: Option<FrequencySweepReport>,
            circle_error: Option<String>,
            hypotheses: HypothesisLedger,
        }
        let split = |r: Option<Result<FrequencySweepReport, FreqError>>| match r {
            Some(Ok(v)) => (Some(v), None),
            Some(Err(e)) => (None, Some(e.to_string())),
            None => (None, None),
        };
        let (gain, gain_error) = split(Some(gain));
        let (circle, circle_error) = split(circle);
        let (dichotomy, dichotomy_error) = match dichotomy {
            Ok(rc) => (Some(rc), None),
            Err(e) => (None, Some(e.to_string())),
        };
        self.finish(
            outcome,
            CertifyResult {
                nu: input.nu,
                j: input.j,
                root_count_method: "argument-principle",
                dichotomy,
                dichotomy_error,
                gain,
                gain_error,
                circle,
                circle_error,
                hypotheses: ledger,
            },
        )
    }

    fn goodwin_check(&self) -> Result<Outcome, CliError> {
        let g = self.goodwin_input()?;
        let point = classify_point(g.tau, g.lambda, &self.classify);
        let outcome = point_outcome(&point);

        #[derive(Serialize)]
        struct CheckResult {
            classification: PointClassification,
            stationary_point: [f64; 3],
            hypotheses: HypothesisLedger,
        }
        let hypotheses = point
            .witness
            .as_ref()
            .map(|w| {
                certified_ledger(HypothesisWitness { nu: g.lambda, j: 2, margin: w.circle.margin, condition: "circle" })
            })
            .unwrap_or_default();
        self.finish(
            outcome,
            CheckResult { stationary_point: stationary_point(g.lambda), classification: point, hypotheses },
        )
    }

    fn goodwin_region(&self) -> Result<Outcome, CliError> {
        let (tau, lambda) = (self.echo.tau_range.expect("parsed"), self.echo.lambda_range.expect("parsed"));
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.echo.workers)
            .build()
            .map_err(|e| invalid("--workers", e.to_string()))?;
        log::info!("classifying {} cells on {} workers", tau.count * lambda.count, self.echo.workers);
        let grid = pool.install(|| sweep_region(tau, lambda, &self.classify));
        self.write("region.csv", &grid.to_csv())?;
        self.write("region.svg", &grid.to_svg())?;

        #[derive(Serialize)]
        struct RegionResult {
            summary: RegionSummary,
            cells: usize,
            files: [&'static str; 2],
        }
        self.finish(
            Outcome::Completed,
            RegionResult { summary: grid.summary(), cells: grid.cells.len(), files: ["region.csv", "region.svg"] },
        )
    }

    fn simulate(&self) -> Result<Outcome, CliError> {
        let g = self.goodwin_input()?;
        let history = g.history()?;
        let prob = DdeProblem::new(GoodwinRhs { lambda: g.lambda }, g.tau, history)
            .map_err(|e| invalid("history", e.to_string()))?;
        let horizon = self.cli.horizon.unwrap_or(500.0 * g.tau);
        let step = self.cli.step.unwrap_or(g.tau / 50.0);
        let phi0 = stationary_point(g.lambda);
        let section = Section { component: 2, level: phi0[2] };
        let label = classify_point(g.tau, g.lambda, &self.classify).label;

        #[derive(Serialize)]
        struct SimulateResult {
            tau: f64,
            lambda: f64,
            step: Option<f64>,
            horizon: f64,
            nodes: usize,
            stationary_point: [f64; 3],
            section: Section,
            classification: Label,
            verdict: Option<OrbitVerdict>,
            error: Option<String>,
        }
        let mut result = SimulateResult {
            tau: g.tau,
            lambda: g.lambda,
            step: None,
            horizon,
            nodes: 0,
            stationary_point: phi0,
            section,
            classification: label,
            verdict: None,
            error: None,
        };
        match integrate(&prob, step, horizon) {
            Ok(traj) => {
                let mut csv = Vec::new();
                traj.write_csv(&mut csv)?;
                self.write("trajectory.csv", &String::from_utf8(csv).expect("csv is utf-8"))?;
                let verdict = detect_limit(&traj, &phi0, section, &DetectConfig::default());
                let outcome = match verdict {
                    OrbitVerdict::Inconclusive { .. } => Outcome::Inconclusive,
                    _ => Outcome::Completed,
                };
                result.step = Some(traj.step());
                result.nodes = traj.len();
                result.verdict = Some(verdict);
                self.finish(outcome, result)
            }
            Err(e) => {
                result.error = Some(e.to_string());
                self.finish(Outcome::Inconclusive, result)
            }
        }
    }

    fn parabolic_gap(&self) -> Result<Outcome, CliError> {
        let model = read_parabolic(self.input()?)?;
        let report: GapReport = spectral_gap_check(&model).map_err(|e| invalid("eigenvalues", e.to_string()))?;
        for w in &report.warnings {
            log::warn!("{w}");
        }
        let outcome = if report.passed { Outcome::Certified } else { Outcome::Refuted };
        self.finish(outcome, report)
    }
}

fn point_outcome(point: &PointClassification) -> Outcome {
    match (&point.label, &point.reason) {
        (Label::StablePoint | Label::StablePeriodicOrbit, _) => Outcome::Certified,
        (_, Reason::NoCandidate) => Outcome::Refuted,
        _ => Outcome::Inconclusive,
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    field: &'a str,
    message: String,
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: ErrorBody<'a>,
}

fn fail(field: &str, message: String) -> ExitCode {
    let kind = if field == "io" { "io" } else { "invalid-input" };
    let body = ErrorReport { error: ErrorBody { kind, field, message } };
    println!("{}", serde_json::to_string(&body).expect("error serializes"));
    ExitCode::from(1)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PBCERT_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return fail("arguments", e.to_string());
        }
    };
    let result = Run::new(cli).and_then(|run| run.execute());
    match result {
        Ok(outcome) => ExitCode::from(outcome.exit_code() as u8),
        Err(CliError::Invalid { field, message }) => fail(&field, message),
        Err(CliError::Io(e)) => fail("io", e.to_string()),
    }
}
