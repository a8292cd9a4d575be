//! `ionscope` command line: `pattern`, `search`, `verify`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::correlations::{pattern_over_slice, CorrelationOrder, Pattern};
use crate::error::{Error, Result};
use crate::inference::{run_search_experiment, SearchExperimentResult};
use crate::model::{
    ExcitationPulse, IonChain, ScanRange, SliceSpec, DEFAULT_GRID_POINTS, DEFAULT_SCAN_POINTS,
};
use crate::sampling::{normalize, sample_events, EventSet};

pub mod verify;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "IONSCOPE_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "ionscope",
    version,
    about = "Trapped-ion G1/G2 patterns and isotope search"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a correlation pattern over a slice and write it as CSV.
    Pattern(PatternArgs),
    /// Run a simulated isotope-search experiment and write a JSON report.
    Search(SearchArgs),
    /// Check every closed-form equivalence and invariant.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ChainArgs {
    /// Number of equally spaced ions.
    #[arg(long)]
    pub n: Option<usize>,
    /// Ion spacing in wavelengths.
    #[arg(long)]
    pub spacing: Option<f64>,
    /// Explicit ion positions in wavelengths, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub positions: Option<Vec<f64>>,
    /// JSON chain document.
    #[arg(long)]
    pub chain: Option<PathBuf>,
    /// 1-based position of the dark isotope.
    #[arg(long)]
    pub isotope: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SliceKind {
    Grid2d,
    FixedSecond,
    Opposite,
    OffsetMag,
    FixedSindelta,
}

#[derive(Debug, Clone, Args)]
pub struct SliceArgs {
    #[arg(long, value_enum)]
    pub slice: Option<SliceKind>,
    /// Fixed second-detector angle (fixed-second), radians.
    #[arg(long, allow_hyphen_values = true, value_parser = angle_arg)]
    pub phi2: Option<f64>,
    /// |phi1| - |phi2| (offset-mag), radians.
    #[arg(long, value_parser = angle_arg)]
    pub offset: Option<f64>,
    /// sin(phi1) - sin(phi2) (fixed-sindelta).
    #[arg(long, allow_hyphen_values = true, value_parser = angle_arg)]
    pub delta: Option<f64>,
    /// Samples along the scan (per axis for grid2d).
    #[arg(long)]
    pub points: Option<usize>,
    /// Lower end of the phi1 scan, radians.
    #[arg(long, allow_hyphen_values = true, value_parser = angle_arg)]
    pub phi_min: Option<f64>,
    /// Upper end of the phi1 scan, radians.
    #[arg(long, allow_hyphen_values = true, value_parser = angle_arg)]
    pub phi_max: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct PatternArgs {
    #[command(flatten)]
    pub chain: ChainArgs,
    #[command(flatten)]
    pub slice: SliceArgs,
    /// Correlation order, 1 or 2.
    #[arg(long, default_value_t = 2)]
    pub order: u8,
    /// Pulse area in radians; `pi`, `pi/2` accepted.
    #[arg(long, default_value = "pi")]
    pub pulse: String,
    /// CSV output path (stdout if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also draw this many events from the normalized pattern.
    #[arg(long)]
    pub events: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Event-set JSON output path (with --events).
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SearchArgs {
    #[command(flatten)]
    pub chain: ChainArgs,
    #[command(flatten)]
    pub slice: SliceArgs,
    /// Event counts to evaluate, comma separated, ascending.
    #[arg(long, value_delimiter = ',')]
    pub schedule: Option<Vec<usize>>,
    /// Single event count (shorthand for a one-point schedule).
    #[arg(long)]
    pub events: Option<usize>,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Report path (stdout if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Machine-readable report path.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Test-only fault injection: noise added to the closed forms.
    #[arg(long, hide = true, default_value_t = 0.0)]
    pub perturb: f64,
}

/// A fully validated command configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub chain: IonChain,
    pub slice: SliceSpec,
    pub pulse: ExcitationPulse,
    pub order: CorrelationOrder,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub events: Option<usize>,
    pub events_out: Option<PathBuf>,
    pub schedule: Vec<usize>,
    pub trials: usize,
}

/// Parses `pi`, `pi/k`, `k*pi`, `k/pi` or a plain number of radians.
pub fn parse_angle(s: &str) -> Result<f64> {
    let t = s.trim().to_ascii_lowercase();
    let bad = || Error::InvalidArgument(format!("cannot parse angle {s:?}"));
    let num = |x: &str| x.trim().parse::<f64>().map_err(|_| bad());
    if let Some(rest) = t.strip_prefix('-') {
        if rest.contains("pi") {
            return parse_angle(rest).map(|v| -v);
        }
    }
    if t == "pi" {
        return Ok(PI);
    }
    if let Some(den) = t.strip_prefix("pi/") {
        return Ok(PI / num(den)?);
    }
    if let Some(k) = t.strip_suffix("*pi") {
        return Ok(num(k)? * PI);
    }
    if let Some(k) = t.strip_suffix("/pi") {
        return Ok(num(k)? / PI);
    }
    num(&t)
}

fn angle_arg(s: &str) -> std::result::Result<f64, String> {
    parse_angle(s).map_err(|e| e.to_string())
}

impl ChainArgs {
    pub fn build(&self) -> Result<IonChain> {
        let sources = [
            self.n.is_some(),
            self.positions.is_some(),
            self.chain.is_some(),
        ];
        if sources.iter().filter(|&&s| s).count() != 1 {
            return Err(Error::InvalidArgument(
                "give exactly one chain source: --n/--spacing, --positions or --chain".into(),
            ));
        }
        if self.spacing.is_some() && self.n.is_none() {
            return Err(Error::InvalidArgument("--spacing requires --n".into()));
        }
        let chain = if let Some(n) = self.n {
            let d = self
                .spacing
                .ok_or_else(|| Error::InvalidArgument("--n requires --spacing".into()))?;
            IonChain::equally_spaced(n, d, None)?
        } else if let Some(pos) = &self.positions {
            IonChain::new(pos.clone(), None)?
        } else {
            IonChain::from_json_file(self.chain.as_ref().unwrap())?
        };
        match self.isotope {
            Some(p) => chain.with_isotope(Some(p)),
            None => Ok(chain),
        }
    }
}

impl SliceArgs {
    pub fn build(&self, default: SliceKind) -> Result<SliceSpec> {
        let kind = self.slice.unwrap_or(default);
        let reject = |flag: &str, given: bool| -> Result<()> {
            if given {
                Err(Error::InvalidArgument(format!(
                    "{flag} does not apply to --slice {}",
                    kind.to_possible_value().unwrap().get_name()
                )))
            } else {
                Ok(())
            }
        };
        reject(
            "--phi2",
            self.phi2.is_some() && kind != SliceKind::FixedSecond,
        )?;
        reject(
            "--offset",
            self.offset.is_some() && kind != SliceKind::OffsetMag,
        )?;
        reject(
            "--delta",
            self.delta.is_some() && kind != SliceKind::FixedSindelta,
        )?;

        let default_points = if kind == SliceKind::Grid2d {
            DEFAULT_GRID_POINTS
        } else {
            DEFAULT_SCAN_POINTS
        };
        let range = ScanRange::new(
            self.phi_min.unwrap_or(-FRAC_PI_2),
            self.phi_max.unwrap_or(FRAC_PI_2),
            self.points.unwrap_or(default_points),
        );
        let slice = match kind {
            SliceKind::Grid2d => SliceSpec::grid2d(range.points),
            SliceKind::FixedSecond => SliceSpec::fixed_second(self.phi2.unwrap_or(0.0)),
            SliceKind::Opposite => SliceSpec::opposite(),
            SliceKind::OffsetMag => SliceSpec::offset_magnitude(self.offset.unwrap_or(1.0 / PI)),
            SliceKind::FixedSindelta => {
                SliceSpec::fixed_sin_delta(self.delta.ok_or_else(|| {
                    Error::InvalidArgument("--slice fixed-sindelta requires --delta".into())
                })?)
            }
        }
        .with_scan(range);
        slice.validate()?;
        Ok(slice)
    }
}

impl RunConfig {
    pub fn from_pattern(args: &PatternArgs) -> Result<Self> {
        let order = CorrelationOrder::try_from(args.order)?;
        let pulse = ExcitationPulse::new(parse_angle(&args.pulse)?)?;
        if order == CorrelationOrder::Second && !pulse.is_pi() {
            return Err(Error::Unsupported(format!(
                "--order 2 requires --pulse pi (got {})",
                args.pulse
            )));
        }
        if args.events.is_some() != args.json.is_some() {
            return Err(Error::InvalidArgument(
                "--events and --json go together for pattern".into(),
            ));
        }
        Ok(RunConfig {
            chain: args.chain.build()?,
            slice: args.slice.build(SliceKind::Grid2d)?,
            pulse,
            order,
            out: args.out.clone(),
            seed: args.seed,
            events: args.events,
            events_out: args.json.clone(),
            schedule: Vec::new(),
            trials: 0,
        })
    }

    pub fn from_search(args: &SearchArgs) -> Result<Self> {
        let chain = args.chain.build()?;
        if chain.isotope().is_none() {
            return Err(Error::InvalidArgument(
                "search needs the true isotope position (--isotope)".into(),
            ));
        }
        let schedule = match (&args.schedule, args.events) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidArgument(
                    "give either --schedule or --events, not both".into(),
                ))
            }
            (Some(s), None) => s.clone(),
            (None, Some(m)) => vec![m],
            (None, None) => vec![50, 200, 1000],
        };
        if schedule.is_empty() || schedule.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "schedule must be non-empty and strictly ascending".into(),
            ));
        }
        if args.trials == 0 {
            return Err(Error::InvalidArgument("--trials must be >= 1".into()));
        }
        Ok(RunConfig {
            chain,
            slice: args.slice.build(SliceKind::OffsetMag)?,
            pulse: ExcitationPulse::pi(),
            order: CorrelationOrder::Second,
            out: args.out.clone(),
            seed: args.seed,
            events: None,
            events_out: None,
            schedule,
            trials: args.trials,
        })
    }
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV text of a pattern: `phi1,phi2,value` for G² and grids, `phi1,value`
/// for 1-D G¹.
pub fn render_pattern_csv(pattern: &Pattern) -> String {
    let two = pattern.order() == CorrelationOrder::Second || pattern.slice.is_grid();
    let mut out = String::with_capacity(pattern.len() * 72);
    out.push_str(if two {
        "phi1,phi2,value\n"
    } else {
        "phi1,value\n"
    });
    for (&(a, b), &v) in pattern.points.iter().zip(&pattern.values) {
        if two {
            let _ = writeln!(out, "{},{},{}", fmt_f64(a), fmt_f64(b), fmt_f64(v));
        } else {
            let _ = writeln!(out, "{},{}", fmt_f64(a), fmt_f64(v));
        }
    }
    out
}

/// Output of `pattern`: the CSV text and, with `--events`, the event set.
#[derive(Debug, Clone)]
pub struct PatternOutput {
    pub csv: String,
    pub events: Option<EventSet>,
}

pub fn cmd_pattern(config: &RunConfig) -> Result<PatternOutput> {
    let pattern = pattern_over_slice(config.order, &config.chain, config.pulse, &config.slice)?;
    let events = match config.events {
        Some(m) => Some(sample_events(&normalize(&pattern)?, m, config.seed)),
        None => None,
    };
    Ok(PatternOutput {
        csv: render_pattern_csv(&pattern),
        events,
    })
}

pub fn cmd_search(config: &RunConfig) -> Result<SearchExperimentResult> {
    run_search_experiment(
        &config.chain,
        &config.slice,
        config.chain.isotope().unwrap_or(0),
        &config.schedule,
        config.trials,
        config.seed,
    )
}

/// Reads the thread cap from the environment.
pub fn thread_count() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Error::InvalidArgument(format!(
                "{THREADS_ENV} must be a positive integer (got {s:?})"
            ))),
        },
    }
}

fn write_or_print(path: &Option<PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => Ok(std::fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Runs a parsed command line. Returns `Ok(false)` when verification found
/// failures.
pub fn run(cli: Cli) -> Result<bool> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count()? {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Pattern(args) => {
            let config = RunConfig::from_pattern(&args)?;
            let output = cmd_pattern(&config)?;
            write_or_print(&config.out, &output.csv)?;
            if let (Some(events), Some(path)) = (output.events, &config.events_out) {
                std::fs::write(path, events.to_json()?)?;
            }
            Ok(true)
        }
        Command::Search(args) => {
            let config = RunConfig::from_search(&args)?;
            let result = cmd_search(&config)?;
            let json = serde_json::to_string_pretty(&result)? + "\n";
            let m95 = result
                .m_at_95
                .map_or_else(|| "not reached".to_owned(), |m| m.to_string());
            let summary = format!(
                "m_at_95: {m95}    classical_mean_probes: {:.4}",
                result.classical_mean_probes
            );
            match &config.out {
                Some(path) => {
                    std::fs::write(path, json)?;
                    println!("{summary}");
                }
                None => {
                    eprintln!("{summary}");
                    print!("{json}");
                }
            }
            Ok(true)
        }
        Command::Verify(args) => {
            let report = verify::run_checks(args.perturb);
            print!("{}", report.render());
            if let Some(path) = &args.json {
                std::fs::write(path, serde_json::to_string_pretty(&report)? + "\n")?;
            }
            Ok(report.passed)
        }
    })
}
