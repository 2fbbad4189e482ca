//! The `birr` command-line front end.
//!
//! Exit codes: 0 success, 2 usage or domain error, 3 singular channel,
//! 4 parse error, 5 dense-matrix cap exceeded, 1 other I/O failure.

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::channel::{dense_cap_from_env, BisymmetricChannel};
use crate::error::Error;
use crate::estimator::{
    estimate_with_cap, loss, loss_approx_quality, marginal_histogram, project_to_simplex, MarginalQuery,
    ProbabilityVector,
};
use crate::io::{self as fileio, format_number, key_value_csv, FormatError};
use crate::privacy::{self, Branch};
use crate::randomizer::{randomize_corpus, RandomizerSpec};
use crate::rng::RandomSeed;
use crate::sim::{self, ExperimentConfig, ExperimentConfigFile, LossScale, PiSpec};

#[derive(Debug, Parser)]
#[command(name = "birr", version, about = "Iterated bisymmetric randomized response toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print C_a(n), or its closed-form inverse, as CSV.
    Matrix {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        inverse: bool,
    },
    /// Randomize a corpus file.
    Randomize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        /// direct:A | warner:P | unrelated:P | rappor-once:F | rappor:F,Q
        #[arg(long)]
        mechanism: RandomizerSpec,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        stream: u64,
    },
    /// Estimate a k-way marginal from a randomized corpus.
    Estimate {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        channel: ChannelArgs,
        /// Comma-separated bit positions, e.g. 0,2 (default: all).
        #[arg(long, value_delimiter = ',')]
        bits: Option<Vec<u32>>,
        /// Project the raw estimate onto the probability simplex.
        #[arg(long)]
        project: bool,
    },
    /// Efficiency loss report.
    Loss {
        #[command(flatten)]
        channel: ChannelArgs,
        #[arg(long)]
        n: u32,
        /// Greenwood statistic s = pi^T pi.
        #[arg(long, conflicts_with = "pi")]
        s: Option<f64>,
        /// File holding pi (comma or newline separated).
        #[arg(long)]
        pi: Option<PathBuf>,
    },
    /// Privacy budget report, from a channel parameter or a budget.
    Privacy {
        #[arg(long, conflicts_with = "epsilon", required_unless_present = "epsilon")]
        a: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        /// Maximum Hamming distance between protected inputs (default: n).
        #[arg(long)]
        k: Option<u32>,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        s: Option<f64>,
        /// Return the a < 1/2 branch for --epsilon.
        #[arg(long)]
        lying: bool,
    },
    /// Generate figure datasets as CSV.
    Figures(FigureArgs),
}

#[derive(Debug, Args)]
pub struct ChannelArgs {
    /// Truth probability of the bit randomizer.
    #[arg(long, conflicts_with = "mechanism")]
    pub a: Option<f64>,
    /// Mechanism spec reduced to its effective a.
    #[arg(long)]
    pub mechanism: Option<RandomizerSpec>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum FigureId {
    #[value(name = "1a")]
    Fig1a,
    #[value(name = "1b")]
    Fig1b,
    #[value(name = "1c")]
    Fig1c,
    #[value(name = "2a")]
    Fig2a,
    #[value(name = "2b")]
    Fig2b,
}

#[derive(Debug, Args)]
pub struct FigureArgs {
    #[arg(long)]
    pub which: FigureId,
    /// TOML experiment config; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long)]
    pub m: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub mechanism: Option<RandomizerSpec>,
    /// Explicit pi as comma-separated values, or "dirichlet-flat".
    #[arg(long)]
    pub pi: Option<String>,
    #[arg(long, value_enum)]
    pub scale: Option<ScaleArg>,
    /// Random distributions per n for figure 1c.
    #[arg(long, default_value_t = 100)]
    pub draws: usize,
    /// Hamming bound for figure 2b (default 1).
    #[arg(long, default_value_t = 1)]
    pub k: u32,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScaleArg {
    Approx,
    Exact,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Domain(Error),
    #[error("{0}")]
    Format(#[from] FormatError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Domain(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Domain(Error::SingularChannel { .. }) => 3,
            CliError::Domain(Error::WidthCap { .. }) => 5,
            CliError::Domain(_) | CliError::Usage(_) => 2,
            CliError::Format(FormatError::Parse { .. }) => 4,
            CliError::Format(FormatError::Io(_)) | CliError::Io { .. } => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(io_err(format!("reading {}", path.display())))
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(io_err(format!("writing {}", p.display()))),
        None => out.write_all(text.as_bytes()).map_err(io_err("writing output")),
    }
}

impl ChannelArgs {
    fn resolve(&self, fallback: Option<&str>) -> CliResult<f64> {
        match (self.a, self.mechanism) {
            (Some(a), _) => Ok(a),
            (None, Some(spec)) => Ok(spec.effective_a()),
            (None, None) => match fallback {
                Some(v) => v
                    .parse()
                    .map_err(|_| CliError::Usage(format!("corpus header has unparseable a={v}"))),
                None => Err(CliError::Usage("one of --a or --mechanism is required".into())),
            },
        }
    }
}

/// Runs one command, writing results to `out` unless redirected to a file.
pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    let cap = dense_cap_from_env();
    match cli.command {
        Command::Matrix { a, n, inverse } => {
            let ch = BisymmetricChannel::new(a, n)?;
            let ch = if inverse { ch.inverse()? } else { ch };
            let m = ch.materialize_capped(cap)?;
            emit(out, None, &fileio::matrix_to_csv(&m))
        }
        Command::Randomize {
            input,
            output,
            mechanism,
            seed,
            stream,
        } => {
            let file = fs::File::open(&input).map_err(io_err(format!("opening {}", input.display())))?;
            let (mut header, corpus) = fileio::read_corpus(BufReader::new(file))?;
            let a = mechanism.effective_a();
            let seed = RandomSeed::with_stream(seed, stream);
            let randomized = randomize_corpus(&corpus, a, &seed);
            header.set("mechanism", mechanism.to_string());
            header.set("a", format_number(a));
            header.set("seed", seed.seed.to_string());
            header.set("stream", seed.stream.to_string());
            emit(out, output.as_deref(), &fileio::corpus_to_string(&header, &randomized))
        }
        Command::Estimate {
            input,
            channel,
            bits,
            project,
        } => {
            let file = fs::File::open(&input).map_err(io_err(format!("opening {}", input.display())))?;
            let (header, corpus) = fileio::read_corpus(BufReader::new(file))?;
            let a = channel.resolve(header.get("a"))?;
            let query = match bits {
                Some(b) => MarginalQuery::new(b, corpus.width())?,
                None => MarginalQuery::all(corpus.width())?,
            };
            let hist = marginal_histogram(&corpus, &query)?;
            let raw = estimate_with_cap(&hist, a, cap)?;
            let values = if project {
                project_to_simplex(&raw).values().to_vec()
            } else {
                raw.into_values()
            };
            let positions: Vec<String> = query.positions().iter().map(u32::to_string).collect();
            let mut text = format!(
                "# bits={} a={} m={} projected={}\npattern,estimate\n",
                positions.join(","),
                format_number(a),
                hist.m(),
                project
            );
            for (cell, v) in values.iter().enumerate() {
                let pattern: String = (0..query.k()).map(|j| if (cell >> j) & 1 == 1 { '1' } else { '0' }).collect();
                text.push_str(&format!("{pattern},{}\n", format_number(*v)));
            }
            emit(out, None, &text)
        }
        Command::Loss { channel, n, s, pi } => {
            let a = channel.resolve(None)?;
            let cells = (n as f64).exp2();
            let (s, source) = match (s, pi) {
                (Some(s), _) => (s, "given"),
                (None, Some(path)) => {
                    let pi = ProbabilityVector::new(fileio::parse_vector(&read_file(&path)?)?)?;
                    if pi.width() != n {
                        return Err(Error::Dimension {
                            expected: 1usize << n,
                            found: pi.values().len(),
                        }
                        .into());
                    }
                    (pi.greenwood(), "pi")
                }
                (None, None) => (2.0 / (cells + 1.0), "flat-dirichlet-mean"),
            };
            let report = loss(s, a, n)?;
            let delta = if n > 2 {
                format_number(loss_approx_quality(n)?)
            } else {
                "NA".to_string()
            };
            let pairs = [
                ("a", format_number(a)),
                ("n", n.to_string()),
                ("c", format_number(report.c)),
                ("s", format_number(report.s)),
                ("s_source", source.to_string()),
                ("trace_cov_per_response", format_number(report.trace_cov)),
                ("loss", format_number(report.loss_l)),
                ("loss_floor", format_number(report.loss_floor)),
                ("loss_approx", format_number(report.loss_approx)),
                ("delta_inf", delta),
            ];
            emit(out, None, &key_value_csv(&pairs))
        }
        Command::Privacy {
            a,
            epsilon,
            k,
            n,
            s,
            lying,
        } => {
            let k = k.unwrap_or(n.max(1));
            if k == 0 || (n > 0 && k > n) {
                return Err(CliError::Usage(format!("k = {k} must satisfy 1 <= k <= n = {n}")));
            }
            let report = match (a, epsilon) {
                (Some(a), _) => privacy::report_for_a(a, k, n, s)?,
                (None, Some(eps)) => {
                    let branch = if lying { Branch::Lying } else { Branch::Truthful };
                    privacy::report_for_epsilon(eps, k, n, s, branch)?
                }
                (None, None) => return Err(CliError::Usage("one of --a or --epsilon is required".into())),
            };
            let mut pairs = vec![
                ("a", format_number(report.a)),
                ("a_other_branch", format_number(1.0 - report.a)),
                ("likelihood_ratio", format_number(report.ratio)),
                ("epsilon_per_bit", format_number(report.epsilon_per_bit)),
                ("epsilon", format_number(report.epsilon_total)),
                ("k", report.k.to_string()),
                ("n", report.n.to_string()),
                ("c_alpha", format_number(report.c_at_alpha)),
            ];
            if let Some(l) = report.loss_at_alpha {
                pairs.push(("loss_alpha", format_number(l)));
            }
            emit(out, None, &key_value_csv(&pairs))
        }
        Command::Figures(args) => run_figures(args, out),
    }
}

fn run_figures(args: FigureArgs, out: &mut dyn Write) -> CliResult<()> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &args.config {
        let text = read_file(path)?;
        let file = ExperimentConfigFile::parse(&text).map_err(|e| {
            let line = e.span().map_or(1, |span| text[..span.start].matches('\n').count() + 1);
            CliError::Format(FormatError::Parse {
                line,
                message: format!("{}: {}", path.display(), e.message()),
            })
        })?;
        cfg = file.apply(cfg)?;
    }
    let n_flag = args.n;
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(m) = args.m {
        cfg.m = m;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(mech) = args.mechanism {
        cfg.mechanism = mech;
    }
    if let Some(pi) = &args.pi {
        cfg.pi = if pi.trim() == "dirichlet-flat" {
            PiSpec::Named(pi.trim().to_string())
        } else {
            PiSpec::Explicit(fileio::parse_vector(pi)?)
        };
    }
    if let Some(scale) = args.scale {
        cfg.scale = match scale {
            ScaleArg::Approx => LossScale::Approx,
            ScaleArg::Exact => LossScale::Exact,
        };
    }
    if args.output.is_some() {
        cfg.output = args.output.clone();
    }
    let text = match args.which {
        FigureId::Fig1a => render_1a(&cfg)?,
        FigureId::Fig1b => render_1b()?,
        FigureId::Fig1c => render_1c(args.draws, cfg.seed)?,
        FigureId::Fig2a => render_2a(n_flag.unwrap_or(1))?,
        FigureId::Fig2b => render_2b(args.k, n_flag.unwrap_or(1))?,
    };
    emit(out, cfg.output.as_deref(), &text)
}

fn render_1a(cfg: &ExperimentConfig) -> CliResult<String> {
    let fig = sim::figure_1a(cfg)?;
    let scale = match fig.scale {
        LossScale::Approx => "approx",
        LossScale::Exact => "exact",
    };
    let mut text = format!(
        "# figure=1a mechanism={} a={} n={} m={} trials={} seed={} pi={} scale={scale} scale_loss={} exact_loss={} approx_loss={}\n",
        cfg.mechanism,
        format_number(fig.a),
        cfg.n,
        cfg.m,
        cfg.trials,
        cfg.seed,
        fig.pi.values().iter().map(|v| format_number(*v)).collect::<Vec<_>>().join(";"),
        format_number(fig.scale_loss),
        format_number(fig.exact_loss),
        format_number(fig.approx_loss),
    );
    text.push_str("trial,estimator,m");
    for i in 0..fig.pi.values().len() {
        text.push_str(&format!(",cell{i}"));
    }
    text.push('\n');
    for row in &fig.rows {
        text.push_str(&format!("{},{},{}", row.trial, row.estimator, row.m));
        for v in &row.estimate {
            text.push(',');
            text.push_str(&format_number(*v));
        }
        text.push('\n');
    }
    Ok(text)
}

fn render_1b() -> CliResult<String> {
    let mut text = String::from("# figure=1b mechanism=unrelated\nn,p,log_loss\n");
    for r in sim::figure_1b()? {
        text.push_str(&format!("{},{},{}\n", r.n, format_number(r.p), format_number(r.log_loss)));
    }
    Ok(text)
}

fn render_1c(draws: usize, seed: u64) -> CliResult<String> {
    if draws == 0 {
        return Err(CliError::Usage("--draws must be at least 1".into()));
    }
    let mut text = format!("# figure=1c mechanism=unrelated draws={draws} seed={seed}\nn,p,draw,s,ratio,floor_ratio\n");
    for r in sim::figure_1c(draws, &RandomSeed::new(seed))? {
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.n,
            format_number(r.p),
            r.draw,
            format_number(r.s),
            format_number(r.ratio),
            format_number(r.floor_ratio)
        ));
    }
    Ok(text)
}

fn render_2a(n: u32) -> CliResult<String> {
    let rows = sim::figure_2a(n)?;
    let crossing = sim::ratio_crossing(&rows).map_or("NA".to_string(), format_number);
    let mut text = format!("# figure=2a n={n} crossing={crossing}\np,c_unrelated,c_warner,ratio\n");
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{}\n",
            format_number(r.p),
            format_number(r.c_unrelated),
            format_number(r.c_warner),
            format_number(r.ratio)
        ));
    }
    Ok(text)
}

fn render_2b(k: u32, n: u32) -> CliResult<String> {
    let mut text = format!("# figure=2b k={k} n={n}\nepsilon,c_unrelated,c_warner,c_alpha,p_unrelated,p_warner\n");
    for r in sim::figure_2b(k, n)? {
        let c_alpha = privacy::c_at_alpha(r.epsilon, k, n)?;
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            format_number(r.epsilon),
            format_number(r.c_unrelated),
            format_number(r.c_warner),
            format_number(c_alpha),
            format_number(r.p_unrelated),
            format_number(r.p_warner)
        ));
    }
    Ok(text)
}

/// The message printed for a failed command.
pub fn describe(err: &CliError) -> String {
    match err {
        CliError::Domain(Error::SingularChannel { a }) => format!(
            "error: singular channel at a = {a}: a = 1/2 gives perfect privacy but zero utility (the channel cannot be inverted)"
        ),
        other => format!("error: {other}"),
    }
}

