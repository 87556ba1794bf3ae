use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use motorld::gc::{self, GcPrediction, GcReport};
use motorld::graph::{self, GraphSpec};
use motorld::io::{self, Report, RunConfig};
use motorld::law::{load_law, CycleLaw};
use motorld::mc::{self, ComparisonReport, McConfig, Normalization};
use motorld::paths;
use motorld::ratefn::{self, RateKind};
use motorld::sim::{self, CycleSampler};
use motorld::spectral;
use motorld::{Error, RatedCell, Result};

#[derive(Parser)]
#[command(name = "motorld", version, about = "Rate functions and fluctuation symmetry for walks on periodic cells")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum RouteArg {
    Renewal,
    Spectral,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    Raw,
    Mode,
}

impl From<NormArg> for Normalization {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::Raw => Normalization::Raw,
            NormArg::Mode => Normalization::Mode,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a graph file and print the validation report.
    Validate { graph: PathBuf },
    /// Velocity, critical tilt, support edges and critical points of a law.
    Summary { law: PathBuf },
    /// Tabulate I or J± on a grid.
    RateCurve {
        law: PathBuf,
        #[arg(long, default_value = "I")]
        kind: String,
        #[arg(long, value_enum, default_value = "renewal")]
        route: RouteArg,
        /// a:b:step
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        /// CSV destination; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Proportionality check of φ₊/φ₋, plus the structural prediction for graphs.
    GcCheck {
        law: PathBuf,
        #[arg(long, default_value_t = gc::DEFAULT_GRID)]
        grid_size: usize,
        #[arg(long, default_value_t = gc::DEFAULT_TOL)]
        tol: f64,
    },
    /// Count source-to-sink paths and decide minimality.
    Minimality { graph: PathBuf },
    /// Draw cycles (or positions at time t) and print a summary.
    Simulate {
        law: PathBuf,
        /// Sample Z_t at this time instead of single cycles.
        #[arg(long)]
        t: Option<f64>,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        workers: usize,
        /// Also write the raw samples as CSV.
        #[arg(long)]
        raw: Option<PathBuf>,
    },
    /// Empirical I at horizon t against the analytic curve.
    McVerify {
        law: PathBuf,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        /// Bin width; defaults to 2/t.
        #[arg(long)]
        bins: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        workers: usize,
        #[arg(long, value_enum, default_value = "mode")]
        normalization: NormArg,
        /// Output directory; falls back to $MOTORLD_OUT_DIR, then ".".
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Serialize)]
struct ErrorJson<'a> {
    error: &'a str,
    message: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            let body = ErrorJson { error: e.code(), message: e.to_string() };
            eprintln!("{}", serde_json::to_string(&body).unwrap());
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn print_json(value: &impl Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("report serializes"));
}

fn load_graph(path: &Path) -> Result<RatedCell> {
    RatedCell::load(path)
}

fn run(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Validate { graph } => {
            let spec = GraphSpec::load(&graph)?;
            let report = graph::validate(&spec);
            print_json(&Report { config: RunConfig::new("validate", Some(&graph)), result: &report });
            Ok(if report.valid { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Summary { law: path } => {
            let law = load_law(&path)?;
            let s = io::summarize(&law)?;
            print_json(&Report { config: RunConfig::new("summary", Some(&path)), result: s });
            Ok(ExitCode::SUCCESS)
        }
        Command::RateCurve { law: path, kind, route, grid, out } => {
            let law = load_law(&path)?;
            let kind: RateKind = kind.parse()?;
            let points = io::parse_grid(&grid)?;
            let cfg = RunConfig::new("rate-curve", Some(&path))
                .param("kind", kind)
                .param("route", route_name(route))
                .param("grid", &grid);
            let mut sink: Box<dyn Write> = match &out {
                Some(p) => Box::new(BufWriter::new(File::create(p)?)),
                None => Box::new(std::io::stdout().lock()),
            };
            match route {
                RouteArg::Renewal => {
                    let c = ratefn::rate_curve(&law, kind, &points)?;
                    io::write_rate_csv(&mut sink, &cfg, &c)?;
                }
                RouteArg::Spectral => {
                    let c = spectral_curve(&law, kind, &points)?;
                    io::write_rate_csv(&mut sink, &cfg, &c)?;
                }
                RouteArg::Both => {
                    let a = ratefn::rate_curve(&law, kind, &points)?;
                    let b = spectral_curve(&law, kind, &points)?;
                    io::write_two_route_csv(&mut sink, &cfg, &a, &b)?;
                }
            }
            sink.flush()?;
            Ok(ExitCode::SUCCESS)
        }
        Command::GcCheck { law: path, grid_size, tol } => {
            let law = load_law(&path)?;
            let report = gc::gc_check_analytic(&law, grid_size, tol)?;
            let prediction = law.as_graph().map(|g| gc::gc_predict(g.cell()));
            let (prediction, prediction_error) = match prediction {
                Some(Ok(p)) => (Some(p), None),
                Some(Err(e)) => (None, Some(e.to_string())),
                None => (None, None),
            };
            #[derive(Serialize)]
            struct Out {
                analytic: GcReport,
                #[serde(skip_serializing_if = "Option::is_none")]
                prediction: Option<GcPrediction>,
                #[serde(skip_serializing_if = "Option::is_none")]
                prediction_error: Option<String>,
            }
            let cfg = RunConfig::new("gc-check", Some(&path)).param("grid_size", grid_size).param("tol", tol);
            print_json(&Report { config: cfg, result: Out { analytic: report, prediction, prediction_error } });
            Ok(ExitCode::SUCCESS)
        }
        Command::Minimality { graph } => {
            let cell = load_graph(&graph)?;
            let report = paths::minimality(cell.graph());
            print_json(&Report { config: RunConfig::new("minimality", Some(&graph)), result: report });
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate { law: path, t, n, seed, workers, raw } => simulate(&path, t, n, seed, workers, raw),
        Command::McVerify { law: path, t, n, bins, seed, workers, normalization, out_dir } => {
            let law = load_law(&path)?;
            let width = bins.unwrap_or_else(|| mc::default_bin_width(t));
            let dir = io::output_dir(out_dir.as_deref());
            std::fs::create_dir_all(&dir)?;
            let norm: Normalization = normalization.into();
            let cfg = RunConfig::new("mc-verify", Some(&path))
                .param("t", t)
                .param("n", n)
                .param("bin_width", width)
                .param("workers", workers)
                .param("normalization", norm)
                .with_seed(seed)
                .with_out_dir(dir.clone());
            let mc_cfg = McConfig { workers, ..McConfig::new(seed) };
            let emp = mc::empirical_rate_position(&law, t, n, width, norm, &mc_cfg)?;
            let analytic = ratefn::rate_curve(&law, RateKind::I, &emp.abscissae)?;
            let cmp = mc::compare_curves(&analytic, &emp)?;
            let mut f = BufWriter::new(File::create(dir.join("empirical.csv"))?);
            io::write_empirical_csv(&mut f, &cfg, &emp)?;
            f.flush()?;
            let report: Report<ComparisonReport> = Report { config: cfg, result: cmp };
            report.write(&dir.join("comparison.json"))?;
            #[derive(Serialize)]
            struct Brief {
                coverage: f64,
                max_gap: f64,
                bins: usize,
                out_dir: PathBuf,
            }
            print_json(&Brief {
                coverage: report.result.coverage,
                max_gap: report.result.max_gap,
                bins: report.result.bins.len(),
                out_dir: dir,
            });
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn route_name(r: RouteArg) -> &'static str {
    match r {
        RouteArg::Renewal => "renewal",
        RouteArg::Spectral => "spectral",
        RouteArg::Both => "both",
    }
}

fn spectral_curve(law: &CycleLaw, kind: RateKind, grid: &[f64]) -> Result<ratefn::RateCurve> {
    let Some(g) = law.as_graph() else {
        return Err(Error::DomainError("the spectral route needs a graph law".into()));
    };
    if kind != RateKind::I {
        return Err(Error::DomainError("the spectral route only produces I".into()));
    }
    spectral::rate_curve_spectral(g.cell(), grid, &law.descriptor())
}

#[derive(Serialize)]
struct SimSummary {
    n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    t: Option<f64>,
    mean: f64,
    variance: f64,
    /// Fraction of cycles ending at the next gate up (cycle mode only).
    #[serde(skip_serializing_if = "Option::is_none")]
    p_plus: Option<f64>,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, v)
}

fn simulate(path: &Path, t: Option<f64>, n: usize, seed: u64, workers: usize, raw: Option<PathBuf>) -> Result<ExitCode> {
    if workers == 0 || n == 0 {
        return Err(Error::DomainError("n and workers must be >= 1".into()));
    }
    let law = load_law(path)?;
    let sampler = CycleSampler::new(&law);
    let cfg = RunConfig::new("simulate", Some(path)).param("n", n).param("t", t).param("workers", workers).with_seed(seed);
    // same substream split as the Monte Carlo module
    let per: Vec<usize> = (0..workers).map(|i| n / workers + usize::from(i < n % workers)).collect();
    let mut lines = Vec::new();
    let summary = match t {
        Some(t) => {
            if !(t > 0.0) {
                return Err(Error::DomainError("t must be > 0".into()));
            }
            let mut zs = Vec::with_capacity(n);
            for (i, m) in per.iter().enumerate() {
                let mut rng = sim::substream(seed, i as u64);
                for _ in 0..*m {
                    zs.push(sampler.sample_position(t, &mut rng)?);
                }
            }
            lines.push("z".to_string());
            lines.extend(zs.iter().map(|z| z.to_string()));
            let v: Vec<f64> = zs.iter().map(|&z| z as f64 / t).collect();
            let (mean, variance) = mean_var(&v);
            SimSummary { n, t: Some(t), mean, variance, p_plus: None }
        }
        None => {
            let mut cs = Vec::with_capacity(n);
            for (i, m) in per.iter().enumerate() {
                let mut rng = sim::substream(seed, i as u64);
                for _ in 0..*m {
                    cs.push(sampler.sample(&mut rng)?);
                }
            }
            lines.push("sign,duration".to_string());
            lines.extend(cs.iter().map(|c| format!("{},{}", c.sign, c.duration)));
            let d: Vec<f64> = cs.iter().map(|c| c.duration).collect();
            let (mean, variance) = mean_var(&d);
            let p = cs.iter().filter(|c| c.sign > 0).count() as f64 / n as f64;
            SimSummary { n, t: None, mean, variance, p_plus: Some(p) }
        }
    };
    if let Some(p) = raw {
        let mut f = BufWriter::new(File::create(p)?);
        writeln!(f, "# config: {}", serde_json::to_string(&cfg).expect("config serializes"))?;
        for l in &lines {
            writeln!(f, "{l}")?;
        }
        f.flush()?;
    }
    print_json(&Report { config: cfg, result: summary });
    Ok(ExitCode::SUCCESS)
}
