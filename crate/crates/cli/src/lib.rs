//! `volumecast` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or model error. Machine output
//! goes to `--out` or stdout; diagnostics go to stderr.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use volumecast_core::eval::{evaluate, sweep_bin_sizes, write_sweep_csv, SweepRow};
use volumecast_core::model::{load_model, save_model, train};
use volumecast_core::prefetch::{simulate_prefetch, write_prefetch_csv, PrefetchReport, TileGrid};
use volumecast_core::traces::{
    generate_synthetic_trace, parse_trace_csv_detailed, write_trace_csv, ProfileKind, SynthProfile,
};
use volumecast_core::{BinSizes, ModelConfig, Trace, TrainedModel, Vec3};

pub const THREADS_ENV: &str = "VOLUMECAST_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "volumecast",
    version,
    about = "Predict the volume a VR head will occupy next"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic head trace as CSV.
    Gen(GenArgs),
    /// Train a binned-ellipsoid model from traces.
    Train(TrainArgs),
    /// Predict the ellipsoid for one (previous, current) position pair.
    Predict(PredictArgs),
    /// Score a model on test traces.
    Eval(EvalArgs),
    /// Train and score once per bin size.
    Sweep(SweepArgs),
    /// Simulate tile prefetching driven by a model.
    Prefetch(PrefetchArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, default_value = "seated", value_parser = parse_profile)]
    profile: ProfileKind,
    /// Seconds.
    #[arg(long, default_value_t = 1500.0, value_parser = parse_positive)]
    duration: f64,
    #[arg(long, default_value_t = 90.0, value_parser = parse_positive)]
    rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// `B` or `BX,BY,BZ`, meters.
    #[arg(long, default_value = "0.002", value_parser = parse_bin_size)]
    bin_size: BinSizes,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    horizon: u32,
    #[arg(long, default_value_t = 90.0, value_parser = parse_positive)]
    rate: f64,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Training trace CSV; repeatable. `-` reads stdin.
    #[arg(long, required_unless_present = "train", conflicts_with = "train")]
    trace: Vec<PathBuf>,
    /// Same as `--trace`.
    #[arg(long)]
    train: Vec<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    prev: Vec3,
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    cur: Vec3,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// Test trace CSV; repeatable.
    #[arg(long, required = true)]
    test: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, required = true)]
    train: Vec<PathBuf>,
    #[arg(long, required = true)]
    test: Vec<PathBuf>,
    /// Ascending comma list of isotropic bin sizes, meters.
    #[arg(long, default_value = "0.001,0.002,0.004,0.008,0.016", value_parser = parse_bin_list)]
    bin_sizes: BinList,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    horizon: u32,
    #[arg(long, default_value_t = 90.0, value_parser = parse_positive)]
    rate: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PrefetchArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, required = true)]
    test: Vec<PathBuf>,
    /// Comma list of tile edge lengths, meters.
    #[arg(long, default_value = "0.1", value_parser = parse_float_list)]
    tile_size: FloatList,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
struct BinList(Vec<BinSizes>);

#[derive(Debug, Clone)]
struct FloatList(Vec<f64>);

fn parse_profile(s: &str) -> Result<ProfileKind, String> {
    s.parse()
}

fn parse_positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        _ => Err(format!("expected a positive number, got `{s}`")),
    }
}

fn parse_floats(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("`{f}` is not a finite number"))
        })
        .collect()
}

fn parse_float_list(s: &str) -> Result<FloatList, String> {
    parse_floats(s).map(FloatList)
}

fn parse_vec3(s: &str) -> Result<Vec3, String> {
    match parse_floats(s)?.as_slice() {
        [x, y, z] => Ok(Vec3::new(*x, *y, *z)),
        _ => Err(format!("expected x,y,z, got `{s}`")),
    }
}

fn parse_bin_size(s: &str) -> Result<BinSizes, String> {
    let sizes = match parse_floats(s)?.as_slice() {
        [b] => BinSizes::isotropic(*b),
        [x, y, z] => BinSizes::new(*x, *y, *z),
        _ => return Err(format!("expected B or BX,BY,BZ, got `{s}`")),
    };
    sizes.map_err(|e| e.to_string())
}

fn parse_bin_list(s: &str) -> Result<BinList, String> {
    parse_floats(s)?
        .into_iter()
        .map(|b| BinSizes::isotropic(b).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()
        .map(BinList)
}

/// Failure of a parsed command; maps to [`EXIT_DATA`].
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

fn with_path<E: std::fmt::Display>(path: &Path) -> impl FnOnce(E) -> Failure + '_ {
    move |e| Failure(format!("{}: {e}", path.display()))
}

struct Io<'a> {
    stdin: &'a mut dyn Read,
    stdout: &'a mut dyn Write,
    stderr: &'a mut dyn Write,
}

impl Io<'_> {
    fn open(&mut self, path: &Path) -> Result<Vec<u8>, Failure> {
        let mut bytes = Vec::new();
        if path.as_os_str() == "-" {
            self.stdin
                .read_to_end(&mut bytes)
                .map_err(with_path(path))?;
        } else {
            File::open(path)
                .and_then(|mut f| f.read_to_end(&mut bytes))
                .map_err(with_path(path))?;
        }
        Ok(bytes)
    }

    fn emit(&mut self, out: &Option<PathBuf>, bytes: &[u8]) -> Result<(), Failure> {
        match out {
            Some(path) => std::fs::write(path, bytes).map_err(with_path(path)),
            None => self.stdout.write_all(bytes).map_err(Failure::from),
        }
    }

    fn read_traces(&mut self, paths: &[PathBuf], rate: f64) -> Result<Vec<Trace>, Failure> {
        paths
            .iter()
            .map(|p| {
                let bytes = self.open(p)?;
                let (trace, warnings) =
                    parse_trace_csv_detailed(&bytes[..], rate).map_err(with_path(p))?;
                if !warnings.ignored_columns.is_empty() {
                    let _ = writeln!(
                        self.stderr,
                        "warning: {}: ignoring columns {}",
                        p.display(),
                        warnings.ignored_columns.join(",")
                    );
                }
                Ok(trace.with_label(p.display().to_string()))
            })
            .collect()
    }

    fn read_model(&mut self, path: &Path) -> Result<TrainedModel, Failure> {
        let bytes = self.open(path)?;
        load_model(&bytes[..]).map_err(with_path(path))
    }
}

fn execute(command: Command, io: &mut Io, pool: &rayon::ThreadPool) -> Result<(), Failure> {
    match command {
        Command::Gen(a) => {
            let trace =
                generate_synthetic_trace(&SynthProfile::new(a.profile, a.duration, a.rate, a.seed));
            let mut buf = Vec::new();
            write_trace_csv(&trace, &mut buf)?;
            io.emit(&a.out, &buf)
        }
        Command::Train(a) => {
            let paths = if a.trace.is_empty() {
                &a.train
            } else {
                &a.trace
            };
            let traces = io.read_traces(paths, a.model.rate)?;
            let config = ModelConfig {
                bin_sizes: a.model.bin_size,
                horizon: a.model.horizon as usize,
                rate_hz: a.model.rate,
                ..ModelConfig::default()
            };
            let model = pool.install(|| train(&traces, &config))?;
            if let Some(meta) = model.meta {
                if meta.unconverged_fits > 0 {
                    let _ = writeln!(
                        io.stderr,
                        "warning: {} fits hit the iteration cap",
                        meta.unconverged_fits
                    );
                }
            }
            let mut buf = Vec::new();
            save_model(&model, &mut buf)?;
            io.emit(&a.out, &buf)
        }
        Command::Predict(a) => {
            let model = io.read_model(&a.model)?;
            let p = model.predict(&a.prev, &a.cur)?;
            let c = p.ellipsoid.center();
            let s = p.ellipsoid.semi_axes();
            writeln!(
                io.stdout,
                "center={},{},{} semi_axes={},{},{} volume_cm3={} fallback={}",
                c.x,
                c.y,
                c.z,
                s.x,
                s.y,
                s.z,
                p.ellipsoid.volume_cm3(),
                p.used_fallback
            )?;
            Ok(())
        }
        Command::Eval(a) => {
            let model = io.read_model(&a.model)?;
            let test = io.read_traces(&a.test, model.config.rate_hz)?;
            let report = pool.install(|| evaluate(&model, &test))?;
            let mut buf = Vec::new();
            write_sweep_csv(
                &[SweepRow {
                    bin_size: model.config.bin_sizes,
                    report,
                }],
                &mut buf,
            )?;
            io.emit(&a.out, &buf)
        }
        Command::Sweep(a) => {
            let train_traces = io.read_traces(&a.train, a.rate)?;
            let test_traces = io.read_traces(&a.test, a.rate)?;
            let template = ModelConfig {
                horizon: a.horizon as usize,
                rate_hz: a.rate,
                ..ModelConfig::default()
            };
            let rows = pool.install(|| {
                sweep_bin_sizes(&train_traces, &test_traces, &a.bin_sizes.0, &template)
            })?;
            let mut buf = Vec::new();
            write_sweep_csv(&rows, &mut buf)?;
            io.emit(&a.out, &buf)
        }
        Command::Prefetch(a) => {
            let model = io.read_model(&a.model)?;
            let test = io.read_traces(&a.test, model.config.rate_hz)?;
            let mut rows = Vec::new();
            for &size in &a.tile_size.0 {
                let grid = TileGrid::new(size, Vec3::zeros())?;
                let mut pooled = PrefetchReport::default();
                for t in &test {
                    let report = pool.install(|| simulate_prefetch(&model, t, &grid));
                    pooled = pooled.merge(&report.map_err(with_path(Path::new(t.label())))?);
                }
                rows.push((size, pooled));
            }
            let mut buf = Vec::new();
            write_prefetch_csv(&rows, &mut buf)?;
            io.emit(&a.out, &buf)
        }
    }
}

fn thread_pool() -> Result<rayon::ThreadPool, String> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| format!("{THREADS_ENV} must be a non-negative integer, got `{v}`"))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| e.to_string())
}

/// Runs the tool on `argv` (including the program name) and returns the exit
/// code.
pub fn run<I, S>(
    argv: I,
    stdin: &mut dyn Read,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = stderr.write_all(text.as_bytes());
                EXIT_USAGE
            } else {
                let _ = stdout.write_all(text.as_bytes());
                EXIT_OK
            };
        }
    };
    let pool = match thread_pool() {
        Ok(p) => p,
        Err(msg) => {
            let _ = writeln!(stderr, "error: {msg}");
            return EXIT_USAGE;
        }
    };
    let mut io = Io {
        stdin,
        stdout,
        stderr,
    };
    match execute(cli.command, &mut io, &pool) {
        Ok(()) => EXIT_OK,
        Err(Failure(msg)) => {
            let _ = writeln!(io.stderr, "error: {msg}");
            EXIT_DATA
        }
    }
}
