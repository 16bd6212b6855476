//! Command-line front end: argument parsing, dispatch and table output.
//!
//! Exit codes: 0 on success (including `--help`), 2 for usage errors
//! (unknown flags, malformed config files, out-of-range parameters) and 1 for
//! numerical failures.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Deserialize;

use crate::channel::{db_to_linear, EntryDistribution, NetworkConfig};
use crate::error::Error;
use crate::experiments::{capacity_sweep, point_to_point_reference, KRule, SweepSpec};
use crate::montecarlo::{
    ergodic_capacity, pooled_spectrum, DEFAULT_CAPACITY_TRIALS, DEFAULT_SPECTRUM_TRIALS,
};
use crate::rmt::{asymptotic_capacity, mp_cdf, product_stieltjes, AspectRatios};
use crate::verify;

/// Points on the companion reference-CDF grid written next to a spectrum.
const REFERENCE_GRID_POINTS: usize = 512;

#[derive(Debug, Parser)]
#[command(
    name = "relaycap",
    version,
    about = "Capacity and spectra of MIMO amplify-and-forward relay chains"
)]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output table format.
    #[arg(long, value_enum, global = true, default_value_t = Format::Csv)]
    format: Format,

    /// Capacity units.
    #[arg(long, value_enum, global = true, default_value_t = Units::Nats)]
    units: Units,

    /// Write the table here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    Nats,
    Bits,
}

impl Units {
    fn convert(self, nats: f64) -> f64 {
        match self {
            Units::Nats => nats,
            Units::Bits => nats / std::f64::consts::LN_2,
        }
    }

    fn suffix(self) -> &'static str {
        match self {
            Units::Nats => "nats",
            Units::Bits => "bits",
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ergodic capacity of one network configuration.
    Capacity(NetworkArgs),
    /// Pooled eigenvalues of R_s·R_n⁻¹ plus the snr-scaled MP reference CDF.
    Spectrum(NetworkArgs),
    /// Product-matrix Stieltjes transform on a grid of real arguments.
    Stieltjes(StieltjesArgs),
    /// Normalized capacity over a (gamma, L) grid from a JSON config.
    Sweep(SweepArgs),
    /// Run the acceptance checks and print a pass/fail table.
    Verify(VerifyArgs),
    /// Normalized point-to-point capacity, simulated and asymptotic.
    Reference(ReferenceArgs),
}

#[derive(Debug, Args)]
struct NetworkArgs {
    #[arg(long)]
    ns: usize,
    #[arg(long)]
    nd: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    l: usize,
    #[arg(long, allow_negative_numbers = true)]
    snr_db: f64,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "gaussian")]
    dist: EntryDistribution,
}

impl NetworkArgs {
    fn config(&self) -> Result<NetworkConfig, CliError> {
        Ok(
            NetworkConfig::new(self.ns, self.nd, self.k, self.l, db_to_linear(self.snr_db))
                .map_err(CliError::usage)?
                .with_seed(self.seed)
                .with_dist(self.dist),
        )
    }
}

#[derive(Debug, Args)]
struct StieltjesArgs {
    /// Comma-separated aspect ratios, e.g. `4,4,1`.
    #[arg(long, value_delimiter = ',', required = true)]
    betas: Vec<f64>,
    /// Linear grid `start:stop:count`, endpoints included.
    #[arg(long)]
    s_grid: String,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = verify::DEFAULT_SEED)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ReferenceArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, allow_negative_numbers = true)]
    snr_db: f64,
    #[arg(long, default_value_t = DEFAULT_CAPACITY_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Sweep configuration file: `{ "model": …, "sweep": …, "output": … }`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub model: ModelSection,
    pub sweep: SweepSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Model options; every sweep cell uses `n_s = n_d = n`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// Entry distribution; defaults to complex Gaussian.
    #[serde(default)]
    pub dist: Option<EntryDistribution>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub n: usize,
    pub snr_db: f64,
    pub gammas: Vec<f64>,
    pub l_values: Vec<usize>,
    #[serde(default)]
    pub k_rule: KRule,
    pub trials: usize,
    pub seed: u64,
}

/// Output options; command-line flags take precedence.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
    pub units: Option<Units>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Numeric(Error),
}

impl CliError {
    fn usage(e: impl std::fmt::Display) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Numeric(e)
    }
}

/// A table cell; floats print in shortest round-trip form.
#[derive(Clone, Debug)]
enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
    Empty,
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// Shortest round-trip form; exponent notation outside `[1e-5, 1e16)`.
fn format_float(v: f64) -> String {
    let mag = v.abs();
    if v != 0.0 && v.is_finite() && !(1e-5..1e16).contains(&mag) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.render_csv(),
            Format::Json => self.render_json(),
        }
    }

    fn render_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Int(v) => v.to_string(),
                    Cell::Float(v) => format_float(*v),
                    Cell::Text(s) if s.contains([',', '"', '\n']) => {
                        format!("\"{}\"", s.replace('"', "\"\""))
                    }
                    Cell::Text(s) => s.clone(),
                    Cell::Empty => String::new(),
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    fn render_json(&self) -> String {
        let mut out = String::from("[");
        for (i, row) in self.rows.iter().enumerate() {
            out.push_str(if i == 0 { "\n  {" } else { ",\n  {" });
            for (j, (name, cell)) in self.columns.iter().zip(row).enumerate() {
                if j > 0 {
                    out.push_str(", ");
                }
                let value = match cell {
                    Cell::Int(v) => v.to_string(),
                    Cell::Float(v) if v.is_finite() => {
                        serde_json::to_string(v).expect("finite float")
                    }
                    Cell::Float(_) | Cell::Empty => "null".into(),
                    Cell::Text(s) => serde_json::to_string(s).expect("string"),
                };
                let _ = write!(
                    out,
                    "{}: {}",
                    serde_json::to_string(name).expect("string"),
                    value
                );
            }
            out.push('}');
        }
        out.push_str(if self.rows.is_empty() { "]\n" } else { "\n]\n" });
        out
    }
}

struct Output {
    path: Option<PathBuf>,
    format: Format,
}

impl Output {
    fn write(&self, table: &Table) -> Result<(), CliError> {
        let text = table.render(self.format);
        match &self.path {
            Some(path) => write_file(path, &text),
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout
                    .write_all(text.as_bytes())
                    .and_then(|_| stdout.flush())
                    .map_err(|e| CliError::Usage(format!("cannot write to stdout: {e}")))
            }
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

/// Path of the reference-CDF file that accompanies a spectrum table.
pub fn companion_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ext = match out.extension() {
        Some(e) => format!(".{}", e.to_string_lossy()),
        None => String::new(),
    };
    out.with_file_name(format!("{stem}.mp_cdf{ext}"))
}

/// Parses `start:stop:count` into `count` evenly spaced points.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("grid {spec:?} must have the form start:stop:count"));
    }
    let start: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| format!("bad grid start {:?}", parts[0]))?;
    let stop: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| format!("bad grid stop {:?}", parts[1]))?;
    let count: usize = parts[2]
        .trim()
        .parse()
        .map_err(|_| format!("bad grid count {:?}", parts[2]))?;
    if count == 0 || !start.is_finite() || !stop.is_finite() {
        return Err(format!(
            "grid {spec:?} needs finite endpoints and count >= 1"
        ));
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    let step = (stop - start) / (count - 1) as f64;
    Ok((0..count)
        .map(|i| {
            if i + 1 == count {
                stop
            } else {
                start + step * i as f64
            }
        })
        .collect())
}

/// Runs the command line `argv` (including the program name) and returns
/// the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.threads {
        Some(0) => Err(CliError::Usage("--threads must be >= 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli)),
            Err(e) => Err(CliError::Usage(format!("cannot start thread pool: {e}"))),
        },
        None => dispatch(&cli),
    };
    match result {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Numeric(e)) => {
            eprintln!("numerical failure: {e}");
            1
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32, CliError> {
    let output = Output {
        path: cli.out.clone(),
        format: cli.format,
    };
    match &cli.command {
        Command::Capacity(args) => capacity(args, cli.units, &output),
        Command::Spectrum(args) => spectrum(args, &output),
        Command::Stieltjes(args) => stieltjes(args, &output),
        Command::Sweep(args) => sweep(args, cli, &output),
        Command::Verify(args) => verify_cmd(args, &output),
        Command::Reference(args) => reference(args, cli.units, &output),
    }
}

fn capacity(args: &NetworkArgs, units: Units, output: &Output) -> Result<i32, CliError> {
    let cfg = args.config()?;
    let trials = args.trials.unwrap_or(DEFAULT_CAPACITY_TRIALS);
    if trials == 0 {
        return Err(CliError::Usage("--trials must be >= 1".into()));
    }
    let est = ergodic_capacity(&cfg, trials)?;
    let mut table = Table::new([
        "n_s".to_string(),
        "n_d".into(),
        "k".into(),
        "L".into(),
        "snr_db".into(),
        "trials".into(),
        "seed".into(),
        format!("capacity_{}", units.suffix()),
        "stderr".into(),
    ]);
    table.push(vec![
        cfg.n_s.into(),
        cfg.n_d.into(),
        cfg.k.into(),
        cfg.l.into(),
        args.snr_db.into(),
        trials.into(),
        cfg.seed.into(),
        units.convert(est.mean).into(),
        units.convert(est.stderr).into(),
    ]);
    output.write(&table)?;
    Ok(0)
}

fn spectrum(args: &NetworkArgs, output: &Output) -> Result<i32, CliError> {
    let cfg = args.config()?;
    let trials = args.trials.unwrap_or(DEFAULT_SPECTRUM_TRIALS);
    if trials == 0 {
        return Err(CliError::Usage("--trials must be >= 1".into()));
    }
    let spectrum = pooled_spectrum(&cfg, trials)?;
    let mut table = Table::new(["eigenvalue"]);
    for &v in spectrum.values() {
        table.push(vec![v.into()]);
    }
    output.write(&table)?;

    if let Some(path) = &output.path {
        let top = 1.1
            * spectrum
                .max()
                .max(cfg.snr * crate::rmt::mp_edges(cfg.beta_s()).1);
        let mut reference = Table::new(["x", "mp_cdf"]);
        for i in 0..REFERENCE_GRID_POINTS {
            let x = top * i as f64 / (REFERENCE_GRID_POINTS - 1) as f64;
            reference.push(vec![x.into(), mp_cdf(cfg.beta_s(), x / cfg.snr).into()]);
        }
        Output {
            path: Some(companion_path(path)),
            format: output.format,
        }
        .write(&reference)?;
    }
    Ok(0)
}

fn stieltjes(args: &StieltjesArgs, output: &Output) -> Result<i32, CliError> {
    let ratios = AspectRatios::new(args.betas.clone()).map_err(CliError::usage)?;
    let grid = parse_grid(&args.s_grid).map_err(CliError::Usage)?;
    if let Some(bad) = grid.iter().find(|s| !(**s > 0.0)) {
        return Err(CliError::Usage(format!(
            "grid points must be > 0, got {bad}"
        )));
    }
    let mut table = Table::new(["s", "G_real", "G_imag", "residual"]);
    for s in grid {
        let sol = product_stieltjes(&ratios, Complex64::new(s, 0.0))?;
        table.push(vec![
            s.into(),
            sol.g.re.into(),
            sol.g.im.into(),
            sol.residual.into(),
        ]);
    }
    output.write(&table)?;
    Ok(0)
}

/// Reads and validates a sweep configuration file.
pub fn load_sweep_config(path: &Path) -> Result<SweepConfig, String> {
    let text =
        fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("malformed config {}: {e}", path.display()))
}

fn sweep(args: &SweepArgs, cli: &Cli, output: &Output) -> Result<i32, CliError> {
    let config = load_sweep_config(&args.config).map_err(CliError::Usage)?;
    if let Some(dist) = config.model.dist {
        if dist != EntryDistribution::ComplexGaussian {
            return Err(CliError::Usage(format!(
                "sweeps support gaussian entries only, got {dist}"
            )));
        }
    }
    let s = &config.sweep;
    let spec = SweepSpec {
        n: s.n,
        snr: db_to_linear(s.snr_db),
        gammas: s.gammas.clone(),
        l_values: s.l_values.clone(),
        k_rule: s.k_rule,
        trials: s.trials,
        seed: s.seed,
    };
    spec.validate().map_err(CliError::usage)?;
    // Flags given on the command line override the file.
    let format = if cli.format != Format::Csv {
        cli.format
    } else {
        config.output.format.unwrap_or(Format::Csv)
    };
    let units = if cli.units != Units::Nats {
        cli.units
    } else {
        config.output.units.unwrap_or(Units::Nats)
    };
    let output = Output {
        path: output.path.clone().or_else(|| config.output.path.clone()),
        format,
    };

    let rows = capacity_sweep(&spec)?;
    let reference = point_to_point_reference(spec.n, spec.snr, spec.trials, spec.seed)?;
    let c0_col = format!("c0_{}", units.suffix());
    let mut table = Table::new([
        "kind".to_string(),
        "gamma".into(),
        "L".into(),
        "k".into(),
        c0_col,
        "c0_stderr".into(),
        "trials".into(),
        "error".into(),
    ]);
    for r in &rows {
        table.push(vec![
            "relay".into(),
            r.gamma.into(),
            r.l.into(),
            r.k.into(),
            units.convert(r.c0_mean).into(),
            units.convert(r.c0_stderr).into(),
            r.trials.into(),
            r.error.as_deref().map_or(Cell::Empty, Cell::from),
        ]);
    }
    table.push(vec![
        "reference".into(),
        Cell::Empty,
        0usize.into(),
        spec.n.into(),
        units.convert(reference.c0()).into(),
        units.convert(reference.c0_stderr()).into(),
        reference.trials.into(),
        Cell::Empty,
    ]);
    output.write(&table)?;
    Ok(if rows.iter().any(|r| r.error.is_some()) {
        1
    } else {
        0
    })
}

fn verify_cmd(args: &VerifyArgs, output: &Output) -> Result<i32, CliError> {
    let outcomes = verify::run_all(args.seed);
    let mut table = Table::new(["id", "name", "passed", "detail"]);
    for o in &outcomes {
        eprintln!("{o}");
        table.push(vec![
            o.id.into(),
            o.name.into(),
            if o.passed { "true" } else { "false" }.into(),
            o.detail.as_str().into(),
        ]);
    }
    output.write(&table)?;
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    eprintln!(
        "{} of {} checks passed",
        outcomes.len() - failed,
        outcomes.len()
    );
    Ok(if failed == 0 { 0 } else { 1 })
}

fn reference(args: &ReferenceArgs, units: Units, output: &Output) -> Result<i32, CliError> {
    if args.n == 0 || args.trials == 0 {
        return Err(CliError::Usage("--n and --trials must be >= 1".into()));
    }
    let snr = db_to_linear(args.snr_db);
    if !(snr > 0.0) || !snr.is_finite() {
        return Err(CliError::Usage(format!(
            "--snr-db {} is out of range",
            args.snr_db
        )));
    }
    let est = point_to_point_reference(args.n, snr, args.trials, args.seed)?;
    let asymptotic = asymptotic_capacity(1.0, snr, 0)?;
    let mut table = Table::new([
        "n".to_string(),
        "snr_db".into(),
        "trials".into(),
        "seed".into(),
        format!("c0_{}", units.suffix()),
        "stderr".into(),
        format!("asymptotic_{}", units.suffix()),
    ]);
    table.push(vec![
        args.n.into(),
        args.snr_db.into(),
        args.trials.into(),
        args.seed.into(),
        units.convert(est.c0()).into(),
        units.convert(est.c0_stderr()).into(),
        units.convert(asymptotic).into(),
    ]);
    output.write(&table)?;
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("0.1:10:2").unwrap(), vec![0.1, 10.0]);
        let g = parse_grid("0.1:10:50").unwrap();
        assert_eq!(g.len(), 50);
        assert_eq!(g[0], 0.1);
        assert_eq!(g[49], 10.0);
        assert!((g[1] - 0.3020408163265306).abs() < 1e-15);
        assert_eq!(parse_grid("2:3:1").unwrap(), vec![2.0]);
        assert!(parse_grid("1:2").is_err());
        assert!(parse_grid("1:2:0").is_err());
        assert!(parse_grid("a:2:3").is_err());
    }

    #[test]
    fn companion_names() {
        assert_eq!(
            companion_path(Path::new("/tmp/spec.csv")),
            PathBuf::from("/tmp/spec.mp_cdf.csv")
        );
        assert_eq!(
            companion_path(Path::new("out")),
            PathBuf::from("out.mp_cdf")
        );
    }

    #[test]
    fn table_rendering() {
        let mut t = Table::new(["a", "b", "c"]);
        t.push(vec![1usize.into(), 0.5.into(), "x,y".into()]);
        t.push(vec![Cell::Empty, f64::NAN.into(), "z".into()]);
        assert_eq!(t.render(Format::Csv), "a,b,c\n1,0.5,\"x,y\"\n,NaN,z\n");
        assert_eq!(format_float(4.440892098500626e-16), "4.440892098500626e-16");
        assert_eq!(format_float(-2.5e20), "-2.5e20");
        assert_eq!(format_float(0.0), "0");
        assert_eq!(format_float(123.25), "123.25");
        assert_eq!(
            t.render(Format::Json),
            "[\n  {\"a\": 1, \"b\": 0.5, \"c\": \"x,y\"},\n  {\"a\": null, \"b\": null, \"c\": \"z\"}\n]\n"
        );
    }

    #[test]
    fn units_conversion() {
        assert_eq!(Units::Nats.convert(2.0), 2.0);
        assert!((Units::Bits.convert(std::f64::consts::LN_2) - 1.0).abs() < 1e-15);
    }
}
