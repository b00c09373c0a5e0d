//! `ztf`: command-line front end for the time-frequency toolkit.
//!
//! Exit codes: 0 success, 1 verification violations, 2 usage or
//! configuration error, 3 numeric failure.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ztf::io::format_f64;
use ztf::locop::{self, OperatorKernel};
use ztf::modulation::{
    modulation_norm, orlicz_modulation_norm, symbol_modulation_norm, symbol_window, OrliczVariant, WindowSpec,
};
use ztf::orlicz::{lattice_norm, mixed_norm, mixed_norm_swapped, product_norm};
use ztf::stft::{stft, stft_on};
use ztf::verify::{
    diagnostics_json, generate_ensemble, report_jsonl, run_suite_with, CheckSpec, EnsembleKind, Environment,
    RunOptions, Sample,
};
use ztf::young::YoungFunction;
use ztf::{Error, LatticeSpec, PhaseSpaceField, Signal};

use config::{Config, LatticeConfig, DEFAULT_OUTPUT};

#[derive(Parser)]
#[command(
    name = "ztf",
    version,
    about = "STFT, Orlicz and modulation norms, and localization operators on Zⁿ × Tⁿ",
    after_help = "Flags override values from --config. Exit codes: 0 ok, 1 violations, 2 usage, 3 numeric failure."
)]
struct Cli {
    /// JSON config file; `default` selects the built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Lattice dimension n.
    #[arg(short = 'n', long = "dim", global = true)]
    n: Option<usize>,
    /// Support radius K.
    #[arg(short = 'K', long = "support", global = true)]
    k: Option<usize>,
    /// Computation radius C (default 3K).
    #[arg(short = 'C', long = "radius", global = true)]
    c: Option<usize>,
    /// Torus samples per axis M (default 6K+1).
    #[arg(short = 'M', long = "samples", global = true)]
    m: Option<usize>,
    /// Window: `gaussian`, `gaussian:WIDTH`, `kronecker`, `file:PATH`, or a
    /// JSON window spec.
    #[arg(long, global = true)]
    window: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random signal or symbol, or write the configured window.
    Gen {
        kind: GenKind,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// STFT of a signal file against the window.
    Stft {
        #[arg(long)]
        signal: PathBuf,
        /// Lattice radius of the output (default 2K).
        #[arg(long)]
        m_radius: Option<usize>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Print one norm with 17 significant digits.
    Norm(NormArgs),
    /// Apply a localization operator or export its kernel.
    Locop(LocopArgs),
    /// Print the spectral summary of a kernel as JSON.
    Spectrum(SpectrumArgs),
    /// Run the verification suite and write the JSON-Lines report, with
    /// `<output>.diagnostics.json` and the resolved `<output>.config.json`
    /// next to it.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    GaussianSignal,
    TrigSymbol,
    IndicatorSymbol,
    RankOneSymbol,
    Window,
}

#[derive(Args)]
struct NormArgs {
    /// `Mp` (e.g. M1, M2, Minf), `l-phi`, `L-phi`, `L-mixed`, `L-star`,
    /// `M-phi`, `M-phi-psi`, `W-phi-psi`, or `symbol-Mp`.
    #[arg(long)]
    space: String,
    /// Signal file, or field file for the L and symbol spaces.
    #[arg(long)]
    input: PathBuf,
    /// Young function Φ: `eq5`, `power:P`, `complementary:<spec>`, or JSON.
    #[arg(long)]
    phi: Option<String>,
    /// Second Young function; defaults to Φ.
    #[arg(long)]
    psi: Option<String>,
}

#[derive(Args)]
struct WindowFiles {
    /// Analysis window file (default: the configured window).
    #[arg(long)]
    g1: Option<PathBuf>,
    /// Synthesis window file (default: the configured window).
    #[arg(long)]
    g2: Option<PathBuf>,
}

#[derive(Args)]
#[group(id = "action", required = true, multiple = false, args = ["apply", "export"])]
struct LocopArgs {
    #[arg(long)]
    symbol: PathBuf,
    #[command(flatten)]
    windows: WindowFiles,
    /// Signal file to apply the operator to; the result goes to --output.
    #[arg(long)]
    apply: Option<PathBuf>,
    /// Write the kernel as JSON to this path.
    #[arg(long)]
    export: Option<PathBuf>,
    /// With --export, write raw little-endian (re, im) pairs plus a JSON
    /// sidecar instead.
    #[arg(long, requires = "export")]
    raw: bool,
    #[arg(short, long, requires = "apply")]
    output: Option<PathBuf>,
}

#[derive(Args)]
#[group(id = "source", required = true, multiple = false, args = ["symbol", "kernel"])]
struct SpectrumArgs {
    #[arg(long)]
    symbol: Option<PathBuf>,
    /// A kernel written by `locop --export`.
    #[arg(long)]
    kernel: Option<PathBuf>,
    #[command(flatten)]
    windows: WindowFiles,
    /// Schatten exponents.
    #[arg(long, value_delimiter = ',', default_value = "1,2,inf")]
    p: Vec<String>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Report path (default: config `output`, else report.jsonl).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Run only these checks (repeatable).
    #[arg(long = "check")]
    checks: Vec<String>,
    /// Trial count for every selected check.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    ensemble: Option<String>,
    /// Record wall-clock time in the `elapsed` field; reports then differ
    /// between runs.
    #[arg(long)]
    timing: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 3 } else { 2 })
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    let config = resolve_config(&cli)?;
    if let Some(threads) = config.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Usage(format!("cannot start {threads} threads: {e}")))?;
    }
    let ctx = Context { config };
    match cli.command {
        Command::Gen { kind, output } => ctx.gen(kind, &output),
        Command::Stft { signal, m_radius, output } => ctx.stft(&signal, m_radius, &output),
        Command::Norm(args) => ctx.norm(&args),
        Command::Locop(args) => ctx.locop(&args),
        Command::Spectrum(args) => ctx.spectrum(&args),
        Command::Verify(args) => ctx.verify(&args),
    }
}

/// Config file (or defaults) with the command-line flags applied on top,
/// validated before anything is computed.
fn resolve_config(cli: &Cli) -> Result<Config, Error> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if cli.n.is_some() || cli.k.is_some() || cli.c.is_some() {
        let base = config.lattice.unwrap_or(LatticeConfig { n: 1, k: 8, c: None });
        let k = cli.k.unwrap_or(base.k);
        let c = cli.c.or(if cli.k.is_some() { None } else { base.c });
        config.lattice = Some(LatticeConfig { n: cli.n.unwrap_or(base.n), k, c });
    }
    if let Some(m) = cli.m {
        config.torus.m = Some(m);
    }
    if let Some(w) = &cli.window {
        config.window = parse_window(w)?;
    }
    if let Some(t) = cli.threads {
        config.threads = Some(t);
    }
    config.validate()?;
    Ok(config)
}

fn parse_window(text: &str) -> Result<WindowSpec, Error> {
    if text.trim_start().starts_with('{') {
        return Ok(serde_json::from_str(text)?);
    }
    match text.split_once(':') {
        None if text == "gaussian" => Ok(WindowSpec::gaussian()),
        None if text == "kronecker" => Ok(WindowSpec::kronecker()),
        Some(("gaussian", w)) => {
            let width: f64 = w.parse().map_err(|_| Error::Usage(format!("bad Gaussian width {w:?}")))?;
            Ok(WindowSpec::gaussian_width(width))
        }
        Some(("file", path)) => Ok(WindowSpec {
            kind: ztf::modulation::WindowKind::File { path: path.into() },
            normalization: Default::default(),
        }),
        _ => Err(Error::Usage(format!("unknown window {text:?}"))),
    }
}

/// `eq5`, `power:P`, `complementary:<spec>`, or a JSON Young-function spec.
fn parse_young(text: &str) -> Result<YoungFunction, Error> {
    let phi = if text.trim_start().starts_with('{') {
        serde_json::from_str(text)?
    } else if text == "eq5" {
        YoungFunction::eq5()
    } else if let Some(p) = text.strip_prefix("power:") {
        YoungFunction::power(parse_exponent(p)?)?
    } else if let Some(base) = text.strip_prefix("complementary:") {
        YoungFunction::complementary_of(parse_young(base)?)
    } else {
        return Err(Error::Usage(format!("unknown Young function {text:?}")));
    };
    phi.validate()?;
    Ok(phi)
}

fn parse_exponent(text: &str) -> Result<f64, Error> {
    match text {
        "inf" | "∞" => Ok(f64::INFINITY),
        _ => text.parse().map_err(|_| Error::Usage(format!("bad exponent {text:?}"))),
    }
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Usage(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|e| Error::Usage(format!("cannot write {}: {e}", path.display())))
}

fn read_signal(path: &Path) -> Result<Signal, Error> {
    Signal::from_json(&read(path)?)
}

struct Context {
    config: Config,
}

impl Context {
    fn environment(&self) -> Result<Environment, Error> {
        let spec = self.config.lattice_spec()?;
        Environment::new(spec, self.config.torus_grid(spec)?, self.config.window.clone())
    }

    /// Field files do not record `C`; an explicit lattice supplies it.
    fn read_field(&self, path: &Path) -> Result<PhaseSpaceField, Error> {
        let lattice = self.config.lattice.is_some().then(|| self.config.lattice_spec()).transpose()?;
        PhaseSpaceField::from_json(&read(path)?, lattice)
    }

    fn window(&self, spec: LatticeSpec, file: Option<&Path>) -> Result<Signal, Error> {
        let g = match file {
            Some(path) => read_signal(path)?,
            None => self.config.window.build(spec)?,
        };
        if *g.spec() != spec {
            return Err(Error::Shape("window and input live on different lattices".into()));
        }
        Ok(g)
    }

    fn young(&self, flag: Option<&str>, fallback: &YoungFunction) -> Result<YoungFunction, Error> {
        flag.map(parse_young).unwrap_or_else(|| Ok(fallback.clone()))
    }

    fn gen(&self, kind: GenKind, output: &Path) -> Result<ExitCode, Error> {
        let env = self.environment()?;
        let ensemble = match kind {
            GenKind::Window => {
                write(output, &env.window_signal().to_json()?)?;
                return Ok(ExitCode::SUCCESS);
            }
            GenKind::GaussianSignal => EnsembleKind::GaussianSignal,
            GenKind::TrigSymbol => EnsembleKind::TrigSymbol,
            GenKind::IndicatorSymbol => EnsembleKind::IndicatorSymbol,
            GenKind::RankOneSymbol => EnsembleKind::RankOneSymbol,
        };
        let text = match generate_ensemble(ensemble, &env, self.config.seed)? {
            Sample::Signal(s) => s.to_json()?,
            Sample::Field(f) => f.to_json()?,
        };
        write(output, &text)?;
        Ok(ExitCode::SUCCESS)
    }

    fn stft(&self, signal: &Path, m_radius: Option<usize>, output: &Path) -> Result<ExitCode, Error> {
        let f = read_signal(signal)?;
        let spec = *f.spec();
        let g = self.window(spec, None)?;
        let field = match m_radius {
            Some(r) => stft_on(&f, &g, &self.config.torus_grid(spec)?, r)?,
            None => stft(&f, &g)?,
        };
        write(output, &field.to_json()?)?;
        Ok(ExitCode::SUCCESS)
    }

    fn norm(&self, args: &NormArgs) -> Result<ExitCode, Error> {
        let phi = self.young(args.phi.as_deref(), &self.config.young.phi)?;
        let psi = match (&args.psi, &self.config.young.psi) {
            (Some(text), _) => parse_young(text)?,
            (None, Some(psi)) => psi.clone(),
            (None, None) => phi.clone(),
        };
        let space = args.space.as_str();
        let value = if let Some(p) = space.strip_prefix("symbol-M") {
            let field = self.read_field(&args.input)?;
            let window = symbol_window(*field.spec(), field.torus())?;
            symbol_modulation_norm(&field, &window, parse_exponent(p)?)?
        } else if space.starts_with('L') {
            let field = self.read_field(&args.input)?;
            match space {
                "L-phi" => product_norm(&field, &phi)?,
                "L-mixed" => mixed_norm(&field, &phi, &psi)?,
                "L-star" => mixed_norm_swapped(&field, &phi, &psi)?,
                _ => return Err(unknown_space(space)),
            }
        } else {
            let f = read_signal(&args.input)?;
            let variant = match space {
                "l-phi" => None,
                "M-phi" => Some(OrliczVariant::Single),
                "M-phi-psi" => Some(OrliczVariant::Mixed),
                "W-phi-psi" => Some(OrliczVariant::Wiener),
                _ if space.starts_with('M') => {
                    let p = parse_exponent(&space[1..]).map_err(|_| unknown_space(space))?;
                    let g = self.window(*f.spec(), None)?;
                    println!("{}", format_f64(modulation_norm(&f, &g, p)?));
                    return Ok(ExitCode::SUCCESS);
                }
                _ => return Err(unknown_space(space)),
            };
            match variant {
                None => lattice_norm(&f, &phi)?,
                Some(v) => orlicz_modulation_norm(&f, &self.window(*f.spec(), None)?, &phi, Some(&psi), v)?,
            }
        };
        println!("{}", format_f64(value));
        Ok(ExitCode::SUCCESS)
    }

    fn windows(&self, spec: LatticeSpec, files: &WindowFiles) -> Result<(Signal, Signal), Error> {
        Ok((self.window(spec, files.g1.as_deref())?, self.window(spec, files.g2.as_deref())?))
    }

    fn kernel(&self, symbol: &Path, files: &WindowFiles) -> Result<OperatorKernel, Error> {
        let sigma = self.read_field(symbol)?;
        let (g1, g2) = self.windows(*sigma.spec(), files)?;
        Ok(locop::kernel(&sigma, &g1, &g2)?
            .with_provenance("symbol", symbol.display().to_string())
            .with_provenance("g1", window_label(&self.config.window, files.g1.as_deref()))
            .with_provenance("g2", window_label(&self.config.window, files.g2.as_deref())))
    }

    fn locop(&self, args: &LocopArgs) -> Result<ExitCode, Error> {
        if let Some(input) = &args.apply {
            let sigma = self.read_field(&args.symbol)?;
            let (g1, g2) = self.windows(*sigma.spec(), &args.windows)?;
            let out = locop::apply(&sigma, &g1, &g2, &read_signal(input)?)?.to_json()?;
            match &args.output {
                Some(path) => write(path, &out)?,
                None => println!("{out}"),
            }
        } else if let Some(path) = &args.export {
            let k = self.kernel(&args.symbol, &args.windows)?;
            if args.raw {
                let sidecar = k.write_raw(path)?;
                println!("{}", sidecar.display());
            } else {
                write(path, &k.to_json()?)?;
            }
        }
        Ok(ExitCode::SUCCESS)
    }

    fn spectrum(&self, args: &SpectrumArgs) -> Result<ExitCode, Error> {
        let k = match (&args.kernel, &args.symbol) {
            (Some(path), _) => OperatorKernel::from_json(&read(path)?)?,
            (None, Some(symbol)) => self.kernel(symbol, &args.windows)?,
            (None, None) => unreachable!("clap requires a source"),
        };
        let ps = args.p.iter().map(|p| parse_exponent(p)).collect::<Result<Vec<_>, _>>()?;
        println!("{}", locop::spectrum(&k, &ps)?.to_json()?);
        Ok(ExitCode::SUCCESS)
    }

    fn verify(&self, args: &VerifyArgs) -> Result<ExitCode, Error> {
        let env = self.environment()?;
        let mut specs = self.config.check_specs()?;
        if !args.checks.is_empty() {
            specs = args
                .checks
                .iter()
                .map(|id| match specs.iter().find(|s| &s.id == id) {
                    Some(s) => Ok(s.clone()),
                    None => CheckSpec::new(id, self.config.seed),
                })
                .collect::<Result<_, _>>()?;
        }
        if let Some(t) = args.trials {
            specs.iter_mut().for_each(|s| s.trials = t);
        }
        if let Some(name) = &args.ensemble {
            let kind: EnsembleKind = name.parse()?;
            specs.iter_mut().for_each(|s| s.ensemble = Some(kind));
        }
        let results = run_suite_with(&specs, &env, RunOptions { timing: args.timing })?;
        let output = args.output.clone().or_else(|| self.config.output.clone()).unwrap_or_else(|| DEFAULT_OUTPUT.into());
        write(&output, &report_jsonl(&results)?)?;
        write(&sibling(&output, ".diagnostics.json"), &diagnostics_json(&results)?)?;
        write(&sibling(&output, ".config.json"), &self.config.to_json()?)?;
        let mut failed = 0;
        for r in &results {
            if !r.passed() {
                failed += 1;
            }
            eprintln!(
                "{} {:<32} {:>5} trials  {:>4} violations  worst margin {}",
                if r.passed() { "PASS" } else { "FAIL" },
                r.id,
                r.trials,
                r.violations,
                format_f64(r.worst_margin)
            );
        }
        Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
    }
}

/// `path` with `suffix` appended to its file name.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(suffix);
    name.into()
}

fn unknown_space(space: &str) -> Error {
    Error::Usage(format!("unknown space {space:?}"))
}

fn window_label(spec: &WindowSpec, file: Option<&Path>) -> String {
    match file {
        Some(path) => format!("file({})", path.display()),
        None => spec.id(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn young_shorthand() {
        assert_eq!(parse_young("eq5").unwrap(), YoungFunction::eq5());
        assert_eq!(parse_young("power:2").unwrap(), YoungFunction::power(2.0).unwrap());
        assert_eq!(
            parse_young("complementary:power:3").unwrap(),
            YoungFunction::complementary_of(YoungFunction::power(3.0).unwrap())
        );
        assert_eq!(parse_young(r#"{"kind":"power","p":1.5}"#).unwrap(), YoungFunction::power(1.5).unwrap());
        assert!(parse_young("power:0.5").is_err());
        assert!(parse_young("cosh").is_err());
    }

    #[test]
    fn window_shorthand() {
        assert_eq!(parse_window("gaussian").unwrap(), WindowSpec::gaussian());
        assert_eq!(parse_window("gaussian:2.5").unwrap(), WindowSpec::gaussian_width(2.5));
        assert_eq!(parse_window("kronecker").unwrap(), WindowSpec::kronecker());
        assert_eq!(parse_window(r#"{"kind":"kronecker"}"#).unwrap(), WindowSpec::kronecker());
        assert!(parse_window("hann").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
