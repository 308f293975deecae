//! Run configuration: defaults, then `key=value` config file, then flags.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Parser;
use tsvdecomp::{EtaMode, NlmParams, PhantomKind, SolverParams, TsvParams};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "tsvdecomp",
    version,
    about = "Cartoon/texture decomposition with a TSV-weighted G-norm",
    long_about = "Splits a grayscale image f into a piecewise smooth part u and a texture part v.\n\
                  Writes u.png, u.pgm, v.png (texture shown around mid-gray) and energy.csv to the\n\
                  output directory. A config file holds `key=value` lines using the long flag names;\n\
                  flags given on the command line override it."
)]
pub struct Args {
    /// Input image (binary PGM or PNG).
    #[arg(long, value_name = "PATH", conflicts_with = "phantom")]
    pub input: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, value_name = "PATH")]
    pub outdir: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[arg(long, value_name = "F")]
    pub alpha1: Option<f64>,
    #[arg(long, value_name = "F")]
    pub alpha2: Option<f64>,
    #[arg(long, value_name = "F")]
    pub theta: Option<f64>,
    #[arg(long, value_name = "F")]
    pub dt: Option<f64>,
    #[arg(long, value_name = "F")]
    pub cfrozen: Option<f64>,
    /// Use --cfrozen as given even where it makes the g update unstable.
    #[arg(long)]
    pub strict_frozen: bool,
    #[arg(long, value_name = "F")]
    pub sigma1: Option<f64>,
    #[arg(long, value_name = "F")]
    pub sigma2: Option<f64>,
    #[arg(long, value_name = "F")]
    pub kappa: Option<f64>,
    #[arg(long, value_name = "I")]
    pub window: Option<usize>,
    #[arg(long, value_name = "I")]
    pub iters: Option<usize>,
    #[arg(long, value_name = "I")]
    pub restart_every: Option<usize>,
    /// tsv or constant.
    #[arg(long, value_name = "MODE")]
    pub eta_mode: Option<String>,
    #[arg(long, value_name = "F")]
    pub eta_const: Option<f64>,

    /// Non-local means pre-filter for the first weight.
    #[arg(long)]
    pub denoise: bool,
    #[arg(long, value_name = "I")]
    pub nlm_patch: Option<usize>,
    #[arg(long, value_name = "I")]
    pub nlm_search: Option<usize>,
    /// Filter strength on the [0,1] intensity scale.
    #[arg(long, value_name = "F")]
    pub nlm_h: Option<f64>,

    /// Write the weight of every restart stage as eta_<k>.png.
    #[arg(long)]
    pub export_eta: bool,
    /// Also write u.raw, v.raw (and eta_<k>.raw) as little-endian f64 grids.
    #[arg(long)]
    pub raw: bool,

    /// Synthetic input instead of --input: stripes, tiles or two-scale.
    #[arg(long, value_name = "KIND")]
    pub phantom: Option<String>,
    /// Phantom size as ROWSxCOLS or a single side length.
    #[arg(long, value_name = "MxN")]
    pub phantom_size: Option<String>,
    #[arg(long, value_name = "I")]
    pub seed: Option<u64>,

    /// Worker threads, 0 for one per core.
    #[arg(long, value_name = "I")]
    pub threads: Option<usize>,
    /// More log output; repeat for more.
    #[arg(short, long, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Errors only.
    #[arg(short, long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    File(PathBuf),
    Phantom {
        kind: PhantomKind,
        rows: usize,
        cols: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: Option<Source>,
    pub outdir: PathBuf,
    pub tsv: TsvParams,
    pub solver: SolverParams,
    pub denoise: bool,
    pub nlm: NlmParams,
    pub export_eta: bool,
    pub raw: bool,
    pub seed: u64,
    pub threads: usize,
    /// 0 errors, 1 warnings, 2 info, 3 debug, 4+ trace.
    pub verbosity: u8,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            source: None,
            outdir: PathBuf::from("."),
            tsv: TsvParams::default(),
            solver: SolverParams::default(),
            denoise: false,
            nlm: NlmParams::default(),
            export_eta: false,
            raw: false,
            seed: 0,
            threads: 0,
            verbosity: 2,
        }
    }
}

const DEFAULT_PHANTOM_SIDE: usize = 128;

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(CliError::Usage(format!("invalid boolean `{value}` for `{key}`"))),
    }
}

fn parse_eta_mode(value: &str) -> Result<EtaMode, CliError> {
    match value.trim() {
        "tsv" => Ok(EtaMode::Tsv),
        "constant" => Ok(EtaMode::Constant),
        other => Err(CliError::Usage(format!(
            "eta mode must be `tsv` or `constant`, got `{other}`"
        ))),
    }
}

fn parse_size(value: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Usage(format!("phantom size must look like 128 or 96x128, got `{value}`"));
    let value = value.trim();
    match value.split_once(['x', 'X']) {
        Some((m, n)) => Ok((
            m.trim().parse().map_err(|_| bad())?,
            n.trim().parse().map_err(|_| bad())?,
        )),
        None => {
            let side = value.parse().map_err(|_| bad())?;
            Ok((side, side))
        }
    }
}

/// Pieces of the source that can arrive separately from file and flags.
#[derive(Debug, Default)]
struct SourceParts {
    input: Option<PathBuf>,
    phantom: Option<PhantomKind>,
    size: Option<(usize, usize)>,
}

impl RunConfig {
    /// Applies one `key=value` setting. Keys are the long flag names; `_` and
    /// `-` are interchangeable.
    fn set(&mut self, parts: &mut SourceParts, key: &str, value: &str) -> Result<(), CliError> {
        let key = key.trim().replace('_', "-");
        let k = key.as_str();
        match k {
            "input" => {
                parts.input = Some(PathBuf::from(value.trim()));
                parts.phantom = None;
            }
            "phantom" => {
                parts.phantom = Some(
                    value
                        .trim()
                        .parse()
                        .map_err(|e: tsvdecomp::Error| CliError::Usage(e.to_string()))?,
                );
                parts.input = None;
            }
            "phantom-size" => parts.size = Some(parse_size(value)?),
            "outdir" => self.outdir = PathBuf::from(value.trim()),
            "alpha1" => self.solver.alpha1 = parse(k, value)?,
            "alpha2" => self.solver.alpha2 = parse(k, value)?,
            "theta" => self.solver.theta = parse(k, value)?,
            "dt" => self.solver.dt = parse(k, value)?,
            "cfrozen" => self.solver.c_frozen = parse(k, value)?,
            "strict-frozen" => self.solver.stabilize_frozen = !parse_bool(k, value)?,
            "sigma1" => self.tsv.sigma1 = parse(k, value)?,
            "sigma2" => self.tsv.sigma2 = parse(k, value)?,
            "kappa" => self.tsv.kappa = parse(k, value)?,
            "window" => self.tsv.window = parse(k, value)?,
            "iters" => self.solver.max_iters = parse(k, value)?,
            "restart-every" => self.solver.restart_every = parse(k, value)?,
            "eta-mode" => self.solver.eta_mode = parse_eta_mode(value)?,
            "eta-const" => self.solver.constant_eta = parse(k, value)?,
            "denoise" => self.denoise = parse_bool(k, value)?,
            "nlm-patch" => self.nlm.patch = parse(k, value)?,
            "nlm-search" => self.nlm.search = parse(k, value)?,
            "nlm-h" => self.nlm.h = parse(k, value)?,
            "export-eta" => self.export_eta = parse_bool(k, value)?,
            "raw" => self.raw = parse_bool(k, value)?,
            "seed" => self.seed = parse(k, value)?,
            "threads" => self.threads = parse(k, value)?,
            "verbosity" => self.verbosity = parse(k, value)?,
            _ => return Err(CliError::Usage(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    fn apply_file(&mut self, parts: &mut SourceParts, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        for (lineno, line) in text.lines().enumerate() {
            let line = match line.find('#') {
                Some(pos) => &line[..pos],
                None => line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("{}:{}: expected key=value", path.display(), lineno + 1)))?;
            self.set(parts, key, value)
                .map_err(|e| CliError::Usage(format!("{}:{}: {}", path.display(), lineno + 1, e.message())))?;
        }
        Ok(())
    }

    pub fn resolve(args: &Args) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        let mut parts = SourceParts::default();
        if let Some(path) = &args.config {
            cfg.apply_file(&mut parts, path)?;
        }

        let mut flags: Vec<(&str, String)> = Vec::new();
        let mut opt = |key: &'static str, v: Option<String>| {
            if let Some(v) = v {
                flags.push((key, v));
            }
        };
        opt("input", args.input.as_ref().map(|p| p.display().to_string()));
        opt("phantom", args.phantom.clone());
        opt("phantom-size", args.phantom_size.clone());
        opt("outdir", args.outdir.as_ref().map(|p| p.display().to_string()));
        opt("alpha1", args.alpha1.map(|x| x.to_string()));
        opt("alpha2", args.alpha2.map(|x| x.to_string()));
        opt("theta", args.theta.map(|x| x.to_string()));
        opt("dt", args.dt.map(|x| x.to_string()));
        opt("cfrozen", args.cfrozen.map(|x| x.to_string()));
        opt("sigma1", args.sigma1.map(|x| x.to_string()));
        opt("sigma2", args.sigma2.map(|x| x.to_string()));
        opt("kappa", args.kappa.map(|x| x.to_string()));
        opt("window", args.window.map(|x| x.to_string()));
        opt("iters", args.iters.map(|x| x.to_string()));
        opt("restart-every", args.restart_every.map(|x| x.to_string()));
        opt("eta-mode", args.eta_mode.clone());
        opt("eta-const", args.eta_const.map(|x| x.to_string()));
        opt("nlm-patch", args.nlm_patch.map(|x| x.to_string()));
        opt("nlm-search", args.nlm_search.map(|x| x.to_string()));
        opt("nlm-h", args.nlm_h.map(|x| x.to_string()));
        opt("seed", args.seed.map(|x| x.to_string()));
        opt("threads", args.threads.map(|x| x.to_string()));
        for (key, on) in [
            ("strict-frozen", args.strict_frozen),
            ("denoise", args.denoise),
            ("export-eta", args.export_eta),
            ("raw", args.raw),
        ] {
            if on {
                flags.push((key, "true".into()));
            }
        }
        for (key, value) in &flags {
            cfg.set(&mut parts, key, value)?;
        }
        if args.quiet {
            cfg.verbosity = 0;
        } else if args.verbose > 0 {
            cfg.verbosity = cfg.verbosity.saturating_add(args.verbose);
        }

        cfg.source = match (parts.input, parts.phantom) {
            (Some(path), _) => Some(Source::File(path)),
            (None, Some(kind)) => {
                let (rows, cols) = parts.size.unwrap_or((DEFAULT_PHANTOM_SIDE, DEFAULT_PHANTOM_SIDE));
                Some(Source::Phantom { kind, rows, cols })
            }
            (None, None) => None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.source.is_none() {
            return Err(CliError::Usage("one of --input or --phantom is required".into()));
        }
        let usage = |e: tsvdecomp::Error| CliError::Usage(e.to_string());
        self.tsv.validate().map_err(usage)?;
        self.solver.validate().map_err(usage)?;
        if self.denoise {
            self.nlm.validate().map_err(usage)?;
        }
        Ok(())
    }
}
