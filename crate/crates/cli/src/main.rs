mod config;
mod error;
mod io;

use std::fmt::Write as _;
use std::fs;
use std::process::ExitCode;

use clap::Parser;
use log::{debug, info};
use tsvdecomp::{decompose_observed, make_phantom, DecompositionResult, ScalarField, SolverState};

use config::{Args, RunConfig, Source};
use error::CliError;
use io::SaveMode;

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            // --help and --version land here too, with exit code 0
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match RunConfig::resolve(&args).and_then(|cfg| run(&cfg)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tsvdecomp: {}", e.message());
            e.exit_code()
        }
    }
}

fn init_logging(verbosity: u8) {
    let level = match verbosity {
        0 => log::LevelFilter::Error,
        1 => log::LevelFilter::Warn,
        2 => log::LevelFilter::Info,
        3 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
}

fn run(cfg: &RunConfig) -> Result<(), CliError> {
    init_logging(cfg.verbosity);
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot set up {} threads: {e}", cfg.threads)))?;
    }

    let f = match cfg.source.as_ref().expect("validated") {
        Source::File(path) => io::load_image(path)?,
        Source::Phantom { kind, rows, cols } => make_phantom(*kind, *rows, *cols, cfg.seed)?.image,
    };
    fs::create_dir_all(&cfg.outdir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", cfg.outdir.display())))?;
    info!("{}x{} input, {} iterations", f.rows(), f.cols(), cfg.solver.max_iters);

    let mut progress = |stage: usize, _: &ScalarField, state: &SolverState| {
        if state.iter.is_multiple_of(100) {
            debug!("stage {stage} iteration {}", state.iter);
        }
    };
    let denoise = cfg.denoise.then_some(&cfg.nlm);
    let result = decompose_observed(&f, &cfg.tsv, &cfg.solver, denoise, &mut progress)?;
    if let Some(last) = result.trace.last() {
        info!(
            "done after {} iterations, energy {:.6e}",
            result.iterations(),
            last.terms.total
        );
    }
    write_outputs(cfg, &f, &result)
}

fn write_outputs(cfg: &RunConfig, f: &ScalarField, result: &DecompositionResult) -> Result<(), CliError> {
    let out = |name: &str| cfg.outdir.join(name);
    io::save_png(&result.u, &out("u.png"), SaveMode::Clamp01)?;
    io::save_pgm(&result.u, &out("u.pgm"), SaveMode::Clamp01)?;
    io::save_png(&result.v_total, &out("v.png"), SaveMode::Texture)?;
    if matches!(cfg.source, Some(Source::Phantom { .. })) {
        io::save_png(f, &out("input.png"), SaveMode::Clamp01)?;
    }
    if cfg.raw {
        io::save_raw(&result.u, &out("u.raw"))?;
        io::save_raw(&result.v_total, &out("v.raw"))?;
    }
    if cfg.export_eta {
        for (k, eta) in result.eta_stages.iter().enumerate() {
            io::save_png(eta.eta(), &out(&format!("eta_{}.png", k + 1)), SaveMode::Normalize)?;
            if cfg.raw {
                io::save_raw(eta.eta(), &out(&format!("eta_{}.raw", k + 1)))?;
            }
        }
    }

    let mut csv = String::from("iter,tv,g,fid,total\n");
    for r in result.trace.records() {
        let t = &r.terms;
        let _ = writeln!(csv, "{},{},{},{},{}", r.iter, t.tv, t.g, t.fid, t.total);
    }
    let path = out("energy.csv");
    fs::write(&path, csv).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}
