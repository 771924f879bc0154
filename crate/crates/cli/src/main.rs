use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use swirlmhd_core::functionals::fmt_f64;
use swirlmhd_core::grid::{lp_norm, read_snapshot};
use swirlmhd_core::harness::config::LpSpec;
use swirlmhd_core::harness::data::embed_named;
use swirlmhd_core::harness::run::SUMMARY_COLUMNS;
use swirlmhd_core::harness::{run_suite, simulate, sweep, RunConfig, Suite};
use swirlmhd_core::littlewood_paley::besov_norm;
use swirlmhd_core::Error;

const EXIT_ASSERTION: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_BLOWUP: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "swirlmhd", version, about = "Axisymmetric MHD pure-swirl simulator and verification lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configuration and write CSV diagnostics and snapshots.
    Simulate {
        config: PathBuf,
        /// Output directory, overriding `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a verification suite; exits 0 iff every check passes.
    Verify {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(Suite::NAMES))]
        suite: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Also write the report to this file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print Lebesgue and optional Besov norms of a snapshot.
    Norms {
        snapshot: PathBuf,
        /// Besov indices `s,p,r`; `inf` is accepted for p and r. Repeatable.
        #[arg(long, value_name = "S,P,R", allow_hyphen_values = true)]
        besov: Vec<String>,
        /// Cartesian box size for the Besov embedding (power of two).
        #[arg(long, default_value_t = 32)]
        lp_n: usize,
        /// Cartesian box side; defaults to 2 max(Rmax, Lz).
        #[arg(long)]
        lp_l: Option<f64>,
    },
    /// Run one configuration per value of a parameter.
    Sweep {
        config: PathBuf,
        /// Config key to vary, e.g. `p` or `grid.Nr`.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        values: Vec<String>,
        /// Output directory, overriding `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A failure with its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::BlowUp { .. } => EXIT_BLOWUP,
            Error::Io(_) | Error::Csv(_) | Error::Format(_) => EXIT_IO,
            Error::Config { .. } | Error::Domain(_) | Error::Contract(_) => EXIT_INPUT,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn input(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INPUT,
        message: message.into(),
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_IO,
        message: format!("{}: {e}", path.display()),
    }
}

fn load_config(path: &Path, out: Option<PathBuf>) -> Result<RunConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    let mut cfg = RunConfig::parse(&text).map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    })?;
    if let Some(dir) = out {
        cfg.output.dir = dir;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate { config, out } => {
            let cfg = load_config(&config, out)?;
            let summary = simulate(&cfg)?;
            for (k, v) in SUMMARY_COLUMNS.iter().zip(summary.record()) {
                println!("{k} = {v}");
            }
            println!("output = {}", cfg.output.dir.display());
            Ok(())
        }
        Command::Verify { suite, seed, report } => {
            let suite: Suite = suite.parse()?;
            let r = run_suite(suite, seed)?;
            let text = r.render();
            print!("{text}");
            if let Some(path) = report {
                fs::write(&path, &text).map_err(|e| io_failure(&path, e))?;
            }
            if r.passed() {
                Ok(())
            } else {
                Err(Failure {
                    code: EXIT_ASSERTION,
                    message: format!("suite `{}` failed", suite.as_str()),
                })
            }
        }
        Command::Norms {
            snapshot,
            besov,
            lp_n,
            lp_l,
        } => {
            let file = fs::File::open(&snapshot).map_err(|e| io_failure(&snapshot, e))?;
            let snap = read_snapshot(BufReader::new(file))?;
            let f = &snap.field;
            let g = f.grid;
            println!("name = {}", snap.name);
            println!("time = {}", fmt_f64(snap.time));
            println!("grid = {}x{} Rmax={} Lz={}", g.nr, g.nz, g.rmax, g.lz);
            println!("parity = {}", f.parity.as_str());
            for (label, p) in [("1", 1.0), ("3/2", 1.5), ("2", 2.0), ("3", 3.0), ("inf", f64::INFINITY)] {
                println!("L^{label} = {}", fmt_f64(lp_norm(f, p, 0.0)));
            }
            if !besov.is_empty() {
                let lp = LpSpec {
                    enabled: true,
                    n: lp_n,
                    l: lp_l.unwrap_or(2.0 * g.rmax.max(g.lz)),
                };
                let u = embed_named(f, &snap.name, &lp)?;
                for spec in &besov {
                    let [s, p, r] = parse_triple(spec)?;
                    println!("B^{{{s}}}_{{{p},{r}}} = {}", fmt_f64(besov_norm(&u, s, p, r)?));
                }
            }
            Ok(())
        }
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => {
            let cfg = load_config(&config, out)?;
            let rows = sweep(&cfg, &param, &values)?;
            for row in &rows {
                match (&row.summary, &row.error) {
                    (Some(s), _) => println!("{param} = {}: {}", row.value, s.status),
                    (None, Some(e)) => println!("{param} = {}: error: {e}", row.value),
                    (None, None) => println!("{param} = {}: no result", row.value),
                }
            }
            println!("summary = {}", cfg.output.dir.join("sweep_summary.csv").display());
            Ok(())
        }
    }
}

fn parse_triple(spec: &str) -> Result<[f64; 3], Failure> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    let bad = || input(format!("--besov expects `s,p,r`, got `{spec}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let mut out = [0.0; 3];
    for (o, t) in out.iter_mut().zip(&parts) {
        *o = t.parse().map_err(|_| bad())?;
    }
    Ok(out)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_kinds_map_to_distinct_exit_codes() {
        let code = |e: Error| Failure::from(e).code;
        assert_eq!(code(Error::BlowUp { field: "B".into(), time: 0.5 }), EXIT_BLOWUP);
        assert_eq!(code(Error::Config { line: 3, message: "x".into() }), EXIT_INPUT);
        assert_eq!(code(Error::Format("x".into())), EXIT_IO);
        assert_ne!(EXIT_BLOWUP, EXIT_ASSERTION);
    }

    #[test]
    fn besov_triples() {
        assert_eq!(parse_triple("1, inf, 1").ok().unwrap(), [1.0, f64::INFINITY, 1.0]);
        assert!(parse_triple("1,2").is_err());
        assert!(parse_triple("a,b,c").is_err());
    }
}
