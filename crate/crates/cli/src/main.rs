use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;
use weightlab::exponents::{solve_consistency, Exponent, PartialTuple};
use weightlab::maximal::{maximal_bound, AscentBudget};
use weightlab::rdf::{factor_pair, FactorParams, RdfOptions};
use weightlab::space::{make_cyclic_space, make_dyadic_space, validate_basis, SetBasis, SpaceFile};
use weightlab::transfer::{transference_check, FiniteAbelianGroup, GroupHom, Multiplier, TransferVerdict};
use weightlab::weights::{characteristic, Weight};
use weightlab_cli::config::RunConfig;
use weightlab_cli::report::{write_file, write_trials_csv, Report};
use weightlab_cli::run::{report_passed, run_config};
use weightlab_cli::suite::{run_suite, SuitePayload};
use weightlab_cli::trace::trace;

#[derive(Parser)]
#[command(name = "weightlab", version, about = "Weighted norm inequalities checked on finite spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build or validate spaces with a basis of sets.
    #[command(subcommand)]
    Space(SpaceCommand),
    /// Complete exponent tuples.
    #[command(subcommand)]
    Exponents(ExponentsCommand),
    /// Two-weight characteristic [w, v]_(s, r).
    Char {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        w: PathBuf,
        #[arg(long)]
        v: PathBuf,
        #[arg(long)]
        s: Exponent,
        #[arg(long)]
        r: Exponent,
    },
    /// Weighted norm of the maximal operator from L^p_v to L^p_w (v = w when absent).
    Maxop {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        w: PathBuf,
        #[arg(long)]
        v: Option<PathBuf>,
        #[arg(long)]
        p: Exponent,
        #[arg(long, default_value_t = 32)]
        restarts: usize,
        #[arg(long, default_value_t = 500)]
        iterations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Factor weights for one pair of functions.
    Rdf {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        w: PathBuf,
        #[arg(long)]
        v: PathBuf,
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        h: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        kappa: f64,
    },
    /// Run the bound harness described by a TOML config.
    Extrapolate {
        #[arg(long)]
        config: PathBuf,
        /// Report path; stdout when absent and the config names none.
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Transference of a multiplier along a group homomorphism.
    Transfer {
        /// Factors of H, e.g. "4" or "2,4".
        #[arg(long = "H")]
        h: String,
        /// Factors of G.
        #[arg(long = "G")]
        g: String,
        /// Matrix with one row per factor of G: rows split by ';', entries by ','.
        #[arg(long)]
        phi: String,
        #[arg(long)]
        p: Exponent,
        /// Weight on H.
        #[arg(long)]
        w: PathBuf,
        /// Multiplier on the dual of G.
        #[arg(long)]
        m: PathBuf,
        #[arg(long, default_value_t = 32)]
        restarts: usize,
        #[arg(long, default_value_t = 500)]
        iterations: usize,
    },
    /// Statement to test mapping, with verdicts from a suite report if given.
    Trace {
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the acceptance criteria.
    Suite {
        #[arg(long)]
        seed: u64,
        /// Criteria to run, e.g. "1,2,7"; all when absent.
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SpaceCommand {
    /// Check cover, pair containment and set measures.
    Validate { file: PathBuf },
    /// Print a built-in space as JSON.
    Make {
        #[arg(long, value_parser = ["dyadic", "cyclic"])]
        kind: String,
        /// Levels for dyadic, order for cyclic.
        #[arg(long)]
        size: u32,
    },
}

#[derive(Subcommand)]
enum ExponentsCommand {
    /// Fill in the missing exponents from the known ones.
    Solve {
        #[arg(long)]
        q0: Option<Exponent>,
        #[arg(long)]
        p0: Option<Exponent>,
        #[arg(long)]
        s0: Option<Exponent>,
        #[arg(long)]
        r0: Option<Exponent>,
        #[arg(long)]
        q: Option<Exponent>,
        #[arg(long)]
        p: Option<Exponent>,
        #[arg(long)]
        s: Option<Exponent>,
        #[arg(long)]
        r: Option<Exponent>,
        /// Reciprocal shift 1/gamma, if known.
        #[arg(long, allow_hyphen_values = true)]
        gamma_recip: Option<f64>,
    },
}

fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_space(path: &Path) -> anyhow::Result<SetBasis> {
    let file: SpaceFile = read_json(path)?;
    Ok(file.into_basis()?)
}

fn print<T: Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn factors(s: &str) -> anyhow::Result<Vec<usize>> {
    s.split([',', 'x'])
        .map(|t| t.trim().parse::<usize>().with_context(|| format!("bad group factor {t:?}")))
        .collect()
}

fn matrix(s: &str) -> anyhow::Result<Vec<Vec<i64>>> {
    s.split(';')
        .map(|row| {
            row.split(',')
                .map(|t| t.trim().parse::<i64>().with_context(|| format!("bad matrix entry {t:?}")))
                .collect()
        })
        .collect()
}

fn emit(report: &Report, path: Option<&Path>) -> anyhow::Result<()> {
    let text = report.to_json()?;
    match path {
        Some(p) => write_file(p, text.as_bytes()),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

/// Returns whether the command's checks passed.
fn execute(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Space(SpaceCommand::Validate { file }) => {
            let report = validate_basis(&read_space(&file)?);
            print(&json!({ "report": report, "summary": report.summary() }))?;
            Ok(report.ok)
        }
        Command::Space(SpaceCommand::Make { kind, size }) => {
            let basis = match kind.as_str() {
                "dyadic" => make_dyadic_space(size)?,
                _ => make_cyclic_space(size as usize)?.0,
            };
            print(&basis.to_file())?;
            Ok(true)
        }
        Command::Exponents(ExponentsCommand::Solve {
            q0,
            p0,
            s0,
            r0,
            q,
            p,
            s,
            r,
            gamma_recip,
        }) => {
            let known = PartialTuple { q0, p0, s0, r0, q, p, s, r };
            let solved = solve_consistency(&known, gamma_recip)?;
            let complete = solved.complete().ok();
            let in_region = complete.as_ref().map(|t| t.region().contains_tuple(t));
            print(&json!({
                "gamma_recip": solved.gamma_recip,
                "exponents": solved.exponents,
                "complete": complete,
                "in_region": in_region,
            }))?;
            Ok(true)
        }
        Command::Char { space, w, v, s, r } => {
            let basis = read_space(&space)?;
            let (w, v): (Weight, Weight) = (read_json(&w)?, read_json(&v)?);
            w.check_len(basis.n_points())?;
            v.check_len(basis.n_points())?;
            print(&characteristic(&w, &v, s, r, &basis))?;
            Ok(true)
        }
        Command::Maxop {
            space,
            w,
            v,
            p,
            restarts,
            iterations,
            seed,
        } => {
            let basis = read_space(&space)?;
            let w: Weight = read_json(&w)?;
            let v: Weight = match v {
                Some(v) => read_json(&v)?,
                None => w.clone(),
            };
            let budget = AscentBudget { restarts, iterations, seed };
            let est = maximal_bound(&basis, &w, &v, p, &budget)?;
            print(&est)?;
            Ok(true)
        }
        Command::Rdf {
            space,
            params,
            w,
            v,
            f,
            h,
            kappa,
        } => {
            let basis = read_space(&space)?;
            let params: FactorParams = read_json(&params)?;
            let (w, v): (Weight, Weight) = (read_json(&w)?, read_json(&v)?);
            let (f, h): (Vec<f64>, Vec<f64>) = (read_json(&f)?, read_json(&h)?);
            let res = factor_pair(&basis, &params, &w, &v, &f, &h, &RdfOptions::new(kappa))?;
            print(&res)?;
            Ok(res.passed())
        }
        Command::Extrapolate { config, json, csv } => {
            let start = Instant::now();
            let cfg = RunConfig::load(&config)?;
            let base = config.parent().unwrap_or(Path::new("."));
            let bound = run_config(&cfg, base)?;
            let passed = report_passed(&bound);
            let report = Report::new("extrapolate", &cfg, &bound, passed, start.elapsed().as_millis())?;
            let json = json.or_else(|| cfg.output.json.as_ref().map(|p| base.join(p)));
            emit(&report, json.as_deref())?;
            if let Some(path) = csv.or_else(|| cfg.output.csv.as_ref().map(|p| base.join(p))) {
                let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                write_trials_csv(file, &bound.trials)?;
            }
            Ok(passed)
        }
        Command::Transfer {
            h,
            g,
            phi,
            p,
            w,
            m,
            restarts,
            iterations,
        } => {
            let (h, g) = (FiniteAbelianGroup::new(factors(&h)?)?, FiniteAbelianGroup::new(factors(&g)?)?);
            let hom = GroupHom::new(h.clone(), g.clone(), matrix(&phi)?)?;
            let w: Weight = read_json(&w)?;
            let m: Multiplier = read_json(&m)?;
            let budget = AscentBudget {
                restarts,
                iterations,
                seed: 0,
            };
            let rep = transference_check(&g, &h, &hom, &w, p, &m, &budget)?;
            print(&rep)?;
            Ok(!matches!(rep.verdict, TransferVerdict::Violated))
        }
        Command::Trace { report } => {
            let payload: Option<SuitePayload> = match report {
                Some(path) => {
                    let value: serde_json::Value = read_json(&path)?;
                    let payload = value.get("payload").cloned().unwrap_or(value);
                    Some(serde_json::from_value(payload).context("report has no suite payload")?)
                }
                None => None,
            };
            print(&trace(payload.as_ref()))?;
            Ok(true)
        }
        Command::Suite { seed, only, json } => {
            if let Some(bad) = only.iter().find(|&&i| !(1..=8).contains(&i)) {
                bail!("no criterion {bad}; they are numbered 1 to 8");
            }
            let start = Instant::now();
            let run = run_suite(seed, &only)?;
            for t in &run.timings {
                let c = run.payload.criteria.iter().find(|c| c.id == t.id).expect("timed criteria ran");
                eprintln!(
                    "criterion {}: {} ({:.1}s, limit {:.0}s) {}",
                    c.id,
                    if c.passed { "pass" } else { "FAIL" },
                    t.seconds,
                    t.limit,
                    c.title
                );
            }
            let passed = run.payload.passed && run.timings.iter().all(|t| t.within);
            let mut report = Report::new("suite", json!({ "seed": seed, "only": only }), &run.payload, passed, start.elapsed().as_millis())?;
            report.timing = serde_json::to_value(&run.timings)?;
            emit(&report, json.as_deref())?;
            Ok(passed)
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("WEIGHTLAB_THREADS") {
        let n: usize = v.parse().with_context(|| format!("WEIGHTLAB_THREADS must be a positive integer, got {v:?}"))?;
        if n == 0 {
            bail!("WEIGHTLAB_THREADS must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|_| execute(cli)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
