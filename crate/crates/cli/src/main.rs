mod config;
mod exit;
mod io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use qduhamel::verify::{IdentitySuiteConfig, LimitStudyOptions, ScalarFamily, DEFAULT_SEED};
use qduhamel::{
    identity_suite, initial_condition_check, limit_study, q_residual, solve_classical_system, solve_q_system,
};

use config::{LoadedSpec, Mode};
use exit::{classify, input_error, CliError, VERIFICATION_FAILED};
use io::{fmt_f64, meta_path, read_key_values, read_solution, solution_csv, write_file, KeyValues};

/// Solve and certify linear q-evolution problems.
#[derive(Parser)]
#[command(name = "qduhamel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem and write `t,component,value` rows plus a `.meta` sidecar.
    Solve(SolveArgs),
    /// Certify a stored solution against its problem specification.
    Verify(VerifyArgs),
    /// Distance to the classical solution as q approaches 1.
    LimitStudy(LimitArgs),
    /// Randomised polynomial checks of the q-calculus identities.
    Identities(IdentityArgs),
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the integral depth of the config.
    #[arg(long)]
    depth: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    solution: PathBuf,
    /// Report path; the per-point residual table goes next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the tolerance of the config.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct LimitArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    q: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    depth: Option<usize>,
}

#[derive(Args)]
struct IdentityArgs {
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.3, 0.5, 0.9])]
    q: Vec<f64>,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    depth: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 6)]
    degree: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Verify(a) => verify(a),
        Command::LimitStudy(a) => limit(a),
        Command::Identities(a) => identities(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}

fn solve(args: SolveArgs) -> Result<(), CliError> {
    let LoadedSpec { mut spec, hash } = config::load(&args.config)?;
    if let Some(d) = args.depth {
        spec.integral_depth = d;
    }
    let (problem, sys) = spec.system().map_err(classify)?;
    let result = match spec.mode {
        Mode::Q => {
            let opts = spec.duhamel_options().map_err(input_error)?;
            solve_q_system(&sys, problem.lattice(), &opts).map_err(classify)?
        }
        Mode::Classical => solve_classical_system(&sys, spec.lattice.t_max, spec.step()).map_err(classify)?,
    };
    let sol = &result.solution;
    write_file(&args.out, &solution_csv(sol)).map_err(input_error)?;

    let mut meta = KeyValues::default();
    meta.push("spec_hash", &hash)
        .push("mode", spec.mode.as_str())
        .push("sign", sys.sign.as_str())
        .push("order", problem.order())
        .push("q", fmt_f64(spec.q))
        .push("components", sol.dim())
        .push("layout", layout_string(&sys.layout));
    match spec.mode {
        Mode::Q => {
            let opts = spec.duhamel_options().map_err(input_error)?;
            meta.push("lattice_depth", sol.meta.lattice_depth)
                .push("integral_depth", sol.meta.integral_depth)
                .push("anchor", opts.anchor.as_str())
                .push("evaluation", opts.evaluation.as_str());
        }
        Mode::Classical => {
            meta.push("step", fmt_f64(sol.times()[1] - sol.times()[0]));
        }
    }
    meta.push("points", sol.len())
        .push("step_count", sol.meta.step_count)
        .push("warnings", sol.meta.warnings.join(" | "));
    write_file(&meta_path(&args.out), &meta.render()).map_err(input_error)?;
    for w in &sol.meta.warnings {
        eprintln!("warning: {w}");
    }
    println!("wrote {} points x {} components to {}", sol.len(), sol.dim(), args.out.display());
    Ok(())
}

fn layout_string(layout: &qduhamel::operators::Layout) -> String {
    layout
        .names()
        .iter()
        .zip(layout.spans())
        .map(|(n, s)| format!("{n}:{}..{}", s.start, s.end))
        .collect::<Vec<_>>()
        .join(";")
}

fn residual_table_path(report: &Path) -> PathBuf {
    report.with_extension("residuals.csv")
}

fn verify(args: VerifyArgs) -> Result<(), CliError> {
    let LoadedSpec { spec, hash } = config::load(&args.config)?;
    if spec.mode != Mode::Q {
        return Err(input_error(anyhow::anyhow!(
            "verify certifies q-mode solutions; config mode is {}",
            spec.mode.as_str()
        )));
    }
    let meta = read_key_values(&meta_path(&args.solution)).map_err(input_error)?;
    let stored = meta.get("spec_hash").map(String::as_str).unwrap_or("");
    if stored != hash {
        return Err(input_error(anyhow::anyhow!(
            "spec hash mismatch: solution was produced from {stored:?}, config hashes to {hash:?}"
        )));
    }
    let solution = read_solution(&args.solution).map_err(input_error)?;
    let (problem, sys) = spec.system().map_err(classify)?;
    let tol = args.tol.unwrap_or(spec.tolerance);
    let report = q_residual(&solution, &sys.a, sys.forcing.as_ref(), spec.q_param(), tol)
        .context("residual")
        .map_err(input_error)?;
    let initial = initial_condition_check(&solution, &problem)
        .context("initial data")
        .map_err(input_error)?;
    let report = report.with_initial_errors(initial);

    let depth = |k: &str| meta.get(k).cloned().unwrap_or_else(|| "?".into());
    let mut kv = KeyValues::default();
    kv.push("spec_hash", &hash)
        .push("solution", args.solution.display())
        .push("depths", format!("M={},D={}", depth("lattice_depth"), depth("integral_depth")))
        .push("tolerance", fmt_f64(tol))
        .push("max_residual", fmt_f64(report.max_residual))
        .push(
            "component_max",
            report.component_max.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(";"),
        )
        .push("roundoff_floor", fmt_f64(report.roundoff_floor))
        .push(
            "initial_errors",
            report.initial_errors.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(";"),
        )
        .push("points", report.points.len())
        .push(
            "provenance",
            format!("solver=q-duhamel anchor={} evaluation={}", depth("anchor"), depth("evaluation")),
        )
        .push("pass", report.pass);
    let out = args
        .out
        .unwrap_or_else(|| args.solution.with_extension("report.txt"));
    write_file(&out, &kv.render()).map_err(input_error)?;
    let mut table = String::from("t,residual\n");
    for p in &report.points {
        table.push_str(&format!("{},{}\n", fmt_f64(p.t), fmt_f64(p.residual)));
    }
    write_file(&residual_table_path(&out), &table).map_err(input_error)?;

    println!(
        "max_residual={:.3e} max_initial_error={:.3e} tolerance={:.1e} pass={}",
        report.max_residual,
        report.max_initial_error(),
        tol,
        report.pass
    );
    if report.pass {
        Ok(())
    } else {
        Err(CliError {
            code: VERIFICATION_FAILED,
            error: anyhow::anyhow!("verification failed; see {}", out.display()),
        })
    }
}

fn limit(args: LimitArgs) -> Result<(), CliError> {
    let LoadedSpec { spec, hash } = config::load(&args.config)?;
    let (lambda, forcing, u0) = spec.scalar_family().map_err(input_error)?;
    let family = ScalarFamily {
        lambda,
        forcing,
        u0,
        t_max: spec.lattice.t_max,
    };
    let opts = LimitStudyOptions {
        integral_depth: args.depth.unwrap_or(spec.integral_depth),
        ..LimitStudyOptions::default()
    };
    let study = limit_study(&family, &args.q, &opts).map_err(classify)?;
    let mut table = String::from("q,lattice_depth,sup_error\n");
    for r in &study.rows {
        table.push_str(&format!("{},{},{}\n", fmt_f64(r.q), r.lattice_depth, fmt_f64(r.sup_error)));
        println!("q={:<8} M={:<6} sup_error={:.6e}", r.q, r.lattice_depth, r.sup_error);
    }
    write_file(&args.out, &table).map_err(input_error)?;
    let monotone = match study.monotone {
        Some(b) => b.to_string(),
        None => "none".into(),
    };
    let mut meta = KeyValues::default();
    meta.push("spec_hash", &hash)
        .push("integral_depth", opts.integral_depth)
        .push("floor_factor", fmt_f64(opts.floor_factor))
        .push("monotone", &monotone);
    write_file(&meta_path(&args.out), &meta.render()).map_err(input_error)?;
    println!("monotone={monotone}");
    if study.monotone == Some(false) {
        return Err(CliError {
            code: VERIFICATION_FAILED,
            error: anyhow::anyhow!("sup_error is not strictly decreasing"),
        });
    }
    Ok(())
}

fn identities(args: IdentityArgs) -> Result<(), CliError> {
    let cfg = IdentitySuiteConfig {
        q_list: args.q,
        degree_bound: args.degree,
        count: args.count,
        integral_depth: args.depth,
        tolerance: args.tol,
        seed: args.seed,
    };
    let report = identity_suite(&cfg).map_err(classify)?;
    let mut kv = KeyValues::default();
    kv.push("seed", report.seed).push("tolerance", fmt_f64(report.tolerance));
    for c in &report.checks {
        println!(
            "{:<20} q={:<5} cases={:<4} max_error={:.3e} {}",
            c.name,
            c.q,
            c.cases,
            c.max_error,
            if c.pass { "PASS" } else { "FAIL" }
        );
        kv.push(&format!("{}[q={}]", c.name, c.q), format!("{} pass={}", fmt_f64(c.max_error), c.pass));
    }
    for p in &report.probes {
        println!(
            "rubin_probe          q={:<5} x={} rubin={} jackson_sum={} discrepancy={}",
            p.q, p.x, p.rubin, p.jackson_sum, p.discrepancy
        );
        kv.push(&format!("rubin_probe[q={}]", p.q), fmt_f64(p.discrepancy));
    }
    kv.push("pass", report.pass);
    if let Some(out) = &args.out {
        write_file(out, &kv.render()).map_err(input_error)?;
    }
    if report.pass {
        Ok(())
    } else {
        Err(CliError {
            code: VERIFICATION_FAILED,
            error: anyhow::anyhow!("identity checks failed"),
        })
    }
}
