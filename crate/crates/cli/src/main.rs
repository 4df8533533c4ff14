//! `sbm`: convergence studies and single solves with the shifted boundary
//! method on a rotated triangular background grid.

mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::LevelFilter;

use sbm_core::harness::{build_surrogate, run_study, solve_case, Exact, StudySpec};
use sbm_core::selftest;

use config::{ConfigError, Resolved, StudyArgs};

#[derive(Debug, Parser)]
#[command(
    name = "sbm",
    version,
    about = "Shifted boundary method convergence studies"
)]
struct Cli {
    /// More log output (repeat for more)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Only log errors
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a convergence study and write CSV and gnuplot data
    Study(StudyArgs),
    /// Solve one case and write solution samples
    Solve {
        #[command(flatten)]
        args: StudyArgs,
        /// Background cells per side
        #[arg(long, default_value_t = 32)]
        level: usize,
        /// Grid rotation in degrees
        #[arg(long, default_value_t = 0.0)]
        rotation: f64,
        /// Also write the system matrix in coordinate format
        #[arg(long)]
        write_matrix: bool,
        /// Also write the surrogate mesh
        #[arg(long)]
        write_mesh: bool,
    },
    /// Print surrogate-mesh and assumption diagnostics without solving
    Diag(StudyArgs),
    /// Run the built-in property suites
    Selftest,
}

enum Failure {
    Config(String),
    Run(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Run(format!("cannot write {}: {e}", path.display()))
}

fn init_logging(cli: &Cli, file_level: Option<u8>) {
    let level = if cli.quiet {
        LevelFilter::Error
    } else {
        match cli.verbose.max(file_level.unwrap_or(0)) {
            0 => LevelFilter::Warn,
            1 => LevelFilter::Info,
            2 => LevelFilter::Debug,
            _ => LevelFilter::Trace,
        }
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_env("RUST_LOG")
        .try_init();
}

fn prepare(cli: &Cli, args: &StudyArgs) -> Result<Resolved, Failure> {
    let resolved = args.resolve()?;
    init_logging(cli, resolved.verbosity);
    if let Some(n) = resolved.spec.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Run(format!("cannot start thread pool: {e}")))?;
    }
    fs::create_dir_all(&resolved.output_dir).map_err(|e| io_failure(&resolved.output_dir, e))?;
    Ok(resolved)
}

fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<(), Failure> {
    let file = File::create(path).map_err(|e| io_failure(path, e))?;
    let mut out = BufWriter::new(file);
    body(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| io_failure(path, e))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn stem(spec: &StudySpec) -> String {
    format!("{}_k{}", spec.problem, spec.order)
}

fn study(cli: &Cli, args: &StudyArgs) -> Result<bool, Failure> {
    let Resolved {
        spec, output_dir, ..
    } = prepare(cli, args)?;
    let report = run_study(&spec).map_err(|e| Failure::Run(e.to_string()))?;
    let csv = output_dir.join(format!("{}.csv", stem(&spec)));
    write_file(&csv, |out| out.write_all(report.to_csv().as_bytes()))?;
    report
        .write_gnuplot(&output_dir)
        .map_err(|e| Failure::Run(e.to_string()))?;
    print!("{}", report.summary());
    for (row, err) in report.failures() {
        eprintln!(
            "row failed (rotation {}, n = {}): {err}",
            row.rotation, row.n_per_side
        );
    }
    println!("wrote {}", csv.display());
    Ok(!report.has_failures())
}

fn solve(
    cli: &Cli,
    args: &StudyArgs,
    level: usize,
    rotation: f64,
    matrix: bool,
    mesh: bool,
) -> Result<bool, Failure> {
    let Resolved {
        mut spec,
        output_dir,
        ..
    } = prepare(cli, args)?;
    spec.levels = vec![level];
    spec.rotations = vec![rotation];
    spec.validate().map_err(ConfigError::from)?;
    let case = match solve_case(&spec, rotation, level) {
        Ok(case) => case,
        Err(e) => {
            eprintln!("solve failed: {e}");
            return Ok(false);
        }
    };
    let name = format!("{}_n{level}_r{rotation}", stem(&spec));
    let dofs = &case.system.dofs;
    let u = &case.coefficients;
    let path = output_dir.join(format!("{name}_solution.dat"));
    write_file(&path, |out| match &spec.exact {
        Exact::Scalar(exact) => {
            writeln!(out, "# x y u_h u_exact")?;
            for (i, p) in dofs.coords().iter().enumerate() {
                writeln!(
                    out,
                    "{:.16e} {:.16e} {:.16e} {:.16e}",
                    p[0],
                    p[1],
                    u[i],
                    (exact.value)(*p)
                )?;
            }
            Ok(())
        }
        Exact::Vector(exact) => {
            writeln!(out, "# x y ux_h uy_h ux_exact uy_exact")?;
            for (i, p) in dofs.coords().iter().enumerate() {
                let e = exact.value(*p);
                let (ux, uy) = (u[dofs.global(i, 0)], u[dofs.global(i, 1)]);
                writeln!(
                    out,
                    "{:.16e} {:.16e} {ux:.16e} {uy:.16e} {:.16e} {:.16e}",
                    p[0], p[1], e[0], e[1]
                )?;
            }
            Ok(())
        }
    })?;
    println!("wrote {}", path.display());
    if matrix {
        let path = output_dir.join(format!("{name}_matrix.mtx"));
        write_file(&path, |out| case.system.matrix.write_coordinate(out))?;
        println!("wrote {}", path.display());
    }
    if mesh {
        let path = output_dir.join(format!("{name}_mesh.dat"));
        write_file(&path, |out| case.surrogate.write_dump(out))?;
        println!("wrote {}", path.display());
    }
    println!(
        "{} dofs, max_delta_over_h = {:.6e}, n_abnormal = {}",
        dofs.len(),
        case.diagnostics.max_delta_over_h,
        case.diagnostics.n_abnormal
    );
    Ok(true)
}

fn diag(cli: &Cli, args: &StudyArgs) -> Result<bool, Failure> {
    let Resolved { spec, .. } = prepare(cli, args)?;
    let mut ok = true;
    println!("rotation_deg n_per_side n_active n_facets max_delta_over_h n_abnormal max_abnormal_chain facet_measure_ratio");
    for &rotation in &spec.rotations {
        for &n in &spec.levels {
            match build_surrogate(&spec, rotation, n) {
                Ok((s, d)) => println!(
                    "{rotation} {n} {} {} {:.6e} {} {} {:.6e}",
                    s.n_active(),
                    s.boundary_facets.len(),
                    d.max_delta_over_h,
                    d.n_abnormal,
                    d.max_abnormal_chain,
                    d.facet_measure_ratio
                ),
                Err(e) => {
                    ok = false;
                    eprintln!("rotation {rotation}, n = {n}: {e}");
                }
            }
        }
    }
    Ok(ok)
}

fn run_selftest(cli: &Cli) -> bool {
    init_logging(cli, None);
    let outcomes = selftest::run_all();
    for o in &outcomes {
        println!("{o}");
    }
    outcomes.iter().all(|o| o.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Study(args) => study(&cli, args),
        Command::Solve {
            args,
            level,
            rotation,
            write_matrix,
            write_mesh,
        } => solve(&cli, args, *level, *rotation, *write_matrix, *write_mesh),
        Command::Diag(args) => diag(&cli, args),
        Command::Selftest => Ok(run_selftest(&cli)),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Run(msg)) => {
            eprintln!("sbm: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("sbm: {}", msg.replace('\n', " "));
            ExitCode::from(2)
        }
    }
}
