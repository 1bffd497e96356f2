use ciga::bench::{
    acceptance_bands, emit_report, run_elasticity, run_interp1d, run_interp2d, run_poisson, summary,
    ExperimentConfig, Interp1dCase,
};
use ciga::conv::RbfKind;
use ciga::fe::{build_shape_table, CompatMode, PointRule, SolverKind};
use ciga::inverse::{invert_point_traced, train_warm_start, InverseMapConfig, WarmStart};
use ciga::mesh::{generate_plate_with_hole, plate_with_hole_patches, PlateOptions};
use ciga::par::Execution;
use clap::{Parser, Subcommand, ValueEnum};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "ciga", version, about = "Multi-patch C-IGA convergence benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Experiment {
    Interp1d,
    Interp2d,
    Poisson,
    Elasticity,
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    Direct,
    Cg,
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence study and write CSV + summary.
    Bench {
        experiment: Experiment,
        /// 1D data case (smooth|oscillatory); both when omitted.
        #[arg(long)]
        case: Option<Interp1dCase>,
        #[arg(long, default_value_t = 2)]
        p: usize,
        #[arg(long, default_value_t = 2)]
        s: usize,
        /// Dilation (default s + 1).
        #[arg(long)]
        a: Option<f64>,
        #[arg(long, default_value = "nodal")]
        compat: CompatMode,
        #[arg(long, default_value = "cubic")]
        rbf: RbfKind,
        /// Refinement levels (10 * 2^L elements per direction).
        #[arg(long)]
        levels: Option<u32>,
        /// Two extra levels beyond the default ceiling.
        #[arg(long)]
        deep: bool,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Exit nonzero if an acceptance band fails.
        #[arg(long)]
        check: bool,
        /// Run element loops on one thread.
        #[arg(long)]
        sequential: bool,
        #[arg(long, value_enum, default_value = "direct")]
        solver: Solver,
        #[arg(long, default_value_t = 1e-12)]
        cg_tol: f64,
        /// Write stiffness matrices (Matrix Market) into this directory.
        #[arg(long)]
        dump_matrix: Option<PathBuf>,
    },
    /// Invert a physical point through a plate patch, or every node of a
    /// plate mesh when --level is given.
    Invert {
        #[arg(long, default_value_t = 0)]
        patch: usize,
        #[arg(long, allow_hyphen_values = true)]
        x: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        y: Option<f64>,
        #[arg(long)]
        level: Option<u32>,
        #[arg(long, default_value = "lookup")]
        warm_start: WarmStart,
    },
    /// Sample the C-IGA shape function of one node over its support (CSV).
    DumpShapes {
        #[arg(long)]
        node: usize,
        #[arg(long, default_value_t = 0)]
        level: u32,
        #[arg(long, default_value_t = 2)]
        p: usize,
        #[arg(long, default_value_t = 2)]
        s: usize,
        #[arg(long, default_value = "g0")]
        compat: CompatMode,
        /// Sample points per element direction.
        #[arg(long, default_value_t = 9)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run() -> ciga::Result<bool> {
    match Cli::parse().command {
        Command::Bench {
            experiment,
            case,
            p,
            s,
            a,
            compat,
            rbf,
            levels,
            deep,
            out,
            check,
            sequential,
            solver,
            cg_tol,
            dump_matrix,
        } => {
            let default_levels = match experiment {
                Experiment::Elasticity => 4,
                _ => 5,
            };
            let mut cfg = ExperimentConfig::new(p, s, levels.unwrap_or(default_levels) + if deep { 2 } else { 0 });
            cfg.a = a;
            cfg.compat = compat;
            cfg.rbf = rbf;
            cfg.exec = if sequential { Execution::Sequential } else { Execution::Parallel };
            cfg.solver = match solver {
                Solver::Direct => SolverKind::Direct,
                Solver::Cg => SolverKind::ConjugateGradient {
                    tolerance: cg_tol,
                    max_iterations: 100_000,
                },
            };
            cfg.dump_matrix = dump_matrix;
            let reports = match experiment {
                Experiment::Interp1d => {
                    let cases = case.map_or(vec![Interp1dCase::Smooth, Interp1dCase::Oscillatory], |c| vec![c]);
                    cases.into_iter().map(|c| run_interp1d(c, &cfg)).collect::<ciga::Result<Vec<_>>>()?
                }
                Experiment::Interp2d => vec![run_interp2d(&cfg)?],
                Experiment::Poisson => vec![run_poisson(&cfg)?],
                Experiment::Elasticity => vec![run_elasticity(&cfg)?],
            };
            let mut ok = true;
            for r in &reports {
                let bands = acceptance_bands(&r.meta);
                let path = emit_report(r, &out, &bands)?;
                print!("{}", summary(r, &bands));
                println!("wrote {}", path.display());
                ok &= bands.iter().all(|b| b.passes(r));
            }
            Ok(ok || !check)
        }
        Command::Invert {
            patch,
            x,
            y,
            level,
            warm_start,
        } => {
            let config = InverseMapConfig {
                warm_start,
                ..InverseMapConfig::default()
            };
            if let Some(level) = level {
                let (mesh, patches) = generate_plate_with_hole(PlateOptions::level(level, true), &config)?;
                println!(
                    "nodes {} max round-trip error {:.3e}",
                    mesh.num_nodes(),
                    mesh.round_trip_error(&patches)?
                );
                return Ok(true);
            }
            let (Some(x), Some(y)) = (x, y) else {
                return Err(ciga::CigaError::Config("give --x and --y, or --level".into()));
            };
            let patches = plate_with_hole_patches(false)?;
            let target = patches
                .get(patch)
                .ok_or_else(|| ciga::CigaError::Config(format!("the plate has patches 0 and 1, not {patch}")))?;
            let guess = train_warm_start(target, &config)?.predict([x, y]);
            let (xi, history) = invert_point_traced(target, [x, y], &config, Some(guess))?;
            println!("xi = ({:.15}, {:.15})", xi[0], xi[1]);
            for (k, r) in history.iter().enumerate() {
                println!("iteration {k} residual {r:.3e}");
            }
            Ok(true)
        }
        Command::DumpShapes {
            node,
            level,
            p,
            s,
            compat,
            grid,
            out,
        } => {
            let opts = PlateOptions {
                g0_layout: compat == CompatMode::G0,
                ..PlateOptions::level(level, true)
            };
            let (mesh, patches) = generate_plate_with_hole(opts, &InverseMapConfig::default())?;
            if node >= mesh.num_nodes() {
                return Err(ciga::CigaError::Config(format!("mesh has {} nodes", mesh.num_nodes())));
            }
            let table = build_shape_table(&mesh, &patches, ciga::conv::ConvSpec::new(s, p), compat, Execution::Parallel)?;
            let g = grid.max(2);
            let pts: Vec<[f64; 2]> = (0..g)
                .flat_map(|j| (0..g).map(move |i| [i as f64 / (g - 1) as f64, j as f64 / (g - 1) as f64]))
                .collect();
            let rule = PointRule::points(pts);
            let mut w: Box<dyn Write> = match &out {
                Some(path) => Box::new(std::io::BufWriter::new(std::fs::File::create(path)?)),
                None => Box::new(std::io::stdout().lock()),
            };
            writeln!(w, "patch,element,xi,eta,x,y,value")?;
            for e in 0..mesh.num_elements() {
                if table.index.element_union[e].binary_search(&node).is_err() {
                    continue;
                }
                let sh = table.eval_element(e, &rule)?;
                let j = sh.nodes.binary_search(&node).unwrap();
                for q in 0..sh.nq {
                    writeln!(
                        w,
                        "{},{e},{},{},{},{},{}",
                        mesh.element_patch[e],
                        sh.xi[q][0],
                        sh.xi[q][1],
                        sh.x[q][0],
                        sh.x[q][1],
                        sh.row(q)[j]
                    )?;
                }
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("acceptance check failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
