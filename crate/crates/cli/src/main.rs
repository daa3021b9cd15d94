//! Command-line front end: builds models and schemes, runs verification
//! stages, solves triple systems, and writes JSON reports and documents.
//!
//! Exit status: 0 all checks pass, 1 check failure (report still written),
//! 2 usage or input error.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pwlab_core::cliques::{all_partitions, CliqueLab, SweepMode};
use pwlab_core::geometry::{
    build_elliptic_quadric_gq, build_outer_points, build_parabolic_subgq, gq_document,
};
use pwlab_core::pipeline::{run_pipeline, Mode, RunConfig, Stage, ALL_STAGES};
use pwlab_core::reconstruct::{reconstruct, reconstruction_document};
use pwlab_core::scheme::{
    build_pw_scheme, intersection_numbers, load_scheme, pw_intersection_tensor, save_scheme,
    AssociationScheme,
};
use pwlab_core::spectral::{eigenmatrices_from_tensor, pw_eigenmatrices, Eigenmatrices};
use pwlab_core::triples::{
    build_system, nonneg_propagate, solution_document, solve, SystemOptions,
};
use pwlab_core::PwError;

#[derive(Parser)]
#[command(name = "pwlab")]
#[command(about = "Exact-arithmetic laboratory for the Penttila-Williford association scheme")]
#[command(version)]
struct Cli {
    /// Write the JSON report (or document, for data commands) to this path
    #[arg(long, global = true)]
    json: Option<PathBuf>,

    /// Worker threads for the heavy verification sweeps
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    /// Seed for the sampled hypothesis sweep
    #[arg(long, global = true, default_value_t = 0x5eed)]
    seed: u64,

    /// Upper bound on q for model enumeration
    #[arg(long, global = true, default_value_t = 7)]
    q_bound: u32,

    /// Include per-check timings in the JSON report (off by default so
    /// reports are byte-identical across runs)
    #[arg(long, global = true)]
    timings: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the quadrangle model and its section, certify the orders
    BuildGq {
        #[arg(long)]
        q: u32,
        /// Write the incidence document here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the scheme on the outer points and write it to a file
    BuildScheme {
        #[arg(long)]
        q: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify valencies and intersection numbers against the closed forms
    VerifyParams {
        #[arg(long)]
        q: Option<u32>,
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Verify eigenmatrices, Krein parameters and the embedding Gram matrix
    Eigen {
        #[arg(long)]
        q: Option<u32>,
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Build and solve the triple system for a class triple A,B,C
    Triples {
        /// Class triple, e.g. 3,3,3
        #[arg(long, value_delimiter = ',')]
        triple: Vec<usize>,
        #[arg(long)]
        krein: bool,
        #[arg(long)]
        symmetry: bool,
        #[arg(long)]
        q: Option<u32>,
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Verify the clique structure and congruence classes
    Cliques {
        #[arg(long)]
        q: Option<u32>,
        #[arg(long)]
        file: Option<PathBuf>,
        /// Write cliques, classes and partitions as JSON
        #[arg(long)]
        emit_cliques: Option<PathBuf>,
    },
    /// Verify the two clique hypotheses and the partition family
    Hypotheses {
        #[arg(long)]
        q: Option<u32>,
        #[arg(long)]
        file: Option<PathBuf>,
        /// Sample (u, v) pairs per vertex instead of the exhaustive sweep
        #[arg(long)]
        sample: bool,
    },
    /// Rebuild the quadrangle from the scheme and verify it
    Reconstruct {
        #[arg(long)]
        q: Option<u32>,
        #[arg(long)]
        file: Option<PathBuf>,
        /// Write the reconstructed incidence structure as JSON
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Run every stage in order
    Pipeline {
        #[arg(long)]
        q: Option<u32>,
        #[arg(long)]
        file: Option<PathBuf>,
        /// Comma-separated stage subset (build, params, eigen, triples,
        /// cliques, hypotheses, reconstruct, iso)
        #[arg(long, value_delimiter = ',')]
        checks: Option<Vec<String>>,
        #[arg(long)]
        sample: bool,
    },
    /// Build the scheme for q and save it (alias of build-scheme)
    Save {
        #[arg(long)]
        q: u32,
        #[arg(long)]
        file: PathBuf,
    },
    /// Load a scheme file, validate it, and verify its parameters
    Load {
        #[arg(long)]
        file: PathBuf,
    },
}

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn is_usage(err: &PwError) -> bool {
    matches!(
        err,
        PwError::NotPrime(_)
            | PwError::TooSmall(_)
            | PwError::AboveBound(_, _)
            | PwError::BadClassIndex(_, _)
            | PwError::BadSchemeFile(_)
    )
}

fn mode_from(q: Option<u32>, file: Option<PathBuf>, q_bound: u32) -> Result<Mode, String> {
    match (q, file) {
        (Some(q), None) => {
            if !pwlab_core::field::is_prime(q) {
                return Err(format!("q = {q} is not prime"));
            }
            if q < 3 {
                return Err(format!("q = {q} is below the minimum 3"));
            }
            if q > q_bound {
                return Err(format!("q = {q} exceeds the enumeration bound {q_bound}"));
            }
            Ok(Mode::Geometric { q })
        }
        (None, Some(path)) => {
            if !path.exists() {
                return Err(format!("scheme file not found: {}", path.display()));
            }
            // Unreadable or syntactically broken files are input errors;
            // semantic validation happens inside the checks.
            let text = std::fs::read_to_string(&path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            serde_json::from_str::<serde_json::Value>(&text)
                .map_err(|e| format!("{} is not valid JSON: {e}", path.display()))?;
            Ok(Mode::Abstract { path })
        }
        _ => Err("exactly one of --q and --file is required".into()),
    }
}

fn config_for(cli: &Cli, mode: Mode, sample: bool) -> RunConfig {
    let mut config = match &mode {
        Mode::Geometric { q } => RunConfig::geometric(*q),
        Mode::Abstract { path } => RunConfig::abstract_file(path.clone()),
    };
    config.threads = cli.threads.max(1);
    config.q_bound = cli.q_bound;
    config.seed = cli.seed;
    config.sample = sample;
    config.timings = cli.timings;
    config
}

fn run_stages(cli: &Cli, mode: Mode, stages: &[Stage], sample: bool) -> ExitCode {
    let mut config = config_for(cli, mode, sample);
    config.checks = Some(stages.iter().copied().collect::<BTreeSet<_>>());
    let report = run_pipeline(&config);
    print!("{}", report.render_text());
    if let Some(path) = &cli.json {
        if let Err(e) = std::fs::write(path, report.to_json()) {
            eprintln!("error: cannot write report: {e}");
            return ExitCode::from(2);
        }
    }
    if report.summary == "pass" {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

/// Tensor and eigenmatrices for the triples command: closed forms in
/// geometric mode (the pipeline certifies them separately), computed and
/// certified from scratch in abstract mode.
fn triple_inputs(
    cli: &Cli,
    mode: &Mode,
) -> Result<(pwlab_core::scheme::IntersectionTensor, Eigenmatrices), PwError> {
    match mode {
        Mode::Geometric { q } => {
            // Validates q (prime, within bound) without keeping the model.
            build_elliptic_quadric_gq(*q, cli.q_bound)?;
            Ok((pw_intersection_tensor(*q as u64), pw_eigenmatrices(*q as u64)))
        }
        Mode::Abstract { path } => {
            let scheme = load_scheme(path)?;
            let tensor = intersection_numbers(&scheme, cli.threads.max(1))?;
            let eig = eigenmatrices_from_tensor(&tensor, scheme.valencies())?;
            Ok((tensor, eig))
        }
    }
}

fn load_any_scheme(cli: &Cli, mode: &Mode) -> Result<AssociationScheme, PwError> {
    match mode {
        Mode::Geometric { q } => {
            let model = build_elliptic_quadric_gq(*q, cli.q_bound)?;
            let sub = build_parabolic_subgq(&model)?;
            let outer = build_outer_points(&model, &sub)?;
            build_pw_scheme(&model, &outer)
        }
        Mode::Abstract { path } => load_scheme(path),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if is_usage(&e) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode, PwError> {
    match &cli.command {
        Command::BuildGq { q, out } => {
            let model = build_elliptic_quadric_gq(*q, cli.q_bound)?;
            let sub = build_parabolic_subgq(&model)?;
            println!(
                "built Q(5,{q}): {} points, {} lines, order {:?}",
                model.gq.inc.num_points(),
                model.gq.inc.num_lines(),
                model.gq.order
            );
            println!(
                "section Q(4,{q}): {} points, {} lines, order {:?}",
                sub.gq.inc.num_points(),
                sub.gq.inc.num_lines(),
                sub.gq.order
            );
            let doc = gq_document(&model, &sub);
            if let Some(path) = out.as_ref().or(cli.json.as_ref()) {
                std::fs::write(path, serde_json::to_string(&doc)?)?;
                println!("document written to {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::BuildScheme { q, out } | Command::Save { q, file: out } => {
            let model = build_elliptic_quadric_gq(*q, cli.q_bound)?;
            let sub = build_parabolic_subgq(&model)?;
            let outer = build_outer_points(&model, &sub)?;
            let scheme = build_pw_scheme(&model, &outer)?;
            save_scheme(&scheme, out)?;
            println!(
                "scheme on {} vertices (r = {q}) written to {}",
                scheme.size(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::VerifyParams { q, file } => match mode_from(*q, file.clone(), cli.q_bound) {
            Ok(mode) => Ok(run_stages(cli, mode, &[Stage::Params], false)),
            Err(msg) => Ok(usage_error(&msg)),
        },
        Command::Eigen { q, file } => match mode_from(*q, file.clone(), cli.q_bound) {
            Ok(mode) => Ok(run_stages(cli, mode, &[Stage::Eigen], false)),
            Err(msg) => Ok(usage_error(&msg)),
        },
        Command::Triples {
            triple,
            krein,
            symmetry,
            q,
            file,
        } => {
            let mode = match mode_from(*q, file.clone(), cli.q_bound) {
                Ok(m) => m,
                Err(msg) => return Ok(usage_error(&msg)),
            };
            let [a, b, c] = triple.as_slice() else {
                return Ok(usage_error("--triple expects three class indices"));
            };
            let (tensor, eig) = triple_inputs(cli, &mode)?;
            let system = build_system(
                &tensor,
                Some(&eig),
                *a,
                *b,
                *c,
                SystemOptions {
                    symmetry: *symmetry,
                    krein: *krein,
                },
            )?;
            let space = solve(&system)?;
            let outcome = nonneg_propagate(&system, &space)?;
            let doc = solution_document(&system, &outcome);
            let text = serde_json::to_string_pretty(&doc)?;
            println!("{text}");
            if let Some(path) = &cli.json {
                std::fs::write(path, &text)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Cliques {
            q,
            file,
            emit_cliques,
        } => {
            let mode = match mode_from(*q, file.clone(), cli.q_bound) {
                Ok(m) => m,
                Err(msg) => return Ok(usage_error(&msg)),
            };
            if let Some(path) = emit_cliques {
                let scheme = load_any_scheme(cli, &mode)?;
                emit_clique_document(&scheme, path)?;
                println!("clique structure written to {}", path.display());
            }
            Ok(run_stages(cli, mode, &[Stage::Cliques], false))
        }
        Command::Hypotheses { q, file, sample } => match mode_from(*q, file.clone(), cli.q_bound) {
            Ok(mode) => Ok(run_stages(cli, mode, &[Stage::Hypotheses], *sample)),
            Err(msg) => Ok(usage_error(&msg)),
        },
        Command::Reconstruct { q, file, emit } => {
            let mode = match mode_from(*q, file.clone(), cli.q_bound) {
                Ok(m) => m,
                Err(msg) => return Ok(usage_error(&msg)),
            };
            if let Some(path) = emit {
                let scheme = load_any_scheme(cli, &mode)?;
                emit_reconstruction_document(&scheme, path)?;
                println!("reconstruction written to {}", path.display());
            }
            Ok(run_stages(
                cli,
                mode,
                &[Stage::Reconstruct, Stage::Iso],
                false,
            ))
        }
        Command::Pipeline {
            q,
            file,
            checks,
            sample,
        } => {
            let mode = match mode_from(*q, file.clone(), cli.q_bound) {
                Ok(m) => m,
                Err(msg) => return Ok(usage_error(&msg)),
            };
            let stages: Vec<Stage> = match checks {
                None => ALL_STAGES.to_vec(),
                Some(names) => {
                    let mut out = Vec::new();
                    for name in names {
                        match Stage::parse(name) {
                            Some(s) => out.push(s),
                            None => {
                                return Ok(usage_error(&format!("unknown stage '{name}'")))
                            }
                        }
                    }
                    out
                }
            };
            Ok(run_stages(cli, mode, &stages, *sample))
        }
        Command::Load { file } => {
            let path = file.clone();
            if !path.exists() {
                return Ok(usage_error(&format!(
                    "scheme file not found: {}",
                    path.display()
                )));
            }
            let scheme = load_scheme(&path)?;
            println!(
                "loaded scheme: {} vertices, {} classes, valencies {:?}",
                scheme.size(),
                scheme.classes(),
                scheme.valencies()
            );
            Ok(run_stages(
                cli,
                Mode::Abstract { path },
                &[Stage::Params],
                false,
            ))
        }
    }
}

#[derive(serde::Serialize)]
struct CliqueDocument {
    format_version: u32,
    r: usize,
    cliques: Vec<Vec<u32>>,
    /// Clique ids per congruence class.
    classes: Vec<Vec<u32>>,
    /// Class ids per partition.
    partitions: Vec<Vec<u32>>,
}

fn emit_clique_document(scheme: &AssociationScheme, path: &Path) -> Result<(), PwError> {
    let lab = CliqueLab::new(scheme)?;
    let classes = lab.congruence_classes()?;
    let partitions = all_partitions(&lab, &classes)?;
    let doc = CliqueDocument {
        format_version: 1,
        r: lab.r,
        cliques: lab.cliques.clone(),
        classes: classes.classes.iter().map(|c| c.cliques.clone()).collect(),
        partitions,
    };
    std::fs::write(path, serde_json::to_string(&doc)?)?;
    Ok(())
}

fn emit_reconstruction_document(scheme: &AssociationScheme, path: &Path) -> Result<(), PwError> {
    let lab = CliqueLab::new(scheme)?;
    let classes = lab.congruence_classes()?;
    let partitions = all_partitions(&lab, &classes)?;
    let hyp1 = lab.check_pencil_sums(SweepMode::Exhaustive);
    let rs = reconstruct(&lab, &classes, &partitions, &hyp1)?;
    let doc = reconstruction_document(&rs);
    std::fs::write(path, serde_json::to_string(&doc)?)?;
    Ok(())
}
