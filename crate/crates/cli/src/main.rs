//! Command-line interface over the hilbert-complex library: document
//! validation, index and residual reports, fixture generation, and
//! batch constructions.
//!
//! Exit codes: 0 success, 1 mathematical-property failure (the complex
//! property or a theorem alarm), 2 input error (parse, shape, Gram, or
//! infeasible request).

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use hilbert_complex::algebra::AlgebraDescriptor;
use hilbert_complex::complex::{Complex, ComplexKind};
use hilbert_complex::doc::{ComplexDocument, Metadata};
use hilbert_complex::error::Error as CoreError;
use hilbert_complex::fredholm::{euler_index, index_complex};
use hilbert_complex::generate;
use hilbert_complex::hodge;
use hilbert_complex::operator::check_bt_identities;
use hilbert_complex::perturbation::{homotopy_path_check, perturb_sweep, PerturbKind};
use hilbert_complex::products::{direct_sum_complex, tensor_complex};
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_MATH: u8 = 1;
const EXIT_INPUT: u8 = 2;

#[derive(Parser)]
#[command(
    name = "hilbert-complex",
    version,
    about = "Complexes of Hilbert C*-modules at desk scale"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Relative rank tolerance for kernel/range decisions.
    #[arg(long, global = true, default_value_t = 1e-10)]
    tol: f64,
    /// Emit reports as JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Check a document: shapes, Grams, and the complex property.
    Validate { path: PathBuf },
    /// Compute the index, the Euler index, and per-degree cohomology.
    Index { path: PathBuf },
    /// Hodge splitting residuals and cohomology dimensions per degree.
    Hodge { path: PathBuf },
    /// All residual tables: bounded-transform identities, structural
    /// relations, and Hodge equivalences.
    Checks { path: PathBuf },
    /// Generate a seeded random complex document.
    Random(RandomArgs),
    /// Run an index-stability sweep over admissible perturbations.
    PerturbSweep(SweepArgs),
    /// Tensor product of two complex documents.
    Tensor {
        left: PathBuf,
        right: PathBuf,
        /// Output path; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Direct sum of two complex documents.
    Sum {
        left: PathBuf,
        right: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RandomArgs {
    /// Seed for the deterministic generator.
    #[arg(long)]
    seed: u64,
    /// Algebra block sizes, comma separated (e.g. "1,2").
    #[arg(long, value_delimiter = ',')]
    algebra: Vec<usize>,
    /// Number of differentials when dims are drawn at random.
    #[arg(long, default_value_t = 2)]
    length: usize,
    /// Largest random fiber dimension.
    #[arg(long, default_value_t = 4)]
    max_dim: usize,
    /// Explicit module dims: per-module groups separated by ';', blocks
    /// by ',' (e.g. "2,0;3,1;1,1").
    #[arg(long)]
    dims: Option<String>,
    /// Target cohomology dims, same shape as --dims.
    #[arg(long)]
    target_cohomology: Option<String>,
    /// Output path; stdout when omitted.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Name recorded in the document metadata.
    #[arg(long)]
    name: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    path: PathBuf,
    /// bounded | relative | compact
    #[arg(long, default_value = "bounded")]
    kind: String,
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    /// Seed for the sweep (recorded in the report).
    #[arg(long)]
    seed: u64,
    /// Also walk a scaling homotopy path and report per-step indices.
    #[arg(long, default_value_t = 0)]
    homotopy_steps: usize,
}

fn main() -> ExitCode {
    // die quietly when a pipe downstream closes, like other unix tools
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err
                .downcast_ref::<CoreError>()
                .map(classify_core_error)
                .unwrap_or(EXIT_INPUT);
            ExitCode::from(code)
        }
    }
}

fn classify_core_error(err: &CoreError) -> u8 {
    match err {
        CoreError::ComplexProperty { .. } => EXIT_MATH,
        _ => EXIT_INPUT,
    }
}

fn run(cli: &Cli) -> anyhow::Result<ExitCode> {
    match &cli.command {
        Command::Validate { path } => cmd_validate(path, cli),
        Command::Index { path } => cmd_index(path, cli),
        Command::Hodge { path } => cmd_hodge(path, cli),
        Command::Checks { path } => cmd_checks(path, cli),
        Command::Random(args) => cmd_random(args, cli),
        Command::PerturbSweep(args) => cmd_perturb_sweep(args, cli),
        Command::Tensor { left, right, out } => cmd_tensor(left, right, out.as_deref(), cli),
        Command::Sum { left, right, out } => cmd_sum(left, right, out.as_deref(), cli),
    }
}

fn load_document(path: &std::path::Path) -> anyhow::Result<ComplexDocument> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(ComplexDocument::from_json(&text)?)
}

fn load_complex(path: &std::path::Path) -> anyhow::Result<Complex> {
    Ok(load_document(path)?.to_complex()?)
}

fn write_output(doc: &ComplexDocument, out: Option<&std::path::Path>) -> anyhow::Result<()> {
    let json = doc.to_json();
    match out {
        Some(path) => std::fs::write(path, json + "\n")
            .with_context(|| format!("writing {}", path.display()))?,
        None => println!("{json}"),
    }
    Ok(())
}

fn k0_json(k: &hilbert_complex::algebra::K0Class) -> serde_json::Value {
    json!({ "plus": k.plus(), "minus": k.minus() })
}

fn cmd_validate(path: &std::path::Path, cli: &Cli) -> anyhow::Result<ExitCode> {
    let doc = load_document(path)?;
    match doc.to_complex() {
        Ok(cplx) => {
            if cli.json {
                println!(
                    "{}",
                    json!({
                        "valid": true,
                        "modules": cplx.num_modules(),
                        "differentials": cplx.num_diffs(),
                        "composite_norms": cplx.composite_norms(),
                    })
                );
            } else {
                println!(
                    "valid: {} modules, {} differentials, max composite norm {:.3e}",
                    cplx.num_modules(),
                    cplx.num_diffs(),
                    cplx.composite_norms().iter().copied().fold(0.0, f64::max)
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Err(err) => {
            if cli.json {
                println!("{}", json!({ "valid": false, "error": err.to_string() }));
            } else {
                eprintln!("invalid: {err}");
            }
            Ok(ExitCode::from(classify_core_error(&err)))
        }
    }
}

fn cmd_index(path: &std::path::Path, cli: &Cli) -> anyhow::Result<ExitCode> {
    let cplx = load_complex(path)?;
    let index = index_complex(&cplx, cli.tol);
    let (euler, dims) = if cplx.kind() == ComplexKind::Complex {
        (
            Some(euler_index(&cplx, cli.tol)?),
            Some(hodge::cohomology_dims(&cplx, cli.tol)?),
        )
    } else {
        (None, None)
    };
    let alarm = euler.as_ref().map(|e| *e != index).unwrap_or(false);
    if cli.json {
        println!(
            "{}",
            json!({
                "index": k0_json(&index),
                "euler_index": euler.as_ref().map(k0_json),
                "cohomology_dims": dims,
                "index_equals_euler": !alarm,
            })
        );
    } else {
        println!("index:       {index}");
        if let Some(e) = &euler {
            println!("euler index: {e}");
        }
        if let Some(d) = &dims {
            println!("cohomology dims per degree: {d:?}");
        }
    }
    if alarm {
        eprintln!("theorem alarm: index != euler index");
        return Ok(ExitCode::from(EXIT_MATH));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_hodge(path: &std::path::Path, cli: &Cli) -> anyhow::Result<ExitCode> {
    let cplx = load_complex(path)?;
    let report = hodge::check_hodge_equivalences(&cplx, cli.tol)?;
    let dims = hodge::cohomology_dims(&cplx, cli.tol)?;
    if cli.json {
        let entries: Vec<serde_json::Value> = report
            .entries
            .iter()
            .map(|(name, r)| json!({ "check": name, "residual": r }))
            .collect();
        println!(
            "{}",
            json!({ "cohomology_dims": dims, "residuals": entries, "max_residual": report.max_residual() })
        );
    } else {
        println!("cohomology dims per degree: {dims:?}");
        for (name, r) in &report.entries {
            println!("{name:40} {r:.3e}");
        }
        println!("max residual: {:.3e}", report.max_residual());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_checks(path: &std::path::Path, cli: &Cli) -> anyhow::Result<ExitCode> {
    let cplx = load_complex(path)?;
    let mut entries: Vec<(String, f64)> = Vec::new();
    for (k, t) in cplx.diffs().iter().enumerate() {
        for (name, r) in check_bt_identities(t).entries {
            entries.push((format!("bt[{k}].{name}"), r));
        }
    }
    if cplx.kind() == ComplexKind::Complex {
        for (name, r) in cplx.structural_checks()?.entries {
            entries.push((format!("structural.{name}"), r));
        }
        for (name, r) in hodge::check_hodge_equivalences(&cplx, cli.tol)?.entries {
            entries.push((format!("hodge.{name}"), r));
        }
    }
    let max = entries.iter().map(|(_, r)| *r).fold(0.0, f64::max);
    if cli.json {
        let rows: Vec<serde_json::Value> = entries
            .iter()
            .map(|(name, r)| json!({ "check": name, "residual": r }))
            .collect();
        println!("{}", json!({ "residuals": rows, "max_residual": max }));
    } else {
        for (name, r) in &entries {
            println!("{name:50} {r:.3e}");
        }
        println!("max residual: {max:.3e}");
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_dims_grid(text: &str, blocks: usize, what: &str) -> anyhow::Result<Vec<Vec<usize>>> {
    let rows = text
        .split(';')
        .map(|module| {
            module
                .split(',')
                .map(|d| {
                    d.trim()
                        .parse::<usize>()
                        .map_err(|e| anyhow::anyhow!("bad {what} entry {d:?}: {e}"))
                })
                .collect::<anyhow::Result<Vec<usize>>>()
        })
        .collect::<anyhow::Result<Vec<Vec<usize>>>>()?;
    for row in &rows {
        if row.len() != blocks {
            anyhow::bail!(
                "each {what} group needs {blocks} entries (one per algebra block), got {}",
                row.len()
            );
        }
    }
    Ok(rows)
}

fn cmd_random(args: &RandomArgs, cli: &Cli) -> anyhow::Result<ExitCode> {
    let algebra = AlgebraDescriptor::new(args.algebra.clone())?;
    let cplx = match &args.dims {
        Some(dims_text) => {
            let dims = parse_dims_grid(dims_text, algebra.num_blocks(), "dims")?;
            let target = args
                .target_cohomology
                .as_ref()
                .map(|t| parse_dims_grid(t, algebra.num_blocks(), "target"))
                .transpose()?;
            let spec = generate::ComplexSpec {
                algebra,
                dims,
                target_cohomology: target.clone(),
            };
            let cplx = generate::random_complex(&spec, args.seed)?;
            if let Some(target) = target {
                let achieved = hodge::cohomology_dims(&cplx, cli.tol)?;
                if achieved != target {
                    eprintln!("theorem alarm: generated cohomology {achieved:?} differs from the target {target:?}");
                    return Ok(ExitCode::from(EXIT_MATH));
                }
            }
            cplx
        }
        None => {
            if args.target_cohomology.is_some() {
                anyhow::bail!("--target-cohomology requires --dims");
            }
            generate::random_complex_with_dims(&algebra, args.length, args.max_dim, args.seed)
        }
    };
    let doc = ComplexDocument::from_complex(
        &cplx,
        Metadata {
            name: args.name.clone(),
            seed: Some(args.seed),
            tensor_layout: None,
        },
    );
    write_output(&doc, args.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_perturb_sweep(args: &SweepArgs, cli: &Cli) -> anyhow::Result<ExitCode> {
    let cplx = load_complex(&args.path)?;
    let kind = match args.kind.as_str() {
        "bounded" => PerturbKind::Bounded,
        "relative" => PerturbKind::Relative,
        "compact" => PerturbKind::Compact,
        other => {
            anyhow::bail!("unknown perturbation kind {other:?} (expected bounded|relative|compact)")
        }
    };
    let report = perturb_sweep(&cplx, kind, args.epsilon, args.trials, args.seed, cli.tol)?;
    let homotopy = if args.homotopy_steps > 0 {
        let scaled = Complex::new(
            cplx.modules().to_vec(),
            cplx.diffs()
                .iter()
                .map(|t| t.scale(num_complex::Complex64::new(2.0, 0.0)))
                .collect(),
            ComplexKind::Complex,
            cplx.tol_complex(),
        )?;
        Some(homotopy_path_check(
            &cplx,
            &scaled,
            args.homotopy_steps,
            cli.tol,
        )?)
    } else {
        None
    };
    let report_json = json!({
        "metric_used": report.metric_used.to_string(),
        "epsilon": report.epsilon,
        "trials": report.trials,
        "accepted": report.accepted,
        "rejected": report.rejected,
        "index_changes": report.index_changes,
        "max_metric_observed": report.max_metric_observed,
        "seed": report.seed,
        "homotopy": homotopy.as_ref().map(|h| json!({
            "index_constant": h.index_constant,
            "steps": h.steps.iter().map(|s| json!({
                "lambda": s.lambda,
                "index": k0_json(&s.index),
                "gap_to_previous": s.gap_to_previous,
            })).collect::<Vec<_>>(),
        })),
    });
    println!("{report_json}");
    if report.index_changes > 0 || homotopy.map(|h| !h.index_constant).unwrap_or(false) {
        eprintln!("theorem alarm: index moved under an admissible perturbation");
        return Ok(ExitCode::from(EXIT_MATH));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_tensor(
    left: &std::path::Path,
    right: &std::path::Path,
    out: Option<&std::path::Path>,
    _cli: &Cli,
) -> anyhow::Result<ExitCode> {
    let l = load_complex(left)?;
    let r = load_complex(right)?;
    let (product, layout) = tensor_complex(&l, &r)?;
    let doc = ComplexDocument::from_complex(
        &product,
        Metadata {
            name: Some(format!(
                "tensor({}, {})",
                left.file_stem().and_then(|s| s.to_str()).unwrap_or("left"),
                right
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or("right"),
            )),
            seed: None,
            tensor_layout: Some(layout),
        },
    );
    write_output(&doc, out)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_sum(
    left: &std::path::Path,
    right: &std::path::Path,
    out: Option<&std::path::Path>,
    _cli: &Cli,
) -> anyhow::Result<ExitCode> {
    let l = load_complex(left)?;
    let r = load_complex(right)?;
    let sum = direct_sum_complex(&l, &r)?;
    let doc = ComplexDocument::from_complex(
        &sum,
        Metadata {
            name: Some(format!(
                "sum({}, {})",
                left.file_stem().and_then(|s| s.to_str()).unwrap_or("left"),
                right
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or("right"),
            )),
            seed: None,
            tensor_layout: None,
        },
    );
    write_output(&doc, out)?;
    Ok(ExitCode::SUCCESS)
}
