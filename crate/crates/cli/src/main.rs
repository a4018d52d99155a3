//! `qk` — check, compile, run, and trace kernel programs from the command
//! line.
//!
//! Exit codes: 0 on success, 1 on user errors (bad programs, unknown
//! passes, unregistered callbacks), 2 on I/O errors.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use qk_core::passes::parse_pipeline;
use qk_core::{
    builtin_callbacks, builtin_gateset, callback_ids, serialize, validate, CallbackRegistry,
    GateSet, Histogram, NoiseModel, Pipeline, Program, RunOptions, Style,
};

#[derive(Parser)]
#[command(
    name = "qk",
    version,
    about = "Compile and emulate quantum kernel programs",
    after_help = "Programs use the .qk concrete syntax; a leading `@gateset <name>` line \
names the gate set, or pass --gateset. Callbacks available here are the built-ins \
(done, repeat_until_zero, fix); register custom callbacks through the library API."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a program; diagnostics go to stderr.
    Check {
        file: PathBuf,
        /// Gate set name (or path to a gate-set JSON file); overrides the
        /// file header.
        #[arg(long)]
        gateset: Option<String>,
    },
    /// Compile a program through a pass pipeline and print the result.
    Compile {
        file: PathBuf,
        /// Comma-separated pass names, e.g. "toy2cliffords,rep3bit,h2".
        #[arg(long, default_value = "")]
        pipeline: String,
        #[arg(long)]
        gateset: Option<String>,
        /// Write the compiled program here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the callback manifest (JSON) here; defaults to
        /// "<out>.manifest.json" when --out is given.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Join runs of sibling gates with "; ".
        #[arg(long)]
        compact: bool,
    },
    /// Compile (optionally) and run shots; prints a histogram.
    Run {
        file: PathBuf,
        #[arg(long, default_value = "")]
        pipeline: String,
        #[arg(long)]
        gateset: Option<String>,
        #[arg(long, default_value_t = 1000)]
        shots: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Pauli/readout noise as "px,py,pz,pmx".
        #[arg(long)]
        noise: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long = "max-steps", default_value_t = qk_core::eval::DEFAULT_MAX_STEPS)]
        max_steps: u64,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run once and print one JSON step record per line.
    Trace {
        file: PathBuf,
        #[arg(long, default_value = "")]
        pipeline: String,
        #[arg(long)]
        gateset: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        noise: Option<String>,
        #[arg(long = "max-steps", default_value_t = qk_core::eval::DEFAULT_MAX_STEPS)]
        max_steps: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum CliError {
    User(String),
    Io(String),
}

impl CliError {
    fn user(e: impl std::fmt::Display) -> Self {
        CliError::User(e.to_string())
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::User(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Check { file, gateset } => cmd_check(&file, gateset.as_deref()),
        Command::Compile {
            file,
            pipeline,
            gateset,
            out,
            manifest,
            compact,
        } => cmd_compile(&file, &pipeline, gateset.as_deref(), out, manifest, compact),
        Command::Run {
            file,
            pipeline,
            gateset,
            shots,
            seed,
            noise,
            format,
            max_steps,
            threads,
            out,
        } => {
            if shots == 0 {
                return Err(CliError::User("--shots must be at least 1".into()));
            }
            let options = RunOptions {
                seed,
                noise: parse_noise(noise.as_deref())?,
                max_steps,
                threads: threads.max(1),
            };
            cmd_run(
                &file,
                &pipeline,
                gateset.as_deref(),
                shots,
                format,
                &options,
                out,
            )
        }
        Command::Trace {
            file,
            pipeline,
            gateset,
            seed,
            noise,
            max_steps,
            out,
        } => {
            let options = RunOptions {
                seed,
                noise: parse_noise(noise.as_deref())?,
                max_steps,
                threads: 1,
            };
            cmd_trace(&file, &pipeline, gateset.as_deref(), &options, out)
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Resolves a gate set: a path to a JSON definition if one exists there,
/// otherwise a built-in name.
fn resolve_gateset(name: &str) -> Result<GateSet, CliError> {
    if name.ends_with(".json") || Path::new(name).exists() {
        let text = read_file(Path::new(name))?;
        return GateSet::from_json(&text).map_err(CliError::user);
    }
    builtin_gateset(name).map_err(CliError::user)
}

/// Parses a source file and pairs it with its gate set (flag beats header).
fn load_program(path: &Path, gateset_flag: Option<&str>) -> Result<(Program, GateSet), CliError> {
    let text = read_file(path)?;
    let source = qk_core::parse(&text).map_err(CliError::user)?;
    let name = gateset_flag
        .map(str::to_string)
        .or(source.gateset.clone())
        .ok_or_else(|| {
            CliError::User(format!(
                "{} has no `@gateset` header; pass --gateset",
                path.display()
            ))
        })?;
    let gates = resolve_gateset(&name)?;
    Ok((Program::new(gates.name.clone(), source.kernel), gates))
}

/// Validates and reports diagnostics on stderr.
fn check_program(program: &Program, gates: &GateSet) -> Result<(), CliError> {
    let diagnostics = validate(program, gates);
    if diagnostics.is_empty() {
        return Ok(());
    }
    for d in &diagnostics {
        eprintln!("{d}");
    }
    Err(CliError::User(format!(
        "{} validation finding(s)",
        diagnostics.len()
    )))
}

fn parse_noise(spec: Option<&str>) -> Result<Option<NoiseModel>, CliError> {
    let Some(spec) = spec else {
        return Ok(None);
    };
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(CliError::User(
            "--noise expects four probabilities: px,py,pz,pmx".into(),
        ));
    }
    let mut values = [0.0f64; 4];
    for (v, part) in values.iter_mut().zip(&parts) {
        *v = part
            .parse()
            .map_err(|_| CliError::User(format!("bad probability `{part}` in --noise")))?;
    }
    let noise = NoiseModel {
        p_x: values[0],
        p_y: values[1],
        p_z: values[2],
        p_mx: values[3],
    };
    noise.validate().map_err(CliError::user)?;
    Ok(Some(noise))
}

/// Compiles through the pipeline (identity when the spec is empty) and
/// returns the final program, gate set, and callback registry.
fn compile_stage(
    program: Program,
    gates: GateSet,
    pipeline_spec: &str,
) -> Result<(Program, GateSet, CallbackRegistry, Pipeline), CliError> {
    let pipeline = parse_pipeline(pipeline_spec).map_err(CliError::user)?;
    let (compiled, callbacks) = pipeline
        .compile(&program, &builtin_callbacks())
        .map_err(CliError::user)?;
    let final_gates = if compiled.gateset == gates.name {
        gates
    } else {
        builtin_gateset(&compiled.gateset).map_err(CliError::user)?
    };
    Ok((compiled, final_gates, callbacks, pipeline))
}

/// Resolves every callback the program references. Wrapped names from
/// previously compiled programs (`h2.rep3bit.done` and the like) are
/// rebuilt by peeling pass prefixes; anything else missing fails fast.
fn resolve_callbacks(
    program: &Program,
    callbacks: &CallbackRegistry,
) -> Result<CallbackRegistry, CliError> {
    let mut resolved = callbacks.clone();
    let referenced: BTreeSet<String> = callback_ids(&program.kernel);
    for name in referenced {
        if resolved.contains(&name) {
            continue;
        }
        match qk_core::passes::resolve_wrapped(&name, callbacks) {
            Some(factory) => resolved.register(name, factory),
            None => {
                return Err(CliError::User(format!(
                    "unregistered callback `{name}`; the CLI knows the built-ins \
(done, repeat_until_zero, fix) and their pass-wrapped forms — register custom \
callbacks via the library API"
                )))
            }
        }
    }
    Ok(resolved)
}

fn cmd_check(file: &Path, gateset: Option<&str>) -> Result<(), CliError> {
    let (program, gates) = load_program(file, gateset)?;
    check_program(&program, &gates)
}

fn cmd_compile(
    file: &Path,
    pipeline_spec: &str,
    gateset: Option<&str>,
    out: Option<PathBuf>,
    manifest: Option<PathBuf>,
    compact: bool,
) -> Result<(), CliError> {
    let (program, gates) = load_program(file, gateset)?;
    check_program(&program, &gates)?;
    let (compiled, _, callbacks, pipeline) = compile_stage(program, gates, pipeline_spec)?;
    let style = if compact {
        Style::Compact
    } else {
        Style::Lines
    };
    write_output(out.as_deref(), &serialize(&compiled, style))?;

    let manifest_path =
        manifest.or_else(|| out.as_deref().map(|p| p.with_extension("manifest.json")));
    if let Some(path) = manifest_path {
        let text = callback_manifest(&pipeline, &callbacks);
        std::fs::write(&path, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

/// Renders the callback registry after compilation: each name with the
/// passes that wrapped it (outermost first) and the original name.
fn callback_manifest(pipeline: &Pipeline, callbacks: &CallbackRegistry) -> String {
    let pass_names: Vec<&str> = pipeline.passes().iter().map(|p| p.name()).collect();
    let entries: Vec<serde_json::Value> = callbacks
        .names()
        .map(|full| {
            let mut chain = Vec::new();
            let mut rest = full;
            for pass in pass_names.iter().rev() {
                if let Some(stripped) = rest.strip_prefix(&format!("{pass}.")) {
                    chain.push(pass.to_string());
                    rest = stripped;
                }
            }
            serde_json::json!({
                "name": full,
                "original": rest,
                "wrapped_by": chain,
            })
        })
        .collect();
    let doc = serde_json::json!({
        "pipeline": pass_names,
        "callbacks": entries,
    });
    format!("{}\n", serde_json::to_string_pretty(&doc).unwrap())
}

fn render_histogram(hist: &Histogram, format: Format) -> String {
    match format {
        Format::Json => format!("{}\n", serde_json::to_string_pretty(hist).unwrap()),
        Format::Csv => {
            let mut out = String::from("bitstring,count\n");
            for (key, count) in hist {
                out.push_str(&format!("{key},{count}\n"));
            }
            out
        }
        Format::Text => {
            let width = hist.keys().map(String::len).max().unwrap_or(1);
            let mut out = String::new();
            for (key, count) in hist {
                out.push_str(&format!("{key:<width$}  {count}\n"));
            }
            out
        }
    }
}

fn cmd_run(
    file: &Path,
    pipeline_spec: &str,
    gateset: Option<&str>,
    shots: u64,
    format: Format,
    options: &RunOptions,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let (program, gates) = load_program(file, gateset)?;
    check_program(&program, &gates)?;
    let (compiled, gates, callbacks, _) = compile_stage(program, gates, pipeline_spec)?;
    let callbacks = resolve_callbacks(&compiled, &callbacks)?;
    let hist = qk_core::run_shots(&compiled, &gates, &callbacks, shots, options)
        .map_err(CliError::user)?;
    write_output(out.as_deref(), &render_histogram(&hist, format))
}

fn cmd_trace(
    file: &Path,
    pipeline_spec: &str,
    gateset: Option<&str>,
    options: &RunOptions,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let (program, gates) = load_program(file, gateset)?;
    check_program(&program, &gates)?;
    let (compiled, gates, callbacks, _) = compile_stage(program, gates, pipeline_spec)?;
    let callbacks = resolve_callbacks(&compiled, &callbacks)?;
    let records = qk_core::trace(&compiled, &gates, &callbacks, options).map_err(CliError::user)?;
    let mut text = String::new();
    for record in &records {
        text.push_str(&record.to_json_line());
        text.push('\n');
    }
    write_output(out.as_deref(), &text)
}
