// SPDX-License-Identifier: Apache-2.0

//! `wasmdesk` command-line front end.
//!
//! Exit codes: 0 success, 1 trap or link failure, 2 validation error,
//! 3 malformed binary, 4 usage or configuration error, 5 benchmark result
//! mismatch, and the guest's status after `proc_exit`.

use std::cell::RefCell;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::rc::Rc;

use clap::{Parser, Subcommand, ValueEnum};
use wasmdesk::exec::{Config, Imports, InvokeError, ModuleInstance, Value};
use wasmdesk::harness::{run_bench, Format, RunConfig, DEFAULT_ITERATIONS, DEFAULT_WARMUP};
use wasmdesk::suite::{build_case, emit_corpus, CaseName, DEFAULT_SEED};
use wasmdesk::tree::DEFAULT_THRESHOLD;
use wasmdesk::wasi::{link, WasiContext};
use wasmdesk::{decode_module, validate_module, ExportKind, ImportDesc, Module};

const EXIT_TRAP: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_MALFORMED: u8 = 3;
const EXIT_USAGE: u8 = 4;

#[derive(Parser)]
#[command(name = "wasmdesk", version, about = "A small WebAssembly 1.0 interpreter")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decode, validate, instantiate and call a function.
    Run {
        file: PathBuf,
        /// Export to call. Without it, `_start` is called and ARGS become
        /// the guest's WASI arguments.
        #[arg(long)]
        invoke: Option<String>,
        /// Function entries and loop iterations before a body is rewritten.
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        opt_threshold: u32,
        /// Never rewrite; interpret the trees as built.
        #[arg(long)]
        no_optimize: bool,
        #[arg(allow_hyphen_values = true)]
        args: Vec<String>,
    },
    /// Check a binary and report the first validation error.
    Validate { file: PathBuf },
    /// Summarize the sections, functions and exports of a binary.
    Inspect { file: PathBuf },
    /// Time the benchmark corpus.
    Bench(BenchArgs),
}

#[derive(clap::Args)]
struct BenchArgs {
    /// Case to run; repeatable. Defaults to all seven.
    #[arg(long = "case", value_name = "NAME")]
    cases: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
    iterations: usize,
    #[arg(long, default_value_t = DEFAULT_WARMUP)]
    warmup: usize,
    /// Run only the unoptimized mode; no reduction is reported.
    #[arg(long, alias = "no-optimize")]
    no_optimize_compare: bool,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    opt_threshold: u32,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u32,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the selected cases as .wasm files and exit without timing.
    #[arg(long, value_name = "DIR")]
    emit_corpus: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
    Table,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
            FormatArg::Table => Format::Table,
        }
    }
}

/// An error message paired with the process exit status.
struct Failure(u8, String);

type CmdResult = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure(EXIT_USAGE, msg.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Run { file, invoke, opt_threshold, no_optimize, args } => {
            let threshold = (!no_optimize).then_some(opt_threshold);
            cmd_run(&file, invoke.as_deref(), threshold, &args)
        }
        Command::Validate { file } => cmd_validate(&file),
        Command::Inspect { file } => cmd_inspect(&file),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            if !msg.is_empty() {
                eprintln!("wasmdesk: {msg}");
            }
            ExitCode::from(code)
        }
    }
}

fn load(file: &Path) -> Result<Module, Failure> {
    let bytes = std::fs::read(file).map_err(|e| usage(format!("{}: {e}", file.display())))?;
    decode_module(&bytes).map_err(|e| Failure(EXIT_MALFORMED, format!("malformed binary: {e}")))
}

fn fuel_from_env() -> Result<Option<u64>, Failure> {
    match std::env::var("WASMDESK_FUEL") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| usage(format!("WASMDESK_FUEL must be a non-negative integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn cmd_run(file: &Path, invoke: Option<&str>, opt_threshold: Option<u32>, args: &[String]) -> CmdResult {
    let module = load(file)?;
    let vm = validate_module(module.clone())
        .map_err(|e| Failure(EXIT_INVALID, format!("validation failed: {e}")))?;
    let name = invoke.unwrap_or("_start");
    let mut guest_args = vec![file.display().to_string()];
    let values = match invoke {
        Some(_) => parse_args(&module, name, args)?,
        None => {
            guest_args.extend(args.iter().cloned());
            Vec::new()
        }
    };
    let ctx = Rc::new(RefCell::new(WasiContext::default().with_args(guest_args)));
    let mut imports = Imports::new();
    link(&mut imports, ctx.clone(), &module);
    let config = Config { fuel: fuel_from_env()?, opt_threshold, ..Config::default() };
    let mut inst = ModuleInstance::instantiate(&vm, &mut imports, config).map_err(|e| match e {
        wasmdesk::exec::InstantiateError::Exit(code) => Failure(code as u8, String::new()),
        other => Failure(EXIT_TRAP, format!("instantiation failed: {other}")),
    })?;
    match inst.invoke(name, &values) {
        Ok(results) => {
            for v in results {
                println!("{v}");
            }
            Ok(())
        }
        Err(InvokeError::Exit(code)) => {
            if code == 0 {
                Ok(())
            } else {
                Err(Failure(code as u8, String::new()))
            }
        }
        Err(InvokeError::Trap(t)) => Err(Failure(EXIT_TRAP, t.to_string())),
        Err(other) => Err(usage(other.to_string())),
    }
}

/// Parses `args` against the signature of export `name`.
fn parse_args(module: &Module, name: &str, args: &[String]) -> Result<Vec<Value>, Failure> {
    let Some((ExportKind::Func, index)) = module.export_lookup(name) else {
        return Err(usage(format!("no exported function named {name:?}")));
    };
    let ty = module.func_signature(index).map_err(|e| usage(e.to_string()))?;
    if ty.params.len() != args.len() {
        return Err(usage(format!("{name} expects {} arguments, got {}", ty.params.len(), args.len())));
    }
    ty.params
        .iter()
        .zip(args)
        .map(|(t, a)| Value::parse(*t, a).ok_or_else(|| usage(format!("cannot read {a:?} as {t}"))))
        .collect()
}

fn cmd_validate(file: &Path) -> CmdResult {
    let module = load(file)?;
    match validate_module(module) {
        Ok(_) => {
            println!("OK");
            Ok(())
        }
        Err(e) => {
            println!("{e}");
            Err(Failure(EXIT_INVALID, String::new()))
        }
    }
}

fn cmd_inspect(file: &Path) -> CmdResult {
    let m = load(file)?;
    println!("types: {}", m.types.len());
    for (i, t) in m.types.iter().enumerate() {
        println!("  type[{i}] {t}");
    }
    println!("imports: {}", m.imports.len());
    for imp in &m.imports {
        let what = match imp.desc {
            ImportDesc::Func(t) => format!("func type[{t}]"),
            ImportDesc::Table(l) => format!("table {l:?}"),
            ImportDesc::Memory(l) => format!("memory {l:?}"),
            ImportDesc::Global(g) => format!("global {g:?}"),
        };
        println!("  {}.{}: {what}", imp.module, imp.field);
    }
    let base = m.imported_func_count();
    println!("functions: {}", m.funcs.len());
    for (i, f) in m.funcs.iter().enumerate() {
        let sig = m.types.get(f.type_index as usize).map_or("?".to_owned(), |t| t.to_string());
        println!(
            "  func[{}] {sig} locals={} instrs={}",
            base as usize + i,
            f.locals.len(),
            f.body.len()
        );
    }
    for l in &m.tables {
        println!("table: min={} max={:?}", l.min, l.max);
    }
    for l in &m.memories {
        println!("memory: min={} max={:?}", l.min, l.max);
    }
    println!("globals: {}", m.globals.len());
    println!("exports: {}", m.exports.len());
    for e in &m.exports {
        println!("  {:?} {:?} -> {}", e.name, e.kind, e.index);
    }
    if let Some(s) = m.start {
        println!("start: func[{s}]");
    }
    println!("element segments: {}", m.elements.len());
    println!("data segments: {}", m.data.len());
    for c in &m.customs {
        println!("custom section {:?}: {} bytes", c.name, c.data.len());
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> CmdResult {
    let names = if args.cases.is_empty() {
        CaseName::ALL.to_vec()
    } else {
        args.cases
            .iter()
            .map(|s| s.parse::<CaseName>().map_err(|e| usage(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?
    };
    let config = RunConfig {
        iterations: args.iterations,
        warmup: args.warmup,
        optimize: !args.no_optimize_compare,
        opt_threshold: args.opt_threshold,
        seed: args.seed,
        cases: names.iter().map(|n| n.default_params()).collect(),
        fuel: fuel_from_env()?,
    };
    if let Some(dir) = &args.emit_corpus {
        let cases = config
            .cases
            .iter()
            .map(|p| build_case(*p, config.seed))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| usage(e.to_string()))?;
        let written = emit_corpus(&cases, dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
        for p in written {
            println!("{}", p.display());
        }
        return Ok(());
    }
    let report = run_bench(&config).map_err(|e| Failure(e.exit_code() as u8, e.to_string()))?;
    let format = Format::from(args.format);
    let text = report.render(format);
    match &args.out {
        Some(path) => {
            let write = |p: &Path, s: &str| {
                std::fs::write(p, s).map_err(|e| usage(format!("{}: {e}", p.display())))
            };
            write(path, &text)?;
            // JSON carries the raw samples itself
            if format != Format::Json {
                let mut raw = path.as_os_str().to_owned();
                raw.push(".samples.csv");
                write(Path::new(&raw), &report.samples_csv())?;
            }
        }
        None => print!("{text}"),
    }
    Ok(())
}
