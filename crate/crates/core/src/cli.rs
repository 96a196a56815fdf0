//! The `qps` command-line driver.
//!
//! `run` prints one JSON record per shot on stdout. Shots run in parallel,
//! each with its own seed, and are printed in shot order.

use std::collections::HashMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::builder::RangedU64ValueParser;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::interp::{
    blocking_diagnostics, run_program, unitary_of_proc, ErrorKind, ExecMode, Input, Inputs,
    RunOptions, RuntimeError,
};
use crate::lang::{check_program, has_errors, parse, Diagnostic, Program};
use crate::qstate::{DEFAULT_MAX_QUBITS, MAX_QUBITS_CEILING};

pub const EXIT_OK: i32 = 0;
pub const EXIT_REJECTED: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "qps", version, about = "Check, run and inspect quantum pseudocode programs")]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Parse and check a program; diagnostics go to stderr.
    Check {
        /// Program file.
        path: PathBuf,
    },
    /// Run a program and print one record per shot.
    Run(RunArgs),
    /// Print the unitary of a measurement-free proc.
    Matrix(MatrixArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Program file.
    pub path: PathBuf,
    /// Input bindings, `name=value`.
    pub bindings: Vec<String>,
    /// Input binding, `name=value` (repeatable).
    #[arg(long = "in", value_name = "NAME=VALUE")]
    pub inputs: Vec<String>,
    /// Proc to run; defaults to `main`, else the last proc.
    #[arg(long)]
    pub entry: Option<String>,
    /// `strict` rejects mode errors up front; `permissive` measures and
    /// promotes implicitly.
    #[arg(long, default_value = "strict")]
    pub mode: ExecMode,
    /// Most qubits live at once.
    #[arg(long, default_value_t = DEFAULT_MAX_QUBITS,
          value_parser = RangedU64ValueParser::<usize>::new().range(1..=MAX_QUBITS_CEILING as u64))]
    pub max_qubits: usize,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Common,
    /// Base seed; each shot derives its own.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of independent runs.
    #[arg(long, default_value_t = 1,
          value_parser = RangedU64ValueParser::<usize>::new().range(1..))]
    pub shots: usize,
    /// Include the final joint state in each record.
    #[arg(long)]
    pub dump_state: bool,
    /// Include the applied gates in each record.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Args)]
pub struct MatrixArgs {
    #[command(flatten)]
    pub common: Common,
    /// Register width for a quantum parameter, `name=w` (repeatable).
    #[arg(long = "width", value_name = "NAME=W")]
    pub widths: Vec<String>,
}

/// Seed for shot `i` of a run started with `seed`.
pub fn shot_seed(seed: u64, i: usize) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(i as u64 + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs the CLI on `args` (including the program name) and returns the
/// exit status.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_IO } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let code = match cli.cmd {
        Cmd::Check { path } => cmd_check(&path, err),
        Cmd::Run(a) => cmd_run(&a, out, err),
        Cmd::Matrix(a) => cmd_matrix(&a, out, err),
    };
    let _ = out.flush();
    code
}

fn read(path: &Path, err: &mut dyn Write) -> Option<String> {
    match std::fs::read_to_string(path) {
        Ok(s) => Some(s),
        Err(e) => {
            let _ = writeln!(err, "error: cannot read {}: {e}", path.display());
            None
        }
    }
}

fn report(diags: &[Diagnostic], err: &mut dyn Write) {
    for d in diags {
        let _ = writeln!(err, "{d}");
    }
}

pub fn cmd_check(path: &Path, err: &mut dyn Write) -> i32 {
    let Some(src) = read(path, err) else { return EXIT_IO };
    let program = match parse(&src) {
        Ok(p) => p,
        Err(d) => {
            report(&[d], err);
            return EXIT_REJECTED;
        }
    };
    let diags = check_program(&program);
    report(&diags, err);
    if has_errors(&diags) {
        EXIT_REJECTED
    } else {
        EXIT_OK
    }
}

/// Reads, parses and checks for `mode`; on failure returns the exit code.
fn load(c: &Common, err: &mut dyn Write) -> Result<(Program, Inputs), i32> {
    let src = read(&c.path, err).ok_or(EXIT_IO)?;
    let program = parse(&src).map_err(|d| {
        report(&[d], err);
        EXIT_REJECTED
    })?;
    let blocking = blocking_diagnostics(&program, c.mode);
    if !blocking.is_empty() {
        report(&blocking, err);
        return Err(EXIT_REJECTED);
    }
    let mut inputs = Inputs::new();
    for b in c.bindings.iter().chain(&c.inputs) {
        let Some((k, v)) = b.split_once('=') else {
            let _ = writeln!(err, "error: input `{b}` is not of the form name=value");
            return Err(EXIT_IO);
        };
        if inputs.insert(k.trim().to_string(), Input::Text(v.trim().to_string())).is_some() {
            let _ = writeln!(err, "error: input `{k}` given twice");
            return Err(EXIT_IO);
        }
    }
    Ok((program, inputs))
}

fn options(c: &Common) -> RunOptions {
    RunOptions {
        mode: c.mode,
        max_qubits: c.max_qubits,
        entry: c.entry.clone(),
        ..RunOptions::default()
    }
}

fn exit_for(e: &RuntimeError) -> i32 {
    match e.kind {
        ErrorKind::Input => EXIT_IO,
        _ => EXIT_RUNTIME,
    }
}

fn error_record(shot: usize, seed: u64, e: &RuntimeError) -> serde_json::Value {
    serde_json::json!({
        "shot": shot,
        "error": {
            "kind": e.kind.to_string(),
            "line": e.line,
            "col": e.col,
            "message": e.message,
        },
        "seed": seed,
    })
}

pub fn cmd_run(a: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let (program, inputs) = match load(&a.common, err) {
        Ok(x) => x,
        Err(code) => return code,
    };
    let base = RunOptions {
        dump_state: a.dump_state,
        trace: a.trace,
        ..options(&a.common)
    };
    let records: Vec<(String, Option<i32>)> = (0..a.shots)
        .into_par_iter()
        .map(|i| {
            let seed = shot_seed(a.seed, i);
            let opts = RunOptions { seed, ..base.clone() };
            match run_program(&program, &inputs, &opts) {
                Ok(r) => (r.to_json(i).to_string(), None),
                Err(e) => (error_record(i, seed, &e).to_string(), Some(exit_for(&e))),
            }
        })
        .collect();
    for (line, failed) in records {
        let _ = writeln!(out, "{line}");
        if let Some(code) = failed {
            let _ = out.flush();
            let _ = writeln!(err, "error: run stopped at the first failing shot");
            return code;
        }
    }
    EXIT_OK
}

fn fmt_entry(z: num_complex::Complex64) -> String {
    format!("{:.14e}{:+.14e}i", z.re, z.im)
}

pub fn cmd_matrix(a: &MatrixArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let (program, inputs) = match load(&a.common, err) {
        Ok(x) => x,
        Err(code) => return code,
    };
    let mut widths = HashMap::new();
    for w in &a.widths {
        match w.split_once('=').map(|(k, v)| (k.trim(), v.trim().parse::<usize>())) {
            Some((k, Ok(n))) => {
                widths.insert(k.to_string(), n);
            }
            _ => {
                let _ = writeln!(err, "error: width `{w}` is not of the form name=w");
                return EXIT_IO;
            }
        }
    }
    match unitary_of_proc(&program, &inputs, &widths, &options(&a.common)) {
        Ok(m) => {
            for row in 0..m.dim {
                let line: Vec<String> = (0..m.dim).map(|c| fmt_entry(m.get(row, c))).collect();
                let _ = writeln!(out, "{}", line.join("\t"));
            }
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "{e}");
            match e.kind {
                ErrorKind::Unsupported => EXIT_REJECTED,
                _ => exit_for(&e),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shot_seeds_differ() {
        let s: std::collections::HashSet<u64> = (0..1000).map(|i| shot_seed(0, i)).collect();
        assert_eq!(s.len(), 1000);
        assert_ne!(shot_seed(0, 0), shot_seed(1, 0));
    }

    #[test]
    fn splitmix_reference_value() {
        // First output of splitmix64 seeded with 0.
        assert_eq!(shot_seed(0, 0), 0xE220_A839_7B1D_CDAF);
    }

    #[test]
    fn entry_format() {
        let z = num_complex::Complex64::new(0.5, -0.25);
        assert_eq!(fmt_entry(z), "5.00000000000000e-1-2.50000000000000e-1i");
    }
}
