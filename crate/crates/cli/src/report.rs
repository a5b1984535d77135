use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use mfdp::Execution;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// Exit status classes.
#[derive(Debug)]
pub enum CliError {
    /// Malformed or inconsistent input: exit 2.
    Input(String),
    /// Well-formed but too large to run: exit 3.
    Infeasible(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Infeasible(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Infeasible(m) => m,
        }
    }
}

impl From<mfdp::Error> for CliError {
    fn from(e: mfdp::Error) -> Self {
        match e {
            mfdp::Error::Infeasible(_) => CliError::Infeasible(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

/// Per-run state: the seed, the input files read and the execution mode.
pub struct Context {
    seed: Option<u64>,
    drawn: bool,
    inputs: Vec<InputDigest>,
    pub exec: Execution,
}

impl Context {
    pub fn new(seed: Option<u64>) -> Self {
        Self {
            seed,
            drawn: false,
            inputs: Vec::new(),
            exec: Execution::Parallel,
        }
    }

    /// The run seed, drawing one on first use if none was given.
    pub fn seed(&mut self) -> u64 {
        if self.seed.is_none() {
            self.seed = Some(rand::random());
            self.drawn = true;
        }
        self.seed.unwrap()
    }

    pub fn used_seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn seed_was_drawn(&self) -> bool {
        self.drawn
    }

    /// Reads a file and records its digest.
    pub fn read(&mut self, path: &Path) -> CliResult<Vec<u8>> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: hex_digest(&bytes),
        });
        Ok(bytes)
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Aligned plain-text table.
#[derive(Debug, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn key_value<K: Into<String>, V: ToString>(pairs: impl IntoIterator<Item = (K, V)>) -> Self {
        Self {
            headers: vec!["field".into(), "value".into()],
            rows: pairs.into_iter().map(|(k, v)| vec![k.into(), v.to_string()]).collect(),
        }
    }

    pub fn render(&self) -> String {
        let mut widths: Vec<usize> = self.headers.iter().map(|h| h.len()).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |cells: &[String]| {
            let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, &w)| format!("{c:<w$}")).collect();
            padded.join("  ").trim_end().to_string()
        };
        let mut out = line(&self.headers);
        out.push('\n');
        out.push_str(&line(&widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>()));
        for row in &self.rows {
            out.push('\n');
            out.push_str(&line(row));
        }
        out
    }
}

/// What a subcommand produced.
pub struct Output {
    pub result: Value,
    pub table: Table,
    pub csv: String,
    /// Set when the run completed but its check failed (exit 1).
    pub failure: Option<String>,
}

/// Writes the envelope (JSON or CSV) to stdout and the table to stderr.
pub fn emit(command: &str, config: &impl Serialize, ctx: &Context, out: &Output, csv: bool) -> std::io::Result<()> {
    let version = env!("CARGO_PKG_VERSION");
    let config_hash = hex_digest(
        serde_json::to_string(&json!({ "config": config, "seed": ctx.used_seed(), "inputs": ctx.inputs }))
            .expect("config serializes")
            .as_bytes(),
    );
    let seed = ctx.used_seed().map_or("none".to_string(), |s| s.to_string());

    let mut stderr = std::io::stderr().lock();
    writeln!(stderr, "mfdp {version} {command}  seed={seed}  config={}", &config_hash[..16])?;
    writeln!(stderr, "{}", out.table.render())?;

    let mut stdout = std::io::stdout().lock();
    if csv {
        writeln!(stdout, "# mfdp {version} {command} seed={seed} config_sha256={config_hash}")?;
        stdout.write_all(out.csv.as_bytes())?;
    } else {
        let envelope = json!({
            "tool": "mfdp",
            "version": version,
            "command": command,
            "seed": ctx.used_seed(),
            "config_sha256": config_hash,
            "inputs": ctx.inputs,
            "result": out.result,
        });
        serde_json::to_writer_pretty(&mut stdout, &envelope)?;
        writeln!(stdout)?;
    }
    stdout.flush()
}
