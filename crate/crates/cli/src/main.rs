use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use dilind_cli::document::{parse_invocation, Command, ParseError};
use dilind_cli::run::{run_command, TOOL, VERSION};
use serde_json::{json, Value};

#[derive(Debug, Parser)]
#[command(name = "dilind", version, about = "One-parameter matrix groups and dilation equations")]
struct Cli {
    /// analyze | cross-section | decide | witness | certify | verify-norm | lambda-probe | export-orbit
    #[arg(value_parser = parse_command)]
    command: Command,
    /// JSON problem document
    problem: PathBuf,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write per-sample CSV here
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Override the document seed
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_command(s: &str) -> Result<Command, String> {
    Command::parse(s).ok_or_else(|| format!("unknown command `{s}`"))
}

fn emit(value: &Value, out: Option<&PathBuf>) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(value).expect("reports serialize") + "\n";
    match out {
        Some(path) => fs::write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn fail(value: Value, out: Option<&PathBuf>, code: u8) -> ExitCode {
    eprintln!("dilind: {}", value["error"]["message"].as_str().unwrap_or("failed"));
    if let Err(e) = emit(&value, out) {
        eprintln!("dilind: cannot write report: {e}");
    }
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli.out.as_ref();
    let text = match fs::read_to_string(&cli.problem) {
        Ok(t) => t,
        Err(e) => {
            let msg = format!("cannot read {}: {e}", cli.problem.display());
            return fail(json!({"tool": TOOL, "version": VERSION, "error": {"tag": "Io", "message": msg}, "exitCode": 1}), out, 1);
        }
    };
    let doc = match parse_invocation(&text, cli.command, cli.seed) {
        Ok(doc) => doc,
        Err(e) => {
            let errors = match &e {
                ParseError::Syntax(m) => json!([{"kind": "SyntaxError", "message": m}]),
                ParseError::Invalid(list) => json!(list),
            };
            let value = json!({
                "tool": TOOL,
                "version": VERSION,
                "error": {"tag": "ValidationFailed", "message": e.to_string(), "errors": errors},
                "exitCode": 2,
            });
            return fail(value, out, 2);
        }
    };
    match run_command(&doc, cli.csv.is_some()) {
        Ok(run) => {
            let mut report = serde_json::to_value(&run.report).expect("reports serialize");
            if let Some(csv) = run.csv {
                match &cli.csv {
                    Some(path) => {
                        if let Err(e) = fs::write(path, csv) {
                            let msg = format!("cannot write {}: {e}", path.display());
                            return fail(json!({"tool": TOOL, "version": VERSION, "error": {"tag": "Io", "message": msg}, "exitCode": 1}), out, 1);
                        }
                        report["output"]["csvPath"] = json!(path.display().to_string());
                    }
                    None => report["output"]["csv"] = json!(csv),
                }
            }
            match emit(&report, out) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("dilind: cannot write report: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Err(e) => {
            let code = e.exit_code() as u8;
            fail(e.to_json(), out, code)
        }
    }
}
