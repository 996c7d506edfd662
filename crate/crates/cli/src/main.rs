//! `secmail`: scenario-driven secured-mail simulator, net analyzer and
//! report generator.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use secmail_core::analysis::{build_marking_graph, check_liveness, generate_report};
use secmail_core::enet::parse_net;
use secmail_core::nets::{build_enr, build_ens, enr_abstraction, ens_abstraction};
use secmail_core::runner::{
    execute, load_scenario_str, render_summary, render_trace, trace_file_name, RunOptions,
};
use secmail_core::services::parse_export;

/// Scenarios shipped with the binary, runnable by name.
const BUNDLED_SCENARIOS: &[(&str, &str)] = &[
    ("happy_path", include_str!("../scenarios/happy_path.scn")),
    ("deny_access", include_str!("../scenarios/deny_access.scn")),
    ("secmail_refused", include_str!("../scenarios/secmail_refused.scn")),
    ("multi_message", include_str!("../scenarios/multi_message.scn")),
    ("tampered", include_str!("../scenarios/tampered.scn")),
    ("receive_loop", include_str!("../scenarios/receive_loop.scn")),
];

#[derive(Parser)]
#[command(
    name = "secmail",
    about = "Secured e-mail workflow simulator on an E-net engine",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario (a bundled name or a file path) and write traces,
    /// audit export, archive dump and summary into a directory.
    Run {
        /// Bundled scenario name or path to a scenario file.
        scenario: String,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Round-robin one firing per session instead of running sessions
        /// sequentially.
        #[arg(long)]
        interleave: bool,
        /// Override every session's step budget.
        #[arg(long, value_name = "N")]
        max_steps: Option<u64>,
    },
    /// Build the marking graph of a net, check liveness, and write the
    /// report (plus a .dot rendering of the graph).
    Analyze {
        /// "ens", "enr", or a net definition file.
        #[arg(long)]
        net: String,
        /// Report output path; the graph goes next to it with a .dot
        /// extension.
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate the activity/lifecycle report from a run's outputs.
    Report {
        /// Audit export written by `run` (missing file = empty log).
        #[arg(long)]
        audit: PathBuf,
        /// Trace directory written by `run`.
        #[arg(long)]
        traces: PathBuf,
        /// Report output path.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            scenario,
            out,
            interleave,
            max_steps,
        } => cmd_run(&scenario, &out, interleave, max_steps),
        Command::Analyze { net, out } => cmd_analyze(&net, &out),
        Command::Report { audit, traces, out } => cmd_report(&audit, &traces, &out),
    };
    ExitCode::from(code)
}

fn fail(code: u8, message: impl std::fmt::Display) -> u8 {
    eprintln!("secmail: {message}");
    code
}

fn write_file(path: &Path, contents: &str) -> Result<(), u8> {
    fs::write(path, contents).map_err(|e| fail(2, format!("cannot write {}: {e}", path.display())))
}

fn cmd_run(scenario_arg: &str, out: &Path, interleave: bool, max_steps: Option<u64>) -> u8 {
    let text = match BUNDLED_SCENARIOS
        .iter()
        .find(|(name, _)| *name == scenario_arg)
    {
        Some((_, text)) => (*text).to_string(),
        None => match fs::read_to_string(scenario_arg) {
            Ok(t) => t,
            Err(e) => return fail(2, format!("cannot read scenario {scenario_arg}: {e}")),
        },
    };
    let scenario = match load_scenario_str(&text) {
        Ok(sc) => sc,
        Err(e) => return fail(2, e),
    };
    let seed_override = match std::env::var("SECMAIL_SEED") {
        Ok(v) => match v.parse::<u64>() {
            Ok(n) => Some(n),
            Err(_) => return fail(2, format!("SECMAIL_SEED must be an integer, got {v:?}")),
        },
        Err(_) => None,
    };

    let artifacts = execute(
        &scenario,
        &RunOptions {
            interleave,
            max_steps_override: max_steps,
            seed_override,
        },
    );

    if let Err(code) = fs::create_dir_all(out)
        .map_err(|e| fail(2, format!("cannot create {}: {e}", out.display())))
    {
        return code;
    }
    for session in &artifacts.sessions {
        if let Err(code) = write_file(&out.join(trace_file_name(session)), &render_trace(session)) {
            return code;
        }
    }
    let summary = render_summary(&artifacts);
    if let Err(code) = write_file(&out.join("audit.log"), &artifacts.env.audit.export()) {
        return code;
    }
    if let Err(code) = write_file(&out.join("archive.dump"), &artifacts.env.archive.dump()) {
        return code;
    }
    if let Err(code) = write_file(&out.join("summary.txt"), &summary) {
        return code;
    }
    print!("{summary}");

    if artifacts.all_terminated() {
        0
    } else {
        1
    }
}

fn cmd_analyze(net_arg: &str, out: &Path) -> u8 {
    let (net, abstraction) = match net_arg {
        "ens" => (build_ens(), ens_abstraction()),
        "enr" => (build_enr(), enr_abstraction()),
        path => {
            let text = match fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => return fail(2, format!("cannot read net {path}: {e}")),
            };
            match parse_net(&text) {
                // Net files carry no abstract effects, so only guard-free
                // nets can be analyzed from files.
                Ok(net) => (net, secmail_core::analysis::AbstractionSpec::trivial()),
                Err(e) => return fail(2, e),
            }
        }
    };

    let validation = net.validate();
    if !validation.ok() {
        for v in &validation.violations {
            eprintln!("secmail: net violation: {}", v.message);
        }
        return 2;
    }

    let graph = match build_marking_graph(&net, &abstraction) {
        Ok(g) => g,
        Err(e) => return fail(2, e),
    };
    let liveness = check_liveness(&graph, &net);
    let report = liveness.render(&graph);

    if let Err(code) = write_file(out, &report) {
        return code;
    }
    if let Err(code) = write_file(&out.with_extension("dot"), &graph.to_dot()) {
        return code;
    }
    print!("{report}");

    if liveness.deadlocks.is_empty() && liveness.terminal_unreachable_from.is_empty() {
        0
    } else {
        1
    }
}

fn cmd_report(audit: &Path, traces: &Path, out: &Path) -> u8 {
    // A run that never happened has an empty log.
    let audit_text = fs::read_to_string(audit).unwrap_or_default();
    let records = match parse_export(&audit_text) {
        Ok(r) => r,
        Err(e) => return fail(2, e),
    };

    if let Err(code) = validate_traces(traces) {
        return code;
    }

    let report = match generate_report(&records) {
        Ok(r) => r,
        Err(e) => return fail(2, e),
    };
    let rendered = report.render();
    if let Err(code) = write_file(out, &rendered) {
        return code;
    }
    print!("{rendered}");

    if report.anomalies.is_empty() {
        0
    } else {
        1
    }
}

/// Trace files must carry gapless event sequences from 0.
fn validate_traces(dir: &Path) -> Result<(), u8> {
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(_) => return Ok(()), // no traces to check
    };
    let mut paths: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "trace"))
        .collect();
    paths.sort();
    for path in paths {
        let text = fs::read_to_string(&path)
            .map_err(|e| fail(2, format!("cannot read {}: {e}", path.display())))?;
        let mut expected = 0u64;
        for line in text.lines() {
            let Some(rest) = line.strip_prefix("seq=") else {
                continue;
            };
            let seq: u64 = rest
                .split_whitespace()
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| fail(2, format!("malformed trace line in {}", path.display())))?;
            if seq != expected {
                return Err(fail(
                    2,
                    format!(
                        "corrupt trace {}: expected seq {expected}, found {seq}",
                        path.display()
                    ),
                ));
            }
            expected += 1;
        }
    }
    Ok(())
}
