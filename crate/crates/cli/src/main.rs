use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use relay_aser_cli::{exit, render_csv, run_sweep, write_csv, Columns, RawConfig, SweepRow};

/// ASER sweeps for dual-hop AF MIMO relaying with transmit antenna selection.
///
/// Settings come from an optional `key = value` file; any flag given here
/// overrides the file. CSV goes to `--output` or standard output.
#[derive(Parser, Debug)]
#[command(name = "relay-aser", version)]
struct Args {
    /// Configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Suppress per-point progress on standard error.
    #[arg(long)]
    quiet: bool,
    /// hqam, rqam, sqam or xqam.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    order: Option<String>,
    /// In-phase levels (rqam).
    #[arg(long)]
    mi: Option<String>,
    /// Quadrature levels (rqam).
    #[arg(long)]
    mq: Option<String>,
    /// Quadrature to in-phase spacing ratio (rqam).
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    ns: Option<String>,
    #[arg(long)]
    nr: Option<String>,
    #[arg(long)]
    nd: Option<String>,
    /// Pathloss exponent.
    #[arg(long)]
    phi: Option<String>,
    /// Source-relay distance over source-destination distance.
    #[arg(long)]
    dsr_ratio: Option<String>,
    /// Relay-destination distance over source-destination distance.
    #[arg(long)]
    drd_ratio: Option<String>,
    #[arg(long)]
    snr_start_db: Option<String>,
    #[arg(long)]
    snr_stop_db: Option<String>,
    #[arg(long)]
    snr_step_db: Option<String>,
    /// Comma list from closed, quadrature, mc-semi, mc-symbol.
    #[arg(long)]
    evaluators: Option<String>,
    /// Fixed Monte Carlo trials per point (adaptive when omitted).
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    output: Option<String>,
}

impl Args {
    fn overrides(&self) -> Vec<(&'static str, &str)> {
        let pairs = [
            ("scheme", &self.scheme),
            ("order", &self.order),
            ("mi", &self.mi),
            ("mq", &self.mq),
            ("sigma", &self.sigma),
            ("ns", &self.ns),
            ("nr", &self.nr),
            ("nd", &self.nd),
            ("phi", &self.phi),
            ("dsr_ratio", &self.dsr_ratio),
            ("drd_ratio", &self.drd_ratio),
            ("snr_start_db", &self.snr_start_db),
            ("snr_stop_db", &self.snr_stop_db),
            ("snr_step_db", &self.snr_step_db),
            ("evaluators", &self.evaluators),
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("output", &self.output),
        ];
        pairs.into_iter().filter_map(|(k, v)| v.as_deref().map(|v| (k, v))).collect()
    }
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("relay-aser: {msg}");
    ExitCode::from(code)
}

fn progress_line(r: &SweepRow) -> String {
    let mut s = format!("{:>7.2} dB", r.snr_db);
    if let Some(v) = r.aser_closed {
        s += &format!("  closed {v:.6e}");
    }
    if let Some(v) = r.aser_quadrature {
        s += &format!("  quadrature {v:.6e}");
    }
    if let Some(m) = &r.mc {
        s += &format!("  mc {:.6e} ± {:.1e} ({} trials)", m.aser, m.std_err, m.trials);
    }
    s
}

fn main() -> ExitCode {
    let args = Args::parse();
    let text = match &args.config {
        Some(p) => match std::fs::read_to_string(p) {
            Ok(t) => t,
            Err(e) => return fail(exit::IO, format!("cannot read {}: {e}", p.display())),
        },
        None => String::new(),
    };
    let mut raw = match RawConfig::parse(&text) {
        Ok(r) => r,
        Err(e) => return fail(exit::VALIDATION, e),
    };
    for (k, v) in args.overrides() {
        if let Err(e) = raw.set_flag(k, v) {
            return fail(exit::VALIDATION, e);
        }
    }
    let spec = match raw.resolve() {
        Ok(s) => s,
        Err(e) => return fail(exit::VALIDATION, e),
    };

    let quiet = args.quiet;
    let outcome = match run_sweep(&spec, |r| {
        if !quiet {
            eprintln!("{}", progress_line(r));
        }
    }) {
        Ok(o) => o,
        Err(e) => return fail(exit::NUMERICAL, e),
    };

    let cols = Columns::for_spec(&spec);
    let written = match &spec.output {
        Some(path) => write_csv(cols, &outcome.rows, path),
        None => std::io::stdout().lock().write_all(render_csv(cols, &outcome.rows).as_bytes()),
    };
    if let Err(e) = written {
        return fail(exit::IO, e);
    }

    if outcome.failures.is_empty() {
        return ExitCode::from(exit::OK);
    }
    for f in &outcome.failures {
        eprintln!("relay-aser: {:?} failed at {} dB: {}", f.evaluator, f.snr_db, f.error);
    }
    ExitCode::from(exit::NUMERICAL)
}
