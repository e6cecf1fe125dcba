use std::path::PathBuf;
use std::process::ExitCode;

use arpair::pipeline::{emit, run_on_map, sample_csv, write_atomic, Report, RunConfig};
use clap::{Args, Parser, Subcommand};

/// Leveled A-R pair decomposition and Lyapunov function of an interval map.
#[derive(Parser)]
#[command(name = "arpair", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write the JSON report.
    Analyze(Opts),
    /// Run the verification suites and print one line per suite.
    Verify(Opts),
    /// Write only the Lyapunov sample CSV.
    Sample(Opts),
}

#[derive(Args)]
struct Opts {
    /// Map definition (JSON).
    #[arg(long)]
    map: PathBuf,
    /// Boxes in the working cover; a power of two.
    #[arg(long, default_value_t = 256)]
    boxes: usize,
    /// Cap on the number of levels.
    #[arg(long, default_value_t = 8)]
    depth: usize,
    /// Bound on the return times searched for a renormalization.
    #[arg(long, default_value_t = 64)]
    max_return: usize,
    /// Iterates in the supremum defining h.
    #[arg(long, default_value_t = 200)]
    sup_horizon: usize,
    /// Terms of the series defining V.
    #[arg(long, default_value_t = 40)]
    series_horizon: usize,
    /// Random samples per suite and CSV grid cells.
    #[arg(long, default_value_t = 500)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON report path; stdout when omitted (analyze).
    #[arg(long)]
    report: Option<PathBuf>,
    /// CSV sample dump path; stdout when omitted (sample).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Transition graph edge list.
    #[arg(long)]
    graph_dump: Option<PathBuf>,
}

impl Opts {
    fn config(&self) -> RunConfig {
        RunConfig {
            n_boxes: self.boxes,
            max_depth: self.depth,
            max_return: self.max_return,
            sup_horizon: self.sup_horizon,
            series_horizon: self.series_horizon,
            samples: self.samples,
            seed: self.seed,
            report: self.report.clone(),
            csv: self.csv.clone(),
            graph_dump: self.graph_dump.clone(),
            ..RunConfig::new(&self.map)
        }
    }
}

fn print_suites(report: &Report) {
    for s in &report.suites {
        let status = match (s.passed, s.applicable) {
            (true, true) => "PASS",
            (true, false) => "N/A ",
            (false, _) => "FAIL",
        };
        println!("{status} {:<26} {}", s.name, s.detail);
    }
    for e in &report.errors {
        println!("ERROR {e}");
    }
    println!(
        "{}: {} passed, {} failed",
        report.summary.classification, report.summary.suites_passed, report.summary.suites_failed
    );
}

fn run(cli: Cli) -> arpair::Result<bool> {
    let (opts, mode) = match &cli.command {
        Command::Analyze(o) => (o, 0),
        Command::Verify(o) => (o, 1),
        Command::Sample(o) => (o, 2),
    };
    let cfg = opts.config();
    cfg.validate()?;
    let f = cfg.load_map()?;
    match mode {
        2 => {
            let csv = sample_csv(&f, &cfg)?;
            match &cfg.csv {
                Some(p) => write_atomic(&[(p, &csv)])?,
                None => print!("{csv}"),
            }
            Ok(true)
        }
        1 => {
            let report = run_on_map(&f, &cfg);
            if let Some(p) = &cfg.report {
                write_atomic(&[(p, &report.to_json())])?;
            }
            print_suites(&report);
            Ok(report.all_passed())
        }
        _ => {
            let report = run_on_map(&f, &cfg);
            emit(&report, &f, &cfg)?;
            if cfg.report.is_none() {
                print!("{}", report.to_json());
            } else {
                print_suites(&report);
            }
            Ok(report.all_passed())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(name: &str) -> String {
        format!("{}/../../maps/{name}", env!("CARGO_MANIFEST_DIR"))
    }

    fn parse(args: &[&str]) -> Result<Cli, clap::Error> {
        Cli::try_parse_from(std::iter::once("arpair").chain(args.iter().copied()))
    }

    #[test]
    fn defaults_match_run_config() {
        let cli = parse(&["analyze", "--map", "m.json"]).unwrap();
        let Command::Analyze(opts) = cli.command else {
            panic!("wrong subcommand");
        };
        let cfg = opts.config();
        let base = RunConfig::new("m.json");
        assert_eq!(cfg.n_boxes, base.n_boxes);
        assert_eq!(cfg.max_depth, base.max_depth);
        assert_eq!(cfg.max_return, base.max_return);
        assert_eq!(cfg.sup_horizon, base.sup_horizon);
        assert_eq!(cfg.series_horizon, base.series_horizon);
        assert_eq!(cfg.samples, base.samples);
        assert_eq!(cfg.seed, 0);
        assert!(cfg.report.is_none() && cfg.csv.is_none() && cfg.graph_dump.is_none());
    }

    #[test]
    fn map_is_required() {
        assert!(parse(&["verify"]).is_err());
        assert!(parse(&["frobnicate", "--map", "m.json"]).is_err());
    }

    #[test]
    fn bad_box_count_is_an_error() {
        let cli = parse(&["verify", "--map", &map("square.json"), "--boxes", "100"]).unwrap();
        assert!(run(cli).is_err());
    }

    #[test]
    fn missing_map_file_is_an_error() {
        let cli = parse(&["analyze", "--map", "/nonexistent/map.json"]).unwrap();
        assert!(run(cli).is_err());
    }

    #[test]
    fn analyze_writes_report_and_csv() {
        let dir = tempfile::tempdir().unwrap();
        let report = dir.path().join("r.json");
        let csv = dir.path().join("s.csv");
        let cli = parse(&[
            "analyze",
            "--map",
            &map("square.json"),
            "--samples",
            "50",
            "--report",
            report.to_str().unwrap(),
            "--csv",
            csv.to_str().unwrap(),
        ])
        .unwrap();
        assert!(run(cli).unwrap());
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
        assert_eq!(json["summary"]["level_count"], 1);
        let text = std::fs::read_to_string(&csv).unwrap();
        assert_eq!(text.lines().count(), 52);
    }

    #[test]
    fn sample_writes_csv_only() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("s.csv");
        let cli = parse(&[
            "sample",
            "--map",
            &map("doubling.json"),
            "--samples",
            "10",
            "--csv",
            csv.to_str().unwrap(),
        ])
        .unwrap();
        assert!(run(cli).unwrap());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        assert!(std::fs::read_to_string(&csv).unwrap().starts_with("x,"));
    }
}
