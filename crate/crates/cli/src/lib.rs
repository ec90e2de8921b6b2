//! Subcommands behind the `dogwalk` binary. Each returns a process exit code:
//! 0 success, 1 an expected outcome was missed, 2 bad input, 3 I/O failure.

use std::fs;
use std::path::Path;

use rayon::prelude::*;

use dogwalk_core::config::{self, Override};
use dogwalk_core::plot::render_svg;
use dogwalk_core::trace::{self, RunMeta};
use dogwalk_core::{builtin, metrics, run, BuiltinName, Mode, ScenarioDef, SimOutcome};

pub const EXIT_OK: u8 = 0;
pub const EXIT_MISMATCH: u8 = 1;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_IO: u8 = 3;

pub const SUMMARY_FILE: &str = "summary.csv";

const SUMMARY_COLUMNS: [&str; 17] = [
    "schema_version",
    "name",
    "mode",
    "status",
    "expected",
    "expectation_met",
    "final_time_s",
    "steps",
    "time_to_target_s",
    "min_obstacle_clearance_m",
    "min_abs_wall_distance_m",
    "formation_in_view_fraction",
    "lambda_flips",
    "yank_count",
    "weighting_activations",
    "asv_path_length_m",
    "auv_path_length_m",
];

fn fail(code: u8, msg: impl std::fmt::Display) -> u8 {
    eprintln!("error: {msg}");
    code
}

fn summary_row(meta: &RunMeta) -> Vec<String> {
    let m = &meta.metrics;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
    vec![
        trace::SCHEMA_VERSION.to_string(),
        meta.scenario.name.clone(),
        meta.scenario.mode.as_str().to_owned(),
        meta.status.as_str().to_owned(),
        meta.scenario
            .expected
            .map_or_else(String::new, |e| e.as_str().to_owned()),
        meta.expectation_met
            .map_or_else(String::new, |b| b.to_string()),
        meta.final_time_s.to_string(),
        meta.steps.to_string(),
        opt(m.time_to_target_s),
        m.min_obstacle_clearance_m.to_string(),
        m.min_abs_wall_distance_m.to_string(),
        m.formation_in_view_fraction.to_string(),
        m.lambda_flips.to_string(),
        m.yank_count.to_string(),
        m.weighting_activations.to_string(),
        m.asv_path_length_m.to_string(),
        m.auv_path_length_m.to_string(),
    ]
}

fn write_run(out: &Path, def: &ScenarioDef, outcome: &SimOutcome) -> std::io::Result<RunMeta> {
    let stem = config::file_stem(&def.name);
    let csv_path = out.join(format!("{stem}.csv"));
    let file = fs::File::create(&csv_path)?;
    trace::write_csv(std::io::BufWriter::new(file), &outcome.trace)
        .map_err(|e| std::io::Error::other(e.to_string()))?;
    let meta = RunMeta::new(def, outcome, metrics(outcome, def));
    fs::write(trace::meta_path(&csv_path), meta.to_json())?;
    Ok(meta)
}

/// Runs every scenario in the config (sweeps expanded) and writes a trace,
/// a sidecar per run and a suite summary into `out`.
pub fn cmd_run(config_path: &Path, overrides: &[String], out: &Path) -> u8 {
    let text = match fs::read_to_string(config_path) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_IO, format!("{}: {e}", config_path.display())),
    };
    let overrides: Result<Vec<_>, _> = overrides.iter().map(|s| Override::parse(s)).collect();
    let defs = match overrides.and_then(|o| config::load(&text, &o)) {
        Ok(d) => d,
        Err(e) => return fail(EXIT_INVALID, format!("{}: {e}", config_path.display())),
    };
    if let Err(e) = fs::create_dir_all(out) {
        return fail(EXIT_IO, format!("{}: {e}", out.display()));
    }
    let results: Vec<Result<RunMeta, (u8, String)>> = defs
        .par_iter()
        .map(|def| {
            let outcome = run(def).map_err(|e| (EXIT_INVALID, format!("{}: {e}", def.name)))?;
            write_run(out, def, &outcome).map_err(|e| (EXIT_IO, format!("{}: {e}", def.name)))
        })
        .collect();
    let mut metas = Vec::with_capacity(results.len());
    let mut worst = EXIT_OK;
    for r in results {
        match r {
            Ok(m) => metas.push(m),
            Err((code, msg)) => {
                // Bad input outranks I/O trouble.
                worst = if worst == EXIT_INVALID { worst } else { code };
                eprintln!("error: {msg}");
            }
        }
    }
    if worst != EXIT_OK {
        return worst;
    }
    let summary = (|| -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_path(out.join(SUMMARY_FILE))?;
        w.write_record(SUMMARY_COLUMNS)?;
        for m in &metas {
            w.write_record(summary_row(m))?;
        }
        w.flush()?;
        Ok(())
    })();
    if let Err(e) = summary {
        return fail(EXIT_IO, format!("{SUMMARY_FILE}: {e}"));
    }
    let mut code = EXIT_OK;
    for m in &metas {
        println!(
            "{:<40} {:<16} {}",
            m.scenario.name,
            m.status.as_str(),
            match m.expectation_met {
                Some(true) => "ok",
                Some(false) => "MISMATCH",
                None => "-",
            }
        );
        if m.expectation_met == Some(false) {
            code = EXIT_MISMATCH;
        }
    }
    code
}

/// Renders a trace (and the scenario in its sidecar) as SVG.
pub fn cmd_plot(trace_path: &Path, out: &Path) -> u8 {
    let records = match fs::File::open(trace_path)
        .map_err(|e| e.to_string())
        .and_then(|f| trace::read_csv(std::io::BufReader::new(f)).map_err(|e| e.to_string()))
    {
        Ok(r) => r,
        Err(e) => return fail(EXIT_INVALID, format!("{}: {e}", trace_path.display())),
    };
    let meta_path = trace::meta_path(trace_path);
    let meta = match fs::read_to_string(&meta_path)
        .map_err(|e| e.to_string())
        .and_then(|s| RunMeta::from_json(&s).map_err(|e| e.to_string()))
    {
        Ok(m) => m,
        Err(e) => return fail(EXIT_INVALID, format!("{}: {e}", meta_path.display())),
    };
    match fs::write(out, render_svg(&meta.scenario.world, &records)) {
        Ok(()) => EXIT_OK,
        Err(e) => fail(EXIT_IO, format!("{}: {e}", out.display())),
    }
}

pub fn parse_mode(s: &str) -> Option<Mode> {
    [Mode::Baseline, Mode::DogWalking]
        .into_iter()
        .find(|m| m.as_str() == s)
}

/// Writes a builtin scenario as an editable config file.
pub fn cmd_dump_builtin(name: &str, mode: Mode, out: &Path) -> u8 {
    let name: BuiltinName = match name.parse() {
        Ok(n) => n,
        Err(e) => return fail(EXIT_INVALID, e),
    };
    let text = match config::dump(&builtin(name, mode)) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_INVALID, e),
    };
    match fs::write(out, text) {
        Ok(()) => EXIT_OK,
        Err(e) => fail(EXIT_IO, format!("{}: {e}", out.display())),
    }
}
