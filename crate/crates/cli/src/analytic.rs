//! `analytic`: closed-form transfer-model datasets, no simulation involved.

use crate::{io_error, Cli, CliError, ModeArg};
use echo_core::leakage::{
    figure3_dataset, long_t_eta4_diagnostic, write_fig3_csv, write_long_t_diagnostic_csv,
    write_table1_csv, Fig3Mode, LeakageError, PredicateSummary,
};
use std::fs;

fn map_leakage(e: LeakageError) -> CliError {
    CliError::Config(e.to_string())
}

pub fn table1(cli: &Cli, max_m: u32) -> Result<(), CliError> {
    let csv = write_table1_csv(max_m).map_err(map_leakage)?;
    fs::create_dir_all(&cli.output).map_err(io_error("creating output directory"))?;
    fs::write(cli.output.join("table1.csv"), &csv).map_err(io_error("writing dataset"))?;
    println!(
        "wrote {} ({} entries)",
        cli.output.join("table1.csv").display(),
        csv.lines().count() - 1
    );
    Ok(())
}

/// `start:end:step` inclusive, or a single value.
fn parse_eta_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = |msg: &str| CliError::Config(format!("eta grid {spec:?}: {msg}"));
    let parse = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|e| bad(&format!("{s:?} is not a number ({e})")))
    };
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.len() {
        1 => Ok(vec![parse(parts[0])?]),
        3 => {
            let (start, end, step) = (parse(parts[0])?, parse(parts[1])?, parse(parts[2])?);
            if !(step > 0.0) || end < start {
                return Err(bad("need start <= end and step > 0"));
            }
            let count = ((end - start) / step + 1e-9).floor() as usize;
            let values = (0..=count)
                .map(|k| {
                    let v = start + k as f64 * step;
                    // Accumulated rounding must not push the last point
                    // past the requested end.
                    if v > end {
                        end
                    } else {
                        v
                    }
                })
                .collect();
            Ok(values)
        }
        _ => Err(bad("expected start:end:step or a single value")),
    }
}

pub fn fig3(cli: &Cli, b1: u32, b2: &[u32], eta_spec: &str, mode: ModeArg) -> Result<(), CliError> {
    let etas = parse_eta_grid(eta_spec)?;
    let modes: Vec<(Fig3Mode, &str)> = match mode {
        ModeArg::All => vec![
            (Fig3Mode::Total, "fig3_total.csv"),
            (Fig3Mode::Effective, "fig3_effective.csv"),
            (Fig3Mode::EffectiveNoZeroth, "fig3_effective_no_zeroth.csv"),
        ],
        ModeArg::Total => vec![(Fig3Mode::Total, "fig3_total.csv")],
        ModeArg::Effective => vec![(Fig3Mode::Effective, "fig3_effective.csv")],
        ModeArg::EffectiveNoZeroth => {
            vec![(Fig3Mode::EffectiveNoZeroth, "fig3_effective_no_zeroth.csv")]
        }
    };
    fs::create_dir_all(&cli.output).map_err(io_error("creating output directory"))?;
    for (m, name) in &modes {
        let dataset = figure3_dataset(b1, b2, &etas, *m).map_err(map_leakage)?;
        fs::write(cli.output.join(name), write_fig3_csv(&dataset))
            .map_err(io_error("writing dataset"))?;
        println!(
            "wrote {} ({} points x {} curves)",
            cli.output.join(name).display(),
            etas.len(),
            b2.len()
        );
    }
    // The eta^4 cross-check only exists for areas with at least 3 pi in B2.
    let diagnosable: Vec<u32> = b2.iter().copied().filter(|&k| k >= 3).collect();
    let rows = long_t_eta4_diagnostic(&diagnosable).map_err(map_leakage)?;
    fs::write(
        cli.output.join("long_t_diagnostic.csv"),
        write_long_t_diagnostic_csv(&rows),
    )
    .map_err(io_error("writing dataset"))?;
    println!(
        "wrote {} ({} rows)",
        cli.output.join("long_t_diagnostic.csv").display(),
        rows.len()
    );
    Ok(())
}

pub fn predicate(cli: &Cli, b1: u32, b2: u32) -> Result<(), CliError> {
    let summary = PredicateSummary::evaluate(b1, b2).map_err(map_leakage)?;
    let json = summary.to_json_string();
    fs::create_dir_all(&cli.output).map_err(io_error("creating output directory"))?;
    fs::write(cli.output.join("predicate.json"), &json).map_err(io_error("writing dataset"))?;
    print!("{json}");
    Ok(())
}
