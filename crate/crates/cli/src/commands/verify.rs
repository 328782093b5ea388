use serde::Serialize;

use hkflow::verify::{run_suite, SuiteReport, VerifyError, VerifyOpts};

use crate::config::RunConfig;
use crate::output::{fmt_float, write_csv, write_json};
use crate::{CliError, Context};

#[derive(Serialize)]
struct SuiteSummary {
    suite: String,
    cases: usize,
    failed: usize,
    pass: bool,
}

#[derive(Serialize)]
struct Summary {
    pass: bool,
    seed: u64,
    suites: Vec<SuiteSummary>,
}

#[derive(Serialize)]
struct FailedCase {
    suite: String,
    id: String,
    note: String,
    fields: Vec<(String, f64)>,
}

fn write_suite_csv(ctx: &Context, report: &SuiteReport) -> Result<(), CliError> {
    // ordered union of field names across the suite's cases
    let mut columns: Vec<String> = Vec::new();
    for case in &report.cases {
        for (name, _) in &case.fields {
            if !columns.iter().any(|c| c == name) {
                columns.push(name.clone());
            }
        }
    }
    let mut header: Vec<&str> = vec!["id"];
    header.extend(columns.iter().map(|s| s.as_str()));
    header.push("pass");
    header.push("note");
    let rows = report.cases.iter().map(|case| {
        let mut row = vec![case.id.clone()];
        for col in &columns {
            match case.fields.iter().find(|(name, _)| name == col) {
                Some((_, v)) => row.push(fmt_float(*v)),
                None => row.push(String::new()),
            }
        }
        row.push((case.pass as u8).to_string());
        row.push(case.note.clone());
        row
    });
    write_csv(&ctx.out_dir.join(format!("{}/cases.csv", report.suite)), &header, rows)
}

pub fn run(config: &RunConfig, ctx: &Context) -> Result<(), CliError> {
    let suite = config.verify.as_ref().map(|v| v.suite.as_str()).unwrap_or("all");
    let opts = VerifyOpts { seed: ctx.seed.unwrap_or(42), jobs: ctx.jobs };
    ctx.note(&format!("verify: suite {suite:?} with seed {}", opts.seed));
    let reports = run_suite(suite, &opts).map_err(|e| match e {
        VerifyError::UnknownSuite(_) => CliError::Config(e.to_string()),
        VerifyError::Transport(te) => super::transport_error(te),
        VerifyError::Flow(fe) => super::flow_error(fe),
        VerifyError::Model(me) => super::model_error(me),
        other => CliError::Solver(other.to_string()),
    })?;

    let mut failed_cases = Vec::new();
    for report in &reports {
        if config.wants_format("csv") {
            write_suite_csv(ctx, report)?;
        }
        for case in report.cases.iter().filter(|c| !c.pass) {
            failed_cases.push(FailedCase {
                suite: report.suite.clone(),
                id: case.id.clone(),
                note: case.note.clone(),
                fields: case.fields.clone(),
            });
        }
    }

    let pass = reports.iter().all(|r| r.pass);
    if config.wants_format("csv") {
        let rows = reports.iter().map(|r| {
            vec![
                r.suite.clone(),
                r.cases.len().to_string(),
                r.cases.iter().filter(|c| !c.pass).count().to_string(),
                (r.pass as u8).to_string(),
            ]
        });
        write_csv(&ctx.out_dir.join("verdicts.csv"), &["suite", "cases", "failed", "pass"], rows)?;
    }
    if config.wants_format("json") {
        let summary = Summary {
            pass,
            seed: opts.seed,
            suites: reports
                .iter()
                .map(|r| SuiteSummary {
                    suite: r.suite.clone(),
                    cases: r.cases.len(),
                    failed: r.cases.iter().filter(|c| !c.pass).count(),
                    pass: r.pass,
                })
                .collect(),
        };
        write_json(&ctx.out_dir.join("summary.json"), &summary)?;
    }
    if !failed_cases.is_empty() {
        write_json(&ctx.out_dir.join("failed_cases.json"), &failed_cases)?;
    }

    if pass {
        Ok(())
    } else {
        Err(CliError::Property(format!(
            "{} failing case(s); see failed_cases.json",
            failed_cases.len()
        )))
    }
}
