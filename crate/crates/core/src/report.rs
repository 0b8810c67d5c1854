//! Runs a suite and renders its result table.

use std::fmt::Write as _;

use crate::config::{NamedExperiment, OutputFormat, SuiteConfig};
use crate::harness::{analytic_pe_for, run_experiment, ExperimentOutcome};

/// Result table columns, in output order.
pub const COLUMNS: [&str; 17] = [
    "name",
    "rho",
    "sigma1",
    "sigma2",
    "attack_type",
    "sigma_a",
    "AM",
    "UM",
    "M",
    "prior",
    "Pe_v",
    "Pe_phi",
    "CI_v",
    "CI_phi",
    "tau_v",
    "tau_phi",
    "analytic_Pe",
];

#[derive(Debug, Clone, PartialEq)]
pub enum RowOutcome {
    Done {
        outcome: ExperimentOutcome,
        analytic_pe: Option<f64>,
    },
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteRow {
    pub experiment: NamedExperiment,
    pub outcome: RowOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub seed: u64,
    pub rows: Vec<SuiteRow>,
}

impl SuiteResult {
    pub fn failed(&self) -> bool {
        self.rows
            .iter()
            .any(|r| matches!(r.outcome, RowOutcome::Failed(_)))
    }
}

/// Runs every experiment in order. A failing experiment is recorded and the
/// remaining ones still run.
pub fn run_suite(cfg: &SuiteConfig) -> SuiteResult {
    run_suite_with(cfg, |_| {})
}

/// Like [`run_suite`], calling `on_row` after each experiment finishes.
pub fn run_suite_with(cfg: &SuiteConfig, mut on_row: impl FnMut(&SuiteRow)) -> SuiteResult {
    let rows = cfg
        .experiments
        .iter()
        .map(|e| {
            let outcome = match e.params.to_experiment(&e.name, cfg.seed) {
                Err(err) => RowOutcome::Failed(err.to_string()),
                Ok(config) => match run_experiment(&config) {
                    Ok(outcome) => RowOutcome::Done {
                        outcome,
                        analytic_pe: analytic_pe_for(&config),
                    },
                    Err(err) => RowOutcome::Failed(err.to_string()),
                },
            };
            let row = SuiteRow {
                experiment: e.clone(),
                outcome,
            };
            on_row(&row);
            row
        })
        .collect();
    SuiteResult {
        seed: cfg.seed,
        rows,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn cells(row: &SuiteRow) -> Vec<String> {
    let p = &row.experiment.params;
    let mut out = vec![
        row.experiment.name.clone(),
        p.rho.to_string(),
        p.sigma1.to_string(),
        p.sigma2.to_string(),
        p.attack_type.to_string(),
        opt(p.sigma_a),
        p.am.to_string(),
        opt(p.um),
        p.trials.to_string(),
        p.attack_prior.to_string(),
    ];
    match &row.outcome {
        RowOutcome::Done {
            outcome,
            analytic_pe,
        } => {
            let (v, phi) = (&outcome.single_term, &outcome.shapley);
            out.extend([
                v.pe.to_string(),
                phi.pe.to_string(),
                v.ci_halfwidth.to_string(),
                phi.ci_halfwidth.to_string(),
                v.threshold.to_string(),
                phi.threshold.to_string(),
                opt(*analytic_pe),
            ]);
        }
        RowOutcome::Failed(_) => {
            out.push("FAILED".to_owned());
            out.extend(std::iter::repeat_n(
                String::new(),
                COLUMNS.len() - out.len(),
            ));
        }
    }
    out
}

fn header_lines(seed: u64, timestamp: Option<&str>) -> Vec<String> {
    let mut lines = vec![format!("seed = {seed}")];
    if let Some(ts) = timestamp {
        lines.push(format!("generated = {ts}"));
    }
    lines
}

/// `timestamp`, when given, is written as a header comment line; leaving it
/// out makes the output a pure function of the suite config.
pub fn render(result: &SuiteResult, format: OutputFormat, timestamp: Option<&str>) -> String {
    match format {
        OutputFormat::Csv => render_csv(result, timestamp),
        OutputFormat::Markdown => render_markdown(result, timestamp),
    }
}

pub fn render_csv(result: &SuiteResult, timestamp: Option<&str>) -> String {
    let mut s = String::new();
    for line in header_lines(result.seed, timestamp) {
        let _ = writeln!(s, "# {line}");
    }
    let _ = writeln!(s, "{}", COLUMNS.join(","));
    for row in &result.rows {
        let _ = writeln!(s, "{}", cells(row).join(","));
    }
    s
}

pub fn render_markdown(result: &SuiteResult, timestamp: Option<&str>) -> String {
    let mut s = String::new();
    for line in header_lines(result.seed, timestamp) {
        let _ = writeln!(s, "<!-- {line} -->");
    }
    let _ = writeln!(s, "| {} |", COLUMNS.join(" | "));
    let _ = writeln!(s, "|{}", "---|".repeat(COLUMNS.len()));
    for row in &result.rows {
        let _ = writeln!(s, "| {} |", cells(row).join(" | "));
    }
    for row in &result.rows {
        if let RowOutcome::Failed(msg) = &row.outcome {
            let _ = writeln!(s, "\n`{}` failed: {msg}", row.experiment.name);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{table1_preset, ExperimentParams};
    use crate::AttackKind;

    #[test]
    fn empty_suite_is_header_only() {
        let r = run_suite(&SuiteConfig::default());
        assert!(!r.failed());
        let csv = render_csv(&r, None);
        assert_eq!(csv, format!("# seed = 0\n{}\n", COLUMNS.join(",")));
    }

    #[test]
    fn failed_rows_are_marked() {
        let mut p = ExperimentParams::new(1.0, 1.0, AttackKind::A, 1.0);
        // Attacking sensor 2 only leaves sensor 1 with no attacked trials.
        p.targets = vec![2];
        p.trials = 50;
        let cfg = SuiteConfig {
            experiments: vec![NamedExperiment {
                name: "bad".into(),
                params: p,
            }],
            ..SuiteConfig::default()
        };
        let r = run_suite(&cfg);
        assert!(r.failed());
        let csv = render_csv(&r, None);
        let last = csv.lines().last().unwrap();
        assert!(last.starts_with("bad,0,1,1,A,,1,,50,0.5,FAILED"));
        assert_eq!(last.split(',').count(), COLUMNS.len());
        assert!(render_markdown(&r, None).contains("`bad` failed"));
    }

    #[test]
    fn table1_rows_have_equal_error_rates() {
        let r = run_suite(&table1_preset(2000, 5));
        assert_eq!(r.rows.len(), 12);
        for row in &r.rows {
            match &row.outcome {
                RowOutcome::Done { outcome, .. } => {
                    assert_eq!(
                        outcome.shapley.pe, outcome.single_term.pe,
                        "{}",
                        row.experiment.name
                    )
                }
                RowOutcome::Failed(e) => panic!("{e}"),
            }
        }
        let md = render_markdown(&r, Some("now"));
        assert!(md.starts_with("<!-- seed = 5 -->\n<!-- generated = now -->\n| name |"));
        assert_eq!(md.lines().count(), 2 + 2 + 12);
    }
}
