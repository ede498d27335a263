//! Result persistence: the results CSV and plot-ready series files.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use crate::config::ProtocolKind;
use crate::grid::{CellResult, RunOutput};

/// Fixed column order of the results CSV.
pub const CSV_HEADER: &str = "protocol,regime,lambda,R,n,s,f_actual,trials,safe_rate,\
sr_over_all_trials,abstention_rate,mean_latency_units,feedback_accuracy,Z,pr_trace,mu_U,\
rho_U_hat,q_U_hat,bound";

fn fmt_f64(x: f64) -> String {
    format!("{x:.6}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Renders results into the fixed-schema CSV, one row per cell, rows in
/// run order. Formatting is fixed-precision so identical runs serialize
/// byte-identically.
pub fn results_csv(cells: &[CellResult]) -> String {
    let mut out = String::with_capacity(128 * (cells.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for c in cells {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            c.key.protocol.as_str(),
            c.key.regime.as_str(),
            c.key.lambda,
            c.rounds,
            c.key.n,
            c.s_declared,
            c.f_actual,
            c.trials,
            fmt_opt(c.safe_rate),
            fmt_f64(c.sr_over_all_trials),
            fmt_f64(c.abstention_rate),
            fmt_f64(c.mean_latency_units),
            fmt_opt(c.feedback_accuracy),
            fmt_f64(c.risk.z),
            fmt_f64(c.risk.pr_trace),
            fmt_f64(c.risk.mu_u),
            fmt_f64(c.risk.rho_u_hat),
            fmt_f64(c.risk.q_u_hat),
            fmt_f64(c.risk.bound),
        )
        .expect("writing to string cannot fail");
    }
    out
}

/// Reads a results CSV back into cell records (the `analyze` path).
pub fn parse_results_csv(text: &str) -> Result<Vec<CellResult>, crate::config::ConfigError> {
    use crate::config::ConfigError;
    use crate::grid::CellKey;
    use rcs_core::analysis::RiskReport;

    let invalid = |msg: String| ConfigError::Invalid(msg);
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| invalid("empty file".into()))?;
    if header != CSV_HEADER {
        return Err(invalid("unrecognized results header".into()));
    }
    let parse_f = |field: &str, name: &str| -> Result<f64, ConfigError> {
        field
            .parse::<f64>()
            .map_err(|_| invalid(format!("bad {name} value {field:?}")))
    };
    let parse_opt = |field: &str, name: &str| -> Result<Option<f64>, ConfigError> {
        if field.is_empty() {
            Ok(None)
        } else {
            parse_f(field, name).map(Some)
        }
    };
    let mut cells = Vec::new();
    for (idx, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != CSV_HEADER.split(',').count() {
            return Err(invalid(format!("row {} has wrong arity", idx + 2)));
        }
        let protocol = ProtocolKind::parse(fields[0])?;
        let regime = crate::config::parse_regime(fields[1])?;
        let parse_u = |field: &str, name: &str| -> Result<u64, ConfigError> {
            field
                .parse::<u64>()
                .map_err(|_| invalid(format!("bad {name} value {field:?}")))
        };
        cells.push(CellResult {
            key: CellKey {
                protocol,
                regime,
                lambda: parse_u(fields[2], "lambda")?,
                n: parse_u(fields[4], "n")? as usize,
            },
            rounds: parse_u(fields[3], "R")? as usize,
            s_declared: parse_u(fields[5], "s")? as usize,
            f_actual: parse_u(fields[6], "f_actual")? as usize,
            trials: parse_u(fields[7], "trials")? as usize,
            safe_rate: parse_opt(fields[8], "safe_rate")?,
            sr_over_all_trials: parse_f(fields[9], "sr_over_all_trials")?,
            abstention_rate: parse_f(fields[10], "abstention_rate")?,
            mean_latency_units: parse_f(fields[11], "mean_latency_units")?,
            feedback_accuracy: parse_opt(fields[12], "feedback_accuracy")?,
            risk: RiskReport {
                z: parse_f(fields[13], "Z")?,
                pr_trace: parse_f(fields[14], "pr_trace")?,
                mu_u: parse_f(fields[15], "mu_U")?,
                mu_u_order_stat: 0.0, // not serialized
                rho_u_hat: parse_f(fields[16], "rho_U_hat")?,
                q_u_hat: parse_f(fields[17], "q_U_hat")?,
                bound: parse_f(fields[18], "bound")?,
                n_bound: 0.0, // not serialized
            },
        });
    }
    Ok(cells)
}

/// Header of the per-cell feedback audit logs.
pub const FEEDBACK_LOG_HEADER: &str =
    "timestamp,task,y,phi_max,phi_min,provenance,self_entangled";

/// Append-only delivery log of one feedback cell in CSV form.
pub fn feedback_log_csv(records: &[rcs_core::feedback::FeedbackRecord]) -> String {
    let mut out = String::from(FEEDBACK_LOG_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.timestamp, r.task.0, r.y, r.phi_max, r.phi_min, r.provenance, r.self_entangled
        )
        .expect("writing to string cannot fail");
    }
    out
}

pub fn write_csv(output: &RunOutput, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("results.csv"), results_csv(&output.cells))?;
    if !output.failures.is_empty() {
        let mut text = String::from("protocol,regime,lambda,n,error\n");
        for f in &output.failures {
            writeln!(
                text,
                "{},{},{},{},{}",
                f.key.protocol.as_str(),
                f.key.regime.as_str(),
                f.key.lambda,
                f.key.n,
                f.error.replace(',', ";")
            )
            .expect("writing to string cannot fail");
        }
        fs::write(dir.join("failures.csv"), text)?;
    }
    if !output.feedback_logs.is_empty() {
        let log_dir = dir.join("feedback");
        fs::create_dir_all(&log_dir)?;
        for (key, records) in &output.feedback_logs {
            let name = format!(
                "{}_{}_l{}_n{}.csv",
                key.protocol.as_str().to_ascii_lowercase(),
                key.regime.as_str(),
                key.lambda,
                key.n
            );
            fs::write(log_dir.join(name), feedback_log_csv(records))?;
        }
    }
    Ok(())
}

/// Writes one series file per `(metric, regime, n, protocol)`: lambda
/// ascending in the first column, the metric in the second. Returns the
/// number of files written.
pub fn write_plotdata(output: &RunOutput, dir: &Path) -> io::Result<usize> {
    let plot_dir = dir.join("plotdata");
    fs::create_dir_all(&plot_dir)?;
    let cells = &output.cells;

    let mut regimes = Vec::new();
    let mut ns = Vec::new();
    let mut protocols: Vec<ProtocolKind> = Vec::new();
    for c in cells {
        if !regimes.contains(&c.key.regime) {
            regimes.push(c.key.regime);
        }
        if !ns.contains(&c.key.n) {
            ns.push(c.key.n);
        }
        if !protocols.contains(&c.key.protocol) {
            protocols.push(c.key.protocol);
        }
    }
    ns.sort_unstable();

    type Metric = (&'static str, fn(&CellResult) -> Option<f64>);
    let metrics: [Metric; 4] = [
        ("sr", |c| Some(c.sr_over_all_trials)),
        ("ar", |c| Some(c.abstention_rate)),
        ("latency", |c| Some(c.mean_latency_units)),
        ("feedback_acc", |c| c.feedback_accuracy),
    ];

    let mut written = 0;
    for (metric, get) in metrics {
        for regime in &regimes {
            for n in &ns {
                for protocol in &protocols {
                    let mut series: Vec<(u64, f64)> = cells
                        .iter()
                        .filter(|c| {
                            c.key.regime == *regime
                                && c.key.n == *n
                                && c.key.protocol == *protocol
                        })
                        .filter_map(|c| get(c).map(|v| (c.key.lambda, v)))
                        .collect();
                    if series.is_empty() {
                        continue;
                    }
                    series.sort_unstable_by_key(|(lambda, _)| *lambda);
                    let mut text = format!("# lambda {metric}\n");
                    for (lambda, value) in series {
                        writeln!(text, "{lambda} {}", fmt_f64(value))
                            .expect("writing to string cannot fail");
                    }
                    let name = format!(
                        "{metric}_{}_n{}_{}.dat",
                        regime.as_str(),
                        n,
                        protocol.as_str().to_ascii_lowercase()
                    );
                    fs::write(plot_dir.join(name), text)?;
                    written += 1;
                }
            }
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rcs_core::adversary::Regime;
    use rcs_core::analysis::RiskReport;
    use crate::grid::CellKey;

    fn sample_cell() -> CellResult {
        CellResult {
            key: CellKey {
                protocol: ProtocolKind::Rcs,
                regime: Regime::Collusion,
                lambda: 2,
                n: 5,
            },
            rounds: 3,
            s_declared: 3,
            f_actual: 2,
            trials: 100,
            safe_rate: Some(0.9),
            sr_over_all_trials: 0.9,
            abstention_rate: 0.0,
            mean_latency_units: 2.5,
            feedback_accuracy: None,
            risk: RiskReport {
                z: 0.05,
                pr_trace: 0.857375,
                mu_u: 0.005,
                mu_u_order_stat: 0.004,
                rho_u_hat: 0.125,
                q_u_hat: 0.01,
                bound: 0.1221719,
                n_bound: 0.882375,
            },
        }
    }

    #[test]
    fn empty_results_emit_header_only() {
        assert_eq!(results_csv(&[]), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn one_cell_emits_one_row_matching_the_header() {
        let text = results_csv(&[sample_cell()]);
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert_eq!(header, CSV_HEADER);
        let row = lines.next().unwrap();
        assert_eq!(lines.next(), None);
        assert_eq!(
            row.split(',').count(),
            header.split(',').count(),
            "row arity matches header"
        );
        assert_eq!(
            row,
            "RCS,collusion,2,3,5,3,2,100,0.900000,0.900000,0.000000,2.500000,,0.050000,\
0.857375,0.005000,0.125000,0.010000,0.122172"
        );
    }

    #[test]
    fn feedback_log_serializes_in_timestamp_order() {
        use rcs_core::feedback::{FeedbackRecord, TaskClass};
        let records = vec![
            FeedbackRecord {
                phi_max: 2,
                phi_min: 0,
                task: TaskClass::new("cell-0-ep-0"),
                y: 2,
                provenance: 2,
                self_entangled: true,
                timestamp: 0,
            },
            FeedbackRecord {
                phi_max: 1,
                phi_min: 2,
                task: TaskClass::new("cell-0-ep-0"),
                y: 0,
                provenance: 0,
                self_entangled: false,
                timestamp: 1,
            },
        ];
        let text = feedback_log_csv(&records);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], FEEDBACK_LOG_HEADER);
        assert_eq!(lines[1], "0,cell-0-ep-0,2,2,0,2,true");
        assert_eq!(lines[2], "1,cell-0-ep-0,0,1,2,0,false");
    }

    #[test]
    fn csv_roundtrips_through_the_parser() {
        let cells = vec![sample_cell()];
        let text = results_csv(&cells);
        let parsed = parse_results_csv(&text).unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0].key, cells[0].key);
        assert_eq!(parsed[0].safe_rate, cells[0].safe_rate);
        assert_eq!(parsed[0].feedback_accuracy, None);
        assert!((parsed[0].risk.z - cells[0].risk.z).abs() < 1e-9);
    }

    #[test]
    fn plotdata_writes_one_series_per_protocol() {
        let dir = tempfile::tempdir().unwrap();
        let mut cs = sample_cell();
        cs.key.protocol = ProtocolKind::Cs;
        let mut c4 = sample_cell();
        c4.key.lambda = 4;
        let output = RunOutput {
            cells: vec![sample_cell(), c4, cs],
            failures: vec![],
            feedback_logs: vec![],
        };
        let written = write_plotdata(&output, dir.path()).unwrap();
        // Two protocols x three metrics with values (feedback_acc absent).
        assert_eq!(written, 6);
        let rcs_sr = dir.path().join("plotdata/sr_collusion_n5_rcs.dat");
        let text = std::fs::read_to_string(rcs_sr).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# lambda sr");
        assert_eq!(lines[1], "2 0.900000");
        assert_eq!(lines[2], "4 0.900000");
    }
}
