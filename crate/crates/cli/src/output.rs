//! JSON and CSV emission with atomic temp-and-rename writes.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;

use crate::record::{FrontierRow, Outcome, ResultRecord};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Writes `bytes` to a temporary file next to `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Frontier rows sorted by `ε` ascending, ties broken by `μ`; the sort is stable.
pub fn sorted_frontier(points: &[FrontierRow]) -> Vec<FrontierRow> {
    let mut rows = points.to_vec();
    rows.sort_by(|a, b| a.eps.0.total_cmp(&b.eps.0).then(a.mu.0.total_cmp(&b.mu.0)));
    rows
}

/// Writes frontier points with columns `w1, w2, mu, eps, objective, controller_ref`.
pub fn emit_frontier(points: &[FrontierRow], path: &Path, format: Format) -> Result<()> {
    let rows = sorted_frontier(points);
    let bytes = match format {
        Format::Json => json_bytes(&rows)?,
        Format::Csv => frontier_csv(&rows)?,
    };
    write_atomic(path, &bytes)
}

fn json_bytes<T: serde::Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn frontier_csv(rows: &[FrontierRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["w1", "w2", "mu", "eps", "objective", "controller_ref"])?;
    for r in rows {
        let controller = match &r.controller {
            Some(c) => serde_json::to_string(c)?,
            None => String::new(),
        };
        w.write_record([
            r.w1.to_string(),
            r.w2.to_string(),
            r.mu.to_string(),
            r.eps.to_string(),
            r.objective.to_string(),
            controller,
        ])?;
    }
    Ok(w.into_inner()?)
}

/// Serializes a record; CSV emits the tabular part of the outcome.
pub fn render(record: &ResultRecord, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Json => json_bytes(record),
        Format::Csv => record_csv(record),
    }
}

fn record_csv(record: &ResultRecord) -> Result<Vec<u8>> {
    let status = serde_json::to_value(record.status)?
        .as_str()
        .unwrap_or_default()
        .to_string();
    let mut w = csv::Writer::from_writer(Vec::new());
    match &record.result {
        Outcome::Frontier { points } => return frontier_csv(&sorted_frontier(points)),
        Outcome::Rollout { trajectories, .. } => {
            let (n, m) = trajectories.first().map_or((0, 0), |t| {
                (t.states[0].len(), t.inputs.first().map_or(0, Vec::len))
            });
            let mut header = vec!["trajectory".to_string(), "step".to_string()];
            header.extend((0..n).map(|i| format!("x{i}")));
            header.extend((0..m).map(|j| format!("u{j}")));
            w.write_record(&header)?;
            for t in trajectories {
                for (k, x) in t.states.iter().enumerate() {
                    let mut row = vec![t.label.clone(), k.to_string()];
                    row.extend(x.iter().map(f64::to_string));
                    match t.inputs.get(k) {
                        Some(u) => row.extend(u.iter().map(f64::to_string)),
                        None => row.extend(std::iter::repeat_n(String::new(), m)),
                    }
                    w.write_record(&row)?;
                }
            }
        }
        Outcome::Metric(r) => {
            w.write_record([
                "status",
                "metric",
                "loop",
                "value",
                "companion",
                "certified",
            ])?;
            let certified = r
                .certificate
                .as_ref()
                .map_or(String::new(), |c| c.satisfied.to_string());
            w.write_record([
                status,
                r.metric.clone(),
                r.loop_kind.clone(),
                r.value.to_string(),
                r.companion.to_string(),
                certified,
            ])?;
        }
        Outcome::Scenario(r) => {
            w.write_record([
                "status",
                "mu",
                "eps",
                "objective",
                "samples",
                "support",
                "beta",
                "bound",
                "empirical_violation",
            ])?;
            let opt = |v: Option<String>| v.unwrap_or_default();
            w.write_record([
                status,
                r.mu.to_string(),
                opt(r.eps.map(|e| e.to_string())),
                r.objective.to_string(),
                r.samples.to_string(),
                opt(r.support.map(|s| s.to_string())),
                opt(r.beta.map(|b| b.to_string())),
                opt(r.bound.map(|b| b.to_string())),
                opt(r.empirical_violation.as_ref().map(|e| e.rate.to_string())),
            ])?;
        }
        Outcome::RiskBound { k, m, beta, bound } => {
            w.write_record(["k", "m", "beta", "bound"])?;
            w.write_record([
                k.to_string(),
                m.to_string(),
                beta.to_string(),
                bound.to_string(),
            ])?;
        }
        Outcome::Certify(r) => {
            w.write_record(["status", "mu", "eps", "exact", "worst_margin", "vertices"])?;
            w.write_record([
                status,
                r.mu.to_string(),
                r.eps.map_or(String::new(), |e| e.to_string()),
                r.exact.to_string(),
                r.certificate.worst_margin.to_string(),
                r.certificate.vertices.to_string(),
            ])?;
        }
    }
    Ok(w.into_inner()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::{Num, RecordStatus};

    #[test]
    fn atomic_write_replaces_existing_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.json");
        write_atomic(&path, b"first").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"second");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn risk_bound_csv_has_header_and_row() {
        let rec = ResultRecord::new(
            "risk-bound",
            RecordStatus::Feasible,
            None,
            Outcome::RiskBound {
                k: 4,
                m: 10,
                beta: 0.01,
                bound: 0.85,
            },
        );
        let text = String::from_utf8(render(&rec, Format::Csv).unwrap()).unwrap();
        assert_eq!(text, "k,m,beta,bound\n4,10,0.01,0.85\n");
        let json = String::from_utf8(render(&rec, Format::Json).unwrap()).unwrap();
        assert!(json.ends_with("}\n"));
    }

    #[test]
    fn frontier_sort_breaks_ties_by_mu() {
        let row = |mu, eps| FrontierRow {
            w1: 1.0,
            w2: 1.0,
            mu: Num(mu),
            eps: Num(eps),
            objective: Num(0.0),
            controller: None,
        };
        let sorted = sorted_frontier(&[row(0.3, 1.0), row(0.2, 1.0), row(0.9, 0.1)]);
        let got: Vec<(f64, f64)> = sorted.iter().map(|r| (r.mu.0, r.eps.0)).collect();
        assert_eq!(got, [(0.9, 0.1), (0.2, 1.0), (0.3, 1.0)]);
    }
}
