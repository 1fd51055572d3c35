//! Summaries of a finished run directory.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::conley::{Homology, HomologyGroup};
use crate::invariants::InvariantReport;

use super::pipeline::{ConleyReport, PARTIAL_MARKER, RUN_FILES};
use super::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

/// One homology group of one level, as stored in the CSV table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomologyRecord {
    pub level: usize,
    /// `relative` or `fixed`.
    pub kind: String,
    pub degree: usize,
    pub rank: usize,
    /// Torsion coefficients separated by spaces.
    pub torsion: String,
}

/// Inverse of [`crate::cli::pipeline::homology_table`].
pub fn table_to_homology(table: &[Vec<u64>]) -> Homology {
    table
        .iter()
        .filter_map(|row| {
            let (&degree, factors) = row.split_first()?;
            Some(HomologyGroup {
                degree: degree as usize,
                rank: factors.iter().filter(|&&f| f == 0).count(),
                torsion: factors.iter().copied().filter(|&f| f != 0).collect(),
            })
        })
        .collect()
}

pub fn homology_records(report: &ConleyReport) -> Vec<HomologyRecord> {
    let mut out = Vec::new();
    for l in &report.levels {
        for (kind, table) in [("relative", &l.homology), ("fixed", &l.fixed)] {
            for g in table_to_homology(table) {
                out.push(HomologyRecord {
                    level: l.n,
                    kind: kind.into(),
                    degree: g.degree,
                    rank: g.rank,
                    torsion: g.torsion.iter().map(u64::to_string).collect::<Vec<_>>().join(" "),
                });
            }
        }
    }
    out
}

pub fn write_homology_csv(records: &[HomologyRecord]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn read_homology_csv(text: &str) -> Result<Vec<HomologyRecord>, CliError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<Result<Vec<HomologyRecord>, _>>()?)
}

/// Groups of one level and kind from parsed records.
pub fn records_homology(records: &[HomologyRecord], level: usize, kind: &str) -> Result<Homology, CliError> {
    records
        .iter()
        .filter(|r| r.level == level && r.kind == kind)
        .map(|r| {
            let torsion = r
                .torsion
                .split_whitespace()
                .map(|t| t.parse::<u64>().map_err(|e| CliError::Io(format!("torsion {t:?}: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(HomologyGroup { degree: r.degree, rank: r.rank, torsion })
        })
        .collect()
}

fn read_json(dir: &Path, name: &str) -> Result<Value, CliError> {
    let text = fs::read_to_string(dir.join(name))?;
    Ok(serde_json::from_str(&text)?)
}

fn degrees(h: &Homology) -> String {
    let d: Vec<String> = h.iter().map(|g| g.degree.to_string()).collect();
    if d.is_empty() {
        "none".into()
    } else {
        d.join(", ")
    }
}

fn markdown(conley: Option<&ConleyReport>, inv: &InvariantReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Run report: {}\n", inv.geometry);
    match conley {
        Some(c) => {
            let _ = writeln!(s, "| n | rank F | dim W- | Delta | homology degrees |");
            let _ = writeln!(s, "|---|---|---|---|---|");
            for l in &c.levels {
                let delta = c
                    .shifts
                    .iter()
                    .find(|r| r.from + 1 == l.n)
                    .map_or("-".to_string(), |r| r.delta.to_string());
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {} | {} |",
                    l.n,
                    l.rank_f,
                    l.dim_w_minus,
                    delta,
                    degrees(&table_to_homology(&l.homology))
                );
            }
        }
        None => {
            let _ = writeln!(s, "No spectral model; Conley stages were skipped.");
        }
    }
    let r = crate::invariants::rational::to_string;
    let _ = writeln!(s, "\n- h index: {}", inv.h_index);
    let _ = writeln!(s, "- n: {}", r(&inv.n_value));
    let _ = writeln!(s, "- Froyshov h: {}", r(&inv.froyshov_h));
    if let Some(k) = &inv.kappa_bound {
        let _ = writeln!(s, "- kappa bound: {}", r(k));
    }
    if let Some(m) = inv.rokhlin_parity {
        let _ = writeln!(s, "- Rokhlin mu: {m}");
    }
    s
}

/// Report on the run in `dir`; fails with `IncompleteRun` while a `PARTIAL`
/// marker is present or an artifact is missing.
pub fn emit_report(dir: &Path, format: ReportFormat) -> Result<String, CliError> {
    if dir.join(PARTIAL_MARKER).exists() || RUN_FILES.iter().any(|f| !dir.join(f).exists()) {
        return Err(CliError::IncompleteRun(dir.to_path_buf()));
    }
    let conley_v = read_json(dir, "conley.json")?;
    let conley: Option<ConleyReport> =
        if conley_v.get("skipped").is_some() { None } else { Some(serde_json::from_value(conley_v)?) };
    let inv: InvariantReport = serde_json::from_value(read_json(dir, "invariants.json")?)?;
    Ok(match format {
        ReportFormat::Json => {
            let mut t = serde_json::to_string_pretty(&json!({"conley": conley, "invariants": inv}))?;
            t.push('\n');
            t
        }
        ReportFormat::Csv => write_homology_csv(&conley.as_ref().map(homology_records).unwrap_or_default())?,
        ReportFormat::Markdown => markdown(conley.as_ref(), &inv),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::pipeline::{homology_table, LevelResult, ShiftRow};
    use crate::conley::free_homology;

    fn sample() -> ConleyReport {
        let mut rel = free_homology(&[60, 61]);
        rel.push(HomologyGroup { degree: 62, rank: 1, torsion: vec![2, 4] });
        let level = |n, h: &Homology| LevelResult {
            n,
            factor_dims: [40, 40, 20, 20],
            rank_f: 40,
            dim_w_minus: 20,
            epsilon: 1.0,
            regular: true,
            tau_samples: vec![],
            homology: homology_table(h),
            fixed: homology_table(&free_homology(&[20, 21])),
            level_t: 20,
            data: None,
        };
        ConleyReport {
            levels: vec![level(0, &free_homology(&[0, 1])), level(1, &rel)],
            shifts: vec![ShiftRow { from: 0, delta: 60, fixed_delta: 20, ok: true }],
        }
    }

    #[test]
    fn homology_csv_round_trip() {
        let rep = sample();
        let text = write_homology_csv(&homology_records(&rep)).unwrap();
        let back = read_homology_csv(&text).unwrap();
        assert_eq!(back, homology_records(&rep));
        for l in &rep.levels {
            assert_eq!(records_homology(&back, l.n, "relative").unwrap(), table_to_homology(&l.homology));
            assert_eq!(records_homology(&back, l.n, "fixed").unwrap(), table_to_homology(&l.fixed));
        }
    }

    #[test]
    fn incomplete_run() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(emit_report(dir.path(), ReportFormat::Json), Err(CliError::IncompleteRun(_))));
    }
}
