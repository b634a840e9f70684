use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{CorruptionKind, Severity};

use super::interval::wilson_interval;
use super::log::ObservationLog;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub correct: u64,
    pub total: u64,
}

impl Tally {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }

    fn add(&mut self, correct: bool) {
        self.total += 1;
        self.correct += correct as u64;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    Kind,
    Severity,
    Both,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupKey {
    pub kind: Option<CorruptionKind>,
    pub severity: Option<Severity>,
}

/// Top-1 tallies per group. Groups without trials are absent, never zero.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AccuracyTable {
    pub group_by: Option<GroupBy>,
    pub groups: BTreeMap<GroupKey, Tally>,
}

impl AccuracyTable {
    pub fn get(&self, kind: Option<CorruptionKind>, severity: Option<Severity>) -> Option<f64> {
        self.groups.get(&GroupKey { kind, severity }).map(Tally::accuracy)
    }
}

pub fn accuracy_table(log: &ObservationLog, group_by: GroupBy) -> Result<AccuracyTable> {
    if log.is_empty() {
        return Err(Error::InvalidArgument(format!("log of {} is empty", log.observer_id)));
    }
    let mut groups: BTreeMap<GroupKey, Tally> = BTreeMap::new();
    for r in &log.records {
        let key = match group_by {
            GroupBy::Kind => GroupKey {
                kind: Some(r.corruption),
                severity: None,
            },
            GroupBy::Severity => GroupKey {
                kind: None,
                severity: Some(r.severity),
            },
            GroupBy::Both => GroupKey {
                kind: Some(r.corruption),
                severity: Some(r.severity),
            },
            GroupBy::None => GroupKey {
                kind: None,
                severity: None,
            },
        };
        groups.entry(key).or_default().add(r.is_correct());
    }
    Ok(AccuracyTable {
        group_by: Some(group_by),
        groups,
    })
}

/// Headline number: each corruption's accuracy is the mean over its
/// severity cells, and the overall score is the unweighted mean of the six.
#[derive(Clone, Debug, PartialEq)]
pub struct LaionCScore {
    pub per_kind: BTreeMap<CorruptionKind, f64>,
    /// `None` unless all six corruptions are present.
    pub overall: Option<f64>,
}

pub fn laion_c_score(log: &ObservationLog) -> Result<LaionCScore> {
    let cells = accuracy_table(log, GroupBy::Both)?;
    let mut by_kind: BTreeMap<CorruptionKind, Vec<f64>> = BTreeMap::new();
    for (key, tally) in &cells.groups {
        by_kind.entry(key.kind.expect("grouped by kind")).or_default().push(tally.accuracy());
    }
    let per_kind: BTreeMap<_, _> = by_kind
        .into_iter()
        .map(|(k, v)| (k, v.iter().sum::<f64>() / v.len() as f64))
        .collect();
    let overall = benchmark_score(&per_kind);
    Ok(LaionCScore { per_kind, overall })
}

/// Unweighted mean of the six per-corruption accuracies, or `None` if any is missing.
pub fn benchmark_score(per_kind: &BTreeMap<CorruptionKind, f64>) -> Option<f64> {
    let vals: Option<Vec<f64>> = CorruptionKind::ALL.iter().map(|k| per_kind.get(k).copied()).collect();
    vals.map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

/// Column order of the reference benchmark table after the model name,
/// ImageNet and LAION-C columns.
pub const BENCHMARK_COLUMN_ORDER: [CorruptionKind; 6] = [
    CorruptionKind::Mosaic,
    CorruptionKind::VerticalLines,
    CorruptionKind::Glitched,
    CorruptionKind::LuminanceCheckerboard,
    CorruptionKind::GeometricShapes,
    CorruptionKind::Stickers,
];

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkRow {
    pub model: String,
    /// Clean ImageNet accuracy in [0, 1], supplied externally.
    pub imagenet: Option<f64>,
    pub per_kind: BTreeMap<CorruptionKind, f64>,
}

impl BenchmarkRow {
    pub fn from_score(model: impl Into<String>, imagenet: Option<f64>, score: &LaionCScore) -> Self {
        BenchmarkRow {
            model: model.into(),
            imagenet,
            per_kind: score.per_kind.clone(),
        }
    }
}

/// Plain-text table in percent with one decimal.
pub fn render_benchmark_table(rows: &[BenchmarkRow]) -> String {
    let headers = ["Model", "ImageNet", "LAION-C", "Mosaic", "Vertical", "Glitched", "Luminance", "Geometric", "Stickers"];
    let pct = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{:.1}", 100.0 * v));
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut cells = vec![r.model.clone(), pct(r.imagenet), pct(benchmark_score(&r.per_kind))];
            cells.extend(BENCHMARK_COLUMN_ORDER.iter().map(|k| pct(r.per_kind.get(k).copied())));
            cells
        })
        .collect();
    let widths: Vec<usize> = (0..headers.len())
        .map(|i| body.iter().map(|r| r[i].len()).chain([headers[i].len()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    let line = |out: &mut String, cells: &[&str]| {
        for (i, c) in cells.iter().enumerate() {
            if i == 0 {
                let _ = write!(out, "{c:<w$}", w = widths[0]);
            } else {
                let _ = write!(out, "  {c:>w$}", w = widths[i]);
            }
        }
        out.push('\n');
    };
    line(&mut out, &headers);
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    out.push('\n');
    for r in &body {
        line(&mut out, &r.iter().map(String::as_str).collect::<Vec<_>>());
    }
    out
}

/// CSV with `corruption,severity,correct,total,accuracy,ci_low,ci_high`.
pub fn write_accuracy_csv(table: &AccuracyTable, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["corruption", "severity", "correct", "total", "accuracy", "ci_low", "ci_high"])?;
    for (key, t) in &table.groups {
        let (lo, hi) = wilson_interval(t.correct, t.total, 0.95)?;
        w.write_record([
            key.kind.map_or("all".to_string(), |k| k.token().to_string()),
            key.severity.map_or("all".to_string(), |s| s.to_string()),
            t.correct.to_string(),
            t.total.to_string(),
            format!("{:.6}", t.accuracy()),
            format!("{lo:.6}"),
            format!("{hi:.6}"),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Best observer overall (by headline score, or pooled accuracy when a log
/// does not cover all six corruptions) and per (corruption, severity) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct BestObservers {
    pub global: Option<(String, f64)>,
    pub per_cell: BTreeMap<(CorruptionKind, Severity), (String, f64)>,
}

pub fn best_observers(logs: &[ObservationLog]) -> Result<BestObservers> {
    let mut global: Option<(String, f64)> = None;
    let mut per_cell: BTreeMap<(CorruptionKind, Severity), (String, f64)> = BTreeMap::new();
    for log in logs.iter().filter(|l| !l.is_empty()) {
        let score = laion_c_score(log)?;
        let headline = match score.overall {
            Some(v) => v,
            None => accuracy_table(log, GroupBy::None)?.get(None, None).unwrap_or(0.0),
        };
        if global.as_ref().is_none_or(|(_, best)| headline > *best) {
            global = Some((log.observer_id.clone(), headline));
        }
        for (key, t) in accuracy_table(log, GroupBy::Both)?.groups {
            let cell = (key.kind.unwrap(), key.severity.unwrap());
            let acc = t.accuracy();
            match per_cell.get(&cell) {
                Some((_, best)) if *best >= acc => {}
                _ => {
                    per_cell.insert(cell, (log.observer_id.clone(), acc));
                }
            }
        }
    }
    Ok(BestObservers { global, per_cell })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::Observation;

    fn log_with(cells: &[(CorruptionKind, i64, u64, u64)]) -> ObservationLog {
        let mut log = ObservationLog::new("o");
        let mut n = 0;
        for &(kind, sev, correct, total) in cells {
            for i in 0..total {
                n += 1;
                log.records.push(Observation {
                    image_id: format!("img{n}"),
                    superclass_true: "dog".into(),
                    superclass_response: if i < correct { "dog".into() } else { "cat".into() },
                    corruption: kind,
                    severity: Severity::new(sev).unwrap(),
                    response_time_ms: None,
                });
            }
        }
        log
    }

    #[test]
    fn grouping_and_means() {
        let log = log_with(&[
            (CorruptionKind::Mosaic, 1, 3, 4),
            (CorruptionKind::Mosaic, 2, 1, 2),
            (CorruptionKind::Stickers, 1, 0, 5),
        ]);
        let by_kind = accuracy_table(&log, GroupBy::Kind).unwrap();
        assert_eq!(by_kind.get(Some(CorruptionKind::Mosaic), None), Some(4.0 / 6.0));
        assert_eq!(by_kind.get(Some(CorruptionKind::Glitched), None), None);
        let by_sev = accuracy_table(&log, GroupBy::Severity).unwrap();
        assert_eq!(by_sev.get(None, Some(Severity::new(1).unwrap())), Some(3.0 / 9.0));
        let score = laion_c_score(&log).unwrap();
        // Severity means, not pooled: (0.75 + 0.5) / 2.
        assert_eq!(score.per_kind[&CorruptionKind::Mosaic], 0.625);
        assert_eq!(score.overall, None);
        assert!(accuracy_table(&ObservationLog::new("e"), GroupBy::None).is_err());
    }

    #[test]
    fn all_correct_is_one_everywhere() {
        let cells: Vec<_> = CorruptionKind::ALL.iter().flat_map(|&k| (1..=5).map(move |s| (k, s, 2, 2))).collect();
        let log = log_with(&cells);
        for g in [GroupBy::Kind, GroupBy::Severity, GroupBy::Both, GroupBy::None] {
            let t = accuracy_table(&log, g).unwrap();
            assert!(t.groups.values().all(|t| t.accuracy() == 1.0));
        }
        assert_eq!(laion_c_score(&log).unwrap().overall, Some(1.0));
    }

    #[test]
    fn table_renders_in_reference_order() {
        let per_kind: BTreeMap<_, _> = BENCHMARK_COLUMN_ORDER
            .iter()
            .zip([0.488, 0.536, 0.708, 0.972, 0.810, 0.534])
            .map(|(&k, v)| (k, v))
            .collect();
        let text = render_benchmark_table(&[BenchmarkRow {
            model: "EVA-G".into(),
            imagenet: Some(0.898),
            per_kind,
        }]);
        let row = text.lines().nth(2).unwrap();
        let cols: Vec<&str> = row.split_whitespace().collect();
        assert_eq!(cols, ["EVA-G", "89.8", "67.5", "48.8", "53.6", "70.8", "97.2", "81.0", "53.4"]);
    }

    #[test]
    fn csv_has_intervals() {
        let log = log_with(&[(CorruptionKind::Glitched, 3, 8, 10)]);
        let mut buf = Vec::new();
        write_accuracy_csv(&accuracy_table(&log, GroupBy::Both).unwrap(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("corruption,severity,correct,total,accuracy,ci_low,ci_high\n"));
        assert!(text.contains("glitched,3,8,10,0.800000,"));
    }

    #[test]
    fn best_observer_both_ways() {
        let mut a = log_with(&[(CorruptionKind::Mosaic, 1, 4, 4), (CorruptionKind::Mosaic, 2, 0, 4)]);
        a.observer_id = "a".into();
        let mut b = log_with(&[(CorruptionKind::Mosaic, 1, 3, 4), (CorruptionKind::Mosaic, 2, 2, 4)]);
        b.observer_id = "b".into();
        let best = best_observers(&[a, b]).unwrap();
        assert_eq!(best.global.as_ref().unwrap().0, "b");
        assert_eq!(best.per_cell[&(CorruptionKind::Mosaic, Severity::new(1).unwrap())].0, "a");
        assert_eq!(best.per_cell[&(CorruptionKind::Mosaic, Severity::new(2).unwrap())].0, "b");
    }
}
