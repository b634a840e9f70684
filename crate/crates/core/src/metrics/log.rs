use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{CorruptionKind, Severity};
use crate::taxonomy::{Taxonomy, INVALID_LABEL};

/// A single trial of one observer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub image_id: String,
    pub superclass_true: String,
    pub superclass_response: String,
    pub corruption: CorruptionKind,
    pub severity: Severity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response_time_ms: Option<u32>,
}

impl Observation {
    pub fn is_correct(&self) -> bool {
        self.superclass_response != INVALID_LABEL && self.superclass_response == self.superclass_true
    }

    /// Identity of the stimulus shown, shared between observers.
    pub fn trial_key(&self) -> (&str, CorruptionKind, Severity) {
        (&self.image_id, self.corruption, self.severity)
    }
}

/// One line of a log file: an [`Observation`] tagged with its observer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationRow {
    pub observer_id: String,
    pub image_id: String,
    pub superclass_true: String,
    pub superclass_response: String,
    pub corruption: CorruptionKind,
    pub severity: Severity,
    #[serde(default)]
    pub response_time_ms: Option<u32>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationLog {
    pub observer_id: String,
    pub records: Vec<Observation>,
}

impl ObservationLog {
    pub fn new(observer_id: impl Into<String>) -> Self {
        ObservationLog {
            observer_id: observer_id.into(),
            records: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Merges several logs into one observer, as when all human responses
    /// are pooled before comparing against a model.
    pub fn pooled(observer_id: impl Into<String>, logs: &[ObservationLog]) -> Self {
        ObservationLog {
            observer_id: observer_id.into(),
            records: logs.iter().flat_map(|l| l.records.iter().cloned()).collect(),
        }
    }

    /// Normalizes labels through `tax` and checks trial uniqueness.
    ///
    /// True labels must name a superclass. Responses that do not normalize
    /// (including `"none"`) become `"invalid"`.
    pub fn validated(&self, tax: &Taxonomy) -> Result<ObservationLog> {
        let mut seen = HashSet::new();
        let mut records = Vec::with_capacity(self.records.len());
        for r in &self.records {
            let truth = tax.normalize(&r.superclass_true).ok_or_else(|| {
                Error::Format(format!("`{}` is not a superclass (image {})", r.superclass_true, r.image_id))
            })?;
            if !seen.insert(r.trial_key()) {
                return Err(Error::Format(format!(
                    "observer {} has two records for {} / {} / {}",
                    self.observer_id, r.image_id, r.corruption, r.severity
                )));
            }
            records.push(Observation {
                superclass_true: truth.to_string(),
                superclass_response: tax.normalize_or_invalid(&r.superclass_response),
                ..r.clone()
            });
        }
        Ok(ObservationLog {
            observer_id: self.observer_id.clone(),
            records,
        })
    }

    pub fn rows(&self) -> impl Iterator<Item = ObservationRow> + '_ {
        self.records.iter().map(|r| ObservationRow {
            observer_id: self.observer_id.clone(),
            image_id: r.image_id.clone(),
            superclass_true: r.superclass_true.clone(),
            superclass_response: r.superclass_response.clone(),
            corruption: r.corruption,
            severity: r.severity,
            response_time_ms: r.response_time_ms,
        })
    }

    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        for row in self.rows() {
            serde_json::to_writer(&mut out, &row)?;
            out.write_all(b"\n").map_err(|e| Error::io("<log>", e))?;
        }
        Ok(())
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in self.rows() {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| Error::io("<log>", e))?;
        Ok(())
    }

    /// Writes CSV for `.csv` paths and JSON Lines otherwise.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let out = std::io::BufWriter::new(file);
        if is_csv(path) {
            self.write_csv(out)
        } else {
            self.write_jsonl(out)
        }
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Reads a CSV or JSON Lines log file and groups records by observer in
/// first-seen order.
pub fn read_logs(path: impl AsRef<Path>) -> Result<Vec<ObservationLog>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let rows: Vec<ObservationRow> = if is_csv(path) {
        csv::Reader::from_reader(file)
            .deserialize()
            .collect::<std::result::Result<_, _>>()?
    } else {
        let mut rows = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            rows.push(
                serde_json::from_str(&line)
                    .map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), n + 1)))?,
            );
        }
        rows
    };
    let mut order = Vec::new();
    let mut groups: BTreeMap<String, Vec<Observation>> = BTreeMap::new();
    for row in rows {
        if !groups.contains_key(&row.observer_id) {
            order.push(row.observer_id.clone());
        }
        groups.entry(row.observer_id).or_default().push(Observation {
            image_id: row.image_id,
            superclass_true: row.superclass_true,
            superclass_response: row.superclass_response,
            corruption: row.corruption,
            severity: row.severity,
            response_time_ms: row.response_time_ms,
        });
    }
    Ok(order
        .into_iter()
        .map(|id| ObservationLog {
            records: groups.remove(&id).unwrap_or_default(),
            observer_id: id,
        })
        .collect())
}
