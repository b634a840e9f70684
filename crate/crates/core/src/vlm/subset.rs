use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::builder::ManifestEntry;
use crate::error::{Error, Result};
use crate::imgcore::{CorruptionKind, SeedStream, Severity};
use crate::metrics::{Observation, ObservationLog};
use crate::taxonomy::Taxonomy;

use super::backend::ChatBackend;
use super::client::VlmClient;
use super::limiter::Clock;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubsetItem {
    pub image_id: String,
    pub superclass: String,
    pub corruption: CorruptionKind,
    pub severity: Severity,
    /// Relative to the dataset root.
    pub output_path: String,
}

/// One completed query; the checkpoint file is a JSON line per record.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub image_id: String,
    pub corruption: CorruptionKind,
    pub severity: Severity,
    pub superclass_true: String,
    pub response: String,
    #[serde(default)]
    pub raw: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

type Key = (String, CorruptionKind, Severity);

/// Samples `per_class` source images per superclass and lists every cell of
/// each. Every cell present in the manifest must exist for every sampled
/// source.
pub fn plan_subset(manifest: &[ManifestEntry], per_class: usize, seed: u64, tax: &Taxonomy) -> Result<Vec<SubsetItem>> {
    if per_class == 0 {
        return Err(Error::InvalidArgument("per_class must be positive".into()));
    }
    let cells: BTreeSet<(CorruptionKind, Severity)> = manifest.iter().map(|e| (e.corruption, e.severity)).collect();
    let mut by_source: BTreeMap<(String, String), HashMap<(CorruptionKind, Severity), &ManifestEntry>> = BTreeMap::new();
    for e in manifest {
        by_source
            .entry((e.superclass.clone(), format!("{}_{}", e.fine_class, e.source_id)))
            .or_default()
            .insert((e.corruption, e.severity), e);
    }
    let mut out = Vec::with_capacity(tax.superclasses().len() * per_class * cells.len());
    for superclass in tax.superclasses() {
        let mut ids: Vec<&String> = by_source.keys().filter(|(s, _)| s == superclass).map(|(_, id)| id).collect();
        if ids.len() < per_class {
            return Err(Error::Plan(format!("superclass {superclass:?} has {} sources, {per_class} requested", ids.len())));
        }
        SeedStream::for_purpose(seed, &format!("vlm-subset/{superclass}")).shuffle(&mut ids);
        for id in ids.into_iter().take(per_class) {
            let entries = &by_source[&(superclass.clone(), id.clone())];
            for cell in &cells {
                let e = entries
                    .get(cell)
                    .ok_or_else(|| Error::Plan(format!("{id} lacks {} s{}", cell.0, cell.1)))?;
                out.push(SubsetItem {
                    image_id: id.clone(),
                    superclass: superclass.clone(),
                    corruption: cell.0,
                    severity: cell.1,
                    output_path: e.output_path.clone(),
                });
            }
        }
    }
    Ok(out)
}

fn load_checkpoint(path: &Path) -> Result<HashMap<Key, CheckpointRecord>> {
    let mut done = HashMap::new();
    if !path.exists() {
        return Ok(done);
    }
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<CheckpointRecord>(&line) {
            Ok(r) => {
                done.entry((r.image_id.clone(), r.corruption, r.severity)).or_insert(r);
            }
            Err(_) => log::warn!("{}: ignoring unreadable checkpoint line", path.display()),
        }
    }
    Ok(done)
}

/// Queries every item not already in `checkpoint`, appending each answer to
/// it as it arrives, and returns the full log in item order. Interrupted runs
/// resume without repeating completed queries.
pub fn run_subset<B: ChatBackend, C: Clock>(
    items: &[SubsetItem],
    client: &VlmClient<B, C>,
    dataset_root: &Path,
    checkpoint: &Path,
) -> Result<ObservationLog> {
    let done = Mutex::new(load_checkpoint(checkpoint)?);
    let pending: Vec<&SubsetItem> = {
        let d = done.lock();
        items
            .iter()
            .filter(|it| !d.contains_key(&(it.image_id.clone(), it.corruption, it.severity)))
            .collect()
    };
    log::info!("{} of {} queries pending", pending.len(), items.len());
    let sink = Mutex::new(
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(checkpoint)
            .map_err(|e| Error::io(checkpoint, e))?,
    );
    let next = AtomicUsize::new(0);
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    std::thread::scope(|scope| {
        for _ in 0..client.config().workers.min(pending.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = pending.get(i) else { break };
                if failure.lock().is_some() {
                    break;
                }
                let c = client.classify_image(dataset_root.join(&item.output_path));
                let rec = CheckpointRecord {
                    image_id: item.image_id.clone(),
                    corruption: item.corruption,
                    severity: item.severity,
                    superclass_true: item.superclass.clone(),
                    response: c.label,
                    raw: c.raw,
                    error: c.error,
                };
                let mut line = serde_json::to_vec(&rec).expect("record serializes");
                line.push(b'\n');
                let written = {
                    let mut f = sink.lock();
                    f.write_all(&line).and_then(|_| f.sync_data())
                };
                if let Err(e) = written {
                    *failure.lock() = Some(Error::io(checkpoint, e));
                    break;
                }
                done.lock().insert((rec.image_id.clone(), rec.corruption, rec.severity), rec);
            });
        }
    });
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let done = done.into_inner();
    let mut log = ObservationLog::new(client.config().model.clone());
    for it in items {
        let r = &done[&(it.image_id.clone(), it.corruption, it.severity)];
        log.records.push(Observation {
            image_id: it.image_id.clone(),
            superclass_true: it.superclass.clone(),
            superclass_response: r.response.clone(),
            corruption: it.corruption,
            severity: it.severity,
            response_time_ms: None,
        });
    }
    Ok(log)
}
