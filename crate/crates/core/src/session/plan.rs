use std::collections::{HashMap, HashSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::builder::ManifestEntry;
use crate::error::{Error, Result};
use crate::imgcore::{CorruptionKind, SeedStream, Severity};
use crate::taxonomy::Taxonomy;

use super::augment::WarmupAugmentation;
use super::score::{BonusRule, Timing};

pub const WARMUP_BLOCKS: usize = 2;
pub const WARMUP_BLOCK_TRIALS: usize = 45;
pub const MAIN_BLOCKS: usize = 10;
pub const MAIN_BLOCK_TRIALS: usize = 60;
/// Consecutive main blocks sharing a distortion.
pub const BLOCKS_PER_DISTORTION: usize = 5;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Condition {
    Clean,
    Augmented { augmentation: WarmupAugmentation },
    Corrupted { corruption: CorruptionKind, severity: Severity },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trial {
    /// Unique within a session; for main trials the dataset path of the image.
    pub stimulus_id: String,
    /// The source image (`<fine_class>_<source_id>`).
    pub image_id: String,
    pub superclass: String,
    pub condition: Condition,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Warmup,
    Main,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub index: usize,
    pub kind: BlockKind,
    pub distortion: Option<CorruptionKind>,
    pub trials: Vec<Trial>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub participant_id: String,
    pub seed: u64,
    pub distortions: [CorruptionKind; 2],
    pub blocks: Vec<Block>,
    pub timing: Timing,
    pub bonus: BonusRule,
}

impl SessionPlan {
    pub fn trial_count(&self) -> usize {
        self.blocks.iter().map(|b| b.trials.len()).sum()
    }

    pub fn main_trials(&self) -> impl Iterator<Item = (usize, usize, &Trial)> {
        self.blocks
            .iter()
            .filter(|b| b.kind == BlockKind::Main)
            .flat_map(|b| b.trials.iter().enumerate().map(move |(i, t)| (b.index, i, t)))
    }

    pub fn trial(&self, block: usize, trial: usize) -> Option<&Trial> {
        self.blocks.get(block)?.trials.get(trial)
    }
}

/// A corrupted image available to the planner.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub stimulus_id: String,
    pub image_id: String,
    pub superclass: String,
    pub corruption: CorruptionKind,
    pub severity: Severity,
}

impl From<&ManifestEntry> for CatalogEntry {
    fn from(e: &ManifestEntry) -> Self {
        CatalogEntry {
            stimulus_id: e.output_path.clone(),
            image_id: format!("{}_{}", e.fine_class, e.source_id),
            superclass: e.superclass.clone(),
            corruption: e.corruption,
            severity: e.severity,
        }
    }
}

/// An uncorrupted image for the practice blocks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WarmupSource {
    pub image_id: String,
    pub superclass: String,
    pub path: PathBuf,
}

type CellKey = (usize, CorruptionKind, Severity);

#[derive(Clone, Debug)]
pub struct StimulusCatalog {
    superclasses: Vec<String>,
    entries: Vec<CatalogEntry>,
    cells: HashMap<CellKey, Vec<usize>>,
    warmup: Vec<WarmupSource>,
    warmup_by_class: Vec<Vec<usize>>,
}

impl StimulusCatalog {
    pub fn new(tax: &Taxonomy, entries: Vec<CatalogEntry>, warmup: Vec<WarmupSource>) -> Result<Self> {
        let class = |s: &str| tax.index_of(s).ok_or_else(|| Error::Session(format!("unknown superclass {s:?}")));
        let mut ids = HashSet::new();
        let mut cells: HashMap<CellKey, Vec<usize>> = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            if !ids.insert(e.stimulus_id.as_str()) {
                return Err(Error::Session(format!("duplicate stimulus {}", e.stimulus_id)));
            }
            cells.entry((class(&e.superclass)?, e.corruption, e.severity)).or_default().push(i);
        }
        for list in cells.values_mut() {
            list.sort_by(|&a, &b| entries[a].stimulus_id.cmp(&entries[b].stimulus_id));
        }
        let mut warmup_by_class = vec![Vec::new(); tax.superclasses().len()];
        for (i, w) in warmup.iter().enumerate() {
            warmup_by_class[class(&w.superclass)?].push(i);
        }
        Ok(StimulusCatalog {
            superclasses: tax.superclasses().to_vec(),
            entries,
            cells,
            warmup,
            warmup_by_class,
        })
    }

    pub fn from_manifest(tax: &Taxonomy, manifest: &[ManifestEntry], warmup: Vec<WarmupSource>) -> Result<Self> {
        Self::new(tax, manifest.iter().map(CatalogEntry::from).collect(), warmup)
    }

    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    pub fn warmup_sources(&self) -> &[WarmupSource] {
        &self.warmup
    }

    pub fn warmup_source(&self, image_id: &str) -> Option<&WarmupSource> {
        self.warmup.iter().find(|w| w.image_id == image_id)
    }
}

/// Which two distortions each participant sees.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assignment {
    /// Participant `p` gets kinds `2p` and `2p + 1` (mod 6) of a seeded
    /// permutation, so per-kind participant counts differ by at most one.
    #[default]
    RoundRobin,
    /// Explicit pairs, cycled by participant index.
    Fixed(Vec<[CorruptionKind; 2]>),
}

impl Assignment {
    pub fn distortions_for(&self, participant_index: usize, seed: u64) -> Result<[CorruptionKind; 2]> {
        match self {
            Assignment::RoundRobin => {
                let mut kinds = CorruptionKind::ALL;
                SeedStream::for_purpose(seed, "assignment").shuffle(&mut kinds);
                let n = kinds.len();
                Ok([kinds[(2 * participant_index) % n], kinds[(2 * participant_index + 1) % n]])
            }
            Assignment::Fixed(pairs) => {
                let pair = pairs
                    .get(participant_index % pairs.len().max(1))
                    .ok_or_else(|| Error::Session("empty fixed assignment".into()))?;
                if pair[0] == pair[1] {
                    return Err(Error::Session(format!("assignment repeats {}", pair[0])));
                }
                Ok(*pair)
            }
        }
    }
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    #[serde(default)]
    pub assignment: Assignment,
    /// Never show the same source image twice in one session, under any condition.
    #[serde(default = "yes")]
    pub unique_sources: bool,
    #[serde(default)]
    pub timing: Timing,
    #[serde(default)]
    pub bonus: BonusRule,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            assignment: Assignment::default(),
            unique_sources: true,
            timing: Timing::default(),
            bonus: BonusRule::default(),
        }
    }
}

/// Class index per slot: `n / 16` or `n / 16 + 1` of every class, the
/// larger share going to a random subset.
fn class_slots(stream: &mut SeedStream, classes: usize, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..classes).collect();
    stream.shuffle(&mut order);
    let (base, extra) = (n / classes, n % classes);
    order
        .iter()
        .enumerate()
        .flat_map(|(rank, &c)| std::iter::repeat_n(c, base + usize::from(rank < extra)))
        .collect()
}

struct Picker<'a> {
    catalog: &'a StimulusCatalog,
    exclude: &'a HashSet<String>,
    unique_sources: bool,
    used_stimuli: HashSet<String>,
    used_images: HashSet<String>,
}

impl Picker<'_> {
    fn take(&mut self, image_id: &str, stimulus_id: &str) {
        self.used_stimuli.insert(stimulus_id.to_string());
        self.used_images.insert(image_id.to_string());
    }

    fn fresh_image(&self, image_id: &str) -> bool {
        !self.unique_sources || !self.used_images.contains(image_id)
    }

    fn main(&mut self, stream: &mut SeedStream, class: usize, kind: CorruptionKind, sev: Severity) -> Result<Trial> {
        let cat = self.catalog;
        let candidates: Vec<&CatalogEntry> = cat
            .cells
            .get(&(class, kind, sev))
            .into_iter()
            .flatten()
            .map(|&i| &cat.entries[i])
            .filter(|e| {
                !self.exclude.contains(&e.stimulus_id)
                    && !self.used_stimuli.contains(&e.stimulus_id)
                    && self.fresh_image(&e.image_id)
            })
            .collect();
        if candidates.is_empty() {
            return Err(Error::Session(format!(
                "insufficient stimuli for {} / {kind} / s{sev}",
                cat.superclasses[class]
            )));
        }
        let e = candidates[stream.below(candidates.len() as u64) as usize];
        self.take(&e.image_id, &e.stimulus_id);
        Ok(Trial {
            stimulus_id: e.stimulus_id.clone(),
            image_id: e.image_id.clone(),
            superclass: e.superclass.clone(),
            condition: Condition::Corrupted {
                corruption: kind,
                severity: sev,
            },
        })
    }

    fn warmup(&mut self, stream: &mut SeedStream, class: usize, condition: Condition) -> Result<Trial> {
        let cat = self.catalog;
        let prefix = match &condition {
            Condition::Augmented { augmentation } => augmentation.token(),
            _ => "clean",
        };
        let id_of = |w: &WarmupSource| format!("warmup/{prefix}/{}", w.image_id);
        let candidates: Vec<&WarmupSource> = cat.warmup_by_class[class]
            .iter()
            .map(|&i| &cat.warmup[i])
            .filter(|w| self.fresh_image(&w.image_id) && !self.used_stimuli.contains(&id_of(w)))
            .collect();
        if candidates.is_empty() {
            return Err(Error::Session(format!("insufficient warm-up images for {}", cat.superclasses[class])));
        }
        let w = candidates[stream.below(candidates.len() as u64) as usize];
        let stimulus_id = id_of(w);
        self.take(&w.image_id, &stimulus_id);
        Ok(Trial {
            stimulus_id,
            image_id: w.image_id.clone(),
            superclass: w.superclass.clone(),
            condition,
        })
    }
}

/// Plans one participant's 2 practice blocks and 10 main blocks.
///
/// `exclude` holds main-block stimulus ids already shown to other
/// participants. The plan depends only on its arguments.
pub fn plan_session(
    participant_id: &str,
    participant_index: usize,
    catalog: &StimulusCatalog,
    cfg: &PlanConfig,
    seed: u64,
    exclude: &HashSet<String>,
) -> Result<SessionPlan> {
    let distortions = cfg.assignment.distortions_for(participant_index, seed)?;
    let mut stream = SeedStream::for_purpose(seed, &format!("session/{participant_id}"));
    let mut picker = Picker {
        catalog,
        exclude,
        unique_sources: cfg.unique_sources,
        used_stimuli: HashSet::new(),
        used_images: HashSet::new(),
    };
    let classes = catalog.superclasses.len();
    let mut blocks = Vec::with_capacity(WARMUP_BLOCKS + MAIN_BLOCKS);

    for index in 0..WARMUP_BLOCKS {
        let slots = class_slots(&mut stream, classes, WARMUP_BLOCK_TRIALS);
        let mut trials = Vec::with_capacity(slots.len());
        for (t, &class) in slots.iter().enumerate() {
            let condition = if index == 0 {
                Condition::Clean
            } else {
                Condition::Augmented {
                    augmentation: WarmupAugmentation::ALL[t % WarmupAugmentation::ALL.len()],
                }
            };
            trials.push(picker.warmup(&mut stream, class, condition)?);
        }
        stream.shuffle(&mut trials);
        blocks.push(Block {
            index,
            kind: BlockKind::Warmup,
            distortion: None,
            trials,
        });
    }

    let severities: Vec<Severity> = Severity::all().collect();
    for m in 0..MAIN_BLOCKS {
        let kind = distortions[m / BLOCKS_PER_DISTORTION];
        let slots = class_slots(&mut stream, classes, MAIN_BLOCK_TRIALS);
        let offset = stream.below(severities.len() as u64) as usize;
        let mut trials = Vec::with_capacity(slots.len());
        for (t, &class) in slots.iter().enumerate() {
            let sev = severities[(t + offset) % severities.len()];
            trials.push(picker.main(&mut stream, class, kind, sev)?);
        }
        stream.shuffle(&mut trials);
        blocks.push(Block {
            index: WARMUP_BLOCKS + m,
            kind: BlockKind::Main,
            distortion: Some(kind),
            trials,
        });
    }

    Ok(SessionPlan {
        participant_id: participant_id.to_string(),
        seed,
        distortions,
        blocks,
        timing: cfg.timing.clone(),
        bonus: cfg.bonus.clone(),
    })
}

/// Plans several participants so that no main-block stimulus is shown twice
/// across the cohort.
pub fn plan_cohort(
    participant_ids: &[String],
    catalog: &StimulusCatalog,
    cfg: &PlanConfig,
    seed: u64,
) -> Result<Vec<SessionPlan>> {
    let mut exclude = HashSet::new();
    let mut plans = Vec::with_capacity(participant_ids.len());
    for (i, pid) in participant_ids.iter().enumerate() {
        let plan = plan_session(pid, i, catalog, cfg, seed, &exclude)?;
        exclude.extend(plan.main_trials().map(|(_, _, t)| t.stimulus_id.clone()));
        plans.push(plan);
    }
    Ok(plans)
}


#[cfg(test)]
mod tests {
    use super::tests_support::synthetic_catalog;
    use super::*;

    #[test]
    fn structure_and_balance() {
        let tax = Taxonomy::builtin();
        let cat = synthetic_catalog(&tax, 50, 6);
        let plan = plan_session("p1", 0, &cat, &PlanConfig::default(), 9, &HashSet::new()).unwrap();
        assert_eq!(plan.trial_count(), 690);
        assert_eq!(plan.main_trials().count(), 600);
        assert_eq!(plan.blocks.len(), 12);
        let mut ids = HashSet::new();
        let mut images = HashSet::new();
        for b in &plan.blocks {
            for t in &b.trials {
                assert!(ids.insert(&t.stimulus_id));
                assert!(images.insert(&t.image_id));
            }
        }
        for b in plan.blocks.iter().filter(|b| b.kind == BlockKind::Main) {
            assert_eq!(b.trials.len(), 60);
            let mut per_class: HashMap<&str, usize> = HashMap::new();
            let mut per_sev: HashMap<Severity, usize> = HashMap::new();
            for t in &b.trials {
                *per_class.entry(&t.superclass).or_default() += 1;
                let Condition::Corrupted { corruption, severity } = t.condition else { panic!() };
                assert_eq!(Some(corruption), b.distortion);
                *per_sev.entry(severity).or_default() += 1;
            }
            assert_eq!(per_class.len(), 16);
            assert!(per_class.values().all(|&n| n == 3 || n == 4));
            assert!(per_sev.values().all(|&n| n == 12));
        }
        assert_eq!(plan.blocks[2].distortion, Some(plan.distortions[0]));
        assert_eq!(plan.blocks[11].distortion, Some(plan.distortions[1]));
        assert!(plan.blocks[0].trials.iter().all(|t| t.condition == Condition::Clean));
        assert!(plan.blocks[1].trials.iter().all(|t| matches!(t.condition, Condition::Augmented { .. })));
    }

    #[test]
    fn deterministic() {
        let tax = Taxonomy::builtin();
        let cat = synthetic_catalog(&tax, 40, 6);
        let a = plan_session("p", 3, &cat, &PlanConfig::default(), 1, &HashSet::new()).unwrap();
        let b = plan_session("p", 3, &cat, &PlanConfig::default(), 1, &HashSet::new()).unwrap();
        assert_eq!(a, b);
        let c = plan_session("p", 3, &cat, &PlanConfig::default(), 2, &HashSet::new()).unwrap();
        assert_ne!(a.blocks, c.blocks);
    }

    #[test]
    fn insufficient_stimuli() {
        let tax = Taxonomy::builtin();
        let cat = synthetic_catalog(&tax, 2, 6);
        assert!(matches!(
            plan_session("p", 0, &cat, &PlanConfig::default(), 0, &HashSet::new()),
            Err(Error::Session(_))
        ));
        let cat = synthetic_catalog(&tax, 40, 1);
        assert!(plan_session("p", 0, &cat, &PlanConfig::default(), 0, &HashSet::new()).is_err());
    }

    #[test]
    fn round_robin_covers_kinds_evenly() {
        let mut counts: HashMap<CorruptionKind, usize> = HashMap::new();
        for p in 0..19 {
            let [a, b] = Assignment::RoundRobin.distortions_for(p, 4).unwrap();
            assert_ne!(a, b);
            *counts.entry(a).or_default() += 1;
            *counts.entry(b).or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        let (lo, hi) = (counts.values().min().unwrap(), counts.values().max().unwrap());
        assert!(hi - lo <= 1, "{counts:?}");
        let fixed = Assignment::Fixed(vec![[CorruptionKind::Mosaic, CorruptionKind::Mosaic]]);
        assert!(fixed.distortions_for(0, 0).is_err());
    }
}
