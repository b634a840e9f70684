//! Sixteen-superclass scheme: membership, label normalization and the
//! probability-averaging decision rule for 1000-way classifiers.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SUPERCLASS_COUNT: usize = 16;

/// Mapping shipped with the toolkit (ImageNet-1k class indices).
pub const DEFAULT_MAPPING_JSON: &str = include_str!("../assets/taxonomy_in1k16.json");

/// Response label that is not any superclass.
pub const INVALID_LABEL: &str = "invalid";

/// On-disk mapping document.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub superclasses: Vec<String>,
    pub members: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub aliases: BTreeMap<String, String>,
    /// Ordered fine-class universe; defaults to the members in superclass order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fine_classes: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub fine_class_names: BTreeMap<String, String>,
}

#[derive(Clone, Debug)]
pub struct Taxonomy {
    superclasses: Vec<String>,
    slugs: Vec<String>,
    fine_classes: Vec<String>,
    fine_index: HashMap<String, usize>,
    /// Superclass of each fine-class index.
    owner: Vec<Option<usize>>,
    /// Fine-class indices per superclass.
    members: Vec<Vec<usize>>,
    /// Normalized alias -> superclass index, including each label itself.
    lookup: HashMap<String, usize>,
}

impl Taxonomy {
    pub fn builtin() -> Self {
        Self::from_json(DEFAULT_MAPPING_JSON).expect("shipped mapping is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_mapping(serde_json::from_str(text)?)
    }

    pub fn from_mapping(doc: MappingFile) -> Result<Self> {
        let bad = |m: String| Err(Error::Taxonomy(m));
        if doc.superclasses.len() != SUPERCLASS_COUNT {
            return bad(format!("expected {SUPERCLASS_COUNT} superclasses, found {}", doc.superclasses.len()));
        }
        let mut lookup = HashMap::new();
        let mut slugs = Vec::new();
        for (i, s) in doc.superclasses.iter().enumerate() {
            let key = canonical_text(s);
            if key != *s {
                return bad(format!("superclass label `{s}` is not in normalized form"));
            }
            if lookup.insert(key, i).is_some() {
                return bad(format!("duplicate superclass `{s}`"));
            }
            let slug = slug(s);
            if slugs.contains(&slug) {
                return bad(format!("superclass `{s}` collides with another on path slug `{slug}`"));
            }
            slugs.push(slug);
        }
        if let Some(extra) = doc.members.keys().find(|k| !lookup.contains_key(*k)) {
            return bad(format!("members listed for unknown superclass `{extra}`"));
        }

        let fine_classes = match &doc.fine_classes {
            Some(list) => list.clone(),
            None => doc
                .superclasses
                .iter()
                .flat_map(|s| doc.members.get(s).into_iter().flatten().cloned())
                .collect(),
        };
        let mut fine_index = HashMap::with_capacity(fine_classes.len());
        for (i, id) in fine_classes.iter().enumerate() {
            if id.is_empty() || id.contains(['_', '/', '\\']) || id.trim() != id {
                return bad(format!("fine-class id `{id}` must be non-empty without `_`, `/` or spaces at the ends"));
            }
            if fine_index.insert(id.clone(), i).is_some() {
                return bad(format!("fine class `{id}` listed twice in the universe"));
            }
        }

        let mut owner = vec![None; fine_classes.len()];
        let mut members = vec![Vec::new(); SUPERCLASS_COUNT];
        for (s, label) in doc.superclasses.iter().enumerate() {
            let listed = doc.members.get(label).map(Vec::as_slice).unwrap_or(&[]);
            if listed.is_empty() {
                return bad(format!("superclass `{label}` has no members"));
            }
            for id in listed {
                let Some(&fi) = fine_index.get(id) else {
                    return bad(format!("member `{id}` of `{label}` is not in the fine-class universe"));
                };
                if let Some(prev) = owner[fi] {
                    return bad(format!(
                        "fine class `{id}` belongs to both `{}` and `{label}`",
                        doc.superclasses[prev]
                    ));
                }
                owner[fi] = Some(s);
                members[s].push(fi);
            }
        }

        for (alias, target) in &doc.aliases {
            let Some(&t) = lookup.get(&canonical_text(target)) else {
                return bad(format!("alias `{alias}` targets unknown superclass `{target}`"));
            };
            let key = canonical_text(alias);
            match lookup.get(&key) {
                Some(&prev) if prev != t => {
                    return bad(format!("alias `{alias}` is ambiguous"));
                }
                _ => {
                    lookup.insert(key, t);
                }
            }
        }

        Ok(Taxonomy {
            superclasses: doc.superclasses,
            slugs,
            fine_classes,
            fine_index,
            owner,
            members,
            lookup,
        })
    }

    pub fn superclasses(&self) -> &[String] {
        &self.superclasses
    }

    pub fn fine_classes(&self) -> &[String] {
        &self.fine_classes
    }

    pub fn universe_len(&self) -> usize {
        self.fine_classes.len()
    }

    pub fn index_of(&self, superclass: &str) -> Option<usize> {
        self.superclasses.iter().position(|s| s == superclass)
    }

    /// Fine-class indices belonging to superclass `s`.
    pub fn members(&self, s: usize) -> &[usize] {
        &self.members[s]
    }

    pub fn mapped_count(&self) -> usize {
        self.members.iter().map(Vec::len).sum()
    }

    pub fn fine_index(&self, fine_class: &str) -> Option<usize> {
        self.fine_index.get(fine_class).copied()
    }

    pub fn superclass_of(&self, fine_class: &str) -> Option<&str> {
        let fi = self.fine_index(fine_class)?;
        self.owner[fi].map(|s| self.superclasses[s].as_str())
    }

    /// Canonical superclass label for free text, e.g. `"Dog."` -> `"dog"`,
    /// `"timekeeper"` -> `"timekeeping"`. `None` when nothing matches.
    pub fn normalize(&self, raw: &str) -> Option<&str> {
        self.lookup
            .get(&canonical_text(raw))
            .map(|&i| self.superclasses[i].as_str())
    }

    /// Like [`Taxonomy::normalize`] but maps failures to [`INVALID_LABEL`].
    pub fn normalize_or_invalid(&self, raw: &str) -> String {
        self.normalize(raw).unwrap_or(INVALID_LABEL).to_string()
    }

    /// Filesystem-safe token for a superclass label.
    pub fn slug_of(&self, superclass: &str) -> Option<&str> {
        self.index_of(superclass).map(|i| self.slugs[i].as_str())
    }

    pub fn from_slug(&self, slug: &str) -> Option<&str> {
        self.slugs
            .iter()
            .position(|s| s == slug)
            .map(|i| self.superclasses[i].as_str())
    }

    /// Mean of `fine_probs` over each superclass's members. Unmapped classes
    /// are ignored and the result is not renormalized.
    pub fn aggregate_probs(&self, fine_probs: &[f64]) -> Result<Vec<f64>> {
        if fine_probs.len() != self.fine_classes.len() {
            return Err(Error::DimensionMismatch(format!(
                "probability vector has {} entries, universe has {}",
                fine_probs.len(),
                self.fine_classes.len()
            )));
        }
        if let Some(v) = fine_probs.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidArgument(format!("probability {v} is not a finite nonnegative value")));
        }
        Ok(self
            .members
            .iter()
            .map(|m| m.iter().map(|&i| fine_probs[i]).sum::<f64>() / m.len() as f64)
            .collect())
    }

    /// Index of the winning superclass; ties go to the earlier one.
    pub fn decide_index(&self, fine_probs: &[f64]) -> Result<usize> {
        let agg = self.aggregate_probs(fine_probs)?;
        let mut best = 0;
        for (i, &v) in agg.iter().enumerate().skip(1) {
            if v > agg[best] {
                best = i;
            }
        }
        Ok(best)
    }

    pub fn decide(&self, fine_probs: &[f64]) -> Result<&str> {
        Ok(&self.superclasses[self.decide_index(fine_probs)?])
    }
}

/// Lowercase, punctuation other than `&` replaced by spaces, whitespace
/// collapsed. Idempotent.
pub fn canonical_text(raw: &str) -> String {
    let cleaned: String = raw
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '&' {
                c.to_lowercase().next().unwrap_or(c)
            } else {
                ' '
            }
        })
        .collect();
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Lowercase ASCII alphanumerics with `_` between runs: `"car & truck"` -> `"car_truck"`.
pub fn slug(label: &str) -> String {
    let mut out = String::new();
    for part in label
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|p| !p.is_empty())
    {
        if !out.is_empty() {
            out.push('_');
        }
        out.push_str(&part.to_ascii_lowercase());
    }
    out
}
