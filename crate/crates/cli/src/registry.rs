//! Locked-threshold registry: a JSON file keyed by task, one slot per band
//! (rule_out / rule_in / review). Slots are append-only; overwriting an
//! existing slot requires an explicit relock.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use triagebench_core::policy::{BandSlot, LockedThreshold};

pub const DEFAULT_REGISTRY: &str = "locked_thresholds.json";

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TaskEntry {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule_out: Option<LockedThreshold>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule_in: Option<LockedThreshold>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub review: Option<LockedThreshold>,
}

impl TaskEntry {
    pub fn slot(&self, slot: BandSlot) -> Option<&LockedThreshold> {
        match slot {
            BandSlot::RuleOut => self.rule_out.as_ref(),
            BandSlot::RuleIn => self.rule_in.as_ref(),
            BandSlot::Review => self.review.as_ref(),
        }
    }

    fn slot_mut(&mut self, slot: BandSlot) -> &mut Option<LockedThreshold> {
        match slot {
            BandSlot::RuleOut => &mut self.rule_out,
            BandSlot::RuleIn => &mut self.rule_in,
            BandSlot::Review => &mut self.review,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Registry {
    pub tasks: BTreeMap<String, TaskEntry>,
}

impl Registry {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Ok(Self::default());
        }
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading registry {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing registry {}", path.display()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).with_context(|| format!("writing registry {}", path.display()))
    }

    /// Fetch a task's slot; a missing entry is an error (applying never
    /// falls back to re-optimizing).
    pub fn require(&self, task: &str, slot: BandSlot) -> Result<&LockedThreshold> {
        self.tasks
            .get(task)
            .and_then(|e| e.slot(slot))
            .ok_or_else(|| {
                anyhow::anyhow!("registry has no {slot} threshold for task '{task}'")
            })
    }

    /// Insert a locked threshold. Occupied slots are immutable unless
    /// `relock` is passed.
    pub fn lock(&mut self, slot: BandSlot, locked: LockedThreshold, relock: bool) -> Result<()> {
        let entry = self.tasks.entry(locked.task.clone()).or_default();
        let target = entry.slot_mut(slot);
        if target.is_some() && !relock {
            bail!(
                "task '{}' already has a {slot} threshold; pass --relock to replace it",
                locked.task
            );
        }
        *target = Some(locked);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use triagebench_core::policy::ThresholdPolicy;

    fn locked(task: &str, value: f64) -> LockedThreshold {
        LockedThreshold {
            task: task.into(),
            value,
            policy: ThresholdPolicy::RuleOutNpv { min_npv: 1.0 },
            source_cohort: "internal".into(),
            locked_at: "2024-02-12T00:00:00Z".into(),
        }
    }

    #[test]
    fn lock_is_append_only() {
        let mut reg = Registry::default();
        reg.lock(BandSlot::RuleOut, locked("t", 0.1), false).unwrap();
        let err = reg.lock(BandSlot::RuleOut, locked("t", 0.2), false).unwrap_err();
        assert!(err.to_string().contains("--relock"));
        reg.lock(BandSlot::RuleOut, locked("t", 0.2), true).unwrap();
        assert_eq!(reg.require("t", BandSlot::RuleOut).unwrap().value, 0.2);
        // A different slot on the same task is free.
        reg.lock(BandSlot::RuleIn, locked("t", 0.9), false).unwrap();
    }

    #[test]
    fn round_trip_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("locked_thresholds.json");
        let mut reg = Registry::default();
        reg.lock(BandSlot::Review, locked("er", 0.479), false).unwrap();
        reg.save(&path).unwrap();
        let loaded = Registry::load(&path).unwrap();
        assert_eq!(loaded.require("er", BandSlot::Review).unwrap().value, 0.479);
        // Missing entries stay errors.
        assert!(loaded.require("er", BandSlot::RuleOut).is_err());
        assert!(loaded.require("pr", BandSlot::Review).is_err());
    }
}
