//! Canonical claim relations mapped onto KG edge types.
//!
//! File format:
//!
//! ```text
//! # comment
//! treats = Compound:treats:Disease, GNBR::T::Compound:Disease
//! causes = Compound:causes:SideEffect
//!
//! [safety]
//! treats
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

use super::KgStore;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct RelationMap {
    canonical_to_kg: BTreeMap<String, BTreeSet<String>>,
    safety_relations: BTreeSet<String>,
}

/// Folds a claim relation to its canonical key: lower case, words joined by `_`.
pub fn canonical_key(relation: &str) -> String {
    relation
        .to_lowercase()
        .split(|c: char| c.is_whitespace() || c == '-' || c == '_')
        .filter(|w| !w.is_empty())
        .collect::<Vec<_>>()
        .join("_")
}

impl RelationMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, canonical: &str, kg_relations: &[&str]) {
        self.canonical_to_kg
            .entry(canonical_key(canonical))
            .or_default()
            .extend(kg_relations.iter().map(|s| s.to_string()));
    }

    pub fn mark_safety(&mut self, canonical: &str) -> Result<()> {
        let key = canonical_key(canonical);
        if !self.canonical_to_kg.contains_key(&key) {
            return Err(Error::Config(format!("safety relation {key:?} is not mapped")));
        }
        self.safety_relations.insert(key);
        Ok(())
    }

    /// DRKG edge types for the six default canonical relations. Use
    /// [`RelationMap::retain_known`] to drop edge types a store lacks.
    pub fn drkg_default() -> Self {
        let mut map = RelationMap::new();
        map.insert(
            "treats",
            &[
                "Hetionet::CtD::Compound:Disease",
                "GNBR::T::Compound:Disease",
                "DRUGBANK::treats::Compound:Disease",
            ],
        );
        map.insert(
            "causes",
            &["Hetionet::CcSE::Compound:Side Effect", "GNBR::Sa::Compound:Disease"],
        );
        map.insert("side_effect_of", &["Hetionet::CcSE::Compound:Side Effect"]);
        map.insert(
            "associated_with",
            &["Hetionet::DaG::Disease:Gene", "GNBR::J::Gene:Disease"],
        );
        map.insert("contraindicated_with", &["GNBR::Sa::Compound:Disease"]);
        map.insert("interacts_with", &["DRUGBANK::ddi-interactor-in::Compound:Compound"]);
        for key in ["treats", "side_effect_of", "contraindicated_with"] {
            map.mark_safety(key).expect("default safety relations are mapped");
        }
        map
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut map = RelationMap::new();
        let mut pending_safety = Vec::new();
        let mut in_safety = false;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                match line {
                    "[safety]" => in_safety = true,
                    "[relations]" => in_safety = false,
                    other => {
                        return Err(Error::schema(path, line_no, format!("unknown section {other}")))
                    }
                }
                continue;
            }
            if in_safety {
                for name in line.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    pending_safety.push((line_no, name.to_string()));
                }
                continue;
            }
            let Some((key, values)) = line.split_once('=') else {
                return Err(Error::schema(path, line_no, "expected `relation = kg_rel, ...`"));
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::schema(path, line_no, "empty canonical relation"));
            }
            let names: Vec<&str> = values.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
            if names.is_empty() {
                return Err(Error::schema(path, line_no, format!("{key:?} maps to no KG relation")));
            }
            map.insert(key, &names);
        }
        for (line_no, name) in pending_safety {
            map.mark_safety(&name)
                .map_err(|e| Error::schema(path, line_no, e.to_string()))?;
        }
        Ok(map)
    }

    /// Fails when a mapped KG relation is missing from `store`.
    pub fn check_against(&self, store: &KgStore) -> Result<()> {
        for (key, names) in &self.canonical_to_kg {
            for name in names {
                if store.relation_index(name).is_none() {
                    return Err(Error::Config(format!(
                        "relation map entry {key:?} names unknown KG relation {name:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Drops KG relation names that `store` does not define, and canonical
    /// relations left with no image.
    pub fn retain_known(&mut self, store: &KgStore) {
        for names in self.canonical_to_kg.values_mut() {
            names.retain(|n| store.relation_index(n).is_some());
        }
        self.canonical_to_kg.retain(|_, names| !names.is_empty());
        let keys: BTreeSet<String> = self.canonical_to_kg.keys().cloned().collect();
        self.safety_relations.retain(|k| keys.contains(k));
    }

    /// Canonical key of a claim relation when it is mapped.
    pub fn canonicalize(&self, relation: &str) -> Option<&str> {
        let key = canonical_key(relation);
        self.canonical_to_kg.get_key_value(&key).map(|(k, _)| k.as_str())
    }

    pub fn kg_relations(&self, canonical: &str) -> impl Iterator<Item = &str> {
        self.canonical_to_kg
            .get(canonical)
            .into_iter()
            .flatten()
            .map(String::as_str)
    }

    pub fn is_safety(&self, canonical: &str) -> bool {
        self.safety_relations.contains(canonical)
    }

    pub fn canonical_relations(&self) -> impl Iterator<Item = &str> {
        self.canonical_to_kg.keys().map(String::as_str)
    }

    pub fn safety_relations(&self) -> impl Iterator<Item = &str> {
        self.safety_relations.iter().map(String::as_str)
    }
}
