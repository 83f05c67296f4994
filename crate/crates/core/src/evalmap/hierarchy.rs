use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Catch-all label raters may pick when nothing in the hierarchy applies.
pub const OTHER: &str = "Other";

const BUNDLED: &str = include_str!("../../data/hierarchy.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchyNode {
    pub label: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<HierarchyNode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchyFile {
    pub v: u32,
    pub roots: Vec<HierarchyNode>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelHierarchy {
    roots: Vec<HierarchyNode>,
    parent: BTreeMap<String, Option<String>>,
}

impl LabelHierarchy {
    pub fn from_roots(roots: Vec<HierarchyNode>) -> Result<Self> {
        fn walk(
            node: &HierarchyNode,
            parent: Option<&str>,
            out: &mut BTreeMap<String, Option<String>>,
        ) -> Result<()> {
            if node.label.is_empty() || node.label == OTHER {
                return Err(Error::Format {
                    what: "label hierarchy",
                    detail: format!("reserved or empty node label {:?}", node.label),
                });
            }
            if out
                .insert(node.label.clone(), parent.map(str::to_string))
                .is_some()
            {
                return Err(Error::Format {
                    what: "label hierarchy",
                    detail: format!("label {:?} appears more than once", node.label),
                });
            }
            node.children
                .iter()
                .try_for_each(|c| walk(c, Some(&node.label), out))
        }
        let mut parent = BTreeMap::new();
        for r in &roots {
            walk(r, None, &mut parent)?;
        }
        Ok(Self { roots, parent })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: HierarchyFile = serde_json::from_str(text)?;
        Self::from_roots(file.roots)
    }

    /// The household-activity tree shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED).expect("bundled hierarchy is valid")
    }

    pub fn roots(&self) -> &[HierarchyNode] {
        &self.roots
    }

    pub fn to_file(&self) -> HierarchyFile {
        HierarchyFile {
            v: 1,
            roots: self.roots.clone(),
        }
    }

    /// True for every node of the tree and for [`OTHER`].
    pub fn contains(&self, label: &str) -> bool {
        label == OTHER || self.parent.contains_key(label)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.parent.keys().map(String::as_str)
    }

    pub fn parent(&self, label: &str) -> Result<Option<&str>> {
        if label == OTHER {
            return Ok(None);
        }
        self.parent
            .get(label)
            .map(|p| p.as_deref())
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Parent of `label`, or `label` itself for roots and [`OTHER`].
    pub fn level_up<'a>(&'a self, label: &'a str) -> Result<&'a str> {
        Ok(self.parent(label)?.unwrap_or(label))
    }

    pub fn is_ancestor(&self, ancestor: &str, label: &str) -> Result<bool> {
        let mut cur = self.parent(label)?;
        while let Some(p) = cur {
            if p == ancestor {
                return Ok(true);
            }
            cur = self.parent(p)?;
        }
        Ok(false)
    }

    pub fn depth(&self, label: &str) -> Result<usize> {
        let mut d = 0;
        let mut cur = self.parent(label)?;
        while let Some(p) = cur {
            d += 1;
            cur = self.parent(p)?;
        }
        Ok(d)
    }
}

impl Default for LabelHierarchy {
    fn default() -> Self {
        Self::bundled()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fridge_levels_up_to_kitchen() {
        let h = LabelHierarchy::bundled();
        assert_eq!(h.level_up("Movement near Fridge").unwrap(), "Movement in Kitchen");
        assert_eq!(h.level_up("Movement near bed").unwrap(), "Movement in Master Bedroom");
        assert_eq!(h.level_up("Single Room Activity").unwrap(), "Single Room Activity");
        assert_eq!(h.level_up(OTHER).unwrap(), OTHER);
        assert!(h.level_up("Juggling").is_err());
    }

    #[test]
    fn repeated_level_up_reaches_a_root() {
        let h = LabelHierarchy::bundled();
        for label in h.labels() {
            let mut cur = label;
            for _ in 0..=h.depth(label).unwrap() {
                cur = h.level_up(cur).unwrap();
            }
            assert!(h.parent(cur).unwrap().is_none(), "{label}");
        }
    }

    #[test]
    fn duplicates_rejected_and_round_trip() {
        let leaf = HierarchyNode {
            label: "a".into(),
            children: vec![],
        };
        assert!(LabelHierarchy::from_roots(vec![leaf.clone(), leaf]).is_err());
        let h = LabelHierarchy::bundled();
        let text = serde_json::to_string(&h.to_file()).unwrap();
        assert_eq!(LabelHierarchy::from_json(&text).unwrap(), h);
    }

    #[test]
    fn ancestry() {
        let h = LabelHierarchy::bundled();
        assert!(h.is_ancestor("Kitchen Activity", "Movement near Stove").unwrap());
        assert!(!h.is_ancestor("Movement near Stove", "Kitchen Activity").unwrap());
    }
}
