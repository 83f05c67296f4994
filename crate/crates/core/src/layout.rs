//! Floor plans and replay payloads consumed by the annotation front end.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LAYOUT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub name: String,
    /// Vertices in normalized `[0, 1]²` coordinates.
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseLayout {
    pub v: u32,
    pub dataset: String,
    pub rooms: Vec<Polygon>,
    pub sensors: BTreeMap<String, [f64; 2]>,
    #[serde(default)]
    pub furniture: Vec<Polygon>,
}

fn in_unit_square(p: &[f64; 2]) -> bool {
    p.iter().all(|c| c.is_finite() && (0.0..=1.0).contains(c))
}

impl HouseLayout {
    pub fn validate(&self) -> Result<()> {
        let bad = |detail: String| Error::Format {
            what: "house layout",
            detail,
        };
        for poly in self.rooms.iter().chain(&self.furniture) {
            if poly.points.len() < 3 {
                return Err(bad(format!("polygon {:?} has fewer than 3 vertices", poly.name)));
            }
            if !poly.points.iter().all(in_unit_square) {
                return Err(bad(format!("polygon {:?} leaves the unit square", poly.name)));
            }
        }
        if let Some((id, _)) = self.sensors.iter().find(|(_, p)| !in_unit_square(p)) {
            return Err(bad(format!("sensor {id} placed outside the unit square")));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let layout: Self = serde_json::from_str(text)?;
        layout.validate()?;
        Ok(layout)
    }

    /// Sensors in `ids` that have no position on this plan.
    pub fn unplaced<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Vec<String> {
        let mut out: Vec<String> = ids
            .into_iter()
            .filter(|id| !self.sensors.contains_key(*id))
            .map(str::to_string)
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

/// JSON schema describing [`HouseLayout`] files.
pub const LAYOUT_SCHEMA: &str = include_str!("../data/layout.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Activation {
    pub sensor_id: String,
    pub value: String,
    pub offset_ms: i64,
}
