//! Versioned JSON road-network files.
//!
//! ```json
//! {
//!   "version": 1,
//!   "name": "demo",
//!   "lanes": [{ "id": 0, "centerline": [0, 0, 100, 0], "width": 3.5,
//!               "left_marking": [...], "right_marking": [...],
//!               "successor": null, "is_merge_lane": false, "merge_end_s": null,
//!               "left_neighbor": null, "right_neighbor": null }],
//!   "spawn_points": { "start": { "lane": 0, "x": 0, "y": 0, "theta": 0 } }
//! }
//! ```

use std::fmt;
use std::path::Path;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{
    Adjacency, LaneBuilder, LaneId, LaneSpec, MarkingSegment, RoadError, RoadNetwork, SpawnPoint,
};
use crate::geom::Vec2;

pub const FILE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    version: u32,
    name: String,
    lanes: Vec<LaneEntry>,
    spawn_points: SpawnTable,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LaneEntry {
    id: LaneId,
    centerline: Vec<f64>,
    width: f64,
    left_marking: Vec<MarkingSegment>,
    right_marking: Vec<MarkingSegment>,
    #[serde(default)]
    successor: Option<LaneId>,
    #[serde(default)]
    is_merge_lane: bool,
    #[serde(default)]
    merge_end_s: Option<f64>,
    #[serde(default)]
    left_neighbor: Option<LaneId>,
    #[serde(default)]
    right_neighbor: Option<LaneId>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpawnEntry {
    lane: LaneId,
    x: f64,
    y: f64,
    theta: f64,
}

/// Spawn points keyed by name; duplicate keys are a load error rather than
/// silently overwritten.
struct SpawnTable(Vec<SpawnPoint>);

impl Serialize for SpawnTable {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        let mut map = ser.serialize_map(Some(self.0.len()))?;
        for sp in &self.0 {
            map.serialize_entry(
                &sp.name,
                &SpawnEntry {
                    lane: sp.lane,
                    x: sp.x,
                    y: sp.y,
                    theta: sp.theta,
                },
            )?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for SpawnTable {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = SpawnTable;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map of spawn point names to poses")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<SpawnTable, A::Error> {
                let mut out: Vec<SpawnPoint> = Vec::new();
                while let Some((name, e)) = access.next_entry::<String, SpawnEntry>()? {
                    if out.iter().any(|s| s.name == name) {
                        return Err(serde::de::Error::custom(format!(
                            "duplicate spawn point `{name}`"
                        )));
                    }
                    out.push(SpawnPoint {
                        name,
                        lane: e.lane,
                        x: e.x,
                        y: e.y,
                        theta: e.theta,
                    });
                }
                Ok(SpawnTable(out))
            }
        }
        de.deserialize_map(V)
    }
}

pub fn network_from_str(text: &str) -> Result<RoadNetwork, RoadError> {
    // check the version before the full schema so future files fail with a clear message
    #[derive(Deserialize)]
    struct Probe {
        version: Option<serde_json::Value>,
    }
    let probe: Probe = serde_json::from_str(text).map_err(|e| RoadError::Format(e.to_string()))?;
    match probe.version.as_ref().and_then(|v| v.as_u64()) {
        Some(v) if v == FILE_VERSION as u64 => {}
        Some(v) => return Err(RoadError::UnsupportedVersion(v.min(u32::MAX as u64) as u32)),
        None => return Err(RoadError::Format("missing integer `version`".into())),
    }
    let file: NetworkFile =
        serde_json::from_str(text).map_err(|e| RoadError::Format(e.to_string()))?;
    let mut lanes = Vec::with_capacity(file.lanes.len());
    let mut adjacency = Vec::with_capacity(file.lanes.len());
    for entry in file.lanes {
        if entry.centerline.len() % 2 != 0 {
            return Err(RoadError::InvalidLane {
                lane: entry.id,
                reason: "centerline must hold an even number of coordinates".into(),
            });
        }
        let centerline = entry
            .centerline
            .chunks(2)
            .map(|c| Vec2::new(c[0], c[1]))
            .collect();
        lanes.push(LaneSpec::new(LaneBuilder {
            id: entry.id,
            centerline,
            width: entry.width,
            left_marking: entry.left_marking,
            right_marking: entry.right_marking,
            successor: entry.successor,
            is_merge_lane: entry.is_merge_lane,
            merge_end_s: entry.merge_end_s,
        })?);
        adjacency.push(Adjacency {
            left: entry.left_neighbor,
            right: entry.right_neighbor,
        });
    }
    RoadNetwork::new(file.name, lanes, adjacency, file.spawn_points.0)
}

pub fn network_to_string(net: &RoadNetwork) -> String {
    let lanes = net
        .lanes()
        .iter()
        .map(|l| {
            let adj = net.adjacency(l.id());
            LaneEntry {
                id: l.id(),
                centerline: l.centerline().iter().flat_map(|p| [p.x, p.y]).collect(),
                width: l.width(),
                left_marking: l.left_marking.clone(),
                right_marking: l.right_marking.clone(),
                successor: l.successor(),
                is_merge_lane: l.is_merge_lane(),
                merge_end_s: l.merge_end_s(),
                left_neighbor: adj.left,
                right_neighbor: adj.right,
            }
        })
        .collect();
    let file = NetworkFile {
        version: FILE_VERSION,
        name: net.name().to_string(),
        lanes,
        spawn_points: SpawnTable(net.spawn_points().to_vec()),
    };
    serde_json::to_string_pretty(&file).expect("road network serializes")
}

pub fn load_network(path: &Path) -> Result<RoadNetwork, RoadError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RoadError::Format(format!("{}: {e}", path.display())))?;
    network_from_str(&text)
}
