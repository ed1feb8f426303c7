//! The three-level region tree (state -> county -> block group).
//!
//! Built from three GeoJSON FeatureCollections using census property names
//! (`STATEFP`, `COUNTYFP`, `STATE_FIPS`, `CNTY_FIPS`, `TRACT`, `BLKGRP`,
//! `FIPS`), from the synthetic generator, or from the binary `FMCB` file.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::geometry::{polygon_bbox, BBox, GeometryError, Point, PolygonGeometry};

#[derive(Debug, Error)]
pub enum HierarchyError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: malformed GeoJSON: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{path}: feature #{index}: missing property {name}")]
    MissingProperty {
        path: PathBuf,
        index: usize,
        name: &'static str,
    },
    #[error("{path}: feature #{index}: property {name} = {value:?} is not a valid code")]
    BadProperty {
        path: PathBuf,
        index: usize,
        name: &'static str,
        value: String,
    },
    #[error("{path}: feature #{index}: {source}")]
    Geometry {
        path: PathBuf,
        index: usize,
        source: GeometryError,
    },
    #[error("{path}: feature #{index}: unsupported or missing geometry")]
    UnsupportedGeometry { path: PathBuf, index: usize },
    #[error("{path}: feature #{index}: duplicate {level} code {code}")]
    Duplicate {
        path: PathBuf,
        index: usize,
        level: &'static str,
        code: String,
    },
    #[error("{path}: feature #{index}: references {level} {code}, which does not exist")]
    Orphan {
        path: PathBuf,
        index: usize,
        level: &'static str,
        code: String,
    },
    #[error("{path}: no {level} features")]
    EmptyLevel { path: PathBuf, level: &'static str },
    #[error("not a hierarchy file (bad magic)")]
    BadMagic,
    #[error("unsupported hierarchy file version {0}")]
    UnsupportedVersion(u16),
    #[error("hierarchy file truncated")]
    Truncated,
    #[error("corrupt hierarchy file: {0}")]
    Corrupt(String),
}

pub type Result<T, E = HierarchyError> = std::result::Result<T, E>;

/// Twelve-character block group code: state(2) county(3) tract(6) group(1).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fips12([u8; 12]);

impl Fips12 {
    pub fn compose(state: u64, county: u64, tract: u64, group: u64) -> Option<Self> {
        format!("{state:02}{county:03}{tract:06}{group:01}")
            .parse()
            .ok()
    }

    pub fn as_str(&self) -> &str {
        // Only ASCII digits are admitted by FromStr.
        std::str::from_utf8(&self.0).unwrap_or_default()
    }

    pub fn as_bytes(&self) -> &[u8; 12] {
        &self.0
    }

    pub fn state_code(&self) -> u64 {
        self.as_str()[..2].parse().unwrap_or_default()
    }

    pub fn county_code(&self) -> u64 {
        self.as_str()[2..5].parse().unwrap_or_default()
    }
}

impl FromStr for Fips12 {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        let bytes: [u8; 12] = s.as_bytes().try_into().map_err(|_| ())?;
        if bytes.iter().all(u8::is_ascii_digit) {
            Ok(Fips12(bytes))
        } else {
            Err(())
        }
    }
}

impl fmt::Display for Fips12 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for Fips12 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fips12({})", self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionNode {
    /// Level-local code: state FIPS, county FIPS, or tract*10 + block group.
    pub fp_code: u64,
    /// Present on leaves only.
    pub fips12: Option<Fips12>,
    pub bbox: BBox,
    pub geometry: PolygonGeometry,
    pub children: Vec<RegionNode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Counts {
    pub states: usize,
    pub counties: usize,
    pub blocks: usize,
}

/// Path to a leaf: state index, county index within the state, block index
/// within the county.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LeafRef {
    pub state: u32,
    pub county: u32,
    pub block: u32,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegionHierarchy {
    pub states: Vec<RegionNode>,
}

impl RegionHierarchy {
    pub fn counts(&self) -> Counts {
        let counties = self.states.iter().map(|s| s.children.len()).sum();
        let blocks = self
            .states
            .iter()
            .flat_map(|s| &s.children)
            .map(|c| c.children.len())
            .sum();
        Counts {
            states: self.states.len(),
            counties,
            blocks,
        }
    }

    /// All leaves in ascending (state, county, block) order. The position in
    /// this list is the global leaf index.
    pub fn leaves(&self) -> Vec<LeafRef> {
        let mut out = Vec::new();
        for (s, state) in self.states.iter().enumerate() {
            for (c, county) in state.children.iter().enumerate() {
                out.extend((0..county.children.len()).map(|b| LeafRef {
                    state: s as u32,
                    county: c as u32,
                    block: b as u32,
                }));
            }
        }
        out
    }

    pub fn leaf(&self, r: LeafRef) -> &RegionNode {
        &self.states[r.state as usize].children[r.county as usize].children[r.block as usize]
    }

    /// Union of the state boxes.
    pub fn extent(&self) -> Option<BBox> {
        self.states.iter().map(|s| s.bbox).reduce(|a, b| {
            BBox::new(
                a.x_min.min(b.x_min),
                a.x_max.max(b.x_max),
                a.y_min.min(b.y_min),
                a.y_max.max(b.y_max),
            )
        })
    }

    /// Checks depth, leaf codes and code uniqueness.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for s in &self.states {
            if s.fips12.is_some() {
                return Err(HierarchyError::Corrupt("state carries a leaf code".into()));
            }
            for c in &s.children {
                if c.fips12.is_some() {
                    return Err(HierarchyError::Corrupt("county carries a leaf code".into()));
                }
                for b in &c.children {
                    let fips = b
                        .fips12
                        .ok_or_else(|| HierarchyError::Corrupt("leaf without code".into()))?;
                    if !b.children.is_empty() {
                        return Err(HierarchyError::Corrupt("leaf has children".into()));
                    }
                    if !seen.insert(fips) {
                        return Err(HierarchyError::Corrupt(format!(
                            "duplicate leaf code {fips}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn canonicalize(&mut self) {
        self.states.sort_by_key(|s| s.fp_code);
        for s in &mut self.states {
            s.children.sort_by_key(|c| c.fp_code);
            for c in &mut s.children {
                c.children.sort_by_key(|b| b.fp_code);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// GeoJSON ingestion

#[derive(Deserialize)]
struct FeatureCollection {
    features: Vec<Feature>,
}

#[derive(Deserialize)]
struct Feature {
    #[serde(default)]
    properties: Option<serde_json::Map<String, Value>>,
    #[serde(default)]
    geometry: Option<Value>,
    #[serde(default)]
    bbox: Option<Vec<f64>>,
}

struct Source<'a> {
    path: &'a Path,
    features: Vec<Feature>,
}

impl<'a> Source<'a> {
    fn read(path: &'a Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| HierarchyError::Io {
            path: path.to_owned(),
            source,
        })?;
        let fc: FeatureCollection =
            serde_json::from_str(&text).map_err(|source| HierarchyError::Json {
                path: path.to_owned(),
                source,
            })?;
        Ok(Source {
            path,
            features: fc.features,
        })
    }

    fn prop(&self, index: usize, name: &'static str) -> Result<String> {
        let missing = || HierarchyError::MissingProperty {
            path: self.path.to_owned(),
            index,
            name,
        };
        match self.features[index]
            .properties
            .as_ref()
            .and_then(|p| p.get(name))
        {
            Some(Value::String(s)) => Ok(s.trim().to_owned()),
            Some(Value::Number(n)) => Ok(n.to_string()),
            _ => Err(missing()),
        }
    }

    fn code(&self, index: usize, name: &'static str) -> Result<u64> {
        let raw = self.prop(index, name)?;
        raw.parse().map_err(|_| HierarchyError::BadProperty {
            path: self.path.to_owned(),
            index,
            name,
            value: raw,
        })
    }

    fn shape(&self, index: usize) -> Result<(PolygonGeometry, BBox)> {
        let f = &self.features[index];
        let unsupported = || HierarchyError::UnsupportedGeometry {
            path: self.path.to_owned(),
            index,
        };
        let rings = f
            .geometry
            .as_ref()
            .and_then(geojson_rings)
            .ok_or_else(unsupported)?;
        let geometry =
            PolygonGeometry::from_rings(&rings).map_err(|source| HierarchyError::Geometry {
                path: self.path.to_owned(),
                index,
                source,
            })?;
        let bbox = match f.bbox.as_deref() {
            Some(&[x0, y0, x1, y1]) => BBox::new(x0, x1, y0, y1),
            Some(&[x0, y0, _, x1, y1, _]) => BBox::new(x0, x1, y0, y1),
            _ => polygon_bbox(&geometry).map_err(|source| HierarchyError::Geometry {
                path: self.path.to_owned(),
                index,
                source,
            })?,
        };
        Ok((geometry, bbox))
    }

    fn duplicate(
        &self,
        index: usize,
        level: &'static str,
        code: impl fmt::Display,
    ) -> HierarchyError {
        HierarchyError::Duplicate {
            path: self.path.to_owned(),
            index,
            level,
            code: code.to_string(),
        }
    }

    fn orphan(&self, index: usize, level: &'static str, code: impl fmt::Display) -> HierarchyError {
        HierarchyError::Orphan {
            path: self.path.to_owned(),
            index,
            level,
            code: code.to_string(),
        }
    }
}

/// Rings of a Polygon or MultiPolygon geometry; all rings of all parts are
/// returned together (even-odd semantics merges them).
fn geojson_rings(geometry: &Value) -> Option<Vec<Vec<[f64; 2]>>> {
    fn ring(v: &Value) -> Option<Vec<[f64; 2]>> {
        v.as_array()?
            .iter()
            .map(|pos| {
                let pos = pos.as_array()?;
                Some([pos.first()?.as_f64()?, pos.get(1)?.as_f64()?])
            })
            .collect()
    }
    fn polygon(v: &Value) -> Option<Vec<Vec<[f64; 2]>>> {
        v.as_array()?.iter().map(ring).collect()
    }
    let coords = geometry.get("coordinates")?;
    match geometry.get("type")?.as_str()? {
        "Polygon" => polygon(coords),
        "MultiPolygon" => {
            let parts: Option<Vec<_>> = coords.as_array()?.iter().map(polygon).collect();
            Some(parts?.into_iter().flatten().collect())
        }
        _ => None,
    }
}

/// Builds the hierarchy from three GeoJSON FeatureCollections, attaching
/// counties to states by `STATEFP` and block groups to counties by
/// (`STATE_FIPS`, `CNTY_FIPS`). Children are ordered by ascending code.
pub fn load_boundaries(
    state_path: impl AsRef<Path>,
    county_path: impl AsRef<Path>,
    block_path: impl AsRef<Path>,
) -> Result<RegionHierarchy> {
    let states_src = Source::read(state_path.as_ref())?;
    let counties_src = Source::read(county_path.as_ref())?;
    let blocks_src = Source::read(block_path.as_ref())?;

    for (src, level) in [(&states_src, "state"), (&blocks_src, "block group")] {
        if src.features.is_empty() {
            return Err(HierarchyError::EmptyLevel {
                path: src.path.to_owned(),
                level,
            });
        }
    }

    let mut states = Vec::with_capacity(states_src.features.len());
    let mut state_slot: HashMap<u64, usize> = HashMap::new();
    for i in 0..states_src.features.len() {
        let fp = states_src.code(i, "STATEFP")?;
        if state_slot.insert(fp, states.len()).is_some() {
            return Err(states_src.duplicate(i, "state", fp));
        }
        let (geometry, bbox) = states_src.shape(i)?;
        states.push(RegionNode {
            fp_code: fp,
            fips12: None,
            bbox,
            geometry,
            children: Vec::new(),
        });
    }

    let mut county_slot: HashMap<(u64, u64), (usize, usize)> = HashMap::new();
    for i in 0..counties_src.features.len() {
        let state_fp = counties_src.code(i, "STATEFP")?;
        let fp = counties_src.code(i, "COUNTYFP")?;
        let &s = state_slot
            .get(&state_fp)
            .ok_or_else(|| counties_src.orphan(i, "state", state_fp))?;
        let (geometry, bbox) = counties_src.shape(i)?;
        let children = &mut states[s].children;
        if county_slot
            .insert((state_fp, fp), (s, children.len()))
            .is_some()
        {
            return Err(counties_src.duplicate(i, "county", format!("{state_fp:02}{fp:03}")));
        }
        children.push(RegionNode {
            fp_code: fp,
            fips12: None,
            bbox,
            geometry,
            children: Vec::new(),
        });
    }

    let mut seen_fips = HashSet::new();
    for i in 0..blocks_src.features.len() {
        let state_fp = blocks_src.code(i, "STATE_FIPS")?;
        let county_fp = blocks_src.code(i, "CNTY_FIPS")?;
        let tract = blocks_src.prop(i, "TRACT")?;
        let group = blocks_src.prop(i, "BLKGRP")?;
        let fp_text = format!("{tract}{group}");
        let fp: u64 = fp_text.parse().map_err(|_| HierarchyError::BadProperty {
            path: blocks_src.path.to_owned(),
            index: i,
            name: "TRACT/BLKGRP",
            value: fp_text.clone(),
        })?;
        let fips_raw = blocks_src.prop(i, "FIPS")?;
        let fips: Fips12 = fips_raw
            .parse()
            .ok()
            .filter(|f: &Fips12| f.state_code() == state_fp && f.county_code() == county_fp)
            .ok_or_else(|| HierarchyError::BadProperty {
                path: blocks_src.path.to_owned(),
                index: i,
                name: "FIPS",
                value: fips_raw.clone(),
            })?;
        if !seen_fips.insert(fips) {
            return Err(blocks_src.duplicate(i, "block group", fips));
        }
        let &(s, c) = county_slot.get(&(state_fp, county_fp)).ok_or_else(|| {
            blocks_src.orphan(i, "county", format!("{state_fp:02}{county_fp:03}"))
        })?;
        let (geometry, bbox) = blocks_src.shape(i)?;
        states[s].children[c].children.push(RegionNode {
            fp_code: fp,
            fips12: Some(fips),
            bbox,
            geometry,
            children: Vec::new(),
        });
    }

    let mut h = RegionHierarchy { states };
    h.canonicalize();
    Ok(h)
}

fn ring_to_json(geometry: &PolygonGeometry) -> Value {
    let rings: Vec<Value> = geometry
        .rings()
        .into_iter()
        .map(|mut ring| {
            ring.push(ring[0]);
            ring.into_iter().map(|[x, y]| json!([x, y])).collect()
        })
        .collect();
    json!({ "type": "Polygon", "coordinates": rings })
}

fn feature(properties: Value, node: &RegionNode) -> Value {
    let b = node.bbox;
    json!({
        "type": "Feature",
        "bbox": [b.x_min, b.y_min, b.x_max, b.y_max],
        "properties": properties,
        "geometry": ring_to_json(&node.geometry),
    })
}

/// Writes the hierarchy as the three GeoJSON files `load_boundaries` reads.
pub fn write_geojson(
    h: &RegionHierarchy,
    state_path: impl AsRef<Path>,
    county_path: impl AsRef<Path>,
    block_path: impl AsRef<Path>,
) -> Result<()> {
    let (mut states, mut counties, mut blocks) = (Vec::new(), Vec::new(), Vec::new());
    for s in &h.states {
        let sfp = format!("{:02}", s.fp_code);
        states.push(feature(json!({ "STATEFP": sfp }), s));
        for c in &s.children {
            let cfp = format!("{:03}", c.fp_code);
            counties.push(feature(json!({ "STATEFP": sfp, "COUNTYFP": cfp }), c));
            for b in &c.children {
                let fips = b.fips12.map(|f| f.to_string()).unwrap_or_default();
                let tract = fips.get(5..11).unwrap_or_default();
                let group = fips.get(11..12).unwrap_or_default();
                let props = json!({
                    "STATE_FIPS": sfp,
                    "CNTY_FIPS": cfp,
                    "TRACT": tract,
                    "BLKGRP": group,
                    "FIPS": fips,
                });
                blocks.push(feature(props, b));
            }
        }
    }
    for (path, features) in [
        (state_path.as_ref(), states),
        (county_path.as_ref(), counties),
        (block_path.as_ref(), blocks),
    ] {
        let text =
            serde_json::to_string(&json!({ "type": "FeatureCollection", "features": features }))
                .expect("JSON values always serialize");
        fs::write(path, text).map_err(|source| HierarchyError::Io {
            path: path.to_owned(),
            source,
        })?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Synthetic data

/// South-west corner of synthetic maps.
pub const SYNTH_ORIGIN: [f64; 2] = [-100.0, 30.0];
/// Edge length of one undistorted synthetic block group, in degrees.
pub const SYNTH_PITCH: f64 = 0.05;

fn grid_dims(n: usize) -> (usize, usize) {
    let cols = (n as f64).sqrt().ceil() as usize;
    (cols, n.div_ceil(cols))
}

/// A jittered lattice map: every block group is a quadrilateral of lattice
/// cells, counties and states are rectangular unions of those cells with the
/// same (jittered) vertices, so each level tiles its parent exactly. Jitter
/// is a fraction of the pitch; with `jitter > 0` neighbouring boxes overlap.
///
/// Panics if the counts do not fit the FIPS digit widths or
/// `jitter` is outside `[0, 0.5)`.
pub fn generate_synthetic(
    seed: u64,
    n_states: usize,
    counties_per_state: usize,
    blocks_per_county: usize,
    jitter: f64,
) -> RegionHierarchy {
    assert!(n_states >= 1 && counties_per_state >= 1 && blocks_per_county >= 1);
    assert!((1..=99).contains(&n_states) && counties_per_state <= 999);
    assert!(blocks_per_county <= 9 * 9999);
    assert!((0.0..0.5).contains(&jitter), "jitter must be in [0, 0.5)");

    let (scols, srows) = grid_dims(n_states);
    let (ccols, crows) = grid_dims(counties_per_state);
    let (bcols, brows) = grid_dims(blocks_per_county);
    let width = scols * ccols * bcols;
    let height = srows * crows * brows;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vertex: Vec<[f64; 2]> = (0..(width + 1) * (height + 1))
        .map(|k| {
            let (ix, iy) = (k % (width + 1), k / (width + 1));
            let (dx, dy) = if jitter > 0.0 {
                (
                    rng.gen_range(-jitter..jitter),
                    rng.gen_range(-jitter..jitter),
                )
            } else {
                (0.0, 0.0)
            };
            [
                SYNTH_ORIGIN[0] + (ix as f64 + dx) * SYNTH_PITCH,
                SYNTH_ORIGIN[1] + (iy as f64 + dy) * SYNTH_PITCH,
            ]
        })
        .collect();
    let at = |ix: usize, iy: usize| vertex[iy * (width + 1) + ix];

    // Counter-clockwise walk around the lattice rectangle [x0, x1] x [y0, y1].
    let rect = |x0: usize, y0: usize, x1: usize, y1: usize| -> RegionParts {
        let mut ring = Vec::new();
        ring.extend((x0..x1).map(|x| at(x, y0)));
        ring.extend((y0..y1).map(|y| at(x1, y)));
        ring.extend((x0 + 1..=x1).rev().map(|x| at(x, y1)));
        ring.extend((y0 + 1..=y1).rev().map(|y| at(x0, y)));
        let geometry = PolygonGeometry::from_rings(&[ring]).expect("lattice ring is closed");
        let bbox = polygon_bbox(&geometry).expect("lattice ring is non-empty");
        RegionParts { geometry, bbox }
    };

    let mut states = Vec::with_capacity(n_states);
    for s in 0..n_states {
        let sx = (s % scols) * ccols * bcols;
        let sy = (s / scols) * crows * brows;
        let state_fp = s as u64 + 1;
        let mut counties = Vec::with_capacity(counties_per_state);
        for c in 0..counties_per_state {
            let cx = sx + (c % ccols) * bcols;
            let cy = sy + (c / ccols) * brows;
            let county_fp = c as u64 + 1;
            let blocks: Vec<RegionNode> = (0..blocks_per_county)
                .map(|b| {
                    let bx = cx + b % bcols;
                    let by = cy + b / bcols;
                    let tract = 100 + (b / 9) as u64;
                    let group = (b % 9) as u64 + 1;
                    let parts = rect(bx, by, bx + 1, by + 1);
                    RegionNode {
                        fp_code: tract * 10 + group,
                        fips12: Fips12::compose(state_fp, county_fp, tract, group),
                        bbox: parts.bbox,
                        geometry: parts.geometry,
                        children: Vec::new(),
                    }
                })
                .collect();
            let geometry = union_outline(&blocks);
            counties.push(RegionNode {
                fp_code: county_fp,
                fips12: None,
                bbox: polygon_bbox(&geometry).expect("county outline is non-empty"),
                geometry,
                children: blocks,
            });
        }
        let state_geom = union_outline(&counties);
        let bbox = polygon_bbox(&state_geom).expect("state outline is non-empty");
        states.push(RegionNode {
            fp_code: state_fp,
            fips12: None,
            bbox,
            geometry: state_geom,
            children: counties,
        });
    }
    RegionHierarchy { states }
}

struct RegionParts {
    geometry: PolygonGeometry,
    bbox: BBox,
}

type EdgeKey = ((u64, u64), (u64, u64));

/// Outline of a set of regions that tile without overlap: edges shared by
/// two regions cancel, the rest form the boundary rings.
fn union_outline(parts: &[RegionNode]) -> PolygonGeometry {
    let key = |p: [f64; 2]| (p[0].to_bits(), p[1].to_bits());
    // Keyed by the endpoint bit patterns in canonical order.
    let mut edge_count: HashMap<EdgeKey, (usize, [f64; 2], [f64; 2])> = HashMap::new();
    let mut order = Vec::new();
    for part in parts {
        for (a, b) in part.geometry.segments() {
            let (ka, kb) = (key(a), key(b));
            let canon = if ka <= kb { (ka, kb) } else { (kb, ka) };
            let slot = edge_count.entry(canon).or_insert_with(|| {
                order.push(canon);
                (0, a, b)
            });
            slot.0 += 1;
        }
    }
    let mut nodes = Vec::new();
    let mut index: HashMap<(u64, u64), u32> = HashMap::new();
    let mut edges = Vec::new();
    for canon in order {
        let (count, a, b) = edge_count[&canon];
        if count != 1 {
            continue;
        }
        let mut id = |p: [f64; 2]| {
            *index.entry(key(p)).or_insert_with(|| {
                nodes.push(p);
                nodes.len() as u32 - 1
            })
        };
        let (ia, ib) = (id(a), id(b));
        edges.push([ia, ib]);
    }
    let outline = PolygonGeometry::new(nodes, edges).expect("outline of a tiling is closed");
    PolygonGeometry::from_rings(&outline.rings()).expect("traced rings are closed")
}

/// Uniform points over the hierarchy's extent.
pub fn uniform_points(h: &RegionHierarchy, n: usize, seed: u64) -> Vec<Point> {
    let Some(b) = h.extent() else {
        return Vec::new();
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            Point::new(
                rng.gen_range(b.x_min..=b.x_max),
                rng.gen_range(b.y_min..=b.y_max),
            )
        })
        .collect()
}

/// Points drawn around a few Gaussian-ish population centres (sum of
/// uniforms), clamped to the extent.
pub fn clustered_points(h: &RegionHierarchy, n: usize, seed: u64) -> Vec<Point> {
    let Some(b) = h.extent() else {
        return Vec::new();
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres: Vec<(f64, f64, f64)> = (0..8)
        .map(|_| {
            (
                rng.gen_range(b.x_min..=b.x_max),
                rng.gen_range(b.y_min..=b.y_max),
                rng.gen_range(0.02..0.15) * (b.x_max - b.x_min).max(b.y_max - b.y_min),
            )
        })
        .collect();
    (0..n)
        .map(|_| {
            let (cx, cy, r) = centres[rng.gen_range(0..centres.len())];
            let mut g = || (0..4).map(|_| rng.gen_range(-1.0..1.0)).sum::<f64>() * 0.5 * r;
            let (dx, dy) = (g(), g());
            Point::new(
                (cx + dx).clamp(b.x_min, b.x_max),
                (cy + dy).clamp(b.y_min, b.y_max),
            )
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Binary format

const HIERARCHY_MAGIC: &[u8; 4] = b"FMCB";
const HIERARCHY_VERSION: u16 = 1;

pub(crate) struct ByteWriter(pub(crate) Vec<u8>);

impl ByteWriter {
    pub(crate) fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    pub(crate) fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    pub(crate) fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    pub(crate) fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    pub(crate) fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    pub(crate) fn bytes(&mut self, v: &[u8]) {
        self.0.extend_from_slice(v);
    }
}

pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        ByteReader { buf }
    }

    pub(crate) fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        if self.buf.len() < n {
            return None;
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Some(head)
    }

    pub(crate) fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|b| b[0])
    }
    pub(crate) fn u16(&mut self) -> Option<u16> {
        self.take(2)
            .map(|b| u16::from_le_bytes(b.try_into().unwrap()))
    }
    pub(crate) fn u32(&mut self) -> Option<u32> {
        self.take(4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }
    pub(crate) fn u64(&mut self) -> Option<u64> {
        self.take(8)
            .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }
    pub(crate) fn f64(&mut self) -> Option<f64> {
        self.take(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }
}

fn write_node(w: &mut ByteWriter, node: &RegionNode) {
    w.u64(node.fp_code);
    match node.fips12 {
        Some(f) => {
            w.u8(1);
            w.bytes(f.as_bytes());
        }
        None => {
            w.u8(0);
            w.bytes(&[0; 12]);
        }
    }
    for v in [
        node.bbox.x_min,
        node.bbox.x_max,
        node.bbox.y_min,
        node.bbox.y_max,
    ] {
        w.f64(v);
    }
    w.u32(node.geometry.nodes().len() as u32);
    for &[x, y] in node.geometry.nodes() {
        w.f64(x);
        w.f64(y);
    }
    w.u32(node.geometry.edges().len() as u32);
    for &[i, j] in node.geometry.edges() {
        w.u32(i);
        w.u32(j);
    }
    w.u32(node.children.len() as u32);
    for child in &node.children {
        write_node(w, child);
    }
}

fn read_node(r: &mut ByteReader<'_>, depth: usize) -> Result<RegionNode> {
    use HierarchyError::Truncated;
    let fp_code = r.u64().ok_or(Truncated)?;
    let has_fips = r.u8().ok_or(Truncated)?;
    let raw = r.take(12).ok_or(Truncated)?;
    let fips12 = match has_fips {
        0 => None,
        1 => Some(
            std::str::from_utf8(raw)
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| HierarchyError::Corrupt("invalid leaf code".into()))?,
        ),
        other => return Err(HierarchyError::Corrupt(format!("bad leaf flag {other}"))),
    };
    let mut bb = [0.0; 4];
    for v in &mut bb {
        *v = r.f64().ok_or(Truncated)?;
    }
    let n_nodes = r.u32().ok_or(Truncated)? as usize;
    let raw = r
        .take(n_nodes.checked_mul(16).ok_or(Truncated)?)
        .ok_or(Truncated)?;
    let nodes = raw
        .chunks_exact(16)
        .map(|c| {
            [
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            ]
        })
        .collect();
    let n_edges = r.u32().ok_or(Truncated)? as usize;
    let raw = r
        .take(n_edges.checked_mul(8).ok_or(Truncated)?)
        .ok_or(Truncated)?;
    let edges = raw
        .chunks_exact(8)
        .map(|c| {
            [
                u32::from_le_bytes(c[..4].try_into().unwrap()),
                u32::from_le_bytes(c[4..].try_into().unwrap()),
            ]
        })
        .collect();
    let geometry =
        PolygonGeometry::new(nodes, edges).map_err(|e| HierarchyError::Corrupt(e.to_string()))?;
    let n_children = r.u32().ok_or(Truncated)? as usize;
    if depth == 2 && n_children != 0 {
        return Err(HierarchyError::Corrupt("leaf has children".into()));
    }
    let children = (0..n_children)
        .map(|_| read_node(r, depth + 1))
        .collect::<Result<_>>()?;
    Ok(RegionNode {
        fp_code,
        fips12,
        bbox: BBox::new(bb[0], bb[1], bb[2], bb[3]),
        geometry,
        children,
    })
}

pub fn encode_hierarchy(h: &RegionHierarchy) -> Vec<u8> {
    let mut w = ByteWriter(Vec::new());
    w.bytes(HIERARCHY_MAGIC);
    w.u16(HIERARCHY_VERSION);
    let counts = h.counts();
    w.u32(counts.states as u32);
    w.u32(counts.counties as u32);
    w.u32(counts.blocks as u32);
    for s in &h.states {
        write_node(&mut w, s);
    }
    w.0
}

pub fn decode_hierarchy(buf: &[u8]) -> Result<RegionHierarchy> {
    let mut r = ByteReader::new(buf);
    let magic = r.take(4).ok_or(HierarchyError::Truncated)?;
    if magic != HIERARCHY_MAGIC {
        return Err(HierarchyError::BadMagic);
    }
    let version = r.u16().ok_or(HierarchyError::Truncated)?;
    if version != HIERARCHY_VERSION {
        return Err(HierarchyError::UnsupportedVersion(version));
    }
    let mut declared = [0usize; 3];
    for d in &mut declared {
        *d = r.u32().ok_or(HierarchyError::Truncated)? as usize;
    }
    let states = (0..declared[0])
        .map(|_| read_node(&mut r, 0))
        .collect::<Result<_>>()?;
    if !r.is_empty() {
        return Err(HierarchyError::Corrupt("trailing bytes".into()));
    }
    let h = RegionHierarchy { states };
    let c = h.counts();
    if [c.states, c.counties, c.blocks] != declared {
        return Err(HierarchyError::Corrupt(
            "node counts do not match header".into(),
        ));
    }
    h.validate()?;
    Ok(h)
}

pub fn save_hierarchy(h: &RegionHierarchy, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_hierarchy(h)).map_err(|source| HierarchyError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn load_hierarchy(path: impl AsRef<Path>) -> Result<RegionHierarchy> {
    let path = path.as_ref();
    let buf = fs::read(path).map_err(|source| HierarchyError::Io {
        path: path.to_owned(),
        source,
    })?;
    decode_hierarchy(&buf)
}
