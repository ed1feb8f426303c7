//! Cell-approximation index.
//!
//! Every block group polygon is approximated by non-overlapping cells of a
//! planar lon/lat quadtree. A cell is either *interior* (wholly inside one
//! polygon, so a hit needs no polygon test) or *boundary* (touched by one or
//! more polygon outlines). Cells are keyed by 64-bit [`CellId`]s and stored
//! in a radix trie that consumes one, two or four quadtree levels per node.
//!
//! Exact queries refine boundary hits with the crossing-number kernel.
//! Approximate covers subdivide boundary cells until their diagonal is below
//! a tolerance and answer boundary hits with a pre-selected polygon, so no
//! polygon test is ever run.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::batch::{run_chunked, DEFAULT_CHUNK};
use crate::geometry::{points_in_polygon, BBox, Point, PolygonGeometry};
use crate::hierarchy::{ByteReader, ByteWriter, LeafRef, RegionHierarchy};
use crate::simple_mapper::{Assignment, AssignmentResult};

pub const MAX_LEVEL: u8 = 30;

const DOMAIN: BBox = BBox::new(-180.0, 180.0, -90.0, 90.0);

#[derive(Debug, Error)]
pub enum CellError {
    #[error("point ({lon}, {lat}) is outside the lon/lat domain")]
    OutsideDomain { lon: f64, lat: f64 },
    #[error("level {0} exceeds the maximum of {MAX_LEVEL}")]
    BadLevel(u8),
    #[error("epsilon {epsilon} is below the finest cell diagonal {floor:e}")]
    EpsilonTooSmall { epsilon: f64, floor: f64 },
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("cell {new} overlaps cell {existing} already in the index")]
    Overlap { new: CellId, existing: CellId },
    #[error("approximate queries need an approximate cover")]
    IncompatibleMode,
    #[error("index refers to {index} leaves but the hierarchy has {hierarchy}")]
    LeafCountMismatch { index: usize, hierarchy: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("not an index file (bad magic)")]
    BadMagic,
    #[error("unsupported index file version {0}")]
    UnsupportedVersion(u16),
    #[error("index file truncated")]
    Truncated,
    #[error("corrupt index file: {0}")]
    Corrupt(String),
}

pub type Result<T, E = CellError> = std::result::Result<T, E>;

// ---------------------------------------------------------------------------
// Cell ids

/// Quadtree cell: the path from the root (two bits per level, children
/// ordered SW, SE, NW, NE) in the high bits, then one sentinel bit, then
/// zeros. The root is `1 << 63`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellId(u64);

impl fmt::Debug for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CellId({:#018x}@{})", self.0, self.level())
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#018x}", self.0)
    }
}

/// Spreads the low 32 bits of `v` to the even bit positions.
#[inline]
fn spread_bits(v: u64) -> u64 {
    let mut x = v & 0xffff_ffff;
    x = (x | (x << 16)) & 0x0000_ffff_0000_ffff;
    x = (x | (x << 8)) & 0x00ff_00ff_00ff_00ff;
    x = (x | (x << 4)) & 0x0f0f_0f0f_0f0f_0f0f;
    x = (x | (x << 2)) & 0x3333_3333_3333_3333;
    (x | (x << 1)) & 0x5555_5555_5555_5555
}

#[inline]
fn gather_bits(v: u64) -> u64 {
    let mut x = v & 0x5555_5555_5555_5555;
    x = (x | (x >> 1)) & 0x3333_3333_3333_3333;
    x = (x | (x >> 2)) & 0x0f0f_0f0f_0f0f_0f0f;
    x = (x | (x >> 4)) & 0x00ff_00ff_00ff_00ff;
    x = (x | (x >> 8)) & 0x0000_ffff_0000_ffff;
    (x | (x >> 16)) & 0x0000_0000_ffff_ffff
}

impl CellId {
    pub const ROOT: CellId = CellId(1 << 63);

    pub const fn from_raw(raw: u64) -> Self {
        CellId(raw)
    }

    pub const fn raw(self) -> u64 {
        self.0
    }

    /// Exactly one sentinel bit at an even offset from the top, level <= 30.
    pub fn is_valid(self) -> bool {
        let tz = self.0.trailing_zeros();
        self.0 != 0 && tz >= 3 && (63 - tz).is_multiple_of(2)
    }

    /// Cell of column `i`, row `j` on the `2^level x 2^level` grid.
    pub fn from_ij(level: u8, i: u32, j: u32) -> Self {
        debug_assert!(level <= MAX_LEVEL);
        let path = spread_bits(i as u64) | (spread_bits(j as u64) << 1);
        let sentinel_pos = 63 - 2 * level as u32;
        let path_bits = if level == 0 {
            0
        } else {
            path << (sentinel_pos + 1)
        };
        CellId(path_bits | (1u64 << sentinel_pos))
    }

    /// The level-`level` cell whose half-open rectangle holds `p`; the
    /// east and north domain edges belong to the last column and row.
    pub fn from_point(p: Point, level: u8) -> Result<Self> {
        if level > MAX_LEVEL {
            return Err(CellError::BadLevel(level));
        }
        if !DOMAIN.contains_closed(p) {
            return Err(CellError::OutsideDomain {
                lon: p.lon,
                lat: p.lat,
            });
        }
        let n = (1u64 << MAX_LEVEL) as f64;
        let max = (1u32 << MAX_LEVEL) - 1;
        let i = (((p.lon + 180.0) / 360.0 * n) as u32).min(max);
        let j = (((p.lat + 90.0) / 180.0 * n) as u32).min(max);
        Ok(CellId::from_ij(MAX_LEVEL, i, j).parent_at(level))
    }

    #[inline]
    fn lsb(self) -> u64 {
        self.0 & self.0.wrapping_neg()
    }

    #[inline]
    pub fn level(self) -> u8 {
        ((63 - self.0.trailing_zeros()) / 2) as u8
    }

    pub fn is_leaf(self) -> bool {
        self.level() == MAX_LEVEL
    }

    /// Strips the last two path bits. The root is its own parent.
    pub fn parent(self) -> Self {
        if self.level() == 0 {
            return self;
        }
        let new_lsb = self.lsb() << 2;
        CellId((self.0 & new_lsb.wrapping_neg()) | new_lsb)
    }

    /// Ancestor at `level` (or `self` if already coarser).
    pub fn parent_at(self, level: u8) -> Self {
        if level >= self.level() {
            return self;
        }
        let new_lsb = 1u64 << (63 - 2 * level as u32);
        CellId((self.0 & new_lsb.wrapping_neg()) | new_lsb)
    }

    /// Child `k` in SW, SE, NW, NE order.
    pub fn child(self, k: u8) -> Self {
        debug_assert!(self.level() < MAX_LEVEL && k < 4);
        let lsb = self.lsb();
        let new_lsb = lsb >> 2;
        CellId(self.0 - lsb + (k as u64 * 2 + 1) * new_lsb)
    }

    pub fn children(self) -> [CellId; 4] {
        [self.child(0), self.child(1), self.child(2), self.child(3)]
    }

    pub fn range_min(self) -> u64 {
        self.0 - (self.lsb() - 1)
    }

    pub fn range_max(self) -> u64 {
        self.0 + (self.lsb() - 1)
    }

    /// True when `self` equals `other` or contains it.
    pub fn contains(self, other: CellId) -> bool {
        other.0 >= self.range_min() && other.0 <= self.range_max()
    }

    /// Two path bits of `level` (1-based), or of the padding beyond the path.
    #[inline]
    fn digits(self, first_level: u32, count: u32) -> usize {
        let last = first_level + count - 1;
        ((self.0 >> (64 - 2 * last)) & ((1u64 << (2 * count)) - 1)) as usize
    }

    /// Column and row on this cell's level grid.
    pub fn ij(self) -> (u32, u32) {
        let level = self.level() as u32;
        if level == 0 {
            return (0, 0);
        }
        let path = self.0 >> (64 - 2 * level);
        (gather_bits(path) as u32, gather_bits(path >> 1) as u32)
    }

    pub fn rect(self) -> BBox {
        let level = self.level() as i32;
        let (i, j) = self.ij();
        let w = 360.0 * 0.5f64.powi(level);
        let h = 180.0 * 0.5f64.powi(level);
        BBox::new(
            -180.0 + i as f64 * w,
            -180.0 + (i + 1) as f64 * w,
            -90.0 + j as f64 * h,
            -90.0 + (j + 1) as f64 * h,
        )
    }
}

/// Diagonal of any cell at `level`, in degrees.
pub fn level_diagonal(level: u8) -> f64 {
    360.0f64.hypot(180.0) * 0.5f64.powi(level as i32)
}

/// Coarsest level whose cells have diagonal at most `epsilon`.
pub fn level_for_epsilon(epsilon: f64) -> Result<u8> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(CellError::BadEpsilon(epsilon));
    }
    (0..=MAX_LEVEL)
        .find(|&l| level_diagonal(l) <= epsilon)
        .ok_or(CellError::EpsilonTooSmall {
            epsilon,
            floor: level_diagonal(MAX_LEVEL),
        })
}

// ---------------------------------------------------------------------------
// Classification

/// A leaf polygon with its global leaf index.
#[derive(Debug, Clone, Copy)]
pub struct IndexedPolygon<'a> {
    pub id: u32,
    pub geometry: &'a PolygonGeometry,
    pub bbox: BBox,
}

pub fn leaf_polygons(h: &RegionHierarchy) -> Vec<IndexedPolygon<'_>> {
    h.leaves()
        .into_iter()
        .enumerate()
        .map(|(id, r)| {
            let leaf = h.leaf(r);
            IndexedPolygon {
                id: id as u32,
                geometry: &leaf.geometry,
                bbox: leaf.bbox,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CellClass {
    Outside,
    Interior(u32),
    /// Polygons whose outline touches the cell, plus any polygon containing
    /// the cell outright; ascending.
    BoundaryLike(Vec<u32>),
}

/// Classifies one cell against a set of polygons.
///
/// A cell no outline touches lies wholly inside or outside each polygon, so
/// its centre decides. Overlapping polygons that both contain such a cell
/// make it `BoundaryLike` rather than silently dropping it.
pub fn classify_cell(cell: CellId, polygons: &[IndexedPolygon<'_>]) -> CellClass {
    let rect = cell.rect();
    let center = rect.center();
    let mut touching = BTreeSet::new();
    let mut containing = Vec::new();
    for p in polygons {
        if !p.bbox.intersects(&rect) {
            continue;
        }
        if p.geometry
            .segments()
            .any(|(a, b)| rect.intersects_segment(a, b))
        {
            touching.insert(p.id);
        } else if p.geometry.contains(center) {
            containing.push(p.id);
        }
    }
    match (touching.is_empty(), containing.as_slice()) {
        (true, []) => CellClass::Outside,
        (true, &[only]) => CellClass::Interior(only),
        _ => {
            touching.extend(containing);
            CellClass::BoundaryLike(touching.into_iter().collect())
        }
    }
}

// ---------------------------------------------------------------------------
// Cover

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CellKind {
    Interior(u32),
    Boundary { candidates: Vec<u32>, deemed: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellEntry {
    pub id: CellId,
    pub kind: CellKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoverMode {
    Exact,
    /// Boundary cells are refined until their diagonal is at most `epsilon`
    /// degrees.
    Approx {
        epsilon: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverParams {
    /// Boundary cells stop here in exact mode.
    pub max_level: u8,
    pub mode: CoverMode,
}

impl CoverParams {
    pub fn exact(max_level: u8) -> Self {
        CoverParams {
            max_level,
            mode: CoverMode::Exact,
        }
    }

    pub fn approx(epsilon: f64) -> Self {
        CoverParams {
            max_level: MAX_LEVEL,
            mode: CoverMode::Approx { epsilon },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellCover {
    /// Sorted by id; no entry contains another.
    pub entries: Vec<CellEntry>,
    pub params: CoverParams,
    /// Number of leaf polygons the entries refer to.
    pub n_polygons: usize,
}

#[derive(Clone, Copy)]
struct Segment {
    poly: u32,
    a: [f64; 2],
    b: [f64; 2],
}

struct CoverBuilder<'a> {
    polygons: &'a [IndexedPolygon<'a>],
    stop_level: u8,
}

/// Subtrees shallower than this are built in parallel.
const PARALLEL_DEPTH: u8 = 3;

impl CoverBuilder<'_> {
    fn build(&self, cell: CellId, segments: &[Segment], polys: &[u32]) -> Vec<CellEntry> {
        let rect = cell.rect();
        let polys: Vec<u32> = polys
            .iter()
            .copied()
            .filter(|&p| self.polygons[p as usize].bbox.intersects(&rect))
            .collect();
        if polys.is_empty() {
            return Vec::new();
        }
        let segments: Vec<Segment> = segments
            .iter()
            .copied()
            .filter(|s| rect.intersects_segment(s.a, s.b))
            .collect();
        let center = rect.center();

        let mut touching: Vec<u32> = segments.iter().map(|s| s.poly).collect();
        touching.sort_unstable();
        touching.dedup();
        let containing: Vec<u32> = polys
            .iter()
            .copied()
            .filter(|p| touching.binary_search(p).is_err())
            .filter(|&p| self.polygons[p as usize].geometry.contains(center))
            .collect();

        if touching.is_empty() {
            return match containing.as_slice() {
                [] => Vec::new(),
                &[only] => vec![CellEntry {
                    id: cell,
                    kind: CellKind::Interior(only),
                }],
                // Overlapping polygons: subdividing cannot separate them.
                _ => vec![self.boundary(cell, containing, center)],
            };
        }

        if cell.level() >= self.stop_level {
            let mut candidates = touching;
            candidates.extend(containing);
            candidates.sort_unstable();
            return vec![self.boundary(cell, candidates, center)];
        }

        let children = cell.children();
        if cell.level() < PARALLEL_DEPTH {
            children
                .par_iter()
                .map(|&c| self.build(c, &segments, &polys))
                .collect::<Vec<_>>()
                .concat()
        } else {
            let mut out = Vec::new();
            for c in children {
                out.extend(self.build(c, &segments, &polys));
            }
            out
        }
    }

    /// Deemed polygon: first candidate containing the centre, else the
    /// candidate whose box centre is nearest.
    fn boundary(&self, cell: CellId, candidates: Vec<u32>, center: Point) -> CellEntry {
        let deemed = candidates
            .iter()
            .copied()
            .find(|&p| self.polygons[p as usize].geometry.contains(center))
            .unwrap_or_else(|| {
                candidates
                    .iter()
                    .copied()
                    .min_by(|&a, &b| {
                        let da = dist2(self.polygons[a as usize].bbox.center(), center);
                        let db = dist2(self.polygons[b as usize].bbox.center(), center);
                        da.total_cmp(&db)
                    })
                    .expect("boundary cell has candidates")
            });
        CellEntry {
            id: cell,
            kind: CellKind::Boundary { candidates, deemed },
        }
    }
}

fn dist2(a: Point, b: Point) -> f64 {
    (a.lon - b.lon).powi(2) + (a.lat - b.lat).powi(2)
}

/// Builds the cell approximation of `polygons` by recursive subdivision from
/// the root cell.
pub fn build_cover_for(polygons: &[IndexedPolygon<'_>], params: CoverParams) -> Result<CellCover> {
    if params.max_level > MAX_LEVEL {
        return Err(CellError::BadLevel(params.max_level));
    }
    let stop_level = match params.mode {
        CoverMode::Exact => params.max_level,
        CoverMode::Approx { epsilon } => level_for_epsilon(epsilon)?,
    };
    debug_assert!(polygons.iter().enumerate().all(|(k, p)| p.id as usize == k));
    let segments: Vec<Segment> = polygons
        .iter()
        .flat_map(|p| {
            p.geometry
                .segments()
                .map(move |(a, b)| Segment { poly: p.id, a, b })
        })
        .collect();
    let all: Vec<u32> = (0..polygons.len() as u32).collect();
    let builder = CoverBuilder {
        polygons,
        stop_level,
    };
    let entries = builder.build(CellId::ROOT, &segments, &all);
    debug_assert!(entries.windows(2).all(|w| w[0].id < w[1].id));
    Ok(CellCover {
        entries,
        params,
        n_polygons: polygons.len(),
    })
}

pub fn build_cover(h: &RegionHierarchy, params: CoverParams) -> Result<CellCover> {
    build_cover_for(&leaf_polygons(h), params)
}

// ---------------------------------------------------------------------------
// Trie

/// Quadtree levels consumed per trie level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Fanout {
    F1,
    F2,
    F4,
}

impl Fanout {
    pub const ALL: [Fanout; 3] = [Fanout::F1, Fanout::F2, Fanout::F4];

    pub fn levels(self) -> u32 {
        match self {
            Fanout::F1 => 1,
            Fanout::F2 => 2,
            Fanout::F4 => 4,
        }
    }

    pub fn slots(self) -> usize {
        1 << (2 * self.levels())
    }

    /// Upper bound on node visits per lookup.
    pub fn max_depth(self) -> u32 {
        (MAX_LEVEL as u32).div_ceil(self.levels())
    }

    pub fn from_levels(levels: u32) -> Option<Self> {
        match levels {
            1 => Some(Fanout::F1),
            2 => Some(Fanout::F2),
            4 => Some(Fanout::F4),
            _ => None,
        }
    }
}

impl fmt::Display for Fanout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F{}", self.levels())
    }
}

const ENTRY_TAG: u32 = 1 << 31;

/// Radix tree over cell ids. Node `n` owns `slots[n * fanout..(n + 1) *
/// fanout]`; a slot is empty (0), a child node index, or an entry index
/// tagged with the top bit. An entry whose level falls inside a node's span
/// occupies every slot its path prefix covers, so coarse cells live close
/// to the root.
#[derive(Debug, Clone)]
pub struct TrieIndex {
    fanout: Fanout,
    slots: Vec<u32>,
    root_entry: Option<u32>,
}

impl TrieIndex {
    pub fn new(fanout: Fanout) -> Self {
        TrieIndex {
            fanout,
            slots: vec![0; fanout.slots()],
            root_entry: None,
        }
    }

    pub fn fanout(&self) -> Fanout {
        self.fanout
    }

    pub fn node_count(&self) -> usize {
        self.slots.len() / self.fanout.slots()
    }

    fn existing(&self, slot: u32, entries: &[CellEntry], fallback: CellId) -> CellId {
        if slot & ENTRY_TAG != 0 {
            entries[(slot & !ENTRY_TAG) as usize].id
        } else {
            fallback
        }
    }

    /// Inserts `entries[index]`, failing if it overlaps a stored cell.
    pub fn insert(&mut self, entries: &[CellEntry], index: u32) -> Result<()> {
        let id = entries[index as usize].id;
        let level = id.level() as u32;
        let f = self.fanout.levels();
        let fan = self.fanout.slots();
        if let Some(root) = self.root_entry {
            return Err(CellError::Overlap {
                new: id,
                existing: entries[root as usize].id,
            });
        }
        if level == 0 {
            if self.slots.iter().any(|&s| s != 0) {
                return Err(CellError::Overlap {
                    new: id,
                    existing: CellId::ROOT,
                });
            }
            self.root_entry = Some(index);
            return Ok(());
        }
        let depth = (level - 1) / f;
        let mut node = 0usize;
        for d in 0..depth {
            let k = node * fan + id.digits(d * f + 1, f);
            match self.slots[k] {
                0 => {
                    let child = self.node_count();
                    self.slots.resize(self.slots.len() + fan, 0);
                    self.slots[k] = child as u32;
                    node = child;
                }
                s if s & ENTRY_TAG != 0 => {
                    return Err(CellError::Overlap {
                        new: id,
                        existing: self.existing(s, entries, id),
                    })
                }
                s => node = s as usize,
            }
        }
        let used = level - depth * f;
        let free = f - used;
        let prefix = id.digits(depth * f + 1, used) << (2 * free);
        let start = node * fan + prefix;
        let span = &mut self.slots[start..start + (1 << (2 * free))];
        if let Some(&s) = span.iter().find(|&&s| s != 0) {
            let existing = if s & ENTRY_TAG != 0 {
                entries[(s & !ENTRY_TAG) as usize].id
            } else {
                id
            };
            return Err(CellError::Overlap { new: id, existing });
        }
        span.fill(index | ENTRY_TAG);
        Ok(())
    }

    /// Entry index of the stored cell containing `id`, plus the number of
    /// nodes visited.
    #[inline]
    pub fn lookup_counting(&self, id: CellId) -> (Option<u32>, u32) {
        if self.root_entry.is_some() {
            return (self.root_entry, 0);
        }
        let f = self.fanout.levels();
        let fan = self.fanout.slots();
        let mut node = 0usize;
        let mut visits = 0;
        loop {
            let s = self.slots[node * fan + id.digits(visits * f + 1, f)];
            visits += 1;
            if s == 0 {
                return (None, visits);
            }
            if s & ENTRY_TAG != 0 {
                return (Some(s & !ENTRY_TAG), visits);
            }
            if visits >= self.fanout.max_depth() {
                return (None, visits);
            }
            node = s as usize;
        }
    }

    #[inline]
    pub fn lookup(&self, id: CellId) -> Option<u32> {
        self.lookup_counting(id).0
    }
}

pub fn build_trie(cover: &CellCover, fanout: Fanout) -> Result<TrieIndex> {
    let mut trie = TrieIndex::new(fanout);
    for k in 0..cover.entries.len() as u32 {
        trie.insert(&cover.entries, k)?;
    }
    Ok(trie)
}

// ---------------------------------------------------------------------------
// Queries

/// Cover, trie and the leaf table the polygon references point into.
#[derive(Debug, Clone)]
pub struct CellIndex {
    pub cover: CellCover,
    pub trie: TrieIndex,
    leaves: Vec<LeafRef>,
    table: Vec<Assignment>,
    /// Per entry: the interior leaf, or `BOUNDARY_TAG | k` for the `k`-th
    /// boundary entry.
    codes: Vec<u32>,
    deemed: Vec<u32>,
    cand_ptr: Vec<u32>,
    cands: Vec<u32>,
}

const BOUNDARY_TAG: u32 = 1 << 31;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryMode {
    Exact,
    Approx,
}

impl CellIndex {
    pub fn build(h: &RegionHierarchy, params: CoverParams, fanout: Fanout) -> Result<Self> {
        let cover = build_cover(h, params)?;
        Self::from_cover(h, cover, fanout)
    }

    pub fn from_cover(h: &RegionHierarchy, cover: CellCover, fanout: Fanout) -> Result<Self> {
        let leaves = h.leaves();
        if leaves.len() != cover.n_polygons {
            return Err(CellError::LeafCountMismatch {
                index: cover.n_polygons,
                hierarchy: leaves.len(),
            });
        }
        let trie = build_trie(&cover, fanout)?;
        let table = leaves
            .iter()
            .map(|&r| Assignment {
                state: Some(r.state),
                county: Some(r.county),
                block: Some(r.block),
            })
            .collect();
        let mut codes = Vec::with_capacity(cover.entries.len());
        let mut deemed = Vec::new();
        let mut cand_ptr = vec![0u32];
        let mut cands = Vec::new();
        for e in &cover.entries {
            match &e.kind {
                CellKind::Interior(p) => codes.push(*p),
                CellKind::Boundary {
                    candidates,
                    deemed: d,
                } => {
                    codes.push(BOUNDARY_TAG | deemed.len() as u32);
                    deemed.push(*d);
                    cands.extend_from_slice(candidates);
                    cand_ptr.push(cands.len() as u32);
                }
            }
        }
        Ok(CellIndex {
            cover,
            trie,
            leaves,
            table,
            codes,
            deemed,
            cand_ptr,
            cands,
        })
    }

    /// The cover's natural query mode.
    pub fn default_mode(&self) -> QueryMode {
        match self.cover.params.mode {
            CoverMode::Exact => QueryMode::Exact,
            CoverMode::Approx { .. } => QueryMode::Approx,
        }
    }

    pub fn entry_for(&self, p: Point) -> Option<&CellEntry> {
        let id = CellId::from_point(p, MAX_LEVEL).ok()?;
        self.trie
            .lookup(id)
            .map(|k| &self.cover.entries[k as usize])
    }

    #[inline]
    fn assignment(&self, leaf: u32) -> Assignment {
        self.table[leaf as usize]
    }
}

/// Assigns points with one trie lookup each; exact mode refines boundary
/// hits with batched polygon tests in ascending leaf order.
pub fn query(
    index: &CellIndex,
    h: &RegionHierarchy,
    points: &[Point],
    mode: QueryMode,
) -> Result<AssignmentResult> {
    if mode == QueryMode::Approx && index.default_mode() == QueryMode::Exact {
        return Err(CellError::IncompatibleMode);
    }
    let mut out = Vec::with_capacity(points.len());
    // (point, boundary entry) pairs awaiting refinement.
    let mut pending: Vec<(u32, u32)> = Vec::new();
    for (i, &p) in points.iter().enumerate() {
        let code = CellId::from_point(p, MAX_LEVEL)
            .ok()
            .and_then(|id| index.trie.lookup(id))
            .map(|k| index.codes[k as usize]);
        out.push(match code {
            None => Assignment::default(),
            Some(c) if c & BOUNDARY_TAG == 0 => index.assignment(c),
            Some(c) if mode == QueryMode::Approx => {
                index.assignment(index.deemed[(c & !BOUNDARY_TAG) as usize])
            }
            Some(c) => {
                pending.push((i as u32, c & !BOUNDARY_TAG));
                Assignment::default()
            }
        });
    }

    let mut evaluations = 0u64;
    let mut calls = 0u64;
    if !pending.is_empty() {
        // Bucket (leaf, point) pairs by leaf; points stay ascending within
        // a bucket.
        let n_leaves = index.leaves.len();
        let mut start = vec![0u32; n_leaves + 1];
        let cands_of = |b: u32| {
            &index.cands
                [index.cand_ptr[b as usize] as usize..index.cand_ptr[b as usize + 1] as usize]
        };
        for &(_, b) in &pending {
            for &c in cands_of(b) {
                start[c as usize + 1] += 1;
            }
        }
        for l in 0..n_leaves {
            start[l + 1] += start[l];
        }
        let mut fill = start.clone();
        let mut bucketed = vec![0u32; start[n_leaves] as usize];
        for &(i, b) in &pending {
            for &c in cands_of(b) {
                bucketed[fill[c as usize] as usize] = i;
                fill[c as usize] += 1;
            }
        }

        let mut resolved = vec![false; points.len()];
        let mut batch: Vec<u32> = Vec::new();
        let mut batch_pts: Vec<Point> = Vec::new();
        for leaf in 0..n_leaves {
            let group = &bucketed[start[leaf] as usize..start[leaf + 1] as usize];
            batch.clear();
            batch.extend(group.iter().copied().filter(|&i| !resolved[i as usize]));
            if batch.is_empty() {
                continue;
            }
            batch_pts.clear();
            batch_pts.extend(batch.iter().map(|&i| points[i as usize]));
            let geometry = &h.leaf(index.leaves[leaf]).geometry;
            let inside = points_in_polygon(&batch_pts, geometry);
            evaluations += batch.len() as u64;
            calls += 1;
            for (&i, hit) in batch.iter().zip(inside) {
                if hit {
                    resolved[i as usize] = true;
                    out[i as usize] = index.assignment(leaf as u32);
                }
            }
        }
    }
    Ok(AssignmentResult {
        assignments: out,
        pip_point_evaluations: evaluations,
        pip_calls: calls,
    })
}

/// [`query`] over fixed-size partitions on `threads` workers.
pub fn query_parallel(
    index: &CellIndex,
    h: &RegionHierarchy,
    points: &[Point],
    mode: QueryMode,
    threads: usize,
    chunk: usize,
) -> Result<AssignmentResult> {
    let parts = run_chunked(points, threads, chunk, |part| query(index, h, part, mode));
    Ok(AssignmentResult::concat(
        parts.into_iter().collect::<Result<Vec<_>>>()?,
    ))
}

pub fn query_threads(
    index: &CellIndex,
    h: &RegionHierarchy,
    points: &[Point],
    mode: QueryMode,
    threads: usize,
) -> Result<AssignmentResult> {
    query_parallel(index, h, points, mode, threads, DEFAULT_CHUNK)
}

// ---------------------------------------------------------------------------
// Size accounting

/// Declared-layout sizes: a trie slot is 4 bytes; an entry is an 8-byte id,
/// a 1-byte kind and 4 bytes per polygon reference, plus a 4-byte deemed
/// reference and a 4-byte candidate count on boundary cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub struct IndexStats {
    pub interior_cells: usize,
    pub boundary_cells: usize,
    pub boundary_refs: usize,
    pub nodes: usize,
    pub node_bytes: usize,
    pub entry_bytes: usize,
    pub bytes: usize,
}

pub fn index_stats(trie: &TrieIndex, cover: &CellCover) -> IndexStats {
    let mut s = IndexStats::default();
    for e in &cover.entries {
        match &e.kind {
            CellKind::Interior(_) => {
                s.interior_cells += 1;
                s.entry_bytes += 8 + 1 + 4;
            }
            CellKind::Boundary { candidates, .. } => {
                s.boundary_cells += 1;
                s.boundary_refs += candidates.len();
                s.entry_bytes += 8 + 1 + 4 + 4 + 4 * candidates.len();
            }
        }
    }
    s.nodes = if cover.entries.is_empty() {
        0
    } else {
        trie.node_count()
    };
    s.node_bytes = s.nodes * trie.fanout().slots() * 4;
    s.bytes = s.node_bytes + s.entry_bytes;
    s
}

// ---------------------------------------------------------------------------
// Index file

const INDEX_MAGIC: &[u8; 4] = b"FMCI";
const INDEX_VERSION: u16 = 1;

pub fn encode_index(index: &CellIndex) -> Vec<u8> {
    let cover = &index.cover;
    let mut w = ByteWriter(Vec::new());
    w.bytes(INDEX_MAGIC);
    w.u16(INDEX_VERSION);
    match cover.params.mode {
        CoverMode::Exact => {
            w.u8(0);
            w.f64(0.0);
        }
        CoverMode::Approx { epsilon } => {
            w.u8(1);
            w.f64(epsilon);
        }
    }
    w.u8(cover.params.max_level);
    w.u8(index.trie.fanout().levels() as u8);
    w.u32(cover.n_polygons as u32);
    w.u64(cover.entries.len() as u64);
    for e in &cover.entries {
        w.u64(e.id.raw());
        match &e.kind {
            CellKind::Interior(p) => {
                w.u8(0);
                w.u32(*p);
            }
            CellKind::Boundary { candidates, deemed } => {
                w.u8(1);
                w.u32(*deemed);
                w.u32(candidates.len() as u32);
                for &c in candidates {
                    w.u32(c);
                }
            }
        }
    }
    w.0
}

pub fn decode_index(buf: &[u8], h: &RegionHierarchy) -> Result<CellIndex> {
    use CellError::{Corrupt, Truncated};
    let mut r = ByteReader::new(buf);
    if r.take(4).ok_or(Truncated)? != INDEX_MAGIC {
        return Err(CellError::BadMagic);
    }
    let version = r.u16().ok_or(Truncated)?;
    if version != INDEX_VERSION {
        return Err(CellError::UnsupportedVersion(version));
    }
    let mode_tag = r.u8().ok_or(Truncated)?;
    let epsilon = r.f64().ok_or(Truncated)?;
    let mode = match mode_tag {
        0 => CoverMode::Exact,
        1 => CoverMode::Approx { epsilon },
        t => return Err(Corrupt(format!("unknown mode {t}"))),
    };
    let max_level = r.u8().ok_or(Truncated)?;
    let fanout = Fanout::from_levels(r.u8().ok_or(Truncated)? as u32)
        .ok_or_else(|| Corrupt("unknown fanout".into()))?;
    let n_polygons = r.u32().ok_or(Truncated)? as usize;
    let n_entries = r.u64().ok_or(Truncated)? as usize;
    let check_ref = |p: u32| {
        if (p as usize) < n_polygons {
            Ok(p)
        } else {
            Err(Corrupt(format!("polygon reference {p} out of range")))
        }
    };
    let mut entries = Vec::with_capacity(n_entries.min(buf.len() / 13));
    for _ in 0..n_entries {
        let id = CellId::from_raw(r.u64().ok_or(Truncated)?);
        if !id.is_valid() {
            return Err(Corrupt(format!("invalid cell id {id}")));
        }
        let kind = match r.u8().ok_or(Truncated)? {
            0 => CellKind::Interior(check_ref(r.u32().ok_or(Truncated)?)?),
            1 => {
                let deemed = check_ref(r.u32().ok_or(Truncated)?)?;
                let n = r.u32().ok_or(Truncated)? as usize;
                let candidates = (0..n)
                    .map(|_| check_ref(r.u32().ok_or(Truncated)?))
                    .collect::<Result<Vec<_>>>()?;
                if !candidates.contains(&deemed) {
                    return Err(Corrupt("deemed polygon is not a candidate".into()));
                }
                CellKind::Boundary { candidates, deemed }
            }
            t => return Err(Corrupt(format!("unknown cell kind {t}"))),
        };
        entries.push(CellEntry { id, kind });
    }
    if !r.is_empty() {
        return Err(Corrupt("trailing bytes".into()));
    }
    if !entries.windows(2).all(|w| w[0].id < w[1].id) {
        return Err(Corrupt("entries are not sorted".into()));
    }
    let cover = CellCover {
        entries,
        params: CoverParams { max_level, mode },
        n_polygons,
    };
    CellIndex::from_cover(h, cover, fanout)
}

pub fn save_index(index: &CellIndex, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_index(index)).map_err(|source| CellError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn load_index(path: impl AsRef<Path>, h: &RegionHierarchy) -> Result<CellIndex> {
    let path = path.as_ref();
    let buf = fs::read(path).map_err(|source| CellError::Io {
        path: path.to_owned(),
        source,
    })?;
    decode_index(&buf, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{generate_synthetic, uniform_points};
    use crate::simple_mapper::{assign, Mode};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Bisects the domain one level at a time.
    fn bisect_oracle(p: Point, level: u8) -> u64 {
        let (mut x0, mut x1, mut y0, mut y1) = (-180.0, 180.0, -90.0, 90.0);
        let mut id = 0u64;
        for l in 1..=level as u32 {
            let (mx, my) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
            let east = p.lon >= mx;
            let north = p.lat >= my;
            if east {
                x0 = mx
            } else {
                x1 = mx
            }
            if north {
                y0 = my
            } else {
                y1 = my
            }
            id |= ((north as u64) << 1 | east as u64) << (64 - 2 * l);
        }
        id | 1u64 << (63 - 2 * level as u32)
    }

    #[test]
    fn cell_id_basics() {
        let p = Point::new(12.3, -45.6);
        assert_eq!(CellId::from_point(p, 0).unwrap(), CellId::ROOT);
        assert_eq!(CellId::ROOT.level(), 0);
        assert_eq!(CellId::ROOT.parent(), CellId::ROOT);
        let q = Point::new(-90.0, 45.0);
        assert_eq!(CellId::from_point(q, 1).unwrap().raw(), bisect_oracle(q, 1));
        assert_eq!(
            CellId::from_point(q, 1).unwrap().raw(),
            (2u64 << 62) | (1 << 61)
        );
        assert_eq!(CellId::from_point(q, 2).unwrap().raw(), bisect_oracle(q, 2));
        assert!(CellId::from_point(Point::new(181.0, 0.0), 3).is_err());
        assert!(CellId::from_point(p, 31).is_err());
        let corner = CellId::from_point(Point::new(180.0, 90.0), 30).unwrap();
        assert_eq!(corner.ij(), ((1 << 30) - 1, (1 << 30) - 1));
    }

    #[test]
    fn cell_id_matches_bisection_and_nests() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5000 {
            let p = Point::new(rng.gen_range(-180.0..180.0), rng.gen_range(-90.0..90.0));
            let level = rng.gen_range(0..=30u8);
            let id = CellId::from_point(p, level).unwrap();
            assert!(id.is_valid());
            assert_eq!(id.raw(), bisect_oracle(p, level));
            assert_eq!(id.level(), level);
            assert!(id.rect().contains_closed(p));
            if level < 30 {
                let finer = CellId::from_point(p, level + 1).unwrap();
                assert!(id.contains(finer));
                assert_eq!(finer.parent(), id);
                assert!(id.children().contains(&finer));
            }
            let (i, j) = id.ij();
            assert_eq!(CellId::from_ij(level, i, j), id);
        }
    }

    fn square(x0: f64, x1: f64, y0: f64, y1: f64) -> PolygonGeometry {
        PolygonGeometry::from_rings(&[vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]]]).unwrap()
    }

    #[test]
    fn classify_examples() {
        let world = square(-180.0, 180.0, -90.0, 90.0);
        let polys = [IndexedPolygon {
            id: 0,
            geometry: &world,
            bbox: DOMAIN,
        }];
        let inner = CellId::from_ij(2, 1, 2);
        assert_eq!(classify_cell(inner, &polys), CellClass::Interior(0));
        assert_eq!(
            classify_cell(CellId::ROOT, &polys),
            CellClass::BoundaryLike(vec![0])
        );
        assert_eq!(classify_cell(inner, &[]), CellClass::Outside);
    }

    #[test]
    fn classify_agrees_with_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let geoms: Vec<PolygonGeometry> = (0..6)
            .map(|_| {
                let (cx, cy) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
                crate::geometry::tests::star_polygon(&mut rng, 12, cx, cy)
            })
            .collect();
        let polys: Vec<IndexedPolygon> = geoms
            .iter()
            .enumerate()
            .map(|(k, g)| IndexedPolygon {
                id: k as u32,
                geometry: g,
                bbox: crate::geometry::polygon_bbox(g).unwrap(),
            })
            .collect();
        let mut checked = 0;
        for _ in 0..400 {
            let p = Point::new(rng.gen_range(-3.5..3.5), rng.gen_range(-3.5..3.5));
            let cell = CellId::from_point(p, rng.gen_range(9..14)).unwrap();
            let rect = cell.rect();
            let samples = (0..32)
                .flat_map(|a| (0..32).map(move |b| (a, b)))
                .map(|(a, b)| {
                    Point::new(
                        rect.x_min + (a as f64 + 0.5) / 32.0 * (rect.x_max - rect.x_min),
                        rect.y_min + (b as f64 + 0.5) / 32.0 * (rect.y_max - rect.y_min),
                    )
                });
            match classify_cell(cell, &polys) {
                CellClass::Interior(k) => {
                    checked += 1;
                    for s in samples {
                        for q in &polys {
                            assert_eq!(q.geometry.contains(s), q.id == k);
                        }
                    }
                }
                CellClass::Outside => {
                    for s in samples {
                        assert!(polys.iter().all(|q| !q.geometry.contains(s)));
                    }
                }
                CellClass::BoundaryLike(c) => assert!(!c.is_empty()),
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn whole_domain_polygon_is_one_interior_cell() {
        let world = square(-180.0, 180.0, -90.0, 90.0);
        let polys = [IndexedPolygon {
            id: 0,
            geometry: &world,
            bbox: DOMAIN,
        }];
        // The outline runs along the domain edge, so the root is touched.
        // A polygon strictly larger than the domain leaves the root interior.
        let big = square(-200.0, 200.0, -100.0, 100.0);
        let big_polys = [IndexedPolygon {
            id: 0,
            geometry: &big,
            bbox: BBox::new(-200.0, 200.0, -100.0, 100.0),
        }];
        let cover = build_cover_for(&big_polys, CoverParams::exact(30)).unwrap();
        assert_eq!(
            cover.entries,
            vec![CellEntry {
                id: CellId::ROOT,
                kind: CellKind::Interior(0)
            }]
        );
        let trie = build_trie(&cover, Fanout::F4).unwrap();
        assert_eq!(
            trie.lookup(CellId::from_point(Point::new(3.0, 4.0), 30).unwrap()),
            Some(0)
        );
        assert_eq!(
            trie.lookup_counting(CellId::from_point(Point::new(3.0, 4.0), 30).unwrap())
                .1,
            0
        );
        let edge_cover = build_cover_for(&polys, CoverParams::exact(3)).unwrap();
        assert!(edge_cover
            .entries
            .iter()
            .any(|e| matches!(e.kind, CellKind::Interior(0))));
    }

    #[test]
    fn empty_inputs() {
        let cover = build_cover_for(&[], CoverParams::exact(10)).unwrap();
        assert!(cover.entries.is_empty());
        let trie = build_trie(&cover, Fanout::F2).unwrap();
        assert_eq!(
            trie.lookup(CellId::from_point(Point::new(1.0, 1.0), 30).unwrap()),
            None
        );
        assert_eq!(index_stats(&trie, &cover), IndexStats::default());
    }

    #[test]
    fn epsilon_floor() {
        let h = generate_synthetic(1, 1, 1, 1, 0.0);
        let err = build_cover(&h, CoverParams::approx(1e-9)).unwrap_err();
        assert!(matches!(err, CellError::EpsilonTooSmall { .. }), "{err}");
        assert!(build_cover(&h, CoverParams::approx(0.0)).is_err());
        assert!(build_cover(&h, CoverParams::exact(31)).is_err());
        assert_eq!(level_for_epsilon(1e-3).unwrap(), 19);
    }

    #[test]
    fn overlapping_entries_rejected() {
        let a = CellId::from_ij(3, 2, 5);
        let entries = vec![
            CellEntry {
                id: a,
                kind: CellKind::Interior(0),
            },
            CellEntry {
                id: a.child(2),
                kind: CellKind::Interior(1),
            },
        ];
        for f in Fanout::ALL {
            let mut t = TrieIndex::new(f);
            t.insert(&entries, 0).unwrap();
            assert!(matches!(
                t.insert(&entries, 1),
                Err(CellError::Overlap { .. })
            ));
            let mut t = TrieIndex::new(f);
            t.insert(&entries, 1).unwrap();
            assert!(matches!(
                t.insert(&entries, 0),
                Err(CellError::Overlap { .. })
            ));
        }
    }

    #[test]
    fn exact_query_matches_strict_mapper_and_cover_is_consistent() {
        let h = generate_synthetic(2, 2, 3, 9, 0.25);
        let polys = leaf_polygons(&h);
        let cover = build_cover(&h, CoverParams::exact(13)).unwrap();
        for w in cover.entries.windows(2) {
            assert!(w[0].id.range_max() < w[1].id.range_min());
        }
        for e in &cover.entries {
            let class = classify_cell(e.id, &polys);
            match &e.kind {
                CellKind::Interior(p) => assert_eq!(class, CellClass::Interior(*p)),
                CellKind::Boundary { candidates, deemed } => {
                    assert_eq!(class, CellClass::BoundaryLike(candidates.clone()));
                    assert!(candidates.contains(deemed));
                    assert_eq!(e.id.level(), 13);
                }
            }
        }
        let pts = uniform_points(&h, 20_000, 3);
        for f in Fanout::ALL {
            let index = CellIndex::from_cover(&h, cover.clone(), f).unwrap();
            let fast = query(&index, &h, &pts, QueryMode::Exact).unwrap();
            let simple = assign(&h, &pts, Mode::Strict);
            let leaves = h.leaves();
            for (k, p) in pts.iter().enumerate() {
                let near_edge = leaves.iter().any(|&r| {
                    let g = &h.leaf(r).geometry;
                    h.leaf(r).bbox.contains_closed(*p) && g.boundary_distance(*p) < 1e-9
                });
                if !near_edge {
                    assert_eq!(fast.assignments[k], simple.assignments[k], "{p:?}");
                }
            }
            assert!(matches!(
                query(&index, &h, &pts, QueryMode::Approx),
                Err(CellError::IncompatibleMode)
            ));
        }
    }

    #[test]
    fn ocean_and_out_of_domain_points_are_unassigned() {
        let h = generate_synthetic(2, 2, 2, 4, 0.2);
        let index = CellIndex::build(&h, CoverParams::exact(12), Fanout::F2).unwrap();
        let r = query(
            &index,
            &h,
            &[Point::new(10.0, 10.0), Point::new(500.0, 0.0)],
            QueryMode::Exact,
        )
        .unwrap();
        assert!(r.assignments.iter().all(|a| *a == Assignment::default()));
    }

    #[test]
    fn index_file_round_trip() {
        let h = generate_synthetic(3, 2, 2, 4, 0.2);
        for params in [CoverParams::exact(11), CoverParams::approx(5e-3)] {
            let index = CellIndex::build(&h, params, Fanout::F2).unwrap();
            let buf = encode_index(&index);
            let back = decode_index(&buf, &h).unwrap();
            assert_eq!(back.cover, index.cover);
            assert_eq!(back.trie.node_count(), index.trie.node_count());
            assert!(matches!(
                decode_index(&buf[..buf.len() - 1], &h),
                Err(CellError::Truncated)
            ));
            let mut bad = buf.clone();
            bad[1] = b'!';
            assert!(matches!(decode_index(&bad, &h), Err(CellError::BadMagic)));
            let other = generate_synthetic(3, 1, 1, 1, 0.2);
            assert!(matches!(
                decode_index(&buf, &other),
                Err(CellError::LeafCountMismatch { .. }) | Err(CellError::Corrupt(_))
            ));
        }
    }

    #[test]
    fn fanout_reduces_nodes() {
        let h = generate_synthetic(3, 2, 2, 9, 0.2);
        let cover = build_cover(&h, CoverParams::exact(14)).unwrap();
        let stats: Vec<IndexStats> = Fanout::ALL
            .iter()
            .map(|&f| index_stats(&build_trie(&cover, f).unwrap(), &cover))
            .collect();
        assert!(stats[2].nodes <= stats[1].nodes && stats[1].nodes <= stats[0].nodes);
        assert_eq!(stats[0].entry_bytes, stats[2].entry_bytes);
        assert_eq!(
            stats[0].interior_cells + stats[0].boundary_cells,
            cover.entries.len()
        );
    }

    fn grid_samples(cell: CellId) -> Vec<Point> {
        let r = cell.rect();
        (0..32)
            .flat_map(|a| (0..32).map(move |b| (a, b)))
            .map(|(a, b)| {
                Point::new(
                    r.x_min + (a as f64 + 0.5) / 32.0 * (r.x_max - r.x_min),
                    r.y_min + (b as f64 + 0.5) / 32.0 * (r.y_max - r.y_min),
                )
            })
            .collect()
    }

    #[test]
    fn interior_cells_are_sound_and_entries_disjoint() {
        let h = generate_synthetic(6, 2, 2, 9, 0.25);
        let leaves = h.leaves();
        for params in [CoverParams::exact(12), CoverParams::approx(4e-3)] {
            let cover = build_cover(&h, params).unwrap();
            let e = &cover.entries;
            for i in 0..e.len() {
                for j in i + 1..e.len() {
                    assert!(!e[i].id.contains(e[j].id) && !e[j].id.contains(e[i].id));
                }
            }
            for entry in e {
                match &entry.kind {
                    CellKind::Interior(p) => {
                        let g = &h.leaf(leaves[*p as usize]).geometry;
                        assert!(points_in_polygon(&grid_samples(entry.id), g)
                            .into_iter()
                            .all(|b| b));
                    }
                    CellKind::Boundary { .. } => {
                        if let CoverMode::Approx { epsilon } = params.mode {
                            assert!(entry.id.rect().diagonal() <= epsilon);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn interior_hits_agree_with_the_polygon() {
        let h = generate_synthetic(9, 4, 4, 25, 0.2);
        let leaves = h.leaves();
        let index = CellIndex::build(&h, CoverParams::exact(16), Fanout::F4).unwrap();
        let mut interior = 0;
        for p in uniform_points(&h, 1_000_000, 10) {
            if let Some(CellEntry {
                kind: CellKind::Interior(leaf),
                ..
            }) = index.entry_for(p)
            {
                interior += 1;
                assert!(h.leaf(leaves[*leaf as usize]).geometry.contains(p), "{p:?}");
            }
        }
        assert!(interior > 500_000);
    }
}
