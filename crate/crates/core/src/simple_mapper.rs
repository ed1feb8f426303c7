//! Hierarchical filter-and-refine assignment.
//!
//! At each level (states, then the counties of each state, then the block
//! groups of each county) points are tested against the level's bounding
//! boxes with one sparse membership matrix. A point inside exactly one box
//! is taken to be in that region; points inside several boxes are refined
//! with one batched point-in-polygon call per candidate region, in ascending
//! region order, and the first hit wins.

use thiserror::Error;

use crate::batch::{run_chunked, DEFAULT_CHUNK};
use crate::geometry::{bbox_membership, points_in_polygon, BBox, Point};
use crate::hierarchy::{Fips12, LeafRef, RegionHierarchy, RegionNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Unique-box points are accepted unverified and unresolved ambiguous
    /// points fall back to their highest-index candidate.
    Shortcut,
    /// Every candidate is polygon-verified; unresolved points stay unassigned.
    Strict,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MapperError {
    #[error("cannot compute a fraction over zero points")]
    NoPoints,
}

/// Per-point outcome. Indices are level-local: `county` indexes the
/// state's children, `block` the county's children.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Assignment {
    pub state: Option<u32>,
    pub county: Option<u32>,
    pub block: Option<u32>,
}

impl Assignment {
    pub fn leaf(&self) -> Option<LeafRef> {
        Some(LeafRef {
            state: self.state?,
            county: self.county?,
            block: self.block?,
        })
    }

    pub fn fips12(&self, h: &RegionHierarchy) -> Option<Fips12> {
        h.leaf(self.leaf()?).fips12
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AssignmentResult {
    pub assignments: Vec<Assignment>,
    /// Points handed to the point-in-polygon kernel, summed over calls.
    pub pip_point_evaluations: u64,
    /// Kernel invocations.
    pub pip_calls: u64,
}

impl AssignmentResult {
    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn fips12(&self, h: &RegionHierarchy, i: usize) -> Option<Fips12> {
        self.assignments[i].fips12(h)
    }

    /// Concatenates results of consecutive batches.
    pub fn concat(parts: impl IntoIterator<Item = AssignmentResult>) -> AssignmentResult {
        let mut out = AssignmentResult::default();
        for p in parts {
            out.assignments.extend(p.assignments);
            out.pip_point_evaluations += p.pip_point_evaluations;
            out.pip_calls += p.pip_calls;
        }
        out
    }
}

/// Kernel evaluations per input point.
pub fn pip_fraction(result: &AssignmentResult, n_points: usize) -> Result<f64, MapperError> {
    if n_points == 0 {
        return Err(MapperError::NoPoints);
    }
    Ok(result.pip_point_evaluations as f64 / n_points as f64)
}

#[derive(Default)]
struct Counters {
    evaluations: u64,
    calls: u64,
}

/// Resolves `subset` (indices into `points`) against one level's regions and
/// returns the chosen region per subset entry.
fn resolve_level(
    points: &[Point],
    subset: &[u32],
    regions: &[RegionNode],
    mode: Mode,
    counters: &mut Counters,
) -> Vec<Option<u32>> {
    let local: Vec<Point> = subset.iter().map(|&i| points[i as usize]).collect();
    let boxes: Vec<BBox> = regions.iter().map(|r| r.bbox).collect();
    let m = bbox_membership(&local, &boxes);

    let min_to_check = match mode {
        Mode::Shortcut => 2,
        Mode::Strict => 1,
    };
    let mut chosen: Vec<Option<u32>> = (0..local.len())
        .map(|i| match (mode, m.row(i)) {
            (Mode::Shortcut, &[only]) => Some(only),
            _ => None,
        })
        .collect();
    let mut pending: Vec<bool> = (0..local.len())
        .map(|i| m.row_count(i) >= min_to_check)
        .collect();

    let mut batch = Vec::new();
    let mut batch_pts = Vec::new();
    for (j, region) in regions.iter().enumerate() {
        batch.clear();
        batch.extend(m.col(j).iter().copied().filter(|&i| pending[i as usize]));
        if batch.is_empty() {
            continue;
        }
        batch_pts.clear();
        batch_pts.extend(batch.iter().map(|&i| local[i as usize]));
        let inside = points_in_polygon(&batch_pts, &region.geometry);
        counters.evaluations += batch.len() as u64;
        counters.calls += 1;
        for (&i, hit) in batch.iter().zip(inside) {
            if hit {
                chosen[i as usize] = Some(j as u32);
                pending[i as usize] = false;
            }
        }
    }

    if mode == Mode::Shortcut {
        for i in 0..local.len() {
            if pending[i] {
                chosen[i] = m.row(i).last().copied();
            }
        }
    }
    chosen
}

/// Groups `subset` positions by their chosen region.
fn group_by(choice: &[Option<u32>], subset: &[u32], n_regions: usize) -> Vec<Vec<u32>> {
    let mut groups = vec![Vec::new(); n_regions];
    for (&c, &i) in choice.iter().zip(subset) {
        if let Some(c) = c {
            groups[c as usize].push(i);
        }
    }
    groups
}

/// Assigns every point to a block group (or none), single-threaded.
pub fn assign(h: &RegionHierarchy, points: &[Point], mode: Mode) -> AssignmentResult {
    let mut counters = Counters::default();
    let mut out = vec![Assignment::default(); points.len()];

    let all: Vec<u32> = (0..points.len() as u32).collect();
    let state_choice = resolve_level(points, &all, &h.states, mode, &mut counters);
    for (&i, &s) in all.iter().zip(&state_choice) {
        out[i as usize].state = s;
    }

    for (s, members) in group_by(&state_choice, &all, h.states.len())
        .iter()
        .enumerate()
    {
        if members.is_empty() {
            continue;
        }
        let state = &h.states[s];
        let county_choice = resolve_level(points, members, &state.children, mode, &mut counters);
        for (&i, &c) in members.iter().zip(&county_choice) {
            out[i as usize].county = c;
        }
        for (c, in_county) in group_by(&county_choice, members, state.children.len())
            .iter()
            .enumerate()
        {
            if in_county.is_empty() {
                continue;
            }
            let county = &state.children[c];
            let block_choice =
                resolve_level(points, in_county, &county.children, mode, &mut counters);
            for (&i, &b) in in_county.iter().zip(&block_choice) {
                out[i as usize].block = b;
            }
        }
    }

    AssignmentResult {
        assignments: out,
        pip_point_evaluations: counters.evaluations,
        pip_calls: counters.calls,
    }
}

/// [`assign`] over fixed-size point partitions on `threads` workers.
/// Assignments and evaluation counts do not depend on `threads`.
pub fn assign_parallel(
    h: &RegionHierarchy,
    points: &[Point],
    mode: Mode,
    threads: usize,
    chunk: usize,
) -> AssignmentResult {
    AssignmentResult::concat(run_chunked(points, threads, chunk, |part| {
        assign(h, part, mode)
    }))
}

/// [`assign_parallel`] with the default chunk size.
pub fn assign_threads(
    h: &RegionHierarchy,
    points: &[Point],
    mode: Mode,
    threads: usize,
) -> AssignmentResult {
    assign_parallel(h, points, mode, threads, DEFAULT_CHUNK)
}
