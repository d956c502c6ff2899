//! Temporal propagation: the previous frame's skeleton is morphed onto the
//! next frame's penalised vesselness map one segment at a time, lowest
//! hierarchy first.
//!
//! A segment is moved by its distal endpoint only. Each iteration tries the
//! endpoint's neighbourhood (including staying put), re-derives the path
//! from the fixed proximal voxel as the best-scoring path under a
//! non-negative step cost, and keeps the best candidate if the objective
//! rises by more than `improvement_epsilon`. When the endpoint is a
//! bifurcation its child segments are re-derived from the candidate voxel
//! too, and the candidate is judged on the summed score of parent and
//! children, so a parent cannot gain simply by stretching into a child.

use std::collections::hash_map::Entry;
use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{dijkstra_in, extract_path, path_length, PathResult, Region};
use crate::io::hist_equalize;
use crate::skeleton::{Segment, SkeletonGraph};
use crate::tracer::trace_initial_skeleton;
use crate::vesselness::{iv_transform_with, vesselness_with, FrangiParams, Penalty, VesselMap, DEFAULT_SCALES};
use crate::volume::{SegMask, Volume3, VoxelId};

pub const MORPH_LOG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MorphConfig {
    /// Largest distance (voxels) a bifurcation may end up from its previous
    /// position.
    pub max_bifurcation_shift: f64,
    /// Objective cost per voxel a bifurcation moves away from its previous
    /// position, as a fraction of the map maximum.
    pub bifurcation_stiffness: f64,
    /// Chebyshev radius of the endpoint move set per iteration; 1 is one
    /// 26-neighbourhood step.
    pub max_endpoint_shift_per_iter: usize,
    pub max_iters: usize,
    pub improvement_epsilon: f64,
    /// Largest distance (voxels) a terminal may end up from its previous
    /// position.
    pub max_terminal_shift: f64,
    /// Charge per unit of path length, as a fraction of the map maximum;
    /// used both when re-deriving paths and when judging candidates.
    pub length_penalty_ratio: f64,
    /// Margin (voxels) around a segment within which paths are re-derived.
    pub search_margin: usize,
}

impl Default for MorphConfig {
    fn default() -> Self {
        Self {
            max_bifurcation_shift: 2.0,
            bifurcation_stiffness: 2.0,
            max_endpoint_shift_per_iter: 1,
            max_iters: 200,
            improvement_epsilon: 1e-9,
            max_terminal_shift: 6.0,
            length_penalty_ratio: 0.2,
            search_margin: 5,
        }
    }
}

impl MorphConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {x}")))
            }
        };
        pos("max_bifurcation_shift", self.max_bifurcation_shift)?;
        if !(self.bifurcation_stiffness >= 0.0 && self.bifurcation_stiffness.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bifurcation_stiffness must be non-negative, got {}",
                self.bifurcation_stiffness
            )));
        }
        pos("max_endpoint_shift_per_iter", self.max_endpoint_shift_per_iter as f64)?;
        pos("max_iters", self.max_iters as f64)?;
        pos("improvement_epsilon", self.improvement_epsilon)?;
        pos("max_terminal_shift", self.max_terminal_shift)?;
        pos("length_penalty_ratio", self.length_penalty_ratio)?;
        pos("search_margin", self.search_margin as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MorphFlag {
    /// No candidate endpoint could be reached; the segment was left as is.
    NoFeasiblePath,
    /// The iteration budget ran out while moves were still improving.
    IterationLimit,
}

/// What happened to one segment during a morph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentLog {
    pub segment: usize,
    pub hierarchy: u32,
    /// Objective values after each accepted move, starting with the initial
    /// value; strictly increasing. For a segment with children the objective
    /// includes the children's scores.
    pub accepted_scores: Vec<f64>,
    pub iterations: usize,
    pub endpoint_shift: f64,
    pub flags: Vec<MorphFlag>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MorphResult {
    pub skeleton: SkeletonGraph,
    pub total_score: f64,
    /// Final score of every segment, indexed like `skeleton.segments`.
    pub per_segment_scores: Vec<f64>,
    pub iterations_used: usize,
    /// In processing order.
    pub segments: Vec<SegmentLog>,
}

impl MorphResult {
    pub fn flagged(&self) -> impl Iterator<Item = &SegmentLog> {
        self.segments.iter().filter(|s| !s.flags.is_empty())
    }

    pub fn log(&self) -> MorphLog {
        MorphLog {
            schema_version: MORPH_LOG_SCHEMA_VERSION,
            total_score: self.total_score,
            per_segment_scores: self.per_segment_scores.clone(),
            iterations_used: self.iterations_used,
            segments: self.segments.clone(),
        }
    }
}

/// JSON form of a [`MorphResult`] without the skeleton itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorphLog {
    pub schema_version: u32,
    pub total_score: f64,
    pub per_segment_scores: Vec<f64>,
    pub iterations_used: usize,
    pub segments: Vec<SegmentLog>,
}

/// Sum of the map over the segment's voxels. A shared attachment voxel is
/// counted once for every segment that contains it.
pub fn segment_score(seg: &Segment, iv: &VesselMap) -> Result<f64> {
    path_score(&seg.path, iv)
}

fn path_score(path: &[VoxelId], iv: &VesselMap) -> Result<f64> {
    path.iter().try_fold(0.0, |acc, &v| {
        iv.volume.get(v).map(|x| acc + x).ok_or(Error::OutOfBounds(v))
    })
}

/// Single-segment morph with an explicit occupied set (voxels the segment
/// must not touch). The endpoint may drift at most `max_terminal_shift` from
/// where it starts.
pub fn morph_segment(
    seg: &Segment,
    iv: &VesselMap,
    fixed_proximal: VoxelId,
    occupied: &HashSet<VoxelId>,
    cfg: &MorphConfig,
) -> Result<(Segment, SegmentLog)> {
    cfg.validate()?;
    if seg.path.len() < 2 || seg.proximal() != fixed_proximal {
        return Err(Error::InvalidParameter(format!(
            "segment must start at the fixed proximal voxel {fixed_proximal}"
        )));
    }
    if let Some(v) = seg.path.iter().find(|v| occupied.contains(v)) {
        return Err(Error::InvalidParameter(format!(
            "segment already passes through occupied voxel {v}"
        )));
    }
    path_score(&seg.path, iv)?;
    let ctx = Ctx::new(iv, cfg, iv.volume.spacing());
    let mut paths = vec![seg.path.clone()];
    let mut blocked = vec![false; iv.volume.len()];
    for &v in occupied.iter().filter(|v| iv.volume.contains(**v)) {
        blocked[iv.volume.index(v)] = true;
    }
    let pin = Pin {
        anchor: seg.distal(),
        bound: cfg.max_terminal_shift,
        stiffness: 0.0,
    };
    let log = ctx.climb(&mut paths, pin, &blocked)?;
    let out = Segment {
        path: paths.swap_remove(0),
        ..seg.clone()
    };
    Ok((
        out,
        SegmentLog {
            segment: 0,
            hierarchy: seg.hierarchy,
            ..log
        },
    ))
}

/// Morphs every segment of `prev` onto `iv` in hierarchy order. Hierarchy-1
/// segments stay attached to the root, segments never share voxels other
/// than attachment points, bifurcations stay within
/// `max_bifurcation_shift` of their previous position and the branch
/// structure is unchanged.
pub fn morph_skeleton(prev: &SkeletonGraph, iv: &VesselMap, cfg: &MorphConfig) -> Result<MorphResult> {
    cfg.validate()?;
    prev.validate()?;
    if iv.volume.dims() != prev.dims {
        return Err(Error::InvalidVolume(format!(
            "map is {:?} but the skeleton grid is {:?}",
            iv.volume.dims(),
            prev.dims
        )));
    }
    if iv.volume.spacing() != prev.spacing {
        return Err(Error::SpacingMismatch(iv.volume.spacing(), prev.spacing));
    }
    let ctx = Ctx::new(iv, cfg, prev.spacing);
    let mut s = prev.clone();
    let children = s.children();

    // how many segment paths contain each voxel
    let grid = &iv.volume;
    let mut count = vec![0u32; grid.len()];
    for seg in &s.segments {
        for &v in &seg.path {
            count[grid.index(v)] += 1;
        }
    }

    let mut logs = Vec::with_capacity(s.segments.len());
    for i in prev.hierarchy_order() {
        let members: Vec<usize> = std::iter::once(i).chain(children[i].iter().copied()).collect();
        let mut paths: Vec<Vec<VoxelId>> = members.iter().map(|&k| s.segments[k].path.clone()).collect();
        let mut own: HashMap<VoxelId, u32> = HashMap::new();
        for p in &paths {
            for &v in p {
                *own.entry(v).or_default() += 1;
            }
        }
        let mut blocked: Vec<bool> = count.iter().map(|&c| c > 0).collect();
        for (&v, &n) in &own {
            let k = grid.index(v);
            blocked[k] = count[k] > n;
        }
        let anchor = prev.segments[i].distal();
        let pin = if children[i].is_empty() {
            Pin {
                anchor,
                bound: cfg.max_terminal_shift,
                stiffness: 0.0,
            }
        } else {
            Pin {
                anchor,
                bound: cfg.max_bifurcation_shift,
                stiffness: cfg.bifurcation_stiffness * ctx.iv_max,
            }
        };
        let log = ctx.climb(&mut paths, pin, &blocked)?;
        for (&k, p) in members.iter().zip(paths) {
            for &v in &s.segments[k].path {
                count[grid.index(v)] -= 1;
            }
            for &v in &p {
                count[grid.index(v)] += 1;
            }
            s.segments[k].path = p;
        }
        logs.push(SegmentLog {
            segment: i,
            hierarchy: prev.segments[i].hierarchy,
            ..log
        });
    }

    let skeleton = reroute_tree(&s)?;
    let per_segment_scores = skeleton
        .segments
        .iter()
        .map(|seg| segment_score(seg, iv))
        .collect::<Result<Vec<f64>>>()?;
    Ok(MorphResult {
        total_score: per_segment_scores.iter().sum(),
        per_segment_scores,
        iterations_used: logs.iter().map(|l| l.iterations).sum(),
        segments: logs,
        skeleton,
    })
}

/// Rebuilds parent references and hierarchy from segment geometry. A
/// segment whose first voxel is another segment's last voxel (or the root)
/// hangs there; one that has drifted off its recorded parent by a single
/// voxel is snapped back onto the parent's distal voxel.
pub fn reroute_tree(s: &SkeletonGraph) -> Result<SkeletonGraph> {
    let mut out = s.clone();
    let mut by_distal: HashMap<VoxelId, Vec<usize>> = HashMap::new();
    for (i, seg) in s.segments.iter().enumerate() {
        by_distal.entry(seg.distal()).or_default().push(i);
    }
    for (i, seg) in s.segments.iter().enumerate() {
        let p = seg.proximal();
        if p == s.root {
            out.segments[i].parent = None;
            continue;
        }
        let hosts: Vec<usize> = by_distal
            .get(&p)
            .map(|h| h.iter().copied().filter(|&j| j != i).collect())
            .unwrap_or_default();
        match hosts.as_slice() {
            [j] => out.segments[i].parent = Some(*j),
            [] => {
                let anchor = match seg.parent {
                    Some(j) if j < s.segments.len() && j != i => s.segments[j].distal(),
                    _ => s.root,
                };
                if !(p == anchor || p.is_neighbor26(anchor)) {
                    return Err(Error::Disconnected { segment: i });
                }
                out.segments[i].path = snap(&seg.path, anchor).ok_or(Error::Disconnected { segment: i })?;
                out.segments[i].parent = (anchor != s.root).then_some(seg.parent).flatten();
            }
            _ => {
                return Err(Error::Structure(format!(
                    "segment {i} attaches to {p}, the end of several segments"
                )))
            }
        }
    }
    out.assign_hierarchy()?;
    out.validate()?;
    Ok(out)
}

/// Re-roots `path` at `anchor`, a 26-neighbour of its first voxel.
fn snap(path: &[VoxelId], anchor: VoxelId) -> Option<Vec<VoxelId>> {
    let rest = &path[1..];
    let mut out = vec![anchor];
    match rest.first() {
        Some(&n) if n == anchor => out.extend_from_slice(&rest[1..]),
        Some(&n) if n.is_neighbor26(anchor) => out.extend_from_slice(rest),
        _ => out.extend_from_slice(path),
    }
    (out.len() >= 2).then_some(out)
}

/// Shared state for path re-derivation on one map.
struct Ctx<'a> {
    iv: &'a VesselMap,
    cfg: &'a MorphConfig,
    spacing: [f64; 3],
    /// Map maximum; the move charges are multiples of it because, unlike
    /// `x_avg`, it does not collapse when noise makes nearly every
    /// background voxel faintly positive.
    iv_max: f64,
    eps_len: f64,
}

impl<'a> Ctx<'a> {
    fn new(iv: &'a VesselMap, cfg: &'a MorphConfig, spacing: [f64; 3]) -> Self {
        let iv_max = iv.max_value().max(0.0);
        Self {
            iv,
            cfg,
            spacing,
            iv_max,
            eps_len: cfg.length_penalty_ratio * iv_max,
        }
    }

    /// What a candidate is judged on: summed response minus the length
    /// charge, so a voxel only pays for itself where the response beats it.
    fn objective(&self, paths: &[Vec<VoxelId>]) -> Result<f64> {
        paths
            .iter()
            .map(|p| Ok(path_score(p, self.iv)? - self.eps_len * path_length(p, self.spacing)))
            .sum()
    }

    /// Cheapest path tree from `source` under the score-derived step cost
    /// `(max − I_v(head)) + ε·length`, which is non-negative, so minimising
    /// it maximises summed response for a given step count.
    fn search(
        &self,
        region: Region,
        source: VoxelId,
        passable: impl Fn(VoxelId) -> bool,
        stop: Option<&[VoxelId]>,
    ) -> PathResult {
        let vol = &self.iv.volume;
        dijkstra_in(
            region,
            vol.dims(),
            self.spacing,
            &[(source, 0.0)],
            passable,
            |head, w| (self.iv_max - vol.at(head)) + self.eps_len * w,
            stop,
        )
    }

    /// Hill-climbs the distal endpoint of `paths[0]`; `paths[1..]` are the
    /// children hanging from it, which follow the endpoint.
    ///
    /// Sources, obstacles and the search box are fixed for the whole climb,
    /// so path trees are computed once and every endpoint is scored at most
    /// once.
    fn climb(&self, paths: &mut [Vec<VoxelId>], pin: Pin, blocked: &[bool]) -> Result<SegmentLog> {
        let Pin {
            anchor,
            bound,
            stiffness,
        } = pin;
        let pull = |e: VoxelId| stiffness * e.voxel_distance(anchor);
        let vol = &self.iv.volume;
        let dims = vol.dims();
        let free = |v: VoxelId| !blocked[vol.index(v)];
        let mut score = self.objective(paths)? - pull(*paths[0].last().expect("non-empty"));
        let mut log = SegmentLog {
            segment: 0,
            hierarchy: 0,
            accepted_scores: vec![score],
            iterations: 0,
            endpoint_shift: 0.0,
            flags: Vec::new(),
        };
        let proximal = paths[0][0];
        let reach = bound.ceil() as i64 + 1;
        let corners = [clamp(anchor, -reach, dims), clamp(anchor, reach, dims)];
        let region = |p: &[VoxelId]| Region::around(p.iter().chain(&corners).copied(), self.cfg.search_margin, dims);
        let head = self.search(region(&paths[0]), proximal, free, None);
        // children are searched from their fixed distal ends back towards the
        // candidate attachment voxel
        let kids: Vec<Kid> = paths[1..]
            .iter()
            .map(|p| {
                let distal = *p.last().expect("non-empty");
                let region = region(p);
                let tree = self.search(region, distal, |v| v != proximal && free(v), None);
                Kid { distal, region, tree }
            })
            .collect();

        let mut scored: HashMap<VoxelId, Option<Proposal>> = HashMap::new();
        let r = self.cfg.max_endpoint_shift_per_iter as i64;
        let mut improving = true;
        while improving && log.iterations < self.cfg.max_iters {
            log.iterations += 1;
            improving = false;
            let end = *paths[0].last().expect("non-empty");
            let mut ends = Vec::new();
            for dx in -r..=r {
                for dy in -r..=r {
                    for dz in -r..=r {
                        let Some(e) = end.offset([dx, dy, dz], dims) else {
                            continue;
                        };
                        if e != proximal && free(e) && e.voxel_distance(anchor) <= bound + 1e-12 {
                            ends.push(e);
                        }
                    }
                }
            }
            ends.sort();
            for &e in &ends {
                if let Entry::Vacant(slot) = scored.entry(e) {
                    let mut p = self.propose(e, &head, &kids)?;
                    if let Some(p) = p.as_mut() {
                        p.score -= pull(e);
                    }
                    slot.insert(p);
                }
            }
            // resolve collisions lazily, best optimistic score first
            let mut order: Vec<(f64, usize)> = ends
                .iter()
                .enumerate()
                .filter_map(|(k, e)| scored[e].as_ref().map(|p| (p.score, k)))
                .collect();
            order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let mut best: Option<(f64, usize)> = None;
            for (optimistic, k) in order {
                if best.is_some_and(|b| optimistic <= b.0) {
                    break;
                }
                let e = ends[k];
                if scored[&e].as_ref().is_some_and(|p| p.clash) {
                    let mut p = self.untangle(scored[&e].as_ref().expect("checked"), &kids, proximal, &free)?;
                    if let Some(p) = p.as_mut() {
                        p.score -= pull(e);
                    }
                    scored.insert(e, p);
                }
                if let Some(p) = &scored[&e] {
                    if best.is_none_or(|b| p.score > b.0 || (p.score == b.0 && k < b.1)) {
                        best = Some((p.score, k));
                    }
                }
            }
            match best {
                None if log.iterations == 1 => log.flags.push(MorphFlag::NoFeasiblePath),
                Some((s, k)) if s > score + self.cfg.improvement_epsilon => {
                    score = s;
                    log.accepted_scores.push(score);
                    let p = scored[&ends[k]].as_ref().expect("feasible");
                    for (dst, src) in paths.iter_mut().zip(&p.paths) {
                        dst.clone_from(src);
                    }
                    improving = true;
                }
                _ => {}
            }
        }
        if improving {
            log.flags.push(MorphFlag::IterationLimit);
        }
        log.endpoint_shift = paths[0].last().expect("non-empty").voxel_distance(anchor);
        Ok(log)
    }

    /// Paths for endpoint `e` read off the precomputed trees. Children may
    /// still collide with the parent or each other (`clash`).
    fn propose(&self, e: VoxelId, head: &PathResult, kids: &[Kid]) -> Result<Option<Proposal>> {
        let Ok(first) = extract_path(head, e) else {
            return Ok(None);
        };
        let mut paths = vec![first];
        for k in kids {
            if e == k.distal {
                return Ok(None);
            }
            let Ok(mut p) = extract_path(&k.tree, e) else {
                return Ok(None);
            };
            p.reverse();
            paths.push(p);
        }
        let mut seen: HashSet<VoxelId> = paths[0].iter().copied().collect();
        let clash = !paths[1..].iter().all(|p| p[1..].iter().all(|&v| seen.insert(v)));
        let score = self.objective(&paths)?;
        Ok(Some(Proposal { paths, score, clash }))
    }

    /// Re-derives colliding children one by one, each avoiding the voxels
    /// already claimed by the parent and earlier siblings.
    fn untangle(
        &self,
        p: &Proposal,
        kids: &[Kid],
        proximal: VoxelId,
        free: &dyn Fn(VoxelId) -> bool,
    ) -> Result<Option<Proposal>> {
        let e = *p.paths[0].last().expect("non-empty");
        let mut used: HashSet<VoxelId> = p.paths[0].iter().copied().collect();
        let mut paths = vec![p.paths[0].clone()];
        for (path, k) in p.paths[1..].iter().zip(kids) {
            let path = if path[1..].iter().any(|v| used.contains(v)) {
                let tree = self.search(
                    k.region,
                    k.distal,
                    |v| v != proximal && free(v) && (v == e || !used.contains(&v)),
                    Some(&[e]),
                );
                let Ok(mut q) = extract_path(&tree, e) else {
                    return Ok(None);
                };
                q.reverse();
                q
            } else {
                path.clone()
            };
            used.extend(path[1..].iter().copied());
            paths.push(path);
        }
        let score = self.objective(&paths)?;
        Ok(Some(Proposal {
            paths,
            score,
            clash: false,
        }))
    }
}

/// Where an endpoint started, how far it may go and what each voxel of
/// displacement costs.
#[derive(Debug, Clone, Copy)]
struct Pin {
    anchor: VoxelId,
    bound: f64,
    stiffness: f64,
}

/// A child segment's fixed distal end and its path tree.
struct Kid {
    distal: VoxelId,
    region: Region,
    tree: PathResult,
}

/// Paths for one candidate endpoint: the segment followed by its children.
struct Proposal {
    paths: Vec<Vec<VoxelId>>,
    score: f64,
    clash: bool,
}

/// `v + (d, d, d)` clamped into the volume.
fn clamp(v: VoxelId, d: i64, dims: [usize; 3]) -> VoxelId {
    let a = v.as_array();
    let c = |k: usize| (a[k] as i64 + d).clamp(0, dims[k] as i64 - 1) as usize;
    VoxelId::new(c(0), c(1), c(2))
}

/// How each later frame is turned into a morphing objective.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesOptions {
    pub scales: Vec<f64>,
    pub frangi: FrangiParams,
    pub penalty: Penalty,
    /// Histogram-equalise each frame before filtering.
    pub hist_eq: bool,
    pub hist_bins: usize,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self {
            scales: DEFAULT_SCALES.to_vec(),
            frangi: FrangiParams::default(),
            penalty: Penalty::PositiveMean,
            hist_eq: false,
            hist_bins: crate::io::DEFAULT_BINS,
        }
    }
}

/// Penalised vesselness map of one frame.
pub fn frame_objective(frame: &Volume3, opts: &SeriesOptions) -> Result<VesselMap> {
    let eq;
    let input = if opts.hist_eq {
        eq = hist_equalize(frame, opts.hist_bins);
        &eq
    } else {
        frame
    };
    let resp = vesselness_with(input, &opts.scales, &opts.frangi)?;
    iv_transform_with(&resp, opts.penalty)
}

/// One output of a series run; `morph` is `None` for the traced first frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    pub skeleton: SkeletonGraph,
    pub morph: Option<MorphResult>,
}

/// Traces frame 0 from `seg1`, then morphs each skeleton onto the next
/// frame. Errors carry the (0-based) index of the frame that failed.
pub fn run_series(
    frames: &[Volume3],
    seg1: &SegMask,
    cfg: &MorphConfig,
    opts: &SeriesOptions,
) -> Result<Vec<FrameResult>> {
    let Some(first) = frames.first() else {
        return Err(Error::InvalidParameter("no frames".into()));
    };
    let at = |index: usize| {
        move |e: Error| Error::Frame {
            index,
            err: Box::new(e),
        }
    };
    if first.dims() != seg1.dims() {
        return Err(at(0)(Error::InvalidVolume(format!(
            "frame is {:?} but the mask is {:?}",
            first.dims(),
            seg1.dims()
        ))));
    }
    let s1 = trace_initial_skeleton(seg1).map_err(at(0))?;
    let mut out = vec![FrameResult {
        skeleton: s1,
        morph: None,
    }];
    for (t, frame) in frames.iter().enumerate().skip(1) {
        let iv = frame_objective(frame, opts).map_err(at(t))?;
        let prev = &out.last().expect("non-empty").skeleton;
        let m = morph_skeleton(prev, &iv, cfg).map_err(at(t))?;
        log::info!(
            "frame {t}: score {:.4}, {} iterations, {} flagged segments",
            m.total_score,
            m.iterations_used,
            m.flagged().count()
        );
        out.push(FrameResult {
            skeleton: m.skeleton.clone(),
            morph: Some(m),
        });
    }
    Ok(out)
}

/// Skeleton per frame with the given scales and default filter settings.
pub fn run_time_series(
    frames: &[Volume3],
    seg1: &SegMask,
    cfg: &MorphConfig,
    scales: &[f64],
) -> Result<Vec<SkeletonGraph>> {
    let opts = SeriesOptions {
        scales: scales.to_vec(),
        ..SeriesOptions::default()
    };
    Ok(run_series(frames, seg1, cfg, &opts)?
        .into_iter()
        .map(|f| f.skeleton)
        .collect())
}
