//! Initial skeleton tracing from a segmentation mask.
//!
//! One Dijkstra run from the soma centroid gives geodesic distances over the
//! foreground. Tips are geodesic-distance local maxima; each tip is joined to
//! the growing tree along a shortest path, and paths that meet the tree share
//! its voxels from the meeting point back to the root. The meeting point
//! becomes a bifurcation. Where several shortest paths exist, voxels that
//! other tips can also reach optimally are preferred, which keeps sibling
//! branches on a common stem.

use std::collections::{BinaryHeap, HashMap, HashSet};

use crate::error::{Error, Result};
use crate::graph::{dijkstra, dijkstra_in, PathResult, Region};
use crate::skeleton::SkeletonGraph;
use crate::volume::{step_weight, SegMask, VoxelId, OFFSETS_26};

/// Tracing parameters. Lengths are in voxels (scaled by the smallest spacing
/// component when compared with physical geodesic distances).
#[derive(Debug, Clone, PartialEq)]
pub struct TraceConfig {
    /// Radius of the ball within which a tip must be the geodesic maximum.
    pub terminal_radius: f64,
    /// Minimum geodesic distance from the root for a tip. `None` uses the
    /// largest distance reached inside the soma.
    pub min_distance: Option<f64>,
    /// A candidate tip closer than this (geodesically) to an already traced
    /// path is treated as a bump on that path. `None` means twice
    /// `terminal_radius`.
    pub min_branch_length: Option<f64>,
    /// Relative tolerance deciding which edges lie on some shortest path.
    pub tie_tolerance: f64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            terminal_radius: 3.0,
            min_distance: None,
            min_branch_length: None,
            tie_tolerance: 1e-9,
        }
    }
}

impl TraceConfig {
    fn branch_length(&self) -> f64 {
        self.min_branch_length.unwrap_or(2.0 * self.terminal_radius)
    }
}

/// Mean position of the soma voxels, rounded; snapped to the nearest
/// foreground voxel (physical distance, lexicographic tie-break) when the
/// rounded position falls outside the foreground.
pub fn soma_centroid(m: &SegMask) -> Result<VoxelId> {
    let mut sum = [0.0f64; 3];
    let mut n = 0usize;
    for v in m.soma_voxels() {
        sum[0] += v.x as f64;
        sum[1] += v.y as f64;
        sum[2] += v.z as f64;
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptySoma);
    }
    let mean = sum.map(|s| s / n as f64);
    let rounded = VoxelId::new(
        mean[0].round() as usize,
        mean[1].round() as usize,
        mean[2].round() as usize,
    );
    if m.is_foreground(rounded) {
        return Ok(rounded);
    }
    let sp = m.spacing();
    let d2 = |v: VoxelId| {
        (0..3)
            .map(|k| {
                let d = (v.as_array()[k] as f64 - mean[k]) * sp[k];
                d * d
            })
            .sum::<f64>()
    };
    // foreground_voxels iterates in index order, not lexicographic order
    m.foreground_voxels()
        .map(|v| (d2(v), v))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, v)| v)
        .ok_or(Error::EmptyForeground)
}

/// Outcome of tip detection.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminalScan {
    /// Tips sorted by decreasing geodesic distance (ties: lexicographic).
    pub terminals: Vec<VoxelId>,
    /// Foreground voxels not reachable from the root.
    pub unreachable: usize,
}

/// Ball offsets (voxel units) with Euclidean norm in `(0, radius]`.
fn ball_offsets(radius: f64) -> Vec<[i64; 3]> {
    let r = radius.floor() as i64;
    let mut out = Vec::new();
    for dx in -r..=r {
        for dy in -r..=r {
            for dz in -r..=r {
                let n2 = (dx * dx + dy * dy + dz * dz) as f64;
                if n2 > 0.0 && n2 <= radius * radius + 1e-12 {
                    out.push([dx, dy, dz]);
                }
            }
        }
    }
    out
}

/// Candidate comparison key: larger distance wins, then the smaller voxel.
fn beats(a: (f64, VoxelId), b: (f64, VoxelId)) -> bool {
    a.0 > b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// Geodesic-distance local maxima outside the soma.
///
/// A voxel is a candidate when it beats every reached foreground voxel in a
/// ball of `terminal_radius` voxels. Candidates are then accepted in order of
/// decreasing distance; one that lies within `min_branch_length` (geodesic)
/// of the shortest path of an accepted tip is dropped as a surface bump.
pub fn detect_terminals(m: &SegMask, root: VoxelId, cfg: &TraceConfig) -> Result<TerminalScan> {
    let p = dijkstra(m, root, None)?;
    Ok(detect_with(m, &p, cfg))
}

fn detect_with(m: &SegMask, p: &PathResult, cfg: &TraceConfig) -> TerminalScan {
    let unreachable = m.foreground_voxels().filter(|&v| !p.is_reached(v)).count();
    if unreachable > 0 {
        log::warn!("{unreachable} foreground voxels are unreachable from the root");
    }
    let d_min = cfg.min_distance.unwrap_or_else(|| {
        m.soma_voxels()
            .map(|v| p.dist(v))
            .filter(|d| d.is_finite())
            .fold(0.0, f64::max)
    });
    let dims = m.dims();
    let ball = ball_offsets(cfg.terminal_radius);
    let mut candidates: Vec<(f64, VoxelId)> = p
        .reached()
        .filter(|&(v, d)| d >= d_min && !m.is_soma(v))
        .filter(|&(v, d)| {
            ball.iter().all(|&o| match v.offset(o, dims) {
                Some(u) if p.is_reached(u) => beats((d, v), (p.dist(u), u)),
                _ => true,
            })
        })
        .map(|(v, d)| (d, v))
        .collect();
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let unit = m.spacing().iter().copied().fold(f64::INFINITY, f64::min);
    let reach = cfg.branch_length() * unit;
    let mut traced: HashSet<VoxelId> = HashSet::new();
    let mut terminals = Vec::new();
    for (_, c) in candidates {
        if !traced.is_empty() && within_reach(m, c, &traced, reach) {
            continue;
        }
        let mut cur = c;
        traced.insert(cur);
        while let Some(prev) = p.pred(cur) {
            if !traced.insert(prev) {
                break;
            }
            cur = prev;
        }
        terminals.push(c);
    }
    TerminalScan { terminals, unreachable }
}

/// True when some voxel of `targets` is within geodesic distance `reach` of `from`.
fn within_reach(m: &SegMask, from: VoxelId, targets: &HashSet<VoxelId>, reach: f64) -> bool {
    let margin = (reach / m.spacing().iter().copied().fold(f64::INFINITY, f64::min)).ceil() as usize + 1;
    let region = Region::around([from], margin, m.dims());
    let local = dijkstra_in(
        region,
        m.dims(),
        m.spacing(),
        &[(from, 0.0)],
        |v| m.is_foreground(v),
        |_, w| w,
        None,
    );
    let hit = local.reached().any(|(v, d)| d <= reach && targets.contains(&v));
    hit
}

/// Traces the initial skeleton with default parameters.
pub fn trace_initial_skeleton(m: &SegMask) -> Result<SkeletonGraph> {
    trace_with(m, &TraceConfig::default())
}

/// Traces the initial skeleton.
///
/// Tips are joined in order of decreasing geodesic distance. For each tip we
/// look at every shortest path from the root (edges `u -> v` with
/// `dist(u) + w = dist(v)` up to `tie_tolerance`), find the already traced
/// voxel farthest from the root that some shortest path passes through, and
/// join there. Among the shortest paths from that junction, the one whose
/// voxels lie on the most other tips' shortest paths is taken, then the one
/// running deepest inside the foreground. Every root-to-tip path in the
/// result is therefore a shortest path, and new branches never touch traced
/// voxels except at their junction.
pub fn trace_with(m: &SegMask, cfg: &TraceConfig) -> Result<SkeletonGraph> {
    if m.foreground_count() == 0 {
        return Err(Error::EmptyForeground);
    }
    let root = soma_centroid(m)?;
    let p = dijkstra(m, root, None)?;
    let scan = detect_with(m, &p, cfg);
    let depth = depth_map(m);
    let grid = m.grid();

    let tol = cfg.tie_tolerance;
    let dags: Vec<HashSet<VoxelId>> = scan.terminals.iter().map(|&t| sp_dag(m, &p, t, tol)).collect();
    // how many tips each voxel outside the soma can serve on a shortest path
    let mut shared: HashMap<VoxelId, u64> = HashMap::new();
    for d in &dags {
        for &v in d.iter().filter(|&&v| !m.is_soma(v)) {
            *shared.entry(v).or_default() += 1;
        }
    }
    let weight = |v: VoxelId| (shared.get(&v).copied().unwrap_or(0), depth[grid.index(v)]);

    let mut parents: HashMap<VoxelId, VoxelId> = HashMap::new();
    let mut on_tree: HashSet<VoxelId> = HashSet::from([root]);
    for (&t, dag) in scan.terminals.iter().zip(&dags) {
        if on_tree.contains(&t) {
            continue;
        }
        let branch = branch_to(m, &p, t, dag, &on_tree, weight, tol);
        for w in branch.windows(2) {
            parents.insert(w[1], w[0]);
            on_tree.insert(w[1]);
        }
    }
    SkeletonGraph::from_parent_map(m.dims(), m.spacing(), root, &parents)
}

fn on_shortest_path(du: f64, w: f64, dv: f64, tol: f64) -> bool {
    (du + w - dv).abs() <= tol * dv.max(1.0)
}

/// Neighbours of `v` that precede it on some shortest path from the source.
fn sp_preds(m: &SegMask, p: &PathResult, v: VoxelId, tol: f64) -> Vec<VoxelId> {
    let dims = m.dims();
    let sp = m.spacing();
    let dv = p.dist(v);
    let mut out: Vec<VoxelId> = OFFSETS_26
        .iter()
        .filter_map(|&o| {
            let u = v.offset(o, dims)?;
            let du = p.dist(u);
            (du.is_finite() && du < dv && on_shortest_path(du, step_weight(o, sp), dv, tol)).then_some(u)
        })
        .collect();
    out.sort();
    out
}

/// All voxels on some shortest source -> `t` path.
fn sp_dag(m: &SegMask, p: &PathResult, t: VoxelId, tol: f64) -> HashSet<VoxelId> {
    let mut dag: HashSet<VoxelId> = HashSet::from([t]);
    let mut stack = vec![t];
    while let Some(v) = stack.pop() {
        for u in sp_preds(m, p, v, tol) {
            if dag.insert(u) {
                stack.push(u);
            }
        }
    }
    dag
}

/// Shortest-path branch from the farthest reusable tree voxel to `t`. Among
/// equally short candidates the branch prefers voxels other tips can also
/// reach optimally (so siblings share a stem), then centred voxels.
fn branch_to(
    m: &SegMask,
    p: &PathResult,
    t: VoxelId,
    dag: &HashSet<VoxelId>,
    on_tree: &HashSet<VoxelId>,
    weight: impl Fn(VoxelId) -> (u64, f64),
    tol: f64,
) -> Vec<VoxelId> {
    let from = dag
        .iter()
        .filter(|v| on_tree.contains(v))
        .map(|&v| (p.dist(v), v))
        .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)))
        .map(|(_, v)| v)
        .expect("the root lies on every shortest path");

    let dj = p.dist(from);
    let mut order: Vec<VoxelId> = dag
        .iter()
        .copied()
        .filter(|&v| p.dist(v) > dj && !on_tree.contains(&v))
        .collect();
    order.sort_by(|a, b| p.dist(*a).total_cmp(&p.dist(*b)).then(a.cmp(b)));
    let better = |a: (u64, f64), b: (u64, f64)| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1));
    let mut best: HashMap<VoxelId, ((u64, f64), VoxelId)> = HashMap::new();
    best.insert(from, ((0, 0.0), from));
    for &v in &order {
        let choice = sp_preds(m, p, v, tol)
            .into_iter()
            .filter_map(|u| best.get(&u).map(|&(s, _)| (s, u)))
            .max_by(|a, b| better(a.0, b.0).then(b.1.cmp(&a.1)));
        if let Some((s, u)) = choice {
            let (c, d) = weight(v);
            best.insert(v, ((s.0 + c, s.1 + d), u));
        }
    }
    let mut branch = vec![t];
    let mut cur = t;
    while cur != from {
        cur = best.get(&cur).expect("junction is a shortest-path ancestor of t").1;
        branch.push(cur);
    }
    branch.reverse();
    branch
}

/// Chamfer distance from each foreground voxel to the nearest background
/// voxel (the outside of the volume counts as background).
fn depth_map(m: &SegMask) -> Vec<f64> {
    let grid = m.grid();
    let dims = m.dims();
    let sp = m.spacing();
    let mut dist = vec![f64::INFINITY; grid.len()];
    let mut heap = BinaryHeap::new();
    #[derive(PartialEq)]
    struct E(f64, usize);
    impl Eq for E {}
    impl Ord for E {
        fn cmp(&self, o: &Self) -> std::cmp::Ordering {
            o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
        }
    }
    impl PartialOrd for E {
        fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(o))
        }
    }
    for i in 0..grid.len() {
        if !m.foreground()[i] {
            dist[i] = 0.0;
            heap.push(E(0.0, i));
            continue;
        }
        let v = grid.voxel(i);
        let on_border = (0..3).any(|k| v.as_array()[k] == 0 || v.as_array()[k] + 1 == dims[k]);
        if on_border {
            let d0 = sp.iter().copied().fold(f64::INFINITY, f64::min);
            dist[i] = d0;
            heap.push(E(d0, i));
        }
    }
    while let Some(E(d, i)) = heap.pop() {
        if d > dist[i] {
            continue;
        }
        let u = grid.voxel(i);
        for &o in &OFFSETS_26 {
            let Some(v) = u.offset(o, dims) else { continue };
            let j = grid.index(v);
            let nd = d + step_weight(o, sp);
            if nd < dist[j] {
                dist[j] = nd;
                heap.push(E(nd, j));
            }
        }
    }
    dist
}

/// Recomputes hierarchy labels: segments leaving the root get 1, each child
/// its parent's value plus one. The root node itself is level 0.
pub fn decompose_hierarchy(s: &SkeletonGraph) -> Result<SkeletonGraph> {
    let mut out = s.clone();
    out.assign_hierarchy()?;
    Ok(out)
}
