//! Implicit weighted voxel graph.
//!
//! Vertices are foreground voxels; edges join 26-neighbours and carry the
//! Euclidean length of the step, scaled per axis by the voxel spacing. With
//! unit spacing the weights are exactly 1, √2 and √3. The graph is never
//! materialised: adjacency is computed on the fly.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use crate::error::{Error, Result};
use crate::volume::{step_weight, SegMask, VoxelId, OFFSETS_26};

const NO_PRED: usize = usize::MAX;

/// Foreground 26-neighbours of `v` with their step weights, in lexicographic
/// offset order.
pub fn neighbors26(v: VoxelId, m: &SegMask) -> Result<Vec<(VoxelId, f64)>> {
    if !m.is_foreground(v) {
        return Err(Error::NotForeground(v));
    }
    let dims = m.dims();
    let spacing = m.spacing();
    Ok(OFFSETS_26
        .iter()
        .filter_map(|&d| {
            let u = v.offset(d, dims)?;
            m.is_foreground(u).then(|| (u, step_weight(d, spacing)))
        })
        .collect())
}

/// Axis-aligned box `[lo, lo + size)` inside a volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub lo: [usize; 3],
    pub size: [usize; 3],
}

impl Region {
    pub fn full(dims: [usize; 3]) -> Self {
        Self { lo: [0; 3], size: dims }
    }

    /// Bounding box of `voxels` grown by `margin`, clipped to `dims`.
    pub fn around(voxels: impl IntoIterator<Item = VoxelId>, margin: usize, dims: [usize; 3]) -> Self {
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        for v in voxels {
            let a = v.as_array();
            for k in 0..3 {
                lo[k] = lo[k].min(a[k]);
                hi[k] = hi[k].max(a[k]);
            }
        }
        let mut size = [0; 3];
        for k in 0..3 {
            if lo[k] == usize::MAX {
                lo[k] = 0;
            }
            lo[k] = lo[k].saturating_sub(margin);
            let top = (hi[k] + margin + 1).min(dims[k]);
            size[k] = top - lo[k];
        }
        Self { lo, size }
    }

    pub fn len(&self) -> usize {
        self.size[0] * self.size[1] * self.size[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn contains(&self, v: VoxelId) -> bool {
        let a = v.as_array();
        (0..3).all(|k| a[k] >= self.lo[k] && a[k] < self.lo[k] + self.size[k])
    }

    #[inline]
    fn index(&self, v: VoxelId) -> usize {
        let x = v.x - self.lo[0];
        let y = v.y - self.lo[1];
        let z = v.z - self.lo[2];
        x + self.size[0] * (y + self.size[1] * z)
    }

    #[inline]
    fn voxel(&self, i: usize) -> VoxelId {
        let x = i % self.size[0];
        let r = i / self.size[0];
        VoxelId::new(
            x + self.lo[0],
            r % self.size[1] + self.lo[1],
            r / self.size[1] + self.lo[2],
        )
    }

    pub fn voxels(&self) -> impl Iterator<Item = VoxelId> + '_ {
        (0..self.len()).map(|i| self.voxel(i))
    }
}

/// Single-source shortest-path tree.
#[derive(Debug, Clone)]
pub struct PathResult {
    source: VoxelId,
    region: Region,
    spacing: [f64; 3],
    dist: Vec<f64>,
    pred: Vec<usize>,
}

impl PathResult {
    pub fn source(&self) -> VoxelId {
        self.source
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    /// Geodesic distance, `f64::INFINITY` when unreached.
    pub fn dist(&self, v: VoxelId) -> f64 {
        if self.region.contains(v) {
            self.dist[self.region.index(v)]
        } else {
            f64::INFINITY
        }
    }

    pub fn is_reached(&self, v: VoxelId) -> bool {
        self.dist(v).is_finite()
    }

    pub fn pred(&self, v: VoxelId) -> Option<VoxelId> {
        if !self.region.contains(v) {
            return None;
        }
        match self.pred[self.region.index(v)] {
            NO_PRED => None,
            p => Some(self.region.voxel(p)),
        }
    }

    /// Every reached voxel with its distance, in index order.
    pub fn reached(&self) -> impl Iterator<Item = (VoxelId, f64)> + '_ {
        self.dist
            .iter()
            .enumerate()
            .filter(|(_, d)| d.is_finite())
            .map(|(i, &d)| (self.region.voxel(i), d))
    }
}

#[derive(PartialEq)]
struct Entry {
    dist: f64,
    voxel: VoxelId,
}

impl Eq for Entry {}

impl Ord for Entry {
    // BinaryHeap is a max-heap: smallest distance first, then smallest voxel.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.voxel.cmp(&self.voxel))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Multi-source Dijkstra over a box. `passable` restricts vertices, `cost(head, w)` gives
/// the (non-negative) cost of stepping onto `head` with geometric length `w`.
pub(crate) fn dijkstra_in<P, C>(
    region: Region,
    dims: [usize; 3],
    spacing: [f64; 3],
    sources: &[(VoxelId, f64)],
    passable: P,
    cost: C,
    stop: Option<&[VoxelId]>,
) -> PathResult
where
    P: Fn(VoxelId) -> bool,
    C: Fn(VoxelId, f64) -> f64,
{
    let n = region.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![NO_PRED; n];
    let mut done = vec![false; n];
    let weights: Vec<f64> = OFFSETS_26.iter().map(|&d| step_weight(d, spacing)).collect();

    let mut pending: Vec<usize> = stop
        .map(|s| {
            let mut idx: Vec<usize> = s
                .iter()
                .filter(|v| region.contains(**v))
                .map(|&v| region.index(v))
                .collect();
            idx.sort_unstable();
            idx.dedup();
            idx
        })
        .unwrap_or_default();
    let mut remaining = pending.len();
    let stopping = stop.is_some();

    let mut heap = BinaryHeap::new();
    for &(s, d0) in sources {
        let si = region.index(s);
        if d0 < dist[si] {
            dist[si] = d0;
            heap.push(Entry { dist: d0, voxel: s });
        }
    }

    while let Some(Entry { dist: d, voxel: u }) = heap.pop() {
        let ui = region.index(u);
        if done[ui] || d > dist[ui] {
            continue;
        }
        done[ui] = true;
        if stopping {
            if let Ok(pos) = pending.binary_search(&ui) {
                pending.remove(pos);
                remaining -= 1;
                if remaining == 0 {
                    break;
                }
            }
        }
        for (k, &off) in OFFSETS_26.iter().enumerate() {
            let Some(v) = u.offset(off, dims) else { continue };
            if !region.contains(v) || !passable(v) {
                continue;
            }
            let vi = region.index(v);
            if done[vi] {
                continue;
            }
            let nd = d + cost(v, weights[k]);
            if nd < dist[vi] {
                dist[vi] = nd;
                pred[vi] = ui;
                heap.push(Entry { dist: nd, voxel: v });
            }
        }
    }

    PathResult {
        source: sources.first().map(|s| s.0).unwrap_or_default(),
        region,
        spacing,
        dist,
        pred,
    }
}

/// Exact geodesic distances from `source` within the foreground.
///
/// With `stop_set`, the search ends once every member has been finalised;
/// distances of finalised voxels are exact, others may be overestimates.
pub fn dijkstra(m: &SegMask, source: VoxelId, stop_set: Option<&[VoxelId]>) -> Result<PathResult> {
    if !m.is_foreground(source) {
        return Err(Error::NotForeground(source));
    }
    Ok(dijkstra_in(
        Region::full(m.dims()),
        m.dims(),
        m.spacing(),
        &[(source, 0.0)],
        |v| m.is_foreground(v),
        |_, w| w,
        stop_set,
    ))
}

/// Path from the source to `target`, both inclusive.
pub fn extract_path(p: &PathResult, target: VoxelId) -> Result<Vec<VoxelId>> {
    if !p.is_reached(target) {
        return Err(Error::Unreachable(target));
    }
    let mut path = vec![target];
    let mut cur = target;
    while let Some(prev) = p.pred(cur) {
        path.push(prev);
        cur = prev;
    }
    debug_assert_eq!(cur, p.source);
    path.reverse();
    Ok(path)
}

/// Sum of step weights along a path.
pub fn path_length(path: &[VoxelId], spacing: [f64; 3]) -> f64 {
    path.windows(2).map(|w| w[0].distance(w[1], spacing)).sum()
}

/// The 26-connected component of the foreground containing `seed`.
pub fn connected_component(m: &SegMask, seed: VoxelId) -> Result<SegMask> {
    if !m.is_foreground(seed) {
        return Err(Error::NotForeground(seed));
    }
    let grid = m.grid();
    let dims = m.dims();
    let mut keep = vec![false; grid.len()];
    keep[grid.index(seed)] = true;
    let mut queue = VecDeque::from([seed]);
    while let Some(u) = queue.pop_front() {
        for &d in &OFFSETS_26 {
            let Some(v) = u.offset(d, dims) else { continue };
            let vi = grid.index(v);
            if !keep[vi] && m.foreground()[vi] {
                keep[vi] = true;
                queue.push_back(v);
            }
        }
    }
    let soma = keep.iter().zip(m.soma()).map(|(&k, &s)| k && s).collect();
    SegMask::new(dims, m.spacing(), keep, soma)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_from(dims: [usize; 3], voxels: &[VoxelId]) -> SegMask {
        let mut m = SegMask::empty(dims, [1.0; 3]).unwrap();
        for &v in voxels {
            m.set(v, true, false);
        }
        m
    }

    fn full(dims: [usize; 3]) -> SegMask {
        let n = dims[0] * dims[1] * dims[2];
        SegMask::new(dims, [1.0; 3], vec![true; n], vec![false; n]).unwrap()
    }

    #[test]
    fn center_of_block_has_26_neighbours() {
        let m = full([3, 3, 3]);
        let nb = neighbors26(VoxelId::new(1, 1, 1), &m).unwrap();
        assert_eq!(nb.len(), 26);
        let count = |w: f64| nb.iter().filter(|(_, x)| *x == w).count();
        assert_eq!(count(1.0), 6);
        assert_eq!(count(2f64.sqrt()), 12);
        assert_eq!(count(3f64.sqrt()), 8);
    }

    #[test]
    fn corner_has_seven() {
        let m = full([3, 3, 3]);
        assert_eq!(neighbors26(VoxelId::new(0, 0, 0), &m).unwrap().len(), 7);
        assert_eq!(neighbors26(VoxelId::new(2, 2, 2), &m).unwrap().len(), 7);
    }

    #[test]
    fn isolated_voxel_has_none() {
        let m = mask_from([3, 3, 3], &[VoxelId::new(1, 1, 1)]);
        assert!(neighbors26(VoxelId::new(1, 1, 1), &m).unwrap().is_empty());
        assert!(matches!(
            neighbors26(VoxelId::new(0, 0, 0), &m),
            Err(Error::NotForeground(_))
        ));
    }

    #[test]
    fn anisotropic_weights() {
        let mut m = full([3, 3, 3]);
        m = m.with_spacing([1.0, 2.0, 3.0]).unwrap();
        let nb = neighbors26(VoxelId::new(1, 1, 1), &m).unwrap();
        let w = nb.iter().find(|(v, _)| *v == VoxelId::new(2, 2, 1)).unwrap().1;
        assert_eq!(w, 5f64.sqrt());
    }

    #[test]
    fn straight_line_distance() {
        let line: Vec<_> = (0..5).map(|x| VoxelId::new(x, 0, 0)).collect();
        let m = mask_from([5, 1, 1], &line);
        let p = dijkstra(&m, line[0], None).unwrap();
        assert_eq!(p.dist(line[4]), 4.0);
        assert_eq!(extract_path(&p, line[4]).unwrap(), line);
    }

    #[test]
    fn diagonal_distance() {
        let diag: Vec<_> = (0..3).map(|i| VoxelId::new(i, i, 0)).collect();
        let m = mask_from([3, 3, 1], &diag);
        let p = dijkstra(&m, diag[0], None).unwrap();
        assert_eq!(p.dist(diag[2]), 2.0 * 2f64.sqrt());
    }

    #[test]
    fn source_path_is_singleton() {
        let m = full([2, 2, 2]);
        let s = VoxelId::new(1, 0, 1);
        let p = dijkstra(&m, s, None).unwrap();
        assert_eq!(extract_path(&p, s).unwrap(), vec![s]);
        assert_eq!(p.dist(s), 0.0);
        assert!(p.pred(s).is_none());
    }

    #[test]
    fn unreachable_target() {
        let a = VoxelId::new(0, 0, 0);
        let b = VoxelId::new(4, 0, 0);
        let m = mask_from([5, 1, 1], &[a, b]);
        let p = dijkstra(&m, a, None).unwrap();
        assert!(matches!(extract_path(&p, b), Err(Error::Unreachable(_))));
        assert!(dijkstra(&m, VoxelId::new(2, 0, 0), None).is_err());
    }

    #[test]
    fn stop_set_distances_are_exact() {
        let m = full([6, 6, 6]);
        let s = VoxelId::new(0, 0, 0);
        let all = dijkstra(&m, s, None).unwrap();
        let targets = [VoxelId::new(2, 1, 0), VoxelId::new(1, 3, 2)];
        let part = dijkstra(&m, s, Some(&targets)).unwrap();
        for t in targets {
            assert_eq!(part.dist(t), all.dist(t));
        }
        assert!(part.reached().count() < all.reached().count());
    }

    #[test]
    fn component_isolation() {
        let mut voxels = Vec::new();
        for x in 0..2 {
            for y in 0..2 {
                for z in 0..2 {
                    voxels.push(VoxelId::new(x, y, z));
                    voxels.push(VoxelId::new(x + 4, y, z));
                }
            }
        }
        let m = mask_from([6, 2, 2], &voxels);
        let c = connected_component(&m, VoxelId::new(0, 0, 0)).unwrap();
        assert_eq!(c.foreground_count(), 8);
        assert!(!c.is_foreground(VoxelId::new(4, 0, 0)));
        let whole = full([3, 3, 3]);
        assert_eq!(connected_component(&whole, VoxelId::new(1, 1, 1)).unwrap(), whole);
    }

    #[test]
    fn region_around_clips() {
        let r = Region::around([VoxelId::new(1, 1, 1), VoxelId::new(3, 2, 1)], 2, [5, 5, 5]);
        assert_eq!(r.lo, [0, 0, 0]);
        assert_eq!(r.size, [5, 5, 4]);
        assert!(r.voxels().all(|v| r.contains(v)));
    }
}
