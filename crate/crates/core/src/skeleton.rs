//! Rooted skeleton trees made of voxel-path segments.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::VoxelId;

/// One process segment between two tree nodes.
///
/// `path[0]` is the attachment voxel: the root for hierarchy-1 segments,
/// otherwise the last voxel of the parent segment. The last voxel is the
/// segment's distal node (a bifurcation or a terminal).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub path: Vec<VoxelId>,
    pub hierarchy: u32,
    pub parent: Option<usize>,
}

impl Segment {
    pub fn proximal(&self) -> VoxelId {
        self.path[0]
    }

    pub fn distal(&self) -> VoxelId {
        *self.path.last().expect("segment path is never empty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Soma,
    Bifurcation,
    Terminal,
    /// Distal end of a segment with exactly one child; only appears in
    /// hand-built skeletons, never in traced or imported ones.
    Continuation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Node {
    pub voxel: VoxelId,
    pub kind: NodeKind,
    /// 0 for the root, otherwise the hierarchy of the segment ending here.
    pub hierarchy: u32,
    /// Segment whose distal end this node is; `None` for the root.
    pub segment: Option<usize>,
}

/// Rooted tree of segments. The segment-level graph has one node for the
/// root plus one per segment distal end, so `n_segments = n_nodes - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonGraph {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub root: VoxelId,
    pub segments: Vec<Segment>,
}

impl SkeletonGraph {
    pub fn root_only(dims: [usize; 3], spacing: [f64; 3], root: VoxelId) -> Self {
        Self {
            dims,
            spacing,
            root,
            segments: Vec::new(),
        }
    }

    /// Builds a skeleton from a voxel-level tree given as a child→parent map.
    ///
    /// Segments are split at every voxel with more than one child. Segments
    /// are numbered breadth-first from the root with siblings ordered by
    /// their first voxel after the attachment point, so the result does not
    /// depend on map iteration order.
    pub fn from_parent_map(
        dims: [usize; 3],
        spacing: [f64; 3],
        root: VoxelId,
        parents: &HashMap<VoxelId, VoxelId>,
    ) -> Result<Self> {
        let mut children: BTreeMap<VoxelId, Vec<VoxelId>> = BTreeMap::new();
        for (&child, &parent) in parents {
            if child == root {
                return Err(Error::Structure("root has a parent".into()));
            }
            children.entry(parent).or_default().push(child);
        }
        for c in children.values_mut() {
            c.sort();
        }
        let mut segments = Vec::new();
        let mut queue: VecDeque<(VoxelId, Option<usize>)> = VecDeque::from([(root, None)]);
        let mut visited = 0usize;
        while let Some((start, parent)) = queue.pop_front() {
            let Some(kids) = children.get(&start) else { continue };
            for &first in kids {
                let mut path = vec![start, first];
                visited += 1;
                let mut cur = first;
                while let Some([only]) = children.get(&cur).map(Vec::as_slice) {
                    path.push(*only);
                    visited += 1;
                    if visited > parents.len() {
                        return Err(Error::Structure("cycle in parent map".into()));
                    }
                    cur = *only;
                }
                let id = segments.len();
                segments.push(Segment {
                    path,
                    hierarchy: 0,
                    parent,
                });
                queue.push_back((cur, Some(id)));
            }
        }
        if visited != parents.len() {
            return Err(Error::Structure(format!(
                "{} voxels are not connected to the root",
                parents.len() - visited
            )));
        }
        let mut s = Self {
            dims,
            spacing,
            root,
            segments,
        };
        s.assign_hierarchy()?;
        Ok(s)
    }

    /// Child→parent voxel map covering every non-root skeleton voxel.
    pub fn parent_map(&self) -> HashMap<VoxelId, VoxelId> {
        let mut map = HashMap::new();
        for seg in &self.segments {
            for w in seg.path.windows(2) {
                map.insert(w[1], w[0]);
            }
        }
        map
    }

    /// Child segment indices per segment, in index order.
    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.segments.len()];
        for (i, s) in self.segments.iter().enumerate() {
            if let Some(p) = s.parent {
                if p < out.len() {
                    out[p].push(i);
                }
            }
        }
        out
    }

    pub fn root_children(&self) -> Vec<usize> {
        (0..self.segments.len())
            .filter(|&i| self.segments[i].parent.is_none())
            .collect()
    }

    /// Recomputes hierarchy indices from parent references: segments leaving
    /// the root get 1, every child its parent's value plus one.
    pub fn assign_hierarchy(&mut self) -> Result<()> {
        let n = self.segments.len();
        let children = self.children();
        for (i, s) in self.segments.iter().enumerate() {
            if let Some(p) = s.parent {
                if p >= n {
                    return Err(Error::Structure(format!("segment {i} has unknown parent {p}")));
                }
                if p == i {
                    return Err(Error::Structure(format!("segment {i} is its own parent")));
                }
            }
        }
        let mut level = vec![0u32; n];
        let mut queue: VecDeque<usize> = self.root_children().into();
        for &r in &queue {
            level[r] = 1;
        }
        let mut seen = queue.len();
        while let Some(i) = queue.pop_front() {
            for &c in &children[i] {
                level[c] = level[i] + 1;
                seen += 1;
                queue.push_back(c);
            }
        }
        if seen != n {
            return Err(Error::Structure(format!(
                "{} segments are not reachable from the root (cycle)",
                n - seen
            )));
        }
        for (s, h) in self.segments.iter_mut().zip(level) {
            s.hierarchy = h;
        }
        Ok(())
    }

    pub fn max_hierarchy(&self) -> u32 {
        self.segments.iter().map(|s| s.hierarchy).max().unwrap_or(0)
    }

    /// Segment indices in processing order: increasing hierarchy, then index.
    pub fn hierarchy_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.segments.len()).collect();
        order.sort_by_key(|&i| (self.segments[i].hierarchy, i));
        order
    }

    /// Root plus one node per segment distal end.
    pub fn nodes(&self) -> Vec<Node> {
        let children = self.children();
        let mut nodes = vec![Node {
            voxel: self.root,
            kind: NodeKind::Soma,
            hierarchy: 0,
            segment: None,
        }];
        for (i, s) in self.segments.iter().enumerate() {
            let kind = match children[i].len() {
                0 => NodeKind::Terminal,
                1 => NodeKind::Continuation,
                _ => NodeKind::Bifurcation,
            };
            nodes.push(Node {
                voxel: s.distal(),
                kind,
                hierarchy: s.hierarchy,
                segment: Some(i),
            });
        }
        nodes
    }

    pub fn bifurcations(&self) -> Vec<VoxelId> {
        self.nodes_of(NodeKind::Bifurcation)
    }

    pub fn terminals(&self) -> Vec<VoxelId> {
        self.nodes_of(NodeKind::Terminal)
    }

    fn nodes_of(&self, kind: NodeKind) -> Vec<VoxelId> {
        self.nodes()
            .into_iter()
            .filter(|n| n.kind == kind)
            .map(|n| n.voxel)
            .collect()
    }

    /// All skeleton voxels, root first, each once.
    pub fn voxels(&self) -> Vec<VoxelId> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for v in std::iter::once(self.root).chain(self.segments.iter().flat_map(|s| s.path.iter().copied())) {
            if seen.insert(v) {
                out.push(v);
            }
        }
        out
    }

    /// Checks every structural invariant: in-bounds 26-connected paths,
    /// attachment to root or parent distal voxel, acyclicity, consistent
    /// hierarchy, and voxel-disjointness apart from shared attachment voxels.
    pub fn validate(&self) -> Result<()> {
        let in_bounds = |v: VoxelId| v.x < self.dims[0] && v.y < self.dims[1] && v.z < self.dims[2];
        if !in_bounds(self.root) {
            return Err(Error::OutOfBounds(self.root));
        }
        let mut check = self.clone();
        check.assign_hierarchy()?;
        for (i, (s, c)) in self.segments.iter().zip(&check.segments).enumerate() {
            if s.path.len() < 2 {
                return Err(Error::Structure(format!("segment {i} has fewer than two voxels")));
            }
            if let Some(&v) = s.path.iter().find(|v| !in_bounds(**v)) {
                return Err(Error::OutOfBounds(v));
            }
            if let Some(w) = s.path.windows(2).find(|w| !w[0].is_neighbor26(w[1])) {
                return Err(Error::Structure(format!(
                    "segment {i}: {} and {} are not 26-neighbours",
                    w[0], w[1]
                )));
            }
            let anchor = match s.parent {
                None => self.root,
                Some(p) => self.segments[p].distal(),
            };
            if s.proximal() != anchor {
                return Err(Error::Structure(format!(
                    "segment {i} starts at {} but its attachment is {anchor}",
                    s.proximal()
                )));
            }
            if s.hierarchy != c.hierarchy {
                return Err(Error::Structure(format!(
                    "segment {i} has hierarchy {} but depth {}",
                    s.hierarchy, c.hierarchy
                )));
            }
        }
        let mut owner: HashMap<VoxelId, usize> = HashMap::new();
        owner.insert(self.root, usize::MAX);
        for (i, s) in self.segments.iter().enumerate() {
            for &v in &s.path[1..] {
                if let Some(o) = owner.insert(v, i) {
                    return Err(Error::Structure(format!(
                        "voxel {v} is shared by segments {i} and {}",
                        if o == usize::MAX {
                            "root".to_string()
                        } else {
                            o.to_string()
                        }
                    )));
                }
            }
        }
        Ok(())
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn y_is_valid() {
        let s = y_skeleton();
        s.validate().unwrap();
        assert_eq!(s.nodes().len(), s.segments.len() + 1);
        assert_eq!(s.bifurcations(), vec![v(5, 10, 0)]);
        assert_eq!(s.terminals().len(), 2);
    }

    #[test]
    fn parent_map_round_trip() {
        let s = y_skeleton();
        let rebuilt = SkeletonGraph::from_parent_map(s.dims, s.spacing, s.root, &s.parent_map()).unwrap();
        assert_eq!(rebuilt, s);
    }

    #[test]
    fn binary_tree_levels() {
        let s = binary_tree(3);
        s.validate().unwrap();
        let mut counts = BTreeMap::new();
        for seg in &s.segments {
            *counts.entry(seg.hierarchy).or_insert(0) += 1;
        }
        assert_eq!(counts, BTreeMap::from([(1, 1), (2, 2), (3, 4)]));
    }

    #[test]
    fn detects_cycles() {
        let mut s = y_skeleton();
        s.segments[0].parent = Some(1);
        assert!(matches!(s.assign_hierarchy(), Err(Error::Structure(_))));
    }

    #[test]
    fn detects_shared_voxels() {
        let mut s = y_skeleton();
        let extra = s.segments[2].path[2];
        s.segments[1].path.push(extra);
        assert!(s.validate().is_err());
    }

    #[test]
    fn disconnected_parent_map_is_rejected() {
        let mut parents = HashMap::new();
        parents.insert(v(1, 0, 0), v(0, 0, 0));
        parents.insert(v(5, 0, 0), v(4, 0, 0));
        assert!(SkeletonGraph::from_parent_map([8, 1, 1], [1.0; 3], v(0, 0, 0), &parents).is_err());
    }
}
