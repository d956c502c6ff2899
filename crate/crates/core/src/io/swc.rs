//! SWC export/import.
//!
//! Coordinates are written in µm (voxel index × spacing). Two header comments
//! carry the voxel grid so that import can restore it exactly:
//!
//! ```text
//! # spacing 1 1 1
//! # dims 16 20 1
//! 1 1 0 10 0 0.5 -1
//! 2 3 1 10 0 0.5 1
//! ```

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::skeleton::SkeletonGraph;
use crate::volume::VoxelId;

const SOMA_TYPE: u32 = 1;
const PROCESS_TYPE: u32 = 3;

/// Renders the SWC text. Samples are numbered root first, then segment by
/// segment in hierarchy order, so every parent precedes its children.
pub fn to_swc_string(s: &SkeletonGraph) -> String {
    let [sx, sy, sz] = s.spacing;
    let [nx, ny, nz] = s.dims;
    let radius = 0.5 * sx.min(sy).min(sz);
    let mut out = format!("# spacing {sx} {sy} {sz}\n# dims {nx} {ny} {nz}\n");
    let mut ids: HashMap<VoxelId, usize> = HashMap::new();
    let line = |out: &mut String, id: usize, kind: u32, v: VoxelId, parent: i64| {
        let _ = writeln!(
            out,
            "{id} {kind} {} {} {} {radius} {parent}",
            v.x as f64 * sx,
            v.y as f64 * sy,
            v.z as f64 * sz
        );
    };
    ids.insert(s.root, 1);
    line(&mut out, 1, SOMA_TYPE, s.root, -1);
    for i in s.hierarchy_order() {
        let path = &s.segments[i].path;
        let mut parent = ids[&path[0]];
        for &v in &path[1..] {
            let id = ids.len() + 1;
            ids.insert(v, id);
            line(&mut out, id, PROCESS_TYPE, v, parent as i64);
            parent = id;
        }
    }
    out
}

pub fn export_swc(s: &SkeletonGraph, path: &Path) -> Result<()> {
    s.validate()?;
    fs::write(path, to_swc_string(s)).map_err(|e| Error::io(path, e))
}

struct Sample {
    id: i64,
    pos: [f64; 3],
    parent: i64,
}

/// 26-connected voxel line from `a` (exclusive) to `b` (inclusive).
fn line_between(a: VoxelId, b: VoxelId) -> Vec<VoxelId> {
    let (pa, pb) = (a.as_array(), b.as_array());
    let d: Vec<i64> = (0..3).map(|k| pb[k] as i64 - pa[k] as i64).collect();
    let steps = d.iter().map(|x| x.abs()).max().unwrap_or(0);
    (1..=steps)
        .map(|t| {
            let c: Vec<usize> = (0..3)
                .map(|k| (pa[k] as f64 + d[k] as f64 * t as f64 / steps as f64).round() as usize)
                .collect();
            VoxelId::new(c[0], c[1], c[2])
        })
        .collect()
}

/// Parses SWC text. Without header comments, spacing defaults to 1 µm and
/// dims to the bounding box of the samples.
pub fn parse_swc(text: &str, origin: &Path) -> Result<SkeletonGraph> {
    let mut spacing = None;
    let mut dims = None;
    let mut samples = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            let mut it = c.split_whitespace();
            match it.next() {
                Some("spacing") => {
                    spacing = Some(super::raw::triple::<f64>(&it.collect::<Vec<_>>().join(" "), origin)?)
                }
                Some("dims") => dims = Some(super::raw::triple::<usize>(&it.collect::<Vec<_>>().join(" "), origin)?),
                _ => {}
            }
            continue;
        }
        let bad = || Error::format(origin, format!("line {}: malformed sample `{line}`", lineno + 1));
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() < 7 {
            return Err(bad());
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        let int = |s: &str| s.parse::<i64>().map_err(|_| bad());
        samples.push(Sample {
            id: int(f[0])?,
            pos: [num(f[2])?, num(f[3])?, num(f[4])?],
            parent: int(f[6])?,
        });
    }
    let spacing = spacing.unwrap_or([1.0; 3]);
    if spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(Error::format(origin, format!("invalid spacing {spacing:?}")));
    }

    let mut index: HashMap<i64, usize> = HashMap::new();
    for (i, s) in samples.iter().enumerate() {
        if index.insert(s.id, i).is_some() {
            return Err(Error::format(origin, format!("duplicate sample id {}", s.id)));
        }
    }
    let roots: Vec<usize> = (0..samples.len()).filter(|&i| samples[i].parent < 0).collect();
    let root = match roots.as_slice() {
        [r] => *r,
        [] => return Err(Error::format(origin, "no root sample")),
        _ => return Err(Error::format(origin, format!("{} root samples", roots.len()))),
    };
    let mut kids: Vec<Vec<usize>> = vec![Vec::new(); samples.len()];
    for (i, s) in samples.iter().enumerate() {
        if s.parent >= 0 {
            let p = *index
                .get(&s.parent)
                .ok_or_else(|| Error::format(origin, format!("sample {} has unknown parent {}", s.id, s.parent)))?;
            kids[p].push(i);
        }
    }

    let mut voxel = Vec::with_capacity(samples.len());
    for s in &samples {
        let mut c = [0usize; 3];
        for k in 0..3 {
            let r = (s.pos[k] / spacing[k]).round();
            if r < 0.0 || !r.is_finite() {
                return Err(Error::format(origin, format!("sample {} lies outside the grid", s.id)));
            }
            c[k] = r as usize;
        }
        voxel.push(VoxelId::new(c[0], c[1], c[2]));
    }
    let dims = match dims {
        Some(d) => d,
        None => {
            let mut d = [1usize; 3];
            for v in &voxel {
                for (k, x) in v.as_array().into_iter().enumerate() {
                    d[k] = d[k].max(x + 1);
                }
            }
            d
        }
    };
    if let Some(v) = voxel
        .iter()
        .find(|v| v.x >= dims[0] || v.y >= dims[1] || v.z >= dims[2])
    {
        return Err(Error::OutOfBounds(*v));
    }

    let root_voxel = voxel[root];
    let mut parents: HashMap<VoxelId, VoxelId> = HashMap::new();
    let mut queue = VecDeque::from([root]);
    let mut seen = 1usize;
    while let Some(i) = queue.pop_front() {
        for &c in &kids[i] {
            seen += 1;
            let mut prev = voxel[i];
            for v in line_between(voxel[i], voxel[c]) {
                if v == root_voxel || parents.contains_key(&v) {
                    return Err(Error::Structure(format!("sample {} revisits voxel {v}", samples[c].id)));
                }
                parents.insert(v, prev);
                prev = v;
            }
            queue.push_back(c);
        }
    }
    if seen != samples.len() {
        return Err(Error::Structure(format!(
            "{} samples are not connected to the root (cycle)",
            samples.len() - seen
        )));
    }
    SkeletonGraph::from_parent_map(dims, spacing, root_voxel, &parents)
}

pub fn import_swc(path: &Path) -> Result<SkeletonGraph> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_swc(&text, path)
}
