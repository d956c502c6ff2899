//! Synthetic tubular trees with known centerlines.
//!
//! All randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `PhantomSpec::seed`. Tree geometry uses stream 0, per-frame motion stream
//! `2k + 1` and per-frame noise stream `2k + 2` for frame `k` (0-based), so
//! frame 0 of a series is exactly `generate(spec)`.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};

use crate::error::{Error, Result};
use crate::skeleton::SkeletonGraph;
use crate::volume::{SegMask, Volume3, VoxelId};

const TREE_ATTEMPTS: usize = 200;
const BRANCH_ATTEMPTS: usize = 100;
const MOTION_ATTEMPTS: usize = 100;
const MIN_PRIMARY_ANGLE_DEG: f64 = 70.0;
const CHILD_ANGLE_DEG: (f64, f64) = (35.0, 55.0);
const MAX_BEND: f64 = 0.15;

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub seed: u64,
    /// Branches leaving the soma.
    pub n_primary: usize,
    /// Hierarchy depth; every branch above the deepest level splits in two.
    pub max_depth: u32,
    /// Branch length range in voxels (primaries additionally cross the soma).
    pub branch_length_range: (f64, f64),
    pub tube_radius: f64,
    pub soma_radius: f64,
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub noise_sigma: f64,
    /// Largest tip displacement (voxels) from its frame-0 position.
    pub motion_amplitude: f64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            n_primary: 3,
            max_depth: 2,
            branch_length_range: (9.0, 13.0),
            tube_radius: 1.5,
            soma_radius: 3.0,
            dims: [64, 64, 64],
            spacing: [1.0; 3],
            noise_sigma: 0.0,
            motion_amplitude: 2.0,
        }
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        let (lo, hi) = self.branch_length_range;
        if self.n_primary == 0 || self.max_depth == 0 {
            return bad("n_primary and max_depth must be positive");
        }
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return bad("branch_length_range must be positive and ordered");
        }
        if !(self.tube_radius > 0.0 && self.soma_radius > 0.0) {
            return bad("tube_radius and soma_radius must be positive");
        }
        if !(self.noise_sigma >= 0.0 && self.motion_amplitude >= 0.0) {
            return bad("noise_sigma and motion_amplitude must be non-negative");
        }
        if self.spacing.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return bad("spacing must be positive");
        }
        let need = 2.0 * (self.soma_radius + self.margin() as f64) + 1.0;
        if self.dims.iter().any(|&d| (d as f64) < need) {
            return Err(Error::InvalidParameter(format!(
                "dims {:?} cannot hold the soma",
                self.dims
            )));
        }
        Ok(())
    }

    fn margin(&self) -> usize {
        self.tube_radius.ceil() as usize + 1
    }

    fn separation(&self) -> f64 {
        2.0 * self.tube_radius + 3.0
    }

    fn center(&self) -> VoxelId {
        VoxelId::new(self.dims[0] / 2, self.dims[1] / 2, self.dims[2] / 2)
    }
}

/// One generated frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub image: Volume3,
    pub mask: SegMask,
    pub skeleton: SkeletonGraph,
}

#[derive(Debug, Clone, PartialEq)]
struct Branch {
    parent: Option<usize>,
    depth: u32,
    dir: [f64; 3],
    end: VoxelId,
    /// Control-point offset from the chord midpoint.
    bend: [f64; 3],
    path: Vec<VoxelId>,
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn scale(a: [f64; 3], k: f64) -> [f64; 3] {
    [a[0] * k, a[1] * k, a[2] * k]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

fn unit(a: [f64; 3]) -> [f64; 3] {
    scale(a, 1.0 / norm(a))
}

fn pos(v: VoxelId) -> [f64; 3] {
    [v.x as f64, v.y as f64, v.z as f64]
}

fn sphere(rng: &mut ChaCha8Rng) -> [f64; 3] {
    UnitSphere.sample(rng)
}

/// Random unit vector orthogonal to `d`.
fn perpendicular(rng: &mut ChaCha8Rng, d: [f64; 3]) -> [f64; 3] {
    loop {
        let r = sphere(rng);
        let p = add(r, scale(d, -dot(r, d)));
        if norm(p) > 1e-3 {
            return unit(p);
        }
    }
}

fn to_voxel(p: [f64; 3], dims: [usize; 3]) -> Option<VoxelId> {
    let mut c = [0usize; 3];
    for k in 0..3 {
        let r = p[k].round();
        if r < 0.0 || r >= dims[k] as f64 {
            return None;
        }
        c[k] = r as usize;
    }
    Some(VoxelId::new(c[0], c[1], c[2]))
}

/// 26-connected simple voxel path along the quadratic Bézier `a -> ctrl -> b`.
fn rasterize(a: VoxelId, b: VoxelId, ctrl: [f64; 3]) -> Vec<VoxelId> {
    let (pa, pb) = (pos(a), pos(b));
    let n = ((norm(add(pb, scale(pa, -1.0))) + norm(add(ctrl, scale(pa, -1.0)))) * 8.0)
        .ceil()
        .max(1.0) as usize;
    let mut path: Vec<VoxelId> = vec![a];
    for i in 1..=n {
        let t = i as f64 / n as f64;
        let p = add(
            add(scale(pa, (1.0 - t) * (1.0 - t)), scale(ctrl, 2.0 * t * (1.0 - t))),
            scale(pb, t * t),
        );
        let v = VoxelId::new(p[0].round() as usize, p[1].round() as usize, p[2].round() as usize);
        let last = *path.last().unwrap();
        if v == last {
            continue;
        }
        if !last.is_neighbor26(v) {
            // dense sampling makes gaps rare; bridge them with a straight step
            let d = [
                v.x as i64 - last.x as i64,
                v.y as i64 - last.y as i64,
                v.z as i64 - last.z as i64,
            ];
            let steps = d.iter().map(|x| x.abs()).max().unwrap();
            for s in 1..steps {
                let q = (0..3)
                    .map(|k| (pos(last)[k] + d[k] as f64 * s as f64 / steps as f64).round() as usize)
                    .collect::<Vec<_>>();
                path.push(VoxelId::new(q[0], q[1], q[2]));
            }
        }
        path.push(v);
    }
    if *path.last().unwrap() != b {
        path.push(b);
    }
    // drop loops, then corners that a diagonal step can cut
    let mut simple: Vec<VoxelId> = Vec::with_capacity(path.len());
    for v in path {
        if let Some(i) = simple.iter().position(|&u| u == v) {
            simple.truncate(i);
        }
        simple.push(v);
    }
    let mut out: Vec<VoxelId> = Vec::with_capacity(simple.len());
    for v in simple {
        while out.len() >= 2 && out[out.len() - 2].is_neighbor26(v) {
            out.pop();
        }
        out.push(v);
    }
    out
}

struct Tree {
    root: VoxelId,
    branches: Vec<Branch>,
}

impl Tree {
    fn start(&self, i: usize) -> VoxelId {
        match self.branches[i].parent {
            None => self.root,
            Some(p) => self.branches[p].end,
        }
    }

    fn children(&self, i: usize) -> Vec<usize> {
        (0..self.branches.len())
            .filter(|&j| self.branches[j].parent == Some(i))
            .collect()
    }

    fn reraster(&mut self, i: usize) {
        let a = self.start(i);
        let b = &self.branches[i];
        let mid = scale(add(pos(a), pos(b.end)), 0.5);
        let path = rasterize(a, b.end, add(mid, b.bend));
        self.branches[i].path = path;
    }

    fn skeleton(&self, spec: &PhantomSpec) -> Result<SkeletonGraph> {
        let mut parents = HashMap::new();
        for b in &self.branches {
            for w in b.path.windows(2) {
                parents.insert(w[1], w[0]);
            }
        }
        SkeletonGraph::from_parent_map(spec.dims, spec.spacing, self.root, &parents)
    }
}

/// Whether branch `i` fits the volume and keeps its distance from the soma
/// and from every other branch in `others`.
fn fits(spec: &PhantomSpec, tree: &Tree, i: usize, others: impl Iterator<Item = usize>) -> bool {
    let b = &tree.branches[i];
    let m = spec.margin();
    let inside = |v: &VoxelId| (0..3).all(|k| v.as_array()[k] >= m && v.as_array()[k] + m < spec.dims[k]);
    if !b.path.iter().all(inside) {
        return false;
    }
    let c = pos(tree.root);
    let soma_zone = spec.soma_radius + spec.tube_radius + 2.0;
    let from_soma = |v: VoxelId| norm(add(pos(v), scale(c, -1.0)));
    if b.parent.is_some() && b.path.iter().any(|&v| from_soma(v) < soma_zone) {
        return false;
    }
    // a branch must leave the soma zone for good once it has crossed it
    if b.parent.is_none() {
        let exit = b.path.iter().position(|&v| from_soma(v) >= soma_zone);
        match exit {
            Some(e) if b.path[e..].iter().all(|&v| from_soma(v) >= soma_zone) => {}
            _ => return false,
        }
    }
    let sep = spec.separation();
    let near = (1.5 * sep).max(soma_zone);
    let start_i = tree.start(i);
    for j in others {
        if j == i {
            continue;
        }
        let o = &tree.branches[j];
        let start_j = tree.start(j);
        let shared = if start_i == start_j || o.end == start_i {
            Some(start_i)
        } else if b.end == start_j {
            Some(start_j)
        } else {
            None
        };
        for &u in &b.path {
            for &w in &o.path {
                if Some(u) == shared && u == w {
                    continue;
                }
                if u == w {
                    return false;
                }
                if let Some(s) = shared {
                    if u.voxel_distance(s) < near && w.voxel_distance(s) < near {
                        continue;
                    }
                }
                if u.voxel_distance(w) < sep {
                    return false;
                }
            }
        }
    }
    true
}

fn grow(spec: &PhantomSpec, rng: &mut ChaCha8Rng) -> Option<Tree> {
    let root = spec.center();
    let mut tree = Tree {
        root,
        branches: Vec::new(),
    };
    let (lo, hi) = spec.branch_length_range;
    let try_branch = |tree: &mut Tree, rng: &mut ChaCha8Rng, parent: Option<usize>, dir: [f64; 3]| -> bool {
        let (start, depth, extra) = match parent {
            None => (root, 1, spec.soma_radius),
            Some(p) => (tree.branches[p].end, tree.branches[p].depth + 1, 0.0),
        };
        let len = extra + rng.random_range(lo..=hi);
        let Some(end) = to_voxel(add(pos(start), scale(dir, len)), spec.dims) else {
            return false;
        };
        let bend = scale(perpendicular(rng, dir), rng.random_range(-MAX_BEND..=MAX_BEND) * len);
        tree.branches.push(Branch {
            parent,
            depth,
            dir,
            end,
            bend,
            path: Vec::new(),
        });
        let i = tree.branches.len() - 1;
        tree.reraster(i);
        if fits(spec, tree, i, 0..i) {
            true
        } else {
            tree.branches.pop();
            false
        }
    };

    for _ in 0..spec.n_primary {
        let placed = (0..BRANCH_ATTEMPTS).any(|_| {
            let d = sphere(rng);
            let spread = tree
                .branches
                .iter()
                .all(|b| dot(b.dir, d) <= MIN_PRIMARY_ANGLE_DEG.to_radians().cos());
            spread && try_branch(&mut tree, rng, None, d)
        });
        if !placed {
            return None;
        }
    }
    let mut frontier: Vec<usize> = (0..tree.branches.len()).collect();
    for _ in 1..spec.max_depth {
        let mut next = Vec::new();
        for p in frontier {
            let pd = tree.branches[p].dir;
            let before = tree.branches.len();
            let placed = (0..BRANCH_ATTEMPTS).any(|_| {
                let axis = perpendicular(rng, pd);
                let (a0, a1) = CHILD_ANGLE_DEG;
                let t1 = rng.random_range(a0..=a1).to_radians();
                let t2 = rng.random_range(a0..=a1).to_radians();
                let d1 = unit(add(scale(pd, t1.cos()), scale(axis, t1.sin())));
                let d2 = unit(add(scale(pd, t2.cos()), scale(axis, -t2.sin())));
                if try_branch(&mut tree, rng, Some(p), d1) {
                    if try_branch(&mut tree, rng, Some(p), d2) {
                        return true;
                    }
                    tree.branches.pop();
                }
                false
            });
            if !placed {
                return None;
            }
            next.extend(before..tree.branches.len());
        }
        frontier = next;
    }
    Some(tree)
}

fn render(spec: &PhantomSpec, tree: &Tree, noise_stream: u64) -> Result<Phantom> {
    let skeleton = tree.skeleton(spec)?;
    let mut mask = SegMask::empty(spec.dims, spec.spacing)?;
    let c = tree.root;
    let r = spec.soma_radius;
    let ri = r.ceil() as i64;
    for dz in -ri..=ri {
        for dy in -ri..=ri {
            for dx in -ri..=ri {
                if ((dx * dx + dy * dy + dz * dz) as f64) <= r * r {
                    if let Some(v) = c.offset([dx, dy, dz], spec.dims) {
                        mask.set(v, true, true);
                    }
                }
            }
        }
    }
    // tubes end flush with their terminal voxel, so the visible tip is the
    // centerline tip
    let t = spec.tube_radius;
    let ti = t.ceil() as i64;
    let children = skeleton.children();
    for (i, seg) in skeleton.segments.iter().enumerate() {
        let cut = children[i].is_empty().then(|| {
            let tip = seg.distal();
            let back = seg.path[seg.path.len().saturating_sub(4)];
            (pos(tip), unit(sub(pos(tip), pos(back))))
        });
        for &v in &seg.path {
            for dz in -ti..=ti {
                for dy in -ti..=ti {
                    for dx in -ti..=ti {
                        if ((dx * dx + dy * dy + dz * dz) as f64) > t * t {
                            continue;
                        }
                        let Some(u) = v.offset([dx, dy, dz], spec.dims) else {
                            continue;
                        };
                        if cut.is_some_and(|(tip, d)| dot(sub(pos(u), tip), d) > 0.5) {
                            continue;
                        }
                        if !mask.is_foreground(u) {
                            mask.set(u, true, false);
                        }
                    }
                }
            }
        }
    }
    let mut data: Vec<f64> = mask.foreground().iter().map(|&f| if f { 1.0 } else { 0.0 }).collect();
    if spec.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(noise_stream);
        let normal =
            Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::InvalidParameter(format!("noise_sigma: {e}")))?;
        for x in &mut data {
            *x = (*x + normal.sample(&mut rng)).clamp(0.0, 1.0);
        }
    }
    Ok(Phantom {
        image: Volume3::new(spec.dims, spec.spacing, data)?,
        mask,
        skeleton,
    })
}

fn base_tree(spec: &PhantomSpec) -> Result<Tree> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..TREE_ATTEMPTS).find_map(|_| grow(spec, &mut rng)).ok_or_else(|| {
        Error::InvalidParameter(format!(
            "no tree with {} primaries and depth {} fits in {:?}",
            spec.n_primary, spec.max_depth, spec.dims
        ))
    })
}

/// One phantom: image, mask and ground-truth skeleton.
pub fn generate(spec: &PhantomSpec) -> Result<Phantom> {
    render(spec, &base_tree(spec)?, 2)
}

/// Moves tips (≤ `motion_amplitude` from their frame-0 position) and
/// bifurcations (≤ 1 voxel along an axis) and re-derives the branches.
fn perturb(spec: &PhantomSpec, base: &Tree, rng: &mut ChaCha8Rng) -> Tree {
    let amp = spec.motion_amplitude;
    let jitter = amp.min(1.0).floor() as i64;
    for _ in 0..MOTION_ATTEMPTS {
        let mut t = Tree {
            root: base.root,
            branches: base.branches.clone(),
        };
        let mut ok = true;
        for i in 0..t.branches.len() {
            let home = base.branches[i].end;
            if t.children(i).is_empty() {
                let off = scale(sphere(rng), amp * rng.random::<f64>());
                match to_voxel(add(pos(home), off), spec.dims) {
                    Some(v) if v.voxel_distance(home) <= amp => t.branches[i].end = v,
                    _ => ok = false,
                }
            } else if jitter > 0 {
                let axis = rng.random_range(0..7usize);
                if axis > 0 {
                    let mut d = [0i64; 3];
                    d[(axis - 1) / 2] = if axis % 2 == 0 { jitter } else { -jitter };
                    match home.offset(d, spec.dims) {
                        Some(v) => t.branches[i].end = v,
                        None => ok = false,
                    }
                }
            }
        }
        if !ok {
            continue;
        }
        for i in 0..t.branches.len() {
            t.reraster(i);
        }
        let n = t.branches.len();
        if (0..n).all(|i| fits(spec, &t, i, 0..n)) {
            return t;
        }
    }
    log::warn!("no admissible motion found; frame keeps the rest geometry");
    Tree {
        root: base.root,
        branches: base.branches.clone(),
    }
}

/// `n_frames` phantoms; frame 0 equals `generate(spec)`.
pub fn generate_series(spec: &PhantomSpec, n_frames: usize) -> Result<Vec<Phantom>> {
    if n_frames == 0 {
        return Err(Error::InvalidParameter("n_frames must be positive".into()));
    }
    let base = base_tree(spec)?;
    let mut out = vec![render(spec, &base, 2)?];
    for k in 1..n_frames as u64 {
        let tree = if spec.motion_amplitude > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(2 * k + 1);
            perturb(spec, &base, &mut rng)
        } else {
            Tree {
                root: base.root,
                branches: base.branches.clone(),
            }
        };
        let noise_stream = if spec.motion_amplitude > 0.0 { 2 * k + 2 } else { 2 };
        out.push(render(spec, &tree, noise_stream)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> PhantomSpec {
        PhantomSpec {
            seed: 11,
            ..PhantomSpec::default()
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(generate(&small()).unwrap(), generate(&small()).unwrap());
        let other = PhantomSpec { seed: 12, ..small() };
        assert_ne!(generate(&small()).unwrap().skeleton, generate(&other).unwrap().skeleton);
    }

    #[test]
    fn two_primaries_depth_one() {
        let spec = PhantomSpec {
            n_primary: 2,
            max_depth: 1,
            ..small()
        };
        let p = generate(&spec).unwrap();
        assert_eq!(p.skeleton.segments.len(), 2);
        assert!(p.skeleton.bifurcations().is_empty());
        assert_eq!(p.skeleton.terminals().len(), 2);
    }

    #[test]
    fn mask_hugs_centerline() {
        for seed in 0..4 {
            let spec = PhantomSpec { seed, ..small() };
            let p = generate(&spec).unwrap();
            p.skeleton.validate().unwrap();
            let gt = p.skeleton.voxels();
            assert_eq!(p.skeleton.bifurcations().len(), 3);
            assert_eq!(p.skeleton.terminals().len(), 6);
            for v in &gt {
                assert!(p.mask.is_foreground(*v));
            }
            let c = p.skeleton.root;
            for v in p.mask.foreground_voxels() {
                let in_soma = v.voxel_distance(c) <= spec.soma_radius;
                let near = gt.iter().any(|g| g.voxel_distance(v) <= spec.tube_radius + 0.5);
                assert!(in_soma || near, "{v}");
                assert_eq!(p.mask.is_soma(v), in_soma);
            }
        }
    }

    #[test]
    fn noise_is_clipped() {
        let spec = PhantomSpec {
            noise_sigma: 0.3,
            ..small()
        };
        let p = generate(&spec).unwrap();
        let (lo, hi) = p.image.min_max();
        assert!(lo >= 0.0 && hi <= 1.0);
        assert!(p.image.data().iter().any(|&x| x > 0.0 && x < 1.0));
    }

    #[test]
    fn still_series() {
        let spec = PhantomSpec {
            motion_amplitude: 0.0,
            ..small()
        };
        let s = generate_series(&spec, 4).unwrap();
        assert!(s.iter().all(|f| *f == s[0]));
    }

    #[test]
    fn moving_series() {
        let spec = small();
        let s = generate_series(&spec, 13).unwrap();
        assert_eq!(s[0], generate(&spec).unwrap());
        let tips0 = s[0].skeleton.terminals();
        for f in &s {
            f.skeleton.validate().unwrap();
            assert_eq!(f.skeleton.bifurcations().len(), 3);
            assert_eq!(f.skeleton.terminals().len(), 6);
            for t in f.skeleton.terminals() {
                let d = tips0.iter().map(|u| u.voxel_distance(t)).fold(f64::INFINITY, f64::min);
                assert!(d <= spec.motion_amplitude + 1e-12);
            }
        }
        assert!(s.iter().skip(1).any(|f| f.skeleton != s[0].skeleton));
    }

    #[test]
    fn rejects_impossible_specs() {
        let spec = PhantomSpec {
            dims: [8, 8, 8],
            ..small()
        };
        assert!(generate(&spec).is_err());
        let spec = PhantomSpec {
            n_primary: 0,
            ..small()
        };
        assert!(generate(&spec).is_err());
    }

    #[test]
    fn rasterized_arcs_are_thin() {
        let a = VoxelId::new(2, 2, 2);
        let b = VoxelId::new(20, 9, 5);
        let p = rasterize(a, b, [10.0, 2.0, 8.0]);
        assert_eq!((p[0], *p.last().unwrap()), (a, b));
        for w in p.windows(2) {
            assert!(w[0].is_neighbor26(w[1]));
        }
        for i in 0..p.len() {
            for j in i + 2..p.len() {
                assert!(!p[i].is_neighbor26(p[j]));
            }
        }
    }
}
