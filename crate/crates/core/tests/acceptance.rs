//! Acceptance gate: one PASS/FAIL line per primary criterion, non-zero exit
//! if any criterion fails.
//!
//! Every oracle here is computed independently of the library code it
//! checks (brute-force relaxation, closed-form cubic roots, explicit
//! landmark bookkeeping).
#![allow(clippy::needless_range_loop)]

use std::collections::{HashMap, HashSet};
use std::time::{Duration, Instant};

use gliaskel::graph::dijkstra;
use gliaskel::io::to_swc_string;
use gliaskel::metrics::{evaluate, landmark_distance};
use gliaskel::phantom::{generate, generate_series, Phantom, PhantomSpec};
use gliaskel::temporal::{frame_objective, morph_skeleton, run_series, MorphConfig, SeriesOptions};
use gliaskel::tracer::trace_initial_skeleton;
use gliaskel::vesselness::{eigen_sym3, iv_transform, vesselness_response};
use gliaskel::{SegMask, SkeletonGraph, Volume3, VoxelId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------- oracles

const OFFSETS: [i64; 3] = [-1, 0, 1];

/// Bellman–Ford over every foreground 26-neighbour pair until nothing relaxes.
fn bellman_ford(m: &SegMask, source: VoxelId) -> HashMap<VoxelId, f64> {
    let [nx, ny, nz] = m.dims();
    let s = m.spacing();
    let fg: Vec<VoxelId> = (0..nz)
        .flat_map(|z| (0..ny).flat_map(move |y| (0..nx).map(move |x| VoxelId::new(x, y, z))))
        .filter(|&v| m.is_foreground(v))
        .collect();
    let mut edges = Vec::new();
    for &u in &fg {
        for dx in OFFSETS {
            for dy in OFFSETS {
                for dz in OFFSETS {
                    if (dx, dy, dz) == (0, 0, 0) {
                        continue;
                    }
                    let (x, y, z) = (u.x as i64 + dx, u.y as i64 + dy, u.z as i64 + dz);
                    if x < 0 || y < 0 || z < 0 || x >= nx as i64 || y >= ny as i64 || z >= nz as i64 {
                        continue;
                    }
                    let w = VoxelId::new(x as usize, y as usize, z as usize);
                    if m.is_foreground(w) {
                        let len =
                            ((dx as f64 * s[0]).powi(2) + (dy as f64 * s[1]).powi(2) + (dz as f64 * s[2]).powi(2))
                                .sqrt();
                        edges.push((u, w, len));
                    }
                }
            }
        }
    }
    let mut d: HashMap<VoxelId, f64> = fg.iter().map(|&v| (v, f64::INFINITY)).collect();
    d.insert(source, 0.0);
    for _ in 0..fg.len() {
        let mut changed = false;
        for &(u, w, len) in &edges {
            let cand = d[&u] + len;
            if cand < d[&w] {
                d.insert(w, cand);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    d
}

/// Roots of det(λI − A) by the trigonometric cubic formula, polished with
/// Newton steps on the polynomial itself.
fn char_poly_roots(a: &[[f64; 3]; 3]) -> [f64; 3] {
    let tr = a[0][0] + a[1][1] + a[2][2];
    let minors = a[0][0] * a[1][1] - a[0][1] * a[1][0] + a[0][0] * a[2][2] - a[0][2] * a[2][0] + a[1][1] * a[2][2]
        - a[1][2] * a[2][1];
    let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    // λ³ − tr λ² + minors λ − det, depressed with λ = t + tr/3
    let shift = tr / 3.0;
    let p = minors - tr * tr / 3.0;
    let q = -2.0 * tr.powi(3) / 27.0 + tr * minors / 3.0 - det;
    let mut roots = if p.abs() < 1e-300 {
        [shift; 3]
    } else {
        let r = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * r)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        let tau = std::f64::consts::TAU / 3.0;
        [0.0, 1.0, 2.0].map(|k| shift + r * (phi - k * tau).cos())
    };
    let f = |l: f64| ((l - tr) * l + minors) * l - det;
    let df = |l: f64| (3.0 * l - 2.0 * tr) * l + minors;
    for r in roots.iter_mut() {
        for _ in 0..4 {
            let d = df(*r);
            if d.abs() > 1e-12 {
                let next = *r - f(*r) / d;
                if f(next).abs() < f(*r).abs() {
                    *r = next;
                }
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    roots
}

/// Tree check independent of the skeleton type: distinct voxels, edges
/// between consecutive path voxels, connected with exactly V − 1 edges.
fn is_tree(s: &SkeletonGraph) -> bool {
    let mut verts: HashSet<VoxelId> = HashSet::from([s.root]);
    let mut edges: HashSet<(VoxelId, VoxelId)> = HashSet::new();
    for seg in &s.segments {
        verts.extend(seg.path.iter().copied());
        for w in seg.path.windows(2) {
            edges.insert((w[0].min(w[1]), w[0].max(w[1])));
        }
    }
    if edges.len() + 1 != verts.len() {
        return false;
    }
    let mut adj: HashMap<VoxelId, Vec<VoxelId>> = HashMap::new();
    for &(a, b) in &edges {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    let mut seen = HashSet::from([s.root]);
    let mut stack = vec![s.root];
    while let Some(v) = stack.pop() {
        for &w in adj.get(&v).map(Vec::as_slice).unwrap_or(&[]) {
            if seen.insert(w) {
                stack.push(w);
            }
        }
    }
    seen.len() == verts.len()
}

fn nearest(p: VoxelId, set: &[VoxelId]) -> f64 {
    set.iter().map(|&q| p.voxel_distance(q)).fold(f64::INFINITY, f64::min)
}

/// Mean distance (voxels) from each traced voxel to the nearest centerline voxel.
fn centerline_distance(test: &SkeletonGraph, gt: &SkeletonGraph) -> f64 {
    let (a, b) = (test.voxels(), gt.voxels());
    a.iter().map(|&p| nearest(p, &b)).sum::<f64>() / a.len() as f64
}

/// Mean over every ground-truth bifurcation and terminal of the distance to
/// the nearest test landmark of the same kind.
fn landmark_mean(test: &SkeletonGraph, gt: &SkeletonGraph) -> f64 {
    let mut ds = Vec::new();
    for (g, t) in [
        (gt.bifurcations(), test.bifurcations()),
        (gt.terminals(), test.terminals()),
    ] {
        ds.extend(g.iter().map(|&p| nearest(p, &t)));
    }
    ds.iter().sum::<f64>() / ds.len() as f64
}

fn counts(s: &SkeletonGraph) -> (usize, usize) {
    (s.bifurcations().len(), s.terminals().len())
}

// -------------------------------------------------------------- criteria

fn shortest_path_oracle() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut mismatches = 0usize;
    let mut compared = 0usize;
    for case in 0..100 {
        let dims = [6, 6, 6];
        let density = rng.random_range(0.3..0.9);
        let fg: Vec<bool> = (0..216).map(|_| rng.random_bool(density)).collect();
        let spacing = if case % 2 == 0 {
            [1.0; 3]
        } else {
            [
                rng.random_range(0.2..3.0),
                rng.random_range(0.2..3.0),
                rng.random_range(0.2..3.0),
            ]
        };
        let Some(src) = fg.iter().position(|&f| f) else {
            continue;
        };
        let m = SegMask::new(dims, spacing, fg, vec![false; 216]).unwrap();
        let source = VoxelId::new(src % 6, (src / 6) % 6, src / 36);
        let p = dijkstra(&m, source, None).unwrap();
        for (v, d) in bellman_ford(&m, source) {
            compared += 1;
            if p.dist(v).to_bits() != d.to_bits() {
                mismatches += 1;
            }
        }
    }
    let el = t0.elapsed();
    outcome(
        mismatches == 0 && el < Duration::from_secs(5),
        format!("{compared} distances, {mismatches} mismatches, {el:.2?}"),
    )
}

fn trace_fidelity() -> Outcome {
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    for seed in 0..20 {
        let ph = generate(&PhantomSpec {
            seed,
            ..PhantomSpec::default()
        })
        .unwrap();
        let s = trace_initial_skeleton(&ph.mask).unwrap();
        let d = centerline_distance(&s, &ph.skeleton);
        worst = worst.max(d);
        if d > 1.0 || !is_tree(&s) || counts(&s) != counts(&ph.skeleton) {
            bad.push(seed);
        }
    }
    let el = t0.elapsed();
    outcome(
        bad.is_empty() && el < Duration::from_secs(60),
        format!("20 phantoms, worst mean distance {worst:.3} voxels, failing seeds {bad:?}, {el:.2?}"),
    )
}

fn eigen_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_val, mut worst_rec): (f64, f64) = (0.0, 0.0);
    for _ in 0..1000 {
        let mut h = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in i..3 {
                h[i][j] = rng.random_range(-1.0..1.0);
                h[j][i] = h[i][j];
            }
        }
        let e = eigen_sym3(&h).unwrap();
        let mut got = e.values;
        got.sort_by(f64::total_cmp);
        let want = char_poly_roots(&h);
        for k in 0..3 {
            worst_val = worst_val.max((got[k] - want[k]).abs());
        }
        let r = e.reconstruct();
        let norm = h.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
        let res = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| (h[i][j] - r[i][j]).powi(2))
            .sum::<f64>()
            .sqrt();
        worst_rec = worst_rec.max(res / norm.max(1.0));
    }
    outcome(
        worst_val <= 1e-9 && worst_rec <= 1e-9,
        format!("1000 matrices, worst eigenvalue error {worst_val:.2e}, worst residual {worst_rec:.2e}"),
    )
}

fn cylinder_shape() -> Outcome {
    let dims = [33, 33, 24];
    let c = 16.0;
    let v = Volume3::from_fn(dims, [1.0; 3], |p| {
        let r2 = (p.x as f64 - c).powi(2) + (p.y as f64 - c).powi(2);
        if r2 <= 9.0 {
            1.0
        } else {
            0.0
        }
    })
    .unwrap();
    let resp = vesselness_response(&v, &[2.0, 3.0, 4.0]).unwrap();
    let mut failing = Vec::new();
    let mut min_ratio = f64::INFINITY;
    for z in 1..dims[2] - 1 {
        let on = resp.at(VoxelId::new(16, 16, z));
        let off = [
            VoxelId::new(19, 16, z),
            VoxelId::new(13, 16, z),
            VoxelId::new(16, 19, z),
            VoxelId::new(16, 13, z),
        ]
        .map(|p| resp.at(p))
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
        min_ratio = min_ratio.min(on - off);
        if on <= off {
            failing.push(z);
        }
    }
    outcome(
        failing.is_empty(),
        format!(
            "{} interior slices, smallest on−off margin {min_ratio:.4}, failing slices {failing:?}",
            dims[2] - 2
        ),
    )
}

fn iv_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut violations = 0usize;
    for case in 0..50 {
        let dims = [rng.random_range(1..9), rng.random_range(1..9), rng.random_range(1..9)];
        let n = dims[0] * dims[1] * dims[2];
        let mut data: Vec<f64> = (0..n)
            .map(|_| match rng.random_range(0..4) {
                0 => 0.0,
                1 => -rng.random_range(0.0..10.0),
                _ => rng.random_range(0.0..10.0),
            })
            .collect();
        if case == 0 {
            data.iter_mut().for_each(|x| *x = x.abs() + 1.0);
        }
        data[0] = 1.0;
        let vol = Volume3::new(dims, [1.0; 3], data.clone()).unwrap();
        let map = iv_transform(&vol).unwrap();
        let pos: Vec<f64> = data.iter().copied().filter(|&x| x > 0.0).collect();
        let mean = pos.iter().sum::<f64>() / pos.len() as f64;
        if (map.x_avg - mean).abs() > 1e-12 * mean {
            violations += 1;
        }
        for (x, y) in data.iter().zip(map.volume.data()) {
            let want = if *x > 0.0 { *x } else { -map.x_avg };
            if want.to_bits() != y.to_bits() {
                violations += 1;
            }
        }
    }
    outcome(violations == 0, format!("50 random volumes, {violations} violations"))
}

fn morph_improvement() -> Outcome {
    let opts = SeriesOptions::default();
    let cfg = MorphConfig::default();
    let (mut better, mut within, mut kept) = (0, 0, 0);
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let spec = PhantomSpec {
            seed,
            motion_amplitude: 3.0,
            ..PhantomSpec::default()
        };
        let frames = generate_series(&spec, 2).unwrap();
        let prev = &frames[0].skeleton;
        let gt = &frames[1].skeleton;
        let iv = frame_objective(&frames[1].image, &opts).unwrap();
        let m = morph_skeleton(prev, &iv, &cfg).unwrap();
        let (before, after) = (landmark_mean(prev, gt), landmark_mean(&m.skeleton, gt));
        worst = worst.max(after);
        better += usize::from(after < before);
        within += usize::from(after <= 1.5);
        kept += usize::from(counts(&m.skeleton) == counts(prev) && m.skeleton.segments.len() == prev.segments.len());
    }
    outcome(
        better >= 19 && within == 20 && kept == 20,
        format!("closer {better}/20, within 1.5 voxels {within}/20 (worst {worst:.3}), counts kept {kept}/20"),
    )
}

fn temporal_consistency() -> Outcome {
    let spec = PhantomSpec {
        seed: 4,
        ..PhantomSpec::default()
    };
    let frames: Vec<Phantom> = generate_series(&spec, 13).unwrap();
    let images: Vec<Volume3> = frames.iter().map(|f| f.image.clone()).collect();
    let out = run_series(
        &images,
        &frames[0].mask,
        &MorphConfig::default(),
        &SeriesOptions::default(),
    )
    .unwrap();
    let n: Vec<f64> = out.iter().map(|f| f.skeleton.bifurcations().len() as f64).collect();
    let mean = n.iter().sum::<f64>() / n.len() as f64;
    let var = n.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n.len() as f64;
    outcome(
        var == 0.0 && n.len() == 13,
        format!("{} frames, bifurcation counts {n:?}, variance {var}", n.len()),
    )
}

fn metrics_self_consistency() -> Outcome {
    let mut skeletons: Vec<SkeletonGraph> = Vec::new();
    for seed in 0..5 {
        let ph = generate(&PhantomSpec {
            seed,
            ..PhantomSpec::default()
        })
        .unwrap();
        skeletons.push(trace_initial_skeleton(&ph.mask).unwrap());
        skeletons.push(ph.skeleton);
    }
    let mut bad = 0;
    for s in &skeletons {
        let r = evaluate(s, s, 2.0).unwrap();
        let (db, dt) = landmark_distance(s, s);
        let ok = r.per_hierarchy_accuracy.iter().all(|h| h.accuracy == 1.0)
            && r.weighted_accuracy_normalized == 1.0
            && db.unwrap_or(0.0) == 0.0
            && dt.unwrap_or(0.0) == 0.0
            && r.n_bifurcations_test == r.n_bifurcations_gt
            && r.n_terminals_test == r.n_terminals_gt;
        bad += usize::from(!ok);
    }
    outcome(bad == 0, format!("{} skeletons, {bad} inconsistent", skeletons.len()))
}

fn fixed_point() -> Outcome {
    let mut detail = Vec::new();
    let mut all = true;
    for seed in 0..3 {
        let ph = generate(&PhantomSpec {
            seed,
            ..PhantomSpec::default()
        })
        .unwrap();
        let frames = vec![ph.image.clone(); 4];
        let out = run_series(&frames, &ph.mask, &MorphConfig::default(), &SeriesOptions::default()).unwrap();
        let swc: Vec<String> = out.iter().map(|f| to_swc_string(&f.skeleton)).collect();
        let equal_s1 = swc.iter().filter(|s| **s == swc[0]).count();
        let stable = swc[1..].windows(2).all(|w| w[0] == w[1]);
        let s1 = &out[0].skeleton;
        let moved = s1
            .segments
            .iter()
            .zip(&out[1].skeleton.segments)
            .filter(|(a, b)| a.path != b.path)
            .count();
        all &= equal_s1 == swc.len();
        detail.push(format!(
            "seed {seed}: {equal_s1}/{} equal S1, {moved}/{} segments re-routed on frame 2, later frames stable: {stable}",
            swc.len(),
            s1.segments.len()
        ));
    }
    outcome(all, detail.join("; "))
}

fn determinism() -> Outcome {
    let spec = PhantomSpec {
        seed: 9,
        noise_sigma: 0.05,
        ..PhantomSpec::default()
    };
    let frames = generate_series(&spec, 3).unwrap();
    let images: Vec<Volume3> = frames.iter().map(|f| f.image.clone()).collect();
    let run = || {
        let out = run_series(
            &images,
            &frames[0].mask,
            &MorphConfig::default(),
            &SeriesOptions::default(),
        )
        .unwrap();
        let mut files = Vec::new();
        for (f, gt) in out.iter().zip(&frames) {
            files.push(to_swc_string(&f.skeleton));
            let report = evaluate(&f.skeleton, &gt.skeleton, 2.0).unwrap();
            files.push(serde_json::to_string_pretty(&report).unwrap());
            if let Some(m) = &f.morph {
                files.push(serde_json::to_string_pretty(&m.log()).unwrap());
            }
        }
        files
    };
    let a = run();
    let b = run();
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let c = single.install(run);
    let ok = a == b && a == c;
    outcome(
        ok,
        format!(
            "{} output files; rerun identical: {}; single-thread identical: {}",
            a.len(),
            a == b,
            a == c
        ),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        ("shortest-path oracle", shortest_path_oracle),
        ("trace fidelity", trace_fidelity),
        ("eigen oracle", eigen_oracle),
        ("vesselness cylinder shape", cylinder_shape),
        ("penalty transform contract", iv_contract),
        ("morph improvement", morph_improvement),
        ("temporal consistency", temporal_consistency),
        ("metrics self-consistency", metrics_self_consistency),
        ("fixed point", fixed_point),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let t0 = Instant::now();
        let o = check();
        failed += usize::from(!o.pass);
        println!(
            "{} {name}: {} [{:.1?}]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t0.elapsed()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
