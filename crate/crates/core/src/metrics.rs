//! Skeleton-vs-ground-truth scoring: per-hierarchy branch accuracy,
//! factorial-weighted totals, landmark counts and landmark distances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::SkeletonGraph;
use crate::volume::VoxelId;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_TOLERANCE_UM: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BranchCounts {
    pub hierarchy: u32,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl BranchCounts {
    pub fn accuracy(&self) -> f64 {
        let d = self.tp + self.fp + self.fn_;
        if d == 0 {
            0.0
        } else {
            self.tp as f64 / d as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyAccuracy {
    pub hierarchy: u32,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub per_hierarchy_accuracy: Vec<HierarchyAccuracy>,
    pub weighted_accuracy_normalized: f64,
    pub weighted_accuracy_paper_raw: f64,
    pub n_bifurcations_test: usize,
    pub n_bifurcations_gt: usize,
    pub n_terminals_test: usize,
    pub n_terminals_gt: usize,
    pub mean_bifurcation_distance_um: Option<f64>,
    pub mean_terminal_distance_um: Option<f64>,
}

fn check_spacing(a: &SkeletonGraph, b: &SkeletonGraph) -> Result<()> {
    let same = a
        .spacing
        .iter()
        .zip(&b.spacing)
        .all(|(x, y)| (x - y).abs() <= 1e-9 * x.abs().max(y.abs()));
    if same {
        Ok(())
    } else {
        Err(Error::SpacingMismatch(a.spacing, b.spacing))
    }
}

/// Mean over `a` of the distance (µm) to the nearest voxel of `b`.
fn directed_mean(a: &[VoxelId], b: &[VoxelId], spacing: [f64; 3]) -> f64 {
    let total: f64 = a
        .iter()
        .map(|&p| b.iter().map(|&q| p.distance(q, spacing)).fold(f64::INFINITY, f64::min))
        .sum();
    total / a.len() as f64
}

/// Larger of the two directed mean nearest-point distances.
pub fn branch_distance(a: &[VoxelId], b: &[VoxelId], spacing: [f64; 3]) -> f64 {
    directed_mean(a, b, spacing).max(directed_mean(b, a, spacing))
}

/// Greedy one-to-one branch matching inside each hierarchy level. Pairs
/// within `tol_um` are accepted in ascending distance order.
pub fn match_branches(test: &SkeletonGraph, gt: &SkeletonGraph, tol_um: f64) -> Result<Vec<BranchCounts>> {
    check_spacing(test, gt)?;
    if !(tol_um >= 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be >= 0, got {tol_um}")));
    }
    let h_max = test.max_hierarchy().max(gt.max_hierarchy());
    let mut out = Vec::new();
    for h in 1..=h_max {
        let t: Vec<&[VoxelId]> = test
            .segments
            .iter()
            .filter(|s| s.hierarchy == h)
            .map(|s| s.path.as_slice())
            .collect();
        let g: Vec<&[VoxelId]> = gt
            .segments
            .iter()
            .filter(|s| s.hierarchy == h)
            .map(|s| s.path.as_slice())
            .collect();
        if t.is_empty() && g.is_empty() {
            continue;
        }
        let mut pairs = Vec::new();
        for (i, a) in t.iter().enumerate() {
            for (j, b) in g.iter().enumerate() {
                let d = branch_distance(a, b, gt.spacing);
                if d <= tol_um {
                    pairs.push((d, i, j));
                }
            }
        }
        // ties ordered by the unordered pair of paths so the result does not
        // depend on which skeleton is called the test
        pairs.sort_by(|x, y| {
            let key = |p: &(f64, usize, usize)| {
                let (a, b) = (t[p.1], g[p.2]);
                if a <= b {
                    (a, b)
                } else {
                    (b, a)
                }
            };
            x.0.total_cmp(&y.0).then_with(|| key(x).cmp(&key(y)))
        });
        let mut used_t = vec![false; t.len()];
        let mut used_g = vec![false; g.len()];
        let mut tp = 0;
        for (_, i, j) in pairs {
            if !used_t[i] && !used_g[j] {
                used_t[i] = true;
                used_g[j] = true;
                tp += 1;
            }
        }
        out.push(BranchCounts {
            hierarchy: h,
            tp,
            fp: t.len() - tp,
            fn_: g.len() - tp,
        });
    }
    Ok(out)
}

/// `TP / (TP + FP + FN)` per hierarchy, as `(hierarchy, A)`.
pub fn hierarchy_accuracy(counts: &[BranchCounts]) -> Vec<(u32, f64)> {
    counts
        .iter()
        .filter(|c| c.tp + c.fp + c.fn_ > 0)
        .map(|c| (c.hierarchy, c.accuracy()))
        .collect()
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Returns `(normalized, raw)` with raw = `h_max_gt! · Σ A_n`. `a[n - 1]` is the accuracy of
/// hierarchy `n`; hierarchies `1..=h_max_gt` are summed, missing ones count
/// as 0. The normalized total weights hierarchy `n` by `(h_max_gt - n + 1)!`.
pub fn weighted_accuracy(a: &[f64], h_max_gt: u32) -> Result<(f64, f64)> {
    if h_max_gt < 1 {
        return Err(Error::InvalidParameter("ground truth has no hierarchy".into()));
    }
    if a.is_empty() {
        return Err(Error::InvalidParameter("no accuracies given".into()));
    }
    let acc = |n: u32| a.get(n as usize - 1).copied().unwrap_or(0.0);
    let (mut num, mut den, mut sum) = (0.0, 0.0, 0.0);
    for n in 1..=h_max_gt {
        let w = factorial(h_max_gt - n + 1);
        num += w * acc(n);
        den += w;
        sum += acc(n);
    }
    Ok((num / den, factorial(h_max_gt) * sum))
}

/// `(bifurcations, terminals)`.
pub fn count_structures(s: &SkeletonGraph) -> (usize, usize) {
    (s.bifurcations().len(), s.terminals().len())
}

fn mean_nearest(gt: &[VoxelId], test: &[VoxelId], spacing: [f64; 3]) -> Option<f64> {
    if gt.is_empty() || test.is_empty() {
        None
    } else {
        Some(directed_mean(gt, test, spacing))
    }
}

/// Mean distance (µm) from each GT bifurcation / terminal to the nearest test
/// landmark of the same kind; `None` when either side has none.
pub fn landmark_distance(test: &SkeletonGraph, gt: &SkeletonGraph) -> (Option<f64>, Option<f64>) {
    (
        mean_nearest(&gt.bifurcations(), &test.bifurcations(), gt.spacing),
        mean_nearest(&gt.terminals(), &test.terminals(), gt.spacing),
    )
}

/// Full report of `test` against `gt`. When the ground truth has no branches
/// the weighted totals are 1 for an equally empty test skeleton and 0
/// otherwise.
pub fn evaluate(test: &SkeletonGraph, gt: &SkeletonGraph, tol_um: f64) -> Result<EvalReport> {
    let counts = match_branches(test, gt, tol_um)?;
    let h_max_gt = gt.max_hierarchy();
    let (normalized, raw) = if h_max_gt == 0 {
        (if test.segments.is_empty() { 1.0 } else { 0.0 }, 0.0)
    } else {
        let mut a = vec![0.0; h_max_gt as usize];
        for c in &counts {
            if c.hierarchy <= h_max_gt {
                a[c.hierarchy as usize - 1] = c.accuracy();
            }
        }
        weighted_accuracy(&a, h_max_gt)?
    };
    let (bt, tt) = count_structures(test);
    let (bg, tg) = count_structures(gt);
    let (db, dt) = landmark_distance(test, gt);
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        per_hierarchy_accuracy: counts
            .iter()
            .map(|c| HierarchyAccuracy {
                hierarchy: c.hierarchy,
                tp: c.tp,
                fp: c.fp,
                fn_: c.fn_,
                accuracy: c.accuracy(),
            })
            .collect(),
        weighted_accuracy_normalized: normalized,
        weighted_accuracy_paper_raw: raw,
        n_bifurcations_test: bt,
        n_bifurcations_gt: bg,
        n_terminals_test: tt,
        n_terminals_gt: tg,
        mean_bifurcation_distance_um: db,
        mean_terminal_distance_um: dt,
    })
}
