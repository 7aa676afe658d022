//! Path experiments on the unit square: asymmetric label distributions
//! against symmetric baselines, and scaling/rotation sanity sweeps.
//!
//! The main experiment draws labels with different distributions on the two
//! halves of the square (Unif([0,1/5] ∪ [4/5,1]) on the left, Unif[2/5,3/5]
//! on the right — both symmetric about 1/2, so the critical coupling is
//! untouched), takes the tree path between the midpoints of the top and
//! bottom edges, trims it outside the ε-neighborhoods of its endpoints and
//! records which side of the midline the remaining segment occupies.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{invasion_tree, minimax_path, mst, MinimaxPath, Stop};
use crate::labels::{
    sample_regional, trial_seed, LabelField, RegionDistributionSpec,
};
use crate::lattice::{build_lattice, LatticeGraph, LatticeKind, LatticeSpec, SiteId};
use crate::stats::{
    mean_estimate, p_value_greater, proportion, two_sample_z, Estimate, Z95,
};

/// Which label law the trial arm uses.
#[derive(Copy, Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum LabelScheme {
    /// Unif[0,1] everywhere.
    SymmetricBaseline,
    /// Unif([0,1/5] ∪ [4/5,1]) left of the midline, Unif[2/5,3/5] at or
    /// right of it.
    AsymmetricHalves,
}

impl LabelScheme {
    pub fn region_spec(&self) -> RegionDistributionSpec {
        match self {
            LabelScheme::SymmetricBaseline => RegionDistributionSpec::uniform_all(),
            LabelScheme::AsymmetricHalves => RegionDistributionSpec::asymmetric_halves(),
        }
    }
}

/// Whether the path comes from the spanning tree or from invasion growth.
#[derive(Copy, Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum PathVariant {
    Mst,
    Invasion,
}

/// Parameters of one experiment arm.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymmetrySpec {
    pub kind: LatticeKind,
    pub n: u32,
    /// Endpoint-neighborhood radius as a fraction of the side.
    pub eps: f64,
    pub trials: u64,
    pub seed: u64,
    pub scheme: LabelScheme,
}

impl AsymmetrySpec {
    pub fn validate(&self) -> Result<()> {
        LatticeSpec::new(self.kind, self.n)?;
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(Error::InvalidSpec(format!(
                "eps must sit in (0, 1/2), got {}",
                self.eps
            )));
        }
        if self.eps * self.n as f64 < 2.0 {
            return Err(Error::InvalidSpec(
                "eps*n must be at least 2 lattice steps".into(),
            ));
        }
        if self.trials == 0 {
            return Err(Error::InvalidSpec("no trials".into()));
        }
        Ok(())
    }

    /// Endpoints of the vertical midline: midpoints of the top and bottom
    /// edges. For even n the column n/2 sits half a step right of center.
    pub fn endpoints(&self, g: &LatticeGraph) -> (SiteId, SiteId) {
        let col = self.n / 2;
        (g.site_at(self.n - 1, col), g.site_at(0, col))
    }
}

/// Per-trial statistics of the trimmed path segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymmetryTrialRecord {
    pub trial: u64,
    pub seed: u64,
    /// Fraction of trimmed-path edges with midpoint strictly left of the
    /// midline; edges on the midline count as right.
    pub left_fraction: f64,
    pub right_fraction: f64,
    pub contained_left: bool,
    pub contained_right: bool,
    /// Sign changes of the side indicator, one per maximal excursion;
    /// midline-touching edges do not flip the side.
    pub midline_crossings: u32,
    /// Edge count of the trimmed segment.
    pub path_len: u32,
    /// Number of bridging segments between the two neighborhoods; more than
    /// one means the path re-entered a neighborhood (the longest is kept).
    pub segment_multiplicity: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invaded_left: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invaded_right: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path_sites: Option<Vec<u32>>,
}

fn within_box(g: &LatticeGraph, s: SiteId, center: SiteId, eps2: f64) -> bool {
    let (sr, sc) = g.coords2(s);
    let (cr, cc) = g.coords2(center);
    (((sr - cr).abs()).max((sc - cc).abs()) as f64) <= eps2 + 1e-9
}

/// The maximal bridging run of path indices strictly between the
/// ε-neighborhoods of x and y, plus the number of bridging runs.
fn trim_segment(
    g: &LatticeGraph,
    path: &MinimaxPath,
    x: SiteId,
    y: SiteId,
    eps: f64,
) -> Result<(std::ops::Range<usize>, u32)> {
    let eps2 = 2.0 * eps * (g.n() - 1) as f64;
    #[derive(PartialEq, Copy, Clone)]
    enum Zone {
        A,
        B,
        Mid,
    }
    let zones: Vec<Zone> = path
        .sites
        .iter()
        .map(|&s| {
            if within_box(g, s, x, eps2) {
                Zone::A
            } else if within_box(g, s, y, eps2) {
                Zone::B
            } else {
                Zone::Mid
            }
        })
        .collect();
    let mut best: Option<std::ops::Range<usize>> = None;
    let mut runs = 0u32;
    let mut i = 0;
    while i < zones.len() {
        if zones[i] != Zone::Mid {
            i += 1;
            continue;
        }
        let start = i;
        while i < zones.len() && zones[i] == Zone::Mid {
            i += 1;
        }
        let end = i; // exclusive
        let before = if start == 0 { None } else { Some(zones[start - 1]) };
        let after = if end == zones.len() { None } else { Some(zones[end]) };
        let bridging = matches!(
            (before, after),
            (Some(Zone::A), Some(Zone::B)) | (Some(Zone::B), Some(Zone::A))
        );
        if bridging {
            runs += 1;
            if best.as_ref().is_none_or(|b| end - start > b.len()) {
                best = Some(start..end);
            }
        }
    }
    match best {
        // A segment needs at least one edge to carry statistics.
        Some(seg) if seg.len() >= 2 => Ok((seg, runs)),
        _ => Err(Error::DegenerateTrim),
    }
}

#[derive(Copy, Clone, PartialEq)]
enum Side {
    Left,
    Right,
    Mid,
}

fn edge_side(g: &LatticeGraph, a: SiteId, b: SiteId) -> Side {
    let (_, ac) = g.coords2(a);
    let (_, bc) = g.coords2(b);
    // midpoint x of the edge vs the midline, in exact integer arithmetic:
    // (ac + bc) / (4 (n-1)) vs 1/2
    let lhs = (ac + bc) as i64;
    let rhs = 2 * (g.n() as i64 - 1);
    match lhs.cmp(&rhs) {
        std::cmp::Ordering::Less => Side::Left,
        std::cmp::Ordering::Equal => Side::Mid,
        std::cmp::Ordering::Greater => Side::Right,
    }
}

fn segment_record(
    g: &LatticeGraph,
    path: &MinimaxPath,
    seg: std::ops::Range<usize>,
    runs: u32,
    trial: u64,
    seed: u64,
    keep_path: bool,
) -> AsymmetryTrialRecord {
    let sites = &path.sites[seg.clone()];
    let mut left = 0u32;
    let mut right = 0u32;
    let mut mid = 0u32;
    let mut crossings = 0u32;
    let mut last: Option<Side> = None;
    for w in sites.windows(2) {
        let side = edge_side(g, w[0], w[1]);
        match side {
            Side::Left => left += 1,
            Side::Right => right += 1,
            Side::Mid => mid += 1,
        }
        if side != Side::Mid {
            if let Some(prev) = last {
                if prev != side {
                    crossings += 1;
                }
            }
            last = Some(side);
        }
    }
    let total = (left + right + mid) as f64;
    let left_fraction = left as f64 / total;
    AsymmetryTrialRecord {
        trial,
        seed,
        left_fraction,
        right_fraction: 1.0 - left_fraction,
        contained_left: right == 0 && mid == 0,
        contained_right: left == 0,
        midline_crossings: crossings,
        path_len: (sites.len() - 1) as u32,
        segment_multiplicity: runs,
        invaded_left: None,
        invaded_right: None,
        path_sites: keep_path.then(|| sites.iter().map(|s| s.0).collect()),
    }
}

/// One spanning-tree trial: regional labels, tree path between the midline
/// endpoints, trimmed statistics.
pub fn asymmetry_trial(
    g: &LatticeGraph,
    spec: &AsymmetrySpec,
    trial: u64,
    keep_path: bool,
) -> Result<AsymmetryTrialRecord> {
    let seed = trial_seed(spec.seed, trial);
    let f = sample_regional(g, &spec.scheme.region_spec(), seed)?;
    let (x, y) = spec.endpoints(g);
    let t = mst(g, &f)?;
    let path = minimax_path(&t, x, y)?;
    let (seg, runs) = trim_segment(g, &path, x, y, spec.eps)?;
    Ok(segment_record(g, &path, seg, runs, trial, seed, keep_path))
}

/// One invasion trial: the tree grown from x until y is invaded, with the
/// invaded-site split by side recorded alongside the path statistics.
pub fn invasion_asymmetry_trial(
    g: &LatticeGraph,
    spec: &AsymmetrySpec,
    trial: u64,
    keep_path: bool,
) -> Result<AsymmetryTrialRecord> {
    let seed = trial_seed(spec.seed, trial);
    let f = sample_regional(g, &spec.scheme.region_spec(), seed)?;
    let (x, y) = spec.endpoints(g);
    let t = invasion_tree(g, &f, x, Stop::Reach(y));
    let path = minimax_path(&t, x, y)?;
    let (seg, runs) = trim_segment(g, &path, x, y, spec.eps)?;
    let mut rec = segment_record(g, &path, seg, runs, trial, seed, keep_path);
    let mut invaded_left = 0u64;
    let mut invaded_right = 0u64;
    for s in 0..g.original_count() as u32 {
        let s = SiteId(s);
        if t.in_tree(s) {
            let (_, c) = g.coords2(s);
            if (c as i64) < (g.n() as i64 - 1) {
                invaded_left += 1;
            } else {
                invaded_right += 1;
            }
        }
    }
    rec.invaded_left = Some(invaded_left);
    rec.invaded_right = Some(invaded_right);
    Ok(rec)
}

/// Aggregates recomputable from the records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialAggregate {
    pub trials: u64,
    pub mean_left_fraction: Estimate,
    pub mean_right_fraction: Estimate,
    pub mean_midline_crossings: Estimate,
    pub mean_path_len: Estimate,
    pub p_contained_left: Estimate,
    pub p_contained_right: Estimate,
    pub p_multi_segment: Estimate,
}

pub fn aggregate(records: &[AsymmetryTrialRecord]) -> TrialAggregate {
    let lf: Vec<f64> = records.iter().map(|r| r.left_fraction).collect();
    let rf: Vec<f64> = records.iter().map(|r| r.right_fraction).collect();
    let mc: Vec<f64> = records.iter().map(|r| r.midline_crossings as f64).collect();
    let pl: Vec<f64> = records.iter().map(|r| r.path_len as f64).collect();
    let n = records.len() as u64;
    TrialAggregate {
        trials: n,
        mean_left_fraction: mean_estimate(&lf),
        mean_right_fraction: mean_estimate(&rf),
        mean_midline_crossings: mean_estimate(&mc),
        mean_path_len: mean_estimate(&pl),
        p_contained_left: proportion(records.iter().filter(|r| r.contained_left).count() as u64, n),
        p_contained_right: proportion(
            records.iter().filter(|r| r.contained_right).count() as u64,
            n,
        ),
        p_multi_segment: proportion(
            records.iter().filter(|r| r.segment_multiplicity > 1).count() as u64,
            n,
        ),
    }
}

/// Preregistered one-sided comparisons between the two arms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmComparison {
    /// Within-arm test that the path leans right: mean(right − left) > 0.
    pub right_minus_left: Estimate,
    pub right_gt_left_z: f64,
    pub right_gt_left_p: f64,
    pub right_gt_left_significant_95: bool,
    /// Cross-arm test that the experiment arm crosses the midline less than
    /// the baseline arm.
    pub crossings_diff: f64,
    pub crossings_lower_z: f64,
    pub crossings_lower_p: f64,
    pub crossings_lower_significant_95: bool,
    /// Two-sided difference of mean right-fractions across arms, with its
    /// 95% half-width: the calibration statistic.
    pub right_fraction_diff: f64,
    pub right_fraction_diff_half_width_95: f64,
    pub right_fraction_differs_95: bool,
}

/// A full two-arm experiment: per-trial records, aggregates, comparisons.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub variant: PathVariant,
    pub spec: AsymmetrySpec,
    pub baseline: AsymmetrySpec,
    pub endpoint_convention: String,
    pub midline_convention: String,
    pub records: Vec<AsymmetryTrialRecord>,
    pub baseline_records: Vec<AsymmetryTrialRecord>,
    pub aggregate: TrialAggregate,
    pub baseline_aggregate: TrialAggregate,
    pub comparison: ArmComparison,
}

fn run_arm(
    spec: &AsymmetrySpec,
    variant: PathVariant,
    keep_paths: bool,
) -> Result<Vec<AsymmetryTrialRecord>> {
    spec.validate()?;
    let g = build_lattice(LatticeSpec::new(spec.kind, spec.n)?);
    (0..spec.trials)
        .into_par_iter()
        .map(|i| match variant {
            PathVariant::Mst => asymmetry_trial(&g, spec, i, keep_paths),
            PathVariant::Invasion => invasion_asymmetry_trial(&g, spec, i, keep_paths),
        })
        .collect()
}

/// Runs both arms and compares them. The two specs must share lattice kind,
/// size and ε.
pub fn asymmetry_experiment(
    spec: &AsymmetrySpec,
    baseline: &AsymmetrySpec,
    variant: PathVariant,
) -> Result<ExperimentReport> {
    if spec.kind != baseline.kind || spec.n != baseline.n || spec.eps != baseline.eps {
        return Err(Error::InvalidSpec(
            "arms must share lattice kind, size and eps".into(),
        ));
    }
    let records = run_arm(spec, variant, false)?;
    let baseline_records = run_arm(baseline, variant, false)?;
    if records.is_empty() || baseline_records.is_empty() {
        return Err(Error::DegenerateEstimate("an arm has no successful trials".into()));
    }
    let agg = aggregate(&records);
    let bagg = aggregate(&baseline_records);

    let rml: Vec<f64> = records
        .iter()
        .map(|r| r.right_fraction - r.left_fraction)
        .collect();
    let right_minus_left = mean_estimate(&rml);
    let z = right_minus_left.value / right_minus_left.stderr;
    let crossings_z = two_sample_z(&bagg.mean_midline_crossings, &agg.mean_midline_crossings);
    let rf_diff = agg.mean_right_fraction.value - bagg.mean_right_fraction.value;
    let rf_half = Z95
        * (agg.mean_right_fraction.stderr.powi(2) + bagg.mean_right_fraction.stderr.powi(2))
            .sqrt();
    let comparison = ArmComparison {
        right_minus_left,
        right_gt_left_z: z,
        right_gt_left_p: p_value_greater(z),
        right_gt_left_significant_95: p_value_greater(z) < 0.05,
        crossings_diff: agg.mean_midline_crossings.value - bagg.mean_midline_crossings.value,
        crossings_lower_z: crossings_z,
        crossings_lower_p: p_value_greater(crossings_z),
        crossings_lower_significant_95: p_value_greater(crossings_z) < 0.05,
        right_fraction_diff: rf_diff,
        right_fraction_diff_half_width_95: rf_half,
        right_fraction_differs_95: rf_diff.abs() > rf_half,
    };
    Ok(ExperimentReport {
        variant,
        spec: *spec,
        baseline: *baseline,
        endpoint_convention: "x = midpoint of the top edge, y = midpoint of the bottom edge; \
                              column n/2 (half a step right of center for even n)"
            .into(),
        midline_convention: "x < 1/2 is left; x >= 1/2 (midline included) is right".into(),
        records,
        baseline_records,
        aggregate: agg,
        baseline_aggregate: bagg,
        comparison,
    })
}

/// A scale-free path statistic measured on symmetric baselines.
#[derive(Copy, Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum ScaleStatistic {
    LeftFraction,
    MidlineCrossings,
}

impl ScaleStatistic {
    fn of(&self, r: &AsymmetryTrialRecord) -> f64 {
        match self {
            ScaleStatistic::LeftFraction => r.left_fraction,
            ScaleStatistic::MidlineCrossings => r.midline_crossings as f64,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalingReport {
    pub statistic: ScaleStatistic,
    pub eps: f64,
    pub per_n: Vec<(u32, Estimate)>,
    /// Largest pairwise |difference| measured in joint 95% half-widths.
    pub max_drift_sigma_ratio: f64,
    pub significant_drift: bool,
}

/// Measures a scale-free statistic across meshes; acceptance is the absence
/// of significant drift.
pub fn scaling_invariance_check(
    kind: LatticeKind,
    statistic: ScaleStatistic,
    n_list: &[u32],
    eps: f64,
    trials: u64,
    seed: u64,
) -> Result<ScalingReport> {
    if n_list.len() < 2 {
        return Err(Error::InvalidSpec("need at least two sizes".into()));
    }
    let mut per_n = Vec::new();
    for (k, &n) in n_list.iter().enumerate() {
        let spec = AsymmetrySpec {
            kind,
            n,
            eps,
            trials,
            seed: trial_seed(seed, k as u64),
            scheme: LabelScheme::SymmetricBaseline,
        };
        let records = run_arm(&spec, PathVariant::Mst, false)?;
        let values: Vec<f64> = records.iter().map(|r| statistic.of(r)).collect();
        per_n.push((n, mean_estimate(&values)));
    }
    let mut worst: f64 = 0.0;
    for i in 0..per_n.len() {
        for j in (i + 1)..per_n.len() {
            let (a, b) = (&per_n[i].1, &per_n[j].1);
            let half = Z95 * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
            worst = worst.max((a.value - b.value).abs() / half);
        }
    }
    Ok(ScalingReport {
        statistic,
        eps,
        per_n,
        max_drift_sigma_ratio: worst,
        significant_drift: worst > 1.0,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RotationReport {
    pub n: u32,
    pub separation: u32,
    /// Normalized path length between endpoint pairs along the three axial
    /// directions of the triangular lattice (60 degrees apart).
    pub per_orientation: Vec<Estimate>,
    pub agree_within_95: bool,
}

/// Compares path-length statistics between endpoint pairs rotated by 60
/// degrees on the triangular lattice.
pub fn rotational_invariance_check(n: u32, trials: u64, seed: u64) -> Result<RotationReport> {
    let spec = LatticeSpec::new(LatticeKind::TriangularSite, n)?;
    let g = build_lattice(spec);
    let c = (n / 2, n / 2);
    let k = n / 4;
    if k == 0 {
        return Err(Error::InvalidSpec("lattice too small for rotation".into()));
    }
    // endpoint pairs along the three axial directions
    let pairs = [
        (g.site_at(c.0, c.1 - k), g.site_at(c.0, c.1 + k)),
        (g.site_at(c.0 - k, c.1), g.site_at(c.0 + k, c.1)),
        (g.site_at(c.0 - k, c.1 + k), g.site_at(c.0 + k, c.1 - k)),
    ];
    let mut per_orientation = Vec::new();
    for (x, y) in pairs {
        let lens: Result<Vec<f64>> = (0..trials)
            .into_par_iter()
            .map(|i| {
                let f = crate::labels::sample_uniform(&g, trial_seed(seed, i));
                let t = mst(&g, &f)?;
                Ok(minimax_path(&t, x, y)?.len() as f64 / n as f64)
            })
            .collect();
        per_orientation.push(mean_estimate(&lens?));
    }
    let mut agree = true;
    for i in 0..3 {
        for j in (i + 1)..3 {
            agree &= crate::stats::cis_overlap(&per_orientation[i], &per_orientation[j]);
        }
    }
    Ok(RotationReport {
        n,
        separation: k,
        per_orientation,
        agree_within_95: agree,
    })
}

#[cfg(test)]
mod tests;
