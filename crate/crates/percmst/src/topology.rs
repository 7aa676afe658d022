//! Observables on spanning trees: degree statistics, macroscopic branch
//! points, path-uniqueness probes and near-touch-point detection.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{minimax_path, mst, MinimaxPath, SpanningForest};
use crate::labels::{rng_from, sample_uniform, GenerationSpec, LabelField};
use crate::lattice::{LatticeGraph, SiteId};
use crate::percolation::{arm_event_holds, ArmEvent, ArmLevels};

/// Exact tree-degree counts. The handshake identity
/// sum(degree * count) = 2 * (sites - 1) holds per tree.
pub fn degree_histogram(t: &SpanningForest) -> BTreeMap<usize, u64> {
    let mut hist = BTreeMap::new();
    for s in 0..t.site_count() as u32 {
        let s = SiteId(s);
        if t.in_tree(s) {
            *hist.entry(t.degree(s)).or_insert(0) += 1;
        }
    }
    hist
}

/// A site whose removal splits the tree into at least `k` macroscopic
/// branches.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchPointReport {
    pub site: u32,
    /// Number of branches with L∞ diameter >= delta.
    pub degree: usize,
    pub delta: f64,
}

#[derive(Copy, Clone, Debug)]
struct Bb {
    rmin: i32,
    rmax: i32,
    cmin: i32,
    cmax: i32,
}

impl Bb {
    const EMPTY: Bb = Bb { rmin: i32::MAX, rmax: i32::MIN, cmin: i32::MAX, cmax: i32::MIN };

    fn point(r: i32, c: i32) -> Bb {
        Bb { rmin: r, rmax: r, cmin: c, cmax: c }
    }

    fn union(self, other: Bb) -> Bb {
        Bb {
            rmin: self.rmin.min(other.rmin),
            rmax: self.rmax.max(other.rmax),
            cmin: self.cmin.min(other.cmin),
            cmax: self.cmax.max(other.cmax),
        }
    }

    /// L∞ extent in doubled lattice coordinates; empty boxes give a negative
    /// value.
    fn extent2(self) -> i64 {
        if self.rmin > self.rmax {
            return -1;
        }
        ((self.rmax - self.rmin) as i64).max((self.cmax - self.cmin) as i64)
    }
}

/// Sites whose removal leaves at least `k_min` tree components of L∞
/// diameter >= delta (as a fraction of the domain side).
///
/// Branch bounding boxes are accumulated in two sweeps over the rooted tree
/// (subtrees bottom-up, the complement top-down), so the scan is linear in
/// the number of sites.
pub fn macroscopic_branch_points(
    g: &LatticeGraph,
    t: &SpanningForest,
    delta: f64,
    k_min: usize,
) -> Result<Vec<BranchPointReport>> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::OutOfBounds("branch diameter"));
    }
    if k_min < 3 {
        return Err(Error::OutOfBounds("branch count"));
    }
    let n_sites = t.site_count();
    let threshold2 = (2.0 * delta * (g.n() - 1) as f64) - 1e-9;

    // sites ordered by depth so children precede parents in the reverse scan
    let mut order: Vec<u32> = (0..n_sites as u32)
        .filter(|&s| t.in_tree(SiteId(s)))
        .collect();
    order.sort_by_key(|&s| t.depth_of(SiteId(s)));

    let mut subtree = vec![Bb::EMPTY; n_sites];
    for &s in order.iter().rev() {
        let (r2, c2) = g.coords2(SiteId(s));
        subtree[s as usize] = subtree[s as usize].union(Bb::point(r2, c2));
        if let Some((p, _, _)) = t.parent_of(SiteId(s)) {
            subtree[p.index()] = subtree[p.index()].union(subtree[s as usize]);
        }
    }

    // complement of each site's subtree, built top-down with sibling
    // prefix/suffix unions
    let mut above = vec![Bb::EMPTY; n_sites];
    for &s in &order {
        let site = SiteId(s);
        let children: Vec<u32> = t
            .neighbors(site)
            .iter()
            .map(|&(w, _)| w)
            .filter(|&w| t.parent_of(SiteId(w)).map(|(p, _, _)| p) == Some(site))
            .collect();
        let (r2, c2) = g.coords2(site);
        let own = above[s as usize].union(Bb::point(r2, c2));
        let k = children.len();
        let mut prefix = vec![Bb::EMPTY; k + 1];
        for i in 0..k {
            prefix[i + 1] = prefix[i].union(subtree[children[i] as usize]);
        }
        let mut suffix = vec![Bb::EMPTY; k + 1];
        for i in (0..k).rev() {
            suffix[i] = suffix[i + 1].union(subtree[children[i] as usize]);
        }
        for (i, &c) in children.iter().enumerate() {
            above[c as usize] = own.union(prefix[i]).union(suffix[i + 1]);
        }
    }

    let mut out = Vec::new();
    for &s in &order {
        let site = SiteId(s);
        let mut macroscopic = 0usize;
        for &(w, _) in t.neighbors(site) {
            let branch = if t.parent_of(SiteId(w)).map(|(p, _, _)| p) == Some(site) {
                subtree[w as usize]
            } else {
                above[s as usize]
            };
            if branch.extent2() as f64 >= threshold2 {
                macroscopic += 1;
            }
        }
        if macroscopic >= k_min {
            out.push(BranchPointReport { site: s, degree: macroscopic, delta });
        }
    }
    Ok(out)
}

/// Perturbation mode for the path-uniqueness probe.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Perturbation {
    /// Rank-preserving jitter below the smallest label gap: the path must be
    /// identical.
    RankJitter { seed: u64 },
    /// An independent field: paths are compared by Hausdorff distance.
    Resample { seed: u64 },
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ProbeOutcome {
    Identical(bool),
    /// L∞ Hausdorff distance between the two paths' site sets, as a fraction
    /// of the domain side.
    Hausdorff(f64),
}

pub fn path_uniqueness_probe(
    g: &LatticeGraph,
    f: &LabelField,
    x: SiteId,
    y: SiteId,
    perturbation: Perturbation,
) -> Result<ProbeOutcome> {
    let base = minimax_path(&mst(g, f)?, x, y)?;
    match perturbation {
        Perturbation::RankJitter { seed } => {
            let mut sorted = f.values().to_vec();
            sorted.sort_by(f64::total_cmp);
            let gap = sorted
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::INFINITY, f64::min)
                .max(1e-300);
            // Scale down, then shift each label by less than the surviving
            // gap: distinct values keep their order because the scaled gap
            // stays above gap/2 while shifts differ by at most gap/3.
            let mut rng = rng_from(seed);
            let scale = 1.0 - gap / 2.0;
            let values: Vec<f64> = f
                .values()
                .iter()
                .map(|&v| v * scale + rng.gen::<f64>() * gap / 3.0)
                .collect();
            let jittered = LabelField::from_values(
                f.carrier_kind(),
                values,
                f.seed(),
                GenerationSpec::Transformed,
            );
            let other = minimax_path(&mst(g, &jittered)?, x, y)?;
            Ok(ProbeOutcome::Identical(base.sites == other.sites))
        }
        Perturbation::Resample { seed } => {
            let f2 = sample_uniform(g, seed);
            let other = minimax_path(&mst(g, &f2)?, x, y)?;
            Ok(ProbeOutcome::Hausdorff(hausdorff_unit(g, &base.sites, &other.sites)))
        }
    }
}

fn hausdorff_unit(g: &LatticeGraph, a: &[SiteId], b: &[SiteId]) -> f64 {
    let d2 = |s: SiteId, t: SiteId| {
        let (ar, ac) = g.coords2(s);
        let (br, bc) = g.coords2(t);
        ((ar - br).abs().max((ac - bc).abs())) as f64
    };
    let one_way = |from: &[SiteId], to: &[SiteId]| {
        from.iter()
            .map(|&s| to.iter().map(|&t| d2(s, t)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    let h2 = one_way(a, b).max(one_way(b, a));
    h2 / (2.0 * (g.n() - 1) as f64)
}

/// A place where the path nearly touches itself: two visits within `radius`
/// lattice steps separated by an excursion of macroscopic diameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TouchPointCandidate {
    pub site: u32,
    pub first_visit: usize,
    pub second_visit: usize,
    /// L∞ diameter of the in-between excursion, fraction of the domain side.
    pub excursion_diameter: f64,
    /// Whether the six-arm pattern (four primal arms below the upper level,
    /// two dual arms above the lower level) holds on the annulus around the
    /// candidate; None when the annulus does not fit in the lattice.
    pub six_arm: Option<bool>,
}

/// Scans a path for near-touch points: visits i < j with sites within
/// `radius` lattice steps whose intermediate segment has L∞ diameter at
/// least `excursion` (fraction of the domain side). Each candidate is
/// annotated with the six-arm check at the given levels.
pub fn near_touch_points(
    g: &LatticeGraph,
    f: &LabelField,
    path: &MinimaxPath,
    radius: u32,
    excursion: f64,
    levels: ArmLevels,
) -> Vec<TouchPointCandidate> {
    let len = path.sites.len();
    if len < 4 {
        return Vec::new();
    }
    let coords: Vec<(i32, i32)> = path.sites.iter().map(|&s| g.coords2(s)).collect();
    // sparse table over prefix ranges for O(1) bounding boxes
    let mut table: Vec<Vec<Bb>> = Vec::new();
    table.push(coords.iter().map(|&(r, c)| Bb::point(r, c)).collect());
    let mut span = 1;
    while 2 * span <= len {
        let prev = table.last().unwrap();
        let row: Vec<Bb> = (0..=(len - 2 * span))
            .map(|i| prev[i].union(prev[i + span]))
            .collect();
        table.push(row);
        span *= 2;
    }
    let range_bb = |i: usize, j: usize| -> Bb {
        let w = j - i + 1;
        let k = usize::BITS as usize - 1 - w.leading_zeros() as usize;
        table[k][i].union(table[k][j + 1 - (1 << k)])
    };

    let radius2 = 2 * radius as i64;
    let threshold2 = 2.0 * excursion * (g.n() - 1) as f64 - 1e-9;
    // bucket path indices on a grid of cell size radius for locality
    let cell = (radius2.max(1)) as i32;
    let mut buckets: std::collections::HashMap<(i32, i32), Vec<u32>> =
        std::collections::HashMap::new();
    let mut out: Vec<TouchPointCandidate> = Vec::new();
    for j in 0..len {
        let (r, c) = coords[j];
        let key = (r / cell, c / cell);
        let mut best: Option<usize> = None;
        for dr in -1..=1 {
            for dc in -1..=1 {
                if let Some(list) = buckets.get(&(key.0 + dr, key.1 + dc)) {
                    for &i in list {
                        let i = i as usize;
                        let (ir, ic) = coords[i];
                        let d2 = ((ir - r).abs()).max((ic - c).abs()) as i64;
                        if d2 > radius2 {
                            continue;
                        }
                        if range_bb(i, j).extent2() as f64 >= threshold2
                            && best.is_none_or(|b| i < b)
                        {
                            best = Some(i);
                        }
                    }
                }
            }
        }
        if let Some(i) = best {
            // keep one candidate per touch neighborhood
            let (ir, ic) = coords[i];
            let dominated = out.iter().any(|cand| {
                let (cr, cc) = coords[cand.first_visit];
                ((cr - ir).abs()).max((cc - ic).abs()) as i64 <= 2 * radius2
            });
            if !dominated {
                let mut z = path.sites[i];
                if !g.is_original(z) {
                    // midpoints snap to their original endpoint
                    z = SiteId(g.neighbors(z)[0].0);
                }
                let ex2 = range_bb(i, j).extent2();
                let outer = ((threshold2 / 4.0).ceil() as u32).max(radius + 1);
                let event = ArmEvent::six_arm(z, radius.max(1), outer);
                let six_arm = event
                    .ok()
                    .and_then(|ev| arm_event_holds(g, f, &ev, levels).ok());
                out.push(TouchPointCandidate {
                    site: path.sites[i].0,
                    first_visit: i,
                    second_visit: j,
                    excursion_diameter: ex2 as f64 / (2.0 * (g.n() - 1) as f64),
                    six_arm,
                });
            }
        }
        buckets.entry(key).or_default().push(j as u32);
    }
    out
}
