//! Thresholded views of the coupled ensemble.
//!
//! A label field defines a percolation configuration at every density `p`
//! at once: a carrier is open iff its label is at most `p`. This module
//! provides the cluster decomposition at a level, the near-critical λ ↔ p
//! conversion, quad crossings, arm events, the four-arm probability
//! estimator, and pivotal / ε-important carriers.

mod arms;

pub use arms::{arm_event_holds, ArmColor, ArmEvent, ArmLevels};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsu::Dsu;
use crate::error::{Error, Result};
use crate::labels::{sample_uniform, trial_seed, LabelField};
use crate::lattice::{build_lattice, EdgeId, LatticeGraph, LatticeKind, LatticeSpec, SiteId};

// ---------------------------------------------------------------------------
// Cluster partitions

/// Per-cluster summary: member sites, open carriers, bounding box in doubled
/// lattice coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterInfo {
    pub sites: u32,
    pub open_carriers: u32,
    pub rmin2: i32,
    pub rmax2: i32,
    pub cmin2: i32,
    pub cmax2: i32,
}

impl ClusterInfo {
    /// L∞ bounding-box extent in lattice units.
    pub fn linf_diameter(&self) -> f64 {
        ((self.rmax2 - self.rmin2).max(self.cmax2 - self.cmin2)) as f64 / 2.0
    }

    /// Diameter as a fraction of the domain side.
    pub fn unit_diameter(&self, n: u32) -> f64 {
        self.linf_diameter() / (n - 1) as f64
    }
}

/// Connected components of the configuration open at level ≤ p.
///
/// The partition covers the label-carrying sites: every site of the square
/// lattice, every original site of the triangular lattice (closed sites are
/// singletons; subdivision midpoints are graph plumbing and handled by the
/// contraction maps in `forest`).
#[derive(Clone, Debug)]
pub struct ClusterPartition {
    p: f64,
    kind: LatticeKind,
    cluster_of: Vec<u32>,
    clusters: Vec<ClusterInfo>,
}

impl ClusterPartition {
    pub fn threshold(&self) -> f64 {
        self.p
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    /// Dense cluster index of an original site.
    pub fn cluster_of(&self, s: SiteId) -> u32 {
        self.cluster_of[s.index()]
    }

    pub fn info(&self, cluster: u32) -> &ClusterInfo {
        &self.clusters[cluster as usize]
    }

    pub fn clusters(&self) -> &[ClusterInfo] {
        &self.clusters
    }

    pub fn same_cluster(&self, a: SiteId, b: SiteId) -> bool {
        self.cluster_of(a) == self.cluster_of(b)
    }

    pub fn kind(&self) -> LatticeKind {
        self.kind
    }
}

/// Connected components of the subgraph open at level ≤ p.
pub fn clusters_at(g: &LatticeGraph, f: &LabelField, p: f64) -> ClusterPartition {
    let n_orig = g.original_count();
    let mut dsu = Dsu::new(n_orig);
    match g.kind() {
        LatticeKind::SquareBond => {
            for e in g.edge_ids() {
                if f.open_at(e.index(), p) {
                    let (u, v) = g.endpoints(e);
                    dsu.union(u.0, v.0);
                }
            }
        }
        LatticeKind::TriangularSite => {
            for s in 0..n_orig as u32 {
                if !f.open_at(s as usize, p) {
                    continue;
                }
                for &t in g.delta_neighbors(SiteId(s)) {
                    if t > s && f.open_at(t as usize, p) {
                        dsu.union(s, t);
                    }
                }
            }
        }
    }

    let mut index_of_root = vec![u32::MAX; n_orig];
    let mut cluster_of = vec![0u32; n_orig];
    let mut clusters: Vec<ClusterInfo> = Vec::new();
    for s in 0..n_orig as u32 {
        let root = dsu.find(s);
        let cid = if index_of_root[root as usize] == u32::MAX {
            let cid = clusters.len() as u32;
            index_of_root[root as usize] = cid;
            clusters.push(ClusterInfo {
                sites: 0,
                open_carriers: 0,
                rmin2: i32::MAX,
                rmax2: i32::MIN,
                cmin2: i32::MAX,
                cmax2: i32::MIN,
            });
            cid
        } else {
            index_of_root[root as usize]
        };
        cluster_of[s as usize] = cid;
        let info = &mut clusters[cid as usize];
        info.sites += 1;
        let (r2, c2) = g.coords2(SiteId(s));
        info.rmin2 = info.rmin2.min(r2);
        info.rmax2 = info.rmax2.max(r2);
        info.cmin2 = info.cmin2.min(c2);
        info.cmax2 = info.cmax2.max(c2);
    }
    match g.kind() {
        LatticeKind::SquareBond => {
            for e in g.edge_ids() {
                if f.open_at(e.index(), p) {
                    let (u, _) = g.endpoints(e);
                    clusters[cluster_of[u.index()] as usize].open_carriers += 1;
                }
            }
        }
        LatticeKind::TriangularSite => {
            for s in 0..n_orig {
                if f.open_at(s, p) {
                    clusters[cluster_of[s] as usize].open_carriers += 1;
                }
            }
        }
    }
    ClusterPartition {
        p,
        kind: g.kind(),
        cluster_of,
        clusters,
    }
}

// ---------------------------------------------------------------------------
// Near-critical levels and the switching rate

/// The asymptotic four-arm probability at mesh η across the full scale range,
/// α₄(η,1) ≍ η^{5/4}.
pub fn alpha4_asymptotic(eta: f64) -> f64 {
    eta.powf(1.25)
}

/// Characteristic near-critical switching rate r(η) = η² / α₄(η,1).
///
/// This is the quotient normalization, the one under which r(η) ≍ η^{3/4}:
/// a box of mesh η holds ~η⁻² carriers of which a fraction α₄(η,1) are
/// macroscopically pivotal, so switching each carrier at rate η²/α₄ makes
/// important switches arrive at unit speed. (The product η²·α₄(η,1) would
/// scale as η^{13/4} and is not a useful clock.)
pub fn rate_r(eta: f64, alpha4_hat: impl FnOnce(f64) -> f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::OutOfBounds("mesh"));
    }
    let a = alpha4_hat(eta);
    if !(a > 0.0) {
        return Err(Error::DegenerateEstimate(format!(
            "alpha4 estimate {a} is not positive"
        )));
    }
    Ok(eta * eta / a)
}

/// Default switching rate η^{3/4}, i.e. `rate_r` with the asymptotic α₄.
pub fn asymptotic_rate(eta: f64) -> f64 {
    eta.powf(0.75)
}

/// A level of the near-critical window: density p_λ = 1/2 + λ·r(η).
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaLevel {
    pub lambda: f64,
    pub eta: f64,
    pub rate: f64,
}

impl LambdaLevel {
    /// Uses the asymptotic rate η^{3/4}.
    pub fn new(lambda: f64, eta: f64) -> Self {
        LambdaLevel {
            lambda,
            eta,
            rate: asymptotic_rate(eta),
        }
    }

    pub fn with_rate(lambda: f64, eta: f64, rate: f64) -> Self {
        LambdaLevel { lambda, eta, rate }
    }

    pub fn threshold(&self) -> f64 {
        (0.5 + self.lambda * self.rate).clamp(0.0, 1.0)
    }

    /// The λ corresponding to a raw density under this level's rate.
    pub fn lambda_of_threshold(&self, p: f64) -> f64 {
        (p - 0.5) / self.rate
    }
}

// ---------------------------------------------------------------------------
// Quads and crossings

/// An axis-aligned rectangle in the unit square; crossings connect the left
/// side (x = x0) to the right side (x = x1). On the triangular lattice the
/// position space is the sheared axial embedding, so this is geometrically a
/// rhombus.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quad {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Quad {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        let ok = x0 < x1
            && y0 < y1
            && (0.0..=1.0).contains(&x0)
            && (0.0..=1.0).contains(&x1)
            && (0.0..=1.0).contains(&y0)
            && (0.0..=1.0).contains(&y1);
        if !ok {
            return Err(Error::OutOfBounds("quad"));
        }
        Ok(Quad { x0, y0, x1, y1 })
    }

    pub fn unit() -> Self {
        Quad { x0: 0.0, y0: 0.0, x1: 1.0, y1: 1.0 }
    }

    /// Inclusive original-site coordinate ranges covered by the quad, or None
    /// if it contains no site column/row.
    fn ranges(&self, n: u32) -> Option<(u32, u32, u32, u32)> {
        let m = (n - 1) as f64;
        let lo = |v: f64| (v * m - 1e-9).ceil().max(0.0) as u32;
        let hi = |v: f64| ((v * m + 1e-9).floor() as i64).min(m as i64) as u32;
        let (c0, c1) = (lo(self.x0), hi(self.x1));
        let (r0, r1) = (lo(self.y0), hi(self.y1));
        (c0 <= c1 && r0 <= r1).then_some((r0, r1, c0, c1))
    }
}

/// Left-right crossing test against an arbitrary openness predicate on
/// carriers (edges for SquareBond, original sites for TriangularSite).
pub fn crossing_with(g: &LatticeGraph, q: &Quad, open: &dyn Fn(usize) -> bool) -> bool {
    let n = g.n();
    let Some((r0, r1, c0, c1)) = q.ranges(n) else {
        return false;
    };
    let in_range =
        |r: u32, c: u32| -> bool { r >= r0 && r <= r1 && c >= c0 && c <= c1 };
    let mut visited = vec![false; g.original_count()];
    let mut queue: Vec<u32> = Vec::new();
    match g.kind() {
        LatticeKind::SquareBond => {
            for r in r0..=r1 {
                let s = g.site_at(r, c0);
                visited[s.index()] = true;
                queue.push(s.0);
            }
            let mut head = 0;
            while head < queue.len() {
                let s = SiteId(queue[head]);
                head += 1;
                let (_, c) = g.coords(s);
                if c == c1 {
                    return true;
                }
                for &(t, e) in g.neighbors(s) {
                    if visited[t as usize] || !open(e as usize) {
                        continue;
                    }
                    let (tr, tc) = g.coords(SiteId(t));
                    if in_range(tr, tc) {
                        visited[t as usize] = true;
                        queue.push(t);
                    }
                }
            }
            false
        }
        LatticeKind::TriangularSite => {
            for r in r0..=r1 {
                let s = g.site_at(r, c0);
                if open(s.index()) {
                    visited[s.index()] = true;
                    queue.push(s.0);
                }
            }
            let mut head = 0;
            while head < queue.len() {
                let s = SiteId(queue[head]);
                head += 1;
                let (_, c) = g.coords(s);
                if c == c1 {
                    return true;
                }
                for &t in g.delta_neighbors(s) {
                    if visited[t as usize] || !open(t as usize) {
                        continue;
                    }
                    let (tr, tc) = g.coords(SiteId(t));
                    if in_range(tr, tc) {
                        visited[t as usize] = true;
                        queue.push(t);
                    }
                }
            }
            false
        }
    }
}

/// True iff an open (≤ p) path joins the left and right sides of the quad
/// inside it.
pub fn has_crossing(g: &LatticeGraph, f: &LabelField, q: &Quad, p: f64) -> bool {
    crossing_with(g, q, &|carrier| f.open_at(carrier, p))
}

// ---------------------------------------------------------------------------
// Pivotal carriers

/// Carriers whose flip at level p changes the quad crossing state.
pub fn pivotal_sites(g: &LatticeGraph, f: &LabelField, q: &Quad, p: f64) -> Vec<usize> {
    let base = has_crossing(g, f, q, p);
    let n = g.n();
    let Some((r0, r1, c0, c1)) = q.ranges(n) else {
        return Vec::new();
    };
    let in_range = |s: SiteId| -> bool {
        let (r, c) = g.coords(s);
        r >= r0 && r <= r1 && c >= c0 && c <= c1
    };
    let mut pivotal = Vec::new();

    if base {
        // Closing candidates: open carriers reachable from the left whose
        // removal might cut every crossing. Filter, then retest exactly.
        match g.kind() {
            LatticeKind::SquareBond => {
                let left = reach_square(g, f, p, (r0, r1, c0, c1), true);
                let right = reach_square(g, f, p, (r0, r1, c0, c1), false);
                for e in g.edge_ids() {
                    if !f.open_at(e.index(), p) {
                        continue;
                    }
                    let (u, v) = g.endpoints(e);
                    if !in_range(u) || !in_range(v) {
                        continue;
                    }
                    let straddles = (left[u.index()] && right[v.index()])
                        || (left[v.index()] && right[u.index()]);
                    if straddles
                        && !crossing_with(g, q, &|c| c != e.index() && f.open_at(c, p))
                    {
                        pivotal.push(e.index());
                    }
                }
            }
            LatticeKind::TriangularSite => {
                let left = reach_tri(g, f, p, (r0, r1, c0, c1), true);
                let right = reach_tri(g, f, p, (r0, r1, c0, c1), false);
                for s in 0..g.original_count() {
                    if !f.open_at(s, p) || !in_range(SiteId(s as u32)) {
                        continue;
                    }
                    if left[s]
                        && right[s]
                        && !crossing_with(g, q, &|c| c != s && f.open_at(c, p))
                    {
                        pivotal.push(s);
                    }
                }
            }
        }
    } else {
        // Opening candidates: a closed carrier creates a crossing iff it
        // bridges a left-touching cluster to a right-touching one.
        let part = clusters_at(g, f, p);
        let k = part.cluster_count();
        let mut touch_l = vec![false; k];
        let mut touch_r = vec![false; k];
        match g.kind() {
            LatticeKind::SquareBond => {
                for r in r0..=r1 {
                    touch_l[part.cluster_of(g.site_at(r, c0)) as usize] = true;
                    touch_r[part.cluster_of(g.site_at(r, c1)) as usize] = true;
                }
                for e in g.edge_ids() {
                    if f.open_at(e.index(), p) {
                        continue;
                    }
                    let (u, v) = g.endpoints(e);
                    if !in_range(u) || !in_range(v) {
                        continue;
                    }
                    // Cluster connectivity must hold inside the quad, so
                    // retest; the flag filter only prunes.
                    let (cu, cv) =
                        (part.cluster_of(u) as usize, part.cluster_of(v) as usize);
                    if ((touch_l[cu] && touch_r[cv]) || (touch_l[cv] && touch_r[cu]))
                        && crossing_with(g, q, &|c| c == e.index() || f.open_at(c, p))
                    {
                        pivotal.push(e.index());
                    }
                }
            }
            LatticeKind::TriangularSite => {
                for r in r0..=r1 {
                    let sl = g.site_at(r, c0);
                    if f.open_at(sl.index(), p) {
                        touch_l[part.cluster_of(sl) as usize] = true;
                    }
                    let sr = g.site_at(r, c1);
                    if f.open_at(sr.index(), p) {
                        touch_r[part.cluster_of(sr) as usize] = true;
                    }
                }
                for s in 0..g.original_count() {
                    let sid = SiteId(s as u32);
                    if f.open_at(s, p) || !in_range(sid) {
                        continue;
                    }
                    let (_, c) = g.coords(sid);
                    let mut l = c == c0;
                    let mut r = c == c1;
                    for &t in g.delta_neighbors(sid) {
                        if f.open_at(t as usize, p) {
                            let ct = part.cluster_of(SiteId(t)) as usize;
                            l |= touch_l[ct];
                            r |= touch_r[ct];
                        }
                    }
                    if l && r && crossing_with(g, q, &|c| c == s || f.open_at(c, p)) {
                        pivotal.push(s);
                    }
                }
            }
        }
    }
    pivotal
}

fn reach_square(
    g: &LatticeGraph,
    f: &LabelField,
    p: f64,
    (r0, r1, c0, c1): (u32, u32, u32, u32),
    from_left: bool,
) -> Vec<bool> {
    let mut visited = vec![false; g.original_count()];
    let mut queue = Vec::new();
    let start_col = if from_left { c0 } else { c1 };
    for r in r0..=r1 {
        let s = g.site_at(r, start_col);
        visited[s.index()] = true;
        queue.push(s.0);
    }
    let mut head = 0;
    while head < queue.len() {
        let s = SiteId(queue[head]);
        head += 1;
        for &(t, e) in g.neighbors(s) {
            if visited[t as usize] || !f.open_at(e as usize, p) {
                continue;
            }
            let (tr, tc) = g.coords(SiteId(t));
            if tr >= r0 && tr <= r1 && tc >= c0 && tc <= c1 {
                visited[t as usize] = true;
                queue.push(t);
            }
        }
    }
    visited
}

fn reach_tri(
    g: &LatticeGraph,
    f: &LabelField,
    p: f64,
    (r0, r1, c0, c1): (u32, u32, u32, u32),
    from_left: bool,
) -> Vec<bool> {
    let mut visited = vec![false; g.original_count()];
    let mut queue = Vec::new();
    let start_col = if from_left { c0 } else { c1 };
    for r in r0..=r1 {
        let s = g.site_at(r, start_col);
        if f.open_at(s.index(), p) {
            visited[s.index()] = true;
            queue.push(s.0);
        }
    }
    let mut head = 0;
    while head < queue.len() {
        let s = SiteId(queue[head]);
        head += 1;
        for &t in g.delta_neighbors(s) {
            if visited[t as usize] || !f.open_at(t as usize, p) {
                continue;
            }
            let (tr, tc) = g.coords(SiteId(t));
            if tr >= r0 && tr <= r1 && tc >= c0 && tc <= c1 {
                visited[t as usize] = true;
                queue.push(t);
            }
        }
    }
    visited
}

// ---------------------------------------------------------------------------
// ε-important carriers

/// Carriers with the alternating four-arm event at level p out to L∞ distance
/// ≥ ε (as a fraction of the domain side). Carriers whose ε-box sticks out of
/// the lattice do not qualify.
pub fn important_sites(g: &LatticeGraph, f: &LabelField, p: f64, eps: f64) -> Vec<usize> {
    let n = g.n();
    let radius = (eps * (n - 1) as f64 - 1e-9).ceil().max(1.0) as i64;
    let mut out = Vec::new();
    match g.kind() {
        LatticeKind::TriangularSite => {
            for s in 0..g.original_count() {
                if site_four_arm(g, f, p, SiteId(s as u32), radius) {
                    out.push(s);
                }
            }
        }
        LatticeKind::SquareBond => {
            for e in g.edge_ids() {
                if edge_four_arm(g, f, p, e, radius) {
                    out.push(e.index());
                }
            }
        }
    }
    out
}

/// Four-arm event at a single triangular site: at least two distinct open
/// clusters of the punctured box around it contain an open neighbor of the
/// site and reach the box boundary. On a triangulated lattice this is
/// equivalent to the alternating four-arm event (the sectors between two
/// such arms must each carry a closed crossing).
pub(crate) fn site_four_arm(
    g: &LatticeGraph,
    f: &LabelField,
    p: f64,
    v: SiteId,
    radius: i64,
) -> bool {
    let n = g.n() as i64;
    let (vr, vc) = g.coords(v);
    let (vr, vc) = (vr as i64, vc as i64);
    if vr - radius < 0 || vr + radius >= n || vc - radius < 0 || vc + radius >= n {
        return false;
    }
    let side = (2 * radius + 1) as usize;
    // cluster ids within the box, 0 = unvisited
    let mut mark = vec![0u32; side * side];
    let local = |r: i64, c: i64| ((r - vr + radius) * side as i64 + (c - vc + radius)) as usize;
    let mut arm_clusters = 0u32;
    let mut next = 0u32;
    let mut queue: Vec<(i64, i64)> = Vec::new();
    for &t in g.delta_neighbors(v) {
        let t = SiteId(t);
        if !f.open_at(t.index(), p) {
            continue;
        }
        let (tr, tc) = g.coords(t);
        let (tr, tc) = (tr as i64, tc as i64);
        if mark[local(tr, tc)] != 0 {
            continue;
        }
        next += 1;
        let cid = next;
        mark[local(tr, tc)] = cid;
        queue.clear();
        queue.push((tr, tc));
        let mut head = 0;
        let mut reaches = false;
        while head < queue.len() {
            let (r, c) = queue[head];
            head += 1;
            if (r - vr).abs().max((c - vc).abs()) == radius {
                reaches = true;
            }
            for &t2 in g.delta_neighbors(g.site_at(r as u32, c as u32)) {
                let t2 = SiteId(t2);
                if t2 == v || !f.open_at(t2.index(), p) {
                    continue;
                }
                let (r2, c2) = g.coords(t2);
                let (r2, c2) = (r2 as i64, c2 as i64);
                if (r2 - vr).abs().max((c2 - vc).abs()) > radius {
                    continue;
                }
                let m = &mut mark[local(r2, c2)];
                if *m == 0 {
                    *m = cid;
                    queue.push((r2, c2));
                }
            }
        }
        if reaches {
            arm_clusters += 1;
            if arm_clusters >= 2 {
                return true;
            }
        }
    }
    false
}

/// Four-arm event at a square-lattice bond: with the bond deleted, its two
/// endpoints reach L∞ distance `radius` (from the bond) through open edges
/// in two distinct clusters of the surrounding box. Exact by planar duality:
/// each sector between the two open arms must then carry a closed dual arm.
pub(crate) fn edge_four_arm(
    g: &LatticeGraph,
    f: &LabelField,
    p: f64,
    e: EdgeId,
    radius: i64,
) -> bool {
    let n = g.n() as i64;
    let (u, v) = g.endpoints(e);
    let (ur, uc) = g.coords(u);
    let (vr, vc) = g.coords(v);
    let (ur, uc, vr, vc) = (ur as i64, uc as i64, vr as i64, vc as i64);
    // Box: sites within `radius` of either endpoint; must fit in the lattice.
    let rlo = ur.min(vr) - radius;
    let rhi = ur.max(vr) + radius;
    let clo = uc.min(vc) - radius;
    let chi = uc.max(vc) + radius;
    if rlo < 0 || clo < 0 || rhi >= n || chi >= n {
        return false;
    }
    let dist = |r: i64, c: i64| -> i64 {
        let du = (r - ur).abs().max((c - uc).abs());
        let dv = (r - vr).abs().max((c - vc).abs());
        du.min(dv)
    };
    let w = (chi - clo + 1) as usize;
    let local = |r: i64, c: i64| ((r - rlo) as usize) * w + (c - clo) as usize;
    let mut mark = vec![0u32; ((rhi - rlo + 1) as usize) * w];
    let mut queue: Vec<(i64, i64)> = Vec::new();
    let mut found_first = false;
    for (cid, start) in [(1u32, (ur, uc)), (2u32, (vr, vc))] {
        if mark[local(start.0, start.1)] != 0 {
            // v is already in u's cluster: same component, no two arms.
            return false;
        }
        mark[local(start.0, start.1)] = cid;
        queue.clear();
        queue.push(start);
        let mut head = 0;
        let mut reaches = false;
        while head < queue.len() {
            let (r, c) = queue[head];
            head += 1;
            if dist(r, c) >= radius {
                reaches = true;
            }
            for &(t, te) in g.neighbors(g.site_at(r as u32, c as u32)) {
                if te as usize == e.index() || !f.open_at(te as usize, p) {
                    continue;
                }
                let (r2, c2) = g.coords(SiteId(t));
                let (r2, c2) = (r2 as i64, c2 as i64);
                if r2 < rlo || r2 > rhi || c2 < clo || c2 > chi {
                    continue;
                }
                let m = &mut mark[local(r2, c2)];
                if *m == 0 {
                    *m = cid;
                    queue.push((r2, c2));
                }
            }
        }
        if !reaches {
            return false;
        }
        if found_first {
            return true;
        }
        found_first = true;
    }
    unreachable!()
}

// ---------------------------------------------------------------------------
// Four-arm probability estimation

/// Result of a Monte Carlo estimate, JSON-serializable.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Alpha4Estimate {
    pub estimate: f64,
    pub stderr: f64,
    pub trials: u64,
    pub seed: u64,
    pub spec: LatticeSpec,
    pub r0: u32,
    pub outer: u32,
}

/// Monte Carlo estimate of the probability of the alternating four-arm event
/// from box radius r0 to radius R around the lattice center, at p = 1/2.
pub fn estimate_alpha4(
    spec: LatticeSpec,
    r0: u32,
    outer: u32,
    trials: u64,
    seed: u64,
) -> Result<Alpha4Estimate> {
    if trials == 0 {
        return Err(Error::DegenerateEstimate("zero trials".into()));
    }
    let g = build_lattice(spec);
    let n = spec.n;
    let center = g.site_at(n / 2, n / 2);
    let (cr, cc) = g.coords(center);
    if outer < r0 {
        return Err(Error::OutOfBounds("annulus"));
    }
    if (cr as i64) < outer as i64
        || (cc as i64) < outer as i64
        || (cr + outer) as i64 >= n as i64
        || (cc + outer) as i64 >= n as i64
    {
        return Err(Error::OutOfBounds("annulus"));
    }
    if outer == r0 {
        // Empty annulus: event holds by convention.
        return Ok(Alpha4Estimate {
            estimate: 1.0,
            stderr: 0.0,
            trials,
            seed,
            spec,
            r0,
            outer,
        });
    }
    if r0 == 0 {
        return Err(Error::OutOfBounds("inner radius"));
    }
    let successes: u64 = (0..trials)
        .into_par_iter()
        .map(|t| {
            let f = sample_uniform(&g, trial_seed(seed, t));
            u64::from(annulus_four_arm(&g, &f, 0.5, center, r0 as i64, outer as i64))
        })
        .sum();
    let p_hat = successes as f64 / trials as f64;
    Ok(Alpha4Estimate {
        estimate: p_hat,
        stderr: (p_hat * (1.0 - p_hat) / trials as f64).sqrt(),
        trials,
        seed,
        spec,
        r0,
        outer,
    })
}

/// Alternating four-arm event across the annulus r0 ≤ d∞ ≤ R: at least two
/// distinct open clusters of the annulus contain an inner-ring carrier and
/// reach the outer ring.
fn annulus_four_arm(
    g: &LatticeGraph,
    f: &LabelField,
    p: f64,
    center: SiteId,
    r0: i64,
    outer: i64,
) -> bool {
    let (cr, cc) = g.coords(center);
    let (cr, cc) = (cr as i64, cc as i64);
    let dist = |r: i64, c: i64| (r - cr).abs().max((c - cc).abs());
    let side = (2 * outer + 1) as usize;
    let local = |r: i64, c: i64| ((r - cr + outer) * side as i64 + (c - cc + outer)) as usize;
    let mut mark = vec![0u32; side * side];
    let mut next = 0u32;
    let mut crossing_clusters = 0u32;
    let mut queue: Vec<(i64, i64)> = Vec::new();

    // Enumerate the inner ring (d == r0) and flood each unvisited cluster.
    let mut ring: Vec<(i64, i64)> = Vec::new();
    for c in (cc - r0)..=(cc + r0) {
        ring.push((cr - r0, c));
        if r0 > 0 {
            ring.push((cr + r0, c));
        }
    }
    for r in (cr - r0 + 1)..(cr + r0) {
        ring.push((r, cc - r0));
        ring.push((r, cc + r0));
    }

    match g.kind() {
        LatticeKind::TriangularSite => {
            for &(sr, sc) in &ring {
                let s = g.site_at(sr as u32, sc as u32);
                if !f.open_at(s.index(), p) || mark[local(sr, sc)] != 0 {
                    continue;
                }
                next += 1;
                let cid = next;
                mark[local(sr, sc)] = cid;
                queue.clear();
                queue.push((sr, sc));
                let mut head = 0;
                let mut reaches = false;
                while head < queue.len() {
                    let (r, c) = queue[head];
                    head += 1;
                    if dist(r, c) == outer {
                        reaches = true;
                    }
                    for &t in g.delta_neighbors(g.site_at(r as u32, c as u32)) {
                        if !f.open_at(t as usize, p) {
                            continue;
                        }
                        let (r2, c2) = g.coords(SiteId(t));
                        let (r2, c2) = (r2 as i64, c2 as i64);
                        let d = dist(r2, c2);
                        if d < r0 || d > outer {
                            continue;
                        }
                        let m = &mut mark[local(r2, c2)];
                        if *m == 0 {
                            *m = cid;
                            queue.push((r2, c2));
                        }
                    }
                }
                if reaches {
                    crossing_clusters += 1;
                    if crossing_clusters >= 2 {
                        return true;
                    }
                }
            }
        }
        LatticeKind::SquareBond => {
            for &(sr, sc) in &ring {
                if mark[local(sr, sc)] != 0 {
                    continue;
                }
                next += 1;
                let cid = next;
                mark[local(sr, sc)] = cid;
                queue.clear();
                queue.push((sr, sc));
                let mut head = 0;
                let mut reaches = false;
                while head < queue.len() {
                    let (r, c) = queue[head];
                    head += 1;
                    if dist(r, c) == outer {
                        reaches = true;
                    }
                    for &(t, te) in g.neighbors(g.site_at(r as u32, c as u32)) {
                        if !f.open_at(te as usize, p) {
                            continue;
                        }
                        let (r2, c2) = g.coords(SiteId(t));
                        let (r2, c2) = (r2 as i64, c2 as i64);
                        let d = dist(r2, c2);
                        if d < r0 || d > outer {
                            continue;
                        }
                        let m = &mut mark[local(r2, c2)];
                        if *m == 0 {
                            *m = cid;
                            queue.push((r2, c2));
                        }
                    }
                }
                if reaches {
                    crossing_clusters += 1;
                    if crossing_clusters >= 2 {
                        return true;
                    }
                }
            }
        }
    }
    false
}

// ---------------------------------------------------------------------------
// Pivotal counting measure

/// Pivotal count for a quad, normalized by the switching rate r(η) so counts
/// at different meshes are comparable.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PivotalMeasure {
    pub raw_count: usize,
    pub rate: f64,
    pub normalized: f64,
}

pub fn pivotal_measure_estimate(
    g: &LatticeGraph,
    f: &LabelField,
    q: &Quad,
    p: f64,
    alpha4_hat: impl FnOnce(f64) -> f64,
) -> Result<PivotalMeasure> {
    let rate = rate_r(g.spec().mesh(), alpha4_hat)?;
    let raw = pivotal_sites(g, f, q, p).len();
    Ok(PivotalMeasure {
        raw_count: raw,
        rate,
        normalized: raw as f64 * rate,
    })
}

#[cfg(test)]
mod tests;
