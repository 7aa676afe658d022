//! Finite lattice geometry.
//!
//! Two lattice kinds are supported. `SquareBond` is the n-by-n square lattice
//! with labels carried per bond. `TriangularSite` is the n-by-n parallelogram
//! of the triangular lattice with labels carried per site; every triangular
//! edge is replaced by two edges in series through a degree-2 midpoint site,
//! so that each half-edge has exactly one endpoint that was an original
//! vertex (its "star" endpoint) and inherits that vertex's label.
//!
//! Triangular sites live in axial coordinates (row, col) with neighbor offsets
//! (0,±1), (±1,0), (+1,−1), (−1,+1). Positions map coordinates straight onto
//! the unit square (a linear shear of the true embedding), so an axis-aligned
//! rectangle in position space is geometrically a rhombus of the triangular
//! lattice. Boundary conditions are free everywhere.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Copy, Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum LatticeKind {
    SquareBond,
    TriangularSite,
}

/// Lattice geometry parameters: kind and sites per side. The mesh is `1/n`.
#[derive(Copy, Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub kind: LatticeKind,
    pub n: u32,
}

impl LatticeSpec {
    pub fn new(kind: LatticeKind, n: u32) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSpec(format!("n must be >= 2, got {n}")));
        }
        Ok(LatticeSpec { kind, n })
    }

    pub fn mesh(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Number of triangular-lattice edges before subdivision.
    fn delta_edge_count(n: u64) -> u64 {
        (n - 1) * (3 * n - 1)
    }

    pub fn site_count(&self) -> usize {
        let n = self.n as u64;
        (match self.kind {
            LatticeKind::SquareBond => n * n,
            LatticeKind::TriangularSite => n * n + Self::delta_edge_count(n),
        }) as usize
    }

    pub fn edge_count(&self) -> usize {
        let n = self.n as u64;
        (match self.kind {
            LatticeKind::SquareBond => 2 * n * (n - 1),
            LatticeKind::TriangularSite => 2 * Self::delta_edge_count(n),
        }) as usize
    }

    /// Number of label carriers: edges for `SquareBond`, original sites for
    /// `TriangularSite`.
    pub fn carrier_count(&self) -> usize {
        let n = self.n as u64;
        (match self.kind {
            LatticeKind::SquareBond => 2 * n * (n - 1),
            LatticeKind::TriangularSite => n * n,
        }) as usize
    }
}

#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct SiteId(pub u32);

#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct EdgeId(pub u32);

impl SiteId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl EdgeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Immutable lattice graph. Safe to share read-only across parallel trials.
///
/// Site coordinates are stored doubled so that subdivision midpoints stay on
/// the integer grid: an original site at lattice coordinates (r, c) has
/// doubled coordinates (2r, 2c). Original sites come first in row-major
/// order, midpoint sites after them.
#[derive(Clone, Debug)]
pub struct LatticeGraph {
    spec: LatticeSpec,
    n_original: u32,
    row2: Vec<i32>,
    col2: Vec<i32>,
    boundary: Vec<bool>,
    edges: Vec<[u32; 2]>,
    /// For TriangularSite: per edge, the endpoint that was an original vertex.
    star: Vec<u32>,
    adj_off: Vec<u32>,
    adj: Vec<(u32, u32)>, // (site, edge)
    /// For TriangularSite: CSR adjacency between original sites (the
    /// pre-subdivision triangular lattice).
    delta_off: Vec<u32>,
    delta_adj: Vec<u32>,
}

/// Builds the lattice graph for a spec. Rejects n < 2 via `LatticeSpec::new`.
pub fn build_lattice(spec: LatticeSpec) -> LatticeGraph {
    match spec.kind {
        LatticeKind::SquareBond => build_square(spec),
        LatticeKind::TriangularSite => build_triangular(spec),
    }
}

fn build_square(spec: LatticeSpec) -> LatticeGraph {
    let n = spec.n as usize;
    let n_sites = n * n;
    let mut row2 = Vec::with_capacity(n_sites);
    let mut col2 = Vec::with_capacity(n_sites);
    let mut boundary = Vec::with_capacity(n_sites);
    for r in 0..n {
        for c in 0..n {
            row2.push(2 * r as i32);
            col2.push(2 * c as i32);
            boundary.push(r == 0 || r == n - 1 || c == 0 || c == n - 1);
        }
    }
    let idx = |r: usize, c: usize| (r * n + c) as u32;
    let mut edges = Vec::with_capacity(spec.edge_count());
    for r in 0..n {
        for c in 0..n {
            if c + 1 < n {
                edges.push([idx(r, c), idx(r, c + 1)]);
            }
            if r + 1 < n {
                edges.push([idx(r, c), idx(r + 1, c)]);
            }
        }
    }
    let (adj_off, adj) = build_csr(n_sites, &edges);
    LatticeGraph {
        spec,
        n_original: n_sites as u32,
        row2,
        col2,
        boundary,
        edges,
        star: Vec::new(),
        adj_off,
        adj,
        delta_off: Vec::new(),
        delta_adj: Vec::new(),
    }
}

fn build_triangular(spec: LatticeSpec) -> LatticeGraph {
    let n = spec.n as usize;
    let n_orig = n * n;
    let idx = |r: usize, c: usize| (r * n + c) as u32;

    let mut row2: Vec<i32> = Vec::with_capacity(spec.site_count());
    let mut col2: Vec<i32> = Vec::with_capacity(spec.site_count());
    for r in 0..n {
        for c in 0..n {
            row2.push(2 * r as i32);
            col2.push(2 * c as i32);
        }
    }

    // Triangular edges from (r,c): east, north, north-west diagonal.
    let mut delta_edges: Vec<[u32; 2]> = Vec::new();
    for r in 0..n {
        for c in 0..n {
            if c + 1 < n {
                delta_edges.push([idx(r, c), idx(r, c + 1)]);
            }
            if r + 1 < n {
                delta_edges.push([idx(r, c), idx(r + 1, c)]);
            }
            if r + 1 < n && c > 0 {
                delta_edges.push([idx(r, c), idx(r + 1, c - 1)]);
            }
        }
    }
    debug_assert_eq!(delta_edges.len(), (n - 1) * (3 * n - 1));

    let mut edges = Vec::with_capacity(2 * delta_edges.len());
    let mut star = Vec::with_capacity(2 * delta_edges.len());
    for (k, &[u, v]) in delta_edges.iter().enumerate() {
        let mid = (n_orig + k) as u32;
        row2.push((row2[u as usize] + row2[v as usize]) / 2);
        col2.push((col2[u as usize] + col2[v as usize]) / 2);
        edges.push([u, mid]);
        star.push(u);
        edges.push([mid, v]);
        star.push(v);
    }

    let n_sites = n_orig + delta_edges.len();
    let hi = 2 * (n as i32 - 1);
    let boundary = (0..n_sites)
        .map(|s| row2[s] == 0 || row2[s] == hi || col2[s] == 0 || col2[s] == hi)
        .collect();

    let (adj_off, adj) = build_csr(n_sites, &edges);
    let (delta_off, delta_adj) = {
        let (off, pairs) = build_csr(n_orig, &delta_edges);
        (off, pairs.into_iter().map(|(s, _)| s).collect())
    };

    LatticeGraph {
        spec,
        n_original: n_orig as u32,
        row2,
        col2,
        boundary,
        edges,
        star,
        adj_off,
        adj,
        delta_off,
        delta_adj,
    }
}

fn build_csr(n_sites: usize, edges: &[[u32; 2]]) -> (Vec<u32>, Vec<(u32, u32)>) {
    let mut deg = vec![0u32; n_sites];
    for &[u, v] in edges {
        deg[u as usize] += 1;
        deg[v as usize] += 1;
    }
    let mut off = Vec::with_capacity(n_sites + 1);
    let mut acc = 0u32;
    for d in &deg {
        off.push(acc);
        acc += d;
    }
    off.push(acc);
    let mut adj = vec![(0u32, 0u32); acc as usize];
    let mut cursor: Vec<u32> = off[..n_sites].to_vec();
    for (e, &[u, v]) in edges.iter().enumerate() {
        adj[cursor[u as usize] as usize] = (v, e as u32);
        cursor[u as usize] += 1;
        adj[cursor[v as usize] as usize] = (u, e as u32);
        cursor[v as usize] += 1;
    }
    (off, adj)
}

impl LatticeGraph {
    pub fn spec(&self) -> LatticeSpec {
        self.spec
    }

    pub fn kind(&self) -> LatticeKind {
        self.spec.kind
    }

    pub fn n(&self) -> u32 {
        self.spec.n
    }

    pub fn site_count(&self) -> usize {
        self.row2.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn carrier_count(&self) -> usize {
        self.spec.carrier_count()
    }

    /// Number of original (pre-subdivision) sites; for `SquareBond` this is
    /// every site.
    pub fn original_count(&self) -> usize {
        self.n_original as usize
    }

    pub fn is_original(&self, s: SiteId) -> bool {
        s.0 < self.n_original
    }

    pub fn is_boundary(&self, s: SiteId) -> bool {
        self.boundary[s.index()]
    }

    /// Dense index of the original site at lattice coordinates (row, col).
    pub fn site_at(&self, row: u32, col: u32) -> SiteId {
        debug_assert!(row < self.spec.n && col < self.spec.n);
        SiteId(row * self.spec.n + col)
    }

    /// Lattice coordinates of a site, in half-steps of the original grid
    /// (original sites have even coordinates, midpoints odd ones).
    pub fn coords2(&self, s: SiteId) -> (i32, i32) {
        (self.row2[s.index()], self.col2[s.index()])
    }

    /// (row, col) of an original site.
    pub fn coords(&self, s: SiteId) -> (u32, u32) {
        debug_assert!(self.is_original(s));
        (s.0 / self.spec.n, s.0 % self.spec.n)
    }

    /// Geometric position in the unit square.
    pub fn position(&self, s: SiteId) -> (f64, f64) {
        let d = 2.0 * (self.spec.n - 1) as f64;
        (self.col2[s.index()] as f64 / d, self.row2[s.index()] as f64 / d)
    }

    pub fn endpoints(&self, e: EdgeId) -> (SiteId, SiteId) {
        let [u, v] = self.edges[e.index()];
        (SiteId(u), SiteId(v))
    }

    /// Midpoint position of an edge in the unit square.
    pub fn edge_position(&self, e: EdgeId) -> (f64, f64) {
        let (u, v) = self.endpoints(e);
        let (ux, uy) = self.position(u);
        let (vx, vy) = self.position(v);
        ((ux + vx) / 2.0, (uy + vy) / 2.0)
    }

    pub fn neighbors(&self, s: SiteId) -> &[(u32, u32)] {
        let a = self.adj_off[s.index()] as usize;
        let b = self.adj_off[s.index() + 1] as usize;
        &self.adj[a..b]
    }

    pub fn degree(&self, s: SiteId) -> usize {
        self.neighbors(s).len()
    }

    /// Original-site neighbors of an original site on the pre-subdivision
    /// triangular lattice.
    pub fn delta_neighbors(&self, s: SiteId) -> &[u32] {
        debug_assert_eq!(self.spec.kind, LatticeKind::TriangularSite);
        debug_assert!(self.is_original(s));
        let a = self.delta_off[s.index()] as usize;
        let b = self.delta_off[s.index() + 1] as usize;
        &self.delta_adj[a..b]
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeId> {
        (0..self.edges.len() as u32).map(EdgeId)
    }

    pub fn site_ids(&self) -> impl Iterator<Item = SiteId> {
        (0..self.row2.len() as u32).map(SiteId)
    }
}

/// The original-vertex endpoint `e*` of a subdivided half-edge.
pub fn edge_star(g: &LatticeGraph, e: EdgeId) -> Result<SiteId> {
    if g.spec.kind != LatticeKind::TriangularSite {
        return Err(Error::WrongLatticeKind {
            expected: "TriangularSite",
        });
    }
    if e.index() >= g.edges.len() {
        return Err(Error::OutOfBounds("edge id"));
    }
    Ok(SiteId(g.star[e.index()]))
}

/// L∞ bounding-box extent of a site set, in lattice units.
pub fn l_infinity_diameter(g: &LatticeGraph, sites: &[SiteId]) -> Result<f64> {
    if sites.is_empty() {
        return Err(Error::EmptySiteSet);
    }
    let mut rmin = i32::MAX;
    let mut rmax = i32::MIN;
    let mut cmin = i32::MAX;
    let mut cmax = i32::MIN;
    for &s in sites {
        let (r, c) = g.coords2(s);
        rmin = rmin.min(r);
        rmax = rmax.max(r);
        cmin = cmin.min(c);
        cmax = cmax.max(c);
    }
    Ok(((rmax - rmin).max(cmax - cmin)) as f64 / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn connected(g: &LatticeGraph) -> bool {
        let mut seen = vec![false; g.site_count()];
        let mut stack = vec![0u32];
        seen[0] = true;
        let mut count = 1;
        while let Some(s) = stack.pop() {
            for &(t, _) in g.neighbors(SiteId(s)) {
                if !seen[t as usize] {
                    seen[t as usize] = true;
                    count += 1;
                    stack.push(t);
                }
            }
        }
        count == g.site_count()
    }

    #[test]
    fn rejects_small_n() {
        assert!(LatticeSpec::new(LatticeKind::SquareBond, 1).is_err());
        assert!(LatticeSpec::new(LatticeKind::SquareBond, 0).is_err());
        assert!(LatticeSpec::new(LatticeKind::TriangularSite, 2).is_ok());
    }

    #[test]
    fn square_n2_is_a_single_square() {
        let g = build_lattice(LatticeSpec::new(LatticeKind::SquareBond, 2).unwrap());
        assert_eq!(g.site_count(), 4);
        assert_eq!(g.edge_count(), 4);
        assert!(connected(&g));
    }

    #[test]
    fn square_n3_counts() {
        // 2*n*(n-1) = 12 by hand enumeration of the 3x3 grid.
        let g = build_lattice(LatticeSpec::new(LatticeKind::SquareBond, 3).unwrap());
        assert_eq!(g.site_count(), 9);
        assert_eq!(g.edge_count(), 12);
    }

    #[test]
    fn count_formulas_hold() {
        for n in 2..=32 {
            for kind in [LatticeKind::SquareBond, LatticeKind::TriangularSite] {
                let spec = LatticeSpec::new(kind, n).unwrap();
                let g = build_lattice(spec);
                assert_eq!(g.site_count(), spec.site_count());
                assert_eq!(g.edge_count(), spec.edge_count());
                assert!((spec.mesh() * n as f64 - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn adjacency_symmetric_up_to_n16() {
        for n in 2..=16 {
            for kind in [LatticeKind::SquareBond, LatticeKind::TriangularSite] {
                let g = build_lattice(LatticeSpec::new(kind, n).unwrap());
                for s in g.site_ids() {
                    for &(t, e) in g.neighbors(s) {
                        assert!(g
                            .neighbors(SiteId(t))
                            .iter()
                            .any(|&(back, be)| back == s.0 && be == e));
                    }
                }
                assert!(connected(&g));
            }
        }
    }

    #[test]
    fn triangular_subdivision_structure() {
        let g = build_lattice(LatticeSpec::new(LatticeKind::TriangularSite, 3).unwrap());
        assert_eq!(g.original_count(), 9);
        // Every midpoint has degree exactly 2 and two original endpoints.
        let mut seen_pairs = HashSet::new();
        for s in g.site_ids().filter(|&s| !g.is_original(s)) {
            assert_eq!(g.degree(s), 2);
            let ends: Vec<u32> = g.neighbors(s).iter().map(|&(t, _)| t).collect();
            assert!(ends.iter().all(|&t| g.is_original(SiteId(t))));
            assert!(seen_pairs.insert((ends[0].min(ends[1]), ends[0].max(ends[1]))));
        }
        // Interior original degree is 6 before subdivision.
        let g4 = build_lattice(LatticeSpec::new(LatticeKind::TriangularSite, 4).unwrap());
        let interior = g4.site_at(1, 1);
        assert_eq!(g4.delta_neighbors(interior).len(), 6);
        assert_eq!(g4.degree(interior), 6);
    }

    #[test]
    fn edge_star_identifies_original_endpoint() {
        let g = build_lattice(LatticeSpec::new(LatticeKind::TriangularSite, 4).unwrap());
        // Every half-edge's star is one of its endpoints and is original.
        for e in g.edge_ids() {
            let s = edge_star(&g, e).unwrap();
            let (u, v) = g.endpoints(e);
            assert!(s == u || s == v);
            assert!(g.is_original(s));
        }
        // The two half-edges of one original edge report its two distinct
        // original endpoints.
        for k in 0..(g.edge_count() / 2) {
            let a = edge_star(&g, EdgeId(2 * k as u32)).unwrap();
            let b = edge_star(&g, EdgeId(2 * k as u32 + 1)).unwrap();
            assert_ne!(a, b);
        }
        // All half-edges around a degree-6 vertex v with star == v: six of them.
        let v = g.site_at(1, 1);
        let around = g
            .edge_ids()
            .filter(|&e| {
                let (a, b) = g.endpoints(e);
                (a == v || b == v) && edge_star(&g, e).unwrap() == v
            })
            .count();
        assert_eq!(around, 6);
    }

    #[test]
    fn edge_star_rejects_square() {
        let g = build_lattice(LatticeSpec::new(LatticeKind::SquareBond, 3).unwrap());
        assert!(edge_star(&g, EdgeId(0)).is_err());
    }

    #[test]
    fn diameter_examples() {
        let g = build_lattice(LatticeSpec::new(LatticeKind::SquareBond, 5).unwrap());
        assert!(l_infinity_diameter(&g, &[]).is_err());
        assert_eq!(l_infinity_diameter(&g, &[g.site_at(2, 2)]).unwrap(), 0.0);
        let corners = [g.site_at(0, 0), g.site_at(4, 4)];
        assert_eq!(l_infinity_diameter(&g, &corners).unwrap(), 4.0);
        // L-shaped cluster {(0,0),(0,2),(1,2)} has bounding box 2 x 1.
        let ell = [g.site_at(0, 0), g.site_at(0, 2), g.site_at(1, 2)];
        assert_eq!(l_infinity_diameter(&g, &ell).unwrap(), 2.0);
    }

    #[test]
    fn positions_fill_unit_square() {
        for kind in [LatticeKind::SquareBond, LatticeKind::TriangularSite] {
            let g = build_lattice(LatticeSpec::new(kind, 6).unwrap());
            for s in g.site_ids() {
                let (x, y) = g.position(s);
                assert!((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y));
            }
            assert_eq!(g.position(g.site_at(0, 0)), (0.0, 0.0));
            assert_eq!(g.position(g.site_at(5, 5)), (1.0, 1.0));
        }
    }
}
