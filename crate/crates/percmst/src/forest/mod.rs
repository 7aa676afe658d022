//! Spanning-tree machinery over labeled lattices.
//!
//! Three equivalent constructions of the same tree are implemented and
//! cross-checked rather than trusted: Kruskal by ascending label with a
//! disjoint-set forest ([`mst`]), greedy invasion from a source
//! ([`invasion_tree`] run to completion), and the cycle rule (every non-tree
//! edge carries the maximum label of the cycle it closes,
//! [`cycle_rule_check`]). All comparisons use the strict total order of
//! [`LabelField::edge_key`], so the tree is unique.

mod cluster;

pub use cluster::{
    cluster_tree, cluster_tree_at, cutoff_cluster_path, refine_cluster_tree, ClusterLink,
    ClusterTree, CutoffPath,
};

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::dsu::Dsu;
use crate::error::{Error, Result};
use crate::labels::{compare_keys, LabelField};
use crate::lattice::{EdgeId, LatticeGraph, SiteId};

/// A rooted forest with labeled links.
#[derive(Clone, Debug)]
pub struct SpanningForest {
    parent: Vec<u32>,
    parent_edge: Vec<u32>,
    parent_label: Vec<f64>,
    depth: Vec<u32>,
    in_tree: Vec<bool>,
    roots: Vec<SiteId>,
    edges: Vec<EdgeId>,
    labels: Vec<f64>,
    adj_off: Vec<u32>,
    adj: Vec<(u32, u32)>,
}

const NONE: u32 = u32::MAX;

impl SpanningForest {
    /// Roots the given edges at `root` by breadth-first search. Sites not
    /// reached stay outside the forest.
    pub fn from_edges(
        g: &LatticeGraph,
        f: &LabelField,
        mut edges: Vec<EdgeId>,
        root: SiteId,
    ) -> Self {
        edges.sort_unstable();
        let labels: Vec<f64> = edges.iter().map(|&e| f.edge_label(g, e)).collect();
        let n = g.site_count();
        let mut deg = vec![0u32; n];
        for &e in &edges {
            let (u, v) = g.endpoints(e);
            deg[u.index()] += 1;
            deg[v.index()] += 1;
        }
        let mut adj_off = Vec::with_capacity(n + 1);
        let mut acc = 0;
        for d in &deg {
            adj_off.push(acc);
            acc += d;
        }
        adj_off.push(acc);
        let mut adj = vec![(0u32, 0u32); acc as usize];
        let mut cursor: Vec<u32> = adj_off[..n].to_vec();
        for &e in &edges {
            let (u, v) = g.endpoints(e);
            adj[cursor[u.index()] as usize] = (v.0, e.0);
            cursor[u.index()] += 1;
            adj[cursor[v.index()] as usize] = (u.0, e.0);
            cursor[v.index()] += 1;
        }

        let mut parent = vec![NONE; n];
        let mut parent_edge = vec![NONE; n];
        let mut parent_label = vec![0.0; n];
        let mut depth = vec![NONE; n];
        let mut in_tree = vec![false; n];
        let mut queue = vec![root.0];
        in_tree[root.index()] = true;
        depth[root.index()] = 0;
        let mut head = 0;
        while head < queue.len() {
            let s = queue[head];
            head += 1;
            let (a, b) = (adj_off[s as usize] as usize, adj_off[s as usize + 1] as usize);
            for &(t, e) in &adj[a..b] {
                if !in_tree[t as usize] {
                    in_tree[t as usize] = true;
                    parent[t as usize] = s;
                    parent_edge[t as usize] = e;
                    parent_label[t as usize] = f.edge_label(g, EdgeId(e));
                    depth[t as usize] = depth[s as usize] + 1;
                    queue.push(t);
                }
            }
        }

        SpanningForest {
            parent,
            parent_edge,
            parent_label,
            depth,
            in_tree,
            roots: vec![root],
            edges,
            labels,
            adj_off,
            adj,
        }
    }

    pub fn edge_set(&self) -> &[EdgeId] {
        &self.edges
    }

    pub fn contains_edge(&self, e: EdgeId) -> bool {
        self.edges.binary_search(&e).is_ok()
    }

    pub fn link_label(&self, e: EdgeId) -> Option<f64> {
        self.edges.binary_search(&e).ok().map(|i| self.labels[i])
    }

    pub fn roots(&self) -> &[SiteId] {
        &self.roots
    }

    pub fn in_tree(&self, s: SiteId) -> bool {
        self.in_tree[s.index()]
    }

    pub fn tree_site_count(&self) -> usize {
        self.in_tree.iter().filter(|&&b| b).count()
    }

    pub fn site_count(&self) -> usize {
        self.in_tree.len()
    }

    pub fn degree(&self, s: SiteId) -> usize {
        let (a, b) = (self.adj_off[s.index()], self.adj_off[s.index() + 1]);
        (b - a) as usize
    }

    pub fn neighbors(&self, s: SiteId) -> &[(u32, u32)] {
        let (a, b) = (
            self.adj_off[s.index()] as usize,
            self.adj_off[s.index() + 1] as usize,
        );
        &self.adj[a..b]
    }

    pub fn depth_of(&self, s: SiteId) -> u32 {
        self.depth[s.index()]
    }

    pub fn parent_of(&self, s: SiteId) -> Option<(SiteId, EdgeId, f64)> {
        let p = self.parent[s.index()];
        (p != NONE).then(|| {
            (
                SiteId(p),
                EdgeId(self.parent_edge[s.index()]),
                self.parent_label[s.index()],
            )
        })
    }
}

/// The unique tree path between two sites, with its bottleneck label.
#[derive(Clone, Debug, PartialEq)]
pub struct MinimaxPath {
    pub sites: Vec<SiteId>,
    pub edges: Vec<EdgeId>,
    /// Maximum link label along the path; 0 by convention for the empty path.
    pub bottleneck: f64,
    pub bottleneck_edge: Option<EdgeId>,
}

impl MinimaxPath {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// Minimum spanning tree under the label order, rooted at site 0.
pub fn mst(g: &LatticeGraph, f: &LabelField) -> Result<SpanningForest> {
    let mut order: Vec<u32> = (0..g.edge_count() as u32).collect();
    order.sort_unstable_by(|&a, &b| {
        compare_keys(f.edge_key(g, EdgeId(a)), f.edge_key(g, EdgeId(b)))
    });
    let mut dsu = Dsu::new(g.site_count());
    let want = g.site_count() - 1;
    let mut edges = Vec::with_capacity(want);
    for e in order {
        let (u, v) = g.endpoints(EdgeId(e));
        if dsu.union(u.0, v.0) {
            edges.push(EdgeId(e));
            if edges.len() == want {
                break;
            }
        }
    }
    if edges.len() != want {
        return Err(Error::Disconnected);
    }
    Ok(SpanningForest::from_edges(g, f, edges, SiteId(0)))
}

/// The unique tree path between x and y; its bottleneck is the minimax value
/// over all graph paths.
pub fn minimax_path(t: &SpanningForest, x: SiteId, y: SiteId) -> Result<MinimaxPath> {
    if !t.in_tree(x) || !t.in_tree(y) {
        return Err(Error::NotInSameTree);
    }
    if x == y {
        return Ok(MinimaxPath {
            sites: vec![x],
            edges: Vec::new(),
            bottleneck: 0.0,
            bottleneck_edge: None,
        });
    }
    let mut asites = vec![x];
    let mut aedges: Vec<EdgeId> = Vec::new();
    let mut bsites = vec![y];
    let mut bedges: Vec<EdgeId> = Vec::new();
    let mut a = x;
    let mut b = y;
    let climb = |s: &mut SiteId, sites: &mut Vec<SiteId>, edges: &mut Vec<EdgeId>,
                 t: &SpanningForest|
     -> Result<()> {
        let (p, e, _) = t.parent_of(*s).ok_or(Error::NotInSameTree)?;
        edges.push(e);
        sites.push(p);
        *s = p;
        Ok(())
    };
    while t.depth[a.index()] > t.depth[b.index()] {
        climb(&mut a, &mut asites, &mut aedges, t)?;
    }
    while t.depth[b.index()] > t.depth[a.index()] {
        climb(&mut b, &mut bsites, &mut bedges, t)?;
    }
    while a != b {
        climb(&mut a, &mut asites, &mut aedges, t)?;
        climb(&mut b, &mut bsites, &mut bedges, t)?;
    }
    // a == b is the meeting point; bsites ends with it too.
    bsites.pop();
    let mut sites = asites;
    let mut edges = aedges;
    while let Some(s) = bsites.pop() {
        sites.push(s);
    }
    while let Some(e) = bedges.pop() {
        edges.push(e);
    }
    let mut bottleneck = f64::NEG_INFINITY;
    let mut bottleneck_edge = None;
    for &e in &edges {
        let label = t.link_label(e).expect("path edge in tree");
        if bottleneck_edge.is_none()
            || compare_keys((label, e.0), (bottleneck, bottleneck_edge.unwrap())) == std::cmp::Ordering::Greater
        {
            bottleneck = label;
            bottleneck_edge = Some(e.0);
        }
    }
    Ok(MinimaxPath {
        sites,
        edges,
        bottleneck,
        bottleneck_edge: bottleneck_edge.map(EdgeId),
    })
}

/// True iff every non-tree edge carries the maximum label (in the strict
/// total order) of the unique cycle it closes in `t`.
pub fn cycle_rule_check(g: &LatticeGraph, f: &LabelField, t: &SpanningForest) -> bool {
    for e in g.edge_ids() {
        if t.contains_edge(e) {
            continue;
        }
        let (u, v) = g.endpoints(e);
        let path = match minimax_path(t, u, v) {
            Ok(p) => p,
            Err(_) => return false,
        };
        match path.bottleneck_edge {
            Some(b) => {
                if compare_keys(f.edge_key(g, e), (path.bottleneck, b.0))
                    != std::cmp::Ordering::Greater
                {
                    return false;
                }
            }
            // Parallel edge closing an empty cycle cannot happen on these
            // lattices; treat defensively as a violation.
            None => return false,
        }
    }
    true
}

/// Stopping rule for invasion growth.
#[derive(Copy, Clone, Debug, PartialEq)]
pub enum Stop {
    /// Invade until the tree spans every reachable site.
    Full,
    /// Stop once the tree holds this many sites (the source counts).
    Sites(usize),
    /// Stop before invading any edge with label above this level.
    Level(f64),
    /// Stop as soon as this site joins the tree.
    Reach(SiteId),
}

#[derive(PartialEq, Eq, PartialOrd, Ord)]
struct HeapKey {
    bits: u64,
    edge: u32,
}

impl HeapKey {
    fn new(label: f64, edge: EdgeId) -> Self {
        // labels are non-negative, so the bit pattern sorts like the value
        HeapKey { bits: label.to_bits(), edge: edge.0 }
    }
}

/// Greedy invasion from a source: repeatedly add the smallest-label boundary
/// edge. Run to completion this is exactly the minimum spanning tree; any
/// partial tree is a subtree of it.
pub fn invasion_tree(
    g: &LatticeGraph,
    f: &LabelField,
    source: SiteId,
    stop: Stop,
) -> SpanningForest {
    let mut in_tree = vec![false; g.site_count()];
    in_tree[source.index()] = true;
    let mut count = 1usize;
    let mut edges: Vec<EdgeId> = Vec::new();

    let stopped_at_source = match stop {
        Stop::Sites(k) => count >= k,
        Stop::Reach(y) => y == source,
        _ => false,
    };
    if !stopped_at_source {
        let mut heap: BinaryHeap<Reverse<HeapKey>> = BinaryHeap::new();
        for &(_, e) in g.neighbors(source) {
            heap.push(Reverse(HeapKey::new(f.edge_label(g, EdgeId(e)), EdgeId(e))));
        }
        while let Some(Reverse(key)) = heap.pop() {
            let e = EdgeId(key.edge);
            let (u, v) = g.endpoints(e);
            let w = if !in_tree[u.index()] {
                u
            } else if !in_tree[v.index()] {
                v
            } else {
                continue;
            };
            if let Stop::Level(p) = stop {
                if f.edge_label(g, e) > p {
                    break;
                }
            }
            edges.push(e);
            in_tree[w.index()] = true;
            count += 1;
            if matches!(stop, Stop::Sites(k) if count >= k)
                || matches!(stop, Stop::Reach(y) if y == w)
            {
                break;
            }
            for &(_, we) in g.neighbors(w) {
                let we = EdgeId(we);
                let (a, b) = g.endpoints(we);
                if !in_tree[a.index()] || !in_tree[b.index()] {
                    heap.push(Reverse(HeapKey::new(f.edge_label(g, we), we)));
                }
            }
        }
    }
    SpanningForest::from_edges(g, f, edges, source)
}

/// True iff the union of the full invasion trees from all sources equals the
/// minimum spanning tree.
pub fn invasion_union_check(
    g: &LatticeGraph,
    f: &LabelField,
    sources: &[SiteId],
) -> Result<bool> {
    if sources.is_empty() {
        return Err(Error::EmptySiteSet);
    }
    let tree = mst(g, f)?;
    let mut union = vec![false; g.edge_count()];
    for &s in sources {
        let inv = invasion_tree(g, f, s, Stop::Full);
        for &e in inv.edge_set() {
            union[e.index()] = true;
        }
    }
    let union_set: Vec<EdgeId> = (0..g.edge_count() as u32)
        .map(EdgeId)
        .filter(|e| union[e.index()])
        .collect();
    Ok(union_set == tree.edge_set())
}
