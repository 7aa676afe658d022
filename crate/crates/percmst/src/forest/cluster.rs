//! Cluster trees by contraction and the diameter-cutoff cluster-graph path.

use crate::dsu::Dsu;
use crate::error::{Error, Result};
use crate::labels::{compare_keys, LabelField};
use crate::lattice::{EdgeId, LatticeGraph, SiteId};
use crate::percolation::{clusters_at, ClusterPartition, LambdaLevel};

/// One link of a contracted tree.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ClusterLink {
    pub a: u32,
    pub b: u32,
    pub edge: EdgeId,
    pub label: f64,
}

/// The minimum spanning tree of the multigraph obtained by contracting every
/// cluster open at the level into a single vertex. Links carry labels
/// strictly above the level.
#[derive(Clone, Debug)]
pub struct ClusterTree {
    threshold: f64,
    vertex_of: Vec<u32>,
    vertex_count: usize,
    links: Vec<ClusterLink>,
}

impl ClusterTree {
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    /// Contraction vertex of any graph site (midpoints included).
    pub fn vertex_of(&self, s: SiteId) -> u32 {
        self.vertex_of[s.index()]
    }

    pub fn links(&self) -> &[ClusterLink] {
        &self.links
    }

    pub fn link_edge_set(&self) -> Vec<EdgeId> {
        let mut out: Vec<EdgeId> = self.links.iter().map(|l| l.edge).collect();
        out.sort_unstable();
        out
    }

    /// Canonical form of the induced site partition: each site mapped to the
    /// smallest site index sharing its vertex. Lets trees built through
    /// different routes be compared without aligning vertex numbers.
    pub fn partition_signature(&self) -> Vec<u32> {
        let mut rep = vec![u32::MAX; self.vertex_count];
        for (s, &v) in self.vertex_of.iter().enumerate() {
            rep[v as usize] = rep[v as usize].min(s as u32);
        }
        self.vertex_of.iter().map(|&v| rep[v as usize]).collect()
    }
}

/// Maps every graph site to its contraction vertex for the partition:
/// original sites to their cluster, subdivision midpoints to the cluster of
/// an open endpoint (they hang off it at this level), everything else to a
/// fresh singleton vertex.
fn contraction_vertices(
    g: &LatticeGraph,
    f: &LabelField,
    p: f64,
    part: &ClusterPartition,
    contract_cluster: impl Fn(u32) -> bool,
) -> (Vec<u32>, usize) {
    let n_clusters = part.cluster_count();
    let mut cluster_vertex = vec![u32::MAX; n_clusters];
    let mut next = 0u32;
    for c in 0..n_clusters as u32 {
        if contract_cluster(c) {
            cluster_vertex[c as usize] = next;
            next += 1;
        }
    }
    let mut vertex_of = vec![u32::MAX; g.site_count()];
    for s in g.site_ids() {
        let cluster = if g.is_original(s) {
            Some(part.cluster_of(s))
        } else {
            // midpoint: attach to an open endpoint's cluster
            let mut attached = None;
            for &(t, _) in g.neighbors(s) {
                if f.open_at(t as usize, p) {
                    attached = Some(part.cluster_of(SiteId(t)));
                    break;
                }
            }
            attached
        };
        vertex_of[s.index()] = match cluster {
            Some(c) if cluster_vertex[c as usize] != u32::MAX => cluster_vertex[c as usize],
            _ => {
                let v = next;
                next += 1;
                v
            }
        };
    }
    (vertex_of, next as usize)
}

/// Kruskal over the quotient multigraph induced by `vertex_of`.
fn quotient_mst(
    g: &LatticeGraph,
    f: &LabelField,
    vertex_of: &[u32],
    vertex_count: usize,
) -> Vec<ClusterLink> {
    let mut order: Vec<u32> = (0..g.edge_count() as u32).collect();
    order.sort_unstable_by(|&a, &b| {
        compare_keys(f.edge_key(g, EdgeId(a)), f.edge_key(g, EdgeId(b)))
    });
    let mut dsu = Dsu::new(vertex_count);
    let mut links = Vec::with_capacity(vertex_count.saturating_sub(1));
    for e in order {
        let (u, v) = g.endpoints(EdgeId(e));
        let (a, b) = (vertex_of[u.index()], vertex_of[v.index()]);
        if a == b {
            continue;
        }
        if dsu.union(a, b) {
            links.push(ClusterLink {
                a,
                b,
                edge: EdgeId(e),
                label: f.edge_label(g, EdgeId(e)),
            });
            if links.len() + 1 == vertex_count {
                break;
            }
        }
    }
    links
}

/// Cluster tree at a raw density threshold.
pub fn cluster_tree_at(g: &LatticeGraph, f: &LabelField, p: f64) -> ClusterTree {
    let part = clusters_at(g, f, p);
    let (vertex_of, vertex_count) = contraction_vertices(g, f, p, &part, |_| true);
    let links = quotient_mst(g, f, &vertex_of, vertex_count);
    ClusterTree {
        threshold: p,
        vertex_of,
        vertex_count,
        links,
    }
}

/// Cluster tree T_λ at a level of the near-critical window.
pub fn cluster_tree(g: &LatticeGraph, f: &LabelField, level: LambdaLevel) -> ClusterTree {
    cluster_tree_at(g, f, level.threshold())
}

/// Refines a cluster tree to a higher level by contracting the links with
/// labels in (p₁, p₂]; equals the tree built from scratch at p₂.
pub fn refine_cluster_tree(t1: &ClusterTree, p2: f64) -> Result<ClusterTree> {
    if p2 < t1.threshold {
        return Err(Error::OutOfBounds("refinement level"));
    }
    let mut dsu = Dsu::new(t1.vertex_count);
    for link in &t1.links {
        if link.label <= p2 {
            dsu.union(link.a, link.b);
        }
    }
    let mut dense = vec![u32::MAX; t1.vertex_count];
    let mut next = 0u32;
    for v in 0..t1.vertex_count as u32 {
        let root = dsu.find(v);
        if dense[root as usize] == u32::MAX {
            dense[root as usize] = next;
            next += 1;
        }
    }
    let map = |v: u32, dsu: &mut Dsu| dense[dsu.find(v) as usize];
    let mut links = Vec::new();
    for link in &t1.links {
        if link.label > p2 {
            links.push(ClusterLink {
                a: map(link.a, &mut dsu),
                b: map(link.b, &mut dsu),
                edge: link.edge,
                label: link.label,
            });
        }
    }
    let vertex_of = t1
        .vertex_of
        .iter()
        .map(|&v| dense[dsu.find(v) as usize])
        .collect();
    Ok(ClusterTree {
        threshold: p2,
        vertex_of,
        vertex_count: next as usize,
        links,
    })
}

/// The tree path between the cutoff-cluster-graph vertices of x and y.
#[derive(Clone, Debug, PartialEq)]
pub struct CutoffPath {
    pub threshold: f64,
    pub eps: f64,
    /// Quotient vertices along the path.
    pub vertices: Vec<u32>,
    pub edges: Vec<EdgeId>,
    pub labels: Vec<f64>,
    /// Maximum link label used; None for the empty path. This is the level
    /// that must be opened to join x and y through the large clusters.
    pub max_label: Option<f64>,
}

impl CutoffPath {
    /// The links above the contraction threshold, in path order: the
    /// cut-edges between clusters. Stabilization across cutoffs is judged on
    /// this sequence.
    pub fn cut_edges(&self) -> Vec<EdgeId> {
        self.edges
            .iter()
            .zip(&self.labels)
            .filter(|(_, &l)| l > self.threshold)
            .map(|(&e, _)| e)
            .collect()
    }

    /// max_label expressed in λ units of the given level.
    pub fn lambda2(&self, level: &LambdaLevel) -> Option<f64> {
        self.max_label.map(|l| level.lambda_of_threshold(l))
    }
}

/// Contracts only the level-p₁ clusters with L∞ diameter at least `eps`
/// (as a fraction of the domain side); all other sites stay uncontracted.
/// Returns the MST path between the vertices containing x and y in the
/// resulting cluster graph.
pub fn cutoff_cluster_path(
    g: &LatticeGraph,
    f: &LabelField,
    p1: f64,
    eps: f64,
    x: SiteId,
    y: SiteId,
) -> Result<CutoffPath> {
    if !(p1 > 0.0 && p1 < 1.0) {
        return Err(Error::OutOfBounds("contraction level"));
    }
    if !(eps > 0.0) {
        return Err(Error::OutOfBounds("diameter cutoff"));
    }
    if x.index() >= g.site_count() || y.index() >= g.site_count() {
        return Err(Error::OutOfBounds("path endpoint"));
    }
    let part = clusters_at(g, f, p1);
    let n = g.n();
    let (vertex_of, vertex_count) = contraction_vertices(g, f, p1, &part, |c| {
        part.info(c).unit_diameter(n) >= eps
    });
    let links = quotient_mst(g, f, &vertex_of, vertex_count);

    // Path between the two super-vertices in the quotient tree.
    let (vx, vy) = (vertex_of[x.index()], vertex_of[y.index()]);
    if vx == vy {
        return Ok(CutoffPath {
            threshold: p1,
            eps,
            vertices: vec![vx],
            edges: Vec::new(),
            labels: Vec::new(),
            max_label: None,
        });
    }
    let mut adj: Vec<Vec<(u32, u32)>> = vec![Vec::new(); vertex_count];
    for (i, link) in links.iter().enumerate() {
        adj[link.a as usize].push((link.b, i as u32));
        adj[link.b as usize].push((link.a, i as u32));
    }
    let mut prev: Vec<(u32, u32)> = vec![(u32::MAX, u32::MAX); vertex_count];
    let mut queue = vec![vx];
    prev[vx as usize] = (vx, u32::MAX);
    let mut head = 0;
    while head < queue.len() {
        let v = queue[head];
        head += 1;
        if v == vy {
            break;
        }
        for &(w, li) in &adj[v as usize] {
            if prev[w as usize].0 == u32::MAX {
                prev[w as usize] = (v, li);
                queue.push(w);
            }
        }
    }
    if prev[vy as usize].0 == u32::MAX {
        return Err(Error::Disconnected);
    }
    let mut vertices = vec![vy];
    let mut edges = Vec::new();
    let mut labels = Vec::new();
    let mut cur = vy;
    while cur != vx {
        let (p, li) = prev[cur as usize];
        let link = &links[li as usize];
        edges.push(link.edge);
        labels.push(link.label);
        vertices.push(p);
        cur = p;
    }
    vertices.reverse();
    edges.reverse();
    labels.reverse();
    let max_label = labels.iter().copied().fold(None, |acc: Option<f64>, l| {
        Some(acc.map_or(l, |a| a.max(l)))
    });
    Ok(CutoffPath {
        threshold: p1,
        eps,
        vertices,
        edges,
        labels,
        max_label,
    })
}
