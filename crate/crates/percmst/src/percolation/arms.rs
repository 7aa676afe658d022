//! Multi-arm annulus events with prescribed color patterns.
//!
//! An arm is a crossing of the square annulus r0 ≤ d∞ ≤ R around a center
//! site: primal arms walk carriers with labels at or below the primal level,
//! dual arms walk carriers with labels strictly above the dual level. On the
//! triangular lattice both colors live on original sites (the lattice is
//! self-matching); on the square bond lattice primal arms are open-edge
//! paths between sites and dual arms are closed-edge crossings between
//! faces, so the two colors are disjoint by construction.
//!
//! The search places the arms one by one in cyclic order around the inner
//! ring, flooding each arm through carriers not used by earlier arms and
//! retrying every rotation of the starting sector. Used-carrier removal
//! makes the disjointness exact; the start-ordering makes the cyclic pattern
//! explicit. At the annulus sizes this library probes the sequential
//! placement is effectively exhaustive.

use crate::error::{Error, Result};
use crate::labels::{edge_between, LabelField};
use crate::lattice::{LatticeGraph, LatticeKind, SiteId};

#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum ArmColor {
    Primal,
    Dual,
}

/// Per-color label thresholds: primal arms use labels ≤ `primal`, dual arms
/// use labels > `dual`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ArmLevels {
    pub primal: f64,
    pub dual: f64,
}

impl ArmLevels {
    pub fn at(p: f64) -> Self {
        ArmLevels { primal: p, dual: p }
    }
}

/// An annulus arm event: pattern of arm colors in cyclic order.
#[derive(Clone, Debug)]
pub struct ArmEvent {
    pub center: SiteId,
    pub r0: u32,
    pub outer: u32,
    pub pattern: Vec<ArmColor>,
}

impl ArmEvent {
    pub fn new(center: SiteId, r0: u32, outer: u32, pattern: Vec<ArmColor>) -> Result<Self> {
        if r0 < 1 || outer <= r0 {
            return Err(Error::OutOfBounds("annulus radii"));
        }
        if pattern.len() != 4 && pattern.len() != 6 {
            return Err(Error::OutOfBounds("arm pattern length"));
        }
        Ok(ArmEvent { center, r0, outer, pattern })
    }

    /// Alternating four arms (primal, dual, primal, dual) at one level.
    pub fn alternating4(center: SiteId, r0: u32, outer: u32) -> Result<Self> {
        use ArmColor::{Dual, Primal};
        Self::new(center, r0, outer, vec![Primal, Dual, Primal, Dual])
    }

    /// The six-arm pattern blocking a path touch-point: two pairs of primal
    /// arms separated by single dual arms.
    pub fn six_arm(center: SiteId, r0: u32, outer: u32) -> Result<Self> {
        use ArmColor::{Dual, Primal};
        Self::new(center, r0, outer, vec![Primal, Primal, Dual, Primal, Primal, Dual])
    }
}

/// An element of the search graph: a site, or (square lattice, dual color)
/// a face of the grid identified by its top-left corner.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
enum Element {
    Site(u32),
    Face(u32),
}

struct Annulus<'a> {
    g: &'a LatticeGraph,
    f: &'a LabelField,
    levels: ArmLevels,
    cr: i64,
    cc: i64,
    r0: i64,
    outer: i64,
    used_sites: Vec<bool>,
    used_faces: Vec<bool>,
}

impl<'a> Annulus<'a> {
    fn site_dist(&self, s: SiteId) -> i64 {
        let (r, c) = self.g.coords(s);
        (r as i64 - self.cr).abs().max((c as i64 - self.cc).abs())
    }

    /// Doubled L∞ distance from the center to a face center.
    fn face_dist2(&self, face: u32) -> i64 {
        let m = self.g.n() as i64 - 1;
        let (fr, fc) = ((face as i64) / m, (face as i64) % m);
        (2 * fr + 1 - 2 * self.cr).abs().max((2 * fc + 1 - 2 * self.cc).abs())
    }

    fn dual_range(&self) -> (i64, i64) {
        ((2 * self.r0 - 1).max(1), 2 * self.outer - 1)
    }

    fn eligible(&self, el: Element, color: ArmColor) -> bool {
        match el {
            Element::Site(s) => {
                let d = self.site_dist(SiteId(s));
                if d < self.r0 || d > self.outer || self.used_sites[s as usize] {
                    return false;
                }
                match (self.g.kind(), color) {
                    (LatticeKind::TriangularSite, ArmColor::Primal) => {
                        self.f.value(s as usize) <= self.levels.primal
                    }
                    (LatticeKind::TriangularSite, ArmColor::Dual) => {
                        self.f.value(s as usize) > self.levels.dual
                    }
                    // Square primal arms constrain edges, not sites.
                    (LatticeKind::SquareBond, ArmColor::Primal) => true,
                    (LatticeKind::SquareBond, ArmColor::Dual) => false,
                }
            }
            Element::Face(fa) => {
                let (dlo, dhi) = self.dual_range();
                let d = self.face_dist2(fa);
                d >= dlo && d <= dhi && !self.used_faces[fa as usize]
            }
        }
    }

    fn angle(&self, el: Element) -> f64 {
        let (dr, dc) = match el {
            Element::Site(s) => {
                let (r, c) = self.g.coords(SiteId(s));
                (2 * (r as i64 - self.cr), 2 * (c as i64 - self.cc))
            }
            Element::Face(fa) => {
                let m = self.g.n() as i64 - 1;
                let (fr, fc) = ((fa as i64) / m, (fa as i64) % m);
                (2 * fr + 1 - 2 * self.cr, 2 * fc + 1 - 2 * self.cc)
            }
        };
        (dr as f64).atan2(dc as f64)
    }

    fn is_terminal(&self, el: Element) -> bool {
        match el {
            Element::Site(s) => self.site_dist(SiteId(s)) == self.outer,
            Element::Face(fa) => self.face_dist2(fa) == self.dual_range().1,
        }
    }

    fn start_elements(&self, color: ArmColor) -> Vec<Element> {
        let mut out = Vec::new();
        match (self.g.kind(), color) {
            (LatticeKind::TriangularSite, _) | (LatticeKind::SquareBond, ArmColor::Primal) => {
                for r in (self.cr - self.r0)..=(self.cr + self.r0) {
                    for c in (self.cc - self.r0)..=(self.cc + self.r0) {
                        if (r - self.cr).abs().max((c - self.cc).abs()) == self.r0 {
                            out.push(Element::Site(self.g.site_at(r as u32, c as u32).0));
                        }
                    }
                }
            }
            (LatticeKind::SquareBond, ArmColor::Dual) => {
                let m = self.g.n() as i64 - 1;
                let (dlo, _) = self.dual_range();
                for fr in 0..m {
                    for fc in 0..m {
                        let fa = (fr * m + fc) as u32;
                        if self.face_dist2(fa) == dlo {
                            out.push(Element::Face(fa));
                        }
                    }
                }
            }
        }
        out
    }

    fn expand(&self, el: Element, color: ArmColor, out: &mut Vec<Element>) {
        out.clear();
        match el {
            Element::Site(s) => {
                let sid = SiteId(s);
                match self.g.kind() {
                    LatticeKind::TriangularSite => {
                        for &t in self.g.delta_neighbors(sid) {
                            out.push(Element::Site(t));
                        }
                    }
                    LatticeKind::SquareBond => {
                        for &(t, e) in self.g.neighbors(sid) {
                            if self.f.value(e as usize) <= self.levels.primal {
                                out.push(Element::Site(t));
                            }
                        }
                    }
                }
            }
            Element::Face(fa) => {
                debug_assert_eq!(color, ArmColor::Dual);
                let m = self.g.n() as i64 - 1;
                let (fr, fc) = ((fa as i64) / m, (fa as i64) % m);
                // Neighbor faces and the primal edge each step crosses.
                let candidates = [
                    (fr, fc + 1, (fr, fc + 1), (fr + 1, fc + 1)),
                    (fr, fc - 1, (fr, fc), (fr + 1, fc)),
                    (fr + 1, fc, (fr + 1, fc), (fr + 1, fc + 1)),
                    (fr - 1, fc, (fr, fc), (fr, fc + 1)),
                ];
                for (nr, nc, a, b) in candidates {
                    if nr < 0 || nc < 0 || nr >= m || nc >= m {
                        continue;
                    }
                    let u = self.g.site_at(a.0 as u32, a.1 as u32);
                    let v = self.g.site_at(b.0 as u32, b.1 as u32);
                    let e = edge_between(self.g, u, v).expect("grid edge");
                    if self.f.value(e.index()) > self.levels.dual {
                        out.push(Element::Face((nr * m + nc) as u32));
                    }
                }
            }
        }
    }

    fn mark_used(&mut self, el: Element, used: bool) {
        match el {
            Element::Site(s) => self.used_sites[s as usize] = used,
            Element::Face(fa) => self.used_faces[fa as usize] = used,
        }
    }

    fn is_used(&self, el: Element) -> bool {
        match el {
            Element::Site(s) => self.used_sites[s as usize],
            Element::Face(fa) => self.used_faces[fa as usize],
        }
    }

    /// Flood from one start through eligible unused elements; returns the
    /// path to the outer ring if one exists.
    fn arm_from(&self, start: Element, color: ArmColor) -> Option<Vec<Element>> {
        if !self.eligible(start, color) {
            return None;
        }
        let mut seen_sites = vec![false; self.used_sites.len()];
        let mut seen_faces = vec![false; self.used_faces.len()];
        let seen = |el: Element, s: &mut Vec<bool>, fa: &mut Vec<bool>| -> bool {
            let flag = match el {
                Element::Site(i) => &mut s[i as usize],
                Element::Face(i) => &mut fa[i as usize],
            };
            let new = !*flag;
            *flag = true;
            new
        };
        seen(start, &mut seen_sites, &mut seen_faces);
        let mut parents: Vec<(Element, Option<usize>)> = vec![(start, None)];
        let mut head = 0;
        let mut scratch = Vec::new();
        while head < parents.len() {
            let (el, _) = parents[head];
            let parent_idx = head;
            head += 1;
            if self.is_terminal(el) {
                let mut path = Vec::new();
                let mut cur = Some(parent_idx);
                while let Some(i) = cur {
                    path.push(parents[i].0);
                    cur = parents[i].1;
                }
                return Some(path);
            }
            self.expand(el, color, &mut scratch);
            let next: Vec<Element> = scratch
                .iter()
                .copied()
                .filter(|&nxt| self.eligible(nxt, color))
                .collect();
            for nxt in next {
                if seen(nxt, &mut seen_sites, &mut seen_faces) {
                    parents.push((nxt, Some(parent_idx)));
                }
            }
        }
        None
    }
}

/// Tests whether disjoint arms of the prescribed color/level pattern cross
/// the annulus in cyclic order.
pub fn arm_event_holds(
    g: &LatticeGraph,
    f: &LabelField,
    a: &ArmEvent,
    levels: ArmLevels,
) -> Result<bool> {
    let n = g.n() as i64;
    let (cr, cc) = g.coords(a.center);
    let (cr, cc) = (cr as i64, cc as i64);
    let outer = a.outer as i64;
    if cr - outer < 0 || cc - outer < 0 || cr + outer >= n || cc + outer >= n {
        return Err(Error::OutOfBounds("annulus"));
    }
    let mut ann = Annulus {
        g,
        f,
        levels,
        cr,
        cc,
        r0: a.r0 as i64,
        outer,
        used_sites: vec![false; g.original_count()],
        used_faces: vec![false; ((g.n() - 1) * (g.n() - 1)) as usize],
    };

    // All potential start elements across the colors in the pattern, in
    // cyclic (angular) order. Each matching element serves once as the
    // anchor of the first arm; the remaining arms must start at strictly
    // later ring positions within one turn.
    let mut ring: Vec<(f64, u8, u64, Element, ArmColor)> = Vec::new();
    for color in [ArmColor::Primal, ArmColor::Dual] {
        if a.pattern.contains(&color) {
            for el in ann.start_elements(color) {
                let key = match el {
                    Element::Site(s) => s as u64,
                    Element::Face(fa) => (1u64 << 32) | fa as u64,
                };
                ring.push((ann.angle(el), color as u8, key, el, color));
            }
        }
    }
    ring.sort_by(|x, y| {
        x.0.total_cmp(&y.0)
            .then(x.1.cmp(&y.1))
            .then(x.2.cmp(&y.2))
    });
    let len = ring.len();

    for origin in 0..len {
        if ring[origin].4 != a.pattern[0] {
            continue;
        }
        let mut placed: Vec<Vec<Element>> = Vec::new();
        let mut prev_offset = 0usize;
        let mut ok = true;
        for (j, &color) in a.pattern.iter().enumerate() {
            let lo = if j == 0 { 0 } else { prev_offset + 1 };
            let mut found = None;
            for offset in lo..len {
                let (_, _, _, el, ring_color) = ring[(origin + offset) % len];
                if ring_color != color || ann.is_used(el) {
                    if j == 0 {
                        break;
                    }
                    continue;
                }
                if let Some(path) = ann.arm_from(el, color) {
                    found = Some((offset, path));
                    break;
                }
                if j == 0 {
                    // the first arm is anchored at the origin element only
                    break;
                }
            }
            match found {
                Some((offset, path)) => {
                    for &pe in &path {
                        ann.mark_used(pe, true);
                    }
                    prev_offset = offset;
                    placed.push(path);
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            return Ok(true);
        }
        for path in placed {
            for el in path {
                ann.mark_used(el, false);
            }
        }
    }
    Ok(false)
}
