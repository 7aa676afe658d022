//! Random label fields: the Unif[0,1] coupling behind the whole ensemble.
//!
//! A label field attaches one value in [0,1] to every carrier — edges on the
//! square bond lattice, original sites on the triangular lattice. Comparisons
//! always go through [`LabelField::edge_key`], which breaks ties by edge
//! index, so every pairwise comparison is strict even though the six
//! half-edges around a triangular vertex share that vertex's label.
//!
//! All sampling is driven by ChaCha8 streams seeded from explicit 64-bit
//! seeds; the same (graph, spec, seed) always reproduces the same field.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{edge_star, EdgeId, LatticeGraph, LatticeKind, SiteId};

#[derive(Copy, Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum CarrierKind {
    PerEdge,
    PerSite,
}

impl CarrierKind {
    pub fn for_lattice(kind: LatticeKind) -> CarrierKind {
        match kind {
            LatticeKind::SquareBond => CarrierKind::PerEdge,
            LatticeKind::TriangularSite => CarrierKind::PerSite,
        }
    }
}

/// A region of the unit square used to select a label distribution.
#[derive(Copy, Clone, PartialEq, Debug, Serialize, Deserialize)]
pub enum Region {
    All,
    /// Positions with x strictly below the split.
    XLessThan(f64),
    /// Positions with x at or above the split.
    XAtLeast(f64),
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
}

impl Region {
    pub fn contains(&self, (x, y): (f64, f64)) -> bool {
        match *self {
            Region::All => true,
            Region::XLessThan(t) => x < t,
            Region::XAtLeast(t) => x >= t,
            Region::Rect { x0, y0, x1, y1 } => x >= x0 && x <= x1 && y >= y0 && y <= y1,
        }
    }
}

/// A distribution over [0,1] supported on one or two intervals.
#[derive(Copy, Clone, PartialEq, Debug, Serialize, Deserialize)]
pub enum Dist {
    Uniform { lo: f64, hi: f64 },
    UniformUnion { lo1: f64, hi1: f64, lo2: f64, hi2: f64 },
}

impl Dist {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Dist::Uniform { lo, hi } => 0.0 <= lo && lo < hi && hi <= 1.0,
            Dist::UniformUnion { lo1, hi1, lo2, hi2 } => {
                0.0 <= lo1 && lo1 < hi1 && hi1 <= lo2 && lo2 < hi2 && hi2 <= 1.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::BadRegionSpec(format!("bad distribution support {self:?}")))
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.gen();
        match *self {
            Dist::Uniform { lo, hi } => lo + (hi - lo) * u,
            Dist::UniformUnion { lo1, hi1, lo2, hi2 } => {
                let len1 = hi1 - lo1;
                let total = len1 + (hi2 - lo2);
                let t = u * total;
                if t < len1 {
                    lo1 + t
                } else {
                    lo2 + (t - len1)
                }
            }
        }
    }
}

/// Region-dependent label distributions; the regions must partition the
/// carrier positions.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct RegionDistributionSpec {
    pub regions: Vec<(Region, Dist)>,
}

impl RegionDistributionSpec {
    /// One Uniform(0,1) region covering everything.
    pub fn uniform_all() -> Self {
        RegionDistributionSpec {
            regions: vec![(Region::All, Dist::Uniform { lo: 0.0, hi: 1.0 })],
        }
    }

    /// Unif([0,1/5] ∪ [4/5,1]) on the left half, Unif[2/5,3/5] on the right.
    /// Carriers on the midline itself (x = 1/2) count as right.
    pub fn asymmetric_halves() -> Self {
        RegionDistributionSpec {
            regions: vec![
                (
                    Region::XLessThan(0.5),
                    Dist::UniformUnion { lo1: 0.0, hi1: 0.2, lo2: 0.8, hi2: 1.0 },
                ),
                (Region::XAtLeast(0.5), Dist::Uniform { lo: 0.4, hi: 0.6 }),
            ],
        }
    }
}

/// How a field's values were generated. `Transformed` fields can only be
/// persisted with inlined values.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub enum GenerationSpec {
    Uniform01,
    Regional(RegionDistributionSpec),
    Transformed,
}

/// One label per carrier, plus the metadata needed to regenerate it.
#[derive(Clone, PartialEq, Debug)]
pub struct LabelField {
    carrier: CarrierKind,
    values: Vec<f64>,
    seed: u64,
    spec: GenerationSpec,
}

impl LabelField {
    pub fn from_values(
        carrier: CarrierKind,
        values: Vec<f64>,
        seed: u64,
        spec: GenerationSpec,
    ) -> Self {
        LabelField { carrier, values, seed, spec }
    }

    pub fn carrier_kind(&self) -> CarrierKind {
        self.carrier
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn generation(&self) -> &GenerationSpec {
        &self.spec
    }

    pub fn carrier_count(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, carrier: usize) -> f64 {
        self.values[carrier]
    }

    pub(crate) fn set_value(&mut self, carrier: usize, v: f64) {
        self.values[carrier] = v;
    }

    /// Whether a carrier is open at level p.
    pub fn open_at(&self, carrier: usize, p: f64) -> bool {
        self.values[carrier] <= p
    }

    /// Effective label of a graph edge: its own label on the square lattice,
    /// the label of its star endpoint on the subdivided triangular lattice.
    pub fn edge_label(&self, g: &LatticeGraph, e: EdgeId) -> f64 {
        match self.carrier {
            CarrierKind::PerEdge => self.values[e.index()],
            CarrierKind::PerSite => {
                let s = edge_star(g, e).expect("per-site field on non-triangular graph");
                self.values[s.index()]
            }
        }
    }

    /// Strict total order key for edge comparisons: effective label first,
    /// edge index as tie-breaker.
    pub fn edge_key(&self, g: &LatticeGraph, e: EdgeId) -> (f64, u32) {
        (self.edge_label(g, e), e.0)
    }

    /// The carrier index backing a graph edge.
    pub fn edge_carrier(&self, g: &LatticeGraph, e: EdgeId) -> usize {
        match self.carrier {
            CarrierKind::PerEdge => e.index(),
            CarrierKind::PerSite => edge_star(g, e).expect("per-site field").index(),
        }
    }

    /// Position of a carrier in the unit square (edge midpoint or site).
    pub fn carrier_position(&self, g: &LatticeGraph, carrier: usize) -> (f64, f64) {
        match self.carrier {
            CarrierKind::PerEdge => g.edge_position(EdgeId(carrier as u32)),
            CarrierKind::PerSite => g.position(SiteId(carrier as u32)),
        }
    }

    /// True when all raw values are pairwise distinct (before tie-breaking).
    pub fn values_distinct(&self) -> bool {
        let mut sorted = self.values.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.windows(2).all(|w| w[0] < w[1])
    }
}

pub fn compare_keys(a: (f64, u32), b: (f64, u32)) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Deterministic per-trial seed derivation from a root seed (splitmix64).
pub fn trial_seed(root: u64, trial: u64) -> u64 {
    let mut z = root ^ trial.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// I.i.d. Unif[0,1] labels, one per carrier.
pub fn sample_uniform(g: &LatticeGraph, seed: u64) -> LabelField {
    let mut rng = rng_from(seed);
    let count = g.carrier_count();
    let values = (0..count).map(|_| rng.gen::<f64>()).collect();
    LabelField {
        carrier: CarrierKind::for_lattice(g.kind()),
        values,
        seed,
        spec: GenerationSpec::Uniform01,
    }
}

/// Labels drawn from region-dependent distributions. Errors if any carrier is
/// matched by zero regions or by more than one, or if a support is invalid.
pub fn sample_regional(
    g: &LatticeGraph,
    spec: &RegionDistributionSpec,
    seed: u64,
) -> Result<LabelField> {
    for (_, d) in &spec.regions {
        d.validate()?;
    }
    let carrier = CarrierKind::for_lattice(g.kind());
    let count = g.carrier_count();
    let probe = LabelField {
        carrier,
        values: vec![0.0; count],
        seed,
        spec: GenerationSpec::Uniform01,
    };
    let mut region_of = Vec::with_capacity(count);
    for i in 0..count {
        let pos = probe.carrier_position(g, i);
        let mut hit = None;
        for (k, (region, _)) in spec.regions.iter().enumerate() {
            if region.contains(pos) {
                if hit.is_some() {
                    return Err(Error::BadRegionSpec(format!(
                        "carrier {i} at {pos:?} matches more than one region"
                    )));
                }
                hit = Some(k);
            }
        }
        match hit {
            Some(k) => region_of.push(k),
            None => {
                return Err(Error::BadRegionSpec(format!(
                    "carrier {i} at {pos:?} is not covered"
                )))
            }
        }
    }
    let mut rng = rng_from(seed);
    let values = region_of
        .iter()
        .map(|&k| spec.regions[k].1.sample(&mut rng))
        .collect();
    Ok(LabelField {
        carrier,
        values,
        seed,
        spec: GenerationSpec::Regional(spec.clone()),
    })
}

/// Applies a strictly increasing map to every label. Errors if the map fails
/// a rank check on the sampled values.
pub fn relabel_monotone(f: &LabelField, map: impl Fn(f64) -> f64) -> Result<LabelField> {
    let new_values: Vec<f64> = f.values.iter().map(|&v| map(v)).collect();
    let mut order: Vec<usize> = (0..f.values.len()).collect();
    order.sort_by(|&a, &b| f.values[a].total_cmp(&f.values[b]).then(a.cmp(&b)));
    for w in order.windows(2) {
        let (a, b) = (w[0], w[1]);
        if f.values[a] < f.values[b] && new_values[a] >= new_values[b] {
            return Err(Error::NotMonotone);
        }
    }
    Ok(LabelField {
        carrier: f.carrier,
        values: new_values,
        seed: f.seed,
        spec: GenerationSpec::Transformed,
    })
}

/// Swaps the left and right halves of a field by the lattice automorphism
/// that exchanges them: column reflection on the square lattice, 180-degree
/// rotation on the triangular lattice (axial reflection is not a triangular
/// automorphism).
pub fn mirror_halves(g: &LatticeGraph, f: &LabelField) -> LabelField {
    let n = g.n();
    let mut values = vec![0.0; f.values.len()];
    match f.carrier {
        CarrierKind::PerSite => {
            for r in 0..n {
                for c in 0..n {
                    let from = g.site_at(r, c).index();
                    let to = g.site_at(n - 1 - r, n - 1 - c).index();
                    values[to] = f.values[from];
                }
            }
        }
        CarrierKind::PerEdge => {
            for e in g.edge_ids() {
                let (u, v) = g.endpoints(e);
                let (ur, uc) = g.coords(u);
                let (vr, vc) = g.coords(v);
                let mu = g.site_at(ur, n - 1 - uc);
                let mv = g.site_at(vr, n - 1 - vc);
                let me = edge_between(g, mu, mv).expect("mirror image edge");
                values[me.index()] = f.values[e.index()];
            }
        }
    }
    LabelField {
        carrier: f.carrier,
        values,
        seed: f.seed,
        spec: GenerationSpec::Transformed,
    }
}

/// Mirror image of an original site under the same automorphism used by
/// [`mirror_halves`].
pub fn mirror_site(g: &LatticeGraph, s: SiteId) -> SiteId {
    let n = g.n();
    let (r, c) = g.coords(s);
    match g.kind() {
        LatticeKind::SquareBond => g.site_at(r, n - 1 - c),
        LatticeKind::TriangularSite => g.site_at(n - 1 - r, n - 1 - c),
    }
}

pub fn edge_between(g: &LatticeGraph, u: SiteId, v: SiteId) -> Option<EdgeId> {
    g.neighbors(u)
        .iter()
        .find(|&&(t, _)| t == v.0)
        .map(|&(_, e)| EdgeId(e))
}

/// On-disk form of a label field. Values regenerate from the seed unless
/// inlined; `Transformed` fields must inline them.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FieldArtifact {
    pub version: u32,
    pub kind: LatticeKind,
    pub n: u32,
    pub seed: u64,
    pub generation: GenerationSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

pub const FIELD_ARTIFACT_VERSION: u32 = 1;

impl FieldArtifact {
    pub fn from_field(g: &LatticeGraph, f: &LabelField, inline_values: bool) -> Result<Self> {
        if matches!(f.spec, GenerationSpec::Transformed) && !inline_values {
            return Err(Error::BadRegionSpec(
                "transformed fields must inline their values".into(),
            ));
        }
        Ok(FieldArtifact {
            version: FIELD_ARTIFACT_VERSION,
            kind: g.kind(),
            n: g.n(),
            seed: f.seed,
            generation: f.spec.clone(),
            values: inline_values.then(|| f.values.clone()),
        })
    }

    pub fn into_field(&self, g: &LatticeGraph) -> Result<LabelField> {
        if g.kind() != self.kind || g.n() != self.n {
            return Err(Error::InvalidSpec(format!(
                "artifact is for {:?} n={}, graph is {:?} n={}",
                self.kind,
                self.n,
                g.kind(),
                g.n()
            )));
        }
        if let Some(values) = &self.values {
            if values.len() != g.carrier_count() {
                return Err(Error::InvalidSpec("inlined value count mismatch".into()));
            }
            return Ok(LabelField {
                carrier: CarrierKind::for_lattice(self.kind),
                values: values.clone(),
                seed: self.seed,
                spec: self.generation.clone(),
            });
        }
        match &self.generation {
            GenerationSpec::Uniform01 => Ok(sample_uniform(g, self.seed)),
            GenerationSpec::Regional(spec) => sample_regional(g, spec, self.seed),
            GenerationSpec::Transformed => Err(Error::BadRegionSpec(
                "transformed artifact without inlined values".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_lattice, LatticeSpec};

    fn square(n: u32) -> LatticeGraph {
        build_lattice(LatticeSpec::new(LatticeKind::SquareBond, n).unwrap())
    }

    fn triangular(n: u32) -> LatticeGraph {
        build_lattice(LatticeSpec::new(LatticeKind::TriangularSite, n).unwrap())
    }

    #[test]
    fn same_seed_same_field() {
        let g = square(8);
        assert_eq!(sample_uniform(&g, 42), sample_uniform(&g, 42));
    }

    #[test]
    fn adjacent_seeds_differ() {
        let g = square(8);
        let a = sample_uniform(&g, 7);
        let b = sample_uniform(&g, 8);
        assert_ne!(a.values(), b.values());
    }

    #[test]
    fn uniform_mean_near_half() {
        let g = square(64);
        let f = sample_uniform(&g, 1);
        assert!(f.carrier_count() >= 4000);
        let mean: f64 = f.values().iter().sum::<f64>() / f.carrier_count() as f64;
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn labels_distinct_after_sampling() {
        for seed in 0..20 {
            let g = triangular(8);
            assert!(sample_uniform(&g, seed).values_distinct());
        }
    }

    #[test]
    fn regional_right_half_support() {
        let g = square(64);
        let f = sample_regional(&g, &RegionDistributionSpec::asymmetric_halves(), 3).unwrap();
        let mut left = Vec::new();
        for (i, &v) in f.values().iter().enumerate() {
            let (x, _) = f.carrier_position(&g, i);
            if x >= 0.5 {
                assert!((0.4..=0.6).contains(&v), "right label {v} at x={x}");
            } else {
                assert!(v <= 0.2 || v >= 0.8, "left label {v} at x={x}");
                left.push(v);
            }
        }
        // The union distribution is symmetric about 1/2.
        let mean = left.iter().sum::<f64>() / left.len() as f64;
        assert!((mean - 0.5).abs() < 0.03, "left mean {mean}");
    }

    #[test]
    fn regional_uniform_matches_sample_uniform() {
        let g = triangular(6);
        let a = sample_regional(&g, &RegionDistributionSpec::uniform_all(), 9).unwrap();
        let b = sample_uniform(&g, 9);
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn regional_rejects_gaps_and_overlaps() {
        let g = square(4);
        let gap = RegionDistributionSpec {
            regions: vec![(Region::XLessThan(0.4), Dist::Uniform { lo: 0.0, hi: 1.0 })],
        };
        assert!(sample_regional(&g, &gap, 0).is_err());
        let overlap = RegionDistributionSpec {
            regions: vec![
                (Region::All, Dist::Uniform { lo: 0.0, hi: 1.0 }),
                (Region::XAtLeast(0.5), Dist::Uniform { lo: 0.4, hi: 0.6 }),
            ],
        };
        assert!(sample_regional(&g, &overlap, 0).is_err());
    }

    #[test]
    fn relabel_identity_and_cube() {
        let g = square(6);
        let f = sample_uniform(&g, 5);
        let id = relabel_monotone(&f, |u| u).unwrap();
        assert_eq!(id.values(), f.values());
        let cubed = relabel_monotone(&f, |u| u * u * u).unwrap();
        for i in 0..f.carrier_count() {
            for j in (i + 1)..f.carrier_count() {
                assert_eq!(
                    f.value(i) < f.value(j),
                    cubed.value(i) < cubed.value(j),
                    "rank flipped at ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn relabel_rejects_non_monotone() {
        let g = square(4);
        let f = sample_uniform(&g, 5);
        assert!(relabel_monotone(&f, |u| -u).is_err());
        assert!(relabel_monotone(&f, |_| 0.5).is_err());
    }

    #[test]
    fn trial_seeds_spread() {
        let seeds: Vec<u64> = (0..1000).map(|i| trial_seed(123, i)).collect();
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), seeds.len());
    }

    #[test]
    fn artifact_round_trip() {
        let g = triangular(5);
        let f = sample_regional(&g, &RegionDistributionSpec::asymmetric_halves(), 77).unwrap();
        for inline in [false, true] {
            let art = FieldArtifact::from_field(&g, &f, inline).unwrap();
            let json = serde_json::to_string(&art).unwrap();
            let back: FieldArtifact = serde_json::from_str(&json).unwrap();
            assert_eq!(back.into_field(&g).unwrap(), f);
        }
    }

    #[test]
    fn mirror_is_an_involution_preserving_multiset() {
        for g in [square(6), triangular(6)] {
            let f = sample_uniform(&g, 11);
            let m = mirror_halves(&g, &f);
            let mm = mirror_halves(&g, &m);
            assert_eq!(mm.values(), f.values());
            let mut a = f.values().to_vec();
            let mut b = m.values().to_vec();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            assert_eq!(a, b);
        }
    }
}
