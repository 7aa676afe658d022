use super::*;
use crate::labels::LabelField;
use crate::labels::{CarrierKind, GenerationSpec};
use crate::lattice::build_lattice;

fn square(n: u32) -> LatticeGraph {
    build_lattice(LatticeSpec::new(LatticeKind::SquareBond, n).unwrap())
}

fn triangular(n: u32) -> LatticeGraph {
    build_lattice(LatticeSpec::new(LatticeKind::TriangularSite, n).unwrap())
}

fn field_with(g: &LatticeGraph, values: Vec<f64>) -> LabelField {
    LabelField::from_values(
        CarrierKind::for_lattice(g.kind()),
        values,
        0,
        GenerationSpec::Transformed,
    )
}

/// Independent flood-fill oracle: component of `s` in the ≤p subgraph.
fn bfs_component(g: &LatticeGraph, f: &LabelField, p: f64, s: SiteId) -> Vec<u32> {
    let mut seen = vec![false; g.original_count()];
    let mut out = vec![s.0];
    seen[s.index()] = true;
    let mut head = 0;
    while head < out.len() {
        let cur = SiteId(out[head]);
        head += 1;
        match g.kind() {
            LatticeKind::SquareBond => {
                for &(t, e) in g.neighbors(cur) {
                    if !seen[t as usize] && f.open_at(e as usize, p) {
                        seen[t as usize] = true;
                        out.push(t);
                    }
                }
            }
            LatticeKind::TriangularSite => {
                if !f.open_at(cur.index(), p) {
                    continue;
                }
                for &t in g.delta_neighbors(cur) {
                    if !seen[t as usize] && f.open_at(t as usize, p) {
                        seen[t as usize] = true;
                        out.push(t);
                    }
                }
            }
        }
    }
    out.sort_unstable();
    out
}

#[test]
fn clusters_trivial_levels() {
    for g in [square(5), triangular(5)] {
        let f = sample_uniform(&g, 3);
        let at0 = clusters_at(&g, &f, 0.0);
        assert_eq!(at0.cluster_count(), g.original_count());
        assert!(at0.clusters().iter().all(|c| c.sites == 1 && c.open_carriers == 0));
        let at1 = clusters_at(&g, &f, 1.0);
        assert_eq!(at1.cluster_count(), 1);
        assert_eq!(at1.info(0).sites as usize, g.original_count());
    }
}

#[test]
fn clusters_match_bfs_oracle() {
    for g in [square(4), triangular(4)] {
        let f = sample_uniform(&g, 17);
        let part = clusters_at(&g, &f, 0.5);
        for s in 0..g.original_count() as u32 {
            let comp = bfs_component(&g, &f, 0.5, SiteId(s));
            // For triangular, a closed site is its own singleton component.
            let expected: Vec<u32> = if g.kind() == LatticeKind::TriangularSite
                && !f.open_at(s as usize, 0.5)
            {
                vec![s]
            } else {
                comp
            };
            let members: Vec<u32> = (0..g.original_count() as u32)
                .filter(|&t| part.same_cluster(SiteId(s), SiteId(t)))
                .collect();
            assert_eq!(members, expected, "site {s}");
        }
    }
}

#[test]
fn cluster_sizes_sum_to_open_carriers() {
    for g in [square(8), triangular(8)] {
        let f = sample_uniform(&g, 5);
        for p in [0.2, 0.5, 0.8] {
            let part = clusters_at(&g, &f, p);
            let total: u32 = part.clusters().iter().map(|c| c.open_carriers).sum();
            let open = (0..g.carrier_count()).filter(|&c| f.open_at(c, p)).count();
            assert_eq!(total as usize, open);
        }
    }
}

#[test]
fn coupling_monotone_refinement() {
    let mut rng = crate::labels::rng_from(99);
    use rand::Rng;
    for g in [square(16), triangular(12)] {
        let f = sample_uniform(&g, 21);
        for _ in 0..8 {
            let a: f64 = rng.gen();
            let b: f64 = rng.gen();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let fine = clusters_at(&g, &f, lo);
            let coarse = clusters_at(&g, &f, hi);
            // Every lo-cluster is contained in one hi-cluster.
            let mut image = vec![u32::MAX; fine.cluster_count()];
            for s in 0..g.original_count() as u32 {
                let fc = fine.cluster_of(SiteId(s));
                let cc = coarse.cluster_of(SiteId(s));
                if image[fc as usize] == u32::MAX {
                    image[fc as usize] = cc;
                } else {
                    assert_eq!(image[fc as usize], cc);
                }
            }
        }
    }
}

#[test]
fn lambda_level_thresholds() {
    let l0 = LambdaLevel::new(0.0, 1.0 / 64.0);
    assert_eq!(l0.threshold(), 0.5);
    let mut prev = -1.0;
    for k in -30..=30 {
        let p = LambdaLevel::new(k as f64, 1.0 / 64.0).threshold();
        assert!(p >= prev);
        prev = p;
    }
    assert_eq!(LambdaLevel::new(1e9, 0.5).threshold(), 1.0);
    assert_eq!(LambdaLevel::new(-1e9, 0.5).threshold(), 0.0);
}

#[test]
fn rate_r_examples() {
    // With the asymptotic four-arm probability the rate is exactly eta^{3/4}.
    for eta in [1.0 / 16.0, 1.0 / 64.0] {
        let r = rate_r(eta, alpha4_asymptotic).unwrap();
        assert!((r - eta.powf(0.75)).abs() < 1e-14);
        assert!((r - asymptotic_rate(eta)).abs() < 1e-14);
    }
    // Degenerate single-scale case.
    assert_eq!(rate_r(1.0, |_| 1.0).unwrap(), 1.0);
    assert!(rate_r(1.0, |_| 0.0).is_err());
    assert!(rate_r(0.0, |_| 1.0).is_err());
}

#[test]
fn crossing_trivial_levels() {
    for g in [square(8), triangular(8)] {
        let f = sample_uniform(&g, 2);
        let q = Quad::unit();
        assert!(has_crossing(&g, &f, &q, 1.0));
        assert!(!has_crossing(&g, &f, &q, 0.0));
    }
}

#[test]
fn rhombus_crossing_probability_near_half() {
    // Color symmetry forces exactly 1/2 on the full rhombus at p = 1/2;
    // desk-size Monte Carlo sits within 3 sigma.
    let g = triangular(16);
    let q = Quad::unit();
    let trials = 2000u32;
    let hits: u32 = (0..trials)
        .map(|t| u32::from(has_crossing(&g, &sample_uniform(&g, trial_seed(77, t as u64)), &q, 0.5)))
        .sum();
    let p_hat = hits as f64 / trials as f64;
    assert!((p_hat - 0.5).abs() < 3.0 * (0.25f64 / trials as f64).sqrt(), "p_hat {p_hat}");
}

#[test]
fn quad_validation() {
    assert!(Quad::new(0.2, 0.2, 0.1, 0.8).is_err());
    assert!(Quad::new(0.0, 0.0, 1.2, 1.0).is_err());
    assert!(Quad::new(0.1, 0.1, 0.9, 0.9).is_ok());
}

#[test]
fn arm_event_validation() {
    let g = triangular(8);
    let f = sample_uniform(&g, 1);
    // Annulus sticking out of the lattice is an error.
    let a = ArmEvent::alternating4(g.site_at(0, 0), 1, 3).unwrap();
    assert!(arm_event_holds(&g, &f, &a, ArmLevels::at(0.5)).is_err());
    assert!(ArmEvent::new(g.site_at(4, 4), 2, 2, vec![ArmColor::Primal; 4]).is_err());
    assert!(ArmEvent::new(g.site_at(4, 4), 1, 3, vec![ArmColor::Primal; 5]).is_err());
}

#[test]
fn fully_primal_field_has_no_alternating_arms() {
    for g in [triangular(9), square(9)] {
        let f = field_with(&g, vec![0.1; g.carrier_count()]);
        let a = ArmEvent::alternating4(g.site_at(4, 4), 1, 3).unwrap();
        assert!(!arm_event_holds(&g, &f, &a, ArmLevels::at(0.5)).unwrap());
        let six = ArmEvent::six_arm(g.site_at(4, 4), 1, 3).unwrap();
        assert!(!arm_event_holds(&g, &f, &six, ArmLevels::at(0.5)).unwrap());
    }
}

#[test]
fn hand_built_plus_sign_has_four_arms() {
    // Four primal arms along the axial row and column of the center, dual
    // everywhere else: the alternating four-arm event holds on the radius-3
    // annulus around the center of a triangular lattice.
    let g = triangular(9);
    let center = g.site_at(4, 4);
    let mut values = vec![0.9; g.carrier_count()];
    for k in 0..9u32 {
        values[g.site_at(4, k).index()] = 0.1;
        values[g.site_at(k, 4).index()] = 0.1;
    }
    let f = field_with(&g, values);
    let a = ArmEvent::alternating4(center, 1, 3).unwrap();
    assert!(arm_event_holds(&g, &f, &a, ArmLevels::at(0.5)).unwrap());
    // The four arms with their four dual sectors also realize the grouped
    // six-arm pattern (two primal arms per dual gap).
    let six = ArmEvent::six_arm(center, 1, 3).unwrap();
    assert!(arm_event_holds(&g, &f, &six, ArmLevels::at(0.5)).unwrap());
}

#[test]
fn hand_built_six_arm_configuration() {
    // Two primal "double lanes" east and west separated by dual rows.
    let g = triangular(11);
    let center = g.site_at(5, 5);
    let mut values = vec![0.9; g.carrier_count()];
    for c in 0..11u32 {
        values[g.site_at(4, c).index()] = 0.1;
        values[g.site_at(6, c).index()] = 0.1;
    }
    // Leave row 5 dual except the center itself; dual arms run along row 5
    // east and west of the center.
    let f = field_with(&g, values);
    let six = ArmEvent::six_arm(center, 1, 4).unwrap();
    assert!(arm_event_holds(&g, &f, &six, ArmLevels { primal: 0.5, dual: 0.5 }).unwrap());
}

#[test]
fn square_bond_alternating_arms_with_dual_faces() {
    // A single open row of bonds through the center: two primal arms
    // east/west, dual arms north/south through the faces.
    let g = square(9);
    let mut values = vec![0.9; g.carrier_count()];
    for c in 0..8 {
        let e = crate::labels::edge_between(&g, g.site_at(4, c), g.site_at(4, c + 1)).unwrap();
        values[e.index()] = 0.1;
    }
    let f = field_with(&g, values);
    let a = ArmEvent::alternating4(g.site_at(4, 4), 1, 3).unwrap();
    assert!(arm_event_holds(&g, &f, &a, ArmLevels::at(0.5)).unwrap());
    // Fully closed field: no primal arm anywhere.
    let closed = field_with(&g, vec![0.9; g.carrier_count()]);
    assert!(!arm_event_holds(&g, &closed, &a, ArmLevels::at(0.5)).unwrap());
}

/// Flip oracle: recompute the crossing with one carrier's openness toggled.
fn pivotal_oracle(g: &LatticeGraph, f: &LabelField, q: &Quad, p: f64) -> Vec<usize> {
    let base = has_crossing(g, f, q, p);
    (0..g.carrier_count())
        .filter(|&k| {
            let flipped = crossing_with(g, q, &|c| {
                if c == k {
                    !f.open_at(c, p)
                } else {
                    f.open_at(c, p)
                }
            });
            flipped != base
        })
        .collect()
}

#[test]
fn pivotal_matches_flip_oracle() {
    for n in 2..=5u32 {
        for (g, seeds) in [(square(n), 0u64..6), (triangular(n), 6u64..12)] {
            for seed in seeds {
                let f = sample_uniform(&g, seed);
                for q in [
                    Quad::unit(),
                    Quad::new(0.0, 0.0, 1.0, 0.55).unwrap(),
                    Quad::new(0.2, 0.1, 0.9, 0.9).unwrap(),
                ] {
                    for p in [0.3, 0.5, 0.7] {
                        let mut got = pivotal_sites(&g, &f, &q, p);
                        got.sort_unstable();
                        assert_eq!(got, pivotal_oracle(&g, &f, &q, p), "n={n} seed={seed} p={p}");
                    }
                }
            }
        }
    }
}

#[test]
fn pivotal_single_path_strip() {
    // A one-row strip at p=1: the crossing is the unique horizontal path, so
    // every edge on it is pivotal.
    let g = square(6);
    let f = sample_uniform(&g, 4);
    let q = Quad::new(0.0, 0.0, 1.0, 0.05).unwrap();
    let mut got = pivotal_sites(&g, &f, &q, 1.0);
    got.sort_unstable();
    let expected: Vec<usize> = g
        .edge_ids()
        .filter(|&e| {
            let (u, v) = g.endpoints(e);
            g.coords(u).0 == 0 && g.coords(v).0 == 0
        })
        .map(|e| e.index())
        .collect();
    assert_eq!(got, expected);
}

#[test]
fn pivotal_empty_with_two_disjoint_crossings() {
    let g = square(6);
    let f = sample_uniform(&g, 4);
    assert!(pivotal_sites(&g, &f, &Quad::unit(), 1.0).is_empty());
}

/// Neighborhood oracle for radius-1 importance on the triangular lattice:
/// the six neighbors in cyclic order must show at least two open runs.
fn radius1_importance_oracle(g: &LatticeGraph, f: &LabelField, p: f64, v: SiteId) -> bool {
    let n = g.n() as i64;
    let (r, c) = g.coords(v);
    let (r, c) = (r as i64, c as i64);
    let ring = [(0, 1), (1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1)];
    if ring
        .iter()
        .any(|&(dr, dc)| r + dr < 0 || r + dr >= n || c + dc < 0 || c + dc >= n)
    {
        return false;
    }
    let open: Vec<bool> = ring
        .iter()
        .map(|&(dr, dc)| {
            f.open_at(g.site_at((r + dr) as u32, (c + dc) as u32).index(), p)
        })
        .collect();
    let mut runs = 0;
    for i in 0..6 {
        if open[i] && !open[(i + 5) % 6] {
            runs += 1;
        }
    }
    runs >= 2
}

#[test]
fn importance_at_one_step_matches_neighborhood_oracle() {
    let g = triangular(8);
    for seed in 0..10 {
        let f = sample_uniform(&g, seed);
        let eps = 1.0 / 7.0; // one lattice step at n=8
        let got = important_sites(&g, &f, 0.5, eps);
        let expected: Vec<usize> = (0..g.original_count())
            .filter(|&s| radius1_importance_oracle(&g, &f, 0.5, SiteId(s as u32)))
            .collect();
        assert_eq!(got, expected, "seed {seed}");
    }
}

#[test]
fn importance_nests_in_eps() {
    for g in [triangular(12), square(12)] {
        for seed in [3, 9] {
            let f = sample_uniform(&g, seed);
            let fine = important_sites(&g, &f, 0.5, 1.0 / 11.0);
            let coarse = important_sites(&g, &f, 0.5, 3.0 / 11.0);
            for c in &coarse {
                assert!(fine.contains(c), "coarse importance must imply fine");
            }
        }
    }
}

#[test]
fn importance_empty_when_box_leaves_lattice() {
    let g = triangular(8);
    let f = sample_uniform(&g, 0);
    assert!(important_sites(&g, &f, 0.5, 1.1).is_empty());
}

#[test]
fn alpha4_conventions() {
    let spec = LatticeSpec::new(LatticeKind::TriangularSite, 9).unwrap();
    let est = estimate_alpha4(spec, 2, 2, 100, 5).unwrap();
    assert_eq!(est.estimate, 1.0);
    assert!(estimate_alpha4(spec, 2, 8, 100, 5).is_err()); // annulus too big
    assert!(estimate_alpha4(spec, 0, 3, 100, 5).is_err());
}

#[test]
fn alpha4_monotone_in_outer_radius() {
    // Shared trial seeds make the per-field event inclusion exact.
    let spec = LatticeSpec::new(LatticeKind::TriangularSite, 67).unwrap();
    let near = estimate_alpha4(spec, 2, 8, 400, 11).unwrap();
    let far = estimate_alpha4(spec, 2, 32, 400, 11).unwrap();
    assert!(far.estimate <= near.estimate, "{} > {}", far.estimate, near.estimate);
}

#[test]
fn pivotal_measure_examples() {
    let g = square(6);
    let f = sample_uniform(&g, 4);
    // No pivotals: measure 0.
    let m = pivotal_measure_estimate(&g, &f, &Quad::unit(), 1.0, alpha4_asymptotic).unwrap();
    assert_eq!(m.raw_count, 0);
    assert_eq!(m.normalized, 0.0);
    // Single-path strip: path length times the rate.
    let q = Quad::new(0.0, 0.0, 1.0, 0.05).unwrap();
    let m = pivotal_measure_estimate(&g, &f, &q, 1.0, alpha4_asymptotic).unwrap();
    assert_eq!(m.raw_count, 5);
    let rate = asymptotic_rate(g.spec().mesh());
    assert!((m.normalized - 5.0 * rate).abs() < 1e-12);
}
