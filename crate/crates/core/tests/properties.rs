mod common;

use handlebody::graphgroups::to_f64;
use handlebody::lorentz::{block_rotation, embed_orthogonal};
use handlebody::schottky::{reduced_word_count, reduced_words};
use handlebody::*;
use nalgebra::DMatrix;
use num_bigint::BigUint;
use num_integer::Integer;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cfg() -> ToleranceConfig {
    ToleranceConfig::default()
}

fn isometry(seed: u64, d: usize, max_boost: f64) -> LorentzMatrix {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0))
        .qr()
        .q();
    let rot = embed_orthogonal(&q, &cfg()).unwrap();
    let t: f64 = rng.random_range(-max_boost..max_boost);
    let mut boost = DMatrix::identity(d + 1, d + 1);
    boost[(0, 0)] = t.cosh();
    boost[(d, d)] = t.cosh();
    boost[(0, d)] = t.sinh();
    boost[(d, 0)] = t.sinh();
    &rot * &LorentzMatrix::from_matrix(boost).unwrap()
}

fn cap(seed: u64, d: usize) -> CapNormal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    common::random_cap(&mut rng, d, 0.1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn products_and_inverses_stay_lorentz(a in any::<u64>(), b in any::<u64>(), d in 2usize..7) {
        let (m, n) = (isometry(a, d, 2.0), isometry(b, d, 2.0));
        let p = &m * &n;
        prop_assert!(verify_lorentz(&p, &cfg()).pass);
        prop_assert!((&p * &p.inverse()).distance_from_identity() < 1e-9);
        prop_assert_eq!(p.orientation(), m.orientation() * n.orientation());
    }

    #[test]
    fn reflections_are_involutions(s in any::<u64>(), d in 2usize..7) {
        let r = cap(s, d).reflection();
        prop_assert_eq!(r.orientation(), -1);
        prop_assert!(verify_lorentz(&r, &cfg()).pass);
        prop_assert!((&r * &r).distance_from_identity() < 1e-9);
        prop_assert_eq!(classify_isometry(&r, &cfg()).unwrap(), IsometryClass::Elliptic);
    }

    #[test]
    fn cap_relation_is_mirrored_by_swapping(a in any::<u64>(), b in any::<u64>(), d in 2usize..6) {
        let (v, w) = (cap(a, d), cap(b, d));
        prop_assert_eq!(cap_relation(&v, &w, &cfg()).unwrap().mirror(), cap_relation(&w, &v, &cfg()).unwrap());
    }

    #[test]
    fn cap_relation_is_isometry_invariant(a in any::<u64>(), b in any::<u64>(), m in any::<u64>(), d in 2usize..6) {
        let (v, w) = (cap(a, d), cap(b, d));
        prop_assume!(!common::near_tangent(&v, &w, 1e-4));
        let f = isometry(m, d, 1.5);
        prop_assert_eq!(
            cap_relation(&v, &w, &cfg()).unwrap(),
            cap_relation(&v.transformed(&f), &w.transformed(&f), &cfg()).unwrap()
        );
    }

    #[test]
    fn complement_reverses_containment(a in any::<u64>(), d in 2usize..6) {
        let v = cap(a, d);
        prop_assert_eq!(cap_relation(&v, &v.complement(), &cfg()).unwrap(), CapRelation::Complementary);
        let r = v.angular_radius() + v.complement().angular_radius();
        prop_assert!((r - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn pairing_maps_complement_onto_target(
        center in prop::collection::vec(-1.0f64..1.0, 3),
        radius in 0.05f64..0.5,
        d_angle in 0.0f64..1.0,
    ) {
        prop_assume!(center.iter().map(|x| x * x).sum::<f64>() > 0.01);
        let a = CapNormal::from_ball(&center, radius).unwrap();
        let b = CapNormal::from_ball(&[-center[0], -center[1], -center[2]], radius + 0.3 * d_angle).unwrap();
        prop_assume!(cap_relation(&a, &b, &cfg()).unwrap() == CapRelation::Separated);
        let f = handlebody::pair_caps(&a, &b, &cfg()).unwrap();
        prop_assert_eq!(classify_isometry(&f, &cfg()).unwrap(), IsometryClass::Loxodromic);
        prop_assert_eq!(cap_relation(&a.transformed(&f).complement(), &b, &cfg()).unwrap(), CapRelation::Equal);
    }

    #[test]
    fn finite_order_rotations_are_elliptic(q in 2u64..12, d in 2usize..4) {
        let angle = std::f64::consts::TAU / q as f64;
        let mut angles = vec![0.0; d];
        angles[0] = angle;
        let m = embed_orthogonal(&block_rotation(&angles), &cfg()).unwrap();
        prop_assert_eq!(classify_isometry(&m, &cfg()).unwrap(), IsometryClass::Elliptic);
        prop_assert!(m.pow(q).distance_from_identity() < 1e-9);
        prop_assert_eq!(common_fixed_subspace(&[m], &cfg()).unwrap().sphere_dim, 2 * d as i32 - 3);
    }

    #[test]
    fn random_graphs_collapse_and_count(seed in any::<u64>(), vmax in 1usize..7, omax in 2u64..30) {
        let (g, n) = random_gog(seed, vmax, omax).unwrap();
        prop_assert!(g.is_normal_form());
        prop_assert_eq!(collapse_trivial_edges(&g), g.clone());
        let genus = genus_of_kernel(&g, &n).unwrap();
        prop_assert!(genus >= BigUint::from(2u8));
        // g - 1 = -chi n through floating point as a sanity check
        let chi = euler_characteristic(&g);
        let approx = -to_f64(&chi.numer().magnitude().clone()) / to_f64(chi.denom().magnitude()) * to_f64(&n);
        let approx = if chi.numer() < &num_bigint::BigInt::from(0) { -approx } else { approx };
        prop_assert!((approx.abs() - (to_f64(&genus) - 1.0)).abs() < 1e-6 * to_f64(&genus));
        for e in g.edges() {
            prop_assert!(lemma3_check(&g, e.id, &n).unwrap().pass_global);
        }
    }

    #[test]
    fn collapsing_preserves_chi(orders in prop::collection::vec(1u64..5, 2..6)) {
        // a path whose vertex orders are nested multiples, so many edges are trivial
        let mut order = 1u64;
        let mut vertices = Vec::new();
        let mut edges = Vec::new();
        for (i, o) in orders.iter().enumerate() {
            let prev = order;
            order *= o;
            vertices.push(Vertex { id: i as u64, order: BigUint::from(order) });
            if i > 0 {
                edges.push(Edge { id: i as u64, v1: i as u64 - 1, v2: Some(i as u64), order: BigUint::from(prev) });
            }
        }
        let g = GraphOfGroups::new(vertices, edges).unwrap();
        let c = collapse_trivial_edges(&g);
        prop_assert!(c.is_normal_form());
        prop_assert_eq!(euler_characteristic(&c), euler_characteristic(&g));
    }

    #[test]
    fn refined_never_exceeds_crude(g in 2u64..10_000, d in 3u32..16, c in 1u64..100) {
        let b = refined_bound(&BigUint::from(g), d, &BigUint::from(c)).unwrap();
        prop_assert!(b.refined_le_crude);
        prop_assert!(b.refined <= crude_bound(&BigUint::from(g), d, &BigUint::from(c)).unwrap());
        prop_assert_eq!(b.degree, d.div_ceil(2));
    }

    #[test]
    fn abelian_identity(k in 2u32..6, m in 2u64..12) {
        let f = abelian_star(k, m).unwrap();
        let kk = BigUint::from(k);
        prop_assert_eq!(f.n() * kk.pow(k), (f.g() + k).pow(k));
        prop_assert_eq!(genus_of_kernel(f.graph(), f.n()).unwrap(), f.g().clone());
        prop_assert!(handlebody::effectiveness_check(&f).pass);
    }

    #[test]
    fn cyclic_orders_coprime(k in 2u32..5, p in 3u64..60) {
        prop_assume!(handlebody::families::is_prime(p) && p > k as u64);
        let f = cyclic_star(k, p).unwrap();
        let q = f.factor_orders();
        for i in 0..q.len() {
            for j in i + 1..q.len() {
                prop_assert_eq!(q[i].gcd(&q[j]), 1);
            }
        }
        prop_assert!(f.n() >= &BigUint::from(p).pow(k));
    }
}

#[test]
fn word_enumeration_counts() {
    for g in 1..=3usize {
        for maxlen in 0..=5usize {
            let words: Vec<_> = reduced_words(g, maxlen).collect();
            let expected: u64 = (0..=maxlen as u32)
                .map(|l| reduced_word_count(g as u64, l))
                .sum();
            assert_eq!(words.len() as u64, expected);
            assert!(words.iter().all(|w| w.is_reduced()));
            let mut seen = std::collections::HashSet::new();
            assert!(words.iter().all(|w| seen.insert(w.to_string())));
        }
    }
}

#[test]
fn realization_offsets_are_deterministic_for_all_small_families() {
    for f in [abelian_star(2, 4).unwrap(), cyclic_star(2, 5).unwrap()] {
        for parity in [Parity::Even, Parity::Odd] {
            let a = realize(&f, parity, &cfg(), 3).unwrap();
            let b = realize(&f, parity, &cfg(), 3).unwrap();
            assert!(a.is_verified());
            assert_eq!(
                serde_json::to_string(&a).unwrap(),
                serde_json::to_string(&b).unwrap()
            );
        }
    }
}
