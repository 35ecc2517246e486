//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use handlebody::{CapNormal, CapRelation};
use rand::Rng;
use rand_distr::StandardNormal;

/// Roughly uniform points on `S^{d-1}` for `d = 2` or `d = 3`.
pub fn sphere_points(d: usize, count: usize) -> Vec<Vec<f64>> {
    match d {
        2 => (0..count)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        3 => {
            // Fibonacci lattice
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * i as f64;
                    vec![r * phi.cos(), r * phi.sin(), z]
                })
                .collect()
        }
        _ => panic!("sphere_points supports d = 2, 3"),
    }
}

pub fn random_unit<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

pub fn random_cap<R: Rng>(rng: &mut R, d: usize, min_radius: f64) -> CapNormal {
    let center = random_unit(rng, d);
    let radius = rng.random_range(min_radius..std::f64::consts::PI - min_radius);
    CapNormal::from_ball(&center, radius).unwrap()
}

/// Relation of two open caps read off from which sample points they contain.
pub fn sampled_relation(a: &CapNormal, b: &CapNormal, points: &[Vec<f64>]) -> CapRelation {
    let (mut both, mut only_a, mut only_b, mut neither) = (0, 0, 0, 0);
    for p in points {
        match (a.boundary_value(p) > 0.0, b.boundary_value(p) > 0.0) {
            (true, true) => both += 1,
            (true, false) => only_a += 1,
            (false, true) => only_b += 1,
            (false, false) => neither += 1,
        }
    }
    match (both, only_a, only_b, neither) {
        (0, _, _, _) => CapRelation::Separated,
        (_, _, _, 0) => CapRelation::Covering,
        (_, 0, _, _) => CapRelation::FirstInsideSecond,
        (_, _, 0, _) => CapRelation::SecondInsideFirst,
        _ => CapRelation::Intersecting,
    }
}

/// Relation from spherical trigonometry on centers and angular radii.
pub fn spherical_relation(a: &CapNormal, b: &CapNormal) -> CapRelation {
    let center = |c: &CapNormal| {
        let s = c.vector().spatial();
        let n = s.iter().map(|x| x * x).sum::<f64>().sqrt();
        s.iter().map(|x| x / n).collect::<Vec<_>>()
    };
    let (ca, cb) = (center(a), center(b));
    let cos: f64 = ca.iter().zip(&cb).map(|(x, y)| x * y).sum();
    let alpha = cos.clamp(-1.0, 1.0).acos();
    let (ra, rb) = (a.angular_radius(), b.angular_radius());
    let pi = std::f64::consts::PI;
    if alpha >= ra + rb {
        CapRelation::Separated
    } else if alpha + ra <= rb {
        CapRelation::FirstInsideSecond
    } else if alpha + rb <= ra {
        CapRelation::SecondInsideFirst
    } else if alpha >= 2.0 * pi - ra - rb {
        CapRelation::Covering
    } else {
        CapRelation::Intersecting
    }
}

/// `|⟨v, w⟩|` is within `band` of 1: too close to tangency for an oracle.
pub fn near_tangent(a: &CapNormal, b: &CapNormal, band: f64) -> bool {
    let t = handlebody::minkowski_product(a.vector(), b.vector()).unwrap();
    (t.abs() - 1.0).abs() < band
}
