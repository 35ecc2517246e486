//! Star-shaped families of finite abelian extensions of free groups and their
//! realization as groups of hyperbolic isometries.
//!
//! The central vertex group `G = Z_{q_1} × … × Z_{q_k}` acts on `R^{2k}` with
//! factor `i` rotating the plane `P_i = span(e_{2i}, e_{2i+1})`. Edge `i`
//! carries the coordinate subgroup omitting factor `i`; it fixes `P_i`, so a
//! hyperplane orthogonal to a ray in `P_i` gives a reflection `τ_i` commuting
//! with the edge group. The leaf vertex groups are the conjugates `τ_i G τ_i`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::DVector;
use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphgroups::{
    euler_characteristic, genus_of_kernel, AbelianStructure, Edge, GraphOfGroups, Vertex,
};
use crate::lorentz::{
    block_rotation, cap_relation, classify_isometry, common_fixed_subspace, embed_orthogonal,
    pad_orthogonal, spectral_radius, verify_lorentz, CapNormal, CapRelation, IsometryClass,
    LorentzMatrix, ToleranceConfig,
};
use crate::schottky::SCHEMA_VERSION;

/// Added to the certified minimal offsets to keep the certificate away from
/// the tangency threshold.
pub const OFFSET_MARGIN: f64 = 0.25;
/// Largest hyperbolic offset the separation search will try.
pub const OFFSET_CAP: f64 = 60.0;
/// Largest group order [`realize`] enumerates.
pub const MAX_REALIZED_ORDER: u64 = 20_000;

const BISECTION_STEPS: usize = 40;
const FALLBACK_ATTEMPTS: usize = 8;
/// Stored conjugates must agree with `τ r τ` recomputed on load.
const CONJUGATE_LOAD_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Abelian,
    Cyclic,
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FamilyKind::Abelian => "abelian",
            FamilyKind::Cyclic => "cyclic",
        })
    }
}

/// A star graph of groups with `k` edges: `m` for the abelian family, `p` for
/// the cyclic one is `parameter`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "FamilyJson", into = "FamilyJson")]
pub struct StarFamily {
    kind: FamilyKind,
    k: u32,
    parameter: u64,
    factor_orders: Vec<u64>,
    graph: GraphOfGroups,
    n: BigUint,
    g: BigUint,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilyJson {
    kind: FamilyKind,
    k: u32,
    parameter: u64,
    factor_orders: Vec<u64>,
    #[serde(with = "crate::bigint_serde")]
    n: BigUint,
    #[serde(with = "crate::bigint_serde")]
    g: BigUint,
    chi: String,
    d_even: u32,
    d_odd: u32,
    graph: GraphOfGroups,
}

impl TryFrom<FamilyJson> for StarFamily {
    type Error = Error;

    fn try_from(json: FamilyJson) -> Result<Self> {
        let family = match json.kind {
            FamilyKind::Abelian => abelian_star(json.k, json.parameter)?,
            FamilyKind::Cyclic => cyclic_star(json.k, json.parameter)?,
        };
        let stored = StarFamily {
            kind: json.kind,
            k: json.k,
            parameter: json.parameter,
            factor_orders: json.factor_orders,
            graph: json.graph,
            n: json.n,
            g: json.g,
        };
        if stored != family
            || json.chi != family.chi().to_string()
            || json.d_even != family.d_even()
            || json.d_odd != family.d_odd()
        {
            return Err(Error::InvalidParameter(format!(
                "stored data disagrees with {} family (k={}, parameter={})",
                json.kind, json.k, json.parameter
            )));
        }
        Ok(family)
    }
}

impl From<StarFamily> for FamilyJson {
    fn from(f: StarFamily) -> Self {
        FamilyJson {
            chi: f.chi().to_string(),
            d_even: f.d_even(),
            d_odd: f.d_odd(),
            kind: f.kind,
            k: f.k,
            parameter: f.parameter,
            factor_orders: f.factor_orders,
            n: f.n,
            g: f.g,
            graph: f.graph,
        }
    }
}

impl StarFamily {
    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn parameter(&self) -> u64 {
        self.parameter
    }

    pub fn factor_orders(&self) -> &[u64] {
        &self.factor_orders
    }

    pub fn graph(&self) -> &GraphOfGroups {
        &self.graph
    }

    /// Order of the finite group.
    pub fn n(&self) -> &BigUint {
        &self.n
    }

    /// Rank of the free kernel.
    pub fn g(&self) -> &BigUint {
        &self.g
    }

    pub fn chi(&self) -> num_rational::BigRational {
        euler_characteristic(&self.graph)
    }

    pub fn d_even(&self) -> u32 {
        2 * self.k
    }

    pub fn d_odd(&self) -> u32 {
        2 * self.k + 1
    }

    fn edge_factors(&self) -> Vec<BTreeSet<usize>> {
        let structure = self
            .graph
            .abelian()
            .expect("families carry abelian structure");
        (0..self.k as u64)
            .map(|e| structure.edge_factors[&e].clone())
            .collect()
    }
}

fn check_k(k: u32) -> Result<()> {
    if !(2..=20).contains(&k) {
        return Err(Error::InvalidParameter(format!("k = {k} outside [2, 20]")));
    }
    Ok(())
}

/// Star with `k + 1` vertices of group `Π Z_{q_i}`; edge `i` omits factor `i`.
fn star_graph(q: &[u64]) -> Result<GraphOfGroups> {
    let n: BigUint = q.iter().map(|&x| BigUint::from(x)).product();
    let k = q.len() as u64;
    let vertices = (0..=k)
        .map(|id| Vertex {
            id,
            order: n.clone(),
        })
        .collect();
    let mut edges = Vec::new();
    let mut edge_factors = BTreeMap::new();
    for i in 0..k {
        edges.push(Edge {
            id: i,
            v1: 0,
            v2: Some(i + 1),
            order: &n / q[i as usize],
        });
        edge_factors.insert(i, (0..q.len()).filter(|&j| j as u64 != i).collect());
    }
    GraphOfGroups::new(vertices, edges)?.with_abelian(AbelianStructure {
        factor_orders: q.to_vec(),
        edge_factors,
    })
}

/// `G = (Z_m)^k` on a star with `k` edges: `n = m^k`, `g = mk − k`.
pub fn abelian_star(k: u32, m: u64) -> Result<StarFamily> {
    check_k(k)?;
    if m < 2 {
        return Err(Error::InvalidParameter(format!(
            "m = {m} must be at least 2"
        )));
    }
    let q = vec![m; k as usize];
    let graph = star_graph(&q)?;
    let n = BigUint::from(m).pow(k);
    let g = genus_of_kernel(&graph, &n)?;
    let closed = BigUint::from(m) * k - k;
    let kk = BigUint::from(k);
    if g != closed || &n * kk.pow(k) != (&g + k).pow(k) {
        return Err(Error::Arithmetic(format!(
            "abelian star (k={k}, m={m}): genus {g} disagrees with the closed form {closed}"
        )));
    }
    Ok(StarFamily {
        kind: FamilyKind::Abelian,
        k,
        parameter: m,
        factor_orders: q,
        graph,
        n,
        g,
    })
}

pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u64;
    while d.saturating_mul(d) <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Cyclic group `Z_{q_1} × … × Z_{q_k}` with `q_i = p + i·k!`.
pub fn cyclic_star(k: u32, p: u64) -> Result<StarFamily> {
    check_k(k)?;
    if p <= k as u64 {
        return Err(Error::InvalidParameter(format!(
            "p = {p} must exceed k = {k}"
        )));
    }
    if !is_prime(p) {
        return Err(Error::InvalidParameter(format!("p = {p} is not prime")));
    }
    let overflow = || Error::Arithmetic(format!("q_i overflows for k={k}, p={p}"));
    let fact = (1..=k as u64)
        .try_fold(1u64, |a, b| a.checked_mul(b))
        .ok_or_else(overflow)?;
    let q = (1..=k as u64)
        .map(|i| i.checked_mul(fact).and_then(|x| x.checked_add(p)))
        .collect::<Option<Vec<u64>>>()
        .ok_or_else(overflow)?;
    for (i, &a) in q.iter().enumerate() {
        for &b in &q[i + 1..] {
            if a.gcd(&b) != 1 {
                return Err(Error::Arithmetic(format!(
                    "q values {a} and {b} are not coprime"
                )));
            }
        }
    }
    let graph = star_graph(&q)?;
    let n: BigUint = q.iter().map(|&x| BigUint::from(x)).product();
    let g = genus_of_kernel(&graph, &n)?;
    let kb = BigUint::from(k);
    let closed = &kb * p + &kb * (k + 1) / 2u32 * fact - &kb;
    if g != closed {
        return Err(Error::Arithmetic(format!(
            "cyclic star (k={k}, p={p}): genus {g} disagrees with the closed form {closed}"
        )));
    }
    Ok(StarFamily {
        kind: FamilyKind::Cyclic,
        k,
        parameter: p,
        factor_orders: q,
        graph,
        n,
        g,
    })
}

/// `(ln n₂ − ln n₁) / (ln g₂ − ln g₁)` between two members of the abelian family.
pub fn degree_slope(k: u32, m1: u64, m2: u64) -> Result<f64> {
    let (a, b) = (abelian_star(k, m1)?, abelian_star(k, m2)?);
    let ln = |x: &BigUint| x.to_f64().map(f64::ln).unwrap_or(f64::INFINITY);
    Ok((ln(b.n()) - ln(a.n())) / (ln(b.g()) - ln(a.g())))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffectivenessReport {
    pub pass: bool,
    /// Factors common to every edge group.
    pub intersection: Vec<usize>,
    #[serde(with = "crate::bigint_serde")]
    pub intersection_order: BigUint,
}

/// Trivial intersection of all edge groups, read off the coordinate structure.
pub fn effectiveness_check_graph(graph: &GraphOfGroups) -> Result<EffectivenessReport> {
    let structure = graph
        .abelian()
        .ok_or_else(|| Error::InvalidGraph("no abelian structure attached".into()))?;
    let mut common: BTreeSet<usize> = (0..structure.factor_orders.len()).collect();
    for factors in structure.edge_factors.values() {
        common = common.intersection(factors).copied().collect();
    }
    let intersection_order: BigUint = common
        .iter()
        .map(|&i| BigUint::from(structure.factor_orders[i]))
        .product();
    Ok(EffectivenessReport {
        pass: intersection_order.is_one(),
        intersection: common.into_iter().collect(),
        intersection_order,
    })
}

pub fn effectiveness_check(family: &StarFamily) -> EffectivenessReport {
    effectiveness_check_graph(&family.graph).expect("families carry abelian structure")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn dim(self, k: u32) -> usize {
        match self {
            Parity::Even => 2 * k as usize,
            Parity::Odd => 2 * k as usize + 1,
        }
    }
}

/// One line of a verification report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub pass: bool,
    pub self_separation_checks: usize,
    pub cross_separation_checks: usize,
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// A star family acting on `H^d` through explicit Lorentz matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RealizationJson", into = "RealizationJson")]
pub struct RealizedExtension {
    family: StarFamily,
    parity: Parity,
    dim: usize,
    seed: u64,
    margin: f64,
    directions: Vec<Vec<f64>>,
    min_offsets: Vec<f64>,
    offsets: Vec<f64>,
    hyperplanes: Vec<CapNormal>,
    rotations: Vec<LorentzMatrix>,
    reflections: Vec<LorentzMatrix>,
    conjugates: Vec<Vec<LorentzMatrix>>,
    verification: Option<VerificationReport>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RealizationJson {
    schema_version: u32,
    family: StarFamily,
    parity: Parity,
    dim: usize,
    seed: u64,
    margin: f64,
    directions: Vec<Vec<f64>>,
    min_offsets: Vec<f64>,
    offsets: Vec<f64>,
    hyperplanes: Vec<CapNormal>,
    rotations: Vec<LorentzMatrix>,
    reflections: Vec<LorentzMatrix>,
    conjugates: Vec<Vec<LorentzMatrix>>,
    #[serde(default)]
    verification: Option<VerificationReport>,
}

impl TryFrom<RealizationJson> for RealizedExtension {
    type Error = Error;

    fn try_from(j: RealizationJson) -> Result<Self> {
        if j.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidParameter(format!(
                "unsupported schema version {}",
                j.schema_version
            )));
        }
        let k = j.family.k as usize;
        if j.dim != j.parity.dim(j.family.k) {
            return Err(Error::DimensionMismatch {
                expected: j.parity.dim(j.family.k),
                found: j.dim,
            });
        }
        let lengths = [
            j.directions.len(),
            j.min_offsets.len(),
            j.offsets.len(),
            j.hyperplanes.len(),
            j.rotations.len(),
            j.reflections.len(),
            j.conjugates.len(),
        ];
        if lengths.iter().any(|&l| l != k) || j.conjugates.iter().any(|row| row.len() != k) {
            return Err(Error::InvalidParameter(format!(
                "realization needs {k} entries per edge"
            )));
        }
        let mats = j
            .rotations
            .iter()
            .chain(&j.reflections)
            .chain(j.conjugates.iter().flatten());
        for m in mats {
            if m.dim() != j.dim {
                return Err(Error::DimensionMismatch {
                    expected: j.dim,
                    found: m.dim(),
                });
            }
        }
        if let Some(bad) = j.hyperplanes.iter().find(|h| h.dim() != j.dim) {
            return Err(Error::DimensionMismatch {
                expected: j.dim,
                found: bad.dim(),
            });
        }
        for (i, ((u, &t), h)) in j
            .directions
            .iter()
            .zip(&j.offsets)
            .zip(&j.hyperplanes)
            .enumerate()
        {
            let expected = CapNormal::at_offset(u, t)?;
            let gap = expected
                .vector()
                .coords()
                .iter()
                .zip(h.vector().coords())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if gap > CONJUGATE_LOAD_TOL * t.abs().max(1.0) {
                return Err(Error::InvalidParameter(format!(
                    "hyperplane {} does not match its direction and offset",
                    i + 1
                )));
            }
        }
        let recomputed = conjugates(&j.reflections, &j.rotations);
        for (i, row) in recomputed.iter().enumerate() {
            for (jj, m) in row.iter().enumerate() {
                if relative_gap(m, &j.conjugates[i][jj]) > CONJUGATE_LOAD_TOL {
                    return Err(Error::InvalidParameter(format!(
                        "conjugate tau{} r{} does not match its factors",
                        i + 1,
                        jj + 1
                    )));
                }
            }
        }
        Ok(Self {
            family: j.family,
            parity: j.parity,
            dim: j.dim,
            seed: j.seed,
            margin: j.margin,
            directions: j.directions,
            min_offsets: j.min_offsets,
            offsets: j.offsets,
            hyperplanes: j.hyperplanes,
            rotations: j.rotations,
            reflections: j.reflections,
            conjugates: j.conjugates,
            verification: j.verification,
        })
    }
}

impl From<RealizedExtension> for RealizationJson {
    fn from(r: RealizedExtension) -> Self {
        RealizationJson {
            schema_version: SCHEMA_VERSION,
            family: r.family,
            parity: r.parity,
            dim: r.dim,
            seed: r.seed,
            margin: r.margin,
            directions: r.directions,
            min_offsets: r.min_offsets,
            offsets: r.offsets,
            hyperplanes: r.hyperplanes,
            rotations: r.rotations,
            reflections: r.reflections,
            conjugates: r.conjugates,
            verification: r.verification,
        }
    }
}

impl RealizedExtension {
    pub fn family(&self) -> &StarFamily {
        &self.family
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Unit directions of the rays `L_i` in `R^d`.
    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    /// Smallest offsets the search certified, before the margin.
    pub fn min_offsets(&self) -> &[f64] {
        &self.min_offsets
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn hyperplanes(&self) -> &[CapNormal] {
        &self.hyperplanes
    }

    /// `r_i`, generating factor `i` of the central group.
    pub fn rotations(&self) -> &[LorentzMatrix] {
        &self.rotations
    }

    pub fn reflections(&self) -> &[LorentzMatrix] {
        &self.reflections
    }

    /// `conjugates()[i][j] = τ_i r_j τ_i`.
    pub fn conjugates(&self) -> &[Vec<LorentzMatrix>] {
        &self.conjugates
    }

    pub fn verification(&self) -> Option<&VerificationReport> {
        self.verification.as_ref()
    }

    pub fn is_verified(&self) -> bool {
        self.verification.as_ref().is_some_and(|r| r.pass)
    }

    /// Recomputes and stores the verification report.
    pub fn reverify(&mut self, cfg: &ToleranceConfig) -> &VerificationReport {
        self.verification = Some(verify_realization(self, cfg));
        self.verification.as_ref().unwrap()
    }

    /// Moves the hyperplanes to new offsets along the same rays. The result is
    /// unverified.
    pub fn with_offsets(&self, offsets: &[f64]) -> Result<Self> {
        if offsets.len() != self.offsets.len() {
            return Err(Error::DimensionMismatch {
                expected: self.offsets.len(),
                found: offsets.len(),
            });
        }
        let hyperplanes = self
            .directions
            .iter()
            .zip(offsets)
            .map(|(u, &t)| CapNormal::at_offset(u, t))
            .collect::<Result<Vec<_>>>()?;
        let reflections: Vec<_> = hyperplanes.iter().map(CapNormal::reflection).collect();
        Ok(Self {
            conjugates: conjugates(&reflections, &self.rotations),
            offsets: offsets.to_vec(),
            hyperplanes,
            reflections,
            verification: None,
            ..self.clone()
        })
    }

    /// Replaces `τ_i`, keeping everything else. The result is unverified.
    pub fn with_reflection(&self, i: usize, tau: LorentzMatrix) -> Result<Self> {
        if i >= self.reflections.len() {
            return Err(Error::EdgeNotFound(i as u64));
        }
        if tau.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: tau.dim(),
            });
        }
        let mut reflections = self.reflections.clone();
        reflections[i] = tau;
        Ok(Self {
            conjugates: conjugates(&reflections, &self.rotations),
            reflections,
            verification: None,
            ..self.clone()
        })
    }
}

fn conjugates(
    reflections: &[LorentzMatrix],
    rotations: &[LorentzMatrix],
) -> Vec<Vec<LorentzMatrix>> {
    reflections
        .iter()
        .map(|t| rotations.iter().map(|r| &(t * r) * t).collect())
        .collect()
}

/// `‖A − B‖_∞ / max(1, ‖A‖_∞ ‖B‖_∞)`.
fn relative_gap(a: &LorentzMatrix, b: &LorentzMatrix) -> f64 {
    let scale = (a.entries().amax() * b.entries().amax()).max(1.0);
    (a.entries() - b.entries()).amax() / scale
}

fn rotation_generators(
    orders: &[u64],
    dim: usize,
    cfg: &ToleranceConfig,
) -> Result<Vec<LorentzMatrix>> {
    (0..orders.len())
        .map(|i| {
            let mut angles = vec![0.0; orders.len()];
            angles[i] = std::f64::consts::TAU / orders[i] as f64;
            embed_orthogonal(&pad_orthogonal(&block_rotation(&angles), dim), cfg)
        })
        .collect()
}

/// Every element of `Π Z_{q_i}` as an exponent vector and a matrix built
/// from the given generators.
fn group_elements(rotations: &[LorentzMatrix], orders: &[u64]) -> Vec<(Vec<u64>, LorentzMatrix)> {
    let dim = rotations[0].dim();
    let powers: Vec<Vec<LorentzMatrix>> = rotations
        .iter()
        .zip(orders)
        .map(|(r, &q)| {
            let mut p = vec![LorentzMatrix::identity(dim)];
            for _ in 1..q {
                let next = p.last().unwrap() * r;
                p.push(next);
            }
            p
        })
        .collect();
    let mut out = vec![(Vec::new(), LorentzMatrix::identity(dim))];
    for (j, &q) in orders.iter().enumerate() {
        out = out
            .into_iter()
            .flat_map(|(e, m)| {
                let powers = &powers[j];
                (0..q).map(move |a| {
                    let mut e = e.clone();
                    e.push(a);
                    (e, &m * &powers[a as usize])
                })
            })
            .collect();
    }
    out
}

fn in_subgroup(element: &[u64], factors: &BTreeSet<usize>) -> bool {
    element
        .iter()
        .enumerate()
        .all(|(j, &a)| a == 0 || factors.contains(&j))
}

fn edge_generators(rotations: &[LorentzMatrix], factors: &BTreeSet<usize>) -> Vec<LorentzMatrix> {
    let gens: Vec<_> = factors.iter().map(|&j| rotations[j].clone()).collect();
    if gens.is_empty() {
        vec![LorentzMatrix::identity(rotations[0].dim())]
    } else {
        gens
    }
}

/// Boundary direction of the ray `L_i` inside the fixed subspace of edge `i`:
/// the first standard axis with a substantial projection, or a random
/// direction in the subspace when `rng` is given.
fn edge_direction(
    rotations: &[LorentzMatrix],
    factors: &BTreeSet<usize>,
    edge: usize,
    rng: Option<&mut ChaCha8Rng>,
    cfg: &ToleranceConfig,
) -> Result<Vec<f64>> {
    let fixed = common_fixed_subspace(&edge_generators(rotations, factors), cfg)?;
    let dim = fixed.ambient_dim() - 1;
    let spatial_unit = |x: &DVector<f64>| -> Option<Vec<f64>> {
        let p = fixed.project(x);
        let norm = p.rows(0, dim).norm();
        if norm < 0.5 {
            return None;
        }
        let u: Vec<f64> = p.rows(0, dim).iter().map(|c| c / norm).collect();
        let mut probe = DVector::zeros(dim + 1);
        probe.rows_mut(0, dim).copy_from_slice(&u);
        (fixed.distance_to(&probe) <= cfg.tol_classify).then_some(u)
    };
    let found = match rng {
        None => (0..dim).find_map(|j| {
            spatial_unit(&DVector::from_fn(dim + 1, |r, _| {
                f64::from(u8::from(r == j))
            }))
        }),
        Some(rng) => (0..16).find_map(|_| {
            let mut z = DVector::from_fn(dim + 1, |_, _| rng.sample::<f64, _>(StandardNormal));
            z[dim] = 0.0;
            let scale = z.norm();
            spatial_unit(&(z * (2.0 / scale)))
        }),
    };
    found.ok_or(Error::DegenerateRay(edge))
}

fn element_label(e: &[u64]) -> String {
    let parts: Vec<String> = e.iter().map(u64::to_string).collect();
    format!("({})", parts.join(","))
}

fn first_self_failure(
    direction: &[f64],
    t: f64,
    factors: &BTreeSet<usize>,
    elements: &[(Vec<u64>, LorentzMatrix)],
    cfg: &ToleranceConfig,
) -> Option<String> {
    let v = match CapNormal::at_offset(direction, t) {
        Ok(v) => v,
        Err(e) => return Some(e.to_string()),
    };
    elements
        .iter()
        .filter(|(e, _)| !in_subgroup(e, factors))
        .find_map(|(e, m)| match cap_relation(&v.transformed(m), &v, cfg) {
            Ok(CapRelation::Separated) => None,
            Ok(rel) => Some(format!("element {} gives {rel}", element_label(e))),
            Err(err) => Some(err.to_string()),
        })
}

fn first_cross_failure(
    caps: &[CapNormal],
    elements: &[(Vec<u64>, LorentzMatrix)],
    cfg: &ToleranceConfig,
) -> Option<String> {
    for i in 0..caps.len() {
        for j in i + 1..caps.len() {
            for (e, m) in elements {
                match cap_relation(&caps[i].transformed(m), &caps[j], cfg) {
                    Ok(CapRelation::Separated) => {}
                    Ok(rel) => {
                        return Some(format!(
                            "edges {}/{} element {} gives {rel}",
                            i + 1,
                            j + 1,
                            element_label(e)
                        ))
                    }
                    Err(err) => return Some(err.to_string()),
                }
            }
        }
    }
    None
}

/// Smallest `t ∈ (0, OFFSET_CAP]` for which `fails(t)` is `None`, assuming
/// monotonicity: doubling from 1, then bisection. Returns the failure detail
/// at the cap otherwise.
fn minimal_offset(
    mut fails: impl FnMut(f64) -> Option<String>,
) -> std::result::Result<f64, String> {
    let (mut lo, mut hi) = (0.0, 1.0);
    while let Some(detail) = fails(hi) {
        if hi >= OFFSET_CAP {
            return Err(detail);
        }
        lo = hi;
        hi = (2.0 * hi).min(OFFSET_CAP);
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if fails(mid).is_some() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

fn search_offsets(
    directions: &[Vec<f64>],
    edge_factors: &[BTreeSet<usize>],
    elements: &[(Vec<u64>, LorentzMatrix)],
    cfg: &ToleranceConfig,
) -> Result<Vec<f64>> {
    let mut self_min = Vec::with_capacity(directions.len());
    for (i, u) in directions.iter().enumerate() {
        let t = minimal_offset(|t| first_self_failure(u, t, &edge_factors[i], elements, cfg))
            .map_err(|detail| Error::SeparationSearch {
                edge: i + 1,
                detail,
            })?;
        self_min.push(t);
    }
    let caps_at = |s: f64| -> Result<Vec<CapNormal>> {
        directions
            .iter()
            .zip(&self_min)
            .map(|(u, &t)| CapNormal::at_offset(u, t.max(s)))
            .collect()
    };
    let s = minimal_offset(|s| match caps_at(s) {
        Ok(caps) => first_cross_failure(&caps, elements, cfg),
        Err(e) => Some(e.to_string()),
    })
    .map_err(|detail| Error::SeparationSearch { edge: 0, detail })?;
    Ok(self_min.iter().map(|t| t.max(s)).collect())
}

/// Realizes the amalgam of `G` with the conjugates `τ_i G τ_i` over the edge
/// groups in dimension `2k` (even) or `2k + 1` (odd), then verifies it.
pub fn realize(
    family: &StarFamily,
    parity: Parity,
    cfg: &ToleranceConfig,
    seed: u64,
) -> Result<RealizedExtension> {
    cfg.validate()?;
    if family.n.to_u64().is_none_or(|n| n > MAX_REALIZED_ORDER) {
        return Err(Error::InvalidParameter(format!(
            "group order {} exceeds the realization limit {MAX_REALIZED_ORDER}",
            family.n
        )));
    }
    let dim = parity.dim(family.k);
    let rotations = rotation_generators(&family.factor_orders, dim, cfg)?;
    let edge_factors = family.edge_factors();
    let elements = group_elements(&rotations, &family.factor_orders);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last = None;
    for attempt in 0..=FALLBACK_ATTEMPTS {
        let mut directions = Vec::with_capacity(edge_factors.len());
        for (i, factors) in edge_factors.iter().enumerate() {
            let rng = (attempt > 0).then_some(&mut rng);
            directions.push(edge_direction(&rotations, factors, i, rng, cfg)?);
        }
        let min_offsets = match search_offsets(&directions, &edge_factors, &elements, cfg) {
            Ok(t) => t,
            Err(e @ Error::SeparationSearch { .. }) => {
                last = Some(e);
                continue;
            }
            Err(e) => return Err(e),
        };
        let offsets: Vec<f64> = min_offsets.iter().map(|t| t + OFFSET_MARGIN).collect();
        let hyperplanes = directions
            .iter()
            .zip(&offsets)
            .map(|(u, &t)| CapNormal::at_offset(u, t))
            .collect::<Result<Vec<_>>>()?;
        let reflections: Vec<_> = hyperplanes.iter().map(CapNormal::reflection).collect();
        let mut r = RealizedExtension {
            family: family.clone(),
            parity,
            dim,
            seed,
            margin: OFFSET_MARGIN,
            directions,
            min_offsets,
            offsets,
            hyperplanes,
            conjugates: conjugates(&reflections, &rotations),
            rotations,
            reflections,
            verification: None,
        };
        r.reverify(cfg);
        return Ok(r);
    }
    Err(last.expect("at least one attempt ran"))
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            out.push(d);
            while n.is_multiple_of(d) {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Checks that `m` is elliptic of exact order `q`.
fn order_checks(
    name: &str,
    m: &LorentzMatrix,
    q: u64,
    cfg: &ToleranceConfig,
    out: &mut Vec<Check>,
) {
    let class = classify_isometry(m, cfg);
    out.push(Check {
        name: format!("elliptic {name}"),
        value: spectral_radius(m).map_or(0.0, |r| r - 1.0),
        tolerance: cfg.tol_classify,
        pass: matches!(class, Ok(IsometryClass::Elliptic)),
        detail: Some(match class {
            Ok(c) => c.to_string(),
            Err(e) => e.to_string(),
        }),
    });
    let scale = m.entries().amax().powi(2).max(1.0);
    let power = m.pow(q).distance_from_identity() / scale;
    out.push(Check {
        name: format!("order {name}"),
        value: power,
        tolerance: cfg.tol_orth,
        pass: power <= cfg.tol_orth,
        detail: Some(format!("power {q}")),
    });
    let proper = prime_factors(q)
        .into_iter()
        .map(|p| m.pow(q / p).distance_from_identity())
        .fold(f64::INFINITY, f64::min);
    let proper = if proper.is_finite() { proper } else { 0.0 };
    out.push(Check {
        name: format!("exact order {name}"),
        value: proper,
        tolerance: cfg.tol_classify,
        pass: q == 1 || proper > cfg.tol_classify,
        detail: None,
    });
}

/// Re-checks every stored matrix and the separation hypotheses of the
/// combination step. Failures are report entries.
pub fn verify_realization(r: &RealizedExtension, cfg: &ToleranceConfig) -> VerificationReport {
    let mut checks = Vec::new();
    let k = r.rotations.len();
    let lorentz = |name: String, m: &LorentzMatrix, checks: &mut Vec<Check>| {
        let c = verify_lorentz(m, cfg);
        checks.push(Check {
            name,
            value: c.relative_residual,
            tolerance: c.tolerance,
            pass: c.pass,
            detail: (!c.sheet_preserving).then(|| "swaps the sheets".into()),
        });
    };
    for (j, m) in r.rotations.iter().enumerate() {
        lorentz(format!("lorentz r{}", j + 1), m, &mut checks);
    }
    for (i, m) in r.reflections.iter().enumerate() {
        lorentz(format!("lorentz tau{}", i + 1), m, &mut checks);
    }
    for (i, row) in r.conjugates.iter().enumerate() {
        for (j, m) in row.iter().enumerate() {
            lorentz(
                format!("lorentz tau{} r{} tau{}", i + 1, j + 1, i + 1),
                m,
                &mut checks,
            );
        }
    }

    let residual = |name: String, a: &LorentzMatrix, b: &LorentzMatrix, checks: &mut Vec<Check>| {
        let value = relative_gap(a, b);
        checks.push(Check {
            name,
            value,
            tolerance: cfg.tol_orth,
            pass: value <= cfg.tol_orth,
            detail: None,
        });
    };
    let identity = LorentzMatrix::identity(r.dim);
    let edge_factors = r.family.edge_factors();
    for (i, tau) in r.reflections.iter().enumerate() {
        residual(
            format!("involution tau{}", i + 1),
            &(tau * tau),
            &identity,
            &mut checks,
        );
        residual(
            format!("hyperplane tau{}", i + 1),
            tau,
            &r.hyperplanes[i].reflection(),
            &mut checks,
        );
        for &j in &edge_factors[i] {
            let rj = &r.rotations[j];
            residual(
                format!("commute tau{} r{}", i + 1, j + 1),
                &(tau * rj),
                &(rj * tau),
                &mut checks,
            );
        }
    }

    let elements = group_elements(&r.rotations, &r.family.factor_orders);
    let separation = |rel: Result<CapRelation>, value: f64, name: String| {
        let (pass, detail) = match rel {
            Ok(rel) => (rel == CapRelation::Separated, rel.to_string()),
            Err(e) => (false, e.to_string()),
        };
        Check {
            name,
            value,
            tolerance: cfg.tol_geom,
            pass,
            detail: Some(detail),
        }
    };
    let inner = |a: &CapNormal, b: &CapNormal| {
        crate::lorentz::minkowski_product(a.vector(), b.vector()).unwrap_or(f64::MAX)
    };
    let mut self_count = 0;
    for (i, v) in r.hyperplanes.iter().enumerate() {
        for (e, m) in elements
            .iter()
            .filter(|(e, _)| !in_subgroup(e, &edge_factors[i]))
        {
            let fv = v.transformed(m);
            checks.push(separation(
                cap_relation(&fv, v, cfg),
                inner(&fv, v),
                format!("separation e{} f={}", i + 1, element_label(e)),
            ));
            self_count += 1;
        }
    }
    let mut cross_count = 0;
    for i in 0..k {
        for j in i + 1..k {
            for (e, m) in &elements {
                let fv = r.hyperplanes[i].transformed(m);
                let w = &r.hyperplanes[j];
                checks.push(separation(
                    cap_relation(&fv, w, cfg),
                    inner(&fv, w),
                    format!("cross e{}/e{} f={}", i + 1, j + 1, element_label(e)),
                ));
                cross_count += 1;
            }
        }
    }

    for (j, m) in r.rotations.iter().enumerate() {
        order_checks(
            &format!("r{}", j + 1),
            m,
            r.family.factor_orders[j],
            cfg,
            &mut checks,
        );
    }
    for (i, row) in r.conjugates.iter().enumerate() {
        for (j, m) in row.iter().enumerate() {
            let name = format!("tau{} r{} tau{}", i + 1, j + 1, i + 1);
            order_checks(&name, m, r.family.factor_orders[j], cfg, &mut checks);
        }
    }

    VerificationReport {
        pass: checks.iter().all(|c| c.pass),
        self_separation_checks: self_count,
        cross_separation_checks: cross_count,
        checks,
    }
}

/// Generators of the realized group: `r_j` and `c_i = τ_i r_i τ_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "index")]
pub enum KernelGen {
    Central(usize),
    Leaf(usize),
}

impl KernelGen {
    /// The factor of `G` this generator projects to.
    pub fn factor(self) -> usize {
        match self {
            KernelGen::Central(i) | KernelGen::Leaf(i) => i,
        }
    }
}

/// A power `gen^exponent`, with `0 < exponent < q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Syllable {
    pub generator: KernelGen,
    pub exponent: u64,
}

impl fmt::Display for Syllable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (c, i) = match self.generator {
            KernelGen::Central(i) => ('r', i),
            KernelGen::Leaf(i) => ('c', i),
        };
        write!(f, "{c}{}", i + 1)?;
        if self.exponent != 1 {
            write!(f, "^{}", self.exponent)?;
        }
        Ok(())
    }
}

pub fn word_string(word: &[Syllable]) -> String {
    if word.is_empty() {
        return "e".into();
    }
    word.iter()
        .map(Syllable::to_string)
        .collect::<Vec<_>>()
        .join(".")
}

/// Exact image of a word in `G`, as exponents modulo the factor orders.
pub fn projection(orders: &[u64], word: &[Syllable]) -> Vec<u64> {
    let mut e = vec![0u64; orders.len()];
    for s in word {
        let i = s.generator.factor();
        e[i] = (e[i] + s.exponent % orders[i]) % orders[i];
    }
    e
}

pub fn evaluate_word(r: &RealizedExtension, word: &[Syllable]) -> LorentzMatrix {
    word.iter().fold(LorentzMatrix::identity(r.dim), |acc, s| {
        let g = match s.generator {
            KernelGen::Central(j) => &r.rotations[j],
            KernelGen::Leaf(i) => &r.conjugates[i][i],
        };
        &acc * &g.pow(s.exponent)
    })
}

/// Appends a syllable, merging with the last one when the generators agree.
fn push_reduced(word: &mut Vec<Syllable>, s: Syllable, orders: &[u64]) {
    let q = orders[s.generator.factor()];
    let exponent = s.exponent % q;
    if exponent == 0 {
        return;
    }
    match word.last_mut() {
        Some(last) if last.generator == s.generator => {
            last.exponent = (last.exponent + exponent) % q;
            if last.exponent == 0 {
                word.pop();
            }
        }
        _ => word.push(Syllable {
            generator: s.generator,
            exponent,
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSample {
    pub word: String,
    pub syllables: Vec<Syllable>,
    pub projection: Vec<u64>,
    pub class: IsometryClass,
    pub spectral_radius: f64,
    pub distance_from_identity: f64,
}

/// Random words with trivial image in `G` and non-identity matrix, with their
/// isometry types. Every kernel element should be non-elliptic.
pub fn kernel_sampler(
    r: &RealizedExtension,
    count: usize,
    maxlen: usize,
    seed: u64,
    cfg: &ToleranceConfig,
) -> Result<Vec<KernelSample>> {
    if !r.is_verified() {
        return Err(Error::NotVerified);
    }
    if maxlen < 2 {
        return Err(Error::NoKernelWord { maxlen });
    }
    let orders = &r.family.factor_orders;
    let k = orders.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let budget = 200 * count + 1000;
    for _ in 0..budget {
        if out.len() == count {
            break;
        }
        let len = rng.random_range(1..=maxlen);
        let mut word = Vec::new();
        for _ in 0..len {
            let i = rng.random_range(0..k);
            let generator = if rng.random_bool(0.5) {
                KernelGen::Leaf(i)
            } else {
                KernelGen::Central(i)
            };
            let exponent = rng.random_range(1..orders[i]);
            push_reduced(
                &mut word,
                Syllable {
                    generator,
                    exponent,
                },
                orders,
            );
        }
        for (j, &e) in projection(orders, &word).iter().enumerate() {
            if e != 0 {
                let s = Syllable {
                    generator: KernelGen::Central(j),
                    exponent: orders[j] - e,
                };
                push_reduced(&mut word, s, orders);
            }
        }
        if word.is_empty() || word.len() > maxlen {
            continue;
        }
        let proj = projection(orders, &word);
        debug_assert!(proj.iter().all(Zero::is_zero));
        let m = evaluate_word(r, &word);
        let distance = m.distance_from_identity();
        if distance <= cfg.tol_classify {
            continue;
        }
        out.push(KernelSample {
            word: word_string(&word),
            class: classify_isometry(&m, cfg)?,
            spectral_radius: spectral_radius(&m)?,
            distance_from_identity: distance,
            projection: proj,
            syllables: word,
        });
    }
    if out.is_empty() {
        return Err(Error::NoKernelWord { maxlen });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainEntry {
    pub label: String,
    /// Factors generating the subgroup.
    pub factors: Vec<usize>,
    #[serde(with = "crate::bigint_serde")]
    pub order: BigUint,
    /// Dimension of the fixed sphere on `S^{d-1}`; `-1` for the empty set.
    pub sphere_dim: i32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainReport {
    /// All intersections of edge groups, from `G` down to the trivial group.
    pub entries: Vec<ChainEntry>,
    /// Sphere dimensions along `G ⊃ G_e1 ⊃ G_e1 ∩ G_e2 ⊃ … ⊃ 1`.
    pub principal: Vec<i32>,
    pub violations: Vec<String>,
}

impl ChainReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}

fn chain_label(missing: &[usize], k: usize) -> String {
    if missing.is_empty() {
        "G".into()
    } else if missing.len() == k {
        "1".into()
    } else {
        let parts: Vec<String> = missing.iter().map(|i| format!("G_e{}", i + 1)).collect();
        parts.join("∩")
    }
}

/// Fixed-sphere dimensions of the edge-group intersections; each drop by one
/// factor must raise the dimension by at least two.
pub fn fixed_dim_chain(r: &RealizedExtension, cfg: &ToleranceConfig) -> Result<ChainReport> {
    if !r.is_verified() {
        return Err(Error::NotVerified);
    }
    let k = r.rotations.len();
    let orders = &r.family.factor_orders;
    let mut dims: BTreeMap<u32, i32> = BTreeMap::new();
    let mut entries = Vec::new();
    let full = (1u32 << k) - 1;
    let mut masks: Vec<u32> = (0..=full).collect();
    masks.sort_by_key(|m| (std::cmp::Reverse(m.count_ones()), std::cmp::Reverse(*m)));
    for mask in masks {
        let factors: BTreeSet<usize> = (0..k).filter(|j| mask & (1 << j) != 0).collect();
        let missing: Vec<usize> = (0..k).filter(|j| mask & (1 << j) == 0).collect();
        let sub = common_fixed_subspace(&edge_generators(&r.rotations, &factors), cfg)?;
        dims.insert(mask, sub.sphere_dim);
        entries.push(ChainEntry {
            label: chain_label(&missing, k),
            order: factors.iter().map(|&j| BigUint::from(orders[j])).product(),
            factors: factors.into_iter().collect(),
            sphere_dim: sub.sphere_dim,
        });
    }
    let mut violations = Vec::new();
    for (&mask, &d) in &dims {
        for j in (0..k).filter(|j| mask & (1 << j) != 0) {
            let smaller = mask & !(1 << j);
            let ds = dims[&smaller];
            if ds < d + 2 {
                violations.push(format!(
                    "dropping factor {} from {:?} moves the fixed sphere from {d} to {ds}",
                    j + 1,
                    (0..k).filter(|i| mask & (1 << i) != 0).collect::<Vec<_>>()
                ));
            }
        }
    }
    let principal = (0..=k)
        .map(|dropped| dims[&(full & !((1u32 << dropped) - 1))])
        .collect();
    Ok(ChainReport {
        entries,
        principal,
        violations,
    })
}

/// Realizes and verifies, then checks the fixed-dimension chain and a kernel
/// sample; a convenience for callers that want every audit.
pub fn full_audit(
    family: &StarFamily,
    parity: Parity,
    samples: usize,
    maxlen: usize,
    seed: u64,
    cfg: &ToleranceConfig,
) -> Result<(RealizedExtension, ChainReport, Vec<KernelSample>)> {
    let r = realize(family, parity, cfg, seed)?;
    if !r.is_verified() {
        return Err(Error::NotVerified);
    }
    let chain = fixed_dim_chain(&r, cfg)?;
    let kernel = kernel_sampler(&r, samples, maxlen, seed, cfg)?;
    Ok((r, chain, kernel))
}
