//! Finite graphs of finite groups, represented by group orders.
//!
//! Everything here is exact: orders are arbitrary-precision integers and Euler
//! characteristics are rationals. For an effective extension `E` of a free
//! group of rank `g` by a finite group of order `n`, `g − 1 = −χ · n`.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vertex {
    pub id: u64,
    #[serde(with = "crate::bigint_serde")]
    pub order: BigUint,
}

/// An edge; `v2 == None` marks a closed edge (a loop at `v1`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub id: u64,
    pub v1: u64,
    pub v2: Option<u64>,
    #[serde(with = "crate::bigint_serde")]
    pub order: BigUint,
}

impl Edge {
    pub fn is_closed(&self) -> bool {
        self.v2.is_none()
    }

    pub fn endpoints(&self) -> impl Iterator<Item = u64> {
        std::iter::once(self.v1).chain(self.v2)
    }
}

/// Explicit structure of a graph whose vertex groups are all the same finite
/// abelian group `Z_{q_1} × … × Z_{q_k}` and whose edge groups are coordinate
/// subgroups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbelianStructure {
    pub factor_orders: Vec<u64>,
    /// For each edge id, the indices of the factors its group contains.
    pub edge_factors: BTreeMap<u64, BTreeSet<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphJson", into = "GraphJson")]
pub struct GraphOfGroups {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    abelian: Option<AbelianStructure>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphJson {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    abelian: Option<AbelianStructure>,
}

impl TryFrom<GraphJson> for GraphOfGroups {
    type Error = Error;

    fn try_from(json: GraphJson) -> Result<Self> {
        let mut g = GraphOfGroups::new(json.vertices, json.edges)?;
        if let Some(a) = json.abelian {
            g = g.with_abelian(a)?;
        }
        Ok(g)
    }
}

impl From<GraphOfGroups> for GraphJson {
    fn from(g: GraphOfGroups) -> Self {
        GraphJson {
            vertices: g.vertices,
            edges: g.edges,
            abelian: g.abelian,
        }
    }
}

impl GraphOfGroups {
    /// Validates ids, positivity, divisibility of vertex orders by adjacent edge
    /// orders, and connectivity.
    pub fn new(vertices: Vec<Vertex>, edges: Vec<Edge>) -> Result<Self> {
        let invalid = |msg: String| Err(Error::InvalidGraph(msg));
        if vertices.is_empty() {
            return invalid("no vertices".into());
        }
        let mut order_of: HashMap<u64, &BigUint> = HashMap::new();
        for v in &vertices {
            if v.order.is_zero() {
                return invalid(format!("vertex {} has order 0", v.id));
            }
            if order_of.insert(v.id, &v.order).is_some() {
                return invalid(format!("duplicate vertex id {}", v.id));
            }
        }
        let mut edge_ids = BTreeSet::new();
        for e in &edges {
            if !edge_ids.insert(e.id) {
                return invalid(format!("duplicate edge id {}", e.id));
            }
            if e.order.is_zero() {
                return invalid(format!("edge {} has order 0", e.id));
            }
            if e.v2 == Some(e.v1) {
                return invalid(format!(
                    "edge {} repeats vertex {}; closed edges use v2 = null",
                    e.id, e.v1
                ));
            }
            for v in e.endpoints() {
                let Some(order) = order_of.get(&v) else {
                    return invalid(format!("edge {} references unknown vertex {v}", e.id));
                };
                if !order.is_multiple_of(&e.order) {
                    return invalid(format!(
                        "edge {} order {} does not divide vertex {v} order {order}",
                        e.id, e.order
                    ));
                }
            }
        }
        let graph = Self {
            vertices,
            edges,
            abelian: None,
        };
        if !graph.is_connected() {
            return invalid("graph is not connected".into());
        }
        Ok(graph)
    }

    /// Attaches explicit abelian structure after checking it matches the orders.
    pub fn with_abelian(mut self, structure: AbelianStructure) -> Result<Self> {
        let invalid = |msg: String| Err(Error::InvalidGraph(msg));
        let k = structure.factor_orders.len();
        if structure.factor_orders.contains(&0) {
            return invalid("abelian factor of order 0".into());
        }
        let full: BigUint = structure
            .factor_orders
            .iter()
            .map(|&q| BigUint::from(q))
            .product();
        if let Some(v) = self.vertices.iter().find(|v| v.order != full) {
            return invalid(format!(
                "vertex {} order {} differs from the abelian group order {full}",
                v.id, v.order
            ));
        }
        for e in &self.edges {
            let Some(factors) = structure.edge_factors.get(&e.id) else {
                return invalid(format!("no factor list for edge {}", e.id));
            };
            if let Some(i) = factors.iter().find(|&&i| i >= k) {
                return invalid(format!("edge {} uses factor {i} of {k}", e.id));
            }
            let order: BigUint = factors
                .iter()
                .map(|&i| BigUint::from(structure.factor_orders[i]))
                .product();
            if order != e.order {
                return invalid(format!(
                    "edge {} order {} differs from its factor product {order}",
                    e.id, e.order
                ));
            }
        }
        if structure.edge_factors.len() != self.edges.len() {
            return invalid("factor lists for unknown edges".into());
        }
        self.abelian = Some(structure);
        Ok(self)
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn abelian(&self) -> Option<&AbelianStructure> {
        self.abelian.as_ref()
    }

    pub fn vertex(&self, id: u64) -> Option<&Vertex> {
        self.vertices.iter().find(|v| v.id == id)
    }

    pub fn edge(&self, id: u64) -> Option<&Edge> {
        self.edges.iter().find(|e| e.id == id)
    }

    /// Number of edge ends at `v`; a closed edge counts twice.
    pub fn degree(&self, v: u64) -> usize {
        self.edges
            .iter()
            .map(|e| match e.v2 {
                None => 2 * usize::from(e.v1 == v),
                Some(w) => usize::from(e.v1 == v) + usize::from(w == v),
            })
            .sum()
    }

    fn is_connected(&self) -> bool {
        let mut adj: HashMap<u64, Vec<u64>> = HashMap::new();
        for e in &self.edges {
            if let Some(w) = e.v2 {
                adj.entry(e.v1).or_default().push(w);
                adj.entry(w).or_default().push(e.v1);
            }
        }
        let start = self.vertices[0].id;
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &w in adj.get(&v).into_iter().flatten() {
                if seen.insert(w) {
                    queue.push_back(w);
                }
            }
        }
        seen.len() == self.vertices.len()
    }

    /// Non-closed edges whose group equals one of its vertex groups.
    pub fn trivial_edges(&self) -> Vec<u64> {
        self.edges
            .iter()
            .filter(|e| e.v2.is_some() && e.endpoints().any(|v| self.order(v) == Some(&e.order)))
            .map(|e| e.id)
            .collect()
    }

    pub fn is_normal_form(&self) -> bool {
        self.trivial_edges().is_empty()
    }

    fn order(&self, v: u64) -> Option<&BigUint> {
        self.vertex(v).map(|v| &v.order)
    }

    /// Lcm of all vertex and edge orders.
    pub fn order_lcm(&self) -> BigUint {
        self.vertices
            .iter()
            .map(|v| &v.order)
            .chain(self.edges.iter().map(|e| &e.order))
            .fold(BigUint::one(), |acc, o| acc.lcm(o))
    }
}

/// `χ = Σ 1/|G_v| − Σ 1/|G_e|`.
pub fn euler_characteristic(g: &GraphOfGroups) -> BigRational {
    let recip = |o: &BigUint| BigRational::new(BigInt::one(), BigInt::from(o.clone()));
    let vertices: BigRational = g.vertices.iter().map(|v| recip(&v.order)).sum();
    let edges: BigRational = g.edges.iter().map(|e| recip(&e.order)).sum();
    vertices - edges
}

/// Rank `g = 1 − χ n` of the free kernel of an extension of order `n`.
pub fn genus_of_kernel(graph: &GraphOfGroups, n: &BigUint) -> Result<BigUint> {
    let chi = euler_characteristic(graph);
    let bad = |reason: &str| Error::BadExtensionOrder {
        n: n.to_string(),
        chi: chi.to_string(),
        reason: reason.into(),
    };
    if n.is_zero() {
        return Err(bad("order must be positive"));
    }
    let g = BigRational::one() - &chi * BigRational::from_integer(BigInt::from(n.clone()));
    if !g.is_integer() {
        return Err(bad("(−χ)·n is not an integer"));
    }
    let g = g.to_integer();
    if g.is_negative() {
        return Err(bad("negative rank"));
    }
    Ok(g.to_biguint().expect("non-negative"))
}

/// Repeatedly amalgamates the two vertex groups across a trivial edge.
/// Closed edges are never collapsed.
pub fn collapse_trivial_edges(graph: &GraphOfGroups) -> GraphOfGroups {
    let mut vertices = graph.vertices.clone();
    let mut edges = graph.edges.clone();
    let mut collapsed = false;
    loop {
        let order = |vs: &[Vertex], id: u64| vs.iter().find(|v| v.id == id).unwrap().order.clone();
        let found = edges.iter().enumerate().find_map(|(i, e)| {
            let w = e.v2?;
            let (o1, o2) = (order(&vertices, e.v1), order(&vertices, w));
            if e.order == o1 {
                // G_e = G_{v1}: the amalgam is G_{w}.
                Some((i, e.v1, w))
            } else if e.order == o2 {
                Some((i, w, e.v1))
            } else {
                None
            }
        });
        let Some((index, absorbed, keeper)) = found else {
            break;
        };
        collapsed = true;
        edges.remove(index);
        vertices.retain(|v| v.id != absorbed);
        for e in &mut edges {
            if e.v1 == absorbed {
                e.v1 = keeper;
            }
            if e.v2 == Some(absorbed) {
                e.v2 = Some(keeper);
            }
            if e.v2 == Some(e.v1) {
                e.v2 = None;
            }
        }
    }
    GraphOfGroups {
        vertices,
        edges,
        abelian: if collapsed {
            None
        } else {
            graph.abelian.clone()
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Lemma3Case {
    ClosedOnlyEdge,
    ClosedAmongOthers,
    NonclosedOnlyEdge,
    NonclosedOneIsolatedVertex,
    NonclosedNoIsolatedVertex,
}

impl Lemma3Case {
    /// The case bound on `n/a` as a multiple of `g − 1`.
    pub fn multiplier(self) -> u32 {
        match self {
            Lemma3Case::ClosedOnlyEdge => 2,
            Lemma3Case::ClosedAmongOthers => 1,
            Lemma3Case::NonclosedOnlyEdge => 6,
            Lemma3Case::NonclosedOneIsolatedVertex => 2,
            Lemma3Case::NonclosedNoIsolatedVertex => 1,
        }
    }
}

impl fmt::Display for Lemma3Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Lemma3Case::ClosedOnlyEdge => "closed-only-edge",
            Lemma3Case::ClosedAmongOthers => "closed-among-others",
            Lemma3Case::NonclosedOnlyEdge => "nonclosed-only-edge",
            Lemma3Case::NonclosedOneIsolatedVertex => "nonclosed-one-isolated-vertex",
            Lemma3Case::NonclosedNoIsolatedVertex => "nonclosed-no-isolated-vertex",
        };
        f.write_str(s)
    }
}

/// Edge-order audit: `n/a` against the case bound and against `6(g − 1)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lemma3Report {
    pub edge: u64,
    pub case: Lemma3Case,
    #[serde(with = "crate::bigint_serde")]
    pub g: BigUint,
    /// `n / a` as an exact fraction `p/q` (or `p`).
    pub ratio: String,
    pub multiplier: u32,
    #[serde(with = "crate::bigint_serde")]
    pub case_bound: BigUint,
    #[serde(with = "crate::bigint_serde")]
    pub global_bound: BigUint,
    pub pass_case: bool,
    pub pass_global: bool,
    /// Whether `n/a` equals the case bound.
    pub tight: bool,
}

impl Lemma3Report {
    pub fn pass(&self) -> bool {
        self.pass_case && self.pass_global
    }
}

pub fn lemma3_check(graph: &GraphOfGroups, edge_id: u64, n: &BigUint) -> Result<Lemma3Report> {
    let edge = graph.edge(edge_id).ok_or(Error::EdgeNotFound(edge_id))?;
    if let Some(&e) = graph.trivial_edges().first() {
        return Err(Error::NotNormalForm(e));
    }
    let g = genus_of_kernel(graph, n)?;
    if g < BigUint::from(2u8) {
        return Err(Error::GenusTooSmall {
            g: g.to_string(),
            min: 2,
        });
    }
    let only = graph.edges.len() == 1;
    let case = match edge.v2 {
        None if only => Lemma3Case::ClosedOnlyEdge,
        None => Lemma3Case::ClosedAmongOthers,
        Some(_) if only => Lemma3Case::NonclosedOnlyEdge,
        Some(_) => {
            let isolated = edge.endpoints().filter(|&v| graph.degree(v) == 1).count();
            match isolated {
                0 => Lemma3Case::NonclosedNoIsolatedVertex,
                1 => Lemma3Case::NonclosedOneIsolatedVertex,
                // Both ends isolated means the edge is its whole component.
                _ => Lemma3Case::NonclosedOnlyEdge,
            }
        }
    };
    let gm1 = &g - 1u32;
    let ratio = BigRational::new(BigInt::from(n.clone()), BigInt::from(edge.order.clone()));
    let as_rational = |b: &BigUint| BigRational::from_integer(BigInt::from(b.clone()));
    let case_bound = &gm1 * case.multiplier();
    let global_bound = &gm1 * 6u32;
    Ok(Lemma3Report {
        edge: edge_id,
        case,
        pass_case: ratio <= as_rational(&case_bound),
        pass_global: ratio <= as_rational(&global_bound),
        tight: ratio == as_rational(&case_bound),
        ratio: ratio.to_string(),
        multiplier: case.multiplier(),
        case_bound,
        global_bound,
        g,
    })
}

/// Per-dimension overrides for [`jordan_constant`], e.g. parsed from
/// `{"3": 48}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JordanTable(pub BTreeMap<u32, u64>);

/// Index bound for a normal abelian subgroup of a finite subgroup of
/// `GL(d, C)`; `(d + 1)!` unless overridden.
pub fn jordan_constant(d: u32, table: &JordanTable) -> BigUint {
    match table.0.get(&d) {
        Some(&c) => BigUint::from(c),
        None => (1..=d + 1).map(BigUint::from).product(),
    }
}

fn check_bound_args(g: &BigUint, d: u32, c: &BigUint) -> Result<()> {
    if g < &BigUint::from(2u8) {
        return Err(Error::GenusTooSmall {
            g: g.to_string(),
            min: 2,
        });
    }
    if d < 3 {
        return Err(Error::DimensionTooSmall { d, min: 3 });
    }
    if c.is_zero() {
        return Err(Error::InvalidParameter(
            "constant c must be at least 1".into(),
        ));
    }
    Ok(())
}

/// `c · 6^d · (g − 1)^d`.
pub fn crude_bound(g: &BigUint, d: u32, c: &BigUint) -> Result<BigUint> {
    check_bound_args(g, d, c)?;
    Ok(c * BigUint::from(6u8).pow(d) * (g - 1u32).pow(d))
}

/// Number of chain steps: `d/2` for even `d`, `(d+1)/2` for odd `d`.
pub fn chain_steps(d: u32) -> u32 {
    d.div_ceil(2)
}

pub const BOUND_CONVENTION: &str =
    "refined = c * (6(g-1))^s(d); only the degree s(d) is mandated, the constant is a convention";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundReport {
    #[serde(with = "crate::bigint_serde")]
    pub g: BigUint,
    pub d: u32,
    #[serde(with = "crate::bigint_serde")]
    pub jordan_c: BigUint,
    #[serde(with = "crate::bigint_serde")]
    pub crude: BigUint,
    #[serde(with = "crate::bigint_serde")]
    pub refined: BigUint,
    pub steps: u32,
    /// Degree in `g` of the refined bound.
    pub degree: u32,
    /// For odd `d`, both the proven `(d+1)/2` and the realized `(d−1)/2`.
    pub degree_candidates: Vec<u32>,
    pub refined_le_crude: bool,
    pub convention: String,
}

/// `c · (6(g − 1))^{s(d)}` together with the crude bound.
pub fn refined_bound(g: &BigUint, d: u32, c: &BigUint) -> Result<BoundReport> {
    let crude = crude_bound(g, d, c)?;
    let steps = chain_steps(d);
    let refined = c * (BigUint::from(6u8) * (g - 1u32)).pow(steps);
    let degree_candidates = if d.is_multiple_of(2) {
        vec![d / 2]
    } else {
        vec![(d - 1) / 2, d.div_ceil(2)]
    };
    Ok(BoundReport {
        g: g.clone(),
        d,
        jordan_c: c.clone(),
        refined_le_crude: refined <= crude,
        crude,
        refined,
        steps,
        degree: steps,
        degree_candidates,
        convention: BOUND_CONVENTION.into(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorollaryBounds {
    /// Bound on `|G / G_0|`.
    #[serde(with = "crate::bigint_serde")]
    pub quotient_index: BigUint,
    /// Bound on the index of a normal abelian subgroup of `G`.
    #[serde(with = "crate::bigint_serde")]
    pub abelian_index: BigUint,
    /// `G_0` embeds in `SO(kernel_orthogonal_dim)`.
    pub kernel_orthogonal_dim: u32,
}

pub fn corollary_bounds(
    g: &BigUint,
    d: u32,
    c: &BigUint,
    table: &JordanTable,
) -> Result<CorollaryBounds> {
    let refined = refined_bound(g, d, c)?.refined;
    Ok(CorollaryBounds {
        abelian_index: jordan_constant(d - 2, table) * &refined,
        quotient_index: refined,
        kernel_orthogonal_dim: d - 2,
    })
}

fn divisors(n: u64) -> Vec<u64> {
    (1..=n).filter(|d| n.is_multiple_of(*d)).collect()
}

/// Random connected normal-form graph with `χ < 0`, together with the order
/// `n = lcm(denominator of χ, vertex orders)`.
pub fn random_gog(
    seed: u64,
    max_vertices: usize,
    max_order: u64,
) -> Result<(GraphOfGroups, BigUint)> {
    if max_vertices == 0 || max_order < 2 {
        return Err(Error::InvalidParameter(
            "need max_vertices >= 1 and max_order >= 2".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..100 {
        let count = rng.random_range(1..=max_vertices);
        let orders: Vec<u64> = (0..count)
            .map(|_| rng.random_range(2..=max_order))
            .collect();
        let mut edges = Vec::new();
        let mut push_edge = |rng: &mut ChaCha8Rng, u: usize, w: Option<usize>| {
            let choices: Vec<u64> = match w {
                None => divisors(orders[u]),
                Some(w) => {
                    let (a, b) = (orders[u], orders[w]);
                    divisors(a.gcd(&b))
                        .into_iter()
                        .filter(|&x| x < a && x < b)
                        .collect()
                }
            };
            let order = choices[rng.random_range(0..choices.len())];
            let id = edges.len() as u64;
            edges.push(Edge {
                id,
                v1: u as u64,
                v2: w.map(|w| w as u64),
                order: BigUint::from(order),
            });
        };
        for i in 1..count {
            let parent = rng.random_range(0..i);
            push_edge(&mut rng, parent, Some(i));
        }
        let extra = rng.random_range(0..=count / 2 + 1);
        for _ in 0..extra {
            let u = rng.random_range(0..count);
            let w = rng.random_range(0..count);
            push_edge(&mut rng, u, (u != w).then_some(w));
        }
        let vertices = orders
            .iter()
            .enumerate()
            .map(|(i, &o)| Vertex {
                id: i as u64,
                order: BigUint::from(o),
            })
            .collect();
        let graph = GraphOfGroups::new(vertices, edges)?;
        let chi = euler_characteristic(&graph);
        if !chi.is_negative() {
            continue;
        }
        let denom = chi.denom().magnitude().clone();
        let n = graph
            .vertices
            .iter()
            .fold(denom, |acc, v| acc.lcm(&v.order));
        debug_assert!(graph.is_normal_form());
        return Ok((graph, n));
    }
    Err(Error::InvalidParameter(
        "random graph generation exhausted its retries".into(),
    ))
}

/// Converts a small exact integer for display or floating-point use.
pub fn to_f64(n: &BigUint) -> f64 {
    n.to_f64().unwrap_or(f64::INFINITY)
}
