//! Lorentz-group tools for Schottky groups, graphs of finite groups, and
//! finite extensions of free groups acting on hyperbolic space.

pub mod bigint_serde;
pub mod error;
pub mod families;
pub mod graphgroups;
pub mod lorentz;
pub mod schottky;

pub use error::{Error, Result};
pub use families::{
    abelian_star, cyclic_star, effectiveness_check, fixed_dim_chain, kernel_sampler, realize,
    verify_realization, Parity, RealizedExtension, StarFamily, VerificationReport,
};
pub use graphgroups::{
    collapse_trivial_edges, corollary_bounds, crude_bound, euler_characteristic, genus_of_kernel,
    jordan_constant, lemma3_check, random_gog, refined_bound, AbelianStructure, BoundReport,
    CorollaryBounds, Edge, GraphOfGroups, JordanTable, Lemma3Case, Lemma3Report, Vertex,
};
pub use lorentz::{
    cap_relation, classify_isometry, common_fixed_subspace, minkowski_product, verify_lorentz,
    CapNormal, CapRelation, CausalType, FixedSubspace, IsometryClass, LorentzCheck, LorentzMatrix,
    MinkowskiVector, ToleranceConfig,
};
pub use schottky::{
    build_schottky, limit_set_sample, nonidentity_audit, pair_caps, ping_pong_certificate,
    random_classical_schottky, Certificate, Letter, SchottkyGroup, Word,
};
