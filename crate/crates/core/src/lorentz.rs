//! Linear algebra for the hyperboloid model of hyperbolic `d`-space.
//!
//! Vectors live in `R^{d+1}` with the Minkowski form
//! `<x, y> = x_1 y_1 + ... + x_d y_d - x_{d+1} y_{d+1}`; the last coordinate is
//! the timelike one. Hyperbolic space is the upper sheet of `<x, x> = -1` and its
//! isometries are the matrices preserving the form and the sheet.
//!
//! A unit spacelike vector `v` encodes both a hyperbolic hyperplane `v^⊥` and the
//! open spherical cap `{x lightlike, future pointing : <x, v> > 0}` it cuts out of
//! the boundary sphere. In ball coordinates a boundary point `u` is the lightlike
//! ray through `(u, 1)`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt;
use std::ops::Mul;

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerical thresholds shared by every geometric check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceConfig {
    /// Membership in `O(d,1)` and orthogonality residuals.
    pub tol_orth: f64,
    /// Eigenvalue and rank decisions.
    pub tol_classify: f64,
    /// Band around the `±1` inner-product thresholds of cap geometry.
    pub tol_geom: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            tol_orth: 1e-9,
            tol_classify: 1e-6,
            tol_geom: 1e-8,
        }
    }
}

impl ToleranceConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("tol_orth", self.tol_orth),
            ("tol_classify", self.tol_classify),
            ("tol_geom", self.tol_geom),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::InvalidTolerance { name, value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CausalType {
    Spacelike,
    Lightlike,
    Timelike,
}

/// A vector of `R^{d,1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VectorJson", into = "VectorJson")]
pub struct MinkowskiVector(DVector<f64>);

#[derive(Serialize, Deserialize)]
struct VectorJson {
    dim: usize,
    entries: Vec<f64>,
}

impl TryFrom<VectorJson> for MinkowskiVector {
    type Error = Error;

    fn try_from(json: VectorJson) -> Result<Self> {
        if json.entries.len() != json.dim + 1 {
            return Err(Error::DimensionMismatch {
                expected: json.dim + 1,
                found: json.entries.len(),
            });
        }
        MinkowskiVector::new(json.entries)
    }
}

impl From<MinkowskiVector> for VectorJson {
    fn from(v: MinkowskiVector) -> Self {
        VectorJson {
            dim: v.dim(),
            entries: v.0.iter().copied().collect(),
        }
    }
}

impl MinkowskiVector {
    /// Builds a vector from its `d + 1` coordinates, timelike coordinate last.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: coords.len(),
            });
        }
        Ok(Self(DVector::from_vec(coords)))
    }

    /// The hyperbolic origin `(0, ..., 0, 1)` of `H^d`.
    pub fn origin(dim: usize) -> Self {
        let mut v = DVector::zeros(dim + 1);
        v[dim] = 1.0;
        Self(v)
    }

    /// Hyperbolic dimension `d`; the vector has `d + 1` coordinates.
    pub fn dim(&self) -> usize {
        self.0.len() - 1
    }

    pub fn coords(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn as_dvector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn spatial(&self) -> &[f64] {
        &self.0.as_slice()[..self.dim()]
    }

    pub fn time(&self) -> f64 {
        self.0[self.dim()]
    }

    pub fn spatial_norm(&self) -> f64 {
        self.spatial().iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn norm_sq(&self) -> f64 {
        form(&self.0, &self.0)
    }

    pub fn causal_type(&self, cfg: &ToleranceConfig) -> CausalType {
        let q = self.norm_sq();
        if q > cfg.tol_classify {
            CausalType::Spacelike
        } else if q < -cfg.tol_classify {
            CausalType::Timelike
        } else {
            CausalType::Lightlike
        }
    }

    pub fn negated(&self) -> Self {
        Self(-&self.0)
    }
}

fn form(x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let n = x.len() - 1;
    let spatial: f64 = (0..n).map(|i| x[i] * y[i]).sum();
    spatial - x[n] * y[n]
}

/// The Minkowski product `Σ_{i≤d} x_i y_i − x_{d+1} y_{d+1}`.
pub fn minkowski_product(x: &MinkowskiVector, y: &MinkowskiVector) -> Result<f64> {
    if x.0.len() != y.0.len() {
        return Err(Error::DimensionMismatch {
            expected: x.0.len(),
            found: y.0.len(),
        });
    }
    Ok(form(&x.0, &y.0))
}

/// The Gram matrix `J = diag(1, ..., 1, -1)` of the Minkowski form.
pub fn minkowski_form(dim: usize) -> DMatrix<f64> {
    let mut j = DMatrix::identity(dim + 1, dim + 1);
    j[(dim, dim)] = -1.0;
    j
}

/// Unit spacelike vector: a hyperbolic hyperplane together with the boundary cap
/// on its positive side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MinkowskiVector", into = "MinkowskiVector")]
pub struct CapNormal(MinkowskiVector);

impl TryFrom<MinkowskiVector> for CapNormal {
    type Error = Error;

    fn try_from(v: MinkowskiVector) -> Result<Self> {
        CapNormal::new(v, &ToleranceConfig::default())
    }
}

impl From<CapNormal> for MinkowskiVector {
    fn from(c: CapNormal) -> Self {
        c.0
    }
}

impl CapNormal {
    pub fn new(v: MinkowskiVector, cfg: &ToleranceConfig) -> Result<Self> {
        let q = v.norm_sq();
        let scale = v.0.amax().powi(2).max(1.0);
        if !((q - 1.0).abs() <= cfg.tol_orth * scale) {
            return Err(Error::NotUnitSpacelike { norm: q });
        }
        Ok(Self(v))
    }

    /// Cap of angular radius `radius ∈ (0, π)` around the unit vector `center`.
    pub fn from_ball(center: &[f64], radius: f64) -> Result<Self> {
        let norm = center.iter().map(|x| x * x).sum::<f64>().sqrt();
        if center.is_empty() || !(norm > 0.0) {
            return Err(Error::DegenerateCap { norm });
        }
        if !(radius > 0.0 && radius < std::f64::consts::PI) {
            return Err(Error::InvalidParameter(format!(
                "cap radius {radius} outside (0, π)"
            )));
        }
        let s = radius.sin();
        let mut coords: Vec<f64> = center.iter().map(|x| x / (norm * s)).collect();
        coords.push(radius.cos() / s);
        Ok(Self(MinkowskiVector::new(coords)?))
    }

    /// Hyperplane orthogonal to the geodesic ray from the origin towards the
    /// boundary point `direction`, at hyperbolic distance `offset`. The cap is
    /// the side containing the ray's endpoint.
    pub fn at_offset(direction: &[f64], offset: f64) -> Result<Self> {
        let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        if direction.is_empty() || !(norm > 0.0) {
            return Err(Error::DegenerateCap { norm });
        }
        let (c, s) = (offset.cosh(), offset.sinh());
        let mut coords: Vec<f64> = direction.iter().map(|x| x / norm * c).collect();
        coords.push(s);
        Ok(Self(MinkowskiVector::new(coords)?))
    }

    pub fn vector(&self) -> &MinkowskiVector {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    /// Normal of the closure of the complementary cap.
    pub fn complement(&self) -> Self {
        Self(self.0.negated())
    }

    /// Image of the cap under `m`; `m` maps cap(v) onto cap(m v).
    pub fn transformed(&self, m: &LorentzMatrix) -> Self {
        Self(m.apply(&self.0))
    }

    pub fn reflection(&self) -> LorentzMatrix {
        let v = &self.0 .0;
        let n = v.len();
        let jv = minkowski_form(n - 1) * v;
        let entries = DMatrix::identity(n, n) - 2.0 * v * jv.transpose();
        LorentzMatrix::from_parts(entries, -1)
    }

    /// Whether the boundary point `u` (a unit vector of `R^d`) lies in the open cap.
    pub fn contains_boundary_point(&self, u: &[f64]) -> bool {
        self.boundary_value(u) > 0.0
    }

    /// `<(u, 1), v>`; positive inside the cap, zero on its bounding sphere.
    pub fn boundary_value(&self, u: &[f64]) -> f64 {
        let v = self.0.coords();
        let d = self.dim();
        u.iter().zip(&v[..d]).map(|(a, b)| a * b).sum::<f64>() - v[d]
    }

    /// Angular radius of the cap, from `tan θ = 1 / v_{d+1}` for a unit normal.
    pub fn angular_radius(&self) -> f64 {
        f64::atan2(1.0, self.0.time())
    }
}

/// An element of `O^+(d,1)`, the isometry group of `H^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct LorentzMatrix {
    entries: DMatrix<f64>,
    orientation: i8,
}

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    dim: usize,
    entries: Vec<f64>,
}

impl TryFrom<MatrixJson> for LorentzMatrix {
    type Error = Error;

    fn try_from(json: MatrixJson) -> Result<Self> {
        let n = json.dim + 1;
        if json.entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: json.entries.len(),
            });
        }
        LorentzMatrix::from_matrix(DMatrix::from_row_slice(n, n, &json.entries))
    }
}

impl From<LorentzMatrix> for MatrixJson {
    fn from(m: LorentzMatrix) -> Self {
        let n = m.entries.nrows();
        let entries = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| m.entries[(i, j)])
            .collect();
        MatrixJson {
            dim: n - 1,
            entries,
        }
    }
}

impl LorentzMatrix {
    /// Wraps a square matrix of size at least 3. Membership in `O^+(d,1)` is not
    /// checked here; see [`verify_lorentz`].
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() || entries.nrows() < 3 {
            return Err(Error::BadShape {
                rows: entries.nrows(),
                cols: entries.ncols(),
            });
        }
        let orientation = if entries.determinant() < 0.0 { -1 } else { 1 };
        Ok(Self {
            entries,
            orientation,
        })
    }

    pub(crate) fn from_parts(entries: DMatrix<f64>, orientation: i8) -> Self {
        Self {
            entries,
            orientation,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_parts(DMatrix::identity(dim + 1, dim + 1), 1)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows() - 1
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// `+1` for orientation-preserving, `-1` for orientation-reversing.
    pub fn orientation(&self) -> i8 {
        self.orientation
    }

    pub fn apply(&self, v: &MinkowskiVector) -> MinkowskiVector {
        MinkowskiVector(&self.entries * &v.0)
    }

    /// `J Mᵀ J`, the inverse of any matrix preserving the form.
    pub fn inverse(&self) -> Self {
        let mut inv = self.entries.transpose();
        let last = inv.nrows() - 1;
        for i in 0..last {
            inv[(i, last)] = -inv[(i, last)];
            inv[(last, i)] = -inv[(last, i)];
        }
        Self::from_parts(inv, self.orientation)
    }

    pub fn pow(&self, exp: u64) -> Self {
        let mut result = Self::identity(self.dim());
        let mut base = self.clone();
        let mut e = exp;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            base = &base * &base;
            e >>= 1;
        }
        result
    }

    /// `‖M − I‖_∞` (max-entry norm).
    pub fn distance_from_identity(&self) -> f64 {
        let n = self.entries.nrows();
        (&self.entries - DMatrix::<f64>::identity(n, n)).amax()
    }

    /// `‖M − N‖_∞`.
    pub fn distance(&self, other: &Self) -> f64 {
        (&self.entries - &other.entries).amax()
    }

    /// Induced Möbius map on the boundary sphere `S^{d-1}`.
    pub fn boundary_map(&self, u: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut x = DVector::from_element(d + 1, 1.0);
        for (i, ui) in u.iter().enumerate() {
            x[i] = *ui;
        }
        let y = &self.entries * x;
        (0..d).map(|i| y[i] / y[d]).collect()
    }
}

impl Mul for &LorentzMatrix {
    type Output = LorentzMatrix;

    fn mul(self, rhs: &LorentzMatrix) -> LorentzMatrix {
        LorentzMatrix::from_parts(
            &self.entries * &rhs.entries,
            self.orientation * rhs.orientation,
        )
    }
}

impl Mul for LorentzMatrix {
    type Output = LorentzMatrix;

    fn mul(self, rhs: LorentzMatrix) -> LorentzMatrix {
        &self * &rhs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzCheck {
    /// `‖MᵀJM − J‖_∞`.
    pub residual: f64,
    /// The residual divided by `max(1, ‖M‖_∞²)`, the scale of its rounding error.
    pub relative_residual: f64,
    pub sheet_preserving: bool,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn verify_lorentz(m: &LorentzMatrix, cfg: &ToleranceConfig) -> LorentzCheck {
    let n = m.entries.nrows();
    let j = minkowski_form(n - 1);
    let residual = (m.entries.transpose() * &j * &m.entries - &j).amax();
    let scale = m.entries.amax().powi(2).max(1.0);
    let relative_residual = residual / scale;
    let sheet_preserving = m.entries[(n - 1, n - 1)] > 0.0;
    LorentzCheck {
        residual,
        relative_residual,
        sheet_preserving,
        tolerance: cfg.tol_orth,
        pass: relative_residual <= cfg.tol_orth && sheet_preserving,
    }
}

/// Reflection `x ↦ x − 2<x,v>v` in the hyperplane `v^⊥`.
pub fn reflection(v: &MinkowskiVector, cfg: &ToleranceConfig) -> Result<LorentzMatrix> {
    Ok(CapNormal::new(v.clone(), cfg)?.reflection())
}

/// The block matrix `[[Q, 0], [0, 1]]`: an isometry fixing the hyperbolic origin.
pub fn embed_orthogonal(q: &DMatrix<f64>, cfg: &ToleranceConfig) -> Result<LorentzMatrix> {
    if !q.is_square() || q.nrows() < 2 {
        return Err(Error::BadShape {
            rows: q.nrows(),
            cols: q.ncols(),
        });
    }
    let d = q.nrows();
    let residual = (q.transpose() * q - DMatrix::<f64>::identity(d, d)).amax();
    if !(residual <= cfg.tol_orth) {
        return Err(Error::NotOrthogonal { residual });
    }
    let mut entries = DMatrix::zeros(d + 1, d + 1);
    entries.view_mut((0, 0), (d, d)).copy_from(q);
    entries[(d, d)] = 1.0;
    let orientation = if q.determinant() < 0.0 { -1 } else { 1 };
    Ok(LorentzMatrix::from_parts(entries, orientation))
}

/// Block-diagonal `2k × 2k` matrix of independent plane rotations by `angles`.
pub fn block_rotation(angles: &[f64]) -> DMatrix<f64> {
    let n = 2 * angles.len();
    let mut m = DMatrix::zeros(n, n);
    for (i, theta) in angles.iter().enumerate() {
        let (s, c) = theta.sin_cos();
        let r = 2 * i;
        m[(r, r)] = c;
        m[(r, r + 1)] = -s;
        m[(r + 1, r)] = s;
        m[(r + 1, r + 1)] = c;
    }
    m
}

/// Pads an orthogonal matrix with trailing identity rows/columns up to size `dim`.
pub fn pad_orthogonal(q: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    let mut m = DMatrix::identity(dim, dim);
    let n = q.nrows().min(dim);
    m.view_mut((0, 0), (n, n))
        .copy_from(&q.view((0, 0), (n, n)));
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IsometryClass {
    Identity,
    Elliptic,
    Parabolic,
    Loxodromic,
}

impl IsometryClass {
    pub fn has_finite_order_type(self) -> bool {
        matches!(self, IsometryClass::Identity | IsometryClass::Elliptic)
    }
}

impl fmt::Display for IsometryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            IsometryClass::Identity => "identity",
            IsometryClass::Elliptic => "elliptic",
            IsometryClass::Parabolic => "parabolic",
            IsometryClass::Loxodromic => "loxodromic",
        };
        f.write_str(s)
    }
}

const SCHUR_MAX_ITER: usize = 2_000;
/// Deflation thresholds tried in turn; machine epsilon can stall the Francis
/// iteration on matrices with widely spread eigenvalues.
const SCHUR_EPS: [f64; 3] = [1e-15, 1e-13, 1e-11];

/// Moduli of the eigenvalues, with bounded iteration.
fn eigenvalue_moduli(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = a.nrows();
    let moduli =
        |s: Schur<f64, nalgebra::Dyn>| s.complex_eigenvalues().iter().map(|z| z.norm()).collect();
    for eps in SCHUR_EPS {
        if let Some(s) = Schur::try_new(a.clone(), eps, SCHUR_MAX_ITER) {
            return Ok(moduli(s));
        }
    }
    // Last resort: an orthogonal change of basis.
    let q = DMatrix::from_fn(n, n, |i, j| ((n * i + j + 1) as f64).sin())
        .qr()
        .q();
    let b = q.transpose() * a * &q;
    for eps in SCHUR_EPS {
        if let Some(s) = Schur::try_new(b.clone(), eps, SCHUR_MAX_ITER) {
            return Ok(moduli(s));
        }
    }
    Err(Error::Arithmetic(
        "eigenvalue iteration did not converge".into(),
    ))
}

pub fn spectral_radius(m: &LorentzMatrix) -> Result<f64> {
    Ok(eigenvalue_moduli(&m.entries)?
        .into_iter()
        .fold(0.0, f64::max))
}

pub fn classify_isometry(m: &LorentzMatrix, cfg: &ToleranceConfig) -> Result<IsometryClass> {
    let check = verify_lorentz(m, cfg);
    if !check.pass {
        return Err(Error::NotLorentz {
            residual: check.residual,
        });
    }
    if m.distance_from_identity() <= cfg.tol_classify {
        return Ok(IsometryClass::Identity);
    }
    let moduli = eigenvalue_moduli(&m.entries)?;
    let rho = moduli.iter().copied().fold(0.0, f64::max);
    if rho > 1.0 + cfg.tol_classify {
        return Ok(IsometryClass::Loxodromic);
    }
    let unimodular = moduli.iter().all(|r| (r - 1.0).abs() <= cfg.tol_classify);
    if unimodular && common_fixed_subspace(std::slice::from_ref(m), cfg)?.has_timelike {
        Ok(IsometryClass::Elliptic)
    } else {
        Ok(IsometryClass::Parabolic)
    }
}

/// The common fixed subspace `∩ ker(M − I)` of a set of isometries.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedSubspace {
    /// Euclidean-orthonormal basis, one column per basis vector.
    pub basis: DMatrix<f64>,
    /// Whether the subspace contains a timelike vector (a fixed point in `H^d`).
    pub has_timelike: bool,
    /// Dimension of the fixed set on `S^{d-1}`; `-1` when it is empty.
    pub sphere_dim: i32,
}

impl FixedSubspace {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Euclidean distance from `x` to the subspace.
    pub fn distance_to(&self, x: &DVector<f64>) -> f64 {
        let proj = &self.basis * (self.basis.transpose() * x);
        (x - proj).norm()
    }

    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.basis * (self.basis.transpose() * x)
    }
}

pub fn common_fixed_subspace(
    mats: &[LorentzMatrix],
    cfg: &ToleranceConfig,
) -> Result<FixedSubspace> {
    let first = mats.first().ok_or(Error::Empty("matrix list"))?;
    let n = first.entries.nrows();
    let mut stacked = DMatrix::zeros(n * mats.len(), n);
    for (k, m) in mats.iter().enumerate() {
        if m.entries.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: m.entries.nrows(),
            });
        }
        let block = &m.entries - DMatrix::<f64>::identity(n, n);
        stacked.view_mut((k * n, 0), (n, n)).copy_from(&block);
    }
    let svd = stacked.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let sigma_max = svd.singular_values.max();
    let threshold = cfg.tol_classify * sigma_max.max(1.0);
    let kernel: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= threshold)
        .map(|(i, _)| v_t.row(i).transpose())
        .collect();
    let basis = if kernel.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&kernel)
    };

    let (has_timelike, has_null) = if basis.ncols() == 0 {
        (false, false)
    } else {
        let gram = basis.transpose() * minkowski_form(n - 1) * &basis;
        let eig = SymmetricEigen::new(gram);
        let neg = eig.eigenvalues.iter().any(|l| *l < -cfg.tol_classify);
        let null = eig.eigenvalues.iter().any(|l| l.abs() <= cfg.tol_classify);
        (neg, null)
    };
    // A Lorentzian subspace of dimension k meets the light cone in S^{k-2};
    // a degenerate one touches it in a single ray.
    let sphere_dim = if has_timelike {
        basis.ncols() as i32 - 2
    } else if has_null {
        0
    } else {
        -1
    };
    Ok(FixedSubspace {
        basis,
        has_timelike,
        sphere_dim,
    })
}

/// Relative position of two caps on the boundary sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapRelation {
    /// Bounding spheres cross.
    Intersecting,
    /// Bounding spheres touch in one point.
    Tangent,
    /// Closed caps are disjoint.
    Separated,
    /// The first cap lies inside the second.
    FirstInsideSecond,
    /// The second cap lies inside the first.
    SecondInsideFirst,
    Equal,
    /// The caps are each other's complements.
    Complementary,
    /// Bounding spheres are disjoint and the caps together cover the sphere.
    Covering,
}

impl CapRelation {
    /// The relation with the arguments swapped.
    pub fn mirror(self) -> Self {
        match self {
            CapRelation::FirstInsideSecond => CapRelation::SecondInsideFirst,
            CapRelation::SecondInsideFirst => CapRelation::FirstInsideSecond,
            other => other,
        }
    }
}

impl fmt::Display for CapRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CapRelation::Intersecting => "intersecting",
            CapRelation::Tangent => "tangent",
            CapRelation::Separated => "separated",
            CapRelation::FirstInsideSecond => "nested(first in second)",
            CapRelation::SecondInsideFirst => "nested(second in first)",
            CapRelation::Equal => "equal",
            CapRelation::Complementary => "complementary",
            CapRelation::Covering => "covering",
        };
        f.write_str(s)
    }
}

/// Classifies two caps from `t = <v, w>`: `|t| < 1` means the bounding spheres
/// cross, `|t| > 1` that they are disjoint. When they are disjoint the sign of
/// `t` leaves two configurations, told apart by the angular radii (which are
/// decreasing in the time coordinate of a unit normal).
pub fn cap_relation(v: &CapNormal, w: &CapNormal, cfg: &ToleranceConfig) -> Result<CapRelation> {
    if v.dim() != w.dim() {
        return Err(Error::DimensionMismatch {
            expected: v.dim(),
            found: w.dim(),
        });
    }
    let (a, b) = (v.vector().as_dvector(), w.vector().as_dvector());
    let scale = a.amax().max(b.amax()).max(1.0);
    if (a - b).amax() <= cfg.tol_geom * scale {
        return Ok(CapRelation::Equal);
    }
    if (a + b).amax() <= cfg.tol_geom * scale {
        return Ok(CapRelation::Complementary);
    }
    let t = form(a, b);
    if (t - 1.0).abs() <= cfg.tol_geom || (t + 1.0).abs() <= cfg.tol_geom {
        return Ok(CapRelation::Tangent);
    }
    if t.abs() < 1.0 {
        return Ok(CapRelation::Intersecting);
    }
    let (vt, wt) = (v.vector().time(), w.vector().time());
    Ok(if t > 1.0 {
        if vt > wt {
            CapRelation::FirstInsideSecond
        } else {
            CapRelation::SecondInsideFirst
        }
    } else if vt + wt > 0.0 {
        CapRelation::Separated
    } else {
        CapRelation::Covering
    })
}

/// A cap in ball coordinates: `{x ∈ S^{d-1} : x·center > cos(radius)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallCap {
    pub center: Vec<f64>,
    pub radius: f64,
}

pub fn cap_to_ball_coords(v: &CapNormal, cfg: &ToleranceConfig) -> Result<BallCap> {
    let norm = v.vector().spatial_norm();
    if !(norm > cfg.tol_geom) {
        return Err(Error::DegenerateCap { norm });
    }
    let center = v.vector().spatial().iter().map(|x| x / norm).collect();
    Ok(BallCap {
        center,
        radius: v.angular_radius(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn vec(c: &[f64]) -> MinkowskiVector {
        MinkowskiVector::new(c.to_vec()).unwrap()
    }

    fn cap(c: &[f64]) -> CapNormal {
        CapNormal::new(vec(c), &ToleranceConfig::default()).unwrap()
    }

    #[test]
    fn products_of_basis_vectors() {
        assert_eq!(
            minkowski_product(&vec(&[1., 0., 0.]), &vec(&[1., 0., 0.])).unwrap(),
            1.0
        );
        assert_eq!(
            minkowski_product(&vec(&[0., 0., 1.]), &vec(&[0., 0., 1.])).unwrap(),
            -1.0
        );
        assert_eq!(
            minkowski_product(&vec(&[1., 0., 1.]), &vec(&[1., 0., 1.])).unwrap(),
            0.0
        );
        assert!(minkowski_product(&vec(&[1., 0.]), &vec(&[1., 0., 0.])).is_err());
    }

    #[test]
    fn causal_types() {
        let cfg = ToleranceConfig::default();
        assert_eq!(vec(&[1., 0., 0.]).causal_type(&cfg), CausalType::Spacelike);
        assert_eq!(vec(&[1., 0., 1.]).causal_type(&cfg), CausalType::Lightlike);
        assert_eq!(vec(&[0., 0., 1.]).causal_type(&cfg), CausalType::Timelike);
    }

    #[test]
    fn tolerance_validation() {
        assert!(ToleranceConfig::default().validate().is_ok());
        let bad = ToleranceConfig {
            tol_geom: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            bad.validate(),
            Err(Error::InvalidTolerance {
                name: "tol_geom",
                ..
            })
        ));
    }

    #[test]
    fn verify_identity_and_scaling() {
        let cfg = ToleranceConfig::default();
        let id = verify_lorentz(&LorentzMatrix::identity(3), &cfg);
        assert!(id.pass);
        assert_eq!(id.residual, 0.0);
        let scaled = LorentzMatrix::from_matrix(DMatrix::from_diagonal(&DVector::from_vec(vec![
            1., 1., 1., 2.,
        ])))
        .unwrap();
        assert!(!verify_lorentz(&scaled, &cfg).pass);
        let r = reflection(&vec(&[1., 0., 0., 0.]), &cfg).unwrap();
        assert!(verify_lorentz(&r, &cfg).pass);
    }

    #[test]
    fn sheet_swap_fails_verification() {
        let m = LorentzMatrix::from_matrix(-DMatrix::<f64>::identity(3, 3)).unwrap();
        let check = verify_lorentz(&m, &ToleranceConfig::default());
        assert_eq!(check.residual, 0.0);
        assert!(!check.sheet_preserving && !check.pass);
    }

    #[test]
    fn reflection_in_coordinate_hyperplane() {
        let r = reflection(&vec(&[1., 0., 0., 0.]), &ToleranceConfig::default()).unwrap();
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![-1., 1., 1., 1.]));
        assert_eq!(r.entries(), &expected);
        assert_eq!(r.orientation(), -1);
    }

    #[test]
    fn reflection_negates_its_normal() {
        let v = vec(&[2., 0., 3f64.sqrt()]);
        let r = reflection(&v, &ToleranceConfig::default()).unwrap();
        let image = r.apply(&v);
        for (a, b) in image.coords().iter().zip(v.coords()) {
            assert!((a + b).abs() < 1e-12);
        }
    }

    #[test]
    fn reflection_rejects_timelike() {
        let err = reflection(&vec(&[0., 0., 1.]), &ToleranceConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NotUnitSpacelike { .. }));
    }

    #[test]
    fn embed_orthogonal_basics() {
        let cfg = ToleranceConfig::default();
        let id = embed_orthogonal(&DMatrix::identity(3, 3), &cfg).unwrap();
        assert_eq!(id, LorentzMatrix::identity(3));
        let half_turn = embed_orthogonal(&block_rotation(&[PI]), &cfg).unwrap();
        assert_eq!(
            classify_isometry(&half_turn, &cfg).unwrap(),
            IsometryClass::Elliptic
        );
        let not_orth = DMatrix::from_diagonal(&DVector::from_vec(vec![1., 2.]));
        assert!(matches!(
            embed_orthogonal(&not_orth, &cfg),
            Err(Error::NotOrthogonal { .. })
        ));
    }

    #[test]
    fn embedding_is_a_homomorphism() {
        let cfg = ToleranceConfig::default();
        let q1 = block_rotation(&[0.3, 1.1]);
        let q2 = block_rotation(&[-0.7, 2.0]);
        let lhs = &embed_orthogonal(&q1, &cfg).unwrap() * &embed_orthogonal(&q2, &cfg).unwrap();
        let rhs = embed_orthogonal(&(&q1 * &q2), &cfg).unwrap();
        assert!(lhs.distance(&rhs) < 1e-14);
    }

    #[test]
    fn block_rotations() {
        assert_eq!(block_rotation(&[0.0]), DMatrix::identity(2, 2));
        let m = block_rotation(&[PI, 0.0]);
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![-1., -1., 1., 1.]));
        assert!((m - expected).amax() < 1e-15);
        for order in 2..9u32 {
            let r = block_rotation(&[0.0, 2.0 * PI / order as f64, 0.0]);
            let mut p = DMatrix::identity(6, 6);
            for _ in 0..order {
                p *= &r;
            }
            assert!((p - DMatrix::<f64>::identity(6, 6)).amax() < 1e-12);
        }
    }

    #[test]
    fn classify_identity() {
        let cfg = ToleranceConfig::default();
        assert_eq!(
            classify_isometry(&LorentzMatrix::identity(3), &cfg).unwrap(),
            IsometryClass::Identity
        );
    }

    #[test]
    fn classify_boost_and_parabolic() {
        let cfg = ToleranceConfig::default();
        let (c, s) = (1.5f64.cosh(), 1.5f64.sinh());
        let boost = LorentzMatrix::from_matrix(DMatrix::from_row_slice(
            3,
            3,
            &[c, 0., s, 0., 1., 0., s, 0., c],
        ))
        .unwrap();
        assert_eq!(
            classify_isometry(&boost, &cfg).unwrap(),
            IsometryClass::Loxodromic
        );
        // Product of reflections in two tangent hyperplanes.
        let v = cap(&[1., 0., 0.]);
        let w = cap(&[-1., 1., 1.]);
        let p = &w.reflection() * &v.reflection();
        assert!(verify_lorentz(&p, &cfg).pass);
        assert_eq!(
            classify_isometry(&p, &cfg).unwrap(),
            IsometryClass::Parabolic
        );
    }

    #[test]
    fn classify_rejects_non_lorentz() {
        let m = LorentzMatrix::from_matrix(DMatrix::identity(3, 3) * 2.0).unwrap();
        assert!(classify_isometry(&m, &ToleranceConfig::default()).is_err());
    }

    #[test]
    fn inverse_is_j_transpose_j() {
        let v = cap(&[2., 0., 3f64.sqrt()]);
        let w = cap(&[0., 1., 0.]);
        let m = &v.reflection() * &w.reflection();
        let prod = &m * &m.inverse();
        assert!(prod.distance_from_identity() < 1e-12);
    }

    #[test]
    fn fixed_subspace_of_half_turn_in_one_plane() {
        let cfg = ToleranceConfig::default();
        let m = embed_orthogonal(&block_rotation(&[PI, 0.0]), &cfg).unwrap();
        let f = common_fixed_subspace(&[m], &cfg).unwrap();
        assert_eq!(f.dim(), 3);
        assert_eq!(f.sphere_dim, 1);
    }

    #[test]
    fn fixed_subspace_of_klein_four_group() {
        let cfg = ToleranceConfig::default();
        let a = embed_orthogonal(&block_rotation(&[PI, 0.0]), &cfg).unwrap();
        let b = embed_orthogonal(&block_rotation(&[0.0, PI]), &cfg).unwrap();
        let f = common_fixed_subspace(&[a.clone(), b.clone()], &cfg).unwrap();
        assert_eq!(f.dim(), 1);
        assert_eq!(f.sphere_dim, -1);

        let pad = |m: &LorentzMatrix| {
            let q = m.entries().view((0, 0), (4, 4)).into_owned();
            embed_orthogonal(&pad_orthogonal(&q, 5), &cfg).unwrap()
        };
        let f5 = common_fixed_subspace(&[pad(&a), pad(&b)], &cfg).unwrap();
        assert_eq!(f5.sphere_dim, 0);
    }

    #[test]
    fn fixed_subspace_needs_input() {
        assert!(common_fixed_subspace(&[], &ToleranceConfig::default()).is_err());
    }

    #[test]
    fn cap_relations_in_the_plane() {
        let cfg = ToleranceConfig::default();
        let r3 = 3f64.sqrt();
        let v = cap(&[2., 0., r3]);
        let w = cap(&[-2., 0., r3]);
        assert_eq!(cap_relation(&v, &w, &cfg).unwrap(), CapRelation::Separated);
        let big = cap(&[2., 0., -r3]);
        assert_eq!(
            cap_relation(&v, &big, &cfg).unwrap(),
            CapRelation::FirstInsideSecond
        );
        assert_eq!(
            cap_relation(&big, &v, &cfg).unwrap(),
            CapRelation::SecondInsideFirst
        );
        assert_eq!(cap_relation(&v, &v, &cfg).unwrap(), CapRelation::Equal);
        assert_eq!(
            cap_relation(&v, &v.complement(), &cfg).unwrap(),
            CapRelation::Complementary
        );
        let big2 = cap(&[-2., 0., -r3]);
        assert_eq!(
            cap_relation(&big, &big2, &cfg).unwrap(),
            CapRelation::Covering
        );
        let h1 = cap(&[1., 0., 0.]);
        let h2 = cap(&[0., 1., 0.]);
        assert_eq!(
            cap_relation(&h1, &h2, &cfg).unwrap(),
            CapRelation::Intersecting
        );
    }

    #[test]
    fn ball_coordinates() {
        let cfg = ToleranceConfig::default();
        let b = cap_to_ball_coords(&cap(&[2., 0., 3f64.sqrt()]), &cfg).unwrap();
        assert!((b.center[0] - 1.0).abs() < 1e-15 && b.center[1].abs() < 1e-15);
        assert!((b.radius - PI / 6.0).abs() < 1e-15);
        let h = cap_to_ball_coords(&cap(&[1., 0., 0., 0.]), &cfg).unwrap();
        assert_eq!(h.center, vec![1., 0., 0.]);
        assert!((h.radius - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn from_ball_round_trips() {
        let cfg = ToleranceConfig::default();
        let c = CapNormal::from_ball(&[0.0, 3.0, 4.0], 0.4).unwrap();
        assert!((c.vector().norm_sq() - 1.0).abs() < 1e-12);
        let b = cap_to_ball_coords(&c, &cfg).unwrap();
        assert!((b.radius - 0.4).abs() < 1e-14);
        assert!((b.center[1] - 0.6).abs() < 1e-14 && (b.center[2] - 0.8).abs() < 1e-14);
    }

    #[test]
    fn offset_caps_contain_the_ray_endpoint() {
        let c = CapNormal::at_offset(&[1.0, 0.0, 0.0], 1.3).unwrap();
        assert!((c.vector().norm_sq() - 1.0).abs() < 1e-12);
        assert!(c.contains_boundary_point(&[1.0, 0.0, 0.0]));
        assert!(!c.contains_boundary_point(&[-1.0, 0.0, 0.0]));
        assert!((c.angular_radius() - (1.0 / 1.3f64.sinh()).atan()).abs() < 1e-14);
    }

    #[test]
    fn json_schema() {
        let m = LorentzMatrix::identity(2);
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(
            s,
            r#"{"dim":2,"entries":[1.0,0.0,0.0,0.0,1.0,0.0,0.0,0.0,1.0]}"#
        );
        let back: LorentzMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        let bad = serde_json::from_str::<LorentzMatrix>(r#"{"dim":2,"entries":[1.0]}"#);
        assert!(bad.is_err());
        let v: MinkowskiVector = serde_json::from_str(r#"{"dim":2,"entries":[1,0,0]}"#).unwrap();
        assert_eq!(v.dim(), 2);
    }
}
