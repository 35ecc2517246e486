//! Classical Schottky groups built from pairs of round caps on `S^{d-1}`.
//!
//! Caps are indexed `[B_1, D_1, B_2, D_2, ...]`; generator `f_i` maps the
//! complement of `B_i` onto `D_i`. A ping-pong certificate checks pairwise
//! separation of all caps and both pairing conditions with one Minkowski
//! product per pair.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lorentz::{
    cap_relation, cap_to_ball_coords, classify_isometry, minkowski_product, verify_lorentz,
    CapNormal, CapRelation, IsometryClass, LorentzCheck, LorentzMatrix, MinkowskiVector,
    ToleranceConfig,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Word residuals above this multiple of `tol_orth` are flagged as untrusted.
pub const RESIDUAL_FLAG_FACTOR: f64 = 1e3;

const PLACEMENT_ATTEMPTS: usize = 64;
const PLACEMENT_CANDIDATES: usize = 32;
const MIN_CAP_RADIUS: f64 = 1e-3;
const MAX_CAP_RADIUS: f64 = std::f64::consts::FRAC_PI_3;

/// A generator or its inverse: `+i` is `f_i`, `-i` is `f_i^{-1}` (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Letter(i32);

impl Letter {
    pub fn generator(index: usize) -> Self {
        Letter(index as i32 + 1)
    }

    pub fn inverse_of(index: usize) -> Self {
        Letter(-(index as i32 + 1))
    }

    /// Zero-based generator index.
    pub fn index(self) -> usize {
        self.0.unsigned_abs() as usize - 1
    }

    pub fn is_inverse(self) -> bool {
        self.0 < 0
    }

    pub fn inverse(self) -> Self {
        Letter(-self.0)
    }

    fn from_digit(d: usize) -> Self {
        if d.is_multiple_of(2) {
            Letter::generator(d / 2)
        } else {
            Letter::inverse_of(d / 2)
        }
    }
}

/// A word in the free generators, written left to right.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Word(pub Vec<Letter>);

impl Word {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_reduced(&self) -> bool {
        self.0.windows(2).all(|w| w[0] != w[1].inverse())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("e");
        }
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "f{}", l.index() + 1)?;
            if l.is_inverse() {
                f.write_str("^-1")?;
            }
        }
        Ok(())
    }
}

/// All freely reduced words of length at most `maxlen`, shortest first and
/// lexicographic within a length (`f1 < f1^-1 < f2 < ...`).
pub fn reduced_words(g: usize, maxlen: usize) -> ReducedWords {
    ReducedWords {
        letters: 2 * g,
        maxlen,
        current: None,
    }
}

#[derive(Debug, Clone)]
pub struct ReducedWords {
    letters: usize,
    maxlen: usize,
    current: Option<Vec<usize>>,
}

impl ReducedWords {
    fn smallest(&self, len: usize) -> Vec<usize> {
        self.smallest_after(&[], len)
    }

    fn advance(&self, digits: &mut [usize]) -> bool {
        let len = digits.len();
        for i in (0..len).rev() {
            let mut d = digits[i] + 1;
            while d < self.letters && i > 0 && digits[i - 1] == (d ^ 1) {
                d += 1;
            }
            if d < self.letters {
                digits[i] = d;
                let tail = self.smallest_after(&digits[..=i], len - i - 1);
                digits[i + 1..].copy_from_slice(&tail);
                return true;
            }
        }
        false
    }

    fn smallest_after(&self, prefix: &[usize], count: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(count);
        let mut prev = prefix.last().copied();
        for _ in 0..count {
            // Digit 0 only cancels against digit 1.
            let d = usize::from(prev == Some(1));
            out.push(d);
            prev = Some(d);
        }
        out
    }
}

impl Iterator for ReducedWords {
    type Item = Word;

    fn next(&mut self) -> Option<Word> {
        let next = match self.current.take() {
            None => Vec::new(),
            Some(mut digits) => {
                if self.advance(&mut digits) {
                    digits
                } else {
                    let len = digits.len() + 1;
                    if len > self.maxlen || self.letters == 0 {
                        self.current = Some(digits);
                        return None;
                    }
                    self.smallest(len)
                }
            }
        };
        let word = Word(next.iter().map(|&d| Letter::from_digit(d)).collect());
        self.current = Some(next);
        Some(word)
    }
}

/// Number of reduced words of length exactly `len` over `g` generators.
pub fn reduced_word_count(g: u64, len: u32) -> u64 {
    if len == 0 {
        1
    } else {
        2 * g * (2 * g - 1).pow(len - 1)
    }
}

/// The orientation-preserving product of two reflections mapping the
/// complement of `cap(source)` onto `cap(target)`.
pub fn pair_caps(
    source: &CapNormal,
    target: &CapNormal,
    cfg: &ToleranceConfig,
) -> Result<LorentzMatrix> {
    let relation = cap_relation(source, target, cfg)?;
    if relation != CapRelation::Separated {
        return Err(Error::CapsNotSeparated {
            first: 0,
            second: 1,
            relation: relation.to_string(),
        });
    }
    let t = minkowski_product(source.vector(), target.vector())?;
    let diff: Vec<f64> = source
        .vector()
        .coords()
        .iter()
        .zip(target.vector().coords())
        .map(|(a, b)| a - b)
        .collect();
    let scale = (2.0 - 2.0 * t).sqrt();
    let bisector = MinkowskiVector::new(diff.into_iter().map(|x| x / scale).collect())?;
    let bisector = CapNormal::new(bisector, cfg)
        .map_err(|e| Error::PairingFailed(format!("bisecting normal: {e}")))?;
    let f = &bisector.reflection() * &source.reflection();

    let check = verify_lorentz(&f, cfg);
    if !check.pass {
        return Err(Error::PairingFailed(format!(
            "generator residual {:e}",
            check.residual
        )));
    }
    let image = source.transformed(&f).complement();
    let rel = cap_relation(&image, target, cfg)?;
    if rel != CapRelation::Equal {
        return Err(Error::PairingFailed(format!(
            "image of the source complement is {rel} to the target"
        )));
    }
    Ok(f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorPair {
    pub source: CapNormal,
    pub target: CapNormal,
    pub generator: LorentzMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationWitness {
    pub first: usize,
    pub second: usize,
    pub inner_product: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingWitness {
    pub generator: usize,
    /// Normal of `f_i(complement of B_i)`.
    pub forward_image: CapNormal,
    pub forward_relation: CapRelation,
    /// Normal of `f_i^{-1}(complement of D_i)`.
    pub backward_image: CapNormal,
    pub backward_relation: CapRelation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PingPongWitness {
    pub tol_geom: f64,
    pub separations: Vec<SeparationWitness>,
    pub pairings: Vec<PairingWitness>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PingPongFailure {
    pub condition: String,
    pub first: usize,
    pub second: usize,
    pub relation: CapRelation,
    pub inner_product: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Certificate {
    Uncertified,
    Certified { witness: PingPongWitness },
    Failed { failure: PingPongFailure },
}

impl Certificate {
    pub fn is_certified(&self) -> bool {
        matches!(self, Certificate::Certified { .. })
    }

    pub fn status(&self) -> &'static str {
        match self {
            Certificate::Uncertified => "uncertified",
            Certificate::Certified { .. } => "certified",
            Certificate::Failed { .. } => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SchottkyJson", into = "SchottkyJson")]
pub struct SchottkyGroup {
    dim: usize,
    pairs: Vec<GeneratorPair>,
    inverses: Vec<LorentzMatrix>,
    certificate: Certificate,
}

#[derive(Serialize, Deserialize)]
struct SchottkyJson {
    schema_version: u32,
    dim: usize,
    genus: usize,
    pairs: Vec<GeneratorPair>,
    certificate: Certificate,
}

impl TryFrom<SchottkyJson> for SchottkyGroup {
    type Error = Error;

    fn try_from(json: SchottkyJson) -> Result<Self> {
        if json.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidParameter(format!(
                "unsupported schema_version {}",
                json.schema_version
            )));
        }
        if json.genus != json.pairs.len() {
            return Err(Error::InvalidParameter(format!(
                "genus {} does not match {} pairs",
                json.genus,
                json.pairs.len()
            )));
        }
        let mut group = SchottkyGroup::from_pairs_unchecked(json.dim, json.pairs)?;
        group.certificate = json.certificate;
        Ok(group)
    }
}

impl From<SchottkyGroup> for SchottkyJson {
    fn from(s: SchottkyGroup) -> Self {
        SchottkyJson {
            schema_version: SCHEMA_VERSION,
            dim: s.dim,
            genus: s.pairs.len(),
            pairs: s.pairs,
            certificate: s.certificate,
        }
    }
}

impl SchottkyGroup {
    /// Assembles a group without checking any geometric condition; the
    /// certificate starts out uncertified.
    pub fn from_pairs_unchecked(dim: usize, pairs: Vec<GeneratorPair>) -> Result<Self> {
        for p in &pairs {
            for found in [p.source.dim(), p.target.dim(), p.generator.dim()] {
                if found != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found,
                    });
                }
            }
        }
        let inverses = pairs.iter().map(|p| p.generator.inverse()).collect();
        Ok(Self {
            dim,
            pairs,
            inverses,
            certificate: Certificate::Uncertified,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn genus(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[GeneratorPair] {
        &self.pairs
    }

    pub fn certificate(&self) -> &Certificate {
        &self.certificate
    }

    /// Caps in the order `[B_1, D_1, B_2, D_2, ...]`.
    pub fn caps(&self) -> Vec<&CapNormal> {
        self.pairs
            .iter()
            .flat_map(|p| [&p.source, &p.target])
            .collect()
    }

    pub fn letter_matrix(&self, letter: Letter) -> &LorentzMatrix {
        if letter.is_inverse() {
            &self.inverses[letter.index()]
        } else {
            &self.pairs[letter.index()].generator
        }
    }

    /// Cap that `letter` maps the complement of its source into.
    pub fn target_cap(&self, letter: Letter) -> &CapNormal {
        let p = &self.pairs[letter.index()];
        if letter.is_inverse() {
            &p.source
        } else {
            &p.target
        }
    }

    pub fn evaluate(&self, word: &Word, cfg: &ToleranceConfig) -> WordEvaluation {
        let mut m = LorentzMatrix::identity(self.dim);
        for &l in &word.0 {
            m = &m * self.letter_matrix(l);
        }
        let check = verify_lorentz(&m, cfg);
        let flagged = check.relative_residual > RESIDUAL_FLAG_FACTOR * cfg.tol_orth;
        WordEvaluation {
            matrix: m,
            check,
            flagged,
        }
    }

    pub fn certify(&mut self, cfg: &ToleranceConfig) -> &Certificate {
        self.certificate = ping_pong_certificate(self, cfg);
        &self.certificate
    }
}

#[derive(Debug, Clone)]
pub struct WordEvaluation {
    pub matrix: LorentzMatrix,
    pub check: LorentzCheck,
    /// Set when the residual is too large for the matrix to be trusted.
    pub flagged: bool,
}

pub fn build_schottky(
    dim: usize,
    pairs: &[(CapNormal, CapNormal)],
    cfg: &ToleranceConfig,
) -> Result<SchottkyGroup> {
    let caps: Vec<&CapNormal> = pairs.iter().flat_map(|(b, d)| [b, d]).collect();
    for c in &caps {
        if c.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: c.dim(),
            });
        }
    }
    for i in 0..caps.len() {
        for j in i + 1..caps.len() {
            let rel = cap_relation(caps[i], caps[j], cfg)?;
            if rel != CapRelation::Separated {
                return Err(Error::CapsNotSeparated {
                    first: i,
                    second: j,
                    relation: rel.to_string(),
                });
            }
        }
    }
    let generators = pairs
        .iter()
        .map(|(b, d)| {
            Ok(GeneratorPair {
                source: b.clone(),
                target: d.clone(),
                generator: pair_caps(b, d, cfg)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut group = SchottkyGroup::from_pairs_unchecked(dim, generators)?;
    if pairs.is_empty() {
        group.certificate = ping_pong_certificate(&group, cfg);
    }
    Ok(group)
}

pub fn ping_pong_certificate(s: &SchottkyGroup, cfg: &ToleranceConfig) -> Certificate {
    match ping_pong_inner(s, cfg) {
        Ok(witness) => Certificate::Certified { witness },
        Err(failure) => Certificate::Failed { failure },
    }
}

fn ping_pong_inner(
    s: &SchottkyGroup,
    cfg: &ToleranceConfig,
) -> std::result::Result<PingPongWitness, PingPongFailure> {
    let caps = s.caps();
    let mut separations = Vec::new();
    for i in 0..caps.len() {
        for j in i + 1..caps.len() {
            let t = minkowski_product(caps[i].vector(), caps[j].vector()).unwrap_or(f64::NAN);
            let relation = cap_relation(caps[i], caps[j], cfg).unwrap_or(CapRelation::Intersecting);
            if relation != CapRelation::Separated {
                return Err(PingPongFailure {
                    condition: "pairwise separation".into(),
                    first: i,
                    second: j,
                    relation,
                    inner_product: t,
                });
            }
            separations.push(SeparationWitness {
                first: i,
                second: j,
                inner_product: t,
            });
        }
    }
    let accepted =
        |r: CapRelation| matches!(r, CapRelation::Equal | CapRelation::FirstInsideSecond);
    let mut pairings = Vec::new();
    for (i, (pair, inv)) in s.pairs.iter().zip(&s.inverses).enumerate() {
        let check = |image: &CapNormal, into: &CapNormal, condition: &str, first, second| {
            let relation = cap_relation(image, into, cfg).unwrap_or(CapRelation::Intersecting);
            if accepted(relation) {
                Ok(relation)
            } else {
                Err(PingPongFailure {
                    condition: condition.into(),
                    first,
                    second,
                    relation,
                    inner_product: minkowski_product(image.vector(), into.vector())
                        .unwrap_or(f64::NAN),
                })
            }
        };
        if pair.generator.orientation() != 1 {
            return Err(PingPongFailure {
                condition: "generator orientation".into(),
                first: 2 * i,
                second: 2 * i + 1,
                relation: CapRelation::Equal,
                inner_product: f64::NAN,
            });
        }
        let forward_image = pair.source.transformed(&pair.generator).complement();
        let forward_relation = check(
            &forward_image,
            &pair.target,
            "forward pairing",
            2 * i,
            2 * i + 1,
        )?;
        let backward_image = pair.target.transformed(inv).complement();
        let backward_relation = check(
            &backward_image,
            &pair.source,
            "backward pairing",
            2 * i + 1,
            2 * i,
        )?;
        pairings.push(PairingWitness {
            generator: i,
            forward_image,
            forward_relation,
            backward_image,
            backward_relation,
        });
    }
    Ok(PingPongWitness {
        tol_geom: cfg.tol_geom,
        separations,
        pairings,
    })
}

/// Result of evaluating every nonempty reduced word up to some length on the
/// hyperbolic origin.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WordAudit {
    pub maxlen: usize,
    pub words_checked: u64,
    /// Smallest `cosh(dist(o, w·o)) − 1` over all nonempty words.
    pub min_displacement: f64,
    pub tolerance: f64,
    /// Words that moved the origin by no more than the tolerance.
    pub fixed_origin: Vec<Word>,
}

impl WordAudit {
    pub fn pass(&self) -> bool {
        self.fixed_origin.is_empty()
    }
}

/// Checks that no nonempty reduced word of length `≤ maxlen` is the identity
/// by showing it moves the origin: `(w·o)_{d+1} = cosh dist(o, w·o) > 1`.
///
/// Words are grown on the left so each node costs one matrix-vector product,
/// and the leaves only need the timelike row.
pub fn nonidentity_audit(s: &SchottkyGroup, maxlen: usize, cfg: &ToleranceConfig) -> WordAudit {
    let g = s.genus();
    let d = s.dim;
    let letters: Vec<Letter> = (0..2 * g).map(Letter::from_digit).collect();
    let mats: Vec<Vec<f64>> = letters
        .iter()
        .map(|&l| {
            let m = s.letter_matrix(l).entries();
            (0..=d)
                .flat_map(|i| (0..=d).map(move |j| (i, j)))
                .map(|(i, j)| m[(i, j)])
                .collect()
        })
        .collect();
    let mut audit = WordAudit {
        maxlen,
        words_checked: 0,
        min_displacement: f64::INFINITY,
        tolerance: cfg.tol_classify,
        fixed_origin: Vec::new(),
    };
    if g == 0 || maxlen == 0 {
        return audit;
    }
    let mut stack = vec![0.0; (maxlen + 1) * (d + 1)];
    stack[d] = 1.0;
    let mut suffix = Vec::with_capacity(maxlen);
    let mut ctx = AuditCtx {
        d,
        maxlen,
        letters: &letters,
        mats: &mats,
        tol: cfg.tol_classify,
        audit: &mut audit,
    };
    ctx.descend(&mut stack, None, &mut suffix);
    audit
}

struct AuditCtx<'a> {
    d: usize,
    maxlen: usize,
    letters: &'a [Letter],
    mats: &'a [Vec<f64>],
    tol: f64,
    audit: &'a mut WordAudit,
}

impl AuditCtx<'_> {
    fn record(&mut self, cosh_dist: f64, first: usize, suffix: &[usize]) {
        let disp = cosh_dist - 1.0;
        self.audit.words_checked += 1;
        if disp < self.audit.min_displacement {
            self.audit.min_displacement = disp;
        }
        if disp.is_nan() || disp <= self.tol {
            let mut letters = vec![self.letters[first]];
            letters.extend(suffix.iter().rev().map(|&k| self.letters[k]));
            self.audit.fixed_origin.push(Word(letters));
        }
    }

    // Block `depth` of `stack` holds the image of the origin under the current
    // word; `suffix` holds its letters innermost first.
    fn descend(&mut self, stack: &mut [f64], first: Option<usize>, suffix: &mut Vec<usize>) {
        let n = self.d + 1;
        let depth = suffix.len();
        let mats = self.mats;
        for (k, m) in mats.iter().enumerate() {
            if first.is_some_and(|f| k == (f ^ 1)) {
                continue;
            }
            let (head, tail) = stack.split_at_mut((depth + 1) * n);
            let x = &head[depth * n..];
            if depth + 1 == self.maxlen {
                let row = &m[self.d * n..];
                let t: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
                self.record(t, k, suffix);
            } else {
                for (i, y) in tail[..n].iter_mut().enumerate() {
                    *y = m[i * n..(i + 1) * n]
                        .iter()
                        .zip(x)
                        .map(|(a, b)| a * b)
                        .sum();
                }
                let t = tail[self.d];
                self.record(t, k, suffix);
                suffix.push(k);
                self.descend(stack, Some(k), suffix);
                suffix.pop();
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitCap {
    pub word: Word,
    /// Index of the cap of the word with its last letter removed.
    pub parent: Option<usize>,
    pub normal: CapNormal,
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Caps `w(C)` for reduced words `w`, approximating the limit set from outside.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitSetSample {
    pub depth: usize,
    pub caps: Vec<LimitCap>,
}

impl LimitSetSample {
    /// Largest angular radius among caps of each word length `1..=depth`.
    pub fn max_radius_by_depth(&self) -> Vec<f64> {
        let mut out = vec![0.0f64; self.depth];
        for c in &self.caps {
            let slot = &mut out[c.word.len() - 1];
            *slot = slot.max(c.radius);
        }
        out
    }

    /// Indices of caps not strictly inside their parent cap.
    pub fn nesting_violations(&self, cfg: &ToleranceConfig) -> Vec<usize> {
        self.caps
            .iter()
            .enumerate()
            .filter_map(|(i, c)| {
                let p = c.parent?;
                let rel = cap_relation(&c.normal, &self.caps[p].normal, cfg).ok();
                (rel != Some(CapRelation::FirstInsideSecond)).then_some(i)
            })
            .collect()
    }
}

/// For a word `a_1 … a_n`, the cap `a_1 ⋯ a_{n-1}(C_{a_n})` where `C_a` is the
/// target cap of letter `a`. Caps of longer words nest inside their prefixes.
pub fn limit_set_sample(
    s: &SchottkyGroup,
    depth: usize,
    cfg: &ToleranceConfig,
) -> Result<LimitSetSample> {
    if !s.certificate.is_certified() {
        return Err(Error::Uncertified);
    }
    if depth == 0 {
        return Err(Error::InvalidParameter("depth must be at least 1".into()));
    }
    let letters: Vec<Letter> = (0..2 * s.genus()).map(Letter::from_digit).collect();
    let mut caps: Vec<LimitCap> = Vec::new();
    // (index into caps, word matrix) for the current level
    let mut level: Vec<(usize, LorentzMatrix)> = Vec::new();
    for &l in &letters {
        let normal = s.target_cap(l).clone();
        let ball = cap_to_ball_coords(&normal, cfg)?;
        caps.push(LimitCap {
            word: Word(vec![l]),
            parent: None,
            normal,
            center: ball.center,
            radius: ball.radius,
        });
        level.push((caps.len() - 1, s.letter_matrix(l).clone()));
    }
    for _ in 1..depth {
        let mut next = Vec::with_capacity(level.len() * letters.len().saturating_sub(1));
        for (parent, m) in &level {
            let last = *caps[*parent].word.0.last().expect("nonempty word");
            for &l in &letters {
                if l == last.inverse() {
                    continue;
                }
                let normal = s.target_cap(l).transformed(m);
                let ball = cap_to_ball_coords(&normal, cfg)?;
                let mut word = caps[*parent].word.clone();
                word.0.push(l);
                caps.push(LimitCap {
                    word,
                    parent: Some(*parent),
                    normal,
                    center: ball.center,
                    radius: ball.radius,
                });
                next.push((caps.len() - 1, m * s.letter_matrix(l)));
            }
        }
        level = next;
    }
    Ok(LimitSetSample { depth, caps })
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn angle(a: &[f64], b: &[f64]) -> f64 {
    let c: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    c.clamp(-1.0, 1.0).acos()
}

/// Places `2g` round caps of a common radius on `S^{d-1}` with pairwise angular
/// gaps of at least `separation`, pairs them up and certifies the result.
pub fn random_classical_schottky(
    g: usize,
    d: usize,
    seed: u64,
    separation: f64,
    cfg: &ToleranceConfig,
) -> Result<SchottkyGroup> {
    if g == 0 {
        return Err(Error::InvalidParameter("genus must be at least 1".into()));
    }
    if d < 2 {
        return Err(Error::DimensionTooSmall {
            d: d as u32,
            min: 2,
        });
    }
    if !(separation > 0.0 && separation.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "separation {separation} must be positive"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = 2 * g;
    for _ in 0..PLACEMENT_ATTEMPTS {
        let mut centers: Vec<Vec<f64>> = Vec::with_capacity(count);
        for _ in 0..count {
            let best = (0..PLACEMENT_CANDIDATES)
                .map(|_| {
                    let c = random_unit(&mut rng, d);
                    let score = centers
                        .iter()
                        .map(|p| angle(p, &c))
                        .fold(f64::INFINITY, f64::min);
                    (c, score)
                })
                .fold(None::<(Vec<f64>, f64)>, |best, cand| match best {
                    Some(b) if b.1 >= cand.1 => Some(b),
                    _ => Some(cand),
                })
                .expect("at least one candidate");
            centers.push(best.0);
        }
        let min_angle = (0..count)
            .flat_map(|i| (i + 1..count).map(move |j| (i, j)))
            .map(|(i, j)| angle(&centers[i], &centers[j]))
            .fold(f64::INFINITY, f64::min);
        let radius = ((min_angle - separation) / 2.0).min(MAX_CAP_RADIUS);
        if radius < MIN_CAP_RADIUS {
            continue;
        }
        let caps = centers
            .iter()
            .map(|c| CapNormal::from_ball(c, radius))
            .collect::<Result<Vec<_>>>()?;
        let pairs: Vec<(CapNormal, CapNormal)> = caps
            .chunks(2)
            .map(|c| (c[0].clone(), c[1].clone()))
            .collect();
        let mut group = build_schottky(d, &pairs, cfg)?;
        group.certify(cfg);
        return Ok(group);
    }
    Err(Error::Placement {
        caps: count,
        separation,
        attempts: PLACEMENT_ATTEMPTS,
    })
}

/// Classifies every nonempty reduced word of length `≤ maxlen`; all of them
/// should be loxodromic in a Schottky group.
pub fn loxodromic_audit(
    s: &SchottkyGroup,
    maxlen: usize,
    cfg: &ToleranceConfig,
) -> Result<Vec<(Word, IsometryClass)>> {
    reduced_words(s.genus(), maxlen)
        .skip(1)
        .map(|w| {
            let eval = s.evaluate(&w, cfg);
            let class = classify_isometry(&eval.matrix, cfg)?;
            Ok((w, class))
        })
        .collect()
}
