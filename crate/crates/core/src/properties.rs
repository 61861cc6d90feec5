//! Quantum properties as orthogonal projectors, and sample spaces built from them.

use std::borrow::Cow;
use std::collections::HashSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{Ket, Operator, C64};
use crate::tolerance::Tolerances;

#[derive(Clone, Debug, PartialEq)]
enum Repr {
    Dense(Operator),
    /// Diagonal in the computational basis: `mask[i]` says whether `e_i` is in the range.
    Diagonal(Vec<bool>),
}

/// An orthogonal projector (Hermitian and idempotent) with its cached rank.
///
/// Projectors diagonal in the computational basis are kept as a 0/1 mask so
/// that position sample spaces over a few hundred sites stay cheap; every
/// operation falls back to the dense matrix otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct Projector {
    repr: Repr,
    rank: usize,
}

impl Projector {
    /// Validates `op` as a projector.
    pub fn new(op: Operator, tol: &Tolerances) -> Result<Self> {
        let herm = op.hermitian_deviation();
        if herm > tol.herm.max(tol.proj) {
            return Err(Error::NotProjector(format!(
                "not Hermitian (max |P - P†| = {herm:.3e})"
            )));
        }
        let idem = (&op * &op).max_abs_diff(&op);
        if idem > tol.proj {
            return Err(Error::NotProjector(format!(
                "not idempotent (max |P² - P| = {idem:.3e})"
            )));
        }
        let tr = op.trace().re;
        let rank = tr.round();
        if (tr - rank).abs() > tol.proj.max(1e-9) {
            return Err(Error::NotProjector(format!("non-integer trace {tr}")));
        }
        Ok(Projector {
            repr: Repr::Dense(op),
            rank: rank as usize,
        })
    }

    /// Wraps an operator already known to be a projector, e.g. a product of
    /// commuting projectors.
    pub(crate) fn from_dense_unchecked(op: Operator) -> Self {
        let rank = op.trace().re.round().max(0.0) as usize;
        Projector {
            repr: Repr::Dense(op),
            rank,
        }
    }

    pub fn from_mask(mask: Vec<bool>) -> Self {
        assert!(!mask.is_empty());
        let rank = mask.iter().filter(|&&b| b).count();
        Projector {
            repr: Repr::Diagonal(mask),
            rank,
        }
    }

    /// Projector onto the span of the computational basis vectors `indices`.
    pub fn from_basis_indices(dim: usize, indices: &[usize]) -> Self {
        let mut mask = vec![false; dim];
        for &i in indices {
            mask[i] = true;
        }
        Projector::from_mask(mask)
    }

    /// Rank-1 projector `|k⟩⟨k| / ‖k‖²` onto the ray through `k`.
    pub fn from_ket(k: &Ket, tol: &Tolerances) -> Result<Self> {
        let n = k.normalized(tol)?;
        Ok(Projector {
            repr: Repr::Dense(n.outer(&n)),
            rank: 1,
        })
    }

    /// Projector onto the span of mutually orthonormal kets.
    pub fn from_orthonormal(kets: &[Ket], tol: &Tolerances) -> Result<Self> {
        let first = kets.first().ok_or(Error::ZeroVector)?;
        let mut op = Operator::zeros(first.dim());
        for (i, a) in kets.iter().enumerate() {
            for b in &kets[i..] {
                let overlap = a.inner(b)?;
                let want = if std::ptr::eq(a, b) { 1.0 } else { 0.0 };
                if (overlap - C64::new(want, 0.0)).norm() > tol.norm {
                    return Err(Error::NotProjector(
                        "spanning kets are not orthonormal".into(),
                    ));
                }
            }
            op = &op + &a.outer(a);
        }
        Ok(Projector {
            repr: Repr::Dense(op),
            rank: kets.len(),
        })
    }

    pub fn identity(dim: usize) -> Self {
        Projector::from_mask(vec![true; dim])
    }

    pub fn zero(dim: usize) -> Self {
        Projector::from_mask(vec![false; dim])
    }

    pub fn dim(&self) -> usize {
        match &self.repr {
            Repr::Dense(op) => op.dim(),
            Repr::Diagonal(mask) => mask.len(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_zero(&self) -> bool {
        self.rank == 0
    }

    pub fn is_identity(&self) -> bool {
        self.rank == self.dim()
    }

    pub fn operator(&self) -> Cow<'_, Operator> {
        match &self.repr {
            Repr::Dense(op) => Cow::Borrowed(op),
            Repr::Diagonal(mask) => Cow::Owned(Operator::diagonal(
                &mask
                    .iter()
                    .map(|&b| C64::new(if b { 1.0 } else { 0.0 }, 0.0))
                    .collect::<Vec<_>>(),
            )),
        }
    }

    pub fn into_operator(self) -> Operator {
        match self.repr {
            Repr::Dense(op) => op,
            Repr::Diagonal(_) => self.operator().into_owned(),
        }
    }

    /// The 0/1 mask when this projector is diagonal in the computational basis.
    pub fn diagonal_mask(&self) -> Option<&[bool]> {
        match &self.repr {
            Repr::Diagonal(mask) => Some(mask),
            Repr::Dense(_) => None,
        }
    }

    pub fn apply(&self, k: &Ket) -> Result<Ket> {
        match &self.repr {
            Repr::Dense(op) => op.apply(k),
            Repr::Diagonal(mask) => {
                if mask.len() != k.dim() {
                    return Err(Error::DimMismatch {
                        expected: mask.len(),
                        found: k.dim(),
                    });
                }
                let amps = mask
                    .iter()
                    .zip(k.amplitudes())
                    .map(|(&b, a)| if b { *a } else { C64::new(0.0, 0.0) })
                    .collect();
                Ket::new(amps)
            }
        }
    }

    /// `⟨k|P|k⟩`.
    pub fn expectation(&self, k: &Ket) -> Result<f64> {
        match &self.repr {
            Repr::Diagonal(mask) => {
                self.check_dim(k.dim())?;
                Ok(mask
                    .iter()
                    .zip(k.amplitudes())
                    .filter(|(&b, _)| b)
                    .map(|(_, a)| a.norm_sqr())
                    .sum())
            }
            Repr::Dense(op) => Ok(k.inner(&op.apply(k)?)?.re),
        }
    }

    /// Orthogonal complement `I - P`.
    pub fn negation(&self) -> Projector {
        match &self.repr {
            Repr::Diagonal(mask) => Projector::from_mask(mask.iter().map(|b| !b).collect()),
            Repr::Dense(op) => Projector {
                repr: Repr::Dense(&Operator::identity(op.dim()) - op),
                rank: op.dim() - self.rank,
            },
        }
    }

    /// The operator product `PQ`, which is a projector only when `P` and `Q` commute.
    pub fn product(&self, other: &Projector) -> Result<Operator> {
        self.check_dim(other.dim())?;
        Ok(&*self.operator() * &*other.operator())
    }

    /// `max |PQ - QP|`.
    pub fn commutator_norm(&self, other: &Projector) -> Result<f64> {
        self.check_dim(other.dim())?;
        if let (Repr::Diagonal(_), Repr::Diagonal(_)) = (&self.repr, &other.repr) {
            return Ok(0.0);
        }
        let (p, q) = (self.operator(), other.operator());
        Ok((&*p * &*q).max_abs_diff(&(&*q * &*p)))
    }

    pub fn compatible(&self, other: &Projector, tol: &Tolerances) -> Result<bool> {
        Ok(self.commutator_norm(other)? <= tol.proj)
    }

    /// `PQ`, the property "P AND Q". Refuses noncommuting inputs.
    pub fn conjunction(&self, other: &Projector, tol: &Tolerances) -> Result<Projector> {
        if !self.compatible(other, tol)? {
            return Err(Error::Incompatible {
                time: None,
                left: "P".into(),
                right: "Q".into(),
            });
        }
        Ok(self.conjunction_unchecked(other))
    }

    /// Product of projectors the caller has already found to commute.
    pub(crate) fn conjunction_unchecked(&self, other: &Projector) -> Projector {
        match (&self.repr, &other.repr) {
            (Repr::Diagonal(a), Repr::Diagonal(b)) => {
                Projector::from_mask(a.iter().zip(b).map(|(x, y)| *x && *y).collect())
            }
            _ => {
                let prod = &*self.operator() * &*other.operator();
                // Symmetrize away the rounding left by a numerically commuting pair.
                let op = (&prod + &prod.adjoint()).scale(C64::new(0.5, 0.0));
                if op.max_abs() <= 1e-14 {
                    return Projector::zero(op.dim());
                }
                Projector::from_dense_unchecked(op)
            }
        }
    }

    pub fn tensor(&self, other: &Projector) -> Projector {
        match (&self.repr, &other.repr) {
            (Repr::Diagonal(a), Repr::Diagonal(b)) => {
                let mut mask = Vec::with_capacity(a.len() * b.len());
                for x in a {
                    mask.extend(b.iter().map(|y| *x && *y));
                }
                Projector::from_mask(mask)
            }
            _ => Projector {
                repr: Repr::Dense(self.operator().tensor(&other.operator())),
                rank: self.rank * other.rank,
            },
        }
    }

    /// `‖P - Q‖_max`.
    pub fn max_abs_diff(&self, other: &Projector) -> f64 {
        match (&self.repr, &other.repr) {
            (Repr::Diagonal(a), Repr::Diagonal(b)) => {
                if a == b {
                    0.0
                } else {
                    1.0
                }
            }
            _ => self.operator().max_abs_diff(&other.operator()),
        }
    }

    /// `max |PQ|`, zero exactly when the properties are mutually exclusive.
    pub fn overlap_norm(&self, other: &Projector) -> Result<f64> {
        self.check_dim(other.dim())?;
        if let (Repr::Diagonal(a), Repr::Diagonal(b)) = (&self.repr, &other.repr) {
            return Ok(if a.iter().zip(b).any(|(x, y)| *x && *y) {
                1.0
            } else {
                0.0
            });
        }
        Ok(self.product(other)?.max_abs())
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if self.dim() != found {
            return Err(Error::DimMismatch {
                expected: self.dim(),
                found,
            });
        }
        Ok(())
    }
}

pub fn from_ket(k: &Ket, tol: &Tolerances) -> Result<Projector> {
    Projector::from_ket(k, tol)
}

pub fn negation(p: &Projector) -> Projector {
    p.negation()
}

pub fn compatible(p: &Projector, q: &Projector, tol: &Tolerances) -> Result<bool> {
    p.compatible(q, tol)
}

pub fn conjunction(p: &Projector, q: &Projector, tol: &Tolerances) -> Result<Projector> {
    p.conjunction(q, tol)
}

/// Checks that `projectors` are pairwise orthogonal and sum to the identity.
pub(crate) fn check_decomposition(projectors: &[&Projector], tol: &Tolerances) -> Result<()> {
    let dim = projectors[0].dim();
    for p in projectors {
        if p.dim() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                found: p.dim(),
            });
        }
    }
    let masks: Option<Vec<&[bool]>> = projectors.iter().map(|p| p.diagonal_mask()).collect();
    if let Some(masks) = masks {
        for i in 0..dim {
            match masks.iter().filter(|m| m[i]).count() {
                1 => {}
                0 => {
                    return Err(Error::NotDecomposition(format!(
                        "basis state {i} is not covered"
                    )))
                }
                _ => {
                    return Err(Error::NotDecomposition(format!(
                        "basis state {i} is covered more than once"
                    )))
                }
            }
        }
        return Ok(());
    }
    for (j, p) in projectors.iter().enumerate() {
        for (k, q) in projectors.iter().enumerate().skip(j + 1) {
            let overlap = p.overlap_norm(q)?;
            if overlap > tol.proj {
                return Err(Error::NotDecomposition(format!(
                    "members {j} and {k} are not mutually exclusive (max |PQ| = {overlap:.3e})"
                )));
            }
        }
    }
    let mut sum = Operator::zeros(dim);
    for p in projectors {
        sum = &sum + &*p.operator();
    }
    let gap = sum.max_abs_diff(&Operator::identity(dim));
    if gap > tol.proj {
        return Err(Error::NotDecomposition(format!(
            "projectors do not sum to the identity (max |ΣP - I| = {gap:.3e})"
        )));
    }
    Ok(())
}

/// A decomposition of the identity: labeled, mutually exclusive, exhaustive projectors.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSpace {
    projectors: Vec<Projector>,
    labels: Vec<String>,
}

impl SampleSpace {
    pub fn new(projectors: Vec<Projector>, labels: Vec<String>, tol: &Tolerances) -> Result<Self> {
        if projectors.is_empty() {
            return Err(Error::EmptySampleSpace);
        }
        if labels.len() != projectors.len() {
            return Err(Error::NotDecomposition(format!(
                "{} labels for {} projectors",
                labels.len(),
                projectors.len()
            )));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::NotDecomposition(format!("duplicate label {l:?}")));
            }
        }
        check_decomposition(&projectors.iter().collect::<Vec<_>>(), tol)?;
        Ok(SampleSpace { projectors, labels })
    }

    /// `{e_i⟩⟨e_i|}` labeled by `label(i)`.
    pub fn computational_basis(dim: usize, label: impl Fn(usize) -> String) -> Self {
        SampleSpace {
            projectors: (0..dim)
                .map(|i| Projector::from_basis_indices(dim, &[i]))
                .collect(),
            labels: (0..dim).map(label).collect(),
        }
    }

    /// Rank-1 projectors onto the members of an orthonormal basis.
    pub fn from_basis(kets: &[Ket], labels: Vec<String>, tol: &Tolerances) -> Result<Self> {
        let projectors = kets
            .iter()
            .map(|k| Projector::from_ket(k, tol))
            .collect::<Result<Vec<_>>>()?;
        SampleSpace::new(projectors, labels, tol)
    }

    /// `{P, I - P}`.
    pub fn binary(p: Projector, label: &str, negated: &str) -> Self {
        let q = p.negation();
        SampleSpace {
            projectors: vec![p, q],
            labels: vec![label.to_string(), negated.to_string()],
        }
    }

    pub fn dim(&self) -> usize {
        self.projectors[0].dim()
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    pub fn projectors(&self) -> &[Projector] {
        &self.projectors
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Projector)> {
        self.labels
            .iter()
            .map(String::as_str)
            .zip(self.projectors.iter())
    }

    pub fn get(&self, label: &str) -> Option<&Projector> {
        self.iter().find(|(l, _)| *l == label).map(|(_, p)| p)
    }

    pub fn rank_sum(&self) -> usize {
        self.projectors.iter().map(Projector::rank).sum()
    }
}

impl fmt::Display for SampleSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.labels.join(", "))
    }
}

/// Joins two event labels into the label of their conjunction.
pub(crate) fn conjoin_labels(a: &str, b: &str) -> String {
    if a == b || b == "I" {
        a.to_string()
    } else if a == "I" {
        b.to_string()
    } else {
        format!("{a}&{b}")
    }
}

/// Common refinement of two compatible sample spaces: all nonzero products.
pub fn refine(a: &SampleSpace, b: &SampleSpace, tol: &Tolerances) -> Result<SampleSpace> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let mut projectors = Vec::new();
    let mut labels = Vec::new();
    for (la, p) in a.iter() {
        for (lb, q) in b.iter() {
            if !p.compatible(q, tol)? {
                return Err(Error::Incompatible {
                    time: None,
                    left: la.to_string(),
                    right: lb.to_string(),
                });
            }
        }
    }
    for (la, p) in a.iter() {
        for (lb, q) in b.iter() {
            let pq = p.conjunction_unchecked(q);
            if pq.is_zero() || pq.operator().max_abs() <= tol.proj {
                continue;
            }
            projectors.push(pq);
            labels.push(conjoin_labels(la, lb));
        }
    }
    SampleSpace::new(projectors, labels, tol)
}

/// Born probabilities `⟨ψ₀|U† P_j U|ψ₀⟩` for every member of `space`.
pub fn born(psi0: &Ket, u: &Operator, space: &SampleSpace, tol: &Tolerances) -> Result<Vec<f64>> {
    if psi0.dim() != u.dim() {
        return Err(Error::DimMismatch {
            expected: u.dim(),
            found: psi0.dim(),
        });
    }
    if space.dim() != u.dim() {
        return Err(Error::DimMismatch {
            expected: u.dim(),
            found: space.dim(),
        });
    }
    if !psi0.is_normalized(tol.norm) {
        return Err(Error::NotNormalized {
            norm_sqr: psi0.norm_sqr(),
        });
    }
    u.check_unitary(tol)?;
    let evolved = u.apply(psi0)?;
    let probs = space
        .projectors()
        .iter()
        .map(|p| clamp_probability(p.expectation(&evolved)?, tol))
        .collect::<Result<Vec<_>>>()?;
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > tol.prob {
        return Err(Error::ProbabilityOutOfRange { value: total });
    }
    Ok(probs)
}

/// Clamps float noise into `[0, 1]`; anything further out is an error.
pub(crate) fn clamp_probability(p: f64, tol: &Tolerances) -> Result<f64> {
    if p < -tol.prob || p > 1.0 + tol.prob || p.is_nan() {
        return Err(Error::ProbabilityOutOfRange { value: p });
    }
    Ok(p.clamp(0.0, 1.0))
}
