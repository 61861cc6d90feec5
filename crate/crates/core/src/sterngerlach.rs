//! A four-time Stern-Gerlach model on spin ⊗ location ⊗ detector (2 × 4 × 3).
//!
//! Location states are the source `p0`, the magnet entrance `p1`, and the
//! upper/lower paths `u`/`l`. The detector is `ready` or has fired in the
//! upper (`U`) or lower (`L`) channel. The particle starts in `S_x = +1/2` at
//! the source with the detector ready, and the grid runs `t0 < t1 < t2 < t3`:
//!
//! * `T1`: source to magnet entrance, spin untouched.
//! * `T2`: the field gradient sends `z+` to `u` and `z-` to `l`.
//! * `T3`: a particle on `u` (`l`) fires the upper (lower) detector.
//!
//! Each step is a permutation of the 24 basis states. Basis states never reached
//! from the initial state are completed by swapping them with the image, so
//! every step is an involution on the two states it exchanges.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::histories::{HistoryFamily, Node};
use crate::linalg::{Ket, Operator};
use crate::properties::Projector;
use crate::tolerance::Tolerances;

pub const SPIN_LABELS: [&str; 2] = ["z+", "z-"];
pub const LOCATION_LABELS: [&str; 4] = ["p0", "p1", "u", "l"];
pub const DETECTOR_LABELS: [&str; 3] = ["ready", "U", "L"];
pub const DIM: usize = 24;

const P0: usize = 0;
const P1: usize = 1;
const UP: usize = 2;
const LOW: usize = 3;
const READY: usize = 0;
const FIRED_U: usize = 1;
const FIRED_L: usize = 2;

fn index(spin: usize, loc: usize, det: usize) -> usize {
    (spin * 4 + loc) * 3 + det
}

fn unflatten(i: usize) -> (usize, usize, usize) {
    (i / 12, (i / 3) % 4, i % 3)
}

fn swap(x: usize, a: usize, b: usize) -> usize {
    if x == a {
        b
    } else if x == b {
        a
    } else {
        x
    }
}

/// The named families: the four of the analysis and two variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FamilyName {
    /// `{I; u⊙U, l⊙L}`
    Fa,
    /// `{I; c; U, L}`
    Fb,
    /// `{z+⊙u⊙U, z-⊙l⊙L}`
    Fc,
    /// `{x+; I; U, L}`
    Fd,
    /// `Fc` with `I` in place of `u`/`l` at `t2`.
    FcPrime,
    /// `Fd` with `u`/`l` in place of `I` at `t2`.
    FdPrime,
}

impl FamilyName {
    pub const ALL: [FamilyName; 6] = [
        FamilyName::Fa,
        FamilyName::Fb,
        FamilyName::Fc,
        FamilyName::Fd,
        FamilyName::FcPrime,
        FamilyName::FdPrime,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FamilyName::Fa => "Fa",
            FamilyName::Fb => "Fb",
            FamilyName::Fc => "Fc",
            FamilyName::Fd => "Fd",
            FamilyName::FcPrime => "Fc_prime",
            FamilyName::FdPrime => "Fd_prime",
        }
    }
}

impl FromStr for FamilyName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FamilyName::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::UnknownFamily(s.to_string()))
    }
}

impl fmt::Display for FamilyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug)]
pub struct SgModel {
    initial: Ket,
    steps: [Operator; 3],
    projectors: BTreeMap<&'static str, Arc<Projector>>,
}

impl SgModel {
    pub fn build(tol: &Tolerances) -> Result<Self> {
        let t1 = Operator::permutation(DIM, |i| {
            let (s, l, d) = unflatten(i);
            index(s, swap(l, P0, P1), d)
        });
        let t2 = Operator::permutation(DIM, |i| {
            let (s, l, d) = unflatten(i);
            let target = if s == 0 { UP } else { LOW };
            index(s, swap(l, P1, target), d)
        });
        let t3 = Operator::permutation(DIM, |i| {
            let (s, l, d) = unflatten(i);
            let d = match l {
                UP => swap(d, READY, FIRED_U),
                LOW => swap(d, READY, FIRED_L),
                _ => d,
            };
            index(s, l, d)
        });

        let x_plus = Ket::from_real(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2])?;
        let x_minus = Ket::from_real(&[FRAC_1_SQRT_2, -FRAC_1_SQRT_2])?;
        let initial = x_plus
            .tensor(&Ket::basis(4, P0))
            .tensor(&Ket::basis(3, READY));

        let spin = |p: Projector| p.tensor(&Projector::identity(12));
        let loc = |i: usize| {
            Projector::identity(2)
                .tensor(&Projector::from_basis_indices(4, &[i]))
                .tensor(&Projector::identity(3))
        };
        let det = |i: usize| Projector::identity(8).tensor(&Projector::from_basis_indices(3, &[i]));
        let coherent = t2.apply(&t1.apply(&initial)?)?;

        let mut projectors = BTreeMap::new();
        projectors.insert("I", Projector::identity(DIM));
        projectors.insert("x+", spin(Projector::from_ket(&x_plus, tol)?));
        projectors.insert("x-", spin(Projector::from_ket(&x_minus, tol)?));
        projectors.insert("z+", spin(Projector::from_basis_indices(2, &[0])));
        projectors.insert("z-", spin(Projector::from_basis_indices(2, &[1])));
        projectors.insert("u", loc(UP));
        projectors.insert("l", loc(LOW));
        projectors.insert("U", det(FIRED_U));
        projectors.insert("L", det(FIRED_L));
        projectors.insert("c", Projector::from_ket(&coherent, tol)?);

        let model = SgModel {
            initial,
            steps: [t1, t2, t3],
            projectors: projectors
                .into_iter()
                .map(|(k, v)| (k, Arc::new(v)))
                .collect(),
        };
        for step in &model.steps {
            step.check_unitary(tol)?;
        }
        Ok(model)
    }

    /// `|x+⟩ ⊗ |p0⟩ ⊗ |ready⟩`.
    pub fn initial(&self) -> &Ket {
        &self.initial
    }

    /// `[T1, T2, T3]`.
    pub fn steps(&self) -> &[Operator; 3] {
        &self.steps
    }

    /// `T_t ⋯ T_1`, the identity for `t = 0`.
    pub fn staged(&self, t: usize) -> Result<Operator> {
        if t > 3 {
            return Err(Error::OutOfRange(format!(
                "the model ends at t3, got t = {t}"
            )));
        }
        Ok(self.steps[..t]
            .iter()
            .fold(Operator::identity(DIM), |acc, u| u * &acc))
    }

    pub fn projector(&self, name: &str) -> Option<&Arc<Projector>> {
        self.projectors.get(name)
    }

    /// Named projectors `I, L, U, c, l, u, x+, x-, z+, z-` in name order.
    pub fn projectors(&self) -> impl Iterator<Item = (&'static str, &Arc<Projector>)> {
        self.projectors.iter().map(|(k, v)| (*k, v))
    }

    pub fn basis_ket(spin: &str, loc: &str, det: &str) -> Option<Ket> {
        let s = SPIN_LABELS.iter().position(|x| *x == spin)?;
        let l = LOCATION_LABELS.iter().position(|x| *x == loc)?;
        let d = DETECTOR_LABELS.iter().position(|x| *x == det)?;
        Some(Ket::basis(DIM, index(s, l, d)))
    }

    /// `z+&p0&ready` style label of basis state `i`.
    pub fn basis_label(i: usize) -> String {
        let (s, l, d) = unflatten(i);
        format!(
            "{}&{}&{}",
            SPIN_LABELS[s], LOCATION_LABELS[l], DETECTOR_LABELS[d]
        )
    }

    /// Branch tree of a named family, roots at `t1`, labels naming projectors
    /// of this model.
    pub fn family_tree(&self, name: FamilyName) -> Vec<Node> {
        let n = |label: &str| {
            let p = self.projectors[label].clone();
            Node::shared(label, p)
        };
        match name {
            FamilyName::Fa => {
                vec![n("I").then(vec![n("u").then(vec![n("U")]), n("l").then(vec![n("L")])])]
            }
            FamilyName::Fb => vec![n("I").then(vec![n("c").then(vec![n("U"), n("L")])])],
            FamilyName::Fc => vec![
                n("z+").then(vec![n("u").then(vec![n("U")])]),
                n("z-").then(vec![n("l").then(vec![n("L")])]),
            ],
            FamilyName::Fd => vec![n("x+").then(vec![n("I").then(vec![n("U"), n("L")])])],
            FamilyName::FcPrime => vec![
                n("z+").then(vec![n("I").then(vec![n("U")])]),
                n("z-").then(vec![n("I").then(vec![n("L")])]),
            ],
            FamilyName::FdPrime => {
                vec![n("x+").then(vec![n("u").then(vec![n("U")]), n("l").then(vec![n("L")])])]
            }
        }
    }

    pub fn family(&self, name: FamilyName, tol: &Tolerances) -> Result<HistoryFamily> {
        HistoryFamily::from_tree(
            self.initial.clone(),
            self.steps.to_vec(),
            self.family_tree(name),
            tol,
        )
    }
}

pub fn build_sg_model(tol: &Tolerances) -> Result<SgModel> {
    SgModel::build(tol)
}
