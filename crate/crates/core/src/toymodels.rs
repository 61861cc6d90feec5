//! Discrete-time hopping models on a periodic lattice: a plain shift, a shift
//! with a decaying site at `m = 0`, and a toy detector whose pointer is kicked
//! when the particle passes a trigger site.
//!
//! Sites `m ∈ [-M, M]` map to basis index `m + M`. The coupled particle ⊗
//! pointer space flattens `(m, n)` to `(m + M)(2N + 1) + (n + N)`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::histories::{Event, History, HistoryFamily};
use crate::linalg::{Ket, Operator, C64};
use crate::properties::{born, Projector, SampleSpace};
use crate::tolerance::Tolerances;

/// Particle lattice with decay amplitudes `alpha` (stay) and `beta` (escape).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToyLattice {
    half_width: usize,
    alpha: C64,
    beta: C64,
}

impl ToyLattice {
    pub fn new(half_width: usize, alpha: C64, beta: C64, tol: &Tolerances) -> Result<Self> {
        if half_width < 1 {
            return Err(Error::OutOfRange(
                "lattice half-width M must be at least 1".into(),
            ));
        }
        let norm = alpha.norm_sqr() + beta.norm_sqr();
        if (norm - 1.0).abs() > tol.norm {
            return Err(Error::OutOfRange(format!(
                "|alpha|² + |beta|² = {norm}, expected 1"
            )));
        }
        Ok(ToyLattice {
            half_width,
            alpha,
            beta,
        })
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn alpha(&self) -> C64 {
        self.alpha
    }

    pub fn beta(&self) -> C64 {
        self.beta
    }

    pub fn dim(&self) -> usize {
        2 * self.half_width + 1
    }

    pub fn index(&self, m: i64) -> usize {
        site_index(self.half_width, m)
    }

    pub fn site(&self, index: usize) -> i64 {
        index as i64 - self.half_width as i64
    }

    pub fn sites(&self) -> impl Iterator<Item = i64> {
        let m = self.half_width as i64;
        -m..=m
    }

    pub fn ket(&self, m: i64) -> Ket {
        Ket::basis(self.dim(), self.index(m))
    }
}

/// Pointer lattice `n ∈ [-N, N]`; `n = 0` is the ready state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ToyDetector {
    half_width: usize,
    trigger_site: i64,
}

impl ToyDetector {
    pub const DEFAULT_TRIGGER: i64 = 2;

    pub fn new(half_width: usize) -> Result<Self> {
        ToyDetector::with_trigger(half_width, Self::DEFAULT_TRIGGER)
    }

    pub fn with_trigger(half_width: usize, trigger_site: i64) -> Result<Self> {
        if half_width < 1 {
            return Err(Error::OutOfRange(
                "pointer half-width N must be at least 1".into(),
            ));
        }
        Ok(ToyDetector {
            half_width,
            trigger_site,
        })
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn trigger_site(&self) -> i64 {
        self.trigger_site
    }

    pub fn dim(&self) -> usize {
        2 * self.half_width + 1
    }

    pub fn index(&self, n: i64) -> usize {
        site_index(self.half_width, n)
    }

    pub fn site(&self, index: usize) -> i64 {
        index as i64 - self.half_width as i64
    }

    pub fn sites(&self) -> impl Iterator<Item = i64> {
        let n = self.half_width as i64;
        -n..=n
    }

    pub fn ket(&self, n: i64) -> Ket {
        Ket::basis(self.dim(), self.index(n))
    }
}

fn site_index(half_width: usize, m: i64) -> usize {
    let w = half_width as i64;
    assert!((-w..=w).contains(&m), "site {m} outside [-{w}, {w}]");
    (m + w) as usize
}

/// `S|m⟩ = |m+1⟩` with `S|M⟩ = |-M⟩`.
pub fn shift_operator(half_width: usize) -> Operator {
    assert!(half_width >= 1);
    let dim = 2 * half_width + 1;
    Operator::permutation(dim, |j| (j + 1) % dim)
}

/// The shift with `S|0⟩ = α|0⟩ + β|1⟩` and `S|-1⟩ = -β*|0⟩ + α*|1⟩`.
pub fn decay_operator(lat: &ToyLattice) -> Operator {
    let dim = lat.dim();
    let (zero, one, minus_one) = (lat.index(0), lat.index(1), lat.index(-1));
    let (a, b) = (lat.alpha, lat.beta);
    Operator::from_columns(dim, |j| {
        if j == zero {
            vec![(zero, a), (one, b)]
        } else if j == minus_one {
            vec![(zero, -b.conj()), (one, a.conj())]
        } else {
            vec![((j + 1) % dim, C64::new(1.0, 0.0))]
        }
    })
}

/// Pointer shift: `S'|n⟩ = |n+1⟩` except `S'|0⟩ = |0⟩`, `S'|-1⟩ = |1⟩`, `S'|N⟩ = |-N⟩`.
pub fn detector_shift(det: &ToyDetector) -> Operator {
    let dim = det.dim();
    let (zero, one, minus_one) = (det.index(0), det.index(1), det.index(-1));
    Operator::permutation(dim, |j| {
        if j == zero {
            zero
        } else if j == minus_one {
            one
        } else {
            (j + 1) % dim
        }
    })
}

/// Swaps `|s⟩⊗|0⟩ ↔ |s⟩⊗|1⟩` for the trigger site `s`; identity elsewhere.
pub fn trigger_operator(lat: &ToyLattice, det: &ToyDetector) -> Result<Operator> {
    let w = lat.half_width as i64;
    if !(-w..=w).contains(&det.trigger_site) {
        return Err(Error::OutOfRange(format!(
            "trigger site {} outside the lattice [-{w}, {w}]",
            det.trigger_site
        )));
    }
    let nd = det.dim();
    let ready = lat.index(det.trigger_site) * nd + det.index(0);
    let kicked = lat.index(det.trigger_site) * nd + det.index(1);
    Ok(Operator::permutation(lat.dim() * nd, |j| {
        if j == ready {
            kicked
        } else if j == kicked {
            ready
        } else {
            j
        }
    }))
}

/// One step of the coupled dynamics, `T = (S ⊗ I) R (I ⊗ S')`: the pointer
/// moves first, then the trigger acts, then the particle hops.
pub fn coupled_step(lat: &ToyLattice, det: &ToyDetector) -> Result<Operator> {
    let particle = decay_operator(lat).tensor(&Operator::identity(det.dim()));
    let pointer = Operator::identity(lat.dim()).tensor(&detector_shift(det));
    let r = trigger_operator(lat, det)?;
    Ok(&(&particle * &r) * &pointer)
}

/// `|m = 0⟩ ⊗ |n = 0⟩`.
pub fn coupled_initial_state(lat: &ToyLattice, det: &ToyDetector) -> Ket {
    lat.ket(0).tensor(&det.ket(0))
}

/// Applies `step` to `state` `t` times.
pub fn evolve(step: &Operator, state: &Ket, t: usize) -> Result<Ket> {
    let mut state = state.clone();
    for _ in 0..t {
        state = step.apply(&state)?;
    }
    Ok(state)
}

/// Closed-form `T^t|0⟩` for the decaying lattice: `α^t` on `|0⟩` and `βα^{t-k}`
/// on `|k⟩` for `1 ≤ k ≤ t`. Valid while the wavefront stays off the boundary.
pub fn decay_closed_form(lat: &ToyLattice, t: usize) -> Result<Ket> {
    if t >= lat.half_width {
        return Err(Error::OutOfRange(format!(
            "closed form needs t < M = {}, got t = {t}",
            lat.half_width
        )));
    }
    let mut amps = vec![C64::new(0.0, 0.0); lat.dim()];
    amps[lat.index(0)] = lat.alpha.powu(t as u32);
    for k in 1..=t {
        amps[lat.index(k as i64)] = lat.beta * lat.alpha.powu((t - k) as u32);
    }
    Ket::new(amps)
}

/// Checks `trigger + 1 ≤ t < M - 1` and `t - trigger < N`, the range in which
/// the coupled closed form holds and nothing wraps around.
pub fn check_coupled_range(lat: &ToyLattice, det: &ToyDetector, t: usize) -> Result<()> {
    let s = det.trigger_site;
    if s < 1 {
        return Err(Error::OutOfRange(format!(
            "closed form needs a trigger site ≥ 1, got {s}"
        )));
    }
    let t = t as i64;
    let (m, n) = (lat.half_width as i64, det.half_width as i64);
    if t < s + 1 || t >= m - 1 || t - s >= n {
        return Err(Error::OutOfRange(format!(
            "need {} ≤ t < {} and t - {s} < N = {n}, got t = {t}",
            s + 1,
            m - 1
        )));
    }
    Ok(())
}

/// Closed-form `T^t (|0⟩ ⊗ |0⟩)` for the coupled model:
///
/// ```text
/// [α^t|0⟩ + Σ_{k=1..s} βα^{t-k}|k⟩] ⊗ |0⟩ + β Σ_{k=s+1..t} α^{t-k} |k⟩ ⊗ |k - s⟩
/// ```
///
/// with trigger site `s` (2 by default).
pub fn coupled_closed_form(lat: &ToyLattice, det: &ToyDetector, t: usize) -> Result<Ket> {
    check_coupled_range(lat, det, t)?;
    let nd = det.dim();
    let s = det.trigger_site as usize;
    let idx = |m: usize, n: usize| lat.index(m as i64) * nd + det.index(n as i64);
    let (a, b) = (lat.alpha, lat.beta);
    let mut amps = vec![C64::new(0.0, 0.0); lat.dim() * nd];
    amps[idx(0, 0)] = a.powu(t as u32);
    for k in 1..=s {
        amps[idx(k, 0)] = b * a.powu((t - k) as u32);
    }
    for k in s + 1..=t {
        amps[idx(k, k - s)] = b * a.powu((t - k) as u32);
    }
    Ket::new(amps)
}

/// Joint position distribution `Pr(m, n)` of particle and pointer at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDistribution {
    lattice: ToyLattice,
    detector: ToyDetector,
    t: usize,
    probs: Vec<f64>,
}

impl JointDistribution {
    pub fn time(&self) -> usize {
        self.t
    }

    pub fn prob(&self, m: i64, n: i64) -> f64 {
        self.probs[self.lattice.index(m) * self.detector.dim() + self.detector.index(n)]
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn pointer_marginal(&self, n: i64) -> f64 {
        self.lattice.sites().map(|m| self.prob(m, n)).sum()
    }

    pub fn particle_marginal(&self, m: i64) -> f64 {
        self.detector.sites().map(|n| self.prob(m, n)).sum()
    }

    /// `Pr(m ∈ sites | pointer at n)`.
    pub fn particle_given_pointer(
        &self,
        sites: impl Fn(i64) -> bool,
        n: i64,
        tol: &Tolerances,
    ) -> Result<f64> {
        let given = self.pointer_marginal(n);
        if given <= tol.prob {
            return Err(Error::NullConditioning { probability: given });
        }
        let both: f64 = self
            .lattice
            .sites()
            .filter(|&m| sites(m))
            .map(|m| self.prob(m, n))
            .sum();
        Ok((both / given).clamp(0.0, 1.0))
    }

    /// Nonzero entries as `(m, n, probability)` in basis order.
    pub fn support(&self, eps: f64) -> Vec<(i64, i64, f64)> {
        let nd = self.detector.dim();
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > eps)
            .map(|(i, &p)| (self.lattice.site(i / nd), self.detector.site(i % nd), p))
            .collect()
    }
}

/// Born probabilities of the product-position sample space `{|m⟩⟨m| ⊗ |n⟩⟨n|}`
/// at time `t`, starting from `|0⟩ ⊗ |0⟩`.
pub fn joint_distribution(
    lat: &ToyLattice,
    det: &ToyDetector,
    t: usize,
    tol: &Tolerances,
) -> Result<JointDistribution> {
    check_coupled_range(lat, det, t)?;
    let u = coupled_step(lat, det)?.pow(t as u32);
    let space = SampleSpace::computational_basis(lat.dim() * det.dim(), |i| {
        position_label(lat.site(i / det.dim()), det.site(i % det.dim()))
    });
    let probs = born(&coupled_initial_state(lat, det), &u, &space, tol)?;
    Ok(JointDistribution {
        lattice: *lat,
        detector: *det,
        t,
        probs,
    })
}

fn position_label(m: i64, n: i64) -> String {
    format!("m={m}&n={n}")
}

/// Family on the grid `t1..tt` (one coupled step each) whose only events are
/// the product positions `m=..&n=..` at time `t`.
pub fn position_family(
    lat: &ToyLattice,
    det: &ToyDetector,
    t: usize,
    tol: &Tolerances,
) -> Result<HistoryFamily> {
    if t == 0 {
        return Err(Error::OutOfRange("position family needs t ≥ 1".into()));
    }
    let step = coupled_step(lat, det)?;
    let dim = lat.dim() * det.dim();
    let histories = (0..dim)
        .map(|i| {
            let label = position_label(lat.site(i / det.dim()), det.site(i % det.dim()));
            let p = Arc::new(Projector::from_basis_indices(dim, &[i]));
            History::new(vec![Event::new(t, label, p)])
        })
        .collect();
    HistoryFamily::new(
        coupled_initial_state(lat, det),
        vec![step; t],
        histories,
        tol,
    )
}

/// Family whose only events are the pointer positions `n=..` at time `t`.
pub fn pointer_family(
    lat: &ToyLattice,
    det: &ToyDetector,
    t: usize,
    tol: &Tolerances,
) -> Result<HistoryFamily> {
    if t == 0 {
        return Err(Error::OutOfRange("pointer family needs t ≥ 1".into()));
    }
    let step = coupled_step(lat, det)?;
    let everywhere = Projector::identity(lat.dim());
    let histories = det
        .sites()
        .map(|n| {
            let p = everywhere.tensor(&Projector::from_basis_indices(det.dim(), &[det.index(n)]));
            History::new(vec![Event::new(t, format!("n={n}"), Arc::new(p))])
        })
        .collect();
    HistoryFamily::new(
        coupled_initial_state(lat, det),
        vec![step; t],
        histories,
        tol,
    )
}

/// Family whose only events are the particle positions `m=..` at time `t`,
/// with the detector attached.
pub fn particle_family(
    lat: &ToyLattice,
    det: &ToyDetector,
    t: usize,
    tol: &Tolerances,
) -> Result<HistoryFamily> {
    if t == 0 {
        return Err(Error::OutOfRange("particle family needs t ≥ 1".into()));
    }
    let step = coupled_step(lat, det)?;
    let anywhere = Projector::identity(det.dim());
    let histories = lat
        .sites()
        .map(|m| {
            let p = Projector::from_basis_indices(lat.dim(), &[lat.index(m)]).tensor(&anywhere);
            History::new(vec![Event::new(t, format!("m={m}"), Arc::new(p))])
        })
        .collect();
    HistoryFamily::new(
        coupled_initial_state(lat, det),
        vec![step; t],
        histories,
        tol,
    )
}

/// Decaying particle alone: positions `m=..` at time `t`, starting from `|0⟩`.
pub fn decay_family(lat: &ToyLattice, t: usize, tol: &Tolerances) -> Result<HistoryFamily> {
    if t == 0 {
        return Err(Error::OutOfRange("decay family needs t ≥ 1".into()));
    }
    let dim = lat.dim();
    let histories = lat
        .sites()
        .map(|m| {
            let p = Projector::from_basis_indices(dim, &[lat.index(m)]);
            History::new(vec![Event::new(t, format!("m={m}"), Arc::new(p))])
        })
        .collect();
    HistoryFamily::new(lat.ket(0), vec![decay_operator(lat); t], histories, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::histories::{Condition, EventSet};

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn lattice(m: usize) -> ToyLattice {
        ToyLattice::new(
            m,
            C64::new(0.9f64.sqrt(), 0.0),
            C64::new(0.0, 0.1f64.sqrt()),
            &tol(),
        )
        .unwrap()
    }

    #[test]
    fn shift_examples() {
        let s = shift_operator(4);
        let lat = lattice(4);
        assert_eq!(s.apply(&lat.ket(1)).unwrap(), lat.ket(2));
        assert_eq!(s.apply(&lat.ket(4)).unwrap(), lat.ket(-4));
        assert_eq!(s.pow(9), Operator::identity(9));
    }

    #[test]
    fn decay_without_escape_keeps_sites_zero_and_one() {
        let lat = ToyLattice::new(3, C64::new(1.0, 0.0), C64::new(0.0, 0.0), &tol()).unwrap();
        let s = decay_operator(&lat);
        assert_eq!(s.apply(&lat.ket(0)).unwrap(), lat.ket(0));
        assert_eq!(s.apply(&lat.ket(-1)).unwrap(), lat.ket(1));
        assert_eq!(s.apply(&lat.ket(2)).unwrap(), lat.ket(3));
        // The plain shift would send 0 to 1 instead.
        assert_ne!(s, shift_operator(3));
    }

    #[test]
    fn decay_rejects_unnormalized_amplitudes() {
        let one = C64::new(1.0, 0.0);
        assert!(matches!(
            ToyLattice::new(3, one, one, &tol()),
            Err(Error::OutOfRange(_))
        ));
    }

    #[test]
    fn decay_matches_closed_form() {
        let lat = lattice(10);
        let s = decay_operator(&lat);
        assert!(s.is_unitary(1e-12));
        for t in 0..10 {
            let got = evolve(&s, &lat.ket(0), t).unwrap();
            let want = decay_closed_form(&lat, t).unwrap();
            assert!(got.max_abs_diff(&want) < 1e-12, "t = {t}");
        }
        assert!(decay_closed_form(&lat, 10).is_err());
    }

    #[test]
    fn survival_probability_via_born() {
        let lat = lattice(10);
        let fam = decay_family(&lat, 3, &tol()).unwrap();
        let p = fam
            .probability_of(&EventSet::single("m=0", 3), Condition::Medium, &tol())
            .unwrap();
        assert!((p - 0.9f64.powi(3)).abs() < 1e-12);
    }

    #[test]
    fn detector_shift_examples() {
        let det = ToyDetector::new(4).unwrap();
        let s = detector_shift(&det);
        assert_eq!(s.apply(&det.ket(0)).unwrap(), det.ket(0));
        assert_eq!(s.apply(&det.ket(1)).unwrap(), det.ket(2));
        assert_eq!(s.apply(&det.ket(-1)).unwrap(), det.ket(1));
        assert_eq!(s.apply(&det.ket(4)).unwrap(), det.ket(-4));
        assert!(s.is_unitary(0.0));
    }

    #[test]
    fn coupled_step_examples() {
        let lat = lattice(8);
        let det = ToyDetector::new(5).unwrap();
        let t = coupled_step(&lat, &det).unwrap();
        assert!(t.is_unitary(1e-12));
        let at = |m: i64, n: i64| lat.ket(m).tensor(&det.ket(n));
        assert_eq!(t.apply(&at(2, 0)).unwrap(), at(3, 1));
        assert_eq!(t.apply(&at(5, 0)).unwrap(), at(6, 0));
        assert_eq!(t.apply(&at(3, 1)).unwrap(), at(4, 2));
    }

    #[test]
    fn trigger_outside_lattice_is_rejected() {
        let lat = lattice(3);
        let det = ToyDetector::with_trigger(3, 7).unwrap();
        assert!(coupled_step(&lat, &det).is_err());
    }

    #[test]
    fn coupled_matches_closed_form_with_moved_trigger() {
        let lat = lattice(12);
        let det = ToyDetector::with_trigger(10, 4).unwrap();
        let step = coupled_step(&lat, &det).unwrap();
        for t in 5..11 {
            let got = evolve(&step, &coupled_initial_state(&lat, &det), t).unwrap();
            let want = coupled_closed_form(&lat, &det, t).unwrap();
            assert!(got.max_abs_diff(&want) < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn coupled_range_guard() {
        let lat = lattice(8);
        let det = ToyDetector::new(4).unwrap();
        assert!(check_coupled_range(&lat, &det, 2).is_err());
        assert!(check_coupled_range(&lat, &det, 5).is_ok());
        assert!(check_coupled_range(&lat, &det, 6).is_err()); // t - 2 = N
        assert!(check_coupled_range(&lattice(6), &ToyDetector::new(9).unwrap(), 5).is_err());
    }

    #[test]
    fn joint_distribution_at_five() {
        let lat = lattice(8);
        let det = ToyDetector::new(5).unwrap();
        let jd = joint_distribution(&lat, &det, 5, &tol()).unwrap();
        assert!((jd.total() - 1.0).abs() < 1e-12);
        // Pr(n = 0) = |α|^10 + |β|²|α|^8 + |β|²|α|^6 from the three n = 0 terms.
        let (a2, b2) = (0.9f64, 0.1f64);
        let want = a2.powi(5) + b2 * a2.powi(4) + b2 * a2.powi(3);
        assert!((jd.pointer_marginal(0) - want).abs() < 1e-12);
        let p = jd.particle_given_pointer(|m| m == 3, 1, &tol()).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        assert!(matches!(
            jd.particle_given_pointer(|_| true, -3, &tol()),
            Err(Error::NullConditioning { .. })
        ));
    }

    #[test]
    fn pointer_history_weight() {
        // trace(K†K) for "pointer at n = 1 at t = 5" is |β|²|α|⁴.
        let lat = lattice(8);
        let det = ToyDetector::new(5).unwrap();
        let fam = pointer_family(&lat, &det, 5, &tol()).unwrap();
        let h = fam
            .histories()
            .iter()
            .find(|h| h.label_at(5) == "n=1")
            .unwrap();
        let k = fam.chain_operator(h).unwrap();
        let w = (&k.adjoint() * &k).trace();
        assert!((w.re - 0.1 * 0.81).abs() < 1e-12 && w.im.abs() < 1e-14);
    }
}
