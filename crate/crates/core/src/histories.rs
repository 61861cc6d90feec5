//! History families on a discrete time grid, chain operators, the decoherence
//! matrix, consistency checks and extended-Born probabilities.
//!
//! A family is anchored by a pure initial state at `t0` and carries one step
//! propagator per later time `t1..tK`. Each history lists projectors at some of
//! those times; a time without an event is unconstrained (the identity). The
//! chain ket of a history is
//!
//! ```text
//! |k(Y)⟩ = P_K U_K ⋯ P_1 U_1 |ψ₀⟩,   K(Y) = |k(Y)⟩⟨ψ₀|
//! ```
//!
//! and the decoherence matrix is `D[a][b] = tr(K(Yᵃ)† K(Yᵇ)) = ⟨k(Yᵃ)|k(Yᵇ)⟩`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{Ket, Operator, C64};
use crate::properties::{check_decomposition, clamp_probability, conjoin_labels, Projector};
use crate::tolerance::Tolerances;

/// Label used for the identity (no information) at a time.
pub const IDENTITY_LABEL: &str = "I";

/// A projector at a time index (1-based; `t0` is the initial state).
#[derive(Clone, Debug)]
pub struct Event {
    pub time: usize,
    pub label: String,
    pub projector: Arc<Projector>,
}

impl Event {
    pub fn new(time: usize, label: impl Into<String>, projector: Arc<Projector>) -> Self {
        Event {
            time,
            label: label.into(),
            projector,
        }
    }
}

#[derive(Clone, Debug)]
pub struct History {
    pub label: String,
    /// Strictly increasing in time.
    pub events: Vec<Event>,
    /// Set when some event is a complement added to make a branch exhaustive.
    pub implicit: bool,
}

impl History {
    pub fn new(events: Vec<Event>) -> Self {
        History {
            label: String::new(),
            events,
            implicit: false,
        }
    }

    pub fn event_at(&self, time: usize) -> Option<&Event> {
        self.events.iter().find(|e| e.time == time)
    }

    pub fn label_at(&self, time: usize) -> &str {
        self.event_at(time)
            .map(|e| e.label.as_str())
            .unwrap_or(IDENTITY_LABEL)
    }
}

/// A node of a branch tree: a projector at one time and the branches that follow it.
#[derive(Clone, Debug)]
pub struct Node {
    pub label: String,
    pub projector: Arc<Projector>,
    pub children: Vec<Node>,
    implicit: bool,
}

impl Node {
    pub fn new(label: impl Into<String>, projector: Projector) -> Self {
        Node::shared(label, Arc::new(projector))
    }

    pub fn shared(label: impl Into<String>, projector: Arc<Projector>) -> Self {
        Node {
            label: label.into(),
            projector,
            children: Vec::new(),
            implicit: false,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Node::new(IDENTITY_LABEL, Projector::identity(dim))
    }

    pub fn then(mut self, children: Vec<Node>) -> Self {
        self.children = children;
        self
    }
}

/// Adds the complement of `siblings` when they do not already exhaust the space.
fn complete_siblings(siblings: &mut Vec<Node>, dim: usize, tol: &Tolerances) -> Result<()> {
    for (i, a) in siblings.iter().enumerate() {
        if a.projector.dim() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                found: a.projector.dim(),
            });
        }
        for b in &siblings[i + 1..] {
            let overlap = a.projector.overlap_norm(&b.projector)?;
            if overlap > tol.proj {
                return Err(Error::InvalidFamily(format!(
                    "sibling branches {} and {} are not mutually exclusive",
                    a.label, b.label
                )));
            }
        }
    }
    let masks: Option<Vec<&[bool]>> = siblings
        .iter()
        .map(|n| n.projector.diagonal_mask())
        .collect();
    let complement = match masks {
        Some(masks) => {
            let mask: Vec<bool> = (0..dim).map(|i| !masks.iter().any(|m| m[i])).collect();
            let p = Projector::from_mask(mask);
            (!p.is_zero()).then_some(p)
        }
        None => {
            let mut rest = Operator::identity(dim);
            for n in siblings.iter() {
                rest = &rest - &*n.projector.operator();
            }
            let rest = Projector::from_dense_unchecked(rest);
            (rest.operator().max_abs() > tol.proj && rest.rank() > 0).then_some(rest)
        }
    };
    if let Some(p) = complement {
        let names: Vec<&str> = siblings.iter().map(|n| n.label.as_str()).collect();
        let label = match names.as_slice() {
            [one] => format!("~{one}"),
            many => format!("~{{{}}}", many.join(",")),
        };
        let mut node = Node::new(label, p);
        node.implicit = true;
        siblings.push(node);
    }
    Ok(())
}

fn flatten(
    nodes: &[Node],
    time: usize,
    prefix: &mut Vec<Event>,
    implicit: bool,
    out: &mut Vec<History>,
) {
    for node in nodes {
        prefix.push(Event::new(time, node.label.clone(), node.projector.clone()));
        let implicit = implicit || node.implicit;
        if node.children.is_empty() {
            let mut h = History::new(prefix.clone());
            h.implicit = implicit;
            out.push(h);
        } else {
            flatten(&node.children, time + 1, prefix, implicit, out);
        }
        prefix.pop();
    }
}

fn complete_tree(
    nodes: &mut Vec<Node>,
    depth: usize,
    max_depth: usize,
    dim: usize,
    tol: &Tolerances,
) -> Result<()> {
    if depth > max_depth {
        return Err(Error::InvalidFamily(format!(
            "branch tree is deeper than the {max_depth}-step time grid"
        )));
    }
    complete_siblings(nodes, dim, tol)?;
    for node in nodes.iter_mut() {
        if !node.children.is_empty() {
            complete_tree(&mut node.children, depth + 1, max_depth, dim, tol)?;
        }
    }
    Ok(())
}

/// Weak or medium decoherence.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Condition {
    /// All off-diagonal entries of the decoherence matrix vanish.
    #[default]
    Medium,
    /// Only their real parts vanish.
    Weak,
}

impl Condition {
    pub fn name(self) -> &'static str {
        match self {
            Condition::Medium => "medium",
            Condition::Weak => "weak",
        }
    }

    fn measure(self, entry: C64) -> f64 {
        match self {
            Condition::Medium => entry.norm(),
            Condition::Weak => entry.re.abs(),
        }
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "medium" => Ok(Condition::Medium),
            "weak" => Ok(Condition::Weak),
            other => Err(format!("unknown consistency condition {other:?}")),
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OffDiagonal {
    pub a: usize,
    pub b: usize,
    pub a_label: String,
    pub b_label: String,
    /// Magnitude (medium) or absolute real part (weak) of `D[a][b]`.
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyReport {
    pub consistent: bool,
    pub condition: Condition,
    pub tolerance: f64,
    pub histories: usize,
    /// Largest off-diagonal violation; `None` for a single-history family.
    pub worst: Option<OffDiagonal>,
}

impl ConsistencyReport {
    pub fn worst_value(&self) -> f64 {
        self.worst.as_ref().map_or(0.0, |w| w.value)
    }
}

impl fmt::Display for ConsistencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.consistent {
            "consistent"
        } else {
            "inconsistent"
        };
        write!(f, "{status} ({} decoherence", self.condition)?;
        match &self.worst {
            Some(w) => write!(
                f,
                ", worst off-diagonal {:.3e} between {} and {})",
                w.value, w.a_label, w.b_label
            ),
            None => write!(f, ")"),
        }
    }
}

/// Gram matrix of chain operators under the trace inner product.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoherenceMatrix {
    labels: Vec<String>,
    entries: Vec<C64>,
}

impl DecoherenceMatrix {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn get(&self, a: usize, b: usize) -> C64 {
        self.entries[a * self.len() + b]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.get(i, i).re).collect()
    }

    pub fn trace(&self) -> C64 {
        (0..self.len()).map(|i| self.get(i, i)).sum()
    }

    pub fn hermitian_deviation(&self) -> f64 {
        let n = self.len();
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in a..n {
                worst = worst.max((self.get(a, b) - self.get(b, a).conj()).norm());
            }
        }
        worst
    }

    pub fn worst_off_diagonal(&self, condition: Condition) -> Option<OffDiagonal> {
        let n = self.len();
        let mut worst: Option<OffDiagonal> = None;
        for a in 0..n {
            for b in a + 1..n {
                let value = condition.measure(self.get(a, b));
                if worst.as_ref().is_none_or(|w| value > w.value) {
                    worst = Some(OffDiagonal {
                        a,
                        b,
                        a_label: self.labels[a].clone(),
                        b_label: self.labels[b].clone(),
                        value,
                    });
                }
            }
        }
        worst
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistoryProbability {
    pub label: String,
    pub probability: f64,
    pub implicit: bool,
}

/// A `(time, label)` pair naming an event, written `label@tK`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EventRef {
    pub time: usize,
    pub label: String,
}

impl EventRef {
    pub fn new(label: impl Into<String>, time: usize) -> Self {
        EventRef {
            time,
            label: label.into(),
        }
    }

    /// Whether a history's event label at this time satisfies the reference.
    /// A conjunction `a&b` satisfies both `a` and `b`.
    fn matches_label(&self, label: &str) -> bool {
        label == self.label || label.split('&').any(|part| part == self.label)
    }
}

impl FromStr for EventRef {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (label, time) = s
            .rsplit_once('@')
            .ok_or_else(|| format!("event {s:?} is not of the form label@tK"))?;
        let digits = time.strip_prefix('t').unwrap_or(time);
        let time = digits
            .parse::<usize>()
            .map_err(|_| format!("event {s:?} has a malformed time {time:?}"))?;
        if label.is_empty() {
            return Err(format!("event {s:?} has an empty label"));
        }
        Ok(EventRef::new(label, time))
    }
}

impl fmt::Display for EventRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@t{}", self.label, self.time)
    }
}

/// Events joined by AND across different times and OR within a single time.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EventSet {
    events: Vec<EventRef>,
}

impl EventSet {
    pub fn new(events: Vec<EventRef>) -> Self {
        EventSet { events }
    }

    pub fn single(label: impl Into<String>, time: usize) -> Self {
        EventSet::new(vec![EventRef::new(label, time)])
    }

    pub fn events(&self) -> &[EventRef] {
        &self.events
    }

    pub fn matches(&self, h: &History) -> bool {
        let mut by_time: BTreeMap<usize, Vec<&EventRef>> = BTreeMap::new();
        for e in &self.events {
            by_time.entry(e.time).or_default().push(e);
        }
        by_time
            .iter()
            .all(|(&t, refs)| refs.iter().any(|r| r.matches_label(h.label_at(t))))
    }
}

impl FromStr for EventSet {
    type Err = String;

    /// Comma-separated `label@tK` items.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let events = s
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(EventRef::from_str)
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if events.is_empty() {
            return Err("empty event set".into());
        }
        Ok(EventSet::new(events))
    }
}

impl fmt::Display for EventSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.events.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

/// An exhaustive, mutually exclusive set of histories sharing an initial state
/// and time grid.
#[derive(Clone, Debug)]
pub struct HistoryFamily {
    initial: Ket,
    propagators: Vec<Operator>,
    histories: Vec<History>,
}

impl HistoryFamily {
    /// Validates a family given as flat histories. History labels are
    /// regenerated from the event labels.
    pub fn new(
        initial: Ket,
        propagators: Vec<Operator>,
        mut histories: Vec<History>,
        tol: &Tolerances,
    ) -> Result<Self> {
        if propagators.is_empty() {
            return Err(Error::InvalidFamily("time grid has no steps".into()));
        }
        if !initial.is_normalized(tol.norm) {
            return Err(Error::NotNormalized {
                norm_sqr: initial.norm_sqr(),
            });
        }
        let dim = initial.dim();
        for u in &propagators {
            if u.dim() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    found: u.dim(),
                });
            }
            u.check_unitary(tol)?;
        }
        if histories.is_empty() {
            return Err(Error::InvalidFamily("family has no histories".into()));
        }
        let steps = propagators.len();
        for h in &histories {
            let mut last = 0;
            for e in &h.events {
                if e.time <= last || e.time > steps {
                    return Err(Error::InvalidFamily(format!(
                        "event times must increase strictly within 1..={steps}, found t{} after t{last}",
                        e.time
                    )));
                }
                if e.projector.dim() != dim {
                    return Err(Error::DimMismatch {
                        expected: dim,
                        found: e.projector.dim(),
                    });
                }
                last = e.time;
            }
        }
        for h in &mut histories {
            h.label = (1..=steps)
                .map(|t| h.label_at(t))
                .collect::<Vec<_>>()
                .join("/");
        }
        let mut seen = HashSet::new();
        for h in &histories {
            if !seen.insert(h.label.as_str()) {
                return Err(Error::InvalidFamily(format!(
                    "history {} appears twice",
                    h.label
                )));
            }
        }
        let family = HistoryFamily {
            initial,
            propagators,
            histories,
        };
        family.check_branch_completeness(tol)?;
        Ok(family)
    }

    /// Builds a family from branch trees whose roots sit at `t1`. Every sibling
    /// group that does not exhaust the space gains a complement branch `~{...}`.
    pub fn from_tree(
        initial: Ket,
        propagators: Vec<Operator>,
        mut roots: Vec<Node>,
        tol: &Tolerances,
    ) -> Result<Self> {
        if roots.is_empty() {
            return Err(Error::InvalidFamily("family has no histories".into()));
        }
        complete_tree(&mut roots, 1, propagators.len(), initial.dim(), tol)?;
        let mut histories = Vec::new();
        flatten(&roots, 1, &mut Vec::new(), false, &mut histories);
        HistoryFamily::new(initial, propagators, histories, tol)
    }

    /// At every time, the events following each shared prefix must form a
    /// decomposition of the identity.
    fn check_branch_completeness(&self, tol: &Tolerances) -> Result<()> {
        let identity = Arc::new(Projector::identity(self.dim()));
        for t in 1..=self.steps() {
            let mut groups: BTreeMap<Vec<&str>, Vec<(&str, &Arc<Projector>)>> = BTreeMap::new();
            for h in &self.histories {
                let prefix: Vec<&str> = (1..t).map(|s| h.label_at(s)).collect();
                let (label, p) = match h.event_at(t) {
                    Some(e) => (e.label.as_str(), &e.projector),
                    None => (IDENTITY_LABEL, &identity),
                };
                let group = groups.entry(prefix).or_default();
                match group.iter().find(|(l, _)| *l == label) {
                    Some((_, q)) if !Arc::ptr_eq(q, p) && q.max_abs_diff(p) > tol.proj => {
                        return Err(Error::InvalidFamily(format!(
                            "label {label}@t{t} names two different projectors"
                        )));
                    }
                    Some(_) => {}
                    None => group.push((label, p)),
                }
            }
            for (prefix, group) in &groups {
                let projectors: Vec<&Projector> = group.iter().map(|(_, p)| p.as_ref()).collect();
                check_decomposition(&projectors, tol).map_err(|e| {
                    Error::InvalidFamily(format!(
                        "branch after [{}] at t{t} is not a decomposition of the identity: {e}",
                        prefix.join("/")
                    ))
                })?;
            }
        }
        Ok(())
    }

    pub fn initial(&self) -> &Ket {
        &self.initial
    }

    pub fn propagators(&self) -> &[Operator] {
        &self.propagators
    }

    pub fn histories(&self) -> &[History] {
        &self.histories
    }

    pub fn dim(&self) -> usize {
        self.initial.dim()
    }

    /// Number of later times `t1..tK`.
    pub fn steps(&self) -> usize {
        self.propagators.len()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.histories.iter().map(|h| h.label.as_str()).collect()
    }

    /// `U(t0 → tK)`.
    pub fn total_propagator(&self) -> Operator {
        self.propagators
            .iter()
            .skip(1)
            .fold(self.propagators[0].clone(), |acc, u| u * &acc)
    }

    fn check_history(&self, h: &History) -> Result<()> {
        let mut last = 0;
        for e in &h.events {
            if e.time <= last || e.time > self.steps() {
                return Err(Error::InvalidFamily(format!(
                    "event at t{} is not on the family's time grid",
                    e.time
                )));
            }
            if e.projector.dim() != self.dim() {
                return Err(Error::DimMismatch {
                    expected: self.dim(),
                    found: e.projector.dim(),
                });
            }
            last = e.time;
        }
        Ok(())
    }

    /// `P_K U_K ⋯ P_1 U_1 |ψ₀⟩`.
    pub fn chain_ket(&self, h: &History) -> Result<Ket> {
        self.check_history(h)?;
        let mut state = self.initial.clone();
        let mut events = h.events.iter().peekable();
        for (step, u) in self.propagators.iter().enumerate() {
            state = u.apply(&state)?;
            if let Some(e) = events.next_if(|e| e.time == step + 1) {
                state = e.projector.apply(&state)?;
            }
        }
        Ok(state)
    }

    /// The chain operator `K(h) = P_K U_K ⋯ P_1 U_1 |ψ₀⟩⟨ψ₀|`.
    pub fn chain_operator(&self, h: &History) -> Result<Operator> {
        Ok(self.chain_ket(h)?.outer(&self.initial))
    }

    pub fn decoherence_matrix(&self) -> Result<DecoherenceMatrix> {
        let kets = self
            .histories
            .iter()
            .map(|h| self.chain_ket(h))
            .collect::<Result<Vec<_>>>()?;
        let n = kets.len();
        let mut entries = vec![C64::new(0.0, 0.0); n * n];
        for a in 0..n {
            for b in a..n {
                let d = kets[a].inner(&kets[b])?;
                entries[a * n + b] = d;
                entries[b * n + a] = d.conj();
            }
        }
        Ok(DecoherenceMatrix {
            labels: self.histories.iter().map(|h| h.label.clone()).collect(),
            entries,
        })
    }

    pub fn check_consistency(
        &self,
        condition: Condition,
        tol: &Tolerances,
    ) -> Result<ConsistencyReport> {
        let d = self.decoherence_matrix()?;
        Ok(report_for(&d, condition, tol))
    }

    /// Extended-Born probabilities, one per history in family order.
    pub fn probabilities(
        &self,
        condition: Condition,
        tol: &Tolerances,
    ) -> Result<Vec<HistoryProbability>> {
        let d = self.decoherence_matrix()?;
        let report = report_for(&d, condition, tol);
        if !report.consistent {
            return Err(Error::Inconsistent(Box::new(report)));
        }
        let probs = d
            .diagonal()
            .into_iter()
            .map(|p| clamp_probability(p, tol))
            .collect::<Result<Vec<_>>>()?;
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > tol.prob {
            return Err(Error::ProbabilityOutOfRange { value: total });
        }
        Ok(self
            .histories
            .iter()
            .zip(probs)
            .map(|(h, probability)| HistoryProbability {
                label: h.label.clone(),
                probability,
                implicit: h.implicit,
            })
            .collect())
    }

    fn resolve(&self, set: &EventSet) -> Result<()> {
        for e in set.events() {
            let found = (1..=self.steps()).contains(&e.time)
                && self
                    .histories
                    .iter()
                    .any(|h| e.matches_label(h.label_at(e.time)));
            if !found {
                return Err(Error::UnknownEvent {
                    label: e.label.clone(),
                    time: e.time,
                });
            }
        }
        Ok(())
    }

    /// Total probability of the histories in `set`.
    pub fn probability_of(
        &self,
        set: &EventSet,
        condition: Condition,
        tol: &Tolerances,
    ) -> Result<f64> {
        self.resolve(set)?;
        self.probability_where(|h| set.matches(h), condition, tol)
    }

    pub fn probability_where(
        &self,
        pred: impl Fn(&History) -> bool,
        condition: Condition,
        tol: &Tolerances,
    ) -> Result<f64> {
        let probs = self.probabilities(condition, tol)?;
        let total = self
            .histories
            .iter()
            .zip(&probs)
            .filter(|(h, _)| pred(h))
            .map(|(_, p)| p.probability)
            .sum();
        clamp_probability(total, tol)
    }

    /// `Pr(query | given)`.
    pub fn conditional(
        &self,
        given: &EventSet,
        query: &EventSet,
        condition: Condition,
        tol: &Tolerances,
    ) -> Result<f64> {
        self.resolve(given)?;
        self.resolve(query)?;
        self.conditional_where(|h| given.matches(h), |h| query.matches(h), condition, tol)
    }

    /// `Pr(query | given)` with events selected by predicates over histories.
    pub fn conditional_where(
        &self,
        given: impl Fn(&History) -> bool,
        query: impl Fn(&History) -> bool,
        condition: Condition,
        tol: &Tolerances,
    ) -> Result<f64> {
        let probs = self.probabilities(condition, tol)?;
        let mut p_given = 0.0;
        let mut p_both = 0.0;
        for (h, p) in self.histories.iter().zip(&probs) {
            if given(h) {
                p_given += p.probability;
                if query(h) {
                    p_both += p.probability;
                }
            }
        }
        if p_given <= tol.prob {
            return Err(Error::NullConditioning {
                probability: p_given,
            });
        }
        Ok((p_both / p_given).clamp(0.0, 1.0))
    }

    /// Distinct `(label, projector)` pairs at `time`, identity included when
    /// some history leaves the time unconstrained.
    fn events_at(&self, time: usize) -> Vec<(String, Arc<Projector>)> {
        let mut out: Vec<(String, Arc<Projector>)> = Vec::new();
        let mut identity = None;
        for h in &self.histories {
            match h.event_at(time) {
                Some(e) => {
                    if !out.iter().any(|(l, _)| *l == e.label) {
                        out.push((e.label.clone(), e.projector.clone()));
                    }
                }
                None => {
                    identity.get_or_insert_with(|| Arc::new(Projector::identity(self.dim())));
                }
            }
        }
        if let Some(id) = identity {
            if !out.iter().any(|(l, _)| l == IDENTITY_LABEL) {
                out.push((IDENTITY_LABEL.to_string(), id));
            }
        }
        out
    }
}

fn report_for(d: &DecoherenceMatrix, condition: Condition, tol: &Tolerances) -> ConsistencyReport {
    let worst = d.worst_off_diagonal(condition);
    ConsistencyReport {
        consistent: worst.as_ref().is_none_or(|w| w.value <= tol.cons),
        condition,
        tolerance: tol.cons,
        histories: d.len(),
        worst,
    }
}

/// Common refinement of two families on the same initial state, dynamics and
/// time grid. Fails at the first time where a projector of `a` does not
/// commute with a projector of `b`.
pub fn combine_families(
    a: &HistoryFamily,
    b: &HistoryFamily,
    condition: Condition,
    tol: &Tolerances,
) -> Result<HistoryFamily> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    if a.steps() != b.steps() {
        return Err(Error::InvalidFamily(format!(
            "time grids differ: {} vs {} steps",
            a.steps(),
            b.steps()
        )));
    }
    if a.initial.max_abs_diff(&b.initial) > tol.norm {
        return Err(Error::InvalidFamily("initial states differ".into()));
    }
    for (k, (ua, ub)) in a.propagators.iter().zip(&b.propagators).enumerate() {
        if ua.max_abs_diff(ub) > tol.unitary {
            return Err(Error::InvalidFamily(format!(
                "propagators into t{} differ",
                k + 1
            )));
        }
    }
    for t in 1..=a.steps() {
        let ea = a.events_at(t);
        let eb = b.events_at(t);
        for (la, p) in &ea {
            for (lb, q) in &eb {
                if !p.compatible(q, tol)? {
                    return Err(Error::Incompatible {
                        time: Some(t),
                        left: la.clone(),
                        right: lb.clone(),
                    });
                }
            }
        }
    }

    let mut products: HashMap<(usize, String, String), Option<Arc<Projector>>> = HashMap::new();
    let mut histories = Vec::new();
    for ha in &a.histories {
        'pair: for hb in &b.histories {
            let mut events = Vec::new();
            for t in 1..=a.steps() {
                let event = match (ha.event_at(t), hb.event_at(t)) {
                    (None, None) => None,
                    (Some(e), None) | (None, Some(e)) => Some(e.clone()),
                    (Some(x), Some(y)) => {
                        let key = (t, x.label.clone(), y.label.clone());
                        let product = products
                            .entry(key)
                            .or_insert_with(|| {
                                let pq = x.projector.conjunction_unchecked(&y.projector);
                                let zero = pq.is_zero() || pq.operator().max_abs() <= tol.proj;
                                (!zero).then(|| Arc::new(pq))
                            })
                            .clone();
                        match product {
                            Some(p) => Some(Event::new(t, conjoin_labels(&x.label, &y.label), p)),
                            None => continue 'pair,
                        }
                    }
                };
                events.extend(event);
            }
            let mut h = History::new(events);
            h.implicit = ha.implicit || hb.implicit;
            histories.push(h);
        }
    }
    let family = HistoryFamily::new(a.initial.clone(), a.propagators.clone(), histories, tol)?;
    let report = family.check_consistency(condition, tol)?;
    if !report.consistent {
        return Err(Error::Inconsistent(Box::new(report)));
    }
    Ok(family)
}
