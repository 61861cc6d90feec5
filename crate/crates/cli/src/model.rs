//! Validated, in-memory models.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use qhist_core::histories::{combine_families, Condition, Node, IDENTITY_LABEL};
use qhist_core::sterngerlach::{FamilyName, SgModel};
use qhist_core::toymodels::{self, ToyDetector, ToyLattice};
use qhist_core::{HistoryFamily, Ket, Operator, Projector, Tolerances, C64};

use crate::error::{CliError, Result};
use crate::schema::*;

pub enum Model {
    ToyDecay(ToyLattice),
    ToyDetector(ToyLattice, ToyDetector),
    SternGerlach(Box<SgModel>),
    Custom(Box<Custom>),
}

pub struct Custom {
    file: CustomFile,
    kets: BTreeMap<String, Ket>,
    unitaries: BTreeMap<String, Operator>,
    projectors: BTreeMap<String, Arc<Projector>>,
    families: BTreeMap<String, HistoryFamily>,
}

/// A state after `t` steps.
pub struct Evolution {
    pub state: Ket,
    pub warnings: Vec<String>,
}

pub fn load(path: &Path, tol: &Tolerances) -> Result<Model> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })?;
    Model::resolve(parse(&text)?, tol)
}

fn complex([re, im]: Complex) -> C64 {
    C64::new(re, im)
}

fn lattice(m: usize, alpha: Complex, beta: Complex, tol: &Tolerances) -> Result<ToyLattice> {
    if m < 1 {
        return Err(CliError::invalid("/M", "the lattice needs M ≥ 1"));
    }
    let total = complex(alpha).norm_sqr() + complex(beta).norm_sqr();
    if (total - 1.0).abs() > tol.norm {
        return Err(CliError::invalid(
            "/alpha",
            format!("|alpha|² + |beta|² = {total}, must equal 1 (hopping normalization)"),
        ));
    }
    Ok(ToyLattice::new(m, complex(alpha), complex(beta), tol)?)
}

impl Model {
    pub fn resolve(file: ModelFile, tol: &Tolerances) -> Result<Model> {
        match file {
            ModelFile::ToyDecay(f) => Ok(Model::ToyDecay(lattice(f.m, f.alpha, f.beta, tol)?)),
            ModelFile::ToyDecayDetector(f) => {
                let lat = lattice(f.m, f.alpha, f.beta, tol)?;
                if f.n < 1 {
                    return Err(CliError::invalid("/N", "the detector needs N ≥ 1"));
                }
                let s = f.trigger_site.unwrap_or(ToyDetector::DEFAULT_TRIGGER);
                let det = ToyDetector::with_trigger(f.n, s)
                    .map_err(|e| CliError::invalid("/trigger_site", e.to_string()))?;
                toymodels::coupled_step(&lat, &det)
                    .map_err(|e| CliError::invalid("/trigger_site", e.to_string()))?;
                Ok(Model::ToyDetector(lat, det))
            }
            ModelFile::SternGerlach(_) => Ok(Model::SternGerlach(Box::new(SgModel::build(tol)?))),
            ModelFile::Custom(f) => Ok(Model::Custom(Box::new(Custom::resolve(f, tol)?))),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Model::ToyDecay(_) => "toy_decay",
            Model::ToyDetector(..) => "toy_decay_detector",
            Model::SternGerlach(_) => "stern_gerlach",
            Model::Custom(_) => "custom",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Model::ToyDecay(lat) => lat.dim(),
            Model::ToyDetector(lat, det) => lat.dim() * det.dim(),
            Model::SternGerlach(_) => qhist_core::sterngerlach::DIM,
            Model::Custom(c) => c.file.dim,
        }
    }

    pub fn basis_label(&self, i: usize) -> String {
        match self {
            Model::ToyDecay(lat) => format!("m={}", lat.site(i)),
            Model::ToyDetector(lat, det) => format!(
                "m={}&n={}",
                lat.site(i / det.dim()),
                det.site(i % det.dim())
            ),
            Model::SternGerlach(_) => SgModel::basis_label(i),
            Model::Custom(c) => c
                .file
                .basis_labels
                .get(i)
                .cloned()
                .unwrap_or_else(|| i.to_string()),
        }
    }

    pub fn evolve(&self, t: usize) -> Result<Evolution> {
        let mut warnings = Vec::new();
        let state = match self {
            Model::ToyDecay(lat) => {
                if t >= lat.half_width() {
                    warnings.push(format!(
                        "t = {t} ≥ M = {}: the walk has wrapped around the lattice and the decay closed form no longer applies",
                        lat.half_width()
                    ));
                }
                toymodels::evolve(&toymodels::decay_operator(lat), &lat.ket(0), t)?
            }
            Model::ToyDetector(lat, det) => {
                if let Err(e) = toymodels::check_coupled_range(lat, det, t) {
                    warnings.push(format!("outside the closed-form range: {e}"));
                }
                let step = toymodels::coupled_step(lat, det)?;
                toymodels::evolve(&step, &toymodels::coupled_initial_state(lat, det), t)?
            }
            Model::SternGerlach(sg) => {
                if t > 3 {
                    warnings.push(format!(
                        "no dynamics is defined after t3; the state at t3 is reported for t = {t}"
                    ));
                }
                sg.staged(t.min(3))?.apply(sg.initial())?
            }
            Model::Custom(c) => c.evolve(t, &mut warnings)?,
        };
        Ok(Evolution { state, warnings })
    }

    pub fn projector(&self, name: &str) -> Option<Arc<Projector>> {
        match self {
            Model::SternGerlach(sg) => sg.projector(name).cloned(),
            Model::Custom(c) if name == IDENTITY_LABEL => {
                Some(Arc::new(Projector::identity(c.file.dim)))
            }
            Model::Custom(c) => c.projectors.get(name).cloned(),
            _ => None,
        }
    }

    /// Names accepted by [`Model::family`], besides `A+B` combinations.
    pub fn family_names(&self) -> Vec<String> {
        match self {
            Model::ToyDecay(_) => vec!["born".into()],
            Model::ToyDetector(..) => ["born", "particle", "pointer"].map(String::from).to_vec(),
            Model::SternGerlach(_) => FamilyName::ALL.iter().map(|f| f.to_string()).collect(),
            Model::Custom(c) => c.families.keys().cloned().collect(),
        }
    }

    /// A named family; `A+B` combines families, `t` places toy families.
    pub fn family(
        &self,
        name: &str,
        t: Option<usize>,
        condition: Condition,
        tol: &Tolerances,
    ) -> Result<HistoryFamily> {
        if let Model::Custom(c) = self {
            if let Some(f) = c.families.get(name) {
                return Ok(f.clone());
            }
        }
        if name.contains('+') {
            let mut parts = name.split('+');
            let first = parts.next().unwrap_or_default();
            let mut fam = self.single_family(first, t, tol)?;
            for part in parts {
                fam = combine_families(&fam, &self.single_family(part, t, tol)?, condition, tol)?;
            }
            return Ok(fam);
        }
        self.single_family(name, t, tol)
    }

    fn single_family(
        &self,
        name: &str,
        t: Option<usize>,
        tol: &Tolerances,
    ) -> Result<HistoryFamily> {
        let unknown = || {
            CliError::invalid(
                "",
                format!(
                    "unknown family {name:?} for a {} model; known: {}",
                    self.kind(),
                    self.family_names().join(", ")
                ),
            )
        };
        let need_t = || {
            t.ok_or_else(|| CliError::Usage(format!("family {name:?} needs --t (the event time)")))
        };
        Ok(match self {
            Model::ToyDecay(lat) => match name {
                "born" | "particle" => toymodels::decay_family(lat, need_t()?, tol)?,
                _ => return Err(unknown()),
            },
            Model::ToyDetector(lat, det) => match name {
                "born" | "position" => toymodels::position_family(lat, det, need_t()?, tol)?,
                "particle" => toymodels::particle_family(lat, det, need_t()?, tol)?,
                "pointer" => toymodels::pointer_family(lat, det, need_t()?, tol)?,
                _ => return Err(unknown()),
            },
            Model::SternGerlach(sg) => {
                let f = FamilyName::from_str(name).map_err(|_| unknown())?;
                sg.family(f, tol)?
            }
            Model::Custom(c) => c.families.get(name).cloned().ok_or_else(unknown)?,
        })
    }

    /// The model as an explicit `custom` file. Toy families are included when `t` is given.
    pub fn export(&self, t: Option<usize>) -> Result<ModelFile> {
        let file = match self {
            Model::ToyDecay(lat) => {
                let mut f = explicit(
                    self,
                    &lat.ket(0),
                    &[("T", toymodels::decay_operator(lat))],
                    true,
                );
                if let Some(t) = t {
                    let mut leaves = Vec::new();
                    for m in lat.sites() {
                        let name = format!("m={m}");
                        add_basis(&mut f, &name, vec![lat.index(m)]);
                        leaves.push(name);
                    }
                    f.families.insert("born".into(), toy_family(t, leaves)?);
                }
                f
            }
            Model::ToyDetector(lat, det) => {
                let step = toymodels::coupled_step(lat, det)?;
                let psi0 = toymodels::coupled_initial_state(lat, det);
                let mut f = explicit(self, &psi0, &[("T", step)], true);
                if let Some(t) = t {
                    let nd = det.dim();
                    let (mut born, mut particle, mut pointer) = (vec![], vec![], vec![]);
                    for i in 0..self.dim() {
                        let name = self.basis_label(i);
                        add_basis(&mut f, &name, vec![i]);
                        born.push(name);
                    }
                    for m in lat.sites() {
                        let name = format!("m={m}");
                        let row = lat.index(m) * nd;
                        add_basis(&mut f, &name, (row..row + nd).collect());
                        particle.push(name);
                    }
                    for n in det.sites() {
                        let name = format!("n={n}");
                        let col = det.index(n);
                        add_basis(
                            &mut f,
                            &name,
                            (0..lat.dim()).map(|m| m * nd + col).collect(),
                        );
                        pointer.push(name);
                    }
                    f.families.insert("born".into(), toy_family(t, born)?);
                    f.families
                        .insert("particle".into(), toy_family(t, particle)?);
                    f.families.insert("pointer".into(), toy_family(t, pointer)?);
                }
                f
            }
            Model::SternGerlach(sg) => {
                let [t1, t2, t3] = sg.steps().clone();
                let mut f = explicit(
                    self,
                    sg.initial(),
                    &[("T1", t1), ("T2", t2), ("T3", t3)],
                    false,
                );
                for (name, p) in sg.projectors() {
                    if name != IDENTITY_LABEL {
                        f.projectors.insert(name.into(), projector_spec(p));
                    }
                }
                for name in FamilyName::ALL {
                    f.families.insert(
                        name.to_string(),
                        FamilySpec {
                            initial: "psi0".into(),
                            steps: vec!["T1".into(), "T2".into(), "T3".into()],
                            tree: sg.family_tree(name).iter().map(tree_spec).collect(),
                        },
                    );
                }
                f
            }
            Model::Custom(c) => c.file.clone(),
        };
        Ok(ModelFile::Custom(file))
    }
}

fn explicit(model: &Model, psi0: &Ket, steps: &[(&str, Operator)], repeat: bool) -> CustomFile {
    let dim = model.dim();
    CustomFile {
        dim,
        basis_labels: (0..dim).map(|i| model.basis_label(i)).collect(),
        kets: BTreeMap::from([("psi0".to_string(), ket_spec(psi0))]),
        unitaries: steps
            .iter()
            .map(|(name, u)| (name.to_string(), matrix_spec(u)))
            .collect(),
        projectors: BTreeMap::new(),
        families: BTreeMap::new(),
        evolve: Some(EvolveSpec {
            initial: "psi0".into(),
            steps: steps.iter().map(|(name, _)| name.to_string()).collect(),
            repeat,
        }),
    }
}

fn add_basis(f: &mut CustomFile, name: &str, basis: Vec<usize>) {
    f.projectors
        .insert(name.into(), ProjectorSpec::Basis { basis });
}

/// Identity at `t1..t(t-1)`, then one of `leaves` at `t`, one step of `T` each.
fn toy_family(t: usize, leaves: Vec<String>) -> Result<FamilySpec> {
    if t == 0 {
        return Err(CliError::Usage("toy families need t ≥ 1".into()));
    }
    let mut tree: Vec<TreeSpec> = leaves
        .into_iter()
        .map(|p| TreeSpec {
            p,
            children: vec![],
        })
        .collect();
    for _ in 1..t {
        tree = vec![TreeSpec {
            p: IDENTITY_LABEL.into(),
            children: tree,
        }];
    }
    Ok(FamilySpec {
        initial: "psi0".into(),
        steps: vec!["T".into(); t],
        tree,
    })
}

fn tree_spec(node: &Node) -> TreeSpec {
    TreeSpec {
        p: node.label.clone(),
        children: node.children.iter().map(tree_spec).collect(),
    }
}

fn is_zero(c: C64) -> bool {
    c.re.to_bits() == 0 && c.im.to_bits() == 0
}

fn ket_spec(k: &Ket) -> KetSpec {
    let amps = k.amplitudes();
    let nonzero = amps.iter().filter(|c| !is_zero(**c)).count();
    if 2 * nonzero < amps.len() {
        KetSpec::Sparse {
            sparse: amps
                .iter()
                .enumerate()
                .filter(|(_, c)| !is_zero(**c))
                .map(|(i, c)| (i, c.re, c.im))
                .collect(),
        }
    } else {
        KetSpec::Dense(amps.iter().map(|c| [c.re, c.im]).collect())
    }
}

fn matrix_spec(op: &Operator) -> MatrixSpec {
    let dim = op.dim();
    let entries = op.entries();
    let nonzero = entries.iter().filter(|c| !is_zero(**c)).count();
    if 2 * nonzero < entries.len() {
        MatrixSpec::Sparse {
            sparse: entries
                .iter()
                .enumerate()
                .filter(|(_, c)| !is_zero(**c))
                .map(|(i, c)| (i / dim, i % dim, c.re, c.im))
                .collect(),
        }
    } else {
        MatrixSpec::Dense(
            entries
                .chunks(dim)
                .map(|row| row.iter().map(|c| [c.re, c.im]).collect())
                .collect(),
        )
    }
}

fn projector_spec(p: &Projector) -> ProjectorSpec {
    match p.diagonal_mask() {
        Some(mask) => ProjectorSpec::Basis {
            basis: (0..mask.len()).filter(|&i| mask[i]).collect(),
        },
        None => ProjectorSpec::Matrix(matrix_spec(&p.operator())),
    }
}

fn ket_from(spec: &KetSpec, dim: usize, at: &str) -> Result<Ket> {
    let amps = match spec {
        KetSpec::Dense(v) => {
            if v.len() != dim {
                return Err(CliError::invalid(
                    at,
                    format!("expected {dim} amplitudes, found {}", v.len()),
                ));
            }
            v.iter().map(|&c| complex(c)).collect()
        }
        KetSpec::Sparse { sparse } => {
            let mut amps = vec![C64::new(0.0, 0.0); dim];
            for (k, &(i, re, im)) in sparse.iter().enumerate() {
                if i >= dim {
                    return Err(CliError::invalid(
                        format!("{at}/sparse/{k}"),
                        format!("index {i} outside dimension {dim}"),
                    ));
                }
                amps[i] = C64::new(re, im);
            }
            amps
        }
    };
    Ket::new(amps).map_err(|e| CliError::invalid(at, e.to_string()))
}

fn matrix_from(spec: &MatrixSpec, dim: usize, at: &str) -> Result<Operator> {
    let mut data = vec![C64::new(0.0, 0.0); dim * dim];
    match spec {
        MatrixSpec::Dense(rows) => {
            if rows.len() != dim {
                return Err(CliError::invalid(
                    at,
                    format!("expected {dim} rows, found {}", rows.len()),
                ));
            }
            for (r, row) in rows.iter().enumerate() {
                if row.len() != dim {
                    return Err(CliError::invalid(
                        format!("{at}/{r}"),
                        format!("expected {dim} entries, found {}", row.len()),
                    ));
                }
                for (c, &z) in row.iter().enumerate() {
                    data[r * dim + c] = complex(z);
                }
            }
        }
        MatrixSpec::Sparse { sparse } => {
            for (k, &(r, c, re, im)) in sparse.iter().enumerate() {
                if r >= dim || c >= dim {
                    return Err(CliError::invalid(
                        format!("{at}/sparse/{k}"),
                        format!("entry ({r}, {c}) outside dimension {dim}"),
                    ));
                }
                data[r * dim + c] = C64::new(re, im);
            }
        }
    }
    Operator::from_row_major(data).map_err(|e| CliError::invalid(at, e.to_string()))
}

fn lookup<'a, T>(
    map: &'a BTreeMap<String, T>,
    name: &str,
    what: &str,
    at: String,
) -> Result<&'a T> {
    map.get(name)
        .ok_or_else(|| CliError::invalid(at, format!("no {what} named {name:?}")))
}

impl Custom {
    fn resolve(file: CustomFile, tol: &Tolerances) -> Result<Custom> {
        let dim = file.dim;
        if dim == 0 {
            return Err(CliError::invalid("/dim", "dimension must be at least 1"));
        }
        if !file.basis_labels.is_empty() && file.basis_labels.len() != dim {
            return Err(CliError::invalid(
                "/basis_labels",
                format!("expected {dim} labels, found {}", file.basis_labels.len()),
            ));
        }
        let mut kets = BTreeMap::new();
        for (name, spec) in &file.kets {
            let at = format!("/kets/{}", escape(name));
            let k = ket_from(spec, dim, &at)?;
            if !k.is_normalized(tol.norm) {
                return Err(CliError::invalid(
                    at,
                    format!("not normalized (norm² = {})", k.norm_sqr()),
                ));
            }
            kets.insert(name.clone(), k);
        }
        let mut unitaries = BTreeMap::new();
        for (name, spec) in &file.unitaries {
            let at = format!("/unitaries/{}", escape(name));
            let u = matrix_from(spec, dim, &at)?;
            u.check_unitary(tol)
                .map_err(|e| CliError::invalid(&at, e.to_string()))?;
            unitaries.insert(name.clone(), u);
        }
        let mut projectors = BTreeMap::new();
        for (name, spec) in &file.projectors {
            let at = format!("/projectors/{}", escape(name));
            if name == IDENTITY_LABEL {
                return Err(CliError::invalid(
                    at,
                    "the name I is reserved for the identity",
                ));
            }
            let p = match spec {
                ProjectorSpec::Basis { basis } => {
                    let mut seen = vec![false; dim];
                    for (k, &i) in basis.iter().enumerate() {
                        if i >= dim || seen[i] {
                            return Err(CliError::invalid(
                                format!("{at}/basis/{k}"),
                                format!("index {i} is out of range or repeated"),
                            ));
                        }
                        seen[i] = true;
                    }
                    Projector::from_basis_indices(dim, basis)
                }
                ProjectorSpec::Kets { kets: list } => {
                    let list = list
                        .iter()
                        .enumerate()
                        .map(|(k, s)| ket_from(s, dim, &format!("{at}/kets/{k}")))
                        .collect::<Result<Vec<_>>>()?;
                    Projector::from_orthonormal(&list, tol)
                        .map_err(|e| CliError::invalid(&at, e.to_string()))?
                }
                ProjectorSpec::Matrix(m) => Projector::new(matrix_from(m, dim, &at)?, tol)
                    .map_err(|e| CliError::invalid(&at, e.to_string()))?,
            };
            projectors.insert(name.clone(), Arc::new(p));
        }
        let mut custom = Custom {
            file,
            kets,
            unitaries,
            projectors,
            families: BTreeMap::new(),
        };
        for (name, spec) in &custom.file.families {
            let at = format!("/families/{}", escape(name));
            let fam = custom.build_family(spec, &at, tol)?;
            custom.families.insert(name.clone(), fam);
        }
        if let Some(ev) = &custom.file.evolve {
            lookup(&custom.kets, &ev.initial, "ket", "/evolve/initial".into())?;
            if ev.steps.is_empty() {
                return Err(CliError::invalid(
                    "/evolve/steps",
                    "at least one step is needed",
                ));
            }
            for (k, s) in ev.steps.iter().enumerate() {
                lookup(
                    &custom.unitaries,
                    s,
                    "unitary",
                    format!("/evolve/steps/{k}"),
                )?;
            }
        }
        Ok(custom)
    }

    fn build_family(&self, spec: &FamilySpec, at: &str, tol: &Tolerances) -> Result<HistoryFamily> {
        let initial = lookup(&self.kets, &spec.initial, "ket", format!("{at}/initial"))?;
        let steps = spec
            .steps
            .iter()
            .enumerate()
            .map(|(k, s)| lookup(&self.unitaries, s, "unitary", format!("{at}/steps/{k}")).cloned())
            .collect::<Result<Vec<_>>>()?;
        let roots = spec
            .tree
            .iter()
            .enumerate()
            .map(|(k, n)| self.node(n, &format!("{at}/tree/{k}")))
            .collect::<Result<Vec<_>>>()?;
        HistoryFamily::from_tree(initial.clone(), steps, roots, tol)
            .map_err(|e| CliError::invalid(at, e.to_string()))
    }

    fn node(&self, spec: &TreeSpec, at: &str) -> Result<Node> {
        let p = if spec.p == IDENTITY_LABEL {
            Arc::new(Projector::identity(self.file.dim))
        } else {
            lookup(&self.projectors, &spec.p, "projector", format!("{at}/p"))?.clone()
        };
        let children = spec
            .children
            .iter()
            .enumerate()
            .map(|(k, c)| self.node(c, &format!("{at}/children/{k}")))
            .collect::<Result<Vec<_>>>()?;
        Ok(Node::shared(spec.p.clone(), p).then(children))
    }

    fn evolve(&self, t: usize, warnings: &mut Vec<String>) -> Result<Ket> {
        let ev = self
            .file
            .evolve
            .as_ref()
            .ok_or_else(|| CliError::invalid("/evolve", "this model defines no evolution"))?;
        let mut state = self.kets[&ev.initial].clone();
        let n = ev.steps.len();
        if !ev.repeat && t > n {
            warnings.push(format!(
                "t = {t} exceeds the {n} defined steps; later steps act as the identity"
            ));
        }
        for k in 0..t {
            let name = match (k < n, ev.repeat) {
                (true, _) => &ev.steps[k],
                (false, true) => &ev.steps[k % n],
                (false, false) => break,
            };
            state = self.unitaries[name].apply(&state)?;
        }
        Ok(state)
    }
}
