mod error;
mod model;
mod report;
mod schema;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qhist_core::histories::Condition;
use qhist_core::properties::born;
use qhist_core::{EventSet, Operator, SampleSpace, Tolerances};
use serde_json::{json, Value};

use error::{CliError, Result};
use model::Model;
use report::{Cell, Format, Report};

/// Consistent-histories calculations on small discrete-time quantum models.
///
/// Exit codes: 0 ok, 2 parse or usage error, 3 invalid model or name,
/// 4 incompatible families, 5 conditioning on a null event,
/// 6 probabilities requested from an inconsistent family.
#[derive(Parser)]
#[command(name = "qhist", version)]
struct Cli {
    /// Model file (JSON).
    #[arg(long, global = true, value_name = "FILE")]
    model: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    out: Format,

    /// Tolerance for norms, unitarity, hermiticity and projectors.
    #[arg(long, global = true, env = "QHIST_TOL", value_name = "EPS", value_parser = positive)]
    tol: Option<f64>,

    /// Decoherence condition used for consistency.
    #[arg(
        long,
        global = true,
        default_value = "medium",
        value_name = "medium|weak"
    )]
    consistency: Condition,

    /// Also list rows of zero probability.
    #[arg(long, global = true)]
    all: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Amplitudes of the state after t steps.
    Evolve {
        #[arg(long)]
        t: usize,
    },
    /// Born probabilities at time t for a sample space (default: the computational basis).
    Born {
        #[arg(long)]
        t: usize,
        /// Comma-separated projector names forming a decomposition of the identity.
        #[arg(long, value_delimiter = ',')]
        space: Vec<String>,
    },
    /// Consistency, probabilities and conditionals within a family of histories.
    Family {
        /// Family name; `A+B` combines compatible families.
        #[arg(long)]
        name: String,
        /// Event time for toy-model families.
        #[arg(long)]
        t: Option<usize>,
        #[command(subcommand)]
        action: FamilyAction,
    },
    /// Print the model as an explicit custom model file.
    Export {
        /// Include toy-model families with events at this time.
        #[arg(long)]
        t: Option<usize>,
    },
}

#[derive(Subcommand)]
enum FamilyAction {
    /// Decoherence check.
    Check,
    /// Probability of each history.
    Prob,
    /// Pr(query | given) for event sets like `U@t3` or `u@t2,l@t2`.
    Cond {
        #[arg(long)]
        given: String,
        #[arg(long)]
        query: String,
    },
}

fn positive(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() && x > 0.0 => Ok(x),
        _ => Err(format!("expected a positive number, got {s:?}")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: &Cli) -> Result<String> {
    let tol = cli.tol.map(Tolerances::uniform).unwrap_or_default();
    let path = cli
        .model
        .as_ref()
        .ok_or_else(|| CliError::Usage("--model FILE is required".into()))?;
    let model = model::load(path, &tol)?;
    let ctx = Ctx {
        model: &model,
        tol,
        condition: cli.consistency,
        all: cli.all,
    };
    let report = match &cli.command {
        Command::Evolve { t } => ctx.evolve(*t)?,
        Command::Born { t, space } => ctx.born(*t, space)?,
        Command::Family { name, t, action } => ctx.family(name, *t, action)?,
        Command::Export { t } => return Ok(model.export(*t)?.to_json()),
    };
    Ok(report.render(cli.out))
}

struct Ctx<'a> {
    model: &'a Model,
    tol: Tolerances,
    condition: Condition,
    all: bool,
}

fn warn(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn parse_events(s: &str, flag: &str) -> Result<EventSet> {
    s.parse()
        .map_err(|e: String| CliError::Usage(format!("{flag}: {e}")))
}

impl Ctx<'_> {
    fn evolve(&self, t: usize) -> Result<Report> {
        let ev = self.model.evolve(t)?;
        warn(&ev.warnings);
        let mut rows = Vec::new();
        let mut json_rows = Vec::new();
        for (i, a) in ev.state.amplitudes().iter().enumerate() {
            if !self.all && a.norm() <= self.tol.norm {
                continue;
            }
            let label = self.model.basis_label(i);
            json_rows
                .push(json!({"basis_label": label, "re": a.re, "im": a.im, "prob": a.norm_sqr()}));
            rows.push(vec![
                label.into(),
                a.re.into(),
                a.im.into(),
                a.norm_sqr().into(),
            ]);
        }
        Ok(Report {
            heading: vec![format!("{} model, t = {t}", self.model.kind())],
            columns: vec!["basis_label", "re", "im", "prob"],
            rows,
            heading_only: false,
            json: json!({
                "command": "evolve",
                "model": self.model.kind(),
                "t": t,
                "warnings": ev.warnings,
                "amplitudes": json_rows,
            }),
        })
    }

    fn born(&self, t: usize, names: &[String]) -> Result<Report> {
        let ev = self.model.evolve(t)?;
        warn(&ev.warnings);
        let dim = self.model.dim();
        let space = if names.is_empty() {
            SampleSpace::computational_basis(dim, |i| self.model.basis_label(i))
        } else {
            let projectors = names
                .iter()
                .map(|n| {
                    self.model
                        .projector(n)
                        .map(|p| (*p).clone())
                        .ok_or_else(|| CliError::invalid("", format!("no projector named {n:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            SampleSpace::new(projectors, names.to_vec(), &self.tol)?
        };
        let probs = born(&ev.state, &Operator::identity(dim), &space, &self.tol)?;
        let mut rows = Vec::new();
        let mut json_rows = Vec::new();
        for (label, p) in space.labels().iter().zip(probs) {
            if !self.all && p <= self.tol.prob {
                continue;
            }
            json_rows.push(json!({"label": label, "probability": p}));
            rows.push(vec![label.clone().into(), p.into()]);
        }
        Ok(Report {
            heading: vec![format!("Born probabilities at t = {t}")],
            columns: vec!["label", "probability"],
            rows,
            heading_only: false,
            json: json!({
                "command": "born",
                "model": self.model.kind(),
                "t": t,
                "warnings": ev.warnings,
                "probabilities": json_rows,
            }),
        })
    }

    fn family(&self, name: &str, t: Option<usize>, action: &FamilyAction) -> Result<Report> {
        let fam = self.model.family(name, t, self.condition, &self.tol)?;
        let cond = self.condition;
        match action {
            FamilyAction::Check => {
                let r = fam.check_consistency(cond, &self.tol)?;
                let status = if r.consistent {
                    "consistent"
                } else {
                    "inconsistent"
                };
                let mut heading = vec![
                    format!("family {name}: {status}"),
                    format!(
                        "condition {cond}, tolerance {:e}, {} histories",
                        r.tolerance, r.histories
                    ),
                ];
                let mut row: Vec<Cell> = vec![
                    name.into(),
                    status.into(),
                    cond.name().into(),
                    r.histories.to_string().into(),
                ];
                let worst = match &r.worst {
                    Some(w) => {
                        heading.push(format!(
                            "worst off-diagonal {:e} between {} and {}",
                            w.value, w.a_label, w.b_label
                        ));
                        row.extend([
                            w.value.into(),
                            w.a_label.clone().into(),
                            w.b_label.clone().into(),
                        ]);
                        json!({"a": w.a_label, "b": w.b_label, "value": w.value})
                    }
                    None => {
                        row.extend(["".into(), "".into(), "".into()]);
                        Value::Null
                    }
                };
                Ok(Report {
                    heading,
                    columns: vec![
                        "family",
                        "status",
                        "condition",
                        "histories",
                        "worst",
                        "worst_a",
                        "worst_b",
                    ],
                    rows: vec![row],
                    heading_only: true,
                    json: json!({
                        "command": "family check",
                        "family": name,
                        "status": status,
                        "condition": cond.name(),
                        "tolerance": r.tolerance,
                        "histories": r.histories,
                        "worst": worst,
                    }),
                })
            }
            FamilyAction::Prob => {
                let probs = fam.probabilities(cond, &self.tol)?;
                let mut rows = Vec::new();
                let mut json_rows = Vec::new();
                for p in probs {
                    if !self.all && p.probability <= self.tol.prob {
                        continue;
                    }
                    json_rows.push(json!({
                        "history": p.label,
                        "probability": p.probability,
                        "implicit": p.implicit,
                    }));
                    rows.push(vec![p.label.into(), p.probability.into()]);
                }
                Ok(Report {
                    heading: vec![format!("family {name} ({cond} consistency)")],
                    columns: vec!["history", "probability"],
                    rows,
                    heading_only: false,
                    json: json!({
                        "command": "family prob",
                        "family": name,
                        "condition": cond.name(),
                        "probabilities": json_rows,
                    }),
                })
            }
            FamilyAction::Cond { given, query } => {
                let g = parse_events(given, "--given")?;
                let q = parse_events(query, "--query")?;
                let p = fam.conditional(&g, &q, cond, &self.tol)?;
                Ok(Report {
                    heading: vec![format!("Pr({q} | {g}) = {p:.12}")],
                    columns: vec!["given", "query", "probability"],
                    rows: vec![vec![g.to_string().into(), q.to_string().into(), p.into()]],
                    heading_only: true,
                    json: json!({
                        "command": "family cond",
                        "family": name,
                        "condition": cond.name(),
                        "given": g.to_string(),
                        "query": q.to_string(),
                        "probability": p,
                    }),
                })
            }
        }
    }
}
