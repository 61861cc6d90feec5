//! On-disk model files.

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, Result};

/// `[re, im]`
pub type Complex = [f64; 2];

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelFile {
    ToyDecay(ToyDecayFile),
    ToyDecayDetector(ToyDetectorFile),
    SternGerlach(SternGerlachFile),
    Custom(CustomFile),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyDecayFile {
    #[serde(rename = "M")]
    pub m: usize,
    pub alpha: Complex,
    pub beta: Complex,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyDetectorFile {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub alpha: Complex,
    pub beta: Complex,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger_site: Option<i64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SternGerlachFile {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomFile {
    pub dim: usize,
    /// Names of the computational basis states, `0..dim` when absent.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub basis_labels: Vec<String>,
    #[serde(default)]
    pub kets: BTreeMap<String, KetSpec>,
    #[serde(default)]
    pub unitaries: BTreeMap<String, MatrixSpec>,
    #[serde(default)]
    pub projectors: BTreeMap<String, ProjectorSpec>,
    #[serde(default)]
    pub families: BTreeMap<String, FamilySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evolve: Option<EvolveSpec>,
}

/// Dense amplitudes, or `{"sparse": [[index, re, im], ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum KetSpec {
    Dense(Vec<Complex>),
    Sparse { sparse: Vec<(usize, f64, f64)> },
}

/// Dense rows of `[re, im]`, or `{"sparse": [[row, col, re, im], ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum MatrixSpec {
    Dense(Vec<Vec<Complex>>),
    Sparse {
        sparse: Vec<(usize, usize, f64, f64)>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum ProjectorSpec {
    /// Span of computational basis vectors.
    Basis {
        basis: Vec<usize>,
    },
    /// Span of orthonormal kets.
    Kets {
        kets: Vec<KetSpec>,
    },
    Matrix(MatrixSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub initial: String,
    /// Unitary names, one per step `t(k-1) -> tk`.
    pub steps: Vec<String>,
    pub tree: Vec<TreeSpec>,
}

/// A branch: projector name (`I` for the identity) and what follows it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeSpec {
    pub p: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<TreeSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveSpec {
    pub initial: String,
    pub steps: Vec<String>,
    /// Cycle through `steps`; otherwise the identity acts once they run out.
    #[serde(default)]
    pub repeat: bool,
}

pub const KINDS: [&str; 4] = ["toy_decay", "toy_decay_detector", "stern_gerlach", "custom"];

pub fn parse(text: &str) -> Result<ModelFile> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| CliError::parse("", e.to_string()))?;
    let Value::Object(mut fields) = value else {
        return Err(CliError::parse("", "a model file must be a JSON object"));
    };
    let kind = match fields.remove("kind") {
        Some(Value::String(k)) => k,
        Some(_) => return Err(CliError::parse("/kind", "expected a string")),
        None => return Err(CliError::parse("/kind", "missing model kind")),
    };
    let rest = Value::Object(fields);
    Ok(match kind.as_str() {
        "toy_decay" => ModelFile::ToyDecay(typed(rest)?),
        "toy_decay_detector" => ModelFile::ToyDecayDetector(typed(rest)?),
        "stern_gerlach" => ModelFile::SternGerlach(typed(rest)?),
        "custom" => ModelFile::Custom(typed(rest)?),
        other => {
            return Err(CliError::parse(
                "/kind",
                format!(
                    "unknown kind {other:?}, expected one of {}",
                    KINDS.join(", ")
                ),
            ))
        }
    })
}

fn typed<T: DeserializeOwned>(value: Value) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let pointer = pointer(e.path());
        CliError::parse(pointer, e.into_inner().to_string())
    })
}

fn pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => {
                out.push('/');
                out.push_str(&escape(key));
            }
            Segment::Enum { .. } | Segment::Unknown => {}
        }
    }
    out
}

/// JSON-pointer escaping of one reference token.
pub fn escape(token: &str) -> String {
    token.replace('~', "~0").replace('/', "~1")
}

impl ModelFile {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model files always serialize");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type_errors_carry_a_pointer() {
        let err = parse(r#"{"kind": "toy_decay", "M": 3, "alpha": [1, "x"], "beta": [0, 0]}"#)
            .unwrap_err();
        match err {
            CliError::Parse { pointer, .. } => assert_eq!(pointer, "/alpha/1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(parse(r#"{"kind": "stern_gerlach", "spin": 1}"#).is_err());
        assert!(parse(r#"{"kind": "stern_gerlach"}"#).is_ok());
        assert!(parse(r#"{"kind": "nuclear"}"#).is_err());
    }

    #[test]
    fn projector_forms() {
        let p: ProjectorSpec = serde_json::from_str(r#"{"basis": [0, 2]}"#).unwrap();
        assert_eq!(p, ProjectorSpec::Basis { basis: vec![0, 2] });
        let p: ProjectorSpec = serde_json::from_str(r#"{"sparse": [[0, 0, 1, 0]]}"#).unwrap();
        assert!(matches!(
            p,
            ProjectorSpec::Matrix(MatrixSpec::Sparse { .. })
        ));
        let p: ProjectorSpec =
            serde_json::from_str(r#"[[[1, 0], [0, 0]], [[0, 0], [0, 0]]]"#).unwrap();
        assert!(matches!(p, ProjectorSpec::Matrix(MatrixSpec::Dense(_))));
        assert_eq!(escape("a/b~c"), "a~1b~0c");
    }
}
