//! Labeled examples with symbolic feature assignments.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::kb::Value;

/// Binary class label.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn from_bool(positive: bool) -> Self {
        if positive {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    /// Majority label; ties and the empty input go to `Negative`.
    pub fn majority<I: IntoIterator<Item = Label>>(labels: I) -> Label {
        LabelCounts::from_iter(labels).majority()
    }

    /// The label as a feature value token (`"0"` / `"1"`).
    pub fn to_value(self) -> Value {
        Value::from(if self.is_positive() { "1" } else { "0" })
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.as_u8())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(Label::Negative),
            1 => Ok(Label::Positive),
            other => Err(serde::de::Error::custom(format!(
                "label must be 0 or 1, found {other}"
            ))),
        }
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct LabelCounts {
    pub negative: usize,
    pub positive: usize,
}

impl LabelCounts {
    pub fn add(&mut self, label: Label) {
        match label {
            Label::Negative => self.negative += 1,
            Label::Positive => self.positive += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.negative + self.positive
    }

    pub fn majority(&self) -> Label {
        Label::from_bool(self.positive > self.negative)
    }

    pub fn is_pure(&self) -> bool {
        self.negative == 0 || self.positive == 0
    }
}

impl FromIterator<Label> for LabelCounts {
    fn from_iter<I: IntoIterator<Item = Label>>(iter: I) -> Self {
        let mut c = LabelCounts::default();
        for l in iter {
            c.add(l);
        }
        c
    }
}

/// The value of one feature on one example.
///
/// Sets are never empty; [`FeatureValue::set`] normalizes an empty set to
/// `Missing`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureValue {
    Missing,
    Atom(Value),
    Set(BTreeSet<Value>),
}

impl FeatureValue {
    pub fn atom(v: impl Into<Value>) -> Self {
        FeatureValue::Atom(v.into())
    }

    pub fn set<I: IntoIterator<Item = Value>>(values: I) -> Self {
        let set: BTreeSet<Value> = values.into_iter().collect();
        if set.is_empty() {
            FeatureValue::Missing
        } else {
            FeatureValue::Set(set)
        }
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, FeatureValue::Missing)
    }

    /// The atoms carried by this value: one for an atom, every member of a
    /// set, none when missing.
    pub fn members(&self) -> Vec<&Value> {
        match self {
            FeatureValue::Missing => Vec::new(),
            FeatureValue::Atom(v) => vec![v],
            FeatureValue::Set(s) => s.iter().collect(),
        }
    }

    fn to_json(&self) -> serde_json::Value {
        match self {
            FeatureValue::Missing => serde_json::Value::Null,
            FeatureValue::Atom(v) => serde_json::Value::String(v.to_string()),
            FeatureValue::Set(s) => s.iter().map(|v| v.to_string()).collect(),
        }
    }
}

impl fmt::Display for FeatureValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureValue::Missing => f.write_str("?"),
            FeatureValue::Atom(v) => write!(f, "{v}"),
            FeatureValue::Set(s) => {
                f.write_str("{")?;
                for (i, v) in s.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("}")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Example {
    pub id: String,
    pub label: Label,
    pub values: BTreeMap<String, FeatureValue>,
}

impl Example {
    pub fn new(id: impl Into<String>, label: Label) -> Self {
        Example {
            id: id.into(),
            label,
            values: BTreeMap::new(),
        }
    }

    pub fn with(mut self, column: impl Into<String>, value: FeatureValue) -> Self {
        self.values.insert(column.into(), value);
        self
    }

    pub fn value(&self, column: &str) -> &FeatureValue {
        static MISSING: FeatureValue = FeatureValue::Missing;
        self.values.get(column).unwrap_or(&MISSING)
    }
}

/// A base column with an optional declared value type.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    pub value_type: Option<String>,
}

impl Column {
    pub fn new(name: impl Into<String>) -> Self {
        Column {
            name: name.into(),
            value_type: None,
        }
    }

    pub fn typed(name: impl Into<String>, value_type: impl Into<String>) -> Self {
        Column {
            name: name.into(),
            value_type: Some(value_type.into()),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DatasetError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate example id `{0}`")]
    DuplicateId(String),
    #[error("line {line}: label must be 0 or 1")]
    BadLabel { line: usize },
    #[error("example `{id}`: feature `{feature}` is not in the schema")]
    UnknownFeature { id: String, feature: String },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Dataset {
    columns: Vec<Column>,
    examples: Vec<Example>,
}

#[derive(Deserialize)]
struct Header {
    schema: Vec<Column>,
}

#[derive(Deserialize)]
struct Record {
    id: serde_json::Value,
    label: serde_json::Value,
    #[serde(default)]
    features: BTreeMap<String, serde_json::Value>,
}

fn parse_value(raw: &serde_json::Value) -> Result<FeatureValue, String> {
    match raw {
        serde_json::Value::Null => Ok(FeatureValue::Missing),
        serde_json::Value::String(s) if s.is_empty() => Ok(FeatureValue::Missing),
        serde_json::Value::String(s) => Ok(FeatureValue::atom(s.as_str())),
        serde_json::Value::Array(items) => {
            let mut set = BTreeSet::new();
            for item in items {
                match item.as_str() {
                    Some(s) if !s.is_empty() => {
                        set.insert(Value::from(s));
                    }
                    _ => return Err("set members must be non-empty strings".into()),
                }
            }
            Ok(FeatureValue::set(set))
        }
        _ => Err("feature values must be a string or an array of strings".into()),
    }
}

impl Dataset {
    /// Builds a dataset, filling unassigned columns with `Missing`.
    pub fn new(columns: Vec<Column>, examples: Vec<Example>) -> Result<Self, DatasetError> {
        let names: HashSet<&str> = columns.iter().map(|c| c.name.as_str()).collect();
        let mut ids = HashSet::new();
        for ex in &examples {
            if !ids.insert(ex.id.as_str()) {
                return Err(DatasetError::DuplicateId(ex.id.clone()));
            }
            if let Some(f) = ex.values.keys().find(|k| !names.contains(k.as_str())) {
                return Err(DatasetError::UnknownFeature {
                    id: ex.id.clone(),
                    feature: f.clone(),
                });
            }
        }
        let mut examples = examples;
        for ex in &mut examples {
            for c in &columns {
                ex.values
                    .entry(c.name.clone())
                    .or_insert(FeatureValue::Missing);
            }
        }
        Ok(Dataset { columns, examples })
    }

    /// Parses JSON lines. An optional first line `{"schema": [...]}` declares
    /// the columns and their value types; without it the columns are the
    /// feature names in order of first appearance.
    pub fn from_jsonl(text: &str) -> Result<Self, DatasetError> {
        let mut columns: Option<Vec<Column>> = None;
        let mut seen: Vec<Column> = Vec::new();
        let mut examples = Vec::new();
        let mut first = true;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let json: serde_json::Value =
                serde_json::from_str(raw).map_err(|e| DatasetError::Malformed {
                    line,
                    message: e.to_string(),
                })?;
            if first && json.get("schema").is_some() {
                let header: Header =
                    serde_json::from_value(json).map_err(|e| DatasetError::Malformed {
                        line,
                        message: e.to_string(),
                    })?;
                columns = Some(header.schema);
                first = false;
                continue;
            }
            first = false;
            let rec: Record =
                serde_json::from_value(json).map_err(|e| DatasetError::Malformed {
                    line,
                    message: e.to_string(),
                })?;
            let id = match rec.id {
                serde_json::Value::String(s) => s,
                serde_json::Value::Number(n) => n.to_string(),
                _ => {
                    return Err(DatasetError::Malformed {
                        line,
                        message: "id must be a string or number".into(),
                    })
                }
            };
            let label = match rec.label.as_u64() {
                Some(0) => Label::Negative,
                Some(1) => Label::Positive,
                _ => return Err(DatasetError::BadLabel { line }),
            };
            let mut ex = Example::new(id, label);
            for (name, raw) in &rec.features {
                let value = parse_value(raw)
                    .map_err(|message| DatasetError::Malformed { line, message })?;
                if columns.is_none() && !seen.iter().any(|c| &c.name == name) {
                    seen.push(Column::new(name.clone()));
                }
                ex.values.insert(name.clone(), value);
            }
            examples.push(ex);
        }
        Dataset::new(columns.unwrap_or(seen), examples)
    }

    /// Serializes to JSON lines with a schema header.
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::json!({ "schema": self.columns }).to_string();
        out.push('\n');
        for ex in &self.examples {
            let features: serde_json::Map<String, serde_json::Value> = self
                .columns
                .iter()
                .map(|c| (c.name.clone(), ex.value(&c.name).to_json()))
                .collect();
            let rec = serde_json::json!({
                "id": ex.id,
                "label": ex.label.as_u8(),
                "features": features,
            });
            out.push_str(&rec.to_string());
            out.push('\n');
        }
        out
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.examples.iter().map(|e| e.label).collect()
    }

    pub fn label_counts(&self) -> LabelCounts {
        self.examples.iter().map(|e| e.label).collect()
    }

    /// The examples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            columns: self.columns.clone(),
            examples: indices.iter().map(|&i| self.examples[i].clone()).collect(),
        }
    }

    /// Appends the examples of `other`. Both must share columns and ids must
    /// stay unique.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset, DatasetError> {
        let mut examples = self.examples.clone();
        examples.extend(other.examples.iter().cloned());
        Dataset::new(self.columns.clone(), examples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atoms_sets_and_missing() {
        let ds = Dataset::from_jsonl(
            r#"{"id":"p1","label":1,"features":{"surname":"haddad","gender":"f"}}
{"id":"d1","label":0,"features":{"entities":["texas","austin"]}}
{"id":"d2","label":0,"features":{"entities":[]}}"#,
        )
        .unwrap();
        let p1 = &ds.examples()[0];
        assert_eq!(p1.label, Label::Positive);
        assert_eq!(p1.value("surname"), &FeatureValue::atom("haddad"));
        assert_eq!(p1.value("gender"), &FeatureValue::atom("f"));
        assert_eq!(p1.value("entities"), &FeatureValue::Missing);
        match ds.examples()[1].value("entities") {
            FeatureValue::Set(s) => assert_eq!(s.len(), 2),
            other => panic!("{other:?}"),
        }
        assert_eq!(ds.examples()[2].value("entities"), &FeatureValue::Missing);
        assert_eq!(ds.columns().len(), 3);
    }

    #[test]
    fn rejects_bad_records() {
        let dup = "{\"id\":\"a\",\"label\":0}\n{\"id\":\"a\",\"label\":1}";
        assert_eq!(
            Dataset::from_jsonl(dup),
            Err(DatasetError::DuplicateId("a".into()))
        );
        let bad_label = "{\"id\":\"a\",\"label\":2}";
        assert_eq!(
            Dataset::from_jsonl(bad_label),
            Err(DatasetError::BadLabel { line: 1 })
        );
        let unknown = "{\"schema\":[{\"name\":\"x\"}]}\n{\"id\":\"a\",\"label\":0,\"features\":{\"y\":\"1\"}}";
        assert!(matches!(
            Dataset::from_jsonl(unknown),
            Err(DatasetError::UnknownFeature { .. })
        ));
        assert!(matches!(
            Dataset::from_jsonl("not json"),
            Err(DatasetError::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn jsonl_round_trip_keeps_schema_types() {
        let ds = Dataset::new(
            vec![Column::typed("surname", "surname"), Column::new("tags")],
            vec![
                Example::new("a", Label::Positive).with("surname", FeatureValue::atom("nowak")),
                Example::new("b", Label::Negative)
                    .with("tags", FeatureValue::set(["x".into(), "y".into()])),
            ],
        )
        .unwrap();
        let again = Dataset::from_jsonl(&ds.to_jsonl()).unwrap();
        assert_eq!(ds, again);
    }

    #[test]
    fn majority_ties_to_negative() {
        assert_eq!(Label::majority([]), Label::Negative);
        assert_eq!(
            Label::majority([Label::Positive, Label::Negative]),
            Label::Negative
        );
        assert_eq!(
            Label::majority([Label::Positive, Label::Positive, Label::Negative]),
            Label::Positive
        );
    }
}
