use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A hyperparameter value. Integers and floats stay distinct so that
/// fingerprints serialize `2` and `2.0` differently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
    Text(String),
}

impl ParamValue {
    /// Parses `s` as an integer, then a float, else keeps it as text.
    pub fn parse(s: &str) -> ParamValue {
        let s = s.trim();
        if let Ok(i) = s.parse::<i64>() {
            ParamValue::Int(i)
        } else if let Ok(f) = s.parse::<f64>() {
            ParamValue::Float(f)
        } else {
            ParamValue::Text(s.to_string())
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            ParamValue::Int(i) => Some(i as f64),
            ParamValue::Float(f) => Some(f),
            ParamValue::Text(_) => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match *self {
            ParamValue::Int(i) => Some(i),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Text(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(x) => write!(f, "{x:?}"),
            ParamValue::Text(s) => f.write_str(s),
        }
    }
}

impl From<i64> for ParamValue {
    fn from(v: i64) -> Self {
        ParamValue::Int(v)
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Float(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Text(v.to_string())
    }
}

/// A full assignment of parameter name to value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Config(BTreeMap<String, ParamValue>);

impl Config {
    pub fn new() -> Self {
        Config::default()
    }

    pub fn set(&mut self, name: impl Into<String>, value: ParamValue) {
        self.0.insert(name.into(), value);
    }

    pub fn with(mut self, name: impl Into<String>, value: impl Into<ParamValue>) -> Self {
        self.set(name, value.into());
        self
    }

    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.0.get(name)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ParamValue)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Canonical serialization: compact JSON with sorted keys.
    pub fn fingerprint(&self) -> String {
        serde_json::to_string(&self.0).expect("config values always serialize")
    }
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, v) in &self.0 {
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

/// One tunable dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParam {
    pub name: String,
    values: Vec<ParamValue>,
    default: usize,
    /// Higher means more expensive to vary.
    pub cost_rank: u32,
}

impl HyperParam {
    pub fn new<V: Into<ParamValue>>(
        name: impl Into<String>,
        values: impl IntoIterator<Item = V>,
        default: impl Into<ParamValue>,
        cost_rank: u32,
    ) -> Result<Self> {
        let name = name.into();
        let values: Vec<ParamValue> = unify_numeric(values.into_iter().map(Into::into).collect());
        let default = unify_numeric_one(&values, default.into());
        if name.is_empty() {
            return Err(Error::structural("hyperparameter with an empty name"));
        }
        if values.is_empty() {
            return Err(Error::structural(format!("{name}: no candidate values")));
        }
        for (i, v) in values.iter().enumerate() {
            if values[..i].contains(v) {
                return Err(Error::structural(format!("{name}: duplicate value {v}")));
            }
        }
        let default = values
            .iter()
            .position(|v| *v == default)
            .ok_or_else(|| Error::structural(format!("{name}: default {default} is not a candidate value")))?;
        Ok(HyperParam {
            name,
            values,
            default,
            cost_rank,
        })
    }

    pub fn values(&self) -> &[ParamValue] {
        &self.values
    }

    pub fn default_value(&self) -> &ParamValue {
        &self.values[self.default]
    }
}

// A parameter mixing integer and float literals ("0, 0.2, 0.5") is a float
// parameter.
fn unify_numeric(values: Vec<ParamValue>) -> Vec<ParamValue> {
    let has_float = values.iter().any(|v| matches!(v, ParamValue::Float(_)));
    let all_numeric = values.iter().all(|v| v.as_f64().is_some());
    if has_float && all_numeric {
        values
            .into_iter()
            .map(|v| ParamValue::Float(v.as_f64().unwrap()))
            .collect()
    } else {
        values
    }
}

fn unify_numeric_one(values: &[ParamValue], v: ParamValue) -> ParamValue {
    match (values.first(), &v) {
        (Some(ParamValue::Float(_)), ParamValue::Int(i)) => ParamValue::Float(*i as f64),
        _ => v,
    }
}

/// Parameters in descending cost order; equal ranks keep declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParamSpace {
    params: Vec<HyperParam>,
}

impl HyperParamSpace {
    pub fn new(mut params: Vec<HyperParam>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::structural("empty hyperparameter space"));
        }
        let mut names = HashSet::new();
        for p in &params {
            if !names.insert(p.name.clone()) {
                return Err(Error::structural(format!("duplicate hyperparameter '{}'", p.name)));
            }
        }
        params.sort_by_key(|p| std::cmp::Reverse(p.cost_rank));
        Ok(HyperParamSpace { params })
    }

    pub fn params(&self) -> &[HyperParam] {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn default_config(&self) -> Config {
        let mut config = Config::new();
        for p in &self.params {
            config.set(p.name.clone(), p.default_value().clone());
        }
        config
    }

    /// Σ|values|, the bound on greedy trials.
    pub fn value_count(&self) -> usize {
        self.params.iter().map(|p| p.values.len()).sum()
    }

    /// Π|values|, or `None` on overflow.
    pub fn grid_size(&self) -> Option<u64> {
        self.params
            .iter()
            .try_fold(1u64, |acc, p| acc.checked_mul(p.values.len() as u64))
    }

    /// Parses the key-value space format:
    ///
    /// ```text
    /// name = dropout
    /// values = 0, 0.2, 0.35, 0.5
    /// default = 0.2
    /// cost_rank = 4
    /// ```
    ///
    /// Each `name` line starts a new parameter. `#` starts a comment.
    pub fn from_config_text(text: &str) -> Result<Self> {
        #[derive(Default)]
        struct Partial {
            name: String,
            values: Option<Vec<ParamValue>>,
            default: Option<ParamValue>,
            cost_rank: Option<u32>,
        }
        fn finish(p: Partial) -> Result<HyperParam> {
            let missing = |key: &str| Error::structural(format!("{}: missing '{key}'", p.name));
            let values = p.values.clone().ok_or_else(|| missing("values"))?;
            let default = p.default.clone().ok_or_else(|| missing("default"))?;
            let rank = p.cost_rank.ok_or_else(|| missing("cost_rank"))?;
            HyperParam::new(p.name, values, default, rank)
        }

        let mut params = Vec::new();
        let mut current: Option<Partial> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::structural(format!("space line {}: {msg}", lineno + 1));
            let (key, value) = line.split_once('=').ok_or_else(|| bad("expected key = value"))?;
            let (key, value) = (key.trim(), value.trim());
            if key == "name" {
                if let Some(p) = current.take() {
                    params.push(finish(p)?);
                }
                current = Some(Partial {
                    name: value.to_string(),
                    ..Partial::default()
                });
                continue;
            }
            let p = current.as_mut().ok_or_else(|| bad("key before the first 'name'"))?;
            match key {
                "values" => {
                    p.values = Some(value.split(',').map(ParamValue::parse).collect());
                }
                "default" => p.default = Some(ParamValue::parse(value)),
                "cost_rank" => {
                    p.cost_rank = Some(
                        value
                            .parse()
                            .map_err(|_| bad("cost_rank must be a non-negative integer"))?,
                    );
                }
                other => return Err(bad(&format!("unknown key '{other}'"))),
            }
        }
        if let Some(p) = current.take() {
            params.push(finish(p)?);
        }
        HyperParamSpace::new(params)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_config_text(&text)
    }

    pub fn to_config_text(&self) -> String {
        let mut out = String::new();
        for p in &self.params {
            let values: Vec<String> = p.values.iter().map(ToString::to_string).collect();
            out.push_str(&format!(
                "name = {}\nvalues = {}\ndefault = {}\ncost_rank = {}\n\n",
                p.name,
                values.join(", "),
                p.default_value(),
                p.cost_rank
            ));
        }
        out
    }
}

/// The seven-parameter recurrent-network space with the baseline network
/// as defaults.
///
/// Cost ranks: layer count 7; layer type and bidirectionality 6; dropout 4;
/// units 3; batch size 2; epoch size 1. The baseline batch size of 100 sits
/// inside the batch domain in place of 128.
pub fn recurrent_default_space() -> HyperParamSpace {
    let params = vec![
        HyperParam::new("layers", [2i64, 4], 2i64, 7),
        HyperParam::new("layer_type", ["gru", "lstm"], "gru", 6),
        HyperParam::new("bidirectional", ["no", "yes"], "no", 6),
        HyperParam::new("dropout", [0.0, 0.2, 0.35, 0.5], 0.2, 4),
        HyperParam::new("units", [200i64, 500, 1000], 500i64, 3),
        HyperParam::new("batch_size", [32i64, 64, 100, 256, 512], 100i64, 2),
        HyperParam::new("epoch_size", [5000i64, 20000, 100_000, 250_000], 20000i64, 1),
    ];
    HyperParamSpace::new(
        params
            .into_iter()
            .collect::<Result<_>>()
            .expect("built-in space is valid"),
    )
    .expect("built-in space is valid")
}
