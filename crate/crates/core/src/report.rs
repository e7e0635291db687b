//! The common check report.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// One estimate instantiated on a parameter grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check_name: String,
    /// The estimate being certified, in words.
    pub anchor: String,
    pub grid: serde_json::Value,
    #[serde(with = "lossy")]
    pub observed_constant: f64,
    #[serde(with = "lossy")]
    pub threshold: f64,
    pub pass: bool,
    pub runtime_ms: Option<u64>,
    #[serde(with = "lossy_map")]
    pub values: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub table: Table,
}

impl CheckReport {
    pub fn new(check_name: &str, anchor: &str) -> Self {
        Self {
            check_name: check_name.to_string(),
            anchor: anchor.to_string(),
            grid: serde_json::Value::Null,
            observed_constant: 0.0,
            threshold: 0.0,
            pass: false,
            runtime_ms: None,
            values: BTreeMap::new(),
            notes: Vec::new(),
            table: Table::default(),
        }
    }

    pub fn value(&mut self, key: &str, v: f64) -> &mut Self {
        self.values.insert(key.to_string(), v);
        self
    }

    pub fn note(&mut self, s: impl Into<String>) -> &mut Self {
        self.notes.push(s.into());
        self
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }

    pub fn finish(mut self, started: Instant) -> Self {
        self.runtime_ms = Some(started.elapsed().as_millis() as u64);
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

// Non-finite floats are encoded as the strings "inf", "-inf" and "nan".
mod lossy {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    pub(super) enum Repr {
        Num(f64),
        Text(String),
    }

    pub(super) fn from_repr<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "nan" => Ok(f64::NAN),
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                _ => Err(E::custom(format!("not a number: {t}"))),
            },
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        from_repr(Repr::deserialize(d)?)
    }
}

mod lossy_map {
    use std::collections::BTreeMap;

    use serde::ser::SerializeMap;
    use serde::{Deserialize, Deserializer, Serializer};

    struct Wrap(f64);

    impl serde::Serialize for Wrap {
        fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
            super::lossy::serialize(&self.0, s)
        }
    }

    pub fn serialize<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(m.len()))?;
        for (k, v) in m {
            map.serialize_entry(k, &Wrap(*v))?;
        }
        map.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
        let raw = BTreeMap::<String, super::lossy::Repr>::deserialize(d)?;
        raw.into_iter().map(|(k, r)| super::lossy::from_repr(r).map(|v| (k, v))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_with_infinities() {
        let mut r = CheckReport::new("demo", "an estimate");
        r.observed_constant = f64::INFINITY;
        r.threshold = 2.0;
        r.value("x", f64::NAN).value("y", 1.5);
        let back: CheckReport = serde_json::from_str(&r.to_json()).unwrap();
        assert!(back.observed_constant.is_infinite());
        assert!(back.values["x"].is_nan());
        assert_eq!(back.values["y"], 1.5);
    }
}
