use std::collections::BTreeMap;

use super::TsplibError;

const BUNDLED: &str = include_str!("../../data/optima.tsv");

#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceOptimum {
    pub instance_name: String,
    pub optimum_length: f64,
    /// Re-derived by the exact solver rather than only copied from TSPLIB.
    pub verified: bool,
}

/// Name-keyed table of reference optima loaded from `optima.tsv`.
#[derive(Clone, Debug, Default)]
pub struct OptimaRegistry {
    entries: BTreeMap<String, ReferenceOptimum>,
}

impl OptimaRegistry {
    /// The registry shipped with the crate.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled optima.tsv is well formed")
    }

    /// Tab separated `name value verified-flag`, `#` comments allowed.
    pub fn parse(text: &str) -> Result<Self, TsplibError> {
        let mut entries = BTreeMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            if fields.len() < 2 {
                return Err(TsplibError::MalformedHeader(format!(
                    "optima record {line:?}"
                )));
            }
            let value: f64 = fields[1]
                .parse()
                .map_err(|_| TsplibError::BadNumber(fields[1].to_string()))?;
            if value <= 0.0 {
                return Err(TsplibError::MalformedHeader(format!(
                    "non-positive optimum for {}",
                    fields[0]
                )));
            }
            let verified = matches!(fields.get(2), Some(&"yes") | Some(&"true") | Some(&"1"));
            entries.insert(
                fields[0].to_string(),
                ReferenceOptimum {
                    instance_name: fields[0].to_string(),
                    optimum_length: value,
                    verified,
                },
            );
        }
        Ok(Self { entries })
    }

    pub fn get(&self, name: &str) -> Option<&ReferenceOptimum> {
        self.entries.get(normalize(name))
    }

    pub fn iter(&self) -> impl Iterator<Item = &ReferenceOptimum> {
        self.entries.values()
    }
}

/// TSPLIB files are inconsistent about a trailing `.tsp` in `NAME`.
fn normalize(name: &str) -> &str {
    name.trim().strip_suffix(".tsp").unwrap_or(name.trim())
}

/// Looks `name` up in the bundled registry.
pub fn lookup_optimum(name: &str) -> Option<ReferenceOptimum> {
    OptimaRegistry::bundled().get(name).cloned()
}
