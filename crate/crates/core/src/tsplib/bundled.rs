use std::path::{Path, PathBuf};

use super::{parse_instance, parse_instance_str, Instance, TsplibError};

/// Directory searched for `<name>.tsp` when a name is not bundled.
pub const TSPLIB_DIR_ENV: &str = "HYTSP_TSPLIB_DIR";

const BUNDLED: [(&str, &str); 7] = [
    ("burma14", include_str!("../../data/instances/burma14.tsp")),
    (
        "ulysses16",
        include_str!("../../data/instances/ulysses16.tsp"),
    ),
    ("gr17", include_str!("../../data/instances/gr17.tsp")),
    (
        "ulysses22",
        include_str!("../../data/instances/ulysses22.tsp"),
    ),
    ("eil51", include_str!("../../data/instances/eil51.tsp")),
    (
        "berlin52",
        include_str!("../../data/instances/berlin52.tsp"),
    ),
    ("pcb442", include_str!("../../data/instances/pcb442.tsp")),
];

/// Names of the instances compiled into the crate.
pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

pub fn bundled_instance(name: &str) -> Option<Instance> {
    let name = name.strip_suffix(".tsp").unwrap_or(name);
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(n, text)| parse_instance_str(text, n).expect("bundled instance parses"))
}

fn env_path(name: &str) -> Option<PathBuf> {
    let dir = std::env::var_os(TSPLIB_DIR_ENV)?;
    let file = if name.ends_with(".tsp") {
        name.to_string()
    } else {
        format!("{name}.tsp")
    };
    let p = Path::new(&dir).join(file);
    p.is_file().then_some(p)
}

/// Loads `spec` as a file path, else as a bundled name, else from
/// `$HYTSP_TSPLIB_DIR/<spec>.tsp`.
pub fn resolve_instance(spec: &str) -> Result<Instance, TsplibError> {
    let path = Path::new(spec);
    if path.is_file() {
        return parse_instance(path);
    }
    if let Some(inst) = bundled_instance(spec) {
        return Ok(inst);
    }
    if let Some(p) = env_path(spec) {
        return parse_instance(p);
    }
    parse_instance(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_instances_parse() {
        for name in bundled_names() {
            let inst = bundled_instance(name).unwrap();
            assert!(inst.n >= 14, "{name}");
        }
        assert_eq!(bundled_instance("berlin52.tsp").unwrap().n, 52);
        assert!(bundled_instance("pr1002").is_none());
        assert!(matches!(
            resolve_instance("no/such/file.tsp"),
            Err(TsplibError::Io { .. })
        ));
    }
}
