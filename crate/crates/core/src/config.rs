//! TOML scenario files.
//!
//! A file holds either one scenario (its fields at top level) or a suite:
//!
//! ```toml
//! schema_version = 1
//! [defaults]
//! sim.seed = 7
//! [[scenarios]]
//! builtin = "case2"
//! mode = "baseline"
//! [sweep]
//! "paradigm.beta" = [0.1, 0.2, 0.5]
//! ```
//!
//! Layers merge deep, lowest first: builtin, defaults, entry, `--set`
//! overrides, one sweep combination. Arrays are replaced, not merged.

use std::collections::HashSet;
use std::ops::Range;

use serde::Deserialize;
use toml::{Spanned, Table, Value};

use crate::engine::Mode;
use crate::error::ConfigError;
use crate::scenarios::{builtin, BuiltinName, ScenarioDef};

pub const SCHEMA_VERSION: i64 = 1;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSuite {
    #[allow(dead_code)]
    schema_version: i64,
    #[serde(default)]
    defaults: Table,
    scenarios: Vec<Spanned<Table>>,
    #[serde(default)]
    sweep: Table,
}

/// A parsed `--set` override.
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub path: Vec<String>,
    pub value: Value,
}

impl Override {
    /// `KEY=VALUE`; the value is read as a TOML value, else taken as a bare string.
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        let (key, raw) = s
            .split_once('=')
            .ok_or_else(|| ConfigError::Parse(format!("override '{s}' is not KEY=VALUE")))?;
        let path = split_path(key.trim())?;
        Ok(Self {
            path,
            value: parse_value(raw.trim()),
        })
    }
}

fn parse_value(raw: &str) -> Value {
    match toml::from_str::<Table>(&format!("v = {raw}")) {
        Ok(mut t) if t.len() == 1 => t
            .remove("v")
            .unwrap_or_else(|| Value::String(raw.to_owned())),
        _ => Value::String(raw.to_owned()),
    }
}

fn split_path(key: &str) -> Result<Vec<String>, ConfigError> {
    let parts: Vec<String> = key.split('.').map(|p| p.trim().to_owned()).collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::Parse(format!("malformed key path '{key}'")));
    }
    Ok(parts)
}

fn line_of(text: &str, span: Option<Range<usize>>) -> usize {
    span.map_or(1, |s| {
        text[..s.start.min(text.len())].matches('\n').count() + 1
    })
}

fn parse_err(text: &str, e: toml::de::Error) -> ConfigError {
    let line = line_of(text, e.span());
    ConfigError::Parse(format!("line {line}: {}", e.message().trim_end()))
}

pub fn merge(base: &mut Table, overlay: Table) {
    for (k, v) in overlay {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Sets `path` in `root`, creating tables on the way. Numeric segments index arrays.
pub fn set_path(root: &mut Table, path: &[String], value: Value) -> Result<(), ConfigError> {
    let bad = || {
        ConfigError::Parse(format!(
            "key path '{}' does not fit the config",
            path.join(".")
        ))
    };
    let (first, rest) = path
        .split_first()
        .ok_or_else(|| ConfigError::Parse("empty key path".into()))?;
    if rest.is_empty() {
        root.insert(first.clone(), value);
        return Ok(());
    }
    let mut cur = root
        .entry(first.clone())
        .or_insert_with(|| Value::Table(Table::new()));
    for (i, seg) in rest.iter().enumerate() {
        let last = i + 1 == rest.len();
        let slot = match cur {
            Value::Table(t) if last => {
                t.insert(seg.clone(), value);
                return Ok(());
            }
            Value::Table(t) => t
                .entry(seg.clone())
                .or_insert_with(|| Value::Table(Table::new())),
            Value::Array(a) => {
                let idx: usize = seg.parse().map_err(|_| bad())?;
                let slot = a.get_mut(idx).ok_or_else(bad)?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(bad()),
        };
        cur = slot;
    }
    unreachable!("loop returns on the last segment")
}

fn builtin_table(name: &str, mode: Mode) -> Result<Table, ConfigError> {
    let name: BuiltinName = name.parse()?;
    Table::try_from(builtin(name, mode)).map_err(|e| ConfigError::Parse(e.to_string()))
}

// Path sets go on last so numeric segments can reach into builtin arrays.
fn resolve(
    overlay: Table,
    sets: &[(Vec<String>, Value)],
    suffix: &str,
) -> Result<ScenarioDef, ConfigError> {
    let mut probe = overlay.clone();
    for (path, value) in sets {
        if path.len() == 1 {
            set_path(&mut probe, path, value.clone())?;
        }
    }
    let mut table = match probe.get("builtin") {
        None => Table::new(),
        Some(Value::String(name)) => {
            let mode = match probe.get("mode") {
                None => Mode::DogWalking,
                Some(v) => v.clone().try_into().map_err(|e: toml::de::Error| {
                    ConfigError::Parse(format!("mode: {}", e.message()))
                })?,
            };
            builtin_table(name, mode)?
        }
        Some(_) => return Err(ConfigError::Parse("'builtin' must be a string".into())),
    };
    merge(&mut table, overlay);
    for (path, value) in sets {
        set_path(&mut table, path, value.clone())?;
    }
    table.remove("builtin");
    let mut def: ScenarioDef = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::Parse(e.message().trim_end().to_owned()))?;
    def.name.push_str(suffix);
    def.validate()?;
    Ok(def)
}

type Combo = Vec<(Vec<String>, Value, String)>;

fn sweep_combos(sweep: &Table) -> Result<Vec<Combo>, ConfigError> {
    let mut combos: Vec<Combo> = vec![Vec::new()];
    for (key, values) in sweep {
        let path = split_path(key)?;
        let Value::Array(values) = values else {
            return Err(ConfigError::Parse(format!(
                "sweep '{key}' must be an array"
            )));
        };
        if values.is_empty() {
            return Err(ConfigError::Parse(format!("sweep '{key}' has no values")));
        }
        let short = path.last().cloned().unwrap_or_default();
        combos = combos
            .into_iter()
            .flat_map(|c| {
                let (path, short) = (&path, &short);
                values.iter().map(move |v| {
                    let mut c = c.clone();
                    c.push((path.clone(), v.clone(), format!("{short}={}", label(v))));
                    c
                })
            })
            .collect();
    }
    Ok(combos)
}

fn label(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Expands a config file into fully validated runs.
pub fn load(text: &str, overrides: &[Override]) -> Result<Vec<ScenarioDef>, ConfigError> {
    let top: Table = toml::from_str(text).map_err(|e| parse_err(text, e))?;
    match top.get("schema_version") {
        Some(Value::Integer(SCHEMA_VERSION)) => {}
        Some(v) => {
            return Err(ConfigError::Parse(format!(
                "unsupported schema_version {v}"
            )))
        }
        None => return Err(ConfigError::Parse("missing schema_version".into())),
    }
    let (defaults, entries, sweep) = if top.contains_key("scenarios") {
        let raw: RawSuite = toml::from_str(text).map_err(|e| parse_err(text, e))?;
        let entries = raw
            .scenarios
            .into_iter()
            .map(|s| (line_of(text, Some(s.span())), s.into_inner()))
            .collect();
        (raw.defaults, entries, raw.sweep)
    } else {
        let mut top = top;
        top.remove("schema_version");
        let sweep = match top.remove("sweep") {
            None => Table::new(),
            Some(Value::Table(t)) => t,
            Some(_) => return Err(ConfigError::Parse("'sweep' must be a table".into())),
        };
        (Table::new(), vec![(1, top)], sweep)
    };
    let combos = sweep_combos(&sweep)?;
    let mut runs = Vec::new();
    for (line, entry) in entries {
        let mut overlay = defaults.clone();
        merge(&mut overlay, entry);
        let base_sets: Vec<_> = overrides
            .iter()
            .map(|o| (o.path.clone(), o.value.clone()))
            .collect();
        for combo in &combos {
            let mut sets = base_sets.clone();
            let mut suffix = String::new();
            for (path, value, tag) in combo {
                sets.push((path.clone(), value.clone()));
                suffix.push('-');
                suffix.push_str(tag);
            }
            let def = resolve(overlay.clone(), &sets, &suffix)
                .map_err(|e| ConfigError::Parse(format!("scenario at line {line}: {e}")))?;
            runs.push(def);
        }
    }
    if runs.is_empty() {
        return Err(ConfigError::Parse("config defines no scenarios".into()));
    }
    let mut seen = HashSet::new();
    for r in &runs {
        if !seen.insert(file_stem(&r.name)) {
            return Err(ConfigError::Parse(format!(
                "duplicate scenario name '{}'",
                r.name
            )));
        }
    }
    Ok(runs)
}

/// A scenario as a standalone config file.
pub fn dump(def: &ScenarioDef) -> Result<String, ConfigError> {
    let body = toml::to_string(def).map_err(|e| ConfigError::Parse(e.to_string()))?;
    Ok(format!("schema_version = {SCHEMA_VERSION}\n{body}"))
}

/// Filesystem-safe stem for a run name.
pub fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.' | '=') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Status;

    fn ov(s: &str) -> Override {
        Override::parse(s).unwrap()
    }

    #[test]
    fn builtin_dump_is_a_fixed_point() {
        for name in BuiltinName::ALL {
            for mode in [Mode::Baseline, Mode::DogWalking] {
                let def = builtin(name, mode);
                let text = dump(&def).unwrap();
                let back = load(&text, &[]).unwrap();
                assert_eq!(back, vec![def]);
                assert_eq!(dump(&back[0]).unwrap(), text);
            }
        }
    }

    #[test]
    fn suite_expands_sweep_product() {
        let text = r#"
schema_version = 1
[defaults]
sim.seed = 3
[[scenarios]]
builtin = "case2"
mode = "baseline"
[sweep]
"paradigm.beta" = [0.1, 0.2, 0.5]
"sim.pixel_noise_px" = [0.0, 1.0]
"#;
        let runs = load(text, &[]).unwrap();
        assert_eq!(runs.len(), 6);
        assert!(runs
            .iter()
            .all(|r| r.sim.seed == 3 && r.mode == Mode::Baseline));
        assert_eq!(runs[0].name, "case2_baseline-beta=0.1-pixel_noise_px=0.0");
        let betas: HashSet<_> = runs.iter().map(|r| r.paradigm.beta.to_bits()).collect();
        assert_eq!(betas.len(), 3);
    }

    #[test]
    fn layer_precedence() {
        let text = r#"
schema_version = 1
[defaults]
sim.seed = 1
paradigm.beta = 0.3
[[scenarios]]
builtin = "case1"
sim.seed = 2
[sweep]
"sim.seed" = [9]
"#;
        let runs = load(text, &[ov("paradigm.beta=0.4")]).unwrap();
        assert_eq!(runs[0].sim.seed, 9);
        assert_eq!(runs[0].paradigm.beta, 0.4);
        assert_eq!(runs[0].mode, Mode::DogWalking);
        let runs = load(text, &[ov("sim.seed=5")]).unwrap();
        assert_eq!(runs[0].sim.seed, 9);
    }

    #[test]
    fn numeric_segments_index_arrays() {
        let text = "schema_version = 1\nbuiltin = \"case1\"\n";
        let runs = load(text, &[ov("world.obstacles.0.label=Z")]).unwrap();
        assert_eq!(runs[0].world.obstacles[0].label, "Z");
        assert!(load(text, &[ov("world.obstacles.4.label=Z")]).is_err());
    }

    #[test]
    fn overrides_fall_back_to_strings() {
        assert_eq!(ov("mode=baseline").value, Value::String("baseline".into()));
        assert_eq!(ov("sim.seed=4").value, Value::Integer(4));
        assert_eq!(
            ov("expected=\"stuck\"").value,
            Value::String("stuck".into())
        );
        let runs = load(
            "schema_version = 1\nbuiltin = \"case3\"\n",
            &[ov("mode=baseline"), ov("expected=stuck")],
        )
        .unwrap();
        assert_eq!(runs[0].mode, Mode::Baseline);
        assert_eq!(runs[0].expected, Some(Status::Stuck));
        assert_eq!(runs[0].name, "case3_baseline");
        assert!(Override::parse("novalue").is_err());
        assert!(Override::parse("a..b=1").is_err());
    }

    #[test]
    fn arrays_are_replaced() {
        let runs = load(
            "schema_version = 1\nbuiltin = \"case1\"\n[world]\nobstacles = []\n",
            &[],
        )
        .unwrap();
        assert!(runs[0].world.obstacles.is_empty());
    }

    #[test]
    fn errors_carry_lines() {
        let e = load("schema_version = 1\n\nbuiltin = \n", &[])
            .unwrap_err()
            .to_string();
        assert!(e.contains("line 3"), "{e}");
        let text = "schema_version = 1\n[[scenarios]]\nbuiltin = \"case1\"\n\n[[scenarios]]\nbuiltin = \"case1\"\nsim.bogus = 1\n";
        let e = load(text, &[]).unwrap_err().to_string();
        assert!(e.contains("line 5") && e.contains("bogus"), "{e}");
    }

    #[test]
    fn rejects_bad_files() {
        for text in [
            "builtin = \"case1\"\n",
            "schema_version = 2\nbuiltin = \"case1\"\n",
            "schema_version = 1\nbuiltin = \"case9\"\n",
            "schema_version = 1\nbuiltin = \"case1\"\nextra = 1\n",
            "schema_version = 1\nscenarios = []\n",
            "schema_version = 1\n[[scenarios]]\nbuiltin = \"case1\"\n[[scenarios]]\nbuiltin = \"case1\"\n",
            "schema_version = 1\nbuiltin = \"case1\"\n[sweep]\n\"sim.seed\" = 3\n",
            "schema_version = 1\nbuiltin = \"case1\"\nsim.dt_s = -1.0\n",
        ] {
            assert!(load(text, &[]).is_err(), "{text}");
        }
    }

    #[test]
    fn stems_are_safe() {
        assert_eq!(file_stem("a b/c-beta=0.1"), "a_b_c-beta=0.1");
    }
}
