//! Scenario files: a sectioned `key = value` grammar.
//!
//! ```text
//! # charge on a Gaussian path, 0.05 above the plate
//! [particle]
//! kind = charge
//! e2 = 1
//!
//! [trajectory]
//! kind = adiabatic
//! R = 0.01
//! T = 1
//!
//! [geometry]
//! z0 = 0.05
//! j_hat = 1, 0, 0
//! ```
//!
//! Sections are `[particle]`, `[trajectory]`, `[geometry]`, `[numerics]` and
//! `[oracle]`. `#` starts a comment. Numbers take scientific notation and
//! vectors are comma triples. Unknown and repeated keys are errors.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;
use vacdec_core::oracle::McConfig;
use vacdec_core::scenario::{Coupling, Method, RawScenario, Scenario, ValidationError, Vec3, Violation};
use vacdec_core::trajectories::TrajectorySpec;

/// Position in the scenario file, 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Location {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{at}: {message}")]
    Parse { at: Location, message: String },
    #[error("{at}: unknown key `{key}` in [{section}]")]
    UnknownKey { at: Location, section: String, key: String },
    #[error("{at}: duplicate key `{key}` in [{section}] (first set at line {first})")]
    DuplicateKey { at: Location, section: String, key: String, first: usize },
    #[error("{}", describe_violations(.error, .locations))]
    Validation { error: ValidationError, locations: Vec<Option<Location>> },
}

fn describe_violations(error: &ValidationError, locations: &[Option<Location>]) -> String {
    let parts: Vec<String> = error
        .violations
        .iter()
        .zip(locations)
        .map(|(v, at)| match at {
            Some(at) => format!("{at}: {v}"),
            None => v.to_string(),
        })
        .collect();
    format!("invalid scenario: {}", parts.join("; "))
}

const SECTIONS: [&str; 5] = ["particle", "trajectory", "geometry", "numerics", "oracle"];

fn known_keys(section: &str) -> &'static [&'static str] {
    match section {
        "particle" => &["kind", "e2", "p", "m"],
        "trajectory" => &["kind", "R", "T", "v", "tau", "T_pulse", "T_sep", "N", "Omega"],
        "geometry" => &["plate", "z0", "j_hat"],
        "numerics" => &["method", "rel_tol", "abs_tol", "k_max", "kmax_per_inverse_tau", "max_subdivisions"],
        "oracle" => &["samples", "seed"],
        _ => &[],
    }
}

#[derive(Clone, Debug)]
struct Entry {
    value: String,
    key_at: Location,
    value_at: Location,
}

/// Parsed file before interpretation: section → key → entry.
#[derive(Clone, Debug, Default)]
pub struct Document {
    sections: BTreeMap<String, (Location, BTreeMap<String, Entry>)>,
}

impl Document {
    pub fn parse(text: &str) -> Result<Document, ConfigError> {
        let mut doc = Document::default();
        let mut current: Option<String> = None;
        for (i, raw_line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = match raw_line.find('#') {
                Some(c) => &raw_line[..c],
                None => raw_line,
            };
            let indent = line.len() - line.trim_start().len();
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let at = |byte: usize| Location { line: line_no, column: raw_line[..byte].chars().count() + 1 };

            if let Some(rest) = trimmed.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    return Err(ConfigError::Parse { at: at(indent + trimmed.len()), message: "expected `]`".into() });
                };
                let name = name.trim();
                if !SECTIONS.contains(&name) {
                    return Err(ConfigError::Parse {
                        at: at(indent + 1),
                        message: format!("unknown section [{name}]; expected one of {}", SECTIONS.join(", ")),
                    });
                }
                if doc.sections.contains_key(name) {
                    return Err(ConfigError::Parse { at: at(indent), message: format!("section [{name}] repeated") });
                }
                doc.sections.insert(name.to_string(), (at(indent), BTreeMap::new()));
                current = Some(name.to_string());
                continue;
            }

            let Some(eq) = line.find('=') else {
                return Err(ConfigError::Parse { at: at(line.len()), message: "expected `key = value`".into() });
            };
            let key = line[..eq].trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(ConfigError::Parse { at: at(indent), message: format!("malformed key `{key}`") });
            }
            let Some(section) = current.as_ref() else {
                return Err(ConfigError::Parse { at: at(indent), message: "key outside of any section".into() });
            };
            if !known_keys(section).contains(&key) {
                return Err(ConfigError::UnknownKey { at: at(indent), section: section.clone(), key: key.into() });
            }
            let value_part = &line[eq + 1..];
            let value = value_part.trim();
            if value.is_empty() {
                return Err(ConfigError::Parse { at: at(line.len()), message: format!("missing value for `{key}`") });
            }
            let value_start = eq + 1 + (value_part.len() - value_part.trim_start().len());
            let entries = &mut doc.sections.get_mut(section).expect("section registered").1;
            if let Some(first) = entries.get(key) {
                return Err(ConfigError::DuplicateKey {
                    at: at(indent),
                    section: section.clone(),
                    key: key.into(),
                    first: first.key_at.line,
                });
            }
            entries.insert(key.to_string(), Entry { value: value.to_string(), key_at: at(indent), value_at: at(value_start) });
        }
        Ok(doc)
    }

    fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section).and_then(|(_, e)| e.get(key))
    }

    fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    fn section_at(&self, section: &str) -> Option<Location> {
        self.sections.get(section).map(|(at, _)| *at)
    }

    fn key_at(&self, section: &str, key: &str) -> Option<Location> {
        self.get(section, key).map(|e| e.key_at)
    }
}

fn bad_value(e: &Entry, what: &str) -> ConfigError {
    ConfigError::Parse { at: e.value_at, message: format!("expected {what}, got `{}`", e.value) }
}

fn number(e: &Entry) -> Result<f64, ConfigError> {
    match e.value.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(bad_value(e, "a finite number")),
    }
}

/// Non-negative integer; `4e6` is accepted when exact.
fn integer(e: &Entry) -> Result<u64, ConfigError> {
    if let Ok(n) = e.value.parse::<u64>() {
        return Ok(n);
    }
    match e.value.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x <= 9.007_199_254_740_992e15 => Ok(x as u64),
        _ => Err(bad_value(e, "a non-negative integer")),
    }
}

fn vector(e: &Entry) -> Result<Vec3, ConfigError> {
    let parts: Vec<&str> = e.value.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(bad_value(e, "a comma-separated triple"));
    }
    let mut c = [0.0; 3];
    for (slot, p) in c.iter_mut().zip(parts) {
        *slot = match p.parse::<f64>() {
            Ok(x) if x.is_finite() => x,
            _ => return Err(bad_value(e, "a comma-separated triple")),
        };
    }
    Ok(Vec3::new(c[0], c[1], c[2]))
}

fn boolean(e: &Entry) -> Result<bool, ConfigError> {
    match e.value.as_str() {
        "true" | "yes" => Ok(true),
        "false" | "no" => Ok(false),
        _ => Err(bad_value(e, "true or false")),
    }
}

/// Scenario as read from a file, with enough position data to point
/// validation errors back at the offending line.
#[derive(Clone, Debug)]
pub struct ScenarioFile {
    pub raw: RawScenario,
    doc: Document,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<ScenarioFile, ConfigError> {
        let doc = Document::parse(text)?;
        let raw = interpret(&doc)?;
        Ok(ScenarioFile { raw, doc })
    }

    pub fn read(path: &Path) -> Result<ScenarioFile, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        ScenarioFile::parse(&text)
    }

    /// Validates, attaching a file position to each violation.
    pub fn validate(&self) -> Result<Scenario, ConfigError> {
        self.raw.clone().validate().map_err(|error| {
            let locations = error.violations.iter().map(|v| self.locate(v)).collect();
            ConfigError::Validation { error, locations }
        })
    }

    fn locate(&self, v: &Violation) -> Option<Location> {
        let d = &self.doc;
        match v {
            Violation::NonUnitDirection { .. } => d.key_at("geometry", "j_hat"),
            Violation::NegativeDistance { .. } => d.key_at("geometry", "z0"),
            Violation::MissingCoupling => None,
            Violation::MissingTrajectory => None,
            Violation::NonPositiveCharge { .. } => d.key_at("particle", "e2").or_else(|| d.section_at("particle")),
            Violation::InconsistentTrajectory(_) | Violation::Relativistic { .. } => {
                d.key_at("trajectory", "kind").or_else(|| d.section_at("trajectory"))
            }
            Violation::InvalidNumerics(_) => d.section_at("numerics").or_else(|| d.section_at("oracle")),
        }
    }
}

fn interpret(doc: &Document) -> Result<RawScenario, ConfigError> {
    let mut raw = RawScenario::default();
    raw.coupling = coupling(doc)?;
    raw.trajectory = trajectory(doc)?;

    if let Some(e) = doc.get("geometry", "z0") {
        raw.z0 = number(e)?;
    }
    raw.plate = match doc.get("geometry", "plate") {
        Some(e) => boolean(e)?,
        None => doc.get("geometry", "z0").is_some(),
    };
    if raw.plate && doc.get("geometry", "z0").is_none() {
        let at = doc.key_at("geometry", "plate").expect("plate was given");
        return Err(ConfigError::Parse { at, message: "a plate needs `z0`".into() });
    }
    if let Some(e) = doc.get("geometry", "j_hat") {
        raw.j_hat = vector(e)?;
    }

    let n = &mut raw.numerics;
    if let Some(e) = doc.get("numerics", "method") {
        n.method = e.value.parse::<Method>().map_err(|_| bad_value(e, "`dipole` or `full`"))?;
    }
    if let Some(e) = doc.get("numerics", "rel_tol") {
        n.quadrature.rel_tol = number(e)?;
    }
    if let Some(e) = doc.get("numerics", "abs_tol") {
        n.quadrature.abs_tol = number(e)?;
    }
    if let Some(e) = doc.get("numerics", "k_max") {
        n.quadrature.k_max = Some(number(e)?);
    }
    if let Some(e) = doc.get("numerics", "kmax_per_inverse_tau") {
        n.kmax_per_inverse_tau = number(e)?;
    }
    if let Some(e) = doc.get("numerics", "max_subdivisions") {
        n.quadrature.max_subdivisions = integer(e)? as usize;
    }

    if doc.has_section("oracle") {
        let mut mc = McConfig::default();
        if let Some(e) = doc.get("oracle", "samples") {
            mc.samples = integer(e)?;
        }
        if let Some(e) = doc.get("oracle", "seed") {
            mc.seed = integer(e)?;
        }
        raw.oracle = Some(mc);
    }
    Ok(raw)
}

fn coupling(doc: &Document) -> Result<Option<Coupling>, ConfigError> {
    if !doc.has_section("particle") {
        return Ok(None);
    }
    let has = |k: &str| doc.get("particle", k).is_some();
    let kind = match doc.get("particle", "kind") {
        Some(e) => match e.value.as_str() {
            "charge" | "dipole" => e.value.clone(),
            _ => return Err(bad_value(e, "`charge` or `dipole`")),
        },
        None if has("e2") => "charge".into(),
        None if has("p") || has("m") => "dipole".into(),
        None => return Ok(None),
    };
    let misplaced = |keys: &[&str]| -> Result<(), ConfigError> {
        for k in keys {
            if let Some(e) = doc.get("particle", k) {
                return Err(ConfigError::Parse {
                    at: e.key_at,
                    message: format!("`{k}` does not apply to a {kind} coupling"),
                });
            }
        }
        Ok(())
    };
    if kind == "charge" {
        misplaced(&["p", "m"])?;
        let Some(e) = doc.get("particle", "e2") else {
            return Ok(None);
        };
        Ok(Some(Coupling::Charge { e2: number(e)? }))
    } else {
        misplaced(&["e2"])?;
        let p = doc.get("particle", "p").map(vector).transpose()?.unwrap_or(Vec3::ZERO);
        let m = doc.get("particle", "m").map(vector).transpose()?.unwrap_or(Vec3::ZERO);
        Ok(Some(Coupling::Dipole { p, m }))
    }
}

fn trajectory(doc: &Document) -> Result<Option<TrajectorySpec>, ConfigError> {
    let Some(kind) = doc.get("trajectory", "kind") else {
        if let Some(at) = doc.section_at("trajectory") {
            return Err(ConfigError::Parse { at, message: "[trajectory] needs `kind`".into() });
        }
        return Ok(None);
    };
    let (name, keys): (&str, &[&str]) = match kind.value.as_str() {
        "adiabatic" => ("adiabatic", &["R", "T"]),
        "trapezoid" => ("trapezoid", &["v", "T", "tau"]),
        "pulse_train" => ("pulse_train", &["R", "T_pulse", "T_sep", "N"]),
        _ => return Err(bad_value(kind, "`adiabatic`, `trapezoid` or `pulse_train`")),
    };
    let optional: &[&str] = if name == "pulse_train" { &["Omega"] } else { &[] };
    let (_, entries) = doc.sections.get("trajectory").expect("kind was found");
    for (k, e) in entries {
        if k != "kind" && !keys.contains(&k.as_str()) && !optional.contains(&k.as_str()) {
            return Err(ConfigError::Parse { at: e.key_at, message: format!("`{k}` does not apply to a {name} trajectory") });
        }
    }
    let need = |k: &str| -> Result<&Entry, ConfigError> {
        doc.get("trajectory", k).ok_or_else(|| ConfigError::Parse {
            at: kind.key_at,
            message: format!("{name} trajectory needs `{k}`"),
        })
    };
    Ok(Some(match name {
        "adiabatic" => TrajectorySpec::Adiabatic { amplitude: number(need("R")?)?, width: number(need("T")?)? },
        "trapezoid" => TrajectorySpec::PiecewiseTrapezoid {
            speed: number(need("v")?)?,
            duration: number(need("T")?)?,
            ramp: number(need("tau")?)?,
        },
        _ => {
            let n = need("N")?;
            let count = u32::try_from(integer(n)?).map_err(|_| bad_value(n, "a pulse count below 2^32"))?;
            TrajectorySpec::PulseTrain {
                amplitude: number(need("R")?)?,
                width: number(need("T_pulse")?)?,
                separation: number(need("T_sep")?)?,
                count,
                carrier: doc.get("trajectory", "Omega").map(number).transpose()?,
            }
        }
    }))
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn vec3(v: Vec3) -> String {
    format!("{}, {}, {}", num(v.x), num(v.y), num(v.z))
}

/// Fixed-layout text of a scenario: every section and key in a fixed order
/// with defaults spelled out. Parsing it back yields the same scenario.
pub fn canonicalize(raw: &RawScenario) -> String {
    let mut out = String::new();
    let mut line = |s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    match raw.coupling {
        Some(Coupling::Charge { e2 }) => {
            line("[particle]".into());
            line("kind = charge".into());
            line(format!("e2 = {}", num(e2)));
            line(String::new());
        }
        Some(Coupling::Dipole { p, m }) => {
            line("[particle]".into());
            line("kind = dipole".into());
            line(format!("p = {}", vec3(p)));
            line(format!("m = {}", vec3(m)));
            line(String::new());
        }
        None => {}
    }
    match &raw.trajectory {
        Some(TrajectorySpec::Adiabatic { amplitude, width }) => {
            line("[trajectory]".into());
            line("kind = adiabatic".into());
            line(format!("R = {}", num(*amplitude)));
            line(format!("T = {}", num(*width)));
            line(String::new());
        }
        Some(TrajectorySpec::PiecewiseTrapezoid { speed, duration, ramp }) => {
            line("[trajectory]".into());
            line("kind = trapezoid".into());
            line(format!("v = {}", num(*speed)));
            line(format!("T = {}", num(*duration)));
            line(format!("tau = {}", num(*ramp)));
            line(String::new());
        }
        Some(TrajectorySpec::PulseTrain { amplitude, width, separation, count, carrier }) => {
            line("[trajectory]".into());
            line("kind = pulse_train".into());
            line(format!("R = {}", num(*amplitude)));
            line(format!("T_pulse = {}", num(*width)));
            line(format!("T_sep = {}", num(*separation)));
            line(format!("N = {count}"));
            if let Some(omega) = carrier {
                line(format!("Omega = {}", num(*omega)));
            }
            line(String::new());
        }
        None => {}
    }
    line("[geometry]".into());
    line(format!("plate = {}", raw.plate));
    if raw.plate {
        line(format!("z0 = {}", num(raw.z0)));
    }
    line(format!("j_hat = {}", vec3(raw.j_hat)));
    line(String::new());

    let n = &raw.numerics;
    line("[numerics]".into());
    line(format!("method = {}", if n.method == Method::Full { "full" } else { "dipole" }));
    line(format!("rel_tol = {}", num(n.quadrature.rel_tol)));
    line(format!("abs_tol = {}", num(n.quadrature.abs_tol)));
    if let Some(k) = n.quadrature.k_max {
        line(format!("k_max = {}", num(k)));
    }
    line(format!("kmax_per_inverse_tau = {}", num(n.kmax_per_inverse_tau)));
    line(format!("max_subdivisions = {}", n.quadrature.max_subdivisions));

    if let Some(mc) = &raw.oracle {
        line(String::new());
        line("[oracle]".into());
        line(format!("samples = {}", mc.samples));
        line(format!("seed = {}", mc.seed));
    }
    out
}

/// SHA-256 of the canonical text, hex encoded.
pub fn config_hash(raw: &RawScenario) -> String {
    hex::encode(Sha256::digest(canonicalize(raw).as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
[particle]
e2 = 1

[trajectory]
kind = adiabatic
R = 0.01
T = 1

[geometry]
z0 = 0.05
j_hat = 1, 0, 0
";

    #[test]
    fn minimal_charge_file() {
        let f = ScenarioFile::parse(MINIMAL).unwrap();
        assert_eq!(f.raw.coupling, Some(Coupling::Charge { e2: 1.0 }));
        assert!(f.raw.plate);
        assert_eq!(f.raw.z0, 0.05);
        let s = f.validate().unwrap();
        assert_eq!(s.geometry().orientation().label(), "parallel");
    }

    #[test]
    fn negative_distance_has_location() {
        let text = MINIMAL.replace("z0 = 0.05", "z0 = -1");
        let err = ScenarioFile::parse(&text).unwrap().validate().unwrap_err();
        match &err {
            ConfigError::Validation { error, locations } => {
                assert!(matches!(error.violations[0], Violation::NegativeDistance { .. }));
                assert_eq!(locations[0], Some(Location { line: 10, column: 1 }));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().starts_with("invalid scenario: 10:1:"));
    }

    #[test]
    fn duplicate_key() {
        let text = MINIMAL.replace("R = 0.01\n", "R = 0.01\n  R = 0.02\n");
        match ScenarioFile::parse(&text).unwrap_err() {
            ConfigError::DuplicateKey { at, key, first, .. } => {
                assert_eq!(key, "R");
                assert_eq!(first, 6);
                assert_eq!(at, Location { line: 7, column: 3 });
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key() {
        let text = MINIMAL.replace("T = 1", "T = 1\nsigma = 2");
        assert!(matches!(ScenarioFile::parse(&text).unwrap_err(), ConfigError::UnknownKey { ref key, .. } if key == "sigma"));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let cases = [
            ("[particle\n", 1, 10),
            ("e2 = 1\n", 1, 1),
            ("[particle]\ne2\n", 2, 3),
            ("[particle]\ne2 = one\n", 2, 6),
            ("[particle]\nkind = dipole\np = 1, 2\n", 3, 5),
            ("[plate]\n", 1, 2),
        ];
        for (text, line, column) in cases {
            match Document::parse(text).and_then(|d| interpret(&d)) {
                Err(ConfigError::Parse { at, .. }) => assert_eq!(at, Location { line, column }, "{text:?}"),
                other => panic!("{text:?}: unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn scientific_notation_and_comments() {
        let text = "[particle]  # the charge\nkind = dipole\np = 1e-3, 0, -2.5E-4\n[oracle]\nsamples = 4e6\n";
        let f = ScenarioFile::parse(text).unwrap();
        assert_eq!(f.raw.coupling, Some(Coupling::Dipole { p: Vec3::new(1e-3, 0.0, -2.5e-4), m: Vec3::ZERO }));
        assert_eq!(f.raw.oracle.unwrap().samples, 4_000_000);
    }

    #[test]
    fn inapplicable_trajectory_key() {
        let text = MINIMAL.replace("T = 1", "T = 1\ntau = 0.1");
        assert!(matches!(ScenarioFile::parse(&text).unwrap_err(), ConfigError::Parse { at, .. } if at.line == 8));
    }

    #[test]
    fn canonical_text_round_trips() {
        let f = ScenarioFile::parse(MINIMAL).unwrap();
        let canon = canonicalize(&f.raw);
        let again = ScenarioFile::parse(&canon).unwrap();
        assert_eq!(again.raw, f.raw);
        assert_eq!(canonicalize(&again.raw), canon);
    }

    #[test]
    fn hash_ignores_layout() {
        let shuffled = "\
# same scenario, different layout
[geometry]
j_hat=1,0,0
   z0   =   5e-2

[trajectory]
T = 1.0
R = 1e-2
kind = adiabatic
[particle]
kind = charge
e2 = 1.000
";
        let a = ScenarioFile::parse(MINIMAL).unwrap();
        let b = ScenarioFile::parse(shuffled).unwrap();
        assert_eq!(config_hash(&a.raw), config_hash(&b.raw));
        let c = ScenarioFile::parse(&MINIMAL.replace("0.05", "0.06")).unwrap();
        assert_ne!(config_hash(&a.raw), config_hash(&c.raw));
    }
}
