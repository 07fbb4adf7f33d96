//! Line-based run configuration: `section.key = value`, `#` comments, quoted strings,
//! comma-separated lists.

use std::collections::BTreeMap;
use std::fmt;

use crate::coupling::{CouplingSpec, ParamPoint};
use crate::freefermion::{ModelConfig, Sector};
use crate::geometry::{Axis, Plane};
use crate::scaling::{default_window, log_spaced, ApproachPath, Quantity};

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// Every problem found in a configuration, in line order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub problems: Vec<Problem>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.problems.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Number(f64),
    Str(String),
    List(Vec<Value>),
}

impl Value {
    fn describe(&self) -> &'static str {
        match self {
            Value::Number(_) => "a number",
            Value::Str(_) => "a string",
            Value::List(_) => "a list",
        }
    }
}

fn parse_scalar(text: &str) -> Result<Value, String> {
    let t = text.trim();
    if let Some(rest) = t.strip_prefix('"') {
        let inner = rest.strip_suffix('"').ok_or_else(|| format!("unterminated string {t}"))?;
        if inner.contains('"') {
            return Err(format!("stray quote in {t}"));
        }
        return Ok(Value::Str(inner.to_string()));
    }
    if t.is_empty() {
        return Err("missing value".into());
    }
    t.parse::<f64>()
        .map(Value::Number)
        .map_err(|_| format!("`{t}` is neither a number nor a quoted string"))
}

/// Splits on commas outside quotes.
fn split_list(text: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut quoted = false;
    let mut start = 0;
    for (i, ch) in text.char_indices() {
        match ch {
            '"' => quoted = !quoted,
            ',' if !quoted => {
                parts.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&text[start..]);
    parts
}

fn parse_value(text: &str) -> Result<Value, String> {
    let parts = split_list(text);
    if parts.len() == 1 {
        parse_scalar(parts[0])
    } else {
        parts.into_iter().map(parse_scalar).collect::<Result<_, _>>().map(Value::List)
    }
}

/// Strips a `#` comment that is not inside quotes.
fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, ch) in line.char_indices() {
        match ch {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneSpec {
    pub plane: Plane,
    pub x: Axis,
    pub y: Axis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingSpec {
    pub path: ApproachPath,
    pub quantities: Vec<Quantity>,
    pub deltas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifySpec {
    pub sizes: Vec<usize>,
    pub points: usize,
    pub tolerance: f64,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self {
            sizes: vec![4, 6, 8],
            points: 20,
            tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Present when `model.N` is given.
    pub model: Option<ModelConfig<f64>>,
    pub coupling: CouplingSpec,
    /// Family name as written, for provenance records.
    pub family: String,
    pub point: Option<ParamPoint<f64>>,
    pub plane: Option<PlaneSpec>,
    pub scaling: Option<ScalingSpec>,
    pub verify: VerifySpec,
}

const KNOWN_KEYS: &[&str] = &[
    "model.J",
    "model.N",
    "model.eta",
    "coupling.family",
    "coupling.G",
    "coupling.Lambda",
    "coupling.params",
    "plane.kind",
    "plane.lambda",
    "plane.omega",
    "plane.x",
    "plane.y",
    "scaling.path",
    "scaling.fixed",
    "scaling.quantities",
    "scaling.delta_min",
    "scaling.delta_max",
    "scaling.samples",
    "verify.sizes",
    "verify.points",
    "verify.tolerance",
];

struct Entries {
    map: BTreeMap<String, (usize, Value)>,
    problems: Vec<Problem>,
}

impl Entries {
    fn problem(&mut self, key: &str, message: String) {
        let line = self.map.get(key).map(|e| e.0);
        self.problems.push(Problem { line, message });
    }

    fn has(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    fn number(&mut self, key: &str) -> Option<f64> {
        match self.map.get(key).map(|e| e.1.clone()) {
            None => None,
            Some(Value::Number(x)) if x.is_finite() => Some(x),
            Some(v) => {
                self.problem(key, format!("{key} must be a finite number, got {}", v.describe()));
                None
            }
        }
    }

    fn string(&mut self, key: &str) -> Option<String> {
        match self.map.get(key).map(|e| e.1.clone()) {
            None => None,
            Some(Value::Str(s)) => Some(s),
            Some(v) => {
                self.problem(key, format!("{key} must be a quoted string, got {}", v.describe()));
                None
            }
        }
    }

    fn list(&self, key: &str) -> Option<Vec<Value>> {
        self.map.get(key).map(|e| match &e.1 {
            Value::List(v) => v.clone(),
            other => vec![other.clone()],
        })
    }

    fn numbers(&mut self, key: &str) -> Option<Vec<f64>> {
        let items = self.list(key)?;
        let mut out = Vec::new();
        for v in items {
            match v {
                Value::Number(x) if x.is_finite() => out.push(x),
                other => {
                    self.problem(key, format!("{key} must list numbers, found {}", other.describe()));
                    return None;
                }
            }
        }
        Some(out)
    }

    fn strings(&mut self, key: &str) -> Option<Vec<String>> {
        let items = self.list(key)?;
        let mut out = Vec::new();
        for v in items {
            match v {
                Value::Str(s) => out.push(s),
                other => {
                    self.problem(key, format!("{key} must list quoted strings, found {}", other.describe()));
                    return None;
                }
            }
        }
        Some(out)
    }

    fn count(&mut self, key: &str) -> Option<usize> {
        let x = self.number(key)?;
        if x < 0.0 || x.fract() != 0.0 {
            self.problem(key, format!("{key} must be a non-negative integer, got {x}"));
            return None;
        }
        Some(x as usize)
    }
}

fn check_size(n: usize) -> Result<(), String> {
    if n % 2 == 1 {
        Err(format!("N must be even, got {n}"))
    } else if n < 4 {
        Err(format!("N must be at least 4, got {n}"))
    } else {
        Ok(())
    }
}

/// Parses and validates a configuration, collecting every problem before failing.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut e = Entries {
        map: BTreeMap::new(),
        problems: Vec::new(),
    };
    let mut point_entries: Vec<(usize, String, Value)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let Some((lhs, rhs)) = line.split_once('=') else {
            e.problems.push(Problem {
                line: Some(line_no),
                message: format!("expected `section.key = value`, got `{line}`"),
            });
            continue;
        };
        let key = lhs.trim();
        let value = match parse_value(rhs) {
            Ok(v) => v,
            Err(m) => {
                e.problems.push(Problem {
                    line: Some(line_no),
                    message: format!("{key}: {m}"),
                });
                continue;
            }
        };
        if !key.contains('.') {
            e.problems.push(Problem {
                line: Some(line_no),
                message: format!("key `{key}` has no section"),
            });
            continue;
        }
        if let Some(param) = key.strip_prefix("point.") {
            if point_entries.iter().any(|p| p.1 == param) {
                e.problems.push(Problem {
                    line: Some(line_no),
                    message: format!("duplicate key `{key}`"),
                });
            } else {
                point_entries.push((line_no, param.to_string(), value));
            }
            continue;
        }
        if !KNOWN_KEYS.contains(&key) {
            e.problems.push(Problem {
                line: Some(line_no),
                message: format!("unknown key `{key}`"),
            });
            continue;
        }
        if let Some((first, _)) = e.map.get(key) {
            e.problems.push(Problem {
                line: Some(line_no),
                message: format!("duplicate key `{key}` (first set on line {first})"),
            });
            continue;
        }
        e.map.insert(key.to_string(), (line_no, value));
    }

    // model
    let j = e.number("model.J").unwrap_or(1.0);
    if j == 0.0 {
        e.problem("model.J", "J must be nonzero".into());
    }
    let eta = match e.string("model.eta").as_deref() {
        None | Some("+") | Some("even") => Sector::Even,
        Some("-") | Some("odd") => Sector::Odd,
        Some(other) => {
            e.problem("model.eta", format!("eta must be \"+\" or \"-\", got \"{other}\""));
            Sector::Even
        }
    };
    let model = match e.count("model.N") {
        Some(n) => match check_size(n) {
            Ok(()) => ModelConfig::new(j, n, eta).ok(),
            Err(m) => {
                e.problem("model.N", m);
                None
            }
        },
        None => None,
    };

    // coupling
    let family = e.string("coupling.family").unwrap_or_else(|| "paper-example".into());
    let coupling = match family.as_str() {
        "paper-example" | "gamma-const" => {
            for key in ["coupling.G", "coupling.Lambda", "coupling.params"] {
                if e.has(key) {
                    e.problem(key, format!("{key} is only used with family \"custom\""));
                }
            }
            Some(if family == "paper-example" {
                CouplingSpec::PaperExample
            } else {
                CouplingSpec::GammaConst
            })
        }
        "custom" => {
            let g = e.string("coupling.G");
            let lam = e.string("coupling.Lambda").or_else(|| Some("1".into()));
            let params = e.strings("coupling.params");
            match (g, lam, params) {
                (Some(g), Some(lam), Some(params)) => {
                    let refs: Vec<&str> = params.iter().map(String::as_str).collect();
                    match CouplingSpec::custom(&g, &lam, &refs) {
                        Ok(spec) => Some(spec),
                        Err(err) => {
                            e.problem("coupling.G", err.to_string());
                            None
                        }
                    }
                }
                (g, _, params) => {
                    if g.is_none() {
                        e.problems.push(Problem {
                            line: None,
                            message: "family \"custom\" requires coupling.G".into(),
                        });
                    }
                    if params.is_none() {
                        e.problems.push(Problem {
                            line: None,
                            message: "family \"custom\" requires coupling.params".into(),
                        });
                    }
                    None
                }
            }
        }
        other => {
            e.problem(
                "coupling.family",
                format!("unknown family \"{other}\" (expected \"paper-example\", \"gamma-const\" or \"custom\")"),
            );
            None
        }
    };

    // point
    let mut point = None;
    if let Some(spec) = &coupling {
        if !point_entries.is_empty() {
            let schema = spec.param_names();
            let mut values = vec![None; schema.len()];
            for (line, name, value) in &point_entries {
                match (schema.iter().position(|s| s == name), value) {
                    (None, _) => e.problems.push(Problem {
                        line: Some(*line),
                        message: format!("unknown key `point.{name}`: family parameters are {schema:?}"),
                    }),
                    (Some(i), Value::Number(x)) if x.is_finite() => values[i] = Some(*x),
                    (Some(_), v) => e.problems.push(Problem {
                        line: Some(*line),
                        message: format!("point.{name} must be a finite number, got {}", v.describe()),
                    }),
                }
            }
            let missing: Vec<&String> = schema.iter().zip(&values).filter(|(_, v)| v.is_none()).map(|(s, _)| s).collect();
            if missing.is_empty() {
                let names: Vec<&str> = schema.iter().map(String::as_str).collect();
                let vals: Vec<f64> = values.into_iter().flatten().collect();
                match ParamPoint::new(&names, &vals) {
                    Ok(p) => point = Some(p),
                    Err(err) => e.problems.push(Problem {
                        line: None,
                        message: err.to_string(),
                    }),
                }
            } else if point_entries.iter().all(|(_, n, _)| schema.contains(n)) {
                e.problems.push(Problem {
                    line: None,
                    message: format!("point is missing {missing:?}"),
                });
            }
        }
    }

    // plane
    let plane = if e.has("plane.kind") || e.has("plane.x") || e.has("plane.y") {
        let kind = e.string("plane.kind");
        let axis = |e: &mut Entries, key: &str| -> Option<Axis> {
            let v = e.numbers(key);
            match v.as_deref() {
                Some([a, b, s]) => {
                    if *s <= 0.0 || b < a {
                        e.problem(key, format!("{key} needs start ≤ stop and step > 0"));
                        None
                    } else {
                        Some(Axis::new(*a, *b, *s))
                    }
                }
                Some(_) => {
                    e.problem(key, format!("{key} must be `start, stop, step`"));
                    None
                }
                None => {
                    e.problems.push(Problem {
                        line: None,
                        message: format!("plane requires {key}"),
                    });
                    None
                }
            }
        };
        let x = axis(&mut e, "plane.x");
        let y = axis(&mut e, "plane.y");
        let plane = match kind.as_deref() {
            Some("omega-gamma") => {
                if e.has("plane.omega") {
                    e.problem("plane.omega", "plane.omega is not used by kind \"omega-gamma\"".into());
                }
                match e.number("plane.lambda") {
                    Some(lambda) => Some(Plane::OmegaGamma { lambda }),
                    None => {
                        e.problems.push(Problem {
                            line: None,
                            message: "kind \"omega-gamma\" requires plane.lambda".into(),
                        });
                        None
                    }
                }
            }
            Some("gamma-lambda") => {
                if e.has("plane.lambda") {
                    e.problem("plane.lambda", "plane.lambda is not used by kind \"gamma-lambda\"".into());
                }
                match e.number("plane.omega") {
                    Some(omega) => Some(Plane::GammaLambda { omega }),
                    None => {
                        e.problems.push(Problem {
                            line: None,
                            message: "kind \"gamma-lambda\" requires plane.omega".into(),
                        });
                        None
                    }
                }
            }
            Some(other) => {
                e.problem(
                    "plane.kind",
                    format!("unknown plane \"{other}\" (expected \"omega-gamma\" or \"gamma-lambda\")"),
                );
                None
            }
            None => {
                e.problems.push(Problem {
                    line: None,
                    message: "plane requires plane.kind".into(),
                });
                None
            }
        };
        match (plane, x, y) {
            (Some(plane), Some(x), Some(y)) => Some(PlaneSpec { plane, x, y }),
            _ => None,
        }
    } else {
        None
    };

    // scaling
    let scaling = if e.has("scaling.path") {
        let kind = e.string("scaling.path");
        let fixed = e.number("scaling.fixed");
        if fixed.is_none() && !e.has("scaling.fixed") {
            e.problems.push(Problem {
                line: None,
                message: "scaling requires scaling.fixed".into(),
            });
        }
        let path = match (kind.as_deref(), fixed) {
            (Some("I"), Some(v)) => ApproachPath::kind_i(v).map_err(|err| err.to_string()).map(Some),
            (Some("II"), Some(v)) => ApproachPath::kind_ii(v).map_err(|err| err.to_string()).map(Some),
            (Some(other), _) if other != "I" && other != "II" => {
                Err(format!("scaling.path must be \"I\" or \"II\", got \"{other}\""))
            }
            _ => Ok(None),
        };
        let path = match path {
            Ok(p) => p,
            Err(m) => {
                let key = if m.starts_with("scaling.path") { "scaling.path" } else { "scaling.fixed" };
                e.problem(key, m);
                None
            }
        };
        let quantities = match e.strings("scaling.quantities") {
            None => Quantity::ALL.to_vec(),
            Some(names) => {
                let mut out = Vec::new();
                for n in names {
                    match Quantity::parse(&n) {
                        Some(q) => out.push(q),
                        None => e.problem(
                            "scaling.quantities",
                            format!("unknown quantity \"{n}\" (expected dE_dlambda, dE_drho or omega_phi)"),
                        ),
                    }
                }
                out
            }
        };
        let lo = e.number("scaling.delta_min");
        let hi = e.number("scaling.delta_max");
        let samples = e.count("scaling.samples");
        let deltas = match (lo, hi, samples) {
            (None, None, None) => Some(default_window()),
            (lo, hi, samples) => {
                let lo = lo.unwrap_or(1e-6);
                let hi = hi.unwrap_or(1e-4);
                let samples = samples.unwrap_or(20);
                if !(lo > 0.0 && hi > lo) {
                    e.problem("scaling.delta_min", "need 0 < delta_min < delta_max".into());
                    None
                } else if samples < 5 {
                    e.problem("scaling.samples", "at least 5 samples are needed for a fit".into());
                    None
                } else {
                    Some(log_spaced(lo, hi, samples))
                }
            }
        };
        match (path, deltas) {
            (Some(path), Some(deltas)) => Some(ScalingSpec {
                path,
                quantities,
                deltas,
            }),
            _ => None,
        }
    } else {
        for key in ["scaling.fixed", "scaling.quantities", "scaling.delta_min", "scaling.delta_max", "scaling.samples"] {
            if e.has(key) {
                e.problem(key, format!("{key} requires scaling.path"));
            }
        }
        None
    };

    // verify
    let mut verify = VerifySpec::default();
    if let Some(sizes) = e.numbers("verify.sizes") {
        let mut ok = Vec::new();
        for s in sizes {
            if s.fract() != 0.0 || s < 0.0 {
                e.problem("verify.sizes", format!("sizes must be integers, got {s}"));
                continue;
            }
            let n = s as usize;
            match check_size(n) {
                Ok(()) if n <= crate::oracle::MAX_DENSE_SITES => ok.push(n),
                Ok(()) => e.problem(
                    "verify.sizes",
                    format!("N = {n} exceeds the dense limit {}", crate::oracle::MAX_DENSE_SITES),
                ),
                Err(m) => e.problem("verify.sizes", m),
            }
        }
        verify.sizes = ok;
    }
    if let Some(p) = e.count("verify.points") {
        verify.points = p;
    }
    if let Some(t) = e.number("verify.tolerance") {
        if t <= 0.0 {
            e.problem("verify.tolerance", "tolerance must be positive".into());
        } else {
            verify.tolerance = t;
        }
    }

    if !e.problems.is_empty() {
        e.problems.sort_by_key(|p| p.line.unwrap_or(usize::MAX));
        return Err(ConfigError { problems: e.problems });
    }
    Ok(RunConfig {
        model,
        coupling: coupling.expect("no problems recorded"),
        family,
        point,
        plane,
        scaling,
        verify,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
# smallest useful run
model.N = 4
coupling.family = "paper-example"
point.omega = 0
point.gamma = 1
point.lambda = 2
"#;

    #[test]
    fn minimal_config() {
        let c = parse_config(MINIMAL).unwrap();
        let m = c.model.unwrap();
        assert_eq!((m.n, m.j, m.eta), (4, 1.0, Sector::Even));
        assert_eq!(c.point.unwrap().values(), &[0.0, 1.0, 2.0]);
        assert_eq!(c.coupling, CouplingSpec::PaperExample);
    }

    #[test]
    fn odd_length_is_rejected() {
        let err = parse_config("model.N = 5\n").unwrap_err();
        assert_eq!(err.problems.len(), 1);
        assert_eq!(err.problems[0].line, Some(1));
        assert!(err.problems[0].message.contains("N must be even"));
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse_config("model.N = 4\nmodel.M = 3\n").unwrap_err();
        assert!(err.to_string().contains("line 2: unknown key `model.M`"));
    }

    #[test]
    fn every_problem_is_reported() {
        let text = "model.N = 7\nmodel.eta = \"x\"\nbogus line\nplane.kind = \"omega-gamma\"\npoint.zeta = 1\n";
        let err = parse_config(text).unwrap_err();
        let lines: Vec<_> = err.problems.iter().map(|p| p.line).collect();
        assert!(lines.contains(&Some(1)) && lines.contains(&Some(2)) && lines.contains(&Some(3)));
        assert!(lines.contains(&Some(5)));
        assert!(err.problems.len() >= 6, "{err}");
    }

    #[test]
    fn custom_family_and_lists() {
        let text = r#"
model.N = 6
coupling.family = "custom"
coupling.G = "gamma*exp(i*lambda)"   # comment after value
coupling.Lambda = "1"
coupling.params = "gamma", "lambda"
point.gamma = 0.5
point.lambda = 2
"#;
        let c = parse_config(text).unwrap();
        assert_eq!(c.point.unwrap().names(), &["gamma".to_string(), "lambda".to_string()]);
    }

    #[test]
    fn scaling_path_ii_needs_large_lambda() {
        let err = parse_config("scaling.path = \"II\"\nscaling.fixed = 0.5\n").unwrap_err();
        assert!(err.to_string().contains("requires |λ| > 1"), "{err}");
        let ok = parse_config("scaling.path = \"I\"\nscaling.fixed = 1\n").unwrap();
        assert_eq!(ok.scaling.unwrap().deltas.len(), 20);
    }

    #[test]
    fn plane_section() {
        let text = "model.N = 10\nplane.kind = \"omega-gamma\"\nplane.lambda = -2\nplane.x = -3, 3, 0.5\nplane.y = 0, 0, 1\n";
        let c = parse_config(text).unwrap();
        let p = c.plane.unwrap();
        assert_eq!(p.x.count(), 13);
        assert_eq!(p.y.count(), 1);
    }

    #[test]
    fn verify_section() {
        let c = parse_config("verify.sizes = 4, 6\nverify.tolerance = 1e-15\n").unwrap();
        assert_eq!(c.verify.sizes, vec![4, 6]);
        assert_eq!(c.verify.tolerance, 1e-15);
        assert!(parse_config("verify.sizes = 4, 14\n").is_err());
    }
}
