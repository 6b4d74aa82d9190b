//! Scenario files: TOML with a `[domain]`, a `[factor]` and optional
//! `[numerics]` table. See `scenarios/schwarzschild.toml` for a commented
//! example.

use crate::capacity::Preconditioner;
use crate::fields::{io, DomainSpec};
use crate::geom::{ConformalFactor, Dimension, Pole, SampledFactor};
use serde::Deserialize;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use toml::Spanned;

/// How hypothesis failures are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Stop after the hypothesis checks if any fails.
    Strict,
    /// Compute everything and flag failed hypotheses.
    Exploratory,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "strict" => Ok(Self::Strict),
            "exploratory" => Ok(Self::Exploratory),
            _ => Err(format!("unknown mode {s:?}, expected \"strict\" or \"exploratory\"")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Strict => "strict",
            Self::Exploratory => "exploratory",
        })
    }
}

/// Resolution and solver settings. Unset lengths default from the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Numerics {
    /// Grid spacing near Ω; defaults to circumradius/24.
    pub h: Option<f64>,
    /// Outer cube half-width; defaults to 16·circumradius.
    pub r_out: Option<f64>,
    /// Radii of the mass flux spheres.
    pub mass_radii: Option<Vec<f64>>,
    pub tol: f64,
    pub growth: f64,
    pub preconditioner: Preconditioner,
    pub estimate_error: bool,
    /// Solve on the grid even when the radial closed form applies.
    pub force_grid: bool,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            h: None,
            r_out: None,
            mass_radii: None,
            tol: 1e-10,
            growth: 12.0,
            preconditioner: Preconditioner::Mic,
            estimate_error: true,
            force_grid: false,
        }
    }
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub dim: Dimension,
    pub domain: DomainSpec,
    pub factor: ConformalFactor,
    pub numerics: Numerics,
    pub mode: Mode,
    /// The parsed document, kept for sweeps.
    pub document: toml::Table,
    /// Directory that relative paths in the document are resolved against.
    pub base_dir: Option<PathBuf>,
}

/// One problem found while validating a scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// Dotted path of the offending field, empty for syntax errors.
    pub field: String,
    /// 1-based line and column, when known.
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let (Some(l), Some(c)) = (self.line, self.column) {
            write!(f, "{l}:{c}: ")?;
        }
        if !self.field.is_empty() {
            write!(f, "{}: ", self.field)?;
        }
        f.write_str(&self.message)
    }
}

/// Every diagnostic of a rejected scenario file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioError {
    pub origin: String,
    pub diagnostics: Vec<Diagnostic>,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{}:{d}", self.origin)?;
        }
        Ok(())
    }
}

impl std::error::Error for ScenarioError {}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Spanned<String>,
    mode: Option<Spanned<String>>,
    dim: Spanned<i64>,
    domain: Spanned<RawDomain>,
    factor: Spanned<RawFactor>,
    numerics: Option<Spanned<RawNumerics>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    kind: Spanned<String>,
    center: Option<Spanned<Vec<f64>>>,
    radius: Option<Spanned<f64>>,
    semi_axes: Option<Spanned<Vec<f64>>>,
    balls: Option<Vec<Spanned<RawBall>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBall {
    center: Spanned<Vec<f64>>,
    radius: Spanned<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFactor {
    family: Spanned<String>,
    mass: Option<Spanned<f64>>,
    poles: Option<Vec<Spanned<RawPole>>>,
    path: Option<Spanned<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPole {
    center: Spanned<Vec<f64>>,
    charge: Spanned<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNumerics {
    h: Option<Spanned<f64>>,
    r_out: Option<Spanned<f64>>,
    mass_radii: Option<Spanned<Vec<f64>>>,
    tol: Option<Spanned<f64>>,
    growth: Option<Spanned<f64>>,
    preconditioner: Option<Spanned<String>>,
    estimate_error: Option<Spanned<bool>>,
    capacity: Option<Spanned<String>>,
}

struct Collector<'a> {
    text: &'a str,
    out: Vec<Diagnostic>,
}

impl Collector<'_> {
    fn position(&self, offset: usize) -> (usize, usize) {
        let before = &self.text[..offset.min(self.text.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1) + 1;
        (line, column)
    }

    fn push(&mut self, field: impl Into<String>, span: Option<std::ops::Range<usize>>, message: impl Into<String>) {
        let (line, column) = match span.map(|s| self.position(s.start)) {
            Some((l, c)) => (Some(l), Some(c)),
            None => (None, None),
        };
        self.out.push(Diagnostic { field: field.into(), line, column, message: message.into() });
    }

    fn positive(&mut self, field: &str, v: &Spanned<f64>) -> Option<f64> {
        let x = *v.get_ref();
        if x > 0.0 && x.is_finite() {
            Some(x)
        } else {
            self.push(field, Some(v.span()), format!("must be positive, got {x}"));
            None
        }
    }

    fn point(&mut self, field: &str, v: &Spanned<Vec<f64>>, n: usize) -> Option<Vec<f64>> {
        let p = v.get_ref();
        if p.len() != n {
            self.push(field, Some(v.span()), format!("has {} coordinates, expected {n}", p.len()));
            return None;
        }
        if let Some(x) = p.iter().find(|x| !x.is_finite()) {
            self.push(field, Some(v.span()), format!("coordinate {x} is not finite"));
            return None;
        }
        Some(p.clone())
    }
}

/// Parses and range-checks a scenario document. `origin` names the source
/// in diagnostics; `base_dir` resolves relative paths.
pub fn parse_scenario(text: &str, origin: &str, base_dir: Option<&Path>) -> Result<Scenario, ScenarioError> {
    let fail = |mut diagnostics: Vec<Diagnostic>| {
        diagnostics.sort_by_key(|d| (d.line.unwrap_or(usize::MAX), d.column.unwrap_or(usize::MAX)));
        ScenarioError { origin: origin.to_string(), diagnostics }
    };
    let mut c = Collector { text, out: Vec::new() };
    let raw: RawScenario = match toml::from_str(text) {
        Ok(r) => r,
        Err(e) => {
            c.push("", e.span(), e.message().trim().to_string());
            return Err(fail(c.out));
        }
    };
    let document: toml::Table = toml::from_str(text).map_err(|e| {
        let mut c = Collector { text, out: Vec::new() };
        c.push("", e.span(), e.message().to_string());
        fail(c.out)
    })?;

    let name = raw.name.get_ref().trim().to_string();
    if name.is_empty() {
        c.push("name", Some(raw.name.span()), "must not be empty");
    }
    let mode = match &raw.mode {
        None => Mode::Strict,
        Some(m) => m.get_ref().parse().unwrap_or_else(|e: String| {
            c.push("mode", Some(m.span()), e);
            Mode::Strict
        }),
    };
    let n = *raw.dim.get_ref();
    let dim = if n < 3 {
        c.push("dim", Some(raw.dim.span()), "dimension must be >= 3");
        return Err(fail(c.out));
    } else {
        Dimension::new(n as usize).expect("n >= 3")
    };
    let n = dim.n();

    let factor = parse_factor(&mut c, raw.factor.get_ref(), n, base_dir);
    let domain = parse_domain(&mut c, raw.domain.get_ref(), n, factor.as_ref());
    let numerics = raw.numerics.as_ref().map_or_else(
        || Some(Numerics::default()),
        |r| parse_numerics(&mut c, r.get_ref()),
    );

    if let (Some(domain), Some(numerics)) = (&domain, &numerics) {
        let rho = domain.circumradius();
        let reach = domain.center().iter().map(|x| x * x).sum::<f64>().sqrt() + rho;
        if n != 3 && !domain.is_origin_ball() {
            c.push("domain", Some(raw.domain.span()), "only balls about the origin are supported for n != 3");
        }
        let h = numerics.h.unwrap_or(rho / 24.0);
        if let Some(r_out) = numerics.r_out {
            if r_out <= rho + 6.0 * h {
                let span = raw.numerics.as_ref().and_then(|t| t.get_ref().r_out.as_ref()).map(|s| s.span());
                c.push("numerics.r_out", span, format!("{r_out} does not bound the domain (circumradius {rho})"));
            }
        }
        if let Some(h_set) = numerics.h {
            if h_set > rho / 4.0 {
                let span = raw.numerics.as_ref().and_then(|t| t.get_ref().h.as_ref()).map(|s| s.span());
                c.push("numerics.h", span, format!("{h_set} does not resolve the domain (circumradius {rho})"));
            }
        }
        if let Some(radii) = &numerics.mass_radii {
            let span = raw.numerics.as_ref().and_then(|t| t.get_ref().mass_radii.as_ref()).map(|s| s.span());
            if radii.len() < 3 {
                c.push("numerics.mass_radii", span, "need at least three radii");
            } else if radii[0] < 4.0 * reach {
                c.push("numerics.mass_radii", span, format!("radii must exceed 4x the domain reach {reach}"));
            } else {
                let q = radii[1] / radii[0];
                if !(q >= 2.0) || radii.windows(2).any(|w| ((w[1] / w[0]) / q - 1.0).abs() > 1e-9) {
                    c.push("numerics.mass_radii", span, "radii must be geometric with ratio >= 2");
                }
            }
        }
    }
    if let (Some(domain), Some(factor)) = (&domain, &factor) {
        if factor.singular_radius() > 0.0 {
            if let ConformalFactor::Multipole { poles, .. } = factor {
                for (i, p) in poles.iter().enumerate() {
                    if !domain.contains(&p.center) {
                        c.push(
                            format!("factor.poles[{i}].center"),
                            raw.factor.get_ref().poles.as_ref().map(|ps| ps[i].get_ref().center.span()),
                            "pole lies outside the domain",
                        );
                    }
                }
            }
        }
    }
    match (domain, factor, numerics) {
        (Some(domain), Some(factor), Some(numerics)) if c.out.is_empty() => Ok(Scenario {
            name,
            dim,
            domain,
            factor,
            numerics,
            mode,
            document,
            base_dir: base_dir.map(Path::to_path_buf),
        }),
        _ => Err(fail(c.out)),
    }
}

fn parse_domain(c: &mut Collector<'_>, raw: &RawDomain, n: usize, factor: Option<&ConformalFactor>) -> Option<DomainSpec> {
    let kind = raw.kind.get_ref().as_str();
    let center = |c: &mut Collector<'_>| match &raw.center {
        Some(p) => c.point("domain.center", p, n),
        None => Some(vec![0.0; n]),
    };
    match kind {
        "ball" => {
            let center = center(c);
            let radius = match &raw.radius {
                Some(r) => c.positive("domain.radius", r),
                None => {
                    c.push("domain.radius", Some(raw.kind.span()), "a ball needs a radius");
                    None
                }
            };
            DomainSpec::ball(center?, radius?).ok()
        }
        "ellipsoid" => {
            let center = center(c);
            let axes = match &raw.semi_axes {
                Some(a) => c.point("domain.semi_axes", a, n).and_then(|a| {
                    if a.iter().all(|x| *x > 0.0) {
                        Some(a)
                    } else {
                        c.push("domain.semi_axes", Some(raw.semi_axes.as_ref().unwrap().span()), "must be positive");
                        None
                    }
                }),
                None => {
                    c.push("domain.semi_axes", Some(raw.kind.span()), "an ellipsoid needs semi_axes");
                    None
                }
            };
            DomainSpec::ellipsoid(center?, axes?).ok()
        }
        "horizon" => {
            for (field, present) in [
                ("domain.center", raw.center.is_some()),
                ("domain.radius", raw.radius.is_some()),
                ("domain.semi_axes", raw.semi_axes.is_some()),
                ("domain.balls", raw.balls.is_some()),
            ] {
                if present {
                    c.push(field, Some(raw.kind.span()), "the horizon is fixed by the factor");
                }
            }
            match factor {
                Some(ConformalFactor::Schwarzschild { mass, .. }) => {
                    DomainSpec::ball(vec![0.0; n], crate::geom::horizon_radius(n, *mass)).ok()
                }
                Some(other) => {
                    let message = format!("a horizon domain needs a schwarzschild factor, not {}", other.family());
                    c.push("domain.kind", Some(raw.kind.span()), message);
                    None
                }
                None => None,
            }
        }
        "union" => {
            let Some(balls) = &raw.balls else {
                c.push("domain.balls", Some(raw.kind.span()), "a union needs a list of balls");
                return None;
            };
            if balls.is_empty() {
                c.push("domain.balls", Some(raw.kind.span()), "a union needs at least one ball");
                return None;
            }
            let mut out = Vec::new();
            for (i, b) in balls.iter().enumerate() {
                let b = b.get_ref();
                let p = c.point(&format!("domain.balls[{i}].center"), &b.center, n);
                let r = c.positive(&format!("domain.balls[{i}].radius"), &b.radius);
                if let (Some(p), Some(r)) = (p, r) {
                    out.push((p, r));
                }
            }
            (out.len() == balls.len()).then(|| DomainSpec::union_of_balls(out).ok()).flatten()
        }
        other => {
            c.push(
                "domain.kind",
                Some(raw.kind.span()),
                format!("unknown domain kind {other:?}, expected ball, ellipsoid, union or horizon"),
            );
            None
        }
    }
}

fn parse_factor(c: &mut Collector<'_>, raw: &RawFactor, n: usize, base_dir: Option<&Path>) -> Option<ConformalFactor> {
    let family = raw.family.get_ref().as_str();
    let unexpected = |c: &mut Collector<'_>, allowed: &[&str]| {
        let present = [
            ("mass", raw.mass.as_ref().map(|s| s.span())),
            ("poles", raw.poles.as_ref().and_then(|p| p.first()).map(|s| s.span())),
            ("path", raw.path.as_ref().map(|s| s.span())),
        ];
        for (key, span) in present {
            if !allowed.contains(&key) && (span.is_some() || (key == "poles" && raw.poles.is_some())) {
                c.push(format!("factor.{key}"), span, format!("not used by the {family} family"));
            }
        }
    };
    match family {
        "schwarzschild" => {
            unexpected(c, &["mass"]);
            let Some(m) = &raw.mass else {
                c.push("factor.mass", Some(raw.family.span()), "schwarzschild needs a mass");
                return None;
            };
            let m = c.positive("factor.mass", m)?;
            ConformalFactor::schwarzschild(n, m).ok()
        }
        "flat" => {
            unexpected(c, &[]);
            ConformalFactor::flat(n).ok()
        }
        "multipole" => {
            unexpected(c, &["poles"]);
            let Some(poles) = &raw.poles else {
                c.push("factor.poles", Some(raw.family.span()), "multipole needs a list of poles");
                return None;
            };
            let mut out = Vec::new();
            for (i, p) in poles.iter().enumerate() {
                let p = p.get_ref();
                let center = c.point(&format!("factor.poles[{i}].center"), &p.center, n);
                let charge = c.positive(&format!("factor.poles[{i}].charge"), &p.charge);
                if let (Some(center), Some(charge)) = (center, charge) {
                    out.push(Pole::new(center, charge));
                }
            }
            (out.len() == poles.len()).then(|| ConformalFactor::multipole(n, out).ok()).flatten()
        }
        "grid" => {
            unexpected(c, &["path"]);
            let Some(path) = &raw.path else {
                c.push("factor.path", Some(raw.family.span()), "a grid factor needs the path of a grid file");
                return None;
            };
            if n != 3 {
                c.push("factor.family", Some(raw.family.span()), "grid factors are three-dimensional");
                return None;
            }
            let file = base_dir.map_or_else(|| PathBuf::from(path.get_ref()), |d| d.join(path.get_ref()));
            let field = std::fs::File::open(&file)
                .map_err(crate::Error::from)
                .and_then(|f| io::read_binary(std::io::BufReader::new(f)));
            match field {
                Ok(field) => {
                    let grid = field.grid();
                    if !grid.is_uniform() || grid.dims().iter().any(|&d| d < 3) {
                        c.push("factor.path", Some(path.span()), "grid factors need a uniform grid of at least 3^3 cells");
                        return None;
                    }
                    if let Some(v) = field.values().iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
                        c.push("factor.path", Some(path.span()), format!("factor value {v} is not positive"));
                        return None;
                    }
                    let sampled = SampledFactor::from_values((**grid).clone(), field.values().to_vec());
                    Some(ConformalFactor::Sampled(std::sync::Arc::new(sampled)))
                }
                Err(e) => {
                    c.push("factor.path", Some(path.span()), format!("cannot read {}: {e}", file.display()));
                    None
                }
            }
        }
        other => {
            c.push(
                "factor.family",
                Some(raw.family.span()),
                format!("unknown factor family {other:?}, expected schwarzschild, multipole, flat or grid"),
            );
            None
        }
    }
}

fn parse_numerics(c: &mut Collector<'_>, raw: &RawNumerics) -> Option<Numerics> {
    let mut out = Numerics::default();
    let before = c.out.len();
    if let Some(h) = &raw.h {
        out.h = c.positive("numerics.h", h);
    }
    if let Some(r) = &raw.r_out {
        out.r_out = c.positive("numerics.r_out", r);
    }
    if let Some(radii) = &raw.mass_radii {
        if radii.get_ref().iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            c.push("numerics.mass_radii", Some(radii.span()), "radii must be positive");
        } else {
            out.mass_radii = Some(radii.get_ref().clone());
        }
    }
    if let Some(t) = &raw.tol {
        if let Some(t) = c.positive("numerics.tol", t) {
            if t >= 1e-2 {
                c.push("numerics.tol", raw.tol.as_ref().map(|s| s.span()), format!("{t} is too loose"));
            }
            out.tol = t;
        }
    }
    if let Some(g) = &raw.growth {
        if let Some(g) = c.positive("numerics.growth", g) {
            out.growth = g;
        }
    }
    if let Some(p) = &raw.preconditioner {
        match p.get_ref().as_str() {
            "mic" => out.preconditioner = Preconditioner::Mic,
            "jacobi" => out.preconditioner = Preconditioner::Jacobi,
            other => c.push(
                "numerics.preconditioner",
                Some(p.span()),
                format!("unknown preconditioner {other:?}, expected mic or jacobi"),
            ),
        }
    }
    if let Some(e) = &raw.estimate_error {
        out.estimate_error = *e.get_ref();
    }
    if let Some(p) = &raw.capacity {
        match p.get_ref().as_str() {
            "auto" => out.force_grid = false,
            "grid" => out.force_grid = true,
            other => c.push(
                "numerics.capacity",
                Some(p.span()),
                format!("unknown capacity path {other:?}, expected auto or grid"),
            ),
        }
    }
    (c.out.len() == before).then_some(out)
}

/// Reads and validates a scenario file.
pub fn validate_scenario_file(path: &Path) -> Result<Scenario, ScenarioError> {
    let origin = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError {
        origin: origin.clone(),
        diagnostics: vec![Diagnostic { field: String::new(), line: None, column: None, message: e.to_string() }],
    })?;
    parse_scenario(&text, &origin, path.parent())
}

impl Scenario {
    /// A copy with the field at `path` (dotted, with `[i]` for array
    /// elements, e.g. `factor.poles[0].charge`) set to `value`. Integer
    /// fields stay integers.
    pub fn with_parameter(&self, path: &str, value: f64) -> Result<Scenario, ScenarioError> {
        let fail = |message: String| ScenarioError {
            origin: self.name.clone(),
            diagnostics: vec![Diagnostic { field: path.to_string(), line: None, column: None, message }],
        };
        let mut doc = self.document.clone();
        let mut keys = Vec::new();
        for part in path.split('.') {
            match part.split_once('[') {
                Some((key, rest)) => {
                    let i = rest
                        .strip_suffix(']')
                        .and_then(|i| i.parse::<usize>().ok())
                        .ok_or_else(|| fail(format!("bad index in {part:?}")))?;
                    keys.push((key.to_string(), Some(i)));
                }
                None => keys.push((part.to_string(), None)),
            }
        }
        let (last, parents) = keys.split_last().ok_or_else(|| fail("empty parameter path".into()))?;
        let mut table = &mut doc;
        for (key, index) in parents {
            let mut item = table.entry(key.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
            if let Some(i) = index {
                item = item
                    .as_array_mut()
                    .and_then(|a| a.get_mut(*i))
                    .ok_or_else(|| fail(format!("{key}[{i}] does not exist")))?;
            }
            table = item.as_table_mut().ok_or_else(|| fail(format!("{key} is not a table")))?;
        }
        let (key, index) = last;
        let slot = match index {
            None => table.get_mut(key),
            Some(i) => table.get_mut(key).and_then(|a| a.as_array_mut()).and_then(|a| a.get_mut(*i)),
        };
        let new = match slot.as_deref() {
            Some(toml::Value::Integer(_)) if value.fract() == 0.0 => toml::Value::Integer(value as i64),
            Some(toml::Value::Integer(_)) => return Err(fail(format!("{value} is not an integer"))),
            Some(toml::Value::Float(_)) | None => toml::Value::Float(value),
            Some(other) => return Err(fail(format!("cannot set a {} to a number", other.type_str()))),
        };
        match (slot, index) {
            (Some(s), _) => *s = new,
            (None, None) => {
                table.insert(key.clone(), new);
            }
            (None, Some(i)) => return Err(fail(format!("{key}[{i}] does not exist"))),
        }
        let text = toml::to_string(&doc).map_err(|e| fail(e.to_string()))?;
        let mut s = parse_scenario(&text, &self.name, self.base_dir.as_deref())?;
        s.mode = self.mode;
        Ok(s)
    }
}
