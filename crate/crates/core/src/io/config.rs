//! Line-oriented system configs.
//!
//! ```text
//! [system]
//! name = particle
//! coordinates = x, y, z
//! parameters = m=1
//! [metric]
//! diagonal = m, m, m
//! [constraints]
//! row = -y, 0, 1
//! pivots = z
//! ```
//!
//! Sections may repeat keys (`row`, `generator`); `#` and `;` start comments.

use std::path::Path;
use std::sync::Arc;

use crate::dynamics::Method;
use crate::error::{Error, Result};
use crate::io::expr::{parse_expression, Expr, ExprMap, Scope};
use crate::mechanics::{MapRef, MechanicalSystem, SystemBuilder};
use crate::reduction::{CotangentLiftedAction, QuotientChart};
use crate::scalar::Real;

/// `[simulation]` defaults.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimulationConfig {
    pub t_final: f64,
    pub dt: f64,
    pub method: Method,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            t_final: 1.0,
            dt: 1e-3,
            method: Method::Rk4,
        }
    }
}

/// A system together with the actions and charts declared alongside it.
#[derive(Clone)]
pub struct LoadedSystem<T: Real> {
    pub system: MechanicalSystem<T>,
    pub actions: Vec<CotangentLiftedAction<T>>,
    pub charts: Vec<QuotientChart<T>>,
    pub simulation: SimulationConfig,
    /// Named constants from `[system] parameters`.
    pub parameters: Vec<(String, f64)>,
}

impl<T: Real> LoadedSystem<T> {
    pub fn chart(&self, name: &str) -> Option<&QuotientChart<T>> {
        self.charts.iter().find(|c| c.name == name)
    }

    pub fn action(&self, name: &str) -> Option<&CotangentLiftedAction<T>> {
        self.actions.iter().find(|a| a.name == name)
    }

    /// Scope with the given variables and this config's parameters.
    pub fn scope<I, N>(&self, variables: I) -> Scope
    where
        I: IntoIterator<Item = N>,
        N: Into<String>,
    {
        Scope::new(variables).with_parameters(self.parameters.clone())
    }
}

#[derive(Debug)]
struct Entry<'a> {
    key: &'a str,
    value: &'a str,
    /// Byte offset of `value` in the source.
    offset: usize,
    line: usize,
}

#[derive(Debug)]
struct Section<'a> {
    name: &'a str,
    line: usize,
    entries: Vec<Entry<'a>>,
}

impl<'a> Section<'a> {
    fn all(&self, key: &str) -> impl Iterator<Item = &Entry<'a>> + '_ {
        let key = key.to_owned();
        self.entries.iter().filter(move |e| e.key == key)
    }

    fn one(&self, key: &str) -> Result<Option<&Entry<'a>>> {
        let mut it = self.all(key);
        let first = it.next();
        if let Some(dup) = it.next() {
            return Err(config_error(dup.line, format!("duplicate key `{key}` in [{}]", self.name)));
        }
        Ok(first)
    }

    fn required(&self, key: &str) -> Result<&Entry<'a>> {
        self.one(key)?
            .ok_or_else(|| config_error(self.line, format!("[{}] needs `{key}`", self.name)))
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for e in &self.entries {
            if !allowed.contains(&e.key) {
                return Err(config_error(e.line, format!("unknown key `{}` in [{}]", e.key, self.name)));
            }
        }
        Ok(())
    }
}

fn config_error(line: usize, message: impl std::fmt::Display) -> Error {
    Error::Config(format!("line {line}: {message}"))
}

fn split_sections(src: &str) -> Result<Vec<Section<'_>>> {
    let mut sections: Vec<Section> = Vec::new();
    let mut offset = 0;
    for (i, raw) in src.split_inclusive('\n').enumerate() {
        let line_no = i + 1;
        let start = offset;
        offset += raw.len();
        let body = raw.trim_end_matches(['\n', '\r']);
        let body = match body.find(['#', ';']) {
            Some(c) => &body[..c],
            None => body,
        };
        let trimmed = body.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                return Err(config_error(line_no, "unterminated section header"));
            };
            sections.push(Section {
                name: name.trim(),
                line: line_no,
                entries: Vec::new(),
            });
            continue;
        }
        let Some(eq) = body.find('=') else {
            return Err(config_error(line_no, format!("expected `key = value`, found `{trimmed}`")));
        };
        let Some(section) = sections.last_mut() else {
            return Err(config_error(line_no, "entry before any section header"));
        };
        let key = body[..eq].trim();
        let raw_value = &body[eq + 1..];
        let lead = raw_value.len() - raw_value.trim_start().len();
        section.entries.push(Entry {
            key,
            value: raw_value.trim(),
            offset: start + eq + 1 + lead,
            line: line_no,
        });
    }
    Ok(sections)
}

/// Comma-separated items with their offsets.
fn items<'a>(entry: &Entry<'a>) -> Vec<(&'a str, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for piece in entry.value.split(',') {
        let lead = piece.len() - piece.trim_start().len();
        out.push((piece.trim(), entry.offset + start + lead));
        start += piece.len() + 1;
    }
    out
}

fn names(entry: &Entry) -> Result<Vec<String>> {
    let list: Vec<String> = items(entry).into_iter().map(|(s, _)| s.to_owned()).collect();
    for n in &list {
        let ok = n.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
            && n.chars().all(|c| c.is_alphanumeric() || c == '_');
        if !ok {
            return Err(config_error(entry.line, format!("`{n}` is not a valid name")));
        }
    }
    for (i, n) in list.iter().enumerate() {
        if list[..i].contains(n) {
            return Err(config_error(entry.line, format!("name `{n}` repeated")));
        }
    }
    Ok(list)
}

fn exprs(entry: &Entry, scope: &Scope) -> Result<Vec<Expr>> {
    items(entry)
        .into_iter()
        .map(|(text, at)| {
            parse_expression(text, scope).map_err(|e| match e {
                Error::Parse { offset, message } => Error::Parse {
                    offset: at + offset,
                    message: format!("line {}: {message}", entry.line),
                },
                other => other,
            })
        })
        .collect()
}

fn number(entry: &Entry) -> Result<f64> {
    entry
        .value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| config_error(entry.line, format!("`{}` is not a finite number", entry.value)))
}

fn expr_map<T: Real>(list: Vec<Expr>, scope: &Scope) -> MapRef<T> {
    Arc::new(ExprMap::new(list, scope))
}

fn index_of(names: &[String], name: &str, line: usize, what: &str) -> Result<usize> {
    names
        .iter()
        .position(|n| n == name)
        .ok_or_else(|| config_error(line, format!("unknown {what} `{name}`")))
}

/// Reads and loads a config file.
pub fn load_system<T: Real>(path: impl AsRef<Path>) -> Result<LoadedSystem<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    load_str(&text)
}

/// Loads a config from its text.
pub fn load_str<T: Real>(src: &str) -> Result<LoadedSystem<T>> {
    let sections = split_sections(src)?;
    let find = |name: &str| -> Result<Option<&Section>> {
        let mut it = sections.iter().filter(|s| s.name == name);
        let first = it.next();
        if let Some(dup) = it.next() {
            return Err(config_error(dup.line, format!("duplicate section [{name}]")));
        }
        Ok(first)
    };
    for s in &sections {
        let known = matches!(s.name, "system" | "metric" | "potential" | "constraints" | "simulation")
            || s.name.starts_with("action:")
            || s.name.starts_with("chart:");
        if !known {
            return Err(config_error(s.line, format!("unknown section [{}]", s.name)));
        }
    }

    let system = find("system")?.ok_or_else(|| Error::Config("missing [system] section".into()))?;
    system.check_keys(&["name", "coordinates", "periodic", "parameters", "reference"])?;
    let coords = names(system.required("coordinates")?)?;
    let n = coords.len();
    let mut parameters = Vec::new();
    if let Some(e) = system.one("parameters")? {
        for (item, _) in items(e) {
            let Some((k, v)) = item.split_once('=') else {
                return Err(config_error(e.line, format!("parameter `{item}` needs `name=value`")));
            };
            let (k, v) = (k.trim(), v.trim());
            let value = v
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| config_error(e.line, format!("parameter `{k}` has non-numeric value `{v}`")))?;
            if coords.iter().any(|c| c == k) || parameters.iter().any(|(p, _): &(String, f64)| p == k) {
                return Err(config_error(e.line, format!("parameter `{k}` clashes with another name")));
            }
            parameters.push((k.to_owned(), value));
        }
    }
    let scope = Scope::new(coords.clone()).with_parameters(parameters.clone());
    let constant_scope = Scope::default().with_parameters(parameters.clone());

    let mut builder = SystemBuilder::<T>::new(coords.clone());
    if let Some(e) = system.one("name")? {
        builder = builder.name(e.value);
    }
    if let Some(e) = system.one("periodic")? {
        let mut flags = vec![false; n];
        for name in names(e)? {
            flags[index_of(&coords, &name, e.line, "coordinate")?] = true;
        }
        builder = builder.periodic(flags);
    }
    if let Some(e) = system.one("reference")? {
        let values = exprs(e, &constant_scope)?;
        if values.len() != n {
            return Err(config_error(e.line, format!("reference needs {n} values")));
        }
        let params = constant_scope.parameter_values();
        builder = builder.reference(values.iter().map(|x| T::from_f64(x.eval::<f64>(&[], &params))).collect());
    }

    // metric
    let metric = find("metric")?.ok_or_else(|| Error::Config("missing [metric] section".into()))?;
    metric.check_keys(&["row", "diagonal"])?;
    let mut entries: Vec<Expr> = Vec::with_capacity(n * n);
    if let Some(d) = metric.one("diagonal")? {
        if metric.all("row").next().is_some() {
            return Err(config_error(d.line, "use either `diagonal` or `row`, not both"));
        }
        let diag = exprs(d, &scope)?;
        if diag.len() != n {
            return Err(config_error(d.line, format!("diagonal needs {n} entries")));
        }
        for i in 0..n {
            for j in 0..n {
                entries.push(if i == j { diag[i].clone() } else { Expr::Const(0.0) });
            }
        }
    } else {
        let rows: Vec<_> = metric.all("row").collect();
        if rows.len() != n {
            return Err(config_error(metric.line, format!("metric needs {n} rows, found {}", rows.len())));
        }
        for r in &rows {
            let row = exprs(r, &scope)?;
            if row.len() != n {
                return Err(config_error(r.line, format!("metric row needs {n} entries")));
            }
            entries.extend(row);
        }
        for i in 0..n {
            for j in 0..i {
                if entries[i * n + j] != entries[j * n + i] {
                    return Err(config_error(
                        rows[i].line,
                        format!("metric is not symmetric as written at ({}, {})", i + 1, j + 1),
                    ));
                }
            }
        }
    }
    builder = builder.metric_ref(expr_map(entries, &scope));

    if let Some(p) = find("potential")? {
        p.check_keys(&["V"])?;
        if let Some(e) = p.one("V")? {
            let v = exprs(e, &scope)?;
            if v.len() != 1 {
                return Err(config_error(e.line, "V must be a single expression"));
            }
            builder = builder.potential_ref(expr_map(v, &scope));
        }
    }

    if let Some(c) = find("constraints")? {
        c.check_keys(&["row", "pivots"])?;
        let rows: Vec<_> = c.all("row").collect();
        let k = rows.len();
        if k >= n {
            return Err(config_error(
                c.line,
                format!("{k} constraint rows for {n} coordinates; need fewer rows than coordinates"),
            ));
        }
        let mut a = Vec::with_capacity(k * n);
        for r in &rows {
            let row = exprs(r, &scope)?;
            if row.len() != n {
                return Err(config_error(r.line, format!("constraint row needs {n} entries")));
            }
            a.extend(row);
        }
        if k > 0 {
            builder = builder.constraints_ref(k, expr_map(a, &scope));
        }
        if let Some(e) = c.one("pivots")? {
            let pivots = names(e)?
                .iter()
                .map(|p| index_of(&coords, p, e.line, "coordinate"))
                .collect::<Result<Vec<_>>>()?;
            builder = builder.pivots(pivots);
        }
    }

    let built = builder.build()?;
    let m = built.m();

    let mut actions = Vec::new();
    for s in sections.iter().filter(|s| s.name.starts_with("action:")) {
        s.check_keys(&["generator", "labels"])?;
        let name = s.name["action:".len()..].trim().to_owned();
        let mut generators: Vec<MapRef<T>> = Vec::new();
        for g in s.all("generator") {
            let list = exprs(g, &scope)?;
            if list.len() != n {
                return Err(config_error(g.line, format!("generator needs {n} components")));
            }
            generators.push(expr_map(list, &scope));
        }
        if generators.is_empty() {
            return Err(config_error(s.line, format!("action {name} has no generators")));
        }
        let labels = match s.one("labels")? {
            Some(e) => {
                let l = names(e)?;
                if l.len() != generators.len() {
                    return Err(config_error(e.line, "one label per generator"));
                }
                l
            }
            None => (1..=generators.len()).map(|i| format!("J{i}")).collect(),
        };
        actions.push(CotangentLiftedAction::new(name, generators, labels));
    }

    let mut charts = Vec::new();
    for s in sections.iter().filter(|s| s.name.starts_with("chart:")) {
        s.check_keys(&["reduced", "fiber", "project", "lift", "expected"])?;
        let name = s.name["chart:".len()..].trim().to_owned();
        let reduced = names(s.required("reduced")?)?;
        let fiber = match s.one("fiber")? {
            Some(e) => names(e)?,
            None => Vec::new(),
        };
        let mut chart_vars = coords.clone();
        chart_vars.extend((1..=m).map(|i| format!("u{i}")));
        let chart_scope = Scope::new(chart_vars).with_parameters(parameters.clone());
        let mut lift_vars = reduced.clone();
        lift_vars.extend(fiber.iter().cloned());
        for (i, v) in lift_vars.iter().enumerate() {
            if lift_vars[..i].contains(v) {
                return Err(config_error(s.line, format!("chart {name}: `{v}` is both reduced and fiber")));
            }
        }
        let lift_scope = Scope::new(lift_vars).with_parameters(parameters.clone());
        let reduced_scope = Scope::new(reduced.clone()).with_parameters(parameters.clone());
        let project = exprs(s.required("project")?, &chart_scope)?;
        let lift = exprs(s.required("lift")?, &lift_scope)?;
        let expected = match s.one("expected")? {
            Some(e) => Some(expr_map(exprs(e, &reduced_scope)?, &reduced_scope)),
            None => None,
        };
        charts.push(QuotientChart {
            name,
            reduced_names: reduced,
            fiber_names: fiber,
            project: expr_map(project, &chart_scope),
            lift: expr_map(lift, &lift_scope),
            expected,
        });
    }

    let mut simulation = SimulationConfig::default();
    if let Some(s) = find("simulation")? {
        s.check_keys(&["t_final", "dt", "method"])?;
        if let Some(e) = s.one("t_final")? {
            simulation.t_final = number(e)?;
        }
        if let Some(e) = s.one("dt")? {
            simulation.dt = number(e)?;
        }
        if let Some(e) = s.one("method")? {
            simulation.method = e.value.parse().map_err(|_| config_error(e.line, format!("unknown method `{}`", e.value)))?;
        }
    }

    Ok(LoadedSystem {
        system: built,
        actions,
        charts,
        simulation,
        parameters,
    })
}
