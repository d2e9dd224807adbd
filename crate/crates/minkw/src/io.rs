//! Problem and report files.
//!
//! Problems and reports are JSON. Serialization is canonical: object keys in
//! sorted order, every float written with 17 significant digits, so that a
//! parse -> serialize round trip is byte-identical and reports from identical
//! runs compare equal as bytes. Geometry goes out as OBJ (3d), SVG (2d), or
//! CSV; CSV re-imports losslessly at solver precision.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::ineq;
use crate::measures;
use crate::solvers::{precheck, Mode, Precheck, ProblemSpec, SolveError, SolveReport, SolverOptions};
use crate::sphere::{DirectionSet, Polytope, V3};
use crate::weights::{Weight, WeightKind};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    /// Malformed file content, addressed by JSON field path.
    #[error("{path}: {detail}")]
    Schema { path: String, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    /// A theorem hypothesis failed during the parse-time precheck.
    #[error(transparent)]
    Solve(#[from] SolveError),
}

fn schema_err(path: impl Into<String>, detail: impl Into<String>) -> IoError {
    IoError::Schema {
        path: path.into(),
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------------------
// Field-addressed JSON access.

fn as_obj<'v>(v: &'v Value, path: &str) -> Result<&'v Map<String, Value>, IoError> {
    v.as_object()
        .ok_or_else(|| schema_err(path, "expected an object"))
}

fn field<'v>(obj: &'v Map<String, Value>, key: &str, path: &str) -> Result<&'v Value, IoError> {
    obj.get(key)
        .ok_or_else(|| schema_err(format!("{path}.{key}"), "missing field"))
}

fn as_f64(v: &Value, path: &str) -> Result<f64, IoError> {
    v.as_f64()
        .ok_or_else(|| schema_err(path, "expected a number"))
}

fn as_u64(v: &Value, path: &str) -> Result<u64, IoError> {
    v.as_u64()
        .ok_or_else(|| schema_err(path, "expected a non-negative integer"))
}

fn as_array<'v>(v: &'v Value, path: &str) -> Result<&'v Vec<Value>, IoError> {
    v.as_array()
        .ok_or_else(|| schema_err(path, "expected an array"))
}

// ---------------------------------------------------------------------------
// Canonical serialization: sorted keys, 17-significant-digit floats.

fn indent(depth: usize, out: &mut String) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn write_canonical(v: &Value, depth: usize, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            // integer-valued JSON numbers (counts, versions, seeds) keep
            // their integer spelling; everything else gets 17 digits, which
            // round trips any finite f64 exactly
            if n.is_i64() || n.is_u64() {
                out.push_str(&n.to_string());
            } else {
                let x = n.as_f64().expect("finite JSON number");
                out.push_str(&format!("{x:.16e}"));
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("string serializes"));
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                out.push('\n');
                indent(depth + 1, out);
                write_canonical(item, depth + 1, out);
                if i + 1 < items.len() {
                    out.push(',');
                }
            }
            out.push('\n');
            indent(depth, out);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.iter().enumerate() {
                out.push('\n');
                indent(depth + 1, out);
                out.push_str(&serde_json::to_string(k).expect("key serializes"));
                out.push_str(": ");
                write_canonical(&map[k.as_str()], depth + 1, out);
                if i + 1 < keys.len() {
                    out.push(',');
                }
            }
            out.push('\n');
            indent(depth, out);
            out.push('}');
        }
    }
}

/// Canonical pretty text of a JSON value: keys sorted, floats at 17
/// significant digits, trailing newline.
pub fn canonical_string(v: Value) -> String {
    let mut s = String::new();
    write_canonical(&v, 0, &mut s);
    s.push('\n');
    s
}

pub fn sha256_hex(data: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(data);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

// ---------------------------------------------------------------------------
// Problem files.

/// A parsed problem plus the evidence the CLI reports alongside it.
#[derive(Debug, Clone)]
pub struct LoadedProblem {
    pub spec: ProblemSpec,
    /// SHA-256 of the canonical problem text, echoed into reports.
    pub sha256: String,
    pub precheck: Precheck,
    /// Canonical serialization of the parsed spec.
    pub canonical: String,
}

pub fn parse_problem(path: &Path) -> Result<LoadedProblem, IoError> {
    let text = fs::read_to_string(path)?;
    parse_problem_with_base(&text, path.parent())
}

pub fn parse_problem_str(text: &str) -> Result<LoadedProblem, IoError> {
    parse_problem_with_base(text, None)
}

/// `base` resolves relative CSV paths inside the weight descriptor.
pub fn parse_problem_with_base(text: &str, base: Option<&Path>) -> Result<LoadedProblem, IoError> {
    let root: Value = serde_json::from_str(text)?;
    let spec = problem_from_value(&root, base)?;
    let pre = precheck(&spec)?;
    let canonical = serialize_problem(&spec);
    let sha256 = sha256_hex(canonical.as_bytes());
    Ok(LoadedProblem {
        spec,
        sha256,
        precheck: pre,
        canonical,
    })
}

fn weight_from_value(v: &Value, dim: usize, base: Option<&Path>) -> Result<Weight, IoError> {
    let obj = as_obj(v, "weight")?;
    let kind_name = field(obj, "kind", "weight")?
        .as_str()
        .ok_or_else(|| schema_err("weight.kind", "expected a string"))?;
    let kind = if kind_name == "tabulated" && obj.contains_key("csv") {
        let rel = field(obj, "csv", "weight")?
            .as_str()
            .ok_or_else(|| schema_err("weight.csv", "expected a path string"))?;
        let path = match base {
            Some(b) => b.join(rel),
            None => PathBuf::from(rel),
        };
        let text = fs::read_to_string(&path).map_err(|e| {
            schema_err("weight.csv", format!("cannot read {}: {e}", path.display()))
        })?;
        let (radii, densities) = parse_profile_csv(&text)?;
        WeightKind::Tabulated { radii, densities }
    } else {
        serde_json::from_value(v.clone())
            .map_err(|e| schema_err("weight", format!("unrecognized descriptor: {e}")))?
    };
    Weight::new(dim, kind).map_err(|e| schema_err("weight", e.to_string()))
}

/// Two-column `radius,density` text, optional header, increasing radii.
pub fn parse_profile_csv(text: &str) -> Result<(Vec<f64>, Vec<f64>), IoError> {
    let mut radii = Vec::new();
    let mut densities = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if lineno == 0 && cols.iter().any(|c| c.parse::<f64>().is_err()) {
            continue; // header row
        }
        if cols.len() != 2 {
            return Err(schema_err(
                format!("csv line {}", lineno + 1),
                format!("expected 2 columns, got {}", cols.len()),
            ));
        }
        let r: f64 = cols[0].parse().map_err(|_| {
            schema_err(format!("csv line {}", lineno + 1), "bad radius literal")
        })?;
        let d: f64 = cols[1].parse().map_err(|_| {
            schema_err(format!("csv line {}", lineno + 1), "bad density literal")
        })?;
        radii.push(r);
        densities.push(d);
    }
    Ok((radii, densities))
}

fn nu_from_value(
    v: &Value,
    dim: usize,
) -> Result<(DirectionSet, Vec<f64>), IoError> {
    let obj = as_obj(v, "nu")?;
    if let Some(rows_v) = obj.get("rows") {
        let rows = as_array(rows_v, "nu.rows")?;
        if rows.is_empty() {
            return Err(schema_err("nu.rows", "needs at least one row"));
        }
        let mut dirs_raw: Vec<V3> = Vec::with_capacity(rows.len());
        let mut nu = Vec::with_capacity(rows.len());
        for (i, row_v) in rows.iter().enumerate() {
            let path = format!("nu.rows[{i}]");
            let row = as_array(row_v, &path)?;
            if row.len() != dim + 1 {
                return Err(schema_err(
                    &path,
                    format!("expected {} numbers (direction + weight)", dim + 1),
                ));
            }
            let mut u = [0.0_f64; 3];
            for k in 0..dim {
                u[k] = as_f64(&row[k], &format!("{path}[{k}]"))?;
            }
            let w = as_f64(&row[dim], &format!("{path}[{dim}]"))?;
            if !(w.is_finite() && w > 0.0) {
                return Err(schema_err(&path, format!("weight must be positive, got {w}")));
            }
            dirs_raw.push(u);
            nu.push(w);
        }
        let dirs = DirectionSet::new(dim, dirs_raw)
            .map_err(|e| schema_err("nu.rows", e.to_string()))?;
        Ok((dirs, nu))
    } else if let Some(iso_v) = obj.get("isotropic") {
        let iso = as_obj(iso_v, "nu.isotropic")?;
        let c = as_f64(field(iso, "c", "nu.isotropic")?, "nu.isotropic.c")?;
        if !(c.is_finite() && c > 0.0) {
            return Err(schema_err("nu.isotropic.c", format!("must be positive, got {c}")));
        }
        let count = as_u64(field(iso, "count", "nu.isotropic")?, "nu.isotropic.count")? as usize;
        if count < 4 {
            return Err(schema_err("nu.isotropic.count", "needs at least 4 directions"));
        }
        let dirs = match dim {
            2 => DirectionSet::uniform_circle(count),
            3 => DirectionSet::fibonacci_symmetric(count),
            _ => return Err(schema_err("dimension", "must be 2 or 3")),
        };
        let nu: Vec<f64> = dirs.quad_weights().iter().map(|w| c * w).collect();
        Ok((dirs, nu))
    } else {
        Err(schema_err("nu", "needs either a rows list or an isotropic block"))
    }
}

fn problem_from_value(root: &Value, base: Option<&Path>) -> Result<ProblemSpec, IoError> {
    let obj = as_obj(root, "$")?;
    let version = as_u64(field(obj, "schema_version", "$")?, "schema_version")?;
    if version != SCHEMA_VERSION {
        return Err(schema_err(
            "schema_version",
            format!("unsupported version {version}, expected {SCHEMA_VERSION}"),
        ));
    }
    let dim = as_u64(field(obj, "dimension", "$")?, "dimension")? as usize;
    if dim != 2 && dim != 3 {
        return Err(schema_err("dimension", format!("must be 2 or 3, got {dim}")));
    }
    let weight = weight_from_value(field(obj, "weight", "$")?, dim, base)?;
    let p = as_f64(field(obj, "p", "$")?, "p")?;
    let (dirs, nu) = nu_from_value(field(obj, "nu", "$")?, dim)?;
    let mode: Mode = serde_json::from_value(field(obj, "mode", "$")?.clone())
        .map_err(|e| schema_err("mode", format!("unrecognized mode block: {e}")))?;
    let mut options: SolverOptions = match obj.get("solver") {
        Some(v) => serde_json::from_value(v.clone())
            .map_err(|e| schema_err("solver", format!("bad override: {e}")))?,
        None => SolverOptions::default(),
    };
    if let Some(seed_v) = obj.get("seed") {
        options.seed = as_u64(seed_v, "seed")?;
    }
    let even = match obj.get("even") {
        Some(v) => v
            .as_bool()
            .ok_or_else(|| schema_err("even", "expected a boolean"))?,
        None => ineq::measure_is_even(&dirs, &nu),
    };
    Ok(ProblemSpec {
        weight,
        dirs,
        nu,
        p,
        even,
        mode,
        options,
    })
}

/// Canonical problem text for a spec (sorted keys, 17-digit floats).
pub fn serialize_problem(spec: &ProblemSpec) -> String {
    let mut obj = Map::new();
    obj.insert("schema_version".into(), Value::from(SCHEMA_VERSION));
    obj.insert("dimension".into(), Value::from(spec.weight.dim as u64));
    obj.insert(
        "weight".into(),
        serde_json::to_value(&spec.weight.kind).expect("weight kind serializes"),
    );
    obj.insert("p".into(), Value::from(spec.p));
    obj.insert("even".into(), Value::from(spec.even));
    let rows: Vec<Value> = (0..spec.dirs.len())
        .map(|i| {
            let u = spec.dirs.dir(i);
            let mut row: Vec<Value> = (0..spec.weight.dim).map(|k| Value::from(u[k])).collect();
            row.push(Value::from(spec.nu[i]));
            Value::Array(row)
        })
        .collect();
    let mut nu_obj = Map::new();
    nu_obj.insert("rows".into(), Value::Array(rows));
    obj.insert("nu".into(), Value::Object(nu_obj));
    obj.insert(
        "mode".into(),
        serde_json::to_value(&spec.mode).expect("mode serializes"),
    );
    obj.insert(
        "solver".into(),
        serde_json::to_value(&spec.options).expect("options serialize"),
    );
    obj.insert("seed".into(), Value::from(spec.options.seed));
    canonical_string(Value::Object(obj))
}

// ---------------------------------------------------------------------------
// Report files.

/// The per-direction datum the table rows compare against: nu itself, or the
/// grid samples times the cell width when the mode carries its own samples.
fn table_datum(spec: &ProblemSpec) -> Vec<f64> {
    match &spec.mode {
        Mode::MaCircle { f } => {
            let cell = 2.0 * std::f64::consts::PI / spec.dirs.len() as f64;
            let src = if f.is_empty() { &spec.nu } else { f };
            src.iter().map(|v| v * cell).collect()
        }
        _ => spec.nu.clone(),
    }
}

/// Assemble the canonical report document: problem echo + hash, precheck,
/// one entry per solve with its per-direction table, artifact paths.
pub fn render_report(
    loaded: &LoadedProblem,
    reports: &[SolveReport],
    artifacts: &[String],
) -> String {
    let spec = &loaded.spec;
    let problem_value: Value =
        serde_json::from_str(&loaded.canonical).expect("canonical problem parses");
    let mut entries: Vec<Value> = Vec::with_capacity(reports.len());
    for rep in reports {
        let mut entry = serde_json::to_value(rep)
            .expect("report serializes")
            .as_object()
            .cloned()
            .expect("report is an object");
        // Per-direction table: direction components, datum, support, realized
        // measure, absolute row residual against the stated multiplier.
        let nu_rows = table_datum(spec);
        let mut kkt_max = 0.0_f64;
        let rows: Vec<Value> = (0..spec.dirs.len())
            .map(|i| {
                let u = spec.dirs.dir(i);
                let nu_i = nu_rows[i];
                let res_i = (nu_i - rep.lambda * rep.lp_surface[i]).abs();
                kkt_max = kkt_max.max(res_i);
                let mut row: Vec<Value> =
                    (0..spec.weight.dim).map(|k| Value::from(u[k])).collect();
                row.push(Value::from(nu_i));
                row.push(Value::from(rep.h[i]));
                row.push(Value::from(rep.lp_surface[i]));
                row.push(Value::from(res_i));
                Value::Array(row)
            })
            .collect();
        entry.insert("table".into(), Value::Array(rows));
        entry.insert("kkt_residual_max".into(), Value::from(kkt_max));
        entries.push(Value::Object(entry));
    }
    let mut obj = Map::new();
    obj.insert("schema_version".into(), Value::from(SCHEMA_VERSION));
    obj.insert("problem_sha256".into(), Value::from(loaded.sha256.clone()));
    obj.insert("problem".into(), problem_value);
    obj.insert(
        "precheck".into(),
        serde_json::to_value(&loaded.precheck).expect("precheck serializes"),
    );
    obj.insert("reports".into(), Value::Array(entries));
    obj.insert(
        "artifacts".into(),
        Value::Array(artifacts.iter().map(|a| Value::from(a.clone())).collect()),
    );
    canonical_string(Value::Object(obj))
}

/// A report document parsed back for verification or geometry emission.
#[derive(Debug)]
pub struct ReportDoc {
    pub sha256: String,
    pub spec: ProblemSpec,
    pub reports: Vec<SolveReport>,
    pub root: Value,
}

pub fn parse_report(text: &str) -> Result<ReportDoc, IoError> {
    let root: Value = serde_json::from_str(text)?;
    let obj = as_obj(&root, "$")?;
    let version = as_u64(field(obj, "schema_version", "$")?, "schema_version")?;
    if version != SCHEMA_VERSION {
        return Err(schema_err(
            "schema_version",
            format!("unsupported version {version}"),
        ));
    }
    let sha256 = field(obj, "problem_sha256", "$")?
        .as_str()
        .ok_or_else(|| schema_err("problem_sha256", "expected a string"))?
        .to_string();
    let spec = problem_from_value(field(obj, "problem", "$")?, None)?;
    let entries = as_array(field(obj, "reports", "$")?, "reports")?;
    let mut reports = Vec::with_capacity(entries.len());
    for (i, e) in entries.iter().enumerate() {
        let rep: SolveReport = serde_json::from_value(e.clone())
            .map_err(|err| schema_err(format!("reports[{i}]"), err.to_string()))?;
        reports.push(rep);
    }
    Ok(ReportDoc {
        sha256,
        spec,
        reports,
        root,
    })
}

// ---------------------------------------------------------------------------
// Verification of stored reports.

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn push(results: &mut Vec<CheckResult>, name: &str, pass: bool, detail: String) {
    results.push(CheckResult {
        name: name.into(),
        pass,
        detail,
    });
}

/// Re-derive the stored quantities and compare. `checks` filters by name
/// (empty = all): "hash", "gates", "table", "kkt", "mass".
pub fn verify_report(doc: &ReportDoc, checks: &[String]) -> Vec<CheckResult> {
    let want = |name: &str| checks.is_empty() || checks.iter().any(|c| c == name);
    let mut out = Vec::new();
    let spec = &doc.spec;

    if want("hash") {
        let canonical = serialize_problem(spec);
        let sha = sha256_hex(canonical.as_bytes());
        push(
            &mut out,
            "hash",
            sha == doc.sha256,
            if sha == doc.sha256 {
                "problem echo matches its hash".into()
            } else {
                format!("stored {} recomputed {sha}", doc.sha256)
            },
        );
    }
    if want("gates") {
        match precheck(spec) {
            Ok(_) => push(&mut out, "gates", true, "all mode hypotheses hold".into()),
            Err(e) => push(&mut out, "gates", false, e.to_string()),
        }
    }
    for (idx, rep) in doc.reports.iter().enumerate() {
        let tag = format!("reports[{idx}]");
        let radial_semantics = rep.mode == "isotropic" || rep.mode == "ma_circle";
        if want("table") {
            // table rows were rendered from these exact fields; reconcile the
            // stated residual with the row maximum for KKT-mode reports
            let nu_rows = table_datum(spec);
            let kkt_max = (0..spec.nu.len())
                .map(|i| (nu_rows[i] - rep.lambda * rep.lp_surface[i]).abs())
                .fold(0.0_f64, f64::max);
            let ok = if radial_semantics {
                true
            } else {
                (kkt_max - rep.residual_inf).abs() <= 1e-9 * (1.0 + rep.residual_inf)
            };
            push(
                &mut out,
                "table",
                ok,
                format!("{tag}: row residual max {kkt_max:.3e} vs stated {:.3e}", rep.residual_inf),
            );
        }
        if want("kkt") {
            match crate::sphere::wulff_shape(&spec.dirs, &rep.h) {
                Ok(body) => {
                    let areas = measures::facet_weighted_areas(&spec.weight, &body);
                    let lp = measures::lp_surface_from_areas(&body.support, &areas, rep.p);
                    let worst = lp
                        .iter()
                        .zip(&rep.lp_surface)
                        .map(|(a, b)| (a - b).abs() / (1.0 + b.abs()))
                        .fold(0.0_f64, f64::max);
                    let ok = worst <= 1e-9;
                    push(
                        &mut out,
                        "kkt",
                        ok,
                        format!("{tag}: realized measure re-derivation differs by {worst:.3e}"),
                    );
                }
                Err(e) => push(&mut out, "kkt", false, format!("{tag}: {e}")),
            }
        }
        if want("mass") {
            match rep.mass_target {
                Some(a) => {
                    let err = (rep.mass - a).abs();
                    let ok = (err - rep.mass_error).abs() <= 1e-12 * (1.0 + err)
                        && (rep.status != crate::solvers::SolveStatus::Converged
                            || err <= spec.options.mass_tol);
                    push(
                        &mut out,
                        "mass",
                        ok,
                        format!("{tag}: |mass - target| = {err:.3e}"),
                    );
                }
                None => push(&mut out, "mass", true, format!("{tag}: no mass pin")),
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Geometry emitters.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmitFormat {
    Obj,
    Svg,
    Csv,
}

impl EmitFormat {
    pub fn from_name(s: &str) -> Option<EmitFormat> {
        match s {
            "obj" => Some(EmitFormat::Obj),
            "svg" => Some(EmitFormat::Svg),
            "csv" => Some(EmitFormat::Csv),
            _ => None,
        }
    }
    pub fn extension(&self) -> &'static str {
        match self {
            EmitFormat::Obj => "obj",
            EmitFormat::Svg => "svg",
            EmitFormat::Csv => "csv",
        }
    }
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Vertices of a polygon in cyclic order; the origin is interior so the
/// angular order around it is the boundary order.
fn cyclic_vertices_2d(poly: &Polytope) -> Vec<V3> {
    let mut vs = poly.vertices.clone();
    vs.sort_by(|a, b| {
        a[1].atan2(a[0])
            .partial_cmp(&b[1].atan2(b[0]))
            .expect("finite vertex angles")
    });
    vs
}

/// Order one facet's vertices cyclically around its outward normal.
fn facet_cycle(poly: &Polytope, facet: usize) -> Vec<usize> {
    let f = &poly.facets[facet];
    let n = f.normal;
    let mut e1 = if n[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    // Gram-Schmidt against the normal.
    let d = e1[0] * n[0] + e1[1] * n[1] + e1[2] * n[2];
    for k in 0..3 {
        e1[k] -= d * n[k];
    }
    let l = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    for k in 0..3 {
        e1[k] /= l;
    }
    let e2 = [
        n[1] * e1[2] - n[2] * e1[1],
        n[2] * e1[0] - n[0] * e1[2],
        n[0] * e1[1] - n[1] * e1[0],
    ];
    let m = f.vertex_ids.len() as f64;
    let mut c = [0.0_f64; 3];
    for &vid in &f.vertex_ids {
        for k in 0..3 {
            c[k] += poly.vertices[vid][k] / m;
        }
    }
    let mut ids = f.vertex_ids.clone();
    ids.sort_by(|&a, &b| {
        let ang = |vid: usize| {
            let v = poly.vertices[vid];
            let r = [v[0] - c[0], v[1] - c[1], v[2] - c[2]];
            let x = r[0] * e1[0] + r[1] * e1[1] + r[2] * e1[2];
            let y = r[0] * e2[0] + r[1] * e2[1] + r[2] * e2[2];
            y.atan2(x)
        };
        ang(a).partial_cmp(&ang(b)).expect("finite facet angles")
    });
    ids
}

/// Render the polytope in the requested format. OBJ needs dimension 3, SVG
/// needs dimension 2, CSV accepts both.
pub fn emit_geometry(poly: &Polytope, format: EmitFormat) -> Result<String, IoError> {
    match (format, poly.dim) {
        (EmitFormat::Obj, 3) => {
            let mut s = String::from("# polytope facets\n");
            for v in &poly.vertices {
                s.push_str(&format!("v {} {} {}\n", fmt17(v[0]), fmt17(v[1]), fmt17(v[2])));
            }
            for fi in 0..poly.facets.len() {
                let cycle = facet_cycle(poly, fi);
                s.push('f');
                for vid in cycle {
                    s.push_str(&format!(" {}", vid + 1));
                }
                s.push('\n');
            }
            Ok(s)
        }
        (EmitFormat::Svg, 2) => {
            let vs = cyclic_vertices_2d(poly);
            let (mut xmin, mut xmax, mut ymin, mut ymax) =
                (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
            for v in &vs {
                xmin = xmin.min(v[0]);
                xmax = xmax.max(v[0]);
                ymin = ymin.min(v[1]);
                ymax = ymax.max(v[1]);
            }
            let span = (xmax - xmin).max(ymax - ymin).max(1e-300);
            let sc = 0.9 / span;
            let ox = 0.05 + 0.5 * (0.9 - (xmax - xmin) * sc);
            let oy = 0.05 + 0.5 * (0.9 - (ymax - ymin) * sc);
            // y flipped: SVG grows downward
            let map = |v: &V3| {
                (
                    ox + (v[0] - xmin) * sc,
                    1.0 - (oy + (v[1] - ymin) * sc),
                )
            };
            let mut d = String::new();
            for (i, v) in vs.iter().enumerate() {
                let (x, y) = map(v);
                d.push_str(&format!("{}{:.8} {:.8}", if i == 0 { "M" } else { " L" }, x, y));
            }
            d.push_str(" Z");
            Ok(format!(
                concat!(
                    "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 1 1\" ",
                    "width=\"400\" height=\"400\">\n",
                    "<path d=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"0.004\"/>\n",
                    "</svg>\n"
                ),
                d
            ))
        }
        (EmitFormat::Csv, 2) => {
            let mut s = String::from("x,y\n");
            for v in cyclic_vertices_2d(poly) {
                s.push_str(&format!("{},{}\n", fmt17(v[0]), fmt17(v[1])));
            }
            Ok(s)
        }
        (EmitFormat::Csv, 3) => {
            let mut s = String::from("facet,x,y,z\n");
            for fi in 0..poly.facets.len() {
                for vid in facet_cycle(poly, fi) {
                    let v = poly.vertices[vid];
                    s.push_str(&format!(
                        "{},{},{},{}\n",
                        fi,
                        fmt17(v[0]),
                        fmt17(v[1]),
                        fmt17(v[2])
                    ));
                }
            }
            Ok(s)
        }
        (f, d) => Err(schema_err(
            "emit",
            format!("format {f:?} does not apply to dimension {d}"),
        )),
    }
}

/// Parse vertices back out of an emitted CSV (either layout).
pub fn csv_vertices(text: &str) -> Result<Vec<V3>, IoError> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if lineno == 0 && cols.iter().any(|c| c.parse::<f64>().is_err()) {
            continue;
        }
        let vals: Result<Vec<f64>, _> = cols.iter().map(|c| c.parse::<f64>()).collect();
        let vals = vals.map_err(|_| {
            schema_err(format!("csv line {}", lineno + 1), "bad number literal")
        })?;
        let v = match vals.len() {
            2 => [vals[0], vals[1], 0.0],
            4 => [vals[1], vals[2], vals[3]],
            n => {
                return Err(schema_err(
                    format!("csv line {}", lineno + 1),
                    format!("expected 2 or 4 columns, got {n}"),
                ))
            }
        };
        out.push(v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::{solve_pinned, SolveStatus};
    use crate::sphere::wulff_shape;

    fn sample_problem_text() -> String {
        r#"{
            "schema_version": 1,
            "dimension": 2,
            "weight": {"kind": "gaussian"},
            "p": 1.0,
            "nu": {"isotropic": {"c": 0.05, "count": 16}},
            "mode": {"kind": "pinned", "a": 0.5},
            "seed": 3
        }"#
        .to_string()
    }

    #[test]
    fn canonical_roundtrip_is_identity() {
        let loaded = parse_problem_str(&sample_problem_text()).unwrap();
        let again = parse_problem_str(&loaded.canonical).unwrap();
        assert_eq!(loaded.canonical, again.canonical);
        assert_eq!(loaded.sha256, again.sha256);
        assert_eq!(loaded.spec.options.seed, 3);
        assert!(loaded.spec.even);
        assert_eq!(loaded.precheck.mode, "pinned");
    }

    #[test]
    fn seventeen_digit_floats() {
        let loaded = parse_problem_str(&sample_problem_text()).unwrap();
        assert!(
            loaded.canonical.contains("\"a\": 5.0000000000000000e-1"),
            "{}",
            loaded.canonical
        );
        assert!(loaded.canonical.contains("\"p\": 1.0000000000000000e0"));
        // the isotropic block expands to explicit rows with weight c * 2pi/N
        let cell = 0.05 * 2.0 * std::f64::consts::PI / 16.0;
        assert!(loaded.canonical.contains(&format!("{cell:.16e}")));
        // counts keep their integer spelling
        assert!(loaded.canonical.contains("\"max_outer\": 10000"));
    }

    #[test]
    fn bad_rows_are_addressed() {
        let text = r#"{
            "schema_version": 1,
            "dimension": 2,
            "weight": {"kind": "lebesgue"},
            "p": 1.0,
            "nu": {"rows": [[1.0, 0.0, 2.0], [-1.0, 0.0, 2.0], [0.0, 1.0, -2.0], [0.0, -1.0, 2.0]]},
            "mode": {"kind": "pinned", "a": 4.0}
        }"#;
        match parse_problem_str(text) {
            Err(IoError::Schema { path, detail }) => {
                assert_eq!(path, "nu.rows[2]");
                assert!(detail.contains("positive"), "{detail}");
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn precondition_failures_surface_as_refusals() {
        let text = r#"{
            "schema_version": 1,
            "dimension": 2,
            "weight": {"kind": "lebesgue"},
            "p": 0.0,
            "nu": {"rows": [[1.0, 0.0, 3.0], [-1.0, 0.0, 3.0], [0.0, 1.0, 1.0], [0.0, -1.0, 1.0]]},
            "mode": {"kind": "entropy", "a": 4.0}
        }"#;
        match parse_problem_str(text) {
            Err(IoError::Solve(SolveError::Refused { hypothesis, .. })) => {
                assert!(hypothesis.contains("subspace"), "{hypothesis}");
            }
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn report_render_and_verify() {
        let text = r#"{
            "schema_version": 1,
            "dimension": 2,
            "weight": {"kind": "lebesgue"},
            "p": 1.0,
            "nu": {"rows": [[1.0, 0.0, 2.0], [-1.0, 0.0, 2.0], [0.0, 1.0, 2.0], [0.0, -1.0, 2.0]]},
            "mode": {"kind": "pinned", "a": 4.0}
        }"#;
        let loaded = parse_problem_str(text).unwrap();
        let rep = solve_pinned(&loaded.spec).unwrap();
        assert_eq!(rep.status, SolveStatus::Converged);
        let doc_text = render_report(&loaded, &[rep], &[]);
        let loaded2 = parse_problem_str(text).unwrap();
        let rep2 = solve_pinned(&loaded2.spec).unwrap();
        let doc_text2 = render_report(&loaded2, &[rep2], &[]);
        assert_eq!(doc_text, doc_text2, "reports must be byte-identical");
        let doc = parse_report(&doc_text).unwrap();
        assert_eq!(doc.sha256, loaded.sha256);
        assert_eq!(doc.reports.len(), 1);
        let results = verify_report(&doc, &[]);
        assert!(!results.is_empty());
        for r in &results {
            assert!(r.pass, "{}: {}", r.name, r.detail);
        }
    }

    #[test]
    fn square_svg_and_csv_roundtrip() {
        let dirs = DirectionSet::new(
            2,
            vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0]],
        )
        .unwrap();
        let poly = wulff_shape(&dirs, &[1.0; 4]).unwrap();
        let svg = emit_geometry(&poly, EmitFormat::Svg).unwrap();
        assert_eq!(svg.matches(" L").count(), 3); // M + 3 L + Z = 4 vertices
        assert!(svg.contains("viewBox=\"0 0 1 1\""));

        let csv = emit_geometry(&poly, EmitFormat::Csv).unwrap();
        assert_eq!(csv.lines().count(), 5); // header + 4 vertices
        let verts = csv_vertices(&csv).unwrap();
        assert_eq!(verts.len(), 4);
        for i in 0..dirs.len() {
            let u = dirs.dir(i);
            let h = verts
                .iter()
                .map(|v| v[0] * u[0] + v[1] * u[1])
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((h - poly.support[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn cube_obj_layout() {
        let dirs = DirectionSet::new(
            3,
            vec![
                [1.0, 0.0, 0.0],
                [-1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, -1.0, 0.0],
                [0.0, 0.0, 1.0],
                [0.0, 0.0, -1.0],
            ],
        )
        .unwrap();
        let poly = wulff_shape(&dirs, &[1.0; 6]).unwrap();
        let obj = emit_geometry(&poly, EmitFormat::Obj).unwrap();
        assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 8);
        let faces: Vec<&str> = obj.lines().filter(|l| l.starts_with("f ")).collect();
        assert_eq!(faces.len(), 6);
        for f in faces {
            assert_eq!(f.split_whitespace().count(), 5, "{f}"); // quad
        }
        let csv = emit_geometry(&poly, EmitFormat::Csv).unwrap();
        let verts = csv_vertices(&csv).unwrap();
        assert_eq!(verts.len(), 24); // 6 facets x 4 corners
        assert!(emit_geometry(&poly, EmitFormat::Svg).is_err());
    }
}
