//! Command-line front end: solve problem files, classify isotropic data,
//! run the periodic grid solver, verify stored reports, emit geometry.
//!
//! Exit codes are a stable contract: 0 converged, 2 precondition refusal,
//! 3 non-convergence (or failed verification), 4 I/O or schema error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use minkw::io::{
    self, emit_geometry, parse_problem, parse_report, render_report, serialize_problem,
    sha256_hex, verify_report, EmitFormat, IoError, LoadedProblem,
};
use minkw::solvers::{
    precheck, solve_problem, Mode, ProblemSpec, SolveError, SolveReport, SolveStatus,
    SolverOptions,
};
use minkw::sphere::DirectionSet;
use minkw::weights::Weight;

#[derive(Parser)]
#[command(name = "minkw", version, about = "Weighted Minkowski problem solver")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve a problem file and write its report JSON.
    Solve {
        problem: PathBuf,
        /// Directory for the report (default: next to the problem file).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the seed stored in the file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Classify ball solutions for an isotropic datum given on the command line.
    Isotropic {
        /// gaussian | lebesgue | cauchy:Q,B
        #[arg(long)]
        weight: String,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long)]
        p: f64,
        /// Constant datum density c.
        #[arg(long)]
        c: f64,
        /// Number of directions for the report tables.
        #[arg(long, default_value_t = 64)]
        count: usize,
        /// Report path (default: print to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a periodic curvature equation problem file.
    Ma2d {
        problem: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Re-check a stored report, or just the gates of a problem file.
    Verify {
        file: PathBuf,
        /// Comma-separated subset of: hash, gates, table, kkt, mass.
        #[arg(long, value_delimiter = ',')]
        checks: Vec<String>,
    },
    /// Extract a solved body from a report as geometry.
    Emit {
        report: PathBuf,
        /// svg | obj | csv
        #[arg(long)]
        format: String,
        /// Which report entry to extract.
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Output path (default: report stem + format extension).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.cmd {
        Cmd::Solve { problem, out, seed } => cmd_solve(&problem, out.as_deref(), seed, false),
        Cmd::Ma2d { problem, out, seed } => cmd_solve(&problem, out.as_deref(), seed, true),
        Cmd::Isotropic {
            weight,
            dim,
            p,
            c,
            count,
            out,
        } => cmd_isotropic(&weight, dim, p, c, count, out.as_deref()),
        Cmd::Verify { file, checks } => cmd_verify(&file, &checks),
        Cmd::Emit {
            report,
            format,
            index,
            out,
        } => cmd_emit(&report, &format, index, out.as_deref()),
    };
    ExitCode::from(code)
}

fn io_error_code(e: &IoError) -> u8 {
    match e {
        IoError::Solve(SolveError::Refused { .. }) => 2,
        _ => 4,
    }
}

fn solve_error_code(e: &SolveError) -> u8 {
    match e {
        SolveError::Refused { .. } => 2,
        _ => 4,
    }
}

fn status_word(s: &SolveStatus) -> String {
    match s {
        SolveStatus::Converged => "converged".into(),
        SolveStatus::MaxIterations => "max-iterations".into(),
        SolveStatus::Stalled { detail } => format!("stalled ({detail})"),
        SolveStatus::NoPositiveBracket => "no-positive-bracket".into(),
        SolveStatus::HomotopyStuck { t_reached } => {
            format!("homotopy-stuck (t={t_reached:.3})")
        }
        SolveStatus::BranchMerge => "branch-merge".into(),
    }
}

/// 0 when every entry converged (a merged dual branch counts), else 3.
fn reports_code(reports: &[SolveReport]) -> u8 {
    let ok = reports
        .iter()
        .all(|r| matches!(r.status, SolveStatus::Converged | SolveStatus::BranchMerge));
    if ok {
        0
    } else {
        3
    }
}

/// MINK_THREADS caps the thread count requested by the file.
fn apply_thread_cap(options: &mut SolverOptions) {
    if let Ok(v) = std::env::var("MINK_THREADS") {
        if let Ok(cap) = v.trim().parse::<usize>() {
            options.threads = options.threads.min(cap.max(1));
        }
    }
}

fn run_and_write(
    mut loaded: LoadedProblem,
    problem_path: &Path,
    out_dir: Option<&Path>,
    seed: Option<u64>,
) -> u8 {
    if let Some(s) = seed {
        loaded.spec.options.seed = s;
        // the report echoes the problem it actually solved
        loaded.canonical = serialize_problem(&loaded.spec);
        loaded.sha256 = sha256_hex(loaded.canonical.as_bytes());
    }
    apply_thread_cap(&mut loaded.spec.options);
    let reports = match solve_problem(&loaded.spec) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return solve_error_code(&e);
        }
    };
    let stem = problem_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "problem".into());
    let dir = out_dir
        .map(Path::to_path_buf)
        .or_else(|| problem_path.parent().map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("."));
    let report_path = dir.join(format!("{stem}.report.json"));
    let text = render_report(&loaded, &reports, &[]);
    if let Err(e) = std::fs::create_dir_all(&dir).and_then(|_| std::fs::write(&report_path, text))
    {
        eprintln!("error: cannot write {}: {e}", report_path.display());
        return 4;
    }
    for r in &reports {
        println!(
            "{}: status={} residual={:.3e} mass={:.12e} lambda={:.12e}",
            r.mode,
            status_word(&r.status),
            r.residual_inf,
            r.mass,
            r.lambda
        );
    }
    println!("report: {}", report_path.display());
    reports_code(&reports)
}

fn cmd_solve(problem: &Path, out: Option<&Path>, seed: Option<u64>, want_ma: bool) -> u8 {
    let loaded = match parse_problem(problem) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: {e}");
            return io_error_code(&e);
        }
    };
    let is_ma = matches!(loaded.spec.mode, Mode::MaCircle { .. });
    if want_ma != is_ma {
        let (got, sub) = if is_ma {
            ("a grid-equation mode block", "ma2d")
        } else {
            ("a measure mode block", "solve")
        };
        eprintln!("error: mode: this file holds {got}; use the {sub} subcommand");
        return 4;
    }
    run_and_write(loaded, problem, out, seed)
}

fn parse_weight_flag(s: &str, dim: usize) -> Result<Weight, String> {
    if s == "gaussian" {
        return Ok(Weight::gaussian(dim));
    }
    if s == "lebesgue" {
        return Ok(Weight::lebesgue(dim));
    }
    if let Some(rest) = s.strip_prefix("cauchy:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() != 2 {
            return Err("cauchy takes two parameters, e.g. cauchy:1.5,1".into());
        }
        let q: f64 = parts[0].trim().parse().map_err(|_| "bad cauchy exponent")?;
        let b: f64 = parts[1].trim().parse().map_err(|_| "bad cauchy scale")?;
        return Weight::cauchy(dim, q, b).map_err(|e| e.to_string());
    }
    Err(format!(
        "unknown weight {s:?}; expected gaussian, lebesgue, or cauchy:Q,B"
    ))
}

fn cmd_isotropic(
    weight_flag: &str,
    dim: usize,
    p: f64,
    c: f64,
    count: usize,
    out: Option<&Path>,
) -> u8 {
    let weight = match parse_weight_flag(weight_flag, dim) {
        Ok(w) => w,
        Err(msg) => {
            eprintln!("error: --weight: {msg}");
            return 4;
        }
    };
    if !(c.is_finite() && c > 0.0) {
        eprintln!("error: --c must be positive");
        return 4;
    }
    if count < 4 {
        eprintln!("error: --count must be at least 4");
        return 4;
    }
    let dirs = match dim {
        2 => DirectionSet::uniform_circle(count),
        3 => DirectionSet::fibonacci_symmetric(count),
        _ => {
            eprintln!("error: --dim must be 2 or 3");
            return 4;
        }
    };
    let nu: Vec<f64> = dirs.quad_weights().iter().map(|w| c * w).collect();
    let mut spec = ProblemSpec {
        weight,
        dirs,
        nu,
        p,
        even: true,
        mode: Mode::Isotropic { c },
        options: SolverOptions::default(),
    };
    apply_thread_cap(&mut spec.options);
    let pre = match precheck(&spec) {
        Ok(pre) => pre,
        Err(e) => {
            eprintln!("error: {e}");
            return solve_error_code(&e);
        }
    };
    let canonical = serialize_problem(&spec);
    let sha256 = sha256_hex(canonical.as_bytes());
    let loaded = LoadedProblem {
        spec,
        sha256,
        precheck: pre,
        canonical,
    };
    let reports = match solve_problem(&loaded.spec) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return solve_error_code(&e);
        }
    };
    for r in &reports {
        // ball radius is the common support value
        println!(
            "ball radius {:.12e}: status={} residual={:.3e}",
            r.h[0],
            status_word(&r.status),
            r.residual_inf
        );
    }
    if reports.is_empty() {
        println!("no ball solutions at this density");
    }
    let text = render_report(&loaded, &reports, &[]);
    match out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, text) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return 4;
            }
            println!("report: {}", path.display());
        }
        None => print!("{text}"),
    }
    reports_code(&reports)
}

fn cmd_verify(file: &Path, checks: &[String]) -> u8 {
    let text = match std::fs::read_to_string(file) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", file.display());
            return 4;
        }
    };
    let looks_like_report = serde_json::from_str::<serde_json::Value>(&text)
        .ok()
        .map(|v| v.get("reports").is_some())
        .unwrap_or(false);
    if looks_like_report {
        let doc = match parse_report(&text) {
            Ok(d) => d,
            Err(e) => {
                eprintln!("error: {e}");
                return io_error_code(&e);
            }
        };
        let results = verify_report(&doc, checks);
        let mut all_pass = true;
        for r in &results {
            all_pass &= r.pass;
            println!("{} {}: {}", if r.pass { "pass" } else { "FAIL" }, r.name, r.detail);
        }
        if all_pass {
            0
        } else {
            3
        }
    } else {
        // bare problem file: the parse itself runs every gate
        match io::parse_problem_with_base(&text, file.parent()) {
            Ok(loaded) => {
                println!("pass gates: {} mode hypotheses hold", loaded.precheck.mode);
                for note in &loaded.precheck.notes {
                    println!("note: {note}");
                }
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                io_error_code(&e)
            }
        }
    }
}

fn cmd_emit(report: &Path, format: &str, index: usize, out: Option<&Path>) -> u8 {
    let Some(fmt) = EmitFormat::from_name(format) else {
        eprintln!("error: --format must be svg, obj, or csv");
        return 4;
    };
    let text = match std::fs::read_to_string(report) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", report.display());
            return 4;
        }
    };
    let doc = match parse_report(&text) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {e}");
            return io_error_code(&e);
        }
    };
    let Some(entry) = doc.reports.get(index) else {
        eprintln!(
            "error: --index {index} out of range ({} entries)",
            doc.reports.len()
        );
        return 4;
    };
    let body = match emit_geometry(&entry.body, fmt) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: {e}");
            return 4;
        }
    };
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| {
        let stem = report
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "body".into());
        let stem = stem.strip_suffix(".report").unwrap_or(&stem).to_string();
        report
            .with_file_name(format!("{stem}.{}", fmt.extension()))
    });
    if let Err(e) = std::fs::write(&path, body) {
        eprintln!("error: cannot write {}: {e}", path.display());
        return 4;
    }
    println!("geometry: {}", path.display());
    0
}
