//! The `expinv` command line.
//!
//! Exit codes: 0 on success, 1 when a certification or check fails, 2 on
//! usage, parse or domain errors. Data goes to stdout (or `--out`),
//! diagnostics to stderr.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bernoulli::BernoulliTable;
use crate::em::{em_residual, DerivFamily, TrapezoidSpec};
use crate::error::{Error, Result};
use crate::expsum::{build_quadrature, certify, select_params, ExpSumQuadrature};
use crate::lapdemo::{solve_laplacian, Graph, GraphKind};
use crate::matfun::{
    apply_inverse_expsum, default_per_term_tol, jacobi_eigh, sandwich_from_spectrum,
    SymmetricMatrix,
};

pub const DEFAULT_GRID: usize = 10_000;
pub const DEFAULT_SEED: u64 = 42;

/// Largest Euler-Maclaurin defect `em-check` accepts.
pub const EM_CHECK_TOL: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(
    name = "expinv",
    version,
    about = "Sparse exponential sums for 1/x and matrix inversion via exponential actions"
)]
pub struct Cli {
    /// Worker threads for grid certification and exponential actions
    /// (default: available parallelism). Output does not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the nodes t_j and weights w_j. CSV columns `j,t,w`; JSON object
    /// `{eps, delta, N, h, A, B, K, terms: [{j, t, w}]}`.
    Gen {
        #[arg(long, value_parser = unit_interval)]
        eps: f64,
        #[arg(long, value_parser = unit_interval)]
        delta: f64,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grid-check |x S(x) - 1| <= eps on [delta, 1]. Prints
    /// `PASS|FAIL max_rel_err=<v> argmax_x=<v> K=<k>`; exit 1 on FAIL.
    Certify {
        #[arg(long, value_parser = unit_interval)]
        eps: f64,
        #[arg(long, value_parser = unit_interval)]
        delta: f64,
        /// Number of log-uniform grid points on [delta, 1].
        #[arg(long, default_value_t = DEFAULT_GRID, value_parser = grid_size)]
        grid: usize,
    },
    /// Certify every (eps, delta) pair. CSV columns
    /// `eps,delta,N,h,A,B,K,max_rel_err`.
    Sweep {
        #[arg(long, value_delimiter = ',', required = true, value_parser = unit_interval)]
        eps_list: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true, value_parser = unit_interval)]
        delta_list: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_GRID, value_parser = grid_size)]
        grid: usize,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact Bernoulli numbers b_0..b_K. CSV columns `k,num,den,value`.
    Bernoulli {
        #[arg(long)]
        kmax: usize,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Euler-Maclaurin exactness on monomials s^d, d <= 2N - 1, N = 1..3.
    /// CSV columns `degree,N,h,defect` (defect maximised over [0,1] and [0,2]).
    EmCheck {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Approximate A^{-1} v using only exponential actions. The matrix file
    /// holds whitespace-separated rows; the vector file whitespace-separated
    /// values. Output: one value per line after a `#` header.
    Apply {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        vector: PathBuf,
        #[arg(long, value_parser = unit_interval)]
        eps: f64,
        #[arg(long, value_parser = unit_interval, conflicts_with = "auto_delta",
              required_unless_present = "auto_delta")]
        delta: Option<f64>,
        /// Use the smallest eigenvalue from the oracle eigendecomposition.
        #[arg(long)]
        auto_delta: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve L x = b on a graph using heat-kernel actions.
    /// `--graph path:N|cycle:N|grid:RxC|edgelist:PATH`,
    /// `--b FILE|unit:i,j|random`. With `--report json` stdout carries the
    /// report only and the solution goes to `--out` when given.
    Solve {
        #[arg(long)]
        graph: String,
        #[arg(long)]
        b: String,
        #[arg(long, value_parser = unit_interval)]
        eps: f64,
        #[arg(long, value_enum)]
        report: Option<ReportFormat>,
        /// Seed for `--b random`.
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn unit_interval(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is outside (0, 1]"))
    }
}

fn grid_size(s: &str) -> std::result::Result<usize, String> {
    let v: usize = s.parse().map_err(|e| format!("{e}"))?;
    if v >= 2 {
        Ok(v)
    } else {
        Err("grid must be at least 2".into())
    }
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(stderr, "{rendered}");
            } else {
                let _ = write!(stdout, "{rendered}");
            }
            return code;
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        pool = pool.num_threads(t.max(1));
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(stderr, "error: cannot start worker threads: {e}");
            return 2;
        }
    };
    let mut out_buf: Vec<u8> = Vec::new();
    let mut err_buf: Vec<u8> = Vec::new();
    let result = pool.install(|| dispatch(cli.command, &mut out_buf, &mut err_buf));
    let _ = stdout.write_all(&out_buf);
    let _ = stderr.write_all(&err_buf);
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            2
        }
    }
}

fn emit(out: &Option<PathBuf>, stdout: &mut dyn Write, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| Error::Format(format!("cannot write {}: {e}", path.display()))),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Error::Format(format!("cannot write output: {e}"))),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::Format(format!("cannot read {}: {e}", path.display())))
}

fn dispatch(cmd: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Gen {
            eps,
            delta,
            format,
            out,
        } => {
            let quad = build_quadrature(select_params(eps, delta)?);
            let text = match format {
                Format::Csv => quad.to_csv(),
                Format::Json => quad.to_json() + "\n",
            };
            emit(&out, stdout, &text)?;
            Ok(0)
        }
        Command::Certify { eps, delta, grid } => {
            let quad = build_quadrature(select_params(eps, delta)?);
            let cert = certify(&quad, grid)?;
            let _ = writeln!(
                stderr,
                "note: checked on {grid} log-uniform points of [delta, 1]; not an interval proof"
            );
            let line = format!(
                "{} max_rel_err={:?} argmax_x={:?} K={}\n",
                if cert.pass { "PASS" } else { "FAIL" },
                cert.max_rel_error,
                cert.argmax_x,
                quad.len()
            );
            emit(&None, stdout, &line)?;
            Ok(if cert.pass { 0 } else { 1 })
        }
        Command::Sweep {
            eps_list,
            delta_list,
            grid,
            format,
            out,
        } => {
            let rows = sweep(&eps_list, &delta_list, grid)?;
            let all_pass = rows.iter().all(|r| r.max_rel_err <= r.eps);
            let text = match format {
                Format::Csv => {
                    let mut s = String::from("eps,delta,N,h,A,B,K,max_rel_err\n");
                    for r in &rows {
                        s.push_str(&format!(
                            "{:?},{:?},{},{:?},{},{},{},{:?}\n",
                            r.eps, r.delta, r.order, r.h, r.lower, r.upper, r.count, r.max_rel_err
                        ));
                    }
                    s
                }
                Format::Json => serde_json::to_string(&rows).expect("rows serialize") + "\n",
            };
            emit(&out, stdout, &text)?;
            Ok(if all_pass { 0 } else { 1 })
        }
        Command::Bernoulli { kmax, format, out } => {
            let table = BernoulliTable::new(kmax)?;
            let text = bernoulli_output(&table, format)?;
            emit(&out, stdout, &text)?;
            Ok(0)
        }
        Command::EmCheck { out } => {
            let rows = em_check()?;
            let mut text = String::from("degree,N,h,defect\n");
            for r in &rows {
                text.push_str(&format!("{},{},{:?},{:?}\n", r.0, r.1, r.2, r.3));
            }
            emit(&out, stdout, &text)?;
            let ok = rows.iter().all(|r| r.3 <= EM_CHECK_TOL);
            Ok(if ok { 0 } else { 1 })
        }
        Command::Apply {
            matrix,
            vector,
            eps,
            delta,
            auto_delta,
            out,
        } => {
            let a = SymmetricMatrix::parse(&read(&matrix)?)?;
            let v = parse_vector(&read(&vector)?)?;
            if v.len() != a.n() {
                return Err(Error::Dimension {
                    expected: a.n(),
                    found: v.len(),
                });
            }
            let spectral = jacobi_eigh(&a)?;
            let delta = match (delta, auto_delta) {
                (Some(d), _) => d,
                (None, _) => {
                    let lmin = spectral.eigenvalues()[0];
                    let _ = writeln!(stderr, "note: delta taken from oracle eigenvalue {lmin:?}");
                    lmin.min(1.0)
                }
            };
            let quad = build_quadrature(select_params(eps, delta)?);
            let report = sandwich_from_spectrum(&spectral, &quad)?;
            let y = apply_inverse_expsum(&a, &quad, &v, default_per_term_tol(&quad))?;
            let mut text = format!(
                "# eps={:?}, delta={:?}, K={}, max_ratio_dev={:?}\n",
                eps,
                delta,
                quad.len(),
                report.max_deviation()
            );
            for x in y {
                text.push_str(&format!("{x:?}\n"));
            }
            emit(&out, stdout, &text)?;
            Ok(0)
        }
        Command::Solve {
            graph,
            b,
            eps,
            report,
            seed,
            out,
        } => {
            let g = parse_graph(&graph)?;
            let rhs = parse_rhs(&b, g.n(), seed)?;
            let (x, rep) = solve_laplacian(&g, &rhs, eps)?;
            let mut vec_text = String::new();
            for v in &x {
                vec_text.push_str(&format!("{v:?}\n"));
            }
            match report {
                Some(ReportFormat::Json) => {
                    if out.is_some() {
                        emit(&out, stdout, &vec_text)?;
                    }
                    let json = serde_json::to_string(&rep).expect("report serializes");
                    emit(&None, stdout, &(json + "\n"))?;
                }
                None => {
                    let header = format!(
                        "# eps={:?}, delta_used={:?}, K={}, matvec_count={}, rel_error_vs_direct={:?}, residual_norm={:?}\n",
                        rep.eps, rep.delta_used, rep.k, rep.matvec_count, rep.rel_error_vs_direct, rep.residual_norm
                    );
                    emit(&out, stdout, &(header + &vec_text))?;
                }
            }
            Ok(0)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub delta: f64,
    #[serde(rename = "N")]
    pub order: u32,
    pub h: f64,
    #[serde(rename = "A")]
    pub lower: i64,
    #[serde(rename = "B")]
    pub upper: i64,
    #[serde(rename = "K")]
    pub count: usize,
    pub max_rel_err: f64,
}

/// One certificate per `(eps, delta)` pair, eps-major.
pub fn sweep(eps_list: &[f64], delta_list: &[f64], grid: usize) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(eps_list.len() * delta_list.len());
    for &eps in eps_list {
        for &delta in delta_list {
            let params = select_params(eps, delta)?;
            let quad = build_quadrature(params);
            let cert = certify(&quad, grid)?;
            rows.push(SweepRow {
                eps,
                delta,
                order: params.order,
                h: params.h,
                lower: params.lower,
                upper: params.upper,
                count: params.count(),
                max_rel_err: cert.max_rel_error,
            });
        }
    }
    Ok(rows)
}

#[derive(Serialize)]
struct BernoulliRow {
    k: usize,
    num: String,
    den: String,
    value: f64,
}

fn bernoulli_output(table: &BernoulliTable, format: Format) -> Result<String> {
    let rows: Vec<BernoulliRow> = (0..=table.kmax())
        .map(|k| {
            let b = table.get(k)?;
            Ok(BernoulliRow {
                k,
                num: b.numer().to_string(),
                den: b.denom().to_string(),
                value: table.value_f64(k)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(match format {
        Format::Csv => {
            let mut s = String::from("k,num,den,value\n");
            for r in &rows {
                s.push_str(&format!("{},{},{},{:?}\n", r.k, r.num, r.den, r.value));
            }
            s
        }
        Format::Json => serde_json::to_string(&rows).expect("rows serialize") + "\n",
    })
}

/// `(degree, N, h, defect)` rows of the monomial exactness suite.
pub fn em_check() -> Result<Vec<(u32, usize, f64, f64)>> {
    let table = BernoulliTable::new(6)?;
    let mut rows = Vec::new();
    for order in 1..=3usize {
        for degree in 0..(2 * order as u32) {
            let g = DerivFamily::monomial(degree, 2 * order);
            for h in [1.0, 0.5] {
                let mut worst = 0.0f64;
                for b in [1.0, 2.0] {
                    let spec = TrapezoidSpec::new(0.0, b, h)?;
                    worst = worst.max(em_residual(&g, &spec, order, &table)?.defect);
                }
                rows.push((degree, order, h, worst));
            }
        }
    }
    Ok(rows)
}

pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split_whitespace() {
            out.push(tok.parse::<f64>().map_err(|e| Error::Parse {
                line: lineno + 1,
                message: format!("{tok:?}: {e}"),
            })?);
        }
    }
    Ok(out)
}

/// `path:N`, `cycle:N`, `grid:RxC` or `edgelist:PATH`.
pub fn parse_graph(spec: &str) -> Result<Graph> {
    let (kind, arg) = spec
        .split_once(':')
        .ok_or_else(|| Error::Format(format!("graph spec {spec:?} needs the form kind:arg")))?;
    let size = |s: &str| {
        s.parse::<usize>()
            .map_err(|e| Error::Format(format!("graph size {s:?}: {e}")))
    };
    match kind {
        "path" => Graph::generate(GraphKind::Path(size(arg)?)),
        "cycle" => Graph::generate(GraphKind::Cycle(size(arg)?)),
        "grid" => {
            let (r, c) = arg
                .split_once('x')
                .ok_or_else(|| Error::Format(format!("grid size {arg:?} needs RxC")))?;
            Graph::generate(GraphKind::Grid(size(r)?, size(c)?))
        }
        "edgelist" => Graph::parse_edgelist(&read(Path::new(arg))?),
        other => Err(Error::Format(format!("unknown graph kind {other:?}"))),
    }
}

/// `unit:i,j` gives `e_i - e_j`; `random` a seeded uniform vector; anything
/// else is read as a vector file.
pub fn parse_rhs(spec: &str, n: usize, seed: u64) -> Result<Vec<f64>> {
    if let Some(arg) = spec.strip_prefix("unit:") {
        let (i, j) = arg
            .split_once(',')
            .ok_or_else(|| Error::Format(format!("unit spec {arg:?} needs i,j")))?;
        let idx = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| Error::Format(format!("index {s:?}: {e}")))
        };
        let (i, j) = (idx(i)?, idx(j)?);
        for k in [i, j] {
            if k >= n {
                return Err(Error::Index {
                    what: "vertex",
                    index: k,
                    max: n - 1,
                });
            }
        }
        let mut b = vec![0.0; n];
        b[i] += 1.0;
        b[j] -= 1.0;
        return Ok(b);
    }
    if spec == "random" {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        return Ok((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
    }
    let b = parse_vector(&read(Path::new(spec))?)?;
    if b.len() != n {
        return Err(Error::Dimension {
            expected: n,
            found: b.len(),
        });
    }
    Ok(b)
}

/// Loads a quadrature written by `gen --format json`.
pub fn load_quadrature(path: &Path) -> Result<ExpSumQuadrature> {
    ExpSumQuadrature::from_json(&read(path)?)
}
