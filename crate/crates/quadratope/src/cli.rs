//! Command-line front end.
//!
//! Nine subcommands tie the pipeline together: `info`, `vertices` and
//! `quadrics` describe a single polytope file; `check-manifold`,
//! `atlas-check` and `collar-check` run the per-polytope verification
//! suites; `lift` and `verify-diffeo` build and certify an equivariant lift
//! between two polytopes; `sample` emits deterministic manifold points.
//!
//! Verifying subcommands print a [`Report`] (schema 1) to stdout or `--out`.
//! Exit status: 0 when all checks pass, 1 when a check fails, 2 on usage or
//! input errors. Runs are byte-deterministic for a fixed seed unless
//! `--timings` is given.

use crate::atlas::{self, ChartId};
use crate::collar::build_collars;
use crate::diffeo::{self, BaseMap};
use crate::error::{Error, Result};
use crate::gale::complement_matrix;
use crate::geometry::Polytope;
use crate::io;
use crate::manifold::{rank_certificate, sample_points, Stratum};
use crate::report::Report;
use crate::tol::Tolerances;
use clap::{ArgGroup, Args, Parser, Subcommand};
use nalgebra::DVector;
use serde_json::{json, Value};
use std::io::{BufRead, BufReader, Write as _};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, ChildStdout, Stdio};
use std::sync::Mutex;

#[derive(Parser, Debug)]
#[command(
    name = "quadratope",
    version,
    about = "Intersection-of-quadrics presentations of moment-angle manifolds"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate a polytope file and summarize it.
    Info(PolytopeArgs),
    /// List the vertices with their active facet sets.
    Vertices(PolytopeArgs),
    /// Emit the quadric system as {"C": [[...]], "c": [...]}.
    Quadrics(PolytopeArgs),
    /// Check membership and submersion rank on sampled manifold points.
    CheckManifold(CheckManifoldArgs),
    /// Check transition round trips, cocycles and Jacobians of the atlas.
    AtlasCheck(AtlasCheckArgs),
    /// Check collar consistency, corner-map round trips and C1 regularity.
    CollarCheck(CollarCheckArgs),
    /// Build a base map between two polytopes and lift it.
    Lift(DiffeoArgs),
    /// Run the full equivariant-diffeomorphism certificate.
    VerifyDiffeo(DiffeoArgs),
    /// Emit deterministic stratified samples of the manifold.
    Sample(SampleArgs),
}

#[derive(Args, Debug)]
pub struct CommonArgs {
    /// Write the JSON output here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; the default of 1 keeps runs byte-reproducible.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Record per-check runtimes in the report (breaks byte determinism).
    #[arg(long)]
    pub timings: bool,
}

#[derive(Args, Debug)]
pub struct PolytopeArgs {
    /// Polytope JSON file.
    pub polytope: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug)]
pub struct CheckManifoldArgs {
    pub polytope: PathBuf,
    /// Stratified manifold samples to draw.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Override the membership tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug)]
pub struct AtlasCheckArgs {
    pub polytope: PathBuf,
    /// Probes per chart overlap.
    #[arg(long, default_value_t = 100)]
    pub probes: usize,
    /// Override the finite-difference step.
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug)]
pub struct CollarCheckArgs {
    pub polytope: PathBuf,
    /// Collar width; the default is a tenth of the minimal clearance.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Round-trip probe points.
    #[arg(long, default_value_t = 100)]
    pub probes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("realization").required(true).args(["affine", "structure", "map"])))]
pub struct DiffeoArgs {
    /// Source polytope file.
    pub source: PathBuf,
    /// Target polytope file.
    pub target: PathBuf,
    /// Solve for the affine equivalence realizing the facet pairing.
    #[arg(long)]
    pub affine: bool,
    /// Use the corner-smoothing self-map; both files must contain the same
    /// polytope.
    #[arg(long)]
    pub structure: bool,
    /// External evaluator command; speaks line-delimited JSON, one request
    /// {"x": [...]} per line answered by {"gx": [...]}.
    #[arg(long)]
    pub map: Option<String>,
    /// External inverse evaluator, same protocol. Required by verify-diffeo
    /// when --map is used.
    #[arg(long)]
    pub inverse_map: Option<String>,
    /// Facet pairing as "i0,i1,...": source facet k maps onto target facet
    /// ik. Identity if omitted.
    #[arg(long)]
    pub pairing: Option<String>,
    /// Manifold probes for the certificate.
    #[arg(long, default_value_t = 100)]
    pub points: usize,
    /// Random sign vectors for the equivariance check.
    #[arg(long, default_value_t = 64)]
    pub sign_vectors: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    pub polytope: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub common: CommonArgs,
}

pub fn main_entry() -> std::process::ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => std::process::ExitCode::SUCCESS,
        Ok(false) => std::process::ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::ExitCode::from(2)
        }
    }
}

/// Dispatch a parsed command line; `Ok(true)` means every check passed.
pub fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Info(a) => cmd_info(a),
        Command::Vertices(a) => cmd_vertices(a),
        Command::Quadrics(a) => cmd_quadrics(a),
        Command::CheckManifold(a) => cmd_check_manifold(a),
        Command::AtlasCheck(a) => cmd_atlas_check(a),
        Command::CollarCheck(a) => cmd_collar_check(a),
        Command::Lift(a) => cmd_lift(a),
        Command::VerifyDiffeo(a) => cmd_verify_diffeo(a),
        Command::Sample(a) => cmd_sample(a),
    }
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, format!("{text}\n"))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn read_input(path: &PathBuf, tols: &Tolerances) -> Result<(Polytope, String, Vec<u8>)> {
    let bytes = std::fs::read(path)?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|e| Error::Parse(format!("{}: not utf-8: {e}", path.display())))?;
    let p = io::parse_polytope(&text, tols)?;
    Ok((p, path.display().to_string(), bytes))
}

fn vector_json(v: &DVector<f64>) -> Value {
    json!(v.as_slice())
}

fn cmd_info(args: PolytopeArgs) -> Result<bool> {
    let tols = Tolerances::default();
    let (p, path, bytes) = read_input(&args.polytope, &tols)?;
    let clearance = p.min_clearance();
    let out = json!({
        "name": p.name,
        "dim": p.n(),
        "facets": p.m(),
        "codim": p.m() - p.n(),
        "vertices": p.vertices().len(),
        "codim2_faces": p.codim2_faces().len(),
        "min_clearance": clearance,
        "default_collar_width": 0.1 * clearance,
        "input": { "path": path, "sha256": crate::report::sha256_hex(&bytes) },
    });
    emit(&serde_json::to_string_pretty(&out).expect("json"), &args.common.out)?;
    Ok(true)
}

fn cmd_vertices(args: PolytopeArgs) -> Result<bool> {
    let tols = Tolerances::default();
    let (p, _, _) = read_input(&args.polytope, &tols)?;
    let vertices: Vec<Value> = p
        .vertices()
        .iter()
        .map(|v| json!({ "point": v.point.as_slice(), "active": v.active }))
        .collect();
    let out = json!({ "name": p.name, "vertices": vertices });
    emit(&serde_json::to_string_pretty(&out).expect("json"), &args.common.out)?;
    Ok(true)
}

fn cmd_quadrics(args: PolytopeArgs) -> Result<bool> {
    let tols = Tolerances::default();
    let (p, _, _) = read_input(&args.polytope, &tols)?;
    let qs = complement_matrix(&p);
    let c = qs.coefficients();
    let rows: Vec<Vec<f64>> = (0..c.nrows()).map(|i| c.row(i).iter().copied().collect()).collect();
    let constants: Vec<f64> = qs.constants().iter().copied().collect();
    let out = json!({ "C": rows, "c": constants });
    emit(&serde_json::to_string_pretty(&out).expect("json"), &args.common.out)?;
    Ok(true)
}

fn cmd_check_manifold(args: CheckManifoldArgs) -> Result<bool> {
    let mut tols = Tolerances::default();
    if let Some(t) = args.tol {
        tols.membership = t;
    }
    let (p, path, bytes) = read_input(&args.polytope, &tols)?;
    let qs = complement_matrix(&p);
    let mut report = Report::new("check-manifold", args.seed);
    report.input(&path, &bytes);

    let samples = sample_points(&p, &qs, args.samples, args.seed)?;

    let mut max_residual = 0.0f64;
    report.timed("membership", args.common.timings, || {
        for s in &samples {
            max_residual = max_residual.max(qs.residual_inf(&s.point.u));
        }
        (max_residual <= tols.membership, Some(max_residual))
    });

    let mut min_sigma = f64::INFINITY;
    let mut min_ratio = f64::INFINITY;
    report.timed("rank", args.common.timings, || {
        let mut pass = true;
        for s in &samples {
            match rank_certificate(&qs, &s.point.u, &tols) {
                Ok(r) => {
                    min_sigma = min_sigma.min(r.s_min);
                    min_ratio = min_ratio.min(r.ratio);
                }
                Err(Error::RankDeficient { ratio, .. }) => {
                    min_ratio = min_ratio.min(ratio);
                    pass = false;
                }
                Err(_) => pass = false,
            }
        }
        (pass, Some(min_ratio))
    });

    report.set_data("points", json!(samples.len()));
    report.set_data("max_residual", json!(max_residual));
    report.set_data("min_rank_sigma", json!(min_sigma));
    report.set_data("min_rank_ratio", json!(min_ratio));
    emit(&report.to_json(), &args.common.out)?;
    Ok(report.passed())
}

fn cmd_atlas_check(args: AtlasCheckArgs) -> Result<bool> {
    let mut tols = Tolerances::default();
    if let Some(h) = args.step {
        tols.fd_step = h;
    }
    let (p, path, bytes) = read_input(&args.polytope, &tols)?;
    let qs = complement_matrix(&p);
    let mut report = Report::new("atlas-check", args.seed);
    report.input(&path, &bytes);

    let interior: Vec<_> = sample_points(&p, &qs, args.probes.max(32), args.seed)?
        .into_iter()
        .filter(|s| s.point.zero_set().is_empty())
        .collect();
    if interior.is_empty() {
        return Err(Error::Parse("no interior samples drawn; raise --probes".into()));
    }
    let nv = p.vertices().len();
    let pairs: Vec<(usize, usize)> =
        (0..nv).flat_map(|v| ((v + 1)..nv).map(move |w| (v, w))).collect();

    struct PairResult {
        source: String,
        target: String,
        round_trip: f64,
        jacobian: f64,
        jacobian_pass: bool,
        probes: usize,
    }
    let check_pair = |(k, &(v, w)): (usize, &(usize, usize))| -> Result<PairResult> {
        let u = &interior[0].point;
        let a = ChartId::containing(&p, v, &u.u)?;
        let b = ChartId::containing(&p, w, &u.u)?;
        let forward = atlas::transition(&p, &a, &b)?;
        let backward = atlas::transition(&p, &b, &a)?;
        let probes =
            atlas::overlap_probes(&p, &qs, &a, &b, args.probes, args.seed.wrapping_add(k as u64), &tols)?;
        let mut round_trip = 0.0f64;
        for c in &probes {
            if let Ok(forth) = forward.apply(c) {
                let back = backward.apply(&forth)?;
                round_trip = round_trip.max((back - c).amax());
            }
        }
        let (jacobian, jacobian_pass, checked) =
            match atlas::verify_transition_smoothness(&forward, &probes, &tols) {
                Ok(r) => (r.max_residual, true, r.probes_checked),
                Err(Error::SmoothnessViolation { residual, .. }) => (residual, false, 0),
                Err(e) => return Err(e),
            };
        Ok(PairResult {
            source: a.label(),
            target: b.label(),
            round_trip,
            jacobian,
            jacobian_pass,
            probes: checked,
        })
    };
    let results: Vec<PairResult> = run_jobs(args.common.threads, &pairs, check_pair)?;

    let coherence = tols.membership;
    let worst_round_trip = results.iter().map(|r| r.round_trip).fold(0.0, f64::max);
    report.push("round_trip", worst_round_trip <= coherence, Some(worst_round_trip), None);
    let worst_jacobian = results.iter().map(|r| r.jacobian).fold(0.0, f64::max);
    report.push(
        "jacobian_fd",
        results.iter().all(|r| r.jacobian_pass),
        Some(worst_jacobian),
        None,
    );

    let mut worst_cocycle = 0.0f64;
    let mut triples = 0usize;
    report.timed("cocycle", args.common.timings, || {
        for v in 0..nv {
            for w in (v + 1)..nv {
                for z in (w + 1)..nv {
                    triples += 1;
                    for s in interior.iter().take(3) {
                        let ids = [
                            ChartId::containing(&p, v, &s.point.u),
                            ChartId::containing(&p, w, &s.point.u),
                            ChartId::containing(&p, z, &s.point.u),
                        ];
                        let (Ok(a), Ok(b), Ok(c)) = (&ids[0], &ids[1], &ids[2]) else { continue };
                        if let Ok(r) = atlas::cocycle_residual(&p, [a, b, c], &s.point, &tols) {
                            worst_cocycle = worst_cocycle.max(r);
                        }
                    }
                }
            }
        }
        (worst_cocycle <= coherence, Some(worst_cocycle))
    });

    let pair_entries: Vec<Value> = results
        .iter()
        .map(|r| {
            json!({
                "source": r.source,
                "target": r.target,
                "round_trip": r.round_trip,
                "jacobian_residual": r.jacobian,
                "probes": r.probes,
            })
        })
        .collect();
    report.set_data("pairs", Value::Array(pair_entries));
    report.set_data("triples", json!(triples));
    emit(&report.to_json(), &args.common.out)?;
    Ok(report.passed())
}

/// Run one closure per job, in order. With more than one thread the jobs run
/// on a rayon pool; results are collected in job order either way, so the
/// report bytes do not depend on the thread count.
fn run_jobs<T, R, F>(threads: usize, jobs: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn((usize, &T)) -> Result<R> + Sync,
{
    if threads <= 1 {
        return jobs.iter().enumerate().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Parse(format!("thread pool: {e}")))?;
    pool.install(|| {
        use rayon::prelude::*;
        jobs.par_iter().enumerate().map(|(k, t)| f((k, t))).collect()
    })
}

fn cmd_collar_check(args: CollarCheckArgs) -> Result<bool> {
    let tols = Tolerances::default();
    let (p, path, bytes) = read_input(&args.polytope, &tols)?;
    let mut report = Report::new("collar-check", args.seed);
    report.input(&path, &bytes);

    let collars = match build_collars(&p, args.delta) {
        Ok(c) => c,
        Err(e @ (Error::WidthTooLarge { .. } | Error::MonotonicityFailure { .. })) => {
            report.push("build", false, None, None);
            report.set_data("error", json!(e.to_string()));
            emit(&report.to_json(), &args.common.out)?;
            return Ok(false);
        }
        Err(e) => return Err(e),
    };
    report.push("build", true, None, None);
    report.set_data("delta", json!(collars.delta()));

    let mut pair_entries = Vec::new();
    report.timed("consistency", args.common.timings, || {
        let mut worst = 0.0f64;
        for &(i, j) in &p.codim2_faces() {
            let r = match collars.consistency_residual(i, j, 9) {
                Ok(r) => r,
                Err(_) => f64::NAN,
            };
            pair_entries.push(json!({ "facets": [i, j], "residual": r }));
            worst = worst.max(r);
        }
        (worst <= 1e-6, Some(worst))
    });
    report.set_data("consistency", Value::Array(pair_entries));

    let qs = complement_matrix(&p);
    let bases: Vec<DVector<f64>> = sample_points(&p, &qs, args.probes, args.seed)?
        .into_iter()
        .map(|s| s.base)
        .collect();
    // Probes sitting exactly on a facet round-trip through the square-root
    // branch of the profile inverse, which turns value-space rounding noise
    // into sqrt(eps) ~ 1.5e-8 of position error. The bound leaves headroom
    // over that floor while still catching construction defects.
    report.timed("round_trip", args.common.timings, || {
        match collars.round_trip_residual(&bases) {
            Ok(r) => (r <= 1e-7, Some(r)),
            Err(_) => (false, None),
        }
    });

    let mut c1_detail: Option<Value> = None;
    report.timed("c1", args.common.timings, || {
        match collars.verify_structure_diffeo(&tols) {
            Ok(r) => {
                c1_detail = Some(json!({
                    "c1_residual": r.c1_residual,
                    "worst_facet": r.worst_facet,
                    "worst_vertex": r.worst_vertex,
                    "probes": r.probes,
                }));
                (r.c1_residual <= tols.fd, Some(r.c1_residual))
            }
            Err(_) => (false, None),
        }
    });
    if let Some(v) = c1_detail {
        report.set_data("c1", v);
    }

    emit(&report.to_json(), &args.common.out)?;
    Ok(report.passed())
}

fn parse_pairing(text: &Option<String>, m: usize) -> Result<Vec<usize>> {
    match text {
        None => Ok((0..m).collect()),
        Some(s) => s
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Parse(format!("bad pairing entry {tok:?}")))
            })
            .collect(),
    }
}

/// Long-running external evaluator speaking line-delimited JSON.
struct ExternalEvaluator {
    command: String,
    state: Mutex<Option<(ChildStdin, BufReader<ChildStdout>, Child)>>,
}

impl ExternalEvaluator {
    fn new(command: &str) -> Self {
        ExternalEvaluator {
            command: command.to_string(),
            state: Mutex::new(None),
        }
    }

    fn eval(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let mut guard = self
            .state
            .lock()
            .map_err(|_| Error::ExternalMap("evaluator mutex poisoned".into()))?;
        if guard.is_none() {
            let mut child = std::process::Command::new("sh")
                .arg("-c")
                .arg(&self.command)
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .spawn()
                .map_err(|e| Error::ExternalMap(format!("cannot spawn {:?}: {e}", self.command)))?;
            let stdin = child
                .stdin
                .take()
                .ok_or_else(|| Error::ExternalMap("no stdin handle".into()))?;
            let stdout = child
                .stdout
                .take()
                .map(BufReader::new)
                .ok_or_else(|| Error::ExternalMap("no stdout handle".into()))?;
            *guard = Some((stdin, stdout, child));
        }
        let (stdin, stdout, _) = guard.as_mut().expect("spawned above");
        let request = serde_json::to_string(&json!({ "x": x.as_slice() })).expect("json");
        writeln!(stdin, "{request}").map_err(|e| Error::ExternalMap(format!("write: {e}")))?;
        stdin.flush().map_err(|e| Error::ExternalMap(format!("flush: {e}")))?;
        let mut reply = String::new();
        stdout
            .read_line(&mut reply)
            .map_err(|e| Error::ExternalMap(format!("read: {e}")))?;
        if reply.trim().is_empty() {
            return Err(Error::ExternalMap(format!("{:?} closed its output", self.command)));
        }
        #[derive(serde::Deserialize)]
        struct Reply {
            gx: Vec<f64>,
        }
        let parsed: Reply = serde_json::from_str(reply.trim())
            .map_err(|e| Error::ExternalMap(format!("bad reply {:?}: {e}", reply.trim())))?;
        Ok(DVector::from_vec(parsed.gx))
    }
}

impl Drop for ExternalEvaluator {
    fn drop(&mut self) {
        if let Ok(mut guard) = self.state.lock() {
            if let Some((_, _, mut child)) = guard.take() {
                let _ = child.kill();
                let _ = child.wait();
            }
        }
    }
}

fn external_closure(command: &str, dim: usize) -> impl Fn(&DVector<f64>) -> Result<DVector<f64>> {
    let evaluator = ExternalEvaluator::new(command);
    move |x| {
        let gx = evaluator.eval(x)?;
        if gx.len() != dim {
            return Err(Error::ExternalMap(format!(
                "evaluator returned {} coordinates, expected {dim}",
                gx.len()
            )));
        }
        Ok(gx)
    }
}

/// A base-map construction failure is a verification result, not an input
/// error: the report carries it and the process exits 1.
fn construction_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::NotEquivalent { .. }
            | Error::NotAffinelyEquivalent { .. }
            | Error::WidthTooLarge { .. }
            | Error::MonotonicityFailure { .. }
    )
}

fn build_base_map(args: &DiffeoArgs, tols: &Tolerances) -> Result<(BaseMap, Vec<String>, Vec<Vec<u8>>)> {
    let (p, p_path, p_bytes) = read_input(&args.source, tols)?;
    let (q, q_path, q_bytes) = read_input(&args.target, tols)?;
    let pairing = parse_pairing(&args.pairing, p.m())?;
    let base = if args.affine {
        BaseMap::affine(&p, &q, &pairing, tols)?
    } else if args.structure {
        if p.a() != q.a() || p.b() != q.b() {
            return Err(Error::Parse(
                "--structure needs the same polytope in both files".into(),
            ));
        }
        if args.pairing.is_some() {
            return Err(Error::Parse("--structure fixes the identity pairing".into()));
        }
        BaseMap::structure(build_collars(&p, None)?)
    } else {
        let command = args.map.as_deref().expect("clap group guarantees one realization");
        let fwd = external_closure(command, q.n());
        let inv: Box<dyn Fn(&DVector<f64>) -> Result<DVector<f64>> + Send + Sync> =
            match &args.inverse_map {
                Some(cmd) => Box::new(external_closure(cmd, p.n())),
                None => Box::new(|_: &DVector<f64>| {
                    Err(Error::ExternalMap("no inverse evaluator configured".into()))
                }),
            };
        BaseMap::user(&p, &q, &pairing, fwd, move |x| inv(x), tols)?
    };
    Ok((base, vec![p_path, q_path], vec![p_bytes, q_bytes]))
}

fn base_map_data(base: &BaseMap) -> Value {
    let mut data = json!({
        "kind": base.kind(),
        "source": base.source().name,
        "target": base.target().name,
        "pairing": base.pairing(),
    });
    if let Some(scales) = base.facet_scales() {
        data["facet_scales"] = json!(scales);
    }
    data
}

fn cmd_lift(args: DiffeoArgs) -> Result<bool> {
    let tols = Tolerances::default();
    let mut report = Report::new("lift", args.seed);
    let built = build_base_map(&args, &tols);
    let (base, paths, bytes) = match built {
        Ok(b) => b,
        Err(ref e) if construction_failure(e) => {
            report.push("base_map", false, None, None);
            report.set_data("error", json!(e.to_string()));
            emit(&report.to_json(), &args.common.out)?;
            return Ok(false);
        }
        Err(e) => return Err(e),
    };
    for (path, b) in paths.iter().zip(&bytes) {
        report.input(path, b);
    }
    report.push("base_map", true, None, None);
    report.set_data("base_map", base_map_data(&base));

    let have_inverse = !(args.map.is_some() && args.inverse_map.is_none());
    let lifted = diffeo::lift(base);
    if have_inverse {
        let samples = sample_points(lifted.base().source(), lifted.source_system(), args.points.min(20), args.seed)?;
        report.timed("lift_round_trip", args.common.timings, || {
            let mut worst = 0.0f64;
            for s in &samples {
                let out = match lifted.apply(&s.point.u, &tols) {
                    Ok(out) => out,
                    Err(_) => return (false, None),
                };
                match lifted.inverse_apply(&out, &tols) {
                    Ok(back) => worst = worst.max((&back - &s.point.u).amax()),
                    Err(_) => return (false, None),
                }
            }
            (worst <= tols.image, Some(worst))
        });
    }

    emit(&report.to_json(), &args.common.out)?;
    Ok(report.passed())
}

fn cmd_verify_diffeo(args: DiffeoArgs) -> Result<bool> {
    let tols = Tolerances::default();
    if args.map.is_some() && args.inverse_map.is_none() {
        return Err(Error::Parse("verify-diffeo --map needs --inverse-map".into()));
    }
    let mut report = Report::new("verify-diffeo", args.seed);
    let built = build_base_map(&args, &tols);
    let (base, paths, bytes) = match built {
        Ok(b) => b,
        Err(ref e) if construction_failure(e) => {
            report.push("base_map", false, None, None);
            report.set_data("error", json!(e.to_string()));
            emit(&report.to_json(), &args.common.out)?;
            return Ok(false);
        }
        Err(e) => return Err(e),
    };
    for (path, b) in paths.iter().zip(&bytes) {
        report.input(path, b);
    }
    report.push("base_map", true, None, None);
    report.set_data("base_map", base_map_data(&base));
    let lifted = diffeo::lift(base);

    let mut wall_detail: Option<Value> = None;
    report.timed("wall_derivatives", args.common.timings, || {
        match diffeo::verify_wall_derivatives(&lifted, args.points, args.seed, &tols) {
            Ok(r) => {
                wall_detail = Some(json!({
                    "wall_probes": r.wall_probes,
                    "min_diagonal": r.min_diagonal,
                    "max_off_diagonal": r.max_off_diagonal,
                    "max_continuity_gap": r.max_continuity_gap,
                }));
                (true, Some(r.max_off_diagonal))
            }
            Err(Error::WallDerivativeViolation { facet, detail }) => {
                wall_detail = Some(json!({ "facet": facet, "detail": detail }));
                (false, None)
            }
            Err(_) => (false, None),
        }
    });
    if let Some(v) = wall_detail {
        report.set_data("wall_derivatives", v);
    }

    let cert = diffeo::verify_equivariant_diffeo(&lifted, args.points, args.sign_vectors, args.seed, &tols)?;
    for check in &cert.checks {
        report.push(check.name, check.pass, Some(check.worst), None);
    }
    report.set_data(
        "certificate",
        serde_json::to_value(&cert).map_err(|e| Error::Parse(format!("certificate json: {e}")))?,
    );

    emit(&report.to_json(), &args.common.out)?;
    Ok(report.passed())
}

fn stratum_json(s: &Stratum) -> Value {
    match s {
        Stratum::Interior => json!("interior"),
        Stratum::Facet(i) => json!({ "facet": i }),
        Stratum::Face(i, j) => json!({ "face": [i, j] }),
        Stratum::Vertex(v) => json!({ "vertex": v }),
    }
}

fn cmd_sample(args: SampleArgs) -> Result<bool> {
    let tols = Tolerances::default();
    let (p, path, bytes) = read_input(&args.polytope, &tols)?;
    let qs = complement_matrix(&p);
    let samples = sample_points(&p, &qs, args.samples, args.seed)?;
    let points: Vec<Value> = samples
        .iter()
        .map(|s| {
            json!({
                "u": vector_json(&s.point.u),
                "base": vector_json(&s.base),
                "stratum": stratum_json(&s.stratum),
                "residual": s.point.residual,
            })
        })
        .collect();
    let out = json!({
        "name": p.name,
        "seed": args.seed,
        "count": samples.len(),
        "input": { "path": path, "sha256": crate::report::sha256_hex(&bytes) },
        "points": points,
    });
    emit(&serde_json::to_string_pretty(&out).expect("json"), &args.common.out)?;
    Ok(true)
}
