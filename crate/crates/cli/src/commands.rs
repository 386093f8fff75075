use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use pareto_region::explicit::{strategy1, sweep_explicit, Strategy1Status, DEFAULT_GRID_CAP};
use pareto_region::implicit::{
    duals_to_explicit, trace_boundary, trace_point, BoundaryPoint, FairnessProfile, TraceOptions, DEFAULT_TOL,
    MAX_ITERATIONS,
};
use pareto_region::oracle::{check_dominance, random_cloud, OracleConfig, OracleMode};
use pareto_region::region::{boundary_row, pareto_indices, sweep_rows, Dominance, Provenance, RegionSample};
use pareto_region::scenario::{evaluate_point, generate_scenario, GeneratorSpec, ScenarioKind};
use pareto_region::{PerformanceMetric, Scenario};

use crate::config::{FileConfig, ProfileSpec};
use crate::error::CliError;
use crate::output::{InputRecord, Staged};
use crate::plot::{self, PlotInput};
use crate::{Common, ExplicitArgs, PlotArgs, ScenarioArgs, TraceArgs, VerifyArgs};

const DEFAULT_OUT: &str = "out";
const ROUND_TRIP_TOL: f64 = 1e-6;
const ROUND_TRIP_REL: f64 = 1e-3;
const MAX_FLAT_REDRAWS: usize = 20;

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

/// Flag, then config file, then default.
fn pick<T: Clone>(cli: &Option<T>, file: &Option<T>, default: T) -> T {
    cli.clone().or_else(|| file.clone()).unwrap_or(default)
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(format!("--{name} must be positive, got {v}")))
    }
}

pub struct Resolved {
    pub out: PathBuf,
    pub seed: u64,
    pub file: FileConfig,
}

pub fn resolve_common(common: &Common) -> Result<Resolved, CliError> {
    let file = FileConfig::load(common.config.as_deref())?;
    let threads = common.threads.or(file.threads);
    if let Some(n) = threads {
        if n == 0 {
            return Err(invalid("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| invalid(format!("thread pool: {e}")))?;
    }
    Ok(Resolved {
        out: pick(&common.out, &file.out, PathBuf::from(DEFAULT_OUT)),
        seed: pick(&common.seed, &file.seed, 0),
        file,
    })
}

fn load_scenario(
    cli: &Option<PathBuf>,
    file: &FileConfig,
    evm: Option<f64>,
) -> Result<(Scenario, PathBuf, InputRecord), CliError> {
    let path = cli
        .clone()
        .or_else(|| file.scenario.clone())
        .ok_or_else(|| invalid("--scenario is required"))?;
    let bytes = std::fs::read(&path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let mut scn = Scenario::from_json_slice(&bytes).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let record = InputRecord::new(&path, &bytes, Some(scn.fingerprint()));
    if let Some(k) = evm {
        scn = scn.with_uniform_evm(k)?;
    }
    for w in scn.warnings() {
        log::warn!("{w}");
    }
    Ok((scn, path, record))
}

fn parse_metric(s: &str) -> Result<PerformanceMetric, CliError> {
    match s {
        "rate" => Ok(PerformanceMetric::Rate),
        "mse" => Ok(PerformanceMetric::Mse),
        "ser" | "ser4qam" => Ok(PerformanceMetric::Ser4Qam),
        other => Err(invalid(format!("unknown metric {other:?} (rate, mse, ser4qam)"))),
    }
}

fn parse_kind(s: &str) -> Result<ScenarioKind, CliError> {
    match s {
        "miso-ic" => Ok(ScenarioKind::MisoIc),
        "network-mimo" => Ok(ScenarioKind::NetworkMimo),
        other => Err(invalid(format!("unknown scenario kind {other:?} (miso-ic, network-mimo)"))),
    }
}

fn report_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

pub fn scenario(args: &ScenarioArgs) -> Result<(), CliError> {
    let r = resolve_common(&args.common)?;
    let f = &r.file;
    let kind_name = args.kind.clone().or_else(|| f.kind.clone()).ok_or_else(|| invalid("--kind is required"))?;
    let kind = parse_kind(&kind_name)?;
    let kt = pick(&args.kt, &f.kt, if kind == ScenarioKind::MisoIc { 2 } else { 1 });
    let users = match kind {
        ScenarioKind::MisoIc => {
            if let Some(u) = args.users.or(f.users).filter(|&u| u != kt) {
                return Err(invalid(format!("miso-ic has one user per transmitter; --users {u} differs from --kt {kt}")));
            }
            kt
        }
        ScenarioKind::NetworkMimo => pick(&args.users, &f.users, 2),
    };
    let spec = GeneratorSpec {
        kind,
        num_transmitters: kt,
        antennas_per_transmitter: pick(&args.n, &f.n, 2),
        num_users: users,
        snr_db: pick(&args.snr, &f.snr, 10.0),
        evm: pick(&args.evm, &f.evm, 0.0),
        seed: r.seed,
        metric: parse_metric(&pick(&args.metric, &f.metric, "rate".into()))?,
    };
    let scn = generate_scenario(&spec)?;
    let mut staged = Staged::new(r.out.clone());
    staged.add("scenario.json", scn.to_json_string() + "\n");
    let config = json!({
        "out": r.out,
        "seed": r.seed,
        "generator": spec,
        "scenario_fingerprint": scn.fingerprint(),
    });
    let written = staged.commit("scenario", config, vec![], scn.warnings().to_vec())?;
    report_written(&written);
    Ok(())
}

fn front_csv(scn: &Scenario, sample: &RegionSample, mode: Dominance) -> Result<String, CliError> {
    let keep = pareto_indices(&sample.points(), mode);
    let rows = keep.into_iter().map(|i| sample.rows[i].clone()).collect();
    Ok(RegionSample::new(scn).with_rows(rows)?.to_csv_string()?)
}

fn dominance(strict: bool) -> Dominance {
    if strict {
        Dominance::Strict
    } else {
        Dominance::Weak
    }
}

pub fn explicit(args: &ExplicitArgs) -> Result<(), CliError> {
    let r = resolve_common(&args.common)?;
    let f = &r.file;
    let evm = args.evm.or(f.evm);
    let (scn, path, input) = load_scenario(&args.scenario, f, evm)?;
    let step = positive("step", pick(&args.step, &f.step, 0.02))?;
    let cap = pick(&args.grid_cap, &f.grid_cap, DEFAULT_GRID_CAP);
    let strict = pick(&args.strict_pareto, &f.strict_pareto, false);

    let sweep = sweep_explicit(&scn, step, cap)?;
    let sample = RegionSample::new(&scn).with_rows(sweep_rows(&scn, &sweep.entries))?;
    let front = front_csv(&scn, &sample, dominance(strict))?;
    println!(
        "{} parameter points, {} invalid, {} valid",
        sweep.entries.len(),
        sweep.invalid,
        sample.rows.len()
    );

    let mut staged = Staged::new(r.out.clone());
    staged.add("sweep.csv", sample.to_csv_string()?);
    staged.add("front.csv", front);
    let config = json!({
        "out": r.out,
        "seed": r.seed,
        "scenario": path,
        "scenario_fingerprint": scn.fingerprint(),
        "evm": evm,
        "step": step,
        "grid_cap": cap,
        "strict_pareto": strict,
    });
    let written = staged.commit("explicit", config, vec![input], vec![])?;
    report_written(&written);
    Ok(())
}

fn build_profiles(spec: &ProfileSpec, users: usize) -> Result<Vec<FairnessProfile>, CliError> {
    match spec {
        ProfileSpec::Count(n) => Ok(FairnessProfile::grid(*n, users)?),
        ProfileSpec::List(list) => list
            .iter()
            .map(|w| {
                if w.len() != users {
                    return Err(invalid(format!("profile {w:?} needs {users} weights")));
                }
                Ok(FairnessProfile::normalized(w.clone())?)
            })
            .collect(),
    }
}

fn default_profiles(users: usize) -> ProfileSpec {
    ProfileSpec::Count(if users <= 2 { 101 } else { 11 })
}

fn trace_warnings(points: &[BoundaryPoint]) -> Vec<String> {
    points
        .iter()
        .flat_map(|bp| bp.warnings.iter().map(move |w| format!("alpha {:?}: {w}", bp.profile.alpha())))
        .collect()
}

/// A ray on which no check succeeded although the boundary is away from the
/// origin, and the solver failed along the way.
fn lost_to_solver(bp: &BoundaryPoint) -> bool {
    bp.duals.is_none() && bp.g_max > 0.0 && bp.warnings.iter().any(|w| w.contains("solver failure"))
}

pub fn trace(args: &TraceArgs) -> Result<(), CliError> {
    let r = resolve_common(&args.common)?;
    let f = &r.file;
    let evm = args.evm.or(f.evm);
    let (scn, path, input) = load_scenario(&args.scenario, f, evm)?;
    let tol = positive("tol", pick(&args.tol, &f.tol, DEFAULT_TOL))?;
    let spec = args.profiles.clone().or_else(|| f.profiles.clone()).unwrap_or_else(|| default_profiles(scn.num_users()));
    let strict = pick(&args.strict_pareto, &f.strict_pareto, false);
    let profiles = build_profiles(&spec, scn.num_users())?;

    let points = trace_boundary(&scn, &profiles, &TraceOptions { tol, ..Default::default() })?;
    let warnings = trace_warnings(&points);
    let lost: Vec<_> = points.iter().filter(|bp| lost_to_solver(bp)).map(|bp| bp.profile.alpha().to_vec()).collect();
    if !lost.is_empty() {
        return Err(CliError::Solver(format!("no certified point on {} rays, e.g. alpha {:?}", lost.len(), lost[0])));
    }
    let rows = points
        .iter()
        .filter(|bp| !(strict && bp.weakly_dominated))
        .map(|bp| boundary_row(&scn, bp))
        .collect();
    let sample = RegionSample::new(&scn).with_rows(rows)?;
    let flat = points.iter().filter(|bp| bp.weakly_dominated).count();
    println!("{} profiles traced, {flat} on flat segments, {} warnings", points.len(), warnings.len());

    let mut staged = Staged::new(r.out.clone());
    staged.add("boundary.csv", sample.to_csv_string()?);
    let config = json!({
        "out": r.out,
        "seed": r.seed,
        "scenario": path,
        "scenario_fingerprint": scn.fingerprint(),
        "evm": evm,
        "tol": tol,
        "profiles": spec,
        "strict_pareto": strict,
        "power_resolve": true,
    });
    let written = staged.commit("trace", config, vec![input], warnings)?;
    report_written(&written);
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub scenario_fingerprint: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

fn expected_iterations(g_max: f64, tol: f64) -> u32 {
    if g_max <= tol {
        0
    } else {
        ((g_max / tol).log2().ceil() as u32).min(MAX_ITERATIONS)
    }
}

fn bisection_check(points: &[BoundaryPoint], tol: f64) -> Check {
    let mut bad = Vec::new();
    let mut worst = 0.0f64;
    for bp in points {
        let expected = expected_iterations(bp.g_max, tol);
        let alpha = bp.profile.alpha();
        let along = bp.point.iter().zip(alpha).map(|(g, a)| (g - a * bp.g_sum).abs()).fold(0.0, f64::max);
        let maxmin = (bp.profile.ray_measure(&bp.point) - bp.g_sum).abs();
        worst = worst.max(along).max(maxmin);
        if bp.iterations != expected || along > tol || maxmin > tol {
            bad.push(format!("alpha {alpha:?}: {} iterations (expected {expected}), off-ray {along:.1e}", bp.iterations));
        }
    }
    Check {
        name: "bisection-contract",
        passed: bad.is_empty(),
        detail: format!("{} points, worst ray deviation {worst:.1e} (tol {tol:e}); failures {bad:?}", points.len()),
    }
}

/// Retrace the rays of a boundary file and compare.
fn reproduce_check(scn: &Scenario, file: &RegionSample, tol: f64) -> Result<Check, CliError> {
    let rows: Vec<_> = file.rows.iter().filter(|r| r.tag == Provenance::ImplicitTrace).collect();
    if rows.is_empty() {
        return Ok(Check { name: "boundary-reproduces", passed: false, detail: "no traced rows in the boundary file".into() });
    }
    let mut profiles = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        match r.profile() {
            Some(p) if r.g_sum.is_some() => profiles.push(p),
            _ => {
                return Ok(Check {
                    name: "boundary-reproduces",
                    passed: false,
                    detail: format!("traced row {i} lacks a valid profile or g_sum"),
                })
            }
        }
    }
    let fresh = trace_boundary(scn, &profiles, &TraceOptions { tol, ..Default::default() })?;
    let slack = 2.0 * tol;
    let mut worst = 0.0f64;
    let mut bad = 0;
    for (row, bp) in rows.iter().zip(&fresh) {
        let dg = (row.g_sum.unwrap() - bp.g_sum).abs();
        let dp = row.point.iter().zip(&bp.point).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(dg).max(dp);
        if dg > slack || dp > slack {
            bad += 1;
        }
    }
    Ok(Check {
        name: "boundary-reproduces",
        passed: bad == 0,
        detail: format!("{} rays retraced at tol {tol:e}; {bad} differ by more than {slack:e}, worst {worst:.2e}", rows.len()),
    })
}

fn on_flat_segment(bp: &BoundaryPoint) -> bool {
    let Some(d) = bp.duals.as_ref() else { return false };
    let total: f64 = d.mu.iter().sum();
    (0..d.mu.len()).any(|k| bp.profile.is_active(k) && d.mu[k] <= 1e-6 * total)
}

fn round_trip_check(scn: &Scenario, count: usize, seed: u64) -> Result<Check, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = scn.num_users();
    let mut bad = Vec::new();
    let mut skipped = 0;
    let mut worst = 0.0f64;
    for _ in 0..count {
        let mut bp = None;
        for _ in 0..MAX_FLAT_REDRAWS {
            // uniform on the simplex, kept away from its faces
            let w: Vec<f64> = (0..k).map(|_| -rng.random_range(0.05f64..1.0).ln()).collect();
            let p = trace_point(scn, &FairnessProfile::normalized(w)?, ROUND_TRIP_TOL)?;
            if !on_flat_segment(&p) {
                bp = Some(p);
                break;
            }
            skipped += 1;
        }
        let Some(bp) = bp else {
            bad.push("every draw landed on a flat segment".to_string());
            continue;
        };
        let alpha = bp.profile.alpha().to_vec();
        let Some(duals) = bp.duals.as_ref() else {
            bad.push(format!("alpha {alpha:?}: no feasible check"));
            continue;
        };
        let params = match duals_to_explicit(duals) {
            Ok(p) => p,
            Err(e) => {
                bad.push(format!("alpha {alpha:?}: {e}"));
                continue;
            }
        };
        let s1 = strategy1(scn, &params)?;
        let point = evaluate_point(scn, &s1.strategy);
        let err = point
            .iter()
            .zip(&bp.point)
            .map(|(x, y)| (x - y).abs() / y.abs().max(1e-12))
            .fold(0.0, f64::max);
        worst = worst.max(err);
        if s1.status != Strategy1Status::Valid || err > ROUND_TRIP_REL {
            bad.push(format!("alpha {alpha:?}: status {}, rel err {err:.1e}", s1.status.as_str()));
        }
    }
    Ok(Check {
        name: "duality-round-trip",
        passed: bad.is_empty(),
        detail: format!(
            "{count} rays ({skipped} flat-segment draws redrawn), worst rel err {worst:.1e} (tol {ROUND_TRIP_REL:e}); failures {bad:?}"
        ),
    })
}

pub fn verify(args: &VerifyArgs) -> Result<(), CliError> {
    let r = resolve_common(&args.common)?;
    let f = &r.file;
    let evm = args.evm.or(f.evm);
    let (scn, path, scn_input) = load_scenario(&args.scenario, f, evm)?;
    let tol = positive("tol", pick(&args.tol, &f.tol, DEFAULT_TOL))?;
    let spec = args.profiles.clone().or_else(|| f.profiles.clone()).unwrap_or(ProfileSpec::Count(21));
    let samples = pick(&args.samples, &f.samples, 20_000);
    let power_grid = pick(&args.power_grid, &f.power_grid, 32);
    let mode_name = pick(&args.oracle_mode, &f.oracle_mode, "random".into());
    let mode = match mode_name.as_str() {
        "random" => OracleMode::RandomDirections,
        "grid" => OracleMode::AngleGrid,
        other => return Err(invalid(format!("unknown oracle mode {other:?} (random, grid)"))),
    };
    let dominance_tol = positive("dominance-tol", pick(&args.dominance_tol, &f.dominance_tol, 1e-3))?;
    let front_tol = args.front_tol.or(f.front_tol);
    let round_trips = pick(&args.round_trips, &f.round_trips, 5);
    let boundary_path = args.boundary.clone().or_else(|| f.boundary.clone());

    let config = json!({
        "out": r.out,
        "seed": r.seed,
        "scenario": path,
        "scenario_fingerprint": scn.fingerprint(),
        "boundary": boundary_path,
        "evm": evm,
        "tol": tol,
        "profiles": spec,
        "samples": samples,
        "power_grid": power_grid,
        "oracle_mode": mode_name,
        "dominance_tol": dominance_tol,
        "front_tol": front_tol,
        "round_trips": round_trips,
    });
    let mut inputs = vec![scn_input];
    let mut checks = Vec::new();
    let mut staged = Staged::new(r.out.clone());
    let mut warnings = Vec::new();

    let boundary = match &boundary_path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| invalid(format!("{}: {e}", p.display())))?;
            let sample = RegionSample::from_csv_str(&text).map_err(|e| invalid(format!("{}: {e}", p.display())))?;
            inputs.push(InputRecord::new(p, text.as_bytes(), Some(sample.fingerprint.clone())));
            let own = RegionSample::new(&scn);
            let matches = own.check_fingerprint(&sample).is_ok();
            checks.push(Check {
                name: "boundary-fingerprint",
                passed: matches,
                detail: format!("file {} vs scenario {}", sample.fingerprint, own.fingerprint),
            });
            if matches {
                checks.push(reproduce_check(&scn, &sample, tol)?);
            }
            sample
        }
        None => {
            let profiles = build_profiles(&spec, scn.num_users())?;
            let points = trace_boundary(&scn, &profiles, &TraceOptions { tol, ..Default::default() })?;
            warnings.extend(trace_warnings(&points));
            checks.push(bisection_check(&points, tol));
            let sample = RegionSample::new(&scn).with_rows(points.iter().map(|bp| boundary_row(&scn, bp)).collect())?;
            staged.add("boundary.csv", sample.to_csv_string()?);
            sample
        }
    };

    if boundary.fingerprint != scn.fingerprint() {
        return finish_verify(staged, &scn, checks, config, inputs, warnings);
    }
    let cloud = random_cloud(&scn, &OracleConfig { num_samples: samples, seed: r.seed, power_grid, mode })?;
    let dom = check_dominance(&cloud, &boundary, dominance_tol)?;
    checks.push(Check {
        name: "oracle-dominance",
        passed: dom.passed(),
        detail: format!(
            "{} cloud points, {} rays; worst excess {:.2e} (tol {dominance_tol:e}), {} violations",
            cloud.rows.len(),
            dom.gaps.rays.len(),
            dom.worst_violation,
            dom.violations
        ),
    });
    let front_detail = format!("max rel gap {:.2}%, mean {:.2}%", 100.0 * dom.gaps.max_rel_gap, 100.0 * dom.gaps.mean_rel_gap);
    match front_tol {
        Some(t) => checks.push(Check {
            name: "oracle-front",
            passed: dom.gaps.max_rel_gap <= t,
            detail: format!("{front_detail} (tol {:.2}%)", 100.0 * t),
        }),
        None => warnings.push(format!("oracle front not checked: {front_detail}")),
    }
    if round_trips > 0 {
        checks.push(round_trip_check(&scn, round_trips, r.seed)?);
    }

    finish_verify(staged, &scn, checks, config, inputs, warnings)
}

fn finish_verify(
    mut staged: Staged,
    scn: &Scenario,
    checks: Vec<Check>,
    config: serde_json::Value,
    inputs: Vec<InputRecord>,
    warnings: Vec<String>,
) -> Result<(), CliError> {
    let passed = checks.iter().all(|c| c.passed);
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let report = VerifyReport { scenario_fingerprint: scn.fingerprint(), passed, checks };
    staged.add("verify.json", serde_json::to_string_pretty(&report).expect("report serializes") + "\n");
    let written = staged.commit("verify", config, inputs, warnings)?;
    report_written(&written);
    if passed {
        Ok(())
    } else {
        let failed: Vec<_> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
        Err(CliError::Verification(failed.join(", ")))
    }
}

fn label_for(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "data".into())
}

pub fn plot(args: &PlotArgs) -> Result<(), CliError> {
    let r = resolve_common(&args.common)?;
    if args.inputs.is_empty() {
        return Err(invalid("plot needs at least one region CSV"));
    }
    if !args.labels.is_empty() && args.labels.len() != args.inputs.len() {
        return Err(invalid("give one --label per input or none"));
    }
    let mut inputs = Vec::new();
    let mut records = Vec::new();
    for (i, p) in args.inputs.iter().enumerate() {
        let text = std::fs::read_to_string(p).map_err(|e| invalid(format!("{}: {e}", p.display())))?;
        let sample = RegionSample::from_csv_str(&text).map_err(|e| invalid(format!("{}: {e}", p.display())))?;
        records.push(InputRecord::new(p, text.as_bytes(), Some(sample.fingerprint.clone())));
        let label = args.labels.get(i).cloned().unwrap_or_else(|| label_for(p));
        inputs.push(PlotInput { label, sample });
    }
    let image = args.image.clone().unwrap_or_else(|| "region.png".into());
    let files = plot::render(&inputs, &image)?;
    let mut staged = Staged::new(r.out.clone());
    staged.add("plot.gp", files.script);
    for (name, body) in files.data {
        staged.add(name, body);
    }
    let config = json!({
        "out": r.out,
        "seed": r.seed,
        "inputs": args.inputs,
        "labels": inputs.iter().map(|i| i.label.clone()).collect::<Vec<_>>(),
        "image": image,
    });
    let written = staged.commit("plot", config, records, vec![])?;
    report_written(&written);
    Ok(())
}
