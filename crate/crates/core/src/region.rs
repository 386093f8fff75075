//! Sampled performance regions: dominance filtering, ray-wise comparison of
//! samples against traced boundaries, and CSV / JSON interchange.
//!
//! Every sample row uses one column layout regardless of where it came from:
//!
//! ```text
//! tag,status,alpha_1..alpha_K,mu_1..mu_K,lambda_1..lambda_L,g_sum,iterations,
//! g_1..g_K,e_1..e_K,sinr_1..sinr_K,c,usage_1..usage_L
//! ```
//!
//! Cells that do not apply to a row are left empty. `e_k` is the raw error
//! measure (MSE or symbol error rate) when every user is scored by one.
//! CSV files start with `#` comment lines carrying the tool version and the
//! scenario fingerprint.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explicit::SweepEntry;
use crate::implicit::{BoundaryPoint, FairnessProfile};
use crate::scenario::Scenario;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const REGION_SCHEMA_VERSION: u32 = 1;

/// Grid used to compare performance values; absorbs floating-point noise.
pub const DOMINANCE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ExplicitSweep,
    ImplicitTrace,
    Oracle,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::ExplicitSweep => "explicit-sweep",
            Provenance::ImplicitTrace => "implicit-trace",
            Provenance::Oracle => "oracle",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "explicit-sweep" => Ok(Provenance::ExplicitSweep),
            "implicit-trace" => Ok(Provenance::ImplicitTrace),
            "oracle" => Ok(Provenance::Oracle),
            other => Err(Error::Parse(format!("unknown tag {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionRow {
    pub tag: Provenance,
    pub status: String,
    pub alpha: Option<Vec<f64>>,
    pub mu: Option<Vec<f64>>,
    pub lambda: Option<Vec<f64>>,
    pub g_sum: Option<f64>,
    pub iterations: Option<u32>,
    pub point: Vec<f64>,
    pub raw_error: Option<Vec<f64>>,
    pub sinr: Option<Vec<f64>>,
    pub c: Option<f64>,
    pub usage: Option<Vec<f64>>,
}

impl RegionRow {
    pub fn sample(tag: Provenance, point: Vec<f64>) -> Self {
        RegionRow {
            tag,
            status: String::new(),
            alpha: None,
            mu: None,
            lambda: None,
            g_sum: None,
            iterations: None,
            point,
            raw_error: None,
            sinr: None,
            c: None,
            usage: None,
        }
    }

    pub fn profile(&self) -> Option<FairnessProfile> {
        self.alpha.clone().and_then(|a| FairnessProfile::new(a).ok())
    }
}

fn raw_errors(scenario: &Scenario, sinr: &[f64]) -> Option<Vec<f64>> {
    sinr.iter()
        .enumerate()
        .map(|(k, &s)| scenario.metric(k).raw_error(s))
        .collect()
}

pub fn boundary_row(scenario: &Scenario, bp: &BoundaryPoint) -> RegionRow {
    RegionRow {
        tag: Provenance::ImplicitTrace,
        status: if bp.weakly_dominated { "weakly-dominated" } else { "boundary" }.into(),
        alpha: Some(bp.profile.alpha().to_vec()),
        mu: bp.duals.as_ref().map(|d| d.mu.clone()),
        lambda: bp.duals.as_ref().map(|d| d.lambda.clone()),
        g_sum: Some(bp.g_sum),
        iterations: Some(bp.iterations),
        point: bp.point.clone(),
        raw_error: raw_errors(scenario, &bp.sinr),
        sinr: Some(bp.sinr.clone()),
        c: bp.usage.iter().copied().reduce(f64::max),
        usage: Some(bp.usage.clone()),
    }
}

/// Sweep entries become rows; invalid parameterizations keep their
/// parameters and status but no performance values, and are skipped here
/// because every row must carry a point.
pub fn sweep_rows(scenario: &Scenario, entries: &[SweepEntry]) -> Vec<RegionRow> {
    entries
        .iter()
        .filter_map(|e| {
            let o = e.outcome.as_ref()?;
            Some(RegionRow {
                tag: Provenance::ExplicitSweep,
                status: e.status.as_str().into(),
                alpha: None,
                mu: Some(e.params.mu().to_vec()),
                lambda: Some(e.params.lambda().to_vec()),
                g_sum: None,
                iterations: None,
                point: o.point.clone(),
                raw_error: raw_errors(scenario, &o.sinr),
                sinr: Some(o.sinr.clone()),
                c: Some(o.c),
                usage: Some(o.usage.clone()),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSample {
    pub schema_version: u32,
    pub tool_version: String,
    pub fingerprint: String,
    pub num_users: usize,
    pub num_constraints: usize,
    pub rows: Vec<RegionRow>,
}

impl RegionSample {
    pub fn new(scenario: &Scenario) -> Self {
        RegionSample {
            schema_version: REGION_SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            fingerprint: scenario.fingerprint(),
            num_users: scenario.num_users(),
            num_constraints: scenario.num_constraints(),
            rows: Vec::new(),
        }
    }

    pub fn with_rows(mut self, rows: Vec<RegionRow>) -> Result<Self> {
        self.rows = rows;
        self.validate()?;
        Ok(self)
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.point.clone()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let (k, l) = (self.num_users, self.num_constraints);
        if k == 0 {
            return Err(Error::Parse("a region needs at least one user".into()));
        }
        let len_ok = |v: &Option<Vec<f64>>, n: usize| v.as_ref().map_or(true, |v| v.len() == n);
        let finite = |v: &Option<Vec<f64>>| v.as_ref().map_or(true, |v| v.iter().all(|x| x.is_finite()));
        for (i, r) in self.rows.iter().enumerate() {
            if r.point.len() != k || r.point.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
                return Err(Error::Parse(format!("row {i}: expected {k} nonnegative finite values")));
            }
            if !(len_ok(&r.alpha, k) && len_ok(&r.mu, k) && len_ok(&r.raw_error, k) && len_ok(&r.sinr, k))
                || !(len_ok(&r.lambda, l) && len_ok(&r.usage, l))
            {
                return Err(Error::Parse(format!("row {i}: column group of the wrong length")));
            }
            let scalars_ok = [r.g_sum, r.c].iter().all(|x| x.map_or(true, f64::is_finite));
            if !(scalars_ok
                && [&r.alpha, &r.mu, &r.lambda, &r.raw_error, &r.sinr, &r.usage]
                    .iter()
                    .all(|v| finite(v)))
            {
                return Err(Error::Parse(format!("row {i}: non-finite value")));
            }
            if r.status.contains(['\n', '\r']) {
                return Err(Error::Parse(format!("row {i}: line break in status")));
            }
        }
        Ok(())
    }

    pub fn check_fingerprint(&self, other: &RegionSample) -> Result<()> {
        if self.fingerprint != other.fingerprint {
            return Err(Error::FingerprintMismatch(self.fingerprint.clone(), other.fingerprint.clone()));
        }
        Ok(())
    }

    fn header(&self) -> Vec<String> {
        let (k, l) = (self.num_users, self.num_constraints);
        fn group(name: &'static str, n: usize) -> impl Iterator<Item = String> {
            (1..=n).map(move |i| format!("{name}_{i}"))
        }
        let mut h = vec!["tag".to_string(), "status".to_string()];
        h.extend(group("alpha", k));
        h.extend(group("mu", k));
        h.extend(group("lambda", l));
        h.push("g_sum".into());
        h.push("iterations".into());
        h.extend(group("g", k));
        h.extend(group("e", k));
        h.extend(group("sinr", k));
        h.push("c".into());
        h.extend(group("usage", l));
        h
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        self.validate()?;
        writeln!(out, "# pareto-region {}", self.tool_version)?;
        writeln!(out, "# scenario {}", self.fingerprint)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let group = |v: &Option<Vec<f64>>, n: usize| -> Vec<String> {
            match v {
                Some(v) => v.iter().map(|x| x.to_string()).collect(),
                None => vec![String::new(); n],
            }
        };
        let (k, l) = (self.num_users, self.num_constraints);
        for r in &self.rows {
            let mut rec = vec![r.tag.as_str().to_string(), r.status.clone()];
            rec.extend(group(&r.alpha, k));
            rec.extend(group(&r.mu, k));
            rec.extend(group(&r.lambda, l));
            rec.push(opt(r.g_sum));
            rec.push(r.iterations.map(|i| i.to_string()).unwrap_or_default());
            rec.extend(r.point.iter().map(|x| x.to_string()));
            rec.extend(group(&r.raw_error, k));
            rec.extend(group(&r.sinr, k));
            rec.push(opt(r.c));
            rec.extend(group(&r.usage, l));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut version = None;
        let mut fingerprint = None;
        let mut body_start = 0;
        for line in text.split_inclusive('\n') {
            let Some(comment) = line.strip_prefix('#') else { break };
            body_start += line.len();
            let mut parts = comment.split_whitespace();
            match (parts.next(), parts.next()) {
                (Some("pareto-region"), Some(v)) => version = Some(v.to_string()),
                (Some("scenario"), Some(f)) => fingerprint = Some(f.to_string()),
                _ => {}
            }
        }
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text[body_start..].as_bytes());
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let count = |prefix: &str| header.iter().filter(|h| h.starts_with(prefix)).count();
        let k = count("g_").saturating_sub(1); // minus g_sum
        let l = count("lambda_");
        let mut sample = RegionSample {
            schema_version: REGION_SCHEMA_VERSION,
            tool_version: version.unwrap_or_default(),
            fingerprint: fingerprint.ok_or_else(|| Error::Parse("missing '# scenario' line".into()))?,
            num_users: k,
            num_constraints: l,
            rows: Vec::new(),
        };
        if k == 0 || header != sample.header() {
            return Err(Error::Parse("unexpected CSV header".into()));
        }
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(Error::Parse("ragged CSV row".into()));
            }
            let mut cells = rec.iter();
            let mut next = || cells.next().expect("length checked");
            let tag = Provenance::parse(next())?;
            let status = next().to_string();
            let alpha = parse_group(&mut next, k)?;
            let mu = parse_group(&mut next, k)?;
            let lambda = parse_group(&mut next, l)?;
            let g_sum = parse_opt(next())?;
            let iterations = match next() {
                "" => None,
                s => Some(s.parse::<u32>().map_err(|e| Error::Parse(format!("iterations: {e}")))?),
            };
            let point = parse_group(&mut next, k)?
                .ok_or_else(|| Error::Parse("missing performance values".into()))?;
            let raw_error = parse_group(&mut next, k)?;
            let sinr = parse_group(&mut next, k)?;
            let c = parse_opt(next())?;
            let usage = parse_group(&mut next, l)?;
            sample.rows.push(RegionRow {
                tag,
                status,
                alpha,
                mu,
                lambda,
                g_sum,
                iterations,
                point,
                raw_error,
                sinr,
                c,
                usage,
            });
        }
        sample.validate()?;
        Ok(sample)
    }

    pub fn to_json_string(&self) -> Result<String> {
        self.validate()?;
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let s: RegionSample = serde_json::from_str(text).map_err(|e| Error::Parse(format!("region JSON: {e}")))?;
        if s.schema_version != REGION_SCHEMA_VERSION {
            return Err(Error::Parse(format!("unsupported schema_version {}", s.schema_version)));
        }
        s.validate()?;
        Ok(s)
    }

    /// Write to `path` as CSV or JSON depending on the extension.
    pub fn export(&self, path: &Path) -> Result<()> {
        let text = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => self.to_json_string()?,
            _ => self.to_csv_string()?,
        };
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn import(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json_str(&text),
            _ => Self::from_csv_str(&text),
        }
    }
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    let v: f64 = s.parse().map_err(|_| Error::Parse(format!("not a number: {s:?}")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("non-finite value {s:?}")));
    }
    Ok(Some(v))
}

fn parse_group<'a>(next: &mut impl FnMut() -> &'a str, n: usize) -> Result<Option<Vec<f64>>> {
    let cells: Vec<Option<f64>> = (0..n).map(|_| parse_opt(next())).collect::<Result<_>>()?;
    if cells.iter().all(Option::is_none) {
        return Ok(None);
    }
    cells
        .into_iter()
        .collect::<Option<Vec<f64>>>()
        .map(Some)
        .ok_or_else(|| Error::Parse("partially filled column group".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Dominance {
    /// Drop `r` if some `r' >= r` with `r' != r`: the Pareto boundary.
    #[default]
    Strict,
    /// Drop `r` only if some `r'` is strictly larger in every component,
    /// keeping weakly Pareto-optimal points (the outer boundary).
    Weak,
}

fn key(p: &[f64]) -> Vec<i64> {
    p.iter().map(|x| (x / DOMINANCE_SLACK).round() as i64).collect()
}

fn dominates(a: &[i64], b: &[i64], mode: Dominance) -> bool {
    match mode {
        Dominance::Strict => a.iter().zip(b).all(|(x, y)| x >= y) && a != b,
        Dominance::Weak => a.iter().zip(b).all(|(x, y)| x > y),
    }
}

/// Non-dominated subset under the strict (Pareto) notion.
pub fn pareto_filter(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    pareto_filter_with(points, Dominance::Strict)
}

/// Non-dominated subset, compared on a `DOMINANCE_SLACK` grid. Points
/// falling in the same grid cell are merged into the lexicographically
/// smallest of them. Output is sorted lexicographically, so the result does
/// not depend on input order.
pub fn pareto_filter_with(points: &[Vec<f64>], mode: Dominance) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = pareto_indices(points, mode).into_iter().map(|i| points[i].clone()).collect();
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite performance values"));
    out
}

/// Indices of the points kept by [`pareto_filter_with`], in increasing order.
pub fn pareto_indices(points: &[Vec<f64>], mode: Dominance) -> Vec<usize> {
    let mut cells: BTreeMap<Vec<i64>, usize> = BTreeMap::new();
    for (i, p) in points.iter().enumerate() {
        cells
            .entry(key(p))
            .and_modify(|cur| {
                if lex_less(p, &points[*cur]) {
                    *cur = i;
                }
            })
            .or_insert(i);
    }
    let (keys, idx): (Vec<Vec<i64>>, Vec<usize>) = cells.into_iter().unzip();
    let keep = if keys.first().is_some_and(|k| k.len() == 2) {
        keep_two_dim(&keys, mode)
    } else {
        keep_by_sum(&keys, mode)
    };
    let mut out: Vec<usize> = idx.into_iter().zip(keep).filter(|(_, k)| *k).map(|(i, _)| i).collect();
    out.sort_unstable();
    out
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    a.partial_cmp(b) == Some(std::cmp::Ordering::Less)
}

// a dominator has a strictly larger key sum, and a dropped dominator is
// itself dominated by a kept point, so comparing against kept points suffices
fn keep_by_sum(keys: &[Vec<i64>], mode: Dominance) -> Vec<bool> {
    let sum = |k: &Vec<i64>| k.iter().map(|&v| v as i128).sum::<i128>();
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(sum(&keys[i])));
    let mut keep = vec![false; keys.len()];
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        if !kept.iter().any(|&j| dominates(&keys[j], &keys[i], mode)) {
            keep[i] = true;
            kept.push(i);
        }
    }
    keep
}

// keys are distinct; sweep groups of equal first coordinate from the right
fn keep_two_dim(keys: &[Vec<i64>], mode: Dominance) -> Vec<bool> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[b][0].cmp(&keys[a][0]).then(keys[b][1].cmp(&keys[a][1])));
    let mut keep = vec![false; keys.len()];
    let mut best_prev = i64::MIN;
    let mut i = 0;
    while i < order.len() {
        let x = keys[order[i]][0];
        let mut j = i;
        while j < order.len() && keys[order[j]][0] == x {
            j += 1;
        }
        let group = &order[i..j];
        let group_max = keys[group[0]][1];
        match mode {
            Dominance::Strict => keep[group[0]] = group_max > best_prev,
            Dominance::Weak => {
                for &g in group {
                    keep[g] = keys[g][1] >= best_prev;
                }
            }
        }
        best_prev = best_prev.max(group_max);
        i = j;
    }
    keep
}

#[derive(Debug, Clone, PartialEq)]
pub struct RayGap {
    pub alpha: Vec<f64>,
    pub g_sum: f64,
    /// Largest `min_k r_k / alpha_k` over the samples.
    pub best: f64,
    /// `g_sum - best`; negative when samples reach beyond the traced point.
    pub abs_gap: f64,
    /// `abs_gap / g_sum`, zero when `g_sum` is zero.
    pub rel_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub rays: Vec<RayGap>,
    pub max_rel_gap: f64,
    pub mean_rel_gap: f64,
    pub max_abs_gap: f64,
    /// Largest `best - g_sum` over the rays, i.e. how far samples exceed the boundary.
    pub max_excess: f64,
}

/// Compare samples with traced boundary points along each traced ray.
pub fn ray_gaps(samples: &[Vec<f64>], traced: &[(FairnessProfile, f64)]) -> GapReport {
    let rays: Vec<RayGap> = traced
        .iter()
        .map(|(profile, g_sum)| {
            let best = samples
                .iter()
                .map(|r| profile.ray_measure(r))
                .fold(0.0f64, f64::max);
            let abs_gap = g_sum - best;
            RayGap {
                alpha: profile.alpha().to_vec(),
                g_sum: *g_sum,
                best,
                abs_gap,
                rel_gap: if *g_sum > 0.0 { abs_gap / g_sum } else { 0.0 },
            }
        })
        .collect();
    let n = rays.len().max(1) as f64;
    GapReport {
        max_rel_gap: rays.iter().map(|r| r.rel_gap).fold(f64::NEG_INFINITY, f64::max),
        mean_rel_gap: rays.iter().map(|r| r.rel_gap).sum::<f64>() / n,
        max_abs_gap: rays.iter().map(|r| r.abs_gap).fold(f64::NEG_INFINITY, f64::max),
        max_excess: rays.iter().map(|r| -r.abs_gap).fold(f64::NEG_INFINITY, f64::max),
        rays,
    }
}

/// Traced rays of a sample: rows carrying both a profile and `g_sum`.
pub fn traced_rays(traced: &RegionSample) -> Vec<(FairnessProfile, f64)> {
    traced
        .rows
        .iter()
        .filter_map(|r| Some((r.profile()?, r.g_sum?)))
        .collect()
}

/// How far short of each traced boundary point the sweep samples fall.
pub fn boundary_gap(sweep: &RegionSample, traced: &RegionSample) -> Result<GapReport> {
    sweep.check_fingerprint(traced)?;
    Ok(ray_gaps(&sweep.points(), &traced_rays(traced)))
}
