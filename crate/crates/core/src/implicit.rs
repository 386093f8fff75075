//! Boundary points along fairness rays.
//!
//! For a profile `alpha` on the simplex, the largest `g` such that user `k`
//! can get `alpha_k * g` for every `k` is found by bisection on `g`, each step
//! being a conic feasibility check. The result lies on the outer boundary of
//! the region, and the duals of the final feasible check are explicit
//! parameters that reproduce it.

use rayon::prelude::*;

use crate::conic::{check_feasibility, Duals, FeasibilityStatus, MARGIN_SLACK};
use crate::error::{Error, Result};
use crate::explicit::{coupling_matrix, ExplicitParams};
use crate::linalg::{self, CMatrix};
use crate::scenario::{constraint_usage, evaluate_point, sinrs, BeamformingStrategy, Scenario};

pub const DEFAULT_TOL: f64 = 1e-5;
pub const MAX_ITERATIONS: u32 = 60;
/// Profile entries below this are treated as zero.
pub const ALPHA_ZERO: f64 = 1e-9;
/// Allowed deviation of the rescaled dual sums from one.
pub const DUAL_SUM_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct FairnessProfile {
    alpha: Vec<f64>,
}

impl FairnessProfile {
    /// Accepts entries summing to one within 1e-9 and renormalizes exactly.
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() || alpha.iter().any(|&a| !(a >= 0.0 && a.is_finite())) {
            return Err(Error::InvalidParams("profile entries must be nonnegative".into()));
        }
        let sum: f64 = alpha.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParams(format!("profile sums to {sum}, not 1")));
        }
        Ok(FairnessProfile { alpha: alpha.iter().map(|a| a / sum).collect() })
    }

    /// Scale arbitrary nonnegative weights onto the simplex.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(Error::InvalidParams("profile weights must have a positive sum".into()));
        }
        Self::new(weights.iter().map(|w| w / sum).collect())
    }

    /// `count` points per axis of the uniform simplex grid in `users` dimensions.
    pub fn grid(count: usize, users: usize) -> Result<Vec<Self>> {
        if count < 2 || users == 0 {
            return Err(Error::InvalidParams("a profile grid needs at least two points per axis".into()));
        }
        crate::explicit::simplex_grid(count - 1, users)
            .into_iter()
            .map(Self::new)
            .collect()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn is_active(&self, k: usize) -> bool {
        self.alpha[k] >= ALPHA_ZERO
    }

    /// `min_k r_k / alpha_k` over active users: how far along this ray `r` reaches.
    pub fn ray_measure(&self, r: &[f64]) -> f64 {
        (0..self.alpha.len())
            .filter(|&k| self.is_active(k))
            .map(|k| r[k] / self.alpha[k])
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone)]
pub struct BoundaryPoint {
    pub profile: FairnessProfile,
    /// Achieved performance of `strategy`.
    pub point: Vec<f64>,
    pub sinr: Vec<f64>,
    /// Lower end of the final bracket.
    pub g_sum: f64,
    pub g_max: f64,
    pub strategy: BeamformingStrategy,
    /// Duals of the last feasible check; absent if no midpoint was feasible.
    pub duals: Option<Duals>,
    /// Margin of the last feasible check.
    pub beta: Option<f64>,
    pub iterations: u32,
    pub bracket_width: f64,
    pub usage: Vec<f64>,
    /// Set when another traced point weakly dominates this one, which marks
    /// an outer-boundary point on a flat segment that is not Pareto optimal.
    pub weakly_dominated: bool,
    pub warnings: Vec<String>,
}

/// Upper bound on `sum_k g_k` over the feasible set: each user gets at most
/// the SINR of maximum ratio transmission with the largest power the
/// constraints allow it on its own.
pub fn g_max_bound(scenario: &Scenario) -> f64 {
    (0..scenario.num_users())
        .map(|k| {
            let supp = scenario.selection().data_support(k);
            let gain = linalg::subvector(scenario.channel(k), supp).norm_squared();
            if gain == 0.0 {
                return 0.0;
            }
            let s = gain * max_user_power(scenario, k) / scenario.noise_power(k);
            scenario.metric(k).g_unchecked(s)
        })
        .sum()
}

fn max_user_power(scenario: &Scenario, k: usize) -> f64 {
    let supp = scenario.selection().data_support(k);
    let blocks: Vec<(CMatrix, f64)> = scenario
        .constraints()
        .iter()
        .map(|pc| (linalg::submatrix(&pc.matrices[k], supp), pc.q))
        .collect();
    let tr_d = supp.len() as f64;
    if blocks.iter().all(|(m, _)| linalg::is_diagonal(m, 0.0)) {
        // every antenna is bounded by some constraint; the one with the
        // smallest normalized eigenvalue gives a bound valid for all
        let e_min = blocks
            .iter()
            .filter_map(|(m, q)| {
                let (vals, _) = linalg::hermitian_eigen(m);
                let top = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                vals.iter()
                    .filter(|&&v| v > linalg::PINV_RTOL * top)
                    .fold(None, |acc: Option<f64>, &v| Some(acc.map_or(v, |a| a.min(v))))
                    .map(|v| v / (q * tr_d))
            })
            .fold(f64::INFINITY, f64::min);
        1.0 / e_min
    } else {
        // v^H (sum_l Q_l / q_l) v <= L for feasible v
        let m = supp.len();
        let sum = blocks
            .iter()
            .fold(CMatrix::zeros(m, m), |acc, (b, q)| acc + b.unscale(*q));
        let (vals, _) = linalg::hermitian_eigen(&sum);
        let lmin = vals.iter().fold(f64::INFINITY, |a, &v| a.min(v));
        blocks.len() as f64 / lmin
    }
}

#[derive(Debug, Clone)]
pub struct TraceOptions {
    pub tol: f64,
    /// Replace the solver's powers by the least powers meeting the final
    /// targets with equality for the solver's directions. Without this a
    /// user whose constraint is slack can end up above its target.
    pub power_resolve: bool,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions { tol: DEFAULT_TOL, power_resolve: true }
    }
}

/// Targets for a candidate `g`; `None` if some target is unattainable for its metric.
fn targets(scenario: &Scenario, profile: &FairnessProfile, g: f64) -> Option<Vec<f64>> {
    (0..scenario.num_users())
        .map(|k| {
            if profile.is_active(k) {
                scenario.metric(k).g_inverse(profile.alpha[k] * g).ok()
            } else {
                Some(0.0)
            }
        })
        .collect()
}

pub fn trace_point(scenario: &Scenario, profile: &FairnessProfile, tol: f64) -> Result<BoundaryPoint> {
    trace_point_with(scenario, profile, &TraceOptions { tol, ..Default::default() })
}

pub fn trace_point_with(scenario: &Scenario, profile: &FairnessProfile, opts: &TraceOptions) -> Result<BoundaryPoint> {
    let kr = scenario.num_users();
    if profile.alpha.len() != kr {
        return Err(Error::InvalidParams(format!("profile needs {kr} entries")));
    }
    if !(opts.tol > 0.0 && opts.tol.is_finite()) {
        return Err(Error::InvalidParams("tolerance must be positive".into()));
    }
    let g_max = g_max_bound(scenario);
    let (mut lo, mut hi) = (0.0, g_max);
    let mut best = None;
    let mut iterations = 0;
    let mut warnings = Vec::new();
    while hi - lo > opts.tol && iterations < MAX_ITERATIONS {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let Some(t) = targets(scenario, profile, mid) else {
            hi = mid;
            continue;
        };
        let res = check_feasibility(scenario, &t)?;
        match res.status {
            FeasibilityStatus::Feasible => {
                lo = mid;
                best = Some(res);
            }
            FeasibilityStatus::Infeasible => hi = mid,
            FeasibilityStatus::SolverFailure => {
                warnings.push(format!("solver failure at g = {mid}; treated as infeasible"));
                hi = mid;
            }
        }
    }
    if hi - lo > opts.tol {
        warnings.push(format!("iteration cap {MAX_ITERATIONS} reached with bracket width {}", hi - lo));
    }

    let (mut strategy, duals, beta) = match best {
        Some(r) => (r.strategy.expect("feasible result carries a strategy"), r.duals, r.beta),
        None => (BeamformingStrategy::zero(kr, scenario.num_antennas()), None, None),
    };
    if opts.power_resolve && lo > 0.0 {
        match resolve_powers(scenario, &strategy, &targets(scenario, profile, lo).expect("lo was feasible")) {
            Some(s) => strategy = s,
            None => warnings.push("power re-solve failed; kept solver powers".into()),
        }
    }
    let usage = constraint_usage(scenario, &strategy);
    Ok(BoundaryPoint {
        profile: profile.clone(),
        point: evaluate_point(scenario, &strategy),
        sinr: sinrs(scenario, &strategy),
        g_sum: lo,
        g_max,
        strategy,
        duals,
        beta,
        iterations,
        bracket_width: hi - lo,
        usage: usage.ratios,
        weakly_dominated: false,
        warnings,
    })
}

/// Least powers meeting `targets` with equality for fixed directions. They
/// are componentwise below any powers meeting the targets, so a feasible
/// input stays feasible.
fn resolve_powers(scenario: &Scenario, strategy: &BeamformingStrategy, targets: &[f64]) -> Option<BeamformingStrategy> {
    let kr = scenario.num_users();
    let m = coupling_matrix(scenario, &strategy.directions, targets);
    let active: Vec<usize> = (0..kr).filter(|&k| targets[k] > 0.0).collect();
    let na = active.len();
    let mt = nalgebra::DMatrix::from_fn(na, na, |r, c| m[(active[c], active[r])]);
    let rhs = nalgebra::DVector::from_fn(na, |r, _| targets[active[r]] * scenario.noise_power(active[r]));
    let p = mt.lu().solve(&rhs)?;
    if p.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
        return None;
    }
    let mut powers = vec![0.0; kr];
    for (r, &k) in active.iter().enumerate() {
        powers[k] = p[r];
    }
    let s = BeamformingStrategy { directions: strategy.directions.clone(), powers };
    (constraint_usage(scenario, &s).max <= 1.0 + MARGIN_SLACK).then_some(s)
}

/// Map boundary duals to explicit parameters: rescale so that all weights sum
/// to two, then both halves must sum to one.
pub fn duals_to_explicit(duals: &Duals) -> Result<ExplicitParams> {
    let smu: f64 = duals.mu.iter().sum();
    let sl: f64 = duals.lambda.iter().sum();
    let total = smu + sl;
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::DualNormalization { mu_sum: smu, lambda_sum: sl });
    }
    let scale = 2.0 / total;
    let (smu, sl) = (smu * scale, sl * scale);
    if (smu - 1.0).abs() > DUAL_SUM_TOL || (sl - 1.0).abs() > DUAL_SUM_TOL {
        return Err(Error::DualNormalization { mu_sum: smu, lambda_sum: sl });
    }
    ExplicitParams::new(
        duals.mu.iter().map(|m| m.max(0.0)).collect(),
        duals.lambda.iter().map(|l| l.max(0.0)).collect(),
    )
}

/// Trace every profile independently, in parallel; output follows input order.
pub fn trace_boundary(scenario: &Scenario, profiles: &[FairnessProfile], opts: &TraceOptions) -> Result<Vec<BoundaryPoint>> {
    let mut points = profiles
        .par_iter()
        .map(|p| trace_point_with(scenario, p, opts))
        .collect::<Result<Vec<_>>>()?;
    let snapshot: Vec<Vec<f64>> = points.iter().map(|p| p.point.clone()).collect();
    for (i, bp) in points.iter_mut().enumerate() {
        bp.weakly_dominated = snapshot.iter().enumerate().any(|(j, other)| {
            j != i
                && other.iter().zip(&snapshot[i]).all(|(o, s)| *o >= s - 1e-9)
                && other.iter().zip(&snapshot[i]).any(|(o, s)| *o > s + opts.tol)
        });
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explicit::strategy1;
    use crate::scenario::tests::{cvec, orthogonal_pair, single_cell, single_user};
    use crate::metrics::PerformanceMetric;
    use crate::scenario::{PowerConstraint, ScenarioParts};

    #[test]
    fn g_max_examples() {
        assert!((g_max_bound(&single_user(0.0)) - 5f64.log2()).abs() < 1e-12);
        let zero = single_cell(
            vec![cvec(&[(0.0, 0.0), (0.0, 0.0)])],
            vec![PowerConstraint::total(2, 1, 2.0)],
            vec![0.0; 2],
        );
        assert_eq!(g_max_bound(&zero), 0.0);
        let r = trace_point(&zero, &FairnessProfile::new(vec![1.0]).unwrap(), 1e-5).unwrap();
        assert_eq!((r.g_sum, r.iterations), (0.0, 0));
    }

    #[test]
    fn g_max_takes_loosest_constraint() {
        // antenna 0 capped at 0.01, antenna 1 at 1: total power up to 1.01
        let q1 = CMatrix::from_diagonal(&cvec(&[(100.0, 0.0), (0.0, 0.0)]));
        let q2 = CMatrix::from_diagonal(&cvec(&[(0.0, 0.0), (1.0, 0.0)]));
        let scn = single_cell(
            vec![cvec(&[(0.0, 0.0), (1.0, 0.0)])],
            vec![PowerConstraint::matrix(1.0, vec![q1]), PowerConstraint::matrix(1.0, vec![q2])],
            vec![0.0; 2],
        );
        let bound = g_max_bound(&scn);
        let r = trace_point(&scn, &FairnessProfile::new(vec![1.0]).unwrap(), 1e-6).unwrap();
        assert!((r.g_sum - 2f64.log2()).abs() < 1e-5);
        assert!(bound >= r.g_sum);
    }

    #[test]
    fn single_user_optimum() {
        let r = trace_point(&single_user(0.0), &FairnessProfile::new(vec![1.0]).unwrap(), 1e-5).unwrap();
        assert!((r.g_sum - 3f64.log2()).abs() < 1e-5);
        let expected = ((5f64.log2()) / 1e-5).log2().ceil() as u32;
        assert_eq!(r.iterations, expected);
        assert!(r.bracket_width <= 1e-5);
        assert!((r.strategy.directions[0][0].norm() - 1.0).abs() < 1e-6);
        assert!((r.strategy.powers[0] - 2.0).abs() < 1e-4);
        let p = duals_to_explicit(r.duals.as_ref().unwrap()).unwrap();
        assert!((p.mu()[0] - 1.0).abs() < 1e-12 && (p.lambda()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_pair_symmetric_point() {
        let scn = orthogonal_pair();
        let r = trace_point(&scn, &FairnessProfile::new(vec![0.5, 0.5]).unwrap(), 1e-6).unwrap();
        assert!((r.g_sum - 2.0).abs() < 1e-5);
        assert!((r.point[0] - 1.0).abs() < 1e-5 && (r.point[1] - 1.0).abs() < 1e-5);
        let p = duals_to_explicit(r.duals.as_ref().unwrap()).unwrap();
        assert!((p.mu()[0] - 0.5).abs() < 1e-3 && (p.lambda()[0] - 1.0).abs() < 1e-12);
        let s1 = strategy1(&scn, &p).unwrap();
        let back = evaluate_point(&scn, &s1.strategy);
        assert!((back[0] - r.point[0]).abs() < 1e-3 && (back[1] - r.point[1]).abs() < 1e-3);
    }

    #[test]
    fn axis_profile_is_single_user_problem() {
        let r = trace_point(&orthogonal_pair(), &FairnessProfile::new(vec![1.0, 0.0]).unwrap(), 1e-5).unwrap();
        assert!((r.point[0] - 3f64.log2()).abs() < 1e-5);
        assert_eq!(r.point[1], 0.0);
        assert_eq!(r.duals.unwrap().mu[1], 0.0);
    }

    // two isolated links: the region is a box and off-diagonal rays hit a flat side
    fn isolated_links() -> Scenario {
        Scenario::new(ScenarioParts {
            antennas_per_transmitter: vec![1, 1],
            num_users: 2,
            channels: vec![cvec(&[(1.0, 0.0), (0.0, 0.0)]), cvec(&[(0.0, 0.0), (1.0, 0.0)])],
            data_clusters: vec![vec![0], vec![1]],
            coord_clusters: vec![vec![0, 1], vec![0, 1]],
            noise_powers: vec![1.0, 1.0],
            power_constraints: PowerConstraint::per_transmitter(&[1, 1], 2, 1.0),
            evm: vec![0.0, 0.0],
            metrics: vec![PerformanceMetric::Rate; 2],
        })
        .unwrap()
    }

    #[test]
    fn power_resolve_meets_targets_with_equality() {
        let scn = isolated_links();
        let profile = FairnessProfile::new(vec![0.8, 0.2]).unwrap();
        let r = trace_point(&scn, &profile, 1e-6).unwrap();
        assert!((r.g_sum - 1.25).abs() < 1e-5);
        for k in 0..2 {
            assert!((r.point[k] - profile.alpha()[k] * r.g_sum).abs() < 1e-9, "{:?}", r.point);
        }
        assert!(r.usage.iter().all(|&u| u <= 1.0 + 1e-9));
        assert!((r.usage[0] - 1.0).abs() < 1e-5 && r.usage[1] < 0.5);

        let raw = trace_point_with(&scn, &profile, &TraceOptions { tol: 1e-6, power_resolve: false }).unwrap();
        assert!(raw.point[1] >= r.point[1] - 1e-9);
        assert_eq!(raw.g_sum, r.g_sum);
    }

    #[test]
    fn dual_normalization_errors() {
        assert!(duals_to_explicit(&Duals { mu: vec![0.0], lambda: vec![0.0] }).is_err());
        assert!(duals_to_explicit(&Duals { mu: vec![0.2], lambda: vec![1.0] }).is_err());
        let p = duals_to_explicit(&Duals { mu: vec![1.0, 1.0], lambda: vec![2.0] }).unwrap();
        assert_eq!(p.mu(), &[0.5, 0.5]);
    }

    #[test]
    fn profile_validation_and_grid() {
        assert!(FairnessProfile::new(vec![0.5, 0.6]).is_err());
        assert!(FairnessProfile::new(vec![-0.5, 1.5]).is_err());
        let g = FairnessProfile::grid(101, 2).unwrap();
        assert_eq!(g.len(), 101);
        assert!(g.iter().all(|p| (p.alpha().iter().sum::<f64>() - 1.0).abs() <= 1e-12));
        assert_eq!(FairnessProfile::grid(3, 3).unwrap().len(), 6);
    }

    #[test]
    fn trace_boundary_is_ordered_and_deterministic() {
        let scn = orthogonal_pair();
        let profiles: Vec<FairnessProfile> = [0.2, 0.5, 0.5, 0.8]
            .iter()
            .map(|&a| FairnessProfile::new(vec![a, 1.0 - a]).unwrap())
            .collect();
        let pts = trace_boundary(&scn, &profiles, &TraceOptions::default()).unwrap();
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[1].point, pts[2].point);
        assert!(pts[0].point[0] < pts[3].point[0]);
        assert!(pts.iter().all(|p| !p.weakly_dominated));
    }
}
