//! Closed-form parametrized transmit strategies.
//!
//! A pair of nonnegative weight vectors `(mu, lambda)`, one weight per user
//! and one per power constraint, determines beamforming directions, target
//! SINRs and a power allocation through a handful of pseudoinverses. Every
//! Pareto-optimal strategy arises this way for some choice of weights on the
//! two probability simplices, and the dual variables of the conic
//! feasibility problem are exactly such weights.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector};
use crate::scenario::{constraint_usage, cross_gain, evaluate_point, sinrs, BeamformingStrategy, Scenario};

/// Default cap on the number of grid points in [`sweep_explicit`].
pub const DEFAULT_GRID_CAP: usize = 5_000_000;

/// Powers in `[-NEGATIVE_POWER_TOL, 0)` are clamped to zero.
pub const NEGATIVE_POWER_TOL: f64 = 1e-9;

const COUPLING_RESIDUAL_RTOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitParams {
    mu: Vec<f64>,
    lambda: Vec<f64>,
}

fn check_weights(v: &[f64], what: &str) -> Result<()> {
    if v.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
        return Err(Error::InvalidParams(format!("{what} weights must be nonnegative and finite")));
    }
    Ok(())
}

impl ExplicitParams {
    /// Weights normalized onto the two simplices.
    pub fn new(mu: Vec<f64>, lambda: Vec<f64>) -> Result<Self> {
        let p = Self::unnormalized(mu, lambda)?;
        let smu: f64 = p.mu.iter().sum();
        if smu <= 0.0 {
            return Err(Error::InvalidParams("at least one user weight must be positive".into()));
        }
        let sl: f64 = p.lambda.iter().sum();
        Ok(ExplicitParams {
            mu: p.mu.iter().map(|m| m / smu).collect(),
            lambda: p.lambda.iter().map(|l| l / sl).collect(),
        })
    }

    /// Weights used as given. Strategy 1 is invariant to a joint positive
    /// scaling of all weights, so this only matters for derivatives.
    pub fn unnormalized(mu: Vec<f64>, lambda: Vec<f64>) -> Result<Self> {
        check_weights(&mu, "user")?;
        check_weights(&lambda, "constraint")?;
        if mu.is_empty() || lambda.is_empty() {
            return Err(Error::InvalidParams("need at least one user and one constraint weight".into()));
        }
        if !lambda.iter().any(|&l| l > 0.0) {
            return Err(Error::InvalidParams("at least one constraint weight must be positive".into()));
        }
        Ok(ExplicitParams { mu, lambda })
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn scaled(&self, t: f64) -> Result<Self> {
        Self::unnormalized(
            self.mu.iter().map(|m| m * t).collect(),
            self.lambda.iter().map(|l| l * t).collect(),
        )
    }

    fn check_against(&self, scenario: &Scenario) -> Result<()> {
        if self.mu.len() != scenario.num_users() || self.lambda.len() != scenario.num_constraints() {
            return Err(Error::InvalidParams(format!(
                "expected {} user weights and {} constraint weights",
                scenario.num_users(),
                scenario.num_constraints()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy1Status {
    Valid,
    InvalidPowers,
    SingularCoupling,
}

impl Strategy1Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy1Status::Valid => "valid",
            Strategy1Status::InvalidPowers => "invalid-powers",
            Strategy1Status::SingularCoupling => "singular-coupling",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Strategy1Result {
    pub strategy: BeamformingStrategy,
    /// Target SINRs; zero for inactive users.
    pub gammas: Vec<f64>,
    /// Power coupling matrix; the powers solve `p^T M = (gamma_k sigma_k^2)_k`.
    pub coupling: DMatrix<f64>,
    pub status: Strategy1Status,
}

/// `Psi_k`, restricted to the antennas serving user `k`.
pub fn psi_matrix(scenario: &Scenario, params: &ExplicitParams, k: usize) -> CMatrix {
    let sel = scenario.selection();
    let supp = sel.data_support(k);
    let m = supp.len();
    let kappa = scenario.evm();
    let mut psi = CMatrix::zeros(m, m);
    for kb in 0..scenario.num_users() {
        let weight = params.mu[kb] / scenario.noise_power(kb);
        if weight == 0.0 {
            continue;
        }
        let h = scenario.channel(kb);
        let coord = &sel.coord[kb];
        // D_k C_kb h_kb on the support of D_k
        let v = CVector::from_fn(m, |i, _| if coord[supp[i]] { h[supp[i]] } else { c(0.0, 0.0) });
        psi += (&v * v.adjoint()) * c(weight, 0.0);
        for (i, &n) in supp.iter().enumerate() {
            psi[(i, i)] += c(weight * kappa[n] * kappa[n] * v[i].norm_sqr(), 0.0);
        }
    }
    for (pc, &lam) in scenario.constraints().iter().zip(&params.lambda) {
        if lam > 0.0 {
            psi += linalg::submatrix(&pc.matrices[k], supp) * c(lam / pc.q, 0.0);
        }
    }
    psi
}

struct UserSolution {
    direction: CVector,
    gamma: f64,
}

fn fallback_direction(scenario: &Scenario, k: usize) -> CVector {
    let n = scenario.num_antennas();
    let supp = scenario.selection().data_support(k);
    let a = linalg::subvector(scenario.channel(k), supp);
    let na = linalg::norm(&a);
    if na > 0.0 {
        linalg::embed(&a.unscale(na), supp, n)
    } else if let Some(&first) = supp.first() {
        let mut w = CVector::zeros(n);
        w[first] = c(1.0, 0.0);
        w
    } else {
        CVector::zeros(n)
    }
}

fn solve_user(scenario: &Scenario, params: &ExplicitParams, k: usize) -> UserSolution {
    let inactive = || UserSolution { direction: fallback_direction(scenario, k), gamma: 0.0 };
    let supp = scenario.selection().data_support(k);
    let mu_k = params.mu[k];
    if mu_k == 0.0 || supp.is_empty() {
        return inactive();
    }
    let a = linalg::subvector(scenario.channel(k), supp);
    if linalg::norm(&a) == 0.0 {
        return inactive();
    }
    let psi = psi_matrix(scenario, params, k);
    let x = linalg::hermitian_pinv(&psi) * &a;
    let nx = linalg::norm(&x);
    if !(nx > 0.0 && nx.is_finite()) {
        return inactive();
    }
    let weight = mu_k / scenario.noise_power(k);
    let reduced = psi - (&a * a.adjoint()) * c(weight, 0.0);
    let gamma = weight * linalg::inner(&a, &(linalg::hermitian_pinv(&reduced) * &a)).re;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return inactive();
    }
    UserSolution {
        direction: linalg::embed(&x.unscale(nx), supp, scenario.num_antennas()),
        gamma,
    }
}

/// Target SINRs of Strategy 1 without the power allocation step.
pub fn gammas(scenario: &Scenario, params: &ExplicitParams) -> Result<Vec<f64>> {
    params.check_against(scenario)?;
    Ok((0..scenario.num_users())
        .map(|k| solve_user(scenario, params, k).gamma)
        .collect())
}

// sum_n |h_j^H C_j D_i T_n w|^2
fn coupled_distortion(scenario: &Scenario, j: usize, i: usize, w: &CVector) -> f64 {
    let sel = scenario.selection();
    let h = scenario.channel(j);
    let coord = &sel.coord[j];
    let kappa = scenario.evm();
    sel.data_support(i)
        .iter()
        .filter(|&&n| coord[n] && kappa[n] > 0.0)
        .map(|&n| kappa[n] * kappa[n] * h[n].norm_sqr() * w[n].norm_sqr())
        .sum()
}

pub fn coupling_matrix(scenario: &Scenario, directions: &[CVector], gammas: &[f64]) -> DMatrix<f64> {
    let kr = scenario.num_users();
    DMatrix::from_fn(kr, kr, |i, j| {
        let w = &directions[i];
        if i == j {
            cross_gain(scenario, i, i, w) - gammas[i] * coupled_distortion(scenario, i, i, w)
        } else {
            -gammas[j] * (cross_gain(scenario, j, i, w) + coupled_distortion(scenario, j, i, w))
        }
    })
}

/// Strategy 1: beamforming directions, target SINRs and powers from `(mu, lambda)`.
pub fn strategy1(scenario: &Scenario, params: &ExplicitParams) -> Result<Strategy1Result> {
    params.check_against(scenario)?;
    let kr = scenario.num_users();
    let users: Vec<UserSolution> = (0..kr).map(|k| solve_user(scenario, params, k)).collect();
    let gammas: Vec<f64> = users.iter().map(|u| u.gamma).collect();
    let directions: Vec<CVector> = users.into_iter().map(|u| u.direction).collect();
    let coupling = coupling_matrix(scenario, &directions, &gammas);

    // inactive users are dropped from the linear system
    let active: Vec<usize> = (0..kr).filter(|&k| gammas[k] > 0.0).collect();
    let na = active.len();
    let mut powers = vec![0.0; kr];
    let mut status = Strategy1Status::Valid;
    if na > 0 {
        let mt = DMatrix::from_fn(na, na, |r, col| coupling[(active[col], active[r])]);
        let rhs = DVector::from_fn(na, |r, _| gammas[active[r]] * scenario.noise_power(active[r]));
        let p = linalg::real_pinv(&mt) * &rhs;
        let residual = (&mt * &p - &rhs).norm();
        if !(residual <= COUPLING_RESIDUAL_RTOL * rhs.norm()) {
            status = Strategy1Status::SingularCoupling;
        }
        for (r, &k) in active.iter().enumerate() {
            let pk = p[r];
            if pk < -NEGATIVE_POWER_TOL || !pk.is_finite() {
                if status == Strategy1Status::Valid {
                    status = Strategy1Status::InvalidPowers;
                }
            }
            powers[k] = if pk.is_finite() { pk.max(0.0) } else { 0.0 };
        }
    }
    Ok(Strategy1Result {
        strategy: BeamformingStrategy { directions, powers },
        gammas,
        coupling,
        status,
    })
}

/// Scale a strategy down onto the feasible set. Returns the scaled strategy and
/// the largest constraint usage `c` before scaling; strategies with `c <= 1`
/// are returned unchanged.
pub fn scale_to_feasible(scenario: &Scenario, strategy: &BeamformingStrategy) -> (BeamformingStrategy, f64) {
    let c = constraint_usage(scenario, strategy).max;
    if c > 1.0 {
        (strategy.scaled(1.0 / c), c)
    } else {
        (strategy.clone(), c)
    }
}

#[derive(Debug, Clone)]
pub struct Strategy2Result {
    pub strategy: BeamformingStrategy,
    pub c: f64,
    pub gammas: Vec<f64>,
}

/// Strategy 2: Strategy 1 followed by scaling onto the feasible set.
pub fn strategy2(scenario: &Scenario, params: &ExplicitParams) -> Result<Strategy2Result> {
    let s1 = strategy1(scenario, params)?;
    match s1.status {
        Strategy1Status::Valid => {}
        Strategy1Status::InvalidPowers => return Err(Error::Strategy1Failed("negative powers")),
        Strategy1Status::SingularCoupling => {
            return Err(Error::Strategy1Failed("a singular coupling matrix"))
        }
    }
    let (strategy, c) = scale_to_feasible(scenario, &s1.strategy);
    Ok(Strategy2Result { strategy, c, gammas: s1.gammas })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    fn of(v: f64, tol: f64) -> Self {
        if v > tol {
            Sign::Positive
        } else if v < -tol {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }
}

/// Finite-difference partial derivatives of the target SINRs.
#[derive(Debug, Clone)]
pub struct Corollary1Report {
    pub gammas: Vec<f64>,
    /// `d_mu[k][kb] = d gamma_k / d mu_kb`
    pub d_mu: Vec<Vec<f64>>,
    /// `d_lambda[k][l] = d gamma_k / d lambda_l`
    pub d_lambda: Vec<Vec<f64>>,
    /// Per-user tolerance `1e-6 |gamma_k|`.
    pub tol: Vec<f64>,
    pub violations: Vec<String>,
}

impl Corollary1Report {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn mu_sign(&self, k: usize, kb: usize) -> Sign {
        Sign::of(self.d_mu[k][kb], self.tol[k])
    }

    pub fn lambda_sign(&self, k: usize, l: usize) -> Sign {
        Sign::of(self.d_lambda[k][l], self.tol[k])
    }
}

pub const COROLLARY1_REL_TOL: f64 = 1e-6;

/// Check the monotonicity of the target SINRs in the weights: own weight
/// helps, other users' weights and constraint weights hurt. Derivatives are
/// taken on the weights as given, without renormalization.
pub fn corollary1_check(scenario: &Scenario, params: &ExplicitParams, rel_step: f64) -> Result<Corollary1Report> {
    if !(rel_step >= 1e-12 && rel_step.is_finite()) {
        return Err(Error::StepTooSmall(rel_step));
    }
    let base = gammas(scenario, params)?;
    let kr = scenario.num_users();
    let tol: Vec<f64> = base.iter().map(|g| COROLLARY1_REL_TOL * g.abs()).collect();

    let derivative = |which: usize, is_mu: bool| -> Result<Vec<f64>> {
        let mut mu = params.mu.clone();
        let mut lambda = params.lambda.clone();
        let value = if is_mu { mu[which] } else { lambda[which] };
        let h = rel_step * value.abs().max(1e-3);
        let eval = |x: f64, mu: &mut Vec<f64>, lambda: &mut Vec<f64>| -> Result<Vec<f64>> {
            if is_mu {
                mu[which] = x;
            } else {
                lambda[which] = x;
            }
            gammas(scenario, &ExplicitParams::unnormalized(mu.clone(), lambda.clone())?)
        };
        let up = eval(value + h, &mut mu, &mut lambda)?;
        let (down, width) = if value >= h {
            (eval(value - h, &mut mu, &mut lambda)?, 2.0 * h)
        } else {
            (base.clone(), h)
        };
        Ok(up.iter().zip(&down).map(|(u, d)| (u - d) / width).collect())
    };

    let mut d_mu = vec![vec![0.0; kr]; kr];
    for kb in 0..kr {
        let col = derivative(kb, true)?;
        for k in 0..kr {
            d_mu[k][kb] = col[k];
        }
    }
    let nl = scenario.num_constraints();
    let mut d_lambda = vec![vec![0.0; nl]; kr];
    for l in 0..nl {
        let col = derivative(l, false)?;
        for k in 0..kr {
            d_lambda[k][l] = col[k];
        }
    }

    let mut violations = Vec::new();
    for k in 0..kr {
        for kb in 0..kr {
            let d = d_mu[k][kb];
            if kb == k && d < -tol[k] {
                violations.push(format!("d gamma_{k} / d mu_{k} = {d:e} < 0"));
            }
            if kb != k && d > tol[k] {
                violations.push(format!("d gamma_{k} / d mu_{kb} = {d:e} > 0"));
            }
        }
        for l in 0..nl {
            let d = d_lambda[k][l];
            if d > tol[k] {
                violations.push(format!("d gamma_{k} / d lambda_{l} = {d:e} > 0"));
            }
        }
    }
    Ok(Corollary1Report { gammas: base, d_mu, d_lambda, tol, violations })
}

/// All compositions of `total` into `parts` nonnegative integers, in
/// lexicographic order.
pub fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    fn rec(total: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            prefix.push(total);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in 0..=total {
            prefix.push(first);
            rec(total - first, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if parts > 0 {
        rec(total, parts, &mut Vec::with_capacity(parts), &mut out);
    }
    out
}

fn binomial(n: u128, k: u128) -> Option<u128> {
    let k = k.min(n - k.min(n));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)?.checked_div(i + 1)?;
    }
    Some(acc)
}

/// Number of grid divisions per simplex axis for a step size.
pub fn grid_divisions(step: f64) -> Result<usize> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidParams(format!("grid step {step} must be in (0, 1]")));
    }
    Ok((1.0 / step - 1e-9).ceil() as usize)
}

/// Points of the uniform grid on the probability simplex in `parts` dimensions.
pub fn simplex_grid(divisions: usize, parts: usize) -> Vec<Vec<f64>> {
    compositions(divisions, parts)
        .into_iter()
        .map(|c| c.into_iter().map(|x| x as f64 / divisions as f64).collect())
        .collect()
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub strategy: BeamformingStrategy,
    pub point: Vec<f64>,
    pub sinr: Vec<f64>,
    /// Largest constraint usage before feasibility scaling.
    pub c: f64,
    /// Constraint usage after feasibility scaling.
    pub usage: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub params: ExplicitParams,
    pub status: Strategy1Status,
    pub outcome: Option<SweepOutcome>,
}

#[derive(Debug, Clone)]
pub struct ExplicitSweep {
    pub entries: Vec<SweepEntry>,
    pub invalid: usize,
}

impl ExplicitSweep {
    pub fn valid(&self) -> impl Iterator<Item = (&ExplicitParams, &SweepOutcome)> {
        self.entries
            .iter()
            .filter_map(|e| e.outcome.as_ref().map(|o| (&e.params, o)))
    }
}

/// Evaluate Strategy 2 on the product of the user-weight and constraint-weight
/// simplex grids. Output order is deterministic (lexicographic in `mu`, then
/// `lambda`) regardless of thread count.
pub fn sweep_explicit(scenario: &Scenario, step: f64, cap: usize) -> Result<ExplicitSweep> {
    let m = grid_divisions(step)?;
    let kr = scenario.num_users();
    let nl = scenario.num_constraints();
    let count = binomial((m + kr - 1) as u128, (kr - 1) as u128)
        .zip(binomial((m + nl - 1) as u128, (nl - 1) as u128))
        .and_then(|(a, b)| a.checked_mul(b))
        .unwrap_or(u128::MAX);
    if count > cap as u128 {
        return Err(Error::GridTooLarge { points: count, cap });
    }
    let mus = simplex_grid(m, kr);
    let lambdas: Vec<Vec<f64>> = simplex_grid(m, nl)
        .into_iter()
        .filter(|l| l.iter().any(|&x| x > 0.0))
        .collect();
    let nlam = lambdas.len();
    let entries: Vec<SweepEntry> = (0..mus.len() * nlam)
        .into_par_iter()
        .map(|idx| {
            let params = ExplicitParams::new(mus[idx / nlam].clone(), lambdas[idx % nlam].clone())
                .expect("grid points lie on the simplices");
            let s1 = strategy1(scenario, &params).expect("grid dimensions match the scenario");
            let outcome = (s1.status == Strategy1Status::Valid).then(|| {
                let (strategy, c) = scale_to_feasible(scenario, &s1.strategy);
                SweepOutcome {
                    point: evaluate_point(scenario, &strategy),
                    sinr: sinrs(scenario, &strategy),
                    usage: constraint_usage(scenario, &strategy).ratios,
                    strategy,
                    c,
                }
            });
            SweepEntry { params, status: s1.status, outcome }
        })
        .collect();
    let invalid = entries.iter().filter(|e| e.outcome.is_none()).count();
    Ok(ExplicitSweep { entries, invalid })
}
