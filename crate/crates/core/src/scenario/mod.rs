//! Problem instances: channels, cooperation clusters, power constraints and
//! transmitter impairments, plus SINR and power-usage evaluation of rank-one
//! transmit strategies.

mod file;
mod generate;

pub use file::SCHEMA_VERSION;
pub use generate::{generate_scenario, GeneratorSpec, ScenarioKind};

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::metrics::PerformanceMetric;

/// Relative tolerance of the Hermitian / PSD / definiteness checks.
const VALIDATION_RTOL: f64 = 1e-9;

/// EVM values above this are accepted with a warning.
pub const EVM_TYPICAL_MAX: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    Total,
    Transmitter(usize),
    Antenna(usize),
    Matrix,
}

/// One linear power constraint `sum_k tr(Q_k S_k) <= q`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerConstraint {
    pub kind: ConstraintKind,
    pub q: f64,
    /// One `N x N` Hermitian PSD weighting matrix per user.
    pub matrices: Vec<CMatrix>,
}

fn diag_matrix(n: usize, on: impl Fn(usize) -> bool) -> CMatrix {
    CMatrix::from_fn(n, n, |i, j| {
        if i == j && on(i) {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

impl PowerConstraint {
    pub fn total(num_antennas: usize, num_users: usize, q: f64) -> Self {
        PowerConstraint {
            kind: ConstraintKind::Total,
            q,
            matrices: vec![diag_matrix(num_antennas, |_| true); num_users],
        }
    }

    pub fn transmitter(antennas: &[usize], j: usize, num_users: usize, q: f64) -> Self {
        let n: usize = antennas.iter().sum();
        let start: usize = antennas[..j].iter().sum();
        let end = start + antennas[j];
        PowerConstraint {
            kind: ConstraintKind::Transmitter(j),
            q,
            matrices: vec![diag_matrix(n, |i| (start..end).contains(&i)); num_users],
        }
    }

    pub fn antenna(num_antennas: usize, index: usize, num_users: usize, q: f64) -> Self {
        PowerConstraint {
            kind: ConstraintKind::Antenna(index),
            q,
            matrices: vec![diag_matrix(num_antennas, |i| i == index); num_users],
        }
    }

    pub fn per_transmitter(antennas: &[usize], num_users: usize, q: f64) -> Vec<Self> {
        (0..antennas.len())
            .map(|j| Self::transmitter(antennas, j, num_users, q))
            .collect()
    }

    pub fn per_antenna(num_antennas: usize, num_users: usize, q: f64) -> Vec<Self> {
        (0..num_antennas)
            .map(|n| Self::antenna(num_antennas, n, num_users, q))
            .collect()
    }

    pub fn matrix(q: f64, matrices: Vec<CMatrix>) -> Self {
        PowerConstraint { kind: ConstraintKind::Matrix, q, matrices }
    }
}

/// Data (`D_k`) and coordination (`C_k`) antenna selections, stored as masks.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionMatrices {
    pub data: Vec<Vec<bool>>,
    pub coord: Vec<Vec<bool>>,
    data_support: Vec<Vec<usize>>,
}

impl SelectionMatrices {
    /// Antenna indices selected by `D_k`.
    pub fn data_support(&self, k: usize) -> &[usize] {
        &self.data_support[k]
    }
}

/// Build the selection masks: the `j`-th antenna block of `D_k` (`C_k`) is
/// active iff user `k` is in the data (coordination) cluster of transmitter `j`.
pub fn build_selection(
    antennas_per_transmitter: &[usize],
    num_users: usize,
    data_clusters: &[Vec<usize>],
    coord_clusters: &[Vec<usize>],
) -> SelectionMatrices {
    let n: usize = antennas_per_transmitter.iter().sum();
    let mut data = vec![vec![false; n]; num_users];
    let mut coord = vec![vec![false; n]; num_users];
    let mut start = 0;
    for (j, &nj) in antennas_per_transmitter.iter().enumerate() {
        for &k in &data_clusters[j] {
            data[k][start..start + nj].fill(true);
        }
        for &k in &coord_clusters[j] {
            coord[k][start..start + nj].fill(true);
        }
        start += nj;
    }
    let data_support = data
        .iter()
        .map(|m| (0..n).filter(|&i| m[i]).collect())
        .collect();
    SelectionMatrices { data, coord, data_support }
}

/// Everything needed to construct a [`Scenario`]; validated by [`Scenario::new`].
#[derive(Debug, Clone)]
pub struct ScenarioParts {
    pub antennas_per_transmitter: Vec<usize>,
    pub num_users: usize,
    pub channels: Vec<CVector>,
    pub data_clusters: Vec<Vec<usize>>,
    pub coord_clusters: Vec<Vec<usize>>,
    pub noise_powers: Vec<f64>,
    pub power_constraints: Vec<PowerConstraint>,
    pub evm: Vec<f64>,
    pub metrics: Vec<PerformanceMetric>,
}

/// Immutable, validated problem instance.
#[derive(Debug, Clone)]
pub struct Scenario {
    parts: ScenarioParts,
    selection: SelectionMatrices,
    warnings: Vec<String>,
}

fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidScenario(msg.into()))
}

impl Scenario {
    pub fn new(parts: ScenarioParts) -> Result<Self> {
        let warnings = validate(&parts)?;
        for w in &warnings {
            log::warn!("{w}");
        }
        let selection = build_selection(
            &parts.antennas_per_transmitter,
            parts.num_users,
            &parts.data_clusters,
            &parts.coord_clusters,
        );
        Ok(Scenario { parts, selection, warnings })
    }

    pub fn parts(&self) -> &ScenarioParts {
        &self.parts
    }

    pub fn into_parts(self) -> ScenarioParts {
        self.parts
    }

    pub fn num_transmitters(&self) -> usize {
        self.parts.antennas_per_transmitter.len()
    }

    pub fn antennas_per_transmitter(&self) -> &[usize] {
        &self.parts.antennas_per_transmitter
    }

    pub fn num_antennas(&self) -> usize {
        self.parts.antennas_per_transmitter.iter().sum()
    }

    pub fn num_users(&self) -> usize {
        self.parts.num_users
    }

    pub fn num_constraints(&self) -> usize {
        self.parts.power_constraints.len()
    }

    pub fn channel(&self, k: usize) -> &CVector {
        &self.parts.channels[k]
    }

    pub fn noise_power(&self, k: usize) -> f64 {
        self.parts.noise_powers[k]
    }

    pub fn constraints(&self) -> &[PowerConstraint] {
        &self.parts.power_constraints
    }

    pub fn evm(&self) -> &[f64] {
        &self.parts.evm
    }

    pub fn has_impairments(&self) -> bool {
        self.parts.evm.iter().any(|&k| k > 0.0)
    }

    pub fn metric(&self, k: usize) -> &PerformanceMetric {
        &self.parts.metrics[k]
    }

    pub fn metrics(&self) -> &[PerformanceMetric] {
        &self.parts.metrics
    }

    pub fn selection(&self) -> &SelectionMatrices {
        &self.selection
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Same instance with every EVM coefficient set to `kappa`.
    pub fn with_uniform_evm(&self, kappa: f64) -> Result<Self> {
        let mut parts = self.parts.clone();
        parts.evm = vec![kappa; self.num_antennas()];
        Scenario::new(parts)
    }

    /// Same instance with all users evaluated under `metric`.
    pub fn with_metric(&self, metric: PerformanceMetric) -> Result<Self> {
        let mut parts = self.parts.clone();
        parts.metrics = vec![metric; self.num_users()];
        Scenario::new(parts)
    }
}

fn validate(p: &ScenarioParts) -> Result<Vec<String>> {
    let mut warnings = Vec::new();
    let kt = p.antennas_per_transmitter.len();
    let kr = p.num_users;
    if kt == 0 || p.antennas_per_transmitter.iter().any(|&n| n == 0) {
        return invalid("need at least one transmitter and every transmitter needs an antenna");
    }
    if kr == 0 {
        return invalid("need at least one user");
    }
    let n: usize = p.antennas_per_transmitter.iter().sum();
    if p.channels.len() != kr || p.channels.iter().any(|h| h.len() != n) {
        return invalid(format!("expected {kr} channel vectors of length {n}"));
    }
    if p.channels.iter().any(|h| h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())) {
        return invalid("channel entries must be finite");
    }
    if p.data_clusters.len() != kt || p.coord_clusters.len() != kt {
        return invalid(format!("expected {kt} data and coordination clusters"));
    }
    for j in 0..kt {
        for &k in p.data_clusters[j].iter().chain(&p.coord_clusters[j]) {
            if k >= kr {
                return invalid(format!("cluster of transmitter {j} names user {k} >= {kr}"));
            }
        }
        if let Some(k) = p.data_clusters[j].iter().find(|k| !p.coord_clusters[j].contains(k)) {
            return invalid(format!(
                "user {k} is served by transmitter {j} but not in its coordination cluster"
            ));
        }
    }
    if p.noise_powers.len() != kr || p.noise_powers.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return invalid("noise powers must be positive and finite, one per user");
    }
    if p.evm.len() != n || p.evm.iter().any(|&k| !(k >= 0.0 && k.is_finite())) {
        return invalid(format!("expected {n} nonnegative EVM coefficients"));
    }
    if let Some(i) = p.evm.iter().position(|&k| k > EVM_TYPICAL_MAX) {
        warnings.push(format!(
            "EVM {} at antenna {i} exceeds the typical range [0, {EVM_TYPICAL_MAX}]",
            p.evm[i]
        ));
    }
    if p.metrics.len() != kr {
        return invalid(format!("expected {kr} performance metrics"));
    }
    for m in &p.metrics {
        m.validate()?;
    }
    if p.power_constraints.is_empty() {
        return invalid("at least one power constraint is required");
    }
    let sel = build_selection(&p.antennas_per_transmitter, kr, &p.data_clusters, &p.coord_clusters);
    for (l, pc) in p.power_constraints.iter().enumerate() {
        if !(pc.q > 0.0 && pc.q.is_finite()) {
            return invalid(format!("power limit of constraint {l} must be positive"));
        }
        if pc.matrices.len() != kr || pc.matrices.iter().any(|m| m.shape() != (n, n)) {
            return invalid(format!("constraint {l} needs {kr} matrices of size {n}x{n}"));
        }
        for (k, q) in pc.matrices.iter().enumerate() {
            let scale = linalg::max_abs(q).max(f64::MIN_POSITIVE);
            if linalg::max_abs(&(q - q.adjoint())) > VALIDATION_RTOL * scale {
                return invalid(format!("Q[{l}][{k}] is not Hermitian"));
            }
            let (vals, _) = linalg::hermitian_eigen(q);
            let top = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if vals.iter().any(|&v| v < -VALIDATION_RTOL * top) {
                return invalid(format!("Q[{l}][{k}] is not positive semidefinite"));
            }
            // condition (a): Q - D Q D diagonal
            let mask = &sel.data[k];
            for i in 0..n {
                for jj in 0..n {
                    if i != jj && !(mask[i] && mask[jj]) && q[(i, jj)].norm() > VALIDATION_RTOL * scale {
                        return invalid(format!(
                            "Q[{l}][{k}] couples antennas outside the data support of user {k}"
                        ));
                    }
                }
            }
        }
    }
    // condition (b): sum_l Q_lk positive definite
    for k in 0..kr {
        let sum = p
            .power_constraints
            .iter()
            .fold(CMatrix::zeros(n, n), |acc, pc| acc + &pc.matrices[k]);
        let (vals, _) = linalg::hermitian_eigen(&sum);
        let top = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let min = vals.iter().fold(f64::INFINITY, |a, &v| a.min(v));
        if !(min > VALIDATION_RTOL * top) {
            return invalid(format!(
                "power constraints do not bound every transmit dimension of user {k}"
            ));
        }
    }
    Ok(warnings)
}

/// Rank-one transmit strategy `S_k = p_k w_k w_k^H`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingStrategy {
    pub directions: Vec<CVector>,
    pub powers: Vec<f64>,
}

impl BeamformingStrategy {
    pub fn zero(num_users: usize, num_antennas: usize) -> Self {
        BeamformingStrategy {
            directions: vec![CVector::zeros(num_antennas); num_users],
            powers: vec![0.0; num_users],
        }
    }

    /// Split unnormalized beamformers `v_k` into unit directions and powers.
    pub fn from_beamformers(beams: &[CVector]) -> Self {
        let mut directions = Vec::with_capacity(beams.len());
        let mut powers = Vec::with_capacity(beams.len());
        for v in beams {
            let nv = linalg::norm(v);
            if nv > 0.0 {
                directions.push(v.unscale(nv));
                powers.push(nv * nv);
            } else {
                directions.push(v.clone());
                powers.push(0.0);
            }
        }
        BeamformingStrategy { directions, powers }
    }

    pub fn beamformer(&self, k: usize) -> CVector {
        self.directions[k].scale(self.powers[k].sqrt())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        BeamformingStrategy {
            directions: self.directions.clone(),
            powers: self.powers.iter().map(|p| p * factor).collect(),
        }
    }

    pub fn validate(&self, scenario: &Scenario) -> Result<()> {
        let n = scenario.num_antennas();
        let kr = scenario.num_users();
        if self.directions.len() != kr || self.powers.len() != kr {
            return Err(Error::InvalidStrategy(format!("expected {kr} users")));
        }
        for k in 0..kr {
            let w = &self.directions[k];
            if w.len() != n {
                return Err(Error::InvalidStrategy(format!("direction {k} must have length {n}")));
            }
            let p = self.powers[k];
            if !(p >= 0.0 && p.is_finite()) {
                return Err(Error::InvalidStrategy(format!("power {k} must be nonnegative")));
            }
            if p > 0.0 {
                if (linalg::norm(w) - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidStrategy(format!("direction {k} is not unit norm")));
                }
                let mask = &scenario.selection().data[k];
                if w.iter().zip(mask).any(|(z, &on)| !on && z.norm() > 0.0) {
                    return Err(Error::InvalidStrategy(format!(
                        "direction {k} uses antennas that do not serve user {k}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Diagonal of the distortion covariance:
/// `Xi_nn = kappa_n^2 * sum_k p_k |[D_k w_k]_n|^2`.
pub fn distortion_covariance(scenario: &Scenario, strategy: &BeamformingStrategy) -> DVector<f64> {
    let n = scenario.num_antennas();
    let sel = scenario.selection();
    let kappa = scenario.evm();
    let mut xi = DVector::zeros(n);
    for k in 0..scenario.num_users() {
        let p = strategy.powers[k];
        if p == 0.0 {
            continue;
        }
        for &i in sel.data_support(k) {
            xi[i] += kappa[i] * kappa[i] * p * strategy.directions[k][i].norm_sqr();
        }
    }
    xi
}

// |h_k^H C_k D_i w_i|^2
pub(crate) fn cross_gain(scenario: &Scenario, k: usize, i: usize, w: &CVector) -> f64 {
    let sel = scenario.selection();
    let h = scenario.channel(k);
    let coord = &sel.coord[k];
    let z: Complex64 = sel
        .data_support(i)
        .iter()
        .filter(|&&n| coord[n])
        .map(|&n| h[n].conj() * w[n])
        .sum();
    z.norm_sqr()
}

fn sinr_with_distortion(
    scenario: &Scenario,
    strategy: &BeamformingStrategy,
    xi: &DVector<f64>,
    k: usize,
) -> f64 {
    let sel = scenario.selection();
    let h = scenario.channel(k);
    let signal = strategy.powers[k] * cross_gain(scenario, k, k, &strategy.directions[k]);
    if signal == 0.0 {
        return 0.0;
    }
    let mut denom = scenario.noise_power(k);
    for i in 0..scenario.num_users() {
        if i != k && strategy.powers[i] > 0.0 {
            denom += strategy.powers[i] * cross_gain(scenario, k, i, &strategy.directions[i]);
        }
    }
    for (n, &on) in sel.coord[k].iter().enumerate() {
        if on {
            denom += h[n].norm_sqr() * xi[n];
        }
    }
    signal / denom
}

/// SINR of user `k` with interference and distortion treated as noise.
pub fn sinr(scenario: &Scenario, strategy: &BeamformingStrategy, k: usize) -> f64 {
    let xi = distortion_covariance(scenario, strategy);
    sinr_with_distortion(scenario, strategy, &xi, k)
}

pub fn sinrs(scenario: &Scenario, strategy: &BeamformingStrategy) -> Vec<f64> {
    let xi = distortion_covariance(scenario, strategy);
    (0..scenario.num_users())
        .map(|k| sinr_with_distortion(scenario, strategy, &xi, k))
        .collect()
}

/// Performance vector `(g_1(SINR_1), ..., g_K(SINR_K))`.
pub fn evaluate_point(scenario: &Scenario, strategy: &BeamformingStrategy) -> Vec<f64> {
    sinrs(scenario, strategy)
        .into_iter()
        .enumerate()
        .map(|(k, s)| scenario.metric(k).g_unchecked(s))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintUsage {
    /// `sum_k tr(Q_lk S_k) / q_l` per constraint.
    pub ratios: Vec<f64>,
    /// Largest ratio; the strategy is feasible iff this is at most one.
    pub max: f64,
}

pub fn constraint_usage(scenario: &Scenario, strategy: &BeamformingStrategy) -> ConstraintUsage {
    let ratios: Vec<f64> = scenario
        .constraints()
        .iter()
        .map(|pc| {
            let used: f64 = (0..scenario.num_users())
                .filter(|&k| strategy.powers[k] > 0.0)
                .map(|k| {
                    let w = &strategy.directions[k];
                    strategy.powers[k] * linalg::inner(w, &(&pc.matrices[k] * w)).re
                })
                .sum();
            used.max(0.0) / pc.q
        })
        .collect();
    let max = ratios.iter().fold(0.0f64, |a, &r| a.max(r));
    ConstraintUsage { ratios, max }
}
