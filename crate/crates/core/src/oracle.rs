//! Brute-force reference for small instances.
//!
//! Random rank-one strategies are pushed onto the tightest power constraint
//! and evaluated. No optimization is involved, so the cloud is an
//! independent inner approximation of the region against which traced
//! boundaries can be checked from both sides: no sample may lie beyond the
//! boundary, and the best samples should come close to it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::explicit::simplex_grid;
use crate::linalg::{self, c, CVector};
use crate::region::{pareto_indices, ray_gaps, traced_rays, Dominance, GapReport, Provenance, RegionRow, RegionSample};
use crate::scenario::{constraint_usage, evaluate_point, sinrs, BeamformingStrategy, Scenario};

const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    /// Directions uniform on the unit sphere of each data support.
    RandomDirections,
    /// Deterministic grid over magnitudes and phases; supports of at most three antennas.
    AngleGrid,
}

#[derive(Debug, Clone)]
pub struct OracleConfig {
    /// Random direction sets; each is combined with every power vector.
    pub num_samples: usize,
    pub seed: u64,
    /// Levels per user of the power split, i.e. the simplex grid has
    /// `power_grid - 1` divisions.
    pub power_grid: usize,
    pub mode: OracleMode,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { num_samples: 100_000, seed: 0, power_grid: 64, mode: OracleMode::RandomDirections }
    }
}

impl OracleConfig {
    fn validate(&self) -> Result<()> {
        if self.num_samples == 0 {
            return Err(Error::InvalidParams("the oracle needs at least one sample".into()));
        }
        if self.power_grid < 2 {
            return Err(Error::InvalidParams("the power grid needs at least two levels".into()));
        }
        Ok(())
    }
}

/// Power splits on the simplex. Scaling onto the tightest constraint
/// removes the overall power level, so only the split matters.
fn power_vectors(users: usize, levels: usize) -> Vec<Vec<f64>> {
    simplex_grid(levels - 1, users)
}

fn random_direction(rng: &mut ChaCha8Rng, supp: &[usize], n: usize) -> CVector {
    loop {
        let local = CVector::from_fn(supp.len(), |_, _| {
            c(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
        });
        let norm = linalg::norm(&local);
        if norm > 1e-12 {
            return linalg::embed(&local.unscale(norm), supp, n);
        }
    }
}

/// Unit vectors `(cos t, sin t e^{i phi})`-style grid on a support of size <= 3.
fn grid_directions(supp: &[usize], n: usize, res: usize) -> Vec<CVector> {
    let m = supp.len();
    let angles: Vec<f64> = (0..res).map(|i| i as f64 * std::f64::consts::FRAC_PI_2 / (res - 1).max(1) as f64).collect();
    let phases: Vec<f64> = (0..res).map(|i| i as f64 * std::f64::consts::TAU / res as f64).collect();
    let mut out = Vec::new();
    match m {
        0 => out.push(CVector::zeros(n)),
        1 => out.push(linalg::embed(&CVector::from_element(1, c(1.0, 0.0)), supp, n)),
        2 => {
            for &t in &angles {
                for &p in &phases {
                    let v = CVector::from_vec(vec![c(t.cos(), 0.0), c(p.cos(), p.sin()) * t.sin()]);
                    out.push(linalg::embed(&v, supp, n));
                }
            }
        }
        _ => {
            for &t1 in &angles {
                for &t2 in &angles {
                    for &p1 in &phases {
                        for &p2 in &phases {
                            let v = CVector::from_vec(vec![
                                c(t1.cos(), 0.0),
                                c(p1.cos(), p1.sin()) * (t1.sin() * t2.cos()),
                                c(p2.cos(), p2.sin()) * (t1.sin() * t2.sin()),
                            ]);
                            out.push(linalg::embed(&v, supp, n));
                        }
                    }
                }
            }
        }
    }
    out
}

struct Candidate {
    strategy: BeamformingStrategy,
    c: f64,
    point: Vec<f64>,
}

fn candidate(scenario: &Scenario, strategy: BeamformingStrategy) -> Option<Candidate> {
    let c = constraint_usage(scenario, &strategy).max;
    if !(c > 0.0 && c.is_finite()) {
        return None;
    }
    let strategy = strategy.scaled(1.0 / c);
    let point = evaluate_point(scenario, &strategy);
    Some(Candidate { strategy, c, point })
}

fn to_row(scenario: &Scenario, cand: Candidate, status: &str) -> RegionRow {
    let mut row = RegionRow::sample(Provenance::Oracle, cand.point);
    row.status = status.into();
    row.sinr = Some(sinrs(scenario, &cand.strategy));
    row.c = Some(cand.c);
    row.usage = Some(constraint_usage(scenario, &cand.strategy).ratios);
    row
}

fn front(mut cands: Vec<Candidate>) -> Vec<Candidate> {
    let points: Vec<Vec<f64>> = cands.iter().map(|c| c.point.clone()).collect();
    let keep = pareto_indices(&points, Dominance::Strict);
    let mut out = Vec::with_capacity(keep.len());
    for i in keep.into_iter().rev() {
        out.push(cands.swap_remove(i));
    }
    out.reverse();
    out
}

/// Per-user maximum ratio transmission with all other users silent.
fn axis_rows(scenario: &Scenario) -> Vec<RegionRow> {
    let (kr, n) = (scenario.num_users(), scenario.num_antennas());
    (0..kr)
        .filter_map(|k| {
            let supp = scenario.selection().data_support(k);
            let a = linalg::subvector(scenario.channel(k), supp);
            let na = linalg::norm(&a);
            if na == 0.0 {
                return None;
            }
            let mut s = BeamformingStrategy::zero(kr, n);
            s.directions[k] = linalg::embed(&a.unscale(na), supp, n);
            s.powers[k] = 1.0;
            candidate(scenario, s).map(|cand| to_row(scenario, cand, "axis"))
        })
        .collect()
}

fn with_powers(scenario: &Scenario, directions: &[CVector], powers: &[Vec<f64>]) -> Vec<Candidate> {
    powers
        .iter()
        .filter_map(|p| {
            candidate(scenario, BeamformingStrategy { directions: directions.to_vec(), powers: p.clone() })
        })
        .collect()
}

/// Evaluate random (or gridded) rank-one strategies scaled onto the
/// tightest constraint. Every direction set is tried with every power split
/// and only the non-dominated candidates are returned, together with the
/// single-user MRT points. Deterministic for a given seed and independent of
/// the number of threads.
pub fn random_cloud(scenario: &Scenario, config: &OracleConfig) -> Result<RegionSample> {
    config.validate()?;
    let (kr, n) = (scenario.num_users(), scenario.num_antennas());
    let powers = power_vectors(kr, config.power_grid);
    let sel = scenario.selection();

    let (status, fronts): (&str, Vec<Vec<Candidate>>) = match config.mode {
        OracleMode::RandomDirections => {
            let chunks = config.num_samples.div_ceil(CHUNK);
            let fronts = (0..chunks)
                .into_par_iter()
                .map(|chunk| {
                    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                    rng.set_stream(chunk as u64);
                    let count = CHUNK.min(config.num_samples - chunk * CHUNK);
                    let mut cands = Vec::new();
                    for _ in 0..count {
                        let directions: Vec<CVector> =
                            (0..kr).map(|k| random_direction(&mut rng, sel.data_support(k), n)).collect();
                        cands.extend(front(with_powers(scenario, &directions, &powers)));
                    }
                    front(cands)
                })
                .collect();
            ("sample", fronts)
        }
        OracleMode::AngleGrid => {
            if (0..kr).any(|k| sel.data_support(k).len() > 3) {
                return Err(Error::InvalidParams("angle-grid mode supports at most three antennas per user".into()));
            }
            // finest resolution whose direction product fits the sample budget
            let total = |res: usize| -> usize {
                (0..kr)
                    .map(|k| grid_directions(sel.data_support(k), n, res).len())
                    .try_fold(1usize, |acc, d| acc.checked_mul(d))
                    .unwrap_or(usize::MAX)
            };
            let mut res = 2;
            while total(res + 1) <= config.num_samples && res < 64 {
                res += 1;
            }
            let grids: Vec<Vec<CVector>> =
                (0..kr).map(|k| grid_directions(sel.data_support(k), n, res)).collect();
            let combos: usize = grids.iter().map(Vec::len).product();
            let fronts = (0..combos.div_ceil(CHUNK))
                .into_par_iter()
                .map(|chunk| {
                    let mut cands = Vec::new();
                    for mut idx in chunk * CHUNK..combos.min((chunk + 1) * CHUNK) {
                        let dirs: Vec<CVector> = grids
                            .iter()
                            .map(|g| {
                                let d = g[idx % g.len()].clone();
                                idx /= g.len();
                                d
                            })
                            .collect();
                        cands.extend(front(with_powers(scenario, &dirs, &powers)));
                    }
                    front(cands)
                })
                .collect();
            ("grid", fronts)
        }
    };
    let mut rows = axis_rows(scenario);
    rows.extend(front(fronts.into_iter().flatten().collect()).into_iter().map(|c| to_row(scenario, c, status)));
    RegionSample::new(scenario).with_rows(rows)
}

#[derive(Debug, Clone)]
pub struct DominanceReport {
    pub gaps: GapReport,
    /// Largest amount by which a cloud point exceeds a traced point along its ray.
    pub worst_violation: f64,
    pub worst_ray: Option<Vec<f64>>,
    /// Rays exceeded by more than the tolerance.
    pub violations: usize,
    pub tol: f64,
}

impl DominanceReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Check that no cloud point lies beyond the traced boundary along any
/// traced ray by more than `tol`.
pub fn check_dominance(cloud: &RegionSample, boundary: &RegionSample, tol: f64) -> Result<DominanceReport> {
    cloud.check_fingerprint(boundary)?;
    let gaps = ray_gaps(&cloud.points(), &traced_rays(boundary));
    let (worst_violation, worst_ray) = gaps
        .rays
        .iter()
        .map(|r| (r.best - r.g_sum, Some(r.alpha.clone())))
        .fold((f64::NEG_INFINITY, None), |a, b| if b.0 > a.0 { b } else { a });
    let violations = gaps.rays.iter().filter(|r| r.best - r.g_sum > tol).count();
    Ok(DominanceReport { gaps, worst_violation, worst_ray, violations, tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::implicit::{trace_boundary, FairnessProfile, TraceOptions};
    use crate::region::boundary_row;
    use crate::scenario::tests::{orthogonal_pair, single_user};

    #[test]
    fn power_grid_enumeration() {
        assert_eq!(power_vectors(2, 3).len(), 3);
        assert!(power_vectors(3, 4).iter().all(|v| v.len() == 3 && (v.iter().sum::<f64>() - 1.0).abs() < 1e-12));
        assert_eq!(power_vectors(3, 4).len(), 10);
    }

    #[test]
    fn single_user_cloud_reaches_optimum() {
        let cfg = OracleConfig { num_samples: 2000, seed: 1, power_grid: 2, mode: OracleMode::RandomDirections };
        let cloud = random_cloud(&single_user(0.0), &cfg).unwrap();
        let best = cloud.points().iter().map(|p| p[0]).fold(0.0, f64::max);
        assert!((best - 3f64.log2()).abs() < 1e-12);
        assert!(cloud.points().iter().all(|p| p[0] <= 3f64.log2() + 1e-12));
    }

    #[test]
    fn seed_determinism() {
        let cfg = OracleConfig { num_samples: 3000, seed: 9, power_grid: 4, mode: OracleMode::RandomDirections };
        let a = random_cloud(&orthogonal_pair(), &cfg).unwrap();
        let b = random_cloud(&orthogonal_pair(), &cfg).unwrap();
        assert_eq!(a, b);
        let c = random_cloud(&orthogonal_pair(), &OracleConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn angle_grid_covers_symmetric_point() {
        let cfg = OracleConfig { num_samples: 5000, seed: 0, power_grid: 3, mode: OracleMode::AngleGrid };
        let cloud = random_cloud(&orthogonal_pair(), &cfg).unwrap();
        let best = cloud.points().iter().map(|p| p[0].min(p[1])).fold(0.0, f64::max);
        assert!((best - 1.0).abs() < 1e-9);
    }

    #[test]
    fn dominance_and_negative_control() {
        let scn = orthogonal_pair();
        let profiles = FairnessProfile::grid(11, 2).unwrap();
        let traced = trace_boundary(&scn, &profiles, &TraceOptions::default()).unwrap();
        let boundary = RegionSample::new(&scn)
            .with_rows(traced.iter().map(|b| boundary_row(&scn, b)).collect())
            .unwrap();
        let cfg = OracleConfig { num_samples: 20_000, seed: 3, ..Default::default() };
        let mut cloud = random_cloud(&scn, &cfg).unwrap();
        let rep = check_dominance(&cloud, &boundary, 1e-4).unwrap();
        assert!(rep.passed(), "worst violation {}", rep.worst_violation);
        assert!(rep.gaps.max_rel_gap < 0.05, "{:?}", rep.gaps.rays.iter().map(|r| (r.alpha[0], r.rel_gap)).collect::<Vec<_>>());

        cloud.rows.push(RegionRow::sample(Provenance::Oracle, vec![1.2, 1.2]));
        let rep = check_dominance(&cloud, &boundary, 1e-4).unwrap();
        assert!(!rep.passed());
        assert_eq!(rep.worst_ray.unwrap(), vec![0.5, 0.5]);
    }
}
