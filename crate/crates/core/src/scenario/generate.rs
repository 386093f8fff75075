use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{PowerConstraint, Scenario, ScenarioParts};
use crate::error::{Error, Result};
use crate::linalg::{c, CVector};
use crate::metrics::PerformanceMetric;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// Transmitter `j` serves only user `j` and coordinates interference to all.
    MisoIc,
    /// Every transmitter serves every user, per-antenna power constraints.
    NetworkMimo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: ScenarioKind,
    pub num_transmitters: usize,
    pub antennas_per_transmitter: usize,
    /// Ignored for `MisoIc`, where it equals the number of transmitters.
    pub num_users: usize,
    pub snr_db: f64,
    pub evm: f64,
    pub seed: u64,
    pub metric: PerformanceMetric,
}

/// Draw an uncorrelated Rayleigh fading realization.
///
/// Noise powers are one. Power limits are chosen so that a single user
/// receiving maximum ratio transmission with all the power it can be given
/// sees an average SNR of `10^(snr_db/10)`: per-transmitter limits of
/// `snr / N_j` for the interference channel, per-antenna limits of
/// `snr / N^2` for network MIMO.
pub fn generate_scenario(spec: &GeneratorSpec) -> Result<Scenario> {
    if spec.num_transmitters == 0 || spec.antennas_per_transmitter == 0 {
        return Err(Error::InvalidScenario(
            "need at least one transmitter with at least one antenna".into(),
        ));
    }
    let kt = spec.num_transmitters;
    let kr = match spec.kind {
        ScenarioKind::MisoIc => kt,
        ScenarioKind::NetworkMimo => spec.num_users,
    };
    if kr == 0 {
        return Err(Error::InvalidScenario("need at least one user".into()));
    }
    if !spec.snr_db.is_finite() {
        return Err(Error::InvalidScenario("SNR must be finite".into()));
    }
    let antennas = vec![spec.antennas_per_transmitter; kt];
    let n = kt * spec.antennas_per_transmitter;
    let snr = 10f64.powf(spec.snr_db / 10.0);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let scale = 0.5f64.sqrt();
    let channels: Vec<CVector> = (0..kr)
        .map(|_| {
            CVector::from_fn(n, |_, _| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                c(scale * re, scale * im)
            })
        })
        .collect();

    let (data_clusters, coord_clusters, power_constraints) = match spec.kind {
        ScenarioKind::MisoIc => (
            (0..kt).map(|j| vec![j]).collect(),
            vec![(0..kr).collect(); kt],
            PowerConstraint::per_transmitter(&antennas, kr, snr / spec.antennas_per_transmitter as f64),
        ),
        ScenarioKind::NetworkMimo => (
            vec![(0..kr).collect(); kt],
            vec![(0..kr).collect(); kt],
            PowerConstraint::per_antenna(n, kr, snr / (n * n) as f64),
        ),
    };

    Scenario::new(ScenarioParts {
        antennas_per_transmitter: antennas,
        num_users: kr,
        channels,
        data_clusters,
        coord_clusters,
        noise_powers: vec![1.0; kr],
        power_constraints,
        evm: vec![spec.evm; n],
        metrics: vec![spec.metric.clone(); kr],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: ScenarioKind, kt: usize, n: usize, users: usize) -> GeneratorSpec {
        GeneratorSpec {
            kind,
            num_transmitters: kt,
            antennas_per_transmitter: n,
            num_users: users,
            snr_db: 10.0,
            evm: 0.0,
            seed: 7,
            metric: PerformanceMetric::Rate,
        }
    }

    #[test]
    fn miso_ic_three_users() {
        let s = generate_scenario(&spec(ScenarioKind::MisoIc, 3, 4, 0)).unwrap();
        assert_eq!(s.num_users(), 3);
        assert_eq!(s.num_antennas(), 12);
        assert_eq!(s.num_constraints(), 3);
        assert_eq!(s.selection().data_support(1), &[4, 5, 6, 7]);
        assert!((s.constraints()[0].q - 2.5).abs() < 1e-12);
    }

    #[test]
    fn network_mimo_two_users() {
        let s = generate_scenario(&spec(ScenarioKind::NetworkMimo, 1, 3, 2)).unwrap();
        assert_eq!((s.num_users(), s.num_antennas(), s.num_constraints()), (2, 3, 3));
        assert!(s.selection().data.iter().all(|m| m.iter().all(|&b| b)));
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_scenario(&spec(ScenarioKind::NetworkMimo, 1, 3, 2)).unwrap();
        let b = generate_scenario(&spec(ScenarioKind::NetworkMimo, 1, 3, 2)).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        let mut other = spec(ScenarioKind::NetworkMimo, 1, 3, 2);
        other.seed = 8;
        assert_ne!(a.fingerprint(), generate_scenario(&other).unwrap().fingerprint());
    }

    #[test]
    fn invalid_sizes() {
        assert!(generate_scenario(&spec(ScenarioKind::MisoIc, 0, 4, 0)).is_err());
        assert!(generate_scenario(&spec(ScenarioKind::NetworkMimo, 1, 3, 0)).is_err());
    }
}
