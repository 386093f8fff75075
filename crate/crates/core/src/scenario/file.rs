//! JSON scenario files.
//!
//! Complex numbers are `[re, im]` pairs and matrices are arrays of rows.
//! User and transmitter indices are zero-based. Power constraints may use
//! the shorthands `{"type":"total","q":..}`, `{"type":"per_transmitter","q":..}`
//! and `{"type":"per_antenna","q":..}` (where `q` is a number or one value
//! per transmitter / antenna); they are expanded on load.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ConstraintKind, PowerConstraint, Scenario, ScenarioParts};
use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, CVector};
use crate::metrics::PerformanceMetric;

pub const SCHEMA_VERSION: u32 = 1;

type ComplexPair = [f64; 2];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum ScalarOrList {
    Scalar(f64),
    List(Vec<f64>),
}

impl ScalarOrList {
    fn expand(&self, len: usize, what: &str) -> Result<Vec<f64>> {
        match self {
            ScalarOrList::Scalar(v) => Ok(vec![*v; len]),
            ScalarOrList::List(v) if v.len() == len => Ok(v.clone()),
            ScalarOrList::List(v) => Err(Error::Parse(format!(
                "{what}: expected {len} values, got {}",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum ConstraintEntry {
    Total { q: f64 },
    PerTransmitter { q: ScalarOrList },
    PerAntenna { q: ScalarOrList },
    Transmitter { index: usize, q: f64 },
    Antenna { index: usize, q: f64 },
    Matrix { q: f64, matrices: Vec<Vec<Vec<ComplexPair>>> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum MetricSpec {
    Shared(PerformanceMetric),
    PerUser(Vec<PerformanceMetric>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    schema_version: u32,
    num_transmitters: usize,
    antennas_per_transmitter: Vec<usize>,
    num_users: usize,
    channels: Vec<Vec<ComplexPair>>,
    data_clusters: Vec<Vec<usize>>,
    coord_clusters: Vec<Vec<usize>>,
    noise_powers: Vec<f64>,
    power_constraints: Vec<ConstraintEntry>,
    evm: ScalarOrList,
    metrics: MetricSpec,
}

fn pairs_to_vector(v: &[ComplexPair]) -> CVector {
    CVector::from_iterator(v.len(), v.iter().map(|p| c(p[0], p[1])))
}

fn rows_to_matrix(rows: &[Vec<ComplexPair>], n: usize) -> Result<CMatrix> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Parse(format!("constraint matrices must be {n}x{n}")));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| c(rows[i][j][0], rows[i][j][1])))
}

fn matrix_to_rows(m: &CMatrix) -> Vec<Vec<ComplexPair>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

impl ScenarioFile {
    fn into_scenario(self) -> Result<Scenario> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Parse(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.num_transmitters != self.antennas_per_transmitter.len() {
            return Err(Error::Parse(
                "num_transmitters disagrees with antennas_per_transmitter".into(),
            ));
        }
        let antennas = self.antennas_per_transmitter;
        let n: usize = antennas.iter().sum();
        let kr = self.num_users;
        let mut constraints = Vec::new();
        for entry in &self.power_constraints {
            match entry {
                ConstraintEntry::Total { q } => constraints.push(PowerConstraint::total(n, kr, *q)),
                ConstraintEntry::PerTransmitter { q } => {
                    let qs = q.expand(antennas.len(), "per_transmitter")?;
                    for (j, q) in qs.into_iter().enumerate() {
                        constraints.push(PowerConstraint::transmitter(&antennas, j, kr, q));
                    }
                }
                ConstraintEntry::PerAntenna { q } => {
                    let qs = q.expand(n, "per_antenna")?;
                    for (i, q) in qs.into_iter().enumerate() {
                        constraints.push(PowerConstraint::antenna(n, i, kr, q));
                    }
                }
                ConstraintEntry::Transmitter { index, q } => {
                    if *index >= antennas.len() {
                        return Err(Error::Parse(format!("no transmitter {index}")));
                    }
                    constraints.push(PowerConstraint::transmitter(&antennas, *index, kr, *q));
                }
                ConstraintEntry::Antenna { index, q } => {
                    if *index >= n {
                        return Err(Error::Parse(format!("no antenna {index}")));
                    }
                    constraints.push(PowerConstraint::antenna(n, *index, kr, *q));
                }
                ConstraintEntry::Matrix { q, matrices } => {
                    let ms = matrices
                        .iter()
                        .map(|rows| rows_to_matrix(rows, n))
                        .collect::<Result<Vec<_>>>()?;
                    constraints.push(PowerConstraint::matrix(*q, ms));
                }
            }
        }
        let metrics = match self.metrics {
            MetricSpec::Shared(m) => vec![m; kr],
            MetricSpec::PerUser(v) => v,
        };
        Scenario::new(ScenarioParts {
            antennas_per_transmitter: antennas,
            num_users: kr,
            channels: self.channels.iter().map(|h| pairs_to_vector(h)).collect(),
            data_clusters: self.data_clusters,
            coord_clusters: self.coord_clusters,
            noise_powers: self.noise_powers,
            power_constraints: constraints,
            evm: self.evm.expand(n, "evm")?,
            metrics,
        })
    }

    fn from_scenario(s: &Scenario) -> Self {
        let p = s.parts();
        let power_constraints = p
            .power_constraints
            .iter()
            .map(|pc| match pc.kind {
                ConstraintKind::Total => ConstraintEntry::Total { q: pc.q },
                ConstraintKind::Transmitter(index) => ConstraintEntry::Transmitter { index, q: pc.q },
                ConstraintKind::Antenna(index) => ConstraintEntry::Antenna { index, q: pc.q },
                ConstraintKind::Matrix => ConstraintEntry::Matrix {
                    q: pc.q,
                    matrices: pc.matrices.iter().map(matrix_to_rows).collect(),
                },
            })
            .collect();
        ScenarioFile {
            schema_version: SCHEMA_VERSION,
            num_transmitters: p.antennas_per_transmitter.len(),
            antennas_per_transmitter: p.antennas_per_transmitter.clone(),
            num_users: p.num_users,
            channels: p
                .channels
                .iter()
                .map(|h| h.iter().map(|z| [z.re, z.im]).collect())
                .collect(),
            data_clusters: p.data_clusters.clone(),
            coord_clusters: p.coord_clusters.clone(),
            noise_powers: p.noise_powers.clone(),
            power_constraints,
            evm: ScalarOrList::List(p.evm.clone()),
            metrics: MetricSpec::PerUser(p.metrics.clone()),
        }
    }
}

impl Scenario {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: ScenarioFile =
            serde_json::from_str(s).map_err(|e| Error::Parse(format!("scenario JSON: {e}")))?;
        file.into_scenario()
    }

    pub fn from_json_slice(bytes: &[u8]) -> Result<Self> {
        let file: ScenarioFile =
            serde_json::from_slice(bytes).map_err(|e| Error::Parse(format!("scenario JSON: {e}")))?;
        file.into_scenario()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&ScenarioFile::from_scenario(self))
            .expect("scenario serialization is infallible")
    }

    /// SHA-256 of the compact canonical JSON encoding, hex encoded.
    pub fn fingerprint(&self) -> String {
        let compact = serde_json::to_string(&ScenarioFile::from_scenario(self))
            .expect("scenario serialization is infallible");
        let digest = Sha256::digest(compact.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const IC: &str = r#"{
        "schema_version": 1,
        "num_transmitters": 2,
        "antennas_per_transmitter": [2, 2],
        "num_users": 2,
        "channels": [[[1,0],[0,1],[0.5,0],[0,0]], [[0,0],[0.2,0.1],[1,0],[0,-1]]],
        "data_clusters": [[0],[1]],
        "coord_clusters": [[0,1],[0,1]],
        "noise_powers": [1, 1],
        "power_constraints": [{"type":"per_transmitter","q":2.5}],
        "evm": 0.05,
        "metrics": {"metric":"rate"}
    }"#;

    #[test]
    fn parses_shorthand() {
        let s = Scenario::from_json_str(IC).unwrap();
        assert_eq!(s.num_constraints(), 2);
        assert_eq!(s.evm(), &[0.05; 4]);
        assert_eq!(s.constraints()[1].kind, ConstraintKind::Transmitter(1));
        assert_eq!(s.constraints()[1].matrices[0][(2, 2)], c(1.0, 0.0));
        assert_eq!(s.constraints()[1].matrices[0][(0, 0)], c(0.0, 0.0));
        assert_eq!(s.channel(0)[1], c(0.0, 1.0));
    }

    #[test]
    fn round_trip_preserves_fingerprint() {
        let s = Scenario::from_json_str(IC).unwrap();
        let back = Scenario::from_json_str(&s.to_json_string()).unwrap();
        assert_eq!(s.fingerprint(), back.fingerprint());
        assert_eq!(s.fingerprint().len(), 64);
    }

    #[test]
    fn matrix_constraints_round_trip() {
        let mut parts = Scenario::from_json_str(IC).unwrap().into_parts();
        let q = CMatrix::identity(4, 4);
        parts.power_constraints = vec![PowerConstraint::matrix(3.0, vec![q.clone(), q])];
        let s = Scenario::new(parts).unwrap();
        let back = Scenario::from_json_str(&s.to_json_string()).unwrap();
        assert_eq!(back.constraints(), s.constraints());
    }

    #[test]
    fn schema_version_is_mandatory() {
        let no_version = IC.replace("\"schema_version\": 1,", "");
        assert!(Scenario::from_json_str(&no_version).is_err());
        let v2 = IC.replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(Scenario::from_json_str(&v2).is_err());
    }

    #[test]
    fn rejects_wrong_list_lengths() {
        let bad = IC.replace("\"evm\": 0.05", "\"evm\": [0.1, 0.1]");
        assert!(matches!(Scenario::from_json_str(&bad), Err(Error::Parse(_))));
        let bad = IC.replace(r#""q":2.5"#, r#""q":[1,2,3]"#);
        assert!(Scenario::from_json_str(&bad).is_err());
    }
}
