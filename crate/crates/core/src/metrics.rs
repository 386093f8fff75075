//! Per-user performance functions of the SINR.
//!
//! Every metric is continuous, strictly increasing and zero at zero SINR.
//! Error measures that should be minimized (MSE, 4-QAM SER) are turned into
//! increasing functions by `g(s) = e(0) - e(s)`, where `e` is the raw error.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf_inv;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "metric", rename_all = "lowercase")]
pub enum PerformanceMetric {
    /// Achievable rate `log2(1 + s)` in bits per channel use.
    Rate,
    /// `1 - 1/(1 + s)`, the MMSE reduction relative to zero SINR.
    Mse,
    /// Symbol error rate reduction for Gray-mapped 4-QAM.
    #[serde(rename = "ser4qam")]
    Ser4Qam,
    /// Piecewise-linear table through `(sinr[i], value[i])`, starting at the
    /// origin and extrapolated with the last slope.
    Table { sinr: Vec<f64>, value: Vec<f64> },
}

impl Default for PerformanceMetric {
    fn default() -> Self {
        PerformanceMetric::Rate
    }
}

/// Exact 4-QAM symbol error rate `2Q(sqrt(s)) - Q(sqrt(s))^2`.
pub fn ser_4qam(sinr: f64) -> f64 {
    let q = 0.5 * libm::erfc((0.5 * sinr).sqrt());
    2.0 * q - q * q
}

// u = 1/2 - Q(sqrt(s)) = erf(sqrt(s/2)) / 2
fn half_erf(sinr: f64) -> f64 {
    0.5 * libm::erf((0.5 * sinr).sqrt())
}

impl PerformanceMetric {
    pub fn table(sinr: Vec<f64>, value: Vec<f64>) -> Result<Self> {
        let m = PerformanceMetric::Table { sinr, value };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if let PerformanceMetric::Table { sinr, value } = self {
            if sinr.len() != value.len() || sinr.len() < 2 {
                return Err(Error::InvalidScenario(
                    "metric table needs at least two (sinr, value) pairs of equal length".into(),
                ));
            }
            if sinr[0] != 0.0 || value[0] != 0.0 {
                return Err(Error::InvalidScenario("metric table must start at (0, 0)".into()));
            }
            let increasing = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0] && w[1].is_finite());
            if !increasing(sinr) || !increasing(value) {
                return Err(Error::InvalidScenario(
                    "metric table must be strictly increasing in both columns".into(),
                ));
            }
        }
        Ok(())
    }

    /// Supremum of `g` over `[0, inf)`.
    pub fn sup(&self) -> f64 {
        match self {
            PerformanceMetric::Rate | PerformanceMetric::Table { .. } => f64::INFINITY,
            PerformanceMetric::Mse => 1.0,
            PerformanceMetric::Ser4Qam => 0.75,
        }
    }

    pub fn is_error_measure(&self) -> bool {
        matches!(self, PerformanceMetric::Mse | PerformanceMetric::Ser4Qam)
    }

    pub fn name(&self) -> &'static str {
        match self {
            PerformanceMetric::Rate => "rate",
            PerformanceMetric::Mse => "mse",
            PerformanceMetric::Ser4Qam => "ser4qam",
            PerformanceMetric::Table { .. } => "table",
        }
    }

    pub fn g(&self, sinr: f64) -> Result<f64> {
        if !(sinr >= 0.0) {
            return Err(Error::NegativeSinr(sinr));
        }
        Ok(self.g_unchecked(sinr))
    }

    pub(crate) fn g_unchecked(&self, sinr: f64) -> f64 {
        let s = sinr.max(0.0);
        match self {
            PerformanceMetric::Rate => s.ln_1p() / std::f64::consts::LN_2,
            PerformanceMetric::Mse => s / (1.0 + s),
            PerformanceMetric::Ser4Qam => {
                let u = half_erf(s);
                u + u * u
            }
            PerformanceMetric::Table { sinr, value } => {
                let i = match sinr.iter().rposition(|&x| x <= s) {
                    Some(i) if i + 1 < sinr.len() => i,
                    _ => sinr.len() - 2,
                };
                let slope = (value[i + 1] - value[i]) / (sinr[i + 1] - sinr[i]);
                value[i] + slope * (s - sinr[i])
            }
        }
    }

    /// Raw error measure `e(s)` for metrics defined through one, else `None`.
    pub fn raw_error(&self, sinr: f64) -> Option<f64> {
        match self {
            PerformanceMetric::Mse => Some(1.0 / (1.0 + sinr.max(0.0))),
            PerformanceMetric::Ser4Qam => Some(ser_4qam(sinr.max(0.0))),
            _ => None,
        }
    }

    /// The unique SINR with `g(sinr) = value`.
    pub fn g_inverse(&self, value: f64) -> Result<f64> {
        if !(value >= 0.0) {
            return Err(Error::OutOfRange { value, sup: self.sup() });
        }
        if value == 0.0 {
            return Ok(0.0);
        }
        if value >= self.sup() {
            return Err(Error::OutOfRange { value, sup: self.sup() });
        }
        Ok(match self {
            PerformanceMetric::Rate => (value * std::f64::consts::LN_2).exp_m1(),
            PerformanceMetric::Mse => value / (1.0 - value),
            PerformanceMetric::Ser4Qam => ser_inverse(value),
            PerformanceMetric::Table { sinr, value: vals } => {
                let i = match vals.iter().rposition(|&x| x <= value) {
                    Some(i) if i + 1 < vals.len() => i,
                    _ => vals.len() - 2,
                };
                let slope = (sinr[i + 1] - sinr[i]) / (vals[i + 1] - vals[i]);
                sinr[i] + slope * (value - vals[i])
            }
        })
    }
}

// g = u + u^2 with u = erf(sqrt(s/2))/2, so u = (sqrt(1 + 4g) - 1)/2 and
// s = 2 erfinv(2u)^2. The closed form is polished by safeguarded Newton steps
// on g itself since erfinv loses accuracy near 1.
fn ser_inverse(value: f64) -> f64 {
    let u = 2.0 * value / (1.0 + (1.0 + 4.0 * value).sqrt());
    let x = erf_inv((2.0 * u).min(1.0 - f64::EPSILON));
    let mut s = 2.0 * x * x;
    let (mut lo, mut hi) = (0.0f64, 1e8f64);
    let g = |s: f64| {
        let u = half_erf(s);
        u + u * u
    };
    for _ in 0..200 {
        let gs = g(s);
        let r = gs - value;
        if r > 0.0 {
            hi = hi.min(s);
        } else {
            lo = lo.max(s);
        }
        if r.abs() <= 4.0 * f64::EPSILON * value || hi - lo <= 1e-15 * hi {
            break;
        }
        // dg/ds = (1 + 2u) * du/ds, du/ds = exp(-s/2) / (2 sqrt(2 pi s))
        let u = half_erf(s);
        let du = (-0.5 * s).exp() / (2.0 * (2.0 * std::f64::consts::PI * s).sqrt());
        let slope = (1.0 + 2.0 * u) * du;
        let next = s - r / slope;
        s = if slope.is_finite() && slope > 0.0 && next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_values() {
        let m = PerformanceMetric::Rate;
        assert_eq!(m.g(1.0).unwrap(), 1.0);
        assert_eq!(m.g(0.0).unwrap(), 0.0);
        assert!((m.g_inverse(1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mse_values() {
        let m = PerformanceMetric::Mse;
        assert!((m.g(3.0).unwrap() - 0.75).abs() < 1e-15);
        assert!((m.g_inverse(0.75).unwrap() - 3.0).abs() < 1e-12);
        assert!(matches!(m.g_inverse(1.0), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn ser_round_trip_at_two() {
        let m = PerformanceMetric::Ser4Qam;
        let v = m.g(2.0).unwrap();
        assert!((m.g_inverse(v).unwrap() - 2.0).abs() < 1e-8);
    }

    #[test]
    fn ser_zero_sinr_is_three_quarters() {
        assert_eq!(ser_4qam(0.0), 0.75);
        // 2Q(1) - Q(1)^2 with Q(1) = 0.15865525393145707
        let q: f64 = 0.15865525393145707;
        assert!((ser_4qam(1.0) - (2.0 * q - q * q)).abs() < 1e-14, "{}", ser_4qam(1.0));
    }

    #[test]
    fn negative_sinr_rejected() {
        assert!(matches!(PerformanceMetric::Rate.g(-1.0), Err(Error::NegativeSinr(_))));
    }

    #[test]
    fn table_interpolates_and_inverts() {
        let m = PerformanceMetric::table(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 3.0]).unwrap();
        assert_eq!(m.g(0.5).unwrap(), 1.0);
        assert_eq!(m.g(2.0).unwrap(), 2.5);
        assert_eq!(m.g(5.0).unwrap(), 4.0);
        assert_eq!(m.g_inverse(2.5).unwrap(), 2.0);
        assert_eq!(m.g_inverse(4.0).unwrap(), 5.0);
        assert!(PerformanceMetric::table(vec![0.0, 1.0], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn json_descriptors() {
        let m: PerformanceMetric = serde_json::from_str(r#"{"metric":"ser4qam"}"#).unwrap();
        assert_eq!(m, PerformanceMetric::Ser4Qam);
        let m: PerformanceMetric = serde_json::from_str(r#"{"metric":"mse"}"#).unwrap();
        assert_eq!(m, PerformanceMetric::Mse);
        assert_eq!(serde_json::to_string(&PerformanceMetric::Rate).unwrap(), r#"{"metric":"rate"}"#);
    }

    fn grid(hi: f64) -> Vec<f64> {
        let n = 241;
        (0..n)
            .map(|i| 10f64.powf(-6.0 + (hi.log10() + 6.0) * i as f64 / (n - 1) as f64))
            .collect()
    }

    #[test]
    fn strictly_increasing_and_round_trip() {
        // SER saturates at 3/4 in double precision beyond roughly s = 30
        for (m, hi) in [
            (PerformanceMetric::Rate, 1e6),
            (PerformanceMetric::Mse, 1e6),
            (PerformanceMetric::Ser4Qam, 20.0),
        ] {
            let xs = grid(hi);
            let gs: Vec<f64> = xs.iter().map(|&x| m.g(x).unwrap()).collect();
            assert!(gs.windows(2).all(|w| w[1] > w[0]), "{m:?} not increasing");
            for (&x, &g) in xs.iter().zip(&gs) {
                let back = m.g_inverse(g).unwrap();
                assert!((back - x).abs() <= 1e-8 * x, "{m:?}: {x} -> {back}");
            }
        }
    }

    #[test]
    fn ser_error_strictly_decreasing() {
        let xs = grid(20.0);
        let es: Vec<f64> = xs.iter().map(|&x| ser_4qam(x)).collect();
        assert!(es.windows(2).all(|w| w[1] < w[0]));
    }
}
