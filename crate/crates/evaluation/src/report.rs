use serde::{Deserialize, Serialize};

/// The five headline metrics of one seed's run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub mae: f64,
    pub rmse: f64,
    pub smape: f64,
    /// Absent when the seasonal benchmark is degenerate.
    pub rmae: Option<f64>,
    pub mda: f64,
}

/// Multi-seed aggregation: the reported figures are plain means over seeds;
/// per-seed values are retained for provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub per_seed: Vec<SeedMetrics>,
    pub mae: f64,
    pub rmse: f64,
    pub smape: f64,
    pub rmae: Option<f64>,
    pub mda: f64,
}

impl MetricReport {
    pub fn aggregate(per_seed: Vec<SeedMetrics>) -> MetricReport {
        assert!(!per_seed.is_empty(), "aggregate of zero seeds");
        let n = per_seed.len() as f64;
        let mean = |f: fn(&SeedMetrics) -> f64| per_seed.iter().map(f).sum::<f64>() / n;
        let rmae = if per_seed.iter().all(|s| s.rmae.is_some()) {
            Some(per_seed.iter().map(|s| s.rmae.unwrap()).sum::<f64>() / n)
        } else {
            None
        };
        MetricReport {
            mae: mean(|s| s.mae),
            rmse: mean(|s| s.rmse),
            smape: mean(|s| s.smape),
            rmae,
            mda: mean(|s| s.mda),
            per_seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sm(seed: u64, base: f64) -> SeedMetrics {
        SeedMetrics {
            seed,
            mae: base,
            rmse: base * 2.0,
            smape: base / 2.0,
            rmae: Some(base / 100.0),
            mda: 50.0 + base,
        }
    }

    #[test]
    fn aggregation_is_the_mean_of_per_seed_reports() {
        let report = MetricReport::aggregate(vec![sm(1, 10.0), sm(2, 20.0), sm(3, 30.0)]);
        assert!((report.mae - 20.0).abs() < 1e-12);
        assert!((report.rmse - 40.0).abs() < 1e-12);
        assert!((report.smape - 10.0).abs() < 1e-12);
        assert!((report.rmae.unwrap() - 0.2).abs() < 1e-12);
        assert!((report.mda - 70.0).abs() < 1e-12);
        assert_eq!(report.per_seed.len(), 3);
    }

    #[test]
    fn missing_rmae_propagates_as_absent() {
        let mut seeds = vec![sm(1, 10.0), sm(2, 20.0)];
        seeds[1].rmae = None;
        let report = MetricReport::aggregate(seeds);
        assert!(report.rmae.is_none());
    }

    #[test]
    fn degenerate_identical_seeds_have_zero_variance() {
        let report = MetricReport::aggregate(vec![sm(1, 10.0), sm(2, 10.0), sm(3, 10.0)]);
        for s in &report.per_seed {
            assert_eq!(s.mae, report.mae);
        }
    }
}
