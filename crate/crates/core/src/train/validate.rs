use serde::Serialize;

use super::checkpoint::Checkpoint;
use super::dataset::Sample;
use crate::error::{Error, Result};
use crate::metrics::{json_number, MetricsReport};
use crate::mri::zero_fill_recon;
use crate::nets::{reconstruct, Variant};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Stat { mean, std: var.sqrt() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MetricStats {
    pub psnr: Stat,
    pub ssim: Stat,
    pub nmse: Stat,
}

impl MetricStats {
    fn of(reports: &[MetricsReport]) -> Self {
        let col = |f: fn(&MetricsReport) -> f64| Stat::of(&reports.iter().map(f).collect::<Vec<_>>());
        MetricStats { psnr: col(|r| r.psnr), ssim: col(|r| r.ssim), nmse: col(|r| r.nmse) }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let s = |st: &Stat| serde_json::json!({ "mean": json_number(st.mean), "std": json_number(st.std) });
        serde_json::json!({ "psnr": s(&self.psnr), "ssim": s(&self.ssim), "nmse": s(&self.nmse) })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationSummary {
    pub count: usize,
    pub network: MetricStats,
    pub zero_fill: MetricStats,
}

impl ValidationSummary {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "count": self.count, "network": self.network.to_json(), "zero_fill": self.zero_fill.to_json() })
    }
}

/// Network and zero-fill metrics over `samples`. With `expected` set, the
/// checkpoint must hold that variant.
pub fn validate(ckpt: &Checkpoint, samples: &[Sample], expected: Option<Variant>) -> Result<ValidationSummary> {
    if let Some(v) = expected {
        ckpt.expect_variant(v)?;
    }
    if samples.is_empty() {
        return Err(Error::Config("validation set is empty".into()));
    }
    let mut net = Vec::with_capacity(samples.len());
    let mut zf = Vec::with_capacity(samples.len());
    for s in samples {
        net.push(MetricsReport::compute(&s.m_ref, &reconstruct(ckpt.params(), &s.f, &s.mask)?)?);
        zf.push(MetricsReport::compute(&s.m_ref, &zero_fill_recon(&s.f, &s.mask)?)?);
    }
    Ok(ValidationSummary { count: samples.len(), network: MetricStats::of(&net), zero_fill: MetricStats::of(&zf) })
}
