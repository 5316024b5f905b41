//! Diurnal traffic: a sum of sinusoids around a base level, with
//! multiplicative lognormal noise targeted at that mean.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::seed;
use crate::topology::{NodeId, Topology};

#[derive(Debug, thiserror::Error)]
pub enum TrafficError {
    #[error("mean profile is not positive at sample {t}: {value}")]
    NonPositiveMean { t: usize, value: f64 },
    #[error("invalid traffic parameters: {0}")]
    InvalidParams(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub beta: f64,
    /// Radians per sample.
    pub omega: f64,
    pub phi: f64,
}

/// Parameters of one flow's traffic process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficParams {
    pub alpha: f64,
    pub components: Vec<Component>,
    pub samples_per_period: usize,
    /// Coefficient of variation of the lognormal noise.
    pub cv: f64,
    pub base_value: f64,
}

impl TrafficParams {
    pub fn validate(&self) -> Result<(), TrafficError> {
        if self.components.is_empty() {
            return Err(TrafficError::InvalidParams("at least one sinusoid is required".into()));
        }
        if self.samples_per_period < 2 {
            return Err(TrafficError::InvalidParams("samples_per_period must be >= 2".into()));
        }
        if !(self.cv >= 0.0) || !self.cv.is_finite() {
            return Err(TrafficError::InvalidParams(format!("cv must be >= 0, got {}", self.cv)));
        }
        if !(self.base_value > 0.0) {
            return Err(TrafficError::InvalidParams(format!("base_value must be > 0, got {}", self.base_value)));
        }
        for t in 0..self.samples_per_period {
            let value = mean_profile(t, self);
            if !(value > 0.0) {
                return Err(TrafficError::NonPositiveMean { t, value });
            }
        }
        Ok(())
    }
}

/// `alpha + sum_k beta_k * sin(omega_k * t + phi_k)`, evaluated at
/// `t mod samples_per_period` so the profile is exactly periodic.
pub fn mean_profile(t: usize, p: &TrafficParams) -> f64 {
    let t = (t % p.samples_per_period) as f64;
    p.alpha + p.components.iter().map(|c| c.beta * (c.omega * t + c.phi).sin()).sum::<f64>()
}

/// Draws `periods` full periods of a flow. Each sample is lognormal with
/// mean `base_value * mean_profile(t)` and standard deviation `cv` times
/// that mean; with `cv == 0` the mean itself is returned.
pub fn generate_series(rng_seed: u64, p: &TrafficParams, periods: usize) -> Result<Vec<f64>, TrafficError> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let sigma2 = (1.0 + p.cv * p.cv).ln();
    let n = periods * p.samples_per_period;
    let mut values = Vec::with_capacity(n);
    for t in 0..n {
        let m = p.base_value * mean_profile(t, p);
        if p.cv == 0.0 {
            values.push(m);
        } else {
            let dist = LogNormal::new(m.ln() - sigma2 / 2.0, sigma2.sqrt()).map_err(|e| TrafficError::InvalidParams(e.to_string()))?;
            values.push(dist.sample(&mut rng));
        }
    }
    Ok(values)
}

/// Ranges the per-flow parameters are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficProfile {
    pub alpha: f64,
    /// `[lo, hi]` amplitude range per sinusoid; the k-th entry has
    /// `omega = 2*pi*(k+1) / samples_per_period`.
    pub beta_ranges: Vec<(f64, f64)>,
    pub samples_per_period: usize,
    pub cv: f64,
    pub flows_per_pair: (usize, usize),
    pub value_range: (u32, u32),
}

impl Default for TrafficProfile {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta_ranges: vec![(0.2, 0.5), (0.05, 0.2)],
            samples_per_period: 24,
            cv: 0.1,
            flows_per_pair: (1, 3),
            value_range: (1, 100),
        }
    }
}

impl TrafficProfile {
    fn draw_params(&self, rng: &mut impl Rng) -> TrafficParams {
        let base_value = rng.gen_range(self.value_range.0..=self.value_range.1) as f64;
        let components = self
            .beta_ranges
            .iter()
            .enumerate()
            .map(|(k, &(lo, hi))| Component {
                beta: if hi > lo { rng.gen_range(lo..hi) } else { lo },
                omega: 2.0 * PI * (k + 1) as f64 / self.samples_per_period as f64,
                phi: rng.gen_range(0.0..2.0 * PI),
            })
            .collect();
        TrafficParams { alpha: self.alpha, components, samples_per_period: self.samples_per_period, cv: self.cv, base_value }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSeries {
    pub base: f64,
    pub params: TrafficParams,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SfcTraffic {
    pub src: NodeId,
    pub dst: NodeId,
    pub flows: Vec<FlowSeries>,
}

impl SfcTraffic {
    pub fn total_at(&self, t: usize) -> f64 {
        self.flows.iter().map(|f| f.values[t]).sum()
    }
}

/// One SFC per ordered pair of non-cloud nodes with its flows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandSet {
    pub seed: u64,
    pub periods: usize,
    pub params: TrafficProfile,
    pub sfcs: Vec<SfcTraffic>,
}

impl DemandSet {
    pub fn samples_per_period(&self) -> usize {
        self.params.samples_per_period
    }

    pub fn len(&self) -> usize {
        self.periods * self.params.samples_per_period
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flow_count(&self) -> usize {
        self.sfcs.iter().map(|s| s.flows.len()).sum()
    }

    /// One row per flow: `sfc,src,dst,flow,base,v0,v1,...`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), TrafficError> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["sfc".to_string(), "src".into(), "dst".into(), "flow".into(), "base".into()];
        header.extend((0..self.len()).map(|t| format!("v{t}")));
        out.write_record(&header)?;
        for (s, sfc) in self.sfcs.iter().enumerate() {
            for (f, flow) in sfc.flows.iter().enumerate() {
                let mut row = vec![s.to_string(), sfc.src.to_string(), sfc.dst.to_string(), f.to_string(), flow.base.to_string()];
                row.extend(flow.values.iter().map(|v| v.to_string()));
                out.write_record(&row)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Generates the demand set: for every ordered non-cloud node pair, a
/// uniform number of flows in `flows_per_pair`, each with an integer base
/// value in `value_range` and independently drawn amplitudes and phases.
pub fn generate_demand_set(
    rng_seed: u64,
    topology: &Topology,
    profile: &TrafficProfile,
    periods: usize,
) -> Result<DemandSet, TrafficError> {
    let (lo, hi) = profile.flows_per_pair;
    if lo == 0 || hi < lo {
        return Err(TrafficError::InvalidParams(format!("flows_per_pair must satisfy 1 <= lo <= hi, got {lo}..{hi}")));
    }
    if profile.value_range.0 == 0 || profile.value_range.1 < profile.value_range.0 {
        return Err(TrafficError::InvalidParams("value_range must be a non-empty positive range".into()));
    }
    let edge: Vec<NodeId> = topology.edge_nodes().collect();
    let mut sfcs = Vec::new();
    for &src in &edge {
        for &dst in &edge {
            if src == dst {
                continue;
            }
            let idx = sfcs.len() as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(rng_seed, &[idx]));
            let n = rng.gen_range(lo..=hi);
            let mut flows = Vec::with_capacity(n);
            for f in 0..n {
                let params = profile.draw_params(&mut rng);
                let values = generate_series(seed::derive(rng_seed, &[idx, f as u64]), &params, periods)?;
                flows.push(FlowSeries { base: params.base_value, params, values });
            }
            sfcs.push(SfcTraffic { src, dst, flows });
        }
    }
    Ok(DemandSet { seed: rng_seed, periods, params: profile.clone(), sfcs })
}
