//! Stochastic demand modeling and risk-sharing analysis: empirical CDFs and
//! quantiles over Monte-Carlo demand draws, CVaR deviation, dispersion
//! reduction from pooling, and samplewise verification of coalitional
//! profit superadditivity.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::coalgame::coalition_value;
use crate::error::{Error, Result};
use crate::market::RetailerParams;
use crate::netgraph::CostNetwork;

pub const DEFAULT_N_SAMPLES: usize = 100_000;
pub const DEFAULT_Q: f64 = 0.05;

/// Comfort coefficients may not vanish; negative normal draws are clipped here.
const ALPHA_FLOOR: f64 = 1e-12;

/// Per-consumer stochastic comfort coefficient and demand support.
#[derive(Debug, Clone, Copy)]
pub struct ConsumerDemandModel {
    pub mu_alpha: f64,
    pub sigma_alpha: f64,
    /// demand support bounds, W
    pub p_min_w: f64,
    pub p_max_w: f64,
}

impl ConsumerDemandModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_alpha >= 0.0) {
            return Err(Error::InvalidScenario("sigma must be >= 0".into()));
        }
        if !(self.p_min_w <= self.p_max_w && self.p_min_w >= 0.0) {
            return Err(Error::InvalidScenario("demand bounds out of order".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct DemandModel {
    pub consumers: BTreeMap<usize, ConsumerDemandModel>,
}

impl DemandModel {
    pub fn validate(&self) -> Result<()> {
        for m in self.consumers.values() {
            m.validate()?;
        }
        Ok(())
    }
}

/// Optimal demand for a drawn comfort coefficient, clamped to the support.
fn demand_map(alpha: f64, lambda: f64, m: &ConsumerDemandModel) -> f64 {
    let alpha = alpha.max(ALPHA_FLOOR);
    let unclamped = (alpha / (6.0 * lambda)).powf(6.0 / 5.0);
    unclamped.clamp(m.p_min_w, m.p_max_w)
}

/// Draws `n` demand samples for one consumer from its dedicated RNG stream,
/// so the same (seed, consumer) pair always yields the same draws no matter
/// which coalition is being evaluated.
pub fn sample_consumer(
    model: &DemandModel,
    b: usize,
    lambda: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(lambda > 0.0) {
        return Err(Error::NonPositivePrice(lambda));
    }
    let m = model
        .consumers
        .get(&b)
        .ok_or_else(|| Error::InvalidScenario(format!("no demand model for consumer {b}")))?;
    m.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(b as u64 + 1);
    let normal = Normal::new(m.mu_alpha, m.sigma_alpha)
        .map_err(|e| Error::InvalidScenario(e.to_string()))?;
    Ok((0..n)
        .map(|_| demand_map(normal.sample(&mut rng), lambda, m))
        .collect())
}

/// Aggregate demand samples for a consumer set under common random numbers.
pub fn sample_coalition_demand(
    model: &DemandModel,
    consumers: &BTreeSet<usize>,
    lambda: f64,
    n: usize,
    seed: u64,
) -> Result<EmpiricalDistribution> {
    if n < 2 {
        return Err(Error::TooFewSamples(n));
    }
    let mut totals = vec![0.0; n];
    for &b in consumers {
        let draws = sample_consumer(model, b, lambda, n, seed)?;
        for (t, d) in totals.iter_mut().zip(&draws) {
            *t += d;
        }
    }
    EmpiricalDistribution::new(totals)
}

/// Equal-weight empirical distribution over finite samples.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    sorted: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::TooFewSamples(0));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidScenario("non-finite sample".into()));
        }
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(Self { sorted: samples })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.sorted.len() as f64
    }

    pub fn std(&self) -> f64 {
        let m = self.mean();
        let n = self.sorted.len();
        if n < 2 {
            return 0.0;
        }
        (self.sorted.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    }

    /// Right-continuous CDF: fraction of samples ≤ x.
    pub fn cdf(&self, x: f64) -> f64 {
        let count = self.sorted.partition_point(|&s| s <= x);
        count as f64 / self.sorted.len() as f64
    }

    /// Generalized inverse F⁻¹(p) = inf { x : F(x) ≥ p }.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.sorted.len();
        if p <= 0.0 {
            return self.sorted[0];
        }
        if p >= 1.0 {
            return self.sorted[n - 1];
        }
        let idx = (p * n as f64).ceil() as usize;
        self.sorted[idx.clamp(1, n) - 1]
    }

    /// CVaR deviation D_q = E[X] − E[X | X ≤ F⁻¹(q)] ≥ 0.
    pub fn cvar_deviation(&self, q: f64) -> f64 {
        let n = self.sorted.len();
        let tail_len = ((q * n as f64).ceil() as usize).clamp(1, n);
        let tail_mean = self.sorted[..tail_len].iter().sum::<f64>() / tail_len as f64;
        (self.mean() - tail_mean).max(0.0)
    }
}

/// Δ = Σ_b D_q(P_b) − D_q(Σ_b P_b) under common random numbers; the pooling
/// gain is nonnegative up to Monte-Carlo noise.
pub fn dispersion_reduction(
    model: &DemandModel,
    consumers: &BTreeSet<usize>,
    lambda: f64,
    q: f64,
    n: usize,
    seed: u64,
) -> Result<f64> {
    if n < 2 {
        return Err(Error::TooFewSamples(n));
    }
    let mut totals = vec![0.0; n];
    let mut individual_sum = 0.0;
    for &b in consumers {
        let draws = sample_consumer(model, b, lambda, n, seed)?;
        for (t, d) in totals.iter_mut().zip(&draws) {
            *t += d;
        }
        individual_sum += EmpiricalDistribution::new(draws)?.cvar_deviation(q);
    }
    let aggregate = EmpiricalDistribution::new(totals)?.cvar_deviation(q);
    Ok(individual_sum - aggregate)
}

/// Per-sample consumer profit at a drawn comfort coefficient (no subsidy):
/// Π_b = α ζ^{1/6} + κ_r δ_b − ω(r,b) − λ ζ.
fn base_profit(
    alpha: f64,
    zeta: f64,
    lambda: f64,
    b: usize,
    rp: &RetailerParams,
    cn: &CostNetwork,
) -> f64 {
    let omega = cn.weight(cn.owner, b).unwrap_or(0.0);
    let delta = cn.degree(b) as f64;
    alpha.max(ALPHA_FLOOR) * zeta.powf(1.0 / 6.0) + rp.kappa_r * delta - omega - lambda * zeta
}

fn sample_profits(
    model: &DemandModel,
    consumers: &BTreeSet<usize>,
    lambda: f64,
    rp: &RetailerParams,
    cn: &CostNetwork,
    n: usize,
    seed: u64,
) -> Result<Vec<BTreeMap<usize, f64>>> {
    let mut per_sample: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
    for &b in consumers {
        let m = model
            .consumers
            .get(&b)
            .ok_or_else(|| Error::InvalidScenario(format!("no demand model for consumer {b}")))?;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(b as u64 + 1);
        let normal = Normal::new(m.mu_alpha, m.sigma_alpha)
            .map_err(|e| Error::InvalidScenario(e.to_string()))?;
        for slot in per_sample.iter_mut() {
            let alpha = normal.sample(&mut rng).max(ALPHA_FLOOR);
            let zeta = demand_map(alpha, lambda, m);
            slot.insert(b, base_profit(alpha, zeta, lambda, b, rp, cn));
        }
    }
    Ok(per_sample)
}

/// Monte-Carlo mean of the coalition's consumer-side profit, with announced
/// subsidies entering as per-consumer constants.
pub fn expected_coalition_profit(
    model: &DemandModel,
    consumers: &BTreeSet<usize>,
    lambda: f64,
    rp: &RetailerParams,
    cn: &CostNetwork,
    subsidies: &BTreeMap<usize, f64>,
    n: usize,
    seed: u64,
) -> Result<f64> {
    if n < 2 {
        return Err(Error::TooFewSamples(n));
    }
    if !(lambda > 0.0) {
        return Err(Error::NonPositivePrice(lambda));
    }
    let per_sample = sample_profits(model, consumers, lambda, rp, cn, n, seed)?;
    let subsidy_total: f64 = consumers
        .iter()
        .map(|b| subsidies.get(b).copied().unwrap_or(0.0))
        .sum();
    let mean_base = per_sample
        .iter()
        .map(|s| s.values().sum::<f64>())
        .sum::<f64>()
        / n as f64;
    Ok(mean_base + subsidy_total)
}

/// Samplewise check of coalition superadditivity over pair splits with an
/// injectable value function: fraction of samples where
/// Σ_b Π_b + ν(S) ≥ Σ_b (Π_b + ν({r, b})).
pub fn check_risk_sharing_with(
    model: &DemandModel,
    retailer: usize,
    consumers: &BTreeSet<usize>,
    lambda: f64,
    rp: &RetailerParams,
    cn: &CostNetwork,
    n: usize,
    seed: u64,
    value: impl Fn(&BTreeSet<usize>) -> f64,
) -> Result<f64> {
    if n < 2 {
        return Err(Error::TooFewSamples(n));
    }
    if !(lambda > 0.0) {
        return Err(Error::NonPositivePrice(lambda));
    }
    let per_sample = sample_profits(model, consumers, lambda, rp, cn, n, seed)?;
    let mut grand: BTreeSet<usize> = consumers.clone();
    grand.insert(retailer);
    let nu_grand = value(&grand);
    let nu_pairs: f64 = consumers
        .iter()
        .map(|&b| value(&BTreeSet::from([retailer, b])))
        .sum();
    let tol = 1e-9;
    let hits = per_sample
        .iter()
        .filter(|s| {
            let base: f64 = s.values().sum();
            base + nu_grand >= base + nu_pairs - tol
        })
        .count();
    Ok(hits as f64 / n as f64)
}

/// The pair-split check with the coalition values taken from the cost network.
pub fn check_risk_sharing(
    model: &DemandModel,
    retailer: usize,
    consumers: &BTreeSet<usize>,
    lambda: f64,
    rp: &RetailerParams,
    cn: &CostNetwork,
    n: usize,
    seed: u64,
) -> Result<f64> {
    check_risk_sharing_with(model, retailer, consumers, lambda, rp, cn, n, seed, |s| {
        coalition_value(s, cn)
    })
}
