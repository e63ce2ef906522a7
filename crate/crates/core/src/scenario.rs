//! Scenario files: JSON schema with explicit units in field names, schema
//! validation, default filling, and construction of the derived models
//! (power network, per-retailer cost networks, market parameters, grid
//! dynamics, demand model).

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::griddyn::{GridModel, NodeDynParams};
use crate::market::{ConsumerParams, MarketParams, RetailerParams};
use crate::netgraph::{build_cost_network, CostNetwork, CostParams, PowerNetwork, Role};
use crate::risk::{ConsumerDemandModel, DemandModel, DEFAULT_N_SAMPLES, DEFAULT_Q};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub name: String,
    pub role: Role,
    pub shunt_ohm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSpec {
    pub a: String,
    pub b: String,
    pub resistance_ohm: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSpec {
    pub gamma: f64,
    pub xi: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetailerSpec {
    pub node: String,
    pub alpha_r: f64,
    pub kappa_r: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub p_max_w: f64,
    #[serde(default = "default_alpha_loss")]
    pub alpha_loss: f64,
    pub cost: CostSpec,
}

fn default_alpha_loss() -> f64 {
    0.05
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsumerSpec {
    pub node: String,
    pub alpha_b: f64,
    #[serde(default)]
    pub zeta_min_w: f64,
    pub zeta_max_w: f64,
    pub p_rated_w: f64,
}

/// Droop gain / RHS gain selection: the published rules or explicit values.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum GainRule {
    /// k_i = 0.05 V*/P_rated; c_i = π ΔV / (0.1 k_i P_rated)
    Rated,
    Uniform { value: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSpec {
    #[serde(default = "default_tau_v")]
    pub tau_v_s: f64,
    #[serde(default = "default_tau_load")]
    pub tau_load_s: f64,
    #[serde(default = "default_v_star")]
    pub v_star: f64,
    #[serde(default = "default_delta_v")]
    pub delta_v: f64,
    #[serde(default = "default_gain_rule")]
    pub k_rule: GainRule,
    #[serde(default = "default_gain_rule")]
    pub c_rule: GainRule,
}

fn default_tau_v() -> f64 {
    0.1
}
fn default_tau_load() -> f64 {
    3.0
}
fn default_v_star() -> f64 {
    220.0
}
fn default_delta_v() -> f64 {
    11.0
}
fn default_gain_rule() -> GainRule {
    GainRule::Rated
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingSpec {
    #[serde(default = "default_game_period")]
    pub game_period_s: f64,
    #[serde(default = "default_horizon")]
    pub horizon_s: f64,
    #[serde(default = "default_step")]
    pub step_s: f64,
}

fn default_game_period() -> f64 {
    10.0
}
fn default_horizon() -> f64 {
    300.0
}
fn default_step() -> f64 {
    2.5e-4
}

impl Default for TimingSpec {
    fn default() -> Self {
        Self {
            game_period_s: default_game_period(),
            horizon_s: default_horizon(),
            step_s: default_step(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskSpec {
    /// σ of each consumer's comfort coefficient, as a fraction of its mean
    #[serde(default = "default_sigma_frac")]
    pub sigma_frac: f64,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_sigma_frac() -> f64 {
    0.05
}
fn default_q() -> f64 {
    DEFAULT_Q
}
fn default_n_samples() -> usize {
    DEFAULT_N_SAMPLES
}
fn default_seed() -> u64 {
    42
}

impl Default for RiskSpec {
    fn default() -> Self {
        Self {
            sigma_frac: default_sigma_frac(),
            q: default_q(),
            n_samples: default_n_samples(),
            seed: default_seed(),
        }
    }
}

/// The on-disk scenario schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub nodes: Vec<NodeSpec>,
    pub lines: Vec<LineSpec>,
    pub retailers: Vec<RetailerSpec>,
    pub consumers: Vec<ConsumerSpec>,
    /// absent → market-only scenario (no physics between rounds)
    #[serde(default)]
    pub dynamics: Option<DynamicsSpec>,
    #[serde(default)]
    pub timing: TimingSpec,
    #[serde(default)]
    pub risk: RiskSpec,
    #[serde(default = "default_shapley_samples")]
    pub shapley_samples: usize,
}

fn default_shapley_samples() -> usize {
    20_000
}

/// A validated scenario with all derived models resolved to node indices.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub net: PowerNetwork,
    pub market: MarketParams,
    pub cost_params: BTreeMap<usize, CostParams>,
    pub cost_networks: BTreeMap<usize, CostNetwork>,
    pub dyn_params: Option<Vec<NodeDynParams>>,
}

impl Scenario {
    pub fn from_config(config: ScenarioConfig) -> Result<Self> {
        let names: Vec<String> = config.nodes.iter().map(|n| n.name.clone()).collect();
        {
            let mut seen = BTreeSet::new();
            for n in &names {
                if !seen.insert(n.clone()) {
                    return Err(Error::InvalidScenario(format!("duplicate node name {n}")));
                }
            }
        }
        let roles: Vec<Role> = config.nodes.iter().map(|n| n.role).collect();
        let shunts: Vec<f64> = config.nodes.iter().map(|n| n.shunt_ohm).collect();
        let index = |name: &str| -> Result<usize> {
            names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::InvalidScenario(format!("unknown node {name}")))
        };
        let mut lines = BTreeMap::new();
        for l in &config.lines {
            let (mut i, mut j) = (index(&l.a)?, index(&l.b)?);
            if i == j {
                return Err(Error::InvalidScenario(format!("self-loop at {}", l.a)));
            }
            if i > j {
                std::mem::swap(&mut i, &mut j);
            }
            if lines.insert((i, j), l.resistance_ohm).is_some() {
                return Err(Error::InvalidScenario(format!(
                    "duplicate line {}–{}",
                    l.a, l.b
                )));
            }
        }
        let net = PowerNetwork::new(names.clone(), roles, lines, shunts)?;

        let mut retailers = BTreeMap::new();
        let mut cost_params = BTreeMap::new();
        for r in &config.retailers {
            let id = index(&r.node)?;
            if net.role(id) != Role::Retailer {
                return Err(Error::InvalidScenario(format!(
                    "{} is not a retailer node",
                    r.node
                )));
            }
            let rp = RetailerParams {
                id,
                alpha_r: r.alpha_r,
                kappa_r: r.kappa_r,
                lambda_min: r.lambda_min,
                lambda_max: r.lambda_max,
                p_max_w: r.p_max_w,
                alpha_loss: r.alpha_loss,
            };
            rp.validate()?;
            let cp = CostParams {
                gamma: r.cost.gamma,
                xi: r.cost.xi,
                beta: r.cost.beta,
            };
            cp.validate()?;
            if retailers.insert(id, rp).is_some() {
                return Err(Error::InvalidScenario(format!(
                    "retailer {} specified twice",
                    r.node
                )));
            }
            cost_params.insert(id, cp);
        }
        let mut consumers = BTreeMap::new();
        for c in &config.consumers {
            let id = index(&c.node)?;
            if net.role(id) != Role::Consumer {
                return Err(Error::InvalidScenario(format!(
                    "{} is not a consumer node",
                    c.node
                )));
            }
            let cp = ConsumerParams {
                id,
                alpha_b: c.alpha_b,
                zeta_min_w: c.zeta_min_w,
                zeta_max_w: c.zeta_max_w,
                p_rated_w: c.p_rated_w,
            };
            cp.validate()?;
            if consumers.insert(id, cp).is_some() {
                return Err(Error::InvalidScenario(format!(
                    "consumer {} specified twice",
                    c.node
                )));
            }
        }
        for r in net.retailers() {
            if !retailers.contains_key(&r) {
                return Err(Error::InvalidScenario(format!(
                    "retailer node {} has no market parameters",
                    net.name(r)
                )));
            }
        }
        for b in net.consumers() {
            if !consumers.contains_key(&b) {
                return Err(Error::InvalidScenario(format!(
                    "consumer node {} has no market parameters",
                    net.name(b)
                )));
            }
        }

        let timing = &config.timing;
        if !(timing.step_s > 0.0 && timing.game_period_s > 0.0 && timing.horizon_s > 0.0) {
            return Err(Error::InvalidScenario(
                "timing values must be positive".into(),
            ));
        }
        let steps_per_round = timing.game_period_s / timing.step_s;
        if (steps_per_round - steps_per_round.round()).abs() > 1e-9 * steps_per_round {
            return Err(Error::InvalidScenario(
                "game_period_s must be a multiple of step_s".into(),
            ));
        }
        if !(config.risk.sigma_frac >= 0.0
            && config.risk.q > 0.0
            && config.risk.q < 1.0
            && config.risk.n_samples >= 2)
        {
            return Err(Error::InvalidScenario("risk settings out of range".into()));
        }

        let mut cost_networks = BTreeMap::new();
        for (&r, &cp) in &cost_params {
            cost_networks.insert(r, build_cost_network(&net, r, cp)?);
        }

        let dyn_params = match &config.dynamics {
            None => None,
            Some(d) => {
                let mut per_node = Vec::with_capacity(net.len());
                for i in 0..net.len() {
                    let rated = match net.role(i) {
                        Role::Retailer => retailers[&i].p_max_w,
                        Role::Consumer => consumers[&i].p_rated_w,
                    };
                    let k = match d.k_rule {
                        GainRule::Rated => 0.05 * d.v_star / rated,
                        GainRule::Uniform { value } => value,
                    };
                    let c = match d.c_rule {
                        GainRule::Rated => {
                            std::f64::consts::PI * d.delta_v / (0.1 * k * rated)
                        }
                        GainRule::Uniform { value } => value,
                    };
                    let p = NodeDynParams {
                        tau_v_s: d.tau_v_s,
                        k_v_per_w: k,
                        c_gain: c,
                        v_star: d.v_star,
                        delta_v: d.delta_v,
                        tau_load_s: match net.role(i) {
                            Role::Consumer => Some(d.tau_load_s),
                            Role::Retailer => None,
                        },
                    };
                    p.validate()?;
                    per_node.push(p);
                }
                Some(per_node)
            }
        };

        let market = MarketParams {
            retailers,
            consumers,
            shapley_seed: config.risk.seed,
            shapley_samples: config.shapley_samples,
        };

        Ok(Self {
            config,
            net,
            market,
            cost_params,
            cost_networks,
            dyn_params,
        })
    }

    /// Grid dynamics model, if the scenario defines physics.
    pub fn grid_model(&self) -> Result<Option<GridModel>> {
        let Some(params) = &self.dyn_params else {
            return Ok(None);
        };
        let model = GridModel::new(
            self.net.conductance_matrix(),
            params.clone(),
            self.net.consumers(),
        )?;
        Ok(Some(model))
    }

    /// Stochastic comfort-coefficient model over the scenario consumers.
    pub fn demand_model(&self) -> DemandModel {
        DemandModel {
            consumers: self
                .market
                .consumers
                .iter()
                .map(|(&b, cp)| {
                    (
                        b,
                        ConsumerDemandModel {
                            mu_alpha: cp.alpha_b,
                            sigma_alpha: self.config.risk.sigma_frac * cp.alpha_b,
                            p_min_w: cp.zeta_min_w,
                            p_max_w: cp.zeta_max_w,
                        },
                    )
                })
                .collect(),
        }
    }

    /// The config with all defaults filled, as written into run artifacts.
    pub fn config_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.config)?)
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    let config: ScenarioConfig = serde_json::from_str(&text)?;
    Scenario::from_config(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> serde_json::Value {
        serde_json::json!({
            "name": "two-node",
            "nodes": [
                {"name": "r1", "role": "retailer", "shunt_ohm": 150.0},
                {"name": "b1", "role": "consumer", "shunt_ohm": 120.0}
            ],
            "lines": [{"a": "r1", "b": "b1", "resistance_ohm": 0.6}],
            "retailers": [{
                "node": "r1", "alpha_r": 1e-4, "kappa_r": 65.0,
                "lambda_min": 0.01, "lambda_max": 4.0, "p_max_w": 30000.0,
                "cost": {"gamma": 120.0, "xi": 40.0, "beta": 2.0}
            }],
            "consumers": [{
                "node": "b1", "alpha_b": 1800.0, "zeta_max_w": 6000.0,
                "p_rated_w": 3000.0
            }]
        })
    }

    fn load(v: serde_json::Value) -> Result<Scenario> {
        let config: ScenarioConfig = serde_json::from_value(v).map_err(Error::from)?;
        Scenario::from_config(config)
    }

    #[test]
    fn minimal_scenario_loads_with_defaults() {
        let s = load(minimal_json()).unwrap();
        assert_eq!(s.net.len(), 2);
        assert_eq!(s.config.timing.game_period_s, 10.0);
        assert_eq!(s.config.risk.n_samples, DEFAULT_N_SAMPLES);
        assert!(s.dyn_params.is_none());
        assert!(s.grid_model().unwrap().is_none());
        // alpha_loss default echoed into params
        assert_eq!(s.market.retailers.values().next().unwrap().alpha_loss, 0.05);
    }

    #[test]
    fn missing_field_is_named() {
        let mut v = minimal_json();
        v["retailers"][0].as_object_mut().unwrap().remove("kappa_r");
        let err = load(v).unwrap_err().to_string();
        assert!(err.contains("kappa_r"), "{err}");
    }

    #[test]
    fn unknown_node_rejected() {
        let mut v = minimal_json();
        v["lines"][0]["a"] = "zz".into();
        assert!(load(v).is_err());
    }

    #[test]
    fn beta_equal_xi_rejected() {
        let mut v = minimal_json();
        v["retailers"][0]["cost"]["beta"] = 40.0.into();
        assert!(load(v).is_err());
    }

    #[test]
    fn period_must_divide_into_steps() {
        let mut v = minimal_json();
        v["timing"] = serde_json::json!({"game_period_s": 1.0, "step_s": 0.3});
        assert!(load(v).is_err());
    }

    #[test]
    fn rated_gain_rules() {
        let mut v = minimal_json();
        v["dynamics"] = serde_json::json!({});
        let s = load(v).unwrap();
        let params = s.dyn_params.unwrap();
        // consumer: k = 0.05·220/3000, c = π·11/(0.1·k·3000) = 10π
        let k = 0.05 * 220.0 / 3000.0;
        assert!((params[1].k_v_per_w - k).abs() < 1e-15);
        assert!((params[1].c_gain - 10.0 * std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(params[1].tau_load_s, Some(3.0));
        assert_eq!(params[0].tau_load_s, None);
    }

    #[test]
    fn demand_model_tracks_consumer_params() {
        let s = load(minimal_json()).unwrap();
        let dm = s.demand_model();
        let m = dm.consumers.values().next().unwrap();
        assert_eq!(m.mu_alpha, 1800.0);
        assert_eq!(m.sigma_alpha, 0.05 * 1800.0);
        assert_eq!(m.p_max_w, 6000.0);
    }

    #[test]
    fn config_json_round_trips() {
        let s = load(minimal_json()).unwrap();
        let text = s.config_json().unwrap();
        let again: ScenarioConfig = serde_json::from_str(&text).unwrap();
        let s2 = Scenario::from_config(again).unwrap();
        assert_eq!(s2.config_json().unwrap(), text);
    }
}
