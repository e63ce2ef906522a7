//! Orchestration: market round loops, the coupled market/physics run with
//! artifact persistence, consolidated analysis reports, and cost-network
//! export. All outputs are deterministic for a given scenario and seed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::coalgame::{
    check_concave_balanced, check_dhp, check_pc, check_subadditive, core_nonempty,
};
use crate::error::{Error, Result};
use crate::griddyn::{self, GridInputs, GridState, TrajectorySample};
use crate::market::{self, MarketState};
use crate::netgraph::{EdgeKind, Role};
use crate::risk;
use crate::scenario::Scenario;

/// Rounds compared for settlement and the tolerance on prices/demands.
pub const SETTLE_WINDOW: usize = 5;
pub const SETTLE_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct MarketTrace {
    /// states[0] is the initial state; one extra entry per executed round
    pub states: Vec<MarketState>,
    pub settled: bool,
}

fn states_close(a: &MarketState, b: &MarketState, tol: f64) -> bool {
    if a.assignment != b.assignment {
        return false;
    }
    let close = |x: &BTreeMap<usize, f64>, y: &BTreeMap<usize, f64>| {
        x.len() == y.len()
            && x.iter()
                .all(|(k, v)| y.get(k).is_some_and(|w| (v - w).abs() <= tol))
    };
    close(&a.prices, &b.prices) && close(&a.demands, &b.demands)
}

/// True when the last `SETTLE_WINDOW` states agree to `SETTLE_TOL`.
pub fn is_settled(states: &[MarketState]) -> bool {
    if states.len() < SETTLE_WINDOW {
        return false;
    }
    let last = &states[states.len() - 1];
    states[states.len() - SETTLE_WINDOW..]
        .iter()
        .all(|s| states_close(s, last, SETTLE_TOL))
}

/// Iterate the coalition-formation round `rounds` times from the greedy
/// initial state.
pub fn run_market(scn: &Scenario, rounds: usize) -> Result<MarketTrace> {
    let mut states = vec![MarketState::initial(&scn.market)];
    for _ in 0..rounds {
        let next = market::form_coalitions(states.last().unwrap(), &scn.market, &scn.cost_networks)?;
        states.push(next);
    }
    let settled = is_settled(&states);
    Ok(MarketTrace { states, settled })
}

/// CSV of per-round, per-node market outcomes.
pub fn market_trace_csv(scn: &Scenario, trace: &MarketTrace) -> String {
    let mut out = String::from("round,node,role,price,demand,assignment,profit,subsidy,imputation\n");
    for state in &trace.states {
        for i in 0..scn.net.len() {
            let name = scn.net.name(i);
            match scn.net.role(i) {
                Role::Retailer => {
                    let demand: f64 = state.coalition_of(i).iter().map(|b| state.demands[b]).sum();
                    let profit = state.profits.get(&i).copied().unwrap_or(0.0);
                    let _ = writeln!(
                        out,
                        "{},{},retailer,{},{},,{},,",
                        state.round, name, state.prices[&i], demand, profit
                    );
                }
                Role::Consumer => {
                    let assignment = state.assignment.get(&i);
                    let price = assignment.map(|r| state.prices[r]);
                    let subsidy = assignment.and_then(|r| {
                        state.subsidies_announced.get(r).and_then(|m| m.get(&i))
                    });
                    let _ = writeln!(
                        out,
                        "{},{},consumer,{},{},{},{},{},{}",
                        state.round,
                        name,
                        price.map(|p| p.to_string()).unwrap_or_default(),
                        state.demands.get(&i).copied().unwrap_or(0.0),
                        assignment.map(|r| scn.net.name(*r)).unwrap_or(""),
                        state.profits.get(&i).copied().unwrap_or(0.0),
                        subsidy.map(|s| s.to_string()).unwrap_or_default(),
                        state
                            .imputations_paid
                            .get(&i)
                            .map(|v| v.to_string())
                            .unwrap_or_default(),
                    );
                }
            }
        }
    }
    out
}

/// Grid inputs implied by a settled round: retailers supply their coalition
/// demand plus losses, consumers sink their own demand through the lag.
pub fn grid_inputs_of(scn: &Scenario, state: &MarketState) -> GridInputs {
    let mut inputs = GridInputs::default();
    for (&r, rp) in &scn.market.retailers {
        let total: f64 = state.coalition_of(r).iter().map(|b| state.demands[b]).sum();
        inputs
            .retailer_set_points
            .insert(r, (1.0 + rp.alpha_loss) * total);
    }
    for &b in scn.market.consumers.keys() {
        inputs
            .consumer_demands
            .insert(b, state.demands.get(&b).copied().unwrap_or(0.0));
    }
    inputs
}

#[derive(Debug, Clone)]
pub struct CoupledRun {
    pub market: MarketTrace,
    pub trajectory: Vec<TrajectorySample>,
    pub final_state: GridState,
}

/// Alternate market rounds (every game period) with ODE integration of the
/// grid in between. `decimation_s` controls trajectory sampling density.
pub fn run_coupled_sim(scn: &Scenario, decimation_s: f64) -> Result<CoupledRun> {
    let model = scn
        .grid_model()?
        .ok_or_else(|| Error::InvalidScenario("scenario has no dynamics section".into()))?;
    let timing = &scn.config.timing;
    let h = timing.step_s;
    let rounds = (timing.horizon_s / timing.game_period_s).ceil() as usize;
    let sample_every = (decimation_s / h).round().max(1.0) as usize;

    let mut market_states = vec![MarketState::initial(&scn.market)];
    let mut grid = model.flat_state(&GridInputs::default());
    let mut trajectory = Vec::new();
    for k in 0..rounds {
        let next =
            market::form_coalitions(market_states.last().unwrap(), &scn.market, &scn.cost_networks)?;
        let inputs = grid_inputs_of(scn, &next);
        market_states.push(next);
        let t_end = (k as f64 + 1.0) * timing.game_period_s;
        let steps = ((t_end - grid.time) / h).round() as usize;
        for step in 1..=steps {
            grid = griddyn::step_rk4(&model, &grid, &inputs, h)?;
            if step % sample_every == 0 || step == steps {
                trajectory.push(griddyn::sample_of(&model, &grid, &inputs));
            }
        }
    }
    let settled = is_settled(&market_states);
    Ok(CoupledRun {
        market: MarketTrace {
            states: market_states,
            settled,
        },
        trajectory,
        final_state: grid,
    })
}

pub fn trajectory_csv(scn: &Scenario, samples: &[TrajectorySample]) -> String {
    let mut out = String::from("time,node,voltage,injection,set_point\n");
    for s in samples {
        for i in 0..scn.net.len() {
            // the `+ 0.0` normalizes negative zero before formatting
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                s.time,
                scn.net.name(i),
                s.voltages[i] + 0.0,
                s.injections[i] + 0.0,
                s.set_points[i] + 0.0
            );
        }
    }
    out
}

/// Game-theoretic report for the partition implied by a settled state.
fn game_report(scn: &Scenario, state: &MarketState) -> Result<serde_json::Value> {
    let mut per_retailer = serde_json::Map::new();
    let partition = market::partition_of(state, &scn.market, &scn.cost_networks)?;
    for c in &partition.coalitions {
        let cn = &scn.cost_networks[&c.retailer];
        let members = c.members();
        let entry = if c.consumers.is_empty() {
            json!({
                "coalition": Vec::<String>::new(),
                "value": 0.0,
                "mst_cost": 0.0,
            })
        } else {
            let (core_ok, witness) = core_nonempty(&members, cn)?;
            json!({
                "coalition": c.consumers.iter().map(|&b| scn.net.name(b)).collect::<Vec<_>>(),
                "value": c.value,
                "mst_cost": c.mst_cost,
                "shapley": c.imputation.iter()
                    .map(|(&b, &v)| (scn.net.name(b).to_string(), v))
                    .collect::<BTreeMap<_, _>>(),
                "pc": check_pc(&members, cn)?,
                "core_nonempty": core_ok,
                "core_witness": witness.map(|w| w.iter()
                    .map(|(&n, &v)| (scn.net.name(n).to_string(), v))
                    .collect::<BTreeMap<_, _>>()),
            })
        };
        per_retailer.insert(scn.net.name(c.retailer).to_string(), entry);
    }
    let dhp = check_dhp(&partition, &scn.cost_networks, scn.config.risk.seed);
    Ok(json!({
        "per_retailer": per_retailer,
        "subadditive": check_subadditive(&partition, &scn.cost_networks),
        "concave_balanced": check_concave_balanced(&partition, &scn.cost_networks),
        "dhp": { "holds": dhp.holds, "coverage": dhp.coverage },
    }))
}

fn risk_report(scn: &Scenario, state: &MarketState) -> Result<serde_json::Value> {
    let model = scn.demand_model();
    let rcfg = &scn.config.risk;
    let mut per_retailer = serde_json::Map::new();
    for (&r, rp) in &scn.market.retailers {
        let consumers = state.coalition_of(r);
        if consumers.is_empty() {
            per_retailer.insert(scn.net.name(r).to_string(), json!(null));
            continue;
        }
        let lambda = state.prices[&r];
        let cn = &scn.cost_networks[&r];
        let dist =
            risk::sample_coalition_demand(&model, &consumers, lambda, rcfg.n_samples, rcfg.seed)?;
        let delta = risk::dispersion_reduction(
            &model, &consumers, lambda, rcfg.q, rcfg.n_samples, rcfg.seed,
        )?;
        let subsidies: BTreeMap<usize, f64> = consumers
            .iter()
            .map(|&b| (b, state.imputations_paid.get(&b).copied().unwrap_or(0.0)))
            .collect();
        let profit = risk::expected_coalition_profit(
            &model, &consumers, lambda, rp, cn, &subsidies, rcfg.n_samples, rcfg.seed,
        )?;
        let fraction = risk::check_risk_sharing(
            &model, r, &consumers, lambda, rp, cn, rcfg.n_samples, rcfg.seed,
        )?;
        per_retailer.insert(
            scn.net.name(r).to_string(),
            json!({
                "mean_w": dist.mean(),
                "std_w": dist.std(),
                "cvar_deviation_w": dist.cvar_deviation(rcfg.q),
                "dispersion_reduction_w": delta,
                "expected_profit": profit,
                "risk_sharing_fraction": fraction,
            }),
        );
    }
    Ok(json!({ "q": rcfg.q, "n_samples": rcfg.n_samples, "per_retailer": per_retailer }))
}

/// One consolidated report: settled game properties, grid stability
/// certificate, and risk metrics.
pub fn analyze(scn: &Scenario, rounds: usize) -> Result<serde_json::Value> {
    let trace = run_market(scn, rounds)?;
    let state = trace.states.last().unwrap();
    let stability = match (&scn.dyn_params, scn.grid_model()?) {
        (Some(params), Some(_)) => {
            serde_json::to_value(griddyn::gershgorin_check(&scn.net, params))?
        }
        _ => serde_json::Value::Null,
    };
    Ok(json!({
        "scenario": scn.config.name,
        "settled": trace.settled,
        "rounds": trace.states.len() - 1,
        "game": game_report(scn, state)?,
        "stability": stability,
        "risk": risk_report(scn, state)?,
    }))
}

/// CSV of every retailer's cost network.
pub fn costnet_csv(scn: &Scenario) -> String {
    let mut out = String::from("retailer,node_a,node_b,weight,kind\n");
    for (&r, cn) in &scn.cost_networks {
        for (i, j, w) in cn.edges() {
            let kind = match cn.kind(i, j) {
                EdgeKind::Direct => "direct",
                EdgeKind::Aggregate => "aggregate",
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                scn.net.name(r),
                scn.net.name(i),
                scn.net.name(j),
                w,
                kind
            );
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct RunArtifact {
    pub out_dir: PathBuf,
    pub config: PathBuf,
    pub market_trace: PathBuf,
    pub trajectory: PathBuf,
    pub verifier_report: PathBuf,
    pub risk_report: PathBuf,
    pub metadata: PathBuf,
}

/// Execute the coupled run and persist every artifact under `out_dir`.
/// Outputs are byte-identical across runs with the same scenario and seed.
pub fn run_coupled(scn: &Scenario, out_dir: &Path) -> Result<RunArtifact> {
    std::fs::create_dir_all(out_dir)?;
    let run = run_coupled_sim(scn, 0.01)?;
    let settled_state = run.market.states.last().unwrap();

    let artifact = RunArtifact {
        out_dir: out_dir.to_path_buf(),
        config: out_dir.join("config.json"),
        market_trace: out_dir.join("market_trace.csv"),
        trajectory: out_dir.join("trajectory.csv"),
        verifier_report: out_dir.join("verifier_report.json"),
        risk_report: out_dir.join("risk_report.json"),
        metadata: out_dir.join("metadata.json"),
    };
    std::fs::write(&artifact.config, scn.config_json()?)?;
    std::fs::write(&artifact.market_trace, market_trace_csv(scn, &run.market))?;
    std::fs::write(&artifact.trajectory, trajectory_csv(scn, &run.trajectory))?;

    let stability = scn
        .dyn_params
        .as_ref()
        .map(|p| griddyn::gershgorin_check(&scn.net, p));
    let band_ok = run.trajectory.iter().all(|s| {
        s.voltages.iter().enumerate().all(|(i, &v)| {
            let p = &scn.dyn_params.as_ref().unwrap()[i];
            (v - p.v_star).abs() <= p.delta_v
        })
    });
    let verifier = json!({
        "game": game_report(scn, settled_state)?,
        "gershgorin": serde_json::to_value(stability)?,
        "voltage_band_ok": band_ok,
        "market_settled": run.market.settled,
        "deviation_free": market::stackelberg_deviation_ok(
            settled_state, &scn.market, &scn.cost_networks, 200, 1e-6),
    });
    std::fs::write(
        &artifact.verifier_report,
        serde_json::to_string_pretty(&verifier)?,
    )?;
    std::fs::write(
        &artifact.risk_report,
        serde_json::to_string_pretty(&risk_report(scn, settled_state)?)?,
    )?;
    let metadata = json!({
        "scenario": scn.config.name,
        "seed": scn.config.risk.seed,
        "version": env!("CARGO_PKG_VERSION"),
        "rounds": run.market.states.len() - 1,
        "horizon_s": scn.config.timing.horizon_s,
        "step_s": scn.config.timing.step_s,
    });
    std::fs::write(&artifact.metadata, serde_json::to_string_pretty(&metadata)?)?;
    Ok(artifact)
}

/// Profit of each consumer at the last state of a trace.
pub fn settled_consumer_profits(scn: &Scenario, trace: &MarketTrace) -> BTreeMap<String, f64> {
    let state = trace.states.last().unwrap();
    scn.market
        .consumers
        .keys()
        .map(|&b| {
            (
                scn.net.name(b).to_string(),
                state.profits.get(&b).copied().unwrap_or(0.0),
            )
        })
        .collect()
}

/// Quick sanity proxy used in tests: every coalition respects capacity.
pub fn capacity_respected(scn: &Scenario, state: &MarketState) -> bool {
    scn.market.retailers.iter().all(|(&r, rp)| {
        let total: f64 = state.coalition_of(r).iter().map(|b| state.demands[b]).sum();
        market::capacity_ok(total, rp)
    })
}
