//! Market layer: profit/cost/utility functions, closed-form best responses
//! for the leader-follower pricing game, and the per-round coalition
//! formation engine with capacity-driven rejection and subsidy distribution.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::coalgame::{self, Coalition, CoalitionPartition, EXACT_SHAPLEY_CAP};
use crate::error::{Error, Result};
use crate::netgraph::CostNetwork;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RetailerParams {
    pub id: usize,
    /// generation cost curvature, currency per watt^2
    pub alpha_r: f64,
    /// subsidy scale, currency
    pub kappa_r: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// generation capacity, W
    pub p_max_w: f64,
    /// network loss coefficient in [0, 1]
    pub alpha_loss: f64,
}

impl RetailerParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.lambda_min && self.lambda_min < self.lambda_max) {
            return Err(Error::InvalidScenario(format!(
                "retailer {}: need 0 < lambda_min < lambda_max",
                self.id
            )));
        }
        if !(self.p_max_w > 0.0 && self.alpha_r > 0.0) {
            return Err(Error::InvalidScenario(format!(
                "retailer {}: p_max and alpha_r must be > 0",
                self.id
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha_loss) {
            return Err(Error::InvalidScenario(format!(
                "retailer {}: alpha_loss must lie in [0, 1]",
                self.id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConsumerParams {
    pub id: usize,
    /// utility weight for the ζ^(1/6) term
    pub alpha_b: f64,
    pub zeta_min_w: f64,
    pub zeta_max_w: f64,
    pub p_rated_w: f64,
}

impl ConsumerParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.zeta_min_w && self.zeta_min_w < self.zeta_max_w) {
            return Err(Error::InvalidScenario(format!(
                "consumer {}: need 0 <= zeta_min < zeta_max",
                self.id
            )));
        }
        if !(self.alpha_b > 0.0) {
            return Err(Error::InvalidScenario(format!(
                "consumer {}: alpha_b must be > 0",
                self.id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MarketParams {
    pub retailers: BTreeMap<usize, RetailerParams>,
    pub consumers: BTreeMap<usize, ConsumerParams>,
    /// seed for sampled Shapley when a coalition exceeds the exact cap
    pub shapley_seed: u64,
    pub shapley_samples: usize,
}

/// One settled market round.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarketState {
    pub round: u64,
    pub prices: BTreeMap<usize, f64>,
    pub demands: BTreeMap<usize, f64>,
    /// consumer → retailer
    pub assignment: BTreeMap<usize, usize>,
    pub subsidies_announced: BTreeMap<usize, BTreeMap<usize, f64>>,
    pub imputations_paid: BTreeMap<usize, f64>,
    pub profits: BTreeMap<usize, f64>,
    /// consumers that needed the livelock fallback this round
    pub fallback_assigned: BTreeSet<usize>,
}

impl MarketState {
    /// Initial state: greedy prices at λ̄, zero demand, consumers unassigned
    /// (assignment filled by the first round).
    pub fn initial(params: &MarketParams) -> Self {
        let prices = params
            .retailers
            .iter()
            .map(|(&r, rp)| (r, rp.lambda_max))
            .collect();
        let demands = params.consumers.keys().map(|&b| (b, 0.0)).collect();
        Self {
            round: 0,
            prices,
            demands,
            assignment: BTreeMap::new(),
            subsidies_announced: BTreeMap::new(),
            imputations_paid: BTreeMap::new(),
            profits: BTreeMap::new(),
            fallback_assigned: BTreeSet::new(),
        }
    }

    pub fn coalition_of(&self, r: usize) -> BTreeSet<usize> {
        self.assignment
            .iter()
            .filter(|&(_, &rr)| rr == r)
            .map(|(&b, _)| b)
            .collect()
    }
}

/// Retailer cost C(P, S_r) = α_r (λP)² + ν(S_r).
pub fn retailer_cost(
    p: f64,
    s: &BTreeSet<usize>,
    rp: &RetailerParams,
    lambda: f64,
    cn: &CostNetwork,
) -> f64 {
    rp.alpha_r * (lambda * p).powi(2) + coalgame::coalition_value(s, cn)
}

/// Consumer utility U = α_b ζ^(1/6) + κ_r δ_b^r − ω(r,b); δ_b^r is the degree
/// of `b` in the retailer's full cost network.
pub fn consumer_utility(zeta: f64, cp: &ConsumerParams, rp: &RetailerParams, cn: &CostNetwork) -> f64 {
    let omega = cn.weight(cn.owner, cp.id).unwrap_or(0.0);
    let delta = cn.degree(cp.id) as f64;
    cp.alpha_b * zeta.powf(1.0 / 6.0) + rp.kappa_r * delta - omega
}

/// Follower best response: ζ* = (α_b / 6λ)^(6/5) clamped to [ζ̲, ζ̄].
pub fn consumer_best_demand(lambda: f64, cp: &ConsumerParams) -> Result<f64> {
    if lambda <= 0.0 {
        return Err(Error::NonPositivePrice(lambda));
    }
    let stationary = (cp.alpha_b / (6.0 * lambda)).powf(6.0 / 5.0);
    Ok(stationary.clamp(cp.zeta_min_w, cp.zeta_max_w))
}

/// Leader best response given measured demand P: λ* = 1 / (2 α_r (1+α_loss)² P)
/// clamped to [λ̲, λ̄]; for P = 0 profit is flat in λ and the previous price
/// is retained.
pub fn retailer_best_price(p: f64, rp: &RetailerParams, prev_lambda: f64) -> f64 {
    if p <= 0.0 {
        return prev_lambda;
    }
    let loss = 1.0 + rp.alpha_loss;
    let stationary = 1.0 / (2.0 * rp.alpha_r * loss * loss * p);
    stationary.clamp(rp.lambda_min, rp.lambda_max)
}

/// Capacity constraint (1+α_loss)·|Σ P_b^d| ≤ P_max.
pub fn capacity_ok(total_demand: f64, rp: &RetailerParams) -> bool {
    (1.0 + rp.alpha_loss) * total_demand.abs() <= rp.p_max_w
}

/// Consumer profit Π_b = U_b(ζ, r) − λζ.
pub fn consumer_profit(
    zeta: f64,
    cp: &ConsumerParams,
    rp: &RetailerParams,
    cn: &CostNetwork,
    lambda: f64,
) -> f64 {
    consumer_utility(zeta, cp, rp, cn) - lambda * zeta
}

/// Best retailer for consumer `b` over the non-excluded retailers, honouring
/// per-retailer demand caps. Ties break toward the lowest retailer id.
/// Returns `None` when no retailer can serve the consumer.
pub fn choose_retailer(
    b: usize,
    params: &MarketParams,
    prices: &BTreeMap<usize, f64>,
    cns: &BTreeMap<usize, CostNetwork>,
    excluded: &BTreeSet<usize>,
    demand_cap: Option<&BTreeMap<usize, f64>>,
) -> Option<(usize, f64)> {
    let cp = &params.consumers[&b];
    let mut best: Option<(usize, f64, f64)> = None;
    for (&r, rp) in &params.retailers {
        if excluded.contains(&r) {
            continue;
        }
        let cap = demand_cap
            .and_then(|m| m.get(&r).copied())
            .unwrap_or(f64::INFINITY);
        let upper = cp.zeta_max_w.min(cap);
        if upper < cp.zeta_min_w {
            continue;
        }
        let lambda = prices[&r];
        let zeta = match consumer_best_demand(lambda, cp) {
            Ok(z) => z.min(upper),
            Err(_) => continue,
        };
        let profit = consumer_profit(zeta, cp, rp, &cns[&r], lambda);
        if best.map_or(true, |(_, _, p)| profit > p) {
            best = Some((r, zeta, profit));
        }
    }
    best.map(|(r, z, _)| (r, z))
}

/// Remaining serviceable demand of retailer `r` given current assignments.
fn headroom(r: usize, rp: &RetailerParams, demands: &BTreeMap<usize, f64>, assignment: &BTreeMap<usize, usize>) -> f64 {
    let assigned: f64 = assignment
        .iter()
        .filter(|&(_, &rr)| rr == r)
        .map(|(b, _)| demands[b])
        .sum();
    rp.p_max_w / (1.0 + rp.alpha_loss) - assigned
}

/// Execute one full game round: price update, broadcast, consumer choice,
/// capacity-driven rejection loop, then value/Shapley computation and subsidy
/// distribution. Deterministic.
pub fn form_coalitions(
    state: &MarketState,
    params: &MarketParams,
    cns: &BTreeMap<usize, CostNetwork>,
) -> Result<MarketState> {
    // price update on measured coalition demand
    let mut prices = BTreeMap::new();
    for (&r, rp) in &params.retailers {
        let total: f64 = state
            .assignment
            .iter()
            .filter(|&(_, &rr)| rr == r)
            .map(|(b, _)| state.demands[b])
            .sum();
        prices.insert(r, retailer_best_price(total, rp, state.prices[&r]));
    }

    // announced subsidies κ_r δ_b^r from the full cost networks
    let mut subsidies = BTreeMap::new();
    for (&r, rp) in &params.retailers {
        let per_b: BTreeMap<usize, f64> = params
            .consumers
            .keys()
            .map(|&b| (b, rp.kappa_r * cns[&r].degree(b) as f64))
            .collect();
        subsidies.insert(r, per_b);
    }

    // consumer choice over all retailers
    let mut assignment = BTreeMap::new();
    let mut demands = BTreeMap::new();
    for &b in params.consumers.keys() {
        let (r, zeta) = choose_retailer(b, params, &prices, cns, &BTreeSet::new(), None)
            .expect("at least one retailer with no caps");
        assignment.insert(b, r);
        demands.insert(b, zeta);
    }

    // rejection loop: each consumer may be rejected by each retailer at most
    // once, so the loop terminates
    let mut rejected_by: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    let mut fallback_assigned = BTreeSet::new();
    loop {
        let violator = params.retailers.iter().find(|(&r, rp)| {
            let total: f64 = assignment
                .iter()
                .filter(|&(_, &rr)| rr == r)
                .map(|(b, _)| demands[b])
                .sum();
            !capacity_ok(total, rp)
        });
        let Some((&r, rp)) = violator else { break };

        // shed load, lowest demand first; equal demands reject the highest id
        let mut pending: Vec<usize> = Vec::new();
        loop {
            let total: f64 = assignment
                .iter()
                .filter(|&(_, &rr)| rr == r)
                .map(|(b, _)| demands[b])
                .sum();
            if capacity_ok(total, rp) {
                break;
            }
            let victim = assignment
                .iter()
                .filter(|&(b, &rr)| rr == r && !fallback_assigned.contains(b))
                .min_by(|(a, _), (b, _)| {
                    demands[a]
                        .partial_cmp(&demands[b])
                        .unwrap()
                        .then(b.cmp(a))
                })
                .map(|(&b, _)| b);
            let Some(b) = victim else { break };
            assignment.remove(&b);
            rejected_by.entry(b).or_default().insert(r);
            pending.push(b);
        }

        // rejected consumers re-optimise over the remaining retailers, demand
        // capped by each target's remaining headroom
        for b in pending {
            let caps: BTreeMap<usize, f64> = params
                .retailers
                .iter()
                .map(|(&s, sp)| (s, headroom(s, sp, &demands, &assignment).max(0.0)))
                .collect();
            let excluded = rejected_by.get(&b).cloned().unwrap_or_default();
            match choose_retailer(b, params, &prices, cns, &excluded, Some(&caps)) {
                Some((s, zeta)) => {
                    assignment.insert(b, s);
                    demands.insert(b, zeta);
                }
                None => {
                    // livelock guard: attach to the retailer with the most
                    // headroom at the smallest admissible demand
                    let (&s, _) = params
                        .retailers
                        .iter()
                        .max_by(|(a, _), (b, _)| {
                            caps[a].partial_cmp(&caps[b]).unwrap().then(b.cmp(a))
                        })
                        .unwrap();
                    let cp = &params.consumers[&b];
                    let zeta = caps[&s].max(0.0).min(cp.zeta_min_w);
                    assignment.insert(b, s);
                    demands.insert(b, zeta);
                    fallback_assigned.insert(b);
                }
            }
        }
    }

    // settle the game: coalition values, Shapley imputations
    let mut imputations = BTreeMap::new();
    for &r in params.retailers.keys() {
        let consumers: BTreeSet<usize> = assignment
            .iter()
            .filter(|&(_, &rr)| rr == r)
            .map(|(&b, _)| b)
            .collect();
        let mut members = consumers.clone();
        members.insert(r);
        let phi = if consumers.len() <= EXACT_SHAPLEY_CAP {
            coalgame::shapley(&members, &cns[&r])?
        } else {
            coalgame::shapley_sampled(&members, &cns[&r], params.shapley_samples, params.shapley_seed)?
                .imputation
        };
        imputations.extend(phi);
    }

    let mut next = MarketState {
        round: state.round + 1,
        prices,
        demands,
        assignment,
        subsidies_announced: subsidies,
        imputations_paid: imputations,
        profits: BTreeMap::new(),
        fallback_assigned,
    };
    next.profits = profits(&next, params, cns);
    Ok(next)
}

/// Per-round profits at the settled prices and demands; Shapley imputations
/// are added to consumer profits.
pub fn profits(
    state: &MarketState,
    params: &MarketParams,
    cns: &BTreeMap<usize, CostNetwork>,
) -> BTreeMap<usize, f64> {
    let mut out = BTreeMap::new();
    for (&r, rp) in &params.retailers {
        let consumers = state.coalition_of(r);
        let p: f64 = consumers.iter().map(|b| state.demands[b]).sum();
        let lambda = state.prices[&r];
        let mut members = consumers.clone();
        members.insert(r);
        let cost = retailer_cost((1.0 + rp.alpha_loss) * p, &members, rp, lambda, &cns[&r]);
        out.insert(r, lambda * p - cost);
    }
    for (&b, cp) in &params.consumers {
        let Some(&r) = state.assignment.get(&b) else {
            out.insert(b, 0.0);
            continue;
        };
        let rp = &params.retailers[&r];
        let zeta = state.demands[&b];
        let base = consumer_profit(zeta, cp, rp, &cns[&r], state.prices[&r]);
        let imputation = state.imputations_paid.get(&b).copied().unwrap_or(0.0);
        out.insert(b, base + imputation);
    }
    out
}

/// Build the coalition partition implied by a settled state.
pub fn partition_of(
    state: &MarketState,
    params: &MarketParams,
    cns: &BTreeMap<usize, CostNetwork>,
) -> Result<CoalitionPartition> {
    let mut coalitions = Vec::new();
    for &r in params.retailers.keys() {
        let consumers = state.coalition_of(r);
        coalitions.push(Coalition::evaluate(r, consumers, &cns[&r])?);
    }
    Ok(CoalitionPartition { coalitions })
}

/// Exhaustive unilateral-deviation check at a settled round: no consumer can
/// improve its profit by switching retailer or demand (over a demand grid),
/// and no retailer improves by a grid deviation in λ at its measured
/// coalition demand. `tol` is absolute in currency units.
pub fn stackelberg_deviation_ok(
    state: &MarketState,
    params: &MarketParams,
    cns: &BTreeMap<usize, CostNetwork>,
    grid_points: usize,
    tol: f64,
) -> bool {
    // consumer deviations
    for (&b, cp) in &params.consumers {
        let current = state.profits[&b]
            - state.imputations_paid.get(&b).copied().unwrap_or(0.0);
        for (&r, rp) in &params.retailers {
            let lambda = state.prices[&r];
            let mut room = headroom(r, rp, &state.demands, &state.assignment);
            if state.assignment.get(&b) == Some(&r) {
                room += state.demands[&b];
            }
            let upper = cp.zeta_max_w.min(room.max(0.0));
            if upper < cp.zeta_min_w {
                continue;
            }
            for g in 0..=grid_points {
                let zeta =
                    cp.zeta_min_w + (upper - cp.zeta_min_w) * g as f64 / grid_points as f64;
                let profit = consumer_profit(zeta, cp, rp, &cns[&r], lambda);
                if profit > current + tol {
                    return false;
                }
            }
        }
    }

    // retailer deviations in λ at the measured coalition demand (the demand
    // the price update itself responds to, per the round protocol)
    for (&r, rp) in &params.retailers {
        let current = state.profits[&r];
        let consumers = state.coalition_of(r);
        let p: f64 = consumers.iter().map(|b| state.demands[b]).sum();
        let mut members = consumers;
        members.insert(r);
        let nu = coalgame::coalition_value(&members, &cns[&r]);
        let loss = 1.0 + rp.alpha_loss;
        for g in 0..=grid_points {
            let lambda = rp.lambda_min
                + (rp.lambda_max - rp.lambda_min) * g as f64 / grid_points as f64;
            let profit = lambda * p - rp.alpha_r * (lambda * loss * p).powi(2) - nu;
            if profit > current + tol {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::{example_cost_network, CostParams};
    use approx::assert_relative_eq;

    fn rp(id: usize) -> RetailerParams {
        RetailerParams {
            id,
            alpha_r: 1e-4,
            kappa_r: 65.0,
            lambda_min: 0.01,
            lambda_max: 4.0,
            p_max_w: 30_000.0,
            alpha_loss: 0.0,
        }
    }

    fn cp(id: usize, alpha_b: f64) -> ConsumerParams {
        ConsumerParams {
            id,
            alpha_b,
            zeta_min_w: 0.0,
            zeta_max_w: 6_000.0,
            p_rated_w: 3_000.0,
        }
    }

    #[test]
    fn best_demand_unit_fixed_point() {
        let c = cp(1, 6.0);
        // λ = α_b/6 → ζ* = 1
        assert_relative_eq!(consumer_best_demand(1.0, &c).unwrap(), 1.0);
        // huge price clamps to ζ̲, tiny price to ζ̄
        let mut floored = c.clone();
        floored.zeta_min_w = 100.0;
        assert_relative_eq!(consumer_best_demand(1e9, &floored).unwrap(), 100.0);
        assert_relative_eq!(consumer_best_demand(1e-12, &c).unwrap(), c.zeta_max_w);
        assert!(consumer_best_demand(0.0, &c).is_err());
    }

    #[test]
    fn best_price_cases() {
        let mut r = rp(0);
        r.alpha_r = 0.25;
        // P = 1, α_r = 0.25, no loss → λ* = 2
        assert_relative_eq!(retailer_best_price(1.0, &r, 1.0), 2.0);
        // huge P clamps at the lower bound
        assert_relative_eq!(retailer_best_price(1e12, &r, 1.0), r.lambda_min);
        // P = 0 retains the previous price
        assert_relative_eq!(retailer_best_price(0.0, &r, 1.3), 1.3);
    }

    #[test]
    fn capacity_bounds() {
        let mut r = rp(0);
        r.alpha_loss = 0.1;
        assert!(capacity_ok(10_000.0, &r)); // 11 ≤ 30 kW
        assert!(!capacity_ok(30_000.0, &r)); // 33 > 30 kW
        assert!(capacity_ok(0.0, &r));
    }

    #[test]
    fn utility_values() {
        let cn = example_cost_network();
        let mut r = rp(0);
        r.kappa_r = 0.0;
        let c1 = cp(1, 64.0);
        // ζ = 0, κ = 0 → U = −ω(r,b1) = −100
        assert_relative_eq!(consumer_utility(0.0, &c1, &r, &cn), -100.0);
        // ζ = 1 → α_b·1 plus fee terms
        r.kappa_r = 65.0;
        let delta = cn.degree(1) as f64; // b1 has 3 edges
        assert_relative_eq!(delta, 3.0);
        assert_relative_eq!(consumer_utility(1.0, &c1, &r, &cn), 64.0 + 65.0 * 3.0 - 100.0);
        // 64^(1/6) = 2 → power term is 64·2 = 128
        assert_relative_eq!(
            consumer_utility(64.0, &c1, &r, &cn),
            128.0 + 65.0 * 3.0 - 100.0,
            epsilon = 1e-9
        );
    }

    fn simple_market() -> (MarketParams, BTreeMap<usize, CostNetwork>) {
        // nodes: 0 = retailer, 1..=3 consumers; Fig-2 style cost network
        let params = MarketParams {
            retailers: BTreeMap::from([(0, rp(0))]),
            consumers: BTreeMap::from([
                (1, cp(1, 1800.0)),
                (2, cp(2, 150.0)),
                (3, cp(3, 140.0)),
            ]),
            shapley_seed: 42,
            shapley_samples: 10_000,
        };
        let cns = BTreeMap::from([(0, example_cost_network())]);
        (params, cns)
    }

    #[test]
    fn single_retailer_round_assigns_everyone() {
        let (params, cns) = simple_market();
        let s0 = MarketState::initial(&params);
        let s1 = form_coalitions(&s0, &params, &cns).unwrap();
        assert_eq!(s1.assignment.len(), 3);
        assert!(s1.fallback_assigned.is_empty());
        let total: f64 = s1.imputations_paid.values().sum();
        let members = BTreeSet::from([0, 1, 2, 3]);
        assert_relative_eq!(
            total,
            coalgame::coalition_value(&members, &cns[&0]),
            epsilon = 1e-9
        );
    }

    #[test]
    fn rounds_settle_to_fixed_point() {
        let (params, cns) = simple_market();
        let mut state = MarketState::initial(&params);
        let mut last_price = f64::NAN;
        for _ in 0..60 {
            state = form_coalitions(&state, &params, &cns).unwrap();
            last_price = state.prices[&0];
        }
        let settled = form_coalitions(&state, &params, &cns).unwrap();
        assert_relative_eq!(settled.prices[&0], last_price, epsilon = 1e-6);
        for (&b, d) in &settled.demands {
            assert_relative_eq!(*d, state.demands[&b], epsilon = 1e-6);
        }
    }

    #[test]
    fn capacity_rejection_drops_lowest_demand() {
        // tight capacity forces exactly one rejection onto the second retailer
        let mut r0 = rp(0);
        r0.p_max_w = 5_000.0;
        let r1 = rp(1);
        let params = MarketParams {
            retailers: BTreeMap::from([(0, r0), (1, r1)]),
            consumers: BTreeMap::from([(2, cp(2, 1800.0)), (3, cp(3, 150.0))]),
            shapley_seed: 1,
            shapley_samples: 1000,
        };
        // retailer 0 strictly cheaper network, retailer 1 expensive
        let p = CostParams { gamma: 1.0, xi: 1.0, beta: 2.0 };
        let cn0 = CostNetwork::from_edges(0, &[2, 3], &[(0, 2, 10.0), (0, 3, 10.0)], p).unwrap();
        let cn1 =
            CostNetwork::from_edges(1, &[2, 3], &[(1, 2, 500.0), (1, 3, 500.0)], p).unwrap();
        let cns = BTreeMap::from([(0, cn0), (1, cn1)]);
        let mut state = MarketState::initial(&params);
        for _ in 0..10 {
            state = form_coalitions(&state, &params, &cns).unwrap();
        }
        // capacity holds for every retailer after the round
        for (&r, rp) in &params.retailers {
            let total: f64 = state
                .coalition_of(r)
                .iter()
                .map(|b| state.demands[b])
                .sum();
            assert!(capacity_ok(total, rp));
        }
        // both consumers want retailer 0; the lower-demand one was pushed out
        let c0 = state.coalition_of(0);
        let c1 = state.coalition_of(1);
        assert_eq!(c0.len() + c1.len(), 2);
        if !c1.is_empty() {
            let moved = c1.iter().next().unwrap();
            let kept = c0.iter().next().unwrap();
            assert!(state.demands[moved] <= state.demands[kept]);
        }
    }

    #[test]
    fn empty_retailer_zero_profit() {
        // a second retailer nobody picks: enormous connection fees, no subsidy
        let (mut params, mut cns) = simple_market();
        let mut r4 = rp(4);
        r4.kappa_r = 0.0;
        params.retailers.insert(4, r4);
        let p = CostParams { gamma: 1.0, xi: 1.0, beta: 2.0 };
        let cn4 = CostNetwork::from_edges(
            4,
            &[1, 2, 3],
            &[(4, 1, 1e6), (4, 2, 1e6), (4, 3, 1e6)],
            p,
        )
        .unwrap();
        cns.insert(4, cn4);
        let mut state = MarketState::initial(&params);
        for _ in 0..5 {
            state = form_coalitions(&state, &params, &cns).unwrap();
        }
        assert!(state.coalition_of(4).is_empty());
        assert_relative_eq!(state.profits[&4], 0.0);
    }
}
