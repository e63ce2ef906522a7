//! Resistive micro-grid dynamics: bounded droop voltage ODEs coupled to
//! first-order demand-response lags, fixed-step RK4 integration, analytic
//! Jacobian, equilibrium search, and the Gershgorin stability certificate.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netgraph::PowerNetwork;

/// Tolerated band overshoot before a step is treated as a failure.
const BAND_GUARD_V: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NodeDynParams {
    /// voltage time constant, s
    pub tau_v_s: f64,
    /// droop coefficient, V/W
    pub k_v_per_w: f64,
    /// optional RHS gain; 1 for the bare droop law
    pub c_gain: f64,
    /// rated voltage, V
    pub v_star: f64,
    /// voltage band half-width, V
    pub delta_v: f64,
    /// demand-response lag, s (consumers only)
    pub tau_load_s: Option<f64>,
}

impl NodeDynParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_v_s > 0.0 && self.k_v_per_w >= 0.0 && self.c_gain > 0.0) {
            return Err(Error::InvalidScenario(
                "dynamics time constants and gains must be positive".into(),
            ));
        }
        if !(self.delta_v > 0.0 && self.delta_v < self.v_star) {
            return Err(Error::InvalidScenario(
                "need 0 < delta_v < v_star".into(),
            ));
        }
        if let Some(t) = self.tau_load_s {
            if !(t > 0.0) {
                return Err(Error::InvalidScenario("tau_load must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Voltages for every node plus set-point lag states for consumers.
#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    pub voltages: Vec<f64>,
    /// per consumer, in the model's consumer order; tracks P_b^d (positive W)
    pub lags: Vec<f64>,
    pub time: f64,
}

/// Constant exogenous inputs between market rounds.
#[derive(Debug, Clone, Default)]
pub struct GridInputs {
    /// retailer node → signed injection reference, W (supply positive)
    pub retailer_set_points: BTreeMap<usize, f64>,
    /// consumer node → demanded power, W (positive; enters as a lagged sink)
    pub consumer_demands: BTreeMap<usize, f64>,
}

/// The coupled voltage/lag system over a fixed conductance matrix.
#[derive(Debug, Clone)]
pub struct GridModel {
    pub g: DMatrix<f64>,
    pub nodes: Vec<NodeDynParams>,
    /// node indices carrying a lag state, in ascending order
    pub consumers: Vec<usize>,
}

impl GridModel {
    pub fn new(g: DMatrix<f64>, nodes: Vec<NodeDynParams>, consumers: Vec<usize>) -> Result<Self> {
        if g.nrows() != nodes.len() || g.nrows() != g.ncols() {
            return Err(Error::InvalidScenario(
                "conductance matrix and node parameters disagree in size".into(),
            ));
        }
        for p in &nodes {
            p.validate()?;
        }
        for &c in &consumers {
            if nodes[c].tau_load_s.is_none() {
                return Err(Error::InvalidScenario(format!(
                    "consumer node {c} lacks tau_load"
                )));
            }
        }
        Ok(Self { g, nodes, consumers })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Signed injection reference per node: retailers from the inputs,
    /// consumers as the negated lag state.
    pub fn set_points(&self, state: &GridState, inputs: &GridInputs) -> Vec<f64> {
        let mut p = vec![0.0; self.n_nodes()];
        for (&r, &v) in &inputs.retailer_set_points {
            p[r] = v;
        }
        for (ci, &node) in self.consumers.iter().enumerate() {
            p[node] = -state.lags[ci];
        }
        p
    }

    /// Initial state: flat at V*, lags matching the demanded powers.
    pub fn flat_state(&self, inputs: &GridInputs) -> GridState {
        GridState {
            voltages: self.nodes.iter().map(|p| p.v_star).collect(),
            lags: self
                .consumers
                .iter()
                .map(|n| inputs.consumer_demands.get(n).copied().unwrap_or(0.0))
                .collect(),
            time: 0.0,
        }
    }
}

/// Bounded droop law: V̇_i = (c_i/τ_i)(V* − V_i − k_i Σ_j G_ij V_i V_j
/// + k_i P_i^set)(1 − (V_i − V*)²/ΔV_i²).
pub fn droop_rhs(
    voltages: &[f64],
    set_points: &[f64],
    g: &DMatrix<f64>,
    params: &[NodeDynParams],
) -> Vec<f64> {
    let n = voltages.len();
    let mut dv = vec![0.0; n];
    for i in 0..n {
        let p = &params[i];
        let flow: f64 = (0..n).map(|j| g[(i, j)] * voltages[i] * voltages[j]).sum();
        let inner = p.v_star - voltages[i] - p.k_v_per_w * flow + p.k_v_per_w * set_points[i];
        let band = 1.0 - ((voltages[i] - p.v_star) / p.delta_v).powi(2);
        dv[i] = p.c_gain / p.tau_v_s * inner * band;
    }
    dv
}

/// First-order demand response: Ṗ_b^set = (P_b^d − P_b^set)/τ.
pub fn demand_lag_rhs(lags: &[f64], demands: &[f64], tau_load: &[f64]) -> Vec<f64> {
    lags.iter()
        .zip(demands)
        .zip(tau_load)
        .map(|((&l, &d), &t)| (d - l) / t)
        .collect()
}

/// Right-hand side of the full coupled system: voltage and lag derivatives.
pub fn coupled_rhs(model: &GridModel, state: &GridState, inputs: &GridInputs) -> (Vec<f64>, Vec<f64>) {
    let set_points = model.set_points(state, inputs);
    let dv = droop_rhs(&state.voltages, &set_points, &model.g, &model.nodes);
    let demands: Vec<f64> = model
        .consumers
        .iter()
        .map(|n| inputs.consumer_demands.get(n).copied().unwrap_or(0.0))
        .collect();
    let taus: Vec<f64> = model
        .consumers
        .iter()
        .map(|&n| model.nodes[n].tau_load_s.unwrap())
        .collect();
    let dl = demand_lag_rhs(&state.lags, &demands, &taus);
    (dv, dl)
}

/// One classical RK4 step of the coupled system. Voltages are clamped back
/// into the band when a step overshoots by less than the numerical guard,
/// and the step fails otherwise.
pub fn step_rk4(
    model: &GridModel,
    state: &GridState,
    inputs: &GridInputs,
    h: f64,
) -> Result<GridState> {
    let eval = |vs: &[f64], ls: &[f64]| {
        let probe = GridState {
            voltages: vs.to_vec(),
            lags: ls.to_vec(),
            time: state.time,
        };
        coupled_rhs(model, &probe, inputs)
    };
    let add = |base: &[f64], k: &[f64], f: f64| -> Vec<f64> {
        base.iter().zip(k).map(|(&b, &d)| b + f * d).collect()
    };

    let (kv1, kl1) = eval(&state.voltages, &state.lags);
    let (kv2, kl2) = eval(&add(&state.voltages, &kv1, h / 2.0), &add(&state.lags, &kl1, h / 2.0));
    let (kv3, kl3) = eval(&add(&state.voltages, &kv2, h / 2.0), &add(&state.lags, &kl2, h / 2.0));
    let (kv4, kl4) = eval(&add(&state.voltages, &kv3, h), &add(&state.lags, &kl3, h));

    let combine = |base: &[f64], k1: &[f64], k2: &[f64], k3: &[f64], k4: &[f64]| -> Vec<f64> {
        base.iter()
            .enumerate()
            .map(|(i, &b)| b + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect()
    };
    let mut voltages = combine(&state.voltages, &kv1, &kv2, &kv3, &kv4);
    let lags = combine(&state.lags, &kl1, &kl2, &kl3, &kl4);
    let time = state.time + h;

    for (i, v) in voltages.iter_mut().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFiniteState(time));
        }
        let p = &model.nodes[i];
        let (lo, hi) = (p.v_star - p.delta_v, p.v_star + p.delta_v);
        if *v < lo || *v > hi {
            let overshoot = (*v - v.clamp(lo, hi)).abs();
            if overshoot <= BAND_GUARD_V {
                *v = v.clamp(lo, hi);
            } else {
                return Err(Error::VoltageBand {
                    node: i,
                    v: *v,
                    lo,
                    hi,
                    t: time,
                });
            }
        }
    }
    if lags.iter().any(|l| !l.is_finite()) {
        return Err(Error::NonFiniteState(time));
    }
    Ok(GridState { voltages, lags, time })
}

#[derive(Debug, Clone)]
pub struct TrajectorySample {
    pub time: f64,
    pub voltages: Vec<f64>,
    /// electrical power leaving each node, V_i Σ_j G_ij V_j (W)
    pub injections: Vec<f64>,
    pub set_points: Vec<f64>,
}

pub fn sample_of(model: &GridModel, state: &GridState, inputs: &GridInputs) -> TrajectorySample {
    let n = model.n_nodes();
    let injections: Vec<f64> = (0..n)
        .map(|i| {
            state.voltages[i]
                * (0..n).map(|j| model.g[(i, j)] * state.voltages[j]).sum::<f64>()
        })
        .collect();
    TrajectorySample {
        time: state.time,
        voltages: state.voltages.clone(),
        injections,
        set_points: model.set_points(state, inputs),
    }
}

/// Integrate under constant inputs, sampling every `sample_every` steps
/// (the initial state is always included).
pub fn simulate(
    model: &GridModel,
    initial: GridState,
    inputs: &GridInputs,
    t_end: f64,
    h: f64,
    sample_every: usize,
) -> Result<(GridState, Vec<TrajectorySample>)> {
    let steps = (t_end / h).round() as usize;
    let mut state = initial;
    let mut samples = vec![sample_of(model, &state, inputs)];
    for step in 1..=steps {
        state = step_rk4(model, &state, inputs, h)?;
        if step % sample_every.max(1) == 0 {
            samples.push(sample_of(model, &state, inputs));
        }
    }
    Ok((state, samples))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeStability {
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub per_node: BTreeMap<usize, NodeStability>,
    pub overall: bool,
}

/// Gershgorin certificate: k_i ΔV Σ_j 1/R_ij < 1/2 + k_i V*/R_ii per node,
/// with the shunt conductance included in the row sum.
pub fn gershgorin_check(net: &PowerNetwork, params: &[NodeDynParams]) -> StabilityReport {
    let mut per_node = BTreeMap::new();
    let mut overall = true;
    for i in 0..net.len() {
        let p = &params[i];
        let mut row_sum = 1.0 / net.shunt_resistance(i);
        for j in 0..net.len() {
            if let Some(r) = net.line_resistance(i, j) {
                row_sum += 1.0 / r;
            }
        }
        let lhs = p.k_v_per_w * p.delta_v * row_sum;
        let rhs = 0.5 + p.k_v_per_w * p.v_star / net.shunt_resistance(i);
        let satisfied = lhs < rhs;
        overall &= satisfied;
        per_node.insert(i, NodeStability { lhs, rhs, satisfied });
    }
    StabilityReport { per_node, overall }
}

/// Analytic Jacobian of the coupled system at an interior state, in block
/// form [Υ, −κ; 0, −τ⁻¹] over (voltages, consumer lags).
pub fn jacobian(model: &GridModel, state: &GridState, inputs: &GridInputs) -> Result<DMatrix<f64>> {
    let n = model.n_nodes();
    let m = model.consumers.len();
    let set_points = model.set_points(state, inputs);
    let mut j = DMatrix::zeros(n + m, n + m);
    for i in 0..n {
        let p = &model.nodes[i];
        let vi = state.voltages[i];
        let band = 1.0 - ((vi - p.v_star) / p.delta_v).powi(2);
        if band <= 0.0 {
            return Err(Error::BoundaryState(i));
        }
        let flow: f64 = (0..n).map(|l| model.g[(i, l)] * vi * state.voltages[l]).sum();
        let inner = p.v_star - vi - p.k_v_per_w * flow + p.k_v_per_w * set_points[i];
        let gain = p.c_gain / p.tau_v_s;
        let band_prime = -2.0 * (vi - p.v_star) / p.delta_v.powi(2);
        for col in 0..n {
            let d_flow = if col == i {
                (0..n).map(|l| model.g[(i, l)] * state.voltages[l]).sum::<f64>()
                    + model.g[(i, i)] * vi
            } else {
                model.g[(i, col)] * vi
            };
            let d_inner = if col == i { -1.0 - p.k_v_per_w * d_flow } else { -p.k_v_per_w * d_flow };
            let mut entry = gain * d_inner * band;
            if col == i {
                entry += gain * inner * band_prime;
            }
            j[(i, col)] = entry;
        }
        // voltage sensitivity to the lag state: consumer set-point is −lag
        if let Some(ci) = model.consumers.iter().position(|&c| c == i) {
            j[(i, n + ci)] = gain * band * (-p.k_v_per_w);
        }
    }
    for (ci, &node) in model.consumers.iter().enumerate() {
        let tau = model.nodes[node].tau_load_s.unwrap();
        j[(n + ci, n + ci)] = -1.0 / tau;
    }
    Ok(j)
}

/// Damped Newton search for an interior equilibrium of the coupled system
/// starting from the flat V* profile. Tolerance on the residual ∞-norm.
pub fn find_equilibrium(model: &GridModel, inputs: &GridInputs) -> Result<GridState> {
    let n = model.n_nodes();
    let mut state = model.flat_state(inputs);
    // lag equilibrium is the demand itself
    for (ci, node) in model.consumers.iter().enumerate() {
        state.lags[ci] = inputs.consumer_demands.get(node).copied().unwrap_or(0.0);
    }
    let set_points = model.set_points(&state, inputs);
    let residual = |v: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let p = &model.nodes[i];
                let flow: f64 = (0..n).map(|l| model.g[(i, l)] * v[i] * v[l]).sum();
                p.v_star - v[i] - p.k_v_per_w * flow + p.k_v_per_w * set_points[i]
            })
            .collect()
    };
    let tol = 1e-10;
    let max_iter = 100_000;
    let mut v = state.voltages.clone();
    let mut res = residual(&v);
    let mut norm = res.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    for _ in 0..max_iter {
        if norm < tol {
            break;
        }
        let mut jac = DMatrix::zeros(n, n);
        for i in 0..n {
            let p = &model.nodes[i];
            for col in 0..n {
                jac[(i, col)] = if col == i {
                    -1.0 - p.k_v_per_w
                        * ((0..n).map(|l| model.g[(i, l)] * v[l]).sum::<f64>()
                            + model.g[(i, i)] * v[i])
                } else {
                    -p.k_v_per_w * model.g[(i, col)] * v[i]
                };
            }
        }
        let rhs = nalgebra::DVector::from_vec(res.clone());
        let Some(delta) = jac.lu().solve(&rhs) else {
            return Err(Error::NoEquilibrium(norm));
        };
        let mut damping = 1.0;
        loop {
            let trial: Vec<f64> = v.iter().zip(delta.iter()).map(|(&vi, &d)| vi - damping * d).collect();
            let trial_res = residual(&trial);
            let trial_norm = trial_res.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            if trial_norm < norm || damping < 1e-8 {
                v = trial;
                res = trial_res;
                norm = trial_norm;
                break;
            }
            damping /= 2.0;
        }
    }
    if norm >= tol {
        return Err(Error::NoEquilibrium(norm));
    }
    for (i, &vi) in v.iter().enumerate() {
        let p = &model.nodes[i];
        if (vi - p.v_star).abs() >= p.delta_v {
            return Err(Error::BoundaryState(i));
        }
    }
    state.voltages = v;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(n: usize, k: f64) -> Vec<NodeDynParams> {
        (0..n)
            .map(|_| NodeDynParams {
                tau_v_s: 0.1,
                k_v_per_w: k,
                c_gain: 1.0,
                v_star: 220.0,
                delta_v: 11.0,
                tau_load_s: Some(3.0),
            })
            .collect()
    }

    fn two_node_model(k: f64) -> GridModel {
        // line 0.5 Ω, shunts 100 Ω
        let mut g = DMatrix::zeros(2, 2);
        g[(0, 0)] = 2.0 + 0.01;
        g[(1, 1)] = 2.0 + 0.01;
        g[(0, 1)] = -2.0;
        g[(1, 0)] = -2.0;
        GridModel::new(g, params(2, k), vec![1]).unwrap()
    }

    #[test]
    fn rhs_vanishes_at_band_edges() {
        let model = two_node_model(1e-3);
        let sp = vec![500.0, -100.0];
        let dv = droop_rhs(&[231.0, 209.0], &sp, &model.g, &model.nodes);
        assert_relative_eq!(dv[0], 0.0);
        assert_relative_eq!(dv[1], 0.0);
    }

    #[test]
    fn rhs_zero_for_isolated_balanced_node() {
        // k = 0, V = V*: V̇ = 0
        let g = DMatrix::from_diagonal_element(1, 1, 0.01);
        let mut p = params(1, 0.0);
        p[0].tau_load_s = None;
        let model = GridModel::new(g, p, vec![]).unwrap();
        let dv = droop_rhs(&[220.0], &[0.0], &model.g, &model.nodes);
        assert_relative_eq!(dv[0], 0.0);
    }

    #[test]
    fn lag_rhs_cases() {
        assert_relative_eq!(demand_lag_rhs(&[5.0], &[5.0], &[3.0])[0], 0.0);
        assert_relative_eq!(demand_lag_rhs(&[5.0], &[0.0], &[3.0])[0], -5.0 / 3.0);
    }

    #[test]
    fn lag_step_response() {
        // step from 0 toward P^d: value at t = τ is (1 − e⁻¹) P^d
        let model = two_node_model(0.0);
        let inputs = GridInputs {
            retailer_set_points: BTreeMap::from([(0, 0.0)]),
            consumer_demands: BTreeMap::from([(1, 1000.0)]),
        };
        let mut state = GridState {
            voltages: vec![220.0, 220.0],
            lags: vec![0.0],
            time: 0.0,
        };
        let h = 1e-3;
        while state.time < 3.0 - h / 2.0 {
            state = step_rk4(&model, &state, &inputs, h).unwrap();
        }
        assert_relative_eq!(
            state.lags[0],
            (1.0 - (-1.0f64).exp()) * 1000.0,
            max_relative = 1e-6
        );
    }

    #[test]
    fn rk4_zero_field_identity() {
        let model = two_node_model(0.0);
        let inputs = GridInputs::default();
        let state = GridState {
            voltages: vec![220.0, 220.0],
            lags: vec![0.0],
            time: 0.0,
        };
        let next = step_rk4(&model, &state, &inputs, 0.1).unwrap();
        assert_eq!(next.voltages, state.voltages);
        assert_eq!(next.lags, state.lags);
    }

    #[test]
    fn gershgorin_zero_k_satisfied() {
        use crate::netgraph::Role;
        let net = PowerNetwork::new(
            vec!["r".into(), "b".into()],
            vec![Role::Retailer, Role::Consumer],
            BTreeMap::from([((0, 1), 0.5)]),
            vec![100.0, 100.0],
        )
        .unwrap();
        let report = gershgorin_check(&net, &params(2, 0.0));
        assert!(report.overall);
        assert_relative_eq!(report.per_node[&0].lhs, 0.0);
        assert_relative_eq!(report.per_node[&0].rhs, 0.5);
    }

    #[test]
    fn gershgorin_strictness_at_equality() {
        use crate::netgraph::Role;
        // choose k so lhs == rhs exactly: k ΔV Σ = 1/2 + k V*/R_ii
        let shunt = 100.0;
        let line = 0.5;
        let sum = 1.0 / shunt + 1.0 / line;
        let dv = 11.0;
        let vstar = 220.0;
        let k = 0.5 / (dv * sum - vstar / shunt);
        let net = PowerNetwork::new(
            vec!["r".into(), "b".into()],
            vec![Role::Retailer, Role::Consumer],
            BTreeMap::from([((0, 1), line)]),
            vec![shunt, shunt],
        )
        .unwrap();
        let report = gershgorin_check(&net, &params(2, k));
        assert!(!report.per_node[&0].satisfied);
    }

    #[test]
    fn jacobian_blocks() {
        let model = two_node_model(1e-3);
        let inputs = GridInputs {
            retailer_set_points: BTreeMap::from([(0, 800.0)]),
            consumer_demands: BTreeMap::from([(1, 700.0)]),
        };
        let state = GridState {
            voltages: vec![221.0, 219.0],
            lags: vec![650.0],
            time: 0.0,
        };
        let j = jacobian(&model, &state, &inputs).unwrap();
        // lower-left block exactly zero, lower-right −1/τ
        assert_eq!(j[(2, 0)], 0.0);
        assert_eq!(j[(2, 1)], 0.0);
        assert_relative_eq!(j[(2, 2)], -1.0 / 3.0);
        // boundary state degenerates
        let boundary = GridState {
            voltages: vec![231.0, 219.0],
            lags: vec![650.0],
            time: 0.0,
        };
        assert!(jacobian(&model, &boundary, &inputs).is_err());
    }

    #[test]
    fn equilibrium_zero_inputs_near_v_star() {
        let model = two_node_model(1e-3);
        let inputs = GridInputs {
            retailer_set_points: BTreeMap::from([(0, 0.0)]),
            consumer_demands: BTreeMap::from([(1, 0.0)]),
        };
        let eq = find_equilibrium(&model, &inputs).unwrap();
        // shunt-only droop pulls slightly below V*
        for &v in &eq.voltages {
            assert!((v - 220.0).abs() < 2.0, "v = {v}");
        }
    }
}
