//! Physical network representation and per-retailer cost network derivation.
//!
//! The micro-grid is a connected, undirected graph with resistive lines and a
//! shunt resistance at every node. From its adjacency structure each retailer
//! derives a weighted *cost network* over itself and all consumers; coalition
//! costs are minimum spanning trees of that network.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Retailer,
    Consumer,
}

/// The physical micro-grid graph. Nodes are addressed by index into `names`.
#[derive(Debug, Clone)]
pub struct PowerNetwork {
    names: Vec<String>,
    roles: Vec<Role>,
    /// keys are (i, j) with i < j, values in ohms
    line_resistance: BTreeMap<(usize, usize), f64>,
    /// per-node shunt resistance in ohms
    shunt_resistance: Vec<f64>,
}

impl PowerNetwork {
    pub fn new(
        names: Vec<String>,
        roles: Vec<Role>,
        line_resistance: BTreeMap<(usize, usize), f64>,
        shunt_resistance: Vec<f64>,
    ) -> Result<Self> {
        let n = names.len();
        if roles.len() != n || shunt_resistance.len() != n {
            return Err(Error::InvalidNetwork(
                "roles and shunt resistances must cover every node".into(),
            ));
        }
        if !roles.iter().any(|r| *r == Role::Retailer) || !roles.iter().any(|r| *r == Role::Consumer)
        {
            return Err(Error::InvalidNetwork(
                "need at least one retailer and one consumer".into(),
            ));
        }
        for (&(i, j), &r) in &line_resistance {
            if i >= j || j >= n {
                return Err(Error::InvalidNetwork(format!(
                    "bad line edge ({i}, {j}); edges are stored as i < j < {n}"
                )));
            }
            if !(r > 0.0) {
                return Err(Error::InvalidNetwork(format!(
                    "line resistance R_({i},{j}) = {r} must be > 0"
                )));
            }
        }
        for (i, &r) in shunt_resistance.iter().enumerate() {
            if !(r > 0.0) {
                return Err(Error::InvalidNetwork(format!(
                    "shunt resistance R_{i}{i} = {r} must be > 0"
                )));
            }
        }
        let net = Self {
            names,
            roles,
            line_resistance,
            shunt_resistance,
        };
        if !net.is_connected() {
            return Err(Error::InvalidNetwork("line graph is not connected".into()));
        }
        Ok(net)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn role(&self, i: usize) -> Role {
        self.roles[i]
    }

    pub fn retailers(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.roles[i] == Role::Retailer).collect()
    }

    pub fn consumers(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.roles[i] == Role::Consumer).collect()
    }

    pub fn line_resistance(&self, i: usize, j: usize) -> Option<f64> {
        let key = if i < j { (i, j) } else { (j, i) };
        self.line_resistance.get(&key).copied()
    }

    pub fn shunt_resistance(&self, i: usize) -> f64 {
        self.shunt_resistance[i]
    }

    pub fn line_edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.line_resistance.iter().map(|(&(i, j), &r)| (i, j, r))
    }

    fn is_connected(&self) -> bool {
        let n = self.len();
        if n == 0 {
            return false;
        }
        let mut adj = vec![Vec::new(); n];
        for &(i, j) in self.line_resistance.keys() {
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    queue.push_back(j);
                }
            }
        }
        count == n
    }

    /// Conductance adjacency `A` (A_ij = 1/R_ij on line edges) and the 0/1
    /// adjacency `B`. Both symmetric with zero diagonal.
    pub fn adjacency_matrices(&self) -> (DMatrix<f64>, DMatrix<u64>) {
        let n = self.len();
        let mut a = DMatrix::zeros(n, n);
        let mut b = DMatrix::zeros(n, n);
        for (&(i, j), &r) in &self.line_resistance {
            a[(i, j)] = 1.0 / r;
            a[(j, i)] = 1.0 / r;
            b[(i, j)] = 1u64;
            b[(j, i)] = 1u64;
        }
        (a, b)
    }

    /// Network conductance matrix G = L + R^{-1}, with L the Laplacian of the
    /// line conductances and R^{-1} the diagonal of shunt conductances.
    pub fn conductance_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let (a, _) = self.adjacency_matrices();
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            let degree: f64 = a.row(i).iter().sum();
            g[(i, i)] = degree + 1.0 / self.shunt_resistance[i];
            for j in 0..n {
                if j != i {
                    g[(i, j)] = -a[(i, j)];
                }
            }
        }
        g
    }
}

/// Pricing parameters for a retailer's cost network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    /// currency per siemens
    pub gamma: f64,
    /// direct connection fee per walk step
    pub xi: f64,
    /// aggregate connection fee multiplier
    pub beta: f64,
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.xi > 0.0 && self.beta > 0.0) {
            return Err(Error::InvalidScenario(
                "cost network parameters gamma, xi, beta must be > 0".into(),
            ));
        }
        if self.beta == self.xi {
            return Err(Error::InvalidScenario("beta must differ from xi".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Direct,
    Aggregate,
}

/// A retailer's weighted graph over `{owner} ∪ consumers`.
#[derive(Debug, Clone)]
pub struct CostNetwork {
    pub owner: usize,
    pub nodes: Vec<usize>,
    /// keys are (i, j) with i < j
    weights: BTreeMap<(usize, usize), f64>,
    pub params: CostParams,
}

impl CostNetwork {
    /// Build a cost network from explicit edge weights (used for fixtures and
    /// hand-constructed instances). Every consumer must carry a direct edge.
    pub fn from_edges(
        owner: usize,
        consumers: &[usize],
        edges: &[(usize, usize, f64)],
        params: CostParams,
    ) -> Result<Self> {
        let mut weights = BTreeMap::new();
        for &(i, j, w) in edges {
            let key = if i < j { (i, j) } else { (j, i) };
            weights.insert(key, w);
        }
        let mut nodes = vec![owner];
        nodes.extend_from_slice(consumers);
        let cn = Self {
            owner,
            nodes,
            weights,
            params,
        };
        for &b in consumers {
            if cn.weight(owner, b).is_none() {
                return Err(Error::InvalidNetwork(format!(
                    "consumer {b} lacks a direct edge to owner {owner}"
                )));
            }
        }
        Ok(cn)
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        let key = if i < j { (i, j) } else { (j, i) };
        self.weights.get(&key).copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.weights.iter().map(|(&(i, j), &w)| (i, j, w))
    }

    pub fn kind(&self, i: usize, j: usize) -> EdgeKind {
        if i == self.owner || j == self.owner {
            EdgeKind::Direct
        } else {
            EdgeKind::Aggregate
        }
    }

    /// Degree of node `b` in the full cost network; drives the announced
    /// subsidy term.
    pub fn degree(&self, b: usize) -> usize {
        self.weights.keys().filter(|&&(i, j)| i == b || j == b).count()
    }

    pub fn consumers(&self) -> impl Iterator<Item = usize> + '_ {
        let owner = self.owner;
        self.nodes.iter().copied().filter(move |&n| n != owner)
    }
}

/// Direct connection weight ω(r,b): geometric average of the conductance
/// products over all shortest walks, plus a per-step fee.
///
/// Evaluates γ([Aⁿ]_rb / [Bⁿ]_rb)^(1/n) + nξ at the smallest n ≥ 1 with
/// [Bⁿ]_rb > 0.
pub fn direct_weight(
    r: usize,
    b: usize,
    a: &DMatrix<f64>,
    b_adj: &DMatrix<u64>,
    gamma: f64,
    xi: f64,
) -> Result<f64> {
    let n_nodes = a.nrows();
    let mut a_pow = a.clone();
    let mut b_pow = b_adj.clone();
    for n in 1..n_nodes {
        if b_pow[(r, b)] > 0 {
            let geo = (a_pow[(r, b)] / b_pow[(r, b)] as f64).powf(1.0 / n as f64);
            return Ok(gamma * geo + n as f64 * xi);
        }
        a_pow *= a;
        b_pow *= b_adj;
    }
    if b_pow[(r, b)] > 0 {
        let n = n_nodes - 1;
        let geo = (a_pow[(r, b)] / b_pow[(r, b)] as f64).powf(1.0 / n as f64);
        return Ok(gamma * geo + n as f64 * xi);
    }
    Err(Error::Unreachable(b, r))
}

/// Aggregate connection weight ω(b_i,b_j) = γ·A_ij + β·ξ when the consumers
/// are physically adjacent; `None` otherwise.
pub fn aggregate_weight(
    bi: usize,
    bj: usize,
    a: &DMatrix<f64>,
    gamma: f64,
    xi: f64,
    beta: f64,
) -> Option<f64> {
    let c = a[(bi, bj)];
    (c > 0.0).then(|| gamma * c + beta * xi)
}

/// Derive retailer `r`'s cost network over all consumers of `net`.
pub fn build_cost_network(net: &PowerNetwork, r: usize, params: CostParams) -> Result<CostNetwork> {
    params.validate()?;
    let (a, b_adj) = net.adjacency_matrices();
    let consumers = net.consumers();
    let mut weights = BTreeMap::new();
    for &b in &consumers {
        let w = direct_weight(r, b, &a, &b_adj, params.gamma, params.xi)?;
        let key = if r < b { (r, b) } else { (b, r) };
        weights.insert(key, w);
    }
    for (pos, &bi) in consumers.iter().enumerate() {
        for &bj in &consumers[pos + 1..] {
            if let Some(w) = aggregate_weight(bi, bj, &a, params.gamma, params.xi, params.beta) {
                weights.insert((bi.min(bj), bi.max(bj)), w);
            }
        }
    }
    let mut nodes = vec![r];
    nodes.extend(consumers);
    Ok(CostNetwork {
        owner: r,
        nodes,
        weights,
        params,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpanningTree {
    /// edges as (i, j) with i < j
    pub edges: BTreeSet<(usize, usize)>,
    pub total_weight: f64,
}

/// Round to 12 significant digits; keeps Kruskal's tie-break insensitive to
/// floating-point noise in derived weights.
fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let mag = x.abs().log10().floor();
    let scale = 10f64.powf(11.0 - mag);
    (x * scale).round() / scale
}

struct Dsu {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            self.parent[x] = self.find(self.parent[x]);
        }
        self.parent[x]
    }

    fn union(&mut self, x: usize, y: usize) -> bool {
        let (rx, ry) = (self.find(x), self.find(y));
        if rx == ry {
            return false;
        }
        match self.rank[rx].cmp(&self.rank[ry]) {
            std::cmp::Ordering::Less => self.parent[rx] = ry,
            std::cmp::Ordering::Greater => self.parent[ry] = rx,
            std::cmp::Ordering::Equal => {
                self.parent[ry] = rx;
                self.rank[rx] += 1;
            }
        }
        true
    }
}

/// Minimum spanning tree of the subgraph induced by `nodes`, which must
/// contain the owner. Kruskal with edges ordered by (weight, smaller id,
/// larger id) so ties resolve deterministically.
pub fn mst(cn: &CostNetwork, nodes: &BTreeSet<usize>) -> Result<SpanningTree> {
    if !nodes.contains(&cn.owner) {
        return Err(Error::OwnerNotInSet(cn.owner));
    }
    let index: BTreeMap<usize, usize> = nodes.iter().enumerate().map(|(k, &n)| (n, k)).collect();
    let mut edges: Vec<(f64, usize, usize, f64)> = cn
        .edges()
        .filter(|&(i, j, _)| nodes.contains(&i) && nodes.contains(&j))
        .map(|(i, j, w)| (round_sig(w), i, j, w))
        .collect();
    edges.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let mut dsu = Dsu::new(nodes.len());
    let mut tree = BTreeSet::new();
    let mut total = 0.0;
    for (_, i, j, w) in edges {
        if dsu.union(index[&i], index[&j]) {
            tree.insert((i, j));
            total += w;
        }
    }
    if tree.len() + 1 != nodes.len() {
        return Err(Error::InvalidNetwork(
            "induced cost subgraph is not connected".into(),
        ));
    }
    Ok(SpanningTree {
        edges: tree,
        total_weight: total,
    })
}

/// Small fixture used across unit tests: weights (r1,b1)=100,
/// (r1,b2)=80, (r1,b3)=90, (b1,b2)=30, (b1,b3)=40. Nodes: 0=r1, 1=b1, 2=b2, 3=b3.
#[cfg(test)]
pub(crate) fn example_cost_network() -> CostNetwork {
    CostNetwork::from_edges(
        0,
        &[1, 2, 3],
        &[
            (0, 1, 100.0),
            (0, 2, 80.0),
            (0, 3, 90.0),
            (1, 2, 30.0),
            (1, 3, 40.0),
        ],
        CostParams {
            gamma: 1.0,
            xi: 1.0,
            beta: 2.0,
        },
    )
    .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_node() -> PowerNetwork {
        PowerNetwork::new(
            vec!["r1".into(), "b1".into()],
            vec![Role::Retailer, Role::Consumer],
            BTreeMap::from([((0, 1), 0.5)]),
            vec![2.0, 2.0],
        )
        .unwrap()
    }

    #[test]
    fn adjacency_single_edge() {
        let (a, b) = two_node().adjacency_matrices();
        assert_eq!(a[(0, 1)], 2.0);
        assert_eq!(a[(1, 0)], 2.0);
        assert_eq!(a[(0, 0)], 0.0);
        assert_eq!(b[(0, 1)], 1);
        assert_eq!(b[(1, 1)], 0);
    }

    #[test]
    fn adjacency_chain_two_paths() {
        // 3-node chain 1-2-3 with unit resistances: A^2 and B^2 see the 2-path
        let net = PowerNetwork::new(
            vec!["r".into(), "m".into(), "b".into()],
            vec![Role::Retailer, Role::Consumer, Role::Consumer],
            BTreeMap::from([((0, 1), 1.0), ((1, 2), 1.0)]),
            vec![1.0; 3],
        )
        .unwrap();
        let (a, b) = net.adjacency_matrices();
        let a2 = &a * &a;
        let b2 = &b * &b;
        assert_eq!(a2[(0, 2)], 1.0);
        assert_eq!(b2[(0, 2)], 1);
    }

    #[test]
    fn conductance_two_node() {
        // R_12 = 1, shunts = 2 → G = [[1.5, -1], [-1, 1.5]]
        let net = PowerNetwork::new(
            vec!["r1".into(), "b1".into()],
            vec![Role::Retailer, Role::Consumer],
            BTreeMap::from([((0, 1), 1.0)]),
            vec![2.0, 2.0],
        )
        .unwrap();
        let g = net.conductance_matrix();
        assert_relative_eq!(g[(0, 0)], 1.5);
        assert_relative_eq!(g[(0, 1)], -1.0);
        assert_relative_eq!(g[(1, 0)], -1.0);
        assert_relative_eq!(g[(1, 1)], 1.5);
    }

    #[test]
    fn conductance_row_sums_are_shunt_conductances() {
        let net = chain4();
        let g = net.conductance_matrix();
        for i in 0..net.len() {
            let row_sum: f64 = g.row(i).iter().sum();
            assert_relative_eq!(row_sum, 1.0 / net.shunt_resistance(i), epsilon = 1e-12);
        }
    }

    fn chain4() -> PowerNetwork {
        PowerNetwork::new(
            vec!["r".into(), "b1".into(), "b2".into(), "b3".into()],
            vec![Role::Retailer, Role::Consumer, Role::Consumer, Role::Consumer],
            BTreeMap::from([((0, 1), 0.5), ((1, 2), 0.25), ((2, 3), 0.2)]),
            vec![10.0, 20.0, 30.0, 40.0],
        )
        .unwrap()
    }

    #[test]
    fn direct_weight_direct_edge() {
        // A_rb = 5 S, gamma = 2, xi = 3 → 13
        let net = PowerNetwork::new(
            vec!["r".into(), "b".into()],
            vec![Role::Retailer, Role::Consumer],
            BTreeMap::from([((0, 1), 0.2)]),
            vec![1.0, 1.0],
        )
        .unwrap();
        let (a, b) = net.adjacency_matrices();
        assert_relative_eq!(direct_weight(0, 1, &a, &b, 2.0, 3.0).unwrap(), 13.0);
    }

    #[test]
    fn direct_weight_two_step_geometric_mean() {
        // only path r-m-b with A_rm = 4, A_mb = 9: (36/1)^(1/2) = 6
        let net = PowerNetwork::new(
            vec!["r".into(), "m".into(), "b".into()],
            vec![Role::Retailer, Role::Consumer, Role::Consumer],
            BTreeMap::from([((0, 1), 0.25), ((1, 2), 1.0 / 9.0)]),
            vec![1.0; 3],
        )
        .unwrap();
        let (a, b) = net.adjacency_matrices();
        assert_relative_eq!(direct_weight(0, 2, &a, &b, 1.0, 1e-300).unwrap(), 6.0, epsilon = 1e-9);
        // with xi = 3 the fee is linear in walk length: 6 + 2*3
        assert_relative_eq!(direct_weight(0, 2, &a, &b, 1.0, 3.0).unwrap(), 12.0, epsilon = 1e-9);
    }

    #[test]
    fn aggregate_weight_absent_without_adjacency() {
        let net = chain4();
        let (a, _) = net.adjacency_matrices();
        assert!(aggregate_weight(1, 3, &a, 1.0, 3.0, 2.0).is_none());
        // A_12 = 4 with gamma 1, beta 2, xi 3 → 4 + 6
        assert_relative_eq!(aggregate_weight(1, 2, &a, 1.0, 3.0, 2.0).unwrap(), 10.0);
    }

    #[test]
    fn beta_equal_xi_rejected() {
        let p = CostParams {
            gamma: 1.0,
            xi: 3.0,
            beta: 3.0,
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn cost_network_star_when_consumers_not_adjacent() {
        // r in the middle: consumers pairwise non-adjacent → no aggregate edges
        let net = PowerNetwork::new(
            vec!["r".into(), "b1".into(), "b2".into()],
            vec![Role::Retailer, Role::Consumer, Role::Consumer],
            BTreeMap::from([((0, 1), 1.0), ((0, 2), 1.0)]),
            vec![1.0; 3],
        )
        .unwrap();
        let cn = build_cost_network(
            &net,
            0,
            CostParams {
                gamma: 1.0,
                xi: 1.0,
                beta: 2.0,
            },
        )
        .unwrap();
        assert_eq!(cn.edges().count(), 2);
        assert!(cn.weight(1, 2).is_none());
        assert_relative_eq!(cn.weight(0, 1).unwrap(), 2.0);
    }

    #[test]
    fn mst_example_network() {
        let cn = example_cost_network();
        let tree = mst(&cn, &BTreeSet::from([0, 1, 2, 3])).unwrap();
        assert_eq!(tree.edges, BTreeSet::from([(0, 2), (1, 2), (1, 3)]));
        assert_relative_eq!(tree.total_weight, 150.0);
    }

    #[test]
    fn mst_singleton_and_pair() {
        let cn = example_cost_network();
        let t0 = mst(&cn, &BTreeSet::from([0])).unwrap();
        assert!(t0.edges.is_empty());
        assert_eq!(t0.total_weight, 0.0);
        let t1 = mst(&cn, &BTreeSet::from([0, 1])).unwrap();
        assert_eq!(t1.edges, BTreeSet::from([(0, 1)]));
        assert_relative_eq!(t1.total_weight, 100.0);
    }

    #[test]
    fn mst_requires_owner() {
        let cn = example_cost_network();
        assert!(mst(&cn, &BTreeSet::from([1, 2])).is_err());
    }

    #[test]
    fn mst_bounded_by_star() {
        let cn = example_cost_network();
        let nodes = BTreeSet::from([0, 1, 2, 3]);
        let tree = mst(&cn, &nodes).unwrap();
        let star: f64 = [1, 2, 3].iter().map(|&b| cn.weight(0, b).unwrap()).sum();
        assert!(tree.total_weight <= star);
    }

    #[test]
    fn mst_monotone_in_node_set() {
        let cn = example_cost_network();
        let small = mst(&cn, &BTreeSet::from([0, 1])).unwrap();
        let large = mst(&cn, &BTreeSet::from([0, 1, 2, 3])).unwrap();
        assert!(small.total_weight <= large.total_weight);
    }

    #[test]
    fn mst_deterministic_under_ties() {
        // all weights equal; the tie-break picks lexicographically smallest edges
        let cn = CostNetwork::from_edges(
            0,
            &[1, 2],
            &[(0, 1, 5.0), (0, 2, 5.0), (1, 2, 5.0)],
            CostParams {
                gamma: 1.0,
                xi: 1.0,
                beta: 2.0,
            },
        )
        .unwrap();
        let tree = mst(&cn, &BTreeSet::from([0, 1, 2])).unwrap();
        assert_eq!(tree.edges, BTreeSet::from([(0, 1), (0, 2)]));
    }
}
