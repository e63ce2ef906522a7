//! Coalitional game kernel: characteristic function over cost networks,
//! Shapley imputations, and numerical verifiers for the stability properties
//! of the retailer game (permutational convexity, subadditivity, concavity,
//! D_hp stability, core membership).

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::lp;
use crate::netgraph::{mst, CostNetwork, PowerNetwork, Role};

/// Absolute tolerance for payoff comparisons, in currency units.
pub const PAYOFF_TOL: f64 = 1e-9;

/// Default cap on exact Shapley enumeration (consumers).
pub const EXACT_SHAPLEY_CAP: usize = 10;

/// A retailer with its assigned consumers and the game quantities attached.
#[derive(Debug, Clone)]
pub struct Coalition {
    pub retailer: usize,
    pub consumers: BTreeSet<usize>,
    pub value: f64,
    pub mst_cost: f64,
    pub imputation: BTreeMap<usize, f64>,
}

impl Coalition {
    pub fn members(&self) -> BTreeSet<usize> {
        let mut s = self.consumers.clone();
        s.insert(self.retailer);
        s
    }

    /// Evaluate value, MST cost, and Shapley imputation for a consumer set.
    pub fn evaluate(retailer: usize, consumers: BTreeSet<usize>, cn: &CostNetwork) -> Result<Self> {
        let mut members = consumers.clone();
        members.insert(retailer);
        let tree = mst(cn, &members)?;
        let value = coalition_value(&members, cn);
        let imputation = shapley(&members, cn)?;
        Ok(Self {
            retailer,
            consumers,
            value,
            mst_cost: tree.total_weight,
            imputation,
        })
    }
}

/// A covering of the player set by disjoint retailer coalitions.
#[derive(Debug, Clone)]
pub struct CoalitionPartition {
    pub coalitions: Vec<Coalition>,
}

impl CoalitionPartition {
    pub fn validate(&self, net: &PowerNetwork) -> Result<()> {
        let mut seen = BTreeSet::new();
        for c in &self.coalitions {
            for m in c.members() {
                if !seen.insert(m) {
                    return Err(Error::InvalidScenario(format!(
                        "node {m} appears in more than one coalition"
                    )));
                }
            }
        }
        if seen.len() != net.len() {
            return Err(Error::InvalidScenario(
                "coalitions do not cover the player set".into(),
            ));
        }
        Ok(())
    }
}

/// A single consumer ordering and the marginal contributions along it.
#[derive(Debug, Clone)]
pub struct MarginalVector {
    pub ordering: Vec<usize>,
    pub marginals: BTreeMap<usize, f64>,
}

/// A set is viable iff it contains exactly one retailer.
pub fn is_viable(s: &BTreeSet<usize>, net: &PowerNetwork) -> bool {
    s.iter().filter(|&&i| net.role(i) == Role::Retailer).count() == 1
}

/// Characteristic function ν: sum of direct weights minus MST cost for sets
/// that are viable with respect to `cn`'s owner; 0 otherwise. Membership of a
/// node outside `cn` (another retailer) makes the set nonviable.
pub fn coalition_value(s: &BTreeSet<usize>, cn: &CostNetwork) -> f64 {
    if !s.contains(&cn.owner) || s.iter().any(|n| !cn.nodes.contains(n)) {
        return 0.0;
    }
    let tree = match mst(cn, s) {
        Ok(t) => t,
        Err(_) => return 0.0,
    };
    let direct: f64 = s
        .iter()
        .filter(|&&b| b != cn.owner)
        .map(|&b| cn.weight(cn.owner, b).unwrap_or(0.0))
        .sum();
    direct - tree.total_weight
}

/// Memoised ν over all consumer subsets of one coalition, indexed by bitmask.
pub(crate) struct SubsetValues {
    pub consumers: Vec<usize>,
    pub value: Vec<f64>,
    pub mst_cost: Vec<f64>,
}

impl SubsetValues {
    pub fn new(s: &BTreeSet<usize>, cn: &CostNetwork) -> Result<Self> {
        let consumers: Vec<usize> = s.iter().copied().filter(|&n| n != cn.owner).collect();
        let k = consumers.len();
        if k > 24 {
            return Err(Error::EnumerationCap { got: k, cap: 24 });
        }
        let mut value = vec![0.0; 1 << k];
        let mut mst_cost = vec![0.0; 1 << k];
        for mask in 0..(1usize << k) {
            let mut set = BTreeSet::from([cn.owner]);
            for (i, &b) in consumers.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    set.insert(b);
                }
            }
            let tree = mst(cn, &set)?;
            mst_cost[mask] = tree.total_weight;
            let direct: f64 = set
                .iter()
                .filter(|&&b| b != cn.owner)
                .map(|&b| cn.weight(cn.owner, b).unwrap())
                .sum();
            value[mask] = direct - tree.total_weight;
        }
        Ok(Self {
            consumers,
            value,
            mst_cost,
        })
    }
}

/// Exact Shapley value over all k! consumer orderings (retailer fixed first).
/// Errors beyond [`EXACT_SHAPLEY_CAP`] consumers; use [`shapley_sampled`] then.
pub fn shapley(s: &BTreeSet<usize>, cn: &CostNetwork) -> Result<BTreeMap<usize, f64>> {
    let sv = SubsetValues::new(s, cn)?;
    let k = sv.consumers.len();
    if k > EXACT_SHAPLEY_CAP {
        return Err(Error::EnumerationCap {
            got: k,
            cap: EXACT_SHAPLEY_CAP,
        });
    }
    if k == 0 {
        return Ok(BTreeMap::new());
    }
    let mut sums = vec![0.0; k];
    let mut perm: Vec<usize> = (0..k).collect();
    let mut count = 0u64;
    permute(&mut perm, 0, &mut |p| {
        let mut mask = 0usize;
        for &i in p {
            let next = mask | (1 << i);
            sums[i] += sv.value[next] - sv.value[mask];
            mask = next;
        }
        count += 1;
    });
    let total = count as f64;
    Ok(sv
        .consumers
        .iter()
        .enumerate()
        .map(|(i, &b)| (b, sums[i] / total))
        .collect())
}

fn permute(perm: &mut Vec<usize>, at: usize, f: &mut impl FnMut(&[usize])) {
    if at == perm.len() {
        f(perm);
        return;
    }
    for i in at..perm.len() {
        perm.swap(at, i);
        permute(perm, at + 1, f);
        perm.swap(at, i);
    }
}

#[derive(Debug, Clone)]
pub struct SampledShapley {
    pub imputation: BTreeMap<usize, f64>,
    pub std_err: BTreeMap<usize, f64>,
    pub n_orderings: usize,
}

/// Monte-Carlo Shapley over uniformly random consumer orderings; deterministic
/// for a given seed. For coalitions beyond the exact-enumeration cap.
pub fn shapley_sampled(
    s: &BTreeSet<usize>,
    cn: &CostNetwork,
    n_orderings: usize,
    seed: u64,
) -> Result<SampledShapley> {
    let sv = SubsetValues::new(s, cn)?;
    let k = sv.consumers.len();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut sums = vec![0.0; k];
    let mut sq_sums = vec![0.0; k];
    let mut perm: Vec<usize> = (0..k).collect();
    for _ in 0..n_orderings {
        perm.shuffle(&mut rng);
        let mut mask = 0usize;
        for &i in &perm {
            let next = mask | (1 << i);
            let m = sv.value[next] - sv.value[mask];
            sums[i] += m;
            sq_sums[i] += m * m;
            mask = next;
        }
    }
    let n = n_orderings as f64;
    let mut imputation = BTreeMap::new();
    let mut std_err = BTreeMap::new();
    for (i, &b) in sv.consumers.iter().enumerate() {
        let mean = sums[i] / n;
        let var = (sq_sums[i] / n - mean * mean).max(0.0);
        imputation.insert(b, mean);
        std_err.insert(b, (var / n).sqrt());
    }
    Ok(SampledShapley {
        imputation,
        std_err,
        n_orderings,
    })
}

/// The MST-induced player order: retailer first, then consumers in the order
/// a Prim growth of the (deterministic) MST reaches them. Any node on the MST
/// path from `b` to the retailer precedes `b`.
pub fn mst_order(s: &BTreeSet<usize>, cn: &CostNetwork) -> Result<Vec<usize>> {
    let tree = mst(cn, s)?;
    let mut order = vec![cn.owner];
    let mut in_tree = BTreeSet::from([cn.owner]);
    while order.len() < s.len() {
        let mut best: Option<(f64, usize, usize)> = None;
        for &(i, j) in &tree.edges {
            let (t, u) = if in_tree.contains(&i) && !in_tree.contains(&j) {
                (i, j)
            } else if in_tree.contains(&j) && !in_tree.contains(&i) {
                (j, i)
            } else {
                continue;
            };
            let w = cn.weight(t, u).unwrap();
            let cand = (w, t, u);
            if best.map_or(true, |b| {
                cand.0 < b.0 || (cand.0 == b.0 && (cand.1, cand.2) < (b.1, b.2))
            }) {
                best = Some(cand);
            }
        }
        let (_, _, u) = best.expect("spanning tree reaches every node");
        order.push(u);
        in_tree.insert(u);
    }
    Ok(order)
}

/// Exhaustive permutational-convexity check of the MST cost game along the
/// MST-induced order: c([k]∪S) − c([k]) ≤ c([j]∪S) − c([j]) for all
/// S ⊆ s∖[k] and k > j.
pub fn check_pc(s: &BTreeSet<usize>, cn: &CostNetwork) -> Result<bool> {
    if s.len() > 8 {
        return Err(Error::EnumerationCap { got: s.len(), cap: 8 });
    }
    let sv = SubsetValues::new(s, cn)?;
    let order = mst_order(s, cn)?;
    let k_players = order.len();
    // bit index of each consumer in the subset table
    let bit = |node: usize| sv.consumers.iter().position(|&b| b == node);
    let prefix_mask = |count: usize| -> usize {
        order[..count]
            .iter()
            .filter_map(|&n| bit(n))
            .fold(0, |m, i| m | (1 << i))
    };
    let cost = |mask: usize| sv.mst_cost[mask];
    for k in 2..=k_players {
        let mk = prefix_mask(k);
        let outside: Vec<usize> = order[k..].iter().filter_map(|&n| bit(n)).collect();
        for j in 1..k {
            let mj = prefix_mask(j);
            for sel in 0..(1usize << outside.len()) {
                let smask = outside
                    .iter()
                    .enumerate()
                    .filter(|&(t, _)| sel & (1 << t) != 0)
                    .fold(0, |m, (_, &i)| m | (1 << i));
                let lhs = cost(mk | smask) - cost(mk);
                let rhs = cost(mj | smask) - cost(mj);
                if lhs > rhs + PAYOFF_TOL {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// ν(S_r ∪ S_s) ≤ ν(S_r) + ν(S_s) for every retailer pair in the partition.
pub fn check_subadditive(
    partition: &CoalitionPartition,
    cns: &BTreeMap<usize, CostNetwork>,
) -> bool {
    let cs = &partition.coalitions;
    for (i, a) in cs.iter().enumerate() {
        for b in &cs[i + 1..] {
            let union: BTreeSet<usize> = a.members().union(&b.members()).copied().collect();
            let lhs = coalition_value(&union, &cns[&a.retailer]);
            let rhs = coalition_value(&a.members(), &cns[&a.retailer])
                + coalition_value(&b.members(), &cns[&b.retailer]);
            if lhs > rhs + PAYOFF_TOL {
                return false;
            }
        }
    }
    true
}

/// ν(S_r ∪ S_s) + ν(S_r ∩ S_s) ≤ ν(S_r) + ν(S_s) for every pair.
pub fn check_concave_balanced(
    partition: &CoalitionPartition,
    cns: &BTreeMap<usize, CostNetwork>,
) -> bool {
    let cs = &partition.coalitions;
    for (i, a) in cs.iter().enumerate() {
        for b in &cs[i + 1..] {
            let union: BTreeSet<usize> = a.members().union(&b.members()).copied().collect();
            let inter: BTreeSet<usize> = a.members().intersection(&b.members()).copied().collect();
            let lhs = coalition_value(&union, &cns[&a.retailer])
                + coalition_value(&inter, &cns[&a.retailer]);
            let rhs = coalition_value(&a.members(), &cns[&a.retailer])
                + coalition_value(&b.members(), &cns[&b.retailer]);
            if lhs > rhs + PAYOFF_TOL {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone)]
pub struct DhpReport {
    pub holds: bool,
    /// 1.0 when every sub-partition was enumerated; the sampled fraction of
    /// the Bell number otherwise.
    pub coverage: f64,
}

/// D_hp stability: no sub-partition of any coalition is collectively better
/// off, and no union of coalitions gains value. Coalitions beyond 8 members
/// are checked on sampled sub-partitions (seeded) with reported coverage.
pub fn check_dhp(
    partition: &CoalitionPartition,
    cns: &BTreeMap<usize, CostNetwork>,
    seed: u64,
) -> DhpReport {
    let mut holds = true;
    let mut coverage = 1.0_f64;

    for c in &partition.coalitions {
        let members: Vec<usize> = c.members().into_iter().collect();
        let cn = &cns[&c.retailer];
        let whole = coalition_value(&c.members(), cn);
        let value_of = |block: &[usize]| -> f64 {
            let set: BTreeSet<usize> = block.iter().copied().collect();
            coalition_value(&set, cn)
        };
        if members.len() <= 8 {
            let mut ok = true;
            for_each_partition(&members, &mut |blocks| {
                let total: f64 = blocks.iter().map(|b| value_of(b)).sum();
                if total > whole + PAYOFF_TOL {
                    ok = false;
                }
            });
            holds &= ok;
        } else {
            let bell = bell_number(members.len());
            let n_samples = 10_000usize;
            let mut rng = ChaCha12Rng::seed_from_u64(seed ^ c.retailer as u64);
            for _ in 0..n_samples {
                let blocks = random_partition(&members, &mut rng);
                let total: f64 = blocks.iter().map(|b| value_of(b)).sum();
                if total > whole + PAYOFF_TOL {
                    holds = false;
                }
            }
            coverage = coverage.min(n_samples as f64 / bell);
        }
    }

    // Condition on mergers: for every subset T of retailers,
    // Σ_{r∈T} ν(S_r) ≥ ν(∪_{r∈T} S_r).
    let cs = &partition.coalitions;
    for sel in 1..(1usize << cs.len()) {
        let mut union = BTreeSet::new();
        let mut sum = 0.0;
        let mut first_cn = None;
        for (i, c) in cs.iter().enumerate() {
            if sel & (1 << i) != 0 {
                union.extend(c.members());
                sum += coalition_value(&c.members(), &cns[&c.retailer]);
                first_cn.get_or_insert(&cns[&c.retailer]);
            }
        }
        let lhs = coalition_value(&union, first_cn.unwrap());
        if sum < lhs - PAYOFF_TOL {
            holds = false;
        }
    }

    DhpReport { holds, coverage }
}

fn bell_number(n: usize) -> f64 {
    let mut row = vec![1.0f64];
    for _ in 1..n {
        let mut next = vec![*row.last().unwrap()];
        for &v in &row {
            next.push(next.last().unwrap() + v);
        }
        row = next;
    }
    row[0]
}

/// Visit every set partition of `elems`.
fn for_each_partition(elems: &[usize], f: &mut impl FnMut(&[Vec<usize>])) {
    fn rec(elems: &[usize], at: usize, blocks: &mut Vec<Vec<usize>>, f: &mut impl FnMut(&[Vec<usize>])) {
        if at == elems.len() {
            f(blocks);
            return;
        }
        for i in 0..blocks.len() {
            blocks[i].push(elems[at]);
            rec(elems, at + 1, blocks, f);
            blocks[i].pop();
        }
        blocks.push(vec![elems[at]]);
        rec(elems, at + 1, blocks, f);
        blocks.pop();
    }
    rec(elems, 0, &mut Vec::new(), f);
}

fn random_partition(elems: &[usize], rng: &mut ChaCha12Rng) -> Vec<Vec<usize>> {
    use rand::Rng;
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for &e in elems {
        let choice = rng.gen_range(0..=blocks.len());
        if choice == blocks.len() {
            blocks.push(vec![e]);
        } else {
            blocks[choice].push(e);
        }
    }
    blocks
}

/// Core membership: tries the Shapley imputation, then the MST-order marginal
/// vector, then an LP feasibility search. Returns the verdict and a witness.
pub fn core_nonempty(
    s: &BTreeSet<usize>,
    cn: &CostNetwork,
) -> Result<(bool, Option<BTreeMap<usize, f64>>)> {
    let consumers: Vec<usize> = s.iter().copied().filter(|&n| n != cn.owner).collect();
    if consumers.len() > 8 {
        return Err(Error::EnumerationCap {
            got: consumers.len(),
            cap: 8,
        });
    }
    let sv = SubsetValues::new(s, cn)?;
    let grand = *sv.value.last().unwrap();
    let players: Vec<usize> = std::iter::once(cn.owner).chain(consumers.iter().copied()).collect();

    // ν for every subset of players, indexed over player positions; subsets
    // without the retailer carry zero value.
    let nu = |pmask: usize| -> f64 {
        if pmask & 1 == 0 {
            return 0.0;
        }
        sv.value[pmask >> 1]
    };
    let in_core = |a: &[f64]| -> bool {
        for pmask in 1..(1usize << players.len()) {
            let total: f64 = (0..players.len())
                .filter(|&i| pmask & (1 << i) != 0)
                .map(|i| a[i])
                .sum();
            if total < nu(pmask) - PAYOFF_TOL {
                return false;
            }
        }
        let all: f64 = a.iter().sum();
        (all - grand).abs() <= 1e-6 * grand.abs().max(1.0)
    };

    // Candidate 1: Shapley imputation, retailer keeps zero.
    let phi = shapley(s, cn)?;
    let mut a: Vec<f64> = vec![0.0; players.len()];
    for (i, &b) in consumers.iter().enumerate() {
        a[i + 1] = phi[&b];
    }
    if in_core(&a) {
        let witness = players.iter().copied().zip(a).collect();
        return Ok((true, Some(witness)));
    }

    // Candidate 2: marginal vector along the MST order.
    let order = mst_order(s, cn)?;
    let mut mask = 0usize;
    let mut a2 = vec![0.0; players.len()];
    for &node in &order {
        let pos = players.iter().position(|&p| p == node).unwrap();
        let next = mask | (1 << pos);
        a2[pos] = nu(next) - nu(mask);
        mask = next;
    }
    if in_core(&a2) {
        let witness = players.iter().copied().zip(a2).collect();
        return Ok((true, Some(witness)));
    }

    // LP feasibility over all coalition constraints.
    let mut a_ge = Vec::new();
    let mut b_ge = Vec::new();
    for pmask in 1..(1usize << players.len()) {
        let row: Vec<f64> = (0..players.len())
            .map(|i| if pmask & (1 << i) != 0 { 1.0 } else { 0.0 })
            .collect();
        a_ge.push(row);
        b_ge.push(nu(pmask));
    }
    let eq_row = vec![1.0; players.len()];
    match lp::feasible_point(&a_ge, &b_ge, &[eq_row], &[grand], 1e-9) {
        Some(x) => {
            let witness = players.iter().copied().zip(x).collect();
            Ok((true, Some(witness)))
        }
        None => Ok((false, None)),
    }
}

/// The savings assumption ν({r,b}) ≤ ν(s) for each member, phrased over an
/// arbitrary characteristic function so constructed counterexamples can be
/// exercised.
pub fn check_savings_with(
    retailer: usize,
    s: &BTreeSet<usize>,
    value: impl Fn(&BTreeSet<usize>) -> f64,
) -> bool {
    let consumers: Vec<usize> = s.iter().copied().filter(|&n| n != retailer).collect();
    if consumers.len() < 2 {
        return true;
    }
    let whole = value(s);
    consumers.iter().all(|&b| {
        let pair = BTreeSet::from([retailer, b]);
        value(&pair) <= whole + PAYOFF_TOL
    })
}

/// Savings validator on the MST characteristic function. Reports rather than
/// enforces: scenarios violating it are flagged, not aborted.
pub fn check_savings_assumption(s: &BTreeSet<usize>, cn: &CostNetwork) -> bool {
    check_savings_with(cn.owner, s, |t| coalition_value(t, cn))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::{example_cost_network, CostParams};
    use approx::assert_relative_eq;

    fn net3() -> PowerNetwork {
        PowerNetwork::new(
            vec!["r1".into(), "r2".into(), "b1".into(), "b2".into()],
            vec![Role::Retailer, Role::Retailer, Role::Consumer, Role::Consumer],
            BTreeMap::from([((0, 2), 1.0), ((1, 3), 1.0), ((2, 3), 1.0)]),
            vec![1.0; 4],
        )
        .unwrap()
    }

    #[test]
    fn viability() {
        let net = net3();
        assert!(is_viable(&BTreeSet::from([0, 2, 3]), &net));
        assert!(!is_viable(&BTreeSet::from([0, 1, 2]), &net));
        assert!(!is_viable(&BTreeSet::from([2, 3]), &net));
    }

    #[test]
    fn value_example_network() {
        let cn = example_cost_network();
        // direct 100+80+90 = 270, MST 150 → ν = 120
        let v = coalition_value(&BTreeSet::from([0, 1, 2, 3]), &cn);
        assert_relative_eq!(v, 120.0);
        assert_relative_eq!(coalition_value(&BTreeSet::from([0]), &cn), 0.0);
        // set containing an unknown node (another retailer) is nonviable
        assert_relative_eq!(coalition_value(&BTreeSet::from([0, 99]), &cn), 0.0);
    }

    #[test]
    fn shapley_two_symmetric_consumers() {
        // (r,b1)=10, (r,b2)=10, (b1,b2)=4: ν({r,b1,b2}) = 20-14 = 6 → Φ = (3,3)
        let cn = CostNetwork::from_edges(
            0,
            &[1, 2],
            &[(0, 1, 10.0), (0, 2, 10.0), (1, 2, 4.0)],
            CostParams { gamma: 1.0, xi: 1.0, beta: 2.0 },
        )
        .unwrap();
        let phi = shapley(&BTreeSet::from([0, 1, 2]), &cn).unwrap();
        assert_relative_eq!(phi[&1], 3.0, epsilon = 1e-12);
        assert_relative_eq!(phi[&2], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn shapley_single_consumer() {
        let cn = example_cost_network();
        let phi = shapley(&BTreeSet::from([0, 1]), &cn).unwrap();
        assert_relative_eq!(phi[&1], coalition_value(&BTreeSet::from([0, 1]), &cn));
    }

    #[test]
    fn shapley_efficiency() {
        let cn = example_cost_network();
        let s = BTreeSet::from([0, 1, 2, 3]);
        let phi = shapley(&s, &cn).unwrap();
        let total: f64 = phi.values().sum();
        assert_relative_eq!(total, coalition_value(&s, &cn), max_relative = 1e-9);
    }

    #[test]
    fn shapley_sampled_close_to_exact() {
        let cn = example_cost_network();
        let s = BTreeSet::from([0, 1, 2, 3]);
        let exact = shapley(&s, &cn).unwrap();
        let sampled = shapley_sampled(&s, &cn, 20_000, 7).unwrap();
        for (b, &v) in &exact {
            let err = sampled.std_err[b].max(1e-6);
            assert!((sampled.imputation[b] - v).abs() < 5.0 * err);
        }
    }

    #[test]
    fn pc_example_and_star() {
        let cn = example_cost_network();
        assert!(check_pc(&BTreeSet::from([0, 1, 2, 3]), &cn).unwrap());
        assert!(check_pc(&BTreeSet::from([0, 1]), &cn).unwrap());
        let star = CostNetwork::from_edges(
            0,
            &[1, 2, 3],
            &[(0, 1, 7.0), (0, 2, 3.0), (0, 3, 5.0)],
            CostParams { gamma: 1.0, xi: 1.0, beta: 2.0 },
        )
        .unwrap();
        assert!(check_pc(&BTreeSet::from([0, 1, 2, 3]), &star).unwrap());
    }

    #[test]
    fn mst_order_respects_paths() {
        let cn = example_cost_network();
        // MST edges {(0,2),(1,2),(1,3)}: path to b3 runs r-b2-b1-b3
        let order = mst_order(&BTreeSet::from([0, 1, 2, 3]), &cn).unwrap();
        assert_eq!(order, vec![0, 2, 1, 3]);
    }

    fn single_coalition_partition() -> (CoalitionPartition, BTreeMap<usize, CostNetwork>) {
        let cn = example_cost_network();
        let c = Coalition::evaluate(0, BTreeSet::from([1, 2, 3]), &cn).unwrap();
        (
            CoalitionPartition { coalitions: vec![c] },
            BTreeMap::from([(0, cn)]),
        )
    }

    #[test]
    fn dhp_example_holds() {
        let (p, cns) = single_coalition_partition();
        let report = check_dhp(&p, &cns, 1);
        assert!(report.holds);
        assert_eq!(report.coverage, 1.0);
    }

    #[test]
    fn subadditive_and_concave_hold() {
        let (p, cns) = single_coalition_partition();
        assert!(check_subadditive(&p, &cns));
        assert!(check_concave_balanced(&p, &cns));
    }

    #[test]
    fn core_example_has_shapley_witness() {
        let cn = example_cost_network();
        let (ok, witness) = core_nonempty(&BTreeSet::from([0, 1, 2, 3]), &cn).unwrap();
        assert!(ok);
        let w = witness.unwrap();
        let total: f64 = w.values().sum();
        assert_relative_eq!(total, 120.0, epsilon = 1e-6);
    }

    #[test]
    fn core_single_consumer() {
        let cn = example_cost_network();
        let (ok, witness) = core_nonempty(&BTreeSet::from([0, 1]), &cn).unwrap();
        assert!(ok);
        assert!(witness.is_some());
    }

    #[test]
    fn savings_example_holds() {
        let cn = example_cost_network();
        assert!(check_savings_assumption(&BTreeSet::from([0, 1, 2, 3]), &cn));
    }

    #[test]
    fn savings_counterexample_flags() {
        // hand-constructed ν violating the savings assumption
        let s = BTreeSet::from([0, 1, 2]);
        let bad = |t: &BTreeSet<usize>| -> f64 {
            if t.len() == 2 {
                10.0
            } else if t.len() == 3 {
                5.0
            } else {
                0.0
            }
        };
        assert!(!check_savings_with(0, &s, bad));
    }

    #[test]
    fn null_player_gets_zero() {
        // b3 attached only via an expensive direct edge equal to its best
        // connection: adding it never changes ν → imputation 0
        let cn = CostNetwork::from_edges(
            0,
            &[1, 2, 3],
            &[(0, 1, 10.0), (0, 2, 10.0), (1, 2, 4.0), (0, 3, 50.0)],
            CostParams { gamma: 1.0, xi: 1.0, beta: 2.0 },
        )
        .unwrap();
        let phi = shapley(&BTreeSet::from([0, 1, 2, 3]), &cn).unwrap();
        assert_relative_eq!(phi[&3], 0.0, epsilon = 1e-12);
    }
}
