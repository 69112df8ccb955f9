//! Stationary-point network: rates, fastest paths and connectivity growth.
//!
//! Rates are computed in `f64` whatever the scalar of the landscape, since
//! Arrhenius factors underflow quickly in single precision.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::align::aligned_distance;
use crate::landscape::Landscape;
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::transition::{attempt_connection, SearchConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetworkError {
    #[error("temperature must be positive")]
    BadTemperature,
    #[error("transition state {ts} lies {depth:e} below minimum {min}")]
    NegativeBarrier { ts: usize, min: usize, depth: f64 },
    #[error("barrier is negative ({0:e})")]
    Barrier(f64),
    #[error("transition state {ts} references unknown minimum {min}")]
    UnknownMinimum { ts: usize, min: usize },
    #[error("unknown minimum id {0}")]
    UnknownId(usize),
    #[error("minimum {0} has no neighbours")]
    Isolated(usize),
    #[error("source or sink set is empty")]
    EmptySet,
    #[error("minimum {0} is in both source and sink")]
    Overlap(usize),
    #[error("sink is unreachable from minimum {0}")]
    Unreachable(usize),
    #[error("escape probability underflow while removing minimum {0}")]
    Underflow(usize),
}

/// Reduced temperature, `k_B = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateParams {
    pub temperature: f64,
}

impl RateParams {
    pub fn new(temperature: f64) -> Result<Self, NetworkError> {
        if temperature > 0.0 && temperature.is_finite() {
            Ok(RateParams { temperature })
        } else {
            Err(NetworkError::BadTemperature)
        }
    }
}

/// Arrhenius rate with unit prefactor.
pub fn elementary_rate(j_min: f64, j_ts: f64, p: RateParams) -> Result<f64, NetworkError> {
    let barrier = j_ts - j_min;
    if barrier < 0.0 {
        return Err(NetworkError::Barrier(barrier));
    }
    Ok((-barrier / p.temperature).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub ts: usize,
    pub a: usize,
    pub b: usize,
    pub cost: f64,
}

/// Undirected multigraph of minima linked by transition states.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    costs: Vec<f64>,
    edges: Vec<Edge>,
    /// `(edge index, neighbour)` per minimum.
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Network {
    /// Minima costs indexed by id; edges as `(a, b, J_ts)`. Transition-state
    /// costs below an endpoint by no more than `tol` are raised to it.
    pub fn from_parts(
        costs: Vec<f64>,
        edges: &[(usize, usize, f64)],
        tol: f64,
    ) -> Result<Self, NetworkError> {
        let list = edges
            .iter()
            .enumerate()
            .map(|(ts, &(a, b, cost))| Edge { ts, a, b, cost })
            .collect();
        Network::build(costs, list, tol)
    }

    pub fn from_landscape<T: Scalar>(land: &Landscape<T>, tol: f64) -> Result<Self, NetworkError> {
        let costs = land
            .minima
            .records()
            .iter()
            .map(|m| m.cost.as_f64())
            .collect();
        let edges = land
            .transition_states
            .iter()
            .map(|t| Edge {
                ts: t.id,
                a: t.connected[0],
                b: t.connected[1],
                cost: t.cost.as_f64(),
            })
            .collect();
        Network::build(costs, edges, tol)
    }

    fn build(costs: Vec<f64>, mut edges: Vec<Edge>, tol: f64) -> Result<Self, NetworkError> {
        let n = costs.len();
        let mut adjacency = vec![Vec::new(); n];
        for (e, edge) in edges.iter_mut().enumerate() {
            for m in [edge.a, edge.b] {
                if m >= n {
                    return Err(NetworkError::UnknownMinimum {
                        ts: edge.ts,
                        min: m,
                    });
                }
                let depth = costs[m] - edge.cost;
                if depth > tol {
                    return Err(NetworkError::NegativeBarrier {
                        ts: edge.ts,
                        min: m,
                        depth,
                    });
                }
                if depth > 0.0 {
                    edge.cost = costs[m];
                }
            }
            adjacency[edge.a].push((e, edge.b));
            if edge.a != edge.b {
                adjacency[edge.b].push((e, edge.a));
            }
        }
        Ok(Network {
            costs,
            edges,
            adjacency,
        })
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    pub fn cost(&self, id: usize) -> f64 {
        self.costs[id]
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbours(&self, id: usize) -> &[(usize, usize)] {
        &self.adjacency[id]
    }

    pub fn global_minimum(&self) -> Option<usize> {
        (0..self.len()).min_by(|&a, &b| self.costs[a].total_cmp(&self.costs[b]).then(a.cmp(&b)))
    }

    /// Component label per minimum; labels are the smallest member id.
    pub fn components(&self) -> Vec<usize> {
        let mut uf = UnionFind::new(self.len());
        for e in &self.edges {
            uf.union(e.a, e.b);
        }
        let mut label = vec![usize::MAX; self.len()];
        for i in 0..self.len() {
            let r = uf.find(i);
            if label[r] == usize::MAX {
                label[r] = i;
            }
            label[i] = label[r];
        }
        label
    }

    pub fn n_components(&self) -> usize {
        let c = self.components();
        (0..self.len()).filter(|&i| c[i] == i).count()
    }

    pub fn is_connected(&self) -> bool {
        self.n_components() <= 1
    }

    /// Summed rates from `i` to each neighbour, self-loops excluded.
    fn out_rates(&self, i: usize, p: RateParams) -> BTreeMap<usize, f64> {
        let mut out = BTreeMap::new();
        for &(e, j) in &self.adjacency[i] {
            if j == i {
                continue;
            }
            let k = (-(self.edges[e].cost - self.costs[i]).max(0.0) / p.temperature).exp();
            *out.entry(j).or_insert(0.0) += k;
        }
        out
    }

    /// Waiting time and branching probabilities out of minimum `i`.
    pub fn branching(
        &self,
        i: usize,
        p: RateParams,
    ) -> Result<(f64, BTreeMap<usize, f64>), NetworkError> {
        if i >= self.len() {
            return Err(NetworkError::UnknownId(i));
        }
        let rates = self.out_rates(i, p);
        let total: f64 = rates.values().sum();
        if rates.is_empty() || !(total > 0.0) {
            return Err(NetworkError::Isolated(i));
        }
        Ok((
            1.0 / total,
            rates.into_iter().map(|(j, k)| (j, k / total)).collect(),
        ))
    }

    /// Boltzmann-weighted rate from `sources` into `sink` by graph
    /// transformation.
    pub fn overall_rate(
        &self,
        sources: &[usize],
        sink: &[usize],
        p: RateParams,
    ) -> Result<f64, NetworkError> {
        self.overall_rate_ordered(sources, sink, p, RemovalOrder::MinDegree)
    }

    pub fn overall_rate_ordered(
        &self,
        sources: &[usize],
        sink: &[usize],
        p: RateParams,
        order: RemovalOrder,
    ) -> Result<f64, NetworkError> {
        let (sources, sink) = self.check_sets(sources, sink)?;
        let j0 = sources
            .iter()
            .map(|&s| self.costs[s])
            .fold(f64::INFINITY, f64::min);
        let mut num = 0.0;
        let mut den = 0.0;
        for &s in &sources {
            let w = (-(self.costs[s] - j0) / p.temperature).exp();
            num += w * self.source_rate(s, &sink, p, &order)?;
            den += w;
        }
        Ok(num / den)
    }

    fn check_sets(
        &self,
        sources: &[usize],
        sink: &[usize],
    ) -> Result<(BTreeSet<usize>, BTreeSet<usize>), NetworkError> {
        if sources.is_empty() || sink.is_empty() {
            return Err(NetworkError::EmptySet);
        }
        let a: BTreeSet<usize> = sources.iter().copied().collect();
        let b: BTreeSet<usize> = sink.iter().copied().collect();
        if let Some(&bad) = a.iter().chain(&b).find(|&&i| i >= self.len()) {
            return Err(NetworkError::UnknownId(bad));
        }
        if let Some(&both) = a.intersection(&b).next() {
            return Err(NetworkError::Overlap(both));
        }
        Ok((a, b))
    }

    /// `P_{s->sink} / tau_s` after removing every other non-sink minimum
    /// reachable from `s`; equals the inverse mean first-passage time.
    fn source_rate(
        &self,
        s: usize,
        sink: &BTreeSet<usize>,
        p: RateParams,
        order: &RemovalOrder,
    ) -> Result<f64, NetworkError> {
        const SINK: usize = usize::MAX;
        // minima reachable from s without entering the sink
        let mut live = BTreeSet::from([s]);
        let mut stack = vec![s];
        let mut touches_sink = false;
        while let Some(i) = stack.pop() {
            for &(_, j) in &self.adjacency[i] {
                if sink.contains(&j) {
                    touches_sink = true;
                } else if live.insert(j) {
                    stack.push(j);
                }
            }
        }
        if !touches_sink {
            return Err(NetworkError::Unreachable(s));
        }
        let mut prob: BTreeMap<usize, BTreeMap<usize, f64>> = BTreeMap::new();
        let mut tau: BTreeMap<usize, f64> = BTreeMap::new();
        for &i in &live {
            let (t, row) = self.branching(i, p)?;
            let mut merged = BTreeMap::new();
            for (j, pij) in row {
                *merged
                    .entry(if sink.contains(&j) { SINK } else { j })
                    .or_insert(0.0) += pij;
            }
            prob.insert(i, merged);
            tau.insert(i, t);
        }

        let mut pending: Vec<usize> = live.iter().copied().filter(|&i| i != s).collect();
        if let RemovalOrder::Shuffled(seed) = order {
            pending.shuffle(&mut ChaCha8Rng::seed_from_u64(*seed));
        }
        while !pending.is_empty() {
            let pick = match order {
                RemovalOrder::MinDegree => (0..pending.len())
                    .min_by_key(|&q| (prob[&pending[q]].len(), pending[q]))
                    .unwrap(),
                RemovalOrder::Shuffled(_) => pending.len() - 1,
            };
            let x = pending.swap_remove(pick);
            let row_x = prob.remove(&x).unwrap();
            let tau_x = tau.remove(&x).unwrap();
            // 1 - P_xx summed from the escape terms to avoid cancellation
            let escape: f64 = row_x.iter().filter(|(&j, _)| j != x).map(|(_, &v)| v).sum();
            if !(escape > 0.0) {
                return Err(NetworkError::Underflow(x));
            }
            let preds: Vec<usize> = row_x
                .keys()
                .copied()
                .filter(|&j| j != x && j != SINK)
                .collect();
            for i in preds {
                let row_i = prob.get_mut(&i).unwrap();
                let Some(p_ix) = row_i.remove(&x) else {
                    continue;
                };
                let f = p_ix / escape;
                for (&j, &p_xj) in &row_x {
                    if j != x {
                        *row_i.entry(j).or_insert(0.0) += f * p_xj;
                    }
                }
                *tau.get_mut(&i).unwrap() += f * tau_x;
            }
        }
        let to_sink = prob[&s].get(&SINK).copied().unwrap_or(0.0);
        Ok(to_sink / tau[&s])
    }

    /// Most probable route by Dijkstra with edge weights `-ln P_ij`.
    pub fn fastest_path(
        &self,
        source: usize,
        sink: usize,
        p: RateParams,
    ) -> Result<Path, NetworkError> {
        let n = self.len();
        for id in [source, sink] {
            if id >= n {
                return Err(NetworkError::UnknownId(id));
            }
        }
        let mut dist = vec![f64::INFINITY; n];
        let mut prev: Vec<Option<usize>> = vec![None; n];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(Reverse((Weight(0.0), source)));
        while let Some(Reverse((Weight(d), i))) = heap.pop() {
            if d > dist[i] || i == sink {
                continue;
            }
            let Ok((_, row)) = self.branching(i, p) else {
                continue;
            };
            for (j, pij) in row {
                let nd = d - pij.ln();
                if nd < dist[j] {
                    dist[j] = nd;
                    prev[j] = Some(i);
                    heap.push(Reverse((Weight(nd), j)));
                }
            }
        }
        if !dist[sink].is_finite() {
            return Err(NetworkError::Unreachable(source));
        }
        let mut nodes = vec![sink];
        while let Some(q) = prev[*nodes.last().unwrap()] {
            nodes.push(q);
        }
        nodes.reverse();
        let mut steps = vec![PathStep::minimum(nodes[0], self.costs[nodes[0]])];
        for w in nodes.windows(2) {
            let e = self.lowest_edge(w[0], w[1]);
            steps.push(PathStep {
                kind: StationaryKind::TransitionState,
                id: self.edges[e].ts,
                cost: self.edges[e].cost,
            });
            steps.push(PathStep::minimum(w[1], self.costs[w[1]]));
        }
        Ok(Path {
            steps,
            weight: dist[sink],
        })
    }

    fn lowest_edge(&self, a: usize, b: usize) -> usize {
        self.adjacency[a]
            .iter()
            .filter(|&&(_, j)| j == b)
            .map(|&(e, _)| e)
            .min_by(|&x, &y| self.edges[x].cost.total_cmp(&self.edges[y].cost))
            .expect("adjacent minima share an edge")
    }

    /// Searches for a temperature at which the rate lies in `[lo, hi]`,
    /// doubling or halving from `t0`.
    pub fn scan_temperature(
        &self,
        sources: &[usize],
        sink: &[usize],
        t0: f64,
        lo: f64,
        hi: f64,
    ) -> Result<Option<(f64, f64)>, NetworkError> {
        let (mut t_lo, mut t_hi) = (0.0f64, f64::INFINITY);
        let mut t = t0;
        for _ in 0..200 {
            let rate = self.overall_rate(sources, sink, RateParams::new(t)?)?;
            if rate > hi {
                t_hi = t;
            } else if rate < lo {
                t_lo = t;
            } else {
                return Ok(Some((t, rate)));
            }
            t = if t_hi.is_finite() {
                0.5 * (t_lo + t_hi)
            } else {
                2.0 * t
            };
            if t_hi.is_finite() && (t_hi - t_lo) <= 1e-12 * t_hi {
                break;
            }
        }
        Ok(None)
    }
}

/// Order in which graph transformation removes intermediate minima.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemovalOrder {
    MinDegree,
    Shuffled(u64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Weight(f64);

impl Eq for Weight {}

impl PartialOrd for Weight {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Weight {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StationaryKind {
    Minimum,
    TransitionState,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathStep {
    pub kind: StationaryKind,
    pub id: usize,
    pub cost: f64,
}

impl PathStep {
    fn minimum(id: usize, cost: f64) -> Self {
        PathStep {
            kind: StationaryKind::Minimum,
            id,
            cost,
        }
    }
}

/// Alternating minima and transition states from source to sink.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub steps: Vec<PathStep>,
    /// Sum of `-ln P` over the hops.
    pub weight: f64,
}

impl Path {
    pub fn minima(&self) -> Vec<usize> {
        self.steps
            .iter()
            .filter(|s| s.kind == StationaryKind::Minimum)
            .map(|s| s.id)
            .collect()
    }

    pub fn highest_cost(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.cost)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        // keep the smaller root so labels are stable
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairChoice {
    Pair(usize, usize),
    AllConnected,
    /// Every candidate pair has already been tried.
    Exhausted,
}

/// Next pair to connect: the lowest-cost minimum outside the global
/// minimum's component, and its nearest member of that component.
pub fn select_next_pair<T: Scalar>(
    land: &Landscape<T>,
    net: &Network,
    tried: &HashSet<(usize, usize)>,
) -> PairChoice {
    let Some(gm) = net.global_minimum() else {
        return PairChoice::AllConnected;
    };
    let comp = net.components();
    let mut outside: Vec<usize> = (0..net.len()).filter(|&i| comp[i] != comp[gm]).collect();
    if outside.is_empty() {
        return PairChoice::AllConnected;
    }
    outside.sort_by(|&a, &b| net.cost(a).total_cmp(&net.cost(b)).then(a.cmp(&b)));
    let inside: Vec<usize> = (0..net.len()).filter(|&i| comp[i] == comp[gm]).collect();
    for u in outside {
        let cu = &land.minima.get(u).unwrap().centres;
        let mut near: Vec<(T, usize)> = inside
            .iter()
            .map(|&v| {
                (
                    aligned_distance(cu, &land.minima.get(v).unwrap().centres),
                    v,
                )
            })
            .collect();
        near.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .unwrap_or(Ordering::Equal)
                .then(a.1.cmp(&b.1))
        });
        if let Some(&(_, v)) = near.iter().find(|&&(_, v)| !tried.contains(&(u, v))) {
            return PairChoice::Pair(u, v);
        }
    }
    PairChoice::Exhausted
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GrowthReport {
    pub components: usize,
    pub searches: usize,
    pub successes: usize,
    pub transition_states: usize,
    pub new_minima: usize,
    /// One component remains.
    pub connected: bool,
}

/// Connects minima pairwise until one component remains or `budget`
/// connection attempts have been spent.
pub fn grow_connected<T: Scalar>(
    points: &Matrix<T>,
    land: &mut Landscape<T>,
    budget: usize,
    cfg: &SearchConfig<T>,
    tol: f64,
) -> Result<GrowthReport, NetworkError> {
    let mut report = GrowthReport::default();
    let mut tried = HashSet::new();
    loop {
        let net = Network::from_landscape(land, tol)?;
        report.components = net.n_components();
        let choice = select_next_pair(land, &net, &tried);
        let PairChoice::Pair(u, v) = choice else {
            report.connected = choice == PairChoice::AllConnected;
            return Ok(report);
        };
        if report.searches >= budget {
            return Ok(report);
        }
        tried.insert((u, v));
        report.searches += 1;
        match attempt_connection(points, land, v, u, cfg) {
            Ok(r) => {
                if !r.transition_states.is_empty() {
                    report.successes += 1;
                }
                report.transition_states += r.transition_states.len();
                report.new_minima += r.new_minima.len();
                log::info!(
                    "search {}: {v} -> {u}, {} new TS, {} new minima, {} failures",
                    report.searches,
                    r.transition_states.len(),
                    r.new_minima.len(),
                    r.failures.len()
                );
            }
            Err(e) => log::warn!("search {v} -> {u} failed: {e}"),
        }
    }
}
