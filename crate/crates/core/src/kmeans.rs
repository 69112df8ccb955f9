//! The K-means cost function, its local minimisation and the store of
//! distinct minima.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::lbfgs::{Lbfgs, LbfgsConfig, StepOutcome};
use crate::matrix::{Centres, Matrix};
use crate::scalar::{sq_dist, Scalar};

/// Hard cluster assignment: `labels[i]` is the cluster of data point `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment(pub Vec<usize>);

impl Assignment {
    pub fn labels(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Relabels clusters by order of first appearance.
    pub fn canonical_key(&self) -> Vec<u32> {
        self.canonical_map().0
    }

    /// Canonical labels plus `order`, where `order[c]` is the original
    /// cluster that became canonical cluster `c`.
    pub fn canonical_map(&self) -> (Vec<u32>, Vec<usize>) {
        let mut remap: HashMap<usize, u32> = HashMap::new();
        let mut order = Vec::new();
        let key = self
            .0
            .iter()
            .map(|&l| {
                *remap.entry(l).or_insert_with(|| {
                    order.push(l);
                    (order.len() - 1) as u32
                })
            })
            .collect();
        (key, order)
    }

    pub fn cluster_sizes(&self, k: usize) -> Vec<usize> {
        let mut sizes = vec![0; k];
        for &l in &self.0 {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn has_empty_cluster(&self, k: usize) -> bool {
        self.cluster_sizes(k).contains(&0)
    }

    /// Indices of data points labelled differently in `self` and `other`.
    pub fn differing(&self, other: &Assignment) -> Vec<usize> {
        self.0
            .iter()
            .zip(&other.0)
            .enumerate()
            .filter_map(|(i, (a, b))| (a != b).then_some(i))
            .collect()
    }
}

/// Nearest-centre assignment; ties go to the lowest cluster index.
pub fn assign<T: Scalar>(points: &Matrix<T>, mu: &Centres<T>) -> Assignment {
    Assignment(points.iter_rows().map(|x| nearest(x, mu)).collect())
}

#[inline]
fn nearest<T: Scalar>(x: &[T], mu: &Centres<T>) -> usize {
    let mut best = 0;
    let mut best_d = T::infinity();
    for (k, c) in mu.iter_rows().enumerate() {
        let d = sq_dist(x, c);
        if d < best_d {
            best_d = d;
            best = k;
        }
    }
    best
}

/// Sum of squared distances from each point to its assigned centre.
pub fn cost<T: Scalar>(points: &Matrix<T>, mu: &Centres<T>, a: &Assignment) -> T {
    points
        .iter_rows()
        .zip(a.labels())
        .map(|(x, &k)| sq_dist(x, mu.row(k)))
        .sum()
}

/// Gradient of the cost with respect to the centres at frozen assignment:
/// row `k` is `2 * sum_{i in k} (mu_k - x_i)`.
pub fn cost_gradient<T: Scalar>(points: &Matrix<T>, mu: &Centres<T>, a: &Assignment) -> Matrix<T> {
    let mut g = Matrix::zeros(mu.rows(), mu.cols());
    accumulate_gradient(points, mu, a.labels(), T::one(), g.as_mut_slice());
    g
}

/// Adds `scale * grad J` into `out` (flattened `K x N_f`) and returns J.
pub(crate) fn accumulate_gradient<T: Scalar>(
    points: &Matrix<T>,
    mu: &Centres<T>,
    labels: &[usize],
    scale: T,
    out: &mut [T],
) -> T {
    let nf = mu.cols();
    let two = T::lit(2.0) * scale;
    let mut j = T::zero();
    for (x, &k) in points.iter_rows().zip(labels) {
        let c = mu.row(k);
        let g = &mut out[k * nf..(k + 1) * nf];
        for f in 0..nf {
            let d = c[f] - x[f];
            j += d * d;
            g[f] += two * d;
        }
    }
    j
}

/// Member means for each cluster; empty clusters keep their current centre.
pub fn centroids<T: Scalar>(
    points: &Matrix<T>,
    a: &Assignment,
    previous: &Centres<T>,
) -> Centres<T> {
    let k = previous.rows();
    let nf = previous.cols();
    let mut sums = Matrix::zeros(k, nf);
    let mut counts = vec![0usize; k];
    for (x, &l) in points.iter_rows().zip(a.labels()) {
        counts[l] += 1;
        for (s, &v) in sums.row_mut(l).iter_mut().zip(x) {
            *s += v;
        }
    }
    for (c, &n) in counts.iter().enumerate() {
        if n == 0 {
            sums.row_mut(c).copy_from_slice(previous.row(c));
        } else {
            let n = T::from_usize(n).unwrap();
            for s in sums.row_mut(c) {
                *s /= n;
            }
        }
    }
    sums
}

/// How the centres move between assignment updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Descent {
    /// L-BFGS on the cost with the assignment re-evaluated at every trial point.
    #[default]
    Lbfgs,
    /// Classical Lloyd iteration: jump to the member means.
    Lloyd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizerConfig<T> {
    pub descent: Descent,
    /// Relative gradient tolerance: `|g| < tol_g * (1 + J)`.
    pub tol_g: T,
    /// Centroid-condition tolerance, relative to the data scale.
    pub tol_fp: T,
    pub max_iter: usize,
    pub history: usize,
    pub max_step: Option<T>,
    /// Keep the cost after every step in [`Candidate::cost_trace`].
    pub record_trace: bool,
}

impl<T: Scalar> Default for MinimizerConfig<T> {
    fn default() -> Self {
        MinimizerConfig {
            descent: Descent::Lbfgs,
            tol_g: T::default_tol(),
            tol_fp: T::default_tol(),
            max_iter: 10_000,
            history: 10,
            max_step: None,
            record_trace: false,
        }
    }
}

/// Result of a local minimisation, before deduplication.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate<T> {
    pub centres: Centres<T>,
    pub assignment: Assignment,
    pub cost: T,
    pub iterations: usize,
    pub cost_trace: Vec<T>,
}

impl<T> Candidate<T> {
    /// False when some cluster has no members.
    pub fn is_valid(&self, k: usize) -> bool {
        !self.assignment.has_empty_cluster(k)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MinimizeError {
    #[error("no convergence after {0} iterations")]
    NotConverged(usize),
    #[error("start point has non-finite coordinates")]
    NonFiniteStart,
    #[error("centres have {found} features, data has {expected}")]
    DimensionMismatch { found: usize, expected: usize },
}

/// Relaxes `start` to a local minimum of the K-means cost.
///
/// Assignment updates alternate with descent at fixed assignment until the
/// assignment is stable and the gradient vanishes; the returned centres are
/// the exact member means of the returned assignment.
pub fn local_minimize<T: Scalar>(
    points: &Matrix<T>,
    start: &Centres<T>,
    cfg: &MinimizerConfig<T>,
) -> Result<Candidate<T>, MinimizeError> {
    if start.cols() != points.cols() {
        return Err(MinimizeError::DimensionMismatch {
            found: start.cols(),
            expected: points.cols(),
        });
    }
    if !start.is_finite() {
        return Err(MinimizeError::NonFiniteStart);
    }
    match cfg.descent {
        Descent::Lloyd => lloyd(points, start, cfg),
        Descent::Lbfgs => lbfgs_relax(points, start, cfg),
    }
}

fn lloyd<T: Scalar>(
    points: &Matrix<T>,
    start: &Centres<T>,
    cfg: &MinimizerConfig<T>,
) -> Result<Candidate<T>, MinimizeError> {
    let mut mu = start.clone();
    let mut a = assign(points, &mu);
    let mut trace = Vec::new();
    for it in 0..cfg.max_iter {
        if cfg.record_trace {
            trace.push(cost(points, &mu, &a));
        }
        mu = centroids(points, &a, &mu);
        if cfg.record_trace {
            trace.push(cost(points, &mu, &a));
        }
        let next = assign(points, &mu);
        if next == a {
            return Ok(Candidate {
                cost: cost(points, &mu, &a),
                centres: mu,
                assignment: a,
                iterations: it + 1,
                cost_trace: trace,
            });
        }
        a = next;
    }
    Err(MinimizeError::NotConverged(cfg.max_iter))
}

fn lbfgs_relax<T: Scalar>(
    points: &Matrix<T>,
    start: &Centres<T>,
    cfg: &MinimizerConfig<T>,
) -> Result<Candidate<T>, MinimizeError> {
    let (k, nf) = (start.rows(), start.cols());
    let mut objective = |x: &[T], g: &mut [T]| -> T {
        let mu = Matrix::from_vec(k, nf, x.to_vec());
        let labels: Vec<usize> = points.iter_rows().map(|p| nearest(p, &mu)).collect();
        g.iter_mut().for_each(|v| *v = T::zero());
        accumulate_gradient(points, &mu, &labels, T::one(), g)
    };
    let lcfg = LbfgsConfig {
        history: cfg.history,
        max_iter: cfg.max_iter,
        grad_tol: cfg.tol_g,
        max_step: cfg.max_step,
        ..LbfgsConfig::default()
    };
    let mut state = Lbfgs::new(&mut objective, start.as_slice().to_vec(), lcfg);
    let mut trace = Vec::new();
    if cfg.record_trace {
        trace.push(state.f());
    }
    let mut last = state.f();
    let slack = |j: T| T::lit(1e-12).max(T::lit(64.0) * T::epsilon()) * (T::one() + j.abs());

    while state.iterations() < cfg.max_iter {
        let stalled = if state.is_converged() {
            true
        } else {
            state.step(&mut objective) == StepOutcome::Stalled
        };
        if !stalled {
            debug_assert!(
                state.f() <= last + slack(last),
                "cost increased in descent step"
            );
            last = state.f();
            if cfg.record_trace {
                trace.push(last);
            }
            continue;
        }
        // jump to the member means and check the assignment is self-consistent
        let mu = Matrix::from_vec(k, nf, state.x().to_vec());
        let a = assign(points, &mu);
        let snapped = centroids(points, &a, &mu);
        let j_snap = cost(points, &snapped, &a);
        debug_assert!(
            j_snap <= last + slack(last),
            "cost increased at centroid update"
        );
        if cfg.record_trace {
            trace.push(j_snap);
        }
        let a_snap = assign(points, &snapped);
        if a_snap == a {
            return Ok(Candidate {
                centres: snapped,
                assignment: a,
                cost: j_snap,
                iterations: state.iterations(),
                cost_trace: trace,
            });
        }
        state.reset_at(&mut objective, snapped.into_vec());
        last = state.f();
        if cfg.record_trace {
            trace.push(last);
        }
    }
    Err(MinimizeError::NotConverged(cfg.max_iter))
}

/// Uniform random centres within the per-feature range of the whole dataset
/// (outliers included). `stream` selects an independent substream of `seed`.
pub fn sample_uniform_start<T: Scalar>(
    d: &Dataset<T>,
    k: usize,
    seed: u64,
    stream: u64,
) -> Centres<T> {
    let stats = d.feature_stats(false).expect("dataset is non-empty");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let nf = d.n_features();
    let mut mu = Matrix::zeros(k, nf);
    for c in 0..k {
        let row = mu.row_mut(c);
        for (f, x) in row.iter_mut().enumerate() {
            let (lo, hi) = (stats.min[f], stats.max[f]);
            let u: f64 = rng.random();
            // stays inside [lo, hi] despite rounding
            *x = (lo + T::lit(u) * (hi - lo)).min(hi).max(lo);
        }
    }
    mu
}

/// A distinct, valid local minimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MinimumRecord<T> {
    pub id: usize,
    pub cost: T,
    pub centres: Centres<T>,
    pub canonical_labels: Vec<u32>,
    pub attempts: u64,
}

impl<T: Scalar> MinimumRecord<T> {
    pub fn assignment(&self) -> Assignment {
        Assignment(self.canonical_labels.iter().map(|&l| l as usize).collect())
    }

    pub fn k(&self) -> usize {
        self.centres.rows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    Inserted(usize),
    DuplicateOf(usize),
    Rejected,
}

impl InsertOutcome {
    pub fn id(self) -> Option<usize> {
        match self {
            InsertOutcome::Inserted(id) | InsertOutcome::DuplicateOf(id) => Some(id),
            InsertOutcome::Rejected => None,
        }
    }
}

/// Distinct minima keyed by canonical assignment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MinimaStore<T> {
    k: usize,
    minima: Vec<MinimumRecord<T>>,
    index: HashMap<Vec<u32>, usize>,
}

impl<T: Scalar> MinimaStore<T> {
    pub fn new(k: usize) -> Self {
        MinimaStore {
            k,
            minima: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Rebuilds a store from persisted records; ids must be `0..n` in order.
    pub fn from_records(k: usize, minima: Vec<MinimumRecord<T>>) -> Result<Self, String> {
        let mut index = HashMap::with_capacity(minima.len());
        for (i, m) in minima.iter().enumerate() {
            if m.id != i {
                return Err(format!("minimum at position {i} has id {}", m.id));
            }
            if index.insert(m.canonical_labels.clone(), i).is_some() {
                return Err(format!("minimum {i} duplicates an earlier record"));
            }
        }
        Ok(MinimaStore { k, minima, index })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.minima.len()
    }

    pub fn is_empty(&self) -> bool {
        self.minima.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&MinimumRecord<T>> {
        self.minima.get(id)
    }

    pub fn records(&self) -> &[MinimumRecord<T>] {
        &self.minima
    }

    pub fn records_mut(&mut self) -> &mut [MinimumRecord<T>] {
        &mut self.minima
    }

    pub fn into_records(self) -> Vec<MinimumRecord<T>> {
        self.minima
    }

    pub fn find(&self, a: &Assignment) -> Option<usize> {
        self.index.get(&a.canonical_key()).copied()
    }

    /// Id of the lowest-cost minimum (first on ties).
    pub fn global_minimum(&self) -> Option<usize> {
        self.minima
            .iter()
            .min_by(|a, b| a.cost.partial_cmp(&b.cost).unwrap().then(a.id.cmp(&b.id)))
            .map(|m| m.id)
    }

    /// Inserts a candidate unless it has an empty cluster or duplicates an
    /// existing minimum (in which case that minimum's attempt count grows).
    pub fn dedup_insert(&mut self, cand: &Candidate<T>) -> InsertOutcome {
        if !cand.is_valid(self.k) {
            return InsertOutcome::Rejected;
        }
        let (key, order) = cand.assignment.canonical_map();
        if let Some(&id) = self.index.get(&key) {
            self.minima[id].attempts += 1;
            return InsertOutcome::DuplicateOf(id);
        }
        let id = self.minima.len();
        self.minima.push(MinimumRecord {
            id,
            cost: cand.cost,
            centres: cand.centres.permute_rows(&order),
            canonical_labels: key.clone(),
            attempts: 1,
        });
        self.index.insert(key, id);
        InsertOutcome::Inserted(id)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExploreStats {
    pub starts: usize,
    pub inserted: usize,
    pub duplicates: usize,
    pub rejected: usize,
    pub failed: usize,
}

/// Minimises `n_starts` uniform random starts (substreams
/// `first_stream..first_stream + n_starts` of `seed`) and merges the results
/// into `store` in start order, so the outcome does not depend on `parallel`.
pub fn explore<T: Scalar>(
    d: &Dataset<T>,
    store: &mut MinimaStore<T>,
    n_starts: usize,
    seed: u64,
    first_stream: u64,
    cfg: &MinimizerConfig<T>,
    parallel: bool,
) -> ExploreStats {
    let k = store.k();
    let run = |s: u64| {
        let start = sample_uniform_start(d, k, seed, s);
        local_minimize(d.points(), &start, cfg)
    };
    let streams = first_stream..first_stream + n_starts as u64;
    let results: Vec<_> = if parallel {
        streams.into_par_iter().map(run).collect()
    } else {
        streams.map(run).collect()
    };
    let mut stats = ExploreStats {
        starts: n_starts,
        ..ExploreStats::default()
    };
    for r in results {
        match r {
            Ok(c) => match store.dedup_insert(&c) {
                InsertOutcome::Inserted(_) => stats.inserted += 1,
                InsertOutcome::DuplicateOf(_) => stats.duplicates += 1,
                InsertOutcome::Rejected => stats.rejected += 1,
            },
            Err(e) => {
                log::debug!("start failed: {e}");
                stats.failed += 1;
            }
        }
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pts(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn assign_nearest_and_ties() {
        let mu = pts(&[&[1.0, 0.0], &[5.0, 0.0]]);
        assert_eq!(assign(&pts(&[&[0.0, 0.0]]), &mu).0, vec![0]);
        assert_eq!(assign(&pts(&[&[3.0, 0.0]]), &mu).0, vec![0]);
        let one = pts(&[&[2.0, 2.0]]);
        assert_eq!(
            assign(&pts(&[&[0.0, 0.0], &[9.0, 1.0]]), &one).0,
            vec![0, 0]
        );
    }

    #[test]
    fn cost_examples() {
        let p = pts(&[&[0.0, 0.0], &[2.0, 0.0]]);
        let mu = pts(&[&[1.0, 0.0]]);
        assert_eq!(cost(&p, &mu, &Assignment(vec![0, 0])), 2.0);
        let q = pts(&[&[0.0, 1.0], &[2.0, 3.0], &[4.0, 4.0]]);
        assert_eq!(cost(&q, &q, &Assignment(vec![0, 1, 2])), 0.0);
    }

    #[test]
    fn gradient_examples() {
        let g = cost_gradient(
            &pts(&[&[1.0, 0.0]]),
            &pts(&[&[0.0, 0.0]]),
            &Assignment(vec![0]),
        );
        assert_eq!(g.row(0), [-2.0, 0.0]);
        let p = pts(&[&[0.0, 0.0], &[2.0, 4.0]]);
        let g = cost_gradient(
            &p,
            &pts(&[&[1.0, 2.0], &[7.0, 7.0]]),
            &Assignment(vec![0, 0]),
        );
        assert_eq!(g.row(0), [0.0, 0.0]);
        assert_eq!(g.row(1), [0.0, 0.0], "empty cluster has zero gradient");
    }

    #[test]
    fn canonical_key_examples() {
        assert_eq!(
            Assignment(vec![2, 2, 0, 1]).canonical_key(),
            vec![0, 0, 1, 2]
        );
    }

    #[test]
    fn one_dimensional_minimum() {
        let p = pts(&[&[0.0], &[1.0], &[10.0]]);
        let start = pts(&[&[0.5], &[10.0]]);
        for descent in [Descent::Lbfgs, Descent::Lloyd] {
            let cfg = MinimizerConfig {
                descent,
                ..MinimizerConfig::default()
            };
            let c = local_minimize(&p, &start, &cfg).unwrap();
            assert_eq!(c.assignment.0, vec![0, 0, 1]);
            assert!((c.cost - 0.5).abs() < 1e-12);
            assert!((c.centres.row(0)[0] - 0.5).abs() < 1e-12);
            assert!((c.centres.row(1)[0] - 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fixed_point_start_is_kept() {
        let p = pts(&[&[0.0], &[3.0], &[4.0], &[7.0]]);
        let start = pts(&[&[7.0 / 3.0], &[7.0]]);
        let c = local_minimize(&p, &start, &MinimizerConfig::default()).unwrap();
        assert_eq!(c.assignment.0, vec![0, 0, 0, 1]);
        assert!((c.cost - 26.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn empty_cluster_candidate_rejected() {
        let p = pts(&[&[0.0], &[1.0]]);
        let start = pts(&[&[0.5], &[100.0]]);
        let c = local_minimize(&p, &start, &MinimizerConfig::default()).unwrap();
        assert!(!c.is_valid(2));
        let mut store = MinimaStore::new(2);
        assert_eq!(store.dedup_insert(&c), InsertOutcome::Rejected);
        assert!(store.is_empty());
    }

    #[test]
    fn duplicate_from_permuted_start() {
        let p = pts(&[&[0.0], &[3.0], &[4.0], &[7.0]]);
        let mut store = MinimaStore::new(2);
        let cfg = MinimizerConfig::default();
        let a = local_minimize(&p, &pts(&[&[1.0], &[6.0]]), &cfg).unwrap();
        let b = local_minimize(&p, &pts(&[&[6.0], &[1.0]]), &cfg).unwrap();
        assert_eq!(store.dedup_insert(&a), InsertOutcome::Inserted(0));
        assert_eq!(store.dedup_insert(&b), InsertOutcome::DuplicateOf(0));
        assert_eq!(store.get(0).unwrap().attempts, 2);
        let rec = store.get(0).unwrap();
        // centres reordered to match canonical labels
        assert_eq!(rec.canonical_labels[0], 0);
        assert!(rec.centres.row(0)[0] < rec.centres.row(1)[0]);
    }

    #[test]
    fn non_finite_start_fails() {
        let p = pts(&[&[0.0], &[1.0]]);
        let r = local_minimize(
            &p,
            &pts(&[&[f64::NAN], &[1.0]]),
            &MinimizerConfig::default(),
        );
        assert_eq!(r.unwrap_err(), MinimizeError::NonFiniteStart);
    }

    #[test]
    fn sample_start_deterministic_and_in_range() {
        let d = Dataset::from_rows(&[vec![0.0, 5.0, -1.0], vec![2.0, 5.0, 3.0]]).unwrap();
        let a = sample_uniform_start(&d, 4, 7, 0);
        assert_eq!(a, sample_uniform_start(&d, 4, 7, 0));
        assert_ne!(a, sample_uniform_start(&d, 4, 7, 1));
        for row in a.iter_rows() {
            assert!((0.0..=2.0).contains(&row[0]));
            assert_eq!(row[1], 5.0);
            assert!((-1.0..=3.0).contains(&row[2]));
        }
    }

    #[test]
    fn works_in_single_precision() {
        let p = Matrix::from_rows(&[vec![0.0f32], vec![1.0], vec![10.0]]).unwrap();
        let start = Matrix::from_rows(&[vec![2.0f32], vec![8.0]]).unwrap();
        let c = local_minimize(&p, &start, &MinimizerConfig::default()).unwrap();
        assert_eq!(c.assignment.0, vec![0, 0, 1]);
        assert!((c.cost - 0.5).abs() < 1e-5);
    }

    fn instance() -> impl Strategy<Value = (Matrix<f64>, Matrix<f64>, Vec<usize>)> {
        (1usize..5, 1usize..4, 2usize..12).prop_flat_map(|(k, nf, n)| {
            (
                proptest::collection::vec(0.0..10.0f64, n * nf),
                proptest::collection::vec(0.0..10.0f64, k * nf),
                proptest::collection::vec(0..k, n),
            )
                .prop_map(move |(x, m, perm_seed)| {
                    let mut perm: Vec<usize> = (0..k).collect();
                    // deterministic shuffle from the generated labels
                    for (i, &s) in perm_seed.iter().enumerate() {
                        perm.swap(i % k, s);
                    }
                    (Matrix::from_vec(n, nf, x), Matrix::from_vec(k, nf, m), perm)
                })
        })
    }

    proptest! {
        #[test]
        fn cost_invariant_under_relabeling((x, mu, perm) in instance()) {
            let a = assign(&x, &mu);
            // cluster c of the permuted problem is cluster perm[c] of the original
            let mut inverse = vec![0; perm.len()];
            for (c, &p) in perm.iter().enumerate() { inverse[p] = c; }
            let mu_p = mu.permute_rows(&perm);
            let a_p = Assignment(a.0.iter().map(|&l| inverse[l]).collect());
            prop_assert_eq!(cost(&x, &mu, &a), cost(&x, &mu_p, &a_p));
            prop_assert_eq!(a_p.canonical_key(), a.canonical_key());
        }

        #[test]
        fn canonical_key_idempotent(labels in proptest::collection::vec(0usize..5, 1..20)) {
            let key = Assignment(labels).canonical_key();
            let again = Assignment(key.iter().map(|&l| l as usize).collect()).canonical_key();
            prop_assert_eq!(key, again);
        }

        #[test]
        fn relaxation_monotone_and_centroidal((x, mu, _perm) in instance()) {
            let cfg = MinimizerConfig { record_trace: true, ..MinimizerConfig::default() };
            let c = local_minimize(&x, &mu, &cfg).unwrap();
            for w in c.cost_trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12 * (1.0 + w[0]));
            }
            prop_assert_eq!(&assign(&x, &c.centres), &c.assignment);
            let means = centroids(&x, &c.assignment, &c.centres);
            prop_assert!(means.distance(&c.centres) < 1e-8);
        }
    }
}
