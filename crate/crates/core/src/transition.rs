//! Transition states between neighbouring K-means minima.
//!
//! The cost surface has no smooth saddles; its transition states are
//! minimum-energy crossing points (MECPs) on the seam where two fixed-
//! assignment quadratics `J1`, `J2` intersect. A penalty surrogate
//!
//! ```text
//! F± = (J1 + J2) / 2 ± sigma * (J1 - J2)^2 / (|J1 - J2| + alpha)
//! ```
//!
//! is minimised (`F+`) to reach the seam minimum, and its companion `F-`
//! supplies the curvature used to step off the seam into both minima.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::align::align_centres;
use crate::dataset::Dataset;
use crate::kmeans::{
    accumulate_gradient, assign, cost, local_minimize, Assignment, Candidate, InsertOutcome,
    MinimizeError, MinimizerConfig,
};
use crate::landscape::{Landscape, TransitionStateRecord};
use crate::lbfgs::{minimize, LbfgsConfig};
use crate::matrix::{Centres, Matrix};
use crate::scalar::{norm, sq_dist, Scalar};

/// Penalty strength `sigma` and smoothing `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateParams<T> {
    pub sigma: T,
    pub alpha: T,
}

impl<T: Scalar> Default for SurrogateParams<T> {
    fn default() -> Self {
        SurrogateParams {
            sigma: T::lit(30.0),
            alpha: T::lit(0.02),
        }
    }
}

impl<T: Scalar> SurrogateParams<T> {
    pub fn new(sigma: T, alpha: T) -> Result<Self, SearchError> {
        if !(sigma > T::zero() && alpha > T::zero()) {
            return Err(SearchError::InvalidParams);
        }
        Ok(SurrogateParams { sigma, alpha })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SearchError {
    #[error("sigma and alpha must be positive")]
    InvalidParams,
    #[error("assignments are identical")]
    IdenticalAssignments,
    #[error("assignments differ at points {0:?}, which are not a single location")]
    NotAdjacent(Vec<usize>),
    #[error("surrogate minimisation did not converge (|g| = {grad_norm:e})")]
    NotConverged { grad_norm: f64 },
    #[error("seam gap {gap:e} above tolerance")]
    SeamGap { gap: f64 },
    #[error("crossing point left the seam: point {0} is nearest to a third cluster")]
    OffSeam(usize),
    #[error("no negative curvature on the F- surface")]
    NoNegativeCurvature,
    #[error("descent from the crossing point failed: {0}")]
    Descent(#[from] MinimizeError),
    #[error("descent reached a solution with an empty cluster")]
    EmptyCluster,
    #[error("both descents reached the same minimum")]
    SelfConnection,
    #[error("descent endpoint lies above the crossing point")]
    Uphill,
    #[error("interpolation could not resolve segment {segment} (t in [{t0}, {t1}])")]
    Refinement { segment: usize, t0: f64, t1: f64 },
    #[error("unknown minimum id {0}")]
    UnknownMinimum(usize),
    #[error("cannot connect a minimum to itself")]
    SameMinimum,
}

/// Two assignments that differ only at one data location (a single point,
/// or several points with identical coordinates).
#[derive(Debug, Clone, PartialEq)]
pub struct SeamPair {
    pub r1: Assignment,
    pub r2: Assignment,
    pub changed: Vec<usize>,
}

impl SeamPair {
    pub fn new<T: Scalar>(
        points: &Matrix<T>,
        r1: Assignment,
        r2: Assignment,
    ) -> Result<Self, SearchError> {
        let changed = r1.differing(&r2);
        if changed.is_empty() {
            return Err(SearchError::IdenticalAssignments);
        }
        if !single_site(points, &changed) {
            return Err(SearchError::NotAdjacent(changed));
        }
        Ok(SeamPair { r1, r2, changed })
    }

    pub fn clusters(&self) -> [usize; 2] {
        let i = self.changed[0];
        [self.r1.0[i], self.r2.0[i]]
    }
}

/// True when every listed point has the same coordinates (vacuous for 0/1).
pub fn single_site<T: Scalar>(points: &Matrix<T>, idx: &[usize]) -> bool {
    match idx.split_first() {
        None => true,
        Some((&first, rest)) => rest.iter().all(|&i| points.row(i) == points.row(first)),
    }
}

/// `g(d) = d^2 / (|d| + alpha)` and its derivative.
#[inline]
fn penalty<T: Scalar>(d: T, alpha: T) -> (T, T) {
    let a = d.abs() + alpha;
    (d * d / a, d * (d.abs() + alpha + alpha) / (a * a))
}

/// Evaluates `F±` (sign = +1 or -1) and optionally its gradient.
fn surrogate<T: Scalar>(
    points: &Matrix<T>,
    mu: &Centres<T>,
    r1: &Assignment,
    r2: &Assignment,
    p: &SurrogateParams<T>,
    sign: T,
    grad: Option<&mut [T]>,
) -> T {
    let j1 = cost(points, mu, r1);
    let j2 = cost(points, mu, r2);
    let (g, dg) = penalty(j1 - j2, p.alpha);
    let half = T::lit(0.5);
    if let Some(out) = grad {
        out.iter_mut().for_each(|v| *v = T::zero());
        let w = sign * p.sigma * dg;
        accumulate_gradient(points, mu, r1.labels(), half + w, out);
        accumulate_gradient(points, mu, r2.labels(), half - w, out);
    }
    half * (j1 + j2) + sign * p.sigma * g
}

pub fn f_plus<T: Scalar>(
    points: &Matrix<T>,
    mu: &Centres<T>,
    r1: &Assignment,
    r2: &Assignment,
    p: &SurrogateParams<T>,
) -> T {
    surrogate(points, mu, r1, r2, p, T::one(), None)
}

pub fn f_minus<T: Scalar>(
    points: &Matrix<T>,
    mu: &Centres<T>,
    r1: &Assignment,
    r2: &Assignment,
    p: &SurrogateParams<T>,
) -> T {
    surrogate(points, mu, r1, r2, p, -T::one(), None)
}

/// Gradient of `F+` with respect to the centres.
pub fn f_plus_gradient<T: Scalar>(
    points: &Matrix<T>,
    mu: &Centres<T>,
    r1: &Assignment,
    r2: &Assignment,
    p: &SurrogateParams<T>,
) -> Matrix<T> {
    let mut g = Matrix::zeros(mu.rows(), mu.cols());
    surrogate(points, mu, r1, r2, p, T::one(), Some(g.as_mut_slice()));
    g
}

/// Gradient of `F-` with respect to the centres.
pub fn f_minus_gradient<T: Scalar>(
    points: &Matrix<T>,
    mu: &Centres<T>,
    r1: &Assignment,
    r2: &Assignment,
    p: &SurrogateParams<T>,
) -> Matrix<T> {
    let mut g = Matrix::zeros(mu.rows(), mu.cols());
    surrogate(points, mu, r1, r2, p, -T::one(), Some(g.as_mut_slice()));
    g
}

/// Search tolerances and schedules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig<T> {
    pub surrogate: SurrogateParams<T>,
    /// Maximum accepted `|J1 - J2|` at a crossing point.
    pub tol_seam: T,
    /// Relative gradient tolerance for the `F+` minimisation.
    pub tol_g: T,
    /// Extra attempts with `sigma` multiplied by `sigma_factor` each time.
    pub sigma_retries: usize,
    pub sigma_factor: T,
    /// Gap below which an accepted crossing point is not refined further.
    pub target_gap: T,
    /// Further `sigma` increases spent approaching `target_gap`.
    pub refine_steps: usize,
    pub max_iter: usize,
    /// Relative finite-difference step for the `F-` Hessian.
    pub fd_step: T,
    /// Length of the displacement off the seam before descending.
    pub delta: T,
    pub initial_segments: usize,
    /// Finest segment is `1 / max_segments` of the interpolation path.
    pub max_segments: usize,
    pub minimizer: MinimizerConfig<T>,
}

impl<T: Scalar> Default for SearchConfig<T> {
    fn default() -> Self {
        SearchConfig {
            surrogate: SurrogateParams::default(),
            tol_seam: T::lit(1e-3),
            tol_g: T::default_tol(),
            sigma_retries: 3,
            sigma_factor: T::lit(2.0),
            target_gap: T::lit(1e-4),
            refine_steps: 6,
            max_iter: 10_000,
            fd_step: T::lit(1e-4),
            delta: T::lit(1e-2),
            initial_segments: 10,
            max_segments: 1 << 14,
            minimizer: MinimizerConfig::default(),
        }
    }
}

impl<T: Scalar> SearchConfig<T> {
    /// Defaults with the off-seam displacement set to 1% of the mean
    /// feature range of `d`. Descent steps from the crossing point are capped
    /// at the same length so they track the steepest-descent path.
    pub fn for_dataset(d: &Dataset<T>) -> Self {
        let stats = d.feature_stats(false).expect("dataset is non-empty");
        let mut range = stats.mean_range();
        if range <= T::zero() {
            range = T::one();
        }
        let delta = T::lit(1e-2) * range;
        SearchConfig {
            delta,
            minimizer: MinimizerConfig {
                max_step: Some(delta),
                ..MinimizerConfig::default()
            },
            ..SearchConfig::default()
        }
    }
}

/// A located crossing point.
#[derive(Debug, Clone, PartialEq)]
pub struct Mecp<T> {
    pub centres: Centres<T>,
    /// Assignments meeting at the crossing point.
    pub pair: SeamPair,
    /// Cost under the nearest-centre assignment.
    pub cost: T,
    pub j1: T,
    pub j2: T,
    pub seam_gap: T,
    pub sigma: T,
}

/// The seam pair at `mu`: every point takes its nearest cluster, except the
/// changed points, which are pinned to either side of the seam.
pub fn pair_at<T: Scalar>(points: &Matrix<T>, mu: &Centres<T>, pair: &SeamPair) -> SeamPair {
    let [c1, c2] = pair.clusters();
    let mut r1 = assign(points, mu);
    let mut r2 = r1.clone();
    for &i in &pair.changed {
        r1.0[i] = c1;
        r2.0[i] = c2;
    }
    SeamPair {
        r1,
        r2,
        changed: pair.changed.clone(),
    }
}

/// Minimises `F+` from `start`, with the labels of unchanged points
/// re-evaluated at every trial point. While the seam gap exceeds
/// `tol_seam`, retries with `sigma` scaled by `sigma_factor` (up to
/// `sigma_retries` times); once accepted, keeps scaling (up to
/// `refine_steps` times) while the gap exceeds `target_gap`.
pub fn locate_mecp<T: Scalar>(
    points: &Matrix<T>,
    pair: &SeamPair,
    start: &Centres<T>,
    cfg: &SearchConfig<T>,
) -> Result<Mecp<T>, SearchError> {
    let (k, nf) = (start.rows(), start.cols());
    let lcfg = LbfgsConfig {
        grad_tol: cfg.tol_g,
        max_iter: cfg.max_iter,
        ..LbfgsConfig::default()
    };
    let mut params = cfg.surrogate;
    let mut x = start.as_slice().to_vec();
    let mut best: Option<Mecp<T>> = None;
    let mut last_err = SearchError::InvalidParams;
    for attempt in 0..=cfg.sigma_retries + cfg.refine_steps {
        if best.is_none() && attempt > cfg.sigma_retries {
            break;
        }
        let mut obj = |v: &[T], g: &mut [T]| {
            let mu = Matrix::from_vec(k, nf, v.to_vec());
            let here = pair_at(points, &mu, pair);
            surrogate(points, &mu, &here.r1, &here.r2, &params, T::one(), Some(g))
        };
        let rep = minimize(&mut obj, x.clone(), lcfg);
        let mu = Matrix::from_vec(k, nf, rep.x.clone());
        let here = pair_at(points, &mu, pair);
        let j1 = cost(points, &mu, &here.r1);
        let j2 = cost(points, &mu, &here.r2);
        let gap = (j1 - j2).abs();
        let outcome = if !rep.converged {
            Err(SearchError::NotConverged {
                grad_norm: rep.grad_norm.as_f64(),
            })
        } else if gap > cfg.tol_seam {
            Err(SearchError::SeamGap { gap: gap.as_f64() })
        } else {
            check_on_seam(points, &here, &mu).map(|_| Mecp {
                cost: cost(points, &mu, &assign(points, &mu)),
                centres: mu,
                pair: here,
                j1,
                j2,
                seam_gap: gap,
                sigma: params.sigma,
            })
        };
        match outcome {
            Ok(m) => {
                let done = m.seam_gap <= cfg.target_gap;
                x = rep.x;
                best = Some(m);
                if done {
                    break;
                }
            }
            // a failed refinement keeps the last accepted point
            Err(_) if best.is_some() => break,
            Err(e) => {
                x = rep.x;
                last_err = e;
            }
        }
        params.sigma *= cfg.sigma_factor;
    }
    best.ok_or(last_err)
}

/// Every unchanged point must still be nearest to its shared cluster, and the
/// changed points nearest to one of the two seam clusters.
fn check_on_seam<T: Scalar>(
    points: &Matrix<T>,
    pair: &SeamPair,
    mu: &Centres<T>,
) -> Result<(), SearchError> {
    let actual = assign(points, mu);
    let [c1, c2] = pair.clusters();
    for (i, (&now, &want)) in actual.0.iter().zip(&pair.r1.0).enumerate() {
        let ok = if pair.changed.contains(&i) {
            // the changed location sits on the seam; a near-tie may resolve either way
            let x = points.row(i);
            let seam = sq_dist(x, mu.row(c1)).min(sq_dist(x, mu.row(c2)));
            let best = sq_dist(x, mu.row(now));
            seam <= best + T::lit(1e-9) * (T::one() + seam)
        } else {
            now == want
        };
        if !ok {
            return Err(SearchError::OffSeam(i));
        }
    }
    Ok(())
}

/// Central-difference Hessian of `F-` (from analytic gradients), symmetrised.
pub fn f_minus_hessian<T: Scalar>(
    points: &Matrix<T>,
    mu: &Centres<T>,
    pair: &SeamPair,
    p: &SurrogateParams<T>,
    rel_step: T,
) -> DMatrix<f64> {
    let n = mu.as_slice().len();
    let mut h = DMatrix::<f64>::zeros(n, n);
    let mut gp = vec![T::zero(); n];
    let mut gm = vec![T::zero(); n];
    let mut x = mu.clone();
    for i in 0..n {
        let xi = mu.as_slice()[i];
        let step = rel_step * (T::one() + xi.abs());
        x.as_mut_slice()[i] = xi + step;
        surrogate(points, &x, &pair.r1, &pair.r2, p, -T::one(), Some(&mut gp));
        x.as_mut_slice()[i] = xi - step;
        surrogate(points, &x, &pair.r1, &pair.r2, p, -T::one(), Some(&mut gm));
        x.as_mut_slice()[i] = xi;
        let denom = (step + step).as_f64();
        for j in 0..n {
            h[(i, j)] = (gp[j] - gm[j]).as_f64() / denom;
        }
    }
    (&h + h.transpose()) * 0.5
}

/// Unit eigenvector of the most negative eigenvalue of the `F-` Hessian at
/// the crossing point, with that eigenvalue.
pub fn downhill_eigenvector<T: Scalar>(
    points: &Matrix<T>,
    mecp: &Centres<T>,
    pair: &SeamPair,
    p: &SurrogateParams<T>,
    rel_step: T,
) -> Result<(Vec<T>, T), SearchError> {
    let h = f_minus_hessian(points, mecp, pair, p, rel_step);
    let eig = SymmetricEigen::new(h);
    let (idx, &lambda) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(SearchError::NoNegativeCurvature)?;
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(lambda < -1e-8 * (1.0 + scale)) {
        return Err(SearchError::NoNegativeCurvature);
    }
    let col = eig.eigenvectors.column(idx);
    let nrm = col.norm();
    let v: Vec<T> = col.iter().map(|&c| T::lit(c / nrm)).collect();
    Ok((v, T::lit(lambda)))
}

/// Descends from `mecp ± delta * v` and returns both end points.
pub fn connect_ts<T: Scalar>(
    points: &Matrix<T>,
    mecp: &Mecp<T>,
    v: &[T],
    delta: T,
    cfg: &MinimizerConfig<T>,
) -> Result<(Candidate<T>, Candidate<T>), SearchError> {
    let k = mecp.centres.rows();
    let side = |s: T| -> Result<Candidate<T>, SearchError> {
        let mut start = mecp.centres.clone();
        for (x, &vi) in start.as_mut_slice().iter_mut().zip(v) {
            *x += s * delta * vi;
        }
        let c = local_minimize(points, &start, cfg)?;
        if !c.is_valid(k) {
            return Err(SearchError::EmptyCluster);
        }
        Ok(c)
    };
    let plus = side(T::one())?;
    let minus = side(-T::one())?;
    if plus.assignment.canonical_key() == minus.assignment.canonical_key() {
        return Err(SearchError::SelfConnection);
    }
    Ok((plus, minus))
}

/// One point on an interpolation path.
#[derive(Debug, Clone, PartialEq)]
pub struct Image<T> {
    pub t: T,
    pub centres: Centres<T>,
    pub assignment: Assignment,
}

/// Linear images from `mu_a` to `mu_b` (already aligned), bisected until
/// neighbouring assignments differ at no more than one data location.
/// The second value lists segments that hit the refinement limit.
pub fn interpolate_images<T: Scalar>(
    points: &Matrix<T>,
    mu_a: &Centres<T>,
    mu_b: &Centres<T>,
    initial_segments: usize,
    max_segments: usize,
) -> (Vec<Image<T>>, Vec<usize>) {
    let image = |t: T| {
        let mut c = mu_a.clone();
        for (x, (&a, &b)) in c
            .as_mut_slice()
            .iter_mut()
            .zip(mu_a.as_slice().iter().zip(mu_b.as_slice()))
        {
            *x = a + t * (b - a);
        }
        let assignment = assign(points, &c);
        Image {
            t,
            centres: c,
            assignment,
        }
    };
    if mu_a == mu_b {
        return (vec![image(T::zero())], Vec::new());
    }
    let n0 = initial_segments.max(1);
    let min_width = T::one() / T::from_usize(max_segments.max(n0)).unwrap();
    let coarse: Vec<Image<T>> = (0..=n0)
        .map(|s| image(T::from_usize(s).unwrap() / T::from_usize(n0).unwrap()))
        .collect();
    let mut out = vec![coarse[0].clone()];
    let mut unresolved = Vec::new();
    for w in coarse.windows(2) {
        // depth-first bisection keeps the output ordered
        let mut stack = vec![(w[0].clone(), w[1].clone())];
        while let Some((lo, hi)) = stack.pop() {
            let diff = lo.assignment.differing(&hi.assignment);
            if single_site(points, &diff) {
                out.push(hi);
                continue;
            }
            if hi.t - lo.t <= min_width {
                unresolved.push(out.len() - 1);
                out.push(hi);
                continue;
            }
            let mid = image((lo.t + hi.t) * T::lit(0.5));
            stack.push((mid.clone(), hi));
            stack.push((lo, mid));
        }
    }
    (out, unresolved)
}

/// Strict form of [`interpolate_images`]: any unresolved segment is an error.
pub fn interpolate_adaptive<T: Scalar>(
    points: &Matrix<T>,
    mu_a: &Centres<T>,
    mu_b: &Centres<T>,
    cfg: &SearchConfig<T>,
) -> Result<Vec<Image<T>>, SearchError> {
    let (images, unresolved) =
        interpolate_images(points, mu_a, mu_b, cfg.initial_segments, cfg.max_segments);
    match unresolved.first() {
        None => Ok(images),
        Some(&segment) => Err(SearchError::Refinement {
            segment,
            t0: images[segment].t.as_f64(),
            t1: images[segment + 1].t.as_f64(),
        }),
    }
}

/// A crossing point with the minima reached on either side of it.
pub type SeamResult<T> = (Mecp<T>, Candidate<T>, Candidate<T>);

/// Full search at one seam: locate, check curvature, descend both ways.
pub fn search_seam<T: Scalar>(
    points: &Matrix<T>,
    pair: &SeamPair,
    start: &Centres<T>,
    cfg: &SearchConfig<T>,
) -> Result<SeamResult<T>, SearchError> {
    let mecp = locate_mecp(points, pair, start, cfg)?;
    let params = SurrogateParams {
        sigma: mecp.sigma,
        alpha: cfg.surrogate.alpha,
    };
    let (v, _) = downhill_eigenvector(points, &mecp.centres, &mecp.pair, &params, cfg.fd_step)?;
    let (a, b) = connect_ts(points, &mecp, &v, cfg.delta, &cfg.minimizer)?;
    let slack = cfg.tol_seam;
    if a.cost > mecp.cost + slack || b.cost > mecp.cost + slack {
        return Err(SearchError::Uphill);
    }
    Ok((mecp, a, b))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConnectionReport {
    pub seams: usize,
    pub transition_states: Vec<usize>,
    pub new_minima: Vec<usize>,
    pub failures: Vec<String>,
}

/// Searches for transition states along the straight path between two
/// stored minima and records everything found in `land`.
pub fn attempt_connection<T: Scalar>(
    points: &Matrix<T>,
    land: &mut Landscape<T>,
    min_a: usize,
    min_b: usize,
    cfg: &SearchConfig<T>,
) -> Result<ConnectionReport, SearchError> {
    if min_a == min_b {
        return Err(SearchError::SameMinimum);
    }
    let a = land
        .minima
        .get(min_a)
        .ok_or(SearchError::UnknownMinimum(min_a))?;
    let b = land
        .minima
        .get(min_b)
        .ok_or(SearchError::UnknownMinimum(min_b))?;
    let mu_a = a.centres.clone();
    let mu_b = b
        .centres
        .permute_rows(&align_centres(&a.centres, &b.centres));

    let (images, unresolved) =
        interpolate_images(points, &mu_a, &mu_b, cfg.initial_segments, cfg.max_segments);
    let mut report = ConnectionReport::default();
    for &s in &unresolved {
        report
            .failures
            .push(format!("segment {s}: unresolved assignment change"));
    }
    let mut tried: Vec<(Assignment, Assignment)> = Vec::new();
    for (s, w) in images.windows(2).enumerate() {
        if w[0].assignment == w[1].assignment || unresolved.contains(&s) {
            continue;
        }
        let key = (w[0].assignment.clone(), w[1].assignment.clone());
        if tried.contains(&key) {
            continue;
        }
        tried.push(key);
        report.seams += 1;
        let pair = match SeamPair::new(points, w[0].assignment.clone(), w[1].assignment.clone()) {
            Ok(p) => p,
            Err(e) => {
                report.failures.push(format!("segment {s}: {e}"));
                continue;
            }
        };
        match search_seam(points, &pair, &w[0].centres, cfg) {
            Ok((mecp, c1, c2)) => {
                let id1 = land.minima.dedup_insert(&c1);
                let id2 = land.minima.dedup_insert(&c2);
                let (Some(i1), Some(i2)) = (id1.id(), id2.id()) else {
                    report
                        .failures
                        .push(format!("segment {s}: endpoint rejected"));
                    continue;
                };
                for out in [id1, id2] {
                    if let InsertOutcome::Inserted(id) = out {
                        report.new_minima.push(id);
                    }
                }
                let top = land
                    .minima
                    .get(i1)
                    .unwrap()
                    .cost
                    .max(land.minima.get(i2).unwrap().cost);
                if mecp.cost < top - cfg.tol_seam {
                    report.failures.push(format!(
                        "segment {s}: crossing point below a connected minimum"
                    ));
                    continue;
                }
                // a barrier lost in the seam gap is recorded as zero
                let ts = TransitionStateRecord {
                    id: 0,
                    cost: mecp.cost.max(top),
                    centres: mecp.centres,
                    point_index_changed: pair.changed[0],
                    points_changed: pair.changed.clone(),
                    clusters: pair.clusters(),
                    connected: [i1, i2],
                    seam_gap: mecp.seam_gap,
                    sigma: mecp.sigma,
                };
                if let Some(id) = land.add_transition_state(ts) {
                    report.transition_states.push(id);
                }
            }
            Err(e) => {
                log::debug!("seam search {min_a}->{min_b} segment {s}: {e}");
                report.failures.push(format!("segment {s}: {e}"));
            }
        }
    }
    Ok(report)
}

/// Convenience for tests and tools: direction of `J1 - J2` at `mu`.
pub fn seam_normal<T: Scalar>(points: &Matrix<T>, mu: &Centres<T>, pair: &SeamPair) -> Vec<T> {
    let mut g = vec![T::zero(); mu.as_slice().len()];
    accumulate_gradient(points, mu, pair.r1.labels(), T::one(), &mut g);
    accumulate_gradient(points, mu, pair.r2.labels(), -T::one(), &mut g);
    let n = norm(&g);
    g.iter().map(|&x| x / n).collect()
}

/// `v^T H v` for the `F-` Hessian, by second differences of `F-` itself.
pub fn f_minus_curvature_along<T: Scalar>(
    points: &Matrix<T>,
    mu: &Centres<T>,
    pair: &SeamPair,
    p: &SurrogateParams<T>,
    v: &[T],
    h: T,
) -> T {
    let shifted = |s: T| {
        let mut c = mu.clone();
        for (x, &vi) in c.as_mut_slice().iter_mut().zip(v) {
            *x += s * h * vi;
        }
        f_minus(points, &c, &pair.r1, &pair.r2, p)
    };
    (shifted(T::one()) - T::lit(2.0) * shifted(T::zero()) + shifted(-T::one())) / (h * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kmeans::centroids;
    use proptest::prelude::*;

    // {0,3,4,7} with K=2 has three minima: {0|3,4,7}, {0,3|4,7}, {0,3,4|7}.
    // The seam pair below joins the last two through point 2.
    fn toy() -> (Dataset<f64>, SeamPair) {
        let d = Dataset::from_rows(&[vec![0.0], vec![3.0], vec![4.0], vec![7.0]]).unwrap();
        let pair = SeamPair::new(
            d.points(),
            Assignment(vec![0, 0, 0, 1]),
            Assignment(vec![0, 0, 1, 1]),
        )
        .unwrap();
        (d, pair)
    }

    fn mu(v: &[f64]) -> Matrix<f64> {
        Matrix::from_vec(v.len(), 1, v.to_vec())
    }

    /// All valid K=2 minima of sorted 1-D data: contiguous splits whose
    /// centroids reproduce the split.
    fn enumerate_1d_minima(x: &[f64]) -> Vec<(Vec<f64>, f64)> {
        let mut out = Vec::new();
        for s in 1..x.len() {
            let m0 = x[..s].iter().sum::<f64>() / s as f64;
            let m1 = x[s..].iter().sum::<f64>() / (x.len() - s) as f64;
            let fixed = x
                .iter()
                .enumerate()
                .all(|(i, &v)| ((v - m0).abs() <= (v - m1).abs()) == (i < s));
            if fixed {
                let j = x
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        if i < s {
                            (v - m0).powi(2)
                        } else {
                            (v - m1).powi(2)
                        }
                    })
                    .sum();
                out.push((vec![m0, m1], j));
            }
        }
        out
    }

    /// Lowest J1 on the seam J1 = J2 by scanning mu0 at 1e-4 resolution.
    fn seam_grid_minimum(points: &Matrix<f64>, pair: &SeamPair) -> (f64, f64) {
        let mut best = (f64::INFINITY, f64::NAN);
        for step in 0..=100_000 {
            let m0 = step as f64 * 1e-4;
            // solve J1 = J2 for mu1 by bisection on [m0, 10]
            let gap = |m1: f64| {
                cost(points, &mu(&[m0, m1]), &pair.r1) - cost(points, &mu(&[m0, m1]), &pair.r2)
            };
            let (mut lo, mut hi) = (m0, 10.0);
            if gap(lo).signum() == gap(hi).signum() {
                continue;
            }
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if gap(mid).signum() == gap(lo).signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let m1 = 0.5 * (lo + hi);
            let centres = mu(&[m0, m1]);
            if assign(points, &centres)
                .differing(&pair.r1)
                .iter()
                .any(|i| !pair.changed.contains(i))
            {
                continue;
            }
            let j = cost(points, &centres, &pair.r1);
            if j < best.0 {
                best = (j, m0);
            }
        }
        best
    }

    #[test]
    fn toy_has_two_minima() {
        let minima = enumerate_1d_minima(&[0.0, 3.0, 4.0, 7.0]);
        let costs: Vec<f64> = minima.iter().map(|m| m.1).collect();
        assert_eq!(costs.len(), 3);
        for (got, want) in costs.iter().zip([26.0 / 3.0, 9.0, 26.0 / 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn surrogate_on_seam_equals_cost() {
        let (d, pair) = toy();
        let p = SurrogateParams::default();
        let m = mu(&[2.0, 6.0]);
        assert_eq!(cost(d.points(), &m, &pair.r1), 10.0);
        assert_eq!(f_plus(d.points(), &m, &pair.r1, &pair.r2, &p), 10.0);
        assert_eq!(f_minus(d.points(), &m, &pair.r1, &pair.r2, &p), 10.0);
        let tiny = SurrogateParams {
            sigma: 1e-300,
            alpha: 0.02,
        };
        let off = mu(&[1.0, 6.5]);
        let half = 0.5 * (cost(d.points(), &off, &pair.r1) + cost(d.points(), &off, &pair.r2));
        assert!((f_plus(d.points(), &off, &pair.r1, &pair.r2, &tiny) - half).abs() < 1e-12);
    }

    #[test]
    fn params_must_be_positive() {
        assert!(SurrogateParams::new(0.0, 0.02).is_err());
        assert!(SurrogateParams::new(30.0, -1.0).is_err());
        assert!(SurrogateParams::new(30.0f64, 0.02).is_ok());
    }

    #[test]
    fn seam_pair_preconditions() {
        let (d, pair) = toy();
        assert_eq!(
            SeamPair::new(d.points(), pair.r1.clone(), pair.r1.clone()),
            Err(SearchError::IdenticalAssignments)
        );
        assert!(matches!(
            SeamPair::new(
                d.points(),
                Assignment(vec![0, 0, 0, 1]),
                Assignment(vec![0, 1, 1, 1])
            ),
            Err(SearchError::NotAdjacent(_))
        ));
        // coincident points move together
        let dup = Dataset::from_rows(&[vec![0.0], vec![4.0], vec![4.0], vec![7.0]]).unwrap();
        let p = SeamPair::new(
            dup.points(),
            Assignment(vec![0, 0, 0, 1]),
            Assignment(vec![0, 1, 1, 1]),
        )
        .unwrap();
        assert_eq!(p.changed, vec![1, 2]);
        assert_eq!(p.clusters(), [0, 1]);
    }

    #[test]
    fn penalty_curvature_at_zero() {
        // g''(0) = 2 / alpha
        let alpha = 0.02f64;
        let h = 1e-9;
        let second = (penalty(h, alpha).1 - penalty(-h, alpha).1) / (2.0 * h);
        assert!((second * alpha / 2.0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mecp_matches_seam_grid_scan() {
        let (d, pair) = toy();
        let cfg = SearchConfig::default();
        let (j_grid, m0_grid) = seam_grid_minimum(d.points(), &pair);
        assert!((j_grid - 10.0).abs() < 1e-6 && (m0_grid - 2.0).abs() < 1e-3);
        for start in [[2.5, 5.0], [7.0 / 3.0, 7.0], [1.5, 5.5]] {
            let m = locate_mecp(d.points(), &pair, &mu(&start), &cfg).unwrap();
            assert!(m.seam_gap <= 1e-3);
            assert!((m.cost - j_grid).abs() < 1e-3, "{m:?}");
            assert!(
                (m.centres.row(0)[0] - 2.0).abs() < 1e-3
                    && (m.centres.row(1)[0] - 6.0).abs() < 1e-3
            );
        }
    }

    #[test]
    fn mecp_start_at_solution_is_kept() {
        let (d, pair) = toy();
        let m = locate_mecp(
            d.points(),
            &pair,
            &mu(&[2.0, 6.0]),
            &SearchConfig::default(),
        )
        .unwrap();
        assert!(m.centres.distance(&mu(&[2.0, 6.0])) < 1e-8);
        assert_eq!(m.cost, 10.0);
    }

    #[test]
    fn downhill_direction_is_seam_normal() {
        let (d, pair) = toy();
        let cfg = SearchConfig::default();
        let m = mu(&[2.0, 6.0]);
        let (v, lambda) =
            downhill_eigenvector(d.points(), &m, &pair, &cfg.surrogate, cfg.fd_step).unwrap();
        assert!((norm(&v) - 1.0).abs() < 1e-12);
        let normal = seam_normal(d.points(), &m, &pair);
        let cos: f64 = v.iter().zip(&normal).map(|(a, b)| a * b).sum();
        // the relative step spans part of the alpha-wide penalty core, which
        // tilts the estimate slightly; a finer step recovers the normal
        assert!(cos.abs() > 0.999, "cos = {cos}");
        let (fine, _) = downhill_eigenvector(d.points(), &m, &pair, &cfg.surrogate, 1e-7).unwrap();
        let cos: f64 = fine.iter().zip(&normal).map(|(a, b)| a * b).sum();
        assert!(cos.abs() > 1.0 - 1e-8, "cos = {cos}");
        // analytic Hessian: diag(5, 3) - sigma * g''(0) * grad(dJ) grad(dJ)^T, grad(dJ) = (-4, -4)
        let b: f64 = -30.0 * (2.0 / 0.02) * 16.0;
        let (a, c) = (5.0 + b, 3.0 + b);
        let exact = 0.5 * (a + c) - ((0.5 * (a - c)).powi(2) + b * b).sqrt();
        assert!(lambda < 0.0 && lambda > exact);
        let (_, fine_lambda) =
            downhill_eigenvector(d.points(), &m, &pair, &cfg.surrogate, 1e-7).unwrap();
        assert!(
            ((fine_lambda - exact) / exact).abs() < 1e-3,
            "{fine_lambda} vs {exact}"
        );
        let along = f_minus_curvature_along(d.points(), &m, &pair, &cfg.surrogate, &v, 1e-4);
        assert!(along < 0.0);
    }

    #[test]
    fn connect_reaches_both_enumerated_minima() {
        let (d, pair) = toy();
        let cfg = SearchConfig::for_dataset(&d);
        assert!((cfg.delta - 0.07).abs() < 1e-12);
        let m = locate_mecp(d.points(), &pair, &mu(&[2.5, 5.0]), &cfg).unwrap();
        let (v, _) =
            downhill_eigenvector(d.points(), &m.centres, &pair, &cfg.surrogate, cfg.fd_step)
                .unwrap();
        let (a, b) = connect_ts(d.points(), &m, &v, cfg.delta, &cfg.minimizer).unwrap();
        let known = enumerate_1d_minima(&[0.0, 3.0, 4.0, 7.0]);
        let which = |c: &Candidate<f64>| {
            let mut x = c.centres.as_slice().to_vec();
            x.sort_by(f64::total_cmp);
            known
                .iter()
                .position(|m| (m.0[0] - x[0]).abs() < 1e-9 && (m.0[1] - x[1]).abs() < 1e-9)
        };
        let mut ends = [which(&a).unwrap(), which(&b).unwrap()];
        ends.sort_unstable();
        assert_eq!(ends, [1, 2]);
        for c in [a, b] {
            assert!(c.cost < m.cost);
            let exact = centroids(d.points(), &c.assignment, &c.centres);
            assert!(c.centres.distance(&exact) < 1e-8);
        }
    }

    #[test]
    fn degenerate_interpolation_is_one_image() {
        let (d, _) = toy();
        let cfg = SearchConfig::default();
        let m = mu(&[1.0, 5.0]);
        assert_eq!(
            interpolate_adaptive(d.points(), &m, &m, &cfg)
                .unwrap()
                .len(),
            1
        );
    }

    #[test]
    fn images_follow_dense_assignment_scan() {
        let d =
            Dataset::from_rows(&[vec![0.0], vec![2.0], vec![4.0], vec![6.0], vec![8.0]]).unwrap();
        let (a, b) = (mu(&[0.5, 9.0]), mu(&[0.5, 3.0]));
        let images = interpolate_adaptive(d.points(), &a, &b, &SearchConfig::default()).unwrap();
        for w in images.windows(2) {
            assert!(w[0].assignment.differing(&w[1].assignment).len() <= 1);
            assert!(w[0].t < w[1].t);
        }
        let mut along: Vec<Assignment> = images.into_iter().map(|i| i.assignment).collect();
        along.dedup();
        let mut dense = Vec::new();
        for s in 0..=200_000 {
            let t = s as f64 / 200_000.0;
            let c = mu(&[0.5, 9.0 - t * 6.0]);
            dense.push(assign(d.points(), &c));
        }
        dense.dedup();
        assert!(dense.len() >= 3);
        assert_eq!(along, dense);
    }

    #[test]
    fn connection_on_toy_landscape() {
        let (d, _) = toy();
        let mut land = Landscape::new(&d, 2, 0, "t");
        let mcfg = MinimizerConfig::default();
        for s in [[1.0, 7.0], [1.5, 5.5]] {
            let c = local_minimize(d.points(), &mu(&s), &mcfg).unwrap();
            land.minima.dedup_insert(&c);
        }
        let cfg = SearchConfig::for_dataset(&d);
        let rep = attempt_connection(d.points(), &mut land, 0, 1, &cfg).unwrap();
        assert_eq!(rep.transition_states.len(), 1, "{rep:?}");
        assert!(rep.new_minima.is_empty());
        let ts = &land.transition_states[0];
        assert!((ts.cost - 10.0).abs() < 1e-3);
        assert_eq!(ts.points_changed, vec![2]);
        let mut conn = ts.connected;
        conn.sort_unstable();
        assert_eq!(conn, [0, 1]);
        assert!(land.validate(&d, &Default::default()).is_empty());
        assert_eq!(
            attempt_connection(d.points(), &mut land, 1, 1, &cfg),
            Err(SearchError::SameMinimum)
        );
        assert_eq!(
            attempt_connection(d.points(), &mut land, 0, 9, &cfg),
            Err(SearchError::UnknownMinimum(9))
        );
    }

    fn random_instance() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, Vec<usize>, usize)> {
        (3usize..8, 1usize..3, 2usize..4).prop_flat_map(|(n, nf, k)| {
            (
                proptest::collection::vec(proptest::collection::vec(-5.0..5.0f64, nf), n),
                proptest::collection::vec(-5.0..5.0f64, k * nf),
                proptest::collection::vec(0..k, n),
                0..n,
            )
        })
    }

    proptest! {
        #[test]
        fn surrogate_gradients_match_finite_differences((rows, c, labels, flip) in random_instance()) {
            let points = Matrix::from_rows(&rows).unwrap();
            let k = c.len() / points.cols();
            let centres = Matrix::from_vec(k, points.cols(), c);
            let r1 = Assignment(labels.clone());
            let mut l2 = labels;
            l2[flip] = (l2[flip] + 1) % k;
            let r2 = Assignment(l2);
            let p = SurrogateParams::default();
            let dj = cost(&points, &centres, &r1) - cost(&points, &centres, &r2);
            prop_assume!(dj.abs() > 10.0 * p.alpha);
            for (sign, grad) in [(1.0, f_plus_gradient(&points, &centres, &r1, &r2, &p)), (-1.0, f_minus_gradient(&points, &centres, &r1, &r2, &p))] {
                let f = |m: &Matrix<f64>| surrogate(&points, m, &r1, &r2, &p, sign, None);
                for i in 0..centres.as_slice().len() {
                    let h = 1e-6;
                    let mut up = centres.clone();
                    up.as_mut_slice()[i] += h;
                    let mut dn = centres.clone();
                    dn.as_mut_slice()[i] -= h;
                    let fd = (f(&up) - f(&dn)) / (2.0 * h);
                    let g = grad.as_slice()[i];
                    prop_assert!((fd - g).abs() <= 1e-5 * (1.0 + g.abs()), "{fd} vs {g}");
                }
            }
        }

        #[test]
        fn penalty_is_non_negative((rows, c, labels, flip) in random_instance()) {
            let points = Matrix::from_rows(&rows).unwrap();
            let k = c.len() / points.cols();
            let centres = Matrix::from_vec(k, points.cols(), c);
            let r1 = Assignment(labels.clone());
            let mut l2 = labels;
            l2[flip] = (l2[flip] + 1) % k;
            let r2 = Assignment(l2);
            let p = SurrogateParams::default();
            let (j1, j2) = (cost(&points, &centres, &r1), cost(&points, &centres, &r2));
            let fp = f_plus(&points, &centres, &r1, &r2, &p);
            let fm = f_minus(&points, &centres, &r1, &r2, &p);
            prop_assert!(fp >= 0.5 * (j1 + j2));
            let expect = 2.0 * p.sigma * (j1 - j2).powi(2) / ((j1 - j2).abs() + p.alpha);
            prop_assert!((fp - fm - expect).abs() <= 1e-9 * (1.0 + expect));
        }
    }
}
