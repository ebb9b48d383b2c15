//! k-means style clustering directly on incomplete data.
//!
//! Centroids carry their own *defined* mask. A centroid starts as a copy of
//! a data instance, so it is undefined exactly where that instance is
//! missing. Each update averages, per attribute, the members that observe
//! it; attributes no member observes keep their previous value. The defined
//! set therefore only grows.
//!
//! Any [`Dissimilarity`] drives seeding and assignment. With a
//! [`DiscrepancyModel`] this is K-MEANS++-AWPD; with [`Euclidean`] on an
//! imputed table it is ordinary k-means.
//!
//! [`Euclidean`]: crate::discrepancy::Euclidean

use rand::Rng;
use rayon::prelude::*;

use crate::dataset::{Instance, ObservedTable};
use crate::discrepancy::{DiscrepancyModel, Dissimilarity};
use crate::error::{Error, Result};
use crate::rng;

/// Default iteration cap for [`lloyd`].
pub const DEFAULT_MAX_ITER: usize = 100;

/// Default number of k-means|| oversampling rounds.
pub const DEFAULT_ROUNDS: usize = 5;

#[derive(Debug, Clone)]
pub struct Centroid {
    values: Vec<f64>,
    defined: Vec<bool>,
}

impl Centroid {
    pub fn new(values: Vec<f64>, defined: Vec<bool>) -> Result<Self> {
        if values.len() != defined.len() {
            return Err(Error::DimensionMismatch {
                expected: defined.len(),
                found: values.len(),
            });
        }
        if !defined.iter().any(|&d| d) {
            return Err(Error::invalid("centroid has no defined attribute"));
        }
        let values = values
            .into_iter()
            .zip(&defined)
            .map(|(v, &d)| if d { v } else { f64::NAN })
            .collect();
        Ok(Centroid { values, defined })
    }

    /// Copies an instance; its missing attributes become undefined.
    pub fn from_instance(a: Instance<'_>) -> Self {
        let defined = a.mask().to_vec();
        let values = (0..a.dim()).map(|l| a.get(l).unwrap_or(f64::NAN)).collect();
        Centroid { values, defined }
    }

    pub fn view(&self) -> Instance<'_> {
        Instance::new(&self.values, &self.defined)
    }

    pub fn get(&self, l: usize) -> Option<f64> {
        self.view().get(l)
    }

    pub fn defined(&self) -> &[bool] {
        &self.defined
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Equal when the defined sets match and every defined value is equal;
/// undefined slots are ignored.
impl PartialEq for Centroid {
    fn eq(&self, other: &Self) -> bool {
        self.defined == other.defined
            && self
                .values
                .iter()
                .zip(&other.values)
                .zip(&self.defined)
                .all(|((a, b), &d)| !d || a == b)
    }
}

/// Result of a Lloyd run.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterState {
    centroids: Vec<Centroid>,
    membership: Vec<usize>,
    iteration: usize,
    objective_trace: Vec<f64>,
    converged: bool,
}

impl ClusterState {
    pub fn centroids(&self) -> &[Centroid] {
        &self.centroids
    }

    /// Cluster index of every instance.
    pub fn membership(&self) -> &[usize] {
        &self.membership
    }

    /// Number of update/assign iterations performed.
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Objective after each iteration's assignment step.
    pub fn objective_trace(&self) -> &[f64] {
        &self.objective_trace
    }

    /// Whether the run stopped because memberships stopped changing.
    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn k(&self) -> usize {
        self.centroids.len()
    }
}

/// Penalty discrepancy between an instance and a centroid, using the
/// centroid's defined set in place of an observed set.
pub fn point_centroid_discrepancy(
    a: Instance<'_>,
    z: &Centroid,
    model: &DiscrepancyModel,
) -> Result<f64> {
    model.awpd(a, z.view())
}

fn check_k(table: &ObservedTable, k: usize) -> Result<()> {
    if k == 0 || k > table.n() {
        return Err(Error::invalid(format!(
            "k = {k} must lie in 1..={}",
            table.n()
        )));
    }
    Ok(())
}

/// Index drawn with probability proportional to `weights`. `None` if the
/// total weight is zero or not finite.
fn weighted_pick(weights: &[f64], rng: &mut rng::Rng) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return None;
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = Some(i);
            if acc > target {
                return Some(i);
            }
        }
    }
    last
}

/// Uniform draw among indices where `taken` is false.
fn uniform_untaken(taken: &[bool], rng: &mut rng::Rng) -> Option<usize> {
    let free: Vec<usize> = (0..taken.len()).filter(|&i| !taken[i]).collect();
    (!free.is_empty()).then(|| free[rng.random_range(0..free.len())])
}

/// Weighted D² seeding over `points`: the first pick is proportional to
/// `weights`, later picks to `weight · δ(x, nearest pick)²`. Picks are
/// distinct. Returns indices into `points`.
fn d2_select<D: Dissimilarity>(
    points: &[Instance<'_>],
    weights: &[f64],
    k: usize,
    dis: &D,
    rng: &mut rng::Rng,
) -> Vec<usize> {
    let n = points.len();
    let mut taken = vec![false; n];
    let mut nearest = vec![f64::INFINITY; n];
    let mut picks = Vec::with_capacity(k);
    let first = weighted_pick(weights, rng)
        .or_else(|| uniform_untaken(&taken, rng))
        .expect("at least one point");
    picks.push(first);
    taken[first] = true;
    while picks.len() < k {
        let last = points[*picks.last().unwrap()];
        let scores: Vec<f64> = (0..n)
            .map(|i| {
                if taken[i] {
                    return 0.0;
                }
                let d = dis.dissimilarity(points[i], last);
                nearest[i] = nearest[i].min(d);
                weights[i] * nearest[i] * nearest[i]
            })
            .collect();
        let next = match weighted_pick(&scores, rng).or_else(|| uniform_untaken(&taken, rng)) {
            Some(i) => i,
            None => break,
        };
        picks.push(next);
        taken[next] = true;
    }
    picks
}

/// k-means++ seeding: first centroid uniform, each next one drawn with
/// probability proportional to its squared dissimilarity to the nearest
/// centroid chosen so far. Centroids are copies of distinct instances.
pub fn seed_kmeans_pp<D: Dissimilarity>(
    table: &ObservedTable,
    k: usize,
    dis: &D,
    seed: u64,
) -> Result<Vec<Centroid>> {
    check_k(table, k)?;
    let mut rng = rng::seeded(seed);
    let points: Vec<Instance<'_>> = table.rows().collect();
    let weights = vec![1.0; points.len()];
    let picks = d2_select(&points, &weights, k, dis, &mut rng);
    Ok(picks
        .into_iter()
        .map(|i| Centroid::from_instance(points[i]))
        .collect())
}

/// Parameters of k-means|| seeding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalableParams {
    /// Expected number of candidates added per round (ℓ).
    pub oversample: f64,
    pub rounds: usize,
}

impl ScalableParams {
    /// ℓ = 2k, five rounds.
    pub fn for_k(k: usize) -> Self {
        ScalableParams {
            oversample: 2.0 * k as f64,
            rounds: DEFAULT_ROUNDS,
        }
    }
}

/// k-means|| seeding.
///
/// Starting from one uniform instance, each round adds every instance `x`
/// independently with probability `min(1, ℓ·δ(x, C)² / φ)`, where `φ` sums
/// `δ(·, C)²` over the instances not yet chosen. Candidates are then
/// weighted by how many instances they are nearest to and reduced to `k`
/// with weighted k-means++. Short candidate sets are topped up uniformly.
pub fn seed_scalable<D: Dissimilarity>(
    table: &ObservedTable,
    k: usize,
    params: ScalableParams,
    dis: &D,
    seed: u64,
) -> Result<Vec<Centroid>> {
    check_k(table, k)?;
    if params.oversample.is_nan() || params.oversample <= 0.0 || params.rounds == 0 {
        return Err(Error::invalid(
            "oversample must be positive and rounds at least 1",
        ));
    }
    let n = table.n();
    let mut rng = rng::seeded(seed);
    let points: Vec<Instance<'_>> = table.rows().collect();

    let mut chosen = vec![false; n];
    let mut candidates = vec![rng.random_range(0..n)];
    chosen[candidates[0]] = true;
    let mut cost: Vec<f64> = points
        .par_iter()
        .map(|&p| dis.dissimilarity(p, points[candidates[0]]).powi(2))
        .collect();

    for _ in 0..params.rounds {
        let phi: f64 = (0..n).filter(|&i| !chosen[i]).map(|i| cost[i]).sum();
        if phi.is_nan() || phi <= 0.0 {
            break;
        }
        let added: Vec<usize> = (0..n)
            .filter(|&i| {
                let p = if chosen[i] {
                    0.0
                } else {
                    (params.oversample * cost[i] / phi).min(1.0)
                };
                // draw for every row so the stream does not depend on `chosen`
                rng.random::<f64>() < p
            })
            .collect();
        for &i in &added {
            chosen[i] = true;
        }
        cost.par_iter_mut().enumerate().for_each(|(i, c)| {
            for &j in &added {
                *c = c.min(dis.dissimilarity(points[i], points[j]).powi(2));
            }
        });
        candidates.extend(added);
    }
    while candidates.len() < k {
        let i = uniform_untaken(&chosen, &mut rng).expect("k <= n");
        chosen[i] = true;
        candidates.push(i);
    }
    candidates.sort_unstable();

    let picks = if candidates.len() == k {
        (0..k).collect()
    } else {
        let cand_points: Vec<Instance<'_>> = candidates.iter().map(|&i| points[i]).collect();
        let nearest = assign_views(&points, &cand_points, dis);
        let mut weights = vec![0.0; candidates.len()];
        for j in nearest {
            weights[j] += 1.0;
        }
        d2_select(&cand_points, &weights, k, dis, &mut rng)
    };
    Ok(picks
        .into_iter()
        .map(|c| Centroid::from_instance(points[candidates[c]]))
        .collect())
}

fn nearest_index<D: Dissimilarity>(a: Instance<'_>, targets: &[Instance<'_>], dis: &D) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, &z) in targets.iter().enumerate() {
        let d = dis.dissimilarity(a, z);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

fn assign_views<D: Dissimilarity>(
    points: &[Instance<'_>],
    targets: &[Instance<'_>],
    dis: &D,
) -> Vec<usize> {
    points
        .par_iter()
        .map(|&a| nearest_index(a, targets, dis))
        .collect()
}

/// Assigns every instance to its least dissimilar centroid; ties go to the lowest index.
pub fn assign<D: Dissimilarity>(
    table: &ObservedTable,
    centroids: &[Centroid],
    dis: &D,
) -> Vec<usize> {
    let points: Vec<Instance<'_>> = table.rows().collect();
    let targets: Vec<Instance<'_>> = centroids.iter().map(Centroid::view).collect();
    assign_views(&points, &targets, dis)
}

/// Recomputes centroids from a membership vector.
///
/// An attribute observed by at least one member becomes the members'
/// mean; otherwise the previous centroid's value (and definedness) is kept.
pub fn update_centroids(
    table: &ObservedTable,
    membership: &[usize],
    previous: &[Centroid],
) -> Vec<Centroid> {
    let m = table.m();
    let k = previous.len();
    let mut sums = vec![0.0; k * m];
    let mut counts = vec![0usize; k * m];
    for (i, &j) in membership.iter().enumerate() {
        let row = table.row(i);
        for l in 0..m {
            if row.is_observed(l) {
                sums[j * m + l] += row.value(l);
                counts[j * m + l] += 1;
            }
        }
    }
    previous
        .iter()
        .enumerate()
        .map(|(j, prev)| {
            let mut values = prev.values.clone();
            let mut defined = prev.defined.clone();
            for l in 0..m {
                let c = counts[j * m + l];
                if c > 0 {
                    values[l] = sums[j * m + l] / c as f64;
                    defined[l] = true;
                }
            }
            Centroid { values, defined }
        })
        .collect()
}

fn objective_raw<D: Dissimilarity>(
    table: &ObservedTable,
    membership: &[usize],
    centroids: &[Centroid],
    dis: &D,
) -> f64 {
    membership
        .iter()
        .enumerate()
        .map(|(i, &j)| dis.dissimilarity(table.row(i), centroids[j].view()))
        .sum()
}

/// `f(U, Z) = Σ_i δ(a_i, z_{membership[i]})`.
pub fn objective<D: Dissimilarity>(
    table: &ObservedTable,
    state: &ClusterState,
    dis: &D,
) -> Result<f64> {
    if state.membership.len() != table.n() {
        return Err(Error::DimensionMismatch {
            expected: table.n(),
            found: state.membership.len(),
        });
    }
    Ok(objective_raw(
        table,
        &state.membership,
        &state.centroids,
        dis,
    ))
}

fn check_centroids(table: &ObservedTable, centroids: &[Centroid]) -> Result<()> {
    check_k(table, centroids.len())?;
    if let Some(c) = centroids.iter().find(|c| c.dim() != table.m()) {
        return Err(Error::DimensionMismatch {
            expected: table.m(),
            found: c.dim(),
        });
    }
    Ok(())
}

/// How centroids are recomputed between assignment steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CentroidUpdate {
    /// Per-attribute member means, see [`update_centroids`].
    #[default]
    Mean,
    /// Like `Mean`, but a cluster keeps its previous centroid whenever the
    /// mean would raise that cluster's summed dissimilarity. The objective
    /// trace is then non-increasing for any dissimilarity.
    MonotoneMean,
}

/// Lloyd-style alternation from the given initial centroids, with mean updates.
///
/// Each iteration updates centroids from the current memberships, then
/// reassigns every instance. The run stops once memberships stop changing
/// or after `max_iter` iterations; in the latter case centroids receive one
/// final update from the last memberships.
///
/// Mean updates minimise squared distances, not the summed dissimilarity,
/// so the objective trace can rise slightly between iterations. Use
/// [`lloyd_with`] and [`CentroidUpdate::MonotoneMean`] when a monotone
/// trace matters more than plain k-means behaviour.
pub fn lloyd<D: Dissimilarity>(
    table: &ObservedTable,
    init: &[Centroid],
    dis: &D,
    max_iter: usize,
) -> Result<ClusterState> {
    lloyd_with(table, init, dis, max_iter, CentroidUpdate::Mean)
}

fn cluster_costs<D: Dissimilarity>(
    table: &ObservedTable,
    membership: &[usize],
    centroids: &[Centroid],
    dis: &D,
) -> Vec<f64> {
    let mut costs = vec![0.0; centroids.len()];
    for (i, &j) in membership.iter().enumerate() {
        costs[j] += dis.dissimilarity(table.row(i), centroids[j].view());
    }
    costs
}

fn apply_update<D: Dissimilarity>(
    table: &ObservedTable,
    membership: &[usize],
    previous: Vec<Centroid>,
    dis: &D,
    update: CentroidUpdate,
) -> Vec<Centroid> {
    let means = update_centroids(table, membership, &previous);
    match update {
        CentroidUpdate::Mean => means,
        CentroidUpdate::MonotoneMean => {
            let old = cluster_costs(table, membership, &previous, dis);
            let new = cluster_costs(table, membership, &means, dis);
            means
                .into_iter()
                .zip(previous)
                .enumerate()
                .map(|(j, (mean, prev))| if new[j] <= old[j] { mean } else { prev })
                .collect()
        }
    }
}

/// [`lloyd`] with a choice of centroid update.
pub fn lloyd_with<D: Dissimilarity>(
    table: &ObservedTable,
    init: &[Centroid],
    dis: &D,
    max_iter: usize,
    update: CentroidUpdate,
) -> Result<ClusterState> {
    check_centroids(table, init)?;
    if max_iter == 0 {
        return Err(Error::invalid("max_iter must be at least 1"));
    }
    let mut centroids = init.to_vec();
    let mut membership = assign(table, &centroids, dis);
    let mut trace = Vec::new();
    let mut iteration = 0;
    let converged = loop {
        iteration += 1;
        centroids = apply_update(table, &membership, centroids, dis, update);
        let next = assign(table, &centroids, dis);
        let changed = next != membership;
        membership = next;
        trace.push(objective_raw(table, &membership, &centroids, dis));
        if !changed {
            break true;
        }
        if iteration == max_iter {
            centroids = apply_update(table, &membership, centroids, dis, update);
            break false;
        }
    };
    Ok(ClusterState {
        centroids,
        membership,
        iteration,
        objective_trace: trace,
        converged,
    })
}

/// [`lloyd`] under the penalty discrepancy.
pub fn lloyd_awpd(
    table: &ObservedTable,
    init: &[Centroid],
    model: &DiscrepancyModel,
    max_iter: usize,
) -> Result<ClusterState> {
    if model.dim() != table.m() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: table.m(),
        });
    }
    lloyd(table, init, model, max_iter)
}

/// How initial centroids are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Seeding {
    KMeansPlusPlus,
    Scalable(ScalableParams),
}

/// Seeds and runs Lloyd in one call.
pub fn cluster<D: Dissimilarity>(
    table: &ObservedTable,
    k: usize,
    dis: &D,
    seeding: Seeding,
    max_iter: usize,
    seed: u64,
) -> Result<ClusterState> {
    let init = match seeding {
        Seeding::KMeansPlusPlus => seed_kmeans_pp(table, k, dis, seed)?,
        Seeding::Scalable(params) => seed_scalable(table, k, params, dis, seed)?,
    };
    lloyd(table, &init, dis, max_iter)
}
