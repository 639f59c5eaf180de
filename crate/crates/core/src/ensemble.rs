//! Ensemble generators (k-means, multiplicative-update NMF) and scoring of
//! a clustering against ground truth.
//!
//! Labels are zero-based throughout the library. Every generator is
//! bit-reproducible for a fixed seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Dense;

/// Guard added to every multiplicative-update denominator.
pub const NMF_EPS: f64 = 1e-12;
pub const NMF_DEFAULT_MAX_ITER: usize = 100;
pub const NMF_DEFAULT_TOL: f64 = 1e-6;
pub const KMEANS_DEFAULT_MAX_ITER: usize = 300;
/// Largest padded label count accepted by [`clustering_errors`].
pub const MAX_MATCHING_LABELS: usize = 20;

/// `m` attributes by `n` elements; column `j` is element `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataMatrix {
    values: Dense,
}

impl DataMatrix {
    pub fn new(values: Dense) -> Result<Self> {
        if values.rows() < 1 || values.cols() < 2 {
            return Err(Error::domain(format!(
                "data must have at least 1 attribute and 2 elements, got {}x{}",
                values.rows(),
                values.cols()
            )));
        }
        if values.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("data contains non-finite values"));
        }
        Ok(Self { values })
    }

    /// Builds from per-element attribute vectors (one inner `Vec` per element).
    pub fn from_elements(elements: &[Vec<f64>]) -> Result<Self> {
        let n = elements.len();
        let m = elements.first().map_or(0, Vec::len);
        for e in elements {
            Error::check_dim(m, e.len())?;
        }
        Self::new(Dense::from_fn(m, n, |i, j| elements[j][i]))
    }

    pub fn attributes(&self) -> usize {
        self.values.rows()
    }

    pub fn elements(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Dense {
        &self.values
    }

    pub fn element(&self, j: usize) -> Vec<f64> {
        self.values.column(j)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.as_slice().iter().all(|&v| v >= 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub method: String,
    pub k_requested: usize,
    pub seed: Option<u64>,
    pub warning: Option<String>,
}

impl Provenance {
    pub fn new(method: impl Into<String>, k_requested: usize, seed: Option<u64>) -> Self {
        Self {
            method: method.into(),
            k_requested,
            seed,
            warning: None,
        }
    }
}

/// A hard assignment of `n` elements to clusters `0..k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub labels: Vec<usize>,
    pub k: usize,
    pub provenance: Provenance,
}

impl ClusteringResult {
    pub fn new(labels: Vec<usize>, k: usize, provenance: Provenance) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::domain("clustering must label at least one element"));
        }
        if k == 0 || k > labels.len() {
            return Err(Error::domain(format!(
                "cluster count {k} invalid for {} elements",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::domain(format!("label {bad} out of range for k={k}")));
        }
        Ok(Self {
            labels,
            k,
            provenance,
        })
    }

    /// Labels inferred as `max + 1`.
    pub fn from_labels(labels: Vec<usize>, method: &str) -> Result<Self> {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        Self::new(labels, k, Provenance::new(method, k, None))
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    /// Sorted members of each cluster.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &l in &self.labels {
            s[l] += 1;
        }
        s
    }

    /// Labels renumbered by order of first appearance.
    pub fn canonical_labels(&self) -> Vec<usize> {
        let mut map = vec![usize::MAX; self.k];
        let mut next = 0;
        self.labels
            .iter()
            .map(|&l| {
                if map[l] == usize::MAX {
                    map[l] = next;
                    next += 1;
                }
                map[l]
            })
            .collect()
    }

    /// Whether both clusterings induce the same partition, ignoring label names.
    pub fn same_partition(&self, other: &Self) -> bool {
        self.n() == other.n() && self.canonical_labels() == other.canonical_labels()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// A k-means run with its per-iteration objective.
#[derive(Clone, Debug)]
pub struct KMeansFit {
    pub clustering: ClusteringResult,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares after each Lloyd update.
    pub objective_history: Vec<f64>,
}

/// Lloyd's algorithm with k-means++ seeding.
pub fn kmeans(a: &DataMatrix, k: usize, seed: u64, max_iter: usize) -> Result<ClusteringResult> {
    kmeans_fit(a, k, seed, max_iter).map(|f| f.clustering)
}

/// Initial centers drawn with probability proportional to squared distance
/// from the nearest center chosen so far.
fn kmeanspp(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![rng.gen_range(0..n)];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            // guard against landing on an already-chosen point through rounding
            if d2[pick] == 0.0 {
                d2.iter().position(|&w| w > 0.0).unwrap_or(pick)
            } else {
                pick
            }
        } else {
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &points[next]));
        }
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

pub fn kmeans_fit(a: &DataMatrix, k: usize, seed: u64, max_iter: usize) -> Result<KMeansFit> {
    let n = a.elements();
    if k == 0 || k > n {
        return Err(Error::domain(format!("k-means needs 1 <= k <= n, got k={k}, n={n}")));
    }
    let points: Vec<Vec<f64>> = (0..n).map(|j| a.element(j)).collect();
    let mut prov = Provenance::new("kmeans", k, Some(seed));

    let degenerate = points.iter().all(|p| p == &points[0]);
    if k == 1 || degenerate {
        if degenerate && k > 1 {
            prov.warning = Some("all elements identical; returning a single cluster".into());
        }
        let centroid = mean_of(&points, &(0..n).collect::<Vec<_>>());
        let obj = points.iter().map(|p| sq_dist(p, &centroid)).sum();
        return Ok(KMeansFit {
            clustering: ClusteringResult::new(vec![0; n], 1, prov)?,
            centroids: vec![centroid],
            objective_history: vec![obj],
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeanspp(&points, k, &mut rng);
    let mut labels = vec![usize::MAX; n];
    let mut history = Vec::new();

    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let best = nearest(p, &centroids);
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        if !changed && !history.is_empty() {
            break;
        }
        let mut members = vec![Vec::new(); k];
        for (i, &l) in labels.iter().enumerate() {
            members[l].push(i);
        }
        for c in 0..k {
            if !members[c].is_empty() {
                centroids[c] = mean_of(&points, &members[c]);
            }
        }
        for c in 0..k {
            if members[c].is_empty() {
                // reseed on the worst-fit point that does not empty another cluster
                let far = (0..n)
                    .filter(|&i| members[labels[i]].len() > 1)
                    .max_by(|&i, &j| {
                        let di = sq_dist(&points[i], &centroids[labels[i]]);
                        let dj = sq_dist(&points[j], &centroids[labels[j]]);
                        di.total_cmp(&dj).then(j.cmp(&i))
                    });
                if let Some(i) = far {
                    let old = labels[i];
                    members[old].retain(|&x| x != i);
                    centroids[old] = mean_of(&points, &members[old]);
                    labels[i] = c;
                    members[c].push(i);
                    centroids[c] = points[i].clone();
                }
            }
        }
        history.push(objective(&points, &labels, &centroids));
    }

    let used: Vec<usize> = {
        let mut u: Vec<usize> = labels.clone();
        u.sort_unstable();
        u.dedup();
        u
    };
    let k_final = used.len();
    if k_final < k {
        prov.warning = Some(format!("empty-cluster repair reduced k from {k} to {k_final}"));
        let remap: Vec<usize> = (0..k).map(|c| used.iter().position(|&u| u == c).unwrap_or(0)).collect();
        labels.iter_mut().for_each(|l| *l = remap[*l]);
        centroids = used.iter().map(|&c| centroids[c].clone()).collect();
    }
    Ok(KMeansFit {
        clustering: ClusteringResult::new(labels, k_final, prov)?,
        centroids,
        objective_history: history,
    })
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, cen) in centroids.iter().enumerate() {
        let d = sq_dist(p, cen);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

fn mean_of(points: &[Vec<f64>], idx: &[usize]) -> Vec<f64> {
    let mut m = vec![0.0; points[0].len()];
    for &i in idx {
        for (a, b) in m.iter_mut().zip(&points[i]) {
            *a += b;
        }
    }
    let c = idx.len().max(1) as f64;
    m.iter_mut().for_each(|a| *a /= c);
    m
}

fn objective(points: &[Vec<f64>], labels: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| sq_dist(p, &centroids[l]))
        .sum()
}

/// Within-cluster sum of squared Euclidean distances for a labelling.
pub fn within_cluster_ss(a: &DataMatrix, c: &ClusteringResult) -> Result<f64> {
    Error::check_dim(a.elements(), c.n())?;
    let points: Vec<Vec<f64>> = (0..a.elements()).map(|j| a.element(j)).collect();
    let centroids: Vec<Vec<f64>> = c.clusters().iter().map(|m| mean_of(&points, m)).collect();
    Ok(objective(&points, &c.labels, &centroids))
}

/// Nonnegative factors `A ≈ W H` with `W` m×k and `H` k×n.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NmfFactors {
    pub w: Dense,
    pub h: Dense,
    /// Final `‖A − WH‖_F`.
    pub residual: f64,
    pub residual_history: Vec<f64>,
    pub seed: u64,
}

/// Lee-Seung multiplicative updates for the Frobenius objective.
///
/// Stops after `max_iter` sweeps or when the relative residual change drops
/// below `tol`.
pub fn nmf_mu(a: &DataMatrix, k: usize, seed: u64, max_iter: usize, tol: f64) -> Result<NmfFactors> {
    if !a.is_nonnegative() {
        return Err(Error::domain("NMF requires a nonnegative data matrix"));
    }
    let (m, n) = (a.attributes(), a.elements());
    if k == 0 || k >= m.min(n) {
        return Err(Error::domain(format!(
            "NMF needs 1 <= k < min(m, n) = {}, got k={k}",
            m.min(n)
        )));
    }
    let av = a.values();
    let mean = av.as_slice().iter().sum::<f64>() / (m * n) as f64;
    let scale = (mean.max(NMF_EPS) / k as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = Dense::from_fn(m, k, |_, _| scale * rng.gen_range(0.01..1.0));
    let mut h = Dense::from_fn(k, n, |_, _| scale * rng.gen_range(0.01..1.0));

    let residual_of = |w: &Dense, h: &Dense| -> Result<f64> {
        Ok(av.sub(&w.matmul(h)?)?.frobenius_norm())
    };
    let mut history = vec![residual_of(&w, &h)?];
    for _ in 0..max_iter {
        let wt = w.transpose();
        let num = wt.matmul(av)?;
        let den = wt.matmul(&w)?.matmul(&h)?;
        multiplicative_step(&mut h, &num, &den);

        let ht = h.transpose();
        let num = av.matmul(&ht)?;
        let den = w.matmul(&h.matmul(&ht)?)?;
        multiplicative_step(&mut w, &num, &den);

        let res = residual_of(&w, &h)?;
        let prev = *history.last().unwrap();
        history.push(res);
        if (prev - res).abs() <= tol * prev.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(NmfFactors {
        w,
        h,
        residual: *history.last().unwrap(),
        residual_history: history,
        seed,
    })
}

fn multiplicative_step(x: &mut Dense, num: &Dense, den: &Dense) {
    for ((v, a), b) in x
        .as_mut_slice()
        .iter_mut()
        .zip(num.as_slice())
        .zip(den.as_slice())
    {
        *v *= a / (b + NMF_EPS);
    }
}

/// Each element joins the factor with the largest `H` weight; ties go to the lowest row.
pub fn assign_from_nmf(f: &NmfFactors) -> Result<ClusteringResult> {
    let h = &f.h;
    let labels = (0..h.cols())
        .map(|j| {
            (0..h.rows()).fold(0, |best, r| if h.get(r, j) > h.get(best, j) { r } else { best })
        })
        .collect();
    ClusteringResult::new(labels, h.rows(), Provenance::new("nmf", h.rows(), Some(f.seed)))
}

/// NMF followed by argmax assignment.
pub fn nmf_clustering(a: &DataMatrix, k: usize, seed: u64) -> Result<ClusteringResult> {
    let f = nmf_mu(a, k, seed, NMF_DEFAULT_MAX_ITER, NMF_DEFAULT_TOL)?;
    assign_from_nmf(&f)
}

/// Minimum number of misassigned elements over all one-to-one matchings of
/// `c`'s labels onto `truth`'s labels, padding the smaller label set with
/// empty clusters.
pub fn clustering_errors(c: &ClusteringResult, truth: &ClusteringResult) -> Result<usize> {
    if c.n() != truth.n() {
        return Err(Error::domain(format!(
            "cannot compare clusterings of {} and {} elements",
            c.n(),
            truth.n()
        )));
    }
    let kk = c.k.max(truth.k);
    if kk > MAX_MATCHING_LABELS {
        return Err(Error::domain(format!(
            "label matching supports at most {MAX_MATCHING_LABELS} labels, got {kk}"
        )));
    }
    let mut table = vec![vec![0usize; kk]; kk];
    for (&a, &b) in c.labels.iter().zip(&truth.labels) {
        table[a][b] += 1;
    }
    // best[mask]: max agreement matching the first popcount(mask) rows onto columns in mask
    let mut best = vec![0usize; 1 << kk];
    for mask in 1usize..(1 << kk) {
        let row = mask.count_ones() as usize - 1;
        let mut m = 0;
        let mut bits = mask;
        while bits != 0 {
            let col = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            m = m.max(best[mask & !(1 << col)] + table[row][col]);
        }
        best[mask] = m;
    }
    Ok(c.n() - best[(1 << kk) - 1])
}
