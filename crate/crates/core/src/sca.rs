//! Cluster extraction by tracking `x_tᵀ = x_{t−1}ᵀ P` and splitting the
//! sorted iterate at its largest gaps.
//!
//! [`run_sca`] starts from a random probability vector and stops once the
//! induced clustering has stayed fixed for a number of steps.
//! [`run_cca`] starts from the indicator of one element and returns the
//! first cluster around it whose size lies in a requested range.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balance::BalancedMatrix;
use crate::ensemble::{ClusteringResult, Provenance};
use crate::error::{Error, Result};
use crate::matrix::{evolve, sym_eigen, ProbVector, DEFAULT_EIGEN_TOL};
use crate::uncouple::{perron_cluster, PerronCluster};

pub const DEFAULT_STABILITY_COUNT: usize = 6;
pub const DEFAULT_MAX_ITER: usize = 1000;
pub const MAX_IPV_REJECTIONS: u64 = 100;

pub fn default_ipv_tol(n: usize) -> f64 {
    1e-3 / (n as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SCAConfig {
    pub k_override: Option<usize>,
    pub stability_count: usize,
    pub max_iter: usize,
    /// `None` uses [`default_ipv_tol`].
    pub ipv_uniform_tol: Option<f64>,
    pub seed: u64,
}

impl Default for SCAConfig {
    fn default() -> Self {
        Self {
            k_override: None,
            stability_count: DEFAULT_STABILITY_COUNT,
            max_iter: DEFAULT_MAX_ITER,
            ipv_uniform_tol: None,
            seed: 0,
        }
    }
}

impl SCAConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stability_count == 0 {
            return Err(Error::domain("stability_count must be at least 1"));
        }
        if self.max_iter < self.stability_count {
            return Err(Error::domain(format!(
                "max_iter ({}) must be at least stability_count ({})",
                self.max_iter, self.stability_count
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Stabilized,
    MaxIter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub t: usize,
    pub x: Vec<f64>,
    pub labels: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SCAResult {
    pub clusters: ClusteringResult,
    pub k_used: usize,
    pub iterations_run: usize,
    pub trace: Vec<TraceStep>,
    pub stop_reason: StopReason,
    /// Present when `k` came from the spectrum rather than an override.
    pub perron: Option<PerronCluster>,
}

/// Independent uniform entries, normalised, redrawn on a fresh stream of
/// the same seed while within `uniform_tol` of the uniform vector.
pub fn random_ipv(n: usize, seed: u64, uniform_tol: f64) -> Result<ProbVector> {
    if n < 2 {
        return Err(Error::domain("initial vector needs n >= 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 0..MAX_IPV_REJECTIONS {
        rng.set_stream(attempt);
        let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let Ok(x) = ProbVector::new(raw) else { continue };
        if x.distance_to_uniform() >= uniform_tol {
            return Ok(x);
        }
    }
    Err(Error::Exhaustion(format!(
        "{MAX_IPV_REJECTIONS} consecutive initial vectors were within {uniform_tol:e} of uniform"
    )))
}

/// Splits the descending sort of `x` at its `k − 1` largest consecutive
/// gaps (leftmost first on ties). Label 0 is the cluster of largest values.
pub fn gap_partition(x: &[f64], k: usize) -> Result<ClusteringResult> {
    let n = x.len();
    if k == 0 || k > n {
        return Err(Error::domain(format!("k={k} invalid for {n} elements")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| x[j].total_cmp(&x[i]).then(i.cmp(&j)));
    let gaps: Vec<f64> = order.windows(2).map(|w| x[w[0]] - x[w[1]]).collect();
    let distinct = 1 + gaps.iter().filter(|&&g| g > 0.0).count();
    if k > distinct {
        let collision = order
            .windows(2)
            .find(|w| x[w[0]] == x[w[1]])
            .map(|w| format!("elements {} and {} share value {}", w[0], w[1], x[w[0]]))
            .unwrap_or_default();
        return Err(Error::DegeneratePartition { k, distinct, detail: collision });
    }
    let mut by_size: Vec<usize> = (0..gaps.len()).collect();
    by_size.sort_by(|&a, &b| gaps[b].total_cmp(&gaps[a]).then(a.cmp(&b)));
    let mut cut = vec![false; gaps.len()];
    for &g in &by_size[..k - 1] {
        cut[g] = true;
    }
    let mut labels = vec![0; n];
    let mut seg = 0;
    for (rank, &i) in order.iter().enumerate() {
        labels[i] = seg;
        if rank < gaps.len() && cut[rank] {
            seg += 1;
        }
    }
    ClusteringResult::new(labels, k, Provenance::new("gap-partition", k, None))
}

/// Perron cluster of `P` unless overridden.
pub fn choose_k(b: &BalancedMatrix, k_override: Option<usize>) -> Result<(usize, Option<PerronCluster>)> {
    match k_override {
        Some(k) => Ok((k, None)),
        None => {
            let spec = sym_eigen(&b.p, DEFAULT_EIGEN_TOL)?;
            let pc = perron_cluster(&spec)?;
            Ok((pc.k, Some(pc)))
        }
    }
}

pub fn run_sca(b: &BalancedMatrix, cfg: &SCAConfig) -> Result<SCAResult> {
    cfg.validate()?;
    let n = b.n();
    let tol = cfg.ipv_uniform_tol.unwrap_or_else(|| default_ipv_tol(n));
    let x0 = random_ipv(n, cfg.seed, tol)?;
    let (k, perron) = choose_k(b, cfg.k_override)?;
    let mut res = evolve_until_stable(b, x0, k, cfg)?;
    res.perron = perron;
    res.clusters.provenance.seed = Some(cfg.seed);
    Ok(res)
}

/// Like [`run_sca`] but from a caller-supplied starting vector.
pub fn run_sca_from(b: &BalancedMatrix, x0: ProbVector, cfg: &SCAConfig) -> Result<SCAResult> {
    cfg.validate()?;
    Error::check_dim(b.n(), x0.len())?;
    let (k, perron) = choose_k(b, cfg.k_override)?;
    let mut res = evolve_until_stable(b, x0, k, cfg)?;
    res.perron = perron;
    Ok(res)
}

fn evolve_until_stable(b: &BalancedMatrix, mut x: ProbVector, k: usize, cfg: &SCAConfig) -> Result<SCAResult> {
    let mut current = gap_partition(x.as_slice(), k)?;
    let mut trace = vec![TraceStep { t: 0, x: x.as_slice().to_vec(), labels: current.labels.clone() }];
    let mut run = 1;
    let mut t = 0;
    let stop_reason = loop {
        if run >= cfg.stability_count {
            break StopReason::Stabilized;
        }
        if t == cfg.max_iter {
            break StopReason::MaxIter;
        }
        x = evolve(&x, &b.p)?;
        t += 1;
        let next = gap_partition(x.as_slice(), k)?;
        if next.same_partition(&current) {
            run += 1;
        } else {
            run = 1;
        }
        trace.push(TraceStep { t, x: x.as_slice().to_vec(), labels: next.labels.clone() });
        current = next;
    };
    current.provenance = Provenance::new("sca", k, None);
    Ok(SCAResult { clusters: current, k_used: k, iterations_run: t, trace, stop_reason, perron: None })
}

/// One distinct final clustering and how many restarts produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub labels: Vec<usize>,
    pub count: usize,
    pub seeds: Vec<u64>,
}

/// Runs `restarts` independent SCAs with seeds `cfg.seed + i` and groups
/// the final clusterings by partition, most frequent first.
pub fn sca_restarts(b: &BalancedMatrix, cfg: &SCAConfig, restarts: usize) -> Result<Vec<Solution>> {
    if restarts == 0 {
        return Err(Error::domain("restarts must be at least 1"));
    }
    let (k, _) = choose_k(b, cfg.k_override)?;
    let runs: Vec<(u64, Vec<usize>)> = (0..restarts as u64)
        .into_par_iter()
        .map(|i| {
            let seed = cfg.seed.wrapping_add(i);
            let c = SCAConfig { seed, k_override: Some(k), ..cfg.clone() };
            run_sca(b, &c).map(|r| (seed, r.clusters.canonical_labels()))
        })
        .collect::<Result<_>>()?;
    let mut out: Vec<Solution> = Vec::new();
    for (seed, labels) in runs {
        match out.iter_mut().find(|s| s.labels == labels) {
            Some(s) => {
                s.count += 1;
                s.seeds.push(seed);
            }
            None => out.push(Solution { labels, count: 1, seeds: vec![seed] }),
        }
    }
    out.sort_by(|a, b| b.count.cmp(&a.count).then(a.seeds[0].cmp(&b.seeds[0])));
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CcaConfig {
    pub target: usize,
    pub min_size: usize,
    pub max_size: usize,
    pub max_iter: usize,
    pub closest_m: Option<usize>,
    pub k_override: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CcaResult {
    /// Sorted indices; includes the target unless `closest_m` was used.
    pub members: Vec<usize>,
    /// Step at which the target's cluster first qualified.
    pub t: usize,
    pub k_used: usize,
    pub x: Vec<f64>,
    pub target_cluster_sizes: Vec<usize>,
}

pub fn run_cca(b: &BalancedMatrix, cfg: &CcaConfig) -> Result<CcaResult> {
    let n = b.n();
    if cfg.target >= n {
        return Err(Error::domain(format!("target {} out of range for n={n}", cfg.target)));
    }
    if cfg.min_size > cfg.max_size {
        return Err(Error::domain("min_size exceeds max_size"));
    }
    if let Some(m) = cfg.closest_m {
        if m == 0 || m >= n {
            return Err(Error::domain(format!("closest_m must be in 1..{n}")));
        }
    }
    let (k, _) = choose_k(b, cfg.k_override)?;
    let mut x = ProbVector::indicator(n, cfg.target)?;
    let mut sizes = Vec::new();
    for t in 1..=cfg.max_iter {
        x = evolve(&x, &b.p)?;
        let part = match gap_partition(x.as_slice(), k) {
            Ok(p) => p,
            Err(Error::DegeneratePartition { .. }) => {
                sizes.push(0);
                continue;
            }
            Err(e) => return Err(e),
        };
        let lab = part.labels[cfg.target];
        let cluster: Vec<usize> = (0..n).filter(|&j| part.labels[j] == lab).collect();
        sizes.push(cluster.len());
        if (cfg.min_size..=cfg.max_size).contains(&cluster.len()) {
            let members = match cfg.closest_m {
                None => cluster,
                Some(m) => closest_to(x.as_slice(), cfg.target, m),
            };
            return Ok(CcaResult { members, t, k_used: k, x: x.into_inner(), target_cluster_sizes: sizes });
        }
    }
    Err(Error::Exhaustion(format!(
        "no cluster of size {}..={} around element {} within {} steps (sizes seen: {:?})",
        cfg.min_size, cfg.max_size, cfg.target, cfg.max_iter, sizes
    )))
}

/// The `m` other indices whose entries are closest to `x[target]`, ties by index.
fn closest_to(x: &[f64], target: usize, m: usize) -> Vec<usize> {
    let mut others: Vec<usize> = (0..x.len()).filter(|&j| j != target).collect();
    others.sort_by(|&a, &b| {
        let da = (x[a] - x[target]).abs();
        let db = (x[b] - x[target]).abs();
        da.total_cmp(&db).then(a.cmp(&b))
    });
    let mut chosen = others[..m].to_vec();
    chosen.sort_unstable();
    chosen
}
