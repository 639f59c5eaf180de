//! End-to-end runs: ensemble, consensus, balancing, spectrum, clustering.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balance::{balance_matrix, scaling_bound_slack, BalancedMatrix, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::consensus::{combine, consensus_sum, knn_consensus, ConsensusMatrix, KnnMode, Metric};
use crate::data::{baseball_data, load_data, LoadOptions};
use crate::ensemble::{clustering_errors, kmeans, nmf_clustering, ClusteringResult, DataMatrix, KMEANS_DEFAULT_MAX_ITER};
use crate::error::{Error, Result};
use crate::matrix::io::{write_matrix, write_vector, Metadata};
use crate::matrix::{sym_eigen, Spectrum, DEFAULT_EIGEN_TOL};
use crate::sca::{run_sca, sca_restarts, SCAConfig, Solution, StopReason, TraceStep};
use crate::uncouple::perron_cluster;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum Input {
    Baseball,
    Csv { path: PathBuf, options: LoadOptions },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Kmeans,
    Nmf,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kmeans" => Ok(Method::Kmeans),
            "nmf" => Ok(Method::Nmf),
            other => Err(Error::domain(format!("unknown method {other:?} (kmeans|nmf)"))),
        }
    }
}

/// `repetitions` runs of `method` with `k` clusters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberSpec {
    pub method: Method,
    pub k: usize,
    pub repetitions: usize,
}

impl std::str::FromStr for MemberSpec {
    type Err = Error;
    /// `method:k:repetitions`, e.g. `nmf:3:100`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::domain(format!("member spec {s:?} is not method:k:repetitions"));
        if parts.len() != 3 {
            return Err(bad());
        }
        Ok(MemberSpec {
            method: parts[0].parse()?,
            k: parts[1].parse().map_err(|_| bad())?,
            repetitions: parts[2].parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub members: Vec<MemberSpec>,
    /// Member `i` (in listing order) is seeded with `seed_base + i`.
    pub seed_base: u64,
}

impl EnsembleSpec {
    pub fn size(&self) -> usize {
        self.members.iter().map(|m| m.repetitions).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum ConsensusSpec {
    Ensemble,
    Knn { kappa: usize, metric: Metric, mode: KnnMode },
    Combined { kappa: usize, metric: Metric, mode: KnnMode },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub input: Input,
    pub ensemble: EnsembleSpec,
    pub consensus: ConsensusSpec,
    pub balance_tol: f64,
    pub balance_max_iter: usize,
    pub sca: SCAConfig,
    /// Extra seeded runs summarised in the report; 0 skips them.
    pub restarts: usize,
    pub out_dir: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn new(input: Input, ensemble: EnsembleSpec, consensus: ConsensusSpec) -> Self {
        Self {
            input,
            ensemble,
            consensus,
            balance_tol: DEFAULT_TOL,
            balance_max_iter: DEFAULT_MAX_ITER,
            sca: SCAConfig::default(),
            restarts: 0,
            out_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let needs_members = !matches!(self.consensus, ConsensusSpec::Knn { .. });
        if needs_members && self.ensemble.members.is_empty() {
            return Err(Error::domain("ensemble needs at least one member spec"));
        }
        for m in &self.ensemble.members {
            if m.repetitions == 0 {
                return Err(Error::domain("ensemble repetitions must be at least 1"));
            }
            if m.k < 2 {
                return Err(Error::domain(format!("ensemble k must be at least 2, got {}", m.k)));
            }
        }
        self.sca.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub n: usize,
    pub ensemble_size: usize,
    pub detected_k: usize,
    pub k_used: usize,
    pub perron_gap: f64,
    pub eigenvalues: Vec<f64>,
    pub balance_iterations: usize,
    pub balance_residual: f64,
    pub labels: Vec<usize>,
    pub cluster_sizes: Vec<usize>,
    pub iterations: usize,
    pub stop_reason: StopReason,
    /// Present only when truth labels were supplied.
    pub errors: Option<usize>,
    pub solutions: Vec<Solution>,
    pub warnings: Vec<String>,
    pub timings: Vec<Timing>,
}

/// Everything a run produced, for callers that want more than the report.
#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub report: RunReport,
    pub consensus: ConsensusMatrix,
    pub balanced: BalancedMatrix,
    pub spectrum: Spectrum,
    pub trace: Vec<TraceStep>,
}

/// Builds the ensemble with members run in parallel; output order and
/// seeds depend only on the spec.
pub fn build_ensemble(a: &DataMatrix, spec: &EnsembleSpec) -> Result<Vec<ClusteringResult>> {
    let jobs: Vec<(Method, usize, u64)> = spec
        .members
        .iter()
        .flat_map(|m| std::iter::repeat((m.method, m.k)).take(m.repetitions))
        .enumerate()
        .map(|(i, (method, k))| (method, k, spec.seed_base.wrapping_add(i as u64)))
        .collect();
    jobs.into_par_iter()
        .map(|(method, k, seed)| match method {
            Method::Kmeans => kmeans(a, k, seed, KMEANS_DEFAULT_MAX_ITER),
            Method::Nmf => nmf_clustering(a, k, seed),
        })
        .collect()
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage { stage: name, source: Box::new(e) })
}

pub fn load_input(input: &Input) -> Result<(DataMatrix, Option<ClusteringResult>)> {
    match input {
        Input::Baseball => Ok((baseball_data(), None)),
        Input::Csv { path, options } => {
            let d = load_data(path, options)?;
            Ok((d.data, d.labels))
        }
    }
}

pub fn pipeline(cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    let (a, truth) = stage("load", load_input(&cfg.input))?;
    run_pipeline_on(&a, truth.as_ref(), cfg)
}

/// Runs every stage on already loaded data. Artifacts are written to
/// `cfg.out_dir` as each stage finishes, so a failure keeps earlier ones.
pub fn run_pipeline_on(a: &DataMatrix, truth: Option<&ClusteringResult>, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    if let Some(t) = truth {
        Error::check_dim(a.elements(), t.n())?;
    }
    if let Some(dir) = &cfg.out_dir {
        fs::create_dir_all(dir)?;
    }
    let mut timings = Vec::new();
    let mut warnings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str, timings: &mut Vec<Timing>| {
        timings.push(Timing { stage: name.into(), seconds: clock.elapsed().as_secs_f64() });
        clock = Instant::now();
    };

    let ensemble = match cfg.consensus {
        ConsensusSpec::Knn { .. } => Vec::new(),
        _ => stage("ensemble", build_ensemble(a, &cfg.ensemble))?,
    };
    warnings.extend(ensemble.iter().filter_map(|c| c.provenance.warning.clone()));
    lap("ensemble", &mut timings);

    let consensus = stage(
        "consensus",
        match cfg.consensus {
            ConsensusSpec::Ensemble => consensus_sum(&ensemble),
            ConsensusSpec::Knn { kappa, metric, mode } => knn_consensus(a, kappa, metric, mode),
            ConsensusSpec::Combined { kappa, metric, mode } => {
                consensus_sum(&ensemble).and_then(|s| combine(&s, &knn_consensus(a, kappa, metric, mode)?))
            }
        },
    )?;
    persist(cfg, "S.txt", |w| consensus.write(w))?;
    lap("consensus", &mut timings);

    let balanced = stage("balance", balance_matrix(&consensus.s, cfg.balance_tol, cfg.balance_max_iter))?;
    if let Some(slack) = scaling_bound_slack(&consensus, &balanced) {
        if slack < -1e-12 {
            warnings.push(format!("max scaling exceeds 1/sqrt(r) by {:.3e}", -slack));
        }
    }
    persist(cfg, "P.txt", |w| write_matrix(w, &balanced.p, &Metadata::new()))?;
    persist(cfg, "d.txt", |w| write_vector(w, &balanced.d, &Metadata::new()))?;
    lap("balance", &mut timings);

    let spectrum = stage("spectrum", sym_eigen(&balanced.p, DEFAULT_EIGEN_TOL))?;
    let perron = stage("spectrum", perron_cluster(&spectrum))?;
    warnings.extend(perron.warning.clone());
    persist(cfg, "spectrum.txt", |w| write_vector(w, &spectrum.eigenvalues, &Metadata::new()))?;
    lap("spectrum", &mut timings);

    let sca_cfg = SCAConfig { k_override: Some(cfg.sca.k_override.unwrap_or(perron.k)), ..cfg.sca.clone() };
    let res = stage("sca", run_sca(&balanced, &sca_cfg))?;
    persist(cfg, "clusters.csv", |w| write_clusters(w, &res.clusters))?;
    let solutions = if cfg.restarts > 0 {
        stage("sca", sca_restarts(&balanced, &sca_cfg, cfg.restarts))?
    } else {
        Vec::new()
    };
    lap("sca", &mut timings);

    let errors = truth.map(|t| clustering_errors(&res.clusters, t)).transpose()?;
    let report = RunReport {
        n: a.elements(),
        ensemble_size: ensemble.len(),
        detected_k: perron.k,
        k_used: res.k_used,
        perron_gap: perron.gap,
        eigenvalues: spectrum.eigenvalues.clone(),
        balance_iterations: balanced.iterations,
        balance_residual: balanced.residual,
        labels: res.clusters.labels.clone(),
        cluster_sizes: res.clusters.sizes(),
        iterations: res.iterations_run,
        stop_reason: res.stop_reason,
        errors,
        solutions,
        warnings,
        timings,
    };
    persist(cfg, "report.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &report).map_err(std::io::Error::from)?;
        writeln!(w)?;
        Ok(())
    })?;
    Ok(PipelineOutput { report, consensus, balanced, spectrum, trace: res.trace })
}

fn persist(cfg: &PipelineConfig, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let Some(dir) = &cfg.out_dir else { return Ok(()) };
    write_file(&dir.join(name), f)
}

pub fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

/// `index,label` rows, both 1-based.
pub fn write_clusters<W: Write>(w: &mut W, c: &ClusteringResult) -> Result<()> {
    writeln!(w, "index,label")?;
    for (i, l) in c.labels.iter().enumerate() {
        writeln!(w, "{},{}", i + 1, l + 1)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn baseball_cfg(seed_base: u64) -> PipelineConfig {
        let members = vec![
            MemberSpec { method: Method::Nmf, k: 2, repetitions: 50 },
            MemberSpec { method: Method::Nmf, k: 3, repetitions: 50 },
        ];
        PipelineConfig::new(Input::Baseball, EnsembleSpec { members, seed_base }, ConsensusSpec::Ensemble)
    }

    #[test]
    fn member_spec_parses() {
        let m: MemberSpec = "nmf:3:100".parse().unwrap();
        assert_eq!(m, MemberSpec { method: Method::Nmf, k: 3, repetitions: 100 });
        assert!("nmf:3".parse::<MemberSpec>().is_err());
        assert!("svd:3:1".parse::<MemberSpec>().is_err());
    }

    #[test]
    fn validation() {
        let mut cfg = baseball_cfg(0);
        cfg.ensemble.members[0].k = 1;
        assert!(cfg.validate().is_err());
        let mut cfg = baseball_cfg(0);
        cfg.ensemble.members[1].repetitions = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn baseball_recipe() {
        let out = pipeline(&baseball_cfg(1)).unwrap();
        assert_eq!(out.report.ensemble_size, 100);
        assert_eq!(out.report.detected_k, 2);
        let c = ClusteringResult::from_labels(out.report.labels.clone(), "t").unwrap();
        assert_eq!(c.canonical_labels(), vec![0, 0, 0, 1, 1, 1]);
        assert_eq!(out.report.errors, None);
    }

    #[test]
    fn stage_errors_name_the_stage() {
        let mut cfg = baseball_cfg(0);
        cfg.balance_max_iter = 1;
        cfg.balance_tol = 1e-15;
        match pipeline(&cfg) {
            Err(Error::Stage { stage: "balance", source }) => {
                assert!(matches!(*source, Error::NonConvergence { .. }))
            }
            other => panic!("{other:?}"),
        }
    }
}
