//! Consensus similarity matrices: co-clustering counts summed over an
//! ensemble, sums of such matrices, and the single-measure κ-nearest-neighbour
//! variant.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{ClusteringResult, DataMatrix};
use crate::error::{Error, Result};
use crate::matrix::io::{read_matrix, write_matrix, Metadata};
use crate::matrix::SymMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Euclidean,
    Cosine,
}

/// How two neighbour sets become one similarity count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KnnMode {
    /// `|N_i ∩ N_j|`, the shared-neighbour count.
    #[default]
    Intersection,
    /// `|N_i ∪ N_j|`.
    Union,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConsensusKind {
    EnsembleSum,
    Knn { kappa: usize, metric: Metric, mode: KnnMode },
    Combined,
}

macro_rules! name_enum {
    ($t:ty { $($v:ident => $s:literal),* $(,)? }) => {
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $(Self::$v => $s),* })
            }
        }
        impl FromStr for $t {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($s => Ok(Self::$v),)*
                    other => Err(Error::domain(format!("unknown {}: {other:?}", stringify!($t)))),
                }
            }
        }
    };
}

name_enum!(Metric { Euclidean => "euclidean", Cosine => "cosine" });
name_enum!(KnnMode { Intersection => "intersection", Union => "union" });

/// A nonnegative symmetric similarity matrix of counts.
///
/// `r` is the value every diagonal entry carries: the ensemble size for
/// ensemble sums and `kappa` for the κ-NN construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsensusMatrix {
    pub s: SymMatrix,
    pub r: usize,
    pub kind: ConsensusKind,
}

impl ConsensusMatrix {
    pub fn n(&self) -> usize {
        self.s.n()
    }

    /// Wraps an arbitrary nonnegative symmetric matrix, e.g. one printed in a report.
    pub fn from_counts(s: SymMatrix, r: usize, kind: ConsensusKind) -> Result<Self> {
        if !s.is_nonnegative() {
            return Err(Error::domain("consensus matrix must be nonnegative"));
        }
        Ok(Self { s, r, kind })
    }

    /// Elements with no off-diagonal similarity to anything else.
    pub fn isolated_elements(&self) -> Vec<usize> {
        (0..self.n())
            .filter(|&i| (0..self.n()).all(|j| j == i || self.s.get(i, j) == 0.0))
            .collect()
    }

    pub fn metadata(&self) -> Metadata {
        let mut m = Metadata::new();
        m.insert("r".into(), self.r.to_string());
        match self.kind {
            ConsensusKind::EnsembleSum => {
                m.insert("kind".into(), "ensemble-sum".into());
            }
            ConsensusKind::Combined => {
                m.insert("kind".into(), "combined".into());
            }
            ConsensusKind::Knn { kappa, metric, mode } => {
                m.insert("kind".into(), "knn".into());
                m.insert("kappa".into(), kappa.to_string());
                m.insert("metric".into(), metric.to_string());
                m.insert("mode".into(), mode.to_string());
            }
        }
        m
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        write_matrix(w, &self.s, &self.metadata())
    }

    /// Reads the text format. Missing metadata defaults to an ensemble sum
    /// whose `r` is the largest diagonal entry.
    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let (s, meta) = read_matrix(r)?;
        let parse_usize = |key: &str| -> Result<Option<usize>> {
            meta.get(key)
                .map(|v| {
                    v.parse()
                        .map_err(|_| Error::domain(format!("metadata {key}={v:?} is not an integer")))
                })
                .transpose()
        };
        let r = match parse_usize("r")? {
            Some(r) => r,
            None => s.diagonal().into_iter().fold(0.0, f64::max).round() as usize,
        };
        let kind = match meta.get("kind").map(String::as_str) {
            None | Some("ensemble-sum") => ConsensusKind::EnsembleSum,
            Some("combined") => ConsensusKind::Combined,
            Some("knn") => ConsensusKind::Knn {
                kappa: parse_usize("kappa")?.unwrap_or(r),
                metric: meta.get("metric").map_or(Ok(Metric::Euclidean), |m| m.parse())?,
                mode: meta.get("mode").map_or(Ok(KnnMode::Intersection), |m| m.parse())?,
            },
            Some(other) => return Err(Error::domain(format!("unknown consensus kind {other:?}"))),
        };
        Self::from_counts(s, r, kind)
    }
}

/// 0/1 co-membership matrix with unit diagonal.
pub fn adjacency(c: &ClusteringResult) -> SymMatrix {
    SymMatrix::from_fn(c.n(), |i, j| (c.labels[i] == c.labels[j]) as u8 as f64)
        .expect("clusterings are nonempty")
}

/// `S = Σ_k A⁽ᵏ⁾` over the ensemble.
pub fn consensus_sum(ensemble: &[ClusteringResult]) -> Result<ConsensusMatrix> {
    let first = ensemble
        .first()
        .ok_or_else(|| Error::domain("ensemble must contain at least one clustering"))?;
    let n = first.n();
    let mut s = SymMatrix::zeros(n)?;
    for c in ensemble {
        if c.n() != n {
            return Err(Error::domain(format!(
                "ensemble mixes {n}-element and {}-element clusterings",
                c.n()
            )));
        }
        for i in 0..n {
            for j in i..n {
                if c.labels[i] == c.labels[j] {
                    s.set(i, j, s.get(i, j) + 1.0);
                }
            }
        }
    }
    Ok(ConsensusMatrix {
        s,
        r: ensemble.len(),
        kind: ConsensusKind::EnsembleSum,
    })
}

/// Entrywise sum of two consensus matrices over the same elements.
pub fn combine(a: &ConsensusMatrix, b: &ConsensusMatrix) -> Result<ConsensusMatrix> {
    if a.n() != b.n() {
        return Err(Error::domain(format!(
            "cannot combine consensus matrices of order {} and {}",
            a.n(),
            b.n()
        )));
    }
    Ok(ConsensusMatrix {
        s: a.s.add(&b.s)?,
        r: a.r + b.r,
        kind: ConsensusKind::Combined,
    })
}

fn distance(metric: Metric, a: &[f64], b: &[f64]) -> f64 {
    match metric {
        Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt(),
        Metric::Cosine => {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            if na == 0.0 || nb == 0.0 {
                1.0
            } else {
                1.0 - dot / (na * nb)
            }
        }
    }
}

/// The `kappa` nearest other elements of every element, nearest first.
/// Distance ties go to the smaller index.
pub fn nearest_neighbors(a: &DataMatrix, kappa: usize, metric: Metric) -> Result<Vec<Vec<usize>>> {
    let n = a.elements();
    if kappa == 0 || kappa >= n {
        return Err(Error::domain(format!("kappa must satisfy 1 <= kappa < n={n}, got {kappa}")));
    }
    let points: Vec<Vec<f64>> = (0..n).map(|j| a.element(j)).collect();
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (distance(metric, &points[i], &points[j]), j))
                .collect();
            cand.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            cand.truncate(kappa);
            cand.into_iter().map(|(_, j)| j).collect()
        })
        .collect())
}

/// Single-measure consensus from κ-nearest-neighbour sets (self excluded,
/// diagonal fixed at `kappa`).
pub fn knn_consensus(a: &DataMatrix, kappa: usize, metric: Metric, mode: KnnMode) -> Result<ConsensusMatrix> {
    let n = a.elements();
    let sets = nearest_neighbors(a, kappa, metric)?;
    let member: Vec<Vec<bool>> = sets
        .iter()
        .map(|s| {
            let mut m = vec![false; n];
            s.iter().for_each(|&j| m[j] = true);
            m
        })
        .collect();
    let s = SymMatrix::from_fn(n, |i, j| {
        if i == j {
            return kappa as f64;
        }
        let shared = sets[i].iter().filter(|&&g| member[j][g]).count();
        match mode {
            KnnMode::Intersection => shared as f64,
            KnnMode::Union => (2 * kappa - shared) as f64,
        }
    })?;
    Ok(ConsensusMatrix {
        s,
        r: kappa,
        kind: ConsensusKind::Knn { kappa, metric, mode },
    })
}
