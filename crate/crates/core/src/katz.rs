//! Katz similarity and the first label-propagation step.
//!
//! `W = (I - αA)^{-1} - I` sums `α^h · #walks of length h` over all `h ≥ 1`.
//! The series converges iff `α < 1/ε`, `ε` being the largest eigenvalue of `A`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::corpus::{
    ceil_count, complement, header_field, read_id_lists, take_list, write_id_lists, Corpus,
};
use crate::error::{Error, Result};

const POWER_ITERATIONS: usize = 200;
const POWER_TOLERANCE: f64 = 1e-8;

/// Dense Katz similarity matrix together with the damping used to build it.
#[derive(Debug, Clone, PartialEq)]
pub struct KatzMatrix {
    pub w: DMatrix<f64>,
    pub alpha: f64,
}

/// Unlabeled nodes inferred as interest (`ip_katz`) and non-interest (`in_katz`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KatzSelection {
    pub ip_katz: Vec<usize>,
    pub in_katz: Vec<usize>,
    pub ip_ratio: f64,
    pub in_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KatzConfig {
    pub alpha: f64,
    pub ip_ratio: f64,
    pub in_ratio: f64,
}

impl Default for KatzConfig {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            ip_ratio: 0.10,
            in_ratio: 0.10,
        }
    }
}

impl KatzConfig {
    /// Range checks that need no graph; `alpha < 1/ε` is checked by [`validate_alpha`].
    pub fn validate(&self) -> Result<()> {
        if self.alpha < 0.0 || !self.alpha.is_finite() {
            return Err(Error::param(
                "katz.alpha",
                format!("{} must be finite and nonnegative", self.alpha),
            ));
        }
        for (name, r) in [
            ("katz.ip_ratio", self.ip_ratio),
            ("katz.in_ratio", self.in_ratio),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::param(name, format!("{r} is outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Largest eigenvalue of a symmetric nonnegative matrix.
///
/// Power iteration on `A + I` (the shift removes the ±ε oscillation of
/// bipartite components), run separately on each connected component from an
/// all-ones start, with the Rayleigh quotient as the estimate.
pub fn largest_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut component = vec![usize::MAX; n];
    let mut best: f64 = 0.0;
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        let mut members = vec![start];
        component[start] = start;
        let mut head = 0;
        while head < members.len() {
            let u = members[head];
            head += 1;
            for v in 0..n {
                if a[(u, v)] != 0.0 && component[v] == usize::MAX {
                    component[v] = start;
                    members.push(v);
                }
            }
        }
        if members.len() == 1 {
            best = best.max(a[(start, start)]);
            continue;
        }
        members.sort_unstable();
        let sub = DMatrix::from_fn(members.len(), members.len(), |i, j| {
            a[(members[i], members[j])]
        });
        best = best.max(power_iteration(&sub));
    }
    best
}

fn power_iteration(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut x = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut estimate = f64::NAN;
    for _ in 0..POWER_ITERATIONS {
        let y = a * &x;
        let rayleigh = x.dot(&y);
        let converged = (rayleigh - estimate).abs() <= POWER_TOLERANCE * rayleigh.abs().max(1.0);
        estimate = rayleigh;
        if converged {
            break;
        }
        let shifted = y + &x;
        let norm = shifted.norm();
        if norm == 0.0 {
            break;
        }
        x = shifted / norm;
    }
    estimate
}

/// Returns `ε` if `0 ≤ alpha < 1/ε`.
pub fn validate_alpha(a: &DMatrix<f64>, alpha: f64) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(
            "adjacency matrix is not square".into(),
        ));
    }
    let eigenvalue = largest_eigenvalue(a);
    if alpha.is_nan() || alpha < 0.0 || alpha * eigenvalue >= 1.0 {
        return Err(Error::AlphaOutOfRange { alpha, eigenvalue });
    }
    Ok(eigenvalue)
}

/// Closed-form Katz matrix via a Cholesky solve of `(I - αA)(W + I) = I`.
///
/// `I - αA` is positive definite exactly when the series converges, so a
/// failed factorization is reported as an out-of-range `alpha`.
pub fn katz_matrix(a: &DMatrix<f64>, alpha: f64) -> Result<KatzMatrix> {
    let eigenvalue = validate_alpha(a, alpha)?;
    let n = a.nrows();
    let system = DMatrix::identity(n, n) - a * alpha;
    let chol = system
        .cholesky()
        .ok_or(Error::AlphaOutOfRange { alpha, eigenvalue })?;
    let mut w = chol.inverse();
    for i in 0..n {
        w[(i, i)] -= 1.0;
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    Ok(KatzMatrix { w, alpha })
}

fn mean_similarity(w: &DMatrix<f64>, u: usize, set: &[usize]) -> f64 {
    set.iter().map(|&m| w[(u, m)]).sum::<f64>() / set.len() as f64
}

/// Step-1 propagation: the most Katz-similar unlabeled nodes become `ip_katz`,
/// the least similar of the rest (against labeled ∪ `ip_katz`) become `in_katz`.
///
/// Sizes are `⌈ratio · |unlabeled|⌉`; ties go to the smaller node index.
pub fn propagate_step1(
    katz: &KatzMatrix,
    labeled: &[usize],
    ip_ratio: f64,
    in_ratio: f64,
) -> Result<KatzSelection> {
    let w = &katz.w;
    let n = w.nrows();
    if labeled.is_empty() {
        return Err(Error::Empty("labeled set"));
    }
    for (name, r) in [("ip_ratio", ip_ratio), ("in_ratio", in_ratio)] {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::param(name, format!("{r} is outside [0, 1]")));
        }
    }
    let mut labeled = labeled.to_vec();
    labeled.sort_unstable();
    labeled.dedup();
    if let Some(&bad) = labeled.iter().find(|&&l| l >= n) {
        return Err(Error::param(
            "labeled set",
            format!("node {bad} out of range"),
        ));
    }
    let unlabeled = complement(n, &labeled);
    let n_ip = ceil_count(ip_ratio, unlabeled.len());
    let n_in = ceil_count(in_ratio, unlabeled.len());
    if n_ip + n_in > unlabeled.len() {
        return Err(Error::param(
            "ip_ratio + in_ratio",
            format!(
                "{n_ip} + {n_in} selections exceed the {} unlabeled nodes",
                unlabeled.len()
            ),
        ));
    }

    let mut ranked: Vec<(f64, usize)> = unlabeled
        .iter()
        .map(|&u| (mean_similarity(w, u, &labeled), u))
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut ip_katz: Vec<usize> = ranked[..n_ip].iter().map(|&(_, u)| u).collect();
    ip_katz.sort_unstable();

    let mut reference = labeled.clone();
    reference.extend_from_slice(&ip_katz);
    reference.sort_unstable();
    let mut ranked: Vec<(f64, usize)> = unlabeled
        .iter()
        .filter(|u| ip_katz.binary_search(u).is_err())
        .map(|&u| (mean_similarity(w, u, &reference), u))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut in_katz: Vec<usize> = ranked[..n_in].iter().map(|&(_, u)| u).collect();
    in_katz.sort_unstable();

    Ok(KatzSelection {
        ip_katz,
        in_katz,
        ip_ratio,
        in_ratio,
    })
}

/// Writes the selection as two id lists (`ip`, `in`) under a header.
pub fn write_selection(path: &std::path::Path, corpus: &Corpus, sel: &KatzSelection) -> Result<()> {
    let header = format!(
        "katz-selection ip_ratio={} in_ratio={}",
        sel.ip_ratio, sel.in_ratio
    );
    write_id_lists(
        path,
        corpus,
        &header,
        &[("ip", &sel.ip_katz), ("in", &sel.in_katz)],
    )
}

/// Reads a file written by [`write_selection`].
pub fn read_selection(path: &std::path::Path, corpus: &Corpus) -> Result<KatzSelection> {
    let (header, mut lists) = read_id_lists(path, corpus)?;
    let ratio = |key| {
        header_field(&header, key)
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| Error::parse(path.display().to_string(), format!("header lacks {key}=")))
    };
    Ok(KatzSelection {
        ip_ratio: ratio("ip_ratio")?,
        in_ratio: ratio("in_ratio")?,
        ip_katz: take_list(path, &mut lists, "ip")?,
        in_katz: take_list(path, &mut lists, "in")?,
    })
}

/// Dense text dump of `W`, one row per line.
pub fn write_katz_matrix(path: &std::path::Path, katz: &KatzMatrix) -> Result<()> {
    use std::io::Write;
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "# alpha {} n {}", katz.alpha, katz.w.nrows())?;
        for row in katz.w.row_iter() {
            let line: Vec<String> = row.iter().map(f64::to_string).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{adjacency_matrix, SimilarityGraph};

    fn adjacency(n: usize, edges: &[(usize, usize)]) -> DMatrix<f64> {
        adjacency_matrix(&SimilarityGraph::from_edges(n, edges.iter().copied()).unwrap())
    }

    #[test]
    fn eigenvalue_hand_cases() {
        // [[0,1],[1,0]] has spectrum {1, -1}; a 3-cycle has {2, -1, -1}.
        let edge = adjacency(2, &[(0, 1)]);
        assert!((largest_eigenvalue(&edge) - 1.0).abs() < 1e-8);
        assert!(matches!(
            validate_alpha(&edge, 1.0),
            Err(Error::AlphaOutOfRange { .. })
        ));
        let triangle = adjacency(3, &[(0, 1), (1, 2), (0, 2)]);
        let eps = validate_alpha(&triangle, 0.4).unwrap();
        assert!((eps - 2.0).abs() < 1e-8);
        // Path on 3 nodes is bipartite with spectrum {±√2, 0}.
        let path = adjacency(3, &[(0, 1), (1, 2)]);
        assert!((largest_eigenvalue(&path) - 2f64.sqrt()).abs() < 1e-7);
    }

    #[test]
    fn alpha_zero_and_negative() {
        let tri = adjacency(3, &[(0, 1), (1, 2), (0, 2)]);
        assert!(validate_alpha(&tri, 0.0).is_ok());
        assert!(validate_alpha(&tri, -0.1).is_err());
        assert!(validate_alpha(&tri, f64::NAN).is_err());
        let w = katz_matrix(&tri, 0.0).unwrap();
        assert!(w.w.iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn two_node_closed_form() {
        let k = katz_matrix(&adjacency(2, &[(0, 1)]), 0.5).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1. / 3., 2. / 3., 2. / 3., 1. / 3.]);
        assert!((k.w - expected).amax() < 1e-12);
    }

    #[test]
    fn disconnected_cliques_keep_selection_in_labeled_clique() {
        // Clique A = 0..5, clique B = 5..10; labels in A.
        let mut edges = Vec::new();
        for base in [0, 5] {
            for i in base..base + 5 {
                for j in i + 1..base + 5 {
                    edges.push((i, j));
                }
            }
        }
        let k = katz_matrix(&adjacency(10, &edges), 0.1).unwrap();
        for i in 0..5 {
            for j in 5..10 {
                assert_eq!(k.w[(i, j)], 0.0);
            }
        }
        let sel = propagate_step1(&k, &[0, 1], 0.25, 0.25).unwrap();
        assert_eq!(sel.ip_katz.len(), 2);
        assert!(sel.ip_katz.iter().all(|&u| u < 5));
        assert!(sel.in_katz.iter().all(|&u| u >= 5));
    }

    #[test]
    fn empty_ip_selection_ranks_against_labeled_only() {
        let k = katz_matrix(&adjacency(4, &[(0, 1), (1, 2), (2, 3)]), 0.2).unwrap();
        let sel = propagate_step1(&k, &[0], 0.0, 0.5).unwrap();
        assert!(sel.ip_katz.is_empty());
        // Far end of the path is least similar to node 0.
        assert_eq!(sel.in_katz, vec![2, 3]);
    }

    #[test]
    fn equal_scores_select_lowest_index_prefix() {
        let k = KatzMatrix {
            w: DMatrix::zeros(6, 6),
            alpha: 0.0,
        };
        let sel = propagate_step1(&k, &[2], 0.4, 0.4).unwrap();
        assert_eq!(sel.ip_katz, vec![0, 1]);
        assert_eq!(sel.in_katz, vec![3, 4]);
    }

    #[test]
    fn infeasible_ratios_and_bad_inputs() {
        let k = KatzMatrix {
            w: DMatrix::zeros(5, 5),
            alpha: 0.0,
        };
        assert!(propagate_step1(&k, &[0], 0.6, 0.6).is_err());
        assert!(propagate_step1(&k, &[], 0.1, 0.1).is_err());
        assert!(propagate_step1(&k, &[0], 1.5, 0.0).is_err());
        assert!(propagate_step1(&k, &[0], 1.0, 0.0).is_ok());
    }
}
