//! Communication graphs and Metropolis–Hastings mixing matrices.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result, Vector};

const ER_RETRIES: usize = 100;

/// Family of communication graphs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TopologyKind {
    Ring,
    Complete,
    /// Non-periodic 2-D lattice with the most square factorisation of `n`.
    Grid,
    ErdosRenyi { p: f64 },
}

impl TopologyKind {
    pub fn name(&self) -> &'static str {
        match self {
            TopologyKind::Ring => "ring",
            TopologyKind::Complete => "complete",
            TopologyKind::Grid => "grid",
            TopologyKind::ErdosRenyi { .. } => "erdos_renyi",
        }
    }

    /// Parses a kind name; `p` is only consulted for `erdos_renyi`.
    pub fn parse(name: &str, p: Option<f64>) -> Result<Self> {
        match name {
            "ring" => Ok(TopologyKind::Ring),
            "complete" => Ok(TopologyKind::Complete),
            "grid" => Ok(TopologyKind::Grid),
            "erdos_renyi" | "erdos-renyi" | "er" => {
                let p = p.ok_or_else(|| Error::invalid("erdos_renyi needs an edge probability p"))?;
                Ok(TopologyKind::ErdosRenyi { p })
            }
            other => Err(Error::invalid(format!("unknown topology kind `{other}`"))),
        }
    }
}

impl FromStr for TopologyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TopologyKind::parse(s, None)
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologyKind::ErdosRenyi { p } => write!(f, "erdos_renyi(p={p})"),
            other => f.write_str(other.name()),
        }
    }
}

/// Connected undirected simple graph on nodes `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    /// Builds a graph from an edge list. Pairs are normalised to `(min, max)`;
    /// self-loops, out-of-range endpoints, duplicates and disconnected inputs
    /// are rejected.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("graph needs at least one node"));
        }
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i == j {
                return Err(Error::invalid(format!("self-loop at node {i}")));
            }
            if i >= n || j >= n {
                return Err(Error::invalid(format!("edge ({i}, {j}) out of range for n = {n}")));
            }
            if !set.insert((i.min(j), i.max(j))) {
                return Err(Error::invalid(format!("duplicate edge ({i}, {j})")));
            }
        }
        let g = Graph { n, edges: set };
        if !g.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    /// Sorted neighbour lists.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        adj
    }

    fn bfs_depths(adj: &[Vec<usize>], src: usize) -> Vec<Option<usize>> {
        let mut depth = vec![None; adj.len()];
        depth[src] = Some(0);
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            let du = depth[u].unwrap_or(0);
            for &w in &adj[u] {
                if depth[w].is_none() {
                    depth[w] = Some(du + 1);
                    queue.push_back(w);
                }
            }
        }
        depth
    }

    fn is_connected(&self) -> bool {
        let adj = self.adjacency();
        Self::bfs_depths(&adj, 0).iter().all(Option::is_some)
    }

    /// Longest shortest-path length; the number of exchanges needed to
    /// aggregate a value from every node at every node.
    pub fn diameter(&self) -> usize {
        let adj = self.adjacency();
        (0..self.n)
            .map(|s| Self::bfs_depths(&adj, s).into_iter().flatten().max().unwrap_or(0))
            .max()
            .unwrap_or(0)
    }
}

/// Builds a connected graph of the requested family. The seed is only used
/// by `erdos_renyi`, which resamples until it draws a connected graph.
pub fn build_graph(kind: TopologyKind, n: usize, seed: u64) -> Result<Graph> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    match kind {
        TopologyKind::Ring => {
            let edges: Vec<_> = match n {
                1 => vec![],
                2 => vec![(0, 1)],
                _ => (0..n).map(|i| (i, (i + 1) % n)).collect(),
            };
            Graph::new(n, edges)
        }
        TopologyKind::Complete => {
            Graph::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
        }
        TopologyKind::Grid => {
            let rows = (1..=n).take_while(|r| r * r <= n).filter(|r| n.is_multiple_of(*r)).last().unwrap_or(1);
            let cols = n / rows;
            let mut edges = Vec::new();
            for r in 0..rows {
                for c in 0..cols {
                    let i = r * cols + c;
                    if c + 1 < cols {
                        edges.push((i, i + 1));
                    }
                    if r + 1 < rows {
                        edges.push((i, i + cols));
                    }
                }
            }
            Graph::new(n, edges)
        }
        TopologyKind::ErdosRenyi { p } => {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::invalid(format!("edge probability must lie in (0, 1], got {p}")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..ER_RETRIES {
                let mut edges = Vec::new();
                for i in 0..n {
                    for j in i + 1..n {
                        if rng.random::<f64>() < p {
                            edges.push((i, j));
                        }
                    }
                }
                match Graph::new(n, edges) {
                    Ok(g) => return Ok(g),
                    Err(Error::Disconnected) => continue,
                    Err(e) => return Err(e),
                }
            }
            Err(Error::RetriesExhausted {
                attempts: ER_RETRIES,
                what: format!("connected erdos_renyi graph with n = {n}, p = {p}"),
            })
        }
    }
}

/// Symmetric doubly-stochastic weights supported on a graph, with the
/// consensus contraction factor `rho = ||W - 11ᵀ/n||₂`.
#[derive(Clone, Debug)]
pub struct MixingMatrix {
    w: DMatrix<f64>,
    // Nonzero entries of each row, ascending column index.
    rows: Vec<Vec<(usize, f64)>>,
    rho: f64,
}

impl MixingMatrix {
    /// Wraps an arbitrary symmetric doubly-stochastic matrix.
    pub fn from_dense(w: DMatrix<f64>) -> Result<Self> {
        let n = w.nrows();
        if n == 0 || w.ncols() != n {
            return Err(Error::invalid("mixing matrix must be square and nonempty"));
        }
        for i in 0..n {
            for j in 0..n {
                if w[(i, j)] != w[(j, i)] {
                    return Err(Error::invalid(format!("W is not symmetric at ({i}, {j})")));
                }
            }
            let s: f64 = w.column(i).iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(format!("column {i} of W sums to {s}")));
            }
        }
        let rows = (0..n)
            .map(|i| (0..n).filter(|&j| w[(i, j)] != 0.0).map(|j| (j, w[(i, j)])).collect())
            .collect();
        let rho = consensus_rate(&w);
        if rho >= 1.0 {
            return Err(Error::invalid(format!("W does not contract disagreement (rho = {rho})")));
        }
        Ok(MixingMatrix { w, rows, rho })
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.w[(i, j)]
    }

    pub fn dense(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// Nonzero `(j, W_ij)` pairs of row `i`, ascending in `j`.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// `out_i = Σ_j W_ij values_j`, summed in ascending `j`.
    pub fn apply(&self, values: &[Vector]) -> Vec<Vector> {
        let d = values.first().map_or(0, |v| v.len());
        self.rows
            .iter()
            .map(|row| {
                let mut acc = Vector::zeros(d);
                for &(j, wij) in row {
                    acc.axpy(wij, &values[j], 1.0);
                }
                acc
            })
            .collect()
    }
}

/// Largest |eigenvalue| of the symmetric matrix `W - 11ᵀ/n`.
fn consensus_rate(w: &DMatrix<f64>) -> f64 {
    let n = w.nrows();
    let centred = w - DMatrix::from_element(n, n, 1.0 / n as f64);
    let eig = SymmetricEigen::new(centred);
    eig.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()))
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `1 - Σ_k 1/den_k`, exactly as a rational when the common denominator
/// fits in `u128`, otherwise by ascending floating-point subtraction.
fn remainder_weight(dens: &[u128]) -> f64 {
    let mut num: u128 = 1;
    let mut den: u128 = 1;
    for &k in dens {
        let g = gcd(den, k);
        let Some(lcm) = (den / g).checked_mul(k) else {
            return dens.iter().fold(1.0, |acc, &k| acc - 1.0 / k as f64);
        };
        num = num * (lcm / den) - lcm / k;
        den = lcm;
        let g = gcd(num, den).max(1);
        num /= g;
        den /= g;
    }
    num as f64 / den as f64
}

/// Metropolis–Hastings weights: `W_ij = 1 / (1 + max(deg_i, deg_j))` on
/// edges and the remainder on the diagonal.
pub fn metropolis_weights(g: &Graph) -> MixingMatrix {
    let n = g.n();
    let deg = g.degrees();
    let adj = g.adjacency();
    let mut w = DMatrix::zeros(n, n);
    for (i, j) in g.edges() {
        let wij = 1.0 / (1 + deg[i].max(deg[j])) as f64;
        w[(i, j)] = wij;
        w[(j, i)] = wij;
    }
    for i in 0..n {
        let dens: Vec<u128> = adj[i].iter().map(|&j| (1 + deg[i].max(deg[j])) as u128).collect();
        w[(i, i)] = remainder_weight(&dens);
    }
    let rows = (0..n)
        .map(|i| (0..n).filter(|&j| w[(i, j)] != 0.0).map(|j| (j, w[(i, j)])).collect())
        .collect();
    let rho = consensus_rate(&w);
    MixingMatrix { w, rows, rho }
}

/// Both sides of the contraction inequality
/// `Σ_i ||Σ_j W_ij x_j - x̄||² ≤ ρ² Σ_i ||x_i - x̄||²`.
pub fn spectral_gap_check(w: &MixingMatrix, vectors: &[Vector]) -> Result<(f64, f64)> {
    if vectors.len() != w.n() {
        return Err(Error::DimensionMismatch { expected: w.n(), found: vectors.len() });
    }
    let d = vectors[0].len();
    if let Some(bad) = vectors.iter().find(|v| v.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, found: bad.len() });
    }
    let mean = crate::mean_of(vectors);
    let mixed = w.apply(vectors);
    let lhs: f64 = mixed.iter().map(|m| (m - &mean).norm_squared()).sum();
    let spread: f64 = vectors.iter().map(|v| (v - &mean).norm_squared()).sum();
    Ok((lhs, w.rho() * w.rho() * spread))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edges(g: &Graph) -> Vec<(usize, usize)> {
        g.edges().collect()
    }

    #[test]
    fn ring_of_four() {
        let g = build_graph(TopologyKind::Ring, 4, 0).unwrap();
        assert_eq!(edges(&g), vec![(0, 1), (0, 3), (1, 2), (2, 3)]);
    }

    #[test]
    fn complete_on_three() {
        let g = build_graph(TopologyKind::Complete, 3, 0).unwrap();
        assert_eq!(edges(&g), vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn ring_of_twenty_five_is_two_regular() {
        let g = build_graph(TopologyKind::Ring, 25, 0).unwrap();
        assert_eq!(g.edge_count(), 25);
        assert!(g.degrees().iter().all(|&d| d == 2));
        assert_eq!(g.diameter(), 12);
    }

    #[test]
    fn grid_is_connected_lattice() {
        let g = build_graph(TopologyKind::Grid, 12, 0).unwrap();
        // 3 x 4 lattice
        assert_eq!(g.edge_count(), 3 * 3 + 2 * 4);
        assert_eq!(g.diameter(), 5);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(build_graph(TopologyKind::Ring, 0, 0).is_err());
        assert!(build_graph(TopologyKind::ErdosRenyi { p: 0.0 }, 5, 0).is_err());
        assert!(build_graph(TopologyKind::ErdosRenyi { p: 1.5 }, 5, 0).is_err());
        assert!(matches!(Graph::new(3, [(0, 1)]), Err(Error::Disconnected)));
        assert!(Graph::new(3, [(0, 0)]).is_err());
        assert!(Graph::new(3, [(0, 1), (1, 0), (1, 2)]).is_err());
    }

    #[test]
    fn sparse_erdos_renyi_exhausts_retries() {
        let err = build_graph(TopologyKind::ErdosRenyi { p: 1e-6 }, 30, 3).unwrap_err();
        assert!(matches!(err, Error::RetriesExhausted { attempts: 100, .. }));
    }

    #[test]
    fn erdos_renyi_is_seeded() {
        let kind = TopologyKind::ErdosRenyi { p: 0.4 };
        let a = build_graph(kind, 15, 11).unwrap();
        let b = build_graph(kind, 15, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ring_four_weights_and_rho() {
        let w = metropolis_weights(&build_graph(TopologyKind::Ring, 4, 0).unwrap());
        for i in 0..4 {
            assert_eq!(w.weight(i, i), 1.0 / 3.0);
            assert_eq!(w.weight(i, (i + 1) % 4), 1.0 / 3.0);
            assert_eq!(w.weight(i, (i + 2) % 4), 0.0);
        }
        assert!((w.rho() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn complete_graph_is_uniform_exactly() {
        for n in 1..=30 {
            let w = metropolis_weights(&build_graph(TopologyKind::Complete, n, 0).unwrap());
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(w.weight(i, j), 1.0 / n as f64, "n={n} ({i},{j})");
                }
            }
            assert!(w.rho() < 1e-12);
        }
    }

    #[test]
    fn single_node() {
        let w = metropolis_weights(&build_graph(TopologyKind::Ring, 1, 0).unwrap());
        assert_eq!(w.weight(0, 0), 1.0);
        assert_eq!(w.rho(), 0.0);
    }

    #[test]
    fn ring_rho_matches_circulant_spectrum() {
        // W = (I + S + Sᵀ)/3, eigenvalues (1 + 2cos(2πk/n))/3.
        for n in [5usize, 9, 25] {
            let w = metropolis_weights(&build_graph(TopologyKind::Ring, n, 0).unwrap());
            let expected = (1..n)
                .map(|k| ((1.0 + 2.0 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos()) / 3.0).abs())
                .fold(0.0, f64::max);
            assert!((w.rho() - expected).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn gap_check_edge_cases() {
        let w = metropolis_weights(&build_graph(TopologyKind::Ring, 4, 0).unwrap());
        let same = vec![Vector::from_vec(vec![1.0, -2.0]); 4];
        let (lhs, rhs) = spectral_gap_check(&w, &same).unwrap();
        assert_eq!((lhs, rhs), (0.0, 0.0));

        let basis: Vec<Vector> = (0..4)
            .map(|i| {
                let mut v = Vector::zeros(4);
                v[i] = i as f64;
                v
            })
            .collect();
        let (lhs, rhs) = spectral_gap_check(&w, &basis).unwrap();
        assert!(lhs <= rhs * (1.0 + 1e-12));
        let spread: f64 = {
            let mean = crate::mean_of(&basis);
            basis.iter().map(|v| (v - &mean).norm_squared()).sum()
        };
        assert!(lhs / spread <= 1.0 / 9.0 + 1e-15);

        let complete = metropolis_weights(&build_graph(TopologyKind::Complete, 4, 0).unwrap());
        let (lhs, _) = spectral_gap_check(&complete, &basis).unwrap();
        assert!(lhs < 1e-28);

        assert!(spectral_gap_check(&w, &basis[..3]).is_err());
        let mut ragged = basis.clone();
        ragged[2] = Vector::zeros(3);
        assert!(spectral_gap_check(&w, &ragged).is_err());
    }

    #[test]
    fn from_dense_validates() {
        let ok = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        assert_eq!(MixingMatrix::from_dense(ok).unwrap().rho(), 0.0);
        let asym = DMatrix::from_row_slice(2, 2, &[0.6, 0.4, 0.5, 0.5]);
        assert!(MixingMatrix::from_dense(asym).is_err());
        let identity = DMatrix::<f64>::identity(3, 3);
        assert!(MixingMatrix::from_dense(identity).is_err());
    }

    #[test]
    fn remainder_weight_is_exact_for_small_denominators() {
        assert_eq!(remainder_weight(&[3, 3]), 1.0 / 3.0);
        assert_eq!(remainder_weight(&[4, 4, 4]), 0.25);
        assert_eq!(remainder_weight(&[]), 1.0);
    }
}
