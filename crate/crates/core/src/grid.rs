//! DC transmission graph: topology validation, connectivity and the conductance-weighted Laplacian.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::{tolerance, Scalar};

/// One HVDC line between two converter terminals (0-based indices).
#[derive(Debug, Clone, PartialEq)]
pub struct Line<T> {
    pub from: usize,
    pub to: usize,
    /// Series resistance in p.u.
    pub resistance: T,
    /// Series reactance in p.u. Carried as metadata only; the DC model is purely resistive.
    pub reactance: Option<T>,
}

impl<T: Scalar> Line<T> {
    pub fn new(from: usize, to: usize, resistance: T) -> Self {
        Line {
            from,
            to,
            resistance,
            reactance: None,
        }
    }

    pub fn conductance(&self) -> T {
        T::one() / self.resistance
    }
}

/// Validated line graph of the MTDC grid.
///
/// Connectivity is not required here so that [`connectivity_check`] can report on
/// disconnected layouts; [`build_laplacian`] rejects them.
#[derive(Debug, Clone, PartialEq)]
pub struct GridTopology<T> {
    n_nodes: usize,
    lines: Vec<Line<T>>,
}

impl<T: Scalar> GridTopology<T> {
    pub fn new(n_nodes: usize, lines: Vec<Line<T>>) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::EmptyGrid);
        }
        let mut seen = HashSet::new();
        for (k, line) in lines.iter().enumerate() {
            for node in [line.from, line.to] {
                if node >= n_nodes {
                    return Err(Error::NodeOutOfRange {
                        line: k + 1,
                        node,
                        n_nodes,
                    });
                }
            }
            if line.from == line.to {
                return Err(Error::SelfLoop {
                    line: k + 1,
                    node: line.from,
                });
            }
            if !(line.resistance > T::zero()) || !line.resistance.is_finite() {
                return Err(Error::NonPositiveResistance {
                    line: k + 1,
                    from: line.from,
                    to: line.to,
                    value: line.resistance.to_f64_lossy(),
                });
            }
            let key = (line.from.min(line.to), line.from.max(line.to));
            if !seen.insert(key) {
                return Err(Error::DuplicateLine {
                    line: k + 1,
                    from: line.from,
                    to: line.to,
                });
            }
        }
        Ok(GridTopology { n_nodes, lines })
    }

    /// Convenience constructor from `(from, to, resistance)` triples.
    pub fn from_triples(n_nodes: usize, triples: &[(usize, usize, T)]) -> Result<Self> {
        Self::new(
            n_nodes,
            triples.iter().map(|&(i, j, r)| Line::new(i, j, r)).collect(),
        )
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn lines(&self) -> &[Line<T>] {
        &self.lines
    }

    /// Neighbour set of `node`.
    pub fn neighbors(&self, node: usize) -> Vec<usize> {
        self.lines
            .iter()
            .filter_map(|l| {
                if l.from == node {
                    Some(l.to)
                } else if l.to == node {
                    Some(l.from)
                } else {
                    None
                }
            })
            .collect()
    }
}

/// Connected-component labelling of a topology.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Connectivity {
    pub connected: bool,
    /// Component id per node; ids are assigned in order of first appearance.
    pub labels: Vec<usize>,
}

impl Connectivity {
    /// Nodes grouped by component, each group ascending.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let count = self.labels.iter().max().map_or(0, |m| m + 1);
        let mut groups = vec![Vec::new(); count];
        for (node, &label) in self.labels.iter().enumerate() {
            groups[label].push(node);
        }
        groups
    }
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Labels every node with its component. Total: lines with out-of-range ends are ignored.
pub fn connectivity_check<T: Scalar>(topology: &GridTopology<T>) -> Connectivity {
    let n = topology.n_nodes();
    let mut set = DisjointSet::new(n);
    for line in topology.lines() {
        if line.from < n && line.to < n {
            set.union(line.from, line.to);
        }
    }
    let mut root_label = vec![usize::MAX; n];
    let mut next = 0;
    let labels: Vec<usize> = (0..n)
        .map(|node| {
            let root = set.find(node);
            if root_label[root] == usize::MAX {
                root_label[root] = next;
                next += 1;
            }
            root_label[root]
        })
        .collect();
    Connectivity {
        connected: next <= 1,
        labels,
    }
}

/// Weighted Laplacian `B diag(1/R) Bᵀ` of a connected grid with its sorted spectrum.
#[derive(Debug, Clone)]
pub struct LaplacianBundle<T: Scalar> {
    laplacian: DMatrix<T>,
    incidence: DMatrix<T>,
    weights: DVector<T>,
    eigenvalues: DVector<T>,
    eigenvectors: DMatrix<T>,
}

impl<T: Scalar> LaplacianBundle<T> {
    pub fn n(&self) -> usize {
        self.laplacian.nrows()
    }

    pub fn laplacian(&self) -> &DMatrix<T> {
        &self.laplacian
    }

    /// Node-by-line incidence matrix: `+1` at `from`, `-1` at `to`.
    pub fn incidence(&self) -> &DMatrix<T> {
        &self.incidence
    }

    /// Line conductances `1/R`, in line order.
    pub fn weights(&self) -> &DVector<T> {
        &self.weights
    }

    /// Eigenvalues in nondecreasing order.
    pub fn eigenvalues(&self) -> &DVector<T> {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors, column `k` paired with `eigenvalues()[k]`.
    pub fn eigenvectors(&self) -> &DMatrix<T> {
        &self.eigenvectors
    }

    /// Algebraic connectivity (second-smallest eigenvalue); zero for a single node.
    pub fn fiedler_value(&self) -> T {
        if self.n() < 2 {
            T::zero()
        } else {
            self.eigenvalues[1]
        }
    }

    /// `Σ_{i≥2} 1/λ_i`, treating eigenvalues below `1e-9` as the single zero mode.
    pub fn inverse_nonzero_eigenvalue_sum(&self) -> T {
        let zero_cut = T::lit(1e-9);
        self.eigenvalues
            .iter()
            .skip(1)
            .filter(|&&l| l > zero_cut)
            .fold(T::zero(), |acc, &l| acc + T::one() / l)
    }
}

/// Residual bound `‖Lv − λv‖_∞` accepted for each eigenpair, relative to the matrix scale.
fn eigen_residual_tolerance<T: Scalar>(laplacian: &DMatrix<T>) -> T {
    let scale = laplacian.amax().max(T::one());
    tolerance::<T>(1e-9) * scale
}

/// Assembles the conductance-weighted Laplacian and its eigen-decomposition.
pub fn build_laplacian<T: Scalar>(topology: &GridTopology<T>) -> Result<LaplacianBundle<T>> {
    let conn = connectivity_check(topology);
    if !conn.connected {
        return Err(Error::Disconnected {
            components: conn.components(),
        });
    }

    let n = topology.n_nodes();
    let m = topology.lines().len();
    let mut incidence = DMatrix::zeros(n, m);
    let mut weights = DVector::zeros(m);
    let mut laplacian = DMatrix::zeros(n, n);
    for (k, line) in topology.lines().iter().enumerate() {
        let g = line.conductance();
        incidence[(line.from, k)] = T::one();
        incidence[(line.to, k)] = -T::one();
        weights[k] = g;
        laplacian[(line.from, line.from)] += g;
        laplacian[(line.to, line.to)] += g;
        laplacian[(line.from, line.to)] -= g;
        laplacian[(line.to, line.from)] -= g;
    }

    let (eigenvalues, eigenvectors) = sorted_symmetric_eigen(&laplacian)?;
    let tol = eigen_residual_tolerance(&laplacian);
    for k in 0..n {
        let v = eigenvectors.column(k).into_owned();
        let lv: DVector<T> = &laplacian * &v;
        let residual = (lv - &v * eigenvalues[k]).amax();
        if residual > tol {
            return Err(Error::Numerical(format!(
                "Laplacian eigenpair {k} has residual {residual:e} above {tol:e}"
            )));
        }
    }

    Ok(LaplacianBundle {
        laplacian,
        incidence,
        weights,
        eigenvalues,
        eigenvectors,
    })
}

/// Symmetric eigen-decomposition with eigenpairs sorted by ascending eigenvalue.
pub(crate) fn sorted_symmetric_eigen<T: Scalar>(matrix: &DMatrix<T>) -> Result<(DVector<T>, DMatrix<T>)> {
    let n = matrix.nrows();
    if n == 0 {
        return Ok((DVector::zeros(0), DMatrix::zeros(0, 0)));
    }
    let eig = SymmetricEigen::try_new(matrix.clone(), T::epsilon(), 0)
        .ok_or_else(|| Error::Numerical("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}
