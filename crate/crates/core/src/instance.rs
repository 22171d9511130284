//! Combinatorial instances and their JSON documents.

use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Undirected weighted graph stored as a dense symmetric weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    weights: DMatrix<f64>,
}

impl Graph {
    pub fn empty(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInstance("graph needs at least one node".into()));
        }
        Ok(Self {
            n,
            weights: DMatrix::zeros(n, n),
        })
    }

    /// Build from `(i, j, w)` triples; repeated edges accumulate.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut g = Self::empty(n)?;
        for &(i, j, w) in edges {
            g.add_edge(i, j, w)?;
        }
        Ok(g)
    }

    pub fn from_weights(weights: DMatrix<f64>) -> Result<Self> {
        let n = weights.nrows();
        if n == 0 || weights.ncols() != n {
            return Err(Error::InvalidInstance("weight matrix must be square and nonempty".into()));
        }
        for i in 0..n {
            if weights[(i, i)] != 0.0 {
                return Err(Error::InvalidInstance(format!("nonzero diagonal at node {i}")));
            }
            for j in 0..n {
                if !weights[(i, j)].is_finite() || weights[(i, j)] != weights[(j, i)] {
                    return Err(Error::InvalidInstance(format!(
                        "weights must be finite and symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self { n, weights })
    }

    pub fn add_edge(&mut self, i: usize, j: usize, w: f64) -> Result<()> {
        if i >= self.n || j >= self.n {
            return Err(Error::InvalidInstance(format!("edge ({i},{j}) out of range for n={}", self.n)));
        }
        if i == j {
            return Err(Error::InvalidInstance(format!("self loop at node {i}")));
        }
        if !w.is_finite() {
            return Err(Error::InvalidInstance("edge weight must be finite".into()));
        }
        self.weights[(i, j)] += w;
        self.weights[(j, i)] += w;
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    /// Edges with `i < j` and nonzero weight.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                let w = self.weights[(i, j)];
                if w != 0.0 {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    pub fn total_weight(&self) -> f64 {
        self.edges().iter().map(|e| e.2).sum()
    }

    pub fn degrees(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.weights.row(i).sum()).collect()
    }

    /// `L = D - A`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = -self.weights.clone();
        for (i, d) in self.degrees().into_iter().enumerate() {
            l[(i, i)] = d;
        }
        l
    }

    /// Weight of the cut induced by a sign vector.
    pub fn cut_value(&self, s: &[i8]) -> f64 {
        self.edges()
            .iter()
            .filter(|(i, j, _)| s[*i] != s[*j])
            .map(|e| e.2)
            .sum()
    }

    /// Maximum cut by exhaustive search over sign vectors with `s_0 = +1`.
    pub fn max_cut_brute_force(&self) -> f64 {
        let n = self.n;
        let edges = self.edges();
        let mut best = 0.0f64;
        for mask in 0u64..(1u64 << (n - 1)) {
            let side = |v: usize| v > 0 && (mask >> (v - 1)) & 1 == 1;
            let cut: f64 = edges
                .iter()
                .filter(|(i, j, _)| side(*i) != side(*j))
                .map(|e| e.2)
                .sum();
            best = best.max(cut);
        }
        best
    }
}

/// One predicate of a constraint satisfaction instance.
///
/// Bit `j` of a truth-table index is set when `vars[j]` is true (sign `+1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub vars: Vec<usize>,
    pub table: Vec<u8>,
}

impl Predicate {
    pub fn new(vars: Vec<usize>, table: Vec<u8>) -> Self {
        Self { vars, table }
    }

    /// Whether the predicate holds under the sign assignment `s`.
    pub fn satisfied(&self, s: &[i8]) -> bool {
        let mut idx = 0usize;
        for (j, &v) in self.vars.iter().enumerate() {
            if s[v] > 0 {
                idx |= 1 << j;
            }
        }
        self.table[idx] != 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CspInstance {
    pub n: usize,
    pub k: usize,
    pub predicates: Vec<Predicate>,
}

impl CspInstance {
    pub fn new(n: usize, k: usize, predicates: Vec<Predicate>) -> Result<Self> {
        let csp = Self { n, k, predicates };
        csp.validate()?;
        Ok(csp)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidInstance("CSP needs at least one variable".into()));
        }
        for (idx, p) in self.predicates.iter().enumerate() {
            if p.vars.len() > self.k {
                return Err(Error::InvalidInstance(format!(
                    "predicate {idx} has arity {} > k = {}",
                    p.vars.len(),
                    self.k
                )));
            }
            if p.table.len() != 1 << p.vars.len() {
                return Err(Error::InvalidInstance(format!(
                    "predicate {idx} truth table has length {}, expected {}",
                    p.table.len(),
                    1 << p.vars.len()
                )));
            }
            if p.table.iter().any(|&t| t > 1) {
                return Err(Error::InvalidInstance(format!("predicate {idx} table must be 0/1")));
            }
            let mut seen = p.vars.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != p.vars.len() || seen.iter().any(|&v| v >= self.n) {
                return Err(Error::InvalidInstance(format!(
                    "predicate {idx} variables must be distinct and < {}",
                    self.n
                )));
            }
        }
        Ok(())
    }

    pub fn satisfied_count(&self, s: &[i8]) -> usize {
        self.predicates.iter().filter(|p| p.satisfied(s)).count()
    }

    /// The 2-CSP whose satisfied predicates are exactly the cut edges of `g`.
    pub fn cut_constraints(g: &Graph) -> Result<Self> {
        let predicates = g
            .edges()
            .into_iter()
            .map(|(i, j, _)| Predicate::new(vec![i, j], vec![0, 1, 1, 0]))
            .collect();
        Self::new(g.n(), 2, predicates)
    }
}

/// Square cost (or weight) matrix for matching and tour problems.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentProblem {
    pub n: usize,
    pub costs: DMatrix<f64>,
}

impl AssignmentProblem {
    pub fn new(costs: DMatrix<f64>) -> Result<Self> {
        let n = costs.nrows();
        if n == 0 || costs.ncols() != n {
            return Err(Error::InvalidInstance("cost matrix must be square and nonempty".into()));
        }
        if costs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInstance("cost matrix entries must be finite".into()));
        }
        Ok(Self { n, costs })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInstance("cost matrix must be square".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(DMatrix::from_row_slice(n, n, &flat))
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.costs[(i, j)]).collect())
            .collect()
    }

    /// Total weight `Σ_i W(i, π(i))` of an assignment.
    pub fn assignment_weight(&self, perm: &[usize]) -> f64 {
        perm.iter().enumerate().map(|(i, &j)| self.costs[(i, j)]).sum()
    }

    /// Length of the tour encoded by a successor map.
    pub fn tour_length(&self, successor: &[usize]) -> f64 {
        self.assignment_weight(successor)
    }
}

/// JSON document holding any supported instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Instance {
    Graph {
        n: usize,
        edges: Vec<(usize, usize, f64)>,
    },
    Csp {
        n: usize,
        k: usize,
        predicates: Vec<Predicate>,
    },
    Assignment {
        n: usize,
        costs: Vec<Vec<f64>>,
    },
}

impl Instance {
    pub fn from_graph(g: &Graph) -> Self {
        Instance::Graph {
            n: g.n(),
            edges: g.edges(),
        }
    }

    pub fn from_csp(c: &CspInstance) -> Self {
        Instance::Csp {
            n: c.n,
            k: c.k,
            predicates: c.predicates.clone(),
        }
    }

    pub fn from_assignment(a: &AssignmentProblem) -> Self {
        Instance::Assignment {
            n: a.n,
            costs: a.rows(),
        }
    }

    pub fn to_graph(&self) -> Result<Graph> {
        match self {
            Instance::Graph { n, edges } => Graph::from_edges(*n, edges),
            _ => Err(Error::InvalidInstance("document is not a graph".into())),
        }
    }

    pub fn to_csp(&self) -> Result<CspInstance> {
        match self {
            Instance::Csp { n, k, predicates } => CspInstance::new(*n, *k, predicates.clone()),
            _ => Err(Error::InvalidInstance("document is not a CSP".into())),
        }
    }

    pub fn to_assignment(&self) -> Result<AssignmentProblem> {
        match self {
            Instance::Assignment { n, costs } => {
                let a = AssignmentProblem::from_rows(costs)?;
                if a.n != *n {
                    return Err(Error::InvalidInstance(format!(
                        "declared n={n} but cost matrix is {}x{}",
                        a.n, a.n
                    )));
                }
                Ok(a)
            }
            _ => Err(Error::InvalidInstance("document is not an assignment problem".into())),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// `G(n, p)` with unit weights; identical output for identical seeds.
pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidInstance(format!("edge probability {p} outside [0,1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Graph::empty(n)?;
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen::<f64>() < p {
                g.add_edge(i, j, 1.0)?;
            }
        }
    }
    Ok(g)
}
