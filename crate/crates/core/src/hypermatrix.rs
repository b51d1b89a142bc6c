//! Sparse incidence and adjacency matrices for hypergraphs.
//!
//! An [`IncidenceMatrix`] stores one sorted vertex set per hyperlink (column).
//! Projecting it with [`project`] gives the weighted vertex adjacency matrix
//! `A = S Sᵀ`, where `A_ij` counts the hyperlinks that contain both `i` and `j`
//! and `A_ii` is the degree of vertex `i`.
//!
//! An [`AdjacencyMatrix`] distinguishes *empty* entries (absent from the
//! sparse map) from stored values. The masking operators keep a matrix only
//! on another matrix's nonempty ([`mask_on`]) or empty ([`mask_off`]) entries.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Binary vertex-by-hyperlink matrix, stored column-wise as sorted vertex sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix {
    num_vertices: usize,
    columns: Vec<Vec<usize>>,
}

impl IncidenceMatrix {
    /// Builds a matrix from vertex lists. Each list is sorted and deduplicated.
    pub fn new(num_vertices: usize, columns: Vec<Vec<usize>>) -> Result<Self> {
        let mut out = Vec::with_capacity(columns.len());
        for (c, mut col) in columns.into_iter().enumerate() {
            if col.is_empty() {
                return Err(Error::EmptyColumn(c));
            }
            col.sort_unstable();
            col.dedup();
            if let Some(&v) = col.last() {
                if v >= num_vertices {
                    return Err(Error::VertexOutOfRange {
                        column: c,
                        vertex: v,
                        num_vertices,
                    });
                }
            }
            out.push(col);
        }
        Ok(Self {
            num_vertices,
            columns: out,
        })
    }

    pub fn empty(num_vertices: usize) -> Self {
        Self {
            num_vertices,
            columns: Vec::new(),
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn columns(&self) -> &[Vec<usize>] {
        &self.columns
    }

    pub fn column(&self, c: usize) -> &[usize] {
        &self.columns[c]
    }

    /// Number of columns containing each vertex.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_vertices];
        for col in &self.columns {
            for &v in col {
                deg[v] += 1;
            }
        }
        deg
    }

    /// New matrix made of the given columns, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            num_vertices: self.num_vertices,
            columns: indices.iter().map(|&c| self.columns[c].clone()).collect(),
        }
    }

    /// Horizontal concatenation `[self other]`.
    pub fn concat(&self, other: &IncidenceMatrix) -> Result<Self> {
        if self.num_vertices != other.num_vertices {
            return Err(Error::DimensionMismatch {
                left: self.num_vertices,
                right: other.num_vertices,
            });
        }
        let mut columns = self.columns.clone();
        columns.extend(other.columns.iter().cloned());
        Ok(Self {
            num_vertices: self.num_vertices,
            columns,
        })
    }

    /// Dense 0/1 representation, rows are vertices.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.columns.len()]; self.num_vertices];
        for (c, col) in self.columns.iter().enumerate() {
            for &v in col {
                dense[v][c] = 1.0;
            }
        }
        dense
    }
}

/// Symmetric weighted vertex-by-vertex matrix with structural emptiness.
///
/// Only the upper triangle (`i <= j`) is stored, so symmetry holds by
/// construction. An entry absent from the map is empty.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdjacencyMatrix {
    dim: usize,
    entries: BTreeMap<(usize, usize), f64>,
}

#[inline]
fn key(i: usize, j: usize) -> (usize, usize) {
    if i <= j {
        (i, j)
    } else {
        (j, i)
    }
}

impl AdjacencyMatrix {
    /// All-empty matrix.
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: BTreeMap::new(),
        }
    }

    /// Builds a matrix from `(i, j, value)` triplets; later triplets overwrite
    /// earlier ones for the same unordered pair.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut m = Self::new(dim);
        for &(i, j, v) in triplets {
            m.insert(i, j, v)?;
        }
        Ok(m)
    }

    /// Stores `value` at `(i, j)` and `(j, i)`.
    pub fn insert(&mut self, i: usize, j: usize, value: f64) -> Result<()> {
        if i >= self.dim || j >= self.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: i.max(j) + 1,
            });
        }
        if !value.is_finite() {
            return Err(Error::NonFinite {
                row: i,
                col: j,
                value,
            });
        }
        self.entries.insert(key(i, j), value);
        Ok(())
    }

    pub(crate) fn insert_unchecked(&mut self, i: usize, j: usize, value: f64) {
        debug_assert!(i < self.dim && j < self.dim && value.is_finite());
        self.entries.insert(key(i, j), value);
    }

    pub(crate) fn add_unchecked(&mut self, i: usize, j: usize, value: f64) {
        *self.entries.entry(key(i, j)).or_insert(0.0) += value;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Stored value, or `None` when the entry is empty.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.entries.get(&key(i, j)).copied()
    }

    /// Stored value, with empty entries read as zero.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.get(i, j).unwrap_or(0.0)
    }

    pub fn is_nonempty(&self, i: usize, j: usize) -> bool {
        self.entries.contains_key(&key(i, j))
    }

    /// Number of stored upper-triangle entries (diagonal included).
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_all_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Stored entries `(i, j, value)` with `i <= j`, in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries.iter().map(|(&(i, j), &v)| (i, j, v))
    }

    /// Stored entries with `i < j`.
    pub fn iter_off_diagonal(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.iter().filter(|&(i, j, _)| i != j)
    }

    /// Entrywise sum; the support of the result is the union of supports.
    pub fn add(&self, other: &AdjacencyMatrix) -> Result<Self> {
        check_dims(self, other)?;
        let mut out = self.clone();
        for (i, j, v) in other.iter() {
            out.add_unchecked(i, j, v);
        }
        Ok(out)
    }

    /// Dense symmetric representation with empty entries as zero.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.dim]; self.dim];
        for (i, j, v) in self.iter() {
            dense[i][j] = v;
            dense[j][i] = v;
        }
        dense
    }
}

fn check_dims(x: &AdjacencyMatrix, a: &AdjacencyMatrix) -> Result<()> {
    if x.dim != a.dim {
        return Err(Error::DimensionMismatch {
            left: x.dim,
            right: a.dim,
        });
    }
    Ok(())
}

/// `A = S Sᵀ`. Zero products are left empty.
pub fn project(s: &IncidenceMatrix) -> AdjacencyMatrix {
    let mut a = AdjacencyMatrix::new(s.num_vertices());
    for col in s.columns() {
        for (p, &i) in col.iter().enumerate() {
            for &j in &col[p..] {
                a.add_unchecked(i, j, 1.0);
            }
        }
    }
    a
}

/// `[X]_A`: keeps `X` only where `A` is nonempty.
pub fn mask_on(x: &AdjacencyMatrix, a: &AdjacencyMatrix) -> Result<AdjacencyMatrix> {
    check_dims(x, a)?;
    Ok(AdjacencyMatrix {
        dim: x.dim,
        entries: x
            .entries
            .iter()
            .filter(|(k, _)| a.entries.contains_key(k))
            .map(|(&k, &v)| (k, v))
            .collect(),
    })
}

/// `[X]_Ā`: keeps `X` only where `A` is empty.
pub fn mask_off(x: &AdjacencyMatrix, a: &AdjacencyMatrix) -> Result<AdjacencyMatrix> {
    check_dims(x, a)?;
    Ok(AdjacencyMatrix {
        dim: x.dim,
        entries: x
            .entries
            .iter()
            .filter(|(k, _)| !a.entries.contains_key(k))
            .map(|(&k, &v)| (k, v))
            .collect(),
    })
}

/// Splits `A + ΔA` into `A⁺ = A + [ΔA]_A` and `ΔA⁻ = [ΔA]_Ā`.
pub fn decompose(
    a: &AdjacencyMatrix,
    delta: &AdjacencyMatrix,
) -> Result<(AdjacencyMatrix, AdjacencyMatrix)> {
    let overlap = mask_on(delta, a)?;
    let novel = mask_off(delta, a)?;
    Ok((a.add(&overlap)?, novel))
}

/// `A + [U diag(λ) Uᵀ]_A` when `restrict_to_a` is set, else `A + U diag(λ) Uᵀ`.
///
/// Columns with `λ_c == 0` are skipped, so a zero vector leaves `A` unchanged.
pub fn add_weighted_outer(
    a: &AdjacencyMatrix,
    u: &IncidenceMatrix,
    lambda: &[f64],
    restrict_to_a: bool,
) -> Result<AdjacencyMatrix> {
    if lambda.len() != u.num_columns() {
        return Err(Error::LengthMismatch {
            expected: u.num_columns(),
            found: lambda.len(),
        });
    }
    if u.num_vertices() != a.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: u.num_vertices(),
        });
    }
    if let Some((c, &l)) = lambda.iter().enumerate().find(|(_, l)| !l.is_finite()) {
        return Err(Error::NonFinite {
            row: c,
            col: c,
            value: l,
        });
    }
    let mut out = a.clone();
    for (col, &l) in u.columns().iter().zip(lambda) {
        if l == 0.0 {
            continue;
        }
        for (p, &i) in col.iter().enumerate() {
            for &j in &col[p..] {
                if !restrict_to_a || a.is_nonempty(i, j) {
                    out.add_unchecked(i, j, l);
                }
            }
        }
    }
    Ok(out)
}
