//! Block-sparse matrices over skeleton entities with variable block sizes.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::sync::Arc;

/// Maps entities (fine edges, or lumped edges on the coarse level) to unknown
/// block indices and flat dof offsets. Entities without unknowns (Dirichlet /
/// inflow edges) map to `None`.
#[derive(Debug, Clone)]
pub struct DofLayout {
    pub unknown_of_entity: Vec<Option<usize>>,
    pub entity_of_unknown: Vec<usize>,
    /// Flat offsets, `offsets[u]..offsets[u+1]` are the dofs of unknown `u`.
    pub offsets: Vec<usize>,
}

impl DofLayout {
    /// Build from per-entity dof counts; `None` marks eliminated entities.
    pub fn new(entity_sizes: &[Option<usize>]) -> Self {
        let mut unknown_of_entity = vec![None; entity_sizes.len()];
        let mut entity_of_unknown = Vec::new();
        let mut offsets = vec![0usize];
        for (e, s) in entity_sizes.iter().enumerate() {
            if let Some(s) = s {
                unknown_of_entity[e] = Some(entity_of_unknown.len());
                entity_of_unknown.push(e);
                offsets.push(offsets.last().unwrap() + s);
            }
        }
        Self { unknown_of_entity, entity_of_unknown, offsets }
    }

    pub fn n_unknowns(&self) -> usize {
        self.entity_of_unknown.len()
    }

    pub fn total_dofs(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn offset(&self, u: usize) -> usize {
        self.offsets[u]
    }

    pub fn size(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }
}

/// Sparse matrix of dense blocks; row/column blocks follow a `DofLayout`.
#[derive(Debug, Clone)]
pub struct BlockMatrix {
    pub layout: Arc<DofLayout>,
    /// `rows[r]` holds `(col, block)` sorted by `col`.
    pub rows: Vec<Vec<(usize, DMatrix<f64>)>>,
}

impl BlockMatrix {
    pub fn new(layout: Arc<DofLayout>) -> Self {
        let n = layout.n_unknowns();
        Self { layout, rows: vec![Vec::new(); n] }
    }

    pub fn dim(&self) -> usize {
        self.layout.total_dofs()
    }

    /// Accumulate into block `(r, c)`.
    pub fn add_block(&mut self, r: usize, c: usize, block: &DMatrix<f64>) {
        debug_assert_eq!(block.nrows(), self.layout.size(r));
        debug_assert_eq!(block.ncols(), self.layout.size(c));
        let row = &mut self.rows[r];
        match row.binary_search_by_key(&c, |(col, _)| *col) {
            Ok(i) => row[i].1 += block,
            Err(i) => row.insert(i, (c, block.clone())),
        }
    }

    pub fn block(&self, r: usize, c: usize) -> Option<&DMatrix<f64>> {
        let row = &self.rows[r];
        row.binary_search_by_key(&c, |(col, _)| *col)
            .ok()
            .map(|i| &row[i].1)
    }

    /// Number of stored scalar entries.
    pub fn nnz(&self) -> usize {
        self.rows
            .iter()
            .flatten()
            .map(|(_, b)| b.nrows() * b.ncols())
            .sum()
    }

    pub fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.dim());
        let layout = &self.layout;
        let chunks: Vec<Vec<f64>> = (0..self.rows.len())
            .into_par_iter()
            .map(|r| {
                let mut acc = DVector::zeros(layout.size(r));
                for (c, b) in &self.rows[r] {
                    let xs = x.rows(layout.offset(*c), layout.size(*c));
                    acc.gemv(1.0, b, &xs, 1.0);
                }
                acc.data.into()
            })
            .collect();
        let mut y = DVector::zeros(self.dim());
        for (r, chunk) in chunks.into_iter().enumerate() {
            y.rows_mut(layout.offset(r), layout.size(r))
                .copy_from_slice(&chunk);
        }
        y
    }

    /// Dense copy, for small systems and tests.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (r, row) in self.rows.iter().enumerate() {
            let (ro, rs) = (self.layout.offset(r), self.layout.size(r));
            for (c, b) in row {
                let (co, cs) = (self.layout.offset(*c), self.layout.size(*c));
                m.view_mut((ro, co), (rs, cs)).copy_from(b);
            }
        }
        m
    }

    /// Max relative asymmetry, `|A - A^T| / |A|` over stored blocks.
    pub fn asymmetry(&self) -> f64 {
        let mut num: f64 = 0.0;
        let mut den: f64 = 0.0;
        for (r, row) in self.rows.iter().enumerate() {
            for (c, b) in row {
                den = den.max(b.amax());
                if let Some(bt) = self.block(*c, r) {
                    num = num.max((b - bt.transpose()).amax());
                } else {
                    num = num.max(b.amax());
                }
            }
        }
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }
}
