use crate::error::{Result, SifsError};

/// Compressed sparse storage along one axis: `major` slots, each holding a
/// strictly increasing list of minor indices with nonzero values.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedMatrix {
    major: usize,
    minor: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CompressedMatrix {
    /// Builds from per-slot entry lists. Entries must already be sorted by
    /// minor index with no duplicates; zeros are dropped.
    pub(crate) fn from_slots(minor: usize, slots: Vec<Vec<(usize, f64)>>) -> Self {
        let major = slots.len();
        let nnz = slots.iter().map(Vec::len).sum();
        let mut indptr = Vec::with_capacity(major + 1);
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        indptr.push(0);
        for slot in slots {
            for (j, v) in slot {
                if v != 0.0 {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self { major, minor, indptr, indices, values }
    }

    /// The same nonzeros compressed along the other axis.
    pub(crate) fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.minor + 1];
        for &j in &self.indices {
            counts[j + 1] += 1;
        }
        for k in 0..self.minor {
            counts[k + 1] += counts[k];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0usize; self.indices.len()];
        let mut values = vec![0.0; self.values.len()];
        for i in 0..self.major {
            for k in self.indptr[i]..self.indptr[i + 1] {
                let j = self.indices[k];
                let dst = next[j];
                indices[dst] = i;
                values[dst] = self.values[k];
                next[j] += 1;
            }
        }
        Self { major: self.minor, minor: self.major, indptr, indices, values }
    }

    pub fn major_len(&self) -> usize {
        self.major
    }

    pub fn minor_len(&self) -> usize {
        self.minor
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn slot(&self, i: usize) -> SparseView<'_> {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        SparseView { dim: self.minor, indices: &self.indices[a..b], values: &self.values[a..b] }
    }

    pub fn slot_checked(&self, i: usize) -> Result<SparseView<'_>> {
        if i >= self.major {
            return Err(SifsError::IndexOutOfRange { index: i, len: self.major });
        }
        Ok(self.slot(i))
    }

    pub(crate) fn check_structure(&self) -> bool {
        self.indptr.len() == self.major + 1
            && (0..self.major).all(|i| {
                let v = self.slot(i);
                v.indices.windows(2).all(|w| w[0] < w[1])
                    && v.indices.iter().all(|&j| j < self.minor)
                    && v.values.iter().all(|&x| x != 0.0 && x.is_finite())
            })
    }
}

/// Borrowed sparse vector: one row or column of a [`CompressedMatrix`].
#[derive(Debug, Clone, Copy)]
pub struct SparseView<'a> {
    dim: usize,
    indices: &'a [usize],
    values: &'a [f64],
}

impl<'a> SparseView<'a> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &'a [usize] {
        self.indices
    }

    pub fn values(&self) -> &'a [f64] {
        self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + 'a {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(j, v)| v * dense[j]).sum()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Entries whose index is in the sorted `subset`, by merge-join.
    pub fn restrict<'s>(&self, subset: &'s [usize]) -> Restricted<'a, 's> {
        Restricted { view: *self, subset, a: 0, b: 0 }
    }
}

/// Iterator over a [`SparseView`] restricted to a sorted index subset.
#[derive(Debug, Clone)]
pub struct Restricted<'a, 's> {
    view: SparseView<'a>,
    subset: &'s [usize],
    a: usize,
    b: usize,
}

impl Restricted<'_, '_> {
    pub fn norm_sq(self) -> f64 {
        self.map(|(_, v)| v * v).sum()
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }
}

impl Iterator for Restricted<'_, '_> {
    type Item = (usize, f64);

    fn next(&mut self) -> Option<Self::Item> {
        while self.a < self.view.indices.len() && self.b < self.subset.len() {
            let (i, s) = (self.view.indices[self.a], self.subset[self.b]);
            match i.cmp(&s) {
                std::cmp::Ordering::Less => self.a += 1,
                std::cmp::Ordering::Greater => self.b += 1,
                std::cmp::Ordering::Equal => {
                    let v = self.view.values[self.a];
                    self.a += 1;
                    self.b += 1;
                    return Some((i, v));
                }
            }
        }
        None
    }
}
