//! Exact linear algebra over the two-element field.
//!
//! [`BinMatrix`] and [`BinVector`] are bit-packed, immutable-by-convention
//! values: every operation returns a fresh value, so they can be shared
//! freely across worker threads. Addition is XOR throughout; there is no
//! other field.
//!
//! Row reduction uses a fixed pivoting order (leftmost column, lowest row
//! first) so that all derived bases are reproducible across runs.

use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::ser::{SerializeStruct, Serializer};
use serde::{Deserialize, Serialize};
use std::fmt;

const WORD_BITS: usize = 64;

#[inline]
fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD_BITS)
}

/// A vector over GF(2), bit-packed into `u64` words.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinVector {
    len: usize,
    words: Vec<u64>,
}

impl BinVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; words_for(len)],
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut v = Self::zeros(len);
        for i in 0..len {
            v.set(i, true);
        }
        v
    }

    /// Unit vector with a single 1 at `pos`.
    pub fn unit(len: usize, pos: usize) -> Self {
        let mut v = Self::zeros(len);
        v.set(pos, true);
        v
    }

    pub fn from_support(len: usize, support: &[usize]) -> Self {
        let mut v = Self::zeros(len);
        for &i in support {
            v.set(i, true);
        }
        v
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            v.set(i, b % 2 == 1);
        }
        v
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        debug_assert!(i < self.len);
        let mask = 1u64 << (i % WORD_BITS);
        if value {
            self.words[i / WORD_BITS] |= mask;
        } else {
            self.words[i / WORD_BITS] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i / WORD_BITS] ^= 1u64 << (i % WORD_BITS);
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// In-place XOR with another vector of the same length.
    pub fn xor_assign(&mut self, other: &BinVector) {
        assert_eq!(self.len, other.len, "length mismatch in xor");
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn xor(&self, other: &BinVector) -> BinVector {
        let mut out = self.clone();
        out.xor_assign(other);
        out
    }

    /// GF(2) inner product.
    pub fn dot(&self, other: &BinVector) -> bool {
        assert_eq!(self.len, other.len, "length mismatch in dot");
        let mut acc = 0u64;
        for (a, b) in self.words.iter().zip(&other.words) {
            acc ^= a & b;
        }
        acc.count_ones() % 2 == 1
    }

    /// Indices of the 1-entries, in increasing order.
    pub fn support(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (wi, &w) in self.words.iter().enumerate() {
            let mut bits = w;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                out.push(wi * WORD_BITS + b);
                bits &= bits - 1;
            }
        }
        out
    }

    /// Leading 1 position, if any.
    pub fn first_one(&self) -> Option<usize> {
        for (wi, &w) in self.words.iter().enumerate() {
            if w != 0 {
                return Some(wi * WORD_BITS + w.trailing_zeros() as usize);
            }
        }
        None
    }

    /// Kronecker product: `self ⊗ other` has length `self.len * other.len`,
    /// entry `(i * other.len + j) = self[i] & other[j]`.
    /// Entries of `self` at the given positions, in order.
    pub fn select(&self, idx: &[usize]) -> BinVector {
        let mut out = BinVector::zeros(idx.len());
        for (k, &i) in idx.iter().enumerate() {
            if self.get(i) {
                out.set(k, true);
            }
        }
        out
    }

    pub fn kron(&self, other: &BinVector) -> BinVector {
        let mut out = BinVector::zeros(self.len * other.len);
        for i in self.support() {
            for j in other.support() {
                out.set(i * other.len + j, true);
            }
        }
        out
    }

    /// Concatenation `(self | other)`.
    pub fn concat(&self, other: &BinVector) -> BinVector {
        let mut out = BinVector::zeros(self.len + other.len);
        for i in self.support() {
            out.set(i, true);
        }
        for j in other.support() {
            out.set(self.len + j, true);
        }
        out
    }

    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }
}

impl fmt::Debug for BinVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            write!(f, "{}", u8::from(self.get(i)))?;
        }
        Ok(())
    }
}

impl Serialize for BinVector {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("BinVector", 2)?;
        st.serialize_field("len", &self.len)?;
        st.serialize_field("support", &self.support())?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for BinVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            len: usize,
            support: Vec<usize>,
        }
        let raw = Raw::deserialize(d)?;
        if let Some(&i) = raw.support.iter().find(|&&i| i >= raw.len) {
            return Err(de::Error::custom(format!(
                "support index {i} out of range for len {}",
                raw.len
            )));
        }
        Ok(BinVector::from_support(raw.len, &raw.support))
    }
}

/// A matrix over GF(2), stored as bit-packed rows.
#[derive(Clone, PartialEq, Eq)]
pub struct BinMatrix {
    rows: usize,
    cols: usize,
    words_per_row: usize,
    data: Vec<u64>,
}

impl BinMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let words_per_row = words_for(cols);
        Self {
            rows,
            cols,
            words_per_row,
            data: vec![0; rows * words_per_row],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn from_entries(rows: usize, cols: usize, entries: &[(usize, usize)]) -> Self {
        let mut m = Self::zeros(rows, cols);
        for &(i, j) in entries {
            assert!(i < rows && j < cols, "entry ({i},{j}) out of bounds");
            m.set(i, j, true);
        }
        m
    }

    /// Builds a matrix from 0/1 row slices; handy in tests.
    pub fn from_dense(rows: &[&[u8]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, &b) in row.iter().enumerate() {
                if b % 2 == 1 {
                    m.set(i, j, true);
                }
            }
        }
        m
    }

    pub fn from_rows(rows: &[BinVector]) -> Self {
        let c = rows.first().map_or(0, BinVector::len);
        let mut m = Self::zeros(rows.len(), c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            m.set_row(i, row);
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        debug_assert!(i < self.rows && j < self.cols);
        (self.data[i * self.words_per_row + j / WORD_BITS] >> (j % WORD_BITS)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        debug_assert!(i < self.rows && j < self.cols);
        let idx = i * self.words_per_row + j / WORD_BITS;
        let mask = 1u64 << (j % WORD_BITS);
        if value {
            self.data[idx] |= mask;
        } else {
            self.data[idx] &= !mask;
        }
    }

    pub fn row(&self, i: usize) -> BinVector {
        let start = i * self.words_per_row;
        BinVector {
            len: self.cols,
            words: self.data[start..start + self.words_per_row].to_vec(),
        }
    }

    pub fn col(&self, j: usize) -> BinVector {
        let mut v = BinVector::zeros(self.rows);
        for i in 0..self.rows {
            if self.get(i, j) {
                v.set(i, true);
            }
        }
        v
    }

    pub fn set_row(&mut self, i: usize, row: &BinVector) {
        assert_eq!(row.len(), self.cols);
        let start = i * self.words_per_row;
        self.data[start..start + self.words_per_row].copy_from_slice(row.words());
    }

    #[inline]
    fn row_words(&self, i: usize) -> &[u64] {
        &self.data[i * self.words_per_row..(i + 1) * self.words_per_row]
    }

    /// XOR row `src` into row `dst`.
    pub fn row_xor(&mut self, dst: usize, src: usize) {
        let w = self.words_per_row;
        let (a, b) = if dst < src {
            let (lo, hi) = self.data.split_at_mut(src * w);
            (&mut lo[dst * w..dst * w + w], &hi[..w])
        } else {
            let (lo, hi) = self.data.split_at_mut(dst * w);
            (&mut hi[..w], &lo[src * w..src * w + w])
        };
        for (x, y) in a.iter_mut().zip(b) {
            *x ^= y;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&w| w == 0)
    }

    /// Positions of the 1-entries in lexicographic (row, col) order.
    pub fn entries(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.rows {
            for j in self.row(i).support() {
                out.push((i, j));
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &BinVector) -> BinVector {
        assert_eq!(v.len(), self.cols, "shape mismatch in mul_vec");
        let mut out = BinVector::zeros(self.rows);
        for i in 0..self.rows {
            let mut acc = 0u64;
            for (a, b) in self.row_words(i).iter().zip(v.words()) {
                acc ^= a & b;
            }
            if acc.count_ones() % 2 == 1 {
                out.set(i, true);
            }
        }
        out
    }

    /// `selfᵀ · v`, without materializing the transpose.
    pub fn mul_vec_transposed(&self, v: &BinVector) -> BinVector {
        assert_eq!(v.len(), self.rows, "shape mismatch in mul_vec_transposed");
        let mut out = BinVector::zeros(self.cols);
        for i in v.support() {
            for (a, b) in out.words.iter_mut().zip(self.row_words(i)) {
                *a ^= b;
            }
        }
        out
    }

    pub fn mul(&self, other: &BinMatrix) -> BinMatrix {
        assert_eq!(self.cols, other.rows, "shape mismatch in mul");
        let mut out = BinMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let dst = i * out.words_per_row;
            for k in self.row(i).support() {
                let src = k * other.words_per_row;
                for w in 0..other.words_per_row {
                    out.data[dst + w] ^= other.data[src + w];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> BinMatrix {
        let mut out = BinMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in self.row(i).support() {
                out.set(j, i, true);
            }
        }
        out
    }

    /// Kronecker product with the left factor as the slow (outer) index.
    pub fn kron(&self, other: &BinMatrix) -> BinMatrix {
        let mut out = BinMatrix::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in self.row(i).support() {
                for k in 0..other.rows {
                    for l in other.row(k).support() {
                        out.set(i * other.rows + k, j * other.cols + l, true);
                    }
                }
            }
        }
        out
    }

    /// Horizontal concatenation `(self | other)`.
    pub fn hstack(&self, other: &BinMatrix) -> BinMatrix {
        assert_eq!(self.rows, other.rows, "row mismatch in hstack");
        let mut out = BinMatrix::zeros(self.rows, self.cols + other.cols);
        for i in 0..self.rows {
            out.set_row(i, &self.row(i).concat(&other.row(i)));
        }
        out
    }

    /// Vertical concatenation.
    pub fn vstack(&self, other: &BinMatrix) -> BinMatrix {
        assert_eq!(self.cols, other.cols, "col mismatch in vstack");
        let mut out = BinMatrix::zeros(self.rows + other.rows, self.cols);
        for i in 0..self.rows {
            out.set_row(i, &self.row(i));
        }
        for i in 0..other.rows {
            out.set_row(self.rows + i, &other.row(i));
        }
        out
    }

    /// Submatrix selecting the given rows and columns, in the given order.
    /// Columns of `self` in the given order.
    pub fn select_columns(&self, col_idx: &[usize]) -> BinMatrix {
        let all_rows: Vec<usize> = (0..self.rows).collect();
        self.submatrix(&all_rows, col_idx)
    }

    /// `self` with one extra column appended.
    pub fn hstack_vec(&self, col: &BinVector) -> BinMatrix {
        assert_eq!(col.len(), self.rows);
        let mut out = BinMatrix::zeros(self.rows, self.cols + 1);
        for i in 0..self.rows {
            out.set_row(i, &self.row(i).concat(&BinVector::from_bits(&[u8::from(col.get(i))])));
        }
        out
    }

    pub fn submatrix(&self, row_idx: &[usize], col_idx: &[usize]) -> BinMatrix {
        let mut out = BinMatrix::zeros(row_idx.len(), col_idx.len());
        for (i, &r) in row_idx.iter().enumerate() {
            for (j, &c) in col_idx.iter().enumerate() {
                if self.get(r, c) {
                    out.set(i, j, true);
                }
            }
        }
        out
    }

    pub fn rank(&self) -> usize {
        Echelon::new(self).rank()
    }

    /// Basis of `ker self`, deterministic given the fixed pivoting order.
    pub fn kernel_basis(&self) -> Vec<BinVector> {
        Echelon::new(self).kernel_basis()
    }

    /// Decides whether `b ∈ im self`; returns a witness `x` with `self·x = b`.
    pub fn image_membership(&self, b: &BinVector) -> Option<BinVector> {
        assert_eq!(b.len(), self.rows, "b.len must equal rows");
        Echelon::new(self).solve(b)
    }
}

impl fmt::Debug for BinMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BinMatrix {}x{}", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "{:?}", self.row(i))?;
        }
        Ok(())
    }
}

impl Serialize for BinMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let entries: Vec<[usize; 2]> = self.entries().iter().map(|&(i, j)| [i, j]).collect();
        let mut st = s.serialize_struct("BinMatrix", 3)?;
        st.serialize_field("rows", &self.rows)?;
        st.serialize_field("cols", &self.cols)?;
        st.serialize_field("entries", &entries)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for BinMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = BinMatrix;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object with rows, cols, entries")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<BinMatrix, A::Error> {
                let mut rows = None;
                let mut cols = None;
                let mut entries: Option<Vec<[usize; 2]>> = None;
                while let Some(key) = map.next_key::<String>()? {
                    match key.as_str() {
                        "rows" => rows = Some(map.next_value()?),
                        "cols" => cols = Some(map.next_value()?),
                        "entries" => entries = Some(map.next_value()?),
                        other => return Err(de::Error::unknown_field(other, &["rows", "cols", "entries"])),
                    }
                }
                let rows = rows.ok_or_else(|| de::Error::missing_field("rows"))?;
                let cols = cols.ok_or_else(|| de::Error::missing_field("cols"))?;
                let entries = entries.ok_or_else(|| de::Error::missing_field("entries"))?;
                let mut m = BinMatrix::zeros(rows, cols);
                for [i, j] in entries {
                    if i >= rows || j >= cols {
                        return Err(de::Error::custom(format!(
                            "entry ({i},{j}) out of bounds for {rows}x{cols}"
                        )));
                    }
                    m.set(i, j, true);
                }
                Ok(m)
            }
        }
        d.deserialize_struct("BinMatrix", &["rows", "cols", "entries"], V)
    }
}

/// Row echelon form of a matrix, with the row operations recorded so that
/// linear systems `M·x = b` can be solved repeatedly.
pub struct Echelon {
    /// Reduced rows of the original matrix.
    reduced: BinMatrix,
    /// Row operations applied, as rows of a transform matrix `T` with
    /// `reduced = T · M`.
    transform: BinMatrix,
    /// `pivots[k] = (row, col)` of the k-th pivot.
    pivots: Vec<(usize, usize)>,
}

impl Echelon {
    /// Reduced row echelon form with leftmost-column, lowest-row-first pivoting.
    pub fn new(m: &BinMatrix) -> Self {
        let mut reduced = m.clone();
        let mut transform = BinMatrix::identity(m.rows());
        let mut pivots = Vec::new();
        let mut next_row = 0;
        for col in 0..m.cols() {
            let Some(pivot) = (next_row..m.rows()).find(|&r| reduced.get(r, col)) else {
                continue;
            };
            if pivot != next_row {
                // swap by xor into place: use explicit row swap
                reduced.swap_rows(pivot, next_row);
                transform.swap_rows(pivot, next_row);
            }
            for r in 0..m.rows() {
                if r != next_row && reduced.get(r, col) {
                    reduced.row_xor(r, next_row);
                    transform.row_xor(r, next_row);
                }
            }
            pivots.push((next_row, col));
            next_row += 1;
            if next_row == m.rows() {
                break;
            }
        }
        Self {
            reduced,
            transform,
            pivots,
        }
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn pivot_cols(&self) -> Vec<usize> {
        self.pivots.iter().map(|&(_, c)| c).collect()
    }

    /// Solves `M·x = b`; `None` when `b` is outside the column space.
    pub fn solve(&self, b: &BinVector) -> Option<BinVector> {
        assert_eq!(b.len(), self.transform.rows());
        let tb = self.transform.mul_vec(b);
        // consistency: rows beyond the rank must be zero
        for r in self.rank()..self.reduced.rows() {
            if tb.get(r) {
                return None;
            }
        }
        let mut x = BinVector::zeros(self.reduced.cols());
        for &(r, c) in &self.pivots {
            if tb.get(r) {
                x.set(c, true);
            }
        }
        Some(x)
    }

    /// Basis of the kernel, one vector per non-pivot column.
    pub fn kernel_basis(&self) -> Vec<BinVector> {
        let cols = self.reduced.cols();
        let mut is_pivot = vec![false; cols];
        for &(_, c) in &self.pivots {
            is_pivot[c] = true;
        }
        let mut basis = Vec::new();
        for free in 0..cols {
            if is_pivot[free] {
                continue;
            }
            let mut v = BinVector::zeros(cols);
            v.set(free, true);
            for &(r, c) in &self.pivots {
                if self.reduced.get(r, free) {
                    v.set(c, true);
                }
            }
            basis.push(v);
        }
        basis
    }
}

impl BinMatrix {
    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let w = self.words_per_row;
        for k in 0..w {
            self.data.swap(a * w + k, b * w + k);
        }
    }
}

/// Incrementally maintained row space with reduction, used for building
/// independent sets of vectors deterministically.
pub struct SpanBasis {
    len: usize,
    /// Rows in echelon form together with their pivot column.
    rows: Vec<(usize, BinVector)>,
}

impl SpanBasis {
    pub fn new(len: usize) -> Self {
        Self { len, rows: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// Reduces `v` against the current basis.
    pub fn reduce(&self, v: &BinVector) -> BinVector {
        assert_eq!(v.len(), self.len);
        let mut r = v.clone();
        for (pivot, row) in &self.rows {
            if r.get(*pivot) {
                r.xor_assign(row);
            }
        }
        r
    }

    pub fn contains(&self, v: &BinVector) -> bool {
        self.reduce(v).is_zero()
    }

    /// Inserts `v` if independent of the span; returns whether it was added.
    pub fn insert(&mut self, v: &BinVector) -> bool {
        let r = self.reduce(v);
        match r.first_one() {
            None => false,
            Some(p) => {
                self.rows.push((p, r));
                true
            }
        }
    }
}

/// Errors from quotient-space computations.
#[derive(Debug, thiserror::Error)]
pub enum Gf2Error {
    #[error("inconsistent complex: image generator column {col} is not in the kernel span")]
    ImageOutsideKernel { col: usize },
}

/// Coset representatives extending a basis of `im image_gen` to a basis of
/// `span(kernel)`. The representatives are independent modulo the image.
pub fn quotient_basis(
    kernel: &[BinVector],
    image_gen: &BinMatrix,
) -> Result<Vec<BinVector>, Gf2Error> {
    let len = kernel.first().map_or(image_gen.rows(), BinVector::len);
    let mut kernel_span = SpanBasis::new(len);
    for v in kernel {
        kernel_span.insert(v);
    }
    let mut span = SpanBasis::new(len);
    for col in 0..image_gen.cols() {
        let v = image_gen.col(col);
        if !kernel_span.contains(&v) {
            return Err(Gf2Error::ImageOutsideKernel { col });
        }
        span.insert(&v);
    }
    let mut reps = Vec::new();
    for v in kernel {
        if span.insert(v) {
            reps.push(v.clone());
        }
    }
    Ok(reps)
}
