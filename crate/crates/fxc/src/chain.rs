//! Chain complexes over GF(2): validation, homology and cohomology bases,
//! and minimum-weight homology representatives.
//!
//! Grade convention: `∂_j` maps grade `j` to grade `j−1`; grade 0 is the
//! rightmost space. Boundary maps missing at the ends of the complex are
//! zero maps of the appropriate shape.

use crate::gf2::{quotient_basis, BinMatrix, BinVector, Gf2Error};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Default exact-enumeration cutoff: kernels of dimension up to 24
/// (≈16M vectors) are enumerated exhaustively.
pub const EXACT_CUTOFF: usize = 24;

/// Number of random column permutations in the non-exact distance search.
const RANDOMIZED_TRIALS: usize = 1000;

#[derive(Debug, thiserror::Error)]
pub enum ChainError {
    #[error("boundary {index} has shape {got_rows}x{got_cols}, expected {want_rows}x{want_cols}")]
    ShapeMismatch {
        index: usize,
        got_rows: usize,
        got_cols: usize,
        want_rows: usize,
        want_cols: usize,
    },
    #[error("need at least one graded dimension")]
    Empty,
    #[error("dims has {dims} entries but there are {boundaries} boundary maps")]
    LengthMismatch { dims: usize, boundaries: usize },
    #[error("chain condition fails at grade {grade}: (∂_{grade}∂_{next})[{row},{col}] = 1", next = grade + 1)]
    ChainCondition { grade: usize, row: usize, col: usize },
    #[error(transparent)]
    Quotient(#[from] Gf2Error),
    #[error("grade {grade} out of range for a length-{length} complex")]
    GradeOutOfRange { grade: usize, length: usize },
}

/// First failing position of the chain condition, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub grade: usize,
    pub row: usize,
    pub col: usize,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "chain condition violated: (boundary_{} * boundary_{})[{}][{}] != 0",
            self.grade - 1,
            self.grade,
            self.row,
            self.col
        )
    }
}

/// A chain complex over GF(2). `dims` and `boundaries` are ordered from the
/// highest grade down, matching the serialized form: `dims = [n_n, …, n_0]`
/// and `boundaries = [∂_n, …, ∂_1]` where `∂_j` is `n_{j−1} × n_j`.
#[derive(Clone, PartialEq, Serialize)]
pub struct ChainComplex {
    dims: Vec<usize>,
    boundaries: Vec<BinMatrix>,
}

impl ChainComplex {
    /// Builds a complex from descending-grade data, checking shapes only.
    /// The chain condition is checked separately by [`ChainComplex::validate`].
    pub fn new(dims: Vec<usize>, boundaries: Vec<BinMatrix>) -> Result<Self, ChainError> {
        if dims.is_empty() {
            return Err(ChainError::Empty);
        }
        if boundaries.len() + 1 != dims.len() {
            return Err(ChainError::LengthMismatch {
                dims: dims.len(),
                boundaries: boundaries.len(),
            });
        }
        let c = Self { dims, boundaries };
        for j in 1..=c.length() {
            let b = c.boundary(j).unwrap();
            if b.rows() != c.dim(j - 1) || b.cols() != c.dim(j) {
                return Err(ChainError::ShapeMismatch {
                    index: j,
                    got_rows: b.rows(),
                    got_cols: b.cols(),
                    want_rows: c.dim(j - 1),
                    want_cols: c.dim(j),
                });
            }
        }
        Ok(c)
    }

    /// A length-0 complex: one graded space, no boundary maps.
    pub fn space(dim: usize) -> Self {
        Self {
            dims: vec![dim],
            boundaries: Vec::new(),
        }
    }

    /// A length-1 complex with the given map as `∂_1`.
    pub fn from_map(pcm: BinMatrix) -> Self {
        Self {
            dims: vec![pcm.cols(), pcm.rows()],
            boundaries: vec![pcm],
        }
    }

    /// Number of boundary maps; grades run `0..=length`.
    pub fn length(&self) -> usize {
        self.boundaries.len()
    }

    pub fn dim(&self, grade: usize) -> usize {
        assert!(grade <= self.length(), "grade out of range");
        self.dims[self.length() - grade]
    }

    pub fn dims_desc(&self) -> &[usize] {
        &self.dims
    }

    /// `∂_j` for `1 ≤ j ≤ length`, `None` outside that range.
    pub fn boundary(&self, j: usize) -> Option<&BinMatrix> {
        if j == 0 || j > self.length() {
            None
        } else {
            Some(&self.boundaries[self.length() - j])
        }
    }

    /// `∂_j` with out-of-range maps materialized as zero maps of the
    /// appropriate shape (`∂_0 : C_0 → 0`, `∂_{n+1} : 0 → C_n`).
    pub fn boundary_or_zero(&self, j: usize) -> BinMatrix {
        if let Some(m) = self.boundary(j) {
            return m.clone();
        }
        if j == 0 {
            BinMatrix::zeros(0, self.dim(0))
        } else if j == self.length() + 1 {
            BinMatrix::zeros(self.dim(self.length()), 0)
        } else {
            panic!("boundary index {j} beyond the complex");
        }
    }

    /// Checks the chain condition `∂_j ∂_{j+1} = 0` for all composable pairs;
    /// reports the first violating position.
    pub fn validate(&self) -> Result<(), Violation> {
        for j in 1..self.length() {
            let prod = self.boundary(j).unwrap().mul(self.boundary(j + 1).unwrap());
            if let Some(&(row, col)) = prod.entries().first() {
                return Err(Violation { grade: j, row, col });
            }
        }
        Ok(())
    }

    /// The cochain complex: grading reversed, boundaries transposed.
    pub fn transpose(&self) -> ChainComplex {
        let dims = self.dims.iter().rev().copied().collect();
        let boundaries = self
            .boundaries
            .iter()
            .rev()
            .map(BinMatrix::transpose)
            .collect();
        ChainComplex { dims, boundaries }
    }

    /// Homology basis at grade `i`.
    pub fn homology(&self, grade: usize) -> Result<HomologyBasis, ChainError> {
        if grade > self.length() {
            return Err(ChainError::GradeOutOfRange {
                grade,
                length: self.length(),
            });
        }
        let kernel = self.boundary_or_zero(grade).kernel_basis();
        let image_gen = self.boundary_or_zero(grade + 1);
        let representatives = quotient_basis(&kernel, &image_gen)?;
        Ok(HomologyBasis {
            grade,
            dimension: representatives.len(),
            representatives,
        })
    }

    /// Cohomology basis at grade `i`, computed as homology of the transposed
    /// complex. Over GF(2) its dimension equals the homology dimension.
    pub fn cohomology(&self, grade: usize) -> Result<HomologyBasis, ChainError> {
        if grade > self.length() {
            return Err(ChainError::GradeOutOfRange {
                grade,
                length: self.length(),
            });
        }
        let mut basis = self.transpose().homology(self.length() - grade)?;
        basis.grade = grade;
        Ok(basis)
    }

    /// Minimum weight of a nonzero homology class at grade `i`.
    ///
    /// Exact when `dim ker ∂_i ≤ cutoff` (full kernel enumeration); otherwise
    /// an upper bound from a randomized information-set search, flagged
    /// non-exact. Trivial homology reports the infinite distance.
    pub fn min_weight_homology(
        &self,
        grade: usize,
        cutoff: usize,
        seed: u64,
    ) -> Result<DistanceResult, ChainError> {
        let cohom = self.cohomology(grade)?;
        if cohom.dimension == 0 {
            return Ok(DistanceResult {
                weight: Distance::Infinite,
                witness: None,
                exact: true,
            });
        }
        assert!(cohom.dimension <= 128, "pairing mask overflow");
        let kernel = self.boundary_or_zero(grade).kernel_basis();
        // For v ∈ ker ∂_i, the class of v is nonzero iff it pairs nontrivially
        // with some cohomology representative (the pairing is perfect over a
        // field), so a per-vector image_membership solve is not needed here.
        let pairing_mask = |v: &BinVector| -> u128 {
            let mut mask = 0u128;
            for (b, t) in cohom.representatives.iter().enumerate() {
                if t.dot(v) {
                    mask |= 1 << b;
                }
            }
            mask
        };
        if kernel.len() <= cutoff {
            let masks: Vec<u128> = kernel.iter().map(&pairing_mask).collect();
            let mut cur = BinVector::zeros(self.dim(grade));
            let mut cur_mask = 0u128;
            let mut best: Option<(usize, BinVector)> = None;
            for step in 1u64..(1u64 << kernel.len()) {
                let bit = step.trailing_zeros() as usize;
                cur.xor_assign(&kernel[bit]);
                cur_mask ^= masks[bit];
                if cur_mask != 0 {
                    let w = cur.weight();
                    if best.as_ref().is_none_or(|(bw, _)| w < *bw) {
                        best = Some((w, cur.clone()));
                    }
                }
            }
            let (w, witness) = best.expect("nontrivial homology must yield a logical vector");
            Ok(DistanceResult {
                weight: Distance::Finite(w),
                witness: Some(witness),
                exact: true,
            })
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = self.dim(grade);
            let mut best: Option<(usize, BinVector)> = None;
            for _ in 0..RANDOMIZED_TRIALS {
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(&mut rng);
                let mut rows = kernel.clone();
                let mut used = vec![false; rows.len()];
                for &col in &order {
                    let Some(p) = (0..rows.len()).find(|&r| !used[r] && rows[r].get(col)) else {
                        continue;
                    };
                    used[p] = true;
                    let pivot_row = rows[p].clone();
                    for (r, row) in rows.iter_mut().enumerate() {
                        if r != p && row.get(col) {
                            row.xor_assign(&pivot_row);
                        }
                    }
                }
                for row in &rows {
                    if pairing_mask(row) != 0 {
                        let w = row.weight();
                        if best.as_ref().is_none_or(|(bw, _)| w < *bw) {
                            best = Some((w, row.clone()));
                        }
                    }
                }
            }
            let (w, witness) = best.expect("nontrivial homology must yield a logical vector");
            Ok(DistanceResult {
                weight: Distance::Finite(w),
                witness: Some(witness),
                exact: false,
            })
        }
    }
}

impl std::fmt::Debug for ChainComplex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ChainComplex(dims desc: {:?})", self.dims)
    }
}

impl<'de> Deserialize<'de> for ChainComplex {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            dims: Vec<usize>,
            boundaries: Vec<BinMatrix>,
        }
        let raw = Raw::deserialize(d)?;
        ChainComplex::new(raw.dims, raw.boundaries).map_err(serde::de::Error::custom)
    }
}

/// Representatives of a (co)homology group at one grade.
#[derive(Debug, Clone, Serialize)]
pub struct HomologyBasis {
    pub grade: usize,
    pub representatives: Vec<BinVector>,
    pub dimension: usize,
}

/// A possibly infinite GF(2) weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Distance {
    Finite(usize),
    Infinite,
}

impl Distance {
    pub fn times(self, other: Distance) -> Distance {
        match (self, other) {
            (Distance::Finite(a), Distance::Finite(b)) => Distance::Finite(a * b),
            _ => Distance::Infinite,
        }
    }

    pub fn finite(self) -> Option<usize> {
        match self {
            Distance::Finite(w) => Some(w),
            Distance::Infinite => None,
        }
    }
}

impl Serialize for Distance {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        // infinity serializes as null
        self.finite().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Distance {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(match Option::<usize>::deserialize(d)? {
            Some(w) => Distance::Finite(w),
            None => Distance::Infinite,
        })
    }
}

impl std::fmt::Display for Distance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Distance::Finite(w) => write!(f, "{w}"),
            Distance::Infinite => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DistanceResult {
    pub weight: Distance,
    pub witness: Option<BinVector>,
    pub exact: bool,
}
