//! Fault complexes of foliated codes: the product of a length-1 repetition
//! complex with a base complex, detector matrices, Künneth counts, fault
//! distances, and explicit logical correlation/error representatives.
//!
//! Column ordering of the product blocks is fixed globally: the `R_0 ⊗ C_j`
//! block comes first, the `R_1 ⊗ C_{j−1}` block second, with the left factor
//! as the slow Kronecker index. All downstream slicing depends on this order
//! and it is frozen in the serialization format.

use crate::chain::{ChainComplex, ChainError, Distance, HomologyBasis};
use crate::gf2::{BinMatrix, BinVector, Echelon};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum FoliationError {
    #[error("left factor must be a length-1 complex (got length {0})")]
    RepNotLengthOne(usize),
    #[error("primal grade {grade} invalid for a length-{length} base complex")]
    BadPrimalGrade { grade: usize, length: usize },
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("pairing matrix between correlations and errors is singular")]
    SingularPairing,
    #[error("subsystem preconditions violated: {0:?}")]
    SubsystemPrecondition(Vec<String>),
    #[error("serialized fault complex is inconsistent: {0}")]
    BadSerialization(String),
}

/// Which half of the fault complex an experiment decodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Primal,
    Dual,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Primal => write!(f, "primal"),
            Side::Dual => write!(f, "dual"),
        }
    }
}

/// Layer type of a block in a product grade: blocks from the `R_0` factor are
/// check-node layers, blocks from the `R_1` factor are bit-node layers. One
/// decoding round is a check layer together with a bit layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Check,
    Bit,
}

/// Block structure of one grade of a product complex:
/// `F_j = (R_0 ⊗ C_j) ⊕ (R_1 ⊗ C_{j−1})`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GradeLayout {
    /// Number of check-node layers (rows of R).
    pub check_layers: usize,
    /// Base dimension per check layer (`dim C_j`).
    pub check_block: usize,
    /// Number of bit-node layers (cols of R).
    pub bit_layers: usize,
    /// Base dimension per bit layer (`dim C_{j−1}`).
    pub bit_block: usize,
}

impl GradeLayout {
    pub fn total(&self) -> usize {
        self.check_layers * self.check_block + self.bit_layers * self.bit_block
    }

    /// Layers of the given kind.
    pub fn layers(&self, kind: LayerKind) -> usize {
        match kind {
            LayerKind::Check => self.check_layers,
            LayerKind::Bit => self.bit_layers,
        }
    }

    pub fn block(&self, kind: LayerKind) -> usize {
        match kind {
            LayerKind::Check => self.check_block,
            LayerKind::Bit => self.bit_block,
        }
    }

    pub fn index(&self, kind: LayerKind, layer: usize, offset: usize) -> usize {
        debug_assert!(layer < self.layers(kind) && offset < self.block(kind));
        match kind {
            LayerKind::Check => layer * self.check_block + offset,
            LayerKind::Bit => {
                self.check_layers * self.check_block + layer * self.bit_block + offset
            }
        }
    }

    pub fn decompose(&self, idx: usize) -> (LayerKind, usize, usize) {
        let check_total = self.check_layers * self.check_block;
        if idx < check_total {
            (LayerKind::Check, idx / self.check_block, idx % self.check_block)
        } else {
            let rest = idx - check_total;
            (LayerKind::Bit, rest / self.bit_block, rest % self.bit_block)
        }
    }

    /// Indices belonging to one layer, in order.
    pub fn layer_range(&self, kind: LayerKind, layer: usize) -> std::ops::Range<usize> {
        let start = self.index(kind, layer, 0);
        start..start + self.block(kind)
    }
}

fn base_dim(base: &ChainComplex, grade: isize) -> usize {
    if grade < 0 || grade as usize > base.length() {
        0
    } else {
        base.dim(grade as usize)
    }
}

/// Tensor-product complex of a length-1 PCM complex with an arbitrary base
/// complex: `F_j = (R_0 ⊗ C_j) ⊕ (R_1 ⊗ C_{j−1})` with block boundary maps
/// `[[1_r ⊗ ∂_j, R ⊗ 1], [0, 1_c ⊗ ∂_{j−1}]]`.
pub fn product_complex(r_pcm: &BinMatrix, base: &ChainComplex) -> ChainComplex {
    let r = r_pcm.rows();
    let c = r_pcm.cols();
    let n = base.length();
    let fdim = |j: isize| -> usize {
        r * base_dim(base, j) + c * base_dim(base, j - 1)
    };
    let mut dims_desc = Vec::with_capacity(n + 2);
    for j in (0..=(n as isize + 1)).rev() {
        dims_desc.push(fdim(j));
    }
    let mut boundaries_desc = Vec::with_capacity(n + 1);
    for j in (1..=(n as isize + 1)).rev() {
        let nj = base_dim(base, j);
        let njm1 = base_dim(base, j - 1);
        let njm2 = base_dim(base, j - 2);
        let mut m = BinMatrix::zeros(r * njm1 + c * njm2, r * nj + c * njm1);
        // 1_r ⊗ ∂_j
        if j <= n as isize && j >= 1 {
            let dj = base.boundary(j as usize).unwrap();
            for (a, b) in dj.entries() {
                for alpha in 0..r {
                    m.set(alpha * njm1 + a, alpha * nj + b, true);
                }
            }
        }
        // R ⊗ 1_{n_{j−1}}
        for (alpha, beta) in r_pcm.entries() {
            for q in 0..njm1 {
                m.set(alpha * njm1 + q, r * nj + beta * njm1 + q, true);
            }
        }
        // 1_c ⊗ ∂_{j−1}
        if j - 1 <= n as isize && j - 1 >= 1 {
            let djm1 = base.boundary((j - 1) as usize).unwrap();
            for (a, b) in djm1.entries() {
                for beta in 0..c {
                    m.set(r * njm1 + beta * njm2 + a, r * nj + beta * njm1 + b, true);
                }
            }
        }
        boundaries_desc.push(m);
    }
    ChainComplex::new(dims_desc, boundaries_desc).expect("product shapes are consistent")
}

/// A fault complex `F = R × C` with a designated primal grade.
#[derive(Clone)]
pub struct FaultComplex {
    rep: ChainComplex,
    base: ChainComplex,
    complex: ChainComplex,
    primal_grade: usize,
    d_x: BinMatrix,
    d_z: BinMatrix,
}

/// Builds the fault complex `F = R × C` with primal fault locations at grade
/// `i`. `D_X = ∂_i` and `D_Z = ∂_{i+2}ᵀ`.
pub fn product(
    rep: &ChainComplex,
    base: &ChainComplex,
    primal_grade: usize,
) -> Result<FaultComplex, FoliationError> {
    if rep.length() != 1 {
        return Err(FoliationError::RepNotLengthOne(rep.length()));
    }
    if primal_grade == 0 || primal_grade > base.length() {
        return Err(FoliationError::BadPrimalGrade {
            grade: primal_grade,
            length: base.length(),
        });
    }
    let complex = product_complex(rep.boundary(1).unwrap(), base);
    let d_x = complex.boundary_or_zero(primal_grade);
    let d_z = complex.boundary_or_zero(primal_grade + 2).transpose();
    Ok(FaultComplex {
        rep: rep.clone(),
        base: base.clone(),
        complex,
        primal_grade,
        d_x,
        d_z,
    })
}

impl FaultComplex {
    pub fn complex(&self) -> &ChainComplex {
        &self.complex
    }

    pub fn base(&self) -> &ChainComplex {
        &self.base
    }

    pub fn rep(&self) -> &ChainComplex {
        &self.rep
    }

    pub fn rep_pcm(&self) -> &BinMatrix {
        self.rep.boundary(1).unwrap()
    }

    pub fn primal_grade(&self) -> usize {
        self.primal_grade
    }

    pub fn d_x(&self) -> &BinMatrix {
        &self.d_x
    }

    pub fn d_z(&self) -> &BinMatrix {
        &self.d_z
    }

    pub fn n_primal(&self) -> usize {
        self.complex.dim(self.primal_grade)
    }

    pub fn n_dual(&self) -> usize {
        self.complex.dim(self.primal_grade + 1)
    }

    /// Block layout of grade `j` of the product complex.
    pub fn layout(&self, grade: usize) -> GradeLayout {
        GradeLayout {
            check_layers: self.rep_pcm().rows(),
            check_block: base_dim(&self.base, grade as isize),
            bit_layers: self.rep_pcm().cols(),
            bit_block: base_dim(&self.base, grade as isize - 1),
        }
    }

    /// Detector matrix of a side: rows are detectors, columns are faults.
    pub fn detector(&self, side: Side) -> &BinMatrix {
        match side {
            Side::Primal => &self.d_x,
            Side::Dual => &self.d_z,
        }
    }

    /// Layout of the fault columns of a side.
    pub fn fault_layout(&self, side: Side) -> GradeLayout {
        match side {
            Side::Primal => self.layout(self.primal_grade),
            Side::Dual => self.layout(self.primal_grade + 1),
        }
    }

    /// Layout of the detector rows of a side (grade `i−1` for primal,
    /// grade `i+2` for dual).
    pub fn detector_layout(&self, side: Side) -> GradeLayout {
        match side {
            Side::Primal => self.layout(self.primal_grade - 1),
            Side::Dual => self.layout(self.primal_grade + 2),
        }
    }

    /// Künneth counts of logical correlations per grade.
    pub fn kunneth(&self) -> Result<KunnethReport, FoliationError> {
        let h0r = self.rep.homology(0)?.dimension;
        let h1r = self.rep.homology(1)?.dimension;
        let hc: Vec<usize> = (0..=self.base.length())
            .map(|g| self.base.homology(g).map(|h| h.dimension))
            .collect::<Result<_, _>>()?;
        let hc_at = |g: isize| -> usize {
            if g < 0 || g as usize >= hc.len() {
                0
            } else {
                hc[g as usize]
            }
        };
        let grades = (0..=(self.complex.length() as isize))
            .map(|j| {
                let from_h0 = h0r * hc_at(j);
                let from_h1 = h1r * hc_at(j - 1);
                KunnethGrade {
                    grade: j as usize,
                    from_h0,
                    from_h1,
                    total: from_h0 + from_h1,
                }
            })
            .collect::<Vec<_>>();
        let k_primal = grades[self.primal_grade].total;
        let k_dual = grades[self.primal_grade + 1].total;
        Ok(KunnethReport {
            primal_grade: self.primal_grade,
            k_primal,
            k_dual,
            grades,
        })
    }

    /// Fault distances from the product formula: per-factor homological
    /// distances multiplied and minimized, with trivial factors contributing
    /// the infinite distance.
    pub fn fault_distances(&self, cutoff: usize, seed: u64) -> Result<FaultDistances, FoliationError> {
        let i = self.primal_grade as isize;
        let mut exact = true;
        let mut dist = |c: &ChainComplex, grade: isize, cohom: bool| -> Result<Distance, FoliationError> {
            let g = if grade < 0 || grade as usize > c.length() {
                return Ok(Distance::Infinite);
            } else {
                grade as usize
            };
            let target = if cohom { c.transpose() } else { c.clone() };
            let target_grade = if cohom { c.length() - g } else { g };
            let r = target.min_weight_homology(target_grade, cutoff, seed)?;
            exact &= r.exact;
            Ok(r.weight)
        };
        let d0r = dist(&self.rep, 0, false)?;
        let d1r = dist(&self.rep, 1, false)?;
        let d0rt = dist(&self.rep, 0, true)?;
        let d1rt = dist(&self.rep, 1, true)?;
        let di = dist(&self.base, i, false)?;
        let dim1 = dist(&self.base, i - 1, false)?;
        let dip1t = dist(&self.base, i + 1, true)?;
        let dit = dist(&self.base, i, true)?;
        let primal = d0r.times(di).min(d1r.times(dim1));
        let dual = d0rt.times(dip1t).min(d1rt.times(dit));
        Ok(FaultDistances { primal, dual, exact })
    }

    /// Explicit logical correlation/error representatives, lifted from the
    /// factor (co)homology bases and canonicalized so each correlation pairs
    /// with exactly one error of the emitted generating set.
    pub fn logical_representatives(&self) -> Result<LogicalSet, FoliationError> {
        let i = self.primal_grade;
        let hom = |c: &ChainComplex, g: isize| -> Result<Vec<BinVector>, FoliationError> {
            if g < 0 || g as usize > c.length() {
                Ok(Vec::new())
            } else {
                Ok(c.homology(g as usize)?.representatives)
            }
        };
        let cohom = |c: &ChainComplex, g: isize| -> Result<Vec<BinVector>, FoliationError> {
            if g < 0 || g as usize > c.length() {
                Ok(Vec::new())
            } else {
                Ok(c.cohomology(g as usize)?.representatives)
            }
        };
        let h0r = hom(&self.rep, 0)?;
        let h1r = hom(&self.rep, 1)?;
        let ch0r = cohom(&self.rep, 0)?;
        let ch1r = cohom(&self.rep, 1)?;
        let ii = i as isize;

        let embed = |grade: usize, kind: LayerKind, u: &BinVector, x: &BinVector| -> BinVector {
            let lay = self.layout(grade);
            let mut v = BinVector::zeros(lay.total());
            let k = u.kron(x);
            let offset = match kind {
                LayerKind::Check => 0,
                LayerKind::Bit => lay.check_layers * lay.check_block,
            };
            for p in k.support() {
                v.set(offset + p, true);
            }
            v
        };
        let lift = |grade: usize,
                    first: (&[BinVector], &[BinVector]),
                    second: (&[BinVector], &[BinVector]),
                    first_family: Family|
         -> Vec<TaggedRep> {
            let mut out = Vec::new();
            for u in first.0 {
                for x in first.1 {
                    out.push(TaggedRep {
                        vector: embed(grade, LayerKind::Check, u, x),
                        family: first_family,
                    });
                }
            }
            let second_family = match first_family {
                Family::Ell => Family::Gh,
                Family::Gh => Family::Ell,
            };
            for v in second.0 {
                for y in second.1 {
                    out.push(TaggedRep {
                        vector: embed(grade, LayerKind::Bit, v, y),
                        family: second_family,
                    });
                }
            }
            out
        };

        // H_i(F): (u ⊗ ℓ_Z | 0) and (0 | 1 ⊗ h)
        let mut primal_err = lift(
            i,
            (&h0r, &hom(&self.base, ii)?),
            (&h1r, &hom(&self.base, ii - 1)?),
            Family::Ell,
        );
        // H^i(F): (u' ⊗ ℓ_X | 0) and (0 | e ⊗ g)
        let mut primal_corr = lift(
            i,
            (&ch0r, &cohom(&self.base, ii)?),
            (&ch1r, &cohom(&self.base, ii - 1)?),
            Family::Ell,
        );
        // H_{i+1}(F): (u ⊗ g' | 0) and (0 | 1 ⊗ ℓ_Z)
        let mut dual_corr = lift(
            i + 1,
            (&h0r, &hom(&self.base, ii + 1)?),
            (&h1r, &hom(&self.base, ii)?),
            Family::Gh,
        );
        // H^{i+1}(F): (u' ⊗ h' | 0) and (0 | e ⊗ ℓ_X)
        let mut dual_err = lift(
            i + 1,
            (&ch0r, &cohom(&self.base, ii + 1)?),
            (&ch1r, &cohom(&self.base, ii)?),
            Family::Gh,
        );

        canonicalize_pairing(&mut primal_corr, &mut primal_err)?;
        canonicalize_pairing(&mut dual_corr, &mut dual_err)?;
        Ok(LogicalSet {
            primal_corr,
            primal_err,
            dual_corr,
            dual_err,
        })
    }

    /// Checks that every primal detector row has the foliated-stabilizer form
    /// `(e_α ⊗ [∂_i]_β | [R]_α ⊗ e_β)` or is a pure metacheck-layer row
    /// `(0 | e_α ⊗ [∂_{i−1}]_β)`.
    pub fn detector_rows_match_template(&self) -> bool {
        let i = self.primal_grade;
        let rows_layout = self.detector_layout(Side::Primal);
        let r = self.rep_pcm().rows();
        let c = self.rep_pcm().cols();
        for row_idx in 0..self.d_x.rows() {
            let row = self.d_x.row(row_idx);
            let (kind, layer, offset) = rows_layout.decompose(row_idx);
            let expected = match kind {
                LayerKind::Check => {
                    let e_alpha = BinVector::unit(r, layer);
                    let hx_row = self.base.boundary(i).unwrap().row(offset);
                    let r_row = self.rep_pcm().row(layer);
                    let e_beta = BinVector::unit(base_dim(&self.base, i as isize - 1), offset);
                    e_alpha.kron(&hx_row).concat(&r_row.kron(&e_beta))
                }
                LayerKind::Bit => {
                    let front = BinVector::zeros(r * base_dim(&self.base, i as isize));
                    let e_alpha = BinVector::unit(c, layer);
                    let mx_row = self.base.boundary_or_zero(i - 1).row(offset);
                    front.concat(&e_alpha.kron(&mx_row))
                }
            };
            if row != expected {
                return false;
            }
        }
        true
    }

    /// True when the base complex supplies metachecks on the primal side,
    /// i.e. the detector matrix interleaves stabilizer and metacheck layers.
    pub fn has_single_shot_blocks(&self) -> bool {
        self.primal_grade >= 2
            && !self.base.boundary_or_zero(self.primal_grade - 1).is_zero()
            && self.detector_rows_match_template()
    }
}

/// Aligns `corr` so that `corr[a] · err[b] = δ_ab` within each family,
/// by Gaussian elimination on the pairing matrix.
fn canonicalize_pairing(
    corr: &mut [TaggedRep],
    err: &mut [TaggedRep],
) -> Result<(), FoliationError> {
    for family in [Family::Ell, Family::Gh] {
        let ci: Vec<usize> = (0..corr.len()).filter(|&a| corr[a].family == family).collect();
        let ei: Vec<usize> = (0..err.len()).filter(|&b| err[b].family == family).collect();
        if ci.len() != ei.len() {
            return Err(FoliationError::SingularPairing);
        }
        let k = ci.len();
        if k == 0 {
            continue;
        }
        let mut pairing = BinMatrix::zeros(k, k);
        for (a, &ca) in ci.iter().enumerate() {
            for (b, &eb) in ei.iter().enumerate() {
                if corr[ca].vector.dot(&err[eb].vector) {
                    pairing.set(a, b, true);
                }
            }
        }
        let ech = Echelon::new(&pairing);
        if ech.rank() != k {
            return Err(FoliationError::SingularPairing);
        }
        // rows of M = P⁻¹ give the new correlations
        let mut new_vectors = Vec::with_capacity(k);
        for a in 0..k {
            // solve Pᵀ x = e_a so that Σ_c x_c corr_c pairs as δ_{a·}
            let x = Echelon::new(&pairing.transpose())
                .solve(&BinVector::unit(k, a))
                .ok_or(FoliationError::SingularPairing)?;
            let mut v = BinVector::zeros(corr[ci[0]].vector.len());
            for cbit in x.support() {
                v.xor_assign(&corr[ci[cbit]].vector);
            }
            new_vectors.push(v);
        }
        for (a, &ca) in ci.iter().enumerate() {
            corr[ca].vector = new_vectors[a].clone();
        }
    }
    Ok(())
}

/// Which factor homology a representative is lifted from: `Ell` marks lifts
/// of base-code logical operators, `Gh` marks the spacelike-invariant /
/// metacheck-kernel family relevant for stability experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Ell,
    Gh,
}

#[derive(Debug, Clone, Serialize)]
pub struct TaggedRep {
    pub vector: BinVector,
    pub family: Family,
}

#[derive(Debug, Clone, Serialize)]
pub struct LogicalSet {
    pub primal_corr: Vec<TaggedRep>,
    pub primal_err: Vec<TaggedRep>,
    pub dual_corr: Vec<TaggedRep>,
    pub dual_err: Vec<TaggedRep>,
}

#[derive(Debug, Clone, Serialize)]
pub struct KunnethGrade {
    pub grade: usize,
    pub from_h0: usize,
    pub from_h1: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct KunnethReport {
    pub primal_grade: usize,
    pub k_primal: usize,
    pub k_dual: usize,
    pub grades: Vec<KunnethGrade>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FaultDistances {
    pub primal: Distance,
    pub dual: Distance,
    pub exact: bool,
}

/// Serialized form of a fault complex: the product chain complex plus the
/// designated primal grade and the per-fault round structure, together with
/// the factors it was built from.
#[derive(Serialize, Deserialize)]
struct FaultComplexFile {
    complex: ChainComplex,
    primal_grade: usize,
    rep: ChainComplex,
    base: ChainComplex,
    rounds: RoundsFile,
}

#[derive(Serialize, Deserialize)]
struct RoundsFile {
    primal: Vec<(LayerKind, usize)>,
    dual: Vec<(LayerKind, usize)>,
}

impl Serialize for FaultComplex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let rounds = RoundsFile {
            primal: (0..self.n_primal())
                .map(|idx| {
                    let (k, l, _) = self.fault_layout(Side::Primal).decompose(idx);
                    (k, l)
                })
                .collect(),
            dual: (0..self.n_dual())
                .map(|idx| {
                    let (k, l, _) = self.fault_layout(Side::Dual).decompose(idx);
                    (k, l)
                })
                .collect(),
        };
        FaultComplexFile {
            complex: self.complex.clone(),
            primal_grade: self.primal_grade,
            rep: self.rep.clone(),
            base: self.base.clone(),
            rounds,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FaultComplex {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let file = FaultComplexFile::deserialize(d)?;
        let rebuilt = product(&file.rep, &file.base, file.primal_grade)
            .map_err(serde::de::Error::custom)?;
        if rebuilt.complex != file.complex {
            return Err(serde::de::Error::custom(
                "stored complex does not match the product of its factors",
            ));
        }
        if file.rounds.primal.len() != rebuilt.n_primal()
            || file.rounds.dual.len() != rebuilt.n_dual()
        {
            return Err(serde::de::Error::custom("round structure length mismatch"));
        }
        Ok(rebuilt)
    }
}

/// Result of the experimental subsystem-code assembly: the three boundary
/// operators built from gauge and stabilizer matrices, plus whether the
/// strict chain condition holds (it generally does not for proper subsystem
/// codes; the flag is recorded, not enforced).
#[derive(Debug, Clone, Serialize)]
pub struct SubsystemAssembly {
    pub d_x: BinMatrix,
    pub connectivity: BinMatrix,
    pub d_z: BinMatrix,
    pub chain_condition_holds: bool,
}

/// Assembles the detector and connectivity operators of a foliated CSS
/// subsystem code: detectors use the stabilizer matrices `H`, the middle
/// connectivity map uses the gauge matrices `G`.
pub fn subsystem_assembly(
    g_x: &BinMatrix,
    g_z: &BinMatrix,
    h_x: &BinMatrix,
    h_z: &BinMatrix,
    r_pcm: &BinMatrix,
) -> Result<SubsystemAssembly, FoliationError> {
    let mut issues = Vec::new();
    let n = g_x.cols();
    if g_z.cols() != n || h_x.cols() != n || h_z.cols() != n {
        issues.push("gauge and stabilizer matrices must share the qubit count".to_string());
    }
    if h_x.rows() != g_x.rows() {
        issues.push(format!(
            "H_X must be given with the same row count as G_X ({} vs {})",
            h_x.rows(),
            g_x.rows()
        ));
    }
    if h_z.rows() != g_z.rows() {
        issues.push(format!(
            "H_Z must be given with the same row count as G_Z ({} vs {})",
            h_z.rows(),
            g_z.rows()
        ));
    }
    if issues.is_empty() {
        let gx_row_space = Echelon::new(&g_x.transpose());
        for row in 0..h_x.rows() {
            if gx_row_space.solve(&h_x.row(row)).is_none() {
                issues.push(format!("H_X row {row} is outside rowspace(G_X)"));
            }
        }
        let gz_row_space = Echelon::new(&g_z.transpose());
        for row in 0..h_z.rows() {
            if gz_row_space.solve(&h_z.row(row)).is_none() {
                issues.push(format!("H_Z row {row} is outside rowspace(G_Z)"));
            }
        }
        if !h_x.mul(&g_z.transpose()).is_zero() {
            issues.push("some H_X row has odd overlap with a G_Z row".to_string());
        }
        if !h_z.mul(&g_x.transpose()).is_zero() {
            issues.push("some H_Z row has odd overlap with a G_X row".to_string());
        }
    }
    if !issues.is_empty() {
        return Err(FoliationError::SubsystemPrecondition(issues));
    }
    let r = r_pcm.rows();
    let c = r_pcm.cols();
    let id = BinMatrix::identity;
    // D_X = (1_r ⊗ H_X | R ⊗ 1_{n_0})
    let d_x = id(r).kron(h_x).hstack(&r_pcm.kron(&id(g_x.rows())));
    // ∂_2 = [[1_r ⊗ G_Zᵀ, R ⊗ 1_n], [0, 1_c ⊗ G_X]]
    let top = id(r).kron(&g_z.transpose()).hstack(&r_pcm.kron(&id(n)));
    let bottom = BinMatrix::zeros(c * g_x.rows(), r * g_z.rows()).hstack(&id(c).kron(g_x));
    let connectivity = top.vstack(&bottom);
    // D_Zᵀ = [R ⊗ 1_{n_2}; 1_c ⊗ H_Zᵀ]
    let d_z = r_pcm
        .kron(&id(g_z.rows()))
        .vstack(&id(c).kron(&h_z.transpose()))
        .transpose();
    let chain_condition_holds =
        d_x.mul(&connectivity).is_zero() && connectivity.mul(&d_z.transpose()).is_zero();
    Ok(SubsystemAssembly {
        d_x,
        connectivity,
        d_z,
        chain_condition_holds,
    })
}

/// Convenience: homology basis of the product complex computed directly,
/// used to cross-check the Künneth counts.
pub fn direct_homology(f: &FaultComplex, grade: usize) -> Result<HomologyBasis, ChainError> {
    f.complex().homology(grade)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{repetition, toric, RepetitionSpec, ToricSpec};
    use crate::gf2::BinMatrix;

    fn toric2(l: usize) -> ChainComplex {
        toric(ToricSpec::new(2, l).unwrap()).unwrap()
    }

    fn toric3(l: usize) -> ChainComplex {
        toric(ToricSpec::new(3, l).unwrap()).unwrap()
    }

    #[test]
    fn product_passes_chain_validation() {
        for rep_spec in [RepetitionSpec::full_rank(2), RepetitionSpec::cyclic(3)] {
            let r = repetition(rep_spec).unwrap();
            let f = product(&r, &toric2(3), 1).unwrap();
            assert!(f.complex().validate().is_ok());
        }
    }

    #[test]
    fn product_with_a_point_reduces_to_base() {
        // full-rank δ=1 is the empty PCM (0 checks, 1 bit): the product is
        // the base complex shifted up by one grade
        let r = repetition(RepetitionSpec::full_rank(1)).unwrap();
        let base = toric2(3);
        let f = product(&r, &base, 1).unwrap();
        assert_eq!(f.n_primal(), base.dim(0));
        assert_eq!(f.n_dual(), base.dim(1));
        assert_eq!(f.d_x().rows(), 0); // no check layers: no primal detectors
        // D_Z on the single bit layer is H_Zᵀ transposed back, i.e. ∂_2ᵀ
        assert_eq!(f.d_z(), &base.boundary(2).unwrap().transpose());
    }

    #[test]
    fn kunneth_matches_direct_homology() {
        let pairs: Vec<(ChainComplex, ChainComplex, usize)> = vec![
            (repetition(RepetitionSpec::cyclic(4)).unwrap(), toric2(3), 1),
            (repetition(RepetitionSpec::full_rank(3)).unwrap(), toric2(3), 1),
            (repetition(RepetitionSpec::cyclic(2)).unwrap(), toric3(2), 2),
        ];
        for (r, c, i) in pairs {
            let f = product(&r, &c, i).unwrap();
            let report = f.kunneth().unwrap();
            assert_eq!(
                report.k_primal,
                direct_homology(&f, i).unwrap().dimension,
                "primal"
            );
            assert_eq!(
                report.k_dual,
                direct_homology(&f, i + 1).unwrap().dimension,
                "dual"
            );
        }
    }

    #[test]
    fn kunneth_cyclic_rep4_toric2_primal_count() {
        let r = repetition(RepetitionSpec::cyclic(4)).unwrap();
        let f = product(&r, &toric2(3), 1).unwrap();
        // k_primal = dim H_1(C) + dim H_0(C) = 2 + 1
        assert_eq!(f.kunneth().unwrap().k_primal, 3);
    }

    #[test]
    fn dual_distance_equals_base_x_distance() {
        let r = repetition(RepetitionSpec::full_rank(2)).unwrap();
        let f = product(&r, &toric2(3), 1).unwrap();
        let d = f.fault_distances(crate::chain::EXACT_CUTOFF, 0).unwrap();
        assert_eq!(d.dual, Distance::Finite(3));
        assert!(d.exact);
    }

    #[test]
    fn primal_distance_scales_with_rounds_for_3d_toric() {
        for delta in [2, 3] {
            let r = repetition(RepetitionSpec::full_rank(delta)).unwrap();
            let f = product(&r, &toric3(2), 2).unwrap();
            let d = f.fault_distances(crate::chain::EXACT_CUTOFF, 0).unwrap();
            assert_eq!(d.primal, Distance::Finite(delta * 2), "delta = {delta}");
        }
    }

    #[test]
    fn detector_rows_are_foliated_stabilizers() {
        let r = repetition(RepetitionSpec::full_rank(3)).unwrap();
        let f = product(&r, &toric2(3), 1).unwrap();
        assert!(f.detector_rows_match_template());
        let r = repetition(RepetitionSpec::cyclic(2)).unwrap();
        let f = product(&r, &toric3(2), 2).unwrap();
        assert!(f.detector_rows_match_template());
        assert!(f.has_single_shot_blocks());
    }

    #[test]
    fn logical_representatives_have_zero_syndrome_and_unit_pairing() {
        let r = repetition(RepetitionSpec::cyclic(3)).unwrap();
        let f = product(&r, &toric2(3), 1).unwrap();
        let logicals = f.logical_representatives().unwrap();
        for rep in &logicals.primal_err {
            assert!(f.d_x().mul_vec(&rep.vector).is_zero());
        }
        for rep in &logicals.dual_err {
            assert!(f.d_z().mul_vec(&rep.vector).is_zero());
        }
        let d_ip1 = f.complex().boundary_or_zero(f.primal_grade() + 1);
        for rep in &logicals.primal_corr {
            assert!(d_ip1.mul_vec_transposed(&rep.vector).is_zero());
        }
        for rep in &logicals.dual_corr {
            assert!(d_ip1.mul_vec(&rep.vector).is_zero());
        }
        // canonical symplectic pairing
        for (a, corr) in logicals.primal_corr.iter().enumerate() {
            for (b, err) in logicals.primal_err.iter().enumerate() {
                assert_eq!(corr.vector.dot(&err.vector), a == b, "primal ({a},{b})");
            }
        }
        for (a, corr) in logicals.dual_corr.iter().enumerate() {
            for (b, err) in logicals.dual_err.iter().enumerate() {
                assert_eq!(corr.vector.dot(&err.vector), a == b, "dual ({a},{b})");
            }
        }
    }

    #[test]
    fn dual_correlation_weight_for_full_rank_rep() {
        // one dual correlation per ℓ_Z, acting as a copy of ℓ_Z on every bit layer
        let r = repetition(RepetitionSpec::full_rank(2)).unwrap();
        let f = product(&r, &toric2(3), 1).unwrap();
        let logicals = f.logical_representatives().unwrap();
        let ell: Vec<_> = logicals
            .dual_corr
            .iter()
            .filter(|t| t.family == Family::Ell)
            .collect();
        assert_eq!(ell.len(), 2);
        for rep in ell {
            assert_eq!(rep.vector.weight(), 2 * 3);
        }
    }

    #[test]
    fn subsystem_assembly_subspace_case_reduces_to_product() {
        let base = toric2(3);
        let h_x = base.boundary(1).unwrap().clone();
        let h_z = base.boundary(2).unwrap().transpose();
        let r_pcm = RepetitionSpec::full_rank(2).pcm().unwrap();
        let asm = subsystem_assembly(&h_x, &h_z, &h_x, &h_z, &r_pcm).unwrap();
        assert!(asm.chain_condition_holds);
        let rep = repetition(RepetitionSpec::full_rank(2)).unwrap();
        let f = product(&rep, &base, 1).unwrap();
        assert_eq!(&asm.d_x, f.d_x());
        assert_eq!(&asm.d_z, f.d_z());
    }

    #[test]
    fn subsystem_assembly_bacon_shor_style() {
        // 2x2 Bacon-Shor: gauge XX on rows, ZZ on columns; stabilizers are
        // the products (all-X and all-Z), padded to the gauge row count.
        let g_x = BinMatrix::from_dense(&[&[1, 1, 0, 0], &[0, 0, 1, 1]]);
        let g_z = BinMatrix::from_dense(&[&[1, 0, 1, 0], &[0, 1, 0, 1]]);
        let h_x = BinMatrix::from_dense(&[&[1, 1, 1, 1], &[0, 0, 0, 0]]);
        let h_z = BinMatrix::from_dense(&[&[1, 1, 1, 1], &[0, 0, 0, 0]]);
        let r_pcm = RepetitionSpec::full_rank(2).pcm().unwrap();
        let asm = subsystem_assembly(&g_x, &g_z, &h_x, &h_z, &r_pcm).unwrap();
        // proper subsystem code: strict chain condition fails and is recorded
        assert!(!asm.chain_condition_holds);
    }

    #[test]
    fn subsystem_assembly_rejects_stabilizer_outside_gauge_space() {
        let g_x = BinMatrix::from_dense(&[&[1, 1, 0, 0], &[0, 0, 1, 1]]);
        let g_z = BinMatrix::from_dense(&[&[1, 0, 1, 0], &[0, 1, 0, 1]]);
        let h_x = BinMatrix::from_dense(&[&[1, 0, 0, 0], &[0, 0, 0, 0]]);
        let h_z = BinMatrix::from_dense(&[&[1, 1, 1, 1], &[0, 0, 0, 0]]);
        let r_pcm = RepetitionSpec::full_rank(2).pcm().unwrap();
        match subsystem_assembly(&g_x, &g_z, &h_x, &h_z, &r_pcm) {
            Err(FoliationError::SubsystemPrecondition(issues)) => {
                assert!(issues.iter().any(|m| m.contains("rowspace")));
            }
            other => panic!("expected precondition failure, got {other:?}"),
        }
    }

    #[test]
    fn fault_complex_serialization_round_trip() {
        let r = repetition(RepetitionSpec::cyclic(2)).unwrap();
        let f = product(&r, &toric2(3), 1).unwrap();
        let json = serde_json::to_string(&f).unwrap();
        let back: FaultComplex = serde_json::from_str(&json).unwrap();
        assert_eq!(back.complex(), f.complex());
        assert_eq!(back.primal_grade(), f.primal_grade());
    }
}
