//! Base-complex constructors: repetition/interval codes and D-dimensional
//! toric codes built as iterated products of circle complexes.

use crate::chain::ChainComplex;
use crate::foliation::product_complex;
use crate::gf2::BinMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CodeError {
    #[error("cyclic repetition code needs delta >= 2 (delta = 1 gives a zero row)")]
    CyclicTooShort,
    #[error("repetition code needs delta >= 1")]
    DeltaZero,
    #[error("toric dimension must be 2, 3 or 4 (got {0})")]
    BadToricDimension(usize),
    #[error("toric linear size must be >= 2 (got {0})")]
    BadToricSize(usize),
    #[error("interval product needs between 2 and 4 axes (got {0})")]
    BadAxisCount(usize),
    #[error("malformed code spec '{0}'")]
    BadSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepetitionVariant {
    /// `(δ−1) × δ` bidiagonal PCM; full row rank, trivial H_0 and H^0.
    FullRank,
    /// `δ × δ` circulant PCM with one redundant row (the cycle graph).
    Cyclic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepetitionSpec {
    pub delta: usize,
    pub variant: RepetitionVariant,
}

impl RepetitionSpec {
    pub fn full_rank(delta: usize) -> Self {
        Self {
            delta,
            variant: RepetitionVariant::FullRank,
        }
    }

    pub fn cyclic(delta: usize) -> Self {
        Self {
            delta,
            variant: RepetitionVariant::Cyclic,
        }
    }

    pub fn pcm(&self) -> Result<BinMatrix, CodeError> {
        if self.delta == 0 {
            return Err(CodeError::DeltaZero);
        }
        match self.variant {
            RepetitionVariant::FullRank => {
                let mut m = BinMatrix::zeros(self.delta - 1, self.delta);
                for i in 0..self.delta - 1 {
                    m.set(i, i, true);
                    m.set(i, i + 1, true);
                }
                Ok(m)
            }
            RepetitionVariant::Cyclic => {
                if self.delta < 2 {
                    return Err(CodeError::CyclicTooShort);
                }
                let mut m = BinMatrix::zeros(self.delta, self.delta);
                for i in 0..self.delta {
                    m.set(i, i, true);
                    m.set(i, (i + 1) % self.delta, true);
                }
                Ok(m)
            }
        }
    }
}

/// Length-1 complex of a repetition code.
pub fn repetition(spec: RepetitionSpec) -> Result<ChainComplex, CodeError> {
    Ok(ChainComplex::from_map(spec.pcm()?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToricSpec {
    pub dimension: usize,
    pub size: usize,
}

impl ToricSpec {
    pub fn new(dimension: usize, size: usize) -> Result<Self, CodeError> {
        if !(2..=4).contains(&dimension) {
            return Err(CodeError::BadToricDimension(dimension));
        }
        if size < 2 {
            return Err(CodeError::BadToricSize(size));
        }
        Ok(Self { dimension, size })
    }

    /// Grade carrying the qubits: 1 for 2D, 2 for 3D and 4D. With qubits at
    /// grade 2 of the 3D code the Z side is the single-shot side.
    pub fn qubit_grade(&self) -> usize {
        self.dimension.min(3) - 1
    }
}

/// D-fold iterated product of cyclic circle complexes of circumference L.
pub fn toric(spec: ToricSpec) -> Result<ChainComplex, CodeError> {
    let circle = RepetitionSpec::cyclic(spec.size).pcm()?;
    let mut complex = ChainComplex::from_map(circle.clone());
    for _ in 1..spec.dimension {
        complex = product_complex(&circle, &complex);
    }
    Ok(complex)
}

/// Boundary condition along one axis of an interval product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisVariant {
    /// Full-rank interval PCM, `(L−1) × L`.
    Open,
    /// Transposed full-rank interval PCM, `L × (L−1)` (smooth boundary).
    Smooth,
    /// Cyclic PCM, `L × L` (periodic axis).
    Periodic,
}

impl AxisVariant {
    pub fn pcm(&self, size: usize) -> Result<BinMatrix, CodeError> {
        match self {
            AxisVariant::Open => RepetitionSpec::full_rank(size).pcm(),
            AxisVariant::Smooth => Ok(RepetitionSpec::full_rank(size).pcm()?.transpose()),
            AxisVariant::Periodic => RepetitionSpec::cyclic(size).pcm(),
        }
    }

    pub fn letter(&self) -> char {
        match self {
            AxisVariant::Open => 'o',
            AxisVariant::Smooth => 's',
            AxisVariant::Periodic => 'p',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        match c {
            'o' => Some(AxisVariant::Open),
            's' => Some(AxisVariant::Smooth),
            'p' => Some(AxisVariant::Periodic),
            _ => None,
        }
    }
}

/// Product of per-axis length-1 complexes; 2 to 4 axes.
pub fn interval_product_code(axes: &[AxisVariant], size: usize) -> Result<ChainComplex, CodeError> {
    if !(2..=4).contains(&axes.len()) {
        return Err(CodeError::BadAxisCount(axes.len()));
    }
    let mut complex = ChainComplex::from_map(axes[axes.len() - 1].pcm(size)?);
    for axis in axes[..axes.len() - 1].iter().rev() {
        complex = product_complex(&axis.pcm(size)?, &complex);
    }
    Ok(complex)
}

/// A parsed base-code spec, as used on the command line and in configs:
/// `rep:cyclic:δ`, `rep:full:δ`, `toric:D:L`, `surface:pattern:L`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum CodeSpec {
    Repetition(RepetitionSpec),
    Toric(ToricSpec),
    Surface { axes: Vec<AxisVariant>, size: usize },
}

impl CodeSpec {
    pub fn parse(s: &str) -> Result<Self, CodeError> {
        let bad = || CodeError::BadSpec(s.to_string());
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["rep", variant, delta] => {
                let delta: usize = delta.parse().map_err(|_| bad())?;
                let variant = match *variant {
                    "cyclic" => RepetitionVariant::Cyclic,
                    "full" => RepetitionVariant::FullRank,
                    _ => return Err(bad()),
                };
                let spec = RepetitionSpec { delta, variant };
                spec.pcm()?;
                Ok(CodeSpec::Repetition(spec))
            }
            ["toric", d, l] => {
                let d: usize = d.parse().map_err(|_| bad())?;
                let l: usize = l.parse().map_err(|_| bad())?;
                Ok(CodeSpec::Toric(ToricSpec::new(d, l)?))
            }
            ["surface", pattern, l] => {
                let size: usize = l.parse().map_err(|_| bad())?;
                let axes: Option<Vec<AxisVariant>> =
                    pattern.chars().map(AxisVariant::from_letter).collect();
                let axes = axes.ok_or_else(bad)?;
                if !(2..=4).contains(&axes.len()) {
                    return Err(CodeError::BadAxisCount(axes.len()));
                }
                Ok(CodeSpec::Surface { axes, size })
            }
            _ => Err(bad()),
        }
    }

    pub fn build(&self) -> Result<ChainComplex, CodeError> {
        match self {
            CodeSpec::Repetition(spec) => repetition(*spec),
            CodeSpec::Toric(spec) => toric(*spec),
            CodeSpec::Surface { axes, size } => interval_product_code(axes, *size),
        }
    }

    /// Qubit grade of the built complex.
    pub fn qubit_grade(&self) -> usize {
        match self {
            CodeSpec::Repetition(_) => 1,
            CodeSpec::Toric(spec) => spec.qubit_grade(),
            CodeSpec::Surface { axes, .. } => axes.len().min(3) - 1,
        }
    }

    /// Spatial dimension, for result rows.
    pub fn dimension(&self) -> usize {
        match self {
            CodeSpec::Repetition(_) => 1,
            CodeSpec::Toric(spec) => spec.dimension,
            CodeSpec::Surface { axes, .. } => axes.len(),
        }
    }

    /// Linear size, for result rows.
    pub fn linear_size(&self) -> usize {
        match self {
            CodeSpec::Repetition(spec) => spec.delta,
            CodeSpec::Toric(spec) => spec.size,
            CodeSpec::Surface { size, .. } => *size,
        }
    }
}

impl std::fmt::Display for CodeSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CodeSpec::Repetition(spec) => {
                let v = match spec.variant {
                    RepetitionVariant::Cyclic => "cyclic",
                    RepetitionVariant::FullRank => "full",
                };
                write!(f, "rep:{v}:{}", spec.delta)
            }
            CodeSpec::Toric(spec) => write!(f, "toric:{}:{}", spec.dimension, spec.size),
            CodeSpec::Surface { axes, size } => {
                let pattern: String = axes.iter().map(AxisVariant::letter).collect();
                write!(f, "surface:{pattern}:{size}")
            }
        }
    }
}

impl TryFrom<String> for CodeSpec {
    type Error = CodeError;
    fn try_from(s: String) -> Result<Self, CodeError> {
        CodeSpec::parse(&s)
    }
}

impl From<CodeSpec> for String {
    fn from(c: CodeSpec) -> String {
        c.to_string()
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let mut acc = 1usize;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Expected grade-j dimension of the D-dimensional toric code, `C(D,j)·L^D`.
pub fn toric_grade_dim(dimension: usize, size: usize, grade: usize) -> usize {
    binomial(dimension, grade) * size.pow(dimension as u32)
}
