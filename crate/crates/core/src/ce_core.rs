//! Code equivalence instances, witnesses and the column/rank preprocessing
//! that every permutation-equivalence reduction starts from.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::ff::Field;
use crate::matf::{find_change_of_basis, solve_change_of_basis, Mat, MatError, MonoMat, PermMat};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CeError {
    #[error(transparent)]
    Mat(#[from] MatError),
    #[error("generator matrices differ in shape: {0:?} vs {1:?}")]
    ShapeMismatch((usize, usize), (usize, usize)),
    #[error("witness does not match the instance: {0}")]
    WitnessShape(String),
    #[error("invalid witness: {0}")]
    WitnessInvalid(String),
    #[error("operation requires a PCE instance, got {0}")]
    NotPce(ProblemTag),
    #[error("journal does not match the instance: {0}")]
    JournalMismatch(String),
}

/// Which matrix group the equivalence may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProblemTag {
    /// Permutations.
    Pce,
    /// Permutations with `+-1` column signs.
    Spce,
    /// Permutations with arbitrary non-zero column scalars.
    Lce,
}

impl ProblemTag {
    pub fn as_str(self) -> &'static str {
        match self {
            ProblemTag::Pce => "PCE",
            ProblemTag::Spce => "SPCE",
            ProblemTag::Lce => "LCE",
        }
    }

    /// The column scalars this tag allows, in increasing encoding order.
    pub fn scalars(self, field: &Field) -> Vec<crate::ff::Elem> {
        match self {
            ProblemTag::Pce => vec![crate::ff::Elem::ONE],
            ProblemTag::Spce => field.signs(),
            ProblemTag::Lce => field.nonzero().collect(),
        }
    }

    /// Whether `m` belongs to this tag's matrix group.
    pub fn admits(self, field: &Field, m: &MonoMat) -> bool {
        match self {
            ProblemTag::Pce => m.is_permutation(),
            ProblemTag::Spce => m.is_signed(field),
            ProblemTag::Lce => true,
        }
    }
}

impl fmt::Display for ProblemTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "PCE" => Ok(ProblemTag::Pce),
            "SPCE" => Ok(ProblemTag::Spce),
            "LCE" => Ok(ProblemTag::Lce),
            _ => Err(format!("unknown problem tag `{s}` (expected PCE, SPCE or LCE)")),
        }
    }
}

/// A pair of `k x n` generator matrices over one field plus the problem tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CEInstance {
    g: Mat,
    h: Mat,
    tag: ProblemTag,
}

impl CEInstance {
    pub fn new(g: Mat, h: Mat, tag: ProblemTag) -> Result<CEInstance, CeError> {
        if g.field() != h.field() {
            return Err(MatError::FieldMismatch.into());
        }
        if g.shape() != h.shape() {
            return Err(CeError::ShapeMismatch(g.shape(), h.shape()));
        }
        Ok(CEInstance { g, h, tag })
    }

    pub fn g(&self) -> &Mat {
        &self.g
    }

    pub fn h(&self) -> &Mat {
        &self.h
    }

    pub fn tag(&self) -> ProblemTag {
        self.tag
    }

    pub fn field(&self) -> &Field {
        self.g.field()
    }

    pub fn k(&self) -> usize {
        self.g.rows()
    }

    pub fn n(&self) -> usize {
        self.g.cols()
    }

    pub fn with_tag(&self, tag: ProblemTag) -> CEInstance {
        CEInstance { g: self.g.clone(), h: self.h.clone(), tag }
    }
}

/// `(S, M)` claimed to satisfy `S*G*M = H`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub s: Mat,
    pub m: MonoMat,
}

impl Witness {
    pub fn new(s: Mat, m: MonoMat) -> Witness {
        Witness { s, m }
    }

    pub fn identity(field: &Field, k: usize, n: usize) -> Witness {
        Witness { s: Mat::identity(field, k), m: MonoMat::identity(n) }
    }
}

/// Exact check of `S*G*M = H`, invertibility of `S`, and that `M` lies in the
/// group named by the instance tag.
pub fn verify_witness(inst: &CEInstance, w: &Witness) -> Result<bool, CeError> {
    let (k, n) = (inst.k(), inst.n());
    if w.s.shape() != (k, k) {
        return Err(CeError::WitnessShape(format!("S is {:?}, expected {k}x{k}", w.s.shape())));
    }
    if w.m.len() != n {
        return Err(CeError::WitnessShape(format!("M has size {}, expected {n}", w.m.len())));
    }
    if w.s.field() != inst.field() {
        return Err(MatError::FieldMismatch.into());
    }
    if !inst.tag.admits(inst.field(), &w.m) || !w.s.is_invertible() {
        return Ok(false);
    }
    Ok(w.s.mul(&inst.g)?.apply_mono(&w.m)? == inst.h)
}

/// Why preprocessing refuted an instance without search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RejectReason {
    ProfileMismatch,
    ZeroColumnCountMismatch,
    RankMismatch,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::ProfileMismatch => "ProfileMismatch",
            RejectReason::ZeroColumnCountMismatch => "ZeroColumnCountMismatch",
            RejectReason::RankMismatch => "RankMismatch",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RejectReason {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ProfileMismatch" => Ok(RejectReason::ProfileMismatch),
            "ZeroColumnCountMismatch" => Ok(RejectReason::ZeroColumnCountMismatch),
            "RankMismatch" => Ok(RejectReason::RankMismatch),
            _ => Err(format!("unknown reject reason `{s}`")),
        }
    }
}

/// What preprocessing removed, enough to move witnesses back and forth.
/// The normalized matrices themselves are not stored: they are the RREF of the
/// stripped originals and can be recomputed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Journal {
    /// Original blocklength.
    pub n: usize,
    /// Original number of rows.
    pub k: usize,
    /// 0-based zero columns of `G` and `H`, ascending.
    pub removed_g: Vec<usize>,
    pub removed_h: Vec<usize>,
    /// Common rank, i.e. the row count of the normalized matrices.
    pub rank: usize,
}

impl Journal {
    fn kept(&self, removed: &[usize]) -> Vec<usize> {
        (0..self.n).filter(|i| removed.binary_search(i).is_err()).collect()
    }

    pub fn kept_g(&self) -> Vec<usize> {
        self.kept(&self.removed_g)
    }

    pub fn kept_h(&self) -> Vec<usize> {
        self.kept(&self.removed_h)
    }

    /// Blocklength after stripping.
    pub fn stripped_n(&self) -> usize {
        self.n - self.removed_g.len()
    }

    fn check(&self, original: &CEInstance) -> Result<(), CeError> {
        if original.n() != self.n || original.k() != self.k {
            return Err(CeError::JournalMismatch(format!(
                "journal is for {}x{}, instance is {}x{}",
                self.k,
                self.n,
                original.k(),
                original.n()
            )));
        }
        if self.removed_g.len() != self.removed_h.len() {
            return Err(CeError::JournalMismatch("zero column counts differ".into()));
        }
        let zeros = |m: &Mat| (0..m.cols()).filter(|&c| m.is_zero_column(c)).collect::<Vec<_>>();
        if zeros(original.g()) != self.removed_g || zeros(original.h()) != self.removed_h {
            return Err(CeError::JournalMismatch("zero columns differ".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PreprocessOutcome {
    /// Cheap invariants already refute equivalence.
    Reject(RejectReason),
    /// Zero columns removed and both generators replaced by their RREF rows.
    Normalized { instance: CEInstance, journal: Journal },
    /// Non-PCE instances are passed through untouched.
    Unchanged,
}

/// Column-multiplicity, zero-column and rank checks followed by normalization.
///
/// Checks run in this order: column multiplicity profiles of the unstripped
/// matrices (zero column counted as a value), zero-column counts, ranks.
pub fn preprocess(inst: &CEInstance) -> PreprocessOutcome {
    if inst.tag != ProblemTag::Pce {
        return PreprocessOutcome::Unchanged;
    }
    if inst.g.column_multiplicity_profile() != inst.h.column_multiplicity_profile() {
        return PreprocessOutcome::Reject(RejectReason::ProfileMismatch);
    }
    let (gs, removed_g) = inst.g.strip_zero_columns();
    let (hs, removed_h) = inst.h.strip_zero_columns();
    if removed_g.len() != removed_h.len() {
        return PreprocessOutcome::Reject(RejectReason::ZeroColumnCountMismatch);
    }
    let (g_basis, h_basis) = (gs.row_basis(), hs.row_basis());
    if g_basis.rows() != h_basis.rows() {
        return PreprocessOutcome::Reject(RejectReason::RankMismatch);
    }
    let journal = Journal { n: inst.n(), k: inst.k(), removed_g, removed_h, rank: g_basis.rows() };
    let instance = CEInstance::new(g_basis, h_basis, ProblemTag::Pce).expect("same shape and field");
    PreprocessOutcome::Normalized { instance, journal }
}

/// Maps a witness of the original instance to one of the normalized instance.
pub fn map_witness_into_preprocess(
    original: &CEInstance,
    journal: &Journal,
    normalized: &CEInstance,
    w: &Witness,
) -> Result<Witness, CeError> {
    journal.check(original)?;
    if !verify_witness(original, w)? {
        return Err(CeError::WitnessInvalid("witness does not verify on the original instance".into()));
    }
    let (kept_g, kept_h) = (journal.kept_g(), journal.kept_h());
    let mut pos_in_g = vec![usize::MAX; journal.n];
    for (t, &c) in kept_g.iter().enumerate() {
        pos_in_g[c] = t;
    }
    let sigma = kept_h
        .iter()
        .map(|&i| {
            let t = pos_in_g[w.m.perm().apply(i)];
            // A valid witness never sends a non-zero column onto a zero one.
            (t != usize::MAX).then_some(t).ok_or_else(|| CeError::WitnessInvalid("non-zero column mapped to zero".into()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let diag = kept_g.iter().map(|&c| w.m.diag()[c]).collect();
    let m = MonoMat::new(PermMat::from_sigma(sigma)?, diag)?;
    let gm = normalized.g.apply_mono(&m)?;
    let s = solve_change_of_basis(&gm, &normalized.h)?
        .ok_or_else(|| CeError::WitnessInvalid("normalized row spaces do not match".into()))?;
    let out = Witness::new(s, m);
    if !verify_witness(normalized, &out)? {
        return Err(CeError::WitnessInvalid("mapped witness does not verify on the normalized instance".into()));
    }
    Ok(out)
}

/// Maps a witness of the normalized instance back to the original instance.
///
/// Zero columns are paired in ascending index order; `S` is recomputed against
/// the original generators, so the result verifies even when the originals
/// are rank deficient.
pub fn map_witness_through_preprocess(original: &CEInstance, journal: &Journal, w: &Witness) -> Result<Witness, CeError> {
    journal.check(original)?;
    let (kept_g, kept_h) = (journal.kept_g(), journal.kept_h());
    if w.m.len() != kept_g.len() {
        return Err(CeError::WitnessShape(format!("M has size {}, expected {}", w.m.len(), kept_g.len())));
    }
    let mut sigma = vec![0; journal.n];
    let mut diag = vec![crate::ff::Elem::ONE; journal.n];
    for (t, &i) in kept_h.iter().enumerate() {
        sigma[i] = kept_g[w.m.perm().apply(t)];
    }
    for (t, &c) in kept_g.iter().enumerate() {
        diag[c] = w.m.diag()[t];
    }
    for (&i, &c) in journal.removed_h.iter().zip(&journal.removed_g) {
        sigma[i] = c;
    }
    let m = MonoMat::new(PermMat::from_sigma(sigma)?, diag)?;
    let gm = original.g.apply_mono(&m)?;
    let s = find_change_of_basis(&gm, &original.h)?
        .ok_or_else(|| CeError::WitnessInvalid("no change of basis on the original instance".into()))?;
    let out = Witness::new(s, m);
    if !verify_witness(original, &out)? {
        return Err(CeError::WitnessInvalid("mapped witness does not verify on the original instance".into()));
    }
    Ok(out)
}
