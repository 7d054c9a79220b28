//! The gadget reduction from permutation code equivalence to linear and
//! signed-permutation code equivalence, with constructive witness maps in
//! both directions.
//!
//! For a `k x n` generator `A` and a multiplier `m` (one more than the largest
//! column multiplicity of `A`) the gadget is the `(k+1) x (n + 2nm + 1)` matrix
//!
//! ```text
//!   [ A      | A[1] x m, ..., A[n] x m | 0 ... 0 ]
//!   [ 1 .. 1 | 0 ..................  0 | 1 ... 1 ]
//!     block 1  block 2 (n*m columns)     block 3 (n*m + 1 columns)
//! ```
//!
//! The repeated copies in block 2 and the large all-`e_{k+1}` block 3 pin any
//! monomial equivalence of two gadgets to act block-wise, and the row of ones
//! under block 1 forces a single common scalar on the original columns, so a
//! monomial (or signed) equivalence of the gadgets collapses to a permutation
//! equivalence of the inputs.

use std::fmt;
use std::ops::Range;

use thiserror::Error;

use crate::ce_core::{
    map_witness_into_preprocess, map_witness_through_preprocess, preprocess, verify_witness, CEInstance, CeError,
    Journal, PreprocessOutcome, ProblemTag, RejectReason, Witness,
};
use crate::ff::{Elem, Field};
use crate::matf::{Mat, MatError, MonoMat, PermMat};

/// A structural property of gadget witnesses that failed to hold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StructureViolation {
    /// The permutation sends a column of one block into another block.
    BlockPreservation { block: usize, column: usize, image: usize },
    /// `S'[i, k]` is non-zero for some `i < k`.
    BasisChangeLastColumn { row: usize },
    /// `S'[k, j]` is non-zero for some `j < k`.
    BasisChangeLastRow { col: usize },
    /// `S'[k, k]` is zero.
    BasisChangeCorner,
    /// Block-1 columns are not all scaled by the same scalar.
    NonUniformScalar { column: usize },
    /// SPCE witness with a block-1 scalar other than `+-1`.
    ScalarNotSign,
    /// The extracted permutation witness fails on the original pair.
    ExtractedWitnessFails,
}

impl fmt::Display for StructureViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StructureViolation::BlockPreservation { block, column, image } => write!(
                f,
                "block preservation: column {} of block {block} is read from column {} outside the block",
                column + 1,
                image + 1
            ),
            StructureViolation::BasisChangeLastColumn { row } => {
                write!(f, "basis-change block form: last column has a non-zero entry in row {}", row + 1)
            }
            StructureViolation::BasisChangeLastRow { col } => {
                write!(f, "basis-change block form: last row has a non-zero entry in column {}", col + 1)
            }
            StructureViolation::BasisChangeCorner => write!(f, "basis-change block form: bottom-right entry is zero"),
            StructureViolation::NonUniformScalar { column } => {
                write!(f, "uniform block-1 scalar: column {} is scaled differently from column 1", column + 1)
            }
            StructureViolation::ScalarNotSign => write!(f, "uniform block-1 scalar: scalar is not a sign"),
            StructureViolation::ExtractedWitnessFails => {
                write!(f, "extracted permutation witness does not verify on the source pair")
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReductionError {
    #[error(transparent)]
    Ce(#[from] CeError),
    #[error(transparent)]
    Mat(#[from] MatError),
    #[error("reduction input must be a PCE instance, got {0}")]
    NotPce(ProblemTag),
    #[error("multiplier m must be at least 1")]
    ZeroMultiplier,
    #[error("gadget lost full row rank")]
    RankNotPreserved,
    #[error("blowup identity violated: {0}")]
    Blowup(String),
    #[error("invalid witness: {0}")]
    WitnessInvalid(String),
    #[error("structure violation ({0})")]
    Structure(StructureViolation),
}

/// Bookkeeping of one gadget reduction: source dimensions and the multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ReductionCert {
    /// Source blocklength.
    pub n: usize,
    /// Source dimension.
    pub k: usize,
    pub m: usize,
}

impl ReductionCert {
    pub fn n_prime(&self) -> usize {
        self.n + 2 * self.n * self.m + 1
    }

    pub fn k_prime(&self) -> usize {
        self.k + 1
    }

    /// 0-based column ranges of the three blocks.
    pub fn block1(&self) -> Range<usize> {
        0..self.n
    }

    pub fn block2(&self) -> Range<usize> {
        self.n..self.n + self.n * self.m
    }

    pub fn block3(&self) -> Range<usize> {
        self.n + self.n * self.m..self.n_prime()
    }

    fn block_of(&self, x: usize) -> usize {
        if x < self.n {
            1
        } else if x < self.n + self.n * self.m {
            2
        } else {
            3
        }
    }

    /// Checks `n' = n + 2nm + 1`, `k' = k + 1` and full row rank of both sides.
    pub fn check_blowup(&self, reduced: &CEInstance) -> Result<(), ReductionError> {
        if reduced.n() != self.n + 2 * self.n * self.m + 1 || reduced.k() != self.k + 1 {
            return Err(ReductionError::Blowup(format!(
                "reduced shape {}x{}, expected {}x{}",
                reduced.k(),
                reduced.n(),
                self.k + 1,
                self.n + 2 * self.n * self.m + 1
            )));
        }
        if !reduced.g().has_full_row_rank() || !reduced.h().has_full_row_rank() {
            return Err(ReductionError::RankNotPreserved);
        }
        Ok(())
    }
}

/// Builds the gadget matrix of `a` with multiplier `m`.
pub fn construct_prime(a: &Mat, m: usize) -> Result<Mat, ReductionError> {
    if m == 0 {
        return Err(ReductionError::ZeroMultiplier);
    }
    let (k, n) = a.shape();
    let n_prime = n + 2 * n * m + 1;
    let mut out = Mat::zeros(a.field(), k + 1, n_prime);
    for i in 0..n {
        for r in 0..k {
            let v = a.get(r, i);
            out.set(r, i, v);
            for j in 0..m {
                out.set(r, n + i * m + j, v);
            }
        }
        out.set(k, i, Elem::ONE);
    }
    for x in n + n * m..n_prime {
        out.set(k, x, Elem::ONE);
    }
    if a.has_full_row_rank() && !out.has_full_row_rank() {
        return Err(ReductionError::RankNotPreserved);
    }
    Ok(out)
}

/// `G0 = [1 1]`, `H0 = [1 0]`: not equivalent under any monomial map over any
/// field, since only one of the two row spaces contains a weight-1 vector.
pub fn canonical_no_instance(field: &Field, tag: ProblemTag) -> CEInstance {
    let g = Mat::from_rows(field, 1, 2, &[[1u64, 1]]).expect("valid");
    let h = Mat::from_rows(field, 1, 2, &[[1u64, 0]]).expect("valid");
    CEInstance::new(g, h, tag).expect("same shape")
}

/// `G0 = H0 = [1]`.
pub fn canonical_yes_instance(field: &Field, tag: ProblemTag) -> CEInstance {
    let one = Mat::identity(field, 1);
    CEInstance::new(one.clone(), one, tag).expect("same shape")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReductionOutcome {
    /// The gadget was applied to the normalized pair.
    Gadget { cert: ReductionCert, normalized: CEInstance, journal: Journal },
    /// Preprocessing refuted the input; the output is the canonical NO pair.
    Rejected(RejectReason),
    /// Both inputs consist of zero columns only; the output is the canonical YES pair.
    EmptyCode { journal: Journal },
}

/// Output of [`reduce_pce`]: the target instance plus what is needed to move
/// witnesses between source and target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reduction {
    pub target: ProblemTag,
    pub instance: CEInstance,
    pub outcome: ReductionOutcome,
}

/// Karp reduction of a PCE instance to an instance of `target`.
pub fn reduce_pce(inst: &CEInstance, target: ProblemTag) -> Result<Reduction, ReductionError> {
    if inst.tag() != ProblemTag::Pce {
        return Err(ReductionError::NotPce(inst.tag()));
    }
    let field = inst.field();
    match preprocess(inst) {
        PreprocessOutcome::Reject(reason) => Ok(Reduction {
            target,
            instance: canonical_no_instance(field, target),
            outcome: ReductionOutcome::Rejected(reason),
        }),
        PreprocessOutcome::Normalized { instance: normalized, journal } => {
            if normalized.n() == 0 {
                return Ok(Reduction {
                    target,
                    instance: canonical_yes_instance(field, target),
                    outcome: ReductionOutcome::EmptyCode { journal },
                });
            }
            let m_g = normalized.g().column_multiplicity_profile().max();
            debug_assert_eq!(m_g, normalized.h().column_multiplicity_profile().max());
            let cert = ReductionCert { n: normalized.n(), k: normalized.k(), m: m_g + 1 };
            Reduction::with_cert(normalized, journal, cert, target)
        }
        PreprocessOutcome::Unchanged => unreachable!("PCE instances are always preprocessed"),
    }
}

impl Reduction {
    /// Applies the gadget with the given certificate to an already normalized pair.
    pub fn with_cert(
        normalized: CEInstance,
        journal: Journal,
        cert: ReductionCert,
        target: ProblemTag,
    ) -> Result<Reduction, ReductionError> {
        if normalized.n() != cert.n || normalized.k() != cert.k {
            return Err(ReductionError::Blowup(format!(
                "certificate is for {}x{}, normalized pair is {}x{}",
                cert.k,
                cert.n,
                normalized.k(),
                normalized.n()
            )));
        }
        let g = construct_prime(normalized.g(), cert.m)?;
        let h = construct_prime(normalized.h(), cert.m)?;
        let instance = CEInstance::new(g, h, target)?;
        cert.check_blowup(&instance)?;
        Ok(Reduction { target, instance, outcome: ReductionOutcome::Gadget { cert, normalized, journal } })
    }

    pub fn cert(&self) -> Option<&ReductionCert> {
        match &self.outcome {
            ReductionOutcome::Gadget { cert, .. } => Some(cert),
            _ => None,
        }
    }

    /// Maps a PCE witness of the original instance to a witness of the reduced one.
    pub fn lift(&self, original: &CEInstance, w: &Witness) -> Result<Witness, ReductionError> {
        let lifted = match &self.outcome {
            ReductionOutcome::Gadget { cert, normalized, journal } => {
                let wn = map_witness_into_preprocess(original, journal, normalized, w)?;
                lift_witness(cert, &wn)?
            }
            ReductionOutcome::Rejected(reason) => {
                return Err(ReductionError::WitnessInvalid(format!(
                    "the source pair was refuted by preprocessing ({reason}); no witness can exist"
                )))
            }
            ReductionOutcome::EmptyCode { .. } => {
                if !verify_witness(original, w)? {
                    return Err(ReductionError::WitnessInvalid("witness does not verify on the source pair".into()));
                }
                Witness::identity(original.field(), 1, 1)
            }
        };
        if !verify_witness(&self.instance, &lifted)? {
            return Err(ReductionError::WitnessInvalid("lifted witness does not verify on the reduced pair".into()));
        }
        Ok(lifted)
    }

    /// Maps a witness of the reduced instance back to a PCE witness of the original.
    pub fn extract(&self, original: &CEInstance, w: &Witness) -> Result<Witness, ReductionError> {
        match &self.outcome {
            ReductionOutcome::Gadget { cert, normalized, journal } => {
                let wn = extract_witness(cert, normalized.g(), normalized.h(), self.target, w)?;
                Ok(map_witness_through_preprocess(original, journal, &wn)?)
            }
            ReductionOutcome::Rejected(_) => {
                let ok = verify_witness(&self.instance, w)?;
                Err(ReductionError::WitnessInvalid(if ok {
                    "witness verifies on the canonical NO pair".into()
                } else {
                    "witness does not verify on the reduced pair".into()
                }))
            }
            ReductionOutcome::EmptyCode { journal } => {
                if !verify_witness(&self.instance, w)? {
                    return Err(ReductionError::WitnessInvalid("witness does not verify on the reduced pair".into()));
                }
                let empty = Witness::new(Mat::zeros(original.field(), 0, 0), MonoMat::identity(0));
                Ok(map_witness_through_preprocess(original, journal, &empty)?)
            }
        }
    }
}

/// Lifts a permutation witness `(S, P)` of `(G, H)` to `(S', P')` for the
/// gadget pair: `S' = diag(S, 1)`; `P'` permutes block 1 by `P`, moves each
/// run of `m` copies in block 2 along with its block-1 column, and fixes block 3.
pub fn lift_witness(cert: &ReductionCert, w: &Witness) -> Result<Witness, ReductionError> {
    let (n, k, m) = (cert.n, cert.k, cert.m);
    if w.s.shape() != (k, k) || w.m.len() != n {
        return Err(ReductionError::WitnessInvalid(format!(
            "witness is for {}x{}, certificate for {k}x{n}",
            w.s.rows(),
            w.m.len()
        )));
    }
    if !w.m.is_permutation() {
        return Err(ReductionError::WitnessInvalid("lifting needs an unscaled permutation".into()));
    }
    let field = w.s.field();
    let mut s = Mat::zeros(field, k + 1, k + 1);
    for r in 0..k {
        for c in 0..k {
            s.set(r, c, w.s.get(r, c));
        }
    }
    s.set(k, k, Elem::ONE);

    let sigma = w.m.perm();
    let mut lifted: Vec<usize> = (0..cert.n_prime()).collect();
    for x in 0..n {
        lifted[x] = sigma.apply(x);
    }
    for i in 0..n {
        for j in 0..m {
            lifted[n + m * i + j] = n + m * sigma.apply(i) + j;
        }
    }
    Ok(Witness::new(s, MonoMat::from_perm(PermMat::from_sigma(lifted)?)))
}

/// Recovers a permutation witness of `(G, H)` from a monomial (or signed)
/// witness of the gadget pair, asserting along the way that
/// (a) the permutation preserves the three column blocks,
/// (b) `S'` is block diagonal with a non-zero bottom-right entry, and
/// (c) all block-1 columns carry one common scalar `a`.
/// Returns `(a*S, P)` where `S` is the top-left `k x k` block of `S'`.
pub fn extract_witness(
    cert: &ReductionCert,
    g: &Mat,
    h: &Mat,
    tag: ProblemTag,
    w: &Witness,
) -> Result<Witness, ReductionError> {
    let (n, k) = (cert.n, cert.k);
    if g.shape() != (k, n) || h.shape() != (k, n) {
        return Err(ReductionError::Blowup(format!("source pair is {:?}, certificate says {k}x{n}", g.shape())));
    }
    let reduced = CEInstance::new(construct_prime(g, cert.m)?, construct_prime(h, cert.m)?, tag)?;
    if !verify_witness(&reduced, w)? {
        return Err(ReductionError::WitnessInvalid("witness does not verify on the reduced pair".into()));
    }
    let field = g.field();
    let sigma = w.m.perm();
    let violation = |v| Err(ReductionError::Structure(v));

    for x in 0..cert.n_prime() {
        let (bx, by) = (cert.block_of(x), cert.block_of(sigma.apply(x)));
        if bx != by {
            return violation(StructureViolation::BlockPreservation { block: bx, column: x, image: sigma.apply(x) });
        }
    }

    let s = &w.s;
    if let Some(row) = (0..k).find(|&r| !s.get(r, k).is_zero()) {
        return violation(StructureViolation::BasisChangeLastColumn { row });
    }
    if let Some(col) = (0..k).find(|&c| !s.get(k, c).is_zero()) {
        return violation(StructureViolation::BasisChangeLastRow { col });
    }
    if s.get(k, k).is_zero() {
        return violation(StructureViolation::BasisChangeCorner);
    }

    let diag = w.m.diag();
    let a = diag[0];
    if let Some(column) = (0..n).find(|&j| diag[j] != a) {
        return violation(StructureViolation::NonUniformScalar { column });
    }
    if tag == ProblemTag::Spce && !field.is_sign(a) {
        return violation(StructureViolation::ScalarNotSign);
    }

    let top = s.submatrix(0, k, 0, k).scale(a);
    let perm = PermMat::from_sigma((0..n).map(|x| sigma.apply(x)).collect())?;
    let out = Witness::new(top, MonoMat::from_perm(perm));
    let source = CEInstance::new(g.clone(), h.clone(), ProblemTag::Pce)?;
    if !verify_witness(&source, &out)? {
        return violation(StructureViolation::ExtractedWitnessFails);
    }
    Ok(out)
}
