//! Code equivalence over small finite fields: field and matrix arithmetic,
//! instances and witnesses, the gadget reduction from permutation equivalence
//! to linear and signed-permutation equivalence, and brute-force deciders.

pub mod ce_core;
pub mod ff;
pub mod matf;
pub mod oracle;
pub mod reduction;
