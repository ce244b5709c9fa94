pub mod abe;
pub mod bench;
pub mod deletion;
pub mod error;
pub mod fogsim;
pub mod field;
pub mod group;
pub mod payload;
pub mod policy;
pub mod wire;

use num_rational::BigRational;

pub use error::{Error, Result};
pub use field::Field;
pub use group::{
    counter_scope, hash_to_group, hash_to_scalar, pair, GroupElem, OpCounter, Scalar, TargetElem,
};
pub use policy::{parse_policy, AccessPolicy, PolicyNode, DUMMY};

pub type LsssProgram = policy::LsssProgram<Scalar>;
pub type ShareVector = policy::ShareVector<Scalar>;
pub type ReconstructionPlan = policy::ReconstructionPlan<Scalar>;
/// Exact rational instantiation of the LSSS layer.
pub type RationalLsssProgram = policy::LsssProgram<BigRational>;
