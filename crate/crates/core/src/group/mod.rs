//! Symmetric bilinear group `(G, G_T, Z_p)` over BLS12-381.
//!
//! BLS12-381 is an asymmetric (Type-3) curve. To expose the symmetric map
//! `e: G x G -> G_T` the protocol is written against, every [`GroupElem`]
//! carries a mirrored pair `(P1, P2)` in `G1 x G2`, and
//! `pair(a, b) = e(a.P1, b.P2)`. Elements derived from the generator by
//! exponentiation share one discrete log across both halves, so the map is
//! symmetric on them. Hashed elements ([`hash_to_group`]) are hashed into each
//! half independently; the map stays bilinear in each argument, which is all
//! the signature scheme needs.
//!
//! All arithmetic goes through this module so [`counter_scope`] sees it.

mod counter;
mod scalar;

use std::fmt;
use std::ops::Mul;

use ark_bls12_381::{g1, g2, Bls12_381, G1Affine, G1Projective, G2Affine, G2Projective};
use ark_ec::hashing::curve_maps::wb::WBMap;
use ark_ec::hashing::map_to_curve_hasher::MapToCurveBasedHasher;
use ark_ec::hashing::HashToCurve;
use ark_ec::pairing::{Pairing, PairingOutput};
use ark_ec::{CurveGroup, PrimeGroup};
use ark_ff::field_hashers::DefaultFieldHasher;
use ark_serialize::{CanonicalDeserialize, CanonicalSerialize};
use num_traits::Zero;
use sha2::Sha256;

pub use counter::{counter_scope, snapshot, OpCounter};
pub(crate) use counter::{record, Op};
pub use scalar::{hash_to_scalar, Scalar, SCALAR_BYTES};

const G1_BYTES: usize = 48;
const G2_BYTES: usize = 96;
/// Length of the canonical [`GroupElem`] encoding (compressed G1 then G2).
pub const GROUP_ELEM_BYTES: usize = G1_BYTES + G2_BYTES;
/// Length of the canonical [`TargetElem`] encoding.
pub const TARGET_ELEM_BYTES: usize = 576;

const DST_G1: &[u8] = b"CPAD-V01-CS01-with-BLS12381G1_XMD:SHA-256_SSWU_RO_";
const DST_G2: &[u8] = b"CPAD-V01-CS01-with-BLS12381G2_XMD:SHA-256_SSWU_RO_";

/// Element of the source group `G`.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct GroupElem {
    p1: G1Projective,
    p2: G2Projective,
}

/// Element of the target group `G_T`, written multiplicatively.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct TargetElem(PairingOutput<Bls12_381>);

impl GroupElem {
    pub fn generator() -> Self {
        GroupElem {
            p1: G1Projective::generator(),
            p2: G2Projective::generator(),
        }
    }

    pub fn identity() -> Self {
        GroupElem {
            p1: G1Projective::zero(),
            p2: G2Projective::zero(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.p1.is_zero() && self.p2.is_zero()
    }

    /// `self^e`; one `exp_G`.
    pub fn pow(&self, e: &Scalar) -> Self {
        record(Op::ExpG);
        GroupElem {
            p1: self.p1 * e.0,
            p2: self.p2 * e.0,
        }
    }

    /// `g^e` for the fixed generator; one `exp_G`.
    pub fn base_pow(e: &Scalar) -> Self {
        Self::generator().pow(e)
    }

    pub fn to_bytes(&self) -> [u8; GROUP_ELEM_BYTES] {
        let mut out = [0u8; GROUP_ELEM_BYTES];
        self.p1
            .into_affine()
            .serialize_compressed(&mut out[..G1_BYTES])
            .expect("fixed-size G1 encoding");
        self.p2
            .into_affine()
            .serialize_compressed(&mut out[G1_BYTES..])
            .expect("fixed-size G2 encoding");
        out
    }

    /// Canonical decode with on-curve and subgroup checks.
    pub fn from_bytes(bytes: &[u8]) -> crate::Result<Self> {
        if bytes.len() != GROUP_ELEM_BYTES {
            return Err(crate::Error::InvalidEncoding(format!(
                "group element must be {GROUP_ELEM_BYTES} bytes, got {}",
                bytes.len()
            )));
        }
        let p1 = G1Affine::deserialize_compressed(&bytes[..G1_BYTES])
            .map_err(|e| crate::Error::InvalidEncoding(format!("G1 half: {e}")))?;
        let p2 = G2Affine::deserialize_compressed(&bytes[G1_BYTES..])
            .map_err(|e| crate::Error::InvalidEncoding(format!("G2 half: {e}")))?;
        Ok(GroupElem {
            p1: p1.into(),
            p2: p2.into(),
        })
    }
}

impl Mul for GroupElem {
    type Output = GroupElem;

    /// Group operation; one `mul_G`.
    fn mul(self, rhs: GroupElem) -> GroupElem {
        record(Op::MulG);
        GroupElem {
            p1: self.p1 + rhs.p1,
            p2: self.p2 + rhs.p2,
        }
    }
}

impl fmt::Debug for GroupElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.to_bytes();
        write!(f, "GroupElem({}..)", hex::encode(&b[..8]))
    }
}

impl TargetElem {
    pub fn identity() -> Self {
        TargetElem(PairingOutput::zero())
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_zero()
    }

    /// `self^e`; one `exp_GT`.
    pub fn pow(&self, e: &Scalar) -> Self {
        record(Op::ExpGt);
        TargetElem(self.0 * e.0)
    }

    /// `self / rhs`; one `mul_GT` (the inversion is a free conjugation).
    pub fn div(&self, rhs: &TargetElem) -> Self {
        record(Op::MulGt);
        TargetElem(self.0 - rhs.0)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(TARGET_ELEM_BYTES);
        self.0
            .serialize_compressed(&mut out)
            .expect("fixed-size G_T encoding");
        debug_assert_eq!(out.len(), TARGET_ELEM_BYTES);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> crate::Result<Self> {
        if bytes.len() != TARGET_ELEM_BYTES {
            return Err(crate::Error::InvalidEncoding(format!(
                "target element must be {TARGET_ELEM_BYTES} bytes, got {}",
                bytes.len()
            )));
        }
        PairingOutput::<Bls12_381>::deserialize_compressed(bytes)
            .map(TargetElem)
            .map_err(|e| crate::Error::InvalidEncoding(format!("G_T element: {e}")))
    }
}

impl Mul for TargetElem {
    type Output = TargetElem;

    /// One `mul_GT`. The backend writes GT additively.
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, rhs: TargetElem) -> TargetElem {
        record(Op::MulGt);
        TargetElem(self.0 + rhs.0)
    }
}

impl fmt::Debug for TargetElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.to_bytes();
        write!(f, "TargetElem({}..)", hex::encode(&b[..8]))
    }
}

/// The bilinear map; one pairing.
pub fn pair(a: &GroupElem, b: &GroupElem) -> TargetElem {
    record(Op::Pairing);
    TargetElem(Bls12_381::pairing(a.p1, b.p2))
}

/// Hash arbitrary bytes onto `G \ {1}`.
///
/// Each half uses the RFC 9380 SSWU suite for its curve. A candidate equal to
/// the identity is rejected and the input rehashed with an appended counter.
pub fn hash_to_group(bytes: &[u8]) -> GroupElem {
    let h1 = MapToCurveBasedHasher::<G1Projective, DefaultFieldHasher<Sha256, 128>, WBMap<g1::Config>>::new(DST_G1)
        .expect("valid G1 hasher parameters");
    let h2 = MapToCurveBasedHasher::<G2Projective, DefaultFieldHasher<Sha256, 128>, WBMap<g2::Config>>::new(DST_G2)
        .expect("valid G2 hasher parameters");
    let mut msg = bytes.to_vec();
    let mut ctr = 0u8;
    loop {
        let p1: G1Projective = h1.hash(&msg).expect("hash to G1").into();
        let p2: G2Projective = h2.hash(&msg).expect("hash to G2").into();
        if !p1.is_zero() && !p2.is_zero() {
            return GroupElem { p1, p2 };
        }
        if ctr > 0 {
            msg.pop();
        }
        ctr = ctr.wrapping_add(1);
        msg.push(ctr);
    }
}
