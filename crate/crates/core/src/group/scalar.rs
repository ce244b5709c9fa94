use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use ark_bls12_381::Fr;
use ark_ff::{BigInteger, BigInteger256, Field as _, PrimeField};
use num_traits::{One, Zero};
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};

use super::counter::{record, Op};
use crate::error::{Error, Result};
use crate::field::Field;

/// Length of the canonical big-endian scalar encoding.
pub const SCALAR_BYTES: usize = 32;

/// An integer residue modulo the prime group order `p`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Scalar(pub(crate) Fr);

impl Scalar {
    pub fn from_u64(v: u64) -> Self {
        Scalar(Fr::from(v))
    }

    pub fn random<R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> Self {
        let mut wide = [0u8; 64];
        rng.fill_bytes(&mut wide);
        Scalar(Fr::from_le_bytes_mod_order(&wide))
    }

    /// Uniform over `Z_p^*`; resamples on zero.
    pub fn random_nonzero<R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let s = Self::random(rng);
            if !s.is_zero() {
                return s;
            }
        }
    }

    pub fn invert(&self) -> Option<Self> {
        self.0.inverse().map(Scalar)
    }

    /// `self^e mod p`, counted as one `Z_p` exponentiation.
    pub fn pow(&self, e: &Scalar) -> Scalar {
        record(Op::ExpZp);
        Scalar(self.0.pow(e.0.into_bigint()))
    }

    /// 32-byte big-endian encoding.
    pub fn to_bytes(&self) -> [u8; SCALAR_BYTES] {
        let be = self.0.into_bigint().to_bytes_be();
        let mut out = [0u8; SCALAR_BYTES];
        out.copy_from_slice(&be);
        out
    }

    /// Inverse of [`Scalar::to_bytes`]; rejects values `>= p`.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != SCALAR_BYTES {
            return Err(Error::InvalidEncoding(format!(
                "scalar must be {SCALAR_BYTES} bytes, got {}",
                bytes.len()
            )));
        }
        let mut limbs = [0u64; 4];
        for (i, chunk) in bytes.rchunks(8).enumerate() {
            limbs[i] = u64::from_be_bytes(chunk.try_into().expect("8-byte chunk"));
        }
        Fr::from_bigint(BigInteger256::new(limbs))
            .map(Scalar)
            .ok_or_else(|| Error::InvalidEncoding("scalar not reduced mod p".into()))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let bytes = hex::decode(s.trim())
            .map_err(|e| Error::InvalidEncoding(format!("bad hex scalar: {e}")))?;
        Self::from_bytes(&bytes)
    }
}

/// SHA-256 of `bytes`, read as a big-endian integer and reduced mod `p`.
pub fn hash_to_scalar(bytes: &[u8]) -> Scalar {
    let digest = Sha256::digest(bytes);
    Scalar(Fr::from_be_bytes_mod_order(&digest))
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scalar(0x{})", self.to_hex())
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Add for Scalar {
    type Output = Scalar;
    fn add(self, rhs: Scalar) -> Scalar {
        Scalar(self.0 + rhs.0)
    }
}

impl Sub for Scalar {
    type Output = Scalar;
    fn sub(self, rhs: Scalar) -> Scalar {
        Scalar(self.0 - rhs.0)
    }
}

impl Mul for Scalar {
    type Output = Scalar;
    fn mul(self, rhs: Scalar) -> Scalar {
        Scalar(self.0 * rhs.0)
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar(-self.0)
    }
}

impl Zero for Scalar {
    fn zero() -> Self {
        Scalar(Fr::from(0u64))
    }
    fn is_zero(&self) -> bool {
        self.0 == Fr::from(0u64)
    }
}

impl One for Scalar {
    fn one() -> Self {
        Scalar(Fr::from(1u64))
    }
}

impl Field for Scalar {
    fn inverse(&self) -> Option<Self> {
        self.invert()
    }

    fn from_i64(v: i64) -> Self {
        let mag = Scalar::from_u64(v.unsigned_abs());
        if v < 0 {
            -mag
        } else {
            mag
        }
    }
}
