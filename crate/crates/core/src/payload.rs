//! Data encapsulation under the ABE-protected key, and the deletion tag.
//!
//! The `G_T` element `k` is never used as a cipher key directly: a 128-bit
//! AES-GCM key is derived from its canonical encoding with HKDF-SHA256.

use aes_gcm::aead::{Aead, KeyInit, Payload};
use aes_gcm::{Aes128Gcm, Nonce};
use hkdf::Hkdf;
use rand::{CryptoRng, RngCore};
use sha2::Sha256;
use subtle::ConstantTimeEq;

use crate::error::{Error, Result};
use crate::group::{hash_to_scalar, Scalar, TargetElem};
use crate::wire::{Decode, Encode, Reader, Writer};

pub const KEY_BYTES: usize = 16;
pub const NONCE_BYTES: usize = 12;

const KDF_LABEL: &[u8] = b"cpad/v1/payload-key";

/// AEAD ciphertext of a data file, bound to its `fname`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SealedPayload {
    pub fname: Scalar,
    pub nonce: [u8; NONCE_BYTES],
    /// Ciphertext with the 16-byte GCM tag appended.
    pub ciphertext: Vec<u8>,
}

/// `tau = h(fname || k)`, kept by the data owner.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DeletionTag {
    pub tau: Scalar,
}

pub fn derive_key(k: &TargetElem) -> [u8; KEY_BYTES] {
    let hk = Hkdf::<Sha256>::new(None, &k.to_bytes());
    let mut out = [0u8; KEY_BYTES];
    hk.expand(KDF_LABEL, &mut out)
        .expect("16 bytes is a valid HKDF-SHA256 output length");
    out
}

/// The TLV scalar record of `fname`; used as AEAD associated data and as the
/// tag hash prefix.
fn fname_record(fname: &Scalar) -> Vec<u8> {
    let mut w = Writer::new();
    w.scalar(fname);
    w.into_records()
}

pub fn seal<R: RngCore + CryptoRng + ?Sized>(
    data: &[u8],
    k: &TargetElem,
    fname: &Scalar,
    rng: &mut R,
) -> SealedPayload {
    let cipher = Aes128Gcm::new(&derive_key(k).into());
    let mut nonce = [0u8; NONCE_BYTES];
    rng.fill_bytes(&mut nonce);
    let aad = fname_record(fname);
    let ciphertext = cipher
        .encrypt(Nonce::from_slice(&nonce), Payload { msg: data, aad: &aad })
        .expect("AES-GCM encryption of an in-memory buffer");
    SealedPayload {
        fname: *fname,
        nonce,
        ciphertext,
    }
}

/// Fails with [`Error::AuthenticationFailure`] on a wrong key, a wrong
/// `fname`, or any modified byte.
pub fn unseal(p: &SealedPayload, k: &TargetElem, fname: &Scalar) -> Result<Vec<u8>> {
    let cipher = Aes128Gcm::new(&derive_key(k).into());
    let aad = fname_record(fname);
    cipher
        .decrypt(
            Nonce::from_slice(&p.nonce),
            Payload {
                msg: &p.ciphertext,
                aad: &aad,
            },
        )
        .map_err(|_| Error::AuthenticationFailure)
}

pub fn make_tag(fname: &Scalar, k: &TargetElem) -> DeletionTag {
    let mut input = fname_record(fname);
    input.extend_from_slice(&k.to_bytes());
    DeletionTag {
        tau: hash_to_scalar(&input),
    }
}

/// Constant-time comparison of `tag` with `h(fname || k_prime)`.
pub fn check_tag(tag: &DeletionTag, fname: &Scalar, k_prime: &TargetElem) -> bool {
    let fresh = make_tag(fname, k_prime);
    tag.tau.to_bytes().ct_eq(&fresh.tau.to_bytes()).into()
}

impl Encode for SealedPayload {
    fn encode_records(&self, w: &mut Writer) {
        w.scalar(&self.fname).bytes(&self.nonce).bytes(&self.ciphertext);
    }
}

impl Decode for SealedPayload {
    fn decode_records(r: &mut Reader<'_>) -> Result<Self> {
        let fname = r.scalar()?;
        let nonce = r
            .bytes()?
            .try_into()
            .map_err(|_| Error::InvalidEncoding(format!("nonce must be {NONCE_BYTES} bytes")))?;
        let ciphertext = r.bytes()?;
        Ok(SealedPayload {
            fname,
            nonce,
            ciphertext,
        })
    }
}

impl Encode for DeletionTag {
    fn encode_records(&self, w: &mut Writer) {
        w.scalar(&self.tau);
    }
}

impl Decode for DeletionTag {
    fn decode_records(r: &mut Reader<'_>) -> Result<Self> {
        Ok(DeletionTag { tau: r.scalar()? })
    }
}
