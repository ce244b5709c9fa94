//! Assured deletion: signed request, fog-side re-encryption of the dummy row,
//! and owner-side verification against the deletion tag.
//!
//! The owner picks `q, u` and sends `theta = q^u`. The fog picks `v`, answers
//! with `eta = q^v`, and raises every dummy-row `D_i` to `1/gamma` with
//! `gamma = theta^v`. Only the owner, who knows `u`, can form
//! `gamma' = eta^u = gamma` and adjust its own dummy key component to cancel
//! the change; every other key now reconstructs a wrong `k`.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use rand::{CryptoRng, RngCore};

use crate::abe::{blinding_product, unblind, KeyCiphertext, UserSecretKey};
use crate::error::{Error, Result};
use crate::group::{hash_to_group, pair, GroupElem, Scalar};
use crate::payload::{check_tag, DeletionTag};
use crate::policy::DUMMY;
use crate::wire::{Decode, Encode, Reader, Writer};

/// BLS-style short signature key: `v = g^sec`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SigningKeypair {
    sec: Scalar,
    pub v: GroupElem,
}

impl SigningKeypair {
    pub fn generate<R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> Self {
        let sec = Scalar::random_nonzero(rng);
        SigningKeypair {
            sec,
            v: GroupElem::base_pow(&sec),
        }
    }

    pub fn public(&self) -> &GroupElem {
        &self.v
    }

    /// `h1(m)^sec`; one `exp_G`.
    pub fn sign(&self, m: &[u8]) -> GroupElem {
        hash_to_group(m).pow(&self.sec)
    }
}

/// `e(sig, g) == e(h1(m), v)`.
pub fn verify_sig(v: &GroupElem, m: &[u8], sig: &GroupElem) -> bool {
    pair(sig, &GroupElem::generator()) == pair(&hash_to_group(m), v)
}

/// `delete || fname || dummy || q || theta`, signed by the data owner.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeletionRequest {
    pub fname: Scalar,
    pub attr: String,
    pub q: Scalar,
    pub theta: Scalar,
    pub signature: GroupElem,
}

impl DeletionRequest {
    fn body_records(&self, w: &mut Writer) {
        w.label("delete")
            .scalar(&self.fname)
            .attr(&self.attr)
            .scalar(&self.q)
            .scalar(&self.theta);
    }

    /// The exact bytes the owner signs: a TLV stream of the request fields.
    pub fn signed_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.body_records(&mut w);
        w.into_stream()
    }

    pub fn verify(&self, spk: &GroupElem) -> bool {
        verify_sig(spk, &self.signed_bytes(), &self.signature)
    }
}

/// What the owner keeps while a request is outstanding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObjectDeletionState {
    pub fname: Scalar,
    pub u: Scalar,
    pub q: Scalar,
    pub tag: DeletionTag,
}

impl ObjectDeletionState {
    pub fn theta(&self) -> Scalar {
        self.q.pow(&self.u)
    }
}

/// `eta = q^v`, signed by the fog.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeletionResponse {
    pub eta: Scalar,
    pub signature: GroupElem,
}

impl DeletionResponse {
    pub fn signed_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.scalar(&self.eta);
        w.into_stream()
    }

    pub fn verify(&self, fpk: &GroupElem) -> bool {
        verify_sig(fpk, &self.signed_bytes(), &self.signature)
    }
}

/// Builds a signed deletion request for `fname`.
///
/// `q` and `u` are uniform in `Z_p^*`; `theta` is resampled away from 1,
/// which would make the fog's update a no-op.
pub fn make_del_request<R: RngCore + CryptoRng + ?Sized>(
    fname: &Scalar,
    tag: &DeletionTag,
    ssk: &SigningKeypair,
    rng: &mut R,
) -> (DeletionRequest, ObjectDeletionState) {
    let (q, u, theta) = loop {
        let q = Scalar::random_nonzero(rng);
        let u = Scalar::random_nonzero(rng);
        let theta = q.pow(&u);
        if !theta.is_one() {
            break (q, u, theta);
        }
    };
    let mut req = DeletionRequest {
        fname: *fname,
        attr: DUMMY.to_owned(),
        q,
        theta,
        signature: GroupElem::identity(),
    };
    req.signature = ssk.sign(&req.signed_bytes());
    let state = ObjectDeletionState {
        fname: *fname,
        u,
        q,
        tag: *tag,
    };
    (req, state)
}

/// How a simulated fog treats a deletion request.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FogBehavior {
    #[default]
    Honest,
    /// Answers with a valid `eta` but leaves the ciphertext untouched.
    SkipUpdate,
    /// Updates with an exponent unrelated to the `eta` it sends.
    InconsistentGamma,
}

/// Raises every dummy-row `D_i` to `1/gamma`. One `exp_G` per dummy row.
pub fn apply_deletion_exponent(ct: &KeyCiphertext, gamma: &Scalar) -> Result<KeyCiphertext> {
    let inv = gamma
        .invert()
        .ok_or_else(|| Error::InvalidEncoding("deletion exponent is zero".into()))?;
    let mut out = ct.clone();
    let dummy: Vec<usize> = ct.dummy_rows().collect();
    for i in dummy {
        out.rows[i].d = ct.rows[i].d.pow(&inv);
    }
    Ok(out)
}

/// Honest fog re-encryption: verifies the owner's request under `spk`, then
/// replaces each dummy-row `D_i` with `D_i^(1/gamma)` and signs `eta`.
pub fn reencrypt<R: RngCore + CryptoRng + ?Sized>(
    ct: &KeyCiphertext,
    req: &DeletionRequest,
    fsk: &SigningKeypair,
    spk: &GroupElem,
    rng: &mut R,
) -> Result<(KeyCiphertext, DeletionResponse)> {
    reencrypt_as(FogBehavior::Honest, ct, req, fsk, spk, rng)
}

/// [`reencrypt`] with a selectable (possibly cheating) fog behaviour.
pub fn reencrypt_as<R: RngCore + CryptoRng + ?Sized>(
    behavior: FogBehavior,
    ct: &KeyCiphertext,
    req: &DeletionRequest,
    fsk: &SigningKeypair,
    spk: &GroupElem,
    rng: &mut R,
) -> Result<(KeyCiphertext, DeletionResponse)> {
    if !req.verify(spk) {
        return Err(Error::BadSignature);
    }
    if req.attr != DUMMY {
        return Err(Error::InvalidEncoding(format!(
            "deletion must target {DUMMY:?}, not {:?}",
            req.attr
        )));
    }
    if req.q.is_zero() || req.theta.is_zero() {
        return Err(Error::InvalidEncoding("zero q or theta in deletion request".into()));
    }

    let (eta, gamma) = loop {
        let v = Scalar::random_nonzero(rng);
        let eta = req.q.pow(&v);
        let gamma = req.theta.pow(&v);
        if !gamma.is_one() {
            break (eta, gamma);
        }
    };

    let updated = match behavior {
        FogBehavior::Honest => apply_deletion_exponent(ct, &gamma)?,
        FogBehavior::SkipUpdate => ct.clone(),
        FogBehavior::InconsistentGamma => {
            let bogus = loop {
                let g = Scalar::random_nonzero(rng);
                if g != gamma && !g.is_one() {
                    break g;
                }
            };
            apply_deletion_exponent(ct, &bogus)?
        }
    };

    let mut resp = DeletionResponse {
        eta,
        signature: GroupElem::identity(),
    };
    resp.signature = fsk.sign(&resp.signed_bytes());
    Ok((updated, resp))
}

/// Recomputes `k'` through the adjusted dummy component `K_dummy^(eta^u)` and
/// compares `h(fname || k')` with the stored tag. No signature check.
///
/// Costs one `Z_p` exponentiation, one `exp_G`, and `2|I| + 1` pairings.
pub fn verify_deletion_proof(
    eta: &Scalar,
    ct_updated: &KeyCiphertext,
    sk: &UserSecretKey,
    state: &ObjectDeletionState,
) -> Result<bool> {
    let gamma = eta.pow(&state.u);
    if gamma.is_zero() || gamma.is_one() {
        return Ok(false);
    }
    let plan = ct_updated.prog.find_reconstruction(&sk.attrs())?;
    if !plan.rows.iter().any(|&i| ct_updated.prog.rho(i) == DUMMY) {
        return Ok(false);
    }
    let adjusted = sk.component(DUMMY)?.pow(&gamma);
    let a = blinding_product(ct_updated, sk, &plan, Some(&adjusted))?;
    let k_prime = unblind(ct_updated, sk, &a);
    Ok(check_tag(&state.tag, &state.fname, &k_prime))
}

/// Full owner-side check: the fog's signature, then [`verify_deletion_proof`].
pub fn verify_deletion(
    resp: &DeletionResponse,
    ct_updated: &KeyCiphertext,
    sk: &UserSecretKey,
    state: &ObjectDeletionState,
    fpk: &GroupElem,
    fname: &Scalar,
) -> Result<bool> {
    if state.fname != *fname {
        return Err(Error::NoPendingRequest(fname.to_hex()));
    }
    if !resp.verify(fpk) {
        return Err(Error::BadFogSignature);
    }
    verify_deletion_proof(&resp.eta, ct_updated, sk, state)
}

/// The owner's table of outstanding requests; at most one per `fname`.
#[derive(Clone, Debug, Default)]
pub struct PendingDeletions {
    pending: BTreeMap<Scalar, ObjectDeletionState>,
}

impl PendingDeletions {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn begin<R: RngCore + CryptoRng + ?Sized>(
        &mut self,
        fname: &Scalar,
        tag: &DeletionTag,
        ssk: &SigningKeypair,
        rng: &mut R,
    ) -> Result<DeletionRequest> {
        if self.pending.contains_key(fname) {
            return Err(Error::RequestPending(fname.to_hex()));
        }
        let (req, state) = make_del_request(fname, tag, ssk, rng);
        self.pending.insert(*fname, state);
        Ok(req)
    }

    pub fn get(&self, fname: &Scalar) -> Result<&ObjectDeletionState> {
        self.pending
            .get(fname)
            .ok_or_else(|| Error::NoPendingRequest(fname.to_hex()))
    }

    /// Removes and returns the state once the response has been processed.
    pub fn resolve(&mut self, fname: &Scalar) -> Result<ObjectDeletionState> {
        self.pending
            .remove(fname)
            .ok_or_else(|| Error::NoPendingRequest(fname.to_hex()))
    }

    pub fn insert(&mut self, state: ObjectDeletionState) -> Result<()> {
        if self.pending.contains_key(&state.fname) {
            return Err(Error::RequestPending(state.fname.to_hex()));
        }
        self.pending.insert(state.fname, state);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = &ObjectDeletionState> {
        self.pending.values()
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }
}

impl Encode for SigningKeypair {
    fn encode_records(&self, w: &mut Writer) {
        w.scalar(&self.sec).group(&self.v);
    }
}

impl Decode for SigningKeypair {
    fn decode_records(r: &mut Reader<'_>) -> Result<Self> {
        let sec = r.scalar()?;
        let v = r.group()?;
        if sec.is_zero() || GroupElem::base_pow(&sec) != v {
            return Err(Error::InvalidEncoding("signing key does not match its public half".into()));
        }
        Ok(SigningKeypair { sec, v })
    }
}

impl Encode for DeletionRequest {
    /// Signed body records followed by the signature.
    fn encode_records(&self, w: &mut Writer) {
        self.body_records(w);
        w.group(&self.signature);
    }
}

impl Decode for DeletionRequest {
    fn decode_records(r: &mut Reader<'_>) -> Result<Self> {
        r.expect_label("delete")?;
        let fname = r.scalar()?;
        let attr = r.attr()?;
        let q = r.scalar()?;
        let theta = r.scalar()?;
        let signature = r.group()?;
        if q.is_zero() || theta.is_zero() {
            return Err(Error::InvalidEncoding("zero q or theta in deletion request".into()));
        }
        Ok(DeletionRequest {
            fname,
            attr,
            q,
            theta,
            signature,
        })
    }
}

impl Encode for DeletionResponse {
    fn encode_records(&self, w: &mut Writer) {
        w.scalar(&self.eta).group(&self.signature);
    }
}

impl Decode for DeletionResponse {
    fn decode_records(r: &mut Reader<'_>) -> Result<Self> {
        let eta = r.scalar()?;
        let signature = r.group()?;
        if eta.is_zero() {
            return Err(Error::InvalidEncoding("zero eta in deletion response".into()));
        }
        Ok(DeletionResponse { eta, signature })
    }
}

impl Encode for ObjectDeletionState {
    fn encode_records(&self, w: &mut Writer) {
        w.scalar(&self.fname)
            .scalar(&self.u)
            .scalar(&self.q)
            .scalar(&self.tag.tau);
    }
}

impl Decode for ObjectDeletionState {
    fn decode_records(r: &mut Reader<'_>) -> Result<Self> {
        Ok(ObjectDeletionState {
            fname: r.scalar()?,
            u: r.scalar()?,
            q: r.scalar()?,
            tag: DeletionTag { tau: r.scalar()? },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abe::{decapsulate, encapsulate, keygen, setup, PublicParams};
    use crate::abe::MasterSecretKey;
    use crate::group::counter_scope;
    use crate::payload::make_tag;
    use crate::policy::parse_policy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use std::collections::BTreeSet;

    fn set(attrs: &[&str]) -> BTreeSet<String> {
        attrs.iter().map(|s| s.to_string()).collect()
    }

    struct World {
        pp: PublicParams,
        msk: MasterSecretKey,
        rng: ChaCha20Rng,
    }

    fn world(seed: u64) -> World {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (pp, msk) = setup(&["dummy", "A", "B", "C"], &mut rng).unwrap();
        World { pp, msk, rng }
    }

    #[test]
    fn signatures() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let kp = SigningKeypair::generate(&mut rng);
        let other = SigningKeypair::generate(&mut rng);
        let sig = kp.sign(b"m");
        assert!(verify_sig(&kp.v, b"m", &sig));
        assert!(!verify_sig(&kp.v, b"m'", &sig));
        assert!(!verify_sig(&other.v, b"m", &sig));
        assert_eq!(sig, kp.sign(b"m"));
    }

    #[test]
    fn request_is_signed_and_theta_reproducible() {
        let mut w = world(2);
        let ssk = SigningKeypair::generate(&mut w.rng);
        let f = Scalar::from_u64(77);
        let tag = DeletionTag { tau: Scalar::from_u64(5) };
        let ((req, state), c) = counter_scope(|| make_del_request(&f, &tag, &ssk, &mut w.rng));
        assert!(req.verify(&ssk.v));
        assert_eq!(state.theta(), req.theta);
        assert_eq!(req.attr, DUMMY);
        assert_eq!((c.exp_zp, c.exp_g), (1, 1));
        let decoded = DeletionRequest::from_bytes(&req.to_bytes()).unwrap();
        assert_eq!(decoded, req);
    }

    #[test]
    fn honest_round_trip() {
        let mut w = world(3);
        let ssk = SigningKeypair::generate(&mut w.rng);
        let fsk = SigningKeypair::generate(&mut w.rng);
        let policy = parse_policy("dummy AND (A OR B)").unwrap();
        let (k, ct) = encapsulate(&w.pp, &policy, &mut w.rng).unwrap();
        let f = Scalar::random(&mut w.rng);
        let tag = make_tag(&f, &k);
        let owner = keygen(&w.msk, &w.pp, &set(&["dummy", "A", "B"]), &mut w.rng).unwrap();
        let user = keygen(&w.msk, &w.pp, &set(&["dummy", "B"]), &mut w.rng).unwrap();
        assert_eq!(decapsulate(&ct, &user).unwrap(), k);

        let (req, state) = make_del_request(&f, &tag, &ssk, &mut w.rng);
        let (ct2, resp) = reencrypt(&ct, &req, &fsk, &ssk.v, &mut w.rng).unwrap();

        for i in 0..ct.rows.len() {
            if ct.prog.rho(i) != DUMMY {
                assert_eq!(ct.rows[i], ct2.rows[i]);
            } else {
                assert_ne!(ct.rows[i].d, ct2.rows[i].d);
                assert_eq!(ct.rows[i].c, ct2.rows[i].c);
            }
        }
        assert_eq!((ct.c_bar, ct.c_prime), (ct2.c_bar, ct2.c_prime));
        assert_ne!(decapsulate(&ct2, &user).unwrap(), k);
        assert_ne!(decapsulate(&ct2, &owner).unwrap(), k);
        assert!(verify_deletion(&resp, &ct2, &owner, &state, &fsk.v, &f).unwrap());
    }

    #[test]
    fn bad_request_signature_leaves_ciphertext_alone() {
        let mut w = world(4);
        let ssk = SigningKeypair::generate(&mut w.rng);
        let mallory = SigningKeypair::generate(&mut w.rng);
        let fsk = SigningKeypair::generate(&mut w.rng);
        let (k, ct) = encapsulate(&w.pp, &parse_policy("dummy AND A").unwrap(), &mut w.rng).unwrap();
        let f = Scalar::from_u64(1);
        let (req, _) = make_del_request(&f, &make_tag(&f, &k), &mallory, &mut w.rng);
        assert_eq!(
            reencrypt(&ct, &req, &fsk, &ssk.v, &mut w.rng).unwrap_err(),
            Error::BadSignature
        );
        let mut tampered = make_del_request(&f, &make_tag(&f, &k), &ssk, &mut w.rng).0;
        tampered.q = tampered.q + Scalar::from_u64(1);
        assert_eq!(
            reencrypt(&ct, &tampered, &fsk, &ssk.v, &mut w.rng).unwrap_err(),
            Error::BadSignature
        );
    }

    #[test]
    fn cheating_fogs_are_caught() {
        let mut w = world(5);
        let ssk = SigningKeypair::generate(&mut w.rng);
        let fsk = SigningKeypair::generate(&mut w.rng);
        let owner = keygen(&w.msk, &w.pp, &set(&["dummy", "A", "C"]), &mut w.rng).unwrap();
        for behavior in [FogBehavior::SkipUpdate, FogBehavior::InconsistentGamma] {
            let (k, ct) =
                encapsulate(&w.pp, &parse_policy("dummy AND (A OR B) AND C").unwrap(), &mut w.rng).unwrap();
            let f = Scalar::random(&mut w.rng);
            let (req, state) = make_del_request(&f, &make_tag(&f, &k), &ssk, &mut w.rng);
            let (ct2, resp) = reencrypt_as(behavior, &ct, &req, &fsk, &ssk.v, &mut w.rng).unwrap();
            assert!(resp.verify(&fsk.v));
            assert!(!verify_deletion(&resp, &ct2, &owner, &state, &fsk.v, &f).unwrap(), "{behavior:?}");
        }
    }

    #[test]
    fn verification_errors() {
        let mut w = world(6);
        let ssk = SigningKeypair::generate(&mut w.rng);
        let fsk = SigningKeypair::generate(&mut w.rng);
        let rogue = SigningKeypair::generate(&mut w.rng);
        let owner = keygen(&w.msk, &w.pp, &set(&["dummy", "A"]), &mut w.rng).unwrap();
        let (k, ct) = encapsulate(&w.pp, &parse_policy("dummy AND A").unwrap(), &mut w.rng).unwrap();
        let f = Scalar::random(&mut w.rng);
        let (req, state) = make_del_request(&f, &make_tag(&f, &k), &ssk, &mut w.rng);
        let (ct2, resp) = reencrypt(&ct, &req, &rogue, &ssk.v, &mut w.rng).unwrap();
        assert_eq!(
            verify_deletion(&resp, &ct2, &owner, &state, &fsk.v, &f).unwrap_err(),
            Error::BadFogSignature
        );
        let other = Scalar::random(&mut w.rng);
        assert!(matches!(
            verify_deletion(&resp, &ct2, &owner, &state, &rogue.v, &other),
            Err(Error::NoPendingRequest(_))
        ));
    }

    #[test]
    fn pending_table_rejects_duplicates() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let ssk = SigningKeypair::generate(&mut rng);
        let mut table = PendingDeletions::new();
        let f = Scalar::from_u64(3);
        let tag = DeletionTag { tau: Scalar::from_u64(4) };
        table.begin(&f, &tag, &ssk, &mut rng).unwrap();
        assert!(matches!(table.begin(&f, &tag, &ssk, &mut rng), Err(Error::RequestPending(_))));
        assert!(table.get(&f).is_ok());
        table.resolve(&f).unwrap();
        assert!(matches!(table.resolve(&f), Err(Error::NoPendingRequest(_))));
        table.begin(&f, &tag, &ssk, &mut rng).unwrap();
    }

    #[test]
    fn fog_and_verifier_costs() {
        let mut w = world(8);
        let ssk = SigningKeypair::generate(&mut w.rng);
        let fsk = SigningKeypair::generate(&mut w.rng);
        let owner = keygen(&w.msk, &w.pp, &set(&["dummy", "A", "B", "C"]), &mut w.rng).unwrap();
        let (k, ct) = encapsulate(&w.pp, &parse_policy("dummy AND A AND B AND C").unwrap(), &mut w.rng).unwrap();
        let f = Scalar::random(&mut w.rng);
        let (req, state) = make_del_request(&f, &make_tag(&f, &k), &ssk, &mut w.rng);

        let ((ct2, resp), c) = counter_scope(|| reencrypt(&ct, &req, &fsk, &ssk.v, &mut w.rng).unwrap());
        assert_eq!(c.exp_zp, 2);
        // one dummy row plus the response signature
        assert_eq!(c.exp_g, 1 + 1);
        assert_eq!(c.pairings, 2);

        let (ok, c) = counter_scope(|| verify_deletion_proof(&resp.eta, &ct2, &owner, &state).unwrap());
        assert!(ok);
        assert_eq!(c.pairings, 2 * 4 + 1);
        assert_eq!(c.exp_g, 1);
        assert_eq!(c.exp_zp, 1);
    }
}
