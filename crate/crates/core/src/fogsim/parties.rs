//! Party state machines. Every handler takes one inbound message and returns
//! the messages it emits; the runner owns delivery order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use rand::{CryptoRng, RngCore};

use super::message::{Message, MessageKind, PartyId};
use super::store::{CloudRecord, CloudStore, FogRecord, FogStore};
use crate::abe::{self, KeyCiphertext, MasterSecretKey, PublicParams, UserSecretKey};
use crate::deletion::{
    reencrypt_as, verify_deletion, DeletionRequest, DeletionResponse, FogBehavior,
    PendingDeletions, SigningKeypair,
};
use crate::error::{Error, Result};
use crate::group::{GroupElem, Scalar};
use crate::payload::{make_tag, seal, unseal, DeletionTag, SealedPayload};
use crate::policy::AccessPolicy;
use crate::wire::{Decode, Encode, Writer};

fn fname_body(fname: &Scalar) -> Writer {
    let mut w = Writer::new();
    w.scalar(fname);
    w
}

fn unexpected(me: &PartyId, m: &Message) -> Error {
    Error::InvalidEncoding(format!("{me} cannot handle {:?} from {}", m.kind, m.sender))
}

pub struct Authority {
    pub pp: PublicParams,
    msk: MasterSecretKey,
}

impl Authority {
    pub fn setup<R: RngCore + CryptoRng + ?Sized>(universe: &[String], rng: &mut R) -> Result<Self> {
        let (pp, msk) = abe::setup(universe, rng)?;
        Ok(Authority { pp, msk })
    }

    /// Issues a key for `attrs` and addresses it to `to`.
    pub fn enroll<R: RngCore + CryptoRng + ?Sized>(
        &self,
        to: PartyId,
        attrs: &BTreeSet<String>,
        rng: &mut R,
    ) -> Result<Message> {
        let usk = abe::keygen(&self.msk, &self.pp, attrs, rng)?;
        let mut w = Writer::new();
        w.nested(&self.pp).nested(&usk);
        Ok(Message::new(PartyId::Authority, to, MessageKind::KeyIssue, w))
    }
}

pub struct FogNode {
    fsk: SigningKeypair,
    pub behavior: FogBehavior,
    pub store: FogStore,
}

impl FogNode {
    pub fn new(fsk: SigningKeypair, store: FogStore) -> Self {
        FogNode {
            fsk,
            behavior: FogBehavior::Honest,
            store,
        }
    }

    pub fn public_key(&self) -> &GroupElem {
        self.fsk.public()
    }

    pub fn handle<R: RngCore + CryptoRng + ?Sized>(
        &mut self,
        m: &Message,
        rng: &mut R,
    ) -> Result<Vec<Message>> {
        let mut r = m.body_reader()?;
        match m.kind {
            MessageKind::Upload => {
                let fname = r.scalar()?;
                let spk = r.group()?;
                let ct: KeyCiphertext = r.nested()?;
                let payload: SealedPayload = r.nested()?;
                r.finish()?;
                if payload.fname != fname {
                    return Err(Error::InvalidEncoding("payload fname mismatch".into()));
                }
                self.store.put(FogRecord { fname, spk, ct })?;
                // The payload goes on to the cloud; the fog keeps no copy.
                let mut w = Writer::new();
                w.scalar(&fname).group(&spk).nested(&payload);
                Ok(vec![Message::new(PartyId::Fog, PartyId::Cloud, MessageKind::CloudUpload, w)])
            }
            MessageKind::FetchCt => {
                let fname = r.scalar()?;
                r.finish()?;
                let reply = match self.store.get(&fname) {
                    Some(rec) => {
                        let mut w = Writer::new();
                        w.scalar(&fname).nested(&rec.ct);
                        Message::new(PartyId::Fog, m.sender.clone(), MessageKind::CtReply, w)
                    }
                    None => not_found(PartyId::Fog, m.sender.clone(), &fname),
                };
                Ok(vec![reply])
            }
            MessageKind::DelRequest => {
                let req = DeletionRequest::from_bytes(&m.body)?;
                let rec = self
                    .store
                    .get(&req.fname)
                    .ok_or_else(|| Error::UnknownFname(req.fname.to_hex()))?;
                if !req.verify(&rec.spk) {
                    return Err(Error::BadSignature);
                }
                let forward = Message {
                    sender: PartyId::Fog,
                    receiver: PartyId::Cloud,
                    kind: MessageKind::CloudDelete,
                    body: m.body.clone(),
                };
                let (ct, resp) = reencrypt_as(self.behavior, &rec.ct, &req, &self.fsk, &rec.spk, rng)?;
                let updated = FogRecord {
                    fname: rec.fname,
                    spk: rec.spk,
                    ct,
                };
                self.store.put(updated)?;
                let mut w = Writer::new();
                w.scalar(&req.fname).nested(&resp);
                let answer = Message::new(PartyId::Fog, m.sender.clone(), MessageKind::DelResponse, w);
                Ok(vec![forward, answer])
            }
            MessageKind::CloudDeleteAck => {
                r.scalar()?;
                r.finish()?;
                Ok(Vec::new())
            }
            _ => Err(unexpected(&PartyId::Fog, m)),
        }
    }
}

fn not_found(from: PartyId, to: PartyId, fname: &Scalar) -> Message {
    Message::new(from, to, MessageKind::NotFound, fname_body(fname))
}

pub struct Cloud {
    pub store: CloudStore,
}

impl Cloud {
    pub fn new(store: CloudStore) -> Self {
        Cloud { store }
    }

    /// Re-checks the owner's signature, then drops the sealed payload.
    pub fn cloud_delete(&mut self, fname: &Scalar, req: &DeletionRequest) -> Result<()> {
        let rec = self
            .store
            .get(fname)
            .ok_or_else(|| Error::UnknownFname(fname.to_hex()))?;
        if req.fname != *fname || !req.verify(&rec.spk) {
            return Err(Error::BadSignature);
        }
        self.store.remove(fname)?;
        Ok(())
    }

    pub fn handle(&mut self, m: &Message) -> Result<Vec<Message>> {
        let mut r = m.body_reader()?;
        match m.kind {
            MessageKind::CloudUpload => {
                let fname = r.scalar()?;
                let spk = r.group()?;
                let payload: SealedPayload = r.nested()?;
                r.finish()?;
                self.store.put(CloudRecord { fname, spk, payload })?;
                Ok(Vec::new())
            }
            MessageKind::FetchPayload => {
                let fname = r.scalar()?;
                r.finish()?;
                let reply = match self.store.get(&fname) {
                    Some(rec) => {
                        let mut w = Writer::new();
                        w.scalar(&fname).nested(&rec.payload);
                        Message::new(PartyId::Cloud, m.sender.clone(), MessageKind::PayloadReply, w)
                    }
                    None => not_found(PartyId::Cloud, m.sender.clone(), &fname),
                };
                Ok(vec![reply])
            }
            MessageKind::CloudDelete => {
                let req = DeletionRequest::from_bytes(&m.body)?;
                self.cloud_delete(&req.fname, &req)?;
                Ok(vec![Message::new(
                    PartyId::Cloud,
                    m.sender.clone(),
                    MessageKind::CloudDeleteAck,
                    fname_body(&req.fname),
                )])
            }
            _ => Err(unexpected(&PartyId::Cloud, m)),
        }
    }
}

/// What a client observed when a fetch or verification completed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    /// Key recovered and payload authenticated; carries the plaintext length.
    Decrypted { label: String, len: usize },
    /// The client's attributes do not satisfy the policy.
    Denied { label: String },
    /// The fog still has the key ciphertext but the cloud has no payload.
    PayloadMissing { label: String },
    /// The fog has no key ciphertext for this fname.
    NotFound { label: String },
    /// Decapsulation succeeded but the payload did not authenticate.
    WrongKey { label: String },
    Verified { label: String, ok: bool },
}

impl Outcome {
    /// A verification that came back false.
    pub fn is_flagged(&self) -> bool {
        matches!(self, Outcome::Verified { ok: false, .. })
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Decrypted { label, len } => write!(f, "decrypted {label} {len}"),
            Outcome::Denied { label } => write!(f, "denied {label}"),
            Outcome::PayloadMissing { label } => write!(f, "payload-missing {label}"),
            Outcome::NotFound { label } => write!(f, "not-found {label}"),
            Outcome::WrongKey { label } => write!(f, "wrong-key {label}"),
            Outcome::Verified { label, ok } => write!(f, "verified {label} {ok}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OwnedFile {
    pub fname: Scalar,
    pub tag: DeletionTag,
}

#[allow(clippy::large_enum_variant)]
enum Awaiting {
    Fetch {
        label: String,
        ct: Option<Option<KeyCiphertext>>,
        payload: Option<Option<SealedPayload>>,
    },
    Verify {
        label: String,
    },
}

/// A smart object (`ssk.is_some()`) or a data user.
pub struct Client {
    pub id: PartyId,
    pub pp: Option<PublicParams>,
    pub key: Option<UserSecretKey>,
    pub ssk: Option<SigningKeypair>,
    pub fpk: GroupElem,
    pub owned: BTreeMap<String, OwnedFile>,
    pub pending: PendingDeletions,
    pub responses: BTreeMap<Scalar, DeletionResponse>,
    /// Plaintexts recovered by completed fetches, by file label.
    pub received: BTreeMap<String, Vec<u8>>,
    awaiting: BTreeMap<Scalar, Awaiting>,
}

impl Client {
    pub fn new(id: PartyId, ssk: Option<SigningKeypair>, fpk: GroupElem) -> Self {
        Client {
            id,
            pp: None,
            key: None,
            ssk,
            fpk,
            owned: BTreeMap::new(),
            pending: PendingDeletions::new(),
            responses: BTreeMap::new(),
            received: BTreeMap::new(),
            awaiting: BTreeMap::new(),
        }
    }

    fn key(&self) -> Result<&UserSecretKey> {
        self.key
            .as_ref()
            .ok_or_else(|| Error::NotFound(format!("{} holds no attribute key", self.id)))
    }

    fn ssk(&self) -> Result<&SigningKeypair> {
        self.ssk
            .as_ref()
            .ok_or_else(|| Error::NotFound(format!("{} is not a data owner", self.id)))
    }

    fn owned(&self, label: &str) -> Result<&OwnedFile> {
        self.owned
            .get(label)
            .ok_or_else(|| Error::NotFound(format!("{} does not own {label:?}", self.id)))
    }

    /// Seals `data` under `policy` and uploads it to the fog.
    pub fn encrypt<R: RngCore + CryptoRng + ?Sized>(
        &mut self,
        label: &str,
        policy: &AccessPolicy,
        data: &[u8],
        rng: &mut R,
    ) -> Result<(Scalar, Message)> {
        if self.owned.contains_key(label) {
            return Err(Error::InvalidEncoding(format!("file label {label:?} already used")));
        }
        let spk = *self.ssk()?.public();
        let pp = self
            .pp
            .as_ref()
            .ok_or_else(|| Error::NotFound(format!("{} has no public parameters", self.id)))?;
        let fname = Scalar::random(rng);
        let (k, ct) = abe::encapsulate(pp, policy, rng)?;
        let payload = seal(data, &k, &fname, rng);
        let tag = make_tag(&fname, &k);
        self.owned.insert(label.to_owned(), OwnedFile { fname, tag });
        let mut w = Writer::new();
        w.scalar(&fname).group(&spk).nested(&ct).nested(&payload);
        Ok((fname, Message::new(self.id.clone(), PartyId::Fog, MessageKind::Upload, w)))
    }

    pub fn fetch(&mut self, label: &str, fname: &Scalar) -> Result<Vec<Message>> {
        self.awaiting.insert(
            *fname,
            Awaiting::Fetch {
                label: label.to_owned(),
                ct: None,
                payload: None,
            },
        );
        Ok(vec![
            Message::new(self.id.clone(), PartyId::Fog, MessageKind::FetchCt, fname_body(fname)),
            Message::new(self.id.clone(), PartyId::Cloud, MessageKind::FetchPayload, fname_body(fname)),
        ])
    }

    pub fn delete<R: RngCore + CryptoRng + ?Sized>(&mut self, label: &str, rng: &mut R) -> Result<Message> {
        let file = self.owned(label)?.clone();
        let ssk = self.ssk()?.clone();
        let req = self.pending.begin(&file.fname, &file.tag, &ssk, rng)?;
        Ok(Message {
            sender: self.id.clone(),
            receiver: PartyId::Fog,
            kind: MessageKind::DelRequest,
            body: req.to_bytes(),
        })
    }

    /// Fetches the updated key ciphertext so the fog's response can be checked.
    pub fn verify(&mut self, label: &str) -> Result<Message> {
        let fname = self.owned(label)?.fname;
        self.pending.get(&fname)?;
        if !self.responses.contains_key(&fname) {
            return Err(Error::NotFound(format!("no deletion response for {label:?} yet")));
        }
        self.awaiting.insert(fname, Awaiting::Verify { label: label.to_owned() });
        Ok(Message::new(self.id.clone(), PartyId::Fog, MessageKind::FetchCt, fname_body(&fname)))
    }

    pub fn handle(&mut self, m: &Message) -> Result<Option<Outcome>> {
        let mut r = m.body_reader()?;
        match m.kind {
            MessageKind::KeyIssue => {
                let pp: PublicParams = r.nested()?;
                let key: UserSecretKey = r.nested()?;
                r.finish()?;
                self.pp = Some(pp);
                self.key = Some(key);
                Ok(None)
            }
            MessageKind::DelResponse => {
                let fname = r.scalar()?;
                let resp: DeletionResponse = r.nested()?;
                r.finish()?;
                self.pending.get(&fname)?;
                self.responses.insert(fname, resp);
                Ok(None)
            }
            MessageKind::CtReply => {
                let fname = r.scalar()?;
                let ct: KeyCiphertext = r.nested()?;
                r.finish()?;
                self.on_ct(fname, Some(ct))
            }
            MessageKind::PayloadReply => {
                let fname = r.scalar()?;
                let payload: SealedPayload = r.nested()?;
                r.finish()?;
                self.on_payload(fname, Some(payload))
            }
            MessageKind::NotFound => {
                let fname = r.scalar()?;
                r.finish()?;
                match m.sender {
                    PartyId::Fog => self.on_ct(fname, None),
                    PartyId::Cloud => self.on_payload(fname, None),
                    _ => Err(unexpected(&self.id, m)),
                }
            }
            _ => Err(unexpected(&self.id, m)),
        }
    }

    fn on_ct(&mut self, fname: Scalar, ct: Option<KeyCiphertext>) -> Result<Option<Outcome>> {
        match self.awaiting.get_mut(&fname) {
            Some(Awaiting::Fetch { ct: slot, .. }) => {
                *slot = Some(ct);
                self.try_finish_fetch(fname)
            }
            Some(Awaiting::Verify { label }) => {
                let label = label.clone();
                self.awaiting.remove(&fname);
                let ct = ct.ok_or_else(|| Error::UnknownFname(fname.to_hex()))?;
                let resp = self
                    .responses
                    .remove(&fname)
                    .ok_or_else(|| Error::NoPendingRequest(fname.to_hex()))?;
                let state = self.pending.resolve(&fname)?;
                let ok = verify_deletion(&resp, &ct, self.key()?, &state, &self.fpk, &fname)?;
                Ok(Some(Outcome::Verified { label, ok }))
            }
            None => Err(Error::NotFound(format!("{} did not ask for {fname}", self.id))),
        }
    }

    fn on_payload(&mut self, fname: Scalar, p: Option<SealedPayload>) -> Result<Option<Outcome>> {
        match self.awaiting.get_mut(&fname) {
            Some(Awaiting::Fetch { payload, .. }) => {
                *payload = Some(p);
                self.try_finish_fetch(fname)
            }
            _ => Err(Error::NotFound(format!("{} did not ask for payload {fname}", self.id))),
        }
    }

    fn try_finish_fetch(&mut self, fname: Scalar) -> Result<Option<Outcome>> {
        let Some(Awaiting::Fetch {
            ct: Some(_),
            payload: Some(_),
            ..
        }) = self.awaiting.get(&fname)
        else {
            return Ok(None);
        };
        let Some(Awaiting::Fetch {
            label,
            ct: Some(ct),
            payload: Some(payload),
        }) = self.awaiting.remove(&fname)
        else {
            unreachable!("checked above")
        };
        let Some(ct) = ct else {
            return Ok(Some(Outcome::NotFound { label }));
        };
        let k = match abe::decapsulate(&ct, self.key()?) {
            Ok(k) => k,
            Err(Error::NotAuthorized) => return Ok(Some(Outcome::Denied { label })),
            Err(e) => return Err(e),
        };
        let Some(payload) = payload else {
            return Ok(Some(Outcome::PayloadMissing { label }));
        };
        Ok(Some(match unseal(&payload, &k, &fname) {
            Ok(data) => {
                let len = data.len();
                self.received.insert(label.clone(), data);
                Outcome::Decrypted { label, len }
            }
            Err(Error::AuthenticationFailure) => Outcome::WrongKey { label },
            Err(e) => return Err(e),
        }))
    }

    /// Deterministic encoding of the state that affects future behaviour.
    pub fn state_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.label(&self.id.to_string());
        w.uint(self.owned.len() as u32);
        for (label, f) in &self.owned {
            w.label(label).scalar(&f.fname).nested(&f.tag);
        }
        w.uint(self.pending.len() as u32);
        for st in self.pending.iter() {
            w.nested(st);
        }
        w.uint(self.responses.len() as u32);
        for (f, resp) in &self.responses {
            w.scalar(f).nested(resp);
        }
        w.into_records()
    }
}

/// Opens the fog and cloud stores under `workdir`.
pub fn open_stores(workdir: &Path) -> Result<(FogStore, CloudStore)> {
    Ok((FogStore::open(workdir.join("fog"))?, CloudStore::open(workdir.join("cloud"))?))
}
