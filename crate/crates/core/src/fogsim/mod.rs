//! Deterministic simulation of the four-party deployment: attribute
//! authority, smart objects and users, one fog node, and the cloud.
//!
//! Parties exchange TLV-encoded [`Message`]s over a FIFO queue that is
//! drained after every script step. Fog and cloud state lives in
//! directory-backed stores, so a run can be stopped and resumed.

mod message;
mod parties;
mod script;
mod store;

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

pub use message::{Message, MessageKind, PartyId};
pub use parties::{Authority, Client, Cloud, FogNode, Outcome, OwnedFile};
pub use script::{parse_script, Action, Step};
pub use store::{CloudRecord, CloudStore, FileStore, FogRecord, FogStore, StoreRecord};

use crate::deletion::{FogBehavior, SigningKeypair};
use crate::error::{Error, Result};
use crate::group::Scalar;
use crate::wire::Encode;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TraceEvent {
    /// A script step as it was issued.
    Action { party: String, text: String },
    /// A message after its receiver handled it.
    Delivered(Message),
    /// A client finished a fetch or verification.
    Outcome { party: PartyId, outcome: Outcome },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEntry {
    pub step: usize,
    pub seq: usize,
    pub event: TraceEvent,
    /// SHA-256 over fog, cloud and client state after the event.
    pub state_digest: [u8; 32],
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TraceLog {
    pub entries: Vec<TraceEntry>,
}

impl TraceLog {
    /// One tab-separated line per entry:
    ///
    /// ```text
    /// <step> <seq> action  <party> <text>                           <digest>
    /// <step> <seq> message <sender> <receiver> <kind> <body hex>    <digest>
    /// <step> <seq> outcome <party> <outcome> <ok|FLAGGED>           <digest>
    /// ```
    pub fn export(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let d = hex::encode(e.state_digest);
            let _ = match &e.event {
                TraceEvent::Action { party, text } => {
                    writeln!(out, "{}\t{}\taction\t{party}\t{text}\t{d}", e.step, e.seq)
                }
                TraceEvent::Delivered(m) => writeln!(
                    out,
                    "{}\t{}\tmessage\t{}\t{}\t{:?}\t{}\t{d}",
                    e.step,
                    e.seq,
                    m.sender,
                    m.receiver,
                    m.kind,
                    hex::encode(&m.body)
                ),
                TraceEvent::Outcome { party, outcome } => writeln!(
                    out,
                    "{}\t{}\toutcome\t{party}\t{outcome}\t{}\t{d}",
                    e.step,
                    e.seq,
                    if outcome.is_flagged() { "FLAGGED" } else { "ok" }
                ),
            };
        }
        out
    }

    /// SHA-256 of [`TraceLog::export`].
    pub fn digest(&self) -> [u8; 32] {
        Sha256::digest(self.export().as_bytes()).into()
    }

    pub fn messages(&self) -> impl Iterator<Item = &Message> {
        self.entries.iter().filter_map(|e| match &e.event {
            TraceEvent::Delivered(m) => Some(m),
            _ => None,
        })
    }

    pub fn outcomes(&self) -> impl Iterator<Item = (&PartyId, &Outcome)> {
        self.entries.iter().filter_map(|e| match &e.event {
            TraceEvent::Outcome { party, outcome } => Some((party, outcome)),
            _ => None,
        })
    }

    pub fn flagged(&self) -> impl Iterator<Item = &TraceEntry> {
        self.entries
            .iter()
            .filter(|e| matches!(&e.event, TraceEvent::Outcome { outcome, .. } if outcome.is_flagged()))
    }
}

pub struct Simulation {
    rng: ChaCha20Rng,
    workdir: PathBuf,
    authority: Option<Authority>,
    pub fog: FogNode,
    pub cloud: Cloud,
    pub clients: BTreeMap<String, Client>,
    /// Public directory of file labels to fnames.
    pub catalog: BTreeMap<String, Scalar>,
    queue: VecDeque<Message>,
    pub trace: TraceLog,
    step: usize,
}

impl Simulation {
    /// Opens (or resumes) the stores under `workdir`; all randomness is drawn
    /// from a ChaCha20 stream seeded with `seed`.
    pub fn new(seed: u64, workdir: impl AsRef<Path>) -> Result<Self> {
        let workdir = workdir.as_ref().to_path_buf();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (fog_store, cloud_store) = parties::open_stores(&workdir)?;
        let fsk = SigningKeypair::generate(&mut rng);
        Ok(Simulation {
            rng,
            workdir,
            authority: None,
            fog: FogNode::new(fsk, fog_store),
            cloud: Cloud::new(cloud_store),
            clients: BTreeMap::new(),
            catalog: BTreeMap::new(),
            queue: VecDeque::new(),
            trace: TraceLog::default(),
            step: 0,
        })
    }

    pub fn workdir(&self) -> &Path {
        &self.workdir
    }

    /// Runs one step and delivers everything it causes. Errors are wrapped
    /// as [`Error::Scenario`] with the step index.
    pub fn execute(&mut self, step: &Step) -> Result<()> {
        self.step = step.index;
        let wrap = |e: Error| match e {
            e @ Error::Scenario { .. } => e,
            e => Error::Scenario {
                step: step.index,
                message: format!("line {}: {e}", step.line),
            },
        };
        self.issue(&step.action).map_err(wrap)?;
        self.drain().map_err(wrap)?;
        self.check_store_hygiene().map_err(wrap)
    }

    fn client(&mut self, name: &str) -> Result<&mut Client> {
        self.clients
            .get_mut(name)
            .ok_or_else(|| Error::NotFound(format!("party {name:?} is not enrolled")))
    }

    fn lookup(&self, label: &str) -> Result<Scalar> {
        self.catalog
            .get(label)
            .copied()
            .ok_or_else(|| Error::NotFound(format!("no file labelled {label:?}")))
    }

    fn issue(&mut self, action: &Action) -> Result<()> {
        let (party, text) = describe(action);
        self.record(TraceEvent::Action { party, text });
        let rng = &mut self.rng;
        match action {
            Action::Setup { universe } => {
                if self.authority.is_some() {
                    return Err(Error::InvalidEncoding("authority already set up".into()));
                }
                self.authority = Some(Authority::setup(universe, rng)?);
            }
            Action::EnrollObject { name, attrs } | Action::EnrollUser { name, attrs } => {
                let aa = self
                    .authority
                    .as_ref()
                    .ok_or_else(|| Error::NotFound("authority is not set up".into()))?;
                if self.clients.contains_key(name) {
                    return Err(Error::InvalidEncoding(format!("{name:?} is already enrolled")));
                }
                let (id, ssk) = match action {
                    Action::EnrollObject { .. } => {
                        (PartyId::Object(name.clone()), Some(SigningKeypair::generate(rng)))
                    }
                    _ => (PartyId::User(name.clone()), None),
                };
                let msg = aa.enroll(id.clone(), attrs, rng)?;
                let fpk = *self.fog.public_key();
                self.clients.insert(name.clone(), Client::new(id, ssk, fpk));
                self.queue.push_back(msg);
            }
            Action::Encrypt { owner, label, policy, data } => {
                if self.catalog.contains_key(label) {
                    return Err(Error::InvalidEncoding(format!("file label {label:?} already used")));
                }
                let client = self
                    .clients
                    .get_mut(owner)
                    .ok_or_else(|| Error::NotFound(format!("party {owner:?} is not enrolled")))?;
                let (fname, msg) = client.encrypt(label, policy, data, rng)?;
                self.catalog.insert(label.clone(), fname);
                self.queue.push_back(msg);
            }
            Action::Fetch { client, label } => {
                let fname = self.lookup(label)?;
                let msgs = self.client(client)?.fetch(label, &fname)?;
                self.queue.extend(msgs);
            }
            Action::Delete { owner, label } => {
                let client = self
                    .clients
                    .get_mut(owner)
                    .ok_or_else(|| Error::NotFound(format!("party {owner:?} is not enrolled")))?;
                let msg = client.delete(label, rng)?;
                self.queue.push_back(msg);
            }
            Action::Verify { owner, label } => {
                let msg = self.client(owner)?.verify(label)?;
                self.queue.push_back(msg);
            }
            Action::Behave(b) => self.fog.behavior = *b,
            Action::Restart => self.restart()?,
        }
        Ok(())
    }

    /// Re-reads both stores from disk, discarding the in-memory view.
    pub fn restart(&mut self) -> Result<()> {
        self.fog.store.reload()?;
        self.cloud.store.reload()
    }

    fn drain(&mut self) -> Result<()> {
        while let Some(m) = self.queue.pop_front() {
            let (out, outcome) = match &m.receiver {
                PartyId::Fog => (self.fog.handle(&m, &mut self.rng)?, None),
                PartyId::Cloud => (self.cloud.handle(&m)?, None),
                PartyId::Authority => {
                    return Err(Error::InvalidEncoding(format!("authority received {:?}", m.kind)))
                }
                PartyId::Object(n) | PartyId::User(n) => {
                    let c = self.client(n)?;
                    if c.id != m.receiver {
                        return Err(Error::NotFound(format!("no party {}", m.receiver)));
                    }
                    (Vec::new(), c.handle(&m)?)
                }
            };
            let receiver = m.receiver.clone();
            self.record(TraceEvent::Delivered(m));
            if let Some(outcome) = outcome {
                self.record(TraceEvent::Outcome { party: receiver, outcome });
            }
            self.queue.extend(out);
        }
        Ok(())
    }

    fn record(&mut self, event: TraceEvent) {
        let entry = TraceEntry {
            step: self.step,
            seq: self.trace.entries.len(),
            event,
            state_digest: self.state_digest(),
        };
        self.trace.entries.push(entry);
    }

    /// Digest of every persistent record plus each client's protocol state.
    pub fn state_digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(format!("{:?}", self.fog.behavior));
        for (_, rec) in self.fog.store.iter() {
            h.update(rec.to_bytes());
        }
        h.update(b"|");
        for (_, rec) in self.cloud.store.iter() {
            h.update(rec.to_bytes());
        }
        for c in self.clients.values() {
            h.update(b"|");
            h.update(c.state_bytes());
        }
        h.finalize().into()
    }

    /// Re-reads both store directories: the fog may hold only key
    /// ciphertexts and the cloud only sealed payloads, and disk must agree
    /// with memory.
    pub fn check_store_hygiene(&self) -> Result<()> {
        check_dir::<FogRecord, CloudRecord>(&self.fog.store)?;
        check_dir::<CloudRecord, FogRecord>(&self.cloud.store)
    }
}

fn check_dir<T: StoreRecord + PartialEq, Other: StoreRecord>(store: &FileStore<T>) -> Result<()> {
    let mut seen = 0usize;
    for entry in fs::read_dir(store.dir())? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if name == ".lock" {
            continue;
        }
        let bytes = fs::read(&path)?;
        let violation = |what: &str| {
            Error::InvalidEncoding(format!("store hygiene: {} {what}", path.display()))
        };
        if Other::from_bytes(&bytes).is_ok() {
            return Err(violation("holds a record of the wrong kind"));
        }
        let rec = T::from_bytes(&bytes).map_err(|_| violation("is not a valid record"))?;
        if store.get(rec.fname()) != Some(&rec) {
            return Err(violation("disagrees with the in-memory store"));
        }
        seen += 1;
    }
    if seen != store.len() {
        return Err(Error::InvalidEncoding(format!(
            "store hygiene: {} has {seen} files for {} records",
            store.dir().display(),
            store.len()
        )));
    }
    Ok(())
}

fn describe(action: &Action) -> (String, String) {
    match action {
        Action::Setup { universe } => ("aa".into(), format!("setup {}", universe.join(","))),
        Action::EnrollObject { name, attrs } => (
            "aa".into(),
            format!("enroll-object {name} {}", attrs.iter().cloned().collect::<Vec<_>>().join(",")),
        ),
        Action::EnrollUser { name, attrs } => (
            "aa".into(),
            format!("enroll-user {name} {}", attrs.iter().cloned().collect::<Vec<_>>().join(",")),
        ),
        Action::Encrypt { owner, label, policy, data } => {
            (owner.clone(), format!("encrypt {label} [{policy}] {} bytes", data.len()))
        }
        Action::Fetch { client, label } => (client.clone(), format!("fetch {label}")),
        Action::Delete { owner, label } => (owner.clone(), format!("delete {label}")),
        Action::Verify { owner, label } => (owner.clone(), format!("verify {label}")),
        Action::Behave(b) => ("fog".into(), format!("behave {}", behavior_name(*b))),
        Action::Restart => ("fog".into(), "restart".into()),
    }
}

fn behavior_name(b: FogBehavior) -> &'static str {
    match b {
        FogBehavior::Honest => "honest",
        FogBehavior::SkipUpdate => "skip-update",
        FogBehavior::InconsistentGamma => "inconsistent-gamma",
    }
}

/// Parses and runs `script` in a fresh simulation rooted at `workdir`.
pub fn run_scenario(script: &str, seed: u64, workdir: impl AsRef<Path>) -> Result<TraceLog> {
    let steps = parse_script(script)?;
    let mut sim = Simulation::new(seed, workdir)?;
    for step in &steps {
        sim.execute(step)?;
    }
    Ok(sim.trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LIFECYCLE: &str = "\
STEP aa setup dummy,temp,hvac,admin
STEP aa enroll-object sensor dummy,temp,admin
STEP aa enroll-user alice dummy,temp
STEP aa enroll-user bob dummy,hvac
STEP sensor encrypt f1 \"dummy and temp\" \"21.5C at 09:00\"
STEP alice fetch f1
STEP bob fetch f1
STEP sensor delete f1
STEP sensor verify f1
STEP alice fetch f1
";

    fn outcomes(t: &TraceLog) -> Vec<String> {
        t.outcomes().map(|(p, o)| format!("{p} {o}")).collect()
    }

    #[test]
    fn lifecycle_completes_and_verifies() {
        let dir = tempfile::tempdir().unwrap();
        let trace = run_scenario(LIFECYCLE, 7, dir.path()).unwrap();
        assert_eq!(
            outcomes(&trace),
            [
                "user:alice decrypted f1 14",
                "user:bob denied f1",
                "object:sensor verified f1 true",
                "user:alice payload-missing f1",
            ]
        );
        assert_eq!(trace.flagged().count(), 0);
    }

    #[test]
    fn same_seed_same_digest() {
        let a = run_scenario(LIFECYCLE, 11, tempfile::tempdir().unwrap().path()).unwrap();
        let b = run_scenario(LIFECYCLE, 11, tempfile::tempdir().unwrap().path()).unwrap();
        assert_eq!(a.export(), b.export());
        let c = run_scenario(LIFECYCLE, 12, tempfile::tempdir().unwrap().path()).unwrap();
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn cheating_fog_is_flagged() {
        for b in ["skip-update", "inconsistent-gamma"] {
            let script = LIFECYCLE.replace(
                "STEP sensor delete f1",
                &format!("STEP fog behave {b}\nSTEP sensor delete f1"),
            );
            let trace = run_scenario(&script, 3, tempfile::tempdir().unwrap().path()).unwrap();
            assert_eq!(trace.flagged().count(), 1, "{b}");
            assert!(trace.export().contains("verified f1 false\tFLAGGED"));
        }
    }

    #[test]
    fn forwarded_request_is_byte_identical() {
        let trace = run_scenario(LIFECYCLE, 5, tempfile::tempdir().unwrap().path()).unwrap();
        let req = trace.messages().find(|m| m.kind == MessageKind::DelRequest).unwrap();
        let fwd = trace.messages().find(|m| m.kind == MessageKind::CloudDelete).unwrap();
        assert_eq!(req.body, fwd.body);
        let kinds: Vec<_> = trace.messages().map(|m| m.kind).collect();
        let i = kinds.iter().position(|k| *k == MessageKind::CloudDelete).unwrap();
        assert_eq!(kinds[i + 1], MessageKind::DelResponse);
    }

    #[test]
    fn unknown_label_is_a_scenario_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = run_scenario("STEP aa setup dummy\nSTEP aa enroll-user u dummy\nSTEP u fetch nope", 1, dir.path())
            .unwrap_err();
        assert!(matches!(err, Error::Scenario { step: 3, .. }), "{err}");
    }

    #[test]
    fn restart_keeps_stores() {
        let script = LIFECYCLE.replace("STEP alice fetch f1\nSTEP bob", "STEP fog restart\nSTEP alice fetch f1\nSTEP bob");
        let trace = run_scenario(&script, 7, tempfile::tempdir().unwrap().path()).unwrap();
        assert!(outcomes(&trace).contains(&"user:alice decrypted f1 14".to_string()));
    }
}
