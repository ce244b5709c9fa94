//! Directory-backed record stores: one TLV file per fname, `<hex(fname)>.tlv`.
//!
//! Writes go to a temporary file that is renamed over the target, so a crash
//! leaves either the old or the new record. An advisory lock on `.lock`
//! keeps two simulations from sharing a directory.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::abe::KeyCiphertext;
use crate::error::{Error, Result};
use crate::group::{GroupElem, Scalar};
use crate::payload::SealedPayload;
use crate::wire::{Decode, Encode, Reader, Writer};

const LOCK_FILE: &str = ".lock";
const EXT: &str = "tlv";

pub trait StoreRecord: Encode + Decode + Clone {
    fn fname(&self) -> &Scalar;
}

/// What the fog keeps per file: the owner's verification key and the key
/// ciphertext. Never the data payload.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FogRecord {
    pub fname: Scalar,
    pub spk: GroupElem,
    pub ct: KeyCiphertext,
}

/// What the cloud keeps per file. Never a key ciphertext.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CloudRecord {
    pub fname: Scalar,
    pub spk: GroupElem,
    pub payload: SealedPayload,
}

impl StoreRecord for FogRecord {
    fn fname(&self) -> &Scalar {
        &self.fname
    }
}

impl StoreRecord for CloudRecord {
    fn fname(&self) -> &Scalar {
        &self.fname
    }
}

impl Encode for FogRecord {
    fn encode_records(&self, w: &mut Writer) {
        w.label("fog-record").scalar(&self.fname).group(&self.spk).nested(&self.ct);
    }
}

impl Decode for FogRecord {
    fn decode_records(r: &mut Reader<'_>) -> Result<Self> {
        r.expect_label("fog-record")?;
        Ok(FogRecord {
            fname: r.scalar()?,
            spk: r.group()?,
            ct: r.nested()?,
        })
    }
}

impl Encode for CloudRecord {
    fn encode_records(&self, w: &mut Writer) {
        w.label("cloud-record")
            .scalar(&self.fname)
            .group(&self.spk)
            .nested(&self.payload);
    }
}

impl Decode for CloudRecord {
    fn decode_records(r: &mut Reader<'_>) -> Result<Self> {
        r.expect_label("cloud-record")?;
        let rec = CloudRecord {
            fname: r.scalar()?,
            spk: r.group()?,
            payload: r.nested()?,
        };
        if rec.payload.fname != rec.fname {
            return Err(Error::InvalidEncoding("payload fname does not match record".into()));
        }
        Ok(rec)
    }
}

pub type FogStore = FileStore<FogRecord>;
pub type CloudStore = FileStore<CloudRecord>;

/// Records keyed by fname, mirrored in memory and on disk.
pub struct FileStore<T> {
    dir: PathBuf,
    records: BTreeMap<Scalar, T>,
    _lock: File,
}

impl<T: StoreRecord> FileStore<T> {
    /// Opens (creating if needed) a store directory and loads every record.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let lock = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(dir.join(LOCK_FILE))?;
        lock.try_lock().map_err(|e| {
            Error::Io(format!("store {} is locked by another process: {e}", dir.display()))
        })?;

        let records = Self::load(&dir)?;
        Ok(FileStore {
            dir,
            records,
            _lock: lock,
        })
    }


    /// Discards the in-memory view and re-reads every record from disk.
    pub fn reload(&mut self) -> Result<()> {
        self.records = Self::load(&self.dir)?;
        Ok(())
    }

    fn load(dir: &Path) -> Result<BTreeMap<Scalar, T>> {
        let mut records = BTreeMap::new();
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some(EXT) {
                continue;
            }
            let rec = T::from_bytes(&fs::read(&path)?)
                .map_err(|e| Error::InvalidEncoding(format!("{}: {e}", path.display())))?;
            let expected = Self::path_for(dir, rec.fname());
            if expected != path {
                return Err(Error::InvalidEncoding(format!(
                    "{} holds the record for fname {}",
                    path.display(),
                    rec.fname()
                )));
            }
            records.insert(*rec.fname(), rec);
        }
        Ok(records)
    }

    fn path_for(dir: &Path, fname: &Scalar) -> PathBuf {
        dir.join(format!("{}.{EXT}", fname.to_hex()))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn get(&self, fname: &Scalar) -> Option<&T> {
        self.records.get(fname)
    }

    pub fn contains(&self, fname: &Scalar) -> bool {
        self.records.contains_key(fname)
    }

    /// Inserts or atomically replaces the record for its fname.
    pub fn put(&mut self, rec: T) -> Result<()> {
        let path = Self::path_for(&self.dir, rec.fname());
        let tmp = path.with_extension("tmp");
        {
            let mut f = File::create(&tmp)?;
            f.write_all(&rec.to_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &path)?;
        self.records.insert(*rec.fname(), rec);
        Ok(())
    }

    pub fn remove(&mut self, fname: &Scalar) -> Result<T> {
        let rec = self
            .records
            .remove(fname)
            .ok_or_else(|| Error::UnknownFname(fname.to_hex()))?;
        fs::remove_file(Self::path_for(&self.dir, fname))?;
        Ok(rec)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Scalar, &T)> {
        self.records.iter()
    }

    /// Raw file bytes for every record, in fname order.
    pub fn raw_files(&self) -> Result<Vec<(Scalar, Vec<u8>)>> {
        self.records
            .keys()
            .map(|f| Ok((*f, fs::read(Self::path_for(&self.dir, f))?)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{pair, TargetElem};
    use crate::payload::seal;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn record(rng: &mut ChaCha20Rng) -> CloudRecord {
        let g = GroupElem::generator();
        let k: TargetElem = pair(&g, &g).pow(&Scalar::random(rng));
        let fname = Scalar::random(rng);
        CloudRecord {
            fname,
            spk: g.pow(&Scalar::random(rng)),
            payload: seal(b"payload", &k, &fname, rng),
        }
    }

    #[test]
    fn persists_across_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let (a, b) = (record(&mut rng), record(&mut rng));
        let before = {
            let mut s = CloudStore::open(dir.path()).unwrap();
            s.put(a.clone()).unwrap();
            s.put(b.clone()).unwrap();
            s.raw_files().unwrap()
        };
        let mut s = CloudStore::open(dir.path()).unwrap();
        assert_eq!(s.get(&a.fname), Some(&a));
        assert_eq!(s.get(&b.fname), Some(&b));
        assert_eq!(s.raw_files().unwrap(), before);
        s.remove(&a.fname).unwrap();
        assert!(matches!(s.remove(&a.fname), Err(Error::UnknownFname(_))));
        drop(s);
        let s = CloudStore::open(dir.path()).unwrap();
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn second_open_is_refused_while_locked() {
        let dir = tempfile::tempdir().unwrap();
        let _first = CloudStore::open(dir.path()).unwrap();
        assert!(matches!(CloudStore::open(dir.path()), Err(Error::Io(_))));
    }

    #[test]
    fn wrong_record_type_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let rec = record(&mut rng);
        {
            let mut s = CloudStore::open(dir.path()).unwrap();
            s.put(rec).unwrap();
        }
        assert!(FogStore::open(dir.path()).is_err());
    }

    #[test]
    fn misnamed_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let rec = record(&mut rng);
        fs::write(dir.path().join(format!("{}.tlv", "00".repeat(32))), rec.to_bytes()).unwrap();
        assert!(CloudStore::open(dir.path()).is_err());
    }
}
