//! On-disk key, parameter and object-state files. Every file is a TLV stream.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use cpad::wire::{Decode, Encode, Reader, Writer};
use cpad::{Error, GroupElem, Result, Scalar};

fn write_atomic(path: &Path, bytes: &[u8], secret: bool) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    {
        let mut opts = OpenOptions::new();
        opts.write(true).create(true).truncate(true);
        #[cfg(unix)]
        {
            use std::os::unix::fs::OpenOptionsExt;
            opts.mode(if secret { 0o600 } else { 0o644 });
        }
        let mut f: File = opts.open(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn save_public(path: &Path, obj: &impl Encode) -> Result<()> {
    write_atomic(path, &obj.to_bytes(), false)
}

/// Written with owner-only permissions.
pub fn save_secret(path: &Path, obj: &impl Encode) -> Result<()> {
    write_atomic(path, &obj.to_bytes(), true)
}

pub fn load<T: Decode>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    T::from_bytes(&bytes).map_err(|e| Error::InvalidEncoding(format!("{}: {e}", path.display())))
}

/// A bare signature verification key.
pub struct VerifyingKey(pub GroupElem);

impl Encode for VerifyingKey {
    fn encode_records(&self, w: &mut Writer) {
        w.label("verifying-key").group(&self.0);
    }
}

impl Decode for VerifyingKey {
    fn decode_records(r: &mut Reader<'_>) -> Result<Self> {
        r.expect_label("verifying-key")?;
        Ok(VerifyingKey(r.group()?))
    }
}

/// The smart object's local state directory: `<hex>.tag`, `<hex>.pending`,
/// `<hex>.resp` per fname.
pub struct ObjectDir(PathBuf);

impl ObjectDir {
    pub fn new(dir: &Path) -> Self {
        ObjectDir(dir.to_path_buf())
    }

    pub fn path(&self, fname: &Scalar, ext: &str) -> PathBuf {
        self.0.join(format!("{}.{ext}", fname.to_hex()))
    }

    pub fn load<T: Decode>(&self, fname: &Scalar, ext: &str, what: &str) -> Result<T> {
        let p = self.path(fname, ext);
        if !p.exists() {
            return Err(Error::NotFound(format!("no {what} for fname {fname} in {}", self.0.display())));
        }
        load(&p)
    }

    pub fn save<T: Encode>(&self, fname: &Scalar, ext: &str, obj: &T) -> Result<()> {
        save_secret(&self.path(fname, ext), obj)
    }

    pub fn remove(&self, fname: &Scalar, ext: &str) -> Result<()> {
        match fs::remove_file(self.path(fname, ext)) {
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(e.into()),
            _ => Ok(()),
        }
    }
}
