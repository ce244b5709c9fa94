//! `cpad`: key management, encryption, assured deletion and benchmarks.
//!
//! Exit status: 0 success, 1 protocol-false (not authorized, verification
//! failed, data gone), 2 usage error, 3 I/O or encoding error.

mod files;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use cpad::abe::{self, KeyCiphertext, MasterSecretKey, PublicParams, UserSecretKey};
use cpad::bench::{self, BenchMode};
use cpad::deletion::{
    self, DeletionResponse, FogBehavior, ObjectDeletionState, SigningKeypair,
};
use cpad::fogsim::{self, CloudRecord, CloudStore, FogRecord, FogStore};
use cpad::payload::{self, DeletionTag};
use cpad::{AccessPolicy, Error, Scalar};

use files::{load, save_public, save_secret, ObjectDir, VerifyingKey};

#[derive(Parser)]
#[command(name = "cpad", version, about = "Attribute-based encryption with verifiable deletion")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate public parameters and the master key.
    Setup {
        #[arg(long, value_delimiter = ',', required = true)]
        universe: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        /// Deterministic randomness, for reproducible test fixtures only.
        #[arg(long, hide = true)]
        seed: Option<u64>,
    },
    /// Issue an attribute key.
    Keygen {
        #[arg(long, value_delimiter = ',', required = true)]
        attrs: Vec<String>,
        #[arg(long)]
        msk: PathBuf,
        #[arg(long)]
        pp: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, hide = true)]
        seed: Option<u64>,
    },
    /// Generate a signing keypair (secret at --out, public key at --pub).
    Signkey {
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "pub")]
        public: Option<PathBuf>,
        #[arg(long, hide = true)]
        seed: Option<u64>,
    },
    /// Encrypt a file and upload it; prints the fname.
    Encrypt {
        #[arg(long)]
        policy: String,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        fog: PathBuf,
        #[arg(long)]
        cloud: PathBuf,
        #[arg(long)]
        pp: PathBuf,
        /// The owner's signing key.
        #[arg(long)]
        ssk: PathBuf,
        /// Owner-local state directory (deletion tags).
        #[arg(long)]
        object: PathBuf,
        #[arg(long, hide = true)]
        seed: Option<u64>,
    },
    /// Fetch and decrypt a file.
    Decrypt {
        #[arg(long)]
        fname: String,
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        fog: PathBuf,
        #[arg(long)]
        cloud: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Issue a deletion request and let the fog and cloud act on it.
    Delete {
        #[arg(long)]
        fname: String,
        #[arg(long)]
        ssk: PathBuf,
        /// The fog's signing key.
        #[arg(long)]
        fsk: PathBuf,
        #[arg(long)]
        fog: PathBuf,
        #[arg(long)]
        cloud: PathBuf,
        #[arg(long)]
        object: PathBuf,
        /// Simulate a misbehaving fog.
        #[arg(long, value_enum, hide = true, default_value = "honest")]
        fog_behavior: Behavior,
        #[arg(long, hide = true)]
        seed: Option<u64>,
    },
    /// Check the fog's deletion proof; exit 0 if it holds, 1 if not.
    Verify {
        #[arg(long)]
        fname: String,
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        fpk: PathBuf,
        #[arg(long)]
        object: PathBuf,
        #[arg(long)]
        fog: PathBuf,
    },
    /// Time an operation across sizes and record operation counts.
    Bench {
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        warmup: usize,
        /// Tab-separated report.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a fog simulation script.
    Simulate {
        #[arg(long)]
        script: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        workdir: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Behavior {
    Honest,
    SkipUpdate,
    InconsistentGamma,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Encrypt,
    Keygen,
    Decrypt,
    Verify,
}

/// A failure with its exit status.
struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Syntax { .. }
            | Error::EmptyPolicy
            | Error::NonMonotonePolicy(_)
            | Error::PolicyMissingDummy
            | Error::DummyNotUnique
            | Error::MissingDummyAttribute
            | Error::UnknownAttribute(_)
            | Error::DuplicateAttribute(_) => 2,
            Error::NotAuthorized
            | Error::BadSignature
            | Error::BadFogSignature
            | Error::AuthenticationFailure
            | Error::NotFound(_)
            | Error::UnknownFname(_)
            | Error::NoPendingRequest(_)
            | Error::RequestPending(_)
            | Error::Scenario { .. } => 1,
            Error::InvalidEncoding(_) | Error::Io(_) => 3,
        };
        Failure {
            code,
            msg: e.to_string(),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn rng_for(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => {
            eprintln!("warning: deterministic seed in use; keys are not secret");
            ChaCha20Rng::seed_from_u64(s)
        }
        None => ChaCha20Rng::from_entropy(),
    }
}

fn parse_fname(s: &str) -> std::result::Result<Scalar, Failure> {
    Scalar::from_hex(s).map_err(|e| Failure {
        code: 2,
        msg: format!("--fname: {e}"),
    })
}

fn attr_set(v: &[String]) -> BTreeSet<String> {
    v.iter().map(|a| a.trim().to_owned()).filter(|a| !a.is_empty()).collect()
}

fn cmd_setup(universe: &[String], out: &Path, seed: Option<u64>) -> Outcome {
    let mut rng = rng_for(seed);
    let universe: Vec<String> = universe.iter().map(|a| a.trim().to_owned()).collect();
    let (pp, msk) = abe::setup(&universe, &mut rng)?;
    fs::create_dir_all(out).map_err(Error::from)?;
    save_public(&out.join("pp.tlv"), &pp)?;
    save_secret(&out.join("msk.tlv"), &msk)?;
    Ok(())
}

fn cmd_keygen(attrs: &[String], msk: &Path, pp: &Path, out: &Path, seed: Option<u64>) -> Outcome {
    let mut rng = rng_for(seed);
    let msk: MasterSecretKey = load(msk)?;
    let pp: PublicParams = load(pp)?;
    let key = abe::keygen(&msk, &pp, &attr_set(attrs), &mut rng)?;
    save_secret(out, &key)?;
    Ok(())
}

fn cmd_signkey(out: &Path, public: Option<&Path>, seed: Option<u64>) -> Outcome {
    let mut rng = rng_for(seed);
    let kp = SigningKeypair::generate(&mut rng);
    save_secret(out, &kp)?;
    let pub_path = public.map(Path::to_path_buf).unwrap_or_else(|| out.with_extension("pub"));
    save_public(&pub_path, &VerifyingKey(*kp.public()))?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_encrypt(
    policy: &str,
    input: &Path,
    fog: &Path,
    cloud: &Path,
    pp: &Path,
    ssk: &Path,
    object: &Path,
    seed: Option<u64>,
) -> Outcome {
    let policy: AccessPolicy = policy.parse()?;
    let data = fs::read(input).map_err(|e| Error::Io(format!("{}: {e}", input.display())))?;
    let pp: PublicParams = load(pp)?;
    let ssk: SigningKeypair = load(ssk)?;
    let mut fog = FogStore::open(fog)?;
    let mut cloud = CloudStore::open(cloud)?;
    let mut rng = rng_for(seed);

    let fname = Scalar::random(&mut rng);
    let (k, ct) = abe::encapsulate(&pp, &policy, &mut rng)?;
    let sealed = payload::seal(&data, &k, &fname, &mut rng);
    ObjectDir::new(object).save(&fname, "tag", &payload::make_tag(&fname, &k))?;
    let spk = *ssk.public();
    fog.put(FogRecord { fname, spk, ct })?;
    cloud.put(CloudRecord {
        fname,
        spk,
        payload: sealed,
    })?;
    println!("{fname}");
    Ok(())
}

fn cmd_decrypt(fname: &str, key: &Path, fog: &Path, cloud: &Path, out: &Path) -> Outcome {
    let fname = parse_fname(fname)?;
    let key: UserSecretKey = load(key)?;
    let fog = FogStore::open(fog)?;
    let cloud = CloudStore::open(cloud)?;
    let rec = fog
        .get(&fname)
        .ok_or_else(|| Error::NotFound(format!("fog has no ciphertext for {fname}")))?;
    let k = abe::decapsulate(&rec.ct, &key)?;
    let sealed = cloud
        .get(&fname)
        .ok_or_else(|| Error::NotFound(format!("cloud has no payload for {fname}")))?;
    let data = payload::unseal(&sealed.payload, &k, &fname)?;
    fs::write(out, data).map_err(Error::from)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_delete(
    fname: &str,
    ssk: &Path,
    fsk: &Path,
    fog: &Path,
    cloud: &Path,
    object: &Path,
    behavior: Behavior,
    seed: Option<u64>,
) -> Outcome {
    let fname = parse_fname(fname)?;
    let ssk: SigningKeypair = load(ssk)?;
    let fsk: SigningKeypair = load(fsk)?;
    let obj = ObjectDir::new(object);
    let tag: DeletionTag = obj.load(&fname, "tag", "deletion tag")?;
    if obj.path(&fname, "pending").exists() {
        return Err(Error::RequestPending(fname.to_hex()).into());
    }
    let mut fog = FogStore::open(fog)?;
    let mut cloud = fogsim::Cloud::new(CloudStore::open(cloud)?);
    let mut rng = rng_for(seed);

    let (req, state) = deletion::make_del_request(&fname, &tag, &ssk, &mut rng);
    obj.save(&fname, "pending", &state)?;

    let rec = fog
        .get(&fname)
        .cloned()
        .ok_or_else(|| Error::UnknownFname(fname.to_hex()))?;
    if !req.verify(&rec.spk) {
        return Err(Error::BadSignature.into());
    }
    cloud.cloud_delete(&fname, &req)?;
    let behavior = match behavior {
        Behavior::Honest => FogBehavior::Honest,
        Behavior::SkipUpdate => FogBehavior::SkipUpdate,
        Behavior::InconsistentGamma => FogBehavior::InconsistentGamma,
    };
    let (ct, resp) = deletion::reencrypt_as(behavior, &rec.ct, &req, &fsk, &rec.spk, &mut rng)?;
    fog.put(FogRecord { ct, ..rec })?;
    obj.save(&fname, "resp", &resp)?;
    Ok(())
}

fn cmd_verify(fname: &str, key: &Path, fpk: &Path, object: &Path, fog: &Path) -> Outcome {
    let fname = parse_fname(fname)?;
    let key: UserSecretKey = load(key)?;
    let VerifyingKey(fpk) = load(fpk)?;
    let obj = ObjectDir::new(object);
    let state: ObjectDeletionState = obj.load(&fname, "pending", "pending deletion")?;
    let resp: DeletionResponse = obj.load(&fname, "resp", "deletion response")?;
    let fog = FogStore::open(fog)?;
    let ct: &KeyCiphertext = &fog
        .get(&fname)
        .ok_or_else(|| Error::NotFound(format!("fog has no ciphertext for {fname}")))?
        .ct;
    let ok = deletion::verify_deletion(&resp, ct, &key, &state, &fpk, &fname)?;
    obj.remove(&fname, "pending")?;
    obj.remove(&fname, "resp")?;
    if ok {
        println!("deletion verified");
        Ok(())
    } else {
        Err(Failure {
            code: 1,
            msg: "deletion proof did not verify".into(),
        })
    }
}

fn cmd_bench(
    mode: Mode,
    sizes: Option<Vec<usize>>,
    trials: usize,
    warmup: usize,
    out: Option<&Path>,
    seed: Option<u64>,
) -> Outcome {
    let mode = match mode {
        Mode::Encrypt => BenchMode::Encrypt,
        Mode::Keygen => BenchMode::Keygen,
        Mode::Decrypt => BenchMode::Decrypt,
        Mode::Verify => BenchMode::Verify,
    };
    let sizes = sizes.unwrap_or_else(|| mode.default_sizes());
    if trials == 0 || sizes.iter().any(|&s| s < 2) {
        return Err(Failure {
            code: 2,
            msg: "--trials must be positive and every size at least 2".into(),
        });
    }
    let mut rng = match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_entropy(),
    };
    let rows = bench::run_bench(mode, &sizes, trials, warmup, &mut rng)?;
    println!(
        "{:>6} {:>12} {:>6} {:>6} {:>6} {:>6} {:>8}",
        "size", "median_ms", "exp_G", "mul_G", "exp_GT", "mul_GT", "pairings"
    );
    for r in &rows {
        let c = &r.counts;
        println!(
            "{:>6} {:>12.3} {:>6} {:>6} {:>6} {:>6} {:>8}",
            r.size,
            r.median_ns as f64 / 1e6,
            c.exp_g,
            c.mul_g,
            c.exp_gt,
            c.mul_gt,
            c.pairings
        );
    }
    if rows.len() >= 2 {
        let xs: Vec<f64> = rows.iter().map(|r| r.size as f64).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.median_ns as f64).collect();
        let (_, slope, r2) = bench::linear_fit(&xs, &ys);
        println!("linear fit: {:.3} ms per unit, R^2 = {r2:.4}", slope / 1e6);
    }
    if let Some(out) = out {
        fs::write(out, bench::to_tsv(&rows)).map_err(Error::from)?;
    }
    Ok(())
}

fn cmd_simulate(script: &Path, seed: u64, workdir: &Path, trace: Option<&Path>) -> Outcome {
    let text = fs::read_to_string(script).map_err(|e| Error::Io(format!("{}: {e}", script.display())))?;
    let log = fogsim::run_scenario(&text, seed, workdir)?;
    for (party, outcome) in log.outcomes() {
        println!("{party}\t{outcome}");
    }
    println!("trace digest {}", hex::encode(log.digest()));
    if let Some(t) = trace {
        fs::write(t, log.export()).map_err(Error::from)?;
    }
    match log.flagged().count() {
        0 => Ok(()),
        n => Err(Failure {
            code: 1,
            msg: format!("{n} deletion verification(s) failed"),
        }),
    }
}

fn run(cli: Cli) -> Outcome {
    match cli.cmd {
        Cmd::Setup { universe, out, seed } => cmd_setup(&universe, &out, seed),
        Cmd::Keygen {
            attrs,
            msk,
            pp,
            out,
            seed,
        } => cmd_keygen(&attrs, &msk, &pp, &out, seed),
        Cmd::Signkey { out, public, seed } => cmd_signkey(&out, public.as_deref(), seed),
        Cmd::Encrypt {
            policy,
            input,
            fog,
            cloud,
            pp,
            ssk,
            object,
            seed,
        } => cmd_encrypt(&policy, &input, &fog, &cloud, &pp, &ssk, &object, seed),
        Cmd::Decrypt {
            fname,
            key,
            fog,
            cloud,
            out,
        } => cmd_decrypt(&fname, &key, &fog, &cloud, &out),
        Cmd::Delete {
            fname,
            ssk,
            fsk,
            fog,
            cloud,
            object,
            fog_behavior,
            seed,
        } => cmd_delete(&fname, &ssk, &fsk, &fog, &cloud, &object, fog_behavior, seed),
        Cmd::Verify {
            fname,
            key,
            fpk,
            object,
            fog,
        } => cmd_verify(&fname, &key, &fpk, &object, &fog),
        Cmd::Bench {
            mode,
            sizes,
            trials,
            warmup,
            out,
            seed,
        } => cmd_bench(mode, sizes, trials, warmup, out.as_deref(), seed),
        Cmd::Simulate {
            script,
            seed,
            workdir,
            trace,
        } => cmd_simulate(&script, seed, &workdir, trace.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("cpad: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
