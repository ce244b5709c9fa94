//! Timing and operation-count sweeps for encryption, key generation,
//! decryption and deletion verification.
//!
//! Every size uses an AND-chain policy `dummy AND a1 AND ... AND a(n-1)`, so
//! for encryption the share matrix is `n x n` and for decryption every
//! attribute of the key is used.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Instant;

use rand::{CryptoRng, RngCore};

use crate::abe::{self, KeyCiphertext, PublicParams, UserSecretKey};
use crate::deletion::{self, verify_deletion_proof, ObjectDeletionState, SigningKeypair};
use crate::error::{Error, Result};
use crate::group::{counter_scope, OpCounter};
use crate::payload::make_tag;
use crate::policy::{AccessPolicy, PolicyNode, DUMMY};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BenchMode {
    Encrypt,
    Keygen,
    Decrypt,
    Verify,
}

impl BenchMode {
    pub fn default_sizes(self) -> Vec<usize> {
        match self {
            BenchMode::Encrypt => vec![10, 20, 30, 40, 50],
            _ => vec![2, 4, 6, 8, 10],
        }
    }
}

impl FromStr for BenchMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "encrypt" => BenchMode::Encrypt,
            "keygen" => BenchMode::Keygen,
            "decrypt" => BenchMode::Decrypt,
            "verify" => BenchMode::Verify,
            _ => return Err(Error::InvalidEncoding(format!("unknown bench mode {s:?}"))),
        })
    }
}

impl fmt::Display for BenchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BenchMode::Encrypt => "encrypt",
            BenchMode::Keygen => "keygen",
            BenchMode::Decrypt => "decrypt",
            BenchMode::Verify => "verify",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BenchRow {
    pub size: usize,
    pub median_ns: u128,
    pub counts: OpCounter,
}

/// `dummy, a1, ..., a(n-1)`.
pub fn chain_attrs(n: usize) -> Vec<String> {
    std::iter::once(DUMMY.to_owned())
        .chain((1..n).map(|i| format!("a{i}")))
        .collect()
}

/// AND over [`chain_attrs`]`(n)`; `n >= 2`.
pub fn chain_policy(n: usize) -> Result<AccessPolicy> {
    if n < 2 {
        return Err(Error::InvalidEncoding("bench sizes must be at least 2".into()));
    }
    AccessPolicy::new(PolicyNode::And(chain_attrs(n).into_iter().map(PolicyNode::Leaf).collect()))
}

struct Fixture {
    pp: PublicParams,
    key: UserSecretKey,
    ct: KeyCiphertext,
    policy: AccessPolicy,
    attrs: BTreeSet<String>,
    msk: abe::MasterSecretKey,
    /// Post-deletion ciphertext, eta and owner state, for verify runs.
    deleted: Option<(KeyCiphertext, crate::Scalar, ObjectDeletionState)>,
}

fn fixture<R: RngCore + CryptoRng + ?Sized>(n: usize, with_deletion: bool, rng: &mut R) -> Result<Fixture> {
    let universe = chain_attrs(n);
    let (pp, msk) = abe::setup(&universe, rng)?;
    let attrs: BTreeSet<String> = universe.into_iter().collect();
    let key = abe::keygen(&msk, &pp, &attrs, rng)?;
    let policy = chain_policy(n)?;
    let (k, ct) = abe::encapsulate(&pp, &policy, rng)?;
    let deleted = if with_deletion {
        let fname = crate::Scalar::random(rng);
        let tag = make_tag(&fname, &k);
        let ssk = SigningKeypair::generate(rng);
        let fsk = SigningKeypair::generate(rng);
        let (req, state) = deletion::make_del_request(&fname, &tag, &ssk, rng);
        let (updated, resp) = deletion::reencrypt(&ct, &req, &fsk, ssk.public(), rng)?;
        Some((updated, resp.eta, state))
    } else {
        None
    };
    Ok(Fixture {
        pp,
        key,
        ct,
        policy,
        attrs,
        msk,
        deleted,
    })
}

fn run_once<R: RngCore + CryptoRng + ?Sized>(mode: BenchMode, fx: &Fixture, rng: &mut R) -> Result<()> {
    match mode {
        BenchMode::Encrypt => abe::encapsulate(&fx.pp, &fx.policy, rng).map(drop),
        BenchMode::Keygen => abe::keygen(&fx.msk, &fx.pp, &fx.attrs, rng).map(drop),
        BenchMode::Decrypt => abe::decapsulate(&fx.ct, &fx.key).map(drop),
        BenchMode::Verify => {
            let (ct, eta, state) = fx.deleted.as_ref().expect("verify fixture has a deletion");
            match verify_deletion_proof(eta, ct, &fx.key, state)? {
                true => Ok(()),
                false => Err(Error::InvalidEncoding("bench deletion did not verify".into())),
            }
        }
    }
}

fn median(mut xs: Vec<u128>) -> u128 {
    xs.sort_unstable();
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2
    }
}

/// Times `trials` runs per size after `warmup` discarded runs. Counts come
/// from the first warmup run (or an extra run when `warmup == 0`).
pub fn run_bench<R: RngCore + CryptoRng + ?Sized>(
    mode: BenchMode,
    sizes: &[usize],
    trials: usize,
    warmup: usize,
    rng: &mut R,
) -> Result<Vec<BenchRow>> {
    if trials == 0 {
        return Err(Error::InvalidEncoding("trials must be positive".into()));
    }
    let mut fixtures = Vec::with_capacity(sizes.len());
    let mut rows = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let fx = fixture(size, mode == BenchMode::Verify, rng)?;
        let (res, counts) = counter_scope(|| run_once(mode, &fx, rng));
        res?;
        for _ in 1..warmup {
            run_once(mode, &fx, rng)?;
        }
        fixtures.push(fx);
        rows.push(BenchRow {
            size,
            median_ns: 0,
            counts,
        });
    }
    // Round-robin over sizes so slow spells on the host hit every size alike.
    let mut times = vec![Vec::with_capacity(trials); sizes.len()];
    for _ in 0..trials {
        for (fx, t) in fixtures.iter().zip(&mut times) {
            let start = Instant::now();
            run_once(mode, fx, rng)?;
            t.push(start.elapsed().as_nanos());
        }
    }
    for (row, t) in rows.iter_mut().zip(times) {
        row.median_ns = median(t);
    }
    Ok(rows)
}

pub const TSV_HEADER: &str = "size\tmedian_ns\texp_G\tmul_G\texp_GT\tmul_GT\tpairings";

pub fn to_tsv(rows: &[BenchRow]) -> String {
    let mut out = String::from(TSV_HEADER);
    out.push('\n');
    for r in rows {
        let c = &r.counts;
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.size, r.median_ns, c.exp_g, c.mul_g, c.exp_gt, c.mul_gt, c.pairings
        );
    }
    out
}

/// Ordinary least squares `y = a + b x`; returns `(a, b, r_squared)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (a, b, r2)
}
