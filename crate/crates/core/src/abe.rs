//! Ciphertext-policy ABE over LSSS policies (Waters-style, small universe).
//!
//! The attribute authority runs [`setup`] and [`keygen`]; data owners run
//! [`encapsulate`] to bind a fresh `G_T` key `k` to a policy; any holder of a
//! satisfying key recovers `k` with [`decapsulate`].

use std::collections::{BTreeMap, BTreeSet};

use rand::{CryptoRng, RngCore};

use crate::error::{Error, Result};
use crate::group::{pair, GroupElem, Scalar, TargetElem};
use crate::policy::{AccessPolicy, DUMMY};
use crate::wire::{count, Decode, Encode, Reader, Writer};
use crate::{LsssProgram, ReconstructionPlan};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicParams {
    pub g: GroupElem,
    /// `e(g, g)^alpha`
    pub e_gg_alpha: TargetElem,
    /// `g^a`
    pub g_a: GroupElem,
    /// One random base `h_x` per attribute in the universe.
    pub attr_bases: BTreeMap<String, GroupElem>,
    /// Attribute universe in setup order.
    pub universe: Vec<String>,
}

impl PublicParams {
    pub fn attr_base(&self, attr: &str) -> Result<&GroupElem> {
        self.attr_bases
            .get(attr)
            .ok_or_else(|| Error::UnknownAttribute(attr.to_owned()))
    }
}

/// `g^alpha`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MasterSecretKey {
    pub g_alpha: GroupElem,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserSecretKey {
    /// `g^alpha g^(a t)`
    pub k: GroupElem,
    /// `g^t`
    pub l: GroupElem,
    /// `K_x = h_x^t` for every attribute the key holds.
    pub per_attr: BTreeMap<String, GroupElem>,
}

impl UserSecretKey {
    pub fn attrs(&self) -> BTreeSet<String> {
        self.per_attr.keys().cloned().collect()
    }

    pub fn component(&self, attr: &str) -> Result<&GroupElem> {
        self.per_attr
            .get(attr)
            .ok_or_else(|| Error::UnknownAttribute(attr.to_owned()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CiphertextRow {
    /// `g^(a lambda_i) h_rho(i)^(-r_i)`
    pub c: GroupElem,
    /// `g^(r_i)`
    pub d: GroupElem,
}

/// ABE encryption of the data key `k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyCiphertext {
    /// `k e(g,g)^(alpha s)`
    pub c_bar: TargetElem,
    /// `g^s`
    pub c_prime: GroupElem,
    pub rows: Vec<CiphertextRow>,
    pub prog: LsssProgram,
}

impl KeyCiphertext {
    /// Indices of rows labelled with the dummy attribute.
    pub fn dummy_rows(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.rows.len()).filter(|&i| self.prog.rho(i) == DUMMY)
    }
}

/// Encryption randomness kept for algebraic invariant checks.
#[cfg(any(test, feature = "test-oracles"))]
#[derive(Clone, Debug)]
pub struct EncapsulationOracle {
    pub s: Scalar,
    pub shares: crate::ShareVector,
    pub r: Vec<Scalar>,
}

/// Master exponents kept for algebraic invariant checks.
#[cfg(any(test, feature = "test-oracles"))]
#[derive(Clone, Debug)]
pub struct SetupOracle {
    pub alpha: Scalar,
    pub a: Scalar,
}

/// Attribute-authority setup over a fixed universe that must contain `dummy`.
pub fn setup<R: RngCore + CryptoRng + ?Sized>(
    universe: &[impl AsRef<str>],
    rng: &mut R,
) -> Result<(PublicParams, MasterSecretKey)> {
    setup_inner(universe, rng).map(|(pp, msk, _, _)| (pp, msk))
}

#[cfg(any(test, feature = "test-oracles"))]
pub fn setup_traced<R: RngCore + CryptoRng + ?Sized>(
    universe: &[impl AsRef<str>],
    rng: &mut R,
) -> Result<(PublicParams, MasterSecretKey, SetupOracle)> {
    setup_inner(universe, rng).map(|(pp, msk, alpha, a)| (pp, msk, SetupOracle { alpha, a }))
}

fn setup_inner<R: RngCore + CryptoRng + ?Sized>(
    universe: &[impl AsRef<str>],
    rng: &mut R,
) -> Result<(PublicParams, MasterSecretKey, Scalar, Scalar)> {
    let universe: Vec<String> = universe.iter().map(|a| a.as_ref().to_owned()).collect();
    let mut seen = BTreeSet::new();
    for a in &universe {
        if !seen.insert(a.as_str()) {
            return Err(Error::DuplicateAttribute(a.clone()));
        }
    }
    if !seen.contains(DUMMY) {
        return Err(Error::MissingDummyAttribute);
    }

    let g = GroupElem::generator();
    let alpha = Scalar::random_nonzero(rng);
    let a = Scalar::random_nonzero(rng);
    let g_alpha = g.pow(&alpha);
    let g_a = g.pow(&a);
    let attr_bases = universe
        .iter()
        .map(|x| (x.clone(), g.pow(&Scalar::random_nonzero(rng))))
        .collect();
    let e_gg_alpha = pair(&g_alpha, &g);

    let pp = PublicParams {
        g,
        e_gg_alpha,
        g_a,
        attr_bases,
        universe,
    };
    Ok((pp, MasterSecretKey { g_alpha }, alpha, a))
}

/// Issues a key for `attrs`, which must include `dummy` and lie in the universe.
pub fn keygen<R: RngCore + CryptoRng + ?Sized>(
    msk: &MasterSecretKey,
    pp: &PublicParams,
    attrs: &BTreeSet<String>,
    rng: &mut R,
) -> Result<UserSecretKey> {
    if !attrs.contains(DUMMY) {
        return Err(Error::MissingDummyAttribute);
    }
    let bases: Vec<(&String, &GroupElem)> = attrs
        .iter()
        .map(|x| pp.attr_base(x).map(|h| (x, h)))
        .collect::<Result<_>>()?;

    let t = Scalar::random_nonzero(rng);
    let k = msk.g_alpha * pp.g_a.pow(&t);
    let l = pp.g.pow(&t);
    let per_attr = bases.into_iter().map(|(x, h)| (x.clone(), h.pow(&t))).collect();
    Ok(UserSecretKey { k, l, per_attr })
}

/// Checks a precompiled program has exactly one dummy row and that the dummy
/// row is required by every authorized set.
pub fn check_program_dummy(prog: &LsssProgram) -> Result<()> {
    let dummy_rows = prog.labels().iter().filter(|a| *a == DUMMY).count();
    match dummy_rows {
        0 => return Err(Error::PolicyMissingDummy),
        1 => {}
        _ => return Err(Error::DummyNotUnique),
    }
    let others: BTreeSet<String> = prog.labels().iter().filter(|a| *a != DUMMY).cloned().collect();
    if prog.is_authorized(&others) {
        return Err(Error::PolicyMissingDummy);
    }
    Ok(())
}

/// Compiles `policy` and encapsulates a fresh `k` under it.
pub fn encapsulate<R: RngCore + CryptoRng + ?Sized>(
    pp: &PublicParams,
    policy: &AccessPolicy,
    rng: &mut R,
) -> Result<(TargetElem, KeyCiphertext)> {
    policy.check_dummy_placement()?;
    let prog = LsssProgram::compile(policy)?;
    encapsulate_inner(pp, prog, rng).map(|(k, ct, _)| (k, ct))
}

/// Encapsulates under a precompiled program.
pub fn encapsulate_program<R: RngCore + CryptoRng + ?Sized>(
    pp: &PublicParams,
    prog: LsssProgram,
    rng: &mut R,
) -> Result<(TargetElem, KeyCiphertext)> {
    check_program_dummy(&prog)?;
    encapsulate_inner(pp, prog, rng).map(|(k, ct, _)| (k, ct))
}

#[cfg(any(test, feature = "test-oracles"))]
pub fn encapsulate_traced<R: RngCore + CryptoRng + ?Sized>(
    pp: &PublicParams,
    policy: &AccessPolicy,
    rng: &mut R,
) -> Result<(TargetElem, KeyCiphertext, EncapsulationOracle)> {
    policy.check_dummy_placement()?;
    let prog = LsssProgram::compile(policy)?;
    encapsulate_inner(pp, prog, rng)
}

#[cfg(any(test, feature = "test-oracles"))]
type Trace = EncapsulationOracle;
#[cfg(not(any(test, feature = "test-oracles")))]
type Trace = ();

fn encapsulate_inner<R: RngCore + CryptoRng + ?Sized>(
    pp: &PublicParams,
    prog: LsssProgram,
    rng: &mut R,
) -> Result<(TargetElem, KeyCiphertext, Trace)> {
    let bases: Vec<&GroupElem> = prog
        .labels()
        .iter()
        .map(|x| pp.attr_base(x))
        .collect::<Result<_>>()?;

    let k = pp.e_gg_alpha.pow(&Scalar::random_nonzero(rng));
    let s = Scalar::random(rng);
    let shares = prog.make_shares(s, rng);

    let c_bar = k * pp.e_gg_alpha.pow(&s);
    let c_prime = pp.g.pow(&s);
    let mut r = Vec::with_capacity(bases.len());
    let rows = bases
        .iter()
        .zip(&shares.lambda)
        .map(|(h, lambda)| {
            let ri = Scalar::random(rng);
            r.push(ri);
            CiphertextRow {
                c: pp.g_a.pow(lambda) * h.pow(&-ri),
                d: pp.g.pow(&ri),
            }
        })
        .collect();

    #[cfg(any(test, feature = "test-oracles"))]
    let trace = EncapsulationOracle { s, shares, r };
    #[cfg(not(any(test, feature = "test-oracles")))]
    let trace = {
        let _ = (shares, r);
    };

    let ct = KeyCiphertext {
        c_bar,
        c_prime,
        rows,
        prog,
    };
    Ok((k, ct, trace))
}

/// `prod_{i in I} (e(C_i, L) e(D_i, K_rho(i)))^omega_i`.
///
/// `dummy_override` replaces the key component used on dummy rows; deletion
/// verification uses it with the adjusted component.
pub(crate) fn blinding_product(
    ct: &KeyCiphertext,
    sk: &UserSecretKey,
    plan: &ReconstructionPlan,
    dummy_override: Option<&GroupElem>,
) -> Result<TargetElem> {
    let mut acc: Option<TargetElem> = None;
    for (i, omega) in plan.iter() {
        let attr = ct.prog.rho(i);
        let k_x = match dummy_override {
            Some(adj) if attr == DUMMY => adj,
            _ => sk.component(attr)?,
        };
        let row = &ct.rows[i];
        let b = (pair(&row.c, &sk.l) * pair(&row.d, k_x)).pow(omega);
        acc = Some(match acc {
            None => b,
            Some(a) => a * b,
        });
    }
    Ok(acc.unwrap_or_else(TargetElem::identity))
}

/// `C_bar A / e(C', K)`.
pub(crate) fn unblind(ct: &KeyCiphertext, sk: &UserSecretKey, a: &TargetElem) -> TargetElem {
    let e_gg_alpha_s = pair(&ct.c_prime, &sk.k).div(a);
    ct.c_bar.div(&e_gg_alpha_s)
}

/// Recovers `k` for a key whose attributes satisfy the ciphertext policy.
///
/// Fails only with [`Error::NotAuthorized`]. A ciphertext whose dummy row has
/// been re-encrypted still decapsulates, to a wrong value.
pub fn decapsulate(ct: &KeyCiphertext, sk: &UserSecretKey) -> Result<TargetElem> {
    if ct.rows.len() != ct.prog.num_rows() {
        return Err(Error::InvalidEncoding("row count does not match program".into()));
    }
    let plan = ct.prog.find_reconstruction(&sk.attrs())?;
    let a = blinding_product(ct, sk, &plan, None)?;
    Ok(unblind(ct, sk, &a))
}

impl Encode for PublicParams {
    fn encode_records(&self, w: &mut Writer) {
        w.group(&self.g)
            .target(&self.e_gg_alpha)
            .group(&self.g_a)
            .uint(count(self.universe.len()));
        for x in &self.universe {
            w.attr(x).group(&self.attr_bases[x]);
        }
    }
}

impl Decode for PublicParams {
    fn decode_records(r: &mut Reader<'_>) -> Result<Self> {
        let g = r.group()?;
        let e_gg_alpha = r.target()?;
        let g_a = r.group()?;
        let n = r.uint()?;
        let mut universe = Vec::new();
        let mut attr_bases = BTreeMap::new();
        for _ in 0..n {
            let x = r.attr()?;
            let h = r.group()?;
            if attr_bases.insert(x.clone(), h).is_some() {
                return Err(Error::DuplicateAttribute(x));
            }
            universe.push(x);
        }
        if !attr_bases.contains_key(DUMMY) {
            return Err(Error::MissingDummyAttribute);
        }
        if e_gg_alpha.is_identity() {
            return Err(Error::InvalidEncoding("e(g,g)^alpha is the identity".into()));
        }
        Ok(PublicParams {
            g,
            e_gg_alpha,
            g_a,
            attr_bases,
            universe,
        })
    }
}

impl Encode for MasterSecretKey {
    fn encode_records(&self, w: &mut Writer) {
        w.group(&self.g_alpha);
    }
}

impl Decode for MasterSecretKey {
    fn decode_records(r: &mut Reader<'_>) -> Result<Self> {
        Ok(MasterSecretKey { g_alpha: r.group()? })
    }
}

impl Encode for UserSecretKey {
    fn encode_records(&self, w: &mut Writer) {
        w.group(&self.k).group(&self.l).uint(count(self.per_attr.len()));
        for (x, kx) in &self.per_attr {
            w.attr(x).group(kx);
        }
    }
}

impl Decode for UserSecretKey {
    fn decode_records(r: &mut Reader<'_>) -> Result<Self> {
        let k = r.group()?;
        let l = r.group()?;
        let n = r.uint()?;
        let mut per_attr = BTreeMap::new();
        for _ in 0..n {
            let x = r.attr()?;
            let kx = r.group()?;
            if per_attr.insert(x.clone(), kx).is_some() {
                return Err(Error::DuplicateAttribute(x));
            }
        }
        Ok(UserSecretKey { k, l, per_attr })
    }
}

impl Encode for KeyCiphertext {
    /// Program, `C_bar`, `C'`, then `(C_i, D_i)` in row order.
    fn encode_records(&self, w: &mut Writer) {
        w.nested(&self.prog).target(&self.c_bar).group(&self.c_prime);
        for row in &self.rows {
            w.group(&row.c).group(&row.d);
        }
    }
}

impl Decode for KeyCiphertext {
    fn decode_records(r: &mut Reader<'_>) -> Result<Self> {
        let prog: LsssProgram = r.nested()?;
        let c_bar = r.target()?;
        let c_prime = r.group()?;
        let rows = (0..prog.num_rows())
            .map(|_| {
                Ok(CiphertextRow {
                    c: r.group()?,
                    d: r.group()?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(KeyCiphertext {
            c_bar,
            c_prime,
            rows,
            prog,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::counter_scope;
    use crate::policy::parse_policy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn set(attrs: &[&str]) -> BTreeSet<String> {
        attrs.iter().map(|s| s.to_string()).collect()
    }

    fn universe() -> Vec<&'static str> {
        vec!["dummy", "A", "B", "C", "D"]
    }

    #[test]
    fn setup_validates_universe() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        assert_eq!(setup(&["A", "B"], &mut rng).unwrap_err(), Error::MissingDummyAttribute);
        assert_eq!(
            setup(&["dummy", "A", "A"], &mut rng).unwrap_err(),
            Error::DuplicateAttribute("A".into())
        );
        let (pp, msk) = setup(&universe(), &mut rng).unwrap();
        assert_eq!(pp.attr_bases.len(), 5);
        assert_eq!(pair(&msk.g_alpha, &pp.g), pp.e_gg_alpha);
        assert!(!pp.e_gg_alpha.is_identity());
    }

    #[test]
    fn keygen_invariants_and_errors() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let (pp, msk) = setup(&universe(), &mut rng).unwrap();
        let sk = keygen(&msk, &pp, &set(&["dummy", "A"]), &mut rng).unwrap();
        assert_eq!(pair(&sk.k, &pp.g), pp.e_gg_alpha * pair(&pp.g_a, &sk.l));
        for (x, kx) in &sk.per_attr {
            assert_eq!(pair(kx, &pp.g), pair(&pp.attr_bases[x], &sk.l));
        }
        assert_eq!(
            keygen(&msk, &pp, &set(&["A"]), &mut rng).unwrap_err(),
            Error::MissingDummyAttribute
        );
        assert_eq!(
            keygen(&msk, &pp, &set(&["dummy", "Z"]), &mut rng).unwrap_err(),
            Error::UnknownAttribute("Z".into())
        );
    }

    #[test]
    fn roundtrip_and_rejection() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let (pp, msk) = setup(&universe(), &mut rng).unwrap();
        let policy = parse_policy("dummy AND (A OR (B AND C))").unwrap();
        let (k, ct) = encapsulate(&pp, &policy, &mut rng).unwrap();
        for attrs in [&["dummy", "A"][..], &["dummy", "B", "C"], &["dummy", "A", "B", "C", "D"]] {
            let sk = keygen(&msk, &pp, &set(attrs), &mut rng).unwrap();
            assert_eq!(decapsulate(&ct, &sk).unwrap(), k);
        }
        for attrs in [&["dummy"][..], &["dummy", "B"], &["dummy", "D"]] {
            let sk = keygen(&msk, &pp, &set(attrs), &mut rng).unwrap();
            assert_eq!(decapsulate(&ct, &sk), Err(Error::NotAuthorized));
        }
    }

    #[test]
    fn encapsulate_policy_errors() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let (pp, _) = setup(&universe(), &mut rng).unwrap();
        let p = |s: &str| parse_policy(s).unwrap();
        assert_eq!(encapsulate(&pp, &p("A AND B"), &mut rng).unwrap_err(), Error::PolicyMissingDummy);
        assert_eq!(
            encapsulate(&pp, &p("dummy AND (A OR dummy)"), &mut rng).unwrap_err(),
            Error::DummyNotUnique
        );
        assert_eq!(
            encapsulate(&pp, &p("dummy AND Q"), &mut rng).unwrap_err(),
            Error::UnknownAttribute("Q".into())
        );
    }

    #[test]
    fn precompiled_programs_are_checked() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let (pp, msk) = setup(&universe(), &mut rng).unwrap();
        let good = LsssProgram::compile(&p("dummy AND (A OR B)")).unwrap();
        let (k, ct) = encapsulate_program(&pp, good, &mut rng).unwrap();
        let sk = keygen(&msk, &pp, &set(&["dummy", "B"]), &mut rng).unwrap();
        assert_eq!(decapsulate(&ct, &sk).unwrap(), k);

        let optional = LsssProgram::compile(&p("dummy OR A")).unwrap();
        assert_eq!(
            encapsulate_program(&pp, optional, &mut rng).unwrap_err(),
            Error::PolicyMissingDummy
        );

        fn p(s: &str) -> AccessPolicy {
            parse_policy(s).unwrap()
        }
    }

    #[test]
    fn fresh_rows_satisfy_share_equation() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let (pp, _) = setup(&universe(), &mut rng).unwrap();
        let policy = parse_policy("dummy AND ((A AND B) OR C)").unwrap();
        let (_, ct, oracle) = encapsulate_traced(&pp, &policy, &mut rng).unwrap();
        let e_ga_g = pair(&pp.g_a, &pp.g);
        for (i, row) in ct.rows.iter().enumerate() {
            let h = &pp.attr_bases[ct.prog.rho(i)];
            assert_eq!(pair(&row.c, &pp.g) * pair(h, &row.d), e_ga_g.pow(&oracle.shares.lambda[i]));
        }
        assert_eq!(ct.c_prime, pp.g.pow(&oracle.s));
    }

    #[test]
    fn keygen_and_encapsulate_costs() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let names: Vec<String> = std::iter::once("dummy".to_string())
            .chain((1..50).map(|i| format!("a{i}")))
            .collect();
        let (pp, msk) = setup(&names, &mut rng).unwrap();

        let attrs: BTreeSet<String> = names[..10].iter().cloned().collect();
        let (_, c) = counter_scope(|| keygen(&msk, &pp, &attrs, &mut rng).unwrap());
        assert_eq!((c.exp_g, c.mul_g, c.pairings), (12, 1, 0));

        let policy = parse_policy(&names.join(" AND ")).unwrap();
        let (_, c) = counter_scope(|| encapsulate(&pp, &policy, &mut rng).unwrap());
        assert_eq!(c.exp_g, 3 * 50 + 1);
        assert_eq!(c.mul_g, 50);
        assert_eq!(c.pairings, 0);
    }

    #[test]
    fn encodings_roundtrip() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let (pp, msk) = setup(&universe(), &mut rng).unwrap();
        let sk = keygen(&msk, &pp, &set(&["dummy", "A", "C"]), &mut rng).unwrap();
        let (_, ct) = encapsulate(&pp, &parse_policy("dummy AND (A OR B)").unwrap(), &mut rng).unwrap();
        assert_eq!(PublicParams::from_bytes(&pp.to_bytes()).unwrap(), pp);
        assert_eq!(MasterSecretKey::from_bytes(&msk.to_bytes()).unwrap(), msk);
        assert_eq!(UserSecretKey::from_bytes(&sk.to_bytes()).unwrap(), sk);
        assert_eq!(KeyCiphertext::from_bytes(&ct.to_bytes()).unwrap(), ct);
        let bytes = ct.to_bytes();
        assert!(KeyCiphertext::from_bytes(&bytes[..bytes.len() - 3]).is_err());
    }
}
