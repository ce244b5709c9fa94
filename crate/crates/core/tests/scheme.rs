mod common;

use std::collections::{BTreeMap, BTreeSet};

use cpad::abe::{self, UserSecretKey};
use cpad::deletion::{self, verify_sig, FogBehavior, SigningKeypair};
use cpad::payload::{check_tag, make_tag};
use cpad::{hash_to_group, pair, parse_policy, AccessPolicy, GroupElem, Scalar, DUMMY};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn set(attrs: &[&str]) -> BTreeSet<String> {
    attrs.iter().map(|s| s.to_string()).collect()
}

#[test]
fn ciphertext_components_match_oracle_randomness() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let (pp, _msk, so) = abe::setup_traced(&["dummy", "a", "b", "c"], &mut rng).unwrap();
    let g = pp.g;
    assert_eq!(pp.g_a, g.pow(&so.a));
    assert_eq!(pp.e_gg_alpha, pair(&g, &g).pow(&so.alpha));

    let policy = parse_policy("dummy and (a or (b and c))").unwrap();
    let (k, ct, eo) = abe::encapsulate_traced(&pp, &policy, &mut rng).unwrap();
    assert_eq!(ct.c_prime, g.pow(&eo.s));
    assert_eq!(ct.c_bar, k * pp.e_gg_alpha.pow(&eo.s));
    for (i, row) in ct.rows.iter().enumerate() {
        let h = pp.attr_base(ct.prog.rho(i)).unwrap();
        assert_eq!(row.d, g.pow(&eo.r[i]));
        assert_eq!(row.c, pp.g_a.pow(&eo.shares.lambda[i]) * h.pow(&-eo.r[i]));
    }
    assert_eq!(eo.shares.secret_vec[0], eo.s);
}

#[test]
fn signatures_resist_forgery_attempts() {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let kp = SigningKeypair::generate(&mut rng);
    let other = SigningKeypair::generate(&mut rng);
    let g = GroupElem::generator();
    for i in 0..200u32 {
        let m = format!("delete {i}").into_bytes();
        let sig = kp.sign(&m);
        assert!(verify_sig(kp.public(), &m, &sig));
        // Random group elements, a signature on a different message, a
        // signature under a different key, and the identity.
        assert!(!verify_sig(kp.public(), &m, &g.pow(&Scalar::random(&mut rng))));
        assert!(!verify_sig(kp.public(), &m, &kp.sign(b"other")));
        assert!(!verify_sig(kp.public(), &m, &other.sign(&m)));
        assert!(!verify_sig(kp.public(), &m, &GroupElem::identity()));
        // Mauled signature: sig * H(m) is the signature under sec + 1.
        assert!(!verify_sig(kp.public(), &m, &(sig * hash_to_group(&m))));
    }
}

#[test]
fn deletion_request_tampering_is_detected() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let (pp, msk) = abe::setup(&["dummy", "a"], &mut rng).unwrap();
    let policy = parse_policy("dummy and a").unwrap();
    let (k, ct) = abe::encapsulate(&pp, &policy, &mut rng).unwrap();
    let fname = Scalar::random(&mut rng);
    let tag = make_tag(&fname, &k);
    let ssk = SigningKeypair::generate(&mut rng);
    let fsk = SigningKeypair::generate(&mut rng);
    let (req, _) = deletion::make_del_request(&fname, &tag, &ssk, &mut rng);
    assert!(req.verify(ssk.public()));

    let mut t = req.clone();
    t.theta = t.theta + Scalar::from_u64(1);
    assert!(deletion::reencrypt(&ct, &t, &fsk, ssk.public(), &mut rng).is_err());
    let mut t = req.clone();
    t.fname = Scalar::random(&mut rng);
    assert!(!t.verify(ssk.public()));
    let stranger = SigningKeypair::generate(&mut rng);
    assert!(deletion::reencrypt(&ct, &req, &fsk, stranger.public(), &mut rng).is_err());

    let key = abe::keygen(&msk, &pp, &set(&["dummy", "a"]), &mut rng).unwrap();
    assert_eq!(abe::decapsulate(&ct, &key).unwrap(), k);
}

/// Mixes K, L and K_dummy from two keys; X and Y always come from their own key.
fn franken(kx: &UserSecretKey, ky: &UserSecretKey, pick: u8) -> UserSecretKey {
    let from = |bit: u8| if pick >> bit & 1 == 0 { kx } else { ky };
    let mut per_attr = BTreeMap::new();
    per_attr.insert(DUMMY.to_string(), *from(2).component(DUMMY).unwrap());
    per_attr.insert("X".to_string(), *kx.component("X").unwrap());
    per_attr.insert("Y".to_string(), *ky.component("Y").unwrap());
    UserSecretKey {
        k: from(0).k,
        l: from(1).l,
        per_attr,
    }
}

#[test]
fn colluding_keys_do_not_combine() {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    for _ in 0..20 {
        let (pp, msk) = abe::setup(&["dummy", "X", "Y"], &mut rng).unwrap();
        let policy = parse_policy("dummy and X and Y").unwrap();
        let (k, ct) = abe::encapsulate(&pp, &policy, &mut rng).unwrap();
        let kx = abe::keygen(&msk, &pp, &set(&["dummy", "X"]), &mut rng).unwrap();
        let ky = abe::keygen(&msk, &pp, &set(&["dummy", "Y"]), &mut rng).unwrap();
        assert!(abe::decapsulate(&ct, &kx).is_err());
        assert!(abe::decapsulate(&ct, &ky).is_err());
        for pick in 0..8 {
            let got = abe::decapsulate(&ct, &franken(&kx, &ky, pick)).unwrap();
            assert_ne!(got, k, "combination {pick:03b}");
        }
    }
}

#[test]
fn deletion_defeats_every_issued_key() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let attrs = common::attr_names(6);
    let mut universe = attrs.clone();
    universe.push(DUMMY.into());
    for _ in 0..20 {
        let (pp, msk) = abe::setup(&universe, &mut rng).unwrap();
        let inner = common::random_formula(&mut rng, 5, &attrs);
        let policy = AccessPolicy::with_dummy(inner.clone()).unwrap();
        let (k, ct) = abe::encapsulate(&pp, &policy, &mut rng).unwrap();
        let fname = Scalar::random(&mut rng);
        let tag = make_tag(&fname, &k);

        let keys: Vec<_> = (0..3)
            .map(|_| {
                let mut s = BTreeSet::from([DUMMY.to_string()]);
                common::satisfying_set(&mut rng, &inner, &mut s);
                abe::keygen(&msk, &pp, &s, &mut rng).unwrap()
            })
            .collect();
        for key in &keys {
            assert_eq!(abe::decapsulate(&ct, key).unwrap(), k);
        }

        let ssk = SigningKeypair::generate(&mut rng);
        let fsk = SigningKeypair::generate(&mut rng);
        let (req, state) = deletion::make_del_request(&fname, &tag, &ssk, &mut rng);
        let (updated, resp) = deletion::reencrypt(&ct, &req, &fsk, ssk.public(), &mut rng).unwrap();
        for key in &keys {
            let k2 = abe::decapsulate(&updated, key).unwrap();
            assert!(!check_tag(&tag, &fname, &k2));
            assert!(deletion::verify_deletion(&resp, &updated, key, &state, fsk.public(), &fname).unwrap());
        }
    }
}

#[test]
fn cheating_fogs_fail_verification() {
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let (pp, msk) = abe::setup(&["dummy", "a", "b"], &mut rng).unwrap();
    let key = abe::keygen(&msk, &pp, &set(&["dummy", "a"]), &mut rng).unwrap();
    let policy = parse_policy("dummy and (a or b)").unwrap();
    let ssk = SigningKeypair::generate(&mut rng);
    let fsk = SigningKeypair::generate(&mut rng);
    for behavior in [FogBehavior::SkipUpdate, FogBehavior::InconsistentGamma] {
        for _ in 0..10 {
            let (k, ct) = abe::encapsulate(&pp, &policy, &mut rng).unwrap();
            let fname = Scalar::random(&mut rng);
            let tag = make_tag(&fname, &k);
            let (req, state) = deletion::make_del_request(&fname, &tag, &ssk, &mut rng);
            let (updated, resp) =
                deletion::reencrypt_as(behavior, &ct, &req, &fsk, ssk.public(), &mut rng).unwrap();
            let ok = deletion::verify_deletion(&resp, &updated, &key, &state, fsk.public(), &fname).unwrap();
            assert!(!ok, "{behavior:?}");
        }
    }
}
