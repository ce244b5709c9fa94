use std::fs;

use cpad::deletion::{make_del_request, SigningKeypair};
use cpad::fogsim::{
    parse_script, run_scenario, CloudStore, FogStore, MessageKind, Outcome, PartyId, Simulation,
};
use cpad::payload::make_tag;
use cpad::wire::Decode;
use cpad::{Error, Scalar, TargetElem};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

const LIFECYCLE: &str = r#"
# authority, one sensor, two users
STEP aa setup dummy,temp,hvac,admin
STEP aa enroll-object sensor dummy,temp,admin
STEP aa enroll-user alice dummy,temp
STEP aa enroll-user bob dummy,hvac
STEP sensor encrypt f1 "dummy and (temp or admin)" "reading: 21.5C"
STEP sensor encrypt f2 "dummy and hvac" hex:00010203
STEP alice fetch f1
STEP bob fetch f1
STEP bob fetch f2
STEP sensor delete f1
STEP sensor verify f1
STEP alice fetch f1
STEP sensor fetch f1
"#;

fn run(script: &str, seed: u64) -> (Simulation, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let mut sim = Simulation::new(seed, dir.path()).unwrap();
    for step in parse_script(script).unwrap() {
        sim.execute(&step).unwrap();
    }
    (sim, dir)
}

#[test]
fn full_lifecycle() {
    let (sim, _dir) = run(LIFECYCLE, 1);
    let outcomes: Vec<String> = sim.trace.outcomes().map(|(p, o)| format!("{p} {o}")).collect();
    assert_eq!(
        outcomes,
        [
            "user:alice decrypted f1 14",
            "user:bob denied f1",
            "user:bob decrypted f2 4",
            "object:sensor verified f1 true",
            "user:alice payload-missing f1",
            "object:sensor payload-missing f1",
        ]
    );
    assert_eq!(sim.clients["alice"].received["f1"], b"reading: 21.5C");
    assert_eq!(sim.clients["bob"].received["f2"], [0, 1, 2, 3]);
    let f1 = sim.catalog["f1"];
    assert!(!sim.cloud.store.contains(&f1));
    assert!(sim.fog.store.contains(&f1));
    assert_eq!(sim.cloud.store.len(), 1);
}

#[test]
fn fog_forwards_the_request_verbatim_before_answering() {
    let (sim, _dir) = run(LIFECYCLE, 2);
    let msgs: Vec<_> = sim.trace.messages().collect();
    let req = msgs.iter().position(|m| m.kind == MessageKind::DelRequest).unwrap();
    assert_eq!(msgs[req + 1].kind, MessageKind::CloudDelete);
    assert_eq!(msgs[req + 1].body, msgs[req].body);
    assert_eq!(msgs[req + 1].sender, PartyId::Fog);
    assert_eq!(msgs[req + 2].kind, MessageKind::DelResponse);
    assert_eq!(msgs[req + 3].kind, MessageKind::CloudDeleteAck);
}

#[test]
fn fog_never_sees_a_payload_record_and_cloud_never_a_ciphertext() {
    let (sim, dir) = run(LIFECYCLE, 3);
    sim.check_store_hygiene().unwrap();
    for entry in fs::read_dir(dir.path().join("fog")).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "tlv") {
            let bytes = fs::read(&p).unwrap();
            assert!(<cpad::fogsim::CloudRecord as Decode>::from_bytes(&bytes).is_err());
        }
    }
}

#[test]
fn identical_seeds_give_identical_traces() {
    let a = run_scenario(LIFECYCLE, 42, tempfile::tempdir().unwrap().path()).unwrap();
    let b = run_scenario(LIFECYCLE, 42, tempfile::tempdir().unwrap().path()).unwrap();
    assert_eq!(a.digest(), b.digest());
    assert_eq!(a, b);
    let c = run_scenario(LIFECYCLE, 43, tempfile::tempdir().unwrap().path()).unwrap();
    assert_ne!(a.digest(), c.digest());
}

#[test]
fn stores_reload_bit_exactly() {
    let (sim, dir) = run(LIFECYCLE, 4);
    let fog_before = sim.fog.store.raw_files().unwrap();
    let cloud_before = sim.cloud.store.raw_files().unwrap();
    let fog_records: Vec<_> = sim.fog.store.iter().map(|(_, r)| r.clone()).collect();
    drop(sim);

    let fog = FogStore::open(dir.path().join("fog")).unwrap();
    let cloud = CloudStore::open(dir.path().join("cloud")).unwrap();
    assert_eq!(fog.raw_files().unwrap(), fog_before);
    assert_eq!(cloud.raw_files().unwrap(), cloud_before);
    let reloaded: Vec<_> = fog.iter().map(|(_, r)| r.clone()).collect();
    assert_eq!(reloaded, fog_records);
}

#[test]
fn simulation_resumes_on_existing_stores() {
    let dir = tempfile::tempdir().unwrap();
    let upload = "STEP aa setup dummy,A\nSTEP aa enroll-object o dummy,A\nSTEP o encrypt f \"dummy and A\" x\n";
    let t = run_scenario(upload, 5, dir.path()).unwrap();
    assert_eq!(t.flagged().count(), 0);
    let sim = Simulation::new(6, dir.path()).unwrap();
    assert_eq!(sim.fog.store.len(), 1);
    assert_eq!(sim.cloud.store.len(), 1);
}

#[test]
fn concurrent_simulation_on_same_workdir_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let _a = Simulation::new(1, dir.path()).unwrap();
    assert!(matches!(Simulation::new(2, dir.path()), Err(Error::Io(_))));
}

#[test]
fn cheating_fog_scripts_are_flagged() {
    for behavior in ["skip-update", "inconsistent-gamma"] {
        let script = LIFECYCLE.replace(
            "STEP sensor delete f1",
            &format!("STEP fog behave {behavior}\nSTEP sensor delete f1"),
        );
        let (sim, _dir) = run(&script, 7);
        let flagged: Vec<_> = sim.trace.flagged().collect();
        assert_eq!(flagged.len(), 1, "{behavior}");
        assert!(sim
            .trace
            .outcomes()
            .any(|(_, o)| *o == Outcome::Verified { label: "f1".into(), ok: false }));
    }
}

#[test]
fn cloud_rejects_badly_signed_deletion() {
    let (mut sim, _dir) = run(
        "STEP aa setup dummy,A\nSTEP aa enroll-object o dummy,A\nSTEP o encrypt f \"dummy and A\" x\n",
        8,
    );
    let fname = sim.catalog["f"];
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let forger = SigningKeypair::generate(&mut rng);
    let tag = sim.clients["o"].owned["f"].tag;
    let (req, _) = make_del_request(&fname, &tag, &forger, &mut rng);
    assert_eq!(sim.cloud.cloud_delete(&fname, &req), Err(Error::BadSignature));
    assert!(sim.cloud.store.contains(&fname));

    let unknown = Scalar::random(&mut rng);
    let (req, _) = make_del_request(&unknown, &make_tag(&unknown, &TargetElem::identity()), &forger, &mut rng);
    assert!(matches!(sim.cloud.cloud_delete(&unknown, &req), Err(Error::UnknownFname(_))));
}

#[test]
fn protocol_violations_name_the_step() {
    let dir = tempfile::tempdir().unwrap();
    let script = "STEP aa setup dummy,A\nSTEP aa enroll-user u dummy,A\nSTEP u encrypt f \"dummy and A\" x\n";
    match run_scenario(script, 1, dir.path()) {
        Err(Error::Scenario { step, message }) => {
            assert_eq!(step, 3);
            assert!(message.contains("not a data owner"), "{message}");
        }
        other => panic!("{other:?}"),
    }
    let dir = tempfile::tempdir().unwrap();
    let twice = "STEP aa setup dummy,A\nSTEP aa enroll-object o dummy,A\nSTEP o encrypt f \"dummy and A\" x\nSTEP o delete f\nSTEP o delete f\n";
    assert!(matches!(run_scenario(twice, 1, dir.path()), Err(Error::Scenario { step: 5, .. })));
}
