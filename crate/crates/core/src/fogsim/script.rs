//! Scenario scripts: one `STEP <party> <action> <args...>` per line.
//!
//! Arguments are split shell-style, so policies and data can be quoted.
//! Blank lines and lines starting with `#` are skipped.
//!
//! ```text
//! STEP aa setup dummy,temp,hvac
//! STEP aa enroll-object sensor dummy,temp
//! STEP aa enroll-user alice dummy,temp
//! STEP sensor encrypt f1 "dummy and temp" "21.5C"
//! STEP alice fetch f1
//! STEP fog behave skip-update
//! STEP sensor delete f1
//! STEP sensor verify f1
//! ```

use std::collections::BTreeSet;

use crate::deletion::FogBehavior;
use crate::error::{Error, Result};
use crate::policy::AccessPolicy;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Action {
    Setup { universe: Vec<String> },
    EnrollObject { name: String, attrs: BTreeSet<String> },
    EnrollUser { name: String, attrs: BTreeSet<String> },
    Encrypt { owner: String, label: String, policy: AccessPolicy, data: Vec<u8> },
    Fetch { client: String, label: String },
    Delete { owner: String, label: String },
    Verify { owner: String, label: String },
    Behave(FogBehavior),
    /// Reloads both stores from disk.
    Restart,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    /// 1-based index among the script's steps.
    pub index: usize,
    /// 1-based source line.
    pub line: usize,
    pub action: Action,
}

pub const RESERVED: [&str; 3] = ["aa", "fog", "cloud"];

fn attr_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|a| !a.is_empty()).map(String::from).collect()
}

/// `hex:`-prefixed data is decoded; anything else is taken as UTF-8 text.
fn data_arg(s: &str) -> Result<Vec<u8>> {
    match s.strip_prefix("hex:") {
        Some(h) => hex::decode(h).map_err(|e| Error::InvalidEncoding(format!("bad hex data: {e}"))),
        None => Ok(s.as_bytes().to_vec()),
    }
}

fn client_name(s: &str) -> Result<String> {
    if RESERVED.contains(&s) {
        return Err(Error::InvalidEncoding(format!("{s:?} is a reserved party name")));
    }
    if s.is_empty() || s.contains(|c: char| c.is_whitespace() || c == ':') {
        return Err(Error::InvalidEncoding(format!("bad party name {s:?}")));
    }
    Ok(s.to_owned())
}

fn parse_step(words: &[String]) -> Result<Action> {
    let bad = |what: &str| Error::InvalidEncoding(what.to_owned());
    let [party, action, args @ ..] = words else {
        return Err(bad("expected STEP <party> <action> <args...>"));
    };
    let argc = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(Error::InvalidEncoding(format!(
                "{party} {action} takes {n} argument(s), got {}",
                args.len()
            )))
        }
    };
    Ok(match (party.as_str(), action.as_str()) {
        ("aa", "setup") => {
            argc(1)?;
            Action::Setup { universe: attr_list(&args[0]) }
        }
        ("aa", "enroll-object") | ("aa", "enroll-user") => {
            argc(2)?;
            let name = client_name(&args[0])?;
            let attrs = attr_list(&args[1]).into_iter().collect();
            if action == "enroll-object" {
                Action::EnrollObject { name, attrs }
            } else {
                Action::EnrollUser { name, attrs }
            }
        }
        ("fog", "behave") => {
            argc(1)?;
            Action::Behave(match args[0].as_str() {
                "honest" => FogBehavior::Honest,
                "skip-update" => FogBehavior::SkipUpdate,
                "inconsistent-gamma" => FogBehavior::InconsistentGamma,
                other => return Err(Error::InvalidEncoding(format!("unknown fog behaviour {other:?}"))),
            })
        }
        ("fog", "restart") | ("cloud", "restart") => {
            argc(0)?;
            Action::Restart
        }
        (p, "encrypt") => {
            argc(3)?;
            Action::Encrypt {
                owner: client_name(p)?,
                label: args[0].clone(),
                policy: args[1].parse()?,
                data: data_arg(&args[2])?,
            }
        }
        (p, "fetch") => {
            argc(1)?;
            Action::Fetch { client: client_name(p)?, label: args[0].clone() }
        }
        (p, "delete") => {
            argc(1)?;
            Action::Delete { owner: client_name(p)?, label: args[0].clone() }
        }
        (p, "verify") => {
            argc(1)?;
            Action::Verify { owner: client_name(p)?, label: args[0].clone() }
        }
        (p, a) => return Err(Error::InvalidEncoding(format!("unknown action {p} {a}"))),
    })
}

/// Parses a whole script; errors name the step and line.
pub fn parse_script(text: &str) -> Result<Vec<Step>> {
    let mut steps = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let index = steps.len() + 1;
        let fail = |message: String| Error::Scenario {
            step: index,
            message: format!("line {}: {message}", n + 1),
        };
        let words = shlex::split(line).ok_or_else(|| fail("unbalanced quotes".into()))?;
        match words.first().map(String::as_str) {
            Some("STEP") => {}
            _ => return Err(fail("line must start with STEP".into())),
        }
        let action = parse_step(&words[1..]).map_err(|e| fail(e.to_string()))?;
        steps.push(Step { index, line: n + 1, action });
    }
    Ok(steps)
}
