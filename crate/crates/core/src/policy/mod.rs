//! Monotone access policies and their linear secret sharing programs.
//!
//! Text policies are parsed into an [`AccessPolicy`] tree, compiled into a
//! share-generating matrix with a row labelling ([`LsssProgram`]), and
//! reconstruction coefficients are recovered by Gaussian elimination.

mod lsss;
mod parse;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

pub use lsss::{LsssProgram, ReconstructionPlan, ShareVector};
pub use parse::parse_policy;

use crate::error::{Error, Result};

/// The mandatory attribute every user holds and every policy requires.
pub const DUMMY: &str = "dummy";

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum PolicyNode {
    Leaf(String),
    /// Conjunction of two or more children.
    And(Vec<PolicyNode>),
    /// Disjunction of two or more children.
    Or(Vec<PolicyNode>),
}

impl PolicyNode {
    pub fn leaf(name: impl Into<String>) -> Self {
        PolicyNode::Leaf(name.into())
    }

    pub fn evaluate(&self, attrs: &BTreeSet<String>) -> bool {
        match self {
            PolicyNode::Leaf(a) => attrs.contains(a),
            PolicyNode::And(c) => c.iter().all(|n| n.evaluate(attrs)),
            PolicyNode::Or(c) => c.iter().any(|n| n.evaluate(attrs)),
        }
    }

    /// Leaf labels in left-to-right order, repeats included.
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            PolicyNode::Leaf(a) => out.push(a),
            PolicyNode::And(c) | PolicyNode::Or(c) => {
                c.iter().for_each(|n| n.collect_leaves(out))
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            PolicyNode::Leaf(a) if a.is_empty() => Err(Error::EmptyPolicy),
            PolicyNode::Leaf(_) => Ok(()),
            PolicyNode::And(c) | PolicyNode::Or(c) => {
                if c.len() < 2 {
                    return Err(Error::NonMonotonePolicy(format!(
                        "gate with {} children",
                        c.len()
                    )));
                }
                c.iter().try_for_each(PolicyNode::validate)
            }
        }
    }
}

impl fmt::Display for PolicyNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (children, op) = match self {
            PolicyNode::Leaf(a) => return f.write_str(a),
            PolicyNode::And(c) => (c, " AND "),
            PolicyNode::Or(c) => (c, " OR "),
        };
        for (i, child) in children.iter().enumerate() {
            if i > 0 {
                f.write_str(op)?;
            }
            match child {
                PolicyNode::Leaf(a) => f.write_str(a)?,
                gate => write!(f, "({gate})")?,
            }
        }
        Ok(())
    }
}

/// A parsed monotone boolean formula over attribute names.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AccessPolicy {
    root: PolicyNode,
}

impl AccessPolicy {
    /// Wraps a tree, rejecting degenerate gates (fewer than two children).
    pub fn new(root: PolicyNode) -> Result<Self> {
        root.validate()?;
        Ok(AccessPolicy { root })
    }

    pub fn root(&self) -> &PolicyNode {
        &self.root
    }

    pub fn is_satisfied_by(&self, attrs: &BTreeSet<String>) -> bool {
        self.root.evaluate(attrs)
    }

    pub fn leaves(&self) -> Vec<&str> {
        self.root.leaves()
    }

    pub fn attributes(&self) -> BTreeSet<String> {
        self.leaves().into_iter().map(str::to_owned).collect()
    }

    /// Checks the shape deletion relies on: the root is an AND gate with a
    /// direct `dummy` leaf, and `dummy` occurs nowhere else.
    pub fn check_dummy_placement(&self) -> Result<()> {
        let count = self.leaves().iter().filter(|&&a| a == DUMMY).count();
        let at_root = match &self.root {
            PolicyNode::And(c) => c.iter().any(|n| matches!(n, PolicyNode::Leaf(a) if a == DUMMY)),
            _ => false,
        };
        if !at_root {
            return Err(Error::PolicyMissingDummy);
        }
        if count != 1 {
            return Err(Error::DummyNotUnique);
        }
        Ok(())
    }

    /// `dummy AND (inner)`.
    pub fn with_dummy(inner: PolicyNode) -> Result<Self> {
        Self::new(PolicyNode::And(vec![PolicyNode::leaf(DUMMY), inner]))
    }
}

impl fmt::Display for AccessPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

impl FromStr for AccessPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_policy(s)
    }
}
