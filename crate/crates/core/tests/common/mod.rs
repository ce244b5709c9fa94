#![allow(dead_code)]

use std::collections::BTreeSet;

use cpad::PolicyNode;
use rand::Rng;

pub const ATTRS: [&str; 4] = ["a", "b", "c", "d"];

/// Every monotone formula with binary AND/OR gates and at most `depth` gate
/// levels over `attrs`. Commuted children are generated once.
pub fn enumerate_formulas(attrs: &[&str], depth: usize) -> Vec<PolicyNode> {
    let mut level: Vec<PolicyNode> = attrs.iter().map(|a| PolicyNode::leaf(*a)).collect();
    for _ in 0..depth {
        let mut next: Vec<PolicyNode> = attrs.iter().map(|a| PolicyNode::leaf(*a)).collect();
        for i in 0..level.len() {
            for j in i..level.len() {
                let pair = vec![level[i].clone(), level[j].clone()];
                next.push(PolicyNode::And(pair.clone()));
                next.push(PolicyNode::Or(pair));
            }
        }
        level = next;
    }
    level
}

/// All subsets of `attrs`.
pub fn subsets(attrs: &[&str]) -> Vec<BTreeSet<String>> {
    (0..1u32 << attrs.len())
        .map(|mask| {
            attrs
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, a)| a.to_string())
                .collect()
        })
        .collect()
}

/// A random formula with exactly `leaves` leaves drawn from `attrs`, gates
/// of arity 2 or 3.
pub fn random_formula<R: Rng>(rng: &mut R, leaves: usize, attrs: &[String]) -> PolicyNode {
    if leaves == 1 {
        return PolicyNode::leaf(attrs[rng.gen_range(0..attrs.len())].clone());
    }
    let arity = if leaves >= 3 && rng.gen_bool(0.3) { 3 } else { 2 };
    let mut sizes = vec![1usize; arity];
    for _ in arity..leaves {
        let k = rng.gen_range(0..arity);
        sizes[k] += 1;
    }
    let children = sizes.into_iter().map(|n| random_formula(rng, n, attrs)).collect();
    if rng.gen_bool(0.5) {
        PolicyNode::And(children)
    } else {
        PolicyNode::Or(children)
    }
}

/// A satisfying attribute set for `node`, chosen at random among OR branches.
pub fn satisfying_set<R: Rng>(rng: &mut R, node: &PolicyNode, out: &mut BTreeSet<String>) {
    match node {
        PolicyNode::Leaf(a) => {
            out.insert(a.clone());
        }
        PolicyNode::And(c) => c.iter().for_each(|n| satisfying_set(rng, n, out)),
        PolicyNode::Or(c) => {
            let pick = rng.gen_range(0..c.len());
            satisfying_set(rng, &c[pick], out)
        }
    }
}

pub fn attr_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("x{i}")).collect()
}
