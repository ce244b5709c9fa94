//! Recursive-descent parser for policy text.
//!
//! ```text
//! expr   := term (OR term)*
//! term   := factor (AND factor)*
//! factor := ATTR | '(' expr ')'
//! ATTR   := [A-Za-z_][A-Za-z0-9_:-]*
//! ```
//!
//! Keywords are case-insensitive; attribute names are case-sensitive. `NOT`
//! is recognised only so it can be rejected as non-monotone.

use super::{AccessPolicy, PolicyNode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Attr(String),
    And,
    Or,
    Not,
    LParen,
    RParen,
}

fn is_attr_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_'
}

fn is_attr_continue(b: u8) -> bool {
    b.is_ascii_alphanumeric() || matches!(b, b'_' | b':' | b'-')
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\r' | b'\n' => i += 1,
            b'(' => {
                out.push((i, Tok::LParen));
                i += 1;
            }
            b')' => {
                out.push((i, Tok::RParen));
                i += 1;
            }
            b if is_attr_start(b) => {
                let start = i;
                while i < bytes.len() && is_attr_continue(bytes[i]) {
                    i += 1;
                }
                let word = &text[start..i];
                let tok = match word.to_ascii_lowercase().as_str() {
                    "and" => Tok::And,
                    "or" => Tok::Or,
                    "not" => Tok::Not,
                    _ => Tok::Attr(word.to_owned()),
                };
                out.push((start, tok));
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(Error::Syntax {
                    offset: i,
                    message: format!("unexpected character {ch:?}"),
                });
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::Syntax {
            offset: self.offset(),
            message: message.into(),
        }
    }

    fn expr(&mut self) -> Result<PolicyNode> {
        let mut terms = vec![self.term()?];
        while self.peek() == Some(&Tok::Or) {
            self.pos += 1;
            terms.push(self.term()?);
        }
        Ok(collapse(terms, PolicyNode::Or))
    }

    fn term(&mut self) -> Result<PolicyNode> {
        let mut factors = vec![self.factor()?];
        while self.peek() == Some(&Tok::And) {
            self.pos += 1;
            factors.push(self.factor()?);
        }
        Ok(collapse(factors, PolicyNode::And))
    }

    fn factor(&mut self) -> Result<PolicyNode> {
        match self.peek().cloned() {
            Some(Tok::Attr(a)) => {
                self.pos += 1;
                Ok(PolicyNode::Leaf(a))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(&Tok::RParen) {
                    return Err(self.error("expected ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(Tok::Not) => Err(Error::NonMonotonePolicy(format!(
                "negation at byte {}",
                self.offset()
            ))),
            Some(t) => Err(self.error(format!("expected attribute or '(', found {t:?}"))),
            None => Err(self.error("unexpected end of policy")),
        }
    }
}

fn collapse(mut nodes: Vec<PolicyNode>, gate: fn(Vec<PolicyNode>) -> PolicyNode) -> PolicyNode {
    if nodes.len() == 1 {
        nodes.pop().expect("one node")
    } else {
        gate(nodes)
    }
}

/// Parses policy text such as `dummy AND (A OR B)`.
pub fn parse_policy(text: &str) -> Result<AccessPolicy> {
    let toks = tokenize(text)?;
    if toks.is_empty() {
        return Err(Error::EmptyPolicy);
    }
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
    };
    let root = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(p.error("trailing input"));
    }
    AccessPolicy::new(root)
}
