//! Line-oriented text format for causal networks.
//!
//! ```text
//! # comment
//! event <id> [prior=<float>] [disorder]
//! isa <child> <parent>
//! cause <x> <y> p=<float>
//! ```

use super::{CausalNetwork, KbError, NetworkBuilder};
use std::str::FromStr;

pub fn parse_network(text: &str) -> Result<CausalNetwork, KbError> {
    let mut b = NetworkBuilder::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        match tokens[0] {
            "event" => {
                let name = identifier(&tokens, 1, line)?;
                let mut prior = None;
                let mut disorder = false;
                for &tok in &tokens[2..] {
                    if tok == "disorder" && !disorder {
                        disorder = true;
                    } else if let (Some(v), None) = (tok.strip_prefix("prior="), prior) {
                        prior = Some(float(v, tok, line)?);
                    } else {
                        return Err(syntax(line, tok, "expected `prior=<float>` or `disorder`"));
                    }
                }
                b.event_at(name, prior, disorder, Some(line));
            }
            "isa" => {
                let child = identifier(&tokens, 1, line)?;
                let parent = identifier(&tokens, 2, line)?;
                no_trailing(&tokens, 3, line)?;
                b.isa_at(child, parent, Some(line));
            }
            "cause" => {
                let cause = identifier(&tokens, 1, line)?;
                let effect = identifier(&tokens, 2, line)?;
                let tok = *tokens
                    .get(3)
                    .ok_or_else(|| syntax(line, content, "missing `p=<float>`"))?;
                let v = tok
                    .strip_prefix("p=")
                    .ok_or_else(|| syntax(line, tok, "expected `p=<float>`"))?;
                let p = float(v, tok, line)?;
                no_trailing(&tokens, 4, line)?;
                b.cause_at(cause, effect, p, Some(line));
            }
            other => return Err(syntax(line, other, "expected `event`, `isa` or `cause`")),
        }
    }
    b.build()
}

impl FromStr for CausalNetwork {
    type Err = KbError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_network(s)
    }
}

impl CausalNetwork {
    /// Canonical text form: events by name, then isa links, then causal links.
    pub fn to_cnet(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str("event ");
            out.push_str(&e.name);
            if let Some(p) = e.prior {
                out.push_str(&format!(" prior={p}"));
            }
            if e.is_disorder {
                out.push_str(" disorder");
            }
            out.push('\n');
        }
        for l in &self.isa {
            out.push_str(&format!("isa {} {}\n", self.name(l.child), self.name(l.parent)));
        }
        for l in &self.causal {
            out.push_str(&format!(
                "cause {} {} p={}\n",
                self.name(l.cause),
                self.name(l.effect),
                l.cond_prob
            ));
        }
        out
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn identifier<'a>(tokens: &[&'a str], at: usize, line: usize) -> Result<&'a str, KbError> {
    match tokens.get(at) {
        Some(&t) if is_identifier(t) => Ok(t),
        Some(&t) => Err(syntax(line, t, "expected an identifier")),
        None => Err(syntax(line, tokens.join(" ").as_str(), "missing identifier")),
    }
}

fn no_trailing(tokens: &[&str], expected: usize, line: usize) -> Result<(), KbError> {
    match tokens.get(expected) {
        Some(t) => Err(syntax(line, t, "unexpected trailing token")),
        None => Ok(()),
    }
}

fn float(v: &str, tok: &str, line: usize) -> Result<f64, KbError> {
    v.parse::<f64>()
        .map_err(|_| syntax(line, tok, "malformed number"))
}

fn syntax(line: usize, token: &str, message: &str) -> KbError {
    KbError::Syntax {
        line,
        token: token.to_string(),
        message: message.to_string(),
    }
}
