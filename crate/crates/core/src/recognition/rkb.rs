//! Text format for recognition taxonomies.
//!
//! ```text
//! concept <id> count=<int>
//! isa <child> <parent>
//! prop <concept> <property>=<value> count=<int>
//! ```

use super::{RecognitionError, RecognitionKB, RecognitionKbBuilder};
use crate::kb::cnet::is_identifier;

pub fn parse_recognition_kb(text: &str) -> Result<RecognitionKB, RecognitionError> {
    let mut b = RecognitionKbBuilder::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        match tokens[0] {
            "concept" => {
                let name = identifier(&tokens, 1, line)?;
                let count = count(&tokens, 2, line)?;
                no_trailing(&tokens, 3, line)?;
                b.concept_at(name, count, Some(line));
            }
            "isa" => {
                let child = identifier(&tokens, 1, line)?;
                let parent = identifier(&tokens, 2, line)?;
                no_trailing(&tokens, 3, line)?;
                b.isa_at(child, parent, Some(line));
            }
            "prop" => {
                let concept = identifier(&tokens, 1, line)?;
                let pv = *tokens
                    .get(2)
                    .ok_or_else(|| syntax(line, content, "missing `<property>=<value>`"))?;
                let (p, v) = pv
                    .split_once('=')
                    .filter(|(p, v)| is_identifier(p) && is_identifier(v))
                    .ok_or_else(|| syntax(line, pv, "expected `<property>=<value>`"))?;
                let count = count(&tokens, 3, line)?;
                no_trailing(&tokens, 4, line)?;
                b.prop_at(concept, p, v, count, Some(line));
            }
            other => return Err(syntax(line, other, "expected `concept`, `isa` or `prop`")),
        }
    }
    b.build()
}

fn identifier<'a>(tokens: &[&'a str], at: usize, line: usize) -> Result<&'a str, RecognitionError> {
    match tokens.get(at) {
        Some(&t) if is_identifier(t) => Ok(t),
        Some(&t) => Err(syntax(line, t, "expected an identifier")),
        None => Err(syntax(line, &tokens.join(" "), "missing identifier")),
    }
}

fn count(tokens: &[&str], at: usize, line: usize) -> Result<u64, RecognitionError> {
    let tok = *tokens
        .get(at)
        .ok_or_else(|| syntax(line, &tokens.join(" "), "missing `count=<int>`"))?;
    tok.strip_prefix("count=")
        .and_then(|v| v.parse::<u64>().ok())
        .ok_or_else(|| syntax(line, tok, "expected `count=<int>`"))
}

fn no_trailing(tokens: &[&str], expected: usize, line: usize) -> Result<(), RecognitionError> {
    match tokens.get(expected) {
        Some(t) => Err(syntax(line, t, "unexpected trailing token")),
        None => Ok(()),
    }
}

fn syntax(line: usize, token: &str, message: &str) -> RecognitionError {
    RecognitionError::Syntax {
        line,
        token: token.to_string(),
        message: message.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fruits_fixture() {
        let kb = parse_recognition_kb(include_str!("../../../../fixtures/fruits.rkb")).unwrap();
        assert_eq!(kb.concepts().len(), 3);
        assert_eq!(kb.specs().len(), 4);
        assert_eq!(kb.count_of("apple"), Some(40));
    }

    #[test]
    fn boundary_spec_count() {
        let kb = parse_recognition_kb("concept c count=5\nprop c colour=red count=5").unwrap();
        assert_eq!(kb.specs().len(), 1);
    }

    #[test]
    fn parse_errors() {
        let cases: &[(&str, fn(&RecognitionError) -> bool)] = &[
            ("concept c count=5\nprop c colour=red count=6", |e| {
                matches!(e, RecognitionError::CountExceedsParent { .. })
            }),
            ("concept a count=5\nconcept b count=6\nisa b a", |e| {
                matches!(e, RecognitionError::CountExceedsParent { .. })
            }),
            ("concept c count=5\nprop d colour=red count=1", |e| {
                matches!(e, RecognitionError::UnknownConcept { name, .. } if name == "d")
            }),
            ("concept c count=5\nisa c zz", |e| matches!(e, RecognitionError::UnknownConcept { .. })),
            ("concept c count=0", |e| matches!(e, RecognitionError::ZeroCount { .. })),
            ("concept c count=x", |e| matches!(e, RecognitionError::Syntax { line: 1, .. })),
            ("concept c count=5\nprop c colour count=1", |e| matches!(e, RecognitionError::Syntax { line: 2, .. })),
            ("concept c count=5\nconcept c count=4", |e| {
                matches!(e, RecognitionError::DuplicateDeclaration { .. })
            }),
            ("concept c count=5\nprop c k=v count=1\nprop c k=v count=2", |e| {
                matches!(e, RecognitionError::DuplicateDeclaration { .. })
            }),
            ("concept a count=5\nconcept b count=5\nisa a b\nisa b a", |e| {
                matches!(e, RecognitionError::IsaCycle { .. })
            }),
            ("thing a", |e| matches!(e, RecognitionError::Syntax { .. })),
            ("", |e| matches!(e, RecognitionError::Empty)),
        ];
        for (text, check) in cases {
            let err = parse_recognition_kb(text).unwrap_err();
            assert!(check(&err), "{text:?} gave {err:?}");
        }
    }
}
