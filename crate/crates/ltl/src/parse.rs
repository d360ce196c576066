//! Recursive-descent parser.
//!
//! ```text
//! or    := and ("|" and)*
//! and   := until ("&" until)*
//! until := unary ("U" until)?
//! unary := "!" ident | "X" unary | "F" unary | atom
//! atom  := "true" | "false" | ident | "(" or ")"
//! ```

use crate::{Alphabet, Formula, LtlError};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    True,
    False,
    Ident(String),
    Not,
    And,
    Or,
    Next,
    Eventually,
    Until,
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::True => "`true`".into(),
            Tok::False => "`false`".into(),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Not => "`!`".into(),
            Tok::And => "`&`".into(),
            Tok::Or => "`|`".into(),
            Tok::Next => "`X`".into(),
            Tok::Eventually => "`F`".into(),
            Tok::Until => "`U`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, LtlError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let tok = match c {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '!' => Tok::Not,
            '&' => Tok::And,
            '|' => Tok::Or,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                let word = &text[start..i];
                let tok = match word {
                    "true" => Tok::True,
                    "false" => Tok::False,
                    "X" => Tok::Next,
                    "F" => Tok::Eventually,
                    "U" => Tok::Until,
                    w => Tok::Ident(w.to_string()),
                };
                out.push((tok, start));
                continue;
            }
            other => {
                return Err(LtlError::SyntaxError {
                    position: i,
                    expected: vec!["formula".into()],
                    found: format!("character `{other}`"),
                })
            }
        };
        out.push((tok, i));
        i += 1;
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    alphabet: &'a mut Alphabet,
    infer: bool,
}

const PRIMARY: &[&str] = &["`true`", "`false`", "identifier", "`!`", "`X`", "`F`", "`(`"];

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn at(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if t != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &[&str]) -> LtlError {
        LtlError::SyntaxError {
            position: self.at(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().describe(),
        }
    }

    fn ident(&mut self, name: String, position: usize) -> Result<crate::PropId, LtlError> {
        if self.infer {
            self.alphabet.insert(&name)
        } else {
            self.alphabet
                .id(&name)
                .ok_or(LtlError::UnknownProposition { name, position })
        }
    }

    fn or(&mut self) -> Result<Formula, LtlError> {
        let mut l = self.and()?;
        while *self.peek() == Tok::Or {
            self.bump();
            l = Formula::or(l, self.and()?);
        }
        Ok(l)
    }

    fn and(&mut self) -> Result<Formula, LtlError> {
        let mut l = self.until()?;
        while *self.peek() == Tok::And {
            self.bump();
            l = Formula::and(l, self.until()?);
        }
        Ok(l)
    }

    fn until(&mut self) -> Result<Formula, LtlError> {
        let l = self.unary()?;
        if *self.peek() == Tok::Until {
            self.bump();
            return Ok(Formula::until(l, self.until()?));
        }
        Ok(l)
    }

    fn unary(&mut self) -> Result<Formula, LtlError> {
        match self.peek() {
            Tok::Not => {
                let bang = self.at();
                self.bump();
                let at = self.at();
                match self.bump() {
                    Tok::Ident(name) => Ok(Formula::Not(self.ident(name, at)?)),
                    Tok::End => Err(LtlError::SyntaxError {
                        position: at,
                        expected: vec!["identifier".into()],
                        found: Tok::End.describe(),
                    }),
                    _ => Err(LtlError::NegationNotOnLiteral { position: bang }),
                }
            }
            Tok::Next => {
                self.bump();
                Ok(Formula::next(self.unary()?))
            }
            Tok::Eventually => {
                self.bump();
                Ok(Formula::eventually(self.unary()?))
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Formula, LtlError> {
        let at = self.at();
        match self.peek().clone() {
            Tok::True => {
                self.bump();
                Ok(Formula::True)
            }
            Tok::False => {
                self.bump();
                Ok(Formula::False)
            }
            Tok::Ident(name) => {
                self.bump();
                Ok(Formula::Prop(self.ident(name, at)?))
            }
            Tok::LParen => {
                self.bump();
                let f = self.or()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.unexpected(&["`)`", "`&`", "`|`", "`U`"]));
                }
                self.bump();
                Ok(f)
            }
            _ => Err(self.unexpected(PRIMARY)),
        }
    }
}

fn run(text: &str, alphabet: &mut Alphabet, infer: bool) -> Result<Formula, LtlError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        alphabet,
        infer,
    };
    let f = p.or()?;
    if *p.peek() != Tok::End {
        return Err(p.unexpected(&["`&`", "`|`", "`U`", "end of input"]));
    }
    Ok(f)
}

/// Parses `text`; every identifier must already exist in `alphabet`.
pub fn parse(text: &str, alphabet: &Alphabet) -> Result<Formula, LtlError> {
    let mut a = alphabet.clone();
    run(text, &mut a, false)
}

/// Parses `text`, collecting identifiers into a fresh alphabet in order of
/// first appearance.
pub fn parse_inferring_alphabet(text: &str) -> Result<(Formula, Alphabet), LtlError> {
    let mut a = Alphabet::default();
    let f = run(text, &mut a, true)?;
    Ok((f, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::PropId;

    fn abc() -> Alphabet {
        Alphabet::new(&["a", "b", "c"]).unwrap()
    }

    #[test]
    fn peg_example() {
        let a = Alphabet::new(&["peg_grasped", "hole_reached", "peg_inserted"]).unwrap();
        let f = parse("F (peg_grasped & F (hole_reached & F peg_inserted))", &a).unwrap();
        let p = |i| Formula::Prop(PropId(i));
        let expected = Formula::eventually(Formula::and(
            p(0),
            Formula::eventually(Formula::and(p(1), Formula::eventually(p(2)))),
        ));
        assert_eq!(f, expected);
    }

    #[test]
    fn constants() {
        assert_eq!(parse("true", &abc()).unwrap(), Formula::True);
        assert_eq!(parse("(false)", &abc()).unwrap(), Formula::False);
    }

    #[test]
    fn negation_only_on_literals() {
        assert_eq!(
            parse("F !a", &abc()).unwrap(),
            Formula::eventually(Formula::Not(PropId(0)))
        );
        assert!(matches!(
            parse("!(a & b)", &abc()),
            Err(LtlError::NegationNotOnLiteral { position: 0 })
        ));
        assert!(matches!(
            parse("!F a", &abc()),
            Err(LtlError::NegationNotOnLiteral { .. })
        ));
        assert!(matches!(
            parse("!true", &abc()),
            Err(LtlError::NegationNotOnLiteral { .. })
        ));
    }

    #[test]
    fn precedence_and_associativity() {
        let p = |i| Formula::Prop(PropId(i));
        // unary > U > & > |
        assert_eq!(
            parse("a | b & c", &abc()).unwrap(),
            Formula::or(p(0), Formula::and(p(1), p(2)))
        );
        assert_eq!(
            parse("a & b U c", &abc()).unwrap(),
            Formula::and(p(0), Formula::until(p(1), p(2)))
        );
        assert_eq!(
            parse("a U b U c", &abc()).unwrap(),
            Formula::until(p(0), Formula::until(p(1), p(2)))
        );
        assert_eq!(
            parse("a & b & c", &abc()).unwrap(),
            Formula::and(Formula::and(p(0), p(1)), p(2))
        );
        assert_eq!(
            parse("F a U b", &abc()).unwrap(),
            Formula::until(Formula::eventually(p(0)), p(1))
        );
    }

    #[test]
    fn errors_carry_position() {
        match parse("a & ", &abc()) {
            Err(LtlError::SyntaxError { position, expected, .. }) => {
                assert_eq!(position, 4);
                assert!(expected.contains(&"identifier".to_string()));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse("a b", &abc()),
            Err(LtlError::SyntaxError { position: 2, .. })
        ));
        assert!(matches!(parse("(a", &abc()), Err(LtlError::SyntaxError { .. })));
        assert!(matches!(
            parse("F zz", &abc()),
            Err(LtlError::UnknownProposition { position: 2, .. })
        ));
        assert!(matches!(parse("a # b", &abc()), Err(LtlError::SyntaxError { .. })));
    }

    #[test]
    fn inferred_alphabet_follows_first_use() {
        let (f, a) = parse_inferring_alphabet("F (b & F a)").unwrap();
        assert_eq!(a.names(), &["b".to_string(), "a".to_string()]);
        assert_eq!(f.display(&a).to_string(), "F (b & F a)");
    }
}
