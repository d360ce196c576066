use crate::{Alphabet, Formula, LtlError, PropId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Token {
    Pad,
    Cls,
    True,
    False,
    Not,
    And,
    Or,
    Next,
    Until,
    Eventually,
    Prop(PropId),
}

const RESERVED: [&str; 10] = [
    "<pad>",
    "<cls>",
    "true",
    "false",
    "not",
    "and",
    "or",
    "next",
    "until",
    "eventually",
];

/// Token id table: reserved symbols first, then the alphabet in id order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenVocab {
    names: Vec<String>,
    max_len: usize,
}

impl TokenVocab {
    pub const PAD: usize = 0;
    pub const CLS: usize = 1;
    pub const FIRST_PROP: usize = RESERVED.len();

    pub fn new(alphabet: &Alphabet, max_len: usize) -> Self {
        let mut names: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        names.extend(alphabet.names().iter().cloned());
        TokenVocab { names, max_len }
    }

    /// Rebuilds a vocabulary from its serialized name table.
    pub fn from_names(names: Vec<String>, max_len: usize) -> Result<Self, LtlError> {
        if names.len() < RESERVED.len() || names[..RESERVED.len()] != RESERVED {
            return Err(LtlError::Alphabet("vocabulary lacks the reserved tokens".into()));
        }
        Ok(TokenVocab { names, max_len })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn id(&self, token: Token) -> usize {
        match token {
            Token::Pad => 0,
            Token::Cls => 1,
            Token::True => 2,
            Token::False => 3,
            Token::Not => 4,
            Token::And => 5,
            Token::Or => 6,
            Token::Next => 7,
            Token::Until => 8,
            Token::Eventually => 9,
            Token::Prop(p) => Self::FIRST_PROP + p.0 as usize,
        }
    }

    /// Prefix-order tokens of `phi`, without CLS or padding.
    pub fn tokens(phi: &Formula) -> Vec<Token> {
        fn walk(phi: &Formula, out: &mut Vec<Token>) {
            match phi {
                Formula::True => out.push(Token::True),
                Formula::False => out.push(Token::False),
                Formula::Prop(p) => out.push(Token::Prop(*p)),
                Formula::Not(p) => out.extend([Token::Not, Token::Prop(*p)]),
                Formula::And(l, r) => {
                    out.push(Token::And);
                    walk(l, out);
                    walk(r, out);
                }
                Formula::Or(l, r) => {
                    out.push(Token::Or);
                    walk(l, out);
                    walk(r, out);
                }
                Formula::Until(l, r) => {
                    out.push(Token::Until);
                    walk(l, out);
                    walk(r, out);
                }
                Formula::Next(f) => {
                    out.push(Token::Next);
                    walk(f, out);
                }
                Formula::Eventually(f) => {
                    out.push(Token::Eventually);
                    walk(f, out);
                }
            }
        }
        let mut out = Vec::with_capacity(phi.token_count());
        walk(phi, &mut out);
        out
    }

    /// `[CLS, prefix tokens.., PAD..]` of length `max_len`.
    pub fn tokenize(&self, phi: &Formula) -> Result<Vec<usize>, LtlError> {
        let needed = phi.token_count() + 1;
        if needed > self.max_len {
            return Err(LtlError::FormulaTooLong {
                needed,
                max: self.max_len,
            });
        }
        let mut ids = Vec::with_capacity(self.max_len);
        ids.push(Self::CLS);
        for t in Self::tokens(phi) {
            let id = self.id(t);
            if id >= self.names.len() {
                return Err(LtlError::Alphabet(format!(
                    "proposition {} is not in the vocabulary",
                    id - Self::FIRST_PROP
                )));
            }
            ids.push(id);
        }
        ids.resize(self.max_len, Self::PAD);
        Ok(ids)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse;

    #[test]
    fn prefix_order() {
        let ab = Alphabet::new(&["a", "b"]).unwrap();
        let v = TokenVocab::new(&ab, 8);
        let ids = v.tokenize(&parse("F(a & F b)", &ab).unwrap()).unwrap();
        let names: Vec<&str> = ids.iter().map(|&i| v.name(i)).collect();
        assert_eq!(
            names,
            ["<cls>", "eventually", "and", "a", "eventually", "b", "<pad>", "<pad>"]
        );
        let t = v.tokenize(&Formula::True).unwrap();
        assert_eq!(&t[..3], &[TokenVocab::CLS, 2, TokenVocab::PAD]);
    }

    #[test]
    fn too_long() {
        let ab = Alphabet::new(&["a"]).unwrap();
        let v = TokenVocab::new(&ab, 3);
        assert_eq!(
            v.tokenize(&parse("F !a", &ab).unwrap()),
            Err(LtlError::FormulaTooLong { needed: 4, max: 3 })
        );
        assert!(v.tokenize(&parse("!a", &ab).unwrap()).is_ok());
    }

    #[test]
    fn names_round_trip() {
        let ab = Alphabet::new(&["x"]).unwrap();
        let v = TokenVocab::new(&ab, 5);
        assert_eq!(TokenVocab::from_names(v.names().to_vec(), 5).unwrap(), v);
        assert!(TokenVocab::from_names(vec!["x".into()], 5).is_err());
    }
}
