use std::fmt;

use crate::{Alphabet, PropId};

/// Co-safe LTL formula. Negation is only representable on a proposition.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    True,
    False,
    Prop(PropId),
    Not(PropId),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Next(Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
    Eventually(Box<Formula>),
}

impl Formula {
    pub fn prop(p: PropId) -> Self {
        Formula::Prop(p)
    }

    pub fn not(p: PropId) -> Self {
        Formula::Not(p)
    }

    pub fn and(l: Formula, r: Formula) -> Self {
        Formula::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: Formula, r: Formula) -> Self {
        Formula::Or(Box::new(l), Box::new(r))
    }

    pub fn next(f: Formula) -> Self {
        Formula::Next(Box::new(f))
    }

    pub fn until(l: Formula, r: Formula) -> Self {
        Formula::Until(Box::new(l), Box::new(r))
    }

    pub fn eventually(f: Formula) -> Self {
        Formula::Eventually(Box::new(f))
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Formula::True)
    }

    pub fn is_false(&self) -> bool {
        matches!(self, Formula::False)
    }

    /// Literals (constants, propositions, negated propositions) have depth 1.
    pub fn depth(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Prop(_) | Formula::Not(_) => 1,
            Formula::Next(f) | Formula::Eventually(f) => 1 + f.depth(),
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Until(l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    /// Number of prefix-order tokens (operators, propositions, constants).
    pub fn token_count(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Prop(_) => 1,
            Formula::Not(_) => 2,
            Formula::Next(f) | Formula::Eventually(f) => 1 + f.token_count(),
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Until(l, r) => 1 + l.token_count() + r.token_count(),
        }
    }

    /// Largest proposition id used, if any.
    pub fn max_prop(&self) -> Option<PropId> {
        match self {
            Formula::True | Formula::False => None,
            Formula::Prop(p) | Formula::Not(p) => Some(*p),
            Formula::Next(f) | Formula::Eventually(f) => f.max_prop(),
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Until(l, r) => l.max_prop().max(r.max_prop()),
        }
    }

    /// Text form accepted back by [`crate::parse`], with minimal parentheses.
    pub fn display<'a>(&'a self, alphabet: &'a Alphabet) -> impl fmt::Display + 'a {
        Printer {
            formula: self,
            alphabet,
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::Or(..) => 1,
            Formula::And(..) => 2,
            Formula::Until(..) => 3,
            Formula::Next(_) | Formula::Eventually(_) | Formula::Not(_) => 4,
            _ => 5,
        }
    }
}

struct Printer<'a> {
    formula: &'a Formula,
    alphabet: &'a Alphabet,
}

impl Printer<'_> {
    fn write(&self, f: &mut fmt::Formatter<'_>, node: &Formula) -> fmt::Result {
        let child = |f: &mut fmt::Formatter<'_>, c: &Formula, paren: bool| {
            if paren {
                write!(f, "(")?;
                self.write(f, c)?;
                write!(f, ")")
            } else {
                self.write(f, c)
            }
        };
        match node {
            Formula::True => write!(f, "true"),
            Formula::False => write!(f, "false"),
            Formula::Prop(p) => write!(f, "{}", self.alphabet.name(*p)),
            Formula::Not(p) => write!(f, "!{}", self.alphabet.name(*p)),
            Formula::Next(c) | Formula::Eventually(c) => {
                let op = if matches!(node, Formula::Next(_)) { "X" } else { "F" };
                write!(f, "{op} ")?;
                child(f, c, c.precedence() < 4)
            }
            // & and | associate left, U associates right.
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Until(l, r) => {
                let (op, p) = match node {
                    Formula::And(..) => ("&", 2),
                    Formula::Or(..) => ("|", 1),
                    _ => ("U", 3),
                };
                let right_assoc = p == 3;
                child(f, l, l.precedence() < p || (right_assoc && l.precedence() == p))?;
                write!(f, " {op} ")?;
                child(f, r, r.precedence() < p || (!right_assoc && r.precedence() == p))
            }
        }
    }
}

impl fmt::Display for Printer<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, self.formula)
    }
}
