use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::LtlError;

/// Dense index of an atomic proposition within its [`Alphabet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PropId(pub u16);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prop {
    pub name: String,
    pub id: PropId,
}

/// The proposition set Π. Ids are dense `0..len`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Alphabet {
    names: Vec<String>,
    index: HashMap<String, PropId>,
}

impl Alphabet {
    pub const MAX_PROPS: usize = 64;

    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Self, LtlError> {
        let mut a = Alphabet::default();
        for n in names {
            a.insert(n.as_ref())?;
        }
        Ok(a)
    }

    /// Adds `name` if absent and returns its id.
    pub fn insert(&mut self, name: &str) -> Result<PropId, LtlError> {
        if let Some(&id) = self.index.get(name) {
            return Ok(id);
        }
        if !is_identifier(name) {
            return Err(LtlError::Alphabet(format!("`{name}` is not a valid identifier")));
        }
        if self.names.len() >= Self::MAX_PROPS {
            return Err(LtlError::Alphabet(format!(
                "at most {} propositions supported",
                Self::MAX_PROPS
            )));
        }
        let id = PropId(self.names.len() as u16);
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<PropId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: PropId) -> &str {
        &self.names[id.0 as usize]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn props(&self) -> impl Iterator<Item = Prop> + '_ {
        self.names.iter().enumerate().map(|(i, n)| Prop {
            name: n.clone(),
            id: PropId(i as u16),
        })
    }

    pub fn empty_assignment(&self) -> Assignment {
        Assignment::empty(self.len())
    }

    /// Parses a comma-separated list of proposition names.
    pub fn assignment_from_csv(&self, line: &str) -> Result<Assignment, LtlError> {
        let mut a = self.empty_assignment();
        for (pos, name) in line.split(',').map(str::trim).enumerate() {
            if name.is_empty() {
                continue;
            }
            let id = self.id(name).ok_or_else(|| LtlError::UnknownProposition {
                name: name.to_string(),
                position: pos,
            })?;
            a.insert(id);
        }
        Ok(a)
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !matches!(s, "X" | "F" | "U" | "true" | "false")
}

/// A truth assignment σ ∈ 2^Π, stored as a bitset of width |Π|.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Assignment {
    bits: u64,
    width: u8,
}

impl Assignment {
    pub fn empty(width: usize) -> Self {
        assert!(width <= Alphabet::MAX_PROPS);
        Assignment {
            bits: 0,
            width: width as u8,
        }
    }

    /// Assignment whose bit `i` is set iff bit `i` of `bits` is set.
    pub fn from_bits(bits: u64, width: usize) -> Self {
        assert!(width <= Alphabet::MAX_PROPS);
        let mask = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
        Assignment {
            bits: bits & mask,
            width: width as u8,
        }
    }

    pub fn from_props(props: &[PropId], width: usize) -> Self {
        let mut a = Assignment::empty(width);
        for &p in props {
            a.insert(p);
        }
        a
    }

    pub fn width(&self) -> usize {
        self.width as usize
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn contains(&self, p: PropId) -> bool {
        (p.0 as usize) < self.width() && self.bits & (1 << p.0) != 0
    }

    pub fn insert(&mut self, p: PropId) {
        assert!((p.0 as usize) < self.width(), "proposition outside alphabet");
        self.bits |= 1 << p.0;
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = PropId> + '_ {
        (0..self.width as u16).map(PropId).filter(|&p| self.contains(p))
    }

    pub fn display<'a>(&'a self, alphabet: &'a Alphabet) -> impl fmt::Display + 'a {
        DisplayAssignment(self, alphabet)
    }
}

struct DisplayAssignment<'a>(&'a Assignment, &'a Alphabet);

impl fmt::Display for DisplayAssignment<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.0.iter().map(|p| self.1.name(p)).collect();
        write!(f, "{{{}}}", names.join(","))
    }
}
