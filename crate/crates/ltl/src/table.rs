use std::collections::HashMap;

use crate::{progress, simplify, Assignment, Formula, PropId, Verdict};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FormulaId(pub u32);

impl FormulaId {
    pub const TRUE: FormulaId = FormulaId(0);
    pub const FALSE: FormulaId = FormulaId(1);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProgressOutcome {
    pub next: FormulaId,
    pub verdict: Verdict,
}

/// Interns formulas and memoizes simplified progression between ids.
#[derive(Clone, Debug)]
pub struct FormulaTable {
    ids: HashMap<Formula, FormulaId>,
    formulas: Vec<Formula>,
    memo: HashMap<(FormulaId, Assignment), FormulaId>,
}

impl Default for FormulaTable {
    fn default() -> Self {
        Self::new()
    }
}

impl FormulaTable {
    pub fn new() -> Self {
        let mut table = FormulaTable {
            ids: HashMap::new(),
            formulas: Vec::new(),
            memo: HashMap::new(),
        };
        table.intern(Formula::True);
        table.intern(Formula::False);
        table
    }

    pub fn intern(&mut self, phi: Formula) -> FormulaId {
        if let Some(&id) = self.ids.get(&phi) {
            return id;
        }
        let id = FormulaId(self.formulas.len() as u32);
        self.formulas.push(phi.clone());
        self.ids.insert(phi, id);
        id
    }

    pub fn lookup(&self, phi: &Formula) -> Option<FormulaId> {
        self.ids.get(phi).copied()
    }

    /// Panics on an id that was not produced by this table.
    pub fn get(&self, id: FormulaId) -> &Formula {
        &self.formulas[id.index()]
    }

    pub fn len(&self) -> usize {
        self.formulas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.formulas.is_empty()
    }

    pub fn progress(&mut self, id: FormulaId, sigma: &Assignment) -> ProgressOutcome {
        let next = match self.memo.get(&(id, *sigma)) {
            Some(&next) => next,
            None => {
                let phi = simplify(&progress(sigma, self.get(id)));
                let next = self.intern(phi);
                self.memo.insert((id, *sigma), next);
                next
            }
        };
        let verdict = match next {
            FormulaId::TRUE => Verdict::SatisfiedNow,
            FormulaId::FALSE => Verdict::ViolatedNow,
            _ => Verdict::Ongoing,
        };
        ProgressOutcome { next, verdict }
    }

    /// The first proposition whose singleton assignment moves `id` to a
    /// different, non-violated formula.
    pub fn next_subgoal(&mut self, id: FormulaId, width: usize) -> Option<PropId> {
        (0..width as u16).map(PropId).find(|&p| {
            let next = self.progress(id, &Assignment::from_props(&[p], width)).next;
            next != id && next != FormulaId::FALSE
        })
    }
}
