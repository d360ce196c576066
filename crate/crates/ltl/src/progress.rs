use crate::{Assignment, Formula};

/// One progression step of `phi` against the truth assignment `sigma`,
/// without simplification.
pub fn progress(sigma: &Assignment, phi: &Formula) -> Formula {
    match phi {
        Formula::True => Formula::True,
        Formula::False => Formula::False,
        Formula::Prop(p) => bool_formula(sigma.contains(*p)),
        Formula::Not(p) => bool_formula(!sigma.contains(*p)),
        Formula::And(l, r) => Formula::and(progress(sigma, l), progress(sigma, r)),
        Formula::Or(l, r) => Formula::or(progress(sigma, l), progress(sigma, r)),
        Formula::Next(f) => (**f).clone(),
        Formula::Eventually(f) => Formula::or(progress(sigma, f), phi.clone()),
        Formula::Until(l, r) => Formula::or(progress(sigma, r), Formula::and(progress(sigma, l), phi.clone())),
    }
}

fn bool_formula(b: bool) -> Formula {
    if b {
        Formula::True
    } else {
        Formula::False
    }
}

/// Syntactic simplification: identity and annihilator elements of ∧/∨ on
/// either side, plus idempotence over whole associative chains (operands
/// are flattened, duplicates dropped keeping first occurrence, and the
/// chain is rebuilt left-nested).
pub fn simplify(phi: &Formula) -> Formula {
    match phi {
        Formula::True | Formula::False | Formula::Prop(_) | Formula::Not(_) => phi.clone(),
        Formula::Next(f) => Formula::next(simplify(f)),
        Formula::Eventually(f) => Formula::eventually(simplify(f)),
        Formula::Until(l, r) => Formula::until(simplify(l), simplify(r)),
        Formula::And(..) => chain(phi, true),
        Formula::Or(..) => chain(phi, false),
    }
}

fn chain(phi: &Formula, conj: bool) -> Formula {
    let mut operands = Vec::new();
    collect(phi, conj, &mut operands);
    // identity: True for ∧, False for ∨; annihilator: the other one
    let (identity, annihilator) = if conj {
        (Formula::True, Formula::False)
    } else {
        (Formula::False, Formula::True)
    };
    let mut kept: Vec<Formula> = Vec::with_capacity(operands.len());
    for op in operands.into_iter().map(|o| simplify(&o)) {
        if op == annihilator {
            return annihilator;
        }
        if op == identity || kept.contains(&op) {
            continue;
        }
        // A simplified operand may itself be a chain of the same kind.
        let mut nested = Vec::new();
        collect(&op, conj, &mut nested);
        for n in nested {
            if !kept.contains(&n) {
                kept.push(n);
            }
        }
    }
    let mut it = kept.into_iter();
    let Some(first) = it.next() else {
        return identity;
    };
    it.fold(first, |acc, f| {
        if conj {
            Formula::and(acc, f)
        } else {
            Formula::or(acc, f)
        }
    })
}

fn collect(phi: &Formula, conj: bool, out: &mut Vec<Formula>) {
    match phi {
        Formula::And(l, r) if conj => {
            collect(l, conj, out);
            collect(r, conj, out);
        }
        Formula::Or(l, r) if !conj => {
            collect(l, conj, out);
            collect(r, conj, out);
        }
        other => out.push(other.clone()),
    }
}

/// Finite-word semantics, used as the oracle for progression.
///
/// Position `word.len()` is the empty suffix, where only formulas that are
/// propositionally true (built from `true` with ∧/∨) hold; `X φ` at `i`
/// requires position `i` to exist and `φ` to hold on the suffix from `i+1`.
pub fn satisfies(word: &[Assignment], phi: &Formula) -> bool {
    holds(word, 0, phi)
}

fn holds(word: &[Assignment], i: usize, phi: &Formula) -> bool {
    let n = word.len();
    match phi {
        Formula::True => true,
        Formula::False => false,
        Formula::Prop(p) => i < n && word[i].contains(*p),
        Formula::Not(p) => i < n && !word[i].contains(*p),
        Formula::And(l, r) => holds(word, i, l) && holds(word, i, r),
        Formula::Or(l, r) => holds(word, i, l) || holds(word, i, r),
        Formula::Next(f) => i < n && holds(word, i + 1, f),
        Formula::Eventually(f) => (i..n).any(|j| holds(word, j, f)),
        Formula::Until(l, r) => {
            for j in i..n {
                if holds(word, j, r) {
                    return true;
                }
                if !holds(word, j, l) {
                    return false;
                }
            }
            false
        }
    }
}
