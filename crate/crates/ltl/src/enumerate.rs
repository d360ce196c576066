use crate::{Assignment, Formula, PropId};

/// Formulas over `n_props` propositions up to `max_depth`, in canonical
/// order (by depth, then constructor, then operands), truncated at `cap`.
pub fn enumerate_formulas(n_props: usize, max_depth: usize, cap: usize) -> Vec<Formula> {
    let mut out: Vec<Formula> = vec![Formula::True, Formula::False];
    out.extend((0..n_props as u16).map(|p| Formula::Prop(PropId(p))));
    out.extend((0..n_props as u16).map(|p| Formula::Not(PropId(p))));
    out.truncate(cap);
    // by_depth[d] holds the index range of formulas with depth d + 1.
    #[allow(clippy::single_range_in_vec_init)]
    let mut by_depth = vec![0..out.len()];
    for _ in 1..max_depth {
        if out.len() >= cap {
            break;
        }
        let start = out.len();
        let prev = by_depth.last().unwrap().clone();
        let lower = 0..prev.end;
        let mut level = Vec::new();
        for i in prev.clone() {
            level.push(Formula::next(out[i].clone()));
            level.push(Formula::eventually(out[i].clone()));
        }
        for l in lower.clone() {
            for r in lower.clone() {
                if !prev.contains(&l) && !prev.contains(&r) {
                    continue;
                }
                level.push(Formula::and(out[l].clone(), out[r].clone()));
                level.push(Formula::or(out[l].clone(), out[r].clone()));
                level.push(Formula::until(out[l].clone(), out[r].clone()));
            }
            if start + level.len() >= cap {
                break;
            }
        }
        level.truncate(cap - start);
        out.extend(level);
        by_depth.push(start..out.len());
    }
    out
}

/// Every word of length `0..=max_len` over `n_props` propositions.
pub fn all_words(n_props: usize, max_len: usize) -> Vec<Vec<Assignment>> {
    let letters: Vec<Assignment> = (0..1u64 << n_props)
        .map(|b| Assignment::from_bits(b, n_props))
        .collect();
    let mut words = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(frontier.len() * letters.len());
        for w in &frontier {
            for &a in &letters {
                let mut v: Vec<Assignment> = w.clone();
                v.push(a);
                next.push(v);
            }
        }
        words.extend(next.iter().cloned());
        frontier = next;
    }
    words
}
