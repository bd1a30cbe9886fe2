//! Algebraic discrete Morse theory over the cobordism category.
//!
//! A matching pairs cells in adjacent homological degrees whose connecting
//! entry is an isomorphism (`±id`). An acyclic matching induces the Morse
//! complex on the unmatched (critical) cells, with differential summed over
//! zig-zag paths; Gaussian elimination is the one-pair special case iterated
//! to a fixpoint.

use crate::cube::{BasedComplex, CellRef};
use crate::cob::DottedMorphism;
use crate::{Error, Result};
use std::collections::BTreeMap;

/// A set of matched arrows `(lower, upper)` with `hdeg(upper) = hdeg(lower) + 1`.
#[derive(Clone, Debug, Default)]
pub struct Matching {
    pub arrows: Vec<(CellRef, CellRef)>,
}

impl Matching {
    pub fn new(arrows: Vec<(CellRef, CellRef)>) -> Self {
        Matching { arrows }
    }

    pub fn len(&self) -> usize {
        self.arrows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrows.is_empty()
    }

    /// Map from lower cell to its upper partner.
    pub fn up_map(&self) -> BTreeMap<CellRef, CellRef> {
        self.arrows.iter().cloned().collect()
    }

    /// Map from upper cell to its lower partner.
    pub fn down_map(&self) -> BTreeMap<CellRef, CellRef> {
        self.arrows.iter().map(|(z, x)| (x.clone(), z.clone())).collect()
    }
}

/// Check that a matching is valid on the complex: arrows connect existing
/// cells one level apart through invertible entries, no cell is used twice,
/// and the matching is acyclic (certified by a cancellation order).
pub fn validate_matching(c: &BasedComplex, m: &Matching) -> Result<()> {
    let mut used: BTreeMap<&CellRef, ()> = BTreeMap::new();
    for (z, x) in &m.arrows {
        if c.cell(z).is_none() || c.cell(x).is_none() {
            return Err(Error::Invariant(format!("matched cell missing: {z:?} -> {x:?}")));
        }
        if x.0 != z.0 + 1 {
            return Err(Error::Invariant(format!(
                "arrow {z:?} -> {x:?} does not raise degree by one"
            )));
        }
        let entry = c
            .entry(z, x)
            .ok_or_else(|| Error::Invariant(format!("no entry under arrow {z:?} -> {x:?}")))?;
        if entry.invertible_sign().is_none() {
            return Err(Error::Invariant(format!(
                "entry under arrow {z:?} -> {x:?} is not an isomorphism"
            )));
        }
        for cell in [z, x] {
            if used.insert(cell, ()).is_some() {
                return Err(Error::Invariant(format!("cell {cell:?} matched twice")));
            }
        }
    }
    cancellation_order(c, m)?;
    Ok(())
}

/// Topological cancellation order: a sequence of the arrows such that the
/// entry from the lower cell of a later arrow to the upper cell of an
/// earlier arrow always vanishes. Exists iff the matching is acyclic; this
/// doubles as the acyclicity certificate. Returns indices into `m.arrows`.
pub fn cancellation_order(c: &BasedComplex, m: &Matching) -> Result<Vec<usize>> {
    // Arrows interact only within one level pair, so order each level
    // independently and concatenate.
    let mut by_level: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (i, (z, _)) in m.arrows.iter().enumerate() {
        by_level.entry(z.0).or_default().push(i);
    }
    let mut order = Vec::with_capacity(m.arrows.len());
    for (_, arrows) in by_level {
        // Edge a -> b when the entry z_a -> x_b is nonzero (a != b); a must
        // come before b. Kahn's algorithm; a leftover cycle is a zig-zag
        // cycle in the matching.
        let index: BTreeMap<&CellRef, usize> =
            arrows.iter().map(|&i| (&m.arrows[i].1, i)).collect();
        let mut succs: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        let mut indeg: BTreeMap<usize, usize> = arrows.iter().map(|&i| (i, 0)).collect();
        for &a in &arrows {
            for (tgt, _) in c.outgoing(&m.arrows[a].0) {
                if let Some(&b) = index.get(&tgt) {
                    if b != a {
                        succs.entry(a).or_default().push(b);
                        *indeg.get_mut(&b).unwrap() += 1;
                    }
                }
            }
        }
        let mut ready: Vec<usize> =
            indeg.iter().filter(|(_, &d)| d == 0).map(|(&i, _)| i).collect();
        let mut done = 0;
        while let Some(a) = ready.pop() {
            order.push(a);
            done += 1;
            for &b in succs.get(&a).into_iter().flatten() {
                let d = indeg.get_mut(&b).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.push(b);
                }
            }
        }
        if done != arrows.len() {
            let stuck: Vec<&(CellRef, CellRef)> =
                indeg.iter().filter(|(_, &d)| d > 0).map(|(&i, _)| &m.arrows[i]).collect();
            return Err(Error::Invariant(format!(
                "matching has a zig-zag cycle through {} arrows, e.g. {:?}",
                stuck.len(),
                stuck.first()
            )));
        }
    }
    Ok(order)
}

/// All zig-zag paths from critical cell `from` (degree `t`) to critical cell
/// `to` (degree `t+1`): alternating up-entries and reversed matched arrows.
/// Each path is the cell sequence `from, x1, z1, x2, ..., to`.
pub fn zigzag_paths(
    c: &BasedComplex,
    m: &Matching,
    from: &CellRef,
    to: &CellRef,
) -> Vec<Vec<CellRef>> {
    let up = m.up_map();
    let down = m.down_map();
    let mut out = Vec::new();
    let mut stack = vec![from.clone()];
    dfs_paths(c, &up, &down, to, &mut stack, &mut out);
    out
}

fn dfs_paths(
    c: &BasedComplex,
    up: &BTreeMap<CellRef, CellRef>,
    down: &BTreeMap<CellRef, CellRef>,
    to: &CellRef,
    stack: &mut Vec<CellRef>,
    out: &mut Vec<Vec<CellRef>>,
) {
    let z = stack.last().unwrap().clone();
    for (x, _) in c.outgoing(&z) {
        if up.get(&z) == Some(&x) {
            // A path never leaves z along z's own matching arrow.
            continue;
        }
        if &x == to {
            let mut p = stack.clone();
            p.push(x.clone());
            out.push(p);
        } else if let Some(z2) = down.get(&x) {
            stack.push(x.clone());
            stack.push(z2.clone());
            dfs_paths(c, up, down, to, stack, out);
            stack.pop();
            stack.pop();
        }
    }
}

/// The Morse complex of an acyclic matching: cells are the critical
/// (unmatched) cells with their gradings; the differential entry between
/// critical cells is the sum over zig-zag paths of
/// `(-1)^{#reversed arrows} * composition`, inverting each matched entry.
pub fn morse_complex(c: &BasedComplex, m: &Matching) -> Result<BasedComplex> {
    validate_matching(c, m)?;
    let up = m.up_map();
    let down = m.down_map();

    let mut out = BasedComplex::new();
    for (r, data) in c.cells() {
        if up.contains_key(r) || down.contains_key(r) {
            continue;
        }
        out.add_cell(
            r.0,
            r.1.clone(),
            data.object.clone(),
            data.qshift,
            data.label.clone(),
            data.origins.clone(),
        )?;
    }

    // flows[z] = accumulated morphisms from matched-lower cell z into each
    // critical cell one level above z, with the path sign folded in.
    let mut flows: BTreeMap<CellRef, BTreeMap<CellRef, DottedMorphism>> = BTreeMap::new();

    // Process matched lower cells in reverse cancellation order so that
    // every flow needed below is already complete.
    let order = cancellation_order(c, m)?;
    for &ai in order.iter().rev() {
        let (z, _) = &m.arrows[ai];
        let flow = flow_from(c, &up, &down, &mut flows, z)?;
        flows.insert(z.clone(), flow);
    }

    let critical: Vec<CellRef> = out.cells().map(|(r, _)| r.clone()).collect();
    for z in critical {
        let contributions = flow_from(c, &up, &down, &mut flows, &z)?;
        for (tgt, mor) in contributions {
            if !mor.is_zero() {
                out.set_entry(z.clone(), tgt, mor)?;
            }
        }
    }
    Ok(out)
}

/// Morphisms from `z` into every critical cell at `hdeg(z) + 1`, following
/// up-entries and descending through matched cells (whose flows must already
/// be in `flows`).
fn flow_from(
    c: &BasedComplex,
    up: &BTreeMap<CellRef, CellRef>,
    down: &BTreeMap<CellRef, CellRef>,
    flows: &mut BTreeMap<CellRef, BTreeMap<CellRef, DottedMorphism>>,
    z: &CellRef,
) -> Result<BTreeMap<CellRef, DottedMorphism>> {
    let mut acc: BTreeMap<CellRef, DottedMorphism> = BTreeMap::new();
    for (x, e) in c.outgoing(z) {
        if up.get(z) == Some(&x) {
            // The matched arrow out of z itself is not part of any zig-zag
            // path from z.
            continue;
        }
        if let Some(z2) = down.get(&x) {
            // Descend: invert the matched entry (±id is its own inverse),
            // then continue along the stored flow of z2, flipping the sign.
            let inv = c.entry(z2, &x).expect("matched entry").clone();
            let through = inv.compose(e)?;
            let deeper = flows
                .get(z2)
                .ok_or_else(|| Error::Invariant("flow order broken".into()))?
                .clone();
            for (tgt, mor) in deeper {
                let add = mor.compose(&through)?.scale(-1)?;
                merge_flow(&mut acc, tgt, add)?;
            }
        } else if up.contains_key(&x) {
            // x is the lower cell of another arrow: zig-zag paths cannot
            // pass through or end on it.
            continue;
        } else {
            merge_flow(&mut acc, x.clone(), e.clone())?;
        }
    }
    Ok(acc)
}

fn merge_flow(
    acc: &mut BTreeMap<CellRef, DottedMorphism>,
    tgt: CellRef,
    add: DottedMorphism,
) -> Result<()> {
    match acc.get_mut(&tgt) {
        Some(m) => *m = m.add(&add)?,
        None => {
            if !add.is_zero() {
                acc.insert(tgt, add);
            }
        }
    }
    Ok(())
}

/// Repeatedly cancel invertible entries (Gaussian elimination) until none
/// remain. Each cancellation of `phi: C -> E` rewrites every entry
/// `x -> y` through the correction `- d(C->y) phi^{-1} d(x->E)` and removes
/// the two cells; the result is the elimination fixpoint of the complex.
pub fn gaussian_eliminate(c: &BasedComplex) -> Result<BasedComplex> {
    let mut c = c.clone();
    loop {
        let mut pivot: Option<(CellRef, CellRef)> = None;
        'scan: for (src, _) in c.cells() {
            for (tgt, e) in c.outgoing(src) {
                if e.invertible_sign().is_some() {
                    pivot = Some((src.clone(), tgt));
                    break 'scan;
                }
            }
        }
        let Some((src, tgt)) = pivot else {
            return Ok(c);
        };
        eliminate_pair(&mut c, &src, &tgt)?;
    }
}

/// Cancel one invertible entry in place.
pub fn eliminate_pair(c: &mut BasedComplex, src: &CellRef, tgt: &CellRef) -> Result<()> {
    let phi = c
        .entry(src, tgt)
        .ok_or_else(|| Error::Invariant("pivot entry missing".into()))?;
    if phi.invertible_sign().is_none() {
        return Err(Error::Invariant("pivot entry is not invertible".into()));
    }
    // (±id)^{-1} = ±id.
    let inv = phi.clone();
    let ins: Vec<(CellRef, DottedMorphism)> = c
        .incoming(tgt)
        .into_iter()
        .filter(|(x, _)| x != src)
        .map(|(x, e)| (x, e.clone()))
        .collect();
    let outs: Vec<(CellRef, DottedMorphism)> = c
        .outgoing(src)
        .into_iter()
        .filter(|(y, _)| y != tgt)
        .map(|(y, e)| (y, e.clone()))
        .collect();
    c.remove_cell(src);
    c.remove_cell(tgt);
    for (x, dxe) in &ins {
        let half = inv.compose(dxe)?;
        for (y, dcy) in &outs {
            let corr = dcy.compose(&half)?.scale(-1)?;
            c.add_entry(x.clone(), y.clone(), &corr)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cob::CrosslessTangle;
    use crate::cube::CellLabel;

    /// The worked 3x3 example: d(b1) ... entries b1 = a1 + a2, b2 = a2 + a3,
    /// b3 = a1 + a3 over the empty tangle; matching (a2,b1), (a3,b2) leaves
    /// a1, b3 critical with differential multiplication by 2.
    fn worked_example() -> BasedComplex {
        let e = CrosslessTangle::empty();
        let mut c = BasedComplex::new();
        for id in ["a1", "a2", "a3"] {
            c.add_cell(0, id.into(), e.clone(), 0, CellLabel::Anonymous, Vec::new()).unwrap();
        }
        for id in ["b1", "b2", "b3"] {
            c.add_cell(1, id.into(), e.clone(), 0, CellLabel::Anonymous, Vec::new()).unwrap();
        }
        let one = crate::cob::DottedMorphism::identity(&e);
        for (a, b) in [("a1", "b1"), ("a2", "b1"), ("a2", "b2"), ("a3", "b2"), ("a1", "b3"), ("a3", "b3")]
        {
            c.set_entry((0, a.into()), (1, b.into()), one.clone()).unwrap();
        }
        c.validate().unwrap();
        c
    }

    #[test]
    fn worked_example_morse_complex() {
        let c = worked_example();
        let m = Matching::new(vec![
            ((0, "a2".into()), (1, "b1".into())),
            ((0, "a3".into()), (1, "b2".into())),
        ]);
        validate_matching(&c, &m).unwrap();
        let mc = morse_complex(&c, &m).unwrap();
        assert_eq!(mc.len(), 2);
        let e = mc.entry(&(0, "a1".into()), &(1, "b3".into())).unwrap();
        let id = crate::cob::DottedMorphism::identity(&CrosslessTangle::empty());
        assert_eq!(*e, id.scale(2).unwrap());
        mc.validate().unwrap();
    }

    #[test]
    fn worked_example_zigzags() {
        let c = worked_example();
        let m = Matching::new(vec![
            ((0, "a2".into()), (1, "b1".into())),
            ((0, "a3".into()), (1, "b2".into())),
        ]);
        let paths = zigzag_paths(&c, &m, &(0, "a1".into()), &(1, "b3".into()));
        assert_eq!(paths.len(), 2);
        let lens: Vec<usize> = {
            let mut l: Vec<usize> = paths.iter().map(|p| p.len()).collect();
            l.sort();
            l
        };
        // Direct path a1 -> b3 and the long path a1 b1 a2 b2 a3 b3.
        assert_eq!(lens, vec![2, 6]);
    }

    #[test]
    fn cyclic_matching_rejected() {
        let c = worked_example();
        let m = Matching::new(vec![
            ((0, "a2".into()), (1, "b1".into())),
            ((0, "a3".into()), (1, "b2".into())),
            ((0, "a1".into()), (1, "b3".into())),
        ]);
        let err = validate_matching(&c, &m).unwrap_err();
        assert!(format!("{err}").contains("zig-zag cycle"));
    }

    #[test]
    fn double_matched_cell_rejected() {
        let c = worked_example();
        let m = Matching::new(vec![
            ((0, "a2".into()), (1, "b1".into())),
            ((0, "a2".into()), (1, "b2".into())),
        ]);
        assert!(validate_matching(&c, &m).is_err());
    }

    #[test]
    fn non_invertible_arrow_rejected() {
        let e = CrosslessTangle::empty();
        let mut c = BasedComplex::new();
        c.add_cell(0, "a".into(), e.clone(), 0, CellLabel::Anonymous, Vec::new()).unwrap();
        c.add_cell(1, "b".into(), e.clone(), 0, CellLabel::Anonymous, Vec::new()).unwrap();
        let two = crate::cob::DottedMorphism::identity(&e).scale(2).unwrap();
        c.set_entry((0, "a".into()), (1, "b".into()), two).unwrap();
        let m = Matching::new(vec![((0, "a".into()), (1, "b".into()))]);
        assert!(validate_matching(&c, &m).is_err());
    }

    #[test]
    fn eliminate_worked_example() {
        let c = worked_example();
        let g = gaussian_eliminate(&c).unwrap();
        // Elimination removes two pairs, leaving the same 2-cell complex.
        assert_eq!(g.len(), 2);
        g.validate().unwrap();
        let ((s, sid), _) = g.cells().next().map(|(r, d)| (r.clone(), d.clone())).unwrap();
        assert_eq!(s, 0);
        let t = g.cells().nth(1).map(|(r, _)| r.clone()).unwrap();
        let entry = g.entry(&(s, sid), &t).unwrap();
        // The surviving map is ±2 times the identity.
        let id = crate::cob::DottedMorphism::identity(&CrosslessTangle::empty());
        assert!(
            *entry == id.scale(2).unwrap() || *entry == id.scale(-2).unwrap(),
            "got {entry:?}"
        );
    }

    #[test]
    fn morse_equals_elimination_on_braid_cube() {
        use crate::cube::{enhanced_cube, BraidLetter, BraidWord};
        let w = BraidWord::new(2, vec![BraidLetter { index: 1, inverse: false }; 3]).unwrap();
        let c = enhanced_cube(&w).unwrap();
        let g = gaussian_eliminate(&c).unwrap();
        g.validate().unwrap();
        // The fixpoint has no invertible entries left.
        for (src, _) in g.cells() {
            for (_, e) in g.outgoing(src) {
                assert!(e.invertible_sign().is_none());
            }
        }
    }
}
