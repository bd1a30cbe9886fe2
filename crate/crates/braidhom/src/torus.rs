//! Explicit Morse matchings on the cubes of 2- and 3-strand torus braids,
//! their minimal complexes, truncation, and the truncated-isomorphism checks.
//!
//! Cells of the delooped cubes are enhanced words; the matchings pair words
//! by local rewriting patterns. For parameters where the delooped cube fits
//! in memory the matchings are materialized and validated through
//! [`crate::morse`]; beyond that a streaming validator re-checks the same
//! conditions cell by cell in constant memory.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::cob::CrosslessTangle;
use crate::cube::{
    edge_generator, enhanced_cube, enhanced_word_of, resolve, BasedComplex, BraidLetter,
    BraidWord, CellId, CellLabel, CellRef, EnhancedWord, Smoothing, Sup,
};
use crate::morse::{morse_complex, Matching};
use crate::planar::{reduced_complex_with_budget, TangleExpr, DEFAULT_CELL_BUDGET};
use crate::{Error, Result};

/// `σ1^m` on two strands.
pub fn t2_word(m: usize) -> BraidWord {
    BraidWord::generator_power(2, 1, m as i64).expect("σ1^m")
}

/// `(σ1 σ2)^k` on three strands.
pub fn t3_word(k: usize) -> BraidWord {
    let letters = (0..2 * k)
        .map(|i| BraidLetter { index: 1 + i % 2, inverse: false })
        .collect();
    BraidWord::new(3, letters).expect("(σ1σ2)^k")
}

/// The two critical-cell families of the T2 matching.
pub const T2_FAMILIES: [&str; 2] = ["1^m", "1^p 0^x..0^x 0"];

/// The five critical-cell families of the T3 matching, in the order
/// all-ones, tail `0`, tail `01`, tail `001`, tail `00`.
pub const T3_FAMILIES: [&str; 5] = [
    "1^2k",
    "1^p (0 0^x 1)^r 0",
    "1^p (0 0^x 1)^r 0 1",
    "1^p (0 0^x 1)^r 0 0 1",
    "1^p (0 0^x 1)^r 0 0",
];

/// Where an enhanced word sits in a matching: critical, or the lower/upper
/// end of an arrow together with its partner, the 1-based changing index
/// `L`, and (for T3) whether the arrow belongs to the `z1`/`z2` families.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Dispatch {
    Critical(&'static str),
    Lower { x: EnhancedWord, l: usize, m12: bool },
    Upper { z: EnhancedWord, l: usize, m12: bool },
}

fn invalid_word(which: &str, w: &EnhancedWord) -> Error {
    Error::Invariant(format!("not a valid {which} enhanced word: {w}"))
}

/// Validity of an enhanced word for a torus braid cube: a zero carries a
/// circle label exactly when a later zero closes a circle with it — for
/// `σ1^m` every zero before the last, for `(σ1σ2)^k` only zeros whose next
/// zero sits at an odd number of ones.
fn check_enhanced_word(w: &EnhancedWord, odd_gaps_only: bool, which: &str) -> Result<()> {
    let zeros: Vec<usize> = (0..w.len()).filter(|&i| !w.0[i].0).collect();
    for (t, &z) in zeros.iter().enumerate() {
        let circled = match zeros.get(t + 1) {
            Some(&nz) => !odd_gaps_only || (nz - z - 1) % 2 == 1,
            None => false,
        };
        if circled == (w.0[z].1 == Sup::Minus) {
            return Err(invalid_word(which, w));
        }
    }
    if w.0.iter().any(|&(b, s)| b && s != Sup::Minus) {
        return Err(invalid_word(which, w));
    }
    Ok(())
}

/// The T2 matching rule for one enhanced word of the `σ1^m` cube:
/// `1..1 0^x..0^x 0^1 0^s y ↗ 1..1 0^x..0^x 0^s 1 y`.
pub fn t2_partner(w: &EnhancedWord) -> Result<Dispatch> {
    check_enhanced_word(w, false, "T2")?;
    let m = w.len();
    let v = &w.0;
    let p = w.leading_ones();
    if p == m {
        return Ok(Dispatch::Critical(T2_FAMILIES[0]));
    }
    let mut q = p;
    while q < m && !v[q].0 && v[q].1 == Sup::X {
        q += 1;
    }
    if q == m {
        return Err(invalid_word("T2", w));
    }
    if v[q].0 {
        // 0^x 1 at (q-1, q): the upper end with s = x.
        let mut z = w.clone();
        z.0[q - 1].1 = Sup::One;
        z.0[q] = (false, Sup::X);
        return Ok(Dispatch::Upper { z, l: q + 1, m12: true });
    }
    match v[q].1 {
        Sup::One => {
            if q + 1 == m {
                Err(invalid_word("T2", w))
            } else if v[q + 1].0 {
                // 0^1 1: the upper end with s = 1.
                let mut z = w.clone();
                z.0[q + 1] = (false, Sup::One);
                Ok(Dispatch::Upper { z, l: q + 2, m12: true })
            } else {
                // 0^1 0^s: the lower end.
                let mut x = w.clone();
                x.0[q].1 = v[q + 1].1;
                x.0[q + 1] = (true, Sup::Minus);
                Ok(Dispatch::Lower { x, l: q + 2, m12: true })
            }
        }
        Sup::Minus => {
            if q + 1 == m {
                Ok(Dispatch::Critical(T2_FAMILIES[1]))
            } else if v[q + 1].0 {
                // 0^- 1: the upper end with s = -.
                let mut z = w.clone();
                z.0[q].1 = Sup::One;
                z.0[q + 1] = (false, Sup::Minus);
                Ok(Dispatch::Upper { z, l: q + 2, m12: true })
            } else {
                Err(invalid_word("T2", w))
            }
        }
        Sup::X => unreachable!("scan stopped on an x"),
    }
}

/// The T3 matching rule: after the leading ones and maximal run of
/// `0 0^x 1` blocks, the next chunk decides between the three families
/// `z1 = 0^1 1 0^s ↗ x1 = 0^s 1 1`, `z2 = 0 0^1 1 0^s ↗ x2 = 0 0^s 1 1`,
/// `z3 = 0 0 0^s ↗ x3 = 0^x 1 0^s`, or a critical tail.
pub fn t3_partner(w: &EnhancedWord) -> Result<Dispatch> {
    check_enhanced_word(w, true, "T3")?;
    let m = w.len();
    let v = &w.0;
    let mut q = w.leading_ones();
    if q == m {
        return Ok(Dispatch::Critical(T3_FAMILIES[0]));
    }
    // A `0 0^x 1` block belongs to the prefix only when another zero
    // follows; otherwise the chunk at `q` is an x2 with s = x.
    while q + 3 < m
        && v[q].1 == Sup::Minus
        && !v[q + 1].0
        && v[q + 1].1 == Sup::X
        && v[q + 2].0
        && !v[q + 3].0
    {
        q += 3;
    }
    let bad = || Err(invalid_word("T3", w));
    match v[q].1 {
        Sup::X => {
            // x1 with s = x, or x3.
            if q + 2 >= m || !v[q + 1].0 {
                return bad();
            }
            if v[q + 2].0 {
                let mut z = w.clone();
                z.0[q].1 = Sup::One;
                z.0[q + 2] = (false, Sup::X);
                Ok(Dispatch::Upper { z, l: q + 3, m12: true })
            } else {
                let mut z = w.clone();
                z.0[q].1 = Sup::Minus;
                z.0[q + 1] = (false, Sup::Minus);
                Ok(Dispatch::Upper { z, l: q + 2, m12: false })
            }
        }
        Sup::One => {
            // z1, or x1 with s = 1.
            if q + 2 >= m || !v[q + 1].0 {
                return bad();
            }
            if v[q + 2].0 {
                let mut z = w.clone();
                z.0[q + 2] = (false, Sup::One);
                Ok(Dispatch::Upper { z, l: q + 3, m12: true })
            } else {
                let mut x = w.clone();
                x.0[q].1 = v[q + 2].1;
                x.0[q + 2] = (true, Sup::Minus);
                Ok(Dispatch::Lower { x, l: q + 3, m12: true })
            }
        }
        Sup::Minus => {
            if q + 1 == m {
                return Ok(Dispatch::Critical(T3_FAMILIES[1]));
            }
            if v[q + 1].0 {
                // x1 with s = -, or the critical tail 01.
                if q + 2 == m {
                    return Ok(Dispatch::Critical(T3_FAMILIES[2]));
                }
                if !v[q + 2].0 {
                    return bad();
                }
                let mut z = w.clone();
                z.0[q].1 = Sup::One;
                z.0[q + 2] = (false, Sup::Minus);
                return Ok(Dispatch::Upper { z, l: q + 3, m12: true });
            }
            match v[q + 1].1 {
                Sup::X => {
                    // An unconsumed block: x2 with s = x.
                    if q + 3 >= m || !v[q + 2].0 || !v[q + 3].0 {
                        return bad();
                    }
                    let mut z = w.clone();
                    z.0[q + 1].1 = Sup::One;
                    z.0[q + 3] = (false, Sup::X);
                    Ok(Dispatch::Upper { z, l: q + 4, m12: true })
                }
                Sup::One => {
                    // z2, or x2 with s = 1.
                    if q + 3 >= m || !v[q + 2].0 {
                        return bad();
                    }
                    if v[q + 3].0 {
                        let mut z = w.clone();
                        z.0[q + 3] = (false, Sup::One);
                        Ok(Dispatch::Upper { z, l: q + 4, m12: true })
                    } else {
                        let mut x = w.clone();
                        x.0[q + 1].1 = v[q + 3].1;
                        x.0[q + 3] = (true, Sup::Minus);
                        Ok(Dispatch::Lower { x, l: q + 4, m12: true })
                    }
                }
                Sup::Minus => {
                    if q + 2 == m {
                        return Ok(Dispatch::Critical(T3_FAMILIES[4]));
                    }
                    if !v[q + 2].0 {
                        // z3.
                        let mut x = w.clone();
                        x.0[q].1 = Sup::X;
                        x.0[q + 1] = (true, Sup::Minus);
                        return Ok(Dispatch::Lower { x, l: q + 2, m12: false });
                    }
                    if q + 3 == m {
                        return Ok(Dispatch::Critical(T3_FAMILIES[3]));
                    }
                    if !v[q + 3].0 {
                        return bad();
                    }
                    // x2 with s = -.
                    let mut z = w.clone();
                    z.0[q + 1].1 = Sup::One;
                    z.0[q + 3] = (false, Sup::Minus);
                    Ok(Dispatch::Upper { z, l: q + 4, m12: true })
                }
            }
        }
    }
}

fn matching_from<P>(c: &BasedComplex, partner: P) -> Result<Matching>
where
    P: Fn(&EnhancedWord) -> Result<Dispatch>,
{
    let mut arrows = Vec::new();
    for (r, data) in c.cells() {
        let CellLabel::Word(w) = &data.label else {
            return Err(Error::Invariant(format!("cell {r:?} has no enhanced-word label")));
        };
        if let Dispatch::Lower { x, .. } = partner(w)? {
            arrows.push((r.clone(), (r.0 + 1, x.to_string())));
        }
    }
    Ok(Matching::new(arrows))
}

/// The delooped cube of `σ1^m` together with the §3 matching on it.
pub fn matching_t2(m: usize) -> Result<(BasedComplex, Matching)> {
    let c = enhanced_cube(&t2_word(m))?;
    let matching = matching_from(&c, t2_partner)?;
    Ok((c, matching))
}

/// The delooped cube of `(σ1σ2)^k` together with the §4 matching on it.
pub fn matching_t3(k: usize) -> Result<(BasedComplex, Matching)> {
    let c = enhanced_cube(&t3_word(k))?;
    let matching = matching_from(&c, t3_partner)?;
    Ok((c, matching))
}

/// Largest `m` for which the delooped `σ1^m` cube is materialized; the
/// Morse route runs below this, the crossing-by-crossing pipeline above
/// (minimal complexes are unique up to isomorphism, so either serves).
const T2_EXPLICIT_LIMIT: usize = 10;
const T3_EXPLICIT_LIMIT: usize = 5;

/// Minimal complex of `σ1^m`: `m + 1` cells, one at each `(t, 2t - m + 1)`
/// for `t = -m..-1` plus one at `(0, -m)`.
pub fn minimal_complex_t2(m: usize) -> Result<BasedComplex> {
    if m <= T2_EXPLICIT_LIMIT {
        let (c, matching) = matching_t2(m)?;
        morse_complex(&c, &matching)
    } else {
        reduced_complex_with_budget(&TangleExpr::Braid(t2_word(m)), DEFAULT_CELL_BUDGET)
    }
}

/// Minimal complex of `(σ1σ2)^k`: at most 2 cells per homological level.
pub fn minimal_complex_t3(k: usize) -> Result<BasedComplex> {
    if k <= T3_EXPLICIT_LIMIT {
        let (c, matching) = matching_t3(k)?;
        morse_complex(&c, &matching)
    } else {
        reduced_complex_with_budget(&TangleExpr::Braid(t3_word(k)), DEFAULT_CELL_BUDGET)
    }
}

/// Expected graded cell census of `minimal_complex_t2(m)`.
pub fn t2_expected_census(m: usize) -> Vec<(i32, i64, usize)> {
    let mi = m as i64;
    let mut out: Vec<(i32, i64, usize)> = (-mi..0).map(|t| (t as i32, 2 * t - mi + 1, 1)).collect();
    out.push((0, -mi, 1));
    out
}

/// Expected graded cell census of `minimal_complex_t3(k)`, from the five
/// critical families: `1^2k` at `(0, -2k)`; tails `0` and `01` at
/// `(-1-2r, -2k-3r-1)` while their prefix lengths `2k-3r-1`, `2k-3r-2`
/// stay nonnegative; tails `001` and `00` at `(-2-2r, -2k-3r-2)` while
/// `2k-3r-3`, `2k-3r-2` do.
pub fn t3_expected_census(k: usize) -> Vec<(i32, i64, usize)> {
    let kk = k as i64;
    let mut acc: BTreeMap<(i32, i64), usize> = BTreeMap::new();
    *acc.entry((0, -2 * kk)).or_insert(0) += 1;
    for r in 0..=kk {
        for (p, h, q) in [
            (2 * kk - 3 * r - 1, -1 - 2 * r, -2 * kk - 3 * r - 1),
            (2 * kk - 3 * r - 2, -1 - 2 * r, -2 * kk - 3 * r - 1),
            (2 * kk - 3 * r - 3, -2 - 2 * r, -2 * kk - 3 * r - 2),
            (2 * kk - 3 * r - 2, -2 - 2 * r, -2 * kk - 3 * r - 2),
        ] {
            if p >= 0 {
                *acc.entry((h as i32, q)).or_insert(0) += 1;
            }
        }
    }
    acc.into_iter().map(|((h, q), c)| (h, q, c)).collect()
}

/// Aggregate of a streamed matching validation.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StreamOutcome {
    pub cells: u64,
    pub arrows: u64,
    /// Upper ends of arrows; equals `arrows` for a valid matching.
    pub uppers: u64,
    /// Critical cells per `(hdeg, qshift)`.
    pub critical: BTreeMap<(i32, i64), u64>,
    /// Critical cells per family tag.
    pub families: BTreeMap<&'static str, u64>,
}

impl StreamOutcome {
    fn absorb(&mut self, other: StreamOutcome) {
        self.cells += other.cells;
        self.arrows += other.arrows;
        self.uppers += other.uppers;
        for (k, v) in other.critical {
            *self.critical.entry(k).or_insert(0) += v;
        }
        for (k, v) in other.families {
            *self.families.entry(k).or_insert(0) += v;
        }
    }
}

/// Key of a matched pair in the path preorders: leading ones of both ends,
/// the changing index, and the T3 family class.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
struct Pair {
    o_lower: usize,
    o_upper: usize,
    l: usize,
    m12: bool,
}

/// §3 preorder: compare `O` of the upper cells, then `L` descending.
fn t2_precedes(p: &Pair, q: &Pair) -> bool {
    p.o_upper < q.o_upper || (p.o_upper == q.o_upper && p.l > q.l)
}

/// §4 preorder: compare `O` of the lower cells, then `z3`-arrows before
/// `z1`/`z2`-arrows, then `L` descending within `z1`/`z2` and ascending
/// within `z3`.
fn t3_precedes(p: &Pair, q: &Pair) -> bool {
    if p.o_lower != q.o_lower {
        return p.o_lower < q.o_lower;
    }
    match (p.m12, q.m12) {
        (false, true) => true,
        (true, false) => false,
        (true, true) => p.l > q.l,
        (false, false) => p.l < q.l,
    }
}

/// One 0-bit flip of one resolution, reduced to what label bookkeeping
/// needs: the far-side word skeleton, which codomain circles are forced by
/// persisting domain circles, and per-component circle masks for dots.
struct EdgeInfo {
    r: usize,
    v_bits: Vec<bool>,
    v_origins: Vec<usize>,
    forced: Vec<Option<usize>>,
    free_cod: Vec<usize>,
    comps: Vec<EdgeComp>,
}

struct EdgeComp {
    dom_circ: u64,
    cod_circ: u64,
    closed: bool,
    identity_arc: bool,
}

fn edge_info(word: &BraidWord, su: &Smoothing, u_bits: &[bool], r: usize) -> Result<EdgeInfo> {
    let mut v_bits = u_bits.to_vec();
    v_bits[r] = true;
    let sv = resolve(word, &v_bits)?;
    let gen = edge_generator(word, su, &sv, r)?;
    let bu = su.tangle.b();
    let bv = sv.tangle.b();
    let cv = sv.origins.len();
    if su.origins.len() > 60 || cv > 60 {
        return Err(Error::Budget("more than 60 circles in one resolution".into()));
    }
    let same_tangle = su.tangle.pairing() == sv.tangle.pairing();
    let mut comps = Vec::with_capacity(gen.components().len());
    let mut forced: Vec<Option<usize>> = vec![None; cv];
    for comp in gen.components() {
        let mut dom_circ = 0u64;
        let mut cod_circ = 0u64;
        let mut dom_arc = None;
        let mut cod_arc = None;
        let mut arcs = 0usize;
        for &p in &comp.dom {
            if p >= bu {
                dom_circ |= 1 << (p - bu);
            } else {
                dom_arc = Some(p);
                arcs += 1;
            }
        }
        for &p in &comp.cod {
            if p >= bv {
                cod_circ |= 1 << (p - bv);
            } else {
                cod_arc = Some(p);
                arcs += 1;
            }
        }
        let closed = arcs == 0;
        if closed && dom_circ.count_ones() == 1 && cod_circ.count_ones() == 1 {
            forced[cod_circ.trailing_zeros() as usize] = Some(dom_circ.trailing_zeros() as usize);
        }
        let identity_arc = same_tangle && arcs == 2 && dom_arc == cod_arc;
        comps.push(EdgeComp { dom_circ, cod_circ, closed, identity_arc });
    }
    let free_cod: Vec<usize> = (0..cv).filter(|&j| forced[j].is_none()).collect();
    if free_cod.len() > 16 {
        return Err(Error::Budget("more than 16 free circles at a surgery site".into()));
    }
    Ok(EdgeInfo { r, v_bits, v_origins: sv.origins, forced, free_cod, comps })
}

fn mu_word_of(e: &EdgeInfo, mu: u64) -> EnhancedWord {
    let sups: Vec<Sup> = (0..e.v_origins.len())
        .map(|j| if mu >> j & 1 == 1 { Sup::One } else { Sup::X })
        .collect();
    enhanced_word_of(&e.v_bits, &e.v_origins, &sups)
}

/// Stream over every cell of the delooped cube of `word` without holding
/// the complex: check that `partner` is an involutive matching whose
/// matched entries are isomorphisms and whose other entries strictly
/// increase `precedes` (hence the matching is acyclic), and tally the
/// critical cells.
fn stream_validate<P, Q>(word: &BraidWord, partner: P, precedes: Q) -> Result<StreamOutcome>
where
    P: Fn(&EnhancedWord) -> Result<Dispatch> + Sync,
    Q: Fn(&Pair, &Pair) -> bool + Sync,
{
    let m = word.len();
    if m > 30 {
        return Err(Error::Budget(format!("streaming cube on {m} crossings")));
    }
    let n_minus = word.n_minus() as i64;
    let n_plus = word.n_plus() as i64;
    (0..1usize << m)
        .into_par_iter()
        .try_fold(StreamOutcome::default, |mut out, u| {
            let bits: Vec<bool> = (0..m).map(|i| u >> i & 1 == 1).collect();
            let su = resolve(word, &bits)?;
            let cu = su.origins.len();
            let ones = bits.iter().filter(|&&b| b).count() as i64;
            let hdeg = (ones - n_minus) as i32;
            let q0 = ones + n_plus - 2 * n_minus;
            let edges: Vec<EdgeInfo> = (0..m)
                .filter(|&r| !bits[r])
                .map(|r| edge_info(word, &su, &bits, r))
                .collect::<Result<_>>()?;
            let mut lam = vec![Sup::X; cu];
            for lmask in 0..1u64 << cu {
                for (i, s) in lam.iter_mut().enumerate() {
                    *s = if lmask >> i & 1 == 1 { Sup::One } else { Sup::X };
                }
                let w = enhanced_word_of(&bits, &su.origins, &lam);
                out.cells += 1;
                match partner(&w)? {
                    Dispatch::Critical(family) => {
                        let q = q0 + w.total_sup_qdeg();
                        *out.critical.entry((hdeg, q)).or_insert(0) += 1;
                        *out.families.entry(family).or_insert(0) += 1;
                    }
                    Dispatch::Upper { z, .. } => match partner(&z)? {
                        Dispatch::Lower { x, .. } if x == w => {}
                        other => {
                            return Err(Error::Invariant(format!(
                                "matching not involutive at {w}: partner {z} answers {other:?}"
                            )))
                        }
                    },
                    Dispatch::Lower { x, l, m12 } => {
                        out.arrows += 1;
                        match partner(&x)? {
                            Dispatch::Upper { z, .. } if z == w => {}
                            other => {
                                return Err(Error::Invariant(format!(
                                    "matching not involutive at {w}: partner {x} answers {other:?}"
                                )))
                            }
                        }
                        let own = Pair {
                            o_lower: w.leading_ones(),
                            o_upper: x.leading_ones(),
                            l,
                            m12,
                        };
                        let e0 = edges.iter().find(|e| e.r == l - 1).ok_or_else(|| {
                            Error::Invariant(format!("changing index {l} of {w} is not a 0-bit"))
                        })?;
                        let mut mu_x = 0u64;
                        for (j, &o) in e0.v_origins.iter().enumerate() {
                            match x.0[o].1 {
                                Sup::One => mu_x |= 1 << j,
                                Sup::X => {}
                                Sup::Minus => {
                                    return Err(Error::Invariant(format!(
                                        "partner {x} of {w} misses a circle label"
                                    )))
                                }
                            }
                        }
                        for (j, f) in e0.forced.iter().enumerate() {
                            if let Some(i) = f {
                                if lmask >> i & 1 != mu_x >> j & 1 {
                                    return Err(Error::Invariant(format!(
                                        "matched entry {w} -> {x} vanishes: persisting labels differ"
                                    )));
                                }
                            }
                        }
                        for comp in &e0.comps {
                            let dots = (comp.dom_circ & !lmask).count_ones()
                                + (comp.cod_circ & mu_x).count_ones();
                            let iso = if comp.closed { dots == 1 } else { dots == 0 && comp.identity_arc };
                            if !iso {
                                return Err(Error::Invariant(format!(
                                    "matched entry {w} -> {x} is not an isomorphism"
                                )));
                            }
                        }
                        for e in &edges {
                            'mus: for fm in 0..1u64 << e.free_cod.len() {
                                let mut mu = 0u64;
                                for (j, f) in e.forced.iter().enumerate() {
                                    if let Some(i) = f {
                                        mu |= (lmask >> i & 1) << j;
                                    }
                                }
                                for (t, &j) in e.free_cod.iter().enumerate() {
                                    mu |= (fm >> t & 1) << j;
                                }
                                for comp in &e.comps {
                                    let dots = (comp.dom_circ & !lmask).count_ones()
                                        + (comp.cod_circ & mu).count_ones();
                                    if if comp.closed { dots != 1 } else { dots >= 2 } {
                                        continue 'mus;
                                    }
                                }
                                if e.r == e0.r && mu == mu_x {
                                    continue;
                                }
                                let y = mu_word_of(e, mu);
                                if let Dispatch::Upper { z, l: l2, m12: m2 } = partner(&y)? {
                                    if z == w {
                                        return Err(Error::Invariant(format!(
                                            "cell {w} matched twice: to {x} and to {y}"
                                        )));
                                    }
                                    let other = Pair {
                                        o_lower: z.leading_ones(),
                                        o_upper: y.leading_ones(),
                                        l: l2,
                                        m12: m2,
                                    };
                                    if !precedes(&own, &other) {
                                        return Err(Error::Invariant(format!(
                                            "path preorder violated by the entry {w} -> {y}"
                                        )));
                                    }
                                }
                            }
                        }
                    }
                }
            }
            Ok(out)
        })
        .try_reduce(StreamOutcome::default, |mut a, b| {
            a.absorb(b);
            Ok(a)
        })
}

/// Streamed validation of the T2 matching on `σ1^m`.
pub fn stream_validate_t2(m: usize) -> Result<StreamOutcome> {
    stream_validate(&t2_word(m), t2_partner, t2_precedes)
}

/// Streamed validation of the T3 matching on `(σ1σ2)^k`.
pub fn stream_validate_t3(k: usize) -> Result<StreamOutcome> {
    stream_validate(&t3_word(k), t3_partner, t3_precedes)
}

/// Truncation window: keep degrees `≤ a` or `≥ a`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum TruncMode {
    Le,
    Ge,
}

/// A stupidly truncated complex: cells outside the window are dropped, so
/// the boundary-crossing differential is zero.
#[derive(Clone, Debug)]
pub struct TruncatedComplex {
    pub base: BasedComplex,
    pub mode: TruncMode,
    pub a: i32,
}

pub fn truncate(c: &BasedComplex, mode: TruncMode, a: i32) -> TruncatedComplex {
    let mut base = c.clone();
    let drop: Vec<CellRef> = base
        .cells()
        .filter(|(r, _)| match mode {
            TruncMode::Le => r.0 > a,
            TruncMode::Ge => r.0 < a,
        })
        .map(|(r, _)| r.clone())
        .collect();
    for r in &drop {
        base.remove_cell(r);
    }
    TruncatedComplex { base, mode, a }
}

/// A based isomorphism of complexes: a grading-preserving cell bijection
/// with a sign per cell, commuting with both differentials entrywise.
#[derive(Clone, Debug)]
pub struct BasedIsomorphism {
    pub map: BTreeMap<CellRef, (CellId, i64)>,
}

type GroupKey = (i32, i64, CrosslessTangle);

fn group_cells(c: &BasedComplex) -> BTreeMap<GroupKey, Vec<CellRef>> {
    let mut out: BTreeMap<GroupKey, Vec<CellRef>> = BTreeMap::new();
    for (r, d) in c.cells() {
        out.entry((r.0, d.qshift, d.object.clone())).or_default().push(r.clone());
    }
    out
}

/// Search for a based isomorphism between two complexes: cells are grouped
/// by `(hdeg, qshift, object)`, bijections respect the groups, and signs
/// come from a parity-consistent assignment over all paired entries.
/// Errors carry the first obstruction.
pub fn find_based_isomorphism(a: &BasedComplex, b: &BasedComplex) -> Result<BasedIsomorphism> {
    let ga = group_cells(a);
    let gb = group_cells(b);
    for key in ga.keys().chain(gb.keys()) {
        let na = ga.get(key).map_or(0, Vec::len);
        let nb = gb.get(key).map_or(0, Vec::len);
        if na != nb {
            return Err(Error::Mismatch(format!(
                "cell mismatch at hdeg {}, qshift {}: {} vs {} cells on the same object",
                key.0, key.1, na, nb
            )));
        }
    }
    if a.entry_count() != b.entry_count() {
        return Err(Error::Mismatch(format!(
            "differential entry counts differ: {} vs {}",
            a.entry_count(),
            b.entry_count()
        )));
    }
    let groups: Vec<(&Vec<CellRef>, &Vec<CellRef>)> =
        ga.iter().map(|(k, va)| (va, &gb[k])).collect();
    if groups.iter().any(|(va, _)| va.len() > 6) {
        return Err(Error::Budget("cell group larger than 6 in isomorphism search".into()));
    }
    let mut phi: BTreeMap<CellRef, CellRef> = BTreeMap::new();
    if let Some(map) = assign(a, b, &groups, 0, &mut phi) {
        Ok(BasedIsomorphism { map })
    } else {
        Err(Error::Mismatch(
            "no sign assignment commutes with both differentials".into(),
        ))
    }
}

fn assign(
    a: &BasedComplex,
    b: &BasedComplex,
    groups: &[(&Vec<CellRef>, &Vec<CellRef>)],
    idx: usize,
    phi: &mut BTreeMap<CellRef, CellRef>,
) -> Option<BTreeMap<CellRef, (CellId, i64)>> {
    let Some((va, vb)) = groups.get(idx) else {
        return try_signs(a, b, phi);
    };
    let mut order: Vec<usize> = (0..vb.len()).collect();
    loop {
        for (x, &o) in va.iter().zip(order.iter()) {
            phi.insert(x.clone(), vb[o].clone());
        }
        if let Some(map) = assign(a, b, groups, idx + 1, phi) {
            return Some(map);
        }
        if !next_permutation(&mut order) {
            return None;
        }
    }
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

fn try_signs(
    a: &BasedComplex,
    b: &BasedComplex,
    phi: &BTreeMap<CellRef, CellRef>,
) -> Option<BTreeMap<CellRef, (CellId, i64)>> {
    // Weighted union-find over the cells of `a`: parity 1 joins cells whose
    // signs must differ.
    let index: BTreeMap<&CellRef, usize> =
        phi.keys().enumerate().map(|(i, r)| (r, i)).collect();
    let mut parent: Vec<usize> = (0..index.len()).collect();
    let mut parity: Vec<u8> = vec![0; index.len()];
    fn find(parent: &mut [usize], parity: &mut [u8], x: usize) -> (usize, u8) {
        if parent[x] == x {
            return (x, 0);
        }
        let (root, par) = find(parent, parity, parent[x]);
        parent[x] = root;
        parity[x] ^= par;
        (root, parity[x])
    }
    for (src, row) in phi.keys().map(|r| (r, a.outgoing(r))) {
        for (tgt, ea) in row {
            let bs = (phi[src].0, phi[src].1.clone());
            let bt = phi.get(&tgt)?.clone();
            let eb = b.entry(&bs, &bt)?;
            let s = if eb == ea {
                0u8
            } else if *eb == ea.scale(-1).ok()? {
                1u8
            } else {
                return None;
            };
            let (i, j) = (index[src], index[&tgt]);
            let (ri, pi) = find(&mut parent, &mut parity, i);
            let (rj, pj) = find(&mut parent, &mut parity, j);
            if ri == rj {
                if pi ^ pj != s {
                    return None;
                }
            } else {
                parent[ri] = rj;
                parity[ri] = pi ^ pj ^ s;
            }
        }
    }
    let mut map = BTreeMap::new();
    for (r, i) in &index {
        let (_, p) = find(&mut parent, &mut parity, *i);
        let sign = if p == 0 { 1 } else { -1 };
        map.insert((*r).clone(), (phi[*r].1.clone(), sign));
    }
    Some(map)
}

/// The four §5.2 truncated isomorphisms and the two dual T2 statements.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum IsoKind {
    /// `τ^{≥-m} M⟦σ1^m⟧ ≅ τ^{≥-m} (M⟦σ1^{m+2}⟧ {2})`
    T2Ge,
    /// `τ^{≤-1} M⟦σ1^m⟧ ≅ τ^{≤-1} (M⟦σ1^{m+2}⟧ [2]{6})`
    T2Le,
    /// `τ^{≥-⌊4k/3⌋} M⟦(σ1σ2)^k⟧ ≅ τ^{≥-⌊4k/3⌋} (M⟦(σ1σ2)^{k+3}⟧ {6})`
    T3Ge,
    /// `τ^{≤-1} M⟦(σ1σ2)^k⟧ ≅ τ^{≤-1} (M⟦(σ1σ2)^{k+3}⟧ [4]{12})`
    T3Le,
    /// `τ^{≤m} V M⟦σ1^m⟧ ≅ τ^{≤m} ((V M⟦σ1^{m+2}⟧) {-2})`
    T2DualLe,
    /// `τ^{≥1} V M⟦σ1^m⟧ ≅ τ^{≥1} ((V M⟦σ1^{m+2}⟧) [-2]{-6})`
    T2DualGe,
}

/// Build both sides of the named truncated isomorphism at parameter `p`
/// (`m` for the T2 kinds, `k` for the T3 kinds) and search for the explicit
/// based isomorphism.
pub fn truncated_iso_check(kind: IsoKind, p: usize) -> Result<BasedIsomorphism> {
    let (lhs, rhs, mode, a) = match kind {
        IsoKind::T2Ge => (
            minimal_complex_t2(p)?,
            minimal_complex_t2(p + 2)?.shift(0, 2),
            TruncMode::Ge,
            -(p as i32),
        ),
        IsoKind::T2Le => (
            minimal_complex_t2(p)?,
            minimal_complex_t2(p + 2)?.shift(2, 6),
            TruncMode::Le,
            -1,
        ),
        IsoKind::T3Ge => (
            minimal_complex_t3(p)?,
            minimal_complex_t3(p + 3)?.shift(0, 6),
            TruncMode::Ge,
            -((4 * p / 3) as i32),
        ),
        IsoKind::T3Le => (
            minimal_complex_t3(p)?,
            minimal_complex_t3(p + 3)?.shift(4, 12),
            TruncMode::Le,
            -1,
        ),
        IsoKind::T2DualLe => (
            minimal_complex_t2(p)?.dual(),
            minimal_complex_t2(p + 2)?.dual().shift(0, -2),
            TruncMode::Le,
            p as i32,
        ),
        IsoKind::T2DualGe => (
            minimal_complex_t2(p)?.dual(),
            minimal_complex_t2(p + 2)?.dual().shift(-2, -6),
            TruncMode::Ge,
            1,
        ),
    };
    find_based_isomorphism(&truncate(&lhs, mode, a).base, &truncate(&rhs, mode, a).base)
}

/// Graded Euler characteristic in the crossingless-tangle skein: returns
/// the number of distinct `q^j · [tangle]` monomials with nonzero
/// coefficient and the total absolute coefficient mass. A complex is
/// monomial-minimal when both equal its cell count.
pub fn skein_euler_monomials(c: &BasedComplex) -> (usize, usize) {
    let mut acc: BTreeMap<(i64, CrosslessTangle), i64> = BTreeMap::new();
    for ((h, _), d) in c.cells() {
        *acc.entry((d.qshift, d.object.clone())).or_insert(0) +=
            if h.rem_euclid(2) == 0 { 1 } else { -1 };
    }
    let monomials = acc.values().filter(|&&v| v != 0).count();
    let mass = acc.values().map(|v| v.unsigned_abs() as usize).sum();
    (monomials, mass)
}

/// Family tag of a T3 critical cell, for the family-membership invariant.
pub fn t3_critical_family(w: &EnhancedWord) -> Result<&'static str> {
    match t3_partner(w)? {
        Dispatch::Critical(f) => Ok(f),
        _ => Err(Error::Invariant(format!("{w} is not critical"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morse::{validate_matching, zigzag_paths};
    use crate::planar::reduced_complex;

    fn census_of(c: &BasedComplex) -> Vec<(i32, i64, usize)> {
        c.census()
    }

    #[test]
    fn t2_matching_small() {
        let (_, m0) = matching_t2(0).unwrap();
        assert!(m0.is_empty());
        let (c2, m2) = matching_t2(2).unwrap();
        assert_eq!(c2.len(), 5);
        assert_eq!(m2.arrows, vec![((-2, "010-".into()), (-1, "0-1-".into()))]);
        validate_matching(&c2, &m2).unwrap();
    }

    #[test]
    fn t2_minimal_censuses() {
        assert_eq!(census_of(&minimal_complex_t2(0).unwrap()), vec![(0, 0, 1)]);
        assert_eq!(
            census_of(&minimal_complex_t2(2).unwrap()),
            vec![(-2, -5, 1), (-1, -3, 1), (0, -2, 1)]
        );
        let c5 = minimal_complex_t2(5).unwrap();
        let qs: Vec<i64> = census_of(&c5).iter().map(|&(_, q, _)| q).collect();
        assert_eq!(qs, vec![-14, -12, -10, -8, -6, -5]);
        for m in 0..=7 {
            let c = minimal_complex_t2(m).unwrap();
            c.validate().unwrap();
            assert_eq!(c.len(), m + 1);
            assert_eq!(census_of(&c), t2_expected_census(m));
        }
    }

    #[test]
    fn t2_zigzag_path_counts() {
        let (c, matching) = matching_t2(4).unwrap();
        let crit = ["0x0x0x0-", "1-0x0x0-", "1-1-0x0-", "1-1-1-0-", "1-1-1-1-"];
        for (t, pair) in crit.windows(2).enumerate() {
            let from = (t as i32 - 4, pair[0].to_string());
            let to = (t as i32 - 3, pair[1].to_string());
            let paths = zigzag_paths(&c, &matching, &from, &to);
            let expected = if t == 3 { 1 } else { 2 };
            assert_eq!(paths.len(), expected, "paths {} -> {}", pair[0], pair[1]);
        }
    }

    #[test]
    fn t3_matching_k1_is_empty() {
        let (c, m) = matching_t3(1).unwrap();
        assert!(m.is_empty());
        assert_eq!(c.len(), 4);
        assert_eq!(census_of(&c), vec![(-2, -4, 1), (-1, -3, 2), (0, -2, 1)]);
        assert_eq!(census_of(&c), t3_expected_census(1));
    }

    #[test]
    fn t3_matchings_validate_and_reduce() {
        for k in 0..=4 {
            let (c, matching) = matching_t3(k).unwrap();
            validate_matching(&c, &matching).unwrap();
            let mc = morse_complex(&c, &matching).unwrap();
            mc.validate().unwrap();
            assert_eq!(census_of(&mc), t3_expected_census(k), "k = {k}");
            for (_, _, count) in census_of(&mc) {
                assert!(count <= 2);
            }
            for (_, data) in mc.cells() {
                let CellLabel::Word(w) = &data.label else { panic!("unlabeled cell") };
                let family = t3_critical_family(w).unwrap();
                assert!(T3_FAMILIES.contains(&family));
            }
        }
    }

    #[test]
    fn streaming_agrees_with_explicit() {
        for m in 0..=7 {
            let (c, matching) = matching_t2(m).unwrap();
            let out = stream_validate_t2(m).unwrap();
            assert_eq!(out.cells, c.len() as u64);
            assert_eq!(out.arrows, matching.len() as u64);
            let crit: Vec<(i32, i64, usize)> = out
                .critical
                .iter()
                .map(|(&(h, q), &n)| (h, q, n as usize))
                .collect();
            assert_eq!(crit, t2_expected_census(m), "m = {m}");
        }
        for k in 0..=3 {
            let (c, matching) = matching_t3(k).unwrap();
            let out = stream_validate_t3(k).unwrap();
            assert_eq!(out.cells, c.len() as u64);
            assert_eq!(out.arrows, matching.len() as u64);
            let crit: Vec<(i32, i64, usize)> = out
                .critical
                .iter()
                .map(|(&(h, q), &n)| (h, q, n as usize))
                .collect();
            assert_eq!(crit, t3_expected_census(k), "k = {k}");
        }
    }

    #[test]
    fn streaming_larger_parameters() {
        let out = stream_validate_t2(12).unwrap();
        assert_eq!(out.cells, (3u64.pow(12) + 1) / 2);
        assert_eq!(out.cells, 2 * out.arrows + 13);
        let out = stream_validate_t3(5).unwrap();
        let crit: Vec<(i32, i64, usize)> =
            out.critical.iter().map(|(&(h, q), &n)| (h, q, n as usize)).collect();
        assert_eq!(crit, t3_expected_census(5));
        assert_eq!(
            out.cells,
            2 * out.arrows + out.families.values().sum::<u64>()
        );
    }

    #[test]
    fn pipeline_route_matches_morse_route() {
        for m in [3usize, 6] {
            let morse = minimal_complex_t2(m).unwrap();
            let pipe =
                reduced_complex(&TangleExpr::Braid(t2_word(m))).unwrap();
            find_based_isomorphism(&morse, &pipe).unwrap();
        }
        for k in [2usize, 4] {
            let morse = minimal_complex_t3(k).unwrap();
            let pipe =
                reduced_complex(&TangleExpr::Braid(t3_word(k))).unwrap();
            find_based_isomorphism(&morse, &pipe).unwrap();
        }
    }

    #[test]
    fn truncate_windows() {
        let c = minimal_complex_t2(2).unwrap();
        let t = truncate(&c, TruncMode::Le, -1);
        assert_eq!(t.base.len(), 2);
        assert_eq!(t.base.h_max(), Some(-1));
        assert!(t.base.cells_at(0).is_empty());
        let full = truncate(&c, TruncMode::Le, 5);
        assert_eq!(full.base.len(), c.len());
        assert_eq!(full.base.entry_count(), c.entry_count());
        let ge = truncate(&c, TruncMode::Ge, -2);
        assert_eq!(ge.base.len(), c.len());
    }

    fn complexes_equal(a: &BasedComplex, b: &BasedComplex) -> bool {
        if a.len() != b.len() || a.entry_count() != b.entry_count() {
            return false;
        }
        for (r, d) in a.cells() {
            match b.cell(r) {
                Some(e) if e.object == d.object && e.qshift == d.qshift => {}
                _ => return false,
            }
            for (tgt, m) in a.outgoing(r) {
                if b.entry(r, &tgt) != Some(m) {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn dual_is_involutive_and_swaps_truncations() {
        let c = minimal_complex_t3(2).unwrap();
        assert!(complexes_equal(&c.dual().dual(), &c));
        let lhs = truncate(&c, TruncMode::Le, -2).base.dual();
        let rhs = truncate(&c.dual(), TruncMode::Ge, 2).base;
        assert!(complexes_equal(&lhs, &rhs));
    }

    #[test]
    fn dual_of_sigma1_is_its_inverse() {
        let pos = reduced_complex(&TangleExpr::Braid(t2_word(1))).unwrap();
        let inv = BraidWord::generator_power(2, 1, -1).unwrap();
        let neg = reduced_complex(&TangleExpr::Braid(inv)).unwrap();
        find_based_isomorphism(&pos.dual(), &neg).unwrap();
    }

    #[test]
    fn truncated_isos_small() {
        for p in 0..=2 {
            for kind in [
                IsoKind::T2Ge,
                IsoKind::T2Le,
                IsoKind::T3Ge,
                IsoKind::T3Le,
                IsoKind::T2DualLe,
                IsoKind::T2DualGe,
            ] {
                truncated_iso_check(kind, p)
                    .unwrap_or_else(|e| panic!("{kind:?} at {p}: {e}"));
            }
        }
    }

    #[test]
    fn wrong_shift_has_no_isomorphism() {
        let lhs = minimal_complex_t2(3).unwrap();
        let rhs = minimal_complex_t2(5).unwrap().shift(0, 3);
        let la = truncate(&lhs, TruncMode::Ge, -3).base;
        let rb = truncate(&rhs, TruncMode::Ge, -3).base;
        assert!(find_based_isomorphism(&la, &rb).is_err());
    }

    #[test]
    fn euler_monomial_minimality() {
        for m in 0..=8 {
            let c = minimal_complex_t2(m).unwrap();
            assert_eq!(skein_euler_monomials(&c), (m + 1, m + 1));
        }
        for k in 0..=4 {
            let c = minimal_complex_t3(k).unwrap();
            let cells = c.len();
            assert_eq!(skein_euler_monomials(&c), (cells, cells), "k = {k}");
        }
    }
}
