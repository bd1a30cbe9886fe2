//! Dotted cobordism category `Cob(2b)`.
//!
//! Objects are crossingless tangles in the disc with `2b` marked boundary
//! points (plus free circles); morphisms are formal integer combinations of
//! dotted cobordisms in normal form: every component has genus zero, carries
//! at most one dot, and closed components are evaluated to integers.

use crate::{Error, Result};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// A crossingless tangle: a perfect non-crossing pairing of the boundary
/// points `0..2b` together with some number of free circles.
///
/// Boundary points are numbered along the disc boundary; for the tangles
/// produced by braid words the convention is bottom points `0..n-1` left to
/// right, then top points `n..2n-1` right to left.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct CrosslessTangle {
    pairing: Vec<usize>,
    circles: usize,
}

impl CrosslessTangle {
    pub fn new(pairing: Vec<usize>, circles: usize) -> Result<Self> {
        if pairing.len() % 2 != 0 {
            return Err(Error::Invariant("odd number of boundary points".into()));
        }
        for (p, &q) in pairing.iter().enumerate() {
            if q >= pairing.len() || pairing[q] != p || q == p {
                return Err(Error::Invariant(format!("pairing is not an involution at {p}")));
            }
        }
        // Non-crossing check: matched pairs must nest like balanced parentheses.
        let mut stack = Vec::new();
        for p in 0..pairing.len() {
            if pairing[p] > p {
                stack.push(p);
            } else if stack.pop() != Some(pairing[p]) {
                return Err(Error::Invariant(format!("pairing crosses at {p}")));
            }
        }
        Ok(CrosslessTangle { pairing, circles })
    }

    pub fn empty() -> Self {
        CrosslessTangle { pairing: Vec::new(), circles: 0 }
    }

    /// Identity tangle on `n` strands: bottom `i` joined to top `2n-1-i`.
    pub fn identity(n: usize) -> Self {
        let pairing = (0..2 * n).map(|p| 2 * n - 1 - p).collect();
        CrosslessTangle { pairing, circles: 0 }
    }

    /// Half the number of boundary points (= number of arcs).
    pub fn b(&self) -> usize {
        self.pairing.len() / 2
    }

    pub fn boundary_points(&self) -> usize {
        self.pairing.len()
    }

    pub fn circles(&self) -> usize {
        self.circles
    }

    pub fn with_circles(&self, circles: usize) -> Self {
        CrosslessTangle { pairing: self.pairing.clone(), circles }
    }

    pub fn pairing(&self) -> &[usize] {
        &self.pairing
    }

    pub fn partner(&self, p: usize) -> usize {
        self.pairing[p]
    }

    /// Arcs as `(min, max)` endpoint pairs, sorted by the minimal endpoint.
    /// The index in this list is the arc id used by [`CobComponent`] pieces.
    pub fn arcs(&self) -> Vec<(usize, usize)> {
        (0..self.pairing.len())
            .filter(|&p| self.pairing[p] > p)
            .map(|p| (p, self.pairing[p]))
            .collect()
    }

    /// Id of the arc containing boundary point `p`.
    pub fn arc_at(&self, p: usize) -> usize {
        let lo = p.min(self.pairing[p]);
        (0..lo).filter(|&q| self.pairing[q] > q).count()
    }

    /// Total number of pieces: arcs `0..b`, then circles `b..b+circles`.
    pub fn pieces(&self) -> usize {
        self.b() + self.circles
    }

    /// Left-right mirror: bottom points reverse among themselves, top points
    /// reverse among themselves.
    pub fn flip(&self) -> CrosslessTangle {
        let total = self.pairing.len();
        let mut pairing = vec![0; total];
        for p in 0..total {
            pairing[flip_point(total, p)] = flip_point(total, self.pairing[p]);
        }
        CrosslessTangle { pairing, circles: self.circles }
    }
}

/// Where boundary point `p` of a disc with `total` points lands under the
/// left-right flip.
pub fn flip_point(total: usize, p: usize) -> usize {
    let n = total / 2;
    if p < n {
        n - 1 - p
    } else {
        3 * n - 1 - p
    }
}

impl fmt::Display for CrosslessTangle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let arcs: Vec<String> =
            self.arcs().iter().map(|(a, b)| format!("{a}-{b}")).collect();
        write!(f, "[{}]", arcs.join(","))?;
        if self.circles > 0 {
            write!(f, "+{}O", self.circles)?;
        }
        Ok(())
    }
}

/// One connected component of a dotted cobordism, given by the domain and
/// codomain pieces (arc and circle ids) on its boundary plus its genus and
/// number of dots. Normal form has genus `0` and `dots <= 1`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct CobComponent {
    pub dom: BTreeSet<usize>,
    pub cod: BTreeSet<usize>,
    pub genus: u32,
    pub dots: u32,
}

impl CobComponent {
    pub fn new(
        dom: impl IntoIterator<Item = usize>,
        cod: impl IntoIterator<Item = usize>,
        genus: u32,
        dots: u32,
    ) -> Self {
        CobComponent { dom: dom.into_iter().collect(), cod: cod.into_iter().collect(), genus, dots }
    }

    pub fn is_closed(&self) -> bool {
        self.dom.is_empty() && self.cod.is_empty()
    }
}

/// Value of a closed component of genus `g` with `d` dots.
///
/// Undotted sphere is 0, once-dotted sphere is 1, two dots kill, and
/// neck-cutting a handle gives `S(g, d) = 2 S(g-1, d+1)`; in closed form the
/// value is `2^g` when `g + d == 1` and `0` otherwise.
pub fn evaluate_closed(genus: u32, dots: u32) -> i64 {
    if genus + dots == 1 {
        1 << genus
    } else {
        0
    }
}

/// A single dotted cobordism between two crossingless tangles, in normal
/// form: components partition all domain and codomain pieces, each has genus
/// zero and at most one dot, and none is closed.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct CobGenerator {
    dom: CrosslessTangle,
    cod: CrosslessTangle,
    comps: Vec<CobComponent>,
}

impl CobGenerator {
    /// Build and validate a generator. Components must partition the pieces
    /// of both sides, and at every boundary point the domain arc and codomain
    /// arc must lie in the same component (cobordisms are the identity on the
    /// boundary circle of the disc).
    pub fn new(
        dom: CrosslessTangle,
        cod: CrosslessTangle,
        mut comps: Vec<CobComponent>,
    ) -> Result<Self> {
        if dom.boundary_points() != cod.boundary_points() {
            return Err(Error::Mismatch("generator boundary sizes differ".into()));
        }
        let mut dom_owner = vec![usize::MAX; dom.pieces()];
        let mut cod_owner = vec![usize::MAX; cod.pieces()];
        for (ci, c) in comps.iter().enumerate() {
            for &p in &c.dom {
                if p >= dom_owner.len() || dom_owner[p] != usize::MAX {
                    return Err(Error::Invariant(format!("bad domain piece {p}")));
                }
                dom_owner[p] = ci;
            }
            for &p in &c.cod {
                if p >= cod_owner.len() || cod_owner[p] != usize::MAX {
                    return Err(Error::Invariant(format!("bad codomain piece {p}")));
                }
                cod_owner[p] = ci;
            }
        }
        if dom_owner.contains(&usize::MAX) || cod_owner.contains(&usize::MAX) {
            return Err(Error::Invariant("components do not cover all pieces".into()));
        }
        for p in 0..dom.boundary_points() {
            if dom_owner[dom.arc_at(p)] != cod_owner[cod.arc_at(p)] {
                return Err(Error::Invariant(format!(
                    "domain and codomain arcs at boundary point {p} lie in different components"
                )));
            }
        }
        comps.sort();
        Ok(CobGenerator { dom, cod, comps })
    }

    /// Build without the partition checks, for components that are valid by
    /// construction. `comps` must be sorted.
    pub(crate) fn new_unchecked(
        dom: CrosslessTangle,
        cod: CrosslessTangle,
        comps: Vec<CobComponent>,
    ) -> Self {
        debug_assert!(comps.windows(2).all(|w| w[0] <= w[1]));
        CobGenerator { dom, cod, comps }
    }

    pub fn dom(&self) -> &CrosslessTangle {
        &self.dom
    }

    pub fn cod(&self) -> &CrosslessTangle {
        &self.cod
    }

    pub fn components(&self) -> &[CobComponent] {
        &self.comps
    }

    /// Identity cobordism: a vertical sheet over every arc and circle.
    pub fn identity(t: &CrosslessTangle) -> Self {
        let comps =
            (0..t.pieces()).map(|p| CobComponent::new([p], [p], 0, 0)).collect();
        CobGenerator { dom: t.clone(), cod: t.clone(), comps }
    }

    pub fn dots(&self) -> u32 {
        self.comps.iter().map(|c| c.dots).sum()
    }

    /// Number of boundary circles of a component: one per circle piece, plus
    /// the closed walks alternating domain arc / wall / codomain arc / wall.
    pub(crate) fn component_boundary_circles(&self, comp: &CobComponent) -> usize {
        let circle_count = comp.dom.iter().filter(|&&p| p >= self.dom.b()).count()
            + comp.cod.iter().filter(|&&p| p >= self.cod.b()).count();
        let dom_arcs = self.dom.arcs();
        let cod_arcs = self.cod.arcs();
        // States (side, arc, entry point); the walk permutation pairs each
        // boundary circle with its reversal, so cycles come in twos.
        let mut seen: BTreeSet<(u8, usize, usize)> = BTreeSet::new();
        let mut cycles = 0usize;
        let starts: Vec<(u8, usize)> = comp
            .dom
            .iter()
            .filter(|&&p| p < self.dom.b())
            .map(|&p| (0u8, p))
            .chain(comp.cod.iter().filter(|&&p| p < self.cod.b()).map(|&p| (1u8, p)))
            .collect();
        for &(side0, arc0) in &starts {
            let ends = if side0 == 0 { dom_arcs[arc0] } else { cod_arcs[arc0] };
            for entry0 in [ends.0, ends.1] {
                if seen.contains(&(side0, arc0, entry0)) {
                    continue;
                }
                cycles += 1;
                let (mut side, mut arc, mut entry) = (side0, arc0, entry0);
                loop {
                    seen.insert((side, arc, entry));
                    let (a, b) = if side == 0 { dom_arcs[arc] } else { cod_arcs[arc] };
                    let exit = if entry == a { b } else { a };
                    side = 1 - side;
                    arc = if side == 0 { self.dom.arc_at(exit) } else { self.cod.arc_at(exit) };
                    entry = exit;
                    if (side, arc, entry) == (side0, arc0, entry0) {
                        break;
                    }
                }
            }
        }
        debug_assert_eq!(cycles % 2, 0);
        circle_count + cycles / 2
    }

    /// Partition of an arcs-only component's pieces into boundary circuits.
    /// Each circuit alternates domain arc / wall / codomain arc / wall; a
    /// component whose boundary has two or more circuits is not a disc and
    /// must be neck-cut during normalization.
    pub(crate) fn arc_circuits(
        &self,
        comp: &CobComponent,
    ) -> Vec<(BTreeSet<usize>, BTreeSet<usize>)> {
        let dom_arcs = self.dom.arcs();
        let cod_arcs = self.cod.arcs();
        let mut circuits: BTreeSet<(BTreeSet<usize>, BTreeSet<usize>)> = BTreeSet::new();
        for &arc0 in &comp.dom {
            let entry0 = dom_arcs[arc0].0;
            let (mut dom_set, mut cod_set) = (BTreeSet::new(), BTreeSet::new());
            let (mut side, mut arc, mut entry) = (0u8, arc0, entry0);
            loop {
                if side == 0 {
                    dom_set.insert(arc);
                } else {
                    cod_set.insert(arc);
                }
                let (a, b) = if side == 0 { dom_arcs[arc] } else { cod_arcs[arc] };
                let exit = if entry == a { b } else { a };
                side = 1 - side;
                arc = if side == 0 { self.dom.arc_at(exit) } else { self.cod.arc_at(exit) };
                entry = exit;
                if (side, arc, entry) == (0, arc0, entry0) {
                    break;
                }
            }
            circuits.insert((dom_set, cod_set));
        }
        for &arc0 in &comp.cod {
            let entry0 = cod_arcs[arc0].0;
            let (mut dom_set, mut cod_set) = (BTreeSet::new(), BTreeSet::new());
            let (mut side, mut arc, mut entry) = (1u8, arc0, entry0);
            loop {
                if side == 0 {
                    dom_set.insert(arc);
                } else {
                    cod_set.insert(arc);
                }
                let (a, b) = if side == 0 { dom_arcs[arc] } else { cod_arcs[arc] };
                let exit = if entry == a { b } else { a };
                side = 1 - side;
                arc = if side == 0 { self.dom.arc_at(exit) } else { self.cod.arc_at(exit) };
                entry = exit;
                if (side, arc, entry) == (1, arc0, entry0) {
                    break;
                }
            }
            circuits.insert((dom_set, cod_set));
        }
        circuits.into_iter().collect()
    }

    pub(crate) fn component_euler(&self, comp: &CobComponent) -> i64 {
        2 - 2 * comp.genus as i64 - self.component_boundary_circles(comp) as i64
    }

    /// Euler characteristic of the whole cobordism.
    pub fn euler(&self) -> i64 {
        self.comps.iter().map(|c| self.component_euler(c)).sum()
    }

    /// `deg(f) = chi(f) - b - 2 * dots`. Degree-zero graded maps between
    /// shifted objects satisfy `deg(f) = q(dom) - q(cod)`.
    pub fn degree(&self) -> i64 {
        self.euler() - self.dom.b() as i64 - 2 * self.dots() as i64
    }

    /// Mirror image: domain and codomain swapped (used for dual complexes).
    pub fn reflect(&self) -> Self {
        let comps = self
            .comps
            .iter()
            .map(|c| CobComponent {
                dom: c.cod.clone(),
                cod: c.dom.clone(),
                genus: c.genus,
                dots: c.dots,
            })
            .collect();
        let mut g = CobGenerator { dom: self.cod.clone(), cod: self.dom.clone(), comps };
        g.comps.sort();
        g
    }

    /// True when this generator is (plus or minus) an identity cobordism.
    pub fn is_identity_shaped(&self) -> bool {
        self.dom == self.cod
            && self.comps.len() == self.dom.pieces()
            && self.comps.iter().all(|c| {
                c.genus == 0
                    && c.dots == 0
                    && c.dom.len() == 1
                    && c.cod.len() == 1
                    && c.dom.first() == c.cod.first()
            })
    }
}

fn checked_add(a: i64, b: i64) -> Result<i64> {
    a.checked_add(b).ok_or_else(|| Error::Invariant("coefficient overflow in add".into()))
}

fn checked_mul(a: i64, b: i64) -> Result<i64> {
    a.checked_mul(b).ok_or_else(|| Error::Invariant("coefficient overflow in mul".into()))
}

/// A morphism of `Cob`: a finite integer combination of normal-form
/// generators with common domain and codomain. Zero coefficients are never
/// stored.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DottedMorphism {
    dom: CrosslessTangle,
    cod: CrosslessTangle,
    terms: BTreeMap<CobGenerator, i64>,
}

impl DottedMorphism {
    pub fn zero(dom: CrosslessTangle, cod: CrosslessTangle) -> Self {
        DottedMorphism { dom, cod, terms: BTreeMap::new() }
    }

    pub fn identity(t: &CrosslessTangle) -> Self {
        let gen = CobGenerator::identity(t);
        let mut terms = BTreeMap::new();
        terms.insert(gen, 1);
        DottedMorphism { dom: t.clone(), cod: t.clone(), terms }
    }

    /// Build from a raw generator, normalizing: handles are neck-cut
    /// (`genus g, d dots -> 2^g * (genus 0, d+g dots)`), components with two
    /// or more dots kill the term, closed components evaluate to integers.
    pub fn from_generator(gen: CobGenerator, coeff: i64) -> Result<Self> {
        let mut m = DottedMorphism::zero(gen.dom.clone(), gen.cod.clone());
        m.add_generator(gen, coeff)?;
        Ok(m)
    }

    pub fn add_generator(&mut self, mut gen: CobGenerator, coeff: i64) -> Result<()> {
        if gen.dom != self.dom || gen.cod != self.cod {
            return Err(Error::Mismatch("generator boundaries differ from morphism".into()));
        }
        let mut coeff = coeff;
        if coeff == 0 {
            return Ok(());
        }
        if gen.comps.iter().any(|c| c.is_closed() || c.genus > 0) {
            let mut comps = Vec::with_capacity(gen.comps.len());
            for c in &gen.comps {
                let mut c = c.clone();
                if c.is_closed() {
                    coeff = checked_mul(coeff, evaluate_closed(c.genus, c.dots))?;
                    if coeff == 0 {
                        return Ok(());
                    }
                    continue;
                }
                if c.genus > 0 {
                    coeff = checked_mul(coeff, 1 << c.genus)?;
                    c.dots += c.genus;
                    c.genus = 0;
                }
                comps.push(c);
            }
            gen = CobGenerator { dom: gen.dom, cod: gen.cod, comps };
        }
        if gen.comps.iter().any(|c| c.dots >= 2) {
            return Ok(());
        }
        // Neck-cut an arcs-only component whose boundary has two or more
        // circuits: without a dot it is the sum over circuits of "this disc
        // plain, every other disc dotted"; with one dot every disc carries
        // the dot. Components containing circle pieces stay as they are.
        for idx in 0..gen.comps.len() {
            let c = &gen.comps[idx];
            if c.dom.iter().any(|&p| p >= gen.dom.b())
                || c.cod.iter().any(|&p| p >= gen.cod.b())
            {
                continue;
            }
            // Every circuit alternates domain and codomain arcs, so a
            // component with fewer than two arcs on either side is a disc.
            if c.dom.len() < 2 || c.cod.len() < 2 {
                continue;
            }
            let circuits = gen.arc_circuits(c);
            if circuits.len() < 2 {
                continue;
            }
            let dots = c.dots;
            let rest: Vec<CobComponent> = gen
                .comps
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != idx)
                .map(|(_, c)| c.clone())
                .collect();
            let plain_slots: Vec<Option<usize>> = if dots == 1 {
                vec![None]
            } else {
                (0..circuits.len()).map(Some).collect()
            };
            for plain in plain_slots {
                let mut cut = rest.clone();
                for (k, (d, co)) in circuits.iter().enumerate() {
                    let dot = if plain == Some(k) { 0 } else { 1 };
                    cut.push(CobComponent::new(d.iter().copied(), co.iter().copied(), 0, dot));
                }
                let gen2 =
                    CobGenerator { dom: gen.dom.clone(), cod: gen.cod.clone(), comps: cut };
                self.add_generator(gen2, coeff)?;
            }
            return Ok(());
        }
        gen.comps.sort();
        let entry = self.terms.entry(gen).or_insert(0);
        *entry = checked_add(*entry, coeff)?;
        self.terms.retain(|_, v| *v != 0);
        Ok(())
    }

    pub fn dom(&self) -> &CrosslessTangle {
        &self.dom
    }

    pub fn cod(&self) -> &CrosslessTangle {
        &self.cod
    }

    pub fn terms(&self) -> impl Iterator<Item = (&CobGenerator, i64)> {
        self.terms.iter().map(|(g, &c)| (g, c))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &DottedMorphism) -> Result<DottedMorphism> {
        if self.dom != other.dom || self.cod != other.cod {
            return Err(Error::Mismatch("adding morphisms with different boundaries".into()));
        }
        let mut out = self.clone();
        for (g, c) in &other.terms {
            let entry = out.terms.entry(g.clone()).or_insert(0);
            *entry = checked_add(*entry, *c)?;
        }
        out.terms.retain(|_, v| *v != 0);
        Ok(out)
    }

    pub fn scale(&self, k: i64) -> Result<DottedMorphism> {
        if k == 0 {
            return Ok(DottedMorphism::zero(self.dom.clone(), self.cod.clone()));
        }
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            *v = checked_mul(*v, k)?;
        }
        Ok(out)
    }

    /// Degree of a homogeneous morphism; `None` for zero or mixed degrees.
    pub fn degree(&self) -> Option<i64> {
        let mut degs = self.terms.keys().map(|g| g.degree());
        let first = degs.next()?;
        degs.all(|d| d == first).then_some(first)
    }

    /// Single term `epsilon * identity`? Returns the sign if so.
    pub fn invertible_sign(&self) -> Option<i64> {
        if self.terms.len() != 1 {
            return None;
        }
        let (g, &c) = self.terms.iter().next()?;
        ((c == 1 || c == -1) && g.is_identity_shaped()).then_some(c)
    }

    pub fn reflect(&self) -> DottedMorphism {
        let mut terms = BTreeMap::new();
        for (g, &c) in &self.terms {
            terms.insert(g.reflect(), c);
        }
        DottedMorphism { dom: self.cod.clone(), cod: self.dom.clone(), terms }
    }

    /// Composition `self ∘ f` (apply `f` first). Components are glued along
    /// the pieces of the middle tangle; Euler characteristic drops by one per
    /// glued arc, genus is recovered from the boundary-circle count, and
    /// closed components are evaluated away.
    pub fn compose(&self, f: &DottedMorphism) -> Result<DottedMorphism> {
        if f.cod != self.dom {
            return Err(Error::Mismatch(format!(
                "compose: middle tangles differ ({} vs {})",
                f.cod, self.dom
            )));
        }
        let mut out = DottedMorphism::zero(f.dom.clone(), self.cod.clone());
        for (gf, &cf) in &f.terms {
            for (gg, &cg) in &self.terms {
                glue_generators(gf, gg, checked_mul(cf, cg)?, &mut out)?;
            }
        }
        Ok(out)
    }
}

pub(crate) struct UnionFind(Vec<usize>);

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }
    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }
    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra] = rb;
        }
    }
}

/// Glue `gg ∘ gf` along the middle tangle and accumulate the normalized
/// result into `out`.
/// Boundary circles of a prospective component between two objects, usable
/// before the surrounding generator has been assembled and validated.
pub(crate) fn boundary_circles_between(
    dom: &CrosslessTangle,
    cod: &CrosslessTangle,
    comp: &CobComponent,
) -> usize {
    let probe = CobGenerator { dom: dom.clone(), cod: cod.clone(), comps: vec![comp.clone()] };
    probe.component_boundary_circles(comp)
}

fn glue_generators(
    gf: &CobGenerator,
    gg: &CobGenerator,
    coeff: i64,
    out: &mut DottedMorphism,
) -> Result<()> {
    let mid = &gf.cod;
    let nf = gf.comps.len();
    let mut uf = UnionFind::new(nf + gg.comps.len());
    let mut cod_owner = vec![usize::MAX; mid.pieces()];
    for (i, c) in gf.comps.iter().enumerate() {
        for &p in &c.cod {
            cod_owner[p] = i;
        }
    }
    let mut dom_owner = vec![usize::MAX; mid.pieces()];
    for (i, c) in gg.comps.iter().enumerate() {
        for &p in &c.dom {
            dom_owner[p] = i;
        }
    }
    let mid_b = mid.b();
    for p in 0..mid.pieces() {
        uf.union(cod_owner[p], nf + dom_owner[p]);
    }

    #[derive(Default)]
    struct Cluster {
        dom: BTreeSet<usize>,
        cod: BTreeSet<usize>,
        chi: i64,
        dots: u32,
        glued_arcs: i64,
    }
    let mut clusters: BTreeMap<usize, Cluster> = BTreeMap::new();
    for (i, c) in gf.comps.iter().enumerate() {
        let cl = clusters.entry(uf.find(i)).or_default();
        cl.dom.extend(c.dom.iter().copied());
        cl.chi += gf.component_euler(c);
        cl.dots += c.dots;
        cl.glued_arcs += c.cod.iter().filter(|&&p| p < mid_b).count() as i64;
    }
    for (i, c) in gg.comps.iter().enumerate() {
        let cl = clusters.entry(uf.find(nf + i)).or_default();
        cl.cod.extend(c.cod.iter().copied());
        cl.chi += gg.component_euler(c);
        cl.dots += c.dots;
    }

    let mut coeff = coeff;
    let mut comps = Vec::new();
    for cl in clusters.values() {
        let chi = cl.chi - cl.glued_arcs;
        if cl.dom.is_empty() && cl.cod.is_empty() {
            // Closed component: chi = 2 - 2g.
            let twice_genus = 2 - chi;
            if twice_genus < 0 || twice_genus % 2 != 0 {
                return Err(Error::Invariant(format!("closed component with chi {chi}")));
            }
            coeff = checked_mul(coeff, evaluate_closed(twice_genus as u32 / 2, cl.dots))?;
            if coeff == 0 {
                return Ok(());
            }
            continue;
        }
        let probe = CobComponent::new(cl.dom.iter().copied(), cl.cod.iter().copied(), 0, 0);
        let probe_gen = CobGenerator {
            dom: gf.dom.clone(),
            cod: gg.cod.clone(),
            comps: vec![probe.clone()],
        };
        let nbdr = probe_gen.component_boundary_circles(&probe) as i64;
        let twice_genus = 2 - nbdr - chi;
        if twice_genus < 0 || twice_genus % 2 != 0 {
            return Err(Error::Invariant(format!(
                "glued component with chi {chi}, boundary circles {nbdr}"
            )));
        }
        comps.push(CobComponent::new(
            cl.dom.iter().copied(),
            cl.cod.iter().copied(),
            twice_genus as u32 / 2,
            cl.dots,
        ));
    }
    let gen = CobGenerator { dom: gf.dom.clone(), cod: gg.cod.clone(), comps };
    out.add_generator(gen, coeff)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle for closed-surface values: apply the neck-cutting
    /// recursion symbolically instead of the closed form.
    fn evaluate_closed_recursive(genus: u32, dots: u32) -> i64 {
        if genus == 0 {
            return if dots == 1 { 1 } else { 0 };
        }
        2 * evaluate_closed_recursive(genus - 1, dots + 1)
    }

    #[test]
    fn closed_surface_values() {
        assert_eq!(evaluate_closed(0, 0), 0);
        assert_eq!(evaluate_closed(0, 1), 1);
        assert_eq!(evaluate_closed(0, 2), 0);
        assert_eq!(evaluate_closed(1, 0), 2);
        for g in 0..7 {
            for d in 0..7 {
                assert_eq!(evaluate_closed(g, d), evaluate_closed_recursive(g, d), "g={g} d={d}");
            }
        }
    }

    #[test]
    fn tangle_validation() {
        assert!(CrosslessTangle::new(vec![1, 0, 3, 2], 0).is_ok());
        assert!(CrosslessTangle::new(vec![3, 2, 1, 0], 0).is_ok());
        // (0,2),(1,3) crosses.
        assert!(CrosslessTangle::new(vec![2, 3, 0, 1], 0).is_err());
        assert!(CrosslessTangle::new(vec![0, 1], 0).is_err());
    }

    #[test]
    fn identity_tangle_arcs() {
        let t = CrosslessTangle::identity(3);
        assert_eq!(t.arcs(), vec![(0, 5), (1, 4), (2, 3)]);
        assert_eq!(t.arc_at(4), 1);
        assert_eq!(t.arc_at(2), 2);
    }

    fn saddle() -> CobGenerator {
        // Cup-cap to identity on two strands.
        let cupcap = CrosslessTangle::new(vec![1, 0, 3, 2], 0).unwrap();
        let id2 = CrosslessTangle::identity(2);
        CobGenerator::new(cupcap, id2, vec![CobComponent::new([0, 1], [0, 1], 0, 0)]).unwrap()
    }

    #[test]
    fn degrees() {
        let id2 = CrosslessTangle::identity(2);
        assert_eq!(CobGenerator::identity(&id2).degree(), 0);
        // Single saddle between two arcs in Cob(4): chi = 1, b = 2.
        assert_eq!(saddle().euler(), 1);
        assert_eq!(saddle().degree(), -1);
        // A dot lowers degree by two.
        let arc = CrosslessTangle::identity(1);
        let dotted =
            CobGenerator::new(arc.clone(), arc, vec![CobComponent::new([0], [0], 0, 1)]).unwrap();
        assert_eq!(dotted.degree(), -2);
    }

    #[test]
    fn neck_cutting_normalization() {
        let arc = CrosslessTangle::identity(1);
        let genus1 =
            CobGenerator::new(arc.clone(), arc.clone(), vec![CobComponent::new([0], [0], 1, 0)])
                .unwrap();
        let m = DottedMorphism::from_generator(genus1, 1).unwrap();
        let dotted =
            CobGenerator::new(arc.clone(), arc, vec![CobComponent::new([0], [0], 0, 1)]).unwrap();
        assert_eq!(m, DottedMorphism::from_generator(dotted, 2).unwrap());
    }

    #[test]
    fn two_dots_kill() {
        let arc = CrosslessTangle::identity(1);
        let two =
            CobGenerator::new(arc.clone(), arc, vec![CobComponent::new([0], [0], 0, 2)]).unwrap();
        assert!(DottedMorphism::from_generator(two, 5).unwrap().is_zero());
    }

    #[test]
    fn closed_components_evaluate_in_composition() {
        // Death ∘ birth over an empty tangle = sphere = 0; with a dot on one
        // side = 1; dotted tube cut from torus: torus = 2.
        let e = CrosslessTangle::empty();
        let circ = e.with_circles(1);
        let birth = |dots| {
            CobGenerator::new(e.clone(), circ.clone(), vec![CobComponent::new([], [0], 0, dots)])
                .unwrap()
        };
        let death = |dots| {
            CobGenerator::new(circ.clone(), e.clone(), vec![CobComponent::new([0], [], 0, dots)])
                .unwrap()
        };
        let b0 = DottedMorphism::from_generator(birth(0), 1).unwrap();
        let b1 = DottedMorphism::from_generator(birth(1), 1).unwrap();
        let d0 = DottedMorphism::from_generator(death(0), 1).unwrap();
        let d1 = DottedMorphism::from_generator(death(1), 1).unwrap();

        let sphere = d0.compose(&b0).unwrap();
        assert!(sphere.is_zero());
        let dotted_sphere = d1.compose(&b0).unwrap();
        assert_eq!(dotted_sphere, DottedMorphism::identity(&e));
        let two_dots = d1.compose(&b1).unwrap();
        assert!(two_dots.is_zero());

        // Tube (identity on the circle) composed around: genus bookkeeping.
        let tube = DottedMorphism::identity(&circ);
        let again = d1.compose(&tube).unwrap().compose(&b0).unwrap();
        assert_eq!(again, DottedMorphism::identity(&e));
    }

    #[test]
    fn saddle_composition_cuts_the_tube() {
        // Saddle then reversed saddle: a tube connecting two sheets.
        // Neck-cutting rewrites it as the sum of the two dotted-disc
        // splittings, each of degree -2.
        let s = DottedMorphism::from_generator(saddle(), 1).unwrap();
        let r = s.reflect();
        let back = r.compose(&s).unwrap();
        assert_eq!(back.terms().count(), 2);
        for (g, c) in back.terms() {
            assert_eq!(c, 1);
            assert_eq!(g.components().len(), 2);
            assert_eq!(g.dots(), 1);
            assert!(g.components().iter().all(|comp| comp.genus == 0));
            assert_eq!(g.degree(), -2);
        }
    }

    #[test]
    fn identity_is_neutral() {
        let s = DottedMorphism::from_generator(saddle(), 3).unwrap();
        let idl = DottedMorphism::identity(s.cod());
        let idr = DottedMorphism::identity(s.dom());
        assert_eq!(idl.compose(&s).unwrap(), s);
        assert_eq!(s.compose(&idr).unwrap(), s);
    }

    #[test]
    fn invertible_detection() {
        let id2 = CrosslessTangle::identity(2);
        let id = DottedMorphism::identity(&id2);
        assert_eq!(id.invertible_sign(), Some(1));
        assert_eq!(id.scale(-1).unwrap().invertible_sign(), Some(-1));
        assert_eq!(id.scale(2).unwrap().invertible_sign(), None);
        let s = DottedMorphism::from_generator(saddle(), 1).unwrap();
        assert_eq!(s.invertible_sign(), None);
    }

    #[test]
    fn boundary_compatibility_enforced() {
        // Two separate sheets that mismatch walls at the boundary.
        let cupcap = CrosslessTangle::new(vec![1, 0, 3, 2], 0).unwrap();
        let id2 = CrosslessTangle::identity(2);
        let bad = CobGenerator::new(
            cupcap,
            id2,
            vec![CobComponent::new([0], [0], 0, 0), CobComponent::new([1], [1], 0, 0)],
        );
        assert!(bad.is_err());
    }
}
