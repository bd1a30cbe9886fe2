//! Planar arc diagrams and horizontal composition of based complexes.
//!
//! A diagram is an outer disc with input holes; disjoint arcs pair up all
//! boundary points. Filling the holes with crossingless tangles yields a
//! tangle on the outer boundary, and filling them with based complexes
//! yields the product complex with Koszul signs. The incremental pipeline
//! (compose one piece, deloop, eliminate) keeps complexes near minimal size.

use crate::cob::{
    boundary_circles_between, evaluate_closed, flip_point, CobComponent, CobGenerator,
    CrosslessTangle, DottedMorphism, UnionFind,
};
use crate::cube::{deloop, khovanov_complex, BasedComplex, BraidWord, CellLabel, CellRef};
use crate::morse::gaussian_eliminate;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One endpoint of a diagram arc: a point on the outer boundary or on an
/// input hole.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub enum End {
    Outer(usize),
    Input(usize, usize),
}

/// A planar arc diagram: point counts for the outer disc and the input
/// holes, arcs pairing every boundary point, and free loops.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(try_from = "RawDiagram", into = "RawDiagram")]
pub struct PlanarArcDiagram {
    outer: usize,
    inputs: Vec<usize>,
    arcs: Vec<(End, End)>,
    loops: usize,
}

#[derive(Serialize, Deserialize)]
struct RawDiagram {
    outer: usize,
    inputs: Vec<usize>,
    arcs: Vec<(End, End)>,
    #[serde(default)]
    loops: usize,
}

impl TryFrom<RawDiagram> for PlanarArcDiagram {
    type Error = String;

    fn try_from(raw: RawDiagram) -> std::result::Result<Self, String> {
        PlanarArcDiagram::new(raw.outer, raw.inputs, raw.arcs, raw.loops)
            .map_err(|e| e.to_string())
    }
}

impl From<PlanarArcDiagram> for RawDiagram {
    fn from(d: PlanarArcDiagram) -> RawDiagram {
        RawDiagram { outer: d.outer, inputs: d.inputs, arcs: d.arcs, loops: d.loops }
    }
}

impl PlanarArcDiagram {
    pub fn new(
        outer: usize,
        inputs: Vec<usize>,
        arcs: Vec<(End, End)>,
        loops: usize,
    ) -> Result<Self> {
        let d = PlanarArcDiagram { outer, inputs, arcs, loops };
        d.check()?;
        Ok(d)
    }

    pub fn outer_points(&self) -> usize {
        self.outer
    }

    pub fn input_points(&self) -> &[usize] {
        &self.inputs
    }

    pub fn arcs(&self) -> &[(End, End)] {
        &self.arcs
    }

    pub fn loops(&self) -> usize {
        self.loops
    }

    fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Invariant(msg));
        if self.outer % 2 != 0 {
            return bad(format!("odd outer point count {}", self.outer));
        }
        if let Some(n) = self.inputs.iter().find(|n| *n % 2 != 0) {
            return bad(format!("odd input point count {n}"));
        }
        let total = self.outer + self.inputs.iter().sum::<usize>();
        if 2 * self.arcs.len() != total {
            return bad(format!("{} arcs cannot cover {total} points", self.arcs.len()));
        }
        let mut seen: BTreeMap<End, ()> = BTreeMap::new();
        for &(e0, e1) in &self.arcs {
            for e in [e0, e1] {
                let ok = match e {
                    End::Outer(p) => p < self.outer,
                    End::Input(i, p) => i < self.inputs.len() && p < self.inputs[i],
                };
                if !ok {
                    return bad(format!("arc endpoint {e:?} out of range"));
                }
                if seen.insert(e, ()).is_some() {
                    return bad(format!("boundary point {e:?} used twice"));
                }
            }
        }
        self.euler_check()
    }

    /// Planarity via the rotation system: points of each input hole in
    /// increasing cyclic order, outer points reversed (the region sees the
    /// outer boundary with opposite orientation). Every connected component
    /// of the arc graph must have Euler characteristic 2.
    fn euler_check(&self) -> Result<()> {
        // Dart 2a sits at the first end of arc a, dart 2a+1 at the second.
        let mut dart_at: BTreeMap<End, usize> = BTreeMap::new();
        for (a, &(e0, e1)) in self.arcs.iter().enumerate() {
            dart_at.insert(e0, 2 * a);
            dart_at.insert(e1, 2 * a + 1);
        }
        let vertices = 1 + self.inputs.len();
        let vertex_of_end = |e: End| match e {
            End::Outer(_) => 0,
            End::Input(i, _) => 1 + i,
        };
        let mut succ = vec![usize::MAX; 2 * self.arcs.len()];
        let mut rings: Vec<Vec<usize>> = vec![Vec::new(); vertices];
        for p in (0..self.outer).rev() {
            rings[0].push(dart_at[&End::Outer(p)]);
        }
        for (i, &n) in self.inputs.iter().enumerate() {
            for p in 0..n {
                rings[1 + i].push(dart_at[&End::Input(i, p)]);
            }
        }
        for ring in &rings {
            for (j, &d) in ring.iter().enumerate() {
                succ[d] = ring[(j + 1) % ring.len()];
            }
        }
        // Faces: follow the successor of the twin dart.
        let mut face_of = vec![usize::MAX; succ.len()];
        let mut faces = 0usize;
        for d0 in 0..succ.len() {
            if face_of[d0] != usize::MAX {
                continue;
            }
            let mut d = d0;
            loop {
                face_of[d] = faces;
                d = succ[d ^ 1];
                if d == d0 {
                    break;
                }
            }
            faces += 1;
        }
        // Components over vertices; isolated holes are trivially planar.
        let mut uf = UnionFind::new(vertices);
        for &(e0, e1) in &self.arcs {
            uf.union(vertex_of_end(e0), vertex_of_end(e1));
        }
        let mut per_comp: BTreeMap<usize, (i64, i64, BTreeMap<usize, ()>)> = BTreeMap::new();
        for v in 0..vertices {
            if !rings[v].is_empty() {
                per_comp.entry(uf.find(v)).or_default().0 += 1;
            }
        }
        for (a, &(e0, _)) in self.arcs.iter().enumerate() {
            let entry = per_comp.entry(uf.find(vertex_of_end(e0))).or_default();
            entry.1 += 1;
            entry.2.insert(face_of[2 * a], ());
            entry.2.insert(face_of[2 * a + 1], ());
        }
        for (v, e, f) in per_comp.values().map(|(v, e, f)| (v, e, f.len() as i64)) {
            if v - e + f != 2 {
                return Err(Error::Invariant(format!(
                    "diagram is not planar: component with V={v} E={e} F={f}"
                )));
            }
        }
        Ok(())
    }

    /// The count `s(D)`: arcs joining an input hole to itself, plus half the
    /// arcs joining distinct input holes, plus free loops.
    pub fn s(&self) -> i64 {
        let mut same = 0i64;
        let mut cross = 0i64;
        for &(e0, e1) in &self.arcs {
            if let (End::Input(i, _), End::Input(j, _)) = (e0, e1) {
                if i == j {
                    same += 1;
                } else {
                    cross += 1;
                }
            }
        }
        same + cross / 2 + self.loops as i64
    }

    /// Left-right mirror of the diagram.
    pub fn flip(&self) -> PlanarArcDiagram {
        let f = |e: End| match e {
            End::Outer(p) => End::Outer(flip_point(self.outer, p)),
            End::Input(i, p) => End::Input(i, flip_point(self.inputs[i], p)),
        };
        PlanarArcDiagram {
            outer: self.outer,
            inputs: self.inputs.clone(),
            arcs: self.arcs.iter().map(|&(e0, e1)| (f(e0), f(e1))).collect(),
            loops: self.loops,
        }
    }
}

/// Closure of a `2n`-point hole: no outer boundary, each bottom point joined
/// to the top point of the same strand.
pub fn closure(n: usize) -> PlanarArcDiagram {
    let arcs = (0..n).map(|s| (End::Input(0, s), End::Input(0, 2 * n - 1 - s))).collect();
    PlanarArcDiagram::new(0, vec![2 * n], arcs, 0).expect("closure diagram")
}

/// Vertical stacking of two `n`-strand holes: input 0 at the bottom, input 1
/// on top.
pub fn stack(n: usize) -> PlanarArcDiagram {
    let mut arcs = Vec::new();
    for s in 0..n {
        arcs.push((End::Outer(s), End::Input(0, s)));
        arcs.push((End::Input(0, 2 * n - 1 - s), End::Input(1, s)));
        arcs.push((End::Input(1, 2 * n - 1 - s), End::Outer(2 * n - 1 - s)));
    }
    PlanarArcDiagram::new(2 * n, vec![2 * n, 2 * n], arcs, 0).expect("stack diagram")
}

/// The closed two-parameter family diagram: hole 0 takes a 3-strand braid,
/// hole 1 a 2-strand braid, hole 2 a spare tangle. Strands 1 and 2 of the
/// first hole close through the second hole; its third strand closes
/// directly.
pub fn omega4_diagram() -> PlanarArcDiagram {
    let arcs = vec![
        (End::Input(0, 5), End::Input(1, 0)),
        (End::Input(0, 4), End::Input(1, 1)),
        (End::Input(1, 3), End::Input(0, 0)),
        (End::Input(1, 2), End::Input(0, 1)),
        (End::Input(0, 3), End::Input(0, 2)),
    ];
    PlanarArcDiagram::new(0, vec![6, 4, 0], arcs, 0).expect("omega4 diagram")
}

/// Mirror image of [`omega4_diagram`].
pub fn omega5_diagram() -> PlanarArcDiagram {
    omega4_diagram().flip()
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum TraceElem {
    Arc(usize),
    InputPiece(usize, usize),
    Loop(usize),
}

/// For each piece of a composed tangle, the diagram arcs and input pieces it
/// runs through.
pub(crate) struct Trace {
    pub(crate) per_piece: Vec<Vec<TraceElem>>,
}

/// Fill each hole with a crossingless tangle and read off the composed
/// tangle on the outer boundary.
pub fn compose_tangles(
    d: &PlanarArcDiagram,
    inputs: &[&CrosslessTangle],
) -> Result<CrosslessTangle> {
    compose_traced(d, inputs).map(|(t, _)| t)
}

pub(crate) fn compose_traced(
    d: &PlanarArcDiagram,
    inputs: &[&CrosslessTangle],
) -> Result<(CrosslessTangle, Trace)> {
    if inputs.len() != d.inputs.len() {
        return Err(Error::Invariant(format!(
            "diagram expects {} inputs, got {}",
            d.inputs.len(),
            inputs.len()
        )));
    }
    for (i, t) in inputs.iter().enumerate() {
        if t.boundary_points() != d.inputs[i] {
            return Err(Error::Invariant(format!(
                "input {i} has {} boundary points, hole has {}",
                t.boundary_points(),
                d.inputs[i]
            )));
        }
    }
    let mut arc_at_end: BTreeMap<End, usize> = BTreeMap::new();
    for (a, &(e0, e1)) in d.arcs.iter().enumerate() {
        arc_at_end.insert(e0, a);
        arc_at_end.insert(e1, a);
    }
    let other_end = |a: usize, e: End| {
        let (e0, e1) = d.arcs[a];
        if e0 == e {
            e1
        } else {
            e0
        }
    };

    // Chains from outer points become the composed arcs; each is traced once
    // from its smaller endpoint, so chain order matches arc-piece order.
    let mut pairing = vec![usize::MAX; d.outer];
    let mut arc_visited = vec![false; d.arcs.len()];
    let mut chains: Vec<(usize, Vec<TraceElem>)> = Vec::new();
    for p0 in 0..d.outer {
        if pairing[p0] != usize::MAX {
            continue;
        }
        let mut elems = Vec::new();
        let mut cur = End::Outer(p0);
        loop {
            let a = arc_at_end[&cur];
            arc_visited[a] = true;
            elems.push(TraceElem::Arc(a));
            match other_end(a, cur) {
                End::Outer(q) => {
                    pairing[p0] = q;
                    pairing[q] = p0;
                    break;
                }
                End::Input(i, q) => {
                    elems.push(TraceElem::InputPiece(i, inputs[i].arc_at(q)));
                    cur = End::Input(i, inputs[i].partner(q));
                }
            }
        }
        chains.push((p0, elems));
    }

    // Leftover arcs close up into circles, ordered by the least hole point
    // they visit.
    let mut cycles: Vec<((usize, usize), Vec<TraceElem>)> = Vec::new();
    for a0 in 0..d.arcs.len() {
        if arc_visited[a0] {
            continue;
        }
        let start = d.arcs[a0].0;
        let End::Input(si, sq) = start else {
            return Err(Error::Invariant("unreached outer point".into()));
        };
        let mut key = (si, sq);
        let mut elems = Vec::new();
        let mut cur = start;
        loop {
            let a = arc_at_end[&cur];
            arc_visited[a] = true;
            elems.push(TraceElem::Arc(a));
            let End::Input(i, q) = other_end(a, cur) else {
                return Err(Error::Invariant("circle through outer boundary".into()));
            };
            key = key.min((i, q));
            elems.push(TraceElem::InputPiece(i, inputs[i].arc_at(q)));
            cur = End::Input(i, inputs[i].partner(q));
            if cur == start {
                break;
            }
            let End::Input(i2, q2) = cur else { unreachable!() };
            key = key.min((i2, q2));
        }
        cycles.push((key, elems));
    }
    cycles.sort_by_key(|(k, _)| *k);

    // Composed circles: traced cycles, then surviving input circles, then
    // free loops of the diagram.
    let input_circles: Vec<(usize, usize)> = inputs
        .iter()
        .enumerate()
        .flat_map(|(i, t)| (0..t.circles()).map(move |c| (i, c)))
        .collect();
    let total_circles = cycles.len() + input_circles.len() + d.loops;
    let tangle = CrosslessTangle::new(pairing, total_circles)?;
    let b = tangle.b();
    let mut per_piece = vec![Vec::new(); tangle.pieces()];
    for (p0, elems) in chains {
        per_piece[tangle.arc_at(p0)] = elems;
    }
    let mut next = b;
    for (_, elems) in cycles {
        per_piece[next] = elems;
        next += 1;
    }
    for (i, c) in input_circles {
        per_piece[next] = vec![TraceElem::InputPiece(i, inputs[i].b() + c)];
        next += 1;
    }
    for l in 0..d.loops {
        per_piece[next] = vec![TraceElem::Loop(l)];
        next += 1;
    }
    Ok((tangle, Trace { per_piece }))
}

/// Glue one generator per hole through the diagram. Returns the composed
/// generator and the scalar from closed components, or `None` when a closed
/// component evaluates to zero.
pub(crate) fn glue_generator(
    d: &PlanarArcDiagram,
    gens: &[&CobGenerator],
) -> Result<Option<(CobGenerator, i64)>> {
    let doms: Vec<&CrosslessTangle> = gens.iter().map(|g| g.dom()).collect();
    let cods: Vec<&CrosslessTangle> = gens.iter().map(|g| g.cod()).collect();
    let (dom_t, dom_tr) = compose_traced(d, &doms)?;
    let (cod_t, cod_tr) = compose_traced(d, &cods)?;

    // Union-find over: per-input components, diagram arcs, loops, composed
    // domain pieces, composed codomain pieces.
    let mut comp_base = vec![0usize; gens.len() + 1];
    for (i, g) in gens.iter().enumerate() {
        comp_base[i + 1] = comp_base[i] + g.components().len();
    }
    let arc_base = comp_base[gens.len()];
    let loop_base = arc_base + d.arcs.len();
    let dom_base = loop_base + d.loops;
    let cod_base = dom_base + dom_t.pieces();
    let mut uf = UnionFind::new(cod_base + cod_t.pieces());

    let mut dom_owner: Vec<Vec<usize>> = Vec::with_capacity(gens.len());
    let mut cod_owner: Vec<Vec<usize>> = Vec::with_capacity(gens.len());
    for (i, g) in gens.iter().enumerate() {
        let mut dos = vec![usize::MAX; doms[i].pieces()];
        let mut cos = vec![usize::MAX; cods[i].pieces()];
        for (ci, c) in g.components().iter().enumerate() {
            for &p in &c.dom {
                dos[p] = comp_base[i] + ci;
            }
            for &p in &c.cod {
                cos[p] = comp_base[i] + ci;
            }
        }
        dom_owner.push(dos);
        cod_owner.push(cos);
    }

    // A diagram arc is a vertical band joining the input components at its
    // ends (the same component carries the domain and codomain arc there).
    for (a, &(e0, e1)) in d.arcs.iter().enumerate() {
        for e in [e0, e1] {
            if let End::Input(i, q) = e {
                uf.union(arc_base + a, dom_owner[i][doms[i].arc_at(q)]);
                uf.union(arc_base + a, cod_owner[i][cods[i].arc_at(q)]);
            }
        }
    }
    for (pid, elems) in dom_tr.per_piece.iter().enumerate() {
        for el in elems {
            let other = match *el {
                TraceElem::Arc(a) => arc_base + a,
                TraceElem::InputPiece(i, p) => dom_owner[i][p],
                TraceElem::Loop(l) => loop_base + l,
            };
            uf.union(dom_base + pid, other);
        }
    }
    for (pid, elems) in cod_tr.per_piece.iter().enumerate() {
        for el in elems {
            let other = match *el {
                TraceElem::Arc(a) => arc_base + a,
                TraceElem::InputPiece(i, p) => cod_owner[i][p],
                TraceElem::Loop(l) => loop_base + l,
            };
            uf.union(cod_base + pid, other);
        }
    }

    #[derive(Default)]
    struct Cluster {
        dom: Vec<usize>,
        cod: Vec<usize>,
        chi: i64,
        dots: u32,
    }
    let mut clusters: BTreeMap<usize, Cluster> = BTreeMap::new();
    for (i, g) in gens.iter().enumerate() {
        for (ci, c) in g.components().iter().enumerate() {
            let cl = clusters.entry(uf.find(comp_base[i] + ci)).or_default();
            cl.chi += g.component_euler(c);
            cl.dots += c.dots;
        }
    }
    // Each arc band contributes chi 1 minus one for every end glued to an
    // input (outer ends stay free boundary).
    for (a, &(e0, e1)) in d.arcs.iter().enumerate() {
        let glued =
            [e0, e1].iter().filter(|e| matches!(e, End::Input(_, _))).count() as i64;
        clusters.entry(uf.find(arc_base + a)).or_default().chi += 1 - glued;
    }
    for pid in 0..dom_t.pieces() {
        clusters.entry(uf.find(dom_base + pid)).or_default().dom.push(pid);
    }
    for pid in 0..cod_t.pieces() {
        clusters.entry(uf.find(cod_base + pid)).or_default().cod.push(pid);
    }

    let mut factor = 1i64;
    let mut comps = Vec::new();
    for cl in clusters.values() {
        if cl.dom.is_empty() && cl.cod.is_empty() {
            let twice_genus = 2 - cl.chi;
            if twice_genus < 0 || twice_genus % 2 != 0 {
                return Err(Error::Invariant(format!(
                    "closed glued component with chi {}",
                    cl.chi
                )));
            }
            let value = evaluate_closed(twice_genus as u32 / 2, cl.dots);
            factor = factor
                .checked_mul(value)
                .ok_or_else(|| Error::Invariant("coefficient overflow".into()))?;
            if factor == 0 {
                return Ok(None);
            }
            continue;
        }
        let probe = CobComponent::new(cl.dom.iter().copied(), cl.cod.iter().copied(), 0, 0);
        let nbdr = boundary_circles_between(&dom_t, &cod_t, &probe) as i64;
        let twice_genus = 2 - nbdr - cl.chi;
        if twice_genus < 0 || twice_genus % 2 != 0 {
            return Err(Error::Invariant(format!(
                "glued component with chi {} and {} boundary circles",
                cl.chi, nbdr
            )));
        }
        comps.push(CobComponent::new(
            cl.dom.iter().copied(),
            cl.cod.iter().copied(),
            twice_genus as u32 / 2,
            cl.dots,
        ));
    }
    Ok(Some((CobGenerator::new(dom_t, cod_t, comps)?, factor)))
}

/// Horizontal composition of based complexes: the product cell complex with
/// entries glued through the diagram and Koszul sign `(-1)^{sum of earlier
/// degrees}`.
pub fn compose_complexes(
    d: &PlanarArcDiagram,
    inputs: &[&BasedComplex],
) -> Result<BasedComplex> {
    if inputs.len() != d.inputs.len() {
        return Err(Error::Invariant(format!(
            "diagram expects {} inputs, got {}",
            d.inputs.len(),
            inputs.len()
        )));
    }
    let lists: Vec<Vec<CellRef>> = inputs
        .iter()
        .map(|c| c.cells().map(|(r, _)| r.clone()).collect())
        .collect();
    let mut out = BasedComplex::new();
    if lists.iter().any(|l| l.is_empty()) {
        return Ok(out);
    }
    let product: u128 = lists.iter().map(|l| l.len() as u128).product();
    if product > 2_000_000 {
        return Err(Error::Budget(format!("product complex would have {product} cells")));
    }

    let joint_id = |idx: &[usize]| -> String {
        idx.iter()
            .enumerate()
            .map(|(i, &k)| lists[i][k].1.clone())
            .collect::<Vec<_>>()
            .join("|")
    };

    let mut idx = vec![0usize; inputs.len()];
    loop {
        let mut hdeg = 0i32;
        let mut q = 0i64;
        let mut objects = Vec::with_capacity(inputs.len());
        for (i, &k) in idx.iter().enumerate() {
            let data = inputs[i].cell(&lists[i][k]).unwrap();
            hdeg += lists[i][k].0;
            q += data.qshift;
            objects.push(&data.object);
        }
        let obj = compose_tangles(d, &objects)?;
        out.add_cell(hdeg, joint_id(&idx), obj, q, CellLabel::Anonymous, Vec::new())?;
        if !advance(&mut idx, &lists) {
            break;
        }
    }

    let mut idx = vec![0usize; inputs.len()];
    loop {
        let degs: Vec<i32> = idx.iter().enumerate().map(|(i, &k)| lists[i][k].0).collect();
        let src = (degs.iter().sum::<i32>(), joint_id(&idx));
        let idgens: Vec<CobGenerator> = idx
            .iter()
            .enumerate()
            .map(|(j, &kj)| CobGenerator::identity(&inputs[j].cell(&lists[j][kj]).unwrap().object))
            .collect();
        for (i, &k) in idx.iter().enumerate() {
            let sign = if degs[..i].iter().sum::<i32>().rem_euclid(2) == 0 { 1 } else { -1 };
            for (tgt_i, e) in inputs[i].outgoing(&lists[i][k]) {
                let mut tidx = idx.clone();
                tidx[i] = lists[i].iter().position(|r| *r == tgt_i).unwrap();
                let tgt = (src.0 + 1, joint_id(&tidx));
                let src_obj = out.cell(&src).unwrap().object.clone();
                let tgt_obj = out.cell(&tgt).unwrap().object.clone();
                let mut m = DottedMorphism::zero(src_obj, tgt_obj);
                for (gen_i, coeff) in e.terms() {
                    let gens: Vec<&CobGenerator> = (0..inputs.len())
                        .map(|j| if j == i { gen_i } else { &idgens[j] })
                        .collect();
                    if let Some((g, f)) = glue_generator(d, &gens)? {
                        let c = coeff
                            .checked_mul(f)
                            .and_then(|c| c.checked_mul(sign))
                            .ok_or_else(|| Error::Invariant("coefficient overflow".into()))?;
                        m.add_generator(g, c)?;
                    }
                }
                if !m.is_zero() {
                    out.add_entry(src.clone(), tgt, &m)?;
                }
            }
        }
        if !advance(&mut idx, &lists) {
            break;
        }
    }
    Ok(out)
}

fn advance(idx: &mut [usize], lists: &[Vec<CellRef>]) -> bool {
    for i in (0..idx.len()).rev() {
        idx[i] += 1;
        if idx[i] < lists[i].len() {
            return true;
        }
        idx[i] = 0;
    }
    false
}

/// Close an `n`-strand braid complex into a complex of circle objects.
pub fn close_complex(c: &BasedComplex, strands: usize) -> Result<BasedComplex> {
    compose_complexes(&closure(strands), &[c])
}

/// A tangle expression: empty, a braid, or a planar composite.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum TangleExpr {
    Empty,
    Braid(BraidWord),
    Composite { diagram: PlanarArcDiagram, inputs: Vec<TangleExpr> },
}

impl TangleExpr {
    pub fn boundary_points(&self) -> usize {
        match self {
            TangleExpr::Empty => 0,
            TangleExpr::Braid(w) => 2 * w.strands(),
            TangleExpr::Composite { diagram, .. } => diagram.outer_points(),
        }
    }

    /// Total `(n_plus, n_minus)` over all braids in the expression.
    pub fn crossing_counts(&self) -> (usize, usize) {
        match self {
            TangleExpr::Empty => (0, 0),
            TangleExpr::Braid(w) => (w.n_plus(), w.n_minus()),
            TangleExpr::Composite { inputs, .. } => inputs.iter().fold((0, 0), |(p, m), t| {
                let (tp, tm) = t.crossing_counts();
                (p + tp, m + tm)
            }),
        }
    }

    /// Left-right mirror.
    pub fn flip(&self) -> TangleExpr {
        match self {
            TangleExpr::Empty => TangleExpr::Empty,
            TangleExpr::Braid(w) => TangleExpr::Braid(w.flip()),
            TangleExpr::Composite { diagram, inputs } => TangleExpr::Composite {
                diagram: diagram.flip(),
                inputs: inputs.iter().map(|t| t.flip()).collect(),
            },
        }
    }

    /// Mirror image: every crossing inverted.
    pub fn mirror(&self) -> TangleExpr {
        match self {
            TangleExpr::Empty => TangleExpr::Empty,
            TangleExpr::Braid(w) => TangleExpr::Braid(w.mirror()),
            TangleExpr::Composite { diagram, inputs } => TangleExpr::Composite {
                diagram: diagram.clone(),
                inputs: inputs.iter().map(|t| t.mirror()).collect(),
            },
        }
    }
}

/// Default ceiling on intermediate complex size during incremental
/// reduction.
pub const DEFAULT_CELL_BUDGET: usize = 500_000;

/// Delooped, fully eliminated complex of a tangle expression. Braids are
/// built one crossing at a time (stack, deloop, eliminate), composites one
/// hole at a time, so intermediate complexes stay close to minimal.
pub fn reduced_complex(t: &TangleExpr) -> Result<BasedComplex> {
    reduced_complex_with_budget(t, DEFAULT_CELL_BUDGET)
}

pub fn reduced_complex_with_budget(t: &TangleExpr, budget: usize) -> Result<BasedComplex> {
    match t {
        TangleExpr::Empty => Ok(BasedComplex::single(CrosslessTangle::empty(), 0)),
        TangleExpr::Braid(w) => reduced_braid_complex(w, budget),
        TangleExpr::Composite { diagram, inputs } => {
            let parts: Vec<BasedComplex> = inputs
                .iter()
                .map(|t| reduced_complex_with_budget(t, budget))
                .collect::<Result<_>>()?;
            let refs: Vec<&BasedComplex> = parts.iter().collect();
            reduce_steps(compose_complexes(diagram, &refs)?, budget)
        }
    }
}

fn reduce_steps(c: BasedComplex, budget: usize) -> Result<BasedComplex> {
    if c.len() > budget {
        return Err(Error::Budget(format!("complex of {} cells exceeds budget {budget}", c.len())));
    }
    let c = deloop(&c)?;
    if c.len() > budget {
        return Err(Error::Budget(format!("complex of {} cells exceeds budget {budget}", c.len())));
    }
    Ok(gaussian_eliminate(&c)?.rename_compact())
}

fn reduced_braid_complex(w: &BraidWord, budget: usize) -> Result<BasedComplex> {
    let n = w.strands();
    let mut c = BasedComplex::single(CrosslessTangle::identity(n), 0);
    let d = stack(n);
    for &letter in w.letters() {
        let lc = khovanov_complex(&BraidWord::new(n, vec![letter])?)?;
        c = reduce_steps(compose_complexes(&d, &[&c, &lc])?, budget)?;
    }
    Ok(c)
}

/// Merge a braid hole and an adjacent empty tangle hole of `d` into one
/// hole. Returns the merged diagram and the expression filling the new hole.
/// A non-empty tangle hole would need a corridor construction and is not
/// supported.
pub fn merge(
    d: &PlanarArcDiagram,
    braid_hole: usize,
    braid: &BraidWord,
    tangle_hole: usize,
    tangle: &TangleExpr,
) -> Result<(PlanarArcDiagram, TangleExpr)> {
    if braid_hole == tangle_hole
        || braid_hole >= d.inputs.len()
        || tangle_hole >= d.inputs.len()
    {
        return Err(Error::Invariant("merge: bad hole indices".into()));
    }
    if d.inputs[tangle_hole] != 0 || tangle.boundary_points() != 0 {
        return Err(Error::Invariant("merge: only an empty tangle hole is supported".into()));
    }
    let pts = d.inputs[braid_hole];
    if pts != 2 * braid.strands() {
        return Err(Error::Invariant(format!(
            "merge: braid with {} strands cannot fill a {pts}-point hole",
            braid.strands()
        )));
    }
    let inputs: Vec<usize> = d
        .inputs
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != tangle_hole)
        .map(|(_, &n)| n)
        .collect();
    let remap = |e: End| match e {
        End::Input(i, p) if i > tangle_hole => End::Input(i - 1, p),
        other => other,
    };
    let arcs = d.arcs.iter().map(|&(e0, e1)| (remap(e0), remap(e1))).collect();
    let merged = PlanarArcDiagram::new(d.outer, inputs, arcs, d.loops)?;

    let embed_arcs = (0..pts).map(|p| (End::Outer(p), End::Input(0, p))).collect();
    let embed = PlanarArcDiagram::new(pts, vec![pts, 0], embed_arcs, 0)?;
    let filler = TangleExpr::Composite {
        diagram: embed,
        inputs: vec![TangleExpr::Braid(braid.clone()), tangle.clone()],
    };
    Ok((merged, filler))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube::BraidLetter;

    fn word(strands: usize, letters: &[(usize, bool)]) -> BraidWord {
        BraidWord::new(
            strands,
            letters.iter().map(|&(index, inverse)| BraidLetter { index, inverse }).collect(),
        )
        .unwrap()
    }

    #[test]
    fn builders_are_planar() {
        closure(1);
        closure(3);
        stack(1);
        stack(3);
        omega4_diagram();
        omega5_diagram();
    }

    #[test]
    fn crossing_arcs_rejected() {
        let arcs = vec![(End::Input(0, 0), End::Input(0, 2)), (End::Input(0, 1), End::Input(0, 3))];
        assert!(PlanarArcDiagram::new(0, vec![4], arcs, 0).is_err());
    }

    #[test]
    fn double_used_point_rejected() {
        let arcs = vec![(End::Input(0, 0), End::Input(0, 1)), (End::Input(0, 1), End::Input(0, 0))];
        assert!(PlanarArcDiagram::new(0, vec![4], arcs, 0).is_err());
    }

    #[test]
    fn s_counts() {
        assert_eq!(closure(2).s(), 2);
        // The two middle strings join distinct inputs and can close into one
        // circle, so they contribute floor(2/2) = 1.
        assert_eq!(stack(2).s(), 1);
        assert_eq!(omega4_diagram().s(), 3);
        assert_eq!(omega5_diagram().s(), 3);
    }

    #[test]
    fn omega5_arcs() {
        let d = omega5_diagram();
        let expected = vec![
            (End::Input(0, 3), End::Input(1, 1)),
            (End::Input(0, 4), End::Input(1, 0)),
            (End::Input(1, 2), End::Input(0, 2)),
            (End::Input(1, 3), End::Input(0, 1)),
            (End::Input(0, 5), End::Input(0, 0)),
        ];
        assert_eq!(d.arcs(), &expected[..]);
    }

    #[test]
    fn closure_of_identity_is_circles() {
        let id2 = CrosslessTangle::identity(2);
        let t = compose_tangles(&closure(2), &[&id2]).unwrap();
        assert_eq!(t.boundary_points(), 0);
        assert_eq!(t.circles(), 2);
    }

    #[test]
    fn closure_of_cupcap_is_one_circle() {
        let cupcap = CrosslessTangle::new(vec![1, 0, 3, 2], 0).unwrap();
        let t = compose_tangles(&closure(2), &[&cupcap]).unwrap();
        assert_eq!(t.circles(), 1);
    }

    #[test]
    fn stack_of_identities_is_identity() {
        let id2 = CrosslessTangle::identity(2);
        let t = compose_tangles(&stack(2), &[&id2, &id2]).unwrap();
        assert_eq!(t, CrosslessTangle::identity(2));
    }

    #[test]
    fn composed_complex_squares_to_zero() {
        let c1 = khovanov_complex(&word(3, &[(1, false)])).unwrap();
        let c2 = khovanov_complex(&word(3, &[(2, true)])).unwrap();
        let c = compose_complexes(&stack(3), &[&c1, &c2]).unwrap();
        c.validate().unwrap();
        let direct = khovanov_complex(&word(3, &[(1, false), (2, true)])).unwrap();
        assert_eq!(c.census(), direct.census());
    }

    #[test]
    fn closed_complex_of_one_crossing() {
        let c = khovanov_complex(&word(2, &[(1, false)])).unwrap();
        let closed = close_complex(&c, 2).unwrap();
        closed.validate().unwrap();
        // Cup-cap resolution closes to one circle, identity to two.
        assert_eq!(closed.cell(&(-1, "0-".into())).unwrap().object.circles(), 1);
        assert_eq!(closed.cell(&(0, "1-".into())).unwrap().object.circles(), 2);
    }

    #[test]
    fn unknot_reduces_to_two_cells() {
        let c = khovanov_complex(&word(2, &[(1, false)])).unwrap();
        let closed = close_complex(&c, 2).unwrap();
        let delooped = deloop(&closed).unwrap();
        let reduced = gaussian_eliminate(&delooped).unwrap();
        let census = reduced.census();
        assert_eq!(census, vec![(0, -1, 1), (0, 1, 1)]);
        assert_eq!(reduced.entry_count(), 0);
    }

    #[test]
    fn reduced_braid_complex_matches_morse_sizes() {
        // sigma_1^3 reduces to the four-cell minimal complex.
        let w = word(2, &[(1, false), (1, false), (1, false)]);
        let c = reduced_complex(&TangleExpr::Braid(w)).unwrap();
        c.validate().unwrap();
        assert_eq!(c.census(), vec![(-3, -8, 1), (-2, -6, 1), (-1, -4, 1), (0, -3, 1)]);
    }

    #[test]
    fn reduced_complex_of_empty() {
        let c = reduced_complex(&TangleExpr::Empty).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.census(), vec![(0, 0, 1)]);
    }

    #[test]
    fn omega_composite_builds() {
        // (sigma1 sigma2)^1 in the torus hole, sigma1 in the two-strand hole.
        let t = TangleExpr::Composite {
            diagram: omega4_diagram(),
            inputs: vec![
                TangleExpr::Braid(word(3, &[(1, false), (2, false)])),
                TangleExpr::Braid(word(2, &[(1, false)])),
                TangleExpr::Empty,
            ],
        };
        assert_eq!(t.boundary_points(), 0);
        assert_eq!(t.crossing_counts(), (0, 3));
        let c = reduced_complex(&t).unwrap();
        c.validate().unwrap();
        for (_, data) in c.cells() {
            assert_eq!(data.object.boundary_points(), 0);
            assert_eq!(data.object.circles(), 0);
        }
    }

    #[test]
    fn merge_absorbs_empty_hole() {
        let d = omega4_diagram();
        let b = word(2, &[(1, false), (1, false)]);
        let (merged, filler) = merge(&d, 1, &b, 2, &TangleExpr::Empty).unwrap();
        assert_eq!(merged.input_points(), &[6, 4]);
        assert_eq!(filler.boundary_points(), 4);
        assert_eq!(filler.crossing_counts(), (0, 2));
    }

    #[test]
    fn diagram_json_round_trip() {
        let d = omega4_diagram();
        let json = serde_json::to_string(&d).unwrap();
        let back: PlanarArcDiagram = serde_json::from_str(&json).unwrap();
        assert_eq!(d, back);
        // A non-planar diagram must not deserialize.
        let bad = r#"{"outer":0,"inputs":[4],"arcs":[[{"Input":[0,0]},{"Input":[0,2]}],[{"Input":[0,1]},{"Input":[0,3]}]],"loops":0}"#;
        assert!(serde_json::from_str::<PlanarArcDiagram>(bad).is_err());
    }

    #[test]
    fn flip_is_involutive() {
        let d = omega4_diagram();
        let e = TangleExpr::Composite {
            diagram: d.clone(),
            inputs: vec![
                TangleExpr::Braid(word(3, &[(1, false), (2, true)])),
                TangleExpr::Braid(word(2, &[(1, true)])),
                TangleExpr::Empty,
            ],
        };
        assert_eq!(d.flip().flip(), d);
        assert_eq!(e.flip().flip(), e);
    }
}
