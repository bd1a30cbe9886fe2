//! Cube of resolutions of a braid word, based complexes over `Cob`, and
//! delooping.
//!
//! Conventions: `sigma_i` (a plain letter) is the negative crossing, so plain
//! letters count `n_-` and inverse letters `n_+`. Crossings are listed bottom
//! to top. On a plain letter bit `1` picks the identity smoothing and bit `0`
//! the cup-cap; inverse letters swap the two. A vertex with `k` ones sits in
//! homological degree `k - n_-` with quantum shift `k + n_+ - 2 n_-`.

use crate::cob::{CobComponent, CobGenerator, CrosslessTangle, DottedMorphism};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// One letter of a braid word: the Artin generator index (1-based, between
/// strands `index` and `index+1`) and whether it is inverted.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct BraidLetter {
    pub index: usize,
    pub inverse: bool,
}

/// A braid word on `strands` strands, letters listed bottom to top.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(try_from = "RawBraidWord", into = "RawBraidWord")]
pub struct BraidWord {
    strands: usize,
    letters: Vec<BraidLetter>,
}

#[derive(Serialize, Deserialize)]
struct RawBraidWord {
    strands: usize,
    letters: Vec<BraidLetter>,
}

impl TryFrom<RawBraidWord> for BraidWord {
    type Error = String;

    fn try_from(raw: RawBraidWord) -> std::result::Result<Self, String> {
        BraidWord::new(raw.strands, raw.letters).map_err(|e| e.to_string())
    }
}

impl From<BraidWord> for RawBraidWord {
    fn from(w: BraidWord) -> RawBraidWord {
        RawBraidWord { strands: w.strands, letters: w.letters }
    }
}

impl BraidWord {
    pub fn new(strands: usize, letters: Vec<BraidLetter>) -> Result<Self> {
        if strands == 0 {
            return Err(Error::Parse("braid needs at least one strand".into()));
        }
        for l in &letters {
            if l.index == 0 || l.index >= strands {
                return Err(Error::Parse(format!(
                    "generator index {} out of range for {} strands",
                    l.index, strands
                )));
            }
        }
        Ok(BraidWord { strands, letters })
    }

    pub fn strands(&self) -> usize {
        self.strands
    }

    pub fn letters(&self) -> &[BraidLetter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Number of negative crossings (plain letters).
    pub fn n_minus(&self) -> usize {
        self.letters.iter().filter(|l| !l.inverse).count()
    }

    /// Number of positive crossings (inverse letters).
    pub fn n_plus(&self) -> usize {
        self.letters.iter().filter(|l| l.inverse).count()
    }

    pub fn writhe(&self) -> i64 {
        self.n_plus() as i64 - self.n_minus() as i64
    }

    /// Mirror image: every letter inverted, order preserved.
    pub fn mirror(&self) -> BraidWord {
        let letters = self
            .letters
            .iter()
            .map(|l| BraidLetter { index: l.index, inverse: !l.inverse })
            .collect();
        BraidWord { strands: self.strands, letters }
    }

    /// Left-right flip: `sigma_i` becomes `sigma_{n-i}`, signs kept.
    pub fn flip(&self) -> BraidWord {
        let letters = self
            .letters
            .iter()
            .map(|l| BraidLetter { index: self.strands - l.index, inverse: l.inverse })
            .collect();
        BraidWord { strands: self.strands, letters }
    }

    pub fn concat(&self, other: &BraidWord) -> Result<BraidWord> {
        if self.strands != other.strands {
            return Err(Error::Mismatch("concatenating braids on different strand counts".into()));
        }
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Ok(BraidWord { strands: self.strands, letters })
    }

    /// `sigma_index^power` on `strands` strands; negative powers use inverses.
    pub fn generator_power(strands: usize, index: usize, power: i64) -> Result<BraidWord> {
        let letter = BraidLetter { index, inverse: power < 0 };
        BraidWord::new(strands, vec![letter; power.unsigned_abs() as usize])
    }
}

impl fmt::Display for BraidWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "e{}", self.strands);
        }
        let words: Vec<String> = self
            .letters
            .iter()
            .map(|l| format!("s{}{}", l.index, if l.inverse { "'" } else { "" }))
            .collect();
        write!(f, "{}", words.join(" "))
    }
}

/// Superscript decoration on a symbol of an enhanced word: `Minus` is the
/// bare symbol, `One` and `X` record the label of the delooped circle born at
/// that position.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Sup {
    Minus,
    One,
    X,
}

impl Sup {
    pub fn qdeg(self) -> i64 {
        match self {
            Sup::Minus => 0,
            Sup::One => 1,
            Sup::X => -1,
        }
    }
}

/// An enhanced word: one `(bit, superscript)` symbol per crossing.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct EnhancedWord(pub Vec<(bool, Sup)>);

impl EnhancedWord {
    pub fn bits(&self) -> Vec<bool> {
        self.0.iter().map(|&(b, _)| b).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of leading plain `1` symbols before the first `0`.
    pub fn leading_ones(&self) -> usize {
        self.0.iter().take_while(|&&(b, _)| b).count()
    }

    /// The unique position (1-based) where the underlying bit vectors of two
    /// words differ; errors unless exactly one position differs.
    pub fn changing_index(a: &EnhancedWord, b: &EnhancedWord) -> Result<usize> {
        if a.len() != b.len() {
            return Err(Error::Mismatch("enhanced words of different lengths".into()));
        }
        let diffs: Vec<usize> =
            (0..a.len()).filter(|&i| a.0[i].0 != b.0[i].0).collect();
        match diffs.as_slice() {
            [r] => Ok(r + 1),
            _ => Err(Error::Mismatch(format!("{} bit differences, expected 1", diffs.len()))),
        }
    }

    pub fn total_sup_qdeg(&self) -> i64 {
        self.0.iter().map(|&(_, s)| s.qdeg()).sum()
    }
}

impl fmt::Display for EnhancedWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &(bit, sup) in &self.0 {
            let b = if bit { '1' } else { '0' };
            let s = match sup {
                Sup::Minus => '-',
                Sup::One => '1',
                Sup::X => 'x',
            };
            write!(f, "{b}{s}")?;
        }
        Ok(())
    }
}

/// `O(w)`: leading plain ones of an enhanced word.
pub fn leading_ones(w: &EnhancedWord) -> usize {
    w.leading_ones()
}

/// `L(a, b)`: the 1-based index of the unique changing bit.
pub fn changing_index(a: &EnhancedWord, b: &EnhancedWord) -> Result<usize> {
    EnhancedWord::changing_index(a, b)
}

/// A single resolution of a braid word: the resulting crossingless tangle,
/// the origin crossing of every free circle (the bottom-most cup on the
/// circle), and for every crossing the tangle pieces touching its site.
#[derive(Clone, Debug)]
pub struct Smoothing {
    pub tangle: CrosslessTangle,
    /// Sorted ascending; `origins[i]` belongs to circle piece `b + i`.
    pub origins: Vec<usize>,
    /// For each crossing, the pieces of the tangle meeting the local
    /// smoothing there.
    pub site_pieces: Vec<Vec<usize>>,
}

struct Tracer {
    parent: Vec<usize>,
    min_cup: Vec<Option<usize>>,
    points: Vec<Vec<usize>>,
}

impl Tracer {
    fn new() -> Self {
        Tracer { parent: Vec::new(), min_cup: Vec::new(), points: Vec::new() }
    }
    fn make(&mut self, point: Option<usize>, cup: Option<usize>) -> usize {
        self.parent.push(self.parent.len());
        self.min_cup.push(cup);
        self.points.push(point.into_iter().collect());
        self.parent.len() - 1
    }
    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
    fn union(&mut self, a: usize, b: usize) -> usize {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return ra;
        }
        self.parent[ra] = rb;
        self.min_cup[rb] = match (self.min_cup[ra], self.min_cup[rb]) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (x, y) => x.or(y),
        };
        let pts = std::mem::take(&mut self.points[ra]);
        self.points[rb].extend(pts);
        rb
    }
}

/// Whether bit `b` picks the cup-cap smoothing on this letter.
fn is_cupcap(letter: BraidLetter, bit: bool) -> bool {
    if letter.inverse {
        bit
    } else {
        !bit
    }
}

/// Resolve a braid word at the given bit vector.
pub fn resolve(word: &BraidWord, bits: &[bool]) -> Result<Smoothing> {
    if bits.len() != word.len() {
        return Err(Error::Mismatch(format!(
            "bit vector length {} differs from word length {}",
            bits.len(),
            word.len()
        )));
    }
    let n = word.strands();
    let mut tr = Tracer::new();
    let mut current: Vec<usize> = (0..n).map(|s| tr.make(Some(s), None)).collect();
    // (origin, root) of closed circles, in closing order.
    let mut circles: Vec<(usize, usize)> = Vec::new();
    let mut closed_roots: BTreeMap<usize, usize> = BTreeMap::new();
    let mut site_nodes: Vec<Vec<usize>> = Vec::with_capacity(word.len());

    for (cr, (&letter, &bit)) in word.letters().iter().zip(bits.iter()).enumerate() {
        let g = letter.index - 1;
        if !is_cupcap(letter, bit) {
            site_nodes.push(vec![current[g], current[g + 1]]);
            continue;
        }
        let (a, b) = (current[g], current[g + 1]);
        let mut nodes = vec![a, b];
        if tr.find(a) == tr.find(b) {
            let root = tr.find(a);
            let origin = tr.min_cup[root].ok_or_else(|| {
                Error::Invariant(format!("circle closed at crossing {cr} without a cup"))
            })?;
            closed_roots.insert(root, circles.len());
            circles.push((origin, root));
        } else {
            tr.union(a, b);
        }
        let cup = tr.make(None, Some(cr));
        nodes.push(cup);
        current[g] = cup;
        current[g + 1] = cup;
        site_nodes.push(nodes);
    }
    for (s, &node) in current.iter().enumerate() {
        let root = tr.find(node);
        tr.points[root].push(2 * n - 1 - s);
    }

    // Circle ids sorted by origin.
    let mut order: Vec<usize> = (0..circles.len()).collect();
    order.sort_by_key(|&i| circles[i].0);
    let origins: Vec<usize> = order.iter().map(|&i| circles[i].0).collect();
    let mut circle_id: BTreeMap<usize, usize> = BTreeMap::new();
    for (rank, &i) in order.iter().enumerate() {
        circle_id.insert(circles[i].1, rank);
    }

    let mut pairing = vec![usize::MAX; 2 * n];
    for node in 0..tr.parent.len() {
        let root = tr.find(node);
        if node != root || closed_roots.contains_key(&root) {
            continue;
        }
        let pts = &tr.points[root];
        if pts.len() != 2 {
            return Err(Error::Invariant(format!(
                "open piece with {} boundary points",
                pts.len()
            )));
        }
        pairing[pts[0]] = pts[1];
        pairing[pts[1]] = pts[0];
    }
    let tangle = CrosslessTangle::new(pairing, origins.len())?;
    let b = tangle.b();

    let piece_of = |tr: &mut Tracer, node: usize| -> usize {
        let root = tr.find(node);
        if let Some(&i) = closed_roots.get(&root) {
            b + circle_id[&circles[i].1]
        } else {
            let p = tr.points[root][0];
            tangle.arc_at(p)
        }
    };
    let mut site_pieces = Vec::with_capacity(site_nodes.len());
    for nodes in site_nodes {
        let mut pieces: Vec<usize> =
            nodes.into_iter().map(|nd| piece_of(&mut tr, nd)).collect();
        pieces.sort_unstable();
        pieces.dedup();
        site_pieces.push(pieces);
    }
    Ok(Smoothing { tangle, origins, site_pieces })
}

/// Cell label inside a based complex.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum CellLabel {
    Anonymous,
    Word(EnhancedWord),
}

pub type CellId = String;
pub type CellRef = (i32, CellId);

#[derive(Clone, Debug)]
pub struct CellData {
    pub object: CrosslessTangle,
    pub qshift: i64,
    pub label: CellLabel,
    /// Circle origins, when the cell comes from a braid-word resolution;
    /// index-aligned with the object's circle pieces.
    pub origins: Vec<usize>,
}

/// A complex of crossingless tangles with a distinguished cell basis.
/// Differential entries raise homological degree by one and are degree-zero
/// as graded maps: `deg(f) = q(src) - q(tgt)`.
#[derive(Clone, Debug, Default)]
pub struct BasedComplex {
    cells: BTreeMap<CellRef, CellData>,
    diff: BTreeMap<CellRef, BTreeMap<CellRef, DottedMorphism>>,
    rdiff: BTreeMap<CellRef, BTreeSet<CellRef>>,
}

impl BasedComplex {
    pub fn new() -> Self {
        BasedComplex::default()
    }

    /// The one-cell complex on a single object at bidegree `(0, q)`.
    pub fn single(object: CrosslessTangle, q: i64) -> Self {
        let mut c = BasedComplex::new();
        c.add_cell(0, "e".to_string(), object, q, CellLabel::Anonymous, Vec::new()).unwrap();
        c
    }

    pub fn add_cell(
        &mut self,
        hdeg: i32,
        id: CellId,
        object: CrosslessTangle,
        qshift: i64,
        label: CellLabel,
        origins: Vec<usize>,
    ) -> Result<()> {
        let key = (hdeg, id);
        if self.cells.contains_key(&key) {
            return Err(Error::Invariant(format!("duplicate cell {key:?}")));
        }
        if origins.len() != object.circles() && !origins.is_empty() {
            return Err(Error::Invariant("origins do not match circle count".into()));
        }
        self.cells.insert(key, CellData { object, qshift, label, origins });
        Ok(())
    }

    pub fn cell(&self, r: &CellRef) -> Option<&CellData> {
        self.cells.get(r)
    }

    pub fn cells(&self) -> impl Iterator<Item = (&CellRef, &CellData)> {
        self.cells.iter()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells_at(&self, hdeg: i32) -> Vec<CellRef> {
        self.cells
            .range((hdeg, String::new())..(hdeg + 1, String::new()))
            .map(|(k, _)| k.clone())
            .collect()
    }

    /// Lowest homological degree with a cell; `None` when empty.
    pub fn h_min(&self) -> Option<i32> {
        self.cells.keys().next().map(|k| k.0)
    }

    pub fn h_max(&self) -> Option<i32> {
        self.cells.keys().next_back().map(|k| k.0)
    }

    pub fn q_min(&self) -> Option<i64> {
        self.cells.values().map(|c| c.qshift).min()
    }

    pub fn q_max(&self) -> Option<i64> {
        self.cells.values().map(|c| c.qshift).max()
    }

    pub fn set_entry(&mut self, src: CellRef, tgt: CellRef, m: DottedMorphism) -> Result<()> {
        if !self.cells.contains_key(&src) || !self.cells.contains_key(&tgt) {
            return Err(Error::Invariant("entry endpoints missing".into()));
        }
        if tgt.0 != src.0 + 1 {
            return Err(Error::Invariant("entries must raise homological degree by one".into()));
        }
        if m.is_zero() {
            self.clear_entry(&src, &tgt);
            return Ok(());
        }
        self.rdiff.entry(tgt.clone()).or_default().insert(src.clone());
        self.diff.entry(src).or_default().insert(tgt, m);
        Ok(())
    }

    /// Add to an existing entry (inserting if absent, erasing if zero).
    pub fn add_entry(&mut self, src: CellRef, tgt: CellRef, m: &DottedMorphism) -> Result<()> {
        let cur = self.entry(&src, &tgt);
        let total = match cur {
            Some(e) => e.add(m)?,
            None => m.clone(),
        };
        self.set_entry(src, tgt, total)
    }

    /// `add_entry` taking the morphism by value, sparing the clone when the
    /// entry is new.
    pub fn add_entry_owned(&mut self, src: CellRef, tgt: CellRef, m: DottedMorphism) -> Result<()> {
        let total = match self.entry(&src, &tgt) {
            Some(e) => e.add(&m)?,
            None => m,
        };
        self.set_entry(src, tgt, total)
    }

    fn clear_entry(&mut self, src: &CellRef, tgt: &CellRef) {
        if let Some(row) = self.diff.get_mut(src) {
            row.remove(tgt);
            if row.is_empty() {
                self.diff.remove(src);
            }
        }
        if let Some(col) = self.rdiff.get_mut(tgt) {
            col.remove(src);
            if col.is_empty() {
                self.rdiff.remove(tgt);
            }
        }
    }

    pub fn entry(&self, src: &CellRef, tgt: &CellRef) -> Option<&DottedMorphism> {
        self.diff.get(src).and_then(|row| row.get(tgt))
    }

    pub fn outgoing(&self, src: &CellRef) -> Vec<(CellRef, &DottedMorphism)> {
        self.diff
            .get(src)
            .map(|row| row.iter().map(|(k, v)| (k.clone(), v)).collect())
            .unwrap_or_default()
    }

    pub fn incoming(&self, tgt: &CellRef) -> Vec<(CellRef, &DottedMorphism)> {
        self.rdiff
            .get(tgt)
            .map(|col| {
                col.iter()
                    .map(|src| (src.clone(), self.entry(src, tgt).expect("rdiff index")))
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn entry_count(&self) -> usize {
        self.diff.values().map(|r| r.len()).sum()
    }

    pub fn remove_cell(&mut self, r: &CellRef) {
        let outs: Vec<CellRef> =
            self.diff.get(r).map(|row| row.keys().cloned().collect()).unwrap_or_default();
        for t in outs {
            self.clear_entry(r, &t);
        }
        let ins: Vec<CellRef> =
            self.rdiff.get(r).map(|col| col.iter().cloned().collect()).unwrap_or_default();
        for s in ins {
            self.clear_entry(&s, r);
        }
        self.cells.remove(r);
    }

    /// Shift `C[t]{q}`: `(C[t])^i = C^{i-t}`, all quantum shifts raised by `q`.
    pub fn shift(&self, t: i32, q: i64) -> BasedComplex {
        let mut out = BasedComplex::new();
        for ((h, id), data) in &self.cells {
            let mut data = data.clone();
            data.qshift += q;
            out.cells.insert((h + t, id.clone()), data);
        }
        for (src, row) in &self.diff {
            for (tgt, m) in row {
                out.diff
                    .entry((src.0 + t, src.1.clone()))
                    .or_default()
                    .insert((tgt.0 + t, tgt.1.clone()), m.clone());
                out.rdiff
                    .entry((tgt.0 + t, tgt.1.clone()))
                    .or_default()
                    .insert((src.0 + t, src.1.clone()));
            }
        }
        out
    }

    /// Dual complex `VC`: `(VC)^i = C^{-i}`, quantum gradings negated,
    /// entries reversed with each cobordism reflected.
    pub fn dual(&self) -> BasedComplex {
        let mut out = BasedComplex::new();
        for ((h, id), data) in &self.cells {
            let mut data = data.clone();
            data.qshift = -data.qshift;
            out.cells.insert((-h, id.clone()), data);
        }
        for (src, row) in &self.diff {
            for (tgt, m) in row {
                let nsrc = (-tgt.0, tgt.1.clone());
                let ntgt = (-src.0, src.1.clone());
                out.rdiff.entry(ntgt.clone()).or_default().insert(nsrc.clone());
                out.diff.entry(nsrc).or_default().insert(ntgt, m.reflect());
            }
        }
        out
    }

    /// Rename every cell to a compact deterministic id `h<hdeg>n<k>`,
    /// dropping labels. Used after eliminations to keep ids short.
    pub fn rename_compact(&self) -> BasedComplex {
        let mut names: BTreeMap<CellRef, CellRef> = BTreeMap::new();
        let mut counter: BTreeMap<i32, usize> = BTreeMap::new();
        for (r, _) in self.cells.iter() {
            let k = counter.entry(r.0).or_insert(0);
            names.insert(r.clone(), (r.0, format!("h{}n{}", r.0, k)));
            *k += 1;
        }
        let mut out = BasedComplex::new();
        for (r, data) in &self.cells {
            let mut data = data.clone();
            data.label = CellLabel::Anonymous;
            out.cells.insert(names[r].clone(), data);
        }
        for (src, row) in &self.diff {
            for (tgt, m) in row {
                let ns = names[src].clone();
                let nt = names[tgt].clone();
                out.rdiff.entry(nt.clone()).or_default().insert(ns.clone());
                out.diff.entry(ns).or_default().insert(nt, m.clone());
            }
        }
        out
    }

    /// Check the complex axioms: entry shape, degree-zero entries, `d∘d = 0`.
    pub fn validate(&self) -> Result<()> {
        for (src, row) in &self.diff {
            let sdata = &self.cells[src];
            for (tgt, m) in row {
                let tdata = &self.cells[tgt];
                if tgt.0 != src.0 + 1 {
                    return Err(Error::Invariant("entry does not raise degree by 1".into()));
                }
                if m.is_zero() {
                    return Err(Error::Invariant("stored zero entry".into()));
                }
                if m.dom() != &sdata.object || m.cod() != &tdata.object {
                    return Err(Error::Invariant(format!(
                        "entry boundary mismatch at {src:?} -> {tgt:?}"
                    )));
                }
                let want = sdata.qshift - tdata.qshift;
                if m.degree() != Some(want) {
                    return Err(Error::Invariant(format!(
                        "entry {src:?} -> {tgt:?} has degree {:?}, expected {want}",
                        m.degree()
                    )));
                }
            }
        }
        // d ∘ d = 0.
        for (src, row) in &self.diff {
            let mut acc: BTreeMap<CellRef, DottedMorphism> = BTreeMap::new();
            for (mid, f) in row {
                if let Some(row2) = self.diff.get(mid) {
                    for (tgt, g) in row2 {
                        let gf = g.compose(f)?;
                        match acc.get_mut(tgt) {
                            Some(t) => *t = t.add(&gf)?,
                            None => {
                                acc.insert(tgt.clone(), gf);
                            }
                        }
                    }
                }
            }
            for (tgt, m) in acc {
                if !m.is_zero() {
                    return Err(Error::Invariant(format!(
                        "d∘d != 0 from {src:?} to {tgt:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Graded cell census: sorted `(hdeg, qshift, count)` triples.
    pub fn census(&self) -> Vec<(i32, i64, usize)> {
        let mut m: BTreeMap<(i32, i64), usize> = BTreeMap::new();
        for ((h, _), data) in &self.cells {
            *m.entry((*h, data.qshift)).or_insert(0) += 1;
        }
        m.into_iter().map(|((h, q), c)| (h, q, c)).collect()
    }
}

fn qshift_of(word: &BraidWord, ones: usize) -> i64 {
    ones as i64 + word.n_plus() as i64 - 2 * word.n_minus() as i64
}

fn hdeg_of(word: &BraidWord, ones: usize) -> i32 {
    ones as i32 - word.n_minus() as i32
}

fn sign_before(bits: &[bool], r: usize) -> i64 {
    if bits[..r].iter().filter(|&&b| b).count() % 2 == 0 {
        1
    } else {
        -1
    }
}

// State cells are named in the enhanced-word format with empty circle
// labels, so delooping's renames stay within one naming scheme.
fn bits_id(bits: &[bool]) -> String {
    EnhancedWord(bits.iter().map(|&b| (b, Sup::Minus)).collect()).to_string()
}

/// The saddle cobordism between resolutions `u` and `u + e_r`, with circles
/// as explicit pieces on both sides. Component structure: pieces are linked
/// by the walls at every boundary point, through the surgery site at `r`,
/// and each circle away from the site persists to the circle with the same
/// origin on the far side.
pub(crate) fn edge_generator(
    word: &BraidWord,
    su: &Smoothing,
    sv: &Smoothing,
    r: usize,
) -> Result<CobGenerator> {
    let n = word.strands();
    let pu = su.tangle.pieces();
    let pv = sv.tangle.pieces();
    let bu = su.tangle.b();
    let bv = sv.tangle.b();
    let mut uf = vec![usize::MAX; pu + pv];
    fn find(uf: &mut [usize], mut x: usize) -> usize {
        while uf[x] != x {
            uf[x] = uf[uf[x]];
            x = uf[x];
        }
        x
    }
    fn union(uf: &mut [usize], a: usize, b: usize) {
        let (ra, rb) = (find(uf, a), find(uf, b));
        if ra != rb {
            uf[ra] = rb;
        }
    }
    for (i, slot) in uf.iter_mut().enumerate() {
        *slot = i;
    }
    for p in 0..2 * n {
        union(&mut uf, su.tangle.arc_at(p), pu + sv.tangle.arc_at(p));
    }
    let site: Vec<usize> = su.site_pieces[r]
        .iter()
        .copied()
        .chain(sv.site_pieces[r].iter().map(|&p| pu + p))
        .collect();
    for w in site.windows(2) {
        union(&mut uf, w[0], w[1]);
    }
    let site_u: BTreeSet<usize> = su.site_pieces[r].iter().copied().collect();
    let site_v: BTreeSet<usize> = sv.site_pieces[r].iter().copied().collect();
    for (i, &origin) in su.origins.iter().enumerate() {
        let piece = bu + i;
        if site_u.contains(&piece) {
            continue;
        }
        let j = sv
            .origins
            .iter()
            .position(|&o| o == origin)
            .ok_or_else(|| Error::Invariant(format!("persisting circle {origin} lost")))?;
        union(&mut uf, piece, pu + bv + j);
    }
    for (j, o) in sv.origins.iter().enumerate() {
        debug_assert!(
            site_v.contains(&(bv + j)) || su.origins.contains(o),
            "unmatched codomain circle"
        );
    }

    let mut clusters: BTreeMap<usize, (BTreeSet<usize>, BTreeSet<usize>)> = BTreeMap::new();
    for p in 0..pu {
        clusters.entry(find(&mut uf, p)).or_default().0.insert(p);
    }
    for p in 0..pv {
        clusters.entry(find(&mut uf, pu + p)).or_default().1.insert(p);
    }
    let comps = clusters
        .into_values()
        .map(|(dom, cod)| CobComponent::new(dom, cod, 0, 0))
        .collect();
    CobGenerator::new(su.tangle.clone(), sv.tangle.clone(), comps)
}

/// The Khovanov cube complex of a braid word: one cell per resolution, not
/// yet delooped. Cell ids are the bit strings; labels are enhanced words
/// with all superscripts still blank.
pub fn khovanov_complex(word: &BraidWord) -> Result<BasedComplex> {
    let m = word.len();
    if m > 24 {
        return Err(Error::Budget(format!("explicit cube on {m} crossings")));
    }
    let mut smoothings: Vec<Smoothing> = Vec::with_capacity(1 << m);
    for u in 0..1usize << m {
        let bits: Vec<bool> = (0..m).map(|i| u >> i & 1 == 1).collect();
        smoothings.push(resolve(word, &bits)?);
    }
    let mut c = BasedComplex::new();
    for (u, s) in smoothings.iter().enumerate() {
        let bits: Vec<bool> = (0..m).map(|i| u >> i & 1 == 1).collect();
        let ones = bits.iter().filter(|&&b| b).count();
        let label = EnhancedWord(bits.iter().map(|&b| (b, Sup::Minus)).collect());
        c.add_cell(
            hdeg_of(word, ones),
            bits_id(&bits),
            s.tangle.clone(),
            qshift_of(word, ones),
            CellLabel::Word(label),
            s.origins.clone(),
        )?;
    }
    for u in 0..1usize << m {
        let bits: Vec<bool> = (0..m).map(|i| u >> i & 1 == 1).collect();
        let ones = bits.iter().filter(|&&b| b).count();
        for r in 0..m {
            if u >> r & 1 == 1 {
                continue;
            }
            let v = u | 1 << r;
            let vbits: Vec<bool> = (0..m).map(|i| v >> i & 1 == 1).collect();
            let gen = edge_generator(word, &smoothings[u], &smoothings[v], r)?;
            let m0 = DottedMorphism::from_generator(gen, sign_before(&bits, r))?;
            c.set_entry(
                (hdeg_of(word, ones), bits_id(&bits)),
                (hdeg_of(word, ones + 1), bits_id(&vbits)),
                m0,
            )?;
        }
    }
    Ok(c)
}

/// Birth of circle piece `b` (circle index 0) into `t`; `dotted` adds a dot.
fn birth_generator(t: &CrosslessTangle, dotted: bool) -> CobGenerator {
    let less = t.with_circles(t.circles() - 1);
    let b = t.b();
    let mut comps: Vec<CobComponent> =
        (0..b).map(|p| CobComponent::new([p], [p], 0, 0)).collect();
    comps.push(CobComponent::new([], [b], 0, if dotted { 1 } else { 0 }));
    for i in 1..t.circles() {
        comps.push(CobComponent::new([b + i - 1], [b + i], 0, 0));
    }
    CobGenerator::new(less, t.clone(), comps).expect("birth generator")
}

/// Death of circle piece `b` (circle index 0) of `t`.
fn death_generator(t: &CrosslessTangle, dotted: bool) -> CobGenerator {
    birth_generator(t, dotted).reflect()
}

/// Delooping maps for the first circle of object `t`:
/// `Psi: O = ∅{-1} ⊕ ∅{+1}`. Returns `(iota_minus, iota_plus, pi_minus,
/// pi_plus)` with `iota_minus` the dotted birth, `pi_plus` the dotted death,
/// so that `pi_s ∘ iota_s = id` and the cross terms vanish.
pub fn deloop_maps(
    t: &CrosslessTangle,
) -> (DottedMorphism, DottedMorphism, DottedMorphism, DottedMorphism) {
    let im = DottedMorphism::from_generator(birth_generator(t, true), 1).expect("iota-");
    let ip = DottedMorphism::from_generator(birth_generator(t, false), 1).expect("iota+");
    let pm = DottedMorphism::from_generator(death_generator(t, false), 1).expect("pi-");
    let pp = DottedMorphism::from_generator(death_generator(t, true), 1).expect("pi+");
    (im, ip, pm, pp)
}

/// Replace every cell whose object contains circles by the pair of
/// circle-free cells given by the delooping isomorphism, rewriting all
/// incident entries. Labels of braid-cube cells pick up the circle label at
/// the origin position (`x` on the `{-1}` summand, `1` on `{+1}`).
pub fn deloop(c: &BasedComplex) -> Result<BasedComplex> {
    let mut c = c.clone();
    loop {
        let target = c
            .cells()
            .find(|(_, d)| d.object.circles() > 0)
            .map(|(r, _)| r.clone());
        let Some(cref) = target else {
            return Ok(c);
        };
        deloop_cell(&mut c, &cref)?;
    }
}

fn deloop_cell(c: &mut BasedComplex, cref: &CellRef) -> Result<()> {
    let data = c.cell(cref).expect("deloop cell").clone();
    let t = data.object.clone();
    let less = t.with_circles(t.circles() - 1);
    let (im, ip, pm, pp) = deloop_maps(&t);
    let origin = data.origins.first().copied();
    let rest_origins: Vec<usize> =
        data.origins.iter().skip(1).copied().collect();

    let variant = |sup: Sup| -> (CellRef, CellData) {
        let (label, id) = match (&data.label, origin) {
            (CellLabel::Word(w), Some(o)) => {
                let mut w = w.clone();
                w.0[o].1 = sup;
                let id = w.to_string();
                (CellLabel::Word(w), id)
            }
            _ => (
                CellLabel::Anonymous,
                format!("{}{}", cref.1, if sup == Sup::X { "-" } else { "+" }),
            ),
        };
        let q = data.qshift + if sup == Sup::X { -1 } else { 1 };
        (
            (cref.0, id),
            CellData {
                object: less.clone(),
                qshift: q,
                label,
                origins: rest_origins.clone(),
            },
        )
    };
    let (ref_x, data_x) = variant(Sup::X);
    let (ref_1, data_1) = variant(Sup::One);

    let outs: Vec<(CellRef, DottedMorphism)> =
        c.outgoing(cref).into_iter().map(|(t, m)| (t, m.clone())).collect();
    let ins: Vec<(CellRef, DottedMorphism)> =
        c.incoming(cref).into_iter().map(|(s, m)| (s, m.clone())).collect();
    c.remove_cell(cref);
    c.add_cell(ref_x.0, ref_x.1.clone(), data_x.object, data_x.qshift, data_x.label, data_x.origins)?;
    c.add_cell(ref_1.0, ref_1.1.clone(), data_1.object, data_1.qshift, data_1.label, data_1.origins)?;
    for (tgt, m) in outs {
        let fx = m.compose(&im)?;
        let f1 = m.compose(&ip)?;
        if !fx.is_zero() {
            c.add_entry(ref_x.clone(), tgt.clone(), &fx)?;
        }
        if !f1.is_zero() {
            c.add_entry(ref_1.clone(), tgt.clone(), &f1)?;
        }
    }
    for (src, m) in ins {
        let fx = pm.compose(&m)?;
        let f1 = pp.compose(&m)?;
        if !fx.is_zero() {
            c.add_entry(src.clone(), ref_x.clone(), &fx)?;
        }
        if !f1.is_zero() {
            c.add_entry(src, ref_1.clone(), &f1)?;
        }
    }
    Ok(())
}

/// The delooped cube of a braid word built in one pass: cells are enhanced
/// words (a circle label per origin), and entries come from the fused
/// saddle-with-dots calculus, without constructing the undelooped cube.
/// Definitionally equal to `deloop(khovanov_complex(word))`.
pub fn enhanced_cube(word: &BraidWord) -> Result<BasedComplex> {
    let m = word.len();
    if m > 26 {
        return Err(Error::Budget(format!("enhanced cube on {m} crossings")));
    }
    let mut smoothings: Vec<Smoothing> = Vec::with_capacity(1 << m);
    for u in 0..1usize << m {
        let bits: Vec<bool> = (0..m).map(|i| u >> i & 1 == 1).collect();
        smoothings.push(resolve(word, &bits)?);
    }
    let mut c = BasedComplex::new();
    for (u, s) in smoothings.iter().enumerate() {
        let bits: Vec<bool> = (0..m).map(|i| u >> i & 1 == 1).collect();
        let ones = bits.iter().filter(|&&b| b).count();
        let hdeg = hdeg_of(word, ones);
        let q0 = qshift_of(word, ones);
        let object = s.tangle.with_circles(0);
        let nc = s.origins.len();
        for mask in 0..1usize << nc {
            let mut w = EnhancedWord(bits.iter().map(|&b| (b, Sup::Minus)).collect());
            let mut q = q0;
            for (i, &o) in s.origins.iter().enumerate() {
                let sup = if mask >> i & 1 == 1 { Sup::One } else { Sup::X };
                w.0[o].1 = sup;
                q += sup.qdeg();
            }
            c.add_cell(hdeg, w.to_string(), object.clone(), q, CellLabel::Word(w), Vec::new())?;
        }
    }
    for u in 0..1usize << m {
        let ubits: Vec<bool> = (0..m).map(|i| u >> i & 1 == 1).collect();
        let ones = ubits.iter().filter(|&&b| b).count();
        let hu = hdeg_of(word, ones);
        for r in 0..m {
            if u >> r & 1 == 1 {
                continue;
            }
            let v = u | 1 << r;
            let vbits: Vec<bool> = (0..m).map(|i| v >> i & 1 == 1).collect();
            let su = &smoothings[u];
            let sv = &smoothings[v];
            let gen = edge_generator(word, su, sv, r)?;
            let sign = sign_before(&ubits, r);
            for (uw, vw, coeff, g) in
                enhanced_entries(su, sv, &gen, &ubits, &vbits, sign)?
            {
                let src = (hu, uw.to_string());
                let tgt = (hu + 1, vw.to_string());
                c.add_entry_owned(src, tgt, DottedMorphism::from_generator(g, coeff)?)?;
            }
        }
    }
    Ok(c)
}

/// All nonzero delooped entries over one cube edge. For each assignment of
/// labels to the domain circles, persisting circles force the matching label
/// on the far side; the site component collects a dot for every `x` on a
/// domain circle and every `1` on a codomain circle, evaluating to zero when
/// the count exceeds one (or differs from one on a closed site).
fn enhanced_entries(
    su: &Smoothing,
    sv: &Smoothing,
    gen: &CobGenerator,
    ubits: &[bool],
    vbits: &[bool],
    sign: i64,
) -> Result<Vec<(EnhancedWord, EnhancedWord, i64, CobGenerator)>> {
    let bu = su.tangle.b();
    let bv = sv.tangle.b();
    let cu = su.origins.len();
    let cv = sv.origins.len();
    if cu > 60 || cv > 60 {
        return Err(Error::Budget("more than 60 circles in one resolution".into()));
    }
    let dom_obj = su.tangle.with_circles(0);
    let cod_obj = sv.tangle.with_circles(0);

    // Per component: circle masks for the dot counts, arc sets for the
    // surviving terms. Sorted by arcs so every term's components come out in
    // generator order (open components have disjoint nonempty arc sets, so
    // the varying dots never decide).
    struct Pre {
        dom_circ: u64,
        cod_circ: u64,
        dom_arcs: BTreeSet<usize>,
        cod_arcs: BTreeSet<usize>,
    }
    let mut pre: Vec<Pre> = gen
        .components()
        .iter()
        .map(|comp| {
            let mut p = Pre {
                dom_circ: 0,
                cod_circ: 0,
                dom_arcs: BTreeSet::new(),
                cod_arcs: BTreeSet::new(),
            };
            for &q in &comp.dom {
                if q >= bu {
                    p.dom_circ |= 1 << (q - bu);
                } else {
                    p.dom_arcs.insert(q);
                }
            }
            for &q in &comp.cod {
                if q >= bv {
                    p.cod_circ |= 1 << (q - bv);
                } else {
                    p.cod_arcs.insert(q);
                }
            }
            p
        })
        .collect();
    pre.sort_by(|a, b| (&a.dom_arcs, &a.cod_arcs).cmp(&(&b.dom_arcs, &b.cod_arcs)));
    // Persisting pairs (components with exactly one circle on each side and
    // no arcs) are forced; everything else is part of the site.
    let mut forced: Vec<Option<usize>> = vec![None; cv]; // cod circle -> dom circle
    let mut free_cod: Vec<usize> = Vec::new();
    for j in 0..cv {
        let p = pre.iter().find(|p| p.cod_circ >> j & 1 == 1).expect("circle in a component");
        if p.dom_arcs.is_empty()
            && p.cod_arcs.is_empty()
            && p.dom_circ.count_ones() == 1
            && p.cod_circ.count_ones() == 1
        {
            forced[j] = Some(p.dom_circ.trailing_zeros() as usize);
        } else {
            free_cod.push(j);
        }
    }
    let open = pre.iter().filter(|p| !(p.dom_arcs.is_empty() && p.cod_arcs.is_empty())).count();

    let mut out = Vec::new();
    for lmask in 0..1u64 << cu {
        for fmask in 0..1u64 << free_cod.len() {
            let mut mu_mask = 0u64;
            for (j, f) in forced.iter().enumerate() {
                if let Some(i) = f {
                    mu_mask |= (lmask >> i & 1) << j;
                }
            }
            for (k, &j) in free_cod.iter().enumerate() {
                mu_mask |= (fmask >> k & 1) << j;
            }
            // Dots: an `x` on a domain circle or a `1` on a codomain circle.
            let mut comps = Vec::with_capacity(open);
            let mut dead = false;
            for p in &pre {
                let dots = (p.dom_circ & !lmask).count_ones()
                    + (p.cod_circ & mu_mask).count_ones();
                if p.dom_arcs.is_empty() && p.cod_arcs.is_empty() {
                    if dots != 1 {
                        dead = true;
                        break;
                    }
                } else {
                    if dots >= 2 {
                        dead = true;
                        break;
                    }
                    comps.push(CobComponent {
                        dom: p.dom_arcs.clone(),
                        cod: p.cod_arcs.clone(),
                        genus: 0,
                        dots,
                    });
                }
            }
            if dead {
                continue;
            }
            let g = CobGenerator::new_unchecked(dom_obj.clone(), cod_obj.clone(), comps);
            let lam: Vec<Sup> = (0..cu)
                .map(|i| if lmask >> i & 1 == 1 { Sup::One } else { Sup::X })
                .collect();
            let mu: Vec<Sup> = (0..cv)
                .map(|j| if mu_mask >> j & 1 == 1 { Sup::One } else { Sup::X })
                .collect();
            let uw = enhanced_word_of(ubits, &su.origins, &lam);
            let vw = enhanced_word_of(vbits, &sv.origins, &mu);
            out.push((uw, vw, sign, g));
        }
    }
    Ok(out)
}

pub(crate) fn enhanced_word_of(bits: &[bool], origins: &[usize], sups: &[Sup]) -> EnhancedWord {
    let mut w = EnhancedWord(bits.iter().map(|&b| (b, Sup::Minus)).collect());
    for (&o, &s) in origins.iter().zip(sups.iter()) {
        w.0[o].1 = s;
    }
    w
}
