//! Integral homology of fully delooped complexes, Smith normal form, and
//! independent oracles (state-sum Khovanov homology and the Kauffman
//! bracket).

use crate::cob::UnionFind;
use crate::cube::{deloop, BasedComplex, BraidWord, CellId};
use crate::morse::gaussian_eliminate;
use crate::planar::{close_complex, reduced_complex_with_budget, TangleExpr, DEFAULT_CELL_BUDGET};
use crate::{Error, Result};
use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use std::collections::BTreeMap;
use std::fmt;

/// A Laurent polynomial in `q` with integer coefficients.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct LaurentPoly(BTreeMap<i64, i64>);

impl LaurentPoly {
    pub fn zero() -> Self {
        LaurentPoly::default()
    }

    pub fn one() -> Self {
        LaurentPoly::monomial(1, 0)
    }

    pub fn monomial(coeff: i64, exp: i64) -> Self {
        let mut p = LaurentPoly::default();
        if coeff != 0 {
            p.0.insert(exp, coeff);
        }
        p
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (i64, i64)>) -> Self {
        let mut p = LaurentPoly::default();
        for (exp, coeff) in pairs {
            p.add_term(coeff, exp);
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        self.0.iter().map(|(&e, &c)| (e, c))
    }

    pub fn add_term(&mut self, coeff: i64, exp: i64) {
        let c = self.0.entry(exp).or_insert(0);
        *c = c.checked_add(coeff).expect("coefficient overflow");
        if *c == 0 {
            self.0.remove(&exp);
        }
    }

    pub fn add(&self, other: &LaurentPoly) -> LaurentPoly {
        let mut out = self.clone();
        for (e, c) in other.terms() {
            out.add_term(c, e);
        }
        out
    }

    pub fn mul(&self, other: &LaurentPoly) -> LaurentPoly {
        let mut out = LaurentPoly::default();
        for (e1, c1) in self.terms() {
            for (e2, c2) in other.terms() {
                out.add_term(c1.checked_mul(c2).expect("coefficient overflow"), e1 + e2);
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> LaurentPoly {
        let mut out = LaurentPoly::one();
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }
}

impl fmt::Display for LaurentPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "0");
        }
        for (k, (e, c)) in self.terms().enumerate() {
            if k == 0 {
                if c < 0 {
                    write!(f, "-")?;
                }
            } else if c < 0 {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let a = c.abs();
            match e {
                0 => write!(f, "{a}")?,
                1 if a == 1 => write!(f, "q")?,
                1 => write!(f, "{a}q")?,
                _ if a == 1 => write!(f, "q^{e}")?,
                _ => write!(f, "{a}q^{e}")?,
            }
        }
        Ok(())
    }
}

/// Smith normal form `U A V = D` with unimodular transforms and positive
/// invariant factors, each dividing the next.
#[derive(Clone, Debug)]
pub struct Snf {
    pub rows: usize,
    pub cols: usize,
    pub factors: Vec<BigInt>,
    pub u: Vec<Vec<BigInt>>,
    pub v: Vec<Vec<BigInt>>,
}

impl Snf {
    pub fn rank(&self) -> usize {
        self.factors.len()
    }
}

pub fn to_bigint_matrix(m: &[Vec<i64>]) -> Vec<Vec<BigInt>> {
    m.iter().map(|row| row.iter().map(|&x| BigInt::from(x)).collect()).collect()
}

fn identity_matrix(n: usize) -> Vec<Vec<BigInt>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { BigInt::from(1) } else { BigInt::zero() }).collect())
        .collect()
}

/// Smith normal form by repeated pivoting on the smallest nonzero entry.
pub fn smith_normal_form(a: &[Vec<BigInt>]) -> Snf {
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    let mut m: Vec<Vec<BigInt>> = a.to_vec();
    let mut u = identity_matrix(rows);
    let mut v = identity_matrix(cols);

    let mut t = 0usize;
    while t < rows && t < cols {
        // Smallest nonzero entry of the trailing submatrix becomes the pivot.
        let mut pivot: Option<(usize, usize)> = None;
        for r in t..rows {
            for c in t..cols {
                if !m[r][c].is_zero()
                    && pivot.map_or(true, |(pr, pc)| m[r][c].abs() < m[pr][pc].abs())
                {
                    pivot = Some((r, c));
                }
            }
        }
        let Some((pr, pc)) = pivot else { break };
        m.swap(t, pr);
        u.swap(t, pr);
        for row in m.iter_mut() {
            row.swap(t, pc);
        }
        for row in v.iter_mut() {
            row.swap(t, pc);
        }

        'clear: loop {
            for r in t + 1..rows {
                if !m[r][t].is_zero() {
                    let q = &m[r][t] / &m[t][t];
                    for c in t..cols {
                        let s = &q * &m[t][c];
                        m[r][c] -= s;
                    }
                    for c in 0..rows {
                        let s = &q * &u[t][c];
                        u[r][c] -= s;
                    }
                    if !m[r][t].is_zero() {
                        m.swap(t, r);
                        u.swap(t, r);
                        continue 'clear;
                    }
                }
            }
            for c in t + 1..cols {
                if !m[t][c].is_zero() {
                    let q = &m[t][c] / &m[t][t];
                    for r in t..rows {
                        let s = &q * &m[r][t];
                        m[r][c] -= s;
                    }
                    for r in 0..cols {
                        let s = &q * &v[r][t];
                        v[r][c] -= s;
                    }
                    if !m[t][c].is_zero() {
                        for row in m.iter_mut() {
                            row.swap(t, c);
                        }
                        for row in v.iter_mut() {
                            row.swap(t, c);
                        }
                        continue 'clear;
                    }
                }
            }
            // Row and column are clear; enforce divisibility of the rest.
            for r in t + 1..rows {
                for c in t + 1..cols {
                    if !(&m[r][c] % &m[t][t]).is_zero() {
                        let row: Vec<BigInt> = m[r].clone();
                        for (x, y) in m[t].iter_mut().zip(row) {
                            *x += y;
                        }
                        let urow: Vec<BigInt> = u[r].clone();
                        for (x, y) in u[t].iter_mut().zip(urow) {
                            *x += y;
                        }
                        continue 'clear;
                    }
                }
            }
            break;
        }

        if m[t][t].is_negative() {
            for c in t..cols {
                m[t][c] = -m[t][c].clone();
            }
            for c in 0..rows {
                u[t][c] = -u[t][c].clone();
            }
        }
        t += 1;
    }

    let factors = (0..t).map(|i| m[i][i].clone()).collect();
    Snf { rows, cols, factors, u, v }
}

/// One homology group: free rank plus invariant factors, each greater than
/// one and dividing the next.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct HomologyGroup {
    pub rank: usize,
    pub torsion: Vec<BigInt>,
}

impl HomologyGroup {
    pub fn free(rank: usize) -> Self {
        HomologyGroup { rank, torsion: Vec::new() }
    }

    pub fn is_trivial(&self) -> bool {
        self.rank == 0 && self.torsion.is_empty()
    }
}

impl fmt::Display for HomologyGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_trivial() {
            return write!(f, "0");
        }
        let mut parts = Vec::new();
        match self.rank {
            0 => {}
            1 => parts.push("Z".to_string()),
            r => parts.push(format!("Z^{r}")),
        }
        for t in &self.torsion {
            parts.push(format!("Z/{t}"));
        }
        write!(f, "{}", parts.join(" + "))
    }
}

/// Bigraded homology groups indexed by `(homological, quantum)` degree.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct HomologyTable {
    pub groups: BTreeMap<(i32, i64), HomologyGroup>,
}

impl HomologyTable {
    pub fn group(&self, i: i32, j: i64) -> HomologyGroup {
        self.groups.get(&(i, j)).cloned().unwrap_or(HomologyGroup::free(0))
    }

    /// Distinct invariant factors across the whole table.
    pub fn torsion_factors(&self) -> Vec<BigInt> {
        let mut out: Vec<BigInt> = Vec::new();
        for g in self.groups.values() {
            for t in &g.torsion {
                if !out.contains(t) {
                    out.push(t.clone());
                }
            }
        }
        out.sort();
        out
    }

    pub fn only_z2_torsion(&self) -> bool {
        self.torsion_factors().iter().all(|t| *t == BigInt::from(2))
    }

    /// Graded Euler characteristic: `sum (-1)^i rank H^{i,j} q^j`.
    pub fn graded_euler_characteristic(&self) -> LaurentPoly {
        let mut p = LaurentPoly::zero();
        for (&(i, j), g) in &self.groups {
            let sign = if i.rem_euclid(2) == 0 { 1 } else { -1 };
            p.add_term(sign * g.rank as i64, j);
        }
        p
    }
}

impl fmt::Display for HomologyTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (&(i, j), g) in &self.groups {
            writeln!(f, "H[{i},{j}] = {g}")?;
        }
        Ok(())
    }
}

/// A complex of free abelian groups split by quantum grading. `diffs[(i,j)]`
/// maps generators at `(i,j)` to generators at `(i+1,j)`, rows indexed by
/// targets.
#[derive(Clone, Debug, Default)]
pub struct FreeComplex {
    pub gens: BTreeMap<(i32, i64), Vec<CellId>>,
    pub diffs: BTreeMap<(i32, i64), Vec<Vec<i64>>>,
}

/// Read off the free complex underlying a fully delooped complex of closed
/// objects: every cell must be an empty tangle and every entry an integer
/// multiple of the empty cobordism.
pub fn apply_tqft(c: &BasedComplex) -> Result<FreeComplex> {
    let mut gens: BTreeMap<(i32, i64), Vec<CellId>> = BTreeMap::new();
    let mut pos: BTreeMap<(i32, CellId), ((i32, i64), usize)> = BTreeMap::new();
    for (r, data) in c.cells() {
        if data.object.boundary_points() != 0 || data.object.circles() != 0 {
            return Err(Error::Invariant(format!(
                "apply_tqft needs a fully delooped closed complex, found object {}",
                data.object
            )));
        }
        let key = (r.0, data.qshift);
        let list = gens.entry(key).or_default();
        pos.insert((r.0, r.1.clone()), (key, list.len()));
        list.push(r.1.clone());
    }
    let mut diffs: BTreeMap<(i32, i64), Vec<Vec<i64>>> = BTreeMap::new();
    for (src, _) in c.cells() {
        let (skey, scol) = pos[&(src.0, src.1.clone())].clone();
        for (tgt, e) in c.outgoing(src) {
            let (tkey, trow) = pos[&(tgt.0, tgt.1.clone())].clone();
            if tkey.1 != skey.1 {
                return Err(Error::Invariant(format!(
                    "entry {src:?} -> {tgt:?} does not preserve the quantum grading"
                )));
            }
            let mut coeff = 0i64;
            for (gen, k) in e.terms() {
                if !gen.components().is_empty() {
                    return Err(Error::Invariant("entry is not a closed scalar".into()));
                }
                coeff = coeff
                    .checked_add(k)
                    .ok_or_else(|| Error::Invariant("coefficient overflow".into()))?;
            }
            if coeff == 0 {
                continue;
            }
            let rows = gens[&tkey].len();
            let cols = gens[&skey].len();
            let m = diffs.entry(skey).or_insert_with(|| vec![vec![0; cols]; rows]);
            m[trow][scol] = coeff;
        }
    }
    Ok(FreeComplex { gens, diffs })
}

/// Homology of a free complex: per bidegree, `rank = dim ker - rank d_in`
/// and torsion from the invariant factors of the incoming differential.
pub fn homology_of_free(fc: &FreeComplex) -> HomologyTable {
    let mut table = HomologyTable::default();
    let mut snf_cache: BTreeMap<(i32, i64), Snf> = BTreeMap::new();
    let mut snf_of = |key: (i32, i64), fc: &FreeComplex| -> Option<Snf> {
        if let Some(s) = snf_cache.get(&key) {
            return Some(s.clone());
        }
        let m = fc.diffs.get(&key)?;
        let s = smith_normal_form(&to_bigint_matrix(m));
        snf_cache.insert(key, s.clone());
        Some(s)
    };
    for (&(i, j), list) in &fc.gens {
        let n = list.len();
        let rank_out = snf_of((i, j), fc).map_or(0, |s| s.rank());
        let (rank_in, torsion) = match snf_of((i - 1, j), fc) {
            Some(s) => {
                let torsion: Vec<BigInt> =
                    s.factors.iter().filter(|f| **f > BigInt::from(1)).cloned().collect();
                (s.rank(), torsion)
            }
            None => (0, Vec::new()),
        };
        let rank = n - rank_out - rank_in;
        let g = HomologyGroup { rank, torsion };
        if !g.is_trivial() {
            table.groups.insert((i, j), g);
        }
    }
    table
}

/// Khovanov homology of the closure of a braid word via the reduction
/// pipeline: incremental tangle complex, closure, deloop, eliminate, TQFT,
/// Smith normal form.
pub fn khovanov_homology(w: &BraidWord) -> Result<HomologyTable> {
    khovanov_homology_with_budget(w, DEFAULT_CELL_BUDGET)
}

pub fn khovanov_homology_with_budget(w: &BraidWord, budget: usize) -> Result<HomologyTable> {
    let c = reduced_complex_with_budget(&TangleExpr::Braid(w.clone()), budget)?;
    let closed = close_complex(&c, w.strands())?;
    let delooped = deloop(&closed)?;
    let reduced = gaussian_eliminate(&delooped)?;
    Ok(homology_of_free(&apply_tqft(&reduced)?))
}

/// Khovanov homology of a closed tangle expression.
pub fn khovanov_homology_expr(t: &TangleExpr) -> Result<HomologyTable> {
    if t.boundary_points() != 0 {
        return Err(Error::Invariant("homology needs a closed tangle".into()));
    }
    let c = reduced_complex_with_budget(t, DEFAULT_CELL_BUDGET)?;
    Ok(homology_of_free(&apply_tqft(&c)?))
}

/// Connectivity of a braid closure: circles of each resolution state, traced
/// through crossing ports independently of the cobordism machinery.
struct ClosureStates {
    crossings: usize,
    nodes: usize,
    /// Wiring unions shared by every state (strand transport plus closure).
    base: Vec<(usize, usize)>,
    /// Whether bit 1 at this crossing means the cup-cap smoothing.
    cupcap_on_one: Vec<bool>,
}

const BL: usize = 0;
const BR: usize = 1;
const TL: usize = 2;
const TR: usize = 3;

impl ClosureStates {
    fn new(w: &BraidWord) -> Self {
        let k = w.len();
        let n = w.strands();
        let port = |c: usize, which: usize| 4 * c + which;
        let mut base = Vec::new();
        let mut current: Vec<usize> = (0..n).map(|s| 4 * k + s).collect();
        let mut cupcap_on_one = Vec::with_capacity(k);
        for (c, letter) in w.letters().iter().enumerate() {
            let i = letter.index - 1;
            base.push((current[i], port(c, BL)));
            base.push((current[i + 1], port(c, BR)));
            current[i] = port(c, TL);
            current[i + 1] = port(c, TR);
            cupcap_on_one.push(letter.inverse);
        }
        for (s, &p) in current.iter().enumerate() {
            base.push((p, 4 * k + s));
        }
        ClosureStates { crossings: k, nodes: 4 * k + n, base, cupcap_on_one }
    }

    /// Circle id per node for the state with the given bits.
    fn circles(&self, bits: usize) -> (usize, Vec<usize>) {
        let mut uf = UnionFind::new(self.nodes);
        for &(a, b) in &self.base {
            uf.union(a, b);
        }
        for c in 0..self.crossings {
            let bit = bits >> c & 1 == 1;
            let cupcap = bit == self.cupcap_on_one[c];
            if cupcap {
                uf.union(4 * c + BL, 4 * c + BR);
                uf.union(4 * c + TL, 4 * c + TR);
            } else {
                uf.union(4 * c + BL, 4 * c + TL);
                uf.union(4 * c + BR, 4 * c + TR);
            }
        }
        let mut ids = vec![usize::MAX; self.nodes];
        let mut count = 0;
        for node in 0..self.nodes {
            let root = uf.find(node);
            if ids[root] == usize::MAX {
                ids[root] = count;
                count += 1;
            }
            ids[node] = ids[root];
        }
        (count, ids)
    }
}

/// State-sum Khovanov homology of a braid closure over `Z[x]/x^2`, built
/// directly on the cube of resolutions with merge and split rules. No
/// delooping, elimination, or cobordism algebra is involved; this is the
/// oracle the reduction pipeline is checked against.
pub fn khovanov_direct(w: &BraidWord) -> Result<HomologyTable> {
    let k = w.len();
    if k > 24 {
        return Err(Error::Budget(format!("state sum over {k} crossings")));
    }
    let states = ClosureStates::new(w);
    let n_minus = w.n_minus() as i64;
    let n_plus = w.n_plus() as i64;

    // Enumerate generators: a state and a subset of its circles labeled x.
    let mut circle_data: Vec<(usize, Vec<usize>)> = Vec::with_capacity(1 << k);
    for u in 0..1usize << k {
        circle_data.push(states.circles(u));
    }
    let mut gens: BTreeMap<(i32, i64), Vec<CellId>> = BTreeMap::new();
    let mut pos: BTreeMap<(usize, usize), ((i32, i64), usize)> = BTreeMap::new();
    for u in 0..1usize << k {
        let ones = (u as u32).count_ones() as i64;
        let (count, _) = &circle_data[u];
        let i = (ones - n_minus) as i32;
        let q0 = ones + n_plus - 2 * n_minus;
        for mask in 0..1usize << count {
            let labels_x = (mask as u32).count_ones() as i64;
            let j = q0 + (*count as i64 - labels_x) - labels_x;
            let key = (i, j);
            let list = gens.entry(key).or_default();
            pos.insert((u, mask), (key, list.len()));
            list.push(format!("u{u}m{mask}"));
        }
    }

    let mut diffs: BTreeMap<(i32, i64), Vec<Vec<i64>>> = BTreeMap::new();
    let mut add = |skey: (i32, i64),
                   scol: usize,
                   trow: usize,
                   coeff: i64,
                   gens: &BTreeMap<(i32, i64), Vec<CellId>>| {
        let rows = gens[&(skey.0 + 1, skey.1)].len();
        let cols = gens[&skey].len();
        let m = diffs.entry(skey).or_insert_with(|| vec![vec![0; cols]; rows]);
        m[trow][scol] += coeff;
    };

    for u in 0..1usize << k {
        let (cu, ids_u) = circle_data[u].clone();
        // Representative node per circle of u (smallest node id).
        let mut rep = vec![usize::MAX; cu];
        for node in (0..states.nodes).rev() {
            rep[ids_u[node]] = node;
        }
        for r in 0..k {
            if u >> r & 1 == 1 {
                continue;
            }
            let v = u | 1 << r;
            let sign = if (u & ((1 << r) - 1)).count_ones() % 2 == 0 { 1 } else { -1 };
            let (cv, ids_v) = circle_data[v].clone();
            let site: Vec<usize> = (0..4).map(|t| 4 * r + t).collect();
            let inv_u: Vec<usize> = {
                let mut s: Vec<usize> = site.iter().map(|&p| ids_u[p]).collect();
                s.sort();
                s.dedup();
                s
            };
            let inv_v: Vec<usize> = {
                let mut s: Vec<usize> = site.iter().map(|&p| ids_v[p]).collect();
                s.sort();
                s.dedup();
                s
            };
            // Circles away from the site keep their node sets; map them by
            // representative node.
            let persist: Vec<(usize, usize)> = (0..cu)
                .filter(|c| !inv_u.contains(c))
                .map(|c| (c, ids_v[rep[c]]))
                .collect();
            for mask in 0..1usize << cu {
                let (skey, scol) = pos[&(u, mask)];
                let lab = |c: usize| mask >> c & 1 == 1; // true = x
                let mut tmask_base = 0usize;
                for &(c, cv_id) in &persist {
                    if lab(c) {
                        tmask_base |= 1 << cv_id;
                    }
                }
                match (inv_u.len(), inv_v.len()) {
                    (2, 1) => {
                        // Merge: 1*1 = 1, 1*x = x*1 = x, x*x = 0.
                        let (a, b) = (lab(inv_u[0]), lab(inv_u[1]));
                        if a && b {
                            continue;
                        }
                        let mut tmask = tmask_base;
                        if a || b {
                            tmask |= 1 << inv_v[0];
                        }
                        let (_, trow) = pos[&(v, tmask)];
                        add(skey, scol, trow, sign, &gens);
                    }
                    (1, 2) => {
                        // Split: 1 -> 1 x + x 1, x -> x x.
                        let a = lab(inv_u[0]);
                        let targets: Vec<usize> = if a {
                            vec![tmask_base | 1 << inv_v[0] | 1 << inv_v[1]]
                        } else {
                            vec![tmask_base | 1 << inv_v[0], tmask_base | 1 << inv_v[1]]
                        };
                        for tmask in targets {
                            let (_, trow) = pos[&(v, tmask)];
                            add(skey, scol, trow, sign, &gens);
                        }
                    }
                    other => {
                        return Err(Error::Invariant(format!(
                            "surgery with {other:?} circles on the site"
                        )));
                    }
                }
                let _ = cv;
            }
        }
    }
    Ok(homology_of_free(&FreeComplex { gens, diffs }))
}

/// The Kauffman-bracket form of the unnormalized Jones polynomial:
/// `(-1)^{n_-} q^{n_+ - 2 n_-} sum_u (-q)^{|u|} (q + q^{-1})^{c(u)}`.
pub fn kauffman_bracket_jones(w: &BraidWord) -> Result<LaurentPoly> {
    let k = w.len();
    if k > 24 {
        return Err(Error::Budget(format!("state sum over {k} crossings")));
    }
    let states = ClosureStates::new(w);
    let loop_poly = LaurentPoly::from_pairs([(1, 1), (-1, 1)]);
    let mut powers = vec![LaurentPoly::one()];
    let mut sum = LaurentPoly::zero();
    for u in 0..1usize << k {
        let (c, _) = states.circles(u);
        while powers.len() <= c {
            let next = powers.last().unwrap().mul(&loop_poly);
            powers.push(next);
        }
        let ones = (u as u32).count_ones() as i64;
        let sign = if ones % 2 == 0 { 1 } else { -1 };
        sum = sum.add(&powers[c].mul(&LaurentPoly::monomial(sign, ones)));
    }
    let n_minus = w.n_minus() as i64;
    let n_plus = w.n_plus() as i64;
    let prefactor_sign = if n_minus % 2 == 0 { 1 } else { -1 };
    Ok(sum.mul(&LaurentPoly::monomial(prefactor_sign, n_plus - 2 * n_minus)))
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

    fn gcd(a: i64, b: i64) -> i64 {
        let (mut a, mut b) = (a.abs(), b.abs());
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    }

    fn matmul(a: &[Vec<BigInt>], b: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
        let rows = a.len();
        let inner = b.len();
        let cols = if inner == 0 { 0 } else { b[0].len() };
        let mut out = vec![vec![BigInt::zero(); cols]; rows];
        for r in 0..rows {
            for c in 0..cols {
                for t in 0..inner {
                    let s = &a[r][t] * &b[t][c];
                    out[r][c] += s;
                }
            }
        }
        out
    }

    #[test]
    fn snf_anchor() {
        let m = to_bigint_matrix(&[vec![2, 4], vec![6, 8]]);
        let s = smith_normal_form(&m);
        assert_eq!(s.factors, vec![BigInt::from(2), BigInt::from(4)]);
    }

    #[test]
    fn snf_transforms_and_minor_gcds() {
        // Deterministic pseudo-random small matrices; d1...dk must match the
        // gcds of k x k minors and U A V must reproduce the diagonal.
        let mut seed = 0x9e3779b9u64;
        let mut next = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 33) % 19) as i64 - 9
        };
        for _ in 0..40 {
            let rows = 3;
            let cols = 4;
            let m: Vec<Vec<i64>> =
                (0..rows).map(|_| (0..cols).map(|_| next()).collect()).collect();
            let big = to_bigint_matrix(&m);
            let s = smith_normal_form(&big);
            let d = matmul(&matmul(&s.u, &big), &s.v);
            for r in 0..rows {
                for c in 0..cols {
                    let expect = if r == c && r < s.factors.len() {
                        s.factors[r].clone()
                    } else {
                        BigInt::zero()
                    };
                    assert_eq!(d[r][c], expect, "diagonal mismatch in {m:?}");
                }
            }
            // gcd of 1x1 minors = d1; gcd of 2x2 minors = d1 d2.
            let mut g1 = 0i64;
            for row in &m {
                for &x in row {
                    g1 = gcd(g1, x);
                }
            }
            let d1 = s.factors.first().cloned().unwrap_or_default();
            assert_eq!(BigInt::from(g1), d1);
            let mut g2 = 0i64;
            for r1 in 0..rows {
                for r2 in r1 + 1..rows {
                    for c1 in 0..cols {
                        for c2 in c1 + 1..cols {
                            g2 = gcd(g2, m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]);
                        }
                    }
                }
            }
            let d1d2 = if s.factors.len() >= 2 {
                &s.factors[0] * &s.factors[1]
            } else {
                BigInt::zero()
            };
            assert_eq!(BigInt::from(g2), d1d2);
        }
    }

    #[test]
    fn unknot_homology() {
        let w = word(2, &[(1, false)]);
        let h = khovanov_homology(&w).unwrap();
        assert_eq!(h.group(0, -1), HomologyGroup::free(1));
        assert_eq!(h.group(0, 1), HomologyGroup::free(1));
        assert_eq!(h.groups.len(), 2);
        assert_eq!(khovanov_direct(&w).unwrap(), h);
    }

    #[test]
    fn left_trefoil_homology() {
        let w = word(2, &[(1, false), (1, false), (1, false)]);
        let h = khovanov_homology(&w).unwrap();
        assert_eq!(h.group(0, -1), HomologyGroup::free(1));
        assert_eq!(h.group(0, -3), HomologyGroup::free(1));
        assert_eq!(h.group(-2, -5), HomologyGroup::free(1));
        assert_eq!(h.group(-3, -9), HomologyGroup::free(1));
        assert_eq!(
            h.group(-2, -7),
            HomologyGroup { rank: 0, torsion: vec![BigInt::from(2)] }
        );
        assert_eq!(h.groups.len(), 5);
        assert_eq!(khovanov_direct(&w).unwrap(), h);
    }

    #[test]
    fn jones_fixtures() {
        // Unknot.
        let p = kauffman_bracket_jones(&word(2, &[(1, false)])).unwrap();
        assert_eq!(p, LaurentPoly::from_pairs([(-1, 1), (1, 1)]));
        // Left trefoil.
        let p = kauffman_bracket_jones(&word(2, &[(1, false); 3])).unwrap();
        assert_eq!(p, LaurentPoly::from_pairs([(-9, -1), (-5, 1), (-3, 1), (-1, 1)]));
        // Figure eight.
        let w = word(3, &[(1, false), (2, true), (1, false), (2, true)]);
        let p = kauffman_bracket_jones(&w).unwrap();
        assert_eq!(p, LaurentPoly::from_pairs([(-5, 1), (5, 1)]));
        // Two-component unlink.
        let p = kauffman_bracket_jones(&word(2, &[])).unwrap();
        assert_eq!(p, LaurentPoly::from_pairs([(-2, 1), (0, 2), (2, 1)]));
    }

    #[test]
    fn euler_characteristic_matches_jones() {
        for w in [
            word(2, &[(1, false); 3]),
            word(3, &[(1, false), (2, true), (1, false), (2, true)]),
            word(3, &[(1, false), (2, false), (1, false), (2, false)]),
            word(2, &[(1, true), (1, true)]),
        ] {
            let h = khovanov_homology(&w).unwrap();
            let jones = kauffman_bracket_jones(&w).unwrap();
            assert_eq!(h.graded_euler_characteristic(), jones, "word {w}");
        }
    }

    #[test]
    fn direct_matches_pipeline_on_mixed_words() {
        for w in [
            word(2, &[(1, true); 2]),
            word(3, &[(1, false), (2, false), (1, false)]),
            word(3, &[(1, false), (2, true), (1, true), (2, false)]),
        ] {
            assert_eq!(khovanov_direct(&w).unwrap(), khovanov_homology(&w).unwrap(), "word {w}");
        }
    }

    #[test]
    fn tqft_rejects_open_objects() {
        let c = crate::cube::khovanov_complex(&word(2, &[(1, false)])).unwrap();
        assert!(apply_tqft(&c).is_err());
    }

    #[test]
    fn laurent_display() {
        let p = LaurentPoly::from_pairs([(-9, -1), (-1, 1), (0, 2), (3, 1)]);
        assert_eq!(p.to_string(), "-q^-9 + q^-1 + 2 + q^3");
        assert_eq!(LaurentPoly::zero().to_string(), "0");
    }
}
