//! Reduction of the two-parameter families `(σ1σ2)^k σ1^m` to finitely many
//! links: exact bound functions, the parameter-reduction algorithm, its
//! finite index sets, and a torsion scanner over the Ω families.

use crate::cube::{enhanced_cube, BraidWord};
use crate::homology::{khovanov_homology_with_budget, HomologyTable};
use crate::planar::{
    merge, omega4_diagram, omega5_diagram, PlanarArcDiagram, TangleExpr, DEFAULT_CELL_BUDGET,
};
use crate::{Error, Result};
use num_traits::ToPrimitive;
use once_cell::sync::Lazy;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Mutex;

/// Exact rational with cross-multiplied comparisons; the denominator stays
/// positive.
#[derive(Clone, Copy, Debug)]
pub struct Rat {
    num: i64,
    den: i64,
}

impl Rat {
    pub fn new(num: i64, den: i64) -> Rat {
        assert!(den != 0, "zero denominator");
        if den < 0 {
            Rat { num: -num, den: -den }
        } else {
            Rat { num, den }
        }
    }

    pub fn int(n: i64) -> Rat {
        Rat { num: n, den: 1 }
    }

    pub fn floor(self) -> i64 {
        self.num.div_euclid(self.den)
    }
}

impl PartialEq for Rat {
    fn eq(&self, other: &Rat) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Rat {}

impl PartialOrd for Rat {
    fn partial_cmp(&self, other: &Rat) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rat {
    fn cmp(&self, other: &Rat) -> Ordering {
        let lhs = self.num as i128 * other.den as i128;
        let rhs = other.num as i128 * self.den as i128;
        lhs.cmp(&rhs)
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.num % self.den == 0 {
            write!(f, "{}", self.num / self.den)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// A two-parameter family presentation: a planar arc diagram whose first two
/// holes take `(σ1σ2)^k` and `σ1^m`, a fixed tangle for the third hole, and
/// cached grading data of the delooped complex of that tangle.
#[derive(Clone, Debug)]
pub struct DiagramContext {
    pub diagram: PlanarArcDiagram,
    pub tangle: TangleExpr,
    pub s: i64,
    pub h_min: i64,
    pub h_max: i64,
    pub q_min: i64,
    pub q_max: i64,
}

/// Grading spans of the delooped complex of a small tangle.
fn tangle_spans(t: &TangleExpr) -> Result<(i64, i64, i64, i64)> {
    match t {
        TangleExpr::Empty => Ok((0, 0, 0, 0)),
        TangleExpr::Braid(w) => {
            if w.len() > 16 {
                return Err(Error::Budget(format!(
                    "context tangle with {} crossings is too large to deloop explicitly",
                    w.len()
                )));
            }
            let c = enhanced_cube(w)?;
            let h_min = c.h_min().unwrap_or(0) as i64;
            let h_max = c.h_max().unwrap_or(0) as i64;
            Ok((h_min, h_max, c.q_min().unwrap_or(0), c.q_max().unwrap_or(0)))
        }
        TangleExpr::Composite { .. } => {
            Err(Error::Invariant("context tangle must be empty or a braid".into()))
        }
    }
}

impl DiagramContext {
    pub fn new(diagram: PlanarArcDiagram, tangle: TangleExpr) -> Result<DiagramContext> {
        let (h_min, h_max, q_min, q_max) = tangle_spans(&tangle)?;
        let s = diagram.s();
        Ok(DiagramContext { diagram, tangle, s, h_min, h_max, q_min, q_max })
    }

    /// The closed family `(σ1σ2)^k σ1^m` with no spare tangle.
    pub fn omega4() -> DiagramContext {
        DiagramContext::new(omega4_diagram(), TangleExpr::Empty).expect("omega4 context")
    }

    /// Mirror image of [`DiagramContext::omega4`].
    pub fn omega5() -> DiagramContext {
        DiagramContext::new(omega5_diagram(), TangleExpr::Empty).expect("omega5 context")
    }

    /// Recompute the cached values from the diagram and tangle.
    pub fn check_cached(&self) -> Result<()> {
        let fresh = DiagramContext::new(self.diagram.clone(), self.tangle.clone())?;
        let same = fresh.s == self.s
            && fresh.h_min == self.h_min
            && fresh.h_max == self.h_max
            && fresh.q_min == self.q_min
            && fresh.q_max == self.q_max;
        if same {
            Ok(())
        } else {
            Err(Error::Invariant("cached context data disagrees with recomputation".into()))
        }
    }

    /// Context of the flipped mirror diagram: the link of `(k, m)` here is
    /// the mirror of the link of `(-k, -m)` there.
    pub fn mirrored(&self) -> Result<DiagramContext> {
        DiagramContext::new(self.diagram.flip(), self.tangle.mirror().flip())
    }
}

pub fn v1(i: i64, j: i64, k: i64, m: i64, ctx: &DiagramContext) -> i64 {
    -3 * i + 2 * j + 4 * k + 3 * m - 2 * ctx.s + 3 * ctx.h_min - 2 * ctx.q_max - 7
}

pub fn v2(i: i64, j: i64, k: i64, m: i64, ctx: &DiagramContext) -> i64 {
    -3 * i + 2 * j + 4 * k + 2 * m + 2 * ctx.s + 3 * ctx.h_max - 2 * ctx.q_min + 4
}

pub fn w1(i: i64, j: i64, k: i64, m: i64, ctx: &DiagramContext) -> i64 {
    -3 * i + 2 * j + 4 * k + 2 * m - 2 * ctx.s + 3 * ctx.h_min - 2 * ctx.q_max - 6
}

// The trailing `- q_min` is not a typo for `- 2 q_min`.
pub fn w2(i: i64, j: i64, k: i64, m: i64, ctx: &DiagramContext) -> i64 {
    -3 * i + 2 * j + 4 * k + 3 * m + 2 * ctx.s + 3 * ctx.h_max - ctx.q_min + 5
}

/// Threshold on `|m|` below which no twist-reduction step applies.
pub fn g_bound(a: i64, b: i64, ctx: &DiagramContext) -> i64 {
    4 * ctx.s
        + 3 * (ctx.h_max - ctx.h_min)
        + 2 * (ctx.q_max - ctx.q_min)
        + 3 * a
        + 2 * b
        + 14
}

/// Support bounds of the unreduced complex of the merged tangle: the spare
/// tangle with `σ1^m` absorbed.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct MergedSpans {
    pub h_min: i64,
    pub h_max: i64,
}

impl MergedSpans {
    pub fn span(&self) -> i64 {
        self.h_max - self.h_min
    }
}

/// Merge the `σ1^m` hole with the spare tangle hole of the context diagram.
pub fn merge_m_hole(ctx: &DiagramContext, m: i64) -> Result<(PlanarArcDiagram, TangleExpr)> {
    let braid = BraidWord::generator_power(2, 1, m)?;
    merge(&ctx.diagram, 1, &braid, 2, &ctx.tangle)
}

pub fn merged_spans(ctx: &DiagramContext, m: i64) -> Result<MergedSpans> {
    let (_, filler) = merge_m_hole(ctx, m)?;
    let (n_plus, n_minus) = filler.crossing_counts();
    Ok(MergedSpans { h_min: -(n_minus as i64), h_max: n_plus as i64 })
}

/// Threshold on `k` below which no full-twist-reduction step applies.
pub fn h_bound(a: i64, spans: MergedSpans) -> Rat {
    Rat::new(3 * (spans.span() + a) + 32, 4)
}

/// Parameters of one homology group comparison: the group sits at
/// `(i+c, j+d)` of the link of `(k, m)`, for every `0 <= c <= a` and
/// `0 <= d <= b`.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ReductionParams {
    pub i: i64,
    pub j: i64,
    pub k: i64,
    pub m: i64,
    pub a: i64,
    pub b: i64,
}

fn min_over_window<F: Fn(i64, i64) -> i64>(f: F, i: i64, j: i64, a: i64, b: i64) -> i64 {
    [(0, 0), (a, 0), (0, b), (a, b)]
        .into_iter()
        .map(|(c, d)| f(i + c, j + d))
        .min()
        .expect("corner minimum")
}

/// Walk the parameters into the finite window while preserving the homology
/// groups at `(i+c, j+d)` over the whole `(a, b)` comparison window. Negative
/// `k` is handled through the mirror context; twist reduction steps `m`
/// toward zero by 2 and full-twist reduction steps `k` down by 3, with the
/// branch at each step picked by an exact bound test.
pub fn reduce_parameters(p: ReductionParams, ctx: &DiagramContext) -> Result<ReductionParams> {
    Ok(reduce_parameters_traced(p, ctx)?.0)
}

/// One recorded move of the reduction: which isomorphism was applied and the
/// parameter vector after applying it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceStep {
    pub stage: String,
    pub params: ReductionParams,
}

impl TraceStep {
    fn new(stage: &str, params: ReductionParams) -> TraceStep {
        TraceStep { stage: stage.into(), params }
    }
}

/// Like [`reduce_parameters`] but records every move: `v1`/`v2` for the
/// positive-twist loop, `w1`/`w2` for the negative-twist loop, `iso3`/`iso4`
/// for the full-twist loop, and `mirror`/`unmirror` around the recursive call
/// on the reflected diagram.
pub fn reduce_parameters_traced(
    p: ReductionParams,
    ctx: &DiagramContext,
) -> Result<(ReductionParams, Vec<TraceStep>)> {
    if p.a < 0 || p.b < 0 {
        return Err(Error::Invariant(format!("negative window sizes a={} b={}", p.a, p.b)));
    }
    let mut trace = Vec::new();
    if p.k < 0 {
        let flipped = ctx.mirrored()?;
        let inner = ReductionParams {
            i: -p.i - p.a,
            j: -p.j - p.b,
            k: -p.k,
            m: -p.m,
            a: p.a + 1,
            b: p.b,
        };
        trace.push(TraceStep::new("mirror", inner));
        let (q, inner_trace) = reduce_parameters_traced(inner, &flipped)?;
        trace.extend(inner_trace);
        let out = ReductionParams {
            i: -q.i - p.a,
            j: -q.j - p.b,
            k: -q.k,
            m: -q.m,
            a: p.a,
            b: p.b,
        };
        trace.push(TraceStep::new("unmirror", out));
        return Ok((out, trace));
    }
    let ReductionParams { mut i, mut j, mut k, mut m, a, b } = p;
    let g = g_bound(a, b, ctx);
    while m >= g {
        let stage;
        if min_over_window(|ic, jd| v1(ic, jd + 2, k, m - 2, ctx), i, j, a, b) >= 0 {
            j += 2;
            stage = "v1";
        } else {
            i += 2;
            j += 6;
            stage = "v2";
        }
        m -= 2;
        trace.push(TraceStep::new(stage, ReductionParams { i, j, k, m, a, b }));
    }
    while m <= -g {
        let stage;
        if min_over_window(|ic, jd| w1(ic - 2, jd - 6, k, m + 2, ctx), i, j, a, b) >= 0 {
            i -= 2;
            j -= 6;
            stage = "w1";
        } else {
            j -= 2;
            stage = "w2";
        }
        m += 2;
        trace.push(TraceStep::new(stage, ReductionParams { i, j, k, m, a, b }));
    }
    // h_bound is at least 8 whatever the merge produces, so small k skips it.
    if k >= 8 {
        let spans = merged_spans(ctx, m)?;
        let h = h_bound(a, spans);
        while Rat::int(k) >= h {
            let stage;
            if i > spans.h_max - (4 * (k - 3)).div_euclid(3) {
                j += 6;
                stage = "iso3";
            } else {
                i += 4;
                j += 12;
                stage = "iso4";
            }
            k -= 3;
            trace.push(TraceStep::new(stage, ReductionParams { i, j, k, m, a, b }));
        }
    }
    Ok((ReductionParams { i, j, k, m, a, b }, trace))
}

/// Integers strictly between two exact bounds.
fn ints_strictly_between(lo: Rat, hi: Rat) -> BTreeSet<i64> {
    let mut out = BTreeSet::new();
    if lo >= hi {
        return out;
    }
    for t in lo.floor()..=hi.floor() + 1 {
        if Rat::int(t) > lo && Rat::int(t) < hi {
            out.insert(t);
        }
    }
    out
}

/// The finite index sets `(K, M)`: every reduced `m` lands in `M`, and `K`
/// is the printed window between the two `k`-thresholds, taken with the
/// merged tangle at the largest member of `M`. The printed window is empty
/// whenever the threshold grows with the window size, so membership of the
/// reduced `k` is checked empirically, not assumed.
pub fn index_sets(a: i64, b: i64, ctx: &DiagramContext) -> Result<(BTreeSet<i64>, BTreeSet<i64>)> {
    if a < 0 || b < 0 {
        return Err(Error::Invariant(format!("negative window sizes a={a} b={b}")));
    }
    let gm = g_bound(a + 1, b, ctx);
    let ms: BTreeSet<i64> = (-(gm - 1)..=gm - 1).collect();
    let max_m = gm - 1;
    let spans = merged_spans(ctx, max_m)?;
    let ks = ints_strictly_between(h_bound(a + 1, spans), h_bound(a, spans));
    Ok((ks, ms))
}

/// Report where a reduced tuple leaves the printed index sets.
pub fn index_escape(
    p: &ReductionParams,
    ks: &BTreeSet<i64>,
    ms: &BTreeSet<i64>,
) -> Option<String> {
    if !ms.contains(&p.m) {
        return Some(format!("m2={} escapes M of size {}", p.m, ms.len()));
    }
    if !ks.contains(&p.k) {
        return Some(format!("k2={} escapes the printed K of size {}", p.k, ks.len()));
    }
    None
}

/// The braid word `(σ1σ2)^k σ1^m` on three strands.
pub fn two_parameter_word(k: i64, m: i64) -> Result<BraidWord> {
    full_twist_block(k)?.concat(&BraidWord::generator_power(3, 1, m)?)
}

/// `(σ1σ2)^k` on three strands; negative `k` inverts the block.
fn full_twist_block(k: i64) -> Result<BraidWord> {
    let step = if k >= 0 {
        BraidWord::generator_power(3, 1, 1)?.concat(&BraidWord::generator_power(3, 2, 1)?)?
    } else {
        BraidWord::generator_power(3, 2, -1)?.concat(&BraidWord::generator_power(3, 1, -1)?)?
    };
    let mut word = BraidWord::new(3, Vec::new())?;
    for _ in 0..k.unsigned_abs() {
        word = word.concat(&step)?;
    }
    Ok(word)
}

/// A named two-parameter family of 3-braid closures.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Family {
    /// The finite check list for the locally thin families: `(σ1σ2)^k` for
    /// `k = -2..7` and `(σ1σ2)^{3k'+1} σ1` for `k' = 0..2`.
    Omega03,
    /// `(σ1σ2)^{3k} σ1^{-m}`.
    Omega4,
    /// `(σ1σ2)^{3k} σ2^{m}`.
    Omega5,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Omega03 => "omega0-3",
            Family::Omega4 => "omega4",
            Family::Omega5 => "omega5",
        }
    }

    pub fn parse(s: &str) -> Result<Family> {
        match s {
            "omega0-3" | "omega03" => Ok(Family::Omega03),
            "omega4" => Ok(Family::Omega4),
            "omega5" => Ok(Family::Omega5),
            other => Err(Error::Parse(format!(
                "unknown family {other:?}; expected omega0-3, omega4 or omega5"
            ))),
        }
    }

    /// The braid word of the family member at `(k, m)`.
    pub fn word(&self, k: i64, m: i64) -> Result<BraidWord> {
        match self {
            Family::Omega03 => two_parameter_word(k, m),
            Family::Omega4 => two_parameter_word(3 * k, -m),
            Family::Omega5 => {
                full_twist_block(3 * k)?.concat(&BraidWord::generator_power(3, 2, m)?)
            }
        }
    }

    /// The `(k, m)` pairs of the window that belong to the family.
    pub fn pairs(&self, w: ScanWindow) -> Vec<(i64, i64)> {
        let in_window =
            |k: i64, m: i64| k >= w.k_min && k <= w.k_max && m >= w.m_min && m <= w.m_max;
        match self {
            Family::Omega03 => {
                let mut out: Vec<(i64, i64)> = (-2..=7).map(|k| (k, 0)).collect();
                out.extend([1, 4, 7].map(|k| (k, 1)));
                out.sort();
                out.retain(|&(k, m)| in_window(k, m));
                out
            }
            Family::Omega4 | Family::Omega5 => {
                let mut out = Vec::new();
                for k in w.k_min..=w.k_max {
                    for m in w.m_min..=w.m_max {
                        out.push((k, m));
                    }
                }
                out
            }
        }
    }
}

/// Window of `(k, m)` pairs for a family scan.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ScanWindow {
    pub k_min: i64,
    pub k_max: i64,
    pub m_min: i64,
    pub m_max: i64,
}

/// One scanned link: its parameters, braid word, and the distinct torsion
/// orders of its homology. A row whose computation exceeded the cell budget
/// is kept with `skipped` set instead of being dropped.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct TorsionRow {
    pub family: String,
    pub k: i64,
    pub m: i64,
    pub braid: String,
    pub torsion_orders: Vec<i64>,
    pub max_order: i64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub skipped: bool,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct TorsionAggregate {
    #[serde(rename = "only_Z2")]
    pub only_z2: bool,
    pub checked: usize,
    pub skipped: usize,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct TorsionReport {
    pub rows: Vec<TorsionRow>,
    pub aggregate: TorsionAggregate,
}

impl TorsionReport {
    fn aggregate_of(rows: &[TorsionRow]) -> TorsionAggregate {
        let skipped = rows.iter().filter(|r| r.skipped).count();
        let only_z2 = rows
            .iter()
            .filter(|r| !r.skipped)
            .all(|r| r.torsion_orders.iter().all(|&t| t == 2));
        TorsionAggregate { only_z2, checked: rows.len() - skipped, skipped }
    }

    pub fn check_consistent(&self) -> Result<()> {
        if Self::aggregate_of(&self.rows) == self.aggregate {
            Ok(())
        } else {
            Err(Error::Invariant("report aggregate disagrees with rows".into()))
        }
    }
}

static HOMOLOGY_CACHE: Lazy<Mutex<BTreeMap<String, HomologyTable>>> =
    Lazy::new(|| Mutex::new(BTreeMap::new()));

/// Homology of a braid closure, memoized per word and budget.
pub fn cached_homology(w: &BraidWord, budget: usize) -> Result<HomologyTable> {
    let key = format!("{w}@{budget}");
    if let Some(t) = HOMOLOGY_CACHE.lock().unwrap().get(&key) {
        return Ok(t.clone());
    }
    let t = khovanov_homology_with_budget(w, budget)?;
    HOMOLOGY_CACHE.lock().unwrap().insert(key, t.clone());
    Ok(t)
}

/// Scan a family window, computing full integral homology per link in
/// parallel. Budget overruns become skipped rows; other failures abort.
pub fn scan_family(family: Family, window: ScanWindow) -> Result<TorsionReport> {
    scan_family_with_budget(family, window, DEFAULT_CELL_BUDGET)
}

pub fn scan_family_with_budget(
    family: Family,
    window: ScanWindow,
    budget: usize,
) -> Result<TorsionReport> {
    let rows: Vec<TorsionRow> = family
        .pairs(window)
        .into_par_iter()
        .map(|(k, m)| scan_one(family, k, m, budget))
        .collect::<Result<_>>()?;
    let aggregate = TorsionReport::aggregate_of(&rows);
    Ok(TorsionReport { rows, aggregate })
}

fn scan_one(family: Family, k: i64, m: i64, budget: usize) -> Result<TorsionRow> {
    let word = family.word(k, m)?;
    let mut row = TorsionRow {
        family: family.name().to_string(),
        k,
        m,
        braid: word.to_string(),
        torsion_orders: Vec::new(),
        max_order: 1,
        skipped: false,
    };
    match cached_homology(&word, budget) {
        Ok(table) => {
            row.torsion_orders = table
                .torsion_factors()
                .iter()
                .map(|t| t.to_i64().unwrap_or(i64::MAX))
                .collect();
            row.max_order = row.torsion_orders.iter().copied().max().unwrap_or(1);
            Ok(row)
        }
        Err(Error::Budget(_)) => {
            row.max_order = 0;
            row.skipped = true;
            Ok(row)
        }
        Err(e) => Err(e),
    }
}
