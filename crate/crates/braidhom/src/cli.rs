//! Command-line front end: braid-expression parsing, subcommand dispatch,
//! deterministic JSON/CSV emission, and structured error reporting.
//!
//! Subcommands: `homology` (full pipeline table), `morse` (minimal complex
//! with cells and differential entries), `reduce` (parameter-reduction trace
//! and index sets), `scan` (torsion report over a family window), `oracle`
//! (direct state-sum homology) and `jones` (Kauffman bracket vs. graded
//! Euler characteristic).
//!
//! CSV output is line-oriented: `homology`/`oracle` use columns
//! `i,j,free,torsion` (torsion factors joined by `;`), `morse` emits
//! `cell,...` and `entry,...` records, `reduce` one `stage,i,j,k,m,a,b` row
//! per move, `scan` one row per link. Failures print a single-line error
//! JSON to stderr and exit 2 (parse), 3 (budget) or 4 (internal).

use crate::cob::DottedMorphism;
use crate::cube::{deloop, BasedComplex, BraidLetter, BraidWord};
use crate::homology::{
    apply_tqft, homology_of_free, kauffman_bracket_jones, khovanov_direct,
    khovanov_homology_with_budget, HomologyTable, LaurentPoly,
};
use crate::morse::gaussian_eliminate;
use crate::planar::{
    close_complex, reduced_complex_with_budget, PlanarArcDiagram, TangleExpr, DEFAULT_CELL_BUDGET,
};
use crate::reduce::{
    index_escape, index_sets, reduce_parameters_traced, scan_family_with_budget, DiagramContext,
    Family, ReductionParams, ScanWindow, TorsionReport, TraceStep,
};
use crate::{Error, Result};
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;

/// Abstract syntax of a braid expression: atoms `s<k>` and `s<k>'`,
/// concatenation, and parenthesized integer powers.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum BraidExpr {
    Atom { index: usize, inverse: bool },
    Power(Box<BraidExpr>, i64),
    Seq(Vec<BraidExpr>),
}

/// Cap on the flattened length of a braid expression, so that nested powers
/// cannot blow up memory before the crossing budget is even consulted.
pub const MAX_EXPR_LETTERS: usize = 1 << 20;

impl BraidExpr {
    /// Flatten to generator letters. A power repeats its body; a negative
    /// exponent repeats the reversed word of inverses.
    pub fn letters(&self) -> Result<Vec<BraidLetter>> {
        let mut out = Vec::new();
        self.push_letters(&mut out)?;
        Ok(out)
    }

    fn push_letters(&self, out: &mut Vec<BraidLetter>) -> Result<()> {
        match self {
            BraidExpr::Atom { index, inverse } => {
                if out.len() >= MAX_EXPR_LETTERS {
                    return Err(Error::Budget(format!(
                        "braid expression exceeds {MAX_EXPR_LETTERS} letters"
                    )));
                }
                out.push(BraidLetter { index: *index, inverse: *inverse });
                Ok(())
            }
            BraidExpr::Seq(parts) => {
                for p in parts {
                    p.push_letters(out)?;
                }
                Ok(())
            }
            BraidExpr::Power(body, n) => {
                let mut block = Vec::new();
                body.push_letters(&mut block)?;
                if *n < 0 {
                    block.reverse();
                    for l in &mut block {
                        l.inverse = !l.inverse;
                    }
                }
                for _ in 0..n.unsigned_abs() {
                    if out.len() + block.len() > MAX_EXPR_LETTERS {
                        return Err(Error::Budget(format!(
                            "braid expression exceeds {MAX_EXPR_LETTERS} letters"
                        )));
                    }
                    out.extend_from_slice(&block);
                }
                Ok(())
            }
        }
    }

    /// Largest generator index named anywhere in the expression, including
    /// under a zero exponent; this fixes the strand count.
    pub fn max_index(&self) -> usize {
        match self {
            BraidExpr::Atom { index, .. } => *index,
            BraidExpr::Seq(parts) => parts.iter().map(|p| p.max_index()).max().unwrap_or(0),
            BraidExpr::Power(body, _) => body.max_index(),
        }
    }

    /// Interpret the expression in the smallest braid group containing every
    /// named generator. Generator index 0 is rejected here.
    pub fn to_braid_word(&self) -> Result<BraidWord> {
        let strands = self.max_index().max(1) + 1;
        BraidWord::new(strands, self.letters()?)
    }
}

impl fmt::Display for BraidExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BraidExpr::Atom { index, inverse } => {
                write!(f, "s{index}{}", if *inverse { "'" } else { "" })
            }
            BraidExpr::Power(body, n) => write!(f, "({body})^{n}"),
            BraidExpr::Seq(parts) => {
                for (k, p) in parts.iter().enumerate() {
                    if k > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{p}")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Tok {
    LParen,
    RParen,
    Caret,
    Int(i64),
    Gen { index: usize, inverse: bool },
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut p = 0;
    while p < bytes.len() {
        let c = bytes[p] as char;
        if c.is_whitespace() {
            p += 1;
            continue;
        }
        let start = p;
        match c {
            '(' => {
                toks.push((start, Tok::LParen));
                p += 1;
            }
            ')' => {
                toks.push((start, Tok::RParen));
                p += 1;
            }
            '^' => {
                toks.push((start, Tok::Caret));
                p += 1;
            }
            's' => {
                p += 1;
                let digits = p;
                while p < bytes.len() && bytes[p].is_ascii_digit() {
                    p += 1;
                }
                if p == digits {
                    return Err(Error::Parse(format!(
                        "expected digits after 's' at byte {start}"
                    )));
                }
                let index: usize = text[digits..p].parse().map_err(|_| {
                    Error::Parse(format!("generator index out of range at byte {start}"))
                })?;
                let inverse = p < bytes.len() && bytes[p] == b'\'';
                if inverse {
                    p += 1;
                }
                toks.push((start, Tok::Gen { index, inverse }));
            }
            '-' | '0'..='9' => {
                p += 1;
                while p < bytes.len() && bytes[p].is_ascii_digit() {
                    p += 1;
                }
                let n: i64 = text[start..p]
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad integer at byte {start}")))?;
                toks.push((start, Tok::Int(n)));
            }
            _ => {
                return Err(Error::Parse(format!(
                    "unexpected character {c:?} at byte {start}"
                )))
            }
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    toks: &'a [(usize, Tok)],
    pos: usize,
    end: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<(usize, Tok)> {
        self.toks.get(self.pos).copied()
    }

    fn here(&self) -> usize {
        self.peek().map(|(at, _)| at).unwrap_or(self.end)
    }

    // expr := term+
    fn expr(&mut self) -> Result<BraidExpr> {
        let mut terms = Vec::new();
        while let Some((_, tok)) = self.peek() {
            if tok == Tok::RParen {
                break;
            }
            terms.push(self.term()?);
        }
        match terms.len() {
            0 => Err(Error::Parse(format!("expected a term at byte {}", self.here()))),
            1 => Ok(terms.pop().unwrap()),
            _ => Ok(BraidExpr::Seq(terms)),
        }
    }

    // term := atom | '(' expr ')' '^' INT
    fn term(&mut self) -> Result<BraidExpr> {
        let (at, tok) = self.peek().expect("term called at end of input");
        match tok {
            Tok::Gen { index, inverse } => {
                self.pos += 1;
                Ok(BraidExpr::Atom { index, inverse })
            }
            Tok::LParen => {
                self.pos += 1;
                let body = self.expr()?;
                match self.peek() {
                    Some((_, Tok::RParen)) => self.pos += 1,
                    _ => {
                        return Err(Error::Parse(format!(
                            "expected ')' at byte {}",
                            self.here()
                        )))
                    }
                }
                match self.peek() {
                    Some((_, Tok::Caret)) => self.pos += 1,
                    _ => {
                        return Err(Error::Parse(format!(
                            "expected '^' at byte {}",
                            self.here()
                        )))
                    }
                }
                match self.peek() {
                    Some((_, Tok::Int(n))) => {
                        self.pos += 1;
                        Ok(BraidExpr::Power(Box::new(body), n))
                    }
                    _ => Err(Error::Parse(format!(
                        "expected an integer exponent at byte {}",
                        self.here()
                    ))),
                }
            }
            _ => Err(Error::Parse(format!("unexpected token at byte {at}"))),
        }
    }
}

/// Parse the braid-expression surface syntax. Grammar: `expr := term+`,
/// `term := atom | '(' expr ')' '^' INT`, `atom := 's' INT ['\'']`. Integers
/// may be negative only as exponents; syntax errors carry byte positions,
/// and strand indices are validated at flatten time.
pub fn parse_braid(text: &str) -> Result<BraidExpr> {
    let toks = lex(text)?;
    let mut p = Parser { toks: &toks, pos: 0, end: text.len() };
    let e = p.expr()?;
    if let Some((at, _)) = p.peek() {
        return Err(Error::Parse(format!("unexpected token at byte {at}")));
    }
    Ok(e)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Command {
    Homology,
    Morse,
    Reduce,
    Scan,
    Oracle,
    Jones,
}

impl Command {
    pub fn parse(s: &str) -> Result<Command> {
        match s {
            "homology" => Ok(Command::Homology),
            "morse" => Ok(Command::Morse),
            "reduce" => Ok(Command::Reduce),
            "scan" => Ok(Command::Scan),
            "oracle" => Ok(Command::Oracle),
            "jones" => Ok(Command::Jones),
            _ => Err(Error::Parse(format!("unknown subcommand {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Format {
    Json,
    Csv,
}

/// Parsed command-line configuration shared by all subcommands.
#[derive(Clone, Debug)]
pub struct JobConfig {
    pub braid: Option<String>,
    pub closure: bool,
    pub diagram: Option<PathBuf>,
    pub format: Format,
    pub budget: usize,
    pub threads: Option<usize>,
    pub window: Option<ScanWindow>,
    pub out: Option<PathBuf>,
    pub family: Option<Family>,
    pub i: Option<i64>,
    pub j: Option<i64>,
    pub k: Option<i64>,
    pub m: Option<i64>,
    pub a: Option<i64>,
    pub b: Option<i64>,
}

impl Default for JobConfig {
    fn default() -> JobConfig {
        JobConfig {
            braid: None,
            closure: false,
            diagram: None,
            format: Format::Json,
            budget: DEFAULT_CELL_BUDGET,
            threads: None,
            window: None,
            out: None,
            family: None,
            i: None,
            j: None,
            k: None,
            m: None,
            a: None,
            b: None,
        }
    }
}

fn flag_value<'a>(it: &mut std::slice::Iter<'a, String>, flag: &str) -> Result<&'a str> {
    it.next()
        .map(|s| s.as_str())
        .ok_or_else(|| Error::Parse(format!("{flag} needs a value")))
}

fn flag_int(it: &mut std::slice::Iter<'_, String>, flag: &str) -> Result<i64> {
    let v = flag_value(it, flag)?;
    v.parse()
        .map_err(|_| Error::Parse(format!("{flag} needs an integer, got {v:?}")))
}

/// Parse `<subcommand> [flags...]` into a command and its configuration.
pub fn parse_args(args: &[String]) -> Result<(Command, JobConfig)> {
    let cmd = Command::parse(
        args.first()
            .ok_or_else(|| {
                Error::Parse(
                    "missing subcommand: homology|morse|reduce|scan|oracle|jones".into(),
                )
            })?
            .as_str(),
    )?;
    let mut cfg = JobConfig::default();
    let mut it = args[1..].iter();
    while let Some(flag) = it.next() {
        match flag.as_str() {
            "--braid" => cfg.braid = Some(flag_value(&mut it, "--braid")?.to_string()),
            "--closure" => cfg.closure = true,
            "--diagram" => cfg.diagram = Some(PathBuf::from(flag_value(&mut it, "--diagram")?)),
            "--format" => {
                cfg.format = match flag_value(&mut it, "--format")? {
                    "json" => Format::Json,
                    "csv" => Format::Csv,
                    other => {
                        return Err(Error::Parse(format!(
                            "--format must be json or csv, got {other:?}"
                        )))
                    }
                }
            }
            "--budget" => {
                let n = flag_int(&mut it, "--budget")?;
                if n <= 0 {
                    return Err(Error::Parse("--budget must be positive".into()));
                }
                cfg.budget = n as usize;
            }
            "--threads" => {
                let n = flag_int(&mut it, "--threads")?;
                if n <= 0 {
                    return Err(Error::Parse("--threads must be positive".into()));
                }
                cfg.threads = Some(n as usize);
            }
            "--window" => {
                let k_min = flag_int(&mut it, "--window")?;
                let k_max = flag_int(&mut it, "--window")?;
                let m_min = flag_int(&mut it, "--window")?;
                let m_max = flag_int(&mut it, "--window")?;
                cfg.window = Some(ScanWindow { k_min, k_max, m_min, m_max });
            }
            "--out" => cfg.out = Some(PathBuf::from(flag_value(&mut it, "--out")?)),
            "--family" => cfg.family = Some(Family::parse(flag_value(&mut it, "--family")?)?),
            "--i" => cfg.i = Some(flag_int(&mut it, "--i")?),
            "--j" => cfg.j = Some(flag_int(&mut it, "--j")?),
            "--k" => cfg.k = Some(flag_int(&mut it, "--k")?),
            "--m" => cfg.m = Some(flag_int(&mut it, "--m")?),
            "--a" => cfg.a = Some(flag_int(&mut it, "--a")?),
            "--b" => cfg.b = Some(flag_int(&mut it, "--b")?),
            other => return Err(Error::Parse(format!("unknown flag {other:?}"))),
        }
    }
    Ok((cmd, cfg))
}

enum InputSource {
    Braid(BraidWord),
    Diagram(TangleExpr),
}

fn input_source(cfg: &JobConfig) -> Result<InputSource> {
    match (&cfg.braid, &cfg.diagram) {
        (Some(_), Some(_)) => {
            Err(Error::Parse("give either --braid or --diagram, not both".into()))
        }
        (Some(text), None) => Ok(InputSource::Braid(parse_braid(text)?.to_braid_word()?)),
        (None, Some(path)) => {
            let data = std::fs::read_to_string(path)?;
            let t: TangleExpr = serde_json::from_str(&data)
                .map_err(|e| Error::Parse(format!("diagram file: {e}")))?;
            Ok(InputSource::Diagram(t))
        }
        (None, None) => Err(Error::Parse("missing input: --braid or --diagram".into())),
    }
}

fn braid_input(cfg: &JobConfig, cmd: &str) -> Result<BraidWord> {
    match input_source(cfg)? {
        InputSource::Braid(w) => Ok(w),
        InputSource::Diagram(_) => {
            Err(Error::Parse(format!("{cmd} takes a braid closure, not --diagram")))
        }
    }
}

#[derive(Serialize)]
struct GroupRow {
    i: i32,
    j: i64,
    free: usize,
    torsion: Vec<i64>,
}

#[derive(Serialize)]
struct GroupsDoc {
    groups: Vec<GroupRow>,
}

fn group_rows(table: &HomologyTable) -> Result<Vec<GroupRow>> {
    let mut rows = Vec::new();
    for (&(i, j), g) in &table.groups {
        if g.rank == 0 && g.torsion.is_empty() {
            continue;
        }
        let mut torsion = g
            .torsion
            .iter()
            .map(|t| {
                t.to_i64()
                    .ok_or_else(|| Error::Invariant(format!("torsion order {t} exceeds i64")))
            })
            .collect::<Result<Vec<_>>>()?;
        torsion.sort_unstable();
        rows.push(GroupRow { i, j, free: g.rank, torsion });
    }
    Ok(rows)
}

fn to_pretty<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)
        .map_err(|e| Error::Invariant(format!("serialization: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn join_i64(xs: &[i64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn render_homology(table: &HomologyTable, format: Format) -> Result<String> {
    let rows = group_rows(table)?;
    match format {
        Format::Json => to_pretty(&GroupsDoc { groups: rows }),
        Format::Csv => {
            let mut out = String::from("i,j,free,torsion\n");
            for r in rows {
                out.push_str(&format!("{},{},{},{}\n", r.i, r.j, r.free, join_i64(&r.torsion)));
            }
            Ok(out)
        }
    }
}

/// Render a differential entry as a sum of dotted cobordisms. Each generator
/// prints its components `(dom pieces|cod pieces)` with one `*` per dot; the
/// identity of the empty tangle prints as `[]`.
pub fn render_morphism(m: &DottedMorphism) -> String {
    if m.is_zero() {
        return "0".into();
    }
    let mut out = String::new();
    for (n, (gen, coeff)) in m.terms().enumerate() {
        if n == 0 {
            if coeff < 0 {
                out.push('-');
            }
        } else {
            out.push_str(if coeff < 0 { " - " } else { " + " });
        }
        let mag = coeff.unsigned_abs();
        if mag != 1 {
            out.push_str(&mag.to_string());
        }
        out.push('[');
        for (ci, comp) in gen.components().iter().enumerate() {
            if ci > 0 {
                out.push(' ');
            }
            out.push('(');
            push_pieces(&mut out, &comp.dom);
            out.push('|');
            push_pieces(&mut out, &comp.cod);
            out.push(')');
            for _ in 0..comp.dots {
                out.push('*');
            }
        }
        out.push(']');
    }
    out
}

fn push_pieces(out: &mut String, pieces: &std::collections::BTreeSet<usize>) {
    if pieces.is_empty() {
        out.push('-');
        return;
    }
    for (n, p) in pieces.iter().enumerate() {
        if n > 0 {
            out.push(' ');
        }
        out.push_str(&p.to_string());
    }
}

#[derive(Serialize)]
struct CellRow {
    h: i32,
    q: i64,
    id: String,
    object: String,
}

#[derive(Serialize)]
struct EntryRow {
    from_h: i32,
    from_id: String,
    to_h: i32,
    to_id: String,
    morphism: String,
}

#[derive(Serialize)]
struct MorseDoc {
    cells: Vec<CellRow>,
    entries: Vec<EntryRow>,
}

fn morse_doc(c: &BasedComplex) -> MorseDoc {
    let cells = c
        .cells()
        .map(|(r, d)| CellRow { h: r.0, q: d.qshift, id: r.1.clone(), object: d.object.to_string() })
        .collect();
    let mut entries = Vec::new();
    for (r, _) in c.cells() {
        for (tgt, m) in c.outgoing(r) {
            entries.push(EntryRow {
                from_h: r.0,
                from_id: r.1.clone(),
                to_h: tgt.0,
                to_id: tgt.1.clone(),
                morphism: render_morphism(m),
            });
        }
    }
    MorseDoc { cells, entries }
}

fn morse_complex_for(cfg: &JobConfig) -> Result<BasedComplex> {
    let c = match input_source(cfg)? {
        InputSource::Braid(w) => {
            let open = reduced_complex_with_budget(&TangleExpr::Braid(w.clone()), cfg.budget)?;
            if cfg.closure {
                close_complex(&open, w.strands())?
            } else {
                open
            }
        }
        InputSource::Diagram(t) => reduced_complex_with_budget(&t, cfg.budget)?,
    };
    gaussian_eliminate(&deloop(&c)?)
}

fn render_morse(c: &BasedComplex, format: Format) -> Result<String> {
    let doc = morse_doc(c);
    match format {
        Format::Json => to_pretty(&doc),
        Format::Csv => {
            let mut out = String::new();
            for r in &doc.cells {
                out.push_str(&format!(
                    "cell,{},{},{},{}\n",
                    r.h,
                    r.q,
                    csv_field(&r.id),
                    csv_field(&r.object)
                ));
            }
            for e in &doc.entries {
                out.push_str(&format!(
                    "entry,{},{},{},{},{}\n",
                    e.from_h,
                    csv_field(&e.from_id),
                    e.to_h,
                    csv_field(&e.to_id),
                    csv_field(&e.morphism)
                ));
            }
            Ok(out)
        }
    }
}

fn jones_pairs(p: &LaurentPoly) -> Vec<(i64, i64)> {
    p.terms().collect()
}

#[derive(Serialize)]
struct JonesDoc {
    kauffman: Vec<(i64, i64)>,
    euler: Vec<(i64, i64)>,
    difference: Vec<(i64, i64)>,
    #[serde(rename = "match")]
    matches: bool,
}

fn jones_doc(cfg: &JobConfig) -> Result<JonesDoc> {
    let w = braid_input(cfg, "jones")?;
    let kauffman = kauffman_bracket_jones(&w)?;
    let table = khovanov_homology_with_budget(&w, cfg.budget)?;
    let euler = table.graded_euler_characteristic();
    let mut difference = LaurentPoly::from_pairs(kauffman.terms());
    for (e, c) in euler.terms() {
        difference.add_term(-c, e);
    }
    Ok(JonesDoc {
        kauffman: jones_pairs(&kauffman),
        euler: jones_pairs(&euler),
        matches: difference.is_zero(),
        difference: jones_pairs(&difference),
    })
}

fn render_jones(doc: &JonesDoc, format: Format) -> Result<String> {
    match format {
        Format::Json => to_pretty(doc),
        Format::Csv => {
            let mut out = String::from("poly,exp,coeff\n");
            for (name, terms) in [
                ("kauffman", &doc.kauffman),
                ("euler", &doc.euler),
                ("difference", &doc.difference),
            ] {
                for &(e, c) in terms.iter() {
                    out.push_str(&format!("{name},{e},{c}\n"));
                }
            }
            Ok(out)
        }
    }
}

#[derive(Serialize)]
struct ReduceDoc {
    input: ReductionParams,
    trace: Vec<TraceStep>,
    result: ReductionParams,
    m_min: Option<i64>,
    m_max: Option<i64>,
    k_set: Vec<i64>,
    escape: Option<String>,
}

#[derive(Deserialize)]
struct ContextFile {
    diagram: PlanarArcDiagram,
    tangle: TangleExpr,
}

fn reduce_context(cfg: &JobConfig) -> Result<DiagramContext> {
    match (&cfg.family, &cfg.diagram) {
        (Some(Family::Omega4), None) => Ok(DiagramContext::omega4()),
        (Some(Family::Omega5), None) => Ok(DiagramContext::omega5()),
        (Some(Family::Omega03), None) => {
            Err(Error::Parse("family omega0-3 has no two-parameter reduction context".into()))
        }
        (None, Some(path)) => {
            let data = std::fs::read_to_string(path)?;
            let file: ContextFile = serde_json::from_str(&data)
                .map_err(|e| Error::Parse(format!("context file: {e}")))?;
            DiagramContext::new(file.diagram, file.tangle)
        }
        _ => Err(Error::Parse(
            "reduce needs --family omega4|omega5 or a --diagram context file".into(),
        )),
    }
}

fn need(v: Option<i64>, flag: &str) -> Result<i64> {
    v.ok_or_else(|| Error::Parse(format!("reduce needs {flag}")))
}

fn reduce_doc(cfg: &JobConfig) -> Result<ReduceDoc> {
    let ctx = reduce_context(cfg)?;
    let input = ReductionParams {
        i: need(cfg.i, "--i")?,
        j: need(cfg.j, "--j")?,
        k: need(cfg.k, "--k")?,
        m: need(cfg.m, "--m")?,
        a: cfg.a.unwrap_or(0),
        b: cfg.b.unwrap_or(0),
    };
    let (result, trace) = reduce_parameters_traced(input, &ctx)?;
    let (ks, ms) = index_sets(input.a, input.b, &ctx)?;
    let escape = index_escape(&result, &ks, &ms);
    Ok(ReduceDoc {
        input,
        trace,
        result,
        m_min: ms.first().copied(),
        m_max: ms.last().copied(),
        k_set: ks.into_iter().collect(),
        escape,
    })
}

fn render_reduce(doc: &ReduceDoc, format: Format) -> Result<String> {
    match format {
        Format::Json => to_pretty(doc),
        Format::Csv => {
            let mut out = String::from("stage,i,j,k,m,a,b\n");
            let row = |stage: &str, p: &ReductionParams| {
                format!("{stage},{},{},{},{},{},{}\n", p.i, p.j, p.k, p.m, p.a, p.b)
            };
            out.push_str(&row("input", &doc.input));
            for step in &doc.trace {
                out.push_str(&row(&step.stage, &step.params));
            }
            out.push_str(&row("result", &doc.result));
            Ok(out)
        }
    }
}

fn scan_report(cfg: &JobConfig) -> Result<TorsionReport> {
    let family = cfg
        .family
        .ok_or_else(|| Error::Parse("scan needs --family omega0-3|omega4|omega5".into()))?;
    let window = cfg
        .window
        .ok_or_else(|| Error::Parse("scan needs --window kmin kmax mmin mmax".into()))?;
    scan_family_with_budget(family, window, cfg.budget)
}

fn render_scan(report: &TorsionReport, format: Format) -> Result<String> {
    match format {
        Format::Json => to_pretty(report),
        Format::Csv => {
            let mut out = String::from("family,k,m,braid,torsion_orders,max_order,skipped\n");
            for r in &report.rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    r.family,
                    r.k,
                    r.m,
                    csv_field(&r.braid),
                    join_i64(&r.torsion_orders),
                    r.max_order,
                    r.skipped
                ));
            }
            Ok(out)
        }
    }
}

/// Produce the full output text for a parsed command. Pure: no file or
/// stdout side effects, so identical configs yield identical bytes.
pub fn render_command(cmd: Command, cfg: &JobConfig) -> Result<String> {
    match cmd {
        Command::Homology => {
            let table = match input_source(cfg)? {
                InputSource::Braid(w) => {
                    if !cfg.closure {
                        return Err(Error::Parse(
                            "homology needs --closure with a braid input".into(),
                        ));
                    }
                    khovanov_homology_with_budget(&w, cfg.budget)?
                }
                InputSource::Diagram(t) => {
                    if t.boundary_points() != 0 {
                        return Err(Error::Parse("homology needs a closed diagram".into()));
                    }
                    let c = reduced_complex_with_budget(&t, cfg.budget)?;
                    homology_of_free(&apply_tqft(&c)?)
                }
            };
            render_homology(&table, cfg.format)
        }
        Command::Oracle => {
            let w = braid_input(cfg, "oracle")?;
            render_homology(&khovanov_direct(&w)?, cfg.format)
        }
        Command::Morse => render_morse(&morse_complex_for(cfg)?, cfg.format),
        Command::Jones => render_jones(&jones_doc(cfg)?, cfg.format),
        Command::Reduce => render_reduce(&reduce_doc(cfg)?, cfg.format),
        Command::Scan => render_scan(&scan_report(cfg)?, cfg.format),
    }
}

fn emit(cfg: &JobConfig, text: &str) -> Result<()> {
    match &cfg.out {
        Some(path) => Ok(std::fs::write(path, text.as_bytes())?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn try_run(args: &[String]) -> Result<()> {
    let (cmd, cfg) = parse_args(args)?;
    if let Some(t) = cfg.threads {
        // Ignore failure: the global pool can only be set once per process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let text = render_command(cmd, &cfg)?;
    emit(&cfg, &text)
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Parse(_) => "parse",
        Error::Budget(_) => "budget",
        Error::Invariant(_) => "invariant",
        Error::Mismatch(_) => "mismatch",
        Error::Io(_) => "io",
    }
}

/// Single-line machine-readable error record printed to stderr on failure.
pub fn error_json(e: &Error) -> String {
    serde_json::json!({
        "error": { "exit": e.exit_code(), "kind": error_kind(e), "message": e.to_string() }
    })
    .to_string()
}

/// Entry point for the binary: returns the process exit code (0 ok, 2 parse
/// error, 3 budget exceeded, 4 internal invariant violation).
pub fn run(args: Vec<String>) -> i32 {
    match try_run(&args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planar::closure;
    use serde_json::{json, Value};

    fn args(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn render(xs: &[&str]) -> Result<String> {
        let (cmd, cfg) = parse_args(&args(xs))?;
        render_command(cmd, &cfg)
    }

    fn word_of(text: &str) -> BraidWord {
        parse_braid(text).unwrap().to_braid_word().unwrap()
    }

    #[test]
    fn parse_atom_sequence() {
        let w = word_of("s1 s2 s2' s1 s2 s1'");
        assert_eq!(w.strands(), 3);
        assert_eq!(w.to_string(), "s1 s2 s2' s1 s2 s1'");
        assert_eq!(w.n_minus(), 4);
        assert_eq!(w.n_plus(), 2);
    }

    #[test]
    fn parse_powers() {
        assert_eq!(word_of("(s1 s2)^3").to_string(), "s1 s2 s1 s2 s1 s2");
        assert_eq!(word_of("(s1)^-2").to_string(), "s1' s1'");
        assert_eq!(word_of("(s1)^0").to_string(), "e2");
        assert_eq!(word_of("(s1 s2')^-2").to_string(), "s2 s1' s2 s1'");
        assert_eq!(word_of("((s1)^2)^-3").to_string(), "s1' s1' s1' s1' s1' s1'");
    }

    #[test]
    fn parse_errors_carry_positions() {
        for text in ["", "s", "(s1 s2)", "(s1)^", "s1 ) s2", "x1", "s1^2", "-2", "(s1)^x"] {
            let err = parse_braid(text).err().unwrap_or_else(|| {
                panic!("expected parse failure for {text:?}");
            });
            assert_eq!(err.exit_code(), 2, "wrong error for {text:?}: {err}");
            assert!(err.to_string().contains("byte"), "no position in {err}");
        }
    }

    #[test]
    fn strand_index_checked_at_flatten() {
        let e = parse_braid("s0").unwrap();
        assert!(e.to_braid_word().is_err());
        assert_eq!(word_of("s3").strands(), 4);
    }

    #[test]
    fn display_round_trips() {
        for text in
            ["s1 s2 s2' s1 s2 s1'", "(s1 s2)^3 s1'", "((s1)^2)^-3", "(s2)^0 s1", "(s1)^-2"]
        {
            let e = parse_braid(text).unwrap();
            let printed = e.to_string();
            let e2 = parse_braid(&printed).unwrap();
            assert_eq!(e2.to_string(), printed);
            assert_eq!(e2.to_braid_word().unwrap(), e.to_braid_word().unwrap());
        }
    }

    #[test]
    fn oversized_expression_hits_budget() {
        let e = parse_braid("((s1)^100000)^100000").unwrap();
        let err = e.to_braid_word().unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn config_errors() {
        let cases: Vec<(Vec<String>, i32)> = vec![
            (args(&[]), 2),
            (args(&["frobnicate"]), 2),
            (args(&["homology", "--nope"]), 2),
            (args(&["homology", "--braid"]), 2),
            (args(&["homology", "--format", "xml"]), 2),
            (args(&["homology", "--budget", "0"]), 2),
            (args(&["homology", "--window", "1", "2", "3"]), 2),
        ];
        for (argv, code) in cases {
            let err = parse_args(&argv).unwrap_err();
            assert_eq!(err.exit_code(), code, "args {argv:?}");
        }
        // Well-formed flags but an unusable combination.
        assert!(render(&["homology", "--braid", "s1"]).is_err());
        assert!(render(&["homology"]).is_err());
        assert!(render(&["oracle", "--braid", "s1", "--diagram", "x.json"]).is_err());
    }

    #[test]
    fn morse_open_twist_fixture() {
        let text = render(&["morse", "--braid", "(s1)^5"]).unwrap();
        let doc: Value = serde_json::from_str(&text).unwrap();
        let cells = doc["cells"].as_array().unwrap();
        assert_eq!(cells.len(), 6);
        let qs: Vec<i64> = cells.iter().map(|c| c["q"].as_i64().unwrap()).collect();
        assert_eq!(qs, vec![-14, -12, -10, -8, -6, -5]);
    }

    #[test]
    fn morse_csv_quotes_objects() {
        let text = render(&["morse", "--braid", "(s1)^2", "--format", "csv"]).unwrap();
        assert!(text.contains("\"[0-3,1-2]\""), "{text}");
        assert!(text.lines().all(|l| l.starts_with("cell,") || l.starts_with("entry,")));
    }

    #[test]
    fn homology_trefoil_fixture() {
        let text = render(&["homology", "--braid", "(s1)^3", "--closure"]).unwrap();
        let doc: Value = serde_json::from_str(&text).unwrap();
        let expected = json!({
            "groups": [
                { "i": -3, "j": -9, "free": 1, "torsion": [] },
                { "i": -2, "j": -7, "free": 0, "torsion": [2] },
                { "i": -2, "j": -5, "free": 1, "torsion": [] },
                { "i": 0, "j": -3, "free": 1, "torsion": [] },
                { "i": 0, "j": -1, "free": 1, "torsion": [] },
            ]
        });
        assert_eq!(doc, expected);

        let csv = render(&["homology", "--braid", "(s1)^3", "--closure", "--format", "csv"])
            .unwrap();
        assert_eq!(
            csv,
            "i,j,free,torsion\n-3,-9,1,\n-2,-7,0,2\n-2,-5,1,\n0,-3,1,\n0,-1,1,\n"
        );
    }

    #[test]
    fn oracle_matches_pipeline_bytes() {
        let a = render(&["homology", "--braid", "s1 s2'", "--closure"]).unwrap();
        let b = render(&["oracle", "--braid", "s1 s2'"]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn jones_difference_vanishes() {
        let text = render(&["jones", "--braid", "(s1)^3"]).unwrap();
        let doc: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(doc["match"], json!(true));
        assert_eq!(doc["difference"].as_array().unwrap().len(), 0);
        assert_eq!(doc["kauffman"], json!([[-9, -1], [-5, 1], [-3, 1], [-1, 1]]));
    }

    #[test]
    fn reduce_fixture_small_parameters_are_final() {
        let text = render(&[
            "reduce", "--i", "0", "--j", "0", "--k", "12", "--m", "-16", "--family", "omega4",
        ])
        .unwrap();
        let doc: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(doc["trace"].as_array().unwrap().len(), 0);
        assert_eq!(doc["result"], doc["input"]);
        assert_eq!(doc["m_min"], json!(-28));
        assert_eq!(doc["m_max"], json!(28));
        // The printed K interval is empty, so any surviving k is reported.
        assert!(doc["escape"].is_string());

        let csv = render(&[
            "reduce", "--i", "0", "--j", "0", "--k", "12", "--m", "-16", "--family", "omega4",
            "--format", "csv",
        ])
        .unwrap();
        assert_eq!(csv, "stage,i,j,k,m,a,b\ninput,0,0,12,-16,0,0\nresult,0,0,12,-16,0,0\n");
    }

    #[test]
    fn scan_single_link_fixture() {
        let text =
            render(&["scan", "--family", "omega0-3", "--window", "2", "2", "0", "0"]).unwrap();
        let doc: Value = serde_json::from_str(&text).unwrap();
        let rows = doc["rows"].as_array().unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0]["braid"], json!("s1 s2 s1 s2"));
        assert_eq!(rows[0]["torsion_orders"], json!([2]));
        assert_eq!(doc["aggregate"]["only_Z2"], json!(true));
    }

    #[test]
    fn diagram_file_matches_braid_closure() {
        let expr = TangleExpr::Composite {
            diagram: closure(2),
            inputs: vec![TangleExpr::Braid(word_of("(s1)^3"))],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trefoil.json");
        std::fs::write(&path, serde_json::to_string(&expr).unwrap()).unwrap();
        let a = render(&["homology", "--diagram", path.to_str().unwrap()]).unwrap();
        let b = render(&["homology", "--braid", "(s1)^3", "--closure"]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn error_json_is_single_line() {
        let e = Error::Parse("bad at byte 3".into());
        let s = error_json(&e);
        assert!(!s.contains('\n'));
        let v: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["error"]["exit"], json!(2));
        assert_eq!(v["error"]["kind"], json!("parse"));
    }
}
