//! Ordinal triple statements and their CSV representation.
//!
//! A statement names three distinct objects and designates one of them,
//! either as the most central member of the triple or as its odd one out.
//! Collections are multisets: repeats and contradicting statements are kept
//! verbatim.
//!
//! File format, one statement per line, no header:
//!
//! ```text
//! # comment
//! C,2,3,7
//! O,0,1,2
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Dense object identifier in `0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ObjectId(pub u32);

impl ObjectId {
    pub fn new(index: usize) -> Self {
        ObjectId(u32::try_from(index).expect("object index exceeds u32"))
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for ObjectId {
    fn from(i: usize) -> Self {
        ObjectId::new(i)
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StatementKind {
    /// The designated object is the most central member of the triple.
    MostCentral,
    /// The designated object is the outlier of the triple.
    OddOneOut,
}

impl StatementKind {
    pub fn code(self) -> char {
        match self {
            StatementKind::MostCentral => 'C',
            StatementKind::OddOneOut => 'O',
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "C" => Some(StatementKind::MostCentral),
            "O" => Some(StatementKind::OddOneOut),
            _ => None,
        }
    }

    pub(crate) fn label(self) -> &'static str {
        match self {
            StatementKind::MostCentral => "most-central",
            StatementKind::OddOneOut => "odd-one-out",
        }
    }
}

/// A single ordinal statement in canonical form (`other1 < other2`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Statement {
    pub kind: StatementKind,
    pub designated: ObjectId,
    pub other1: ObjectId,
    pub other2: ObjectId,
}

impl Statement {
    /// Builds a canonical statement, rejecting repeated members.
    pub fn new(
        kind: StatementKind,
        designated: impl Into<ObjectId>,
        a: impl Into<ObjectId>,
        b: impl Into<ObjectId>,
    ) -> Result<Self> {
        canonicalize(Statement {
            kind,
            designated: designated.into(),
            other1: a.into(),
            other2: b.into(),
        })
    }

    pub fn central(designated: usize, a: usize, b: usize) -> Result<Self> {
        Self::new(StatementKind::MostCentral, designated, a, b)
    }

    pub fn odd_one_out(designated: usize, a: usize, b: usize) -> Result<Self> {
        Self::new(StatementKind::OddOneOut, designated, a, b)
    }

    /// The three members in ascending order.
    pub fn triple(&self) -> [ObjectId; 3] {
        let mut t = [self.designated, self.other1, self.other2];
        t.sort_unstable();
        t
    }

    pub fn members(&self) -> [ObjectId; 3] {
        [self.designated, self.other1, self.other2]
    }

    pub fn contains(&self, id: ObjectId) -> bool {
        self.designated == id || self.other1 == id || self.other2 == id
    }

    /// Same triple with a different designated member. `designated` must be a member.
    pub(crate) fn redesignate(&self, designated: ObjectId) -> Statement {
        let [a, b, c] = self.triple();
        let (o1, o2) = if designated == a {
            (b, c)
        } else if designated == b {
            (a, c)
        } else {
            debug_assert_eq!(designated, c);
            (a, b)
        };
        Statement {
            kind: self.kind,
            designated,
            other1: o1,
            other2: o2,
        }
    }

    fn max_index(&self) -> usize {
        self.designated.max(self.other1).max(self.other2).index()
    }
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{}",
            self.kind.code(),
            self.designated,
            self.other1,
            self.other2
        )
    }
}

/// Orders the two non-designated members; idempotent.
pub fn canonicalize(s: Statement) -> Result<Statement> {
    let (d, a, b) = (s.designated, s.other1, s.other2);
    if d == a || d == b || a == b {
        return Err(Error::DuplicateMember(d.index(), a.index(), b.index()));
    }
    Ok(Statement {
        other1: a.min(b),
        other2: a.max(b),
        ..s
    })
}

/// A multiset of statements over the universe `0..n`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StatementCollection {
    n: usize,
    items: Vec<Statement>,
}

impl StatementCollection {
    pub fn new(n: usize, items: Vec<Statement>) -> Result<Self> {
        let mut canonical = Vec::with_capacity(items.len());
        for s in items {
            let s = canonicalize(s)?;
            if s.max_index() >= n {
                return Err(Error::IdOutOfRange {
                    id: s.max_index(),
                    n,
                });
            }
            canonical.push(s);
        }
        Ok(StatementCollection {
            n,
            items: canonical,
        })
    }

    pub fn empty(n: usize) -> Self {
        StatementCollection {
            n,
            items: Vec::new(),
        }
    }

    /// Caller guarantees canonical, in-range statements.
    pub(crate) fn from_trusted(n: usize, items: Vec<Statement>) -> Self {
        debug_assert!(items.iter().all(|s| s.max_index() < n));
        StatementCollection { n, items }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[Statement] {
        &self.items
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Statement> {
        self.items.iter()
    }

    pub fn into_items(self) -> Vec<Statement> {
        self.items
    }

    pub fn push(&mut self, s: Statement) -> Result<()> {
        let s = canonicalize(s)?;
        if s.max_index() >= self.n {
            return Err(Error::IdOutOfRange {
                id: s.max_index(),
                n: self.n,
            });
        }
        self.items.push(s);
        Ok(())
    }

    pub fn extend_from(&mut self, other: &StatementCollection) -> Result<()> {
        if other.n != self.n {
            return Err(Error::SizeMismatch(self.n, other.n));
        }
        self.items.extend_from_slice(&other.items);
        Ok(())
    }

    /// The common kind of all statements; `None` when empty.
    pub fn kind(&self) -> Result<Option<StatementKind>> {
        let Some(first) = self.items.first() else {
            return Ok(None);
        };
        if self.items.iter().any(|s| s.kind != first.kind) {
            return Err(Error::MixedKinds);
        }
        Ok(Some(first.kind))
    }

    /// Fails with `WrongKind` unless every statement has kind `expected`.
    /// An empty collection passes.
    pub fn require_kind(&self, expected: StatementKind) -> Result<()> {
        match self.kind() {
            Ok(None) => Ok(()),
            Ok(Some(k)) if k == expected => Ok(()),
            _ => Err(Error::WrongKind {
                expected: expected.label(),
            }),
        }
    }
}

impl<'a> IntoIterator for &'a StatementCollection {
    type Item = &'a Statement;
    type IntoIter = std::slice::Iter<'a, Statement>;

    fn into_iter(self) -> Self::IntoIter {
        self.items.iter()
    }
}

fn parse_line<F>(line: &str, lineno: usize, n: usize, resolve: &F) -> Result<Statement>
where
    F: Fn(&str) -> Option<usize>,
{
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 4 {
        return Err(Error::Parse {
            line: lineno,
            message: format!("expected 4 fields, found {}", fields.len()),
        });
    }
    let kind = StatementKind::from_code(fields[0]).ok_or_else(|| Error::Parse {
        line: lineno,
        message: format!("unknown statement kind {:?}", fields[0]),
    })?;
    let mut ids = [0usize; 3];
    for (slot, field) in ids.iter_mut().zip(&fields[1..]) {
        *slot = resolve(field).ok_or_else(|| Error::Parse {
            line: lineno,
            message: format!("invalid object id {field:?}"),
        })?;
        if *slot >= n {
            return Err(Error::IdOutOfRange { id: *slot, n });
        }
    }
    Statement::new(kind, ids[0], ids[1], ids[2]).map_err(|e| Error::Parse {
        line: lineno,
        message: e.to_string(),
    })
}

fn parse_with<R, F>(reader: R, n: usize, resolve: F) -> Result<StatementCollection>
where
    R: BufRead,
    F: Fn(&str) -> Option<usize>,
{
    let mut items = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        items.push(parse_line(trimmed, i + 1, n, &resolve)?);
    }
    Ok(StatementCollection::from_trusted(n, items))
}

/// Parses the statement CSV format. Line numbers in errors are 1-based.
pub fn parse_statements<R: BufRead>(reader: R, n: usize) -> Result<StatementCollection> {
    parse_with(reader, n, |s| s.parse::<usize>().ok())
}

/// Writes canonical statements, one per line.
pub fn write_statements<W: Write>(c: &StatementCollection, mut w: W) -> Result<()> {
    for s in &c.items {
        writeln!(w, "{s}")?;
    }
    w.flush()?;
    Ok(())
}

/// Translation table from external string names to dense ids.
///
/// Sidecar file format: `id,name` per line, `#` comments allowed.
#[derive(Debug, Clone, Default)]
pub struct NameMap {
    by_name: HashMap<String, usize>,
    names: Vec<String>,
}

impl NameMap {
    pub fn parse<R: BufRead>(reader: R) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let (id, name) = t.split_once(',').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: "expected `id,name`".into(),
            })?;
            let id: usize = id.trim().parse().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("invalid id {:?}", id.trim()),
            })?;
            pairs.push((id, name.trim().to_string(), i + 1));
        }
        let n = pairs.len();
        let mut names = vec![String::new(); n];
        let mut by_name = HashMap::with_capacity(n);
        for (id, name, line) in pairs {
            if id >= n || !names[id].is_empty() {
                return Err(Error::Parse {
                    line,
                    message: format!("ids must be a permutation of 0..{n}, saw {id}"),
                });
            }
            if by_name.insert(name.clone(), id).is_some() {
                return Err(Error::Parse {
                    line,
                    message: format!("duplicate name {name:?}"),
                });
            }
            names[id] = name;
        }
        Ok(NameMap { by_name, names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    /// Parses a statement file whose members are external names.
    pub fn parse_statements<R: BufRead>(&self, reader: R) -> Result<StatementCollection> {
        parse_with(reader, self.len(), |s| self.id(s))
    }
}

/// Collapses all statements about the same triple into one, designating
/// the most frequently designated member (smallest id on ties).
pub fn reduce_collection(c: &StatementCollection) -> Result<StatementCollection> {
    let Some(kind) = c.kind()? else {
        return Ok(StatementCollection::empty(c.n));
    };
    let mut votes: BTreeMap<[ObjectId; 3], [u64; 3]> = BTreeMap::new();
    for s in &c.items {
        let t = s.triple();
        let slot = t.iter().position(|&m| m == s.designated).unwrap();
        votes.entry(t).or_default()[slot] += 1;
    }
    let items = votes
        .into_iter()
        .map(|(t, v)| {
            // members are ascending, so the first maximum is the smallest id
            let best = (0..3).fold(0, |b, i| if v[i] > v[b] { i } else { b });
            Statement {
                kind,
                designated: t[0],
                other1: t[1],
                other2: t[2],
            }
            .redesignate(t[best])
        })
        .collect();
    Ok(StatementCollection::from_trusted(c.n, items))
}

/// Splits into `parts` contiguous runs whose sizes differ by at most one,
/// larger runs first.
pub fn partition(c: &StatementCollection, parts: usize) -> Vec<StatementCollection> {
    partition_slices(&c.items, parts)
        .into_iter()
        .map(|s| StatementCollection::from_trusted(c.n, s.to_vec()))
        .collect()
}

pub fn partition_slices(items: &[Statement], parts: usize) -> Vec<&[Statement]> {
    let parts = parts.max(1);
    let base = items.len() / parts;
    let extra = items.len() % parts;
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for p in 0..parts {
        let len = base + usize::from(p < extra);
        out.push(&items[start..start + len]);
        start += len;
    }
    out
}

/// A commutative counting pass over statements.
///
/// Every estimator in this crate accumulates integer counters, so folding
/// disjoint parts and merging gives exactly the sequential result.
pub trait StatementFold: Sized + Send {
    fn observe(&mut self, s: &Statement);
    fn merge(&mut self, other: Self);

    fn observe_all<'a, I: IntoIterator<Item = &'a Statement>>(&mut self, it: I) {
        for s in it {
            self.observe(s);
        }
    }
}

const FOLD_CHUNK: usize = 1 << 15;

/// Folds `items` on the current rayon pool in fixed-size chunks.
pub fn fold_parallel<F, I>(items: &[Statement], init: I) -> F
where
    F: StatementFold,
    I: Fn() -> F + Sync + Send,
{
    if items.len() <= FOLD_CHUNK {
        let mut acc = init();
        acc.observe_all(items);
        return acc;
    }
    items
        .par_chunks(FOLD_CHUNK)
        .fold(&init, |mut acc, chunk| {
            acc.observe_all(chunk);
            acc
        })
        .reduce_with(|mut a, b| {
            a.merge(b);
            a
        })
        .unwrap_or_else(init)
}
