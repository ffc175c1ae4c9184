//! Expression IR: sums of coefficient-weighted monomials of tensor factors
//! carrying abstract indices.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use arrayvec::ArrayString;

use crate::coeff::Coeff;
use crate::symbols::{decl, IndexFamily, SymbolId};

pub type Name = ArrayString<8>;

pub fn name(s: &str) -> Name {
    Name::from(s).unwrap_or_else(|_| panic!("index name {s:?} longer than 8 bytes"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Index {
    pub family: IndexFamily,
    pub name: Name,
    pub up: bool,
}

impl Index {
    pub fn new(family: IndexFamily, n: &str, up: bool) -> Self {
        Index { family, name: name(n), up }
    }

    /// Parses `a`, `^a`, `B`, `^B`, `%B`, `^%B`; the family follows the
    /// index-language conventions (lowercase spacetime, uppercase tractor,
    /// `%` gauge).
    pub fn parse(s: &str) -> Option<Self> {
        let (up, rest) = match s.strip_prefix('^') {
            Some(r) => (true, r),
            None => (false, s),
        };
        let (family, id) = match rest.strip_prefix('%') {
            Some(r) => (IndexFamily::Gauge, r),
            None => {
                let c = rest.chars().next()?;
                if c.is_ascii_lowercase() {
                    (IndexFamily::Spacetime, rest)
                } else if c.is_ascii_uppercase() {
                    (IndexFamily::Tractor, rest)
                } else {
                    return None;
                }
            }
        };
        if id.is_empty() || id.len() > 8 || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return None;
        }
        if !id.chars().next()?.is_ascii_alphabetic() {
            return None;
        }
        Some(Index { family, name: name(id), up })
    }

    pub fn flipped(self) -> Self {
        Index { up: !self.up, ..self }
    }

    pub fn with_up(self, up: bool) -> Self {
        Index { up, ..self }
    }

    /// Identity of an index irrespective of its variance.
    pub fn key(&self) -> (IndexFamily, Name) {
        (self.family, self.name)
    }
}

impl fmt::Display for Index {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.up {
            f.write_str("^")?;
        }
        if self.family == IndexFamily::Gauge {
            f.write_str("%")?;
        }
        f.write_str(&self.name)
    }
}

/// `∇_{d1}···∇_{dk} S[slots]`, `derivs[0]` outermost.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Factor {
    pub sym: SymbolId,
    pub derivs: Vec<Index>,
    pub slots: Vec<Index>,
}

impl Factor {
    pub fn new(sym: SymbolId, slots: Vec<Index>) -> Self {
        Factor { sym, derivs: Vec::new(), slots }
    }

    pub fn weight(&self) -> i32 {
        let d = decl(self.sym);
        let mut w = d.weight;
        for (ix, &(fam, nat_up)) in self.slots.iter().zip(&d.slots) {
            if fam == IndexFamily::Spacetime && ix.up != nat_up {
                w += if ix.up { -2 } else { 2 };
            }
        }
        w - 2 * self.derivs.iter().filter(|i| i.up).count() as i32
    }

    pub fn indices(&self) -> impl Iterator<Item = &Index> {
        self.derivs.iter().chain(self.slots.iter())
    }

    pub fn indices_mut(&mut self) -> impl Iterator<Item = &mut Index> {
        self.derivs.iter_mut().chain(self.slots.iter_mut())
    }

    /// Prepends `∇_ix`.
    pub fn nabla(mut self, ix: Index) -> Self {
        self.derivs.insert(0, ix);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Term {
    pub coeff: Coeff,
    pub factors: Vec<Factor>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DiagKind {
    SlotCount,
    SlotFamily,
    DerivFamily,
    IndexRepeated,
    DummyVariance,
    DummyFamily,
    WeightMismatch,
    FreeIndexMismatch,
}

impl DiagKind {
    pub fn label(&self) -> &'static str {
        match self {
            DiagKind::SlotCount => "slot count",
            DiagKind::SlotFamily => "slot family",
            DiagKind::DerivFamily => "derivative family",
            DiagKind::IndexRepeated => "index repeated",
            DiagKind::DummyVariance => "dummy pair variance",
            DiagKind::DummyFamily => "dummy pair family",
            DiagKind::WeightMismatch => "weight mismatch",
            DiagKind::FreeIndexMismatch => "free-index mismatch",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub kind: DiagKind,
    pub term: usize,
    pub detail: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "term {}: {}: {}", self.term, self.kind.label(), self.detail)
    }
}

impl Term {
    pub fn new(coeff: Coeff, factors: Vec<Factor>) -> Self {
        Term { coeff, factors }
    }

    pub fn scalar(coeff: Coeff) -> Self {
        Term { coeff, factors: Vec::new() }
    }

    pub fn weight(&self) -> i32 {
        self.factors.iter().map(Factor::weight).sum()
    }

    pub fn indices(&self) -> impl Iterator<Item = &Index> {
        self.factors.iter().flat_map(|f| f.indices())
    }

    fn occurrences(&self) -> BTreeMap<(IndexFamily, Name), Vec<Index>> {
        let mut m: BTreeMap<_, Vec<Index>> = BTreeMap::new();
        for ix in self.indices() {
            m.entry(ix.key()).or_default().push(*ix);
        }
        m
    }

    /// Indices occurring once, sorted.
    pub fn free_indices(&self) -> Vec<Index> {
        self.occurrences()
            .into_values()
            .filter(|v| v.len() == 1)
            .map(|v| v[0])
            .collect()
    }

    /// Names of contracted pairs.
    pub fn dummies(&self) -> BTreeSet<(IndexFamily, Name)> {
        self.occurrences()
            .into_iter()
            .filter(|(_, v)| v.len() == 2)
            .map(|(k, _)| k)
            .collect()
    }

    pub fn used_names(&self) -> BTreeSet<Name> {
        self.indices().map(|i| i.name).collect()
    }

    pub fn validate(&self, pos: usize) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut diag = |kind, detail: String| out.push(Diagnostic { kind, term: pos, detail });
        for f in &self.factors {
            let d = decl(f.sym);
            if f.slots.len() != d.slots.len() {
                diag(
                    DiagKind::SlotCount,
                    format!("{} takes {} slots, got {}", d.name, d.slots.len(), f.slots.len()),
                );
                continue;
            }
            for (i, (ix, (fam, _))) in f.slots.iter().zip(&d.slots).enumerate() {
                if ix.family != *fam {
                    diag(DiagKind::SlotFamily, format!("{} slot {i} expects a {fam} index, got {ix}", d.name));
                }
            }
            for ix in &f.derivs {
                if ix.family != IndexFamily::Spacetime {
                    diag(DiagKind::DerivFamily, format!("derivative index {ix} is not a spacetime index"));
                }
            }
        }
        let mut by_name: BTreeMap<Name, Vec<Index>> = BTreeMap::new();
        for ix in self.indices() {
            by_name.entry(ix.name).or_default().push(*ix);
        }
        for (n, occ) in by_name {
            match occ.len() {
                1 => {}
                2 => {
                    if occ[0].family != occ[1].family {
                        diag(DiagKind::DummyFamily, format!("index {n} used in two families"));
                    } else if occ[0].up == occ[1].up {
                        diag(DiagKind::DummyVariance, format!("index {n} appears twice {}", if occ[0].up { "up" } else { "down" }));
                    }
                }
                k => diag(DiagKind::IndexRepeated, format!("index {n} appears {k} times")),
            }
        }
        out
    }

    /// Renames indices by name; unmapped names are kept.
    pub fn rename(&mut self, map: &HashMap<(IndexFamily, Name), Name>) {
        for f in &mut self.factors {
            for ix in f.indices_mut() {
                if let Some(n) = map.get(&ix.key()) {
                    ix.name = *n;
                }
            }
        }
    }

    /// Renames the dummies of `self` away from `avoid`.
    pub fn freshen_dummies(&mut self, avoid: &BTreeSet<Name>) {
        let mut used: BTreeSet<Name> = avoid.clone();
        used.extend(self.used_names());
        let mut map = HashMap::new();
        for key in self.dummies() {
            if avoid.contains(&key.1) {
                let n = fresh_name(key.0, &used);
                used.insert(n);
                map.insert(key, n);
            }
        }
        if !map.is_empty() {
            self.rename(&map);
        }
    }

    /// Product with dummy clashes resolved; equal free names of opposite
    /// variance contract.
    pub fn mul(&self, o: &Term) -> Term {
        let mut rhs = o.clone();
        let mut avoid = self.used_names();
        avoid.extend(o.free_indices().iter().map(|i| i.name));
        rhs.freshen_dummies(&avoid);
        let mut lhs = self.clone();
        let avoid_l: BTreeSet<Name> = rhs.used_names();
        lhs.freshen_dummies(&avoid_l);
        let mut factors = lhs.factors;
        factors.extend(rhs.factors);
        Term { coeff: &lhs.coeff * &rhs.coeff, factors }
    }

    pub fn scaled(mut self, c: &Coeff) -> Term {
        self.coeff = &self.coeff * c;
        self
    }

    pub fn count_symbol(&self, s: SymbolId) -> usize {
        self.factors.iter().filter(|f| f.sym == s).count()
    }
}

/// A name of `family` absent from `used`.
pub fn fresh_name(family: IndexFamily, used: &BTreeSet<Name>) -> Name {
    let base = match family {
        IndexFamily::Spacetime => "k",
        IndexFamily::Tractor => "K",
        IndexFamily::Gauge => "Q",
    };
    (1..)
        .map(|i| name(&format!("{base}{i}")))
        .find(|n| !used.contains(n))
        .unwrap()
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Expr {
    pub terms: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExprError {
    #[error("expression has heterogeneous weights {0:?}")]
    Heterogeneous(Vec<i32>),
    #[error("{0}")]
    Invalid(String),
}

impl Expr {
    pub fn zero() -> Self {
        Expr::default()
    }

    pub fn one() -> Self {
        Expr::from(Term::scalar(Coeff::one()))
    }

    pub fn constant(c: Coeff) -> Self {
        if c.is_zero() {
            Expr::zero()
        } else {
            Expr::from(Term::scalar(c))
        }
    }

    pub fn factor(f: Factor) -> Self {
        Expr::from(Term::new(Coeff::one(), vec![f]))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn push(&mut self, t: Term) {
        if !t.coeff.is_zero() {
            self.terms.push(t);
        }
    }

    pub fn add(&self, o: &Expr) -> Expr {
        let mut terms = self.terms.clone();
        terms.extend(o.terms.iter().cloned());
        Expr { terms }
    }

    pub fn sub(&self, o: &Expr) -> Expr {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> Expr {
        self.scale(&Coeff::int(-1))
    }

    pub fn scale(&self, c: &Coeff) -> Expr {
        if c.is_zero() {
            return Expr::zero();
        }
        Expr { terms: self.terms.iter().map(|t| t.clone().scaled(c)).collect() }
    }

    pub fn mul(&self, o: &Expr) -> Expr {
        let mut terms = Vec::with_capacity(self.terms.len() * o.terms.len());
        for a in &self.terms {
            for b in &o.terms {
                terms.push(a.mul(b));
            }
        }
        Expr { terms }
    }

    pub fn sum<I: IntoIterator<Item = Expr>>(it: I) -> Expr {
        let mut terms = Vec::new();
        for e in it {
            terms.extend(e.terms);
        }
        Expr { terms }
    }

    /// Applies `∇_ix` to every factor via Leibniz.
    pub fn nabla(&self, ix: Index) -> Expr {
        let mut out = Vec::new();
        for t in &self.terms {
            let mut t = t.clone();
            t.freshen_dummies(&BTreeSet::from([ix.name]));
            for i in 0..t.factors.len() {
                let mut u = t.clone();
                let f = u.factors[i].clone().nabla(ix);
                u.factors[i] = f;
                out.push(u);
            }
        }
        Expr { terms: out }
    }

    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        for (i, t) in self.terms.iter().enumerate() {
            out.extend(t.validate(i));
        }
        if let Some(first) = self.terms.first() {
            let free0 = first.free_indices();
            let w0 = first.weight();
            for (i, t) in self.terms.iter().enumerate().skip(1) {
                let free = t.free_indices();
                if free != free0 {
                    out.push(Diagnostic {
                        kind: DiagKind::FreeIndexMismatch,
                        term: i,
                        detail: format!("free indices {} differ from {}", fmt_indices(&free), fmt_indices(&free0)),
                    });
                }
                let w = t.weight();
                if w != w0 {
                    out.push(Diagnostic {
                        kind: DiagKind::WeightMismatch,
                        term: i,
                        detail: format!("weight {w} differs from {w0}"),
                    });
                }
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<(), ExprError> {
        let d = self.validate();
        if d.is_empty() {
            Ok(())
        } else {
            Err(ExprError::Invalid(d.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; ")))
        }
    }

    pub fn weight_of(&self) -> Result<Option<i32>, ExprError> {
        let ws: BTreeSet<i32> = self.terms.iter().map(Term::weight).collect();
        match ws.len() {
            0 => Ok(None),
            1 => Ok(ws.into_iter().next()),
            _ => Err(ExprError::Heterogeneous(ws.into_iter().collect())),
        }
    }

    pub fn free_indices(&self) -> Vec<Index> {
        self.terms.first().map(Term::free_indices).unwrap_or_default()
    }

    /// Renames free (and, harmlessly, dummy) indices.
    pub fn rename(&self, pairs: &[(&str, &str)]) -> Expr {
        let mut terms = self.terms.clone();
        for t in &mut terms {
            let mut avoid: BTreeSet<Name> = pairs.iter().map(|(_, b)| name(b)).collect();
            let free: BTreeSet<Name> = t.free_indices().iter().map(|i| i.name).collect();
            avoid.retain(|n| !free.contains(n) || pairs.iter().any(|(a, _)| name(a) == *n));
            t.freshen_dummies(&avoid);
            for f in &mut t.factors {
                for ix in f.indices_mut() {
                    if let Some((_, b)) = pairs.iter().find(|(a, _)| name(a) == ix.name && free.contains(&ix.name)) {
                        ix.name = name(b);
                    }
                }
            }
        }
        Expr { terms }
    }

    pub fn specialize(&self, n: i64) -> Expr {
        Expr {
            terms: self
                .terms
                .iter()
                .filter_map(|t| {
                    let c = t.coeff.specialize_int(n).unwrap_or_else(|e| panic!("{e}"));
                    (!c.is_zero()).then(|| Term { coeff: c, factors: t.factors.clone() })
                })
                .collect(),
        }
    }

    pub fn symbols(&self) -> BTreeSet<SymbolId> {
        self.terms
            .iter()
            .flat_map(|t| t.factors.iter().map(|f| f.sym))
            .collect()
    }
}

impl From<Term> for Expr {
    fn from(t: Term) -> Self {
        let mut e = Expr::zero();
        e.push(t);
        e
    }
}

pub(crate) fn fmt_indices(ix: &[Index]) -> String {
    let v: Vec<String> = ix.iter().map(|i| i.to_string()).collect();
    format!("[{}]", v.join(","))
}
