//! Tensor symbol declarations: slot signatures, conformal weights and
//! slot symmetry groups.

use std::collections::HashMap;
use std::fmt;

use once_cell::sync::Lazy;
use serde::Serialize;

/// Which bundle an abstract index belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum IndexFamily {
    /// Tangent/cotangent indices; traces give `n`.
    Spacetime,
    /// Standard tractor indices; traces give `n + 2`.
    Tractor,
    /// Gauge bundle indices; contraction only, no metric.
    Gauge,
}

impl fmt::Display for IndexFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IndexFamily::Spacetime => "spacetime",
            IndexFamily::Tractor => "tractor",
            IndexFamily::Gauge => "gauge",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SymKind {
    Symmetric,
    Antisymmetric,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SymmetrySpec {
    pub blocks: Vec<(Vec<usize>, SymKind)>,
    /// Slot permutations (as lists of swapped pairs) that fix the symbol with sign +1.
    pub pair_exchanges: Vec<Vec<(usize, usize)>>,
    pub tracefree_pairs: Vec<(usize, usize)>,
}

/// Multi-term identities on a symbol's slots that the canonicalizer cannot
/// see; the Bianchi pass handles them with projectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BianchiClass {
    None,
    /// `T_{[abc]d} = 0` on a tensor with Riemann slot symmetries.
    Curvature,
    /// `T_{[abc]} = 0` on a tensor antisymmetric in its last two slots.
    Cyclic,
    /// Two-form with `∇_{[a} T_{bc]} = 0` (innermost derivative plus slots 0, 1).
    Closed,
}

/// Symbols that rewrite passes treat specially.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Role {
    Plain,
    Metric,
    TractorMetric,
    SplitX,
    SplitY,
    SplitZ,
    /// The conformal factor Υ; `Ups1[a]` is parsed as `nd[a](Ups[])`.
    ConformalFactor,
}

#[derive(Clone, Debug, Serialize)]
pub struct SymbolDecl {
    pub name: &'static str,
    /// Family and natural variance (`true` = up) of each slot.
    pub slots: Vec<(IndexFamily, bool)>,
    /// Weight with all slots in natural position.
    pub weight: i32,
    pub symmetry: SymmetrySpec,
    pub bianchi: BianchiClass,
    pub role: Role,
    pub latex: &'static str,
    #[serde(skip)]
    group: Vec<GroupElement>,
}

/// `T(L[perm[0]], L[perm[1]], ..) = sign * T(L)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupElement {
    pub perm: Vec<u8>,
    pub sign: i8,
}

impl SymbolDecl {
    fn new(name: &'static str, latex: &'static str, slots: Vec<(IndexFamily, bool)>, weight: i32) -> Self {
        SymbolDecl {
            name,
            slots,
            weight,
            symmetry: SymmetrySpec::default(),
            bianchi: BianchiClass::None,
            role: Role::Plain,
            latex,
            group: Vec::new(),
        }
    }

    fn block(mut self, slots: &[usize], kind: SymKind) -> Self {
        self.symmetry.blocks.push((slots.to_vec(), kind));
        self
    }

    fn exchange(mut self, swaps: &[(usize, usize)]) -> Self {
        self.symmetry.pair_exchanges.push(swaps.to_vec());
        self
    }

    fn tracefree(mut self, pairs: &[(usize, usize)]) -> Self {
        self.symmetry.tracefree_pairs.extend_from_slice(pairs);
        self
    }

    fn bianchi(mut self, b: BianchiClass) -> Self {
        self.bianchi = b;
        self
    }

    fn role(mut self, r: Role) -> Self {
        self.role = r;
        self
    }

    pub fn rank(&self) -> usize {
        self.slots.len()
    }

    /// The full slot symmetry group, identity first.
    pub fn group(&self) -> &[GroupElement] {
        &self.group
    }

    pub fn is_tracefree(&self, i: usize, j: usize) -> bool {
        let (i, j) = (i.min(j), i.max(j));
        self.symmetry
            .tracefree_pairs
            .iter()
            .any(|&(a, b)| (a.min(b), a.max(b)) == (i, j))
    }

    fn generate_group(&mut self) {
        let r = self.rank();
        let id: Vec<u8> = (0..r as u8).collect();
        let mut gens: Vec<GroupElement> = Vec::new();
        for (slots, kind) in &self.symmetry.blocks {
            for w in slots.windows(2) {
                let mut p = id.clone();
                p.swap(w[0], w[1]);
                gens.push(GroupElement {
                    perm: p,
                    sign: if *kind == SymKind::Antisymmetric { -1 } else { 1 },
                });
            }
        }
        for swaps in &self.symmetry.pair_exchanges {
            let mut p = id.clone();
            for &(a, b) in swaps {
                p.swap(a, b);
            }
            gens.push(GroupElement { perm: p, sign: 1 });
        }
        let mut elems = vec![GroupElement { perm: id, sign: 1 }];
        let mut seen: HashMap<Vec<u8>, i8> = HashMap::new();
        seen.insert(elems[0].perm.clone(), 1);
        let mut i = 0;
        while i < elems.len() {
            let cur = elems[i].clone();
            for g in &gens {
                // apply g after cur: L -> L∘cur -> (L∘cur)∘g
                let perm: Vec<u8> = g.perm.iter().map(|&k| cur.perm[k as usize]).collect();
                let sign = cur.sign * g.sign;
                match seen.get(&perm) {
                    Some(&s) => assert_eq!(s, sign, "symbol {} has an inconsistent symmetry group", self.name),
                    None => {
                        seen.insert(perm.clone(), sign);
                        elems.push(GroupElement { perm, sign });
                    }
                }
            }
            i += 1;
        }
        self.group = elems;
    }
}

/// Index into the symbol table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymbolId(pub u16);

pub struct SymbolTable {
    decls: Vec<SymbolDecl>,
    by_name: HashMap<&'static str, SymbolId>,
}

impl SymbolTable {
    pub fn get(&self, id: SymbolId) -> &SymbolDecl {
        &self.decls[id.0 as usize]
    }

    pub fn lookup(&self, name: &str) -> Option<SymbolId> {
        self.by_name.get(name).copied()
    }

    pub fn id(&self, name: &str) -> SymbolId {
        self.lookup(name)
            .unwrap_or_else(|| panic!("built-in symbol {name} missing"))
    }

    pub fn iter(&self) -> impl Iterator<Item = (SymbolId, &SymbolDecl)> {
        self.decls
            .iter()
            .enumerate()
            .map(|(i, d)| (SymbolId(i as u16), d))
    }

    fn build() -> Self {
        use IndexFamily::*;
        use SymKind::*;
        let s_dn = (Spacetime, false);
        let s_up = (Spacetime, true);
        let t_dn = (Tractor, false);
        let t_up = (Tractor, true);
        let g_up = (Gauge, true);
        let g_dn = (Gauge, false);
        let riemann_like = |d: SymbolDecl| {
            d.block(&[0, 1], Antisymmetric)
                .block(&[2, 3], Antisymmetric)
                .exchange(&[(0, 2), (1, 3)])
                .bianchi(BianchiClass::Curvature)
        };
        let mut decls = vec![
            SymbolDecl::new("g", "\\bm{g}", vec![s_dn, s_dn], 2)
                .block(&[0, 1], Symmetric)
                .role(Role::Metric),
            SymbolDecl::new("h", "h", vec![t_dn, t_dn], 0)
                .block(&[0, 1], Symmetric)
                .role(Role::TractorMetric),
            riemann_like(SymbolDecl::new("R", "R", vec![s_dn, s_dn, s_up, s_dn], 0)),
            SymbolDecl::new("Ric", "\\mathrm{Ric}", vec![s_dn, s_dn], 0).block(&[0, 1], Symmetric),
            SymbolDecl::new("Sc", "\\mathrm{Sc}", vec![], -2),
            SymbolDecl::new("P", "P", vec![s_dn, s_dn], 0).block(&[0, 1], Symmetric),
            SymbolDecl::new("J", "J", vec![], -2),
            SymbolDecl::new("A", "A", vec![s_dn, s_dn, s_dn], 0)
                .block(&[1, 2], Antisymmetric)
                .tracefree(&[(0, 1), (0, 2)])
                .bianchi(BianchiClass::Cyclic),
            riemann_like(SymbolDecl::new("C", "C", vec![s_dn, s_dn, s_dn, s_dn], 2))
                .tracefree(&[(0, 2), (0, 3), (1, 2), (1, 3)]),
            SymbolDecl::new("B", "B", vec![s_dn, s_dn], -2)
                .block(&[0, 1], Symmetric)
                .tracefree(&[(0, 1)]),
            SymbolDecl::new("Ups", "\\Upsilon", vec![], 0).role(Role::ConformalFactor),
            SymbolDecl::new("F", "F", vec![s_dn, s_dn, g_up, g_dn], 0)
                .block(&[0, 1], Antisymmetric)
                .bianchi(BianchiClass::Closed),
            SymbolDecl::new("Omega", "\\Omega", vec![s_dn, s_dn, t_up, t_dn], 0)
                .block(&[0, 1], Antisymmetric)
                .block(&[2, 3], Antisymmetric)
                .bianchi(BianchiClass::Closed),
            SymbolDecl::new("X", "X", vec![t_up], 1).role(Role::SplitX),
            SymbolDecl::new("Y", "Y", vec![t_up], -1).role(Role::SplitY),
            SymbolDecl::new("Z", "Z", vec![t_up, s_up], -1).role(Role::SplitZ),
            // generic test fields
            SymbolDecl::new("S", "S", vec![s_dn, s_dn], 0).block(&[0, 1], Symmetric),
            SymbolDecl::new("T", "T", vec![s_dn, s_dn], 0),
            SymbolDecl::new("W", "W", vec![s_dn, s_dn, s_dn], 0),
            SymbolDecl::new("v", "v", vec![s_up], 0),
            SymbolDecl::new("u", "u", vec![s_dn], 0),
            SymbolDecl::new("f", "f", vec![], 0),
            SymbolDecl::new("V", "V", vec![t_up], 0),
            SymbolDecl::new("s", "s", vec![g_up], 0),
            SymbolDecl::new("om", "\\omega", vec![s_dn, s_dn, g_up, g_dn], 0).block(&[0, 1], Antisymmetric),
            SymbolDecl::new("et", "\\eta", vec![s_dn, s_dn, g_up, g_dn], 0).block(&[0, 1], Antisymmetric),
            SymbolDecl::new("rho", "\\rho", vec![s_dn, s_dn, g_up, g_dn], -2).block(&[0, 1], Antisymmetric),
            SymbolDecl::new("th", "\\theta", vec![s_dn, g_up, g_dn], 0),
        ];
        for d in &mut decls {
            d.generate_group();
        }
        let by_name = decls
            .iter()
            .enumerate()
            .map(|(i, d)| (d.name, SymbolId(i as u16)))
            .collect();
        SymbolTable { decls, by_name }
    }
}

/// The read-only table of every symbol the engine knows.
pub static SYMBOLS: Lazy<SymbolTable> = Lazy::new(SymbolTable::build);

pub fn sym(name: &str) -> SymbolId {
    SYMBOLS.id(name)
}

pub fn decl(id: SymbolId) -> &'static SymbolDecl {
    SYMBOLS.get(id)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_match_density_table() {
        // P, J, A, C, B carry weights 0, -2, 0, 2, -2 with all indices down.
        for (name, w) in [("P", 0), ("J", -2), ("A", 0), ("C", 2), ("B", -2), ("g", 2)] {
            let d = decl(sym(name));
            let lowered: i32 = d
                .slots
                .iter()
                .filter(|(f, up)| *f == IndexFamily::Spacetime && *up)
                .count() as i32
                * 2;
            assert_eq!(d.weight + lowered, w, "{name}");
        }
        // R_{ab}^c_d has weight 0
        assert_eq!(decl(sym("R")).weight, 0);
    }

    #[test]
    fn group_orders() {
        assert_eq!(decl(sym("C")).group().len(), 8);
        assert_eq!(decl(sym("R")).group().len(), 8);
        assert_eq!(decl(sym("A")).group().len(), 2);
        assert_eq!(decl(sym("Omega")).group().len(), 4);
        assert_eq!(decl(sym("J")).group().len(), 1);
    }

    #[test]
    fn names_unique() {
        let mut names: Vec<_> = SYMBOLS.iter().map(|(_, d)| d.name).collect();
        let n = names.len();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), n);
    }
}
