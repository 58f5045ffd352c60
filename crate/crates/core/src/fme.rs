//! Fourier-Motzkin elimination over linear rate systems whose right-hand
//! sides are combinations of information quantities.
//!
//! An inequality is kept in the form
//! `sum_v a_v * v  (<= | <)  c + sum_k b_k * atom_k`
//! with rational coefficients. Atoms are conditional mutual informations
//! `I(A;B|C)` or entropies `H(A|C)` and are treated as nonnegative symbols.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::Rational64;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{invalid, Error, Result};

pub type Q = Rational64;

/// A symbolic information quantity with canonically ordered groups.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Mi {
        a: Vec<String>,
        b: Vec<String>,
        c: Vec<String>,
    },
    H {
        a: Vec<String>,
        c: Vec<String>,
    },
}

fn group(v: &[impl AsRef<str>]) -> Vec<String> {
    let set: BTreeSet<String> = v.iter().map(|s| s.as_ref().trim().to_string()).collect();
    set.into_iter().collect()
}

impl Atom {
    /// `I(A;B|C)`; groups are sorted and the two sides ordered.
    pub fn mi(a: &[impl AsRef<str>], b: &[impl AsRef<str>], c: &[impl AsRef<str>]) -> Self {
        let (a, b) = (group(a), group(b));
        let (a, b) = if a.join(",") <= b.join(",") { (a, b) } else { (b, a) };
        Atom::Mi { a, b, c: group(c) }
    }

    pub fn h(a: &[impl AsRef<str>], c: &[impl AsRef<str>]) -> Self {
        Atom::H {
            a: group(a),
            c: group(c),
        }
    }

    /// Parses `I(A,B;C|D)` or `H(A|B)`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Validation(format!("cannot parse atom {s:?}"));
        let (head, body) = s.split_at(s.find('(').ok_or_else(bad)?);
        let body = body.strip_prefix('(').and_then(|b| b.strip_suffix(')')).ok_or_else(bad)?;
        let (main, cond) = match body.split_once('|') {
            Some((m, c)) => (m, c),
            None => (body, ""),
        };
        let split = |g: &str| -> Vec<String> {
            g.split(',').map(str::trim).filter(|x| !x.is_empty()).map(String::from).collect()
        };
        let c = split(cond);
        let atom = match head.trim() {
            "I" => {
                let (a, b) = main.split_once(';').ok_or_else(bad)?;
                Atom::mi(&split(a), &split(b), &c)
            }
            "H" => Atom::h(&split(main), &c),
            _ => return Err(bad()),
        };
        atom.check()?;
        Ok(atom)
    }

    fn check(&self) -> Result<()> {
        let (groups, ok): (Vec<&Vec<String>>, bool) = match self {
            Atom::Mi { a, b, c } => (vec![a, b, c], !a.is_empty() && !b.is_empty()),
            Atom::H { a, c } => (vec![a, c], !a.is_empty()),
        };
        if !ok {
            return invalid(format!("atom {self} has an empty group"));
        }
        let mut seen = BTreeSet::new();
        for g in groups {
            for v in g {
                if !seen.insert(v) {
                    return invalid(format!("atom {self} repeats variable {v}"));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Mi { a, b, c } if c.is_empty() => write!(f, "I({};{})", a.join(","), b.join(",")),
            Atom::Mi { a, b, c } => write!(f, "I({};{}|{})", a.join(","), b.join(","), c.join(",")),
            Atom::H { a, c } if c.is_empty() => write!(f, "H({})", a.join(",")),
            Atom::H { a, c } => write!(f, "H({}|{})", a.join(","), c.join(",")),
        }
    }
}

/// Relation between the two sides as written in input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
}

impl Sense {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "<=" | "≤" => Ok(Sense::Le),
            "<" => Ok(Sense::Lt),
            ">=" | "≥" => Ok(Sense::Ge),
            ">" => Ok(Sense::Gt),
            _ => invalid(format!("unknown inequality sense {s:?}")),
        }
    }
}

/// `sum coeffs*vars (<= or <) constant + sum atoms`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Inequality {
    pub coeffs: BTreeMap<String, Q>,
    pub constant: Q,
    pub atoms: BTreeMap<Atom, Q>,
    pub strict: bool,
}

fn q(n: i64) -> Q {
    Q::from_integer(n)
}

impl Inequality {
    /// `lhs sense constant + atoms`; `>=` and `>` are flipped to `<=` and `<`.
    pub fn new(
        coeffs: impl IntoIterator<Item = (String, Q)>,
        sense: Sense,
        constant: Q,
        atoms: impl IntoIterator<Item = (Atom, Q)>,
    ) -> Self {
        let mut ineq = Inequality {
            coeffs: BTreeMap::new(),
            constant,
            atoms: BTreeMap::new(),
            strict: matches!(sense, Sense::Lt | Sense::Gt),
        };
        for (v, c) in coeffs {
            *ineq.coeffs.entry(v).or_insert_with(Q::zero) += c;
        }
        for (a, c) in atoms {
            *ineq.atoms.entry(a).or_insert_with(Q::zero) += c;
        }
        if matches!(sense, Sense::Ge | Sense::Gt) {
            ineq = ineq.scaled(-Q::one());
        }
        ineq.prune();
        ineq
    }

    /// Convenience constructor from `(var, integer)` and `(atom text, integer)` pairs.
    pub fn build(vars: &[(&str, i64)], sense: Sense, atoms: &[(&str, i64)]) -> Result<Self> {
        let atoms = atoms
            .iter()
            .map(|(a, c)| Ok((Atom::parse(a)?, q(*c))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(
            vars.iter().map(|(v, c)| (v.to_string(), q(*c))),
            sense,
            Q::zero(),
            atoms,
        ))
    }

    fn prune(&mut self) {
        self.coeffs.retain(|_, c| !c.is_zero());
        self.atoms.retain(|_, c| !c.is_zero());
    }

    /// Multiplies both sides by `k`; a negative `k` only makes sense together
    /// with flipping the sense, which [`Inequality::new`] does.
    fn scaled(&self, k: Q) -> Self {
        Inequality {
            coeffs: self.coeffs.iter().map(|(v, c)| (v.clone(), c * k)).collect(),
            constant: self.constant * k,
            atoms: self.atoms.iter().map(|(a, c)| (a.clone(), c * k)).collect(),
            strict: self.strict,
        }
    }

    fn plus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (v, c) in &other.coeffs {
            *out.coeffs.entry(v.clone()).or_insert_with(Q::zero) += c;
        }
        out.constant += other.constant;
        for (a, c) in &other.atoms {
            *out.atoms.entry(a.clone()).or_insert_with(Q::zero) += c;
        }
        out.strict |= other.strict;
        out.prune();
        out
    }

    pub fn coeff(&self, var: &str) -> Q {
        self.coeffs.get(var).copied().unwrap_or_else(Q::zero)
    }

    /// Positive rescaling so the leading variable (in `order`), or else the
    /// leading atom, or else the constant has magnitude one.
    fn normalized(&self, order: &[String]) -> Self {
        let lead = order
            .iter()
            .find_map(|v| self.coeffs.get(v).copied())
            .or_else(|| self.coeffs.values().next().copied())
            .or_else(|| self.atoms.values().next().copied())
            .unwrap_or(self.constant);
        if lead.is_zero() {
            return self.clone();
        }
        self.scaled(Q::one() / lead.abs())
    }

    /// Holds for every assignment with nonnegative atoms (and nonnegative
    /// values of the variables in `nonneg`).
    fn is_tautology(&self, nonneg: &BTreeSet<String>) -> bool {
        let vars_ok = self
            .coeffs
            .iter()
            .all(|(v, c)| c.is_negative() && nonneg.contains(v));
        let rhs_ok = self.atoms.values().all(|c| c.is_positive());
        let k_ok = if self.strict {
            self.constant.is_positive()
        } else {
            !self.constant.is_negative()
        };
        vars_ok && rhs_ok && k_ok
    }

    /// Whether `self` follows from `other` coefficient-wise: `other`'s left
    /// side dominates ours on nonnegative variables, is equal on free ones, and
    /// our right side exceeds `other`'s by a nonnegative combination.
    fn dominated_by(&self, other: &Self, nonneg: &BTreeSet<String>) -> bool {
        let vars: BTreeSet<&String> = self.coeffs.keys().chain(other.coeffs.keys()).collect();
        for v in vars {
            let d = other.coeff(v) - self.coeff(v);
            if d.is_negative() || (!d.is_zero() && !nonneg.contains(v.as_str())) {
                return false;
            }
        }
        if self.constant < other.constant {
            return false;
        }
        let atoms: BTreeSet<&Atom> = self.atoms.keys().chain(other.atoms.keys()).collect();
        for a in atoms {
            let d = self.atoms.get(a).copied().unwrap_or_else(Q::zero)
                - other.atoms.get(a).copied().unwrap_or_else(Q::zero);
            if d.is_negative() {
                return false;
            }
        }
        true
    }

    fn same_terms(&self, other: &Self) -> bool {
        self.coeffs == other.coeffs && self.constant == other.constant && self.atoms == other.atoms
    }

    /// Renders with variables in `order`.
    pub fn render(&self, order: &[String]) -> String {
        let mut lhs: Vec<(String, Q)> = order
            .iter()
            .filter_map(|v| self.coeffs.get(v).map(|c| (v.clone(), *c)))
            .collect();
        for (v, c) in &self.coeffs {
            if !order.contains(v) {
                lhs.push((v.clone(), *c));
            }
        }
        let mut rhs: Vec<(String, Q)> = Vec::new();
        if !self.constant.is_zero() {
            rhs.push((String::new(), self.constant));
        }
        let mut atoms: Vec<(String, Q)> = self.atoms.iter().map(|(a, c)| (a.to_string(), *c)).collect();
        atoms.sort_by(|x, y| y.1.is_positive().cmp(&x.1.is_positive()).then(x.0.cmp(&y.0)));
        rhs.extend(atoms);
        let sense = if self.strict { "<" } else { "<=" };
        format!("{} {sense} {}", render_terms(&lhs), render_terms(&rhs))
    }
}

fn render_coeff(c: Q) -> String {
    if c.is_integer() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

fn render_terms(terms: &[(String, Q)]) -> String {
    if terms.is_empty() {
        return "0".into();
    }
    let mut out = String::new();
    for (i, (name, c)) in terms.iter().enumerate() {
        let mag = c.abs();
        let body = if name.is_empty() {
            render_coeff(mag)
        } else if mag.is_one() {
            name.clone()
        } else {
            format!("{} {name}", render_coeff(mag))
        };
        match (i, c.is_negative()) {
            (0, false) => out.push_str(&body),
            (0, true) => {
                out.push('-');
                out.push_str(&body);
            }
            (_, false) => {
                out.push_str(" + ");
                out.push_str(&body);
            }
            (_, true) => {
                out.push_str(" - ");
                out.push_str(&body);
            }
        }
    }
    out
}

/// Linear inequalities over declared rate variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolicSystem {
    pub variables: Vec<String>,
    pub inequalities: Vec<Inequality>,
}

impl SymbolicSystem {
    pub fn new(variables: Vec<String>, inequalities: Vec<Inequality>) -> Result<Self> {
        let sys = SymbolicSystem {
            variables,
            inequalities,
        };
        sys.validate()?;
        Ok(sys)
    }

    pub fn validate(&self) -> Result<()> {
        let declared: BTreeSet<&String> = self.variables.iter().collect();
        if declared.len() != self.variables.len() {
            return invalid("variables are declared twice");
        }
        for ineq in &self.inequalities {
            if let Some(v) = ineq.coeffs.keys().find(|v| !declared.contains(v)) {
                return invalid(format!("variable {v} is not declared"));
            }
            if ineq.coeffs.is_empty() && ineq.atoms.is_empty() && ineq.constant.is_zero() {
                return invalid("an inequality needs a nonzero coefficient or atom");
            }
        }
        Ok(())
    }

    /// Normalized, deduplicated (strict copies win), tautologies dropped,
    /// sorted by rendering.
    fn canonical_with(&self, nonneg: &BTreeSet<String>) -> Self {
        let mut out: Vec<Inequality> = Vec::new();
        for ineq in &self.inequalities {
            let n = ineq.normalized(&self.variables);
            if n.is_tautology(nonneg) {
                continue;
            }
            match out.iter_mut().find(|o| o.same_terms(&n)) {
                Some(o) => o.strict |= n.strict,
                None => out.push(n),
            }
        }
        let vars = self.variables.clone();
        out.sort_by_cached_key(|i| i.render(&vars));
        SymbolicSystem {
            variables: self.variables.clone(),
            inequalities: out,
        }
    }

    /// Canonical form without assumptions.
    pub fn canonical(&self) -> Self {
        self.canonical_with(&BTreeSet::new())
    }

    pub fn render(&self) -> Vec<String> {
        self.inequalities.iter().map(|i| i.render(&self.variables)).collect()
    }

    /// Parses `{"variables": [...], "inequalities": [{"coeffs": {...},
    /// "constant": c, "atoms": {...}, "sense": "<="}, ...]}`. Numbers may be
    /// JSON numbers or `"p/q"` strings.
    pub fn from_json(v: &Value) -> Result<Self> {
        let vars = v
            .get("variables")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Validation("system needs a \"variables\" array".into()))?
            .iter()
            .map(|x| x.as_str().map(String::from).ok_or_else(|| Error::Validation("variable names must be strings".into())))
            .collect::<Result<Vec<_>>>()?;
        let list = v
            .get("inequalities")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Validation("system needs an \"inequalities\" array".into()))?;
        let mut ineqs = Vec::new();
        for item in list {
            let sense = Sense::parse(
                item.get("sense")
                    .and_then(Value::as_str)
                    .ok_or_else(|| Error::Validation("inequality needs a \"sense\"".into()))?,
            )?;
            let coeffs = parse_map(item.get("coeffs"))?;
            let atoms = parse_map(item.get("atoms"))?
                .into_iter()
                .map(|(a, c)| Ok((Atom::parse(&a)?, c)))
                .collect::<Result<Vec<_>>>()?;
            let constant = match item.get("constant") {
                Some(c) => parse_q(c)?,
                None => Q::zero(),
            };
            ineqs.push(Inequality::new(coeffs, sense, constant, atoms));
        }
        SymbolicSystem::new(vars, ineqs)
    }

    /// Structured JSON form accepted by [`SymbolicSystem::from_json`].
    pub fn to_json(&self) -> Value {
        let q_json = |c: &Q| Value::String(render_coeff(*c));
        let ineqs: Vec<Value> = self
            .inequalities
            .iter()
            .map(|i| {
                serde_json::json!({
                    "coeffs": i.coeffs.iter().map(|(v, c)| (v.clone(), q_json(c))).collect::<serde_json::Map<_, _>>(),
                    "constant": q_json(&i.constant),
                    "atoms": i.atoms.iter().map(|(a, c)| (a.to_string(), q_json(c))).collect::<serde_json::Map<_, _>>(),
                    "sense": if i.strict { "<" } else { "<=" },
                })
            })
            .collect();
        serde_json::json!({ "variables": self.variables, "inequalities": ineqs })
    }
}

fn parse_q(v: &Value) -> Result<Q> {
    match v {
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(q(i))
            } else {
                let f = n.as_f64().unwrap_or(f64::NAN);
                Q::approximate_float(f).ok_or_else(|| Error::Validation(format!("bad coefficient {f}")))
            }
        }
        Value::String(s) => {
            let s = s.trim();
            let parsed = match s.split_once('/') {
                Some((a, b)) => a
                    .trim()
                    .parse::<i64>()
                    .ok()
                    .zip(b.trim().parse::<i64>().ok())
                    .filter(|(_, d)| *d != 0)
                    .map(|(n, d)| Q::new(n, d)),
                None => s.parse::<i64>().ok().map(q),
            };
            parsed.ok_or_else(|| Error::Validation(format!("bad coefficient {s:?}")))
        }
        _ => invalid(format!("bad coefficient {v}")),
    }
}

fn parse_map(v: Option<&Value>) -> Result<Vec<(String, Q)>> {
    match v {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(Value::Object(m)) => m.iter().map(|(k, c)| Ok((k.clone(), parse_q(c)?))).collect(),
        Some(other) => invalid(format!("expected an object, got {other}")),
    }
}

/// Facts used by [`simplify`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Assumptions {
    /// Variables known to be nonnegative.
    pub nonneg: BTreeSet<String>,
    /// Rewrites `from -> to` between equal atoms.
    pub identities: Vec<(Atom, Atom)>,
}

impl Assumptions {
    pub fn is_empty(&self) -> bool {
        self.nonneg.is_empty() && self.identities.is_empty()
    }

    /// Parses `{"nonneg": ["Rc"], "identities": [["I(V;S|X2)", "I(V,X2;S)"]]}`.
    pub fn from_json(v: &Value) -> Result<Self> {
        let mut out = Assumptions::default();
        if let Some(list) = v.get("nonneg").and_then(Value::as_array) {
            for x in list {
                out.nonneg.insert(
                    x.as_str()
                        .ok_or_else(|| Error::Validation("nonneg entries must be strings".into()))?
                        .to_string(),
                );
            }
        }
        if let Some(list) = v.get("identities").and_then(Value::as_array) {
            for pair in list {
                let p = pair
                    .as_array()
                    .filter(|p| p.len() == 2)
                    .ok_or_else(|| Error::Validation("identities are [from, to] pairs".into()))?;
                let s = |x: &Value| x.as_str().map(String::from).ok_or_else(|| Error::Validation("atoms must be strings".into()));
                out.identities.push((Atom::parse(&s(&p[0])?)?, Atom::parse(&s(&p[1])?)?));
            }
        }
        Ok(out)
    }

    /// The rewrite map, rejecting conflicting targets and cycles.
    fn rewrite_map(&self) -> Result<BTreeMap<Atom, Atom>> {
        let mut map: BTreeMap<Atom, Atom> = BTreeMap::new();
        for (from, to) in &self.identities {
            if from == to {
                continue;
            }
            if let Some(prev) = map.get(from) {
                if prev != to {
                    return invalid(format!("contradictory identities: {from} -> {prev} and {from} -> {to}"));
                }
            }
            map.insert(from.clone(), to.clone());
        }
        for start in map.keys() {
            let mut seen = BTreeSet::from([start.clone()]);
            let mut cur = start;
            while let Some(next) = map.get(cur) {
                if !seen.insert(next.clone()) {
                    return invalid(format!("identities form a cycle through {start}"));
                }
                cur = next;
            }
        }
        Ok(map)
    }
}

/// Merges `c*I(A;B|C) + c*I(D;B|A,C)` into `c*I(A,D;B|C)` until no pair fits.
fn merge_chain_rule(atoms: &mut BTreeMap<Atom, Q>) {
    'outer: loop {
        let terms: Vec<(Atom, Q)> = atoms.iter().map(|(a, c)| (a.clone(), *c)).collect();
        for (i, (x, cx)) in terms.iter().enumerate() {
            for (j, (y, cy)) in terms.iter().enumerate() {
                if i == j || cx != cy {
                    continue;
                }
                if let Some(m) = chain_pair(x, y) {
                    atoms.remove(x);
                    atoms.remove(y);
                    *atoms.entry(m).or_insert_with(Q::zero) += *cx;
                    atoms.retain(|_, c| !c.is_zero());
                    continue 'outer;
                }
            }
        }
        break;
    }
}

fn chain_pair(x: &Atom, y: &Atom) -> Option<Atom> {
    let (Atom::Mi { a: xa, b: xb, c: xc }, Atom::Mi { a: ya, b: yb, c: yc }) = (x, y) else {
        return None;
    };
    for (a, b) in [(xa, xb), (xb, xa)] {
        for (d, b2) in [(ya, yb), (yb, ya)] {
            if b != b2 {
                continue;
            }
            let ac: BTreeSet<&String> = a.iter().chain(xc.iter()).collect();
            let yc_set: BTreeSet<&String> = yc.iter().collect();
            if ac == yc_set && d.iter().all(|v| !ac.contains(v)) {
                let ad: Vec<&String> = a.iter().chain(d.iter()).collect();
                return Some(Atom::mi(&ad, b, xc));
            }
        }
    }
    None
}

/// Projects `var` out of `sys`: every lower bound is paired with every upper
/// bound, and a pair is strict when either parent is. Chain-rule sums of
/// atoms are merged and the result is canonicalized.
pub fn eliminate(sys: &SymbolicSystem, var: &str) -> Result<SymbolicSystem> {
    if !sys.variables.iter().any(|v| v == var) {
        return invalid(format!("{var} is not a variable of the system"));
    }
    let (mut upper, mut lower, mut rest) = (Vec::new(), Vec::new(), Vec::new());
    for i in &sys.inequalities {
        let c = i.coeff(var);
        if c.is_positive() {
            upper.push((i, c));
        } else if c.is_negative() {
            lower.push((i, c));
        } else {
            rest.push(i.clone());
        }
    }
    for (u, cu) in &upper {
        for (l, cl) in &lower {
            let mut combo = u.scaled(-*cl).plus(&l.scaled(*cu));
            combo.coeffs.remove(var);
            merge_chain_rule(&mut combo.atoms);
            rest.push(combo);
        }
    }
    for r in &mut rest {
        merge_chain_rule(&mut r.atoms);
    }
    let out = SymbolicSystem {
        variables: sys.variables.iter().filter(|v| *v != var).cloned().collect(),
        inequalities: rest,
    };
    Ok(out.canonical())
}

/// Applies declared identities and chain-rule merges, then drops
/// inequalities implied coefficient-wise by another one or by the
/// nonnegativity facts.
pub fn simplify(sys: &SymbolicSystem, assumptions: &Assumptions) -> Result<SymbolicSystem> {
    let map = assumptions.rewrite_map()?;
    let resolve = |a: &Atom| {
        let mut cur = a;
        while let Some(next) = map.get(cur) {
            cur = next;
        }
        cur.clone()
    };
    let rewritten: Vec<Inequality> = sys
        .inequalities
        .iter()
        .map(|i| {
            let mut atoms: BTreeMap<Atom, Q> = BTreeMap::new();
            for (a, c) in &i.atoms {
                *atoms.entry(resolve(a)).or_insert_with(Q::zero) += c;
            }
            atoms.retain(|_, c| !c.is_zero());
            merge_chain_rule(&mut atoms);
            Inequality { atoms, ..i.clone() }
        })
        .collect();
    let canon = SymbolicSystem {
        variables: sys.variables.clone(),
        inequalities: rewritten,
    }
    .canonical_with(&assumptions.nonneg);
    let ineqs = &canon.inequalities;
    let mut keep = Vec::new();
    for (i, a) in ineqs.iter().enumerate() {
        // Among mutually dominating inequalities the earliest survives.
        let redundant = ineqs.iter().enumerate().any(|(j, b)| {
            j != i && a.dominated_by(b, &assumptions.nonneg) && (j < i || !b.dominated_by(a, &assumptions.nonneg))
        });
        if !redundant {
            keep.push(a.clone());
        }
    }
    Ok(SymbolicSystem {
        variables: canon.variables,
        inequalities: keep,
    })
}

/// Named systems shipped with the engine.
pub const BUILTIN_SYSTEMS: &[&str] = &["appendixE", "appendixJ"];

/// A named system together with its elimination order and assumptions.
#[derive(Clone, Debug)]
pub struct BuiltinSystem {
    pub system: SymbolicSystem,
    pub eliminate: Vec<String>,
    pub assumptions: Assumptions,
    /// Identities applied after elimination.
    pub rewrites: Assumptions,
}

/// Expected output of the block-Markov inner bound after projecting out the
/// two compression rates (strictness ignored when comparing).
pub const APPENDIX_E_PROJECTED: &[&str] = &[
    "0 <= I(V,X2;Y) - I(V;S|X2)",
    "R1 <= I(X1;Y|V,X2)",
    "Rc + R1 <= I(V,X1,X2;Y) - I(V;S|X2)",
];

/// The same set after using independence of X2 and S.
pub const APPENDIX_E_REWRITTEN: &[&str] = &[
    "0 <= I(V,X2;Y) - I(V,X2;S)",
    "R1 <= I(X1;Y|V,X2)",
    "Rc + R1 <= I(V,X1,X2;Y) - I(V,X2;S)",
];

/// Expected three-inequality region of the asymmetric inner bound.
pub const APPENDIX_J_PROJECTED: &[&str] = &[
    "R1 <= I(X1;Y|U,V,X2)",
    "R1 <= I(V,X1,X2;Y|U) - I(V;S|U,X2)",
    "Rc + R1 <= I(U,V,X1,X2;Y) - I(V;S|U,X2)",
];

pub fn builtin_system(name: &str) -> Result<BuiltinSystem> {
    use Sense::*;
    let vars = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    match name {
        "appendixE" => {
            let ineqs = vec![
                Inequality::build(&[("That", 1)], Gt, &[("I(V;S|X2)", 1)])?,
                Inequality::build(&[("T", 1)], Lt, &[("I(X2;Y)", 1)])?,
                Inequality::build(&[("That", 1), ("T", -1)], Lt, &[("I(V;Y|X2)", 1)])?,
                Inequality::build(&[("Rc", 1), ("R1", 1), ("That", 1)], Le, &[("I(V,X1,X2;Y)", 1)])?,
                Inequality::build(&[("R1", 1)], Le, &[("I(X1;Y|V,X2)", 1)])?,
            ];
            Ok(BuiltinSystem {
                system: SymbolicSystem::new(vars(&["Rc", "R1", "T", "That"]), ineqs)?,
                eliminate: vars(&["T", "That"]),
                assumptions: Assumptions::default(),
                rewrites: Assumptions {
                    nonneg: BTreeSet::new(),
                    identities: vec![(Atom::parse("I(V;S|X2)")?, Atom::parse("I(V,X2;S)")?)],
                },
            })
        }
        "appendixJ" => {
            let cover = "I(V;S|U,X2)";
            let ineqs = vec![
                Inequality::build(&[("R1", 1)], Le, &[("I(X1;Y|U,V,X2)", 1)])?,
                Inequality::build(&[("R1", 1), ("Rhat", 1)], Le, &[("I(V,X1,X2;Y|U)", 1)])?,
                Inequality::build(&[("Rc2", 1), ("R1", 1), ("Rhat", 1)], Le, &[("I(V,X1,X2;Y|U)", 1)])?,
                Inequality::build(&[("Rc", 1), ("R1", 1), ("Rhat", 1)], Le, &[("I(U,V,X1,X2;Y)", 1)])?,
                Inequality::build(&[("Rhat", 1)], Gt, &[(cover, 1)])?,
                Inequality::build(&[("Rc2", 1)], Ge, &[])?,
                Inequality::build(&[("Rc2", 1), ("Rc", -1)], Le, &[])?,
            ];
            Ok(BuiltinSystem {
                system: SymbolicSystem::new(vars(&["Rc", "R1", "Rc2", "Rhat"]), ineqs)?,
                eliminate: vars(&["Rhat", "Rc2"]),
                assumptions: Assumptions {
                    nonneg: ["Rc", "R1"].iter().map(|s| s.to_string()).collect(),
                    identities: Vec::new(),
                },
                rewrites: Assumptions::default(),
            })
        }
        _ => invalid(format!("unknown system {name}")),
    }
}

/// Outputs of one run of a named system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FmeStage {
    pub name: String,
    pub inequalities: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matches_golden: Option<bool>,
}

/// Eliminates in order, simplifying after each step.
pub fn run_elimination(sys: &SymbolicSystem, order: &[String], assumptions: &Assumptions) -> Result<SymbolicSystem> {
    let mut cur = simplify(sys, assumptions)?;
    for v in order {
        cur = simplify(&eliminate(&cur, v)?, assumptions)?;
    }
    Ok(cur)
}

/// Rewrites every atom in a rendered line to its canonical spelling.
fn canonical_atoms(line: &str) -> String {
    let mut out = String::new();
    let mut rest = line;
    while let Some(pos) = rest.find(|c| c == 'I' || c == 'H') {
        let tail = &rest[pos..];
        match (tail.get(1..2), tail.find(')')) {
            (Some("("), Some(end)) => {
                out.push_str(&rest[..pos]);
                let text = &tail[..=end];
                match Atom::parse(text) {
                    Ok(a) => out.push_str(&a.to_string()),
                    Err(_) => out.push_str(text),
                }
                rest = &tail[end + 1..];
            }
            _ => {
                out.push_str(&rest[..=pos]);
                rest = &rest[pos + 1..];
            }
        }
    }
    out.push_str(rest);
    out
}

/// Compares rendered inequality sets, treating `<` and `<=` alike. Atoms in
/// `golden` may be written in any group order.
pub fn matches_golden(rendered: &[String], golden: &[&str]) -> bool {
    let norm = |s: &str| canonical_atoms(s).replace("<=", "<");
    let mut a: Vec<String> = rendered.iter().map(|s| norm(s)).collect();
    let mut b: Vec<String> = golden.iter().map(|s| norm(s)).collect();
    a.sort();
    b.sort();
    a == b
}

/// Runs a named system and checks each stage against its golden set.
pub fn run_builtin(name: &str) -> Result<Vec<FmeStage>> {
    let b = builtin_system(name)?;
    let projected = run_elimination(&b.system, &b.eliminate, &b.assumptions)?;
    let mut stages = vec![FmeStage {
        name: "projected".into(),
        inequalities: projected.render(),
        matches_golden: None,
    }];
    let golden_projected = match name {
        "appendixE" => APPENDIX_E_PROJECTED,
        _ => APPENDIX_J_PROJECTED,
    };
    stages[0].matches_golden = Some(matches_golden(&stages[0].inequalities, golden_projected));
    if !b.rewrites.is_empty() {
        let mut merged = b.assumptions.clone();
        merged.identities.extend(b.rewrites.identities.iter().cloned());
        merged.nonneg.extend(b.rewrites.nonneg.iter().cloned());
        let rewritten = simplify(&projected, &merged)?.render();
        let ok = matches_golden(&rewritten, APPENDIX_E_REWRITTEN);
        stages.push(FmeStage {
            name: "rewritten".into(),
            inequalities: rewritten,
            matches_golden: Some(ok),
        });
    }
    Ok(stages)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn atom_canonical_names() {
        assert_eq!(Atom::parse("I(V;S|X2)").unwrap().to_string(), "I(S;V|X2)");
        assert_eq!(Atom::parse("I(X2, V; Y)").unwrap().to_string(), "I(V,X2;Y)");
        assert_eq!(Atom::parse("H(Y|X1)").unwrap().to_string(), "H(Y|X1)");
        assert!(Atom::parse("I(V;V)").is_err());
        assert!(Atom::parse("J(V;S)").is_err());
    }

    #[test]
    fn chain_rule_merge() {
        let mut m = BTreeMap::from([
            (Atom::parse("I(X2;Y)").unwrap(), q(1)),
            (Atom::parse("I(V;Y|X2)").unwrap(), q(1)),
        ]);
        merge_chain_rule(&mut m);
        assert_eq!(m.len(), 1);
        assert_eq!(m.keys().next().unwrap().to_string(), "I(V,X2;Y)");
    }

    #[test]
    fn appendix_e_first_step() {
        let b = builtin_system("appendixE").unwrap();
        let s = eliminate(&b.system, "T").unwrap();
        let want = [
            "R1 <= I(X1;Y|V,X2)",
            "Rc + R1 + That <= I(V,X1,X2;Y)",
            "-That < -I(S;V|X2)",
            "That < I(V,X2;Y)",
        ];
        let got = s.render();
        assert_eq!(got.len(), 4, "{got:?}");
        for w in want {
            assert!(got.iter().any(|g| g == w), "{w} missing from {got:?}");
        }
    }

    #[test]
    fn builtin_goldens() {
        for name in BUILTIN_SYSTEMS {
            let stages = run_builtin(name).unwrap();
            for s in &stages {
                assert_eq!(s.matches_golden, Some(true), "{name} {}: {:?}", s.name, s.inequalities);
            }
            assert_eq!(stages, run_builtin(name).unwrap());
        }
    }

    #[test]
    fn absent_variable_is_noop() {
        let b = builtin_system("appendixE").unwrap();
        let mut sys = b.system.canonical();
        sys.variables.push("Z".into());
        let out = eliminate(&sys, "Z").unwrap();
        assert_eq!(out.inequalities, sys.inequalities);
        assert!(eliminate(&sys, "nope").is_err());
    }

    #[test]
    fn empty_assumptions_no_change() {
        let b = builtin_system("appendixE").unwrap();
        let once = run_elimination(&b.system, &b.eliminate, &Assumptions::default()).unwrap();
        assert_eq!(simplify(&once, &Assumptions::default()).unwrap(), once);
    }

    #[test]
    fn contradictory_identities() {
        let a = Atom::parse("I(V;S|X2)").unwrap();
        let b = Atom::parse("I(V,X2;S)").unwrap();
        let c = Atom::parse("H(S)").unwrap();
        let sys = builtin_system("appendixE").unwrap().system;
        let cyc = Assumptions {
            identities: vec![(a.clone(), b.clone()), (b.clone(), a.clone())],
            ..Default::default()
        };
        assert!(simplify(&sys, &cyc).is_err());
        let clash = Assumptions {
            identities: vec![(a.clone(), b), (a, c)],
            ..Default::default()
        };
        assert!(simplify(&sys, &clash).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let sys = builtin_system("appendixJ").unwrap().system.canonical();
        let back = SymbolicSystem::from_json(&sys.to_json()).unwrap().canonical();
        assert_eq!(back, sys);
        let bad = serde_json::json!({"variables": ["R"], "inequalities": [{"coeffs": {"X": 1}, "sense": "<="}]});
        assert!(SymbolicSystem::from_json(&bad).is_err());
    }

    // Random systems over entropy atoms (which never merge), so a numeric
    // instantiation of the atoms is consistent before and after elimination.
    fn rand_system() -> impl Strategy<Value = SymbolicSystem> {
        let ineq = (
            proptest::collection::vec(-3i64..=3, 3),
            -3i64..=3,
            proptest::collection::vec(-2i64..=2, 2),
            any::<bool>(),
        );
        proptest::collection::vec(ineq, 1..7).prop_map(|rows| {
            let names = ["x", "y", "z"];
            let atoms = [Atom::h(&["A"], &[] as &[&str]), Atom::h(&["B"], &[] as &[&str])];
            let ineqs = rows
                .into_iter()
                .map(|(c, k, a, strict)| {
                    Inequality::new(
                        names.iter().zip(c).map(|(n, c)| (n.to_string(), q(c))),
                        if strict { Sense::Lt } else { Sense::Le },
                        q(k),
                        atoms.iter().cloned().zip(a.into_iter().map(q)),
                    )
                })
                .filter(|i| !(i.coeffs.is_empty() && i.atoms.is_empty() && i.constant.is_zero()))
                .collect();
            SymbolicSystem {
                variables: names.iter().map(|s| s.to_string()).collect(),
                inequalities: ineqs,
            }
        })
    }

    fn holds(i: &Inequality, vals: &BTreeMap<String, Q>, atoms: &BTreeMap<Atom, Q>) -> bool {
        let lhs: Q = i.coeffs.iter().map(|(v, c)| c * vals[v]).sum();
        let rhs: Q = i.constant + i.atoms.iter().map(|(a, c)| c * atoms[a]).sum::<Q>();
        if i.strict {
            lhs < rhs
        } else {
            lhs <= rhs
        }
    }

    proptest! {
        #[test]
        fn projection_soundness(
            sys in rand_system(),
            y in -6i64..=6, z in -6i64..=6, a in 0i64..=4, b in 0i64..=4, d in 1i64..=3,
        ) {
            let vals = BTreeMap::from([("y".to_string(), Q::new(y, d)), ("z".to_string(), Q::new(z, 2))]);
            let atoms = BTreeMap::from([
                (Atom::h(&["A"], &[] as &[&str]), Q::new(a, d)),
                (Atom::h(&["B"], &[] as &[&str]), q(b)),
            ]);
            let proj = eliminate(&sys, "x").unwrap();
            let projected_ok = proj.inequalities.iter().all(|i| holds(i, &vals, &atoms));
            // Interval of feasible x.
            let (mut lo, mut lo_strict, mut hi, mut hi_strict) = (None::<Q>, false, None::<Q>, false);
            let mut fixed_ok = true;
            for i in &sys.inequalities {
                let cx = i.coeff("x");
                let rest: Q = i.coeffs.iter().filter(|(v, _)| *v != "x").map(|(v, c)| c * vals[v]).sum();
                let rhs: Q = i.constant + i.atoms.iter().map(|(a, c)| c * atoms[a]).sum::<Q>() - rest;
                if cx.is_zero() {
                    fixed_ok &= if i.strict { Q::zero() < rhs } else { Q::zero() <= rhs };
                } else if cx.is_positive() {
                    let bnd = rhs / cx;
                    if hi.map_or(true, |h| bnd < h || (bnd == h && i.strict)) {
                        hi = Some(bnd);
                        hi_strict = i.strict;
                    }
                } else {
                    let bnd = rhs / cx;
                    if lo.map_or(true, |l| bnd > l || (bnd == l && i.strict)) {
                        lo = Some(bnd);
                        lo_strict = i.strict;
                    }
                }
            }
            let interval_ok = match (lo, hi) {
                (Some(l), Some(h)) => l < h || (l == h && !lo_strict && !hi_strict),
                _ => true,
            };
            prop_assert_eq!(projected_ok, fixed_ok && interval_ok);
        }

        #[test]
        fn simplify_idempotent(sys in rand_system()) {
            let asm = Assumptions { nonneg: ["y".to_string()].into_iter().collect(), identities: vec![] };
            let once = simplify(&sys, &asm).unwrap();
            prop_assert_eq!(simplify(&once, &asm).unwrap(), once);
        }

        #[test]
        fn order_independent(sys in rand_system(), rot in 0usize..7) {
            let mut other = sys.clone();
            let n = other.inequalities.len();
            other.inequalities.rotate_left(rot % n.max(1));
            other.inequalities.reverse();
            prop_assert_eq!(eliminate(&sys, "x").unwrap().render(), eliminate(&other, "x").unwrap().render());
        }
    }
}
