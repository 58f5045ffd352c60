//! Channel specifications, the factored input/auxiliary laws for each bound,
//! and assembly of the joint pmf they induce.
//!
//! Assembled joints always use the axis order `(S, U, V, X1, X2, Y)`; axes a
//! law kind does not use have size one and are dropped from the public
//! [`JointPMF`] (which leaves the row-major layout unchanged).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::prob::{checked_cells, inverse_binary_entropy, Axis, JointPMF};

/// Row-sum tolerance for pmfs.
pub const PMF_TOL: f64 = 1e-9;

/// Axis bit masks into the canonical `(S, U, V, X1, X2, Y)` layout.
pub mod mask {
    pub const S: u64 = 1;
    pub const U: u64 = 2;
    pub const V: u64 = 4;
    pub const X1: u64 = 8;
    pub const X2: u64 = 16;
    pub const Y: u64 = 32;
}

/// Alphabet sizes of a channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sizes {
    #[serde(rename = "S")]
    pub s: usize,
    #[serde(rename = "X1")]
    pub x1: usize,
    #[serde(rename = "X2")]
    pub x2: usize,
    #[serde(rename = "Y")]
    pub y: usize,
}

/// A memoryless state-dependent MAC: state law `Q_S` and kernel `W(y|s,x1,x2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSpec {
    pub name: Option<String>,
    pub sizes: Sizes,
    pub q_s: Vec<f64>,
    /// Flat kernel indexed `((s*|X1| + x1)*|X2| + x2)*|Y| + y`.
    w: Vec<f64>,
    /// `(|S1|, |S2|)` when the state is a pair flattened as `s = s1*|S2| + s2`.
    pub state_split: Option<[usize; 2]>,
    /// `(|Y1|, |Y2|)` when the output is a pair flattened as `y = y1*|Y2| + y2`.
    pub output_split: Option<[usize; 2]>,
}

#[derive(Serialize, Deserialize)]
struct ChannelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    sizes: Sizes,
    #[serde(rename = "Q_S")]
    q_s: Vec<f64>,
    #[serde(rename = "W")]
    w: Vec<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    state_split: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output_split: Option<[usize; 2]>,
}

fn check_pmf(what: &str, v: &[f64]) -> Result<()> {
    let mut total = 0.0;
    for &p in v {
        if !(p >= 0.0) || !p.is_finite() {
            return invalid(format!("{what}: entry {p} is not a probability"));
        }
        total += p;
    }
    if (total - 1.0).abs() > PMF_TOL {
        return invalid(format!("{what}: sums to {total}, not 1"));
    }
    Ok(())
}

impl ChannelSpec {
    /// Builds a channel from a kernel function and validates it.
    pub fn from_fn(
        sizes: Sizes,
        q_s: Vec<f64>,
        mut kernel: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let n = checked_cells(&[sizes.s, sizes.x1, sizes.x2, sizes.y])?;
        let mut w = Vec::with_capacity(n);
        for s in 0..sizes.s {
            for x1 in 0..sizes.x1 {
                for x2 in 0..sizes.x2 {
                    for y in 0..sizes.y {
                        w.push(kernel(s, x1, x2, y));
                    }
                }
            }
        }
        Self::from_flat(sizes, q_s, w)
    }

    pub fn from_flat(sizes: Sizes, q_s: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        let ch = ChannelSpec {
            name: None,
            sizes,
            q_s,
            w,
            state_split: None,
            output_split: None,
        };
        ch.validate()?;
        Ok(ch)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        let z = self.sizes;
        if z.s == 0 || z.x1 == 0 || z.x2 == 0 || z.y == 0 {
            return invalid("alphabet sizes must be positive");
        }
        if self.q_s.len() != z.s {
            return invalid(format!("Q_S has {} entries, |S| = {}", self.q_s.len(), z.s));
        }
        check_pmf("Q_S", &self.q_s)?;
        if self.w.len() != z.s * z.x1 * z.x2 * z.y {
            return invalid("kernel size does not match alphabet sizes");
        }
        for (i, row) in self.w.chunks(z.y).enumerate() {
            let x2 = i % z.x2;
            let x1 = (i / z.x2) % z.x1;
            let s = i / (z.x2 * z.x1);
            check_pmf(&format!("W(.|s={s},x1={x1},x2={x2})"), row)?;
        }
        if let Some([a, b]) = self.state_split {
            if a * b != z.s {
                return invalid("state_split does not multiply to |S|");
            }
            for s1 in 0..a {
                for s2 in 0..b {
                    let m1: f64 = (0..b).map(|t| self.q_s[s1 * b + t]).sum();
                    let m2: f64 = (0..a).map(|t| self.q_s[t * b + s2]).sum();
                    if (self.q_s[s1 * b + s2] - m1 * m2).abs() > PMF_TOL {
                        return invalid("state components are not independent");
                    }
                }
            }
        }
        if let Some([a, b]) = self.output_split {
            if a * b != z.y {
                return invalid("output_split does not multiply to |Y|");
            }
        }
        Ok(())
    }

    #[inline]
    pub fn w(&self, s: usize, x1: usize, x2: usize, y: usize) -> f64 {
        let z = self.sizes;
        self.w[((s * z.x1 + x1) * z.x2 + x2) * z.y + y]
    }

    /// The output pmf row for `(s, x1, x2)`.
    #[inline]
    pub fn row(&self, s: usize, x1: usize, x2: usize) -> &[f64] {
        let z = self.sizes;
        let at = ((s * z.x1 + x1) * z.x2 + x2) * z.y;
        &self.w[at..at + z.y]
    }

    pub fn kernel_flat(&self) -> &[f64] {
        &self.w
    }

    /// State-averaged kernel P(y|x1,x2), indexed `(x1*|X2| + x2)*|Y| + y`.
    pub fn averaged_kernel(&self) -> Vec<f64> {
        let z = self.sizes;
        let mut out = vec![0.0; z.x1 * z.x2 * z.y];
        for s in 0..z.s {
            for x1 in 0..z.x1 {
                for x2 in 0..z.x2 {
                    let r = self.row(s, x1, x2);
                    let base = (x1 * z.x2 + x2) * z.y;
                    for y in 0..z.y {
                        out[base + y] += self.q_s[s] * r[y];
                    }
                }
            }
        }
        out
    }

    /// True iff every `(x1, x2, y)` that can occur is explained by exactly one state.
    pub fn is_state_deterministic(&self) -> bool {
        let z = self.sizes;
        for x1 in 0..z.x1 {
            for x2 in 0..z.x2 {
                for y in 0..z.y {
                    let n = (0..z.s)
                        .filter(|&s| self.q_s[s] * self.w(s, x1, x2, y) > 0.0)
                        .count();
                    if n > 1 {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// True iff `W(.|s,x1,x2)` does not depend on `s` (up to `tol`).
    pub fn is_stateless(&self, tol: f64) -> bool {
        let z = self.sizes;
        (1..z.s).all(|s| {
            (0..z.x1).all(|x1| {
                (0..z.x2).all(|x2| {
                    self.row(s, x1, x2)
                        .iter()
                        .zip(self.row(0, x1, x2))
                        .all(|(a, b)| (a - b).abs() <= tol)
                })
            })
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let f: ChannelFile = serde_json::from_str(text)?;
        let z = f.sizes;
        if f.w.len() != z.s {
            return invalid(format!("W has {} state slices, |S| = {}", f.w.len(), z.s));
        }
        let mut w = Vec::with_capacity(z.s * z.x1 * z.x2 * z.y);
        for (s, a) in f.w.iter().enumerate() {
            if a.len() != z.x1 {
                return invalid(format!("W[{s}] has {} rows, |X1| = {}", a.len(), z.x1));
            }
            for (x1, b) in a.iter().enumerate() {
                if b.len() != z.x2 {
                    return invalid(format!("W[{s}][{x1}] has {} rows, |X2| = {}", b.len(), z.x2));
                }
                for (x2, c) in b.iter().enumerate() {
                    if c.len() != z.y {
                        return invalid(format!(
                            "W[{s}][{x1}][{x2}] has {} entries, |Y| = {}",
                            c.len(),
                            z.y
                        ));
                    }
                    w.extend_from_slice(c);
                }
            }
        }
        let ch = ChannelSpec {
            name: f.name,
            sizes: z,
            q_s: f.q_s,
            w,
            state_split: f.state_split,
            output_split: f.output_split,
        };
        ch.validate()?;
        Ok(ch)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        let z = self.sizes;
        let w = (0..z.s)
            .map(|s| {
                (0..z.x1)
                    .map(|x1| (0..z.x2).map(|x2| self.row(s, x1, x2).to_vec()).collect())
                    .collect()
            })
            .collect();
        let f = ChannelFile {
            name: self.name.clone(),
            sizes: z,
            q_s: self.q_s.clone(),
            w,
            state_split: self.state_split,
            output_split: self.output_split,
        };
        serde_json::to_string_pretty(&f).expect("channel serializes")
    }
}

fn param(params: &BTreeMap<String, f64>, key: &str) -> Result<f64> {
    let v = *params
        .get(key)
        .ok_or_else(|| Error::Validation(format!("missing parameter {key}")))?;
    if !(0.0..=1.0).contains(&v) {
        return invalid(format!("parameter {key} = {v} is outside [0,1]"));
    }
    Ok(v)
}

/// Names accepted by [`builtin_channel`].
pub const BUILTIN_CHANNELS: &[&str] = &[
    "switch",
    "mod2-selector",
    "additive-binary-helper",
    "fading-binary",
    "adder-mac",
];

/// Example channels.
///
/// * `switch`: `Y = X_S`, S uniform on {1, 2} (index 0 selects X1).
/// * `mod2-selector`: `S = (S0, S1)` iid Bernoulli(p) with h2(p) = 1/2,
///   `Y1 = X1 xor S_{(X1+X2) mod 2}`, `Y2 = X2`.
/// * `additive-binary-helper` (param `p`): S uniform, `Y1 = X1 xor S xor Z`
///   with Z ~ Bernoulli(p), `Y2 = X2`.
/// * `fading-binary` (param `p`): `Y1 = S*X1`, `Y2 = X2 + Z` over {+1,-1};
///   symbol index 1 is +1, Pr{Z = +1} = p, and `Y2` is indexed by
///   `(value + 2)/2` in {-2, 0, 2}.
/// * `adder-mac`: stateless `Y = X1 + X2` over binary inputs.
///
/// Pair outputs are flattened as `y = y1*|Y2| + y2`; pair states as
/// `s = s0*|S1| + s1`.
pub fn builtin_channel(name: &str, params: &BTreeMap<String, f64>) -> Result<ChannelSpec> {
    let bin = |a: bool| if a { 1.0 } else { 0.0 };
    let ch = match name {
        "switch" => {
            let z = Sizes { s: 2, x1: 2, x2: 2, y: 2 };
            ChannelSpec::from_fn(z, vec![0.5, 0.5], |s, x1, x2, y| {
                bin(y == if s == 0 { x1 } else { x2 })
            })?
        }
        "mod2-selector" => {
            let p = inverse_binary_entropy(0.5)?;
            let q1 = [1.0 - p, p];
            let q_s = (0..4).map(|s| q1[s / 2] * q1[s % 2]).collect();
            let z = Sizes { s: 4, x1: 2, x2: 2, y: 4 };
            let mut ch = ChannelSpec::from_fn(z, q_s, |s, x1, x2, y| {
                let comp = [s / 2, s % 2];
                let y1 = x1 ^ comp[(x1 + x2) % 2];
                bin(y == y1 * 2 + x2)
            })?;
            ch.state_split = Some([2, 2]);
            ch.output_split = Some([2, 2]);
            ch
        }
        "additive-binary-helper" => {
            let p = param(params, "p")?;
            let z = Sizes { s: 2, x1: 2, x2: 2, y: 4 };
            let mut ch = ChannelSpec::from_fn(z, vec![0.5, 0.5], |s, x1, x2, y| {
                let (y1, y2) = (y / 2, y % 2);
                if y2 != x2 {
                    return 0.0;
                }
                if y1 == x1 ^ s {
                    1.0 - p
                } else {
                    p
                }
            })?;
            ch.output_split = Some([2, 2]);
            ch
        }
        "fading-binary" => {
            let p = param(params, "p")?;
            let pz = [1.0 - p, p];
            let z = Sizes { s: 2, x1: 2, x2: 2, y: 6 };
            let mut ch = ChannelSpec::from_fn(z, vec![0.5, 0.5], |s, x1, x2, y| {
                let (y1, y2) = (y / 3, y % 3);
                if y1 != 1 ^ s ^ x1 {
                    return 0.0;
                }
                (0..2).filter(|&zz| x2 + zz == y2).map(|zz| pz[zz]).sum()
            })?;
            ch.output_split = Some([2, 3]);
            ch
        }
        "adder-mac" => {
            let z = Sizes { s: 1, x1: 2, x2: 2, y: 3 };
            ChannelSpec::from_fn(z, vec![1.0], |_, x1, x2, y| bin(y == x1 + x2))?
        }
        _ => return invalid(format!("unknown builtin channel {name}")),
    };
    Ok(ch.with_name(name))
}

/// The family a [`FactoredLaw`] belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LawKind {
    /// `P_X2 P_X1|X2 P_V|S,X2`
    InnerSc,
    /// `P_X2 P_X1|X2 P_V|S,X1,X2`, optionally `P_U|V,S,X1,X2`
    OuterSc,
    /// `P_U P_X2|U P_X1|U P_V|S,U,X2`
    AsymInner,
    /// `P_V P_U|V P_X2|V,S P_X1|S,V,U`
    Causal,
    /// `P_X1 P_X2`
    ProductInput,
    /// `P_X1,X2`
    JointInput,
}

impl LawKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LawKind::InnerSc => "inner-sc",
            LawKind::OuterSc => "outer-sc",
            LawKind::AsymInner => "asym-inner",
            LawKind::Causal => "causal",
            LawKind::ProductInput => "product-input",
            LawKind::JointInput => "joint-input",
        }
    }
}

/// A conditional pmf table; each row is a pmf over `cols` symbols.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CondTable {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl CondTable {
    pub fn uniform(rows: usize, cols: usize) -> Self {
        CondTable {
            rows,
            cols,
            data: vec![1.0 / cols as f64; rows * cols],
        }
    }

    /// Row `r` puts all mass on `f(r)`.
    pub fn deterministic(rows: usize, cols: usize, f: impl Fn(usize) -> usize) -> Self {
        let mut data = vec![0.0; rows * cols];
        for r in 0..rows {
            data[r * cols + f(r) % cols] = 1.0;
        }
        CondTable { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return invalid("ragged or empty conditional table");
        }
        let t = CondTable {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        };
        t.validate("table")?;
        Ok(t)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn validate(&self, what: &str) -> Result<()> {
        if self.rows == 0 || self.cols == 0 || self.data.len() != self.rows * self.cols {
            return invalid(format!("{what}: malformed table"));
        }
        for r in 0..self.rows {
            check_pmf(&format!("{what} row {r}"), self.row(r))?;
        }
        Ok(())
    }
}

/// Input and auxiliary distributions for one bound, factored as that bound's
/// measure prescribes. Factor order per kind is documented on [`LawKind`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactoredLaw {
    pub kind: LawKind,
    pub card_u: usize,
    pub card_v: usize,
    pub factors: Vec<CondTable>,
}

/// Largest |V| allowed for inner-sc and outer-sc laws without an override.
pub fn card_v_bound(z: Sizes) -> usize {
    z.s * z.x1 * z.x2 + 2
}

impl FactoredLaw {
    /// Expected `(rows, cols)` of each factor.
    pub fn factor_shapes(kind: LawKind, z: Sizes, card_u: usize, card_v: usize, with_u: bool) -> Vec<(usize, usize)> {
        match kind {
            LawKind::InnerSc => vec![(1, z.x2), (z.x2, z.x1), (z.s * z.x2, card_v)],
            LawKind::OuterSc => {
                let mut v = vec![(1, z.x2), (z.x2, z.x1), (z.s * z.x1 * z.x2, card_v)];
                if with_u {
                    v.push((card_v * z.s * z.x1 * z.x2, card_u));
                }
                v
            }
            LawKind::AsymInner => vec![
                (1, card_u),
                (card_u, z.x2),
                (card_u, z.x1),
                (z.s * card_u * z.x2, card_v),
            ],
            LawKind::Causal => vec![
                (1, card_v),
                (card_v, card_u),
                (card_v * z.s, z.x2),
                (z.s * card_v * card_u, z.x1),
            ],
            LawKind::ProductInput => vec![(1, z.x1), (1, z.x2)],
            LawKind::JointInput => vec![(1, z.x1 * z.x2)],
        }
    }

    /// All-uniform law of the given kind.
    pub fn uniform(kind: LawKind, z: Sizes, card_u: usize, card_v: usize, with_u: bool) -> Self {
        let factors = Self::factor_shapes(kind, z, card_u, card_v, with_u)
            .into_iter()
            .map(|(r, c)| CondTable::uniform(r, c))
            .collect();
        FactoredLaw {
            kind,
            card_u: if uses_u(kind, with_u) { card_u } else { 1 },
            card_v: if uses_v(kind) { card_v } else { 1 },
            factors,
        }
    }

    pub fn inner_sc(px2: Vec<f64>, px1_x2: Vec<Vec<f64>>, pv_sx2: Vec<Vec<f64>>) -> Result<Self> {
        let px2 = CondTable::from_rows(vec![px2])?;
        let px1 = CondTable::from_rows(px1_x2)?;
        let pv = CondTable::from_rows(pv_sx2)?;
        Ok(FactoredLaw {
            kind: LawKind::InnerSc,
            card_u: 1,
            card_v: pv.cols,
            factors: vec![px2, px1, pv],
        })
    }

    /// Outer-sc law; `pv_sx1x2` rows are indexed `(s*|X1| + x1)*|X2| + x2`.
    pub fn outer_sc(px2: Vec<f64>, px1_x2: Vec<Vec<f64>>, pv_sx1x2: Vec<Vec<f64>>) -> Result<Self> {
        let px2 = CondTable::from_rows(vec![px2])?;
        let px1 = CondTable::from_rows(px1_x2)?;
        let pv = CondTable::from_rows(pv_sx1x2)?;
        Ok(FactoredLaw {
            kind: LawKind::OuterSc,
            card_u: 1,
            card_v: pv.cols,
            factors: vec![px2, px1, pv],
        })
    }

    pub fn product_input(px1: Vec<f64>, px2: Vec<f64>) -> Result<Self> {
        Ok(FactoredLaw {
            kind: LawKind::ProductInput,
            card_u: 1,
            card_v: 1,
            factors: vec![CondTable::from_rows(vec![px1])?, CondTable::from_rows(vec![px2])?],
        })
    }

    /// Joint input law from a `|X1| x |X2|` matrix.
    pub fn joint_input(p: Vec<Vec<f64>>) -> Result<Self> {
        Ok(FactoredLaw {
            kind: LawKind::JointInput,
            card_u: 1,
            card_v: 1,
            factors: vec![CondTable::from_rows(vec![p.concat()])?],
        })
    }

    /// Whether an outer-sc law carries the optional U factor.
    pub fn has_u(&self) -> bool {
        uses_u(self.kind, self.factors.len() == 4)
    }

    pub fn validate(&self, ch: &ChannelSpec, allow_large_card: bool) -> Result<()> {
        let z = ch.sizes;
        let with_u = self.factors.len() == 4 && self.kind == LawKind::OuterSc;
        let shapes = Self::factor_shapes(self.kind, z, self.card_u, self.card_v, with_u);
        if shapes.len() != self.factors.len() {
            return invalid(format!(
                "{} law needs {} factors, got {}",
                self.kind.as_str(),
                shapes.len(),
                self.factors.len()
            ));
        }
        for (i, (f, (r, c))) in self.factors.iter().zip(shapes).enumerate() {
            if f.rows != r || f.cols != c {
                return invalid(format!(
                    "{} factor {i} is {}x{}, expected {r}x{c}",
                    self.kind.as_str(),
                    f.rows,
                    f.cols
                ));
            }
            f.validate(&format!("{} factor {i}", self.kind.as_str()))?;
        }
        if matches!(self.kind, LawKind::InnerSc | LawKind::OuterSc)
            && !allow_large_card
            && self.card_v > card_v_bound(z)
        {
            return invalid(format!(
                "|V| = {} exceeds the cardinality bound {}",
                self.card_v,
                card_v_bound(z)
            ));
        }
        Ok(())
    }

    /// Reinterprets an inner-sc law as an outer-sc one (V ignores X1).
    pub fn lift_to_outer(&self, z: Sizes) -> Result<Self> {
        if self.kind != LawKind::InnerSc {
            return invalid("only inner-sc laws can be lifted");
        }
        let pv = &self.factors[2];
        let mut data = Vec::with_capacity(z.s * z.x1 * z.x2 * self.card_v);
        for s in 0..z.s {
            for _x1 in 0..z.x1 {
                for x2 in 0..z.x2 {
                    data.extend_from_slice(pv.row(s * z.x2 + x2));
                }
            }
        }
        Ok(FactoredLaw {
            kind: LawKind::OuterSc,
            card_u: 1,
            card_v: self.card_v,
            factors: vec![
                self.factors[0].clone(),
                self.factors[1].clone(),
                CondTable {
                    rows: z.s * z.x1 * z.x2,
                    cols: self.card_v,
                    data,
                },
            ],
        })
    }

    /// Drops the optional U factor of an outer-sc law.
    pub fn without_u(&self) -> Self {
        let mut l = self.clone();
        if l.kind == LawKind::OuterSc {
            l.factors.truncate(3);
            l.card_u = 1;
        }
        l
    }

    /// Joint input pmf `P(x1, x2)`, indexed `x1*|X2| + x2`.
    ///
    /// Returns `None` for causal laws, whose inputs depend on the state.
    pub fn input_marginal(&self, z: Sizes) -> Option<Vec<f64>> {
        let mut out = vec![0.0; z.x1 * z.x2];
        match self.kind {
            LawKind::InnerSc | LawKind::OuterSc => {
                for x1 in 0..z.x1 {
                    for x2 in 0..z.x2 {
                        out[x1 * z.x2 + x2] = self.factors[0].get(0, x2) * self.factors[1].get(x2, x1);
                    }
                }
            }
            LawKind::AsymInner => {
                for u in 0..self.card_u {
                    let pu = self.factors[0].get(0, u);
                    for x1 in 0..z.x1 {
                        for x2 in 0..z.x2 {
                            out[x1 * z.x2 + x2] +=
                                pu * self.factors[1].get(u, x2) * self.factors[2].get(u, x1);
                        }
                    }
                }
            }
            LawKind::ProductInput => {
                for x1 in 0..z.x1 {
                    for x2 in 0..z.x2 {
                        out[x1 * z.x2 + x2] = self.factors[0].get(0, x1) * self.factors[1].get(0, x2);
                    }
                }
            }
            LawKind::JointInput => out.copy_from_slice(&self.factors[0].data),
            LawKind::Causal => return None,
        }
        Some(out)
    }

    /// Short hex digest of the law's kind, sizes and factor entries.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(self.kind.as_str().as_bytes());
        h.update((self.card_u as u64).to_le_bytes());
        h.update((self.card_v as u64).to_le_bytes());
        for f in &self.factors {
            h.update((f.rows as u64).to_le_bytes());
            h.update((f.cols as u64).to_le_bytes());
            for x in &f.data {
                h.update(x.to_le_bytes());
            }
        }
        h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

fn uses_u(kind: LawKind, with_u: bool) -> bool {
    match kind {
        LawKind::OuterSc => with_u,
        LawKind::AsymInner | LawKind::Causal => true,
        _ => false,
    }
}

fn uses_v(kind: LawKind) -> bool {
    matches!(
        kind,
        LawKind::InnerSc | LawKind::OuterSc | LawKind::AsymInner | LawKind::Causal
    )
}

/// Sizes of the canonical `(S, U, V, X1, X2, Y)` layout for a law.
pub fn layout(z: Sizes, law: &FactoredLaw) -> [usize; 6] {
    [z.s, law.card_u, law.card_v, z.x1, z.x2, z.y]
}

/// Fills `out` with the joint over `(S, U, V, X1, X2, Y)`.
///
/// The law must already be validated against the channel.
pub fn assemble_into(ch: &ChannelSpec, law: &FactoredLaw, out: &mut Vec<f64>) {
    let z = ch.sizes;
    let (nu, nv) = (law.card_u, law.card_v);
    out.clear();
    out.resize(z.s * nu * nv * z.x1 * z.x2 * z.y, 0.0);
    let f = &law.factors;
    let with_u = law.has_u();
    let mut put = |s: usize, u: usize, v: usize, x1: usize, x2: usize, weight: f64| {
        if weight == 0.0 {
            return;
        }
        let base = ((((s * nu + u) * nv + v) * z.x1 + x1) * z.x2 + x2) * z.y;
        for (o, w) in out[base..base + z.y].iter_mut().zip(ch.row(s, x1, x2)) {
            *o = weight * w;
        }
    };
    for s in 0..z.s {
        let qs = ch.q_s[s];
        match law.kind {
            LawKind::InnerSc => {
                for x2 in 0..z.x2 {
                    for x1 in 0..z.x1 {
                        let a = qs * f[0].get(0, x2) * f[1].get(x2, x1);
                        for v in 0..nv {
                            put(s, 0, v, x1, x2, a * f[2].get(s * z.x2 + x2, v));
                        }
                    }
                }
            }
            LawKind::OuterSc => {
                for x2 in 0..z.x2 {
                    for x1 in 0..z.x1 {
                        let a = qs * f[0].get(0, x2) * f[1].get(x2, x1);
                        let r = (s * z.x1 + x1) * z.x2 + x2;
                        for v in 0..nv {
                            let b = a * f[2].get(r, v);
                            if with_u {
                                for u in 0..nu {
                                    put(s, u, v, x1, x2, b * f[3].get(v * z.s * z.x1 * z.x2 + r, u));
                                }
                            } else {
                                put(s, 0, v, x1, x2, b);
                            }
                        }
                    }
                }
            }
            LawKind::AsymInner => {
                for u in 0..nu {
                    let a = qs * f[0].get(0, u);
                    for x2 in 0..z.x2 {
                        for x1 in 0..z.x1 {
                            let b = a * f[1].get(u, x2) * f[2].get(u, x1);
                            for v in 0..nv {
                                put(s, u, v, x1, x2, b * f[3].get((s * nu + u) * z.x2 + x2, v));
                            }
                        }
                    }
                }
            }
            LawKind::Causal => {
                for v in 0..nv {
                    let a = qs * f[0].get(0, v);
                    for u in 0..nu {
                        let b = a * f[1].get(v, u);
                        for x2 in 0..z.x2 {
                            let c = b * f[2].get(v * z.s + s, x2);
                            for x1 in 0..z.x1 {
                                put(s, u, v, x1, x2, c * f[3].get((s * nv + v) * nu + u, x1));
                            }
                        }
                    }
                }
            }
            LawKind::ProductInput => {
                for x1 in 0..z.x1 {
                    for x2 in 0..z.x2 {
                        put(s, 0, 0, x1, x2, qs * f[0].get(0, x1) * f[1].get(0, x2));
                    }
                }
            }
            LawKind::JointInput => {
                for x1 in 0..z.x1 {
                    for x2 in 0..z.x2 {
                        put(s, 0, 0, x1, x2, qs * f[0].get(0, x1 * z.x2 + x2));
                    }
                }
            }
        }
    }
}

/// Joint pmf over `(S, [U,] [V,] X1, X2, Y)` induced by `law` on `ch`.
pub fn assemble_joint(ch: &ChannelSpec, law: &FactoredLaw) -> Result<JointPMF> {
    law.validate(ch, true)?;
    let z = ch.sizes;
    let dims = layout(z, law);
    checked_cells(&dims)?;
    let mut values = Vec::new();
    assemble_into(ch, law, &mut values);
    let mut axes = vec![Axis::new("S", z.s)];
    if uses_u(law.kind, law.has_u()) {
        axes.push(Axis::new("U", law.card_u));
    }
    if uses_v(law.kind) {
        axes.push(Axis::new("V", law.card_v));
    }
    axes.extend([Axis::new("X1", z.x1), Axis::new("X2", z.x2), Axis::new("Y", z.y)]);
    JointPMF::new(axes, values)
}

/// Random channel with Dirichlet(1) rows, used by property suites.
pub fn random_channel<R: rand::Rng>(rng: &mut R, z: Sizes) -> ChannelSpec {
    let q_s = random_pmf(rng, z.s);
    let mut w = Vec::with_capacity(z.s * z.x1 * z.x2 * z.y);
    for _ in 0..z.s * z.x1 * z.x2 {
        w.extend(random_pmf(rng, z.y));
    }
    ChannelSpec::from_flat(z, q_s, w).expect("random channel is valid")
}

/// A Dirichlet(1) sample of length `k`.
pub fn random_pmf<R: rand::Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    use rand_distr::{Distribution, Exp1};
    let mut v: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let t: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= t);
    v
}

/// Random law of a kind with every row drawn Dirichlet(1).
pub fn random_law<R: rand::Rng>(
    rng: &mut R,
    kind: LawKind,
    z: Sizes,
    card_u: usize,
    card_v: usize,
    with_u: bool,
) -> FactoredLaw {
    let mut law = FactoredLaw::uniform(kind, z, card_u, card_v, with_u);
    for f in &mut law.factors {
        for r in 0..f.rows {
            let p = random_pmf(rng, f.cols);
            f.row_mut(r).copy_from_slice(&p);
        }
    }
    law
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn no_params() -> BTreeMap<String, f64> {
        BTreeMap::new()
    }

    fn p(v: f64) -> BTreeMap<String, f64> {
        BTreeMap::from([("p".to_string(), v)])
    }

    #[test]
    fn builtins_are_valid() {
        for name in ["switch", "mod2-selector", "adder-mac"] {
            builtin_channel(name, &no_params()).unwrap().validate().unwrap();
        }
        builtin_channel("additive-binary-helper", &p(0.1)).unwrap();
        builtin_channel("fading-binary", &p(0.3)).unwrap();
        assert!(builtin_channel("additive-binary-helper", &no_params()).is_err());
        assert!(builtin_channel("nope", &no_params()).is_err());
    }

    #[test]
    fn mod2_selector_state_law() {
        let ch = builtin_channel("mod2-selector", &no_params()).unwrap();
        let p1 = ch.q_s[1] + ch.q_s[3];
        let p0 = ch.q_s[2] + ch.q_s[3];
        assert!((p1 - 0.110028).abs() < 1e-6);
        assert!((p0 - 0.110028).abs() < 1e-6);
    }

    #[test]
    fn state_determinism() {
        let sw = builtin_channel("switch", &no_params()).unwrap();
        assert!(!sw.is_state_deterministic());
        let m2 = builtin_channel("mod2-selector", &no_params()).unwrap();
        assert!(!m2.is_state_deterministic());
        let det = builtin_channel("additive-binary-helper", &p(0.0)).unwrap();
        assert!(det.is_state_deterministic());
        let noisy = builtin_channel("additive-binary-helper", &p(0.1)).unwrap();
        assert!(!noisy.is_state_deterministic());
        assert!(builtin_channel("fading-binary", &p(0.2)).unwrap().is_state_deterministic());
    }

    #[test]
    fn helper_p0_is_noiseless() {
        let ch = builtin_channel("additive-binary-helper", &p(0.0)).unwrap();
        for s in 0..2 {
            for x1 in 0..2 {
                for x2 in 0..2 {
                    let y = ((x1 ^ s) * 2 + x2) as usize;
                    assert_eq!(ch.w(s, x1, x2, y), 1.0);
                }
            }
        }
    }

    #[test]
    fn fading_kernel() {
        let ch = builtin_channel("fading-binary", &p(0.25)).unwrap();
        // S = +1, X1 = -1 gives Y1 = -1; X2 = +1 gives Y2 in {0, 2}.
        assert_eq!(ch.w(1, 0, 1, 2), 0.25);
        assert_eq!(ch.w(1, 0, 1, 1), 0.75);
    }

    #[test]
    fn json_roundtrip() {
        let ch = builtin_channel("mod2-selector", &no_params()).unwrap();
        let back = ChannelSpec::from_json_str(&ch.to_json_string()).unwrap();
        assert_eq!(ch, back);
        let bad = r#"{"sizes":{"S":1,"X1":1,"X2":1,"Y":2},"Q_S":[1.0],"W":[[[[0.5,0.6]]]]}"#;
        assert!(ChannelSpec::from_json_str(bad).is_err());
    }

    #[test]
    fn inner_law_with_constant_v_keeps_inputs_independent_of_state() {
        let ch = builtin_channel("additive-binary-helper", &p(0.1)).unwrap();
        let law = FactoredLaw::uniform(LawKind::InnerSc, ch.sizes, 1, 1, false);
        let j = assemble_joint(&ch, &law).unwrap();
        assert!(j.mutual_info(&["X1"], &["S"]).unwrap().abs() < 1e-12);
        let total: f64 = j.values().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn outer_copy_of_state() {
        let ch = builtin_channel("switch", &no_params()).unwrap();
        let z = ch.sizes;
        let rows = (0..z.s * z.x1 * z.x2)
            .map(|r| {
                let s = r / (z.x1 * z.x2);
                (0..2).map(|v| if v == s { 1.0 } else { 0.0 }).collect()
            })
            .collect();
        let law = FactoredLaw::outer_sc(vec![0.5, 0.5], vec![vec![0.3, 0.7], vec![0.6, 0.4]], rows).unwrap();
        let j = assemble_joint(&ch, &law).unwrap();
        let i = j.cond_mutual_info(&["V"], &["S"], &["X1", "X2"]).unwrap();
        assert!((i - j.entropy(&["S"]).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn random_laws_respect_markov_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let z = Sizes { s: 2, x1: 3, x2: 2, y: 3 };
            let ch = random_channel(&mut rng, z);
            let inner = random_law(&mut rng, LawKind::InnerSc, z, 1, 3, false);
            let j = assemble_joint(&ch, &inner).unwrap();
            let s_marg = j.marginal(&["S"]).unwrap();
            for (a, b) in s_marg.values().iter().zip(&ch.q_s) {
                assert!((a - b).abs() < 1e-9);
            }
            assert!(j.mutual_info(&["X1", "X2"], &["S"]).unwrap() < 1e-9);
            let direct = j.cond_mutual_info(&["X1"], &["V", "S"], &["X2"]).unwrap();
            let chained = j.cond_mutual_info(&["X1"], &["V"], &["X2"]).unwrap()
                + j.cond_mutual_info(&["X1"], &["S"], &["V", "X2"]).unwrap();
            assert!((direct - chained).abs() < 1e-9);

            let causal = random_law(&mut rng, LawKind::Causal, z, 2, 3, false);
            let j = assemble_joint(&ch, &causal).unwrap();
            assert!(j.mutual_info(&["U", "V"], &["S"]).unwrap() < 1e-9);
        }
    }

    #[test]
    fn cardinality_bound_enforced() {
        let ch = builtin_channel("switch", &no_params()).unwrap();
        let big = card_v_bound(ch.sizes) + 1;
        let law = FactoredLaw::uniform(LawKind::InnerSc, ch.sizes, 1, big, false);
        assert!(law.validate(&ch, false).is_err());
        assert!(law.validate(&ch, true).is_ok());
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let ch = builtin_channel("switch", &no_params()).unwrap();
        let other = builtin_channel("mod2-selector", &no_params()).unwrap();
        let law = FactoredLaw::uniform(LawKind::InnerSc, other.sizes, 1, 2, false);
        assert!(assemble_joint(&ch, &law).is_err());
    }
}
