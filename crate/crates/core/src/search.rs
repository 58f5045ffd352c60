//! Law search: rate regions, sum capacity, membership and closed-form oracles.
//!
//! Regions are traced by maximizing the support function of each law's corner
//! polygon at a grid of weights. Each weight is optimized by multi-start
//! coordinate ascent over the rows of the law's conditional tables; every law
//! found for any weight is then scored at every weight, so the reported
//! support values always dominate the hull.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{BoundKind, CornerEvaluation, Evaluator};
use crate::channel::{card_v_bound, random_law, random_pmf, ChannelSpec, CondTable, FactoredLaw, LawKind, Sizes};
use crate::error::{invalid, Error, Result};
use crate::geometry::{convex_hull, distance_to_hull, RatePoint};
use crate::prob::{conv, h2};

/// How per-law corners are combined into a region.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegionMode {
    /// Convex hull of the union of per-law pentagons.
    PentagonUnion,
    /// The single pentagon built from separately maximized caps.
    Decoupled,
}

impl RegionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RegionMode::PentagonUnion => "pentagon-union",
            RegionMode::Decoupled => "decoupled",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "pentagon-union" => Ok(RegionMode::PentagonUnion),
            "decoupled" => Ok(RegionMode::Decoupled),
            _ => invalid(format!("unknown region mode {s}")),
        }
    }
}

/// Search hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Number of weights on [0, 1]; a single point means weight 0 only.
    pub lambda_points: usize,
    /// Random starts on top of the structured ones.
    pub restarts: usize,
    /// Coordinate-ascent passes per start.
    pub sweeps: usize,
    /// Coarse line-search grid per coordinate.
    pub resolution: usize,
    /// |V| override; defaults depend on the bound.
    pub card_v: Option<usize>,
    /// |U| override; defaults depend on the bound.
    pub card_u: Option<usize>,
    pub seed: u64,
    /// Upper limits on Pr{X1 != 0} and Pr{X2 != 0}.
    pub input_caps: Option<[f64; 2]>,
    /// Smallest improvement of a sweep that keeps the ascent going.
    pub tol: f64,
    pub mode: RegionMode,
    /// Drop the decodability constraint of the inner bound.
    pub relax: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            lambda_points: 33,
            restarts: 3,
            sweeps: 4,
            resolution: 8,
            card_v: None,
            card_u: None,
            seed: 0,
            input_caps: None,
            tol: 1e-9,
            mode: RegionMode::PentagonUnion,
            relax: false,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_points == 0 || self.restarts == 0 || self.sweeps == 0 {
            return invalid("lambda points, restarts and sweeps must be positive");
        }
        if self.resolution < 2 {
            return invalid("search resolution must be at least 2");
        }
        if !(self.tol > 0.0) {
            return invalid("search tolerance must be positive");
        }
        if self.card_v == Some(0) || self.card_u == Some(0) {
            return invalid("auxiliary cardinalities must be positive");
        }
        if let Some(c) = self.input_caps {
            if c.iter().any(|q| !(0.0..=1.0).contains(q)) {
                return invalid("input caps must lie in [0,1]");
            }
        }
        Ok(())
    }

    /// The weight grid.
    pub fn lambdas(&self) -> Vec<f64> {
        if self.lambda_points == 1 {
            return vec![0.0];
        }
        let n = self.lambda_points - 1;
        (0..=n).map(|i| i as f64 / n as f64).collect()
    }
}

/// Auxiliary alphabet sizes used for a search, with a note when a default
/// is a heuristic rather than a proven bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cardinalities {
    pub card_u: usize,
    pub card_v: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Default (or overridden) auxiliary cardinalities for a bound.
pub fn cardinalities(z: Sizes, bound: BoundKind, cfg: &SearchConfig) -> Cardinalities {
    let (cu, cv, note) = match bound {
        BoundKind::InnerSc | BoundKind::OuterSc => (1, card_v_bound(z), None),
        BoundKind::OuterScWithU => (
            2,
            card_v_bound(z),
            Some("|U| default 2 is a search heuristic; no bound is known".to_string()),
        ),
        BoundKind::AsymInner => (
            2,
            z.s * z.x2,
            Some("|U| = 2 and |V| = |S||X2| are search heuristics".to_string()),
        ),
        BoundKind::Causal => (
            z.x1.saturating_pow(z.s as u32),
            z.x2.saturating_pow(z.s as u32),
            Some("|V| = |X2|^|S| and |U| = |X1|^|S| (all Shannon strategies) is a heuristic default".to_string()),
        ),
        _ => (1, 1, None),
    };
    let has_u = matches!(
        bound,
        BoundKind::OuterScWithU | BoundKind::AsymInner | BoundKind::Causal
    );
    let has_v = has_u || matches!(bound, BoundKind::InnerSc | BoundKind::OuterSc);
    Cardinalities {
        card_u: if has_u { cfg.card_u.unwrap_or(cu) } else { 1 },
        card_v: if has_v { cfg.card_v.unwrap_or(cv) } else { 1 },
        note: note.filter(|_| (has_u && cfg.card_u.is_none()) || (has_v && cfg.card_v.is_none())),
    }
}

/// Best corner found at one weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportSample {
    pub lambda: f64,
    pub value: f64,
    /// Vertex of the winning corner polygon attaining the support.
    pub corner: RatePoint,
    pub evaluation: CornerEvaluation,
    pub law_digest: String,
}

/// A searched rate region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRegion {
    pub bound: BoundKind,
    pub mode: RegionMode,
    pub cardinalities: Cardinalities,
    pub samples: Vec<SupportSample>,
    /// Counter-clockwise hull vertices starting at the origin.
    pub hull: Vec<RatePoint>,
    /// Largest R1 cap over feasible laws found.
    pub max_r1: f64,
    /// Largest sum cap over feasible laws found.
    pub max_sum: f64,
    /// Laws behind the samples (projected onto the input caps), deduplicated.
    pub witnesses: Vec<FactoredLaw>,
    pub evaluations: u64,
}

impl RateRegion {
    /// Support of the hull at `lambda`.
    pub fn support(&self, lambda: f64) -> f64 {
        crate::geometry::support(&self.hull, lambda)
    }

    /// Largest R1 with Rc = 0 in the hull.
    pub fn r1_at_zero_rc(&self) -> f64 {
        self.hull
            .iter()
            .filter(|p| p.rc.abs() <= 1e-12)
            .map(|p| p.r1)
            .fold(0.0, f64::max)
    }

    /// CSV rows `lambda,rc,r1,sum_cap,r1_cap,feasible`, header included.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,rc,r1,sum_cap,r1_cap,feasible\n");
        for s in &self.samples {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                s.lambda, s.corner.rc, s.corner.r1, s.evaluation.sum_cap, s.evaluation.r1_cap, s.evaluation.feasible
            ));
        }
        out
    }
}

/// Search score: the support value when feasible, otherwise the (negative)
/// constraint value shifted below every feasible score.
fn score(e: &CornerEvaluation, lambda: f64) -> f64 {
    if !e.feasible {
        return e.constraint_slack.unwrap_or(-1.0) - 1.0;
    }
    e.support(lambda).map_or(0.0, |(v, _)| v)
}

/// Scales input tables so that Pr{X1 != 0} <= caps[0] and Pr{X2 != 0} <= caps[1],
/// moving the removed mass to symbol 0.
pub fn apply_input_caps(ch: &ChannelSpec, law: &mut FactoredLaw, caps: [f64; 2]) {
    let z = ch.sizes;
    if law.kind == LawKind::JointInput {
        let t = &mut law.factors[0].data;
        // X1 first: moving (x1, x2) to (0, x2) keeps the X2 marginal.
        let p1: f64 = t[z.x2..].iter().sum();
        if p1 > caps[0] {
            let keep = caps[0] / p1;
            for x1 in 1..z.x1 {
                for x2 in 0..z.x2 {
                    let k = x1 * z.x2 + x2;
                    let m = t[k] * (1.0 - keep);
                    t[k] -= m;
                    t[x2] += m;
                }
            }
        }
        let p2: f64 = (0..z.x1).flat_map(|x1| (1..z.x2).map(move |x2| (x1, x2))).map(|(a, b)| t[a * z.x2 + b]).sum();
        if p2 > caps[1] {
            let keep = caps[1] / p2;
            for x1 in 0..z.x1 {
                for x2 in 1..z.x2 {
                    let k = x1 * z.x2 + x2;
                    let m = t[k] * (1.0 - keep);
                    t[k] -= m;
                    t[x1 * z.x2] += m;
                }
            }
        }
        return;
    }
    // X2 first: the weights of the X1 rows may depend on X2's law.
    for which in [1usize, 0] {
        let (fi, weights) = cap_rows(ch, law, which);
        let t = &law.factors[fi];
        let mass: f64 = weights.iter().enumerate().map(|(r, w)| w * (1.0 - t.get(r, 0))).sum();
        if mass > caps[which] {
            let keep = caps[which] / mass;
            let t = &mut law.factors[fi];
            for r in 0..t.rows {
                let row = t.row_mut(r);
                let mut rest = 0.0;
                for x in row[1..].iter_mut() {
                    *x *= keep;
                    rest += *x;
                }
                row[0] = (1.0 - rest).max(0.0);
            }
        }
    }
}

/// The factor holding input `which` (0 = X1, 1 = X2) and the probability
/// of each of its rows.
fn cap_rows(ch: &ChannelSpec, law: &FactoredLaw, which: usize) -> (usize, Vec<f64>) {
    let z = ch.sizes;
    let f = &law.factors;
    let (nu, nv) = (law.card_u, law.card_v);
    match (law.kind, which) {
        (LawKind::InnerSc | LawKind::OuterSc, 1) => (0, vec![1.0]),
        (LawKind::InnerSc | LawKind::OuterSc, _) => (1, f[0].row(0).to_vec()),
        (LawKind::AsymInner, 1) => (1, f[0].row(0).to_vec()),
        (LawKind::AsymInner, _) => (2, f[0].row(0).to_vec()),
        (LawKind::Causal, 1) => {
            let mut w = vec![0.0; nv * z.s];
            for v in 0..nv {
                for s in 0..z.s {
                    w[v * z.s + s] = f[0].get(0, v) * ch.q_s[s];
                }
            }
            (2, w)
        }
        (LawKind::Causal, _) => {
            let mut w = vec![0.0; z.s * nv * nu];
            for s in 0..z.s {
                for v in 0..nv {
                    for u in 0..nu {
                        w[(s * nv + v) * nu + u] = ch.q_s[s] * f[0].get(0, v) * f[1].get(v, u);
                    }
                }
            }
            (3, w)
        }
        (LawKind::ProductInput, 1) => (1, vec![1.0]),
        (LawKind::ProductInput, _) => (0, vec![1.0]),
        (LawKind::JointInput, _) => unreachable!("joint laws are capped directly"),
    }
}

/// Pads the V alphabet of an inner-sc, outer-sc (without U) or asym-inner law
/// with never-used symbols.
pub fn pad_card_v(law: &FactoredLaw, card_v: usize) -> Result<FactoredLaw> {
    if card_v < law.card_v {
        return invalid("cannot shrink |V| by padding");
    }
    let vi = match law.kind {
        LawKind::InnerSc => 2,
        LawKind::OuterSc if !law.has_u() => 2,
        LawKind::AsymInner => 3,
        _ => {
            return Err(Error::Unsupported(format!(
                "padding |V| of a {} law",
                law.kind.as_str()
            )))
        }
    };
    let mut out = law.clone();
    let t = &law.factors[vi];
    let mut data = Vec::with_capacity(t.rows * card_v);
    for r in 0..t.rows {
        data.extend_from_slice(t.row(r));
        data.extend(std::iter::repeat(0.0).take(card_v - t.cols));
    }
    out.factors[vi] = CondTable {
        rows: t.rows,
        cols: card_v,
        data,
    };
    out.card_v = card_v;
    Ok(out)
}

/// Laws the search always starts from: uniform inputs with copy, index and
/// constant auxiliaries, Shannon strategies, diagonal joints.
pub fn structured_seeds(z: Sizes, bound: BoundKind, card_u: usize, card_v: usize) -> Vec<FactoredLaw> {
    let kind = bound.law_kind();
    let with_u = bound.uses_u_factor();
    let base = FactoredLaw::uniform(kind, z, card_u, card_v, with_u);
    let mut out = vec![base.clone()];
    let with_table = |fi: usize, f: &dyn Fn(usize) -> usize| {
        let mut l = base.clone();
        let t = &l.factors[fi];
        l.factors[fi] = CondTable::deterministic(t.rows, t.cols, |r| f(r) % t.cols);
        l
    };
    match kind {
        LawKind::InnerSc => {
            out.push(with_table(2, &|r| r / z.x2));
            out.push(with_table(2, &|r| r));
            out.push(with_table(2, &|_| 0));
        }
        LawKind::OuterSc => {
            let per_s = z.x1 * z.x2;
            let mut laws = vec![
                with_table(2, &|r| r / per_s),
                with_table(2, &|r| (r / per_s) * z.x2 + r % z.x2),
                with_table(2, &|r| r),
                with_table(2, &|_| 0),
            ];
            if with_u {
                for l in &mut laws {
                    let t = &l.factors[3];
                    l.factors[3] = CondTable::deterministic(t.rows, t.cols, |_| 0);
                }
            }
            out.extend(laws);
        }
        LawKind::AsymInner => {
            out.push(with_table(3, &|r| r / (card_u * z.x2)));
            out.push(with_table(3, &|r| (r / (card_u * z.x2)) * z.x2 + r % z.x2));
            out.push(with_table(3, &|_| 0));
        }
        LawKind::Causal => {
            // Strategy index k maps state s to digit s of k in base |X|.
            let digit = |k: usize, s: usize, base: usize| (k / base.pow(s as u32)) % base;
            let mut l = base.clone();
            l.factors[2] = CondTable::deterministic(card_v * z.s, z.x2, |r| digit(r / z.s, r % z.s, z.x2));
            l.factors[3] = CondTable::deterministic(z.s * card_v * card_u, z.x1, |r| {
                digit(r % card_u, r / (card_v * card_u), z.x1)
            });
            let mut concentrated = l.clone();
            concentrated.factors[0] = CondTable::deterministic(1, card_v, |_| 0);
            out.push(l);
            out.push(concentrated);
        }
        LawKind::ProductInput => {
            let mut l = base.clone();
            l.factors[1] = CondTable::deterministic(1, z.x2, |_| 0);
            out.push(l);
        }
        LawKind::JointInput => {
            let m = z.x1.min(z.x2);
            let mut data = vec![0.0; z.x1 * z.x2];
            for i in 0..m {
                data[i * z.x2 + i] = 1.0 / m as f64;
            }
            let mut l = base.clone();
            l.factors[0].data = data;
            out.push(l);
        }
    }
    out
}

/// Per-start RNG: stream `index` of the seed.
pub fn item_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn set_coord(row: &mut [f64], orig: &[f64], j: usize, t: f64) {
    let rest = 1.0 - orig[j];
    let k = row.len();
    for i in 0..k {
        row[i] = if i == j {
            t
        } else if rest > 1e-12 {
            orig[i] * (1.0 - t) / rest
        } else {
            (1.0 - t) / (k - 1) as f64
        };
    }
}

struct Searcher<'a> {
    ch: &'a ChannelSpec,
    ev: Evaluator<'a>,
    caps: Option<[f64; 2]>,
    resolution: usize,
    tol: f64,
    work: FactoredLaw,
    evals: u64,
}

const GOLDEN_STEPS: usize = 12;

impl<'a> Searcher<'a> {
    fn eval(&mut self, law: &FactoredLaw) -> CornerEvaluation {
        self.evals += 1;
        match self.caps {
            None => self.ev.eval_unchecked(law),
            Some(c) => {
                self.work.clone_from(law);
                apply_input_caps(self.ch, &mut self.work, c);
                self.ev.eval_unchecked(&self.work)
            }
        }
    }

    fn projected(&self, law: &FactoredLaw) -> FactoredLaw {
        let mut l = law.clone();
        if let Some(c) = self.caps {
            apply_input_caps(self.ch, &mut l, c);
        }
        l
    }

    fn score(&mut self, law: &FactoredLaw, lambda: f64) -> f64 {
        let e = self.eval(law);
        score(&e, lambda)
    }

    #[allow(clippy::too_many_arguments)]
    fn try_coord(&mut self, law: &mut FactoredLaw, f: usize, r: usize, j: usize, orig: &[f64], t: f64, lambda: f64) -> f64 {
        set_coord(law.factors[f].row_mut(r), orig, j, t);
        self.score(law, lambda)
    }

    /// Coarse grid then golden-section refinement along one simplex coordinate.
    fn line_search(&mut self, law: &mut FactoredLaw, f: usize, r: usize, j: usize, lambda: f64, cur: f64) -> f64 {
        let orig = law.factors[f].row(r).to_vec();
        let g = self.resolution;
        let mut best = (orig[j], cur);
        for i in 0..=g {
            let t = i as f64 / g as f64;
            if (t - orig[j]).abs() < 1e-15 {
                continue;
            }
            let s = self.try_coord(law, f, r, j, &orig, t, lambda);
            if s > best.1 {
                best = (t, s);
            }
        }
        let h = 1.0 / g as f64;
        let (mut lo, mut hi) = ((best.0 - h).max(0.0), (best.0 + h).min(1.0));
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut a = hi - phi * (hi - lo);
        let mut b = lo + phi * (hi - lo);
        let mut fa = self.try_coord(law, f, r, j, &orig, a, lambda);
        let mut fb = self.try_coord(law, f, r, j, &orig, b, lambda);
        for (t, s) in [(a, fa), (b, fb)] {
            if s > best.1 {
                best = (t, s);
            }
        }
        for _ in 0..GOLDEN_STEPS {
            if fa >= fb {
                hi = b;
                b = a;
                fb = fa;
                a = hi - phi * (hi - lo);
                fa = self.try_coord(law, f, r, j, &orig, a, lambda);
                if fa > best.1 {
                    best = (a, fa);
                }
            } else {
                lo = a;
                a = b;
                fa = fb;
                b = lo + phi * (hi - lo);
                fb = self.try_coord(law, f, r, j, &orig, b, lambda);
                if fb > best.1 {
                    best = (b, fb);
                }
            }
        }
        if best.1 > cur {
            set_coord(law.factors[f].row_mut(r), &orig, j, best.0);
            best.1
        } else {
            law.factors[f].row_mut(r).copy_from_slice(&orig);
            cur
        }
    }

    /// Pairwise mass transfers of a fixed step inside every row.
    fn transfer_pass(&mut self, law: &mut FactoredLaw, lambda: f64, mut cur: f64, step: f64) -> f64 {
        for f in 0..law.factors.len() {
            let (rows, cols) = (law.factors[f].rows, law.factors[f].cols);
            if cols < 2 {
                continue;
            }
            for r in 0..rows {
                for i in 0..cols {
                    for j in 0..cols {
                        let row = law.factors[f].row_mut(r);
                        if i == j || row[i] <= 0.0 {
                            continue;
                        }
                        let (oi, oj) = (row[i], row[j]);
                        let d = step.min(oi);
                        row[i] = oi - d;
                        row[j] = oj + d;
                        let s = self.score(law, lambda);
                        if s > cur {
                            cur = s;
                        } else {
                            let row = law.factors[f].row_mut(r);
                            row[i] = oi;
                            row[j] = oj;
                        }
                    }
                }
            }
        }
        cur
    }

    /// Coordinate ascent followed by a local transfer grid, in place.
    fn ascend(&mut self, law: &mut FactoredLaw, lambda: f64, sweeps: usize) -> f64 {
        let mut cur = self.score(law, lambda);
        for _ in 0..sweeps {
            let start = cur;
            for f in 0..law.factors.len() {
                let (rows, cols) = (law.factors[f].rows, law.factors[f].cols);
                if cols < 2 {
                    continue;
                }
                for r in 0..rows {
                    for j in 0..cols {
                        cur = self.line_search(law, f, r, j, lambda, cur);
                    }
                }
            }
            if cur - start <= self.tol {
                break;
            }
        }
        let g = self.resolution as f64;
        for step in [1.0 / (4.0 * g), 1.0 / (16.0 * g)] {
            cur = self.transfer_pass(law, lambda, cur, step);
        }
        cur
    }
}

/// Weights that need their own optimization: all below 1/2, and a single
/// representative for the rest (their objective is a multiple of the sum cap).
fn weight_classes(lambdas: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = lambdas.iter().copied().filter(|&l| l < 0.5).collect();
    if lambdas.iter().any(|&l| l >= 0.5) {
        out.push(0.5);
    }
    out
}

/// Traces the region of `bound` on `ch`.
pub fn compute_region(ch: &ChannelSpec, bound: BoundKind, cfg: &SearchConfig) -> Result<RateRegion> {
    compute_region_seeded(ch, bound, cfg, &[])
}

/// As [`compute_region`], with extra laws added to the candidate pool as
/// given, so the result contains their corners.
pub fn compute_region_seeded(
    ch: &ChannelSpec,
    bound: BoundKind,
    cfg: &SearchConfig,
    seeds: &[FactoredLaw],
) -> Result<RateRegion> {
    cfg.validate()?;
    ch.validate()?;
    let z = ch.sizes;
    let card = cardinalities(z, bound, cfg);
    let ev = Evaluator::new(ch, bound, cfg.relax, card.card_u, card.card_v)?;
    for s in seeds {
        ev.check(s)?;
    }
    let kind = bound.law_kind();
    let mut starts = structured_seeds(z, bound, card.card_u, card.card_v);
    for i in 0..cfg.restarts {
        let mut rng = item_rng(cfg.seed, i as u64);
        starts.push(random_law(&mut rng, kind, z, card.card_u, card.card_v, bound.uses_u_factor()));
    }

    let work = starts[0].clone();
    let mut searcher = Searcher {
        ch,
        ev,
        caps: cfg.input_caps,
        resolution: cfg.resolution,
        tol: cfg.tol,
        work,
        evals: 0,
    };

    let lambdas = cfg.lambdas();
    let classes = match cfg.mode {
        RegionMode::PentagonUnion => weight_classes(&lambdas),
        RegionMode::Decoupled => vec![0.0, 0.5],
    };
    let mut pool: Vec<FactoredLaw> = seeds.iter().map(|s| searcher.projected(s)).collect();
    for &lambda in &classes {
        for start in &starts {
            let mut law = start.clone();
            searcher.ascend(&mut law, lambda, cfg.sweeps);
            pool.push(searcher.projected(&law));
        }
    }
    let evals: Vec<CornerEvaluation> = pool.iter().map(|l| searcher.ev.eval_unchecked(l)).collect();
    let digests: Vec<String> = pool.iter().map(FactoredLaw::digest).collect();

    let feasible = || evals.iter().enumerate().filter(|(_, e)| e.feasible);
    let arg_max = |key: &dyn Fn(&CornerEvaluation) -> f64| {
        feasible().fold(None, |acc: Option<(usize, f64)>, (i, e)| match acc {
            Some((_, v)) if key(e) <= v => acc,
            _ => Some((i, key(e))),
        })
    };
    let best_r1 = arg_max(&|e| e.r1_cap);
    let best_sum = arg_max(&|e| e.sum_cap);
    let max_r1 = best_r1.map_or(0.0, |x| x.1);
    let max_sum = best_sum.map_or(0.0, |x| x.1);

    let mut samples = Vec::with_capacity(lambdas.len());
    let mut used: Vec<usize> = Vec::new();
    let mut hull_pts: Vec<RatePoint> = Vec::new();
    match cfg.mode {
        RegionMode::PentagonUnion => {
            for &lambda in &lambdas {
                let mut best: Option<(f64, RatePoint, usize)> = None;
                for (i, e) in feasible() {
                    if let Some((v, p)) = e.support(lambda) {
                        match best {
                            Some((bv, bp, _)) if v < bv || (v == bv && p.r1 <= bp.r1) => {}
                            _ => best = Some((v, p, i)),
                        }
                    }
                }
                if let Some((v, p, i)) = best {
                    if !used.contains(&i) {
                        used.push(i);
                    }
                    samples.push(SupportSample {
                        lambda,
                        value: v,
                        corner: p,
                        evaluation: evals[i],
                        law_digest: digests[i].clone(),
                    });
                }
            }
        }
        RegionMode::Decoupled => {
            let rc_cap = evals.iter().filter(|e| e.feasible).filter_map(|e| e.rc_cap).reduce(f64::max);
            let joint = CornerEvaluation {
                r1_cap: max_r1,
                sum_cap: max_sum,
                constraint_slack: None,
                feasible: true,
                r1_caps: None,
                rc_cap,
            };
            hull_pts.extend(joint.vertices());
            for (i, _) in [best_r1, best_sum].into_iter().flatten() {
                if !used.contains(&i) {
                    used.push(i);
                }
            }
            for &lambda in &lambdas {
                if let Some((v, p)) = joint.support(lambda) {
                    let src = if p.r1 > 0.0 { best_r1 } else { best_sum };
                    samples.push(SupportSample {
                        lambda,
                        value: v,
                        corner: p,
                        evaluation: joint,
                        law_digest: src.map_or_else(String::new, |(i, _)| digests[i].clone()),
                    });
                }
            }
        }
    }
    if cfg.mode == RegionMode::PentagonUnion {
        // Every feasible pentagon enters the hull, not only the per-weight
        // winners: a law that loses at all sampled weights can still own a
        // vertex between them.
        hull_pts.extend(feasible().flat_map(|(_, e)| e.vertices()));
    }
    let hull = convex_hull(&hull_pts);
    if cfg.mode == RegionMode::PentagonUnion {
        for (i, e) in feasible() {
            if !used.contains(&i) && e.vertices().iter().any(|v| hull.contains(v)) {
                used.push(i);
            }
        }
    }
    Ok(RateRegion {
        bound,
        mode: cfg.mode,
        cardinalities: card,
        samples,
        hull,
        max_r1,
        max_sum,
        witnesses: used.into_iter().map(|i| pool[i].clone()).collect(),
        evaluations: searcher.evals,
    })
}

/// Inner-sc, outer-sc and prop1 regions traced with matched-law warm starts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NestedRegions {
    pub inner: RateRegion,
    pub outer: RateRegion,
    pub prop1: RateRegion,
}

/// Traces the three bounds so that each larger one is seeded with the laws
/// of the smaller one: inner witnesses lifted to outer-sc laws, outer
/// witnesses reduced to their input marginals for prop1. Without the seeds
/// a finite search can land slightly inside a region it should contain.
pub fn nested_regions(ch: &ChannelSpec, cfg: &SearchConfig) -> Result<NestedRegions> {
    let z = ch.sizes;
    let inner = compute_region(ch, BoundKind::InnerSc, cfg)?;
    let lifted = inner
        .witnesses
        .iter()
        .map(|l| l.lift_to_outer(z))
        .collect::<Result<Vec<_>>>()?;
    let outer = compute_region_seeded(ch, BoundKind::OuterSc, cfg, &lifted)?;
    let mut matched = Vec::with_capacity(outer.witnesses.len());
    for l in &outer.witnesses {
        if let Some(m) = l.input_marginal(z) {
            matched.push(FactoredLaw::joint_input(vec![m])?);
        }
    }
    let prop1 = compute_region_seeded(ch, BoundKind::Prop1, cfg, &matched)?;
    Ok(NestedRegions { inner, outer, prop1 })
}

/// Result of [`sum_capacity`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumCapacity {
    /// Bits per channel use.
    pub value: f64,
    /// Maximizing joint input, indexed `x1*|X2| + x2`.
    pub input: Vec<f64>,
    /// Upper bound minus value at termination.
    pub gap: f64,
    pub iterations: usize,
    pub method: String,
}

const BA_GAP: f64 = 1e-10;
const BA_MAX_ITERS: usize = 200_000;

/// Blahut-Arimoto on the state-averaged kernel from the starting input `p`.
/// Returns (value, input, gap, iterations) in bits.
fn blahut_arimoto(kernel: &[f64], k: usize, ny: usize, mut p: Vec<f64>) -> (f64, Vec<f64>, f64, usize) {
    let ln2 = std::f64::consts::LN_2;
    let mut q = vec![0.0; ny];
    let mut d = vec![0.0; k];
    let mut it = 0;
    loop {
        q.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..k {
            for y in 0..ny {
                q[y] += p[i] * kernel[i * ny + y];
            }
        }
        for i in 0..k {
            d[i] = (0..ny)
                .map(|y| {
                    let w = kernel[i * ny + y];
                    if w > 0.0 {
                        w * (w / q[y]).ln()
                    } else {
                        0.0
                    }
                })
                .sum();
        }
        let lower: f64 = p.iter().zip(&d).map(|(a, b)| a * b).sum();
        let upper = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let gap = (upper - lower).max(0.0) / ln2;
        if gap <= BA_GAP || it >= BA_MAX_ITERS {
            return ((lower / ln2).max(0.0), p, gap, it);
        }
        let mut t = 0.0;
        for i in 0..k {
            p[i] *= (d[i] - upper).exp();
            t += p[i];
        }
        p.iter_mut().for_each(|x| *x /= t);
        it += 1;
    }
}

/// I(X1,X2;Y) in bits for a joint input on the averaged kernel.
pub fn input_information(kernel: &[f64], ny: usize, p: &[f64]) -> f64 {
    let mut q = vec![0.0; ny];
    for (i, &pi) in p.iter().enumerate() {
        for y in 0..ny {
            q[y] += pi * kernel[i * ny + y];
        }
    }
    let mut v = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        if pi <= 0.0 {
            continue;
        }
        for y in 0..ny {
            let w = kernel[i * ny + y];
            if w > 0.0 {
                v += pi * w * (w / q[y]).log2();
            }
        }
    }
    v.max(0.0)
}

/// Largest input count for the exhaustive grid fallback.
pub const GRID_MAX_INPUTS: usize = 16;

/// Maximum of I(X1,X2;Y) over joint inputs on the simplex grid with step
/// `1/resolution`.
pub fn sum_capacity_grid(ch: &ChannelSpec, resolution: usize) -> Result<(f64, Vec<f64>)> {
    let z = ch.sizes;
    let k = z.x1 * z.x2;
    if k > GRID_MAX_INPUTS {
        return Err(Error::Resource(format!("grid search over {k} inputs is too large")));
    }
    if resolution == 0 {
        return invalid("grid resolution must be positive");
    }
    let kernel = ch.averaged_kernel();
    let mut counts = vec![0usize; k];
    let mut best = (f64::NEG_INFINITY, vec![]);
    fn rec(i: usize, left: usize, counts: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if i + 1 == counts.len() {
            counts[i] = left;
            f(counts);
            return;
        }
        for c in 0..=left {
            counts[i] = c;
            rec(i + 1, left - c, counts, f);
        }
    }
    let mut visit = |c: &[usize]| {
        let p: Vec<f64> = c.iter().map(|&x| x as f64 / resolution as f64).collect();
        let v = input_information(&kernel, z.y, &p);
        if v > best.0 {
            best = (v, p);
        }
    };
    rec(0, resolution, &mut counts, &mut visit);
    Ok(best)
}

/// max over joint input laws of I(X1,X2;Y).
pub fn sum_capacity(ch: &ChannelSpec, cfg: &SearchConfig) -> Result<SumCapacity> {
    cfg.validate()?;
    ch.validate()?;
    let z = ch.sizes;
    let k = z.x1 * z.x2;
    let kernel = ch.averaged_kernel();
    let mut starts = vec![vec![1.0 / k as f64; k]];
    for i in 0..cfg.restarts {
        let mut rng = item_rng(cfg.seed, i as u64);
        starts.push(random_pmf(&mut rng, k));
    }
    let mut best: Option<(f64, Vec<f64>, f64, usize)> = None;
    for p in starts {
        let r = blahut_arimoto(&kernel, k, z.y, p);
        if best.as_ref().map_or(true, |b| r.0 > b.0) {
            best = Some(r);
        }
    }
    let (value, input, gap, iterations) = best.expect("at least one start");
    let mut out = SumCapacity {
        value,
        input,
        gap,
        iterations,
        method: "blahut-arimoto".into(),
    };
    if gap > 1e-6 && k <= GRID_MAX_INPUTS {
        let (v, p) = sum_capacity_grid(ch, cfg.resolution.max(2) * 4)?;
        if v > out.value {
            out.value = v;
            out.input = p;
            out.method = "grid".into();
        }
    }
    Ok(out)
}

/// Membership verdicts. A search only yields inner approximations, so a
/// point can never be certified outside.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Inside,
    OutsideAtResolution,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Inside => "inside",
            Verdict::OutsideAtResolution => "outside at this search resolution",
        }
    }
}

/// Membership of `pt` in the searched hull, with its distance to the hull.
pub fn membership(region: &RateRegion, pt: RatePoint, tol: f64) -> (Verdict, f64) {
    let d = distance_to_hull(pt, &region.hull);
    let v = if d <= tol {
        Verdict::Inside
    } else {
        Verdict::OutsideAtResolution
    };
    (v, d)
}

/// Closed-form rate of the additive binary helper channel at Rc = 0 with
/// Pr{X1 = 1} <= q1 and an unconstrained helper.
pub fn example3(p: f64, q1: f64) -> Result<f64> {
    for (n, v) in [("p", p), ("q1", q1)] {
        if !(0.0..=1.0).contains(&v) {
            return invalid(format!("{n} = {v} is outside [0,1]"));
        }
    }
    Ok(if q1 >= 0.5 {
        1.0 - h2(p)
    } else {
        h2(conv(p, q1)) - h2(p)
    })
}

/// Maximizer of the fading helper expression.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Example6 {
    pub value: f64,
    pub q1: f64,
    pub q2: f64,
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - phi * (hi - lo);
    let mut b = lo + phi * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..iters {
        if fa >= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - phi * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + phi * (hi - lo);
            fb = f(b);
        }
    }
    if fa >= fb {
        (a, fa)
    } else {
        (b, fb)
    }
}

/// Helper capacity of the fading channel: max over (q1, q2) of
/// `min{h2(q1), g(p,q2) - h2(p)}` by grid search plus 1-D refinement.
pub fn example6(p: f64) -> Result<Example6> {
    use crate::bounds::fading_helper_value;
    if !(0.0..=1.0).contains(&p) {
        return invalid(format!("p = {p} is outside [0,1]"));
    }
    const N: usize = 400;
    let mut best = Example6 {
        value: f64::NEG_INFINITY,
        q1: 0.0,
        q2: 0.0,
    };
    for i in 0..=N {
        for j in 0..=N {
            let (q1, q2) = (i as f64 / N as f64, j as f64 / N as f64);
            let v = fading_helper_value(p, q1, q2);
            if v > best.value {
                best = Example6 { value: v, q1, q2 };
            }
        }
    }
    let h = 1.0 / N as f64;
    let (q2, _) = golden_max(
        |q2| fading_helper_value(p, best.q1, q2),
        (best.q2 - h).max(0.0),
        (best.q2 + h).min(1.0),
        80,
    );
    let (q1, _) = golden_max(
        |q1| fading_helper_value(p, q1, q2),
        (best.q1 - h).max(0.0),
        (best.q1 + h).min(1.0),
        80,
    );
    let v = fading_helper_value(p, q1, q2);
    if v > best.value {
        best = Example6 { value: v, q1, q2 };
    }
    Ok(best)
}

/// Prop-1 pentagon of the deterministic-state channel `Y = (X1 xor S, X2)`
/// with S uniform and independent inputs Bernoulli(q1), Bernoulli(q2):
/// `R1 <= h2(q1)`, `Rc + R1 <= h2(q2)`.
pub fn thm4_pentagon(q1: f64, q2: f64) -> Result<(f64, f64)> {
    for (n, v) in [("q1", q1), ("q2", q2)] {
        if !(0.0..=1.0).contains(&v) {
            return invalid(format!("{n} = {v} is outside [0,1]"));
        }
    }
    Ok((h2(q1), h2(q2)))
}

/// Names accepted by [`oracle`].
pub const ORACLES: &[&str] = &["example3", "example6", "thm4-pentagon"];

/// An oracle's output.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum OracleValue {
    Scalar { value: f64 },
    Pentagon { r1_cap: f64, sum_cap: f64 },
}

/// Evaluates a named closed form.
pub fn oracle(name: &str, params: &BTreeMap<String, f64>) -> Result<OracleValue> {
    let get = |k: &str| {
        params
            .get(k)
            .copied()
            .ok_or_else(|| Error::Validation(format!("oracle {name} needs parameter {k}")))
    };
    match name {
        "example3" => Ok(OracleValue::Scalar {
            value: example3(get("p")?, get("q1")?)?,
        }),
        "example6" => Ok(OracleValue::Scalar {
            value: example6(get("p")?)?.value,
        }),
        "thm4-pentagon" => {
            let (r1_cap, sum_cap) = thm4_pentagon(get("q1")?, get("q2")?)?;
            Ok(OracleValue::Pentagon { r1_cap, sum_cap })
        }
        _ => invalid(format!("unknown oracle {name}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::builtin_channel;

    fn pmap(p: f64) -> BTreeMap<String, f64> {
        BTreeMap::from([("p".to_string(), p)])
    }

    #[test]
    fn example3_values() {
        assert!((example3(0.1, 0.3).unwrap() - 0.455_823_111).abs() < 1e-8);
        assert_eq!(example3(0.2, 0.0).unwrap(), 0.0);
        assert!((example3(0.1, 0.7).unwrap() - (1.0 - h2(0.1))).abs() < 1e-15);
        assert!(example3(1.5, 0.1).is_err());
    }

    #[test]
    fn example6_noiseless() {
        let e = example6(0.0).unwrap();
        assert!((e.value - 1.0).abs() < 1e-9);
        assert!((e.q1 - 0.5).abs() < 1e-6);
    }

    #[test]
    fn oracle_dispatch() {
        let mut m = pmap(0.1);
        m.insert("q1".into(), 0.3);
        assert!(matches!(oracle("example3", &m).unwrap(), OracleValue::Scalar { .. }));
        assert!(oracle("nope", &m).is_err());
        assert!(oracle("thm4-pentagon", &m).is_err());
    }

    #[test]
    fn sum_capacity_examples() {
        let cfg = SearchConfig::default();
        let sw = builtin_channel("switch", &BTreeMap::new()).unwrap();
        assert!((sum_capacity(&sw, &cfg).unwrap().value - 1.0).abs() < 1e-8);
        let adder = builtin_channel("adder-mac", &BTreeMap::new()).unwrap();
        assert!((sum_capacity(&adder, &cfg).unwrap().value - 3f64.log2()).abs() < 1e-8);
        let flat = ChannelSpec::from_fn(Sizes { s: 2, x1: 2, x2: 2, y: 3 }, vec![0.3, 0.7], |_, _, _, y| {
            [0.2, 0.3, 0.5][y]
        })
        .unwrap();
        assert!(sum_capacity(&flat, &cfg).unwrap().value < 1e-12);
    }

    #[test]
    fn grid_agrees_with_blahut_arimoto() {
        let sw = builtin_channel("switch", &BTreeMap::new()).unwrap();
        let (g, _) = sum_capacity_grid(&sw, 8).unwrap();
        assert!((g - 1.0).abs() < 1e-12);
    }

    #[test]
    fn caps_projection() {
        let ch = builtin_channel("additive-binary-helper", &pmap(0.1)).unwrap();
        let mut law = FactoredLaw::uniform(LawKind::InnerSc, ch.sizes, 1, 2, false);
        apply_input_caps(&ch, &mut law, [0.2, 0.3]);
        assert!((law.factors[0].get(0, 1) - 0.3).abs() < 1e-15);
        assert!((law.factors[1].get(0, 1) - 0.2).abs() < 1e-15);
        let mut j = FactoredLaw::uniform(LawKind::JointInput, ch.sizes, 1, 1, false);
        apply_input_caps(&ch, &mut j, [0.1, 0.2]);
        let m = j.input_marginal(ch.sizes).unwrap();
        assert!((m[2] + m[3] - 0.1).abs() < 1e-15);
        assert!((m[1] + m[3] - 0.2).abs() < 1e-15);
        assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn switch_prop1_decoupled() {
        let ch = builtin_channel("switch", &BTreeMap::new()).unwrap();
        let cfg = SearchConfig {
            mode: RegionMode::Decoupled,
            ..SearchConfig::default()
        };
        let r = compute_region(&ch, BoundKind::Prop1, &cfg).unwrap();
        assert!((r.max_r1 - 0.5).abs() < 1e-3, "{}", r.max_r1);
        assert!((r.max_sum - 1.0).abs() < 1e-3, "{}", r.max_sum);
    }

    #[test]
    fn membership_origin_inside() {
        let ch = builtin_channel("switch", &BTreeMap::new()).unwrap();
        let cfg = SearchConfig {
            lambda_points: 3,
            restarts: 1,
            sweeps: 1,
            ..SearchConfig::default()
        };
        let r = compute_region(&ch, BoundKind::Prop1, &cfg).unwrap();
        assert_eq!(membership(&r, RatePoint::new(0.0, 0.0), 1e-9).0, Verdict::Inside);
        assert_eq!(
            membership(&r, RatePoint::new(5.0, 5.0), 1e-9).0,
            Verdict::OutsideAtResolution
        );
    }

    #[test]
    fn config_validation() {
        let bad = SearchConfig {
            resolution: 1,
            ..SearchConfig::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!(SearchConfig { lambda_points: 1, ..SearchConfig::default() }.lambdas(), vec![0.0]);
        assert_eq!(SearchConfig::default().lambdas().len(), 33);
    }

    #[test]
    fn padding_keeps_corner() {
        let ch = builtin_channel("additive-binary-helper", &pmap(0.1)).unwrap();
        let seeds = structured_seeds(ch.sizes, BoundKind::InnerSc, 1, 2);
        let e0 = crate::bounds::eval_inner_sc(&ch, &seeds[1], false).unwrap();
        let padded = pad_card_v(&seeds[1], 5).unwrap();
        let e1 = crate::bounds::eval_inner_sc(&ch, &padded, false).unwrap();
        assert!((e0.r1_cap - e1.r1_cap).abs() < 1e-12);
        assert!((e0.sum_cap - e1.sum_cap).abs() < 1e-12);
    }

    #[test]
    fn seeds_are_valid_laws() {
        let chans = [
            builtin_channel("mod2-selector", &BTreeMap::new()).unwrap(),
            builtin_channel("fading-binary", &pmap(0.2)).unwrap(),
        ];
        for ch in &chans {
            for b in BoundKind::ALL {
                if b == BoundKind::IndepStates && ch.state_split.is_none() {
                    continue;
                }
                let c = cardinalities(ch.sizes, b, &SearchConfig::default());
                for s in structured_seeds(ch.sizes, b, c.card_u, c.card_v) {
                    s.validate(ch, true).unwrap();
                }
            }
        }
    }
}
