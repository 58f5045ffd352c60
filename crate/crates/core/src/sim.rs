//! Monte Carlo simulation of the block-Markov compress-and-bin scheme
//! (strictly causal states) and the single-block Shannon-strategy scheme
//! (causal states) at small block lengths.
//!
//! Codebooks are redrawn for every trial. Individual codewords are generated
//! lazily from a per-trial key and a stream id built from their indices, so a
//! codeword never has to be stored to be reproduced.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{assemble_into, layout, mask, ChannelSpec, CondTable, FactoredLaw, LawKind};
use crate::error::{invalid, Error, Result};
use crate::geometry::RatePoint;
use crate::prob::{max_cells, MarginalPlan};
use crate::search::item_rng;

/// Codebook indices must fit in this many bits of a stream id.
const INDEX_BITS: u32 = 20;

/// Two-sided 95% normal quantile for the Wilson interval.
const Z95: f64 = 1.959963984540054;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    /// Number of blocks B (block-Markov only).
    pub blocks: usize,
    /// Total-variation slack of the typicality tests.
    pub epsilon: f64,
    pub trials: usize,
    pub seed: u64,
    pub law: FactoredLaw,
    /// Cell-index rate; defaults to `I(X2;Y) - delta`.
    pub t: Option<f64>,
    /// Compression rate; defaults to `I(V;S|X2) + delta`.
    pub t_hat: Option<f64>,
    pub delta: f64,
    /// Rate back-off per unit of slack: codebook sizes use `R - eta*epsilon`.
    pub eta: f64,
}

impl SimConfig {
    pub fn new(n: usize, law: FactoredLaw) -> Self {
        SimConfig {
            n,
            blocks: 4,
            epsilon: 0.2,
            trials: 500,
            seed: 0,
            law,
            t: None,
            t_hat: None,
            delta: 0.05,
            eta: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return invalid("block length n must be at least 1");
        }
        if self.blocks < 2 {
            return invalid("the block-Markov scheme needs B >= 2");
        }
        if !(self.epsilon > 0.0) {
            return invalid("typicality slack must be positive");
        }
        if self.trials == 0 {
            return invalid("trials must be at least 1");
        }
        if !(self.delta >= 0.0) || !(self.eta >= 0.0) {
            return invalid("delta and eta must be nonnegative");
        }
        Ok(())
    }

    /// `ceil(2^(n*rate))`, at least 1.
    pub fn size_for(&self, rate: f64) -> Result<usize> {
        let r = (rate - self.eta * self.epsilon).max(0.0);
        let m = (2f64.powf(self.n as f64 * r) - 1e-9).ceil().max(1.0);
        if m > (1u64 << INDEX_BITS) as f64 {
            return Err(Error::Resource(format!(
                "codebook of size {m:.0} exceeds 2^{INDEX_BITS}"
            )));
        }
        Ok(m as usize)
    }
}

/// Error tallies. Events may co-occur, so the tallies can exceed `errors`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EventTallies {
    pub covering: usize,
    pub cell: usize,
    pub common: usize,
    pub compression: usize,
    pub private: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub scheme: String,
    pub n: usize,
    pub rates: RatePoint,
    pub trials: usize,
    pub errors: usize,
    pub events: EventTallies,
    pub error_rate: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    /// Codebook sizes `(M_c, M_1, K, K_hat)`.
    pub sizes: [usize; 4],
    pub t: f64,
    pub t_hat: f64,
}

/// Wilson score interval at 95%.
pub fn wilson(errors: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let nt = trials as f64;
    let ph = errors as f64 / nt;
    let z2 = Z95 * Z95;
    let den = 1.0 + z2 / nt;
    let centre = (ph + z2 / (2.0 * nt)) / den;
    let half = Z95 * (ph * (1.0 - ph) / nt + z2 / (4.0 * nt * nt)).sqrt() / den;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Conditional type test: the empirical joint type of the selected axes is
/// compared in total variation with the empirical type of the `given` axes
/// times the reference conditional law of the rest.
struct TypeTest {
    sizes: Vec<usize>,
    /// Reference `P(rest | given)` per joint cell.
    cond: Vec<f64>,
    /// Given-axes cell of each joint cell.
    gidx: Vec<usize>,
    counts: Vec<u32>,
    gcounts: Vec<u32>,
}

impl TypeTest {
    fn new(dims: &[usize; 6], joint: &[f64], m: u64, given: u64) -> Self {
        let plan = MarginalPlan::new(dims, m);
        let mut reference = vec![0.0; plan.len()];
        plan.accumulate(joint, &mut reference);
        let axes: Vec<usize> = (0..6).filter(|i| m & (1 << i) != 0).collect();
        let sizes: Vec<usize> = axes.iter().map(|&i| dims[i]).collect();
        let is_given: Vec<bool> = axes.iter().map(|&i| given & (1 << i) != 0).collect();
        let mut gidx = Vec::with_capacity(reference.len());
        let mut digits = vec![0usize; sizes.len()];
        for _ in 0..reference.len() {
            let g = digits
                .iter()
                .zip(&sizes)
                .zip(&is_given)
                .filter(|(_, &gv)| gv)
                .fold(0, |acc, ((&d, &sz), _)| acc * sz + d);
            gidx.push(g);
            for a in (0..sizes.len()).rev() {
                digits[a] += 1;
                if digits[a] < sizes[a] {
                    break;
                }
                digits[a] = 0;
            }
        }
        let glen = sizes.iter().zip(&is_given).filter(|(_, &g)| g).map(|(s, _)| s).product::<usize>();
        let mut pg = vec![0.0; glen];
        for (c, &p) in reference.iter().enumerate() {
            pg[gidx[c]] += p;
        }
        let cond = reference
            .iter()
            .enumerate()
            .map(|(c, &p)| if pg[gidx[c]] > 0.0 { p / pg[gidx[c]] } else { 0.0 })
            .collect();
        TypeTest {
            sizes,
            cond,
            counts: vec![0; gidx.len()],
            gcounts: vec![0; glen],
            gidx,
        }
    }

    /// Distance for sequences given in axis order.
    fn tv(&mut self, seqs: &[&[u8]]) -> f64 {
        self.counts.iter_mut().for_each(|c| *c = 0);
        self.gcounts.iter_mut().for_each(|c| *c = 0);
        let n = seqs[0].len();
        for t in 0..n {
            let mut idx = 0usize;
            for (seq, &size) in seqs.iter().zip(&self.sizes) {
                idx = idx * size + seq[t] as usize;
            }
            self.counts[idx] += 1;
            self.gcounts[self.gidx[idx]] += 1;
        }
        let inv = 1.0 / n as f64;
        let mut d = 0.0;
        for (c, &k) in self.counts.iter().enumerate() {
            d += (k as f64 - self.gcounts[self.gidx[c]] as f64 * self.cond[c]).abs();
        }
        0.5 * d * inv
    }

    /// Distance plus the log-likelihood of the non-given axes under the
    /// reference conditional; the counts from `tv` are reused.
    fn score(&mut self, seqs: &[&[u8]]) -> Score {
        let tv = self.tv(seqs);
        let ll = self
            .counts
            .iter()
            .zip(&self.cond)
            .filter(|(&k, _)| k > 0)
            .map(|(&k, &p)| if p > 0.0 { k as f64 * p.ln() } else { f64::NEG_INFINITY })
            .sum();
        Score { tv, ll }
    }
}

#[derive(Clone, Copy, Debug)]
struct Score {
    tv: f64,
    ll: f64,
}

impl Score {
    const WORST: Score = Score {
        tv: f64::INFINITY,
        ll: f64::NEG_INFINITY,
    };

    /// Typical candidates beat atypical ones; then higher likelihood wins.
    fn beats(self, other: Score, eps: f64) -> bool {
        match (self.tv <= eps, other.tv <= eps) {
            (true, false) => true,
            (false, true) => false,
            _ => self.ll > other.ll,
        }
    }
}

/// Best candidate: among those within the slack `eps` the most likely one
/// (ties to the smallest index), else the most likely overall. The flag says
/// whether the winner is typical.
fn pick_within(eps: f64, candidates: impl Iterator<Item = (usize, Score)>) -> (usize, bool) {
    let mut best = (0usize, Score::WORST);
    for (i, sc) in candidates {
        if sc.beats(best.1, eps) {
            best = (i, sc);
        }
    }
    (best.0, best.1.tv <= eps)
}

fn samplers(t: &CondTable) -> Result<Vec<WeightedIndex<f64>>> {
    (0..t.rows)
        .map(|r| WeightedIndex::new(t.row(r)).map_err(|e| Error::Validation(format!("bad law row {r}: {e}"))))
        .collect()
}

/// Lazily generated codewords keyed by `(kind, a, b, c)`.
struct Codebooks {
    base: ChaCha8Rng,
}

impl Codebooks {
    fn rng(&self, kind: u64, a: usize, b: usize, c: usize) -> ChaCha8Rng {
        let mut r = self.base.clone();
        let id = (kind << (3 * INDEX_BITS)) | ((a as u64) << (2 * INDEX_BITS)) | ((b as u64) << INDEX_BITS) | c as u64;
        r.set_stream(id);
        r.set_word_pos(0);
        r
    }

    /// i.i.d. word from a single distribution.
    fn iid(&self, kind: u64, idx: [usize; 3], n: usize, d: &WeightedIndex<f64>) -> Vec<u8> {
        let mut r = self.rng(kind, idx[0], idx[1], idx[2]);
        (0..n).map(|_| d.sample(&mut r) as u8).collect()
    }

    /// Word drawn symbol-wise from `rows[cond[t]]`.
    fn conditional(&self, kind: u64, idx: [usize; 3], cond: &[u8], rows: &[WeightedIndex<f64>]) -> Vec<u8> {
        let mut r = self.rng(kind, idx[0], idx[1], idx[2]);
        cond.iter().map(|&c| rows[c as usize].sample(&mut r) as u8).collect()
    }
}

fn trial_key(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut r = item_rng(seed, trial as u64);
    ChaCha8Rng::from_seed(r.gen())
}

fn channel_samplers(ch: &ChannelSpec) -> Result<Vec<WeightedIndex<f64>>> {
    let z = ch.sizes;
    let mut out = Vec::with_capacity(z.s * z.x1 * z.x2);
    for s in 0..z.s {
        for x1 in 0..z.x1 {
            for x2 in 0..z.x2 {
                out.push(
                    WeightedIndex::new(ch.row(s, x1, x2))
                        .map_err(|e| Error::Validation(format!("bad channel row: {e}")))?,
                );
            }
        }
    }
    Ok(out)
}

fn check_budget(work: f64) -> Result<()> {
    if work > max_cells() as f64 {
        return Err(Error::Resource(format!(
            "exhaustive decoding needs {work:.0} typicality tests per step"
        )));
    }
    Ok(())
}

/// Default `(T, T_hat)` for a law: `I(X2;Y) - delta` and `I(V;S|X2) + delta`.
pub fn default_bin_rates(ch: &ChannelSpec, law: &FactoredLaw, delta: f64) -> Result<(f64, f64)> {
    let mut joint = Vec::new();
    law.validate(ch, true)?;
    assemble_into(ch, law, &mut joint);
    let dims = layout(ch.sizes, law);
    let mut cache = crate::prob::EntropyCache::new(dims.to_vec());
    let ix2y = cache.mi(&joint, mask::X2, mask::Y, 0);
    let ivs = cache.mi(&joint, mask::V, mask::S, mask::X2);
    Ok(((ix2y - delta).max(0.0), ivs + delta))
}

/// Block-Markov scheme with compress-and-bin state description and backward
/// decoding. An error is counted when any block's `(w_c, w_1)` is wrong.
pub fn run_block_markov(ch: &ChannelSpec, rates: RatePoint, cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    if cfg.law.kind != LawKind::InnerSc {
        return invalid("the block-Markov scheme needs an inner-sc law");
    }
    if !(rates.rc >= 0.0 && rates.r1 >= 0.0) {
        return invalid("rates must be nonnegative");
    }
    cfg.law.validate(ch, true)?;
    let z = ch.sizes;
    let n = cfg.n;
    let (t_def, th_def) = default_bin_rates(ch, &cfg.law, cfg.delta)?;
    let t = cfg.t.unwrap_or(t_def);
    let t_hat = cfg.t_hat.unwrap_or(th_def);
    let m_c = cfg.size_for(rates.rc)?;
    let m_1 = cfg.size_for(rates.r1)?;
    let k = cfg.size_for(t)?;
    let k_hat = cfg.size_for(t_hat)?;
    if m_c > 1 {
        check_budget((m_c * k) as f64 * (k_hat as f64 / k as f64).ceil() * m_1 as f64 * n as f64)?;
    }
    check_budget((m_c * k * n) as f64)?;

    let dims = layout(z, &cfg.law);
    let mut joint = Vec::new();
    assemble_into(ch, &cfg.law, &mut joint);
    let mut t_cover = TypeTest::new(&dims, &joint, mask::S | mask::V | mask::X2, mask::S | mask::X2);
    let mut t_cell = TypeTest::new(&dims, &joint, mask::X2 | mask::Y, mask::X2);
    let mut t_list = TypeTest::new(&dims, &joint, mask::V | mask::X2 | mask::Y, mask::V | mask::X2);
    let mut t_full = TypeTest::new(&dims, &joint, mask::V | mask::X1 | mask::X2 | mask::Y, mask::V | mask::X1 | mask::X2);

    // P(V | X2) for the V codebook.
    let mut pv_x2 = vec![vec![0.0; cfg.law.card_v]; z.x2];
    {
        let plan = MarginalPlan::new(&dims, mask::V | mask::X2);
        let mut m = vec![0.0; plan.len()];
        plan.accumulate(&joint, &mut m);
        for v in 0..cfg.law.card_v {
            for x2 in 0..z.x2 {
                pv_x2[x2][v] = m[v * z.x2 + x2];
            }
        }
        for row in &mut pv_x2 {
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter_mut().for_each(|x| *x /= s);
            } else {
                row.iter_mut().for_each(|x| *x = 1.0);
            }
        }
    }
    let px2 = WeightedIndex::new(cfg.law.factors[0].row(0)).map_err(|e| Error::Validation(e.to_string()))?;
    let px1_x2 = samplers(&cfg.law.factors[1])?;
    let pv_x2: Vec<WeightedIndex<f64>> = pv_x2
        .iter()
        .map(|r| WeightedIndex::new(r).map_err(|e| Error::Validation(e.to_string())))
        .collect::<Result<_>>()?;
    let qs = WeightedIndex::new(&ch.q_s).map_err(|e| Error::Validation(e.to_string()))?;
    let w = channel_samplers(ch)?;

    let b_total = cfg.blocks;
    let mut errors = 0;
    let mut ev = EventTallies::default();
    for trial in 0..cfg.trials {
        let key = trial_key(cfg.seed, trial);
        let books = Codebooks { base: key.clone() };
        let mut rng = books.rng(7, 0, 0, 0);
        let cell_of: Vec<usize> = (0..k_hat).map(|_| rng.gen_range(0..k)).collect();
        let x2_book: Vec<Vec<Vec<u8>>> = (0..m_c)
            .map(|wc| (0..k).map(|s| books.iid(0, [wc, s, 0], n, &px2)).collect())
            .collect();
        let vword = |wc: usize, s: usize, zi: usize| books.conditional(1, [wc, s, zi], &x2_book[wc][s], &pv_x2);
        let x1word = |wc: usize, s: usize, w1: usize| books.conditional(2, [wc, s, w1], &x2_book[wc][s], &px1_x2);

        // Messages for blocks 1..B-1; block B carries the default index 0.
        let wc: Vec<usize> = (0..b_total).map(|b| if b + 1 < b_total { rng.gen_range(0..m_c) } else { 0 }).collect();
        let w1: Vec<usize> = (0..b_total).map(|b| if b + 1 < b_total { rng.gen_range(0..m_1) } else { 0 }).collect();

        // Encoding. cell[i] is s_i, the cell sent during block i+1; zidx[i] is z_i.
        let mut zidx = vec![0usize; b_total + 1];
        let mut cell = vec![0usize; b_total + 1];
        cell[0] = cell_of[0];
        let mut states: Vec<Vec<u8>> = Vec::with_capacity(b_total);
        let mut outputs: Vec<Vec<u8>> = Vec::with_capacity(b_total);
        let mut covered = true;
        for b in 0..b_total {
            // Block b (0-based) is block b+1; describe the previous block's state.
            if b >= 1 {
                let (wprev, sprev) = (wc[b - 1], cell[b - 1]);
                let x2p = &x2_book[wprev][sprev];
                let sseq = &states[b - 1];
                let (zi, ok) = pick_within(
                    cfg.epsilon,
                    (0..k_hat).map(|zi| (zi, t_cover.score(&[sseq, &vword(wprev, sprev, zi), x2p]))),
                );
                zidx[b] = if ok { zi } else { 0 };
                covered &= ok;
                cell[b] = cell_of[zidx[b]];
            }
            let x2 = &x2_book[wc[b]][cell[b]];
            let x1 = x1word(wc[b], cell[b], w1[b]);
            let s: Vec<u8> = (0..n).map(|_| qs.sample(&mut rng) as u8).collect();
            let y: Vec<u8> = (0..n)
                .map(|i| {
                    let r = (s[i] as usize * z.x1 + x1[i] as usize) * z.x2 + x2[i] as usize;
                    w[r].sample(&mut rng) as u8
                })
                .collect();
            states.push(s);
            outputs.push(y);
        }

        // Backward decoding. For each block b (0-based, b < B-1) we recover
        // wc[b], cell[b] (the cell used in block b), zidx[b+1] and w1[b].
        // Index steps fall back to the closest candidate when none is within
        // the slack; message steps then count as failed.
        let mut fail = DecodeFailure::default();
        let last = b_total - 1;
        let mut cell_hat = vec![0usize; b_total];
        let (s, passed) = pick_within(cfg.epsilon, (0..k).map(|s| (s, t_cell.score(&[&x2_book[0][s], &outputs[last]]))));
        cell_hat[last] = s;
        fail.cell |= !passed || s != cell[last];
        let mut wrong = false;
        for b in (1..b_total).rev() {
            let blk = b - 1;
            let y = &outputs[blk];
            let members: Vec<usize> = (0..k_hat).filter(|&zi| cell_of[zi] == cell_hat[b]).collect();
            // Step (b): common message.
            let c = if m_c == 1 {
                0
            } else {
                let (c, passed) = pick_within(cfg.epsilon, (0..m_c).map(|c| {
                    let mut best = Score::WORST;
                    for sp in 0..k {
                        let x2w = &x2_book[c][sp];
                        for &zi in &members {
                            let v = vword(c, sp, zi);
                            for u in 0..m_1 {
                                let sc = t_full.score(&[&v, &x1word(c, sp, u), x2w, y]);
                                if sc.beats(best, cfg.epsilon) {
                                    best = sc;
                                }
                            }
                        }
                    }
                    (c, best)
                }));
                if !passed || c != wc[blk] {
                    fail.common = true;
                    wrong = true;
                }
                c
            };
            // Step (c): cell used during block blk.
            if blk == 0 {
                cell_hat[0] = cell_of[0];
            } else {
                let (s, passed) = pick_within(cfg.epsilon, (0..k).map(|s| (s, t_cell.score(&[&x2_book[c][s], y]))));
                cell_hat[blk] = s;
                fail.cell |= !passed || s != cell[blk];
            }
            let sp = cell_hat[blk];
            let x2w = &x2_book[c][sp];
            // Step (d): compression index inside the decoded cell.
            let zh = if members.is_empty() {
                fail.compression = true;
                0
            } else {
                let (zh, passed) = pick_within(cfg.epsilon, members.iter().map(|&zi| (zi, t_list.score(&[&vword(c, sp, zi), x2w, y]))));
                fail.compression |= !passed || zh != zidx[b];
                zh
            };
            // Step (e): private message.
            if m_1 > 1 {
                let v = vword(c, sp, zh);
                let (u, passed) = pick_within(cfg.epsilon, (0..m_1).map(|u| (u, t_full.score(&[&v, &x1word(c, sp, u), x2w, y]))));
                if !passed || u != w1[blk] {
                    fail.private = true;
                    wrong = true;
                }
            }
            if wrong {
                break;
            }
        }
        if !covered {
            ev.covering += 1;
        }
        if wrong {
            errors += 1;
            ev.cell += fail.cell as usize;
            ev.common += fail.common as usize;
            ev.compression += fail.compression as usize;
            ev.private += fail.private as usize;
        }
    }
    Ok(finish("block-markov", n, rates, cfg.trials, errors, ev, [m_c, m_1, k, k_hat], t, t_hat))
}

/// Which decoding steps went wrong in one trial.
#[derive(Default)]
struct DecodeFailure {
    cell: bool,
    common: bool,
    compression: bool,
    private: bool,
}

#[allow(clippy::too_many_arguments)]
fn finish(
    scheme: &str,
    n: usize,
    rates: RatePoint,
    trials: usize,
    errors: usize,
    events: EventTallies,
    sizes: [usize; 4],
    t: f64,
    t_hat: f64,
) -> SimResult {
    let (lo, hi) = wilson(errors, trials);
    SimResult {
        scheme: scheme.into(),
        n,
        rates,
        trials,
        errors,
        events,
        error_rate: errors as f64 / trials as f64,
        wilson_lo: lo,
        wilson_hi: hi,
        sizes,
        t,
        t_hat,
    }
}

fn is_deterministic(t: &CondTable) -> bool {
    t.data.iter().all(|&p| p == 0.0 || p == 1.0)
}

/// Single-block Shannon-strategy scheme: codewords over strategy letters
/// `(v, u)`, inputs `x2 = psi(v, s)` and `x1 = phi(u, v, s)` applied to the
/// current state, joint-typicality decoding of `(w_c, w_1)`.
pub fn run_shannon_strategy(ch: &ChannelSpec, rates: RatePoint, cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    let law = &cfg.law;
    if law.kind != LawKind::Causal {
        return invalid("the Shannon-strategy scheme needs a causal law");
    }
    if !is_deterministic(&law.factors[2]) || !is_deterministic(&law.factors[3]) {
        return invalid("causal strategy maps x1 = phi(u,v,s) and x2 = psi(v,s) must be deterministic");
    }
    if !(rates.rc >= 0.0 && rates.r1 >= 0.0) {
        return invalid("rates must be nonnegative");
    }
    law.validate(ch, true)?;
    let z = ch.sizes;
    let n = cfg.n;
    let (nu, nv) = (law.card_u, law.card_v);
    let m_c = cfg.size_for(rates.rc)?;
    let m_1 = cfg.size_for(rates.r1)?;
    check_budget((m_c * m_1 * n) as f64)?;
    let dims = layout(z, law);
    let mut joint = Vec::new();
    assemble_into(ch, law, &mut joint);
    let mut test = TypeTest::new(&dims, &joint, mask::U | mask::V | mask::Y, mask::U | mask::V);
    let pv = WeightedIndex::new(law.factors[0].row(0)).map_err(|e| Error::Validation(e.to_string()))?;
    let pu_v = samplers(&law.factors[1])?;
    let qs = WeightedIndex::new(&ch.q_s).map_err(|e| Error::Validation(e.to_string()))?;
    let w = channel_samplers(ch)?;
    let argmax = |t: &CondTable, r: usize| (0..t.cols).find(|&c| t.get(r, c) == 1.0).unwrap_or(0);

    let mut errors = 0;
    let mut ev = EventTallies::default();
    for trial in 0..cfg.trials {
        let books = Codebooks {
            base: trial_key(cfg.seed, trial),
        };
        let mut rng = books.rng(7, 0, 0, 0);
        let vbook: Vec<Vec<u8>> = (0..m_c).map(|c| books.iid(0, [c, 0, 0], n, &pv)).collect();
        let uword = |c: usize, u: usize| books.conditional(1, [c, u, 0], &vbook[c], &pu_v);
        let (wc, w1) = (rng.gen_range(0..m_c), rng.gen_range(0..m_1));
        let v = &vbook[wc];
        let u = uword(wc, w1);
        let y: Vec<u8> = (0..n)
            .map(|i| {
                let s = qs.sample(&mut rng);
                let (vi, ui) = (v[i] as usize, u[i] as usize);
                let x2 = argmax(&law.factors[2], vi * z.s + s);
                let x1 = argmax(&law.factors[3], (s * nv + vi) * nu + ui);
                w[(s * z.x1 + x1) * z.x2 + x2].sample(&mut rng) as u8
            })
            .collect();
        let (i, passed) = pick_within(
            cfg.epsilon,
            (0..m_c * m_1).map(|i| {
                let (c, p) = (i / m_1, i % m_1);
                (i, test.score(&[&uword(c, p), &vbook[c], &y]))
            }),
        );
        if m_c * m_1 > 1 && (!passed || i != wc * m_1 + w1) {
            errors += 1;
            if !passed || i / m_1 != wc {
                ev.common += 1;
            }
            if !passed || i % m_1 != w1 {
                ev.private += 1;
            }
        }
    }
    Ok(finish("shannon-strategy", n, rates, cfg.trials, errors, ev, [m_c, m_1, 1, 1], 0.0, 0.0))
}

/// Error rates over a set of block lengths, one row per `n`.
pub fn sweep(
    ch: &ChannelSpec,
    rates: RatePoint,
    cfg: &SimConfig,
    ns: &[usize],
    causal: bool,
) -> Result<Vec<SimResult>> {
    ns.iter()
        .map(|&n| {
            let c = SimConfig { n, ..cfg.clone() };
            if causal {
                run_shannon_strategy(ch, rates, &c)
            } else {
                run_block_markov(ch, rates, &c)
            }
        })
        .collect()
}

/// CSV with header `n,rate_rc,rate_r1,err,err_lo,err_hi`.
pub fn sweep_csv(rows: &[SimResult]) -> String {
    let mut out = String::from("n,rate_rc,rate_r1,err,err_lo,err_hi\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.n, r.rates.rc, r.rates.r1, r.error_rate, r.wilson_lo, r.wilson_hi
        ));
    }
    out
}

/// Inner-sc law for the helper channel: uniform inputs and `V = S xor D` with
/// `D ~ Bernoulli(d)`.
pub fn helper_law(d: f64) -> Result<FactoredLaw> {
    if !(0.0..=1.0).contains(&d) {
        return invalid("d must lie in [0, 1]");
    }
    let flip = |s: usize| if s == 0 { vec![1.0 - d, d] } else { vec![d, 1.0 - d] };
    FactoredLaw::inner_sc(
        vec![0.5, 0.5],
        vec![vec![0.5, 0.5]; 2],
        (0..4).map(|r| flip(r / 2)).collect(),
    )
}

/// Corner of the inner bound for `law` at `Rc = 0`, for picking test rates.
pub fn inner_r1_cap(ch: &ChannelSpec, law: &FactoredLaw) -> Result<f64> {
    let c = crate::bounds::eval_inner_sc(ch, law, false)?;
    Ok(c.r1_cap.min(c.sum_cap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn helper_channel(p: f64) -> ChannelSpec {
        crate::channel::builtin_channel("additive-binary-helper", &BTreeMap::from([("p".to_string(), p)])).unwrap()
    }

    #[test]
    fn wilson_matches_reference() {
        // Reference values from the closed-form score interval.
        let (lo, hi) = wilson(10, 100);
        assert!((lo - 0.05522914).abs() < 1e-6, "{lo}");
        assert!((hi - 0.17436566).abs() < 1e-6, "{hi}");
        assert_eq!(wilson(0, 10).0, 0.0);
    }

    #[test]
    fn zero_rates_never_fail() {
        let ch = helper_channel(0.1);
        let mut cfg = SimConfig::new(6, helper_law(0.05).unwrap());
        cfg.trials = 40;
        let r = run_block_markov(&ch, RatePoint::new(0.0, 0.0), &cfg).unwrap();
        assert_eq!(&r.sizes[..2], &[1, 1]);
        assert_eq!(r.errors, 0);
    }

    #[test]
    fn deterministic_given_seed() {
        let ch = helper_channel(0.1);
        let mut cfg = SimConfig::new(8, helper_law(0.05).unwrap());
        cfg.trials = 30;
        let a = run_block_markov(&ch, RatePoint::new(0.0, 0.3), &cfg).unwrap();
        let b = run_block_markov(&ch, RatePoint::new(0.0, 0.3), &cfg).unwrap();
        assert_eq!(a, b);
        cfg.seed = 1;
        let c = run_block_markov(&ch, RatePoint::new(0.0, 0.3), &cfg).unwrap();
        assert_eq!(c.trials, a.trials);
    }

    #[test]
    fn failed_trials_have_events() {
        let ch = helper_channel(0.1);
        let mut cfg = SimConfig::new(8, helper_law(0.05).unwrap());
        cfg.trials = 60;
        let r = run_block_markov(&ch, RatePoint::new(0.0, 0.7), &cfg).unwrap();
        let e = &r.events;
        assert!(e.cell + e.common + e.compression + e.private >= r.errors);
    }

    #[test]
    fn rejects_bad_config() {
        let ch = helper_channel(0.1);
        let mut cfg = SimConfig::new(6, helper_law(0.05).unwrap());
        cfg.blocks = 1;
        assert!(run_block_markov(&ch, RatePoint::new(0.0, 0.1), &cfg).is_err());
        cfg.blocks = 4;
        cfg.n = 40;
        assert!(matches!(
            run_block_markov(&ch, RatePoint::new(0.0, 0.9), &cfg),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn stateless_strategy_decodes_inside_pentagon() {
        let ch = crate::channel::builtin_channel("adder-mac", &BTreeMap::new()).unwrap();
        // x2 = v, x1 = u with uniform letters.
        let law = FactoredLaw {
            kind: LawKind::Causal,
            card_u: 2,
            card_v: 2,
            factors: vec![
                CondTable::uniform(1, 2),
                CondTable::uniform(2, 2),
                CondTable::deterministic(2, 2, |r| r),
                CondTable::deterministic(4, 2, |r| r % 2),
            ],
        };
        let mut cfg = SimConfig::new(14, law);
        cfg.trials = 80;
        let r = run_shannon_strategy(&ch, RatePoint::new(0.2, 0.2), &cfg).unwrap();
        assert!(r.error_rate < 0.1, "{r:?}");
        let far = run_shannon_strategy(&ch, RatePoint::new(0.6, 0.6), &cfg).unwrap();
        assert!(far.error_rate > r.error_rate);
    }

    #[test]
    fn trivial_strategy_only_decodes_zero_rate() {
        let ch = crate::channel::builtin_channel("adder-mac", &BTreeMap::new()).unwrap();
        let z = ch.sizes;
        let law = FactoredLaw {
            kind: LawKind::Causal,
            card_u: 1,
            card_v: 1,
            factors: vec![
                CondTable::uniform(1, 1),
                CondTable::uniform(1, 1),
                CondTable::deterministic(z.s, z.x2, |_| 0),
                CondTable::deterministic(z.s, z.x1, |_| 0),
            ],
        };
        let mut cfg = SimConfig::new(10, law);
        cfg.trials = 50;
        let zero = run_shannon_strategy(&ch, RatePoint::new(0.0, 0.0), &cfg).unwrap();
        assert_eq!(zero.errors, 0);
        let pos = run_shannon_strategy(&ch, RatePoint::new(0.3, 0.3), &cfg).unwrap();
        assert!(pos.error_rate > 0.5, "{}", pos.error_rate);
    }
}
