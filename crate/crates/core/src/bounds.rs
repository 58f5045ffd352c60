//! Per-law corner evaluators for every bound.
//!
//! A corner is the pentagon `{R1 <= r1_cap, Rc + R1 <= sum_cap, Rc, R1 >= 0}`
//! (optionally also `Rc <= rc_cap`) that one input/auxiliary law certifies.

use serde::{Deserialize, Serialize};

use crate::channel::{assemble_into, layout, mask, ChannelSpec, FactoredLaw, LawKind};
use crate::error::{invalid, Error, Result};
use crate::geometry::RatePoint;
use crate::prob::{clamp_info, h2, EntropyCache};

/// Round-off tolerance for clamping informations and testing feasibility.
pub const CLAMP_TOL: f64 = 1e-9;

/// The rate regions the toolkit can evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    /// Strictly causal inner bound (V depends on S, X2).
    InnerSc,
    /// Strictly causal outer bound (V depends on S, X1, X2).
    OuterSc,
    /// Outer bound with the extra auxiliary U.
    OuterScWithU,
    /// Outer bound with the state given to the decoder.
    Prop1,
    /// Inner bound for states known only at the helper encoder.
    AsymInner,
    /// Capacity of the informed-helper model (no common message).
    Helper,
    /// Causal-state capacity region with Shannon strategies.
    Causal,
    /// Degraded-message-set MAC region without state knowledge.
    #[serde(rename = "nostate")]
    NoState,
    /// Region with independent state components at the two encoders.
    IndepStates,
}

impl BoundKind {
    pub const ALL: [BoundKind; 9] = [
        BoundKind::InnerSc,
        BoundKind::OuterSc,
        BoundKind::OuterScWithU,
        BoundKind::Prop1,
        BoundKind::AsymInner,
        BoundKind::Helper,
        BoundKind::Causal,
        BoundKind::NoState,
        BoundKind::IndepStates,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundKind::InnerSc => "inner-sc",
            BoundKind::OuterSc => "outer-sc",
            BoundKind::OuterScWithU => "outer-sc-withU",
            BoundKind::Prop1 => "prop1",
            BoundKind::AsymInner => "asym-inner",
            BoundKind::Helper => "helper",
            BoundKind::Causal => "causal",
            BoundKind::NoState => "nostate",
            BoundKind::IndepStates => "indep-states",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| Error::Validation(format!("unknown bound {s}")))
    }

    /// The law family searched for this bound.
    pub fn law_kind(self) -> LawKind {
        match self {
            BoundKind::InnerSc => LawKind::InnerSc,
            BoundKind::OuterSc | BoundKind::OuterScWithU => LawKind::OuterSc,
            BoundKind::Prop1 | BoundKind::NoState => LawKind::JointInput,
            BoundKind::AsymInner => LawKind::AsymInner,
            BoundKind::Helper | BoundKind::IndepStates => LawKind::ProductInput,
            BoundKind::Causal => LawKind::Causal,
        }
    }

    pub fn uses_u_factor(self) -> bool {
        self == BoundKind::OuterScWithU
    }
}

/// Rate caps certified by one law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CornerEvaluation {
    /// Right-hand side of the R1 inequality (the smaller one when there are two).
    pub r1_cap: f64,
    /// Right-hand side of the Rc + R1 inequality.
    pub sum_cap: f64,
    /// Value of the decodability constraint, for bounds that have one.
    pub constraint_slack: Option<f64>,
    pub feasible: bool,
    /// Both R1 caps of the asymmetric inner bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r1_caps: Option<[f64; 2]>,
    /// Cap on the first coordinate: R2 for indep-states, 0 for the helper model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rc_cap: Option<f64>,
}

impl CornerEvaluation {
    fn plain(r1_cap: f64, sum_cap: f64) -> Self {
        CornerEvaluation {
            r1_cap,
            sum_cap,
            constraint_slack: None,
            feasible: true,
            r1_caps: None,
            rc_cap: None,
        }
    }

    /// Vertices of the corner polygon, counter-clockwise from the origin.
    /// Empty when the corner is infeasible.
    pub fn vertices(&self) -> Vec<RatePoint> {
        if !self.feasible {
            return Vec::new();
        }
        let b = self.sum_cap.max(0.0);
        let a = self.r1_cap.max(0.0).min(b);
        let c = self.rc_cap.map_or(b, |c| c.max(0.0).min(b));
        let pts = [
            RatePoint::new(0.0, 0.0),
            RatePoint::new(c, 0.0),
            RatePoint::new(c, a.min(b - c)),
            RatePoint::new((b - a).min(c), a),
            RatePoint::new(0.0, a),
        ];
        let mut out: Vec<RatePoint> = Vec::with_capacity(5);
        for p in pts {
            if out.last() != Some(&p) && out.first() != Some(&p) {
                out.push(p);
            }
        }
        out
    }

    /// `max lambda*rc + (1-lambda)*r1` over the corner and the vertex attaining
    /// it; ties go to the larger r1.
    pub fn support(&self, lambda: f64) -> Option<(f64, RatePoint)> {
        let mut best: Option<(f64, RatePoint)> = None;
        for p in self.vertices() {
            let v = lambda * p.rc + (1.0 - lambda) * p.r1;
            match best {
                Some((bv, bp)) if v < bv || (v == bv && p.r1 <= bp.r1) => {}
                _ => best = Some((v, p)),
            }
        }
        best
    }
}

#[inline]
fn c(v: f64) -> f64 {
    clamp_info(v, CLAMP_TOL)
}

/// Reusable evaluator for one (channel, bound, law shape): keeps the
/// assembly buffer and marginal plans between calls.
#[derive(Clone, Debug)]
pub struct Evaluator<'a> {
    ch: &'a ChannelSpec,
    bound: BoundKind,
    relax: bool,
    shape: [usize; 6],
    cache: EntropyCache,
    buf: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    pub fn new(ch: &'a ChannelSpec, bound: BoundKind, relax: bool, card_u: usize, card_v: usize) -> Result<Self> {
        let z = ch.sizes;
        let shape = [z.s, card_u, card_v, z.x1, z.x2, z.y];
        crate::prob::checked_cells(&shape)?;
        let cache = if bound == BoundKind::IndepStates {
            let [a, b] = ch
                .state_split
                .ok_or_else(|| Error::Validation("indep-states needs a channel with two state components".into()))?;
            EntropyCache::new(vec![a, b, z.x1, z.x2, z.y])
        } else {
            EntropyCache::new(shape.to_vec())
        };
        Ok(Evaluator {
            ch,
            bound,
            relax,
            shape,
            cache,
            buf: Vec::new(),
        })
    }

    pub fn for_law(ch: &'a ChannelSpec, bound: BoundKind, relax: bool, law: &FactoredLaw) -> Result<Self> {
        Self::new(ch, bound, relax, law.card_u, law.card_v)
    }

    pub fn bound(&self) -> BoundKind {
        self.bound
    }

    /// Checks that `law` is the family and shape this evaluator expects.
    pub fn check(&self, law: &FactoredLaw) -> Result<()> {
        if law.kind != self.bound.law_kind() {
            return invalid(format!(
                "bound {} needs a {} law, got {}",
                self.bound.as_str(),
                self.bound.law_kind().as_str(),
                law.kind.as_str()
            ));
        }
        if self.bound == BoundKind::OuterScWithU && !law.has_u() {
            return invalid("outer-sc-withU needs a law with a U factor");
        }
        if layout(self.ch.sizes, law) != self.shape {
            return invalid("law shape differs from the evaluator's");
        }
        law.validate(self.ch, true)
    }

    /// Evaluates without validation; `law` must match this evaluator.
    pub fn eval_unchecked(&mut self, law: &FactoredLaw) -> CornerEvaluation {
        use mask::*;
        assemble_into(self.ch, law, &mut self.buf);
        self.cache.invalidate();
        let p = &self.buf;
        let k = &mut self.cache;
        match self.bound {
            BoundKind::InnerSc | BoundKind::OuterSc | BoundKind::OuterScWithU => {
                let with_u = law.has_u();
                let (r1, sum) = if with_u {
                    (
                        c(k.mi(p, U | X1, Y, V | X2)) - c(k.mi(p, U | X1, S, V | X2)),
                        c(k.mi(p, U | V | X1 | X2, Y, 0)) - c(k.mi(p, U | V | X1 | X2, S, 0)),
                    )
                } else {
                    (
                        c(k.mi(p, X1, Y, V | X2)),
                        c(k.mi(p, V | X1 | X2, Y, 0)) - c(k.mi(p, V | X1 | X2, S, 0)),
                    )
                };
                let relax = self.relax && self.bound == BoundKind::InnerSc;
                let slack = if relax {
                    None
                } else {
                    Some(c(k.mi(p, V | X2, Y, 0)) - c(k.mi(p, V | X2, S, 0)))
                };
                CornerEvaluation {
                    r1_cap: r1.max(0.0),
                    sum_cap: sum.max(0.0),
                    constraint_slack: slack,
                    feasible: slack.map_or(true, |s| s >= -CLAMP_TOL),
                    r1_caps: None,
                    rc_cap: None,
                }
            }
            BoundKind::Prop1 => CornerEvaluation::plain(c(k.mi(p, X1, Y, X2 | S)), c(k.mi(p, X1 | X2, Y, 0))),
            BoundKind::NoState => CornerEvaluation::plain(c(k.mi(p, X1, Y, X2)), c(k.mi(p, X1 | X2, Y, 0))),
            BoundKind::AsymInner => {
                let cover = c(k.mi(p, V, S, U | X2));
                let a = c(k.mi(p, X1, Y, U | V | X2));
                let b = c(k.mi(p, V | X1 | X2, Y, U)) - cover;
                let sum = c(k.mi(p, U | V | X1 | X2, Y, 0)) - cover;
                CornerEvaluation {
                    r1_cap: a.min(b).max(0.0),
                    sum_cap: sum.max(0.0),
                    constraint_slack: None,
                    feasible: true,
                    r1_caps: Some([a, b]),
                    rc_cap: None,
                }
            }
            BoundKind::Helper => {
                let v = c(k.mi(p, X1, Y, S | X2)).min(c(k.mi(p, X1 | X2, Y, 0)));
                CornerEvaluation {
                    rc_cap: Some(0.0),
                    ..CornerEvaluation::plain(v, v)
                }
            }
            BoundKind::Causal => CornerEvaluation::plain(c(k.mi(p, U, Y, V)), c(k.mi(p, U | V, Y, 0))),
            BoundKind::IndepStates => {
                // Layout (S1, S2, X1, X2, Y).
                let (s1, s2, x1, x2, y) = (1, 2, 4, 8, 16);
                let r1 = c(k.mi(p, x1, y, x2 | s2));
                let r2 = c(k.mi(p, x2, y, x1 | s1));
                let sum = c(k.mi(p, x1 | x2, y, 0));
                CornerEvaluation {
                    rc_cap: Some(r2),
                    ..CornerEvaluation::plain(r1, sum)
                }
            }
        }
    }

    pub fn eval(&mut self, law: &FactoredLaw) -> Result<CornerEvaluation> {
        self.check(law)?;
        Ok(self.eval_unchecked(law))
    }
}

/// Evaluates `law` under `bound` on `ch`.
pub fn evaluate(ch: &ChannelSpec, bound: BoundKind, law: &FactoredLaw, relax: bool) -> Result<CornerEvaluation> {
    Evaluator::for_law(ch, bound, relax, law)?.eval(law)
}

/// Inner bound with strictly causal states; `relax` drops the constraint.
pub fn eval_inner_sc(ch: &ChannelSpec, law: &FactoredLaw, relax: bool) -> Result<CornerEvaluation> {
    evaluate(ch, BoundKind::InnerSc, law, relax)
}

/// Outer bound; uses the U-expressions when the law carries a U factor.
pub fn eval_outer_sc(ch: &ChannelSpec, law: &FactoredLaw) -> Result<CornerEvaluation> {
    let b = if law.has_u() {
        BoundKind::OuterScWithU
    } else {
        BoundKind::OuterSc
    };
    evaluate(ch, b, law, false)
}

pub fn eval_prop1(ch: &ChannelSpec, law: &FactoredLaw) -> Result<CornerEvaluation> {
    evaluate(ch, BoundKind::Prop1, law, false)
}

pub fn eval_asym_inner(ch: &ChannelSpec, law: &FactoredLaw) -> Result<CornerEvaluation> {
    evaluate(ch, BoundKind::AsymInner, law, false)
}

pub fn eval_causal(ch: &ChannelSpec, law: &FactoredLaw) -> Result<CornerEvaluation> {
    evaluate(ch, BoundKind::Causal, law, false)
}

pub fn eval_nostate(ch: &ChannelSpec, law: &FactoredLaw) -> Result<CornerEvaluation> {
    evaluate(ch, BoundKind::NoState, law, false)
}

/// Caps `(R1, R2, R1 + R2)` for independent state components.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThreeCaps {
    pub r1_cap: f64,
    pub r2_cap: f64,
    pub sum_cap: f64,
}

pub fn eval_indep_states(ch: &ChannelSpec, law: &FactoredLaw) -> Result<ThreeCaps> {
    let e = evaluate(ch, BoundKind::IndepStates, law, false)?;
    Ok(ThreeCaps {
        r1_cap: e.r1_cap,
        r2_cap: e.rc_cap.unwrap_or(0.0),
        sum_cap: e.sum_cap,
    })
}

/// Helper-model value; `state_deterministic` tells whether it is the capacity
/// or only a bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HelperValue {
    pub value: f64,
    pub state_deterministic: bool,
}

pub fn eval_helper_capacity(ch: &ChannelSpec, law: &FactoredLaw) -> Result<HelperValue> {
    let e = evaluate(ch, BoundKind::Helper, law, false)?;
    Ok(HelperValue {
        value: e.r1_cap,
        state_deterministic: ch.is_state_deterministic(),
    })
}

/// `g(p, q2)`, the entropy of `X2 + Z` for the fading example.
pub fn fading_g(p: f64, q2: f64) -> f64 {
    let pl = crate::prob::plogp;
    pl(p * q2) + pl((1.0 - p) * (1.0 - q2)) + pl(crate::prob::conv(p, q2))
}

/// `min{h2(q1), g(p,q2) - h2(p)}`.
pub fn fading_helper_value(p: f64, q1: f64, q2: f64) -> f64 {
    h2(q1).min(fading_g(p, q2) - h2(p))
}

/// The mod-2 selector channel with the outer-sc law `V = S_{X1+X2}` and
/// independent uniform inputs.
pub fn mod2_selector_witness() -> Result<(ChannelSpec, FactoredLaw)> {
    let ch = crate::channel::builtin_channel("mod2-selector", &std::collections::BTreeMap::new())?;
    let z = ch.sizes;
    let rows = (0..z.s * z.x1 * z.x2)
        .map(|r| {
            let (s, x1, x2) = (r / 4, (r / 2) % 2, r % 2);
            let comp = [s / 2, s % 2];
            let v = comp[(x1 + x2) % 2];
            (0..2).map(|k| if k == v { 1.0 } else { 0.0 }).collect()
        })
        .collect();
    let law = FactoredLaw::outer_sc(vec![0.5, 0.5], vec![vec![0.5, 0.5]; 2], rows)?;
    Ok((ch, law))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{builtin_channel, random_channel, random_law, CondTable, Sizes};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn pmap(p: f64) -> BTreeMap<String, f64> {
        BTreeMap::from([("p".to_string(), p)])
    }

    #[test]
    fn prop1_on_switch() {
        let ch = builtin_channel("switch", &BTreeMap::new()).unwrap();
        let ind = FactoredLaw::joint_input(vec![vec![0.25, 0.25], vec![0.25, 0.25]]).unwrap();
        let e = eval_prop1(&ch, &ind).unwrap();
        assert!((e.r1_cap - 0.5).abs() < 1e-12 && (e.sum_cap - 0.5).abs() < 1e-12);
        let eq = FactoredLaw::joint_input(vec![vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        let e = eval_prop1(&ch, &eq).unwrap();
        assert!(e.r1_cap.abs() < 1e-12 && (e.sum_cap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mod2_selector_witness_corners() {
        let (ch, law) = super::mod2_selector_witness().unwrap();
        let e = eval_outer_sc(&ch, &law).unwrap();
        assert!((e.r1_cap - 1.0).abs() < 1e-6, "{e:?}");
        assert!((e.sum_cap - 1.5).abs() < 1e-6, "{e:?}");
        // I(V,X2;Y) = 1 and I(V;S|X2) = h2(p) - Pr{S0 != S1}, so the slack is
        // 1 - 1/2 + 2p(1-p).
        let p = crate::prob::inverse_binary_entropy(0.5).unwrap();
        let slack = 0.5 + 2.0 * p * (1.0 - p);
        assert!((e.constraint_slack.unwrap() - slack).abs() < 1e-9, "{e:?}");
    }

    fn helper_v_equals_s(p: f64, q1: f64) -> (ChannelSpec, FactoredLaw) {
        let ch = builtin_channel("additive-binary-helper", &pmap(p)).unwrap();
        let law = FactoredLaw::inner_sc(
            vec![0.5, 0.5],
            vec![vec![1.0 - q1, q1]; 2],
            vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]],
        )
        .unwrap();
        (ch, law)
    }

    #[test]
    fn inner_sc_claim_structure() {
        for (p, q1) in [(0.1, 0.3), (0.05, 0.5), (0.25, 0.1)] {
            let (ch, law) = helper_v_equals_s(p, q1);
            let e = eval_inner_sc(&ch, &law, false).unwrap();
            let expect = h2(crate::prob::conv(p, q1)) - h2(p);
            assert!((e.r1_cap - expect).abs() < 1e-12);
            // slack = I(S;Y1) = 1 - h2(p*q1*1/2 ...) computed directly
            let i_s_y1 = 1.0 - h2(crate::prob::conv(p, q1));
            assert!((e.constraint_slack.unwrap() - i_s_y1).abs() < 1e-12);
            assert!(e.feasible);
            let r = eval_inner_sc(&ch, &law, true).unwrap();
            assert!(r.constraint_slack.is_none() && r.feasible);
        }
    }

    #[test]
    fn inner_sc_trivial_v_on_stateless_channel() {
        let ch = builtin_channel("adder-mac", &BTreeMap::new()).unwrap();
        let law = FactoredLaw::uniform(LawKind::InnerSc, ch.sizes, 1, 1, false);
        let e = eval_inner_sc(&ch, &law, false).unwrap();
        assert!((e.sum_cap - 1.5).abs() < 1e-12);
        let n = eval_nostate(&ch, &FactoredLaw::uniform(LawKind::JointInput, ch.sizes, 1, 1, false)).unwrap();
        assert!((n.sum_cap - 1.5).abs() < 1e-12 && (n.r1_cap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let ch = builtin_channel("switch", &BTreeMap::new()).unwrap();
        let law = FactoredLaw::uniform(LawKind::InnerSc, ch.sizes, 1, 2, false);
        assert!(eval_prop1(&ch, &law).is_err());
        assert!(eval_causal(&ch, &law).is_err());
        assert!(eval_outer_sc(&ch, &law).is_err());
    }

    #[test]
    fn fading_helper_matches_closed_form() {
        for p in [0.0, 0.1, 0.3] {
            let ch = builtin_channel("fading-binary", &pmap(p)).unwrap();
            for (q1, q2) in [(0.5, 0.5), (0.2, 0.7), (0.9, 0.1)] {
                let law = FactoredLaw::product_input(vec![1.0 - q1, q1], vec![1.0 - q2, q2]).unwrap();
                let v = eval_helper_capacity(&ch, &law).unwrap();
                assert!(v.state_deterministic);
                assert!((v.value - fading_helper_value(p, q1, q2)).abs() < 1e-12);
            }
        }
        assert!((fading_g(0.0, 0.5) - 1.0).abs() < 1e-15);
        assert!((fading_helper_value(0.0, 0.5, 0.5) - 1.0).abs() < 1e-15);
        let ch = builtin_channel("fading-binary", &pmap(0.2)).unwrap();
        let law = FactoredLaw::product_input(vec![1.0, 0.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(eval_helper_capacity(&ch, &law).unwrap().value, 0.0);
    }

    #[test]
    fn causal_shannon_strategies_on_noiseless_helper() {
        // |V| = |X2|^|S| = 4 and |U| = |X1|^|S| = 4: strategies are maps S -> X,
        // with bit s of the index giving the letter for state s.
        let ch = builtin_channel("additive-binary-helper", &pmap(0.0)).unwrap();
        let z = ch.sizes;
        let strategy_law = |pv: Vec<f64>, pu: Vec<f64>| {
            let mut law = FactoredLaw::uniform(LawKind::Causal, z, 4, 4, false);
            law.factors[0].data = pv;
            for v in 0..4 {
                law.factors[1].row_mut(v).copy_from_slice(&pu);
            }
            law.factors[2] = CondTable::deterministic(4 * z.s, z.x2, |r| (r / z.s >> (r % z.s)) & 1);
            law.factors[3] = CondTable::deterministic(z.s * 16, z.x1, |r| ((r % 4) >> (r / 16)) & 1);
            law
        };
        // Encoder 1 cancels the state (x1 = u xor s), encoder 2 is silent.
        let cancel = strategy_law(vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 0.5, 0.5, 0.0]);
        let e = eval_causal(&ch, &cancel).unwrap();
        assert!((e.sum_cap - 1.0).abs() < 1e-12, "{e:?}");
        assert!((e.r1_cap - 1.0).abs() < 1e-12, "{e:?}");
        // Exhausting the deterministic strategy supports: the best sum adds
        // one noiseless bit from encoder 2's constant strategies.
        let mut best: f64 = 0.0;
        for sv in 1u32..16 {
            for su in 1u32..16 {
                let spread = |m: u32| {
                    let k = m.count_ones() as f64;
                    (0..4).map(|i| if m >> i & 1 == 1 { 1.0 / k } else { 0.0 }).collect::<Vec<_>>()
                };
                let e = eval_causal(&ch, &strategy_law(spread(sv), spread(su))).unwrap();
                best = best.max(e.sum_cap);
            }
        }
        assert!((best - 2.0).abs() < 1e-12);
    }

    #[test]
    fn causal_reduces_to_nostate_without_state() {
        let ch = builtin_channel("adder-mac", &BTreeMap::new()).unwrap();
        let z = ch.sizes;
        let mut law = FactoredLaw::uniform(LawKind::Causal, z, 2, 2, false);
        law.factors[0].data = vec![0.3, 0.7];
        law.factors[1].data = vec![0.2, 0.8, 0.6, 0.4];
        law.factors[2] = CondTable::deterministic(2, 2, |r| r);
        law.factors[3] = CondTable::deterministic(4, 2, |r| r % 2);
        let e = eval_causal(&ch, &law).unwrap();
        let joint = vec![vec![0.3 * 0.2, 0.7 * 0.6], vec![0.3 * 0.8, 0.7 * 0.4]];
        let n = eval_nostate(&ch, &FactoredLaw::joint_input(joint).unwrap()).unwrap();
        assert!((e.r1_cap - n.r1_cap).abs() < 1e-12);
        assert!((e.sum_cap - n.sum_cap).abs() < 1e-12);
    }

    #[test]
    fn asym_inner_degenerate_and_two_way() {
        let ch = builtin_channel("additive-binary-helper", &pmap(0.0)).unwrap();
        let z = ch.sizes;
        let mut law = FactoredLaw::uniform(LawKind::AsymInner, z, 1, 2, false);
        law.factors[3] = CondTable::deterministic(z.s * z.x2, 2, |r| r / z.x2);
        let e = eval_asym_inner(&ch, &law).unwrap();
        let j = crate::channel::assemble_joint(&ch, &law).unwrap();
        let ixy = j.mutual_info(&["X1", "X2"], &["Y"]).unwrap();
        assert!((e.sum_cap - ixy).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let zz = Sizes { s: 2, x1: 2, x2: 3, y: 3 };
        let ch = random_channel(&mut rng, zz);
        let law = random_law(&mut rng, LawKind::AsymInner, zz, 2, 3, false);
        let e = eval_asym_inner(&ch, &law).unwrap();
        let j = crate::channel::assemble_joint(&ch, &law).unwrap();
        let h = |v: &[&str]| j.entropy(v).unwrap();
        let second = (h(&["U"]) + h(&["Y", "U"]) - h(&["V", "X1", "X2", "Y", "U"]) + h(&["V", "X1", "X2", "U"])
            - 2.0 * h(&["U"]))
            - (h(&["V", "U", "X2"]) + h(&["S", "U", "X2"]) - h(&["V", "S", "U", "X2"]) - h(&["U", "X2"]));
        assert!((e.r1_caps.unwrap()[1] - second).abs() < 1e-9);

        let deg = FactoredLaw::uniform(LawKind::AsymInner, zz, 1, 1, false);
        let e = eval_asym_inner(&ch, &deg).unwrap();
        let n = eval_nostate(&ch, &FactoredLaw::uniform(LawKind::JointInput, zz, 1, 1, false)).unwrap();
        assert!((e.r1_caps.unwrap()[0] - n.r1_cap).abs() < 1e-12);
        assert!((e.sum_cap - n.sum_cap).abs() < 1e-12);
    }

    fn symmetric_two_state_channel() -> ChannelSpec {
        // Y = (X1 xor S1, X2 xor S2) with identical component laws.
        let z = Sizes { s: 4, x1: 2, x2: 2, y: 4 };
        let q1 = [0.8, 0.2];
        let q_s = (0..4).map(|s| q1[s / 2] * q1[s % 2]).collect();
        let mut ch = ChannelSpec::from_fn(z, q_s, |s, x1, x2, y| {
            let (a, b) = (s / 2, s % 2);
            if y == (x1 ^ a) * 2 + (x2 ^ b) {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        ch.state_split = Some([2, 2]);
        ch
    }

    #[test]
    fn indep_states_caps() {
        let ch = symmetric_two_state_channel();
        let law = FactoredLaw::product_input(vec![0.5, 0.5], vec![0.5, 0.5]).unwrap();
        let c3 = eval_indep_states(&ch, &law).unwrap();
        assert!((c3.r1_cap - c3.r2_cap).abs() < 1e-12);
        // S2 degenerate: collapses to the no-state caps of the S1-averaged channel.
        let z = Sizes { s: 2, x1: 2, x2: 2, y: 3 };
        let mut deg = random_channel(&mut ChaCha8Rng::seed_from_u64(2), z);
        deg.state_split = Some([2, 1]);
        let law = FactoredLaw::product_input(vec![0.4, 0.6], vec![0.7, 0.3]).unwrap();
        let c3 = eval_indep_states(&deg, &law).unwrap();
        let avg = ChannelSpec::from_flat(
            Sizes { s: 1, ..z },
            vec![1.0],
            deg.averaged_kernel(),
        )
        .unwrap();
        let joint = FactoredLaw::joint_input(vec![vec![0.28, 0.12], vec![0.42, 0.18]]).unwrap();
        let n = eval_nostate(&avg, &joint).unwrap();
        assert!((c3.r1_cap - n.r1_cap).abs() < 1e-12);
        assert!((c3.sum_cap - n.sum_cap).abs() < 1e-12);
        assert!(evaluate(&avg, BoundKind::IndepStates, &law, false).is_err());
    }

    #[test]
    fn polygon_support() {
        let e = CornerEvaluation::plain(0.4, 1.0);
        let v = e.vertices();
        assert_eq!(v.len(), 4);
        let (h, p) = e.support(0.0).unwrap();
        assert_eq!((h, p.r1), (0.4, 0.4));
        let (h, p) = e.support(1.0).unwrap();
        assert_eq!((h, p.rc), (1.0, 1.0));
        // At lambda = 1/2 every point on the sum face ties; larger r1 wins.
        let (_, p) = e.support(0.5).unwrap();
        assert_eq!(p, RatePoint::new(0.6, 0.4));
    }

    fn random_outer_with_u(seed: u64) -> (ChannelSpec, FactoredLaw) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = Sizes { s: 2, x1: 2, x2: 2, y: 3 };
        let ch = random_channel(&mut rng, z);
        let law = random_law(&mut rng, LawKind::OuterSc, z, 2, 3, true);
        (ch, law)
    }

    fn permute_rows(t: &CondTable, perm: impl Fn(usize) -> usize) -> CondTable {
        let mut out = t.clone();
        for r in 0..t.rows {
            out.row_mut(perm(r)).copy_from_slice(t.row(r));
        }
        out
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn dominance_and_sum_comparison(seed in 0u64..1_000_000) {
            let (ch, law) = random_outer_with_u(seed);
            let with_u = eval_outer_sc(&ch, &law).unwrap();
            let no_u = eval_outer_sc(&ch, &law.without_u()).unwrap();
            prop_assert!(with_u.r1_cap <= no_u.r1_cap + 1e-9);
            prop_assert!(with_u.sum_cap <= no_u.sum_cap + 1e-9);
            let j = crate::channel::assemble_joint(&ch, &law).unwrap();
            let ixy = j.mutual_info(&["X1", "X2"], &["Y"]).unwrap();
            prop_assert!(no_u.sum_cap <= ixy + 1e-9);
        }

        #[test]
        fn embedding_inner_into_outer(seed in 0u64..1_000_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let z = Sizes { s: 3, x1: 2, x2: 2, y: 3 };
            let ch = random_channel(&mut rng, z);
            let inner = random_law(&mut rng, LawKind::InnerSc, z, 1, 3, false);
            let a = eval_inner_sc(&ch, &inner, false).unwrap();
            let b = eval_outer_sc(&ch, &inner.lift_to_outer(z).unwrap()).unwrap();
            prop_assert!((a.r1_cap - b.r1_cap).abs() <= 1e-12);
            prop_assert!((a.sum_cap - b.sum_cap).abs() <= 1e-12);
            prop_assert!((a.constraint_slack.unwrap() - b.constraint_slack.unwrap()).abs() <= 1e-12);
        }

        #[test]
        fn relabeling_invariance(seed in 0u64..1_000_000) {
            // Swap the two symbols of X2 and of V in both channel and law.
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let z = Sizes { s: 2, x1: 2, x2: 2, y: 3 };
            let ch = random_channel(&mut rng, z);
            let law = random_law(&mut rng, LawKind::InnerSc, z, 1, 2, false);
            let ch2 = ChannelSpec::from_fn(z, ch.q_s.clone(), |s, x1, x2, y| ch.w(s, x1, 1 - x2, y)).unwrap();
            let mut law2 = law.clone();
            law2.factors[0].data.reverse();
            law2.factors[1] = permute_rows(&law.factors[1], |r| 1 - r);
            let pv = permute_rows(&law.factors[2], |r| (r / 2) * 2 + (1 - r % 2));
            law2.factors[2] = pv.clone();
            for r in 0..pv.rows {
                law2.factors[2].row_mut(r).reverse();
            }
            let a = eval_inner_sc(&ch, &law, false).unwrap();
            let b = eval_inner_sc(&ch2, &law2, false).unwrap();
            prop_assert!((a.r1_cap - b.r1_cap).abs() <= 1e-12);
            prop_assert!((a.sum_cap - b.sum_cap).abs() <= 1e-12);
            prop_assert!((a.constraint_slack.unwrap() - b.constraint_slack.unwrap()).abs() <= 1e-12);
        }
    }
}
