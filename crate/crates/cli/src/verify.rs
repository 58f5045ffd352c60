//! The verification battery behind `verify-examples` and the acceptance
//! test target. Each check reproduces one published value or property and
//! reports a single pass/fail line with its measured numbers.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use macregions_core::bounds::{self, fading_g};
use macregions_core::channel::{random_channel, random_law};
use macregions_core::fme;
use macregions_core::gaussian::{self, GaussianModel, GaussianParams};
use macregions_core::geometry::{convex_hull, excess};
use macregions_core::prob::h2;
use macregions_core::search::{example3, example6, item_rng, thm4_pentagon};
use macregions_core::sim::{helper_law, run_block_markov, SimConfig};
use macregions_core::*;
use serde::Serialize;

/// Outcome of one check.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub id: u32,
    pub title: &'static str,
    pub pass: bool,
    /// Measured values, in `key=value` form.
    pub detail: String,
    /// Informational output that does not affect `pass`.
    pub notes: Vec<String>,
    pub seconds: f64,
    pub budget_seconds: f64,
}

impl Check {
    pub fn line(&self) -> String {
        format!(
            "{} {} {} ({:.2}s of {:.0}s) {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.seconds,
            self.budget_seconds,
            self.detail
        )
    }
}

/// Checks that fail for a documented reason unrelated to the implementation.
/// A failure of any other check is a regression.
pub const KNOWN_UNATTAINABLE: &[u32] = &[1];

pub const ALL: [u32; 9] = [1, 2, 3, 4, 5, 6, 7, 8, 9];

type Body = fn() -> Result<(bool, String, Vec<String>)>;

fn table(id: u32) -> Option<(&'static str, f64, Body)> {
    Some(match id {
        1 => ("mod-2 selector outer-sc witness", 1.0, witness as Body),
        2 => ("helper channel Rc=0 slice vs closed form", 120.0, helper_slice),
        3 => ("switch channel prop1 caps", 30.0, switch_caps),
        4 => ("FME projections match goldens", 1.0, fme_goldens),
        5 => ("nesting and sum-rate suite on random channels", 300.0, random_suite),
        6 => ("deterministic-state and fading capacities", 120.0, capacity_agreement),
        7 => ("Gaussian maximization and monotonicity", 10.0, gaussian_checks),
        8 => ("block-Markov simulator error trend", 600.0, simulator_trend),
        9 => ("causal bound collapses without state", 120.0, causal_reduction),
        _ => return None,
    })
}

/// Runs check `id`. An internal error is reported as a failure.
pub fn run(id: u32) -> Option<Check> {
    let (title, budget, body) = table(id)?;
    let t = Instant::now();
    let out = body();
    let seconds = t.elapsed().as_secs_f64();
    let (ok, detail, notes) = out.unwrap_or_else(|e| (false, format!("error: {e}"), vec![]));
    let slow = Duration::from_secs_f64(seconds) > Duration::from_secs_f64(budget);
    let detail = if slow { format!("{detail} over-budget") } else { detail };
    Some(Check {
        id,
        title,
        pass: ok && !slow,
        detail,
        notes,
        seconds,
        budget_seconds: budget,
    })
}

fn pmap(k: &str, v: f64) -> BTreeMap<String, f64> {
    BTreeMap::from([(k.to_string(), v)])
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn witness() -> Result<(bool, String, Vec<String>)> {
    let (ch, law) = bounds::mod2_selector_witness()?;
    let e = bounds::eval_outer_sc(&ch, &law)?;
    let slack = e.constraint_slack.unwrap_or(f64::NAN);
    let r1 = close(e.r1_cap, 1.0, 1e-6);
    let sum = close(e.sum_cap, 1.5, 1e-6);
    let sl = close(slack, 0.5, 1e-6);
    let detail = format!(
        "r1_cap={:.6}[{}] sum_cap={:.6}[{}] slack={:.6}[{}] want slack=0.500000",
        e.r1_cap,
        ok_str(r1),
        e.sum_cap,
        ok_str(sum),
        slack,
        ok_str(sl)
    );
    let p = prob::inverse_binary_entropy(0.5)?;
    let notes = vec![format!(
        "exact slack 1/2 + 2p(1-p) = {:.9} with p = {:.9}",
        0.5 + 2.0 * p * (1.0 - p),
        p
    )];
    Ok((r1 && sum && sl, detail, notes))
}

fn ok_str(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "off"
    }
}

fn helper_slice() -> Result<(bool, String, Vec<String>)> {
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();
    for p in [0.05, 0.1, 0.25] {
        let ch = builtin_channel("additive-binary-helper", &pmap("p", p))?;
        for q1 in [0.1, 0.3, 0.5] {
            let want = example3(p, q1)?;
            for relax in [false, true] {
                let cfg = SearchConfig {
                    lambda_points: 1,
                    input_caps: Some([q1, 1.0]),
                    relax,
                    ..Default::default()
                };
                let got = compute_region(&ch, BoundKind::InnerSc, &cfg)?.r1_at_zero_rc();
                worst = worst.max((got - want).abs());
                notes.push(format!("p={p} q1={q1} relax={relax} search={got:.6} closed={want:.6}"));
            }
        }
    }
    Ok((worst <= 1e-2, format!("max_err={worst:.2e} tol=1e-2"), notes))
}

fn switch_caps() -> Result<(bool, String, Vec<String>)> {
    let ch = builtin_channel("switch", &BTreeMap::new())?;
    let dec = compute_region(
        &ch,
        BoundKind::Prop1,
        &SearchConfig {
            mode: RegionMode::Decoupled,
            ..Default::default()
        },
    )?;
    let union = compute_region(&ch, BoundKind::Prop1, &SearchConfig::default())?;
    let pass = close(dec.max_r1, 0.5, 1e-3) && close(dec.max_sum, 1.0, 1e-3);
    let corner = RatePoint::new(0.5, 0.5);
    let (verdict, d) = membership(&union, corner, 1e-6);
    let hull: Vec<String> = union.hull.iter().map(|p| format!("({:.6},{:.6})", p.rc, p.r1)).collect();
    let notes = vec![
        format!("pentagon-union hull: {}", hull.join(" ")),
        format!(
            "square corner (Rc,R1)=(0.5,0.5): {} (distance {d:.4}); decoupled hull contains it: {}",
            verdict.as_str(),
            excess(&[corner], &dec.hull) <= 1e-6
        ),
    ];
    Ok((
        pass,
        format!("max_r1={:.6} max_sum={:.6} want (0.5, 1.0) tol=1e-3", dec.max_r1, dec.max_sum),
        notes,
    ))
}

fn fme_goldens() -> Result<(bool, String, Vec<String>)> {
    let mut pass = true;
    let mut parts = Vec::new();
    let mut notes = Vec::new();
    for name in fme::BUILTIN_SYSTEMS {
        let a = fme::run_builtin(name)?;
        let b = fme::run_builtin(name)?;
        let stable = a == b;
        let matched = !a.is_empty() && a.iter().all(|s| s.matches_golden == Some(true));
        pass &= stable && matched;
        parts.push(format!("{name}: golden={} stable={}", matched, stable));
        for s in &a {
            for l in &s.inequalities {
                notes.push(format!("{name}/{}: {l}", s.name));
            }
        }
    }
    Ok((pass, parts.join(" "), notes))
}

/// Channel `i` of the random suite; alphabet sizes in {2, 3} cycle through
/// all sixteen combinations.
fn suite_channel(i: u64) -> ChannelSpec {
    let bits = (i * 7 + 3) % 16;
    let d = |k: u64| 2 + ((bits >> k) & 1) as usize;
    let z = Sizes { s: d(0), x1: d(1), x2: d(2), y: d(3) };
    let mut rng = item_rng(0x5eed, i);
    random_channel(&mut rng, z).with_name(format!("random-{i}"))
}

fn random_suite() -> Result<(bool, String, Vec<String>)> {
    let cfg = SearchConfig {
        lambda_points: 9,
        restarts: 2,
        sweeps: 3,
        card_v: Some(3),
        ..Default::default()
    };
    let (mut io, mut op, mut sum_gap, mut dom) = (0f64, 0f64, f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut notes = Vec::new();
    for i in 0..20u64 {
        let ch = suite_channel(i);
        let z = ch.sizes;
        let n = nested_regions(&ch, &cfg)?;
        let cap = sum_capacity(&ch, &cfg)?.value;
        let (a, b) = (excess(&n.inner.hull, &n.outer.hull), excess(&n.outer.hull, &n.prop1.hull));
        io = io.max(a);
        op = op.max(b);
        sum_gap = sum_gap.max(n.inner.max_sum - cap);
        let mut rng = item_rng(0xd0, i);
        for _ in 0..10 {
            let law = random_law(&mut rng, LawKind::OuterSc, z, 2, 3, true);
            let with_u = bounds::evaluate(&ch, BoundKind::OuterScWithU, &law, false)?;
            let dropped = bounds::evaluate(&ch, BoundKind::OuterSc, &law.without_u(), false)?;
            dom = dom
                .max(with_u.r1_cap - dropped.r1_cap)
                .max(with_u.sum_cap - dropped.sum_cap);
        }
        notes.push(format!(
            "random-{i} |S|={} |X1|={} |X2|={} |Y|={}: inner-outer {a:.2e} outer-prop1 {b:.2e} inner sum {:.6} cap {cap:.6}",
            z.s, z.x1, z.x2, z.y, n.inner.max_sum
        ));
    }
    let pass = io <= 1e-6 && op <= 1e-6 && sum_gap <= 1e-6 && dom <= 1e-9;
    Ok((
        pass,
        format!(
            "inner-outer={io:.2e} outer-prop1={op:.2e} tol=1e-6 sum_excess={sum_gap:.2e} tol=1e-6 u_dominance={dom:.2e} tol=1e-9"
        ),
        notes,
    ))
}

fn capacity_agreement() -> Result<(bool, String, Vec<String>)> {
    let ch = builtin_channel("additive-binary-helper", &pmap("p", 0.0))?;
    let cfg = SearchConfig::default();
    let inner = compute_region(&ch, BoundKind::InnerSc, &cfg)?;
    let mut pts = Vec::new();
    const G: usize = 50;
    for i in 0..=G {
        for j in 0..=G {
            let (r1, sum) = thm4_pentagon(i as f64 / G as f64, j as f64 / G as f64)?;
            let e = CornerEvaluation {
                r1_cap: r1,
                sum_cap: sum,
                constraint_slack: None,
                feasible: true,
                r1_caps: None,
                rc_cap: None,
            };
            pts.extend(e.vertices());
        }
    }
    let oracle = convex_hull(&pts);
    let d = excess(&inner.hull, &oracle).max(excess(&oracle, &inner.hull));
    let mut worst: f64 = 0.0;
    let mut notes = vec![format!("deterministic-state hull distance {d:.2e}")];
    for p in [0.1, 0.3] {
        let fch = builtin_channel("fading-binary", &pmap("p", p))?;
        let got = compute_region(&fch, BoundKind::Helper, &cfg)?.max_r1;
        let want = example6(p)?;
        worst = worst.max((got - want.value).abs());
        notes.push(format!(
            "fading p={p}: search {got:.8} closed {:.8} at q1={:.4} q2={:.4} (g={:.6})",
            want.value,
            want.q1,
            want.q2,
            fading_g(p, want.q2)
        ));
    }
    Ok((
        d <= 1e-3 && worst <= 1e-3,
        format!("hull_dist={d:.2e} fading_err={worst:.2e} tol=1e-3"),
        notes,
    ))
}

fn gaussian_checks() -> Result<(bool, String, Vec<String>)> {
    let fig = GaussianParams::new(0.5, 0.5, 1.0, 0.5)?;
    let (rg, golden) = gaussian::max_theta(&fig, 0.0, 1.0)?;
    let (rgrid, grid) = gaussian::max_theta_grid(&fig, 0.0, 1.0, 1_000_001)?;
    let grid_ok = (golden - grid).abs() <= 1e-8;

    let levels = [0.1, 0.5, 1.0, 2.0, 5.0];
    let mut mono_bad = 0;
    for model in GaussianModel::ALL {
        for &a in &levels {
            for &b in &levels {
                for &c in &levels {
                    // Sweep each coordinate in turn with the other three fixed.
                    let at = |p1: f64, p2: f64, q: f64| -> Result<f64> {
                        Ok(gaussian::gaussian_capacity(model, &GaussianParams::new(p1, p2, q, c)?)?.value)
                    };
                    for w in levels.windows(2) {
                        let (lo, hi) = (w[0], w[1]);
                        if at(hi, a, b)? < at(lo, a, b)? - 1e-12 {
                            mono_bad += 1;
                        }
                        if at(a, hi, b)? < at(a, lo, b)? - 1e-12 {
                            mono_bad += 1;
                        }
                        if at(a, b, hi)? > at(a, b, lo)? + 1e-12 {
                            mono_bad += 1;
                        }
                    }
                }
            }
        }
    }

    let mut bracket_gap: f64 = 0.0;
    for &p1 in &levels {
        for &p2 in &levels {
            for &n in &levels {
                let g = GaussianParams::new(p1, p2, 1.0, n)?;
                let full = gaussian::max_theta(&g, -1.0, 1.0)?.1;
                let half = gaussian::max_theta(&g, 0.0, 1.0)?.1;
                bracket_gap = bracket_gap.max((full - half).abs());
            }
        }
    }
    Ok((
        grid_ok && mono_bad == 0 && bracket_gap <= 1e-10,
        format!(
            "golden={golden:.12} grid={grid:.12} diff={:.1e} tol=1e-8 monotonicity_violations={mono_bad} bracket_gap={bracket_gap:.1e} tol=1e-10",
            (golden - grid).abs()
        ),
        vec![format!("argmax rho: golden {rg:.8}, grid {rgrid:.6}")],
    ))
}

fn simulator_trend() -> Result<(bool, String, Vec<String>)> {
    let ch = builtin_channel("additive-binary-helper", &pmap("p", 0.1))?;
    let cap = 1.0 - h2(0.1);
    let law = helper_law(0.03)?;
    let cfg = |n| SimConfig {
        epsilon: 0.25,
        ..SimConfig::new(n, law.clone())
    };
    let inside = RatePoint::new(0.0, 0.8 * cap);
    let mut errs = Vec::new();
    let mut notes = Vec::new();
    for n in [6, 10, 14] {
        let r = run_block_markov(&ch, inside, &cfg(n))?;
        notes.push(format!(
            "inside n={n}: err {:.3} [{:.3}, {:.3}] sizes {:?} events {:?}",
            r.error_rate, r.wilson_lo, r.wilson_hi, r.sizes, r.events
        ));
        errs.push(r.error_rate);
    }
    let above = run_block_markov(&ch, RatePoint::new(0.0, 1.2 * cap), &cfg(14))?;
    notes.push(format!("above n=14: err {:.3} sizes {:?}", above.error_rate, above.sizes));
    let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
    Ok((
        decreasing && above.error_rate > 0.5,
        format!(
            "inside err n=6,10,14: {:.3} {:.3} {:.3} (strictly decreasing: {decreasing}) above n=14: {:.3} (> 0.5)",
            errs[0], errs[1], errs[2], above.error_rate
        ),
        notes,
    ))
}

fn causal_reduction() -> Result<(bool, String, Vec<String>)> {
    let ch = builtin_channel("adder-mac", &BTreeMap::new())?;
    let cfg = SearchConfig::default();
    let a = compute_region(&ch, BoundKind::Causal, &cfg)?;
    let b = compute_region(&ch, BoundKind::NoState, &cfg)?;
    let d = excess(&a.hull, &b.hull).max(excess(&b.hull, &a.hull));
    Ok((d <= 1e-3, format!("hull_dist={d:.2e} tol=1e-3"), vec![]))
}
