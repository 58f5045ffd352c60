use std::collections::BTreeMap;

use macregions_core::fme::{self, Assumptions};
use macregions_core::sim::{helper_law, run_block_markov, SimConfig};
use macregions_core::*;

#[test]
fn covering_failures_fall_with_block_length() {
    let ch = builtin_channel("additive-binary-helper", &BTreeMap::from([("p".into(), 0.1)])).unwrap();
    let law = helper_law(0.03).unwrap();
    let mut failures = Vec::new();
    for n in [6, 10, 14] {
        let cfg = SimConfig {
            epsilon: 0.15,
            trials: 60,
            t: Some(0.9),
            t_hat: Some(0.9056),
            ..SimConfig::new(n, law.clone())
        };
        let r = run_block_markov(&ch, RatePoint::new(0.0, 0.1), &cfg).unwrap();
        failures.push(r.events.covering);
    }
    assert!(failures[0] > failures[1] && failures[1] >= failures[2], "{failures:?}");
}

#[test]
fn builtin_projections_are_stable() {
    for name in fme::BUILTIN_SYSTEMS {
        let a = fme::run_builtin(name).unwrap();
        let b = fme::run_builtin(name).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|s| s.matches_golden != Some(false)), "{name}");
    }
}

#[test]
fn json_system_projects_like_builtin() {
    let b = fme::builtin_system("appendixE").unwrap();
    let text = b.system.to_json().to_string();
    let sys = SymbolicSystem::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
    let a = fme::run_elimination(&sys, &b.eliminate, &Assumptions::default()).unwrap();
    let direct = fme::run_elimination(&b.system, &b.eliminate, &Assumptions::default()).unwrap();
    assert_eq!(a, direct);
}
