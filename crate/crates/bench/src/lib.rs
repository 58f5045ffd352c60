//! Fixtures shared by the benchmarks under `benches/`.

use std::collections::BTreeMap;

use macregions_core::channel::{random_channel, random_law};
use macregions_core::search::item_rng;
use macregions_core::{builtin_channel, ChannelSpec, FactoredLaw, LawKind, SearchConfig, Sizes};

pub fn helper_channel(p: f64) -> ChannelSpec {
    builtin_channel("additive-binary-helper", &BTreeMap::from([("p".to_string(), p)])).expect("builtin channel")
}

/// A random ternary channel and an outer-sc law with |V| = 3.
pub fn ternary_case(seed: u64) -> (ChannelSpec, FactoredLaw) {
    let z = Sizes { s: 3, x1: 3, x2: 3, y: 3 };
    let mut rng = item_rng(seed, 0);
    let ch = random_channel(&mut rng, z);
    let law = random_law(&mut rng, LawKind::OuterSc, z, 1, 3, false);
    (ch, law)
}

/// A search budget small enough to time repeatedly.
pub fn quick_search() -> SearchConfig {
    SearchConfig {
        lambda_points: 5,
        restarts: 1,
        sweeps: 2,
        ..Default::default()
    }
}
