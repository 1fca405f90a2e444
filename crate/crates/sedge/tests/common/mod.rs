//! Shared fixtures for integration tests: a small forest trained once per
//! test binary on a synthetic corpus, and a slow evaluation oracle.

#[allow(dead_code)]
pub mod slow_eval;

use std::sync::OnceLock;

use sedge::dataset::Dataset;
use sedge::eval::{corpus_to_dataset, synth_corpus};
use sedge::forest::{train_forest, Forest, ForestParams};
use sedge::prelude::*;

// not every test binary touches every field
#[allow(dead_code)]
pub struct Fixture {
    pub forest: Forest,
    pub train_set: Dataset,
    pub test_set: Dataset,
}

static FIXTURE: OnceLock<Fixture> = OnceLock::new();

#[allow(dead_code)]
pub fn fixture() -> &'static Fixture {
    FIXTURE.get_or_init(|| {
        let train_set = corpus_to_dataset(synth_corpus(1, 12, 96));
        let test_set = corpus_to_dataset(synth_corpus(900, 6, 96));
        let params = ForestParams {
            n_patches: 4_000,
            ..ForestParams::default()
        };
        let (forest, _) = train_forest(&train_set, &params, &ChannelParams::default())
            .expect("fixture forest trains");
        Fixture {
            forest,
            train_set,
            test_set,
        }
    })
}
