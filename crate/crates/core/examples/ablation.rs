//! Runs the three pipeline variants over the synthetic presets and prints
//! one table per scenario.
//!
//! Usage: `cargo run --release --example ablation -- [seeds] [gamma]`

use std::collections::BTreeMap;

use mfl_core::evaluate::{format_table, run_ablation, LabeledRecord};
use mfl_core::{synth, Method, Pipeline, PipelineConfig};

fn main() -> mfl_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().map_or(50, |s| s.parse().expect("seed count"));
    let mut config = PipelineConfig::default();
    if let Some(g) = args.next() {
        config.adaptive.gamma = g.parse().expect("gamma");
    }
    let pipeline = Pipeline::new(config);

    let mut dataset = Vec::new();
    for name in synth::SCENARIOS {
        for seed in 0..seeds {
            let spec = synth::scenario_spec(name, seed).expect("known scenario");
            let (record, truths) = synth::generate(&spec)?;
            dataset.push(LabeledRecord {
                scenario: name.to_string(),
                record,
                truths,
            });
        }
    }

    let mut reports = BTreeMap::new();
    for method in Method::ALL {
        reports.insert(method, run_ablation(&pipeline, &dataset, method)?);
    }
    for name in synth::SCENARIOS {
        let columns: Vec<_> = Method::ALL
            .iter()
            .map(|m| (m.to_string(), reports[m].per_scenario[name].counts))
            .collect();
        println!("{}", format_table(name, &columns));
    }
    Ok(())
}
