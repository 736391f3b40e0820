//! End-to-end recognition over the synthetic corpus: rasterized noisy words
//! recovered, modeled and classified against pipeline-processed templates.

use inktrace_core::batch;
use inktrace_core::config::PipelineConfig;
use inktrace_core::matcher::{classify_opt, TemplateStore};
use inktrace_core::pipeline;
use inktrace_core::synth::{derive_seed, gen_word, rasterize, vocabulary, SynthConfig};

fn build_store(cfg: &PipelineConfig, n_labels: usize) -> TemplateStore {
    let mut store = TemplateStore::new();
    for (idx, label) in vocabulary::LABELS[..n_labels].iter().enumerate() {
        let synth = SynthConfig {
            noise_sigma: 0.0,
            seed: 0,
            ..cfg.synth_with_seed()
        };
        let truth = gen_word(&vocabulary::canonical_model(idx), label, &synth).unwrap();
        let raster = rasterize(&truth.trajectory, &synth);
        let trace = pipeline::recover_binary(&raster, cfg).unwrap();
        let (rs, fit) = pipeline::model_trace(&trace, cfg).unwrap();
        let graph = pipeline::word_graph(&fit, &rs, cfg).unwrap();
        store.insert(*label, &graph);
    }
    store
}

#[derive(Debug)]
struct Outcome {
    label: String,
    predicted: String,
}

fn classify_corpus(cfg: &PipelineConfig, n_labels: usize, n_instances: usize) -> Vec<Outcome> {
    let store = build_store(cfg, n_labels);
    let work: Vec<(usize, usize)> = (0..n_labels)
        .flat_map(|l| (0..n_instances).map(move |i| (l, i)))
        .collect();
    let store_ref = &store;
    batch::map(work, None, move |(li, inst)| {
        let label = vocabulary::LABELS[li];
        let synth = SynthConfig {
            seed: derive_seed(cfg.seed, 0x11, (li * 10_000 + inst) as u64),
            ..cfg.synth_with_seed()
        };
        let truth = gen_word(&vocabulary::canonical_model(li), label, &synth).unwrap();
        let raster = rasterize(&truth.trajectory, &synth);
        let predicted = pipeline::recover_binary(&raster, cfg)
            .and_then(|trace| pipeline::model_trace(&trace, cfg))
            .and_then(|(rs, fit)| pipeline::word_graph(&fit, &rs, cfg))
            .and_then(|graph| classify_opt(&graph, store_ref, cfg.symmetrize))
            .map(|c| c.label)
            .unwrap_or_else(|_| "<error>".to_string());
        Outcome {
            label: label.to_string(),
            predicted,
        }
    })
}

#[test]
fn noiseless_instances_classify_perfectly() {
    let mut cfg = PipelineConfig::default();
    cfg.synth.noise_sigma = 0.0;
    // noiseless instances are the templates themselves
    let store = build_store(&cfg, 6);
    for (idx, label) in vocabulary::LABELS[..6].iter().enumerate() {
        let synth = SynthConfig {
            noise_sigma: 0.0,
            seed: 0,
            ..cfg.synth_with_seed()
        };
        let truth = gen_word(&vocabulary::canonical_model(idx), label, &synth).unwrap();
        let raster = rasterize(&truth.trajectory, &synth);
        let trace = pipeline::recover_binary(&raster, &cfg).unwrap();
        let (rs, fit) = pipeline::model_trace(&trace, &cfg).unwrap();
        let graph = pipeline::word_graph(&fit, &rs, &cfg).unwrap();
        let c = classify_opt(&graph, &store, false).unwrap();
        assert_eq!(&c.label, label);
        assert!(c.distance.value < 1e-9, "distance {}", c.distance.value);
    }
}

#[test]
fn noisy_recognition_accuracy_smoke() {
    // small slice of the acceptance-scale experiment
    let cfg = PipelineConfig::default();
    let outcomes = classify_corpus(&cfg, 8, 6);
    let correct = outcomes.iter().filter(|o| o.label == o.predicted).count();
    let accuracy = correct as f64 / outcomes.len() as f64;
    for o in &outcomes {
        if o.label != o.predicted {
            eprintln!("miss: {} -> {}", o.label, o.predicted);
        }
    }
    assert!(
        accuracy >= 0.9,
        "smoke accuracy {accuracy} below 0.9 ({correct}/{})",
        outcomes.len()
    );
}
