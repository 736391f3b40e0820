//! End-to-end stage glue: image to trace, trace to model, model to
//! trajectory graph. The command-line front end and the corpus builder both
//! run through these functions so every consumer sees the same pipeline.

use crate::beta_elliptic::{fit_word, WordFit};
use crate::config::PipelineConfig;
use crate::error::Result;
use crate::imaging::{binarize, denoise, remove_diacritics, skeletonize, BinaryImage, GrayImage};
use crate::matcher::{MiddlePointSource, TrajectoryGraph};
use crate::recovery::{order_segments, resample, OrderedTrace, ResampledTrace};
use crate::skeleton_graph::{classify_pixels, classify_segment_types, extract_segments};

/// Word image to recovered trajectory: denoise, strip diacritics, thin,
/// build the segment graph, and order it.
pub fn recover_binary(img: &BinaryImage, cfg: &PipelineConfig) -> Result<OrderedTrace> {
    let clean = remove_diacritics(&denoise(img), cfg.diacritic_ratio);
    let sk = skeletonize(&clean);
    let pts = classify_pixels(&sk);
    let graph = classify_segment_types(extract_segments(&sk, &pts)?);
    Ok(order_segments(&graph, &cfg.recovery))
}

pub fn recover_gray(img: &GrayImage, cfg: &PipelineConfig) -> Result<OrderedTrace> {
    recover_binary(&binarize(img, cfg.binarize())?, cfg)
}

/// Recovered trace to fitted stroke model, via curvature-aware resampling.
pub fn model_trace(tr: &OrderedTrace, cfg: &PipelineConfig) -> Result<(ResampledTrace, WordFit)> {
    let rs = resample(tr, &cfg.recovery);
    let fit = fit_word(&rs, &cfg.fit)?;
    Ok((rs, fit))
}

/// Trajectory graph of a fitted word, honoring the middle-point source.
pub fn word_graph(
    fit: &WordFit,
    rs: &ResampledTrace,
    cfg: &PipelineConfig,
) -> Result<TrajectoryGraph> {
    match cfg.middle_points {
        MiddlePointSource::ArcMidpoint => {
            TrajectoryGraph::from_model(&fit.model, MiddlePointSource::ArcMidpoint)
        }
        MiddlePointSource::RawSpan => TrajectoryGraph::from_trace_spans(rs, &fit.spans),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::dtw_mean_error_bidirectional;
    use crate::synth::{derive_seed, gen_word, rasterize, vocabulary, SynthConfig};

    #[test]
    fn round_trip_word_recovery_stays_near_truth() {
        let cfg = PipelineConfig::default();
        let mut failures = Vec::new();
        let n_words = 12;
        for i in 0..n_words {
            let model = vocabulary::canonical_model(i % 20);
            let synth = SynthConfig {
                seed: derive_seed(42, 0xAA, i as u64),
                noise_sigma: 0.0,
                ..Default::default()
            };
            let truth = gen_word(&model, vocabulary::LABELS[i % 20], &synth).unwrap();
            let raster = rasterize(&truth.trajectory, &synth);
            let recovered = recover_binary(&raster, &cfg).unwrap();
            let err = dtw_mean_error_bidirectional(&recovered.points, &truth.trajectory.points);
            if err > synth.stroke_width as f64 {
                failures.push((i, err));
            }
        }
        assert!(
            failures.len() <= n_words / 10,
            "too many round-trip failures: {failures:?}"
        );
    }

    #[test]
    fn model_trace_produces_strokes_and_graph() {
        let cfg = PipelineConfig::default();
        let model = vocabulary::canonical_model(4);
        let synth = SynthConfig {
            noise_sigma: 0.0,
            ..Default::default()
        };
        let truth = gen_word(&model, "gafsa", &synth).unwrap();
        let raster = rasterize(&truth.trajectory, &synth);
        let recovered = recover_binary(&raster, &cfg).unwrap();
        let (rs, fit) = model_trace(&recovered, &cfg).unwrap();
        assert!(!fit.model.strokes.is_empty());
        let graph = word_graph(&fit, &rs, &cfg).unwrap();
        assert_eq!(graph.len(), fit.model.strokes.len());
    }
}
