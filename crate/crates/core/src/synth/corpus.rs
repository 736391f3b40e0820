//! On-disk corpus builder: template store, labeled noisy word instances,
//! and optional synthetic envelopes. Every file is a pure function of the
//! configuration, so a rebuild with the same seed is byte-identical.
//!
//! Layout:
//!
//! ```text
//! out/
//!   store/<label>/template.model.json   templates (noiseless, full pipeline)
//!   store/labels.manifest               label <TAB> count
//!   corpus/<label>/<idx>.pgm            noisy instance rasters
//!   corpus/<label>/<idx>.trace          ground-truth trajectories
//!   corpus/<label>/<idx>.model.json     ground-truth models
//!   corpus/truth.manifest               relpath <TAB> label <TAB> seed
//!   envelopes/<idx>.pbm                 envelope rasters (when requested)
//!   envelopes/<idx>.truth               ground-truth layout records
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use super::{derive_seed, gen_envelope, gen_word, rasterize, vocabulary, GroundTruth};
use crate::batch;
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::imaging::pnm;
use crate::pipeline;
use crate::recovery::save_trace;

/// What a corpus build produced.
#[derive(Debug, Clone)]
pub struct CorpusSummary {
    pub labels: Vec<String>,
    pub instances: usize,
    pub envelopes: usize,
    pub store_dir: PathBuf,
    pub corpus_dir: PathBuf,
    pub template_fit_warnings: usize,
}

/// Seed stream tags; distinct per purpose so items never share a stream.
const STREAM_INSTANCE: u64 = 0x11;
const STREAM_ENVELOPE: u64 = 0x22;
const STREAM_ENVELOPE_WORD: u64 = 0x33;

/// Build the template store and instance corpus under `out`.
///
/// Templates are the canonical vocabulary words rendered without noise and
/// pushed through the full recovery-and-fit pipeline, so instances and
/// templates see identical processing.
pub fn build_corpus(out: &Path, cfg: &PipelineConfig) -> Result<CorpusSummary> {
    let synth = cfg.synth_with_seed();
    synth.validate()?;
    let store_dir = out.join("store");
    let corpus_dir = out.join("corpus");
    fs::create_dir_all(&store_dir)?;
    fs::create_dir_all(&corpus_dir)?;

    let labels: Vec<String> = vocabulary::LABELS[..synth.n_templates]
        .iter()
        .map(|s| s.to_string())
        .collect();

    // templates: noiseless instances through the full pipeline
    let jobs = if cfg.jobs == 0 { None } else { Some(cfg.jobs) };
    let template_work: Vec<(usize, String)> = labels.iter().cloned().enumerate().collect();
    let cfg_ref = cfg;
    let template_results: Vec<Result<(String, String, usize)>> =
        batch::map(template_work, jobs, move |(idx, label)| {
            let model = vocabulary::canonical_model(idx);
            let noiseless = super::SynthConfig {
                noise_sigma: 0.0,
                seed: 0,
                ..cfg_ref.synth_with_seed()
            };
            let truth = gen_word(&model, &label, &noiseless)?;
            let raster = rasterize(&truth.trajectory, &noiseless);
            let trace = pipeline::recover_binary(&raster, cfg_ref)?;
            let (_, fit) = pipeline::model_trace(&trace, cfg_ref)?;
            let warnings = fit.beta_failures + fit.ellipse_fallbacks;
            Ok((label, fit.model.to_json()?, warnings))
        });

    let mut template_fit_warnings = 0usize;
    for res in template_results {
        let (label, json, warnings) = res?;
        template_fit_warnings += warnings;
        let dir = store_dir.join(&label);
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("template.model.json"), json)?;
    }
    // labels.manifest: one template per label
    let mut manifest = String::new();
    for label in &labels {
        manifest.push_str(&format!("{label}\t1\n"));
    }
    fs::write(store_dir.join("labels.manifest"), manifest)?;

    // noisy instances
    let mut instance_work: Vec<(usize, usize)> = Vec::new();
    for (li, _) in labels.iter().enumerate() {
        for inst in 0..synth.n_instances {
            instance_work.push((li, inst));
        }
    }
    let labels_ref = &labels;
    let synth_ref = &synth;
    let corpus_dir_ref = &corpus_dir;
    let instance_results: Vec<Result<(String, u64)>> =
        batch::map(instance_work, jobs, move |(li, inst)| {
            let label = &labels_ref[li];
            let seed = derive_seed(synth_ref.seed, STREAM_INSTANCE, (li * 10_000 + inst) as u64);
            let item_cfg = super::SynthConfig {
                seed,
                ..synth_ref.clone()
            };
            let truth = gen_word(&vocabulary::canonical_model(li), label, &item_cfg)?;
            let raster = rasterize(&truth.trajectory, &item_cfg);
            let dir = corpus_dir_for(corpus_dir_ref, label);
            fs::create_dir_all(&dir)?;
            pnm::save_pgm(&raster.to_gray(item_cfg.resolution), &dir.join(format!("{inst}.pgm")))?;
            save_trace(&truth.trajectory, &dir.join(format!("{inst}.trace")))?;
            truth.model.save(&dir.join(format!("{inst}.model.json")))?;
            Ok((format!("{label}/{inst}.pgm\t{label}\t{seed}\n"), seed))
        });
    let mut truth_manifest = String::new();
    let mut instances = 0usize;
    for res in instance_results {
        truth_manifest.push_str(&res?.0);
        instances += 1;
    }
    fs::write(corpus_dir.join("truth.manifest"), truth_manifest)?;

    // envelopes
    let mut envelopes = 0usize;
    if synth.n_envelopes > 0 {
        let env_dir = out.join("envelopes");
        fs::create_dir_all(&env_dir)?;
        let words: Vec<GroundTruth> = (0..8.min(labels.len()))
            .map(|i| {
                let item_cfg = super::SynthConfig {
                    seed: derive_seed(synth.seed, STREAM_ENVELOPE_WORD, i as u64),
                    ..synth.clone()
                };
                gen_word(&vocabulary::canonical_model(i), &labels[i], &item_cfg)
            })
            .collect::<Result<_>>()?;
        let env_work: Vec<usize> = (0..synth.n_envelopes).collect();
        let words_ref = &words;
        let synth_ref = &synth;
        let env_dir_ref = &env_dir;
        let env_results: Vec<Result<()>> = batch::map(env_work, jobs, move |idx| {
            let item_cfg = super::SynthConfig {
                seed: derive_seed(synth_ref.seed, STREAM_ENVELOPE, idx as u64),
                ..synth_ref.clone()
            };
            let (img, layout) = gen_envelope(words_ref, &item_cfg)?;
            pnm::save_pbm(&img, &env_dir_ref.join(format!("{idx}.pbm")))?;
            let mut truth = String::new();
            for (r, kind) in &layout {
                truth.push_str(&format!("{kind} {} {} {} {}\n", r.x0, r.y0, r.x1, r.y1));
            }
            fs::write(env_dir_ref.join(format!("{idx}.truth")), truth)?;
            Ok(())
        });
        for res in env_results {
            res?;
        }
        envelopes = synth.n_envelopes;
    }

    Ok(CorpusSummary {
        labels,
        instances,
        envelopes,
        store_dir,
        corpus_dir,
        template_fit_warnings,
    })
}

fn corpus_dir_for(base: &Path, label: &str) -> PathBuf {
    base.join(label)
}

/// Parse `truth.manifest`: `(relative path, label, seed)` records.
pub fn read_truth_manifest(corpus_dir: &Path) -> Result<Vec<(PathBuf, String, u64)>> {
    let text = fs::read_to_string(corpus_dir.join("truth.manifest"))?;
    let mut out = Vec::new();
    for line in text.lines() {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::Parse(format!("bad manifest line: {line:?}")));
        }
        let seed: u64 = fields[2]
            .parse()
            .map_err(|_| Error::Parse(format!("bad seed in manifest: {line:?}")))?;
        out.push((PathBuf::from(fields[0]), fields[1].to_string(), seed));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> PipelineConfig {
        let mut cfg = PipelineConfig::default();
        cfg.synth.n_templates = 3;
        cfg.synth.n_instances = 2;
        cfg.synth.n_envelopes = 1;
        cfg
    }

    #[test]
    fn corpus_layout_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config();
        let summary = build_corpus(dir.path(), &cfg).unwrap();
        assert_eq!(summary.labels.len(), 3);
        assert_eq!(summary.instances, 6);
        assert_eq!(summary.envelopes, 1);
        assert!(dir.path().join("store/ariana/template.model.json").exists());
        assert!(dir.path().join("store/labels.manifest").exists());
        assert!(dir.path().join("corpus/ariana/0.pgm").exists());
        assert!(dir.path().join("corpus/ariana/0.trace").exists());
        assert!(dir.path().join("corpus/ariana/0.model.json").exists());
        assert!(dir.path().join("corpus/truth.manifest").exists());
        assert!(dir.path().join("envelopes/0.pbm").exists());
        assert!(dir.path().join("envelopes/0.truth").exists());
        let manifest = read_truth_manifest(&dir.path().join("corpus")).unwrap();
        assert_eq!(manifest.len(), 6);
    }

    #[test]
    fn rebuild_is_byte_identical() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let cfg = small_config();
        build_corpus(d1.path(), &cfg).unwrap();
        build_corpus(d2.path(), &cfg).unwrap();
        let mut files = Vec::new();
        fn walk(dir: &Path, base: &Path, files: &mut Vec<PathBuf>) {
            for entry in fs::read_dir(dir).unwrap() {
                let p = entry.unwrap().path();
                if p.is_dir() {
                    walk(&p, base, files);
                } else {
                    files.push(p.strip_prefix(base).unwrap().to_path_buf());
                }
            }
        }
        walk(d1.path(), d1.path(), &mut files);
        files.sort();
        assert!(!files.is_empty());
        for rel in files {
            let a = fs::read(d1.path().join(&rel)).unwrap();
            let b = fs::read(d2.path().join(&rel)).unwrap();
            assert_eq!(a, b, "{} differs between rebuilds", rel.display());
        }
    }
}
