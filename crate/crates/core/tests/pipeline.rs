use std::path::Path;

use plotgrid::features::{
    load_embeddings, Embedder, EmbeddingKind, EmbeddingRecord, EmbeddingShard, FeatureExtractor,
    ToyExtractor,
};
use plotgrid::pipeline::{
    embed_stage, make_collage_dataset, preprocess_stage, run_pipeline, CollageSpec, EmbedParams,
    ExtractorChoice, PipelineConfig, PreprocessParams, StageStatus,
};
use plotgrid::preprocess::{load_images, ProcessedImage};

fn small_spec() -> CollageSpec {
    CollageSpec {
        num_species: 4,
        images_per_species: 6,
        plots: 4,
        grid_n: 2,
        species_per_plot: 2,
        seed: 11,
    }
}

fn config(root: &Path, work: &str) -> PipelineConfig {
    let text = format!(
        "[paths]\ntrain_images = \"train\"\nplots = \"plots\"\ntruth = \"truth.csv\"\nwork_dir = \"{work}\"\n\
         [preprocess]\nmin_count = 1\n[train]\nepochs = 5\n[infer]\ngrid_n = 2\n"
    );
    let mut cfg = PipelineConfig::from_toml(&text).unwrap();
    cfg.resolve_paths(root);
    cfg
}

/// Writes the toy extractor's raw tokens as a kind-2 shard, as an external
/// extractor would.
fn write_raw_token_shard(images: &Path, out: &Path, seed: u64) -> Vec<ProcessedImage> {
    let extractor = ToyExtractor::new(seed);
    let processed: Vec<ProcessedImage> = load_images(images)
        .unwrap()
        .into_iter()
        .take(3)
        .map(|r| ProcessedImage::from_record(r, 128).unwrap())
        .collect();
    let records = processed
        .iter()
        .map(|img| {
            let tokens = extractor.extract(img).unwrap();
            let raw: Vec<f32> = tokens.tokens().iter().map(|&v| v as f32).collect();
            EmbeddingRecord::new(img.image_id(), img.species(), EmbeddingKind::RawTokens, raw)
                .unwrap()
        })
        .collect();
    std::fs::create_dir_all(out).unwrap();
    EmbeddingShard {
        kind: EmbeddingKind::RawTokens,
        records,
    }
    .write(&out.join("raw.emb1"))
    .unwrap();
    processed
}

#[test]
fn raw_token_shards_reduce_to_dct64() {
    let dir = tempfile::tempdir().unwrap();
    let paths = make_collage_dataset(&small_spec(), dir.path()).unwrap();
    let images = dir.path().join("images");
    preprocess_stage(
        &paths.train,
        &images,
        &PreprocessParams {
            min_count: 1,
            ..Default::default()
        },
    )
    .unwrap();
    let raw_dir = dir.path().join("raw");
    let processed = write_raw_token_shard(&images, &raw_dir, 5);

    let out = dir.path().join("emb");
    let params = EmbedParams {
        kind: EmbeddingKind::Dct64,
        extractor: ExtractorChoice::External,
        seed: 0,
    };
    let summary = embed_stage(&raw_dir, &out, &params).unwrap();
    assert_eq!(summary.records, 3);
    let shard = load_embeddings(&out.join("raw.emb1")).unwrap();
    assert_eq!(shard.kind, EmbeddingKind::Dct64);

    let embedder = Embedder::new(EmbeddingKind::Dct64).unwrap();
    let extractor = ToyExtractor::new(5);
    for (rec, img) in shard.records.iter().zip(&processed) {
        assert_eq!(rec.image_id, img.image_id());
        assert_eq!(rec.species, img.species());
        let direct = embedder.embed_image(&extractor, img).unwrap().vector;
        for (a, b) in rec.vector.iter().zip(&direct) {
            assert!((a - b).abs() <= 1e-3 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    // Raw tokens cannot become CLS vectors.
    let cls = EmbedParams {
        kind: EmbeddingKind::Cls768,
        ..params
    };
    assert!(embed_stage(&raw_dir, &dir.path().join("emb2"), &cls).is_err());
    assert!(!dir.path().join("emb2").exists());
}

#[test]
fn external_pipeline_stops_after_train() {
    let dir = tempfile::tempdir().unwrap();
    let paths = make_collage_dataset(&small_spec(), dir.path()).unwrap();
    // Produce matching cls768 shards with the toy embedder, standing in for
    // an external extractor.
    let ext = dir.path().join("ext");
    let pre = dir.path().join("pre");
    preprocess_stage(
        &paths.train,
        &pre,
        &PreprocessParams {
            min_count: 1,
            ..Default::default()
        },
    )
    .unwrap();
    embed_stage(&pre, &ext, &EmbedParams::default()).unwrap();

    let mut cfg = config(dir.path(), "work");
    cfg.embed.extractor = ExtractorChoice::External;
    cfg.paths.external_embeddings = Some(ext);
    let outcome = run_pipeline(&cfg).unwrap();
    let names: Vec<_> = outcome.stages.iter().map(|(s, _)| *s).collect();
    assert_eq!(names, ["preprocess", "embed", "train"]);
    assert!(dir.path().join("work/model.lin1").exists());
    assert!(outcome.metrics.is_none());
}

#[test]
fn parameter_change_reruns_only_downstream() {
    let dir = tempfile::tempdir().unwrap();
    make_collage_dataset(&small_spec(), dir.path()).unwrap();
    let mut cfg = config(dir.path(), "work");
    let cold = run_pipeline(&cfg).unwrap();
    assert!(cold.stages.iter().all(|&(_, s)| s == StageStatus::Ran));

    cfg.submit.cap = 1;
    let warm = run_pipeline(&cfg).unwrap();
    for (stage, status) in &warm.stages {
        let expected = if *stage == "submit" {
            StageStatus::Ran
        } else {
            StageStatus::Skipped
        };
        assert_eq!(*status, expected, "{stage}");
    }
    assert_eq!(warm.metrics, cold.metrics);

    // A cold run with the new config produces the same artifacts.
    let mut fresh = cfg.clone();
    fresh.paths.work_dir = dir.path().join("fresh");
    run_pipeline(&fresh).unwrap();
    for name in [
        "model.lin1",
        "predictions.jsonl",
        "report.json",
        "submission.csv",
    ] {
        assert_eq!(
            std::fs::read(cfg.paths.work_dir.join(name)).unwrap(),
            std::fs::read(fresh.paths.work_dir.join(name)).unwrap(),
            "{name}"
        );
    }
    let sub = std::fs::read_to_string(cfg.paths.work_dir.join("submission.csv")).unwrap();
    assert!(sub.lines().skip(1).all(|l| !l.contains(',')), "{sub}");
}

#[test]
fn worker_count_does_not_change_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    make_collage_dataset(&small_spec(), dir.path()).unwrap();
    let mut one = config(dir.path(), "one");
    one.workers = Some(1);
    let mut four = config(dir.path(), "four");
    four.workers = Some(4);
    run_pipeline(&one).unwrap();
    run_pipeline(&four).unwrap();
    for name in ["model.lin1", "predictions.jsonl", "submission.csv"] {
        assert_eq!(
            std::fs::read(one.paths.work_dir.join(name)).unwrap(),
            std::fs::read(four.paths.work_dir.join(name)).unwrap(),
            "{name}"
        );
    }
}
