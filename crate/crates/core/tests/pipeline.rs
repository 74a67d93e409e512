mod common;

use catcouple::coupling::build_all;
use catcouple::dataset::{read_csv, synth_generate, SynthSpec};
use catcouple::eval::{f_score, kmeans};
use catcouple::kernel::default_bank;
use catcouple::model::Model;
use catcouple::solver::{fit, FitConfig, Mode};
use catcouple::Exec;
use common::*;

fn synth() -> catcouple::dataset::CategoricalDataset {
    synth_generate(&SynthSpec {
        n_o: 200,
        n_a: 6,
        n_mv: 3,
        n_clusters: 3,
        separation: 0.85,
        seed: 3,
    })
    .unwrap()
}

#[test]
fn policies_agree_bitwise() {
    let ds = synth();
    for mode in [Mode::Stochastic, Mode::Full] {
        let base = FitConfig {
            n_clusters: 3,
            mode,
            seed: 11,
            max_iterations: 50,
            keep_similarity: true,
            ..FitConfig::default()
        };
        let seq = fit(&ds, &default_bank(), &FitConfig { exec: Exec::Sequential, ..base.clone() }).unwrap();
        let par = fit(&ds, &default_bank(), &FitConfig { exec: Exec::Parallel, ..base }).unwrap();
        assert_eq!(seq.params, par.params);
        assert_eq!(seq.trace, par.trace);
        assert_eq!(seq.representation.embedding, par.representation.embedding);
        assert_eq!(seq.representation.similarity, par.representation.similarity);
    }
}

#[test]
fn seeds_drive_stochastic_runs() {
    let ds = synth();
    let cfg = |seed| FitConfig {
        n_clusters: 3,
        seed,
        max_iterations: 30,
        ..FitConfig::default()
    };
    let a = fit(&ds, &default_bank(), &cfg(1)).unwrap();
    let b = fit(&ds, &default_bank(), &cfg(1)).unwrap();
    let c = fit(&ds, &default_bank(), &cfg(2)).unwrap();
    assert_eq!(a.params, b.params);
    assert_ne!(a.params, c.params);
}

#[test]
fn labels_do_not_reach_learning() {
    let ds = synth();
    let cfg = FitConfig {
        n_clusters: 3,
        max_iterations: 40,
        ..FitConfig::default()
    };
    let with = fit(&ds, &default_bank(), &cfg).unwrap();
    let without = fit(&ds.without_labels(), &default_bank(), &cfg).unwrap();
    assert_eq!(with.representation.embedding, without.representation.embedding);
}

#[test]
fn saved_model_embeds_new_rows() {
    let ds = toy();
    let cfg = FitConfig {
        max_iterations: 100,
        ..FitConfig::default()
    };
    let out = fit(&ds, &default_bank(), &cfg).unwrap();
    let model = Model::new(cfg.echo(), &ds, &default_bank(), build_all(&ds.without_labels(), Exec::Parallel), &out.params);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.model.gz");
    model.save(&path).unwrap();
    let back = Model::load(&path).unwrap();

    let rows = read_csv("Texture,Color,RootShape\nblurry,green,curled\nclear,white,straight\n".as_bytes(), true, None).unwrap();
    let x = back.transform(&rows, Exec::Parallel).unwrap();
    let full = &out.representation.embedding;
    assert_eq!(x.row(0), full.row(4));
    assert_eq!(x.row(1), full.row(0));
}

#[test]
fn separable_synth_is_recovered() {
    let ds = synth_generate(&SynthSpec {
        n_o: 300,
        n_a: 8,
        n_mv: 3,
        n_clusters: 3,
        separation: 1.0,
        seed: 5,
    })
    .unwrap();
    let out = fit(&ds, &default_bank(), &FitConfig { n_clusters: 3, ..FitConfig::default() }).unwrap();
    let a = kmeans(&out.representation.embedding, 3, 0, 1, Exec::Parallel).unwrap();
    assert_eq!(f_score(&a.labels, &ds.label_ids().unwrap()).unwrap(), 1.0);
}
