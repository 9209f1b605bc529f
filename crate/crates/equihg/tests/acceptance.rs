//! Acceptance checks for the full pipeline. One test per criterion; each
//! prints a single PASS/FAIL line with its measured value and pinned
//! tolerance (visible with --nocapture; the harness line itself doubles as
//! the pass/fail record).

use equihg::chemio::{parse_smiles, read_sdf_file, split_dataset, DatasetRecord, Molecule};
use equihg::geo::{apply_rigid, atom_features, random_rotation, GeoEncoder};
use equihg::hypergraph::{
    build_hypergraph, build_radius_graph, from_bipartite, perceive_conjugation, to_bipartite,
    Hypergraph,
};
use equihg::model::{Model, ModelConfig, ModelKind};
use equihg::nn::ParamSet;
use equihg::tensor::{grad_check, Tape, TensorId};
use equihg::trainer::{evaluate, fit_normalizer, train, TrainConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// First `n` bundled molecules (all have 3D coordinates, <= 29 atoms).
fn corpus(n: usize) -> Vec<Molecule> {
    let mols = read_sdf_file(&data_dir().join("molecules.sdf")).expect("bundled molecules parse");
    assert!(mols.len() >= n, "bundled set has only {}", mols.len());
    mols.into_iter().take(n).collect()
}

fn records(n: usize) -> Vec<DatasetRecord> {
    let loaded = equihg::chemio::load_dataset(
        &data_dir().join("molecules.sdf"),
        &data_dir().join("targets.csv"),
        &["gap".to_string()],
    )
    .expect("bundled dataset loads");
    assert_eq!(loaded.unmatched_molecules, 0);
    let mut records = loaded.records;
    records.truncate(n);
    assert_eq!(records.len(), n);
    records
}

fn report(name: &str, pass: bool, detail: &str) {
    println!(
        "acceptance: {name}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{name}: {detail}");
}

#[test]
fn rigid_motion_invariance_of_predictions() {
    let tol = 1e-5;
    let mols = corpus(100);
    let model = Model::new(ModelConfig {
        hidden: 32,
        seed: 41,
        ..ModelConfig::default()
    })
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut worst = 0.0f64;
    for mol in &mols {
        let y0 = model.predict(std::slice::from_ref(mol)).unwrap()[0];
        for _ in 0..10 {
            let rot = random_rotation(&mut rng);
            let t = [
                rng.gen_range(-10.0..10.0),
                rng.gen_range(-10.0..10.0),
                rng.gen_range(-10.0..10.0),
            ];
            let mut moved = mol.clone();
            moved.coords = Some(apply_rigid(mol.coords.as_ref().unwrap(), &rot, t));
            let y1 = model.predict(&[moved]).unwrap()[0];
            worst = worst.max((y1 - y0).abs());
        }
    }
    report(
        "rigid-motion invariance (100 molecules x 10 motions)",
        worst <= tol,
        &format!("max |delta| {worst:.3e}, tolerance {tol:.0e}"),
    );
}

#[test]
fn atom_relabeling_invariance_of_predictions() {
    let tol = 1e-10;
    let mols = corpus(100);
    let mut rng = ChaCha8Rng::seed_from_u64(1002);
    let mut worst = 0.0f64;
    for kind in [ModelKind::EquiHgnn, ModelKind::Mhnn, ModelKind::Gin] {
        let model = Model::new(ModelConfig {
            kind,
            hidden: 32,
            seed: 42,
            ..ModelConfig::default()
        })
        .unwrap();
        for mol in &mols {
            let y0 = model.predict(std::slice::from_ref(mol)).unwrap()[0];
            for _ in 0..10 {
                let mut perm: Vec<usize> = (0..mol.n_atoms()).collect();
                perm.shuffle(&mut rng);
                let y1 = model.predict(&[mol.permuted(&perm)]).unwrap()[0];
                worst = worst.max((y1 - y0).abs());
            }
        }
    }
    report(
        "atom-relabeling invariance (3 model kinds)",
        worst <= tol,
        &format!("max |delta| {worst:.3e}, tolerance {tol:.0e}"),
    );
}

#[test]
fn coordinate_stream_equivariance_of_encoder() {
    let tol = 1e-5;
    let mols = corpus(100);
    let mut params = ParamSet::new();
    let mut init_rng = ChaCha8Rng::seed_from_u64(43);
    let enc = GeoEncoder::init(&mut params, &mut init_rng, "geo", 32, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(1003);
    let mut worst = 0.0f64;

    let run = |mol: &Molecule, coords: &[[f64; 3]]| -> Vec<f64> {
        let graph = build_radius_graph(coords, 5.0, 16).unwrap();
        let mut tape = Tape::new();
        let leaves = params.import_all(&mut tape);
        let feats = tape.constant(atom_features(mol));
        let flat: Vec<f64> = coords.iter().flat_map(|c| c.iter().copied()).collect();
        let x = tape.constant(equihg::tensor::Tensor::matrix(coords.len(), 3, flat));
        let (_h, x_out) = enc.forward(&mut tape, &leaves, feats, x, &graph);
        tape.data(x_out).to_vec()
    };

    for mol in &mols {
        let coords = mol.coords.as_ref().unwrap();
        let base = run(mol, coords);
        for _ in 0..3 {
            let rot = random_rotation(&mut rng);
            let t = [
                rng.gen_range(-10.0..10.0),
                rng.gen_range(-10.0..10.0),
                rng.gen_range(-10.0..10.0),
            ];
            let moved = run(mol, &apply_rigid(coords, &rot, t));
            // expected: the rigid motion applied to the base output
            let base_pts: Vec<[f64; 3]> = base.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
            let expect = apply_rigid(&base_pts, &rot, t);
            for (i, p) in expect.iter().enumerate() {
                for k in 0..3 {
                    worst = worst.max((moved[3 * i + k] - p[k]).abs());
                }
            }
        }
    }
    report(
        "coordinate-stream equivariance of the geometric encoder",
        worst <= tol,
        &format!("max coordinate deviation {worst:.3e}, tolerance {tol:.0e}"),
    );
}

#[test]
fn full_parameter_gradient_check() {
    let tol = 1e-5;
    let mols = corpus(100);
    let mol = mols.iter().min_by_key(|m| m.n_atoms()).unwrap();
    assert!(mol.n_atoms() <= 10, "smallest molecule too large");
    let model = Model::new(ModelConfig {
        hidden: 16,
        seed: 44,
        ..ModelConfig::default()
    })
    .unwrap();
    let prepared = model.prepare(mol).unwrap();
    let mut worst = 0.0f64;
    let mut scalars = 0usize;
    for id in model.params.ids() {
        let f = |tape: &mut Tape, point: TensorId| {
            let leaves = model.params.import_with_override(tape, id, point);
            let y = model.forward_batch(tape, &leaves, &[&prepared]);
            tape.sum_all(y)
        };
        let err = grad_check(f, model.params.tensor(id), 1e-5).unwrap();
        worst = worst.max(err);
        scalars += model.params.tensor(id).numel();
    }
    report(
        "finite-difference gradient check over the full parameter vector",
        worst <= tol,
        &format!(
            "{scalars} scalars on a {}-atom molecule, max rel err {worst:.3e}, tolerance {tol:.0e}",
            mol.n_atoms()
        ),
    );
}

#[derive(serde::Deserialize)]
struct CorpusEntry {
    smiles: String,
    num_atoms_with_h: usize,
    bonds: Vec<(usize, usize, bool)>,
    hyperedges: Vec<Vec<usize>>,
}

#[test]
fn conjugation_matches_the_golden_corpus() {
    let text = std::fs::read_to_string(data_dir().join("conjugation_corpus.json")).unwrap();
    let entries: Vec<CorpusEntry> = serde_json::from_str(&text).unwrap();
    assert_eq!(entries.len(), 50);
    let mut checked_bonds = 0;
    for e in &entries {
        let mol = perceive_conjugation(parse_smiles(&e.smiles).unwrap());
        assert_eq!(mol.n_atoms(), e.num_atoms_with_h, "{}: atom count", e.smiles);
        let got: BTreeMap<(usize, usize), bool> = mol
            .bonds
            .iter()
            .map(|b| ((b.a.min(b.b), b.a.max(b.b)), b.conjugated))
            .collect();
        let want: BTreeMap<(usize, usize), bool> =
            e.bonds.iter().map(|&(a, b, c)| ((a, b), c)).collect();
        assert_eq!(got, want, "{}: per-bond conjugation flags", e.smiles);
        checked_bonds += got.len();
        let hg = build_hypergraph(&mol);
        assert_eq!(hg.hyperedges, e.hyperedges, "{}: hyperedges", e.smiles);
    }
    report(
        "conjugation and hyperedges on the 50-molecule golden corpus",
        true,
        &format!("{checked_bonds} bond flags and all hyperedge sets match exactly"),
    );
}

#[test]
fn bipartite_round_trip_on_random_hypergraphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(1006);
    for case in 0..1000 {
        let n = rng.gen_range(1..=30usize);
        let m = rng.gen_range(0..=8usize);
        let mut edges = Vec::with_capacity(m);
        for _ in 0..m {
            let size = rng.gen_range(1..=n.min(6));
            let mut pick: Vec<usize> = (0..n).collect();
            pick.shuffle(&mut rng);
            let mut members: Vec<usize> = pick[..size].to_vec();
            members.sort_unstable();
            // hyperedges are pairwise distinct by construction
            if !edges.contains(&members) {
                edges.push(members);
            }
        }
        let hg = Hypergraph::new(n, edges);
        let back = from_bipartite(&to_bipartite(&hg));
        assert_eq!(back, hg, "case {case}");
    }
    report(
        "hypergraph <-> bipartite round trip",
        true,
        "1000 random hypergraphs (<=30 vertices, <=8 hyperedges) reproduced exactly",
    );
}

/// Shared setup for the overfit and determinism checks: 80 bundled records
/// split 64/8/8, geometric model at full width, fixed seeds.
fn overfit_run(out_dir: &Path, epochs: usize) -> (Vec<DatasetRecord>, equihg::trainer::TrainOutcome) {
    let recs = records(80);
    let (train_recs, val_recs, _test) = split_dataset(recs, 7).unwrap();
    assert_eq!(train_recs.len(), 64);
    let model_cfg = ModelConfig {
        seed: 45,
        ..ModelConfig::default()
    };
    let train_cfg = TrainConfig {
        epochs,
        batch_size: 16,
        lr: 1e-4,
        seed: 9,
        eval_every: 10,
        out_dir: out_dir.to_path_buf(),
        ..TrainConfig::default()
    };
    let outcome = train(model_cfg, &train_cfg, &train_recs, &val_recs).unwrap();
    (train_recs, outcome)
}

const OVERFIT_EPOCHS: usize = 120;

#[test]
fn overfit_beats_the_constant_predictor() {
    let started = std::time::Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let (train_recs, outcome) = overfit_run(dir.path(), OVERFIT_EPOCHS);

    // Constant-predictor baseline: train-mean, scored on the train split.
    let targets: Vec<f64> = train_recs.iter().map(|r| r.targets["gap"]).collect();
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    let const_mae =
        targets.iter().map(|t| (t - mean).abs()).sum::<f64>() / targets.len() as f64;

    let model_mae = evaluate(&outcome.best_checkpoint, &train_recs, "train", None)
        .unwrap()
        .mae;
    let ratio = model_mae / const_mae;
    report(
        "overfit contract on 64 molecules",
        ratio <= 0.2,
        &format!(
            "train MAE {model_mae:.4} vs constant-predictor {const_mae:.4} (ratio {ratio:.3} <= 0.2), \
             {OVERFIT_EPOCHS} epochs in {:.0?}",
            started.elapsed()
        ),
    );
}

#[test]
fn training_is_deterministic_byte_for_byte() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let (_, out_a) = overfit_run(dir_a.path(), OVERFIT_EPOCHS);
    let (_, out_b) = overfit_run(dir_b.path(), OVERFIT_EPOCHS);
    let bytes_a = std::fs::read(&out_a.metrics_path).unwrap();
    let bytes_b = std::fs::read(&out_b.metrics_path).unwrap();
    report(
        "single-threaded training determinism",
        bytes_a == bytes_b,
        &format!(
            "two identical runs, metrics logs {} bytes each, byte-identical: {}",
            bytes_a.len(),
            bytes_a == bytes_b
        ),
    );
}

#[test]
fn trend_smoke_geometric_vs_geometry_free() {
    let recs = records(1000);
    let (train_recs, val_recs, _test) = split_dataset(recs, 11).unwrap();
    let mut maes = Vec::new();
    for kind in [ModelKind::EquiHgnn, ModelKind::Mhnn] {
        let dir = tempfile::tempdir().unwrap();
        let model_cfg = ModelConfig {
            kind,
            hidden: 64,
            seed: 46,
            ..ModelConfig::default()
        };
        let train_cfg = TrainConfig {
            epochs: 6,
            batch_size: 32,
            lr: 1e-3,
            seed: 13,
            eval_every: 2,
            out_dir: dir.path().to_path_buf(),
            ..TrainConfig::default()
        };
        let outcome = train(model_cfg, &train_cfg, &train_recs, &val_recs).unwrap();
        maes.push(outcome.best_val_mae);
    }
    let (geo, plain) = (maes[0], maes[1]);
    // Reported, not asserted: the geometric encoder is expected to help on a
    // geometry-dependent target, but short runs may not separate cleanly.
    println!(
        "acceptance: trend smoke (1000 molecules): geometric val MAE {geo:.4}, \
         geometry-free val MAE {plain:.4} -> expected ordering {}",
        if geo <= plain { "holds" } else { "DOES NOT HOLD" }
    );
    report(
        "trend smoke completes and reports finite MAEs",
        geo.is_finite() && plain.is_finite(),
        &format!("geometric {geo:.4}, geometry-free {plain:.4}"),
    );
}

#[test]
fn normalizer_baseline_sanity() {
    // Anchor for the overfit baseline: the constant predictor's MAE equals
    // the mean absolute deviation, and the fitted normalizer agrees with it.
    let recs = records(80);
    let norm = fit_normalizer(&recs, "gap").unwrap();
    let targets: Vec<f64> = recs.iter().map(|r| r.targets["gap"]).collect();
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    assert!((norm.mean - mean).abs() <= 1e-12);
    assert!(norm.std > 0.0);
    report(
        "target statistics sanity on the bundled dataset",
        true,
        &format!("mean {:.4}, std {:.4} over 80 records", norm.mean, norm.std),
    );
}
