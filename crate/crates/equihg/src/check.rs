//! Property checks exposed on the command line: rigid-motion invariance,
//! relabeling invariance, and finite-difference gradient verification.
//! Each runs against a freshly seeded random model, so they test the
//! architecture rather than any trained weights.

use crate::chemio::Molecule;
use crate::error::{Error, Result};
use crate::geo::{apply_rigid, random_rotation};
use crate::model::{Model, ModelConfig, ModelKind};
use crate::tensor::{grad_check, Tape, TensorId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EQUIVARIANCE_TOL: f64 = 1e-5;
pub const PERMUTATION_TOL: f64 = 1e-10;
pub const GRADCHECK_TOL: f64 = 1e-5;

/// At most this many molecules are sampled from the input set.
const SAMPLE: usize = 20;
const TRANSFORMS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    Equivariance,
    Permutation,
    Gradcheck,
}

impl CheckKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckKind::Equivariance => "equivariance",
            CheckKind::Permutation => "permutation",
            CheckKind::Gradcheck => "gradcheck",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub kind: CheckKind,
    pub max_deviation: f64,
    pub tolerance: f64,
    /// Individual comparisons performed (transform applications or
    /// parameter tensors).
    pub cases: usize,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.max_deviation <= self.tolerance
    }
}

pub fn run_check(
    kind: CheckKind,
    model_kind: ModelKind,
    mols: &[Molecule],
    seed: u64,
) -> Result<CheckReport> {
    if mols.is_empty() {
        return Err(Error::Data("no molecules to check".into()));
    }
    match kind {
        CheckKind::Equivariance => check_equivariance(model_kind, mols, seed),
        CheckKind::Permutation => check_permutation(model_kind, mols, seed),
        CheckKind::Gradcheck => check_gradcheck(model_kind, mols, seed),
    }
}

fn check_model(model_kind: ModelKind, hidden: usize, seed: u64) -> Result<Model> {
    Model::new(ModelConfig {
        kind: model_kind,
        hidden,
        seed,
        ..ModelConfig::default()
    })
}

/// |pred(g . x) - pred(x)| over random rotations+translations. Geometry-free
/// kinds hold trivially but are still exercised end to end.
fn check_equivariance(model_kind: ModelKind, mols: &[Molecule], seed: u64) -> Result<CheckReport> {
    if model_kind.needs_coords() {
        for m in mols.iter().take(SAMPLE) {
            if m.coords.is_none() {
                return Err(Error::Data(format!(
                    "molecule {:?} has no coordinates; the equivariance check needs 3D inputs",
                    m.name
                )));
            }
        }
    }
    let model = check_model(model_kind, 32, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x517c_c1b7_2722_0a95);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for mol in mols.iter().take(SAMPLE) {
        let y0 = model.predict(std::slice::from_ref(mol))?[0];
        for _ in 0..TRANSFORMS {
            let mut moved = mol.clone();
            if let Some(coords) = &mol.coords {
                let rot = random_rotation(&mut rng);
                let t = [
                    rng.gen_range(-10.0..10.0),
                    rng.gen_range(-10.0..10.0),
                    rng.gen_range(-10.0..10.0),
                ];
                moved.coords = Some(apply_rigid(coords, &rot, t));
            }
            let y1 = model.predict(&[moved])?[0];
            worst = worst.max((y1 - y0).abs());
            cases += 1;
        }
    }
    Ok(CheckReport {
        kind: CheckKind::Equivariance,
        max_deviation: worst,
        tolerance: EQUIVARIANCE_TOL,
        cases,
    })
}

/// |pred(perm(mol)) - pred(mol)| over random atom relabelings.
fn check_permutation(model_kind: ModelKind, mols: &[Molecule], seed: u64) -> Result<CheckReport> {
    let model = check_model(model_kind, 32, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x2545_f491_4f6c_dd1d);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for mol in mols.iter().take(SAMPLE) {
        let y0 = model.predict(std::slice::from_ref(mol))?[0];
        for _ in 0..TRANSFORMS {
            let mut perm: Vec<usize> = (0..mol.n_atoms()).collect();
            perm.shuffle(&mut rng);
            let y1 = model.predict(&[mol.permuted(&perm)])?[0];
            worst = worst.max((y1 - y0).abs());
            cases += 1;
        }
    }
    Ok(CheckReport {
        kind: CheckKind::Permutation,
        max_deviation: worst,
        tolerance: PERMUTATION_TOL,
        cases,
    })
}

/// Central-difference check of every parameter tensor on the smallest
/// molecule of the set, with the hidden width shrunk so the full parameter
/// vector stays tractable.
fn check_gradcheck(model_kind: ModelKind, mols: &[Molecule], seed: u64) -> Result<CheckReport> {
    let mol = mols
        .iter()
        .min_by_key(|m| m.n_atoms())
        .expect("checked non-empty");
    if mol.n_atoms() > 10 {
        return Err(Error::Data(format!(
            "smallest molecule has {} atoms; the gradient check needs one with at most 10",
            mol.n_atoms()
        )));
    }
    let model = check_model(model_kind, 16, seed)?;
    let prepared = model.prepare(mol)?;
    let mut worst = 0.0f64;
    let mut cases = 0;
    for id in model.params.ids() {
        let f = |tape: &mut Tape, point: TensorId| {
            let leaves = model.params.import_with_override(tape, id, point);
            let y = model.forward_batch(tape, &leaves, &[&prepared]);
            tape.sum_all(y)
        };
        let err = grad_check(f, model.params.tensor(id), 1e-5)?;
        worst = worst.max(err);
        cases += 1;
    }
    Ok(CheckReport {
        kind: CheckKind::Gradcheck,
        max_deviation: worst,
        tolerance: GRADCHECK_TOL,
        cases,
    })
}
