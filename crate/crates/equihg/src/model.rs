//! Complete predictors: the geometric hypergraph model, its geometry-free
//! variant, and a bond-graph baseline. All three share the per-atom
//! featurization and produce one scalar per molecule.
//!
//! Batches are disjoint unions: per-molecule graphs are concatenated with
//! index offsets and every aggregation stays within its own molecule, so a
//! molecule's prediction does not depend on its batch companions.

use crate::allset::HyperNet;
use crate::chemio::Molecule;
use crate::error::{Error, Result};
use crate::geo::{atom_features, GeoEncoder, RAW_FEATURE_DIM};
use crate::hypergraph::{
    build_hypergraph, build_radius_graph, perceive_conjugation, to_bipartite, BipartiteGraph,
    RadiusGraph,
};
use crate::nn::{Activation, Checkpoint, Linear, Mlp, ParamId, ParamSet};
use crate::tensor::{Tape, Tensor, TensorId};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    EquiHgnn,
    Mhnn,
    Gin,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::EquiHgnn => "equihgnn",
            ModelKind::Mhnn => "mhnn",
            ModelKind::Gin => "gin",
        }
    }

    pub fn parse(s: &str) -> Option<ModelKind> {
        Some(match s {
            "equihgnn" => ModelKind::EquiHgnn,
            "mhnn" => ModelKind::Mhnn,
            "gin" => ModelKind::Gin,
            _ => return None,
        })
    }

    /// Whether forward passes read 3D coordinates.
    pub fn needs_coords(self) -> bool {
        matches!(self, ModelKind::EquiHgnn)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub hidden: usize,
    pub geo_layers: usize,
    pub hg_layers: usize,
    pub head_layers: usize,
    pub cutoff: f64,
    pub max_neighbors: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            kind: ModelKind::EquiHgnn,
            hidden: 256,
            geo_layers: 2,
            hg_layers: 2,
            head_layers: 2,
            cutoff: 5.0,
            max_neighbors: 16,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.hidden == 0 {
            return bad("hidden must be positive".into());
        }
        if self.head_layers == 0 {
            return bad("head_layers must be positive".into());
        }
        if !(self.cutoff > 0.0) {
            return bad(format!("cutoff must be positive, got {}", self.cutoff));
        }
        if self.max_neighbors == 0 {
            return bad("max_neighbors must be positive".into());
        }
        Ok(())
    }
}

enum Arch {
    /// Geometric encoder feeding the hypergraph network.
    Geo {
        encoder: GeoEncoder,
        hyper: HyperNet,
    },
    /// Projected atom features feeding the hypergraph network directly.
    Plain { proj: Linear, hyper: HyperNet },
    /// Bond-graph baseline: sum aggregation with a learnable self-weight.
    BondGraph {
        proj: Linear,
        eps: Vec<ParamId>,
        mlps: Vec<Mlp>,
        head: Mlp,
    },
}

pub struct Model {
    pub cfg: ModelConfig,
    pub params: ParamSet,
    arch: Arch,
}

/// Everything about one molecule the forward pass needs, computed once and
/// reusable across epochs. Index lists are molecule-local; batching applies
/// offsets.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub n_atoms: usize,
    pub feats: Tensor,
    pub coords: Option<Vec<[f64; 3]>>,
    pub radius_edges: Vec<(usize, usize)>,
    pub bip: BipartiteGraph,
    /// Directed bond pairs (gather source j, scatter target i), both ways.
    pub bond_edges: Vec<(usize, usize)>,
}

impl Model {
    pub fn new(cfg: ModelConfig) -> Result<Model> {
        cfg.validate()?;
        let mut params = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let d = cfg.hidden;
        let arch = match cfg.kind {
            ModelKind::EquiHgnn => Arch::Geo {
                encoder: GeoEncoder::init(&mut params, &mut rng, "geo", d, cfg.geo_layers),
                hyper: HyperNet::init(
                    &mut params,
                    &mut rng,
                    "hg",
                    d,
                    cfg.hg_layers,
                    cfg.head_layers,
                ),
            },
            ModelKind::Mhnn => Arch::Plain {
                proj: Linear::init(&mut params, &mut rng, "proj", RAW_FEATURE_DIM, d),
                hyper: HyperNet::init(
                    &mut params,
                    &mut rng,
                    "hg",
                    d,
                    cfg.hg_layers,
                    cfg.head_layers,
                ),
            },
            ModelKind::Gin => {
                let proj = Linear::init(&mut params, &mut rng, "proj", RAW_FEATURE_DIM, d);
                let mut eps = Vec::new();
                let mut mlps = Vec::new();
                for l in 0..cfg.hg_layers {
                    eps.push(params.add(format!("gin.l{l}.eps"), Tensor::scalar(0.0)));
                    mlps.push(Mlp::init(
                        &mut params,
                        &mut rng,
                        &format!("gin.l{l}.mlp"),
                        &[d, d, d],
                        Activation::Silu,
                    ));
                }
                let mut head_dims = vec![d];
                head_dims.extend(std::iter::repeat(d).take(cfg.head_layers - 1));
                head_dims.push(1);
                let head = Mlp::init(&mut params, &mut rng, "gin.head", &head_dims, Activation::Silu);
                Arch::BondGraph {
                    proj,
                    eps,
                    mlps,
                    head,
                }
            }
        };
        Ok(Model { cfg, params, arch })
    }

    pub fn meta(&self) -> serde_json::Value {
        serde_json::to_value(&self.cfg).expect("config serializes")
    }

    /// Rebuilds a model from a checkpoint: config from the metadata block,
    /// parameters swapped in after a name/shape audit. `path` only labels
    /// errors.
    pub fn from_checkpoint(ckpt: Checkpoint, path: &str) -> Result<Model> {
        let bad = |msg: String| Error::Checkpoint {
            path: path.to_string(),
            msg,
        };
        let cfg: ModelConfig = serde_json::from_value(ckpt.meta.clone())
            .map_err(|e| bad(format!("unusable metadata: {e}")))?;
        let mut model = Model::new(cfg)?;
        if model.params.len() != ckpt.params.len() {
            return Err(bad(format!(
                "expected {} parameter tensors, found {}",
                model.params.len(),
                ckpt.params.len()
            )));
        }
        for (id, (name, tensor)) in model.params.ids().zip(ckpt.params.iter()) {
            if model.params.name(id) != name {
                return Err(bad(format!(
                    "parameter {} missing (found {name:?})",
                    model.params.name(id)
                )));
            }
            if model.params.tensor(id).shape() != tensor.shape() {
                return Err(bad(format!(
                    "parameter {name} has shape {:?}, expected {:?}",
                    tensor.shape(),
                    model.params.tensor(id).shape()
                )));
            }
        }
        model.params = ckpt.params;
        Ok(model)
    }

    /// Per-molecule precomputation: perception, hypergraph, bipartite form,
    /// bond pairs, and (for the geometric kind) the radius graph.
    pub fn prepare(&self, mol: &Molecule) -> Result<Prepared> {
        let mol = perceive_conjugation(mol.clone());
        let bip = to_bipartite(&build_hypergraph(&mol));
        let radius_edges = if self.cfg.kind.needs_coords() {
            let coords = mol.coords.as_ref().ok_or_else(|| {
                Error::Data(format!(
                    "molecule {:?} has no coordinates (required by this model)",
                    mol.name
                ))
            })?;
            build_radius_graph(coords, self.cfg.cutoff, self.cfg.max_neighbors)?.edges
        } else {
            Vec::new()
        };
        let mut bond_edges = Vec::with_capacity(2 * mol.bonds.len());
        for b in &mol.bonds {
            bond_edges.push((b.b, b.a)); // neighbor b feeds target a
            bond_edges.push((b.a, b.b));
        }
        Ok(Prepared {
            n_atoms: mol.n_atoms(),
            feats: atom_features(&mol),
            coords: mol.coords.clone(),
            radius_edges,
            bip,
            bond_edges,
        })
    }

    /// Forward over a batch; returns a B x 1 tensor of predictions.
    pub fn forward_batch(
        &self,
        tape: &mut Tape,
        leaves: &[TensorId],
        batch: &[&Prepared],
    ) -> TensorId {
        assert!(!batch.is_empty(), "empty batch");
        let BatchGraph {
            feats,
            coords,
            radius_edges,
            incidence,
            num_vertices,
            num_edges,
            vert_mol,
            edge_mol,
            bond_edges,
            num_mols,
        } = assemble(batch);
        let feats = tape.constant(feats);
        let bip = BipartiteGraph {
            num_vertex_nodes: num_vertices,
            num_edge_nodes: num_edges,
            incidence,
        };
        let readout = |tape: &mut Tape, hyper: &HyperNet, h: TensorId| {
            let (x, z) = hyper.forward(tape, leaves, h, &bip);
            let xs = tape.scatter_sum(x, &vert_mol, num_mols);
            let zs = tape.scatter_sum(z, &edge_mol, num_mols);
            hyper.apply_head(tape, leaves, xs, zs)
        };
        match &self.arch {
            Arch::Geo { encoder, hyper } => {
                let coords = tape.constant(coords.expect("prepared without coords"));
                let rg = RadiusGraph {
                    edges: radius_edges,
                    cutoff: self.cfg.cutoff,
                    max_neighbors: self.cfg.max_neighbors,
                };
                let (h, _x) = encoder.forward(tape, leaves, feats, coords, &rg);
                readout(tape, hyper, h)
            }
            Arch::Plain { proj, hyper } => {
                let h = proj.apply(tape, leaves, feats);
                readout(tape, hyper, h)
            }
            Arch::BondGraph {
                proj,
                eps,
                mlps,
                head,
            } => {
                let n = num_vertices;
                let d = self.cfg.hidden;
                let src: Vec<usize> = bond_edges.iter().map(|e| e.0).collect();
                let dst: Vec<usize> = bond_edges.iter().map(|e| e.1).collect();
                let mut h = proj.apply(tape, leaves, feats);
                for (eid, mlp) in eps.iter().zip(mlps) {
                    let one_plus = tape.add_scalar(leaves[eid.0], 1.0);
                    let scale = tape.broadcast(one_plus, &[n, d]);
                    let self_term = tape.mul(h, scale);
                    let neigh = tape.gather(h, &src);
                    let agg = tape.scatter_sum(neigh, &dst, n);
                    let sum = tape.add(self_term, agg);
                    h = mlp.apply(tape, leaves, sum);
                }
                let sums = tape.scatter_sum(h, &vert_mol, batch.len());
                head.apply(tape, leaves, sums)
            }
        }
    }

    /// Convenience inference: prepare + one batched forward, no gradients.
    pub fn predict(&self, mols: &[Molecule]) -> Result<Vec<f64>> {
        let prepared: Vec<Prepared> = mols.iter().map(|m| self.prepare(m)).collect::<Result<_>>()?;
        let refs: Vec<&Prepared> = prepared.iter().collect();
        let mut tape = Tape::new();
        let leaves = self.params.import_all(&mut tape);
        let y = self.forward_batch(&mut tape, &leaves, &refs);
        Ok(tape.data(y).to_vec())
    }
}

struct BatchGraph {
    feats: Tensor,
    coords: Option<Tensor>,
    radius_edges: Vec<(usize, usize)>,
    incidence: Vec<(usize, usize)>,
    num_vertices: usize,
    num_edges: usize,
    vert_mol: Vec<usize>,
    edge_mol: Vec<usize>,
    bond_edges: Vec<(usize, usize)>,
    num_mols: usize,
}

/// Concatenates per-molecule graphs, offsetting every index list.
fn assemble(batch: &[&Prepared]) -> BatchGraph {
    let total_atoms: usize = batch.iter().map(|p| p.n_atoms).sum();
    let total_edges: usize = batch.iter().map(|p| p.bip.num_edge_nodes).sum();
    let all_coords = batch.iter().all(|p| p.coords.is_some());

    let mut feats = Vec::with_capacity(total_atoms * RAW_FEATURE_DIM);
    let mut coords = Vec::with_capacity(if all_coords { total_atoms * 3 } else { 0 });
    let mut radius_edges = Vec::new();
    let mut incidence = Vec::new();
    let mut vert_mol = Vec::with_capacity(total_atoms);
    let mut edge_mol = Vec::with_capacity(total_edges);
    let mut bond_edges = Vec::new();

    let mut abase = 0;
    let mut ebase = 0;
    for (mi, p) in batch.iter().enumerate() {
        feats.extend_from_slice(p.feats.data());
        if all_coords {
            for c in p.coords.as_ref().unwrap() {
                coords.extend_from_slice(c);
            }
        }
        radius_edges.extend(p.radius_edges.iter().map(|&(i, j)| (abase + i, abase + j)));
        incidence.extend(
            p.bip
                .incidence
                .iter()
                .map(|&(v, e)| (abase + v, ebase + e)),
        );
        bond_edges.extend(p.bond_edges.iter().map(|&(s, t)| (abase + s, abase + t)));
        vert_mol.extend(std::iter::repeat(mi).take(p.n_atoms));
        edge_mol.extend(std::iter::repeat(mi).take(p.bip.num_edge_nodes));
        abase += p.n_atoms;
        ebase += p.bip.num_edge_nodes;
    }

    BatchGraph {
        feats: Tensor::new(vec![total_atoms, RAW_FEATURE_DIM], feats),
        coords: all_coords.then(|| Tensor::matrix(total_atoms, 3, coords)),
        radius_edges,
        incidence,
        num_vertices: total_atoms,
        num_edges: total_edges,
        vert_mol,
        edge_mol,
        bond_edges,
        num_mols: batch.len(),
    }
}
