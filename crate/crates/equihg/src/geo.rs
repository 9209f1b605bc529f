//! Geometry-aware encoder: message passing where every geometric quantity
//! enters as a squared distance (invariant) or a relative-coordinate
//! direction (equivariant), so node embeddings are unchanged by rigid
//! motions of the input and the coordinate stream co-rotates with it.
//!
//! Per layer, for each directed radius-graph edge (i, j):
//!   m_ij = msg(h_i, h_j, |x_i - x_j|^2)
//!   h_i' = h_i + node(h_i, sum_j m_ij)
//!   x_i' = x_i + (1/max(1,|N(i)|)) sum_j (x_i - x_j)/(|x_i - x_j| + 1) * coord(m_ij)
//!
//! The +1 in the direction denominator damps near-contact pairs; the degree
//! normalization keeps coordinate updates bounded as neighborhoods grow.

use crate::chemio::{Molecule, ELEMENT_COUNT};
use crate::error::{Error, Result};
use crate::hypergraph::{build_radius_graph, RadiusGraph};
use crate::nn::{Activation, Linear, Mlp, ParamSet};
use crate::tensor::{Tape, Tensor, TensorId};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// One-hot element + aromatic flag + formal charge + degree.
pub const RAW_FEATURE_DIM: usize = ELEMENT_COUNT + 3;

/// Per-atom scalar attributes, N x RAW_FEATURE_DIM. Geometry-free and
/// deterministic; the learned projection to hidden width lives in the
/// encoder (and in the geometry-free models).
pub fn atom_features(mol: &Molecule) -> Tensor {
    let n = mol.n_atoms();
    let mut data = vec![0.0; n * RAW_FEATURE_DIM];
    for (i, atom) in mol.atoms.iter().enumerate() {
        let row = &mut data[i * RAW_FEATURE_DIM..(i + 1) * RAW_FEATURE_DIM];
        row[atom.element.index()] = 1.0;
        row[ELEMENT_COUNT] = if atom.aromatic { 1.0 } else { 0.0 };
        row[ELEMENT_COUNT + 1] = atom.charge as f64;
        row[ELEMENT_COUNT + 2] = mol.degree(i) as f64;
    }
    Tensor::new(vec![n, RAW_FEATURE_DIM], data)
}

/// One equivariant message-passing layer: message, node-update, and
/// coordinate-gate networks.
#[derive(Debug, Clone)]
pub struct EgnnLayer {
    pub msg: Mlp,   // [2d+1, d, d]
    pub node: Mlp,  // [2d, d, d]
    pub coord: Mlp, // [d, d, 1]
}

#[derive(Debug, Clone)]
pub struct GeoEncoder {
    pub proj: Linear,
    pub layers: Vec<EgnnLayer>,
    pub hidden: usize,
}

impl GeoEncoder {
    pub fn init(
        ps: &mut ParamSet,
        rng: &mut ChaCha8Rng,
        name: &str,
        hidden: usize,
        num_layers: usize,
    ) -> Self {
        let d = hidden;
        let proj = Linear::init(ps, rng, &format!("{name}.proj"), RAW_FEATURE_DIM, d);
        let layers = (0..num_layers)
            .map(|l| EgnnLayer {
                msg: Mlp::init(
                    ps,
                    rng,
                    &format!("{name}.l{l}.msg"),
                    &[2 * d + 1, d, d],
                    Activation::Silu,
                ),
                node: Mlp::init(
                    ps,
                    rng,
                    &format!("{name}.l{l}.node"),
                    &[2 * d, d, d],
                    Activation::Silu,
                ),
                coord: Mlp::init(
                    ps,
                    rng,
                    &format!("{name}.l{l}.coord"),
                    &[d, d, 1],
                    Activation::Silu,
                ),
            })
            .collect();
        GeoEncoder {
            proj,
            layers,
            hidden,
        }
    }

    /// Runs the layer stack. `feats` is N x RAW_FEATURE_DIM, `coords` is
    /// N x 3; both are usually constants. Returns (h, x): invariant node
    /// embeddings and the final coordinate stream. The radius graph stays
    /// fixed across layers (built from the input coordinates).
    pub fn forward(
        &self,
        tape: &mut Tape,
        leaves: &[TensorId],
        feats: TensorId,
        coords: TensorId,
        graph: &RadiusGraph,
    ) -> (TensorId, TensorId) {
        let n = tape.shape(feats)[0];
        assert_eq!(tape.shape(coords), &[n, 3], "coords shape mismatch");
        let idx_i: Vec<usize> = graph.edges.iter().map(|e| e.0).collect();
        let idx_j: Vec<usize> = graph.edges.iter().map(|e| e.1).collect();
        let ne = idx_i.len();

        let mut out_deg = vec![0.0f64; n];
        for &i in &idx_i {
            out_deg[i] += 1.0;
        }
        let inv_deg: Vec<f64> = out_deg.iter().map(|&d| 1.0 / d.max(1.0)).collect();
        let inv_deg = tape.constant(Tensor::new(vec![n, 1], inv_deg));

        let mut h = self.proj.apply(tape, leaves, feats);
        let mut x = coords;
        for layer in &self.layers {
            let hi = tape.gather(h, &idx_i);
            let hj = tape.gather(h, &idx_j);
            let xi = tape.gather(x, &idx_i);
            let xj = tape.gather(x, &idx_j);
            let rel = tape.sub(xi, xj);
            let sq = tape.square(rel);
            let d2 = tape.sum_axis(sq, 1);
            let d2col = tape.reshape(d2, &[ne, 1]);

            let msg_in = tape.concat(1, &[hi, hj, d2col]);
            let m = layer.msg.apply(tape, leaves, msg_in);
            let agg = tape.scatter_sum(m, &idx_i, n);
            let upd_in = tape.concat(1, &[h, agg]);
            let dh = layer.node.apply(tape, leaves, upd_in);
            h = tape.add(h, dh);

            let dist = tape.sqrt(d2col);
            let damped = tape.add_scalar(dist, 1.0);
            let inv = tape.recip(damped);
            let invb = tape.broadcast(inv, &[ne, 3]);
            let dir = tape.mul(rel, invb);
            let gate = layer.coord.apply(tape, leaves, m);
            let gateb = tape.broadcast(gate, &[ne, 3]);
            let step = tape.mul(dir, gateb);
            let xagg = tape.scatter_sum(step, &idx_i, n);
            let invdegb = tape.broadcast(inv_deg, &[n, 3]);
            let dx = tape.mul(xagg, invdegb);
            x = tape.add(x, dx);
        }
        (h, x)
    }

    /// Convenience entry: featurize, build the radius graph, run the stack.
    pub fn encode(
        &self,
        tape: &mut Tape,
        leaves: &[TensorId],
        mol: &Molecule,
        cutoff: f64,
        max_neighbors: usize,
    ) -> Result<(TensorId, TensorId)> {
        let coords = mol
            .coords
            .as_ref()
            .ok_or_else(|| Error::Data(format!("molecule {:?} has no coordinates", mol.name)))?;
        let graph = build_radius_graph(coords, cutoff, max_neighbors)?;
        let feats = tape.constant(atom_features(mol));
        let flat: Vec<f64> = coords.iter().flatten().copied().collect();
        let x = tape.constant(Tensor::matrix(mol.n_atoms(), 3, flat));
        Ok(self.forward(tape, leaves, feats, x, &graph))
    }
}

/// Uniform random rotation matrix (proper, det +1) via a normalized
/// quaternion of four standard normals.
pub fn random_rotation(rng: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
    let mut normal = || {
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    };
    let (w, x, y, z) = (normal(), normal(), normal(), normal());
    let norm = (w * w + x * x + y * y + z * z).sqrt();
    let (w, x, y, z) = (w / norm, x / norm, y / norm, z / norm);
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

/// x -> R x + t for every row.
pub fn apply_rigid(coords: &[[f64; 3]], rot: &[[f64; 3]; 3], t: [f64; 3]) -> Vec<[f64; 3]> {
    coords
        .iter()
        .map(|c| {
            let mut out = t;
            for (r, o) in rot.iter().zip(out.iter_mut()) {
                *o += r[0] * c[0] + r[1] * c[1] + r[2] * c[2];
            }
            out
        })
        .collect()
}
