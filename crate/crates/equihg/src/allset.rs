//! Set-function message passing over the bipartite hypergraph form, plus
//! the sum-pooled readout.
//!
//! Both directions use the same DeepSets shape: transform each member with a
//! pre-MLP, sum over the incidence set, concatenate the receiver's own state,
//! and finish with a post-MLP:
//!
//!   Z_e' = v2e_post(Z_e ++ sum_{v in e} v2e_pre(X_v))
//!   X_v' = e2v_post(X_v ++ sum_{e owning v} e2v_pre(Z_e'))
//!
//! Sums run over incidence pairs via scatter_sum, so outputs depend only on
//! the incidence sets, not their order. Vertices in no hyperedge get a zero
//! aggregate; a molecule with no hyperedges keeps Z as an empty 0 x d tensor
//! and the readout substitutes a zero vector for the Z sum.

use crate::hypergraph::BipartiteGraph;
use crate::nn::{Activation, Linear, Mlp, ParamSet};
use crate::tensor::{Tape, TensorId};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct AllSetLayer {
    pub v2e_pre: Mlp,  // [d, d, d]
    pub v2e_post: Mlp, // [2d, d, d]
    pub e2v_pre: Mlp,  // [d, d, d]
    pub e2v_post: Mlp, // [2d, d, d]
}

/// Hyperedge-feature initialization, the layer stack, and the readout head.
#[derive(Debug, Clone)]
pub struct HyperNet {
    pub z_init: Linear, // d -> d, applied to the incident-vertex sum
    pub layers: Vec<AllSetLayer>,
    pub head: Mlp, // [2d, d, ..., 1]
    pub hidden: usize,
}

impl HyperNet {
    pub fn init(
        ps: &mut ParamSet,
        rng: &mut ChaCha8Rng,
        name: &str,
        hidden: usize,
        num_layers: usize,
        head_layers: usize,
    ) -> Self {
        assert!(head_layers >= 1, "head needs at least one layer");
        let d = hidden;
        let z_init = Linear::init(ps, rng, &format!("{name}.z_init"), d, d);
        let layers = (0..num_layers)
            .map(|l| AllSetLayer {
                v2e_pre: Mlp::init(
                    ps,
                    rng,
                    &format!("{name}.l{l}.v2e_pre"),
                    &[d, d, d],
                    Activation::Silu,
                ),
                v2e_post: Mlp::init(
                    ps,
                    rng,
                    &format!("{name}.l{l}.v2e_post"),
                    &[2 * d, d, d],
                    Activation::Silu,
                ),
                e2v_pre: Mlp::init(
                    ps,
                    rng,
                    &format!("{name}.l{l}.e2v_pre"),
                    &[d, d, d],
                    Activation::Silu,
                ),
                e2v_post: Mlp::init(
                    ps,
                    rng,
                    &format!("{name}.l{l}.e2v_post"),
                    &[2 * d, d, d],
                    Activation::Silu,
                ),
            })
            .collect();
        let mut head_dims = vec![2 * d];
        head_dims.extend(std::iter::repeat(d).take(head_layers - 1));
        head_dims.push(1);
        let head = Mlp::init(ps, rng, &format!("{name}.head"), &head_dims, Activation::Silu);
        HyperNet {
            z_init,
            layers,
            head,
            hidden,
        }
    }

    /// Z_e(0) = Linear(sum of initial features of e's vertices).
    pub fn init_z(
        &self,
        tape: &mut Tape,
        leaves: &[TensorId],
        x0: TensorId,
        bip: &BipartiteGraph,
    ) -> TensorId {
        let (vert_idx, edge_idx) = split_incidence(bip);
        let gathered = tape.gather(x0, &vert_idx);
        let sums = tape.scatter_sum(gathered, &edge_idx, bip.num_edge_nodes);
        self.z_init.apply(tape, leaves, sums)
    }

    /// Full stack: init Z, then alternate v2e / e2v per layer. Returns the
    /// final (X, Z).
    pub fn forward(
        &self,
        tape: &mut Tape,
        leaves: &[TensorId],
        x0: TensorId,
        bip: &BipartiteGraph,
    ) -> (TensorId, TensorId) {
        let (vert_idx, edge_idx) = split_incidence(bip);
        let mut x = x0;
        let mut z = self.init_z(tape, leaves, x0, bip);
        for layer in &self.layers {
            z = self.v2e(tape, leaves, layer, x, z, &vert_idx, &edge_idx, bip.num_edge_nodes);
            x = self.e2v(tape, leaves, layer, x, z, &vert_idx, &edge_idx, bip.num_vertex_nodes);
        }
        (x, z)
    }

    #[allow(clippy::too_many_arguments)]
    fn v2e(
        &self,
        tape: &mut Tape,
        leaves: &[TensorId],
        layer: &AllSetLayer,
        x: TensorId,
        z: TensorId,
        vert_idx: &[usize],
        edge_idx: &[usize],
        num_edges: usize,
    ) -> TensorId {
        let pre = layer.v2e_pre.apply(tape, leaves, x);
        let gathered = tape.gather(pre, vert_idx);
        let agg = tape.scatter_sum(gathered, edge_idx, num_edges);
        let cat = tape.concat(1, &[z, agg]);
        layer.v2e_post.apply(tape, leaves, cat)
    }

    #[allow(clippy::too_many_arguments)]
    fn e2v(
        &self,
        tape: &mut Tape,
        leaves: &[TensorId],
        layer: &AllSetLayer,
        x: TensorId,
        z: TensorId,
        vert_idx: &[usize],
        edge_idx: &[usize],
        num_vertices: usize,
    ) -> TensorId {
        let pre = layer.e2v_pre.apply(tape, leaves, z);
        let gathered = tape.gather(pre, edge_idx);
        let agg = tape.scatter_sum(gathered, vert_idx, num_vertices);
        let cat = tape.concat(1, &[x, agg]);
        layer.e2v_post.apply(tape, leaves, cat)
    }

    /// y = head(sum_v X_v ++ sum_e Z_e) for a single graph; the Z sum of an
    /// edgeless hypergraph is the zero vector (sum over zero rows).
    pub fn readout(
        &self,
        tape: &mut Tape,
        leaves: &[TensorId],
        x: TensorId,
        z: TensorId,
    ) -> TensorId {
        let d = self.hidden;
        let xs = tape.sum_axis(x, 0);
        let zs = tape.sum_axis(z, 0);
        let xs = tape.reshape(xs, &[1, d]);
        let zs = tape.reshape(zs, &[1, d]);
        let cat = tape.concat(1, &[xs, zs]);
        self.head.apply(tape, leaves, cat)
    }

    /// Batched head application on precomputed per-graph sums (B x d each).
    pub fn apply_head(
        &self,
        tape: &mut Tape,
        leaves: &[TensorId],
        x_sums: TensorId,
        z_sums: TensorId,
    ) -> TensorId {
        let cat = tape.concat(1, &[x_sums, z_sums]);
        self.head.apply(tape, leaves, cat)
    }
}

fn split_incidence(bip: &BipartiteGraph) -> (Vec<usize>, Vec<usize>) {
    let vert_idx = bip.incidence.iter().map(|p| p.0).collect();
    let edge_idx = bip.incidence.iter().map(|p| p.1).collect();
    (vert_idx, edge_idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::{to_bipartite, Hypergraph};
    use crate::tensor::{grad_check, Tensor};
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};

    fn net(hidden: usize, layers: usize) -> (ParamSet, HyperNet) {
        let mut ps = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let net = HyperNet::init(&mut ps, &mut rng, "hg", hidden, layers, 2);
        (ps, net)
    }

    fn random_features(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
        let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Tensor::new(vec![rows, cols], data)
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn singleton_hyperedge_matches_manual_formula() {
        let (ps, net) = net(4, 1);
        let bip = to_bipartite(&Hypergraph::new(2, vec![vec![1]]));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let feats = random_features(&mut rng, 2, 4);

        let mut tape = Tape::new();
        let leaves = ps.import_all(&mut tape);
        let x0 = tape.constant(feats.clone());
        let z0 = net.init_z(&mut tape, &leaves, x0, &bip);
        let z1 = net.v2e(
            &mut tape, &leaves, &net.layers[0], x0, z0, &[1], &[0], 1,
        );

        // Manual: pre runs on all vertices, the edge sums only vertex 1.
        let mut manual = Tape::new();
        let leaves2 = ps.import_all(&mut manual);
        let x = manual.constant(feats);
        let g1 = manual.gather(x, &[1]);
        let zs = net.z_init.apply(&mut manual, &leaves2, g1);
        let pre = net.layers[0].v2e_pre.apply(&mut manual, &leaves2, x);
        let pre1 = manual.gather(pre, &[1]);
        let cat = manual.concat(1, &[zs, pre1]);
        let want = net.layers[0].v2e_post.apply(&mut manual, &leaves2, cat);

        assert!(max_abs_diff(tape.data(z1), manual.data(want)) <= 1e-14);
    }

    #[test]
    fn vertex_outside_all_hyperedges_gets_zero_aggregate() {
        let (ps, net) = net(4, 1);
        // Vertex 2 is isolated.
        let bip = to_bipartite(&Hypergraph::new(3, vec![vec![0, 1]]));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let feats = random_features(&mut rng, 3, 4);

        let mut tape = Tape::new();
        let leaves = ps.import_all(&mut tape);
        let x0 = tape.constant(feats.clone());
        let (x1, _) = net.forward(&mut tape, &leaves, x0, &bip);
        let row2 = &tape.data(x1)[2 * 4..3 * 4];

        let mut manual = Tape::new();
        let leaves2 = ps.import_all(&mut manual);
        let x = manual.constant(feats);
        let xrow = manual.gather(x, &[2]);
        let zero = manual.constant(Tensor::zeros(vec![1, 4]));
        let cat = manual.concat(1, &[xrow, zero]);
        let want = net.layers[0].e2v_post.apply(&mut manual, &leaves2, cat);

        assert_eq!(row2, manual.data(want));
    }

    #[test]
    fn vertex_in_two_hyperedges_sums_both_pre_terms() {
        let (ps, net) = net(4, 1);
        let bip = to_bipartite(&Hypergraph::new(3, vec![vec![0, 1], vec![1, 2]]));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let feats = random_features(&mut rng, 3, 4);

        let mut tape = Tape::new();
        let leaves = ps.import_all(&mut tape);
        let x0 = tape.constant(feats.clone());
        let z0 = net.init_z(&mut tape, &leaves, x0, &bip);
        let (vert_idx, edge_idx) = split_incidence(&bip);
        let z1 = net.v2e(&mut tape, &leaves, &net.layers[0], x0, z0, &vert_idx, &edge_idx, 2);
        let x1 = net.e2v(&mut tape, &leaves, &net.layers[0], x0, z1, &vert_idx, &edge_idx, 3);
        let row1 = tape.data(x1)[4..8].to_vec();

        let pre = net.layers[0].e2v_pre.apply(&mut tape, &leaves, z1);
        let pdata = tape.data(pre);
        let sum: Vec<f64> = (0..4).map(|k| pdata[k] + pdata[4 + k]).collect();
        let x0row = &feats.data()[4..8];
        let mut manual = Tape::new();
        let leaves2 = ps.import_all(&mut manual);
        let cat = manual.constant(Tensor::new(
            vec![1, 8],
            x0row.iter().chain(&sum).copied().collect(),
        ));
        let want = net.layers[0].e2v_post.apply(&mut manual, &leaves2, cat);
        assert!(max_abs_diff(&row1, manual.data(want)) <= 1e-14);
    }

    #[test]
    fn no_hyperedges_keeps_z_empty_and_readout_uses_zero_z_sum() {
        let (ps, net) = net(4, 2);
        let bip = to_bipartite(&Hypergraph::new(3, vec![]));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let feats = random_features(&mut rng, 3, 4);

        let mut tape = Tape::new();
        let leaves = ps.import_all(&mut tape);
        let x0 = tape.constant(feats.clone());
        let (x, z) = net.forward(&mut tape, &leaves, x0, &bip);
        assert_eq!(tape.shape(z), &[0, 4]);
        let y = net.readout(&mut tape, &leaves, x, z);
        assert_eq!(tape.shape(y), &[1, 1]);
        assert!(tape.data(y)[0].is_finite());

        // Manual: head(sum X ++ 0).
        let xs: Vec<f64> = (0..4)
            .map(|k| (0..3).map(|r| tape.data(x)[r * 4 + k]).sum())
            .collect();
        let mut manual = Tape::new();
        let leaves2 = ps.import_all(&mut manual);
        let mut cat = xs.clone();
        cat.extend([0.0; 4]);
        let cat = manual.constant(Tensor::new(vec![1, 8], cat));
        let want = net.head.apply(&mut manual, &leaves2, cat);
        assert!(max_abs_diff(tape.data(y), manual.data(want)) <= 1e-12);
    }

    #[test]
    fn zero_layers_readout_is_structural() {
        let (ps, net) = net(4, 0);
        let h = Hypergraph::new(4, vec![vec![0, 2], vec![1, 2, 3]]);
        let bip = to_bipartite(&h);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let feats = random_features(&mut rng, 4, 4);

        let mut tape = Tape::new();
        let leaves = ps.import_all(&mut tape);
        let x0 = tape.constant(feats.clone());
        let (x, z) = net.forward(&mut tape, &leaves, x0, &bip);
        assert_eq!(tape.data(x), feats.data());
        let y = net.readout(&mut tape, &leaves, x, z);

        let z0 = net.init_z(&mut tape, &leaves, x0, &bip);
        let want = net.readout(&mut tape, &leaves, x0, z0);
        assert_eq!(tape.data(y), tape.data(want));
    }

    #[test]
    fn incidence_order_never_matters() {
        let (ps, net) = net(6, 2);
        let h = Hypergraph::new(6, vec![vec![0, 1, 2, 3], vec![2, 3, 4], vec![0, 5]]);
        let base = to_bipartite(&h);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let feats = random_features(&mut rng, 6, 6);

        let run = |bip: &BipartiteGraph| {
            let mut tape = Tape::new();
            let leaves = ps.import_all(&mut tape);
            let x0 = tape.constant(feats.clone());
            let (x, z) = net.forward(&mut tape, &leaves, x0, bip);
            let y = net.readout(&mut tape, &leaves, x, z);
            (
                tape.data(x).to_vec(),
                tape.data(z).to_vec(),
                tape.data(y)[0],
            )
        };
        let (x0, z0, y0) = run(&base);
        for _ in 0..20 {
            let mut shuffled = base.clone();
            shuffled.incidence.shuffle(&mut rng);
            let (x1, z1, y1) = run(&shuffled);
            assert!(max_abs_diff(&x0, &x1) <= 1e-12);
            assert!(max_abs_diff(&z0, &z1) <= 1e-12);
            assert!((y0 - y1).abs() <= 1e-12);
        }
    }

    #[test]
    fn vertex_and_hyperedge_relabeling_leave_readout_alone() {
        let (ps, net) = net(6, 2);
        let edges = vec![vec![0, 1, 2], vec![2, 3], vec![4, 5, 6, 7]];
        let h = Hypergraph::new(8, edges.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let feats = random_features(&mut rng, 8, 6);

        let run = |h: &Hypergraph, feats: &Tensor| {
            let mut tape = Tape::new();
            let leaves = ps.import_all(&mut tape);
            let x0 = tape.constant(feats.clone());
            let bip = to_bipartite(h);
            let (x, z) = net.forward(&mut tape, &leaves, x0, &bip);
            let y = net.readout(&mut tape, &leaves, x, z);
            tape.data(y)[0]
        };
        let y0 = run(&h, &feats);

        for _ in 0..20 {
            let mut perm: Vec<usize> = (0..8).collect();
            perm.shuffle(&mut rng);
            let mut new_edges: Vec<Vec<usize>> = edges
                .iter()
                .map(|e| {
                    let mut m: Vec<usize> = e.iter().map(|&v| perm[v]).collect();
                    m.sort_unstable();
                    m
                })
                .collect();
            new_edges.shuffle(&mut rng);
            let hp = Hypergraph::new(8, new_edges);
            let mut fdata = vec![0.0; 8 * 6];
            for v in 0..8 {
                fdata[perm[v] * 6..(perm[v] + 1) * 6]
                    .copy_from_slice(&feats.data()[v * 6..(v + 1) * 6]);
            }
            let y1 = run(&hp, &Tensor::new(vec![8, 6], fdata));
            assert!((y0 - y1).abs() <= 1e-10, "drift {}", (y0 - y1).abs());
        }
    }

    #[test]
    fn parameter_gradients_match_finite_differences() {
        let (ps, net) = net(4, 1);
        let h = Hypergraph::new(4, vec![vec![0, 1, 2], vec![2, 3]]);
        let bip = to_bipartite(&h);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let feats = random_features(&mut rng, 4, 4);

        for id in ps.ids() {
            let f = |tape: &mut Tape, point: TensorId| {
                let leaves = ps.import_with_override(tape, id, point);
                let x0 = tape.constant(feats.clone());
                let (x, z) = net.forward(tape, &leaves, x0, &bip);
                let y = net.readout(tape, &leaves, x, z);
                tape.sum_all(y)
            };
            let err = grad_check(f, ps.tensor(id), 1e-5).unwrap();
            assert!(err <= 1e-5, "param {} rel err {err}", ps.name(id));
        }
    }
}
