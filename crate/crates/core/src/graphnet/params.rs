//! Model parameters: five shared MLPs, two trainable initial embeddings,
//! per-receiver attention query maps, and the two readout heads.
//!
//! Tensors are stored at `f32` (the checkpoint precision); [`ModelParams::lift`]
//! widens them for double-precision evaluation. The canonical tensor order
//! defined by [`ModelParams::flat`] is shared by initialization, the
//! optimizer, and the checkpoint format.

use ndarray::{Array2, NdFloat};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// How literal/clause nodes combine incoming messages.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Aggregation {
    /// Arithmetic mean of received value vectors.
    Mean,
    /// Gated sum: each message is kept or rejected independently by a
    /// sigmoid gate between its key and the receiver's query.
    Attention,
}

/// Three-layer perceptron; hidden activations are LeakyReLU, the output
/// activation is chosen by the caller (linear for messages, sigmoid for
/// updates). Weights are input-by-output; biases are single rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<F = f32> {
    pub w1: Array2<F>,
    pub b1: Array2<F>,
    pub w2: Array2<F>,
    pub b2: Array2<F>,
    pub w3: Array2<F>,
    pub b3: Array2<F>,
}

/// Affine map x -> x w + b.
#[derive(Clone, Debug, PartialEq)]
pub struct Affine<F = f32> {
    pub w: Array2<F>,
    pub b: Array2<F>,
}

/// All trainable state plus the architecture constants it is only valid
/// for: embedding width, message-passing iteration count, and aggregation
/// mode. In attention mode the three message MLPs output value and key
/// halves (width 2 * dim) except the negation message, which bypasses
/// aggregation and stays width dim.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<F = f32> {
    pub dim: usize,
    pub iterations: usize,
    pub aggregation: Aggregation,
    pub init_literal: Array2<F>,
    pub init_clause: Array2<F>,
    pub mlp_l2c: Mlp<F>,
    pub mlp_c2l: Mlp<F>,
    pub mlp_l2l: Mlp<F>,
    pub mlp_upd_l: Mlp<F>,
    pub mlp_upd_c: Mlp<F>,
    /// Attention queries for literal / clause receivers; present exactly in
    /// attention mode.
    pub q_l: Option<Affine<F>>,
    pub q_c: Option<Affine<F>>,
    pub head_policy: Affine<F>,
    pub head_sat: Affine<F>,
}

/// Shape and fan-in of one tensor in canonical order.
pub(crate) struct TensorSpec {
    pub rows: usize,
    pub cols: usize,
    pub fan_in: usize,
}

/// The canonical tensor list for a given architecture. Initialization,
/// [`ModelParams::flat`], and the checkpoint format all follow this order.
pub(crate) fn tensor_specs(dim: usize, aggregation: Aggregation) -> Vec<TensorSpec> {
    let spec = |rows, cols, fan_in| TensorSpec { rows, cols, fan_in };
    let msg_out = match aggregation {
        Aggregation::Mean => dim,
        Aggregation::Attention => 2 * dim,
    };
    let mlp = |input: usize, output: usize| {
        vec![
            spec(input, dim, input),
            spec(1, dim, input),
            spec(dim, dim, dim),
            spec(1, dim, dim),
            spec(dim, output, dim),
            spec(1, output, dim),
        ]
    };
    let affine = |input: usize, output: usize| {
        vec![spec(input, output, input), spec(1, output, input)]
    };

    let mut specs = vec![spec(1, dim, dim), spec(1, dim, dim)];
    specs.extend(mlp(dim, msg_out)); // literal -> clause message
    specs.extend(mlp(dim, msg_out)); // clause -> literal message
    specs.extend(mlp(dim, dim)); // literal -> negation message
    specs.extend(mlp(3 * dim, dim)); // literal update
    specs.extend(mlp(2 * dim, dim)); // clause update
    if aggregation == Aggregation::Attention {
        specs.extend(affine(dim, dim)); // q_l
        specs.extend(affine(dim, dim)); // q_c
    }
    specs.extend(affine(dim, 1)); // head_policy
    specs.extend(affine(dim, 1)); // head_sat
    specs
}

fn take<F>(iter: &mut impl Iterator<Item = Array2<F>>) -> Array2<F> {
    iter.next().expect("tensor list matches the spec count")
}

fn take_mlp<F>(iter: &mut impl Iterator<Item = Array2<F>>) -> Mlp<F> {
    Mlp {
        w1: take(iter),
        b1: take(iter),
        w2: take(iter),
        b2: take(iter),
        w3: take(iter),
        b3: take(iter),
    }
}

fn take_affine<F>(iter: &mut impl Iterator<Item = Array2<F>>) -> Affine<F> {
    Affine {
        w: take(iter),
        b: take(iter),
    }
}

/// Build a params struct from tensors listed in canonical order.
pub(crate) fn assemble<F>(
    dim: usize,
    iterations: usize,
    aggregation: Aggregation,
    tensors: Vec<Array2<F>>,
) -> ModelParams<F> {
    let mut iter = tensors.into_iter();
    let init_literal = take(&mut iter);
    let init_clause = take(&mut iter);
    let mlp_l2c = take_mlp(&mut iter);
    let mlp_c2l = take_mlp(&mut iter);
    let mlp_l2l = take_mlp(&mut iter);
    let mlp_upd_l = take_mlp(&mut iter);
    let mlp_upd_c = take_mlp(&mut iter);
    let (q_l, q_c) = if aggregation == Aggregation::Attention {
        (Some(take_affine(&mut iter)), Some(take_affine(&mut iter)))
    } else {
        (None, None)
    };
    let head_policy = take_affine(&mut iter);
    let head_sat = take_affine(&mut iter);
    debug_assert!(iter.next().is_none(), "extra tensors beyond the spec");
    ModelParams {
        dim,
        iterations,
        aggregation,
        init_literal,
        init_clause,
        mlp_l2c,
        mlp_c2l,
        mlp_l2l,
        mlp_upd_l,
        mlp_upd_c,
        q_l,
        q_c,
        head_policy,
        head_sat,
    }
}

impl ModelParams {
    /// Fresh parameters: every tensor element drawn uniformly from
    /// (-1/sqrt(fan_in), 1/sqrt(fan_in)), in canonical tensor order,
    /// row-major within each tensor.
    pub fn init(
        dim: usize,
        iterations: usize,
        aggregation: Aggregation,
        seed: u64,
    ) -> ModelParams {
        assert!(dim >= 1 && iterations >= 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tensors = tensor_specs(dim, aggregation)
            .into_iter()
            .map(|spec| {
                let bound = (spec.fan_in as f32).sqrt().recip();
                Array2::from_shape_fn((spec.rows, spec.cols), |_| {
                    rng.random_range(-bound..bound)
                })
            })
            .collect();
        assemble(dim, iterations, aggregation, tensors)
    }
}

impl<F: NdFloat> ModelParams<F> {
    /// Convert every tensor to another float width.
    pub fn lift<T: NdFloat>(&self) -> ModelParams<T> {
        let cast = |a: &Array2<F>| a.mapv(|x| T::from(x).expect("finite float casts"));
        let tensors = self.flat().into_iter().map(cast).collect();
        assemble(self.dim, self.iterations, self.aggregation, tensors)
    }

    /// All tensors in canonical order: the order used by checkpoints and
    /// by the gradient vectors of `batch_gradients`.
    pub fn flat(&self) -> Vec<&Array2<F>> {
        let mut out: Vec<&Array2<F>> = vec![&self.init_literal, &self.init_clause];
        for mlp in [
            &self.mlp_l2c,
            &self.mlp_c2l,
            &self.mlp_l2l,
            &self.mlp_upd_l,
            &self.mlp_upd_c,
        ] {
            out.extend([&mlp.w1, &mlp.b1, &mlp.w2, &mlp.b2, &mlp.w3, &mlp.b3]);
        }
        for q in [&self.q_l, &self.q_c].into_iter().flatten() {
            out.extend([&q.w, &q.b]);
        }
        out.extend([&self.head_policy.w, &self.head_policy.b]);
        out.extend([&self.head_sat.w, &self.head_sat.b]);
        out
    }

    /// All tensors in canonical order, mutably.
    pub fn flat_mut(&mut self) -> Vec<&mut Array2<F>> {
        let mut out: Vec<&mut Array2<F>> = vec![&mut self.init_literal, &mut self.init_clause];
        for mlp in [
            &mut self.mlp_l2c,
            &mut self.mlp_c2l,
            &mut self.mlp_l2l,
            &mut self.mlp_upd_l,
            &mut self.mlp_upd_c,
        ] {
            out.extend([
                &mut mlp.w1,
                &mut mlp.b1,
                &mut mlp.w2,
                &mut mlp.b2,
                &mut mlp.w3,
                &mut mlp.b3,
            ]);
        }
        for q in [&mut self.q_l, &mut self.q_c].into_iter().flatten() {
            out.extend([&mut q.w, &mut q.b]);
        }
        out.extend([&mut self.head_policy.w, &mut self.head_policy.b]);
        out.extend([&mut self.head_sat.w, &mut self.head_sat.b]);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_order_matches_the_spec_list() {
        for aggregation in [Aggregation::Mean, Aggregation::Attention] {
            let params = ModelParams::init(4, 3, aggregation, 0);
            let specs = tensor_specs(4, aggregation);
            let flat = params.flat();
            assert_eq!(flat.len(), specs.len());
            for (tensor, spec) in flat.iter().zip(&specs) {
                assert_eq!(tensor.nrows(), spec.rows);
                assert_eq!(tensor.ncols(), spec.cols);
            }
        }
    }

    #[test]
    fn attention_mode_widens_message_outputs_and_adds_queries() {
        let mean = ModelParams::init(4, 3, Aggregation::Mean, 0);
        let attention = ModelParams::init(4, 3, Aggregation::Attention, 0);
        assert_eq!(mean.mlp_l2c.w3.ncols(), 4);
        assert_eq!(attention.mlp_l2c.w3.ncols(), 8);
        // The negation message bypasses aggregation and keeps width dim.
        assert_eq!(attention.mlp_l2l.w3.ncols(), 4);
        assert!(mean.q_l.is_none() && mean.q_c.is_none());
        assert!(attention.q_l.is_some() && attention.q_c.is_some());
    }

    #[test]
    fn update_mlps_take_concatenated_inputs() {
        let params = ModelParams::init(5, 2, Aggregation::Mean, 1);
        assert_eq!(params.mlp_upd_l.w1.nrows(), 15);
        assert_eq!(params.mlp_upd_c.w1.nrows(), 10);
    }

    #[test]
    fn init_is_deterministic_and_seed_sensitive() {
        let a = ModelParams::init(4, 3, Aggregation::Attention, 7);
        let b = ModelParams::init(4, 3, Aggregation::Attention, 7);
        let c = ModelParams::init(4, 3, Aggregation::Attention, 8);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn init_respects_fan_in_bounds() {
        let params = ModelParams::init(16, 2, Aggregation::Mean, 3);
        let specs = tensor_specs(16, Aggregation::Mean);
        for (tensor, spec) in params.flat().iter().zip(&specs) {
            let bound = (spec.fan_in as f32).sqrt().recip();
            for &x in tensor.iter() {
                assert!(x.abs() <= bound, "{x} exceeds bound {bound}");
            }
        }
    }

    #[test]
    fn lift_round_trip_preserves_f32_values() {
        let params = ModelParams::init(4, 3, Aggregation::Attention, 5);
        let back: ModelParams = params.lift::<f64>().lift::<f32>();
        assert_eq!(params, back);
    }
}
