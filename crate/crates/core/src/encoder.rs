//! Bidirectional GRU encoder over password characters.
//!
//! Both directions share the character embedding and start from a zero state.
//! Row `t` of the output is the forward state at `t` stacked over the
//! backward state at `t`. No bias terms.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{sigmoid, Matrix, Scalar};

/// One direction's gate weights. `w_*` are `n × m`, `u_*` are `n × n`.
#[derive(Debug, Clone, PartialEq)]
pub struct GruWeights<T> {
    pub w_reset: Matrix<T>,
    pub u_reset: Matrix<T>,
    pub w_update: Matrix<T>,
    pub u_update: Matrix<T>,
    pub w_cand: Matrix<T>,
    pub u_cand: Matrix<T>,
}

impl<T: Scalar> GruWeights<T> {
    pub fn zeros(hidden: usize, embed: usize) -> Self {
        GruWeights {
            w_reset: Matrix::zeros(hidden, embed),
            u_reset: Matrix::zeros(hidden, hidden),
            w_update: Matrix::zeros(hidden, embed),
            u_update: Matrix::zeros(hidden, hidden),
            w_cand: Matrix::zeros(hidden, embed),
            u_cand: Matrix::zeros(hidden, hidden),
        }
    }

    pub fn random<R: Rng + ?Sized>(hidden: usize, embed: usize, scale: f64, rng: &mut R) -> Self {
        GruWeights {
            w_reset: Matrix::random_uniform(hidden, embed, scale, rng),
            u_reset: Matrix::random_uniform(hidden, hidden, scale, rng),
            w_update: Matrix::random_uniform(hidden, embed, scale, rng),
            u_update: Matrix::random_uniform(hidden, hidden, scale, rng),
            w_cand: Matrix::random_uniform(hidden, embed, scale, rng),
            u_cand: Matrix::random_uniform(hidden, hidden, scale, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.u_cand.rows()
    }

    pub(crate) fn tensors(&self) -> [(&'static str, &Matrix<T>); 6] {
        [
            ("w_reset", &self.w_reset),
            ("u_reset", &self.u_reset),
            ("w_update", &self.w_update),
            ("u_update", &self.u_update),
            ("w_cand", &self.w_cand),
            ("u_cand", &self.u_cand),
        ]
    }

    pub(crate) fn tensors_mut(&mut self) -> [&mut Matrix<T>; 6] {
        [
            &mut self.w_reset,
            &mut self.u_reset,
            &mut self.w_update,
            &mut self.u_update,
            &mut self.w_cand,
            &mut self.u_cand,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams<T> {
    /// `m × V_C`, one column per character.
    pub embedding: Matrix<T>,
    pub forward: GruWeights<T>,
    pub backward: GruWeights<T>,
}

impl<T: Scalar> EncoderParams<T> {
    pub fn zeros(chars: usize, embed: usize, hidden: usize) -> Self {
        EncoderParams {
            embedding: Matrix::zeros(embed, chars),
            forward: GruWeights::zeros(hidden, embed),
            backward: GruWeights::zeros(hidden, embed),
        }
    }

    pub fn random<R: Rng + ?Sized>(chars: usize, embed: usize, hidden: usize, scale: f64, rng: &mut R) -> Self {
        EncoderParams {
            embedding: Matrix::random_uniform(embed, chars, scale, rng),
            forward: GruWeights::random(hidden, embed, scale, rng),
            backward: GruWeights::random(hidden, embed, scale, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.forward.hidden()
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.cols()
    }
}

/// `T × 2n` matrix of concatenated hidden states.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderStates<T> {
    pub states: Matrix<T>,
}

impl<T: Scalar> EncoderStates<T> {
    pub fn len(&self) -> usize {
        self.states.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.states.rows() == 0
    }

    pub fn hidden(&self) -> usize {
        self.states.cols() / 2
    }

    pub fn row(&self, t: usize) -> &[T] {
        self.states.row(t)
    }

    pub fn forward_half(&self, t: usize) -> &[T] {
        &self.states.row(t)[..self.hidden()]
    }

    pub fn backward_half(&self, t: usize) -> &[T] {
        &self.states.row(t)[self.hidden()..]
    }
}

/// Activations of one GRU step kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct GruStepCache<T> {
    pub x_index: usize,
    pub x: Vec<T>,
    pub h_prev: Vec<T>,
    pub reset: Vec<T>,
    pub update: Vec<T>,
    pub gated: Vec<T>,
    pub cand: Vec<T>,
}

fn check_index(what: &'static str, index: usize, size: usize) -> Result<()> {
    if index >= size {
        return Err(Error::IndexOutOfRange { what, index, size });
    }
    Ok(())
}

pub fn gru_step<T: Scalar>(
    x_index: usize,
    h_prev: &[T],
    weights: &GruWeights<T>,
    embedding: &Matrix<T>,
) -> Result<Vec<T>> {
    check_index("character vocabulary", x_index, embedding.cols())?;
    if h_prev.len() != weights.hidden() {
        return Err(Error::shape("gru_step h_prev", weights.hidden(), h_prev.len()));
    }
    Ok(gru_step_cached(x_index, h_prev, weights, embedding).0)
}

pub(crate) fn gru_step_cached<T: Scalar>(
    x_index: usize,
    h_prev: &[T],
    weights: &GruWeights<T>,
    embedding: &Matrix<T>,
) -> (Vec<T>, GruStepCache<T>) {
    let n = weights.hidden();
    let x = embedding.column(x_index);
    let mut reset = weights.w_reset.matvec(&x);
    weights.u_reset.matvec_acc(h_prev, &mut reset);
    reset.iter_mut().for_each(|v| *v = sigmoid(*v));
    let mut update = weights.w_update.matvec(&x);
    weights.u_update.matvec_acc(h_prev, &mut update);
    update.iter_mut().for_each(|v| *v = sigmoid(*v));
    let gated: Vec<T> = reset.iter().zip(h_prev).map(|(&r, &h)| r * h).collect();
    let mut cand = weights.w_cand.matvec(&x);
    weights.u_cand.matvec_acc(&gated, &mut cand);
    cand.iter_mut().for_each(|v| *v = v.tanh());
    let mut h = vec![T::zero(); n];
    for i in 0..n {
        h[i] = (T::one() - update[i]) * h_prev[i] + update[i] * cand[i];
    }
    let cache = GruStepCache {
        x_index,
        x,
        h_prev: h_prev.to_vec(),
        reset,
        update,
        gated,
        cand,
    };
    (h, cache)
}

/// Backpropagates `dh` through one step, accumulating weight and embedding
/// gradients; returns the gradient with respect to `h_prev`.
pub(crate) fn gru_step_backward<T: Scalar>(
    cache: &GruStepCache<T>,
    dh: &[T],
    weights: &GruWeights<T>,
    grads: &mut GruWeights<T>,
    embedding_grad: &mut Matrix<T>,
) -> Vec<T> {
    let n = dh.len();
    let one = T::one();
    let mut dh_prev = vec![T::zero(); n];
    let mut d_update = vec![T::zero(); n];
    let mut d_cand = vec![T::zero(); n];
    for i in 0..n {
        let dz = dh[i] * (cache.cand[i] - cache.h_prev[i]);
        d_update[i] = dz * cache.update[i] * (one - cache.update[i]);
        d_cand[i] = dh[i] * cache.update[i] * (one - cache.cand[i] * cache.cand[i]);
        dh_prev[i] = dh[i] * (one - cache.update[i]);
    }
    let mut dx = vec![T::zero(); cache.x.len()];

    grads.w_cand.add_outer(&d_cand, &cache.x);
    weights.w_cand.matvec_t_acc(&d_cand, &mut dx);
    grads.u_cand.add_outer(&d_cand, &cache.gated);
    let mut d_gated = vec![T::zero(); n];
    weights.u_cand.matvec_t_acc(&d_cand, &mut d_gated);

    let mut d_reset = vec![T::zero(); n];
    for i in 0..n {
        dh_prev[i] = dh_prev[i] + d_gated[i] * cache.reset[i];
        let dr = d_gated[i] * cache.h_prev[i];
        d_reset[i] = dr * cache.reset[i] * (one - cache.reset[i]);
    }

    grads.w_update.add_outer(&d_update, &cache.x);
    weights.w_update.matvec_t_acc(&d_update, &mut dx);
    grads.u_update.add_outer(&d_update, &cache.h_prev);
    weights.u_update.matvec_t_acc(&d_update, &mut dh_prev);

    grads.w_reset.add_outer(&d_reset, &cache.x);
    weights.w_reset.matvec_t_acc(&d_reset, &mut dx);
    grads.u_reset.add_outer(&d_reset, &cache.h_prev);
    weights.u_reset.matvec_t_acc(&d_reset, &mut dh_prev);

    embedding_grad.add_to_column(cache.x_index, &dx);
    dh_prev
}

/// Step caches of both directions, each in processing order.
#[derive(Debug, Clone)]
pub(crate) struct EncoderCache<T> {
    pub forward: Vec<GruStepCache<T>>,
    pub backward: Vec<GruStepCache<T>>,
}

pub fn encode<T: Scalar>(password: &[usize], params: &EncoderParams<T>) -> Result<EncoderStates<T>> {
    Ok(encode_cached(password, params)?.0)
}

pub(crate) fn encode_cached<T: Scalar>(
    password: &[usize],
    params: &EncoderParams<T>,
) -> Result<(EncoderStates<T>, EncoderCache<T>)> {
    if password.is_empty() {
        return Err(Error::Empty("password"));
    }
    for &c in password {
        check_index("character vocabulary", c, params.vocab_size())?;
    }
    let n = params.hidden();
    let len = password.len();
    let mut states = Matrix::zeros(len, 2 * n);
    let mut cache = EncoderCache {
        forward: Vec::with_capacity(len),
        backward: Vec::with_capacity(len),
    };

    let mut h = vec![T::zero(); n];
    for (t, &c) in password.iter().enumerate() {
        let (next, step) = gru_step_cached(c, &h, &params.forward, &params.embedding);
        states.row_mut(t)[..n].copy_from_slice(&next);
        cache.forward.push(step);
        h = next;
    }
    let mut h = vec![T::zero(); n];
    for (t, &c) in password.iter().enumerate().rev() {
        let (next, step) = gru_step_cached(c, &h, &params.backward, &params.embedding);
        states.row_mut(t)[n..].copy_from_slice(&next);
        cache.backward.push(step);
        h = next;
    }
    Ok((EncoderStates { states }, cache))
}

/// Accumulates parameter gradients given `d_states` (`T × 2n`).
pub(crate) fn encode_backward<T: Scalar>(
    cache: &EncoderCache<T>,
    d_states: &Matrix<T>,
    params: &EncoderParams<T>,
    grads: &mut EncoderParams<T>,
) {
    let n = params.hidden();
    let len = d_states.rows();

    let mut carry = vec![T::zero(); n];
    for t in (0..len).rev() {
        let mut dh = carry;
        for (d, &g) in dh.iter_mut().zip(&d_states.row(t)[..n]) {
            *d = *d + g;
        }
        carry = gru_step_backward(
            &cache.forward[t],
            &dh,
            &params.forward,
            &mut grads.forward,
            &mut grads.embedding,
        );
    }

    // The backward direction ran t = T-1 .. 0, so its cache index k maps to
    // position len - 1 - k.
    let mut carry = vec![T::zero(); n];
    for k in (0..len).rev() {
        let t = len - 1 - k;
        let mut dh = carry;
        for (d, &g) in dh.iter_mut().zip(&d_states.row(t)[n..]) {
            *d = *d + g;
        }
        carry = gru_step_backward(
            &cache.backward[k],
            &dh,
            &params.backward,
            &mut grads.backward,
            &mut grads.embedding,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::numeric_gradient;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ones(hidden: usize, embed: usize) -> GruWeights<f64> {
        let mut w = GruWeights::zeros(hidden, embed);
        for m in w.tensors_mut() {
            m.fill(1.0);
        }
        w
    }

    #[test]
    fn zero_weights_halve_the_state() {
        let w = GruWeights::<f64>::zeros(3, 2);
        let emb = Matrix::zeros(2, 4);
        let h = gru_step(1, &[0.4, -0.2, 0.9], &w, &emb).unwrap();
        assert_eq!(h, vec![0.2, -0.1, 0.45]);
        let h = gru_step(0, &[0.0; 3], &w, &emb).unwrap();
        assert_eq!(h, vec![0.0; 3]);
    }

    #[test]
    fn scalar_step_reference() {
        // r = z = σ(2) = 0.880797, h̃ = tanh(1 + 0.880797) = 0.9546,
        // h = 0.119203·1 + 0.880797·0.9546 = 0.9600
        let w = ones(1, 1);
        let emb = Matrix::from_vec(1, 1, vec![1.0]).unwrap();
        let h = gru_step(0, &[1.0], &w, &emb).unwrap();
        assert!((h[0] - 0.9600).abs() < 5e-5, "{}", h[0]);
    }

    #[test]
    fn step_rejects_bad_index() {
        let w = GruWeights::<f64>::zeros(2, 2);
        let emb = Matrix::zeros(2, 3);
        assert!(matches!(
            gru_step(3, &[0.0, 0.0], &w, &emb),
            Err(Error::IndexOutOfRange { index: 3, .. })
        ));
        assert!(encode(&[], &EncoderParams::<f64>::zeros(3, 2, 2)).is_err());
    }

    #[test]
    fn single_character_directions_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = EncoderParams::<f64>::random(5, 3, 4, 0.5, &mut rng);
        p.backward = p.forward.clone();
        let h = encode(&[2], &p).unwrap();
        assert_eq!(h.forward_half(0), h.backward_half(0));
    }

    #[test]
    fn palindrome_with_mirrored_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut p = EncoderParams::<f64>::random(4, 3, 3, 0.5, &mut rng);
        p.backward = p.forward.clone();
        let word = [1, 3, 1];
        let h = encode(&word, &p).unwrap();
        // brute force: run both passes by hand with gru_step
        let mut fwd = vec![vec![0.0; 3]];
        for &c in &word {
            let next = gru_step(c, fwd.last().unwrap(), &p.forward, &p.embedding).unwrap();
            fwd.push(next);
        }
        for t in 0..3 {
            assert_eq!(h.forward_half(t), &fwd[t + 1][..]);
            assert_eq!(h.forward_half(t), h.backward_half(2 - t));
        }
    }

    #[test]
    fn zero_params_give_zero_states() {
        let p = EncoderParams::<f64>::zeros(4, 3, 2);
        let h = encode(&[0, 1, 2], &p).unwrap();
        assert!(h.states.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn states_bounded_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = EncoderParams::<f64>::random(6, 4, 5, 3.0, &mut rng);
        let word: Vec<usize> = (0..12).map(|i| (i * 7) % 6).collect();
        let a = encode(&word, &p).unwrap();
        assert!(a.states.as_slice().iter().all(|v| v.abs() < 1.0));
        let b = encode(&word, &p).unwrap();
        assert_eq!(a, b);
    }

    // loss = Σ weights ∘ H, so dH = weights
    fn probe_loss(p: &EncoderParams<f64>, word: &[usize], weights: &Matrix<f64>) -> f64 {
        let h = encode(word, p).unwrap();
        h.states.as_slice().iter().zip(weights.as_slice()).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = EncoderParams::<f64>::random(4, 3, 3, 0.7, &mut rng);
        let word = [0, 3, 1, 3];
        let weights = Matrix::random_uniform(4, 6, 1.0, &mut rng);
        let (_, cache) = encode_cached(&word, &p).unwrap();
        let mut grads = EncoderParams::zeros(4, 3, 3);
        encode_backward(&cache, &weights, &p, &mut grads);

        fn select(q: &mut EncoderParams<f64>, i: usize) -> &mut Matrix<f64> {
            match i {
                0 => &mut q.embedding,
                1..=6 => q.forward.tensors_mut().into_iter().nth(i - 1).unwrap(),
                _ => q.backward.tensors_mut().into_iter().nth(i - 7).unwrap(),
            }
        }
        for i in 0..13usize {
            let name = ["embedding", "forward", "backward"][i.div_ceil(6)];
            let analytic = select(&mut grads, i).clone();
            let base = select(&mut p.clone(), i).clone();
            let numeric = numeric_gradient(
                |m| {
                    let mut q = p.clone();
                    *select(&mut q, i) = m.clone();
                    probe_loss(&q, &word, &weights)
                },
                &base,
                1e-5,
            )
            .unwrap();
            let report = crate::numerics::GradientCheckReport::compare(name, &analytic, &numeric, 1e-4);
            assert!(report.passed, "{report:?}");
        }
    }
}
