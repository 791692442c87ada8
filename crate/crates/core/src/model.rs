//! The complete encoder-decoder parameter set and sequence-level
//! forward/backward passes.

use rand::Rng;

use crate::corpus::{BOS_ID, PAD_ID};
use crate::decoder::{
    attend_backward, attend_with_keys, attention_keys, decoder_step_backward, decoder_step_cached,
    init_state, readout_backward, readout_cached, AttendCache, AttentionParams, DecoderGruCache,
    DecoderParams, DecoderStep, ReadoutCache, ReadoutParams,
};
use crate::encoder::{encode_backward, encode_cached, EncoderCache, EncoderParams, EncoderStates};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Scalar};

/// Vocabulary sizes and layer widths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Dims {
    /// Character vocabulary size.
    pub chars: usize,
    /// Word vocabulary size, reserved symbols included.
    pub words: usize,
    pub embed: usize,
    pub hidden: usize,
    pub attn: usize,
    pub maxout: usize,
}

impl Dims {
    pub fn as_array(&self) -> [usize; 6] {
        [self.chars, self.words, self.embed, self.hidden, self.attn, self.maxout]
    }

    pub fn from_array(a: [usize; 6]) -> Self {
        Dims {
            chars: a[0],
            words: a[1],
            embed: a[2],
            hidden: a[3],
            attn: a[4],
            maxout: a[5],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.as_array().contains(&0) {
            return Err(Error::Config(format!("all dims must be positive: {self:?}")));
        }
        if self.words <= PAD_ID {
            return Err(Error::Config(format!(
                "word vocabulary needs room for the reserved symbols, got {}",
                self.words
            )));
        }
        Ok(())
    }
}

/// Default initialisation half-width.
pub const INIT_SCALE: f64 = 0.08;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub encoder: EncoderParams<T>,
    pub attention: AttentionParams<T>,
    pub decoder: DecoderParams<T>,
    pub readout: ReadoutParams<T>,
}

/// Number of named parameter tensors.
pub const PARAM_TENSORS: usize = 31;

impl<T: Scalar> ModelParams<T> {
    pub fn zeros(d: Dims) -> Self {
        ModelParams {
            encoder: EncoderParams::zeros(d.chars, d.embed, d.hidden),
            attention: AttentionParams::zeros(d.attn, d.hidden),
            decoder: DecoderParams::zeros(d.words, d.embed, d.hidden),
            readout: ReadoutParams::zeros(d.words, d.embed, d.hidden, d.maxout),
        }
    }

    pub fn random<R: Rng + ?Sized>(d: Dims, scale: f64, rng: &mut R) -> Self {
        ModelParams {
            encoder: EncoderParams::random(d.chars, d.embed, d.hidden, scale, rng),
            attention: AttentionParams::random(d.attn, d.hidden, scale, rng),
            decoder: DecoderParams::random(d.words, d.embed, d.hidden, scale, rng),
            readout: ReadoutParams::random(d.words, d.embed, d.hidden, d.maxout, scale, rng),
        }
    }

    pub fn dims(&self) -> Dims {
        Dims {
            chars: self.encoder.embedding.cols(),
            words: self.decoder.embedding.cols(),
            embed: self.encoder.embedding.rows(),
            hidden: self.encoder.hidden(),
            attn: self.attention.v.rows(),
            maxout: self.readout.maxout_width(),
        }
    }

    /// Every tensor with its canonical name, in checkpoint order.
    pub fn tensors(&self) -> Vec<(String, &Matrix<T>)> {
        let mut out: Vec<(String, &Matrix<T>)> = vec![("encoder.embedding".into(), &self.encoder.embedding)];
        for (dir, w) in [("forward", &self.encoder.forward), ("backward", &self.encoder.backward)] {
            for (name, m) in w.tensors() {
                out.push((format!("encoder.{dir}.{name}"), m));
            }
        }
        let a = &self.attention;
        out.extend([
            ("attention.v".into(), &a.v),
            ("attention.w".into(), &a.w),
            ("attention.u".into(), &a.u),
        ]);
        let d = &self.decoder;
        out.extend([
            ("decoder.embedding".into(), &d.embedding),
            ("decoder.w_cand".into(), &d.w_cand),
            ("decoder.w_update".into(), &d.w_update),
            ("decoder.w_reset".into(), &d.w_reset),
            ("decoder.u_cand".into(), &d.u_cand),
            ("decoder.u_update".into(), &d.u_update),
            ("decoder.u_reset".into(), &d.u_reset),
            ("decoder.c_cand".into(), &d.c_cand),
            ("decoder.c_update".into(), &d.c_update),
            ("decoder.c_reset".into(), &d.c_reset),
            ("decoder.w_init".into(), &d.w_init),
        ]);
        let r = &self.readout;
        out.extend([
            ("readout.u_out".into(), &r.u_out),
            ("readout.v_out".into(), &r.v_out),
            ("readout.c_out".into(), &r.c_out),
            ("readout.w_out".into(), &r.w_out),
        ]);
        out
    }

    /// Mutable tensors in the same order as [`ModelParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix<T>> {
        let mut out: Vec<&mut Matrix<T>> = vec![&mut self.encoder.embedding];
        out.extend(self.encoder.forward.tensors_mut());
        out.extend(self.encoder.backward.tensors_mut());
        let a = &mut self.attention;
        out.extend([&mut a.v, &mut a.w, &mut a.u]);
        let d = &mut self.decoder;
        out.extend([
            &mut d.embedding,
            &mut d.w_cand,
            &mut d.w_update,
            &mut d.w_reset,
            &mut d.u_cand,
            &mut d.u_update,
            &mut d.u_reset,
            &mut d.c_cand,
            &mut d.c_update,
            &mut d.c_reset,
            &mut d.w_init,
        ]);
        let r = &mut self.readout;
        out.extend([&mut r.u_out, &mut r.v_out, &mut r.c_out, &mut r.w_out]);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, m)| m.is_finite())
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, m)| m.len()).sum()
    }

    pub fn convert<U: Scalar>(&self) -> ModelParams<U> {
        let mut out = ModelParams::<U>::zeros(self.dims());
        for (dst, (_, src)) in out.tensors_mut().into_iter().zip(self.tensors()) {
            *dst = src.convert();
        }
        out
    }

    /// Expected shape of every tensor for `d`, in canonical order.
    pub fn expected_shapes(d: Dims) -> Vec<(usize, usize)> {
        ModelParams::<T>::zeros(d)
            .tensors()
            .iter()
            .map(|(_, m)| m.shape())
            .collect()
    }

    pub fn validate_shapes(&self, d: Dims) -> Result<()> {
        for ((name, m), expect) in self.tensors().iter().zip(Self::expected_shapes(d)) {
            if m.shape() != expect {
                return Err(Error::DimMismatch(format!(
                    "{name} is {:?}, dims {d:?} need {expect:?}",
                    m.shape()
                )));
            }
        }
        Ok(())
    }
}

/// A password run through the encoder, ready for step-by-step decoding.
#[derive(Debug, Clone)]
pub struct EncodedSource<'a, T> {
    params: &'a ModelParams<T>,
    pub states: EncoderStates<T>,
    keys: Matrix<T>,
}

impl<'a, T: Scalar> EncodedSource<'a, T> {
    pub fn new(params: &'a ModelParams<T>, password: &[usize]) -> Result<Self> {
        let (states, _) = encode_cached(password, &params.encoder)?;
        let keys = attention_keys(&states.states, &params.attention);
        Ok(EncodedSource { params, states, keys })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn initial_state(&self) -> Vec<T> {
        init_state(&self.states, &self.params.decoder.w_init).expect("non-empty source")
    }

    /// Attention, state update and next-word log-distribution for one step.
    pub fn step(&self, s_prev: &[T], y_prev: usize) -> DecoderStep<T> {
        let p = self.params;
        let att = attend_with_keys(s_prev, &self.states.states, &self.keys, &p.attention);
        let (state, gru) = decoder_step_cached(s_prev, y_prev, &att.context, &p.decoder);
        let out = readout_cached(&state, &gru.x, &att.context, &p.readout);
        DecoderStep {
            state,
            alpha: att.alpha,
            context: att.context,
            log_probs: out.log_probs,
        }
    }

    /// Teacher-forced log-probability of `tokens` following `<s>`.
    pub fn sequence_log_prob(&self, tokens: &[usize]) -> T {
        let mut s = self.initial_state();
        let mut prev = BOS_ID;
        let mut total = T::zero();
        for &y in tokens {
            let step = self.step(&s, prev);
            total = total + step.log_probs[y];
            s = step.state;
            prev = y;
        }
        total
    }
}

/// Inverted dropout masks for one example.
#[derive(Debug, Clone)]
pub(crate) struct DropoutMasks<T> {
    pub states: Matrix<T>,
    pub decoder: Vec<Vec<T>>,
}

impl<T: Scalar> DropoutMasks<T> {
    pub fn sample<R: Rng + ?Sized>(rate: f64, len: usize, steps: usize, hidden: usize, rng: &mut R) -> Self {
        let keep = T::from_f64_lossy(1.0 / (1.0 - rate));
        let mut draw = |n: usize| -> Vec<T> {
            (0..n)
                .map(|_| if rng.gen::<f64>() < rate { T::zero() } else { keep })
                .collect()
        };
        let states = Matrix::from_vec(len, 2 * hidden, draw(len * 2 * hidden)).expect("sized");
        let decoder = (0..steps).map(|_| draw(hidden)).collect();
        DropoutMasks { states, decoder }
    }
}

#[derive(Debug, Clone)]
struct StepCache<T> {
    s_prev: Vec<T>,
    attend: AttendCache<T>,
    gru: DecoderGruCache<T>,
    dropped_state: Vec<T>,
    readout: ReadoutCache<T>,
    target: usize,
}

/// Activations of one teacher-forced example.
#[derive(Debug, Clone)]
pub(crate) struct ExampleCache<T> {
    encoder: EncoderCache<T>,
    raw_states: EncoderStates<T>,
    /// Encoder states after dropout, as seen by attention.
    states: Matrix<T>,
    s0: Vec<T>,
    steps: Vec<StepCache<T>>,
    masks: Option<DropoutMasks<T>>,
}

/// Teacher-forced forward pass. `targets` is the bracketed sequence; the
/// decoder predicts `targets[1..]` from `targets[..len-1]`. Returns the summed
/// negative log-likelihood and the activations.
pub(crate) fn example_forward<T: Scalar>(
    params: &ModelParams<T>,
    password: &[usize],
    targets: &[usize],
    masks: Option<DropoutMasks<T>>,
) -> Result<(f64, ExampleCache<T>)> {
    if targets.len() < 2 {
        return Err(Error::shape("targets", "at least <s> and one token", targets.len()));
    }
    let words = params.decoder.vocab_size();
    if let Some(&bad) = targets.iter().find(|&&y| y >= words) {
        return Err(Error::IndexOutOfRange {
            what: "word vocabulary",
            index: bad,
            size: words,
        });
    }
    let (raw_states, encoder) = encode_cached(password, &params.encoder)?;
    let mut states = raw_states.states.clone();
    if let Some(m) = &masks {
        for (v, &k) in states.as_mut_slice().iter_mut().zip(m.states.as_slice()) {
            *v = *v * k;
        }
    }
    let keys = attention_keys(&states, &params.attention);
    let s0 = init_state(&raw_states, &params.decoder.w_init)?;

    let mut loss = 0.0;
    let mut steps = Vec::with_capacity(targets.len() - 1);
    let mut s_prev = s0.clone();
    for (j, pair) in targets.windows(2).enumerate() {
        let (y_prev, y) = (pair[0], pair[1]);
        let attend = attend_with_keys(&s_prev, &states, &keys, &params.attention);
        let (state, gru) = decoder_step_cached(&s_prev, y_prev, &attend.context, &params.decoder);
        let dropped_state = match &masks {
            Some(m) => state.iter().zip(&m.decoder[j]).map(|(&a, &b)| a * b).collect(),
            None => state.clone(),
        };
        let readout = readout_cached(&dropped_state, &gru.x, &attend.context, &params.readout);
        let lp = readout.log_probs[y];
        loss -= lp.to_f64().unwrap_or(f64::NAN);
        steps.push(StepCache {
            s_prev: std::mem::replace(&mut s_prev, state),
            attend,
            gru,
            dropped_state,
            readout,
            target: y,
        });
    }
    Ok((
        loss,
        ExampleCache {
            encoder,
            raw_states,
            states,
            s0,
            steps,
            masks,
        },
    ))
}

/// Accumulates `scale · ∂(summed NLL)/∂θ` into `grads`.
pub(crate) fn example_backward<T: Scalar>(
    cache: &ExampleCache<T>,
    params: &ModelParams<T>,
    scale: T,
    grads: &mut ModelParams<T>,
) {
    let len = cache.states.rows();
    let width = cache.states.cols();
    let attn = params.attention.v.rows();
    let mut d_states = Matrix::zeros(len, width);
    let mut d_keys = Matrix::zeros(len, attn);
    let mut ds_next = vec![T::zero(); params.decoder.hidden()];

    for (j, step) in cache.steps.iter().enumerate().rev() {
        let mut d_logits: Vec<T> = step.readout.log_probs.iter().map(|&lp| lp.exp() * scale).collect();
        d_logits[step.target] = d_logits[step.target] - scale;
        let (d_dropped, d_x, mut d_context) = readout_backward(
            &step.readout,
            &d_logits,
            &step.dropped_state,
            &step.gru.x,
            &step.attend.context,
            &params.readout,
            &mut grads.readout,
        );
        grads.decoder.embedding.add_to_column(step.gru.y_prev, &d_x);

        let mut ds = d_dropped;
        if let Some(m) = &cache.masks {
            ds.iter_mut().zip(&m.decoder[j]).for_each(|(d, &k)| *d = *d * k);
        }
        ds.iter_mut().zip(&ds_next).for_each(|(d, &n)| *d = *d + n);
        let (mut ds_prev, dc_gru) = decoder_step_backward(&step.gru, &ds, &params.decoder, &mut grads.decoder);
        d_context.iter_mut().zip(&dc_gru).for_each(|(d, &g)| *d = *d + g);

        let ds_att = attend_backward(
            &step.attend,
            &step.s_prev,
            &cache.states,
            &d_context,
            &params.attention,
            &mut grads.attention,
            &mut d_keys,
            &mut d_states,
        );
        ds_prev.iter_mut().zip(&ds_att).for_each(|(d, &a)| *d = *d + a);
        ds_next = ds_prev;
    }

    // keys = U_a · (dropped states)
    for t in 0..len {
        grads.attention.u.add_outer(d_keys.row(t), cache.states.row(t));
        params.attention.u.matvec_t_acc(d_keys.row(t), d_states.row_mut(t));
    }
    if let Some(m) = &cache.masks {
        for (d, &k) in d_states.as_mut_slice().iter_mut().zip(m.states.as_slice()) {
            *d = *d * k;
        }
    }

    // s_0 = tanh(W_s · backward half of row 0), taken before dropout
    let n = params.decoder.hidden();
    let d_pre: Vec<T> = ds_next
        .iter()
        .zip(&cache.s0)
        .map(|(&d, &s)| d * (T::one() - s * s))
        .collect();
    grads.decoder.w_init.add_outer(&d_pre, cache.raw_states.backward_half(0));
    params.decoder.w_init.matvec_t_acc(&d_pre, &mut d_states.row_mut(0)[n..]);

    encode_backward(&cache.encoder, &d_states, &params.encoder, &mut grads.encoder);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> Dims {
        Dims { chars: 4, words: 5, embed: 3, hidden: 3, attn: 3, maxout: 3 }
    }

    #[test]
    fn tensor_inventory() {
        let p = ModelParams::<f64>::zeros(tiny());
        let names: Vec<String> = p.tensors().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names.len(), PARAM_TENSORS);
        let mut dedup = names.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), names.len());
        assert_eq!(p.dims(), tiny());
    }

    #[test]
    fn shapes_follow_dims() {
        let d = Dims { chars: 7, words: 9, embed: 2, hidden: 5, attn: 4, maxout: 3 };
        let p = ModelParams::<f32>::zeros(d);
        p.validate_shapes(d).unwrap();
        assert_eq!(p.encoder.embedding.shape(), (2, 7));
        assert_eq!(p.attention.u.shape(), (4, 10));
        assert_eq!(p.decoder.c_cand.shape(), (5, 10));
        assert_eq!(p.readout.u_out.shape(), (6, 5));
        assert_eq!(p.readout.w_out.shape(), (9, 3));
        assert!(p.validate_shapes(Dims { hidden: 4, ..d }).is_err());
    }

    #[test]
    fn step_matches_teacher_forced_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = ModelParams::<f64>::random(tiny(), 0.6, &mut rng);
        let password = [1, 0, 3];
        let targets = [BOS_ID, 4, 4, 1];
        let (loss, _) = example_forward(&p, &password, &targets, None).unwrap();
        let src = EncodedSource::new(&p, &password).unwrap();
        let lp = src.sequence_log_prob(&targets[1..]);
        assert!((loss + lp).abs() < 1e-12);
    }

    #[test]
    fn convert_round_trip_is_exact_for_f32_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let p = ModelParams::<f32>::random(tiny(), 0.08, &mut rng);
        assert_eq!(p.convert::<f64>().convert::<f32>(), p);
    }
}
