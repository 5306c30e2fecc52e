use physiogait_core::Rng;

use super::layers::{BnCache, Dropout, Layer, LayerSpec, LstmCache, MaxPool};
use super::{Param, Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Forward-pass context.
pub struct Ctx<'a> {
    pub mode: Mode,
    pub rng: &'a mut Rng,
    /// The batch is two Siamese halves; dropout masks are shared between them.
    pub tie_halves: bool,
}

/// What one layer saved for its backward pass.
enum Cache<T> {
    Input(Tensor<T>),
    Pool { input_shape: Vec<usize>, argmax: Vec<usize> },
    Norm(BnCache<T>),
    Mask(Vec<T>),
    Lstm { input: Tensor<T>, cache: LstmCache<T> },
    Shape(Vec<usize>),
}

/// Record of a train-mode forward pass. [`Sequential::backward`] takes the tape
/// by value, so replaying it twice is rejected at compile time:
///
/// ```compile_fail
/// # use physiogait_nn::autodiff::{Ctx, LayerSpec, Mode, Sequential, Tensor};
/// # use physiogait_core::Rng;
/// let mut rng = Rng::new(0);
/// let mut net = Sequential::<f64>::new(&[LayerSpec::Dense { out: 2 }], &[3], &mut rng).unwrap();
/// let x = Tensor::zeros(vec![1, 3]);
/// let (y, tape) = net.forward(&x, &mut Ctx { mode: Mode::Train, rng: &mut rng, tie_halves: false }).unwrap();
/// net.backward(tape, &y, false).unwrap();
/// net.backward(tape, &y, false).unwrap(); // tape already consumed
/// ```
pub struct Tape<T> {
    caches: Vec<Cache<T>>,
}

/// A chain of layers with shapes checked at construction.
#[derive(Clone, Debug)]
pub struct Sequential<T> {
    specs: Vec<LayerSpec>,
    input_shape: Vec<usize>,
    output_shape: Vec<usize>,
    layers: Vec<Layer<T>>,
}

impl<T: Scalar> Sequential<T> {
    /// Build for per-sample input shape `input_shape` (batch axis excluded).
    pub fn new(specs: &[LayerSpec], input_shape: &[usize], rng: &mut Rng) -> Result<Self> {
        let mut shape = input_shape.to_vec();
        let mut layers = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            let (layer, out) = Layer::build(i, spec, &shape, rng)?;
            layers.push(layer);
            shape = out;
        }
        Ok(Self { specs: specs.to_vec(), input_shape: input_shape.to_vec(), output_shape: shape, layers })
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        &self.output_shape
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        if x.shape().len() != self.input_shape.len() + 1 || x.shape()[1..] != self.input_shape[..] {
            return Err(Error::ShapeMismatch { layer: 0, expected: format!("[N, {:?}]", self.input_shape), got: x.shape().to_vec() });
        }
        Ok(())
    }

    /// Run the chain. In train mode, batch normalization uses batch statistics
    /// (and updates its running estimates) and dropout draws fresh masks.
    pub fn forward(&mut self, x: &Tensor<T>, ctx: &mut Ctx<'_>) -> Result<(Tensor<T>, Tape<T>)> {
        self.check_input(x)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let (next, cache) = match layer {
                Layer::Conv2d(l) => (l.forward(i, &cur)?, Cache::Input(cur)),
                Layer::MaxPool(l) => {
                    let (y, argmax) = l.forward(i, &cur)?;
                    (y, Cache::Pool { input_shape: cur.shape().to_vec(), argmax })
                }
                Layer::BatchNorm(l) => match ctx.mode {
                    Mode::Train => {
                        let (y, c) = l.forward_train(i, &cur)?;
                        l.update_running(&c);
                        (y, Cache::Norm(c))
                    }
                    Mode::Eval => (l.forward_eval(i, &cur)?, Cache::Shape(vec![])),
                },
                Layer::Dropout(l) => match ctx.mode {
                    Mode::Train if l.p > 0.0 => {
                        let mask = l.mask::<T>(cur.batch(), cur.sample_len(), ctx.tie_halves, ctx.rng);
                        (Dropout::apply(&cur, &mask), Cache::Mask(mask))
                    }
                    _ => (cur, Cache::Shape(vec![])),
                },
                Layer::Dense(l) => (l.forward(i, &cur)?, Cache::Input(cur)),
                Layer::Lstm(l) => {
                    let (y, cache) = l.forward(i, &cur)?;
                    (y, Cache::Lstm { input: cur, cache })
                }
                Layer::Relu => {
                    let mut y = cur;
                    let mask = super::layers::relu(&mut y);
                    (y, Cache::Mask(mask))
                }
                Layer::Flatten => {
                    let shape = cur.shape().to_vec();
                    let n = shape[0];
                    let f = cur.sample_len();
                    (cur.reshape(vec![n, f])?, Cache::Shape(shape))
                }
            };
            caches.push(cache);
            cur = next;
        }
        if ctx.mode == Mode::Eval {
            caches.clear();
        }
        Ok((cur, Tape { caches }))
    }

    /// Eval-mode forward pass without a tape; usable through a shared reference.
    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let mut cur = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            cur = match layer {
                Layer::Conv2d(l) => l.forward(i, &cur)?,
                Layer::MaxPool(l) => l.forward(i, &cur)?.0,
                Layer::BatchNorm(l) => l.forward_eval(i, &cur)?,
                Layer::Dropout(_) => cur,
                Layer::Relu => {
                    let mut y = cur;
                    super::layers::relu(&mut y);
                    y
                }
                Layer::Dense(l) => l.forward(i, &cur)?,
                Layer::Lstm(l) => l.forward(i, &cur)?.0,
                Layer::Flatten => {
                    let n = cur.batch();
                    let f = cur.sample_len();
                    cur.reshape(vec![n, f])?
                }
            };
        }
        Ok(cur)
    }

    /// Accumulate parameter gradients for output gradient `dy`. Returns the
    /// input gradient when `need_input_grad` is set (skipping it saves the most
    /// expensive product of a leading convolution).
    pub fn backward(&mut self, tape: Tape<T>, dy: &Tensor<T>, need_input_grad: bool) -> Result<Option<Tensor<T>>> {
        if tape.caches.len() != self.layers.len() {
            return Err(Error::EvalTape);
        }
        let mut grad = dy.clone();
        let n_layers = self.layers.len();
        for (i, (layer, cache)) in self.layers.iter_mut().zip(tape.caches).enumerate().rev() {
            let need = need_input_grad || i > 0;
            let next = match (layer, cache) {
                (Layer::Conv2d(l), Cache::Input(x)) => l.backward(&x, &grad, need),
                (Layer::MaxPool(_), Cache::Pool { input_shape, argmax }) => Some(MaxPool::backward(&input_shape, &argmax, &grad)),
                (Layer::BatchNorm(l), Cache::Norm(c)) => Some(l.backward(&c, &grad)),
                (Layer::Dropout(_), Cache::Mask(m)) => Some(Dropout::apply(&grad, &m)),
                (Layer::Dropout(_), Cache::Shape(_)) => Some(grad),
                (Layer::Relu, Cache::Mask(m)) => Some(Dropout::apply(&grad, &m)),
                (Layer::Dense(l), Cache::Input(x)) => l.backward(&x, &grad, need),
                (Layer::Lstm(l), Cache::Lstm { input, cache }) => l.backward(&input, &cache, &grad, need),
                (Layer::Flatten, Cache::Shape(s)) => Some(grad.reshape(s)?),
                _ => return Err(Error::EvalTape),
            };
            match next {
                Some(g) => grad = g,
                None => {
                    debug_assert_eq!(i, 0, "only the first of {n_layers} layers may skip its input gradient");
                    return Ok(None);
                }
            }
        }
        Ok(need_input_grad.then_some(grad))
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn n_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}
