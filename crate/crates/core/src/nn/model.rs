use rand::Rng;

use super::layer::{
    batch_norm_apply, batch_norm_backward, column_moments, linear_backward, linear_forward,
    validate_rate, Layer, LayerCache, LayerSpec, BN_EPS, BN_MOMENTUM,
};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    Train,
    #[default]
    Eval,
}

/// A feedforward network over the fixed layer set of [`LayerSpec`].
///
/// In [`Mode::Train`] batch norm uses batch statistics (and folds them into the running
/// statistics) and dropout samples a fresh mask. In [`Mode::Eval`] both are deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<Layer>,
    mode: Mode,
    input_dim: usize,
    output_dim: usize,
    // Bumped whenever parameters may have been mutated; caches record it.
    version: u64,
}

/// Activations recorded by [`MlpModel::forward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    version: u64,
    mode: Mode,
    batch: usize,
    entries: Vec<LayerCache>,
}

impl ForwardCache {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

/// Gradients for every trainable parameter, in [`MlpModel::params`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub grads: Vec<Matrix>,
}

impl Gradients {
    pub fn max_abs(&self) -> f64 {
        self.grads.iter().fold(0.0, |m, g| m.max(g.max_abs()))
    }
}

/// Checks that the layer list chains and builds a model with He-initialised weights.
pub fn init_model(spec: &[LayerSpec], seed: u64) -> Result<MlpModel> {
    let mut rng = rng::stream(seed, "init");
    let mut width: Option<usize> = None;
    let mut input_dim = None;
    let mut layers = Vec::with_capacity(spec.len());
    for (k, s) in spec.iter().enumerate() {
        match *s {
            LayerSpec::Linear { inputs, outputs } => {
                if inputs == 0 || outputs == 0 {
                    return Err(Error::shape("init_model", "nonzero linear dims", format!("layer {k}: {inputs}->{outputs}")));
                }
                if let Some(w) = width {
                    if w != inputs {
                        return Err(Error::shape(
                            "init_model",
                            format!("layer {k} input width {w}"),
                            inputs,
                        ));
                    }
                }
                input_dim.get_or_insert(inputs);
                width = Some(outputs);
                layers.push(Layer::linear(inputs, outputs, &mut rng));
            }
            LayerSpec::BatchNorm { width: bw } => {
                if let Some(w) = width {
                    if w != bw {
                        return Err(Error::shape(
                            "init_model",
                            format!("layer {k} batch norm width {w}"),
                            bw,
                        ));
                    }
                }
                input_dim.get_or_insert(bw);
                width = Some(bw);
                layers.push(Layer::batch_norm(bw));
            }
            LayerSpec::Relu => layers.push(Layer::Relu),
            LayerSpec::Dropout { rate } => {
                validate_rate(rate)?;
                layers.push(Layer::Dropout { rate });
            }
        }
    }
    // Width-agnostic stacks (only ReLU / dropout) take their width from the first input.
    let dims = input_dim.zip(width);
    let (input_dim, output_dim) = dims.unwrap_or((0, 0));
    Ok(MlpModel {
        layers,
        mode: Mode::Eval,
        input_dim,
        output_dim,
        version: 0,
    })
}

impl MlpModel {
    /// Assembles a model from explicit layers.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        let spec: Vec<LayerSpec> = layers.iter().map(Layer::spec).collect();
        let mut model = init_model(&spec, 0)?;
        model.layers = layers;
        for l in &model.layers {
            if let Layer::BatchNorm { running_var, .. } = l {
                if running_var.data().iter().any(|v| !(*v > 0.0)) {
                    return Err(Error::InvalidArgument(
                        "running variance must be positive".into(),
                    ));
                }
            }
        }
        Ok(model)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        self.version += 1;
        &mut self.layers
    }

    pub fn spec(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    /// Input width; 0 for stacks without Linear or BatchNorm layers.
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn has_batch_norm(&self) -> bool {
        self.layers
            .iter()
            .any(|l| matches!(l, Layer::BatchNorm { .. }))
    }

    pub fn has_dropout(&self) -> bool {
        self.layers
            .iter()
            .any(|l| matches!(l, Layer::Dropout { rate } if *rate > 0.0))
    }

    pub fn params(&self) -> Vec<&Matrix> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        self.version += 1;
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if self.input_dim != 0 && x.cols() != self.input_dim {
            return Err(Error::shape("forward", format!("{} input columns", self.input_dim), x.cols()));
        }
        if x.rows() == 0 {
            return Err(Error::InvalidArgument("forward on an empty batch".into()));
        }
        Ok(())
    }

    /// Runs the network in the current mode.
    ///
    /// Train mode requires `rng` when any dropout layer is active and at least two rows when
    /// batch norm is present. Running statistics are updated in train mode.
    pub fn forward<R: Rng + ?Sized>(
        &mut self,
        x: &Matrix,
        mut rng: Option<&mut R>,
    ) -> Result<(Matrix, ForwardCache)> {
        self.check_input(x)?;
        let train = self.mode == Mode::Train;
        if train && self.has_batch_norm() && x.rows() < 2 {
            return Err(Error::DegenerateBatch(x.rows()));
        }
        if train && self.has_dropout() && rng.is_none() {
            return Err(Error::InvalidArgument(
                "train-mode forward with dropout needs a random stream".into(),
            ));
        }
        let mut entries = Vec::with_capacity(self.layers.len());
        let mut a = x.clone();
        for layer in &mut self.layers {
            match layer {
                Layer::Linear { w, b } => {
                    let out = linear_forward(w, b, &a)?;
                    entries.push(LayerCache::Linear { input: a });
                    a = out;
                }
                Layer::BatchNorm {
                    gamma,
                    beta,
                    running_mean,
                    running_var,
                } => {
                    let (y, cache) = if train {
                        let (mean, var) = column_moments(&a);
                        let inv_std: Vec<f64> =
                            var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
                        let (y, x_hat) = batch_norm_apply(&a, &mean, &inv_std, gamma, beta);
                        let n = a.rows() as f64;
                        let unbias = n / (n - 1.0);
                        for (j, (m, v)) in mean.iter().zip(&var).enumerate() {
                            let rm = &mut running_mean.data_mut()[j];
                            *rm = BN_MOMENTUM * *rm + (1.0 - BN_MOMENTUM) * m;
                            let rv = &mut running_var.data_mut()[j];
                            *rv = BN_MOMENTUM * *rv + (1.0 - BN_MOMENTUM) * v * unbias;
                        }
                        (
                            y,
                            LayerCache::BatchNorm {
                                x_hat,
                                inv_std,
                                batch_stats: true,
                            },
                        )
                    } else {
                        eval_batch_norm(&a, gamma, beta, running_mean, running_var)
                    };
                    entries.push(cache);
                    a = y;
                }
                Layer::Relu => {
                    a.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
                    entries.push(LayerCache::Relu { output: a.clone() });
                }
                Layer::Dropout { rate } => {
                    let rate = *rate;
                    if train && rate > 0.0 {
                        let rng = rng.as_deref_mut().expect("checked above");
                        let keep = 1.0 / (1.0 - rate);
                        let mask = a.map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep });
                        apply_mask(&mut a, &mask);
                        entries.push(LayerCache::Dropout { mask: Some(mask) });
                    } else {
                        entries.push(LayerCache::Dropout { mask: None });
                    }
                }
            }
        }
        if !a.is_finite() {
            return Err(Error::NonFinite("forward"));
        }
        Ok((
            a,
            ForwardCache {
                version: self.version,
                mode: self.mode,
                batch: x.rows(),
                entries,
            },
        ))
    }

    /// Train-mode forward that reuses the dropout masks of `cache` and leaves the running
    /// statistics untouched. Used for finite-difference checks.
    pub fn forward_replay(&self, x: &Matrix, cache: &ForwardCache) -> Result<Matrix> {
        Ok(self.replay(x, cache)?.0)
    }

    /// Smallest `|pre-activation|` entering any ReLU on the replayed pass.
    pub(crate) fn relu_margin(&self, x: &Matrix, cache: &ForwardCache) -> Result<f64> {
        Ok(self.replay(x, cache)?.1)
    }

    fn replay(&self, x: &Matrix, cache: &ForwardCache) -> Result<(Matrix, f64)> {
        self.check_input(x)?;
        let mut margin = f64::INFINITY;
        if cache.entries.len() != self.layers.len() || cache.batch != x.rows() {
            return Err(Error::StaleCache("layer count or batch size differs"));
        }
        let batch_stats = cache.mode == Mode::Train;
        let mut a = x.clone();
        for (layer, entry) in self.layers.iter().zip(&cache.entries) {
            match layer {
                Layer::Linear { w, b } => a = linear_forward(w, b, &a)?,
                Layer::BatchNorm {
                    gamma,
                    beta,
                    running_mean,
                    running_var,
                } => {
                    a = if batch_stats {
                        let (mean, var) = column_moments(&a);
                        let inv_std: Vec<f64> =
                            var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
                        batch_norm_apply(&a, &mean, &inv_std, gamma, beta).0
                    } else {
                        eval_batch_norm(&a, gamma, beta, running_mean, running_var).0
                    };
                }
                Layer::Relu => a.data_mut().iter_mut().for_each(|v| {
                    margin = margin.min(v.abs());
                    *v = v.max(0.0)
                }),
                Layer::Dropout { .. } => match entry {
                    LayerCache::Dropout { mask: Some(mask) } => apply_mask(&mut a, mask),
                    LayerCache::Dropout { mask: None } => {}
                    _ => return Err(Error::StaleCache("layer kinds differ")),
                },
            }
        }
        Ok((a, margin))
    }

    /// Deterministic evaluation-mode forward regardless of the current mode.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let mut a = x.clone();
        for layer in &self.layers {
            match layer {
                Layer::Linear { w, b } => a = linear_forward(w, b, &a)?,
                Layer::BatchNorm {
                    gamma,
                    beta,
                    running_mean,
                    running_var,
                } => a = eval_batch_norm(&a, gamma, beta, running_mean, running_var).0,
                Layer::Relu => a.data_mut().iter_mut().for_each(|v| *v = v.max(0.0)),
                Layer::Dropout { .. } => {}
            }
        }
        if !a.is_finite() {
            return Err(Error::NonFinite("predict"));
        }
        Ok(a)
    }

    /// Gradients of the loss with respect to every parameter, given `d loss / d output`.
    pub fn backward(&self, cache: &ForwardCache, dy: &Matrix) -> Result<Gradients> {
        if cache.version != self.version {
            return Err(Error::StaleCache("parameters changed since the forward pass"));
        }
        if cache.entries.len() != self.layers.len() {
            return Err(Error::StaleCache("layer count differs"));
        }
        if dy.rows() != cache.batch || dy.cols() != self.output_dim {
            return Err(Error::shape(
                "backward",
                format!("{}x{}", cache.batch, self.output_dim),
                format!("{}x{}", dy.rows(), dy.cols()),
            ));
        }
        let mut rev: Vec<Matrix> = Vec::new();
        let mut g = dy.clone();
        for (layer, entry) in self.layers.iter().zip(&cache.entries).rev() {
            match (layer, entry) {
                (Layer::Linear { w, .. }, LayerCache::Linear { input }) => {
                    let (dx, dw, db) = linear_backward(w, input, &g)?;
                    rev.push(db);
                    rev.push(dw);
                    g = dx;
                }
                (
                    Layer::BatchNorm { gamma, .. },
                    LayerCache::BatchNorm {
                        x_hat,
                        inv_std,
                        batch_stats,
                    },
                ) => {
                    let (dx, dgamma, dbeta) =
                        batch_norm_backward(gamma, x_hat, inv_std, *batch_stats, &g);
                    rev.push(dbeta);
                    rev.push(dgamma);
                    g = dx;
                }
                (Layer::Relu, LayerCache::Relu { output }) => {
                    for (gv, o) in g.data_mut().iter_mut().zip(output.data()) {
                        if *o <= 0.0 {
                            *gv = 0.0;
                        }
                    }
                }
                (Layer::Dropout { .. }, LayerCache::Dropout { mask }) => {
                    if let Some(mask) = mask {
                        apply_mask(&mut g, mask);
                    }
                }
                _ => return Err(Error::StaleCache("layer kinds differ")),
            }
        }
        rev.reverse();
        Ok(Gradients { grads: rev })
    }
}

fn eval_batch_norm(
    a: &Matrix,
    gamma: &Matrix,
    beta: &Matrix,
    running_mean: &Matrix,
    running_var: &Matrix,
) -> (Matrix, LayerCache) {
    let inv_std: Vec<f64> = running_var
        .data()
        .iter()
        .map(|v| 1.0 / (v + BN_EPS).sqrt())
        .collect();
    let (y, x_hat) = batch_norm_apply(a, running_mean.data(), &inv_std, gamma, beta);
    (
        y,
        LayerCache::BatchNorm {
            x_hat,
            inv_std,
            batch_stats: false,
        },
    )
}

fn apply_mask(a: &mut Matrix, mask: &Matrix) {
    for (v, m) in a.data_mut().iter_mut().zip(mask.data()) {
        *v *= m;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng as StreamRng;

    fn linear_model(w: f64, b: f64) -> MlpModel {
        MlpModel::from_layers(vec![Layer::Linear {
            w: Matrix::filled(1, 1, w),
            b: Matrix::filled(1, 1, b),
        }])
        .unwrap()
    }

    fn default_spec() -> Vec<LayerSpec> {
        use LayerSpec::*;
        vec![
            Linear { inputs: 2, outputs: 200 },
            BatchNorm { width: 200 },
            Relu,
            Dropout { rate: 0.1 },
            Linear { inputs: 200, outputs: 200 },
            BatchNorm { width: 200 },
            Relu,
            Dropout { rate: 0.1 },
            Linear { inputs: 200, outputs: 1 },
        ]
    }

    #[test]
    fn parameter_count_matches_shapes() {
        let m = init_model(&default_spec(), 1).unwrap();
        let linear: usize = m
            .layers()
            .iter()
            .filter_map(|l| match l {
                Layer::Linear { w, b } => Some(w.len() + b.len()),
                _ => None,
            })
            .sum();
        assert_eq!(linear, 2 * 200 + 200 + 200 * 200 + 200 + 200 + 1);
        assert_eq!(m.input_dim(), 2);
        assert_eq!(m.output_dim(), 1);
    }

    #[test]
    fn init_zero_bias_and_bn_defaults() {
        let m = init_model(&[LayerSpec::Linear { inputs: 3, outputs: 1 }], 9).unwrap();
        match &m.layers()[0] {
            Layer::Linear { b, .. } => assert_eq!(b.data(), &[0.0]),
            _ => unreachable!(),
        }
        let m = init_model(&default_spec(), 1).unwrap();
        match &m.layers()[1] {
            Layer::BatchNorm { gamma, beta, running_mean, running_var } => {
                assert!(gamma.data().iter().all(|&v| v == 1.0));
                assert!(beta.data().iter().all(|&v| v == 0.0));
                assert!(running_mean.data().iter().all(|&v| v == 0.0));
                assert!(running_var.data().iter().all(|&v| v == 1.0));
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn init_is_deterministic_and_he_scaled() {
        let a = init_model(&default_spec(), 7).unwrap();
        let b = init_model(&default_spec(), 7).unwrap();
        assert_eq!(a, b);
        let c = init_model(&default_spec(), 8).unwrap();
        assert_ne!(a, c);
        // Second linear layer has fan_in 200: sample std should be near sqrt(2/200) = 0.1.
        if let Layer::Linear { w, .. } = &a.layers()[4] {
            let n = w.len() as f64;
            let mean = w.sum() / n;
            let var = w.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            assert!((var.sqrt() - 0.1).abs() < 0.002, "std {}", var.sqrt());
        }
    }

    #[test]
    fn init_rejects_broken_chain() {
        use LayerSpec::*;
        let bad = [Linear { inputs: 2, outputs: 3 }, Relu, Linear { inputs: 4, outputs: 1 }];
        assert!(matches!(init_model(&bad, 0), Err(Error::Shape { .. })));
        let bad_bn = [Linear { inputs: 2, outputs: 3 }, BatchNorm { width: 5 }];
        assert!(init_model(&bad_bn, 0).is_err());
        assert!(init_model(&[Dropout { rate: 1.0 }], 0).is_err());
    }

    #[test]
    fn affine_forward() {
        let m = linear_model(2.0, 3.0);
        let y = m.predict(&Matrix::filled(1, 1, 5.0)).unwrap();
        assert_eq!(y.data(), &[13.0]);
    }

    #[test]
    fn relu_forward() {
        let mut m = MlpModel::from_layers(vec![Layer::Relu]).unwrap();
        let x = Matrix::from_rows(&[[-1.0, 4.0]]).unwrap();
        let (y, _) = m.forward::<StreamRng>(&x, None).unwrap();
        assert_eq!(y.data(), &[0.0, 4.0]);
    }

    #[test]
    fn train_batch_norm_normalises() {
        let mut m = MlpModel::from_layers(vec![Layer::batch_norm(1)]).unwrap();
        m.set_mode(Mode::Train);
        let x = Matrix::column(&[1.0, 2.0, 3.0]);
        let (y, _) = m.forward::<StreamRng>(&x, None).unwrap();
        let mean = y.sum() / 3.0;
        let var = y.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0;
        assert!(mean.abs() < 1e-12);
        // Batch variance 2/3 shrinks by the epsilon: exactly (2/3) / (2/3 + eps).
        assert!((var - 2.0 / 3.0 / (2.0 / 3.0 + BN_EPS)).abs() < 1e-12);
        assert!((var - 1.0).abs() < 2e-5);
        // Running stats moved toward the batch statistics (unbiased var = 1).
        if let Layer::BatchNorm { running_mean, running_var, .. } = &m.layers()[0] {
            assert!((running_mean.data()[0] - 0.2).abs() < 1e-12);
            assert!((running_var.data()[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_batch_rejected() {
        let mut m = MlpModel::from_layers(vec![Layer::batch_norm(1)]).unwrap();
        m.set_mode(Mode::Train);
        let err = m.forward::<StreamRng>(&Matrix::column(&[1.0]), None).unwrap_err();
        assert!(matches!(err, Error::DegenerateBatch(1)));
    }

    #[test]
    fn wrong_input_width_rejected() {
        let m = linear_model(1.0, 0.0);
        assert!(m.predict(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn train_dropout_needs_rng() {
        let mut m = init_model(&default_spec(), 1).unwrap();
        m.set_mode(Mode::Train);
        assert!(m.forward::<StreamRng>(&Matrix::zeros(4, 2), None).is_err());
    }

    #[test]
    fn linear_backward_chain_rule() {
        let mut m = linear_model(2.0, 0.0);
        let (_, cache) = m.forward::<StreamRng>(&Matrix::filled(1, 1, 5.0), None).unwrap();
        let g = m.backward(&cache, &Matrix::filled(1, 1, 1.0)).unwrap();
        assert_eq!(g.grads[0].data(), &[5.0]);
        assert_eq!(g.grads[1].data(), &[1.0]);
    }

    #[test]
    fn relu_blocks_negative_gradient() {
        let mut m = MlpModel::from_layers(vec![
            Layer::Linear { w: Matrix::filled(1, 1, 1.0), b: Matrix::filled(1, 1, -2.0) },
            Layer::Relu,
        ])
        .unwrap();
        // pre-activation = 1 - 2 = -1
        let (_, cache) = m.forward::<StreamRng>(&Matrix::filled(1, 1, 1.0), None).unwrap();
        let g = m.backward(&cache, &Matrix::filled(1, 1, 1.0)).unwrap();
        assert_eq!(g.grads[0].data(), &[0.0]);
        assert_eq!(g.grads[1].data(), &[0.0]);
    }

    #[test]
    fn stale_cache_rejected() {
        let mut m = linear_model(2.0, 0.0);
        let (_, cache) = m.forward::<StreamRng>(&Matrix::filled(1, 1, 5.0), None).unwrap();
        m.params_mut()[0].data_mut()[0] = 3.0;
        assert!(matches!(
            m.backward(&cache, &Matrix::filled(1, 1, 1.0)),
            Err(Error::StaleCache(_))
        ));
        let other = init_model(&default_spec(), 1).unwrap();
        assert!(other.backward(&cache, &Matrix::filled(1, 1, 1.0)).is_err());
    }

    #[test]
    fn eval_forward_is_pure_and_matches_predict() {
        let mut m = init_model(&default_spec(), 3).unwrap();
        let x = Matrix::from_fn(5, 2, |i, j| (i + j) as f64 * 0.1);
        let (a, _) = m.forward::<StreamRng>(&x, None).unwrap();
        let (b, _) = m.forward::<StreamRng>(&x, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, m.predict(&x).unwrap());
    }

    #[test]
    fn replay_reproduces_train_forward() {
        let mut m = init_model(&default_spec(), 3).unwrap();
        m.set_mode(Mode::Train);
        let x = Matrix::from_fn(6, 2, |i, j| ((i * 7 + j * 3) % 5) as f64 * 0.2);
        let mut r = rng::from_seed(11);
        let (y, cache) = m.forward(&x, Some(&mut r)).unwrap();
        let replay = m.forward_replay(&x, &cache).unwrap();
        for (a, b) in y.data().iter().zip(replay.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn inverted_dropout_preserves_expectation() {
        let rate = 0.3;
        let mut m = MlpModel::from_layers(vec![Layer::Dropout { rate }]).unwrap();
        m.set_mode(Mode::Train);
        let x = Matrix::filled(1, 1, 2.0);
        let mut r = rng::from_seed(5);
        let trials = 20_000;
        let mut sum = 0.0;
        for _ in 0..trials {
            let (y, _) = m.forward(&x, Some(&mut r)).unwrap();
            sum += y.data()[0];
        }
        let mean = sum / trials as f64;
        // Each draw is 2/(1-rate) w.p. 1-rate, else 0.
        let keep = 2.0 / (1.0 - rate);
        let sd = (keep * keep * (1.0 - rate) - 4.0).sqrt();
        assert!((mean - 2.0).abs() < 3.0 * sd / (trials as f64).sqrt());
    }

    #[test]
    fn bias_free_relu_stack_is_positively_homogeneous() {
        use LayerSpec::*;
        let spec = [
            Linear { inputs: 3, outputs: 8 },
            Relu,
            Linear { inputs: 8, outputs: 8 },
            Relu,
            Linear { inputs: 8, outputs: 2 },
        ];
        let m = init_model(&spec, 4).unwrap();
        let x = Matrix::from_fn(4, 3, |i, j| (i as f64 - 1.5) * (j as f64 + 0.5));
        let y = m.predict(&x).unwrap();
        for c in [0.5, 3.0, 17.0] {
            let yc = m.predict(&x.map(|v| v * c)).unwrap();
            for (a, b) in yc.data().iter().zip(y.data()) {
                assert!((a - c * b).abs() < 1e-10 * (1.0 + a.abs()));
            }
        }
    }
}
