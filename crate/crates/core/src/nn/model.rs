//! A sequential 1D network: parameter storage, forward pass, analytic
//! backward pass for mean cross-entropy, and prediction.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::rng::SeededRng;

use super::layers::{
    conv_backward, conv_forward, conv_geometry, depthwise_backward, depthwise_forward, maxpool_forward,
    pointwise_dims, softmax, ConvDims, FeatureMap, LayerKind, LayerSpec, Padding,
};

/// One layer with resolved geometry and its parameter tensors.
///
/// Tensor order: conv `[weight, bias]`; sepconv `[depthwise, depthwise_bias,
/// pointwise, pointwise_bias]`; dense `[weight, bias]`; others none.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub in_channels: usize,
    pub in_len: usize,
    pub out_channels: usize,
    pub out_len: usize,
    pad: usize,
    pub params: Vec<Vec<f64>>,
}

impl Layer {
    fn build(spec: &LayerSpec, in_channels: usize, in_len: usize, num_classes: usize) -> Result<Self> {
        let mut spec = *spec;
        let (out_channels, out_len, pad, shapes) = match spec.kind {
            LayerKind::Conv1d | LayerKind::SepConv1d => {
                let cout = spec
                    .out_channels
                    .ok_or_else(|| Error::Shape(format!("{} layer needs out_channels", spec.kind.as_str())))?;
                if cout == 0 {
                    return Err(Error::Shape("out_channels must be >= 1".into()));
                }
                let (out_len, pad) = conv_geometry(in_len, spec.kernel, spec.stride, spec.padding)?;
                let k = spec.kernel;
                let shapes = if spec.kind == LayerKind::Conv1d {
                    vec![cout * in_channels * k, cout]
                } else {
                    vec![in_channels * k, in_channels, cout * in_channels, cout]
                };
                (cout, out_len, pad, shapes)
            }
            LayerKind::Relu | LayerKind::Softmax => (in_channels, in_len, 0, vec![]),
            LayerKind::MaxPool1d => {
                if spec.kernel == 0 || spec.kernel != spec.stride {
                    return Err(Error::Shape("max pooling needs kernel == stride >= 1".into()));
                }
                if in_len < spec.kernel {
                    return Err(Error::Shape(format!(
                        "max pooling window {} exceeds input length {in_len}",
                        spec.kernel
                    )));
                }
                (in_channels, in_len / spec.kernel, 0, vec![])
            }
            LayerKind::GlobalAvgPool => (in_channels, 1, 0, vec![]),
            LayerKind::Dense => {
                let out = spec.out_channels.unwrap_or(num_classes);
                if out == 0 {
                    return Err(Error::Shape("dense layer needs at least one output".into()));
                }
                spec.out_channels = Some(out);
                let fan_in = in_channels * in_len;
                (out, 1, 0, vec![out * fan_in, out])
            }
        };
        Ok(Self {
            spec,
            in_channels,
            in_len,
            out_channels,
            out_len,
            pad,
            params: shapes.into_iter().map(|n| vec![0.0; n]).collect(),
        })
    }

    /// Kaiming-uniform weights scaled by fan-in; zero biases.
    fn init(&mut self, rng: &mut SeededRng) {
        let k = self.spec.kernel;
        let fan_ins: Vec<Option<usize>> = match self.spec.kind {
            LayerKind::Conv1d => vec![Some(self.in_channels * k), None],
            LayerKind::SepConv1d => vec![Some(k), None, Some(self.in_channels), None],
            LayerKind::Dense => vec![Some(self.in_channels * self.in_len), None],
            _ => vec![],
        };
        for (tensor, fan_in) in self.params.iter_mut().zip(fan_ins) {
            match fan_in {
                Some(f) => {
                    let bound = (6.0 / f as f64).sqrt();
                    tensor.iter_mut().for_each(|w| *w = rng.uniform_in(-bound, bound));
                }
                None => tensor.fill(0.0),
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Vec::len).sum()
    }

    fn conv_dims(&self) -> ConvDims {
        ConvDims {
            cin: self.in_channels,
            cout: self.out_channels,
            kernel: self.spec.kernel,
            stride: self.spec.stride,
            pad: self.pad,
            len: self.in_len,
            out_len: self.out_len,
        }
    }

    /// Returns the output and any intermediate needed by `backward`.
    fn forward(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match self.spec.kind {
            LayerKind::Conv1d => {
                let mut out = vec![0.0; self.out_channels * self.out_len];
                conv_forward(x, &self.params[0], &self.params[1], self.conv_dims(), &mut out);
                (out, Vec::new())
            }
            LayerKind::SepConv1d => {
                let dw = ConvDims {
                    cout: self.in_channels,
                    ..self.conv_dims()
                };
                let mut mid = vec![0.0; self.in_channels * self.out_len];
                depthwise_forward(x, &self.params[0], &self.params[1], dw, &mut mid);
                let mut out = vec![0.0; self.out_channels * self.out_len];
                let pw = pointwise_dims(self.in_channels, self.out_channels, self.out_len);
                conv_forward(&mid, &self.params[2], &self.params[3], pw, &mut out);
                (out, mid)
            }
            LayerKind::Relu => (x.iter().map(|v| v.max(0.0)).collect(), Vec::new()),
            LayerKind::MaxPool1d => {
                let (out, _) = maxpool_forward(x, self.in_channels, self.in_len, self.spec.kernel);
                (out, Vec::new())
            }
            LayerKind::GlobalAvgPool => {
                let n = self.in_len as f64;
                let out = x.chunks(self.in_len).map(|c| c.iter().sum::<f64>() / n).collect();
                (out, Vec::new())
            }
            LayerKind::Dense => {
                let w = &self.params[0];
                let fan_in = x.len();
                let out = (0..self.out_channels)
                    .map(|o| {
                        self.params[1][o] + w[o * fan_in..(o + 1) * fan_in].iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
                    })
                    .collect();
                (out, Vec::new())
            }
            LayerKind::Softmax => (softmax(x), Vec::new()),
        }
    }

    /// Accumulates parameter gradients into `grads` and returns the gradient
    /// with respect to the input when `need_input` is set.
    fn backward(
        &self,
        x: &[f64],
        aux: &[f64],
        grad_out: &[f64],
        grads: &mut [Vec<f64>],
        need_input: bool,
    ) -> Option<Vec<f64>> {
        let mut grad_in = need_input.then(|| vec![0.0; x.len()]);
        match self.spec.kind {
            LayerKind::Conv1d => {
                let (gw, gb) = grads.split_at_mut(1);
                conv_backward(
                    x,
                    &self.params[0],
                    grad_out,
                    self.conv_dims(),
                    &mut gw[0],
                    &mut gb[0],
                    grad_in.as_deref_mut(),
                );
            }
            LayerKind::SepConv1d => {
                let pw = pointwise_dims(self.in_channels, self.out_channels, self.out_len);
                let mut grad_mid = vec![0.0; aux.len()];
                let (dw, rest) = grads.split_at_mut(2);
                let (pw_w, pw_b) = rest.split_at_mut(1);
                conv_backward(aux, &self.params[2], grad_out, pw, &mut pw_w[0], &mut pw_b[0], Some(&mut grad_mid));
                let dims = ConvDims {
                    cout: self.in_channels,
                    ..self.conv_dims()
                };
                let (dw_w, dw_b) = dw.split_at_mut(1);
                depthwise_backward(
                    x,
                    &self.params[0],
                    &grad_mid,
                    dims,
                    &mut dw_w[0],
                    &mut dw_b[0],
                    grad_in.as_deref_mut(),
                );
            }
            LayerKind::Relu => {
                if let Some(gi) = grad_in.as_mut() {
                    for ((g, go), xv) in gi.iter_mut().zip(grad_out).zip(x) {
                        *g = if *xv > 0.0 { *go } else { 0.0 };
                    }
                }
            }
            LayerKind::MaxPool1d => {
                if let Some(gi) = grad_in.as_mut() {
                    let (_, arg) = maxpool_forward(x, self.in_channels, self.in_len, self.spec.kernel);
                    for (&i, go) in arg.iter().zip(grad_out) {
                        gi[i] += go;
                    }
                }
            }
            LayerKind::GlobalAvgPool => {
                if let Some(gi) = grad_in.as_mut() {
                    let n = self.in_len as f64;
                    for (chunk, go) in gi.chunks_mut(self.in_len).zip(grad_out) {
                        chunk.fill(go / n);
                    }
                }
            }
            LayerKind::Dense => {
                let fan_in = x.len();
                for (o, go) in grad_out.iter().enumerate() {
                    grads[1][o] += go;
                    for (gw, xv) in grads[0][o * fan_in..(o + 1) * fan_in].iter_mut().zip(x) {
                        *gw += go * xv;
                    }
                    if let Some(gi) = grad_in.as_mut() {
                        for (g, w) in gi.iter_mut().zip(&self.params[0][o * fan_in..(o + 1) * fan_in]) {
                            *g += go * w;
                        }
                    }
                }
            }
            LayerKind::Softmax => {
                // Jacobian-vector product, only used when softmax is not fused with the loss.
                if let Some(gi) = grad_in.as_mut() {
                    let p = softmax(x);
                    let dot: f64 = p.iter().zip(grad_out).map(|(a, b)| a * b).sum();
                    for ((g, pi), go) in gi.iter_mut().zip(&p).zip(grad_out) {
                        *g = pi * (go - dot);
                    }
                }
            }
        }
        grad_in
    }
}

/// Parameter gradients, `layers[layer][tensor][index]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Vec<Vec<f64>>>,
}

impl Gradients {
    pub fn zeros_like(model: &Model) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| l.params.iter().map(|t| vec![0.0; t.len()]).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackwardResult {
    /// Mean cross-entropy over the batch.
    pub loss: f64,
    pub grads: Gradients,
    /// Gradient of the mean loss w.r.t. each input, when requested.
    pub input_grads: Vec<Vec<f64>>,
}

/// Sequential network ending in a softmax layer, trained with
/// cross-entropy.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub input_channels: usize,
    pub input_len: usize,
    pub num_classes: usize,
    pub layers: Vec<Layer>,
}

impl Model {
    /// Builds and initializes a model. `Dense` layers without an explicit
    /// width get `num_classes` outputs.
    pub fn new(arch: &[LayerSpec], input_channels: usize, input_len: usize, num_classes: usize, seed: u64) -> Result<Self> {
        let mut model = Self::uninitialized(arch, input_channels, input_len, num_classes)?;
        let mut rng = SeededRng::new(seed);
        for layer in &mut model.layers {
            layer.init(&mut rng);
        }
        Ok(model)
    }

    /// Builds the layer chain with zeroed parameters.
    pub fn uninitialized(arch: &[LayerSpec], input_channels: usize, input_len: usize, num_classes: usize) -> Result<Self> {
        if arch.is_empty() {
            return Err(Error::Shape("architecture has no layers".into()));
        }
        if num_classes < 1 || input_channels < 1 || input_len < 1 {
            return Err(Error::Shape("model needs at least one class, channel and sample".into()));
        }
        let mut layers = Vec::with_capacity(arch.len());
        let (mut c, mut l) = (input_channels, input_len);
        for (i, spec) in arch.iter().enumerate() {
            if spec.kind == LayerKind::Softmax && i + 1 != arch.len() {
                return Err(Error::Shape("softmax is only allowed as the last layer".into()));
            }
            let layer = Layer::build(spec, c, l, num_classes).map_err(|e| Error::Shape(format!("layer {i}: {e}")))?;
            c = layer.out_channels;
            l = layer.out_len;
            layers.push(layer);
        }
        if arch.last().map(|s| s.kind) != Some(LayerKind::Softmax) {
            return Err(Error::Shape("architecture must end with softmax".into()));
        }
        if c * l != num_classes {
            return Err(Error::Shape(format!(
                "network produces {} outputs but there are {num_classes} classes",
                c * l
            )));
        }
        Ok(Self {
            input_channels,
            input_len,
            num_classes,
            layers,
        })
    }

    pub fn arch(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        let expected = self.input_channels * self.input_len;
        if x.len() != expected {
            return Err(Error::Shape(format!("model expects {expected} input values, got {}", x.len())));
        }
        Ok(())
    }

    /// Pre-softmax outputs.
    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut act = x.to_vec();
        for layer in &self.layers[..self.layers.len() - 1] {
            act = layer.forward(&act).0;
        }
        Ok(act)
    }

    /// Class probabilities.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(x)?))
    }

    pub fn forward_map(&self, input: &FeatureMap) -> Result<Vec<f64>> {
        if input.channels != self.input_channels {
            return Err(Error::Shape(format!(
                "model expects {} channels, got {}",
                self.input_channels, input.channels
            )));
        }
        self.forward(&input.values)
    }

    /// Mean cross-entropy of a batch.
    pub fn loss(&self, inputs: &[&[f64]], labels: &[usize]) -> Result<f64> {
        self.check_batch(inputs, labels)?;
        let mut total = 0.0;
        for (x, &y) in inputs.iter().zip(labels) {
            total += cross_entropy(&self.logits(x)?, y);
        }
        Ok(total / inputs.len() as f64)
    }

    fn check_batch(&self, inputs: &[&[f64]], labels: &[usize]) -> Result<()> {
        if inputs.len() != labels.len() || inputs.is_empty() {
            return Err(Error::Shape(format!(
                "batch has {} inputs and {} labels",
                inputs.len(),
                labels.len()
            )));
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= self.num_classes) {
            return Err(Error::invalid(format!("label {y} out of range for {} classes", self.num_classes)));
        }
        inputs.iter().try_for_each(|x| self.check_input(x))
    }

    /// Forward and backward pass over a batch. Gradients are of the mean
    /// cross-entropy; the softmax is fused with the loss so the gradient at
    /// the logits is `(softmax - one_hot) / batch_size`.
    pub fn backward(&self, inputs: &[&[f64]], labels: &[usize], want_input_grads: bool) -> Result<BackwardResult> {
        self.check_batch(inputs, labels)?;
        let mut grads = Gradients::zeros_like(self);
        let mut input_grads = Vec::new();
        let mut total = 0.0;
        let body = &self.layers[..self.layers.len() - 1];
        let batch = inputs.len() as f64;
        for (x, &y) in inputs.iter().zip(labels) {
            let mut acts: Vec<Vec<f64>> = Vec::with_capacity(body.len() + 1);
            let mut auxes: Vec<Vec<f64>> = Vec::with_capacity(body.len());
            acts.push(x.to_vec());
            for layer in body {
                let (out, aux) = layer.forward(acts.last().expect("input pushed"));
                acts.push(out);
                auxes.push(aux);
            }
            let logits = acts.last().expect("non-empty");
            total += cross_entropy(logits, y);
            let mut g = softmax(logits);
            g[y] -= 1.0;
            g.iter_mut().for_each(|v| *v /= batch);
            for (i, layer) in body.iter().enumerate().rev() {
                let need = i > 0 || want_input_grads;
                match layer.backward(&acts[i], &auxes[i], &g, &mut grads.layers[i], need) {
                    Some(gi) => g = gi,
                    None => break,
                }
            }
            if want_input_grads {
                input_grads.push(g);
            }
        }
        Ok(BackwardResult {
            loss: total / batch,
            grads,
            input_grads,
        })
    }

    /// Argmax of the logits; ties go to the lowest class index.
    pub fn predict_one(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.logits(x)?))
    }

    pub fn predict(&self, inputs: &[Vec<f64>], exec: Execution) -> Result<Vec<usize>> {
        exec.map(inputs, |x| self.predict_one(x)).into_iter().collect()
    }
}

/// `logsumexp(z) - z[label]`.
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    lse - logits[label]
}

/// Index of the first maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Shorthand used by the presets.
pub(crate) fn conv_block(separable: bool, kernel: usize, channels: usize) -> LayerSpec {
    if separable {
        LayerSpec::sepconv(kernel, channels, 1, Padding::Same)
    } else {
        LayerSpec::conv(kernel, channels, 1, Padding::Same)
    }
}
