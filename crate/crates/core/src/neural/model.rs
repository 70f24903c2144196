//! The pairwise mention-pair classifier. Both kinds share the structure:
//! a dense event-word encoder feeding cosine/Euclidean similarities, a
//! one-neuron argument-overlap layer, and a sigmoid head. The cross-document
//! kind adds an LSTM over the head word's sentence context, contributing a
//! second similarity pair.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::PosTagset;
use crate::error::{Error, Result};
use crate::neural::layers::{DenseLayer, LstmCache, LstmCell, OutputHead};
use crate::neural::math::{dot, euclidean, norm, pair_similarity, NORM_EPS};

/// Context window fed to the LSTM: up to 3 tokens either side of the head.
pub const CONTEXT_WINDOW: usize = 7;
/// Default width of the shared event-word layer.
pub const DEFAULT_WORD_HIDDEN: usize = 60;
/// Default hidden size of the context LSTM.
pub const DEFAULT_CONTEXT_HIDDEN: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Within-document classifier: event-word similarities and argument overlap.
    Wd,
    /// Cross-document classifier: adds sentence-context similarities.
    Cd,
}

impl ModelKind {
    pub fn head_input_dim(self) -> usize {
        match self {
            ModelKind::Wd => 3,
            ModelKind::Cd => 5,
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Wd => "wd",
            ModelKind::Cd => "cd",
        })
    }
}

/// Names of the head inputs, in head order.
pub fn head_feature_names(kind: ModelKind) -> &'static [&'static str] {
    match kind {
        ModelKind::Wd => &["event_cos", "event_euc", "arg"],
        ModelKind::Cd => &["event_cos", "event_euc", "ctx_cos", "ctx_euc", "arg"],
    }
}

/// Numeric encoding of one mention: the event-word vector (embedding plus POS
/// one-hot) and the padded context window of embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFeatures {
    pub word: Vec<f64>,
    pub context: Vec<Vec<f64>>,
}

/// One labeled mention pair ready for training or scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct PairInstance {
    pub a: PairFeatures,
    pub b: PairFeatures,
    /// Per-role Jaccard overlap of the two argument sets.
    pub arg_overlap: [f64; 4],
    /// 1.0 for coreferent, 0.0 otherwise.
    pub label: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseModel {
    pub kind: ModelKind,
    pub embedding_dim: usize,
    pub pos_tags: Vec<String>,
    pub word_layer: DenseLayer,
    pub arg_layer: DenseLayer,
    pub context_encoder: Option<LstmCell>,
    pub head: OutputHead,
}

/// Cached activations of one pairwise forward pass.
pub struct Forward {
    word_x_a: Vec<f64>,
    word_x_b: Vec<f64>,
    word_y_a: Vec<f64>,
    word_y_b: Vec<f64>,
    word_mask_a: Vec<f64>,
    word_mask_b: Vec<f64>,
    word_drop_a: Vec<f64>,
    word_drop_b: Vec<f64>,
    ctx: Option<CtxForward>,
    arg_x: [f64; 4],
    arg_y: f64,
    head_x: Vec<f64>,
    pub score: f64,
}

struct CtxForward {
    cache_a: LstmCache,
    cache_b: LstmCache,
    mask_a: Vec<f64>,
    mask_b: Vec<f64>,
    drop_a: Vec<f64>,
    drop_b: Vec<f64>,
}

fn draw_mask(len: usize, dropout: &mut Option<(&mut impl Rng, f64)>) -> Vec<f64> {
    match dropout {
        Some((rng, rate)) if *rate > 0.0 => {
            let keep = 1.0 - *rate;
            (0..len)
                .map(|_| if rng.random::<f64>() < *rate { 0.0 } else { 1.0 / keep })
                .collect()
        }
        _ => vec![1.0; len],
    }
}

fn apply_mask(y: &[f64], mask: &[f64]) -> Vec<f64> {
    y.iter().zip(mask).map(|(v, m)| v * m).collect()
}

/// Gradients of cosine and Euclidean distance with respect to both inputs.
fn similarity_backward(u: &[f64], v: &[f64], dcos: f64, deuc: f64) -> (Vec<f64>, Vec<f64>) {
    let mut du = vec![0.0; u.len()];
    let mut dv = vec![0.0; v.len()];
    let (nu, nv) = (norm(u), norm(v));
    if dcos != 0.0 && nu >= NORM_EPS && nv >= NORM_EPS {
        let c = dot(u, v) / (nu * nv);
        for k in 0..u.len() {
            du[k] += dcos * (v[k] / (nu * nv) - c * u[k] / (nu * nu));
            dv[k] += dcos * (u[k] / (nu * nv) - c * v[k] / (nv * nv));
        }
    }
    let e = euclidean(u, v);
    if deuc != 0.0 && e >= NORM_EPS {
        for k in 0..u.len() {
            let diff = (u[k] - v[k]) / e;
            du[k] += deuc * diff;
            dv[k] -= deuc * diff;
        }
    }
    (du, dv)
}

impl PairwiseModel {
    /// Glorot-initialized model with the default layer sizes.
    pub fn new(
        kind: ModelKind,
        embedding_dim: usize,
        pos_tags: Vec<String>,
        rng: &mut impl Rng,
    ) -> PairwiseModel {
        PairwiseModel::with_sizes(
            kind,
            embedding_dim,
            pos_tags,
            DEFAULT_WORD_HIDDEN,
            DEFAULT_CONTEXT_HIDDEN,
            rng,
        )
    }

    pub fn with_sizes(
        kind: ModelKind,
        embedding_dim: usize,
        pos_tags: Vec<String>,
        word_hidden: usize,
        context_hidden: usize,
        rng: &mut impl Rng,
    ) -> PairwiseModel {
        let word_input = embedding_dim + pos_tags.len() + 1;
        PairwiseModel {
            kind,
            embedding_dim,
            pos_tags,
            word_layer: DenseLayer::glorot(word_hidden, word_input, rng),
            arg_layer: DenseLayer::glorot(1, 4, rng),
            context_encoder: match kind {
                ModelKind::Wd => None,
                ModelKind::Cd => Some(LstmCell::glorot(embedding_dim, context_hidden, rng)),
            },
            head: OutputHead::glorot(kind.head_input_dim(), rng),
        }
    }

    /// Same shapes, all parameters zero; used as a gradient accumulator.
    pub fn zeros_like(&self) -> PairwiseModel {
        PairwiseModel {
            kind: self.kind,
            embedding_dim: self.embedding_dim,
            pos_tags: self.pos_tags.clone(),
            word_layer: self.word_layer.zeros_like(),
            arg_layer: self.arg_layer.zeros_like(),
            context_encoder: self.context_encoder.as_ref().map(|c| c.zeros_like()),
            head: self.head.zeros_like(),
        }
    }

    /// Expected length of the event-word input vector.
    pub fn word_input_dim(&self) -> usize {
        self.embedding_dim + self.pos_tags.len() + 1
    }

    pub fn tagset(&self) -> Result<PosTagset> {
        PosTagset::new(self.pos_tags.clone())
    }

    /// Checks internal shape consistency (used after deserialization).
    pub fn validate(&self) -> Result<()> {
        if self.word_layer.in_dim() != self.word_input_dim() {
            return Err(Error::shape(format!(
                "word layer takes {} inputs but embedding_dim + tags + padding is {}",
                self.word_layer.in_dim(),
                self.word_input_dim()
            )));
        }
        if self.arg_layer.in_dim() != 4 || self.arg_layer.out_dim() != 1 {
            return Err(Error::shape("argument layer must map 4 role overlaps to 1 output"));
        }
        if self.head.in_dim() != self.kind.head_input_dim() {
            return Err(Error::shape(format!(
                "{} head takes {} inputs, found {}",
                self.kind,
                self.kind.head_input_dim(),
                self.head.in_dim()
            )));
        }
        match (self.kind, &self.context_encoder) {
            (ModelKind::Wd, Some(_)) => {
                return Err(Error::KindMismatch("wd model must not carry a context encoder".into()))
            }
            (ModelKind::Cd, None) => {
                return Err(Error::KindMismatch("cd model requires a context encoder".into()))
            }
            (ModelKind::Cd, Some(cell)) => {
                if cell.input_dim != self.embedding_dim {
                    return Err(Error::shape(format!(
                        "context encoder reads {}-dim inputs but embeddings are {}-dim",
                        cell.input_dim, self.embedding_dim
                    )));
                }
                for gate in [&cell.input_gate, &cell.forget_gate, &cell.candidate, &cell.output_gate]
                {
                    if gate.w_input.rows != cell.hidden_dim
                        || gate.w_input.cols != cell.input_dim
                        || gate.w_hidden.rows != cell.hidden_dim
                        || gate.w_hidden.cols != cell.hidden_dim
                        || gate.bias.len() != cell.hidden_dim
                    {
                        return Err(Error::shape("context encoder gate shapes are inconsistent"));
                    }
                }
            }
            (ModelKind::Wd, None) => {}
        }
        self.tagset()?;
        Ok(())
    }

    /// Checks that an instance's features fit this model.
    pub fn check_instance(&self, inst: &PairInstance) -> Result<()> {
        for side in [&inst.a, &inst.b] {
            if side.word.len() != self.word_input_dim() {
                return Err(Error::shape(format!(
                    "event-word vector has {} entries, model expects {}",
                    side.word.len(),
                    self.word_input_dim()
                )));
            }
            if self.kind == ModelKind::Cd {
                if side.context.len() != CONTEXT_WINDOW {
                    return Err(Error::shape(format!(
                        "context window has {} steps, expected {CONTEXT_WINDOW}",
                        side.context.len()
                    )));
                }
                if side.context.iter().any(|v| v.len() != self.embedding_dim) {
                    return Err(Error::shape("context embeddings have the wrong dimension"));
                }
            }
        }
        Ok(())
    }

    /// Forward pass. `dropout` carries the RNG and rate during training; pass
    /// `None` (or rate 0, which draws nothing) for inference.
    pub fn forward(
        &self,
        inst: &PairInstance,
        mut dropout: Option<(&mut impl Rng, f64)>,
    ) -> Result<Forward> {
        self.check_instance(inst)?;
        let word_y_a = self.word_layer.forward(&inst.a.word)?;
        let word_y_b = self.word_layer.forward(&inst.b.word)?;
        let word_mask_a = draw_mask(word_y_a.len(), &mut dropout);
        let word_mask_b = draw_mask(word_y_b.len(), &mut dropout);
        let word_drop_a = apply_mask(&word_y_a, &word_mask_a);
        let word_drop_b = apply_mask(&word_y_b, &word_mask_b);
        let (cos_e, euc_e) = pair_similarity(&word_drop_a, &word_drop_b)?;

        let ctx = match &self.context_encoder {
            None => None,
            Some(cell) => {
                let cache_a = cell.forward_cached(&inst.a.context)?;
                let cache_b = cell.forward_cached(&inst.b.context)?;
                let mask_a = draw_mask(cache_a.h_final.len(), &mut dropout);
                let mask_b = draw_mask(cache_b.h_final.len(), &mut dropout);
                let drop_a = apply_mask(&cache_a.h_final, &mask_a);
                let drop_b = apply_mask(&cache_b.h_final, &mask_b);
                Some(CtxForward { cache_a, cache_b, mask_a, mask_b, drop_a, drop_b })
            }
        };

        let arg_y = self.arg_layer.forward(&inst.arg_overlap)?[0];
        let head_x = match &ctx {
            None => vec![cos_e, euc_e, arg_y],
            Some(c) => {
                let (cos_c, euc_c) = pair_similarity(&c.drop_a, &c.drop_b)?;
                vec![cos_e, euc_e, cos_c, euc_c, arg_y]
            }
        };
        let score = self.head.forward(&head_x)?.clamp(1e-15, 1.0 - 1e-15);
        Ok(Forward {
            word_x_a: inst.a.word.clone(),
            word_x_b: inst.b.word.clone(),
            word_y_a,
            word_y_b,
            word_mask_a,
            word_mask_b,
            word_drop_a,
            word_drop_b,
            ctx,
            arg_x: inst.arg_overlap,
            arg_y,
            head_x,
            score,
        })
    }

    /// Inference score in (0, 1).
    pub fn score(&self, inst: &PairInstance) -> Result<f64> {
        self.check_instance(inst)?;
        self.score_parts(&inst.a, &inst.b, &inst.arg_overlap)
    }

    /// Inference on borrowed features, avoiding the training-pass caches.
    pub fn score_parts(
        &self,
        a: &PairFeatures,
        b: &PairFeatures,
        arg_overlap: &[f64; 4],
    ) -> Result<f64> {
        let e_a = self.word_layer.forward(&a.word)?;
        let e_b = self.word_layer.forward(&b.word)?;
        let (cos_e, euc_e) = pair_similarity(&e_a, &e_b)?;
        let arg_y = self.arg_layer.forward(arg_overlap)?[0];
        let head_x = match &self.context_encoder {
            None => vec![cos_e, euc_e, arg_y],
            Some(cell) => {
                if a.context.len() != CONTEXT_WINDOW || b.context.len() != CONTEXT_WINDOW {
                    return Err(Error::shape(format!(
                        "context windows must have {CONTEXT_WINDOW} steps"
                    )));
                }
                let c_a = cell.forward(&a.context)?;
                let c_b = cell.forward(&b.context)?;
                let (cos_c, euc_c) = pair_similarity(&c_a, &c_b)?;
                vec![cos_e, euc_e, cos_c, euc_c, arg_y]
            }
        };
        Ok(self.head.forward(&head_x)?.clamp(1e-15, 1.0 - 1e-15))
    }

    /// Accumulates the binary-cross-entropy gradients of one forward pass.
    pub fn backward(&self, fwd: &Forward, label: f64, grads: &mut PairwiseModel) {
        let dz = fwd.score - label;
        let d_head_x = self.head.backward(&fwd.head_x, dz, &mut grads.head);

        let d_arg_y = *d_head_x.last().expect("head has inputs");
        self.arg_layer.backward(&fwd.arg_x, &[fwd.arg_y], &[d_arg_y], &mut grads.arg_layer);

        let (du, dv) = similarity_backward(&fwd.word_drop_a, &fwd.word_drop_b, d_head_x[0], d_head_x[1]);
        let dy_a = apply_mask(&du, &fwd.word_mask_a);
        let dy_b = apply_mask(&dv, &fwd.word_mask_b);
        self.word_layer.backward(&fwd.word_x_a, &fwd.word_y_a, &dy_a, &mut grads.word_layer);
        self.word_layer.backward(&fwd.word_x_b, &fwd.word_y_b, &dy_b, &mut grads.word_layer);

        if let (Some(ctx), Some(cell)) = (&fwd.ctx, &self.context_encoder) {
            let grads_cell = grads.context_encoder.as_mut().expect("grads mirror the model");
            let (du, dv) = similarity_backward(&ctx.drop_a, &ctx.drop_b, d_head_x[2], d_head_x[3]);
            cell.backward(&ctx.cache_a, &apply_mask(&du, &ctx.mask_a), grads_cell);
            cell.backward(&ctx.cache_b, &apply_mask(&dv, &ctx.mask_b), grads_cell);
        }
    }

    fn param_slices(&self) -> Vec<&[f64]> {
        let mut slices = vec![
            self.word_layer.weights.data.as_slice(),
            self.word_layer.bias.as_slice(),
            self.arg_layer.weights.data.as_slice(),
            self.arg_layer.bias.as_slice(),
        ];
        if let Some(cell) = &self.context_encoder {
            for gate in [&cell.input_gate, &cell.forget_gate, &cell.candidate, &cell.output_gate] {
                slices.push(gate.w_input.data.as_slice());
                slices.push(gate.w_hidden.data.as_slice());
                slices.push(gate.bias.as_slice());
            }
        }
        slices.push(self.head.weights.as_slice());
        slices
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut slices: Vec<&mut [f64]> = vec![
            self.word_layer.weights.data.as_mut_slice(),
            self.word_layer.bias.as_mut_slice(),
            self.arg_layer.weights.data.as_mut_slice(),
            self.arg_layer.bias.as_mut_slice(),
        ];
        if let Some(cell) = &mut self.context_encoder {
            for gate in [
                &mut cell.input_gate,
                &mut cell.forget_gate,
                &mut cell.candidate,
                &mut cell.output_gate,
            ] {
                slices.push(gate.w_input.data.as_mut_slice());
                slices.push(gate.w_hidden.data.as_mut_slice());
                slices.push(gate.bias.as_mut_slice());
            }
        }
        slices.push(self.head.weights.as_mut_slice());
        slices
    }

    pub fn param_count(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum::<usize>() + 1
    }

    /// All parameters flattened in a fixed order (head bias last).
    pub fn params_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for slice in self.param_slices() {
            out.extend_from_slice(slice);
        }
        out.push(self.head.bias);
        out
    }

    /// Writes back a flat parameter vector produced by [`Self::params_vec`].
    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::shape(format!(
                "parameter vector has {} entries, model has {}",
                params.len(),
                self.param_count()
            )));
        }
        let mut offset = 0;
        for slice in self.param_slices_mut() {
            slice.copy_from_slice(&params[offset..offset + slice.len()]);
            offset += slice.len();
        }
        self.head.bias = params[offset];
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<PairwiseModel> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        PairwiseModel::from_json(&text, &path.display().to_string())
    }

    pub fn from_json(text: &str, origin: &str) -> Result<PairwiseModel> {
        let wire: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))?;
        let model = PairwiseModel {
            kind: wire.kind,
            embedding_dim: wire.embedding_dim,
            pos_tags: wire.pos_tagset,
            word_layer: wire.layers.word_layer,
            arg_layer: wire.layers.arg_layer,
            context_encoder: wire.layers.context_encoder,
            head: wire.layers.head,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn to_json(&self) -> String {
        let wire = ModelFile {
            kind: self.kind,
            embedding_dim: self.embedding_dim,
            pos_tagset: self.pos_tags.clone(),
            layers: LayersFile {
                word_layer: self.word_layer.clone(),
                arg_layer: self.arg_layer.clone(),
                context_encoder: self.context_encoder.clone(),
                head: self.head.clone(),
            },
        };
        let mut out = serde_json::to_string(&wire).expect("model serializes");
        out.push('\n');
        out
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    kind: ModelKind,
    embedding_dim: usize,
    pos_tagset: Vec<String>,
    layers: LayersFile,
}

#[derive(Serialize, Deserialize)]
struct LayersFile {
    word_layer: DenseLayer,
    arg_layer: DenseLayer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    context_encoder: Option<LstmCell>,
    head: OutputHead,
}


#[cfg(test)]
mod tests {
    use super::test_support::random_instance;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_tags() -> Vec<String> {
        vec!["NN".into(), "VB".into(), "VBD".into()]
    }

    fn zero_model(kind: ModelKind) -> PairwiseModel {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = PairwiseModel::with_sizes(kind, 6, tiny_tags(), 5, 4, &mut rng);
        let zeros = vec![0.0; model.param_count()];
        model.set_params(&zeros).unwrap();
        model
    }

    #[test]
    fn zero_weights_score_one_half() {
        for kind in [ModelKind::Wd, ModelKind::Cd] {
            let model = zero_model(kind);
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let inst = random_instance(&model, 1.0, &mut rng);
            assert_eq!(model.score(&inst).unwrap(), 0.5);
        }
    }

    #[test]
    fn scores_are_symmetric_and_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for kind in [ModelKind::Wd, ModelKind::Cd] {
            for trial in 0..20 {
                let model = PairwiseModel::with_sizes(kind, 5, tiny_tags(), 6, 4, &mut rng);
                let inst = random_instance(&model, (trial % 2) as f64, &mut rng);
                let swapped = PairInstance {
                    a: inst.b.clone(),
                    b: inst.a.clone(),
                    arg_overlap: inst.arg_overlap,
                    label: inst.label,
                };
                let s = model.score(&inst).unwrap();
                assert!(s > 0.0 && s < 1.0);
                assert_eq!(s, model.score(&swapped).unwrap(), "kind {kind} trial {trial}");
            }
        }
    }

    #[test]
    fn dropout_rate_zero_equals_inference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = PairwiseModel::with_sizes(ModelKind::Cd, 5, tiny_tags(), 6, 4, &mut rng);
        let inst = random_instance(&model, 1.0, &mut rng);
        let mut mask_rng = ChaCha8Rng::seed_from_u64(9);
        let trained = model.forward(&inst, Some((&mut mask_rng, 0.0))).unwrap();
        assert_eq!(trained.score, model.score(&inst).unwrap());
    }

    #[test]
    fn dropout_masks_change_the_forward_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let model = PairwiseModel::with_sizes(ModelKind::Cd, 5, tiny_tags(), 8, 4, &mut rng);
        let inst = random_instance(&model, 1.0, &mut rng);
        let mut mask_rng = ChaCha8Rng::seed_from_u64(10);
        let dropped = model.forward(&inst, Some((&mut mask_rng, 0.25))).unwrap();
        assert_ne!(dropped.score, model.score(&inst).unwrap());
    }

    #[test]
    fn params_roundtrip_and_shape_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = PairwiseModel::with_sizes(ModelKind::Cd, 5, tiny_tags(), 6, 4, &mut rng);
        let params = model.params_vec();
        assert_eq!(params.len(), model.param_count());
        let mut other = model.zeros_like();
        other.set_params(&params).unwrap();
        assert_eq!(other, model);
        assert!(other.set_params(&params[1..]).is_err());
    }

    #[test]
    fn save_load_roundtrip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for kind in [ModelKind::Wd, ModelKind::Cd] {
            let model = PairwiseModel::with_sizes(kind, 7, tiny_tags(), 6, 4, &mut rng);
            let path = dir.path().join(format!("{kind}.json"));
            model.save(&path).unwrap();
            let loaded = PairwiseModel::load(&path).unwrap();
            assert_eq!(loaded.params_vec(), model.params_vec());
            assert_eq!(loaded, model);
        }
    }

    #[test]
    fn load_rejects_inconsistent_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let model = PairwiseModel::with_sizes(ModelKind::Cd, 5, tiny_tags(), 6, 4, &mut rng);
        let json = model.to_json();
        // Truncated file.
        assert!(PairwiseModel::from_json(&json[..json.len() / 2], "test").is_err());
        // Kind no longer matches the stored layers.
        let mangled = json.replace("\"kind\":\"cd\"", "\"kind\":\"wd\"");
        assert!(PairwiseModel::from_json(&mangled, "test").is_err());
        // Embedding dimension no longer matches the encoder shapes.
        let mangled = json.replace("\"embedding_dim\":5", "\"embedding_dim\":6");
        assert!(PairwiseModel::from_json(&mangled, "test").is_err());
    }

    #[test]
    fn instances_with_wrong_shapes_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let model = PairwiseModel::with_sizes(ModelKind::Cd, 5, tiny_tags(), 6, 4, &mut rng);
        let mut inst = random_instance(&model, 1.0, &mut rng);
        inst.a.context.pop();
        assert!(model.score(&inst).is_err());
        let mut inst = random_instance(&model, 1.0, &mut rng);
        inst.b.word.push(0.0);
        assert!(model.score(&inst).is_err());
    }
}
