use std::collections::HashMap;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AgentError, QFunction};
use crate::gridworld::Observation;
use crate::instruction::{embed, EmbeddingTable, EncodedInstruction};
use crate::neuralnet::param::join;
use crate::neuralnet::{
    relu, relu_backward, seeded_rng, DenseLayer, FrozenProjector, NamedTensor, NetError, Param, Parameterized,
    RecurrentEncoder, Tensor, DEFAULT_HIDDEN_DIM,
};

/// Architecture sizes for [`MdqnModel`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_visual_dim")]
    pub visual_dim: usize,
    #[serde(default = "default_text_hidden")]
    pub text_hidden: usize,
    #[serde(default = "default_trunk")]
    pub trunk: Vec<usize>,
    #[serde(default)]
    pub value_head: bool,
}

fn default_visual_dim() -> usize {
    512
}
fn default_text_hidden() -> usize {
    DEFAULT_HIDDEN_DIM
}
fn default_trunk() -> Vec<usize> {
    vec![640, 512, 256]
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            visual_dim: default_visual_dim(),
            text_hidden: default_text_hidden(),
            trunk: default_trunk(),
            value_head: false,
        }
    }
}

/// One network input: the egocentric observation and the encoded stage instruction.
#[derive(Clone, Debug, PartialEq)]
pub struct MdqnInput {
    pub observation: Arc<Observation>,
    pub instruction: Arc<EncodedInstruction>,
}

/// Multimodal deep Q-network.
///
/// ```text
/// E_image  = P · obs                      (frozen projector)
/// E_text   = GRU(embed(tokens))           (frozen embeddings, trained recurrence)
/// E_concat = [E_image, E_text]
/// H_i      = ReLU(W_i H_{i-1} + b_i)      (trunk, default 640 → 512 → 256)
/// Q        = W_q H_last + b_q
/// ```
#[derive(Clone, Debug)]
pub struct MdqnModel {
    projector: FrozenProjector,
    embedding: EmbeddingTable,
    text: RecurrentEncoder,
    trunk: Vec<DenseLayer>,
    head: DenseLayer,
    value: Option<DenseLayer>,
    pre_activations: Vec<Tensor>,
    // sample -> row of the distinct-instruction batch seen by the encoder
    text_groups: Vec<usize>,
}

/// Distinct instructions of a batch and, per input, the index of its instruction.
fn group_instructions<'a>(inputs: &[&'a MdqnInput]) -> (Vec<&'a EncodedInstruction>, Vec<usize>) {
    let mut seen: HashMap<&'a [usize], usize> = HashMap::new();
    let mut unique = Vec::new();
    let groups = inputs
        .iter()
        .map(|i| {
            *seen.entry(i.instruction.token_indices.as_slice()).or_insert_with(|| {
                unique.push(&*i.instruction);
                unique.len() - 1
            })
        })
        .collect();
    (unique, groups)
}

impl MdqnModel {
    pub fn new(
        config: &ModelConfig,
        observation_dim: usize,
        embedding: EmbeddingTable,
        action_count: usize,
        seed: u64,
    ) -> Result<Self, AgentError> {
        if config.trunk.is_empty() || config.trunk.contains(&0) {
            return Err(AgentError::Config("trunk needs at least one non-zero layer".into()));
        }
        if action_count == 0 {
            return Err(AgentError::Config("action_count must be positive".into()));
        }
        let projector = FrozenProjector::new(observation_dim, config.visual_dim, seed ^ 0x9e37_79b9_7f4a_7c15);
        let mut rng = seeded_rng(seed);
        let text = RecurrentEncoder::new(embedding.dim(), config.text_hidden, &mut rng);
        let mut width = config.visual_dim + config.text_hidden;
        let mut trunk = Vec::with_capacity(config.trunk.len());
        for &d in &config.trunk {
            trunk.push(DenseLayer::new(width, d, &mut rng));
            width = d;
        }
        let head = DenseLayer::new(width, action_count, &mut rng);
        let value = config.value_head.then(|| DenseLayer::new(width, 1, &mut rng));
        Ok(MdqnModel {
            projector,
            embedding,
            text,
            trunk,
            head,
            value,
            pre_activations: Vec::new(),
            text_groups: Vec::new(),
        })
    }

    pub fn config(&self) -> ModelConfig {
        ModelConfig {
            visual_dim: self.projector.output_dim(),
            text_hidden: self.text.hidden_dim(),
            trunk: self.trunk.iter().map(|l| l.output_dim()).collect(),
            value_head: self.value.is_some(),
        }
    }

    pub fn observation_dim(&self) -> usize {
        self.projector.input_dim()
    }

    pub fn projector(&self) -> &FrozenProjector {
        &self.projector
    }

    pub fn embedding(&self) -> &EmbeddingTable {
        &self.embedding
    }

    pub fn trunk(&self) -> &[DenseLayer] {
        &self.trunk
    }

    pub fn trunk_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.trunk
    }

    pub fn head(&self) -> &DenseLayer {
        &self.head
    }

    pub fn head_mut(&mut self) -> &mut DenseLayer {
        &mut self.head
    }

    pub fn text_encoder(&self) -> &RecurrentEncoder {
        &self.text
    }

    fn text_sequence(&self, enc: &EncodedInstruction) -> Result<Vec<Vec<f64>>, AgentError> {
        Ok(embed(enc, &self.embedding)?)
    }

    fn observation_matrix(&self, inputs: &[&MdqnInput]) -> Result<Tensor, AgentError> {
        let dim = self.observation_dim();
        Ok(Tensor::stack_rows(inputs.iter().map(|i| i.observation.visual.as_slice()), dim)?)
    }

    /// Last trunk activation for each input (no tape).
    fn features(&self, inputs: &[&MdqnInput]) -> Result<Tensor, AgentError> {
        let image = self.projector.project(&self.observation_matrix(inputs)?)?;
        let (unique, groups) = group_instructions(inputs);
        let encoded = unique
            .iter()
            .map(|enc| self.text.forward(&self.text_sequence(enc)?).map_err(AgentError::from))
            .collect::<Result<Vec<_>, _>>()?;
        let text = Tensor::stack_rows(groups.iter().map(|&g| encoded[g].as_slice()), self.text.hidden_dim())?;
        let mut h = Tensor::concat_cols(&image, &text)?;
        for layer in &self.trunk {
            h = relu(&layer.forward(&h)?);
        }
        Ok(h)
    }

    /// Output of the auxiliary value head, when enabled. Never trained.
    pub fn state_value(&self, input: &MdqnInput) -> Result<Option<f64>, AgentError> {
        match &self.value {
            Some(v) => Ok(Some(v.forward(&self.features(&[input])?)?.data()[0])),
            None => Ok(None),
        }
    }

    /// All tensors (frozen ones included) under stable names.
    pub fn named_tensors(&self) -> Vec<NamedTensor> {
        let mut out = vec![NamedTensor {
            name: "text.embedding".into(),
            tensor: self.embedding.matrix().clone(),
        }];
        self.visit_params("", &mut |name, p| {
            out.push(NamedTensor {
                name: name.to_string(),
                tensor: p.value.clone(),
            })
        });
        out
    }

    /// Rebuilds a model from [`MdqnModel::named_tensors`] output.
    pub fn from_named_tensors(tensors: &[NamedTensor]) -> Result<Self, AgentError> {
        let get = |name: &str| -> Result<Tensor, AgentError> {
            tensors
                .iter()
                .find(|t| t.name == name)
                .map(|t| t.tensor.clone())
                .ok_or_else(|| AgentError::CheckpointMismatch(format!("missing tensor `{name}`")))
        };
        let dense = |prefix: &str| -> Result<DenseLayer, AgentError> {
            Ok(DenseLayer::from_parts(get(&format!("{prefix}.weight"))?, get(&format!("{prefix}.bias"))?)?)
        };
        let gate = |kind: &str| -> Result<[Tensor; 3], AgentError> {
            Ok([
                get(&format!("text.gru.{kind}_z"))?,
                get(&format!("text.gru.{kind}_r"))?,
                get(&format!("text.gru.{kind}_n"))?,
            ])
        };
        let projector = FrozenProjector::from_matrix(get("visual.projection")?)?;
        let embedding = EmbeddingTable::from_matrix(get("text.embedding")?);
        let text = RecurrentEncoder::from_parts(gate("w")?, gate("u")?, gate("b")?)?;
        let mut trunk = Vec::new();
        while tensors.iter().any(|t| t.name == format!("trunk.{}.weight", trunk.len())) {
            trunk.push(dense(&format!("trunk.{}", trunk.len()))?);
        }
        let head = dense("head")?;
        let value = if tensors.iter().any(|t| t.name == "value.weight") {
            Some(dense("value")?)
        } else {
            None
        };
        let model = MdqnModel {
            projector,
            embedding,
            text,
            trunk,
            head,
            value,
            pre_activations: Vec::new(),
            text_groups: Vec::new(),
        };
        model.check_shapes()?;
        Ok(model)
    }

    fn check_shapes(&self) -> Result<(), AgentError> {
        let mismatch = |what: &str| AgentError::CheckpointMismatch(format!("inconsistent shapes at {what}"));
        if self.embedding.dim() != self.text.input_dim() {
            return Err(mismatch("text.embedding"));
        }
        let mut width = self.projector.output_dim() + self.text.hidden_dim();
        for (i, l) in self.trunk.iter().enumerate() {
            if l.input_dim() != width {
                return Err(mismatch(&format!("trunk.{i}")));
            }
            width = l.output_dim();
        }
        if self.trunk.is_empty() || self.head.input_dim() != width {
            return Err(mismatch("head"));
        }
        if self.value.as_ref().is_some_and(|v| v.input_dim() != width || v.output_dim() != 1) {
            return Err(mismatch("value"));
        }
        Ok(())
    }
}

impl Parameterized for MdqnModel {
    fn visit_params(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param)) {
        self.projector.visit_params(&join(prefix, "visual"), f);
        self.text.visit_params(&join(prefix, "text.gru"), f);
        for (i, l) in self.trunk.iter().enumerate() {
            l.visit_params(&join(prefix, &format!("trunk.{i}")), f);
        }
        self.head.visit_params(&join(prefix, "head"), f);
        if let Some(v) = &self.value {
            v.visit_params(&join(prefix, "value"), f);
        }
    }

    fn visit_params_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        self.projector.visit_params_mut(&join(prefix, "visual"), f);
        self.text.visit_params_mut(&join(prefix, "text.gru"), f);
        for (i, l) in self.trunk.iter_mut().enumerate() {
            l.visit_params_mut(&join(prefix, &format!("trunk.{i}")), f);
        }
        self.head.visit_params_mut(&join(prefix, "head"), f);
        if let Some(v) = &mut self.value {
            v.visit_params_mut(&join(prefix, "value"), f);
        }
    }
}

impl QFunction for MdqnModel {
    type Input = MdqnInput;

    fn action_count(&self) -> usize {
        self.head.output_dim()
    }

    fn q_values_batch(&self, inputs: &[&MdqnInput]) -> Result<Tensor, AgentError> {
        Ok(self.head.forward(&self.features(inputs)?)?)
    }

    fn forward_train(&mut self, inputs: &[&MdqnInput]) -> Result<Tensor, AgentError> {
        let image = self.projector.project(&self.observation_matrix(inputs)?)?;
        self.text.clear_tape();
        let (unique, groups) = group_instructions(inputs);
        let mut encoded = Vec::with_capacity(unique.len());
        for enc in unique {
            let seq = self.text_sequence(enc)?;
            encoded.push(self.text.forward_train(&seq)?);
        }
        let text = Tensor::stack_rows(groups.iter().map(|&g| encoded[g].as_slice()), self.text.hidden_dim())?;
        self.text_groups = groups;
        let mut h = Tensor::concat_cols(&image, &text)?;
        self.pre_activations.clear();
        for layer in &mut self.trunk {
            let pre = layer.forward_train(&h)?;
            h = relu(&pre);
            self.pre_activations.push(pre);
        }
        Ok(self.head.forward_train(&h)?)
    }

    fn backward(&mut self, dq: &Tensor) -> Result<(), AgentError> {
        if self.pre_activations.len() != self.trunk.len() {
            return Err(NetError::NoRecordedForward.into());
        }
        let mut g = self.head.backward(dq)?;
        for (layer, pre) in self.trunk.iter_mut().zip(self.pre_activations.drain(..)).rev() {
            g = layer.backward(&relu_backward(&pre, &g))?;
        }
        let visual = self.projector.output_dim();
        let (_, d_text) = g.split_cols(visual);
        let unique = self.text_groups.iter().max().map_or(0, |m| m + 1);
        let mut d_unique = Tensor::zeros(&[unique, d_text.cols()]);
        for (r, &grp) in self.text_groups.iter().enumerate() {
            for (a, b) in d_unique.row_mut(grp).iter_mut().zip(d_text.row(r)) {
                *a += b;
            }
        }
        self.text.backward(&d_unique)?;
        Ok(())
    }

    fn grow_head(&mut self, new_action_count: usize, rng: &mut ChaCha8Rng) -> Result<(), AgentError> {
        self.head.grow_outputs(new_action_count, rng)?;
        Ok(())
    }

    fn head_param_names(&self) -> Vec<String> {
        vec!["head.weight".into(), "head.bias".into()]
    }
}
