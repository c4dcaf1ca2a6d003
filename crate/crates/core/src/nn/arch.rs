//! Policy/value architectures behind one trait, looked up by name.
//!
//! Every architecture maps an observation sequence to per-step logits over
//! `n_cells × n_levels` and a scalar value, through a shared trunk with
//! separate linear heads.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{attention_forward, dense_forward, gru_step, Activation, GateInputs};
use super::{ParamSet, ParamVars};
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchKind {
    Mlp,
    Rnn,
    RnnAttention,
}

impl ArchKind {
    pub const ALL: [ArchKind; 3] = [ArchKind::Mlp, ArchKind::Rnn, ArchKind::RnnAttention];

    pub fn name(self) -> &'static str {
        match self {
            ArchKind::Mlp => "mlp",
            ArchKind::Rnn => "rnn",
            ArchKind::RnnAttention => "rnn_attention",
        }
    }
}

impl fmt::Display for ArchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ArchKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ArchKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown architecture `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub kind: ArchKind,
    pub obs_dim: usize,
    /// Number of independently controlled links (`n_bs · n_bands`).
    pub n_cells: usize,
    pub n_levels: usize,
    /// Recurrent state width.
    pub hidden_size: usize,
    pub n_heads: usize,
    /// Hidden layer widths of the feed-forward trunk.
    pub layer_sizes: Vec<usize>,
}

impl ArchSpec {
    pub fn new(kind: ArchKind, obs_dim: usize, n_cells: usize, n_levels: usize) -> Self {
        ArchSpec { kind, obs_dim, n_cells, n_levels, hidden_size: 64, n_heads: 1, layer_sizes: vec![64, 64] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.obs_dim == 0 || self.n_cells == 0 || self.n_levels < 2 {
            return Err(Error::config("architecture needs obs_dim, n_cells > 0 and n_levels >= 2"));
        }
        if self.hidden_size == 0 {
            return Err(Error::config("hidden_size must be positive"));
        }
        if self.n_heads == 0 || self.hidden_size % self.n_heads != 0 {
            return Err(Error::config("n_heads must divide hidden_size"));
        }
        if self.kind == ArchKind::Mlp && (self.layer_sizes.is_empty() || self.layer_sizes.contains(&0)) {
            return Err(Error::config("mlp needs at least one nonzero hidden layer"));
        }
        Ok(())
    }

    pub fn n_logits(&self) -> usize {
        self.n_cells * self.n_levels
    }

    fn feature_width(&self) -> usize {
        match self.kind {
            ArchKind::Mlp => *self.layer_sizes.last().expect("validated"),
            ArchKind::Rnn | ArchKind::RnnAttention => self.hidden_size,
        }
    }
}

/// Per-step policy output.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    /// `n_cells × n_levels`.
    pub logits: Tensor,
    pub value: f64,
    /// Recurrent state after this step, if any.
    pub hidden: Option<Tensor>,
}

/// Batched outputs for one episode segment.
#[derive(Debug, Clone, Copy)]
pub struct SequenceOutput<'t> {
    /// `T × (n_cells · n_levels)`.
    pub logits: Var<'t>,
    /// `T × 1`.
    pub values: Var<'t>,
}

/// State carried between single steps within an episode.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Carry {
    hidden: Option<Tensor>,
    history: Vec<Tensor>,
}

impl Carry {
    pub fn hidden(&self) -> Option<&Tensor> {
        self.hidden.as_ref()
    }
}

pub trait PolicyNet: Send + Sync {
    fn spec(&self) -> &ArchSpec;

    fn init_params(&self, rng: &mut SimRng) -> ParamSet;

    /// Per-step logits and values for a `T × obs_dim` segment, recurrent
    /// state starting from zero.
    fn forward_sequence<'t>(&self, params: &ParamVars<'t>, obs: Var<'t>) -> Result<SequenceOutput<'t>>;

    /// One step of inference, advancing `carry`.
    fn step(&self, params: &ParamSet, obs: &[f64], carry: &mut Carry) -> Result<PolicyOutput>;

    fn is_recurrent(&self) -> bool {
        self.spec().kind != ArchKind::Mlp
    }
}

/// Runs `obs_seq` through the policy from a fresh state and returns the
/// output of the final step.
pub fn policy_forward(net: &dyn PolicyNet, params: &ParamSet, obs_seq: &[Vec<f64>]) -> Result<PolicyOutput> {
    if obs_seq.is_empty() {
        return Err(Error::shape("policy_forward needs at least one observation"));
    }
    let mut carry = Carry::default();
    let mut out = None;
    for obs in obs_seq {
        out = Some(net.step(params, obs, &mut carry)?);
    }
    Ok(out.expect("nonempty sequence"))
}

type Constructor = fn(ArchSpec) -> Result<Box<dyn PolicyNet>>;

/// Name → constructor table for policy architectures.
pub struct ArchRegistry {
    entries: BTreeMap<&'static str, Constructor>,
}

impl Default for ArchRegistry {
    fn default() -> Self {
        let mut r = ArchRegistry { entries: BTreeMap::new() };
        r.register(ArchKind::Mlp.name(), |s| Ok(Box::new(MlpPolicy::new(s)?)));
        r.register(ArchKind::Rnn.name(), |s| Ok(Box::new(RecurrentPolicy::new(s)?)));
        r.register(ArchKind::RnnAttention.name(), |s| Ok(Box::new(RecurrentPolicy::new(s)?)));
        r
    }
}

impl ArchRegistry {
    pub fn register(&mut self, name: &'static str, ctor: Constructor) {
        self.entries.insert(name, ctor);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }

    pub fn build(&self, spec: &ArchSpec) -> Result<Box<dyn PolicyNet>> {
        let ctor = self
            .entries
            .get(spec.kind.name())
            .ok_or_else(|| Error::config(format!("no architecture registered as `{}`", spec.kind)))?;
        ctor(spec.clone())
    }
}

pub fn build_policy(spec: &ArchSpec) -> Result<Box<dyn PolicyNet>> {
    ArchRegistry::default().build(spec)
}

fn xavier(rng: &mut SimRng, rows: usize, cols: usize, gain: f64) -> Tensor {
    let bound = gain * (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::new(rows, cols, data).expect("xavier shape")
}

fn insert(p: &mut ParamSet, name: String, t: Tensor) {
    p.insert(name, t).expect("architecture parameter names are unique");
}

/// Small output gain keeps the initial policy close to uniform.
const POLICY_HEAD_GAIN: f64 = 0.01;

fn init_heads(spec: &ArchSpec, p: &mut ParamSet, rng: &mut SimRng) {
    let width = spec.feature_width();
    insert(p, "policy.w".into(), xavier(rng, width, spec.n_logits(), POLICY_HEAD_GAIN));
    insert(p, "policy.b".into(), Tensor::zeros(1, spec.n_logits()));
    insert(p, "value.w".into(), xavier(rng, width, 1, 1.0));
    insert(p, "value.b".into(), Tensor::zeros(1, 1));
}

fn apply_heads<'t>(features: Var<'t>, params: &ParamVars<'t>) -> Result<SequenceOutput<'t>> {
    let logits = dense_forward(features, params.get("policy.w")?, params.get("policy.b")?, Activation::Identity)?;
    let values = dense_forward(features, params.get("value.w")?, params.get("value.b")?, Activation::Identity)?;
    Ok(SequenceOutput { logits, values })
}

fn check_obs(spec: &ArchSpec, obs: &Tensor) -> Result<()> {
    if obs.rows() == 0 {
        return Err(Error::shape("empty observation sequence"));
    }
    if obs.cols() != spec.obs_dim {
        return Err(Error::shape(format!("observation length {} != {}", obs.cols(), spec.obs_dim)));
    }
    Ok(())
}

fn single_output(spec: &ArchSpec, out: SequenceOutput<'_>, hidden: Option<Tensor>) -> Result<PolicyOutput> {
    let logits = out.logits.value().reshape(spec.n_cells, spec.n_levels)?;
    Ok(PolicyOutput { logits, value: out.values.item(), hidden })
}

/// Feed-forward trunk of tanh layers.
pub struct MlpPolicy {
    spec: ArchSpec,
}

impl MlpPolicy {
    pub fn new(spec: ArchSpec) -> Result<Self> {
        spec.validate()?;
        if spec.kind != ArchKind::Mlp {
            return Err(Error::config("MlpPolicy built from a non-mlp spec"));
        }
        Ok(MlpPolicy { spec })
    }
}

impl PolicyNet for MlpPolicy {
    fn spec(&self) -> &ArchSpec {
        &self.spec
    }

    fn init_params(&self, rng: &mut SimRng) -> ParamSet {
        let mut p = ParamSet::new();
        let mut fan_in = self.spec.obs_dim;
        for (i, &width) in self.spec.layer_sizes.iter().enumerate() {
            insert(&mut p, format!("trunk.{i}.w"), xavier(rng, fan_in, width, 1.0));
            insert(&mut p, format!("trunk.{i}.b"), Tensor::zeros(1, width));
            fan_in = width;
        }
        init_heads(&self.spec, &mut p, rng);
        p
    }

    fn forward_sequence<'t>(&self, params: &ParamVars<'t>, obs: Var<'t>) -> Result<SequenceOutput<'t>> {
        check_obs(&self.spec, &obs.value())?;
        let mut x = obs;
        for i in 0..self.spec.layer_sizes.len() {
            x = dense_forward(x, params.get(&format!("trunk.{i}.w"))?, params.get(&format!("trunk.{i}.b"))?, Activation::Tanh)?;
        }
        apply_heads(x, params)
    }

    fn step(&self, params: &ParamSet, obs: &[f64], _carry: &mut Carry) -> Result<PolicyOutput> {
        let tape = Tape::new();
        let vars = params.to_constants(&tape);
        let out = self.forward_sequence(&vars, tape.constant(Tensor::row(obs.to_vec())))?;
        single_output(&self.spec, out, None)
    }
}

/// Gated recurrent trunk, optionally followed by causal self-attention over
/// the episode's hidden-state history.
pub struct RecurrentPolicy {
    spec: ArchSpec,
}

impl RecurrentPolicy {
    pub fn new(spec: ArchSpec) -> Result<Self> {
        spec.validate()?;
        if spec.kind == ArchKind::Mlp {
            return Err(Error::config("RecurrentPolicy built from an mlp spec"));
        }
        Ok(RecurrentPolicy { spec })
    }

    fn attends(&self) -> bool {
        self.spec.kind == ArchKind::RnnAttention
    }
}

impl PolicyNet for RecurrentPolicy {
    fn spec(&self) -> &ArchSpec {
        &self.spec
    }

    fn init_params(&self, rng: &mut SimRng) -> ParamSet {
        let (d_in, h) = (self.spec.obs_dim, self.spec.hidden_size);
        let mut p = ParamSet::new();
        for gate in ["z", "r", "n"] {
            insert(&mut p, format!("gru.w_{gate}"), xavier(rng, d_in, h, 1.0));
            insert(&mut p, format!("gru.u_{gate}"), xavier(rng, h, h, 1.0));
            insert(&mut p, format!("gru.b_{gate}"), Tensor::zeros(1, h));
        }
        if self.attends() {
            let head_dim = h / self.spec.n_heads;
            for i in 0..self.spec.n_heads {
                insert(&mut p, format!("attn.h{i}.w_q"), xavier(rng, h, head_dim, 1.0));
                insert(&mut p, format!("attn.h{i}.w_k"), xavier(rng, h, head_dim, 1.0));
                insert(&mut p, format!("attn.h{i}.w_v"), xavier(rng, h, head_dim, 1.0));
                insert(&mut p, format!("attn.h{i}.w_o"), xavier(rng, head_dim, h, 1.0));
            }
        }
        init_heads(&self.spec, &mut p, rng);
        p
    }

    fn forward_sequence<'t>(&self, params: &ParamVars<'t>, obs: Var<'t>) -> Result<SequenceOutput<'t>> {
        check_obs(&self.spec, &obs.value())?;
        let tape = obs.tape();
        let steps = obs.value().rows();
        let gates = GateInputs::project(obs, params, "gru")?;
        let mut h = tape.constant(Tensor::zeros(1, self.spec.hidden_size));
        let mut hidden_rows = Vec::with_capacity(steps);
        for t in 0..steps {
            h = gru_step(gates.row(t), h, params, "gru")?;
            hidden_rows.push(h);
        }
        let hidden = Var::concat_rows(&hidden_rows)?;
        let features = if self.attends() {
            attention_forward(hidden, hidden, params, "attn", self.spec.n_heads, true)?.output
        } else {
            hidden
        };
        apply_heads(features, params)
    }

    fn step(&self, params: &ParamSet, obs: &[f64], carry: &mut Carry) -> Result<PolicyOutput> {
        let tape = Tape::new();
        let vars = params.to_constants(&tape);
        let x = tape.constant(Tensor::row(obs.to_vec()));
        check_obs(&self.spec, &x.value())?;
        let h_prev = tape.constant(carry.hidden.clone().unwrap_or_else(|| Tensor::zeros(1, self.spec.hidden_size)));
        let h = gru_step(GateInputs::project(x, &vars, "gru")?, h_prev, &vars, "gru")?;
        let h_value = (*h.value()).clone();
        let features = if self.attends() {
            let mut rows: Vec<Var<'_>> = carry.history.iter().map(|r| tape.constant(r.clone())).collect();
            rows.push(h);
            let keys = Var::concat_rows(&rows)?;
            attention_forward(h, keys, &vars, "attn", self.spec.n_heads, true)?.output
        } else {
            h
        };
        let out = apply_heads(features, &vars)?;
        if self.attends() {
            carry.history.push(h_value.clone());
        }
        carry.hidden = Some(h_value.clone());
        single_output(&self.spec, out, Some(h_value))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn spec(kind: ArchKind) -> ArchSpec {
        ArchSpec { hidden_size: 8, n_heads: 2, layer_sizes: vec![8, 8], ..ArchSpec::new(kind, 81, 15, 4) }
    }

    fn zeroed(p: &ParamSet) -> ParamSet {
        let mut z = p.clone();
        for (_, t) in z.iter_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        z
    }

    #[test]
    fn zero_params_give_uniform_policy() {
        for kind in ArchKind::ALL {
            let net = build_policy(&spec(kind)).unwrap();
            let p = zeroed(&net.init_params(&mut seeded(0)));
            let out = policy_forward(net.as_ref(), &p, &[vec![0.3; 81], vec![-0.2; 81]]).unwrap();
            assert!(out.logits.data().iter().all(|&l| l == 0.0));
            for row in 0..15 {
                let probs = out.logits.softmax_rows();
                assert!((probs.get(row, 0) - 0.25).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn output_shapes_agree_across_architectures() {
        for kind in ArchKind::ALL {
            let net = build_policy(&spec(kind)).unwrap();
            let p = net.init_params(&mut seeded(1));
            let out = policy_forward(net.as_ref(), &p, &[vec![0.1; 81]]).unwrap();
            assert_eq!(out.logits.shape(), [15, 4]);
            assert_eq!(out.hidden.is_some(), kind != ArchKind::Mlp);
        }
    }

    #[test]
    fn rejects_empty_history_and_wrong_length() {
        for kind in ArchKind::ALL {
            let net = build_policy(&spec(kind)).unwrap();
            let p = net.init_params(&mut seeded(1));
            assert!(policy_forward(net.as_ref(), &p, &[]).is_err());
            assert!(policy_forward(net.as_ref(), &p, &[vec![0.0; 80]]).is_err());
        }
    }

    #[test]
    fn stepwise_matches_batched() {
        for kind in ArchKind::ALL {
            let net = build_policy(&spec(kind)).unwrap();
            let p = net.init_params(&mut seeded(2));
            let obs: Vec<Vec<f64>> = (0..6).map(|t| (0..81).map(|i| ((i * 7 + t * 3) as f64).sin()).collect()).collect();
            let mut carry = Carry::default();
            let stepped: Vec<PolicyOutput> = obs.iter().map(|o| net.step(&p, o, &mut carry).unwrap()).collect();
            let tape = Tape::new();
            let vars = p.to_constants(&tape);
            let x = tape.constant(Tensor::new(6, 81, obs.concat()).unwrap());
            let batched = net.forward_sequence(&vars, x).unwrap();
            for (t, s) in stepped.iter().enumerate() {
                let row = batched.logits.value().row_slice(t).to_vec();
                for (a, b) in row.iter().zip(s.logits.data()) {
                    assert!((a - b).abs() < 1e-12, "{kind}: {a} vs {b}");
                }
                assert!((batched.values.value().get(t, 0) - s.value).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spec_validation() {
        let mut s = spec(ArchKind::RnnAttention);
        s.n_heads = 3;
        assert!(build_policy(&s).is_err());
        s.n_heads = 1;
        s.hidden_size = 0;
        assert!(build_policy(&s).is_err());
        assert_eq!("rnn_attention".parse::<ArchKind>().unwrap(), ArchKind::RnnAttention);
        assert!("transformer".parse::<ArchKind>().is_err());
    }
}
