//! Building blocks recorded on a [`Tape`]: affine layers, the gated
//! recurrent cell and scaled dot-product self-attention.

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};

use super::ParamVars;

/// Additive score mask for disallowed (future) positions. exp() of it
/// underflows to exactly zero.
const MASKED_SCORE: f64 = -1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Identity,
}

/// `act(x·w + b)` for a batch of rows `x`.
pub fn dense_forward<'t>(x: Var<'t>, w: Var<'t>, b: Var<'t>, act: Activation) -> Result<Var<'t>> {
    let (xs, ws, bs) = (x.value().shape(), w.value().shape(), b.value().shape());
    if xs[1] != ws[0] || bs != [1, ws[1]] {
        return Err(Error::shape(format!("dense: x {xs:?}, w {ws:?}, b {bs:?}")));
    }
    let y = x.matmul(w)?.add_row(b)?;
    Ok(match act {
        Activation::Tanh => y.tanh(),
        Activation::Identity => y,
    })
}

/// Input-side projections `x·W_g + b_g` of the three gates, for a batch of rows.
#[derive(Debug, Clone, Copy)]
pub struct GateInputs<'t> {
    pub update: Var<'t>,
    pub reset: Var<'t>,
    pub candidate: Var<'t>,
}

impl<'t> GateInputs<'t> {
    pub fn project(x: Var<'t>, params: &ParamVars<'t>, prefix: &str) -> Result<Self> {
        let proj = |gate: &str| -> Result<Var<'t>> {
            let w = params.get(&format!("{prefix}.w_{gate}"))?;
            let b = params.get(&format!("{prefix}.b_{gate}"))?;
            dense_forward(x, w, b, Activation::Identity)
        };
        Ok(GateInputs { update: proj("z")?, reset: proj("r")?, candidate: proj("n")? })
    }

    pub fn row(&self, t: usize) -> GateInputs<'t> {
        GateInputs {
            update: self.update.slice_rows(t, 1),
            reset: self.reset.slice_rows(t, 1),
            candidate: self.candidate.slice_rows(t, 1),
        }
    }
}

/// One gated recurrent update on a `1 × H` hidden row:
///
/// ```text
/// z  = σ(x·W_z + b_z + h·U_z)
/// r  = σ(x·W_r + b_r + h·U_r)
/// n  = tanh(x·W_n + b_n + (r ⊙ h)·U_n)
/// h' = (1 − z) ⊙ n + z ⊙ h
/// ```
pub fn gru_step<'t>(inputs: GateInputs<'t>, h: Var<'t>, params: &ParamVars<'t>, prefix: &str) -> Result<Var<'t>> {
    let u = |gate: &str| params.get(&format!("{prefix}.u_{gate}"));
    let z = (inputs.update + h.matmul(u("z")?)?).sigmoid();
    let r = (inputs.reset + h.matmul(u("r")?)?).sigmoid();
    let n = (inputs.candidate + (r * h).matmul(u("n")?)?).tanh();
    let keep = z.scale(-1.0).shift(1.0);
    Ok(keep * n + z * h)
}

/// Single-row convenience wrapper around [`gru_step`].
pub fn recurrent_cell_step<'t>(x: Var<'t>, h: Var<'t>, params: &ParamVars<'t>, prefix: &str) -> Result<Var<'t>> {
    if x.value().rows() != 1 || h.value().rows() != 1 {
        return Err(Error::shape("recurrent_cell_step takes single rows"));
    }
    let hidden = params.get(&format!("{prefix}.u_z"))?.value().rows();
    if h.value().cols() != hidden {
        return Err(Error::shape(format!("hidden state has {} columns, cell expects {hidden}", h.value().cols())));
    }
    gru_step(GateInputs::project(x, params, prefix)?, h, params, prefix)
}

/// Result of [`attention_forward`].
#[derive(Debug, Clone)]
pub struct AttentionOutput<'t> {
    /// `Tq × d`: residual plus the summed head outputs.
    pub output: Var<'t>,
    /// Per head, the `Tq × Tk` row-stochastic attention weights.
    pub weights: Vec<Var<'t>>,
}

/// Multi-head scaled dot-product attention of `queries` (`Tq × d`) over
/// `keys` (`Tk × d`), with a residual connection on the query rows.
///
/// With `causal`, query row `i` may attend to key rows `0..=i + (Tk − Tq)`,
/// which makes the batched and the step-at-a-time evaluations agree row by row.
pub fn attention_forward<'t>(
    queries: Var<'t>,
    keys: Var<'t>,
    params: &ParamVars<'t>,
    prefix: &str,
    n_heads: usize,
    causal: bool,
) -> Result<AttentionOutput<'t>> {
    let tape: &'t Tape = queries.tape();
    let ([tq, d], [tk, dk_src]) = (queries.value().shape(), keys.value().shape());
    if tq == 0 || tk == 0 {
        return Err(Error::shape("attention over an empty sequence"));
    }
    if d != dk_src || tq > tk {
        return Err(Error::shape(format!("attention queries {tq}x{d} vs keys {tk}x{dk_src}")));
    }
    if n_heads == 0 || d % n_heads != 0 {
        return Err(Error::shape(format!("{n_heads} heads do not divide width {d}")));
    }
    let head_dim = d / n_heads;
    let scale = 1.0 / (head_dim as f64).sqrt();
    let mask = causal.then(|| {
        let offset = tk - tq;
        let mut m = Tensor::zeros(tq, tk);
        for i in 0..tq {
            for j in (i + offset + 1)..tk {
                m.set(i, j, MASKED_SCORE);
            }
        }
        tape.constant(m)
    });

    let mut output = queries;
    let mut weights = Vec::with_capacity(n_heads);
    for h in 0..n_heads {
        let p = |name: &str| params.get(&format!("{prefix}.h{h}.{name}"));
        let q = queries.matmul(p("w_q")?)?;
        let k = keys.matmul(p("w_k")?)?;
        let v = keys.matmul(p("w_v")?)?;
        let mut scores = q.matmul(k.t())?.scale(scale);
        if let Some(mask) = mask {
            scores = scores + mask;
        }
        let attn = scores.log_softmax_rows().exp();
        output = output + attn.matmul(v)?.matmul(p("w_o")?)?;
        weights.push(attn);
    }
    Ok(AttentionOutput { output, weights })
}
