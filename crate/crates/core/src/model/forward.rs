use super::{LayerParams, ModelParams};
use crate::autograd::{concat_cols, Tape, Var};
use crate::error::{NgcError, Result};

/// Square visibility matrix for one layer: `visible[r·T + c]` is true when
/// query `r` may attend to key `c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttentionMask {
    pub size: usize,
    pub visible: Vec<bool>,
}

impl AttentionMask {
    pub fn causal(size: usize) -> Self {
        let mut visible = vec![false; size * size];
        for r in 0..size {
            visible[r * size..r * size + r + 1].iter_mut().for_each(|v| *v = true);
        }
        Self { size, visible }
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.visible[row * self.size + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.visible[row * self.size + col] = value;
    }

    pub fn row(&self, row: usize) -> &[bool] {
        &self.visible[row * self.size..(row + 1) * self.size]
    }

    /// Visible key indices of one row.
    pub fn visible_in_row(&self, row: usize) -> Vec<usize> {
        self.row(row)
            .iter()
            .enumerate()
            .filter(|(_, &v)| v)
            .map(|(c, _)| c)
            .collect()
    }

    /// Diagonal set and nothing above it.
    pub fn validate(&self) -> Result<()> {
        if self.visible.len() != self.size * self.size {
            return Err(NgcError::Dimension(format!(
                "mask of {} entries claims size {}",
                self.visible.len(),
                self.size
            )));
        }
        for r in 0..self.size {
            if !self.get(r, r) {
                return Err(NgcError::Usage(format!("mask row {r} hides its own position")));
            }
            if let Some(c) = (r + 1..self.size).find(|&c| self.get(r, c)) {
                return Err(NgcError::Usage(format!("mask row {r} sees future position {c}")));
            }
        }
        Ok(())
    }
}

pub struct LayerVars<'t> {
    pub attn_norm: Var<'t>,
    pub wq: Var<'t>,
    pub wk: Var<'t>,
    pub wv: Var<'t>,
    pub wo: Var<'t>,
    pub mlp_norm: Var<'t>,
    pub w1: Var<'t>,
    pub w2: Var<'t>,
}

/// Model weights loaded onto a tape as differentiable leaves.
pub struct ModelVars<'t> {
    pub config: super::ModelConfig,
    pub embed: Var<'t>,
    pub layers: Vec<LayerVars<'t>>,
    pub final_norm: Var<'t>,
    pub head: Var<'t>,
}

impl<'t> ModelVars<'t> {
    pub fn load(tape: &'t Tape, params: &ModelParams) -> Result<Self> {
        let layer = |p: &LayerParams| -> Result<LayerVars<'t>> {
            Ok(LayerVars {
                attn_norm: tape.param(&p.attn_norm)?,
                wq: tape.param(&p.wq)?,
                wk: tape.param(&p.wk)?,
                wv: tape.param(&p.wv)?,
                wo: tape.param(&p.wo)?,
                mlp_norm: tape.param(&p.mlp_norm)?,
                w1: tape.param(&p.w1)?,
                w2: tape.param(&p.w2)?,
            })
        };
        Ok(Self {
            config: params.config,
            embed: tape.param(&params.embed)?,
            layers: params.layers.iter().map(layer).collect::<Result<_>>()?,
            final_norm: tape.param(&params.final_norm)?,
            head: tape.param(&params.head)?,
        })
    }

    /// Leaves in the order of [`ModelParams::named`].
    pub fn list(&self) -> Vec<Var<'t>> {
        let mut out = vec![self.embed];
        for l in &self.layers {
            out.extend([l.attn_norm, l.wq, l.wk, l.wv, l.wo, l.mlp_norm, l.w1, l.w2]);
        }
        out.push(self.final_norm);
        out.push(self.head);
        out
    }

    pub fn grads(&self) -> super::Gradients {
        let tape = self.embed.tape();
        super::Gradients {
            tensors: self.list().into_iter().map(|v| tape.grad_or_zeros(v)).collect(),
        }
    }
}

/// Per-layer queries and keys of a forward pass, `T × d_model` each with
/// head `h` in columns `h·d_h .. (h+1)·d_h`, after rotary embedding.
pub struct LayerTrace<'t> {
    pub queries: Vec<Var<'t>>,
    pub keys: Vec<Var<'t>>,
}

pub struct ForwardOutput<'t> {
    /// `T × V` next-token logits.
    pub logits: Var<'t>,
    pub trace: LayerTrace<'t>,
}

pub(crate) fn check_tokens(tokens: &[usize], vocab: usize, max_seq: usize) -> Result<()> {
    if tokens.is_empty() {
        return Err(NgcError::Usage("empty token sequence".into()));
    }
    if tokens.len() > max_seq {
        return Err(NgcError::Dimension(format!(
            "{} tokens exceed max_seq {max_seq}",
            tokens.len()
        )));
    }
    if let Some(&bad) = tokens.iter().find(|&&t| t >= vocab) {
        return Err(NgcError::Usage(format!("token id {bad} outside vocabulary of {vocab}")));
    }
    Ok(())
}

/// Full-sequence forward pass where layer `ℓ` attends through `masks[ℓ]`.
pub fn forward_masked<'t>(vars: &ModelVars<'t>, tokens: &[usize], masks: &[AttentionMask]) -> Result<ForwardOutput<'t>> {
    let cfg = vars.config;
    check_tokens(tokens, cfg.vocab, cfg.max_seq)?;
    let t = tokens.len();
    if masks.len() != cfg.n_layers {
        return Err(NgcError::Dimension(format!(
            "{} masks for {} layers",
            masks.len(),
            cfg.n_layers
        )));
    }
    for (l, m) in masks.iter().enumerate() {
        if m.size != t {
            return Err(NgcError::Dimension(format!("layer {l} mask is {0}x{0} for {t} tokens", m.size)));
        }
        m.validate()?;
    }
    let dh = cfg.d_head();
    let scale = 1.0 / (dh as f64).sqrt();
    let positions: Vec<usize> = (0..t).collect();

    let mut x = vars.embed.gather_rows(tokens)?;
    let mut trace = LayerTrace {
        queries: Vec::with_capacity(cfg.n_layers),
        keys: Vec::with_capacity(cfg.n_layers),
    };
    for (lv, mask) in vars.layers.iter().zip(masks) {
        let h = x.rmsnorm(&lv.attn_norm)?;
        let q = h.matmul(&lv.wq)?.rope(&positions, dh)?;
        let k = h.matmul(&lv.wk)?.rope(&positions, dh)?;
        let v = h.matmul(&lv.wv)?;
        let mut heads = Vec::with_capacity(cfg.n_heads);
        for hd in 0..cfg.n_heads {
            let qh = q.slice_cols(hd * dh, dh)?;
            let kh = k.slice_cols(hd * dh, dh)?;
            let vh = v.slice_cols(hd * dh, dh)?;
            let att = qh.matmul_nt(&kh)?.scale(scale)?.masked_softmax_lastdim(&mask.visible)?;
            heads.push(att.matmul(&vh)?);
        }
        let attn = concat_cols(&heads)?.matmul(&lv.wo)?;
        x = x.add(&attn)?;
        let m = x.rmsnorm(&lv.mlp_norm)?.matmul(&lv.w1)?.gelu()?.matmul(&lv.w2)?;
        x = x.add(&m)?;
        trace.queries.push(q);
        trace.keys.push(k);
    }
    let logits = x.rmsnorm(&vars.final_norm)?.matmul(&vars.head)?;
    Ok(ForwardOutput { logits, trace })
}

/// Logits of a masked forward pass without keeping a tape around.
pub fn forward_logits(params: &ModelParams, tokens: &[usize], masks: &[AttentionMask]) -> Result<Vec<f64>> {
    let tape = Tape::new();
    let vars = ModelVars::load(&tape, params)?;
    Ok(forward_masked(&vars, tokens, masks)?.logits.value())
}

/// Causal masks for every layer.
pub fn causal_masks(layers: usize, size: usize) -> Vec<AttentionMask> {
    vec![AttentionMask::causal(size); layers]
}
