//! Differentiable building blocks: linear layers, GRU and LSTM cells, the
//! bidirectional sequence encoder, and segment-aware attention. Each block
//! is a composition of tape primitives, so the backward pass comes for free
//! and can be verified by finite differences.

use crate::neural::init::Initializer;
use crate::neural::params::{ModelParameters, ParamId};
use crate::neural::tape::{ShapeError, Tape, Var};
use crate::tensor::Scalar;

/// y = x·A + b with A stored (in x out).
#[derive(Debug, Clone)]
pub struct LinearParams {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl LinearParams {
    pub fn register<F: Scalar>(
        params: &mut ModelParameters<F>,
        init: &mut Initializer,
        name: &str,
        in_dim: usize,
        out_dim: usize,
    ) -> Self {
        LinearParams {
            weight: params.register(&format!("{name}.weight"), init.glorot_uniform(in_dim, out_dim)),
            bias: params.register(&format!("{name}.bias"), init.constant(1, out_dim, 0.0)),
        }
    }
}

pub fn linear<F: Scalar>(
    tape: &mut Tape<F>,
    params: &ModelParameters<F>,
    p: &LinearParams,
    x: Var,
) -> Result<Var, ShapeError> {
    let w = tape.param(params, p.weight);
    let b = tape.param(params, p.bias);
    let xw = tape.matmul(x, w)?;
    tape.add_row_broadcast(xw, b)
}

/// Gate weights for a GRU cell: z and r gates plus the candidate state.
#[derive(Debug, Clone)]
pub struct GruParams {
    pub w_z: ParamId,
    pub u_z: ParamId,
    pub b_z: ParamId,
    pub w_r: ParamId,
    pub u_r: ParamId,
    pub b_r: ParamId,
    pub w_h: ParamId,
    pub u_h: ParamId,
    pub b_h: ParamId,
}

impl GruParams {
    pub fn register<F: Scalar>(
        params: &mut ModelParameters<F>,
        init: &mut Initializer,
        name: &str,
        input_dim: usize,
        hidden_dim: usize,
    ) -> Self {
        let w = |suffix: &str, rows: usize, params: &mut ModelParameters<F>, init: &mut Initializer| {
            if rows == hidden_dim {
                params.register(&format!("{name}.{suffix}"), init.orthogonal(hidden_dim))
            } else {
                params.register(
                    &format!("{name}.{suffix}"),
                    init.glorot_uniform(rows, hidden_dim),
                )
            }
        };
        GruParams {
            w_z: w("w_z", input_dim, params, init),
            u_z: w("u_z", hidden_dim, params, init),
            b_z: params.register(&format!("{name}.b_z"), init.constant(1, hidden_dim, 0.0)),
            w_r: w("w_r", input_dim, params, init),
            u_r: w("u_r", hidden_dim, params, init),
            b_r: params.register(&format!("{name}.b_r"), init.constant(1, hidden_dim, 0.0)),
            w_h: w("w_h", input_dim, params, init),
            u_h: w("u_h", hidden_dim, params, init),
            b_h: params.register(&format!("{name}.b_h"), init.constant(1, hidden_dim, 0.0)),
        }
    }
}

/// One GRU step: h' = (1-z)⊙h + z⊙h̃ with
/// z = σ(m·Wz + h·Uz + bz), r = σ(m·Wr + h·Ur + br),
/// h̃ = tanh(m·Wh + (r⊙h)·Uh + bh).
///
/// `message` and `state` are (n x dim); all rows step in parallel.
pub fn gru_cell<F: Scalar>(
    tape: &mut Tape<F>,
    params: &ModelParameters<F>,
    p: &GruParams,
    message: Var,
    state: Var,
) -> Result<Var, ShapeError> {
    let gate = |tape: &mut Tape<F>, w, u, b| -> Result<Var, ShapeError> {
        let w = tape.param(params, w);
        let u = tape.param(params, u);
        let b = tape.param(params, b);
        let mw = tape.matmul(message, w)?;
        let hu = tape.matmul(state, u)?;
        let s = tape.add(mw, hu)?;
        tape.add_row_broadcast(s, b)
    };
    let z_pre = gate(tape, p.w_z, p.u_z, p.b_z)?;
    let z = tape.sigmoid(z_pre);
    let r_pre = gate(tape, p.w_r, p.u_r, p.b_r)?;
    let r = tape.sigmoid(r_pre);

    let w_h = tape.param(params, p.w_h);
    let u_h = tape.param(params, p.u_h);
    let b_h = tape.param(params, p.b_h);
    let rh = tape.mul(r, state)?;
    let mw = tape.matmul(message, w_h)?;
    let rhu = tape.matmul(rh, u_h)?;
    let cand_pre0 = tape.add(mw, rhu)?;
    let cand_pre = tape.add_row_broadcast(cand_pre0, b_h)?;
    let cand = tape.tanh(cand_pre);

    let keep = tape.one_minus(z);
    let kept = tape.mul(keep, state)?;
    let new = tape.mul(z, cand)?;
    tape.add(kept, new)
}

/// Gate weights for an LSTM cell (input, forget, output, candidate).
#[derive(Debug, Clone)]
pub struct LstmParams {
    pub w_i: ParamId,
    pub u_i: ParamId,
    pub b_i: ParamId,
    pub w_f: ParamId,
    pub u_f: ParamId,
    pub b_f: ParamId,
    pub w_o: ParamId,
    pub u_o: ParamId,
    pub b_o: ParamId,
    pub w_g: ParamId,
    pub u_g: ParamId,
    pub b_g: ParamId,
}

impl LstmParams {
    /// Forget-gate bias starts at 1.
    pub fn register<F: Scalar>(
        params: &mut ModelParameters<F>,
        init: &mut Initializer,
        name: &str,
        input_dim: usize,
        hidden_dim: usize,
    ) -> Self {
        let mat = |suffix: &str, rows: usize, params: &mut ModelParameters<F>, init: &mut Initializer| {
            if rows == hidden_dim {
                params.register(&format!("{name}.{suffix}"), init.orthogonal(hidden_dim))
            } else {
                params.register(
                    &format!("{name}.{suffix}"),
                    init.glorot_uniform(rows, hidden_dim),
                )
            }
        };
        let bias = |suffix: &str, v: f64, params: &mut ModelParameters<F>, init: &mut Initializer| {
            params.register(&format!("{name}.{suffix}"), init.constant(1, hidden_dim, v))
        };
        LstmParams {
            w_i: mat("w_i", input_dim, params, init),
            u_i: mat("u_i", hidden_dim, params, init),
            b_i: bias("b_i", 0.0, params, init),
            w_f: mat("w_f", input_dim, params, init),
            u_f: mat("u_f", hidden_dim, params, init),
            b_f: bias("b_f", 1.0, params, init),
            w_o: mat("w_o", input_dim, params, init),
            u_o: mat("u_o", hidden_dim, params, init),
            b_o: bias("b_o", 0.0, params, init),
            w_g: mat("w_g", input_dim, params, init),
            u_g: mat("u_g", hidden_dim, params, init),
            b_g: bias("b_g", 0.0, params, init),
        }
    }
}

/// One LSTM step over (h, c): i, f, o = σ(...), g = tanh(...),
/// c' = f⊙c + i⊙g, h' = o⊙tanh(c'). Returns (h', c').
pub fn lstm_cell<F: Scalar>(
    tape: &mut Tape<F>,
    params: &ModelParameters<F>,
    p: &LstmParams,
    input: Var,
    h: Var,
    c: Var,
) -> Result<(Var, Var), ShapeError> {
    let pre = |tape: &mut Tape<F>, w, u, b| -> Result<Var, ShapeError> {
        let w = tape.param(params, w);
        let u = tape.param(params, u);
        let b = tape.param(params, b);
        let xw = tape.matmul(input, w)?;
        let hu = tape.matmul(h, u)?;
        let s = tape.add(xw, hu)?;
        tape.add_row_broadcast(s, b)
    };
    let i_pre = pre(tape, p.w_i, p.u_i, p.b_i)?;
    let i = tape.sigmoid(i_pre);
    let f_pre = pre(tape, p.w_f, p.u_f, p.b_f)?;
    let f = tape.sigmoid(f_pre);
    let o_pre = pre(tape, p.w_o, p.u_o, p.b_o)?;
    let o = tape.sigmoid(o_pre);
    let g_pre = pre(tape, p.w_g, p.u_g, p.b_g)?;
    let g = tape.tanh(g_pre);

    let fc = tape.mul(f, c)?;
    let ig = tape.mul(i, g)?;
    let c_new = tape.add(fc, ig)?;
    let c_act = tape.tanh(c_new);
    let h_new = tape.mul(o, c_act)?;
    Ok((h_new, c_new))
}

#[derive(Debug, Clone)]
pub struct BiLstmParams {
    pub forward: LstmParams,
    pub backward: LstmParams,
    pub hidden_per_direction: usize,
}

impl BiLstmParams {
    pub fn register<F: Scalar>(
        params: &mut ModelParameters<F>,
        init: &mut Initializer,
        name: &str,
        input_dim: usize,
        hidden_per_direction: usize,
    ) -> Self {
        BiLstmParams {
            forward: LstmParams::register(
                params,
                init,
                &format!("{name}.fwd"),
                input_dim,
                hidden_per_direction,
            ),
            backward: LstmParams::register(
                params,
                init,
                &format!("{name}.bwd"),
                input_dim,
                hidden_per_direction,
            ),
            hidden_per_direction,
        }
    }
}

/// Runs forward and backward LSTM passes over `embedded` (n x input_dim).
/// Returns per-token states (n x 2H) and the sequence state
/// concat(final forward, final backward) (1 x 2H).
pub fn bidirectional_encode<F: Scalar>(
    tape: &mut Tape<F>,
    params: &ModelParameters<F>,
    p: &BiLstmParams,
    embedded: Var,
) -> Result<(Var, Var), ShapeError> {
    let n = tape.value(embedded).rows();
    if n == 0 {
        return Err(ShapeError {
            op: "bidirectional_encode",
            details: "empty sequence".into(),
        });
    }
    let h_dim = p.hidden_per_direction;

    let run = |tape: &mut Tape<F>, cell: &LstmParams, order: Vec<usize>| -> Result<(Vec<Var>, Var), ShapeError> {
        let mut h = tape.zeros(1, h_dim);
        let mut c = tape.zeros(1, h_dim);
        let mut states: Vec<Option<Var>> = vec![None; n];
        for &t in &order {
            let x = tape.gather_rows(embedded, &[t])?;
            let (nh, nc) = lstm_cell(tape, params, cell, x, h, c)?;
            h = nh;
            c = nc;
            states[t] = Some(h);
        }
        Ok((states.into_iter().map(|s| s.expect("all steps visited")).collect(), h))
    };

    let (fwd_states, fwd_last) = run(tape, &p.forward, (0..n).collect())?;
    let (bwd_states, bwd_last) = run(tape, &p.backward, (0..n).rev().collect())?;

    let fwd_all = tape.concat_rows(&fwd_states)?;
    let bwd_all = tape.concat_rows(&bwd_states)?;
    let per_token = tape.concat_cols(&[fwd_all, bwd_all])?;
    let sequence = tape.concat_cols(&[fwd_last, bwd_last])?;
    Ok((per_token, sequence))
}

/// Bilinear attention scores, softmaxed per segment.
#[derive(Debug, Clone)]
pub struct AttentionParams {
    pub score: ParamId,
}

impl AttentionParams {
    pub fn register<F: Scalar>(
        params: &mut ModelParameters<F>,
        init: &mut Initializer,
        name: &str,
        query_dim: usize,
        memory_dim: usize,
    ) -> Self {
        AttentionParams {
            score: params.register(
                &format!("{name}.score"),
                init.glorot_uniform(query_dim, memory_dim),
            ),
        }
    }
}

/// Attends a single query (1 x q) over the memories belonging to
/// `query_segment`. Scores are multiplicative: s_i = q·W·m_iᵀ. Returns the
/// context vector (1 x m) and the weights over that segment's memories.
pub fn attention<F: Scalar>(
    tape: &mut Tape<F>,
    params: &ModelParameters<F>,
    p: &AttentionParams,
    query: Var,
    memories: Var,
    memory_segment: &[usize],
    query_segment: usize,
) -> Result<(Var, Var), ShapeError> {
    if tape.value(memories).rows() != memory_segment.len() {
        return Err(ShapeError {
            op: "attention",
            details: "memory_segment length != memory count".into(),
        });
    }
    let member_rows: Vec<usize> = memory_segment
        .iter()
        .enumerate()
        .filter(|(_, &s)| s == query_segment)
        .map(|(i, _)| i)
        .collect();
    if member_rows.is_empty() {
        return Err(ShapeError {
            op: "attention",
            details: format!("empty memory segment {query_segment}"),
        });
    }
    let all_members = member_rows.len() == memory_segment.len();
    let mem = if all_members {
        memories
    } else {
        tape.gather_rows(memories, &member_rows)?
    };

    let w = tape.param(params, p.score);
    let qw = tape.matmul(query, w)?; // 1 x m
    let qw_t = tape.transpose(qw); // m x 1
    let scores = tape.matmul(mem, qw_t)?; // n x 1
    let ids = vec![0usize; member_rows.len()];
    let weights = tape.segment_softmax_col(scores, &ids, 1)?;
    let weights_t = tape.transpose(weights); // 1 x n
    let context = tape.matmul(weights_t, mem)?; // 1 x m
    Ok((context, weights))
}
