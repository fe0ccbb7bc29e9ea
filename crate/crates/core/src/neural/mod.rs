//! Differentiable primitives: tensors on a reverse-mode tape, a flat
//! parameter registry, recurrent cells, attention, and the
//! finite-difference gradient checker.

pub mod cells;
pub mod gradcheck;
pub mod init;
pub mod params;
pub mod tape;

pub use cells::{
    attention, bidirectional_encode, gru_cell, linear, lstm_cell, AttentionParams, BiLstmParams,
    GruParams, LinearParams, LstmParams,
};
pub use gradcheck::{gradient_check, GradCheckConfig, GradCheckError, GradCheckReport};
pub use init::Initializer;
pub use params::{ModelParameters, ParamId};
pub use tape::{ShapeError, Tape, Var};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor<f64> {
        let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Tensor::from_vec(rows, cols, data)
    }

    /// Finite-difference check for an arbitrary tape program whose inputs
    /// are all registered as parameters.
    fn check_program_at(
        tolerance: f64,
        params: &mut ModelParameters<f64>,
        program: impl Fn(&mut Tape<f64>, &ModelParameters<f64>) -> Result<Var, ShapeError>,
    ) -> GradCheckReport {
        let cfg = GradCheckConfig {
            tolerance,
            max_coords: 400,
            ..GradCheckConfig::default()
        };
        gradient_check(
            |p: &mut ModelParameters<f64>, compute_grad: bool| -> Result<f64, ShapeError> {
                let mut tape = Tape::new();
                let out = program(&mut tape, p)?;
                if compute_grad {
                    tape.backward(out, p)?;
                }
                Ok(tape.scalar(out))
            },
            params,
            &cfg,
        )
        .unwrap()
    }

    fn check_program(
        params: &mut ModelParameters<f64>,
        program: impl Fn(&mut Tape<f64>, &ModelParameters<f64>) -> Result<Var, ShapeError>,
    ) -> GradCheckReport {
        check_program_at(1e-7, params, program)
    }

    #[test]
    fn linear_identity_and_zero_cases() {
        let mut params = ModelParameters::<f64>::new();
        let w = params.register(
            "w",
            Tensor::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]),
        );
        let b = params.register("b", Tensor::from_vec(1, 2, vec![0.0, 0.0]));
        let p = LinearParams { weight: w, bias: b };

        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_vec(1, 2, vec![3.0, -1.5]));
        let y = linear(&mut tape, &params, &p, x).unwrap();
        assert_eq!(tape.value(y).data(), &[3.0, -1.5]);

        // A = 0, b = c  ->  y = c
        *params.value_mut(w) = Tensor::zeros(2, 2);
        *params.value_mut(b) = Tensor::from_vec(1, 2, vec![0.25, -4.0]);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_vec(1, 2, vec![3.0, -1.5]));
        let y = linear(&mut tape, &params, &p, x).unwrap();
        assert_eq!(tape.value(y).data(), &[0.25, -4.0]);
    }

    #[test]
    fn linear_hand_case() {
        let mut params = ModelParameters::<f64>::new();
        // A = [[1,2],[3,4]] acting on column convention; stored (in x out)
        // so x·A with x=[1,1] gives [1+3, 2+4] = [4, 6] — use the transposed
        // layout to reproduce the row convention [3, 7].
        let w = params.register("w", Tensor::from_vec(2, 2, vec![1.0, 3.0, 2.0, 4.0]));
        let b = params.register("b", Tensor::zeros(1, 2));
        let p = LinearParams { weight: w, bias: b };
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_vec(1, 2, vec![1.0, 1.0]));
        let y = linear(&mut tape, &params, &p, x).unwrap();
        assert_eq!(tape.value(y).data(), &[3.0, 7.0]);
    }

    #[test]
    fn primitive_ops_pass_finite_difference_checks() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut params = ModelParameters::<f64>::new();
        params.register("a", rand_tensor(&mut rng, 3, 4));
        params.register("b", rand_tensor(&mut rng, 4, 2));
        params.register("c", rand_tensor(&mut rng, 3, 2));
        params.register("col", rand_tensor(&mut rng, 3, 1));
        params.register("bias", rand_tensor(&mut rng, 1, 2));

        let report = check_program(&mut params, |tape, p| {
            let a = tape.param(p, p.id("a").unwrap());
            let b = tape.param(p, p.id("b").unwrap());
            let c = tape.param(p, p.id("c").unwrap());
            let col = tape.param(p, p.id("col").unwrap());
            let bias = tape.param(p, p.id("bias").unwrap());

            let ab = tape.matmul(a, b)?; // 3x2
            let s = tape.sigmoid(ab);
            let t = tape.tanh(c);
            let m = tape.mul(s, t)?;
            let m = tape.add_row_broadcast(m, bias)?;
            let m = tape.mul_col_broadcast(m, col)?;
            let m = tape.affine_scalar(m, 0.7, -0.1);
            let sm = tape.row_softmax(m);
            let picked = tape.select_entries(sm, &[Some((0, 1)), None, Some((2, 0))])?;
            let gathered = tape.gather_rows(m, &[2, 0, 0])?;
            let seg = tape.segment_sum_rows(gathered, &[0, 1, 1], 2)?;
            let catted = tape.concat_cols(&[seg, seg])?;
            let rows = tape.concat_rows(&[catted, catted])?;
            let tr = tape.transpose(rows);
            let total = tape.sum_all(tr);
            let picked_mean = tape.mean_all(picked)?;
            let combined = tape.add(total, picked_mean)?;
            let sq = tape.mul(combined, combined)?;
            tape.mean_all(sq)
        });
        assert!(
            report.passed,
            "max rel error {} at {:?}",
            report.max_rel_error,
            report.worst()
        );
    }

    #[test]
    fn segment_softmax_and_log_ops_pass_checks() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut params = ModelParameters::<f64>::new();
        params.register("logits", rand_tensor(&mut rng, 6, 1));

        let report = check_program(&mut params, |tape, p| {
            let logits = tape.param(p, p.id("logits").unwrap());
            let w = tape.segment_softmax_col(logits, &[0, 0, 0, 1, 1, 2], 3)?;
            let w = tape.clamp_min(w, 1e-12);
            let lw = tape.log(w);
            let nll = tape.affine_scalar(lw, -1.0, 0.0);
            tape.mean_all(nll)
        });
        assert!(report.passed, "max rel error {}", report.max_rel_error);
    }

    #[test]
    fn embed_rows_accumulates_gradients_for_repeated_rows() {
        let mut params = ModelParameters::<f64>::new();
        let table = params.register(
            "table",
            Tensor::from_vec(3, 2, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]),
        );
        let mut tape = Tape::new();
        let e = tape.embed_rows(&params, table, &[1, 1, 2]).unwrap();
        let s = tape.sum_all(e);
        tape.backward(s, &mut params).unwrap();
        assert_eq!(params.grad(table).data(), &[0.0, 0.0, 2.0, 2.0, 1.0, 1.0]);
    }

    /// Hand-rolled 64-bit GRU oracle.
    fn gru_oracle(
        m: &[f64],
        h: &[f64],
        w: &ModelParameters<f64>,
        p: &GruParams,
    ) -> Vec<f64> {
        let matvec = |x: &[f64], w: &Tensor<f64>| -> Vec<f64> {
            let mut out = vec![0.0; w.cols()];
            for (i, &xi) in x.iter().enumerate() {
                for j in 0..w.cols() {
                    out[j] += xi * w.get(i, j);
                }
            }
            out
        };
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        let dim = h.len();
        let gate = |wid, uid, bid, act: &dyn Fn(f64) -> f64, hh: &[f64]| -> Vec<f64> {
            let a = matvec(m, w.value(wid));
            let b = matvec(hh, w.value(uid));
            (0..dim)
                .map(|i| act(a[i] + b[i] + w.value(bid).data()[i]))
                .collect()
        };
        let z = gate(p.w_z, p.u_z, p.b_z, &sig, h);
        let r = gate(p.w_r, p.u_r, p.b_r, &sig, h);
        let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
        let cand = gate(p.w_h, p.u_h, p.b_h, &|x| x.tanh(), &rh);
        (0..dim)
            .map(|i| (1.0 - z[i]) * h[i] + z[i] * cand[i])
            .collect()
    }

    #[test]
    fn gru_zero_params_halves_state() {
        let mut params = ModelParameters::<f64>::new();
        let mut init = Initializer::new(0);
        let p = GruParams::register(&mut params, &mut init, "gru", 2, 2);
        for i in 0..params.flat_len() {
            params.set_flat(i, 0.0);
        }
        let mut tape = Tape::new();
        let m = tape.constant(Tensor::from_vec(1, 2, vec![0.3, -0.7]));
        let h = tape.constant(Tensor::from_vec(1, 2, vec![0.8, -0.2]));
        let out = gru_cell(&mut tape, &params, &p, m, h).unwrap();
        assert_eq!(tape.value(out).data(), &[0.4, -0.1]);

        let h0 = tape.zeros(1, 2);
        let m0 = tape.zeros(1, 2);
        let out0 = gru_cell(&mut tape, &params, &p, m0, h0).unwrap();
        assert_eq!(tape.value(out0).data(), &[0.0, 0.0]);
    }

    #[test]
    fn gru_matches_hand_oracle() {
        let mut params = ModelParameters::<f64>::new();
        let mut init = Initializer::new(42);
        let p = GruParams::register(&mut params, &mut init, "gru", 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let m: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let h: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mut tape = Tape::new();
            let mv = tape.constant(Tensor::from_vec(1, 2, m.clone()));
            let hv = tape.constant(Tensor::from_vec(1, 2, h.clone()));
            let out = gru_cell(&mut tape, &params, &p, mv, hv).unwrap();
            let expected = gru_oracle(&m, &h, &params, &p);
            for (a, b) in tape.value(out).data().iter().zip(&expected) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lstm_zero_weight_cases() {
        let mut params = ModelParameters::<f64>::new();
        let mut init = Initializer::new(0);
        let p = LstmParams::register(&mut params, &mut init, "lstm", 2, 2);
        for i in 0..params.flat_len() {
            params.set_flat(i, 0.0); // also overrides the forget bias of 1
        }
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_vec(1, 2, vec![0.5, -0.5]));
        let h = tape.zeros(1, 2);
        let c = tape.constant(Tensor::from_vec(1, 2, vec![0.6, -1.0]));
        let (h2, c2) = lstm_cell(&mut tape, &params, &p, x, h, c).unwrap();
        for (j, &cv) in [0.6f64, -1.0].iter().enumerate() {
            let expect_c = 0.5 * cv;
            let expect_h = 0.5 * expect_c.tanh();
            assert!((tape.value(c2).data()[j] - expect_c).abs() < 1e-12);
            assert!((tape.value(h2).data()[j] - expect_h).abs() < 1e-12);
        }

        // c = 0 under zero weights -> h' = 0
        let c0 = tape.zeros(1, 2);
        let (h3, _) = lstm_cell(&mut tape, &params, &p, x, h, c0).unwrap();
        assert_eq!(tape.value(h3).data(), &[0.0, 0.0]);
    }

    /// Hand-rolled 64-bit LSTM oracle.
    fn lstm_oracle(
        x: &[f64],
        h: &[f64],
        c: &[f64],
        w: &ModelParameters<f64>,
        p: &LstmParams,
    ) -> (Vec<f64>, Vec<f64>) {
        let matvec = |v: &[f64], w: &Tensor<f64>| -> Vec<f64> {
            let mut out = vec![0.0; w.cols()];
            for (i, &vi) in v.iter().enumerate() {
                for j in 0..w.cols() {
                    out[j] += vi * w.get(i, j);
                }
            }
            out
        };
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let dim = h.len();
        let gate = |wid, uid, bid, act: &dyn Fn(f64) -> f64| -> Vec<f64> {
            let a = matvec(x, w.value(wid));
            let b = matvec(h, w.value(uid));
            (0..dim)
                .map(|i| act(a[i] + b[i] + w.value(bid).data()[i]))
                .collect()
        };
        let i = gate(p.w_i, p.u_i, p.b_i, &sig);
        let f = gate(p.w_f, p.u_f, p.b_f, &sig);
        let o = gate(p.w_o, p.u_o, p.b_o, &sig);
        let g = gate(p.w_g, p.u_g, p.b_g, &|v| v.tanh());
        let c2: Vec<f64> = (0..dim).map(|j| f[j] * c[j] + i[j] * g[j]).collect();
        let h2: Vec<f64> = (0..dim).map(|j| o[j] * c2[j].tanh()).collect();
        (h2, c2)
    }

    #[test]
    fn lstm_matches_hand_oracle() {
        let mut params = ModelParameters::<f64>::new();
        let mut init = Initializer::new(17);
        let p = LstmParams::register(&mut params, &mut init, "lstm", 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let h: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let c: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mut tape = Tape::new();
            let xv = tape.constant(Tensor::from_vec(1, 2, x.clone()));
            let hv = tape.constant(Tensor::from_vec(1, 2, h.clone()));
            let cv = tape.constant(Tensor::from_vec(1, 2, c.clone()));
            let (h2, c2) = lstm_cell(&mut tape, &params, &p, xv, hv, cv).unwrap();
            let (eh, ec) = lstm_oracle(&x, &h, &c, &params, &p);
            for (a, b) in tape.value(h2).data().iter().zip(&eh) {
                assert!((a - b).abs() < 1e-12);
            }
            for (a, b) in tape.value(c2).data().iter().zip(&ec) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bidirectional_encode_shapes_and_oracle() {
        let mut params = ModelParameters::<f64>::new();
        let mut init = Initializer::new(23);
        let p = BiLstmParams::register(&mut params, &mut init, "enc", 3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let embedded = rand_tensor(&mut rng, 3, 3);

        let mut tape = Tape::new();
        let e = tape.constant(embedded.clone());
        let (per_token, sequence) = bidirectional_encode(&mut tape, &params, &p, e).unwrap();
        assert_eq!(tape.value(per_token).rows(), 3);
        assert_eq!(tape.value(per_token).cols(), 4);
        assert_eq!(tape.value(sequence).cols(), 4);

        // Oracle: compose lstm_cell manually in both directions.
        let run = |cell: &LstmParams, order: Vec<usize>| -> (Vec<Vec<f64>>, Vec<f64>) {
            let mut h = vec![0.0; 2];
            let mut c = vec![0.0; 2];
            let mut out = vec![vec![]; 3];
            for &t in &order {
                let (nh, nc) = lstm_oracle(embedded.row(t), &h, &c, &params, &cell.clone());
                h = nh;
                c = nc;
                out[t] = h.clone();
            }
            (out, h)
        };
        let (fwd, fwd_last) = run(&p.forward, vec![0, 1, 2]);
        let (bwd, bwd_last) = run(&p.backward, vec![2, 1, 0]);
        for t in 0..3 {
            let expected: Vec<f64> = fwd[t].iter().chain(&bwd[t]).copied().collect();
            for (a, b) in tape.value(per_token).row(t).iter().zip(&expected) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        let expected_seq: Vec<f64> = fwd_last.iter().chain(&bwd_last).copied().collect();
        for (a, b) in tape.value(sequence).data().iter().zip(&expected_seq) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn bidirectional_encode_length_one() {
        let mut params = ModelParameters::<f64>::new();
        let mut init = Initializer::new(2);
        let p = BiLstmParams::register(&mut params, &mut init, "enc", 2, 3);
        let mut tape = Tape::new();
        let e = tape.constant(Tensor::from_vec(1, 2, vec![0.4, -0.9]));
        let (per_token, sequence) = bidirectional_encode(&mut tape, &params, &p, e).unwrap();
        assert_eq!(tape.value(per_token).rows(), 1);
        assert_eq!(tape.value(per_token).data(), tape.value(sequence).data());
    }

    #[test]
    fn bidirectional_encode_rejects_empty() {
        let mut params = ModelParameters::<f64>::new();
        let mut init = Initializer::new(2);
        let p = BiLstmParams::register(&mut params, &mut init, "enc", 2, 3);
        let mut tape = Tape::new();
        let e = tape.zeros(0, 2);
        assert!(bidirectional_encode(&mut tape, &params, &p, e).is_err());
    }

    #[test]
    fn attention_single_memory_gets_weight_one() {
        let mut params = ModelParameters::<f64>::new();
        let mut init = Initializer::new(4);
        let p = AttentionParams::register(&mut params, &mut init, "att", 3, 2);
        let mut tape = Tape::new();
        let q = tape.constant(Tensor::from_vec(1, 3, vec![0.1, 0.2, 0.3]));
        let mem = tape.constant(Tensor::from_vec(1, 2, vec![5.0, -3.0]));
        let (context, weights) = attention(&mut tape, &params, &p, q, mem, &[0], 0).unwrap();
        assert_eq!(tape.value(weights).data(), &[1.0]);
        assert_eq!(tape.value(context).data(), &[5.0, -3.0]);
    }

    #[test]
    fn attention_zero_scores_average_memories() {
        let mut params = ModelParameters::<f64>::new();
        let w = params.register("att.score", Tensor::zeros(3, 2));
        let p = AttentionParams { score: w };
        let mut tape = Tape::new();
        let q = tape.constant(Tensor::from_vec(1, 3, vec![1.0, 1.0, 1.0]));
        let mem = tape.constant(Tensor::from_vec(2, 2, vec![1.0, 3.0, 3.0, 5.0]));
        let (context, weights) = attention(&mut tape, &params, &p, q, mem, &[0, 0], 0).unwrap();
        assert_eq!(tape.value(weights).data(), &[0.5, 0.5]);
        assert_eq!(tape.value(context).data(), &[2.0, 4.0]);
    }

    #[test]
    fn attention_hand_softmax_weights() {
        // Rig scores to [ln 2, 0] via a 1-d query and first memory column.
        let mut params = ModelParameters::<f64>::new();
        let w = params.register("att.score", Tensor::from_vec(1, 2, vec![1.0, 0.0]));
        let p = AttentionParams { score: w };
        let mut tape = Tape::new();
        let q = tape.constant(Tensor::from_vec(1, 1, vec![1.0]));
        let mem = tape.constant(Tensor::from_vec(
            2,
            2,
            vec![2.0f64.ln(), 7.0, 0.0, 9.0],
        ));
        let (_, weights) = attention(&mut tape, &params, &p, q, mem, &[0, 0], 0).unwrap();
        let wv = tape.value(weights).data();
        assert!((wv[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((wv[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn attention_restricts_to_query_segment() {
        let mut params = ModelParameters::<f64>::new();
        let w = params.register("att.score", Tensor::zeros(2, 2));
        let p = AttentionParams { score: w };
        let mut tape = Tape::new();
        let q = tape.constant(Tensor::from_vec(1, 2, vec![1.0, 1.0]));
        let mem = tape.constant(Tensor::from_vec(3, 2, vec![1.0, 1.0, 9.0, 9.0, 3.0, 3.0]));
        let (context, weights) =
            attention(&mut tape, &params, &p, q, mem, &[0, 1, 0], 0).unwrap();
        assert_eq!(tape.value(weights).data(), &[0.5, 0.5]);
        assert_eq!(tape.value(context).data(), &[2.0, 2.0]);

        let empty = attention(&mut tape, &params, &p, q, mem, &[0, 1, 0], 2);
        assert!(empty.is_err());
    }

    #[test]
    fn cells_pass_gradient_checks() {
        let mut init = Initializer::new(77);
        let mut params = ModelParameters::<f64>::new();
        let gru = GruParams::register(&mut params, &mut init, "gru", 3, 3);
        let lstm = LstmParams::register(&mut params, &mut init, "lstm", 2, 3);
        let att = AttentionParams::register(&mut params, &mut init, "att", 3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m0 = rand_tensor(&mut rng, 2, 3);
        let h0 = rand_tensor(&mut rng, 2, 3);
        let x0 = rand_tensor(&mut rng, 1, 2);
        let mem0 = rand_tensor(&mut rng, 4, 2);

        let report = check_program_at(1e-5, &mut params, move |tape, p| {
            let gru = gru.clone();
            let lstm = lstm.clone();
            let m = tape.constant(m0.clone());
            let h = tape.constant(h0.clone());
            let g1 = gru_cell(tape, p, &gru, m, h)?;
            let g2 = gru_cell(tape, p, &gru, m, g1)?; // shared weights across steps

            let x = tape.constant(x0.clone());
            let hz = tape.zeros(1, 3);
            let cz = tape.zeros(1, 3);
            let (h1, c1) = lstm_cell(tape, p, &lstm, x, hz, cz)?;
            let (h2, _c2) = lstm_cell(tape, p, &lstm, x, h1, c1)?;

            let mem = tape.constant(mem0.clone());
            let (ctx, _w) = attention(tape, p, &att, h2, mem, &[0, 0, 1, 0], 0)?;

            let g2s = tape.sum_all(g2);
            let ctxs = tape.sum_all(ctx);
            let both = tape.add(g2s, ctxs)?;
            let sq = tape.mul(both, both)?;
            tape.mean_all(sq)
        });
        assert!(
            report.passed,
            "max rel error {} at {:?}",
            report.max_rel_error,
            report.worst()
        );
    }

    #[test]
    fn gradient_check_quadratic_loss() {
        let mut params = ModelParameters::<f64>::new();
        params.register("p", Tensor::from_vec(2, 3, vec![0.5, -1.0, 2.0, 0.1, -0.3, 0.7]));
        let cfg = GradCheckConfig {
            tolerance: 1e-9,
            ..GradCheckConfig::default()
        };
        let report = gradient_check(
            |p: &mut ModelParameters<f64>, compute_grad: bool| -> Result<f64, ShapeError> {
                let mut tape = Tape::new();
                let id = p.id("p").unwrap();
                let v = tape.param(p, id);
                let sq = tape.mul(v, v)?;
                let s = tape.sum_all(sq);
                let half = tape.affine_scalar(s, 0.5, 0.0);
                if compute_grad {
                    tape.backward(half, p)?;
                }
                Ok(tape.scalar(half))
            },
            &mut params,
            &cfg,
        )
        .unwrap();
        assert!(report.passed, "max rel error {}", report.max_rel_error);
        // Analytic gradient of 0.5*||p||^2 is p itself.
        for check in &report.checks {
            let value = params.get_flat(check.flat_index);
            assert!((check.analytic - value).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_check_frozen_slice_is_zero() {
        // Loss touches only "used"; the "frozen" tensor must get zero
        // analytic and zero numeric gradient.
        let mut params = ModelParameters::<f64>::new();
        params.register("used", Tensor::from_vec(1, 2, vec![0.3, -0.2]));
        params.register("frozen", Tensor::from_vec(1, 2, vec![1.0, 2.0]));
        let report = gradient_check(
            |p: &mut ModelParameters<f64>, compute_grad: bool| -> Result<f64, ShapeError> {
                let mut tape = Tape::new();
                let used = tape.param(p, p.id("used").unwrap());
                let sq = tape.mul(used, used)?;
                let s = tape.sum_all(sq);
                if compute_grad {
                    tape.backward(s, p)?;
                }
                Ok(tape.scalar(s))
            },
            &mut params,
            &GradCheckConfig::default(),
        )
        .unwrap();
        assert!(report.passed);
        for check in report.checks.iter().filter(|c| c.name == "frozen") {
            assert_eq!(check.analytic, 0.0);
            assert_eq!(check.numeric, 0.0);
        }
    }

    #[test]
    fn gradient_check_rejects_non_finite_loss() {
        let mut params = ModelParameters::<f64>::new();
        params.register("p", Tensor::from_vec(1, 1, vec![1.0]));
        let result = gradient_check(
            |_: &mut ModelParameters<f64>, _| -> Result<f64, ShapeError> { Ok(f64::NAN) },
            &mut params,
            &GradCheckConfig::default(),
        );
        assert!(matches!(result, Err(GradCheckError::NonFiniteLoss { .. })));
    }
}
