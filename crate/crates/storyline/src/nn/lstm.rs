//! Single-layer LSTM cell and bidirectional encoder built on the tape.

use super::tape::{Tape, Var};
use super::tensor::{Init, ParamId, ParamSet};
use crate::rng::SeededRng;

/// Parameter handles for one LSTM direction.
///
/// Gates use the standard formulation: for gate g in {i, f, o, c},
/// `g = act(W_g x + U_g h + b_g)` with sigmoid for i/f/o and tanh for c.
/// Forget-gate biases start at 1.0 so memory is initially retained.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct LstmCell {
    pub input_dim: usize,
    pub hidden_dim: usize,
    w: [ParamId; 4],
    u: [ParamId; 4],
    b: [ParamId; 4],
}

const GATE_NAMES: [&str; 4] = ["i", "f", "o", "c"];

impl LstmCell {
    pub fn new(
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        params: &mut ParamSet,
        rng: &mut SeededRng,
        init_scale: f64,
    ) -> Self {
        let reg = |params: &mut ParamSet, rng: &mut SeededRng, name: String, r, c, init| {
            params.register(&name, r, c, init, rng)
        };
        let mut w = [ParamId(0); 4];
        let mut u = [ParamId(0); 4];
        let mut b = [ParamId(0); 4];
        for (gi, g) in GATE_NAMES.iter().enumerate() {
            w[gi] = reg(
                params,
                rng,
                format!("{prefix}.w_{g}"),
                hidden_dim,
                input_dim,
                Init::Uniform(init_scale),
            );
            u[gi] = reg(
                params,
                rng,
                format!("{prefix}.u_{g}"),
                hidden_dim,
                hidden_dim,
                Init::Uniform(init_scale),
            );
            let bias_init = if *g == "f" { Init::Const(1.0) } else { Init::Zeros };
            b[gi] = reg(params, rng, format!("{prefix}.b_{g}"), hidden_dim, 1, bias_init);
        }
        LstmCell { input_dim, hidden_dim, w, u, b }
    }

    /// One step; returns (h, c).
    pub fn step(
        &self,
        tape: &mut Tape,
        params: &ParamSet,
        x: Var,
        h_prev: Var,
        c_prev: Var,
    ) -> (Var, Var) {
        let mut pre = [None; 4];
        for gi in 0..4 {
            let w = tape.param(params, self.w[gi]);
            let u = tape.param(params, self.u[gi]);
            let b = tape.param(params, self.b[gi]);
            let wx = tape.matvec(w, x, self.hidden_dim, self.input_dim);
            let uh = tape.matvec(u, h_prev, self.hidden_dim, self.hidden_dim);
            let s = tape.add(wx, uh);
            pre[gi] = Some(tape.add(s, b));
        }
        let i = tape.sigmoid(pre[0].unwrap());
        let f = tape.sigmoid(pre[1].unwrap());
        let o = tape.sigmoid(pre[2].unwrap());
        let g = tape.tanh(pre[3].unwrap());
        let fc = tape.mul(f, c_prev);
        let ig = tape.mul(i, g);
        let c = tape.add(fc, ig);
        let tc = tape.tanh(c);
        let h = tape.mul(o, tc);
        (h, c)
    }
}

/// Bidirectional LSTM; each position yields `[h_fw; h_bw]` of size `2 * hidden_dim`.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct BiLstm {
    pub forward: LstmCell,
    pub backward: LstmCell,
}

impl BiLstm {
    pub fn new(
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        params: &mut ParamSet,
        rng: &mut SeededRng,
        init_scale: f64,
    ) -> Self {
        BiLstm {
            forward: LstmCell::new(
                &format!("{prefix}.fw"),
                input_dim,
                hidden_dim,
                params,
                rng,
                init_scale,
            ),
            backward: LstmCell::new(
                &format!("{prefix}.bw"),
                input_dim,
                hidden_dim,
                params,
                rng,
                init_scale,
            ),
        }
    }

    pub fn output_dim(&self) -> usize {
        2 * self.forward.hidden_dim
    }

    /// Encode a sequence; returns one concatenated state per input position.
    pub fn encode(&self, tape: &mut Tape, params: &ParamSet, xs: &[Var]) -> Vec<Var> {
        assert!(!xs.is_empty(), "cannot encode an empty sequence");
        let hd = self.forward.hidden_dim;
        let mut fw = Vec::with_capacity(xs.len());
        let mut h = tape.zeros(hd);
        let mut c = tape.zeros(hd);
        for x in xs {
            let (nh, nc) = self.forward.step(tape, params, *x, h, c);
            fw.push(nh);
            h = nh;
            c = nc;
        }
        let mut bw = vec![None; xs.len()];
        let mut h = tape.zeros(hd);
        let mut c = tape.zeros(hd);
        for (i, x) in xs.iter().enumerate().rev() {
            let (nh, nc) = self.backward.step(tape, params, *x, h, c);
            bw[i] = Some(nh);
            h = nh;
            c = nc;
        }
        fw.into_iter().zip(bw).map(|(f, b)| tape.concat(&[f, b.unwrap()])).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tensor::ParamSet;

    #[test]
    fn encode_shapes_and_determinism() {
        let mut rng = SeededRng::new(3);
        let mut params = ParamSet::new();
        let net = BiLstm::new("enc", 4, 5, &mut params, &mut rng, 0.08);
        assert_eq!(net.output_dim(), 10);

        let run = |params: &ParamSet| {
            let mut tape = Tape::new();
            let xs: Vec<_> = (0..3)
                .map(|i| tape.leaf(vec![0.1 * i as f64, -0.2, 0.3, 0.05]))
                .collect();
            let hs = net.encode(&mut tape, params, &xs);
            hs.iter().map(|h| tape.value(*h).to_vec()).collect::<Vec<_>>()
        };
        let a = run(&params);
        let b = run(&params);
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert!(a.iter().all(|h| h.len() == 10));
        assert_ne!(a[0], a[2], "distinct positions should differ");
    }

    #[test]
    fn forget_bias_initialized_to_one() {
        let mut rng = SeededRng::new(3);
        let mut params = ParamSet::new();
        let net = BiLstm::new("enc", 2, 3, &mut params, &mut rng, 0.08);
        let bf = params.get(net.forward.b[1]);
        assert_eq!(bf.name, "enc.fw.b_f");
        assert!(bf.value.data.iter().all(|v| *v == 1.0));
        let bi = params.get(net.forward.b[0]);
        assert!(bi.value.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn backward_direction_sees_future_tokens() {
        let mut rng = SeededRng::new(9);
        let mut params = ParamSet::new();
        let net = BiLstm::new("enc", 2, 3, &mut params, &mut rng, 0.08);

        let encode_first = |last: f64| {
            let mut tape = Tape::new();
            let xs = vec![
                tape.leaf(vec![0.5, -0.5]),
                tape.leaf(vec![0.1, 0.2]),
                tape.leaf(vec![last, 0.0]),
            ];
            let hs = net.encode(&mut tape, &params, &xs);
            tape.value(hs[0]).to_vec()
        };
        assert_ne!(encode_first(1.0), encode_first(-1.0));
    }
}
