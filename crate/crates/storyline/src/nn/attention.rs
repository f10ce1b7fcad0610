//! Additive attention pooling over a sequence of state vectors.

use super::tape::{Tape, Var};
use super::tensor::{Init, ParamId, ParamSet};
use crate::rng::SeededRng;

/// Scores each state with `v . tanh(P s_i)`, normalizes with softmax, and
/// returns the weighted sum of the states.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct AttentionPool {
    pub state_dim: usize,
    pub proj_dim: usize,
    proj: ParamId,
    query: ParamId,
}

impl AttentionPool {
    pub fn new(
        prefix: &str,
        state_dim: usize,
        proj_dim: usize,
        params: &mut ParamSet,
        rng: &mut SeededRng,
        init_scale: f64,
    ) -> Self {
        let proj = params.register(
            &format!("{prefix}.proj"),
            proj_dim,
            state_dim,
            Init::Uniform(init_scale),
            rng,
        );
        let query =
            params.register(&format!("{prefix}.query"), proj_dim, 1, Init::Uniform(init_scale), rng);
        AttentionPool { state_dim, proj_dim, proj, query }
    }

    /// Pooled vector plus the attention weights over inputs.
    pub fn attend_with_weights(
        &self,
        tape: &mut Tape,
        params: &ParamSet,
        states: &[Var],
    ) -> (Var, Var) {
        assert!(!states.is_empty(), "attention over an empty sequence");
        let proj = tape.param(params, self.proj);
        let query = tape.param(params, self.query);
        let mut scores = Vec::with_capacity(states.len());
        for s in states {
            let p = tape.matvec(proj, *s, self.proj_dim, self.state_dim);
            let t = tape.tanh(p);
            scores.push(tape.dot(t, query));
        }
        let stacked = tape.concat(&scores);
        let weights = tape.softmax(stacked);
        let pooled = tape.weighted_sum(weights, states);
        (pooled, weights)
    }

    pub fn attend(&self, tape: &mut Tape, params: &ParamSet, states: &[Var]) -> Var {
        self.attend_with_weights(tape, params, states).0
    }
}
