//! n-step return accumulation over a finished episode.

/// One environment step as collected by an actor.
#[derive(Clone, Debug, PartialEq)]
pub struct RawStep {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// True when the episode terminated at this step (success or collision);
    /// a time-limit cut is not terminal.
    pub done: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub n_step_return: f64,
    pub bootstrap_state: Vec<f64>,
    /// `γ^m` for an `m`-step window that ends without termination, else 0.
    pub discount_pow: f64,
    pub n_used: usize,
}

/// One transition per step: `Σ_{j<m} γ^j r_{t+j}` with `m = min(n, steps left)`,
/// bootstrapping from `s_{t+m}` unless a terminal step falls inside the window.
pub fn accumulate_n_step(episode: &[RawStep], gamma: f64, n: usize) -> Vec<Transition> {
    let n = n.max(1);
    (0..episode.len())
        .map(|t| {
            let mut ret = 0.0;
            let mut g = 1.0;
            let mut m = 0;
            let mut terminal = false;
            while m < n && t + m < episode.len() {
                let s = &episode[t + m];
                ret += g * s.reward;
                g *= gamma;
                m += 1;
                if s.done {
                    terminal = true;
                    break;
                }
            }
            let last = &episode[t + m - 1];
            Transition {
                state: episode[t].state.clone(),
                action: episode[t].action.clone(),
                n_step_return: ret,
                bootstrap_state: last.next_state.clone(),
                discount_pow: if terminal { 0.0 } else { g },
                n_used: m,
            }
        })
        .collect()
}
