/// A point `(t, S, A, M, Σ)` of the state space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarketState {
    pub t: f64,
    pub s: f64,
    pub a: f64,
    pub m: f64,
    pub sigma: f64,
}

impl MarketState {
    /// State without path dependence: `A = S`, `M = S`.
    pub fn new(t: f64, s: f64, sigma: f64) -> Self {
        Self {
            t,
            s,
            a: s,
            m: s,
            sigma,
        }
    }

    pub fn with_aux(mut self, a: f64, m: f64) -> Self {
        self.a = a;
        self.m = m;
        self
    }
}
