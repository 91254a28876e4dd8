//! Matrix-free access to (sub-)stochastic kernels.
//!
//! Large kernels such as the auxiliary pair chain are never materialized;
//! the hitting-time and quasi-stationary numerics only need the two
//! products below.

pub trait TransitionOperator: Sync {
    fn num_states(&self) -> usize;

    /// `out = dist · Q` (evolution of a measure).
    fn push_forward(&self, dist: &[f64], out: &mut [f64]);

    /// `out = Q · f` (evolution of a function).
    fn pull_back(&self, f: &[f64], out: &mut [f64]);
}

/// The kernel with the row and column of `target` erased, embedded in the
/// full state space: the target coordinate is always zero on input and output.
pub struct Killed<'a, K: ?Sized> {
    inner: &'a K,
    target: usize,
    scratch: std::sync::Mutex<Vec<f64>>,
}

impl<'a, K: TransitionOperator + ?Sized> Killed<'a, K> {
    pub fn new(inner: &'a K, target: usize) -> Self {
        assert!(target < inner.num_states(), "target out of range");
        Killed {
            inner,
            target,
            scratch: std::sync::Mutex::new(Vec::new()),
        }
    }

    pub fn target(&self) -> usize {
        self.target
    }

    fn masked(&self, v: &[f64], out: &mut [f64], forward: bool) {
        let mut scratch = self.scratch.lock().unwrap_or_else(|e| e.into_inner());
        scratch.clear();
        scratch.extend_from_slice(v);
        scratch[self.target] = 0.0;
        if forward {
            self.inner.push_forward(&scratch, out);
        } else {
            self.inner.pull_back(&scratch, out);
        }
        out[self.target] = 0.0;
    }
}

impl<K: TransitionOperator + ?Sized> TransitionOperator for Killed<'_, K> {
    fn num_states(&self) -> usize {
        self.inner.num_states()
    }

    fn push_forward(&self, dist: &[f64], out: &mut [f64]) {
        self.masked(dist, out, true);
    }

    fn pull_back(&self, f: &[f64], out: &mut [f64]) {
        self.masked(f, out, false);
    }
}
