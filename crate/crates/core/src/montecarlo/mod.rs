//! Stochastic oracles for the analytic kernels and two microscopic models:
//! a dipolar bath simulation and a two-pulse Rabi envelope.
//!
//! Every history (or realization) draws from its own ChaCha8 substream keyed
//! by `(seed, index)`, and partial sums are combined in index order, so results
//! are bit-identical for a given seed whatever the rayon pool size.

mod ensemble;
mod rabi;
mod telegraph;

pub use ensemble::{ensemble_echo, BathEnsemble, DEFAULT_R_MIN};
pub use rabi::{two_pulse_rabi_amplitude, RabiConfig};
pub use telegraph::{flip_history_average, TelegraphConfig};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

const CHUNK: u64 = 4096;

pub(crate) fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Clone, Copy)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    const EMPTY: Moments = Moments {
        n: 0.0,
        mean: 0.0,
        m2: 0.0,
    };

    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if other.n == 0.0 {
            return self;
        }
        if self.n == 0.0 {
            return other;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * other.n / n,
            m2: self.m2 + other.m2 + d * d * self.n * other.n / n,
        }
    }
}

/// Averages `sample(index)` over `0..n` in fixed-size chunks evaluated in
/// parallel and merged in chunk order.
pub(crate) fn deterministic_average<F>(n: u64, sample: F) -> Estimate
where
    F: Fn(u64) -> f64 + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let partial: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut m = Moments::EMPTY;
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                m.push(sample(i));
            }
            m
        })
        .collect();
    let total = partial.into_iter().fold(Moments::EMPTY, Moments::merge);
    let std_error = if total.n > 1.0 {
        (total.m2 / (total.n - 1.0) / total.n).sqrt()
    } else {
        0.0
    };
    Estimate {
        mean: total.mean,
        std_error,
    }
}
