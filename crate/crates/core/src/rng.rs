//! Seeded, splittable randomness.
//!
//! Every stream is a ChaCha8 generator keyed by `seed` with its 64-bit
//! stream counter set to `stream_id`, so `(seed, stream_id)` fixes the
//! sequence of draws on every platform. Normal deviates come from
//! `rand_distr::StandardNormal` (ziggurat).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::signal::Signal;

#[derive(Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh stream under the same seed whose id is a mix of this stream's id
    /// and `label`. Forking does not advance `self`.
    pub fn fork(&self, label: u64) -> RngStream {
        let id = splitmix64(self.stream_id ^ splitmix64(label.wrapping_add(0x5851_f42d_4c95_7f2d)));
        RngStream::new(self.seed, id)
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.rng.sample(StandardNormal);
        }
    }

    /// Standard normal signal with the given shape.
    pub fn normal_signal(&mut self, shape: &[usize]) -> Signal {
        let mut data = vec![0.0; shape.iter().product()];
        self.fill_normal(&mut data);
        Signal::from_parts_unchecked(data, shape.to_vec())
    }
}

/// `n` i.i.d. standard normal entries as a 1D signal.
pub fn gaussian_vector(rng: &mut RngStream, n: usize) -> Result<Signal> {
    if n == 0 {
        return invalid("gaussian_vector needs n >= 1");
    }
    Ok(rng.normal_signal(&[n]))
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
