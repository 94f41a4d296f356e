//! Counter-based random substreams.
//!
//! Every Monte Carlo draw comes from a [`Substream`] addressed by
//! `(seed, grid point, trial, lane)`. The ChaCha key is derived from
//! `(seed, grid point, lane)` and the trial index selects the ChaCha stream,
//! so a trial's randomness never depends on which worker runs it.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent uses of randomness inside one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Lane {
    /// Target state, phase and noise of the snapshot(s).
    Scenario = 0,
    /// Stochastic decisions (SAP and the typical-set decoder).
    Decision = 1,
    /// Auxiliary draws such as independent re-pairing in typicality checks.
    Auxiliary = 2,
}

/// Address of one grid point within an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey {
    pub seed: u64,
    pub grid: u64,
}

impl StreamKey {
    pub fn new(seed: u64, grid: u64) -> Self {
        Self { seed, grid }
    }

    pub fn substream(&self, trial: u64, lane: Lane) -> Substream {
        Substream::new(self.seed, self.grid, trial, lane)
    }
}

#[derive(Debug, Clone)]
pub struct Substream(ChaCha8Rng);

impl Substream {
    pub fn new(seed: u64, grid: u64, trial: u64, lane: Lane) -> Self {
        let mut state = seed ^ 0x6a09_e667_f3bc_c908;
        let mut key = [0u8; 32];
        let words = [
            splitmix64(&mut state),
            splitmix64(&mut state) ^ grid.wrapping_mul(0x9E37_79B9_7F4A_7C15),
            splitmix64(&mut state) ^ (lane as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9),
            splitmix64(&mut state),
        ];
        // Second mixing pass so grid and lane diffuse into every key word.
        let mut mix = words[1] ^ words[2].rotate_left(17);
        for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
            let v = w ^ splitmix64(&mut mix);
            chunk.copy_from_slice(&v.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(trial);
        Substream(rng)
    }

    /// Uniform draw on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for Substream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.0.try_fill_bytes(dest)
    }
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
