use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Deterministic random stream identified by `(seed, stream)`.
///
/// Backed by ChaCha8, whose 64-bit stream selector gives O(1) forking:
/// a child stream is a fresh generator keyed by the same seed with a mixed
/// stream index, so forking never advances or reads the parent.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, stream, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Independent child stream; see [`rng_fork`].
    pub fn fork(&self, child_index: u64) -> SeededRng {
        rng_fork(self, child_index)
    }
}

/// Derives sub-stream `child_index` of `parent`.
///
/// Pure in `(parent.seed, parent.stream, child_index)`; the parent's
/// position in its own stream is irrelevant.
pub fn rng_fork(parent: &SeededRng, child_index: u64) -> SeededRng {
    let stream = splitmix64(parent.stream ^ splitmix64(child_index.wrapping_add(0x9E37_79B9_7F4A_7C15)));
    SeededRng::with_stream(parent.seed, stream)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngCore for SeededRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    #[inline]
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
