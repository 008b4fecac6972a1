use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random streams derived from one experiment seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub(crate) enum Stream {
    Samples = 1,
    Init = 2,
    BatchOrder = 3,
    StencilCenters = 4,
}

pub(crate) fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Maps 64 random bits to a uniform value in `[-1, 1)`.
pub(crate) fn bits_to_symmetric_unit(bits: u64) -> f64 {
    let u = (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    2.0 * u - 1.0
}
