//! Seed splitting. A master seed and a replicate index select a family of
//! independent ChaCha streams, one per sampler component.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Sampler components that draw from their own stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    EigenSelection,
    Proposals,
    FieldCoefficients,
    Uniforms,
    Counts,
    Rotation,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::EigenSelection => 1,
            Stream::Proposals => 2,
            Stream::FieldCoefficients => 3,
            Stream::Uniforms => 4,
            Stream::Counts => 5,
            Stream::Rotation => 6,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Streams for one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    seed: u64,
    replicate: u64,
}

impl SeedTree {
    pub fn new(seed: u64) -> Self {
        SeedTree { seed, replicate: 0 }
    }

    pub fn replicate(seed: u64, replicate: u64) -> Self {
        SeedTree { seed, replicate }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replicate_index(&self) -> u64 {
        self.replicate
    }

    /// Tree for a sub-task, e.g. the `i`-th null simulation inside an
    /// envelope run.
    pub fn child(&self, index: u64) -> SeedTree {
        SeedTree {
            seed: splitmix64(self.key() ^ 0x5851_f42d_4c95_7f2d),
            replicate: index,
        }
    }

    fn key(&self) -> u64 {
        splitmix64(splitmix64(self.seed) ^ self.replicate.wrapping_mul(0xd1b5_4a32_d192_ed03))
    }

    pub fn stream(&self, stream: Stream) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.key());
        rng.set_stream(stream.id());
        rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let t = SeedTree::replicate(42, 3);
        let a: u64 = t.stream(Stream::Proposals).random();
        let b: u64 = t.stream(Stream::Proposals).random();
        assert_eq!(a, b);
        let c: u64 = t.stream(Stream::Uniforms).random();
        assert_ne!(a, c);
        let d: u64 = SeedTree::replicate(42, 4).stream(Stream::Proposals).random();
        assert_ne!(a, d);
        let e: u64 = t.child(0).stream(Stream::Proposals).random();
        assert_ne!(a, e);
    }
}
