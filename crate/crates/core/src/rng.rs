//! Seed partitioning.
//!
//! A single master seed fans out as
//! `master seed -> experiment stream -> work-unit substream`,
//! realized with ChaCha8 counter streams: every generator is seeded from the
//! master seed and placed on stream id `experiment << 32 | unit`. Parallel
//! work units therefore never share a stream, and the partitioning is
//! reproducible from `(master, experiment, unit)` alone.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Root of the seed tree for one invocation.
#[derive(Debug, Clone, Copy)]
pub struct SeedPolicy {
    master: u64,
}

impl SeedPolicy {
    pub fn new(master: u64) -> Self {
        SeedPolicy { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn experiment(&self, experiment: u32) -> StreamFamily {
        StreamFamily {
            master: self.master,
            experiment,
        }
    }
}

/// All substreams belonging to one experiment.
#[derive(Debug, Clone, Copy)]
pub struct StreamFamily {
    master: u64,
    experiment: u32,
}

impl StreamFamily {
    /// Substream for one independent work unit (trajectory, restart, batch).
    pub fn unit(&self, unit: u32) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(((self.experiment as u64) << 32) | unit as u64);
        rng
    }

    /// The experiment's own stream (unit 0 reserved for sequential phases).
    pub fn root(&self) -> ChaCha8Rng {
        self.unit(0)
    }
}
