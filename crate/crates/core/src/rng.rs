//! Seedable, replayable random streams.
//!
//! Every stochastic routine in this crate draws from an [`RngStream`]
//! obtained through [`rng_stream`]. A stream is fully determined by
//! `(seed, stream_id)` on every platform, and distinct stream ids give
//! statistically independent sequences, so work can be sharded across
//! threads by stream id and still replay bit-for-bit.
//!
//! Streams deliberately do not implement `Clone`: a draw sequence has a
//! single owner, and replays are expressed by rebuilding the stream from its
//! coordinates.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::outcome::Outcome;

/// Number of pairs (or chains, or table rows) generated per stream chunk.
///
/// Batch generators shard work into fixed chunks, one stream per chunk, so
/// parallel and serial execution consume identical draw sequences.
pub const CHUNK_LEN: u64 = 8192;

/// Purpose of a stream within a batch; keeps order choices, outcome draws
/// and counterfactual fills on separate streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    /// Outcome draws (coins, collapse sampling, hidden angles).
    Outcome = 0,
    /// Measurement-order choices.
    Order = 1,
    /// Counterfactual cell fills.
    Fill = 2,
}

/// A deterministic random stream handle.
pub struct RngStream {
    rng: ChaCha8Rng,
    seed: u64,
    stream_id: u64,
}

/// Opens the stream identified by `(seed, stream_id)`.
pub fn rng_stream(seed: u64, stream_id: u64) -> RngStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    RngStream { rng, seed, stream_id }
}

/// Builds the stream id for chunk `chunk` of kind `kind` within batch
/// `batch`. Layout: batch in bits 40..64, kind in bits 32..40, chunk below.
pub fn stream_id(batch: u32, kind: StreamKind, chunk: u64) -> u64 {
    assert!(batch < (1 << 24), "batch index out of range");
    assert!(chunk < (1 << 32), "chunk index out of range");
    ((batch as u64) << 40) | ((kind as u64) << 32) | chunk
}

/// Runs `make(chunk)` for every chunk covering `0..n` items and concatenates
/// the results in chunk order. The parallel and serial paths are
/// interchangeable because each chunk owns its streams.
pub(crate) fn collect_chunked<T: Send>(
    n: u64,
    parallel: bool,
    make: impl Fn(u64) -> Vec<T> + Send + Sync,
) -> Vec<T> {
    let chunks = n.div_ceil(CHUNK_LEN);
    let parts: Vec<Vec<T>> = if parallel {
        use rayon::prelude::*;
        (0..chunks).into_par_iter().map(&make).collect()
    } else {
        (0..chunks).map(&make).collect()
    };
    let mut out = Vec::with_capacity(n as usize);
    for part in parts {
        out.extend(part);
    }
    out
}

/// Bounds of chunk `chunk` within `0..n`.
pub(crate) fn chunk_bounds(n: u64, chunk: u64) -> (u64, u64) {
    let lo = chunk * CHUNK_LEN;
    (lo, n.min(lo + CHUNK_LEN))
}

impl RngStream {
    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random()
    }

    /// Uniform angle in `[0, 2*pi)`.
    pub fn angle(&mut self) -> f64 {
        self.uniform() * TAU
    }

    /// Fair coin over outcomes.
    pub fn coin(&mut self) -> Outcome {
        if self.uniform() < 0.5 {
            Outcome::Plus
        } else {
            Outcome::Minus
        }
    }

    /// +1 with probability `p_plus`, else -1. `p_plus` must be in `[0, 1]`.
    pub fn outcome_with_prob(&mut self, p_plus: f64) -> Outcome {
        debug_assert!((0.0..=1.0).contains(&p_plus));
        if self.uniform() < p_plus {
            Outcome::Plus
        } else {
            Outcome::Minus
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}
