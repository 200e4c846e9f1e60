//! Reproducible random streams.
//!
//! A [`SeedTree`] derives an independent ChaCha8 stream for every
//! `(purpose, index path)` pair by hashing it together with the master seed.
//! Replicas therefore never hand generator state to one another, and a run is
//! reproducible regardless of how replicas are scheduled across threads.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

/// Stream generator algorithm; recorded in every output manifest.
pub const GENERATOR_TAG: &str = "chacha8/sha256-substreams/v1";
/// Gaussian transform; recorded in every output manifest.
pub const GAUSSIAN_TAG: &str = "ziggurat/rand_distr-0.5/v1";

pub type Stream = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedTree {
    master: u64,
}

impl SeedTree {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// Stream for a purpose tag and a path of indices (replica, step, ...).
    pub fn stream(&self, purpose: &str, path: &[u64]) -> Stream {
        let mut h = Sha256::new();
        h.update(b"enkf-lab/stream/v1");
        h.update(self.master.to_le_bytes());
        h.update((purpose.len() as u64).to_le_bytes());
        h.update(purpose.as_bytes());
        for idx in path {
            h.update(idx.to_le_bytes());
        }
        let digest = h.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest[..32]);
        ChaCha8Rng::from_seed(seed)
    }

    /// Child tree whose streams are disjoint from the parent's.
    pub fn child(&self, purpose: &str, index: u64) -> SeedTree {
        let mut rng = self.stream(purpose, &[index, u64::MAX]);
        SeedTree { master: rng.random() }
    }
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// `rows × cols` block of i.i.d. standard normals, filled column by column.
pub fn standard_normal_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn standard_normal_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample(StandardNormal))
}

/// Lowercase hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
