//! Keyed deterministic random streams.
//!
//! Every stochastic component draws from its own ChaCha8 stream derived from
//! the run seed, a domain label and an index. Streams never share state, so
//! the order in which components are called cannot perturb one another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use rand::Rng;

pub type SimRng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(mut hash: u64, bytes: &[u8]) -> u64 {
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a 64-bit key from `(seed, domain, index)`.
pub fn derive_key(seed: u64, domain: &str, index: u64) -> u64 {
    let mut h = fnv1a(FNV_OFFSET, &seed.to_le_bytes());
    h = fnv1a(h, domain.as_bytes());
    h = fnv1a(h, &index.to_le_bytes());
    mix(h)
}

/// Independent stream for `(seed, domain, index)`.
pub fn stream(seed: u64, domain: &str, index: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(derive_key(seed, domain, index))
}

/// Stream keyed by an arbitrary label, e.g. a backend request id.
pub fn labelled(seed: u64, domain: &str, label: &str) -> SimRng {
    let idx = fnv1a(FNV_OFFSET, label.as_bytes());
    stream(seed, domain, idx)
}

/// Serde form of a [`SimRng`]: seed as hex, stream, and the word position
/// as a decimal string (it is 128-bit, which self-describing formats do not
/// all carry).
pub mod serde_state {
    use alloc::string::{String, ToString};
    use core::fmt::Write;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Repr {
        seed: String,
        stream: u64,
        word_pos: String,
    }

    pub fn serialize<S: Serializer>(rng: &ChaCha8Rng, s: S) -> Result<S::Ok, S::Error> {
        let mut seed = String::with_capacity(64);
        for b in rng.get_seed() {
            let _ = write!(seed, "{b:02x}");
        }
        Repr {
            seed,
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ChaCha8Rng, D::Error> {
        let r = Repr::deserialize(d)?;
        if r.seed.len() != 64 || !r.seed.is_ascii() {
            return Err(de::Error::custom("rng seed must be 64 hex digits"));
        }
        let mut seed = [0u8; 32];
        for (i, b) in seed.iter_mut().enumerate() {
            *b = u8::from_str_radix(&r.seed[2 * i..2 * i + 2], 16).map_err(de::Error::custom)?;
        }
        let word_pos: u128 = r.word_pos.parse().map_err(de::Error::custom)?;
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(r.stream);
        rng.set_word_pos(word_pos);
        Ok(rng)
    }
}
