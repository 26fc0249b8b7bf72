//! Length-preserving one-way functions and chain iteration.
//!
//! Every pebbler hashes through an [`Owf`] handle. Three functions are
//! built in:
//!
//! | name                  | width | map                                   |
//! |-----------------------|-------|---------------------------------------|
//! | `md5`                 | 16    | MD5 digest of the 16-byte input       |
//! | `davies-meyer-aes128` | 16    | AES-128 of the zero block, key = input |
//! | `testmix64`           | 8     | 64-bit integer mixing permutation      |
//!
//! `testmix64` is not one-way at all. It exists so that exhaustive tests
//! over small chains run fast; pebbling correctness does not depend on the
//! strength of the function.

use std::fmt;
use std::sync::Arc;

use aes::cipher::{BlockCipherEncrypt, KeyInit};
use aes::Aes128;
use md5::{Digest, Md5};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Names accepted by [`Owf::builtin`].
pub const BUILTIN_NAMES: [&str; 3] = ["md5", "davies-meyer-aes128", "testmix64"];

/// One element of a hash chain.
///
/// Values are opaque byte strings; equality is bytewise. They print and
/// serialize as lowercase hex without a prefix.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Value(Box<[u8]>);

impl Value {
    pub fn from_bytes(bytes: impl Into<Box<[u8]>>) -> Self {
        Value(bytes.into())
    }

    /// All-zero value of the given width.
    pub fn zero(width: usize) -> Self {
        Value(vec![0u8; width].into_boxed_slice())
    }

    /// Parses lowercase hex of exactly `2 * width` characters.
    pub fn from_hex(s: &str, width: usize) -> Result<Self> {
        if s.len() != 2 * width {
            return Err(Error::InvalidInput(format!(
                "expected {} hex characters, got {}",
                2 * width,
                s.len()
            )));
        }
        if s.bytes().any(|b| b.is_ascii_uppercase()) {
            return Err(Error::InvalidInput("hex must be lowercase".into()));
        }
        let bytes = hex::decode(s).map_err(|e| Error::InvalidInput(format!("bad hex: {e}")))?;
        Ok(Value(bytes.into_boxed_slice()))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn width(&self) -> usize {
        self.0.len()
    }

    /// Copy of this value with bit `bit` (counted from the first byte's
    /// least significant bit) inverted.
    pub fn with_bit_flipped(&self, bit: usize) -> Self {
        let mut bytes = self.0.clone();
        let n = bytes.len();
        bytes[(bit / 8) % n] ^= 1 << (bit % 8);
        Value(bytes)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Value({})", self.to_hex())
    }
}

impl AsRef<[u8]> for Value {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        let bytes = hex::decode(&s).map_err(serde::de::Error::custom)?;
        Ok(Value(bytes.into_boxed_slice()))
    }
}

/// A deterministic, length-preserving map on `width`-byte strings.
pub trait OneWayFunction: Send + Sync {
    fn name(&self) -> &str;

    fn width(&self) -> usize;

    /// Writes f(input) into `output`. Both slices have length `width()`.
    fn apply(&self, input: &[u8], output: &mut [u8]);

    /// Seed used when none is given: f applied to the all-zero block.
    fn default_seed(&self) -> Vec<u8> {
        let zero = vec![0u8; self.width()];
        let mut out = vec![0u8; self.width()];
        self.apply(&zero, &mut out);
        out
    }
}

/// Shared handle to a one-way function.
#[derive(Clone)]
pub struct Owf(Arc<dyn OneWayFunction>);

impl fmt::Debug for Owf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Owf")
            .field("name", &self.name())
            .field("width", &self.width())
            .finish()
    }
}

impl Owf {
    pub fn new(f: impl OneWayFunction + 'static) -> Self {
        Owf(Arc::new(f))
    }

    /// Looks up one of the [`BUILTIN_NAMES`].
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "md5" => Ok(Owf::new(Md5Owf)),
            "davies-meyer-aes128" => Ok(Owf::new(DaviesMeyerAes128)),
            "testmix64" => Ok(Owf::new(TestMix64)),
            other => Err(Error::UnknownOwf(other.to_string())),
        }
    }

    pub fn name(&self) -> &str {
        self.0.name()
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    /// Computes f(v).
    pub fn evaluate(&self, v: &Value) -> Result<Value> {
        self.check_width(v)?;
        Ok(self.hash(v))
    }

    /// Computes f^m(v) by `m` sequential evaluations.
    pub fn iterate(&self, v: &Value, m: u64) -> Result<Value> {
        self.check_width(v)?;
        let mut cur = v.clone();
        for _ in 0..m {
            cur = self.hash(&cur);
        }
        Ok(cur)
    }

    /// The reproducible default chain seed.
    ///
    /// For `md5` this is the digest of the empty string; for every other
    /// function it is f applied to the all-zero block.
    pub fn default_seed(&self) -> Value {
        Value::from_bytes(self.0.default_seed())
    }

    pub fn parse_value(&self, hex: &str) -> Result<Value> {
        Value::from_hex(hex, self.width())
    }

    // Callers guarantee the width; pebbler internals only ever hold values
    // produced by this handle or checked on entry.
    pub(crate) fn hash(&self, v: &Value) -> Value {
        debug_assert_eq!(v.width(), self.width());
        let mut out = vec![0u8; self.width()];
        self.0.apply(v.as_bytes(), &mut out);
        Value(out.into_boxed_slice())
    }

    pub(crate) fn check_width(&self, v: &Value) -> Result<()> {
        if v.width() != self.width() {
            return Err(Error::InvalidInput(format!(
                "value has {} bytes, {} expects {}",
                v.width(),
                self.name(),
                self.width()
            )));
        }
        Ok(())
    }
}

struct Md5Owf;

impl OneWayFunction for Md5Owf {
    fn name(&self) -> &str {
        "md5"
    }

    fn width(&self) -> usize {
        16
    }

    fn apply(&self, input: &[u8], output: &mut [u8]) {
        output.copy_from_slice(&Md5::digest(input));
    }

    fn default_seed(&self) -> Vec<u8> {
        Md5::digest(b"").to_vec()
    }
}

struct DaviesMeyerAes128;

impl OneWayFunction for DaviesMeyerAes128 {
    fn name(&self) -> &str {
        "davies-meyer-aes128"
    }

    fn width(&self) -> usize {
        16
    }

    fn apply(&self, input: &[u8], output: &mut [u8]) {
        let key: [u8; 16] = input.try_into().expect("16-byte key");
        let cipher = Aes128::new(&key.into());
        let mut block = [0u8; 16].into();
        cipher.encrypt_block(&mut block);
        let block: [u8; 16] = block.into();
        output.copy_from_slice(&block);
    }
}

struct TestMix64;

impl TestMix64 {
    // splitmix64 finalizer after a Weyl increment; every step is invertible
    fn mix(x: u64) -> u64 {
        let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
}

impl OneWayFunction for TestMix64 {
    fn name(&self) -> &str {
        "testmix64"
    }

    fn width(&self) -> usize {
        8
    }

    fn apply(&self, input: &[u8], output: &mut [u8]) {
        let x = u64::from_be_bytes(input.try_into().expect("8-byte input"));
        output.copy_from_slice(&Self::mix(x).to_be_bytes());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn hexv(s: &str) -> Value {
        Value::from_bytes(hex::decode(s).unwrap())
    }

    #[test]
    fn md5_of_empty_seed_value() {
        // python3: hashlib.md5(bytes.fromhex("d41d8cd9...")).hexdigest()
        let owf = Owf::builtin("md5").unwrap();
        let v = hexv("d41d8cd98f00b204e9800998ecf8427e");
        let out = owf.evaluate(&v).unwrap();
        assert_eq!(out.to_hex(), "59adb24ef3cdbe0297f05b395827453f");
        assert_eq!(out.width(), 16);
    }

    #[test]
    fn davies_meyer_zero_key_matches_aes_vector() {
        // FIPS-197 style known answer: AES-128(key=0, pt=0)
        let owf = Owf::builtin("davies-meyer-aes128").unwrap();
        let out = owf.evaluate(&Value::zero(16)).unwrap();
        assert_eq!(out.to_hex(), "66e94bd4ef8a2c3b884cfa59ca342b2e");
    }

    #[test]
    fn builtin_widths() {
        assert_eq!(Owf::builtin("md5").unwrap().width(), 16);
        assert_eq!(Owf::builtin("davies-meyer-aes128").unwrap().width(), 16);
        assert_eq!(Owf::builtin("testmix64").unwrap().width(), 8);
    }

    #[test]
    fn unknown_builtin_is_rejected() {
        assert!(matches!(Owf::builtin("sha3"), Err(Error::UnknownOwf(_))));
    }

    #[test]
    fn width_mismatch_is_invalid_input() {
        let owf = Owf::builtin("testmix64").unwrap();
        assert!(matches!(
            owf.evaluate(&Value::zero(16)),
            Err(Error::InvalidInput(_))
        ));
        assert!(owf.iterate(&Value::zero(7), 0).is_err());
    }

    #[test]
    fn testmix_is_deterministic() {
        let owf = Owf::builtin("testmix64").unwrap();
        let v = hexv("0123456789abcdef");
        assert_eq!(owf.evaluate(&v).unwrap(), owf.evaluate(&v).unwrap());
    }

    #[test]
    fn iterate_identity_and_composition() {
        let owf = Owf::builtin("md5").unwrap();
        let v = owf.default_seed();
        assert_eq!(owf.iterate(&v, 0).unwrap(), v);
        let a = owf.iterate(&owf.iterate(&v, 3).unwrap(), 5).unwrap();
        assert_eq!(a, owf.iterate(&v, 8).unwrap());
    }

    #[test]
    fn length_four_chain_ordering() {
        let owf = Owf::builtin("md5").unwrap();
        let x0 = owf.default_seed();
        let chain: Vec<Value> = (0..=4).map(|i| owf.iterate(&x0, i).unwrap()).collect();
        for w in chain.windows(2) {
            assert_eq!(owf.evaluate(&w[0]).unwrap(), w[1]);
        }
    }

    #[test]
    fn default_seeds() {
        let md5 = Owf::builtin("md5").unwrap();
        assert_eq!(
            md5.default_seed().to_hex(),
            "d41d8cd98f00b204e9800998ecf8427e"
        );
        let mix = Owf::builtin("testmix64").unwrap();
        assert_eq!(mix.default_seed(), mix.evaluate(&Value::zero(8)).unwrap());
    }

    #[test]
    fn testmix_has_no_collisions_on_sample() {
        let owf = Owf::builtin("testmix64").unwrap();
        let mut seen = HashSet::with_capacity(1 << 20);
        for i in 0u64..(1 << 20) {
            // spread inputs over the whole word
            let x = i.wrapping_mul(0x2545_f491_4f6c_dd1d);
            let v = Value::from_bytes(x.to_be_bytes().to_vec());
            assert!(seen.insert(owf.hash(&v)));
        }
    }

    #[test]
    fn hex_parsing() {
        assert!(Value::from_hex("00ff", 2).is_ok());
        assert!(Value::from_hex("00FF", 2).is_err());
        assert!(Value::from_hex("00f", 2).is_err());
        assert!(Value::from_hex("zz00", 2).is_err());
        assert_eq!(Value::from_hex("00ff", 2).unwrap().to_string(), "00ff");
    }

    #[test]
    fn flipping_a_bit_changes_value() {
        let v = Value::zero(8);
        let w = v.with_bit_flipped(3);
        assert_ne!(v, w);
        assert_eq!(w.with_bit_flipped(3), v);
    }
}
