//! Lamport-style identification over a hash chain.
//!
//! The prover registers the endpoint `x_n = f^n(x_0)` once and then proves
//! its identity in each later round by releasing the next preimage
//! `x_{n-1}, x_{n-2}, ..., x_0`. The verifier keeps only the last accepted
//! value and accepts a candidate `p` exactly when `f(p)` equals it.
//!
//! Registration carries the endpoint without any authentication of its
//! own. Binding the endpoint to an identity is left to whatever out-of-band
//! channel a deployment trusts.

pub mod wire;

use std::fmt;

use crate::error::{Error, Result};
use crate::inplace::{InPlacePebbler, Variant};
use crate::owf::{Owf, Value};
use crate::pebbler::{FrameworkPebbler, Pebbler};
use crate::schedule::Family;

/// Pebbler a prover runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Framework(Family),
    InPlace(Variant),
}

impl Default for Engine {
    fn default() -> Self {
        Engine::InPlace(Variant::Optimal)
    }
}

/// One released preimage and the hashes spent producing it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Release {
    pub value: Value,
    pub hashes: u64,
}

/// Holder of the chain seed.
pub struct Prover {
    pebbler: Box<dyn Pebbler + Send>,
    n: u64,
    released: u64,
}

impl fmt::Debug for Prover {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Prover")
            .field("k", &self.pebbler.order())
            .field("n", &self.n)
            .field("released", &self.released)
            .finish()
    }
}

impl Prover {
    /// Runs the initial stage of the pebbler and returns the prover with the
    /// endpoint `f^{2^k}(seed)` to register.
    pub fn new(owf: Owf, engine: Engine, k: u32, seed: Value) -> Result<(Self, Value)> {
        let mut pebbler: Box<dyn Pebbler + Send> = match engine {
            Engine::Framework(family) => {
                Box::new(FrameworkPebbler::new(owf.clone(), family, k, seed)?)
            }
            Engine::InPlace(variant) => {
                Box::new(InPlacePebbler::new(owf.clone(), variant, k, seed)?)
            }
        };
        let n = 1u64 << k;
        while pebbler.next_round() < n {
            pebbler.step()?;
        }
        let first = pebbler.head().expect("first output is stored at round 2^k");
        let endpoint = owf.evaluate(first)?;
        Ok((
            Prover {
                pebbler,
                n,
                released: 0,
            },
            endpoint,
        ))
    }

    pub fn order(&self) -> u32 {
        self.pebbler.order()
    }

    /// Chain length `2^k`.
    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn released(&self) -> u64 {
        self.released
    }

    pub fn remaining(&self) -> u64 {
        self.n - self.released
    }

    /// Releases the next preimage.
    pub fn next_release(&mut self) -> Result<Release> {
        if self.released == self.n {
            return Err(Error::ChainExhausted {
                released: self.released,
            });
        }
        let round = self.pebbler.step()?;
        let value = round
            .output
            .expect("every output-stage round emits a value");
        self.released += 1;
        Ok(Release {
            value,
            hashes: round.hashes,
        })
    }
}

/// Outcome of checking one candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    Reject,
}

/// Holder of the current anchor.
#[derive(Debug, Clone)]
pub struct Verifier {
    owf: Owf,
    anchor: Value,
    verified: u64,
}

impl Verifier {
    pub fn register(owf: Owf, endpoint: Value) -> Result<Self> {
        owf.check_width(&endpoint)?;
        Ok(Verifier {
            owf,
            anchor: endpoint,
            verified: 0,
        })
    }

    pub fn anchor(&self) -> &Value {
        &self.anchor
    }

    pub fn verified(&self) -> u64 {
        self.verified
    }

    /// Accepts `candidate` iff it hashes to the anchor, in which case it
    /// becomes the new anchor. Only the immediate preimage is accepted; a
    /// prover that skips ahead is rejected. A rejection changes nothing.
    pub fn check(&mut self, candidate: &Value) -> Verdict {
        match self.owf.evaluate(candidate) {
            Ok(image) if image == self.anchor => {
                self.anchor = candidate.clone();
                self.verified += 1;
                Verdict::Accept
            }
            _ => Verdict::Reject,
        }
    }
}
