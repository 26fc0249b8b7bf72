//! Reversing hash chains with few stored values and bounded work per round.
//!
//! A chain `x_0, x_1 = f(x_0), ..., x_n = f^n(x_0)` is easy to walk forward
//! and expensive to walk backward. A pebbler of order `k` is started from
//! `x_0`, and after `2^k` rounds it outputs `x_{2^k - 1}, ..., x_0`, one per
//! round, while storing `O(k)` values and spending at most about `k/2` hashes
//! in any round.
//!
//! - [`owf`]: the one-way functions and the [`owf::Value`] type.
//! - [`schedule`]: hash schedules, their half-integer forms and work sequences.
//! - [`pebbler`]: the recursive pebbler with trace instrumentation.
//! - [`inplace`]: pebblers whose state is a counter plus `k + 1` slots.
//! - [`protocol`]: the hash-chain authentication prover and verifier.

pub mod error;
pub mod inplace;
pub mod owf;
pub mod pebbler;
pub mod protocol;
pub mod schedule;
pub mod selfcheck;

pub use error::{Error, Result};
pub use inplace::{InPlacePebbler, InPlaceState, Variant};
pub use owf::{OneWayFunction, Owf, Value};
pub use pebbler::{FrameworkPebbler, Pebbler, RoundResult, Trace};
pub use protocol::{Engine, Prover, Verdict, Verifier};
pub use schedule::{Family, Half, HalfSeq, Schedule, WorkSeq};
