//! Schedules, work sequences and the half-integer optimal construction.
//!
//! A schedule `T_k = {t_{k,r}}` for `r = 1..2^k-1` fixes how many hashes a
//! pebbler of order `k` performs in each round of its initial stage. Every
//! schedule sums to `2^k - 1`, the cost of walking from the seed to the end
//! of the chain.
//!
//! The optimal schedule has an exact description over the half-integers:
//! `T_k = {0}^{2^{k-1}-1} ∥ U_k ∥ V_k`, where `U_k` and `V_k` are built
//! recursively. Rounding each half-integer up or down according to the
//! parity of `k + r` yields the integral schedule. All half-integer
//! arithmetic here is exact: values are stored doubled.

use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four schedule families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// All work deferred to the last initial round.
    Rushing,
    /// One hash in every initial round.
    Speed1,
    /// Idle for the first half, then two hashes per round.
    Speed2,
    /// At most `⌈k/2⌉` hashes in any output round.
    Optimal,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::Rushing,
        Family::Speed1,
        Family::Speed2,
        Family::Optimal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Rushing => "rushing",
            Family::Speed1 => "speed1",
            Family::Speed2 => "speed2",
            Family::Optimal => "optimal",
        }
    }

    /// `t_{k,r}` for `1 <= r < 2^k`.
    pub fn hashes(self, k: u32, r: u64) -> u64 {
        debug_assert!(k < 63 && r >= 1 && r < (1u64 << k));
        let n = 1u64 << k;
        match self {
            Family::Rushing => {
                if r == n - 1 {
                    n - 1
                } else {
                    0
                }
            }
            Family::Speed1 => 1,
            Family::Speed2 => {
                if r < n / 2 {
                    0
                } else if r < n - 1 {
                    2
                } else {
                    1
                }
            }
            Family::Optimal => optimal_entry(k, r),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rushing" => Ok(Family::Rushing),
            "speed1" => Ok(Family::Speed1),
            "speed2" => Ok(Family::Speed2),
            "optimal" => Ok(Family::Optimal),
            other => Err(Error::InvalidInput(format!("unknown family `{other}`"))),
        }
    }
}

/// Bit length of `n`; zero for `n = 0`.
pub fn bitlen(n: u64) -> u32 {
    u64::BITS - n.leading_zeros()
}

fn optimal_entry(k: u32, r: u64) -> u64 {
    let n = 1u64 << k;
    if r < n / 2 {
        return 0;
    }
    let parity = (u64::from(k) + r) % 2;
    let doubled = optimal_entry_doubled(k, r) as u64;
    (parity + doubled) / 2
}

/// Twice the unrounded optimal entry at round `r`, `2^{k-1} <= r < 2^k`.
fn optimal_entry_doubled(k: u32, r: u64) -> i64 {
    let n = 1u64 << k;
    let modulus_bits = bitlen(n - r);
    let low = (2 * r) & ((1u64 << modulus_bits) - 1);
    i64::from(k) + 1 - i64::from(bitlen(low))
}

/// An integral schedule `T_k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub k: u32,
    pub family: Family,
    /// `t[r - 1] = t_{k,r}`.
    pub t: Vec<u64>,
}

impl Schedule {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn sum(&self) -> u64 {
        self.t.iter().sum()
    }

    /// `t_{k,r}`, one-based.
    pub fn at(&self, r: u64) -> u64 {
        self.t[(r - 1) as usize]
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_joined(f, self.t.iter())
    }
}

fn write_joined<T: fmt::Display>(
    f: &mut fmt::Formatter<'_>,
    items: impl Iterator<Item = T>,
) -> fmt::Result {
    for (i, item) in items.enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{item}")?;
    }
    Ok(())
}

/// Materializes `T_k` for a family.
pub fn make_schedule(family: Family, k: u32) -> Schedule {
    let n = 1u64 << k;
    Schedule {
        k,
        family,
        t: (1..n).map(|r| family.hashes(k, r)).collect(),
    }
}

/// Hashes an optimal pebbler of order `k` has performed before its round
/// `rho` starts, i.e. `sum_{r < rho} t_{k,r}`, for `1 <= rho <= 2^k`.
///
/// Runs in `O(k^2)` by counting, per bit length, how many rounds share the
/// same rounded entry instead of summing the schedule.
pub fn optimal_prefix(k: u32, rho: u64) -> u64 {
    let n = 1u64 << k;
    assert!(rho >= 1 && rho <= n, "round {rho} outside 1..=2^{k}");
    if k == 0 || rho <= n / 2 {
        return 0;
    }
    (n - 1) - optimal_tail(k, n - rho)
}

/// `sum_{d=1}^{depth} t_{k, 2^k - d}` for `depth <= 2^{k-1}`.
///
/// With `d = 2^k - r`, the unrounded entry is `(k + 1 - λ(d)) / 2` where
/// `λ(d) = 0` for a power of two and `1 + len(2^{len d} - d)` otherwise,
/// and the rounding parity is that of `k + d`.
fn optimal_tail(k: u32, depth: u64) -> u64 {
    let k64 = u64::from(k);
    let entry = |parity: u64, lambda: u64| (parity + k64 + 1 - lambda) / 2;
    let mut total = 0;
    for len in 1..=bitlen(depth) {
        let block_lo = 1u64 << (len - 1);
        let block_hi = ((1u64 << len) - 1).min(depth);
        total += entry((k64 + block_lo) % 2, 0);
        if block_hi == block_lo {
            continue;
        }
        // d in (block_lo, block_hi] maps to m = 2^len - d, same parity as d
        let m_lo = (1u64 << len) - block_hi;
        let m_hi = block_lo - 1;
        for mlen in bitlen(m_lo)..=bitlen(m_hi) {
            let a = m_lo.max(1u64 << (mlen - 1));
            let b = m_hi.min((1u64 << mlen) - 1);
            for parity_of_m in 0..2 {
                let count = count_with_parity(a, b, parity_of_m);
                total += count * entry((k64 + parity_of_m) % 2, 1 + u64::from(mlen));
            }
        }
    }
    total
}

/// Number of `x` in `[a, b]` (with `a >= 1`) such that `x % 2 == parity`.
fn count_with_parity(a: u64, b: u64, parity: u64) -> u64 {
    let upto = |n: u64| if n < parity { 0 } else { (n - parity) / 2 + 1 };
    upto(b) - upto(a - 1)
}

/// A half-integer, stored doubled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Half(i64);

impl Half {
    pub const ZERO: Half = Half(0);

    /// The value `doubled / 2`.
    pub const fn from_doubled(doubled: i64) -> Self {
        Half(doubled)
    }

    pub const fn from_int(n: i64) -> Self {
        Half(2 * n)
    }

    pub const fn doubled(self) -> i64 {
        self.0
    }

    pub const fn is_integral(self) -> bool {
        self.0 % 2 == 0
    }

    /// `⌊(parity + 2h) / 2⌋`: odd halves round up when `parity` is 1 and
    /// down when it is 0; integers are unchanged.
    pub fn round_with_parity(self, parity: u64) -> i64 {
        (self.0 + parity as i64).div_euclid(2)
    }
}

impl Add for Half {
    type Output = Half;
    fn add(self, rhs: Half) -> Half {
        Half(self.0 + rhs.0)
    }
}

impl Sub for Half {
    type Output = Half;
    fn sub(self, rhs: Half) -> Half {
        Half(self.0 - rhs.0)
    }
}

impl fmt::Display for Half {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integral() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// A sequence of half-integers.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HalfSeq(pub Vec<Half>);

impl HalfSeq {
    pub fn from_doubled(doubled: impl IntoIterator<Item = i64>) -> Self {
        HalfSeq(doubled.into_iter().map(Half::from_doubled).collect())
    }

    pub fn from_ints(ints: impl IntoIterator<Item = i64>) -> Self {
        HalfSeq(ints.into_iter().map(Half::from_int).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> Half {
        self.0.iter().fold(Half::ZERO, |acc, &h| acc + h)
    }

    /// Adds `h` to every element.
    pub fn shifted(&self, h: Half) -> HalfSeq {
        HalfSeq(self.0.iter().map(|&x| x + h).collect())
    }

    /// Elementwise sum; lengths must match.
    pub fn plus(&self, other: &HalfSeq) -> HalfSeq {
        assert_eq!(
            self.len(),
            other.len(),
            "elementwise sum of unequal lengths"
        );
        HalfSeq(self.0.iter().zip(&other.0).map(|(&a, &b)| a + b).collect())
    }

    pub fn concat(&self, other: &HalfSeq) -> HalfSeq {
        HalfSeq(self.0.iter().chain(&other.0).copied().collect())
    }

    pub fn max(&self) -> Option<Half> {
        self.0.iter().copied().max()
    }
}

impl fmt::Display for HalfSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_joined(f, self.0.iter())
    }
}

fn require_k_at_least_2(k: u32, what: &str) -> Result<()> {
    if k < 2 {
        return Err(Error::Domain(format!(
            "{what} is defined for k >= 2, got {k}"
        )));
    }
    Ok(())
}

const HALF: Half = Half::from_doubled(1);

fn uv_pair(k: u32) -> (HalfSeq, HalfSeq) {
    let three_halves = HalfSeq::from_doubled([3]);
    let (mut u, mut v) = (three_halves.clone(), three_halves);
    for order in 3..=k {
        let head = u.shifted(HALF);
        let ones = HalfSeq::from_ints(std::iter::repeat_n(1, 1usize << (order - 3)));
        let next_v = head.concat(&v.shifted(HALF));
        u = head.concat(&ones);
        v = next_v;
    }
    (u, v)
}

/// `U_k`: `U_2 = {3/2}`, `U_k = (U_{k-1} + 1/2) ∥ {1}^{2^{k-3}}`.
pub fn u_seq(k: u32) -> Result<HalfSeq> {
    require_k_at_least_2(k, "U_k")?;
    Ok(uv_pair(k).0)
}

/// `V_k`: `V_2 = {3/2}`, `V_k = (U_{k-1} + 1/2) ∥ (V_{k-1} + 1/2)`.
pub fn v_seq(k: u32) -> Result<HalfSeq> {
    require_k_at_least_2(k, "V_k")?;
    Ok(uv_pair(k).1)
}

/// The unrounded optimal schedule from the explicit half-integer formula.
pub fn unrounded_optimal_explicit(k: u32) -> HalfSeq {
    let n = 1u64 << k;
    HalfSeq::from_doubled((1..n).map(|r| {
        if r < n / 2 {
            0
        } else {
            optimal_entry_doubled(k, r)
        }
    }))
}

/// The unrounded optimal schedule `{0}^{2^{k-1}-1} ∥ U_k ∥ V_k`.
///
/// Computes both the recursive and the explicit construction and panics if
/// they disagree.
pub fn unrounded_optimal(k: u32) -> Result<HalfSeq> {
    require_k_at_least_2(k, "the unrounded optimal schedule")?;
    let (u, v) = uv_pair(k);
    let zeros = HalfSeq::from_ints(std::iter::repeat_n(0, (1usize << (k - 1)) - 1));
    let recursive = zeros.concat(&u).concat(&v);
    let explicit = unrounded_optimal_explicit(k);
    assert_eq!(
        recursive, explicit,
        "recursive and explicit optimal schedules disagree at k = {k}"
    );
    Ok(recursive)
}

/// The unrounded optimal schedule for any order; `T_0 = {}` and
/// `T_1 = {1}` are already integral.
pub fn unrounded_schedule(k: u32) -> HalfSeq {
    match k {
        0 => HalfSeq::default(),
        1 => HalfSeq::from_ints([1]),
        _ => unrounded_optimal(k).expect("k >= 2"),
    }
}

/// Rounds an unrounded optimal schedule by the parity of `k + r`.
pub fn parity_round(h: &HalfSeq, k: u32) -> Schedule {
    let t =
        h.0.iter()
            .enumerate()
            .map(|(idx, &x)| {
                let r = idx as u64 + 1;
                x.round_with_parity((u64::from(k) + r) % 2) as u64
            })
            .collect();
    Schedule {
        k,
        family: Family::Optimal,
        t,
    }
}

/// Hashes per round over the last `2^k - 1` rounds of a pebbler.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkSeq {
    pub k: u32,
    /// `w[j]` is the work in round `2^k + 1 + j`.
    pub w: Vec<u64>,
}

impl WorkSeq {
    pub fn max(&self) -> u64 {
        self.w.iter().copied().max().unwrap_or(0)
    }

    /// Work in absolute round `r`, `2^k < r < 2^{k+1}`.
    pub fn at_round(&self, r: u64) -> u64 {
        self.w[(r - (1u64 << self.k) - 1) as usize]
    }
}

impl fmt::Display for WorkSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_joined(f, self.w.iter())
    }
}

/// `W_0 = {}`, `W_k = T_{k-1} + W_{k-1} ∥ {0} ∥ W_{k-1}`.
pub fn work_sequence(family: Family, k: u32) -> WorkSeq {
    let mut w: Vec<u64> = Vec::new();
    for order in 1..=k {
        let t = make_schedule(family, order - 1);
        let mut next: Vec<u64> = t.t.iter().zip(&w).map(|(a, b)| a + b).collect();
        next.push(0);
        next.extend_from_slice(&w);
        w = next;
    }
    WorkSeq { k, w }
}

/// The work recurrence over unrounded optimal schedules.
pub fn work_sequence_half(k: u32) -> HalfSeq {
    let mut w = HalfSeq::default();
    for order in 1..=k {
        let t = unrounded_schedule(order - 1);
        w = t.plus(&w).concat(&HalfSeq::from_ints([0])).concat(&w);
    }
    w
}

/// Rounds an unrounded work sequence entry by entry by the parity of its
/// one-based position in the sequence.
///
/// Rounding by the parity of `k + r` with `r` the absolute round agrees
/// with this for even `k` only.
pub fn parity_round_work(w: &HalfSeq, k: u32) -> WorkSeq {
    let w =
        w.0.iter()
            .enumerate()
            .map(|(j, &x)| x.round_with_parity((j as u64 + 1) % 2) as u64)
            .collect();
    WorkSeq { k, w }
}

/// Checks `(U_k ∥ V_k) + ({0} ∥ W_{k-1}) = {(k+1)/2}^{2^{k-1}}` for the
/// given sequences.
pub fn check_key_equation(uv: &HalfSeq, w_prev: &HalfSeq, k: u32) -> bool {
    let expected_len = 1usize << (k - 1);
    if uv.len() != expected_len || w_prev.len() + 1 != expected_len {
        return false;
    }
    let target = Half::from_doubled(i64::from(k) + 1);
    let shifted = HalfSeq::from_ints([0]).concat(w_prev);
    uv.plus(&shifted).0.iter().all(|&x| x == target)
}

/// The key equation of the optimal schedule at order `k`.
pub fn key_equation_holds(k: u32) -> Result<bool> {
    require_k_at_least_2(k, "the key equation")?;
    let (u, v) = uv_pair(k);
    Ok(check_key_equation(
        &u.concat(&v),
        &work_sequence_half(k - 1),
        k,
    ))
}

/// `τ_0 = 0`, `τ_n = e^{τ_{n-1} - 1}`: `(1 - τ_n)` is the expected fraction
/// of the domain that is an `n`-th iterate image of a random function.
pub fn tau(n: u64) -> f64 {
    (0..n).fold(0.0, |t, _| (t - 1.0f64).exp())
}
