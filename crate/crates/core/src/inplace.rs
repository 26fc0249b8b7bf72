//! In-place pebblers.
//!
//! Between rounds the whole state of an in-place pebbler is its order, the
//! round counter `r`, and a fixed array `z` of `k + 1` value slots. Which
//! child pebblers are alive, what phase each is in, how far each has got
//! and where its values sit in `z` are all recomputed from the countdown
//! `c = 2^{k+1} - r` at the start of every round.
//!
//! Slot layout: a live pebbler `P_m` keeps its own `y_j` in `z[j]`. When
//! `P_j` reaches its first output round it holds `y_0..=y_j` in
//! `z[0..=j]`; it outputs `z[0]` and shifts `z[1..=j]` down by one so that
//! its children `P_{j-1}, ..., P_0` again find their seeds at their own
//! order. The top pebbler is handled the same way in round `2^k`.

use crate::error::{Error, Result};
use crate::owf::{Owf, Value};
use crate::pebbler::{Pebbler, RoundResult};
use crate::schedule::{bitlen, make_schedule, optimal_prefix, Family, Half};

/// Largest order whose round counter fits the 4-octet save format.
pub const MAX_INPLACE_ORDER: u32 = 30;

/// Count and strip trailing 0-bits. Undefined for zero.
pub fn eat0(c: u64) -> Result<(u32, u64)> {
    if c == 0 {
        return Err(Error::Domain("eat0 of zero".into()));
    }
    let n = c.trailing_zeros();
    Ok((n, c >> n))
}

/// Count and strip trailing 1-bits.
pub fn eat1(c: u64) -> (u32, u64) {
    let n = c.trailing_ones();
    // n == 64 only for u64::MAX
    (n, c.checked_shr(n).unwrap_or(0))
}

/// Phase of a live child pebbler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    /// Local round in `[1, 2^{i-1})`: no hashing yet.
    Idle,
    /// Local round in `[2^{i-1}, 2^i)`.
    Hashing,
    /// Local round `2^i`: outputs `y_0`.
    FirstOutput,
}

/// A live pebbler `P_index` as read off the counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PebblerPhase {
    pub index: u32,
    pub phase: Phase,
    /// `c mod 2^{index+1}`; rounds left in this pebbler's lifetime.
    pub local_counter: u64,
}

impl PebblerPhase {
    /// The pebbler's own round number, `2^{i+1} - local_counter`.
    pub fn local_round(&self) -> u64 {
        (1u64 << (self.index + 1)) - self.local_counter
    }
}

fn check_output_counter(k: u32, c: u64) -> Result<()> {
    if c == 0 || c >= 1u64 << k {
        return Err(Error::Domain(format!(
            "counter {c} outside the output stage (0, 2^{k}) of P_{k}"
        )));
    }
    Ok(())
}

fn phase_of(index: u32, local_counter: u64) -> Phase {
    let half = 1u64 << index;
    if local_counter == half {
        Phase::FirstOutput
    } else if index >= 1 && local_counter > half + (half >> 1) {
        Phase::Idle
    } else {
        Phase::Hashing
    }
}

/// Live child pebblers of `P_k` at countdown `c`, highest order first.
///
/// Every set bit `i` of `c` is a live `P_i`.
pub fn decode_states(k: u32, c: u64) -> Result<Vec<PebblerPhase>> {
    check_output_counter(k, c)?;
    Ok((0..k)
        .rev()
        .filter(|&i| (c >> i) & 1 == 1)
        .map(|i| {
            let local_counter = c & ((1u64 << (i + 1)) - 1);
            PebblerPhase {
                index: i,
                phase: phase_of(i, local_counter),
                local_counter,
            }
        })
        .collect())
}

/// Hash budget of each working pebbler at countdown `c`.
///
/// The hashing pebblers, not counting the rightmost one (which is the one
/// in its first output round), each own the run of bits from their own bit
/// down to just above the next such pebbler's bit, or down to bit 0. The
/// budget is half the run length.
pub fn segment_budgets(k: u32, c: u64) -> Result<Vec<(u32, Half)>> {
    let mut active: Vec<u32> = decode_states(k, c)?
        .into_iter()
        .filter(|p| p.phase != Phase::Idle)
        .map(|p| p.index)
        .collect();
    active.pop();
    Ok(active
        .iter()
        .enumerate()
        .map(|(n, &i)| {
            let low = active.get(n + 1).map_or(0, |&next| next + 1);
            (i, Half::from_doubled(i64::from(i + 1 - low)))
        })
        .collect())
}

/// Schedule an in-place pebbler follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Speed2,
    Optimal,
}

impl Variant {
    fn code(self) -> u8 {
        match self {
            Variant::Speed2 => 0,
            Variant::Optimal => 1,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Variant::Speed2),
            1 => Ok(Variant::Optimal),
            other => Err(Error::Decode(format!("unknown variant code {other}"))),
        }
    }

    pub fn family(self) -> Family {
        match self {
            Variant::Speed2 => Family::Speed2,
            Variant::Optimal => Family::Optimal,
        }
    }

    pub fn from_family(family: Family) -> Option<Self> {
        match family {
            Family::Speed2 => Some(Variant::Speed2),
            Family::Optimal => Some(Variant::Optimal),
            _ => None,
        }
    }
}

/// Complete inter-round state: `(variant, k, r, z)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InPlaceState {
    variant: Variant,
    k: u32,
    round: u64,
    z: Vec<Option<Value>>,
    width: usize,
}

const HEADER_LEN: usize = 6;

impl InPlaceState {
    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn order(&self) -> u32 {
        self.k
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn slots(&self) -> &[Option<Value>] {
        &self.z
    }

    pub fn occupied(&self) -> usize {
        self.z.iter().filter(|s| s.is_some()).count()
    }

    /// Size of the saved form for a given order and value width.
    pub fn encoded_len(variant: Variant, k: u32, width: usize) -> usize {
        let per_slot = match variant {
            Variant::Speed2 => width,
            Variant::Optimal => 1 + width,
        };
        HEADER_LEN + (k as usize + 1) * per_slot
    }

    /// Variant octet, order octet, big-endian 4-octet round, then the `k + 1`
    /// slots from `z[0]` up. Optimal slots carry a presence octet (1 or 0)
    /// and are zero-filled when absent.
    pub fn save(&self) -> Vec<u8> {
        let width = self.width;
        let mut out = Vec::with_capacity(Self::encoded_len(self.variant, self.k, width));
        out.push(self.variant.code());
        out.push(self.k as u8);
        out.extend_from_slice(&(self.round as u32).to_be_bytes());
        for slot in &self.z {
            match (self.variant, slot) {
                (Variant::Speed2, Some(v)) => out.extend_from_slice(v.as_bytes()),
                (Variant::Speed2, None) => unreachable!("speed-2 slots are always populated"),
                (Variant::Optimal, Some(v)) => {
                    out.push(1);
                    out.extend_from_slice(v.as_bytes());
                }
                (Variant::Optimal, None) => {
                    out.push(0);
                    out.resize(out.len() + width, 0);
                }
            }
        }
        out
    }

    /// Parses a saved state for values of `width` octets.
    pub fn restore(bytes: &[u8], width: usize) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Decode("truncated header".into()));
        }
        let variant = Variant::from_code(bytes[0])?;
        let k = u32::from(bytes[1]);
        if k > MAX_INPLACE_ORDER {
            return Err(Error::Decode(format!("order {k} too large")));
        }
        let round = u64::from(u32::from_be_bytes(bytes[2..6].try_into().unwrap()));
        if round < 1u64 << k || round > 1u64 << (k + 1) {
            return Err(Error::Decode(format!(
                "round {round} outside the output stage of P_{k}"
            )));
        }
        let expected = Self::encoded_len(variant, k, width);
        if bytes.len() != expected {
            return Err(Error::Decode(format!(
                "expected {expected} octets, got {}",
                bytes.len()
            )));
        }
        let mut z = Vec::with_capacity(k as usize + 1);
        let mut body = &bytes[HEADER_LEN..];
        for _ in 0..=k {
            let present = match variant {
                Variant::Speed2 => true,
                Variant::Optimal => {
                    let flag = body[0];
                    body = &body[1..];
                    match flag {
                        0 => false,
                        1 => true,
                        other => return Err(Error::Decode(format!("bad presence flag {other}"))),
                    }
                }
            };
            let (value, rest) = body.split_at(width);
            body = rest;
            z.push(present.then(|| Value::from_bytes(value.to_vec())));
        }
        let state = InPlaceState {
            variant,
            k,
            round,
            z,
            width,
        };
        if variant == Variant::Optimal {
            let occupancy: Vec<bool> = state.z.iter().map(Option::is_some).collect();
            if occupancy != optimal_occupancy(k, round) {
                return Err(Error::Decode(format!(
                    "slot occupancy does not match round {round}"
                )));
            }
        }
        Ok(state)
    }
}

/// Slots an optimal in-place pebbler of order `k` holds at the start of
/// round `r`, `2^k <= r <= 2^{k+1}`.
pub fn optimal_occupancy(k: u32, r: u64) -> Vec<bool> {
    let mut used = vec![false; k as usize + 1];
    let c = (1u64 << (k + 1)) - r;
    if c == 1u64 << k {
        used.fill(true);
        return used;
    }
    if c == 0 {
        return used;
    }
    for p in decode_states(k, c).expect("counter in range") {
        let done = optimal_prefix(p.index, p.local_round());
        let (fill, _) = fill_position(p.index, done);
        for slot in &mut used[fill as usize..=p.index as usize] {
            *slot = true;
        }
    }
    used
}

/// Working slot and remaining gap of an order-`i` pebbler after `done`
/// initial-stage hashes.
fn fill_position(i: u32, done: u64) -> (u32, u64) {
    let remaining = (1u64 << i) - done;
    let fill = bitlen(remaining) - 1;
    (fill, remaining - (1u64 << fill))
}

/// An in-place pebbler: a one-way function plus an [`InPlaceState`].
#[derive(Debug, Clone)]
pub struct InPlacePebbler {
    owf: Owf,
    state: InPlaceState,
    peak_occupied: usize,
}

impl InPlacePebbler {
    /// Runs the initial stage of `P_k(seed)` and stops at round `2^k`, with
    /// `y_j = f^{2^k - 2^j}(seed)` in `z[j]`.
    pub fn new(owf: Owf, variant: Variant, k: u32, seed: Value) -> Result<Self> {
        if k > MAX_INPLACE_ORDER {
            return Err(Error::InvalidInput(format!(
                "in-place order {k} exceeds {MAX_INPLACE_ORDER}"
            )));
        }
        owf.check_width(&seed)?;
        let width = seed.width();
        let mut z = vec![None; k as usize + 1];
        z[k as usize] = Some(seed);
        let mut fill = k;
        let mut gap = 0;
        let family = variant.family();
        for r in 1..(1u64 << k) {
            for _ in 0..family.hashes(k, r) {
                extend_working_slot(&owf, &mut z, &mut fill, &mut gap);
            }
        }
        let state = InPlaceState {
            variant,
            k,
            round: 1u64 << k,
            z,
            width,
        };
        let peak_occupied = state.occupied();
        Ok(InPlacePebbler {
            owf,
            state,
            peak_occupied,
        })
    }

    pub fn speed2(owf: Owf, k: u32, seed: Value) -> Result<Self> {
        Self::new(owf, Variant::Speed2, k, seed)
    }

    pub fn optimal(owf: Owf, k: u32, seed: Value) -> Result<Self> {
        Self::new(owf, Variant::Optimal, k, seed)
    }

    pub fn state(&self) -> &InPlaceState {
        &self.state
    }

    pub fn save(&self) -> Vec<u8> {
        self.state.save()
    }

    pub fn restore(owf: Owf, bytes: &[u8]) -> Result<Self> {
        let state = InPlaceState::restore(bytes, owf.width())?;
        let peak_occupied = state.occupied();
        Ok(InPlacePebbler {
            owf,
            state,
            peak_occupied,
        })
    }

    /// Most slots simultaneously occupied so far, including instants inside
    /// a round. Instrumentation only; not part of the state.
    pub fn peak_occupied(&self) -> usize {
        self.peak_occupied
    }

    fn countdown(&self) -> u64 {
        (1u64 << (self.state.k + 1)) - self.state.round
    }

    /// One output round of the speed-2 pebbler, transcribed line by line.
    fn step_speed2(&mut self) -> Result<(Value, u64)> {
        let c = self.countdown();
        let owf = &self.owf;
        let z = &mut self.state.z;
        let get = |z: &[Option<Value>], idx: usize| z[idx].clone().expect("speed-2 slot");
        let mut hashes = 0;

        let output = get(z, 0);
        let (zeros, mut c) = eat0(c)?;
        let mut i = zeros as usize;
        for s in 0..i {
            z[s] = z[s + 1].clone();
        }
        i += 1;
        c /= 2;
        let mut q = i - 1;
        while c != 0 {
            z[q] = Some(owf.hash(&get(z, i)));
            hashes += 1;
            if q != 0 {
                z[q] = Some(owf.hash(&get(z, q)));
                hashes += 1;
            }
            let (zeros, rest) = eat0(c)?;
            let (ones, rest) = eat1(rest);
            c = rest;
            i += (zeros + ones) as usize;
            q = i;
        }
        Ok((output, hashes))
    }

    /// One output round of the optimal pebbler.
    fn step_optimal(&mut self) -> Result<(Value, u64)> {
        let k = self.state.k;
        let c = self.countdown();
        let z = &mut self.state.z;

        let first = c.trailing_zeros() as usize;
        let output = z[0].take().expect("first-output pebbler holds y_0 in z[0]");
        for s in 0..first {
            z[s] = z[s + 1].take();
        }

        let mut hashes = 0;
        if c < 1u64 << k {
            for (i, budget) in segment_budgets(k, c)? {
                let local_counter = c & ((1u64 << (i + 1)) - 1);
                let rho = (1u64 << (i + 1)) - local_counter;
                let t = budget.round_with_parity((u64::from(i) + rho) % 2) as u64;
                let (mut fill, mut gap) = fill_position(i, optimal_prefix(i, rho));
                for _ in 0..t {
                    extend_working_slot(&self.owf, z, &mut fill, &mut gap);
                    let occupied = z.iter().filter(|s| s.is_some()).count();
                    self.peak_occupied = self.peak_occupied.max(occupied);
                }
                hashes += t;
            }
        }
        Ok((output, hashes))
    }
}

// One hash in the slot discipline shared by every pebbler: hash the working
// slot and, once it is pinned, continue in the next slot down.
fn extend_working_slot(owf: &Owf, z: &mut [Option<Value>], fill: &mut u32, gap: &mut u64) {
    let next = owf.hash(
        z[*fill as usize]
            .as_ref()
            .expect("working slot is populated"),
    );
    if *gap == 0 {
        *fill -= 1;
        *gap = 1u64 << *fill;
        assert!(
            z[*fill as usize].is_none(),
            "slot z[{}] is still in use",
            *fill
        );
    }
    z[*fill as usize] = Some(next);
    *gap -= 1;
}

impl Pebbler for InPlacePebbler {
    fn order(&self) -> u32 {
        self.state.k
    }

    fn next_round(&self) -> u64 {
        self.state.round
    }

    fn step(&mut self) -> Result<RoundResult> {
        if self.is_exhausted() {
            return Err(Error::Exhausted {
                rounds: (1u64 << (self.state.k + 1)) - 1,
            });
        }
        let round = self.state.round;
        let (output, hashes) = match self.state.variant {
            Variant::Speed2 => self.step_speed2()?,
            Variant::Optimal => self.step_optimal()?,
        };
        self.state.round += 1;
        Ok(RoundResult {
            round,
            hashes,
            output: Some(output),
        })
    }

    fn head(&self) -> Option<&Value> {
        if self.is_exhausted() {
            None
        } else {
            self.state.z[0].as_ref()
        }
    }
}

/// Per-round hash counts an in-place pebbler should produce over rounds
/// `2^k..2^{k+1}`: a zero for the first output round, then `W_k`.
pub fn expected_output_work(variant: Variant, k: u32) -> Vec<u64> {
    let mut w = vec![0];
    w.extend(crate::schedule::work_sequence(variant.family(), k).w);
    w
}

/// Total hashes spent by the initial stage, `2^k - 1` for every schedule.
pub fn initial_stage_hashes(variant: Variant, k: u32) -> u64 {
    make_schedule(variant.family(), k).sum()
}
