//! The recursive round-driven binary pebbler.
//!
//! A pebbler `P_k(x)` lives for `2^{k+1} - 1` rounds. In rounds
//! `1..2^k` it walks from `x` to `f^{2^k-1}(x)`, doing `t_{k,r}` hashes in
//! round `r` and pinning `y_i = f^{2^k - 2^i}(x)` along the way. In round
//! `2^k` it outputs `y_0` for free; afterwards it hands `y_i` to a child
//! `P_{i-1}` for `i = 1..k` and steps all children once per round. Exactly
//! one child outputs in each of those rounds, so the whole pebbler emits
//! the chain `x, f(x), ..., f^{2^k-1}(x)` backwards in its last `2^k`
//! rounds.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::owf::{Owf, Value};
use crate::schedule::Family;

/// Largest order a pebbler accepts; round numbers stay within `u64`.
pub const MAX_ORDER: u32 = 62;

/// Outcome of a single round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundResult {
    pub round: u64,
    pub hashes: u64,
    pub output: Option<Value>,
}

/// Common surface of every round-driven chain reverser.
pub trait Pebbler {
    /// Order `k`; the chain has `2^k` elements.
    fn order(&self) -> u32;

    /// The round the next call to [`Pebbler::step`] executes.
    fn next_round(&self) -> u64;

    /// Runs one round.
    fn step(&mut self) -> Result<RoundResult>;

    /// The value the next output round will emit, when it is already stored.
    fn head(&self) -> Option<&Value>;

    fn is_exhausted(&self) -> bool {
        self.next_round() >= 1u64 << (self.order() + 1)
    }

    /// Streams the remaining outputs, one per output round.
    fn outputs(self) -> Outputs<Self>
    where
        Self: Sized,
    {
        Outputs(self)
    }
}

/// Iterator over the outputs of a pebbler.
#[derive(Debug)]
pub struct Outputs<P>(P);

impl<P: Pebbler> Iterator for Outputs<P> {
    type Item = Value;

    fn next(&mut self) -> Option<Value> {
        while !self.0.is_exhausted() {
            if let Some(v) = self.0.step().ok()?.output {
                return Some(v);
            }
        }
        None
    }
}

/// Order in which children are stepped within a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChildOrder {
    /// `P_{k-1}` first.
    #[default]
    Descending,
    Ascending,
}

/// Framework pebbler `P_k(x)` for any schedule family.
#[derive(Debug)]
pub struct FrameworkPebbler {
    owf: Owf,
    family: Family,
    k: u32,
    round: u64,
    /// `y_0..=y_k`; a slot is `None` before it is first written and after
    /// it has been output or handed to a child.
    slots: Vec<Option<Value>>,
    fill: u32,
    gap: u64,
    children: Vec<FrameworkPebbler>,
    child_order: ChildOrder,
}

impl FrameworkPebbler {
    pub fn new(owf: Owf, family: Family, k: u32, seed: Value) -> Result<Self> {
        Self::with_child_order(owf, family, k, seed, ChildOrder::Descending)
    }

    pub fn with_child_order(
        owf: Owf,
        family: Family,
        k: u32,
        seed: Value,
        child_order: ChildOrder,
    ) -> Result<Self> {
        if k > MAX_ORDER {
            return Err(Error::InvalidInput(format!(
                "order {k} exceeds the maximum of {MAX_ORDER}"
            )));
        }
        owf.check_width(&seed)?;
        Ok(Self::unchecked(owf, family, k, seed, child_order))
    }

    fn unchecked(owf: Owf, family: Family, k: u32, seed: Value, child_order: ChildOrder) -> Self {
        let mut slots = vec![None; k as usize + 1];
        slots[k as usize] = Some(seed);
        FrameworkPebbler {
            owf,
            family,
            k,
            round: 1,
            slots,
            fill: k,
            gap: 0,
            children: Vec::new(),
            child_order,
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Total number of rounds, `2^{k+1} - 1`.
    pub fn lifetime(&self) -> u64 {
        (1u64 << (self.k + 1)) - 1
    }

    /// Stored values across the whole pebbler tree at the start of the next
    /// round.
    ///
    /// A slot being filled counts once, a slot handed to a child counts only
    /// in the child, and an output value is freed as soon as it is emitted.
    pub fn storage(&self) -> usize {
        if self.round <= 1u64 << self.k {
            self.slots.iter().filter(|s| s.is_some()).count()
        } else {
            self.children.iter().map(FrameworkPebbler::storage).sum()
        }
    }

    /// `(order, next local round)` of every live pebbler that is not
    /// redundant, i.e. that has not yet passed its first output round.
    pub fn live_leaves(&self) -> Vec<(u32, u64)> {
        if self.is_exhausted() {
            Vec::new()
        } else if self.round <= 1u64 << self.k {
            vec![(self.k, self.round)]
        } else {
            self.children
                .iter()
                .flat_map(FrameworkPebbler::live_leaves)
                .collect()
        }
    }

    // One hash of the initial stage: extend the working slot, moving down to
    // a fresh slot once the current one is pinned.
    fn hash_once(&mut self) {
        let next = {
            let src = self.slots[self.fill as usize]
                .as_ref()
                .expect("working slot is populated");
            self.owf.hash(src)
        };
        if self.gap == 0 {
            assert!(self.fill > 0, "schedule exceeds 2^k - 1 hashes");
            self.fill -= 1;
            self.gap = 1u64 << self.fill;
        }
        self.slots[self.fill as usize] = Some(next);
        self.gap -= 1;
    }

    fn spawn_children(&mut self) {
        let mut orders: Vec<u32> = (1..=self.k).collect();
        if self.child_order == ChildOrder::Descending {
            orders.reverse();
        }
        self.children = orders
            .into_iter()
            .map(|i| {
                let seed = self.slots[i as usize].take().expect("y_i pinned");
                FrameworkPebbler::unchecked(
                    self.owf.clone(),
                    self.family,
                    i - 1,
                    seed,
                    self.child_order,
                )
            })
            .collect();
    }
}

impl Pebbler for FrameworkPebbler {
    fn order(&self) -> u32 {
        self.k
    }

    fn next_round(&self) -> u64 {
        self.round
    }

    fn step(&mut self) -> Result<RoundResult> {
        let r = self.round;
        if r > self.lifetime() {
            return Err(Error::Exhausted {
                rounds: self.lifetime(),
            });
        }
        let n = 1u64 << self.k;
        let (hashes, output) = if r < n {
            let t = self.family.hashes(self.k, r);
            for _ in 0..t {
                self.hash_once();
            }
            (t, None)
        } else if r == n {
            let out = self.slots[0].take();
            debug_assert!(out.is_some());
            self.spawn_children();
            (0, out)
        } else {
            let mut hashes = 0;
            let mut output = None;
            for child in &mut self.children {
                let res = child.step()?;
                hashes += res.hashes;
                if let Some(v) = res.output {
                    assert!(output.is_none(), "two children output in round {r}");
                    output = Some(v);
                }
            }
            self.children.retain(|c| !c.is_exhausted());
            (hashes, output)
        };
        self.round += 1;
        Ok(RoundResult {
            round: r,
            hashes,
            output,
        })
    }

    fn head(&self) -> Option<&Value> {
        let n = 1u64 << self.k;
        if self.round == n {
            self.slots[0].as_ref()
        } else if self.round > n {
            self.children.iter().find_map(|c| c.head())
        } else {
            None
        }
    }
}

/// Runs `P_k(seed)` to completion and collects its outputs.
pub fn run_outputs(owf: &Owf, family: Family, k: u32, seed: &Value) -> Result<Vec<Value>> {
    let p = FrameworkPebbler::new(owf.clone(), family, k, seed.clone())?;
    Ok(p.outputs().collect())
}

/// Naive reversal: materializes `x_i = f^i(seed)` for `i < 2^k` and
/// returns them last-first. Test oracle only.
pub fn reverse_oracle(owf: &Owf, k: u32, seed: &Value) -> Result<Vec<Value>> {
    owf.check_width(seed)?;
    let n = 1usize << k;
    let mut chain = Vec::with_capacity(n);
    chain.push(seed.clone());
    for i in 1..n {
        let next = owf.hash(&chain[i - 1]);
        chain.push(next);
    }
    chain.reverse();
    Ok(chain)
}

/// One row of a trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceRow {
    pub round: u64,
    pub hashes: u64,
    /// Stored values at the start of the round.
    pub storage: usize,
    pub output: Option<Value>,
}

/// Per-round instrumentation of a full pebbler run.
#[derive(Debug, Clone)]
pub struct Trace {
    pub k: u32,
    pub family: Family,
    pub rows: Vec<TraceRow>,
}

impl Trace {
    /// Hash counts of the last `2^k - 1` rounds.
    pub fn work(&self) -> Vec<u64> {
        let skip = 1usize << self.k;
        self.rows.iter().skip(skip).map(|r| r.hashes).collect()
    }

    pub fn storage(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.storage).collect()
    }

    pub fn max_storage(&self) -> usize {
        self.rows.iter().map(|r| r.storage).max().unwrap_or(0)
    }

    pub fn total_hashes(&self) -> u64 {
        self.rows.iter().map(|r| r.hashes).sum()
    }

    pub fn outputs(&self) -> Vec<Value> {
        self.rows.iter().filter_map(|r| r.output.clone()).collect()
    }

    /// CSV with header `round,hashes,storage,output`; absent outputs are
    /// empty fields.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// One JSON object per line with the same fields as the CSV.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for row in &self.rows {
            serde_json::to_writer(&mut out, row)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Runs `P_k(seed)` and records hashes, storage and output per round.
pub fn run_trace(owf: &Owf, family: Family, k: u32, seed: &Value) -> Result<Trace> {
    let mut p = FrameworkPebbler::new(owf.clone(), family, k, seed.clone())?;
    let mut rows = Vec::with_capacity(p.lifetime() as usize);
    while !p.is_exhausted() {
        let storage = p.storage();
        let res = p.step()?;
        rows.push(TraceRow {
            round: res.round,
            hashes: res.hashes,
            storage,
            output: res.output,
        });
    }
    Ok(Trace { k, family, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::work_sequence;

    fn mix() -> Owf {
        Owf::builtin("testmix64").unwrap()
    }

    #[test]
    fn order_zero_outputs_seed_in_one_round() {
        let owf = mix();
        let seed = owf.default_seed();
        let mut p = FrameworkPebbler::new(owf, Family::Optimal, 0, seed.clone()).unwrap();
        assert_eq!(p.lifetime(), 1);
        assert_eq!(p.storage(), 1);
        let res = p.step().unwrap();
        assert_eq!(res.output, Some(seed));
        assert_eq!(res.hashes, 0);
        assert!(p.is_exhausted());
    }

    #[test]
    fn order_one_runs_three_rounds() {
        let owf = mix();
        let seed = owf.default_seed();
        for family in Family::ALL {
            let mut p = FrameworkPebbler::new(owf.clone(), family, 1, seed.clone()).unwrap();
            let r1 = p.step().unwrap();
            assert_eq!((r1.hashes, r1.output), (1, None));
            let r2 = p.step().unwrap();
            assert_eq!(r2.output, Some(owf.evaluate(&seed).unwrap()));
            assert_eq!(r2.hashes, 0);
            let r3 = p.step().unwrap();
            assert_eq!(r3.output, Some(seed.clone()));
            assert!(p.is_exhausted());
        }
    }

    #[test]
    fn stepping_past_the_end_is_an_error() {
        let owf = mix();
        let seed = owf.default_seed();
        let mut p = FrameworkPebbler::new(owf, Family::Speed2, 2, seed).unwrap();
        for _ in 0..7 {
            p.step().unwrap();
        }
        assert!(matches!(p.step(), Err(Error::Exhausted { rounds: 7 })));
    }

    #[test]
    fn seed_width_is_checked() {
        let r = FrameworkPebbler::new(mix(), Family::Speed1, 3, Value::zero(16));
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn first_output_round_is_free_and_ends_the_chain() {
        let owf = mix();
        let seed = owf.default_seed();
        for family in Family::ALL {
            for k in 1..=6 {
                let mut p = FrameworkPebbler::new(owf.clone(), family, k, seed.clone()).unwrap();
                while p.next_round() < 1 << k {
                    p.step().unwrap();
                }
                let res = p.step().unwrap();
                assert_eq!(res.hashes, 0);
                assert_eq!(
                    res.output.unwrap(),
                    owf.iterate(&seed, (1 << k) - 1).unwrap()
                );
            }
        }
    }

    #[test]
    fn k2_all_families_match_oracle() {
        let owf = mix();
        let seed = owf.default_seed();
        let expected = reverse_oracle(&owf, 2, &seed).unwrap();
        assert_eq!(expected[0], owf.iterate(&seed, 3).unwrap());
        for family in Family::ALL {
            assert_eq!(run_outputs(&owf, family, 2, &seed).unwrap(), expected);
        }
    }

    #[test]
    fn oracle_order_zero() {
        let owf = mix();
        let seed = owf.default_seed();
        assert_eq!(reverse_oracle(&owf, 0, &seed).unwrap(), vec![seed.clone()]);
        assert_eq!(
            run_outputs(&owf, Family::Rushing, 0, &seed).unwrap(),
            vec![seed]
        );
    }

    #[test]
    fn speed2_round_21_does_three_hashes() {
        let owf = mix();
        let trace = run_trace(&owf, Family::Speed2, 4, &owf.default_seed()).unwrap();
        assert_eq!(trace.rows[20].round, 21);
        assert_eq!(trace.rows[20].hashes, 3);
    }

    #[test]
    fn rushing_round_23_does_seven_hashes() {
        let owf = mix();
        let trace = run_trace(&owf, Family::Rushing, 4, &owf.default_seed()).unwrap();
        assert_eq!(trace.rows[22].hashes, 7);
    }

    #[test]
    fn optimal_k4_trace() {
        let owf = mix();
        let trace = run_trace(&owf, Family::Optimal, 4, &owf.default_seed()).unwrap();
        assert_eq!(trace.rows[15].storage, 5);
        assert_eq!(trace.work(), work_sequence(Family::Optimal, 4).w);
    }

    #[test]
    fn storage_maxima_k4() {
        let owf = mix();
        let seed = owf.default_seed();
        let max = |f| run_trace(&owf, f, 4, &seed).unwrap().max_storage();
        assert_eq!(max(Family::Speed1), 6);
        assert_eq!(max(Family::Speed2), 5);
        assert_eq!(max(Family::Optimal), 5);
        assert_eq!(max(Family::Rushing), 5);
    }

    #[test]
    fn head_predicts_next_output() {
        let owf = mix();
        let seed = owf.default_seed();
        let mut p = FrameworkPebbler::new(owf, Family::Optimal, 5, seed).unwrap();
        while !p.is_exhausted() {
            let predicted = p.head().cloned();
            let res = p.step().unwrap();
            if res.round >= 32 {
                assert_eq!(predicted, res.output);
            } else {
                assert!(predicted.is_none());
            }
        }
    }

    #[test]
    fn csv_and_jsonl_layout() {
        let owf = mix();
        let trace = run_trace(&owf, Family::Speed1, 1, &owf.default_seed()).unwrap();
        let mut csv = Vec::new();
        trace.write_csv(&mut csv).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "round,hashes,storage,output");
        assert_eq!(lines[1], "1,1,1,");
        assert!(lines[2].starts_with("2,0,2,"));
        assert_eq!(lines.len(), 4);

        let mut jsonl = Vec::new();
        trace.write_jsonl(&mut jsonl).unwrap();
        let jsonl = String::from_utf8(jsonl).unwrap();
        let first: serde_json::Value = serde_json::from_str(jsonl.lines().next().unwrap()).unwrap();
        assert_eq!(first["round"], 1);
        assert!(first["output"].is_null());
    }
}
