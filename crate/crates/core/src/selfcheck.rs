//! Property suites behind `pebble verify`.
//!
//! Each check recomputes a quantity two independent ways and compares. A
//! [`Fault`] corrupts one side before the comparison, which must then fail.

use crate::error::Result;
use crate::inplace::{decode_states, segment_budgets, InPlacePebbler, Phase, Variant};
use crate::owf::{Owf, Value};
use crate::pebbler::{reverse_oracle, run_outputs, FrameworkPebbler, Pebbler};
use crate::schedule::{
    key_equation_holds, make_schedule, parity_round, unrounded_optimal, unrounded_optimal_explicit,
    unrounded_schedule, work_sequence, Family,
};

/// A deliberately seeded defect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    /// Adds one hash to the last round of every schedule under test.
    ScheduleOffByOne,
    /// Flips a bit of the last output of every stream under test.
    CorruptOutput,
}

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &'static str, failure: Option<String>) -> Self {
        CheckResult {
            name,
            passed: failure.is_none(),
            detail: failure.unwrap_or_default(),
        }
    }
}

fn schedule_under_test(family: Family, k: u32, fault: Fault) -> Vec<u64> {
    let mut t = make_schedule(family, k).t;
    if fault == Fault::ScheduleOffByOne {
        if let Some(last) = t.last_mut() {
            *last += 1;
        }
    }
    t
}

fn stream_under_test(mut outputs: Vec<Value>, fault: Fault) -> Vec<Value> {
    if fault == Fault::CorruptOutput {
        if let Some(last) = outputs.last_mut() {
            *last = last.with_bit_flipped(0);
        }
    }
    outputs
}

fn first_failure(mut checks: impl Iterator<Item = Result<Option<String>>>) -> Option<String> {
    checks.find_map(|r| match r {
        Ok(None) => None,
        Ok(Some(msg)) => Some(msg),
        Err(e) => Some(e.to_string()),
    })
}

fn oracle_reversal(owf: &Owf, seed: &Value, k_max: u32, fault: Fault) -> Option<String> {
    first_failure((0..=k_max).flat_map(|k| {
        Family::ALL.into_iter().map(move |family| {
            let got = stream_under_test(run_outputs(owf, family, k, seed)?, fault);
            Ok((got != reverse_oracle(owf, k, seed)?).then(|| format!("{family} k={k}")))
        })
    }))
}

fn schedule_sums(k_max: u32, fault: Fault) -> Option<String> {
    first_failure((0..=k_max).flat_map(|k| {
        Family::ALL.into_iter().map(move |family| {
            let sum: u64 = schedule_under_test(family, k, fault).iter().sum();
            Ok((sum != (1u64 << k) - 1).then(|| format!("{family} k={k}: sum {sum}")))
        })
    }))
}

fn key_equation(k_max: u32) -> Option<String> {
    first_failure((2..=k_max).map(|k| Ok((!key_equation_holds(k)?).then(|| format!("k={k}")))))
}

fn parity_rounding(k_max: u32, fault: Fault) -> Option<String> {
    first_failure((2..=k_max).map(|k| {
        let unrounded = unrounded_optimal(k)?;
        if unrounded != unrounded_optimal_explicit(k) {
            return Ok(Some(format!("k={k}: recursive and explicit differ")));
        }
        let rounded = parity_round(&unrounded, k).t;
        let closed = schedule_under_test(Family::Optimal, k, fault);
        Ok((rounded != closed).then(|| format!("k={k}")))
    }))
}

fn work_bounds(k_max: u32) -> Option<String> {
    first_failure((1..=k_max).flat_map(|k| {
        Family::ALL.into_iter().map(move |family| {
            let max = work_sequence(family, k).max();
            let expected = match family {
                Family::Rushing => (1u64 << (k - 1)) - 1,
                Family::Speed1 | Family::Speed2 => u64::from(k) - 1,
                Family::Optimal if k >= 2 => u64::from(k).div_ceil(2),
                Family::Optimal => 0,
            };
            Ok((max != expected).then(|| format!("{family} k={k}: max {max}")))
        })
    }))
}

fn inplace_equivalence(owf: &Owf, seed: &Value, k_max: u32, fault: Fault) -> Option<String> {
    first_failure((0..=k_max).flat_map(|k| {
        [Variant::Speed2, Variant::Optimal]
            .into_iter()
            .map(move |variant| {
                let mut framework =
                    FrameworkPebbler::new(owf.clone(), variant.family(), k, seed.clone())?;
                while framework.next_round() < 1u64 << k {
                    framework.step()?;
                }
                let mut inplace = InPlacePebbler::new(owf.clone(), variant, k, seed.clone())?;
                let (mut want, mut got) = (Vec::new(), Vec::new());
                while !framework.is_exhausted() {
                    let a = framework.step()?;
                    let b = inplace.step()?;
                    if a.hashes != b.hashes {
                        return Ok(Some(format!(
                            "{variant:?} k={k}: round {} does {} hashes, expected {}",
                            a.round, b.hashes, a.hashes
                        )));
                    }
                    want.extend(a.output);
                    got.extend(b.output);
                }
                let got = stream_under_test(got, fault);
                Ok((got != want).then(|| format!("{variant:?} k={k}: outputs differ")))
            })
    }))
}

fn expected_phase(index: u32, local_round: u64) -> Phase {
    if local_round == 1u64 << index {
        Phase::FirstOutput
    } else if index >= 1 && local_round < 1u64 << (index - 1) {
        Phase::Idle
    } else {
        Phase::Hashing
    }
}

fn decode_consistent(owf: &Owf, seed: &Value, k_max: u32) -> Option<String> {
    first_failure((1..=k_max).map(|k| {
        let mut p = FrameworkPebbler::new(owf.clone(), Family::Optimal, k, seed.clone())?;
        while p.next_round() <= 1u64 << k {
            p.step()?;
        }
        while !p.is_exhausted() {
            let c = (1u64 << (k + 1)) - p.next_round();
            let observed: Vec<(u32, u64, Phase)> = p
                .live_leaves()
                .into_iter()
                .map(|(i, rho)| (i, rho, expected_phase(i, rho)))
                .collect();
            let decoded: Vec<(u32, u64, Phase)> = decode_states(k, c)?
                .into_iter()
                .map(|s| (s.index, s.local_round(), s.phase))
                .collect();
            if observed != decoded {
                return Ok(Some(format!("k={k} c={c}")));
            }
            p.step()?;
        }
        Ok(None)
    }))
}

fn budget_schedule(k_max: u32) -> Option<String> {
    first_failure((1..=k_max).flat_map(|k| {
        (1..1u64 << k).map(move |c| {
            for (i, budget) in segment_budgets(k, c)? {
                let rho = (1u64 << (i + 1)) - (c & ((1u64 << (i + 1)) - 1));
                let unrounded = unrounded_schedule(i).0[(rho - 1) as usize];
                if budget != unrounded {
                    return Ok(Some(format!("k={k} c={c} P_{i}: {budget} vs {unrounded}")));
                }
                let rounded = budget.round_with_parity((u64::from(i) + rho) % 2) as u64;
                if rounded != make_schedule(Family::Optimal, i).at(rho) {
                    return Ok(Some(format!("k={k} c={c} P_{i}: rounding")));
                }
            }
            Ok(None)
        })
    }))
}

/// Runs every suite for orders up to `k_max`.
pub fn run_all(owf: &Owf, seed: &Value, k_max: u32, fault: Fault) -> Vec<CheckResult> {
    vec![
        CheckResult::new("oracle-reversal", oracle_reversal(owf, seed, k_max, fault)),
        CheckResult::new("schedule-sums", schedule_sums(k_max, fault)),
        CheckResult::new("key-equation", key_equation(k_max)),
        CheckResult::new("parity-rounding", parity_rounding(k_max, fault)),
        CheckResult::new("work-bounds", work_bounds(k_max)),
        CheckResult::new(
            "inplace-equivalence",
            inplace_equivalence(owf, seed, k_max, fault),
        ),
        CheckResult::new("decode-consistent", decode_consistent(owf, seed, k_max)),
        CheckResult::new("budget-schedule", budget_schedule(k_max)),
    ]
}
