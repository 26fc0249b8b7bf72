use proptest::prelude::*;

use pebbling::pebbler::{
    reverse_oracle, run_outputs, run_trace, ChildOrder, FrameworkPebbler, Pebbler,
};
use pebbling::schedule::{work_sequence, Family};
use pebbling::{Owf, Value};

fn md5() -> Owf {
    Owf::builtin("md5").unwrap()
}

fn mix() -> Owf {
    Owf::builtin("testmix64").unwrap()
}

#[test]
fn reversal_against_oracle() {
    for owf in [md5(), mix()] {
        let seed = owf.default_seed();
        for k in 0..=12 {
            let expected = reverse_oracle(&owf, k, &seed).unwrap();
            for family in Family::ALL {
                assert_eq!(
                    run_outputs(&owf, family, k, &seed).unwrap(),
                    expected,
                    "{} {family} k={k}",
                    owf.name()
                );
            }
        }
    }
}

#[test]
fn reversal_over_all_one_octet_seeds() {
    let owf = mix();
    for b in 0..=255u8 {
        let mut bytes = [0u8; 8];
        bytes[7] = b;
        let seed = Value::from_bytes(bytes.to_vec());
        for k in 0..=6 {
            let expected = reverse_oracle(&owf, k, &seed).unwrap();
            for family in Family::ALL {
                assert_eq!(run_outputs(&owf, family, k, &seed).unwrap(), expected);
            }
        }
    }
}

#[test]
fn md5_reference_stream() {
    let owf = md5();
    let seed = owf.default_seed();
    assert_eq!(seed.to_hex(), "d41d8cd98f00b204e9800998ecf8427e");
    let outputs = run_outputs(&owf, Family::Optimal, 4, &seed).unwrap();
    assert_eq!(outputs.len(), 16);
    assert_eq!(outputs[0].to_hex(), "7de26f6db0f961cb3c1dbf4047e19fbc");
    assert_eq!(outputs[15], seed);
    assert_eq!(
        owf.evaluate(&outputs[0]).unwrap().to_hex(),
        "462dfa0f17355e1fc35c795ec9f3267a"
    );
    let outputs = run_outputs(&owf, Family::Optimal, 8, &seed).unwrap();
    assert_eq!(outputs[0].to_hex(), "7cbef335a4207b9d5a7d18fc418539eb");
}

#[test]
fn one_output_per_output_round() {
    let owf = mix();
    for family in Family::ALL {
        for k in 0..=8 {
            let trace = run_trace(&owf, family, k, &owf.default_seed()).unwrap();
            assert_eq!(trace.rows.len() as u64, (1u64 << (k + 1)) - 1);
            for row in &trace.rows {
                assert_eq!(
                    row.output.is_some(),
                    row.round >= 1u64 << k,
                    "round {}",
                    row.round
                );
            }
        }
    }
}

#[test]
fn trace_work_matches_recurrence() {
    let owf = mix();
    for family in Family::ALL {
        for k in 0..=12 {
            let trace = run_trace(&owf, family, k, &owf.default_seed()).unwrap();
            let n = 1usize << k;
            assert_eq!(trace.work(), work_sequence(family, k).w, "{family} k={k}");
            assert_eq!(trace.rows[n - 1].hashes, 0);
        }
    }
}

#[test]
fn rushing_total_hashes() {
    let owf = mix();
    for k in 1..=12u32 {
        let trace = run_trace(&owf, Family::Rushing, k, &owf.default_seed()).unwrap();
        let n = 1u64 << k;
        assert_eq!(trace.total_hashes(), u64::from(k) * (n / 2), "k={k}");
    }
}

#[test]
fn storage_endpoints() {
    let owf = mix();
    for family in Family::ALL {
        for k in 0..=12u32 {
            let s = run_trace(&owf, family, k, &owf.default_seed())
                .unwrap()
                .storage();
            assert_eq!(s[0], 1, "{family} k={k}");
            assert_eq!(s[(1usize << k) - 1], k as usize + 1, "{family} k={k}");
        }
    }
}

#[test]
fn storage_maxima() {
    let owf = mix();
    for k in 1..=12usize {
        let max = |family| {
            run_trace(&owf, family, k as u32, &owf.default_seed())
                .unwrap()
                .max_storage()
        };
        assert_eq!(max(Family::Speed1), (k + 1).max(2 * k - 2), "k={k}");
        assert_eq!(max(Family::Speed2), k + 1, "k={k}");
        assert_eq!(max(Family::Optimal), k + 1, "k={k}");
    }
}

#[test]
fn order_four_storage() {
    let owf = md5();
    let storage = |family| {
        run_trace(&owf, family, 4, &owf.default_seed())
            .unwrap()
            .storage()
    };
    let mut rushing = vec![1; 15];
    rushing.extend([5, 4, 4, 3, 4, 3, 3, 2, 4, 3, 3, 2, 3, 2, 2, 1]);
    assert_eq!(storage(Family::Rushing), rushing);

    let mut speed1 = vec![1];
    speed1.extend([2; 8]);
    speed1.extend([3; 4]);
    speed1.extend([4, 4, 5, 4, 6, 5, 5, 4, 5, 4, 4, 3, 4, 3, 3, 2, 2, 1]);
    assert_eq!(storage(Family::Speed1), speed1);

    let mut speed2 = vec![1; 8];
    speed2.extend([2; 4]);
    speed2.extend([3, 3, 4, 5]);
    speed2.extend([4; 8]);
    speed2.extend([3; 4]);
    speed2.extend([2, 2, 1]);
    assert_eq!(storage(Family::Speed2), speed2);

    let mut optimal = vec![1; 8];
    optimal.extend([2; 5]);
    optimal.extend([3, 3, 5]);
    optimal.extend([4; 8]);
    optimal.extend([3; 4]);
    optimal.extend([2, 2, 1]);
    assert_eq!(storage(Family::Optimal), optimal);
}

fn family_strategy() -> impl Strategy<Value = Family> {
    prop::sample::select(Family::ALL.to_vec())
}

fn seed_strategy() -> impl Strategy<Value = Value> {
    any::<[u8; 8]>().prop_map(|b| Value::from_bytes(b.to_vec()))
}

fn rounds(mut p: FrameworkPebbler) -> Vec<(u64, Option<Value>)> {
    let mut out = Vec::new();
    while !p.is_exhausted() {
        let r = p.step().unwrap();
        out.push((r.hashes, r.output));
    }
    out
}

proptest! {
    #[test]
    fn random_seeds_reverse(family in family_strategy(), k in 0u32..=9, seed in seed_strategy()) {
        let owf = mix();
        prop_assert_eq!(
            run_outputs(&owf, family, k, &seed).unwrap(),
            reverse_oracle(&owf, k, &seed).unwrap()
        );
    }

    #[test]
    fn child_order_is_irrelevant(family in family_strategy(), k in 0u32..=9, seed in seed_strategy()) {
        let owf = mix();
        let desc = FrameworkPebbler::with_child_order(
            owf.clone(), family, k, seed.clone(), ChildOrder::Descending).unwrap();
        let asc = FrameworkPebbler::with_child_order(
            owf, family, k, seed, ChildOrder::Ascending).unwrap();
        prop_assert_eq!(rounds(desc), rounds(asc));
    }
}
