//! What parallelizing a reduction loop WITHOUT reduction semantics does.
//! The execution plans make this failure unrepresentable (there is no racy
//! reduction mode); these tests keep a specimen of the hazard so the
//! contract's reason stays visible. The shared accumulator is an atomic
//! cell updated with separate load and store, i.e. a lost-update race, not
//! UB.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Barrier;

use diffuse_core::exec::{reduce_with_mode, ReductionMode};
use diffuse_core::ExecPlan;

fn load(acc: &AtomicU64) -> f64 {
    f64::from_bits(acc.load(Ordering::Relaxed))
}

fn store(acc: &AtomicU64, v: f64) {
    acc.store(v.to_bits(), Ordering::Relaxed);
}

/// Two workers, both forced to read the accumulator before either writes:
/// one increment is lost deterministically.
#[test]
fn unsynchronized_accumulation_loses_updates_under_adversarial_schedule() {
    let acc = AtomicU64::new(0f64.to_bits());
    let barrier = Barrier::new(2);
    std::thread::scope(|scope| {
        for _ in 0..2 {
            scope.spawn(|| {
                barrier.wait();
                let seen = load(&acc);
                barrier.wait();
                store(&acc, seen + 1.0);
            });
        }
    });
    assert_eq!(load(&acc), 1.0, "exactly one of the two increments must survive");
}

/// A naive threaded sum (read-modify-write per term, no reduction
/// semantics) against the ordered oracle. Retried because losing an update
/// needs an unlucky preemption; the yield in the middle of the
/// read-modify-write makes that near-certain within a few attempts.
#[test]
fn naive_parallel_sum_disagrees_with_ordered_reduction() {
    let n = 20_000usize;
    let term = |k: usize| (k % 97) as f64 + 1.0;
    let plan = ExecPlan::serial();
    let want = reduce_with_mode(&plan, ReductionMode::Ordered, n, term);

    for _attempt in 0..50 {
        let acc = AtomicU64::new(0f64.to_bits());
        let workers = 4;
        std::thread::scope(|scope| {
            for w in 0..workers {
                let acc = &acc;
                scope.spawn(move || {
                    let mut k = w;
                    while k < n {
                        let seen = load(acc);
                        std::thread::yield_now();
                        store(acc, seen + term(k));
                        k += workers;
                    }
                });
            }
        });
        if load(&acc) != want {
            // The race manifested: updates were lost.
            assert!(load(&acc) < want);
            return;
        }
    }
    panic!("racy sum agreed with the ordered oracle 50 times in a row");
}
