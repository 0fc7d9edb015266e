//! Round-trip and generator properties for the trace format.

use std::collections::BTreeMap;

use memsizer_core::traceio::{
    generate_synthetic, parse_trace, write_trace, SyntheticPattern, SyntheticSpec, Workload,
};
use memsizer_core::units::{InputBytes, MemBytes, GIB, MIB};
use memsizer_core::workflow::{AbstractTaskId, PhysicalTaskSpec, WorkflowDag};
use proptest::prelude::*;

const WORKFLOW_NAMES: [&str; 4] = ["wf1", "wf-α", "w,f", "w\"f\""];

type RawTask = (usize, u64, u64, u64, u64, u8, usize);

fn build_workload(raw: Vec<RawTask>) -> Workload {
    let mut names = BTreeMap::new();
    let tasks: Vec<PhysicalTaskSpec> = raw
        .iter()
        .enumerate()
        .map(|(i, &(abs_idx, input, peak, user, runtime, dep_mask, wf_idx))| {
            let id = format!("t{i}");
            names.insert(id.clone(), WORKFLOW_NAMES[wf_idx % 4].to_owned());
            PhysicalTaskSpec {
                instance_id: id,
                abstract_id: AbstractTaskId::new(["align", "merge", "call"][abs_idx % 3]),
                input_size: InputBytes(input),
                true_peak: MemBytes(peak),
                runtime_ms: runtime.max(1),
                cores: [1, 2, 4][abs_idx % 3],
                user_mem: MemBytes(user),
                depends_on: (0..i)
                    .filter(|j| dep_mask & (1 << j) != 0)
                    .map(|j| format!("t{j}"))
                    .collect(),
            }
        })
        .collect();
    Workload {
        dag: WorkflowDag::from_tasks(tasks).unwrap(),
        workflow_names: names,
    }
}

fn arb_workload() -> impl Strategy<Value = Workload> {
    prop::collection::vec(
        (
            0usize..3,
            1u64..u64::MAX / 2,
            1u64..u64::MAX / 2,
            1u64..u64::MAX / 2,
            1u64..1_000_000,
            any::<u8>(),
            0usize..4,
        ),
        1..8,
    )
    .prop_map(build_workload)
}

fn arb_spec() -> impl Strategy<Value = SyntheticSpec> {
    (
        0usize..4,
        1usize..60,
        0u64..=64 * MIB,
        any::<u64>(),
        0.0f64..=1.0,
    )
        .prop_map(|(pattern_idx, n, sigma, seed, fraction)| {
            let pattern = [
                SyntheticPattern::Linear,
                SyntheticPattern::Bimodal,
                SyntheticPattern::Uncorrelated,
                SyntheticPattern::NoisyWeak,
            ][pattern_idx];
            SyntheticSpec {
                pattern,
                n: if pattern == SyntheticPattern::NoisyWeak {
                    n.max(2)
                } else {
                    n
                },
                // Drown the 64 MiB input range in noise so the weak
                // pattern always finds a qualifying seed.
                slope: 1.0,
                noise_sigma: MemBytes(sigma.max(if pattern == SyntheticPattern::NoisyWeak {
                    512 * MIB
                } else {
                    0
                })),
                cluster_fraction: fraction,
                input_min: InputBytes(MIB),
                input_max: InputBytes(64 * MIB),
                seed,
                ..SyntheticSpec::default()
            }
        })
}

proptest! {
    #[test]
    fn parse_inverts_write(workload in arb_workload()) {
        let bytes = write_trace(&workload);
        let reparsed = parse_trace(&bytes).unwrap();
        prop_assert_eq!(&reparsed, &workload);
        prop_assert_eq!(write_trace(&reparsed), bytes);
    }

    #[test]
    fn generated_workloads_are_valid_and_deterministic(spec in arb_spec()) {
        let w = generate_synthetic(&spec).unwrap();
        prop_assert_eq!(w.dag.len(), spec.n);
        let mut user_mems = Vec::new();
        for t in w.dag.tasks().values() {
            prop_assert!(t.true_peak.as_u64() >= 1);
            prop_assert!(t.runtime_ms >= 1);
            prop_assert!([1, 2, 4].contains(&t.cores));
            prop_assert!(t.depends_on.is_empty());
            prop_assert_eq!(t.user_mem.as_u64() % (256 * MIB), 0);
            user_mems.push(t.user_mem);
        }
        user_mems.dedup();
        prop_assert_eq!(user_mems.len(), 1);
        prop_assert_eq!(&generate_synthetic(&spec).unwrap(), &w);
        let reparsed = parse_trace(&write_trace(&w)).unwrap();
        prop_assert_eq!(&reparsed, &w);
    }

    #[test]
    fn bimodal_low_band_count_matches_fraction(
        n in 10usize..150,
        fraction in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let spec = SyntheticSpec {
            pattern: SyntheticPattern::Bimodal,
            n,
            cluster_fraction: fraction,
            low_center: MemBytes::from_mib(128),
            low_half_width: MemBytes::ZERO,
            intercept: MemBytes(GIB),
            noise_sigma: MemBytes::ZERO,
            seed,
            ..SyntheticSpec::default()
        };
        let w = generate_synthetic(&spec).unwrap();
        let low = w
            .dag
            .tasks()
            .values()
            .filter(|t| t.true_peak == MemBytes::from_mib(128))
            .count();
        prop_assert_eq!(low, ((n as f64) * fraction).round() as usize);
    }
}
