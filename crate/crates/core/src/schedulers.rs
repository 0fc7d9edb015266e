//! Ready-queue ordering strategies.
//!
//! A strategy produces a total order over the ready tasks; the simulator
//! then walks that order and places every task that fits (gap filling),
//! so the ordering is the only thing that differs between strategies.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::workflow::{AbstractTaskId, PhysicalTaskSpec};

/// Abstract tasks with fewer finished instances than this are prioritized
/// by the group-sampling strategies.
pub const GS_WARMUP_THRESHOLD: usize = 5;

/// Selectable ordering strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchedulerKind {
    /// Arrival order (FIFO over first-ready time).
    Original,
    /// Longest remaining dependency chain first, larger inputs first.
    Rank,
    /// Fewest finished instances of the abstract task first, smaller inputs first.
    LffMin,
    /// Fewest finished instances first, larger inputs first.
    LffMax,
    /// Under-sampled abstract tasks first (by rank, then smaller input),
    /// the rest in Rank order.
    GsMin,
    /// Under-sampled abstract tasks first (by rank, then larger input),
    /// the rest in Rank order.
    GsMax,
}

impl SchedulerKind {
    pub const ALL: [SchedulerKind; 6] = [
        SchedulerKind::Original,
        SchedulerKind::Rank,
        SchedulerKind::LffMin,
        SchedulerKind::LffMax,
        SchedulerKind::GsMin,
        SchedulerKind::GsMax,
    ];

    pub fn id(self) -> &'static str {
        match self {
            SchedulerKind::Original => "original",
            SchedulerKind::Rank => "rank",
            SchedulerKind::LffMin => "lff-min",
            SchedulerKind::LffMax => "lff-max",
            SchedulerKind::GsMin => "gs-min",
            SchedulerKind::GsMax => "gs-max",
        }
    }
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Clone, Debug, thiserror::Error, PartialEq, Eq)]
#[error("unknown scheduling strategy '{0}'")]
pub struct UnknownStrategy(pub String);

impl FromStr for SchedulerKind {
    type Err = UnknownStrategy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SchedulerKind::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| UnknownStrategy(s.to_owned()))
    }
}

/// Read-only state the orderings consult.
#[derive(Clone, Copy, Debug)]
pub struct SchedulerContext<'a> {
    /// Longest-path-to-end rank per instance.
    pub ranks: &'a BTreeMap<String, u32>,
    /// Finished instance count per abstract task.
    pub finished_per_abstract: &'a BTreeMap<AbstractTaskId, usize>,
    /// Monotone sequence number assigned when an instance first became ready.
    pub submission_seq: &'a BTreeMap<String, u64>,
}

impl SchedulerContext<'_> {
    fn rank_of(&self, t: &PhysicalTaskSpec) -> u32 {
        self.ranks.get(&t.instance_id).copied().unwrap_or(0)
    }

    fn finished_of(&self, t: &PhysicalTaskSpec) -> usize {
        self.finished_per_abstract
            .get(&t.abstract_id)
            .copied()
            .unwrap_or(0)
    }

    fn seq_of(&self, t: &PhysicalTaskSpec) -> u64 {
        self.submission_seq
            .get(&t.instance_id)
            .copied()
            .unwrap_or(u64::MAX)
    }
}

fn by_rank(a: &PhysicalTaskSpec, b: &PhysicalTaskSpec, ctx: &SchedulerContext<'_>) -> Ordering {
    ctx.rank_of(b)
        .cmp(&ctx.rank_of(a))
        .then_with(|| b.input_size.cmp(&a.input_size))
        .then_with(|| a.instance_id.cmp(&b.instance_id))
}

/// Sorts the ready tasks into the strategy's total order.
///
/// Instance id is the final tiebreak of every strategy, so the result is a
/// deterministic permutation of the input.
pub fn order_ready<'a>(
    strategy: SchedulerKind,
    mut ready: Vec<&'a PhysicalTaskSpec>,
    ctx: &SchedulerContext<'_>,
) -> Vec<&'a PhysicalTaskSpec> {
    match strategy {
        SchedulerKind::Original => ready.sort_by(|a, b| {
            ctx.seq_of(a)
                .cmp(&ctx.seq_of(b))
                .then_with(|| a.instance_id.cmp(&b.instance_id))
        }),
        SchedulerKind::Rank => ready.sort_by(|a, b| by_rank(a, b, ctx)),
        SchedulerKind::LffMin => ready.sort_by(|a, b| {
            ctx.finished_of(a)
                .cmp(&ctx.finished_of(b))
                .then_with(|| a.input_size.cmp(&b.input_size))
                .then_with(|| a.instance_id.cmp(&b.instance_id))
        }),
        SchedulerKind::LffMax => ready.sort_by(|a, b| {
            ctx.finished_of(a)
                .cmp(&ctx.finished_of(b))
                .then_with(|| b.input_size.cmp(&a.input_size))
                .then_with(|| a.instance_id.cmp(&b.instance_id))
        }),
        SchedulerKind::GsMin | SchedulerKind::GsMax => ready.sort_by(|a, b| {
            let sampled_a = ctx.finished_of(a) >= GS_WARMUP_THRESHOLD;
            let sampled_b = ctx.finished_of(b) >= GS_WARMUP_THRESHOLD;
            sampled_a.cmp(&sampled_b).then_with(|| {
                if sampled_a {
                    // Both warmed up: plain Rank order.
                    by_rank(a, b, ctx)
                } else {
                    let input_order = if strategy == SchedulerKind::GsMin {
                        a.input_size.cmp(&b.input_size)
                    } else {
                        b.input_size.cmp(&a.input_size)
                    };
                    ctx.rank_of(b)
                        .cmp(&ctx.rank_of(a))
                        .then(input_order)
                        .then_with(|| a.instance_id.cmp(&b.instance_id))
                }
            })
        }),
    }
    ready
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{InputBytes, MemBytes};

    fn spec(id: &str, abstract_id: &str, input: u64) -> PhysicalTaskSpec {
        PhysicalTaskSpec {
            instance_id: id.to_owned(),
            abstract_id: AbstractTaskId::new(abstract_id),
            input_size: InputBytes(input),
            true_peak: MemBytes(100),
            runtime_ms: 1000,
            cores: 1,
            user_mem: MemBytes::from_gib(4),
            depends_on: vec![],
        }
    }

    struct Ctx {
        ranks: BTreeMap<String, u32>,
        finished: BTreeMap<AbstractTaskId, usize>,
        seq: BTreeMap<String, u64>,
    }

    impl Ctx {
        fn new() -> Self {
            Ctx {
                ranks: BTreeMap::new(),
                finished: BTreeMap::new(),
                seq: BTreeMap::new(),
            }
        }

        fn rank(mut self, id: &str, r: u32) -> Self {
            self.ranks.insert(id.to_owned(), r);
            self
        }

        fn done(mut self, abstract_id: &str, n: usize) -> Self {
            self.finished.insert(AbstractTaskId::new(abstract_id), n);
            self
        }

        fn seq(mut self, id: &str, s: u64) -> Self {
            self.seq.insert(id.to_owned(), s);
            self
        }

        fn as_ctx(&self) -> SchedulerContext<'_> {
            SchedulerContext {
                ranks: &self.ranks,
                finished_per_abstract: &self.finished,
                submission_seq: &self.seq,
            }
        }
    }

    fn ids(ordered: &[&PhysicalTaskSpec]) -> Vec<String> {
        ordered.iter().map(|t| t.instance_id.clone()).collect()
    }

    #[test]
    fn strategy_ids_round_trip() {
        for kind in SchedulerKind::ALL {
            assert_eq!(kind.id().parse::<SchedulerKind>().unwrap(), kind);
        }
        assert_eq!(
            "sjf".parse::<SchedulerKind>(),
            Err(UnknownStrategy("sjf".to_owned()))
        );
    }

    #[test]
    fn original_follows_submission_sequence() {
        let ctx = Ctx::new().seq("x", 2).seq("y", 0).seq("z", 1);
        let (x, y, z) = (spec("x", "A", 1), spec("y", "A", 2), spec("z", "A", 3));
        let ordered = order_ready(SchedulerKind::Original, vec![&x, &y, &z], &ctx.as_ctx());
        assert_eq!(ids(&ordered), ["y", "z", "x"]);
    }

    #[test]
    fn rank_prefers_deeper_then_larger_input() {
        // Instances of the chain example: a1 has rank 3, c1 rank 1.
        let ctx = Ctx::new().rank("a1", 3).rank("c1", 1).rank("c2", 1);
        let a1 = spec("a1", "A", 10);
        let c1 = spec("c1", "C", 10);
        let c2 = spec("c2", "C", 50);
        let ordered = order_ready(SchedulerKind::Rank, vec![&c1, &c2, &a1], &ctx.as_ctx());
        assert_eq!(ids(&ordered), ["a1", "c2", "c1"]);
    }

    #[test]
    fn lff_min_prefers_lesser_sampled_then_smaller_input() {
        let ctx = Ctx::new().done("P", 0).done("Q", 4);
        let p_small = spec("p-small", "P", 10);
        let p_big = spec("p-big", "P", 20);
        let q = spec("q", "Q", 5);
        let ordered = order_ready(
            SchedulerKind::LffMin,
            vec![&q, &p_big, &p_small],
            &ctx.as_ctx(),
        );
        assert_eq!(ids(&ordered), ["p-small", "p-big", "q"]);
    }

    #[test]
    fn lff_max_flips_the_input_tiebreak() {
        let ctx = Ctx::new().done("P", 0).done("Q", 4);
        let p_small = spec("p-small", "P", 10);
        let p_big = spec("p-big", "P", 20);
        let q = spec("q", "Q", 5);
        let ordered = order_ready(
            SchedulerKind::LffMax,
            vec![&q, &p_big, &p_small],
            &ctx.as_ctx(),
        );
        assert_eq!(ids(&ordered), ["p-big", "p-small", "q"]);
    }

    #[test]
    fn lff_variants_agree_without_count_ties() {
        let ctx = Ctx::new().done("P", 0).done("Q", 2).done("R", 7);
        let p = spec("p", "P", 30);
        let q = spec("q", "Q", 20);
        let r = spec("r", "R", 10);
        let a = order_ready(SchedulerKind::LffMin, vec![&r, &q, &p], &ctx.as_ctx());
        let b = order_ready(SchedulerKind::LffMax, vec![&r, &q, &p], &ctx.as_ctx());
        assert_eq!(ids(&a), ids(&b));
    }

    #[test]
    fn gs_puts_undersampled_group_first() {
        let ctx = Ctx::new()
            .done("New", 0)
            .done("Hot", 9)
            .rank("n-big", 1)
            .rank("n-small", 1)
            .rank("h-deep", 5)
            .rank("h-shallow", 0);
        let n_big = spec("n-big", "New", 40);
        let n_small = spec("n-small", "New", 4);
        let h_deep = spec("h-deep", "Hot", 100);
        let h_shallow = spec("h-shallow", "Hot", 1);
        let ready = vec![&h_shallow, &n_big, &h_deep, &n_small];

        let min = order_ready(SchedulerKind::GsMin, ready.clone(), &ctx.as_ctx());
        assert_eq!(ids(&min), ["n-small", "n-big", "h-deep", "h-shallow"]);

        let max = order_ready(SchedulerKind::GsMax, ready, &ctx.as_ctx());
        assert_eq!(ids(&max), ["n-big", "n-small", "h-deep", "h-shallow"]);
    }

    #[test]
    fn gs_equals_rank_once_everything_is_sampled() {
        let ctx = Ctx::new()
            .done("A", 5)
            .done("B", 12)
            .rank("a", 2)
            .rank("b1", 1)
            .rank("b2", 1);
        let a = spec("a", "A", 5);
        let b1 = spec("b1", "B", 9);
        let b2 = spec("b2", "B", 7);
        let ready = vec![&b2, &a, &b1];
        let rank = order_ready(SchedulerKind::Rank, ready.clone(), &ctx.as_ctx());
        for kind in [SchedulerKind::GsMin, SchedulerKind::GsMax] {
            let gs = order_ready(kind, ready.clone(), &ctx.as_ctx());
            assert_eq!(ids(&gs), ids(&rank), "{kind}");
        }
    }

    #[test]
    fn every_strategy_returns_a_permutation() {
        let ctx = Ctx::new()
            .rank("a", 1)
            .rank("b", 2)
            .rank("c", 0)
            .done("A", 1)
            .done("B", 6)
            .seq("a", 0)
            .seq("b", 1)
            .seq("c", 2);
        let a = spec("a", "A", 3);
        let b = spec("b", "B", 2);
        let c = spec("c", "A", 1);
        for kind in SchedulerKind::ALL {
            let ordered = order_ready(kind, vec![&a, &b, &c], &ctx.as_ctx());
            let mut got = ids(&ordered);
            got.sort();
            assert_eq!(got, ["a", "b", "c"], "{kind}");
        }
    }
}
