use std::sync::OnceLock;

use proptest::prelude::*;

use pgfold::check::check_plan;
use pgfold::folding::{fold_plan, FoldPlan};
use pgfold::lemmas::verify_spread_lemmas;
use pgfold::plan_file::{document_to_json, parse_document, to_json, PlanDocument};

fn plan() -> &'static FoldPlan {
    static PLAN: OnceLock<FoldPlan> = OnceLock::new();
    PLAN.get_or_init(|| fold_plan(5, 2, 1).unwrap())
}

#[test]
fn generated_plans_for_every_case_pass() {
    for (m, q, k) in [
        (1, 2, 0),
        (2, 2, 0),
        (3, 2, 1),
        (3, 3, 1),
        (5, 2, 2),
        (5, 2, 1),
        (5, 2, 0),
        (7, 2, 3),
    ] {
        let plan = fold_plan(m, q, k).unwrap();
        let r = check_plan(&plan);
        assert!(r.all_passed(), "P({m},{q}) k={k}\n{r}");
        assert_eq!(plan.phase1.idle_slots, 0);
        assert_eq!(plan.phase1_len() * plan.units(), plan.graph.n_edges());
        let lemmas = verify_spread_lemmas(&plan.space, &plan.partition);
        assert!(lemmas.all_passed(), "P({m},{q}) k={k}\n{lemmas}");
    }
}

#[test]
fn schedule_is_deterministic() {
    assert_eq!(to_json(&fold_plan(5, 2, 1).unwrap()), to_json(plan()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn moving_one_edge_is_caught(edge in 0usize..1953, shift in 1usize..21) {
        let mut p = plan().clone();
        p.memory_map.mem[edge] = (p.memory_map.mem[edge] + shift) % 21;
        let r = check_plan(&p);
        prop_assert!(!r.get("residency").unwrap().passed);
    }

    #[test]
    fn swapping_two_slots_of_a_unit_is_caught(unit in 0usize..21, a in 0usize..93, b in 0usize..93) {
        prop_assume!(a != b);
        let mut p = plan().clone();
        let acc = &mut p.phase1.units[unit];
        let (x, y) = (acc[a], acc[b]);
        acc[a].mem = y.mem;
        acc[a].addr = y.addr;
        acc[b].mem = x.mem;
        acc[b].addr = x.addr;
        prop_assert!(!check_plan(&p).all_passed());
    }

    #[test]
    fn documents_round_trip(
        edits in proptest::collection::vec((0usize..21, 0usize..93, 0usize..500), 0..8),
        idle in 0usize..5,
    ) {
        let mut doc = PlanDocument::from_plan(plan());
        for (u, s, v) in edits {
            doc.phase1[u][s].2 = v;
        }
        doc.idle_slots = idle;
        let text = document_to_json(&doc);
        let back = parse_document(&text).unwrap();
        prop_assert_eq!(&back, &doc);
        prop_assert_eq!(document_to_json(&back), text);
    }
}
