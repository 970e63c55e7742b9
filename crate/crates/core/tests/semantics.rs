mod common;

use std::collections::{HashSet, VecDeque};

use proptest::prelude::*;
use smallvec::smallvec;

use ri_switch::dsl::{self, parse_policy};
use ri_switch::policies;
use ri_switch::trace::{IoEvent, Valuation, Value};
use ri_switch::vdta::{BuiltinRegistry, Policy, VdtaState};

use common::small_automaton;

fn shipped() -> Vec<Policy> {
    policies::shipped(&BuiltinRegistry::default()).unwrap()
}

fn reading(front: f64, v: f64) -> Valuation {
    Valuation::new(vec![Value::Array(vec![front; 61].into()), Value::Scalar(v)])
}

/// Runs `fronts` through `policy` with output `(0, a)` and returns the
/// acceptance after each event.
fn acceptance(policy: &Policy, fronts: &[f64], v: f64, a: f64) -> Vec<bool> {
    let vdta = &policy.vdta;
    let mut s = vdta.initial_state();
    fronts
        .iter()
        .map(|&f| {
            let step = vdta.step(&s, &IoEvent::new(reading(f, v), Valuation::scalars(&[0.0, a]))).unwrap();
            s = step.state;
            step.accepting
        })
        .collect()
}

#[test]
fn normal_recovers_on_sixth_clear_reading() {
    let p = &shipped()[policies::NORMAL_GROUP];
    let mut fronts = vec![3.0, 3.0, 1.2];
    fronts.extend([3.0; 8]);
    let acc = acceptance(p, &fronts, 1.0, 0.0);
    assert_eq!(acc[..3], [true, true, false]);
    for k in 1..=8 {
        assert_eq!(acc[2 + k], k >= 6, "clear reading {k}");
    }
}

#[test]
fn interrupted_recovery_restarts_the_count() {
    let p = &shipped()[policies::NORMAL_GROUP];
    let fronts = [1.0, 3.0, 3.0, 3.0, 3.0, 3.0, 0.5, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0];
    let acc = acceptance(p, &fronts, 1.0, 0.0);
    assert!(acc[..12].iter().all(|a| !a));
    assert!(acc[12]);
}

#[test]
fn stopping_is_the_complement_of_normal() {
    let ps = shipped();
    let fronts = [3.0, 1.1, 3.0, 3.0, 0.4, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 2.0, 1.2, 1.21];
    let normal = acceptance(&ps[policies::NORMAL_GROUP], &fronts, 1.0, 0.0);
    let stopping = acceptance(&ps[policies::STOPPING_GROUP], &fronts, 1.0, 0.0);
    for (i, (n, s)) in normal.iter().zip(&stopping).enumerate() {
        assert_ne!(n, s, "event {i}");
    }
}

#[test]
fn cautious_waits_six_band_readings_after_getting_too_close() {
    let p = &shipped()[policies::CAUTIOUS_GROUP];
    // at v = 0 any braking command satisfies a <= -kin
    let mut fronts = vec![1.0, 0.5];
    fronts.extend([1.0; 8]);
    let acc = acceptance(p, &fronts, 0.0, -1.0);
    assert_eq!(acc[..2], [true, false]);
    for k in 1..=8 {
        assert_eq!(acc[1 + k], k >= 6, "band reading {k}");
    }
}

#[test]
fn cautious_rejects_insufficient_braking_and_traps_on_clear_road() {
    let p = &shipped()[policies::CAUTIOUS_GROUP];
    assert_eq!(acceptance(p, &[1.0, 1.0], 2.0, 1.0), [false, false]);
    assert_eq!(acceptance(p, &[1.0, 1.0], 2.0, -3.0), [true, true]);
    let acc = acceptance(p, &[1.0, 2.0, 1.0, 1.0], 0.0, -1.0);
    assert_eq!(acc, [true, false, false, false]);
    assert_eq!(p.traps.indices().count(), 1);
}

#[test]
fn suspension_freezes_location_and_clocks() {
    for p in shipped() {
        let vdta = &p.vdta;
        let s = vdta.step(&vdta.initial_state(), &IoEvent::new(reading(0.5, 1.0), Valuation::scalars(&[0.0, -1.0])));
        let s = s.unwrap().state;
        assert_eq!(vdta.step_suspended(&s), s);
        assert_eq!(vdta.step_suspended(&vdta.step_suspended(&s)), s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn step_agrees_with_reference_on_all_reachable_pairs(a in small_automaton()) {
        let policy = Policy::from_source(&a.source(), &BuiltinRegistry::default()).unwrap();
        let vdta = &policy.vdta;
        let mut seen = HashSet::new();
        let mut queue = VecDeque::from([(0usize, 0u64)]);
        seen.insert((0usize, 0u64));
        let mut pairs = 0;
        while let Some(state) = queue.pop_front() {
            let real = VdtaState { location: state.0, clocks: smallvec![state.1] };
            for u in 0..=4u64 {
                for y in 0..=3u64 {
                    let got = vdta
                        .step(&real, &IoEvent::new(Valuation::scalars(&[u as f64]), Valuation::scalars(&[y as f64])))
                        .unwrap();
                    let (next, acc) = a.step(state, u, y);
                    prop_assert_eq!(got.state.location, next.0);
                    prop_assert_eq!(got.state.clocks[0], next.1);
                    prop_assert_eq!(got.accepting, acc);
                    pairs += 1;
                    // beyond 8 every clock threshold is already decided
                    if next.1 <= 8 && seen.insert(next) {
                        queue.push_back(next);
                    }
                }
            }
        }
        prop_assert!(pairs > 0);
    }

    #[test]
    fn trap_set_matches_reference_reachability(a in small_automaton()) {
        let policy = Policy::from_source(&a.source(), &BuiltinRegistry::default()).unwrap();
        let n = a.accepting.len();
        let mut reach: Vec<bool> = a.accepting.clone();
        loop {
            let mut changed = false;
            for l in 0..n {
                if !reach[l] && a.edges[l].3.iter().any(|(t, _)| reach[*t]) {
                    reach[l] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        for l in 0..n {
            prop_assert_eq!(policy.traps.contains(l), !reach[l], "location l{}", l);
        }
    }

    #[test]
    fn canonical_form_round_trips(a in small_automaton()) {
        let ast = parse_policy(&a.source()).unwrap();
        let again = parse_policy(&ast.to_string()).unwrap();
        prop_assert_eq!(&ast, &again);
        prop_assert_eq!(ast.to_string(), again.to_string());
    }

    #[test]
    fn parser_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
        let _ = dsl::parse_policy_bytes(&bytes);
    }

    #[test]
    fn parser_never_panics_on_mangled_policies(cut in 0usize..600, junk in "[a-z0-9{}(),:<>=!. \n-]{0,12}") {
        let src = policies::CAUTIOUS;
        let at = src.char_indices().map(|(i, _)| i).nth(cut % src.chars().count()).unwrap_or(0);
        let mangled = format!("{}{junk}{}", &src[..at], &src[at..]);
        if let Ok(ast) = parse_policy(&mangled) {
            prop_assert_eq!(parse_policy(&ast.to_string()).unwrap(), ast);
        }
    }
}

#[test]
fn shipped_policies_round_trip() {
    for src in [policies::NORMAL, policies::STOPPING, policies::CAUTIOUS] {
        let ast = parse_policy(src).unwrap();
        assert_eq!(parse_policy(&ast.to_string()).unwrap(), ast);
    }
}

#[test]
fn nondeterminism_and_incompleteness_are_errors() {
    let reg = BuiltinRegistry::default();
    let overlap = "policy p { inputs { u: scalar } outputs { y: scalar } clocks { x }
      locations { a: initial accepting, b }
      transition a -> a when u < 2
      transition a -> b when u > 1
      transition b -> b }";
    let p = Policy::from_source(overlap, &reg).unwrap();
    let ev = |u: f64| IoEvent::new(Valuation::scalars(&[u]), Valuation::scalars(&[0.0]));
    let s0 = p.vdta.initial_state();
    assert!(p.vdta.step(&s0, &ev(0.0)).is_ok());
    assert!(p.vdta.step(&s0, &ev(3.0)).is_ok());
    assert!(p.vdta.step(&s0, &ev(1.5)).is_err());

    let gap = overlap.replace("u > 1", "u > 5");
    let p = Policy::from_source(&gap, &reg).unwrap();
    assert!(p.vdta.step(&s0, &ev(3.0)).is_err());
    assert!(p.vdta.step(&s0, &IoEvent::bottom(Valuation::scalars(&[0.0]))).is_err());
}

#[test]
fn clocks_saturate_instead_of_wrapping() {
    let src = "policy p { inputs { u: scalar } outputs { y: scalar } clocks { x }
      locations { a: initial accepting } transition a -> a }";
    let p = Policy::from_source(src, &BuiltinRegistry::default()).unwrap();
    let s = VdtaState { location: 0, clocks: smallvec![u64::MAX] };
    let next = p.vdta.step(&s, &IoEvent::new(Valuation::scalars(&[0.0]), Valuation::scalars(&[0.0]))).unwrap();
    assert_eq!(next.state.clocks[0], u64::MAX);
}
