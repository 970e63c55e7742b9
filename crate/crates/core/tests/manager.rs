mod common;

use proptest::prelude::*;

use ri_switch::check::{check_prefix_chain, check_trace};
use ri_switch::manager::{run_word, ManagerError, RiManager, SelectionPolicy};
use ri_switch::trace::{IoEvent, Trace, Valuation};
use ri_switch::vdta::{BuiltinRegistry, Policy};

use common::{small_automaton, Small};

const LOW: &str = "policy low { inputs { u: scalar } outputs { y: scalar } clocks { x }
  locations { l: initial accepting, t }
  transition l -> l when u < 5 and y <= u
  transition l -> t when u >= 5
  transition l -> t when u < 5 and y > u
  transition t -> t }";

const HIGH: &str = "policy high { inputs { u: scalar } outputs { y: scalar } clocks { x }
  locations { l: initial accepting, t }
  transition l -> l when u >= 3
  transition l -> t when u < 3
  transition t -> t }";

fn pair(selection: SelectionPolicy) -> RiManager {
    let reg = BuiltinRegistry::default();
    let ps = vec![Policy::from_source(LOW, &reg).unwrap(), Policy::from_source(HIGH, &reg).unwrap()];
    RiManager::new(ps, selection).unwrap()
}

fn u(v: f64) -> Valuation {
    Valuation::scalars(&[v])
}

/// Records what each group was shown, so histories can be rebuilt.
struct Recorder {
    outputs: Vec<f64>,
    histories: Vec<Trace>,
}

impl Recorder {
    fn new(outputs: Vec<f64>) -> Self {
        let n = outputs.len();
        Recorder { outputs, histories: vec![Trace::new(); n] }
    }

    fn bank(&mut self) -> impl FnMut(&Valuation, &[bool]) -> Vec<Option<Valuation>> + '_ {
        move |input, mask| {
            mask.iter()
                .enumerate()
                .map(|(g, &on)| {
                    let y = on.then(|| Valuation::scalars(&[self.outputs[g]]));
                    self.histories[g].push(IoEvent { input: input.clone(), output: y.clone() });
                    y
                })
                .collect()
        }
    }
}

#[test]
fn mask_suspends_groups_headed_for_a_trap() {
    let mut m = pair(SelectionPolicy::PreferLast);
    assert_eq!(m.begin_tick(u(1.0)).unwrap(), [true, false]);
    m.end_tick(vec![Some(u(1.0)), None]).unwrap();
    assert_eq!(m.begin_tick(u(4.0)).unwrap(), [true, true]);
    m.end_tick(vec![Some(u(4.0)), Some(u(9.0))]).unwrap();
    assert_eq!(m.begin_tick(u(9.0)).unwrap(), [false, true]);
}

#[test]
fn suspended_policies_keep_their_state() {
    let mut m = pair(SelectionPolicy::PreferLast);
    let before = m.state(1).clone();
    m.begin_tick(u(1.0)).unwrap();
    m.end_tick(vec![Some(u(0.0)), None]).unwrap();
    assert_eq!(m.state(1), &before);
    m.begin_tick(u(3.0)).unwrap();
    m.end_tick(vec![Some(u(0.0)), Some(u(0.0))]).unwrap();
    assert_ne!(m.state(1), &before);
}

#[test]
fn prefer_last_sticks_while_valid() {
    let mut m = pair(SelectionPolicy::PreferLast);
    let mut bank = |_: &Valuation, mask: &[bool]| mask.iter().map(|&b| b.then(|| u(0.0))).collect::<Vec<_>>();
    let picks: Vec<usize> = [9.0, 4.0, 4.0, 1.0, 4.0]
        .iter()
        .map(|&x| m.step(u(x), &mut bank).unwrap().selected)
        .collect();
    // group 0 is suspended rather than trapped at 9, so it is available again at 1
    assert_eq!(picks, [1, 1, 1, 0, 0]);

    let mut m = pair(SelectionPolicy::LowestIndex);
    let picks: Vec<usize> = [4.0, 4.0].iter().map(|&x| m.step(u(x), &mut bank).unwrap().selected).collect();
    assert_eq!(picks, [0, 0]);
}

#[test]
fn seeded_random_selection_is_reproducible() {
    let run = |seed| {
        let mut m = pair(SelectionPolicy::SeededRandom(seed));
        let mut bank = |_: &Valuation, mask: &[bool]| mask.iter().map(|&b| b.then(|| u(0.0))).collect::<Vec<_>>();
        (0..64).map(|_| m.step(u(4.0), &mut bank).unwrap().selected).collect::<Vec<_>>()
    };
    assert_eq!(run(7), run(7));
    let picks = run(7);
    assert!(picks.contains(&0) && picks.contains(&1));
}

#[test]
fn deadlock_leaves_the_tick_open_and_fallback_resolves_it() {
    let mut m = pair(SelectionPolicy::PreferLast);
    m.begin_tick(u(1.0)).unwrap();
    let err = m.end_tick(vec![Some(u(2.0)), None]).unwrap_err();
    assert!(matches!(err, ManagerError::PolicyDeadlock { tick: 0 }));
    assert_eq!(m.tick(), 0);
    assert!(m.pending_mask().is_some());
    let out = m.end_tick(vec![Some(u(0.5)), None]).unwrap();
    assert_eq!(out.event.output, Some(u(0.5)));

    let mut m = pair(SelectionPolicy::PreferLast).with_fallback(Some(0)).unwrap();
    m.begin_tick(u(1.0)).unwrap();
    let out = m.end_tick(vec![Some(u(2.0)), None]).unwrap();
    assert!(out.fallback_used);
    assert_eq!(out.b_prime, [false, false]);
    assert!(pair(SelectionPolicy::PreferLast).with_fallback(Some(2)).is_err());
}

#[test]
fn protocol_misuse_is_rejected() {
    let mut m = pair(SelectionPolicy::PreferLast);
    assert!(matches!(m.end_tick(vec![None, None]), Err(ManagerError::OutOfOrder(_))));
    m.begin_tick(u(1.0)).unwrap();
    assert!(matches!(m.begin_tick(u(1.0)), Err(ManagerError::OutOfOrder(_))));
    assert!(matches!(m.end_tick(vec![None]), Err(ManagerError::OutputCount { expected: 2, got: 1 })));
    assert!(matches!(m.end_tick(vec![None, Some(u(0.0))]), Err(ManagerError::MaskViolation { group: 1 })));
    assert!(matches!(
        m.end_tick(vec![Some(Valuation::scalars(&[0.0, 1.0])), None]),
        Err(ManagerError::InvalidOutput { group: 0, .. })
    ));

    let mut m = pair(SelectionPolicy::PreferLast);
    assert!(matches!(m.begin_tick(Valuation::scalars(&[])), Err(ManagerError::InvalidInput(_))));
    assert!(RiManager::new(Vec::new(), SelectionPolicy::PreferLast).is_err());

    let reg = BuiltinRegistry::default();
    let other = LOW.replace("y: scalar", "z: scalar").replace("y <=", "z <=").replace("y >", "z >");
    let mixed = vec![Policy::from_source(LOW, &reg).unwrap(), Policy::from_source(&other, &reg).unwrap()];
    assert!(matches!(RiManager::new(mixed, SelectionPolicy::PreferLast), Err(ManagerError::SignatureMismatch { .. })));
}

#[test]
fn run_word_reports_the_failing_tick() {
    let mut m = pair(SelectionPolicy::PreferLast);
    let mut bank = |_: &Valuation, mask: &[bool]| mask.iter().map(|&b| b.then(|| u(2.0))).collect::<Vec<_>>();
    let err = run_word(&mut m, [u(4.0), u(4.0), u(1.0)], &mut bank).unwrap_err();
    assert_eq!(err.tick, 2);
}

fn recorded_run() -> (Vec<Policy>, Trace, Vec<Trace>) {
    let mut m = pair(SelectionPolicy::PreferLast);
    let mut rec = Recorder::new(vec![0.5, 7.0]);
    let released = run_word(&mut m, [1.0, 4.0, 4.0, 10.0, 3.0].map(u), &mut rec.bank()).unwrap();
    let reg = BuiltinRegistry::default();
    let ps = vec![Policy::from_source(LOW, &reg).unwrap(), Policy::from_source(HIGH, &reg).unwrap()];
    (ps, released, rec.histories)
}

#[test]
fn checker_accepts_manager_traces_and_catches_tampering() {
    let (ps, released, hist) = recorded_run();
    assert!(check_trace(&ps, &released, &hist).all_pass());

    // an output nobody produced and no policy accepts
    let mut events = released.events().to_vec();
    events[0].output = Some(u(99.0));
    let bad = check_trace(&ps, &trace(events), &hist);
    assert!(!bad.snd.pass && !bad.ca.pass);
    assert_eq!(bad.snd.first_violation, Some(0));

    // a ⊥ release
    let mut events = released.events().to_vec();
    events[2].output = None;
    let bad = check_trace(&ps, &trace(events), &hist);
    assert_eq!(bad.snd.first_violation, Some(2));

    // an event answering another tick's input
    let mut events = released.events().to_vec();
    events.swap(0, 3);
    assert!(!check_trace(&ps, &trace(events), &hist).mono.pass);

    // a dropped event
    let mut events = released.events().to_vec();
    events.pop();
    assert!(!check_trace(&ps, &trace(events), &hist).inst.pass);

    // accepted by a policy but produced by no group
    let mut events = released.events().to_vec();
    events[1].output = Some(u(3.5));
    let bad = check_trace(&ps, &trace(events), &hist);
    assert!(bad.snd.pass && !bad.ca.pass);
}

fn trace(events: Vec<IoEvent>) -> Trace {
    let mut t = Trace::new();
    events.into_iter().for_each(|e| t.push(e));
    t
}

#[test]
fn released_trace_only_grows() {
    let mut m = pair(SelectionPolicy::PreferLast);
    let mut bank = |_: &Valuation, mask: &[bool]| mask.iter().map(|&b| b.then(|| u(0.0))).collect::<Vec<_>>();
    let mut snaps = vec![m.released().clone()];
    for x in [4.0, 3.0, 9.0, 3.5] {
        m.step(u(x), &mut bank).unwrap();
        snaps.push(m.released().clone());
    }
    assert!(check_prefix_chain(&snaps).pass);
    snaps.swap(1, 2);
    assert!(!check_prefix_chain(&snaps).pass);
}

fn selection() -> impl Strategy<Value = SelectionPolicy> {
    prop_oneof![
        Just(SelectionPolicy::PreferLast),
        Just(SelectionPolicy::LowestIndex),
        any::<u64>().prop_map(SelectionPolicy::SeededRandom),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    /// Random policies driven by random group outputs: every committed
    /// prefix satisfies the manager constraints, suspended policies stay
    /// put and every selected group was valid.
    #[test]
    fn random_runs_satisfy_the_constraints(
        autos in proptest::collection::vec(small_automaton(), 1..=3),
        word in proptest::collection::vec((0u8..=4, proptest::collection::vec(0u8..=3, 3)), 1..40),
        sel in selection(),
    ) {
        let policies: Vec<Policy> = autos.iter().map(Small::policy).collect();
        let n = policies.len();
        let mut m = RiManager::new(policies.clone(), sel).unwrap();
        let mut histories = vec![Trace::new(); n];
        for (x, ys) in &word {
            let input = u(*x as f64);
            let before: Vec<_> = (0..n).map(|i| m.state(i).clone()).collect();
            let mask = m.begin_tick(input.clone()).unwrap();
            let outputs: Vec<Option<Valuation>> =
                (0..n).map(|g| mask[g].then(|| u(ys[g] as f64))).collect();
            match m.end_tick(outputs.clone()) {
                Ok(out) => {
                    prop_assert!(out.b_prime[out.selected]);
                    prop_assert_eq!(out.mask, mask.clone());
                    for g in 0..n {
                        if !mask[g] {
                            prop_assert_eq!(m.state(g), &before[g]);
                        }
                        histories[g].push(IoEvent { input: input.clone(), output: outputs[g].clone() });
                    }
                }
                Err(ManagerError::PolicyDeadlock { .. }) => {
                    prop_assert!(m.pending_mask().is_some());
                    break;
                }
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            }
        }
        prop_assert_eq!(m.released().len() as u64, m.tick());
        let report = check_trace(&policies, m.released(), &histories);
        prop_assert!(report.all_pass(), "{}", report);
    }
}
