use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::fixtures::worked_table;
use crate::lp::{enumerate_vertices, optimize_by_enumeration};
use crate::rational::{int, ratio};
use crate::table::Variable;

fn table1_roles() -> ProxyRoles {
    ProxyRoles::infer(&worked_table(), "X", "T", "S").unwrap()
}

/// Worked example with `s0` taken as the upper level of `S`.
fn table1_recoded() -> ProxyTable {
    let mut roles = table1_roles();
    roles.s.levels.swap(0, 1);
    ProxyTable::from_joint(&worked_table(), &roles, Convention::Conditional).unwrap()
}

fn table1_conditional() -> ProxyTable {
    ProxyTable::from_joint(&worked_table(), &table1_roles(), Convention::Conditional).unwrap()
}

fn tenths_of_thousand(v: &[i64]) -> Vec<Rational> {
    v.iter().map(|&n| ratio(n, 10_000)).collect()
}

/// Printed index sets per row, as `(i, j, k)` blocks, for `x1` then `x0`.
#[allow(clippy::type_complexity)]
const PRINTED: [(usize, usize, usize, [([u8; 2], [u8; 2], [u8; 2]); 2]); 8] = [
    (0, 0, 1, [([0, 1], [0, 1], [0, 2]), ([0, 2], [0, 2], [1, 3])]),
    (0, 1, 1, [([0, 1], [2, 3], [0, 2]), ([0, 2], [1, 3], [1, 3])]),
    (1, 0, 1, [([2, 3], [0, 1], [0, 2]), ([1, 3], [0, 2], [1, 3])]),
    (1, 1, 1, [([2, 3], [2, 3], [0, 2]), ([1, 3], [1, 3], [1, 3])]),
    (0, 0, 0, [([0, 1], [0, 1], [0, 1]), ([0, 2], [0, 2], [2, 3])]),
    (0, 1, 0, [([0, 1], [2, 3], [0, 1]), ([0, 2], [1, 3], [2, 3])]),
    (1, 0, 0, [([2, 3], [0, 1], [0, 1]), ([1, 3], [0, 2], [2, 3])]),
    (1, 1, 0, [([2, 3], [2, 3], [0, 1]), ([1, 3], [1, 3], [2, 3])]),
];

fn support(prog: &CounterfactualProgram, row: usize) -> BTreeSet<CounterfactualIndex> {
    prog.lp.eq[row + 1]
        .a
        .iter()
        .zip(&prog.columns)
        .filter(|(a, _)| !a.is_zero())
        .map(|(_, c)| *c)
        .collect()
}

#[test]
fn stratum_rows_match_printed_index_sets() {
    for monotone in [false, true] {
        let prog = build_program(&table1_conditional(), monotone, Target::X1).unwrap();
        assert_eq!(prog.columns.len(), if monotone { 27 } else { 64 });
        for (row, (t, s, x, blocks)) in PRINTED.iter().enumerate() {
            assert_eq!(prog.rows[row], StratumRow { t: Some(*t), s: Some(*s), x: *x });
            let mut expect = BTreeSet::new();
            for (is, js, ks) in blocks {
                for &i in is {
                    for &j in js {
                        for &k in ks {
                            let c = CounterfactualIndex::new(i, j, k);
                            if !monotone || c.is_monotone() {
                                expect.insert(c);
                            }
                        }
                    }
                }
            }
            assert_eq!(support(&prog, row), expect, "row {row} monotone={monotone}");
        }
    }
}

#[test]
fn objectives_select_outcome_types() {
    let p = table1_conditional();
    for (target, ks) in [(Target::X1, [1u8, 3]), (Target::X0, [2, 3])] {
        let prog = build_program(&p, false, target).unwrap();
        for (c, o) in prog.columns.iter().zip(&prog.lp.obj) {
            assert_eq!(o.is_one(), ks.contains(&c.k));
        }
    }
}

#[test]
fn rows_partition_columns() {
    let p = table1_conditional();
    for monotone in [false, true] {
        for proxies in [Proxies::Both, Proxies::T, Proxies::S] {
            let prog = build_program_with(&p, monotone, Target::X0, proxies).unwrap();
            assert!(prog.partitions_columns());
            assert_eq!(prog.rows.len(), if proxies == Proxies::Both { 8 } else { 4 });
        }
    }
}

#[test]
fn point_mass_admits_the_null_type() {
    let p = ProxyTable::from_fn(Convention::Conditional, |i, j, _| int((i == 0 && j == 0) as i64)).unwrap();
    let prog = build_program(&p, true, Target::X1).unwrap();
    let mut q = vec![Rational::zero(); prog.columns.len()];
    q[prog.position(&CounterfactualIndex::new(0, 0, 0)).unwrap()] = int(1);
    assert!(prog.lp.is_feasible(&q));
    let b = lp_bounds(&prog).unwrap();
    assert_eq!((b.lower, b.upper), (int(0), int(1)));
}

#[test]
fn witnesses_reproduce_observed_table() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let model = ResponseModel::random(true, 30, &mut rng);
        let p = model.observables();
        for monotone in [false, true] {
            let prog = build_program(&p, monotone, Target::X1).unwrap();
            let b = lp_bounds(&prog).unwrap();
            let w = b.witnesses.unwrap();
            for q in [&w.lower, &w.upper] {
                let expect: Vec<Rational> = prog.rows.iter().map(|r| p.get(r.t.unwrap(), r.s.unwrap(), r.x).clone()).collect();
                assert_eq!(prog.observables_at(q), expect);
            }
            let truth = model.dense(&prog.columns).unwrap();
            assert!(prog.lp.is_feasible(&truth));
            assert_eq!(prog.target_at(&truth), model.effect(Target::X1));
        }
    }
}

#[test]
fn worked_example_unrestricted_is_vacuous() {
    let p = table1_conditional();
    for target in Target::BOTH {
        let b = lp_bounds(&build_program(&p, false, target).unwrap()).unwrap();
        assert_eq!((b.lower.clone(), b.upper.clone()), (int(0), int(1)));
        let w = b.witnesses.unwrap();
        let prog = build_program(&p, false, target).unwrap();
        assert!(prog.lp.is_feasible(&w.lower) && prog.lp.is_feasible(&w.upper));
    }
}

#[test]
fn worked_example_as_coded_is_not_monotone() {
    // P(s1 | x1) < P(s1 | x0) while P(t1 | x1) > P(t1 | x0).
    let p = table1_conditional();
    let prog = build_program(&p, true, Target::X1).unwrap();
    assert!(matches!(lp_bounds(&prog), Err(BoundsError::Infeasible(_))));
    assert!(enumerate_vertices(&prog.lp.eq, prog.lp.n).unwrap().is_empty());
    assert_eq!(certify_against_lp(&p, true).unwrap_err().code(), "infeasible");
}

#[test]
fn worked_example_recoded_monotone_goldens() {
    let p = table1_recoded();
    let vertices = {
        let prog = build_program(&p, true, Target::X0).unwrap();
        enumerate_vertices(&prog.lp.eq, prog.lp.n).unwrap()
    };
    assert!(!vertices.is_empty());
    let golden = [(int(0), ratio(7, 10)), (ratio(3, 10), int(1))];
    for (target, (lo, hi)) in Target::BOTH.into_iter().zip(golden) {
        let prog = build_program(&p, true, target).unwrap();
        let values: Vec<Rational> = vertices.iter().map(|v| prog.target_at(v)).collect();
        assert_eq!(values.iter().min().unwrap(), &lo);
        assert_eq!(values.iter().max().unwrap(), &hi);
        let b = lp_bounds(&prog).unwrap();
        assert_eq!((b.lower, b.upper), (lo, hi));
    }
}

#[test]
fn exposure_free_table_has_zero_lower_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..10 {
        let mut model = ResponseModel::random(true, 9, &mut rng);
        model.weights.retain(|c, _| c.k != 1);
        if model.weights.is_empty() {
            continue;
        }
        let total: Rational = model.weights.values().sum();
        model.weights.values_mut().for_each(|w| *w /= &total);
        let p = model.observables();
        assert_eq!(p.p[0], p.p[1]);
        let b = lp_bounds(&build_program(&p, true, Target::X1).unwrap()).unwrap();
        assert_eq!(b.lower, int(0));
        assert!(lower_terms(&p).iter().all(Zero::is_zero));
    }
}

#[test]
fn closed_forms_on_worked_example() {
    let joint = ProxyTable::from_joint(&worked_table(), &table1_roles(), Convention::JointCompat).unwrap();
    assert_eq!(upper_terms(&joint).to_vec(), tenths_of_thousand(&[5666, 5490, 3620, 3444]));
    assert_eq!(lower_terms(&joint).to_vec(), tenths_of_thousand(&[1334, -444, 1510, 3380]));
    let [x0, x1] = closed_form_bounds(&joint).unwrap();
    assert_eq!((x0.lower, x0.upper), (int(0), ratio(3444, 10_000)));
    assert_eq!((x1.lower, x1.upper), (ratio(338, 1000), int(1)));
    assert_eq!(x1.convention, Convention::JointCompat);

    let cond = table1_conditional();
    assert_eq!(upper_terms(&cond).to_vec(), vec![ratio(91, 100), ratio(115, 100), ratio(70, 100), ratio(94, 100)]);
    assert_eq!(lower_terms(&cond).to_vec(), vec![ratio(9, 100), ratio(6, 100), ratio(-15, 100), ratio(30, 100)]);
    let [x0, x1] = closed_form_bounds(&cond).unwrap();
    assert_eq!(x0.upper, ratio(7, 10));
    assert_eq!(x1.lower, ratio(3, 10));
}

#[test]
fn joint_compat_round_trip() {
    let cond = table1_conditional();
    let joint = cond.to_joint(&[ratio(7, 10), ratio(3, 10)]).unwrap();
    assert_eq!(joint, ProxyTable::from_joint(&worked_table(), &table1_roles(), Convention::JointCompat).unwrap());
    assert!(build_program(&joint, true, Target::X1).is_err());
}

#[test]
fn closed_forms_stay_in_unit_interval() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..200 {
        let cells: Vec<i64> = (0..8).map(|_| rand::Rng::random_range(&mut rng, 0..20)).collect();
        let sums = [cells[..4].iter().sum::<i64>().max(1), cells[4..].iter().sum::<i64>().max(1)];
        let p = ProxyTable::from_fn(Convention::Conditional, |i, j, k| {
            if sums[k] == 1 && cells[4 * k..4 * k + 4].iter().all(|&c| c == 0) {
                int((i == 0 && j == 0) as i64)
            } else {
                ratio(cells[4 * k + 2 * i + j], sums[k])
            }
        })
        .unwrap();
        for r in closed_form_bounds(&p).unwrap() {
            assert!(r.lower >= int(0) && r.lower <= r.upper && r.upper <= int(1));
        }
    }
}

#[test]
fn closed_forms_contain_program_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for _ in 0..50 {
        let model = ResponseModel::random(true, 25, &mut rng);
        let cert = certify_against_lp(&model.observables(), true).unwrap();
        for t in &cert.targets {
            assert_eq!(t.lp_within_closed_form, Some(true));
            assert!(t.lp.contains(&model.effect(t.target)));
        }
    }
}

#[test]
fn monotone_bounds_nest_in_unrestricted() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..20 {
        let p = ResponseModel::random(true, 15, &mut rng).observables();
        let free = lp_bounds_both(&p, false, Proxies::Both, Execution::Sequential).unwrap();
        let mono = lp_bounds_both(&p, true, Proxies::Both, Execution::Sequential).unwrap();
        for (f, m) in free.iter().zip(&mono) {
            assert!(f.lower <= m.lower && m.upper <= f.upper);
        }
    }
}

#[test]
fn certification_without_monotonicity() {
    let cert = certify_against_lp(&table1_conditional(), false).unwrap();
    assert_eq!(cert.authoritative, Method::Lp);
    for t in &cert.targets {
        assert!(!t.applicable && t.closed_form.is_none() && t.agrees.is_none());
        assert_eq!((t.lp.lower.clone(), t.lp.upper.clone()), (int(0), int(1)));
    }
    let cert = certify_against_lp(&table1_recoded(), true).unwrap();
    assert!(cert.targets.iter().all(|t| t.agrees == Some(true)));
    assert_eq!(cert.targets[0].upper_delta, Some(int(0)));
}

fn stratified_table() -> JointTable {
    let vars = vec![
        Variable::new("Z", ["z0", "z1"]),
        Variable::new("X", ["x0", "x1"]),
        Variable::new("S", ["s0", "s1"]),
        Variable::new("T", ["t0", "t1"]),
    ];
    let w: Vec<Rational> = (1..=16).map(|v| int((v * 7) % 11 + 1)).collect();
    JointTable::from_weights(vars, w).unwrap()
}

#[test]
fn stratify_reads_each_covariate_level() {
    let t = stratified_table();
    let roles = ProxyRoles::infer(&t, "X", "T", "S").unwrap();
    let strata = stratify(&t, &roles, &["Z"], Convention::Conditional).unwrap();
    assert_eq!(strata.len(), 2);
    assert_eq!(strata[0].z, vec!["z0".to_string()]);
    assert_eq!(&strata[0].weight + &strata[1].weight, int(1));
    let sub = t.condition(&[("Z", "z1")]).unwrap();
    assert_eq!(strata[1].table, ProxyTable::from_joint(&sub, &roles, Convention::Conditional).unwrap());
    let whole = stratify(&t, &roles, &[], Convention::Conditional).unwrap();
    assert_eq!(whole.len(), 1);
    assert_eq!(whole[0].table, ProxyTable::from_joint(&t, &roles, Convention::Conditional).unwrap());
}

#[test]
fn stratify_rejects_missing_exposure_level() {
    let vars = vec![Variable::new("Z", ["z0", "z1"]), Variable::new("X", ["x0", "x1"]), Variable::new("S", ["s0", "s1"]), Variable::new("T", ["t0", "t1"])];
    // z1 only ever occurs with x0
    let w = (0..16).map(|c| int((c < 8 || (c / 4) % 2 == 0) as i64)).collect();
    let t = JointTable::from_weights(vars, w).unwrap();
    let roles = ProxyRoles::infer(&t, "X", "T", "S").unwrap();
    assert!(matches!(stratify(&t, &roles, &["Z"], Convention::Conditional), Err(BoundsError::ZeroMass(_))));
}

#[test]
fn single_stratum_equals_closed_form() {
    let p = table1_recoded();
    let one = Stratum { z: vec![], weight: int(1), table: p.clone() };
    let s = stratified_bounds(std::slice::from_ref(&one), true).unwrap();
    let c = closed_form_bounds(&p).unwrap();
    for (a, b) in s.iter().zip(&c) {
        assert_eq!((&a.lower, &a.upper), (&b.lower, &b.upper));
        assert_eq!(a.method, Method::Stratified);
    }
    let half = |z: &str| Stratum { z: vec![z.into()], weight: ratio(1, 2), table: p.clone() };
    let s2 = stratified_bounds(&[half("a"), half("b")], true).unwrap();
    for (a, b) in s2.iter().zip(&c) {
        assert_eq!((&a.lower, &a.upper), (&b.lower, &b.upper));
        assert_eq!(a.terms.len(), 2);
    }
}

#[test]
fn stratified_is_weighted_average() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..20 {
        let a = ResponseModel::random(true, 12, &mut rng).observables();
        let b = ResponseModel::random(true, 12, &mut rng).observables();
        let w = ratio(rand::Rng::random_range(&mut rng, 1..10), 10);
        let strata = [
            Stratum { z: vec!["z0".into()], weight: w.clone(), table: a.clone() },
            Stratum { z: vec!["z1".into()], weight: int(1) - &w, table: b.clone() },
        ];
        let s = stratified_bounds(&strata, true).unwrap();
        let (ca, cb) = (closed_form_bounds(&a).unwrap(), closed_form_bounds(&b).unwrap());
        for t in 0..2 {
            assert_eq!(s[t].lower, &w * &ca[t].lower + (int(1) - &w) * &cb[t].lower);
            assert_eq!(s[t].upper, &w * &ca[t].upper + (int(1) - &w) * &cb[t].upper);
        }
        let free = stratified_bounds(&strata, false).unwrap();
        assert!(free.iter().all(|r| r.lower <= s[r.target.level()].lower && s[r.target.level()].upper <= r.upper));
    }
}

#[test]
fn stratified_input_errors() {
    let p = table1_recoded();
    let st = |w: Rational| Stratum { z: vec![], weight: w, table: p.clone() };
    assert!(matches!(stratified_bounds(&[st(int(0)), st(int(1))], true), Err(BoundsError::ZeroMass(_))));
    assert!(matches!(stratified_bounds(&[st(ratio(1, 2))], true), Err(BoundsError::Format(_))));
    assert!(matches!(stratified_bounds(&[], true), Err(BoundsError::Format(_))));
}

#[test]
fn invalid_tables_are_rejected() {
    assert!(ProxyTable::from_fn(Convention::Conditional, |_, _, _| ratio(1, 8)).is_err());
    assert!(ProxyTable::from_fn(Convention::JointCompat, |_, _, _| ratio(1, 8)).is_ok());
    assert!(ProxyTable::from_fn(Convention::Conditional, |i, _, _| if i == 0 { ratio(3, 4) } else { ratio(-1, 4) }).is_err());
}

#[test]
fn binary_levels() {
    let t = worked_table();
    let b = Binary::infer(&t, "X").unwrap();
    assert_eq!(b.levels, ["x0".to_string(), "x1".to_string()]);
    let t2 = JointTable::new(vec![Variable::new("A", ["lo", "hi"])], vec![ratio(1, 2), ratio(1, 2)]).unwrap();
    assert_eq!(Binary::infer(&t2, "A").unwrap().levels, ["lo".to_string(), "hi".to_string()]);
    let t3 = JointTable::new(vec![Variable::new("A", ["a", "b", "c"])], vec![ratio(1, 3); 3]).unwrap();
    assert!(matches!(Binary::infer(&t3, "A"), Err(BoundsError::Format(_))));
    assert!(ProxyRoles::infer(&t, "X", "X", "S").is_err());
}

#[test]
fn report_json_shape() {
    let b = lp_bounds(&build_program(&table1_recoded(), true, Target::X1).unwrap()).unwrap();
    let v = b.to_json();
    assert_eq!(v["target"], "x1");
    assert_eq!(v["method"], "lp");
    assert_eq!(v["convention"], "conditional");
    assert_eq!(v["lower"]["exact"], "3/10");
    assert_eq!(v["lower"]["decimal"], 0.3);
    let lower = v["witnesses"]["lower"].as_object().unwrap();
    assert!(lower.keys().all(|k| k.starts_with('q') && !k.contains('2')));
    let total: Rational = lower.values().map(|s| crate::rational::parse_rational(s.as_str().unwrap()).unwrap()).sum();
    assert_eq!(total, int(1));
}

#[test]
fn enumeration_agrees_with_simplex_on_small_programs() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let p = ResponseModel::random(true, 10, &mut rng).observables();
    for proxies in [Proxies::T, Proxies::S] {
        for target in Target::BOTH {
            let mut prog = build_program_with(&p, true, target, proxies).unwrap();
            for sense in [Sense::Min, Sense::Max] {
                prog.lp.sense = sense;
                let e = optimize_by_enumeration(&prog.lp).unwrap();
                assert_eq!(e.value, lp::solve(&prog.lp).unwrap().value);
            }
        }
    }
}
