use super::*;
use crate::fol::parse_formula;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-15
}

#[test]
fn connective_examples() {
    assert!(close(and(0.7, 0.6), 0.3));
    assert!(close(implies(0.8, 0.3), 0.5));
    assert!(close(not(not(0.42)), 0.42));
    assert_eq!(eval_connective(Connective::Or, 0.7, Some(0.6)), 1.0);
    assert_eq!(eval_connective(Connective::Not, 0.25, None), 0.75);
}

#[test]
fn lukasiewicz_laws_on_grid() {
    let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    for &a in &grid {
        assert!(close(not(not(a)), a));
        for &b in &grid {
            assert_eq!(and(a, b), and(b, a));
            assert_eq!(or(a, b), or(b, a));
            assert!(close(implies(a, b), or(not(a), b)));
            for &c in grid.iter().step_by(10) {
                assert!(close(and(and(a, b), c), and(a, and(b, c))));
                assert!(close(or(or(a, b), c), or(a, or(b, c))));
            }
        }
    }
}

#[test]
fn harmonic_mean_examples() {
    assert_eq!(satisfiability(&[1.0, 1.0]).unwrap(), 1.0);
    assert!(close(satisfiability(&[1.0, 0.25]).unwrap(), 0.4));
    assert!(matches!(satisfiability(&[]), Err(Error::EmptyTheory)));
    // the floor keeps a zero finite but dominant
    let hm = harmonic_mean(&[0.0, 1.0]).unwrap();
    assert!(hm > 0.0 && hm < 3e-6);
}

/// Grounding over `n` one-dimensional constants with the given unary and
/// binary truth tables (looked up by the constant's single coordinate).
fn table_grounding(unary: &[(&str, Vec<f64>)], binary: &[(&str, Vec<Vec<f64>>)], n: usize) -> (Signature, Grounding) {
    let mut sig = Signature::new();
    let mut g = Grounding::new();
    for i in 0..n {
        let name = format!("c{i}");
        sig.add_constant(name.clone()).unwrap();
        g.constants.insert(name, vec![i as f64]);
    }
    for (p, vals) in unary {
        sig.add_predicate(*p, 1).unwrap();
        let vals = vals.clone();
        g.predicates
            .insert(p.to_string(), Grounder::custom(*p, 1, move |v| vals[v[0] as usize]));
    }
    for (p, vals) in binary {
        sig.add_predicate(*p, 2).unwrap();
        let vals = vals.clone();
        g.predicates.insert(
            p.to_string(),
            Grounder::custom(*p, 2, move |v| vals[v[0] as usize][v[1] as usize]),
        );
    }
    (sig, g)
}

#[test]
fn universal_over_crisp_and_equal_truths() {
    let (sig, g) = table_grounding(&[("P", vec![1.0; 5]), ("Q", vec![0.5, 0.5])], &[], 5);
    let f = parse_formula("forall x: P(x)", &sig).unwrap();
    assert_eq!(eval_formula(&f, &g, &Domain::single(5), Mode::Eval).unwrap(), 1.0);
    let f = parse_formula("forall x: Q(x)", &sig).unwrap();
    assert_eq!(eval_formula(&f, &g, &Domain::single(2), Mode::Eval).unwrap(), 0.5);
}

#[test]
fn asymmetry_matches_exhaustive_substitution() {
    let part_of = vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0], vec![1.0, 0.9, 0.3]];
    let (sig, g) = table_grounding(&[], &[("partOf", part_of.clone())], 3);
    let f = parse_formula("forall x,y: partOf(x,y) -> ~partOf(y,x)", &sig).unwrap();
    let got = eval_formula(&f, &g, &Domain::single(3), Mode::Eval).unwrap();
    let mut inv = 0.0;
    for x in 0..3 {
        for y in 0..3 {
            let t = (1.0 - part_of[x][y] + (1.0 - part_of[y][x])).min(1.0);
            inv += 1.0 / t.max(EPSILON);
        }
    }
    assert!((got - 9.0 / inv).abs() < 1e-15);
}

#[test]
fn toy_theory_by_hand() {
    let (sig, g) = table_grounding(
        &[("A", vec![0.9, 0.2]), ("B", vec![0.6, 0.7])],
        &[("R", vec![vec![0.0, 1.0], vec![0.5, 0.0]])],
        2,
    );
    let texts = ["A(c0)", "~A(c1)", "A(c0) & B(c0)", "forall x,y: R(x,y) -> B(y)"];
    let clauses: Vec<Formula> = texts.iter().map(|t| parse_formula(t, &sig).unwrap()).collect();
    let theory = GroundedTheory::new(sig, clauses, g).unwrap();
    let domain = Domain::single(2);
    // hand values
    let t1 = 0.9;
    let t2 = 0.8;
    let t3: f64 = 0.9 + 0.6 - 1.0;
    let inst = [
        (1.0_f64 - 0.0 + 0.6).min(1.0),
        (1.0_f64 - 1.0 + 0.7).min(1.0),
        (1.0_f64 - 0.5 + 0.6).min(1.0),
        (1.0_f64 - 0.0 + 0.7).min(1.0),
    ];
    let t4 = 4.0 / inst.iter().map(|t| 1.0 / t).sum::<f64>();
    let want = 4.0 / (1.0 / t1 + 1.0 / t2 + 1.0 / t3 + 1.0 / t4);
    let got = theory_satisfiability(&theory, &domain, Mode::Eval).unwrap();
    assert!((got - want).abs() < 1e-15, "{got} vs {want}");

    let prog = Program::compile(&theory.clauses, &theory.grounding, &domain).unwrap();
    let atoms = prog.atom_values(&theory.grounding, Mode::Eval).unwrap();
    let truths = prog.forward(&atoms, &mut Vec::new());
    assert!((satisfiability(&truths).unwrap() - want).abs() < 1e-15);
}

#[test]
fn errors_are_reported() {
    let (sig, g) = table_grounding(&[("P", vec![1.0])], &[], 1);
    let f = parse_formula("forall x: P(x)", &sig).unwrap();
    assert!(matches!(
        eval_formula(&f, &g, &Domain::new(vec![vec![]]), Mode::Eval),
        Err(Error::EmptyDomain)
    ));
    let open = Formula::atom("P", vec![Term::var("x")]);
    assert!(matches!(eval_formula(&open, &g, &Domain::single(1), Mode::Eval), Err(Error::OpenFormula(_))));
    let unmapped = Formula::atom("Q", vec![Term::constant("c0")]);
    assert!(matches!(eval_formula(&unmapped, &g, &Domain::single(1), Mode::Eval), Err(Error::Unmapped(_))));
    assert!(matches!(GroundedTheory::new(sig, vec![], g), Err(Error::EmptyTheory)));
}

#[test]
fn nested_quantifiers_stay_in_their_group() {
    // R is true only across groups; nested quantification must never see it.
    let mut r = vec![vec![0.0; 4]; 4];
    r[0][2] = 1.0;
    r[1][3] = 1.0;
    let (sig, g) = table_grounding(&[], &[("R", r)], 4);
    let domain = Domain::new(vec![vec![0, 1], vec![2, 3]]);
    let f = parse_formula("forall x: exists y: R(x,y)", &sig).unwrap();
    assert!(eval_formula(&f, &g, &domain, Mode::Eval).unwrap() < 1e-5);
    let f = parse_formula("forall x: forall y: ~R(x,y)", &sig).unwrap();
    assert_eq!(eval_formula(&f, &g, &domain, Mode::Eval).unwrap(), 1.0);
    // without a grouping the same sentence is false somewhere
    assert!(eval_formula(&f, &g, &Domain::single(4), Mode::Eval).unwrap() < 1e-5);
}

#[test]
fn mereology_clause_counts() {
    let sig_for = |w: usize, p: usize| {
        let mut sig = Signature::new();
        for i in 0..w {
            sig.add_predicate(format!("W{i}"), 1).unwrap();
        }
        for i in 0..p {
            sig.add_predicate(format!("P{i}"), 1).unwrap();
        }
        sig.add_predicate("partOf", 2).unwrap();
        sig
    };
    let empty = mereology_constraints(&PartWholeTable::empty(0, 0), &sig_for(0, 0)).unwrap();
    assert_eq!(empty.len(), 1);
    assert_eq!(empty[0].to_string(), "forall x,y: partOf(x,y) -> ~partOf(y,x)");

    let one = mereology_constraints(&PartWholeTable::full(1, 1), &sig_for(1, 1)).unwrap();
    let text: Vec<String> = one.iter().map(|f| f.to_string()).collect();
    assert_eq!(
        text,
        [
            "forall x,y: partOf(x,y) -> ~partOf(y,x)",
            "forall x,y: W0(x) & W0(y) -> ~partOf(x,y)",
            "forall x,y: P0(x) & P0(y) -> ~partOf(y,x)",
        ]
    );

    // 1 + (incompatible part-whole pairs) + W² + P²
    for (w, p, table) in [
        (2, 2, PartWholeTable::full(2, 2)),
        (8, 8, PartWholeTable::cyclic(8, 8)),
        (3, 5, PartWholeTable::empty(3, 5)),
    ] {
        let incompatible = (0..p)
            .flat_map(|pi| (0..w).map(move |wi| (pi, wi)))
            .filter(|&(pi, wi)| !table.compatible(pi, wi))
            .count();
        let got = mereology_constraints(&table, &sig_for(w, p)).unwrap().len();
        assert_eq!(got, 1 + incompatible + w * w + p * p);
    }
    assert_eq!(mereology_constraints(&PartWholeTable::full(2, 2), &sig_for(2, 2)).unwrap().len(), 9);
}

// ---- compiled program vs direct evaluation --------------------------------

fn random_body(rng: &mut ChaCha8Rng, vars: &[&str], depth: usize) -> String {
    if depth == 0 || rng.gen_range(0..4) == 0 {
        let v = |rng: &mut ChaCha8Rng| vars[rng.gen_range(0..vars.len())];
        return if rng.gen_bool(0.5) {
            format!("P({})", v(rng))
        } else {
            format!("R({},{})", v(rng), v(rng))
        };
    }
    let a = random_body(rng, vars, depth - 1);
    let b = random_body(rng, vars, depth - 1);
    match rng.gen_range(0..5) {
        0 => format!("~({a})"),
        1 => format!("({a}) & ({b})"),
        2 => format!("({a}) | ({b})"),
        3 => format!("({a}) -> ({b})"),
        _ => format!("exists z: ({a}) | R(z,{})", vars[0]),
    }
}

fn random_setup(seed: u64) -> (GroundedTheory, Domain) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 6;
    let p: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    let r: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| rng.gen_range(0.0..1.0)).collect())
        .collect();
    let (sig, g) = table_grounding(&[("P", p)], &[("R", r)], n);
    let mut clauses = Vec::new();
    for _ in 0..4 {
        let body = random_body(&mut rng, &["x", "y"], 3);
        clauses.push(parse_formula(&format!("forall x,y: {body}"), &sig).unwrap());
    }
    clauses.push(parse_formula("P(c0) -> R(c1,c2)", &sig).unwrap());
    let theory = GroundedTheory::new(sig, clauses, g).unwrap();
    (theory, Domain::new(vec![vec![0, 1, 2], vec![3], vec![4, 5]]))
}

#[test]
fn program_matches_direct_evaluation() {
    for seed in 0..50 {
        let (theory, domain) = random_setup(seed);
        let prog = Program::compile(&theory.clauses, &theory.grounding, &domain).unwrap();
        let atoms = prog.atom_values(&theory.grounding, Mode::Eval).unwrap();
        let truths = prog.forward(&atoms, &mut Vec::new());
        for (c, t) in theory.clauses.iter().zip(&truths) {
            let direct = eval_formula(c, &theory.grounding, &domain, Mode::Eval).unwrap();
            assert!((direct - t).abs() < 1e-12, "seed {seed}: {c}");
        }
    }
}

#[test]
fn backward_matches_finite_differences_on_atoms() {
    let h = 1e-7;
    for seed in 0..20 {
        let (theory, domain) = random_setup(seed);
        let prog = Program::compile(&theory.clauses, &theory.grounding, &domain).unwrap();
        let atoms = prog.atom_values(&theory.grounding, Mode::Eval).unwrap();
        let sat_of = |a: &[f64]| satisfiability(&prog.forward(a, &mut Vec::new())).unwrap();
        let mut vals = Vec::new();
        let truths = prog.forward(&atoms, &mut vals);
        let hm = satisfiability(&truths).unwrap();
        let root_adj: Vec<f64> = truths
            .iter()
            .map(|&t| harmonic_mean_weight(t, hm, truths.len()))
            .collect();
        let mut grad = vec![0.0; atoms.len()];
        prog.backward(&vals, &root_adj, &mut Vec::new(), &mut grad);
        for i in 0..atoms.len() {
            let mut up = atoms.clone();
            up[i] += h;
            let mut down = atoms.clone();
            down[i] -= h;
            let fd = (sat_of(&up) - sat_of(&down)) / (2.0 * h);
            // a kink within h of the point makes the difference quotient meaningless
            let kinked = (fd - grad[i]).abs() > 1e-5 && {
                let mut up2 = atoms.clone();
                up2[i] += 2.0 * h;
                let fd2 = (sat_of(&up2) - sat_of(&atoms)) / (2.0 * h);
                (fd2 - fd).abs() > 1e-5
            };
            if !kinked {
                assert!((fd - grad[i]).abs() <= 1e-5 * (1.0 + grad[i].abs()), "seed {seed} atom {i}: {fd} vs {}", grad[i]);
            }
        }
    }
}

#[test]
fn eval_mode_is_deterministic() {
    let (theory, domain) = random_setup(3);
    let a = theory_satisfiability(&theory, &domain, Mode::Eval).unwrap();
    let b = theory_satisfiability(&theory, &domain, Mode::Eval).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
}

#[test]
fn shared_subformulas_are_interned() {
    let (sig, g) = table_grounding(&[("P", vec![0.3, 0.6])], &[], 2);
    let c = vec![
        parse_formula("forall x: ~P(x)", &sig).unwrap(),
        parse_formula("forall y: ~P(y) | P(y)", &sig).unwrap(),
    ];
    let prog = Program::compile(&c, &g, &Domain::single(2)).unwrap();
    // 2 atoms, 2 negations, 2 disjunctions, 2 quantifier nodes
    assert_eq!(prog.node_count(), 8);
    assert_eq!(prog.slots().len(), 2);
}

proptest! {
    #[test]
    fn truths_stay_in_unit_interval(seed in any::<u64>()) {
        let (theory, domain) = random_setup(seed);
        for c in &theory.clauses {
            let t = eval_formula(c, &theory.grounding, &domain, Mode::Eval).unwrap();
            prop_assert!((0.0..=1.0).contains(&t));
        }
    }

    #[test]
    fn satisfiability_is_monotone(values in prop::collection::vec(0.0f64..=1.0, 1..20), i in any::<prop::sample::Index>(), bump in 0.0f64..1.0) {
        let before = satisfiability(&values).unwrap();
        let mut raised = values.clone();
        let k = i.index(values.len());
        raised[k] = (raised[k] + bump).min(1.0);
        prop_assert!(satisfiability(&raised).unwrap() >= before);
    }

    #[test]
    fn and_is_monotone(a in 0.0f64..=1.0, a2 in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (lo, hi) = if a <= a2 { (a, a2) } else { (a2, a) };
        prop_assert!(and(lo, b) <= and(hi, b));
        prop_assert!(or(lo, b) <= or(hi, b));
    }
}
