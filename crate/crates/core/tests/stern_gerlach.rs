use qhist_core::histories::{combine_families, Condition, EventSet};
use qhist_core::sterngerlach::{build_sg_model, FamilyName, SgModel};
use qhist_core::{Error, Tolerances};

const C: Condition = Condition::Medium;

fn tol() -> Tolerances {
    Tolerances::default()
}

fn model() -> SgModel {
    build_sg_model(&tol()).unwrap()
}

fn events(s: &str) -> EventSet {
    s.parse().unwrap()
}

#[test]
fn every_named_family_is_consistent() {
    let m = model();
    for name in FamilyName::ALL {
        let fam = m.family(name, &tol()).unwrap();
        let report = fam.check_consistency(C, &tol()).unwrap();
        assert!(report.consistent, "{name}: {report}");
        assert!(report.worst_value() <= 1e-8);
        let total: f64 = fam
            .probabilities(C, &tol())
            .unwrap()
            .iter()
            .map(|p| p.probability)
            .sum();
        assert!((total - 1.0).abs() < 1e-12, "{name}");
    }
}

#[test]
fn fa_chain_operator_for_upper_history() {
    let m = model();
    let fa = m.family(FamilyName::Fa, &tol()).unwrap();
    let h = fa.histories().iter().find(|h| h.label == "I/u/U").unwrap();
    let k = fa.chain_operator(h).unwrap();
    let [t1, t2, t3] = m.steps();
    let u = m.projector("u").unwrap().operator().into_owned();
    let up = m.projector("U").unwrap().operator().into_owned();
    let rho = m.initial().outer(m.initial());
    let want = &(&(&(&(&up * t3) * &u) * t2) * t1) * &rho;
    assert!(k.max_abs_diff(&want) < 1e-15);
}

#[test]
fn fa_decoherence_matrix_is_diagonal_halves() {
    let fa = model().family(FamilyName::Fa, &tol()).unwrap();
    let d = fa.decoherence_matrix().unwrap();
    for a in 0..d.len() {
        for b in 0..d.len() {
            if a != b {
                assert!(d.get(a, b).norm() < 1e-15);
            }
        }
    }
    let named: Vec<f64> = d
        .labels()
        .iter()
        .zip(d.diagonal())
        .filter(|(l, _)| *l == "I/u/U" || *l == "I/l/L")
        .map(|(_, p)| p)
        .collect();
    assert_eq!(named.len(), 2);
    assert!(named.iter().all(|p| (p - 0.5).abs() < 1e-12));
}

#[test]
fn upper_detector_implies_upper_path() {
    let fa = model().family(FamilyName::Fa, &tol()).unwrap();
    let up = fa
        .conditional(&events("U@t3"), &events("u@t2"), C, &tol())
        .unwrap();
    let low = fa
        .conditional(&events("U@t3"), &events("l@t2"), C, &tol())
        .unwrap();
    assert!((up - 1.0).abs() < 1e-12);
    assert!(low.abs() < 1e-12);
}

#[test]
fn coherent_superposition_is_certain_in_fb() {
    let fb = model().family(FamilyName::Fb, &tol()).unwrap();
    let p = fb.probability_of(&events("c@t2"), C, &tol()).unwrap();
    assert!((p - 1.0).abs() < 1e-12);
}

#[test]
fn upper_detector_implies_spin_up_earlier() {
    let m = model();
    for name in [FamilyName::Fc, FamilyName::FcPrime] {
        let fam = m.family(name, &tol()).unwrap();
        let up = fam
            .conditional(&events("U@t3"), &events("z+@t1"), C, &tol())
            .unwrap();
        let down = fam
            .conditional(&events("U@t3"), &events("z-@t1"), C, &tol())
            .unwrap();
        assert!((up - 1.0).abs() < 1e-12, "{name}");
        assert!(down.abs() < 1e-12, "{name}");
    }
}

#[test]
fn spin_x_is_certain_in_fd_and_its_variant() {
    let m = model();
    for name in [FamilyName::Fd, FamilyName::FdPrime] {
        let fam = m.family(name, &tol()).unwrap();
        let p = fam.probability_of(&events("x+@t1"), C, &tol()).unwrap();
        assert!((p - 1.0).abs() < 1e-12, "{name}");
        let c = fam
            .conditional(&events("U@t3"), &events("x+@t1"), C, &tol())
            .unwrap();
        assert!((c - 1.0).abs() < 1e-12, "{name}");
    }
}

#[test]
fn detector_marginals_are_even() {
    let m = model();
    for name in FamilyName::ALL {
        let fam = m.family(name, &tol()).unwrap();
        for d in ["U@t3", "L@t3"] {
            let p = fam.probability_of(&events(d), C, &tol()).unwrap();
            assert!((p - 0.5).abs() < 1e-9, "{name} {d}");
        }
    }
}

#[test]
fn incompatible_combinations_name_the_time() {
    let m = model();
    let fam = |n| m.family(n, &tol()).unwrap();
    let cases = [
        (FamilyName::Fa, FamilyName::Fb, 2),
        (FamilyName::Fc, FamilyName::Fd, 1),
        (FamilyName::FdPrime, FamilyName::Fc, 1),
    ];
    for (a, b, t) in cases {
        match combine_families(&fam(a), &fam(b), C, &tol()) {
            Err(Error::Incompatible { time, left, right }) => {
                assert_eq!(time, Some(t), "{a}+{b}");
                let p = m.projector(left.as_str()).unwrap();
                let q = m.projector(right.as_str()).unwrap();
                assert!(!p.compatible(q, &tol()).unwrap(), "{left} vs {right}");
            }
            other => panic!("{a}+{b}: expected incompatibility, got {other:?}"),
        }
    }
}

#[test]
fn combining_a_family_with_itself_changes_nothing() {
    let m = model();
    for name in FamilyName::ALL {
        let f = m.family(name, &tol()).unwrap();
        let g = combine_families(&f, &f, C, &tol()).unwrap();
        assert_eq!(f.labels(), g.labels(), "{name}");
        for (a, b) in f.histories().iter().zip(g.histories()) {
            for (x, y) in a.events.iter().zip(&b.events) {
                assert!(x.projector.max_abs_diff(&y.projector) < 1e-12);
            }
        }
    }
}

#[test]
fn compatible_combination_keeps_marginals() {
    let m = model();
    let fa = m.family(FamilyName::Fa, &tol()).unwrap();
    let fc = m.family(FamilyName::Fc, &tol()).unwrap();
    let joint = combine_families(&fa, &fc, C, &tol()).unwrap();
    for parent in [&fa, &fc] {
        for p in parent.probabilities(C, &tol()).unwrap() {
            let h = parent
                .histories()
                .iter()
                .find(|h| h.label == p.label)
                .unwrap();
            let set = qhist_core::EventSet::new(
                (1..=3)
                    .map(|t| qhist_core::EventRef::new(h.label_at(t), t))
                    .filter(|e| e.label != "I")
                    .collect(),
            );
            let marginal = joint.probability_of(&set, C, &tol()).unwrap();
            assert!(
                (marginal - p.probability).abs() < 1e-9,
                "{}: {marginal} vs {}",
                p.label,
                p.probability
            );
        }
    }
    let c = joint
        .conditional(&events("U@t3"), &events("z+@t1,u@t2"), C, &tol())
        .unwrap();
    assert!((c - 1.0).abs() < 1e-12);
}
