mod common;

use std::f64::consts::FRAC_1_SQRT_2;
use std::time::{Duration, Instant};

use qhist_core::histories::{combine_families, Condition, EventSet, Node};
use qhist_core::properties::{born, negation, refine};
use qhist_core::sterngerlach::{build_sg_model, FamilyName};
use qhist_core::toymodels::*;
use qhist_core::{Error, HistoryFamily, Ket, Operator, Projector, SampleSpace, Tolerances, C64};
use rand::Rng;

use common::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn tol() -> Tolerances {
    Tolerances::default()
}

fn close(what: &str, got: f64, want: f64, eps: f64) -> Result<(), String> {
    if (got - want).abs() <= eps {
        Ok(())
    } else {
        Err(format!(
            "{what}: got {got:.15}, want {want:.15} (eps {eps:e})"
        ))
    }
}

fn within(what: &str, elapsed: Duration, limit: Duration) -> Result<(), String> {
    if elapsed < limit {
        Ok(())
    } else {
        Err(format!("{what}: took {elapsed:?}, limit {limit:?}"))
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn decay_law() -> Outcome {
    let start = Instant::now();
    let lat = ToyLattice::new(
        9,
        C64::new(0.9f64.sqrt(), 0.0),
        C64::new(0.1f64.sqrt(), 0.0),
        &tol(),
    )
    .map_err(err)?;
    let step = decay_operator(&lat);
    let space = SampleSpace::computational_basis(lat.dim(), |i| format!("m={}", lat.site(i)));
    let mut worst = 0.0f64;
    for t in 1..=8u32 {
        let probs = born(&lat.ket(0), &step.pow(t), &space, &tol()).map_err(err)?;
        let got = probs[lat.index(0)];
        let want = 0.9f64.powi(t as i32);
        close(&format!("t={t}"), got, want, 1e-10)?;
        worst = worst.max((got - want).abs());
    }
    within("decay law", start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("max error {worst:.1e}, {:?}", start.elapsed()))
}

fn coupled_closed_form_matches() -> Outcome {
    let start = Instant::now();
    let lat = ToyLattice::new(12, C64::new(0.8, 0.0), C64::new(0.0, 0.6), &tol()).map_err(err)?;
    let det = ToyDetector::new(10).map_err(err)?;
    let step = coupled_step(&lat, &det).map_err(err)?;
    let psi0 = coupled_initial_state(&lat, &det);
    let mut worst = 0.0f64;
    for t in 3..=8usize {
        let state = step.pow(t as u32).apply(&psi0).map_err(err)?;
        let want = coupled_closed_form(&lat, &det, t).map_err(err)?;
        let diff = state.max_abs_diff(&want);
        if diff > 1e-12 {
            return Err(format!("t={t}: entrywise deviation {diff:e}"));
        }
        worst = worst.max(diff);
    }
    within("coupled evolution", start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("max deviation {worst:.1e}, {:?}", start.elapsed()))
}

fn detector_inference() -> Outcome {
    let lat = ToyLattice::new(12, C64::new(0.8, 0.0), C64::new(0.0, 0.6), &tol()).map_err(err)?;
    let det = ToyDetector::new(10).map_err(err)?;
    let jd = joint_distribution(&lat, &det, 5, &tol()).map_err(err)?;
    for n in 1..=3 {
        let p = jd
            .particle_given_pointer(|m| m == n + 2, n, &tol())
            .map_err(err)?;
        close(&format!("Pr(m={} | n={n})", n + 2), p, 1.0, 1e-10)?;
    }
    let p = jd
        .particle_given_pointer(|m| m <= 2, 0, &tol())
        .map_err(err)?;
    close("Pr(m<=2 | n=0)", p, 1.0, 1e-10)?;
    Ok("Pr(m=n+2 | n) = 1 for n=1..3, Pr(m<=2 | n=0) = 1".into())
}

fn stern_gerlach_families() -> Outcome {
    let sg = build_sg_model(&tol()).map_err(err)?;
    let c = Condition::Medium;
    let ev = |s: &str| s.parse::<EventSet>().map_err(err);
    let mut worst = 0.0f64;
    for name in FamilyName::ALL {
        let fam = sg.family(name, &tol()).map_err(err)?;
        let report = fam.check_consistency(c, &tol()).map_err(err)?;
        if !report.consistent || report.worst_value() > 1e-8 {
            return Err(format!("{name} inconsistent: {report}"));
        }
        worst = worst.max(report.worst_value());
    }
    let fa = sg.family(FamilyName::Fa, &tol()).map_err(err)?;
    let shown: Vec<_> = fa
        .probabilities(c, &tol())
        .map_err(err)?
        .into_iter()
        .filter(|p| !p.implicit || p.probability > 1e-9)
        .collect();
    if shown.len() != 2 {
        return Err(format!("Fa has {} histories with weight", shown.len()));
    }
    for p in &shown {
        close(&format!("Fa {}", p.label), p.probability, 0.5, 1e-9)?;
    }
    let up = fa
        .conditional(&ev("U@t3")?, &ev("u@t2")?, c, &tol())
        .map_err(err)?;
    let low = fa
        .conditional(&ev("U@t3")?, &ev("l@t2")?, c, &tol())
        .map_err(err)?;
    close("Pr(u2 | U3)", up, 1.0, 1e-9)?;
    close("Pr(l2 | U3)", low, 0.0, 1e-9)?;
    let fc = sg.family(FamilyName::Fc, &tol()).map_err(err)?;
    let spin = fc
        .conditional(&ev("U@t3")?, &ev("z+@t1")?, c, &tol())
        .map_err(err)?;
    close("Pr(z+1 | U3)", spin, 1.0, 1e-9)?;
    let fd = sg.family(FamilyName::Fd, &tol()).map_err(err)?;
    let x = fd.probability_of(&ev("x+@t1")?, c, &tol()).map_err(err)?;
    close("Fd Pr(x+1)", x, 1.0, 1e-9)?;
    Ok(format!(
        "six families consistent (worst {worst:.1e}); Fa = (0.5, 0.5); conditionals exact"
    ))
}

fn incompatibility() -> Outcome {
    let sg = build_sg_model(&tol()).map_err(err)?;
    let fam = |n| sg.family(n, &tol()).map_err(err);
    let mut notes = Vec::new();
    for (a, b, t) in [
        (FamilyName::Fa, FamilyName::Fb, 2),
        (FamilyName::Fc, FamilyName::Fd, 1),
    ] {
        match combine_families(&fam(a)?, &fam(b)?, Condition::Medium, &tol()) {
            Err(
                e @ Error::Incompatible {
                    time: Some(got), ..
                },
            ) if got == t => notes.push(e.to_string()),
            other => {
                return Err(format!(
                    "{a}+{b}: expected incompatibility at t{t}, got {other:?}"
                ))
            }
        }
    }
    let z = sg.projector("z+").ok_or("no z+")?;
    let x = sg.projector("x+").ok_or("no x+")?;
    match z.conjunction(x, &tol()) {
        Err(Error::Incompatible { .. }) => {}
        other => return Err(format!("conjunction(z+, x+): {other:?}")),
    }
    Ok(format!(
        "{}; conjunction(z+, x+) rejected",
        notes.join("; ")
    ))
}

fn inconsistent_family() -> Outcome {
    let s = FRAC_1_SQRT_2;
    let x_plus = Ket::from_real(&[s, s]).map_err(err)?;
    let x_minus = Ket::from_real(&[s, -s]).map_err(err)?;
    let ray = |k: &Ket| Projector::from_ket(k, &tol());
    let xs = || -> Result<Vec<Node>, Error> {
        Ok(vec![
            Node::new("x+", ray(&x_plus)?),
            Node::new("x-", ray(&x_minus)?),
        ])
    };
    let roots = vec![
        Node::new("z+", ray(&Ket::basis(2, 0)).map_err(err)?).then(xs().map_err(err)?),
        Node::new("z-", ray(&Ket::basis(2, 1)).map_err(err)?).then(xs().map_err(err)?),
    ];
    let id = Operator::identity(2);
    let fam = HistoryFamily::from_tree(x_plus.clone(), vec![id.clone(), id], roots, &tol())
        .map_err(err)?;
    let report = fam
        .check_consistency(Condition::Medium, &tol())
        .map_err(err)?;
    if report.consistent {
        return Err("reported consistent".into());
    }
    close("worst off-diagonal", report.worst_value(), 0.25, 1e-10)?;
    Ok(format!(
        "inconsistent, worst |D| = {:.12}",
        report.worst_value()
    ))
}

fn oracle_equivalence() -> Outcome {
    let mut r = rng(20_240_607);
    let mut worst = 0.0f64;
    for case in 0..200 {
        let dim = r.gen_range(1..=16);
        let parts = r.gen_range(1..=dim);
        let psi = random_ket(&mut r, dim);
        let u = random_unitary(&mut r, dim);
        let space = random_sample_space(&mut r, dim, parts);
        let fam = born_family(&psi, &u, &space);
        let got = fam.probabilities(Condition::Medium, &tol()).map_err(err)?;
        let want = born(&psi, &u, &space, &tol()).map_err(err)?;
        if got.len() != want.len() {
            return Err(format!(
                "case {case}: {} histories vs {} outcomes",
                got.len(),
                want.len()
            ));
        }
        for (g, w) in got.iter().zip(&want) {
            close(&format!("case {case} {}", g.label), g.probability, *w, 1e-9)?;
            worst = worst.max((g.probability - w).abs());
        }
        let d = fam.decoherence_matrix().map_err(err)?;
        if d.hermitian_deviation() > 1e-9 {
            return Err(format!("case {case}: decoherence matrix not Hermitian"));
        }
        let tr = d.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > 1e-9 {
            return Err(format!("case {case}: trace {tr}"));
        }
    }
    Ok(format!("200 random families, max deviation {worst:.1e}"))
}

fn property_suite() -> Outcome {
    let start = Instant::now();
    let mut r = rng(7_919);
    let t = tol();
    let sg = build_sg_model(&t).map_err(err)?;
    for step in sg.steps() {
        if !step.is_unitary(t.unitary) {
            return Err("Stern-Gerlach step not unitary".into());
        }
    }
    let mut checked = 0usize;
    for case in 0..300 {
        let dim = r.gen_range(2..=12);
        let u = random_unitary(&mut r, dim);
        if !u.is_unitary(t.unitary) {
            return Err(format!("case {case}: random propagator not unitary"));
        }
        let half = r.gen_range(1..=5);
        let mix: f64 = r.gen_range(0.0..1.0);
        let alpha = C64::from_polar(mix.sqrt(), r.gen_range(0.0..std::f64::consts::TAU));
        let beta = C64::from_polar((1.0 - mix).sqrt(), r.gen_range(0.0..std::f64::consts::TAU));
        let lat =
            ToyLattice::new(half + 2, alpha, beta, &Tolerances::uniform(1e-12)).map_err(err)?;
        let det = ToyDetector::new(half).map_err(err)?;
        if !decay_operator(&lat).is_unitary(t.unitary)
            || !coupled_step(&lat, &det).map_err(err)?.is_unitary(t.unitary)
        {
            return Err(format!("case {case}: toy step not unitary"));
        }

        let parts = r.gen_range(1..=dim);
        let space = random_sample_space(&mut r, dim, parts);
        let mut sum = Operator::zeros(dim);
        for (i, p) in space.projectors().iter().enumerate() {
            sum = &sum + &*p.operator();
            for q in &space.projectors()[i + 1..] {
                if p.product(q).map_err(err)?.max_abs() > t.proj {
                    return Err(format!("case {case}: members not orthogonal"));
                }
            }
        }
        if sum.max_abs_diff(&Operator::identity(dim)) > t.proj {
            return Err(format!("case {case}: members do not sum to I"));
        }

        let p = &space.projectors()[0];
        if negation(&negation(p)).max_abs_diff(p) > t.proj {
            return Err(format!("case {case}: negation not an involution"));
        }

        let fine = random_sample_space(&mut r, dim, dim);
        let coarse = |range: std::ops::Range<usize>| {
            let mut op = Operator::zeros(dim);
            for i in range {
                op = &op + &*fine.projectors()[i].operator();
            }
            Projector::new(op, &t)
        };
        let cut_a = r.gen_range(1..dim);
        let cut_b = r.gen_range(1..dim);
        let a = SampleSpace::binary(coarse(0..cut_a).map_err(err)?, "a", "~a");
        let b = SampleSpace::binary(coarse(cut_b..dim).map_err(err)?, "b", "~b");
        let refined = refine(&a, &b, &t).map_err(err)?;
        if refined.rank_sum() != dim {
            return Err(format!("case {case}: refinement lost rank"));
        }
        checked += 1;
    }
    within("property suite", start.elapsed(), Duration::from_secs(30))?;
    Ok(format!(
        "{checked} randomized instances, {:?}",
        start.elapsed()
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("decay law", decay_law),
        ("coupled closed form", coupled_closed_form_matches),
        ("detector inference", detector_inference),
        ("Stern-Gerlach families", stern_gerlach_families),
        ("incompatibility enforcement", incompatibility),
        ("inconsistent family detection", inconsistent_family),
        ("oracle equivalence", oracle_equivalence),
        ("property suite", property_suite),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS {}. {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {}. {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
