use markov_pade::biorth::{build_system, check_r_recurrences, first_order_system, kappa_degeneration_check, R2Data};
use markov_pade::cli::{Experiment, ExperimentConfig};
use markov_pade::measure::{divided_difference, moments_cnm, Interval, Measure, NodeSequence};
use markov_pade::oracle::{newton_pade_solve, InterpolationProblem};
use markov_pade::pencil::{build_section, check_mfunction_identity, gevp_spectrum};
use markov_pade::recurrence::{build_polys, check_zeros, eval_convergent};
use markov_pade::schur::run_chain;
use markov_pade::{c64, Complex64};
use proptest::prelude::*;

fn measure_strategy() -> impl Strategy<Value = Measure> {
    prop::collection::vec((-0.98f64..0.98, 0.05f64..2.0), 2..14).prop_map(|atoms| {
        let mut atoms = atoms;
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        atoms.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-3);
        let (pts, w): (Vec<f64>, Vec<f64>) = atoms.into_iter().unzip();
        Measure::discrete(Interval::new(-1.0, 1.0).unwrap(), pts, w).unwrap()
    })
}

/// Nodes on an arc over the interval with random radius and lift.
fn nodes_strategy(count: usize) -> impl Strategy<Value = NodeSequence> {
    (-0.3f64..0.3, 1.0f64..2.5, 0.05f64..0.5)
        .prop_map(move |(c, r, d)| NodeSequence::arc(c, r, count, d).unwrap())
}

fn upper_point() -> impl Strategy<Value = Complex64> {
    (-3.0f64..3.0, 1e-3f64..3.0).prop_map(|(x, y)| c64(x, y))
}

fn probes() -> Vec<Complex64> {
    vec![c64(2.5, 0.0), c64(0.0, 1.5), c64(-1.5, 0.4), c64(0.7, -2.0), c64(-4.0, -4.0)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn markov_is_nevanlinna(m in measure_strategy(), l in upper_point()) {
        let f = m.eval_markov(l).unwrap();
        prop_assert!(f.im > 0.0);
        let g = m.eval_markov(l.conj()).unwrap();
        prop_assert!((g - f.conj()).norm() <= 1e-14 * f.norm());
        prop_assert!(f.norm() <= m.mass() / m.interval().dist(l) * (1.0 + 1e-12));
    }

    #[test]
    fn divided_difference_is_symmetric(
        pts in prop::collection::vec(upper_point(), 2..7),
        seed in 0u64..1000,
    ) {
        let vals: Vec<Complex64> = pts.iter().map(|z| 1.0 / (z + c64(0.0, 5.0))).collect();
        let mut idx: Vec<usize> = (0..pts.len()).collect();
        idx.rotate_left((seed as usize) % pts.len());
        idx.swap(0, pts.len() - 1);
        let pp: Vec<Complex64> = idx.iter().map(|&i| pts[i]).collect();
        let pv: Vec<Complex64> = idx.iter().map(|&i| vals[i]).collect();
        match (divided_difference(&pts, &vals), divided_difference(&pp, &pv)) {
            (Ok(a), Ok(b)) => prop_assert!((a - b).norm() <= 1e-8 * (1.0 + a.norm())),
            (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
        }
    }

    #[test]
    fn moment_table_is_hermitian(m in measure_strategy(), nodes in nodes_strategy(5)) {
        let c = moments_cnm(&m, &nodes, 5).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                prop_assert!((c[(i, j)] - c[(j, i)].conj()).norm() <= 1e-12 * (1.0 + c[(i, j)].norm()));
            }
        }
    }

    #[test]
    fn chain_coefficients_are_connected(m in measure_strategy(), nodes in nodes_strategy(8)) {
        let chain = run_chain(&m, &nodes, 8).unwrap();
        for s in chain.steps() {
            prop_assert!(s.b > 0.0);
            prop_assert!((s.a2 - 1.0 - s.b * s.b).abs() <= 1e-9 * s.a2);
        }
        prop_assert!(chain.len() <= m.support_size().unwrap());
    }

    #[test]
    fn zeros_lie_in_the_interval_and_interlace(m in measure_strategy(), nodes in nodes_strategy(8)) {
        let chain = run_chain(&m, &nodes, 8).unwrap();
        for n in 0..chain.len() {
            let rep = check_zeros(&build_polys(&chain, n).unwrap(), m.interval()).unwrap();
            prop_assert!(rep.outside <= 1e-8, "n = {}: {:?}", n, rep);
            prop_assert!(rep.interlaced, "n = {}: {:?}", n, rep);
        }
    }

    #[test]
    fn convergents_respect_the_resolvent_bound(
        m in measure_strategy(),
        nodes in nodes_strategy(8),
        l in upper_point(),
    ) {
        let chain = run_chain(&m, &nodes, 8).unwrap();
        let d = m.interval().dist(l);
        for n in 0..chain.len() {
            let r = eval_convergent(&chain, n, l).unwrap();
            prop_assert!(r.norm() * d <= 1.0 + 1e-10);
            prop_assert!(build_section(&chain, 0, n).unwrap().j2_inverse_corner().unwrap() <= 1.0 + 1e-10);
        }
    }

    #[test]
    fn pencil_matches_convergents(m in measure_strategy(), nodes in nodes_strategy(8)) {
        let chain = run_chain(&m, &nodes, 8).unwrap();
        let n = chain.len() - 1;
        prop_assert!(check_mfunction_identity(&chain, n, &probes()).unwrap().max_residual <= 1e-9);
        let eig = gevp_spectrum(&build_section(&chain, 0, n).unwrap()).unwrap();
        prop_assert!(eig.iter().all(|&x| (-1.0 - 1e-8..=1.0 + 1e-8).contains(&x)));
    }

    #[test]
    fn convergent_interpolates_at_the_nodes(m in measure_strategy(), nodes in nodes_strategy(4)) {
        let chain = run_chain(&m, &nodes, 4).unwrap();
        let n = chain.len() - 1;
        let mn = m.normalize();
        for &z in &nodes.as_slice()[..=n] {
            let r = eval_convergent(&chain, n, z).unwrap();
            let f = mn.eval_markov(z).unwrap();
            prop_assert!((r - f).norm() <= 1e-9 * (1.0 + f.norm()));
        }
    }

    #[test]
    fn oracle_interpolates_and_is_real(nodes in nodes_strategy(4)) {
        let m = Measure::chebyshev();
        let sol = newton_pade_solve(&InterpolationProblem::from_measure(&m, &nodes, 2).unwrap()).unwrap();
        for &z in &nodes.as_slice()[..3] {
            prop_assert!((sol.eval(z) - m.eval_markov(z).unwrap()).norm() <= 1e-8);
        }
        let den = sol.denominator();
        let scale = den.max_abs_coeff();
        prop_assert!(den.coeffs().iter().chain(sol.numerator().coeffs()).all(|c| c.im.abs() <= 1e-9 * scale));
    }
}

fn r2_strategy(n: usize) -> impl Strategy<Value = R2Data> {
    let c = || (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(x, y)| c64(x, y));
    (
        prop::collection::vec(c(), n),
        prop::collection::vec(c(), n),
        prop::collection::vec(c(), n + 1),
        prop::collection::vec(c(), n + 1),
        c(),
    )
        .prop_map(move |(beta, r, a, b, k1)| {
            let r = r.into_iter().map(|x| x + c64(2.0, 0.0)).collect();
            let a = a.into_iter().map(|x| x + c64(0.0, 3.0)).collect();
            let b = b.into_iter().map(|x| x - c64(0.0, 3.0)).collect();
            R2Data::monic(beta, r, a, b, c64(1.0, 0.0), k1 + c64(2.5, 0.0)).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn first_order_system_is_monic(d in r2_strategy(5)) {
        if let Ok(sys) = build_system(d) {
            for n in 0..4 {
                let step = first_order_system(&sys, n).unwrap();
                prop_assert!(step.monic_defect <= 1e-10, "n = {}: {}", n, step.monic_defect);
            }
            let probes = [c64(5.0, 1.0), c64(-0.2, 0.1)];
            for n in 0..4 {
                prop_assert!(check_r_recurrences(&sys, n, &probes).unwrap() <= 1e-10);
            }
        }
    }

    #[test]
    fn equal_kappas_stay_constant(d in r2_strategy(6)) {
        let mut d = d;
        d.kappa1 = d.kappa0;
        let rep = kappa_degeneration_check(&d);
        prop_assert!(rep.constant && rep.refused, "{}", rep.max_rel_deviation);
    }

    #[test]
    fn convergence_csv_is_reproducible(seed in any::<u64>()) {
        let cfg = ExperimentConfig { seed, n_max: 3, ..ExperimentConfig::default() };
        let exp = Experiment::new(cfg).unwrap();
        let a = markov_pade::cli::convergence_report(&exp, false).unwrap().to_csv();
        let b = markov_pade::cli::convergence_report(&exp, false).unwrap().to_csv();
        prop_assert_eq!(a, b);
    }
}
