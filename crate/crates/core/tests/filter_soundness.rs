use dsmf_core::{
    run_dsmf, simulate_truth, FilterOptions, Hyperbox, Mat, PlantModel, Retention, Scenario, SensorGraph, SensorId,
    SensorModel, Tolerances, Vector,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_scenario(seed: u64, horizon: usize, tight_budget: bool) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=3);
    let num = rng.random_range(1..=4);
    let a = loop {
        let a = Mat::from_fn(
            n,
            n,
            |r, c| if r == c { rng.random_range(0.8..1.05) } else { 0.0 } + rng.random_range(-0.2..0.2),
        );
        if a.determinant().abs() > 0.3 {
            break a;
        }
    };
    let p = rng.random_range(1..=n);
    let b = Mat::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
    let sensors = (1..=num)
        .map(|i| {
            let rows = rng.random_range(0..=1);
            SensorModel {
                id: SensorId(i),
                c: Mat::from_fn(rows, n, |_, _| rng.random_range(-1.0..1.0)),
                v: Hyperbox::symmetric(rows, rng.random_range(0.05..0.5)),
            }
        })
        .collect();
    let mut edges = Vec::new();
    for to in 1..=num {
        for from in 1..=num {
            if from != to && rng.random_bool(0.4) {
                edges.push((from, to));
            }
        }
    }
    let (max_gen, max_con) = if tight_budget {
        (2 * n, n)
    } else {
        Scenario::default_budget(n)
    };
    Scenario {
        plant: PlantModel {
            a,
            b,
            w: Hyperbox::symmetric(p, rng.random_range(0.05..0.5)),
        },
        sensors,
        graph: SensorGraph::new(num, &edges).unwrap(),
        initial_beliefs: vec![Hyperbox::symmetric(n, 4.0).to_cz(); num],
        true_x0: Vector::from_fn(n, |_, _| rng.random_range(-2.0..2.0)),
        horizon,
        seed,
        max_gen,
        max_con,
        tolerances: Tolerances::default(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// The true state never leaves a reduced fused belief.
    #[test]
    fn truth_stays_inside_reduced_beliefs(seed in any::<u64>(), tight in any::<bool>()) {
        let s = random_scenario(seed, 25, tight);
        let t = simulate_truth(&s).unwrap();
        let h = run_dsmf(&s, &t, FilterOptions::reduced(&s)).unwrap();
        for k in 0..=s.horizon {
            for i in s.graph.sensors() {
                let st = h.step(k, i);
                prop_assert_eq!(st.truth_inside, Some(true), "k = {}, sensor {}", k, i.0);
                prop_assert!(st.generators <= s.max_gen && st.constraints <= s.max_con);
                prop_assert!(h.hull(k, i).unwrap().contains(t.states[k].as_slice(), 1e-9));
            }
        }
    }

    /// Reduction only ever loses information: reduced hulls contain the exact ones.
    #[test]
    fn reduced_hulls_contain_exact_hulls(seed in any::<u64>()) {
        let s = random_scenario(seed, 4, true);
        let t = simulate_truth(&s).unwrap();
        let reduced = run_dsmf(&s, &t, FilterOptions::reduced(&s)).unwrap();
        let opts = FilterOptions { budget: None, retention: Retention::StatsOnly, hulls: true, check_truth: true };
        let exact = run_dsmf(&s, &t, opts).unwrap();
        for k in 0..=s.horizon {
            for i in s.graph.sensors() {
                let (r, e) = (reduced.hull(k, i).unwrap(), exact.hull(k, i).unwrap());
                prop_assert!(e.is_subset_of(r, 1e-7 * (1.0 + r.widths().iter().fold(0.0, |m: f64, w| m.max(*w)))));
                prop_assert_eq!(exact.step(k, i).truth_inside, Some(true));
            }
        }
    }
}

/// With no noise anywhere and `A = I`, a sensor measuring the whole state pins it.
#[test]
fn noiseless_full_measurement_collapses_to_the_state() {
    let n = 2;
    let s = Scenario {
        plant: PlantModel {
            a: Mat::identity(n, n),
            b: Mat::identity(n, n),
            w: Hyperbox::symmetric(n, 0.0),
        },
        sensors: vec![
            SensorModel {
                id: SensorId(1),
                c: Mat::identity(n, n),
                v: Hyperbox::symmetric(n, 0.0),
            },
            SensorModel {
                id: SensorId(2),
                c: Mat::zeros(0, n),
                v: Hyperbox::symmetric(0, 0.0),
            },
        ],
        graph: SensorGraph::new(2, &[(1, 2)]).unwrap(),
        initial_beliefs: vec![Hyperbox::symmetric(n, 3.0).to_cz(); 2],
        true_x0: Vector::from_vec(vec![1.0, -2.0]),
        horizon: 5,
        seed: 3,
        max_gen: 20 * n,
        max_con: 10 * n,
        tolerances: Tolerances::default(),
    };
    let t = simulate_truth(&s).unwrap();
    assert!(t.states.iter().all(|x| x == &s.true_x0));
    let h = run_dsmf(&s, &t, FilterOptions::reduced(&s)).unwrap();
    for i in [SensorId(1), SensorId(2)] {
        let hull = h.hull(5, i).unwrap();
        for d in 0..n {
            assert!((hull.lower[d] - s.true_x0[d]).abs() < 1e-7 && (hull.upper[d] - s.true_x0[d]).abs() < 1e-7);
        }
    }
}
