use std::f64::consts::TAU;

use proptest::prelude::*;

use uavlc::association::{
    ris_coefficients_with, ris_dual_solve, ris_greedy, user_assoc_step, user_beta_update, AssociationEvaluator,
    PhasePolicy, RisDualOptions, UserDualState,
};
use uavlc::channel::ChannelSet;
use uavlc::deployment::minorant_g0;
use uavlc::model::{random_scenario, Position, Scenario, ScenarioConfig};
use uavlc::orchestrator::{initialize, run, RunConfig, Scheme};
use uavlc::phases::{wrap_angle, PhaseMatrix};

fn small(seed: u64, ris_count: usize, elements: usize, strong: bool) -> Scenario {
    let mut cfg = ScenarioConfig::table1();
    cfg.uav_count = 2;
    cfg.user_count = 4;
    cfg.ris_count = ris_count;
    cfg.ris_elements = elements;
    if strong {
        cfg.vlc.pd_area = 1.0;
    }
    random_scenario(seed, &cfg).unwrap()
}

fn matrix(rows: usize, cols: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(lo..hi, cols), rows)
}

proptest! {
    #[test]
    fn wrapped_angles_stay_in_range(a in -1e4f64..1e4) {
        let w = wrap_angle(a);
        prop_assert!((0.0..TAU).contains(&w));
        let turns = (a - w) / TAU;
        prop_assert!((turns - turns.round()).abs() < 1e-9);
    }

    #[test]
    fn every_user_gets_one_covering_uav(
        beta in matrix(3, 5, 0.0, 1.0),
        gains in matrix(3, 5, 0.0, 1.0),
        floors in prop::collection::vec(1e-6f64..1.0, 5),
    ) {
        let pick = user_assoc_step(&beta, &gains, &floors).unwrap();
        prop_assert_eq!(pick.len(), 5);
        for (j, &i) in pick.iter().enumerate() {
            prop_assert!(i < 3 && gains[i][j] > 0.0);
            let chosen = beta[i][j] * floors[j] / gains[i][j];
            for k in 0..3 {
                if gains[k][j] > 0.0 {
                    prop_assert!(chosen <= beta[k][j] * floors[j] / gains[k][j]);
                }
            }
        }
    }

    #[test]
    fn multipliers_stay_in_the_simplex_box(
        gains in matrix(3, 5, 1e-3, 1.0),
        powers in prop::collection::vec(1e-3f64..100.0, 3),
        assign in prop::collection::vec(0usize..3, 5),
        steps in 1usize..20,
    ) {
        let floors = vec![1e-2; 5];
        let mut st = UserDualState::uniform(3, 5, 0.5);
        for _ in 0..steps {
            let rho = st.step();
            user_beta_update(&mut st, &assign, &powers, &gains, &floors, rho);
            for row in &st.beta {
                prop_assert!(row.iter().all(|&b| b >= 0.0));
                prop_assert!(row.iter().sum::<f64>() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn separation_minorant_never_overshoots(
        a in prop::array::uniform4(-100f64..100.0),
        b in prop::array::uniform4(-100f64..100.0),
    ) {
        let (qi, qk) = (Position::new(a[0], a[1]), Position::new(a[2], a[3]));
        let (ri, rk) = (Position::new(b[0], b[1]), Position::new(b[2], b[3]));
        prop_assert!(minorant_g0(qi, qk, ri, rk) <= qi.distance_sq(qk) + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pairwise_expansion_reproduces_every_pattern(
        seed in 0u64..1000,
        ris_count in 1usize..=4,
        elements in 1usize..=3,
        theta in prop::collection::vec(0.0..TAU, 12),
        x in 0.0f64..100.0,
        y in 0.0f64..100.0,
    ) {
        let s = small(seed, ris_count, elements, true);
        let dep = [Position::new(x, y), Position::new(100.0 - x, 100.0 - y)];
        let mut phases = PhaseMatrix::zeros(ris_count, elements);
        for l in 0..ris_count {
            phases.set_row(l, theta[l * elements..(l + 1) * elements].to_vec());
        }
        let ch = ChannelSet::new(&dep, &s).unwrap();
        for j in 0..s.user_count() {
            let coef = ris_coefficients_with(&ch, 0, j, &phases);
            for pattern in 0..(1u32 << ris_count) {
                let mask: Vec<bool> = (0..ris_count).map(|l| pattern >> l & 1 == 1).collect();
                let set: Vec<usize> = (0..ris_count).filter(|&l| mask[l]).collect();
                let exact = ch.gain(0, &phases, &set, j).powi(2);
                prop_assert!((coef.reconstruct(&mask) - exact).abs() <= 1e-10 * exact.max(1e-300));
            }
        }
    }

    #[test]
    fn ris_methods_never_lose_to_incumbent(seed in 0u64..1000, strong in any::<bool>()) {
        let s = small(seed, 3, 2, strong);
        let init = initialize(&s, seed).unwrap();
        let eval = AssociationEvaluator::new(
            &init.deployment, &init.phases, &s, PhasePolicy::Reoptimize, Default::default(),
        ).unwrap();
        let start = eval.price_full(&init.assoc).unwrap().total;
        let dual = ris_dual_solve(&eval, &init.assoc, &RisDualOptions::default()).unwrap();
        prop_assert!(dual.total <= start * (1.0 + 1e-12));
        prop_assert_eq!(&dual.assoc.user_to_uav, &init.assoc.user_to_uav);
        // Greedy builds from scratch, so only its integrality is guaranteed.
        let greedy = ris_greedy(&eval, &init.assoc.user_to_uav).unwrap();
        prop_assert!(greedy.assoc.ris_to_uav.iter().all(|&i| i < s.uav_count));
        prop_assert!(greedy.total.is_finite());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn runs_are_monotone_and_deterministic(seed in 0u64..1000, greedy in any::<bool>()) {
        let s = small(seed, 2, 2, false);
        let scheme = if greedy { Scheme::Scheme2Greedy } else { Scheme::Scheme1Dual };
        let cfg = RunConfig::new(scheme, seed);
        let a = run(&s, &cfg).unwrap();
        prop_assert!(a.objectives.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!((a.final_power() - a.objectives.last().unwrap()).abs() <= 1e-9 * a.final_power());
        let b = run(&s, &cfg).unwrap();
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn scenario_files_round_trip(seed in 0u64..1000) {
        let s = small(seed, 3, 5, false);
        let back = Scenario::from_toml_str(&s.to_toml_string()).unwrap();
        prop_assert_eq!(back, s);
    }
}
