use proptest::prelude::*;

use setflow_core::energy::{Forcing, ForcingKind};
use setflow_core::evolution::{run, uniform_partition};
use setflow_core::geometry::{BinaryField, GridSpec, PerimeterScheme, Shape};
use setflow_core::grid_solver::{brute_force_step, single_step, SolveParams, StepProblem};
use setflow_core::scenario_io::parse_scenario;
use setflow_core::verify::audit_energy;
use setflow_core::{Mode, Scenario};

fn scheme() -> impl Strategy<Value = PerimeterScheme> {
    prop_oneof![
        Just(PerimeterScheme::Anisotropic),
        Just(PerimeterScheme::Isotropic),
        Just(PerimeterScheme::Crofton),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn step_stays_admissible_and_below_the_empty_set(
        bits in proptest::collection::vec(any::<bool>(), 36),
        g in proptest::collection::vec(-12.0f64..6.0, 36),
        scheme in scheme(),
    ) {
        let grid = GridSpec::square([-1.0, -1.0], 2.0, 6).unwrap();
        let m = BinaryField::from_fn(&grid, |i, j| bits[j * 6 + i]);
        let p = StepProblem::new(m, g, scheme, 0.25).unwrap();
        let out = single_step(&p, &SolveParams::default()).unwrap();
        prop_assert!(out.mask.is_subset_of(&p.admissible).unwrap());
        prop_assert!(out.value <= p.offset + 1e-12);
        prop_assert!((p.objective(&out.mask).unwrap() - out.value).abs() <= 1e-9);
        prop_assert!(out.certificate.dual <= out.value + 1e-9);
    }

    #[test]
    fn relaxation_bound_is_below_the_exhaustive_optimum(
        bits in proptest::collection::vec(proptest::bool::weighted(0.8), 16),
        g in proptest::collection::vec(-12.0f64..6.0, 16),
        scheme in scheme(),
    ) {
        let grid = GridSpec::square([-1.0, -1.0], 2.0, 4).unwrap();
        let m = BinaryField::from_fn(&grid, |i, j| bits[j * 4 + i]);
        let p = StepProblem::new(m, g, scheme, 0.0).unwrap();
        let out = single_step(&p, &SolveParams::default()).unwrap();
        let (_, best) = brute_force_step(&p).unwrap();
        prop_assert!(out.certificate.dual <= best + 1e-9);
        prop_assert!(out.value >= best - 1e-9);
    }

    #[test]
    fn brittle_runs_shrink_and_satisfy_the_lower_estimate(
        r0 in 0.6f64..1.0,
        r1 in 0.0f64..0.5,
        cx in -0.2f64..0.2,
    ) {
        let a = 5.0;
        let grid = GridSpec::square([-1.0, -1.0], 2.0, 32).unwrap();
        let forcing = Forcing::new(
            ForcingKind::ShrinkingBalls { centers: vec![[cx, 0.0]], schedule: vec![[0.0, r0], [1.0, r1]] },
            a,
        )
        .unwrap();
        let s = Scenario {
            initial: forcing.open_set(0.0, &grid).complement(),
            grid,
            times: uniform_partition(1.0, 4).unwrap(),
            mode: Mode::Brittle,
            a,
            forcing,
            scheme: PerimeterScheme::Crofton,
            solver: SolveParams::default(),
            stabilize_initial: true,
        };
        let traj = run(&s).unwrap();
        prop_assert!(traj.check_monotone().is_ok());
        prop_assert!(audit_energy(&traj, &s).unwrap().passed());
    }
}

#[test]
fn parsed_shapes_round_trip() {
    let shapes = [
        Shape::ball([0.1, -0.2], 0.5),
        Shape::union(vec![Shape::ball([0.0, 0.0], 0.3), Shape::regular_polygon([0.5, 0.5], 5, 0.4)]),
        Shape::complement(Shape::intersection(vec![Shape::ball([0.0, 0.0], 1.0), Shape::ball([0.5, 0.0], 1.0)])),
    ];
    for s in shapes {
        let text = serde_json::json!({
            "name": "round-trip",
            "domain": {"origin": [-1, -1], "side": [2, 2], "cells": [16, 16]},
            "time": {"T": 1, "steps": 1},
            "initial": {"shape": s},
        })
        .to_string();
        let loaded = parse_scenario(&text, std::path::Path::new(".")).unwrap();
        let back = serde_json::to_value(&loaded.config().initial).unwrap();
        assert_eq!(back["shape"], serde_json::to_value(&s).unwrap());
    }
}
