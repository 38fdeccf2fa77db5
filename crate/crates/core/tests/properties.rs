use contact_intent::contact::{comfree_step, BodyPair, Scene, SystemState, Wrench};
use contact_intent::env::{build_observation, compute_reward, AssetLibrary, RewardWeights};
use contact_intent::geometry::{rotation_distance, unit_rotation_distance, ObjectModel, Pose};
use contact_intent::mpc::{clamp_command, MpcParams};
use contact_intent::policy::{admissible_weight_pairs, ContactIntention, W_ORI, W_POS};
use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use proptest::prelude::*;
use std::sync::OnceLock;

fn cube() -> &'static ObjectModel {
    static CUBE: OnceLock<ObjectModel> = OnceLock::new();
    CUBE.get_or_init(|| AssetLibrary::bundled().load("cube").unwrap())
}

fn vec3(r: f64) -> impl Strategy<Value = Vector3<f64>> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

fn unit_quat() -> impl Strategy<Value = UnitQuaternion<f64>> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter("non-degenerate", |(w, x, y, z)| w * w + x * x + y * y + z * z > 1e-3)
        .prop_map(|(w, x, y, z)| UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z)))
}

fn pose() -> impl Strategy<Value = Pose> {
    (vec3(0.5), unit_quat()).prop_map(|(p, q)| Pose::new(p, q))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn rotation_distance_is_bounded_symmetric_and_sign_blind(a in unit_quat(), b in unit_quat()) {
        let d = unit_rotation_distance(&a, &b);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&d));
        prop_assert!((d - unit_rotation_distance(&b, &a)).abs() < 1e-12);
        let neg = -b.into_inner();
        prop_assert!((rotation_distance(&a.into_inner(), &neg).unwrap() - d).abs() < 1e-12);
    }

    #[test]
    fn clamped_commands_stay_in_the_box(u in vec3(1.0), range in 0.001..0.1f64) {
        let c = clamp_command(&u, range);
        prop_assert!(c.amax() <= range);
        for i in 0..3 {
            if u[i].abs() <= range {
                prop_assert_eq!(c[i], u[i]);
            }
        }
    }

    #[test]
    fn free_end_effector_tracks_any_command(u in vec3(0.03), ee in vec3(0.3)) {
        let params = MpcParams::simulation().dynamics;
        let state = SystemState::new(Pose::from_translation(Vector3::new(1.0, 1.0, 0.05)), ee + Vector3::new(0.0, 0.0, 0.5));
        let r = comfree_step(&state, &u, &params, cube(), &Scene::default(), &Wrench::default()).unwrap();
        prop_assert!(r.contacts.iter().all(|c| c.pair != BodyPair::EeObject));
        prop_assert!((r.next_state.ee_position - state.ee_position - u).amax() < 1e-12);
    }

    #[test]
    fn goal_flow_is_invariant_to_a_shared_world_motion(current in pose(), target in pose(), shift in pose()) {
        let object = cube();
        let scene = Scene::default();
        let a = build_observation(&SystemState::new(current, Vector3::zeros()), object, &target, &scene);
        let b = build_observation(
            &SystemState::new(shift.compose(&current), Vector3::zeros()),
            object,
            &shift.compose(&target),
            &scene,
        );
        for (x, y) in a.goal_flow.iter().zip(&b.goal_flow) {
            prop_assert!((x - y).norm() < 1e-9);
        }
        prop_assert_eq!(&a.keypoints, &b.keypoints);
    }

    #[test]
    fn infeasible_reward_is_exactly_the_penalty(flow in 0.0..10.0f64, at_target: bool) {
        let w = RewardWeights { w1: 0.1, w2: 5.0, w3: 1.0 };
        prop_assert_eq!(compute_reward(flow, at_target, true, &w), -1.0);
        prop_assert!(compute_reward(flow, false, false, &w) <= 0.0);
    }

    #[test]
    fn intention_indices_validate_by_range(k in 0usize..300, p in 0usize..7, o in 0usize..7) {
        let ok = ContactIntention::new(k, p, o).is_ok();
        prop_assert_eq!(ok, k < 256 && p < W_POS.len() && o < W_ORI.len() && (p, o) != (0, 0));
    }
}

#[test]
fn weight_pairs_are_the_admissible_grid() {
    let pairs = admissible_weight_pairs();
    assert_eq!(pairs.len(), 24);
    assert!(!pairs.contains(&(0, 0)));
    let mut sorted = pairs.clone();
    sorted.sort();
    assert_eq!(sorted, pairs);
}
