use std::collections::BTreeSet;

use nalgebra::{Rotation3, Vector3};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use shforge_core::body_model::{
    apply_shape, forward_kinematics, regress_joints, skin, toy_model, PoseFrame, RigidTransform,
    ShapeCoefficients, NUM_JOINTS,
};
use shforge_core::camera::{place_camera, Camera, CameraIntrinsics};
use shforge_core::ground_truth::{joints_annotation, DepthQuantization};
use shforge_core::metrics::{depth_rmse, segm_metrics, st_rmse};
use shforge_core::raster::Raster;
use shforge_core::scene_sampler::{sample_scene, AssetBanks, AssetCatalog, TextureSet};
use shforge_core::splitter::{assign_split_units, Split, SplitUnit};

fn vec3(r: f64) -> impl Strategy<Value = Vector3<f64>> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

fn beta() -> impl Strategy<Value = [f64; 10]> {
    prop::array::uniform10(-3.0f64..3.0)
}

fn pose() -> impl Strategy<Value = PoseFrame> {
    (prop::collection::vec(vec3(1.0), NUM_JOINTS), vec3(2.0)).prop_map(|(rot, t)| {
        let mut p = PoseFrame::identity(NUM_JOINTS);
        p.joint_rotations = rot;
        p.root_translation = t;
        p
    })
}

fn rel(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shape_is_linear(b1 in beta(), b2 in beta(), a in -0.5f64..0.5, b in -0.5f64..0.5) {
        let model = toy_model();
        let t = model.template_vertices();
        let mix: [f64; 10] = std::array::from_fn(|k| a * b1[k] + b * b2[k]);
        let v1 = apply_shape(&model, &ShapeCoefficients::new(b1).unwrap());
        let v2 = apply_shape(&model, &ShapeCoefficients::new(b2).unwrap());
        let vm = apply_shape(&model, &ShapeCoefficients::new(mix).unwrap());
        for i in 0..t.len() {
            let expected = t[i] + (v1[i] - t[i]) * a + (v2[i] - t[i]) * b;
            prop_assert!((vm[i] - expected).norm() <= 1e-9);
        }
    }

    #[test]
    fn identity_transforms_skin_exactly(b in beta()) {
        let model = toy_model();
        let rest = apply_shape(&model, &ShapeCoefficients::new(b).unwrap());
        let ident = vec![RigidTransform::identity(); NUM_JOINTS];
        prop_assert_eq!(skin(&model, &rest, &ident), rest);
    }

    #[test]
    fn identity_pose_gives_identity_transforms(b in beta()) {
        let model = toy_model();
        let rest = apply_shape(&model, &ShapeCoefficients::new(b).unwrap());
        let joints = regress_joints(&model, &rest);
        let fk = forward_kinematics(&joints, &PoseFrame::identity(NUM_JOINTS), model.parents());
        prop_assert!(fk.iter().all(|t| *t == RigidTransform::identity()));
    }

    #[test]
    fn skinning_is_rigid_equivariant(p in pose(), axis in vec3(2.0), shift in vec3(3.0)) {
        let model = toy_model();
        let rest = model.template_vertices().to_vec();
        let joints = regress_joints(&model, &rest);
        let fk = forward_kinematics(&joints, &p, model.parents());
        let g = RigidTransform { rotation: *Rotation3::new(axis).matrix(), translation: shift };
        let moved: Vec<RigidTransform> = fk.iter().map(|t| g.compose(t)).collect();
        let a = skin(&model, &rest, &fk);
        let b = skin(&model, &rest, &moved);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(rel(&g.apply(x), y) <= 1e-6);
        }
    }

    #[test]
    fn joint_regression_commutes_with_translation(shift in vec3(10.0)) {
        let model = toy_model();
        let rest = model.template_vertices();
        let moved: Vec<_> = rest.iter().map(|v| v + shift).collect();
        let a = regress_joints(&model, rest);
        let b = regress_joints(&model, &moved);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x + shift - y).norm() <= 1e-9);
        }
    }

    #[test]
    fn scene_bounds_hold_for_every_draw(seed in any::<u64>(), idx in any::<u64>()) {
        let banks = AssetBanks::procedural(8, 8);
        let s = sample_scene(seed, idx, &banks);
        prop_assert_eq!(&s, &sample_scene(seed, idx, &banks));
        prop_assert!(s.light.iter().all(|c| c.abs() <= 0.7));
        prop_assert!((0.5..=0.7).contains(&s.light[0]));
        prop_assert!(s.camera_distance > 0.0);
        prop_assert!((0.0..std::f64::consts::TAU).contains(&s.camera_yaw));
        prop_assert!(s.texture_id < banks.textures.len());
        prop_assert!(s.background_id < banks.backgrounds.len());
        prop_assert_eq!(s.texture_set, banks.textures[s.texture_id].set);
    }

    #[test]
    fn depth_roundtrip_and_monotone(pelvis in 2.0f64..20.0, off in -0.4275f64..0.4275, step in 0.0f64..0.2) {
        let q = DepthQuantization::default();
        let z = pelvis + off;
        let label = q.label(z, pelvis);
        prop_assert!((q.dequantize(label).unwrap() - off).abs() <= 0.0225 + 1e-12);
        prop_assert!(q.label(z + step, pelvis) >= label);
    }

    #[test]
    fn joint_annotation_matches_projection(joints in prop::collection::vec(vec3(1.5), 1..24),
                                           distance in 1.0f64..15.0, yaw in 0.0f64..std::f64::consts::TAU) {
        let camera = Camera {
            intrinsics: CameraIntrinsics::default_for(320, 240).unwrap(),
            pose: place_camera(&Vector3::zeros(), distance, yaw),
        };
        let ann = joints_annotation(&joints, &camera);
        for (i, j) in joints.iter().enumerate() {
            let p = camera.project(j);
            prop_assert_eq!(ann.behind_camera[i], p.behind_camera);
            if !p.behind_camera {
                prop_assert!((ann.joints2d[i][0] - p.u).abs() <= 1e-9);
                prop_assert!((ann.joints2d[i][1] - p.v).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn st_rmse_never_exceeds_rmse(pairs in prop::collection::vec((0u8..=19, 1u8..=19), 1..64)) {
        let q = DepthQuantization::default();
        let n = pairs.len() as u32;
        let pred = Raster::from_vec(n, 1, 1, pairs.iter().map(|p| p.0).collect()).unwrap();
        let gt = Raster::from_vec(n, 1, 1, pairs.iter().map(|p| p.1).collect()).unwrap();
        prop_assert!(st_rmse(&pred, &gt, &q).unwrap() <= depth_rmse(&pred, &gt, &q).unwrap());
    }

    #[test]
    fn segm_metrics_ignore_pixel_order(pairs in prop::collection::vec((0u8..=14, 0u8..=14), 1..64),
                                       seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut shuffled = pairs.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let maps = |v: &[(u8, u8)]| {
            let n = v.len() as u32;
            (
                Raster::from_vec(n, 1, 1, v.iter().map(|p| p.0).collect()).unwrap(),
                Raster::from_vec(n, 1, 1, v.iter().map(|p| p.1).collect()).unwrap(),
            )
        };
        let (p1, g1) = maps(&pairs);
        let (p2, g2) = maps(&shuffled);
        prop_assert_eq!(segm_metrics(&p1, &g1).unwrap(), segm_metrics(&p2, &g2).unwrap());
    }

    #[test]
    fn split_is_subject_and_asset_disjoint(
        sizes in prop::collection::vec(1usize..50, 2..40),
        target in 0.1f64..0.5,
        seed in any::<u64>(),
    ) {
        let names: Vec<(String, String)> =
            (0..sizes.len()).map(|i| (format!("s{i}"), format!("s{i}_00"))).collect();
        let units: Vec<SplitUnit> = names
            .iter()
            .zip(&sizes)
            .map(|((s, q), &f)| SplitUnit { subject_id: s, sequence_id: q, frames: 100 * f, action_tags: &[] })
            .collect();
        let catalog = AssetCatalog {
            texture_sets: [vec![TextureSet::CaesarLike; 3], vec![TextureSet::ClothedLike; 12]].concat(),
            backgrounds: 7,
            shapes: 0,
        };
        let split = assign_split_units(&units, &catalog, target, seed).unwrap();
        prop_assert_eq!(split.subjects.len(), sizes.len());
        let sides: BTreeSet<Split> = split.subjects.values().copied().collect();
        prop_assert_eq!(sides.len(), 2);
        let train = split.pool(Split::Train, &catalog);
        let test = split.pool(Split::Test, &catalog);
        prop_assert!(train.textures.iter().all(|t| !test.textures.contains(t)));
        prop_assert!(train.backgrounds.iter().all(|b| !test.backgrounds.contains(b)));
        let total: usize = sizes.iter().sum();
        let test_frames: usize = sizes
            .iter()
            .enumerate()
            .filter(|(i, _)| split.split_of(&format!("s{i}")) == Some(Split::Test))
            .map(|(_, s)| s)
            .sum();
        prop_assert!((split.achieved_test_fraction - test_frames as f64 / total as f64).abs() < 1e-12);
    }
}

#[test]
fn split_fraction_within_tolerance_for_fine_subjects() {
    // Forty equal subjects: any target is reachable to within 2.5%.
    let names: Vec<(String, String)> = (0..40)
        .map(|i| (format!("s{i}"), format!("s{i}_00")))
        .collect();
    let units: Vec<SplitUnit> = names
        .iter()
        .map(|(s, q)| SplitUnit {
            subject_id: s,
            sequence_id: q,
            frames: 500,
            action_tags: &[],
        })
        .collect();
    let catalog = AssetCatalog {
        texture_sets: vec![TextureSet::ClothedLike; 10],
        backgrounds: 5,
        shapes: 0,
    };
    for seed in 0..50 {
        for target in [0.1, 0.183, 0.2, 0.3] {
            let s = assign_split_units(&units, &catalog, target, seed).unwrap();
            assert!(
                (s.achieved_test_fraction - target).abs() <= 0.03,
                "{seed} {target}"
            );
        }
    }
}

/// Kolmogorov–Smirnov distance of the yaw draws from U[0, 2π).
#[test]
fn yaw_is_uniform() {
    let banks = AssetBanks::procedural(8, 8);
    let n = 10_000;
    let mut yaws: Vec<f64> = (0..n)
        .map(|i| sample_scene(31, i, &banks).camera_yaw)
        .collect();
    yaws.sort_by(f64::total_cmp);
    let tau = std::f64::consts::TAU;
    let ks = yaws
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let f = y / tau;
            (f - i as f64 / n as f64)
                .abs()
                .max(((i + 1) as f64 / n as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    assert!(ks <= 0.02, "KS {ks}");
}

#[test]
fn sampled_shapes_follow_truncated_normal() {
    let banks = AssetBanks::procedural(8, 8);
    let n = 10_000;
    let (mut s1, mut s2) = ([0.0; 10], [0.0; 10]);
    for i in 0..n {
        let b = sample_scene(77, i, &banks).shape;
        for (k, &v) in b.values().iter().enumerate() {
            assert!(v.abs() <= 3.0);
            s1[k] += v;
            s2[k] += v * v;
        }
    }
    // Variance of N(0,1) truncated to ±3 is 1 − 6φ(3)/(1 − 2Φ(−3)) ≈ 0.9733.
    for k in 0..10 {
        let mean = s1[k] / n as f64;
        let var = s2[k] / n as f64 - mean * mean;
        assert!(mean.abs() < 0.04, "component {k} mean {mean}");
        assert!((var - 0.9733).abs() < 0.05, "component {k} variance {var}");
    }
}

#[test]
fn vertical_light_is_biased_upward() {
    let banks = AssetBanks::procedural(8, 8);
    let n = 10_000;
    let mean = (0..n)
        .map(|i| sample_scene(5, i, &banks).light[1])
        .sum::<f64>()
        / n as f64;
    assert!(mean > 0.2, "mean vertical coefficient {mean}");
}
