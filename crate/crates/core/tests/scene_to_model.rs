use std::collections::BTreeMap;

use brownfield_core::clustering::{cluster_class_detailed, count_mistakes, ClusterParams, Method};
use brownfield_core::export::{parse_aml, write_aml, PoseSource, SceneModel};
use brownfield_core::geometry::PointCloud;
use brownfield_core::pose::{estimate_all, match_poses, PoseParams};
use brownfield_core::scene::{generate_scene, sample_reference, Class, GroundTruth, SceneSpec};

fn labeled_scene(spec: &SceneSpec) -> (PointCloud, GroundTruth) {
    let (cloud, truth) = generate_scene(spec).unwrap();
    let cloud = PointCloud::with_labels(cloud.points().to_vec(), truth.labels.clone()).unwrap();
    (cloud, truth)
}

#[test]
fn two_car_scene_poses_match_ground_truth() {
    let spec = SceneSpec { seed: 21, classes: vec![Class::Car, Class::Floor], ..SceneSpec::default() };
    let (cloud, truth) = labeled_scene(&spec);
    let refs: BTreeMap<_, _> = [(Class::Car, sample_reference(Class::Car, spec.points_per_m2).unwrap())].into();
    let est = estimate_all(&cloud, &[Class::Car], &refs, Method::Optics, &ClusterParams::default(), &PoseParams::default())
        .unwrap();
    assert!(est.failures.is_empty(), "{:?}", est.failures);
    let true_cars = truth.poses_of(Class::Car);
    assert_eq!(est.poses.len(), true_cars.len());
    for (i, j) in match_poses(&est.poses, &true_cars) {
        let d = est.poses[i].deviation(&true_cars[j]);
        assert!(d[..3].iter().all(|&v| v <= 25.0) && d[3..].iter().all(|&v| v <= 0.5), "{d:?}");
    }
}

#[test]
fn missing_class_yields_no_poses() {
    let spec = SceneSpec { seed: 2, classes: vec![Class::Floor, Class::Wall], ..SceneSpec::default() };
    let (cloud, _) = labeled_scene(&spec);
    let refs: BTreeMap<_, _> = [(Class::Car, sample_reference(Class::Car, 50.0).unwrap())].into();
    let est = estimate_all(&cloud, &[Class::Car], &refs, Method::Optics, &ClusterParams::default(), &PoseParams::default())
        .unwrap();
    assert!(est.poses.is_empty() && est.failures.is_empty());
}

#[test]
fn density_methods_separate_cars_and_hangers() {
    for seed in 0..3 {
        let spec = SceneSpec { seed, occlusion_fraction: 0.0, ..SceneSpec::default() };
        let (cloud, truth) = labeled_scene(&spec);
        for class in [Class::Car, Class::Hanger] {
            for method in [Method::Dbscan, Method::Optics] {
                let c = cluster_class_detailed(&cloud, class.index() as u32, method, &ClusterParams::default()).unwrap();
                let ids: Vec<u32> = c.indices.iter().map(|&i| truth.instances[i]).collect();
                assert_eq!(c.assignment.n_clusters, 2, "seed {seed} {class} {method}");
                assert_eq!(count_mistakes(&c.assignment, &ids), 0, "seed {seed} {class} {method}");
            }
        }
    }
}

#[test]
fn ground_truth_manifest_round_trips_through_a_file() {
    let (_, truth) = generate_scene(&SceneSpec { seed: 4, ..SceneSpec::default() }).unwrap();
    let model = SceneModel::from_ground_truth("tact-4", &truth);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("truth.aml");
    write_aml(&model, &path).unwrap();
    let back = parse_aml(&path).unwrap();
    assert_eq!(back, model);
    assert!(back.objects.iter().all(|o| o.source == PoseSource::GroundTruth));
    assert_eq!(back.objects.len(), truth.objects.len());
}

#[test]
fn unwritable_path_is_an_io_error() {
    let err = write_aml(&SceneModel::new("x"), "/nonexistent-dir/sub/model.aml").unwrap_err();
    assert!(matches!(err, brownfield_core::error::Error::Io(_)), "{err:?}");
}
