use std::collections::BTreeSet;

use dslf_core::camera::{intrinsics_from_fov, CameraPose};
use dslf_core::dataset::{DirectionSpace, RaySample, SlfDataset};
use dslf_core::mesh::Mesh;
use dslf_core::preprocess::*;
use dslf_core::raycast;
use dslf_core::synth::*;
use dslf_core::{Vec2, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

#[test]
fn inversion_is_an_angle_preserving_involution() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10_000 {
        let n = random_unit(&mut rng);
        let d = random_unit(&mut rng);
        let r = invert_direction(&d, &n).unwrap();
        let back = invert_direction(&r.normalize(), &n).unwrap();
        assert!((back - d).norm() < 1e-12);
        assert!((r.dot(&n) - d.dot(&n)).abs() < 1e-12);
        assert!((r.norm() - 1.0).abs() < 1e-12);
        // the mirror stays in the plane spanned by d and n
        assert!(r.dot(&d.cross(&n)).abs() < 1e-12);
    }
}

#[test]
fn non_unit_vectors_are_rejected() {
    assert!(invert_direction(&Vec3::new(0.0, 0.0, 2.0), &Vec3::z()).is_err());
    assert!(invert_direction(&Vec3::z(), &Vec3::new(0.0, 0.5, 0.0)).is_err());
}

#[test]
fn mirror_aligned_views_share_an_inverted_direction() {
    // two vertices with different normals, each viewed along the mirror of the
    // same light direction, collapse onto that light direction
    let l = Vec3::new(0.2, 0.3, 0.9).normalize();
    let n1 = Vec3::new(0.0, 0.0, 1.0);
    let n2 = Vec3::new(0.3, -0.2, 1.0).normalize();
    let d1 = reflect(&l, &n1);
    let d2 = reflect(&l, &n2);
    assert!((d1 - d2).norm() > 0.1);
    let r1 = invert_direction(&d1.normalize(), &n1).unwrap();
    let r2 = invert_direction(&d2.normalize(), &n2).unwrap();
    assert!((r1 - l).norm() < 1e-12);
    assert!((r2 - l).norm() < 1e-12);
}

#[test]
fn encoding_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..2000 {
        let uv = Vec2::new(rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0));
        let d = random_unit(&mut rng);
        let row = encode_input(&uv, &d);
        assert!(row.iter().all(|v| (-1.0..=1.0).contains(v)));
        let (uv2, d2) = decode_input(&row);
        assert!((uv2 - uv).norm() < 1e-7 && (d2 - d).norm() < 1e-7);
        let r: f32 = rng.random_range(-1.0..=1.0);
        let q = encode_target(r);
        assert!((0.0..=1.0).contains(&q));
        assert!((decode_target(q) - r).abs() < 1e-7);
    }
}

#[test]
fn median_of_phong_samples_is_the_diffuse_term() {
    let m = Material {
        kd: [0.5, 0.35, 0.2],
        ks: [0.45, 0.45, 0.45],
        shininess: 200.0,
    };
    let lights = [PointLight {
        position: [0.5, 0.2, 3.0],
        intensity: [8.0; 3],
    }];
    let ambient = Vec3::new(0.05, 0.05, 0.05);
    let p = Vec3::zeros();
    let n = Vec3::z();
    let matte = Material { ks: [0.0; 3], ..m };
    let diffuse = phong_radiance(&p, &n, &Vec3::z(), &matte, &lights, &ambient);
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let obs: Vec<[f32; 3]> = (0..101)
        .map(|_| {
            let mut d = random_unit(&mut rng);
            d.z = d.z.abs();
            observe_rgb(phong_radiance(&p, &n, &d, &m, &lights, &ambient))
        })
        .collect();
    let med = diffuse_component(&obs).unwrap();
    for c in 0..3 {
        assert!(
            (med[c] as f64 - diffuse[c]).abs() < 1e-6,
            "{med:?} vs {diffuse:?}"
        );
    }
}

#[test]
fn residual_split_round_trips_bit_exactly() {
    let scene = make_scene(&SceneConfig::glossy_sphere(2)).unwrap();
    let cams = ring_rig(9, 0.3, &RigParams::default());
    let raw = capture_dataset(&scene, &cams).dataset;
    let (res, report) = to_residuals(&raw).unwrap();
    assert!(report
        .skipped
        .iter()
        .all(|&v| raw.samples.iter().all(|s| s.vertex_id != v)));
    let back = from_residuals(&res).unwrap();
    assert_eq!(back.samples, raw.samples);
    assert!(!back.residual && back.diffuse.is_none());
    let mut odd = 0;
    for idx in res.samples_by_vertex() {
        if idx.len() % 2 == 1 {
            odd += 1;
            for c in 0..3 {
                let mut ch: Vec<f32> = idx.iter().map(|&i| res.samples[i].rgb[c]).collect();
                ch.sort_by(f32::total_cmp);
                assert_eq!(ch[ch.len() / 2], 0.0);
            }
        }
    }
    assert!(odd > 10);
}

/// One sample per (camera, vertex in front of the camera and inside its image), occluded or not.
fn all_samples(mesh: &Mesh, cams: &[CameraPose]) -> SlfDataset {
    let mut samples = Vec::new();
    for (ci, cam) in cams.iter().enumerate() {
        for v in 0..mesh.vertex_count() {
            let p = mesh.positions()[v];
            match cam.project(&p) {
                Some(px) if cam.in_image(&px) => {}
                _ => continue,
            }
            let d = (cam.center() - p).normalize();
            samples.push(RaySample {
                vertex_id: v as u32,
                direction: [d.x as f32, d.y as f32, d.z as f32],
                rgb: [0.5; 3],
                camera: Some(ci as u32),
            });
        }
    }
    SlfDataset {
        mesh_ref: "test".into(),
        vertex_count: mesh.vertex_count() as u32,
        samples,
        direction_space: DirectionSpace::Raw,
        residual: false,
        diffuse: None,
    }
}

fn occluded_by_ray_casting(mesh: &Mesh, cams: &[CameraPose], ds: &SlfDataset) -> BTreeSet<usize> {
    ds.samples
        .iter()
        .enumerate()
        .filter(|(_, s)| {
            !raycast::vertex_visible(
                mesh,
                &cams[s.camera.unwrap() as usize],
                s.vertex_id as usize,
            )
        })
        .map(|(i, _)| i)
        .collect()
}

#[test]
fn convex_mesh_has_no_occlusions() {
    let mesh = icosphere(2, 1.0).unwrap();
    let cams = fibonacci_rig(6, 3, &RigParams::default());
    let mut ds = all_samples(&mesh, &cams);
    // only vertices on the camera's side of the sphere
    ds.samples.retain(|s| {
        let d = Vec3::new(
            s.direction[0] as f64,
            s.direction[1] as f64,
            s.direction[2] as f64,
        );
        mesh.normals()[s.vertex_id as usize].dot(&d) > 0.05
    });
    assert!(ds.samples.len() > 300);
    let (kept, report) = cull_occluded(&ds, &mesh, &cams).unwrap();
    assert_eq!(report.occluded, 0);
    assert_eq!(report.back_facing, 0);
    assert_eq!(kept.samples, ds.samples);
}

#[test]
fn stacked_quads_hide_the_lower_one() {
    let quad = |z: f64, half: f64| {
        Mesh::new(
            vec![
                Vec3::new(-half, -half, z),
                Vec3::new(half, -half, z),
                Vec3::new(half, half, z),
                Vec3::new(-half, half, z),
            ],
            vec![Vec3::z(); 4],
            vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(1.0, 0.0),
                Vec2::new(1.0, 1.0),
                Vec2::new(0.0, 1.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    };
    let mesh = quad(0.0, 0.5).merged(&quad(1.0, 2.0));
    let cam = CameraPose::look_at(
        Vec3::new(0.0, 0.0, 6.0),
        Vec3::zeros(),
        Vec3::y(),
        intrinsics_from_fov(1.0, 64, 64),
        64,
        64,
    );
    let ds = all_samples(&mesh, std::slice::from_ref(&cam));
    assert_eq!(ds.samples.len(), 8);
    let (kept, report) = cull_occluded(&ds, &mesh, &[cam]).unwrap();
    assert_eq!(report.occluded, 4);
    assert_eq!(report.removed, vec![0, 1, 2, 3]);
    assert!(kept.samples.iter().all(|s| s.vertex_id >= 4));
}

#[test]
fn torus_culling_matches_brute_force() {
    let mesh = torus(1.0, 0.4, 24, 12).unwrap();
    let cams = ring_rig(
        6,
        0.6,
        &RigParams {
            radius: 3.5,
            ..RigParams::default()
        },
    );
    let ds = all_samples(&mesh, &cams);
    let (_, report) = cull_occluded(&ds, &mesh, &cams).unwrap();
    let expected = occluded_by_ray_casting(&mesh, &cams, &ds);
    assert!(expected.len() > 50);
    let occluded: BTreeSet<usize> = report
        .removed
        .iter()
        .copied()
        .filter(|&i| {
            let s = &ds.samples[i];
            let n = mesh.normals()[s.vertex_id as usize];
            let d = Vec3::new(
                s.direction[0] as f64,
                s.direction[1] as f64,
                s.direction[2] as f64,
            );
            // back-facing removals that are also occluded count as occluded here
            expected.contains(&i) || n.dot(&d) >= 0.0
        })
        .collect();
    assert_eq!(report.occluded, expected.len());
    assert!(expected.is_subset(&report.removed.iter().copied().collect()));
    assert!(occluded.iter().all(|i| expected.contains(i)));
}
