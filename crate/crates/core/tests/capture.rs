use dslf_core::camera::{intrinsics_from_fov, CameraPose};
use dslf_core::mesh::Mesh;
use dslf_core::raycast;
use dslf_core::renderer;
use dslf_core::synth::*;
use dslf_core::{Vec2, Vec3};

fn single_triangle_scene() -> Scene {
    let mesh = Mesh::new(
        vec![
            Vec3::new(-0.5, -0.4, 0.0),
            Vec3::new(0.5, -0.4, 0.0),
            Vec3::new(0.0, 0.5, 0.0),
        ],
        vec![Vec3::z(); 3],
        vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.5, 1.0),
        ],
        vec![[0, 1, 2]],
    )
    .unwrap();
    let cfg = SceneConfig::glossy_sphere(0);
    Scene {
        name: "triangle".into(),
        mesh,
        materials: cfg.materials.clone(),
        assignment: Assignment::Uniform,
        vertex_material: vec![0; 3],
        lights: cfg.lights.clone(),
        ambient: Vec3::from(cfg.ambient),
    }
}

#[test]
fn one_triangle_one_camera_gives_three_samples() {
    let scene = single_triangle_scene();
    let cam = CameraPose::look_at(
        Vec3::new(0.0, -0.5, 3.0),
        Vec3::zeros(),
        Vec3::y(),
        intrinsics_from_fov(0.8, 32, 32),
        32,
        32,
    );
    let cap = capture_dataset(&scene, &[cam]);
    assert_eq!(cap.dataset.samples.len(), 3);
    assert_eq!(cap.samples_per_camera, vec![3]);
    let ids: Vec<u32> = cap.dataset.samples.iter().map(|s| s.vertex_id).collect();
    assert_eq!(ids, vec![0, 1, 2]);
}

#[test]
fn zbuffer_visibility_matches_ray_casting_on_a_torus() {
    let mesh = torus(1.0, 0.35, 32, 16).unwrap();
    let rig = RigParams {
        radius: 3.5,
        width: 96,
        height: 96,
        ..RigParams::default()
    };
    let mut disagreements = Vec::new();
    let mut visible = 0;
    for (ci, cam) in ring_rig(8, 0.5, &rig).iter().enumerate() {
        let buf = renderer::rasterize(&mesh, cam, false);
        let vis = renderer::visible_vertices(&mesh, cam, &buf);
        for v in 0..mesh.vertex_count() {
            // behind the silhouette a sliver face can hide a vertex without
            // owning any nearby pixel; those samples are dropped as back-facing
            let d = cam.center() - mesh.positions()[v];
            if mesh.normals()[v].dot(&d) <= 0.0 {
                continue;
            }
            let truth = raycast::vertex_visible(&mesh, cam, v);
            visible += truth as usize;
            if vis[v] != truth {
                disagreements.push((ci, v));
            }
        }
    }
    assert!(visible > 1000);
    assert!(disagreements.is_empty(), "{disagreements:?}");
}

#[test]
fn sample_colors_are_the_observed_radiance() {
    let scene = make_scene(&SceneConfig::glossy_sphere(2)).unwrap();
    let cams = ring_rig(5, 0.35, &RigParams::default());
    let cap = capture_dataset(&scene, &cams);
    assert_eq!(
        cap.dataset.samples.len(),
        cap.samples_per_camera.iter().sum::<usize>()
    );
    for s in &cap.dataset.samples {
        let cam = &cams[s.camera.unwrap() as usize];
        let d = (cam.center() - scene.mesh.positions()[s.vertex_id as usize]).normalize();
        assert_eq!(
            s.rgb,
            observe_rgb(scene.vertex_radiance(s.vertex_id as usize, &d))
        );
        assert_eq!(s.direction, [d.x as f32, d.y as f32, d.z as f32]);
    }
}

#[test]
fn frame_pixels_at_vertices_match_their_samples() {
    let scene = make_scene(&SceneConfig::glossy_sphere(4)).unwrap();
    let rig = RigParams {
        width: 200,
        height: 200,
        ..RigParams::default()
    };
    let cams = ring_rig(3, 0.2, &rig);
    let cap = capture_dataset(&scene, &cams);
    let mut checked = 0;
    for s in &cap.dataset.samples {
        let ci = s.camera.unwrap() as usize;
        let cam = &cams[ci];
        let v = s.vertex_id as usize;
        let px = cam.project(&scene.mesh.positions()[v]).unwrap();
        let (x, y) = (px.x.round(), px.y.round());
        let d = (cam.center() - scene.mesh.positions()[v]).normalize();
        // well inside the silhouette and close to a pixel center
        if (px - Vec2::new(x, y)).norm() > 0.2 || scene.mesh.normals()[v].dot(&d) < 0.3 {
            continue;
        }
        let pixel = cap.images[ci].get(x as u32, y as u32);
        for c in 0..3 {
            assert!(
                (pixel[c] - s.rgb[c] as f64).abs() <= 2.0 / 255.0,
                "vertex {v} camera {ci}"
            );
        }
        checked += 1;
    }
    assert!(checked > 100, "{checked}");
}
