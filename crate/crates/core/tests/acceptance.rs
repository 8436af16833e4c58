//! Acceptance suite: one PASS/FAIL line per criterion with its runtime and limit.
//!
//! Runs as a plain binary (`cargo test --test acceptance`). The process exits
//! successfully after reporting; set `DSLF_ACCEPTANCE_STRICT=1` to make any
//! FAIL line turn into a non-zero exit status.

use std::time::{Duration, Instant};

use dslf_core::camera::{intrinsics_from_fov, rodrigues, rotation_angle_between, CameraPose};
use dslf_core::evaluate::{
    ablation_means, run_ablation, Compression, DslfExperiment, DslfOutcome, RemeshExperiment,
    METHOD_DIFFUSE, METHOD_DSLF, METHOD_NEAREST,
};
use dslf_core::image::Image;
use dslf_core::metrics::{compression_rate, psnr, ssim};
use dslf_core::network::{
    backward, check_batch, check_params, compare_gradients, gradient_check, numeric_gradient, Arch,
    DslfNet, LrStage, TrainSchedule, CHECK_STEP,
};
use dslf_core::preprocess::{from_residuals, invert_direction, to_residuals};
use dslf_core::raycast::{first_hit, pixel_hit};
use dslf_core::registration::*;
use dslf_core::remesh::{remesh, segment_superpixels, SegmentConfig};
use dslf_core::renderer::{rasterize, render_depth, render_frame, vertex_colors, NO_FACE};
use dslf_core::synth::{self, RigParams, SceneConfig};
use dslf_core::{sha256_hex, Mat3, Vec2, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn gradient_correctness() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut nets = 0;
    for arch in [Arch::toy(true), Arch::toy(false)] {
        for seed in 0..20 {
            let params = check_params(&arch, seed).map_err(|e| e.to_string())?;
            let (x, y) = check_batch(8, 1000 + seed);
            let g = gradient_check(&arch, &params, &x, &y, 8, CHECK_STEP);
            worst = worst.max(g.max_rel_error);
            nets += 1;
        }
    }
    ensure(
        worst < 1e-3,
        format!("max relative error {worst:.2e} >= 1e-3"),
    )?;

    let arch = Arch::toy(true);
    let params = check_params(&arch, 4).map_err(|e| e.to_string())?;
    let (x, y) = check_batch(8, 4);
    let mut analytic = backward(&arch, &params, &x, &y, 8).grads;
    let numeric = numeric_gradient(&arch, &params, &x, &y, 8, CHECK_STEP);
    let (w, b) = arch.offsets()[arch.direction.len() + arch.position.len()];
    for g in &mut analytic[w..b] {
        *g *= 2.0;
    }
    let mutated = compare_gradients(&analytic, &numeric).max_rel_error;
    ensure(
        mutated > 0.3,
        format!("corrupted gradient not detected ({mutated:.2e})"),
    )?;
    Ok(format!(
        "{nets} nets, max rel error {worst:.2e}; corrupted gradient error {mutated:.2}"
    ))
}

fn separation_algebra() -> Outcome {
    let scene = synth::make_scene(&SceneConfig::glossy_sphere(3)).map_err(|e| e.to_string())?;
    let cams = synth::ring_rig(60, 20f64.to_radians(), &RigParams::default());
    let raw = synth::capture_dataset(&scene, &cams).dataset;
    let (res, _) = to_residuals(&raw).map_err(|e| e.to_string())?;
    let back = from_residuals(&res).map_err(|e| e.to_string())?;
    ensure(
        back.samples == raw.samples,
        "diffuse + residual is not bit-exact",
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut unit = || loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        if v.norm() > 0.1 && v.norm() <= 1.0 {
            return v.normalize();
        }
    };
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let (n, d) = (unit(), unit());
        let r = invert_direction(&d, &n).map_err(|e| e.to_string())?;
        let twice = invert_direction(&r.normalize(), &n).map_err(|e| e.to_string())?;
        worst = worst
            .max((twice - d).norm())
            .max((r.dot(&n) - d.dot(&n)).abs());
    }
    ensure(
        worst <= 1e-12,
        format!("involution/angle error {worst:.2e}"),
    )?;
    Ok(format!(
        "{} samples round-trip bit-exactly; 1e4 pairs within {worst:.1e}",
        raw.samples.len()
    ))
}

fn dslf_trend(outcome: &DslfOutcome) -> Outcome {
    let c = &outcome.comparison;
    let get = |m: &str| c.method(m).ok_or_else(|| format!("missing method {m}"));
    let (dslf, diffuse, nearest) = (
        get(METHOD_DSLF)?,
        get(METHOD_DIFFUSE)?,
        get(METHOD_NEAREST)?,
    );
    let detail = format!(
        "{} samples, {} iterations; PSNR/SSIM dslf {:.2}/{:.4}, diffuse {:.2}/{:.4}, nearest {:.2}/{:.4}",
        outcome.data.raw.samples.len(),
        DslfExperiment::desk(0).schedule.total_iterations(),
        dslf.psnr,
        dslf.ssim,
        diffuse.psnr,
        diffuse.ssim,
        nearest.psnr,
        nearest.ssim
    );
    let ok = dslf.psnr >= diffuse.psnr + 5.0
        && dslf.psnr > nearest.psnr
        && dslf.ssim >= diffuse.ssim
        && dslf.ssim >= nearest.ssim;
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn depth_ablation(outcome: &DslfOutcome) -> Outcome {
    let schedule = TrainSchedule {
        batch_size: 512,
        iterations_per_epoch: 1000,
        stages: vec![
            LrStage {
                epochs: 6,
                lr: 1e-4,
            },
            LrStage {
                epochs: 2,
                lr: 1e-5,
            },
        ],
        seed: 0,
    };
    let sets = vec![vec![1, 4], vec![1, 2, 4], vec![1, 2, 3, 4]];
    let rows = run_ablation(
        &outcome.data.tuples,
        &Arch::scaled(0.25),
        &sets,
        &[0, 1, 2],
        &schedule,
        0.1,
    )
    .map_err(|e| e.to_string())?;
    let means = ablation_means(&rows);
    let detail = means
        .iter()
        .map(|(l, kl)| format!("{l:?} {kl:.3e}"))
        .collect::<Vec<_>>()
        .join(", ");
    let ok = means.windows(2).all(|w| w[1].1 <= w[0].1);
    if ok {
        Ok(format!("mean holdout KL {detail}"))
    } else {
        Err(format!("mean holdout KL not non-increasing: {detail}"))
    }
}

fn look(eye: Vec3, w: u32, h: u32) -> CameraPose {
    CameraPose::look_at(
        eye,
        Vec3::zeros(),
        Vec3::z(),
        intrinsics_from_fov(0.9, w, h),
        w,
        h,
    )
}

fn cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec3> {
    (0..n)
        .map(|_| {
            Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
        })
        .collect()
}

fn registration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);

    // essential matrix
    let (a, b) = (
        look(Vec3::new(0.0, -5.0, 1.0), 640, 480),
        look(Vec3::new(2.5, -4.5, 1.5), 640, 480),
    );
    let pts = cloud(&mut rng, 40);
    let corrs: Vec<Correspondence2D2D> = pts
        .iter()
        .map(|p| Correspondence2D2D {
            x0: a.project(p).unwrap(),
            x1: b.project(p).unwrap(),
        })
        .collect();
    let est = estimate_essential(&corrs, &a.k, &b.k, &RansacConfig::default())
        .map_err(|e| e.to_string())?;
    let rel = decompose_essential(&est.e, &corrs, &a.k, &b.k).map_err(|e| e.to_string())?;
    let r_true = b.r * a.r.transpose();
    let t_true = (b.t - r_true * a.t).normalize();
    let e_err = rotation_angle_between(&rel.r, &r_true).max((rel.t - t_true).norm());
    ensure(e_err < 1e-6, format!("essential pose error {e_err:.2e}"))?;

    // P3P
    let mut p3p_worst: f64 = 0.0;
    for _ in 0..50 {
        let eye = Vec3::new(
            rng.random_range(-3.0..3.0),
            rng.random_range(-6.0..-3.0),
            rng.random_range(-2.0..2.0),
        );
        let truth = look(eye, 640, 480);
        let p = cloud(&mut rng, 3);
        let p = [p[0], p[1], p[2]];
        let px = p.map(|q| truth.project(&q).unwrap());
        let sols = solve_p3p(&p, &px, &truth.k).map_err(|e| e.to_string())?;
        let best = sols
            .iter()
            .map(|s| rotation_angle_between(&s.r, &truth.r).max((s.t - truth.t).norm()))
            .fold(f64::INFINITY, f64::min);
        p3p_worst = p3p_worst.max(best);
    }
    ensure(
        p3p_worst < 1e-8,
        format!("P3P misses ground truth by {p3p_worst:.2e}"),
    )?;

    // PnP with 40% planted outliers
    let truth = look(Vec3::new(4.0, -3.0, 1.0), 640, 640);
    let mut corrs: Vec<Correspondence2D3D> = cloud(&mut rng, 100)
        .into_iter()
        .map(|world| Correspondence2D3D {
            world,
            pixel: truth.project(&world).unwrap(),
        })
        .collect();
    let mut outliers = Vec::new();
    for (i, c) in corrs.iter_mut().enumerate() {
        if i % 5 < 2 {
            let ang: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            c.pixel += Vec2::new(ang.cos(), ang.sin()) * rng.random_range(20.0..200.0);
            outliers.push(i);
        }
    }
    let pnp = pnp_pose(&corrs, &truth.k, (640, 640), &RansacConfig::default())
        .map_err(|e| e.to_string())?;
    let expected: Vec<usize> = (0..100).filter(|i| !outliers.contains(i)).collect();
    ensure(
        pnp.inliers == expected,
        format!(
            "PnP inlier set has {} entries, expected 60",
            pnp.inliers.len()
        ),
    )?;

    // bundle adjustment from a 1 degree / 1% perturbation
    let k = intrinsics_from_fov(0.9, 640, 480);
    let poses: Vec<CameraPose> = (0..4)
        .map(|j| {
            let ang = -1.2 + 0.6 * j as f64;
            CameraPose::look_at(
                Vec3::new(5.0 * ang.sin(), -5.0 * ang.cos(), 1.0 + 0.3 * j as f64),
                Vec3::zeros(),
                Vec3::z(),
                k,
                640,
                480,
            )
        })
        .collect();
    let points = cloud(&mut rng, 40);
    let observations = poses
        .iter()
        .enumerate()
        .flat_map(|(view, pose)| {
            points
                .iter()
                .enumerate()
                .map(move |(point, p)| Observation {
                    view,
                    point,
                    pixel: pose.project(p).unwrap(),
                    weight: 1,
                })
        })
        .collect();
    let truth_state = ReconState {
        poses,
        points,
        observations,
    };
    let mut state = truth_state.clone();
    for pose in state.poses.iter_mut().skip(1) {
        let axis = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
        .normalize();
        pose.r = rodrigues(&(axis * 1f64.to_radians())) * pose.r;
        pose.t *= 1.01;
    }
    for p in state.points.iter_mut() {
        *p *= 1.0 + rng.random_range(-0.01..0.01);
    }
    let ba = bundle_adjust(&state, &BaConfig::default()).map_err(|e| e.to_string())?;
    ensure(ba.rms < 1e-6, format!("BA RMS {:.2e}", ba.rms))?;
    ensure(
        ba.trace.windows(2).all(|w| w[1] < w[0]),
        "BA accepted-step trace is not monotone",
    )?;

    // depth-assisted refinement of a 2 degree / 2% perturbation
    let mesh = synth::torus(1.0, 0.4, 48, 24).map_err(|e| e.to_string())?;
    let truth = CameraPose::look_at(
        Vec3::new(3.0, 1.0, 2.0),
        Vec3::zeros(),
        Vec3::z(),
        intrinsics_from_fov(0.8, 160, 160),
        160,
        160,
    );
    let axis = Vec3::new(0.3, -0.5, 0.8).normalize();
    let rot = rodrigues(&(axis * 2f64.to_radians()));
    let center = rot * truth.center() * 1.02;
    let r: Mat3 = truth.r * rot.transpose();
    let init = CameraPose {
        r,
        t: -(r * center),
        ..truth.clone()
    };
    let depth = render_depth(&mesh, &init);
    let mut matches = Vec::new();
    for y in (0..160u32).step_by(4) {
        for x in (0..160u32).step_by(4) {
            let z = depth.get(x, y);
            if !z.is_finite() {
                continue;
            }
            let pc = init.backproject(&Vec2::new(x as f64, y as f64), z);
            let world = init.r.transpose() * (pc - init.t);
            let acq = truth.project(&world).unwrap();
            matches.push(PixelMatch {
                rendered: [x as f64, y as f64],
                acquired: [acq.x, acq.y],
            });
        }
    }
    let refined = refine_pose_with_depth(&depth, &matches, &init, &RansacConfig::default())
        .map_err(|e| e.to_string())?;
    let refine_err = rotation_angle_between(&refined.pose.r, &truth.r);
    ensure(
        refine_err < 1e-4,
        format!("depth refinement rotation error {refine_err:.2e}"),
    )?;

    Ok(format!(
        "essential {e_err:.1e}, P3P {p3p_worst:.1e}, PnP inliers exact, BA rms {:.1e} over {} steps, refine {refine_err:.1e} rad",
        ba.rms, ba.accepted_steps
    ))
}

fn remeshing() -> Outcome {
    let n = 64u32;
    let lum: Vec<f64> = (0..n * n)
        .map(|i| {
            let (x, y) = (i % n, i / n);
            [0.1, 0.4, 0.65, 0.9][((y >= n / 2) as usize) * 2 + (x >= n / 2) as usize]
        })
        .collect();
    let seg = segment_superpixels(
        n,
        n,
        &lum,
        &SegmentConfig {
            k: 4,
            ..SegmentConfig::default()
        },
    )
    .map_err(|e| e.to_string())?;
    ensure(seg.converged, "hill climb did not terminate")?;
    ensure(
        seg.trace.windows(2).all(|w| w[1] > w[0]),
        "energy trace not strictly increasing",
    )?;
    let exact = (0..n * n)
        .all(|i| seg.labels.get(i % n, i / n) == ((i / n >= 32) as u32) * 2 + (i % n >= 32) as u32);
    ensure(exact, "quadrants not recovered exactly")?;

    let exp = RemeshExperiment::default();
    let scene = exp.scene().map_err(|e| e.to_string())?;
    let labels = exp.material_labels(&scene).map_err(|e| e.to_string())?;
    let cut = remesh(&scene.mesh, &labels).map_err(|e| e.to_string())?;
    let area = |m: &dslf_core::mesh::Mesh| (0..m.face_count()).map(|f| m.face_area(f)).sum::<f64>();
    let uv_area =
        |m: &dslf_core::mesh::Mesh| (0..m.face_count()).map(|f| m.face_uv_area(f)).sum::<f64>();
    let area_err = ((area(&cut.mesh) - area(&scene.mesh)) / area(&scene.mesh))
        .abs()
        .max(((uv_area(&cut.mesh) - uv_area(&scene.mesh)) / uv_area(&scene.mesh)).abs());
    ensure(
        cut.report.split_faces.len() > 0,
        "material boundary split no faces",
    )?;
    ensure(area_err <= 1e-9, format!("area changed by {area_err:.2e}"))?;

    let out = exp.run().map_err(|e| e.to_string())?;
    let detail = format!(
        "quadrants exact over {} moves, area error {area_err:.1e}; RMSE aware {:.4} ({} vertices) vs uniform level {} {:.4} ({} vertices); material-label remesh {:.4} ({} vertices)",
        seg.trace.len() - 1,
        out.aware_rmse,
        out.aware_vertices,
        out.uniform_level,
        out.uniform_rmse,
        out.uniform_vertices,
        out.oracle_rmse,
        out.oracle_vertices
    );
    if out.aware_rmse < out.uniform_rmse {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn renderer() -> Outcome {
    // z-buffer against ray casting
    let mesh = synth::torus(1.0, 0.35, 48, 24).map_err(|e| e.to_string())?;
    ensure(mesh.face_count() <= 5000, "test mesh too large")?;
    let cam = CameraPose::look_at(
        Vec3::new(2.5, 1.0, 2.0),
        Vec3::zeros(),
        Vec3::z(),
        intrinsics_from_fov(0.7, 96, 96),
        96,
        96,
    );
    let buf = rasterize(&mesh, &cam, false);
    let near_edge = |b: [f64; 3]| b.iter().any(|&w| w.abs() < 1e-6);
    let mut agree = 0;
    for y in 0..96u32 {
        for x in 0..96u32 {
            let i = (y * 96 + x) as usize;
            let px = Vec2::new(x as f64, y as f64);
            let ray = pixel_hit(&mesh, &cam, &px);
            let ray_bary = first_hit(&mesh, &cam.center(), &cam.pixel_ray(&px), 0.0)
                .map(|h| [h.u, h.v, 1.0 - h.u - h.v]);
            let raster = (buf.face[i] != NO_FACE).then(|| (buf.face[i], buf.depth[i]));
            let ok = match (raster, ray) {
                (None, None) => true,
                (Some((fr, zr)), Some((fh, zh))) => {
                    (fr == fh && (zr - zh).abs() <= 1e-9 * zh)
                        || (zr - zh).abs() <= 1e-7 * zh
                        || near_edge(buf.bary[i])
                        || near_edge(ray_bary.unwrap())
                }
                (Some(_), None) => near_edge(buf.bary[i]),
                (None, Some(_)) => near_edge(ray_bary.unwrap()),
            };
            ensure(ok, format!("z-buffer and ray cast disagree at ({x}, {y})"))?;
            agree += 1;
        }
    }

    // golden frame
    let scene = synth::make_scene(&SceneConfig::glossy_sphere(2)).map_err(|e| e.to_string())?;
    let net = DslfNet::init(Arch::toy(true), 7).map_err(|e| e.to_string())?;
    let diffuse = vec![[0.4f32, 0.3, 0.2]; scene.mesh.vertex_count()];
    let gcam = synth::ring_rig(
        8,
        0.3,
        &RigParams {
            width: 64,
            height: 64,
            ..RigParams::default()
        },
    )[3]
    .clone();
    let frame = render_frame(&scene.mesh, &net, &diffuse, &gcam).map_err(|e| e.to_string())?;
    let hash = sha256_hex(&frame.to_rgb8());
    ensure(
        hash == "4954b4f2d04a4262fb834641b671841224fda9db3cdb81f0e62f36b5569592b6",
        format!("golden frame hash changed: {hash}"),
    )?;

    // an overfit network reproduces its training views at the vertices
    let mut exp = DslfExperiment::desk(2);
    exp.scene = SceneConfig::glossy_sphere(1);
    exp.train_views = 6;
    let data = exp.prepare().map_err(|e| e.to_string())?;
    let schedule = TrainSchedule {
        batch_size: data.tuples.len().min(256),
        iterations_per_epoch: 2000,
        stages: vec![LrStage {
            epochs: 4,
            lr: 1e-3,
        }],
        seed: 0,
    };
    let net = DslfNet::init(Arch::scaled(0.0625), 0).map_err(|e| e.to_string())?;
    let fit = dslf_core::network::train(&net, &data.tuples, &schedule, 0.0)
        .map_err(|e| e.to_string())?
        .last;
    let mut worst: f64 = 0.0;
    for (ci, c) in exp.train_cameras().iter().enumerate() {
        let colors =
            vertex_colors(&data.scene.mesh, &fit, &data.diffuse, c).map_err(|e| e.to_string())?;
        for s in data
            .culled
            .samples
            .iter()
            .filter(|s| s.camera == Some(ci as u32))
        {
            for ch in 0..3 {
                worst = worst.max((colors[s.vertex_id as usize][ch] - s.rgb[ch] as f64).abs());
            }
        }
    }
    ensure(
        worst <= 2.0 / 255.0,
        format!("overfit deviation {:.2}/255", worst * 255.0),
    )?;
    Ok(format!(
        "{agree} pixels agree on {} faces; golden hash stable; overfit max deviation {:.2}/255",
        mesh.face_count(),
        worst * 255.0
    ))
}

fn compression(outcome: &DslfOutcome) -> Outcome {
    // 2.003 GB over 0.79 MB with decimal units
    let rate = compression_rate(2.003e9, 0.79e6).map_err(|e| e.to_string())?;
    let arithmetic = (rate - 2567.0).abs() / 2567.0;
    let c: &Compression = &outcome.compression;
    let detail = format!(
        "arithmetic {rate:.1}:1 ({:.2}% off 2567:1); desk run raw {} B vs net {} B + diffuse {} B = {:.2}:1",
        arithmetic * 100.0,
        c.raw_bytes,
        c.net_bytes,
        c.diffuse_bytes,
        c.ratio
    );
    if arithmetic <= 0.02 && c.ratio > 100.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn metric_oracles() -> Outcome {
    let a = Image::filled(32, 32, [0.5; 3]);
    let b = Image::filled(32, 32, [0.6; 3]);
    let all = vec![true; 1024];
    let p = psnr(&a, &b, &all).map_err(|e| e.to_string())?;
    ensure((p - 20.0).abs() < 1e-9, format!("closed-form PSNR {p}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut noise = |w: u32, h: u32| {
        let data = (0..w * h)
            .map(|_| [rng.random(), rng.random(), rng.random()])
            .collect();
        Image::new(w, h, data, None).unwrap()
    };
    let (x, y) = (noise(32, 32), noise(32, 32));
    let s = ssim(&x, &x, &all).map_err(|e| e.to_string())?;
    ensure(s == 1.0, format!("SSIM(a, a) = {s}"))?;

    let mask: Vec<bool> = (0..1024)
        .map(|i| (i % 32) > 8 && (i / 32) > 8 && (i % 32) < 26)
        .collect();
    let mut y2 = y.clone();
    let bg = noise(32, 32);
    for (i, px) in y2.pixels_mut().iter_mut().enumerate() {
        if !mask[i] {
            *px = bg.pixels()[i];
        }
    }
    let same =
        psnr(&x, &y, &mask) == psnr(&x, &y2, &mask) && ssim(&x, &y, &mask) == ssim(&x, &y2, &mask);
    ensure(same, "metrics changed under background mutation")?;
    Ok(format!(
        "PSNR {p:.12} dB, SSIM(a, a) = 1, masked invariance holds"
    ))
}

fn report(name: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    report_after(name, limit, Duration::ZERO, f)
}

/// Like [`report`], with `spent` of shared setup counted against the limit.
fn report_after(name: &str, limit: Duration, spent: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let result = f();
    let elapsed = start.elapsed() + spent;
    let in_time = elapsed <= limit;
    let pass = result.is_ok() && in_time;
    let detail = match &result {
        Ok(d) | Err(d) => d.clone(),
    };
    let timing = if in_time {
        String::new()
    } else {
        " OVER TIME LIMIT;".into()
    };
    println!(
        "{} {name} [{:.1}s / limit {}s]{timing} {detail}",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    pass
}

fn main() {
    let _ = env_logger::builder().is_test(true).try_init();
    let mut results = Vec::new();
    results.push(report(
        "gradient-correctness",
        Duration::from_secs(30),
        gradient_correctness,
    ));
    results.push(report(
        "separation-inversion-algebra",
        Duration::from_secs(5),
        separation_algebra,
    ));

    let start = Instant::now();
    let desk = DslfExperiment::desk(0).run();
    let desk_time = start.elapsed();
    match &desk {
        Ok(outcome) => {
            results.push(report_after(
                "dslf-desk-trend",
                Duration::from_secs(15 * 60),
                desk_time,
                || dslf_trend(outcome),
            ));
            results.push(report(
                "depth-ablation-trend",
                Duration::from_secs(30 * 60),
                || depth_ablation(outcome),
            ));
        }
        Err(e) => {
            let msg = format!("desk experiment failed: {e}");
            results.push(report_after(
                "dslf-desk-trend",
                Duration::from_secs(15 * 60),
                desk_time,
                || Err(msg.clone()),
            ));
            results.push(report(
                "depth-ablation-trend",
                Duration::from_secs(30 * 60),
                || Err(msg.clone()),
            ));
        }
    }
    results.push(report(
        "registration",
        Duration::from_secs(60),
        registration,
    ));
    results.push(report("remeshing", Duration::from_secs(120), remeshing));
    results.push(report("renderer", Duration::from_secs(120), renderer));
    match &desk {
        Ok(outcome) => results.push(report("compression", Duration::from_secs(1), || {
            compression(outcome)
        })),
        Err(e) => results.push(report("compression", Duration::from_secs(1), || {
            Err(format!("desk experiment failed: {e}"))
        })),
    }
    results.push(report(
        "metric-oracles",
        Duration::from_secs(5),
        metric_oracles,
    ));

    let passed = results.iter().filter(|&&p| p).count();
    println!("{passed}/{} criteria passed", results.len());
    let strict = std::env::var("DSLF_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && passed != results.len() {
        std::process::exit(1);
    }
}
