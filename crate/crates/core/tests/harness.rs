use endorecon_core::bvh::ray_triangle;
use endorecon_core::phantom::*;
use endorecon_core::*;
use nalgebra::UnitQuaternion;

fn k_small() -> CameraIntrinsics {
    CameraIntrinsics::new(40.0, 40.0, 40.0, 32.0, 80, 64).unwrap()
}

#[test]
fn cylinder_is_closed_with_prism_volume() {
    let (r, len, n) = (10.0, 50.0, 64);
    let mesh = generate_phantom(&PhantomSpec::cylinder(len, r, 20, n)).unwrap();
    let report = mesh.check_watertight();
    assert!(report.is_watertight, "{report:?}");
    assert_eq!(report.connected_component_count, 1);
    let prism = 0.5 * n as f64 * r * r * (std::f64::consts::TAU / n as f64).sin() * len;
    assert!((mesh.signed_volume().abs() - prism).abs() < 1e-9 * prism);
    let pi = std::f64::consts::PI;
    assert!((mesh.signed_volume().abs() / (pi * r * r * len) - 1.0).abs() < 0.01);
}

#[test]
fn default_phantom_is_closed_and_deterministic() {
    let spec = PhantomSpec::default();
    let a = generate_phantom(&spec).unwrap();
    assert!(a.check_watertight().is_watertight);
    assert_eq!(a, generate_phantom(&spec).unwrap());
    let other = generate_phantom(&PhantomSpec { seed: 8, ..spec }).unwrap();
    assert_ne!(a.vertices, other.vertices);
}

#[test]
fn two_frame_trajectory_in_straight_cylinder() {
    let spec = PhantomSpec::cylinder(100.0, 10.0, 20, 32);
    let poses = generate_trajectory(&spec, 2).unwrap();
    assert_eq!(poses.len(), 2);
    for p in &poses {
        let c = p.center();
        assert!(c.x.abs() < 1e-12 && c.y.abs() < 1e-12);
        assert!((p.optical_axis() - Vec3::z()).norm() < 1e-12);
    }
}

#[test]
fn trajectory_stays_clear_of_the_wall() {
    let phantom = Phantom::new(PhantomSpec::default()).unwrap();
    let mesh = phantom.mesh();
    let poses = phantom.trajectory(60).unwrap();
    assert_eq!(poses, phantom.trajectory(60).unwrap());
    let centers: Vec<Vec3> = poses.iter().map(|p| p.center()).collect();
    let d = point_to_mesh(&centers, &mesh).unwrap().per_point.unwrap();
    let len = phantom.spec().length;
    for (c, d) in centers.iter().zip(d) {
        // local radius at the nearest axis point
        let s = (0..=1200)
            .map(|i| len * i as f64 / 1200.0)
            .min_by(|a, b| (phantom.axis(*a).point - c).norm().total_cmp(&(phantom.axis(*b).point - c).norm()))
            .unwrap();
        assert!(d >= 0.5 * phantom.base_radius(s), "distance {d} at s = {s}");
    }
}

#[test]
fn perpendicular_ray_hits_at_radius() {
    let r = 10.0;
    let spec = PhantomSpec::cylinder(40.0, r, 20, 32);
    let mesh = generate_phantom(&spec).unwrap();
    let bvh = TriangleBvh::new(&mesh).unwrap();
    // on the axis at a ring, looking at the vertex of angle 0
    let pose = RigidPose::from_axes(Vec3::y(), Vec3::z(), Vec3::x(), Vec3::new(0.0, 0.0, 20.0));
    let k = CameraIntrinsics::new(10.0, 10.0, 2.0, 2.0, 5, 5).unwrap();
    let cfg = RenderConfig { noise_sigma_rel: 0.0, ..Default::default() };
    let f = render_depth(&bvh, &pose, &k, &cfg, 0).unwrap();
    assert!((f.mean[12] - r).abs() < 1e-9);
    assert_eq!(f.stddev[12], cfg.sigma_floor);
}

#[test]
fn noiseless_depth_lies_on_the_mesh() {
    let phantom = Phantom::new(PhantomSpec::default()).unwrap();
    let mesh = phantom.mesh();
    let bvh = TriangleBvh::new(&mesh).unwrap();
    let cfg = RenderConfig { noise_sigma_rel: 0.0, ..Default::default() };
    let k = k_small();
    for (i, pose) in phantom.trajectory(6).unwrap().iter().enumerate() {
        let frame = render_depth(&bvh, pose, &k, &cfg, i as u32).unwrap();
        assert_eq!(frame.valid_count(), k.pixel_count(), "camera inside a closed mesh sees walls everywhere");
        let pts: Vec<Vec3> = frame.back_project().collect();
        let stats = point_to_mesh(&pts, &mesh).unwrap();
        assert!(stats.max < 1e-6 * mesh.extent(), "{}", stats.max);
        assert_eq!(frame, render_depth(&bvh, pose, &k, &cfg, i as u32).unwrap());
    }
}

#[test]
fn noise_is_reproducible_and_relative() {
    let phantom = Phantom::new(PhantomSpec::default()).unwrap();
    let bvh = TriangleBvh::new(&phantom.mesh()).unwrap();
    let pose = phantom.trajectory(10).unwrap()[3];
    let k = k_small();
    let clean = render_depth(&bvh, &pose, &k, &RenderConfig { noise_sigma_rel: 0.0, ..Default::default() }, 3).unwrap();
    let cfg = RenderConfig { noise_sigma_rel: 0.01, seed: 11, ..Default::default() };
    let a = render_depth(&bvh, &pose, &k, &cfg, 3).unwrap();
    assert_eq!(a, render_depth(&bvh, &pose, &k, &cfg, 3).unwrap());
    assert_ne!(a.mean, render_depth(&bvh, &pose, &k, &cfg, 4).unwrap().mean);
    let z: Vec<f64> = a.mean.iter().zip(&clean.mean).map(|(m, c)| (m - c) / (0.01 * c)).collect();
    let mean = z.iter().sum::<f64>() / z.len() as f64;
    let var = z.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / z.len() as f64;
    assert!(mean.abs() < 0.05 && (var - 1.0).abs() < 0.08, "{mean} {var}");
    for (s, c) in a.stddev.iter().zip(&clean.mean) {
        assert!((s - (0.01 * c).max(1e-3)).abs() < 1e-12);
    }
    let scaled = render_depth(&bvh, &pose, &k, &RenderConfig { depth_scale: 0.5, ..cfg }, 3).unwrap();
    for (m, n) in scaled.mean.iter().zip(&a.mean) {
        assert!((m - 0.5 * n).abs() < 1e-12);
    }
}

#[test]
fn sparse_points_are_on_the_mesh_and_visible() {
    let phantom = Phantom::new(PhantomSpec::default()).unwrap();
    let mesh = phantom.mesh();
    let bvh = TriangleBvh::new(&mesh).unwrap();
    let poses = phantom.trajectory(20).unwrap();
    let k = k_small();
    let cloud = sample_sparse(&mesh, &bvh, &poses, &k, 500, 4).unwrap();
    assert_eq!(cloud.len(), 500);
    assert_eq!(cloud, sample_sparse(&mesh, &bvh, &poses, &k, 500, 4).unwrap());
    let d = point_to_mesh(&cloud.points, &mesh).unwrap();
    assert!(d.max < 1e-9);
    for (p, vis) in cloud.points.iter().zip(&cloud.visibility) {
        assert!(vis.len() >= 2);
        for &f in vis {
            let pc = poses[f as usize].inverse_transform_point(p);
            assert!(pc.z > 0.0);
            let px = k.project(&pc).unwrap();
            assert!(k.nearest_pixel(&px).is_some());
        }
    }
}

#[test]
fn occluded_wall_is_never_sampled() {
    // a strongly bent tube hides the far side of the bend from early poses
    let spec = PhantomSpec {
        radii: vec![10.0],
        bump_amplitude: 0.0,
        bend_angle: 1.4,
        axial_segments: 48,
        angular_segments: 24,
        ..Default::default()
    };
    let phantom = Phantom::new(spec).unwrap();
    let mesh = phantom.mesh();
    let bvh = TriangleBvh::new(&mesh).unwrap();
    let poses = phantom.trajectory(8).unwrap();
    let k = k_small();
    let cloud = sample_sparse(&mesh, &bvh, &poses, &k, 300, 1).unwrap();
    for (p, vis) in cloud.points.iter().zip(&cloud.visibility) {
        for &f in vis {
            let c = poses[f as usize].center();
            let blocked = (0..mesh.triangles.len()).any(|t| {
                let [a, b, cc] = mesh.triangle(t);
                ray_triangle(&c, &(p - c), &a, &b, &cc).is_some_and(|t| t > 0.0 && t < 1.0 - 1e-9)
            });
            assert!(!blocked, "point {p:?} occluded from frame {f}");
        }
    }
    // and some wall is hidden from the first pose
    let hidden = mesh.sample_surface(2000, &mut <rand::rngs::SmallRng as rand::SeedableRng>::seed_from_u64(3));
    let first = poses[0];
    let occluded = hidden
        .iter()
        .filter(|p| {
            let c = first.center();
            matches!(bvh.intersect_ray(&c, &(*p - c), 0.0), Some(h) if h.t < 1.0 - 1e-6)
        })
        .count();
    assert!(occluded > 0);
}

#[test]
fn renderer_rejects_bad_input() {
    let mesh = generate_phantom(&PhantomSpec::cylinder(10.0, 2.0, 16, 16)).unwrap();
    let bvh = TriangleBvh::new(&mesh).unwrap();
    let k = k_small();
    let bad = RigidPose::new(UnitQuaternion::identity(), Vec3::new(f64::NAN, 0.0, 0.0));
    assert_eq!(render_depth(&bvh, &bad, &k, &RenderConfig::default(), 0), Err(Error::InvalidPose));
    let pose = RigidPose::new(UnitQuaternion::identity(), Vec3::new(0.0, 0.0, 5.0));
    let cfg = RenderConfig { depth_scale: 0.0, ..Default::default() };
    assert_eq!(render_depth(&bvh, &pose, &k, &cfg, 0), Err(Error::NonPositiveScale));
    // outside the mesh, looking away: nothing visible
    let away = RigidPose::new(UnitQuaternion::identity(), Vec3::new(0.0, 0.0, 50.0));
    assert_eq!(sample_sparse(&mesh, &bvh, &[away, away], &k, 10, 0), Err(Error::NoVisibleSurface));
    assert!(render_depth(&bvh, &away, &k, &RenderConfig::default(), 0).unwrap().valid_count() == 0);
}
