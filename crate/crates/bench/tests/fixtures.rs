use denoise_bench::{raycast_fixture, scene_fixture};
use denoise_core::ppcg::{rc_ppcg_frame, PpcgConfig};

#[test]
fn probe_rays_mostly_hit_and_agree_with_naive() {
    let f = raycast_fixture(200);
    let mut hits = 0;
    for r in &f.rays {
        let a = f.bvh.cast_ray(&f.mesh, r);
        let b = f.mesh.cast_ray_naive(r);
        assert_eq!(a.map(|h| h.t), b.map(|h| h.t));
        hits += usize::from(a.is_some());
    }
    assert!(hits > 100, "{hits} of 200 rays hit");
}

#[test]
fn scene_fixture_has_boxes_and_points() {
    let s = scene_fixture();
    assert_eq!(s.frame.boxes.len(), 4);
    assert!(s.frame.frame.len() > 10_000);
    let (_, sets) = rc_ppcg_frame(
        &s.frame.frame,
        &s.frame.boxes,
        &s.library,
        &s.spec,
        &PpcgConfig::default(),
    );
    assert_eq!(sets.len(), 4);
}
