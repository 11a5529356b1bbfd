//! Shared fixtures for the benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use denoise_core::geom::{Bvh, Ray, TriangleMesh};
use denoise_core::models::{LibraryFilter, ModelLibrary};
use denoise_core::procedural::{benchmark_sphere, probe_rays};
use denoise_core::sensor::{default_sensor, SensorSpec};
use denoise_core::toy::{generate_toy_scenes, toy_car_meshes, ToyFrame, ToySceneConfig};

pub const SEED: u64 = 7;

pub struct RaycastFixture {
    pub mesh: TriangleMesh,
    pub bvh: Bvh,
    pub rays: Vec<Ray>,
}

/// The 50k-triangle sphere with `n` probe rays aimed through its bounds.
pub fn raycast_fixture(n: usize) -> RaycastFixture {
    let mesh = benchmark_sphere();
    let bvh = Bvh::build(&mesh).expect("sphere has triangles");
    let rays = probe_rays(&mesh.aabb(), n, &mut ChaCha8Rng::seed_from_u64(SEED));
    RaycastFixture { mesh, bvh, rays }
}

pub struct SceneFixture {
    pub spec: SensorSpec,
    pub library: ModelLibrary,
    pub frame: ToyFrame,
}

/// One toy KITTI frame with its boxes and the procedural CAD library.
pub fn scene_fixture() -> SceneFixture {
    let spec = default_sensor("kitti").expect("kitti is built in");
    let cfg = ToySceneConfig {
        frames: 1,
        cars_min: 4,
        cars_max: 4,
        seed: SEED,
        ..Default::default()
    };
    let frame = generate_toy_scenes(&cfg, &spec).remove(0);
    let library = ModelLibrary::from_meshes(toy_car_meshes(), &LibraryFilter::default())
        .expect("toy cars pass the filter");
    SceneFixture {
        spec,
        library,
        frame,
    }
}
