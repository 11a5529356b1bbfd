//! The 3D model library: CAD meshes and dense point instances, best-fit
//! selection for a pseudo box, and per-axis alignment into that box.

mod align;
mod chamfer;
mod library;
mod select;

use std::path::PathBuf;

pub use align::{align_model_to_box, PosedGeometry, PosedModel};
pub use chamfer::{chamfer_distance, directed_chamfer};
pub use library::{
    build_library, canonical_box, extract_point_models, observation_angle, save_mesh_library,
    save_point_library, LibraryFilter, LibraryKind, LibraryManifest, LibraryReport, ManifestEntry,
    MeshModel, ModelLibrary, PointModel, Rejection, ShapeModel, MIN_CANONICAL_DIM,
};
pub use select::{
    normalize_query, select_best_cad, select_best_point_model, select_by_dims, select_model,
    PointMatchConfig,
};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("model library is empty")]
    EmptyLibrary,
    #[error("no usable assets")]
    NoAssets,
    #[error("model `{0}` has a degenerate canonical box")]
    DegenerateModel(String),
    #[error("expected a {expected:?} library, found {found:?}")]
    WrongKind {
        expected: LibraryKind,
        found: LibraryKind,
    },
    #[error("duplicate model id `{0}`")]
    DuplicateId(String),
    #[error("point-model selection needs at least one query point")]
    NoQueryPoints,
    #[error("{path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("model `{id}`: {source}")]
    Geom {
        id: String,
        #[source]
        source: crate::geom::GeomError,
    },
    #[error(transparent)]
    Io(#[from] crate::io::IoError),
}
