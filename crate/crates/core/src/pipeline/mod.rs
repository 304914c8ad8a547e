//! Scene configuration, the outer reconstruction loop, evaluation, benchmarking and export of
//! synthetic scenes.

mod benchmark;
mod config;
mod evaluate;
mod export;
mod reconstruct;

pub use benchmark::{preset_solver_config, run_benchmark, BenchmarkCell, BenchmarkTable};
pub use config::{
    BoundsConfig, CameraConfig, LightConfig, OutputConfig, Pairing, SceneConfig, SolverConfig, ViewConfig,
    SCHEMA_VERSION,
};
pub use evaluate::{evaluate, write_json, write_outputs, Evaluation};
pub use export::{write_scene, GROUND_TRUTH_FILE, INITIAL_FILE, SCENE_FILE};
pub use reconstruct::{
    eikonal_fraction, reconstruct, Assembly, Inputs, MeshStats, Reconstruction, Reconstructor, RoundRecord, RunReport,
    StopReason,
};
