//! Benchmark fixtures shared by the `kernels` bench target.

use sweuler::model::{ModelSpec, Preset, PresetParams};

pub fn preset(p: Preset, alpha: Option<f64>, dim: Option<usize>) -> ModelSpec {
    ModelSpec::preset(
        p,
        &PresetParams {
            alpha,
            dim,
            ..Default::default()
        },
    )
    .expect("preset parameters are valid")
}
