//! Shared fixtures for the benchmarks.

use simpaste::buffer::CutoutBuffer;
use simpaste::eval::{BoxF, Detection};
use simpaste::synth::{synth_cutout, SynthScene};
use simpaste::{synth_scene, SynthSceneSpec};

pub fn scene(seed: u64) -> SynthScene {
    synth_scene(&SynthSceneSpec {
        n_instances: 6,
        seed,
        ..SynthSceneSpec::default()
    })
    .expect("valid spec")
}

pub fn buffer(n: usize) -> CutoutBuffer {
    CutoutBuffer::from_cutouts(
        (0..n)
            .map(|k| synth_cutout(&format!("b{k:03}"), k as u64, (25.0, 88.0)).expect("cutout"))
            .collect(),
    )
    .expect("non-empty buffer")
}

/// A grid of `n` ground-truth boxes and a jittered, partly wrong prediction
/// set with distinct confidences.
pub fn detections(n: usize) -> (Vec<Detection>, Vec<BoxF>) {
    let side = (n as f64).sqrt().ceil() as usize;
    let gts: Vec<BoxF> = (0..n)
        .map(|i| BoxF::new((i % side) as f64 * 40.0, (i / side) as f64 * 40.0, 30.0, 30.0))
        .collect();
    let preds = gts
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let shift = (i % 7) as f64;
            let b = BoxF::new(g.x_min + shift, g.y_min - shift / 2.0, g.width, g.height + shift);
            Detection::new(0, b, 1.0 - i as f64 / (2 * n) as f64).expect("confidence in range")
        })
        .collect();
    (preds, gts)
}
