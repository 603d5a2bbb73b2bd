//! Desk-scale synthetic fixtures: road-like frames, steering models and a
//! ready-to-run config.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use steercov_core::imgproc::point::quantize;
use steercov_core::imgproc::Image;
use steercov_core::nn::{generator, save_model, Layer, LayerSpec, Model, Network, Tensor};
use steercov_core::rng::SplitMix64;

use crate::dataset::{LABELS_FILE, MAX_ANGLE_DEG};
use crate::error::{HarnessError, Result};

pub const FRAME_SHAPE: [usize; 3] = [24, 32, 3];
const LABEL_NOISE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub dataset: PathBuf,
    pub cnn: PathBuf,
    pub lstm: PathBuf,
    pub config: PathBuf,
}

/// A road seen from the driver's seat: sky, grass and a grey road whose
/// centre line bends by `curve ∈ [-1, 1]` (positive bends left).
pub fn road_scene(height: usize, width: usize, curve: f64, rng: &mut SplitMix64) -> Image {
    let horizon = height / 3;
    let mut data = Vec::with_capacity(height * width * 3);
    let shade = rng.uniform(-20.0, 20.0);
    for y in 0..height {
        let depth = (y.saturating_sub(horizon)) as f64 / (height - horizon).max(1) as f64;
        let centre = width as f64 / 2.0 - curve * (1.0 - depth).powi(2) * width as f64 * 0.45;
        let half = 1.0 + depth * width as f64 * 0.35;
        for x in 0..width {
            let n = rng.uniform(-12.0, 12.0);
            let px: [f64; 3] = if y < horizon {
                let t = y as f64 * 4.0;
                [110.0 + t, 150.0 + t, 215.0]
            } else {
                let dx = (x as f64 - centre).abs();
                if dx < 0.6 && y % 4 < 2 {
                    [230.0, 225.0, 170.0]
                } else if dx < half {
                    [95.0, 95.0, 100.0]
                } else {
                    [55.0, 120.0 - 40.0 * depth, 45.0]
                }
            };
            data.extend(px.iter().map(|v| quantize(v + n + shade)));
        }
    }
    Image::new(height, width, 3, data).expect("positive dims")
}

/// Rescales the final dense layer so the pre-activation over `inputs` has
/// zero mean and standard deviation `spread`.
pub fn calibrate_head(model: &Model, inputs: &[Tensor], spread: f64) -> Result<Model> {
    let outputs: Vec<f64> = inputs
        .par_iter()
        .map(|x| model.forward(x).map(|(y, _)| y as f64))
        .collect::<std::result::Result<_, _>>()?;
    let pre: Vec<f64> = outputs.iter().map(|y| y.clamp(-0.999_999, 0.999_999).atanh()).collect();
    let n = pre.len() as f64;
    let mean = pre.iter().sum::<f64>() / n;
    let sd = (pre.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / n).sqrt();
    let k = if sd > 1e-9 { spread / sd } else { 1.0 };
    let mut layers = model.layers().to_vec();
    let last = layers.pop().expect("model has layers");
    let LayerSpec::Dense { .. } = last.spec() else {
        return Ok(model.clone());
    };
    let w = last.weights()[0].scale(k as f32);
    let b: Vec<f32> = last.weights()[1]
        .data()
        .iter()
        .map(|&b| ((b as f64 - mean) * k) as f32)
        .collect();
    let b = Tensor::new(last.weights()[1].shape().to_vec(), b)?;
    layers.push(Layer::new(*last.spec(), vec![w, b])?);
    Ok(Model::new(model.name(), model.input_shape().to_vec(), layers)?)
}

fn write_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |e| HarnessError::io(path, e)
}

/// Writes `dataset/`, `models/cnn.dtnn`, `models/lstm.dtnn` and
/// `steercov.conf` under `root`. Labels are the CNN's own predictions plus
/// small Gaussian noise, so its baseline error is low but non-zero.
pub fn synthesize(root: &Path, frames: usize, seed: u64) -> Result<Fixture> {
    if frames < 3 {
        return Err(HarnessError::Config("synth needs at least 3 frames".into()));
    }
    let dataset = root.join("dataset");
    let models = root.join("models");
    for dir in [&dataset, &models] {
        std::fs::create_dir_all(dir).map_err(write_err(dir))?;
    }
    let [h, w, _] = FRAME_SHAPE;
    let mut rng = SplitMix64::new(seed);
    let images: Vec<Image> = (0..frames)
        .map(|_| {
            let curve = rng.uniform(-1.0, 1.0);
            road_scene(h, w, curve, &mut rng)
        })
        .collect();
    let inputs: Vec<Tensor> = images
        .iter()
        .map(|img| img.to_tensor(&FRAME_SHAPE))
        .collect::<std::result::Result<_, _>>()?;

    let cnn = generator::steering_cnn("cnn", FRAME_SHAPE, seed ^ 0xC0)?;
    let cnn = calibrate_head(&cnn, &inputs, 0.6)?;
    let lstm = generator::steering_lstm("lstm", FRAME_SHAPE, 6, seed ^ 0x15)?;
    let lstm = calibrate_head(&lstm, &inputs, 0.6)?;

    let mut csv = String::from("frame_id,angle_deg\n");
    for (i, (img, x)) in images.iter().zip(&inputs).enumerate() {
        let id = format!("f{i:04}");
        let path = dataset.join(format!("{id}.ppm"));
        img.save(&path)?;
        let (pred, _) = cnn.forward(x)?;
        let label = (pred as f64 + LABEL_NOISE * rng.normal()).clamp(-1.0, 1.0);
        csv.push_str(&format!("{id},{:.4}\n", label * MAX_ANGLE_DEG));
    }
    let labels = dataset.join(LABELS_FILE);
    std::fs::write(&labels, csv).map_err(write_err(&labels))?;

    let cnn_path = models.join("cnn.dtnn");
    let lstm_path = models.join("lstm.dtnn");
    save_model(&cnn, &cnn_path)?;
    save_model(&lstm, &lstm_path)?;

    let config = root.join("steercov.conf");
    let text = format!(
        "# Synthetic desk-scale run.\nmodel = {}\ndataset = {}\nout = {}\nseed = {seed}\n",
        cnn_path.display(),
        dataset.display(),
        root.join("out").display()
    );
    std::fs::write(&config, text).map_err(write_err(&config))?;
    Ok(Fixture {
        dataset,
        cnn: cnn_path,
        lstm: lstm_path,
        config,
    })
}
