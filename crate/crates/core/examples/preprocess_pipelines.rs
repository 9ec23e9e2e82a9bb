//! Run both preprocessing pipelines on a synthetic head image.
//!
//! ```text
//! cargo run --release --example preprocess_pipelines
//! ```

use pvs_eval::synth::{generate_phantom, HeadModel, PhantomSpec};
use pvs_eval::volume_ops::{nnunet_preprocess, shiva_preprocess, ClampScaling};
use pvs_eval::Spacing;

fn summary(data: &[f64]) -> (f64, f64, f64, f64) {
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let sd = (data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let min = data.iter().copied().fold(f64::INFINITY, f64::min);
    let max = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (mean, sd, min, max)
}

pub fn main() -> pvs_eval::Result<()> {
    // About 140 x 170 x 140 mm at 1.25 mm, roughly head-sized.
    let spec = PhantomSpec {
        dims: [112, 136, 112],
        spacing: Spacing::isotropic(1.25)?,
        n_tubes: 30,
        noise_sd: 20.0,
        seed: 3,
        head: Some(HeadModel::default()),
        ..PhantomSpec::default()
    };
    let phantom = generate_phantom(&spec)?;
    println!("input: dims {:?} spacing {:?}", phantom.image.dims(), phantom.image.spacing().as_array());

    let nn = nnunet_preprocess(&phantom.image, Spacing::isotropic(0.8)?)?;
    let (mean, sd, _, _) = summary(nn.data());
    println!(
        "nnunet: dims {:?} spacing {:?} mean {mean:.2e} sd {sd:.6}",
        nn.dims(),
        nn.spacing().as_array()
    );

    let (shiva, transform) = shiva_preprocess(&phantom.image, ClampScaling::Ratio)?;
    let (_, _, min, max) = summary(shiva.data());
    println!(
        "shiva: dims {:?} spacing {:?} range [{min}, {max}] brain extent {:?}",
        shiva.dims(),
        shiva.spacing().as_array(),
        transform.brain_extent
    );

    let native = transform.to_native(&shiva)?;
    println!("shiva output mapped back to the 1 mm grid: dims {:?}", native.dims());
    Ok(())
}
