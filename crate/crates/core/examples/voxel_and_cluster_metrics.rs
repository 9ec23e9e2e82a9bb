//! Score perturbed copies of a phantom's truth mask and show how each
//! perturbation moves the voxel and cluster measures.
//!
//! ```text
//! cargo run --example voxel_and_cluster_metrics
//! ```

use pvs_eval::metrics::{region_metrics, MetricsConfig, RegionMetrics};
use pvs_eval::synth::{generate_phantom, perturb_mask, region_masks, Perturbation, PhantomSpec};

fn show(name: &str, m: &RegionMetrics) {
    let f = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
    println!(
        "{name:<10} dsc_vox {} sen_vox {} ppv_vox {} | dsc_num {} sen_num {} ppv_num {} | clusters {} -> {}",
        f(m.voxel.dsc),
        f(m.voxel.sen),
        f(m.voxel.ppv),
        f(m.cluster.dsc),
        f(m.cluster.sen),
        f(m.cluster.ppv),
        m.cluster.n_manual,
        m.cluster.n_algo,
    );
}

pub fn main() -> pvs_eval::Result<()> {
    let spec = PhantomSpec {
        n_tubes: 10,
        seed: 7,
        ..PhantomSpec::default()
    };
    let phantom = generate_phantom(&spec)?;
    let config = MetricsConfig::default();
    let spacing = phantom.image.spacing();

    let variants = [
        ("identity", None),
        ("drop:0.5", Some(Perturbation::DropClusters(0.5))),
        ("add:5", Some(Perturbation::AddFalseClusters(5))),
        ("erode", Some(Perturbation::ErodeShell)),
    ];
    println!("whole volume");
    for (name, p) in variants {
        let algo = match p {
            Some(p) => perturb_mask(&phantom.truth, p, 1)?,
            None => phantom.truth.clone(),
        };
        show(name, &region_metrics(&phantom.truth, &algo, None, spacing, &config)?);
    }

    let (wm, bg) = region_masks(spec.dims);
    let algo = perturb_mask(&phantom.truth, Perturbation::DropClusters(0.5), 1)?;
    println!("drop:0.5 by region");
    for (name, region) in [("WM", &wm), ("BG", &bg)] {
        show(name, &region_metrics(&phantom.truth, &algo, Some(region), spacing, &config)?);
    }
    Ok(())
}
