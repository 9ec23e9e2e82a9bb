//! Write a volume in several datatypes and byte orders, read it back and
//! compare.
//!
//! ```text
//! cargo run --example nifti_roundtrip
//! ```

use pvs_eval::nifti::{self, DataType, Endian, WriteOptions};
use pvs_eval::{Spacing, Volume};

pub fn main() -> pvs_eval::Result<()> {
    let dir = std::env::temp_dir().join("pvs-eval-nifti-roundtrip");
    std::fs::create_dir_all(&dir)?;

    let spacing = Spacing::new(0.9, 0.9, 1.2)?;
    let vol = Volume::from_fn([20, 24, 16], spacing, |x, y, z| ((x * 7 + y * 3 + z) % 200) as f64);

    for datatype in [DataType::U8, DataType::I16, DataType::F32, DataType::F64] {
        for (endian, gzip) in [(Endian::Little, false), (Endian::Big, true)] {
            let name = format!("vol_{}_{endian:?}.nii{}", datatype.name(), if gzip { ".gz" } else { "" });
            let path = dir.join(name);
            nifti::write_nifti_with(&vol, &path, datatype, WriteOptions { endian, gzip: Some(gzip) })?;
            let back = nifti::read_nifti(&path)?;
            let max_err = vol
                .data()
                .iter()
                .zip(back.data())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            println!(
                "{:<28} dims {:?} pixdim {:?} max |diff| {max_err}",
                path.file_name().unwrap().to_string_lossy(),
                back.dims(),
                back.spacing().as_array()
            );
        }
    }

    // Masks are stored as u8 and binarized at 0.5 on read.
    let mask = vol.binarize();
    let mask_path = dir.join("mask.nii.gz");
    nifti::write_mask(&mask, vol.header(), &mask_path)?;
    let (_, back) = nifti::read_nifti_mask(&mask_path)?;
    println!("mask voxels: wrote {}, read {}", mask.count(), back.count());
    Ok(())
}
