//! Label clusters in a small mask under each connectivity.
//!
//! ```text
//! cargo run --example connected_components
//! ```

use pvs_eval::clustering::{cluster_sizes, label_mask, Connectivity};
use pvs_eval::{Mask, Spacing};

pub fn main() -> pvs_eval::Result<()> {
    // Two voxels touching at a face, an edge pair and a corner pair.
    let mut mask = Mask::empty([12, 6, 6]);
    for p in [[1, 1, 1], [2, 1, 1], [5, 1, 1], [6, 2, 1], [9, 1, 1], [10, 2, 2]] {
        mask.set(p[0], p[1], p[2], true);
    }

    for c in [Connectivity::Six, Connectivity::Eighteen, Connectivity::TwentySix] {
        let labels = label_mask(&mask, c);
        println!("{:>2}-connectivity: {} clusters, sizes {:?}", c.as_u8(), labels.n_clusters(), labels.sizes());
    }

    let labels = label_mask(&mask, Connectivity::TwentySix);
    let spacing = Spacing::isotropic(0.8)?;
    for (label, size) in cluster_sizes(&labels, spacing) {
        println!("cluster {label}: {size:?}");
    }
    Ok(())
}
