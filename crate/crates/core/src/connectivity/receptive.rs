use rand::Rng as _;

use crate::datasets::ImageDims;
use crate::error::{Error, Result};
use crate::linalg::Rng;

/// Square input patches assigned to hidden units (or populations).
///
/// Every patch fits entirely inside the image: its top-left corner is drawn
/// uniformly from the `(H-p+1) × (W-p+1)` valid positions, so each unit has
/// exactly `p²·C` inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceptiveFieldMap {
    pub patch_side: usize,
    pub dims: ImageDims,
    /// Top-left `(row, col)` of each patch.
    pub origins: Vec<(usize, usize)>,
    /// Sorted flat input indices covered by each patch.
    pub index_lists: Vec<Vec<usize>>,
}

impl ReceptiveFieldMap {
    pub fn random(count: usize, dims: ImageDims, patch_side: usize, rng: &mut Rng) -> Result<Self> {
        check_patch(dims, patch_side)?;
        let origins = (0..count)
            .map(|_| {
                (
                    rng.random_range(0..=dims.height - patch_side),
                    rng.random_range(0..=dims.width - patch_side),
                )
            })
            .collect();
        Ok(Self::from_origins(dims, patch_side, origins))
    }

    /// One patch centered in the image (used for the fully connected Gabor
    /// layer, where `p = H`).
    pub fn centered(count: usize, dims: ImageDims, patch_side: usize) -> Result<Self> {
        check_patch(dims, patch_side)?;
        let origin = ((dims.height - patch_side) / 2, (dims.width - patch_side) / 2);
        Ok(Self::from_origins(dims, patch_side, vec![origin; count]))
    }

    pub fn from_origins(dims: ImageDims, patch_side: usize, origins: Vec<(usize, usize)>) -> Self {
        let index_lists = origins
            .iter()
            .map(|&(r0, c0)| patch_indices(dims, patch_side, r0, c0))
            .collect();
        ReceptiveFieldMap {
            patch_side,
            dims,
            origins,
            index_lists,
        }
    }

    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }

    /// Patch center in pixel coordinates (half-integer for even `p`).
    pub fn center(&self, unit: usize) -> (f64, f64) {
        let half = (self.patch_side as f64 - 1.0) / 2.0;
        let (r, c) = self.origins[unit];
        (r as f64 + half, c as f64 + half)
    }

    /// Boolean mask of the inputs covered by `unit`.
    pub fn mask(&self, unit: usize) -> Vec<bool> {
        let mut m = vec![false; self.dims.input_dim()];
        for &j in &self.index_lists[unit] {
            m[j] = true;
        }
        m
    }
}

pub(crate) fn check_patch(dims: ImageDims, p: usize) -> Result<()> {
    if p == 0 || p > dims.height || p > dims.width {
        return Err(Error::argument(
            "patch_side",
            format!("p = {p} must satisfy 1 <= p <= {}", dims.height.min(dims.width)),
        ));
    }
    Ok(())
}

fn patch_indices(dims: ImageDims, p: usize, r0: usize, c0: usize) -> Vec<usize> {
    let mut idx = Vec::with_capacity(p * p * dims.channels);
    for r in r0..r0 + p {
        for c in c0..c0 + p {
            for ch in 0..dims.channels {
                idx.push(dims.index(r, c, ch));
            }
        }
    }
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::seeded_rng;

    #[test]
    fn full_patch_covers_everything() {
        let mut rng = seeded_rng(0, 0);
        let map = ReceptiveFieldMap::random(5, ImageDims::MNIST, 28, &mut rng).unwrap();
        for list in &map.index_lists {
            assert_eq!(list, &(0..784).collect::<Vec<_>>());
        }
    }

    #[test]
    fn patches_fit_inside_for_all_grid_sizes() {
        for dims in [ImageDims::MNIST, ImageDims::CIFAR10] {
            for p in [1, 5, 10, 15, 20, 25, 28] {
                let mut rng = seeded_rng(p as u64, 1);
                let map = ReceptiveFieldMap::random(400, dims, p, &mut rng).unwrap();
                for (u, &(r, c)) in map.origins.iter().enumerate() {
                    assert!(r + p <= dims.height && c + p <= dims.width);
                    let list = &map.index_lists[u];
                    assert_eq!(list.len(), p * p * dims.channels);
                    assert!(list.iter().all(|&j| j < dims.input_dim()));
                    assert!(list.windows(2).all(|w| w[0] < w[1]));
                }
            }
        }
    }

    #[test]
    fn rejects_oversized_patch() {
        let mut rng = seeded_rng(0, 0);
        assert!(ReceptiveFieldMap::random(1, ImageDims::MNIST, 29, &mut rng).is_err());
        assert!(ReceptiveFieldMap::random(1, ImageDims::MNIST, 0, &mut rng).is_err());
    }

    #[test]
    fn cifar_patch_spans_channels() {
        let map = ReceptiveFieldMap::from_origins(ImageDims::CIFAR10, 1, vec![(2, 3)]);
        let base = (2 * 32 + 3) * 3;
        assert_eq!(map.index_lists[0], vec![base, base + 1, base + 2]);
    }

    #[test]
    fn centered_origin() {
        let map = ReceptiveFieldMap::centered(2, ImageDims::MNIST, 10).unwrap();
        assert_eq!(map.origins, vec![(9, 9), (9, 9)]);
        assert_eq!(map.center(0), (13.5, 13.5));
    }
}
