use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::PatternError;

/// Column-stripe segmentation of a `width × height` image.
///
/// Pixels are indexed row-major (`y * width + x`); stripe `x` holds the
/// pixels of image column `x`, top to bottom, and stripes are scanned left to
/// right.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanPlan {
    pub width: usize,
    pub height: usize,
    stripes: Vec<Vec<usize>>,
}

impl ScanPlan {
    /// Number of stripes `q`.
    pub fn segment_count(&self) -> usize {
        self.stripes.len()
    }

    /// Pixels per stripe, the Hadamard size used for each stripe.
    pub fn stripe_len(&self) -> usize {
        self.height
    }

    pub fn stripes(&self) -> &[Vec<usize>] {
        &self.stripes
    }

    pub fn stripe(&self, index: usize) -> &[usize] {
        &self.stripes[index]
    }

    /// Patterns needed without carving: one full Hadamard set per stripe.
    pub fn naive_budget(&self) -> usize {
        self.width * self.height
    }

    /// Gathers the values of one stripe from a row-major image.
    pub fn extract<T: Copy>(&self, image: &[T], index: usize) -> Vec<T> {
        self.stripes[index].iter().map(|&p| image[p]).collect()
    }
}

pub fn make_scan_plan(width: usize, height: usize) -> Result<ScanPlan, PatternError> {
    if !width.is_power_of_two() || !height.is_power_of_two() {
        return Err(PatternError::Plan { width, height });
    }
    let stripes = (0..width)
        .map(|x| (0..height).map(|y| y * width + x).collect())
        .collect();
    Ok(ScanPlan { width, height, stripes })
}
