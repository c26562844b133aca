//! Training objectives for self-supervised distance estimation and
//! semantic segmentation.

pub mod distance;
pub mod multitask;
pub mod photometric;
pub mod report;
pub mod robust;
pub mod semantic;

pub use distance::{
    distance_consistency, distance_consistency_with, sigmoid_to_distance, sigmoid_to_distance_value, smoothness,
    symmetric_relative, total_distance_loss, DistanceLossParts, SigmoidMapping,
};
pub use multitask::{mtl_loss, mtl_loss_grad, UncertaintyParams};
pub use photometric::{min_reconstruction, reconstruction_loss, ssim, LossMap};
pub use report::LossReport;
pub use robust::{fit_robust_params, log_partition, robust_loss, robust_loss_grad, RobustFit, RobustParams};
pub use semantic::{apply_fraction, cross_entropy, cross_entropy_one_hot, dynamic_iou, dynamic_mask, motion_flag};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Weights of the combined objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights<T> {
    /// Smoothness weight.
    pub beta: T,
    /// Distance-consistency weight.
    pub gamma: T,
    /// SSIM share of the reconstruction loss.
    pub tau: T,
    /// Fraction of mostly-moving frames in which dynamic objects are masked.
    pub epsilon_frac: T,
}

impl<T: Real> LossWeights<T> {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: T| v >= T::zero() && v <= T::one();
        if !(self.beta >= T::zero()) || !(self.gamma >= T::zero()) {
            return Err(Error::InvalidParameter("loss weights beta and gamma must be >= 0".into()));
        }
        if !unit(self.tau) {
            return Err(Error::OutOfRange {
                what: "tau must lie in [0, 1]".into(),
                value: self.tau.as_f64(),
            });
        }
        if !unit(self.epsilon_frac) {
            return Err(Error::OutOfRange {
                what: "epsilon fraction must lie in [0, 1]".into(),
                value: self.epsilon_frac.as_f64(),
            });
        }
        Ok(())
    }
}

impl<T: Real> Default for LossWeights<T> {
    fn default() -> Self {
        Self {
            beta: T::lit(1e-3),
            gamma: T::lit(1e-2),
            tau: T::lit(0.85),
            epsilon_frac: T::lit(0.5),
        }
    }
}
