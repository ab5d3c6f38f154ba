//! Losses, the optimizer, the two training stages and the gradient checker.

mod adam;
mod gradcheck;
mod loss;
mod stages;

pub use adam::{adam_step, AdamConfig, OptimState};
#[doc(hidden)]
pub use gradcheck::gradient_check_with_fault;
pub use gradcheck::{check_network, gradient_check, relative_error, ClassResult, GradCheckConfig, GradCheckReport};
pub use loss::{
    loss_depth, loss_depth_with_grad, loss_grasp, loss_grasp_with_grad, loss_mask, loss_mask_with_grad, loss_total,
    loss_total_with_grad, mask_target, normalized_depth_target, LossParts, LossWeights,
};
pub use stages::{
    evaluate_losses, evaluate_mask_loss, freeze_for_stage1, freeze_for_stage2, prepare_inputs, sample_gradients,
    train_stage1, train_stage2, LossRecord, TrainConfig, TrainReport,
};
