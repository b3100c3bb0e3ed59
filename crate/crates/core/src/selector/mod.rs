//! Trainable view selector: a view classifier and an auxiliary relative-pose
//! predictor sharing nothing but the training objective
//! `L^S = L^W + w L^P`.

mod net;
mod params;
mod train;

pub use net::{
    batch_loss, cross_entropy, forward_pose, forward_pose_all, forward_view, gradient, log_softmax, loss_pose,
    loss_view, softmax, total_loss, LossParts, Sample,
};
pub use params::{Dense, SelectorParams};
pub use train::{
    build_samples, select, select_from_logits, train, Checkpoint, EpochRecord, TrainConfig, TrainHistory,
    CHECKPOINT_VERSION,
};
