//! Virtual space: recurrent predictors of `[C]` and `[D]` trained on the
//! historical dataset.

pub mod lstm;
pub mod train;
pub mod virtual_space;

pub use lstm::{CarriedState, RecurrentModel};
pub use train::{
    loss_curve_csv, smooth, train, train_epochs, LrSchedule, Optimizer, Sequence, TrainerState,
    TrainingConfig,
};
pub use virtual_space::{
    evaluate_rmse, fit_product, rmse, FitResult, ModelRecord, Normalization, Product, RmseReport,
    VirtualCarry, VirtualSpace, VirtualSpaceCheckpoint, CHECKPOINT_VERSION,
};
