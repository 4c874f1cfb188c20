//! Closed-loop drilling simulator.

pub mod batch;
pub mod plant;
pub mod trial;

pub use batch::{median, run_batch, BatchSummary};
pub use plant::{force_plant, speed_factor, BoneModel, Layer};
pub use trial::{
    is_success, run_trial, EndReason, FaultInjection, Mode, SimulatorError, TraceRow, TrialConfig, TrialResult, SUCCESS_RESIDUAL_MAX,
};
