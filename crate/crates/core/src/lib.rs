//! Exchange, charge-noise and symmetric-operation models for a silicon
//! double quantum dot. Units: GHz, ns, mV.

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barrier;
pub mod data;
pub mod device;
pub mod error;
pub mod experiment;
pub mod hubbard;
pub mod noise;
pub mod numeric;

pub use barrier::WkbBarrier;
pub use data::{Axis, Metadata, ScanGrid, Table, TimeTrace};
pub use device::{ControlFrame, DeviceModel, DeviceSpec, GateVector};
pub use error::{Error, Result};
pub use experiment::{RabiFit, RabiOptions};
pub use noise::{GateCorrelation, Hyperfine, NoiseModel};
