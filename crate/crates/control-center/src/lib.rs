//! Control center for a managed charging load area.
//!
//! Sits between the planning controller ([`lac`]) and the physical stations
//! ([`plant`]): it owns vehicle profiles and reservations, authenticates RFID
//! swipes into charging sessions, pushes quantized schedules to sockets,
//! folds delivered meter reports back into the controller (attributing
//! energy and cost even across lost reports), and ends sessions with a final
//! settlement report.
//!
//! Every accepted input is appended to an event log; [`ControlCenter::replay`]
//! rebuilds an identical center from the configuration plus that log.

mod center;
mod types;
mod wire;

pub use center::{
    CenterEvent, CenterSnapshot, ControlCenter, EventLogRecord, SessionSnapshot, SwipeOutcome,
    TickOutcome, DEVIATION_THRESHOLD_KW,
};
pub use types::{
    CenterConfig, CenterError, CenterSocket, FinalSessionReport, PevProfile, Reservation,
};
pub use wire::{decode_lines, encode_lines, AuthMsg, ReportMsg, ScheduleMsg, TerminateMsg, WireMessage};
