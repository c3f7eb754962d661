//! Runtime safety gate for decoded motor-imagery intents driving an assistive robot.
//!
//! Each decoded posterior passes physiological checks (entropy, EMG-band artifact energy,
//! intent oscillation) and logical checks (a STRIPS plan for the grounded goal must exist and
//! verify) before an action is released; otherwise the robot is held idle.

pub mod harness;
pub mod intent;
pub mod metrics;
pub mod monitor;
pub mod planner;
pub mod signal;
