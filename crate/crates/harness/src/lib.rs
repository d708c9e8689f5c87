//! Test execution against the data exchange server: binds stimuli to
//! requests, checks each step against the usage model and the canonical
//! state table, and builds the test record.

pub mod binding;
pub mod execute;
pub mod transport;

pub use binding::{BindError, BindingConfig, BindingContext, Request};
pub use execute::{
    check_step, classify_failure, execute_step, execute_suite, execute_test_case, observe, reset_server, Observation,
    RunError, RunOptions, StepError, StepExecution,
};
pub use transport::{HttpTransport, InProcessTransport, Response, Transport, TransportError};
