pub mod agent;
pub mod batch;
pub mod cleanbot;
pub mod error;
pub mod fd;
pub mod knowledge;
pub mod oracle;
pub mod store;
pub mod switches;
pub mod terms;
pub mod update;

pub use error::{FluxError, Result};
