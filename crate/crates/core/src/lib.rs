pub mod kernel;
pub mod oracle;
pub mod sources;
pub mod stats;
pub mod store;
