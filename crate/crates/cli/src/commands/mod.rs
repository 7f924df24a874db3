pub mod qa;
pub mod report;
pub mod scenario;
pub mod seg;
pub mod validate;
