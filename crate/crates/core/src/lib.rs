pub mod nn;
pub mod kinematics;
pub mod terrain;
pub mod oracle;
pub mod models;
pub mod training;
pub mod runtime;
pub mod config;
