pub mod dataset;
pub mod error;
pub mod forest;
pub mod rng;
pub mod tree;
pub mod scanning;
pub mod cascade;
pub mod metrics;
pub mod model;
pub mod persist;
pub mod synthetic;
pub mod bench;
pub mod config;
pub mod report;
pub mod commands;
