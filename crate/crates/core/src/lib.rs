pub mod aggregate;
pub mod cli;
pub mod cluster;
pub mod corpus;
pub mod media;
pub mod model;
pub mod studystats;
pub mod windows;
pub mod trainer;
pub mod fixture;
pub mod service;
