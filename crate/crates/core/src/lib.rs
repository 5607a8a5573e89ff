pub mod archive;
pub mod boundary;
pub mod cli;
pub mod config;
pub mod costmodel;
pub mod engine;
pub mod error;
pub mod evaluator;
pub mod genetic;
pub mod genotype;
pub mod report;
pub mod scoring;
