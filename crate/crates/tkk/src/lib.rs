//! Data factory and evaluation harness for staged text-to-SQL training.
//!
//! The pipeline decomposes gold SQL queries into five clause-level subtasks
//! (select, from, where, ghol, sql), emits ratio-balanced training files for
//! the knowledge-acquisition and knowledge-composition stages, reconstructs
//! SQL from model target sequences, and scores predictions with exact-match,
//! execution, and interaction metrics.

pub mod data;
pub mod decompose;
pub mod eval;
pub mod exec;
pub mod prompt;
pub mod sample;
pub mod split;
pub mod sql;
