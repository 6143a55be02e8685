//! Std companion to `aim-forge-core`: file formats, the remote
//! chat-completion backend, and the command-line interface.

pub mod cli;
pub mod files;
pub mod remote;

pub use aim_forge_core as core;
