//! Command line and HTTP front end for the `recourse` engine.

pub mod server;
pub mod text;
