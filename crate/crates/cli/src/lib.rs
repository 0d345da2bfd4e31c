//! `convsearch` command-line tool and HTTP session service.

pub mod cli;
pub mod config;
pub mod http;
