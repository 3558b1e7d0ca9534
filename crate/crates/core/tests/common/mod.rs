#![allow(dead_code)]

pub mod golden;
#[cfg(feature = "server")]
pub mod http;
