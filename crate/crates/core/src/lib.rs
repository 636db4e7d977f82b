pub mod anchor;
pub mod client;
pub mod config;
pub mod export;
pub mod links;
pub mod protocol;
pub mod scanner;
pub mod server;
pub mod sketch;
