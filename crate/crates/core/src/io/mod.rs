//! File formats: portfolios in, configs in, result tables and summaries out.

pub mod config;
pub mod portfolio;
pub mod report;

pub use config::{load_config, load_config_or_default, parse_config, CONFIG_ENV};
pub use portfolio::{load_portfolio, read_portfolio, write_portfolio};
pub use report::format_share;
