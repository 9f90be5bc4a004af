//! Campaign orchestration: configuration, seeded runs, persistence and export.

pub mod campaign;
pub mod config;
pub mod export;
pub mod record;
pub mod report;

pub use campaign::{oracle_for, run_campaign, CampaignReport, Selection, Triple};
pub use config::{ExperimentConfig, StrategyConfig, DEFAULT_CONFIG_TOML};
pub use export::{export_figures, load_records};
pub use record::{Phase, ResultRecord};
pub use report::ee_report;
