//! Multirate SGD with momentum.

mod composite;
mod config;
mod engine;
mod noise;
mod schedule;
mod state;
mod subset;

pub use composite::{average_into, composite_average_step, merge_period};
pub use config::{MultirateConfig, NoiseConfig};
pub use engine::{macro_step, macro_step_wd, schedule_for, tier_rates, vanilla_step, TierRate};
pub use noise::noise_step;
pub use schedule::LinearDecay;
pub use state::OptState;
pub use subset::{random_subset_cycle, remask_step};
