pub mod bid;
pub mod campaign;
pub mod cli;
pub mod config;
pub mod error;
pub mod fluid;
pub mod hjb;
pub mod mdp;
pub mod pacing;
pub mod price;
pub mod sim;
pub mod table;

pub use bid::Bid;
pub use campaign::{AuctionType, CampaignConfig, Penalty, SourceSpec};
pub use error::{Error, Result};
pub use hjb::{GridSpec, ValueSurface};
pub use price::PriceModel;
pub use table::BidTable;
