//! The single data broker: sessions, subscription routing and a TCP server.

mod handler;
mod routing;
mod server;
mod stats;

pub use handler::{BrokerCore, Flow, SessionHandler};
pub use routing::{Delivery, Outbound, RoutingTable, Session};
pub use server::{run_broker, BrokerError, BrokerHandle};
pub use stats::{BrokerStats, StatsSnapshot};
