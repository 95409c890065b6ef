use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crossbeam_channel::Sender;
use log::{debug, warn};
use parking_lot::RwLock;

use super::routing::{Delivery, Outbound, RoutingTable};
use super::stats::BrokerStats;
use crate::mqtt::{encode, validate_filter, validate_topic, ControlPacket, QoS};

/// Shared broker state: the routing table and counters.
#[derive(Debug, Default)]
pub struct BrokerCore {
    pub(crate) table: RwLock<RoutingTable>,
    pub(crate) stats: BrokerStats,
    next_conn_id: AtomicU64,
}

impl BrokerCore {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    pub fn stats(&self) -> &BrokerStats {
        &self.stats
    }

    pub fn session(&self, client_id: &str) -> Option<super::Session> {
        self.table.read().session(client_id)
    }

    pub fn session_count(&self) -> usize {
        self.table.read().len()
    }

    /// Route a publish atomically with respect to subscription changes.
    pub fn route_publish(&self, topic: &str, payload: &[u8], qos: QoS) -> Vec<Delivery> {
        let deliveries = self.table.read().route_publish(topic, payload, qos);
        self.stats.record_routed(deliveries.len(), payload.len());
        deliveries
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Close,
}

#[derive(Debug)]
enum State {
    AwaitingConnect,
    Connected { client_id: String },
    Closed,
}

/// Protocol state machine for one connection. Replies and deliveries are
/// written to the connection's outbox, so socket order equals routing order.
#[derive(Debug)]
pub struct SessionHandler {
    core: Arc<BrokerCore>,
    conn_id: u64,
    outbox: Sender<Outbound>,
    state: State,
}

impl SessionHandler {
    pub fn new(core: Arc<BrokerCore>, outbox: Sender<Outbound>) -> Self {
        let conn_id = core.next_conn_id.fetch_add(1, Ordering::Relaxed);
        core.stats.record_connection();
        Self {
            core,
            conn_id,
            outbox,
            state: State::AwaitingConnect,
        }
    }

    pub fn client_id(&self) -> Option<&str> {
        match &self.state {
            State::Connected { client_id } => Some(client_id),
            _ => None,
        }
    }

    fn reply(&self, packet: &ControlPacket) {
        let frame = encode(packet).expect("broker replies are well-formed");
        let _ = self.outbox.send(Outbound::Frame(Arc::new(frame)));
    }

    fn close(&mut self) -> Flow {
        if let State::Connected { client_id } = &self.state {
            self.core.table.write().disconnect(client_id, self.conn_id);
        }
        self.state = State::Closed;
        let _ = self.outbox.send(Outbound::Close);
        Flow::Close
    }

    /// Connection lost without a DISCONNECT.
    pub fn connection_lost(&mut self) {
        if !matches!(self.state, State::Closed) {
            self.close();
        }
    }

    /// Malformed input on the wire.
    pub fn protocol_error(&mut self, reason: &str) -> Flow {
        warn!("closing connection {}: {reason}", self.conn_id);
        self.close()
    }

    pub fn handle(&mut self, packet: ControlPacket) -> Flow {
        match (&self.state, packet) {
            (State::Closed, _) => Flow::Close,
            (State::AwaitingConnect, ControlPacket::Connect { client_id }) => {
                let evicted = self
                    .core
                    .table
                    .write()
                    .connect(&client_id, self.conn_id, self.outbox.clone());
                if let Some(old) = evicted {
                    debug!("evicting previous session of {client_id}");
                    let _ = old.send(Outbound::Close);
                }
                self.state = State::Connected { client_id };
                self.reply(&ControlPacket::ConnAck { return_code: 0 });
                Flow::Continue
            }
            (State::AwaitingConnect, other) => {
                self.protocol_error(&format!("{} before CONNECT", other.type_name()))
            }
            (State::Connected { .. }, ControlPacket::Connect { .. }) => {
                self.protocol_error("second CONNECT on one connection")
            }
            (State::Connected { client_id }, packet) => {
                let client_id = client_id.clone();
                if !self.core.table.read().owns(&client_id, self.conn_id) {
                    // evicted by a newer connection with the same id
                    return self.close();
                }
                self.handle_connected(&client_id, packet)
            }
        }
    }

    fn handle_connected(&mut self, client_id: &str, packet: ControlPacket) -> Flow {
        match packet {
            ControlPacket::Publish {
                topic,
                payload,
                qos,
                packet_id,
            } => {
                if validate_topic(&topic).is_err() {
                    return self.protocol_error("invalid topic in PUBLISH");
                }
                self.core.stats.record_publish(payload.len());
                self.core.route_publish(&topic, &payload, qos);
                if let (QoS::AtLeastOnce, Some(packet_id)) = (qos, packet_id) {
                    self.reply(&ControlPacket::PubAck { packet_id });
                }
                Flow::Continue
            }
            ControlPacket::Subscribe { packet_id, filters } => {
                let mut parsed = Vec::with_capacity(filters.len());
                for (f, q) in &filters {
                    match validate_filter(f) {
                        Ok(tf) => parsed.push((tf, *q)),
                        Err(_) => return self.protocol_error("invalid filter in SUBSCRIBE"),
                    }
                }
                let granted = self.core.table.write().subscribe(client_id, &parsed);
                self.reply(&ControlPacket::SubAck { packet_id, granted });
                Flow::Continue
            }
            ControlPacket::PubAck { .. } => Flow::Continue,
            ControlPacket::PingReq => {
                self.reply(&ControlPacket::PingResp);
                Flow::Continue
            }
            ControlPacket::Disconnect => self.close(),
            other => self.protocol_error(&format!("unexpected {} from client", other.type_name())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mqtt::decode;
    use crossbeam_channel::{unbounded, Receiver};

    fn drain(rx: &Receiver<Outbound>) -> Vec<Option<ControlPacket>> {
        rx.try_iter()
            .map(|o| match o {
                Outbound::Frame(f) => Some(decode(&f).unwrap()),
                Outbound::Close => None,
            })
            .collect()
    }

    fn connected(core: &Arc<BrokerCore>, id: &str) -> (SessionHandler, Receiver<Outbound>) {
        let (tx, rx) = unbounded();
        let mut h = SessionHandler::new(core.clone(), tx);
        assert_eq!(
            h.handle(ControlPacket::Connect { client_id: id.into() }),
            Flow::Continue
        );
        (h, rx)
    }

    #[test]
    fn connect_subscribe_ping() {
        let core = BrokerCore::new();
        let (mut h, rx) = connected(&core, "ue1");
        h.handle(ControlPacket::Subscribe {
            packet_id: 7,
            filters: vec![("twin/#".into(), QoS::AtMostOnce)],
        });
        h.handle(ControlPacket::PingReq);
        assert_eq!(
            drain(&rx),
            vec![
                Some(ControlPacket::ConnAck { return_code: 0 }),
                Some(ControlPacket::SubAck { packet_id: 7, granted: vec![0] }),
                Some(ControlPacket::PingResp),
            ]
        );
    }

    #[test]
    fn first_packet_must_be_connect() {
        let core = BrokerCore::new();
        let (tx, rx) = unbounded();
        let mut h = SessionHandler::new(core, tx);
        let flow = h.handle(ControlPacket::Publish {
            topic: "a".into(),
            payload: vec![],
            qos: QoS::AtMostOnce,
            packet_id: None,
        });
        assert_eq!(flow, Flow::Close);
        assert_eq!(drain(&rx), vec![None]);
    }

    #[test]
    fn publish_acks_only_at_qos1() {
        let core = BrokerCore::new();
        let (mut publisher, prx) = connected(&core, "pub");
        drain(&prx);
        publisher.handle(ControlPacket::Publish {
            topic: "nobody/listens".into(),
            payload: b"x".to_vec(),
            qos: QoS::AtLeastOnce,
            packet_id: Some(3),
        });
        publisher.handle(ControlPacket::Publish {
            topic: "nobody/listens".into(),
            payload: b"x".to_vec(),
            qos: QoS::AtMostOnce,
            packet_id: None,
        });
        assert_eq!(drain(&prx), vec![Some(ControlPacket::PubAck { packet_id: 3 })]);
    }

    #[test]
    fn subscriber_receives_matching_publish() {
        let core = BrokerCore::new();
        let (mut sub, srx) = connected(&core, "sub");
        sub.handle(ControlPacket::Subscribe {
            packet_id: 1,
            filters: vec![("twin/#".into(), QoS::AtMostOnce)],
        });
        drain(&srx);
        let (mut publisher, _prx) = connected(&core, "pub");
        publisher.handle(ControlPacket::Publish {
            topic: "twin/state".into(),
            payload: b"s".to_vec(),
            qos: QoS::AtMostOnce,
            packet_id: None,
        });
        let got = drain(&srx);
        assert_eq!(got.len(), 1);
        assert!(matches!(&got[0], Some(ControlPacket::Publish { topic, .. }) if topic == "twin/state"));
    }

    #[test]
    fn duplicate_client_id_evicts_previous() {
        let core = BrokerCore::new();
        let (mut first, rx1) = connected(&core, "ue1");
        let (_second, rx2) = connected(&core, "ue1");
        let got = drain(&rx1);
        assert_eq!(got.last(), Some(&None), "old outbox told to close");
        assert_eq!(drain(&rx2), vec![Some(ControlPacket::ConnAck { return_code: 0 })]);
        // the evicted handler closes on its next packet and leaves the new session alone
        assert_eq!(first.handle(ControlPacket::PingReq), Flow::Close);
        assert_eq!(core.session_count(), 1);
    }

    #[test]
    fn disconnect_drops_subscriptions() {
        let core = BrokerCore::new();
        let (mut h, _rx) = connected(&core, "ue1");
        h.handle(ControlPacket::Subscribe {
            packet_id: 1,
            filters: vec![("a".into(), QoS::AtMostOnce)],
        });
        assert_eq!(core.session("ue1").unwrap().subscriptions.len(), 1);
        assert_eq!(h.handle(ControlPacket::Disconnect), Flow::Close);
        assert!(core.session("ue1").is_none());
        assert!(core.route_publish("a", b"", QoS::AtMostOnce).is_empty());
    }
}
