use std::collections::HashMap;
use std::sync::atomic::{AtomicU16, Ordering};
use std::sync::Arc;

use crossbeam_channel::Sender;

use crate::mqtt::{encode, topic_matches, ControlPacket, QoS, TopicFilter};

/// Something queued for a connection's writer.
#[derive(Debug, Clone)]
pub enum Outbound {
    Frame(Arc<Vec<u8>>),
    Close,
}

/// Per-client state held by the broker.
#[derive(Debug, Clone)]
pub struct Session {
    pub client_id: String,
    pub subscriptions: Vec<(TopicFilter, QoS)>,
    pub connected: bool,
    pub next_outbound_packet_id: u16,
}

#[derive(Debug)]
struct Entry {
    client_id: String,
    conn_id: u64,
    subscriptions: Vec<(TopicFilter, QoS)>,
    next_packet_id: AtomicU16,
    outbox: Sender<Outbound>,
}

impl Entry {
    fn allocate_packet_id(&self) -> u16 {
        loop {
            let id = self.next_packet_id.fetch_add(1, Ordering::Relaxed);
            if id != 0 {
                return id;
            }
        }
    }

    /// Highest granted QoS among this session's filters that match `topic`.
    fn granted_for(&self, topic: &str) -> Option<QoS> {
        self.subscriptions
            .iter()
            .filter(|(f, _)| topic_matches(f, topic))
            .map(|(_, q)| *q)
            .max()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub client_id: String,
    pub qos: QoS,
    pub packet_id: Option<u16>,
}

/// Live sessions keyed by client id.
///
/// Routing and subscription changes are expected to run under an external
/// reader/writer lock; `route_publish` takes `&self` and only touches atomics
/// and channel senders.
#[derive(Debug, Default)]
pub struct RoutingTable {
    sessions: HashMap<String, Entry>,
}

impl RoutingTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    /// Install a session. Returns the outbox of an evicted session with the
    /// same id, if there was one.
    pub fn connect(
        &mut self,
        client_id: &str,
        conn_id: u64,
        outbox: Sender<Outbound>,
    ) -> Option<Sender<Outbound>> {
        let entry = Entry {
            client_id: client_id.to_owned(),
            conn_id,
            subscriptions: Vec::new(),
            next_packet_id: AtomicU16::new(1),
            outbox,
        };
        self.sessions
            .insert(client_id.to_owned(), entry)
            .map(|old| old.outbox)
    }

    /// Remove the session only if it still belongs to `conn_id`.
    pub fn disconnect(&mut self, client_id: &str, conn_id: u64) -> bool {
        match self.sessions.get(client_id) {
            Some(e) if e.conn_id == conn_id => {
                self.sessions.remove(client_id);
                true
            }
            _ => false,
        }
    }

    pub fn owns(&self, client_id: &str, conn_id: u64) -> bool {
        self.sessions
            .get(client_id)
            .is_some_and(|e| e.conn_id == conn_id)
    }

    /// Add filters to a session, replacing the QoS of an identical filter.
    pub fn subscribe(&mut self, client_id: &str, filters: &[(TopicFilter, QoS)]) -> Vec<u8> {
        let Some(entry) = self.sessions.get_mut(client_id) else {
            return vec![0x80; filters.len()];
        };
        filters
            .iter()
            .map(|(filter, qos)| {
                match entry.subscriptions.iter_mut().find(|(f, _)| f == filter) {
                    Some(existing) => existing.1 = *qos,
                    None => entry.subscriptions.push((filter.clone(), *qos)),
                }
                *qos as u8
            })
            .collect()
    }

    pub fn session(&self, client_id: &str) -> Option<Session> {
        self.sessions.get(client_id).map(|e| Session {
            client_id: e.client_id.clone(),
            subscriptions: e.subscriptions.clone(),
            connected: true,
            next_outbound_packet_id: e.next_packet_id.load(Ordering::Relaxed),
        })
    }

    /// Deliver a publish to every session with a matching filter, one copy
    /// per session at min(publish QoS, best granted QoS).
    pub fn route_publish(&self, topic: &str, payload: &[u8], qos: QoS) -> Vec<Delivery> {
        let mut deliveries = Vec::new();
        let mut qos0_frame: Option<Arc<Vec<u8>>> = None;
        let mut ids: Vec<&String> = self.sessions.keys().collect();
        // stable order keeps delivery logs deterministic
        ids.sort();
        for id in ids {
            let entry = &self.sessions[id];
            let Some(granted) = entry.granted_for(topic) else {
                continue;
            };
            let effective = granted.min(qos);
            let (frame, packet_id) = match effective {
                QoS::AtMostOnce => {
                    let frame = qos0_frame
                        .get_or_insert_with(|| {
                            Arc::new(
                                encode(&ControlPacket::Publish {
                                    topic: topic.to_owned(),
                                    payload: payload.to_vec(),
                                    qos: QoS::AtMostOnce,
                                    packet_id: None,
                                })
                                .expect("validated topic encodes"),
                            )
                        })
                        .clone();
                    (frame, None)
                }
                QoS::AtLeastOnce => {
                    let pid = entry.allocate_packet_id();
                    let frame = encode(&ControlPacket::Publish {
                        topic: topic.to_owned(),
                        payload: payload.to_vec(),
                        qos: QoS::AtLeastOnce,
                        packet_id: Some(pid),
                    })
                    .expect("validated topic encodes");
                    (Arc::new(frame), Some(pid))
                }
            };
            // A closed outbox means the connection is already going away.
            let _ = entry.outbox.send(Outbound::Frame(frame));
            deliveries.push(Delivery {
                client_id: entry.client_id.clone(),
                qos: effective,
                packet_id,
            });
        }
        deliveries
    }
}
