use std::collections::HashMap;
use std::io::{self, BufReader, Write};
use std::net::{Shutdown, SocketAddr, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU16, AtomicU64, Ordering};
use std::sync::{Arc, Weak};
use std::thread;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use crossbeam_channel::{bounded, unbounded, Receiver, RecvTimeoutError, Sender};
use log::{debug, warn};
use parking_lot::Mutex;
use thiserror::Error;

use super::envelope::{decode_envelope, encode_envelope, EnvelopeError, MessageEnvelope};
use crate::mqtt::{encode, read_packet, validate_filter, ControlPacket, QoS, TopicError};

/// Microseconds since the Unix epoch; the shared clock for one-way latency.
pub fn now_micros() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_micros() as u64)
        .unwrap_or(0)
}

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("cannot connect to broker at {addr}: {source}")]
    Connect { addr: SocketAddr, source: io::Error },
    #[error("broker refused connection with code {0}")]
    Refused(u8),
    #[error("handshake failed: {0}")]
    Handshake(String),
    #[error("broker unreachable after {attempts} attempts")]
    Unreachable { attempts: u32 },
    #[error("not connected")]
    NotConnected,
    #[error("no acknowledgement within {0:?}")]
    AckTimeout(Duration),
    #[error("invalid topic: {0}")]
    Topic(#[from] TopicError),
    #[error("envelope error: {0}")]
    Envelope(#[from] EnvelopeError),
}

impl LinkError {
    fn is_transient(&self) -> bool {
        matches!(
            self,
            LinkError::Connect { .. }
                | LinkError::NotConnected
                | LinkError::AckTimeout(_)
                | LinkError::Handshake(_)
        )
    }
}

#[derive(Debug, Clone)]
pub struct LinkConfig {
    pub client_id: String,
    /// QoS used by [`Link::publish_envelope`].
    pub qos: QoS,
    /// Reconnect attempts before an operation fails with `Unreachable`.
    pub max_retries: u32,
    pub initial_backoff: Duration,
    pub ack_timeout: Duration,
    pub connect_timeout: Duration,
}

impl LinkConfig {
    pub fn new(client_id: impl Into<String>) -> Self {
        Self {
            client_id: client_id.into(),
            qos: QoS::AtMostOnce,
            max_retries: 4,
            initial_backoff: Duration::from_millis(20),
            ack_timeout: Duration::from_secs(2),
            connect_timeout: Duration::from_secs(1),
        }
    }

    pub fn with_qos(mut self, qos: QoS) -> Self {
        self.qos = qos;
        self
    }

    pub fn with_retries(mut self, max_retries: u32, initial_backoff: Duration) -> Self {
        self.max_retries = max_retries;
        self.initial_backoff = initial_backoff;
        self
    }
}

/// An envelope together with the local time it came off the socket.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Received {
    pub envelope: MessageEnvelope,
    pub received_at: u64,
}

impl Received {
    /// One-way latency in milliseconds; negative under clock skew.
    pub fn latency_ms(&self) -> f64 {
        (self.received_at as f64 - self.envelope.sent_at as f64) / 1000.0
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LinkCounters {
    pub published: u64,
    pub received: u64,
    pub seq_gaps: u64,
    pub duplicates: u64,
    pub undecodable: u64,
    pub reconnects: u64,
}

struct Connection {
    stream: TcpStream,
    alive: Arc<AtomicBool>,
}

struct Inner {
    addr: SocketAddr,
    config: LinkConfig,
    writer: Mutex<Option<Connection>>,
    reconnecting: Mutex<()>,
    inbox_tx: Sender<Received>,
    inbox_rx: Receiver<Received>,
    waiters: Mutex<HashMap<u16, Sender<()>>>,
    next_packet_id: AtomicU16,
    subscriptions: Mutex<Vec<(String, QoS)>>,
    next_seq: Mutex<HashMap<String, u64>>,
    last_seen: Mutex<HashMap<String, u64>>,
    published: AtomicU64,
    received: AtomicU64,
    seq_gaps: AtomicU64,
    duplicates: AtomicU64,
    undecodable: AtomicU64,
    reconnects: AtomicU64,
}

/// One endpoint of the twin link: a broker connection with an ordered inbox.
///
/// Publishing and polling may happen from different threads. Received
/// envelopes are queued in arrival order. Sequence numbers are tracked per
/// topic, assuming one sender per topic as in the canonical namespace.
pub struct Link {
    inner: Arc<Inner>,
}

impl std::fmt::Debug for Link {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Link")
            .field("client_id", &self.inner.config.client_id)
            .field("broker", &self.inner.addr)
            .finish()
    }
}

impl Link {
    /// Connect to the broker, retrying with exponential backoff.
    pub fn connect(addr: SocketAddr, config: LinkConfig) -> Result<Self, LinkError> {
        let (inbox_tx, inbox_rx) = unbounded();
        let inner = Arc::new(Inner {
            addr,
            config,
            writer: Mutex::new(None),
            reconnecting: Mutex::new(()),
            inbox_tx,
            inbox_rx,
            waiters: Mutex::default(),
            next_packet_id: AtomicU16::new(1),
            subscriptions: Mutex::default(),
            next_seq: Mutex::default(),
            last_seen: Mutex::default(),
            published: AtomicU64::new(0),
            received: AtomicU64::new(0),
            seq_gaps: AtomicU64::new(0),
            duplicates: AtomicU64::new(0),
            undecodable: AtomicU64::new(0),
            reconnects: AtomicU64::new(0),
        });
        let link = Link { inner };
        link.retrying(|| link.inner.reconnect(false))?;
        Ok(link)
    }

    pub fn client_id(&self) -> &str {
        &self.inner.config.client_id
    }

    pub fn is_connected(&self) -> bool {
        self.inner.is_alive()
    }

    pub fn counters(&self) -> LinkCounters {
        let i = &self.inner;
        LinkCounters {
            published: i.published.load(Ordering::Relaxed),
            received: i.received.load(Ordering::Relaxed),
            seq_gaps: i.seq_gaps.load(Ordering::Relaxed),
            duplicates: i.duplicates.load(Ordering::Relaxed),
            undecodable: i.undecodable.load(Ordering::Relaxed),
            reconnects: i.reconnects.load(Ordering::Relaxed),
        }
    }

    fn retrying<T>(&self, mut op: impl FnMut() -> Result<T, LinkError>) -> Result<T, LinkError> {
        let cfg = &self.inner.config;
        let mut backoff = cfg.initial_backoff;
        let mut attempts = 0;
        loop {
            match op() {
                Ok(v) => return Ok(v),
                Err(e) if e.is_transient() => {
                    attempts += 1;
                    if attempts > cfg.max_retries {
                        warn!("{}: giving up after {attempts} attempts: {e}", cfg.client_id);
                        return Err(LinkError::Unreachable { attempts });
                    }
                    debug!("{}: {e}; retrying in {backoff:?}", cfg.client_id);
                    thread::sleep(backoff);
                    backoff = backoff.saturating_mul(2);
                    if let Err(e) = self.inner.reconnect(true) {
                        debug!("{}: reconnect failed: {e}", cfg.client_id);
                    }
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// Subscribe and wait for the SUBACK. Subscriptions are replayed after a
    /// reconnect.
    pub fn subscribe(&self, filter: &str, qos: QoS) -> Result<(), LinkError> {
        validate_filter(filter)?;
        {
            let mut subs = self.inner.subscriptions.lock();
            match subs.iter_mut().find(|(f, _)| f == filter) {
                Some(s) => s.1 = qos,
                None => subs.push((filter.to_owned(), qos)),
            }
        }
        self.retrying(|| self.inner.subscribe_once(filter, qos))
    }

    /// Stamp `seq` and `sent_at`, then publish on `envelope.topic` at the
    /// link's default QoS. Returns the envelope as sent.
    pub fn publish_envelope(&self, envelope: MessageEnvelope) -> Result<MessageEnvelope, LinkError> {
        self.publish_with_qos(envelope, self.inner.config.qos)
    }

    pub fn publish_with_qos(
        &self,
        mut envelope: MessageEnvelope,
        qos: QoS,
    ) -> Result<MessageEnvelope, LinkError> {
        crate::mqtt::validate_topic(&envelope.topic)?;
        envelope.seq = {
            let mut seqs = self.inner.next_seq.lock();
            let next = seqs.entry(envelope.topic.clone()).or_insert(0);
            *next += 1;
            *next
        };
        let sent = self.retrying(|| {
            envelope.sent_at = now_micros();
            let payload = encode_envelope(&envelope);
            self.inner.publish_once(&envelope.topic, payload, qos)?;
            Ok(envelope.clone())
        })?;
        self.inner.published.fetch_add(1, Ordering::Relaxed);
        Ok(sent)
    }

    /// Next queued envelope, if any.
    pub fn poll_envelope(&self) -> Option<MessageEnvelope> {
        self.inner.inbox_rx.try_recv().ok().map(|r| r.envelope)
    }

    pub fn poll_received(&self) -> Option<Received> {
        self.inner.inbox_rx.try_recv().ok()
    }

    /// Block until an envelope arrives or the timeout expires.
    pub fn recv_timeout(&self, timeout: Duration) -> Option<Received> {
        match self.inner.inbox_rx.recv_timeout(timeout) {
            Ok(r) => Some(r),
            Err(RecvTimeoutError::Timeout) | Err(RecvTimeoutError::Disconnected) => None,
        }
    }

    /// Disconnect cleanly.
    pub fn close(self) {
        drop(self);
    }
}

impl Drop for Link {
    fn drop(&mut self) {
        if let Some(mut conn) = self.inner.writer.lock().take() {
            if let Ok(frame) = encode(&ControlPacket::Disconnect) {
                let _ = conn.stream.write_all(&frame);
            }
            let _ = conn.stream.shutdown(Shutdown::Both);
        }
    }
}

impl Inner {
    fn is_alive(&self) -> bool {
        self.writer
            .lock()
            .as_ref()
            .is_some_and(|c| c.alive.load(Ordering::SeqCst))
    }

    fn allocate_packet_id(&self) -> u16 {
        loop {
            let id = self.next_packet_id.fetch_add(1, Ordering::Relaxed);
            if id != 0 {
                return id;
            }
        }
    }

    fn write_frame(&self, frame: &[u8]) -> Result<(), LinkError> {
        let mut guard = self.writer.lock();
        let conn = match guard.as_mut() {
            Some(c) if c.alive.load(Ordering::SeqCst) => c,
            _ => return Err(LinkError::NotConnected),
        };
        conn.stream.write_all(frame).map_err(|e| {
            conn.alive.store(false, Ordering::SeqCst);
            debug!("write failed: {e}");
            LinkError::NotConnected
        })
    }

    /// Write `frame` and wait for the ack carrying `packet_id`.
    fn exchange(&self, packet_id: u16, frame: &[u8]) -> Result<(), LinkError> {
        let (tx, rx) = bounded(1);
        self.waiters.lock().insert(packet_id, tx);
        let result = self.write_frame(frame).and_then(|()| {
            rx.recv_timeout(self.config.ack_timeout).map_err(|e| match e {
                RecvTimeoutError::Timeout => LinkError::AckTimeout(self.config.ack_timeout),
                // the reader dropped all waiters: connection lost
                RecvTimeoutError::Disconnected => LinkError::NotConnected,
            })
        });
        self.waiters.lock().remove(&packet_id);
        result
    }

    fn publish_once(&self, topic: &str, payload: Vec<u8>, qos: QoS) -> Result<(), LinkError> {
        let packet_id = (qos == QoS::AtLeastOnce).then(|| self.allocate_packet_id());
        let frame = encode(&ControlPacket::Publish {
            topic: topic.to_owned(),
            payload,
            qos,
            packet_id,
        })
        .map_err(|e| LinkError::Handshake(e.to_string()))?;
        match packet_id {
            Some(id) => self.exchange(id, &frame),
            None => self.write_frame(&frame),
        }
    }

    fn subscribe_once(&self, filter: &str, qos: QoS) -> Result<(), LinkError> {
        let packet_id = self.allocate_packet_id();
        let frame = encode(&ControlPacket::Subscribe {
            packet_id,
            filters: vec![(filter.to_owned(), qos)],
        })
        .map_err(|e| LinkError::Handshake(e.to_string()))?;
        self.exchange(packet_id, &frame)
    }

    /// Open a fresh connection unless a live one exists. With `resubscribe`,
    /// replay stored subscriptions on the new connection.
    fn reconnect(self: &Arc<Self>, resubscribe: bool) -> Result<(), LinkError> {
        let _serial = self.reconnecting.lock();
        if self.is_alive() {
            return Ok(());
        }
        let conn = self.establish()?;
        if let Some(old) = self.writer.lock().replace(conn) {
            let _ = old.stream.shutdown(Shutdown::Both);
        }
        if resubscribe {
            self.reconnects.fetch_add(1, Ordering::Relaxed);
            let subs = self.subscriptions.lock().clone();
            for (filter, qos) in subs {
                self.subscribe_once(&filter, qos)?;
            }
        }
        Ok(())
    }

    fn establish(self: &Arc<Self>) -> Result<Connection, LinkError> {
        let addr = self.addr;
        let mut stream = TcpStream::connect_timeout(&addr, self.config.connect_timeout)
            .map_err(|source| LinkError::Connect { addr, source })?;
        let _ = stream.set_nodelay(true);
        let handshake = |e: io::Error| LinkError::Handshake(e.to_string());
        let connect = encode(&ControlPacket::Connect {
            client_id: self.config.client_id.clone(),
        })
        .map_err(|e| LinkError::Handshake(e.to_string()))?;
        stream.write_all(&connect).map_err(handshake)?;
        stream
            .set_read_timeout(Some(self.config.ack_timeout))
            .map_err(handshake)?;
        match read_packet(&mut stream) {
            Ok(ControlPacket::ConnAck { return_code: 0 }) => {}
            Ok(ControlPacket::ConnAck { return_code }) => return Err(LinkError::Refused(return_code)),
            Ok(other) => {
                return Err(LinkError::Handshake(format!(
                    "expected CONNACK, got {}",
                    other.type_name()
                )))
            }
            Err(e) => return Err(LinkError::Handshake(e.to_string())),
        }
        stream.set_read_timeout(None).map_err(handshake)?;
        let alive = Arc::new(AtomicBool::new(true));
        let reader = stream.try_clone().map_err(handshake)?;
        let weak = Arc::downgrade(self);
        let reader_alive = alive.clone();
        thread::Builder::new()
            .name(format!("link-read-{}", self.config.client_id))
            .spawn(move || reader_loop(reader, weak, reader_alive))
            .map_err(handshake)?;
        Ok(Connection { stream, alive })
    }

    fn ack_inbound(&self, alive: &Arc<AtomicBool>, packet_id: u16) {
        let Ok(frame) = encode(&ControlPacket::PubAck { packet_id }) else {
            return;
        };
        let mut guard = self.writer.lock();
        if let Some(conn) = guard.as_mut() {
            if Arc::ptr_eq(&conn.alive, alive) {
                let _ = conn.stream.write_all(&frame);
            }
        }
    }

    fn track_seq(&self, envelope: &MessageEnvelope) {
        let mut last = self.last_seen.lock();
        match last.get(&envelope.topic).copied() {
            Some(prev) if envelope.seq <= prev => {
                self.duplicates.fetch_add(1, Ordering::Relaxed);
            }
            prev => {
                let expected = prev.map_or(envelope.seq, |p| p + 1);
                if prev.is_some() && envelope.seq > expected {
                    self.seq_gaps
                        .fetch_add(envelope.seq - expected, Ordering::Relaxed);
                }
                last.insert(envelope.topic.clone(), envelope.seq);
            }
        }
    }
}

fn reader_loop(stream: TcpStream, inner: Weak<Inner>, alive: Arc<AtomicBool>) {
    let mut reader = BufReader::with_capacity(64 * 1024, stream);
    loop {
        let packet = match read_packet(&mut reader) {
            Ok(p) => p,
            Err(e) => {
                debug!("link reader stopping: {e}");
                break;
            }
        };
        let Some(inner) = inner.upgrade() else { break };
        match packet {
            ControlPacket::Publish {
                payload, packet_id, ..
            } => {
                if let Some(id) = packet_id {
                    inner.ack_inbound(&alive, id);
                }
                match decode_envelope(&payload) {
                    Ok(envelope) => {
                        // the message is usable only once decoded, mirroring
                        // sent_at being stamped before encoding
                        let received_at = now_micros();
                        inner.track_seq(&envelope);
                        inner.received.fetch_add(1, Ordering::Relaxed);
                        let _ = inner.inbox_tx.send(Received {
                            envelope,
                            received_at,
                        });
                    }
                    Err(e) => {
                        warn!("dropping undecodable envelope: {e}");
                        inner.undecodable.fetch_add(1, Ordering::Relaxed);
                    }
                }
            }
            ControlPacket::PubAck { packet_id } | ControlPacket::SubAck { packet_id, .. } => {
                if let Some(tx) = inner.waiters.lock().remove(&packet_id) {
                    let _ = tx.send(());
                }
            }
            _ => {}
        }
    }
    alive.store(false, Ordering::SeqCst);
    if let Some(inner) = inner.upgrade() {
        inner.waiters.lock().clear();
    }
}
