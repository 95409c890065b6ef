use std::collections::HashMap;
use std::io::{BufReader, BufWriter, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use crossbeam_channel::{unbounded, Receiver};
use log::{debug, info};
use parking_lot::Mutex;
use thiserror::Error;

use super::handler::{BrokerCore, Flow, SessionHandler};
use super::routing::Outbound;
use super::stats::StatsSnapshot;
use crate::mqtt::{read_packet, ReadError};

#[derive(Debug, Error)]
pub enum BrokerError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        source: std::io::Error,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

type Sockets = Arc<Mutex<HashMap<u64, TcpStream>>>;

/// A running broker. Dropping the handle without calling
/// [`BrokerHandle::shutdown`] leaves the listener running.
pub struct BrokerHandle {
    addr: SocketAddr,
    core: Arc<BrokerCore>,
    stop: Arc<AtomicBool>,
    sockets: Sockets,
    acceptor: Option<JoinHandle<()>>,
}

impl BrokerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn core(&self) -> &Arc<BrokerCore> {
        &self.core
    }

    pub fn stats(&self) -> StatsSnapshot {
        self.core.stats().snapshot()
    }

    /// Stop accepting, close every client socket and return final counters.
    pub fn shutdown(mut self) -> StatsSnapshot {
        self.stop.store(true, Ordering::SeqCst);
        // wake the blocking accept()
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
        for (_, s) in self.sockets.lock().drain() {
            let _ = s.shutdown(Shutdown::Both);
        }
        info!("broker on {} stopped", self.addr);
        self.stats()
    }
}

/// Bind and start serving in background threads.
pub fn run_broker<A: ToSocketAddrs + std::fmt::Display>(bind: A) -> Result<BrokerHandle, BrokerError> {
    let listener = TcpListener::bind(&bind).map_err(|source| BrokerError::Bind {
        addr: bind.to_string(),
        source,
    })?;
    let addr = listener.local_addr()?;
    let core = BrokerCore::new();
    let stop = Arc::new(AtomicBool::new(false));
    let sockets: Sockets = Arc::default();
    let acceptor = {
        let core = core.clone();
        let stop = stop.clone();
        let sockets = sockets.clone();
        thread::Builder::new()
            .name("broker-accept".into())
            .spawn(move || accept_loop(listener, core, stop, sockets))?
    };
    info!("broker listening on {addr}");
    Ok(BrokerHandle {
        addr,
        core,
        stop,
        sockets,
        acceptor: Some(acceptor),
    })
}

fn accept_loop(listener: TcpListener, core: Arc<BrokerCore>, stop: Arc<AtomicBool>, sockets: Sockets) {
    static SOCKET_IDS: AtomicU64 = AtomicU64::new(0);
    for stream in listener.incoming() {
        if stop.load(Ordering::SeqCst) {
            break;
        }
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                debug!("accept failed: {e}");
                continue;
            }
        };
        let _ = stream.set_nodelay(true);
        let socket_id = SOCKET_IDS.fetch_add(1, Ordering::Relaxed);
        if let Ok(clone) = stream.try_clone() {
            sockets.lock().insert(socket_id, clone);
        }
        let core = core.clone();
        let sockets = sockets.clone();
        let _ = thread::Builder::new()
            .name("broker-conn".into())
            .spawn(move || {
                serve_connection(stream, core);
                sockets.lock().remove(&socket_id);
            });
    }
}

fn serve_connection(stream: TcpStream, core: Arc<BrokerCore>) {
    let (tx, rx) = unbounded();
    let writer = match stream.try_clone() {
        Ok(w) => w,
        Err(_) => return,
    };
    let writer_thread = thread::Builder::new()
        .name("broker-write".into())
        .spawn(move || write_loop(writer, rx));
    let mut handler = SessionHandler::new(core, tx);
    let mut reader = BufReader::with_capacity(64 * 1024, &stream);
    loop {
        match read_packet(&mut reader) {
            Ok(packet) => {
                if handler.handle(packet) == Flow::Close {
                    break;
                }
            }
            Err(ReadError::Codec(e)) => {
                handler.protocol_error(&e.to_string());
                break;
            }
            Err(_) => {
                handler.connection_lost();
                break;
            }
        }
    }
    handler.connection_lost();
    if let Ok(h) = writer_thread {
        let _ = h.join();
    }
}

fn write_loop(stream: TcpStream, rx: Receiver<Outbound>) {
    let mut out = BufWriter::with_capacity(64 * 1024, &stream);
    'outer: while let Ok(msg) = rx.recv() {
        let mut next = Some(msg);
        while let Some(msg) = next {
            match msg {
                Outbound::Frame(frame) => {
                    if out.write_all(&frame).is_err() {
                        break 'outer;
                    }
                }
                Outbound::Close => break 'outer,
            }
            next = rx.try_recv().ok();
        }
        if out.flush().is_err() {
            break;
        }
    }
    let _ = out.flush();
    drop(out);
    let _ = stream.shutdown(Shutdown::Both);
}
