//! Length-prefixed frames and the endpoint abstraction shared by the TCP and
//! in-memory transports.

use std::io::{self, Cursor, Read, Write};
use std::net::{Shutdown, TcpStream, ToSocketAddrs};
use std::thread;
use std::time::Duration;

use crossbeam_channel::{unbounded, Receiver, RecvTimeoutError, Sender};

use super::{WireError, WireMessage};

/// Largest accepted payload in bytes.
pub const MAX_FRAME: usize = 1 << 20;

pub fn encode_frame(msg: &WireMessage) -> Result<Vec<u8>, WireError> {
    let body = serde_json::to_vec(msg).map_err(|e| WireError::Frame(e.to_string()))?;
    if body.len() > MAX_FRAME {
        return Err(WireError::Frame(format!("payload of {} bytes", body.len())));
    }
    let mut out = Vec::with_capacity(4 + body.len());
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    Ok(out)
}

pub fn write_frame<W: Write>(w: &mut W, msg: &WireMessage) -> Result<(), WireError> {
    w.write_all(&encode_frame(msg)?)?;
    w.flush()?;
    Ok(())
}

/// Reads one frame. A clean end of stream before the length prefix is
/// [`WireError::Closed`]; anything else that is not a valid frame is
/// [`WireError::Frame`].
pub fn read_frame<R: Read>(r: &mut R) -> Result<WireMessage, WireError> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut len[got..]) {
            Ok(0) if got == 0 => return Err(WireError::Closed),
            Ok(0) => return Err(WireError::Frame("truncated length prefix".into())),
            Ok(k) => got += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME {
        return Err(WireError::Frame(format!("declared length {len} exceeds {MAX_FRAME}")));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => WireError::Frame("truncated payload".into()),
        _ => WireError::Io(e),
    })?;
    serde_json::from_slice(&body).map_err(|e| WireError::Frame(e.to_string()))
}

type Inbox = Receiver<Result<WireMessage, WireError>>;

trait FrameSink: Send {
    fn send_bytes(&mut self, bytes: &[u8]) -> Result<(), WireError>;
}

struct TcpSink(TcpStream);

impl FrameSink for TcpSink {
    fn send_bytes(&mut self, bytes: &[u8]) -> Result<(), WireError> {
        self.0.write_all(bytes)?;
        self.0.flush()?;
        Ok(())
    }
}

impl Drop for TcpSink {
    fn drop(&mut self) {
        let _ = self.0.shutdown(Shutdown::Both);
    }
}

/// Decodes each written buffer on the spot and delivers the result to the
/// peer's inbox, so memory endpoints go through the same codec as sockets.
struct MemorySink(Sender<Result<WireMessage, WireError>>);

impl FrameSink for MemorySink {
    fn send_bytes(&mut self, bytes: &[u8]) -> Result<(), WireError> {
        let mut cur = Cursor::new(bytes);
        loop {
            if cur.position() as usize == bytes.len() {
                return Ok(());
            }
            let decoded = read_frame(&mut cur);
            let stop = decoded.is_err();
            self.0.send(decoded).map_err(|_| WireError::Closed)?;
            if stop {
                return Ok(());
            }
        }
    }
}

/// One side of a connection: a frame sink plus an inbox of decoded messages.
pub struct Endpoint {
    sink: Box<dyn FrameSink>,
    inbox: Inbox,
    peer: String,
}

impl std::fmt::Debug for Endpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Endpoint").field("peer", &self.peer).finish()
    }
}

impl Endpoint {
    /// Wraps a connected stream; a reader thread feeds the inbox.
    pub fn tcp(stream: TcpStream) -> Result<Self, WireError> {
        stream.set_nodelay(true)?;
        let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_else(|_| "tcp".into());
        let mut reader = stream.try_clone()?;
        let (tx, rx) = unbounded();
        thread::Builder::new().name(format!("wire-read {peer}")).spawn(move || loop {
            let msg = read_frame(&mut reader);
            let stop = msg.is_err();
            if tx.send(msg).is_err() || stop {
                break;
            }
        })?;
        Ok(Endpoint { sink: Box::new(TcpSink(stream)), inbox: rx, peer })
    }

    pub fn peer(&self) -> &str {
        &self.peer
    }

    pub fn send(&mut self, msg: &WireMessage) -> Result<(), WireError> {
        let bytes = encode_frame(msg)?;
        self.sink.send_bytes(&bytes)
    }

    /// Writes bytes verbatim; used to exercise malformed-frame handling.
    pub fn send_raw(&mut self, bytes: &[u8]) -> Result<(), WireError> {
        self.sink.send_bytes(bytes)
    }

    pub fn inbox(&self) -> &Receiver<Result<WireMessage, WireError>> {
        &self.inbox
    }

    pub fn recv(&self) -> Result<WireMessage, WireError> {
        self.inbox.recv().map_err(|_| WireError::Closed)?
    }

    pub fn recv_timeout(&self, timeout: Duration, what: &str) -> Result<WireMessage, WireError> {
        match self.inbox.recv_timeout(timeout) {
            Ok(m) => m,
            Err(RecvTimeoutError::Timeout) => Err(WireError::Timeout(what.to_string())),
            Err(RecvTimeoutError::Disconnected) => Err(WireError::Closed),
        }
    }
}

/// Two connected in-memory endpoints.
pub fn memory_pair() -> (Endpoint, Endpoint) {
    let (tx1, rx1) = unbounded();
    let (tx2, rx2) = unbounded();
    (
        Endpoint { sink: Box::new(MemorySink(tx2)), inbox: rx1, peer: "memory".into() },
        Endpoint { sink: Box::new(MemorySink(tx1)), inbox: rx2, peer: "memory".into() },
    )
}

/// Connects to `addr`, retrying up to `retries` more times with a short
/// linear backoff.
pub fn connect_with_retry<A: ToSocketAddrs + std::fmt::Display>(
    addr: A,
    retries: u32,
) -> Result<Endpoint, WireError> {
    let mut attempt = 0;
    loop {
        match TcpStream::connect(&addr) {
            Ok(s) => return Endpoint::tcp(s),
            Err(e) if attempt < retries => {
                attempt += 1;
                log::warn!("connect to {addr} failed ({e}); retry {attempt}/{retries}");
                thread::sleep(Duration::from_millis(100 * attempt as u64));
            }
            Err(e) => return Err(e.into()),
        }
    }
}
