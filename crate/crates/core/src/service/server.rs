use std::io::{BufReader, BufWriter};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::thread::{self, JoinHandle};

use super::frame::{read_frame, write_frame, ErrorCode, Frame};
use super::Service;
use crate::error::Result;

/// Serves frames on one connection until the peer disconnects.
pub fn serve_connection(service: &Service, stream: TcpStream) -> Result<()> {
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    loop {
        let frame = match read_frame(&mut reader) {
            Ok(Some(f)) => f,
            Ok(None) => return Ok(()),
            Err(e) => {
                // The stream position is unknown after a bad header.
                let _ = write_frame(&mut writer, &Frame::error(ErrorCode::Malformed, &e.to_string()));
                return Err(e);
            }
        };
        write_frame(&mut writer, &service.handle(&frame))?;
    }
}

/// A TCP listener dispatching each connection to its own thread.
pub struct Server {
    addr: SocketAddr,
    handle: JoinHandle<()>,
}

impl Server {
    pub fn bind(addr: &str, service: Service) -> Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let handle = thread::Builder::new()
            .name("seceig-accept".into())
            .spawn(move || accept_loop(listener, service))?;
        Ok(Server { addr, handle })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Blocks for the lifetime of the listener.
    pub fn join(self) {
        let _ = self.handle.join();
    }
}

fn accept_loop(listener: TcpListener, service: Service) {
    for stream in listener.incoming() {
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                log::warn!("accept failed: {e}");
                continue;
            }
        };
        let svc = service.clone();
        let peer = stream.peer_addr().ok();
        thread::spawn(move || {
            if let Err(e) = serve_connection(&svc, stream) {
                log::warn!("connection {peer:?} closed: {e}");
            }
        });
    }
}
