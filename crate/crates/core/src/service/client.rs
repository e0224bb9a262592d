use std::io::{BufReader, BufWriter};
use std::net::{TcpStream, ToSocketAddrs};
use std::thread;
use std::time::Duration;

use num_bigint::BigUint;

use super::frame::{read_frame, write_frame, Frame, JobState, MsgType, Request};
use super::Service;
use crate::error::{Error, Result};
use crate::paillier::Ciphertext;
use crate::store::{EncryptedVector, MatrixHeader};
use crate::wire::{self, Reader};

/// One request/response exchange with a service.
pub trait Transport {
    fn roundtrip(&mut self, request: &Frame) -> Result<Frame>;
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn roundtrip(&mut self, request: &Frame) -> Result<Frame> {
        (**self).roundtrip(request)
    }
}

pub struct TcpTransport {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl TcpTransport {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(TcpTransport {
            reader: BufReader::new(stream.try_clone()?),
            writer: BufWriter::new(stream),
        })
    }
}

impl Transport for TcpTransport {
    fn roundtrip(&mut self, request: &Frame) -> Result<Frame> {
        write_frame(&mut self.writer, request)?;
        read_frame(&mut self.reader)?
            .ok_or_else(|| Error::protocol("connection closed before a response"))
    }
}

/// In-process transport that still goes through the byte encoding.
pub struct LoopbackTransport {
    service: Service,
}

impl LoopbackTransport {
    pub fn new(service: Service) -> Self {
        LoopbackTransport { service }
    }
}

impl Transport for LoopbackTransport {
    fn roundtrip(&mut self, request: &Frame) -> Result<Frame> {
        let req = Frame::decode(&request.encode())?;
        Frame::decode(&self.service.handle(&req).encode())
    }
}

/// Keeps a copy of every encoded frame in both directions.
pub struct RecordingTransport<T> {
    inner: T,
    pub sent: Vec<Vec<u8>>,
    pub received: Vec<Vec<u8>>,
}

impl<T: Transport> RecordingTransport<T> {
    pub fn new(inner: T) -> Self {
        RecordingTransport {
            inner,
            sent: Vec::new(),
            received: Vec::new(),
        }
    }
}

impl<T: Transport> Transport for RecordingTransport<T> {
    fn roundtrip(&mut self, request: &Frame) -> Result<Frame> {
        self.sent.push(request.encode());
        let resp = self.inner.roundtrip(request)?;
        self.received.push(resp.encode());
        Ok(resp)
    }
}

pub enum FetchOutcome {
    Ready(EncryptedVector),
    NotReady(JobState),
}

pub struct ServiceClient<T> {
    transport: T,
    pub poll_interval: Duration,
}

impl<T: Transport> ServiceClient<T> {
    pub fn new(transport: T) -> Self {
        ServiceClient {
            transport,
            poll_interval: Duration::from_millis(2),
        }
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    pub fn into_transport(self) -> T {
        self.transport
    }

    fn call(&mut self, req: &Request) -> Result<Frame> {
        let resp = self.transport.roundtrip(&req.to_frame())?;
        if let Some((code, msg)) = resp.error_parts() {
            return Err(Error::protocol(format!("server error {code}: {msg}")));
        }
        if resp.msg_type == MsgType::Error {
            return Err(Error::protocol("malformed error frame"));
        }
        Ok(resp)
    }

    fn expect_ack(resp: Frame) -> Result<Vec<u8>> {
        match resp.msg_type {
            MsgType::Ack => Ok(resp.payload),
            other => Err(Error::protocol(format!("expected ACK, got {other:?}"))),
        }
    }

    pub fn put_matrix_meta(&mut self, matrix_id: u64, header: &MatrixHeader) -> Result<()> {
        let resp = self.call(&Request::put_matrix_meta(matrix_id, header))?;
        Self::expect_ack(resp).map(drop)
    }

    /// Uploads one row; returns the number of rows still missing.
    pub fn put_row(&mut self, matrix_id: u64, row_index: u64, row: &[Ciphertext], width: usize) -> Result<u64> {
        let mut data = Vec::with_capacity(row.len() * width);
        for c in row {
            wire::put_fixed(&mut data, c.value(), width)?;
        }
        self.put_row_bytes(matrix_id, row_index, row.len() as u64, data)
    }

    pub fn put_row_bytes(&mut self, matrix_id: u64, row_index: u64, count: u64, data: Vec<u8>) -> Result<u64> {
        let resp = self.call(&Request::PutRow {
            matrix_id,
            row_index,
            count,
            data,
        })?;
        let payload = Self::expect_ack(resp)?;
        let mut r = Reader::new(&payload);
        let remaining = r.u64()?;
        r.finish()?;
        Ok(remaining)
    }

    pub fn submit_matvec(
        &mut self,
        matrix_id: u64,
        exponents: &[BigUint],
        q_width: usize,
        num_reduces: u32,
    ) -> Result<u64> {
        let req = Request::submit_matvec(matrix_id, num_reduces, exponents, q_width)?;
        let payload = Self::expect_ack(self.call(&req)?)?;
        let mut r = Reader::new(&payload);
        let id = r.u64()?;
        r.finish()?;
        Ok(id)
    }

    pub fn job_status(&mut self, job_id: u64) -> Result<JobState> {
        let payload = Self::expect_ack(self.call(&Request::JobStatus { job_id })?)?;
        let mut r = Reader::new(&payload);
        if r.u64()? != job_id {
            return Err(Error::protocol("status for a different job"));
        }
        let state = JobState::try_from(r.u8()?)?;
        r.finish()?;
        Ok(state)
    }

    pub fn fetch_result(&mut self, job_id: u64) -> Result<FetchOutcome> {
        let resp = self.call(&Request::FetchResult { job_id })?;
        match resp.msg_type {
            MsgType::Ack => Ok(FetchOutcome::Ready(EncryptedVector::from_bytes(&resp.payload)?)),
            MsgType::NotReady => {
                let mut r = Reader::new(&resp.payload);
                r.u64()?;
                Ok(FetchOutcome::NotReady(JobState::try_from(r.u8()?)?))
            }
            other => Err(Error::protocol(format!("unexpected {other:?} to FETCH_RESULT"))),
        }
    }

    /// Polls until the job finishes and returns its result.
    pub fn wait_result(&mut self, job_id: u64) -> Result<EncryptedVector> {
        loop {
            match self.fetch_result(job_id)? {
                FetchOutcome::Ready(v) => return Ok(v),
                FetchOutcome::NotReady(_) => thread::sleep(self.poll_interval),
            }
        }
    }

    pub fn matvec(
        &mut self,
        matrix_id: u64,
        exponents: &[BigUint],
        q_width: usize,
        num_reduces: u32,
    ) -> Result<EncryptedVector> {
        let job = self.submit_matvec(matrix_id, exponents, q_width, num_reduces)?;
        self.wait_result(job)
    }
}
