//! Length-prefixed frames: `length u32 | msg_type u8 | payload`, big-endian,
//! where `length` counts payload bytes only.

use std::io::{self, Read, Write};

use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::store::MatrixHeader;
use crate::wire::{self, Reader};

/// Upper bound on a single frame's payload.
pub const MAX_FRAME_PAYLOAD: u32 = 1 << 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MsgType {
    PutMatrixMeta = 1,
    PutRow = 2,
    SubmitMatvec = 3,
    JobStatus = 4,
    FetchResult = 5,
    Ack = 6,
    Error = 7,
    NotReady = 8,
}

impl TryFrom<u8> for MsgType {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        Ok(match v {
            1 => MsgType::PutMatrixMeta,
            2 => MsgType::PutRow,
            3 => MsgType::SubmitMatvec,
            4 => MsgType::JobStatus,
            5 => MsgType::FetchResult,
            6 => MsgType::Ack,
            7 => MsgType::Error,
            8 => MsgType::NotReady,
            other => return Err(Error::protocol(format!("unknown message type {other}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub msg_type: MsgType,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(msg_type: MsgType, payload: Vec<u8>) -> Self {
        Frame { msg_type, payload }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(5 + self.payload.len());
        out.extend_from_slice(&(self.payload.len() as u32).to_be_bytes());
        out.push(self.msg_type as u8);
        out.extend_from_slice(&self.payload);
        out
    }

    /// Decodes exactly one frame occupying all of `bytes`.
    pub fn decode(bytes: &[u8]) -> Result<Frame> {
        let mut r = Reader::new(bytes);
        let len = r.u32()?;
        let msg_type = MsgType::try_from(r.u8()?)?;
        if len as usize != r.remaining() {
            return Err(Error::protocol(format!(
                "frame length {len} disagrees with {} payload bytes",
                r.remaining()
            )));
        }
        Ok(Frame {
            msg_type,
            payload: r.bytes(len as usize)?.to_vec(),
        })
    }

    pub fn ack(payload: Vec<u8>) -> Self {
        Frame::new(MsgType::Ack, payload)
    }

    pub fn error(code: ErrorCode, message: &str) -> Self {
        let mut p = (code as u16).to_be_bytes().to_vec();
        p.extend_from_slice(message.as_bytes());
        Frame::new(MsgType::Error, p)
    }

    /// `(code, message)` of an `ERROR` frame.
    pub fn error_parts(&self) -> Option<(u16, String)> {
        if self.msg_type != MsgType::Error || self.payload.len() < 2 {
            return None;
        }
        let code = u16::from_be_bytes([self.payload[0], self.payload[1]]);
        Some((code, String::from_utf8_lossy(&self.payload[2..]).into_owned()))
    }
}

/// Reads one frame; `Ok(None)` on a clean end of stream before the header.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<Frame>> {
    let mut head = [0u8; 5];
    match r.read_exact(&mut head) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_be_bytes([head[0], head[1], head[2], head[3]]);
    if len > MAX_FRAME_PAYLOAD {
        return Err(Error::protocol(format!("frame of {len} bytes exceeds limit")));
    }
    let msg_type = MsgType::try_from(head[4])?;
    let mut payload = vec![0u8; len as usize];
    r.read_exact(&mut payload)?;
    Ok(Some(Frame { msg_type, payload }))
}

pub fn write_frame<W: Write>(w: &mut W, frame: &Frame) -> Result<()> {
    w.write_all(&frame.encode())?;
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u16)]
pub enum ErrorCode {
    /// Message out of order, e.g. a row before its matrix's metadata.
    Sequence = 1,
    Malformed = 2,
    UnknownMatrix = 3,
    UnknownJob = 4,
    Duplicate = 5,
    LengthMismatch = 6,
    JobFailed = 7,
    Internal = 8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum JobState {
    Pending = 0,
    Running = 1,
    Done = 2,
    Failed = 3,
}

impl TryFrom<u8> for JobState {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        Ok(match v {
            0 => JobState::Pending,
            1 => JobState::Running,
            2 => JobState::Done,
            3 => JobState::Failed,
            other => return Err(Error::protocol(format!("unknown job state {other}"))),
        })
    }
}

/// Client-to-server messages with their payload layouts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Request {
    /// `matrix_id u64 | SEIG header bytes`
    PutMatrixMeta { matrix_id: u64, header: Vec<u8> },
    /// `matrix_id u64 | row_index u64 | count u64 | count ciphertexts`
    PutRow {
        matrix_id: u64,
        row_index: u64,
        count: u64,
        data: Vec<u8>,
    },
    /// `matrix_id u64 | num_reduces u32 | count u64 | count residues of q's width`
    SubmitMatvec {
        matrix_id: u64,
        num_reduces: u32,
        count: u64,
        data: Vec<u8>,
    },
    /// `job_id u64`
    JobStatus { job_id: u64 },
    /// `job_id u64`
    FetchResult { job_id: u64 },
}

impl Request {
    pub fn put_matrix_meta(matrix_id: u64, header: &MatrixHeader) -> Self {
        Request::PutMatrixMeta {
            matrix_id,
            header: header.to_bytes(),
        }
    }

    pub fn submit_matvec(
        matrix_id: u64,
        num_reduces: u32,
        exponents: &[BigUint],
        width: usize,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(exponents.len() * width);
        for e in exponents {
            wire::put_fixed(&mut data, e, width)?;
        }
        Ok(Request::SubmitMatvec {
            matrix_id,
            num_reduces,
            count: exponents.len() as u64,
            data,
        })
    }

    pub fn to_frame(&self) -> Frame {
        match self {
            Request::PutMatrixMeta { matrix_id, header } => {
                let mut p = matrix_id.to_be_bytes().to_vec();
                p.extend_from_slice(header);
                Frame::new(MsgType::PutMatrixMeta, p)
            }
            Request::PutRow {
                matrix_id,
                row_index,
                count,
                data,
            } => {
                let mut p = Vec::with_capacity(24 + data.len());
                p.extend_from_slice(&matrix_id.to_be_bytes());
                p.extend_from_slice(&row_index.to_be_bytes());
                p.extend_from_slice(&count.to_be_bytes());
                p.extend_from_slice(data);
                Frame::new(MsgType::PutRow, p)
            }
            Request::SubmitMatvec {
                matrix_id,
                num_reduces,
                count,
                data,
            } => {
                let mut p = Vec::with_capacity(20 + data.len());
                p.extend_from_slice(&matrix_id.to_be_bytes());
                p.extend_from_slice(&num_reduces.to_be_bytes());
                p.extend_from_slice(&count.to_be_bytes());
                p.extend_from_slice(data);
                Frame::new(MsgType::SubmitMatvec, p)
            }
            Request::JobStatus { job_id } => {
                Frame::new(MsgType::JobStatus, job_id.to_be_bytes().to_vec())
            }
            Request::FetchResult { job_id } => {
                Frame::new(MsgType::FetchResult, job_id.to_be_bytes().to_vec())
            }
        }
    }

    pub fn from_frame(frame: &Frame) -> Result<Self> {
        let mut r = Reader::new(&frame.payload);
        let req = match frame.msg_type {
            MsgType::PutMatrixMeta => Request::PutMatrixMeta {
                matrix_id: r.u64()?,
                header: r.bytes(r.remaining())?.to_vec(),
            },
            MsgType::PutRow => Request::PutRow {
                matrix_id: r.u64()?,
                row_index: r.u64()?,
                count: r.u64()?,
                data: r.bytes(r.remaining())?.to_vec(),
            },
            MsgType::SubmitMatvec => Request::SubmitMatvec {
                matrix_id: r.u64()?,
                num_reduces: r.u32()?,
                count: r.u64()?,
                data: r.bytes(r.remaining())?.to_vec(),
            },
            MsgType::JobStatus => Request::JobStatus { job_id: r.u64()? },
            MsgType::FetchResult => Request::FetchResult { job_id: r.u64()? },
            other => {
                return Err(Error::protocol(format!("{other:?} is not a request")));
            }
        };
        r.finish()?;
        Ok(req)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn frame_layout_is_bit_exact() {
        let f = Request::JobStatus { job_id: 0x0102 }.to_frame();
        assert_eq!(f.encode(), vec![0, 0, 0, 8, 4, 0, 0, 0, 0, 0, 0, 1, 2]);
        let e = Frame::error(ErrorCode::UnknownJob, "no");
        assert_eq!(e.encode(), vec![0, 0, 0, 4, 7, 0, 4, b'n', b'o']);
        assert_eq!(e.error_parts(), Some((4, "no".into())));
    }

    #[test]
    fn unknown_type_and_bad_length_are_rejected() {
        assert!(Frame::decode(&[0, 0, 0, 0, 9]).is_err());
        assert!(Frame::decode(&[0, 0, 0, 2, 4, 1]).is_err());
        let mut cursor = std::io::Cursor::new(vec![0xff, 0xff, 0xff, 0xff, 4]);
        assert!(read_frame(&mut cursor).is_err());
        let mut empty = std::io::Cursor::new(Vec::<u8>::new());
        assert!(read_frame(&mut empty).unwrap().is_none());
    }

    #[test]
    fn responses_are_not_requests() {
        assert!(Request::from_frame(&Frame::ack(vec![])).is_err());
        let trailing = Frame::new(MsgType::JobStatus, vec![0; 9]);
        assert!(Request::from_frame(&trailing).is_err());
    }

    #[test]
    fn submit_encodes_fixed_width_residues() {
        let req = Request::submit_matvec(7, 2, &[BigUint::from(1u32), BigUint::from(258u32)], 2).unwrap();
        let f = req.to_frame();
        assert_eq!(&f.payload[12..20], &2u64.to_be_bytes());
        assert_eq!(&f.payload[20..], &[0, 1, 1, 2]);
        assert!(Request::submit_matvec(7, 2, &[BigUint::from(70000u32)], 2).is_err());
    }

    proptest! {
        #[test]
        fn requests_survive_framing(id in any::<u64>(), row in any::<u64>(), data in proptest::collection::vec(any::<u8>(), 0..64)) {
            for req in [
                Request::PutRow { matrix_id: id, row_index: row, count: data.len() as u64, data: data.clone() },
                Request::PutMatrixMeta { matrix_id: id, header: data.clone() },
                Request::SubmitMatvec { matrix_id: id, num_reduces: row as u32, count: 1, data: data.clone() },
                Request::FetchResult { job_id: id },
            ] {
                let decoded = Frame::decode(&req.to_frame().encode()).unwrap();
                prop_assert_eq!(Request::from_frame(&decoded).unwrap(), req);
            }
        }
    }
}
