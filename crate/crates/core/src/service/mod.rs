//! The untrusted cloud endpoint: matrix ingestion, job queue and result
//! storage behind a framed request/response protocol.

pub mod client;
pub mod frame;
pub mod server;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Condvar, Mutex, Weak};
use std::thread;

use num_bigint::BigUint;

use crate::engine::{run_job, JobStats, MatVecJob, Partitioner};
use crate::error::{Error, Result};
use crate::modexp::ModPowStrategy;
use crate::store::{EncryptedMatrix, EncryptedMatrixWriter, MatrixHeader};

pub use client::{LoopbackTransport, RecordingTransport, ServiceClient, TcpTransport, Transport};
pub use frame::{ErrorCode, Frame, JobState, MsgType, Request};
pub use server::{serve_connection, Server};

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub workers: usize,
    pub strategy: ModPowStrategy,
    pub partitioner: Partitioner,
    pub block_rows: Option<u64>,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            data_dir: data_dir.into(),
            workers: 1,
            strategy: ModPowStrategy::default(),
            partitioner: Partitioner::default(),
            block_rows: None,
        }
    }
}

enum MatrixSlot {
    Ingesting(EncryptedMatrixWriter),
    Ready(EncryptedMatrix),
}

struct JobRecord {
    state: JobState,
    job: Option<MatVecJob>,
    error: Option<String>,
    stats: Option<JobStats>,
}

#[derive(Default)]
struct State {
    matrices: HashMap<u64, MatrixSlot>,
    jobs: HashMap<u64, JobRecord>,
    next_job: u64,
}

struct Inner {
    config: ServiceConfig,
    state: Mutex<State>,
    queue: Mutex<Sender<u64>>,
    paused: Mutex<bool>,
    resumed: Condvar,
}

/// Shared handle to one service instance. Jobs run one at a time on a
/// background executor, each on a pool of `config.workers` threads.
#[derive(Clone)]
pub struct Service {
    inner: Arc<Inner>,
}

struct Rejection(ErrorCode, String);

impl From<Error> for Rejection {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Integrity(_) => ErrorCode::Duplicate,
            Error::Format(_) => ErrorCode::Malformed,
            Error::Domain(_) => ErrorCode::LengthMismatch,
            Error::Protocol(_) => ErrorCode::Sequence,
            _ => ErrorCode::Internal,
        };
        Rejection(code, e.to_string())
    }
}

fn reject(code: ErrorCode, msg: impl Into<String>) -> Rejection {
    Rejection(code, msg.into())
}

impl Service {
    /// Opens the data directory, registering any complete matrix files
    /// already present, and starts the job executor.
    pub fn new(config: ServiceConfig) -> Result<Self> {
        if config.workers == 0 {
            return Err(Error::Config("worker count must be at least 1".into()));
        }
        fs::create_dir_all(&config.data_dir)?;
        let mut state = State {
            next_job: 1,
            ..State::default()
        };
        for entry in fs::read_dir(&config.data_dir)? {
            let path = entry?.path();
            if let Some(id) = matrix_id_from_path(&path) {
                let m = EncryptedMatrix::open(&path)?;
                log::info!("loaded matrix {id} from {}", path.display());
                state.matrices.insert(id, MatrixSlot::Ready(m));
            }
        }
        let (tx, rx) = mpsc::channel();
        let inner = Arc::new(Inner {
            config,
            state: Mutex::new(state),
            queue: Mutex::new(tx),
            paused: Mutex::new(false),
            resumed: Condvar::new(),
        });
        let weak = Arc::downgrade(&inner);
        thread::Builder::new()
            .name("seceig-executor".into())
            .spawn(move || executor(weak, rx))?;
        Ok(Service { inner })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.inner.config
    }

    pub fn matrix_path(&self, matrix_id: u64) -> PathBuf {
        self.inner
            .config
            .data_dir
            .join(format!("matrix-{matrix_id}.seig"))
    }

    pub fn result_path(&self, job_id: u64) -> PathBuf {
        self.inner.config.data_dir.join(format!("job-{job_id}.sevr"))
    }

    /// Stops the executor from starting further jobs until `resume`.
    pub fn pause(&self) {
        *self.inner.paused.lock().unwrap() = true;
    }

    pub fn resume(&self) {
        *self.inner.paused.lock().unwrap() = false;
        self.inner.resumed.notify_all();
    }

    pub fn job_state(&self, job_id: u64) -> Option<JobState> {
        let st = self.inner.state.lock().unwrap();
        st.jobs.get(&job_id).map(|j| j.state)
    }

    pub fn job_stats(&self, job_id: u64) -> Option<JobStats> {
        let st = self.inner.state.lock().unwrap();
        st.jobs.get(&job_id).and_then(|j| j.stats.clone())
    }

    /// Answers one request frame. Never panics on hostile input.
    pub fn handle(&self, frame: &Frame) -> Frame {
        let req = match Request::from_frame(frame) {
            Ok(r) => r,
            Err(e) => return Frame::error(ErrorCode::Malformed, &e.to_string()),
        };
        let outcome = match req {
            Request::PutMatrixMeta { matrix_id, header } => self.put_meta(matrix_id, &header),
            Request::PutRow {
                matrix_id,
                row_index,
                count,
                data,
            } => self.put_row(matrix_id, row_index, count, &data),
            Request::SubmitMatvec {
                matrix_id,
                num_reduces,
                count,
                data,
            } => self.submit(matrix_id, num_reduces, count, &data),
            Request::JobStatus { job_id } => self.status(job_id),
            Request::FetchResult { job_id } => self.fetch(job_id),
        };
        match outcome {
            Ok(f) => f,
            Err(Rejection(code, msg)) => {
                log::debug!("rejecting {:?}: {msg}", frame.msg_type);
                Frame::error(code, &msg)
            }
        }
    }

    fn put_meta(&self, matrix_id: u64, header: &[u8]) -> Result<Frame, Rejection> {
        let header = MatrixHeader::from_bytes(header)?;
        let mut st = self.inner.state.lock().unwrap();
        if st.matrices.contains_key(&matrix_id) {
            return Err(reject(
                ErrorCode::Duplicate,
                format!("matrix {matrix_id} already exists"),
            ));
        }
        let writer = EncryptedMatrixWriter::create(self.matrix_path(matrix_id), header)?;
        st.matrices.insert(matrix_id, MatrixSlot::Ingesting(writer));
        Ok(Frame::ack(Vec::new()))
    }

    fn put_row(
        &self,
        matrix_id: u64,
        row_index: u64,
        count: u64,
        data: &[u8],
    ) -> Result<Frame, Rejection> {
        let mut st = self.inner.state.lock().unwrap();
        let slot = st.matrices.get_mut(&matrix_id).ok_or_else(|| {
            reject(
                ErrorCode::Sequence,
                format!("row for matrix {matrix_id} before its metadata"),
            )
        })?;
        let writer = match slot {
            MatrixSlot::Ingesting(w) => w,
            MatrixSlot::Ready(_) => {
                return Err(reject(
                    ErrorCode::Duplicate,
                    format!("matrix {matrix_id} is already complete"),
                ))
            }
        };
        let header = writer.header();
        if count != header.n_cols {
            return Err(reject(
                ErrorCode::LengthMismatch,
                format!("row has {count} entries, matrix has {} columns", header.n_cols),
            ));
        }
        if data.len() as u128 != count as u128 * header.ciphertext_width() as u128 {
            return Err(reject(
                ErrorCode::Malformed,
                format!("row payload of {} bytes for {count} ciphertexts", data.len()),
            ));
        }
        writer.append_row_bytes(row_index, data)?;
        let remaining = writer.missing_rows().len() as u64;
        if remaining == 0 {
            if let Some(MatrixSlot::Ingesting(w)) = st.matrices.remove(&matrix_id) {
                let m = w.finalize()?;
                log::info!("matrix {matrix_id} complete at {}", m.path().display());
                st.matrices.insert(matrix_id, MatrixSlot::Ready(m));
            }
        }
        Ok(Frame::ack(remaining.to_be_bytes().to_vec()))
    }

    fn submit(
        &self,
        matrix_id: u64,
        num_reduces: u32,
        count: u64,
        data: &[u8],
    ) -> Result<Frame, Rejection> {
        let mut st = self.inner.state.lock().unwrap();
        let matrix = match st.matrices.get(&matrix_id) {
            Some(MatrixSlot::Ready(m)) => m.clone(),
            Some(MatrixSlot::Ingesting(w)) => {
                return Err(reject(
                    ErrorCode::Sequence,
                    format!(
                        "matrix {matrix_id} is incomplete: {}",
                        w.check_complete().unwrap_err()
                    ),
                ))
            }
            None => {
                return Err(reject(
                    ErrorCode::UnknownMatrix,
                    format!("unknown matrix {matrix_id}"),
                ))
            }
        };
        let header = matrix.header();
        if count != header.n_cols {
            return Err(reject(
                ErrorCode::LengthMismatch,
                format!("vector has {count} entries, matrix has {} columns", header.n_cols),
            ));
        }
        let width = header.codec.q_width();
        if data.len() as u128 != count as u128 * width as u128 {
            return Err(reject(
                ErrorCode::Malformed,
                format!("vector payload of {} bytes for {count} residues", data.len()),
            ));
        }
        let exponents: Vec<BigUint> = data.chunks(width).map(BigUint::from_bytes_be).collect();
        let job_id = st.next_job;
        let mut job = MatVecJob::new(job_id, matrix, exponents, num_reduces as u64)?;
        job.strategy = self.inner.config.strategy;
        job.partitioner = self.inner.config.partitioner;
        job.block_rows = self.inner.config.block_rows;
        st.next_job += 1;
        st.jobs.insert(
            job_id,
            JobRecord {
                state: JobState::Pending,
                job: Some(job),
                error: None,
                stats: None,
            },
        );
        drop(st);
        self.inner
            .queue
            .lock()
            .unwrap()
            .send(job_id)
            .map_err(|_| reject(ErrorCode::Internal, "executor stopped"))?;
        Ok(Frame::ack(job_id.to_be_bytes().to_vec()))
    }

    fn status(&self, job_id: u64) -> Result<Frame, Rejection> {
        let state = self
            .job_state(job_id)
            .ok_or_else(|| reject(ErrorCode::UnknownJob, format!("unknown job {job_id}")))?;
        let mut p = job_id.to_be_bytes().to_vec();
        p.push(state as u8);
        Ok(Frame::ack(p))
    }

    fn fetch(&self, job_id: u64) -> Result<Frame, Rejection> {
        let st = self.inner.state.lock().unwrap();
        let rec = st
            .jobs
            .get(&job_id)
            .ok_or_else(|| reject(ErrorCode::UnknownJob, format!("unknown job {job_id}")))?;
        match rec.state {
            JobState::Done => {
                drop(st);
                let bytes = fs::read(self.result_path(job_id)).map_err(Error::from)?;
                Ok(Frame::ack(bytes))
            }
            JobState::Failed => Err(reject(
                ErrorCode::JobFailed,
                rec.error.clone().unwrap_or_default(),
            )),
            state => {
                let mut p = job_id.to_be_bytes().to_vec();
                p.push(state as u8);
                Ok(Frame::new(MsgType::NotReady, p))
            }
        }
    }
}

fn matrix_id_from_path(path: &Path) -> Option<u64> {
    let name = path.file_name()?.to_str()?;
    name.strip_prefix("matrix-")?
        .strip_suffix(".seig")?
        .parse()
        .ok()
}

fn executor(inner: Weak<Inner>, rx: Receiver<u64>) {
    while let Ok(job_id) = rx.recv() {
        let Some(inner) = inner.upgrade() else { return };
        {
            let mut paused = inner.paused.lock().unwrap();
            while *paused {
                paused = inner.resumed.wait(paused).unwrap();
            }
        }
        let job = {
            let mut st = inner.state.lock().unwrap();
            let Some(rec) = st.jobs.get_mut(&job_id) else { continue };
            rec.state = JobState::Running;
            rec.job.take()
        };
        let Some(job) = job else { continue };
        let result_path = inner.config.data_dir.join(format!("job-{job_id}.sevr"));
        let outcome = run_job(&job, inner.config.workers)
            .and_then(|(v, stats)| v.write(&result_path).map(|_| stats));
        let mut st = inner.state.lock().unwrap();
        let rec = st.jobs.get_mut(&job_id).expect("job record vanished");
        match outcome {
            Ok(stats) => {
                log::info!(
                    "job {job_id} done: {} exponentiations in {:?}",
                    stats.total_exponentiations(),
                    stats.elapsed
                );
                rec.state = JobState::Done;
                rec.stats = Some(stats);
            }
            Err(e) => {
                log::warn!("job {job_id} failed: {e}");
                rec.state = JobState::Failed;
                rec.error = Some(e.to_string());
            }
        }
    }
}
