//! Top-k eigenvectors of a matrix stored Paillier-encrypted on an untrusted server.
//!
//! The server holds `E(A)` and multiplies it by plaintext vectors it receives.
//! The client blinds every vector with a random combination of seed vectors
//! and earlier iterates modulo a prime `q`, then strips the blinding from the
//! decrypted product using images it already knows. Around that blinded
//! matvec sits an ordinary power / Lanczos iteration.

pub mod codec;
pub mod eigen;
pub mod engine;
pub mod error;
pub mod matrix;
pub mod modexp;
pub mod paillier;
pub mod primes;
pub mod protocol;
pub mod security;
pub mod service;
pub mod store;
pub mod wire;

pub use codec::{CodecParams, EncodedScalar};
pub use eigen::{topk, DenseBackend, EigenResult, MatVecBackend};
pub use engine::{run_job, MatVecJob, Partitioner};
pub use error::{Error, Result};
pub use matrix::DenseMatrix;
pub use modexp::ModPowStrategy;
pub use paillier::{Ciphertext, PaillierKeypair, PaillierPrivateKey, PaillierPublicKey};
pub use protocol::{
    collector_submit, owner_setup, perturb, recover, secure_topk, user_prepare_pool, OwnerState,
    PerturbationPool, SecureSession, SetupParams, UserGrant,
};
pub use service::{Service, ServiceClient, ServiceConfig};
pub use store::{EncryptedMatrix, EncryptedMatrixWriter, EncryptedVector, MatrixHeader};
