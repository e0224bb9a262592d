use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use seceig_core::codec::{DEFAULT_DECIMAL_DIGITS, DEFAULT_Q_BITS};
use seceig_core::service::{LoopbackTransport, TcpTransport, Transport};
use seceig_core::{DenseMatrix, Service, ServiceConfig};

mod attack;
mod bench;
mod cloud;
mod eigen;
mod error;
mod files;
mod keys;

use error::{CliError, CliResult, Context};
use files::DataDir;

#[derive(Parser)]
#[command(name = "seceig", version, about = "Top-k eigenvectors of a Paillier-encrypted matrix held by an untrusted server")]
struct Cli {
    /// Keys, codec parameters, owner secrets and service state live here.
    #[arg(long, env = "SECEIG_DATA_DIR", default_value = "seceig-data", global = true)]
    data_dir: PathBuf,

    /// Seeds every random draw; without it the OS entropy source is used.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a Paillier keypair and, with --n, the owner's codec and E(b0).
    Keygen(keys::KeygenArgs),
    /// Encrypt a plaintext matrix into a SEIG file.
    EncryptMatrix(keys::EncryptArgs),
    /// Run the matvec service over TCP.
    Serve(cloud::ServeArgs),
    /// Emulate the row collectors: upload encrypted rows and gather A b0.
    Collect(cloud::CollectArgs),
    /// Secure top-k eigenpairs.
    Eigen(eigen::EigenArgs),
    /// Ciphertext size tables and local encrypt/decrypt/matvec timings.
    Bench(bench::BenchArgs),
    /// Statistical inference attack and transcript uniformity audit.
    AttackSim(attack::AttackArgs),
}

pub struct Ctx {
    pub data: DataDir,
    pub seed: Option<u64>,
}

impl Ctx {
    pub fn rng(&self) -> ChaCha20Rng {
        match self.seed {
            Some(s) => ChaCha20Rng::seed_from_u64(s),
            None => ChaCha20Rng::from_entropy(),
        }
    }
}

#[derive(Args, Clone, Debug)]
pub struct CodecArgs {
    /// Fixed-point decimal digits.
    #[arg(long, default_value_t = DEFAULT_DECIMAL_DIGITS)]
    pub d: u8,

    /// Bit length of the blinding modulus q.
    #[arg(long, default_value_t = DEFAULT_Q_BITS)]
    pub q_bits: u32,

    /// Bound on |A_ij| used in the capacity check.
    #[arg(long, default_value_t = 1.0)]
    pub value_bound: f64,
}

/// Either a text matrix file or a seeded random symmetric matrix.
#[derive(Args, Clone, Debug)]
pub struct MatrixSource {
    /// Text matrix: "n_rows n_cols" then row-major decimals.
    #[arg(long, conflicts_with = "n")]
    pub input: Option<PathBuf>,

    /// Dimension of a random symmetric matrix with entries in [-value_bound, value_bound].
    #[arg(long)]
    pub n: Option<usize>,
}

impl MatrixSource {
    pub fn load(&self, codec: &CodecArgs, rng: &mut ChaCha20Rng) -> CliResult<DenseMatrix> {
        match (&self.input, self.n) {
            (Some(path), _) => DenseMatrix::read(path).context(path.display()),
            (None, Some(0)) => Err(CliError::config("--n must be positive")),
            (None, Some(n)) => Ok(DenseMatrix::random_symmetric(n, codec.value_bound, codec.d as u32, rng)),
            (None, None) => Err(CliError::config("give --input FILE or --n N")),
        }
    }
}

/// Where the cloud lives: a TCP address or an in-process service over a directory.
#[derive(Args, Clone, Debug)]
pub struct CloudTarget {
    /// Address of a running `seceig serve`.
    #[arg(long, conflicts_with = "cloud_dir")]
    pub connect: Option<String>,

    /// Run the service in-process over this directory.
    #[arg(long)]
    pub cloud_dir: Option<PathBuf>,

    /// Workers for an in-process service.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

impl CloudTarget {
    pub fn is_set(&self) -> bool {
        self.connect.is_some() || self.cloud_dir.is_some()
    }

    pub fn open(&self) -> CliResult<Box<dyn Transport>> {
        match (&self.connect, &self.cloud_dir) {
            (Some(addr), _) => Ok(Box::new(TcpTransport::connect(addr.as_str()).map_err(|e| {
                CliError::from(seceig_core::Error::Protocol(format!("connecting to {addr}: {e}")))
            })?)),
            (None, Some(dir)) => {
                std::fs::create_dir_all(dir).context(dir.display())?;
                Ok(Box::new(LoopbackTransport::new(in_process_service(dir.clone(), self.workers)?)))
            }
            (None, None) => Err(CliError::config("give --connect ADDR or --cloud-dir DIR")),
        }
    }
}

pub fn in_process_service(dir: PathBuf, workers: usize) -> CliResult<Service> {
    let mut config = ServiceConfig::new(dir);
    config.workers = workers;
    Service::new(config).map_err(|e| CliError::from(e).context("starting service"))
}

fn run(cli: Cli) -> CliResult<()> {
    let ctx = Ctx {
        data: DataDir::new(cli.data_dir),
        seed: cli.seed,
    };
    match cli.command {
        Command::Keygen(a) => keys::keygen(&a, &ctx),
        Command::EncryptMatrix(a) => keys::encrypt_matrix(&a, &ctx),
        Command::Serve(a) => cloud::serve(&a, &ctx),
        Command::Collect(a) => cloud::collect(&a, &ctx),
        Command::Eigen(a) => eigen::run(&a, &ctx),
        Command::Bench(a) => bench::run(&a, &ctx),
        Command::AttackSim(a) => attack::run(&a, &ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
