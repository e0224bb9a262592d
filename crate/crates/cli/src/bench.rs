use std::time::{Duration, Instant};

use clap::Args;
use num_bigint::RandBigInt;
use seceig_core::paillier::{ciphertext_width, MIN_SECURE_KEY_BITS};
use seceig_core::protocol::{encode_row, random_residues};
use seceig_core::store::matrix_payload_bytes;
use seceig_core::{run_job, DenseMatrix, EncryptedMatrixWriter, EncryptedVector, MatVecJob, MatrixHeader, PaillierKeypair};
use seceig_core::codec::CodecParams;

use crate::error::{CliError, CliResult};
use crate::Ctx;

/// Published figures for a 10,000-dimensional vector and matrix at 1024-bit keys.
const REF_N: u64 = 10_000;
const REF_VECTOR_MB: f64 = 2.56;
const REF_MATRIX_GB: f64 = 25.8;
const TIMING_LABEL: &str =
    "hardware-dependent; published reference values: encrypt 56 s / decrypt 31 s per 10,000-dim vector";

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, default_value_t = MIN_SECURE_KEY_BITS)]
    pub key_bits: u32,

    #[arg(long, default_value_t = REF_N as usize)]
    pub n: usize,

    /// Skip the matrix size row and the matvec timing.
    #[arg(long)]
    pub vector_only: bool,

    /// Encryptions and decryptions actually timed; whole-vector times are
    /// extrapolated from these.
    #[arg(long, default_value_t = 50)]
    pub samples: usize,

    /// Side of the matrix used for the matvec timing.
    #[arg(long, default_value_t = 20)]
    pub matvec_n: usize,

    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

pub fn run(args: &BenchArgs, ctx: &Ctx) -> CliResult<()> {
    if args.n == 0 || args.samples == 0 || args.workers == 0 {
        return Err(CliError::config("--n, --samples and --workers must be positive"));
    }
    let n = args.n as u64;
    let width = ciphertext_width(args.key_bits) as u64;
    let vector_header = 18u64;
    println!("ciphertext width: {width} bytes ({}-bit key)", args.key_bits);
    println!(
        "encrypted vector, n = {n}: payload {} bytes, SEVR file {} bytes",
        n * width,
        n * width + vector_header
    );
    if n == REF_N {
        println!(
            "  published reference: {REF_VECTOR_MB} MB; computed {:.2} MB",
            (n * width) as f64 / 1e6
        );
    }
    if !args.vector_only {
        let payload = matrix_payload_bytes(n, n, args.key_bits);
        println!("encrypted matrix, n = {n}: payload {payload} bytes ({:.2} GB)", payload as f64 / 1e9);
        if n == REF_N {
            let diff = (payload as f64 / 1e9 - REF_MATRIX_GB).abs() / REF_MATRIX_GB;
            println!("  published reference: {REF_MATRIX_GB} GB; difference {:.2}%", 100.0 * diff);
        }
    }

    let mut rng = ctx.rng();
    let keypair = PaillierKeypair::generate(args.key_bits, &mut rng)?;
    let pk = &keypair.public;
    let plain: Vec<_> = (0..args.samples).map(|_| rng.gen_biguint_below(pk.n())).collect();
    let t = Instant::now();
    let cts = pk.encrypt_vector(&plain, &mut rng)?;
    let enc = secs(t.elapsed()) / args.samples as f64;
    let t = Instant::now();
    let back = keypair.private.decrypt_vector(&cts)?;
    let dec = secs(t.elapsed()) / args.samples as f64;
    if back != plain {
        return Err(CliError::from(seceig_core::Error::Numerical("decryption mismatch".into())));
    }

    println!("timings ({TIMING_LABEL})");
    println!(
        "  encrypt: {:.1} us per entry, {:.2} s per {n}-dim vector (extrapolated from {} samples)",
        enc * 1e6,
        enc * n as f64,
        args.samples
    );
    println!(
        "  decrypt: {:.1} us per entry, {:.2} s per {n}-dim vector (extrapolated from {} samples)",
        dec * 1e6,
        dec * n as f64,
        args.samples
    );
    if !args.vector_only {
        let (elapsed, exps) = time_matvec(args, &keypair, &mut rng)?;
        println!(
            "  matvec {0}x{0}: {1:.3} s, {2} exponentiations, {3} worker(s)",
            args.matvec_n,
            secs(elapsed),
            exps,
            args.workers
        );
    }
    Ok(())
}

fn time_matvec(args: &BenchArgs, keypair: &PaillierKeypair, rng: &mut rand_chacha::ChaCha20Rng) -> CliResult<(Duration, u64)> {
    let m = args.matvec_n;
    if m == 0 {
        return Err(CliError::config("--matvec-n must be positive"));
    }
    let matrix = DenseMatrix::random_symmetric(m, 1.0, 6, rng);
    let codec = CodecParams::select(m, 6, 128, 1.0, 1.0, keypair.public.n())?;
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("bench.seig");
    let header = MatrixHeader::new(m as u64, m as u64, codec.clone(), keypair.public.clone())?;
    let mut writer = EncryptedMatrixWriter::create(&path, header)?;
    for (j, row) in matrix.rows().enumerate() {
        let cts = keypair.private.encrypt_vector(&encode_row(row, &codec)?, rng)?;
        writer.append_row(j as u64, &cts)?;
    }
    let stored = writer.finalize()?;
    let job = MatVecJob::new(1, stored, random_residues(m, codec.q(), rng), 1)?;
    let (result, stats): (EncryptedVector, _) = run_job(&job, args.workers)?;
    debug_assert_eq!(result.len(), m);
    Ok((stats.elapsed, stats.total_exponentiations()))
}
