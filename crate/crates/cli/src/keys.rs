use std::path::PathBuf;

use clap::Args;
use seceig_core::codec::CodecParams;
use seceig_core::paillier::MIN_SECURE_KEY_BITS;
use seceig_core::protocol::encode_row;
use seceig_core::{EncryptedMatrixWriter, MatrixHeader, OwnerState, PaillierKeypair};

use crate::error::{CliError, CliResult, Context};
use crate::files::OwnerFile;
use crate::{CodecArgs, Ctx, MatrixSource};

#[derive(Args, Debug)]
pub struct KeygenArgs {
    #[arg(long, default_value_t = MIN_SECURE_KEY_BITS)]
    pub key_bits: u32,

    /// Matrix dimension; also selects q and draws the owner's b0.
    #[arg(long)]
    pub n: Option<usize>,

    #[command(flatten)]
    pub codec: CodecArgs,

    /// Replace existing key files.
    #[arg(long)]
    pub force: bool,
}

pub fn keygen(args: &KeygenArgs, ctx: &Ctx) -> CliResult<()> {
    let data = &ctx.data;
    if !args.force && (data.private_key_path().exists() || data.public_key_path().exists()) {
        return Err(CliError::config(format!(
            "keys already exist in {}; pass --force to replace them",
            data.root().display()
        )));
    }
    if args.n == Some(0) {
        return Err(CliError::config("--n must be positive"));
    }
    data.create()?;
    let mut rng = ctx.rng();
    let keypair = PaillierKeypair::generate(args.key_bits, &mut rng)?;
    if keypair.is_weak() {
        log::warn!("{}-bit keys are for testing only", args.key_bits);
    }
    data.write(&data.public_key_path(), &keypair.public.to_bytes())?;
    data.write(&data.private_key_path(), &keypair.private.to_bytes())?;
    println!("public key: {}", data.public_key_path().display());
    println!("secret key: {}", data.private_key_path().display());
    println!("key bits: {}", args.key_bits);

    let Some(n) = args.n else { return Ok(()) };
    let c = &args.codec;
    let codec = CodecParams::select(n, c.d, c.q_bits, c.value_bound, 1.0, keypair.public.n())?;
    let owner = OwnerState::with_keypair(keypair, codec, n, c.value_bound, &mut rng)?;
    data.write(&data.codec_path(), &owner.codec().to_bytes())?;
    owner
        .artifacts()
        .encrypted_b0
        .write(data.encrypted_b0_path())
        .context(data.encrypted_b0_path().display())?;
    let file = OwnerFile {
        value_bound: c.value_bound,
        b0: owner.b0().to_vec(),
        ab0: None,
    };
    data.write(&data.owner_path(), file.to_text().as_bytes())?;
    println!("codec: {} (d {}, q {} bits)", data.codec_path().display(), c.d, owner.codec().q().bits());
    println!("encrypted b0: {}", data.encrypted_b0_path().display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct EncryptArgs {
    #[command(flatten)]
    pub source: MatrixSource,

    /// Used only when the data directory has no codec file yet.
    #[command(flatten)]
    pub codec: CodecArgs,

    #[arg(long, default_value_t = 1)]
    pub matrix_id: u64,

    /// Defaults to matrix-<id>.seig in the data directory.
    #[arg(long)]
    pub output: Option<PathBuf>,

    /// Encrypt through the secret key's CRT path (same ciphertexts, less work).
    #[arg(long)]
    pub with_secret_key: bool,
}

pub fn encrypt_matrix(args: &EncryptArgs, ctx: &Ctx) -> CliResult<()> {
    let data = &ctx.data;
    let pk = data.public_key()?;
    let mut rng = ctx.rng();
    let matrix = args.source.load(&args.codec, &mut rng)?;
    let codec = if data.codec_path().exists() {
        data.codec()?
    } else {
        let c = &args.codec;
        let bound = c.value_bound.max(matrix.max_abs());
        let codec = CodecParams::select(matrix.n_cols(), c.d, c.q_bits, bound, 1.0, pk.n())?;
        data.write(&data.codec_path(), &codec.to_bytes())?;
        println!("codec: {} (d {}, q {} bits)", data.codec_path().display(), c.d, codec.q().bits());
        codec
    };
    let sk = if args.with_secret_key {
        Some(data.private_key()?)
    } else {
        None
    };
    let header = MatrixHeader::new(matrix.n_rows() as u64, matrix.n_cols() as u64, codec.clone(), pk.clone())?;
    let path = args.output.clone().unwrap_or_else(|| data.matrix_path(args.matrix_id));
    let mut writer = EncryptedMatrixWriter::create(&path, header).context(path.display())?;
    for (j, row) in matrix.rows().enumerate() {
        let encoded = encode_row(row, &codec).context(format!("row {j}"))?;
        let cts = match &sk {
            Some(sk) => sk.encrypt_vector(&encoded, &mut rng)?,
            None => pk.encrypt_vector(&encoded, &mut rng)?,
        };
        writer.append_row(j as u64, &cts)?;
    }
    let stored = writer.finalize()?;
    let payload = stored.header().payload_bytes();
    println!(
        "{}: {}x{} matrix, header {} bytes + payload {} bytes",
        path.display(),
        matrix.n_rows(),
        matrix.n_cols(),
        stored.header_len(),
        payload
    );
    Ok(())
}
