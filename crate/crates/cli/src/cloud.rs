use std::io::Write;

use clap::Args;
use seceig_core::codec::centered_lift;
use seceig_core::protocol::collector_submit;
use seceig_core::service::Server;
use seceig_core::{Error, MatrixHeader, ServiceClient};

use crate::error::{CliError, CliResult, Context};
use crate::{in_process_service, CloudTarget, CodecArgs, Ctx, MatrixSource};

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,

    /// 0 picks a free port; the bound address is printed either way.
    #[arg(long, default_value_t = 7878)]
    pub port: u16,

    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

pub fn serve(args: &ServeArgs, ctx: &Ctx) -> CliResult<()> {
    if args.workers == 0 {
        return Err(CliError::config("--workers must be at least 1"));
    }
    ctx.data.create()?;
    let service = in_process_service(ctx.data.root().to_path_buf(), args.workers)?;
    let addr = format!("{}:{}", args.host, args.port);
    let server = Server::bind(&addr, service).map_err(|e| CliError::config(format!("cannot listen on {addr}: {e}")))?;
    println!("listening on {}", server.local_addr());
    std::io::stdout().flush()?;
    server.join();
    Ok(())
}

#[derive(Args, Debug)]
pub struct CollectArgs {
    #[command(flatten)]
    pub source: MatrixSource,

    /// Only --value-bound and --d matter here (for --n generation).
    #[command(flatten)]
    pub codec: CodecArgs,

    #[command(flatten)]
    pub cloud: CloudTarget,

    #[arg(long, default_value_t = 1)]
    pub matrix_id: u64,
}

/// Each row's collector encrypts its row for the cloud and folds `E(b0)` into
/// `E(a · b0)`; the owner then decrypts those into `Ã b0`.
pub fn collect(args: &CollectArgs, ctx: &Ctx) -> CliResult<()> {
    let data = &ctx.data;
    let pk = data.public_key()?;
    let codec = data.codec()?;
    let eb0 = data.encrypted_b0()?;
    eb0.validate(&pk).context(data.encrypted_b0_path().display())?;
    let mut owner = data.owner()?;
    let sk = data.private_key()?;

    let mut rng = ctx.rng();
    let matrix = args.source.load(&args.codec, &mut rng)?;
    let n = eb0.len();
    if matrix.n_rows() != n || matrix.n_cols() != n {
        return Err(CliError::config(format!(
            "matrix is {}x{} but the owner set up n = {n}",
            matrix.n_rows(),
            matrix.n_cols()
        )));
    }
    if !matrix.is_symmetric() {
        return Err(CliError::config("the eigensolver needs a symmetric matrix"));
    }
    if matrix.max_abs() > owner.value_bound {
        return Err(CliError::config(format!(
            "entry magnitude {} exceeds the owner's value bound {}",
            matrix.max_abs(),
            owner.value_bound
        )));
    }
    if !args.cloud.is_set() {
        return Err(CliError::config("give --connect ADDR or --cloud-dir DIR"));
    }

    let mut client = ServiceClient::new(args.cloud.open()?);
    let header = MatrixHeader::new(n as u64, n as u64, codec.clone(), pk.clone())?;
    client.put_matrix_meta(args.matrix_id, &header)?;
    let width = header.ciphertext_width();
    let mut dots = Vec::with_capacity(n);
    for (j, row) in matrix.rows().enumerate() {
        let sub = collector_submit(&pk, &codec, &eb0.values, row, &mut rng).context(format!("row {j}"))?;
        client.put_row(args.matrix_id, j as u64, &sub.encrypted_row, width)?;
        dots.push(sub.encrypted_dot);
    }

    let plain = sk.decrypt_vector(&dots).map_err(|e| match e {
        Error::Decryption(m) => CliError::from(Error::Protocol(format!("collector result: {m}"))),
        other => other.into(),
    })?;
    owner.ab0 = Some(plain.iter().map(|m| centered_lift(m, pk.n())).collect());
    data.write(&data.owner_path(), owner.to_text().as_bytes())?;
    println!("matrix {}: uploaded {n} rows", args.matrix_id);
    println!("A b0 collected into {}", data.owner_path().display());
    Ok(())
}
