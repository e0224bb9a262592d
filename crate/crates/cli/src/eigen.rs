use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use rand_chacha::ChaCha20Rng;
use seceig_core::eigen::{PLAIN_TOL, SECURE_TOL};
use seceig_core::paillier::MIN_SECURE_KEY_BITS;
use seceig_core::protocol::{RemoteCloud, SecureOutcome};
use seceig_core::service::{LoopbackTransport, Transport};
use seceig_core::{
    collector_submit, owner_setup, secure_topk, topk, DenseBackend, DenseMatrix, EigenResult, SecureSession,
    ServiceClient, SetupParams, UserGrant,
};

use crate::error::{CliError, CliResult, Context};
use crate::files::ritz_vector_bytes;
use crate::{in_process_service, CloudTarget, CodecArgs, Ctx, MatrixSource};

#[derive(Args, Debug)]
pub struct EigenArgs {
    #[arg(long, default_value_t = 1)]
    pub k: usize,

    /// Lanczos steps, or power iterations when k = 1. Defaults to min(n, 40)
    /// and 100 respectively.
    #[arg(long)]
    pub iters: Option<usize>,

    /// Random seed vectors in the perturbation pool.
    #[arg(long, default_value_t = 5)]
    pub m: usize,

    /// Power-iteration convergence tolerance.
    #[arg(long, default_value_t = SECURE_TOL)]
    pub tol: f64,

    #[arg(long, default_value_t = 1)]
    pub num_reduces: u32,

    /// Run owner, collectors, cloud and user in one process. This is the
    /// default unless --connect or --cloud-dir is given.
    #[arg(long)]
    pub local: bool,

    /// Key size for --local runs.
    #[arg(long, default_value_t = MIN_SECURE_KEY_BITS)]
    pub key_bits: u32,

    #[command(flatten)]
    pub source: MatrixSource,

    #[command(flatten)]
    pub codec: CodecArgs,

    #[command(flatten)]
    pub cloud: CloudTarget,

    #[arg(long, default_value_t = 1)]
    pub matrix_id: u64,

    /// Also write report.txt and ritz-<i>.bin here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

struct Run {
    n: usize,
    iters: usize,
    key_bits: u32,
    grant: UserGrant,
    outcome: SecureOutcome,
    plain: Option<EigenResult>,
}

pub fn run(args: &EigenArgs, ctx: &Ctx) -> CliResult<()> {
    if args.k == 0 {
        return Err(CliError::config("--k must be positive"));
    }
    if args.m == 0 {
        return Err(CliError::config("--m must be positive"));
    }
    let remote = !args.local && (args.cloud.connect.is_some() || args.cloud.cloud_dir.is_some());
    let run = if remote { run_remote(args, ctx)? } else { run_local(args, ctx)? };
    let report = render(args, &run);
    print!("{report}");
    if !run.outcome.result.converged {
        log::warn!("not converged; see the reported residuals");
    }
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).context(dir.display())?;
        let path = dir.join("report.txt");
        std::fs::write(&path, &report).context(path.display())?;
        for (i, v) in run.outcome.result.vectors.iter().enumerate() {
            let path = dir.join(format!("ritz-{i}.bin"));
            std::fs::write(&path, ritz_vector_bytes(v)).context(path.display())?;
        }
    }
    Ok(())
}

fn default_iters(k: usize, n: usize, given: Option<usize>) -> usize {
    given.unwrap_or(if k == 1 { 100 } else { n.min(40) })
}

fn run_local(args: &EigenArgs, ctx: &Ctx) -> CliResult<Run> {
    let mut rng = ctx.rng();
    let matrix = args.source.load(&args.codec, &mut rng)?;
    let n = matrix.n_rows();
    check_matrix(&matrix, args.codec.value_bound)?;
    let c = &args.codec;
    let params = SetupParams {
        n,
        key_bits: args.key_bits,
        decimal_digits: c.d,
        q_bits: c.q_bits,
        value_bound: c.value_bound,
    };
    let mut owner = owner_setup(&params, &mut rng)?;
    let art = owner.artifacts();

    let scratch;
    let dir = match &args.cloud.cloud_dir {
        Some(d) => {
            std::fs::create_dir_all(d).context(d.display())?;
            d.clone()
        }
        None => {
            scratch = tempfile::tempdir()?;
            scratch.path().to_path_buf()
        }
    };
    let service = in_process_service(dir, args.cloud.workers)?;
    let mut client: ServiceClient<Box<dyn Transport>> = ServiceClient::new(Box::new(LoopbackTransport::new(service)));
    let header = owner.matrix_header()?;
    client.put_matrix_meta(args.matrix_id, &header)?;
    let width = header.ciphertext_width();
    let mut pieces = Vec::with_capacity(n);
    for (j, row) in matrix.rows().enumerate() {
        let sub = collector_submit(&art.public_key, &art.codec, &art.encrypted_b0.values, row, &mut rng)?;
        client.put_row(args.matrix_id, j as u64, &sub.encrypted_row, width)?;
        pieces.push(Some(sub.encrypted_dot));
    }
    owner.owner_collect(&pieces)?;
    let grant = owner.grant()?;
    solve(args, client, grant, Some(matrix), args.key_bits, rng)
}

fn run_remote(args: &EigenArgs, ctx: &Ctx) -> CliResult<Run> {
    let data = &ctx.data;
    let owner = data.owner()?;
    let ab0 = owner
        .ab0
        .ok_or_else(|| CliError::config("no A b0 in the owner file; run `seceig collect` first"))?;
    let private_key = data.private_key()?;
    let key_bits = private_key.public_key().key_bits();
    let grant = UserGrant {
        private_key,
        codec: data.codec()?,
        value_bound: owner.value_bound,
        b0: owner.b0,
        ab0,
    };
    let client = ServiceClient::new(args.cloud.open()?);
    solve(args, client, grant, None, key_bits, ctx.rng())
}

fn check_matrix(m: &DenseMatrix, bound: f64) -> CliResult<()> {
    if m.n_rows() != m.n_cols() || !m.is_symmetric() {
        return Err(CliError::config("the eigensolver needs a square symmetric matrix"));
    }
    if m.max_abs() > bound {
        return Err(CliError::config(format!(
            "entry magnitude {} exceeds --value-bound {bound}",
            m.max_abs()
        )));
    }
    Ok(())
}

fn solve(
    args: &EigenArgs,
    client: ServiceClient<Box<dyn Transport>>,
    grant: UserGrant,
    matrix: Option<DenseMatrix>,
    key_bits: u32,
    rng: ChaCha20Rng,
) -> CliResult<Run> {
    let n = grant.n();
    if args.k > n {
        return Err(CliError::config(format!("--k {} exceeds n = {n}", args.k)));
    }
    let iters = default_iters(args.k, n, args.iters);
    if iters < args.k {
        return Err(CliError::config(format!("--iters {iters} is below --k {}", args.k)));
    }
    let mut cloud = RemoteCloud::new(client, args.matrix_id, grant.private_key.clone(), grant.codec.clone(), n);
    cloud.num_reduces = args.num_reduces;
    let mut session = SecureSession::new(cloud, &grant, args.m, rng)?;
    let outcome = secure_topk(&mut session, args.k, iters, args.tol)?;
    let plain = match matrix {
        Some(m) => {
            let tol = PLAIN_TOL.min(args.tol);
            Some(topk(&mut DenseBackend::new(m)?, session.start_vector(), args.k, iters, tol)?)
        }
        None => None,
    };
    Ok(Run {
        n,
        iters,
        key_bits,
        grant,
        outcome,
        plain,
    })
}

fn render(args: &EigenArgs, run: &Run) -> String {
    let r = &run.outcome.result;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "n {}  k {}  iters {}  m {}  d {}  q_bits {}  key_bits {}",
        run.n,
        args.k,
        run.iters,
        args.m,
        run.grant.codec.decimal_digits(),
        run.grant.codec.q().bits(),
        run.key_bits
    );
    let _ = writeln!(
        s,
        "cloud calls: {} seed, {} iteration, {} residual",
        run.outcome.seed_calls, run.outcome.iteration_calls, run.outcome.residual_calls
    );
    let breakdown = r.breakdown.map_or("none".to_string(), |d| format!("dimension {d}"));
    let _ = writeln!(
        s,
        "steps {}  breakdown {}  converged {}",
        r.iterations,
        breakdown,
        if r.converged { "yes" } else { "no" }
    );
    match &run.plain {
        Some(_) => {
            let _ = writeln!(s, "rank  eigenvalue  residual  plaintext  rel_diff");
        }
        None => {
            let _ = writeln!(s, "rank  eigenvalue  residual");
        }
    }
    for (i, (value, residual)) in r.values.iter().zip(&r.residuals).enumerate() {
        let _ = write!(s, "{i}  {value:+.12e}  {residual:.3e}");
        if let Some(p) = &run.plain {
            let pv = p.values[i];
            let rel = (value - pv).abs() / pv.abs().max(f64::MIN_POSITIVE);
            let _ = write!(s, "  {pv:+.12e}  {rel:.3e}");
        }
        s.push('\n');
    }
    s
}
