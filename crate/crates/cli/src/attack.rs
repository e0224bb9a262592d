use clap::Args;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use seceig_core::security::{
    log2_samples_for_unit_variance, protocol_transcripts, simulate_attack, uniformity_audit, AttackConfig,
};

use crate::error::{CliError, CliResult};
use crate::Ctx;

#[derive(Args, Debug)]
pub struct AttackArgs {
    /// Blinding modulus is 2^q_bits for the variance experiment.
    #[arg(long, default_value_t = 16)]
    pub q_bits: u32,

    #[arg(long, default_value_t = 4)]
    pub n: usize,

    /// Perturbed samples the attacker averages, one experiment per value.
    #[arg(long, value_delimiter = ',', default_values_t = [500, 1000, 2000])]
    pub samples: Vec<usize>,

    /// Independent estimates per experiment.
    #[arg(long, default_value_t = 300)]
    pub trials: usize,

    #[arg(long, default_value_t = 5)]
    pub m: usize,

    /// Modulus 2^audit_q_bits for the uniformity audit; 0 skips the audit.
    #[arg(long, default_value_t = 13)]
    pub audit_q_bits: u32,

    /// Components per audited vector.
    #[arg(long, default_value_t = 100)]
    pub audit_n: usize,

    /// Audited vectors: sessions x iterations.
    #[arg(long, default_value_t = 100)]
    pub audit_sessions: usize,

    #[arg(long, default_value_t = 10)]
    pub audit_iters: usize,

    #[arg(long, default_value_t = 16)]
    pub bins: usize,

    /// Print the variance table as CSV.
    #[arg(long)]
    pub csv: bool,
}

pub fn run(args: &AttackArgs, ctx: &Ctx) -> CliResult<()> {
    if !(2..=32).contains(&args.q_bits) {
        return Err(CliError::config("--q-bits must lie in [2, 32]"));
    }
    let seed = ctx.seed.unwrap_or_else(|| rand::thread_rng().next_u64());
    let q = 1u64 << args.q_bits;
    println!("seed {seed}  q 2^{}  n {}  m {}  trials {}", args.q_bits, args.n, args.m, args.trials);
    if args.csv {
        println!("samples,empirical_variance,predicted_variance,relative_error,bias,mean_r,exact_mean_r");
    } else {
        println!("samples  empirical_var  predicted_var  rel_err  bias  mean_r  exact_mean_r");
    }
    let mut previous: Option<(usize, f64)> = None;
    for &samples in &args.samples {
        let rep = simulate_attack(&AttackConfig {
            n: args.n,
            q,
            samples,
            trials: args.trials,
            m: args.m,
            seed,
        })?;
        let cols = [
            rep.empirical_variance,
            rep.predicted_variance,
            rep.relative_error(),
            rep.bias,
            rep.empirical_mean_r,
            rep.exact_mean_r,
        ];
        if args.csv {
            let rest: Vec<String> = cols.iter().map(|c| format!("{c}")).collect();
            println!("{samples},{}", rest.join(","));
        } else {
            println!(
                "{samples}  {:.4e}  {:.4e}  {:.3}  {:+.2}  {:.1}  {:.1}",
                cols[0], cols[1], cols[2], cols[3], cols[4], cols[5]
            );
        }
        if let Some((n0, v0)) = previous {
            println!(
                "  variance ratio {n0} -> {samples}: {:.3} (law {:.3})",
                rep.empirical_variance / v0,
                n0 as f64 / samples as f64
            );
        }
        previous = Some((samples, rep.empirical_variance));
    }
    println!(
        "samples for unit variance at q = 2^128: about 2^{:.2}",
        log2_samples_for_unit_variance(128)
    );

    if args.audit_q_bits == 0 {
        return Ok(());
    }
    if !(2..=32).contains(&args.audit_q_bits) {
        return Err(CliError::config("--audit-q-bits must lie in [2, 32]"));
    }
    let aq = 1u64 << args.audit_q_bits;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let rows: Vec<Vec<i64>> = (0..args.audit_n)
        .map(|_| (0..args.audit_n).map(|_| rng.gen_range(-5..=5)).collect())
        .collect();
    for (label, perturbed) in [("perturbed", true), ("control r = 0", false)] {
        let vectors = protocol_transcripts(&rows, aq, args.m, args.audit_sessions, args.audit_iters, perturbed, seed)?;
        let rep = uniformity_audit(&vectors, aq, args.bins)?;
        println!(
            "audit {label}: {} vectors, {:.1}% of components uniform at p > 0.01: {}",
            vectors.len(),
            100.0 * rep.uniform_fraction(),
            if rep.passed() { "PASS" } else { "FAIL" }
        );
    }
    Ok(())
}
