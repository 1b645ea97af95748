use std::fs::File;
use std::io::BufWriter;

use noisereg::trainer::{train, write_records, Batch, Schedule, TrainConfig, TrainOutcome};
use noisereg::{NoiseScheme, RngStream};
use rayon::prelude::*;

use super::{mode, mode_name, normalization};
use crate::config::{BatchSpec, ModeName, ScheduleName};
use crate::data::build_problem;
use crate::output::{num, write_table};
use crate::{CliError, CliResult, Context};

/// Stream used for initial weights, separate from the trainer's noise and batch streams.
const INIT_STREAM: u64 = 2;

pub fn run(ctx: &Context) -> CliResult<()> {
    let cfg = &ctx.config;
    let (model, loss) = build_problem(cfg)?;
    let t = &cfg.train;
    let batch = match t.batch {
        BatchSpec::Full => Batch::Full,
        BatchSpec::Minibatch(b) => Batch::MiniBatch(b),
    };
    let schedule = match t.schedule {
        ScheduleName::Constant => Schedule::Constant,
        ScheduleName::Cosine => Schedule::Cosine,
    };
    let jobs: Vec<(u64, ModeName)> = ctx
        .seeds()
        .iter()
        .flat_map(|&s| cfg.noise.modes.iter().map(move |&m| (s, m)))
        .collect();

    let outcomes: Vec<CliResult<TrainOutcome>> = jobs
        .par_iter()
        .map(|&(seed, m)| {
            let scheme = NoiseScheme::new(
                mode(m),
                cfg.noise.sigma,
                normalization(cfg.noise.normalization),
                model.layer_count(),
            )?;
            let tc = TrainConfig {
                steps: t.steps,
                lr: t.lr,
                schedule,
                batch,
                scheme,
                seed,
                log_every: t.log_every,
            };
            let w0 = model.scaled_init(&mut RngStream::new(seed, INIT_STREAM));
            Ok(train(&model, &loss, &w0, &tc)?)
        })
        .collect();

    let mut summary = Vec::new();
    for (&(seed, m), outcome) in jobs.iter().zip(outcomes) {
        let outcome = outcome?;
        let path = ctx
            .out_dir
            .join(format!("train_seed{seed}_{}.csv", mode_name(m)));
        let file = File::create(&path)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
        write_records(&outcome.records, BufWriter::new(file))?;
        let last = outcome
            .last()
            .expect("the initial record is always present");
        if outcome.diverged {
            eprintln!(
                "seed {seed} {}: diverged after step {}",
                mode_name(m),
                last.step
            );
        }
        summary.push(vec![
            seed.to_string(),
            mode_name(m).to_string(),
            last.step.to_string(),
            num(last.train_loss),
            num(last.reg_value),
            num(last.effective_loss),
            outcome.diverged.to_string(),
        ]);
    }
    write_table(
        &ctx.out_dir.join("summary.csv"),
        &[
            "seed",
            "scheme",
            "last_step",
            "train_loss",
            "reg_value",
            "effective_loss",
            "diverged",
        ],
        &summary,
    )
}
