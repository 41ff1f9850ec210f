use serde_json::{json, Value};

use signspot::fusion::checks::standard_gradient_checks;

use crate::config::resolve;
use crate::emit::to_canonical_pretty;
use crate::error::{CliError, CliResult};
use crate::formats::write_output;
use crate::Ctx;

#[derive(clap::Args)]
pub struct Args {
    /// Random instances per operation family.
    #[arg(long)]
    instances: Option<usize>,
    /// Central-difference step.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Maximum acceptable relative error.
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long, default_value = "-")]
    output: String,
}

pub fn run(args: Args, ctx: &Ctx) -> CliResult<()> {
    let instances = resolve(args.instances, ctx.config.usize("instances")?, 20);
    let epsilon = resolve(args.epsilon, ctx.config.f64("epsilon")?, 1e-6);
    let tolerance = resolve(args.tolerance, ctx.config.f64("tolerance")?, 1e-5);
    if instances == 0 || epsilon.is_nan() || epsilon <= 0.0 || tolerance.is_nan() || tolerance <= 0.0 {
        return Err(CliError::Usage(
            "--instances, --epsilon, and --tolerance must be positive".into(),
        ));
    }

    let families = standard_gradient_checks(ctx.seed, instances, epsilon);
    let mut checks = serde_json::Map::new();
    let mut all_pass = true;
    for family in &families {
        let pass = family.max_rel_error < tolerance;
        all_pass &= pass;
        checks.insert(
            family.name.to_string(),
            json!({"max_rel_error": family.max_rel_error, "pass": pass}),
        );
    }
    let report = json!({
        "schema": "fusion-report/1",
        "seed": ctx.seed,
        "instances": instances,
        "epsilon": epsilon,
        "tolerance": tolerance,
        "pass": all_pass,
        "checks": Value::Object(checks),
    });
    write_output(&args.output, &to_canonical_pretty(&report))
}
