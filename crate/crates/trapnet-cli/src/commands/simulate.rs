//! `simulate`: integrate one ion trajectory through the oscillating field
//! and report how the averaged motion compares with the ponderomotive
//! picture.

use std::fmt::Write as _;

use anyhow::ensure;
use serde_json::json;

use trapnet::dynamics::{integrate, secular_compare, DriveParams, IonState, MIN_STEPS_PER_PERIOD};

use crate::io::{default_report_path, load_field, write_atomic, write_json_atomic};
use crate::{Outcome, SimulateArgs, SCHEMA_VERSION};

pub fn run(args: &SimulateArgs, dry_run: bool) -> anyhow::Result<Outcome> {
    let field = load_field(&args.field)?;
    let drive = DriveParams::new(args.q)?;
    let initial = IonState::new(args.start.point(), args.velocity.point())?;
    ensure!(
        args.dt > 0.0 && args.dt <= 1.0 / MIN_STEPS_PER_PERIOD,
        "time step must resolve the drive: 0 < dt <= {}",
        1.0 / MIN_STEPS_PER_PERIOD
    );
    ensure!(
        args.periods >= args.dt && args.periods.is_finite(),
        "duration must cover at least one step, got {} periods",
        args.periods
    );

    let report_path = args
        .report
        .clone()
        .unwrap_or_else(|| default_report_path(&args.out));
    let outputs = vec![args.out.clone(), report_path.clone()];

    if dry_run {
        return Ok(Outcome {
            outputs,
            details: json!({
                "q": args.q,
                "periods": args.periods,
                "steps": (args.periods / args.dt).round() as u64,
            }),
        });
    }

    let record = integrate(&field, &drive, &initial, args.periods, args.dt)?;

    let mut csv = String::with_capacity(record.times.len() * 64 + 32);
    csv.push_str("t,x,y,z,vx,vy,vz\n");
    for ((t, p), v) in record
        .times
        .iter()
        .zip(&record.positions)
        .zip(&record.velocities)
    {
        let _ = writeln!(csv, "{t},{},{},{},{},{},{}", p.x, p.y, p.z, v.x, v.y, v.z);
    }

    // The averaged-motion comparison needs a few full drive periods; too
    // short a run is reported as a note, not a failure.
    let (secular, secular_note) = match secular_compare(&record, &field, &drive) {
        Ok(report) => (json!(report), serde_json::Value::Null),
        Err(err) => (serde_json::Value::Null, json!(err.to_string())),
    };

    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "q": args.q,
        "periods": args.periods,
        "dt": record.dt,
        "samples": record.times.len(),
        "start": args.start.0,
        "velocity": args.velocity.0,
        "secular": secular,
        "secular_note": secular_note,
    });

    write_atomic(&args.out, csv.as_bytes())?;
    write_json_atomic(&report_path, &report)?;

    Ok(Outcome {
        outputs,
        details: json!({
            "samples": record.times.len(),
            "confined": report["secular"]["confined"],
        }),
    })
}
